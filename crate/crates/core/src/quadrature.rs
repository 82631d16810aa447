//! One-dimensional quadrature rules as node/weight lists.

use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// `n`-point Gauss–Legendre rule on `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    let n = NonZeroUsize::new(n).ok_or(Error::EmptyGrid)?;
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    Ok(GaussLegendre::new(n)
        .as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect())
}

/// Composite Gauss–Legendre on `[a, b]` with panels no wider than `width`.
pub fn composite_gauss_legendre(n: usize, width: f64, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    if !(width > 0.0) {
        return Err(Error::InvalidArgument(
            "panel width must be positive".into(),
        ));
    }
    let panels = ((b - a) / width).ceil().max(1.0) as usize;
    let h = (b - a) / panels as f64;
    let mut out = Vec::with_capacity(panels * n);
    for k in 0..panels {
        let lo = a + k as f64 * h;
        out.extend(gauss_legendre(n, lo, lo + h)?);
    }
    Ok(out)
}

/// `n`-point midpoint rule on `[a, b]`.
pub fn midpoint(n: usize, a: f64, b: f64) -> Result<Vec<(f64, f64)>> {
    if n == 0 {
        return Err(Error::EmptyGrid);
    }
    let h = (b - a) / n as f64;
    Ok((0..n).map(|i| (a + (i as f64 + 0.5) * h, h)).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn integrate(rule: &[(f64, f64)], f: impl Fn(f64) -> f64) -> f64 {
        rule.iter().map(|&(x, w)| w * f(x)).sum()
    }

    #[test]
    fn gauss_legendre_on_interval() {
        let r = gauss_legendre(4, 0.0, 2.0).unwrap();
        assert!((integrate(&r, |x| x.powi(7)) - 32.0).abs() < 1e-12);
        assert!(gauss_legendre(0, 0.0, 1.0).is_err());
    }

    #[test]
    fn composite_exp() {
        let r = composite_gauss_legendre(16, 0.5, -1.0, 1.0).unwrap();
        assert_eq!(r.len(), 64);
        let exact = 1f64.exp() - (-1f64).exp();
        assert!((integrate(&r, f64::exp) - exact).abs() < 1e-14);
    }

    #[test]
    fn midpoint_is_exact_on_trig_polynomials() {
        let r = midpoint(8, 0.0, 1.0).unwrap();
        let f = |x: f64| (2.0 * std::f64::consts::PI * x).cos().powi(2);
        assert!((integrate(&r, f) - 0.5).abs() < 1e-15);
    }
}
