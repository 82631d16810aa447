//! Second-order truncated Taylor arithmetic in several variables.
//!
//! A [`Jet`] carries a value, its gradient and its (packed, symmetric) Hessian
//! with respect to `nvars` seed variables. Arithmetic propagates derivatives
//! exactly up to second order. A jet also records how many derivative orders
//! are trustworthy: differentiating a jet consumes one order, and anything
//! combined with a lower-order jet inherits the lower order.

use std::ops::{Add, Div, Mul, Neg, Sub};

#[inline]
fn tri_len(n: usize) -> usize {
    n * (n + 1) / 2
}

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    value: f64,
    grad: Vec<f64>,
    hess: Vec<f64>,
    order: i8,
}

impl Jet {
    /// A jet with no seed variables: plain value arithmetic.
    pub fn scalar(value: f64) -> Self {
        Jet {
            value,
            grad: Vec::new(),
            hess: Vec::new(),
            order: 2,
        }
    }

    pub fn constant(value: f64, nvars: usize) -> Self {
        Jet {
            value,
            grad: vec![0.0; nvars],
            hess: vec![0.0; tri_len(nvars)],
            order: 2,
        }
    }

    /// The seed variable `index` at `value`: gradient `e_index`, zero Hessian.
    pub fn variable(value: f64, index: usize, nvars: usize) -> Self {
        let mut jet = Self::constant(value, nvars);
        jet.grad[index] = 1.0;
        jet
    }

    /// Seeds one variable per coordinate of `point`.
    pub fn seed(point: &[f64]) -> Vec<Jet> {
        let n = point.len();
        point
            .iter()
            .enumerate()
            .map(|(i, &x)| Jet::variable(x, i, n))
            .collect()
    }

    pub fn from_parts(value: f64, grad: Vec<f64>, hess_full: &[f64], order: i8) -> Self {
        let n = grad.len();
        assert_eq!(hess_full.len(), n * n, "hessian must be n x n");
        let mut hess = vec![0.0; tri_len(n)];
        for i in 0..n {
            for j in i..n {
                hess[packed(n, i, j)] = 0.5 * (hess_full[i * n + j] + hess_full[j * n + i]);
            }
        }
        Jet {
            value,
            grad,
            hess,
            order,
        }
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.value
    }

    #[inline]
    pub fn nvars(&self) -> usize {
        self.grad.len()
    }

    /// Number of valid derivative orders: 2, 1, 0, or -1 when even the value
    /// is unavailable.
    #[inline]
    pub fn order(&self) -> i8 {
        self.order
    }

    #[inline]
    pub fn grad(&self) -> &[f64] {
        &self.grad
    }

    #[inline]
    pub fn d(&self, i: usize) -> f64 {
        self.grad[i]
    }

    #[inline]
    pub fn dd(&self, i: usize, j: usize) -> f64 {
        self.hess[packed(self.nvars(), i, j)]
    }

    /// Derivative with respect to seed variable `j`, as a jet one order lower.
    pub fn partial(&self, j: usize) -> Jet {
        let n = self.nvars();
        let grad = (0..n).map(|k| self.dd(j, k)).collect();
        Jet {
            value: self.grad[j],
            grad,
            hess: vec![0.0; tri_len(n)],
            order: self.order - 1,
        }
    }

    /// Chain rule: `self` is a jet in variables `y` at `y0`, `inner[k]` gives
    /// `y_k` as a jet in some other variables `x`. Returns `self ∘ y` in `x`.
    pub fn compose(&self, inner: &[Jet]) -> Jet {
        assert_eq!(inner.len(), self.nvars(), "composition arity");
        let m = inner.first().map_or(0, Jet::nvars);
        let mut grad = vec![0.0; m];
        let mut hess = vec![0.0; tri_len(m)];
        let mut order = self.order;
        for (k, y) in inner.iter().enumerate() {
            order = order.min(y.order);
            let gk = self.grad[k];
            if gk != 0.0 {
                for (g, yg) in grad.iter_mut().zip(&y.grad) {
                    *g += gk * yg;
                }
                for (h, yh) in hess.iter_mut().zip(&y.hess) {
                    *h += gk * yh;
                }
            }
        }
        for (k, yk) in inner.iter().enumerate() {
            for (l, yl) in inner.iter().enumerate() {
                let hkl = self.dd(k, l);
                if hkl == 0.0 {
                    continue;
                }
                for a in 0..m {
                    let ga = yk.grad[a];
                    if ga == 0.0 {
                        continue;
                    }
                    for b in a..m {
                        hess[packed(m, a, b)] += hkl * ga * yl.grad[b];
                    }
                }
            }
        }
        Jet {
            value: self.value,
            grad,
            hess,
            order,
        }
    }

    /// Applies a scalar function given its value and first two derivatives at
    /// `self.value()`.
    pub fn apply(&self, f: f64, f1: f64, f2: f64) -> Jet {
        let n = self.nvars();
        let grad: Vec<f64> = self.grad.iter().map(|g| f1 * g).collect();
        let mut hess: Vec<f64> = self.hess.iter().map(|h| f1 * h).collect();
        if f2 != 0.0 {
            for i in 0..n {
                let gi = self.grad[i];
                if gi == 0.0 {
                    continue;
                }
                for j in i..n {
                    hess[packed(n, i, j)] += f2 * gi * self.grad[j];
                }
            }
        }
        Jet {
            value: f,
            grad,
            hess,
            order: self.order,
        }
    }

    pub fn exp(&self) -> Jet {
        let e = self.value.exp();
        self.apply(e, e, e)
    }

    pub fn ln(&self) -> Jet {
        let x = self.value;
        self.apply(x.ln(), 1.0 / x, -1.0 / (x * x))
    }

    pub fn sqrt(&self) -> Jet {
        let s = self.value.sqrt();
        self.apply(s, 0.5 / s, -0.25 / (s * s * s))
    }

    pub fn recip(&self) -> Jet {
        let r = 1.0 / self.value;
        self.apply(r, -r * r, 2.0 * r * r * r)
    }

    pub fn powi(&self, k: i32) -> Jet {
        let x = self.value;
        let kf = f64::from(k);
        let f1 = if k == 0 { 0.0 } else { kf * x.powi(k - 1) };
        let f2 = if k == 0 || k == 1 {
            0.0
        } else {
            kf * (kf - 1.0) * x.powi(k - 2)
        };
        self.apply(x.powi(k), f1, f2)
    }

    pub fn sin(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.apply(s, c, -s)
    }

    pub fn cos(&self) -> Jet {
        let (s, c) = self.value.sin_cos();
        self.apply(c, -s, -c)
    }

    pub fn scale(&self, k: f64) -> Jet {
        Jet {
            value: self.value * k,
            grad: self.grad.iter().map(|g| g * k).collect(),
            hess: self.hess.iter().map(|h| h * k).collect(),
            order: self.order,
        }
    }

    /// `self += k * other`, in place.
    pub fn add_scaled(&mut self, k: f64, other: &Jet) {
        self.value += k * other.value;
        for (a, b) in self.grad.iter_mut().zip(&other.grad) {
            *a += k * b;
        }
        for (a, b) in self.hess.iter_mut().zip(&other.hess) {
            *a += k * b;
        }
        self.order = self.order.min(other.order);
    }

    fn zip_with(&self, other: &Jet, f: impl Fn(f64, f64) -> f64) -> Jet {
        assert_eq!(self.nvars(), other.nvars(), "jet arity mismatch");
        Jet {
            value: f(self.value, other.value),
            grad: self
                .grad
                .iter()
                .zip(&other.grad)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            hess: self
                .hess
                .iter()
                .zip(&other.hess)
                .map(|(&a, &b)| f(a, b))
                .collect(),
            order: self.order.min(other.order),
        }
    }

    fn product(&self, other: &Jet) -> Jet {
        let n = self.nvars();
        assert_eq!(n, other.nvars(), "jet arity mismatch");
        let (a, b) = (self.value, other.value);
        let grad = self
            .grad
            .iter()
            .zip(&other.grad)
            .map(|(ga, gb)| a * gb + b * ga)
            .collect();
        let mut hess: Vec<f64> = self
            .hess
            .iter()
            .zip(&other.hess)
            .map(|(ha, hb)| a * hb + b * ha)
            .collect();
        for i in 0..n {
            for j in i..n {
                hess[packed(n, i, j)] +=
                    self.grad[i] * other.grad[j] + self.grad[j] * other.grad[i];
            }
        }
        Jet {
            value: a * b,
            grad,
            hess,
            order: self.order.min(other.order),
        }
    }
}

/// Index of `(i, j)` in a packed upper-triangular `n x n` matrix.
#[inline]
pub(crate) fn packed(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * (2 * n - i + 1) / 2 + (j - i)
}

macro_rules! forward_binop {
    ($trait:ident, $method:ident, $body:expr) => {
        impl $trait<&Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                let f: fn(&Jet, &Jet) -> Jet = $body;
                f(self, rhs)
            }
        }
        impl $trait<Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&Jet> for Jet {
            type Output = Jet;
            fn $method(self, rhs: &Jet) -> Jet {
                (&self).$method(rhs)
            }
        }
        impl $trait<Jet> for &Jet {
            type Output = Jet;
            fn $method(self, rhs: Jet) -> Jet {
                self.$method(&rhs)
            }
        }
    };
}

forward_binop!(Add, add, |a, b| a.zip_with(b, |x, y| x + y));
forward_binop!(Sub, sub, |a, b| a.zip_with(b, |x, y| x - y));
forward_binop!(Mul, mul, |a, b| a.product(b));
forward_binop!(Div, div, |a, b| a.product(&b.recip()));

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Neg for Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        self.scale(-1.0)
    }
}

impl Add<f64> for &Jet {
    type Output = Jet;
    fn add(self, rhs: f64) -> Jet {
        let mut out = self.clone();
        out.value += rhs;
        out
    }
}

impl Add<f64> for Jet {
    type Output = Jet;
    fn add(mut self, rhs: f64) -> Jet {
        self.value += rhs;
        self
    }
}

impl Sub<f64> for &Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Sub<f64> for Jet {
    type Output = Jet;
    fn sub(self, rhs: f64) -> Jet {
        self + (-rhs)
    }
}

impl Mul<f64> for &Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Mul<f64> for Jet {
    type Output = Jet;
    fn mul(self, rhs: f64) -> Jet {
        self.scale(rhs)
    }
}

impl Div<f64> for &Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

impl Div<f64> for Jet {
    type Output = Jet;
    fn div(self, rhs: f64) -> Jet {
        self.scale(1.0 / rhs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * (1.0 + a.abs().max(b.abs()))
    }

    #[test]
    fn product_rule_second_order() {
        // f(x, y) = x^2 y at (3, 2)
        let v = Jet::seed(&[3.0, 2.0]);
        let f = &(&v[0] * &v[0]) * &v[1];
        assert!(close(f.value(), 18.0));
        assert!(close(f.d(0), 12.0));
        assert!(close(f.d(1), 9.0));
        assert!(close(f.dd(0, 0), 4.0));
        assert!(close(f.dd(0, 1), 6.0));
        assert!(close(f.dd(1, 0), 6.0));
        assert!(close(f.dd(1, 1), 0.0));
    }

    #[test]
    fn exp_of_two_t() {
        let t = Jet::variable(0.0, 0, 1);
        let rho = (t * 2.0).exp();
        assert!(close(rho.d(0), 2.0));
        assert!(close(rho.dd(0, 0), 4.0));
    }

    #[test]
    fn quotient_and_sqrt() {
        // f = sqrt(x) / y at (4, 2)
        let v = Jet::seed(&[4.0, 2.0]);
        let f = v[0].sqrt() / &v[1];
        assert!(close(f.value(), 1.0));
        assert!(close(f.d(0), 0.125));
        assert!(close(f.d(1), -0.5));
        assert!(close(f.dd(0, 0), -1.0 / 64.0));
        assert!(close(f.dd(0, 1), -1.0 / 16.0));
        assert!(close(f.dd(1, 1), 0.5));
    }

    #[test]
    fn partial_consumes_an_order() {
        let v = Jet::seed(&[1.5, -0.5]);
        let f = &v[0] * &v[1] * &v[0];
        let fx = f.partial(0);
        assert_eq!(fx.order(), 1);
        assert!(close(fx.value(), 2.0 * 1.5 * -0.5));
        assert!(close(fx.d(1), 3.0));
        assert_eq!(fx.partial(1).order(), 0);
        assert_eq!(fx.partial(1).partial(0).order(), -1);
    }

    #[test]
    fn composition_matches_direct_evaluation() {
        // outer g(y0, y1) = y0 * exp(y1); inner y0 = x0 + x1^2, y1 = x0 x1
        let x = Jet::seed(&[0.3, -0.7]);
        let y0 = &x[0] + &(&x[1] * &x[1]);
        let y1 = &x[0] * &x[1];
        let direct = &y0 * &y1.exp();

        let ys = Jet::seed(&[y0.value(), y1.value()]);
        let outer = &ys[0] * &ys[1].exp();
        let composed = outer.compose(&[y0, y1]);
        assert!(close(composed.value(), direct.value()));
        for i in 0..2 {
            assert!(close(composed.d(i), direct.d(i)));
            for j in 0..2 {
                assert!(close(composed.dd(i, j), direct.dd(i, j)));
            }
        }
    }

    #[test]
    fn packed_index_is_dense() {
        for n in 1..14 {
            let mut seen = vec![false; tri_len(n)];
            for i in 0..n {
                for j in i..n {
                    let k = packed(n, i, j);
                    assert!(!seen[k]);
                    seen[k] = true;
                }
            }
            assert!(seen.iter().all(|&s| s));
        }
    }
}
