//! Connection 1-forms `αᵢ = dθᵢ + Aᵢ` on the total chart with `dαᵢ = σᵢ`.

use std::sync::Arc;
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::diffgeo::{
    increasing_sets, Chart, DifferentialForm, Interval, Jet, Sampler, ScalarField,
};
use crate::error::{Error, Result};
use crate::hk_bases::HyperKahlerBase;
use crate::quadrature::gauss_legendre;
use crate::report::{worst, CheckOutcome, VerificationReport};

/// Index of `t` on the total chart; `θᵢ` follow, then the base coordinates.
pub const T_INDEX: usize = 0;
pub const BASE_OFFSET: usize = 4;
pub const DEFAULT_T_RANGE: [f64; 2] = [-1.0, 1.0];
pub const DEFAULT_QUADRATURE_NODES: usize = 32;
/// Largest `|dσ|` accepted by [`poincare_primitive`].
pub const CLOSEDNESS_GATE: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Construction {
    Explicit,
    Poincare { nodes: usize },
}

/// `(t, θ1, θ2, θ3, base...)` with unit periodic fiber angles.
pub fn total_chart(base: &Chart, t_range: [f64; 2]) -> Result<Chart> {
    let fiber = Chart::new(
        vec!["t", "theta1", "theta2", "theta3"],
        vec![
            Interval::new(t_range[0], t_range[1]),
            Interval::periodic(0.0, 1.0),
            Interval::periodic(0.0, 1.0),
            Interval::periodic(0.0, 1.0),
        ],
    )?;
    Ok(fiber.product(base))
}

#[derive(Clone, Debug)]
pub struct ConnectionTriple {
    chart: Arc<Chart>,
    /// `Aᵢ`, pulled back to the total chart.
    potential: [DifferentialForm; 3],
    alpha: [DifferentialForm; 3],
    construction: Construction,
}

impl ConnectionTriple {
    /// Builds `αᵢ = dθᵢ + Aᵢ` from base-chart potentials.
    pub fn from_potentials(
        base: &HyperKahlerBase,
        potential: [DifferentialForm; 3],
        construction: Construction,
        t_range: [f64; 2],
    ) -> Result<Self> {
        let chart = Arc::new(total_chart(base.chart(), t_range)?);
        let map: Vec<usize> = (BASE_OFFSET..BASE_OFFSET + base.dim()).collect();
        let mut pulled = Vec::with_capacity(3);
        let mut alpha = Vec::with_capacity(3);
        for (i, a) in potential.iter().enumerate() {
            base.chart().ensure_same(a.chart())?;
            let a = a.relabel(&chart, &map)?;
            alpha.push(DifferentialForm::basis(&chart, &[1 + i]).add(&a)?);
            pulled.push(a);
        }
        Ok(ConnectionTriple {
            chart,
            potential: pulled.try_into().expect("three forms"),
            alpha: alpha.try_into().expect("three forms"),
            construction,
        })
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn alpha(&self) -> &[DifferentialForm; 3] {
        &self.alpha
    }

    pub fn potential(&self) -> &[DifferentialForm; 3] {
        &self.potential
    }

    pub fn construction(&self) -> Construction {
        self.construction
    }

    /// Same potentials on a total chart with a different `t` interval.
    pub fn with_t_range(&self, t_range: [f64; 2]) -> Result<Self> {
        let mut names = Vec::new();
        let mut intervals = self.chart.intervals().to_vec();
        names.extend(self.chart.names().iter().cloned());
        intervals[T_INDEX] = Interval::new(t_range[0], t_range[1]);
        let chart = Arc::new(Chart::new(names, intervals)?);
        let id: Vec<usize> = (0..chart.dim()).collect();
        let moved = |f: &[DifferentialForm; 3]| -> Result<[DifferentialForm; 3]> {
            let v: Result<Vec<_>> = f.iter().map(|w| w.relabel(&chart, &id)).collect();
            Ok(v?.try_into().expect("three forms"))
        };
        Ok(ConnectionTriple {
            potential: moved(&self.potential)?,
            alpha: moved(&self.alpha)?,
            chart,
            construction: self.construction,
        })
    }

    /// Replaces `Aᵢ` by `factor·Aᵢ`; a negative control for the curvature match.
    pub fn scale_potential(&self, i: usize, factor: f64) -> Result<Self> {
        let mut out = self.clone();
        out.potential[i] = self.potential[i].scale(factor);
        out.alpha[i] = DifferentialForm::basis(&self.chart, &[1 + i]).add(&out.potential[i])?;
        Ok(out)
    }

    /// `σᵢ` pulled back to the total chart.
    pub fn pulled_sigma(&self, base: &HyperKahlerBase) -> Result<[DifferentialForm; 3]> {
        let map: Vec<usize> = (BASE_OFFSET..BASE_OFFSET + base.dim()).collect();
        let v: Result<Vec<_>> = base
            .sigma()
            .iter()
            .map(|s| s.relabel(&self.chart, &map))
            .collect();
        Ok(v?.try_into().expect("three forms"))
    }
}

/// Explicit potentials `A₁ = x⁰dx¹ + x²dx³`, `A₂ = x⁰dx² + x³dx¹`,
/// `A₃ = x⁰dx³ + x¹dx²` on every flat torus factor.
pub fn flat_connection(base: &HyperKahlerBase) -> Result<ConnectionTriple> {
    if !base.kind().is_flat() {
        return Err(Error::NotFlatBase(format!("{:?}", base.kind())));
    }
    let chart = base.chart();
    let s2 = base.convention().sign();
    let pattern = [[(0, 1), (2, 3)], [(0, 2), (3, 1)], [(0, 3), (1, 2)]];
    let mut potential = Vec::with_capacity(3);
    for (i, pairs) in pattern.iter().enumerate() {
        let k = if i == 1 { s2 } else { 1.0 };
        let mut terms = Vec::new();
        for off in (0..base.dim()).step_by(4) {
            for &(a, b) in pairs {
                terms.push((vec![off + b], ScalarField::coord(off + a).scale(k)));
            }
        }
        potential.push(DifferentialForm::from_terms(chart, 1, terms));
    }
    ConnectionTriple::from_potentials(
        base,
        potential.try_into().expect("three forms"),
        Construction::Explicit,
        DEFAULT_T_RANGE,
    )
}

/// Primitive of a closed `k`-form by the radial homotopy about the chart
/// center: `A(x) = ∫₀¹ s^{k-1} ι_{x-c} σ(c + s(x-c)) ds`, by Gauss–Legendre.
pub fn poincare_primitive(sigma: &DifferentialForm, nodes: usize) -> Result<DifferentialForm> {
    let chart = sigma.chart().clone();
    let k = sigma.degree();
    if k == 0 {
        return Err(Error::InvalidArgument("a 0-form has no primitive".into()));
    }
    let ds = sigma.exterior_derivative();
    let mut probes = Sampler::new(0, 16).points(&chart);
    probes.push(chart.center());
    let residual = probes
        .iter()
        .map(|p| ds.values_at(p).max_abs())
        .fold(0.0, f64::max);
    if !(residual <= CLOSEDNESS_GATE) {
        return Err(Error::NotClosed { residual });
    }

    let rule: Vec<(f64, f64)> = gauss_legendre(nodes, 0.0, 1.0)?;
    let center = chart.center();
    let dim = chart.dim();
    let sets: Vec<Vec<usize>> = sigma.terms().map(|(s, _)| s.clone()).collect();
    let coeffs: Vec<ScalarField> = sigma.terms().map(|(_, f)| f.clone()).collect();
    let targets = increasing_sets(dim, k - 1);
    let slots: Vec<Vec<(usize, usize, f64)>> = sets
        .iter()
        .map(|set| {
            (0..k)
                .map(|a| {
                    let mut rest = set.clone();
                    let i = rest.remove(a);
                    let slot = targets
                        .binary_search(&rest)
                        .expect("sub-multi-index exists");
                    (slot, i, if a % 2 == 0 { 1.0 } else { -1.0 })
                })
                .collect()
        })
        .collect();
    let len = targets.len();
    let args: Vec<ScalarField> = (0..dim).map(ScalarField::coord).collect();
    let fields = ScalarField::multi(args, len, move |x| {
        let n = x[0].nvars();
        let rel: Vec<Jet> = x.iter().zip(&center).map(|(xi, ci)| xi - *ci).collect();
        let mut out = vec![Jet::constant(0.0, n); len];
        for &(s, w) in &rule {
            let y: Vec<Jet> = rel
                .iter()
                .zip(&center)
                .map(|(r, c)| r.scale(s) + *c)
                .collect();
            let vals = crate::diffgeo::eval_batch_with(&coeffs, &y, false);
            let weight = w * s.powi(k as i32 - 1);
            for (v, slot) in vals.iter().zip(&slots) {
                for &(target, i, sign) in slot {
                    out[target].add_scaled(weight * sign, &(v * &rel[i]));
                }
            }
        }
        out
    });
    Ok(DifferentialForm::from_terms(
        &chart,
        k - 1,
        targets.into_iter().zip(fields),
    ))
}

/// Connection built from Poincaré primitives of the base triple.
pub fn poincare_connection(base: &HyperKahlerBase, nodes: usize) -> Result<ConnectionTriple> {
    let mut potential = Vec::with_capacity(3);
    for s in base.sigma() {
        potential.push(poincare_primitive(s, nodes)?);
    }
    ConnectionTriple::from_potentials(
        base,
        potential.try_into().expect("three forms"),
        Construction::Poincare { nodes },
        DEFAULT_T_RANGE,
    )
}

/// Max coefficient of `dαᵢ − σᵢ` per `i`, and `αᵢ(∂θⱼ) − δᵢⱼ`.
pub fn connection_residual(
    c: &ConnectionTriple,
    base: &HyperKahlerBase,
    samples: Sampler,
    tolerance: f64,
) -> VerificationReport {
    let start = Instant::now();
    let mut report = VerificationReport::new("connection", Some(samples));
    let sigma = match c.pulled_sigma(base) {
        Ok(s) => s,
        Err(e) => {
            report.push(
                CheckOutcome::condition("base_matches_connection", false)
                    .with("error", e.to_string()),
            );
            return report.timed(start);
        }
    };
    let diffs: Vec<DifferentialForm> = c
        .alpha
        .iter()
        .zip(&sigma)
        .map(|(a, s)| a.exterior_derivative().sub(s).expect("same chart"))
        .collect();
    let points = samples.points(&c.chart);
    let rows: Vec<[f64; 4]> = points
        .par_iter()
        .map(|p| {
            let mut row = [0.0; 4];
            for i in 0..3 {
                row[i] = diffs[i].values_at(p).max_abs();
                let v = c.alpha[i].values_at(p);
                for j in 0..3 {
                    let target = if i == j { 1.0 } else { 0.0 };
                    row[3] = f64::max(row[3], (v.get(&[1 + j]) - target).abs());
                }
            }
            row
        })
        .collect();
    for i in 0..3 {
        let (r, idx) = worst(rows.iter().map(|row| row[i]));
        report.push(
            CheckOutcome::residual(format!("curvature_match_{}", i + 1), r, tolerance)
                .with("worst_index", idx),
        );
    }
    let (r, idx) = worst(rows.iter().map(|row| row[3]));
    report.push(CheckOutcome::residual("fiber_pairing", r, tolerance).with("worst_index", idx));
    report.timed(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hk_bases::{make_flat_torus_base, make_flat_torus_base_with, TripleConvention};

    #[test]
    fn flat_connection_readout() {
        let base = make_flat_torus_base();
        let c = flat_connection(&base).unwrap();
        assert_eq!(c.chart().dim(), 8);
        let p = [0.0, 0.2, 0.3, 0.4, 0.1, 0.5, 0.6, 0.7];
        let mut e = [0.0; 8];
        e[1] = 1.0;
        assert_eq!(c.alpha()[0].evaluate(&p, &[&e]).unwrap(), 1.0);
        // A₂ = x⁰dx² + x³dx¹, read off along ∂x¹ with x³ = 0.5.
        let mut ex1 = [0.0; 8];
        ex1[BASE_OFFSET + 1] = 1.0;
        assert_eq!(c.alpha()[1].evaluate(&p, &[&ex1]).unwrap(), 0.7);
        let q = [0.0, 0.2, 0.3, 0.4, 0.1, 0.2, 0.6, 0.5];
        assert_eq!(c.alpha()[1].evaluate(&q, &[&ex1]).unwrap(), 0.5);
    }

    #[test]
    fn flat_connection_curvature_is_exact() {
        for conv in [TripleConvention::default(), TripleConvention::flipped()] {
            let base = make_flat_torus_base_with(conv);
            let c = flat_connection(&base).unwrap();
            let r = connection_residual(&c, &base, Sampler::new(4, 20), 1e-12);
            assert!(r.passed, "{r:?}");
            assert_eq!(r.max_residual(), 0.0);
        }
    }

    #[test]
    fn scaled_potential_fails() {
        let base = make_flat_torus_base();
        let c = flat_connection(&base)
            .unwrap()
            .scale_potential(0, 1.01)
            .unwrap();
        let r = connection_residual(&c, &base, Sampler::new(4, 20), 1e-12);
        assert!(!r.passed);
        assert!((r.check("curvature_match_1").unwrap().residual.unwrap() - 0.01).abs() < 1e-12);
    }

    #[test]
    fn primitive_of_area_form() {
        let chart =
            Arc::new(Chart::new(vec!["x", "y"], vec![Interval::new(-1.0, 1.0); 2]).unwrap());
        let a = poincare_primitive(&DifferentialForm::basis(&chart, &[0, 1]), 8).unwrap();
        let p = [0.3, -0.7];
        let v = a.values_at(&p);
        assert!((v.get(&[0]) + 0.5 * p[1]).abs() < 1e-14);
        assert!((v.get(&[1]) - 0.5 * p[0]).abs() < 1e-14);
    }

    #[test]
    fn primitive_rejects_non_closed() {
        let chart = Arc::new(Chart::unit_torus("x", 4).unwrap());
        let w =
            DifferentialForm::from_terms(&chart, 3, vec![(vec![1, 2, 3], ScalarField::coord(0))]);
        assert!(matches!(
            poincare_primitive(&w, 32),
            Err(Error::NotClosed { .. })
        ));
    }

    #[test]
    fn primitive_of_flat_triple() {
        let base = make_flat_torus_base();
        let c = poincare_connection(&base, 32).unwrap();
        let r = connection_residual(&c, &base, Sampler::new(9, 20), 1e-10);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn non_flat_base_rejected() {
        let gh = crate::hk_bases::make_gibbons_hawking_base(&Default::default()).unwrap();
        assert!(matches!(flat_connection(&gh), Err(Error::NotFlatBase(_))));
    }
}
