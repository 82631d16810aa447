//! The one-parameter metric `g = dt² + 4ρ²Σαᵢ² + ρ g_N`, `ρ = e^{2t}`, its
//! fundamental forms `ωᵢ = 2ρ dt∧αᵢ + 4ρ² αⱼ∧αₖ + ρσᵢ`, and their checks.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::connection::{connection_residual, ConnectionTriple, BASE_OFFSET, T_INDEX};
use crate::diffgeo::{
    increasing_sets, Chart, DiffMode, DifferentialForm, FormValue, Sampler, ScalarField,
    TensorField,
};
use crate::error::{Error, Result};
use crate::hk_bases::{HyperKahlerBase, TripleConvention};
use crate::linalg::{
    compatibility_residual, complex_structure, quaternion_residual, quaternion_sign,
    square_residual,
};
use crate::report::{worst, CheckOutcome, VerificationReport};

pub const DEFAULT_RHO_RATE: f64 = 2.0;
/// Tolerance of the connection precondition in [`assemble_qk_model`].
pub const PRECONDITION_TOLERANCE: f64 = 1e-6;
/// Relative singular-value cutoff for the ideal design matrix.
pub const RANK_CUTOFF: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QkOptions {
    /// `ρ = e^{rate·t}`; anything but 2 breaks the construction.
    pub rho_rate: f64,
}

impl Default for QkOptions {
    fn default() -> Self {
        QkOptions {
            rho_rate: DEFAULT_RHO_RATE,
        }
    }
}

#[derive(Clone, Debug)]
pub struct QkModel {
    chart: Arc<Chart>,
    base: HyperKahlerBase,
    connection: ConnectionTriple,
    rho: ScalarField,
    rho_rate: f64,
    metric: TensorField,
    omega: [DifferentialForm; 3],
    n: usize,
}

/// Coefficient of `dx^a` in a 1-form.
fn component(form: &DifferentialForm, a: usize) -> ScalarField {
    form.coefficient(&[a])
        .cloned()
        .unwrap_or_else(ScalarField::zero)
}

pub fn assemble_qk_model(base: &HyperKahlerBase, conn: &ConnectionTriple) -> Result<QkModel> {
    assemble_qk_model_with(base, conn, QkOptions::default())
}

pub fn assemble_qk_model_with(
    base: &HyperKahlerBase,
    conn: &ConnectionTriple,
    opts: QkOptions,
) -> Result<QkModel> {
    let chart = conn.chart().clone();
    let base_part = chart.without(&[0, 1, 2, 3])?;
    base.chart().ensure_same(&base_part).or_else(|_| {
        // Product charts rename clashing coordinates; compare the boxes only.
        if base_part.intervals() == base.chart().intervals() {
            Ok(())
        } else {
            Err(Error::ChartMismatch {
                left: format!("{:?}", base.chart().names()),
                right: format!("{:?}", base_part.names()),
            })
        }
    })?;
    let check = connection_residual(conn, base, Sampler::new(0, 8), PRECONDITION_TOLERANCE);
    if !check.passed {
        return Err(Error::ConnectionMismatch {
            residual: check.max_residual(),
        });
    }

    let dim = chart.dim();
    let rho = (ScalarField::coord(T_INDEX) * opts.rho_rate).exp();
    let rho2 = &rho * &rho;
    let alpha = conn.alpha();
    let comps: Vec<Vec<ScalarField>> = alpha
        .iter()
        .map(|a| (0..dim).map(|i| component(a, i)).collect())
        .collect();
    let gn = base.metric();
    let metric = TensorField::symmetric(&chart, |a, b| {
        let mut terms: Vec<(f64, ScalarField)> = Vec::new();
        if a == T_INDEX && b == T_INDEX {
            terms.push((1.0, ScalarField::constant(1.0)));
        }
        let fiber =
            ScalarField::linear_combination(comps.iter().map(|c| (1.0, &c[a] * &c[b])).collect());
        if !fiber.is_zero() {
            terms.push((4.0, &rho2 * &fiber));
        }
        if a >= BASE_OFFSET && b >= BASE_OFFSET {
            let h = gn
                .component(a - BASE_OFFSET, b - BASE_OFFSET)
                .relabel(&shift(base.dim()));
            if !h.is_zero() {
                terms.push((1.0, &rho * &h));
            }
        }
        ScalarField::linear_combination(terms)
    });

    let sigma = conn.pulled_sigma(base)?;
    let eps = base.convention().sign();
    let dt = DifferentialForm::basis(&chart, &[T_INDEX]);
    let mut omega = Vec::with_capacity(3);
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        let w = dt
            .wedge(&alpha[i])?
            .times(&rho.scale(2.0))
            .add(&alpha[j].wedge(&alpha[k])?.times(&rho2.scale(4.0 * eps)))?
            .add(&sigma[i].times(&rho))?;
        omega.push(w);
    }
    Ok(QkModel {
        chart,
        base: base.clone(),
        connection: conn.clone(),
        rho,
        rho_rate: opts.rho_rate,
        metric,
        omega: omega.try_into().expect("three forms"),
        n: base.n(),
    })
}

fn shift(d: usize) -> Vec<usize> {
    (BASE_OFFSET..BASE_OFFSET + d).collect()
}

impl QkModel {
    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn m(&self) -> usize {
        self.n + 1
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn base(&self) -> &HyperKahlerBase {
        &self.base
    }

    pub fn connection(&self) -> &ConnectionTriple {
        &self.connection
    }

    pub fn rho(&self) -> &ScalarField {
        &self.rho
    }

    pub fn rho_rate(&self) -> f64 {
        self.rho_rate
    }

    pub fn convention(&self) -> TripleConvention {
        self.base.convention()
    }

    pub fn metric(&self) -> &TensorField {
        &self.metric
    }

    pub fn omega(&self) -> &[DifferentialForm; 3] {
        &self.omega
    }

    /// Same construction over a different `t` interval.
    pub fn with_t_range(&self, t_range: [f64; 2]) -> Result<Self> {
        let conn = self.connection.with_t_range(t_range)?;
        assemble_qk_model_with(
            &self.base,
            &conn,
            QkOptions {
                rho_rate: self.rho_rate,
            },
        )
    }

    /// `g_t`: the metric induced on the slice of constant `t`, on the chart
    /// `(θ1, θ2, θ3, base...)`.
    pub fn slice_metric(&self, t: f64) -> Result<TensorField> {
        let r = (self.rho_rate * t).exp();
        self.fiber_base_metric(4.0 * r * r, r)
    }

    /// `g₀ = Σαᵢ² + g_N`, normalized so that the volume form of `g` is
    /// `8ρ^{2n+3} dt∧vol_{g₀}`.
    pub fn reference_metric(&self) -> Result<TensorField> {
        self.fiber_base_metric(1.0, 1.0)
    }

    fn fiber_base_metric(&self, kf: f64, kb: f64) -> Result<TensorField> {
        let slice = Arc::new(self.chart.without(&[T_INDEX])?);
        let dim = self.dim();
        let map: Vec<usize> = (0..dim).map(|i| i.saturating_sub(1)).collect();
        let comps: Vec<Vec<ScalarField>> = self
            .connection
            .alpha()
            .iter()
            .map(|a| {
                ScalarField::relabel_all(
                    &(0..dim).map(|i| component(a, i)).collect::<Vec<_>>(),
                    &map,
                )
            })
            .collect();
        let base_map: Vec<usize> = (BASE_OFFSET - 1..BASE_OFFSET - 1 + self.base.dim()).collect();
        let gn = ScalarField::relabel_all(self.base.metric().components(), &base_map);
        let bd = self.base.dim();
        Ok(TensorField::symmetric(&slice, |a, b| {
            let (a1, b1) = (a + 1, b + 1);
            let mut terms: Vec<(f64, ScalarField)> =
                comps.iter().map(|c| (kf, &c[a1] * &c[b1])).collect();
            if a1 >= BASE_OFFSET && b1 >= BASE_OFFSET {
                terms.push((kb, gn[(a1 - BASE_OFFSET) * bd + b1 - BASE_OFFSET].clone()));
            }
            ScalarField::linear_combination(terms)
        }))
    }

    /// `Jᵢ = g⁻¹ωᵢᵀ` at `p`, so that `ωᵢ(X, Y) = g(JᵢX, Y)`.
    pub fn complex_structures(&self, p: &[f64]) -> Result<[DMatrix<f64>; 3]> {
        let g = self.metric.values_at(p);
        let mut out = Vec::with_capacity(3);
        for w in &self.omega {
            let m = w.values_at(p).two_form_matrix();
            out.push(
                complex_structure(&g, &m)
                    .ok_or_else(|| Error::SingularMetric { at: p.to_vec() })?,
            );
        }
        Ok(out.try_into().expect("three structures"))
    }
}

struct HermitianPoint {
    positive: f64,
    square: f64,
    metric: f64,
    omega: f64,
    sign: f64,
    j: [DMatrix<f64>; 3],
}

/// Residuals of `Jᵢ² + Id`, `g(Jᵢ·, Jᵢ·) − g`, `ωᵢ − g(Jᵢ·, ·)` and
/// `J₁J₂ ∓ J₃` at sampled points.
pub fn hermitian_compatibility(
    model: &QkModel,
    samples: Sampler,
    tolerance: f64,
) -> VerificationReport {
    let start = Instant::now();
    let points = samples.points(&model.chart);
    let rows: Vec<Option<HermitianPoint>> = points
        .par_iter()
        .map(|p| {
            let g = model.metric.values_at(p);
            let positive = g.clone().symmetric_eigenvalues().min();
            let j = model.complex_structures(p).ok()?;
            let mut omega = 0.0;
            for (w, jk) in model.omega.iter().zip(&j) {
                let m = w.values_at(p).two_form_matrix();
                omega = f64::max(omega, (jk.transpose() * &g - m).amax());
            }
            Some(HermitianPoint {
                positive,
                square: j.iter().map(square_residual).fold(0.0, f64::max),
                metric: j
                    .iter()
                    .map(|jk| compatibility_residual(&g, jk))
                    .fold(0.0, f64::max),
                omega,
                sign: quaternion_sign(&j).0,
                j,
            })
        })
        .collect();
    let mut report = VerificationReport::new("hermitian", Some(samples));
    if let Some(idx) = rows.iter().position(Option::is_none) {
        report.push(CheckOutcome::condition("metric_invertible", false).with("worst_index", idx));
        return report.timed(start);
    }
    let rows: Vec<HermitianPoint> = rows.into_iter().flatten().collect();
    let min_eig = rows
        .iter()
        .map(|r| r.positive)
        .fold(f64::INFINITY, f64::min);
    report.push(
        CheckOutcome::condition("metric_positive", min_eig > 0.0).with("min_eigenvalue", min_eig),
    );
    for (name, f) in [
        (
            "j_squared",
            &(|r: &HermitianPoint| r.square) as &dyn Fn(&HermitianPoint) -> f64,
        ),
        ("j_metric", &|r: &HermitianPoint| r.metric),
        ("omega_from_j", &|r: &HermitianPoint| r.omega),
    ] {
        let (res, idx) = worst(rows.iter().map(f));
        report.push(CheckOutcome::residual(name, res, tolerance).with("worst_index", idx));
    }
    let sign = rows.first().map_or(1.0, |r| r.sign);
    let consistent = rows.iter().all(|r| r.sign == sign);
    let (res, idx) = worst(rows.iter().map(|r| quaternion_residual(&r.j, sign)));
    report.push(
        CheckOutcome::residual("quaternion_relation", res, tolerance)
            .with("sign", sign)
            .with("sign_consistent", consistent)
            .with("worst_index", idx),
    );
    report.timed(start)
}

/// Least-squares fit of `dωᵢ = Σⱼ βᵢⱼ∧ωⱼ` at one point. Returns the largest
/// absolute residual over `i` and all 3-form coefficients.
pub fn ideal_fit(domega: &[FormValue; 3], omega: &[FormValue; 3], p: &[f64]) -> Result<f64> {
    let dim = omega[0].dim;
    let rows = increasing_sets(dim, 3);
    let cols = 3 * dim;
    let mut a = DMatrix::zeros(rows.len(), cols);
    for (j, w) in omega.iter().enumerate() {
        for k in 0..dim {
            let col = FormValue::covector(dim, k).wedge(w).to_dense(&rows);
            a.set_column(j * dim + k, &nalgebra::DVector::from_vec(col));
        }
    }
    let b = DMatrix::from_fn(rows.len(), 3, |r, i| domega[i].get(&rows[r]));
    let sv = a.singular_values();
    let cutoff = RANK_CUTOFF * sv.max().max(f64::MIN_POSITIVE);
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    if rank < cols {
        return Err(Error::RankDeficient {
            rank,
            columns: cols,
            at: p.to_vec(),
        });
    }
    // The residual is the component of b orthogonal to the column space.
    let q = a.qr().q();
    let proj = &q * (q.transpose() * &b);
    Ok((b - proj).amax())
}

/// Pointwise ideal residual, plus `d(dωᵢ)` and nondegeneracy of `Σωᵢ∧ωᵢ`.
pub fn ideal_residual(
    model: &QkModel,
    samples: Sampler,
    tolerance: f64,
    mode: DiffMode,
) -> VerificationReport {
    let start = Instant::now();
    let points = samples.points(&model.chart);
    let domega: Vec<DifferentialForm> = model
        .omega
        .iter()
        .map(DifferentialForm::exterior_derivative)
        .collect();
    let ddomega: Vec<DifferentialForm> = domega
        .iter()
        .map(DifferentialForm::exterior_derivative)
        .collect();
    let m = model.m();
    let rows: Vec<Result<(f64, f64, f64)>> = points
        .par_iter()
        .map(|p| {
            let w: Vec<FormValue> = model.omega.iter().map(|f| f.values_at(p)).collect();
            let dw: Vec<FormValue> = domega.iter().map(|f| f.values_at_mode(p, mode)).collect();
            let w: [FormValue; 3] = w.try_into().expect("three");
            let dw: [FormValue; 3] = dw.try_into().expect("three");
            let fit = ideal_fit(&dw, &w, p)?;
            let dd = ddomega
                .iter()
                .map(|f| f.values_at(p).max_abs())
                .fold(0.0, f64::max);
            let four = w.iter().fold(FormValue::zero(w[0].dim, 4), |acc, x| {
                let s = x.wedge(x);
                let mut t = acc.terms;
                for (k, v) in s.terms {
                    *t.entry(k).or_insert(0.0) += v;
                }
                FormValue { terms: t, ..acc }
            });
            let mut power = four.clone();
            for _ in 1..m {
                power = power.wedge(&four);
            }
            let top: Vec<usize> = (0..w[0].dim).collect();
            Ok((fit, dd, power.get(&top).abs()))
        })
        .collect();
    let mut report = VerificationReport::new("ideal", Some(samples));
    if let Some((idx, Err(e))) = rows.iter().enumerate().find(|(_, r)| r.is_err()) {
        report.push(
            CheckOutcome::condition("ideal_solvable", false)
                .with("error", e.to_string())
                .with("worst_index", idx),
        );
        return report.timed(start);
    }
    let rows: Vec<(f64, f64, f64)> = rows.into_iter().map(|r| r.expect("checked")).collect();
    let (fit, idx) = worst(rows.iter().map(|r| r.0));
    report.push(
        CheckOutcome::residual("ideal_residual", fit, tolerance)
            .with("worst_index", idx)
            .with("mode", mode),
    );
    let (dd, idx) = worst(rows.iter().map(|r| r.1));
    report.push(CheckOutcome::residual("d_squared_omega", dd, tolerance).with("worst_index", idx));
    let min_top = rows.iter().map(|r| r.2).fold(f64::INFINITY, f64::min);
    report.push(
        CheckOutcome::condition("fundamental_form_nondegenerate", min_top > 1e-8)
            .with("min_top_coefficient", min_top),
    );
    report.timed(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::{flat_connection, poincare_connection};
    use crate::hk_bases::{
        make_flat_torus_base, make_flat_torus_base_with, make_gibbons_hawking_base,
    };

    fn flat(conv: TripleConvention) -> QkModel {
        let base = make_flat_torus_base_with(conv);
        assemble_qk_model(&base, &flat_connection(&base).unwrap()).unwrap()
    }

    fn unit(i: usize) -> [f64; 8] {
        let mut e = [0.0; 8];
        e[i] = 1.0;
        e
    }

    #[test]
    fn metric_readouts_at_t0() {
        let m = flat(TripleConvention::default());
        let p = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        let g = m.metric().values_at(&p);
        assert_eq!(g[(0, 0)], 1.0);
        assert_eq!(g[(1, 1)], 4.0);
        // ∂x⁰ has no α component for the flat potentials.
        assert_eq!(g[(4, 4)], 1.0);
        let q = [0.7, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        assert!((m.metric().values_at(&q)[(0, 0)] - 1.0).abs() == 0.0);
    }

    #[test]
    fn omega_readouts_at_t0() {
        let m = flat(TripleConvention::default());
        let p = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7];
        assert!((m.omega()[0].evaluate(&p, &[&unit(0), &unit(1)]).unwrap() - 2.0).abs() < 1e-15);
        assert!((m.omega()[0].evaluate(&p, &[&unit(2), &unit(3)]).unwrap() - 4.0).abs() < 1e-15);
    }

    #[test]
    fn flat_model_is_hermitian() {
        let r = hermitian_compatibility(
            &flat(TripleConvention::default()),
            Sampler::new(1, 30),
            1e-9,
        );
        assert!(r.passed, "{r:#?}");
        assert_eq!(
            r.check("quaternion_relation")
                .unwrap()
                .detail("sign_consistent")
                .unwrap(),
            true
        );
    }

    #[test]
    fn flipped_model_detects_other_branch() {
        let a = hermitian_compatibility(
            &flat(TripleConvention::default()),
            Sampler::new(1, 10),
            1e-9,
        );
        let b = hermitian_compatibility(
            &flat(TripleConvention::flipped()),
            Sampler::new(1, 10),
            1e-9,
        );
        assert!(b.passed, "{b:#?}");
        let s = |r: &VerificationReport| {
            r.check("quaternion_relation")
                .unwrap()
                .detail("sign")
                .unwrap()
                .as_f64()
                .unwrap()
        };
        assert_eq!(s(&a), -s(&b));
    }

    #[test]
    fn flat_ideal_holds() {
        let r = ideal_residual(
            &flat(TripleConvention::default()),
            Sampler::new(2, 20),
            1e-8,
            DiffMode::Exact,
        );
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn flat_ideal_holds_when_flipped() {
        let r = ideal_residual(
            &flat(TripleConvention::flipped()),
            Sampler::new(2, 20),
            1e-8,
            DiffMode::Exact,
        );
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn wrong_rate_breaks_ideal() {
        let base = make_flat_torus_base();
        let m = assemble_qk_model_with(
            &base,
            &flat_connection(&base).unwrap(),
            QkOptions { rho_rate: 3.0 },
        )
        .unwrap();
        let r = ideal_residual(&m, Sampler::new(2, 10), 1e-8, DiffMode::Exact);
        assert!(!r.passed);
        assert!(r.check("ideal_residual").unwrap().residual.unwrap() > 1e-3);
    }

    #[test]
    fn gibbons_hawking_ideal_holds() {
        let base = make_gibbons_hawking_base(&Default::default()).unwrap();
        let m = assemble_qk_model(&base, &poincare_connection(&base, 32).unwrap()).unwrap();
        let r = ideal_residual(&m, Sampler::new(5, 10), 1e-6, DiffMode::Exact);
        assert!(r.passed, "{r:#?}");
        let h = hermitian_compatibility(&m, Sampler::new(5, 10), 1e-9);
        assert!(h.passed, "{h:#?}");
    }

    #[test]
    fn mismatched_connection_rejected() {
        let base = make_flat_torus_base();
        let c = flat_connection(&base)
            .unwrap()
            .scale_potential(2, 1.5)
            .unwrap();
        assert!(matches!(
            assemble_qk_model(&base, &c),
            Err(Error::ConnectionMismatch { .. })
        ));
    }

    #[test]
    fn slice_metrics() {
        let m = flat(TripleConvention::default());
        let g0 = m.reference_metric().unwrap().values_at(&[0.1; 7]);
        assert_eq!(g0[(0, 0)], 1.0);
        let gt = m.slice_metric(0.0).unwrap().values_at(&[0.1; 7]);
        assert_eq!(gt[(0, 0)], 4.0);
        assert_eq!(gt[(3, 3)], 1.0);
    }
}
