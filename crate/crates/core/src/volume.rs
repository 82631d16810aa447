//! Volume density, slab volumes `f(t₀, t₁)` and the two ends.

use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;

use crate::connection::T_INDEX;
use crate::diffgeo::{Chart, DifferentialForm, Sampler};
use crate::error::{Error, Result};
use crate::qk::QkModel;
use crate::quadrature::{composite_gauss_legendre, gauss_legendre, midpoint};
use crate::report::{worst, CheckOutcome, VerificationReport};

/// Threshold the infinite end must exceed.
pub const INFINITE_END_BOUND: f64 = 1e6;

/// Tensor-product quadrature: composite Gauss–Legendre in `t`; midpoint on
/// periodic directions and Gauss–Legendre on the others.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct VolumeGrid {
    pub t_nodes: usize,
    pub panel_width: f64,
    pub fiber_nodes: usize,
    pub base_nodes: usize,
}

impl Default for VolumeGrid {
    fn default() -> Self {
        VolumeGrid {
            t_nodes: 16,
            panel_width: 0.5,
            fiber_nodes: 2,
            base_nodes: 2,
        }
    }
}

/// `sqrt(det g)` in chart coordinates.
pub fn volume_density(model: &QkModel, p: &[f64]) -> f64 {
    model.metric().values_at(p).determinant().abs().sqrt()
}

/// Nodes and weights on a chart box, one rule per axis.
fn box_rule(
    chart: &Chart,
    axes: &[usize],
    nodes: impl Fn(usize) -> usize,
) -> Result<Vec<(Vec<f64>, f64)>> {
    let mut out: Vec<(Vec<f64>, f64)> = vec![(Vec::new(), 1.0)];
    for &a in axes {
        let iv = chart.interval(a);
        let rule = if iv.periodic {
            midpoint(nodes(a), iv.lo, iv.hi)?
        } else {
            if !(iv.lo.is_finite() && iv.hi.is_finite()) {
                return Err(Error::InvalidArgument(format!(
                    "cannot integrate over unbounded {}",
                    chart.names()[a]
                )));
            }
            gauss_legendre(nodes(a), iv.lo, iv.hi)?
        };
        out = out
            .into_iter()
            .flat_map(|(p, w)| {
                rule.iter().map(move |&(x, v)| {
                    let mut q = p.clone();
                    q.push(x);
                    (q, w * v)
                })
            })
            .collect();
    }
    Ok(out)
}

/// `∫` of a top-degree form over its chart box with `nodes` points per axis.
pub fn integrate_top_form(form: &DifferentialForm, nodes: usize) -> Result<f64> {
    let chart = form.chart();
    let dim = chart.dim();
    if form.degree() != dim {
        return Err(Error::InvalidArgument(format!(
            "degree {} form on a {dim}-chart",
            form.degree()
        )));
    }
    let top: Vec<usize> = (0..dim).collect();
    let Some(coef) = form.coefficient(&top) else {
        return Ok(0.0);
    };
    let axes: Vec<usize> = (0..dim).collect();
    let rule = box_rule(chart, &axes, |_| nodes)?;
    Ok(rule.iter().map(|(p, w)| w * coef.value(p)).sum())
}

struct SliceRule {
    points: Vec<(Vec<f64>, f64)>,
}

impl SliceRule {
    fn new(model: &QkModel, grid: &VolumeGrid) -> Result<Self> {
        let chart = model.chart();
        let axes: Vec<usize> = (0..chart.dim()).filter(|&a| a != T_INDEX).collect();
        let points = box_rule(chart, &axes, |a| {
            if a < crate::connection::BASE_OFFSET {
                grid.fiber_nodes
            } else {
                grid.base_nodes
            }
        })?;
        if points.is_empty() {
            return Err(Error::EmptyGrid);
        }
        Ok(SliceRule { points })
    }

    /// `∫_P density(t, ·)`.
    fn slice(&self, model: &QkModel, t: f64) -> f64 {
        let mut q = vec![0.0; model.dim()];
        q[T_INDEX] = t;
        self.points
            .iter()
            .map(|(x, w)| {
                q[1..].copy_from_slice(x);
                w * volume_density(model, &q)
            })
            .sum()
    }
}

/// Numeric `f(t₀, t₁) = vol{t₀ < t < t₁}`.
pub fn slab_volume(model: &QkModel, t0: f64, t1: f64, grid: &VolumeGrid) -> Result<f64> {
    let rule = SliceRule::new(model, grid)?;
    slab_with(model, &rule, t0, t1, grid)
}

fn slab_with(
    model: &QkModel,
    rule: &SliceRule,
    t0: f64,
    t1: f64,
    grid: &VolumeGrid,
) -> Result<f64> {
    if !(t0 < t1) || !t0.is_finite() || !t1.is_finite() {
        return Err(Error::InvalidRange { t0, t1 });
    }
    let nodes = composite_gauss_legendre(grid.t_nodes, grid.panel_width, t0, t1)?;
    let parts: Vec<f64> = nodes
        .par_iter()
        .map(|&(t, w)| w * rule.slice(model, t))
        .collect();
    Ok(parts.iter().sum())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SlabRow {
    pub t0: f64,
    pub t1: f64,
    pub numeric: f64,
    pub closed_form: f64,
    pub relative_error: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EndRow {
    pub t: f64,
    pub volume: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VolumeReport {
    pub n: usize,
    pub m: usize,
    /// Exponent `k` in `density(t, x) = e^{kt}·density(0, x)`; `4n + 6` for `ρ = e^{2t}`.
    pub exponent: f64,
    /// `C = ∫_P density(0, ·)`.
    pub c: f64,
    /// `8∫_P vol_{g₀}`, computed from the reference metric.
    pub c_reference: f64,
    pub slabs: Vec<SlabRow>,
    /// `f(−T, 0)` for each `T`.
    pub finite_end: Vec<EndRow>,
    /// `f(0, T)` for each `T`.
    pub infinite_end: Vec<EndRow>,
    pub limit_estimate: f64,
    /// `C/k`.
    pub limit_closed_form: f64,
}

impl VolumeReport {
    /// `C/k (e^{k t₁} − e^{k t₀})`.
    pub fn closed_form(&self, t0: f64, t1: f64) -> f64 {
        let k = self.exponent;
        self.c / k * ((k * t1).exp() - (k * t0).exp())
    }

    /// Slab table as CSV.
    pub fn slab_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for row in &self.slabs {
            w.serialize(row)
                .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        }
        let bytes = w
            .into_inner()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::InvalidArgument(e.to_string()))
    }
}

pub fn density_exponent(model: &QkModel) -> f64 {
    model.rho_rate() * (2 * model.n() + 3) as f64
}

/// Computes `C`, the slab table for `slabs`, and both ends over `t_sequence`.
pub fn volume_study(
    model: &QkModel,
    slabs: &[(f64, f64)],
    t_sequence: &[f64],
    grid: &VolumeGrid,
) -> Result<VolumeReport> {
    let rule = SliceRule::new(model, grid)?;
    let c = rule.slice(model, 0.0);
    let g0 = model.reference_metric()?;
    let c_reference = 8.0
        * rule
            .points
            .iter()
            .map(|(x, w)| w * g0.values_at(x).determinant().abs().sqrt())
            .sum::<f64>();
    let exponent = density_exponent(model);
    let mut report = VolumeReport {
        n: model.n(),
        m: model.m(),
        exponent,
        c,
        c_reference,
        slabs: Vec::new(),
        finite_end: Vec::new(),
        infinite_end: Vec::new(),
        limit_estimate: f64::NAN,
        limit_closed_form: c / exponent,
    };
    for &(t0, t1) in slabs {
        let numeric = slab_with(model, &rule, t0, t1, grid)?;
        let closed_form = report.closed_form(t0, t1);
        let relative_error = ((numeric - closed_form) / closed_form).abs();
        report.slabs.push(SlabRow {
            t0,
            t1,
            numeric,
            closed_form,
            relative_error,
        });
    }
    for &t in t_sequence {
        if !(t > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "end sequence needs positive T, got {t}"
            )));
        }
        report.finite_end.push(EndRow {
            t,
            volume: slab_with(model, &rule, -t, 0.0, grid)?,
        });
        report.infinite_end.push(EndRow {
            t,
            volume: slab_with(model, &rule, 0.0, t, grid)?,
        });
    }
    report.limit_estimate = report.finite_end.last().map_or(f64::NAN, |r| r.volume);
    Ok(report)
}

/// Density factorization `density(t, x) = e^{kt}·density(0, x)` and the
/// reference normalization `density(0, x) = 8·sqrt(det g₀)`, relative.
pub fn density_law_check(
    model: &QkModel,
    samples: Sampler,
    tolerance: f64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let k = density_exponent(model);
    let g0 = model.reference_metric()?;
    let points = samples.points(model.chart());
    let rows: Vec<(f64, f64)> = points
        .par_iter()
        .map(|p| {
            let mut q = p.clone();
            q[T_INDEX] = 0.0;
            let d0 = volume_density(model, &q);
            let dt = volume_density(model, p);
            let law = (dt / ((k * p[T_INDEX]).exp() * d0) - 1.0).abs();
            let reference = 8.0 * g0.values_at(&p[1..]).determinant().abs().sqrt();
            (law, (d0 / reference - 1.0).abs())
        })
        .collect();
    let mut report = VerificationReport::new("volume_density", Some(samples));
    let (law, i) = worst(rows.iter().map(|r| r.0));
    report.push(
        CheckOutcome::residual("density_factorization", law, tolerance)
            .with("exponent", k)
            .with("worst_index", i),
    );
    let (nrm, i) = worst(rows.iter().map(|r| r.1));
    report.push(CheckOutcome::residual("density_reference", nrm, tolerance).with("worst_index", i));
    Ok(report.timed(start))
}

/// Checks over a finished [`VolumeReport`]: closed-form slabs, additivity,
/// and the finite and infinite ends.
pub fn volume_checks(
    v: &VolumeReport,
    model: &QkModel,
    grid: &VolumeGrid,
    tolerance: f64,
) -> Result<VerificationReport> {
    let start = Instant::now();
    let mut report = VerificationReport::new("volume", None);
    let positive =
        v.slabs.iter().all(|r| r.numeric > 0.0) && v.finite_end.iter().all(|r| r.volume > 0.0);
    report.push(CheckOutcome::condition("volume_positive", positive));
    let (err, i) = worst(v.slabs.iter().map(|r| r.relative_error));
    report.push(CheckOutcome::residual("slab_closed_form", err, tolerance).with("worst_index", i));
    report.push(
        CheckOutcome::residual(
            "reference_constant",
            (v.c_reference / v.c - 1.0).abs(),
            tolerance,
        )
        .with("c", v.c)
        .with("c_reference", v.c_reference),
    );

    // Additivity on the outermost slab, split at its midpoint.
    if let Some(r) = v
        .slabs
        .iter()
        .max_by(|a, b| (a.t1 - a.t0).total_cmp(&(b.t1 - b.t0)))
    {
        let mid = 0.5 * (r.t0 + r.t1);
        let rule = SliceRule::new(model, grid)?;
        let left = slab_with(model, &rule, r.t0, mid, grid)?;
        let right = slab_with(model, &rule, mid, r.t1, grid)?;
        report.push(
            CheckOutcome::residual(
                "slab_additivity",
                ((left + right - r.numeric) / r.numeric).abs(),
                tolerance,
            )
            .with("split", [r.t0, mid, r.t1]),
        );
    }

    let ends: Vec<f64> = v.finite_end.iter().map(|r| r.volume).collect();
    let monotone = ends.windows(2).all(|w| w[1] >= w[0]);
    report.push(CheckOutcome::condition("finite_end_monotone", monotone));
    let limit = v.limit_closed_form;
    report.push(
        CheckOutcome::residual(
            "finite_end_limit",
            ((v.limit_estimate - limit) / limit).abs(),
            tolerance,
        )
        .with("estimate", v.limit_estimate)
        .with("closed_form", limit),
    );
    // Successive increments against (C/k)(e^{−kT_i} − e^{−kT_{i+1}}),
    // measured relative to the limit.
    let k = v.exponent;
    let (inc, i) = worst(v.finite_end.windows(2).map(|w| {
        let expected = limit * ((-k * w[0].t).exp() - (-k * w[1].t).exp());
        ((w[1].volume - w[0].volume) - expected).abs() / limit
    }));
    report.push(
        CheckOutcome::residual("finite_end_increments", inc, tolerance).with("worst_index", i),
    );
    let large: Vec<&EndRow> = v.infinite_end.iter().filter(|r| r.t >= 2.0).collect();
    let unbounded = !large.is_empty() && large.iter().all(|r| r.volume > INFINITE_END_BOUND);
    report.push(
        CheckOutcome::condition("infinite_end", unbounded)
            .with("bound", INFINITE_END_BOUND)
            .with("volumes", &v.infinite_end),
    );
    Ok(report.timed(start))
}

/// `f(−T, 0)` over `t_sequence`: monotone, converging to `C/k`.
pub fn finite_end_check(
    model: &QkModel,
    t_sequence: &[f64],
    grid: &VolumeGrid,
    tolerance: f64,
) -> Result<VerificationReport> {
    if t_sequence.is_empty() || t_sequence.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidArgument(
            "T sequence must be non-empty and increasing".into(),
        ));
    }
    let v = volume_study(model, &[], t_sequence, grid)?;
    let full = volume_checks(&v, model, grid, tolerance)?;
    let mut report = VerificationReport::new("finite_end", None);
    for c in full
        .checks
        .into_iter()
        .filter(|c| c.name.starts_with("finite_end"))
    {
        report.push(c);
    }
    report.elapsed_ms = full.elapsed_ms;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::flat_connection;
    use crate::hk_bases::make_flat_torus_base;
    use crate::qk::assemble_qk_model;

    fn flat() -> QkModel {
        let base = make_flat_torus_base();
        assemble_qk_model(&base, &flat_connection(&base).unwrap()).unwrap()
    }

    #[test]
    fn density_at_t0_is_eight() {
        let m = flat();
        let d = volume_density(&m, &[0.0, 0.3, 0.1, 0.9, 0.2, 0.4, 0.6, 0.8]);
        assert!((d - 8.0).abs() < 1e-13);
        let r = volume_density(&m, &[0.1, 0.3, 0.1, 0.9, 0.2, 0.4, 0.6, 0.8]) / d;
        assert!((r - 1f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn density_is_homogeneous() {
        let m = flat();
        let a = volume_density(&m, &[0.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = volume_density(&m, &[0.2, 0.5, 0.7, 0.1, 0.9, 0.3, 0.2, 0.6]);
        assert!((a / b - 1.0).abs() < 1e-14);
    }

    #[test]
    fn top_form_periods() {
        let b = make_flat_torus_base();
        let s = b.sigma();
        assert!((integrate_top_form(&s[0].wedge(&s[0]).unwrap(), 2).unwrap() - 2.0).abs() < 1e-14);
        assert_eq!(
            integrate_top_form(&s[0].wedge(&s[1]).unwrap(), 2).unwrap(),
            0.0
        );
    }

    #[test]
    fn slab_matches_closed_form() {
        let m = flat();
        let g = VolumeGrid::default();
        let v = volume_study(&m, &[(0.0, 0.5)], &[], &g).unwrap();
        assert!((v.c - 8.0).abs() < 1e-12);
        assert!(v.slabs[0].relative_error < 1e-12);
        assert!((v.slabs[0].numeric - 0.8 * (5f64.exp() - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn rejects_bad_ranges() {
        let m = flat();
        let g = VolumeGrid::default();
        assert!(matches!(
            slab_volume(&m, 1.0, 0.0, &g),
            Err(Error::InvalidRange { .. })
        ));
        let empty = VolumeGrid {
            fiber_nodes: 0,
            ..g
        };
        assert_eq!(slab_volume(&m, 0.0, 1.0, &empty), Err(Error::EmptyGrid));
    }

    #[test]
    fn ends() {
        let m = flat();
        let r = finite_end_check(&m, &[1.0, 2.0, 4.0, 8.0], &VolumeGrid::default(), 1e-10).unwrap();
        assert!(r.passed, "{r:#?}");
    }
}
