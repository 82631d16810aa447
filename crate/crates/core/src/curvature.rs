//! Levi-Civita curvature from metric jets: Christoffel symbols, Riemann,
//! Ricci and scalar curvature, and the Einstein and fiber checks.

use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::connection::T_INDEX;
use crate::diffgeo::{Chart, DiffMode, Interval, MetricJets, MetricSource, Sampler};
use crate::error::{Error, Result};
use crate::qk::QkModel;
use crate::report::{worst, CheckOutcome, VerificationReport};

/// Smallest `|X|²|Y|² − ⟨X,Y⟩²` for which a sectional curvature is reported.
pub const PLANE_THRESHOLD: f64 = 1e-12;
/// Points shared between exact and finite-difference scalar curvature.
pub const CROSS_CHECK_POINTS: usize = 10;
pub const CROSS_CHECK_TOLERANCE: f64 = 1e-3;
/// Tolerance for Riemann symmetries and the first Bianchi identity.
pub const SYMMETRY_TOLERANCE: f64 = 1e-6;
/// Sectional curvature of every fiber plane.
pub const FIBER_CURVATURE: f64 = -4.0;
pub const FIBER_T_RANGE: [f64; 2] = [-2.0, 2.0];

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CurvatureMode {
    #[default]
    Exact,
    Fd,
    /// Exact, with a finite-difference cross-check.
    Both,
}

impl CurvatureMode {
    pub fn primary(self) -> DiffMode {
        match self {
            CurvatureMode::Fd => DiffMode::FiniteDifference,
            _ => DiffMode::Exact,
        }
    }
}

/// Lowered Riemann tensor stored once per unordered pair of index pairs
/// `(a<b), (c<d)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PackedRiemann {
    dim: usize,
    data: Vec<f64>,
}

impl PackedRiemann {
    fn pair(dim: usize, a: usize, b: usize) -> usize {
        // a < b
        a * (2 * dim - a - 1) / 2 + (b - a - 1)
    }

    fn slot(&self, p: usize, q: usize) -> usize {
        let (p, q) = if p <= q { (p, q) } else { (q, p) };
        let np = self.dim * (self.dim - 1) / 2;
        p * (2 * np - p + 1) / 2 + (q - p)
    }

    fn from_full(dim: usize, full: &[f64]) -> Self {
        let np = dim * (dim - 1) / 2;
        let mut out = PackedRiemann {
            dim,
            data: vec![0.0; np * (np + 1) / 2],
        };
        for a in 0..dim {
            for b in a + 1..dim {
                for c in 0..dim {
                    for d in c + 1..dim {
                        let (p, q) = (Self::pair(dim, a, b), Self::pair(dim, c, d));
                        if p <= q {
                            let k = out.slot(p, q);
                            out.data[k] = full[((a * dim + b) * dim + c) * dim + d];
                        }
                    }
                }
            }
        }
        out
    }

    /// Number of stored reals.
    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    /// `R_abcd = g(R(∂c, ∂d)∂b, ∂a)`.
    pub fn get(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        if a == b || c == d {
            return 0.0;
        }
        let mut sign = 1.0;
        let (a, b) = if a < b {
            (a, b)
        } else {
            sign = -sign;
            (b, a)
        };
        let (c, d) = if c < d {
            (c, d)
        } else {
            sign = -sign;
            (d, c)
        };
        let (p, q) = (Self::pair(self.dim, a, b), Self::pair(self.dim, c, d));
        sign * self.data[self.slot(p, q)]
    }
}

#[derive(Clone, Debug)]
pub struct CurvaturePack {
    pub point: Vec<f64>,
    pub dim: usize,
    pub metric: DMatrix<f64>,
    pub inverse: DMatrix<f64>,
    /// `Γ^a_bc` at `[(a*d + b)*d + c]`.
    pub christoffel: Vec<f64>,
    pub riemann: PackedRiemann,
    pub ricci: DMatrix<f64>,
    pub scalar: f64,
    /// Largest violation of `R_abcd = −R_bacd = −R_abdc = R_cdab`.
    pub symmetry_residual: f64,
    /// Largest `|R_abcd + R_acdb + R_adbc|`.
    pub bianchi_residual: f64,
}

impl CurvaturePack {
    pub fn from_jets(point: &[f64], j: &MetricJets) -> Result<Self> {
        let d = j.dim;
        let inverse =
            j.g.clone()
                .try_inverse()
                .ok_or_else(|| Error::SingularMetric { at: point.to_vec() })?;
        if !inverse.iter().all(|x| x.is_finite()) {
            return Err(Error::SingularMetric { at: point.to_vec() });
        }
        let idx3 = |a: usize, b: usize, c: usize| (a * d + b) * d + c;
        // Γ_{a,bc}
        let mut low = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    low[idx3(a, b, c)] = 0.5 * (j.d(a, c, b) + j.d(a, b, c) - j.d(b, c, a));
                }
            }
        }
        let mut up = vec![0.0; d * d * d];
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    up[idx3(a, b, c)] = (0..d).map(|e| inverse[(a, e)] * low[idx3(e, b, c)]).sum();
                }
            }
        }
        // ∂_c Γ_{f,db}
        let dlow = |c: usize, f: usize, dd: usize, b: usize| {
            0.5 * (j.dd(f, b, c, dd) + j.dd(f, dd, c, b) - j.dd(dd, b, c, f))
        };
        let mut full = vec![0.0; d * d * d * d];
        for f in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let mut r = dlow(c, f, e, b) - dlow(e, f, c, b);
                        for h in 0..d {
                            r += low[idx3(h, e, f)] * up[idx3(h, c, b)]
                                - low[idx3(h, c, f)] * up[idx3(h, e, b)];
                        }
                        full[((f * d + b) * d + c) * d + e] = r;
                    }
                }
            }
        }
        let r4 = |a: usize, b: usize, c: usize, e: usize| full[((a * d + b) * d + c) * d + e];
        let mut symmetry_residual: f64 = 0.0;
        let mut bianchi_residual: f64 = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        let r = r4(a, b, c, e);
                        symmetry_residual = symmetry_residual
                            .max((r + r4(b, a, c, e)).abs())
                            .max((r + r4(a, b, e, c)).abs())
                            .max((r - r4(c, e, a, b)).abs());
                        bianchi_residual =
                            bianchi_residual.max((r + r4(a, c, e, b) + r4(a, e, b, c)).abs());
                    }
                }
            }
        }
        let ricci = DMatrix::from_fn(d, d, |b, e| {
            let mut s = 0.0;
            for a in 0..d {
                for f in 0..d {
                    s += inverse[(a, f)] * r4(f, b, a, e);
                }
            }
            s
        });
        let scalar = (0..d)
            .flat_map(|b| (0..d).map(move |e| (b, e)))
            .map(|(b, e)| inverse[(b, e)] * ricci[(b, e)])
            .sum();
        Ok(CurvaturePack {
            point: point.to_vec(),
            dim: d,
            metric: j.g.clone(),
            inverse,
            christoffel: up,
            riemann: PackedRiemann::from_full(d, &full),
            ricci,
            scalar,
            symmetry_residual,
            bianchi_residual,
        })
    }

    pub fn riemann(&self, a: usize, b: usize, c: usize, d: usize) -> f64 {
        self.riemann.get(a, b, c, d)
    }

    /// `Σ g^{ac} g^{bd} R_abcd` from the packed storage.
    pub fn contracted_scalar(&self) -> f64 {
        let d = self.dim;
        let mut s = 0.0;
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    let gac = self.inverse[(a, c)];
                    if gac == 0.0 {
                        continue;
                    }
                    for e in 0..d {
                        s += gac * self.inverse[(b, e)] * self.riemann(a, b, c, e);
                    }
                }
            }
        }
        s
    }

    /// Sectional curvature of the coordinate plane `(∂i, ∂j)`; `None` when
    /// the plane is degenerate.
    pub fn sectional(&self, i: usize, j: usize) -> Option<f64> {
        let g = &self.metric;
        let den = g[(i, i)] * g[(j, j)] - g[(i, j)] * g[(i, j)];
        (den > PLANE_THRESHOLD).then(|| self.riemann(i, j, i, j) / den)
    }

    /// `c = scal/dim`.
    pub fn einstein_constant(&self) -> f64 {
        self.scalar / self.dim as f64
    }

    /// `max |Ric − c·g|`.
    pub fn einstein_defect(&self) -> f64 {
        (&self.ricci - &self.metric * self.einstein_constant()).amax()
    }
}

pub fn curvature_at(source: &dyn MetricSource, p: &[f64], mode: DiffMode) -> Result<CurvaturePack> {
    CurvaturePack::from_jets(p, &source.metric_jets(p, mode)?)
}

impl MetricSource for QkModel {
    fn dim(&self) -> usize {
        QkModel::dim(self)
    }

    fn metric_jets(&self, p: &[f64], mode: DiffMode) -> Result<MetricJets> {
        self.metric().jets_at(p, mode)
    }
}

/// `c = −4(m + 2)`, from fiber sectional curvature −4 and the reduced scalar
/// curvature relation `scal = 4m(m + 2)·(−4)`.
pub fn expected_einstein_constant(m: usize) -> f64 {
    FIBER_CURVATURE * (m as f64 + 2.0)
}

/// Einstein defect `‖Ric − c(p)g‖∞`, spread and sign of `c`, Riemann
/// symmetries and the contraction check at sampled points.
pub fn einstein_residual(
    model: &QkModel,
    samples: Sampler,
    tolerance: f64,
    mode: CurvatureMode,
) -> VerificationReport {
    einstein_residual_on(
        model,
        model.chart(),
        Some(expected_einstein_constant(model.m())),
        samples,
        tolerance,
        mode,
    )
}

/// [`einstein_residual`] for any metric on `chart`.
pub fn einstein_residual_on(
    source: &dyn MetricSource,
    chart: &Chart,
    expected: Option<f64>,
    samples: Sampler,
    tolerance: f64,
    mode: CurvatureMode,
) -> VerificationReport {
    let start = Instant::now();
    let points = samples.points(chart);
    let packs: Vec<Result<CurvaturePack>> = points
        .par_iter()
        .map(|p| curvature_at(source, p, mode.primary()))
        .collect();
    let mut report = VerificationReport::new("einstein", Some(samples));
    if let Some((idx, Err(e))) = packs.iter().enumerate().find(|(_, r)| r.is_err()) {
        report.push(
            CheckOutcome::condition("curvature_defined", false)
                .with("error", e.to_string())
                .with("worst_index", idx),
        );
        return report.timed(start);
    }
    let packs: Vec<CurvaturePack> = packs.into_iter().map(|r| r.expect("checked")).collect();
    let cs: Vec<f64> = packs.iter().map(CurvaturePack::einstein_constant).collect();
    let (defect, idx) = worst(packs.iter().map(CurvaturePack::einstein_defect));
    let cmax = cs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let cmin = cs.iter().cloned().fold(f64::INFINITY, f64::min);
    let mean = cs.iter().sum::<f64>() / cs.len().max(1) as f64;
    report.push(
        CheckOutcome::residual("einstein_defect", defect, tolerance)
            .with("worst_index", idx)
            .with("mode", mode),
    );
    report.push(
        CheckOutcome::residual("einstein_spread", cmax - cmin, tolerance)
            .with("min", cmin)
            .with("max", cmax),
    );
    report.push(CheckOutcome::condition("einstein_negative", cmax < 0.0).with("constant", mean));
    if let Some(c) = expected {
        let (dev, idx) = worst(cs.iter().map(|x| (x - c).abs()));
        report.push(
            CheckOutcome::residual("einstein_constant", dev, tolerance)
                .with("expected", c)
                .with("mean", mean)
                .with("worst_index", idx),
        );
    }
    let (sym, i1) = worst(packs.iter().map(|p| p.symmetry_residual));
    report.push(
        CheckOutcome::residual("riemann_symmetry", sym, SYMMETRY_TOLERANCE).with("worst_index", i1),
    );
    let (bia, i2) = worst(packs.iter().map(|p| p.bianchi_residual));
    report.push(
        CheckOutcome::residual("first_bianchi", bia, SYMMETRY_TOLERANCE).with("worst_index", i2),
    );
    let (con, i3) = worst(
        packs
            .iter()
            .map(|p| (p.contracted_scalar() - p.scalar).abs()),
    );
    report.push(
        CheckOutcome::residual("scalar_contraction", con, 1e-8 * (1.0 + mean.abs()))
            .with("worst_index", i3),
    );

    if mode == CurvatureMode::Both {
        let shared = &points[..points.len().min(CROSS_CHECK_POINTS)];
        let fd: Vec<Result<f64>> = shared
            .par_iter()
            .map(|p| curvature_at(source, p, DiffMode::FiniteDifference).map(|c| c.scalar))
            .collect();
        let diffs: Vec<f64> = fd
            .iter()
            .zip(&packs)
            .map(|(f, e)| f.as_ref().map_or(f64::NAN, |s| (s - e.scalar).abs()))
            .collect();
        let (d, idx) = worst(diffs);
        report.push(
            CheckOutcome::residual("exact_vs_fd_scalar", d, CROSS_CHECK_TOLERANCE)
                .with("points", shared.len())
                .with("worst_index", idx),
        );
    }
    report.timed(start)
}

/// Sectional curvatures of the coordinate planes of the fiber metric
/// `dt² + 4e^{4t}Σdθᵢ²` at frozen base points, over `t ∈ [−2, 2]`.
pub fn fiber_curvature_check(
    model: &QkModel,
    samples: Sampler,
    tolerance: f64,
) -> VerificationReport {
    let start = Instant::now();
    let mut intervals = model.chart().intervals().to_vec();
    intervals[T_INDEX] = Interval::new(FIBER_T_RANGE[0], FIBER_T_RANGE[1]);
    let chart = Chart::new(model.chart().names().to_vec(), intervals).expect("valid chart");
    let mut points = samples.points(&chart);
    // The sampler keeps a margin; add the interval ends explicitly.
    if let Some(first) = points.first().cloned() {
        for t in FIBER_T_RANGE {
            let mut p = first.clone();
            p[T_INDEX] = t;
            points.push(p);
        }
    }
    let free = [0, 1, 2, 3];
    let rows: Vec<Result<(f64, usize)>> = points
        .par_iter()
        .map(|p| {
            let slice = model.metric().restrict(&free, p);
            let pack = curvature_at(&slice, &p[..4], DiffMode::Exact)?;
            let mut dev: f64 = 0.0;
            let mut planes = 0;
            for i in 0..4 {
                for j in i + 1..4 {
                    if let Some(k) = pack.sectional(i, j) {
                        dev = dev.max((k - FIBER_CURVATURE).abs());
                        planes += 1;
                    }
                }
            }
            Ok((dev, planes))
        })
        .collect();
    let mut report = VerificationReport::new("fiber_curvature", Some(samples));
    let devs: Vec<f64> = rows
        .iter()
        .map(|r| r.as_ref().map_or(f64::NAN, |x| x.0))
        .collect();
    let planes: usize = rows.iter().map(|r| r.as_ref().map_or(0, |x| x.1)).sum();
    let (dev, idx) = worst(devs);
    report.push(
        CheckOutcome::residual("fiber_sectional", dev, tolerance)
            .with("expected", FIBER_CURVATURE)
            .with("t_range", FIBER_T_RANGE)
            .with("planes", planes)
            .with("worst_index", idx),
    );
    report.timed(start)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::connection::flat_connection;
    use crate::diffgeo::{ScalarField, TensorField};
    use crate::hk_bases::make_flat_torus_base;
    use crate::qk::assemble_qk_model;
    use std::sync::Arc;

    fn flat_model() -> QkModel {
        let base = make_flat_torus_base();
        assemble_qk_model(&base, &flat_connection(&base).unwrap()).unwrap()
    }

    #[test]
    fn packed_indexing_round_trips() {
        let d = 5;
        let mut full = vec![0.0; d * d * d * d];
        // An algebraic curvature tensor: R = g∧g style from a symmetric h.
        let h = DMatrix::from_fn(d, d, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        full[((a * d + b) * d + c) * d + e] =
                            h[(a, c)] * h[(b, e)] - h[(a, e)] * h[(b, c)];
                    }
                }
            }
        }
        let p = PackedRiemann::from_full(d, &full);
        assert_eq!(p.len(), 55);
        for a in 0..d {
            for b in 0..d {
                for c in 0..d {
                    for e in 0..d {
                        assert_eq!(p.get(a, b, c, e), full[((a * d + b) * d + c) * d + e]);
                    }
                }
            }
        }
    }

    #[test]
    fn euclidean_is_flat() {
        let chart = Arc::new(Chart::unit_torus("x", 4).unwrap());
        let g = TensorField::euclidean(&chart);
        let c = curvature_at(&g, &[0.1, 0.2, 0.3, 0.4], DiffMode::Exact).unwrap();
        assert_eq!(c.scalar, 0.0);
        assert!(c.riemann.data.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn round_sphere() {
        let chart = Arc::new(
            Chart::new(
                vec!["th", "ph"],
                vec![Interval::new(0.5, 2.5), Interval::periodic(0.0, 6.0)],
            )
            .unwrap(),
        );
        let g = TensorField::symmetric(&chart, |i, j| match (i, j) {
            (0, 0) => ScalarField::constant(1.0),
            (1, 1) => {
                let s = ScalarField::from_fn(2, |x| x[0].sin());
                &s * &s
            }
            _ => ScalarField::zero(),
        });
        let c = curvature_at(&g, &[1.0, 0.3], DiffMode::Exact).unwrap();
        assert!((c.sectional(0, 1).unwrap() - 1.0).abs() < 1e-13);
        assert!((c.scalar - 2.0).abs() < 1e-13);
    }

    #[test]
    fn flat_model_scalar_curvature_at_t0() {
        let m = flat_model();
        let c = curvature_at(
            &m,
            &[0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            DiffMode::Exact,
        )
        .unwrap();
        assert!((c.scalar + 128.0).abs() < 1e-9, "{}", c.scalar);
        assert!(c.bianchi_residual < 1e-6);
    }

    #[test]
    fn flat_model_is_einstein() {
        let r = einstein_residual(
            &flat_model(),
            Sampler::new(3, 10),
            1e-5,
            CurvatureMode::Both,
        );
        assert!(r.passed, "{r:#?}");
    }

    #[test]
    fn fiber_planes_have_curvature_minus_four() {
        let r = fiber_curvature_check(&flat_model(), Sampler::new(3, 20), 1e-6);
        assert!(r.passed, "{r:#?}");
    }
}
