//! Explicit hyper-Kähler bases `(N, g_N, σ₁, σ₂, σ₃)` and triple checks.

use std::sync::Arc;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::Serialize;

use crate::diffgeo::{Chart, DifferentialForm, Interval, Jet, Sampler, ScalarField, TensorField};
use crate::error::{Error, Result};
use crate::linalg::{compatibility_residual, complex_structure, quaternion_sign, square_residual};
use crate::report::{worst, CheckOutcome, VerificationReport};

/// Orientation choice for the triple. With `sigma2_flipped` the second form
/// changes sign, which reverses the quaternion relation `J₁J₂ = ±J₃`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct TripleConvention {
    pub sigma2_flipped: bool,
}

impl TripleConvention {
    pub fn flipped() -> Self {
        TripleConvention {
            sigma2_flipped: true,
        }
    }

    /// `-1` when flipped, `+1` otherwise.
    pub fn sign(&self) -> f64 {
        if self.sigma2_flipped {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PointCharge {
    pub position: [f64; 3],
    pub strength: f64,
}

/// Potential `V = constant + Σ q/(2|x − p|)` on a box in ℝ³, with a circle
/// coordinate `τ` of length `fiber_period`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GibbonsHawkingSpec {
    pub constant: f64,
    pub charges: Vec<PointCharge>,
    pub spatial_box: [[f64; 2]; 3],
    pub fiber_period: f64,
}

impl Default for GibbonsHawkingSpec {
    fn default() -> Self {
        GibbonsHawkingSpec {
            constant: 1.0,
            charges: vec![PointCharge {
                position: [0.0; 3],
                strength: 1.0,
            }],
            spatial_box: [[-0.5, 0.5], [-0.5, 0.5], [0.5, 1.5]],
            fiber_period: 2.0 * std::f64::consts::PI,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum BaseKind {
    FlatTorus,
    GibbonsHawking(GibbonsHawkingSpec),
    Product { factors: Vec<BaseKind> },
}

impl BaseKind {
    /// Flat tori and products of flat tori.
    pub fn is_flat(&self) -> bool {
        match self {
            BaseKind::FlatTorus => true,
            BaseKind::GibbonsHawking(_) => false,
            BaseKind::Product { factors } => factors.iter().all(BaseKind::is_flat),
        }
    }

    fn flatten(self) -> Vec<BaseKind> {
        match self {
            BaseKind::Product { factors } => factors,
            k => vec![k],
        }
    }
}

#[derive(Clone, Debug)]
pub struct HyperKahlerBase {
    chart: Arc<Chart>,
    metric: TensorField,
    sigma: [DifferentialForm; 3],
    n: usize,
    kind: BaseKind,
    convention: TripleConvention,
}

/// The standard self-dual triple on coordinates `x0..x3` starting at `off`.
fn flat_triple(chart: &Arc<Chart>, off: usize, sign2: f64) -> [DifferentialForm; 3] {
    let two = |a: usize, b: usize, c: usize, d: usize, k: f64| {
        DifferentialForm::from_terms(
            chart,
            2,
            vec![
                (vec![off + a, off + b], ScalarField::constant(k)),
                (vec![off + c, off + d], ScalarField::constant(k)),
            ],
        )
    };
    [
        two(0, 1, 2, 3, 1.0),
        two(0, 2, 3, 1, sign2),
        two(0, 3, 1, 2, 1.0),
    ]
}

/// The unit flat 4-torus with the standard triple.
pub fn make_flat_torus_base() -> HyperKahlerBase {
    make_flat_torus_base_with(TripleConvention::default())
}

pub fn make_flat_torus_base_with(convention: TripleConvention) -> HyperKahlerBase {
    let chart = Arc::new(Chart::unit_torus("x", 4).expect("valid torus chart"));
    let metric = TensorField::euclidean(&chart);
    let sigma = flat_triple(&chart, 0, convention.sign());
    HyperKahlerBase {
        chart,
        metric,
        sigma,
        n: 1,
        kind: BaseKind::FlatTorus,
        convention,
    }
}

pub fn make_gibbons_hawking_base(spec: &GibbonsHawkingSpec) -> Result<HyperKahlerBase> {
    make_gibbons_hawking_base_with(spec, TripleConvention::default())
}

/// Gibbons–Hawking metric `V|dx|² + V⁻¹(dτ + θ)²` on `(τ, x1, x2, x3)` with
/// `dθ = −⋆dV`, and `σᵢ = (dτ + θ)∧dxⁱ + V dxʲ∧dxᵏ`.
pub fn make_gibbons_hawking_base_with(
    spec: &GibbonsHawkingSpec,
    convention: TripleConvention,
) -> Result<HyperKahlerBase> {
    let bx = spec.spatial_box;
    if !(spec.fiber_period > 0.0 && spec.fiber_period.is_finite()) {
        return Err(Error::InvalidArgument(
            "fiber period must be positive".into(),
        ));
    }
    let chart = Arc::new(Chart::new(
        vec!["tau", "x1", "x2", "x3"],
        vec![
            Interval::periodic(0.0, spec.fiber_period),
            Interval::new(bx[0][0], bx[0][1]),
            Interval::new(bx[1][0], bx[1][1]),
            Interval::new(bx[2][0], bx[2][1]),
        ],
    )?);
    let inside = |x: f64, k: usize| bx[k][0] <= x && x <= bx[k][1];

    // Each charge's θ is singular on a vertical half-line; pick the one that
    // misses the box (+1: string below the charge, -1: above).
    let mut strings = Vec::with_capacity(spec.charges.len());
    for (index, c) in spec.charges.iter().enumerate() {
        let [cx, cy, cz] = c.position;
        let over = inside(cx, 0) && inside(cy, 1);
        if over && inside(cz, 2) {
            return Err(Error::ChargeInChart {
                index,
                position: c.position,
            });
        }
        strings.push(if over && cz >= bx[2][0] { -1.0 } else { 1.0 });
    }

    let constant = spec.constant;
    let charges: Vec<([f64; 3], f64, f64)> = spec
        .charges
        .iter()
        .zip(&strings)
        .map(|(c, &s)| (c.position, 0.5 * c.strength, s))
        .collect();

    // Positivity of V on a grid including the corners.
    const GRID: usize = 9;
    for a in 0..GRID {
        for b in 0..GRID {
            for c in 0..GRID {
                let at = [
                    bx[0][0] + (bx[0][1] - bx[0][0]) * a as f64 / (GRID - 1) as f64,
                    bx[1][0] + (bx[1][1] - bx[1][0]) * b as f64 / (GRID - 1) as f64,
                    bx[2][0] + (bx[2][1] - bx[2][0]) * c as f64 / (GRID - 1) as f64,
                ];
                let value = constant
                    + charges
                        .iter()
                        .map(|(p, k, _)| {
                            k / ((at[0] - p[0]).powi(2)
                                + (at[1] - p[1]).powi(2)
                                + (at[2] - p[2]).powi(2))
                            .sqrt()
                        })
                        .sum::<f64>();
                if !(value > 0.0) {
                    return Err(Error::NonPositivePotential { value, at });
                }
            }
        }
    }

    let pot = ScalarField::multi((1..4).map(ScalarField::coord).collect(), 4, move |x| {
        let n = x[0].nvars();
        let mut v = Jet::constant(constant, n);
        let mut tx = Jet::constant(0.0, n);
        let mut ty = Jet::constant(0.0, n);
        for &(p, k, s) in &charges {
            let dx = &x[0] - p[0];
            let dy = &x[1] - p[1];
            let dz = &x[2] - p[2];
            let r = (&dx * &dx + &dy * &dy + &dz * &dz).sqrt();
            v.add_scaled(k, &r.recip());
            let w = (&r * &(&r + &(&dz * s))).recip();
            tx.add_scaled(-k * s, &(&dy * &w));
            ty.add_scaled(k * s, &(&dx * &w));
        }
        vec![v, tx, ty, Jet::constant(0.0, n)]
    });
    let v = pot[0].clone();
    let theta = [pot[1].clone(), pot[2].clone(), pot[3].clone()];
    let vinv = v.recip();

    // w = dτ + θ has components (1, θ1, θ2, θ3).
    let w: [ScalarField; 4] = [
        ScalarField::constant(1.0),
        theta[0].clone(),
        theta[1].clone(),
        theta[2].clone(),
    ];
    let metric = TensorField::symmetric(&chart, |i, j| {
        let flat = if i == j && i > 0 {
            v.clone()
        } else {
            ScalarField::zero()
        };
        flat + &(&w[i] * &w[j]) * &vinv
    });

    let mut sigma = Vec::with_capacity(3);
    for (i, sgn) in [(1usize, 1.0), (2, convention.sign()), (3, 1.0)] {
        let (j, k) = (i % 3 + 1, (i + 1) % 3 + 1);
        let mut terms: Vec<(Vec<usize>, ScalarField)> =
            (0..4).map(|a| (vec![a, i], w[a].scale(sgn))).collect();
        terms.push((vec![j, k], v.scale(sgn)));
        sigma.push(DifferentialForm::from_terms(&chart, 2, terms));
    }
    let sigma: [DifferentialForm; 3] = sigma.try_into().expect("three forms");
    Ok(HyperKahlerBase {
        chart,
        metric,
        sigma,
        n: 1,
        kind: BaseKind::GibbonsHawking(spec.clone()),
        convention,
    })
}

/// Riemannian product; the triple is the sum of the pulled-back triples.
pub fn product_base(b1: &HyperKahlerBase, b2: &HyperKahlerBase) -> Result<HyperKahlerBase> {
    if b1.convention != b2.convention {
        return Err(Error::ConventionMismatch);
    }
    let chart = Arc::new(b1.chart.product(&b2.chart));
    let d1 = b1.dim();
    let left: Vec<usize> = (0..d1).collect();
    let right: Vec<usize> = (d1..d1 + b2.dim()).collect();
    let metric = TensorField::block_sum(&chart, &b1.metric, &b2.metric)?;
    let mut sigma = Vec::with_capacity(3);
    for i in 0..3 {
        let a = b1.sigma[i].relabel(&chart, &left)?;
        let b = b2.sigma[i].relabel(&chart, &right)?;
        sigma.push(a.add(&b)?);
    }
    let mut factors = b1.kind.clone().flatten();
    factors.extend(b2.kind.clone().flatten());
    Ok(HyperKahlerBase {
        chart,
        metric,
        sigma: sigma.try_into().expect("three forms"),
        n: b1.n + b2.n,
        kind: BaseKind::Product { factors },
        convention: b1.convention,
    })
}

/// `count` copies of `base` multiplied together.
pub fn power_base(base: &HyperKahlerBase, count: usize) -> Result<HyperKahlerBase> {
    if count == 0 {
        return Err(Error::InvalidArgument(
            "product needs at least one factor".into(),
        ));
    }
    let mut out = base.clone();
    for _ in 1..count {
        out = product_base(&out, base)?;
    }
    Ok(out)
}

impl HyperKahlerBase {
    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn metric(&self) -> &TensorField {
        &self.metric
    }

    pub fn sigma(&self) -> &[DifferentialForm; 3] {
        &self.sigma
    }

    pub fn kind(&self) -> &BaseKind {
        &self.kind
    }

    pub fn convention(&self) -> TripleConvention {
        self.convention
    }

    /// Replaces `σᵢ` (0-based) without any checks; meant for negative controls.
    pub fn with_sigma(mut self, i: usize, form: DifferentialForm) -> Result<Self> {
        self.chart.ensure_same(form.chart())?;
        if form.degree() != 2 || i > 2 {
            return Err(Error::InvalidArgument(
                "σ replacement must be a 2-form, index 0..3".into(),
            ));
        }
        self.sigma[i] = form;
        Ok(self)
    }

    /// `Jᵢ = g⁻¹σᵢᵀ` at `p`.
    pub fn complex_structures(&self, p: &[f64]) -> Result<[DMatrix<f64>; 3]> {
        let g = self.metric.values_at(p);
        let mut out = Vec::with_capacity(3);
        for s in &self.sigma {
            let w = s.values_at(p).two_form_matrix();
            out.push(
                complex_structure(&g, &w)
                    .ok_or_else(|| Error::SingularMetric { at: p.to_vec() })?,
            );
        }
        Ok(out.try_into().expect("three structures"))
    }
}

struct TriplePoint {
    closed: f64,
    wedge: f64,
    square: f64,
    metric: f64,
    sign: f64,
    j: [DMatrix<f64>; 3],
}

/// Residuals of every base invariant at sampled points.
pub fn verify_triple(b: &HyperKahlerBase, samples: Sampler, tolerance: f64) -> VerificationReport {
    let start = Instant::now();
    let points = samples.points(&b.chart);
    let dsigma: Vec<DifferentialForm> = b
        .sigma
        .iter()
        .map(DifferentialForm::exterior_derivative)
        .collect();
    let four = b.dim() == 4;

    let rows: Vec<Option<TriplePoint>> = points
        .par_iter()
        .map(|p| {
            let closed = dsigma
                .iter()
                .map(|d| d.values_at(p).max_abs())
                .fold(0.0, f64::max);
            let g = b.metric.values_at(p);
            let vals: Vec<_> = b.sigma.iter().map(|s| s.values_at(p)).collect();
            let mut wedge = 0.0;
            if four {
                let vol = g.clone().determinant().abs().sqrt();
                for i in 0..3 {
                    for k in 0..3 {
                        let target = if i == k { 2.0 * vol } else { 0.0 };
                        wedge = f64::max(
                            wedge,
                            (vals[i].wedge(&vals[k]).get(&[0, 1, 2, 3]) - target).abs(),
                        );
                    }
                }
            }
            let j = b.complex_structures(p).ok()?;
            let square = j.iter().map(square_residual).fold(0.0, f64::max);
            let metric = j
                .iter()
                .map(|jk| compatibility_residual(&g, jk))
                .fold(0.0, f64::max);
            let sign = quaternion_sign(&j).0;
            Some(TriplePoint {
                closed,
                wedge,
                square,
                metric,
                sign,
                j,
            })
        })
        .collect();

    let mut report = VerificationReport::new("hyperkahler_triple", Some(samples));
    if let Some(idx) = rows.iter().position(Option::is_none) {
        report.push(CheckOutcome::condition("metric_invertible", false).with("worst_index", idx));
        return report.timed(start);
    }
    let rows: Vec<TriplePoint> = rows.into_iter().flatten().collect();
    let field = |name: &str, f: &dyn Fn(&TriplePoint) -> f64| {
        let (r, i) = worst(rows.iter().map(f));
        CheckOutcome::residual(name, r, tolerance).with("worst_index", i)
    };
    report.push(field("sigma_closed", &|r| r.closed));
    if four {
        report.push(field("sigma_wedge", &|r| r.wedge));
    }
    report.push(field("j_squared", &|r| r.square));
    report.push(field("j_metric", &|r| r.metric));
    let sign = rows.first().map_or(1.0, |r| r.sign);
    let consistent = rows.iter().all(|r| r.sign == sign);
    let (res, idx) = worst(
        rows.iter()
            .map(|r| crate::linalg::quaternion_residual(&r.j, sign)),
    );
    report.push(
        CheckOutcome::residual("quaternion_relation", res, tolerance)
            .with("sign", sign)
            .with("sign_consistent", consistent)
            .with("worst_index", idx),
    );
    report.timed(start)
}
