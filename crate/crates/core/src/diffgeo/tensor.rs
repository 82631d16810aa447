use std::sync::Arc;

use nalgebra::DMatrix;

use super::chart::Chart;
use super::field::{eval_batch, eval_batch_with, fd_jets, values_batch, DiffMode, ScalarField};
use super::jet::Jet;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Valence {
    /// Bilinear form `T_ab`.
    Covariant,
    /// Endomorphism `T^a_b`.
    Mixed,
}

/// A rank-2 tensor field, components row-major over the chart dimension.
#[derive(Clone, Debug)]
pub struct TensorField {
    chart: Arc<Chart>,
    valence: Valence,
    components: Vec<ScalarField>,
}

impl TensorField {
    pub fn new(chart: &Arc<Chart>, valence: Valence, components: Vec<ScalarField>) -> Result<Self> {
        let d = chart.dim();
        if components.len() != d * d {
            return Err(Error::InvalidArgument(format!(
                "rank-2 tensor on a {d}-chart needs {} components, got {}",
                d * d,
                components.len()
            )));
        }
        Ok(TensorField {
            chart: chart.clone(),
            valence,
            components,
        })
    }

    /// Symmetric covariant tensor from its upper triangle.
    pub fn symmetric(chart: &Arc<Chart>, entry: impl Fn(usize, usize) -> ScalarField) -> Self {
        let d = chart.dim();
        let mut components = vec![ScalarField::zero(); d * d];
        for i in 0..d {
            for j in i..d {
                let f = entry(i, j);
                components[i * d + j] = f.clone();
                components[j * d + i] = f;
            }
        }
        TensorField {
            chart: chart.clone(),
            valence: Valence::Covariant,
            components,
        }
    }

    pub fn euclidean(chart: &Arc<Chart>) -> Self {
        Self::symmetric(chart, |i, j| {
            ScalarField::constant(if i == j { 1.0 } else { 0.0 })
        })
    }

    /// Block-diagonal sum on the product chart.
    pub fn block_sum(chart: &Arc<Chart>, a: &TensorField, b: &TensorField) -> Result<Self> {
        let (da, db) = (a.dim(), b.dim());
        if chart.dim() != da + db {
            return Err(Error::InvalidArgument(
                "block sum chart has the wrong dimension".into(),
            ));
        }
        let shift: Vec<usize> = (da..da + db).collect();
        let d = da + db;
        let mut components = vec![ScalarField::zero(); d * d];
        for i in 0..da {
            for j in 0..da {
                components[i * d + j] = a.component(i, j).clone();
            }
        }
        let moved = ScalarField::relabel_all(b.components(), &shift);
        for i in 0..db {
            for j in 0..db {
                components[(da + i) * d + da + j] = moved[i * db + j].clone();
            }
        }
        TensorField::new(chart, a.valence, components)
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn dim(&self) -> usize {
        self.chart.dim()
    }

    pub fn valence(&self) -> Valence {
        self.valence
    }

    pub fn component(&self, i: usize, j: usize) -> &ScalarField {
        &self.components[i * self.dim() + j]
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn values_at(&self, p: &[f64]) -> DMatrix<f64> {
        let d = self.dim();
        let v = values_batch(&self.components, p);
        DMatrix::from_row_slice(d, d, &v)
    }

    /// Value and derivatives up to second order of every component.
    pub fn jets_at(&self, p: &[f64], mode: DiffMode) -> Result<MetricJets> {
        MetricJets::from_jets(self.dim(), &eval_batch(&self.components, p, mode))
    }

    /// Largest `|T_ij - T_ji|` at `p`.
    pub fn symmetry_residual(&self, p: &[f64]) -> f64 {
        let m = self.values_at(p);
        (&m - m.transpose()).amax()
    }

    /// Restriction of this metric to the coordinate slice through `anchor`
    /// spanned by `free` coordinates.
    pub fn restrict(&self, free: &[usize], anchor: &[f64]) -> SliceMetric<'_> {
        SliceMetric {
            metric: self,
            free: free.to_vec(),
            anchor: anchor.to_vec(),
        }
    }
}

/// A metric and its first and second coordinate derivatives at one point.
#[derive(Clone, Debug)]
pub struct MetricJets {
    pub dim: usize,
    pub g: DMatrix<f64>,
    /// `dg[(a*d + b)*d + c] = ∂_c g_ab`
    pub dg: Vec<f64>,
    /// `ddg[((a*d + b)*d + c)*d + e] = ∂_c ∂_e g_ab`
    pub ddg: Vec<f64>,
}

impl MetricJets {
    pub fn from_jets(dim: usize, jets: &[Jet]) -> Result<Self> {
        let d = dim;
        let mut g = DMatrix::zeros(d, d);
        let mut dg = vec![0.0; d * d * d];
        let mut ddg = vec![0.0; d * d * d * d];
        for a in 0..d {
            for b in 0..d {
                let j = &jets[a * d + b];
                if j.order() < 2 {
                    return Err(Error::OrderUnavailable {
                        requested: 2,
                        available: j.order(),
                    });
                }
                g[(a, b)] = j.value();
                if j.nvars() == 0 {
                    continue;
                }
                for c in 0..d {
                    dg[(a * d + b) * d + c] = j.d(c);
                    for e in 0..d {
                        ddg[((a * d + b) * d + c) * d + e] = j.dd(c, e);
                    }
                }
            }
        }
        Ok(MetricJets { dim, g, dg, ddg })
    }

    #[inline]
    pub fn d(&self, a: usize, b: usize, c: usize) -> f64 {
        self.dg[(a * self.dim + b) * self.dim + c]
    }

    #[inline]
    pub fn dd(&self, a: usize, b: usize, c: usize, e: usize) -> f64 {
        let d = self.dim;
        self.ddg[((a * d + b) * d + c) * d + e]
    }
}

/// Anything that can report a metric with two derivatives at a point.
pub trait MetricSource: Sync {
    fn dim(&self) -> usize;
    fn metric_jets(&self, p: &[f64], mode: DiffMode) -> Result<MetricJets>;
}

impl MetricSource for TensorField {
    fn dim(&self) -> usize {
        TensorField::dim(self)
    }

    fn metric_jets(&self, p: &[f64], mode: DiffMode) -> Result<MetricJets> {
        self.jets_at(p, mode)
    }
}

/// Induced metric on a coordinate slice; points are given in the free
/// coordinates only.
pub struct SliceMetric<'a> {
    metric: &'a TensorField,
    free: Vec<usize>,
    anchor: Vec<f64>,
}

impl SliceMetric<'_> {
    fn embed(&self, q: &[f64]) -> Vec<f64> {
        let mut p = self.anchor.clone();
        for (&i, &x) in self.free.iter().zip(q) {
            p[i] = x;
        }
        p
    }

    fn fields(&self) -> Vec<ScalarField> {
        let mut out = Vec::with_capacity(self.free.len() * self.free.len());
        for &i in &self.free {
            for &j in &self.free {
                out.push(self.metric.component(i, j).clone());
            }
        }
        out
    }
}

impl MetricSource for SliceMetric<'_> {
    fn dim(&self) -> usize {
        self.free.len()
    }

    fn metric_jets(&self, q: &[f64], mode: DiffMode) -> Result<MetricJets> {
        let k = self.free.len();
        let fields = self.fields();
        let jets = match mode {
            DiffMode::Exact => {
                let p = self.embed(q);
                let inputs: Vec<Jet> = p
                    .iter()
                    .enumerate()
                    .map(|(i, &x)| match self.free.iter().position(|&f| f == i) {
                        Some(slot) => Jet::variable(x, slot, k),
                        None => Jet::constant(x, k),
                    })
                    .collect();
                eval_batch_with(&fields, &inputs, false)
            }
            DiffMode::FiniteDifference => fd_jets(q, |y| values_batch(&fields, &self.embed(y))),
        };
        MetricJets::from_jets(k, &jets)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgeo::chart::Interval;

    #[test]
    fn block_sum_places_blocks() {
        let a = Arc::new(Chart::new(vec!["u"], vec![Interval::new(0.0, 1.0)]).unwrap());
        let b = Arc::new(Chart::new(vec!["v", "w"], vec![Interval::new(0.0, 1.0); 2]).unwrap());
        let ab = Arc::new(a.product(&b));
        let ga = TensorField::symmetric(&a, |_, _| ScalarField::constant(2.0));
        let gb = TensorField::symmetric(&b, |i, j| {
            if i == j {
                ScalarField::coord(0) + 1.0
            } else {
                ScalarField::zero()
            }
        });
        let g = TensorField::block_sum(&ab, &ga, &gb).unwrap();
        let m = g.values_at(&[0.1, 0.5, 0.9]);
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(1, 1)], 1.5);
        assert_eq!(m[(2, 2)], 1.5);
        assert_eq!(m[(0, 1)], 0.0);
        assert_eq!(g.symmetry_residual(&[0.1, 0.5, 0.9]), 0.0);
    }

    #[test]
    fn slice_metric_freezes_coordinates() {
        let c = Arc::new(Chart::new(vec!["x", "y"], vec![Interval::new(-1.0, 1.0); 2]).unwrap());
        let g = TensorField::symmetric(&c, |i, j| {
            if i == j {
                ScalarField::from_fn(2, |v| (&v[0] * &v[1]).exp())
            } else {
                ScalarField::zero()
            }
        });
        let slice = g.restrict(&[0], &[0.0, 0.5]);
        let mj = slice.metric_jets(&[0.2], DiffMode::Exact).unwrap();
        assert_eq!(mj.dim, 1);
        let e = (0.1f64).exp();
        assert!((mj.g[(0, 0)] - e).abs() < 1e-15);
        assert!((mj.d(0, 0, 0) - 0.5 * e).abs() < 1e-15);
        assert!((mj.dd(0, 0, 0, 0) - 0.25 * e).abs() < 1e-15);
        let fd = slice
            .metric_jets(&[0.2], DiffMode::FiniteDifference)
            .unwrap();
        assert!((fd.dd(0, 0, 0, 0) - 0.25 * e).abs() < 1e-6);
    }
}
