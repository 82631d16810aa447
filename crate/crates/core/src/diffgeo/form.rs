//! Differential forms on a chart, stored sparsely over strictly increasing
//! index sets.

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use super::chart::Chart;
use super::field::{eval_batch, values_batch, DiffMode, ScalarField};
use super::jet::Jet;
use crate::error::{Error, Result};

pub type IndexSet = Vec<usize>;

#[derive(Clone, Debug)]
pub struct DifferentialForm {
    chart: Arc<Chart>,
    degree: usize,
    terms: BTreeMap<IndexSet, ScalarField>,
}

/// Sorts `indices`, returning the permutation sign, or `None` if an index
/// repeats.
pub(crate) fn sort_with_sign(indices: &[usize]) -> Option<(IndexSet, f64)> {
    let mut v = indices.to_vec();
    let mut sign = 1.0;
    for i in 1..v.len() {
        let mut j = i;
        while j > 0 && v[j - 1] > v[j] {
            v.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    if v.windows(2).any(|w| w[0] == w[1]) {
        None
    } else {
        Some((v, sign))
    }
}

/// Concatenation sign and merged index set of two sorted sets, or `None` if
/// they intersect.
pub(crate) fn merge_sets(a: &[usize], b: &[usize]) -> Option<(IndexSet, f64)> {
    let mut inversions = 0usize;
    for &x in a {
        if b.contains(&x) {
            return None;
        }
        inversions += b.iter().filter(|&&y| y < x).count();
    }
    let mut merged = a.to_vec();
    merged.extend_from_slice(b);
    merged.sort_unstable();
    Some((merged, if inversions.is_multiple_of(2) { 1.0 } else { -1.0 }))
}

/// All strictly increasing `k`-subsets of `0..n` in lexicographic order.
pub fn increasing_sets(n: usize, k: usize) -> Vec<IndexSet> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(start: usize, n: usize, k: usize, cur: &mut Vec<usize>, out: &mut Vec<IndexSet>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..n {
            cur.push(i);
            rec(i + 1, n, k, cur, out);
            cur.pop();
        }
    }
    rec(0, n, k, &mut cur, &mut out);
    out
}

impl DifferentialForm {
    pub fn zero(chart: &Arc<Chart>, degree: usize) -> Self {
        DifferentialForm {
            chart: chart.clone(),
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// A 0-form.
    pub fn function(chart: &Arc<Chart>, f: ScalarField) -> Self {
        Self::from_terms(chart, 0, vec![(vec![], f)])
    }

    /// `dx^{i_1} ∧ ... ∧ dx^{i_k}` in any index order.
    pub fn basis(chart: &Arc<Chart>, indices: &[usize]) -> Self {
        Self::from_terms(
            chart,
            indices.len(),
            vec![(indices.to_vec(), ScalarField::constant(1.0))],
        )
    }

    /// Builds a form from `(indices, coefficient)` pairs; indices are sorted
    /// with the matching sign, repeated or out-of-range entries vanish.
    pub fn from_terms(
        chart: &Arc<Chart>,
        degree: usize,
        terms: impl IntoIterator<Item = (Vec<usize>, ScalarField)>,
    ) -> Self {
        let mut acc: BTreeMap<IndexSet, Vec<(f64, ScalarField)>> = BTreeMap::new();
        for (idx, f) in terms {
            debug_assert_eq!(idx.len(), degree, "index set length must equal degree");
            if idx.len() != degree || idx.iter().any(|&i| i >= chart.dim()) {
                continue;
            }
            if let Some((sorted, sign)) = sort_with_sign(&idx) {
                acc.entry(sorted).or_default().push((sign, f));
            }
        }
        Self::collect(chart, degree, acc)
    }

    fn collect(
        chart: &Arc<Chart>,
        degree: usize,
        acc: BTreeMap<IndexSet, Vec<(f64, ScalarField)>>,
    ) -> Self {
        let terms = acc
            .into_iter()
            .map(|(k, parts)| (k, ScalarField::linear_combination(parts)))
            .filter(|(_, f)| !f.is_zero())
            .collect();
        DifferentialForm {
            chart: chart.clone(),
            degree,
            terms,
        }
    }

    pub fn chart(&self) -> &Arc<Chart> {
        &self.chart
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn terms(&self) -> impl Iterator<Item = (&IndexSet, &ScalarField)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, indices: &[usize]) -> Option<&ScalarField> {
        self.terms.get(indices)
    }

    /// Structurally zero (no stored coefficients).
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn scale(&self, k: f64) -> Self {
        self.times(&ScalarField::constant(k))
    }

    /// Multiplication by a function.
    pub fn times(&self, f: &ScalarField) -> Self {
        let acc = self
            .terms
            .iter()
            .map(|(k, c)| (k.clone(), vec![(1.0, c * f)]))
            .collect();
        Self::collect(&self.chart, self.degree, acc)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &Self, k: f64) -> Result<Self> {
        self.chart.ensure_same(&other.chart)?;
        if self.degree != other.degree {
            return Err(Error::InvalidArgument(format!(
                "cannot add forms of degree {} and {}",
                self.degree, other.degree
            )));
        }
        let mut acc: BTreeMap<IndexSet, Vec<(f64, ScalarField)>> = BTreeMap::new();
        for (idx, f) in &self.terms {
            acc.entry(idx.clone()).or_default().push((1.0, f.clone()));
        }
        for (idx, f) in &other.terms {
            acc.entry(idx.clone()).or_default().push((k, f.clone()));
        }
        Ok(Self::collect(&self.chart, self.degree, acc))
    }

    /// Exterior product.
    pub fn wedge(&self, other: &Self) -> Result<Self> {
        self.chart.ensure_same(&other.chart)?;
        let degree = self.degree + other.degree;
        let mut acc: BTreeMap<IndexSet, Vec<(f64, ScalarField)>> = BTreeMap::new();
        if degree <= self.chart.dim() {
            for (a, fa) in &self.terms {
                for (b, fb) in &other.terms {
                    if let Some((idx, sign)) = merge_sets(a, b) {
                        acc.entry(idx).or_default().push((sign, fa * fb));
                    }
                }
            }
        }
        Ok(Self::collect(&self.chart, degree, acc))
    }

    /// Exterior derivative.
    pub fn exterior_derivative(&self) -> Self {
        let dim = self.chart.dim();
        let mut acc: BTreeMap<IndexSet, Vec<(f64, ScalarField)>> = BTreeMap::new();
        for (idx, f) in &self.terms {
            for j in 0..dim {
                if idx.contains(&j) {
                    continue;
                }
                let df = f.partial(j);
                if df.is_zero() {
                    continue;
                }
                let before = idx.iter().filter(|&&i| i < j).count();
                let sign = if before % 2 == 0 { 1.0 } else { -1.0 };
                let mut target = idx.clone();
                target.insert(before, j);
                acc.entry(target).or_default().push((sign, df));
            }
        }
        Self::collect(&self.chart, self.degree + 1, acc)
    }

    /// Evaluates the form at `p` on tangent vectors given in the coordinate
    /// basis.
    pub fn evaluate(&self, p: &[f64], vectors: &[&[f64]]) -> Result<f64> {
        if vectors.len() != self.degree {
            return Err(Error::WrongVectorCount {
                expected: self.degree,
                got: vectors.len(),
            });
        }
        let dim = self.chart.dim();
        if let Some(v) = vectors.iter().find(|v| v.len() != dim) {
            return Err(Error::WrongVectorLength {
                expected: dim,
                got: v.len(),
            });
        }
        if p.len() != dim {
            return Err(Error::WrongVectorLength {
                expected: dim,
                got: p.len(),
            });
        }
        Ok(self.values_at(p).evaluate(vectors))
    }

    /// Coefficient values at `p`; derivatives inside the coefficients are
    /// resolved exactly.
    pub fn values_at(&self, p: &[f64]) -> FormValue {
        self.values_at_mode(p, DiffMode::Exact)
    }

    pub fn values_at_mode(&self, p: &[f64], mode: DiffMode) -> FormValue {
        let fields: Vec<ScalarField> = self.terms.values().cloned().collect();
        let values: Vec<f64> = match mode {
            DiffMode::Exact => eval_batch(&fields, p, mode)
                .iter()
                .map(Jet::value)
                .collect(),
            DiffMode::FiniteDifference => values_batch(&fields, p),
        };
        FormValue {
            dim: self.chart.dim(),
            degree: self.degree,
            terms: self.terms.keys().cloned().zip(values).collect(),
        }
    }

    /// Coefficient jets at `p`.
    pub fn jets_at(&self, p: &[f64], mode: DiffMode) -> BTreeMap<IndexSet, Jet> {
        let fields: Vec<ScalarField> = self.terms.values().cloned().collect();
        self.terms
            .keys()
            .cloned()
            .zip(eval_batch(&fields, p, mode))
            .collect()
    }

    /// Pullback along the coordinate projection from `target` whose coordinate
    /// `map[i]` is coordinate `i` of this form's chart.
    pub fn relabel(&self, target: &Arc<Chart>, map: &[usize]) -> Result<Self> {
        if map.len() != self.chart.dim() || map.iter().any(|&i| i >= target.dim()) {
            return Err(Error::InvalidArgument(
                "coordinate map does not fit the target chart".into(),
            ));
        }
        let fields: Vec<ScalarField> = self.terms.values().cloned().collect();
        let moved = ScalarField::relabel_all(&fields, map);
        let terms = self
            .terms
            .keys()
            .map(|idx| idx.iter().map(|&i| map[i]).collect::<Vec<_>>())
            .zip(moved);
        Ok(Self::from_terms(target, self.degree, terms))
    }
}

/// A form evaluated at one point.
#[derive(Clone, Debug, PartialEq)]
pub struct FormValue {
    pub dim: usize,
    pub degree: usize,
    pub terms: BTreeMap<IndexSet, f64>,
}

impl FormValue {
    pub fn zero(dim: usize, degree: usize) -> Self {
        FormValue {
            dim,
            degree,
            terms: BTreeMap::new(),
        }
    }

    /// The coordinate covector `dx^i`.
    pub fn covector(dim: usize, i: usize) -> Self {
        FormValue {
            dim,
            degree: 1,
            terms: BTreeMap::from([(vec![i], 1.0)]),
        }
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.terms.get(idx).copied().unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.terms.values().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn wedge(&self, other: &FormValue) -> FormValue {
        let mut terms: BTreeMap<IndexSet, f64> = BTreeMap::new();
        for (a, x) in &self.terms {
            for (b, y) in &other.terms {
                if let Some((idx, sign)) = merge_sets(a, b) {
                    *terms.entry(idx).or_insert(0.0) += sign * x * y;
                }
            }
        }
        FormValue {
            dim: self.dim,
            degree: self.degree + other.degree,
            terms,
        }
    }

    pub fn sub(&self, other: &FormValue) -> FormValue {
        let mut terms = self.terms.clone();
        for (k, v) in &other.terms {
            *terms.entry(k.clone()).or_insert(0.0) -= v;
        }
        FormValue {
            dim: self.dim,
            degree: self.degree,
            terms,
        }
    }

    pub fn scale(&self, k: f64) -> FormValue {
        FormValue {
            dim: self.dim,
            degree: self.degree,
            terms: self.terms.iter().map(|(i, v)| (i.clone(), k * v)).collect(),
        }
    }

    /// Dense coefficient vector over `increasing_sets(dim, degree)`.
    pub fn to_dense(&self, sets: &[IndexSet]) -> Vec<f64> {
        sets.iter().map(|s| self.get(s)).collect()
    }

    pub fn evaluate(&self, vectors: &[&[f64]]) -> f64 {
        let k = self.degree;
        if k == 0 {
            return self.get(&[]);
        }
        self.terms
            .iter()
            .map(|(idx, c)| {
                let m = DMatrix::from_fn(k, k, |a, b| vectors[b][idx[a]]);
                c * m.determinant()
            })
            .sum()
    }

    /// Skew matrix `A[i][j] = form(e_i, e_j)` of a 2-form.
    pub fn two_form_matrix(&self) -> DMatrix<f64> {
        assert_eq!(self.degree, 2, "two_form_matrix needs a 2-form");
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (idx, &v) in &self.terms {
            m[(idx[0], idx[1])] = v;
            m[(idx[1], idx[0])] = -v;
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffgeo::chart::Chart;

    fn r4() -> Arc<Chart> {
        Arc::new(Chart::unit_torus("x", 4).unwrap())
    }

    #[test]
    fn basis_pairing() {
        let c = r4();
        let w = DifferentialForm::basis(&c, &[0, 1]);
        let e0 = [1.0, 0.0, 0.0, 0.0];
        let e1 = [0.0, 1.0, 0.0, 0.0];
        assert_eq!(w.evaluate(&[0.5; 4], &[&e0, &e1]).unwrap(), 1.0);
        assert_eq!(w.evaluate(&[0.5; 4], &[&e1, &e0]).unwrap(), -1.0);
        assert!(matches!(
            w.evaluate(&[0.5; 4], &[&e0]),
            Err(Error::WrongVectorCount {
                expected: 2,
                got: 1
            })
        ));
    }

    #[test]
    fn one_form_squares_to_zero() {
        let c = r4();
        let a = DifferentialForm::from_terms(
            &c,
            1,
            vec![
                (vec![0], ScalarField::coord(2)),
                (vec![3], ScalarField::from_fn(4, |v| v[1].sin())),
            ],
        );
        assert!(a.wedge(&a).unwrap().is_zero());
    }

    #[test]
    fn sigma_one_squared_is_twice_volume() {
        let c = r4();
        let s1 = DifferentialForm::basis(&c, &[0, 1])
            .add(&DifferentialForm::basis(&c, &[2, 3]))
            .unwrap();
        let top = s1.wedge(&s1).unwrap();
        assert_eq!(top.terms().count(), 1);
        assert_eq!(
            top.coefficient(&[0, 1, 2, 3]).unwrap().as_const(),
            Some(2.0)
        );
    }

    #[test]
    fn d_of_linear_coefficient() {
        let c = r4();
        let w = DifferentialForm::from_terms(&c, 1, vec![(vec![1], ScalarField::coord(0))]);
        let dw = w.exterior_derivative();
        assert_eq!(dw.terms().count(), 1);
        assert_eq!(dw.coefficient(&[0, 1]).unwrap().as_const(), Some(1.0));
    }

    #[test]
    fn degree_overflow_is_zero() {
        let c = r4();
        let v = DifferentialForm::basis(&c, &[0, 1, 2]);
        assert!(v
            .wedge(&DifferentialForm::basis(&c, &[1, 3]))
            .unwrap()
            .is_zero());
        assert!(
            v.wedge(&DifferentialForm::basis(&c, &[3]))
                .unwrap()
                .terms()
                .count()
                == 1
        );
        assert!(DifferentialForm::basis(&c, &[1, 1]).is_zero());
    }

    #[test]
    fn chart_mismatch_is_an_error() {
        let a = DifferentialForm::basis(&r4(), &[0]);
        let other = Arc::new(Chart::unit_torus("y", 4).unwrap());
        let b = DifferentialForm::basis(&other, &[1]);
        assert!(matches!(a.wedge(&b), Err(Error::ChartMismatch { .. })));
    }

    #[test]
    fn increasing_sets_count() {
        assert_eq!(increasing_sets(8, 3).len(), 56);
        assert_eq!(increasing_sets(12, 2).len(), 66);
        assert_eq!(increasing_sets(4, 0), vec![Vec::<usize>::new()]);
    }

    #[test]
    fn sign_conventions() {
        assert_eq!(sort_with_sign(&[2, 0, 1]), Some((vec![0, 1, 2], 1.0)));
        assert_eq!(sort_with_sign(&[1, 0]), Some((vec![0, 1], -1.0)));
        assert_eq!(merge_sets(&[1, 3], &[0, 2]), Some((vec![0, 1, 2, 3], -1.0)));
        assert_eq!(merge_sets(&[1], &[1]), None);
    }
}
