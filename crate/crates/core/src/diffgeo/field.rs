//! Scalar fields on a chart.
//!
//! A [`ScalarField`] is a shared expression DAG over chart coordinates. Leaves
//! are constants, coordinates and opaque closures over [`Jet`]s; interior nodes
//! are linear combinations, products and partial derivatives. Evaluating a
//! field at a point runs every node once per point (results are memoized by
//! node identity), so fields built from shared pieces stay cheap.
//!
//! Two differentiation modes sit behind one interface: exact forward mode via
//! second-order jets and central finite differences with one Richardson step.

use std::collections::HashMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use super::jet::Jet;
use crate::error::{Error, Result};

/// Base step of the finite-difference cross-check mode.
pub const FD_STEP: f64 = 1e-4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, serde::Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiffMode {
    Exact,
    FiniteDifference,
}

pub type MapFn = Arc<dyn Fn(&[Jet]) -> Jet + Send + Sync>;
pub type MultiFn = Arc<dyn Fn(&[Jet]) -> Vec<Jet> + Send + Sync>;

#[derive(Clone)]
pub struct ScalarField(Arc<Node>);

enum Node {
    Const(f64),
    Coord(usize),
    Lin {
        terms: Vec<(f64, ScalarField)>,
        offset: f64,
    },
    Mul(ScalarField, ScalarField),
    Map {
        args: Vec<ScalarField>,
        f: MapFn,
    },
    Multi {
        args: Vec<ScalarField>,
        f: MultiFn,
    },
    Pick(ScalarField, usize),
    Partial(ScalarField, usize),
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &*self.0 {
            Node::Const(c) => write!(f, "{c}"),
            Node::Coord(i) => write!(f, "x{i}"),
            Node::Lin { terms, offset } => {
                write!(f, "(")?;
                for (k, t) in terms {
                    write!(f, "{k}*{t:?} + ")?;
                }
                write!(f, "{offset})")
            }
            Node::Mul(a, b) => write!(f, "{a:?}*{b:?}"),
            Node::Map { args, .. } => write!(f, "map/{}", args.len()),
            Node::Multi { args, .. } => write!(f, "multi/{}", args.len()),
            Node::Pick(m, i) => write!(f, "{m:?}[{i}]"),
            Node::Partial(g, j) => write!(f, "d{j}({g:?})"),
        }
    }
}

impl ScalarField {
    fn node(node: Node) -> Self {
        ScalarField(Arc::new(node))
    }

    pub fn constant(c: f64) -> Self {
        Self::node(Node::Const(c))
    }

    pub fn zero() -> Self {
        Self::constant(0.0)
    }

    pub fn coord(i: usize) -> Self {
        Self::node(Node::Coord(i))
    }

    /// A field given by a closure of all `dim` chart coordinates.
    pub fn from_fn<F>(dim: usize, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    {
        Self::map((0..dim).map(Self::coord).collect(), f)
    }

    /// A field computed by a closure from other fields.
    pub fn map<F>(args: Vec<ScalarField>, f: F) -> Self
    where
        F: Fn(&[Jet]) -> Jet + Send + Sync + 'static,
    {
        Self::node(Node::Map {
            args,
            f: Arc::new(f),
        })
    }

    /// Several fields computed together by one closure that returns `len`
    /// jets. The closure runs once per evaluation point.
    pub fn multi<F>(args: Vec<ScalarField>, len: usize, f: F) -> Vec<Self>
    where
        F: Fn(&[Jet]) -> Vec<Jet> + Send + Sync + 'static,
    {
        let shared = Self::node(Node::Multi {
            args,
            f: Arc::new(f),
        });
        (0..len)
            .map(|i| Self::node(Node::Pick(shared.clone(), i)))
            .collect()
    }

    pub fn linear_combination(terms: Vec<(f64, ScalarField)>) -> Self {
        let mut offset = 0.0;
        let mut kept: Vec<(f64, ScalarField)> = Vec::with_capacity(terms.len());
        for (k, field) in terms {
            if k == 0.0 {
                continue;
            }
            match &*field.0 {
                Node::Const(c) => offset += k * c,
                Node::Lin {
                    terms: inner,
                    offset: o,
                } => {
                    offset += k * o;
                    for (ki, fi) in inner {
                        push_term(&mut kept, k * ki, fi.clone());
                    }
                }
                _ => push_term(&mut kept, k, field),
            }
        }
        kept.retain(|(k, _)| *k != 0.0);
        match kept.len() {
            0 => Self::constant(offset),
            1 if offset == 0.0 && kept[0].0 == 1.0 => kept.pop().map(|(_, f)| f).unwrap(),
            _ => Self::node(Node::Lin {
                terms: kept,
                offset,
            }),
        }
    }

    pub fn as_const(&self) -> Option<f64> {
        match &*self.0 {
            Node::Const(c) => Some(*c),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.as_const() == Some(0.0)
    }

    pub fn scale(&self, k: f64) -> Self {
        Self::linear_combination(vec![(k, self.clone())])
    }

    pub fn exp(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.exp()),
            None => Self::map(vec![self.clone()], |a| a[0].exp()),
        }
    }

    pub fn sqrt(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.sqrt()),
            None => Self::map(vec![self.clone()], |a| a[0].sqrt()),
        }
    }

    pub fn recip(&self) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(1.0 / c),
            None => Self::map(vec![self.clone()], |a| a[0].recip()),
        }
    }

    pub fn powi(&self, k: i32) -> Self {
        match self.as_const() {
            Some(c) => Self::constant(c.powi(k)),
            None => Self::map(vec![self.clone()], move |a| a[0].powi(k)),
        }
    }

    /// Symbolic partial derivative along coordinate `j`. Linear combinations,
    /// products, constants and coordinates are differentiated symbolically;
    /// closures become deferred `Partial` nodes resolved at evaluation time.
    pub fn partial(&self, j: usize) -> Self {
        match &*self.0 {
            Node::Const(_) => Self::zero(),
            Node::Coord(i) => Self::constant(if *i == j { 1.0 } else { 0.0 }),
            Node::Lin { terms, .. } => {
                Self::linear_combination(terms.iter().map(|(k, f)| (*k, f.partial(j))).collect())
            }
            Node::Mul(a, b) => &a.partial(j) * b + a * &b.partial(j),
            _ => Self::node(Node::Partial(self.clone(), j)),
        }
    }

    /// Renames coordinates: coordinate `i` becomes `map[i]`. `map` must be
    /// injective; this is the pullback along a coordinate projection.
    pub fn relabel(&self, map: &[usize]) -> Self {
        Self::relabel_all(std::slice::from_ref(self), map)
            .pop()
            .unwrap()
    }

    /// Relabels several fields at once, preserving their shared structure.
    pub fn relabel_all(fields: &[ScalarField], map: &[usize]) -> Vec<Self> {
        let mut cache = HashMap::new();
        fields
            .iter()
            .map(|f| f.relabel_cached(map, &mut cache))
            .collect()
    }

    fn relabel_cached(&self, map: &[usize], cache: &mut HashMap<usize, ScalarField>) -> Self {
        let key = self.key();
        if let Some(done) = cache.get(&key) {
            return done.clone();
        }
        let out = match &*self.0 {
            Node::Const(_) => self.clone(),
            Node::Coord(i) => Self::coord(map[*i]),
            Node::Lin { terms, offset } => Self::node(Node::Lin {
                terms: terms
                    .iter()
                    .map(|(k, f)| (*k, f.relabel_cached(map, cache)))
                    .collect(),
                offset: *offset,
            }),
            Node::Mul(a, b) => Self::node(Node::Mul(
                a.relabel_cached(map, cache),
                b.relabel_cached(map, cache),
            )),
            Node::Map { args, f } => Self::node(Node::Map {
                args: args.iter().map(|a| a.relabel_cached(map, cache)).collect(),
                f: f.clone(),
            }),
            Node::Multi { args, f } => Self::node(Node::Multi {
                args: args.iter().map(|a| a.relabel_cached(map, cache)).collect(),
                f: f.clone(),
            }),
            Node::Pick(m, i) => Self::node(Node::Pick(m.relabel_cached(map, cache), *i)),
            Node::Partial(g, j) => Self::node(Node::Partial(g.relabel_cached(map, cache), map[*j])),
        };
        cache.insert(key, out.clone());
        out
    }

    fn key(&self) -> usize {
        Arc::as_ptr(&self.0) as usize
    }

    /// Value at a chart point.
    pub fn value(&self, p: &[f64]) -> f64 {
        let inputs: Vec<Jet> = p.iter().map(|&x| Jet::scalar(x)).collect();
        Evaluation::new(&inputs, false).eval(self).value()
    }

    /// Evaluates on arbitrary input jets, one per chart coordinate. This is
    /// how fields compose: the inputs may themselves depend on other variables.
    pub fn eval_jets(&self, inputs: &[Jet]) -> Jet {
        Evaluation::new(inputs, false).eval(self)
    }

    /// Value, gradient and Hessian at `p`.
    pub fn jet(&self, p: &[f64], mode: DiffMode) -> Jet {
        eval_batch(std::slice::from_ref(self), p, mode)
            .pop()
            .unwrap()
    }
}

fn push_term(kept: &mut Vec<(f64, ScalarField)>, k: f64, f: ScalarField) {
    if let Some(slot) = kept.iter_mut().find(|(_, g)| same_term(g, &f)) {
        slot.0 += k;
    } else {
        kept.push((k, f));
    }
}

/// Identity of summands: the same node, or products of the same two nodes in
/// either order.
fn same_term(a: &ScalarField, b: &ScalarField) -> bool {
    if a.key() == b.key() {
        return true;
    }
    match (&*a.0, &*b.0) {
        (Node::Mul(p, q), Node::Mul(r, s)) => {
            (p.key() == r.key() && q.key() == s.key()) || (p.key() == s.key() && q.key() == r.key())
        }
        _ => false,
    }
}

/// Evaluates several fields at one point, sharing all common subexpressions.
pub fn eval_batch(fields: &[ScalarField], p: &[f64], mode: DiffMode) -> Vec<Jet> {
    match mode {
        DiffMode::Exact => eval_batch_with(fields, &Jet::seed(p), true),
        DiffMode::FiniteDifference => fd_jets(p, |q| {
            let inputs: Vec<Jet> = q.iter().map(|&x| Jet::scalar(x)).collect();
            let mut ev = Evaluation::new(&inputs, false);
            fields.iter().map(|f| ev.eval(f).value()).collect()
        }),
    }
}

/// Evaluates several fields on explicit input jets. Set `identity` only when
/// `inputs` is exactly `Jet::seed(point)`.
pub fn eval_batch_with(fields: &[ScalarField], inputs: &[Jet], identity: bool) -> Vec<Jet> {
    let mut ev = Evaluation::new(inputs, identity);
    fields.iter().map(|f| ev.eval(f)).collect()
}

/// Values only, sharing subexpressions.
pub fn values_batch(fields: &[ScalarField], p: &[f64]) -> Vec<f64> {
    let inputs: Vec<Jet> = p.iter().map(|&x| Jet::scalar(x)).collect();
    let mut ev = Evaluation::new(&inputs, false);
    fields.iter().map(|f| ev.eval(f).value()).collect()
}

/// Central-difference jets (value, gradient, Hessian) of a vector-valued
/// function of `p`, step [`FD_STEP`] with one Richardson extrapolation.
pub fn fd_jets(p: &[f64], values: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Jet> {
    let n = p.len();
    let h = FD_STEP;
    let at = |shifts: &[(usize, f64)]| {
        let mut q = p.to_vec();
        for &(i, s) in shifts {
            q[i] += s;
        }
        values(&q)
    };
    let f0 = values(p);
    let m = f0.len();
    let mut grads = vec![vec![0.0; n]; m];
    let mut hess = vec![vec![0.0; n * n]; m];
    for i in 0..n {
        let (p1, m1) = (at(&[(i, h)]), at(&[(i, -h)]));
        let (p2, m2) = (at(&[(i, 0.5 * h)]), at(&[(i, -0.5 * h)]));
        for k in 0..m {
            let d_h = (p1[k] - m1[k]) / (2.0 * h);
            let d_h2 = (p2[k] - m2[k]) / h;
            grads[k][i] = (4.0 * d_h2 - d_h) / 3.0;
            let s_h = (p1[k] - 2.0 * f0[k] + m1[k]) / (h * h);
            let s_h2 = (p2[k] - 2.0 * f0[k] + m2[k]) / (0.25 * h * h);
            hess[k][i * n + i] = (4.0 * s_h2 - s_h) / 3.0;
        }
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let mixed = |s: f64| {
                let pp = at(&[(i, s), (j, s)]);
                let pm = at(&[(i, s), (j, -s)]);
                let mp = at(&[(i, -s), (j, s)]);
                let mm = at(&[(i, -s), (j, -s)]);
                (0..m)
                    .map(|k| (pp[k] - pm[k] - mp[k] + mm[k]) / (4.0 * s * s))
                    .collect::<Vec<_>>()
            };
            let (d_h, d_h2) = (mixed(h), mixed(0.5 * h));
            for k in 0..m {
                let v = (4.0 * d_h2[k] - d_h[k]) / 3.0;
                hess[k][i * n + j] = v;
                hess[k][j * n + i] = v;
            }
        }
    }
    (0..m)
        .map(|k| Jet::from_parts(f0[k], grads[k].clone(), &hess[k], 2))
        .collect()
}

/// Central difference of a scalar function along one axis, Richardson-improved.
fn fd_first(p: &[f64], j: usize, value: impl Fn(&[f64]) -> f64) -> f64 {
    let h = FD_STEP;
    let shifted = |s: f64| {
        let mut q = p.to_vec();
        q[j] += s;
        value(&q)
    };
    let d_h = (shifted(h) - shifted(-h)) / (2.0 * h);
    let d_h2 = (shifted(0.5 * h) - shifted(-0.5 * h)) / h;
    (4.0 * d_h2 - d_h) / 3.0
}

/// Derivative of `f` at `p` along `direction`, of order 1 or 2.
pub fn differentiate(
    f: &ScalarField,
    p: &[f64],
    direction: usize,
    order: usize,
    mode: DiffMode,
) -> Result<f64> {
    match order {
        1 => partial_derivative(f, p, &[direction], mode),
        2 => partial_derivative(f, p, &[direction, direction], mode),
        other => Err(Error::DerivativeOrder(other)),
    }
}

/// Partial derivative for a multi-index given as a list of directions of
/// total order at most 2.
pub fn partial_derivative(
    f: &ScalarField,
    p: &[f64],
    dirs: &[usize],
    mode: DiffMode,
) -> Result<f64> {
    if dirs.len() > 2 {
        return Err(Error::DerivativeOrder(dirs.len()));
    }
    if let Some(&bad) = dirs.iter().find(|&&d| d >= p.len()) {
        return Err(Error::InvalidArgument(format!(
            "direction {bad} out of range"
        )));
    }
    let jet = f.jet(p, mode);
    if i16::from(jet.order()) < dirs.len() as i16 {
        return Err(Error::OrderUnavailable {
            requested: dirs.len(),
            available: jet.order(),
        });
    }
    Ok(match dirs {
        [] => jet.value(),
        [i] => jet.d(*i),
        [i, j] => jet.dd(*i, *j),
        _ => unreachable!(),
    })
}

struct Evaluation<'a> {
    inputs: &'a [Jet],
    identity: bool,
    memo: HashMap<usize, Vec<Jet>>,
}

impl<'a> Evaluation<'a> {
    fn new(inputs: &'a [Jet], identity: bool) -> Self {
        Evaluation {
            inputs,
            identity,
            memo: HashMap::new(),
        }
    }

    fn nvars(&self) -> usize {
        self.inputs.first().map_or(0, Jet::nvars)
    }

    fn point(&self) -> Vec<f64> {
        self.inputs.iter().map(Jet::value).collect()
    }

    fn eval(&mut self, field: &ScalarField) -> Jet {
        match &*field.0 {
            Node::Const(c) => Jet::constant(*c, self.nvars()),
            Node::Coord(i) => self.inputs[*i].clone(),
            Node::Pick(m, i) => self.eval_multi(m)[*i].clone(),
            _ => {
                let key = field.key();
                if let Some(hit) = self.memo.get(&key) {
                    return hit[0].clone();
                }
                let out = self.eval_uncached(field);
                self.memo.insert(key, vec![out.clone()]);
                out
            }
        }
    }

    fn eval_multi(&mut self, field: &ScalarField) -> Vec<Jet> {
        let key = field.key();
        if let Some(hit) = self.memo.get(&key) {
            return hit.clone();
        }
        let out = match &*field.0 {
            Node::Multi { args, f } => {
                let a: Vec<Jet> = args.iter().map(|x| self.eval(x)).collect();
                f(&a)
            }
            _ => vec![self.eval(field)],
        };
        self.memo.insert(key, out.clone());
        out
    }

    fn eval_uncached(&mut self, field: &ScalarField) -> Jet {
        match &*field.0 {
            Node::Lin { terms, offset } => {
                let mut acc = Jet::constant(*offset, self.nvars());
                for (k, f) in terms {
                    let v = self.eval(f);
                    acc.add_scaled(*k, &v);
                }
                acc
            }
            Node::Mul(a, b) => {
                let (x, y) = (self.eval(a), self.eval(b));
                x * y
            }
            Node::Map { args, f } => {
                let a: Vec<Jet> = args.iter().map(|x| self.eval(x)).collect();
                f(&a)
            }
            Node::Partial(g, j) => self.eval_partial(g, *j),
            Node::Const(_) | Node::Coord(_) | Node::Pick(..) | Node::Multi { .. } => {
                unreachable!("handled in eval")
            }
        }
    }

    fn eval_partial(&mut self, g: &ScalarField, j: usize) -> Jet {
        if self.nvars() == 0 {
            let p = self.point();
            return Jet::scalar(fd_first(&p, j, |q| g.value(q)));
        }
        if self.identity {
            return self.eval(g).partial(j);
        }
        let y0 = self.point();
        let local = Evaluation::new(&Jet::seed(&y0), true).eval(g).partial(j);
        local.compose(self.inputs)
    }
}

macro_rules! field_binop {
    ($trait:ident, $method:ident, $f:expr) => {
        impl $trait<&ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                let f: fn(&ScalarField, &ScalarField) -> ScalarField = $f;
                f(self, rhs)
            }
        }
        impl $trait<ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                (&self).$method(&rhs)
            }
        }
        impl $trait<&ScalarField> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: &ScalarField) -> ScalarField {
                (&self).$method(rhs)
            }
        }
        impl $trait<ScalarField> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: ScalarField) -> ScalarField {
                self.$method(&rhs)
            }
        }
        impl $trait<f64> for &ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                self.$method(&ScalarField::constant(rhs))
            }
        }
        impl $trait<f64> for ScalarField {
            type Output = ScalarField;
            fn $method(self, rhs: f64) -> ScalarField {
                (&self).$method(&ScalarField::constant(rhs))
            }
        }
    };
}

field_binop!(Add, add, |a, b| ScalarField::linear_combination(vec![
    (1.0, a.clone()),
    (1.0, b.clone())
]));
field_binop!(Sub, sub, |a, b| ScalarField::linear_combination(vec![
    (1.0, a.clone()),
    (-1.0, b.clone())
]));
field_binop!(Mul, mul, |a, b| match (a.as_const(), b.as_const()) {
    (Some(x), Some(y)) => ScalarField::constant(x * y),
    (Some(x), None) => b.scale(x),
    (None, Some(y)) => a.scale(y),
    (None, None) => ScalarField::node(Node::Mul(a.clone(), b.clone())),
});

impl Neg for &ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

impl Neg for ScalarField {
    type Output = ScalarField;
    fn neg(self) -> ScalarField {
        self.scale(-1.0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    // The zero term keeps Mul and Lin nodes in the graph.
    #[allow(clippy::eq_op)]
    fn quartic() -> ScalarField {
        // 1 + x0^4 - 2 x0^2 x1 + 0.5 x1^3 x0 - 3 x1^2
        let (x, y) = (ScalarField::coord(0), ScalarField::coord(1));
        ScalarField::from_fn(2, |v| {
            let (x, y) = (&v[0], &v[1]);
            x.powi(4) - x * x * y * 2.0 + y.powi(3) * x * 0.5 - y * y * 3.0 + 1.0
        }) + (&x - &x) * &y
    }

    #[test]
    fn square_has_constant_second_derivative() {
        let f = ScalarField::from_fn(1, |v| &v[0] * &v[0]);
        for x in [-2.0, 0.0, 0.7, 3.0] {
            let d2 = differentiate(&f, &[x], 0, 2, DiffMode::Exact).unwrap();
            assert!((d2 - 2.0).abs() < 1e-15);
        }
    }

    #[test]
    fn exponential_rate() {
        let rho = (ScalarField::coord(0) * 2.0).exp();
        let d = differentiate(&rho, &[0.0], 0, 1, DiffMode::Exact).unwrap();
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn order_three_is_rejected() {
        let f = ScalarField::coord(0);
        assert_eq!(
            differentiate(&f, &[0.0], 0, 3, DiffMode::Exact),
            Err(Error::DerivativeOrder(3))
        );
    }

    #[test]
    fn exact_and_finite_difference_agree() {
        let f = quartic();
        let p = [0.37, -0.81];
        let exact = f.jet(&p, DiffMode::Exact);
        let fd = f.jet(&p, DiffMode::FiniteDifference);
        for i in 0..2 {
            assert!((exact.d(i) - fd.d(i)).abs() < 1e-6);
            for j in 0..2 {
                assert!((exact.dd(i, j) - fd.dd(i, j)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn deferred_partial_consumes_order() {
        let f = ScalarField::from_fn(2, |v| (&v[0] * &v[1]).exp());
        let fx = f.partial(0);
        let p = [0.2, 0.3];
        let expected = 0.3 * (0.06f64).exp();
        assert!((fx.value(&p) - expected).abs() < 1e-8);
        let j = fx.jet(&p, DiffMode::Exact);
        assert_eq!(j.order(), 1);
        assert!((j.value() - expected).abs() < 1e-15);
        let fxy = fx.partial(1);
        assert!(partial_derivative(&fxy, &p, &[], DiffMode::Exact).is_ok());
        assert!(partial_derivative(&fxy, &p, &[0], DiffMode::Exact).is_err());
    }

    #[test]
    fn symbolic_partials_fold() {
        let x = ScalarField::coord(0);
        let y = ScalarField::coord(1);
        let f = &x * &y + &x * 3.0;
        let fx = f.partial(0);
        assert!((fx.value(&[5.0, 2.0]) - 5.0).abs() < 1e-15);
        assert!(fx.partial(0).is_zero());
        assert_eq!(f.partial(0).partial(1).as_const(), Some(1.0));
    }

    #[test]
    fn relabel_moves_coordinates() {
        let f = ScalarField::from_fn(2, |v| &v[0] - &v[1] * 2.0);
        let g = f.relabel(&[3, 1]);
        assert!((g.value(&[0.0, 1.0, 0.0, 5.0]) - 3.0).abs() < 1e-15);
        let gx = g.partial(3);
        assert!((gx.value(&[0.0, 1.0, 0.0, 5.0]) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn composition_through_partial() {
        // h(u) = d/dx0 [x0^2 x1] evaluated at x = (u, u^2): 2 u^3, derivative 6u^2
        let f = ScalarField::from_fn(2, |v| &v[0] * &v[0] * &v[1]);
        let fx = f.partial(0);
        let u = Jet::variable(0.5, 0, 1);
        let out = fx.eval_jets(&[u.clone(), &u * &u]);
        assert!((out.value() - 0.25).abs() < 1e-15);
        assert!((out.d(0) - 1.5).abs() < 1e-14);
    }
}
