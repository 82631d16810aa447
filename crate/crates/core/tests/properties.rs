use std::sync::Arc;

use proptest::prelude::*;
use qkverify::connection::flat_connection;
use qkverify::diffgeo::{
    increasing_sets, partial_derivative, Chart, DiffMode, DifferentialForm, FormValue, Interval,
    Sampler, ScalarField,
};
use qkverify::hk_bases::make_flat_torus_base;
use qkverify::obstructions::{congruent, k3_gram_check, nonsymmetry_rank_check, LatticeData};
use qkverify::qk::{assemble_qk_model, ideal_fit};

const DIM: usize = 4;

fn chart() -> Arc<Chart> {
    Arc::new(
        Chart::new(
            vec!["a", "b", "c", "d"],
            vec![Interval::new(-1.0, 1.0); DIM],
        )
        .unwrap(),
    )
}

/// `c₀ + Σ cᵢxᵢ + c₅·x₀x₁ + c₆·sin(x₂ + x₃x₀) + c₇·exp(x₁x₃)`
fn field(c: &[f64]) -> ScalarField {
    let x = ScalarField::coord;
    let mut f = ScalarField::constant(c[0]);
    for i in 0..DIM {
        f = f + x(i) * c[1 + i];
    }
    f = f + x(0) * x(1) * c[5];
    f = f + ScalarField::map(vec![x(2) + x(3) * x(0)], |v| v[0].sin()) * c[6];
    f + (x(1) * x(3)).exp() * c[7]
}

fn form(chart: &Arc<Chart>, degree: usize, coeffs: &[f64]) -> DifferentialForm {
    let terms = increasing_sets(DIM, degree)
        .into_iter()
        .enumerate()
        .map(|(k, idx)| (idx, field(&coeffs[(k * 8) % (coeffs.len() - 7)..][..8])));
    DifferentialForm::from_terms(chart, degree, terms)
}

fn close(a: &FormValue, b: &FormValue, tol: f64) -> bool {
    a.sub(b).max_abs() <= tol * (1.0 + a.max_abs().max(b.max_abs()))
}

fn coeffs() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, 48)
}

fn point() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-0.9f64..0.9, DIM)
}

fn value(dim: usize, degree: usize) -> impl Strategy<Value = FormValue> {
    let sets = increasing_sets(dim, degree);
    prop::collection::vec(-1.0f64..1.0, sets.len()).prop_map(move |v| FormValue {
        dim,
        degree,
        terms: sets.iter().cloned().zip(v).collect(),
    })
}

fn unimodular() -> impl Strategy<Value = [[i64; 2]; 2]> {
    prop::collection::vec((0usize..4, -3i64..=3), 1..6).prop_map(|steps| {
        let mut p = [[1, 0], [0, 1]];
        for (kind, k) in steps {
            let e = match kind {
                0 => [[1, k], [0, 1]],
                1 => [[1, 0], [k, 1]],
                2 => [[0, 1], [1, 0]],
                _ => [[-1, 0], [0, 1]],
            };
            let mut q = [[0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    q[i][j] = p[i][0] * e[0][j] + p[i][1] * e[1][j];
                }
            }
            p = q;
        }
        p
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wedge_is_graded_commutative(a in value(5, 1), b in value(5, 2), c in value(5, 1)) {
        prop_assert!(close(&a.wedge(&b), &b.wedge(&a), 1e-14));
        prop_assert!(close(&a.wedge(&c), &c.wedge(&a).scale(-1.0), 1e-14));
        prop_assert!(a.wedge(&a).max_abs() < 1e-15);
    }

    #[test]
    fn wedge_is_associative(a in value(5, 1), b in value(5, 2), c in value(5, 1)) {
        prop_assert!(close(&a.wedge(&b).wedge(&c), &a.wedge(&b.wedge(&c)), 1e-13));
    }

    #[test]
    fn d_squared_vanishes(c in coeffs(), p in point(), degree in 0usize..3) {
        let ch = chart();
        let w = form(&ch, degree, &c);
        let dd = w.exterior_derivative().exterior_derivative();
        prop_assert!(dd.values_at(&p).max_abs() < 1e-8);
    }

    #[test]
    fn leibniz_rule(c in coeffs(), e in coeffs(), p in point()) {
        let ch = chart();
        let a = form(&ch, 1, &c);
        let b = form(&ch, 2, &e);
        let lhs = a.wedge(&b).unwrap().exterior_derivative();
        let rhs = a.exterior_derivative().wedge(&b).unwrap().sub(&a.wedge(&b.exterior_derivative()).unwrap()).unwrap();
        prop_assert!(close(&lhs.values_at(&p), &rhs.values_at(&p), 1e-12));
    }

    #[test]
    fn mixed_partials_commute_and_modes_agree(c in coeffs(), p in point(), i in 0..DIM, j in 0..DIM) {
        let f = field(&c);
        let ij = partial_derivative(&f, &p, &[i, j], DiffMode::Exact).unwrap();
        let ji = partial_derivative(&f, &p, &[j, i], DiffMode::Exact).unwrap();
        prop_assert!((ij - ji).abs() < 1e-12);
        let fd = partial_derivative(&f, &p, &[i, j], DiffMode::FiniteDifference).unwrap();
        prop_assert!((ij - fd).abs() < 1e-5, "exact {} fd {}", ij, fd);
    }

    #[test]
    fn rank_is_monotone(m in 2usize..200) {
        let a = nonsymmetry_rank_check(m).unwrap();
        let b = nonsymmetry_rank_check(m + 1).unwrap();
        prop_assert!(b.rank > a.rank);
        prop_assert!(a.passed && b.passed);
    }

    #[test]
    fn gram_verdict_is_congruence_invariant(p in unimodular(), a in 1i64..20, b in 1i64..20, degree in 1i64..20) {
        let gram = [[a, 0], [0, b]];
        let moved = congruent(gram, p);
        let x = k3_gram_check(&LatticeData { gram, degree }).unwrap();
        let y = k3_gram_check(&LatticeData { gram: moved, degree }).unwrap();
        prop_assert_eq!(x, y);
    }

    #[test]
    fn sampler_is_seed_deterministic(seed in any::<u64>(), count in 1usize..20) {
        let ch = chart();
        let s = Sampler::new(seed, count);
        let pts = s.points(&ch);
        prop_assert_eq!(&pts, &s.points(&ch));
        prop_assert!(pts.iter().all(|q| ch.contains(q)));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ideal_fit_does_not_depend_on_point_order(seed in any::<u64>()) {
        let base = make_flat_torus_base();
        let model = assemble_qk_model(&base, &flat_connection(&base).unwrap()).unwrap();
        let points = Sampler::new(seed, 4).points(model.chart());
        let fit = |p: &Vec<f64>| {
            let w: [FormValue; 3] = model.omega().clone().map(|f| f.values_at(p));
            let dw: [FormValue; 3] = model.omega().clone().map(|f| f.exterior_derivative().values_at(p));
            ideal_fit(&dw, &w, p).unwrap()
        };
        let forward: Vec<f64> = points.iter().map(fit).collect();
        let mut backward: Vec<f64> = points.iter().rev().map(fit).collect();
        backward.reverse();
        prop_assert_eq!(&forward, &backward);
        prop_assert!(forward.iter().all(|r| *r < 1e-8));
    }
}
