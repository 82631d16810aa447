//! Exact integer checks: the K3 lattice classes and the rank of `π₂(N)`.

use serde::Serialize;

use crate::error::{Error, Result};

/// Transcendental lattice of rank two and the degree of a polarization.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct LatticeData {
    pub gram: [[i64; 2]; 2],
    pub degree: i64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct GramVerdict {
    pub gram: [[i64; 3]; 3],
    /// The common diagonal value when the Gram is a positive multiple of
    /// the identity.
    pub scale: Option<i64>,
    pub passed: bool,
}

/// Lagrange reduction of a positive definite binary form `[[a, b], [b, c]]`
/// to `|2b| ≤ a ≤ c`. Indefinite or degenerate forms are returned unchanged.
pub fn reduce_binary(gram: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let (mut a, mut b, mut c) = (gram[0][0] as i128, gram[0][1] as i128, gram[1][1] as i128);
    if a <= 0 || a * c - b * b <= 0 {
        return gram;
    }
    loop {
        if a > c {
            std::mem::swap(&mut a, &mut c);
            b = -b;
        }
        if 2 * b.abs() <= a {
            break;
        }
        let k = (2 * b + a).div_euclid(2 * a);
        c = c - 2 * k * b + k * k * a;
        b -= k * a;
    }
    if b < 0 && (2 * b.abs() == a || a == c) {
        b = -b;
    }
    [[a as i64, b as i64], [b as i64, c as i64]]
}

/// Gram matrix of a reduced transcendental basis together with the
/// polarization class, which is orthogonal to it. The verdict depends only on
/// the isometry class of the lattice.
pub fn k3_gram_check(data: &LatticeData) -> Result<GramVerdict> {
    if data.gram[0][1] != data.gram[1][0] {
        return Err(Error::NonSymmetricGram);
    }
    if data.degree <= 0 {
        return Err(Error::InvalidDegree(data.degree));
    }
    let g = reduce_binary(data.gram);
    let gram = [
        [g[0][0], g[0][1], 0],
        [g[1][0], g[1][1], 0],
        [0, 0, data.degree],
    ];
    let d = gram[0][0];
    let scalar = d > 0 && (0..3).all(|i| (0..3).all(|j| gram[i][j] == if i == j { d } else { 0 }));
    Ok(GramVerdict {
        gram,
        scale: scalar.then_some(d),
        passed: scalar,
    })
}

/// Congruence `Pᵀ G P` of a 2×2 Gram matrix.
pub fn congruent(gram: [[i64; 2]; 2], p: [[i64; 2]; 2]) -> [[i64; 2]; 2] {
    let mut out = [[0; 2]; 2];
    for (i, row) in out.iter_mut().enumerate() {
        for (j, x) in row.iter_mut().enumerate() {
            *x = (0..2)
                .flat_map(|a| (0..2).map(move |b| (a, b)))
                .map(|(a, b)| p[a][i] * gram[a][b] * p[b][j])
                .sum();
        }
    }
    out
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RankVerdict {
    pub m: usize,
    pub rank: usize,
    pub passed: bool,
}

/// Rank of `π₂(N) = ℤ^{22(m−1)}` for `N` a product of `m − 1` K3 surfaces;
/// passes when it exceeds 3, so there is no injection into `π₁(ℝ×T³) = ℤ³`.
pub fn nonsymmetry_rank_check(m: usize) -> Result<RankVerdict> {
    if m < 2 {
        return Err(Error::DimensionTooSmall(m));
    }
    let rank = 22 * (m - 1);
    Ok(RankVerdict {
        m,
        rank,
        passed: rank > 3,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degree_ten_lattice() {
        let v = k3_gram_check(&LatticeData {
            gram: [[10, 0], [0, 10]],
            degree: 10,
        })
        .unwrap();
        assert_eq!(v.gram, [[10, 0, 0], [0, 10, 0], [0, 0, 10]]);
        assert!(v.passed);
        assert_eq!(v.scale, Some(10));
    }

    #[test]
    fn non_scalar_lattices_fail() {
        assert!(
            !k3_gram_check(&LatticeData {
                gram: [[10, 0], [0, 12]],
                degree: 10
            })
            .unwrap()
            .passed
        );
        assert!(
            !k3_gram_check(&LatticeData {
                gram: [[10, 0], [0, 10]],
                degree: 8
            })
            .unwrap()
            .passed
        );
        assert!(
            !k3_gram_check(&LatticeData {
                gram: [[-2, 0], [0, -2]],
                degree: 2
            })
            .unwrap()
            .passed
        );
    }

    #[test]
    fn input_errors() {
        assert_eq!(
            k3_gram_check(&LatticeData {
                gram: [[10, 1], [0, 10]],
                degree: 10
            }),
            Err(Error::NonSymmetricGram)
        );
        assert_eq!(
            k3_gram_check(&LatticeData {
                gram: [[10, 0], [0, 10]],
                degree: 0
            }),
            Err(Error::InvalidDegree(0))
        );
    }

    #[test]
    fn ranks() {
        assert_eq!(nonsymmetry_rank_check(2).unwrap().rank, 22);
        assert_eq!(nonsymmetry_rank_check(3).unwrap().rank, 44);
        assert_eq!(nonsymmetry_rank_check(1), Err(Error::DimensionTooSmall(1)));
    }

    #[test]
    fn congruence() {
        assert_eq!(
            congruent([[10, 0], [0, 10]], [[1, 1], [0, 1]]),
            [[10, 10], [10, 20]]
        );
    }

    #[test]
    fn reduction_recovers_scalar_form() {
        assert_eq!(reduce_binary([[10, 10], [10, 20]]), [[10, 0], [0, 10]]);
        assert_eq!(reduce_binary([[2, 1], [1, 2]]), [[2, 1], [1, 2]]);
        assert_eq!(reduce_binary([[1, 0], [0, -1]]), [[1, 0], [0, -1]]);
        let v = k3_gram_check(&LatticeData {
            gram: [[10, 10], [10, 20]],
            degree: 10,
        })
        .unwrap();
        assert_eq!(v.gram, [[10, 0, 0], [0, 10, 0], [0, 0, 10]]);
    }
}
