//! Small pointwise linear algebra shared by the checks.

use nalgebra::DMatrix;

/// Endomorphism `J` with `ω(X, Y) = g(JX, Y)`, i.e. `J = g⁻¹ ωᵀ`.
pub fn complex_structure(g: &DMatrix<f64>, omega: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    g.clone().lu().solve(&omega.transpose())
}

/// `max |J² + Id|`.
pub fn square_residual(j: &DMatrix<f64>) -> f64 {
    let n = j.nrows();
    (j * j + DMatrix::identity(n, n)).amax()
}

/// `max |Jᵀ g J − g|`.
pub fn compatibility_residual(g: &DMatrix<f64>, j: &DMatrix<f64>) -> f64 {
    (j.transpose() * g * j - g).amax()
}

/// Best sign `s` in `J₁J₂ = s·J₃` and the residual for that sign.
pub fn quaternion_sign(j: &[DMatrix<f64>; 3]) -> (f64, f64) {
    let prod = &j[0] * &j[1];
    let plus = (&prod - &j[2]).amax();
    let minus = (&prod + &j[2]).amax();
    if plus <= minus {
        (1.0, plus)
    } else {
        (-1.0, minus)
    }
}

/// Residual of `J₁J₂ = s·J₃` for a fixed sign.
pub fn quaternion_residual(j: &[DMatrix<f64>; 3], sign: f64) -> f64 {
    (&j[0] * &j[1] - &j[2] * sign).amax()
}
