//! Dense complex linear algebra on small joint system-bath spaces.
//!
//! Operators are plain `nalgebra` matrices. The system factor is always the
//! leftmost tensor factor, so an index on the joint space is
//! `s * dim_bath + b`.

use nalgebra::{DMatrix, SymmetricEigen, SVD};
use num_complex::Complex64;

use crate::error::{DdError, Result};

/// Dense complex square matrix on the joint system-bath space.
pub type Operator = DMatrix<Complex64>;

/// Absolute tolerance, scaled by the largest entry magnitude of the operands.
pub const TOL: f64 = 1e-10;

/// Distance from -1 below which the principal logarithm is refused.
pub const BRANCH_CUT_GUARD: f64 = 1e-6;

/// Shorthand for a complex number.
#[inline]
pub fn c64(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Identity operator of dimension `dim`.
pub fn identity(dim: usize) -> Operator {
    Operator::identity(dim, dim)
}

/// Zero operator of dimension `dim`.
pub fn zeros(dim: usize) -> Operator {
    Operator::zeros(dim, dim)
}

/// Single-qubit Pauli axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    /// Pauli X.
    X,
    /// Pauli Y.
    Y,
    /// Pauli Z.
    Z,
}

impl Axis {
    /// All three axes in x, y, z order.
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    /// Position of the axis in x, y, z order.
    pub fn index(self) -> usize {
        match self {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => 2,
        }
    }
}

/// Pauli matrix for `axis`.
pub fn pauli(axis: Axis) -> Operator {
    let o = c64(0.0, 0.0);
    let l = c64(1.0, 0.0);
    let i = c64(0.0, 1.0);
    match axis {
        Axis::X => Operator::from_row_slice(2, 2, &[o, l, l, o]),
        Axis::Y => Operator::from_row_slice(2, 2, &[o, -i, i, o]),
        Axis::Z => Operator::from_row_slice(2, 2, &[l, o, o, -l]),
    }
}

/// Largest entry magnitude.
pub fn max_abs(a: &Operator) -> f64 {
    a.iter().fold(0.0_f64, |m, z| m.max(z.norm()))
}

/// Tolerance `TOL` scaled by the largest entry of `a` (at least 1).
pub fn scaled_tol(a: &Operator) -> f64 {
    TOL * max_abs(a).max(1.0)
}

fn check_square(a: &Operator, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(DdError::DimMismatch(format!(
            "{what} must be square and nonempty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

fn check_finite(a: &Operator) -> Result<()> {
    if a.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
        Ok(())
    } else {
        Err(DdError::NumericInput("operator has non-finite entries".into()))
    }
}

/// Largest entry of `A - A†`.
pub fn hermiticity_defect(a: &Operator) -> f64 {
    max_abs(&(a - a.adjoint()))
}

/// True when `max|A - A†| <= 1e-12 * maxnorm(A)`.
pub fn is_hermitian(a: &Operator) -> bool {
    a.nrows() == a.ncols() && hermiticity_defect(a) <= 1e-12 * max_abs(a).max(f64::MIN_POSITIVE)
}

/// True when `max|A + A†| <= 1e-12 * maxnorm(A)`.
pub fn is_anti_hermitian(a: &Operator) -> bool {
    a.nrows() == a.ncols()
        && max_abs(&(a + a.adjoint())) <= 1e-12 * max_abs(a).max(f64::MIN_POSITIVE)
}

/// `(A + A†)/2`.
pub fn hermitian_part(a: &Operator) -> Operator {
    (a + a.adjoint()).scale(0.5)
}

/// Operator (largest singular value) norm.
pub fn spectral_norm(a: &Operator) -> Result<f64> {
    check_square(a, "operator")?;
    check_finite(a)?;
    if max_abs(a) == 0.0 {
        return Ok(0.0);
    }
    if is_hermitian(a) {
        let eig = SymmetricEigen::new(hermitian_part(a));
        return Ok(eig.eigenvalues.iter().fold(0.0_f64, |m, v| m.max(v.abs())));
    }
    let svd = SVD::new(a.clone(), false, false);
    Ok(svd.singular_values.iter().fold(0.0_f64, |m, v| m.max(*v)))
}

/// Spectral norm for operators already known to be finite and square.
pub(crate) fn norm(a: &Operator) -> f64 {
    spectral_norm(a).expect("finite square operator")
}

/// `exp(t A)` for Hermitian or anti-Hermitian `A`, by eigendecomposition.
///
/// For the common evolution case pass `A = -iH`, or use [`evolve`].
pub fn matrix_exp(a: &Operator, t: f64) -> Result<Operator> {
    check_square(a, "exponent")?;
    check_finite(a)?;
    if !t.is_finite() {
        return Err(DdError::NumericInput("non-finite time".into()));
    }
    let n = a.nrows();
    if max_abs(a) == 0.0 || t == 0.0 {
        return Ok(identity(n));
    }
    let i = c64(0.0, 1.0);
    if is_anti_hermitian(a) {
        let h = hermitian_part(&(a * i));
        return Ok(spectral_apply(&h, |lam| (i * (-lam * t)).exp()));
    }
    if is_hermitian(a) {
        return Ok(spectral_apply(&hermitian_part(a), |lam| c64((lam * t).exp(), 0.0)));
    }
    Err(DdError::NumericInput(
        "exponent must be Hermitian or anti-Hermitian".into(),
    ))
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn evolve(h: &Operator, t: f64) -> Result<Operator> {
    check_square(h, "Hamiltonian")?;
    check_finite(h)?;
    if !is_hermitian(h) {
        return Err(DdError::NumericInput("Hamiltonian is not Hermitian".into()));
    }
    if max_abs(h) == 0.0 || t == 0.0 {
        return Ok(identity(h.nrows()));
    }
    let i = c64(0.0, 1.0);
    Ok(spectral_apply(&hermitian_part(h), |lam| (i * (-lam * t)).exp()))
}

/// `V f(Λ) V†` for a Hermitian matrix with eigendecomposition `V Λ V†`.
fn spectral_apply(h: &Operator, f: impl Fn(f64) -> Complex64) -> Operator {
    let eig = SymmetricEigen::new(h.clone());
    let v = &eig.eigenvectors;
    let mut scaled = v.clone();
    for (k, lam) in eig.eigenvalues.iter().enumerate() {
        let w = f(*lam);
        scaled.column_mut(k).iter_mut().for_each(|z| *z *= w);
    }
    scaled * v.adjoint()
}

/// How the principal logarithm treats eigenvalues near -1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BranchPolicy {
    /// Refuse eigenvalues within [`BRANCH_CUT_GUARD`] of -1.
    #[default]
    Strict,
    /// Accept them; phases still land in (-pi, pi].
    AllowRisk,
}

/// Principal logarithm of a unitary; eigenphases lie in (-pi, pi].
pub fn matrix_log_principal(u: &Operator, policy: BranchPolicy) -> Result<Operator> {
    check_square(u, "unitary")?;
    check_finite(u)?;
    let n = u.nrows();
    let defect = max_abs(&(u.adjoint() * u - identity(n)));
    if defect > 1e-8 {
        return Err(DdError::NumericInput(format!(
            "operator is not unitary (defect {defect:.3e})"
        )));
    }
    let (q, t) = nalgebra::Schur::new(u.clone()).unpack();
    let mut diag = Operator::zeros(n, n);
    for k in 0..n {
        let z = t[(k, k)];
        let dist = (z + c64(1.0, 0.0)).norm();
        if dist < BRANCH_CUT_GUARD && policy == BranchPolicy::Strict {
            return Err(DdError::BranchAmbiguity { distance: dist });
        }
        let mut phase = z.arg();
        if phase <= -std::f64::consts::PI {
            phase += 2.0 * std::f64::consts::PI;
        }
        diag[(k, k)] = c64(z.norm().ln(), phase);
    }
    let log = &q * diag * q.adjoint();
    // Restore exact anti-Hermiticity lost to rounding.
    Ok((&log - log.adjoint()).scale(0.5))
}

fn check_same_dim(a: &Operator, b: &Operator) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(DdError::DimMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// `[A, B] = AB - BA`.
pub fn commutator(a: &Operator, b: &Operator) -> Result<Operator> {
    check_same_dim(a, b)?;
    Ok(comm(a, b))
}

/// Commutator without dimension checks, for internal hot loops.
#[inline]
pub(crate) fn comm(a: &Operator, b: &Operator) -> Operator {
    a * b - b * a
}

/// Kronecker product with `a` as the leftmost (system) factor.
pub fn tensor_product(a: &Operator, b: &Operator) -> Operator {
    a.kronecker(b)
}

/// Partial trace over the leftmost factor of dimension `dim_s`.
pub fn partial_trace_system(o: &Operator, dim_s: usize) -> Result<Operator> {
    check_square(o, "operator")?;
    if dim_s == 0 || !o.nrows().is_multiple_of(dim_s) {
        return Err(DdError::DimMismatch(format!(
            "dimension {} is not divisible by system dimension {dim_s}",
            o.nrows()
        )));
    }
    let dim_b = o.nrows() / dim_s;
    let mut out = Operator::zeros(dim_b, dim_b);
    for s in 0..dim_s {
        out += o.view((s * dim_b, s * dim_b), (dim_b, dim_b));
    }
    Ok(out)
}

/// Decomposition `O = I ⊗ B0 + Σ S_α ⊗ B_α` with traceless `S_α`.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitOperator {
    /// System-identity component `I ⊗ B0`.
    pub bath_part: Operator,
    /// Component whose partial system trace vanishes.
    pub traceless_part: Operator,
}

/// Norms entering the splitting inequalities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitNorms {
    /// Norm of the input.
    pub input: f64,
    /// Norm of the bath part.
    pub bath: f64,
    /// Norm of the traceless part.
    pub traceless: f64,
}

impl SplitNorms {
    /// `‖bath‖ <= ‖O‖`, `‖traceless‖ <= 2‖O‖`, and `‖traceless‖ <= ‖O‖` when the system is a qubit.
    pub fn satisfies_bounds(&self, dim_s: usize, tol: f64) -> bool {
        let cap = if dim_s == 2 { 1.0 } else { 2.0 };
        self.bath <= self.input + tol && self.traceless <= cap * self.input + tol
    }
}

impl SplitOperator {
    /// Spectral norms of input, bath part and traceless part.
    pub fn norms(&self) -> SplitNorms {
        let input = &self.bath_part + &self.traceless_part;
        SplitNorms {
            input: norm(&input),
            bath: norm(&self.bath_part),
            traceless: norm(&self.traceless_part),
        }
    }
}

/// Split `o` into its system-identity and system-traceless components.
pub fn bath_traceless_split(o: &Operator, dim_s: usize) -> Result<SplitOperator> {
    let reduced = partial_trace_system(o, dim_s)?;
    let bath_part = tensor_product(&identity(dim_s), &reduced).unscale(dim_s as f64);
    let traceless_part = o - &bath_part;
    Ok(SplitOperator {
        bath_part,
        traceless_part,
    })
}

/// Serde adapter writing an operator as rows of `[re, im]` pairs.
pub mod serde_rows {
    use super::{c64, Operator};
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    /// Serialize as `[[[re, im], ...], ...]`.
    pub fn serialize<S: Serializer>(op: &Operator, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<[f64; 2]>> = (0..op.nrows())
            .map(|r| (0..op.ncols()).map(|c| [op[(r, c)].re, op[(r, c)].im]).collect())
            .collect();
        rows.serialize(s)
    }

    /// Deserialize from `[[[re, im], ...], ...]`; rows must be square.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Operator, D::Error> {
        let rows: Vec<Vec<[f64; 2]>> = Vec::deserialize(d)?;
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(serde::de::Error::custom("operator must be a nonempty square matrix"));
        }
        let mut op = Operator::zeros(n, n);
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                op[(r, c)] = c64(v[0], v[1]);
            }
        }
        Ok(op)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn pauli_norms() {
        assert_abs_diff_eq!(spectral_norm(&pauli(Axis::X)).unwrap(), 1.0, epsilon = 1e-14);
        let s = pauli(Axis::X) + pauli(Axis::Z);
        assert_abs_diff_eq!(spectral_norm(&s).unwrap(), 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn non_finite_rejected() {
        let mut a = identity(2);
        a[(0, 1)] = c64(f64::NAN, 0.0);
        assert!(matches!(spectral_norm(&a), Err(DdError::NumericInput(_))));
    }

    #[test]
    fn exp_of_pauli_z() {
        let u = evolve(&pauli(Axis::Z), PI / 2.0).unwrap();
        assert_abs_diff_eq!(u[(0, 0)].re, 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[(0, 0)].im, -1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(u[(1, 1)].im, 1.0, epsilon = 1e-14);
        assert_eq!(matrix_exp(&zeros(3), 1.0).unwrap(), identity(3));
    }

    #[test]
    fn log_identity_and_small_rotation() {
        let l = matrix_log_principal(&identity(4), BranchPolicy::Strict).unwrap();
        assert!(max_abs(&l) < 1e-14);
        let u = evolve(&pauli(Axis::X), 0.3).unwrap();
        let l = matrix_log_principal(&u, BranchPolicy::Strict).unwrap();
        let expect = pauli(Axis::X) * c64(0.0, -0.3);
        assert!(max_abs(&(l - expect)) < 1e-12);
    }

    #[test]
    fn log_branch_cut_guard() {
        let u = identity(2) * c64(-1.0, 0.0);
        assert!(matches!(
            matrix_log_principal(&u, BranchPolicy::Strict),
            Err(DdError::BranchAmbiguity { .. })
        ));
        let l = matrix_log_principal(&u, BranchPolicy::AllowRisk).unwrap();
        assert_abs_diff_eq!(l[(0, 0)].im, PI, epsilon = 1e-12);
    }

    #[test]
    fn commutator_of_paulis() {
        let c = commutator(&pauli(Axis::X), &pauli(Axis::Y)).unwrap();
        let expect = pauli(Axis::Z) * c64(0.0, 2.0);
        assert!(max_abs(&(c - expect)) < 1e-15);
        assert!(commutator(&identity(2), &identity(3)).is_err());
    }

    #[test]
    fn split_examples() {
        let b0 = pauli(Axis::Z) + pauli(Axis::X).scale(0.5);
        let o = tensor_product(&identity(2), &b0);
        let sp = bath_traceless_split(&o, 2).unwrap();
        assert!(max_abs(&sp.traceless_part) < 1e-15);
        let o = tensor_product(&pauli(Axis::X), &b0);
        let sp = bath_traceless_split(&o, 2).unwrap();
        assert!(max_abs(&sp.bath_part) < 1e-15);
        assert!(bath_traceless_split(&identity(6), 4).is_err());
    }
}
