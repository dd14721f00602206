//! System-bath noise Hamiltonians `H = H_B + H_err` and their norm parameters.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{DdError, Result};
use crate::op_core::{
    bath_traceless_split, c64, hermiticity_defect, identity, is_hermitian, max_abs, norm,
    partial_trace_system, pauli, tensor_product, zeros, Axis, Operator,
};

/// Noise Hamiltonian split into a pure-bath part and a system-traceless part.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    /// System dimension (leftmost factor).
    pub dim_s: usize,
    /// Bath dimension.
    pub dim_b: usize,
    /// `I_S ⊗ B0`.
    pub h_bath: Operator,
    /// `H_S0 + H_SB`, with vanishing partial system trace.
    pub h_err: Operator,
    /// `‖h_bath‖`.
    pub beta: f64,
    /// `‖h_err‖`.
    pub j_strength: f64,
    /// `beta + j_strength`.
    pub epsilon: f64,
    /// True if a system factor with nonzero trace was folded into `h_bath`.
    pub absorbed_trace: bool,
}

impl NoiseModel {
    /// Build from an explicit bath part and error part.
    ///
    /// Any system-identity component of `h_err` is moved into the bath part.
    pub fn from_parts(dim_s: usize, h_bath: Operator, h_err: Operator) -> Result<Self> {
        if h_bath.shape() != h_err.shape() {
            return Err(DdError::DimMismatch("bath and error parts differ in shape".into()));
        }
        let total = &h_bath + &h_err;
        Self::from_total(dim_s, &total, false)
    }

    fn from_total(dim_s: usize, total: &Operator, absorbed_trace: bool) -> Result<Self> {
        if !is_hermitian(total) {
            return Err(DdError::NumericInput(format!(
                "noise Hamiltonian is not Hermitian (defect {:.3e})",
                hermiticity_defect(total)
            )));
        }
        let split = bath_traceless_split(total, dim_s)?;
        let dim_b = total.nrows() / dim_s;
        let beta = norm(&split.bath_part);
        let j_strength = norm(&split.traceless_part);
        Ok(Self {
            dim_s,
            dim_b,
            h_bath: split.bath_part,
            h_err: split.traceless_part,
            beta,
            j_strength,
            epsilon: beta + j_strength,
            absorbed_trace,
        })
    }

    /// Joint dimension `dim_s * dim_b`.
    pub fn dim(&self) -> usize {
        self.dim_s * self.dim_b
    }

    /// Full Hamiltonian `h_bath + h_err`.
    pub fn hamiltonian(&self) -> Operator {
        &self.h_bath + &self.h_err
    }

    /// System-only part `H_S0 ⊗ I_B` of `h_err`.
    pub fn system_part(&self) -> Operator {
        let mut reduced = zeros(self.dim_s);
        let db = self.dim_b;
        for r in 0..self.dim_s {
            for c in 0..self.dim_s {
                let block = self.h_err.view((r * db, c * db), (db, db));
                reduced[(r, c)] = block.trace() / c64(db as f64, 0.0);
            }
        }
        tensor_product(&reduced, &identity(db))
    }

    /// System-bath coupling `H_SB = h_err - H_S0 ⊗ I`.
    pub fn coupling(&self) -> Operator {
        &self.h_err - self.system_part()
    }

    /// Replace the norm parameters by explicit upper bounds.
    pub fn with_bounds(mut self, beta: f64, j_strength: f64) -> Self {
        self.beta = beta;
        self.j_strength = j_strength;
        self.epsilon = beta + j_strength;
        self
    }
}

/// Heisenberg coupling of one qubit to `n_spins` bath spins in a field.
///
/// `H_B = (β/2) Σ σᶻ_i` and `H_SB = (J/4) Σ_α σ^α_S ⊗ Σ_i σ^α_i`.
pub fn build_heisenberg_spin_bath(n_spins: usize, beta: f64, j: f64) -> Result<NoiseModel> {
    if !(1..=6).contains(&n_spins) {
        return Err(DdError::OutOfRange(format!(
            "n_spins must lie in 1..=6, got {n_spins}"
        )));
    }
    if !beta.is_finite() || !j.is_finite() {
        return Err(DdError::NumericInput("non-finite coupling".into()));
    }
    let dim_b = 1usize << n_spins;
    let site = |axis: Axis, i: usize| -> Operator {
        (0..n_spins).fold(identity(1), |acc, k| {
            let f = if k == i { pauli(axis) } else { identity(2) };
            tensor_product(&acc, &f)
        })
    };
    let mut b0 = zeros(dim_b);
    for i in 0..n_spins {
        b0 += site(Axis::Z, i).scale(beta / 2.0);
    }
    let mut h_sb = zeros(2 * dim_b);
    for axis in Axis::ALL {
        let mut collective = zeros(dim_b);
        for i in 0..n_spins {
            collective += site(axis, i);
        }
        h_sb += tensor_product(&pauli(axis), &collective).scale(j / 4.0);
    }
    NoiseModel::from_parts(2, tensor_product(&identity(2), &b0), h_sb)
}

/// Build from terms `Σ S_k ⊗ B_k`; system traces are absorbed into the bath part.
pub fn build_custom(dim_s: usize, dim_b: usize, terms: &[(Operator, Operator)]) -> Result<NoiseModel> {
    let mut total = zeros(dim_s * dim_b);
    let mut absorbed = false;
    for (k, (s, b)) in terms.iter().enumerate() {
        if s.shape() != (dim_s, dim_s) || b.shape() != (dim_b, dim_b) {
            return Err(DdError::DimMismatch(format!(
                "term {k}: expected {dim_s}x{dim_s} ⊗ {dim_b}x{dim_b}"
            )));
        }
        let kron = tensor_product(s, b);
        if s.trace().norm() > 1e-12 * max_abs(s).max(1.0) && max_abs(b) > 0.0 {
            absorbed = true;
        }
        total += kron;
    }
    NoiseModel::from_total(dim_s, &total, absorbed)
}

/// Unprotected noise strength `‖H_SB‖ τ0`.
pub fn unprotected_noise_strength(model: &NoiseModel, tau0: f64) -> f64 {
    norm(&model.coupling()) * tau0
}

/// Random Hermitian matrix with independent Gaussian entries.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> Operator {
    let mut a = zeros(dim);
    for r in 0..dim {
        for c in 0..dim {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            a[(r, c)] = c64(re, im);
        }
    }
    (&a + a.adjoint()).scale(0.5)
}

/// Random model with Gaussian Hermitian entries, rescaled so that
/// `‖h_bath‖ = beta` and `‖h_err‖ = j`.
pub fn random_model<R: Rng + ?Sized>(
    rng: &mut R,
    dim_s: usize,
    dim_b: usize,
    beta: f64,
    j: f64,
) -> Result<NoiseModel> {
    let b0 = random_hermitian(rng, dim_b);
    let b0 = rescale(&b0, beta);
    let full = random_hermitian(rng, dim_s * dim_b);
    let traceless = bath_traceless_split(&full, dim_s)?.traceless_part;
    let h_err = rescale(&traceless, j);
    NoiseModel::from_parts(dim_s, tensor_product(&identity(dim_s), &b0), h_err)
}

fn rescale(a: &Operator, target: f64) -> Operator {
    let n = norm(a);
    if n == 0.0 {
        a.clone()
    } else {
        a.scale(target / n)
    }
}

/// Verify `tr_S(h_err) = 0` and `‖H‖ <= epsilon` within tolerance.
pub fn check_invariants(model: &NoiseModel) -> Result<()> {
    let tr = partial_trace_system(&model.h_err, model.dim_s)?;
    let scale = max_abs(&model.h_err).max(1.0);
    if max_abs(&tr) > 1e-12 * scale * model.dim_s as f64 {
        return Err(DdError::NumericInput("error part is not system-traceless".into()));
    }
    if norm(&model.hamiltonian()) > model.epsilon * (1.0 + 1e-12) + 1e-14 {
        return Err(DdError::NumericInput("‖H‖ exceeds epsilon".into()));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn heisenberg_examples() {
        let m = build_heisenberg_spin_bath(2, 0.3, 0.2).unwrap();
        assert_eq!(m.dim(), 8);
        assert!(is_hermitian(&m.h_bath) && is_hermitian(&m.h_err));
        let m = build_heisenberg_spin_bath(1, 1.0, 0.0).unwrap();
        assert_abs_diff_eq!(m.beta, 0.5, epsilon = 1e-14);
        assert_eq!(m.j_strength, 0.0);
        let m = build_heisenberg_spin_bath(1, 0.0, 1.0).unwrap();
        assert_abs_diff_eq!(m.j_strength, 0.75, epsilon = 1e-14);
        assert!(build_heisenberg_spin_bath(7, 1.0, 1.0).is_err());
        assert!(build_heisenberg_spin_bath(0, 1.0, 1.0).is_err());
    }

    #[test]
    fn unprotected_strength() {
        let m = build_heisenberg_spin_bath(1, 0.4, 1.0).unwrap();
        assert_abs_diff_eq!(unprotected_noise_strength(&m, 0.1), 0.075, epsilon = 1e-14);
        let m = build_heisenberg_spin_bath(1, 0.4, 0.0).unwrap();
        assert_eq!(unprotected_noise_strength(&m, 0.1), 0.0);
    }

    #[test]
    fn custom_terms() {
        let b0 = pauli(Axis::X) + pauli(Axis::Z).scale(0.3);
        let m = build_custom(2, 2, &[(identity(2), b0.clone())]).unwrap();
        assert!(max_abs(&m.h_err) < 1e-15);
        assert!(m.absorbed_trace);
        let b = pauli(Axis::Y).scale(0.7);
        let m = build_custom(2, 2, &[(pauli(Axis::Z), b)]).unwrap();
        assert!(max_abs(&m.h_bath) < 1e-15);
        assert_abs_diff_eq!(m.j_strength, 0.7, epsilon = 1e-14);
        assert!(!m.absorbed_trace);
    }

    #[test]
    fn non_hermitian_rejected() {
        let s = pauli(Axis::X) * c64(0.0, 1.0);
        assert!(build_custom(2, 1, &[(s, identity(1))]).is_err());
    }
}
