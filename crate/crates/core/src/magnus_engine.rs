//! Magnus expansion terms for piecewise-constant Hamiltonians.
//!
//! Throughout, a segment with Hamiltonian `H` and length `τ` contributes the
//! anti-Hermitian generator `A = -i H τ`, and the evolution is the ordered
//! product `Ũ = e^{A_N} ... e^{A_1}`.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::error::{DdError, Result};
use crate::op_core::{
    c64, comm, hermitian_part, identity, matrix_exp, matrix_log_principal, norm, zeros,
    BranchPolicy, Operator,
};
use crate::pulse_schedule::TogglingSegment;

/// Largest Magnus order produced by [`omega_n_series`].
pub const MAX_ORDER: usize = 8;

/// Condition number above which a fit is flagged as imprecise.
pub const CONDITION_WARNING: f64 = 1e10;

/// Magnus terms together with the exact generator.
#[derive(Debug, Clone, PartialEq)]
pub struct MagnusSeries {
    /// `Ω_1 ... Ω_{n_max}`.
    pub terms: Vec<Operator>,
    /// Principal logarithm of the exact ordered product.
    pub total_log: Operator,
    /// Total duration of the segments.
    pub t_span: f64,
    /// `π - ∫‖H‖ dt`.
    pub convergence_margin: f64,
    /// `Ω_1 + i (T - 2Γ) H_B`; equals `Ω_1` until a bath reference is set.
    pub omega1_prime: Operator,
    /// `‖total_log - Σ terms‖`.
    pub fit_residual: f64,
    /// Condition number of the interpolation matrix.
    pub condition_number: f64,
    /// True when the condition number exceeds [`CONDITION_WARNING`].
    pub ill_conditioned: bool,
}

impl MagnusSeries {
    /// Set `omega1_prime = Ω_1 + i (t_span - 2 gamma) h_bath`.
    pub fn with_bath_reference(mut self, h_bath: &Operator, gamma: f64) -> Self {
        self.omega1_prime = &self.terms[0] + h_bath * c64(0.0, self.t_span - 2.0 * gamma);
        self
    }

    /// Term `Ω_n` (1-based).
    pub fn term(&self, n: usize) -> &Operator {
        &self.terms[n - 1]
    }
}

fn check_segments(segments: &[TogglingSegment]) -> Result<usize> {
    let first = segments
        .first()
        .ok_or_else(|| DdError::OutOfRange("no segments".into()))?;
    let dim = first.hamiltonian.nrows();
    for (k, s) in segments.iter().enumerate() {
        if s.hamiltonian.shape() != (dim, dim) {
            return Err(DdError::DimMismatch(format!("segment {k} has a different dimension")));
        }
        if !(s.t_end >= s.t_start) || !s.t_start.is_finite() || !s.t_end.is_finite() {
            return Err(DdError::NumericInput(format!("segment {k} has invalid bounds")));
        }
        if k > 0 {
            let gap = (s.t_start - segments[k - 1].t_end).abs();
            if gap > 1e-12 * s.t_end.abs().max(1.0) {
                return Err(DdError::OutOfRange(format!("segment {k} does not abut its predecessor")));
            }
        }
    }
    Ok(dim)
}

/// Generators `A_k = -i H_k τ_k`.
pub fn segment_generators(segments: &[TogglingSegment]) -> Vec<Operator> {
    segments
        .iter()
        .map(|s| s.hamiltonian.map(|z| z * c64(0.0, -s.len())))
        .collect()
}

/// `∫ ‖H(t)‖ dt` over the segments.
pub fn integrated_norm(segments: &[TogglingSegment]) -> f64 {
    segments.iter().map(|s| norm(&s.hamiltonian) * s.len()).sum()
}

/// Total duration covered by the segments.
pub fn span(segments: &[TogglingSegment]) -> f64 {
    match (segments.first(), segments.last()) {
        (Some(a), Some(b)) => b.t_end - a.t_start,
        _ => 0.0,
    }
}

/// Running `(Ω_1, Ω_2, Ω_3)` after absorbing each generator in turn.
///
/// Each new segment `Y` joins the accumulated `X` through the graded
/// Baker-Campbell-Hausdorff series for `log(e^Y e^X)`.
fn graded_bch(generators: &[Operator], dim: usize) -> [Operator; 3] {
    let mut x = [zeros(dim), zeros(dim), zeros(dim)];
    for y in generators {
        let yx1 = comm(y, &x[0]);
        let third = &x[2]
            + comm(y, &x[1]).scale(0.5)
            + (comm(y, &yx1) + comm(&x[0], &comm(&x[0], y))).scale(1.0 / 12.0);
        let second = &x[1] + yx1.scale(0.5);
        x = [&x[0] + y, second, third];
    }
    x
}

/// Closed-form Magnus term `Ω_n` for `n ∈ {1, 2, 3}`.
pub fn omega_low_order(segments: &[TogglingSegment], n: usize) -> Result<Operator> {
    if !(1..=3).contains(&n) {
        return Err(DdError::OutOfRange(format!("closed-form order must be 1, 2 or 3, got {n}")));
    }
    let dim = check_segments(segments)?;
    let [o1, o2, o3] = graded_bch(&segment_generators(segments), dim);
    Ok([o1, o2, o3][n - 1].clone())
}

/// All three closed-form terms at once.
pub fn omega_first_three(segments: &[TogglingSegment]) -> Result<[Operator; 3]> {
    let dim = check_segments(segments)?;
    Ok(graded_bch(&segment_generators(segments), dim))
}

/// Segment Hamiltonian stored in diagonal form for repeated exponentiation.
struct SegmentSpectrum {
    vectors: Operator,
    values: Vec<f64>,
    length: f64,
}

impl SegmentSpectrum {
    fn new(s: &TogglingSegment) -> Self {
        let eig = SymmetricEigen::new(hermitian_part(&s.hamiltonian));
        Self {
            vectors: eig.eigenvectors,
            values: eig.eigenvalues.iter().copied().collect(),
            length: s.len(),
        }
    }

    /// `exp(-i λ H τ)`.
    fn propagator(&self, lambda: f64) -> Operator {
        let mut scaled = self.vectors.clone();
        for (k, v) in self.values.iter().enumerate() {
            let phase = c64(0.0, -lambda * v * self.length).exp();
            scaled.column_mut(k).iter_mut().for_each(|z| *z *= phase);
        }
        scaled * self.vectors.adjoint()
    }
}

fn scaled_product(spectra: &[SegmentSpectrum], dim: usize, lambda: f64) -> Operator {
    spectra
        .iter()
        .fold(identity(dim), |acc, s| s.propagator(lambda) * acc)
}

/// Exact ordered product `Ũ = e^{A_N} ... e^{A_1}`.
pub fn ordered_product(segments: &[TogglingSegment]) -> Result<Operator> {
    let dim = check_segments(segments)?;
    let spectra: Vec<_> = segments.iter().map(SegmentSpectrum::new).collect();
    Ok(scaled_product(&spectra, dim, 1.0))
}

/// Principal logarithm of the ordered product, with the convergence margin
/// `π - ∫‖H‖ dt`.
pub fn magnus_total(segments: &[TogglingSegment]) -> Result<(Operator, f64)> {
    let u = ordered_product(segments)?;
    let log = matrix_log_principal(&u, BranchPolicy::Strict)?;
    Ok((log, PI - integrated_norm(segments)))
}

/// Chebyshev nodes of `[0, 1]` used in the squared scaling variable.
fn chebyshev_unit_nodes(n: usize) -> Vec<f64> {
    (0..n)
        .map(|k| 0.5 * (1.0 + ((2 * k + 1) as f64 * PI / (2 * n) as f64).cos()))
        .collect()
}

/// Magnus terms up to `n_max` extracted from `Ω(λ) = log Ũ(λ H)`.
///
/// The odd part `(Ω(λ) - Ω(-λ)) / 2λ` and the even part
/// `(Ω(λ) + Ω(-λ)) / 2λ²` are polynomials in `λ²`; each is interpolated at
/// `n_lambda` Chebyshev nodes.
pub fn omega_n_series(
    segments: &[TogglingSegment],
    n_max: usize,
    n_lambda: usize,
) -> Result<MagnusSeries> {
    if n_max == 0 || n_max > MAX_ORDER {
        return Err(DdError::OutOfRange(format!("n_max must lie in 1..={MAX_ORDER}, got {n_max}")));
    }
    if n_lambda <= n_max {
        return Err(DdError::OutOfRange(format!(
            "n_lambda must exceed n_max ({n_lambda} <= {n_max})"
        )));
    }
    let dim = check_segments(segments)?;
    let integrated = integrated_norm(segments);
    if integrated >= PI {
        return Err(DdError::ExpansionDivergence {
            integrated_norm: integrated,
        });
    }
    let spectra: Vec<_> = segments.iter().map(SegmentSpectrum::new).collect();
    let nodes = chebyshev_unit_nodes(n_lambda);
    let logs: Vec<(Operator, Operator)> = nodes
        .par_iter()
        .map(|&mu| -> Result<(Operator, Operator)> {
            let lambda = mu.sqrt();
            let plus = matrix_log_principal(&scaled_product(&spectra, dim, lambda), BranchPolicy::Strict)?;
            let minus = matrix_log_principal(&scaled_product(&spectra, dim, -lambda), BranchPolicy::Strict)?;
            let odd = (&plus - &minus).unscale(2.0 * lambda);
            let even = (&plus + &minus).unscale(2.0 * mu);
            Ok((odd, even))
        })
        .collect::<Result<_>>()?;
    let vandermonde = DMatrix::<f64>::from_fn(n_lambda, n_lambda, |r, c| nodes[r].powi(c as i32));
    let singular = vandermonde.clone().svd(false, false).singular_values;
    let condition_number = singular.max() / singular.min();
    let lu = vandermonde.map(|v| c64(v, 0.0)).lu();
    let entries = dim * dim;
    let solve = |pick: &dyn Fn(&(Operator, Operator)) -> &Operator| -> Result<DMatrix<num_complex::Complex64>> {
        let rhs = DMatrix::from_fn(n_lambda, entries, |r, c| pick(&logs[r])[(c / dim, c % dim)]);
        lu.solve(&rhs)
            .ok_or_else(|| DdError::NumericInput("singular interpolation matrix".into()))
    };
    let odd = solve(&|p| &p.0)?;
    let even = solve(&|p| &p.1)?;
    let coefficient = |table: &DMatrix<num_complex::Complex64>, row: usize| -> Operator {
        let raw = Operator::from_fn(dim, dim, |r, c| table[(row, r * dim + c)]);
        (&raw - raw.adjoint()).scale(0.5)
    };
    let terms: Vec<Operator> = (1..=n_max)
        .map(|n| {
            if n % 2 == 1 {
                coefficient(&odd, (n - 1) / 2)
            } else {
                coefficient(&even, (n - 2) / 2)
            }
        })
        .collect();
    let total_log = matrix_log_principal(&scaled_product(&spectra, dim, 1.0), BranchPolicy::Strict)?;
    let sum = terms.iter().fold(zeros(dim), |acc, t| acc + t);
    let fit_residual = norm(&(&total_log - sum));
    Ok(MagnusSeries {
        omega1_prime: terms[0].clone(),
        terms,
        total_log,
        t_span: span(segments),
        convergence_margin: PI - integrated,
        fit_residual,
        condition_number,
        ill_conditioned: condition_number > CONDITION_WARNING,
    })
}

/// Default number of interpolation nodes for a given order.
pub fn default_nodes(n_max: usize) -> usize {
    n_max + 4
}

/// `exp(Σ Ω_n)` for the first `n` terms.
pub fn truncated_exponential(series: &MagnusSeries, n: usize) -> Result<Operator> {
    let dim = series.total_log.nrows();
    let sum = series.terms[..n].iter().fold(zeros(dim), |acc, t| acc + t);
    matrix_exp(&(&sum - sum.adjoint()).scale(0.5), 1.0)
}

/// Segments restricted to `[start, t]`.
pub fn truncate_segments(segments: &[TogglingSegment], t: f64) -> Vec<TogglingSegment> {
    segments
        .iter()
        .filter(|s| s.t_start < t)
        .map(|s| TogglingSegment {
            t_start: s.t_start,
            t_end: s.t_end.min(t),
            hamiltonian: s.hamiltonian.clone(),
        })
        .collect()
}

/// Recursion operators `S_n^{(j)}(t)` for `2 <= n <= n_max <= 4`.
///
/// Entry `[n][j]` holds `S_n^{(j)}`; unused entries are zero.
pub fn recursion_operators(
    segments: &[TogglingSegment],
    t: f64,
    n_max: usize,
) -> Result<Vec<Vec<Operator>>> {
    if !(2..=4).contains(&n_max) {
        return Err(DdError::OutOfRange("recursion operators are built for n_max in 2..=4".into()));
    }
    let dim = check_segments(segments)?;
    let start = segments[0].t_start;
    if !(t > start && t <= span(segments) + start + 1e-12) {
        return Err(DdError::OutOfRange(format!("time {t} outside the segment range")));
    }
    let head = truncate_segments(segments, t);
    let omegas = omega_first_three(&head)?;
    let current = &head.last().expect("nonempty").hamiltonian;
    let a = current.map(|z| z * c64(0.0, -1.0));
    let mut s = vec![vec![zeros(dim); n_max + 1]; n_max + 1];
    s[1][0] = a;
    for n in 2..=n_max {
        for j in 1..n {
            let mut acc = zeros(dim);
            for m in 1..=(n - j) {
                acc += comm(&omegas[m - 1], &s[n - m][j - 1]);
            }
            s[n][j] = acc;
        }
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::op_core::{max_abs, pauli, Axis};

    fn seg(t0: f64, t1: f64, h: Operator) -> TogglingSegment {
        TogglingSegment {
            t_start: t0,
            t_end: t1,
            hamiltonian: h,
        }
    }

    #[test]
    fn constant_hamiltonian() {
        let h = pauli(Axis::X).scale(0.3) + pauli(Axis::Z).scale(0.2);
        let segs = vec![seg(0.0, 0.4, h.clone()), seg(0.4, 1.0, h.clone())];
        let o2 = omega_low_order(&segs, 2).unwrap();
        assert!(max_abs(&o2) < 1e-15);
        let series = omega_n_series(&segs, 4, 8).unwrap();
        let expect = h.map(|z| z * c64(0.0, -1.0));
        assert!(max_abs(&(series.term(1) - expect)) < 1e-12);
        for n in 2..=4 {
            assert!(max_abs(series.term(n)) < 1e-11, "n = {n}");
        }
    }

    #[test]
    fn zero_hamiltonian_total() {
        let segs = vec![seg(0.0, 1.0, zeros(2))];
        let (log, margin) = magnus_total(&segs).unwrap();
        assert_eq!(max_abs(&log), 0.0);
        assert_eq!(margin, PI);
    }

    #[test]
    fn divergence_reported() {
        let segs = vec![seg(0.0, 4.0, pauli(Axis::X))];
        assert!(matches!(
            omega_n_series(&segs, 3, 7),
            Err(DdError::ExpansionDivergence { .. })
        ));
    }

    #[test]
    fn low_order_matches_fit_for_two_segments() {
        let segs = vec![
            seg(0.0, 0.5, pauli(Axis::X).scale(0.4)),
            seg(0.5, 1.2, pauli(Axis::Y).scale(0.3)),
        ];
        let series = omega_n_series(&segs, 3, 7).unwrap();
        for n in 1..=3 {
            let closed = omega_low_order(&segs, n).unwrap();
            let scale = max_abs(&closed).max(1e-300);
            assert!(max_abs(&(series.term(n) - &closed)) <= 1e-8 * scale, "n = {n}");
        }
    }
}
