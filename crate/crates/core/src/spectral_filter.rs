//! Switching functions, filter transforms and correlator-based noise strengths.
//!
//! For ideal Pauli pulses on a qubit, `U_c(t)† σ_α U_c(t) = F_α(t) σ_α` with
//! `F_α(t) = ±1`. The filter `F̃_α(ω) = ∫_0^T e^{-iωt} F_α(t) dt` weights the
//! bath spectrum in the lowest-order Dyson estimate of the noise strength.

use nalgebra::{Matrix3, SymmetricEigen};
use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{DdError, Result};
use crate::op_core::{c64, max_abs, norm, pauli, zeros, Axis, Operator};
use crate::pulse_schedule::PulseSchedule;
use crate::quadrature::integrate;

/// Largest concatenation level for filter recursions.
pub const MAX_FILTER_LEVEL: u32 = 8;

/// Piecewise-constant `±1` functions, one per Pauli axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SwitchingSet {
    /// Interval boundaries `t_0 = 0 < t_1 < ... < t_n = T`.
    pub breakpoints: Vec<f64>,
    /// Signs per axis, one per interval.
    pub signs: [Vec<i8>; 3],
}

impl SwitchingSet {
    /// Build from boundaries and per-axis signs.
    pub fn new(breakpoints: Vec<f64>, signs: [Vec<i8>; 3]) -> Result<Self> {
        let n = breakpoints.len().saturating_sub(1);
        if n == 0 || signs.iter().any(|s| s.len() != n) {
            return Err(DdError::DimMismatch("one sign per interval is required".into()));
        }
        if breakpoints.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(DdError::OutOfRange("breakpoints must increase strictly".into()));
        }
        if signs.iter().flatten().any(|&s| s != 1 && s != -1) {
            return Err(DdError::OutOfRange("signs must be +1 or -1".into()));
        }
        Ok(Self { breakpoints, signs })
    }

    /// Equally spaced intervals of width `tau0` with the given sign strings.
    pub fn from_patterns(tau0: f64, patterns: [&[i8]; 3]) -> Result<Self> {
        let n = patterns[0].len();
        let breakpoints = (0..=n).map(|k| k as f64 * tau0).collect();
        Self::new(breakpoints, patterns.map(|p| p.to_vec()))
    }

    /// Total duration.
    pub fn duration(&self) -> f64 {
        *self.breakpoints.last().expect("nonempty")
    }

    /// Signs of one axis.
    pub fn axis(&self, axis: Axis) -> &[i8] {
        &self.signs[axis.index()]
    }
}

/// Switching functions of an ideal-pulse qubit schedule.
pub fn switching_functions(seq: &PulseSchedule) -> Result<SwitchingSet> {
    if seq.dim_s != 2 {
        return Err(DdError::DimMismatch("switching functions need a single qubit".into()));
    }
    if seq.pulses.iter().any(|p| p.width > 0.0) {
        return Err(DdError::OutOfRange("switching functions need zero-width pulses".into()));
    }
    let mut breakpoints = vec![0.0];
    let mut signs: [Vec<i8>; 3] = Default::default();
    let mut frame = crate::op_core::identity(2);
    let mut push_interval = |end: f64, frame: &Operator, index: usize| -> Result<()> {
        if end <= *breakpoints.last().expect("nonempty") {
            return Ok(());
        }
        for axis in Axis::ALL {
            let s = pauli(axis);
            let conj = frame.adjoint() * &s * frame;
            let sign = if max_abs(&(&conj - &s)) < 1e-9 {
                1
            } else if max_abs(&(&conj + &s)) < 1e-9 {
                -1
            } else {
                return Err(DdError::NotRepresentable { index });
            };
            signs[axis.index()].push(sign);
        }
        breakpoints.push(end);
        Ok(())
    };
    for (index, p) in seq.pulses.iter().enumerate() {
        push_interval(p.start, &frame, index)?;
        frame = p.unitary() * frame;
    }
    push_interval(seq.t_total, &frame, seq.pulses.len())?;
    SwitchingSet::new(breakpoints, signs)
}

/// `∫_a^b t^m dt`.
fn power_integral(a: f64, b: f64, m: i32) -> f64 {
    (b.powi(m + 1) - a.powi(m + 1)) / (m + 1) as f64
}

/// Moments `∫ t^m F_α dt` for `m = 0..n`.
pub fn moments(sw: &SwitchingSet, axis: Axis, n: usize) -> Vec<f64> {
    (0..n)
        .map(|m| {
            sw.breakpoints
                .windows(2)
                .zip(sw.axis(axis))
                .map(|(w, &s)| s as f64 * power_integral(w[0], w[1], m as i32))
                .sum()
        })
        .collect()
}

/// Moments and decoupling order of one axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentReport {
    /// `∫ t^m F dt` for `m < n`.
    pub moments: Vec<f64>,
    /// Number of leading moments that vanish.
    pub order: usize,
}

/// Moments up to `n - 1` and the resulting decoupling order, per axis.
pub fn decoupling_order_moments(sw: &SwitchingSet, n: usize) -> [MomentReport; 3] {
    let t = sw.duration();
    Axis::ALL.map(|axis| {
        let m = moments(sw, axis, n);
        let order = m
            .iter()
            .enumerate()
            .take_while(|(k, v)| v.abs() <= 1e-10 * t.powi(*k as i32 + 1))
            .count();
        MomentReport { moments: m, order }
    })
}

/// `F̃_α(ω)` for each axis.
///
/// For `|ω| T <= 1` the transform is summed from the moment series, which
/// keeps the small-`ω` cancellations exact; otherwise the closed form is used.
pub fn filter_fourier(sw: &SwitchingSet, omega: f64) -> [Complex64; 3] {
    let t = sw.duration();
    Axis::ALL.map(|axis| {
        if omega.abs() * t <= 1.0 {
            let terms = 40;
            let m = moments(sw, axis, terms);
            let z = c64(0.0, -omega);
            let mut power = c64(1.0, 0.0);
            let mut sum = c64(0.0, 0.0);
            for (k, mk) in m.iter().enumerate() {
                if k > 0 {
                    power *= z / k as f64;
                }
                sum += power * mk;
            }
            sum
        } else {
            let z = c64(0.0, -omega);
            sw.breakpoints
                .windows(2)
                .zip(sw.axis(axis))
                .map(|(w, &s)| ((z * w[1]).exp() - (z * w[0]).exp()) * s as f64)
                .sum::<Complex64>()
                / z
        }
    })
}

/// One spectral line with coupling matrix `J²_{αβ}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralLine {
    /// Line frequency.
    pub omega: f64,
    /// Symmetric positive semidefinite 3×3 coupling matrix.
    pub j2: [[f64; 3]; 3],
}

/// Bath spectrum `K_{αβ}(ω) = 2π Σ_i J²_{αβ,i} δ(ω - ω_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralModel {
    /// Spectral lines.
    pub lines: Vec<SpectralLine>,
}

impl SpectralModel {
    /// Validate symmetry and positivity of every line.
    pub fn validate(&self) -> Result<()> {
        for (i, line) in self.lines.iter().enumerate() {
            let m = Matrix3::from_fn(|r, c| line.j2[r][c]);
            if !line.omega.is_finite() || m.iter().any(|v| !v.is_finite()) {
                return Err(DdError::NumericInput(format!("line {i} is not finite")));
            }
            let scale = m.abs().max().max(1e-300);
            if (m - m.transpose()).abs().max() > 1e-12 * scale {
                return Err(DdError::NumericInput(format!("line {i} coupling is not symmetric")));
            }
            if SymmetricEigen::new(m).eigenvalues.min() < -1e-12 * scale {
                return Err(DdError::NumericInput(format!("line {i} coupling is not positive semidefinite")));
            }
        }
        Ok(())
    }

    /// Single line coupling only to `σ_axis`.
    pub fn single_axis_line(omega: f64, axis: Axis, j2: f64) -> Self {
        let mut m = [[0.0; 3]; 3];
        m[axis.index()][axis.index()] = j2;
        Self {
            lines: vec![SpectralLine { omega, j2: m }],
        }
    }

    /// Stationary correlator `C_{αβ}(u) = Σ_i J²_{αβ,i} cos(ω_i u)`.
    pub fn correlator(&self, u: f64) -> [[f64; 3]; 3] {
        let mut c = [[0.0; 3]; 3];
        for line in &self.lines {
            let w = (line.omega * u).cos();
            for (r, row) in c.iter_mut().enumerate() {
                for (col, v) in row.iter_mut().enumerate() {
                    *v += line.j2[r][col] * w;
                }
            }
        }
        c
    }
}

/// Lowest-order correlator estimate of `η²` and the Dyson remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelatorEstimate {
    /// Largest eigenvalue of `Σ_i J²_{αβ,i} F̃_α(ω_i) F̃_β(ω_i)*`.
    pub eta_sq_leading: f64,
    /// `2(e^{JT} - 1 - JT - (JT)²/2)`.
    pub dyson_remainder: f64,
}

/// `2(e^{x} - 1 - x - x²/2)` evaluated stably for small `x`.
pub fn dyson_remainder(x: f64) -> f64 {
    if x.abs() < 0.1 {
        let mut term = x.powi(3) / 6.0;
        let mut sum = 0.0;
        for k in 3..30 {
            sum += term;
            term *= x / (k + 1) as f64;
        }
        2.0 * sum
    } else {
        2.0 * (x.exp_m1() - x - 0.5 * x * x)
    }
}

/// Correlator-based noise strength for a qubit with Pauli couplings.
pub fn eta_correlator(sw: &SwitchingSet, spec: &SpectralModel, j: f64, t: f64) -> Result<CorrelatorEstimate> {
    spec.validate()?;
    let mut form = nalgebra::Matrix3::<Complex64>::zeros();
    for line in &spec.lines {
        let f = filter_fourier(sw, line.omega);
        for a in 0..3 {
            for b in 0..3 {
                form[(a, b)] += f[a] * f[b].conj() * line.j2[a][b];
            }
        }
    }
    let form = (form + form.adjoint()) * c64(0.5, 0.0);
    let leading = SymmetricEigen::new(form).eigenvalues.max().max(0.0);
    Ok(CorrelatorEstimate {
        eta_sq_leading: leading,
        dyson_remainder: dyson_remainder(j * t),
    })
}

/// Higher-order Gaussian bound `e^K - 1 - K`.
pub fn gaussian_remainder(k: f64) -> Result<f64> {
    if !(k >= 0.0) {
        return Err(DdError::OutOfRange("K must be nonnegative".into()));
    }
    Ok(if k < 1e-3 {
        k * k / 2.0 * (1.0 + k / 3.0 + k * k / 12.0)
    } else {
        k.exp_m1() - k
    })
}

/// `K = ½ ∫∫_0^T Σ_{αβ} |C_{αβ}(t - s)| dt ds = ∫_0^T (T - u) Σ |C_{αβ}(u)| du`.
pub fn gaussian_k(spec: &SpectralModel, t: f64) -> Result<f64> {
    spec.validate()?;
    if !(t >= 0.0) {
        return Err(DdError::OutOfRange("T must be nonnegative".into()));
    }
    let integrand = |u: f64| {
        let c = spec.correlator(u);
        (t - u) * c.iter().flatten().map(|v| v.abs()).sum::<f64>()
    };
    Ok(integrate(integrand, 0.0, t, 1e-13, 4000).value)
}

/// Base sequence of a concatenated filter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FilterBase {
    /// `X I X I`, two intervals.
    Xixi,
    /// Universal four-pulse sequence.
    Universal,
}

impl FilterBase {
    /// Per-axis sign pattern of the base sequence.
    pub fn patterns(self) -> [Vec<i8>; 3] {
        match self {
            Self::Xixi => [vec![1, 1], vec![1, -1], vec![1, -1]],
            Self::Universal => [vec![1, 1, -1, -1], vec![1, -1, 1, -1], vec![1, -1, -1, 1]],
        }
    }
}

/// Integer coefficients of `P(x) = (-iω) F̃(ω) / 1` in `x = e^{-iωτ0}` for the
/// level-`level` concatenation of a sign pattern.
pub fn concatenated_filter_polynomial(signs: &[i8], level: u32) -> Vec<i64> {
    let r = signs.len();
    let mut poly: Vec<i64> = vec![0; r + 1];
    for (j, &s) in signs.iter().enumerate() {
        poly[j + 1] += s as i64;
        poly[j] -= s as i64;
    }
    let mut stride = r;
    for _ in 2..=level {
        let mut next = vec![0i64; poly.len() + stride * (r - 1)];
        for (j, &s) in signs.iter().enumerate() {
            for (k, &c) in poly.iter().enumerate() {
                next[k + j * stride] += s as i64 * c;
            }
        }
        poly = next;
        stride *= r;
    }
    poly
}

/// Leading small-`ω` term `F̃ ≈ τ0 · coefficient · (ωτ0)^order`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeadingTerm {
    /// Power of `ωτ0`; `None` if the polynomial vanishes identically.
    pub order: Option<u32>,
    /// `|coefficient|`.
    pub magnitude: f64,
    /// Complex coefficient.
    pub coefficient: Complex64,
}

/// Leading term of `F̃ / τ0` from the polynomial `P(x)` with `x = e^{-iu}`.
pub fn leading_term(poly: &[i64]) -> LeadingTerm {
    let max_order = 64;
    let mut factorial = BigInt::from(1);
    for m in 0..max_order {
        if m > 0 {
            factorial *= m;
        }
        let c: BigInt = poly
            .iter()
            .enumerate()
            .map(|(j, &p)| BigInt::from(p) * BigInt::from(j).pow(m))
            .sum();
        if !c.is_zero() {
            let magnitude = (num_rational::BigRational::new(c.abs(), factorial.clone()))
                .to_f64()
                .unwrap_or(f64::INFINITY);
            let sign = if c.is_negative() { -1.0 } else { 1.0 };
            // P ≈ c (-iu)^m / m!, and F̃/τ0 = P / (-iu).
            let phase = c64(0.0, -1.0).powu(m - 1);
            let order = if m == 0 { None } else { Some(m - 1) };
            return LeadingTerm {
                order,
                magnitude,
                coefficient: phase * (sign * magnitude),
            };
        }
    }
    LeadingTerm {
        order: None,
        magnitude: 0.0,
        coefficient: c64(0.0, 0.0),
    }
}

/// Leading term per axis of the level-`level` concatenated filter.
pub fn cdd_filter_leading(base: FilterBase, level: u32) -> Result<[LeadingTerm; 3]> {
    if level == 0 || level > MAX_FILTER_LEVEL {
        return Err(DdError::OutOfRange(format!(
            "filter level must lie in 1..={MAX_FILTER_LEVEL}"
        )));
    }
    let patterns = base.patterns();
    Ok([0, 1, 2].map(|a| leading_term(&concatenated_filter_polynomial(&patterns[a], level))))
}

/// `F̃^{(level)}(ω) / τ0` per axis at finite `ωτ0` from the product recursion.
pub fn cdd_filter_value(base: FilterBase, level: u32, omega_tau0: f64) -> Result<[Complex64; 3]> {
    if level == 0 || level > MAX_FILTER_LEVEL {
        return Err(DdError::OutOfRange(format!(
            "filter level must lie in 1..={MAX_FILTER_LEVEL}"
        )));
    }
    let patterns = base.patterns();
    let x = c64(0.0, -omega_tau0).exp();
    Ok([0, 1, 2].map(|a| {
        let signs = &patterns[a];
        let r = signs.len() as u32;
        let poly_at = |y: Complex64| -> Complex64 {
            signs
                .iter()
                .enumerate()
                .map(|(j, &s)| y.powu(j as u32) * s as f64)
                .sum()
        };
        let mut value = (x - 1.0) * poly_at(x) / c64(0.0, -omega_tau0);
        for k in 2..=level {
            value *= poly_at(x.powu(r.pow(k - 1)));
        }
        value
    }))
}

/// Pulse-interval part of `∫ e^{-iωt} U_c† σ_α U_c dt` per axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseWidthFilter {
    /// Operator-valued integral per axis.
    pub operators: [Operator; 3],
    /// Spectral norms of `operators`.
    pub norms: [f64; 3],
}

/// `∫_0^δ e^{iνu} du`.
fn phase_integral(nu: f64, width: f64) -> Complex64 {
    let x = nu * width;
    if x.abs() < 1e-6 {
        c64(width, 0.0) * (c64(1.0, 0.0) + c64(0.0, x / 2.0) - x * x / 6.0)
    } else {
        (c64(0.0, x).exp() - 1.0) / c64(0.0, nu)
    }
}

/// Contribution of the finite-width pulses to the filter of each axis.
pub fn pulse_width_filter(seq: &PulseSchedule, omega: f64) -> Result<PulseWidthFilter> {
    if seq.dim_s != 2 {
        return Err(DdError::DimMismatch("pulse-width filter needs a single qubit".into()));
    }
    let mut operators = [zeros(2), zeros(2), zeros(2)];
    let mut frame = crate::op_core::identity(2);
    for p in &seq.pulses {
        if p.width > 0.0 {
            let eig = SymmetricEigen::new(crate::op_core::hermitian_part(&p.generator));
            let v = &eig.eigenvectors;
            let start_phase = c64(0.0, -omega * p.start).exp();
            for axis in Axis::ALL {
                // U(u) = V e^{-iΛu/δ} V† frame, so U† σ U has entries
                // e^{i(λ_a - λ_b)u/δ} in the eigenbasis.
                let inner = v.adjoint() * pauli(axis) * v;
                let mut weighted = inner.clone();
                for a in 0..2 {
                    for b in 0..2 {
                        let nu = (eig.eigenvalues[a] - eig.eigenvalues[b]) / p.width - omega;
                        weighted[(a, b)] = inner[(a, b)] * phase_integral(nu, p.width);
                    }
                }
                let lifted = frame.adjoint() * v * weighted * v.adjoint() * &frame;
                operators[axis.index()] += lifted * start_phase;
            }
        }
        frame = p.unitary() * frame;
    }
    let norms = [0, 1, 2].map(|a| norm(&operators[a]));
    Ok(PulseWidthFilter { operators, norms })
}
