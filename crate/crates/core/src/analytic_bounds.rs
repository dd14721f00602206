//! Closed-form bounds on the effective noise strength of a DD-protected gate.
//!
//! The bound has the form `η ≤ (JT) Σ_{n=1}^{5} C_n (εT)^{n-1}` with
//! coefficients depending on the analysis case. The higher-order Magnus
//! coefficients come from exact rational recursions over Bernoulli numbers.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::sync::OnceLock;

use crate::error::{DdError, Result};
use crate::pulse_schedule::PulseSchedule;
use crate::quadrature::integrate;

/// Largest order supported by the rational recursions.
pub const MAX_RATIONAL_ORDER: usize = 20;

/// Largest `εT` for which the fixed fifth-order Magnus coefficient holds.
pub const MAGNUS_VALIDITY_LIMIT: f64 = 0.54;

/// Fifth-order coefficient as tabulated (the computed value rounds to it).
pub const C5_TABLE: f64 = 9.43;

/// Analysis case selecting a column of the coefficient table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundCase {
    /// Magnus expansion without symmetry.
    General,
    /// Magnus expansion for a nearly time-symmetric sequence.
    TimeSymmetric,
    /// Dyson expansion.
    Dyson,
}

/// Schedule quantities entering the bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScheduleParams {
    /// Total number of pulses `N`.
    pub n_pulses: usize,
    /// Pulse width.
    pub delta: f64,
    /// Gate duration `t0`.
    pub t0: f64,
    /// True when pulses are regularly spaced in time.
    pub regular_spacing: bool,
    /// Symmetry-break measure `Δ`.
    pub symmetry_break: f64,
}

impl ScheduleParams {
    /// Parameters of a built schedule; named sequences are regularly spaced.
    pub fn from_schedule(seq: &PulseSchedule) -> Self {
        Self {
            n_pulses: seq.n_pulses,
            delta: seq.delta,
            t0: seq.t_total,
            regular_spacing: seq.kind != crate::pulse_schedule::SequenceKind::Custom,
            symmetry_break: seq.symmetry_break,
        }
    }

    /// Bound duration: `t0 + δ` for the time-symmetric case, `t0` otherwise.
    pub fn span(&self, case: BoundCase) -> f64 {
        match case {
            BoundCase::TimeSymmetric => self.t0 + self.delta,
            BoundCase::General | BoundCase::Dyson => self.t0,
        }
    }
}

/// Inputs echoed in a [`BoundReport`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Error-part norm.
    pub j: f64,
    /// Total noise norm.
    pub epsilon: f64,
    /// Bound duration `T`.
    pub t_span: f64,
    /// Pulse width.
    pub delta: f64,
    /// Number of pulses.
    pub n_pulses: usize,
    /// Regular spacing flag.
    pub regular_spacing: bool,
    /// Symmetry-break measure.
    pub symmetry_break: f64,
}

/// Assembled bound with per-order contributions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    /// Analysis case.
    pub case: BoundCase,
    /// `C_1 ... C_5`.
    pub coefficients: [f64; 5],
    /// `C_n (JT)(εT)^{n-1}` for `n = 1..5`.
    pub per_order: [f64; 5],
    /// Sum of `per_order`.
    pub eta_bound: f64,
    /// Echoed inputs.
    pub inputs: BoundInputs,
}

fn ratio(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

/// `|B_p|` for `p = 0..=20`.
pub fn bernoulli_abs() -> &'static [BigRational] {
    static TABLE: OnceLock<Vec<BigRational>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut b = vec![BigRational::zero(); MAX_RATIONAL_ORDER + 1];
        let known: [(usize, i64, i64); 12] = [
            (0, 1, 1),
            (1, 1, 2),
            (2, 1, 6),
            (4, 1, 30),
            (6, 1, 42),
            (8, 1, 30),
            (10, 5, 66),
            (12, 691, 2730),
            (14, 7, 6),
            (16, 3617, 510),
            (18, 43867, 798),
            (20, 174611, 330),
        ];
        for (p, n, d) in known {
            b[p] = ratio(n, d);
        }
        b
    })
}

fn factorial(n: usize) -> BigRational {
    BigRational::from_integer((1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k)))
}

/// Exact table `f_n^{(j)}` indexed `[n][j]` for `0 <= j < n <= n_max`.
pub fn fnj_table(n_max: usize) -> Result<Vec<Vec<BigRational>>> {
    if n_max > MAX_RATIONAL_ORDER {
        return Err(DdError::OutOfRange(format!(
            "rational recursion supports n <= {MAX_RATIONAL_ORDER}"
        )));
    }
    let b = bernoulli_abs();
    let mut f = vec![vec![BigRational::zero(); n_max.max(1) + 1]; n_max.max(1) + 1];
    f[1][0] = BigRational::one();
    for n in 2..=n_max {
        for j in 1..n {
            let mut acc = BigRational::zero();
            for m in 1..=(n - j) {
                let mut inner = BigRational::zero();
                for p in 0..m {
                    inner += &b[p] / factorial(p) * &f[m][p];
                }
                acc += inner / BigRational::from_integer(BigInt::from(m)) * &f[n - m][j - 1];
            }
            f[n][j] = acc * ratio(2, 1);
        }
    }
    Ok(f)
}

/// Exact `f_1 ... f_{n_max}` (index 0 unused and zero).
pub fn fn_coefficients(n_max: usize) -> Result<Vec<BigRational>> {
    let table = fnj_table(n_max)?;
    let b = bernoulli_abs();
    let mut out = vec![BigRational::zero(); n_max + 1];
    if n_max >= 1 {
        out[1] = BigRational::one();
    }
    for n in 2..=n_max {
        let mut acc = BigRational::zero();
        for j in 1..n {
            acc += &b[j] / factorial(j) * &table[n][j];
        }
        let scale = BigRational::from_integer(BigInt::from(n) * (BigInt::one() << (n - 1)));
        out[n] = acc / scale;
    }
    Ok(out)
}

/// Float value of a rational.
pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

/// `g(s) = 2 + (s/2)(1 - cot(s/2)) = Σ |B_j|/j! s^j`.
pub fn g_function(s: f64) -> f64 {
    if s.abs() < 0.1 {
        let b = bernoulli_abs();
        let mut term_power = 1.0;
        let mut fact = 1.0;
        let mut sum = 0.0;
        for (j, bj) in b.iter().enumerate() {
            if j > 0 {
                term_power *= s;
                fact *= j as f64;
            }
            sum += to_f64(bj) / fact * term_power;
        }
        sum
    } else {
        2.0 + 0.5 * s * (1.0 - 1.0 / (0.5 * s).tan())
    }
}

/// `G(s) = ∫_0^s dx / g(x)` by adaptive quadrature.
pub fn g_integral(s: f64) -> f64 {
    integrate(|x| 1.0 / g_function(x), 0.0, s, 1e-12, 2000).value
}

/// Constants of the fifth-order Magnus tail.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GConstants {
    /// `ζ = G(2π)`.
    pub zeta: f64,
    /// `C' = (2π - Σ_{n<=4} f_n ζ^n) / ζ^5`.
    pub c_prime: f64,
    /// `4^4 C'`.
    pub c5: f64,
}

/// Tail constants, computed once.
pub fn g_constants() -> GConstants {
    static CONSTS: OnceLock<GConstants> = OnceLock::new();
    *CONSTS.get_or_init(|| {
        let zeta = g_integral(2.0 * PI);
        let f = fn_coefficients(4).expect("order within table");
        let head: f64 = (1..=4).map(|n| to_f64(&f[n]) * zeta.powi(n as i32)).sum();
        let c_prime = (2.0 * PI - head) / zeta.powi(5);
        GConstants {
            zeta,
            c_prime,
            c5: 256.0 * c_prime,
        }
    })
}

/// Dyson fifth-order coefficient `(e^x - 1 - x - x²/2 - x³/6) / x⁴`.
pub fn dyson_c5(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let mut term = 1.0 / 24.0;
        let mut sum = 0.0;
        for k in 4..20 {
            sum += term;
            term *= x / (k + 1) as f64;
        }
        sum
    } else {
        (x.exp_m1() - x - x * x / 2.0 - x.powi(3) / 6.0) / x.powi(4)
    }
}

/// Inputs for [`table_one_coeffs`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoeffInputs {
    /// Number of pulses `N`.
    pub n_pulses: usize,
    /// Pulse width.
    pub delta: f64,
    /// Bound duration `T`.
    pub t_span: f64,
    /// Regular spacing flag.
    pub regular_spacing: bool,
    /// Symmetry-break measure `Δ`.
    pub symmetry_break: f64,
    /// `εT`.
    pub epsilon_t: f64,
}

/// Coefficients `C_1 ... C_5` for the given case.
pub fn table_one_coeffs(case: BoundCase, inputs: &CoeffInputs) -> Result<[f64; 5]> {
    let CoeffInputs {
        n_pulses,
        delta,
        t_span,
        regular_spacing,
        symmetry_break,
        epsilon_t,
    } = *inputs;
    if !(t_span > 0.0) || !(delta >= 0.0) || !(symmetry_break >= 0.0) || !(epsilon_t >= 0.0) {
        return Err(DdError::OutOfRange(
            "bound inputs must be nonnegative with T > 0".into(),
        ));
    }
    let spacing = if regular_spacing { 1.0 } else { 2.0 };
    let c1 = spacing * n_pulses as f64 * delta / t_span;
    if case != BoundCase::Dyson && epsilon_t > MAGNUS_VALIDITY_LIMIT {
        return Err(DdError::Validity {
            message: format!(
                "epsilon*T = {epsilon_t} exceeds {MAGNUS_VALIDITY_LIMIT}, outside the fifth-order tail estimate"
            ),
            margin: PI - epsilon_t,
        });
    }
    Ok(match case {
        BoundCase::General => [c1, 0.5, 2.0 / 9.0, 11.0 / 9.0, C5_TABLE],
        BoundCase::TimeSymmetric => {
            let r = symmetry_break / t_span;
            let shape = r * (1.0 - 0.5 * r);
            [c1, 2.0 * shape, 2.0 / 9.0, 56.0 * shape, C5_TABLE]
        }
        BoundCase::Dyson => [c1, 1.0, 0.5, 1.0 / 6.0, dyson_c5(epsilon_t)],
    })
}

/// Assemble `η ≤ (JT) Σ C_n (εT)^{n-1}`.
pub fn eta_dd_bound(j: f64, epsilon: f64, params: &ScheduleParams, case: BoundCase) -> Result<BoundReport> {
    if !(j >= 0.0 && epsilon >= j) || !epsilon.is_finite() {
        return Err(DdError::OutOfRange(format!(
            "need 0 <= J <= epsilon, got J = {j}, epsilon = {epsilon}"
        )));
    }
    let t_span = params.span(case);
    let inputs = BoundInputs {
        j,
        epsilon,
        t_span,
        delta: params.delta,
        n_pulses: params.n_pulses,
        regular_spacing: params.regular_spacing,
        symmetry_break: params.symmetry_break,
    };
    let coefficients = table_one_coeffs(
        case,
        &CoeffInputs {
            n_pulses: params.n_pulses,
            delta: params.delta,
            t_span,
            regular_spacing: params.regular_spacing,
            symmetry_break: params.symmetry_break,
            epsilon_t: epsilon * t_span,
        },
    )?;
    let jt = j * t_span;
    let et = epsilon * t_span;
    let mut per_order = [0.0; 5];
    for (n, c) in coefficients.iter().enumerate() {
        per_order[n] = c * jt * et.powi(n as i32);
    }
    Ok(BoundReport {
        case,
        coefficients,
        per_order,
        eta_bound: per_order.iter().sum(),
        inputs,
    })
}

/// Even-order bound in terms of the symmetry-break measure.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvenTermBound {
    /// `(2^{n+1} J ε^{n-1} / n²)(2^{n-1} - 1)[T^n - (T-Δ)^n]`.
    pub general: f64,
    /// `2Jε(ΔT - Δ²/2)`, only for `n = 2`.
    pub tight: Option<f64>,
}

/// Bound on an even Magnus term for a nearly time-symmetric Hamiltonian.
pub fn even_term_bound(n: usize, j: f64, epsilon: f64, t_span: f64, symmetry_break: f64) -> Result<EvenTermBound> {
    if n < 2 || n % 2 == 1 {
        return Err(DdError::OutOfRange(format!("order must be even and at least 2, got {n}")));
    }
    if !(symmetry_break >= 0.0 && symmetry_break <= t_span) {
        return Err(DdError::OutOfRange("symmetry break must lie in [0, T]".into()));
    }
    let nf = n as f64;
    let general = 2f64.powi(n as i32 + 1) * j * epsilon.powi(n as i32 - 1) / (nf * nf)
        * (2f64.powi(n as i32 - 1) - 1.0)
        * (t_span.powi(n as i32) - (t_span - symmetry_break).powi(n as i32));
    let tight = (n == 2)
        .then_some(2.0 * j * epsilon * (symmetry_break * t_span - 0.5 * symmetry_break * symmetry_break));
    Ok(EvenTermBound { general, tight })
}

/// Second-order bound with bath self-interaction `b` and pair interaction `c`:
/// `(JT)((b + c + J)T)`.
pub fn quasilocal_omega2_bound(b: f64, c: f64, j: f64, t_span: f64) -> Result<f64> {
    if b < 0.0 || c < 0.0 || j < 0.0 || t_span < 0.0 {
        return Err(DdError::OutOfRange("quasi-local parameters must be nonnegative".into()));
    }
    Ok(j * t_span * (b + c + j) * t_span)
}

fn sinhc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        1.0 + x * x / 6.0
    } else {
        x.sinh() / x
    }
}

/// `c(ε₊, ε₋) = (2 - e^{ε₊/2} sinh(ε₋/2) / (ε₋/2))^{-1}`.
pub fn log_distance_factor(eps_plus: f64, eps_minus: f64) -> Result<f64> {
    if eps_plus < 0.0 || eps_minus < 0.0 || !eps_plus.is_finite() || !eps_minus.is_finite() {
        return Err(DdError::OutOfRange("norm parameters must be finite and nonnegative".into()));
    }
    let denom = 2.0 - (0.5 * eps_plus).exp() * sinhc(0.5 * eps_minus);
    if denom <= 0.0 {
        return Err(DdError::Validity {
            message: "log-distance factor diverges for these norms".into(),
            margin: denom,
        });
    }
    Ok(1.0 / denom)
}

/// Coefficient table as JSON rows for documentation.
pub fn table_one_json(inputs: &CoeffInputs) -> serde_json::Value {
    let column = |case| match table_one_coeffs(case, inputs) {
        Ok(c) => serde_json::json!(c),
        Err(e) => serde_json::json!({ "error": e.to_string() }),
    };
    serde_json::json!({
        "general": column(BoundCase::General),
        "time_symmetric": column(BoundCase::TimeSymmetric),
        "dyson": column(BoundCase::Dyson),
        "computed_c5": g_constants().c5,
    })
}
