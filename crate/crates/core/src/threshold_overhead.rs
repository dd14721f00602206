//! Noise-suppression thresholds, fault-tolerance overhead and strategy regions.
//!
//! All strengths here are expressed relative to the unprotected strength
//! `η = Jτ0`; the bounds are linear in `J`, so the ratios depend only on
//! `ετ0` and `δ/τ0`.

use serde::{Deserialize, Serialize};

use crate::analytic_bounds::{table_one_coeffs, BoundCase, CoeffInputs, ScheduleParams, MAGNUS_VALIDITY_LIMIT};
use crate::error::{DdError, Result, ScalabilityFailure};
use crate::pulse_schedule::{append_gate, build_sequence, named_gate, SequenceKind};

/// Default overhead exponent `log2(291)`.
pub fn default_overhead_exponent() -> f64 {
    291f64.log2()
}

/// Lower end of the threshold bracket in `ετ0`.
pub const BRACKET_LOW: f64 = 1e-6;

/// Bisection tolerance in `ετ0`.
pub const BISECTION_TOL: f64 = 1e-8;

/// Schedule parameters of a gate protected by `kind` with pulse width
/// `delta_ratio · τ0` and `τ0 = 1`.
pub fn protected_gate_params(kind: SequenceKind, delta_ratio: f64) -> Result<ScheduleParams> {
    let memory = build_sequence(kind, 1.0, delta_ratio)?;
    let gate = named_gate("H").expect("builtin gate");
    Ok(ScheduleParams::from_schedule(&append_gate(&memory, &gate)?))
}

/// Bound case conventionally paired with a sequence kind.
pub fn default_case(kind: SequenceKind) -> BoundCase {
    if kind.is_time_symmetric() {
        BoundCase::TimeSymmetric
    } else {
        BoundCase::General
    }
}

/// `η_DD / (Jτ0)` as a function of `ετ0` for fixed schedule parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StrengthRatio {
    params: ScheduleParams,
    case: BoundCase,
    drop_first_order: bool,
}

impl StrengthRatio {
    /// Ratio for a protected gate; Eulerian kinds omit the pulse-width term.
    pub fn for_kind(kind: SequenceKind, delta_ratio: f64, case: BoundCase) -> Result<Self> {
        Ok(Self {
            params: protected_gate_params(kind, delta_ratio)?,
            case,
            drop_first_order: kind.is_eulerian(),
        })
    }

    /// Bound duration in units of `τ0`.
    pub fn span(&self) -> f64 {
        self.params.span(self.case)
    }

    /// Largest `ετ0` inside the Magnus validity region.
    pub fn validity_edge(&self) -> f64 {
        MAGNUS_VALIDITY_LIMIT / self.span()
    }

    fn coefficients(&self, eps_tau0: f64, checked: bool) -> Result<[f64; 5]> {
        let t = self.span();
        let epsilon_t = eps_tau0 * t;
        let gated = if checked || self.case == BoundCase::Dyson { epsilon_t } else { 0.0 };
        let mut c = table_one_coeffs(
            self.case,
            &CoeffInputs {
                n_pulses: self.params.n_pulses,
                delta: self.params.delta,
                t_span: t,
                regular_spacing: self.params.regular_spacing,
                symmetry_break: self.params.symmetry_break,
                epsilon_t: gated,
            },
        )?;
        if self.drop_first_order {
            c[0] = 0.0;
        }
        Ok(c)
    }

    fn evaluate(&self, eps_tau0: f64, checked: bool) -> Result<f64> {
        let t = self.span();
        let c = self.coefficients(eps_tau0, checked)?;
        let x = eps_tau0 * t;
        Ok(t * c.iter().enumerate().map(|(n, cn)| cn * x.powi(n as i32)).sum::<f64>())
    }

    /// Ratio with the Magnus validity limit enforced.
    pub fn value(&self, eps_tau0: f64) -> Result<f64> {
        self.evaluate(eps_tau0, true)
    }

    /// Ratio evaluated from the formula regardless of validity.
    pub fn formula(&self, eps_tau0: f64) -> f64 {
        self.evaluate(eps_tau0, false).expect("coefficients without validity gate")
    }

    /// Limit of the ratio as `ετ0 → 0`.
    pub fn small_noise_limit(&self) -> f64 {
        self.formula(0.0)
    }
}

/// Crossing of a protected gate's bound with the unprotected strength.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThresholdResult {
    /// `ετ0` at which `η_DD = Jτ0`.
    pub crossing_eps_tau0: f64,
    /// Largest `δ/τ0` with `η_DD < Jτ0` as `ετ0 → 0`; infinite when the
    /// pulse-width term is absent.
    pub crossing_delta_ratio: f64,
    /// Sequence kind.
    pub sequence_kind: SequenceKind,
    /// Bound case.
    pub bound_case: BoundCase,
}

/// Bisection for an increasing function crossing zero in `[lo, hi]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let (flo, fhi) = (f(lo), f(hi));
    if !(flo < 0.0 && fhi > 0.0) {
        return Err(DdError::NoSignChange { lo, hi });
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Solve `η_DD(ετ0) = Jτ0` for a protected gate.
///
/// The bracket is `[BRACKET_LOW, 0.54 τ0 / T]`, the validity region of the
/// bound for the gate's duration.
pub fn suppression_threshold(kind: SequenceKind, delta_ratio: f64, case: BoundCase) -> Result<ThresholdResult> {
    let ratio = StrengthRatio::for_kind(kind, delta_ratio, case)?;
    let hi = ratio.validity_edge();
    let samples = 16;
    let mut previous = ratio.value(BRACKET_LOW)?;
    for k in 1..=samples {
        let x = BRACKET_LOW + (hi - BRACKET_LOW) * k as f64 / samples as f64;
        let v = ratio.value(x)?;
        if v < previous {
            return Err(DdError::NumericInput("bound ratio is not monotone on the bracket".into()));
        }
        previous = v;
    }
    let crossing = bisect(
        |x| ratio.value(x).expect("inside validity bracket") - 1.0,
        BRACKET_LOW,
        hi,
        BISECTION_TOL,
    )?;
    let per_width = StrengthRatio::for_kind(kind, 0.0, case)?;
    let c1_slope = if per_width.drop_first_order {
        0.0
    } else {
        per_width.params.n_pulses as f64 * if per_width.params.regular_spacing { 1.0 } else { 2.0 }
    };
    Ok(ThresholdResult {
        crossing_eps_tau0: crossing,
        crossing_delta_ratio: if c1_slope > 0.0 { 1.0 / c1_slope } else { f64::INFINITY },
        sequence_kind: kind,
        bound_case: case,
    })
}

/// Overhead ratio `L*_DD / L*_un = N (log(η0/η) / log(η0/η_DD))^a`.
pub fn overhead_ratio(n_pulses: usize, eta0: f64, eta: f64, eta_dd: f64, a: f64) -> Result<f64> {
    if !(eta0 > 0.0 && eta > 0.0 && eta_dd > 0.0) {
        return Err(DdError::OutOfRange("noise strengths must be positive".into()));
    }
    let failure = match (eta >= eta0, eta_dd >= eta0) {
        (true, true) => Some(ScalabilityFailure::Both),
        (true, false) => Some(ScalabilityFailure::Unprotected),
        (false, true) => Some(ScalabilityFailure::Protected),
        (false, false) => None,
    };
    if let Some(side) = failure {
        return Err(DdError::NotScalable(side));
    }
    Ok(n_pulses as f64 * ((eta0 / eta).ln() / (eta0 / eta_dd).ln()).powf(a))
}

/// Strategy ordering index from the six strict orderings of
/// `(η_EDD, η_noDD, η_DD)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionResult {
    /// Region index in `1..=6`.
    pub region: u8,
    /// True when two strengths tie within relative `1e-12`.
    pub on_boundary: bool,
    /// `η_noDD / (Jτ0)`, always 1.
    pub no_dd: f64,
    /// Universal-sequence ratio at the given pulse width.
    pub dd: f64,
    /// Eulerian-sequence ratio.
    pub edd: f64,
}

/// Classify the best strategy among no DD, universal DD and Eulerian DD.
pub fn edd_region(eps_tau0: f64, delta_ratio: f64) -> Result<RegionResult> {
    if !(eps_tau0 >= 0.0 && eps_tau0.is_finite()) {
        return Err(DdError::OutOfRange("eps_tau0 must be finite and nonnegative".into()));
    }
    let dd = StrengthRatio::for_kind(SequenceKind::Universal, delta_ratio, BoundCase::General)?.formula(eps_tau0);
    let edd = StrengthRatio::for_kind(SequenceKind::Eulerian, 0.0, BoundCase::General)?.formula(eps_tau0);
    Ok(classify(edd, 1.0, dd))
}

fn classify(edd: f64, none: f64, dd: f64) -> RegionResult {
    let orders: [[f64; 3]; 6] = [
        [edd, none, dd],
        [edd, dd, none],
        [dd, edd, none],
        [dd, none, edd],
        [none, dd, edd],
        [none, edd, dd],
    ];
    let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(b.abs());
    let on_boundary = close(edd, none) || close(edd, dd) || close(dd, none);
    let region = orders
        .iter()
        .position(|o| o[0] <= o[1] && o[1] <= o[2])
        .expect("some ordering holds") as u8
        + 1;
    RegionResult {
        region,
        on_boundary,
        no_dd: none,
        dd,
        edd,
    }
}

/// Pulse width above which the Eulerian sequence beats the universal one
/// wherever either beats no decoupling.
///
/// At the Eulerian crossing `x*` the Eulerian bound equals `Jτ0`; the width
/// at which the universal bound reaches the same value there is the answer.
pub fn edd_delta_threshold() -> Result<f64> {
    let edd_cross = suppression_threshold(SequenceKind::Eulerian, 0.0, BoundCase::General)?.crossing_eps_tau0;
    let zero_width = StrengthRatio::for_kind(SequenceKind::Universal, 0.0, BoundCase::General)?;
    let slope = StrengthRatio::for_kind(SequenceKind::Universal, 1.0 / 64.0, BoundCase::General)?;
    let per_delta = (slope.small_noise_limit() - zero_width.small_noise_limit()) * 64.0;
    Ok((1.0 - zero_width.formula(edd_cross)) / per_delta)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overhead_equal_strengths_gives_pulse_count() {
        let r = overhead_ratio(8, 1e-4, 5e-5, 5e-5, default_overhead_exponent()).unwrap();
        assert!((r - 8.0).abs() < 1e-12);
    }

    #[test]
    fn overhead_failure_sides() {
        let a = default_overhead_exponent();
        assert!(matches!(
            overhead_ratio(4, 1e-4, 2e-4, 1e-5, a),
            Err(DdError::NotScalable(ScalabilityFailure::Unprotected))
        ));
        assert!(matches!(
            overhead_ratio(4, 1e-4, 1e-5, 2e-4, a),
            Err(DdError::NotScalable(ScalabilityFailure::Protected))
        ));
        assert!(matches!(
            overhead_ratio(4, 1e-4, 1e-4, 2e-4, a),
            Err(DdError::NotScalable(ScalabilityFailure::Both))
        ));
    }

    #[test]
    fn default_exponent() {
        assert!((default_overhead_exponent() - 8.1849).abs() < 1e-4);
    }

    #[test]
    fn classify_orderings() {
        assert_eq!(classify(0.1, 1.0, 2.0).region, 1);
        assert_eq!(classify(0.1, 1.0, 0.5).region, 2);
        assert_eq!(classify(0.6, 1.0, 0.5).region, 3);
        assert_eq!(classify(1.5, 1.0, 0.5).region, 4);
        assert_eq!(classify(2.5, 1.0, 1.5).region, 5);
        assert_eq!(classify(1.5, 1.0, 2.5).region, 6);
        let tie = classify(1.0, 1.0, 2.0);
        assert!(tie.on_boundary);
        assert_eq!(tie.region, 1);
    }

    #[test]
    fn bisect_requires_sign_change() {
        assert!(bisect(|x| x + 1.0, 0.0, 1.0, 1e-9).is_err());
        let r = bisect(|x| x * x - 0.25, 0.0, 1.0, 1e-12).unwrap();
        assert!((r - 0.5).abs() < 1e-11);
    }
}
