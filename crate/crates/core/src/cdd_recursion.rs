//! Level recursions for concatenated dynamical decoupling.
//!
//! Level `k` nests `R` copies of level `k-1`, so its duration is
//! `T^(k) = R^k τ0`. Each level is analysed as a level-1 sequence driven by
//! the previous level's effective Hamiltonian with norms `β^(k-1)`, `J^(k-1)`.

use serde::{Deserialize, Serialize};

use crate::analytic_bounds::{log_distance_factor, C5_TABLE, MAGNUS_VALIDITY_LIMIT};
use crate::error::{DdError, Result};
use crate::threshold_overhead::bisect;

/// Distance factor used when the log-distance formula is out of regime.
pub const FALLBACK_DISTANCE_FACTOR: f64 = 1.25;

/// Relative decrease below which a level counts as a plateau.
pub const PLATEAU_RATIO: f64 = 0.99;

/// Analysis regime of the base sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CddRegime {
    /// First-order decoupling base (universal sequence).
    MagnusGeneral,
    /// Second-order decoupling base (time-symmetric sequence).
    MagnusTimeSymmetric,
}

/// Inputs of the numeric recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CddParams {
    /// Level-0 error norm `J`.
    pub j0: f64,
    /// Level-0 bath norm `β`.
    pub beta0: f64,
    /// Pulses per level `R`.
    pub r: u32,
    /// Pulse spacing.
    pub tau0: f64,
    /// Highest level to iterate.
    pub k_max: usize,
    /// Analysis regime.
    pub regime: CddRegime,
    /// Single-qubit system: traceless parts are bounded by `‖Ω‖` instead of `2‖Ω‖`.
    pub qubit: bool,
    /// Pulse width; zero for ideal pulses.
    pub delta: f64,
    /// Constant `c̄` for the level-wise consistency check.
    pub cbar: f64,
}

/// One level of the recursion.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CddLevel {
    /// Level index.
    pub k: usize,
    /// `J^(k)`.
    pub j: f64,
    /// `β^(k)`.
    pub beta: f64,
    /// Bath increment `K^(k)`.
    pub bath_increment: f64,
    /// `ε^(k) = β^(k) + J^(k)`.
    pub eps: f64,
    /// `c_2^(k)` (zero at level 0).
    pub c2: f64,
    /// `c_3^(k)` (zero at level 0).
    pub c3: f64,
    /// `η^(k) = J^(k) T^(k)`.
    pub eta: f64,
    /// `T^(k) = R^k τ0`.
    pub t: f64,
    /// `ε^(k-1) T^(k)` (zero at level 0).
    pub x: f64,
    /// Distance factor used for the pulse-error term.
    pub distance_factor: f64,
    /// Whether the `c̄` consistency check holds at this level.
    pub cbar_check: bool,
}

/// Result of the recursion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CddTrace {
    /// Levels `0..=k` reached.
    pub levels: Vec<CddLevel>,
    /// Analysis regime.
    pub regime: CddRegime,
    /// `c̄` used for the consistency check.
    pub cbar: f64,
    /// Pulse-error floor `4RδJ`.
    pub floor: f64,
    /// Reason the iteration stopped before `k_max`, if it did.
    pub truncated: Option<String>,
    /// First level whose `η` fails to drop below `0.99` of the previous one.
    pub plateau_level: Option<usize>,
    /// Levels at which the `c̄` check fails.
    pub cbar_failures: Vec<usize>,
}

fn c3_of(regime: CddRegime, x: f64) -> f64 {
    match regime {
        CddRegime::MagnusGeneral => 2.0 / 9.0 + 11.0 / 9.0 * x + C5_TABLE * x * x,
        CddRegime::MagnusTimeSymmetric => 2.0 / 9.0 + C5_TABLE * x * x,
    }
}

fn traceless_factor(qubit: bool) -> f64 {
    if qubit {
        1.0
    } else {
        2.0
    }
}

/// Iterate the level recursions, adding the pulse-error term when `delta > 0`.
pub fn cdd_iterate(p: &CddParams) -> Result<CddTrace> {
    if !(p.j0 >= 0.0 && p.beta0 >= 0.0 && p.tau0 > 0.0 && p.delta >= 0.0 && p.r >= 2) {
        return Err(DdError::OutOfRange(
            "need J, beta, delta >= 0, tau0 > 0 and R >= 2".into(),
        ));
    }
    let r = p.r as f64;
    let factor = traceless_factor(p.qubit);
    let eps0 = p.beta0 + p.j0;
    let mut levels = vec![CddLevel {
        k: 0,
        j: p.j0,
        beta: p.beta0,
        bath_increment: 0.0,
        eps: eps0,
        c2: 0.0,
        c3: 0.0,
        eta: p.j0 * p.tau0,
        t: p.tau0,
        x: 0.0,
        distance_factor: 0.0,
        cbar_check: true,
    }];
    let mut truncated = None;
    let mut cbar_failures = Vec::new();
    for k in 1..=p.k_max {
        let prev = *levels.last().expect("level 0 present");
        let t = r.powi(k as i32) * p.tau0;
        let x = prev.eps * t;
        if x > MAGNUS_VALIDITY_LIMIT {
            truncated = Some(format!(
                "level {k}: epsilon*T = {x:.4} exceeds {MAGNUS_VALIDITY_LIMIT}"
            ));
            break;
        }
        let c3 = c3_of(p.regime, x);
        let (c2, j_ideal, cbar_check) = match p.regime {
            CddRegime::MagnusGeneral => {
                let c2 = 0.5 + factor * (2.0 / 9.0 * x + 11.0 / 9.0 * x * x + C5_TABLE * x.powi(3));
                (c2, c2 * prev.j * x, c2 * prev.eps <= p.cbar * eps0 * (1.0 + 1e-12))
            }
            CddRegime::MagnusTimeSymmetric => {
                let check = 2.0 * c3 * prev.eps * prev.eps <= (p.cbar * eps0).powi(2) * (1.0 + 1e-12);
                (0.0, factor * c3 * prev.j * x * x, check)
            }
        };
        let distance_factor = log_distance_factor(2.0 * x, 2.0 * x).unwrap_or(FALLBACK_DISTANCE_FACTOR);
        let pulse_term = if p.delta > 0.0 {
            4.0 * distance_factor * r * p.delta * p.j0 / t
        } else {
            0.0
        };
        let j = j_ideal + pulse_term;
        let bath_increment = c3 * prev.j * x * x;
        let beta = prev.beta + bath_increment;
        if !cbar_check {
            cbar_failures.push(k);
        }
        levels.push(CddLevel {
            k,
            j,
            beta,
            bath_increment,
            eps: beta + j,
            c2,
            c3,
            eta: j * t,
            t,
            x,
            distance_factor,
            cbar_check,
        });
    }
    let plateau_level = levels
        .windows(2)
        .find(|w| w[0].eta > 0.0 && w[1].eta >= PLATEAU_RATIO * w[0].eta)
        .map(|w| w[1].k);
    Ok(CddTrace {
        levels,
        regime: p.regime,
        cbar: p.cbar,
        floor: 4.0 * r * p.delta * p.j0,
        truncated,
        plateau_level: if p.delta > 0.0 { plateau_level } else { None },
        cbar_failures,
    })
}

/// Closed-form level-`k` strength under the `c̄` approximation.
pub fn cdd_closed_form(cbar_eps_tau0: f64, r: u32, j_tau0: f64, k: u32, regime: CddRegime) -> f64 {
    let r = r as f64;
    let k = k as f64;
    match regime {
        CddRegime::MagnusGeneral => r.powf(k * (k + 3.0) / 2.0) * cbar_eps_tau0.powf(k) * j_tau0,
        CddRegime::MagnusTimeSymmetric => r.powf(k * (k + 2.0)) * cbar_eps_tau0.powf(2.0 * k) * j_tau0,
    }
}

/// Optimal concatenation level and the corresponding bound.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimalLevel {
    /// Best level (0 means no concatenation).
    pub k_max: u32,
    /// Bound on `η_opt / (Jτ0)` from the continuous optimum.
    pub eta_opt_bound: f64,
    /// `c̄` solving the consistency condition for this `R`.
    pub cbar_default: f64,
}

/// Choose the concatenation level for a given `c̄ετ0`.
pub fn optimal_level(cbar_eps_tau0: f64, r: u32, regime: CddRegime) -> Result<OptimalLevel> {
    if !(cbar_eps_tau0 > 0.0 && cbar_eps_tau0.is_finite()) || r < 2 {
        return Err(DdError::OutOfRange("need c̄ετ0 > 0 and R >= 2".into()));
    }
    let rf = r as f64;
    let levels = (1.0 / cbar_eps_tau0).ln() / rf.ln();
    let (k, eta_opt_bound) = match regime {
        CddRegime::MagnusGeneral => (
            (levels - 1.0).floor(),
            cbar_eps_tau0.powf(0.5 * levels - 1.5) / rf,
        ),
        CddRegime::MagnusTimeSymmetric => (
            (levels - 0.5).ceil() - 1.0,
            rf.powf(-0.75) * cbar_eps_tau0.powf(levels - 2.0),
        ),
    };
    Ok(OptimalLevel {
        k_max: k.max(0.0) as u32,
        eta_opt_bound,
        cbar_default: cbar_consistency_root(r, regime)?,
    })
}

/// Smallest `c̄` satisfying the level-wise consistency condition.
///
/// General regime: `1/2 + 2[2/9 (c̄R)^-1 + 11/9 (c̄R)^-2 + 9.43 (c̄R)^-3] = c̄`.
/// Time-symmetric regime: `2[2/9 + 9.43 / (c̄² R)] = c̄²`.
pub fn cbar_consistency_root(r: u32, regime: CddRegime) -> Result<f64> {
    let rf = r as f64;
    let gap = |c: f64| match regime {
        CddRegime::MagnusGeneral => {
            let y = 1.0 / (c * rf);
            c - (0.5 + 2.0 * (2.0 / 9.0 * y + 11.0 / 9.0 * y * y + C5_TABLE * y.powi(3)))
        }
        CddRegime::MagnusTimeSymmetric => c * c - 2.0 * (2.0 / 9.0 + C5_TABLE / (c * c * rf)),
    };
    bisect(gap, 0.1, 100.0, 1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(regime: CddRegime) -> CddParams {
        CddParams {
            j0: 0.001,
            beta0: 0.01,
            r: 4,
            tau0: 1.0,
            k_max: 3,
            regime,
            qubit: false,
            delta: 0.0,
            cbar: 1.027,
        }
    }

    #[test]
    fn zero_coupling_stays_zero() {
        let mut p = params(CddRegime::MagnusGeneral);
        p.j0 = 0.0;
        let trace = cdd_iterate(&p).unwrap();
        assert!(trace.levels.iter().all(|l| l.j == 0.0 && l.eta == 0.0));
    }

    #[test]
    fn durations_follow_powers_of_r() {
        let trace = cdd_iterate(&params(CddRegime::MagnusGeneral)).unwrap();
        for l in &trace.levels {
            assert_eq!(l.t, 4f64.powi(l.k as i32));
            assert_eq!(l.eta, l.j * l.t);
        }
    }

    #[test]
    fn closed_form_level_zero() {
        assert_eq!(cdd_closed_form(1e-3, 4, 0.7, 0, CddRegime::MagnusGeneral), 0.7);
        assert_eq!(cdd_closed_form(1e-3, 8, 0.7, 0, CddRegime::MagnusTimeSymmetric), 0.7);
    }

    #[test]
    fn no_benefit_for_strong_noise() {
        assert_eq!(optimal_level(0.3, 4, CddRegime::MagnusGeneral).unwrap().k_max, 0);
    }

    #[test]
    fn truncates_past_validity() {
        let mut p = params(CddRegime::MagnusGeneral);
        p.beta0 = 0.05;
        p.k_max = 4;
        let trace = cdd_iterate(&p).unwrap();
        assert!(trace.truncated.is_some());
        assert!(trace.levels.iter().all(|l| l.x <= MAGNUS_VALIDITY_LIMIT));
    }
}
