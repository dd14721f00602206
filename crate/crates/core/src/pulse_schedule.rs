//! Pulse sequences, gate pulses, concatenation and toggling-frame segments.
//!
//! A pulse is rectangular with width `width` and a dimensionless generator
//! `K`; its unitary is `exp(-iK)` and its Hamiltonian is `K / width`. Storing
//! `K` rather than the Hamiltonian keeps zero-width pulses well defined.
//! Pulse generators act on the system only.

use serde::{Deserialize, Serialize};
use std::f64::consts::FRAC_PI_2;

use crate::error::{DdError, Result};
use crate::noise_model::NoiseModel;
use crate::op_core::{
    c64, evolve, identity, matrix_log_principal, max_abs, pauli, serde_rows, tensor_product,
    zeros, Axis, BranchPolicy, Operator,
};

/// Default number of midpoint samples per finite-width pulse.
pub const DEFAULT_SUBDIVISIONS: usize = 8;

/// Default maximum concatenation level.
pub const DEFAULT_LEVEL_CAP: usize = 4;

/// Tolerance for "equal up to a global phase" tests on control unitaries.
const PHASE_TOL: f64 = 1e-10;

/// Named memory sequences.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// Four-pulse X, Z, X, Z sequence over `4 τ0`.
    Universal,
    /// Forward universal sequence followed by its time reverse over `8 τ0`.
    TimeSymmetric,
    /// Eight-pulse Euler cycle over the Pauli group, `8 τ0`.
    Eulerian,
    /// Eulerian cycle run backward then forward, `16 τ0`.
    EulerianTimeSymmetric,
    /// User-supplied pulse list.
    Custom,
}

impl SequenceKind {
    /// Number of free intervals per period, the concatenation ratio `R`.
    pub fn period_slots(self) -> usize {
        match self {
            Self::Universal => 4,
            Self::TimeSymmetric | Self::Eulerian => 8,
            Self::EulerianTimeSymmetric => 16,
            Self::Custom => 0,
        }
    }

    /// True for the sequences with `U_c(T - t) = U_c(t)`.
    pub fn is_time_symmetric(self) -> bool {
        matches!(self, Self::TimeSymmetric | Self::EulerianTimeSymmetric)
    }

    /// True for Eulerian sequences.
    pub fn is_eulerian(self) -> bool {
        matches!(self, Self::Eulerian | Self::EulerianTimeSymmetric)
    }
}

/// A rectangular pulse.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pulse {
    /// Start time.
    pub start: f64,
    /// Duration; zero for ideal pulses.
    pub width: f64,
    /// Dimensionless generator `K` with pulse unitary `exp(-iK)`.
    #[serde(with = "serde_rows")]
    pub generator: Operator,
    /// Display label.
    pub label: String,
}

impl Pulse {
    /// Pulse unitary `exp(-iK)`.
    pub fn unitary(&self) -> Operator {
        evolve(&self.generator, 1.0).expect("Hermitian generator")
    }

    /// End time.
    pub fn end(&self) -> f64 {
        self.start + self.width
    }

    /// Constant pulse Hamiltonian `K / width`, if the width is nonzero.
    pub fn hamiltonian(&self) -> Option<Operator> {
        (self.width > 0.0).then(|| self.generator.unscale(self.width))
    }
}

/// A timed pulse sequence on the system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PulseSchedule {
    /// Sequence family.
    pub kind: SequenceKind,
    /// System dimension acted on by the pulses.
    pub dim_s: usize,
    /// Pulses sorted by start time, non-overlapping.
    pub pulses: Vec<Pulse>,
    /// Pulse spacing.
    pub tau0: f64,
    /// Total duration (`t_DD` for memory sequences, `t0` with a gate).
    pub t_total: f64,
    /// Number of pulses, including zero-generator placeholders.
    pub n_pulses: usize,
    /// Pulse width.
    pub delta: f64,
    /// Measure of the region where `H_M(T - t) != H_M(t)`.
    pub symmetry_break: f64,
    /// Length of the leading `-H_B` segment used for the time-symmetric bound.
    pub gamma_prefix: f64,
    /// Concatenation level (1 for a base sequence).
    pub level: usize,
    /// True once a gate pulse has been appended or merged.
    pub gate_appended: bool,
}

/// A constant-Hamiltonian piece of the toggling-frame evolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TogglingSegment {
    /// Segment start.
    pub t_start: f64,
    /// Segment end.
    pub t_end: f64,
    /// Hamiltonian on the segment.
    pub hamiltonian: Operator,
}

impl TogglingSegment {
    /// Segment length.
    pub fn len(&self) -> f64 {
        self.t_end - self.t_start
    }

    /// True for zero-length segments.
    pub fn is_empty(&self) -> bool {
        self.len() <= 0.0
    }
}

fn pauli_pulse(axis: Axis, sign: f64, start: f64, width: f64) -> Pulse {
    let name = match axis {
        Axis::X => "X",
        Axis::Y => "Y",
        Axis::Z => "Z",
    };
    let suffix = if sign < 0.0 { "-" } else { "" };
    Pulse {
        start,
        width,
        generator: pauli(axis).scale(sign * FRAC_PI_2),
        label: format!("{name}{suffix}"),
    }
}

fn identity_pulse(start: f64, width: f64) -> Pulse {
    Pulse {
        start,
        width,
        generator: zeros(2),
        label: "I".into(),
    }
}

const EULER_LETTERS: [Axis; 8] = [
    Axis::X,
    Axis::Z,
    Axis::X,
    Axis::Z,
    Axis::Z,
    Axis::X,
    Axis::Z,
    Axis::X,
];

/// Build a named single-qubit memory sequence.
pub fn build_sequence(kind: SequenceKind, tau0: f64, delta: f64) -> Result<PulseSchedule> {
    if !(tau0 > 0.0 && tau0.is_finite()) {
        return Err(DdError::OutOfRange(format!("tau0 must be positive, got {tau0}")));
    }
    if !(delta >= 0.0 && delta < tau0) {
        return Err(DdError::OutOfRange(format!(
            "pulse width must satisfy 0 <= delta < tau0, got delta = {delta}, tau0 = {tau0}"
        )));
    }
    let end_of_slot = |k: usize| k as f64 * tau0 - delta;
    let (pulses, t_total) = match kind {
        SequenceKind::Universal => {
            let letters = [Axis::X, Axis::Z, Axis::X, Axis::Z];
            let p = letters
                .iter()
                .enumerate()
                .map(|(i, &a)| pauli_pulse(a, 1.0, end_of_slot(i + 1), delta))
                .collect();
            (p, 4.0 * tau0)
        }
        SequenceKind::TimeSymmetric => {
            let mut p = Vec::with_capacity(7);
            for (i, &a) in [Axis::X, Axis::Z, Axis::X].iter().enumerate() {
                p.push(pauli_pulse(a, 1.0, end_of_slot(i + 1), delta));
            }
            p.push(identity_pulse(end_of_slot(4), delta));
            for (i, &a) in [Axis::X, Axis::Z, Axis::X].iter().enumerate() {
                p.push(pauli_pulse(a, -1.0, end_of_slot(i + 5), delta));
            }
            (p, 8.0 * tau0 - delta)
        }
        SequenceKind::Eulerian => {
            let p = EULER_LETTERS
                .iter()
                .enumerate()
                .map(|(i, &a)| pauli_pulse(a, 1.0, end_of_slot(i + 1), delta))
                .collect();
            (p, 8.0 * tau0)
        }
        SequenceKind::EulerianTimeSymmetric => {
            let mut p = Vec::with_capacity(16);
            for (i, &a) in EULER_LETTERS.iter().enumerate() {
                p.push(pauli_pulse(a, 1.0, i as f64 * tau0, delta));
            }
            for (i, &a) in EULER_LETTERS.iter().enumerate() {
                p.push(pauli_pulse(a, -1.0, end_of_slot(i + 9), delta));
            }
            (p, 16.0 * tau0)
        }
        SequenceKind::Custom => {
            return Err(DdError::OutOfRange(
                "custom schedules are built with PulseSchedule::custom".into(),
            ))
        }
    };
    let mut seq = PulseSchedule {
        kind,
        dim_s: 2,
        n_pulses: pulses.len(),
        pulses,
        tau0,
        t_total,
        delta,
        symmetry_break: 0.0,
        gamma_prefix: 0.0,
        level: 1,
        gate_appended: false,
    };
    seq.symmetry_break = seq.measure_symmetry_break();
    Ok(seq)
}

impl PulseSchedule {
    /// Schedule from an explicit pulse list.
    pub fn custom(dim_s: usize, tau0: f64, t_total: f64, mut pulses: Vec<Pulse>) -> Result<Self> {
        pulses.sort_by(|a, b| a.start.total_cmp(&b.start));
        let mut cursor = 0.0;
        for (i, p) in pulses.iter().enumerate() {
            if p.generator.shape() != (dim_s, dim_s) {
                return Err(DdError::DimMismatch(format!("pulse {i} generator shape")));
            }
            if !crate::op_core::is_hermitian(&p.generator) {
                return Err(DdError::NumericInput(format!("pulse {i} generator is not Hermitian")));
            }
            if p.width < 0.0 || p.start < cursor - 1e-12 || p.end() > t_total + 1e-12 {
                return Err(DdError::OutOfRange(format!(
                    "pulse {i} overlaps its neighbour or leaves [0, t_total]"
                )));
            }
            cursor = p.end();
        }
        let delta = pulses.iter().map(|p| p.width).fold(0.0, f64::max);
        let mut seq = Self {
            kind: SequenceKind::Custom,
            dim_s,
            n_pulses: pulses.len(),
            pulses,
            tau0,
            t_total,
            delta,
            symmetry_break: 0.0,
            gamma_prefix: 0.0,
            level: 1,
            gate_appended: false,
        };
        seq.symmetry_break = seq.measure_symmetry_break();
        Ok(seq)
    }

    /// Duration `T = t_total + Γ` of the Magnus Hamiltonian.
    pub fn magnus_span(&self) -> f64 {
        self.t_total + self.gamma_prefix
    }

    /// Ordered product of all pulse unitaries, latest on the left.
    pub fn pulse_product(&self) -> Operator {
        self.pulses
            .iter()
            .fold(identity(self.dim_s), |acc, p| p.unitary() * acc)
    }

    /// Distance of the pulse product from the identity, up to global phase.
    pub fn cyclic_residual(&self) -> f64 {
        phase_distance(&self.pulse_product(), &identity(self.dim_s))
    }

    /// True when the pulse product is the identity up to global phase.
    pub fn is_cyclic(&self) -> bool {
        self.cyclic_residual() <= PHASE_TOL * self.dim_s as f64
    }

    /// Control unitary `U_c(t)` for `t` in `[0, t_total]` (global phase kept).
    pub fn control_unitary(&self, t: f64) -> Operator {
        let mut u = identity(self.dim_s);
        for p in &self.pulses {
            if t >= p.end() {
                u = p.unitary() * u;
            } else if t > p.start {
                let frac = (t - p.start) / p.width;
                u = evolve(&p.generator, frac).expect("Hermitian generator") * u;
                break;
            } else {
                break;
            }
        }
        u
    }

    /// Measure of `{t : H_M(T - t) != H_M(t)}` judged on control unitaries.
    ///
    /// The `-H_B` prefix is only ever equal to another prefix point.
    pub fn measure_symmetry_break(&self) -> f64 {
        let total = self.magnus_span();
        let gamma = self.gamma_prefix;
        let mut cuts = vec![0.0, total, gamma, total - gamma];
        for p in &self.pulses {
            for t in [p.start + gamma, p.end() + gamma] {
                cuts.push(t);
                cuts.push(total - t);
            }
        }
        cuts.retain(|t| (0.0..=total).contains(t));
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-13 * total.max(1.0));
        let state = |t: f64| -> Option<Operator> {
            (t >= gamma).then(|| self.control_unitary(t - gamma))
        };
        let mut broken = 0.0;
        for w in cuts.windows(2) {
            let (a, b) = (w[0], w[1]);
            if b - a <= 0.0 {
                continue;
            }
            let mid = 0.5 * (a + b);
            let same = match (state(mid), state(total - mid)) {
                (None, None) => true,
                (Some(u), Some(v)) => phase_distance(&u, &v) <= 1e-9,
                _ => false,
            };
            if !same {
                broken += b - a;
            }
        }
        broken
    }
}

/// `min_φ ‖U - e^{iφ} V‖_max` evaluated at the phase of `tr(V† U)`.
fn phase_distance(u: &Operator, v: &Operator) -> f64 {
    let overlap = (v.adjoint() * u).trace();
    let phase = if overlap.norm() > 0.0 {
        overlap / overlap.norm()
    } else {
        c64(1.0, 0.0)
    };
    max_abs(&(u - v * phase))
}

/// Dimensionless generator `K` with `exp(-iK) = e^{iφ} U` for some phase chosen
/// so that no eigenvalue sits near the branch cut.
fn generator_for(u: &Operator) -> Result<Operator> {
    let (_, t) = nalgebra::Schur::new(u.clone()).unpack();
    let mut phases: Vec<f64> = (0..u.nrows()).map(|k| t[(k, k)].arg()).collect();
    phases.sort_by(f64::total_cmp);
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut best = (phases[0] + two_pi - phases[phases.len() - 1], phases[phases.len() - 1]);
    for w in phases.windows(2) {
        if w[1] - w[0] > best.0 {
            best = (w[1] - w[0], w[0]);
        }
    }
    let gap_mid = best.1 + 0.5 * best.0;
    let shift = std::f64::consts::PI - gap_mid;
    let rotated = u * c64(shift.cos(), shift.sin());
    let log = matrix_log_principal(&rotated, BranchPolicy::Strict)?;
    Ok(crate::op_core::hermitian_part(&(log * c64(0.0, 1.0))))
}

/// Append a gate: merge into a final pulse or add a new pulse of width `delta`.
pub fn append_gate(seq: &PulseSchedule, gate: &Operator) -> Result<PulseSchedule> {
    if gate.shape() != (seq.dim_s, seq.dim_s) {
        return Err(DdError::DimMismatch("gate dimension differs from the system".into()));
    }
    let residual = seq.cyclic_residual();
    if residual > PHASE_TOL * seq.dim_s as f64 {
        return Err(DdError::NonCyclic { residual });
    }
    if seq.gate_appended {
        return Err(DdError::OutOfRange("schedule already carries a gate".into()));
    }
    let defect = max_abs(&(gate.adjoint() * gate - identity(seq.dim_s)));
    if defect > 1e-10 {
        return Err(DdError::NumericInput("gate is not unitary".into()));
    }
    let mut out = seq.clone();
    out.gate_appended = true;
    let ends_with_pulse = seq
        .pulses
        .last()
        .is_some_and(|p| (p.end() - seq.t_total).abs() <= 1e-12 * seq.t_total.max(1.0));
    let trivial = phase_distance(gate, &identity(seq.dim_s)) <= PHASE_TOL;
    if ends_with_pulse {
        if !trivial {
            let last = out.pulses.last_mut().expect("nonempty");
            let merged = gate * last.unitary();
            last.generator = generator_for(&merged)?;
            last.label = format!("G{}", last.label);
        }
    } else {
        let generator = if trivial { zeros(seq.dim_s) } else { generator_for(gate)? };
        out.pulses.push(Pulse {
            start: seq.t_total,
            width: seq.delta,
            generator,
            label: "G".into(),
        });
        out.n_pulses += 1;
        out.t_total = seq.t_total + seq.delta;
        if seq.kind.is_time_symmetric() {
            out.gamma_prefix = seq.delta;
        }
    }
    out.symmetry_break = out.measure_symmetry_break();
    Ok(out)
}

/// Concatenate `base` to `level` with the default level cap.
pub fn concatenate_schedule(base: &PulseSchedule, level: usize) -> Result<PulseSchedule> {
    concatenate_schedule_capped(base, level, DEFAULT_LEVEL_CAP)
}

/// Concatenate: every free interval of `base` is replaced by the previous level.
pub fn concatenate_schedule_capped(
    base: &PulseSchedule,
    level: usize,
    cap: usize,
) -> Result<PulseSchedule> {
    if level == 0 || level > cap {
        return Err(DdError::OutOfRange(format!(
            "concatenation level must lie in 1..={cap}, got {level}"
        )));
    }
    if base.level != 1 || base.gate_appended {
        return Err(DdError::OutOfRange("base must be an unconcatenated memory sequence".into()));
    }
    if level == 1 {
        return Ok(base.clone());
    }
    if base.delta > 0.0 {
        return Err(DdError::OutOfRange(
            "concatenation beyond level 1 requires zero-width pulses".into(),
        ));
    }
    let residual = base.cyclic_residual();
    if residual > PHASE_TOL * base.dim_s as f64 {
        return Err(DdError::NonCyclic { residual });
    }
    let mut current = base.clone();
    for k in 2..=level {
        let mut pulses = Vec::new();
        let mut clock = 0.0;
        let mut cursor = 0.0;
        let insert_block = |clock: &mut f64, pulses: &mut Vec<Pulse>| {
            for p in &current.pulses {
                let mut q = p.clone();
                q.start += *clock;
                pulses.push(q);
            }
            *clock += current.t_total;
        };
        for p in &base.pulses {
            if p.start > cursor + 1e-12 {
                insert_block(&mut clock, &mut pulses);
            }
            let mut q = p.clone();
            q.start = clock;
            pulses.push(q);
            cursor = p.end();
        }
        if base.t_total > cursor + 1e-12 {
            insert_block(&mut clock, &mut pulses);
        }
        current = PulseSchedule {
            n_pulses: pulses.len(),
            pulses,
            t_total: clock,
            level: k,
            ..base.clone()
        };
    }
    current.symmetry_break = current.measure_symmetry_break();
    Ok(current)
}

/// Lift a system operator to the joint space as `U ⊗ I_B`.
fn lift(u: &Operator, dim_b: usize) -> Operator {
    tensor_product(u, &identity(dim_b))
}

fn conjugate(h: &Operator, w: &Operator) -> Operator {
    w.adjoint() * h * w
}

/// Toggling-frame segments `H̃(t) = U_c† H U_c` without the `-H_B` prefix.
pub fn frame_segments(
    seq: &PulseSchedule,
    model: &NoiseModel,
    subdivisions: usize,
) -> Result<Vec<TogglingSegment>> {
    if subdivisions == 0 {
        return Err(DdError::OutOfRange("pulse subdivisions must be at least 1".into()));
    }
    if model.dim_s != seq.dim_s {
        return Err(DdError::DimMismatch(format!(
            "model system dimension {} vs schedule {}",
            model.dim_s, seq.dim_s
        )));
    }
    let h = model.hamiltonian();
    let db = model.dim_b;
    let mut segments = Vec::new();
    let mut frame = identity(seq.dim_s);
    let mut cursor = 0.0;
    let push_free = |from: f64, to: f64, frame: &Operator, segments: &mut Vec<TogglingSegment>| {
        if to > from {
            segments.push(TogglingSegment {
                t_start: from,
                t_end: to,
                hamiltonian: conjugate(&h, &lift(frame, db)),
            });
        }
    };
    for p in &seq.pulses {
        push_free(cursor, p.start, &frame, &mut segments);
        if p.width > 0.0 {
            let step = p.width / subdivisions as f64;
            for m in 0..subdivisions {
                let frac = (m as f64 + 0.5) / subdivisions as f64;
                let partial = evolve(&p.generator, frac)? * &frame;
                segments.push(TogglingSegment {
                    t_start: p.start + m as f64 * step,
                    t_end: if m + 1 == subdivisions { p.end() } else { p.start + (m + 1) as f64 * step },
                    hamiltonian: conjugate(&h, &lift(&partial, db)),
                });
            }
        }
        frame = p.unitary() * frame;
        cursor = p.end();
    }
    push_free(cursor, seq.t_total, &frame, &mut segments);
    Ok(segments)
}

/// Segments of the Magnus Hamiltonian `H_M`: a `-H_B` piece of length Γ, then
/// the toggling-frame Hamiltonian shifted by Γ.
pub fn toggling_segments(
    seq: &PulseSchedule,
    model: &NoiseModel,
    subdivisions: usize,
) -> Result<Vec<TogglingSegment>> {
    let gamma = seq.gamma_prefix;
    let mut out = Vec::new();
    if gamma > 0.0 {
        out.push(TogglingSegment {
            t_start: 0.0,
            t_end: gamma,
            hamiltonian: -model.h_bath.clone(),
        });
    }
    for s in frame_segments(seq, model, subdivisions)? {
        out.push(TogglingSegment {
            t_start: s.t_start + gamma,
            t_end: s.t_end + gamma,
            hamiltonian: s.hamiltonian,
        });
    }
    Ok(out)
}

/// Named single-qubit gates accepted in configuration files.
pub fn named_gate(name: &str) -> Option<Operator> {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    let m = |v: [(f64, f64); 4]| {
        Operator::from_row_slice(2, 2, &v.map(|(re, im)| c64(re, im)))
    };
    Some(match name {
        "I" | "i" | "identity" => identity(2),
        "X" | "x" => pauli(Axis::X),
        "Y" | "y" => pauli(Axis::Y),
        "Z" | "z" => pauli(Axis::Z),
        "H" | "h" | "hadamard" => m([(h, 0.0), (h, 0.0), (h, 0.0), (-h, 0.0)]),
        "S" | "s" => m([(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (0.0, 1.0)]),
        "T" | "t" => m([(1.0, 0.0), (0.0, 0.0), (0.0, 0.0), (h, h)]),
        _ => return None,
    })
}

/// Gate given by name or by explicit matrix rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GateSpec {
    /// One of `I, X, Y, Z, H, S, T`.
    Named(String),
    /// Explicit unitary as rows of `[re, im]`.
    Matrix(#[serde(with = "serde_rows")] Operator),
}

impl GateSpec {
    /// Resolve to a unitary.
    pub fn resolve(&self) -> Result<Operator> {
        match self {
            Self::Named(n) => named_gate(n)
                .ok_or_else(|| DdError::OutOfRange(format!("unknown gate name '{n}'"))),
            Self::Matrix(m) => Ok(m.clone()),
        }
    }
}

/// Explicit pulse list for custom schedules.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CustomPulses {
    /// System dimension.
    #[serde(default = "two")]
    pub dim_s: usize,
    /// Total duration.
    pub t_total: f64,
    /// Pulses.
    pub pulses: Vec<Pulse>,
}

fn two() -> usize {
    2
}

fn one() -> usize {
    1
}

/// Serializable recipe for a schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSpec {
    /// Named sequence; omit when `custom` is given.
    #[serde(default)]
    pub kind: Option<SequenceKind>,
    /// Explicit pulses.
    #[serde(default)]
    pub custom: Option<CustomPulses>,
    /// Pulse spacing.
    pub tau0: f64,
    /// Pulse width.
    #[serde(default)]
    pub delta: f64,
    /// Concatenation level.
    #[serde(default = "one")]
    pub level: usize,
    /// Optional gate appended after the memory sequence.
    #[serde(default)]
    pub gate: Option<GateSpec>,
}

impl ScheduleSpec {
    /// Build the schedule described by the spec.
    pub fn build(&self) -> Result<PulseSchedule> {
        let base = match (&self.kind, &self.custom) {
            (Some(SequenceKind::Custom), Some(c)) | (None, Some(c)) => {
                PulseSchedule::custom(c.dim_s, self.tau0, c.t_total, c.pulses.clone())?
            }
            (Some(kind), None) => build_sequence(*kind, self.tau0, self.delta)?,
            _ => {
                return Err(DdError::OutOfRange(
                    "give exactly one of 'kind' or 'custom'".into(),
                ))
            }
        };
        let seq = concatenate_schedule(&base, self.level)?;
        match &self.gate {
            Some(g) => append_gate(&seq, &g.resolve()?),
            None => Ok(seq),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::noise_model::build_heisenberg_spin_bath;

    #[test]
    fn universal_product_is_minus_identity_up_to_phase() {
        let s = build_sequence(SequenceKind::Universal, 1.0, 0.0).unwrap();
        assert_eq!(s.n_pulses, 4);
        assert!(s.is_cyclic());
        let bare = pauli(Axis::Z) * pauli(Axis::X) * pauli(Axis::Z) * pauli(Axis::X);
        assert!(max_abs(&(bare + identity(2))) < 1e-15);
    }

    #[test]
    fn delta_must_be_below_tau0() {
        assert!(build_sequence(SequenceKind::Universal, 1.0, 1.0).is_err());
        assert!(build_sequence(SequenceKind::Universal, 1.0, -0.1).is_err());
    }

    #[test]
    fn eulerian_letters() {
        let s = build_sequence(SequenceKind::Eulerian, 1.0, 0.1).unwrap();
        let labels: Vec<&str> = s.pulses.iter().map(|p| p.label.as_str()).collect();
        assert_eq!(labels, ["X", "Z", "X", "Z", "Z", "X", "Z", "X"]);
        assert_eq!(s.t_total, 8.0);
    }

    #[test]
    fn time_symmetric_control_is_palindromic() {
        let s = build_sequence(SequenceKind::TimeSymmetric, 1.0, 0.0).unwrap();
        assert_eq!(s.t_total, 8.0);
        for k in 0..80 {
            let t = 0.05 + 0.1 * k as f64;
            let d = phase_distance(&s.control_unitary(t), &s.control_unitary(8.0 - t));
            assert!(d < 1e-12, "t = {t}");
        }
        assert_eq!(s.symmetry_break, 0.0);
    }

    #[test]
    fn gate_on_time_symmetric_breaks_two_delta() {
        let s = build_sequence(SequenceKind::TimeSymmetric, 1.0, 0.05).unwrap();
        assert!(s.symmetry_break < 1e-12);
        let g = append_gate(&s, &named_gate("H").unwrap()).unwrap();
        assert_eq!(g.n_pulses, 8);
        assert!((g.t_total - 8.0).abs() < 1e-12);
        assert!((g.gamma_prefix - 0.05).abs() < 1e-15);
        assert!((g.symmetry_break - 0.1).abs() < 1e-9);
    }

    #[test]
    fn gate_merges_into_final_universal_pulse() {
        let s = build_sequence(SequenceKind::Universal, 1.0, 0.1).unwrap();
        let gate = named_gate("H").unwrap();
        let g = append_gate(&s, &gate).unwrap();
        assert_eq!(g.n_pulses, 4);
        assert_eq!(g.t_total, 4.0);
        let expect = &gate * s.pulses[3].unitary();
        assert!(phase_distance(&g.pulses[3].unitary(), &expect) < 1e-12);
        let same = append_gate(&s, &identity(2)).unwrap();
        assert_eq!(same.pulses, s.pulses);
    }

    #[test]
    fn concatenation_counts() {
        let s = build_sequence(SequenceKind::Universal, 1.0, 0.0).unwrap();
        let c = concatenate_schedule(&s, 2).unwrap();
        assert_eq!(c.t_total, 16.0);
        assert_eq!(c.n_pulses, 20);
        assert!(c.is_cyclic());
        assert_eq!(concatenate_schedule(&s, 1).unwrap(), s);
        assert!(concatenate_schedule(&s, 5).is_err());
    }

    #[test]
    fn universal_segments_match_pauli_conjugates() {
        let m = build_heisenberg_spin_bath(1, 0.3, 0.2).unwrap();
        let s = build_sequence(SequenceKind::Universal, 1.0, 0.0).unwrap();
        let seg = toggling_segments(&s, &m, DEFAULT_SUBDIVISIONS).unwrap();
        assert_eq!(seg.len(), 4);
        let h = m.hamiltonian();
        for (k, axis) in [None, Some(Axis::X), Some(Axis::Y), Some(Axis::Z)].iter().enumerate() {
            let p = axis.map_or(identity(2), pauli);
            let w = lift(&p, m.dim_b);
            let expect = &w * &h * &w;
            assert!(max_abs(&(&seg[k].hamiltonian - expect)) < 1e-13);
        }
    }
}
