//! Driven two-level open-system dynamics.
//!
//! The generator is the standard driven-qubit Lindblad form
//!
//! ```text
//! dρ/dt = -i[(ω/2)σx, ρ] + γ1·D[σ−]ρ + (Γφ/2)·D[σz]ρ,   Γφ = γ2 − γ1/2
//! ```
//!
//! with `γ1 = 1/T1` and `γ2 = 1/T2`. An infinite lifetime is stored as a zero
//! rate. Trajectories are produced by fixed-step RK4 on a grid anchored at
//! each drive-segment start, so no step ever straddles a switch.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default internal RK4 step in μs.
pub const DEFAULT_DT: f64 = 1e-3;

/// Slack allowed on `T2 ≤ 2·T1` to absorb rounding in `1/T` conversions.
const RATE_SLACK: f64 = 1e-12;

/// Drive and decoherence parameters of one constant-Hamiltonian segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "PhysicsRepr", into = "PhysicsRepr")]
pub struct QubitPhysics {
    omega: f64,
    gamma1: f64,
    gamma2: f64,
}

#[derive(Serialize, Deserialize)]
struct PhysicsRepr {
    omega_rad_per_us: f64,
    relaxation_rate_per_us: f64,
    dephasing_rate_per_us: f64,
}

impl TryFrom<PhysicsRepr> for QubitPhysics {
    type Error = Error;

    fn try_from(r: PhysicsRepr) -> Result<Self> {
        QubitPhysics::from_rates(
            r.omega_rad_per_us,
            r.relaxation_rate_per_us,
            r.dephasing_rate_per_us,
        )
    }
}

impl From<QubitPhysics> for PhysicsRepr {
    fn from(p: QubitPhysics) -> Self {
        PhysicsRepr {
            omega_rad_per_us: p.omega,
            relaxation_rate_per_us: p.gamma1,
            dephasing_rate_per_us: p.gamma2,
        }
    }
}

fn rate_from_time(name: &str, t: f64) -> Result<f64> {
    if t.is_infinite() && t > 0.0 {
        Ok(0.0)
    } else if t.is_finite() && t > 0.0 {
        Ok(1.0 / t)
    } else {
        Err(Error::InvalidPhysics(format!(
            "{name} must be positive or +inf, got {t}"
        )))
    }
}

impl QubitPhysics {
    /// Builds physics from lifetimes in μs; `f64::INFINITY` disables a channel.
    pub fn new(omega: f64, t1: f64, t2: f64) -> Result<Self> {
        let gamma1 = rate_from_time("T1", t1)?;
        let gamma2 = rate_from_time("T2", t2)?;
        Self::from_rates(omega, gamma1, gamma2)
    }

    pub fn from_rates(omega: f64, gamma1: f64, gamma2: f64) -> Result<Self> {
        if !(omega.is_finite() && omega >= 0.0) {
            return Err(Error::InvalidPhysics(format!(
                "drive frequency must be finite and >= 0, got {omega}"
            )));
        }
        for (name, r) in [("relaxation rate", gamma1), ("dephasing rate", gamma2)] {
            if !(r.is_finite() && r >= 0.0) {
                return Err(Error::InvalidPhysics(format!(
                    "{name} must be finite and >= 0, got {r}"
                )));
            }
        }
        if gamma2 < 0.5 * gamma1 - RATE_SLACK * gamma1.max(1.0) {
            return Err(Error::InvalidPhysics(format!(
                "T2 = {} exceeds 2*T1 = {}",
                1.0 / gamma2,
                2.0 / gamma1
            )));
        }
        Ok(QubitPhysics {
            omega,
            gamma1,
            gamma2,
        })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn relaxation_rate(&self) -> f64 {
        self.gamma1
    }

    pub fn dephasing_rate(&self) -> f64 {
        self.gamma2
    }

    pub fn t1(&self) -> f64 {
        1.0 / self.gamma1
    }

    pub fn t2(&self) -> f64 {
        1.0 / self.gamma2
    }

    /// Pure-dephasing rate `Γφ = 1/T2 − 1/(2·T1)`, clamped at zero.
    pub fn pure_dephasing_rate(&self) -> f64 {
        (self.gamma2 - 0.5 * self.gamma1).max(0.0)
    }
}

/// One constant-physics interval `[start, end)` of a drive schedule.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriveSegment {
    pub start: f64,
    pub end: f64,
    pub physics: QubitPhysics,
}

/// Piecewise-constant drive covering `[0, total_span]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScheduleRepr", into = "ScheduleRepr")]
pub struct DriveSchedule {
    segments: Vec<DriveSegment>,
}

#[derive(Serialize, Deserialize)]
struct ScheduleRepr {
    segments: Vec<DriveSegment>,
}

impl TryFrom<ScheduleRepr> for DriveSchedule {
    type Error = Error;

    fn try_from(r: ScheduleRepr) -> Result<Self> {
        DriveSchedule::new(r.segments)
    }
}

impl From<DriveSchedule> for ScheduleRepr {
    fn from(s: DriveSchedule) -> Self {
        ScheduleRepr {
            segments: s.segments,
        }
    }
}

impl DriveSchedule {
    /// Segments must start at 0, be contiguous, and have strictly increasing
    /// boundaries.
    pub fn new(segments: Vec<DriveSegment>) -> Result<Self> {
        let first = segments
            .first()
            .ok_or_else(|| Error::InvalidSchedule("no segments".into()))?;
        if first.start != 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "first segment starts at {} instead of 0",
                first.start
            )));
        }
        for (i, seg) in segments.iter().enumerate() {
            if !(seg.end.is_finite() && seg.end > seg.start) {
                return Err(Error::InvalidSchedule(format!(
                    "segment {i} has non-increasing bounds [{}, {}]",
                    seg.start, seg.end
                )));
            }
            if i > 0 && seg.start != segments[i - 1].end {
                return Err(Error::InvalidSchedule(format!(
                    "gap or overlap between segment {} (end {}) and segment {i} (start {})",
                    i - 1,
                    segments[i - 1].end,
                    seg.start
                )));
            }
        }
        Ok(DriveSchedule { segments })
    }

    pub fn single(physics: QubitPhysics, span: f64) -> Result<Self> {
        Self::new(vec![DriveSegment {
            start: 0.0,
            end: span,
            physics,
        }])
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn total_span(&self) -> f64 {
        self.segments.last().map_or(0.0, |s| s.end)
    }

    /// Interior switch times, in order.
    pub fn boundaries(&self) -> Vec<f64> {
        self.segments[1..].iter().map(|s| s.start).collect()
    }

    /// Drops every segment after `end` and cuts the last one at `end`.
    pub fn truncated(&self, end: f64) -> Result<Self> {
        let mut out = Vec::new();
        for seg in &self.segments {
            if seg.start >= end {
                break;
            }
            out.push(DriveSegment {
                end: seg.end.min(end),
                ..*seg
            });
        }
        Self::new(out)
    }
}

/// Single-qubit density matrix `[[p0, ρ01], [ρ01*, p1]]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DensityMatrix2 {
    pub p0: f64,
    pub p1: f64,
    pub re01: f64,
    pub im01: f64,
}

impl DensityMatrix2 {
    pub const fn ground() -> Self {
        DensityMatrix2 {
            p0: 1.0,
            p1: 0.0,
            re01: 0.0,
            im01: 0.0,
        }
    }

    pub const fn excited() -> Self {
        DensityMatrix2 {
            p0: 0.0,
            p1: 1.0,
            re01: 0.0,
            im01: 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        self.p0 + self.p1
    }

    pub fn purity(&self) -> f64 {
        self.p0 * self.p0 + self.p1 * self.p1 + 2.0 * (self.re01 * self.re01 + self.im01 * self.im01)
    }

    pub fn validate(&self) -> Result<()> {
        let tol = 1e-9;
        let finite = [self.p0, self.p1, self.re01, self.im01]
            .iter()
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::InvalidInput("density matrix has non-finite entries".into()));
        }
        if (self.trace() - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "density matrix trace {} != 1",
                self.trace()
            )));
        }
        for p in [self.p0, self.p1] {
            if !(-tol..=1.0 + tol).contains(&p) {
                return Err(Error::InvalidInput(format!("population {p} outside [0, 1]")));
            }
        }
        if self.purity() > 1.0 + 1e-7 {
            return Err(Error::InvalidInput(format!(
                "purity {} exceeds 1",
                self.purity()
            )));
        }
        Ok(())
    }

    #[inline]
    fn axpy(&self, h: f64, d: &DensityMatrix2) -> DensityMatrix2 {
        DensityMatrix2 {
            p0: self.p0 + h * d.p0,
            p1: self.p1 + h * d.p1,
            re01: self.re01 + h * d.re01,
            im01: self.im01 + h * d.im01,
        }
    }
}

/// Time derivative of `rho` under `phys`.
pub fn lindblad_rhs(rho: &DensityMatrix2, phys: &QubitPhysics) -> DensityMatrix2 {
    let drive = phys.omega * rho.im01;
    let decay = phys.gamma1 * rho.p1;
    // off-diagonal decay: γ1/2 from relaxation plus Γφ from dephasing = γ2
    let coherence_rate = 0.5 * phys.gamma1 + phys.pure_dephasing_rate();
    DensityMatrix2 {
        p0: decay - drive,
        p1: drive - decay,
        re01: -coherence_rate * rho.re01,
        im01: 0.5 * phys.omega * (rho.p0 - rho.p1) - coherence_rate * rho.im01,
    }
}

/// One classical RK4 step of length `h`.
pub fn rk4_step(rho: &DensityMatrix2, phys: &QubitPhysics, h: f64) -> DensityMatrix2 {
    let k1 = lindblad_rhs(rho, phys);
    let k2 = lindblad_rhs(&rho.axpy(0.5 * h, &k1), phys);
    let k3 = lindblad_rhs(&rho.axpy(0.5 * h, &k2), phys);
    let k4 = lindblad_rhs(&rho.axpy(h, &k3), phys);
    let sixth = h / 6.0;
    DensityMatrix2 {
        p0: rho.p0 + sixth * (k1.p0 + 2.0 * k2.p0 + 2.0 * k3.p0 + k4.p0),
        p1: rho.p1 + sixth * (k1.p1 + 2.0 * k2.p1 + 2.0 * k3.p1 + k4.p1),
        re01: rho.re01 + sixth * (k1.re01 + 2.0 * k2.re01 + 2.0 * k3.re01 + k4.re01),
        im01: rho.im01 + sixth * (k1.im01 + 2.0 * k2.im01 + 2.0 * k3.im01 + k4.im01),
    }
}

/// Uniform step grid over one segment: `n` steps of length `h ≤ dt`.
#[derive(Debug, Clone, Copy)]
struct SegmentGrid {
    start: f64,
    h: f64,
    n: usize,
}

impl SegmentGrid {
    fn new(seg: &DriveSegment, dt: f64) -> Self {
        let len = seg.end - seg.start;
        let n = ((len / dt) - 1e-9).ceil().max(1.0) as usize;
        SegmentGrid {
            start: seg.start,
            h: len / n as f64,
            n,
        }
    }

    #[inline]
    fn time(&self, k: usize) -> f64 {
        self.start + k as f64 * self.h
    }
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("integration step must be > 0, got {dt}")))
    }
}

/// Full density-matrix states at each requested time.
///
/// Within each segment the main state advances on that segment's grid; a
/// requested time between grid points is reached by one extra partial RK4 step
/// from the preceding grid point, leaving the main state untouched.
pub fn integrate_states(
    schedule: &DriveSchedule,
    rho0: &DensityMatrix2,
    times: &[f64],
    dt: f64,
) -> Result<Vec<DensityMatrix2>> {
    check_dt(dt)?;
    rho0.validate()?;
    let span = schedule.total_span();
    for (i, &t) in times.iter().enumerate() {
        if !(0.0..=span).contains(&t) {
            return Err(Error::InvalidInput(format!(
                "time {t} at index {i} outside [0, {span}]"
            )));
        }
        if i > 0 && t < times[i - 1] {
            return Err(Error::InvalidInput(format!(
                "times not sorted at index {i} ({} > {t})",
                times[i - 1]
            )));
        }
    }

    let segments = schedule.segments();
    let mut out = Vec::with_capacity(times.len());
    let mut seg_idx = 0;
    let mut grid = SegmentGrid::new(&segments[0], dt);
    let mut state = *rho0;
    let mut k = 0usize;

    for &t in times {
        // advance to the segment containing t; the last segment owns t == span
        while seg_idx + 1 < segments.len() && t >= segments[seg_idx + 1].start {
            let phys = segments[seg_idx].physics;
            while k < grid.n {
                state = rk4_step(&state, &phys, grid.h);
                k += 1;
            }
            seg_idx += 1;
            grid = SegmentGrid::new(&segments[seg_idx], dt);
            k = 0;
        }
        let phys = segments[seg_idx].physics;

        let mut target = (((t - grid.start) / grid.h).floor().max(0.0) as usize).min(grid.n);
        if grid.time(target) > t && target > 0 {
            target -= 1;
        }
        while k < target {
            state = rk4_step(&state, &phys, grid.h);
            k += 1;
        }
        let rem = t - grid.time(k);
        if rem > 0.0 {
            out.push(rk4_step(&state, &phys, rem));
        } else {
            out.push(state);
        }
    }
    Ok(out)
}

/// Excited-state population `P(|1⟩)` at each requested time.
pub fn integrate(
    schedule: &DriveSchedule,
    rho0: &DensityMatrix2,
    times: &[f64],
    dt: f64,
) -> Result<Vec<f64>> {
    Ok(integrate_states(schedule, rho0, times, dt)?
        .into_iter()
        .map(|s| s.p1)
        .collect())
}

/// State at the end of the schedule.
pub fn evolve(schedule: &DriveSchedule, rho0: &DensityMatrix2, dt: f64) -> Result<DensityMatrix2> {
    let span = schedule.total_span();
    Ok(integrate_states(schedule, rho0, &[span], dt)?[0])
}

/// Benchmark regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, PartialOrd, Ord)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Rabi,
    Lindblad,
    Mixed,
}

impl Regime {
    pub const ALL: [Regime; 3] = [Regime::Rabi, Regime::Lindblad, Regime::Mixed];

    pub fn as_str(self) -> &'static str {
        match self {
            Regime::Rabi => "rabi",
            Regime::Lindblad => "lindblad",
            Regime::Mixed => "mixed",
        }
    }
}

impl fmt::Display for Regime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rabi" => Ok(Regime::Rabi),
            "lindblad" => Ok(Regime::Lindblad),
            "mixed" => Ok(Regime::Mixed),
            other => Err(Error::InvalidInput(format!(
                "unknown regime '{other}' (expected one of: rabi, lindblad, mixed)"
            ))),
        }
    }
}

/// Drive amplitudes of the mixed regime's strong-drive and weak-probe phases.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedDrive {
    pub strong_omega: f64,
    pub weak_omega: f64,
}

impl Default for MixedDrive {
    fn default() -> Self {
        MixedDrive {
            strong_omega: 2.5,
            weak_omega: 0.6,
        }
    }
}

/// Switch times of the mixed regime (drive → free decay → probe).
pub const MIXED_SWITCHES: [f64; 2] = [4.0, 7.0];

pub fn make_regime_schedule(regime: Regime) -> DriveSchedule {
    make_regime_schedule_with(regime, &MixedDrive::default())
        .expect("preset schedules are valid")
}

pub fn make_regime_schedule_with(regime: Regime, mixed: &MixedDrive) -> Result<DriveSchedule> {
    match regime {
        Regime::Rabi => {
            let omega = 2.0 * std::f64::consts::PI * 1.25;
            DriveSchedule::single(QubitPhysics::new(omega, 12.0, 15.0)?, 8.0)
        }
        Regime::Lindblad => DriveSchedule::single(QubitPhysics::new(2.0, 10.0, 8.0)?, 5.0),
        Regime::Mixed => {
            let [a, b] = MIXED_SWITCHES;
            let phase = |start, end, omega| -> Result<DriveSegment> {
                Ok(DriveSegment {
                    start,
                    end,
                    physics: QubitPhysics::new(omega, 6.0, 4.0)?,
                })
            };
            DriveSchedule::new(vec![
                phase(0.0, a, mixed.strong_omega)?,
                phase(a, b, 0.0)?,
                phase(b, 10.0, mixed.weak_omega)?,
            ])
        }
    }
}
