//! Time-domain hybrid simulation of the insert driving either interface.
//!
//! Both simulators step a fixed grid with RK4. Mode changes (diode
//! conduction, charge extraction) are localized inside a step by bisection
//! on a re-integrated sub-step, so the grid itself never moves and random
//! noise stays aligned with it.

mod sece;
mod standard;

pub use sece::{simulate_sece, Extraction, SeceInterfaceSpec, SeceOutput};
pub use standard::{simulate_standard, StandardInterfaceSpec, StandardLoad};

use crate::error::{Error, Result};
use crate::excitation::{Drive, MotionSource, NoiseStream};
use crate::ode::Rk4;

/// Mode changes tolerated within one grid step before declaring chatter.
pub const MAX_EVENTS_PER_STEP: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimConfig {
    /// Base integration step (s).
    pub dt: f64,
    /// Width of the final bisection bracket for events (s).
    pub event_time_tol: f64,
    /// Simulated time (s).
    pub duration: f64,
    /// Leading fraction of the samples left out of the averages.
    pub settle: f64,
    /// Keep every N-th grid sample in the series; 0 records nothing.
    pub record_decimation: usize,
}

impl SimConfig {
    pub const DEFAULT_SETTLE: f64 = 0.2;
    /// Default event tolerance as a fraction of `dt`.
    pub const DEFAULT_EVENT_TOL_FRACTION: f64 = 1e-5;

    /// Defaults for `motion`: the random grid if it has one, otherwise 400
    /// steps per period of the fastest component.
    pub fn for_motion(motion: &MotionSource, duration: f64) -> Self {
        let dt = motion
            .grid_step()
            .unwrap_or_else(|| motion.shortest_period() / crate::excitation::DEFAULT_STEPS_PER_PERIOD);
        SimConfig {
            dt,
            event_time_tol: dt * Self::DEFAULT_EVENT_TOL_FRACTION,
            duration,
            settle: Self::DEFAULT_SETTLE,
            record_decimation: 1,
        }
    }

    pub fn with_settle(mut self, settle: f64) -> Self {
        self.settle = settle;
        self
    }

    pub fn with_decimation(mut self, record_decimation: usize) -> Self {
        self.record_decimation = record_decimation;
        self
    }

    pub fn with_dt(mut self, dt: f64) -> Self {
        self.event_time_tol = dt * Self::DEFAULT_EVENT_TOL_FRACTION;
        self.dt = dt;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be > 0, got {}", self.dt)));
        }
        if !(self.event_time_tol > 0.0 && self.event_time_tol < self.dt) {
            return Err(Error::InvalidInput(format!(
                "event_time_tol must lie in (0, dt), got {}",
                self.event_time_tol
            )));
        }
        if !(self.duration.is_finite() && self.duration >= self.dt) {
            return Err(Error::InvalidInput(format!(
                "duration must be at least one step, got {}",
                self.duration
            )));
        }
        if !(self.settle >= 0.0 && self.settle < 1.0) {
            return Err(Error::InvalidInput(format!(
                "settle must lie in [0, 1), got {}",
                self.settle
            )));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    fn check_motion(&self, motion: &MotionSource) -> Result<()> {
        if let Some(h) = motion.grid_step() {
            if (self.dt - h).abs() > 1e-9 * h {
                return Err(Error::Configuration(format!(
                    "random excitation is defined on a {h} s grid but dt is {} s",
                    self.dt
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    DiodeOn,
    DiodeOff,
    SeceFire,
}

impl EventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EventKind::DiodeOn => "diode_on",
            EventKind::DiodeOff => "diode_off",
            EventKind::SeceFire => "sece_fire",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Event {
    pub t: f64,
    pub kind: EventKind,
    /// Piezo voltage just before the event.
    pub v_before: f64,
    /// Energy removed from the clamped capacitance (J), zero for diode events.
    pub energy: f64,
}

/// One recorded grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub u: f64,
    pub u_dot: f64,
    pub v_piezo: f64,
    /// Rectifier capacitor voltage (Standard) or output-stage voltage (SECE).
    pub v_rect: f64,
    pub p_load: f64,
    pub p_in: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Averages {
    pub p_in: f64,
    pub p_out: f64,
}

/// Energy flows of a SECE run (J).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnergyBook {
    /// Sum of `c0 v^2 / 2` over extraction events.
    pub extracted: f64,
    /// Energy handed to the output stage.
    pub delivered: f64,
    /// Integrated load dissipation.
    pub load: f64,
    /// Energy left on the output capacitor at the end.
    pub stored: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub series: Vec<Sample>,
    pub events: Vec<Event>,
    pub averages: Averages,
    /// Present for SECE runs.
    pub energy: Option<EnergyBook>,
    /// Time at which averaging starts (s).
    pub settle_time: f64,
}

/// Three-sample local-maximum rule on `|v_piezo|` with a trigger floor.
pub fn detect_extremum(v_prev: f64, v_curr: f64, v_next: f64, trigger_min_v: f64) -> bool {
    v_prev < v_curr && v_curr >= v_next && v_curr >= trigger_min_v
}

/// Bisection for a sign change of `f` on `[t_lo, t_hi]`; the result is within
/// `tol` of the root.
pub fn locate_event<F: FnMut(f64) -> f64>(mut f: F, t_lo: f64, t_hi: f64, tol: f64) -> Result<f64> {
    let (lo, hi) = bracket_root(&mut f, t_lo, t_hi, tol)?;
    Ok(0.5 * (lo + hi))
}

/// Shrinks `[t_lo, t_hi]` around a sign change of `f` until narrower than `tol`.
pub(crate) fn bracket_root<F: FnMut(f64) -> f64>(f: &mut F, t_lo: f64, t_hi: f64, tol: f64) -> Result<(f64, f64)> {
    if !(tol > 0.0) || !(t_lo <= t_hi) {
        return Err(Error::InvalidInput(format!(
            "bad bracket [{t_lo}, {t_hi}] with tolerance {tol}"
        )));
    }
    let f_lo = f(t_lo);
    if f_lo == 0.0 {
        return Ok((t_lo, t_lo));
    }
    let f_hi = f(t_hi);
    if f_hi == 0.0 {
        return Ok((t_hi, t_hi));
    }
    if (f_lo < 0.0) == (f_hi < 0.0) || f_lo.is_nan() || f_hi.is_nan() {
        return Err(Error::BracketViolation { t_lo, t_hi, f_lo, f_hi });
    }
    let lo_negative = f_lo < 0.0;
    let (mut lo, mut hi) = (t_lo, t_hi);
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok((mid, mid));
        }
        if (fm < 0.0) == lo_negative {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok((lo, hi))
}

/// Which step's held noise a sub-step integrates with.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum NoiseSlot {
    Current,
    Previous,
}

/// Circuit states followed by the excitation's resonator states, advanced together.
pub(crate) struct Plant<'a> {
    drive: Drive<'a>,
    circuit_len: usize,
    rk: Rk4,
    noise: Option<NoiseStream>,
    w_prev: Vec<f64>,
    w_cur: Vec<f64>,
}

impl<'a> Plant<'a> {
    pub(crate) fn new(motion: &'a MotionSource, circuit_len: usize) -> Self {
        let drive = motion.drive();
        let len = circuit_len + drive.state_len();
        let noise = drive.noise();
        let nw = drive.noise_len();
        Plant {
            drive,
            circuit_len,
            rk: Rk4::new(len),
            noise,
            w_prev: vec![0.0; nw],
            w_cur: vec![0.0; nw],
        }
    }

    pub(crate) fn state_len(&self) -> usize {
        self.circuit_len + self.drive.state_len()
    }

    /// Draws the noise held over the next grid step.
    pub(crate) fn next_noise(&mut self) {
        if let Some(noise) = self.noise.as_mut() {
            std::mem::swap(&mut self.w_prev, &mut self.w_cur);
            noise.fill(&mut self.w_cur);
        }
    }

    #[inline]
    pub(crate) fn motion(&self, t: f64, y: &[f64]) -> (f64, f64) {
        self.drive.motion(t, &y[self.circuit_len..])
    }

    /// One RK4 sub-step; `circuit(u_dot, y_circuit, dy_circuit)`.
    #[inline]
    pub(crate) fn step<C>(&mut self, circuit: &C, slot: NoiseSlot, t: f64, y: &[f64], h: f64, out: &mut [f64])
    where
        C: Fn(f64, &[f64], &mut [f64]),
    {
        let w: &[f64] = match slot {
            NoiseSlot::Current => &self.w_cur,
            NoiseSlot::Previous => &self.w_prev,
        };
        let drive = &self.drive;
        let nc = self.circuit_len;
        let f = |t: f64, y: &[f64], dy: &mut [f64]| {
            let (yc, ym) = y.split_at(nc);
            let (dc, dm) = dy.split_at_mut(nc);
            circuit(drive.velocity(t, ym), yc, dc);
            drive.derivs(ym, w, dm);
        };
        self.rk.step(&f, t, y, h, out);
    }
}

/// Running means over the post-settle samples, matching
/// [`crate::analysis::average_power`] on the samples `1..=steps`.
#[derive(Debug, Clone)]
pub(crate) struct Averager {
    first: usize,
    count: usize,
    sum_load: f64,
    sum_in: f64,
}

impl Averager {
    pub(crate) fn new(steps: usize, settle: f64) -> Self {
        Averager {
            first: (settle * steps as f64).floor() as usize,
            count: 0,
            sum_load: 0.0,
            sum_in: 0.0,
        }
    }

    /// `k` is the 1-based grid index of the sample.
    pub(crate) fn push(&mut self, k: usize, p_load: f64, p_in: f64) {
        if k > self.first {
            self.count += 1;
            self.sum_load += p_load;
            self.sum_in += p_in;
        }
    }

    pub(crate) fn averages(&self) -> Averages {
        let n = self.count.max(1) as f64;
        Averages {
            p_in: self.sum_in / n,
            p_out: self.sum_load / n,
        }
    }

    pub(crate) fn settle_time(&self, dt: f64) -> f64 {
        self.first as f64 * dt
    }
}

pub(crate) struct Recorder {
    decimation: usize,
    pub(crate) series: Vec<Sample>,
}

impl Recorder {
    pub(crate) fn new(decimation: usize, steps: usize) -> Self {
        let cap = steps.checked_div(decimation).map_or(0, |n| n + 1);
        Recorder {
            decimation,
            series: Vec::with_capacity(cap.min(1 << 24)),
        }
    }

    #[inline]
    pub(crate) fn wants(&self, k: usize) -> bool {
        self.decimation != 0 && k.is_multiple_of(self.decimation)
    }

    pub(crate) fn push(&mut self, s: Sample) {
        self.series.push(s);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extremum_rule() {
        assert!(detect_extremum(1.0, 3.0, 2.0, 0.0));
        assert!(!detect_extremum(1.0, 2.0, 3.0, 0.0));
        assert!(!detect_extremum(1.0, 3.0, 2.0, 5.0));
        assert!(detect_extremum(1.0, 3.0, 3.0, 0.0));
        assert!(!detect_extremum(3.0, 3.0, 2.0, 0.0));
    }

    #[test]
    fn linear_root() {
        let t = locate_event(|t| t - 0.5, 0.0, 1.0, 1e-6).unwrap();
        assert!((t - 0.5).abs() <= 1e-6);
    }

    #[test]
    fn narrower_bracket_needs_fewer_evaluations() {
        let mut wide = 0;
        let a = locate_event(
            |t| {
                wide += 1;
                t - 0.4321
            },
            0.0,
            1.0,
            1e-6,
        )
        .unwrap();
        let mut narrow = 0;
        let b = locate_event(
            |t| {
                narrow += 1;
                t - 0.4321
            },
            0.43,
            0.44,
            1e-6,
        )
        .unwrap();
        assert!((a - 0.4321).abs() <= 1e-6 && (b - 0.4321).abs() <= 1e-6);
        assert!(narrow < wide, "{narrow} vs {wide}");
    }

    #[test]
    fn same_sign_is_a_bracket_violation() {
        let r = locate_event(|t| 1.0 + t, 0.0, 1.0, 1e-6);
        assert!(matches!(r, Err(Error::BracketViolation { .. })));
    }

    #[test]
    fn decreasing_function_and_exact_roots() {
        let t = locate_event(|t| 0.3 - t, 0.0, 1.0, 1e-9).unwrap();
        assert!((t - 0.3).abs() <= 1e-9);
        assert_eq!(locate_event(|t| t, 0.0, 1.0, 1e-9).unwrap(), 0.0);
    }

    #[test]
    fn config_validation() {
        let good = SimConfig {
            dt: 1e-5,
            event_time_tol: 1e-10,
            duration: 1.0,
            settle: 0.2,
            record_decimation: 1,
        };
        assert!(good.validate().is_ok());
        assert!(SimConfig { dt: 0.0, ..good }.validate().is_err());
        assert!(SimConfig {
            event_time_tol: 2e-5,
            ..good
        }
        .validate()
        .is_err());
        assert!(SimConfig { settle: 1.0, ..good }.validate().is_err());
        assert_eq!(good.steps(), 100_000);
    }
}
