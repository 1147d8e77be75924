//! Prescribed mechanical motion: displacement `u(t)` and velocity `u_dot(t)`.
//!
//! Deterministic variants are closed-form sums of sinusoids. The random
//! variant is Gaussian white noise shaped by a bank of second-order
//! resonators, one per bending mode:
//!
//! ```text
//! u_i'' + (w_i / q_i) u_i' + w_i^2 u_i = gain_i * w_i^2 * n(t)
//! ```
//!
//! A single noise signal `n` drives every mode. It is held constant over each step of a fixed grid and the
//! resonator states are advanced with RK4 on that grid. The simulators
//! co-integrate the same resonator states with the circuit, so motion samples
//! are bit-identical whether read here or inside a simulation on the same grid.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::ode::Rk4;

/// Integration steps per period of the fastest mode used when no grid is given.
pub const DEFAULT_STEPS_PER_PERIOD: f64 = 400.0;

/// Resonator quality factor used when a mode does not set one.
pub const DEFAULT_Q: f64 = 50.0;

/// Minimum normalization window, in periods of the lowest mode.
pub const MIN_NORMALIZE_PERIODS: f64 = 50.0;

/// One sinusoidal component `u_m * sin(2 pi freq t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tone {
    pub u_m: f64,
    pub freq: f64,
    pub phase: f64,
}

impl Tone {
    pub fn new(u_m: f64, freq: f64) -> Self {
        Tone { u_m, freq, phase: 0.0 }
    }

    fn validate(&self) -> Result<()> {
        if !(self.u_m.is_finite() && self.u_m >= 0.0) {
            return Err(Error::InvalidInput(format!("amplitude must be >= 0, got {}", self.u_m)));
        }
        if !(self.freq.is_finite() && self.freq > 0.0) {
            return Err(Error::InvalidInput(format!("frequency must be > 0, got {}", self.freq)));
        }
        if !self.phase.is_finite() {
            return Err(Error::InvalidInput("phase must be finite".into()));
        }
        Ok(())
    }

    #[inline]
    fn eval(&self, t: f64) -> (f64, f64) {
        let w = 2.0 * PI * self.freq;
        let (s, c) = (w * t + self.phase).sin_cos();
        (self.u_m * s, self.u_m * w * c)
    }
}

/// A resonant mode of the host structure for modal-filtered noise.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSpec {
    pub freq: f64,
    pub q_factor: f64,
    pub gain: f64,
}

/// Three bending modes at 56, 334 and 915 Hz with Q = 50 and gains 1, 0.4, 0.15.
pub fn default_beam_modes() -> Vec<ModeSpec> {
    [(56.0, 1.0), (334.0, 0.4), (915.0, 0.15)]
        .into_iter()
        .map(|(freq, gain)| ModeSpec {
            freq,
            q_factor: DEFAULT_Q,
            gain,
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExcitationSpec {
    Harmonic(Tone),
    Multimodal(Vec<Tone>),
    RandomModal {
        seed: u64,
        modes: Vec<ModeSpec>,
        /// Displacement RMS the source is normalized to (m).
        target_rms: f64,
        /// Length of the record, also the normalization window (s).
        duration: f64,
    },
}

impl ExcitationSpec {
    pub fn validate(&self) -> Result<()> {
        match self {
            ExcitationSpec::Harmonic(tone) => tone.validate(),
            ExcitationSpec::Multimodal(tones) => {
                if tones.is_empty() {
                    return Err(Error::InvalidInput(
                        "multimodal excitation needs at least one mode".into(),
                    ));
                }
                tones.iter().try_for_each(Tone::validate)
            }
            ExcitationSpec::RandomModal {
                modes,
                target_rms,
                duration,
                ..
            } => {
                if modes.is_empty() {
                    return Err(Error::InvalidInput("random excitation needs at least one mode".into()));
                }
                for m in modes {
                    if !(m.freq.is_finite() && m.freq > 0.0) {
                        return Err(Error::InvalidInput(format!(
                            "mode frequency must be > 0, got {}",
                            m.freq
                        )));
                    }
                    if !(m.q_factor.is_finite() && m.q_factor > 0.5) {
                        return Err(Error::InvalidInput(format!(
                            "mode q_factor must be > 0.5, got {}",
                            m.q_factor
                        )));
                    }
                    if !(m.gain.is_finite() && m.gain >= 0.0) {
                        return Err(Error::InvalidInput(format!("mode gain must be >= 0, got {}", m.gain)));
                    }
                }
                if !(target_rms.is_finite() && *target_rms > 0.0) {
                    return Err(Error::InvalidInput(format!("target_rms must be > 0, got {target_rms}")));
                }
                if !(duration.is_finite() && *duration > 0.0) {
                    return Err(Error::InvalidInput(format!("duration must be > 0, got {duration}")));
                }
                Ok(())
            }
        }
    }

    fn frequencies(&self) -> Vec<f64> {
        match self {
            ExcitationSpec::Harmonic(t) => vec![t.freq],
            ExcitationSpec::Multimodal(ts) => ts.iter().map(|t| t.freq).collect(),
            ExcitationSpec::RandomModal { modes, .. } => modes.iter().map(|m| m.freq).collect(),
        }
    }

    pub fn highest_frequency(&self) -> f64 {
        self.frequencies().into_iter().fold(0.0, f64::max)
    }

    pub fn lowest_frequency(&self) -> f64 {
        self.frequencies().into_iter().fold(f64::INFINITY, f64::min)
    }

    /// Default integration step: the fastest period over [`DEFAULT_STEPS_PER_PERIOD`].
    pub fn default_step(&self) -> f64 {
        1.0 / (self.highest_frequency() * DEFAULT_STEPS_PER_PERIOD)
    }

    pub fn is_random(&self) -> bool {
        matches!(self, ExcitationSpec::RandomModal { .. })
    }

    pub fn seed(&self) -> Option<u64> {
        match self {
            ExcitationSpec::RandomModal { seed, .. } => Some(*seed),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct ModeCoeffs {
    omega_sq: f64,
    damping: f64,
    drive: f64,
}

/// Resonator bank driving the random variant.
#[derive(Debug, Clone)]
pub(crate) struct ModalBank {
    modes: Vec<ModeCoeffs>,
    seed: u64,
    step: f64,
    /// Multiplies unit two-sided-PSD white noise.
    noise_scale: f64,
}

impl ModalBank {
    fn new(seed: u64, modes: &[ModeSpec], step: f64) -> Self {
        let modes = modes
            .iter()
            .map(|m| {
                let w = 2.0 * PI * m.freq;
                ModeCoeffs {
                    omega_sq: w * w,
                    damping: w / m.q_factor,
                    drive: m.gain * w * w,
                }
            })
            .collect();
        ModalBank {
            modes,
            seed,
            step,
            noise_scale: 1.0,
        }
    }

    pub(crate) fn state_len(&self) -> usize {
        2 * self.modes.len()
    }

    pub(crate) fn step(&self) -> f64 {
        self.step
    }

    pub(crate) fn noise(&self) -> NoiseStream {
        NoiseStream {
            rng: ChaCha8Rng::seed_from_u64(self.seed),
            amplitude: self.noise_scale / self.step.sqrt(),
        }
    }

    /// Resonator derivatives; `y` holds `(u_i, u_dot_i)` pairs, `w[0]` the held
    /// noise shared by all modes.
    #[inline]
    pub(crate) fn derivs(&self, y: &[f64], w: &[f64], dy: &mut [f64]) {
        for (i, m) in self.modes.iter().enumerate() {
            let (u, v) = (y[2 * i], y[2 * i + 1]);
            dy[2 * i] = v;
            dy[2 * i + 1] = -m.damping * v - m.omega_sq * u + m.drive * w[0];
        }
    }

    #[inline]
    pub(crate) fn displacement(y: &[f64]) -> f64 {
        y.iter().step_by(2).sum()
    }

    #[inline]
    pub(crate) fn velocity(y: &[f64]) -> f64 {
        y.iter().skip(1).step_by(2).sum()
    }
}

/// Seeded Gaussian stream, one value per grid step.
#[derive(Debug, Clone)]
pub(crate) struct NoiseStream {
    rng: ChaCha8Rng,
    amplitude: f64,
}

impl NoiseStream {
    pub(crate) fn fill(&mut self, w: &mut [f64]) {
        let z: f64 = StandardNormal.sample(&mut self.rng);
        w[0] = self.amplitude * z;
    }
}

/// Standalone stepping state of a random source.
#[derive(Debug, Clone)]
struct Cursor {
    n: u64,
    y: Vec<f64>,
    w: Vec<f64>,
    noise: NoiseStream,
    rk: Rk4,
    out: Vec<f64>,
}

impl Cursor {
    fn new(bank: &ModalBank) -> Self {
        let len = bank.state_len();
        let mut noise = bank.noise();
        let mut w = vec![0.0; 1];
        noise.fill(&mut w);
        Cursor {
            n: 0,
            y: vec![0.0; len],
            w,
            noise,
            rk: Rk4::new(len),
            out: vec![0.0; len],
        }
    }

    fn advance(&mut self, bank: &ModalBank) {
        let w = &self.w;
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| bank.derivs(y, w, dy);
        self.rk
            .step(&f, self.n as f64 * bank.step, &self.y, bank.step, &mut self.out);
        std::mem::swap(&mut self.y, &mut self.out);
        self.n += 1;
        self.noise.fill(&mut self.w);
    }

    fn partial(&mut self, bank: &ModalBank, tau: f64) -> (f64, f64) {
        let w = &self.w;
        let f = |_t: f64, y: &[f64], dy: &mut [f64]| bank.derivs(y, w, dy);
        self.rk.step(&f, self.n as f64 * bank.step, &self.y, tau, &mut self.out);
        (ModalBank::displacement(&self.out), ModalBank::velocity(&self.out))
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Tones(Vec<Tone>),
    Modal(ModalBank),
}

/// Evaluator of `(u, u_dot)`. Closed-form variants answer any time; the
/// random variant must be queried in nondecreasing time order.
#[derive(Debug, Clone)]
pub struct MotionSource {
    kind: Kind,
    cursor: Option<Cursor>,
}

/// What the simulators need to co-integrate the motion.
pub(crate) enum Drive<'a> {
    Tones(&'a [Tone]),
    Modal(&'a ModalBank),
}

impl Drive<'_> {
    pub(crate) fn state_len(&self) -> usize {
        match self {
            Drive::Tones(_) => 0,
            Drive::Modal(b) => b.state_len(),
        }
    }

    /// `(u, u_dot)` at `t` given the resonator part of the state.
    #[inline]
    pub(crate) fn motion(&self, t: f64, modal: &[f64]) -> (f64, f64) {
        match self {
            Drive::Tones(tones) => tones_eval(tones, t),
            Drive::Modal(_) => (ModalBank::displacement(modal), ModalBank::velocity(modal)),
        }
    }

    #[inline]
    pub(crate) fn velocity(&self, t: f64, modal: &[f64]) -> f64 {
        match self {
            Drive::Tones(tones) => tones_eval(tones, t).1,
            Drive::Modal(_) => ModalBank::velocity(modal),
        }
    }

    #[inline]
    pub(crate) fn derivs(&self, modal: &[f64], w: &[f64], dy: &mut [f64]) {
        if let Drive::Modal(b) = self {
            b.derivs(modal, w, dy);
        }
    }

    pub(crate) fn noise(&self) -> Option<NoiseStream> {
        match self {
            Drive::Tones(_) => None,
            Drive::Modal(b) => Some(b.noise()),
        }
    }

    pub(crate) fn noise_len(&self) -> usize {
        match self {
            Drive::Tones(_) => 0,
            Drive::Modal(_) => 1,
        }
    }
}

#[inline]
fn tones_eval(tones: &[Tone], t: f64) -> (f64, f64) {
    let mut u = 0.0;
    let mut v = 0.0;
    for tone in tones {
        let (a, b) = tone.eval(t);
        u += a;
        v += b;
    }
    (u, v)
}

/// Builds a source on the default grid for random variants.
pub fn build_excitation(spec: &ExcitationSpec) -> Result<MotionSource> {
    spec.validate()?;
    build_excitation_on_grid(spec, spec.default_step())
}

/// Builds a source; `step` is the noise/integration grid of the random variant
/// and is ignored by the closed-form ones.
pub fn build_excitation_on_grid(spec: &ExcitationSpec, step: f64) -> Result<MotionSource> {
    spec.validate()?;
    match spec {
        ExcitationSpec::Harmonic(tone) => Ok(MotionSource::tones(vec![*tone])),
        ExcitationSpec::Multimodal(tones) => Ok(MotionSource::tones(tones.clone())),
        ExcitationSpec::RandomModal {
            seed,
            modes,
            target_rms,
            duration,
        } => {
            if !(step.is_finite() && step > 0.0) {
                return Err(Error::InvalidInput(format!("grid step must be > 0, got {step}")));
            }
            let raw = MotionSource {
                kind: Kind::Modal(ModalBank::new(*seed, modes, step)),
                cursor: None,
            };
            raw.rescaled_to(*target_rms, *duration)
        }
    }
}

impl MotionSource {
    fn tones(tones: Vec<Tone>) -> Self {
        MotionSource {
            kind: Kind::Tones(tones),
            cursor: None,
        }
    }

    pub(crate) fn drive(&self) -> Drive<'_> {
        match &self.kind {
            Kind::Tones(t) => Drive::Tones(t),
            Kind::Modal(b) => Drive::Modal(b),
        }
    }

    pub fn is_random(&self) -> bool {
        matches!(self.kind, Kind::Modal(_))
    }

    /// Grid the random variant is defined on.
    pub fn grid_step(&self) -> Option<f64> {
        match &self.kind {
            Kind::Tones(_) => None,
            Kind::Modal(b) => Some(b.step()),
        }
    }

    fn frequencies(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Tones(t) => t.iter().map(|t| t.freq).collect(),
            Kind::Modal(b) => b.modes.iter().map(|m| m.omega_sq.sqrt() / (2.0 * PI)).collect(),
        }
    }

    pub fn highest_frequency(&self) -> f64 {
        self.frequencies().into_iter().fold(0.0, f64::max)
    }

    pub fn lowest_frequency(&self) -> f64 {
        self.frequencies().into_iter().fold(f64::INFINITY, f64::min)
    }

    pub fn shortest_period(&self) -> f64 {
        1.0 / self.highest_frequency()
    }

    /// Seed of the random variant.
    pub fn seed(&self) -> Option<u64> {
        match &self.kind {
            Kind::Tones(_) => None,
            Kind::Modal(b) => Some(b.seed),
        }
    }

    /// One-line human-readable description.
    pub fn describe(&self) -> String {
        match &self.kind {
            Kind::Tones(tones) => {
                let parts: Vec<String> = tones.iter().map(|t| format!("{:e} m @ {} Hz", t.u_m, t.freq)).collect();
                if parts.len() == 1 {
                    format!("harmonic {}", parts[0])
                } else {
                    format!("multimodal [{}]", parts.join(", "))
                }
            }
            Kind::Modal(b) => {
                let f: Vec<String> = self.frequencies().iter().map(|f| format!("{f:.0}")).collect();
                format!(
                    "random_modal seed {} modes [{}] Hz grid {:e} s",
                    b.seed,
                    f.join(", "),
                    b.step
                )
            }
        }
    }

    /// Rewinds a random source to `t = 0`.
    pub fn reset(&mut self) {
        self.cursor = None;
    }

    /// Displacement and velocity at `t`.
    pub fn evaluate(&mut self, t: f64) -> Result<(f64, f64)> {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidInput(format!("time must be finite and >= 0, got {t}")));
        }
        match &self.kind {
            Kind::Tones(tones) => Ok(tones_eval(tones, t)),
            Kind::Modal(bank) => {
                let cursor = self.cursor.get_or_insert_with(|| Cursor::new(bank));
                let h = bank.step;
                let start = cursor.n as f64 * h;
                if t < start {
                    return Err(Error::ContractViolation(format!(
                        "random source queried at t = {t} s after advancing to {start} s"
                    )));
                }
                while t >= (cursor.n + 1) as f64 * h {
                    cursor.advance(bank);
                }
                let tau = t - cursor.n as f64 * h;
                if tau == 0.0 {
                    Ok((ModalBank::displacement(&cursor.y), ModalBank::velocity(&cursor.y)))
                } else {
                    Ok(cursor.partial(bank, tau))
                }
            }
        }
    }

    /// `count` samples `(t, u, u_dot)` spaced by `step`, starting at `t = 0`.
    /// Works on a rewound copy; for random sources `step` must be a whole
    /// number of grid steps.
    pub fn sample(&self, step: f64, count: usize) -> Result<Vec<(f64, f64, f64)>> {
        if !(step.is_finite() && step > 0.0) {
            return Err(Error::InvalidInput(format!("sample step must be > 0, got {step}")));
        }
        let mut src = self.clone();
        src.reset();
        let mult = match self.grid_step() {
            Some(h) => {
                let m = (step / h).round();
                if m < 1.0 || ((m * h) - step).abs() > 1e-9 * step {
                    return Err(Error::InvalidInput(format!(
                        "sample step {step} s is not a multiple of the random grid {h} s"
                    )));
                }
                Some((h, m as u64))
            }
            None => None,
        };
        (0..count)
            .map(|k| {
                let t = match mult {
                    Some((h, m)) => (k as u64 * m) as f64 * h,
                    None => k as f64 * step,
                };
                src.evaluate(t).map(|(u, v)| (t, u, v))
            })
            .collect()
    }

    /// Displacement RMS over `[0, window]`.
    pub fn rms(&self, window: f64) -> Result<f64> {
        let step = match self.grid_step() {
            Some(h) => h,
            None => self.shortest_period() / 64.0,
        };
        let count = (window / step).round().max(1.0) as usize;
        let samples = self.sample(step, count + 1)?;
        let sum: f64 = samples[1..].iter().map(|s| s.1 * s.1).sum();
        Ok((sum / count as f64).sqrt())
    }

    fn rescaled_to(&self, target_rms: f64, window: f64) -> Result<MotionSource> {
        let rms = self.rms(window)?;
        if !(rms > 0.0) {
            return Err(Error::CannotNormalize("source is identically zero".into()));
        }
        Ok(self.scaled(target_rms / rms))
    }

    /// Linearly rescaled copy whose displacement RMS over `window` is `target_rms`.
    pub fn normalize_rms(&self, target_rms: f64, window: f64) -> Result<MotionSource> {
        if !(target_rms.is_finite() && target_rms > 0.0) {
            return Err(Error::InvalidInput(format!("target_rms must be > 0, got {target_rms}")));
        }
        let min_window = MIN_NORMALIZE_PERIODS / self.lowest_frequency();
        if !(window >= min_window) {
            return Err(Error::InvalidInput(format!(
                "normalization window {window} s is shorter than {MIN_NORMALIZE_PERIODS} periods of the lowest mode ({min_window} s)"
            )));
        }
        self.rescaled_to(target_rms, window)
    }

    /// Copy with every sample multiplied by `k`.
    pub fn scaled(&self, k: f64) -> MotionSource {
        let kind = match &self.kind {
            Kind::Tones(tones) => Kind::Tones(tones.iter().map(|t| Tone { u_m: t.u_m * k, ..*t }).collect()),
            Kind::Modal(b) => Kind::Modal(ModalBank {
                noise_scale: b.noise_scale * k,
                ..b.clone()
            }),
        };
        MotionSource { kind, cursor: None }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn random_spec(seed: u64) -> ExcitationSpec {
        ExcitationSpec::RandomModal {
            seed,
            modes: default_beam_modes(),
            target_rms: 1e-4,
            duration: 1.0,
        }
    }

    #[test]
    fn harmonic_at_origin_and_quarter_period() {
        let spec = ExcitationSpec::Harmonic(Tone::new(1e-3, 56.0));
        let mut src = build_excitation(&spec).unwrap();
        let (u, v) = src.evaluate(0.0).unwrap();
        assert_eq!(u, 0.0);
        assert!((v - 2.0 * PI * 56.0 * 1e-3).abs() < 1e-15);
        let (u, v) = src.evaluate(0.25 / 56.0).unwrap();
        assert!((u - 1e-3).abs() < 1e-15);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn single_mode_multimodal_is_harmonic() {
        let tone = Tone {
            u_m: 7e-4,
            freq: 334.0,
            phase: 0.3,
        };
        let a = build_excitation(&ExcitationSpec::Harmonic(tone)).unwrap();
        let b = build_excitation(&ExcitationSpec::Multimodal(vec![tone])).unwrap();
        let sa = a.sample(1.7e-5, 500).unwrap();
        let sb = b.sample(1.7e-5, 500).unwrap();
        assert_eq!(sa, sb);
    }

    #[test]
    fn superposition_doubles() {
        let tone = Tone::new(1e-3, 56.0);
        let mut one = build_excitation(&ExcitationSpec::Harmonic(tone)).unwrap();
        let mut two = build_excitation(&ExcitationSpec::Multimodal(vec![tone, tone])).unwrap();
        for k in 0..100 {
            let t = k as f64 * 3.1e-4;
            let (u1, v1) = one.evaluate(t).unwrap();
            let (u2, v2) = two.evaluate(t).unwrap();
            assert_eq!(u2, 2.0 * u1);
            assert_eq!(v2, 2.0 * v1);
        }
    }

    #[test]
    fn zero_amplitude_is_still() {
        let mut src = build_excitation(&ExcitationSpec::Harmonic(Tone::new(0.0, 56.0))).unwrap();
        for k in 0..50 {
            assert_eq!(src.evaluate(k as f64 * 1e-3).unwrap(), (0.0, 0.0));
        }
    }

    #[test]
    fn empty_modes_rejected() {
        assert!(matches!(
            build_excitation(&ExcitationSpec::Multimodal(vec![])),
            Err(Error::InvalidInput(_))
        ));
        let spec = ExcitationSpec::RandomModal {
            seed: 1,
            modes: vec![],
            target_rms: 1e-4,
            duration: 1.0,
        };
        assert!(matches!(build_excitation(&spec), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn q_factor_floor() {
        let spec = ExcitationSpec::RandomModal {
            seed: 1,
            modes: vec![ModeSpec {
                freq: 56.0,
                q_factor: 0.5,
                gain: 1.0,
            }],
            target_rms: 1e-4,
            duration: 1.0,
        };
        assert!(build_excitation(&spec).is_err());
    }

    #[test]
    fn random_is_deterministic() {
        let a = build_excitation(&random_spec(42)).unwrap();
        let b = build_excitation(&random_spec(42)).unwrap();
        let h = a.grid_step().unwrap();
        let sa = a.sample(h, 5000).unwrap();
        let sb = b.sample(h, 5000).unwrap();
        assert_eq!(sa, sb);
        let c = build_excitation(&random_spec(43)).unwrap();
        assert_ne!(sa, c.sample(h, 5000).unwrap());
    }

    #[test]
    fn random_rms_hits_target() {
        let src = build_excitation(&random_spec(7)).unwrap();
        let rms = src.rms(1.0).unwrap();
        assert!((rms / 1e-4 - 1.0).abs() < 1e-9, "rms {rms}");
    }

    #[test]
    fn adding_a_mode_keeps_the_noise_sequence() {
        // all modes share one stream, so with a zero-gain extra mode the
        // motion is identical
        let mut modes = default_beam_modes();
        let base = ModalBank::new(9, &modes, 1e-5);
        modes.push(ModeSpec {
            freq: 2000.0,
            q_factor: 50.0,
            gain: 0.0,
        });
        let more = ModalBank::new(9, &modes, 1e-5);
        let (mut n1, mut n2) = (base.noise(), more.noise());
        let (mut w1, mut w2) = ([0.0], [0.0]);
        for _ in 0..100 {
            n1.fill(&mut w1);
            n2.fill(&mut w2);
            assert_eq!(w1, w2);
        }
    }

    #[test]
    fn out_of_order_query_is_rejected() {
        let mut src = build_excitation(&random_spec(1)).unwrap();
        let h = src.grid_step().unwrap();
        src.evaluate(10.0 * h).unwrap();
        // within the current step is fine
        src.evaluate(10.5 * h).unwrap();
        assert!(matches!(src.evaluate(3.0 * h), Err(Error::ContractViolation(_))));
        src.reset();
        assert!(src.evaluate(3.0 * h).is_ok());
    }

    #[test]
    fn normalize_harmonic() {
        let src = build_excitation(&ExcitationSpec::Harmonic(Tone::new(2e-3, 56.0))).unwrap();
        let window = 60.0 / 56.0;
        let n = src.normalize_rms(1e-3, window).unwrap();
        let (_, u_m) = match &n.kind {
            Kind::Tones(t) => (0, t[0].u_m),
            _ => unreachable!(),
        };
        assert!((u_m / (1e-3 * 2f64.sqrt()) - 1.0).abs() < 1e-9);
        assert!((n.rms(window).unwrap() / 1e-3 - 1.0).abs() < 0.01);

        let again = n.normalize_rms(1e-3, window).unwrap();
        let a = n.sample(1e-4, 200).unwrap();
        let b = again.sample(1e-4, 200).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert!((x.1 - y.1).abs() <= 1e-9 * 1e-3);
        }

        let tripled = n.normalize_rms(3e-3, window).unwrap();
        for (x, y) in a.iter().zip(tripled.sample(1e-4, 200).unwrap()) {
            assert!((y.1 - 3.0 * x.1).abs() <= 1e-12);
        }
    }

    #[test]
    fn normalize_errors() {
        let zero = build_excitation(&ExcitationSpec::Harmonic(Tone::new(0.0, 56.0))).unwrap();
        assert!(matches!(zero.normalize_rms(1e-3, 2.0), Err(Error::CannotNormalize(_))));
        let src = build_excitation(&ExcitationSpec::Harmonic(Tone::new(1e-3, 56.0))).unwrap();
        assert!(matches!(src.normalize_rms(1e-3, 0.1), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn random_normalize_is_linear() {
        let src = build_excitation(&random_spec(5)).unwrap();
        let a = src.normalize_rms(2e-4, 1.0).unwrap();
        assert!((a.rms(1.0).unwrap() / 2e-4 - 1.0).abs() < 0.01);
        let h = src.grid_step().unwrap();
        let s0 = src.sample(h, 2000).unwrap();
        let s1 = a.sample(h, 2000).unwrap();
        for (x, y) in s0.iter().zip(&s1) {
            assert!((y.1 - 2.0 * x.1).abs() <= 1e-9 * 1e-4);
        }
    }

    /// Midpoint-rule residual of `u` against `u_dot`, normalized.
    fn midpoint_residual(src: &MotionSource, h: f64, n: usize) -> f64 {
        let mut s = src.clone();
        s.reset();
        let mut worst: f64 = 0.0;
        for k in 0..n {
            let t = k as f64 * h;
            let (u0, _) = s.evaluate(t).unwrap();
            let (_, vm) = s.evaluate(t + 0.5 * h).unwrap();
            let (u1, _) = s.evaluate(t + h).unwrap();
            worst = worst.max((u1 - u0 - h * vm).abs());
        }
        worst
    }

    #[test]
    fn velocity_consistent_with_displacement_closed_form() {
        let spec = ExcitationSpec::Multimodal(vec![Tone::new(1e-3, 56.0), Tone::new(2e-4, 334.0)]);
        let src = build_excitation(&spec).unwrap();
        let h = 2e-5;
        let r1 = midpoint_residual(&src, h, 400);
        let r2 = midpoint_residual(&src, h / 2.0, 800);
        // third order: halving h divides the local residual by ~8
        assert!(r1 / r2 > 6.0 && r1 / r2 < 10.0, "{r1} {r2}");
    }

    #[test]
    fn velocity_consistent_with_displacement_random() {
        let src = build_excitation(&random_spec(3)).unwrap();
        let h = src.grid_step().unwrap();
        let mut s = src.clone();
        let (mut prev_u, mut worst, mut scale) = (0.0, 0.0f64, 0.0f64);
        for k in 0..4000 {
            let t = k as f64 * h;
            let (_, vm) = s.evaluate(t + 0.5 * h).unwrap();
            let (u1, _) = s.evaluate(t + h).unwrap();
            worst = worst.max((u1 - prev_u - h * vm).abs());
            scale = scale.max(u1.abs());
            prev_u = u1;
        }
        assert!(worst < 1e-3 * scale, "{worst} vs {scale}");
    }

    proptest! {
        #[test]
        fn multimodal_is_sum_of_harmonics(
            a in 0.0f64..1e-2, b in 0.0f64..1e-2,
            fa in 1.0f64..2000.0, fb in 1.0f64..2000.0,
            t in 0.0f64..10.0,
        ) {
            let ta = Tone::new(a, fa);
            let tb = Tone { u_m: b, freq: fb, phase: 1.0 };
            let mut sum = build_excitation(&ExcitationSpec::Multimodal(vec![ta, tb])).unwrap();
            let mut ha = build_excitation(&ExcitationSpec::Harmonic(ta)).unwrap();
            let mut hb = build_excitation(&ExcitationSpec::Harmonic(tb)).unwrap();
            let (u, v) = sum.evaluate(t).unwrap();
            let (ua, va) = ha.evaluate(t).unwrap();
            let (ub, vb) = hb.evaluate(t).unwrap();
            prop_assert_eq!(u, ua + ub);
            prop_assert_eq!(v, va + vb);
        }
    }
}
