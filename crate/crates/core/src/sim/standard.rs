//! Diode bridge + smoothing capacitor ("Standard" interface).
//!
//! State: `[v_piezo, v_rect]` followed by the excitation's resonator states.
//!
//! Blocked: `c0 v' = alpha u' - v / r_leak`, `c_r v_rect' = -v_rect / r_load`.
//! Conducting with polarity `s`: `v = s (v_rect + 2 v_d)` and
//! `(c0 + c_r) v_rect' = s alpha u' - |v| / r_leak - v_rect / r_load`,
//! until the bridge current reaches zero.

use crate::error::{Error, Result};
use crate::excitation::MotionSource;
use crate::lumped::PiezoParams;

use super::{
    bracket_root, Averager, Event, EventKind, NoiseSlot, Plant, Recorder, Sample, SimConfig, SimResult,
    MAX_EVENTS_PER_STEP,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StandardLoad {
    Resistive {
        r_load: f64,
    },
    /// Ideal reservoir held at `v_load` (battery or regulated converter input).
    ConstantVoltage {
        v_load: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StandardInterfaceSpec {
    /// Smoothing capacitance (F).
    pub c_r: f64,
    /// Forward drop of each diode (V).
    pub diode_drop: f64,
    pub load: StandardLoad,
}

impl StandardInterfaceSpec {
    pub fn resistive(c_r: f64, r_load: f64) -> Self {
        StandardInterfaceSpec {
            c_r,
            diode_drop: 0.0,
            load: StandardLoad::Resistive { r_load },
        }
    }

    pub fn with_load(mut self, load: StandardLoad) -> Self {
        self.load = load;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.c_r.is_finite() && self.c_r > 0.0) {
            return Err(Error::InvalidInput(format!("c_r must be > 0, got {}", self.c_r)));
        }
        if !(self.diode_drop.is_finite() && self.diode_drop >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "diode_drop must be >= 0, got {}",
                self.diode_drop
            )));
        }
        match self.load {
            StandardLoad::Resistive { r_load } if !(r_load > 0.0) => {
                Err(Error::InvalidInput(format!("r_load must be > 0, got {r_load}")))
            }
            StandardLoad::ConstantVoltage { v_load } if !(v_load.is_finite() && v_load >= 0.0) => {
                Err(Error::InvalidInput(format!("v_load must be >= 0, got {v_load}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Mode {
    Blocked,
    /// Bridge conducting with the given polarity (+1 or -1).
    Conducting(f64),
}

struct Bridge {
    alpha: f64,
    c0: f64,
    c_r: f64,
    g_leak: f64,
    g_load: f64,
    drop2: f64,
    fixed_v: Option<f64>,
}

impl Bridge {
    #[inline]
    fn deriv(&self, mode: Mode, u_dot: f64, y: &[f64], dy: &mut [f64]) {
        match mode {
            Mode::Blocked => {
                dy[0] = (self.alpha * u_dot - y[0] * self.g_leak) / self.c0;
                dy[1] = match self.fixed_v {
                    Some(_) => 0.0,
                    None => -y[1] * self.g_load / self.c_r,
                };
            }
            Mode::Conducting(s) => match self.fixed_v {
                Some(_) => {
                    dy[0] = 0.0;
                    dy[1] = 0.0;
                }
                None => {
                    let dv =
                        (s * self.alpha * u_dot - s * y[0] * self.g_leak - y[1] * self.g_load) / (self.c0 + self.c_r);
                    dy[0] = s * dv;
                    dy[1] = dv;
                }
            },
        }
    }

    /// Current leaving the piezo into the bridge (A), nonnegative while conducting.
    #[inline]
    fn bridge_current(&self, mode: Mode, u_dot: f64, y: &[f64]) -> f64 {
        match mode {
            Mode::Blocked => 0.0,
            Mode::Conducting(s) => {
                let source = s * self.alpha * u_dot - s * y[0] * self.g_leak;
                match self.fixed_v {
                    Some(_) => source,
                    None => {
                        let dv = (source - y[1] * self.g_load) / (self.c0 + self.c_r);
                        self.c_r * dv + y[1] * self.g_load
                    }
                }
            }
        }
    }

    #[inline]
    fn threshold(&self, y: &[f64]) -> f64 {
        y[1] + self.drop2
    }

    /// Positive once the mode's exit condition has been crossed.
    #[inline]
    fn exit_indicator(&self, mode: Mode, u_dot: f64, y: &[f64]) -> f64 {
        match mode {
            Mode::Blocked => y[0].abs() - self.threshold(y),
            Mode::Conducting(_) => -self.bridge_current(mode, u_dot, y),
        }
    }

    /// Snaps the voltages onto the conduction constraint, conserving charge.
    fn enter_conduction(&self, s: f64, y: &mut [f64]) {
        match self.fixed_v {
            Some(v) => y[0] = s * (v + self.drop2),
            None => {
                let excess = s * y[0] - self.threshold(y);
                let dq = excess / (1.0 / self.c0 + 1.0 / self.c_r);
                y[1] += dq / self.c_r;
                y[0] = s * self.threshold(y);
            }
        }
    }

    fn load_power(&self, mode: Mode, u_dot: f64, y: &[f64]) -> f64 {
        match self.fixed_v {
            Some(v) => v * self.bridge_current(mode, u_dot, y),
            None => y[1] * y[1] * self.g_load,
        }
    }
}

/// Simulates the insert feeding a diode bridge and smoothing capacitor.
pub fn simulate_standard(
    piezo: &PiezoParams,
    iface: &StandardInterfaceSpec,
    motion: &MotionSource,
    cfg: &SimConfig,
) -> Result<SimResult> {
    piezo.validate()?;
    iface.validate()?;
    cfg.validate()?;
    cfg.check_motion(motion)?;

    let (g_load, fixed_v) = match iface.load {
        StandardLoad::Resistive { r_load } => (if r_load.is_infinite() { 0.0 } else { 1.0 / r_load }, None),
        StandardLoad::ConstantVoltage { v_load } => (0.0, Some(v_load)),
    };
    let bridge = Bridge {
        alpha: piezo.alpha,
        c0: piezo.c0,
        c_r: iface.c_r,
        g_leak: piezo.leak_conductance(),
        g_load,
        drop2: 2.0 * iface.diode_drop,
        fixed_v,
    };

    let mut plant = Plant::new(motion, 2);
    let len = plant.state_len();
    let steps = cfg.steps();
    let dt = cfg.dt;

    let mut y = vec![0.0; len];
    y[1] = fixed_v.unwrap_or(0.0);
    let mut y_try = vec![0.0; len];
    let mut mode = Mode::Blocked;
    let mut events = Vec::new();
    let mut averager = Averager::new(steps, cfg.settle);
    let mut recorder = Recorder::new(cfg.record_decimation, steps);

    plant.next_noise();

    // Conduction may be due right at t = 0 (ideal diodes, empty capacitors).
    {
        let (_, u_dot) = plant.motion(0.0, &y);
        let thr = bridge.threshold(&y);
        for s in [1.0, -1.0] {
            if s * y[0] >= thr && s * (piezo.alpha * u_dot - y[0] * bridge.g_leak) > 0.0 {
                events.push(Event {
                    t: 0.0,
                    kind: EventKind::DiodeOn,
                    v_before: y[0],
                    energy: 0.0,
                });
                bridge.enter_conduction(s, &mut y);
                mode = Mode::Conducting(s);
                break;
            }
        }
    }

    let sample = |plant: &Plant, mode: Mode, t: f64, y: &[f64]| {
        let (u, u_dot) = plant.motion(t, y);
        let i_b = bridge.bridge_current(mode, u_dot, y);
        Sample {
            t,
            u,
            u_dot,
            v_piezo: y[0],
            v_rect: y[1],
            p_load: bridge.load_power(mode, u_dot, y),
            p_in: y[0].abs() * i_b,
        }
    };

    if recorder.wants(0) {
        recorder.push(sample(&plant, mode, 0.0, &y));
    }

    for n in 0..steps {
        let t_end = (n + 1) as f64 * dt;
        let mut t = n as f64 * dt;
        let mut transitions = 0;
        loop {
            let h = t_end - t;
            if h <= 0.0 {
                break;
            }
            let circuit = |u_dot: f64, yc: &[f64], dc: &mut [f64]| bridge.deriv(mode, u_dot, yc, dc);
            plant.step(&circuit, NoiseSlot::Current, t, &y, h, &mut y_try);
            let (_, u_dot_end) = plant.motion(t_end, &y_try);
            if bridge.exit_indicator(mode, u_dot_end, &y_try) <= 0.0 {
                std::mem::swap(&mut y, &mut y_try);
                if let Mode::Conducting(s) = mode {
                    y[0] = s * bridge.threshold(&y);
                }
                break;
            }

            transitions += 1;
            if transitions > MAX_EVENTS_PER_STEP {
                return Err(Error::IntegrationFault {
                    t,
                    reason: format!("more than {MAX_EVENTS_PER_STEP} diode transitions within one step; reduce dt"),
                });
            }
            let mut indicator = |tau: f64| {
                if tau == 0.0 {
                    // the mode is consistent at the start of the sub-step
                    return -1.0;
                }
                plant.step(&circuit, NoiseSlot::Current, t, &y, tau, &mut y_try);
                let (_, u_dot) = plant.motion(t + tau, &y_try);
                bridge.exit_indicator(mode, u_dot, &y_try)
            };
            let (_, tau) = bracket_root(&mut indicator, 0.0, h, cfg.event_time_tol)?;
            plant.step(&circuit, NoiseSlot::Current, t, &y, tau, &mut y_try);
            std::mem::swap(&mut y, &mut y_try);
            t += tau;
            let v_before = y[0];
            mode = match mode {
                Mode::Blocked => {
                    let s = if y[0] >= 0.0 { 1.0 } else { -1.0 };
                    bridge.enter_conduction(s, &mut y);
                    events.push(Event {
                        t,
                        kind: EventKind::DiodeOn,
                        v_before,
                        energy: 0.0,
                    });
                    Mode::Conducting(s)
                }
                Mode::Conducting(_) => {
                    events.push(Event {
                        t,
                        kind: EventKind::DiodeOff,
                        v_before,
                        energy: 0.0,
                    });
                    Mode::Blocked
                }
            };
        }
        plant.next_noise();

        let k = n + 1;
        let s = sample(&plant, mode, t_end, &y);
        averager.push(k, s.p_load, s.p_in);
        if recorder.wants(k) {
            recorder.push(s);
        }
    }

    Ok(SimResult {
        series: recorder.series,
        events,
        averages: averager.averages(),
        energy: None,
        settle_time: averager.settle_time(dt),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analytic::{standard_optimum_resistive, standard_power_resistive, HarmonicOperatingPoint};
    use crate::excitation::{build_excitation, ExcitationSpec, Tone};

    const P: PiezoParams = PiezoParams::REFERENCE;

    fn harmonic(u_m: f64, f: f64) -> MotionSource {
        build_excitation(&ExcitationSpec::Harmonic(Tone::new(u_m, f))).unwrap()
    }

    #[test]
    fn still_motion_gives_nothing() {
        let m = harmonic(0.0, 56.0);
        let cfg = SimConfig::for_motion(&m, 0.2);
        let r = simulate_standard(&P, &StandardInterfaceSpec::resistive(2.2e-6, 1e5), &m, &cfg).unwrap();
        assert!(r.events.is_empty());
        assert_eq!(r.averages.p_in, 0.0);
        assert_eq!(r.averages.p_out, 0.0);
    }

    #[test]
    fn matches_closed_form_at_optimum() {
        let f = 334.0;
        let m = harmonic(2e-4, f);
        let op = HarmonicOperatingPoint::from_frequency(2e-4, f);
        let r_opt = standard_optimum_resistive(&P, &op).value();
        let cfg = SimConfig::for_motion(&m, 300.0 / f).with_decimation(0);
        let r = simulate_standard(&P, &StandardInterfaceSpec::resistive(2.2e-6, r_opt), &m, &cfg).unwrap();
        let expected = standard_power_resistive(&P, &op, r_opt);
        let err = (r.averages.p_out / expected - 1.0).abs();
        assert!(err < 0.02, "sim {} closed form {expected}", r.averages.p_out);
        // four transitions per period
        let late = r.events.iter().filter(|e| e.t > r.settle_time).count() as f64;
        let periods = (cfg.duration - r.settle_time) * f;
        assert!(
            (late / periods - 4.0).abs() < 0.1,
            "{late} events over {periods} periods"
        );
    }

    #[test]
    fn huge_load_charges_to_open_circuit() {
        let f = 915.0;
        let m = harmonic(1e-4, f);
        let cfg = SimConfig::for_motion(&m, 200.0 / f);
        let r = simulate_standard(&P, &StandardInterfaceSpec::resistive(2.2e-6, 1e9), &m, &cfg).unwrap();
        let v_open = P.open_circuit_voltage(1e-4);
        let last = r.series.last().unwrap();
        assert!((last.v_rect / v_open - 1.0).abs() < 0.01, "{} vs {v_open}", last.v_rect);
        let op = HarmonicOperatingPoint::from_frequency(1e-4, f);
        assert!(r.averages.p_out < 0.01 * standard_optimum_resistive(&P, &op).p_max);
    }

    #[test]
    fn conduction_respects_threshold() {
        let m = harmonic(3e-4, 56.0);
        let iface = StandardInterfaceSpec {
            c_r: 2.2e-6,
            diode_drop: 0.5,
            load: StandardLoad::Resistive { r_load: 1e5 },
        };
        let cfg = SimConfig::for_motion(&m, 40.0 / 56.0);
        let r = simulate_standard(&P, &iface, &m, &cfg).unwrap();
        for s in &r.series {
            if s.p_in > 0.0 {
                assert!(s.v_piezo.abs() >= s.v_rect + 1.0 - 1e-9);
            }
            assert!(s.v_piezo.abs() <= s.v_rect + 1.0 + 1e-6);
        }
        assert!(r.averages.p_out < r.averages.p_in);
    }

    #[test]
    fn constant_voltage_load_matches_parabola() {
        use crate::analytic::{standard_optimum_voltage, standard_power_voltage};
        let f = 56.0;
        let m = harmonic(5e-4, f);
        let op = HarmonicOperatingPoint::from_frequency(5e-4, f);
        let v_opt = standard_optimum_voltage(&P, &op).value();
        for v in [0.5 * v_opt, v_opt, 1.5 * v_opt] {
            let iface =
                StandardInterfaceSpec::resistive(2.2e-6, 1.0).with_load(StandardLoad::ConstantVoltage { v_load: v });
            let cfg = SimConfig::for_motion(&m, 20.0 / f).with_decimation(0);
            let r = simulate_standard(&P, &iface, &m, &cfg).unwrap();
            let expected = standard_power_voltage(&P, &op, v);
            assert!(
                (r.averages.p_out / expected - 1.0).abs() < 0.01,
                "v={v}: {} vs {expected}",
                r.averages.p_out
            );
        }
    }

    #[test]
    fn leakage_decays_with_rc_time_constant() {
        // Start from a charged insert by running a half period, then compare
        // the blocked-mode decay with a still source against exp(-t / (r c0)).
        let r_leak = 1e6;
        let p = P.with_leakage(r_leak);
        let m = harmonic(0.0, 56.0);
        let mut plant = Plant::new(&m, 2);
        plant.next_noise();
        let bridge = Bridge {
            alpha: p.alpha,
            c0: p.c0,
            c_r: 2.2e-6,
            g_leak: p.leak_conductance(),
            g_load: 1e-5,
            drop2: 0.0,
            fixed_v: None,
        };
        let mut y = vec![5.0, 10.0];
        let mut out = vec![0.0; 2];
        let dt = 1e-5;
        let circuit = |u_dot: f64, yc: &[f64], dc: &mut [f64]| bridge.deriv(Mode::Blocked, u_dot, yc, dc);
        for k in 0..1000 {
            plant.step(&circuit, NoiseSlot::Current, k as f64 * dt, &y, dt, &mut out);
            y.copy_from_slice(&out);
        }
        let expected = 5.0 * (-1000.0 * dt / (r_leak * p.c0)).exp();
        assert!((y[0] / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn random_grid_mismatch_is_a_configuration_error() {
        let spec = ExcitationSpec::RandomModal {
            seed: 1,
            modes: crate::excitation::default_beam_modes(),
            target_rms: 1e-4,
            duration: 0.1,
        };
        let m = build_excitation(&spec).unwrap();
        let cfg = SimConfig::for_motion(&m, 0.1).with_dt(m.grid_step().unwrap() * 2.0);
        let r = simulate_standard(&P, &StandardInterfaceSpec::resistive(2.2e-6, 1e4), &m, &cfg);
        assert!(matches!(r, Err(Error::Configuration(_))));
    }
}
