//! Synchronous electric charge extraction.
//!
//! The insert stays open-circuit (`c0 v' = alpha u' - v / r_leak`) and is
//! fully discharged into the output stage at every local maximum of `|v|`.
//! The transfer itself is treated as instantaneous: its duration is bounded
//! to a small fraction of the fastest excitation period, and the source
//! current is near zero at a voltage extremum.
//!
//! State: `[v_piezo, v_out, e_load]` followed by the resonator states, where
//! `e_load` integrates the power dissipated in a resistive output load.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::error::{Error, Result};
use crate::excitation::MotionSource;
use crate::lumped::PiezoParams;

use super::{
    bracket_root, detect_extremum, Averager, EnergyBook, Event, EventKind, NoiseSlot, Plant, Recorder, Sample,
    SimConfig, SimResult,
};

/// Longest allowed flyback quarter-cycle as a fraction of the shortest excitation period.
pub const MAX_TRANSFER_FRACTION: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Extraction {
    /// Instantaneous transfer of `efficiency` times the stored energy.
    Ideal { efficiency: f64 },
    /// Resonant discharge of `c0` into `l_ind` through `r_series`, then
    /// freewheeling into the output through a diode.
    Flyback { l_ind: f64, r_series: f64, diode_drop: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeceOutput {
    /// Output capacitor with a resistive load; `r_load` may be infinite.
    Capacitive {
        c_out: f64,
        r_load: f64,
    },
    ConstantVoltage {
        v_load: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeceInterfaceSpec {
    pub extraction: Extraction,
    /// Smallest `|v|` at which an extraction may fire (V).
    pub trigger_min_v: f64,
    pub output: SeceOutput,
}

impl SeceInterfaceSpec {
    /// Ideal lossless extraction into `c_out` with a resistive load.
    pub fn ideal(c_out: f64, r_load: f64) -> Self {
        SeceInterfaceSpec {
            extraction: Extraction::Ideal { efficiency: 1.0 },
            trigger_min_v: 0.0,
            output: SeceOutput::Capacitive { c_out, r_load },
        }
    }

    /// Same interface with the output load resistance replaced, if it has one.
    pub fn with_load_resistance(mut self, r: f64) -> Self {
        if let SeceOutput::Capacitive { c_out, .. } = self.output {
            self.output = SeceOutput::Capacitive { c_out, r_load: r };
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.extraction {
            Extraction::Ideal { efficiency } => {
                if !(efficiency > 0.0 && efficiency <= 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "efficiency must lie in (0, 1], got {efficiency}"
                    )));
                }
            }
            Extraction::Flyback {
                l_ind,
                r_series,
                diode_drop,
            } => {
                if !(l_ind.is_finite() && l_ind > 0.0) {
                    return Err(Error::InvalidInput(format!("l_ind must be > 0, got {l_ind}")));
                }
                if !(r_series.is_finite() && r_series >= 0.0) {
                    return Err(Error::InvalidInput(format!("r_series must be >= 0, got {r_series}")));
                }
                if !(diode_drop.is_finite() && diode_drop >= 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "diode_drop must be >= 0, got {diode_drop}"
                    )));
                }
            }
        }
        if !(self.trigger_min_v.is_finite() && self.trigger_min_v >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "trigger_min_v must be >= 0, got {}",
                self.trigger_min_v
            )));
        }
        match self.output {
            SeceOutput::Capacitive { c_out, r_load } => {
                if !(c_out.is_finite() && c_out > 0.0) {
                    return Err(Error::InvalidInput(format!("c_out must be > 0, got {c_out}")));
                }
                if !(r_load > 0.0) {
                    return Err(Error::InvalidInput(format!("r_load must be > 0, got {r_load}")));
                }
            }
            SeceOutput::ConstantVoltage { v_load } => {
                if !(v_load.is_finite() && v_load >= 0.0) {
                    return Err(Error::InvalidInput(format!("v_load must be >= 0, got {v_load}")));
                }
            }
        }
        Ok(())
    }
}

/// Flyback discharge of `c0` through a series RLC: the switch opens when the
/// capacitor voltage first reaches zero. Returns `(duration, inductor energy)`
/// for an initial stored energy `e0`.
fn flyback_discharge(c0: f64, l_ind: f64, r_series: f64, e0: f64) -> (f64, f64) {
    let w0_sq = 1.0 / (l_ind * c0);
    let beta = r_series / (2.0 * l_ind);
    let wd = (w0_sq - beta * beta).sqrt();
    let t1 = (PI - (wd / beta).atan()) / wd;
    // q(t) = q0 e^{-beta t} (cos wd t + beta/wd sin wd t); |i(t1)| = q0 w0^2/wd e^{-beta t1} sin(wd t1)
    let ratio = w0_sq / wd * (-beta * t1).exp() * (wd * t1).sin();
    // E_L / E0 = (L i^2 / 2) / (q0^2 / 2 c0) = L c0 ratio^2
    (t1, e0 * l_ind * c0 * ratio * ratio)
}

struct Stage {
    alpha: f64,
    c0: f64,
    g_leak: f64,
    extraction: Extraction,
    output: SeceOutput,
}

impl Stage {
    #[inline]
    fn deriv(&self, u_dot: f64, y: &[f64], dy: &mut [f64]) {
        dy[0] = (self.alpha * u_dot - y[0] * self.g_leak) / self.c0;
        match self.output {
            SeceOutput::Capacitive { c_out, r_load } if r_load.is_finite() => {
                dy[1] = -y[1] / (r_load * c_out);
                dy[2] = y[1] * y[1] / r_load;
            }
            _ => {
                dy[1] = 0.0;
                dy[2] = 0.0;
            }
        }
    }

    /// `d|v|/dt`.
    #[inline]
    fn rate(&self, u_dot: f64, y: &[f64]) -> f64 {
        let dv = (self.alpha * u_dot - y[0] * self.g_leak) / self.c0;
        if y[0] >= 0.0 {
            dv
        } else {
            -dv
        }
    }

    /// Discharges the insert into the output. Returns `(extracted, delivered)`.
    fn fire(&self, y: &mut [f64]) -> (f64, f64) {
        let extracted = 0.5 * self.c0 * y[0] * y[0];
        y[0] = 0.0;
        let delivered = match self.extraction {
            Extraction::Ideal { efficiency } => {
                let e = efficiency * extracted;
                match self.output {
                    SeceOutput::Capacitive { c_out, .. } => {
                        y[1] = (y[1] * y[1] + 2.0 * e / c_out).sqrt();
                    }
                    SeceOutput::ConstantVoltage { .. } => y[2] += e,
                }
                e
            }
            Extraction::Flyback {
                l_ind,
                r_series,
                diode_drop,
            } => {
                let (_, e_l) = flyback_discharge(self.c0, l_ind, r_series, extracted);
                match self.output {
                    SeceOutput::Capacitive { c_out, .. } => {
                        // L i' = -(v_out + v_d), c_out v_out' = i, until i = 0
                        let x0 = y[1] + diode_drop;
                        let x1 = (x0 * x0 + 2.0 * e_l / c_out).sqrt();
                        let v1 = x1 - diode_drop;
                        let e = 0.5 * c_out * (v1 * v1 - y[1] * y[1]);
                        y[1] = v1;
                        e
                    }
                    SeceOutput::ConstantVoltage { v_load } => {
                        let e = if v_load + diode_drop > 0.0 {
                            e_l * v_load / (v_load + diode_drop)
                        } else {
                            0.0
                        };
                        y[2] += e;
                        e
                    }
                }
            }
        };
        (extracted, delivered)
    }

    fn load_power(&self, y: &[f64], delivered_in_step: f64, dt: f64) -> f64 {
        match self.output {
            SeceOutput::Capacitive { r_load, .. } => {
                if r_load.is_finite() {
                    y[1] * y[1] / r_load
                } else {
                    0.0
                }
            }
            SeceOutput::ConstantVoltage { .. } => delivered_in_step / dt,
        }
    }

    fn output_voltage(&self, y: &[f64]) -> f64 {
        match self.output {
            SeceOutput::Capacitive { .. } => y[1],
            SeceOutput::ConstantVoltage { v_load } => v_load,
        }
    }

    fn stored(&self, y: &[f64]) -> f64 {
        match self.output {
            SeceOutput::Capacitive { c_out, .. } => 0.5 * c_out * y[1] * y[1],
            SeceOutput::ConstantVoltage { .. } => 0.0,
        }
    }
}

/// Simulates the insert with synchronous charge extraction.
///
/// `p_in` is the extracted energy per unit time ("SECE in"); `p_out` is the
/// power reaching the load ("SECE out").
pub fn simulate_sece(
    piezo: &PiezoParams,
    iface: &SeceInterfaceSpec,
    motion: &MotionSource,
    cfg: &SimConfig,
) -> Result<SimResult> {
    piezo.validate()?;
    iface.validate()?;
    cfg.validate()?;
    cfg.check_motion(motion)?;

    if let Extraction::Flyback { l_ind, r_series, .. } = iface.extraction {
        let quarter = FRAC_PI_2 * (l_ind * piezo.c0).sqrt();
        let limit = MAX_TRANSFER_FRACTION * motion.shortest_period();
        if quarter > limit {
            return Err(Error::Configuration(format!(
                "flyback quarter-cycle {quarter:.3e} s exceeds {limit:.3e} s ({MAX_TRANSFER_FRACTION} of the shortest excitation period)"
            )));
        }
        let critical = 2.0 * (l_ind / piezo.c0).sqrt();
        if r_series >= critical {
            return Err(Error::Configuration(format!(
                "r_series {r_series} ohm overdamps the discharge (critical {critical:.3e} ohm)"
            )));
        }
    }

    let stage = Stage {
        alpha: piezo.alpha,
        c0: piezo.c0,
        g_leak: piezo.leak_conductance(),
        extraction: iface.extraction,
        output: iface.output,
    };
    let thr = iface.trigger_min_v;

    let mut plant = Plant::new(motion, 3);
    let len = plant.state_len();
    let steps = cfg.steps();
    let dt = cfg.dt;
    let tol = cfg.event_time_tol;

    let mut y_prev = vec![0.0; len];
    let mut y_cur = vec![0.0; len];
    let mut y_next = vec![0.0; len];
    let mut y_star = vec![0.0; len];
    let mut y_probe = vec![0.0; len];
    let mut y_post = vec![0.0; len];

    let mut events = Vec::new();
    let mut book = EnergyBook::default();
    let mut averager = Averager::new(steps, cfg.settle);
    let mut recorder = Recorder::new(cfg.record_decimation, steps);
    let circuit = |u_dot: f64, yc: &[f64], dc: &mut [f64]| stage.deriv(u_dot, yc, dc);

    let sample = |plant: &Plant, t: f64, y: &[f64], e_in: f64, e_out: f64| {
        let (u, u_dot) = plant.motion(t, y);
        Sample {
            t,
            u,
            u_dot,
            v_piezo: y[0],
            v_rect: stage.output_voltage(y),
            p_load: stage.load_power(y, e_out, dt),
            p_in: e_in / dt,
        }
    };

    plant.next_noise();
    if recorder.wants(0) {
        recorder.push(sample(&plant, 0.0, &y_cur, 0.0, 0.0));
    }

    let mut a_prev = 0.0;
    let mut a_cur = y_cur[0].abs();
    // energy (extracted, delivered) attributed to the step ending at t_n / t_{n+1}
    let mut e_cur = (0.0, 0.0);
    // time of an extraction inside the step ending at t_n; its post-fire state is in `y_post`
    let mut fired_prev: Option<f64> = None;

    for n in 0..steps {
        let t_n = n as f64 * dt;
        plant.step(&circuit, NoiseSlot::Current, t_n, &y_cur, dt, &mut y_next);
        let mut a_next = y_next[0].abs();
        let mut e_next = (0.0, 0.0);
        let mut fired_next = None;

        if n >= 1 && detect_extremum(a_prev, a_cur, a_next, thr) {
            let rate_at = |plant: &Plant, t: f64, y: &[f64]| stage.rate(plant.motion(t, y).1, y);
            // the previous step restarts from its own fire, if it had one
            let (t_prev, y_before): (f64, &[f64]) = match fired_prev {
                Some(t_f) => (t_f, &y_post),
                None => (t_n - dt, &y_prev),
            };
            let after = rate_at(&plant, t_n, &y_cur) > 0.0;
            let (base_slot, t_base, span) = if after && rate_at(&plant, t_n + dt, &y_next) <= 0.0 {
                (Some(NoiseSlot::Current), t_n, dt)
            } else if !after && t_n > t_prev && rate_at(&plant, t_prev, y_before) > 0.0 {
                (Some(NoiseSlot::Previous), t_prev, t_n - t_prev)
            } else {
                (None, t_n, 0.0)
            };

            let tau = match base_slot {
                Some(slot) => {
                    let base: &[f64] = if slot == NoiseSlot::Current { &y_cur } else { y_before };
                    let mut falling = |tau: f64| {
                        if tau == 0.0 {
                            return -1.0;
                        }
                        plant.step(&circuit, slot, t_base, base, tau, &mut y_probe);
                        -stage.rate(plant.motion(t_base + tau, &y_probe).1, &y_probe)
                    };
                    let (_, hi) = bracket_root(&mut falling, 0.0, span, tol)?;
                    plant.step(&circuit, slot, t_base, base, hi, &mut y_star);
                    hi
                }
                None => {
                    y_star.copy_from_slice(&y_cur);
                    0.0
                }
            };

            let t_fire = t_base + tau;
            let v_before = y_star[0];
            let (extracted, delivered) = stage.fire(&mut y_star);
            book.extracted += extracted;
            book.delivered += delivered;
            events.push(Event {
                t: t_fire,
                kind: EventKind::SeceFire,
                v_before,
                energy: extracted,
            });

            match base_slot {
                Some(NoiseSlot::Current) => {
                    e_next = (e_next.0 + extracted, e_next.1 + delivered);
                    plant.step(&circuit, NoiseSlot::Current, t_fire, &y_star, dt - tau, &mut y_next);
                    y_post.copy_from_slice(&y_star);
                    fired_next = Some(t_fire);
                    a_cur = 0.0;
                }
                Some(NoiseSlot::Previous) => {
                    e_cur = (e_cur.0 + extracted, e_cur.1 + delivered);
                    plant.step(&circuit, NoiseSlot::Previous, t_fire, &y_star, span - tau, &mut y_cur);
                    plant.step(&circuit, NoiseSlot::Current, t_n, &y_cur, dt, &mut y_next);
                    a_cur = y_cur[0].abs();
                }
                None => {
                    e_cur = (e_cur.0 + extracted, e_cur.1 + delivered);
                    y_cur.copy_from_slice(&y_star);
                    plant.step(&circuit, NoiseSlot::Current, t_n, &y_cur, dt, &mut y_next);
                    a_cur = 0.0;
                }
            }
            a_next = y_next[0].abs();
        }

        if n >= 1 {
            let s = sample(&plant, t_n, &y_cur, e_cur.0, e_cur.1);
            averager.push(n, s.p_load, s.p_in);
            if recorder.wants(n) {
                recorder.push(s);
            }
        }

        std::mem::swap(&mut y_prev, &mut y_cur);
        std::mem::swap(&mut y_cur, &mut y_next);
        a_prev = a_cur;
        a_cur = a_next;
        e_cur = e_next;
        fired_prev = fired_next;
        plant.next_noise();
    }

    // the last grid point cannot be judged an extremum
    let t_end = steps as f64 * dt;
    let s = sample(&plant, t_end, &y_cur, e_cur.0, e_cur.1);
    averager.push(steps, s.p_load, s.p_in);
    if recorder.wants(steps) {
        recorder.push(s);
    }

    book.load = match stage.output {
        SeceOutput::Capacitive { .. } => y_cur[2],
        SeceOutput::ConstantVoltage { .. } => book.delivered,
    };
    book.stored = stage.stored(&y_cur);

    Ok(SimResult {
        series: recorder.series,
        events,
        averages: averager.averages(),
        energy: Some(book),
        settle_time: averager.settle_time(dt),
    })
}
