//! Canonical text form of a [`ScenarioConfig`]; parsing it gives back the
//! same config. Floats use Rust's shortest round-trip formatting.

use std::fmt::Write;

use crate::excitation::{ExcitationSpec, Tone};
use crate::sim::{Extraction, SeceOutput, StandardLoad};

use super::{LoadGrid, PiezoSource, ScenarioConfig};

fn num(x: f64) -> String {
    format!("{x:?}")
}

fn quoted(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn tone(out: &mut String, t: &Tone) {
    let _ = writeln!(out, "u_m = {}", num(t.u_m));
    let _ = writeln!(out, "freq = {}", num(t.freq));
    let _ = writeln!(out, "phase = {}", num(t.phase));
}

pub fn render(cfg: &ScenarioConfig) -> String {
    let mut out = String::new();
    let o = &mut out;

    let _ = writeln!(o, "[piezo]");
    match &cfg.piezo {
        PiezoSource::Lumped(p) => {
            let _ = writeln!(o, "c0 = {}", num(p.c0));
            let _ = writeln!(o, "alpha = {}", num(p.alpha));
            let _ = writeln!(o, "k_e = {}", num(p.k_e));
            let _ = writeln!(o, "r_leak = {}", num(p.r_leak));
        }
        PiezoSource::Geometry { geometry: g, r_leak } => {
            let _ = writeln!(o, "r_leak = {}", num(*r_leak));
            let _ = writeln!(o, "\n[piezo.geometry]");
            let _ = writeln!(o, "e_coeff = {}", num(g.e_coeff));
            let _ = writeln!(o, "eps_s = {}", num(g.eps_s));
            let _ = writeln!(o, "c_e = {}", num(g.c_e));
            let _ = writeln!(o, "area = {}", num(g.area));
            let _ = writeln!(o, "t_p = {}", num(g.t_p));
            let _ = writeln!(o, "w_p = {}", num(g.w_p));
        }
    }

    let _ = writeln!(o, "\n[excitation]");
    match &cfg.excitation {
        ExcitationSpec::Harmonic(t) => {
            let _ = writeln!(o, "kind = \"harmonic\"");
            tone(o, t);
        }
        ExcitationSpec::Multimodal(tones) => {
            let _ = writeln!(o, "kind = \"multimodal\"");
            for t in tones {
                let _ = writeln!(o, "\n[[excitation.tones]]");
                tone(o, t);
            }
        }
        ExcitationSpec::RandomModal {
            modes,
            target_rms,
            duration,
            ..
        } => {
            let _ = writeln!(o, "kind = \"random_modal\"");
            let _ = writeln!(o, "target_rms = {}", num(*target_rms));
            let _ = writeln!(o, "duration = {}", num(*duration));
            for m in modes {
                let _ = writeln!(o, "\n[[excitation.modes]]");
                let _ = writeln!(o, "freq = {}", num(m.freq));
                let _ = writeln!(o, "q_factor = {}", num(m.q_factor));
                let _ = writeln!(o, "gain = {}", num(m.gain));
            }
        }
    }

    if let Some(s) = &cfg.standard {
        let _ = writeln!(o, "\n[interface.standard]");
        let _ = writeln!(o, "c_r = {}", num(s.c_r));
        let _ = writeln!(o, "diode_drop = {}", num(s.diode_drop));
        match s.load {
            StandardLoad::Resistive { r_load } => {
                let _ = writeln!(o, "r_load = {}", num(r_load));
            }
            StandardLoad::ConstantVoltage { v_load } => {
                let _ = writeln!(o, "v_load = {}", num(v_load));
            }
        }
    }

    if let Some(s) = &cfg.sece {
        let _ = writeln!(o, "\n[interface.sece]");
        match s.extraction {
            Extraction::Ideal { efficiency } => {
                let _ = writeln!(o, "extraction = \"ideal\"");
                let _ = writeln!(o, "efficiency = {}", num(efficiency));
            }
            Extraction::Flyback {
                l_ind,
                r_series,
                diode_drop,
            } => {
                let _ = writeln!(o, "extraction = \"flyback\"");
                let _ = writeln!(o, "l_ind = {}", num(l_ind));
                let _ = writeln!(o, "r_series = {}", num(r_series));
                let _ = writeln!(o, "diode_drop = {}", num(diode_drop));
            }
        }
        let _ = writeln!(o, "trigger_min_v = {}", num(s.trigger_min_v));
        match s.output {
            SeceOutput::Capacitive { c_out, r_load } => {
                let _ = writeln!(o, "output = \"capacitive\"");
                let _ = writeln!(o, "c_out = {}", num(c_out));
                let _ = writeln!(o, "r_load = {}", num(r_load));
            }
            SeceOutput::ConstantVoltage { v_load } => {
                let _ = writeln!(o, "output = \"constant_voltage\"");
                let _ = writeln!(o, "v_load = {}", num(v_load));
            }
        }
    }

    let sim = &cfg.sim;
    let _ = writeln!(o, "\n[sim]");
    let _ = writeln!(o, "dt = {}", num(sim.dt));
    let _ = writeln!(o, "duration = {}", num(sim.duration));
    let _ = writeln!(o, "settle = {}", num(sim.settle));
    let _ = writeln!(o, "event_time_tol = {}", num(sim.event_time_tol));

    let job = &cfg.job;
    let _ = writeln!(o, "\n[job]");
    let _ = writeln!(o, "kind = {}", quoted(job.kind.name()));
    let _ = writeln!(o, "seed = {}", job.seed);
    let _ = writeln!(o, "threads = {}", job.threads);
    let _ = writeln!(o, "segment_len = {}", job.segment_len);
    let _ = writeln!(o, "overlap = {}", num(job.overlap));
    match &job.grid {
        LoadGrid::List(loads) => {
            let items: Vec<String> = loads.iter().map(|r| num(*r)).collect();
            let _ = writeln!(o, "r_loads = [{}]", items.join(", "));
        }
        LoadGrid::Log { r_min, r_max, points } => {
            let _ = writeln!(o, "\n[job.grid]");
            let _ = writeln!(o, "r_min = {}", num(*r_min));
            let _ = writeln!(o, "r_max = {}", num(*r_max));
            let _ = writeln!(o, "points = {points}");
        }
    }

    let _ = writeln!(o, "\n[output]");
    let _ = writeln!(o, "directory = {}", quoted(&cfg.output.directory));
    let _ = writeln!(o, "decimation = {}", cfg.output.decimation);
    out
}
