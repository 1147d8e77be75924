//! Hand-walked TOML reader: every key is consumed explicitly, anything left
//! over is reported as unknown, and every diagnostic carries its dotted path.

use toml::{Table, Value};

use crate::error::{Error, Result};
use crate::excitation::{default_beam_modes, ExcitationSpec, ModeSpec, Tone, DEFAULT_Q};
use crate::lumped::{MaterialGeometry, PiezoParams};
use crate::sim::{Extraction, SeceInterfaceSpec, SeceOutput, SimConfig, StandardInterfaceSpec, StandardLoad};

use super::{
    JobKind, JobSpec, LoadGrid, OutputSpec, PiezoSource, ScenarioConfig, DEFAULT_C_OUT, DEFAULT_C_R,
    DEFAULT_DETERMINISTIC_PERIODS, DEFAULT_GRID, DEFAULT_OVERLAP, DEFAULT_RANDOM_DURATION, DEFAULT_SEGMENT_LEN,
    MAX_GRID_POINTS, MAX_SEGMENT_LEN, MAX_THREADS,
};

struct Section<'a> {
    path: String,
    table: &'a Table,
    seen: Vec<&'a str>,
}

fn err(path: impl Into<String>, msg: impl Into<String>) -> Error {
    Error::config(path, msg)
}

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::String(_) => "a string",
        Value::Integer(_) => "an integer",
        Value::Float(_) => "a float",
        Value::Boolean(_) => "a boolean",
        Value::Datetime(_) => "a datetime",
        Value::Array(_) => "an array",
        Value::Table(_) => "a table",
    }
}

impl<'a> Section<'a> {
    fn new(path: String, table: &'a Table) -> Self {
        Section {
            path,
            table,
            seen: Vec::new(),
        }
    }

    fn key_path(&self, key: &str) -> String {
        if self.path.is_empty() {
            key.to_string()
        } else {
            format!("{}.{key}", self.path)
        }
    }

    fn has(&self, key: &str) -> bool {
        self.table.contains_key(key)
    }

    fn get(&mut self, key: &str) -> Option<&'a Value> {
        let (k, v) = self.table.get_key_value(key)?;
        self.seen.push(k.as_str());
        Some(v)
    }

    fn f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Float(x)) if x.is_nan() => Err(err(self.key_path(key), "NaN is not a valid value")),
            Some(Value::Float(x)) => Ok(Some(*x)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(err(
                self.key_path(key),
                format!("expected a number, found {}", type_name(v)),
            )),
        }
    }

    fn req_f64(&mut self, key: &str) -> Result<f64> {
        self.f64(key)?
            .ok_or_else(|| err(self.key_path(key), "missing required key"))
    }

    fn u64(&mut self, key: &str) -> Result<Option<u64>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(Value::Integer(i)) => Err(err(self.key_path(key), format!("must be >= 0, got {i}"))),
            Some(v) => Err(err(
                self.key_path(key),
                format!("expected an integer, found {}", type_name(v)),
            )),
        }
    }

    fn bounded(&mut self, key: &str, lo: u64, hi: u64) -> Result<Option<usize>> {
        match self.u64(key)? {
            Some(n) if n < lo || n > hi => Err(err(self.key_path(key), format!("must lie in [{lo}, {hi}], got {n}"))),
            n => Ok(n.map(|n| n as usize)),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<&'a str>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.as_str())),
            Some(v) => Err(err(
                self.key_path(key),
                format!("expected a string, found {}", type_name(v)),
            )),
        }
    }

    fn table(&mut self, key: &str) -> Result<Option<Section<'a>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Table(t)) => Ok(Some(Section::new(self.key_path(key), t))),
            Some(v) => Err(err(
                self.key_path(key),
                format!("expected a table, found {}", type_name(v)),
            )),
        }
    }

    fn tables(&mut self, key: &str) -> Result<Option<Vec<Section<'a>>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Table(t) => Ok(Section::new(format!("{}[{i}]", self.key_path(key)), t)),
                    v => Err(err(
                        format!("{}[{i}]", self.key_path(key)),
                        format!("expected a table, found {}", type_name(v)),
                    )),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(err(
                self.key_path(key),
                format!("expected an array of tables, found {}", type_name(v)),
            )),
        }
    }

    fn f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get(key) {
            None => Ok(None),
            Some(Value::Array(items)) => items
                .iter()
                .enumerate()
                .map(|(i, v)| match v {
                    Value::Float(x) if !x.is_nan() => Ok(*x),
                    Value::Integer(n) => Ok(*n as f64),
                    v => Err(err(
                        format!("{}[{i}]", self.key_path(key)),
                        format!("expected a number, found {}", type_name(v)),
                    )),
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
            Some(v) => Err(err(
                self.key_path(key),
                format!("expected an array, found {}", type_name(v)),
            )),
        }
    }

    /// Rejects keys that were never read.
    fn finish(&self) -> Result<()> {
        match self.table.keys().find(|k| !self.seen.contains(&k.as_str())) {
            Some(k) => Err(err(self.key_path(k), "unknown key")),
            None => Ok(()),
        }
    }

    fn positive(&self, key: &str, v: f64) -> Result<f64> {
        if v.is_finite() && v > 0.0 {
            Ok(v)
        } else {
            Err(err(self.key_path(key), format!("must be finite and > 0, got {v}")))
        }
    }

    fn non_negative(&self, key: &str, v: f64) -> Result<f64> {
        if v.is_finite() && v >= 0.0 {
            Ok(v)
        } else {
            Err(err(self.key_path(key), format!("must be finite and >= 0, got {v}")))
        }
    }

    /// Positive, or infinite (an open circuit).
    fn resistance(&self, key: &str, v: f64) -> Result<f64> {
        if v > 0.0 {
            Ok(v)
        } else {
            Err(err(self.key_path(key), format!("must be > 0 (inf for none), got {v}")))
        }
    }

    fn req_positive(&mut self, key: &str) -> Result<f64> {
        let v = self.req_f64(key)?;
        self.positive(key, v)
    }

    fn opt_positive(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.f64(key)? {
            Some(v) => self.positive(key, v),
            None => Ok(default),
        }
    }

    fn opt_non_negative(&mut self, key: &str, default: f64) -> Result<f64> {
        match self.f64(key)? {
            Some(v) => self.non_negative(key, v),
            None => Ok(default),
        }
    }

    fn required_section(&mut self, key: &str) -> Result<Section<'a>> {
        self.table(key)?
            .ok_or_else(|| err(self.key_path(key), "missing required section"))
    }
}

/// Maps a module-level validation error onto a config path.
fn at(path: &str) -> impl Fn(Error) -> Error + '_ {
    move |e| match e {
        Error::InvalidInput(m) | Error::Configuration(m) => err(path, m),
        e => e,
    }
}

/// Parses and validates a scenario document, filling in defaults.
pub fn parse_config(text: &str) -> Result<ScenarioConfig> {
    let root: Table = text
        .parse()
        .map_err(|e: toml::de::Error| err("<document>", e.message().to_string()))?;
    let mut doc = Section::new(String::new(), &root);

    let piezo = parse_piezo(&mut doc.required_section("piezo")?)?;
    let job = parse_job(doc.table("job")?)?;
    let excitation = parse_excitation(&mut doc.required_section("excitation")?, job.seed)?;

    let (standard, sece) = match doc.table("interface")? {
        Some(mut iface) => {
            let standard = iface
                .table("standard")?
                .map(|mut s| parse_standard(&mut s))
                .transpose()?;
            let sece = iface.table("sece")?.map(|mut s| parse_sece(&mut s)).transpose()?;
            iface.finish()?;
            (standard, sece)
        }
        None => (None, None),
    };

    let output = parse_output(doc.table("output")?)?;
    let sim = parse_sim(doc.table("sim")?, &excitation, output.decimation)?;
    doc.finish()?;

    if job.kind == JobKind::Analytic && excitation.is_random() {
        return Err(err(
            "job.kind",
            "analytic jobs need a harmonic or multimodal excitation",
        ));
    }
    let cfg = ScenarioConfig {
        piezo,
        excitation,
        standard,
        sece,
        sim,
        job,
        output,
    };
    cfg.check_job()?;
    Ok(cfg)
}

fn parse_piezo(s: &mut Section) -> Result<PiezoSource> {
    let r_leak = match s.f64("r_leak")? {
        Some(v) => s.resistance("r_leak", v)?,
        None => f64::INFINITY,
    };
    let lumped_keys = ["c0", "alpha", "k_e"];
    let source = match s.table("geometry")? {
        Some(mut g) => {
            if let Some(k) = lumped_keys.iter().find(|k| s.has(k)) {
                return Err(err(
                    s.key_path(k),
                    "over-specified: give either lumped parameters or a geometry block, not both",
                ));
            }
            let geometry = MaterialGeometry {
                e_coeff: {
                    let v = g.req_f64("e_coeff")?;
                    g.non_negative("e_coeff", v)?
                },
                eps_s: g.req_positive("eps_s")?,
                c_e: g.req_positive("c_e")?,
                area: g.req_positive("area")?,
                t_p: g.req_positive("t_p")?,
                w_p: g.req_positive("w_p")?,
            };
            g.finish()?;
            PiezoSource::Geometry { geometry, r_leak }
        }
        None => {
            let c0 = s.req_positive("c0")?;
            let alpha = {
                let v = s.req_f64("alpha")?;
                s.non_negative("alpha", v)?
            };
            let k_e = s.req_positive("k_e")?;
            PiezoSource::Lumped(PiezoParams { c0, alpha, k_e, r_leak })
        }
    };
    s.finish()?;
    let path = s.path.clone();
    source.params().map_err(at(&path))?;
    Ok(source)
}

fn parse_tone(s: &mut Section) -> Result<Tone> {
    let u_m = {
        let v = s.req_f64("u_m")?;
        s.non_negative("u_m", v)?
    };
    let freq = s.req_positive("freq")?;
    let phase = match s.f64("phase")? {
        Some(p) if p.is_finite() => p,
        Some(p) => return Err(err(s.key_path("phase"), format!("must be finite, got {p}"))),
        None => 0.0,
    };
    Ok(Tone { u_m, freq, phase })
}

fn parse_excitation(s: &mut Section, seed: u64) -> Result<ExcitationSpec> {
    let kind = s
        .string("kind")?
        .ok_or_else(|| err(s.key_path("kind"), "missing required key"))?;
    let spec = match kind {
        "harmonic" => ExcitationSpec::Harmonic(parse_tone(s)?),
        "multimodal" => {
            let items = s
                .tables("tones")?
                .ok_or_else(|| err(s.key_path("tones"), "missing required key"))?;
            if items.is_empty() {
                return Err(err(s.key_path("tones"), "needs at least one tone"));
            }
            let tones = items
                .into_iter()
                .map(|mut t| {
                    let tone = parse_tone(&mut t)?;
                    t.finish()?;
                    Ok(tone)
                })
                .collect::<Result<Vec<_>>>()?;
            ExcitationSpec::Multimodal(tones)
        }
        "random_modal" => {
            let target_rms = s.req_positive("target_rms")?;
            let duration = s.opt_positive("duration", DEFAULT_RANDOM_DURATION)?;
            let modes = match s.tables("modes")? {
                None => default_beam_modes(),
                Some(items) if items.is_empty() => return Err(err(s.key_path("modes"), "needs at least one mode")),
                Some(items) => items
                    .into_iter()
                    .map(|mut m| {
                        let freq = m.req_positive("freq")?;
                        let q_factor = m.opt_positive("q_factor", DEFAULT_Q)?;
                        if q_factor <= 0.5 {
                            return Err(err(m.key_path("q_factor"), format!("must be > 0.5, got {q_factor}")));
                        }
                        let gain = {
                            let v = m.req_f64("gain")?;
                            m.non_negative("gain", v)?
                        };
                        m.finish()?;
                        Ok(ModeSpec { freq, q_factor, gain })
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            ExcitationSpec::RandomModal {
                seed,
                modes,
                target_rms,
                duration,
            }
        }
        other => {
            return Err(err(
                s.key_path("kind"),
                format!("unknown excitation kind {other:?} (expected harmonic, multimodal or random_modal)"),
            ))
        }
    };
    let path = s.path.clone();
    spec.validate().map_err(at(&path))?;
    s.finish()?;
    Ok(spec)
}

/// Exactly one of `r_load` / `v_load`.
fn parse_load(s: &mut Section) -> Result<(Option<f64>, Option<f64>)> {
    let r = s.f64("r_load")?;
    let v = s.f64("v_load")?;
    match (r, v) {
        (Some(_), Some(_)) => Err(err(s.key_path("v_load"), "give either r_load or v_load, not both")),
        (Some(r), None) => Ok((Some(s.resistance("r_load", r)?), None)),
        (None, Some(v)) => Ok((None, Some(s.non_negative("v_load", v)?))),
        (None, None) => Ok((None, None)),
    }
}

fn parse_standard(s: &mut Section) -> Result<StandardInterfaceSpec> {
    let c_r = s.opt_positive("c_r", DEFAULT_C_R)?;
    let diode_drop = s.opt_non_negative("diode_drop", 0.0)?;
    let load = match parse_load(s)? {
        (Some(r_load), _) if r_load.is_finite() => StandardLoad::Resistive { r_load },
        (Some(_), _) => return Err(err(s.key_path("r_load"), "must be finite")),
        (_, Some(v_load)) => StandardLoad::ConstantVoltage { v_load },
        (None, None) => return Err(err(s.key_path("r_load"), "missing load: give r_load or v_load")),
    };
    let spec = StandardInterfaceSpec { c_r, diode_drop, load };
    let path = s.path.clone();
    spec.validate().map_err(at(&path))?;
    s.finish()?;
    Ok(spec)
}

fn parse_sece(s: &mut Section) -> Result<SeceInterfaceSpec> {
    let extraction = match s.string("extraction")?.unwrap_or("ideal") {
        "ideal" => {
            let efficiency = s.opt_positive("efficiency", 1.0)?;
            if efficiency > 1.0 {
                return Err(err(s.key_path("efficiency"), format!("must be <= 1, got {efficiency}")));
            }
            Extraction::Ideal { efficiency }
        }
        "flyback" => Extraction::Flyback {
            l_ind: s.req_positive("l_ind")?,
            r_series: s.opt_non_negative("r_series", 0.0)?,
            diode_drop: s.opt_non_negative("diode_drop", 0.0)?,
        },
        other => {
            return Err(err(
                s.key_path("extraction"),
                format!("unknown extraction {other:?} (expected ideal or flyback)"),
            ))
        }
    };
    let trigger_min_v = s.opt_non_negative("trigger_min_v", 0.0)?;
    let output = match s.string("output")?.unwrap_or("capacitive") {
        "capacitive" => {
            let c_out = s.opt_positive("c_out", DEFAULT_C_OUT)?;
            match parse_load(s)? {
                (_, Some(_)) => return Err(err(s.key_path("v_load"), "a capacitive output takes r_load")),
                (r, None) => SeceOutput::Capacitive {
                    c_out,
                    r_load: r.unwrap_or(f64::INFINITY),
                },
            }
        }
        "constant_voltage" => match parse_load(s)? {
            (_, Some(v_load)) => SeceOutput::ConstantVoltage { v_load },
            (Some(_), None) => return Err(err(s.key_path("r_load"), "a constant-voltage output takes v_load")),
            (None, None) => return Err(err(s.key_path("v_load"), "missing required key")),
        },
        other => {
            return Err(err(
                s.key_path("output"),
                format!("unknown output {other:?} (expected capacitive or constant_voltage)"),
            ))
        }
    };
    let spec = SeceInterfaceSpec {
        extraction,
        trigger_min_v,
        output,
    };
    let path = s.path.clone();
    spec.validate().map_err(at(&path))?;
    s.finish()?;
    Ok(spec)
}

fn parse_sim(s: Option<Section>, excitation: &ExcitationSpec, decimation: usize) -> Result<SimConfig> {
    let empty = Table::new();
    let mut s = s.unwrap_or_else(|| Section::new("sim".into(), &empty));
    let dt = s.opt_positive("dt", excitation.default_step())?;
    let default_duration = match excitation {
        ExcitationSpec::RandomModal { duration, .. } => *duration,
        _ => DEFAULT_DETERMINISTIC_PERIODS / excitation.lowest_frequency(),
    };
    let duration = s.opt_positive("duration", default_duration)?;
    let settle = s.opt_non_negative("settle", SimConfig::DEFAULT_SETTLE)?;
    if settle >= 1.0 {
        return Err(err(s.key_path("settle"), format!("must be < 1, got {settle}")));
    }
    let event_time_tol = s.opt_positive("event_time_tol", dt * SimConfig::DEFAULT_EVENT_TOL_FRACTION)?;
    if event_time_tol >= dt {
        return Err(err(
            s.key_path("event_time_tol"),
            format!("must be < dt = {dt}, got {event_time_tol}"),
        ));
    }
    if duration < dt {
        return Err(err(
            s.key_path("duration"),
            format!("must be at least one step dt = {dt}, got {duration}"),
        ));
    }
    s.finish()?;
    Ok(SimConfig {
        dt,
        event_time_tol,
        duration,
        settle,
        record_decimation: decimation,
    })
}

fn parse_job(s: Option<Section>) -> Result<JobSpec> {
    let empty = Table::new();
    let mut s = s.unwrap_or_else(|| Section::new("job".into(), &empty));
    let kind = match s.string("kind")? {
        None => JobKind::Run,
        Some(k) => JobKind::from_name(k).ok_or_else(|| {
            err(
                s.key_path("kind"),
                format!("unknown job kind {k:?} (expected analytic, run, sweep or psd)"),
            )
        })?,
    };
    let seed = s.u64("seed")?.unwrap_or_default();
    let threads = s.bounded("threads", 0, MAX_THREADS as u64)?.unwrap_or(0);
    let segment_len = match s.bounded("segment_len", 2, MAX_SEGMENT_LEN as u64)? {
        Some(n) if !n.is_power_of_two() => {
            return Err(err(
                s.key_path("segment_len"),
                format!("must be a power of two, got {n}"),
            ))
        }
        n => n.unwrap_or(DEFAULT_SEGMENT_LEN),
    };
    let overlap = s.opt_non_negative("overlap", DEFAULT_OVERLAP)?;
    if overlap >= 1.0 {
        return Err(err(s.key_path("overlap"), format!("must be < 1, got {overlap}")));
    }

    let list = s.f64_list("r_loads")?;
    let grid = s.table("grid")?;
    let grid = match (list, grid) {
        (Some(_), Some(g)) => return Err(err(g.path, "give either a grid table or an r_loads list, not both")),
        (Some(list), None) => {
            let path = s.key_path("r_loads");
            if list.is_empty() {
                return Err(err(path, "load grid is empty"));
            }
            if list.len() > MAX_GRID_POINTS {
                return Err(err(
                    path,
                    format!("at most {MAX_GRID_POINTS} loads, got {}", list.len()),
                ));
            }
            if let Some((i, r)) = list.iter().enumerate().find(|(_, r)| !(r.is_finite() && **r > 0.0)) {
                return Err(err(format!("{path}[{i}]"), format!("must be finite and > 0, got {r}")));
            }
            if let Some(i) = (1..list.len()).find(|&i| !(list[i] > list[i - 1])) {
                return Err(err(format!("{path}[{i}]"), "loads must be strictly increasing"));
            }
            LoadGrid::List(list)
        }
        (None, Some(mut g)) => {
            let r_min = g.opt_positive("r_min", DEFAULT_GRID.0)?;
            let r_max = g.opt_positive("r_max", DEFAULT_GRID.1)?;
            let points = g
                .bounded("points", 1, MAX_GRID_POINTS as u64)?
                .unwrap_or(DEFAULT_GRID.2);
            if r_max < r_min || (points > 1 && r_max == r_min) {
                return Err(err(
                    g.key_path("r_max"),
                    format!("must exceed r_min = {r_min}, got {r_max}"),
                ));
            }
            g.finish()?;
            LoadGrid::Log { r_min, r_max, points }
        }
        (None, None) => LoadGrid::Log {
            r_min: DEFAULT_GRID.0,
            r_max: DEFAULT_GRID.1,
            points: DEFAULT_GRID.2,
        },
    };
    s.finish()?;
    Ok(JobSpec {
        kind,
        seed,
        grid,
        threads,
        segment_len,
        overlap,
    })
}

fn parse_output(s: Option<Section>) -> Result<OutputSpec> {
    let empty = Table::new();
    let mut s = s.unwrap_or_else(|| Section::new("output".into(), &empty));
    let directory = s.string("directory")?.unwrap_or(super::DEFAULT_OUTPUT_DIR);
    if directory.is_empty() {
        return Err(err(s.key_path("directory"), "must not be empty"));
    }
    let decimation = match s.u64("decimation")? {
        Some(n) => usize::try_from(n).map_err(|_| err(s.key_path("decimation"), "too large"))?,
        None => super::DEFAULT_DECIMATION,
    };
    let out = OutputSpec {
        directory: directory.into(),
        decimation,
    };
    s.finish()?;
    Ok(out)
}
