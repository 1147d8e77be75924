//! Scenario files: parsing, canonical rendering, and job execution.
//!
//! A scenario is a TOML document with the sections `piezo`, `excitation`,
//! `interface.standard` / `interface.sece`, `sim`, `job` and `output`. See
//! the README for the full key list and defaults.

mod parse;
mod render;

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

pub use parse::parse_config;
pub use render::render;

use crate::analysis::{
    gain_report, log_grid, psd, sweep_load, write_events_csv, write_gain_csv, write_gain_text, write_motion_csv,
    write_series_csv, write_spectrum_csv, write_sweep_csv,
};
use crate::analytic::{sece_power, standard_optimum_resistive, standard_optimum_voltage, HarmonicOperatingPoint};
use crate::error::{Error, Result};
use crate::excitation::{build_excitation_on_grid, ExcitationSpec, Tone};
use crate::lumped::{derive_lumped, MaterialGeometry, PiezoParams};
use crate::sim::{simulate_sece, simulate_standard, SeceInterfaceSpec, SimConfig, SimResult, StandardInterfaceSpec};

/// Bumped whenever a CSV layout changes.
pub const FORMAT_VERSION: u32 = 1;

pub const DEFAULT_C_R: f64 = 2.2e-6;
pub const DEFAULT_C_OUT: f64 = 2.2e-6;
/// Simulated periods of the slowest component when no duration is given.
pub const DEFAULT_DETERMINISTIC_PERIODS: f64 = 500.0;
pub const DEFAULT_RANDOM_DURATION: f64 = 100.0;
/// `(r_min, r_max, points)`.
pub const DEFAULT_GRID: (f64, f64, usize) = (1e3, 1e6, crate::analysis::DEFAULT_GRID_POINTS);
pub const DEFAULT_SEGMENT_LEN: usize = 8192;
pub const DEFAULT_OVERLAP: f64 = 0.5;
pub const DEFAULT_OUTPUT_DIR: &str = "out";
pub const DEFAULT_DECIMATION: usize = 10;
/// PSD jobs sample the motion at no less than this many points per period
/// of the fastest component.
pub const PSD_SAMPLES_PER_PERIOD: f64 = 8.0;

pub(crate) const MAX_GRID_POINTS: usize = 10_000;
pub(crate) const MAX_SEGMENT_LEN: usize = 1 << 24;
pub(crate) const MAX_THREADS: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PiezoSource {
    Lumped(PiezoParams),
    Geometry { geometry: MaterialGeometry, r_leak: f64 },
}

impl PiezoSource {
    pub fn params(&self) -> Result<PiezoParams> {
        match self {
            PiezoSource::Lumped(p) => {
                p.validate()?;
                Ok(*p)
            }
            PiezoSource::Geometry { geometry, r_leak } => {
                let p = derive_lumped(geometry)?.with_leakage(*r_leak);
                p.validate()?;
                Ok(p)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JobKind {
    Analytic,
    Run,
    Sweep,
    Psd,
}

impl JobKind {
    pub fn name(&self) -> &'static str {
        match self {
            JobKind::Analytic => "analytic",
            JobKind::Run => "run",
            JobKind::Sweep => "sweep",
            JobKind::Psd => "psd",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        [JobKind::Analytic, JobKind::Run, JobKind::Sweep, JobKind::Psd]
            .into_iter()
            .find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum LoadGrid {
    Log { r_min: f64, r_max: f64, points: usize },
    List(Vec<f64>),
}

impl LoadGrid {
    pub fn loads(&self) -> Result<Vec<f64>> {
        match self {
            LoadGrid::Log { r_min, r_max, points } => log_grid(*r_min, *r_max, *points),
            LoadGrid::List(l) => Ok(l.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobSpec {
    pub kind: JobKind,
    /// Seed of the random excitation; recorded in every manifest.
    pub seed: u64,
    pub grid: LoadGrid,
    /// Sweep workers, 0 for one per core.
    pub threads: usize,
    pub segment_len: usize,
    pub overlap: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputSpec {
    pub directory: String,
    /// Keep every n-th sample in series files; 0 writes no series.
    pub decimation: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub piezo: PiezoSource,
    pub excitation: ExcitationSpec,
    pub standard: Option<StandardInterfaceSpec>,
    pub sece: Option<SeceInterfaceSpec>,
    /// `record_decimation` mirrors `output.decimation`.
    pub sim: SimConfig,
    pub job: JobSpec,
    pub output: OutputSpec,
}

impl ScenarioConfig {
    /// Replaces the seed everywhere it is used.
    pub fn set_seed(&mut self, seed: u64) -> Result<()> {
        if seed > i64::MAX as u64 {
            return Err(Error::config(
                "job.seed",
                format!("must be at most {}, got {seed}", i64::MAX),
            ));
        }
        self.job.seed = seed;
        if let ExcitationSpec::RandomModal { seed: s, .. } = &mut self.excitation {
            *s = seed;
        }
        Ok(())
    }

    pub fn set_kind(&mut self, kind: JobKind) -> Result<()> {
        self.job.kind = kind;
        self.check_job()
    }

    pub(crate) fn check_job(&self) -> Result<()> {
        match self.job.kind {
            JobKind::Analytic if self.excitation.is_random() => Err(Error::config(
                "job.kind",
                "analytic jobs need a harmonic or multimodal excitation",
            )),
            JobKind::Run if self.standard.is_none() && self.sece.is_none() => {
                Err(Error::config("interface", "run jobs need at least one interface"))
            }
            JobKind::Sweep if self.standard.is_none() || self.sece.is_none() => Err(Error::config(
                "interface",
                "sweep jobs need both interface.standard and interface.sece",
            )),
            _ => Ok(()),
        }
    }
}

/// What a job produced.
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    /// Human-readable highlights.
    pub notes: Vec<String>,
}

struct Out<'a> {
    dir: &'a Path,
    report: RunReport,
}

impl Out<'_> {
    fn write<F>(&mut self, name: &str, body: F) -> Result<()>
    where
        F: FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    {
        let path = self.dir.join(name);
        let io = |source| Error::Io {
            path: path.clone(),
            source,
        };
        let mut w = BufWriter::new(File::create(&path).map_err(io)?);
        body(&mut w).and_then(|_| w.flush()).map_err(io)?;
        self.report.files.push(path);
        Ok(())
    }
}

/// Executes the job and writes its artifacts plus `manifest.txt`.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<RunReport> {
    cfg.check_job()?;
    let piezo = cfg.piezo.params()?;
    let dir = Path::new(&cfg.output.directory);
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Out {
        dir,
        report: RunReport::default(),
    };
    if cfg.excitation.is_random() && cfg.sim.duration < DEFAULT_RANDOM_DURATION {
        out.report.notes.push(format!(
            "warning: {} s random record is shorter than {DEFAULT_RANDOM_DURATION} s; averaged powers carry extra sampling variance",
            cfg.sim.duration
        ));
    }

    match cfg.job.kind {
        JobKind::Analytic => analytic_job(cfg, &piezo, &mut out)?,
        JobKind::Run => run_job(cfg, &piezo, &mut out)?,
        JobKind::Sweep => sweep_job(cfg, &piezo, &mut out)?,
        JobKind::Psd => psd_job(cfg, &mut out)?,
    }

    let manifest = format!(
        "# pegsim run manifest\n# format_version = {FORMAT_VERSION}\n# software_version = {}\n# seed = {}\n\n{}",
        env!("CARGO_PKG_VERSION"),
        cfg.job.seed,
        render(cfg)
    );
    out.write("manifest.txt", |w| w.write_all(manifest.as_bytes()))?;
    Ok(out.report)
}

const ANALYTIC_HEADER: &str = "freq_hz,u_m,r_opt_ohm,p_standard_max_W,v_opt_V,p_sece_W";

fn analytic_job(cfg: &ScenarioConfig, piezo: &PiezoParams, out: &mut Out) -> Result<()> {
    let tones: Vec<Tone> = match &cfg.excitation {
        ExcitationSpec::Harmonic(t) => vec![*t],
        ExcitationSpec::Multimodal(ts) => ts.clone(),
        ExcitationSpec::RandomModal { .. } => unreachable!("rejected by check_job"),
    };
    let mut rows = Vec::new();
    for t in &tones {
        let op = HarmonicOperatingPoint::from_frequency(t.u_m, t.freq);
        let r = standard_optimum_resistive(piezo, &op);
        let v = standard_optimum_voltage(piezo, &op);
        rows.push((t.freq, t.u_m, r.value(), r.p_max, v.value(), sece_power(piezo, &op)));
        out.report.notes.push(format!(
            "{} Hz: optimal load {:.4e} ohm, Standard max {:.4e} W",
            t.freq,
            r.value(),
            r.p_max
        ));
    }
    out.write("analytic.csv", |w| {
        writeln!(w, "{ANALYTIC_HEADER}")?;
        for (f, u, r, p, v, s) in &rows {
            writeln!(w, "{f:e},{u:e},{r:e},{p:e},{v:e},{s:e}")?;
        }
        Ok(())
    })
}

fn motion_for(cfg: &ScenarioConfig) -> Result<crate::excitation::MotionSource> {
    build_excitation_on_grid(&cfg.excitation, cfg.sim.dt)
}

const SUMMARY_HEADER: &str = "interface,p_in_W,p_out_W,events,settle_s";

fn run_job(cfg: &ScenarioConfig, piezo: &PiezoParams, out: &mut Out) -> Result<()> {
    let motion = motion_for(cfg)?;
    let mut rows: Vec<(&str, SimResult)> = Vec::new();
    if let Some(s) = &cfg.standard {
        rows.push(("standard", simulate_standard(piezo, s, &motion, &cfg.sim)?));
    }
    if let Some(s) = &cfg.sece {
        rows.push(("sece", simulate_sece(piezo, s, &motion, &cfg.sim)?));
    }
    for (name, r) in &rows {
        if cfg.output.decimation > 0 {
            out.write(&format!("{name}_series.csv"), |w| write_series_csv(w, &r.series))?;
        }
        out.write(&format!("{name}_events.csv"), |w| write_events_csv(w, &r.events))?;
        out.report.notes.push(format!(
            "{name}: p_in {:.4e} W, p_out {:.4e} W, {} events",
            r.averages.p_in,
            r.averages.p_out,
            r.events.len()
        ));
    }
    out.write("summary.csv", |w| {
        writeln!(w, "{SUMMARY_HEADER}")?;
        for (name, r) in &rows {
            writeln!(
                w,
                "{name},{:e},{:e},{},{:e}",
                r.averages.p_in,
                r.averages.p_out,
                r.events.len(),
                r.settle_time
            )?;
        }
        Ok(())
    })
}

fn sweep_job(cfg: &ScenarioConfig, piezo: &PiezoParams, out: &mut Out) -> Result<()> {
    let (Some(standard), Some(sece)) = (&cfg.standard, &cfg.sece) else {
        unreachable!("rejected by check_job")
    };
    let loads = cfg.job.grid.loads()?;
    let motion = motion_for(cfg)?;
    let curve = sweep_load(piezo, &motion, standard, sece, &loads, &cfg.sim, cfg.job.threads)?;
    let gain = gain_report(&curve)?;
    out.write("sweep.csv", |w| write_sweep_csv(w, &curve))?;
    out.write("gain.txt", |w| write_gain_text(w, &gain))?;
    out.write("gain.csv", |w| write_gain_csv(w, &gain))?;
    out.report.notes.push(format!(
        "Standard max {:.4e} W at {:.4e} ohm; SECE in {:.4e} W; gain_in {:.3}",
        gain.p_standard_max, gain.r_opt_measured, gain.p_sece_in, gain.gain_in
    ));
    Ok(())
}

/// Grid multiple used to sample motion for a spectrum.
fn psd_stride(cfg: &ScenarioConfig) -> usize {
    let f_max = cfg.excitation.highest_frequency();
    ((1.0 / (PSD_SAMPLES_PER_PERIOD * f_max * cfg.sim.dt)).floor() as usize).max(1)
}

fn psd_job(cfg: &ScenarioConfig, out: &mut Out) -> Result<()> {
    let motion = motion_for(cfg)?;
    let stride = psd_stride(cfg);
    let step = stride as f64 * cfg.sim.dt;
    let count = (cfg.sim.duration / step).floor() as usize + 1;
    let samples = motion.sample(step, count)?;
    let u: Vec<f64> = samples.iter().map(|s| s.1).collect();
    let spectrum = psd(&u, 1.0 / step, cfg.job.segment_len, cfg.job.overlap)?;
    if cfg.output.decimation > 0 {
        let kept: Vec<_> = samples.iter().step_by(cfg.output.decimation).copied().collect();
        out.write("motion.csv", |w| write_motion_csv(w, &kept))?;
    }
    out.write("psd.csv", |w| write_spectrum_csv(w, &spectrum))?;
    out.report.notes.push(format!(
        "{} segments of {} samples, resolution {:.4} Hz",
        spectrum.window.segments, spectrum.window.segment_len, spectrum.resolution
    ));
    Ok(())
}
