use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::excitation::MotionSource;
use crate::lumped::PiezoParams;
use crate::sim::{simulate_sece, simulate_standard, SeceInterfaceSpec, SimConfig, StandardInterfaceSpec, StandardLoad};

use super::{gain_report, GainSummary};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub r_load: f64,
    /// Standard load power (W).
    pub p_standard: f64,
    pub p_sece_in: f64,
    pub p_sece_out: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepMetadata {
    pub excitation: String,
    pub piezo: PiezoParams,
    pub seed: Option<u64>,
}

impl Default for SweepMetadata {
    fn default() -> Self {
        SweepMetadata {
            excitation: String::new(),
            piezo: PiezoParams::REFERENCE,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepCurve {
    pub points: Vec<SweepPoint>,
    pub metadata: SweepMetadata,
}

fn check_loads(r_loads: &[f64]) -> Result<()> {
    if r_loads.is_empty() {
        return Err(Error::InvalidInput("load grid is empty".into()));
    }
    if let Some(r) = r_loads.iter().find(|r| !(r.is_finite() && **r > 0.0)) {
        return Err(Error::InvalidInput(format!(
            "load resistances must be finite and > 0, got {r}"
        )));
    }
    if let Some(w) = r_loads.windows(2).find(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput(format!(
            "load grid must be strictly increasing, got {} then {}",
            w[0], w[1]
        )));
    }
    Ok(())
}

fn sweep_point(
    piezo: &PiezoParams,
    motion: &MotionSource,
    standard: &StandardInterfaceSpec,
    sece: &SeceInterfaceSpec,
    r_load: f64,
    cfg: &SimConfig,
) -> Result<SweepPoint> {
    let std_iface = standard.with_load(StandardLoad::Resistive { r_load });
    let sece_iface = sece.with_load_resistance(r_load);
    let annotate = |e: Error| Error::AtLoad {
        r_load,
        source: Box::new(e),
    };
    let s = simulate_standard(piezo, &std_iface, motion, cfg).map_err(annotate)?;
    let x = simulate_sece(piezo, &sece_iface, motion, cfg).map_err(annotate)?;
    Ok(SweepPoint {
        r_load,
        p_standard: s.averages.p_out,
        p_sece_in: x.averages.p_in,
        p_sece_out: x.averages.p_out,
    })
}

/// Runs both interfaces at every load of `r_loads` against the same motion.
///
/// Points are evaluated on a pool of `threads` workers (0 = one per core) and
/// merged in grid order, so the curve does not depend on the thread count.
/// The Standard load is replaced by each grid resistance; the SECE output
/// keeps its kind and only takes the resistance if it has one.
pub fn sweep_load(
    piezo: &PiezoParams,
    motion: &MotionSource,
    standard: &StandardInterfaceSpec,
    sece: &SeceInterfaceSpec,
    r_loads: &[f64],
    cfg: &SimConfig,
    threads: usize,
) -> Result<SweepCurve> {
    check_loads(r_loads)?;
    piezo.validate()?;
    let cfg = cfg.with_decimation(0);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::Configuration(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<SweepPoint>> = pool.install(|| {
        r_loads
            .par_iter()
            .map(|&r| sweep_point(piezo, motion, standard, sece, r, &cfg))
            .collect()
    });
    let points = results.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(SweepCurve {
        points,
        metadata: SweepMetadata {
            excitation: motion.describe(),
            piezo: *piezo,
            seed: motion.seed(),
        },
    })
}

/// Gain report of a sweep with the insert's leakage resistance set to `r_leak`.
#[allow(clippy::too_many_arguments)]
pub fn gain_at_leakage(
    piezo: &PiezoParams,
    r_leak: f64,
    motion: &MotionSource,
    standard: &StandardInterfaceSpec,
    sece: &SeceInterfaceSpec,
    r_loads: &[f64],
    cfg: &SimConfig,
    threads: usize,
) -> Result<GainSummary> {
    let p = piezo.with_leakage(r_leak);
    gain_report(&sweep_load(&p, motion, standard, sece, r_loads, cfg, threads)?)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LeakageCalibration {
    pub r_leak: f64,
    pub gain_in: f64,
    /// Number of sweeps run.
    pub evaluations: usize,
}

/// Log-bisection for the leakage resistance at which the input gain equals
/// `target`. Gain must be above target at `r_hi` and below it at `r_lo`.
/// Stops when the gain is within `gain_tol` of `target`.
#[allow(clippy::too_many_arguments)]
pub fn calibrate_leakage(
    piezo: &PiezoParams,
    motion: &MotionSource,
    standard: &StandardInterfaceSpec,
    sece: &SeceInterfaceSpec,
    r_loads: &[f64],
    cfg: &SimConfig,
    target: f64,
    (r_lo, r_hi): (f64, f64),
    gain_tol: f64,
) -> Result<LeakageCalibration> {
    if !(r_lo > 0.0 && r_hi > r_lo && r_hi.is_finite()) {
        return Err(Error::InvalidInput(format!("bad leakage bracket [{r_lo}, {r_hi}]")));
    }
    if !(gain_tol > 0.0) {
        return Err(Error::InvalidInput(format!(
            "gain tolerance must be > 0, got {gain_tol}"
        )));
    }
    let mut evaluations = 0;
    let mut gain = |r: f64| {
        evaluations += 1;
        gain_at_leakage(piezo, r, motion, standard, sece, r_loads, cfg, 0).map(|g| g.gain_in)
    };
    let (g_lo, g_hi) = (gain(r_lo)?, gain(r_hi)?);
    if !(g_lo < target && g_hi > target) {
        return Err(Error::BracketViolation {
            t_lo: r_lo,
            t_hi: r_hi,
            f_lo: g_lo - target,
            f_hi: g_hi - target,
        });
    }
    let (mut lo, mut hi) = (r_lo, r_hi);
    let mut best = if target - g_lo < g_hi - target {
        (r_lo, g_lo)
    } else {
        (r_hi, g_hi)
    };
    // 60 halvings of the log-bracket exhaust double precision
    for _ in 0..60 {
        if (best.1 - target).abs() <= gain_tol {
            break;
        }
        let mid = (lo * hi).sqrt();
        let g = gain(mid)?;
        if (g - target).abs() < (best.1 - target).abs() {
            best = (mid, g);
        }
        if g < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(LeakageCalibration {
        r_leak: best.0,
        gain_in: best.1,
        evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::log_grid;
    use crate::excitation::{build_excitation, ExcitationSpec, Tone};
    use crate::sim::SeceInterfaceSpec;

    fn setup(f: f64) -> (MotionSource, StandardInterfaceSpec, SeceInterfaceSpec, SimConfig) {
        let m = build_excitation(&ExcitationSpec::Harmonic(Tone::new(3e-4, f))).unwrap();
        let cfg = SimConfig::for_motion(&m, 300.0 / f);
        (
            m,
            StandardInterfaceSpec::resistive(2.2e-6, 1e4),
            SeceInterfaceSpec::ideal(2.2e-6, 1e4),
            cfg,
        )
    }

    #[test]
    fn rejects_bad_grids() {
        let (m, s, x, cfg) = setup(915.0);
        let p = PiezoParams::REFERENCE;
        for grid in [vec![], vec![1e3, 1e3], vec![2e3, 1e3], vec![-1.0], vec![f64::NAN]] {
            assert!(
                matches!(sweep_load(&p, &m, &s, &x, &grid, &cfg, 1), Err(Error::InvalidInput(_))),
                "{grid:?}"
            );
        }
    }

    #[test]
    fn errors_name_the_load() {
        let (m, s, x, mut cfg) = setup(915.0);
        cfg.event_time_tol = cfg.dt * 2.0;
        let err = sweep_load(&PiezoParams::REFERENCE, &m, &s, &x, &[1e3, 2e3], &cfg, 1).unwrap_err();
        match err {
            Error::AtLoad { r_load, .. } => assert_eq!(r_load, 1e3),
            e => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn thread_count_does_not_change_the_curve() {
        let (m, s, x, cfg) = setup(915.0);
        let grid = log_grid(1e3, 1e5, 5).unwrap();
        let p = PiezoParams::REFERENCE;
        let a = sweep_load(&p, &m, &s, &x, &grid, &cfg, 1).unwrap();
        let b = sweep_load(&p, &m, &s, &x, &grid, &cfg, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 5);
        assert!(a.points.iter().all(|p| p.p_standard >= 0.0 && p.p_sece_in >= 0.0));
    }

    #[test]
    fn calibration_rejects_unbracketed_target() {
        let (m, s, x, cfg) = setup(915.0);
        let grid = log_grid(3e3, 3e4, 3).unwrap();
        let r = calibrate_leakage(&PiezoParams::REFERENCE, &m, &s, &x, &grid, &cfg, 10.0, (1e5, 1e9), 0.1);
        assert!(matches!(r, Err(Error::BracketViolation { .. })));
    }
}
