//! Post-processing: power averages, load sweeps, spectra and gain reports.

mod export;
mod psd;
mod sweep;

pub use export::{
    write_events_csv, write_gain_csv, write_gain_text, write_motion_csv, write_series_csv, write_spectrum_csv,
    write_sweep_csv,
};
pub use psd::{dominant_peak_near, psd, Spectrum, SpectrumBin, WindowInfo};
pub use sweep::{
    calibrate_leakage, gain_at_leakage, sweep_load, LeakageCalibration, SweepCurve, SweepMetadata, SweepPoint,
};

use crate::error::{Error, Result};

/// Default number of points in a load grid.
pub const DEFAULT_GRID_POINTS: usize = 30;

/// Mean of `series` after dropping the leading `settle_fraction` of samples.
pub fn average_power(series: &[f64], settle_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&settle_fraction) {
        return Err(Error::InvalidInput(format!(
            "settle fraction must lie in [0, 1), got {settle_fraction}"
        )));
    }
    let first = (settle_fraction * series.len() as f64).floor() as usize;
    let tail = &series[first.min(series.len())..];
    if tail.is_empty() {
        return Err(Error::InvalidInput("no samples left after the settle window".into()));
    }
    Ok(tail.iter().sum::<f64>() / tail.len() as f64)
}

/// `points` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && lo > 0.0 && hi >= lo) {
        return Err(Error::InvalidInput(format!("bad grid bounds [{lo}, {hi}]")));
    }
    match points {
        0 => Err(Error::InvalidInput("grid needs at least one point".into())),
        1 => Ok(vec![lo]),
        _ if hi == lo => Err(Error::InvalidInput(format!(
            "a grid of {points} points needs hi > lo, got {lo} twice"
        ))),
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            let n = (points - 1) as f64;
            let mut g: Vec<f64> = (0..points).map(|i| (a + (b - a) * i as f64 / n).exp()).collect();
            g[0] = lo;
            g[points - 1] = hi;
            Ok(g)
        }
    }
}

/// Standard-versus-SECE comparison at the Standard optimum of a sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GainSummary {
    pub p_standard_max: f64,
    pub r_opt_measured: f64,
    pub p_sece_in: f64,
    pub p_sece_out: f64,
    pub gain_in: f64,
    pub gain_out: f64,
}

fn ratio(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        num / den
    } else if num > 0.0 {
        f64::INFINITY
    } else {
        1.0
    }
}

/// Gains of SECE over the best Standard point of `curve`.
///
/// A curve with no Standard power at all reports a gain of 1 when SECE is
/// also silent and infinity otherwise.
pub fn gain_report(curve: &SweepCurve) -> Result<GainSummary> {
    let best = curve
        .points
        .iter()
        .fold(None::<&SweepPoint>, |best, p| match best {
            Some(b) if b.p_standard >= p.p_standard => Some(b),
            _ => Some(p),
        })
        .ok_or_else(|| Error::InvalidInput("empty sweep curve".into()))?;
    Ok(GainSummary {
        p_standard_max: best.p_standard,
        r_opt_measured: best.r_load,
        p_sece_in: best.p_sece_in,
        p_sece_out: best.p_sece_out,
        gain_in: ratio(best.p_sece_in, best.p_standard),
        gain_out: ratio(best.p_sece_out, best.p_standard),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn curve(points: &[(f64, f64, f64, f64)]) -> SweepCurve {
        SweepCurve {
            points: points
                .iter()
                .map(|&(r_load, p_standard, p_sece_in, p_sece_out)| SweepPoint {
                    r_load,
                    p_standard,
                    p_sece_in,
                    p_sece_out,
                })
                .collect(),
            metadata: SweepMetadata::default(),
        }
    }

    #[test]
    fn average_of_constant() {
        assert!((average_power(&[1e-3; 100], 0.2).unwrap() - 1e-3).abs() < 1e-18);
    }

    #[test]
    fn settle_drops_leading_half() {
        assert_eq!(average_power(&[0.0, 0.0, 4.0, 4.0], 0.5).unwrap(), 4.0);
    }

    #[test]
    fn cosine_ripple_averages_out() {
        let n = 1000;
        let s: Vec<f64> = (0..n)
            .map(|k| 2e-3 * (1.0 + (2.0 * PI * 10.0 * k as f64 / n as f64).cos()))
            .collect();
        // 20 % of 1000 samples = two whole periods dropped
        assert!((average_power(&s, 0.2).unwrap() - 2e-3).abs() < 1e-15);
    }

    #[test]
    fn average_errors() {
        assert!(matches!(average_power(&[], 0.0), Err(Error::InvalidInput(_))));
        assert!(average_power(&[1.0], 1.0).is_err());
        assert!(average_power(&[1.0], -0.1).is_err());
    }

    #[test]
    fn grid_endpoints_and_ratio() {
        let g = log_grid(1e3, 1e6, 4).unwrap();
        assert_eq!(g[0], 1e3);
        assert_eq!(g[3], 1e6);
        assert!((g[1] / 1e4 - 1.0).abs() < 1e-12);
        assert!(log_grid(1e3, 1e6, 0).is_err());
        assert!(log_grid(0.0, 1e6, 3).is_err());
        assert_eq!(log_grid(5.0, 5.0, 1).unwrap(), vec![5.0]);
    }

    #[test]
    fn gain_from_reported_powers() {
        let s = gain_report(&curve(&[
            (1e4, 1.2e-3, 2.76e-3, 2.0e-3),
            (1e5, 1.63e-3, 2.76e-3, 2.2e-3),
        ]))
        .unwrap();
        assert_eq!(s.r_opt_measured, 1e5);
        assert!((s.gain_in - 1.69).abs() < 0.01);
        assert!((s.gain_out - 2.2 / 1.63).abs() < 1e-12);
    }

    #[test]
    fn identical_columns_give_unit_gain() {
        let s = gain_report(&curve(&[(1e3, 1e-3, 1e-3, 1e-3), (1e4, 2e-3, 2e-3, 2e-3)])).unwrap();
        assert_eq!(s.gain_in, 1.0);
        assert_eq!(s.gain_out, 1.0);
    }

    #[test]
    fn degenerate_gains() {
        let s = gain_report(&curve(&[(1e3, 0.0, 0.0, 0.0)])).unwrap();
        assert_eq!(s.gain_in, 1.0);
        let s = gain_report(&curve(&[(1e3, 0.0, 1e-3, 0.0)])).unwrap();
        assert_eq!(s.gain_in, f64::INFINITY);
        assert!(gain_report(&curve(&[])).is_err());
    }

    proptest! {
        #[test]
        fn grid_is_strictly_increasing(lo in 1.0f64..1e4, decades in 0.1f64..4.0, n in 2usize..60) {
            let g = log_grid(lo, lo * 10f64.powf(decades), n).unwrap();
            prop_assert_eq!(g.len(), n);
            prop_assert!(g.windows(2).all(|w| w[1] > w[0]));
        }

        #[test]
        fn gain_is_ratio_at_best_standard_point(
            pts in prop::collection::vec((1e-6f64..1e-2, 0.0f64..1e-2, 0.0f64..1e-2), 1..20)
        ) {
            let c = curve(&pts.iter().enumerate().map(|(i, &(a, b, d))| (1e3 * (i + 1) as f64, a, b, d)).collect::<Vec<_>>());
            let s = gain_report(&c).unwrap();
            prop_assert!(c.points.iter().all(|p| p.p_standard <= s.p_standard_max));
            prop_assert_eq!(s.gain_in, s.p_sece_in / s.p_standard_max);
            prop_assert!(s.gain_in >= 0.0 && s.gain_out >= 0.0);
        }
    }
}
