//! CSV and text writers. Every file starts with a fixed header line; floats
//! are written in shortest round-trip scientific notation.

use std::io::{self, Write};

use crate::sim::{Event, Sample};

use super::{GainSummary, Spectrum, SweepCurve};

pub const SERIES_HEADER: &str = "t_s,u_m,udot_m_s,v_piezo_V,v_rect_V,p_load_W,p_in_W";
pub const EVENTS_HEADER: &str = "t_s,kind,v_before_V,energy_J";
pub const SWEEP_HEADER: &str = "r_load_ohm,p_standard_W,p_sece_in_W,p_sece_out_W";
pub const SPECTRUM_HEADER: &str = "freq_hz,psd_m2_per_hz";
pub const MOTION_HEADER: &str = "t_s,u_m,udot_m_s";
pub const GAIN_HEADER: &str = "p_standard_max_W,r_opt_measured_ohm,p_sece_in_W,p_sece_out_W,gain_in,gain_out";

pub fn write_series_csv<W: Write>(mut w: W, series: &[Sample]) -> io::Result<()> {
    writeln!(w, "{SERIES_HEADER}")?;
    for s in series {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e},{:e},{:e},{:e}",
            s.t, s.u, s.u_dot, s.v_piezo, s.v_rect, s.p_load, s.p_in
        )?;
    }
    Ok(())
}

pub fn write_events_csv<W: Write>(mut w: W, events: &[Event]) -> io::Result<()> {
    writeln!(w, "{EVENTS_HEADER}")?;
    for e in events {
        writeln!(w, "{:e},{},{:e},{:e}", e.t, e.kind.as_str(), e.v_before, e.energy)?;
    }
    Ok(())
}

pub fn write_sweep_csv<W: Write>(mut w: W, curve: &SweepCurve) -> io::Result<()> {
    writeln!(w, "{SWEEP_HEADER}")?;
    for p in &curve.points {
        writeln!(
            w,
            "{:e},{:e},{:e},{:e}",
            p.r_load, p.p_standard, p.p_sece_in, p.p_sece_out
        )?;
    }
    Ok(())
}

pub fn write_spectrum_csv<W: Write>(mut w: W, spectrum: &Spectrum) -> io::Result<()> {
    writeln!(w, "{SPECTRUM_HEADER}")?;
    for b in &spectrum.bins {
        writeln!(w, "{:e},{:e}", b.freq, b.psd)?;
    }
    Ok(())
}

/// Rows of `(t, u, u_dot)`.
pub fn write_motion_csv<W: Write>(mut w: W, samples: &[(f64, f64, f64)]) -> io::Result<()> {
    writeln!(w, "{MOTION_HEADER}")?;
    for (t, u, v) in samples {
        writeln!(w, "{t:e},{u:e},{v:e}")?;
    }
    Ok(())
}

pub fn write_gain_csv<W: Write>(mut w: W, g: &GainSummary) -> io::Result<()> {
    writeln!(w, "{GAIN_HEADER}")?;
    writeln!(
        w,
        "{:e},{:e},{:e},{:e},{:e},{:e}",
        g.p_standard_max, g.r_opt_measured, g.p_sece_in, g.p_sece_out, g.gain_in, g.gain_out
    )
}

/// `key=value` lines.
pub fn write_gain_text<W: Write>(mut w: W, g: &GainSummary) -> io::Result<()> {
    writeln!(w, "p_standard_max_W={:e}", g.p_standard_max)?;
    writeln!(w, "r_opt_measured_ohm={:e}", g.r_opt_measured)?;
    writeln!(w, "p_sece_in_W={:e}", g.p_sece_in)?;
    writeln!(w, "p_sece_out_W={:e}", g.p_sece_out)?;
    writeln!(w, "gain_in={:e}", g.gain_in)?;
    writeln!(w, "gain_out={:e}", g.gain_out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{SweepMetadata, SweepPoint};
    use crate::sim::EventKind;

    fn text<F: FnOnce(&mut Vec<u8>) -> io::Result<()>>(f: F) -> String {
        let mut buf = Vec::new();
        f(&mut buf).unwrap();
        String::from_utf8(buf).unwrap()
    }

    #[test]
    fn headers_are_exact() {
        let curve = SweepCurve {
            points: vec![SweepPoint {
                r_load: 106800.0,
                p_standard: 1e-3,
                p_sece_in: 4e-3,
                p_sece_out: 3.2e-3,
            }],
            metadata: SweepMetadata::default(),
        };
        let s = text(|b| write_sweep_csv(b, &curve));
        assert_eq!(
            s,
            "r_load_ohm,p_standard_W,p_sece_in_W,p_sece_out_W\n1.068e5,1e-3,4e-3,3.2e-3\n"
        );
        let s = text(|b| write_series_csv(b, &[]));
        assert_eq!(s.lines().next(), Some(SERIES_HEADER));
        let ev = [Event {
            t: 0.5,
            kind: EventKind::SeceFire,
            v_before: -2.0,
            energy: 8.36e-8,
        }];
        assert_eq!(
            text(|b| write_events_csv(b, &ev)),
            format!("{EVENTS_HEADER}\n5e-1,sece_fire,-2e0,8.36e-8\n")
        );
    }

    #[test]
    fn floats_round_trip() {
        let x = 0.1f64 + 0.2;
        let s = text(|b| write_motion_csv(b, &[(x, 1.0 / 3.0, -7e-300)]));
        let row: Vec<f64> = s
            .lines()
            .nth(1)
            .unwrap()
            .split(',')
            .map(|v| v.parse().unwrap())
            .collect();
        assert_eq!(row, vec![x, 1.0 / 3.0, -7e-300]);
    }

    #[test]
    fn gain_text_is_key_value() {
        let g = GainSummary {
            p_standard_max: 1.63e-3,
            r_opt_measured: 1e5,
            p_sece_in: 2.76e-3,
            p_sece_out: 2.2e-3,
            gain_in: 2.76 / 1.63,
            gain_out: 2.2 / 1.63,
        };
        let s = text(|b| write_gain_text(b, &g));
        assert_eq!(s.lines().count(), 6);
        assert!(s.lines().all(|l| l.split_once('=').is_some()));
        let c = text(|b| write_gain_csv(b, &g));
        assert_eq!(c.lines().next(), Some(GAIN_HEADER));
    }
}
