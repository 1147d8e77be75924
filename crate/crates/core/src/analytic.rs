//! Closed-form steady-state powers under harmonic displacement.
//!
//! All formulas assume an ideal, leakage-free insert with a prescribed
//! displacement `u = u_m sin(omega t)`; the leakage resistance of
//! [`PiezoParams`] is ignored here.

use std::f64::consts::{FRAC_PI_2, PI};

use crate::lumped::PiezoParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicOperatingPoint {
    /// Displacement amplitude (m).
    pub u_m: f64,
    /// Angular frequency (rad/s).
    pub omega: f64,
}

impl HarmonicOperatingPoint {
    pub fn new(u_m: f64, omega: f64) -> Self {
        HarmonicOperatingPoint { u_m, omega }
    }

    pub fn from_frequency(u_m: f64, freq: f64) -> Self {
        HarmonicOperatingPoint {
            u_m,
            omega: 2.0 * PI * freq,
        }
    }
}

/// Where the optimum sits: a load resistance or a load voltage.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OptimalArgument {
    Resistance(f64),
    Voltage(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OptimalPoint {
    pub p_max: f64,
    pub argument: OptimalArgument,
}

impl OptimalPoint {
    pub fn value(&self) -> f64 {
        match self.argument {
            OptimalArgument::Resistance(r) => r,
            OptimalArgument::Voltage(v) => v,
        }
    }
}

/// Standard interface power into a resistive load.
pub fn standard_power_resistive(p: &PiezoParams, op: &HarmonicOperatingPoint, r_load: f64) -> f64 {
    let source = p.alpha * op.omega * op.u_m;
    let denom = r_load * p.c0 * op.omega + FRAC_PI_2;
    r_load * source * source / (denom * denom)
}

/// Optimal load resistance `pi / (2 c0 omega)` and the power it yields.
pub fn standard_optimum_resistive(p: &PiezoParams, op: &HarmonicOperatingPoint) -> OptimalPoint {
    OptimalPoint {
        p_max: p.alpha * p.alpha * op.omega * op.u_m * op.u_m / (2.0 * PI * p.c0),
        argument: OptimalArgument::Resistance(PI / (2.0 * p.c0 * op.omega)),
    }
}

/// Standard interface power into a fixed-voltage load.
///
/// Zero once `v_load` reaches the open-circuit amplitude: the bridge never
/// conducts there, so the parabola's negative branch is not physical.
pub fn standard_power_voltage(p: &PiezoParams, op: &HarmonicOperatingPoint, v_load: f64) -> f64 {
    let v_open = p.alpha * op.u_m / p.c0;
    if v_load >= v_open {
        return 0.0;
    }
    (2.0 * p.c0 * op.omega / PI) * v_load * (v_open - v_load)
}

pub fn standard_optimum_voltage(p: &PiezoParams, op: &HarmonicOperatingPoint) -> OptimalPoint {
    let v_opt = p.alpha * op.u_m / (2.0 * p.c0);
    OptimalPoint {
        p_max: (2.0 * p.c0 * op.omega / PI) * v_opt * v_opt,
        argument: OptimalArgument::Voltage(v_opt),
    }
}

/// Power extracted by synchronous charge extraction, independent of the load.
pub fn sece_power(p: &PiezoParams, op: &HarmonicOperatingPoint) -> f64 {
    2.0 * p.alpha * p.alpha * op.omega * op.u_m * op.u_m / (PI * p.c0)
}

/// Displacement amplitude at which the Standard optimum delivers `p_max`.
pub fn amplitude_for_standard_power(p: &PiezoParams, omega: f64, p_max: f64) -> f64 {
    (p_max * 2.0 * PI * p.c0 / (p.alpha * p.alpha * omega)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const P: PiezoParams = PiezoParams::REFERENCE;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs()
    }

    #[test]
    fn optimal_loads_per_mode() {
        // pi / (2 * 41.8e-9 * 2 pi f) = 1 / (4 * 41.8e-9 * f)
        for (f, expected, reported) in [
            (56.0, 106_800.0, 106e3),
            (334.0, 17_906.0, 18e3),
            (915.0, 6_536.3, 6.5e3),
        ] {
            let op = HarmonicOperatingPoint::from_frequency(1e-4, f);
            let r = standard_optimum_resistive(&P, &op).value();
            assert!(rel(r, expected) < 1e-3, "{f} Hz: {r}");
            assert!(rel(r, reported) < 0.01, "{f} Hz: {r}");
        }
    }

    #[test]
    fn zero_cases() {
        let op = HarmonicOperatingPoint::from_frequency(0.0, 56.0);
        assert_eq!(standard_optimum_resistive(&P, &op).p_max, 0.0);
        assert_eq!(sece_power(&P, &op), 0.0);
        let opt = standard_optimum_voltage(&P, &op);
        assert_eq!((opt.p_max, opt.value()), (0.0, 0.0));
        let op = HarmonicOperatingPoint::from_frequency(1e-3, 56.0);
        assert_eq!(standard_power_resistive(&P, &op, 0.0), 0.0);
        assert_eq!(standard_power_voltage(&P, &op, 0.0), 0.0);
        let v_open = P.alpha * 1e-3 / P.c0;
        assert_eq!(standard_power_voltage(&P, &op, v_open), 0.0);
        assert_eq!(standard_power_voltage(&P, &op, 2.0 * v_open), 0.0);
    }

    #[test]
    fn optima_agree() {
        let op = HarmonicOperatingPoint::from_frequency(3e-4, 334.0);
        let r = standard_optimum_resistive(&P, &op);
        let v = standard_optimum_voltage(&P, &op);
        assert!(rel(standard_power_resistive(&P, &op, r.value()), r.p_max) < 1e-14);
        assert!(rel(standard_power_voltage(&P, &op, v.value()), r.p_max) < 1e-14);
        assert!(rel(v.p_max, r.p_max) < 1e-14);
        assert!(matches!(r.argument, OptimalArgument::Resistance(_)));
        assert!(matches!(v.argument, OptimalArgument::Voltage(_)));
    }

    #[test]
    fn voltage_optimum_scaling() {
        let a = standard_optimum_voltage(&P, &HarmonicOperatingPoint::from_frequency(1e-4, 56.0));
        let b = standard_optimum_voltage(&P, &HarmonicOperatingPoint::from_frequency(2e-4, 56.0));
        assert!(rel(b.value(), 2.0 * a.value()) < 1e-14);
        assert!(rel(b.p_max, 4.0 * a.p_max) < 1e-14);
    }

    #[test]
    fn reference_fixture_one_milliwatt() {
        let omega = 2.0 * PI * 56.0;
        let u_m = amplitude_for_standard_power(&P, omega, 1e-3);
        // hand evaluation: sqrt(1e-3 * 2 pi * 41.8e-9 / (1e-6 * 2 pi * 56)) = 8.6397e-4
        assert!(rel(u_m, 8.6397e-4) < 1e-4, "{u_m}");
        let op = HarmonicOperatingPoint::new(8.64e-4, omega);
        let p = sece_power(&P, &op);
        assert!(rel(p, 4.0e-3) < 2e-3, "{p}");
    }

    #[test]
    fn dense_sweep_peaks_at_optimum() {
        // brute force: scan the resistive power law on a fine log grid
        let op = HarmonicOperatingPoint::from_frequency(8.64e-4, 56.0);
        let opt = standard_optimum_resistive(&P, &op);
        let n = 20_001;
        let (lo, hi) = (1e3f64.ln(), 1e7f64.ln());
        let step = (hi - lo) / (n - 1) as f64;
        let (mut best_r, mut best_p) = (0.0, 0.0);
        for i in 0..n {
            let r = (lo + step * i as f64).exp();
            let p = standard_power_resistive(&P, &op, r);
            if p > best_p {
                best_p = p;
                best_r = r;
            }
        }
        assert!((best_r.ln() - opt.value().ln()).abs() <= step);
        assert!(rel(best_r, 106.8e3) < 0.01);
        assert!(rel(best_p, opt.p_max) < 1e-6);
        assert!(rel(opt.p_max, 1e-3) < 1e-3);
    }

    proptest! {
        #[test]
        fn factor_four(alpha in 1e-5f64..1e-1, c0 in 1e-10f64..1e-6, u_m in 1e-7f64..1e-2, f in 1.0f64..5e3) {
            let p = PiezoParams { c0, alpha, k_e: 1.0, r_leak: f64::INFINITY };
            let op = HarmonicOperatingPoint::from_frequency(u_m, f);
            let ratio = sece_power(&p, &op) / standard_optimum_resistive(&p, &op).p_max;
            prop_assert!((ratio - 4.0).abs() < 1e-12);
        }

        #[test]
        fn amplitude_and_frequency_scaling(k in 0.1f64..10.0, u_m in 1e-6f64..1e-3, f in 10.0f64..2e3, r in 1e2f64..1e7, frac in 0.0f64..1.0) {
            let op = HarmonicOperatingPoint::from_frequency(u_m, f);
            let amp = HarmonicOperatingPoint::new(k * u_m, op.omega);
            let v = frac * P.alpha * u_m / P.c0;
            prop_assert!(rel(standard_power_resistive(&P, &amp, r), k * k * standard_power_resistive(&P, &op, r)) < 1e-12);
            prop_assert!(rel(sece_power(&P, &amp), k * k * sece_power(&P, &op)) < 1e-12);
            prop_assert!(rel(standard_optimum_resistive(&P, &amp).p_max, k * k * standard_optimum_resistive(&P, &op).p_max) < 1e-12);
            if frac > 1e-6 && frac < 1.0 - 1e-6 {
                prop_assert!(rel(standard_power_voltage(&P, &amp, k * v), k * k * standard_power_voltage(&P, &op, v)) < 1e-9);
            }
            // linear in omega at fixed u_m (for the resistive law, with r scaled to keep r*omega fixed)
            let fast = HarmonicOperatingPoint::new(u_m, k * op.omega);
            prop_assert!(rel(sece_power(&P, &fast), k * sece_power(&P, &op)) < 1e-12);
            prop_assert!(rel(standard_optimum_resistive(&P, &fast).p_max, k * standard_optimum_resistive(&P, &op).p_max) < 1e-12);
            if frac > 1e-6 && frac < 1.0 - 1e-6 {
                prop_assert!(rel(standard_power_voltage(&P, &fast, v), k * standard_power_voltage(&P, &op, v)) < 1e-9);
            }
            prop_assert!(rel(standard_power_resistive(&P, &fast, r / k), k * standard_power_resistive(&P, &op, r)) < 1e-9);
        }

        #[test]
        fn voltage_law_is_parabola(u_m in 1e-6f64..1e-3, x in 0.0f64..1.0) {
            let op = HarmonicOperatingPoint::from_frequency(u_m, 56.0);
            let v_open = P.alpha * u_m / P.c0;
            let vertex = standard_optimum_voltage(&P, &op);
            prop_assert!((vertex.value() - 0.5 * v_open).abs() <= 1e-12 * v_open);
            let p = standard_power_voltage(&P, &op, x * v_open);
            let expected = vertex.p_max * 4.0 * x * (1.0 - x);
            prop_assert!((p - expected).abs() <= 1e-9 * vertex.p_max);
            prop_assert!(p <= vertex.p_max * (1.0 + 1e-12));
        }
    }
}
