//! Classic fixed-step RK4 over flat state slices.

/// Reusable stage buffers so stepping never allocates.
#[derive(Debug, Clone)]
pub(crate) struct Rk4 {
    k1: Vec<f64>,
    k2: Vec<f64>,
    k3: Vec<f64>,
    k4: Vec<f64>,
    tmp: Vec<f64>,
}

impl Rk4 {
    pub(crate) fn new(n: usize) -> Self {
        Rk4 {
            k1: vec![0.0; n],
            k2: vec![0.0; n],
            k3: vec![0.0; n],
            k4: vec![0.0; n],
            tmp: vec![0.0; n],
        }
    }

    /// Advances `y` at time `t` by `h` into `out`. `f(t, y, dy)` writes the derivative.
    ///
    /// The update is component-wise, so components whose derivative does not
    /// depend on the others evolve bit-identically regardless of what else is
    /// in the state vector.
    #[inline]
    #[allow(clippy::needless_range_loop)]
    pub(crate) fn step<F>(&mut self, f: &F, t: f64, y: &[f64], h: f64, out: &mut [f64])
    where
        F: Fn(f64, &[f64], &mut [f64]),
    {
        let n = y.len();
        debug_assert_eq!(out.len(), n);
        let half = 0.5 * h;

        f(t, y, &mut self.k1);
        for i in 0..n {
            self.tmp[i] = y[i] + half * self.k1[i];
        }
        f(t + half, &self.tmp, &mut self.k2);
        for i in 0..n {
            self.tmp[i] = y[i] + half * self.k2[i];
        }
        f(t + half, &self.tmp, &mut self.k3);
        for i in 0..n {
            self.tmp[i] = y[i] + h * self.k3[i];
        }
        f(t + h, &self.tmp, &mut self.k4);
        let sixth = h / 6.0;
        for i in 0..n {
            out[i] = y[i] + sixth * (self.k1[i] + 2.0 * self.k2[i] + 2.0 * self.k3[i] + self.k4[i]);
        }
    }
}
