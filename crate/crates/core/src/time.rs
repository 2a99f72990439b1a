//! Explicit fourth-order two-step scheme for `w_tt = Q w + G(t)`.

use std::io::Write;

use crate::error::{Error, Result};

/// Largest stable step `sqrt(12 / rho_tilde) * h`.
pub fn max_stable_step(rho_tilde: f64, h: f64) -> f64 {
    (12.0 / rho_tilde).sqrt() * h
}

/// Step count and step size reaching `t_final` exactly with `k <= safety * k_max`.
pub fn step_plan(t_final: f64, k_max: f64, safety: f64) -> (usize, f64) {
    let n = (t_final / (safety * k_max)).ceil().max(1.0) as usize;
    (n, t_final / n as f64)
}

pub trait WaveSystem: Sync {
    fn len(&self) -> usize;

    fn apply_q(&self, w: &[f64], out: &mut [f64]);

    /// `nt`-th time derivative of the forcing at `t`; `None` when homogeneous.
    fn forcing(&self, t: f64, nt: usize) -> Option<Vec<f64>>;
}

/// Scalar test problem `w'' = -omega^2 w`.
#[derive(Clone, Copy, Debug)]
pub struct Oscillator {
    pub omega: f64,
}

impl WaveSystem for Oscillator {
    fn len(&self) -> usize {
        1
    }

    fn apply_q(&self, w: &[f64], out: &mut [f64]) {
        out[0] = -self.omega * self.omega * w[0];
    }

    fn forcing(&self, _t: f64, _nt: usize) -> Option<Vec<f64>> {
        None
    }
}

/// First step of the two-step recurrence.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Startup {
    /// Taylor terms through `k^3`; leaves an `O(k^3)` global error.
    Cubic,
    /// Adds `k^4/24 (Q (Q f1 + G) + G_tt)` so the global error stays `O(k^4)`.
    #[default]
    Quartic,
}

#[derive(Clone, Debug)]
pub struct SimulationState {
    pub prev: Vec<f64>,
    pub curr: Vec<f64>,
    /// Index of `curr`.
    pub n: usize,
}

pub const BLOWUP_FACTOR: f64 = 1e6;

pub struct Integrator<'a, S: WaveSystem> {
    sys: &'a S,
    k: f64,
    pub state: SimulationState,
    reference_norm: f64,
    qa: Vec<f64>,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

impl<'a, S: WaveSystem> Integrator<'a, S> {
    /// Starts from `w(0) = f1`, `w_t(0) = f2` with the default startup step.
    pub fn new(sys: &'a S, k: f64, f1: &[f64], f2: &[f64]) -> Result<Self> {
        Self::with_startup(sys, k, f1, f2, Startup::default())
    }

    pub fn with_startup(
        sys: &'a S,
        k: f64,
        f1: &[f64],
        f2: &[f64],
        startup: Startup,
    ) -> Result<Self> {
        let n = sys.len();
        if f1.len() != n || f2.len() != n {
            return Err(Error::Mismatch(format!(
                "initial data sizes {} / {} for a system of {n}",
                f1.len(),
                f2.len()
            )));
        }
        if !(k > 0.0) {
            return Err(Error::Misuse(format!(
                "time step must be positive, got {k}"
            )));
        }
        let k2 = k * k;
        let mut w1 = f1.to_vec();
        // acc = w_tt(0) = Q f1 + G(0)
        let mut acc = vec![0.0; n];
        sys.apply_q(f1, &mut acc);
        if let Some(g) = sys.forcing(0.0, 0) {
            axpy(1.0, &g, &mut acc);
        }
        axpy(k2 / 2.0, &acc, &mut w1);
        axpy(k, f2, &mut w1);
        let mut tmp = vec![0.0; n];
        sys.apply_q(f2, &mut tmp);
        axpy(k * k2 / 6.0, &tmp, &mut w1);
        if let Some(gt) = sys.forcing(0.0, 1) {
            axpy(k * k2 / 6.0, &gt, &mut w1);
        }
        if startup == Startup::Quartic {
            sys.apply_q(&acc, &mut tmp);
            if let Some(gtt) = sys.forcing(0.0, 2) {
                axpy(1.0, &gtt, &mut tmp);
            }
            axpy(k2 * k2 / 24.0, &tmp, &mut w1);
        }
        let reference_norm = norm(f1).max(norm(&w1));
        Ok(Self {
            sys,
            k,
            state: SimulationState {
                prev: f1.to_vec(),
                curr: w1,
                n: 1,
            },
            reference_norm,
            qa: tmp,
        })
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    pub fn t(&self) -> f64 {
        self.state.n as f64 * self.k
    }

    /// `w+ = 2w - w- + k^2 a + k^4/12 (Q a + G_tt)` with `a = Q w + G`.
    pub fn step(&mut self) -> Result<()> {
        let n = self.sys.len();
        let k2 = self.k * self.k;
        let t = self.t();
        let mut a = vec![0.0; n];
        self.sys.apply_q(&self.state.curr, &mut a);
        if let Some(g) = self.sys.forcing(t, 0) {
            axpy(1.0, &g, &mut a);
        }
        self.sys.apply_q(&a, &mut self.qa);
        if let Some(gtt) = self.sys.forcing(t, 2) {
            axpy(1.0, &gtt, &mut self.qa);
        }
        let st = &mut self.state;
        // Reuse the old buffer for the new level.
        for i in 0..n {
            st.prev[i] = 2.0 * st.curr[i] - st.prev[i] + k2 * a[i] + k2 * k2 / 12.0 * self.qa[i];
        }
        std::mem::swap(&mut st.prev, &mut st.curr);
        st.n += 1;
        let nrm = norm(&st.curr);
        if !nrm.is_finite()
            || (self.reference_norm > 0.0 && nrm > BLOWUP_FACTOR * self.reference_norm)
        {
            let n = st.n;
            return Err(Error::Unstable(format!(
                "state norm {nrm:.3e} exceeds {BLOWUP_FACTOR:e} x initial {:.3e} at step {n} (t = {:.6})",
                self.reference_norm,
                n as f64 * self.k
            )));
        }
        Ok(())
    }

    pub fn run(&mut self, n_steps: usize) -> Result<()> {
        while self.state.n < n_steps {
            self.step()?;
        }
        Ok(())
    }

    pub fn system(&self) -> &S {
        self.sys
    }
}

/// Velocity at the middle of three levels:
/// `c - k^2/6 (Q c + G_t)` with `c = (w+ - w-) / 2k`, accurate to `O(k^4)`.
pub fn velocity_from_levels<S: WaveSystem>(
    sys: &S,
    k: f64,
    t_mid: f64,
    w_minus: &[f64],
    w_plus: &[f64],
) -> Vec<f64> {
    let c: Vec<f64> = w_plus
        .iter()
        .zip(w_minus)
        .map(|(p, m)| (p - m) / (2.0 * k))
        .collect();
    let mut qc = vec![0.0; c.len()];
    sys.apply_q(&c, &mut qc);
    if let Some(gt) = sys.forcing(t_mid, 1) {
        axpy(1.0, &gt, &mut qc);
    }
    let mut v = c;
    axpy(-k * k / 6.0, &qc, &mut v);
    v
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct EnergyTrace {
    pub rows: Vec<(f64, f64, f64)>,
}

impl EnergyTrace {
    pub fn push(&mut self, t: f64, e: f64) {
        let e0 = self.rows.first().map_or(e, |r| r.1);
        let drift = if e0 != 0.0 { (e - e0) / e0 } else { 0.0 };
        self.rows.push((t, e, drift));
    }

    pub fn max_drift(&self) -> f64 {
        self.rows.iter().map(|r| r.2.abs()).fold(0.0, f64::max)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "t,E,relative_drift")?;
        for (t, e, d) in &self.rows {
            writeln!(out, "{t:.17e},{e:.17e},{d:.17e}")?;
        }
        Ok(())
    }
}

/// Integrates to step `n_steps`, recording the energy `energy(w, w_t)` at every level.
pub fn integrate_with_energy<S: WaveSystem>(
    sys: &S,
    k: f64,
    f1: &[f64],
    f2: &[f64],
    n_steps: usize,
    energy: impl Fn(&[f64], &[f64]) -> f64,
) -> Result<(Vec<f64>, EnergyTrace)> {
    let mut trace = EnergyTrace::default();
    trace.push(0.0, energy(f1, f2));
    let mut it = Integrator::new(sys, k, f1, f2)?;
    let mut older = f1.to_vec();
    while it.state.n < n_steps {
        it.step()?;
        // prev is w_{n-1}; older is w_{n-2}; curr is w_n.
        let t_mid = (it.state.n - 1) as f64 * k;
        let v = velocity_from_levels(sys, k, t_mid, &older, &it.state.curr);
        trace.push(t_mid, energy(&it.state.prev, &v));
        older.clone_from(&it.state.prev);
    }
    Ok((it.state.curr, trace))
}
