//! Experiment drivers: spectra, manufactured-solution convergence and energy runs.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};
use std::time::Instant;

use nalgebra::DMatrix;

use crate::block::{build_block, BlockGrid, BoundaryData};
use crate::coupling::{CoupledSystem, Geometry, InterfaceSpec, Method, Orientation};
use crate::diagnostics::{
    convergence_rate, hnorm_error, scaled_spectral_radius, spectral_radius, AnalyticSolution,
    BlockSide, ExperimentRecord, PowerIterationOptions,
};
use crate::error::Result;
use crate::interp::InterpKind;
use crate::sbp::{build_sbp_d2, Order};
use crate::time::{
    integrate_with_energy, max_stable_step, step_plan, velocity_from_levels, EnergyTrace,
    Integrator, WaveSystem,
};

/// Coupled system plus boundary data for both blocks.
pub struct Problem<'a> {
    pub sys: &'a CoupledSystem,
    data: Option<(Box<dyn BoundaryData + 'a>, Box<dyn BoundaryData + 'a>)>,
}

impl<'a> Problem<'a> {
    pub fn homogeneous(sys: &'a CoupledSystem) -> Self {
        Self { sys, data: None }
    }

    pub fn manufactured(sys: &'a CoupledSystem, sol: &AnalyticSolution) -> Self {
        let left = sol.boundary_data(BlockSide::Left, sys.left.grid.clone());
        let right = sol.boundary_data(BlockSide::Right, sys.right.grid.clone());
        Self {
            sys,
            data: Some((Box::new(left), Box::new(right))),
        }
    }
}

impl WaveSystem for Problem<'_> {
    fn len(&self) -> usize {
        self.sys.len()
    }

    fn apply_q(&self, w: &[f64], out: &mut [f64]) {
        self.sys.apply_q(w, out);
    }

    fn forcing(&self, t: f64, nt: usize) -> Option<Vec<f64>> {
        let (l, r) = self.data.as_ref()?;
        Some(
            self.sys
                .data_vector(&l.at(t, nt), &r.at(t, nt))
                .expect("boundary data sized from the block grids"),
        )
    }
}

fn neumann_radius_cache() -> &'static Mutex<HashMap<(Order, usize), f64>> {
    static CACHE: OnceLock<Mutex<HashMap<(Order, usize), f64>>> = OnceLock::new();
    CACHE.get_or_init(|| Mutex::new(HashMap::new()))
}

/// `h^2 rho(H^{-1} M)` of the 1D operator, from a dense symmetric eigensolve.
pub fn neumann_radius_1d(order: Order, m: usize) -> Result<f64> {
    if let Some(&r) = neumann_radius_cache().lock().unwrap().get(&(order, m)) {
        return Ok(r);
    }
    let op = build_sbp_d2(order, m, 1.0)?;
    let mut a = op.stiffness.to_dense();
    let s: Vec<f64> = op.norm.iter().map(|w| 1.0 / w.sqrt()).collect();
    for j in 0..m {
        for i in 0..m {
            a[(i, j)] *= s[i] * s[j];
        }
    }
    let a = (&a + a.transpose()) * 0.5;
    let r = a
        .symmetric_eigenvalues()
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()));
    neumann_radius_cache().lock().unwrap().insert((order, m), r);
    Ok(r)
}

/// Spectral radius of one uncoupled Neumann block, known exactly from the 1D factors.
pub fn block_radius(order: Order, grid: &BlockGrid, c: f64) -> Result<f64> {
    let rx = neumann_radius_1d(order, grid.mx)?;
    let ry = neumann_radius_1d(order, grid.my)?;
    Ok(c * c * (rx / (grid.hx * grid.hx) + ry / (grid.hy * grid.hy)))
}

/// Scaled radius used to pick the time step: the larger of the two uncoupled blocks,
/// scaled by the coarse spacing.
pub fn reference_rho_tilde(sys: &CoupledSystem) -> Result<f64> {
    let rl = block_radius(sys.spec.order, &sys.left.grid, sys.spec.c1)?;
    let rr = block_radius(sys.spec.order, &sys.right.grid, sys.spec.c2)?;
    Ok(scaled_spectral_radius(rl.max(rr), sys.h()))
}

/// Time step `k` and step count for a run to `t_final`.
pub fn plan_steps(sys: &CoupledSystem, t_final: f64, safety: f64) -> Result<(usize, f64)> {
    let k_max = max_stable_step(reference_rho_tilde(sys)?, sys.h());
    Ok(step_plan(t_final, k_max, safety))
}

/// Scaled spectral radius of the coupled `Q` by power iteration.
pub fn coupled_rho_tilde(sys: &CoupledSystem, opts: PowerIterationOptions) -> Result<f64> {
    let rho = spectral_radius(
        sys.len(),
        |x, y| sys.apply_q(x, y),
        Some(sys.weights()),
        opts,
    )?;
    Ok(scaled_spectral_radius(rho, sys.h()))
}

/// Scaled spectral radius of the left block alone with Neumann SATs on all sides.
pub fn single_block_rho_tilde(
    order: Order,
    geometry: &Geometry,
    m: usize,
    c: f64,
    opts: PowerIterationOptions,
) -> Result<f64> {
    let block = build_block(geometry.left_grid(m)?, c, order)?;
    let rho = spectral_radius(
        block.len(),
        |x, y| {
            y.iter_mut().for_each(|v| *v = 0.0);
            block.operator_acc(1.0, x, y)
        },
        Some(&block.weights),
        opts,
    )?;
    Ok(scaled_spectral_radius(rho, block.grid.hx))
}

/// Projected samples of the manufactured solution (`nt = 0`) or its velocity (`nt = 1`).
pub fn manufactured_state(
    sys: &CoupledSystem,
    sol: &AnalyticSolution,
    t: f64,
    nt: u32,
) -> Vec<f64> {
    let mut w = sol.sample(BlockSide::Left, &sys.left.grid, t, nt);
    w.extend(sol.sample(BlockSide::Right, &sys.right.grid, t, nt));
    w
}

#[derive(Clone, Debug, PartialEq)]
pub struct ManufacturedRun {
    pub error: f64,
    pub steps: usize,
    pub k: f64,
    pub final_state: Vec<f64>,
}

/// Integrates the manufactured problem to `t_final` and measures the weighted error.
pub fn run_manufactured(sys: &CoupledSystem, t_final: f64, safety: f64) -> Result<ManufacturedRun> {
    let sol = AnalyticSolution::new(sys.spec.c1, sys.spec.c2)?;
    let (n, k) = plan_steps(sys, t_final, safety)?;
    let f1 = sys.project(&manufactured_state(sys, &sol, 0.0, 0));
    let f2 = sys.project(&manufactured_state(sys, &sol, 0.0, 1));
    let problem = Problem::manufactured(sys, &sol);
    let mut it = Integrator::new(&problem, k, &f1, &f2)?;
    it.run(n)?;
    let exact = manufactured_state(sys, &sol, t_final, 0);
    let error = hnorm_error(&it.state.curr, &exact, sys.weights())?;
    Ok(ManufacturedRun {
        error,
        steps: n,
        k,
        final_state: it.state.curr,
    })
}

/// `exp(-((x - x0)^2 + (y - y0)^2) / width^2)` sampled on both blocks.
pub fn gaussian_pulse(sys: &CoupledSystem, center: (f64, f64), width: f64) -> Vec<f64> {
    let f = |x: f64, y: f64| {
        (-((x - center.0).powi(2) + (y - center.1).powi(2)) / (width * width)).exp()
    };
    let mut w = sys.left.grid.sample(f);
    w.extend(sys.right.grid.sample(f));
    w
}

/// Homogeneous run from `(f1, f2)` (projected first) with the energy at every level.
pub fn run_energy(
    sys: &CoupledSystem,
    f1: &[f64],
    f2: &[f64],
    t_final: f64,
    safety: f64,
) -> Result<(Vec<f64>, EnergyTrace)> {
    let (n, k) = plan_steps(sys, t_final, safety)?;
    run_energy_steps(sys, f1, f2, n, k)
}

pub fn run_energy_steps(
    sys: &CoupledSystem,
    f1: &[f64],
    f2: &[f64],
    n: usize,
    k: f64,
) -> Result<(Vec<f64>, EnergyTrace)> {
    let f1 = sys.project(f1);
    let f2 = sys.project(f2);
    let problem = Problem::homogeneous(sys);
    integrate_with_energy(&problem, k, &f1, &f2, n, |w, wt| sys.energy(w, wt))
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct SimulationOutput {
    /// `(t, w)` at the step nearest each requested time.
    pub snapshots: Vec<(f64, Vec<f64>)>,
    pub trace: EnergyTrace,
    pub final_state: Vec<f64>,
    pub k: f64,
    pub steps: usize,
}

/// Integrates `problem` from the projected `(f1, f2)`, keeping snapshots and the energy trace.
pub fn simulate(
    problem: &Problem<'_>,
    f1: &[f64],
    f2: &[f64],
    t_final: f64,
    safety: f64,
    snapshot_times: &[f64],
) -> Result<SimulationOutput> {
    let sys = problem.sys;
    let (n, k) = plan_steps(sys, t_final, safety)?;
    let f1 = sys.project(f1);
    let f2 = sys.project(f2);
    let mut wanted: Vec<(usize, f64)> = snapshot_times
        .iter()
        .filter(|&&t| (0.0..=t_final).contains(&t))
        .map(|&t| ((t / k).round() as usize, t))
        .collect();
    wanted.sort_by_key(|w| w.0);
    let mut out = SimulationOutput {
        k,
        steps: n,
        ..Default::default()
    };
    let take = |level: usize, w: &[f64], out: &mut SimulationOutput| {
        for _ in wanted.iter().filter(|x| x.0 == level) {
            out.snapshots.push((level as f64 * k, w.to_vec()));
        }
    };
    out.trace.push(0.0, sys.energy(&f1, &f2));
    take(0, &f1, &mut out);
    let mut it = Integrator::new(problem, k, &f1, &f2)?;
    take(1, &it.state.curr, &mut out);
    let mut older = f1.clone();
    while it.state.n < n {
        it.step()?;
        let t_mid = (it.state.n - 1) as f64 * k;
        let v = velocity_from_levels(problem, k, t_mid, &older, &it.state.curr);
        out.trace.push(t_mid, sys.energy(&it.state.prev, &v));
        older.clone_from(&it.state.prev);
        take(it.state.n, &it.state.curr, &mut out);
    }
    out.final_state = it.state.curr;
    Ok(out)
}

/// Eigenvalues of the dense `Q` of a small system.
pub fn dense_spectrum(sys: &CoupledSystem) -> Vec<nalgebra::Complex<f64>> {
    let q: DMatrix<f64> = sys.dense_q();
    q.complex_eigenvalues().iter().copied().collect()
}

/// One spectrum or convergence case.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Case {
    pub method: Method,
    pub order: Order,
    pub kind: InterpKind,
}

impl Case {
    pub fn spec(
        &self,
        orientation: Orientation,
        op_substitution: bool,
        c1: f64,
        c2: f64,
    ) -> InterfaceSpec {
        let mut s = InterfaceSpec::new(self.order, self.kind, self.method);
        s.orientation = orientation;
        s.op_substitution = op_substitution;
        s.c1 = c1;
        s.c2 = c2;
        s
    }

    pub fn record(&self, m: usize) -> ExperimentRecord {
        ExperimentRecord {
            method: self.method.label().to_string(),
            order: self.order.value(),
            interp: self.kind.label().to_string(),
            m,
            rho_tilde: None,
            log10_error: None,
            rate: None,
            seconds: 0.0,
        }
    }
}

/// Parameters shared by the sweep drivers.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepSettings {
    pub geometry: Geometry,
    pub orientation: Orientation,
    pub op_substitution: bool,
    pub c1: f64,
    pub c2: f64,
    pub safety: f64,
    pub t_final: f64,
    pub power: PowerIterationOptions,
    pub record_time: bool,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            geometry: Geometry::default(),
            orientation: Orientation::Standard,
            op_substitution: true,
            c1: 1.0,
            c2: 0.5,
            safety: 0.1,
            t_final: 2.0,
            power: PowerIterationOptions::default(),
            record_time: false,
        }
    }
}

impl SweepSettings {
    fn seconds(&self, start: Instant) -> f64 {
        if self.record_time {
            start.elapsed().as_secs_f64()
        } else {
            0.0
        }
    }

    pub fn system(&self, case: &Case, m: usize) -> Result<CoupledSystem> {
        let spec = case.spec(self.orientation, self.op_substitution, self.c1, self.c2);
        CoupledSystem::new(spec, &self.geometry, m)
    }
}

/// Coupled spectral radius of one case; failures leave `rho_tilde` empty.
pub fn spectrum_row(settings: &SweepSettings, case: &Case, m: usize) -> ExperimentRecord {
    let start = Instant::now();
    let mut row = case.record(m);
    match settings
        .system(case, m)
        .and_then(|sys| coupled_rho_tilde(&sys, settings.power))
    {
        Ok(r) => row.rho_tilde = Some(r),
        Err(e) => log::error!(
            "spectrum {} order {} {} m={m}: {e}",
            case.method,
            case.order,
            case.kind
        ),
    }
    row.seconds = settings.seconds(start);
    row
}

/// Single-block reference row, labelled `single`.
pub fn single_block_row(settings: &SweepSettings, order: Order, m: usize) -> ExperimentRecord {
    let start = Instant::now();
    let mut row = ExperimentRecord {
        method: "single".into(),
        order: order.value(),
        interp: "none".into(),
        m,
        rho_tilde: None,
        log10_error: None,
        rate: None,
        seconds: 0.0,
    };
    match single_block_rho_tilde(order, &settings.geometry, m, settings.c1, settings.power) {
        Ok(r) => row.rho_tilde = Some(r),
        Err(e) => log::error!("single block order {order} m={m}: {e}"),
    }
    row.seconds = settings.seconds(start);
    row
}

/// Error at `t_final` for one case and resolution.
pub fn convergence_row(settings: &SweepSettings, case: &Case, m: usize) -> ExperimentRecord {
    let start = Instant::now();
    let mut row = case.record(m);
    let run = settings
        .system(case, m)
        .and_then(|sys| run_manufactured(&sys, settings.t_final, settings.safety));
    match run {
        Ok(r) => {
            log::info!(
                "{} order {} {} m={m}: {} steps, log10 e = {:.3}",
                case.method,
                case.order,
                case.kind,
                r.steps,
                r.error.log10()
            );
            row.log10_error = Some(r.error.log10());
        }
        Err(e) => log::error!(
            "converge {} order {} {} m={m}: {e}",
            case.method,
            case.order,
            case.kind
        ),
    }
    row.seconds = settings.seconds(start);
    row
}

/// Fills `rate` from consecutive rows of the same case (rows ordered by ascending `m`).
pub fn fill_rates(rows: &mut [ExperimentRecord]) {
    for i in 1..rows.len() {
        let (a, b) = (&rows[i - 1], &rows[i]);
        if a.method != b.method || a.order != b.order || a.interp != b.interp {
            continue;
        }
        if let (Some(e1), Some(e2)) = (a.log10_error, b.log10_error) {
            let q = convergence_rate(10f64.powf(e1), 10f64.powf(e2), a.m as f64, b.m as f64);
            rows[i].rate = Some(q);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_radius_matches_known_values() {
        assert!((neumann_radius_1d(Order::Fourth, 101).unwrap() - 5.3317).abs() < 5e-3);
        assert!((neumann_radius_1d(Order::Sixth, 101).unwrap() - 14.1795).abs() < 1.5e-2);
    }

    #[test]
    fn block_radius_agrees_with_power_iteration() {
        let g = Geometry::default();
        let opts = PowerIterationOptions {
            tol: 1e-10,
            ..Default::default()
        };
        let exact = block_radius(Order::Fourth, &g.left_grid(21).unwrap(), 1.0).unwrap();
        let est =
            single_block_rho_tilde(Order::Fourth, &g, 21, 1.0, opts).unwrap() / 0.5f64.powi(2);
        assert!((est - exact).abs() < 1e-4 * exact, "{est} vs {exact}");
    }

    #[test]
    fn manufactured_error_small_at_moderate_m() {
        let s = SweepSettings::default();
        let case = Case {
            method: Method::Projection,
            order: Order::Fourth,
            kind: InterpKind::OrderPreserving,
        };
        let sys = s.system(&case, 26).unwrap();
        let r = run_manufactured(&sys, 0.5, 0.1).unwrap();
        assert!(r.error < 0.2, "error {}", r.error);
    }

    #[test]
    fn rates_use_consecutive_rows_of_one_case() {
        let mk = |m, e: f64| ExperimentRecord {
            method: "projection".into(),
            order: 4,
            interp: "op".into(),
            m,
            rho_tilde: None,
            log10_error: Some(e),
            rate: None,
            seconds: 0.0,
        };
        let mut rows = vec![mk(26, -2.0), mk(51, -3.0)];
        fill_rates(&mut rows);
        assert_eq!(rows[0].rate, None);
        assert!((rows[1].rate.unwrap() + 10f64.ln() / (51.0f64 / 26.0).ln()).abs() < 1e-12);
    }
}
