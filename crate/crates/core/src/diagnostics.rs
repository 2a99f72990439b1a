//! Spectral radius, errors, rates and the manufactured two-block solution.

use std::f64::consts::FRAC_PI_2;
use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::block::{BlockGrid, BoundaryData, Side, SideValues};
use crate::error::{Error, Result};

/// Plane-wave pair solving the coupled problem with `u = v` and `c1^2 u_x = c2^2 v_x` at `x = 0`:
/// `u = cos(x + y - a t) + k2 cos(x - y + a t)`, `v = (1 + k2) cos(k1 x + y - a t)`, `a = sqrt(2) c1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnalyticSolution {
    pub c1: f64,
    pub c2: f64,
    pub k1: f64,
    pub k2: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSide {
    Left,
    Right,
}

// (amplitude, kx, ky, omega) of each cosine term.
type Wave = (f64, f64, f64, f64);

impl AnalyticSolution {
    pub fn new(c1: f64, c2: f64) -> Result<Self> {
        let s = 2.0 * c1 * c1 / (c2 * c2) - 1.0;
        if !(s > 0.0) {
            return Err(Error::Misuse(format!(
                "manufactured solution needs 2 c1^2 > c2^2, got c1 = {c1}, c2 = {c2}"
            )));
        }
        let k1 = s.sqrt();
        let k2 = (c1 * c1 - c2 * c2 * k1) / (c1 * c1 + c2 * c2 * k1);
        Ok(Self { c1, c2, k1, k2 })
    }

    fn waves(&self, block: BlockSide) -> Vec<Wave> {
        let a = std::f64::consts::SQRT_2 * self.c1;
        match block {
            BlockSide::Left => vec![(1.0, 1.0, 1.0, -a), (self.k2, 1.0, -1.0, a)],
            BlockSide::Right => vec![(1.0 + self.k2, self.k1, 1.0, -a)],
        }
    }

    /// `d^{nx+ny+nt} / dx^nx dy^ny dt^nt` of `u` (left) or `v` (right).
    pub fn eval(&self, block: BlockSide, x: f64, y: f64, t: f64, nx: u32, ny: u32, nt: u32) -> f64 {
        self.waves(block)
            .iter()
            .map(|&(amp, kx, ky, w)| {
                let phase = kx * x + ky * y + w * t + (nx + ny + nt) as f64 * FRAC_PI_2;
                amp * kx.powi(nx as i32) * ky.powi(ny as i32) * w.powi(nt as i32) * phase.cos()
            })
            .sum()
    }

    pub fn sample(&self, block: BlockSide, grid: &BlockGrid, t: f64, nt: u32) -> Vec<f64> {
        grid.sample(|x, y| self.eval(block, x, y, t, 0, 0, nt))
    }

    pub fn speed(&self, block: BlockSide) -> f64 {
        match block {
            BlockSide::Left => self.c1,
            BlockSide::Right => self.c2,
        }
    }

    /// Boundary data supplier for one block: `u_x` on west/east, `u_y` on south/north.
    pub fn boundary_data(&self, block: BlockSide, grid: BlockGrid) -> ManufacturedData {
        ManufacturedData {
            sol: *self,
            block,
            grid,
        }
    }
}

#[derive(Clone, Debug)]
pub struct ManufacturedData {
    sol: AnalyticSolution,
    block: BlockSide,
    grid: BlockGrid,
}

impl BoundaryData for ManufacturedData {
    fn at(&self, t: f64, nt: usize) -> SideValues {
        let mut out = SideValues::default();
        for side in Side::ALL {
            let (nx, ny) = match side {
                Side::West | Side::East => (1, 0),
                Side::South | Side::North => (0, 1),
            };
            *out.get_mut(side) = self
                .grid
                .side_points(side)
                .iter()
                .map(|&(x, y)| self.sol.eval(self.block, x, y, t, nx, ny, nt as u32))
                .collect();
        }
        out
    }
}

/// Zero data of the right sizes.
#[derive(Clone, Debug)]
pub struct ZeroData(pub BlockGrid);

impl BoundaryData for ZeroData {
    fn at(&self, _t: f64, _nt: usize) -> SideValues {
        SideValues::zeros(&self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PowerIterationOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub seed: u64,
}

impl Default for PowerIterationOptions {
    fn default() -> Self {
        Self {
            tol: 1e-7,
            max_iter: 100_000,
            seed: 1,
        }
    }
}

/// Largest `|lambda|` of an operator that is self-adjoint in the `weights` inner product,
/// by power iteration on the weighted Rayleigh quotient.
pub fn spectral_radius(
    n: usize,
    apply: impl Fn(&[f64], &mut [f64]),
    weights: Option<&[f64]>,
    opts: PowerIterationOptions,
) -> Result<f64> {
    if !(opts.tol > 0.0 && opts.tol <= 1e-3) {
        return Err(Error::Misuse(format!(
            "tolerance {} outside (0, 1e-3]",
            opts.tol
        )));
    }
    let w = |i: usize| weights.map_or(1.0, |h| h[i]);
    let dot = |a: &[f64], b: &[f64]| -> f64 { (0..a.len()).map(|i| w(i) * a[i] * b[i]).sum() };
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut x: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut y = vec![0.0; n];
    let mut last = 0.0f64;
    let mut change = f64::INFINITY;
    let nx = dot(&x, &x).sqrt();
    x.iter_mut().for_each(|v| *v /= nx);
    for it in 0..opts.max_iter {
        apply(&x, &mut y);
        let rq = dot(&x, &y).abs();
        let ny = dot(&y, &y).sqrt();
        if ny == 0.0 {
            return Ok(0.0);
        }
        // |Ax|/|x| and the Rayleigh quotient bracket the radius for self-adjoint A.
        let est = rq.max(ny);
        change = (est - last).abs() / est;
        if it > 2 && change <= opts.tol {
            return Ok(est);
        }
        last = est;
        std::mem::swap(&mut x, &mut y);
        x.iter_mut().for_each(|v| *v /= ny);
    }
    Err(Error::NoConvergence(format!(
        "after {} iterations: estimate {last:.6e}, last relative change {change:.3e}",
        opts.max_iter
    )))
}

pub fn scaled_spectral_radius(rho: f64, h: f64) -> f64 {
    h * h * rho
}

/// `sqrt(d^T H d)` with `d = num - exact`.
pub fn hnorm_error(num: &[f64], exact: &[f64], weights: &[f64]) -> Result<f64> {
    if num.len() != exact.len() || num.len() != weights.len() {
        return Err(Error::Mismatch(format!(
            "error norm on vectors of {} / {} with {} weights",
            num.len(),
            exact.len(),
            weights.len()
        )));
    }
    Ok(num
        .iter()
        .zip(exact)
        .zip(weights)
        .map(|((a, b), w)| w * (a - b) * (a - b))
        .sum::<f64>()
        .sqrt())
}

/// `log(e1/e2) / log(m1/m2)`: negative for a converging sequence.
pub fn convergence_rate(e1: f64, e2: f64, m1: f64, m2: f64) -> f64 {
    (e1 / e2).ln() / (m1 / m2).ln()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentRecord {
    pub method: String,
    pub order: usize,
    pub interp: String,
    pub m: usize,
    pub rho_tilde: Option<f64>,
    pub log10_error: Option<f64>,
    pub rate: Option<f64>,
    pub seconds: f64,
}

pub fn write_records<W: Write>(out: W, rows: &[ExperimentRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for r in rows {
        w.serialize(r).map_err(|e| Error::Parse(e.to_string()))?;
    }
    if rows.is_empty() {
        w.write_record([
            "method",
            "order",
            "interp",
            "m",
            "rho_tilde",
            "log10_error",
            "rate",
            "seconds",
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_records<R: std::io::Read>(input: R) -> Result<Vec<ExperimentRecord>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(|e| Error::Parse(e.to_string())))
        .collect()
}
