//! One rectangular block: grid, Kronecker-product SBP operators and Neumann SATs.
//!
//! Fields are flat vectors in column-major order: index `ix * my + iy`, so each
//! x-line holds `my` contiguous y-values.

use std::io::Write;

use crate::error::{sizing, Error, Result};
use crate::sbp::{build_sbp_d2, Order, SbpOperator1D};
use crate::sparse::{apply_along_x, apply_along_y, CsrMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlockGrid {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
    pub mx: usize,
    pub my: usize,
    pub hx: f64,
    pub hy: f64,
}

impl BlockGrid {
    pub fn new(x: (f64, f64), y: (f64, f64), mx: usize, my: usize) -> Result<Self> {
        if mx < 2 || my < 2 || !(x.1 > x.0) || !(y.1 > y.0) {
            return Err(sizing(
                "block_discretization",
                format!("invalid grid {x:?} x {y:?} with {mx} x {my} points"),
            ));
        }
        Ok(Self {
            x0: x.0,
            x1: x.1,
            y0: y.0,
            y1: y.1,
            mx,
            my,
            hx: (x.1 - x.0) / (mx - 1) as f64,
            hy: (y.1 - y.0) / (my - 1) as f64,
        })
    }

    pub fn len(&self) -> usize {
        self.mx * self.my
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        ix * self.my + iy
    }

    pub fn x(&self, ix: usize) -> f64 {
        if ix + 1 == self.mx {
            self.x1
        } else {
            self.x0 + ix as f64 * self.hx
        }
    }

    pub fn y(&self, iy: usize) -> f64 {
        if iy + 1 == self.my {
            self.y1
        } else {
            self.y0 + iy as f64 * self.hy
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.mx).map(|i| self.x(i)).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        (0..self.my).map(|i| self.y(i)).collect()
    }

    /// Samples `f(x, y)` in storage order.
    pub fn sample(&self, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
        let ys = self.ys();
        let mut out = Vec::with_capacity(self.len());
        for ix in 0..self.mx {
            let x = self.x(ix);
            out.extend(ys.iter().map(|&y| f(x, y)));
        }
        out
    }

    /// Points along a side, ordered by increasing coordinate.
    pub fn side_points(&self, side: Side) -> Vec<(f64, f64)> {
        match side {
            Side::West => self.ys().into_iter().map(|y| (self.x0, y)).collect(),
            Side::East => self.ys().into_iter().map(|y| (self.x1, y)).collect(),
            Side::South => self.xs().into_iter().map(|x| (x, self.y0)).collect(),
            Side::North => self.xs().into_iter().map(|x| (x, self.y1)).collect(),
        }
    }

    pub fn side_len(&self, side: Side) -> usize {
        match side {
            Side::West | Side::East => self.my,
            Side::South | Side::North => self.mx,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Side {
    West,
    East,
    South,
    North,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::West, Side::East, Side::South, Side::North];

    fn bit(self) -> u8 {
        1 << self as u8
    }

    /// Sign of the SAT term for this side.
    fn sign(self) -> f64 {
        match self {
            Side::West | Side::South => 1.0,
            Side::East | Side::North => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SideMask(u8);

impl SideMask {
    pub const ALL: SideMask = SideMask(0b1111);
    pub const NONE: SideMask = SideMask(0);

    pub fn without(self, side: Side) -> Self {
        SideMask(self.0 & !side.bit())
    }

    pub fn with(self, side: Side) -> Self {
        SideMask(self.0 | side.bit())
    }

    pub fn contains(self, side: Side) -> bool {
        self.0 & side.bit() != 0
    }

    pub fn sides(self) -> impl Iterator<Item = Side> {
        Side::ALL.into_iter().filter(move |s| self.contains(*s))
    }
}

/// Derivative-trace data on the four sides: `u_x` on west/east, `u_y` on south/north.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SideValues {
    pub west: Vec<f64>,
    pub east: Vec<f64>,
    pub south: Vec<f64>,
    pub north: Vec<f64>,
}

impl SideValues {
    pub fn zeros(grid: &BlockGrid) -> Self {
        Self {
            west: vec![0.0; grid.my],
            east: vec![0.0; grid.my],
            south: vec![0.0; grid.mx],
            north: vec![0.0; grid.mx],
        }
    }

    pub fn get(&self, side: Side) -> &[f64] {
        match side {
            Side::West => &self.west,
            Side::East => &self.east,
            Side::South => &self.south,
            Side::North => &self.north,
        }
    }

    pub fn get_mut(&mut self, side: Side) -> &mut Vec<f64> {
        match side {
            Side::West => &mut self.west,
            Side::East => &mut self.east,
            Side::South => &mut self.south,
            Side::North => &mut self.north,
        }
    }
}

/// Time-dependent boundary data; `nt` is the number of time derivatives.
pub trait BoundaryData: Send + Sync {
    fn at(&self, t: f64, nt: usize) -> SideValues;
}

#[derive(Clone, Debug)]
pub struct BlockDiscretization {
    pub grid: BlockGrid,
    pub c: f64,
    pub order: Order,
    pub opx: SbpOperator1D,
    pub opy: SbpOperator1D,
    /// Diagonal of `H_x H_y`.
    pub weights: Vec<f64>,
    mask: SideMask,
    // D2 + H^{-1}(e_l d_l - e_r d_r) restricted to the masked sides, per axis.
    ax: CsrMatrix,
    ay: CsrMatrix,
}

fn masked_axis_operator(op: &SbpOperator1D, low: bool, high: bool) -> CsrMatrix {
    let mut t = op.d2.to_triplets();
    let m = op.m;
    if low {
        for (k, &c) in op.d_left.coeffs.iter().enumerate() {
            t.push(0, op.d_left.start + k, c / op.norm[0]);
        }
    }
    if high {
        for (k, &c) in op.d_right.coeffs.iter().enumerate() {
            t.push(m - 1, op.d_right.start + k, -c / op.norm[m - 1]);
        }
    }
    let mut t = t.to_csr().to_triplets();
    // The boundary terms cancel the closure rows' derivative part; drop the residue.
    let scale = 1.0 / (op.h * op.h);
    t.entries.retain(|e| e.2.abs() > 1e-13 * scale);
    t.to_csr()
}

pub fn build_block(grid: BlockGrid, c: f64, order: Order) -> Result<BlockDiscretization> {
    build_block_masked(grid, c, order, SideMask::ALL)
}

/// Block whose RHS operator carries Neumann SATs only on the sides in `mask`.
pub fn build_block_masked(
    grid: BlockGrid,
    c: f64,
    order: Order,
    mask: SideMask,
) -> Result<BlockDiscretization> {
    if !(c > 0.0) {
        return Err(sizing(
            "block_discretization",
            format!("wave speed must be positive, got {c}"),
        ));
    }
    let opx = build_sbp_d2(order, grid.mx, grid.hx)?;
    let opy = build_sbp_d2(order, grid.my, grid.hy)?;
    let mut weights = Vec::with_capacity(grid.len());
    for ix in 0..grid.mx {
        weights.extend(opy.norm.iter().map(|wy| opx.norm[ix] * wy));
    }
    let ax = masked_axis_operator(&opx, mask.contains(Side::West), mask.contains(Side::East));
    let ay = masked_axis_operator(&opy, mask.contains(Side::South), mask.contains(Side::North));
    Ok(BlockDiscretization {
        grid,
        c,
        order,
        opx,
        opy,
        weights,
        mask,
        ax,
        ay,
    })
}

impl BlockDiscretization {
    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn mask(&self) -> SideMask {
        self.mask
    }

    /// `out += alpha * D_L u` with `D_L = D_2x + D_2y`.
    pub fn laplacian_acc(&self, alpha: f64, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        apply_along_x(&self.opx.d2, alpha, g.mx, g.my, u, out);
        apply_along_y(&self.opy.d2, alpha, g.mx, g.my, u, out);
    }

    pub fn laplacian(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.laplacian_acc(1.0, u, &mut out);
        out
    }

    /// `out += alpha * c^2 (D_L + masked SATs) u`; the state-dependent half of the RHS.
    pub fn operator_acc(&self, alpha: f64, u: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        let a = alpha * self.c * self.c;
        apply_along_x(&self.ax, a, g.mx, g.my, u, out);
        apply_along_y(&self.ay, a, g.mx, g.my, u, out);
    }

    /// `out += alpha * c^2 * sum_sides (-sign) H^{-1} e^T g`; the data half of the RHS.
    pub fn data_acc(&self, alpha: f64, g: &SideValues, out: &mut [f64]) -> Result<()> {
        for side in self.mask.sides() {
            let vals = g.get(side);
            if vals.len() != self.grid.side_len(side) {
                return Err(Error::Mismatch(format!(
                    "{side:?} data has {} values, side has {} points",
                    vals.len(),
                    self.grid.side_len(side)
                )));
            }
            let w = -side.sign() * alpha * self.c * self.c / self.normal_weight(side);
            self.inject_trace_acc(side, w, vals, out);
        }
        Ok(())
    }

    /// `c^2 D_L u` plus the Neumann SAT terms of the sides in `mask`, with data `g`.
    pub fn apply_neumann_rhs(&self, u: &[f64], g: &SideValues, mask: SideMask) -> Result<Vec<f64>> {
        if u.len() != self.len() {
            return Err(Error::Mismatch(format!(
                "field has {} values, block has {}",
                u.len(),
                self.len()
            )));
        }
        let mut out = vec![0.0; u.len()];
        let c2 = self.c * self.c;
        self.laplacian_acc(c2, u, &mut out);
        for side in mask.sides() {
            let vals = g.get(side);
            if vals.len() != self.grid.side_len(side) {
                return Err(Error::Mismatch(format!(
                    "{side:?} data has {} values, side has {} points",
                    vals.len(),
                    self.grid.side_len(side)
                )));
            }
            let pen: Vec<f64> = self
                .deriv_trace(side, u)
                .iter()
                .zip(vals)
                .map(|(d, g)| d - g)
                .collect();
            let w = side.sign() * c2 / self.normal_weight(side);
            self.inject_trace_acc(side, w, &pen, &mut out);
        }
        Ok(out)
    }

    /// Boundary weight of `H_x` (west/east) or `H_y` (south/north) at that side.
    pub fn normal_weight(&self, side: Side) -> f64 {
        match side {
            Side::West => self.opx.norm[0],
            Side::East => self.opx.norm[self.grid.mx - 1],
            Side::South => self.opy.norm[0],
            Side::North => self.opy.norm[self.grid.my - 1],
        }
    }

    /// Quadrature weights along a side.
    pub fn side_weights(&self, side: Side) -> &[f64] {
        match side {
            Side::West | Side::East => &self.opy.norm,
            Side::South | Side::North => &self.opx.norm,
        }
    }

    pub fn trace(&self, side: Side, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        match side {
            Side::West => u[..g.my].to_vec(),
            Side::East => u[(g.mx - 1) * g.my..].to_vec(),
            Side::South => (0..g.mx).map(|ix| u[ix * g.my]).collect(),
            Side::North => (0..g.mx).map(|ix| u[ix * g.my + g.my - 1]).collect(),
        }
    }

    /// `d_side u`: `d_l`/`d_r` along x on west/east, along y on south/north.
    pub fn deriv_trace(&self, side: Side, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        match side {
            Side::West | Side::East => {
                let row = if side == Side::West {
                    &self.opx.d_left
                } else {
                    &self.opx.d_right
                };
                let mut out = vec![0.0; g.my];
                for (k, &c) in row.coeffs.iter().enumerate() {
                    let line = &u[(row.start + k) * g.my..(row.start + k + 1) * g.my];
                    for (o, v) in out.iter_mut().zip(line) {
                        *o += c * v;
                    }
                }
                out
            }
            Side::South | Side::North => {
                let row = if side == Side::South {
                    &self.opy.d_left
                } else {
                    &self.opy.d_right
                };
                (0..g.mx)
                    .map(|ix| row.dot(&u[ix * g.my..(ix + 1) * g.my]))
                    .collect()
            }
        }
    }

    /// `out += alpha * e_side^T vals`
    pub fn inject_trace_acc(&self, side: Side, alpha: f64, vals: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        match side {
            Side::West | Side::East => {
                let ix = if side == Side::West { 0 } else { g.mx - 1 };
                for (o, v) in out[ix * g.my..(ix + 1) * g.my].iter_mut().zip(vals) {
                    *o += alpha * v;
                }
            }
            Side::South | Side::North => {
                let iy = if side == Side::South { 0 } else { g.my - 1 };
                for (ix, v) in vals.iter().enumerate() {
                    out[ix * g.my + iy] += alpha * v;
                }
            }
        }
    }

    /// `out += alpha * d_side^T vals`
    pub fn inject_deriv_acc(&self, side: Side, alpha: f64, vals: &[f64], out: &mut [f64]) {
        let g = &self.grid;
        match side {
            Side::West | Side::East => {
                let row = if side == Side::West {
                    &self.opx.d_left
                } else {
                    &self.opx.d_right
                };
                for (k, &c) in row.coeffs.iter().enumerate() {
                    let line = &mut out[(row.start + k) * g.my..(row.start + k + 1) * g.my];
                    for (o, v) in line.iter_mut().zip(vals) {
                        *o += alpha * c * v;
                    }
                }
            }
            Side::South | Side::North => {
                let row = if side == Side::South {
                    &self.opy.d_left
                } else {
                    &self.opy.d_right
                };
                for (ix, v) in vals.iter().enumerate() {
                    for (k, &c) in row.coeffs.iter().enumerate() {
                        out[ix * g.my + row.start + k] += alpha * c * v;
                    }
                }
            }
        }
    }

    /// `(H_y M_x + H_x M_y) u`
    pub fn energy_matrix_apply(&self, u: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let mut mx_u = vec![0.0; u.len()];
        apply_along_x(&self.opx.stiffness, 1.0, g.mx, g.my, u, &mut mx_u);
        let mut my_u = vec![0.0; u.len()];
        apply_along_y(&self.opy.stiffness, 1.0, g.mx, g.my, u, &mut my_u);
        let mut out = vec![0.0; u.len()];
        for ix in 0..g.mx {
            for iy in 0..g.my {
                let i = ix * g.my + iy;
                out[i] = self.opy.norm[iy] * mx_u[i] + self.opx.norm[ix] * my_u[i];
            }
        }
        out
    }

    /// `||u_t||^2_H + c^2 u^T (H_y M_x + H_x M_y) u`
    pub fn energy(&self, u: &[f64], ut: &[f64]) -> f64 {
        let kinetic: f64 = ut.iter().zip(&self.weights).map(|(v, w)| w * v * v).sum();
        let au = self.energy_matrix_apply(u);
        let potential: f64 = u.iter().zip(&au).map(|(a, b)| a * b).sum();
        kinetic + self.c * self.c * potential
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * x * y)
            .sum()
    }

    /// Sparse `c^2 (D_L + masked SATs)`; meant for small-size oracles.
    pub fn operator_matrix(&self) -> CsrMatrix {
        let g = &self.grid;
        let c2 = self.c * self.c;
        let mut t = Triplets::new(g.len(), g.len());
        for ix in 0..g.mx {
            for (k, v) in self.ax.row(ix) {
                for iy in 0..g.my {
                    t.push(ix * g.my + iy, k * g.my + iy, c2 * v);
                }
            }
        }
        for iy in 0..g.my {
            for (k, v) in self.ay.row(iy) {
                for ix in 0..g.mx {
                    t.push(ix * g.my + iy, ix * g.my + k, c2 * v);
                }
            }
        }
        t.to_csr()
    }
}

/// Writes `x,y,value,block` rows for each block in storage order.
pub fn write_field_csv<W: Write>(
    mut out: W,
    blocks: &[(&BlockGrid, &[f64], &str)],
) -> std::io::Result<()> {
    writeln!(out, "x,y,value,block")?;
    for (grid, vals, name) in blocks {
        let ys = grid.ys();
        for ix in 0..grid.mx {
            let x = grid.x(ix);
            for (iy, y) in ys.iter().enumerate() {
                writeln!(
                    out,
                    "{x:.17e},{y:.17e},{:.17e},{name}",
                    vals[ix * grid.my + iy]
                )?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{DMatrix, SymmetricEigen};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn block(order: Order, m: usize) -> BlockDiscretization {
        let grid = BlockGrid::new((-1.0, 2.0), (0.5, 1.5), m, m + 3).unwrap();
        build_block(grid, 0.7, order).unwrap()
    }

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    #[test]
    fn laplacian_polynomials() {
        for order in Order::ALL {
            let b = block(order, 16);
            let ones = vec![1.0; b.len()];
            assert!(b.laplacian(&ones).iter().all(|v| v.abs() < 1e-10));
            let q = b.grid.sample(|x, y| x * x + y * y);
            assert!(b.laplacian(&q).iter().all(|v| (v - 4.0).abs() < 1e-9));
            // Constant in x, so D_2x contributes nothing.
            let fy = b.grid.sample(|_, y| y.sin());
            let mut dx = vec![0.0; b.len()];
            apply_along_x(&b.opx.d2, 1.0, b.grid.mx, b.grid.my, &fy, &mut dx);
            assert!(dx.iter().all(|v| v.abs() < 1e-10));
        }
    }

    #[test]
    fn green_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for order in Order::ALL {
            let b = block(order, 16);
            for _ in 0..10 {
                let u1 = random(b.len(), &mut rng);
                let u2 = random(b.len(), &mut rng);
                let lhs = b.inner(&u1, &b.laplacian(&u2));
                let mut rhs = -dot(&u1, &b.energy_matrix_apply(&u2));
                for (side, s) in [
                    (Side::East, 1.0),
                    (Side::West, -1.0),
                    (Side::North, 1.0),
                    (Side::South, -1.0),
                ] {
                    let w = b.side_weights(side);
                    let e = b.trace(side, &u1);
                    let d = b.deriv_trace(side, &u2);
                    rhs += s * e
                        .iter()
                        .zip(&d)
                        .zip(w)
                        .map(|((a, c), w)| a * c * w)
                        .sum::<f64>();
                }
                assert!(
                    (lhs - rhs).abs() <= 1e-11 * lhs.abs().max(1.0),
                    "{lhs} {rhs}"
                );
            }
        }
    }

    #[test]
    fn energy_matrix_symmetric_psd_and_rhs_nsd() {
        for order in Order::ALL {
            let b = block(order, 14);
            let n = b.len();
            let mut a = DMatrix::zeros(n, n);
            for j in 0..n {
                let mut e = vec![0.0; n];
                e[j] = 1.0;
                a.set_column(j, &nalgebra::DVector::from_vec(b.energy_matrix_apply(&e)));
            }
            assert!((&a - a.transpose()).amax() < 1e-12 * a.amax());
            let eig = SymmetricEigen::new(a.clone()).eigenvalues;
            assert!(eig.min() >= -1e-12 * eig.amax());
            // H * RHS = -c^2 A when every side carries a SAT.
            let q = b.operator_matrix().to_dense();
            let mut hq = q.clone();
            for i in 0..n {
                for j in 0..n {
                    hq[(i, j)] *= b.weights[i];
                }
            }
            let diff = &hq + &a * (b.c * b.c);
            assert!(diff.amax() < 1e-10 * a.amax());
        }
    }

    #[test]
    fn neumann_rhs_matches_split_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let b = block(Order::Fourth, 12);
        let u = random(b.len(), &mut rng);
        let mut g = SideValues::zeros(&b.grid);
        for side in Side::ALL {
            *g.get_mut(side) = random(b.grid.side_len(side), &mut rng);
        }
        let direct = b.apply_neumann_rhs(&u, &g, SideMask::ALL).unwrap();
        let mut split = vec![0.0; u.len()];
        b.operator_acc(1.0, &u, &mut split);
        b.data_acc(1.0, &g, &mut split).unwrap();
        for (x, y) in direct.iter().zip(&split) {
            assert!((x - y).abs() < 1e-10 * x.abs().max(1.0));
        }
    }

    #[test]
    fn consistent_data_gives_no_penalty() {
        let b = block(Order::Sixth, 16);
        let u = b.grid.sample(|x, _| x);
        let mut g = SideValues::zeros(&b.grid);
        g.west = vec![1.0; b.grid.my];
        g.east = vec![1.0; b.grid.my];
        let rhs = b.apply_neumann_rhs(&u, &g, SideMask::ALL).unwrap();
        assert!(rhs.iter().all(|v| v.abs() < 1e-10));
        let consts = vec![2.5; b.len()];
        let rhs = b
            .apply_neumann_rhs(&consts, &SideValues::zeros(&b.grid), SideMask::ALL)
            .unwrap();
        assert!(rhs.iter().all(|v| v.abs() < 1e-10));
    }

    #[test]
    fn data_length_mismatch() {
        let b = block(Order::Fourth, 12);
        let mut g = SideValues::zeros(&b.grid);
        g.north.pop();
        let u = vec![0.0; b.len()];
        assert!(matches!(
            b.apply_neumann_rhs(&u, &g, SideMask::ALL),
            Err(Error::Mismatch(_))
        ));
    }

    #[test]
    fn transposed_injections() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let b = block(Order::Sixth, 15);
        let u = random(b.len(), &mut rng);
        for side in Side::ALL {
            let v = random(b.grid.side_len(side), &mut rng);
            let mut out = vec![0.0; b.len()];
            b.inject_deriv_acc(side, 1.0, &v, &mut out);
            assert!((dot(&out, &u) - dot(&v, &b.deriv_trace(side, &u))).abs() < 1e-9);
            let mut out = vec![0.0; b.len()];
            b.inject_trace_acc(side, 1.0, &v, &mut out);
            assert!((dot(&out, &u) - dot(&v, &b.trace(side, &u))).abs() < 1e-12);
        }
    }

    #[test]
    fn field_csv_layout() {
        let grid = BlockGrid::new((0.0, 1.0), (0.0, 2.0), 2, 3).unwrap();
        let vals: Vec<f64> = (0..6).map(|i| i as f64).collect();
        let mut buf = Vec::new();
        write_field_csv(&mut buf, &[(&grid, &vals, "left")]).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "x,y,value,block");
        assert_eq!(lines.len(), 7);
        assert!(lines[2].starts_with("0.00000000000000000e0,1.00000000000000000e0,1."));
    }
}
