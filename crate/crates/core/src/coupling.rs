//! Interface coupling of a coarse left block and a fine right block by projection.

use std::fmt;

use log::debug;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::block::{
    build_block_masked, BlockDiscretization, BlockGrid, Side, SideMask, SideValues,
};
use crate::error::{sizing, Error, Result};
use crate::interp::{build_interpolation_pair_with, GoodMember, InterpKind, InterpolationPair};
use crate::sbp::Order;
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Both interface conditions imposed by projection.
    Projection,
    /// Continuity by projection, flux continuity by a SAT.
    Hybrid,
}

impl Method {
    pub const ALL: [Method; 2] = [Method::Projection, Method::Hybrid];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "projection" | "sbp-p" | "proj" => Ok(Method::Projection),
            "hybrid" | "sbp-p-sat" => Ok(Method::Hybrid),
            other => Err(Error::Unsupported(format!("coupling method `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Method::Projection => "projection",
            Method::Hybrid => "hybrid",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Orientation {
    /// Continuity interpolated onto the coarse side, flux onto the fine side.
    Standard,
    /// Interpolations swapped.
    Mirrored,
}

impl Orientation {
    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "standard" => Ok(Orientation::Standard),
            "mirrored" => Ok(Orientation::Mirrored),
            other => Err(Error::Unsupported(format!("orientation `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Orientation::Standard => "standard",
            Orientation::Mirrored => "mirrored",
        }
    }
}

/// Two-block geometry split at `x = xi`; the right block gets `2m - 1` points per direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Geometry {
    pub x0: f64,
    pub xi: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl Default for Geometry {
    fn default() -> Self {
        Self {
            x0: -10.0,
            xi: 0.0,
            x1: 10.0,
            y0: 0.0,
            y1: 10.0,
        }
    }
}

impl Geometry {
    pub fn left_grid(&self, m: usize) -> Result<BlockGrid> {
        BlockGrid::new((self.x0, self.xi), (self.y0, self.y1), m, m)
    }

    pub fn right_grid(&self, m: usize) -> Result<BlockGrid> {
        if m < 2 {
            return Err(sizing("coupling", format!("m = {m} too small")));
        }
        BlockGrid::new((self.xi, self.x1), (self.y0, self.y1), 2 * m - 1, 2 * m - 1)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InterfaceSpec {
    pub order: Order,
    pub kind: InterpKind,
    pub method: Method,
    pub orientation: Orientation,
    /// Use the good member of an order-preserving pair for continuity (ignored for traditional).
    pub op_substitution: bool,
    pub c1: f64,
    pub c2: f64,
}

impl InterfaceSpec {
    pub fn new(order: Order, kind: InterpKind, method: Method) -> Self {
        Self {
            order,
            kind,
            method,
            orientation: Orientation::Standard,
            op_substitution: true,
            c1: 1.0,
            c2: 0.5,
        }
    }

    /// Which order-preserving member is the good one for this spec.
    pub fn good_member(&self) -> Option<GoodMember> {
        if self.kind == InterpKind::Traditional {
            return None;
        }
        // Continuity goes through f2c in the standard form and through c2f when mirrored.
        let continuity_good = match self.orientation {
            Orientation::Standard => GoodMember::Restriction,
            Orientation::Mirrored => GoodMember::Prolongation,
        };
        Some(match (self.op_substitution, continuity_good) {
            (true, g) => g,
            (false, GoodMember::Restriction) => GoodMember::Prolongation,
            (false, GoodMember::Prolongation) => GoodMember::Restriction,
        })
    }
}

/// `w -> w - H^{-1} L^T (L H^{-1} L^T)^{-1} L w` with the Gram matrix factorized once.
#[derive(Clone, Debug)]
pub struct Projection {
    l: CsrMatrix,
    lt: CsrMatrix,
    inv_weights: Vec<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    condition: f64,
}

impl Projection {
    pub fn new(l: &CsrMatrix, weights: &[f64]) -> Result<Self> {
        if l.ncols() != weights.len() {
            return Err(Error::Mismatch(format!(
                "constraint has {} columns, weights have {} entries",
                l.ncols(),
                weights.len()
            )));
        }
        let inv_weights: Vec<f64> = weights.iter().map(|w| 1.0 / w).collect();
        let n = l.nrows();
        if n == 0 {
            return Ok(Self {
                l: l.clone(),
                lt: l.transpose(),
                inv_weights,
                chol: None,
                condition: 1.0,
            });
        }
        let gram = gram_matrix(l, &inv_weights);
        let zero_rows: Vec<usize> = (0..n).filter(|&i| !(gram[(i, i)] > 0.0)).collect();
        if !zero_rows.is_empty() {
            return Err(Error::RankDeficient(format!(
                "constraint rows {zero_rows:?} are empty"
            )));
        }
        // P is unchanged by row scaling of L; unit Gram diagonal keeps the factorization honest.
        let scale: Vec<f64> = (0..n).map(|i| 1.0 / gram[(i, i)].sqrt()).collect();
        let mut t = l.to_triplets();
        for e in &mut t.entries {
            e.2 *= scale[e.0];
        }
        let l = t.to_csr();
        let mut g = gram;
        for i in 0..n {
            for j in 0..n {
                g[(i, j)] *= scale[i] * scale[j];
            }
        }
        let chol = Cholesky::new_with_substitute(g, f64::MIN_POSITIVE)
            .ok_or_else(|| Error::RankDeficient("Gram factorization failed".into()))?;
        let pivots: Vec<f64> = chol.l_dirty().diagonal().iter().map(|d| d * d).collect();
        let pmin = pivots.iter().copied().fold(f64::INFINITY, f64::min);
        let pmax = pivots.iter().copied().fold(0.0, f64::max);
        let condition = pmax / pmin;
        let limit = 1.0 / f64::EPSILON.sqrt();
        if !(condition < limit) {
            let dependent: Vec<usize> = (0..n).filter(|&i| pivots[i] * limit < pmax).collect();
            return Err(Error::RankDeficient(format!(
                "Gram condition estimate {condition:.3e}; rows {dependent:?} duplicate earlier constraints"
            )));
        }
        debug!("projection: {n} constraints, Gram condition estimate {condition:.3e}");
        Ok(Self {
            lt: l.transpose(),
            l,
            inv_weights,
            chol: Some(chol),
            condition,
        })
    }

    pub fn condition_estimate(&self) -> f64 {
        self.condition
    }

    pub fn len(&self) -> usize {
        self.inv_weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inv_weights.is_empty()
    }

    pub fn apply_in_place(&self, w: &mut [f64]) {
        let Some(chol) = &self.chol else { return };
        let lw = DVector::from_vec(self.l.apply(w));
        let lambda = chol.solve(&lw);
        let mut corr = vec![0.0; w.len()];
        self.lt.mul_vec_acc(1.0, lambda.as_slice(), &mut corr);
        for ((wi, ci), iw) in w.iter_mut().zip(&corr).zip(&self.inv_weights) {
            if *ci != 0.0 {
                *wi -= iw * ci;
            }
        }
    }

    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        let mut out = w.to_vec();
        self.apply_in_place(&mut out);
        out
    }
}

fn gram_matrix(l: &CsrMatrix, inv_weights: &[f64]) -> DMatrix<f64> {
    let n = l.nrows();
    let lt = l.transpose();
    let mut g = DMatrix::zeros(n, n);
    for k in 0..lt.nrows() {
        let col: Vec<(usize, f64)> = lt.row(k).collect();
        for &(i, a) in &col {
            for &(j, b) in &col {
                g[(i, j)] += a * b * inv_weights[k];
            }
        }
    }
    g
}

/// Dense `I - H^{-1} L^T (L H^{-1} L^T)^{-1} L`, for small-size oracles.
pub fn dense_projection(l: &DMatrix<f64>, weights: &[f64]) -> Option<DMatrix<f64>> {
    let hinv = DMatrix::from_diagonal(&DVector::from_iterator(
        weights.len(),
        weights.iter().map(|w| 1.0 / w),
    ));
    let gram = l * &hinv * l.transpose();
    let ginv = gram.try_inverse()?;
    Some(DMatrix::identity(weights.len(), weights.len()) - &hinv * l.transpose() * ginv * l)
}

/// Interface SAT rows: `out[rows[i]] += (op w)_i`.
#[derive(Clone, Debug)]
pub struct InterfaceSat {
    rows: Vec<usize>,
    op: CsrMatrix,
}

impl InterfaceSat {
    pub fn apply_acc(&self, alpha: f64, w: &[f64], out: &mut [f64]) {
        for (i, &r) in self.rows.iter().enumerate() {
            out[r] += alpha * self.op.row_dot(i, w);
        }
    }

    pub fn to_global(&self, n: usize) -> CsrMatrix {
        let mut t = Triplets::new(n, n);
        for (i, &r) in self.rows.iter().enumerate() {
            for (j, v) in self.op.row(i) {
                t.push(r, j, v);
            }
        }
        t.to_csr()
    }
}

/// Assembled two-block system: `Q w = P (D + SAT) P w` and the data injector.
#[derive(Clone, Debug)]
pub struct CoupledSystem {
    pub spec: InterfaceSpec,
    pub left: BlockDiscretization,
    pub right: BlockDiscretization,
    pub pair: InterpolationPair,
    pub constraint: CsrMatrix,
    pub projection: Projection,
    pub sat: Option<InterfaceSat>,
    weights: Vec<f64>,
}

/// Rows `c1^2 I d_E u - c2^2 d_W v` (standard) or `c1^2 d_E u - c2^2 I d_W v` (mirrored)
/// and the continuity rows, as sparse matrices over the global unknowns.
struct ConstraintBlocks {
    continuity: CsrMatrix,
    flux: CsrMatrix,
}

fn trace_rows(
    block: &BlockDiscretization,
    side: Side,
    offset: usize,
    n: usize,
    deriv: bool,
) -> CsrMatrix {
    let len = block.grid.side_len(side);
    let mut t = Triplets::new(len, n);
    let g = &block.grid;
    let ix_line = |ix: usize, iy: usize| offset + ix * g.my + iy;
    match side {
        Side::West | Side::East => {
            let (row, ix0) = if side == Side::West {
                (&block.opx.d_left, 0)
            } else {
                (&block.opx.d_right, g.mx - 1)
            };
            for iy in 0..len {
                if deriv {
                    for (k, &c) in row.coeffs.iter().enumerate() {
                        t.push(iy, ix_line(row.start + k, iy), c);
                    }
                } else {
                    t.push(iy, ix_line(ix0, iy), 1.0);
                }
            }
        }
        Side::South | Side::North => unreachable!("interface is vertical"),
    }
    t.to_csr()
}

fn compose(a: &CsrMatrix, b: &CsrMatrix) -> CsrMatrix {
    let mut t = Triplets::new(a.nrows(), b.ncols());
    for i in 0..a.nrows() {
        for (k, va) in a.row(i) {
            for (j, vb) in b.row(k) {
                t.push(i, j, va * vb);
            }
        }
    }
    t.to_csr()
}

fn combine(a: &CsrMatrix, alpha: f64, b: &CsrMatrix, beta: f64) -> CsrMatrix {
    let mut t = a.scaled(alpha).to_triplets();
    t.entries.extend(b.scaled(beta).to_triplets().entries);
    t.to_csr()
}

fn stack(blocks: &[&CsrMatrix]) -> CsrMatrix {
    let cols = blocks[0].ncols();
    let rows = blocks.iter().map(|b| b.nrows()).sum();
    let mut t = Triplets::new(rows, cols);
    let mut off = 0;
    for b in blocks {
        for e in b.to_triplets().entries {
            t.push(off + e.0, e.1, e.2);
        }
        off += b.nrows();
    }
    t.to_csr()
}

fn constraint_blocks(
    spec: &InterfaceSpec,
    left: &BlockDiscretization,
    right: &BlockDiscretization,
    pair: &InterpolationPair,
) -> ConstraintBlocks {
    let nu = left.len();
    let n = nu + right.len();
    let e_e = trace_rows(left, Side::East, 0, n, false);
    let d_e = trace_rows(left, Side::East, 0, n, true);
    let e_w = trace_rows(right, Side::West, nu, n, false);
    let d_w = trace_rows(right, Side::West, nu, n, true);
    let (c1s, c2s) = (spec.c1 * spec.c1, spec.c2 * spec.c2);
    match spec.orientation {
        Orientation::Standard => ConstraintBlocks {
            continuity: combine(&e_e, 1.0, &compose(&pair.f2c, &e_w), -1.0),
            flux: combine(&compose(&pair.c2f, &d_e), c1s, &d_w, -c2s),
        },
        Orientation::Mirrored => ConstraintBlocks {
            continuity: combine(&compose(&pair.c2f, &e_e), 1.0, &e_w, -1.0),
            flux: combine(&d_e, c1s, &compose(&pair.f2c, &d_w), -c2s),
        },
    }
}

/// Constraint operator `L` for the given spec and blocks.
pub fn build_constraint(
    spec: &InterfaceSpec,
    left: &BlockDiscretization,
    right: &BlockDiscretization,
    pair: &InterpolationPair,
) -> Result<CsrMatrix> {
    check_interface(left, right, pair)?;
    let b = constraint_blocks(spec, left, right, pair);
    Ok(match spec.method {
        Method::Projection => stack(&[&b.continuity, &b.flux]),
        Method::Hybrid => b.continuity,
    })
}

/// Flux-continuity SAT for the hybrid method.
pub fn build_interface_sat(
    spec: &InterfaceSpec,
    left: &BlockDiscretization,
    right: &BlockDiscretization,
    pair: &InterpolationPair,
) -> Result<InterfaceSat> {
    if spec.method != Method::Hybrid {
        return Err(Error::Misuse(
            "interface SAT requested for the projection method".into(),
        ));
    }
    check_interface(left, right, pair)?;
    let b = constraint_blocks(spec, left, right, pair);
    let nu = left.len();
    let (rows, w): (Vec<usize>, f64) = match spec.orientation {
        Orientation::Standard => {
            let g = &right.grid;
            (
                (0..g.my).map(|iy| nu + iy).collect(),
                -1.0 / right.opx.norm[0],
            )
        }
        Orientation::Mirrored => {
            let g = &left.grid;
            (
                (0..g.my).map(|iy| (g.mx - 1) * g.my + iy).collect(),
                -1.0 / left.opx.norm[g.mx - 1],
            )
        }
    };
    Ok(InterfaceSat {
        rows,
        op: b.flux.scaled(w),
    })
}

fn check_interface(
    left: &BlockDiscretization,
    right: &BlockDiscretization,
    pair: &InterpolationPair,
) -> Result<()> {
    let (gl, gr) = (&left.grid, &right.grid);
    if gr.my != 2 * gl.my - 1 || pair.m_coarse != gl.my || pair.m_fine != gr.my {
        return Err(sizing(
            "coupling",
            format!(
                "interface needs a 1:2 ratio: left {} points, right {}, interpolation {}:{}",
                gl.my, gr.my, pair.m_coarse, pair.m_fine
            ),
        ));
    }
    if (gl.y0 - gr.y0).abs() > 1e-12
        || (gl.y1 - gr.y1).abs() > 1e-12
        || (gl.x1 - gr.x0).abs() > 1e-12
    {
        return Err(sizing("coupling", "blocks do not share the interface"));
    }
    if left.order != right.order {
        return Err(sizing("coupling", "blocks built with different orders"));
    }
    Ok(())
}

impl CoupledSystem {
    pub fn new(spec: InterfaceSpec, geometry: &Geometry, m: usize) -> Result<Self> {
        let left = build_block_masked(
            geometry.left_grid(m)?,
            spec.c1,
            spec.order,
            SideMask::ALL.without(Side::East),
        )?;
        let right = build_block_masked(
            geometry.right_grid(m)?,
            spec.c2,
            spec.order,
            SideMask::ALL.without(Side::West),
        )?;
        let pair = build_interpolation_pair_with(spec.order, spec.kind, spec.good_member(), m)?;
        Self::from_parts(spec, left, right, pair)
    }

    pub fn from_parts(
        spec: InterfaceSpec,
        left: BlockDiscretization,
        right: BlockDiscretization,
        pair: InterpolationPair,
    ) -> Result<Self> {
        let constraint = build_constraint(&spec, &left, &right, &pair)?;
        let mut weights = left.weights.clone();
        weights.extend_from_slice(&right.weights);
        let projection = Projection::new(&constraint, &weights)?;
        let sat = match spec.method {
            Method::Hybrid => Some(build_interface_sat(&spec, &left, &right, &pair)?),
            Method::Projection => None,
        };
        Ok(Self {
            spec,
            left,
            right,
            pair,
            constraint,
            projection,
            sat,
            weights,
        })
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn split<'a>(&self, w: &'a [f64]) -> (&'a [f64], &'a [f64]) {
        w.split_at(self.left.len())
    }

    /// Coarse (left block) spacing, the length scale of the scaled spectral radius.
    pub fn h(&self) -> f64 {
        self.left.grid.hx
    }

    /// `out = (D + SAT) w` without projections.
    pub fn unprojected_apply(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|v| *v = 0.0);
        let nu = self.left.len();
        let (u, v) = w.split_at(nu);
        {
            let (ou, ov) = out.split_at_mut(nu);
            rayon::join(
                || self.left.operator_acc(1.0, u, ou),
                || self.right.operator_acc(1.0, v, ov),
            );
        }
        if let Some(sat) = &self.sat {
            sat.apply_acc(1.0, w, out);
        }
    }

    /// `Q w = P (D + SAT) P w`
    pub fn apply_q(&self, w: &[f64], out: &mut [f64]) {
        let pw = self.projection.apply(w);
        self.unprojected_apply(&pw, out);
        self.projection.apply_in_place(out);
    }

    pub fn q(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; w.len()];
        self.apply_q(w, &mut out);
        out
    }

    /// `G = P * (boundary data terms)` for data on the outer sides of both blocks.
    pub fn data_vector(&self, left: &SideValues, right: &SideValues) -> Result<Vec<f64>> {
        let mut g = vec![0.0; self.len()];
        let nu = self.left.len();
        let (gu, gv) = g.split_at_mut(nu);
        self.left.data_acc(1.0, left, gu)?;
        self.right.data_acc(1.0, right, gv)?;
        self.projection.apply_in_place(&mut g);
        Ok(g)
    }

    pub fn project(&self, w: &[f64]) -> Vec<f64> {
        self.projection.apply(w)
    }

    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.weights)
            .map(|((x, y), w)| w * x * y)
            .sum()
    }

    /// Energy of the projected state `(Pw, P w_t)`.
    pub fn energy(&self, w: &[f64], wt: &[f64]) -> f64 {
        let pw = self.project(w);
        let pwt = self.project(wt);
        let nu = self.left.len();
        self.left.energy(&pw[..nu], &pwt[..nu]) + self.right.energy(&pw[nu..], &pwt[nu..])
    }

    /// Dense `Q` built column by column; only for small systems.
    pub fn dense_q(&self) -> DMatrix<f64> {
        let n = self.len();
        let mut q = DMatrix::zeros(n, n);
        let mut e = vec![0.0; n];
        let mut col = vec![0.0; n];
        for j in 0..n {
            e[j] = 1.0;
            self.apply_q(&e, &mut col);
            q.set_column(j, &DVector::from_column_slice(&col));
            e[j] = 0.0;
        }
        q
    }

    /// Sparse `D + SAT` before projection.
    pub fn unprojected_matrix(&self) -> CsrMatrix {
        let nu = self.left.len();
        let n = self.len();
        let mut t = Triplets::new(n, n);
        for e in self.left.operator_matrix().to_triplets().entries {
            t.push(e.0, e.1, e.2);
        }
        for e in self.right.operator_matrix().to_triplets().entries {
            t.push(nu + e.0, nu + e.1, e.2);
        }
        if let Some(sat) = &self.sat {
            t.entries.extend(sat.to_global(n).to_triplets().entries);
        }
        t.to_csr()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    fn system(
        order: Order,
        kind: InterpKind,
        method: Method,
        orientation: Orientation,
        m: usize,
    ) -> CoupledSystem {
        let mut spec = InterfaceSpec::new(order, kind, method);
        spec.orientation = orientation;
        CoupledSystem::new(spec, &Geometry::default(), m).unwrap()
    }

    #[test]
    fn constraint_shapes_and_constants() {
        for method in Method::ALL {
            for orientation in [Orientation::Standard, Orientation::Mirrored] {
                let s = system(
                    Order::Fourth,
                    InterpKind::Traditional,
                    method,
                    orientation,
                    13,
                );
                let rows = s.constraint.nrows();
                let cont = if orientation == Orientation::Standard {
                    13
                } else {
                    25
                };
                match method {
                    Method::Projection => assert_eq!(rows, 13 + 25),
                    Method::Hybrid => assert_eq!(rows, cont),
                }
                let ones = vec![1.0; s.len()];
                assert!(s.constraint.apply(&ones).iter().all(|v| v.abs() < 1e-12));
            }
        }
    }

    #[test]
    fn projection_matches_dense_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let s = system(
            Order::Fourth,
            InterpKind::OrderPreserving,
            Method::Projection,
            Orientation::Standard,
            11,
        );
        let dense = dense_projection(&s.constraint.to_dense(), s.weights()).unwrap();
        let w = random(s.len(), &mut rng);
        let a = s.project(&w);
        let b = &dense * DVector::from_vec(w);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= 1e-12 * b.amax());
        }
    }

    #[test]
    fn random_constraint_projection() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (rows, n) = (4, 12);
        let mut t = Triplets::new(rows, n);
        for i in 0..rows {
            for j in 0..n {
                t.push(i, j, rng.random_range(-1.0..1.0));
            }
        }
        let l = t.to_csr();
        let weights: Vec<f64> = (0..n).map(|_| rng.random_range(0.5..2.0)).collect();
        let p = Projection::new(&l, &weights).unwrap();
        let dense = dense_projection(&l.to_dense(), &weights).unwrap();
        let w = random(n, &mut rng);
        let a = p.apply(&w);
        let b = &dense * DVector::from_vec(w);
        for (x, y) in a.iter().zip(b.iter()) {
            assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn degenerate_constraints() {
        let weights = vec![1.0; 5];
        let empty = Triplets::new(0, 5).to_csr();
        let p = Projection::new(&empty, &weights).unwrap();
        assert_eq!(
            p.apply(&[1.0, 2.0, 3.0, 4.0, 5.0]),
            vec![1.0, 2.0, 3.0, 4.0, 5.0]
        );

        let mut t = Triplets::new(2, 5);
        t.push(0, 1, 1.0);
        let err = Projection::new(&t.to_csr(), &weights).unwrap_err();
        assert!(
            matches!(err, Error::RankDeficient(ref s) if s.contains("[1]")),
            "{err}"
        );

        let mut t = Triplets::new(3, 5);
        t.push(0, 0, 1.0);
        t.push(1, 2, 1.0);
        t.push(2, 0, 2.0);
        let err = Projection::new(&t.to_csr(), &weights).unwrap_err();
        assert!(
            matches!(err, Error::RankDeficient(ref s) if s.contains("[2]")),
            "{err}"
        );
    }

    #[test]
    fn sat_only_for_hybrid() {
        let s = system(
            Order::Fourth,
            InterpKind::Traditional,
            Method::Projection,
            Orientation::Standard,
            11,
        );
        assert!(matches!(
            build_interface_sat(&s.spec, &s.left, &s.right, &s.pair),
            Err(Error::Misuse(_))
        ));
    }

    #[test]
    fn hybrid_sat_matches_dense_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let s = system(
            Order::Fourth,
            InterpKind::Traditional,
            Method::Hybrid,
            Orientation::Standard,
            16,
        );
        let w = random(s.len(), &mut rng);
        let mut out = vec![0.0; s.len()];
        s.sat.as_ref().unwrap().apply_acc(1.0, &w, &mut out);
        let nu = s.left.len();
        let (u, v) = w.split_at(nu);
        let flux_u = s.pair.c2f.apply(&s.left.deriv_trace(Side::East, u));
        let flux_v = s.right.deriv_trace(Side::West, v);
        let hx = s.right.opx.norm[0];
        for iy in 0..s.right.grid.my {
            let expect = -(s.spec.c1.powi(2) * flux_u[iy] - s.spec.c2.powi(2) * flux_v[iy]) / hx;
            assert!((out[nu + iy] - expect).abs() <= 1e-13 * expect.abs().max(1.0));
        }
        assert!(out[..nu].iter().all(|&x| x == 0.0));
    }

    #[test]
    fn zero_and_constant_states() {
        for method in Method::ALL {
            let s = system(
                Order::Sixth,
                InterpKind::OrderPreserving,
                method,
                Orientation::Standard,
                17,
            );
            let zero = vec![0.0; s.len()];
            assert!(s.q(&zero).iter().all(|&x| x == 0.0));
            let ones = vec![1.0; s.len()];
            assert!(s.q(&ones).iter().all(|x| x.abs() < 1e-10));
        }
    }

    #[test]
    fn mismatched_interface_rejected() {
        let g = Geometry::default();
        let spec = InterfaceSpec::new(Order::Fourth, InterpKind::Traditional, Method::Projection);
        let left = build_block_masked(g.left_grid(13).unwrap(), 1.0, Order::Fourth, SideMask::ALL)
            .unwrap();
        let right = build_block_masked(g.left_grid(13).unwrap(), 1.0, Order::Fourth, SideMask::ALL)
            .unwrap();
        let pair =
            crate::interp::build_interpolation_pair(Order::Fourth, InterpKind::Traditional, 13)
                .unwrap();
        assert!(matches!(
            CoupledSystem::from_parts(spec, left, right, pair),
            Err(Error::Sizing { .. })
        ));
    }

    #[test]
    fn good_member_selection() {
        let mut spec = InterfaceSpec::new(
            Order::Fourth,
            InterpKind::OrderPreserving,
            Method::Projection,
        );
        assert_eq!(spec.good_member(), Some(GoodMember::Restriction));
        spec.orientation = Orientation::Mirrored;
        assert_eq!(spec.good_member(), Some(GoodMember::Prolongation));
        spec.op_substitution = false;
        assert_eq!(spec.good_member(), Some(GoodMember::Restriction));
        spec.kind = InterpKind::Traditional;
        assert_eq!(spec.good_member(), None);
    }
}
