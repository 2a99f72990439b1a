//! Norm-compatible 1:2 interpolation operators.
//!
//! The prolongation `P` (coarse to fine) is injection-like on even fine rows and a
//! Lagrange midpoint stencil on odd rows. Its boundary block is solved from polynomial
//! exactness conditions on `P` and on the restriction `R = H_c^{-1} P^T H_f`, so the
//! pair is norm compatible by construction.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, DVector};

use crate::error::{sizing, Error, Result};
use crate::sbp::{build_sbp_d2, Order};
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum InterpKind {
    Traditional,
    OrderPreserving,
}

impl InterpKind {
    pub const ALL: [InterpKind; 2] = [InterpKind::Traditional, InterpKind::OrderPreserving];

    pub fn parse(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "traditional" | "trad" => Ok(InterpKind::Traditional),
            "op" | "order-preserving" | "order_preserving" => Ok(InterpKind::OrderPreserving),
            other => Err(Error::Unsupported(format!("interpolation kind `{other}`"))),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            InterpKind::Traditional => "traditional",
            InterpKind::OrderPreserving => "op",
        }
    }
}

impl fmt::Display for InterpKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Which member of an order-preserving pair carries the extra degree.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GoodMember {
    /// Bad coarse-to-fine, good fine-to-coarse.
    Restriction,
    /// Good coarse-to-fine, bad fine-to-coarse.
    Prolongation,
}

#[derive(Clone, Debug)]
pub struct InterpolationPair {
    pub order: Order,
    pub kind: InterpKind,
    pub good: Option<GoodMember>,
    pub m_coarse: usize,
    pub m_fine: usize,
    /// `m_fine x m_coarse`
    pub c2f: CsrMatrix,
    /// `m_coarse x m_fine`
    pub f2c: CsrMatrix,
    /// Design exactness degrees `(c2f, f2c)`.
    pub degrees: (usize, usize),
    coarse_norm: Vec<f64>,
    fine_norm: Vec<f64>,
}

/// Boundary-closure design of a 1:2 pair: the unknown block is `nf` fine rows by `kc`
/// coarse columns of the prolongation, the restriction follows from norm compatibility.
#[derive(Clone, Debug, PartialEq)]
pub struct ClosureSpec {
    /// Symmetric stencil of even (coincident) fine rows, centre first.
    pub even: Vec<f64>,
    /// Exactness degrees `(c2f, f2c)` imposed exactly.
    pub hard: (usize, usize),
    /// Degrees whose defects are minimised within the exact solution set.
    pub soft: Option<(usize, usize)>,
    /// Weight of the restriction defects relative to the prolongation ones in the soft objective.
    pub soft_weight: f64,
    pub kc: usize,
    pub nf: usize,
}

type DesignSpec = ClosureSpec;

// Even fine rows use a symmetric coarse stencil; its free parameter is what lets the
// boundary block reach one extra degree in the order-preserving member.
fn even_stencil4(a: f64) -> Vec<f64> {
    vec![1.0 + 6.0 * a, -4.0 * a, a]
}

fn even_stencil6(a3: f64) -> Vec<f64> {
    vec![1.0 - 20.0 * a3, 15.0 * a3, -6.0 * a3, a3]
}

fn design_spec(order: Order, kind: InterpKind, good: Option<GoodMember>) -> DesignSpec {
    use GoodMember::*;
    use InterpKind::*;
    match (order, kind, good) {
        (Order::Fourth, Traditional, _) => DesignSpec {
            even: vec![1.0],
            hard: (1, 1),
            soft: Some((2, 2)),
            kc: 4,
            soft_weight: 1.0,
            nf: 3,
        },
        (Order::Sixth, Traditional, _) => DesignSpec {
            even: vec![1.0],
            hard: (2, 2),
            soft: Some((3, 3)),
            kc: 8,
            soft_weight: 1.0,
            nf: 9,
        },
        (Order::Fourth, OrderPreserving, Some(Prolongation)) => DesignSpec {
            even: even_stencil4(-1.0 / 128.0),
            hard: (2, 1),
            soft: None,
            kc: 4,
            soft_weight: 1.0,
            nf: 3,
        },
        (Order::Fourth, OrderPreserving, _) => DesignSpec {
            even: even_stencil4(7.0 / 128.0),
            hard: (1, 2),
            soft: None,
            kc: 4,
            soft_weight: 1.0,
            nf: 3,
        },
        (Order::Sixth, OrderPreserving, Some(Prolongation)) => DesignSpec {
            even: even_stencil6(11.0 / 5120.0),
            hard: (3, 2),
            soft: None,
            kc: 6,
            soft_weight: 1.0,
            nf: 5,
        },
        (Order::Sixth, OrderPreserving, _) => DesignSpec {
            even: even_stencil6(-61.0 / 5120.0),
            hard: (2, 3),
            soft: None,
            kc: 6,
            soft_weight: 1.0,
            nf: 5,
        },
    }
}

/// Lagrange weights at the midpoint between nodes 0 and 1 of `-p+1..=p`.
pub(crate) fn midpoint_stencil(p: usize) -> Vec<f64> {
    let nodes: Vec<f64> = (0..2 * p).map(|k| k as f64 - p as f64 + 1.0).collect();
    nodes
        .iter()
        .enumerate()
        .map(|(k, &xk)| {
            nodes
                .iter()
                .enumerate()
                .filter(|&(l, _)| l != k)
                .map(|(_, &xl)| (0.5 - xl) / (xk - xl))
                .product()
        })
        .collect()
}

fn interface_norms(order: Order, mc: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let nf = 2 * mc - 1;
    let hc = build_sbp_d2(order, mc, 2.0)?.norm;
    let hf = build_sbp_d2(order, nf, 1.0)?.norm;
    Ok((hc, hf))
}

/// Prolongation with the boundary blocks zeroed (rows `< nf_blk`, columns `< kc`, mirrored).
fn fixed_part(order: Order, even: &[f64], mc: usize, kc: usize, nf_blk: usize) -> DMatrix<f64> {
    let p = order.p();
    let nf = 2 * mc - 1;
    let st = midpoint_stencil(p);
    let kk = even.len() - 1;
    let mut p0 = DMatrix::zeros(nf, mc);
    for j in 0..=nf / 2 {
        let i = j / 2;
        if j % 2 == 0 {
            if i >= kk {
                for k in -(kk as isize)..=(kk as isize) {
                    p0[(j, (i as isize + k) as usize)] = even[k.unsigned_abs()];
                }
            }
        } else if j + 1 >= 2 * p {
            for (k, &c) in st.iter().enumerate() {
                p0[(j, i + k + 1 - p)] = c;
            }
        }
    }
    for j in 0..nf_blk {
        for i in 0..kc {
            p0[(j, i)] = 0.0;
        }
    }
    for j in nf / 2 + 1..nf {
        for i in 0..mc {
            p0[(j, i)] = p0[(nf - 1 - j, mc - 1 - i)];
        }
    }
    p0
}

/// Exactness system for the `nf_blk x kc` boundary block (unknowns row-major).
fn exactness_system(
    order: Order,
    spec: &DesignSpec,
    degrees: (usize, usize),
    mc: usize,
) -> Result<(DMatrix<f64>, DVector<f64>)> {
    let (kc, nb) = (spec.kc, spec.nf);
    let (qp, qr) = degrees;
    let nf = 2 * mc - 1;
    let p0 = fixed_part(order, &spec.even, mc, kc, nb);
    let (hc, hf) = interface_norms(order, mc)?;
    // Local coordinates in fine-grid units, origin at the boundary.
    let xf: Vec<f64> = (0..nf).map(|j| j as f64).collect();
    let xc: Vec<f64> = (0..mc).map(|i| 2.0 * i as f64).collect();
    let n = nb * kc;
    let r_rows = kc + order.p() + spec.even.len() + 2;
    let total = nb * (qp + 1) + r_rows * (qr + 1);
    let mut a = DMatrix::zeros(total, n);
    let mut b = DVector::zeros(total);
    let mut row = 0;
    for j in 0..nb {
        for d in 0..=qp {
            let mut fixed = 0.0;
            for i in 0..mc {
                fixed += p0[(j, i)] * xc[i].powi(d as i32);
            }
            for i in 0..kc {
                a[(row, j * kc + i)] = xc[i].powi(d as i32);
            }
            b[row] = xf[j].powi(d as i32) - fixed;
            row += 1;
        }
    }
    for i in 0..r_rows {
        for d in 0..=qr {
            let mut fixed = 0.0;
            for j in 0..nf {
                fixed += hf[j] / hc[i] * p0[(j, i)] * xf[j].powi(d as i32);
            }
            if i < kc {
                for j in 0..nb {
                    a[(row, j * kc + i)] = hf[j] / hc[i] * xf[j].powi(d as i32);
                }
            }
            b[row] = xc[i].powi(d as i32) - fixed;
            row += 1;
        }
    }
    Ok((a, b))
}

struct ClosureDesign {
    spec: DesignSpec,
    block: Vec<f64>,
}

const DESIGN_MC: usize = 48;

/// Least-squares solution of `a x = b` that also returns an orthonormal null-space basis.
fn lstsq_with_null(a: &DMatrix<f64>, b: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>) {
    let n = a.ncols();
    // Pad to at least square so the SVD carries a full right basis.
    let rows = a.nrows().max(n);
    let mut sq = DMatrix::zeros(rows, n);
    sq.rows_mut(0, a.nrows()).copy_from(a);
    let mut rhs = DVector::zeros(rows);
    rhs.rows_mut(0, a.nrows()).copy_from(b);
    let svd = sq.svd(true, true);
    let smax = svd.singular_values.max();
    let tol = 1e-10 * smax;
    let x = svd.solve(&rhs, tol).expect("svd with u and v_t");
    let v_t = svd.v_t.as_ref().unwrap();
    let null: Vec<_> = (0..n)
        .filter(|&k| svd.singular_values[k] <= tol)
        .map(|k| v_t.row(k).transpose())
        .collect();
    let null = if null.is_empty() {
        DMatrix::zeros(n, 0)
    } else {
        DMatrix::from_columns(&null)
    };
    (x, null)
}

fn solve_design(order: Order, spec: DesignSpec) -> Result<ClosureDesign> {
    let (a, b) = exactness_system(order, &spec, spec.hard, DESIGN_MC)?;
    let (x0, null) = lstsq_with_null(&a, &b);
    let resid = (&a * &x0 - &b).amax();
    if resid > 1e-9 * b.amax().max(1.0) {
        return Err(Error::Unsupported(format!(
            "interpolation closure for order {order} infeasible (residual {resid:.3e})"
        )));
    }
    let x = match spec.soft {
        Some(soft) if null.ncols() > 0 => {
            // Minimize the next-degree defects inside the exact solution set.
            let (mut as_, mut bs) = exactness_system(order, &spec, soft, DESIGN_MC)?;
            for r in spec.nf * (soft.0 + 1)..as_.nrows() {
                as_.row_mut(r).scale_mut(spec.soft_weight);
                bs[r] *= spec.soft_weight;
            }
            let eps = 1e-8;
            let k = null.ncols();
            let mut m = DMatrix::zeros(as_.nrows() + k, k);
            m.rows_mut(0, as_.nrows()).copy_from(&(&as_ * &null));
            m.view_mut((as_.nrows(), 0), (k, k))
                .copy_from(&(DMatrix::identity(k, k) * eps));
            let mut rhs = DVector::zeros(as_.nrows() + k);
            rhs.rows_mut(0, as_.nrows()).copy_from(&(bs - &as_ * &x0));
            let (z, _) = lstsq_with_null(&m, &rhs);
            &x0 + &null * z
        }
        _ => x0,
    };
    Ok(ClosureDesign {
        spec,
        block: x.iter().copied().collect(),
    })
}

type DesignKey = (Order, InterpKind, Option<GoodMember>);

fn cached_design(key: DesignKey) -> Result<Arc<ClosureDesign>> {
    static CACHE: OnceLock<Mutex<HashMap<DesignKey, Arc<ClosureDesign>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(Default::default);
    if let Some(d) = cache.lock().unwrap().get(&key) {
        return Ok(d.clone());
    }
    let d = Arc::new(solve_design(key.0, design_spec(key.0, key.1, key.2))?);
    cache.lock().unwrap().insert(key, d.clone());
    Ok(d)
}

/// Default pair: for order-preserving operators the restriction is the good member.
pub fn build_interpolation_pair(
    order: Order,
    kind: InterpKind,
    m_coarse: usize,
) -> Result<InterpolationPair> {
    let good = (kind == InterpKind::OrderPreserving).then_some(GoodMember::Restriction);
    build_interpolation_pair_with(order, kind, good, m_coarse)
}

pub fn build_interpolation_pair_with(
    order: Order,
    kind: InterpKind,
    good: Option<GoodMember>,
    m_coarse: usize,
) -> Result<InterpolationPair> {
    let good = match kind {
        InterpKind::Traditional => None,
        InterpKind::OrderPreserving => Some(good.unwrap_or(GoodMember::Restriction)),
    };
    let design = cached_design((order, kind, good))?;
    assemble_pair(order, kind, good, &design, m_coarse)
}

/// Pair from an explicit closure design instead of the shipped one.
pub fn build_interpolation_pair_from_spec(
    order: Order,
    kind: InterpKind,
    good: Option<GoodMember>,
    spec: ClosureSpec,
    m_coarse: usize,
) -> Result<InterpolationPair> {
    let design = solve_design(order, spec)?;
    assemble_pair(order, kind, good, &design, m_coarse)
}

/// The shipped closure design for a kind and good member.
pub fn closure_spec(order: Order, kind: InterpKind, good: Option<GoodMember>) -> ClosureSpec {
    design_spec(order, kind, good)
}

fn assemble_pair(
    order: Order,
    kind: InterpKind,
    good: Option<GoodMember>,
    design: &ClosureDesign,
    m_coarse: usize,
) -> Result<InterpolationPair> {
    let spec = &design.spec;
    let mc = m_coarse;
    let min = (2 * spec.kc).max(order.min_points());
    if mc < min {
        return Err(sizing(
            "interpolation",
            format!(
                "order {order} {kind} interpolation needs at least {min} coarse points, got {mc}"
            ),
        ));
    }
    let nf = 2 * mc - 1;
    let mut p = fixed_part(order, &spec.even, mc, spec.kc, spec.nf);
    for j in 0..spec.nf {
        for i in 0..spec.kc {
            let v = design.block[j * spec.kc + i];
            p[(j, i)] = v;
            p[(nf - 1 - j, mc - 1 - i)] = v;
        }
    }
    let (hc, hf) = interface_norms(order, mc)?;
    let mut r = p.transpose();
    for i in 0..mc {
        for j in 0..nf {
            r[(i, j)] *= hf[j] / hc[i];
        }
    }
    let pair = InterpolationPair {
        order,
        kind,
        good,
        m_coarse: mc,
        m_fine: nf,
        c2f: CsrMatrix::from_dense(&p, 0.0),
        f2c: CsrMatrix::from_dense(&r, 0.0),
        degrees: spec.hard,
        coarse_norm: hc,
        fine_norm: hf,
    };
    let measured = pair.measured_degrees();
    if measured.0 < spec.hard.0 || measured.1 < spec.hard.1 {
        return Err(sizing(
            "interpolation",
            format!(
                "boundary blocks interact at m_coarse={mc}: exactness {measured:?} below design {:?}",
                spec.hard
            ),
        ));
    }
    Ok(pair)
}

impl InterpolationPair {
    /// `max |H_c R - P^T H_f|` relative to the largest weight.
    pub fn norm_compatibility_residual(&self) -> f64 {
        let p = self.c2f.to_dense();
        let r = self.f2c.to_dense();
        let mut worst: f64 = 0.0;
        for i in 0..self.m_coarse {
            for j in 0..self.m_fine {
                let d = self.coarse_norm[i] * r[(i, j)] - p[(j, i)] * self.fine_norm[j];
                worst = worst.max(d.abs());
            }
        }
        let scale = self.coarse_norm.iter().copied().fold(0.0, f64::max);
        worst / scale
    }

    /// Largest polynomial degree reproduced by `(c2f, f2c)` on the unit interval.
    pub fn measured_degrees(&self) -> (usize, usize) {
        let xc: Vec<f64> = (0..self.m_coarse)
            .map(|i| i as f64 / (self.m_coarse - 1) as f64)
            .collect();
        let xf: Vec<f64> = (0..self.m_fine)
            .map(|j| j as f64 / (self.m_fine - 1) as f64)
            .collect();
        let exact = |op: &CsrMatrix, src: &[f64], dst: &[f64], d: i32| {
            let f: Vec<f64> = src.iter().map(|x| x.powi(d)).collect();
            op.apply(&f)
                .iter()
                .zip(dst)
                .all(|(v, x)| (v - x.powi(d)).abs() <= 1e-10)
        };
        let degree = |op: &CsrMatrix, src: &[f64], dst: &[f64]| {
            if !exact(op, src, dst, 0) {
                return 0;
            }
            let mut d = 0;
            while d < 10 && exact(op, src, dst, d as i32 + 1) {
                d += 1;
            }
            d
        };
        (degree(&self.c2f, &xc, &xf), degree(&self.f2c, &xf, &xc))
    }

    /// Adds `delta` to one prolongation entry without updating the restriction.
    pub fn perturb_prolongation(&mut self, row: usize, col: usize, delta: f64) {
        let mut t = self.c2f.to_triplets();
        t.push(row, col, delta);
        self.c2f = t.to_csr();
    }

    pub fn coarse_norm(&self) -> &[f64] {
        &self.coarse_norm
    }

    pub fn fine_norm(&self) -> &[f64] {
        &self.fine_norm
    }
}
