//! Diagonal-norm SBP second-derivative operators of orders 4 and 6.

use std::fmt;

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{sizing, Error, Result};
use crate::sparse::{CsrMatrix, Triplets};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Order {
    Fourth,
    Sixth,
}

impl Order {
    pub const ALL: [Order; 2] = [Order::Fourth, Order::Sixth];

    pub fn from_value(v: usize) -> Result<Self> {
        match v {
            4 => Ok(Order::Fourth),
            6 => Ok(Order::Sixth),
            _ => Err(Error::Unsupported(format!("SBP order {v} (only 4 and 6)"))),
        }
    }

    /// Interior accuracy `2p`.
    pub fn value(self) -> usize {
        match self {
            Order::Fourth => 4,
            Order::Sixth => 6,
        }
    }

    /// Boundary accuracy `p`.
    pub fn p(self) -> usize {
        self.value() / 2
    }

    pub fn closure_rows(self) -> usize {
        match self {
            Order::Fourth => 4,
            Order::Sixth => 6,
        }
    }

    pub fn min_points(self) -> usize {
        2 * self.closure_rows() + 1
    }

    fn tables(self) -> Tables {
        match self {
            Order::Fourth => Tables {
                norm: &H4,
                interior: &INTERIOR4,
                closure: &CLOSURE4,
                deriv: &DERIV4,
            },
            Order::Sixth => Tables {
                norm: &H6,
                interior: &INTERIOR6,
                closure: &CLOSURE6,
                deriv: &DERIV6,
            },
        }
    }
}

impl fmt::Display for Order {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value())
    }
}

struct Tables {
    norm: &'static [f64],
    interior: &'static [f64],
    closure: &'static [&'static [f64]],
    deriv: &'static [f64],
}

const H4: [f64; 4] = [17.0 / 48.0, 59.0 / 48.0, 43.0 / 48.0, 49.0 / 48.0];

const INTERIOR4: [f64; 5] = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];

#[rustfmt::skip]
const CLOSURE4: [&[f64]; 4] = [
    &[2.0, -5.0, 4.0, -1.0],
    &[1.0, -2.0, 1.0],
    &[-4.0 / 43.0, 59.0 / 43.0, -110.0 / 43.0, 59.0 / 43.0, -4.0 / 43.0],
    &[-1.0 / 49.0, 0.0, 59.0 / 49.0, -118.0 / 49.0, 64.0 / 49.0, -4.0 / 49.0],
];

const DERIV4: [f64; 4] = [-11.0 / 6.0, 3.0, -3.0 / 2.0, 1.0 / 3.0];

#[rustfmt::skip]
const H6: [f64; 6] = [
    13649.0 / 43200.0, 12013.0 / 8640.0, 2711.0 / 4320.0,
    5359.0 / 4320.0, 7877.0 / 8640.0, 43801.0 / 43200.0,
];

#[rustfmt::skip]
const INTERIOR6: [f64; 7] = [
    1.0 / 90.0, -3.0 / 20.0, 3.0 / 2.0, -49.0 / 18.0, 3.0 / 2.0, -3.0 / 20.0, 1.0 / 90.0,
];

#[rustfmt::skip]
const CLOSURE6: [&[f64]; 6] = [
    &[114170.0 / 40947.0, -438107.0 / 54596.0, 336409.0 / 40947.0, -276997.0 / 81894.0,
      3747.0 / 13649.0, 21035.0 / 163788.0],
    &[6173.0 / 5860.0, -2066.0 / 879.0, 3283.0 / 1758.0, -303.0 / 293.0,
      2111.0 / 3516.0, -601.0 / 4395.0],
    &[-52391.0 / 81330.0, 134603.0 / 32532.0, -21982.0 / 2711.0, 112915.0 / 16266.0,
      -46969.0 / 16266.0, 30409.0 / 54220.0],
    &[68603.0 / 321540.0, -12423.0 / 10718.0, 112915.0 / 32154.0, -75934.0 / 16077.0,
      53369.0 / 21436.0, -54899.0 / 160770.0, 48.0 / 5359.0],
    &[-7053.0 / 39385.0, 86551.0 / 94524.0, -46969.0 / 23631.0, 53369.0 / 15754.0,
      -87904.0 / 23631.0, 820271.0 / 472620.0, -1296.0 / 7877.0, 96.0 / 7877.0],
    &[21035.0 / 525612.0, -24641.0 / 131403.0, 30409.0 / 87602.0, -54899.0 / 131403.0,
      820271.0 / 525612.0, -117600.0 / 43801.0, 64800.0 / 43801.0, -6480.0 / 43801.0,
      480.0 / 43801.0],
];

const DERIV6: [f64; 5] = [-25.0 / 12.0, 4.0, -3.0, 4.0 / 3.0, -1.0 / 4.0];

/// Sparse boundary row: `coeffs[k]` multiplies entry `start + k`.
#[derive(Clone, Debug, PartialEq)]
pub struct BoundaryRow {
    pub start: usize,
    pub coeffs: Vec<f64>,
}

impl BoundaryRow {
    pub fn dot(&self, x: &[f64]) -> f64 {
        self.coeffs
            .iter()
            .zip(&x[self.start..])
            .map(|(c, v)| c * v)
            .sum()
    }

    pub fn to_dense(&self, n: usize) -> Vec<f64> {
        let mut out = vec![0.0; n];
        out[self.start..self.start + self.coeffs.len()].copy_from_slice(&self.coeffs);
        out
    }
}

#[derive(Clone, Debug)]
pub struct SbpOperator1D {
    pub order: Order,
    pub m: usize,
    pub h: f64,
    /// Diagonal of `H`.
    pub norm: Vec<f64>,
    pub stiffness: CsrMatrix,
    pub d2: CsrMatrix,
    pub d_left: BoundaryRow,
    pub d_right: BoundaryRow,
}

pub fn build_sbp_d2(order: Order, m: usize, h: f64) -> Result<SbpOperator1D> {
    if m < order.min_points() {
        return Err(sizing(
            "sbp_operators",
            format!(
                "order {order} needs at least {} points, got {m}",
                order.min_points()
            ),
        ));
    }
    if !(h > 0.0 && h.is_finite()) {
        return Err(sizing(
            "sbp_operators",
            format!("spacing must be positive, got {h}"),
        ));
    }
    let t = order.tables();
    let nb = t.closure.len();

    let mut norm = vec![h; m];
    for (i, &w) in t.norm.iter().enumerate() {
        norm[i] = w * h;
        norm[m - 1 - i] = w * h;
    }

    let ih2 = 1.0 / (h * h);
    let half = t.interior.len() / 2;
    let mut d2 = Triplets::new(m, m);
    for i in 0..m {
        if i < nb {
            for (j, &c) in t.closure[i].iter().enumerate() {
                if c != 0.0 {
                    d2.push(i, j, c * ih2);
                }
            }
        } else if i >= m - nb {
            let r = m - 1 - i;
            for (j, &c) in t.closure[r].iter().enumerate() {
                if c != 0.0 {
                    d2.push(i, m - 1 - j, c * ih2);
                }
            }
        } else {
            for (k, &c) in t.interior.iter().enumerate() {
                d2.push(i, i + k - half, c * ih2);
            }
        }
    }
    let d2 = d2.to_csr();

    let d_left = BoundaryRow {
        start: 0,
        coeffs: t.deriv.iter().map(|c| c / h).collect(),
    };
    let nd = t.deriv.len();
    let d_right = BoundaryRow {
        start: m - nd,
        coeffs: t.deriv.iter().rev().map(|c| -c / h).collect(),
    };

    // M = -H D2 + e_r d_r^T - e_l d_l^T
    let mut mt = Triplets::new(m, m);
    for i in 0..m {
        for (j, v) in d2.row(i) {
            mt.push(i, j, -norm[i] * v);
        }
    }
    for (k, &c) in d_left.coeffs.iter().enumerate() {
        mt.push(0, d_left.start + k, -c);
    }
    for (k, &c) in d_right.coeffs.iter().enumerate() {
        mt.push(m - 1, d_right.start + k, c);
    }
    let mut stiffness = mt.to_csr().to_triplets();
    // Cancellation leaves ~1e-16 dust outside the true stencil; drop it.
    let scale = 1.0 / h;
    stiffness.entries.retain(|e| e.2.abs() > 1e-13 * scale);
    let stiffness = stiffness.to_csr();

    Ok(SbpOperator1D {
        order,
        m,
        h,
        norm,
        stiffness,
        d2,
        d_left,
        d_right,
    })
}

impl SbpOperator1D {
    pub fn e_left(&self, x: &[f64]) -> f64 {
        x[0]
    }

    pub fn e_right(&self, x: &[f64]) -> f64 {
        x[self.m - 1]
    }

    pub fn grid(&self, x0: f64) -> Vec<f64> {
        (0..self.m).map(|i| x0 + i as f64 * self.h).collect()
    }

    /// `max |H D2 - (-M + e_r d_r^T - e_l d_l^T)|`, computed densely.
    pub fn sbp_residual(&self) -> f64 {
        let m = self.m;
        let mut r = self.d2.to_dense();
        for i in 0..m {
            for j in 0..m {
                r[(i, j)] *= self.norm[i];
            }
        }
        r += self.stiffness.to_dense();
        let dl = self.d_left.to_dense(m);
        let dr = self.d_right.to_dense(m);
        for j in 0..m {
            r[(m - 1, j)] -= dr[j];
            r[(0, j)] += dl[j];
        }
        r.amax()
    }
}

#[derive(Clone, Debug)]
pub struct SbpCertificate {
    pub order: Order,
    pub m: usize,
    pub h_positive: bool,
    /// SBP identity residual multiplied by `h`.
    pub sbp_residual: f64,
    pub symmetry_defect: f64,
    /// Smallest eigenvalue of `M` relative to its largest; `None` above the dense size limit.
    pub min_eigenvalue: Option<f64>,
    pub interior_degree: usize,
    pub closure_degree: usize,
    pub derivative_degree: usize,
}

pub const DENSE_CERT_LIMIT: usize = 64;

impl SbpCertificate {
    pub fn passed(&self) -> bool {
        self.h_positive
            && self.sbp_residual <= 1e-12
            && self.symmetry_defect <= 1e-12
            && self.min_eigenvalue.map_or(true, |e| e >= -1e-13)
            && self.interior_degree >= self.order.value()
            && self.closure_degree >= self.order.p()
    }
}

const MAX_DEGREE: usize = 12;
const EXACT_TOL: f64 = 1e-10;

fn powi(x: f64, k: usize) -> f64 {
    x.powi(k as i32)
}

// Polynomial tests run in grid-index coordinates so closure rows see O(1) values.
fn row_exact_to(op: &SbpOperator1D, row: usize, center: f64, k: usize) -> bool {
    let h2 = op.h * op.h;
    let mut acc = 0.0;
    let mut scale = 1.0f64;
    for (j, v) in op.d2.row(row) {
        let t = j as f64 - center;
        acc += v * h2 * powi(t, k);
        scale = scale.max((v * h2 * powi(t, k)).abs());
    }
    let t = row as f64 - center;
    let exact = if k >= 2 {
        (k * (k - 1)) as f64 * powi(t, k - 2)
    } else {
        0.0
    };
    (acc - exact).abs() <= EXACT_TOL * scale
}

fn degree_of(mut exact: impl FnMut(usize) -> bool) -> usize {
    let mut deg = 0;
    while deg < MAX_DEGREE && exact(deg + 1) {
        deg += 1;
    }
    if exact(0) {
        deg
    } else {
        0
    }
}

pub fn certify_sbp(op: &SbpOperator1D) -> SbpCertificate {
    let m = op.m;
    let nb = op.order.closure_rows();
    let h_positive = op.norm.iter().all(|&w| w > 0.0 && w.is_finite());
    let sbp_residual = op.sbp_residual() * op.h;

    let mut symmetry_defect: f64 = 0.0;
    for i in 0..m {
        for (j, v) in op.stiffness.row(i) {
            symmetry_defect = symmetry_defect.max((v - op.stiffness.get(j, i)).abs() * op.h);
        }
    }

    let min_eigenvalue = (m <= DENSE_CERT_LIMIT).then(|| {
        let dense = op.stiffness.to_dense();
        let sym = (&dense + dense.transpose()) * 0.5;
        let eig = SymmetricEigen::new(sym).eigenvalues;
        let top = eig.amax().max(f64::MIN_POSITIVE);
        eig.min() / top
    });

    let mid = m / 2;
    let interior_degree = degree_of(|k| row_exact_to(op, mid, mid as f64, k));
    let closure_degree = degree_of(|k| {
        (0..nb).all(|i| row_exact_to(op, i, 0.0, k))
            && (m - nb..m).all(|i| row_exact_to(op, i, (m - 1) as f64, k))
    });
    let derivative_degree = degree_of(|k| {
        let exact = if k == 1 { 1.0 } else { 0.0 };
        let left: f64 = op
            .d_left
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * op.h * powi((op.d_left.start + j) as f64, k))
            .sum();
        let right: f64 = op
            .d_right
            .coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * op.h * powi((op.d_right.start + j) as f64 - (m - 1) as f64, k))
            .sum();
        let scale = (op.order.closure_rows() as f64).powi(k as i32) * 10.0;
        (left - exact).abs() <= EXACT_TOL * scale && (right - exact).abs() <= EXACT_TOL * scale
    });

    SbpCertificate {
        order: op.order,
        m,
        h_positive,
        sbp_residual,
        symmetry_defect,
        min_eigenvalue,
        interior_degree,
        closure_degree,
        derivative_degree,
    }
}

/// Dense `H^{-1} M` scaled by `h^2`, used by spectral oracles.
pub fn dense_neumann_operator(op: &SbpOperator1D) -> DMatrix<f64> {
    let mut a = op.stiffness.to_dense();
    for i in 0..op.m {
        for j in 0..op.m {
            a[(i, j)] *= op.h * op.h / op.norm[i];
        }
    }
    a
}
