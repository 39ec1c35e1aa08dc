//! Truncated Dirichlet-to-Neumann operators and the transparent
//! boundary-condition rows of both discretizations.

use faer::Mat;

use crate::fourier::dft_matrices;
use crate::problem::ModeConstants;
use crate::C64;

/// Diagonals `i beta_j` and `i gamma_j` over the window `j = 1-q .. N-q`.
#[derive(Clone, Debug, PartialEq)]
pub struct DtnDiagonals {
    pub lambda_beta: Vec<C64>,
    pub lambda_gamma: Vec<C64>,
}

pub fn dtn_diagonals(modes: &ModeConstants) -> DtnDiagonals {
    DtnDiagonals {
        lambda_beta: modes.lambda_beta(),
        lambda_gamma: modes.lambda_gamma(),
    }
}

/// Dense value-space DtN matrices `S = G* L_beta G`, `T = G* L_gamma G`.
#[derive(Clone, Debug)]
pub struct DtnMatrices {
    pub s: Mat<C64>,
    pub t: Mat<C64>,
}

fn conjugate_diagonal(g: &Mat<C64>, d: &[C64]) -> Mat<C64> {
    let n = d.len();
    let scaled = Mat::from_fn(n, n, |i, j| d[i] * g[(i, j)]);
    g.adjoint() * scaled
}

pub fn dtn_matrices(modes: &ModeConstants) -> DtnMatrices {
    let (_, g) = dft_matrices(modes.n, modes.q);
    let d = dtn_diagonals(modes);
    DtnMatrices {
        s: conjugate_diagonal(&g, &d.lambda_beta),
        t: conjugate_diagonal(&g, &d.lambda_gamma),
    }
}

/// Mode stored at FFT-natural position `i`: `0, 1, .., N-q, 1-q, .., -1`.
pub fn natural_mode(modes: &ModeConstants, i: usize) -> i64 {
    let i = i as i64;
    if i <= modes.j_max() {
        i
    } else {
        i - modes.n as i64
    }
}

/// `(L_S, L_T)`: the DtN diagonals permuted into FFT-natural order, so that
/// `S = F* L_S F`.
pub fn reordered_diagonals(modes: &ModeConstants) -> (Vec<C64>, Vec<C64>) {
    let d = dtn_diagonals(modes);
    (0..modes.n)
        .map(|i| {
            let p = modes.position(natural_mode(modes, i));
            (d.lambda_beta[p], d.lambda_gamma[p])
        })
        .unzip()
}

/// `-2 i beta0 exp(-i beta0)`: the incident-wave datum on `y = 1`.
pub fn incident_datum(modes: &ModeConstants) -> C64 {
    let b = modes.beta0;
    C64::new(0.0, -2.0 * b) * C64::from_polar(1.0, -b)
}

/// Collocation boundary rows over `vec(V)`, `V` of size `(M+1) x N` stacked
/// by columns.
#[derive(Clone, Debug)]
pub struct CollocationBc {
    /// `I (x) e_0^T D_y - S (x) e_0^T`.
    pub top: Mat<C64>,
    /// `I (x) e_M^T D_y + T (x) e_M^T`.
    pub bottom: Mat<C64>,
    pub rhs_top: Vec<C64>,
}

pub fn bc_rows_collocation(modes: &ModeConstants, m: usize, dy: &Mat<f64>) -> CollocationBc {
    let n = modes.n;
    let rows = m + 1;
    assert_eq!(dy.nrows(), rows);
    let dtn = dtn_matrices(modes);
    let mut top = Mat::zeros(n, n * rows);
    let mut bottom = Mat::zeros(n, n * rows);
    for a in 0..n {
        for k in 0..rows {
            top[(a, a * rows + k)] += C64::new(dy[(0, k)], 0.0);
            bottom[(a, a * rows + k)] += C64::new(dy[(m, k)], 0.0);
        }
        for b in 0..n {
            top[(a, b * rows)] -= dtn.s[(a, b)];
            bottom[(a, b * rows + m)] += dtn.t[(a, b)];
        }
    }
    CollocationBc {
        top,
        bottom,
        rhs_top: vec![incident_datum(modes); n],
    }
}

/// Coefficient-space boundary functionals. For the mode stored in column
/// `p` of `V` (size `M x N`) the top row reads
/// `(b1 - i beta_j a1)^T V[:, p]` and the bottom row
/// `(b2 + i gamma_j a2)^T V[:, p]`.
#[derive(Clone, Debug)]
pub struct TensorBc {
    pub b1: Vec<C64>,
    pub b2: Vec<C64>,
    pub a1: Vec<C64>,
    pub a2: Vec<C64>,
    pub diagonals: DtnDiagonals,
    /// Nonzero only at position `q - 1` (mode 0).
    pub rhs_top: Vec<C64>,
}

impl TensorBc {
    pub fn top_row(&self, p: usize) -> Vec<C64> {
        let lb = self.diagonals.lambda_beta[p];
        self.b1
            .iter()
            .zip(&self.a1)
            .map(|(b, a)| b - lb * a)
            .collect()
    }

    pub fn bottom_row(&self, p: usize) -> Vec<C64> {
        let lg = self.diagonals.lambda_gamma[p];
        self.b2
            .iter()
            .zip(&self.a2)
            .map(|(b, a)| b + lg * a)
            .collect()
    }
}

pub fn bc_rows_tensor(modes: &ModeConstants, m: usize) -> TensorBc {
    assert!(m >= 2, "tensor boundary rows need M >= 2");
    let sign = |i: usize| if i % 2 == 0 { 1.0 } else { -1.0 };
    let b1 = (0..m).map(|i| C64::new((i * i) as f64, 0.0)).collect();
    let b2 = (0..m)
        .map(|i| C64::new(-sign(i) * (i * i) as f64, 0.0))
        .collect();
    let a1 = vec![C64::new(1.0, 0.0); m];
    let a2 = (0..m).map(|i| C64::new(sign(i), 0.0)).collect();
    let mut rhs_top = vec![C64::new(0.0, 0.0); modes.n];
    rhs_top[modes.q - 1] = incident_datum(modes);
    TensorBc {
        b1,
        b2,
        a1,
        a2,
        diagonals: dtn_diagonals(modes),
        rhs_top,
    }
}
