//! Discrete solutions `v(x, y)` in value space or coefficient space.

use faer::Mat;

use crate::cheb::ChebGrid;
use crate::fourier::dft;
use crate::problem::ModeConstants;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    /// `(M+1) x N` grid values: entry `(m, n)` is `v(x_{n+1}, y_m)`.
    Values,
    /// `M x N` coefficients: entry `(i, p)` multiplies `T_i(y) exp(i j x)`
    /// for the mode `j` stored at position `p`.
    Coefficients,
}

#[derive(Clone, Debug)]
pub struct SolutionField {
    pub repr: Representation,
    pub data: Mat<C64>,
    pub modes: ModeConstants,
}

impl SolutionField {
    pub fn values(data: Mat<C64>, modes: ModeConstants) -> Self {
        assert_eq!(data.ncols(), modes.n);
        Self {
            repr: Representation::Values,
            data,
            modes,
        }
    }

    pub fn coefficients(data: Mat<C64>, modes: ModeConstants) -> Self {
        assert_eq!(data.ncols(), modes.n);
        Self {
            repr: Representation::Coefficients,
            data,
            modes,
        }
    }

    pub fn n(&self) -> usize {
        self.modes.n
    }

    /// The `M` of the discretization (`rows - 1` for grid values).
    pub fn m(&self) -> usize {
        match self.repr {
            Representation::Values => self.data.nrows() - 1,
            Representation::Coefficients => self.data.nrows(),
        }
    }

    pub fn q(&self) -> usize {
        self.modes.q
    }

    /// Fourier coefficients in `x` of every stored row: for grid values the
    /// rows are `y_m`, for coefficients the Chebyshev degrees.
    pub fn mode_matrix(&self) -> Mat<C64> {
        match self.repr {
            Representation::Coefficients => self.data.clone(),
            Representation::Values => {
                let n = self.n();
                let mut out = Mat::zeros(self.data.nrows(), n);
                for r in 0..self.data.nrows() {
                    let row: Vec<C64> = (0..n).map(|k| self.data[(r, k)]).collect();
                    let x = dft(&row);
                    for p in 0..n {
                        let j = self.modes.mode_at(p);
                        let idx = j.rem_euclid(n as i64) as usize;
                        // Grid starts at x_1 = 2pi/N, hence the phase.
                        let phase =
                            C64::from_polar(1.0, -2.0 * std::f64::consts::PI * j as f64 / n as f64);
                        out[(r, p)] = phase * x[idx] / n as f64;
                    }
                }
                out
            }
        }
    }

    /// Weights combining the stored rows into the value at `y`.
    fn y_weights(&self, y: f64) -> Vec<f64> {
        let rows = self.data.nrows();
        match self.repr {
            Representation::Coefficients => {
                let mut w = Vec::with_capacity(rows);
                let (mut prev, mut cur) = (1.0, y);
                for i in 0..rows {
                    if i == 0 {
                        w.push(1.0);
                    } else {
                        w.push(cur);
                        let next = 2.0 * y * cur - prev;
                        prev = cur;
                        cur = next;
                    }
                }
                w
            }
            Representation::Values => {
                if rows == 1 {
                    return vec![1.0];
                }
                let grid = ChebGrid::new(rows - 1);
                let mut w = vec![0.0; rows];
                for (k, wk) in w.iter_mut().enumerate() {
                    let d = y - grid.point(k);
                    if d == 0.0 {
                        let mut e = vec![0.0; rows];
                        e[k] = 1.0;
                        return e;
                    }
                    let mut b = if k % 2 == 0 { 1.0 } else { -1.0 };
                    if k == 0 || k == rows - 1 {
                        b *= 0.5;
                    }
                    *wk = b / d;
                }
                let s: f64 = w.iter().sum();
                w.iter_mut().for_each(|v| *v /= s);
                w
            }
        }
    }

    fn profiles(&self, modes_mat: &Mat<C64>, y: f64) -> Vec<C64> {
        let w = self.y_weights(y);
        (0..self.n())
            .map(|p| {
                w.iter()
                    .enumerate()
                    .map(|(r, wr)| modes_mat[(r, p)] * *wr)
                    .sum()
            })
            .collect()
    }

    /// Fourier coefficients `v_j(y)` of `v(., y)` over the mode window.
    pub fn mode_profiles_at(&self, y: f64) -> Vec<C64> {
        self.profiles(&self.mode_matrix(), y)
    }

    /// `v` (or `u = v exp(i alpha0 x)`) on the tensor grid `ys x xs`; the
    /// result has one row per `y`.
    pub fn eval_grid(&self, xs: &[f64], ys: &[f64], reconstruct_u: bool) -> Mat<C64> {
        let mm = self.mode_matrix();
        let mut out = Mat::zeros(ys.len(), xs.len());
        let shift = if reconstruct_u {
            self.modes.alpha0
        } else {
            0.0
        };
        let j0 = self.modes.j_min() as f64;
        for (iy, &y) in ys.iter().enumerate() {
            let prof = self.profiles(&mm, y);
            for (ix, &x) in xs.iter().enumerate() {
                let mut acc = C64::new(0.0, 0.0);
                for (p, c) in prof.iter().enumerate() {
                    acc += c * C64::from_polar(1.0, (j0 + p as f64 + shift) * x);
                }
                out[(iy, ix)] = acc;
            }
        }
        out
    }

    pub fn eval(&self, x: f64, y: f64, reconstruct_u: bool) -> C64 {
        self.eval_grid(&[x], &[y], reconstruct_u)[(0, 0)]
    }

    /// Mode coefficients of the traces `v(., 1)` and `v(., -1)`.
    pub fn traces(&self) -> (Vec<C64>, Vec<C64>) {
        match self.repr {
            Representation::Values => {
                let mm = self.mode_matrix();
                let last = mm.nrows() - 1;
                (
                    (0..self.n()).map(|p| mm[(0, p)]).collect(),
                    (0..self.n()).map(|p| mm[(last, p)]).collect(),
                )
            }
            Representation::Coefficients => {
                let rows = self.data.nrows();
                let top = (0..self.n())
                    .map(|p| (0..rows).map(|i| self.data[(i, p)]).sum())
                    .collect();
                let bottom = (0..self.n())
                    .map(|p| {
                        (0..rows)
                            .map(|i| {
                                if i % 2 == 0 {
                                    self.data[(i, p)]
                                } else {
                                    -self.data[(i, p)]
                                }
                            })
                            .sum()
                    })
                    .collect();
                (top, bottom)
            }
        }
    }

    /// Same solution sampled on its own collocation grid `ChebGrid(m) x FourierGrid(N)`.
    pub fn to_values(&self, m: usize) -> SolutionField {
        let grid = ChebGrid::new(m);
        let xs: Vec<f64> = (1..=self.n())
            .map(|k| 2.0 * std::f64::consts::PI * k as f64 / self.n() as f64)
            .collect();
        let data = self.eval_grid(&xs, &grid.points(), false);
        SolutionField::values(data, self.modes.clone())
    }
}
