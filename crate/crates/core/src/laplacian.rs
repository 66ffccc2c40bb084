//! Matting Laplacian on multispectral pixel vectors and the graph regularizer
//! `Tr(X^T L X)`.
//!
//! For every fully interior `(2r+1) x (2r+1)` window `w` with pixel-vector mean
//! `mu` and population covariance `S`, each pair `(i, j)` inside the window
//! receives
//!
//! ```text
//! delta_ij - (1 + (z_i - mu)^T (S + eps/|w| I)^{-1} (z_j - mu)) / |w|
//! ```
//!
//! and the Laplacian is the sum of these contributions over windows.

use std::io::Write;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::Cube;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LaplacianConfig {
    /// Window radius; windows are `(2r+1) x (2r+1)`.
    pub radius: usize,
    pub eps: f64,
}

impl Default for LaplacianConfig {
    fn default() -> Self {
        Self {
            radius: 1,
            eps: 1e-7,
        }
    }
}

impl LaplacianConfig {
    pub fn validate(&self) -> Result<()> {
        if self.radius < 1 {
            return Err(Error::InvalidConfig("Laplacian radius must be >= 1".into()));
        }
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidConfig("Laplacian eps must be > 0".into()));
        }
        Ok(())
    }

    pub fn window_len(&self) -> usize {
        (2 * self.radius + 1) * (2 * self.radius + 1)
    }
}

/// Symmetric sparse matrix in CSR form with both triangles stored.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSymMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseSymMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed in
    /// sorted order. Each off-diagonal triplet must be supplied for both
    /// orientations.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(r, c, _)) = triplets.iter().find(|(r, c, _)| *r >= dim || *c >= dim) {
            return Err(Error::DimensionMismatch(format!(
                "entry ({r}, {c}) outside {dim}x{dim}"
            )));
        }
        triplets.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(c);
                values.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..dim {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            dim,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            row_ptr: vec![0; dim + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[s..e]
            .iter()
            .copied()
            .zip(self.values[s..e].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[s..e].binary_search(&j) {
            Ok(k) => self.values[s + k],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.dim).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// `y = L x` for one vector.
    pub fn apply(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dim);
        debug_assert_eq!(y.len(), self.dim);
        for (i, yi) in y.iter_mut().enumerate() {
            let (s, e) = (self.row_ptr[i], self.row_ptr[i + 1]);
            let mut acc = 0.0;
            for k in s..e {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            *yi = acc;
        }
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.dim]; self.dim];
        for (i, j, v) in self.triplets() {
            d[i][j] = v;
        }
        d
    }

    /// Writes one `row,col,value` line per stored entry.
    pub fn write_triplets(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for (i, j, v) in self.triplets() {
            writeln!(w, "{i},{j},{v:e}").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// Builds the matting Laplacian of the pixel vectors of `z`.
pub fn build_matting_laplacian(z: &Cube, cfg: &LaplacianConfig) -> Result<SparseSymMatrix> {
    cfg.validate()?;
    let (h, w, nb) = z.dims();
    let r = cfg.radius;
    let side = 2 * r + 1;
    if h < side || w < side {
        return Err(Error::DimensionMismatch(format!(
            "image {h}x{w} is smaller than a {side}x{side} window"
        )));
    }
    let n_w = side * side;
    let inv_n = 1.0 / n_w as f64;
    let reg = cfg.eps * inv_n;

    // One row of window centers per task; each yields upper-triangle triplets.
    let per_row: Vec<Result<Vec<(usize, usize, f64)>>> = (r..h - r)
        .into_par_iter()
        .map(|cr| {
            let mut out = Vec::with_capacity((w - 2 * r) * n_w * (n_w + 1) / 2);
            let mut idx = vec![0usize; n_w];
            let mut centered = DMatrix::<f64>::zeros(n_w, nb);
            for cc in r..w - r {
                let mut k = 0;
                for dr in 0..side {
                    for dc in 0..side {
                        idx[k] = (cr + dr - r) * w + (cc + dc - r);
                        k += 1;
                    }
                }
                let mut mean = DVector::<f64>::zeros(nb);
                for (k, &n) in idx.iter().enumerate() {
                    for l in 0..nb {
                        let v = z.band(l)[n];
                        centered[(k, l)] = v;
                        mean[l] += v;
                    }
                }
                mean *= inv_n;
                for k in 0..n_w {
                    for l in 0..nb {
                        centered[(k, l)] -= mean[l];
                    }
                }
                let mut cov = centered.transpose() * &centered * inv_n;
                for l in 0..nb {
                    cov[(l, l)] += reg;
                }
                let chol = cov.cholesky().ok_or_else(|| {
                    Error::Numerical(format!("window covariance at ({cr}, {cc}) is not SPD"))
                })?;
                // (z_i - mu)^T M (z_j - mu) for all window pairs.
                let solved = chol.solve(&centered.transpose());
                let affinity = &centered * solved;
                for a in 0..n_w {
                    for b in a..n_w {
                        let delta = if a == b { 1.0 } else { 0.0 };
                        let v = delta - inv_n * (1.0 + affinity[(a, b)]);
                        out.push((idx[a], idx[b], v));
                    }
                }
            }
            Ok(out)
        })
        .collect();

    let mut triplets = Vec::new();
    for chunk in per_row {
        for (i, j, v) in chunk? {
            if i == j {
                triplets.push((i, j, v));
            } else {
                triplets.push((i, j, v));
                triplets.push((j, i, v));
            }
        }
    }
    SparseSymMatrix::from_triplets(h * w, triplets)
}

fn check_dims(l: &SparseSymMatrix, x: &Cube) -> Result<()> {
    if l.dim() != x.pixels() {
        return Err(Error::DimensionMismatch(format!(
            "Laplacian is {0}x{0}, cube has {1} pixels",
            l.dim(),
            x.pixels()
        )));
    }
    Ok(())
}

/// `L X`, one sparse matvec per band.
pub fn apply_laplacian(l: &SparseSymMatrix, x: &Cube) -> Result<Cube> {
    check_dims(l, x)?;
    let mut out = Cube::zeros(x.height(), x.width(), x.bands());
    let np = x.pixels();
    out.data_mut()
        .par_chunks_exact_mut(np)
        .zip(x.data().par_chunks_exact(np))
        .for_each(|(dst, src)| l.apply(src, dst));
    Ok(out)
}

/// `Tr(X^T L X)`.
pub fn quadratic_form(l: &SparseSymMatrix, x: &Cube) -> Result<f64> {
    let lx = apply_laplacian(l, x)?;
    Ok(lx.dot(x))
}
