//! Sparse storage, additive assembly, Dirichlet elimination and a direct
//! banded LU solver.
//!
//! Structured-mesh systems have small bandwidth under the natural node
//! numbering, so a banded factorization with partial pivoting handles the
//! SPD, symmetric-indefinite and non-symmetric cases with one code path.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    Symmetric,
    General,
}

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    pub dim: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
    pub symmetry: Symmetry,
}

impl SparseMatrix {
    /// Compresses triplets, summing duplicates. Duplicates are summed in
    /// value order so the result does not depend on insertion order.
    pub fn from_triplets(dim: usize, symmetry: Symmetry, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)).then(a.2.total_cmp(&b.2)));
        let mut row_ptr = vec![0usize; dim + 1];
        let mut col_idx = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in triplets {
            if last == Some((r, c)) {
                *values.last_mut().expect("entry exists") += v;
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
        Self { dim, row_ptr, col_idx, values, symmetry }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, Symmetry::Symmetric, (0..dim).map(|i| (i, i, 1.0)).collect())
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    /// `max |A_ij - A_ji|`.
    pub fn max_asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut d = DMatrix::zeros(self.dim, self.dim);
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                d[(i, j)] = v;
            }
        }
        d
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut kl, mut ku) = (0, 0);
        for i in 0..self.dim {
            for (j, _) in self.row(i) {
                if j < i {
                    kl = kl.max(i - j);
                } else {
                    ku = ku.max(j - i);
                }
            }
        }
        (kl, ku)
    }

    /// Coordinate text dump, one `row col value` line per stored entry
    /// (1-based indices, MatrixMarket body layout).
    pub fn to_coordinate_text(&self) -> String {
        let mut s = format!("{} {} {}\n", self.dim, self.dim, self.nnz());
        for i in 0..self.dim {
            for (j, v) in self.row(i) {
                let _ = writeln!(s, "{} {} {:.17e}", i + 1, j + 1, v);
            }
        }
        s
    }
}

/// Matrix, right-hand side and prescribed values being assembled.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    dim: usize,
    symmetry: Symmetry,
    triplets: Vec<(usize, usize, f64)>,
    pub rhs: Vec<f64>,
    constraints: BTreeMap<usize, f64>,
}

impl LinearSystem {
    pub fn new(dim: usize, symmetry: Symmetry) -> Self {
        Self { dim, symmetry, triplets: Vec::new(), rhs: vec![0.0; dim], constraints: BTreeMap::new() }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }

    /// Scatters an element matrix (rows = test dofs, columns = trial dofs)
    /// and element vector through the local-to-global map `dofs`.
    pub fn accumulate(&mut self, matrix: &DMatrix<f64>, rhs: &[f64], dofs: &[usize]) -> Result<()> {
        if matrix.nrows() != dofs.len() || matrix.ncols() != dofs.len() || rhs.len() != dofs.len() {
            return Err(Error::InvalidArgument(format!(
                "element block {}x{} with {} rhs entries does not match {} dofs",
                matrix.nrows(),
                matrix.ncols(),
                rhs.len(),
                dofs.len()
            )));
        }
        if let Some(&bad) = dofs.iter().find(|&&d| d >= self.dim) {
            return Err(Error::IndexOutOfRange { index: bad, dim: self.dim });
        }
        for (a, &ga) in dofs.iter().enumerate() {
            self.rhs[ga] += rhs[a];
            for (b, &gb) in dofs.iter().enumerate() {
                let v = matrix[(a, b)];
                if v != 0.0 {
                    self.triplets.push((ga, gb, v));
                }
            }
        }
        Ok(())
    }

    /// Prescribes `value` for `dof`. Re-prescribing the same value is a no-op.
    pub fn constrain(&mut self, dof: usize, value: f64) -> Result<()> {
        if dof >= self.dim {
            return Err(Error::IndexOutOfRange { index: dof, dim: self.dim });
        }
        if let Some(&old) = self.constraints.get(&dof) {
            if (old - value).abs() > 1e-12 * (1.0 + old.abs()) {
                return Err(Error::ConflictingConstraint { dof, first: old, second: value });
            }
            return Ok(());
        }
        self.constraints.insert(dof, value);
        Ok(())
    }

    pub fn constraints(&self) -> &BTreeMap<usize, f64> {
        &self.constraints
    }

    /// Assembled matrix before any constraint is applied.
    pub fn matrix(&self) -> SparseMatrix {
        SparseMatrix::from_triplets(self.dim, self.symmetry, self.triplets.clone())
    }

    /// Matrix and right-hand side after Dirichlet elimination.
    pub fn constrained(&self) -> (SparseMatrix, Vec<f64>) {
        apply_dirichlet(&self.matrix(), &self.rhs, &self.constraints)
    }

    pub fn solve(&self) -> Result<Vec<f64>> {
        let (a, b) = self.constrained();
        solve(&a, &b)
    }
}

/// Symmetric elimination: moves known columns to the right-hand side, then
/// replaces constrained rows and columns by identity rows.
pub fn apply_dirichlet(matrix: &SparseMatrix, rhs: &[f64], constraints: &BTreeMap<usize, f64>) -> (SparseMatrix, Vec<f64>) {
    let n = matrix.dim;
    let mut fixed = vec![None; n];
    for (&d, &v) in constraints {
        fixed[d] = Some(v);
    }
    let mut b = rhs.to_vec();
    let mut triplets = Vec::with_capacity(matrix.nnz());
    for i in 0..n {
        if let Some(v) = fixed[i] {
            b[i] = v;
            triplets.push((i, i, 1.0));
            continue;
        }
        for (j, a) in matrix.row(i) {
            match fixed[j] {
                Some(v) => b[i] -= a * v,
                None => triplets.push((i, j, a)),
            }
        }
    }
    (SparseMatrix::from_triplets(n, matrix.symmetry, triplets), b)
}

/// Relative residual `||Ax - b|| / ||b||` (absolute when `b = 0`).
pub fn relative_residual(a: &SparseMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.mul_vec(x);
    let r: f64 = ax.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum::<f64>().sqrt();
    let nb: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}

pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

/// Direct solve with banded LU, followed by up to three steps of iterative
/// refinement if the residual misses [`RESIDUAL_TOLERANCE`].
pub fn solve(a: &SparseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != a.dim {
        return Err(Error::InvalidArgument(format!("rhs length {} does not match matrix dimension {}", b.len(), a.dim)));
    }
    if a.dim == 0 {
        return Ok(Vec::new());
    }
    let lu = BandedLu::factor(a)?;
    let mut x = lu.solve(b);
    let mut res = relative_residual(a, &x, b);
    for _ in 0..3 {
        if res <= RESIDUAL_TOLERANCE {
            break;
        }
        let ax = a.mul_vec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(p, q)| p - q).collect();
        let dx = lu.solve(&r);
        for (xi, d) in x.iter_mut().zip(&dx) {
            *xi += d;
        }
        res = relative_residual(a, &x, b);
    }
    if !res.is_finite() || res > RESIDUAL_TOLERANCE {
        return Err(Error::NotConverged { residual: res });
    }
    Ok(x)
}

/// LU factors in LAPACK-style band storage (`kl` extra rows for pivot fill).
struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Row stride `ldab = 2*kl + ku + 1`; entry (i, j) lives at `j*ldab + kl + ku + i - j`.
    ab: Vec<f64>,
    ipiv: Vec<usize>,
}

impl BandedLu {
    fn factor(a: &SparseMatrix) -> Result<Self> {
        let n = a.dim;
        let (kl, ku) = a.bandwidth();
        let ldab = 2 * kl + ku + 1;
        let kv = kl + ku;
        let mut ab = vec![0.0; ldab * n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                ab[j * ldab + kv + i - j] = v;
            }
        }
        let scale = a.max_abs();
        let mut ipiv = vec![0; n];
        for j in 0..n {
            let last = (j + kl).min(n - 1);
            // pivot search in column j
            let mut p = j;
            let mut best = ab[j * ldab + kv].abs();
            for i in (j + 1)..=last {
                let v = ab[j * ldab + kv + i - j].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > 1e-300_f64.max(scale * 1e-300)) {
                return Err(Error::Singular { column: j });
            }
            ipiv[j] = p;
            let jend = (j + kv).min(n - 1);
            if p != j {
                for c in j..=jend {
                    ab.swap(c * ldab + kv + p - c, c * ldab + kv + j - c);
                }
            }
            let pivot = ab[j * ldab + kv];
            for i in (j + 1)..=last {
                ab[j * ldab + kv + i - j] /= pivot;
            }
            for c in (j + 1)..=jend {
                let ujc = ab[c * ldab + kv + j - c];
                if ujc == 0.0 {
                    continue;
                }
                let col = c * ldab + kv;
                for i in (j + 1)..=last {
                    let lij = ab[j * ldab + kv + i - j];
                    ab[col + i - c] -= lij * ujc;
                }
            }
        }
        Ok(Self { n, kl, ku, ab, ipiv })
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let (n, kl, kv) = (self.n, self.kl, self.kl + self.ku);
        let ldab = 2 * kl + self.ku + 1;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                x.swap(p, j);
            }
            let xj = x[j];
            if xj != 0.0 {
                for i in (j + 1)..=(j + kl).min(n - 1) {
                    x[i] -= self.ab[j * ldab + kv + i - j] * xj;
                }
            }
        }
        for j in (0..n).rev() {
            x[j] /= self.ab[j * ldab + kv];
            let xj = x[j];
            if xj != 0.0 {
                for i in j.saturating_sub(kv)..j {
                    x[i] -= self.ab[j * ldab + kv + i - j] * xj;
                }
            }
        }
        x
    }
}
