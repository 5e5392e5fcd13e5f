//! Dense matrix and third-order tensor containers.
//!
//! Indices are 0-based. Symmetric constructors compute each entry once for
//! its sorted index tuple and copy it to every permutation, so symmetry holds
//! exactly rather than to rounding.

use crate::error::{check_dim, Error, Result};

/// Largest side length for which a dense `d × d × d` tensor is built.
pub const DENSE_TENSOR_LIMIT: usize = 32;

/// A document reduced to three word indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OneHotTriple {
    words: [usize; 3],
    vocab: usize,
}

impl OneHotTriple {
    pub fn new(w1: usize, w2: usize, w3: usize, vocab: usize) -> Result<Self> {
        if vocab == 0 {
            return Err(Error::InvalidInput("vocabulary size must be positive".into()));
        }
        if let Some(&w) = [w1, w2, w3].iter().find(|&&w| w >= vocab) {
            return Err(Error::InvalidInput(format!(
                "word index {w} outside vocabulary of size {vocab}"
            )));
        }
        Ok(OneHotTriple {
            words: [w1, w2, w3],
            vocab,
        })
    }

    pub fn words(&self) -> [usize; 3] {
        self.words
    }

    pub fn vocab(&self) -> usize {
        self.vocab
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Matrix { rows, cols, data }
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let rows = columns.first().map_or(0, Vec::len);
        for c in columns {
            check_dim(rows, c.len())?;
        }
        Ok(Self::from_fn(rows, columns.len(), |i, j| columns[j][i]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Matrix {
        Matrix::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        check_dim(self.cols, other.rows)?;
        let mut out = Matrix::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out.data[i * other.cols + j] += a * other.get(k, j);
                }
            }
        }
        Ok(out)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }
}

/// Symmetric `dim × dim` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        SymMatrix {
            dim,
            entries: vec![0.0; dim * dim],
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_upper_fn(dim, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn diagonal(values: &[f64]) -> Self {
        Self::from_upper_fn(values.len(), |i, j| if i == j { values[i] } else { 0.0 })
    }

    /// Evaluates `f(i, j)` for `i <= j` and mirrors the value.
    pub fn from_upper_fn(dim: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                let v = f(i, j);
                m.entries[i * dim + j] = v;
                m.entries[j * dim + i] = v;
            }
        }
        m
    }

    /// Accepts row-major entries only if they are exactly symmetric.
    pub fn from_row_major(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim, entries.len())?;
        for i in 0..dim {
            for j in (i + 1)..dim {
                if entries[i * dim + j] != entries[j * dim + i] {
                    return Err(Error::InvalidInput(format!(
                        "matrix is not symmetric at ({i}, {j})"
                    )));
                }
            }
        }
        Ok(SymMatrix { dim, entries })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    /// Adds `s` at `(i, j)` and `(j, i)` (once on the diagonal).
    pub fn add_symmetric(&mut self, i: usize, j: usize, s: f64) {
        self.entries[i * self.dim + j] += s;
        if i != j {
            self.entries[j * self.dim + i] += s;
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.get(i, i)).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn matvec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        Ok((0..self.dim)
            .map(|i| {
                let row = &self.entries[i * self.dim..(i + 1) * self.dim];
                row.iter().zip(v).map(|(a, b)| a * b).sum()
            })
            .collect())
    }

    pub fn to_matrix(&self) -> Matrix {
        Matrix {
            rows: self.dim,
            cols: self.dim,
            data: self.entries.clone(),
        }
    }
}

/// Dense third-order tensor with equal side lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct SymTensor3 {
    dim: usize,
    entries: Vec<f64>,
}

/// The six orderings of three slots.
pub(crate) const SLOT_ORDERINGS: [[usize; 3]; 6] = [
    [0, 1, 2],
    [0, 2, 1],
    [1, 0, 2],
    [1, 2, 0],
    [2, 0, 1],
    [2, 1, 0],
];

impl SymTensor3 {
    pub fn zeros(dim: usize) -> Self {
        SymTensor3 {
            dim,
            entries: vec![0.0; dim * dim * dim],
        }
    }

    /// Raw row-major entries; no symmetry is implied.
    pub fn from_entries(dim: usize, entries: Vec<f64>) -> Result<Self> {
        check_dim(dim * dim * dim, entries.len())?;
        Ok(SymTensor3 { dim, entries })
    }

    /// Evaluates `f` once per sorted index tuple `i <= j <= k` and writes the
    /// value to all permutations.
    pub fn from_sorted_fn(dim: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                for k in j..dim {
                    let v = f(i, j, k);
                    t.scatter(i, j, k, v, false);
                }
            }
        }
        t
    }

    /// Materializes `Σ_c w_c · v_c ⊗ v_c ⊗ v_c`.
    pub fn from_rank_k(weights: &[f64], vectors: &[Vec<f64>]) -> Result<Self> {
        check_dim(weights.len(), vectors.len())?;
        let dim = vectors.first().map_or(0, Vec::len);
        for v in vectors {
            check_dim(dim, v.len())?;
        }
        Ok(Self::from_sorted_fn(dim, |i, j, k| {
            weights
                .iter()
                .zip(vectors)
                .map(|(w, v)| w * v[i] * v[j] * v[k])
                .sum()
        }))
    }

    #[inline]
    fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.dim + j) * self.dim + k
    }

    /// Writes (or adds) `v` at every distinct permutation of `(i, j, k)`.
    #[inline]
    pub(crate) fn scatter(&mut self, i: usize, j: usize, k: usize, v: f64, add: bool) {
        let mut seen: [usize; 6] = [usize::MAX; 6];
        let idx = [i, j, k];
        for (n, p) in SLOT_ORDERINGS.iter().enumerate() {
            let pos = self.index(idx[p[0]], idx[p[1]], idx[p[2]]);
            if seen[..n].contains(&pos) {
                continue;
            }
            seen[n] = pos;
            if add {
                self.entries[pos] += v;
            } else {
                self.entries[pos] = v;
            }
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.entries[self.index(i, j, k)]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn sum(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// `T(i,j,k) += s · a(i) b(j) c(k)`.
    pub fn rank1_update(&mut self, a: &[f64], b: &[f64], c: &[f64], s: f64) -> Result<()> {
        for v in [a, b, c] {
            check_dim(self.dim, v.len())?;
        }
        let d = self.dim;
        for i in 0..d {
            let si = s * a[i];
            if si == 0.0 {
                continue;
            }
            for j in 0..d {
                let sij = si * b[j];
                let base = (i * d + j) * d;
                for k in 0..d {
                    self.entries[base + k] += sij * c[k];
                }
            }
        }
        Ok(())
    }

    /// Adds `s · Σ_π x_π(1) ⊗ x_π(2) ⊗ x_π(3)` over all six orderings of
    /// `(a, b, c)`. The increment is exactly symmetric.
    pub fn add_symmetrized(&mut self, a: &[f64], b: &[f64], c: &[f64], s: f64) -> Result<()> {
        for v in [a, b, c] {
            check_dim(self.dim, v.len())?;
        }
        let d = self.dim;
        let slots = [a, b, c];
        for i in 0..d {
            for j in i..d {
                for k in j..d {
                    let v: f64 = SLOT_ORDERINGS
                        .iter()
                        .map(|p| slots[p[0]][i] * slots[p[1]][j] * slots[p[2]][k])
                        .sum();
                    if v != 0.0 {
                        self.scatter(i, j, k, s * v, true);
                    }
                }
            }
        }
        Ok(())
    }

    /// `out(i) = Σ_{j,k} T(i,j,k) v(j) v(k)`.
    pub fn contract_to_vector(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.dim, v.len())?;
        let d = self.dim;
        Ok((0..d)
            .map(|i| {
                let mut acc = 0.0;
                for j in 0..d {
                    let base = (i * d + j) * d;
                    let inner: f64 = self.entries[base..base + d]
                        .iter()
                        .zip(v)
                        .map(|(t, vk)| t * vk)
                        .sum();
                    acc += v[j] * inner;
                }
                acc
            })
            .collect())
    }

    /// `Σ T(i,j,k) v(i) v(j) v(k)`.
    pub fn contract_to_scalar(&self, v: &[f64]) -> Result<f64> {
        let tv = self.contract_to_vector(v)?;
        Ok(tv.iter().zip(v).map(|(a, b)| a * b).sum())
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn frobenius_distance(&self, other: &SymTensor3) -> Result<f64> {
        check_dim(self.dim, other.dim)?;
        Ok(self
            .entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt())
    }

    /// Exact (bitwise) invariance under all index permutations.
    pub fn is_symmetric(&self) -> bool {
        let d = self.dim;
        (0..d).all(|i| {
            (0..d).all(|j| {
                (0..d).all(|k| {
                    let v = self.get(i, j, k);
                    v == self.get(i, k, j)
                        && v == self.get(j, i, k)
                        && v == self.get(j, k, i)
                        && v == self.get(k, i, j)
                        && v == self.get(k, j, i)
                })
            })
        })
    }
}
