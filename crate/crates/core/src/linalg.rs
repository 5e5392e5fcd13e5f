//! Symmetric eigendecomposition (cyclic Jacobi) and whitening.

use crate::error::{check_dim, Error, Result};
use crate::tensor::{Matrix, SymMatrix};

/// Off-diagonal convergence threshold, relative to `‖M‖_F`.
pub const DEFAULT_EIG_TOL: f64 = 1e-12;
/// Sweep cap for the Jacobi iteration.
pub const MAX_SWEEPS: usize = 100;
/// Eigenvalues at or below `RANK_EPS_REL · λ_max` count as zero.
pub const RANK_EPS_REL: f64 = 1e-9;

/// Eigenvalues in descending order with matching orthonormal eigenvectors.
///
/// Each eigenvector is signed so that its largest-magnitude entry is positive
/// (the first such entry on ties).
#[derive(Debug, Clone)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    /// Column `i` is the eigenvector for `values[i]`.
    pub vectors: Matrix,
}

impl EigenDecomp {
    pub fn vector(&self, i: usize) -> Vec<f64> {
        self.vectors.column(i)
    }
}

/// Cyclic Jacobi eigensolver.
///
/// Converges when the off-diagonal Frobenius mass drops to
/// `tol · max(‖M‖_F, MIN_POSITIVE)`; fails with [`Error::NoConvergence`] after
/// [`MAX_SWEEPS`] sweeps.
pub fn sym_eig(m: &SymMatrix, tol: f64) -> Result<EigenDecomp> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("eigensolver tolerance must be positive, got {tol}")));
    }
    let n = m.dim();
    let mut a = m.as_slice().to_vec();
    // Rows of `vt` are the eigenvectors, so rotations touch contiguous memory.
    let mut vt = Matrix::identity(n).as_slice().to_vec();
    let scale = m.frobenius_norm().max(f64::MIN_POSITIVE);
    let threshold = tol * scale;

    let off_mass = |a: &[f64]| -> f64 {
        let mut s = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                s += a[i * n + j] * a[i * n + j];
            }
        }
        (2.0 * s).sqrt()
    };

    let mut converged = false;
    for sweep in 0..MAX_SWEEPS {
        let off = off_mass(&a);
        if off <= threshold {
            converged = true;
            break;
        }
        // Early sweeps leave entries well below the average off-diagonal
        // magnitude for later.
        let skip_below = if sweep < 3 { 0.2 * off / (n * n) as f64 } else { 0.0 };
        for p in 0..n {
            for q in (p + 1)..n {
                // Column p is written back once per round; row p holds its
                // current values meanwhile.
                a[q * n + p] = a[p * n + q];
                if rotate_pair(&mut a, &mut vt, n, p, q, sweep, skip_below) {
                    for k in 0..n {
                        a[k * n + q] = a[q * n + k];
                    }
                }
            }
            for k in 0..n {
                a[k * n + p] = a[p * n + k];
            }
        }
    }
    if !converged {
        let residual = off_mass(&a);
        if residual > threshold {
            return Err(Error::NoConvergence {
                sweeps: MAX_SWEEPS,
                residual,
            });
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (col, &src) in order.iter().enumerate() {
        let row = &vt[src * n..(src + 1) * n];
        let pivot = row
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |best, (i, &x)| if x.abs() > best.1 { (i, x.abs()) } else { best })
            .0;
        let sign = if row[pivot] < 0.0 { -1.0 } else { 1.0 };
        for (i, &x) in row.iter().enumerate() {
            vectors.set(i, col, sign * x);
        }
    }
    Ok(EigenDecomp { values, vectors })
}

/// One Jacobi rotation zeroing `a[p][q]`, applied to rows `p, q` of `a` and
/// of the eigenvector rows `vt`. Columns are left to the caller. Returns
/// whether rows were rotated.
#[inline]
fn rotate_pair(a: &mut [f64], vt: &mut [f64], n: usize, p: usize, q: usize, sweep: usize, skip_below: f64) -> bool {
    let apq = a[p * n + q];
    if apq == 0.0 || apq.abs() < skip_below {
        return false;
    }
    let app = a[p * n + p];
    let aqq = a[q * n + q];
    let g = 100.0 * apq.abs();
    if sweep > 3 && app.abs() + g == app.abs() && aqq.abs() + g == aqq.abs() {
        a[p * n + q] = 0.0;
        a[q * n + p] = 0.0;
        return false;
    }
    let theta = (aqq - app) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let t = if theta == 0.0 { 1.0 } else { t };
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;
    rotate_rows(a, n, p, q, c, s);
    a[p * n + p] = app - t * apq;
    a[q * n + q] = aqq + t * apq;
    a[p * n + q] = 0.0;
    a[q * n + p] = 0.0;
    rotate_rows(vt, n, p, q, c, s);
    true
}

/// Rows `p, q` ← `(c·r_p − s·r_q, s·r_p + c·r_q)`.
#[inline]
fn rotate_rows(m: &mut [f64], n: usize, p: usize, q: usize, c: f64, s: f64) {
    let (head, tail) = m.split_at_mut(q * n);
    let rp = &mut head[p * n..(p + 1) * n];
    let rq = &mut tail[..n];
    for (x, y) in rp.iter_mut().zip(rq.iter_mut()) {
        let (xp, yq) = (*x, *y);
        *x = c * xp - s * yq;
        *y = s * xp + c * yq;
    }
}

/// Whitening map built from the top-K eigenpairs of a second moment.
///
/// `W = U·A^{-1/2}`, stored `d × K` so that `Wᵀe_w` is row `w` of `W`.
#[derive(Debug, Clone)]
pub struct Whitener {
    w: Matrix,
    u: Matrix,
    a: Vec<f64>,
}

impl Whitener {
    /// Assembles a whitener from eigenvectors (columns of `u`) and positive
    /// eigenvalues `a`.
    pub fn from_parts(u: Matrix, a: Vec<f64>) -> Result<Self> {
        check_dim(u.cols(), a.len())?;
        if let Some(bad) = a.iter().find(|&&x| !(x > 0.0)) {
            return Err(Error::InvalidInput(format!("whitening eigenvalue {bad} is not positive")));
        }
        let w = Matrix::from_fn(u.rows(), u.cols(), |i, k| u.get(i, k) / a[k].sqrt());
        Ok(Whitener { w, u, a })
    }

    pub fn vocab(&self) -> usize {
        self.w.rows()
    }

    pub fn rank(&self) -> usize {
        self.w.cols()
    }

    pub fn w(&self) -> &Matrix {
        &self.w
    }

    pub fn eigenvectors(&self) -> &Matrix {
        &self.u
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.a
    }

    /// `Wᵀe_w` as a column lookup.
    #[inline]
    pub fn whitened_word(&self, word: usize) -> &[f64] {
        self.w.row(word)
    }

    /// `Wᵀx` for a dense `x`.
    pub fn whiten(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_dim(self.vocab(), x.len())?;
        let mut out = vec![0.0; self.rank()];
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                for (o, wik) in out.iter_mut().zip(self.w.row(i)) {
                    *o += xi * wik;
                }
            }
        }
        Ok(out)
    }

    /// `λ·(Wᵀ)⁺·v`, where `(Wᵀ)⁺ = U·A^{1/2}` because `U` has orthonormal
    /// columns.
    pub fn unwhiten(&self, v: &[f64], lambda: f64) -> Result<Vec<f64>> {
        check_dim(self.rank(), v.len())?;
        let scaled: Vec<f64> = v.iter().zip(&self.a).map(|(vk, ak)| lambda * vk * ak.sqrt()).collect();
        Ok((0..self.vocab())
            .map(|i| self.u.row(i).iter().zip(&scaled).map(|(u, s)| u * s).sum())
            .collect())
    }

    /// The `d × K` matrix `(Wᵀ)⁺ = U·A^{1/2}`.
    pub fn pseudo_inverse_t(&self) -> Matrix {
        Matrix::from_fn(self.vocab(), self.rank(), |i, k| self.u.get(i, k) * self.a[k].sqrt())
    }
}

/// Builds `W` from the top-`k` eigenpairs of `m2` whose eigenvalues exceed
/// `eps_rank` (default `RANK_EPS_REL · λ_max`).
///
/// Fails with [`Error::RankDeficient`] carrying the usable rank when fewer
/// than `k` eigenvalues qualify.
pub fn build_whitener(m2: &SymMatrix, k: usize, eps_rank: Option<f64>) -> Result<Whitener> {
    let eig = sym_eig(m2, DEFAULT_EIG_TOL)?;
    whitener_from_eig(&eig, k, eps_rank)
}

pub fn whitener_from_eig(eig: &EigenDecomp, k: usize, eps_rank: Option<f64>) -> Result<Whitener> {
    if k == 0 {
        return Err(Error::InvalidInput("whitening rank must be at least 1".into()));
    }
    let top = eig.values.first().copied().unwrap_or(0.0);
    let eps = eps_rank.unwrap_or(RANK_EPS_REL * top.max(0.0));
    let usable = eig.values.iter().take_while(|&&v| v > eps && v > 0.0).count();
    if usable < k {
        return Err(Error::RankDeficient {
            requested: k,
            usable,
        });
    }
    let d = eig.vectors.rows();
    let u = Matrix::from_fn(d, k, |i, j| eig.vectors.get(i, j));
    Whitener::from_parts(u, eig.values[..k].to_vec())
}
