use itertools::Itertools;

use crate::error::{check_dim, Error, Result};
use crate::tensor::Matrix;

/// Tolerance for simplex sums.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Topic prior `ω` and word-given-topic matrix `U` (`d × K`, one column per
/// topic).
#[derive(Debug, Clone, PartialEq)]
pub struct TopicParams {
    omega: Vec<f64>,
    topics: Matrix,
}

fn check_simplex(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().any(|&x| !(x >= 0.0) || !x.is_finite()) {
        return Err(Error::InvalidInput(format!("{what} has negative or non-finite entries")));
    }
    let s: f64 = v.iter().sum();
    if (s - 1.0).abs() > SIMPLEX_TOL {
        return Err(Error::InvalidInput(format!("{what} sums to {s}, not 1")));
    }
    Ok(())
}

impl TopicParams {
    pub fn new(omega: Vec<f64>, topics: Matrix) -> Result<Self> {
        check_dim(omega.len(), topics.cols())?;
        if omega.is_empty() || topics.rows() == 0 {
            return Err(Error::InvalidInput("need at least one topic and one word".into()));
        }
        check_simplex("topic prior", &omega)?;
        for c in 0..topics.cols() {
            check_simplex(&format!("topic {c}"), &topics.column(c))?;
        }
        Ok(TopicParams { omega, topics })
    }

    pub fn from_columns(omega: Vec<f64>, columns: &[Vec<f64>]) -> Result<Self> {
        Self::new(omega, Matrix::from_columns(columns)?)
    }

    /// Uniform prior over `k` topics, each uniform over `d` words.
    pub fn uniform(d: usize, k: usize) -> Self {
        TopicParams {
            omega: vec![1.0 / k as f64; k],
            topics: Matrix::from_fn(d, k, |_, _| 1.0 / d as f64),
        }
    }

    /// The synthetic family where topic `j` emits word `j` with probability
    /// `p` and every other word with `(1 − p)/(d − 1)`.
    pub fn concentrated(prior: Vec<f64>, d: usize, p: f64) -> Result<Self> {
        let k = prior.len();
        if k > d {
            return Err(Error::InvalidInput(format!("{k} topics need at least {k} words")));
        }
        if d < 2 || !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidInput(format!("need d >= 2 and p in (0, 1], got d={d}, p={p}")));
        }
        let off = (1.0 - p) / (d - 1) as f64;
        Self::new(prior, Matrix::from_fn(d, k, |i, j| if i == j { p } else { off }))
    }

    pub fn k(&self) -> usize {
        self.omega.len()
    }

    pub fn vocab(&self) -> usize {
        self.topics.rows()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn topics(&self) -> &Matrix {
        &self.topics
    }

    pub fn topic(&self, c: usize) -> Vec<f64> {
        self.topics.column(c)
    }

    pub fn topic_vectors(&self) -> Vec<Vec<f64>> {
        (0..self.k()).map(|c| self.topic(c)).collect()
    }

    #[inline]
    pub fn word_prob(&self, word: usize, topic: usize) -> f64 {
        self.topics.get(word, topic)
    }

    /// Same model with topics reordered by descending prior (stable).
    pub fn sorted_by_weight(&self) -> Self {
        let order: Vec<usize> = (0..self.k())
            .sorted_by(|&a, &b| self.omega[b].total_cmp(&self.omega[a]))
            .collect();
        self.permuted(&order)
    }

    /// Topic `i` of the result is topic `order[i]` of `self`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        TopicParams {
            omega: order.iter().map(|&c| self.omega[c]).collect(),
            topics: Matrix::from_fn(self.vocab(), order.len(), |i, j| self.topics.get(i, order[j])),
        }
    }

    /// Additive smoothing: `(x + δ) / (1 + nδ)` on every simplex.
    pub fn smoothed(&self, delta: f64) -> Self {
        let k = self.k() as f64;
        let d = self.vocab() as f64;
        TopicParams {
            omega: self.omega.iter().map(|w| (w + delta) / (1.0 + k * delta)).collect(),
            topics: Matrix::from_fn(self.vocab(), self.k(), |i, j| {
                (self.topics.get(i, j) + delta) / (1.0 + d * delta)
            }),
        }
    }

    /// `Σ_c ω_c Π_l u_c(w_l)`.
    pub fn likelihood(&self, words: &[usize]) -> f64 {
        (0..self.k())
            .map(|c| self.omega[c] * words.iter().map(|&w| self.word_prob(w, c)).product::<f64>())
            .sum()
    }

    /// Largest absolute entry difference between `self` and `other` after
    /// matching topics by the permutation minimising total column L1
    /// distance.
    pub fn max_abs_diff_matched(&self, other: &TopicParams) -> Result<f64> {
        let perm = best_permutation(self, other)?;
        let o = other.permuted(&perm);
        let mut worst = 0.0f64;
        for c in 0..self.k() {
            worst = worst.max((self.omega[c] - o.omega[c]).abs());
            for i in 0..self.vocab() {
                worst = worst.max((self.word_prob(i, c) - o.word_prob(i, c)).abs());
            }
        }
        Ok(worst)
    }
}

/// Permutation `perm` such that topic `i` of `a` matches topic `perm[i]` of
/// `b`, minimising the summed column L1 distance. Exhaustive over all
/// `K!` assignments, which is exact and cheap for the topic counts used here.
pub fn best_permutation(a: &TopicParams, b: &TopicParams) -> Result<Vec<usize>> {
    check_dim(a.k(), b.k())?;
    check_dim(a.vocab(), b.vocab())?;
    let k = a.k();
    if k > 9 {
        return Err(Error::InvalidInput(format!("exhaustive matching limited to 9 topics, got {k}")));
    }
    let cost = Matrix::from_fn(k, k, |i, j| {
        (0..a.vocab()).map(|w| (a.word_prob(w, i) - b.word_prob(w, j)).abs()).sum()
    });
    let best = (0..k)
        .permutations(k)
        .map(|p| {
            let c: f64 = p.iter().enumerate().map(|(i, &j)| cost.get(i, j)).sum();
            (c, p)
        })
        .min_by(|x, y| x.0.total_cmp(&y.0))
        .map(|(_, p)| p)
        .unwrap_or_default();
    Ok(best)
}
