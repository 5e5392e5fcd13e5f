//! Reservoir sampling and construction of empirical and exact moments.

use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::error::{check_dim, Error, Result};
use crate::exec::Execution;
use crate::linalg::Whitener;
use crate::spectral::TopicParams;
use crate::tensor::{OneHotTriple, SymMatrix, SymTensor3, DENSE_TENSOR_LIMIT, SLOT_ORDERINGS};

/// Portable seeded generator used throughout: xoshiro256++ with its state
/// expanded from a `u64` seed by SplitMix64.
pub type StreamRng = Xoshiro256PlusPlus;

pub fn seeded_rng(seed: u64) -> StreamRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

const CHUNK: usize = 512;

/// What happened to the reservoir on an update.
#[derive(Debug, Clone, PartialEq)]
pub enum ReservoirEvent<T> {
    Appended,
    Replaced { evicted: T },
    Rejected,
}

/// Fixed-capacity sample of a stream.
///
/// The `t`-th element (1-based) is appended while `t <= m`; afterwards it
/// replaces a uniformly chosen held element when a uniform draw
/// `a ∈ [0, 1)` satisfies `a <= m/(t − 1)`. This acceptance probability
/// makes the final inclusion probability after `n` elements `(m − 1)/(n − 1)`
/// for the first `m` elements and `m/(n − 1)` for the rest.
#[derive(Debug, Clone)]
pub struct Reservoir<T> {
    capacity: usize,
    items: Vec<T>,
    seen: u64,
    rng: StreamRng,
}

impl<T: Clone> Reservoir<T> {
    pub fn new(capacity: usize, seed: u64) -> Result<Self> {
        if capacity == 0 {
            return Err(Error::InvalidInput("reservoir capacity must be positive".into()));
        }
        Ok(Reservoir {
            capacity,
            items: Vec::with_capacity(capacity.min(1 << 16)),
            seen: 0,
            rng: seeded_rng(seed),
        })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn seen(&self) -> u64 {
        self.seen
    }

    pub fn items(&self) -> &[T] {
        &self.items
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn update(&mut self, x: T) -> ReservoirEvent<T> {
        self.seen += 1;
        let t = self.seen;
        let m = self.capacity as u64;
        let a: f64 = self.rng.random();
        if t <= m {
            self.items.push(x);
            return ReservoirEvent::Appended;
        }
        if a <= m as f64 / (t - 1) as f64 {
            let slot = self.rng.random_range(0..self.items.len());
            let evicted = std::mem::replace(&mut self.items[slot], x);
            ReservoirEvent::Replaced { evicted }
        } else {
            ReservoirEvent::Rejected
        }
    }
}

/// Ordered word pairs `(w_a, w_b)`, `a != b`, of a triple.
#[inline]
fn ordered_pairs(x: &OneHotTriple) -> [(usize, usize); 6] {
    let [a, b, c] = x.words();
    [(a, b), (b, a), (a, c), (c, a), (b, c), (c, b)]
}

/// Integer pair counts behind the empirical second moment. Supports removal
/// so the moment can be maintained incrementally as the reservoir changes.
#[derive(Debug, Clone, PartialEq)]
pub struct PairCounts {
    dim: usize,
    counts: Vec<u64>,
    samples: u64,
}

impl PairCounts {
    pub fn new(dim: usize) -> Self {
        PairCounts {
            dim,
            counts: vec![0; dim * dim],
            samples: 0,
        }
    }

    pub fn from_samples(samples: &[OneHotTriple], dim: usize, exec: Execution) -> Result<Self> {
        for x in samples {
            check_dim(dim, x.vocab())?;
        }
        let partials = exec.map_chunks(samples, CHUNK * 8, |chunk| {
            let mut pc = PairCounts::new(dim);
            for x in chunk {
                pc.add_unchecked(x);
            }
            pc
        });
        let mut total = PairCounts::new(dim);
        for p in partials {
            for (t, c) in total.counts.iter_mut().zip(&p.counts) {
                *t += c;
            }
            total.samples += p.samples;
        }
        Ok(total)
    }

    fn add_unchecked(&mut self, x: &OneHotTriple) {
        for (i, j) in ordered_pairs(x) {
            self.counts[i * self.dim + j] += 1;
        }
        self.samples += 1;
    }

    pub fn add(&mut self, x: &OneHotTriple) -> Result<()> {
        check_dim(self.dim, x.vocab())?;
        self.add_unchecked(x);
        Ok(())
    }

    /// Removes a previously added triple.
    pub fn remove(&mut self, x: &OneHotTriple) -> Result<()> {
        check_dim(self.dim, x.vocab())?;
        let pairs = ordered_pairs(x);
        for &(i, j) in &pairs {
            let n = pairs.iter().filter(|&&p| p == (i, j)).count() as u64;
            if self.counts[i * self.dim + j] < n || self.samples == 0 {
                return Err(Error::InvalidInput("removing a triple that was never added".into()));
            }
        }
        for (i, j) in pairs {
            self.counts[i * self.dim + j] -= 1;
        }
        self.samples -= 1;
        Ok(())
    }

    pub fn samples(&self) -> u64 {
        self.samples
    }

    /// Normalised second moment; exactly symmetric because `(i, j)` and
    /// `(j, i)` always receive the same integer count.
    pub fn to_moment(&self) -> Result<SymMatrix> {
        if self.samples == 0 {
            return Err(Error::EmptySamples);
        }
        let scale = 1.0 / (6.0 * self.samples as f64);
        SymMatrix::from_row_major(self.dim, self.counts.iter().map(|&c| c as f64 * scale).collect())
    }
}

/// `M₂ = (1/(6|S|)) Σ_S Σ_{a≠b} e_{w_a} ⊗ e_{w_b}`.
pub fn empirical_m2(samples: &[OneHotTriple], d: usize) -> Result<SymMatrix> {
    empirical_m2_with(samples, d, Execution::default())
}

pub fn empirical_m2_with(samples: &[OneHotTriple], d: usize, exec: Execution) -> Result<SymMatrix> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    PairCounts::from_samples(samples, d, exec)?.to_moment()
}

/// Sorted index tuples `i <= j <= k` of a `K × K × K` tensor.
fn sorted_indices(k: usize) -> Vec<[usize; 3]> {
    let mut out = Vec::new();
    for i in 0..k {
        for j in i..k {
            for l in j..k {
                out.push([i, j, l]);
            }
        }
    }
    out
}

/// Adds `weight · Σ_π r_π(1)(i) r_π(2)(j) r_π(3)(l)` for every sorted index.
#[inline]
fn accumulate_whitened(acc: &mut [f64], idx: &[[usize; 3]], rows: [&[f64]; 3], weight: f64) {
    for (slot, &[i, j, l]) in acc.iter_mut().zip(idx) {
        let mut s = 0.0;
        for p in SLOT_ORDERINGS {
            s += rows[p[0]][i] * rows[p[1]][j] * rows[p[2]][l];
        }
        *slot += weight * s;
    }
}

fn scatter_sorted(k: usize, idx: &[[usize; 3]], acc: &[f64]) -> SymTensor3 {
    let mut t = SymTensor3::zeros(k);
    for (&[i, j, l], &v) in idx.iter().zip(acc) {
        t.scatter(i, j, l, v, false);
    }
    t
}

/// `T = (1/(6|S|)) Σ_S Σ_π Wᵀe_{w_π(1)} ⊗ Wᵀe_{w_π(2)} ⊗ Wᵀe_{w_π(3)}`.
pub fn empirical_whitened_t3(samples: &[OneHotTriple], wh: &Whitener) -> Result<SymTensor3> {
    empirical_whitened_t3_with(samples, wh, Execution::default())
}

pub fn empirical_whitened_t3_with(
    samples: &[OneHotTriple],
    wh: &Whitener,
    exec: Execution,
) -> Result<SymTensor3> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    for x in samples {
        check_dim(wh.vocab(), x.vocab())?;
    }
    let k = wh.rank();
    let idx = sorted_indices(k);
    let partials = exec.map_chunks(samples, CHUNK, |chunk| {
        let mut acc = vec![0.0; idx.len()];
        for x in chunk {
            let [a, b, c] = x.words();
            let rows = [wh.whitened_word(a), wh.whitened_word(b), wh.whitened_word(c)];
            accumulate_whitened(&mut acc, &idx, rows, 1.0);
        }
        acc
    });
    let mut acc = vec![0.0; idx.len()];
    for p in partials {
        for (a, v) in acc.iter_mut().zip(p) {
            *a += v;
        }
    }
    let scale = 1.0 / (6.0 * samples.len() as f64);
    acc.iter_mut().for_each(|v| *v *= scale);
    Ok(scatter_sorted(k, &idx, &acc))
}

/// Whitened third moment of a weighted triple distribution:
/// `Σ_x p(x) · (1/6) Σ_π Wᵀe_{x_π(1)} ⊗ …`.
pub fn weighted_whitened_t3(samples: &[(OneHotTriple, f64)], wh: &Whitener) -> Result<SymTensor3> {
    if samples.is_empty() {
        return Err(Error::EmptySamples);
    }
    let k = wh.rank();
    let idx = sorted_indices(k);
    let mut acc = vec![0.0; idx.len()];
    for (x, p) in samples {
        check_dim(wh.vocab(), x.vocab())?;
        let [a, b, c] = x.words();
        let rows = [wh.whitened_word(a), wh.whitened_word(b), wh.whitened_word(c)];
        accumulate_whitened(&mut acc, &idx, rows, p / 6.0);
    }
    Ok(scatter_sorted(k, &idx, &acc))
}

/// Per-step topic prior.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorSchedule {
    /// The same prior at every step.
    Stationary(Vec<f64>),
    /// Repeating batches: `counts[c]` consecutive documents from topic `c`,
    /// in topic order.
    Cyclic(Vec<usize>),
}

impl PriorSchedule {
    pub fn topics(&self) -> usize {
        match self {
            PriorSchedule::Stationary(p) => p.len(),
            PriorSchedule::Cyclic(c) => c.len(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            PriorSchedule::Stationary(p) => {
                let s: f64 = p.iter().sum();
                if p.is_empty() || p.iter().any(|&x| !(x >= 0.0)) || (s - 1.0).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!("prior {p:?} is not on the simplex")));
                }
            }
            PriorSchedule::Cyclic(c) => {
                if c.is_empty() || c.iter().sum::<usize>() == 0 {
                    return Err(Error::InvalidInput("schedule must contain at least one document".into()));
                }
            }
        }
        Ok(())
    }

    /// Topic forced at 0-based step `t` by a cyclic schedule.
    pub fn scheduled_topic(counts: &[usize], t: usize) -> usize {
        let period: usize = counts.iter().sum();
        let mut r = t % period;
        for (c, &n) in counts.iter().enumerate() {
            if r < n {
                return c;
            }
            r -= n;
        }
        unreachable!("offset is below the schedule period")
    }

    /// Prior at 0-based step `t`.
    pub fn prior_at(&self, t: usize) -> Vec<f64> {
        match self {
            PriorSchedule::Stationary(p) => p.clone(),
            PriorSchedule::Cyclic(counts) => {
                let mut p = vec![0.0; counts.len()];
                p[Self::scheduled_topic(counts, t)] = 1.0;
                p
            }
        }
    }

    /// Mean prior over 0-based `steps`.
    pub fn average(&self, steps: Range<usize>) -> Result<Vec<f64>> {
        if steps.is_empty() {
            return Err(Error::InvalidInput("cannot average over an empty step range".into()));
        }
        match self {
            PriorSchedule::Stationary(p) => Ok(p.clone()),
            PriorSchedule::Cyclic(counts) => {
                let n = steps.len();
                let period: usize = counts.iter().sum();
                let mut hits = vec![0usize; counts.len()];
                let full = n / period;
                for (h, &c) in hits.iter_mut().zip(counts) {
                    *h = full * c;
                }
                for t in (steps.start + full * period)..steps.end {
                    hits[Self::scheduled_topic(counts, t)] += 1;
                }
                Ok(hits.iter().map(|&h| h as f64 / n as f64).collect())
            }
        }
    }
}

/// A known generating model: fixed topics with a per-step prior.
#[derive(Debug, Clone)]
pub struct ExactModel {
    pub params: TopicParams,
    pub schedule: PriorSchedule,
}

impl ExactModel {
    pub fn new(params: TopicParams, schedule: PriorSchedule) -> Result<Self> {
        check_dim(params.k(), schedule.topics())?;
        schedule.validate()?;
        Ok(ExactModel { params, schedule })
    }

    /// Stationary model using the prior stored in `params`.
    pub fn stationary(params: TopicParams) -> Self {
        let schedule = PriorSchedule::Stationary(params.omega().to_vec());
        ExactModel { params, schedule }
    }

    /// Topics with the prior averaged over `steps`; its rank-K tensor is the
    /// step-averaged word-triple distribution.
    pub fn averaged_params(&self, steps: Range<usize>) -> Result<TopicParams> {
        let omega = self.schedule.average(steps)?;
        TopicParams::new(omega, self.params.topics().clone())
    }

    /// `M̄₂ = Σ_c ω̄_c u_c u_cᵀ`.
    pub fn exact_m2(&self, steps: Range<usize>) -> Result<SymMatrix> {
        let avg = self.averaged_params(steps)?;
        Ok(rank_k_m2(&avg))
    }

    /// `M̄₃ = Σ_c ω̄_c u_c⊗u_c⊗u_c`, dense; refused above the dense limit.
    pub fn exact_m3(&self, steps: Range<usize>) -> Result<SymTensor3> {
        let d = self.params.vocab();
        if d > DENSE_TENSOR_LIMIT {
            return Err(Error::DenseGuard {
                dim: d,
                limit: DENSE_TENSOR_LIMIT,
            });
        }
        let avg = self.averaged_params(steps)?;
        SymTensor3::from_rank_k(avg.omega(), &avg.topic_vectors())
    }
}

/// `Σ_c ω_c u_c u_cᵀ`.
pub fn rank_k_m2(params: &TopicParams) -> SymMatrix {
    SymMatrix::from_upper_fn(params.vocab(), |i, j| {
        (0..params.k())
            .map(|c| params.omega()[c] * params.word_prob(i, c) * params.word_prob(j, c))
            .sum()
    })
}

/// `Σ_c ω_c (Wᵀu_c)^{⊗3}` without forming the `d³` tensor.
pub fn whitened_rank_k_t3(params: &TopicParams, wh: &Whitener) -> Result<SymTensor3> {
    let whitened: Vec<Vec<f64>> = params
        .topic_vectors()
        .iter()
        .map(|u| wh.whiten(u))
        .collect::<Result<_>>()?;
    SymTensor3::from_rank_k(params.omega(), &whitened)
}
