//! Stepwise EM for the single-topic mixture of multinomials.

use rand_distr::{Distribution, Exp1};

use crate::error::{check_dim, Error, Result};
use crate::learner::{OnlineLearner, StepDiagnostics};
use crate::moments::seeded_rng;
use crate::spectral::TopicParams;
use crate::tensor::{Matrix, OneHotTriple};

/// Additive smoothing applied when statistics are turned into parameters.
pub const EM_SMOOTHING: f64 = 1e-8;

/// Posterior `q(c) ∝ ω_c Π_l u_c(w_l)` over topics. Uniform when every topic
/// assigns the document zero probability.
pub fn posterior(params: &TopicParams, x: &OneHotTriple) -> Vec<f64> {
    let words = x.words();
    let k = params.k();
    let mass: Vec<f64> = (0..k)
        .map(|c| params.omega()[c] * words.iter().map(|&w| params.word_prob(w, c)).product::<f64>())
        .collect();
    let total: f64 = mass.iter().sum();
    if !(total > 0.0) || !total.is_finite() {
        return vec![1.0 / k as f64; k];
    }
    mass.into_iter().map(|m| m / total).collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmConfig {
    pub topics: usize,
    /// Step-size reduction power, in `[0.5, 1]`.
    pub alpha: f64,
    /// Documents per update.
    pub minibatch: usize,
    pub seed: u64,
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.5..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidInput(format!("alpha must lie in [0.5, 1], got {}", self.alpha)));
        }
        if self.topics == 0 || self.minibatch == 0 {
            return Err(Error::InvalidInput("topics and minibatch must be positive".into()));
        }
        Ok(())
    }
}

/// Stepwise EM state. Statistics are kept on probability scale: `s_omega`
/// sums to one and column `c` of `s_u` sums to `s_omega[c]`.
#[derive(Debug, Clone, PartialEq)]
pub struct StepwiseEm {
    config: EmConfig,
    s_omega: Vec<f64>,
    s_u: Matrix,
    updates: u64,
    pending: Vec<OneHotTriple>,
}

impl StepwiseEm {
    /// Uniform topic statistics with each topic's word statistics drawn from
    /// a symmetric Dirichlet(1).
    pub fn new(vocab: usize, config: EmConfig) -> Result<Self> {
        config.validate()?;
        if vocab == 0 {
            return Err(Error::InvalidInput("empty vocabulary".into()));
        }
        let k = config.topics;
        let mut rng = seeded_rng(config.seed);
        let mut columns = Vec::with_capacity(k);
        for _ in 0..k {
            let raw: Vec<f64> = (0..vocab).map(|_| Exp1.sample(&mut rng)).collect();
            let s: f64 = raw.iter().sum();
            columns.push(raw.into_iter().map(|x| x / (s * k as f64)).collect::<Vec<f64>>());
        }
        Ok(StepwiseEm {
            config,
            s_omega: vec![1.0 / k as f64; k],
            s_u: Matrix::from_columns(&columns)?,
            updates: 0,
            pending: Vec::with_capacity(config.minibatch),
        })
    }

    pub fn config(&self) -> &EmConfig {
        &self.config
    }

    pub fn vocab(&self) -> usize {
        self.s_u.rows()
    }

    /// Completed mini-batch updates.
    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn pending(&self) -> &[OneHotTriple] {
        &self.pending
    }

    pub fn stats(&self) -> (&[f64], &Matrix) {
        (&self.s_omega, &self.s_u)
    }

    /// `η_k = (k + 2)^{−α}` for the next update.
    pub fn step_size(&self) -> f64 {
        (self.updates as f64 + 2.0).powf(-self.config.alpha)
    }

    /// Current statistics normalised with additive smoothing.
    pub fn params(&self) -> TopicParams {
        let d = self.vocab();
        let k = self.config.topics;
        let delta = EM_SMOOTHING;
        let total: f64 = self.s_omega.iter().sum();
        let omega = self.s_omega.iter().map(|s| (s + delta) / (total + k as f64 * delta)).collect();
        let col_sums: Vec<f64> = (0..k).map(|c| (0..d).map(|w| self.s_u.get(w, c)).sum()).collect();
        let topics = Matrix::from_fn(d, k, |w, c| (self.s_u.get(w, c) + delta) / (col_sums[c] + d as f64 * delta));
        TopicParams::new(omega, topics).expect("smoothed statistics lie on the simplex")
    }

    /// Expected statistics of a batch under `params`, on probability scale.
    pub fn batch_statistics(params: &TopicParams, batch: &[OneHotTriple]) -> (Vec<f64>, Matrix) {
        let k = params.k();
        let mut s_omega = vec![0.0; k];
        let mut s_u = Matrix::zeros(params.vocab(), k);
        let scale = 1.0 / batch.len() as f64;
        for x in batch {
            let q = posterior(params, x);
            for c in 0..k {
                s_omega[c] += q[c] * scale;
                for w in x.words() {
                    s_u.set(w, c, s_u.get(w, c) + q[c] * scale / 3.0);
                }
            }
        }
        (s_omega, s_u)
    }

    /// Buffers `x`; on a full mini-batch blends in its expected statistics.
    pub fn observe(&mut self, x: &OneHotTriple) -> Result<()> {
        check_dim(self.vocab(), x.vocab())?;
        self.pending.push(*x);
        if self.pending.len() < self.config.minibatch {
            return Ok(());
        }
        let (b_omega, b_u) = Self::batch_statistics(&self.params(), &self.pending);
        let eta = self.step_size();
        for (s, b) in self.s_omega.iter_mut().zip(&b_omega) {
            *s = (1.0 - eta) * *s + eta * b;
        }
        self.s_u = Matrix::from_fn(self.vocab(), self.config.topics, |w, c| {
            (1.0 - eta) * self.s_u.get(w, c) + eta * b_u.get(w, c)
        });
        self.updates += 1;
        self.pending.clear();
        Ok(())
    }
}

impl OnlineLearner for StepwiseEm {
    fn step(&mut self, x: &OneHotTriple) -> Result<(TopicParams, StepDiagnostics)> {
        check_dim(self.vocab(), x.vocab())?;
        let params = self.params();
        self.observe(x)?;
        Ok((params, StepDiagnostics::default()))
    }
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn cfg(topics: usize, alpha: f64, minibatch: usize, seed: u64) -> EmConfig {
        EmConfig {
            topics,
            alpha,
            minibatch,
            seed,
        }
    }

    fn doc(a: usize, b: usize, c: usize, d: usize) -> OneHotTriple {
        OneHotTriple::new(a, b, c, d).unwrap()
    }

    #[test]
    fn posterior_single_topic() {
        let p = TopicParams::uniform(4, 1);
        assert_eq!(posterior(&p, &doc(0, 1, 2, 4)), vec![1.0]);
    }

    #[test]
    fn posterior_zero_likelihood_topic() {
        let p = TopicParams::from_columns(vec![0.5, 0.5], &[vec![1.0, 0.0], vec![0.0, 1.0]]).unwrap();
        assert_eq!(posterior(&p, &doc(0, 0, 0, 2)), vec![1.0, 0.0]);
    }

    #[test]
    fn posterior_all_zero_is_uniform() {
        let p = TopicParams::from_columns(vec![0.5, 0.5], &[vec![1.0, 0.0], vec![1.0, 0.0]]).unwrap();
        assert_eq!(posterior(&p, &doc(1, 1, 1, 2)), vec![0.5, 0.5]);
    }

    #[test]
    fn posterior_easy_problem() {
        let p = TopicParams::concentrated(vec![0.15, 0.35, 0.5], 3, 0.9).unwrap();
        let q = posterior(&p, &doc(0, 0, 0, 3));
        let raw = [0.15 * 0.9f64.powi(3), 0.35 * 0.05f64.powi(3), 0.5 * 0.05f64.powi(3)];
        let z: f64 = raw.iter().sum();
        for c in 0..3 {
            assert!((q[c] - raw[c] / z).abs() < 1e-15);
        }
        assert!((q[0] - 0.99903).abs() < 5e-6);
        assert!((q[1] - 0.00040).abs() < 5e-6);
        assert!((q[2] - 0.00057).abs() < 5e-6);
    }

    #[test]
    fn first_step_size() {
        let em = StepwiseEm::new(3, cfg(2, 0.5, 1, 0)).unwrap();
        assert!((em.step_size() - 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn alpha_range_enforced() {
        assert!(StepwiseEm::new(3, cfg(2, 0.49, 1, 0)).is_err());
        assert!(StepwiseEm::new(3, cfg(2, 1.01, 1, 0)).is_err());
        assert!(StepwiseEm::new(3, cfg(2, 1.0, 0, 0)).is_err());
        assert!(StepwiseEm::new(3, cfg(2, 0.5, 1, 0)).is_ok());
    }

    #[test]
    fn init_depends_on_seed_only() {
        let a = StepwiseEm::new(5, cfg(3, 0.7, 1, 1)).unwrap();
        let b = StepwiseEm::new(5, cfg(3, 0.7, 1, 2)).unwrap();
        let c = StepwiseEm::new(5, cfg(3, 0.7, 1, 3)).unwrap();
        assert_ne!(a.params(), b.params());
        assert_ne!(b.params(), c.params());
        assert_ne!(a.params(), c.params());
        assert_eq!(a, StepwiseEm::new(5, cfg(3, 0.7, 1, 1)).unwrap());
        for c in 0..3 {
            let s: f64 = a.params().topic(c).iter().sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn single_topic_learns_word_frequencies() {
        let docs = [doc(0, 0, 1, 3), doc(0, 2, 0, 3), doc(1, 0, 0, 3), doc(2, 2, 1, 3)];
        let counts = [6.0, 3.0, 3.0];
        let mut em = StepwiseEm::new(3, cfg(1, 1.0, 1, 4)).unwrap();
        for _ in 0..2000 {
            for x in &docs {
                em.observe(x).unwrap();
            }
        }
        let p = em.params();
        for w in 0..3 {
            assert!((p.word_prob(w, 0) - counts[w] / 12.0).abs() < 1e-3);
        }
    }

    #[test]
    fn minibatch_buffers_until_full() {
        let mut em = StepwiseEm::new(3, cfg(2, 0.5, 3, 0)).unwrap();
        let before = em.params();
        em.observe(&doc(0, 0, 0, 3)).unwrap();
        em.observe(&doc(1, 1, 1, 3)).unwrap();
        assert_eq!(em.params(), before);
        assert_eq!(em.pending().len(), 2);
        em.observe(&doc(2, 2, 2, 3)).unwrap();
        assert_eq!(em.updates(), 1);
        assert!(em.pending().is_empty());
        assert_ne!(em.params(), before);
    }

    #[test]
    fn step_returns_params_before_update() {
        let mut em = StepwiseEm::new(3, cfg(2, 0.5, 1, 0)).unwrap();
        let before = em.params();
        let (p, diag) = em.step(&doc(0, 1, 2, 3)).unwrap();
        assert_eq!(p, before);
        assert!(diag.fallbacks.is_empty());
        assert_eq!(em.updates(), 1);
    }

    proptest! {
        #[test]
        fn params_stay_on_simplex(
            seed in any::<u64>(),
            alpha in 0.5f64..=1.0,
            mb in 1usize..4,
            words in prop::collection::vec((0usize..4, 0usize..4, 0usize..4), 1..40),
        ) {
            let mut em = StepwiseEm::new(4, cfg(3, alpha, mb, seed)).unwrap();
            for (a, b, c) in words {
                let (p, _) = em.step(&doc(a, b, c, 4)).unwrap();
                prop_assert_eq!(p.k(), 3);
                let (s_omega, s_u) = em.stats();
                prop_assert!((s_omega.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                for c in 0..3 {
                    let col: f64 = (0..4).map(|w| s_u.get(w, c)).sum();
                    prop_assert!((col - s_omega[c]).abs() < 1e-12);
                }
            }
        }
    }
}
