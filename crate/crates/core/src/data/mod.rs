//! Synthetic document streams and corpus ingestion.

mod corpus;

use std::path::PathBuf;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;

pub use corpus::{load_corpus, write_vocab_manifest, Corpus, TriplePolicy, VocabEntry};

use crate::error::{Error, Result};
use crate::moments::{seeded_rng, ExactModel, PriorSchedule, StreamRng};
use crate::spectral::TopicParams;
use crate::tensor::OneHotTriple;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamKind {
    /// Topic drawn from the prior at every step.
    Stochastic,
    /// Topics follow a repeating per-batch schedule.
    NonStochastic,
    /// Stochastic stream whose exact per-step distributions are exposed.
    Oracle,
    /// Documents read from a file.
    Corpus,
}

impl std::str::FromStr for StreamKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(StreamKind::Stochastic),
            "nonstochastic" => Ok(StreamKind::NonStochastic),
            "oracle" => Ok(StreamKind::Oracle),
            "corpus" => Ok(StreamKind::Corpus),
            other => Err(Error::InvalidInput(format!(
                "unknown stream kind `{other}` (expected stochastic, nonstochastic, oracle or corpus)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamConfig {
    pub kind: StreamKind,
    pub topics: usize,
    pub vocab: usize,
    pub n: usize,
    /// Probability that topic `j` emits word `j`.
    pub p: f64,
    pub prior: Vec<f64>,
    /// Documents per topic in each batch of a non-stochastic stream.
    pub schedule: Vec<usize>,
    pub seed: u64,
    pub corpus: Option<PathBuf>,
    pub policy: TriplePolicy,
}

impl Default for StreamConfig {
    fn default() -> Self {
        StreamConfig {
            kind: StreamKind::Stochastic,
            topics: 3,
            vocab: 3,
            n: 1000,
            p: 0.9,
            prior: vec![0.15, 0.35, 0.5],
            schedule: vec![15, 35, 50],
            seed: 0,
            corpus: None,
            policy: TriplePolicy::First3,
        }
    }
}

impl StreamConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidInput("stream length n must be positive".into()));
        }
        if self.topics == 0 || self.vocab == 0 {
            return Err(Error::InvalidInput("topics and vocabulary size must be positive".into()));
        }
        if self.topics > self.vocab {
            return Err(Error::InvalidInput(format!(
                "{} topics exceed the vocabulary size {}",
                self.topics, self.vocab
            )));
        }
        if self.kind == StreamKind::Corpus {
            if self.corpus.is_none() {
                return Err(Error::InvalidInput("corpus streams need a corpus path".into()));
            }
            return Ok(());
        }
        let lower = 1.0 / self.vocab as f64;
        if !(self.p > lower && self.p <= 1.0) {
            return Err(Error::InvalidInput(format!("p must lie in (1/d, 1], got {}", self.p)));
        }
        self.schedule_spec().validate()
    }

    fn schedule_spec(&self) -> PriorSchedule {
        match self.kind {
            StreamKind::NonStochastic => PriorSchedule::Cyclic(self.schedule.clone()),
            _ => PriorSchedule::Stationary(self.prior.clone()),
        }
    }

    /// The generating model of a synthetic stream.
    pub fn model(&self) -> Result<ExactModel> {
        if self.kind == StreamKind::Corpus {
            return Err(Error::InvalidInput("corpus streams have no generating model".into()));
        }
        self.validate()?;
        let mut prior = self.prior.clone();
        if let PriorSchedule::Cyclic(counts) = self.schedule_spec() {
            let total: usize = counts.iter().sum();
            prior = counts.iter().map(|&c| c as f64 / total as f64).collect();
        }
        if prior.len() != self.topics {
            return Err(Error::InvalidInput(format!(
                "prior/schedule has {} entries for {} topics",
                prior.len(),
                self.topics
            )));
        }
        let params = TopicParams::concentrated(prior, self.vocab, self.p)?;
        ExactModel::new(params, self.schedule_spec())
    }
}

/// One generated document and the topic that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Sample {
    pub x: OneHotTriple,
    pub topic: usize,
}

/// Documents drawn from an [`ExactModel`]: a topic from the step's prior,
/// then three conditionally independent words.
#[derive(Debug, Clone)]
pub struct SyntheticStream {
    model: ExactModel,
    words: Vec<WeightedIndex<f64>>,
    stationary: Option<WeightedIndex<f64>>,
    rng: StreamRng,
    t: usize,
    n: usize,
}

impl SyntheticStream {
    pub fn new(model: ExactModel, n: usize, seed: u64) -> Result<Self> {
        let weights = |w: &[f64]| WeightedIndex::new(w).map_err(|e| Error::InvalidInput(e.to_string()));
        let words = model.params.topic_vectors().iter().map(|u| weights(u)).collect::<Result<_>>()?;
        let stationary = match &model.schedule {
            PriorSchedule::Stationary(p) => Some(weights(p)?),
            PriorSchedule::Cyclic(_) => None,
        };
        Ok(SyntheticStream {
            model,
            words,
            stationary,
            rng: seeded_rng(seed),
            t: 0,
            n,
        })
    }

    pub fn model(&self) -> &ExactModel {
        &self.model
    }

    /// Exact word-triple distribution of 0-based step `t`.
    pub fn distribution_at(&self, t: usize) -> Result<TopicParams> {
        self.model.averaged_params(t..t + 1)
    }
}

impl Iterator for SyntheticStream {
    type Item = Sample;

    fn next(&mut self) -> Option<Sample> {
        if self.t >= self.n {
            return None;
        }
        let topic = match (&self.stationary, &self.model.schedule) {
            (Some(prior), _) => prior.sample(&mut self.rng),
            (None, PriorSchedule::Cyclic(counts)) => PriorSchedule::scheduled_topic(counts, self.t),
            (None, PriorSchedule::Stationary(_)) => unreachable!("stationary prior is always indexed"),
        };
        self.t += 1;
        let dist = &self.words[topic];
        let w: [usize; 3] = std::array::from_fn(|_| dist.sample(&mut self.rng));
        let x = OneHotTriple::new(w[0], w[1], w[2], self.model.params.vocab()).expect("sampled words lie in the vocabulary");
        Some(Sample { x, topic })
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.n - self.t;
        (left, Some(left))
    }
}

/// Stochastic stream: topic drawn from `cfg.prior` at every step.
pub fn gen_stochastic(cfg: &StreamConfig) -> Result<SyntheticStream> {
    expect_kind(cfg, &[StreamKind::Stochastic, StreamKind::Oracle])?;
    SyntheticStream::new(cfg.model()?, cfg.n, cfg.seed)
}

/// Non-stochastic stream: topics repeat `cfg.schedule` batch after batch.
pub fn gen_nonstochastic(cfg: &StreamConfig) -> Result<SyntheticStream> {
    expect_kind(cfg, &[StreamKind::NonStochastic])?;
    SyntheticStream::new(cfg.model()?, cfg.n, cfg.seed)
}

/// Samples paired with the exact distribution they were drawn from.
pub fn oracle_stream(cfg: &StreamConfig) -> Result<impl Iterator<Item = (Sample, TopicParams)>> {
    expect_kind(cfg, &[StreamKind::Oracle])?;
    let stream = SyntheticStream::new(cfg.model()?, cfg.n, cfg.seed)?;
    let model = stream.model().clone();
    Ok(stream.enumerate().map(move |(t, s)| {
        let p = model.averaged_params(t..t + 1).expect("single step range");
        (s, p)
    }))
}

/// Any synthetic stream kind.
pub fn synthetic(cfg: &StreamConfig) -> Result<SyntheticStream> {
    match cfg.kind {
        StreamKind::Stochastic | StreamKind::Oracle => gen_stochastic(cfg),
        StreamKind::NonStochastic => gen_nonstochastic(cfg),
        StreamKind::Corpus => Err(Error::InvalidInput("corpus is not a synthetic stream".into())),
    }
}

fn expect_kind(cfg: &StreamConfig, kinds: &[StreamKind]) -> Result<()> {
    if kinds.contains(&cfg.kind) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!("stream kind {:?} not valid here", cfg.kind)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: StreamKind, p: f64, n: usize, seed: u64) -> StreamConfig {
        StreamConfig {
            kind,
            p,
            n,
            seed,
            ..Default::default()
        }
    }

    #[test]
    fn topic_frequencies_follow_prior() {
        let mut hits = [0usize; 3];
        for s in gen_stochastic(&cfg(StreamKind::Stochastic, 0.9, 100_000, 1)).unwrap() {
            hits[s.topic] += 1;
        }
        for (h, want) in hits.iter().zip([0.15, 0.35, 0.5]) {
            assert!((*h as f64 / 1e5 - want).abs() < 0.01);
        }
    }

    #[test]
    fn deterministic_words_when_p_is_one() {
        for s in gen_stochastic(&cfg(StreamKind::Stochastic, 1.0, 500, 2)).unwrap() {
            assert_eq!(s.x.words(), [s.topic; 3]);
        }
    }

    #[test]
    fn hard_problem_word_frequency() {
        let c = StreamConfig {
            prior: vec![1.0, 0.0, 0.0],
            ..cfg(StreamKind::Stochastic, 0.7, 34_000, 3)
        };
        let mut zero = 0usize;
        let mut total = 0usize;
        for s in gen_stochastic(&c).unwrap() {
            assert_eq!(s.topic, 0);
            for w in s.x.words() {
                zero += usize::from(w == 0);
                total += 1;
            }
        }
        assert!(total >= 100_000);
        assert!((zero as f64 / total as f64 - 0.7).abs() < 0.01);
    }

    #[test]
    fn nonstochastic_schedule() {
        let labels: Vec<usize> = gen_nonstochastic(&cfg(StreamKind::NonStochastic, 0.9, 1000, 0))
            .unwrap()
            .map(|s| s.topic)
            .collect();
        assert!(labels[..15].iter().all(|&c| c == 0));
        assert!(labels[15..50].iter().all(|&c| c == 1));
        assert!(labels[50..100].iter().all(|&c| c == 2));
        assert_eq!(labels[100], 0);
        assert_eq!(&labels[..100], &labels[900..]);
        let mut hits = [0usize; 3];
        labels.iter().for_each(|&c| hits[c] += 1);
        assert_eq!(hits, [150, 350, 500]);
    }

    #[test]
    fn oracle_distributions() {
        let c = cfg(StreamKind::Oracle, 0.9, 50, 4);
        let truth = c.model().unwrap().params;
        for (_, p) in oracle_stream(&c).unwrap() {
            assert_eq!(p, truth);
        }
        assert!(oracle_stream(&cfg(StreamKind::Stochastic, 0.9, 5, 0)).is_err());
    }

    #[test]
    fn running_oracle_average_is_exact() {
        let c = StreamConfig {
            kind: StreamKind::NonStochastic,
            ..Default::default()
        };
        let s = gen_nonstochastic(&c).unwrap();
        let mut acc = [0.0; 3];
        for t in 0..237 {
            let p = s.distribution_at(t).unwrap();
            acc.iter_mut().zip(p.omega()).for_each(|(a, w)| *a += w);
        }
        let avg = s.model().averaged_params(0..237).unwrap();
        for (a, w) in acc.iter().zip(avg.omega()) {
            assert!((a / 237.0 - w).abs() < 1e-12);
        }
    }

    #[test]
    fn seeded_streams_repeat() {
        let c = cfg(StreamKind::Stochastic, 0.7, 200, 9);
        let a: Vec<Sample> = gen_stochastic(&c).unwrap().collect();
        let b: Vec<Sample> = gen_stochastic(&c).unwrap().collect();
        assert_eq!(a, b);
        let other: Vec<Sample> = gen_stochastic(&StreamConfig { seed: 10, ..c }).unwrap().collect();
        assert_ne!(a, other);
    }

    #[test]
    fn config_validation() {
        assert!(cfg(StreamKind::Stochastic, 0.2, 10, 0).validate().is_err());
        assert!(cfg(StreamKind::Stochastic, 0.9, 0, 0).validate().is_err());
        let bad_prior = StreamConfig {
            prior: vec![0.5, 0.6, 0.0],
            ..Default::default()
        };
        assert!(bad_prior.validate().is_err());
        let no_path = cfg(StreamKind::Corpus, 0.9, 10, 0);
        assert!(no_path.validate().is_err());
        assert!("nonstochastic".parse::<StreamKind>().is_ok());
        assert!("weekly".parse::<StreamKind>().is_err());
    }
}
