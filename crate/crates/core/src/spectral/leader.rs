use crate::error::{check_dim, Error, Result};
use crate::learner::{Fallback, OnlineLearner, StepDiagnostics};
use crate::linalg::{sym_eig, whitener_from_eig, Whitener, DEFAULT_EIG_TOL};
use crate::moments::{
    empirical_m2_with, empirical_whitened_t3_with, seeded_rng, whitened_rank_k_t3, ExactModel,
    PairCounts, Reservoir, ReservoirEvent, StreamRng,
};
use crate::spectral::recover::{assemble, recover_topics};
use crate::spectral::{recover_params, tensor_power_method, PowerMethodConfig, TopicParams};
use crate::tensor::{OneHotTriple, SymMatrix, SymTensor3};

/// Mixed into the seed for the power-method generator so it never shares a
/// stream with the reservoir.
const POWER_SEED_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralConfig {
    pub topics: usize,
    /// Reservoir capacity `m`.
    pub reservoir: usize,
    pub power: PowerMethodConfig,
    pub seed: u64,
    /// Maintain the pair counts behind `M₂` across reservoir swaps instead of
    /// recounting the reservoir every step.
    pub incremental_m2: bool,
}

impl SpectralConfig {
    pub fn new(topics: usize, reservoir: usize, seed: u64) -> Self {
        SpectralConfig {
            topics,
            reservoir,
            power: PowerMethodConfig::default(),
            seed,
            incremental_m2: false,
        }
    }
}

/// Result of the moment → whitening → power method → recovery pipeline with
/// every fallback resolved except "nothing recovered".
pub(crate) struct Decomposition {
    pub params: Option<TopicParams>,
    pub diag: StepDiagnostics,
}

pub(crate) fn decompose<F>(
    m2: &SymMatrix,
    k: usize,
    build_t3: F,
    power: &PowerMethodConfig,
    rng: &mut StreamRng,
) -> Result<Decomposition>
where
    F: Fn(&Whitener) -> Result<SymTensor3>,
{
    let mut diag = StepDiagnostics::default();
    let d = m2.dim();
    let eig = match sym_eig(m2, DEFAULT_EIG_TOL) {
        Ok(e) => e,
        Err(Error::NoConvergence { .. }) => {
            diag.fallbacks.push(Fallback::NoConvergence);
            return Ok(Decomposition { params: None, diag });
        }
        Err(e) => return Err(e),
    };
    let wh = match whitener_from_eig(&eig, k, None) {
        Ok(wh) => wh,
        Err(Error::RankDeficient { usable, .. }) => {
            diag.fallbacks.push(Fallback::RankDeficient { usable });
            if usable == 0 {
                return Ok(Decomposition { params: None, diag });
            }
            whitener_from_eig(&eig, usable, None)?
        }
        Err(e) => return Err(e),
    };
    let t3 = build_t3(&wh)?;
    let factors = match tensor_power_method(&t3, wh.rank(), power, rng) {
        Ok(f) => f,
        Err(Error::DegenerateDecomposition { index, partial }) => {
            diag.fallbacks.push(Fallback::DegenerateDecomposition { extracted: index });
            *partial
        }
        Err(e) => return Err(e),
    };
    let found = factors.len();
    let kept: Vec<_> = recover_topics(&factors, &wh)?.into_iter().flatten().collect();
    if kept.len() < found {
        diag.fallbacks.push(Fallback::DegenerateRecovery {
            dropped: found - kept.len(),
        });
    }
    if kept.is_empty() {
        return Ok(Decomposition { params: None, diag });
    }
    diag.clamped = kept.iter().any(|t| t.clamped);
    let params = assemble(&kept, d, k)?;
    Ok(Decomposition {
        params: Some(params),
        diag,
    })
}

/// The online spectral learner over a reservoir sample.
///
/// Each [`step`](OnlineLearner::step) first estimates parameters from the
/// reservoir as it stood before the new document (second moment, whitening,
/// whitened third moment, power method, recovery), then offers the document
/// to the reservoir.
#[derive(Debug, Clone)]
pub struct SpectralLeader {
    vocab: usize,
    config: SpectralConfig,
    reservoir: Reservoir<OneHotTriple>,
    counts: Option<PairCounts>,
    rng: StreamRng,
    last: Option<TopicParams>,
}

impl SpectralLeader {
    pub fn new(vocab: usize, config: SpectralConfig) -> Result<Self> {
        if config.topics == 0 || config.topics > vocab {
            return Err(Error::InvalidInput(format!(
                "need 1 <= topics <= vocabulary, got {} topics for {vocab} words",
                config.topics
            )));
        }
        config.power.validate()?;
        Ok(SpectralLeader {
            vocab,
            config,
            reservoir: Reservoir::new(config.reservoir, config.seed)?,
            counts: config.incremental_m2.then(|| PairCounts::new(vocab)),
            rng: seeded_rng(config.seed ^ POWER_SEED_SALT),
            last: None,
        })
    }

    pub fn reservoir(&self) -> &Reservoir<OneHotTriple> {
        &self.reservoir
    }

    pub fn last_params(&self) -> Option<&TopicParams> {
        self.last.as_ref()
    }

    /// Parameters from the current reservoir without consuming a document.
    pub fn estimate(&mut self) -> Result<(TopicParams, StepDiagnostics)> {
        let k = self.config.topics;
        if (self.reservoir.seen() as usize) < k {
            return Ok((
                TopicParams::uniform(self.vocab, k),
                StepDiagnostics::with(Fallback::WarmUp),
            ));
        }
        let exec = self.config.power.exec;
        let samples = self.reservoir.items();
        let m2 = match &self.counts {
            Some(c) => c.to_moment()?,
            None => empirical_m2_with(samples, self.vocab, exec)?,
        };
        let out = decompose(
            &m2,
            k,
            |wh| empirical_whitened_t3_with(samples, wh, exec),
            &self.config.power,
            &mut self.rng,
        )?;
        let mut diag = out.diag;
        let params = match out.params {
            Some(p) => p,
            None => match &self.last {
                Some(p) => {
                    diag.fallbacks.push(Fallback::Reused);
                    p.clone()
                }
                None => {
                    diag.fallbacks.push(Fallback::Uniform);
                    TopicParams::uniform(self.vocab, k)
                }
            },
        };
        self.last = Some(params.clone());
        Ok((params, diag))
    }

    /// Offers a document to the reservoir without estimating.
    pub fn observe(&mut self, x: &OneHotTriple) -> Result<()> {
        check_dim(self.vocab, x.vocab())?;
        self.absorb(*x)
    }

    fn absorb(&mut self, x: OneHotTriple) -> Result<()> {
        let event = self.reservoir.update(x);
        if let Some(counts) = &mut self.counts {
            match event {
                ReservoirEvent::Appended => counts.add(&x)?,
                ReservoirEvent::Replaced { evicted } => {
                    counts.remove(&evicted)?;
                    counts.add(&x)?;
                }
                ReservoirEvent::Rejected => {}
            }
        }
        Ok(())
    }
}

impl OnlineLearner for SpectralLeader {
    fn step(&mut self, x: &OneHotTriple) -> Result<(TopicParams, StepDiagnostics)> {
        check_dim(self.vocab, x.vocab())?;
        let out = self.estimate()?;
        self.absorb(*x)?;
        Ok(out)
    }
}

/// Noise-free variant that knows the exact per-step distributions: at step
/// `t` it decomposes the exact moments averaged over steps `1..t−1`. Step 1
/// predicts the uniform model.
#[derive(Debug, Clone)]
pub struct OracleLeader {
    model: ExactModel,
    power: PowerMethodConfig,
    rng: StreamRng,
    steps: usize,
}

impl OracleLeader {
    pub fn new(model: ExactModel, power: PowerMethodConfig, seed: u64) -> Result<Self> {
        power.validate()?;
        Ok(OracleLeader {
            model,
            power,
            rng: seeded_rng(seed ^ POWER_SEED_SALT),
            steps: 0,
        })
    }
}

impl OnlineLearner for OracleLeader {
    fn step(&mut self, x: &OneHotTriple) -> Result<(TopicParams, StepDiagnostics)> {
        let d = self.model.params.vocab();
        let k = self.model.params.k();
        check_dim(d, x.vocab())?;
        let past = 0..self.steps;
        self.steps += 1;
        if past.is_empty() {
            return Ok((TopicParams::uniform(d, k), StepDiagnostics::with(Fallback::WarmUp)));
        }
        let avg = self.model.averaged_params(past.clone())?;
        let m2 = self.model.exact_m2(past)?;
        let out = decompose(&m2, k, |wh| whitened_rank_k_t3(&avg, wh), &self.power, &mut self.rng)?;
        let mut diag = out.diag;
        let params = out.params.unwrap_or_else(|| {
            diag.fallbacks.push(Fallback::Uniform);
            TopicParams::uniform(d, k)
        });
        Ok((params, diag))
    }
}

/// One-shot spectral recovery from a full dataset. Degeneracies are returned
/// as errors rather than patched.
pub fn offline_recover(
    samples: &[OneHotTriple],
    vocab: usize,
    topics: usize,
    power: &PowerMethodConfig,
    seed: u64,
) -> Result<TopicParams> {
    let m2 = empirical_m2_with(samples, vocab, power.exec)?;
    let eig = sym_eig(&m2, DEFAULT_EIG_TOL)?;
    let wh = whitener_from_eig(&eig, topics, None)?;
    let t3 = empirical_whitened_t3_with(samples, &wh, power.exec)?;
    let mut rng = seeded_rng(seed ^ POWER_SEED_SALT);
    let factors = tensor_power_method(&t3, topics, power, &mut rng)?;
    recover_params(&factors, &wh)
}

/// Exact-moment recovery: decomposes `Σ ω_c u_c u_cᵀ` and
/// `Σ ω_c (Wᵀu_c)^{⊗3}` built from `params`.
pub fn recover_from_exact(params: &TopicParams, power: &PowerMethodConfig, seed: u64) -> Result<TopicParams> {
    let m2 = crate::moments::rank_k_m2(params);
    let eig = sym_eig(&m2, DEFAULT_EIG_TOL)?;
    let wh = whitener_from_eig(&eig, params.k(), None)?;
    let t3 = whitened_rank_k_t3(params, &wh)?;
    let mut rng = seeded_rng(seed ^ POWER_SEED_SALT);
    let factors = tensor_power_method(&t3, params.k(), power, &mut rng)?;
    recover_params(&factors, &wh)
}
