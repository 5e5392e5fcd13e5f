//! Loss, regret and the likelihood and recovery metrics.
//!
//! Every model tensor here is `M = Σ_c ω_c u_c⊗³`, so Frobenius quantities
//! reduce to cubes of Gram entries and the `d³` tensor is never formed.

use crate::em::EM_SMOOTHING;
use crate::error::{check_dim, Error, Result};
use crate::moments::ExactModel;
use crate::spectral::TopicParams;
use crate::tensor::{OneHotTriple, SymTensor3};

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨M_p, M_q⟩ = Σ_{a,b} ω_a ω'_b (u_aᵀu'_b)³`.
pub fn inner(p: &TopicParams, q: &TopicParams) -> Result<f64> {
    check_dim(p.vocab(), q.vocab())?;
    let pu = p.topic_vectors();
    let qu = q.topic_vectors();
    let mut s = 0.0;
    for (a, ua) in pu.iter().enumerate() {
        for (b, ub) in qu.iter().enumerate() {
            s += p.omega()[a] * q.omega()[b] * dot(ua, ub).powi(3);
        }
    }
    Ok(s)
}

/// `‖M_p‖²_F`.
pub fn frobenius_sq(p: &TopicParams) -> f64 {
    inner(p, p).expect("same model")
}

/// `‖M_p − M_q‖²_F`, floored at zero against cancellation.
pub fn distance_sq(p: &TopicParams, q: &TopicParams) -> Result<f64> {
    Ok((frobenius_sq(p) - 2.0 * inner(p, q)? + frobenius_sq(q)).max(0.0))
}

/// `M_p(i, j, k)` for the words of `x`.
pub fn entry(p: &TopicParams, x: &OneHotTriple) -> f64 {
    p.likelihood(&x.words())
}

/// `ℓ(M) = ‖x⊗x⊗x − M‖²_F = ‖M‖²_F − 2 M(x) + 1`.
pub fn loss(p: &TopicParams, x: &OneHotTriple) -> Result<f64> {
    check_dim(p.vocab(), x.vocab())?;
    Ok(frobenius_sq(p) - 2.0 * entry(p, x) + 1.0)
}

/// Entrywise `ℓ(M)` over a dense tensor.
pub fn loss_dense(m: &SymTensor3, x: &OneHotTriple) -> Result<f64> {
    check_dim(m.dim(), x.vocab())?;
    let d = m.dim();
    let [a, b, c] = x.words();
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let target = if (i, j, k) == (a, b, c) { 1.0 } else { 0.0 };
                s += (target - m.get(i, j, k)).powi(2);
            }
        }
    }
    Ok(s)
}

/// `E_{x∼P} ℓ(M) = 1 − 2⟨P, M⟩ + ‖M‖²_F`, where the one-hot observation has
/// unit norm.
pub fn expected_loss(dist: &TopicParams, m: &TopicParams) -> Result<f64> {
    Ok(1.0 - 2.0 * inner(dist, m)? + frobenius_sq(m))
}

/// Dense `E_{x∼P} ℓ(M) = Σ_x P(x) ℓ_x(M)`, summed over every observation.
pub fn expected_loss_dense(dist: &SymTensor3, m: &SymTensor3) -> Result<f64> {
    check_dim(dist.dim(), m.dim())?;
    let d = dist.dim();
    let norm_sq = m.frobenius_norm().powi(2);
    let mut s = 0.0;
    for i in 0..d {
        for j in 0..d {
            for k in 0..d {
                let p = dist.get(i, j, k);
                if p != 0.0 {
                    s += p * (norm_sq - 2.0 * m.get(i, j, k) + 1.0);
                }
            }
        }
    }
    Ok(s)
}

/// The best tensor in hindsight over the first `n` steps, as the model with
/// the step-averaged prior.
pub fn hindsight(model: &ExactModel, n: usize) -> Result<TopicParams> {
    if n == 0 {
        return Err(Error::InvalidInput("hindsight needs at least one step".into()));
    }
    model.averaged_params(0..n)
}

/// Cumulative sums of `alg[t] − reference[t]`.
pub fn regret_trace(alg: &[f64], reference: &[f64]) -> Result<Vec<f64>> {
    check_dim(alg.len(), reference.len())?;
    let mut acc = 0.0;
    Ok(alg
        .iter()
        .zip(reference)
        .map(|(a, r)| {
            acc += a - r;
            acc
        })
        .collect())
}

/// `4√(d³)·log t`.
pub fn regret_bound(d: usize, t: usize) -> f64 {
    4.0 * (d as f64).powf(1.5) * (t as f64).ln()
}

/// Reservoir size `⌈ε⁻² log(d³n)⌉`.
pub fn reservoir_size_for(eps: f64, d: usize, n: usize) -> Result<usize> {
    if !(eps > 0.0) || d == 0 || n == 0 {
        return Err(Error::InvalidInput(format!("need eps > 0, d > 0, n > 0; got {eps}, {d}, {n}")));
    }
    let log = ((d as f64).powi(3) * n as f64).ln().max(0.0);
    Ok(((log / (eps * eps)).ceil() as usize).max(1))
}

/// Negative log-likelihood of one document after additive smoothing.
pub fn nll(p: &TopicParams, x: &OneHotTriple) -> Result<f64> {
    check_dim(p.vocab(), x.vocab())?;
    Ok(-p.smoothed(EM_SMOOTHING).likelihood(&x.words()).ln())
}

fn check_trace(trace: usize, other: usize) -> Result<usize> {
    check_dim(trace, other)?;
    if trace == 0 {
        return Err(Error::EmptySamples);
    }
    Ok(trace)
}

/// `L⁽¹⁾_n = (1/n) Σ_{t=2..n} −log p(x_t | θ_{t−1})`, where `trace[t]`
/// predicted `docs[t]`.
pub fn nll_metric(trace: &[TopicParams], docs: &[OneHotTriple]) -> Result<f64> {
    let n = check_trace(trace.len(), docs.len())?;
    let mut s = 0.0;
    for t in 1..n {
        s += nll(&trace[t], &docs[t])?;
    }
    Ok(s / n as f64)
}

/// `L⁽²⁾_n = (1/n) Σ_{t=2..n} ‖M_* − M_{t−1}‖²_F`.
pub fn recovery_metric(trace: &[TopicParams], reference: &TopicParams) -> Result<f64> {
    if trace.is_empty() {
        return Err(Error::EmptySamples);
    }
    let n = trace.len();
    let mut s = 0.0;
    for p in &trace[1..] {
        s += distance_sq(reference, p)?;
    }
    Ok(s / n as f64)
}

/// One row of a metric trace. `nll` and `recovery_err` are the running
/// averages `L⁽¹⁾_t` and `L⁽²⁾_t`; they are absent at `t = 1`, where no
/// prediction counts yet.
#[derive(Debug, Clone, PartialEq)]
pub struct StepMetrics {
    pub t: usize,
    pub loss: f64,
    pub nll: Option<f64>,
    pub recovery_err: Option<f64>,
    pub cum_regret: Option<f64>,
    pub fallback: String,
}

/// Streaming evaluator producing [`StepMetrics`] one step at a time.
#[derive(Debug, Clone)]
pub struct Evaluator {
    reference: Option<TopicParams>,
    oracle: Option<(ExactModel, TopicParams)>,
    t: usize,
    nll_sum: f64,
    recovery_sum: f64,
    regret: f64,
}

impl Evaluator {
    /// `reference` is the recovery target `M_*`; `oracle` is the exact model
    /// with the horizon used for the hindsight tensor, enabling regret.
    pub fn new(reference: Option<TopicParams>, oracle: Option<(ExactModel, usize)>) -> Result<Self> {
        let oracle = match oracle {
            Some((model, n)) => {
                let best = hindsight(&model, n)?;
                Some((model, best))
            }
            None => None,
        };
        Ok(Evaluator {
            reference,
            oracle,
            t: 0,
            nll_sum: 0.0,
            recovery_sum: 0.0,
            regret: 0.0,
        })
    }

    /// Scores `params`, the prediction made for `x` before seeing it.
    pub fn record(&mut self, params: &TopicParams, x: &OneHotTriple, fallback: String) -> Result<StepMetrics> {
        let index = self.t;
        self.t += 1;
        let t = self.t;
        let step_loss = loss(params, x)?;
        let (nll, recovery_err) = if t >= 2 {
            self.nll_sum += nll(params, x)?;
            let rec = match &self.reference {
                Some(r) => {
                    self.recovery_sum += distance_sq(r, params)?;
                    Some(self.recovery_sum / t as f64)
                }
                None => None,
            };
            (Some(self.nll_sum / t as f64), rec)
        } else {
            (None, None)
        };
        let cum_regret = match &self.oracle {
            Some((model, best)) => {
                let p_t = model.averaged_params(index..index + 1)?;
                self.regret += expected_loss(&p_t, params)? - expected_loss(&p_t, best)?;
                Some(self.regret)
            }
            None => None,
        };
        Ok(StepMetrics {
            t,
            loss: step_loss,
            nll,
            recovery_err,
            cum_regret,
            fallback,
        })
    }
}
