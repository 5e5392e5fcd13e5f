use std::fmt::Write as _;
use std::path::Path;

use super::config::{AlgorithmKind, AlgorithmSpec, ExperimentSpec};
use crate::atomic::write_atomic;
use crate::data::{load_corpus, synthetic, StreamKind};
use crate::em::{EmConfig, StepwiseEm};
use crate::error::Result;
use crate::eval::{regret_bound, Evaluator, StepMetrics};
use crate::learner::OnlineLearner;
use crate::moments::ExactModel;
use crate::spectral::{offline_recover, OracleLeader, PowerMethodConfig, SpectralConfig, SpectralLeader, TopicParams};
use crate::tensor::OneHotTriple;

/// CSV header of every metric file.
pub const CSV_HEADER: &str = "t,loss,nll,recovery_err,cum_regret,fallback";

/// Mixed into the run seed so learners never share a generator with the
/// stream they consume.
const LEARNER_SEED_SALT: u64 = 0xD1B5_4A32_D192_ED03;

/// The metric trace of one (algorithm, seed) cell.
#[derive(Debug, Clone, PartialEq)]
pub struct CellResult {
    pub label: String,
    pub seed: u64,
    pub metrics: Vec<StepMetrics>,
}

impl CellResult {
    pub fn last(&self) -> &StepMetrics {
        self.metrics.last().expect("cells have at least one step")
    }
}

enum Source {
    Synthetic(ExactModel),
    Corpus { docs: Vec<OneHotTriple>, reference: Option<TopicParams> },
}

fn prepare(spec: &ExperimentSpec) -> Result<Source> {
    let s = &spec.stream;
    if s.kind != StreamKind::Corpus {
        return Ok(Source::Synthetic(s.model()?));
    }
    let path = s.corpus.as_deref().expect("validated corpus path");
    let corpus = load_corpus(path, s.vocab, s.policy, spec.reference_seed)?;
    let power = PowerMethodConfig {
        exec: spec.exec,
        ..Default::default()
    };
    let d = corpus.vocab.len();
    let reference = match offline_recover(&corpus.docs, d, s.topics, &power, spec.reference_seed) {
        Ok(p) => Some(p),
        Err(e) => {
            log::warn!("offline reference recovery failed ({e}); recovery error left empty");
            None
        }
    };
    let mut docs = corpus.docs;
    docs.truncate(s.n);
    Ok(Source::Corpus { docs, reference })
}

fn learner(alg: &AlgorithmSpec, source: &Source, spec: &ExperimentSpec, seed: u64) -> Result<Box<dyn OnlineLearner>> {
    let topics = spec.stream.topics;
    let seed = seed ^ LEARNER_SEED_SALT;
    let d = match source {
        Source::Synthetic(m) => m.params.vocab(),
        Source::Corpus { docs, .. } => docs.first().map_or(spec.stream.vocab, |x| x.vocab()),
    };
    Ok(match &alg.kind {
        AlgorithmKind::Spectral {
            reservoir,
            power,
            incremental_m2,
        } => Box::new(SpectralLeader::new(
            d,
            SpectralConfig {
                topics,
                reservoir: *reservoir,
                power: *power,
                seed,
                incremental_m2: *incremental_m2,
            },
        )?),
        AlgorithmKind::Em { alpha, minibatch } => Box::new(StepwiseEm::new(
            d,
            EmConfig {
                topics,
                alpha: *alpha,
                minibatch: *minibatch,
                seed,
            },
        )?),
        AlgorithmKind::Oracle { power } => match source {
            Source::Synthetic(model) => Box::new(OracleLeader::new(model.clone(), *power, seed)?),
            Source::Corpus { .. } => unreachable!("rejected by the config parser"),
        },
    })
}

fn run_cell(alg: &AlgorithmSpec, seed: u64, source: &Source, spec: &ExperimentSpec) -> Result<CellResult> {
    let mut learner = learner(alg, source, spec, seed)?;
    let (docs, mut evaluator) = match source {
        Source::Synthetic(model) => {
            let cfg = crate::data::StreamConfig {
                seed,
                ..spec.stream.clone()
            };
            let docs: Vec<OneHotTriple> = synthetic(&cfg)?.map(|s| s.x).collect();
            let oracle = (spec.stream.kind == StreamKind::Oracle).then(|| (model.clone(), docs.len()));
            let reference = model.averaged_params(0..docs.len())?;
            (docs, Evaluator::new(Some(reference), oracle)?)
        }
        Source::Corpus { docs, reference } => (docs.clone(), Evaluator::new(reference.clone(), None)?),
    };
    let mut metrics = Vec::with_capacity(docs.len());
    for x in &docs {
        let (params, diag) = learner.step(x)?;
        metrics.push(evaluator.record(&params, x, diag.label())?);
    }
    log::debug!("{} seed {}: {} steps", alg.label, seed, metrics.len());
    Ok(CellResult {
        label: alg.label.clone(),
        seed,
        metrics,
    })
}

/// Runs every (algorithm, seed) cell without writing anything. Cells come
/// back grouped by algorithm, seeds in spec order.
pub fn simulate(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    let source = prepare(spec)?;
    let n_seeds = spec.seeds.len();
    let cells = spec.exec.map_range(spec.algorithms.len() * n_seeds, |i| {
        run_cell(&spec.algorithms[i / n_seeds], spec.seeds[i % n_seeds], &source, spec)
    });
    cells.into_iter().collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// Metric rows as CSV text, header included.
pub fn metrics_csv(metrics: &[StepMetrics]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for m in metrics {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            m.t,
            m.loss,
            opt(m.nll),
            opt(m.recovery_err),
            opt(m.cum_regret),
            m.fallback
        );
    }
    out
}

fn mean_of(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let v: Option<Vec<f64>> = values.collect();
    v.filter(|v| !v.is_empty()).map(|v| v.iter().sum::<f64>() / v.len() as f64)
}

/// Step-wise means across seeds. The fallback column counts seeds that took
/// any fallback at that step.
pub fn mean_metrics(cells: &[&CellResult]) -> Vec<StepMetrics> {
    let n = cells.iter().map(|c| c.metrics.len()).min().unwrap_or(0);
    (0..n)
        .map(|i| {
            let rows: Vec<&StepMetrics> = cells.iter().map(|c| &c.metrics[i]).collect();
            StepMetrics {
                t: rows[0].t,
                loss: mean_of(rows.iter().map(|r| Some(r.loss))).unwrap_or(f64::NAN),
                nll: mean_of(rows.iter().map(|r| r.nll)),
                recovery_err: mean_of(rows.iter().map(|r| r.recovery_err)),
                cum_regret: mean_of(rows.iter().map(|r| r.cum_regret)),
                fallback: rows.iter().filter(|r| !r.fallback.is_empty()).count().to_string(),
            }
        })
        .collect()
}

/// Runs the experiment and writes `<label>/seed-<s>.csv`, `<label>/mean.csv`
/// and `summary.csv` under the output directory, plus `regret_bound.csv` for
/// oracle streams.
pub fn run(spec: &ExperimentSpec) -> Result<Vec<CellResult>> {
    let cells = simulate(spec)?;
    let out = spec.output.as_path();
    for c in &cells {
        let path = out.join(&c.label).join(format!("seed-{}.csv", c.seed));
        write_atomic(&path, metrics_csv(&c.metrics).as_bytes())?;
    }
    let mut summary = String::from("algorithm,seeds,steps,mean_loss,final_nll,final_recovery_err,final_cum_regret\n");
    for alg in &spec.algorithms {
        let group: Vec<&CellResult> = cells.iter().filter(|c| c.label == alg.label).collect();
        let mean = mean_metrics(&group);
        write_atomic(&out.join(&alg.label).join("mean.csv"), metrics_csv(&mean).as_bytes())?;
        let avg_loss = mean.iter().map(|m| m.loss).sum::<f64>() / mean.len().max(1) as f64;
        let last = mean.last();
        let _ = writeln!(
            summary,
            "{},{},{},{},{},{},{}",
            alg.label,
            group.len(),
            mean.len(),
            avg_loss,
            opt(last.and_then(|m| m.nll)),
            opt(last.and_then(|m| m.recovery_err)),
            opt(last.and_then(|m| m.cum_regret)),
        );
    }
    write_atomic(&out.join("summary.csv"), summary.as_bytes())?;
    if spec.stream.kind == StreamKind::Oracle {
        write_regret_bound(&out.join("regret_bound.csv"), spec.stream.vocab, spec.stream.n)?;
    }
    Ok(cells)
}

fn write_regret_bound(path: &Path, d: usize, n: usize) -> Result<()> {
    let mut s = String::from("t,bound\n");
    for t in 1..=n {
        let _ = writeln!(s, "{t},{}", regret_bound(d, t));
    }
    write_atomic(path, s.as_bytes())
}
