use crate::error::{check_dim, Error, Result};
use crate::linalg::Whitener;
use crate::spectral::{SpectralFactors, TopicParams};
use crate::tensor::Matrix;

/// A topic recovered from one eigenpair before it joins a [`TopicParams`].
#[derive(Debug, Clone)]
pub(crate) struct RecoveredTopic {
    pub weight: f64,
    pub word_probs: Vec<f64>,
    pub clamped: bool,
}

/// `ω = 1/λ²`, `u = λ(Wᵀ)⁺v`, then negatives clamped to zero and `u`
/// renormalised. `None` marks a topic left with no mass.
pub(crate) fn recover_topics(f: &SpectralFactors, wh: &Whitener) -> Result<Vec<Option<RecoveredTopic>>> {
    if f.len() > wh.rank() {
        return Err(Error::InvalidInput(format!(
            "{} eigenpairs exceed whitening rank {}",
            f.len(),
            wh.rank()
        )));
    }
    for v in &f.vectors {
        check_dim(wh.rank(), v.len())?;
    }
    f.lambdas
        .iter()
        .zip(&f.vectors)
        .map(|(&lambda, v)| {
            let raw = wh.unwhiten(v, lambda)?;
            let clamped = raw.iter().any(|&x| x < 0.0);
            let word_probs: Vec<f64> = raw.into_iter().map(|x| x.max(0.0)).collect();
            let mass: f64 = word_probs.iter().sum();
            if !(mass > 0.0) || !mass.is_finite() {
                return Ok(None);
            }
            Ok(Some(RecoveredTopic {
                weight: 1.0 / (lambda * lambda),
                word_probs: word_probs.into_iter().map(|x| x / mass).collect(),
                clamped,
            }))
        })
        .collect()
}

/// Assembles topics into normalised parameters sorted by descending weight,
/// padded to `k` topics with uniform word distributions of zero weight.
pub(crate) fn assemble(topics: &[RecoveredTopic], d: usize, k: usize) -> Result<TopicParams> {
    let total: f64 = topics.iter().map(|t| t.weight).sum();
    if !(total > 0.0) || !total.is_finite() {
        return Err(Error::DegenerateRecovery { topic: 0 });
    }
    let mut omega = vec![0.0; k];
    let mut columns = vec![vec![1.0 / d as f64; d]; k];
    for (c, t) in topics.iter().enumerate().take(k) {
        omega[c] = t.weight / total;
        columns[c].clone_from(&t.word_probs);
    }
    let topics = Matrix::from_columns(&columns)?;
    Ok(TopicParams::new(omega, topics)?.sorted_by_weight())
}

/// Recovers `(ω, U)` from whitened-tensor eigenpairs. Fails with
/// [`Error::DegenerateRecovery`] if any topic loses all mass to clamping.
pub fn recover_params(f: &SpectralFactors, wh: &Whitener) -> Result<TopicParams> {
    let topics = recover_topics(f, wh)?
        .into_iter()
        .enumerate()
        .map(|(topic, t)| t.ok_or(Error::DegenerateRecovery { topic }))
        .collect::<Result<Vec<_>>>()?;
    assemble(&topics, wh.vocab(), f.len())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_unit_eigenvalue() {
        let wh = Whitener::from_parts(Matrix::from_fn(2, 1, |i, _| [0.6, 0.8][i]), vec![1.0]).unwrap();
        let f = SpectralFactors {
            lambdas: vec![1.0],
            vectors: vec![vec![1.0]],
        };
        let p = recover_params(&f, &wh).unwrap();
        assert_eq!(p.omega(), &[1.0]);
        assert!((p.word_prob(0, 0) - 0.6 / 1.4).abs() < 1e-15);
    }

    #[test]
    fn all_negative_topic_is_degenerate() {
        let wh = Whitener::from_parts(Matrix::identity(2), vec![1.0, 1.0]).unwrap();
        let f = SpectralFactors {
            lambdas: vec![2.0, 1.0],
            vectors: vec![vec![1.0, 0.0], vec![0.0, -1.0]],
        };
        assert!(matches!(recover_params(&f, &wh), Err(Error::DegenerateRecovery { topic: 1 })));
    }

    #[test]
    fn padding_keeps_simplex() {
        let topics = vec![RecoveredTopic {
            weight: 4.0,
            word_probs: vec![0.5, 0.5, 0.0],
            clamped: false,
        }];
        let p = assemble(&topics, 3, 3).unwrap();
        assert_eq!(p.omega(), &[1.0, 0.0, 0.0]);
        assert_eq!(p.topic(2), vec![1.0 / 3.0; 3]);
    }
}
