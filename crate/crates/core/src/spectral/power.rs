use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::tensor::SymTensor3;

/// Eigenvalues at or below this fraction of `‖T‖_F` count as non-positive.
pub const LAMBDA_FLOOR_REL: f64 = 1e-9;

/// Settings for the tensor power method.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PowerMethodConfig {
    /// Random starting vectors per extracted component.
    pub restarts: usize,
    /// Iterations per start, and again for the final polish.
    pub iterations: usize,
    /// Stop iterating once `‖v_new − v_old‖ <= tol`.
    pub tol: f64,
    pub exec: Execution,
}

impl Default for PowerMethodConfig {
    fn default() -> Self {
        PowerMethodConfig {
            restarts: 50,
            iterations: 100,
            tol: 1e-10,
            exec: Execution::default(),
        }
    }
}

impl PowerMethodConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 || self.iterations == 0 || !(self.tol > 0.0) {
            return Err(Error::InvalidInput(format!(
                "power method needs positive restarts, iterations and tol, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// Robust eigenpairs `T ≈ Σ λ_i v_i⊗v_i⊗v_i`, in decreasing `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralFactors {
    pub lambdas: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
}

impl SpectralFactors {
    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }

    /// `Σ λ_i v_i⊗³`, dense.
    pub fn reconstruct(&self) -> Result<SymTensor3> {
        SymTensor3::from_rank_k(&self.lambdas, &self.vectors)
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn power_iterate(t: &SymTensor3, mut v: Vec<f64>, iterations: usize, tol: f64) -> Vec<f64> {
    for _ in 0..iterations {
        let mut w = t.contract_to_vector(&v).expect("dimension checked by caller");
        let n = norm(&w);
        if !(n > 0.0) || !n.is_finite() {
            break;
        }
        w.iter_mut().for_each(|x| *x /= n);
        let delta = w.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        v = w;
        if delta <= tol {
            break;
        }
    }
    v
}

fn random_unit<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-12 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}

/// Extracts `k` eigenpairs by power iteration with restarts and deflation.
///
/// For each component: `restarts` random unit starts are iterated
/// `v ← T(I,v,v)/‖T(I,v,v)‖`, the start maximising `T(v,v,v)` is kept (lowest
/// index on ties) and polished, `λ = T(v,v,v)`, and `T ← T − λ v⊗³`.
/// Start vectors are drawn up front so results do not depend on the
/// execution mode.
pub fn tensor_power_method<R: Rng + ?Sized>(
    t: &SymTensor3,
    k: usize,
    cfg: &PowerMethodConfig,
    rng: &mut R,
) -> Result<SpectralFactors> {
    cfg.validate()?;
    if k == 0 {
        return Err(Error::InvalidInput("need at least one component".into()));
    }
    if k > t.dim() {
        return Err(Error::InvalidInput(format!(
            "cannot extract {k} components from a tensor of side {}",
            t.dim()
        )));
    }
    let dim = t.dim();
    let floor = LAMBDA_FLOOR_REL * t.frobenius_norm();
    let mut deflated = t.clone();
    let mut factors = SpectralFactors {
        lambdas: Vec::with_capacity(k),
        vectors: Vec::with_capacity(k),
    };
    for index in 0..k {
        let starts: Vec<Vec<f64>> = (0..cfg.restarts).map(|_| random_unit(dim, rng)).collect();
        let current = &deflated;
        let candidates = cfg.exec.map_range(starts.len(), |s| {
            let v = power_iterate(current, starts[s].clone(), cfg.iterations, cfg.tol);
            let score = current.contract_to_scalar(&v).expect("dimension checked");
            (score, v)
        });
        let mut best = 0;
        for (i, c) in candidates.iter().enumerate() {
            if c.0 > candidates[best].0 {
                best = i;
            }
        }
        let v = power_iterate(&deflated, candidates[best].1.clone(), cfg.iterations, cfg.tol);
        let lambda = deflated.contract_to_scalar(&v)?;
        if !(lambda > floor) || !lambda.is_finite() {
            return Err(Error::DegenerateDecomposition {
                index,
                partial: Box::new(factors),
            });
        }
        deflated = SymTensor3::from_sorted_fn(dim, |i, j, l| {
            deflated.get(i, j, l) - lambda * v[i] * v[j] * v[l]
        });
        factors.lambdas.push(lambda);
        factors.vectors.push(v);
    }
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| factors.lambdas[b].total_cmp(&factors.lambdas[a]));
    Ok(SpectralFactors {
        lambdas: order.iter().map(|&i| factors.lambdas[i]).collect(),
        vectors: order.iter().map(|&i| factors.vectors[i].clone()).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::seeded_rng;

    #[test]
    fn exact_rank_one() {
        let t = SymTensor3::from_rank_k(&[2.0], &[vec![1.0]]).unwrap();
        let f = tensor_power_method(&t, 1, &PowerMethodConfig::default(), &mut seeded_rng(0)).unwrap();
        assert!((f.lambdas[0] - 2.0).abs() < 1e-12);
        assert!((f.vectors[0][0].abs() - 1.0).abs() < 1e-12);

        let t = SymTensor3::from_rank_k(&[2.0], &[vec![1.0, 0.0, 0.0]]).unwrap();
        let f = tensor_power_method(&t, 1, &PowerMethodConfig::default(), &mut seeded_rng(0)).unwrap();
        assert!((f.lambdas[0] - 2.0).abs() < 1e-12);
        assert!((f.vectors[0][0].abs() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn orthogonal_tensor_reconstructs() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let vs = vec![vec![s, s, 0.0], vec![0.0, 0.0, 1.0], vec![s, -s, 0.0]];
        let lambdas = [3.0, 1.5, 0.7];
        let t = SymTensor3::from_rank_k(&lambdas, &vs).unwrap();
        let f = tensor_power_method(&t, 3, &PowerMethodConfig::default(), &mut seeded_rng(5)).unwrap();
        for (got, want) in f.lambdas.iter().zip(&lambdas) {
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
        assert!(f.reconstruct().unwrap().frobenius_distance(&t).unwrap() <= 1e-6);
        for i in 0..3 {
            for j in (i + 1)..3 {
                let dot: f64 = f.vectors[i].iter().zip(&f.vectors[j]).map(|(a, b)| a * b).sum();
                assert!(dot.abs() <= 1e-6);
            }
        }
    }

    #[test]
    fn exhausted_tensor_is_degenerate() {
        // After deflating the only component the residual is zero, so λ = 0.
        let t = SymTensor3::from_rank_k(&[1.0], &[vec![1.0, 0.0]]).unwrap();
        match tensor_power_method(&t, 2, &PowerMethodConfig::default(), &mut seeded_rng(1)) {
            Err(Error::DegenerateDecomposition { index: 1, partial }) => {
                assert_eq!(partial.len(), 1);
                assert!((partial.lambdas[0] - 1.0).abs() < 1e-9);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn execution_modes_agree() {
        let t = SymTensor3::from_sorted_fn(4, |i, j, k| ((i + 2 * j + 3 * k) % 5) as f64 * 0.1 + 0.05);
        let mut cfg = PowerMethodConfig {
            exec: Execution::Sequential,
            ..Default::default()
        };
        let a = tensor_power_method(&t, 2, &cfg, &mut seeded_rng(3));
        cfg.exec = Execution::Parallel;
        let b = tensor_power_method(&t, 2, &cfg, &mut seeded_rng(3));
        assert_eq!(format!("{a:?}"), format!("{b:?}"));
    }

    #[test]
    fn rejects_bad_config() {
        let t = SymTensor3::zeros(2);
        let cfg = PowerMethodConfig { restarts: 0, ..Default::default() };
        assert!(tensor_power_method(&t, 1, &cfg, &mut seeded_rng(0)).is_err());
    }
}
