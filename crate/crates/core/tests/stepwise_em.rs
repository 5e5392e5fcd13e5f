use spectral_leader::data::{gen_stochastic, StreamConfig};
use spectral_leader::em::{EmConfig, StepwiseEm};
use spectral_leader::eval::nll;
use spectral_leader::{OneHotTriple, OnlineLearner, TopicParams};

fn docs(p: f64, n: usize, seed: u64) -> Vec<OneHotTriple> {
    let cfg = StreamConfig {
        p,
        n,
        seed,
        ..Default::default()
    };
    gen_stochastic(&cfg).unwrap().map(|s| s.x).collect()
}

fn em(alpha: f64, minibatch: usize, seed: u64) -> StepwiseEm {
    StepwiseEm::new(
        3,
        EmConfig {
            topics: 3,
            alpha,
            minibatch,
            seed,
        },
    )
    .unwrap()
}

// Hand-rolled E-step: responsibilities from Bayes' rule, statistics as
// batch averages of the responsibilities and the responsibility-weighted
// word frequencies.
fn classical_e_step(p: &TopicParams, batch: &[OneHotTriple]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let (k, d) = (p.k(), p.vocab());
    let mut s_omega = vec![0.0; k];
    let mut s_u = vec![vec![0.0; k]; d];
    for x in batch {
        let joint: Vec<f64> = (0..k)
            .map(|c| {
                let mut v = p.omega()[c];
                for w in x.words() {
                    v *= p.word_prob(w, c);
                }
                v
            })
            .collect();
        let z: f64 = joint.iter().sum();
        for c in 0..k {
            let r = joint[c] / z;
            s_omega[c] += r / batch.len() as f64;
            for w in x.words() {
                s_u[w][c] += r / (3.0 * batch.len() as f64);
            }
        }
    }
    (s_omega, s_u)
}

#[test]
fn single_full_batch_matches_a_blended_classical_e_step() {
    let batch = docs(0.9, 200, 4);
    let mut learner = em(0.7, batch.len(), 9);
    let init_params = learner.params();
    let (init_omega, init_u) = {
        let (o, u) = learner.stats();
        (o.to_vec(), u.clone())
    };
    let eta = learner.step_size();
    assert!((eta - 2f64.powf(-0.7)).abs() < 1e-15);
    for x in &batch {
        learner.step(x).unwrap();
    }
    assert_eq!(learner.updates(), 1);
    let (want_omega, want_u) = classical_e_step(&init_params, &batch);
    let (got_omega, got_u) = learner.stats();
    for c in 0..3 {
        let expect = (1.0 - eta) * init_omega[c] + eta * want_omega[c];
        assert!((got_omega[c] - expect).abs() < 1e-12, "omega[{c}]");
        for w in 0..3 {
            let expect = (1.0 - eta) * init_u.get(w, c) + eta * want_u[w][c];
            assert!((got_u.get(w, c) - expect).abs() < 1e-12, "u[{w}][{c}]");
        }
    }
}

#[test]
fn held_out_likelihood_improves_on_average() {
    let held_out = docs(0.9, 2000, 999);
    let checkpoints = [10, 100, 1000];
    let mut mean = [0.0; 3];
    for seed in 0..10 {
        let stream = docs(0.9, 1000, seed);
        let mut learner = em(0.7, 1, seed);
        for (t, x) in stream.iter().enumerate() {
            learner.step(x).unwrap();
            if let Some(i) = checkpoints.iter().position(|&c| c == t + 1) {
                let p = learner.params();
                let avg = held_out.iter().map(|x| nll(&p, x).unwrap()).sum::<f64>() / held_out.len() as f64;
                mean[i] += avg / 10.0;
            }
        }
    }
    assert!(mean[0] >= mean[1] && mean[1] >= mean[2], "{mean:?}");
}

#[test]
fn step_size_power_changes_the_hard_problem_trajectory() {
    let stream = docs(0.7, 500, 1);
    let run = |alpha| {
        let mut learner = em(alpha, 1, 3);
        let mut total = 0.0;
        for x in &stream {
            let (p, _) = learner.step(x).unwrap();
            total += nll(&p, x).unwrap();
        }
        (learner.params(), total)
    };
    let (slow, a) = run(0.9);
    let (fast, b) = run(0.5);
    assert!((a - b).abs() > 1e-3);
    assert!(slow.max_abs_diff_matched(&fast).unwrap() > 1e-3);
}

#[test]
fn minibatches_only_update_when_full() {
    let stream = docs(0.9, 250, 2);
    let mut learner = em(0.6, 100, 0);
    let first = learner.params();
    for x in &stream[..99] {
        let (p, _) = learner.step(x).unwrap();
        assert_eq!(p, first);
    }
    for x in &stream[99..] {
        learner.step(x).unwrap();
    }
    assert_eq!(learner.updates(), 2);
    assert_eq!(learner.pending().len(), 50);
}
