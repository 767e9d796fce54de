//! Acceptance suite. Runs every criterion in order, prints one
//! `[PASS]`/`[FAIL]` line each and exits non-zero if any failed.

use std::collections::VecDeque;
use std::fs;
use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use statrs::distribution::{ChiSquared, ContinuousCDF};
use tempfile::TempDir;

use rlxkit::bench::{measure_throughput, relative_report, timed, BenchConfig};
use rlxkit::bridge::{
    decode_message, encode_message, read_message, serve_env, write_message, Decoded, RemoteEnv,
    ServerHandle, WireMessage,
};
use rlxkit::env::{Env, Space};
use rlxkit::envs::{Pendulum, RunTask};
use rlxkit::nn::{finite_difference_check, init_mlp, Matrix, ParamSet};
use rlxkit::ppo::{compute_gae, log_probs, ppo_loss, GaeInputs, LossCoefs, Minibatch, PolicyHead};
use rlxkit::runner::{parse_cli, run, Registry, RunError, RunOutcome};
use rlxkit::sac::{
    actor_loss, alpha_loss, critic_loss, LogStdBounds, ReplayBuffer, SacBatch, Transition,
};

// Tolerances and budgets.
const GRAD_REL_TOL: f64 = 1e-5;
const GRAD_NETS: u64 = 50;
const FD_STEP: f64 = 1e-5;
const GAE_TOL: f64 = 1e-10;
const GAE_INSTANCES: usize = 1000;
const GAE_MAX_STEPS: usize = 64;
const GAE_MAX_ENVS: usize = 4;
const REPLAY_OPS: usize = 100_000;
const CHI2_DRAWS: usize = 1_000_000;
const CHI2_BINS: usize = 100;
const CHI2_MIN_P: f64 = 0.01;
const WIRE_MESSAGES: usize = 10_000;
const REMOTE_TOL: f64 = 1e-9;
const SAC_THRESHOLD: f64 = -300.0;
const SAC_STEPS: i64 = 50_000;
const PPO_THRESHOLD: f64 = 8.0;
const PPO_STEPS: i64 = 500_000;
const LEARNING_SEEDS: [u64; 3] = [0, 1, 2];
const BENCH_SEEDS: [u64; 3] = [0, 1, 2];
const HALVING_TOL: f64 = 0.10;
const TIMER_OVERHEAD_TOL: f64 = 0.01;
const NOOP_ITERATIONS: u64 = 1_000_000;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        ok,
        detail: detail.into(),
    }
}

// ---------------------------------------------------------------------------
// Gradient correctness

fn uniform_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect())
}

fn ppo_batch(
    rng: &mut ChaCha8Rng,
    policy: &ParamSet<f64>,
    head: PolicyHead,
    n: usize,
    obs_dim: usize,
    out: usize,
    clip: f64,
) -> Minibatch<f64> {
    let observations = uniform_matrix(rng, n, obs_dim);
    let actions = match head {
        PolicyHead::Gaussian { .. } => uniform_matrix(rng, n, out),
        PolicyHead::Categorical => {
            Matrix::from_vec(n, 1, (0..n).map(|_| rng.random_range(0..out) as f64).collect())
        }
    };
    let current = log_probs(policy, head, &observations, &actions).unwrap();
    // Shift old log-probs so that ratios keep clear of the clip kinks.
    let old_log_probs = current
        .iter()
        .map(|&lp| loop {
            let shift: f64 = rng.random_range(-0.4..0.4);
            let ratio = (-shift).exp();
            if (ratio - (1.0 - clip)).abs() > 1e-3 && (ratio - (1.0 + clip)).abs() > 1e-3 {
                break lp + shift;
            }
        })
        .collect();
    Minibatch {
        observations,
        actions,
        old_log_probs,
        advantages: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
        returns: (0..n).map(|_| rng.sample(StandardNormal)).collect(),
    }
}

fn sac_batch(rng: &mut ChaCha8Rng, n: usize, obs: usize, act: usize) -> SacBatch<f64> {
    SacBatch {
        observations: uniform_matrix(rng, n, obs),
        actions: uniform_matrix(rng, n, act),
        rewards: (0..n).map(|_| rng.random_range(-2.0..0.0)).collect(),
        next_observations: uniform_matrix(rng, n, obs),
        terminated: (0..n).map(|_| rng.random_bool(0.2)).collect(),
    }
}

/// Orthogonal weights with uniform biases. Zero biases leave ReLU units
/// exactly at the kink whenever a whole previous layer is inactive, where
/// finite differences and the analytic subgradient legitimately disagree.
fn random_net(sizes: &[usize], rng: &mut ChaCha8Rng) -> ParamSet<f64> {
    let mut p: ParamSet<f64> = init_mlp(sizes, 1.0, 1.0, rng);
    for k in (1..p.entries().len()).step_by(2) {
        for v in p.values_mut(k) {
            *v = rng.random_range(-0.5..0.5);
        }
    }
    p
}

fn gradient_correctness() -> Outcome {
    let bounds = LogStdBounds { min: -20.0, max: 2.0 };
    let mut worst: Vec<(&str, f64)> = vec![
        ("ppo policy", 0.0),
        ("ppo value", 0.0),
        ("sac critic", 0.0),
        ("sac actor", 0.0),
        ("sac alpha", 0.0),
    ];
    let mut bump = |i: usize, e: f64| {
        if e > worst[i].1 || e.is_nan() {
            worst[i].1 = e;
        }
    };
    for seed in 0..GRAD_NETS {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let obs = rng.random_range(1..=5);
        let hidden = rng.random_range(3..=10);
        let out = rng.random_range(1..=3);
        let n = rng.random_range(4..=12);

        let (head, out_dim) = if seed % 2 == 0 {
            (PolicyHead::Gaussian { log_std: rng.random_range(-1.5..0.0) }, out)
        } else {
            (PolicyHead::Categorical, out + 1)
        };
        let policy: ParamSet<f64> = init_mlp(&[obs, hidden, hidden, out_dim], 1.0, 1.0, &mut rng);
        let value: ParamSet<f64> = init_mlp(&[obs, hidden, hidden, 1], 1.0, 1.0, &mut rng);
        let coefs = LossCoefs {
            clip_range: 0.2,
            critic_coef: 0.5,
            entropy_coef: rng.random_range(0.0..0.05),
        };
        let batch = ppo_batch(&mut rng, &policy, head, n, obs, out_dim, coefs.clip_range);
        let g = ppo_loss(&policy, &value, head, &batch, &coefs).unwrap();
        let rp = finite_difference_check(
            |p| ppo_loss(p, &value, head, &batch, &coefs).unwrap().loss,
            &policy,
            &g.policy_grad,
            FD_STEP,
        );
        let rv = finite_difference_check(
            |v| ppo_loss(&policy, v, head, &batch, &coefs).unwrap().loss,
            &value,
            &g.value_grad,
            FD_STEP,
        );
        bump(0, rp.max_rel_error);
        bump(1, rv.max_rel_error);

        let act = out;
        let actor = random_net(&[obs, hidden, hidden, 2 * act], &mut rng);
        let q1 = random_net(&[obs + act, hidden, hidden, 1], &mut rng);
        let q2 = random_net(&[obs + act, hidden, hidden, 1], &mut rng);
        let sb = sac_batch(&mut rng, n, obs, act);
        let y: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
        let c = critic_loss(&q1, &q2, &sb, &y).unwrap();
        let r1 = finite_difference_check(|p| critic_loss(p, &q2, &sb, &y).unwrap().loss, &q1, &c.grad1, FD_STEP);
        let r2 = finite_difference_check(|p| critic_loss(&q1, p, &sb, &y).unwrap().loss, &q2, &c.grad2, FD_STEP);
        bump(2, r1.max_rel_error.max(r2.max_rel_error));

        let eps = Matrix::from_vec(n, act, (0..n * act).map(|_| rng.sample(StandardNormal)).collect());
        let alpha = rng.random_range(0.05..1.0);
        let a = actor_loss(&actor, &q1, &q2, alpha, &sb.observations, &eps, bounds).unwrap();
        let ra = finite_difference_check(
            |p| actor_loss(p, &q1, &q2, alpha, &sb.observations, &eps, bounds).unwrap().loss,
            &actor,
            &a.grad,
            FD_STEP,
        );
        bump(3, ra.max_rel_error);

        let log_alpha: f64 = rng.random_range(-2.0..1.0);
        let target = -(act as f64);
        let (_, ga) = alpha_loss(log_alpha, &a.log_probs, target);
        let gn = (alpha_loss(log_alpha + FD_STEP, &a.log_probs, target).0
            - alpha_loss(log_alpha - FD_STEP, &a.log_probs, target).0)
            / (2.0 * FD_STEP);
        bump(4, (ga - gn).abs() / ga.abs().max(gn.abs()).max(1e-8));
    }
    let ok = worst.iter().all(|(_, e)| *e < GRAD_REL_TOL);
    let detail = worst
        .iter()
        .map(|(name, e)| format!("{name} {e:.1e}"))
        .collect::<Vec<_>>()
        .join(", ");
    outcome(ok, format!("{GRAD_NETS} nets, worst relative errors: {detail} (limit {GRAD_REL_TOL:e})"))
}

// ---------------------------------------------------------------------------
// GAE

/// Direct sum over future TD residuals, cut after the first finished step.
fn gae_oracle(
    rewards: &[f64],
    values: &[f64],
    final_values: &[f64],
    bootstrap: &[f64],
    terminated: &[bool],
    truncated: &[bool],
    n: usize,
    gamma: f64,
    lambda: f64,
) -> Vec<f64> {
    let steps = rewards.len() / n;
    let delta = |t: usize, i: usize| {
        let k = t * n + i;
        let next = if terminated[k] {
            0.0
        } else if truncated[k] {
            final_values[k]
        } else if t + 1 == steps {
            bootstrap[i]
        } else {
            values[k + n]
        };
        rewards[k] + gamma * next - values[k]
    };
    let mut out = vec![0.0; rewards.len()];
    for i in 0..n {
        for t in 0..steps {
            let mut sum = 0.0;
            for l in 0..steps - t {
                sum += (gamma * lambda).powi(l as i32) * delta(t + l, i);
                let k = (t + l) * n + i;
                if terminated[k] || truncated[k] {
                    break;
                }
            }
            out[t * n + i] = sum;
        }
    }
    out
}

fn gae_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut worst = 0.0f64;
    for _ in 0..GAE_INSTANCES {
        let steps = rng.random_range(1..=GAE_MAX_STEPS);
        let n = rng.random_range(1..=GAE_MAX_ENVS);
        let len = steps * n;
        let gamma = rng.random_range(0.8..=1.0);
        let lambda = rng.random_range(0.0..=1.0);
        let p_done = rng.random_range(0.0..0.3);
        let normal = |rng: &mut ChaCha8Rng| -> f64 { rng.sample(StandardNormal) };
        let rewards: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
        let values: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
        let final_values: Vec<f64> = (0..len).map(|_| normal(&mut rng)).collect();
        let bootstrap: Vec<f64> = (0..n).map(|_| normal(&mut rng)).collect();
        let mut terminated = vec![false; len];
        let mut truncated = vec![false; len];
        for k in 0..len {
            if rng.random_bool(p_done) {
                if rng.random_bool(0.5) {
                    terminated[k] = true;
                } else {
                    truncated[k] = true;
                }
            }
        }
        let g = compute_gae(
            &GaeInputs {
                rewards: &rewards,
                values: &values,
                final_values: &final_values,
                bootstrap: &bootstrap,
                terminated: &terminated,
                truncated: &truncated,
                nr_envs: n,
            },
            gamma,
            lambda,
        )
        .unwrap();
        let expected = gae_oracle(
            &rewards, &values, &final_values, &bootstrap, &terminated, &truncated, n, gamma, lambda,
        );
        for k in 0..len {
            worst = worst.max((g.advantages[k] - expected[k]).abs());
            worst = worst.max((g.returns[k] - (expected[k] + values[k])).abs());
        }
    }
    outcome(
        worst <= GAE_TOL,
        format!("{GAE_INSTANCES} instances, max abs deviation {worst:.1e} (limit {GAE_TOL:e})"),
    )
}

// ---------------------------------------------------------------------------
// Replay buffer

fn random_transition(rng: &mut ChaCha8Rng, obs: usize, act: usize) -> Transition {
    Transition {
        observation: (0..obs).map(|_| rng.sample(StandardNormal)).collect(),
        action: (0..act).map(|_| rng.random_range(-1.0..1.0)).collect(),
        reward: rng.sample(StandardNormal),
        next_observation: (0..obs).map(|_| rng.sample(StandardNormal)).collect(),
        terminated: rng.random_bool(0.1),
    }
}

fn replay_equivalence() -> Outcome {
    let (obs, act, capacity) = (3, 2, 257);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut buffer = ReplayBuffer::new(capacity, obs, act);
    let mut model: VecDeque<Transition> = VecDeque::new();
    let mut mismatches = 0usize;
    let mut samples = 0usize;
    for _ in 0..REPLAY_OPS {
        if model.is_empty() || rng.random_bool(0.6) {
            let t = random_transition(&mut rng, obs, act);
            buffer.insert(&t).unwrap();
            model.push_back(t);
            if model.len() > capacity {
                model.pop_front();
            }
        } else {
            let batch_size = rng.random_range(1..=16);
            let idx = buffer.sample_indices(batch_size, &mut rng).unwrap();
            let batch: SacBatch<f64> = buffer.gather(&idx);
            for (row, &i) in idx.iter().enumerate() {
                samples += 1;
                let Some(t) = model.get(i) else {
                    mismatches += 1;
                    continue;
                };
                let same = batch.observations.row(row) == t.observation.as_slice()
                    && batch.actions.row(row) == t.action.as_slice()
                    && batch.rewards[row] == t.reward
                    && batch.next_observations.row(row) == t.next_observation.as_slice()
                    && batch.terminated[row] == t.terminated;
                if !same {
                    mismatches += 1;
                }
            }
        }
        if buffer.len() != model.len() {
            mismatches += 1;
        }
    }
    for (i, t) in model.iter().enumerate() {
        if buffer.get(i).as_ref() != Some(t) {
            mismatches += 1;
        }
    }

    // Uniformity of index sampling over a full buffer of 100.
    let mut full = ReplayBuffer::new(CHI2_BINS, 1, 1);
    for k in 0..CHI2_BINS {
        full.insert(&Transition {
            observation: vec![k as f64],
            action: vec![0.0],
            reward: 0.0,
            next_observation: vec![0.0],
            terminated: false,
        })
        .unwrap();
    }
    let mut counts = vec![0u64; CHI2_BINS];
    let mut srng = ChaCha8Rng::seed_from_u64(7);
    for i in full.sample_indices(CHI2_DRAWS, &mut srng).unwrap() {
        counts[i] += 1;
    }
    let expected = CHI2_DRAWS as f64 / CHI2_BINS as f64;
    let chi2: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((CHI2_BINS - 1) as f64).unwrap().cdf(chi2);
    outcome(
        mismatches == 0 && p > CHI2_MIN_P,
        format!(
            "{REPLAY_OPS} ops, {samples} sampled rows, {mismatches} mismatches; \
             chi-square {chi2:.1} on {} dof, p = {p:.3} (need > {CHI2_MIN_P})",
            CHI2_BINS - 1
        ),
    )
}

// ---------------------------------------------------------------------------
// Socket protocol

fn random_f64(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..4) {
        0 => rng.sample(StandardNormal),
        1 => rng.random_range(-1e300..1e300),
        2 => [0.0, -0.0, f64::MIN_POSITIVE, f64::MAX, f64::MIN, 5e-324][rng.random_range(0..6)],
        _ => loop {
            let v = f64::from_bits(rng.random());
            if v.is_finite() {
                break v;
            }
        },
    }
}

fn random_string(rng: &mut ChaCha8Rng) -> String {
    let pool = ['a', 'Z', '0', ' ', '"', '\\', '\n', '\t', '\u{1}', 'é', '中', '🦀', '{', '}'];
    (0..rng.random_range(0..24)).map(|_| pool[rng.random_range(0..pool.len())]).collect()
}

fn random_space(rng: &mut ChaCha8Rng) -> Space {
    if rng.random_bool(0.3) {
        return Space::Discrete {
            n: rng.random_range(1..1000),
        };
    }
    let shape: Vec<usize> = (0..rng.random_range(1..=3)).map(|_| rng.random_range(1..=3)).collect();
    let len: usize = shape.iter().product();
    let low: Vec<f64> = (0..len).map(|_| rng.random_range(-10.0..0.0)).collect();
    let high = low.iter().map(|l| l + rng.random_range(1e-6..10.0)).collect();
    Space::ContinuousBox { low, high, shape }
}

fn random_message(rng: &mut ChaCha8Rng) -> WireMessage {
    let vec = |rng: &mut ChaCha8Rng| (0..rng.random_range(0..8)).map(|_| random_f64(rng)).collect();
    match rng.random_range(0..8) {
        0 => WireMessage::Hello,
        1 => WireMessage::Spaces {
            observation_space: random_space(rng),
            action_space: random_space(rng),
        },
        2 => WireMessage::Reset {
            seed: rng.random_bool(0.5).then(|| rng.random()),
        },
        3 => WireMessage::ResetResult { observation: vec(rng) },
        4 => WireMessage::Step { action: vec(rng) },
        5 => WireMessage::StepResult {
            observation: vec(rng),
            reward: random_f64(rng),
            terminated: rng.random(),
            truncated: rng.random(),
        },
        6 => WireMessage::Close,
        _ => WireMessage::Error {
            code: random_string(rng),
            message: random_string(rng),
        },
    }
}

fn same_bits(a: &WireMessage, b: &WireMessage) -> bool {
    // PartialEq treats 0.0 and -0.0 as equal; the wire must not.
    fn bits(m: &WireMessage) -> Vec<u64> {
        match m {
            WireMessage::ResetResult { observation } => observation.iter().map(|v| v.to_bits()).collect(),
            WireMessage::Step { action } => action.iter().map(|v| v.to_bits()).collect(),
            WireMessage::StepResult {
                observation, reward, ..
            } => observation.iter().chain([reward]).map(|v| v.to_bits()).collect(),
            _ => Vec::new(),
        }
    }
    a == b && bits(a) == bits(b)
}

fn serve(make: fn() -> Box<dyn Env>) -> ServerHandle {
    serve_env(Arc::new(move || Ok(make())), "127.0.0.1:0").unwrap()
}

fn remote_vs_local(make: fn() -> Box<dyn Env>, seed: u64, episodes: usize) -> (f64, usize) {
    let server = serve(make);
    let mut remote = RemoteEnv::connect(&server.local_addr().to_string()).unwrap();
    let mut local = make();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (low, high) = match local.action_space() {
        Space::ContinuousBox { low, high, .. } => (low.clone(), high.clone()),
        Space::Discrete { .. } => unreachable!("box environments only"),
    };
    let mut worst = 0.0f64;
    let mut steps = 0;
    for ep in 0..episodes {
        let s = (ep == 0).then_some(seed);
        let a = remote.reset(s).unwrap();
        let b = local.reset(s).unwrap();
        for (x, y) in a.iter().zip(&b) {
            worst = worst.max((x - y).abs());
        }
        loop {
            let action: Vec<f64> = low.iter().zip(&high).map(|(l, h)| rng.random_range(*l..*h)).collect();
            let r = remote.step(&action).unwrap();
            let l = local.step(&action).unwrap();
            steps += 1;
            worst = worst.max((r.reward - l.reward).abs());
            for (x, y) in r.observation.iter().zip(&l.observation) {
                worst = worst.max((x - y).abs());
            }
            if (r.terminated, r.truncated) != (l.terminated, l.truncated) {
                worst = f64::INFINITY;
            }
            if l.done() {
                break;
            }
        }
    }
    (worst, steps)
}

fn raw_frame(w: &mut BufWriter<TcpStream>, body: &[u8]) {
    w.write_all(&(body.len() as u32).to_be_bytes()).unwrap();
    w.write_all(body).unwrap();
    w.flush().unwrap();
}

/// Plays `script` against a fresh run-task server; the server must answer
/// with an error and then close.
fn illegal_sequence(script: &dyn Fn(&mut BufReader<TcpStream>, &mut BufWriter<TcpStream>)) -> bool {
    let server = serve(|| Box::new(RunTask::new()));
    let stream = TcpStream::connect(server.local_addr()).unwrap();
    stream.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    let mut r = BufReader::new(stream.try_clone().unwrap());
    let mut w = BufWriter::new(stream);
    script(&mut r, &mut w);
    let got_error = matches!(read_message(&mut r), Ok(WireMessage::Error { .. }));
    got_error && read_message(&mut r).is_err()
}

fn handshake(r: &mut BufReader<TcpStream>, w: &mut BufWriter<TcpStream>) {
    write_message(w, &WireMessage::Hello).unwrap();
    assert_eq!(read_message(r).unwrap(), WireMessage::Hello);
    assert!(matches!(read_message(r).unwrap(), WireMessage::Spaces { .. }));
}

fn socket_protocol() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(314);
    let mut round_trip_failures = 0;
    for _ in 0..WIRE_MESSAGES {
        let m = random_message(&mut rng);
        let bytes = encode_message(&m).unwrap();
        match decode_message(&bytes) {
            Ok(Decoded::Message { message, consumed }) if consumed == bytes.len() && same_bits(&message, &m) => {}
            _ => round_trip_failures += 1,
        }
    }

    let (pend_dev, pend_steps) = remote_vs_local(|| Box::new(Pendulum::new()), 5, 3);
    let (run_dev, run_steps) = remote_vs_local(|| Box::new(RunTask::new()), 6, 3);

    type Script = Box<dyn Fn(&mut BufReader<TcpStream>, &mut BufWriter<TcpStream>)>;
    let scripts: Vec<(&str, Script)> = vec![
        ("step before hello", Box::new(|_, w| write_message(w, &WireMessage::Step { action: vec![0.0] }).unwrap())),
        ("reset before hello", Box::new(|_, w| write_message(w, &WireMessage::Reset { seed: None }).unwrap())),
        ("close before hello", Box::new(|_, w| write_message(w, &WireMessage::Close).unwrap())),
        ("step before reset", Box::new(|r, w| {
            handshake(r, w);
            write_message(w, &WireMessage::Step { action: vec![0.0] }).unwrap();
        })),
        ("second hello", Box::new(|r, w| {
            handshake(r, w);
            write_message(w, &WireMessage::Hello).unwrap();
        })),
        ("client sends spaces", Box::new(|r, w| {
            handshake(r, w);
            let s = Space::Discrete { n: 2 };
            write_message(w, &WireMessage::Spaces { observation_space: s.clone(), action_space: s }).unwrap();
        })),
        ("client sends step_result", Box::new(|r, w| {
            handshake(r, w);
            write_message(w, &WireMessage::Reset { seed: Some(0) }).unwrap();
            read_message(r).unwrap();
            write_message(w, &WireMessage::StepResult { observation: vec![], reward: 0.0, terminated: false, truncated: false }).unwrap();
        })),
        ("step after episode end", Box::new(|r, w| {
            handshake(r, w);
            write_message(w, &WireMessage::Reset { seed: Some(0) }).unwrap();
            read_message(r).unwrap();
            loop {
                write_message(w, &WireMessage::Step { action: vec![0.0] }).unwrap();
                match read_message(r).unwrap() {
                    WireMessage::StepResult { terminated, truncated, .. } if terminated || truncated => break,
                    WireMessage::StepResult { .. } => {}
                    other => panic!("unexpected {other:?}"),
                }
            }
            write_message(w, &WireMessage::Step { action: vec![0.0] }).unwrap();
        })),
        ("unknown type", Box::new(|_, w| raw_frame(w, br#"{"type":"warp","v":1}"#))),
        ("wrong version", Box::new(|_, w| raw_frame(w, br#"{"type":"hello","v":2}"#))),
        ("malformed json", Box::new(|_, w| raw_frame(w, b"{\"type\":"))),
    ];
    let mut failed_orderings = Vec::new();
    for (name, script) in &scripts {
        let ok = catch_unwind(AssertUnwindSafe(|| illegal_sequence(script.as_ref()))).unwrap_or(false);
        if !ok {
            failed_orderings.push(*name);
        }
    }
    let ok = round_trip_failures == 0
        && pend_dev <= REMOTE_TOL
        && run_dev <= REMOTE_TOL
        && failed_orderings.is_empty();
    outcome(
        ok,
        format!(
            "{WIRE_MESSAGES} messages, {round_trip_failures} round-trip failures; remote vs local \
             max deviation {:.1e} over {} steps (limit {REMOTE_TOL:e}); {}/{} illegal orderings \
             answered with error and close{}",
            pend_dev.max(run_dev),
            pend_steps + run_steps,
            scripts.len() - failed_orderings.len(),
            scripts.len(),
            if failed_orderings.is_empty() {
                String::new()
            } else {
                format!(" (failed: {})", failed_orderings.join(", "))
            }
        ),
    )
}

// ---------------------------------------------------------------------------
// Learning

fn last_metric(run_dir: &Path, name: &str) -> Option<f64> {
    let text = fs::read_to_string(run_dir.join("metrics.csv")).ok()?;
    text.lines()
        .filter_map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (f.get(2) == Some(&name)).then(|| f[3].parse().ok()).flatten()
        })
        .last()
}

fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(|a, b| a.total_cmp(b));
    xs[xs.len() / 2]
}

fn learning(algo: &str, env: &str, steps: i64, threshold: f64) -> Outcome {
    let tmp = TempDir::new().unwrap();
    let registry = Registry::builtin();
    let mut finals = Vec::new();
    let start = Instant::now();
    for seed in LEARNING_SEEDS {
        let argv = [
            format!("--algorithm.name={algo}"),
            format!("--environment.name={env}"),
            format!("--runner.total_steps={steps}"),
            format!("--runner.seed={seed}"),
            format!("--runner.root={}", tmp.path().display()),
            "--runner.checkpoint_interval=0".into(),
        ];
        let config = parse_cli(&registry, &argv).unwrap();
        let out = run(&registry, &config).unwrap();
        finals.push(last_metric(out.run_dir(), "episode_return_running_avg_100").unwrap_or(f64::NEG_INFINITY));
    }
    let m = median(finals.clone());
    outcome(
        m >= threshold,
        format!(
            "{algo} on {env}, {steps} steps, running-average-100 return per seed {:?}, median {m:.2} \
             (need >= {threshold}), {:.0} s",
            finals.iter().map(|v| (v * 100.0).round() / 100.0).collect::<Vec<_>>(),
            start.elapsed().as_secs_f64()
        ),
    )
}

// ---------------------------------------------------------------------------
// Determinism and logging parity

fn small_run_args(algo: &str, env: &str, root: &Path, seed: u64) -> Vec<String> {
    let mut v = vec![
        format!("--algorithm.name={algo}"),
        format!("--environment.name={env}"),
        format!("--runner.root={}", root.display()),
        format!("--runner.seed={seed}"),
    ];
    match algo {
        "ppo" => v.extend([
            "--algorithm.nr_envs=4".to_string(),
            "--algorithm.nr_steps=256".into(),
            "--algorithm.minibatch_size=256".into(),
            "--algorithm.nr_epochs=3".into(),
            "--runner.total_steps=4096".into(),
        ]),
        _ => v.extend([
            "--algorithm.learning_starts=500".to_string(),
            "--algorithm.batch_size=64".into(),
            "--algorithm.metrics_interval=250".into(),
            "--runner.total_steps=2000".into(),
        ]),
    }
    v
}

fn determinism() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let registry = Registry::builtin();
    let mut lines = Vec::new();
    let mut ok = true;
    for algo in ["ppo", "sac"] {
        for env in ["run_task", "pendulum"] {
            let argv = small_run_args(algo, env, tmp.path(), 17);
            let config = parse_cli(&registry, &argv).unwrap();
            let a = run(&registry, &config).unwrap();
            let b = run(&registry, &config).unwrap();
            let fa = fs::read(a.run_dir().join("metrics.csv")).unwrap();
            let fb = fs::read(b.run_dir().join("metrics.csv")).unwrap();
            let same = fa == fb && fa.iter().filter(|&&c| c == b'\n').count() > 2;
            ok &= same;
            lines.push(format!("{algo}/{env} {}", if same { "identical" } else { "DIFFERENT" }));
        }
    }
    outcome(ok, format!("metrics.csv across two runs: {}", lines.join(", ")))
}

fn logging_parity() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let registry = Registry::builtin();
    let mut checked = 0usize;
    let mut mismatches = 0usize;
    for (algo, env) in [("ppo", "run_task"), ("sac", "pendulum")] {
        let mut argv = small_run_args(algo, env, tmp.path(), 3);
        if algo == "ppo" {
            // Enough iterations for the window of 100 to fill and slide.
            argv.push("--runner.total_steps=40960".into());
            argv.push("--algorithm.nr_epochs=1".into());
        } else {
            argv.push("--runner.total_steps=30000".into());
            argv.push("--algorithm.learning_starts=29000".into());
        }
        let config = parse_cli(&registry, &argv).unwrap();
        let out = run(&registry, &config).unwrap();
        let episodes: Vec<(u64, f64)> = fs::read_to_string(out.run_dir().join("episodes.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| {
                let f: Vec<&str> = l.split(',').collect();
                (f[0].parse().unwrap(), f[2].parse().unwrap())
            })
            .collect();
        let metrics = fs::read_to_string(out.run_dir().join("metrics.csv")).unwrap();
        for l in metrics.lines().skip(1) {
            let f: Vec<&str> = l.split(',').collect();
            if f[2] != "episode_return_running_avg_100" {
                continue;
            }
            let step: u64 = f[0].parse().unwrap();
            let logged: f64 = f[3].parse().unwrap();
            let seen: Vec<f64> = episodes.iter().filter(|(s, _)| *s <= step).map(|(_, r)| *r).collect();
            let window = &seen[seen.len().saturating_sub(100)..];
            let mut sum = 0.0;
            for r in window {
                sum += r;
            }
            let recomputed = sum / window.len() as f64;
            checked += 1;
            if recomputed.to_bits() != logged.to_bits() {
                mismatches += 1;
            }
        }
        if episodes.len() <= 100 {
            mismatches += 1;
        }
    }
    outcome(
        checked > 0 && mismatches == 0,
        format!("{checked} logged running averages recomputed from episode logs, {mismatches} mismatches"),
    )
}

// ---------------------------------------------------------------------------
// Bench

fn spin_config(label: &str, step_time_us: u64) -> BenchConfig {
    BenchConfig {
        label: label.into(),
        args: vec![
            "--algorithm.name=ppo".into(),
            "--environment.name=spin_stub".into(),
            format!("--environment.step_time_us={step_time_us}"),
            "--algorithm.nr_envs=1".into(),
            "--algorithm.nr_steps=1000".into(),
            "--algorithm.minibatch_size=250".into(),
            "--algorithm.nr_epochs=1".into(),
        ],
    }
}

fn noop_loop() {
    for i in 0..NOOP_ITERATIONS {
        std::hint::black_box(i);
    }
}

fn bench_methodology() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let registry = Registry::builtin();
    let results: Vec<_> = [spin_config("spin-1ms", 1000), spin_config("spin-2ms", 2000)]
        .iter()
        .map(|c| measure_throughput(&registry, c, 1000, &BENCH_SEEDS, tmp.path()).unwrap())
        .collect();
    let report = relative_report(&results, "spin-1ms").unwrap();
    let rel = |label: &str| report.rows.iter().find(|r| r.label == label).unwrap();
    let base = rel("spin-1ms");
    let slow = rel("spin-2ms");
    let halving_ok = (slow.relative_mean - 0.5).abs() <= 0.5 * HALVING_TOL;
    let seeds_ok = results.iter().all(|r| r.completed().count() == BENCH_SEEDS.len());

    // Timer overhead: interleave bare and timed runs of the same loop and
    // compare the fastest of each.
    let mut bare = Duration::MAX;
    let mut wrapped = Duration::MAX;
    for _ in 0..31 {
        let t = Instant::now();
        noop_loop();
        bare = bare.min(t.elapsed());
        let t = Instant::now();
        let _ = timed(noop_loop);
        wrapped = wrapped.min(t.elapsed());
    }
    let overhead = wrapped.as_secs_f64() / bare.as_secs_f64() - 1.0;
    let ok = seeds_ok
        && base.relative_mean == 1.0
        && halving_ok
        && overhead < TIMER_OVERHEAD_TOL
        && base.std.is_finite()
        && slow.std.is_finite();
    outcome(
        ok,
        format!(
            "{} seeds each; baseline relative {} (std {:.3}); doubled step cost relative {:.3} \
             (std {:.3}, need 0.5 within {:.0}%); timer overhead {:+.3}% (limit {:.0}%)",
            BENCH_SEEDS.len(),
            base.relative_mean,
            base.relative_std,
            slow.relative_mean,
            slow.relative_std,
            HALVING_TOL * 100.0,
            overhead * 100.0,
            TIMER_OVERHEAD_TOL * 100.0
        ),
    )
}

// ---------------------------------------------------------------------------
// Runner contract

fn registry_pairs() -> Outcome {
    let tmp = TempDir::new().unwrap();
    let registry = Registry::builtin();
    let server = serve(|| Box::new(Pendulum::new()));
    let mut trained = Vec::new();
    let mut rejected = Vec::new();
    let mut broken = Vec::new();
    for algo in registry.algorithm_names() {
        for env in registry.environment_names() {
            let experiment = format!("{algo}-{env}");
            let mut argv = vec![
                format!("--algorithm.name={algo}"),
                format!("--environment.name={env}"),
                format!("--runner.root={}", tmp.path().display()),
                format!("--runner.experiment={experiment}"),
            ];
            argv.extend(match algo {
                "ppo" => vec![
                    "--algorithm.nr_envs=2".to_string(),
                    "--algorithm.nr_steps=64".into(),
                    "--algorithm.minibatch_size=32".into(),
                    "--algorithm.nr_epochs=1".into(),
                    "--runner.total_steps=128".into(),
                ],
                _ => vec![
                    "--algorithm.learning_starts=50".to_string(),
                    "--algorithm.batch_size=16".into(),
                    "--runner.total_steps=100".into(),
                ],
            });
            match env {
                "remote" => argv.push(format!("--environment.address={}", server.local_addr())),
                "spin_stub" => argv.push("--environment.step_time_us=0".into()),
                _ => {}
            }
            let name = format!("{algo}+{env}");
            let result = parse_cli(&registry, &argv).and_then(|c| run(&registry, &c));
            match result {
                Ok(RunOutcome::Trained { .. }) => trained.push(name),
                Err(RunError::Incompatible(m))
                    if !tmp.path().join("default").join(&experiment).exists() =>
                {
                    rejected.push(format!("{name} ({} space)", m.axis))
                }
                Err(e) => broken.push(format!("{name}: {e}")),
                Ok(other) => broken.push(format!("{name}: unexpected {other:?}")),
            }
        }
    }
    outcome(
        broken.is_empty() && !trained.is_empty(),
        format!(
            "trained: {}; rejected at startup: {}{}",
            trained.join(", "),
            if rejected.is_empty() { "none".into() } else { rejected.join(", ") },
            if broken.is_empty() { String::new() } else { format!("; BROKEN: {}", broken.join("; ")) }
        ),
    )
}

// ---------------------------------------------------------------------------

fn main() -> ExitCode {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: Vec<(&str, &str, Box<dyn Fn() -> Outcome>)> = vec![
        ("ac01", "gradient correctness", Box::new(gradient_correctness)),
        ("ac02", "GAE oracle equivalence", Box::new(gae_equivalence)),
        ("ac03", "replay buffer model equivalence", Box::new(replay_equivalence)),
        ("ac04", "socket protocol", Box::new(socket_protocol)),
        ("ac05", "learning SAC pendulum", Box::new(|| learning("sac", "pendulum", SAC_STEPS, SAC_THRESHOLD))),
        ("ac06", "learning PPO run task", Box::new(|| learning("ppo", "run_task", PPO_STEPS, PPO_THRESHOLD))),
        ("ac07", "determinism", Box::new(determinism)),
        ("ac08", "logging parity", Box::new(logging_parity)),
        ("ac09", "bench methodology", Box::new(bench_methodology)),
        ("ac10", "runner registry contract", Box::new(registry_pairs)),
    ];
    let mut failures = 0;
    for (id, name, check) in &criteria {
        if !filter.is_empty() && !filter.iter().any(|f| id.contains(f.as_str()) || name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            outcome(false, format!("panicked: {msg}"))
        });
        if !result.ok {
            failures += 1;
        }
        println!(
            "[{}] {id} {name}: {} [{:.1} s]",
            if result.ok { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {} of {} criteria failed", failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
