use std::collections::{HashMap, VecDeque};
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, TrainConfig};
use super::curriculum::CurriculumState;
use super::episode::{collect_episode, prune_loops, run_episode, Episode, Selection};
use super::history::{sample_problem_biased, Draw, Solution, SolutionHistory, Transition};
use super::metrics::{EpochMetrics, EpochView, TrainOutcome};
use crate::envs::{EnvSpec, Problem};
use crate::error::{Error, Result};
use crate::neural::{AdamConfig, AdamState, EpisodeContext, LossKind, ModelConfig, Sample, Target, TreePolicy};
use crate::scalar::Scalar;

/// Fixed context seed for evaluating `problem_id`, so greedy evaluation of
/// a checkpoint is reproducible.
pub fn eval_ctx_seed(problem_id: &str) -> u64 {
    // FNV-1a
    problem_id
        .bytes()
        .fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ u64::from(b)).wrapping_mul(0x100_0000_01b3))
}

/// Greedy success of `policy` on each problem.
pub fn greedy_outcomes<T: Scalar>(env: &EnvSpec, policy: &TreePolicy<T>, problems: &[&Problem]) -> Result<Vec<bool>> {
    // greedy rollouts never touch the rng
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    problems
        .iter()
        .map(|p| {
            let e = run_episode(env, p, policy, eval_ctx_seed(&p.id), Selection::Greedy, &mut rng)?;
            Ok(e.solved())
        })
        .collect()
}

pub(crate) fn model_config(config: &TrainConfig, value_head: bool) -> ModelConfig {
    ModelConfig {
        n: config.n,
        hidden: config.hidden,
        activations: config.activations,
        value_head,
        ..ModelConfig::for_env(config.env)
    }
}

pub(crate) fn check_setup(config: &TrainConfig, env: &EnvSpec, problems: &[Problem]) -> Result<()> {
    config.validate()?;
    if env.kind != config.env {
        return Err(Error::Config(format!("config is for {}, environment is {}", config.env, env.kind)));
    }
    let mut ids = std::collections::HashSet::new();
    for p in problems {
        if !ids.insert(p.id.as_str()) {
            return Err(Error::Invalid(format!("duplicate problem id `{}`", p.id)));
        }
    }
    Ok(())
}

/// Where imitation examples come from.
enum Store {
    /// Per-problem k shortest, sampled problem-first.
    Stratified,
    /// Every solution found, oldest evicted first, sampled uniformly over
    /// transitions.
    Fifo {
        buffer: VecDeque<Solution>,
        transitions: usize,
        capacity: usize,
    },
}

/// Greedy evaluation on `sample` problems drawn with replacement from the
/// active set. Each distinct problem is rolled out once.
pub(crate) fn curriculum_eval<T: Scalar, R: Rng>(
    env: &EnvSpec,
    policy: &TreePolicy<T>,
    active: &[Problem],
    sample: usize,
    rng: &mut R,
) -> Result<f64> {
    if active.is_empty() || sample == 0 {
        return Ok(0.0);
    }
    let picks: Vec<usize> = (0..sample).map(|_| rng.random_range(0..active.len())).collect();
    let mut cache: HashMap<usize, bool> = HashMap::new();
    let mut solved = 0usize;
    for i in picks {
        let ok = match cache.get(&i) {
            Some(&ok) => ok,
            None => {
                let ok = greedy_outcomes(env, policy, &[&active[i]])?[0];
                cache.insert(i, ok);
                ok
            }
        };
        solved += usize::from(ok);
    }
    Ok(solved as f64 / sample as f64)
}

pub(crate) fn problem_map(problems: &[Problem]) -> HashMap<&str, &Problem> {
    problems.iter().map(|p| (p.id.as_str(), p)).collect()
}

/// Stratified shortest-solution imitation (3SIL).
pub fn train_3sil<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    train_imitation(config, env, problems, Store::Stratified, observer)
}

/// Behavioural cloning over a FIFO buffer of every solution found.
pub fn train_bc<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    let store = Store::Fifo {
        buffer: VecDeque::new(),
        transitions: 0,
        capacity: config.bc_buffer.max(1),
    };
    train_imitation(config, env, problems, store, observer)
}

fn train_imitation<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    mut store: Store,
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    check_setup(config, env, problems)?;
    let algorithm = match store {
        Store::Stratified => Algorithm::ThreeSil,
        Store::Fifo { .. } => Algorithm::Bc,
    };
    let env = env.clone().with_step_limit(config.step_limit);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = TreePolicy::<T>::new(model_config(config, false), rng.random());
    let mut opt = AdamState::for_policy(
        &policy,
        AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        },
    );
    // BC keeps a history only to know which problems are solved
    let mut history = SolutionHistory::new(if algorithm == Algorithm::ThreeSil { config.k } else { 1 });
    let mut curriculum = CurriculumState::new(problems.len(), config.block_size, config.advance_threshold);
    let by_id = problem_map(problems);
    let mut metrics = vec![];
    let start = Instant::now();

    for epoch in 0..config.max_epochs {
        if problems.is_empty() {
            break;
        }
        let active = &problems[..curriculum.active()];
        let episodes = if epoch == 0 { config.warmup_episodes } else { config.episodes_per_epoch };
        for _ in 0..episodes {
            let idx = if config.bias == 1.0 {
                rng.random_range(0..active.len())
            } else {
                sample_problem_biased(active, &history, config.bias, &mut rng)
            };
            let ctx_seed = rng.random();
            let mut e = collect_episode(&env, &active[idx], &policy, ctx_seed, config.noise, &mut rng)?;
            if config.prune {
                e = prune_loops(&e);
            }
            if !e.solved() {
                continue;
            }
            history.insert(&e);
            if let Store::Fifo {
                buffer,
                transitions,
                capacity,
            } = &mut store
            {
                push_fifo(buffer, transitions, *capacity, &e);
            }
        }

        let mut loss_sum = 0.0;
        let mut updates = 0;
        for _ in 0..config.batches_per_epoch {
            let draws: Vec<(u64, &Transition)> = match &store {
                Store::Stratified if history.is_empty() => break,
                Store::Stratified => history
                    .sample_stratified(config.batch_size, &mut rng)?
                    .into_iter()
                    .map(|d: Draw<'_>| (d.ctx_seed, d.step))
                    .collect(),
                Store::Fifo { transitions: 0, .. } => break,
                Store::Fifo {
                    buffer, transitions, ..
                } => sample_fifo(buffer, *transitions, config.batch_size, &mut rng),
            };
            if draws.is_empty() {
                break;
            }
            let ctxs: Vec<EpisodeContext<T>> = draws.iter().map(|(s, _)| EpisodeContext::new(*s, config.n)).collect();
            let batch: Vec<Sample<'_, T>> = draws
                .iter()
                .zip(&ctxs)
                .map(|((_, t), ctx)| Sample {
                    state: &t.state,
                    ctx,
                    mask: &t.mask,
                    target: Target::action(t.action),
                })
                .collect();
            let (loss, g) = policy.grad(&batch, LossKind::CrossEntropy)?;
            // a non-finite gradient skips this update and nothing else
            if opt.step(&mut policy, &g).is_ok() {
                loss_sum += loss.as_f64();
                updates += 1;
            }
        }

        let eval_success = curriculum_eval(&env, &policy, active, config.eval_sample, &mut rng)?;
        curriculum.observe(eval_success);
        let history_invalid = config.verify_history.then(|| history.count_invalid(&env, &by_id));
        let m = EpochMetrics {
            algorithm,
            epoch,
            level: curriculum.level,
            levels_completed: curriculum.completed,
            active: curriculum.active(),
            solved_count: history.solved_count(),
            eval_success,
            eval_sampled: None,
            loss: if updates > 0 { loss_sum / updates as f64 } else { 0.0 },
            updates,
            episodes,
            history_invalid,
            complete: curriculum.is_complete(),
            wall_time: start.elapsed().as_secs_f64(),
        };
        observer(EpochView {
            metrics: &m,
            policy: &policy,
            history: Some(&history),
        })?;
        let done = m.complete && config.stop_when_complete;
        metrics.push(m);
        if done {
            break;
        }
    }
    Ok(TrainOutcome {
        policy,
        history,
        metrics,
    })
}

fn push_fifo(buffer: &mut VecDeque<Solution>, transitions: &mut usize, capacity: usize, e: &Episode) {
    let mut h = SolutionHistory::new(1);
    if !h.insert(e) {
        return;
    }
    let sol = h.get(&e.problem_id)[0].clone();
    *transitions += sol.len();
    buffer.push_back(sol);
    while *transitions > capacity && buffer.len() > 1 {
        let old = buffer.pop_front().expect("nonempty");
        *transitions -= old.len();
    }
}

fn sample_fifo<'a, R: Rng>(
    buffer: &'a VecDeque<Solution>,
    transitions: usize,
    batch: usize,
    rng: &mut R,
) -> Vec<(u64, &'a Transition)> {
    (0..batch)
        .map(|_| {
            let mut j = rng.random_range(0..transitions);
            for s in buffer {
                if j < s.len() {
                    return (s.ctx_seed, &s.steps[j]);
                }
                j -= s.len();
            }
            unreachable!("index within transition count")
        })
        .collect()
}
