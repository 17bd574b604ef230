//! Actor-critic baselines: A2C with n-step targets, A2C plus positive
//! advantage self-imitation (SIL-PAAC), and clipped PPO.

use std::collections::VecDeque;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Algorithm, TrainConfig};
use super::curriculum::CurriculumState;
use super::episode::{collect_episode, discounted_returns, n_step_targets, run_episode, Episode, Selection};
use super::history::{sample_problem_biased, SolutionHistory};
use super::imitation::{check_setup, curriculum_eval, eval_ctx_seed, model_config, problem_map};
use super::metrics::{EpochMetrics, EpochView, TrainOutcome};
use crate::envs::{EnvSpec, EnvState, Problem};
use crate::error::Result;
use crate::neural::{AdamConfig, AdamState, EpisodeContext, LossKind, Sample, Target, TreePolicy};
use crate::scalar::Scalar;

/// A transition with its training targets.
#[derive(Clone, Debug, PartialEq)]
pub struct AdvTransition {
    pub state: EnvState,
    pub ctx_seed: u64,
    pub mask: Vec<bool>,
    pub action: usize,
    /// Return target for the value head.
    pub ret: f64,
    pub advantage: f64,
    /// Behaviour-policy probability of `action`.
    pub old_prob: f64,
}

/// Keeps only the transitions with strictly positive advantage.
pub fn sil_paac_filter(batch: Vec<AdvTransition>) -> Vec<AdvTransition> {
    batch.into_iter().filter(|t| t.advantage > 0.0).collect()
}

fn values_of<T: Scalar>(policy: &TreePolicy<T>, states: &[EnvState], ctx: &EpisodeContext<T>) -> Result<Vec<f64>> {
    states
        .iter()
        .map(|s| Ok(policy.value(s, ctx)?.as_f64()))
        .collect()
}

/// n-step actor-critic targets for one episode under the current critic.
/// A solved episode bootstraps from 0, a truncated one from the value of
/// its last state.
pub fn a2c_targets<T: Scalar>(
    policy: &TreePolicy<T>,
    e: &Episode,
    gamma: f64,
    n: usize,
) -> Result<Vec<AdvTransition>> {
    let ctx = EpisodeContext::new(e.ctx_seed, policy.config().n);
    let values = values_of(policy, &e.states, &ctx)?;
    let bootstrap = if e.solved() { 0.0 } else { values[e.len()] };
    let targets = n_step_targets(&e.rewards, &values[..e.len()], bootstrap, gamma, n);
    Ok((0..e.len())
        .map(|t| AdvTransition {
            state: e.states[t].clone(),
            ctx_seed: e.ctx_seed,
            mask: e.masks[t].clone(),
            action: e.actions[t],
            ret: targets[t],
            advantage: targets[t] - values[t],
            old_prob: e.probs[t],
        })
        .collect())
}

/// Mean loss and one optimizer step over `batch`.
fn update<T: Scalar>(
    policy: &mut TreePolicy<T>,
    opt: &mut AdamState<T>,
    batch: &[AdvTransition],
    kind: LossKind,
) -> Result<Option<f64>> {
    if batch.is_empty() {
        return Ok(None);
    }
    let n = policy.config().n;
    let ctxs: Vec<EpisodeContext<T>> = batch.iter().map(|t| EpisodeContext::new(t.ctx_seed, n)).collect();
    let samples: Vec<Sample<'_, T>> = batch
        .iter()
        .zip(&ctxs)
        .map(|(t, ctx)| Sample {
            state: &t.state,
            ctx,
            mask: &t.mask,
            target: Target::ppo(
                t.action,
                T::from_f64_lossy(t.ret),
                T::from_f64_lossy(t.advantage),
                T::from_f64_lossy(t.old_prob),
            ),
        })
        .collect();
    let (loss, g) = policy.grad(&samples, kind)?;
    Ok(opt.step(policy, &g).ok().map(|_| loss.as_f64()))
}

/// Proportional prioritized replay over single transitions, oldest evicted
/// first.
struct PriorityBuffer {
    items: VecDeque<(AdvTransition, f64)>,
    capacity: usize,
    exponent: f64,
}

impl PriorityBuffer {
    fn push(&mut self, t: AdvTransition, priority: f64) {
        self.items.push_back((t, priority));
        while self.items.len() > self.capacity {
            self.items.pop_front();
        }
    }

    fn sample<R: Rng>(&self, batch: usize, rng: &mut R) -> Vec<usize> {
        let w: Vec<f64> = self.items.iter().map(|(_, p)| (p + 1e-6).powf(self.exponent)).collect();
        let total: f64 = w.iter().sum();
        (0..batch)
            .map(|_| {
                let mut u = rng.random::<f64>() * total;
                for (i, wi) in w.iter().enumerate() {
                    u -= wi;
                    if u < 0.0 {
                        return i;
                    }
                }
                w.len() - 1
            })
            .collect()
    }
}

/// A2C.
pub fn train_a2c<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    train_actor_critic(config, env, problems, Algorithm::A2c, observer)
}

/// A2C with a positive-advantage self-imitation step each epoch.
pub fn train_sil_paac<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    train_actor_critic(config, env, problems, Algorithm::SilPaac, observer)
}

/// Clipped PPO.
pub fn train_ppo<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    train_actor_critic(config, env, problems, Algorithm::Ppo, observer)
}

fn train_actor_critic<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    algorithm: Algorithm,
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    check_setup(config, env, problems)?;
    let env = env.clone().with_step_limit(config.step_limit);
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut policy = TreePolicy::<T>::new(model_config(config, true), rng.random());
    let lr = if algorithm == Algorithm::Ppo { config.ppo_lr } else { config.lr };
    let mut opt = AdamState::for_policy(&policy, AdamConfig { lr, ..AdamConfig::default() });
    let mut history = SolutionHistory::new(1);
    let mut curriculum = CurriculumState::new(problems.len(), config.block_size, config.advance_threshold);
    let by_id = problem_map(problems);
    let mut sil = PriorityBuffer {
        items: VecDeque::new(),
        capacity: config.sil_buffer.max(1),
        exponent: config.sil_exponent,
    };
    let mut rollout: Vec<AdvTransition> = vec![];
    let mut metrics = vec![];
    let start = Instant::now();

    for epoch in 0..config.max_epochs {
        if problems.is_empty() {
            break;
        }
        let active = &problems[..curriculum.active()];
        let episodes = if epoch == 0 { config.warmup_episodes } else { config.episodes_per_epoch };
        let mut loss_sum = 0.0;
        let mut updates = 0usize;
        let mut record = |l: Option<f64>| {
            if let Some(l) = l {
                loss_sum += l;
                updates += 1;
            }
        };
        for _ in 0..episodes {
            let idx = if config.bias == 1.0 {
                rng.random_range(0..active.len())
            } else {
                sample_problem_biased(active, &history, config.bias, &mut rng)
            };
            let e = collect_episode(&env, &active[idx], &policy, rng.random(), 0.0, &mut rng)?;
            history.insert(&e);
            match algorithm {
                Algorithm::Ppo => {
                    let returns = discounted_returns(&e.rewards, config.gamma);
                    for t in 0..e.len() {
                        rollout.push(AdvTransition {
                            state: e.states[t].clone(),
                            ctx_seed: e.ctx_seed,
                            mask: e.masks[t].clone(),
                            action: e.actions[t],
                            ret: returns[t],
                            advantage: 0.0,
                            old_prob: e.probs[t],
                        });
                    }
                    if rollout.len() >= config.ppo_update_every {
                        for l in ppo_update(&mut policy, &mut opt, &mut rollout, config)? {
                            record(Some(l));
                        }
                    }
                }
                _ => {
                    let batch = a2c_targets(&policy, &e, config.gamma, config.n_step)?;
                    record(update(&mut policy, &mut opt, &batch, LossKind::A2c)?);
                    if algorithm == Algorithm::SilPaac {
                        let returns = discounted_returns(&e.rewards, config.gamma);
                        for (mut t, r) in batch.into_iter().zip(returns) {
                            t.ret = r;
                            let ctx = EpisodeContext::new(t.ctx_seed, config.n);
                            let v = policy.value(&t.state, &ctx)?.as_f64();
                            sil.push(t, (r - v).max(0.0));
                        }
                    }
                }
            }
        }
        if algorithm == Algorithm::SilPaac && !sil.items.is_empty() {
            let batches = config.sil_transitions / config.batch_size.max(1);
            let kind = LossKind::SilPaac {
                value_weight: config.sil_value_weight,
            };
            for _ in 0..batches {
                let picks = sil.sample(config.batch_size, &mut rng);
                let mut batch = Vec::with_capacity(picks.len());
                for &i in &picks {
                    let (t, _) = &sil.items[i];
                    let ctx = EpisodeContext::new(t.ctx_seed, config.n);
                    let v = policy.value(&t.state, &ctx)?.as_f64();
                    let adv = t.ret - v;
                    sil.items[i].1 = adv.max(0.0);
                    batch.push(AdvTransition {
                        advantage: adv,
                        ..sil.items[i].0.clone()
                    });
                }
                let kept = sil_paac_filter(batch);
                record(update(&mut policy, &mut opt, &kept, kind)?);
            }
        }

        let eval_success = curriculum_eval(&env, &policy, active, config.eval_sample, &mut rng)?;
        let eval_sampled = sampled_eval(&env, &policy, active, config.eval_sample, config.noise, &mut rng)?;
        curriculum.observe(eval_success.max(eval_sampled));
        let history_invalid = config.verify_history.then(|| history.count_invalid(&env, &by_id));
        let m = EpochMetrics {
            algorithm,
            epoch,
            level: curriculum.level,
            levels_completed: curriculum.completed,
            active: curriculum.active(),
            solved_count: history.solved_count(),
            eval_success,
            eval_sampled: Some(eval_sampled),
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

/// `ppo_epochs` full-batch passes over the rollout with advantages from
/// the critic before the first pass. Empties the rollout.
fn ppo_update<T: Scalar>(
    policy: &mut TreePolicy<T>,
    opt: &mut AdamState<T>,
    rollout: &mut Vec<AdvTransition>,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut batch = std::mem::take(rollout);
    for t in &mut batch {
        let ctx = EpisodeContext::new(t.ctx_seed, config.n);
        t.advantage = t.ret - policy.value(&t.state, &ctx)?.as_f64();
    }
    let kind = LossKind::PpoClip { clip: config.ppo_clip };
    let mut losses = vec![];
    for _ in 0..config.ppo_epochs {
        if let Some(l) = update(policy, opt, &batch, kind)? {
            losses.push(l);
        }
    }
    Ok(losses)
}

/// One noisy sampled rollout per drawn problem.
fn sampled_eval<T: Scalar, R: Rng>(
    env: &EnvSpec,
    policy: &TreePolicy<T>,
    active: &[Problem],
    sample: usize,
    noise: f64,
    rng: &mut R,
) -> Result<f64> {
    if active.is_empty() || sample == 0 {
        return Ok(0.0);
    }
    let mut solved = 0;
    for _ in 0..sample {
        let p = &active[rng.random_range(0..active.len())];
        let e = run_episode(env, p, policy, eval_ctx_seed(&p.id), Selection::Sample { noise }, rng)?;
        solved += usize::from(e.solved());
    }
    Ok(solved as f64 / sample as f64)
}
