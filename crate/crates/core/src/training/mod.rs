//! Stratified shortest-solution imitation (3SIL) and the baselines it is
//! compared against: behavioural cloning, A2C, SIL-PAAC and PPO.

mod config;
mod curriculum;
mod episode;
mod history;
mod imitation;
mod metrics;
mod rl;

pub use config::{Algorithm, TrainConfig};
pub use curriculum::CurriculumState;
pub use episode::{
    collect_episode, discounted_returns, n_step_targets, prune_loops, run_episode, Episode, Selection,
};
pub use history::{
    sample_batch_stratified, sample_problem_biased, update_history, Draw, Solution, SolutionHistory, Transition,
};
pub use imitation::{eval_ctx_seed, greedy_outcomes, train_3sil, train_bc};
pub use metrics::{write_metrics_line, EpochMetrics, EpochView, TrainOutcome};
pub use rl::{a2c_targets, sil_paac_filter, train_a2c, train_ppo, train_sil_paac, AdvTransition};

use crate::envs::{EnvSpec, Problem};
use crate::error::Result;
use crate::scalar::Scalar;

/// Runs the trainer named by `config.algorithm`.
pub fn train<T: Scalar>(
    config: &TrainConfig,
    env: &EnvSpec,
    problems: &[Problem],
    observer: &mut dyn FnMut(EpochView<'_, T>) -> Result<()>,
) -> Result<TrainOutcome<T>> {
    match config.algorithm {
        Algorithm::ThreeSil => train_3sil(config, env, problems, observer),
        Algorithm::Bc => train_bc(config, env, problems, observer),
        Algorithm::A2c => train_a2c(config, env, problems, observer),
        Algorithm::SilPaac => train_sil_paac(config, env, problems, observer),
        Algorithm::Ppo => train_ppo(config, env, problems, observer),
    }
}
