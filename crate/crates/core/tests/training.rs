mod common;

use std::collections::{HashMap, HashSet};

use eqprove_core::envs::{EnvKind, EnvSpec, Outcome, Problem};
use eqprove_core::harness::generate_ra;
use eqprove_core::neural::{EpisodeContext, LossKind, TreePolicy};
use eqprove_core::term::parse_term;
use eqprove_core::training::{
    a2c_targets, collect_episode, n_step_targets, prune_loops, run_episode, sample_batch_stratified,
    sample_problem_biased, sil_paac_filter, train, update_history, AdvTransition, Algorithm, Episode, EpochMetrics,
    Selection, SolutionHistory, TrainConfig,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

fn ra_problem(id: &str, text: &str) -> Problem {
    Problem::new(id, parse_term(text, &EnvKind::Ra.signature()).unwrap())
}

fn tiny_policy(env: EnvKind, value_head: bool, seed: u64) -> TreePolicy<f64> {
    let mut c = eqprove_core::neural::ModelConfig {
        n: 8,
        hidden: 12,
        ..eqprove_core::neural::ModelConfig::for_env(env)
    };
    c.value_head = value_head;
    TreePolicy::new(c, seed)
}

/// Solved fake episode of `len` steps whose states are all the start state.
fn solved_episode(env: &EnvSpec, id: &str, len: usize, tag: u64) -> Episode {
    let s = env.reset(&ra_problem(id, "(S 0)")).unwrap();
    Episode {
        problem_id: id.into(),
        ctx_seed: tag,
        states: vec![s; len + 1],
        actions: vec![0; len],
        masks: vec![vec![true; 9]; len],
        probs: vec![1.0; len],
        rewards: vec![0.0; len],
        outcome: Outcome::Solved,
    }
}

fn chi_square_p(counts: &[f64], expected: &[f64]) -> f64 {
    let stat: f64 = counts.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let dist = ChiSquared::new((counts.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn full_noise_is_uniform_over_legal_actions() {
    let env = EnvSpec::new(EnvKind::Ra);
    let policy = tiny_policy(EnvKind::Ra, false, 1);
    let p = ra_problem("p", "(+ (S 0) (S 0))");
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = env.reset(&p).unwrap();
    let legal = env.legal_actions(&start);
    let mut counts = vec![0.0; legal.len()];
    for i in 0..3000 {
        let e = collect_episode(&env, &p, &policy, i, 1.0, &mut rng).unwrap();
        for (s, (m, &q)) in e.states.iter().zip(e.masks.iter().zip(&e.probs)) {
            let k = m.iter().filter(|&&b| b).count();
            assert_eq!(q, 1.0 / k as f64);
            assert_eq!(env.legal_actions(s).len(), k);
        }
        counts[legal.iter().position(|&a| a == e.actions[0]).unwrap()] += 1.0;
    }
    let expected = vec![3000.0 / legal.len() as f64; legal.len()];
    assert!(chi_square_p(&counts, &expected) > 0.01, "{counts:?}");
}

/// From `S(0) + 0` at the root four actions are legal and one of them,
/// `x + 0 -> x`, solves it, so a uniform rollout succeeds with
/// probability at least 1/4. Later steps can also solve it, but `x -> x + 0`
/// is legal everywhere and grows the term, so most walks drift away.
#[test]
fn random_rollouts_on_a_trivial_problem() {
    let env = EnvSpec::new(EnvKind::Ra);
    let policy = tiny_policy(EnvKind::Ra, false, 1);
    let p = ra_problem("p", "(+ (S 0) 0)");
    assert_eq!(env.legal_actions(&env.reset(&p).unwrap()).len(), 4);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut solved = 0;
    let mut first_step = 0;
    for i in 0..1000 {
        let e = collect_episode(&env, &p, &policy, i, 1.0, &mut rng).unwrap();
        if e.solved() {
            solved += 1;
            first_step += usize::from(e.len() == 1);
            assert_eq!(*e.rewards.last().unwrap(), 1.0);
            assert!(e.rewards[..e.len() - 1].iter().all(|&r| r == 0.0));
            assert!(env.is_solved(e.final_state()));
        } else {
            assert_eq!(e.outcome, Outcome::StepLimit);
        }
    }
    // binomial(1000, 1/4) is within 4 standard deviations of 250
    assert!((first_step as f64 - 250.0).abs() < 4.0 * (1000.0f64 * 0.25 * 0.75).sqrt(), "{first_step}");
    assert!(solved >= first_step);
}

fn position_key(e: &Episode) -> Vec<(String, String)> {
    e.states.iter().map(|s| (s.term.to_string(), s.cursor.to_string())).collect()
}

#[test]
fn injected_three_cycles_are_cut() {
    let env = EnvSpec::new(EnvKind::Ra);
    let set = generate_ra(30, 2, 8).unwrap();
    let mut injected = 0;
    for entry in &set.entries {
        let p = &entry.problem;
        let sol = entry.solution.clone().unwrap();
        // a state on the oracle path with a closed walk of length 3
        let mut s = env.reset(p).unwrap();
        let mut found = None;
        'search: for (i, &next) in sol.iter().enumerate() {
            for a in env.legal_actions(&s) {
                let s1 = env.step(&s, a).unwrap().next;
                if env.is_solved(&s1) {
                    continue;
                }
                for b in env.legal_actions(&s1) {
                    let s2 = env.step(&s1, b).unwrap().next;
                    if env.is_solved(&s2) || s2.same_position(&s) || s2.same_position(&s1) {
                        continue;
                    }
                    for c in env.legal_actions(&s2) {
                        if env.step(&s2, c).unwrap().next.same_position(&s) && !s1.same_position(&s) {
                            found = Some((i, [a, b, c]));
                            break 'search;
                        }
                    }
                }
            }
            s = env.step(&s, next).unwrap().next;
        }
        let Some((i, cycle)) = found else { continue };
        let mut actions = sol[..i].to_vec();
        actions.extend(cycle);
        actions.extend(&sol[i..]);
        let policy = tiny_policy(EnvKind::Ra, false, 0);
        let e = replay_episode(&env, p, &actions, &policy);
        assert!(e.solved());
        let pruned = prune_loops(&e);
        assert_eq!(pruned.len(), e.len() - 3);
        assert_eq!(pruned.actions, prune_loops(&replay_episode(&env, p, &sol, &policy)).actions);
        let r = env.replay(p, &pruned.actions).unwrap();
        assert!(env.is_solved(&r.next));
        injected += 1;
    }
    assert!(injected >= 5, "only {injected} problems had a 3-cycle");
}

/// An episode record of a fixed action sequence.
fn replay_episode(env: &EnvSpec, p: &Problem, actions: &[usize], policy: &TreePolicy<f64>) -> Episode {
    let mut e = run_episode(env, p, policy, 0, Selection::Greedy, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let mut s = env.reset(p).unwrap();
    e.states = vec![s.clone()];
    e.actions.clear();
    e.masks.clear();
    e.probs.clear();
    e.rewards.clear();
    for &a in actions {
        let r = env.step(&s, a).unwrap();
        e.actions.push(a);
        e.masks.push(env.action_mask(&s));
        e.probs.push(1.0);
        e.rewards.push(r.reward);
        e.outcome = r.outcome;
        s = r.next;
        e.states.push(s.clone());
    }
    e
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn pruned_random_episodes_are_loop_free_and_end_in_place(seed in any::<u64>(), idx in 0usize..20) {
        let env = EnvSpec::new(EnvKind::Ra).with_step_limit(40);
        let set = generate_ra(20, 2, 99).unwrap();
        let p = &set.entries[idx].problem;
        let policy = tiny_policy(EnvKind::Ra, false, seed);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let e = collect_episode(&env, p, &policy, seed, 0.5, &mut rng).unwrap();
        let pr = prune_loops(&e);
        let keys = position_key(&pr);
        let distinct: HashSet<_> = keys.iter().collect();
        prop_assert_eq!(distinct.len(), keys.len());
        prop_assert!(pr.final_state().same_position(e.final_state()));
        prop_assert!(pr.len() <= e.len());
        // the kept actions replay from the start to the same final position
        let mut s = env.reset(p).unwrap();
        for (i, &a) in pr.actions.iter().enumerate() {
            prop_assert!(s.same_position(&pr.states[i]));
            s = env.step(&s, a).unwrap().next;
        }
        prop_assert!(s.same_position(e.final_state()));
    }

    #[test]
    fn history_keeps_the_k_smallest_lengths(k in 1usize..4, lens in prop::collection::vec(1usize..30, 1..25)) {
        let env = EnvSpec::new(EnvKind::Ra);
        let mut h = SolutionHistory::new(k);
        for (i, &l) in lens.iter().enumerate() {
            update_history(&mut h, &solved_episode(&env, "p", l, i as u64));
        }
        let mut want: Vec<(usize, usize)> = lens.iter().copied().zip(0..).collect();
        want.sort();
        want.truncate(k);
        let got: Vec<(usize, usize)> = h.get("p").iter().map(|s| (s.len(), s.ctx_seed as usize)).collect();
        prop_assert_eq!(got, want);
    }
}

#[test]
fn stratified_sampling_is_uniform_over_problems() {
    let env = EnvSpec::new(EnvKind::Ra);
    let mut h = SolutionHistory::new(1);
    h.insert(&solved_episode(&env, "p1", 2, 0));
    h.insert(&solved_episode(&env, "p2", 100, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let draws = sample_batch_stratified(&h, 10_000, &mut rng).unwrap();
    let p1 = draws.iter().filter(|d| d.problem == "p1").count() as f64;
    assert!(chi_square_p(&[p1, 10_000.0 - p1], &[5000.0, 5000.0]) > 0.01, "{p1}");

    let single = {
        let mut h = SolutionHistory::new(1);
        h.insert(&solved_episode(&env, "only", 3, 0));
        h
    };
    assert!(sample_batch_stratified(&single, 50, &mut rng).unwrap().iter().all(|d| d.problem == "only"));
    assert!(sample_batch_stratified(&h, 0, &mut rng).unwrap().is_empty());
    assert!(sample_batch_stratified(&SolutionHistory::new(1), 1, &mut rng).is_err());
}

#[test]
fn stratified_sampling_ignores_solution_lengths() {
    let env = EnvSpec::new(EnvKind::Ra);
    let mut h = SolutionHistory::new(2);
    let lens = [1usize, 3, 10, 40, 90];
    for (i, &l) in lens.iter().enumerate() {
        h.insert(&solved_episode(&env, &format!("p{i}"), l, 0));
        h.insert(&solved_episode(&env, &format!("p{i}"), l + 5, 1));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let draws = sample_batch_stratified(&h, 20_000, &mut rng).unwrap();
    let mut counts: HashMap<&str, f64> = HashMap::new();
    for d in &draws {
        *counts.entry(d.problem).or_default() += 1.0;
    }
    let obs: Vec<f64> = (0..lens.len()).map(|i| counts[format!("p{i}").as_str()]).collect();
    assert!(chi_square_p(&obs, &[4000.0; 5]) > 0.01, "{obs:?}");
}

#[test]
fn biased_problem_draws() {
    let env = EnvSpec::new(EnvKind::Ra);
    let problems = vec![ra_problem("solved", "(S 0)"), ra_problem("open", "(S 0)")];
    let mut h = SolutionHistory::new(1);
    h.insert(&solved_episode(&env, "solved", 1, 0));
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let freq = |h: &SolutionHistory, bias: f64, rng: &mut ChaCha8Rng| {
        (0..10_000).filter(|_| sample_problem_biased(&problems, h, bias, rng) == 1).count() as f64 / 1e4
    };
    assert!((freq(&h, 5.0, &mut rng) - 5.0 / 6.0).abs() <= 0.02);
    assert!((freq(&h, 1.0, &mut rng) - 0.5).abs() <= 0.02);
    h.insert(&solved_episode(&env, "open", 1, 0));
    assert!((freq(&h, 5.0, &mut rng) - 0.5).abs() <= 0.02);
}

/// Independent return oracle: a literal sum over the window.
fn brute_force_target(r: &[f64], v: &[f64], bootstrap: f64, gamma: f64, n: usize, t: usize) -> f64 {
    let len = r.len();
    let mut g = 0.0;
    let mut gamma_i = 1.0;
    let mut i = 0;
    while i < n && t + i < len {
        g += gamma_i * r[t + i];
        gamma_i *= gamma;
        i += 1;
    }
    let tail = if t + n < len { v[t + n] } else { bootstrap };
    g + gamma_i * tail
}

#[test]
fn n_step_targets_match_brute_force_sums() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..1000 {
        let len = rng.random_range(1..40);
        let r: Vec<f64> = (0..len).map(|_| if rng.random_bool(0.2) { rng.random() } else { 0.0 }).collect();
        let v: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
        let boot = if rng.random_bool(0.5) { 0.0 } else { rng.random() };
        let n = rng.random_range(1..50);
        let got = n_step_targets(&r, &v, boot, 0.99, n);
        for t in 0..len {
            assert_eq!(got[t], brute_force_target(&r, &v, boot, 0.99, n, t));
        }
    }
    // hand-built three steps, n = 2
    let got = n_step_targets(&[0.5, 0.25, 1.0], &[0.1, 0.2, 0.3], 0.0, 0.99, 2);
    assert_eq!(got[0], 0.5 + 0.99 * 0.25 + 0.99 * 0.99 * 0.3);
    // terminal reward, whole-episode window, no discount
    assert_eq!(n_step_targets(&[0.0, 0.0, 0.0, 1.0], &[0.0; 4], 0.0, 1.0, 4), vec![1.0; 4]);
}

#[test]
fn a2c_targets_use_the_critic() {
    let env = EnvSpec::new(EnvKind::Ra);
    let policy = tiny_policy(EnvKind::Ra, true, 3);
    let p = ra_problem("p", "(+ (S (S 0)) (S 0))");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for seed in 0..20 {
        let e = collect_episode(&env, &p, &policy, seed, 0.3, &mut rng).unwrap();
        let ctx = EpisodeContext::new(e.ctx_seed, policy.config().n);
        let values: Vec<f64> = e.states.iter().map(|s| policy.value(s, &ctx).unwrap()).collect();
        let boot = if e.solved() { 0.0 } else { values[e.len()] };
        let targets = a2c_targets(&policy, &e, 0.99, 5).unwrap();
        for (t, x) in targets.iter().enumerate() {
            assert_eq!(x.ret, brute_force_target(&e.rewards, &values[..e.len()], boot, 0.99, 5, t));
            assert_eq!(x.advantage, x.ret - values[t]);
            assert_eq!(x.old_prob, e.probs[t]);
        }
    }
    assert!(a2c_targets(&tiny_policy(EnvKind::Ra, false, 3), &collect_episode(&env, &p, &policy, 0, 0.0, &mut rng).unwrap(), 0.99, 5).is_err());
}

#[test]
fn zero_advantage_leaves_only_the_value_loss() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let policy = tiny_policy(EnvKind::Ra, true, 5);
    let mut batch = common::random_batch(EnvKind::Ra, 8, 9, 6, &mut rng);
    for s in &mut batch {
        s.target.advantage = 0.0;
    }
    let view: Vec<_> = batch.iter().map(|s| s.view()).collect();
    let a2c = policy.loss(&view, LossKind::A2c).unwrap();
    let mse = policy.loss(&view, LossKind::ValueMse).unwrap();
    assert!((a2c - mse).abs() < 1e-15);
}

fn adv(a: f64) -> AdvTransition {
    let env = EnvSpec::new(EnvKind::Ra);
    AdvTransition {
        state: env.reset(&ra_problem("p", "0")).unwrap(),
        ctx_seed: 0,
        mask: vec![true; 9],
        action: 0,
        ret: 0.0,
        advantage: a,
        old_prob: 1.0,
    }
}

#[test]
fn sil_filter_keeps_positive_advantages() {
    let kept = sil_paac_filter(vec![adv(-1.0), adv(0.0), adv(2.0)]);
    assert_eq!(kept.len(), 1);
    assert_eq!(kept[0].advantage, 2.0);
    assert!(sil_paac_filter(vec![adv(-1.0), adv(-0.5)]).is_empty());
}

/// Literal two-branch clipped objective plus the halved value error, averaged.
fn ppo_reference(policy: &TreePolicy<f64>, batch: &[common::OwnedSample], clip: f64) -> f64 {
    let mut total = 0.0;
    for s in batch {
        let out = policy.forward(&s.state, &s.ctx, &s.mask).unwrap();
        let v = policy.value(&s.state, &s.ctx).unwrap();
        let t = &s.target;
        let rho = out.probs[t.action] / t.old_prob;
        let unclipped = rho * t.advantage;
        let r = if rho < 1.0 - clip {
            1.0 - clip
        } else if rho > 1.0 + clip {
            1.0 + clip
        } else {
            rho
        };
        let clipped = r * t.advantage;
        let surrogate = if unclipped < clipped { unclipped } else { clipped };
        total += -surrogate + 0.5 * (t.ret - v) * (t.ret - v);
    }
    total / batch.len() as f64
}

#[test]
fn ppo_loss_matches_a_straight_line_reference() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for case in 0..1000 {
        let env = [EnvKind::Ra, EnvKind::Poly, EnvKind::Aim][case % 3];
        let policy = tiny_policy(env, true, case as u64);
        let batch = common::random_batch(env, 8, env.num_actions(), 1 + case % 5, &mut rng);
        let view: Vec<_> = batch.iter().map(|s| s.view()).collect();
        let got = policy.loss(&view, LossKind::ppo()).unwrap();
        let want = ppo_reference(&policy, &batch, 0.2);
        assert!((got - want).abs() <= 1e-12, "case {case}: {got} vs {want}");
    }
}

#[test]
fn ppo_clip_arithmetic() {
    let env = EnvSpec::new(EnvKind::Ra);
    let policy = tiny_policy(EnvKind::Ra, true, 1);
    let s = env.reset(&ra_problem("p", "(+ 0 0)")).unwrap();
    let ctx = EpisodeContext::new(0, 8);
    let mask = env.action_mask(&s);
    let out = policy.forward(&s, &ctx, &mask).unwrap();
    let v = policy.value(&s, &ctx).unwrap();
    let a = out.greedy();
    let p = out.probs[a];
    let loss = |old: f64, adv: f64| {
        let sample = eqprove_core::neural::Sample {
            state: &s,
            ctx: &ctx,
            mask: &mask,
            target: eqprove_core::neural::Target::ppo(a, v, adv, old),
        };
        policy.loss(&[sample], LossKind::ppo()).unwrap()
    };
    // rho = 1: both branches give A
    assert!((loss(p, 0.7) + 0.7).abs() < 1e-12);
    // rho = 2 with positive advantage is clipped to 1.2
    assert!((loss(p / 2.0, 0.7) + 1.2 * 0.7).abs() < 1e-12);
    let sample = eqprove_core::neural::Sample {
        state: &s,
        ctx: &ctx,
        mask: &mask,
        target: eqprove_core::neural::Target::ppo(a, v, 1.0, 0.0),
    };
    assert!(policy.loss(&[sample], LossKind::ppo()).is_err());
}

fn tiny_config(algorithm: Algorithm, seed: u64) -> TrainConfig {
    TrainConfig {
        algorithm,
        seed,
        warmup_episodes: 30,
        episodes_per_epoch: 20,
        batches_per_epoch: 5,
        batch_size: 8,
        max_epochs: 3,
        block_size: 5,
        eval_sample: 10,
        verify_history: true,
        n: 8,
        hidden: 12,
        ppo_update_every: 100,
        sil_transitions: 64,
        ..TrainConfig::for_env(EnvKind::Ra)
    }
}

fn strip_time(mut m: Vec<EpochMetrics>) -> Vec<EpochMetrics> {
    for x in &mut m {
        x.wall_time = 0.0;
    }
    m
}

#[test]
fn every_trainer_runs_and_is_deterministic() {
    let env = EnvSpec::new(EnvKind::Ra);
    let problems = generate_ra(10, 2, 6).unwrap().problems();
    for algorithm in [Algorithm::ThreeSil, Algorithm::Bc, Algorithm::A2c, Algorithm::SilPaac, Algorithm::Ppo] {
        let config = tiny_config(algorithm, 4);
        let mut seen = 0;
        let a = train::<f64>(&config, &env, &problems, &mut |v| {
            seen += 1;
            assert_eq!(v.metrics.history_invalid, Some(0));
            Ok(())
        })
        .unwrap();
        assert_eq!(seen, a.metrics.len());
        assert!(!a.metrics.is_empty() && a.metrics.len() <= 3);
        assert!(a.metrics.iter().all(|m| m.algorithm == algorithm));
        let b = train::<f64>(&config, &env, &problems, &mut |_| Ok(())).unwrap();
        assert_eq!(strip_time(a.metrics.clone()), strip_time(b.metrics), "{algorithm:?}");
        assert_eq!(a.policy.params(), b.policy.params());
    }
}

#[test]
fn k_one_and_two_both_keep_valid_histories() {
    let env = EnvSpec::new(EnvKind::Ra);
    let problems = generate_ra(10, 2, 6).unwrap().problems();
    let by_id: HashMap<&str, &Problem> = problems.iter().map(|p| (p.id.as_str(), p)).collect();
    for k in [1, 2] {
        let config = TrainConfig {
            k,
            ..tiny_config(Algorithm::ThreeSil, 9)
        };
        let out = train::<f64>(&config, &env, &problems, &mut |_| Ok(())).unwrap();
        assert!(out.history.solved_count() > 0);
        assert_eq!(out.history.count_invalid(&env, &by_id), 0);
        for (_, sols) in out.history.iter() {
            assert!(sols.len() <= k);
            assert!(sols.windows(2).all(|w| w[0].len() <= w[1].len()));
        }
    }
}

#[test]
fn stored_minimum_never_grows() {
    let env = EnvSpec::new(EnvKind::Ra);
    let problems = generate_ra(10, 2, 6).unwrap().problems();
    let mut best: HashMap<String, usize> = HashMap::new();
    let config = TrainConfig {
        max_epochs: 4,
        ..tiny_config(Algorithm::ThreeSil, 2)
    };
    train::<f64>(&config, &env, &problems, &mut |v| {
        let h = v.history.expect("3sil exposes its history");
        for (id, sols) in h.iter() {
            let l = sols[0].len();
            if let Some(&old) = best.get(id) {
                assert!(l <= old);
            }
            best.insert(id.to_string(), l);
        }
        Ok(())
    })
    .unwrap();
    assert!(!best.is_empty());
}
