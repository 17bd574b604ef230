use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use eqprove_core::envs::{EnvKind, EnvSpec, Problem};
use eqprove_core::error::EnvError;
use eqprove_core::harness::{
    emit_lemmas, evaluate, generate_aim, generate_poly, generate_ra, verify_lemma, EvalMode, ProblemSet,
};
use eqprove_core::neural::{checkpoint_path, load_checkpoint, save_checkpoint, CheckpointMeta};
use eqprove_core::term::parse_term;
use eqprove_core::training::{train, write_metrics_line, Algorithm, TrainConfig};
use eqprove_core::{Error, TreePolicy};

#[derive(Parser)]
#[command(name = "eqprove", version, about = "Equational rewriting environments and tree-network provers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a problem file, sorted by oracle difficulty.
    Gen(GenArgs),
    /// Train a policy; writes a checkpoint per epoch and a metrics stream.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a problem file and print a JSON report.
    Eval(EvalArgs),
    /// Run a checkpoint on one problem and print the actions it took.
    Solve(SolveArgs),
    /// Rewrite AIM goals with a checkpoint and print the resulting lemmas.
    Lemmas(LemmaArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long)]
    env: EnvKind,
    #[arg(long, default_value_t = 100)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Nesting of binary operators (RA and POLY).
    #[arg(long, default_value_t = 3)]
    max_depth: usize,
    /// Largest number allowed in POLY goals.
    #[arg(long, default_value_t = 100)]
    value_cap: u64,
    /// Largest number of scrambling rewrites (AIM).
    #[arg(long, default_value_t = 4)]
    scramble_depth: usize,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    env: EnvKind,
    /// TOML file of `key = value` overrides of the env's defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Problem file; a generated default set is used when omitted.
    #[arg(long)]
    problems: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    algorithm: Option<Algorithm>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Directory for checkpoints and metrics.
    #[arg(long, default_value = "run")]
    out: PathBuf,
}

#[derive(Copy, Clone, ValueEnum)]
enum ModeArg {
    Greedy,
    Budget,
}

#[derive(Args)]
struct EvalArgs {
    /// Defaults to the checkpoint's environment.
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    problems: PathBuf,
    #[arg(long, value_enum, default_value = "greedy")]
    mode: ModeArg,
    /// Per-problem wall-clock budget of `--mode budget`.
    #[arg(long, default_value_t = 60.0)]
    seconds: f64,
    #[arg(long)]
    max_attempts: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the report here as well as to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    checkpoint: PathBuf,
    /// The start term as an s-expression.
    #[arg(long)]
    term: String,
    /// Target normal form (POLY).
    #[arg(long)]
    goal: Option<String>,
    /// Keep sampling for this many seconds if the greedy attempt fails.
    #[arg(long, default_value_t = 0.0)]
    seconds: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct LemmaArgs {
    #[arg(long)]
    env: Option<EnvKind>,
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    problems: PathBuf,
    /// Rewriting time per problem.
    #[arg(long, default_value_t = 1.0)]
    seconds: f64,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Exit status 1 for bad input, 2 for failures inside the library.
enum Failure {
    User(String),
    Internal(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Neural(_) | Error::Oracle(_) => Failure::Internal(msg),
            Error::Env(EnvError::IllegalAction { .. } | EnvError::EpisodeOver | EnvError::Replay { .. }) => {
                Failure::Internal(msg)
            }
            _ => Failure::User(msg),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::User(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => run_train(a),
        Command::Eval(a) => eval(a),
        Command::Solve(a) => solve(a),
        Command::Lemmas(a) => lemmas(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::User(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(1)
        }
        Err(Failure::Internal(m)) => {
            eprintln!("internal error: {m}");
            ExitCode::from(2)
        }
    }
}

fn generate(env: EnvKind, count: usize, max_depth: usize, value_cap: u64, scramble: usize, seed: u64) -> Result<ProblemSet, Failure> {
    Ok(match env {
        EnvKind::Ra => generate_ra(count, max_depth, seed)?,
        EnvKind::Poly => generate_poly(count, max_depth, value_cap, seed)?,
        EnvKind::Aim => generate_aim(count, scramble, seed)?,
    })
}

fn gen(a: GenArgs) -> Result<(), Failure> {
    let set = generate(a.env, a.count, a.max_depth, a.value_cap, a.scramble_depth, a.seed)?;
    match a.out {
        Some(path) => set.write(&path)?,
        None => print!("{}", set.to_tsv()),
    }
    Ok(())
}

fn load_policy(path: &Path, env: Option<EnvKind>) -> Result<(TreePolicy, EnvSpec), Failure> {
    let (policy, meta): (TreePolicy, CheckpointMeta) = load_checkpoint(path).map_err(|e| Failure::User(e.to_string()))?;
    if let Some(env) = env {
        if env != meta.env {
            return Err(Failure::User(format!("checkpoint is for env {}, not {env}", meta.env)));
        }
    }
    Ok((policy, EnvSpec::new(meta.env)))
}

fn run_train(a: TrainArgs) -> Result<(), Failure> {
    let mut config = match &a.config {
        Some(path) => TrainConfig::load(a.env, path)?,
        None => TrainConfig::for_env(a.env),
    };
    if let Some(s) = a.seed {
        config.seed = s;
    }
    if let Some(alg) = a.algorithm {
        config.algorithm = alg;
    }
    if let Some(e) = a.epochs {
        config.max_epochs = e;
    }
    config.validate()?;
    let problems = match &a.problems {
        Some(path) => ProblemSet::read(a.env, path)?,
        None => {
            let (count, depth) = match a.env {
                EnvKind::Ra => (3 * config.block_size.max(100), 3),
                EnvKind::Poly => (3 * config.block_size.max(100), 2),
                EnvKind::Aim => (200, 4),
            };
            generate(a.env, count, depth, 100, depth, config.seed)?
        }
    };
    fs::create_dir_all(&a.out)?;
    fs::write(a.out.join("config.toml"), config.to_toml())?;
    problems.write(&a.out.join("problems.tsv"))?;
    let mut metrics = BufWriter::new(File::create(a.out.join("metrics.jsonl"))?);
    let env = EnvSpec::new(a.env);
    let seed = config.seed;
    let out = a.out.clone();
    let result = train::<f64>(&config, &env, &problems.problems(), &mut |view| {
        let m = view.metrics;
        write_metrics_line(&mut metrics, m)?;
        metrics.flush()?;
        let meta = CheckpointMeta::for_policy(view.policy, seed, Some(m.epoch));
        save_checkpoint(&checkpoint_path(&out, m.epoch), view.policy, &meta)?;
        eprintln!(
            "epoch {:>3}  level {}/{}  solved {:>5}  eval {:.3}  loss {:.4}",
            m.epoch, m.level, m.levels_completed, m.solved_count, m.eval_success, m.loss
        );
        Ok(())
    })?;
    let meta = CheckpointMeta::for_policy(&result.policy, seed, None);
    save_checkpoint(&a.out.join("final.ckpt"), &result.policy, &meta).map_err(|e| Failure::Internal(e.to_string()))?;
    Ok(())
}

fn eval(a: EvalArgs) -> Result<(), Failure> {
    let (policy, env) = load_policy(&a.checkpoint, a.env)?;
    let problems = ProblemSet::read(env.kind, &a.problems)?;
    let mode = match a.mode {
        ModeArg::Greedy => EvalMode::GreedyOnce,
        ModeArg::Budget => EvalMode::BudgetSampled {
            seconds: a.seconds,
            max_attempts: a.max_attempts,
        },
    };
    let report = evaluate(&policy, &env, &problems.problems(), mode, a.seed)?;
    let json = serde_json::to_string_pretty(&report).map_err(|e| Failure::Internal(e.to_string()))?;
    if let Some(path) = a.out {
        fs::write(path, &json)?;
    }
    println!("{json}");
    Ok(())
}

fn solve(a: SolveArgs) -> Result<(), Failure> {
    let (policy, env) = load_policy(&a.checkpoint, a.env)?;
    let term = parse_term(&a.term, &env.signature).map_err(Error::from)?;
    let mut problem = Problem::new("cli", term);
    if let Some(g) = &a.goal {
        problem.goal = Some(parse_term(g, &env.signature).map_err(Error::from)?);
    }
    let mode = if a.seconds > 0.0 {
        EvalMode::budget(a.seconds)
    } else {
        EvalMode::GreedyOnce
    };
    let report = evaluate(&policy, &env, std::slice::from_ref(&problem), mode, a.seed)?;
    let outcome = &report.outcomes[0];
    match &outcome.solution {
        Some(actions) => {
            let mut s = env.reset(&problem).map_err(Error::from)?;
            for &act in actions {
                let r = env.step(&s, act).map_err(Error::from)?;
                println!("{act}\t{}\t{}", env.actions[act].name, r.next.term);
                s = r.next;
            }
            println!("solved in {} steps after {} attempts", actions.len(), outcome.attempts);
        }
        None => println!("not solved after {} attempts", outcome.attempts),
    }
    Ok(())
}

fn lemmas(a: LemmaArgs) -> Result<(), Failure> {
    let (policy, env) = load_policy(&a.checkpoint, a.env)?;
    if env.kind != EnvKind::Aim {
        return Err(Failure::User(format!("lemmas need an aim checkpoint, got {}", env.kind)));
    }
    let problems = ProblemSet::read(env.kind, &a.problems)?;
    let cap = Duration::try_from_secs_f64(a.seconds).map_err(|e| Failure::User(format!("--seconds: {e}")))?;
    let mut lines = String::new();
    for p in problems.problems() {
        for l in emit_lemmas(&policy, &env, &p, cap)? {
            if !verify_lemma(&env, &l) {
                return Err(Failure::Internal(format!("lemma for {} failed replay: {l}", p.id)));
            }
            lines.push_str(&format!("{}\t{l}\n", p.id));
        }
    }
    match a.out {
        Some(path) => fs::write(path, lines)?,
        None => print!("{lines}"),
    }
    Ok(())
}
