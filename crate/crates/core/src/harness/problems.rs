use std::fmt::Write as _;
use std::path::Path;

use crate::envs::{EnvKind, EnvSpec, Problem};
use crate::error::{Error, Result};
use crate::oracles::{Category, Difficulty};
use crate::term::{parse_term, print_term};

/// One problem with the annotations the generators attach.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemEntry {
    pub problem: Problem,
    pub difficulty: Option<Difficulty>,
    /// A known solution as env action ids, cursor moves included.
    pub solution: Option<Vec<usize>>,
}

impl ProblemEntry {
    pub fn new(problem: Problem) -> Self {
        ProblemEntry {
            problem,
            difficulty: None,
            solution: None,
        }
    }
}

/// Problems of one environment.
///
/// File format: `#` comments, then one problem per line with tab-separated
/// columns `id term [goal [steps category [solution]]]`. `-` marks an
/// empty column; a solution is a comma-separated list of action ids.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ProblemSet {
    pub env: EnvKind,
    pub entries: Vec<ProblemEntry>,
}

fn category_name(c: Category) -> &'static str {
    match c {
        Category::Low => "low",
        Category::Medium => "medium",
        Category::High => "high",
    }
}

impl ProblemSet {
    pub fn new(env: EnvKind) -> Self {
        ProblemSet { env, entries: vec![] }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn problems(&self) -> Vec<Problem> {
        self.entries.iter().map(|e| e.problem.clone()).collect()
    }

    /// Checks unique ids, POLY goals and that every attached solution
    /// replays to a solved state.
    pub fn validate(&self) -> Result<()> {
        let env = EnvSpec::new(self.env);
        let mut ids = std::collections::HashSet::new();
        for e in &self.entries {
            let p = &e.problem;
            if !ids.insert(p.id.as_str()) {
                return Err(Error::Invalid(format!("duplicate problem id `{}`", p.id)));
            }
            env.reset(p)?;
            if let Some(sol) = &e.solution {
                let r = env.replay(p, sol)?;
                if !env.is_solved(&r.next) {
                    return Err(Error::Invalid(format!("solution of `{}` does not solve it", p.id)));
                }
            }
        }
        Ok(())
    }

    pub fn to_tsv(&self) -> String {
        let mut s = format!("# env={}\n", self.env);
        for e in &self.entries {
            let p = &e.problem;
            let goal = p.goal.as_ref().map_or("-".to_string(), print_term);
            let (steps, cat) = match &e.difficulty {
                Some(d) => (
                    d.steps.map_or("-".to_string(), |s| s.to_string()),
                    category_name(d.category).to_string(),
                ),
                None => ("-".into(), "-".into()),
            };
            let sol = e.solution.as_ref().map_or("-".to_string(), |a| {
                a.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
            });
            writeln!(s, "{}\t{}\t{goal}\t{steps}\t{cat}\t{sol}", p.id, print_term(&p.term)).unwrap();
        }
        s
    }

    pub fn from_tsv(env: EnvKind, text: &str) -> Result<Self> {
        let sig = env.signature();
        let mut out = ProblemSet::new(env);
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let err = |msg: String| Error::ProblemFile { line, msg };
            let trimmed = raw.trim_end_matches('\r');
            if trimmed.trim().is_empty() {
                continue;
            }
            if let Some(c) = trimmed.trim_start().strip_prefix('#') {
                if let Some(name) = c.trim().strip_prefix("env=") {
                    if name.trim() != env.name() {
                        return Err(err(format!("file is for env {}, not {env}", name.trim())));
                    }
                }
                continue;
            }
            let cols: Vec<&str> = trimmed.split('\t').collect();
            if cols.len() < 2 || cols.len() > 6 {
                return Err(err(format!("expected 2 to 6 tab-separated columns, found {}", cols.len())));
            }
            let col = |k: usize| cols.get(k).copied().filter(|c| *c != "-" && !c.is_empty());
            let term = parse_term(cols[1], &sig).map_err(|e| err(format!("term: {e}")))?;
            let mut problem = Problem::new(cols[0], term);
            if let Some(g) = col(2) {
                problem.goal = Some(parse_term(g, &sig).map_err(|e| err(format!("goal: {e}")))?);
            }
            let difficulty = match col(4) {
                Some(c) => {
                    let category = match c {
                        "low" => Category::Low,
                        "medium" => Category::Medium,
                        "high" => Category::High,
                        _ => return Err(err(format!("unknown category `{c}`"))),
                    };
                    let steps = col(3)
                        .map(|s| s.parse().map_err(|_| err(format!("bad step count `{s}`"))))
                        .transpose()?;
                    Some(Difficulty { steps, category })
                }
                None => None,
            };
            let solution = col(5)
                .map(|s| {
                    s.split(',')
                        .map(|a| a.trim().parse::<usize>().map_err(|_| err(format!("bad action id `{a}`"))))
                        .collect::<Result<Vec<_>>>()
                })
                .transpose()?;
            out.entries.push(ProblemEntry {
                problem,
                difficulty,
                solution,
            });
        }
        Ok(out)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_tsv())?;
        Ok(())
    }

    pub fn read(env: EnvKind, path: &Path) -> Result<Self> {
        Self::from_tsv(env, &std::fs::read_to_string(path)?)
    }
}
