//! Search over the guesses of the recompression loop.
//!
//! Each phase is split into three stages (block compression, then two pair
//! compressions), and the search moves between stages one choice at a time.
//! A state is identified by the canonical form of its equation and its
//! stage, so the explored space is finite once the length cap is fixed.

pub mod choices;
pub mod guided;
pub mod prune;
pub mod reconstruct;

use std::collections::{BTreeSet, HashSet};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Mutex;
use std::time::{Duration, Instant};

use dashmap::DashSet;
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{canonical_form, AlphabetRegistry, Equation, LetterId, Problem, Substitution, VarId};
use crate::recompress::{
    apply_block_choice, apply_pair_choice, default_block_cap, BlockChoice, PairChoice, RecompressError, TransformRecord,
};
use reconstruct::{reconstruct, solve_trivial, verify, Verdict};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mode {
    Decide,
    Search,
    Guided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockMode {
    Parametric,
    Explicit,
}

/// Smallest length factor accepted in decide mode.
pub const MIN_DECIDE_FACTOR: usize = 85;

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub mode: Mode,
    pub max_phases: usize,
    /// States longer than `length_factor * n` are dropped.
    pub length_factor: usize,
    pub block_mode: BlockMode,
    /// Largest run length guessed in explicit mode; defaults to `2^(2n)`.
    pub explicit_block_cap: Option<BigUint>,
    pub expansion_cap: usize,
    pub seed: u64,
    pub node_budget: Option<u64>,
    pub threads: usize,
    /// Known solution for guided mode.
    pub guide: Option<Substitution>,
}

impl SolverConfig {
    pub fn decide() -> Self {
        SolverConfig {
            mode: Mode::Decide,
            max_phases: 64,
            length_factor: 100,
            block_mode: BlockMode::Parametric,
            explicit_block_cap: None,
            expansion_cap: 1 << 20,
            seed: 0,
            node_budget: None,
            threads: 1,
            guide: None,
        }
    }

    pub fn search() -> Self {
        SolverConfig { mode: Mode::Search, node_budget: Some(200_000), ..Self::decide() }
    }

    pub fn guided(sigma: Substitution) -> Self {
        SolverConfig { mode: Mode::Guided, guide: Some(sigma), ..Self::decide() }
    }

    pub fn validate(&self) -> Result<(), SolveError> {
        if self.mode == Mode::Decide && self.length_factor < MIN_DECIDE_FACTOR {
            return Err(SolveError::Config(format!(
                "length factor {} is below {MIN_DECIDE_FACTOR}, decide mode would be incomplete",
                self.length_factor
            )));
        }
        if self.threads == 0 {
            return Err(SolveError::Config("threads must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum SolveError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("guide does not solve the equation")]
    BadGuide,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Stage {
    Block,
    Pair1,
    Pair2,
}

impl Stage {
    pub fn next(self) -> Stage {
        match self {
            Stage::Block => Stage::Pair1,
            Stage::Pair1 => Stage::Pair2,
            Stage::Pair2 => Stage::Block,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum StageChoice {
    Block(BlockChoice),
    Pair(PairChoice),
}

/// Every guess made on the way to an answer. Stages follow each other in
/// the order block, pair, pair, block, ...
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChoiceTrace {
    pub erased: BTreeSet<VarId>,
    pub steps: Vec<StageChoice>,
}

impl ChoiceTrace {
    pub fn phases(&self) -> usize {
        self.steps.len().div_ceil(3)
    }
}

#[derive(Clone, Debug)]
pub struct Solution {
    /// Values over letters of `registry`.
    pub substitution: Substitution,
    pub registry: AlphabetRegistry,
    pub records: Vec<TransformRecord>,
    pub trace: ChoiceTrace,
    /// `Equal`, or `Inconclusive` when the solution is longer than the expansion cap.
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Limit {
    NodeBudget(u64),
    MaxPhases(usize),
    NoGuide,
}

#[derive(Clone, Debug)]
pub enum Outcome {
    Sat(Box<Solution>),
    Unsat,
    Unknown(Limit),
}

impl Outcome {
    pub fn is_sat(&self) -> bool {
        matches!(self, Outcome::Sat(_))
    }

    pub fn solution(&self) -> Option<&Solution> {
        match self {
            Outcome::Sat(s) => Some(s),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SearchStats {
    pub nodes: u64,
    pub memo_hits: u64,
    pub pruned_dead: u64,
    pub pruned_length: u64,
    pub max_equation_len: usize,
    pub phases: usize,
    /// Branches whose reconstructed witness failed verification. Always zero
    /// unless there is a bug; kept so tests can check it.
    pub bad_witnesses: u64,
    pub contract_errors: u64,
}

impl SearchStats {
    fn merge(&mut self, o: &SearchStats) {
        self.nodes += o.nodes;
        self.memo_hits += o.memo_hits;
        self.pruned_dead += o.pruned_dead;
        self.pruned_length += o.pruned_length;
        self.max_equation_len = self.max_equation_len.max(o.max_equation_len);
        self.phases = self.phases.max(o.phases);
        self.bad_witnesses += o.bad_witnesses;
        self.contract_errors += o.contract_errors;
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub outcome: Outcome,
    pub stats: SearchStats,
    pub elapsed: Duration,
}

/// Decide, search for, or reconstruct (guided) a solution of `problem`.
pub fn solve(problem: &Problem, config: &SolverConfig) -> Result<SolveReport, SolveError> {
    config.validate()?;
    let start = Instant::now();
    let (outcome, stats) = match config.mode {
        Mode::Guided => guided::solve_guided(problem, config)?,
        _ => run_in_big_stack(|| search(problem, config)),
    };
    Ok(SolveReport { outcome, stats, elapsed: start.elapsed() })
}

const STACK_BYTES: usize = 512 << 20;

/// Children generated and ordered together at each search node.
const BATCH: usize = 4096;

fn run_in_big_stack<T: Send>(f: impl FnOnce() -> T + Send) -> T {
    std::thread::scope(|s| {
        std::thread::Builder::new()
            .stack_size(STACK_BYTES)
            .spawn_scoped(s, f)
            .expect("spawn solver thread")
            .join()
            .expect("solver thread panicked")
    })
}

enum Visited<'a> {
    Local(HashSet<(Equation, Stage)>),
    Shared(&'a DashSet<(Equation, Stage)>),
}

impl Visited<'_> {
    fn insert(&mut self, key: (Equation, Stage)) -> bool {
        match self {
            Visited::Local(s) => s.insert(key),
            Visited::Shared(s) => s.insert(key),
        }
    }
}

struct Dfs<'a> {
    problem: &'a Problem,
    config: &'a SolverConfig,
    max_len: usize,
    budget: Option<u64>,
    block_cap: BigUint,
    explicit_max: usize,
    visited: Visited<'a>,
    stats: SearchStats,
    limit: Option<Limit>,
    rng: Option<ChaCha8Rng>,
    stop: Option<&'a AtomicBool>,
    trace: ChoiceTrace,
    records: Vec<TransformRecord>,
}

// Length caps of the successive passes: doubling from twice the input
// length up to the configured cap. Short states are exhausted first, so
// solutions with small intermediate equations are found before the long
// tail of the space is touched.
fn length_caps(n: usize, factor: usize) -> Vec<usize> {
    let last = factor.saturating_mul(n);
    let mut caps = Vec::new();
    let mut c = 2 * n;
    while c < last {
        caps.push(c);
        c = c.saturating_mul(2);
    }
    caps.push(last);
    caps
}

fn search(problem: &Problem, config: &SolverConfig) -> (Outcome, SearchStats) {
    let n = problem.equation.len().max(1);
    let mut stats = SearchStats::default();
    for cap in length_caps(n, config.length_factor) {
        let budget = config.node_budget.map(|b| b.saturating_sub(stats.nodes));
        let (outcome, pass) = search_pass(problem, config, cap, budget);
        stats.merge(&pass);
        match outcome {
            // A pass that never hit its cap has seen every reachable state.
            Outcome::Unsat if pass.pruned_length > 0 => continue,
            Outcome::Unknown(Limit::NodeBudget(_)) => {
                return (Outcome::Unknown(Limit::NodeBudget(config.node_budget.unwrap_or(0))), stats)
            }
            o => return (o, stats),
        }
    }
    (Outcome::Unsat, stats)
}

fn search_pass(problem: &Problem, config: &SolverConfig, max_len: usize, budget: Option<u64>) -> (Outcome, SearchStats) {
    let eq = &problem.equation;
    let roots = choices::erase_choices(eq);
    if config.threads <= 1 {
        let mut dfs = Dfs::new(problem, config, max_len, budget, Visited::Local(HashSet::new()), None, config.seed);
        for erased in roots {
            if let Some(sol) = dfs.root(erased) {
                return (Outcome::Sat(Box::new(sol)), dfs.stats);
            }
        }
        let outcome = match dfs.limit.take() {
            Some(l) => Outcome::Unknown(l),
            None => Outcome::Unsat,
        };
        return (outcome, dfs.stats);
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.threads)
        .stack_size(STACK_BYTES)
        .build()
        .expect("thread pool");
    let visited = DashSet::new();
    let stop = AtomicBool::new(false);
    let stats = Mutex::new(SearchStats::default());
    let limit = Mutex::new(None);
    let roots: Vec<_> = roots.into_iter().enumerate().collect();
    let nroots = roots.len() as u64;
    let found = pool.install(|| {
        roots.into_par_iter().find_map_any(|(i, erased)| {
            // Each root gets an equal share of the node budget.
            let share = budget.map(|b| b.div_ceil(nroots));
            let seed = config.seed ^ i as u64;
            let mut dfs = Dfs::new(problem, config, max_len, share, Visited::Shared(&visited), Some(&stop), seed);
            let sol = dfs.root(erased);
            stats.lock().unwrap().merge(&dfs.stats);
            if let Some(l) = dfs.limit {
                *limit.lock().unwrap() = Some(l);
            }
            if sol.is_some() {
                stop.store(true, Ordering::Relaxed);
            }
            sol
        })
    });
    let stats = stats.into_inner().unwrap();
    let outcome = match (found, limit.into_inner().unwrap()) {
        (Some(sol), _) => Outcome::Sat(Box::new(sol)),
        (None, Some(l)) => Outcome::Unknown(l),
        (None, None) => Outcome::Unsat,
    };
    (outcome, stats)
}

impl<'a> Dfs<'a> {
    fn new(
        problem: &'a Problem,
        config: &'a SolverConfig,
        max_len: usize,
        budget: Option<u64>,
        visited: Visited<'a>,
        stop: Option<&'a AtomicBool>,
        seed: u64,
    ) -> Self {
        let n = problem.equation.len().max(1);
        let block_cap = config.explicit_block_cap.clone().unwrap_or_else(|| default_block_cap(n));
        Dfs {
            problem,
            config,
            max_len,
            budget,
            explicit_max: block_cap.to_usize().unwrap_or(usize::MAX),
            block_cap,
            visited,
            stats: SearchStats::default(),
            limit: None,
            rng: (config.mode == Mode::Search).then(|| ChaCha8Rng::seed_from_u64(seed)),
            stop,
            trace: ChoiceTrace::default(),
            records: Vec::new(),
        }
    }

    fn root(&mut self, erased: BTreeSet<VarId>) -> Option<Solution> {
        let (eq, records) = choices::apply_erase(&self.problem.equation, &erased);
        self.trace = ChoiceTrace { erased, steps: Vec::new() };
        self.records = records;
        let mut registry = self.problem.registry.clone();
        self.visit(&eq, Stage::Block, 0, &mut registry)
    }

    fn stopped(&self) -> bool {
        self.limit.is_some() || self.stop.is_some_and(|s| s.load(Ordering::Relaxed))
    }

    fn visit(&mut self, eq: &Equation, stage: Stage, phase: usize, registry: &mut AlphabetRegistry) -> Option<Solution> {
        if self.stopped() {
            return None;
        }
        self.stats.max_equation_len = self.stats.max_equation_len.max(eq.len());
        if eq.is_trivial() || !eq.has_vars() {
            return self.terminal(eq, registry);
        }
        if eq.len() > self.max_len {
            self.stats.pruned_length += 1;
            return None;
        }
        if prune::is_dead(eq, registry) {
            self.stats.pruned_dead += 1;
            return None;
        }
        if !self.visited.insert((canonical_form(eq, registry).0, stage)) {
            self.stats.memo_hits += 1;
            return None;
        }
        self.stats.nodes += 1;
        if let Some(b) = self.budget {
            if self.stats.nodes > b {
                self.limit = Some(Limit::NodeBudget(b));
                return None;
            }
        }
        if stage == Stage::Block && self.config.mode == Mode::Search && phase >= self.config.max_phases {
            self.limit = Some(Limit::MaxPhases(self.config.max_phases));
            return None;
        }
        self.stats.phases = self.stats.phases.max(phase + 1);
        let mut rng = self.rng.as_mut();
        let options: Box<dyn Iterator<Item = StageChoice> + '_> = match stage {
            Stage::Block => match self.config.block_mode {
                BlockMode::Parametric => Box::new(choices::param_block_choices(eq, registry, rng.as_deref_mut()).map(StageChoice::Block)),
                BlockMode::Explicit => Box::new(
                    choices::explicit_block_choices(eq, self.explicit_max.min(u16::MAX as usize)).map(StageChoice::Block),
                ),
            },
            Stage::Pair1 | Stage::Pair2 => Box::new(choices::pair_choices(eq, registry.clone(), rng).map(StageChoice::Pair)),
        };
        let next_phase = if stage == Stage::Pair2 { phase + 1 } else { phase };
        let mut options = options.peekable();
        while options.peek().is_some() {
            // Children are tried shortest first within each batch; finished
            // equations come before everything else.
            let mut batch: Vec<((usize, usize), StageChoice)> = Vec::new();
            for choice in options.by_ref().take(BATCH) {
                let mark = registry.len();
                match self.apply(eq, registry, &choice) {
                    Ok((next, _)) => {
                        if next.is_trivial() || !next.has_vars() {
                            batch.push(((0, 0), choice));
                        } else if next.len() > self.max_len {
                            self.stats.pruned_length += 1;
                        } else if prune::is_dead(&next, registry) {
                            self.stats.pruned_dead += 1;
                        } else {
                            batch.push(((next.var_occurrences(), next.len()), choice));
                        }
                    }
                    Err(RecompressError::Rejected(_)) => {}
                    Err(RecompressError::Contract(_)) => self.stats.contract_errors += 1,
                }
                registry.truncate(mark);
            }
            batch.sort_by_key(|(len, _)| *len);
            for (_, choice) in batch {
                let mark = registry.len();
                let (next, recs) = self.apply(eq, registry, &choice).expect("applied once already");
                let nrec = self.records.len();
                self.records.extend(recs);
                self.trace.steps.push(choice);
                if let Some(sol) = self.visit(&next, stage.next(), next_phase, registry) {
                    return Some(sol);
                }
                self.trace.steps.pop();
                self.records.truncate(nrec);
                registry.truncate(mark);
                if self.stopped() {
                    return None;
                }
            }
        }
        None
    }

    fn apply(
        &self,
        eq: &Equation,
        registry: &mut AlphabetRegistry,
        choice: &StageChoice,
    ) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
        match choice {
            StageChoice::Block(c) => apply_block_choice(eq, registry, c, &self.block_cap),
            StageChoice::Pair(c) => apply_pair_choice(eq, registry, c),
        }
    }

    fn terminal(&mut self, eq: &Equation, registry: &mut AlphabetRegistry) -> Option<Solution> {
        let trivial = if eq.has_vars() {
            solve_trivial(eq, first_input(registry))?
        } else if eq.lhs == eq.rhs {
            Substitution::new()
        } else {
            return None;
        };
        let mark = registry.len();
        let mut sigma = reconstruct(&self.records, &trivial, registry).ok()?;
        for x in self.problem.equation.vars() {
            if !sigma.is_assigned(x) {
                sigma.set(x, Vec::new());
            }
        }
        let verdict = verify(&self.problem.equation, &sigma, registry, self.config.expansion_cap);
        if verdict == Verdict::Unequal {
            self.stats.bad_witnesses += 1;
            registry.truncate(mark);
            return None;
        }
        let vars = self.problem.equation.vars();
        let substitution = sigma.iter().filter(|(x, _)| vars.contains(x)).map(|(x, w)| (x, w.to_vec())).collect();
        Some(Solution {
            substitution,
            registry: registry.clone(),
            records: self.records.clone(),
            trace: self.trace.clone(),
            verdict,
        })
    }
}

fn first_input(registry: &AlphabetRegistry) -> Option<LetterId> {
    registry.input_letters().next()
}

/// Result of re-applying a trace.
#[derive(Clone, Debug)]
pub struct Replay {
    /// Canonical equation after the erase step and after every stage.
    pub equations: Vec<Equation>,
    pub final_equation: Equation,
    pub registry: AlphabetRegistry,
    pub records: Vec<TransformRecord>,
}

/// Re-apply `trace` to the input equation.
pub fn replay(problem: &Problem, trace: &ChoiceTrace, block_cap: &BigUint) -> Result<Replay, RecompressError> {
    let mut registry = problem.registry.clone();
    let (mut eq, mut records) = choices::apply_erase(&problem.equation, &trace.erased);
    let mut equations = vec![canonical_form(&eq, &registry).0];
    for step in &trace.steps {
        let (next, recs) = match step {
            StageChoice::Block(c) => apply_block_choice(&eq, &mut registry, c, block_cap)?,
            StageChoice::Pair(c) => apply_pair_choice(&eq, &mut registry, c)?,
        };
        records.extend(recs);
        eq = next;
        equations.push(canonical_form(&eq, &registry).0);
    }
    Ok(Replay { equations, final_equation: eq, registry, records })
}
