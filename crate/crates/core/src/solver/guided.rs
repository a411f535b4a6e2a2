//! Guided runs: every guess read off a known solution.
//!
//! The solution is carried along as a virtual solution of the current
//! equation, over registry letters. Runs and pairs that sit inside
//! variables are compressed in the virtual solution too, using the same
//! letters the equation uses, so it stays a solution after every stage.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use super::choices::apply_erase;
use super::reconstruct::{reconstruct, verify, Verdict};
use super::{ChoiceTrace, Limit, Outcome, SearchStats, SolveError, SolverConfig, StageChoice};
use crate::dioph::{self, Param, PrefixSuffixStructure, VarShape, Witness};
use crate::model::{AlphabetRegistry, Equation, LetterId, Problem, Provenance, Substitution, Symbol, VarId};
use crate::recompress::{
    apply_pair_choice, letter_partitions, pop, BlockChoice, PairChoice, PhaseChoices, PopGuess, RecompressError,
    TransformRecord, VarPop,
};

/// Largest letter count for which every pair partition is tried.
pub const EXHAUSTIVE_LETTERS: usize = 14;

const VERIFY_CAP: usize = 1 << 22;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GuidedError {
    #[error("the substitution does not solve the equation")]
    NotASolution,
    #[error("phase called on a trivial equation")]
    Trivial,
    #[error("virtual solution stopped solving the equation after the {0} stage")]
    Diverged(&'static str),
    #[error(transparent)]
    Transform(#[from] RecompressError),
}

/// One guided phase.
#[derive(Clone, Debug)]
pub struct GuidedPhase {
    pub equation: Equation,
    pub sigma: Substitution,
    pub records: Vec<TransformRecord>,
    pub choices: PhaseChoices,
    /// `|U|+|V|` after the block stage and after each pair stage.
    pub stage_lengths: [usize; 3],
    /// Largest `|U|+|V|` seen inside the phase, including right after pops.
    pub peak_length: usize,
    /// `|σ(U)|` in letters at the start of the phase.
    pub solution_length: usize,
    /// Positions of the starting `σ(U)` that now sit inside a letter
    /// standing for two or more of them.
    pub compressed: usize,
}

// How many start-of-phase letters each letter stands for.
struct Cover {
    mark: usize,
    memo: BTreeMap<LetterId, u64>,
}

impl Cover {
    fn new(registry: &AlphabetRegistry) -> Self {
        Cover { mark: registry.len(), memo: BTreeMap::new() }
    }

    fn of(&mut self, registry: &AlphabetRegistry, a: LetterId) -> u64 {
        if a.index() < self.mark {
            return 1;
        }
        if let Some(&c) = self.memo.get(&a) {
            return c;
        }
        let c = match registry.provenance(a).expect("registered letter") {
            Provenance::Input(_) => 1,
            Provenance::Pair(x, y) => {
                let (x, y) = (*x, *y);
                self.of(registry, x) + self.of(registry, y)
            }
            Provenance::Block(x, n) => {
                let (x, n) = (*x, n.to_u64().unwrap_or(u64::MAX));
                self.of(registry, x).saturating_mul(n)
            }
        };
        self.memo.insert(a, c);
        c
    }

    fn compressed(&mut self, registry: &AlphabetRegistry, word: &[LetterId]) -> usize {
        word.iter().map(|&a| self.of(registry, a)).filter(|&c| c >= 2).sum::<u64>() as usize
    }
}

fn sigma_lhs(eq: &Equation, sigma: &Substitution) -> Vec<LetterId> {
    sigma.apply(&eq.lhs)
}

fn check(eq: &Equation, sigma: &Substitution, registry: &AlphabetRegistry, stage: &'static str) -> Result<(), GuidedError> {
    match verify(eq, sigma, registry, VERIFY_CAP) {
        Verdict::Unequal => Err(GuidedError::Diverged(stage)),
        _ => Ok(()),
    }
}

fn lead_run(w: &[LetterId]) -> usize {
    w.iter().take_while(|&&c| c == w[0]).count()
}

/// Block-stage guesses for `sigma`: shapes, emptiness and run lengths.
pub fn block_guess(eq: &Equation, sigma: &Substitution) -> (PrefixSuffixStructure, BTreeSet<VarId>, Witness) {
    let mut pss = PrefixSuffixStructure::new();
    let mut empties = BTreeSet::new();
    let mut witness = Witness::new();
    for x in eq.vars() {
        let w = sigma.get(x);
        assert!(!w.is_empty(), "variables in a guided equation are nonempty");
        let l = lead_run(w);
        if l == w.len() {
            pss.insert(x, VarShape { first: w[0], last: w[0], is_block: true });
            empties.insert(x);
            witness.insert(Param::X(x), BigUint::from(l));
            continue;
        }
        let rev: Vec<LetterId> = w.iter().rev().copied().collect();
        let r = lead_run(&rev);
        pss.insert(x, VarShape { first: w[0], last: w[w.len() - 1], is_block: false });
        if l + r == w.len() {
            empties.insert(x);
        }
        witness.insert(Param::X(x), BigUint::from(l));
        witness.insert(Param::Y(x), BigUint::from(r));
    }
    (pss, empties, witness)
}

fn block_stage(
    eq: &Equation,
    sigma: &Substitution,
    registry: &mut AlphabetRegistry,
) -> Result<(Equation, Substitution, Vec<TransformRecord>, BlockChoice), GuidedError> {
    let (pss, empties, witness) = block_guess(eq, sigma);
    let (tokens, _) = dioph::pref_suff_parametric(eq, &pss, &empties)?;
    let blocks = dioph::collect_param_blocks(&tokens);
    let partition = dioph::coherent_partition(&blocks, &witness);
    let result = dioph::block_comp_param(eq, registry, &pss, &empties, &partition, Some(&witness))?;

    // Letter standing for a run (a, k): the class letter when there is one.
    let mut run_letter: BTreeMap<(LetterId, BigUint), LetterId> = BTreeMap::new();
    for rec in &result.records {
        if let TransformRecord::BlockParam { fresh, a, expr } = rec {
            run_letter.insert((*a, expr.eval(&witness)), *fresh);
        }
    }
    let mut next = Substitution::new();
    for x in result.equation.vars() {
        let w = sigma.get(x);
        let l = lead_run(w);
        let rev: Vec<LetterId> = w.iter().rev().copied().collect();
        let core = &w[l..w.len() - lead_run(&rev)];
        let mut out = Vec::new();
        let mut i = 0;
        while i < core.len() {
            let k = lead_run(&core[i..]);
            let key = (core[i], BigUint::from(k));
            let c = match run_letter.get(&key) {
                Some(&c) => c,
                None if k == 1 => core[i],
                None => {
                    let c = registry.register_block(core[i], key.1.clone()).expect("older letter");
                    run_letter.insert(key, c);
                    c
                }
            };
            out.push(c);
            i += k;
        }
        next.set(x, out);
    }
    let choice = BlockChoice::Param { pss, empties, partition, witness: result.witness.clone() };
    check(&result.equation, &next, registry, "block")?;
    Ok((result.equation, next, result.records, choice))
}

/// Pops that the split forces on `sigma`.
pub fn pop_guess(
    eq: &Equation,
    sigma: &Substitution,
    left: &BTreeSet<LetterId>,
    right: &BTreeSet<LetterId>,
) -> PopGuess {
    let mut guess = PopGuess::new();
    for x in eq.vars() {
        let w = sigma.get(x);
        let mut g = VarPop::default();
        let mut rest = w;
        if right.contains(&rest[0]) {
            g.left = Some(rest[0]);
            rest = &rest[1..];
            g.empty_after_left = rest.is_empty();
        }
        if let Some(&b) = rest.last() {
            if left.contains(&b) {
                g.right = Some(b);
                g.empty_after_right = rest.len() == 1;
            }
        }
        if g.left.is_some() || g.right.is_some() {
            guess.insert(x, g);
        }
    }
    guess
}

// Compress every `ab` with a in `left`, b in `right` inside a word.
fn compress_word(
    w: &[LetterId],
    left: &BTreeSet<LetterId>,
    right: &BTreeSet<LetterId>,
    pairs: &mut BTreeMap<(LetterId, LetterId), LetterId>,
    registry: &mut AlphabetRegistry,
) -> Vec<LetterId> {
    let mut out = Vec::with_capacity(w.len());
    let mut i = 0;
    while i < w.len() {
        if i + 1 < w.len() && left.contains(&w[i]) && right.contains(&w[i + 1]) {
            let key = (w[i], w[i + 1]);
            let c = *pairs.entry(key).or_insert_with(|| registry.register_pair(key.0, key.1).expect("older letters"));
            out.push(c);
            i += 2;
        } else {
            out.push(w[i]);
            i += 1;
        }
    }
    out
}

fn pair_stage(
    eq: &Equation,
    sigma: &Substitution,
    registry: &mut AlphabetRegistry,
    choice: &PairChoice,
) -> Result<(Equation, Substitution, Vec<TransformRecord>, usize), GuidedError> {
    let popped_len = pop(eq, &choice.left, &choice.right, &choice.pops)?.0.len();
    let (next_eq, records) = apply_pair_choice(eq, registry, choice)?;
    let mut pairs: BTreeMap<(LetterId, LetterId), LetterId> = BTreeMap::new();
    for rec in &records {
        if let TransformRecord::Pair { fresh, a, b } = rec {
            pairs.insert((*a, *b), *fresh);
        }
    }
    let mut next = Substitution::new();
    for x in next_eq.vars() {
        let mut w = sigma.get(x);
        if let Some(p) = choice.pops.get(&x) {
            if p.left.is_some() {
                w = &w[1..];
            }
            if p.right.is_some() {
                w = &w[..w.len() - 1];
            }
        }
        next.set(x, compress_word(w, &choice.left, &choice.right, &mut pairs, registry));
    }
    Ok((next_eq, next, records, popped_len))
}

// Score a split on the letters of `word`: positions covered by letters
// standing for two or more starting letters once `ab` pairs are merged.
fn split_score(word: &[LetterId], cover: &[u64], left: &BTreeSet<LetterId>, right: &BTreeSet<LetterId>) -> u64 {
    let mut total = 0;
    let mut i = 0;
    while i < word.len() {
        if i + 1 < word.len() && left.contains(&word[i]) && right.contains(&word[i + 1]) {
            total += cover[i] + cover[i + 1];
            i += 2;
        } else {
            if cover[i] >= 2 {
                total += cover[i];
            }
            i += 1;
        }
    }
    total
}

type Split = (BTreeSet<LetterId>, BTreeSet<LetterId>);

// All splits of `letters` when there are few, otherwise a hill climb over
// single-letter moves from a few seeded random starts.
fn best_split(letters: &BTreeSet<LetterId>, mut score: impl FnMut(&Split) -> (u64, u64)) -> Split {
    if letters.len() <= EXHAUSTIVE_LETTERS {
        let mut best: Option<((u64, u64), Split)> = None;
        for split in letter_partitions(letters) {
            let s = score(&split);
            if best.as_ref().is_none_or(|(b, _)| s > *b) {
                best = Some((s, split));
            }
        }
        return best.expect("at least one split").1;
    }
    let ls: Vec<LetterId> = letters.iter().copied().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let mut best: Option<((u64, u64), Split)> = None;
    for _ in 0..8 {
        let mut side: Vec<bool> = ls.iter().map(|_| rand::Rng::gen_bool(&mut rng, 0.5)).collect();
        let build = |side: &[bool]| -> Split {
            let (l, r): (Vec<_>, Vec<_>) = ls.iter().zip(side).partition(|(_, &s)| s);
            (l.into_iter().map(|(&a, _)| a).collect(), r.into_iter().map(|(&a, _)| a).collect())
        };
        let mut cur = score(&build(&side));
        let mut order: Vec<usize> = (0..ls.len()).collect();
        loop {
            order.shuffle(&mut rng);
            let mut improved = false;
            for &i in &order {
                side[i] = !side[i];
                let s = score(&build(&side));
                if s > cur {
                    cur = s;
                    improved = true;
                } else {
                    side[i] = !side[i];
                }
            }
            if !improved {
                break;
            }
        }
        if best.as_ref().is_none_or(|(b, _)| cur > *b) {
            best = Some((cur, build(&side)));
        }
    }
    best.expect("at least one start").1
}

/// Run one phase with every guess read off `sigma`.
///
/// The first pair split maximizes how much of `σ(U)` is compressed, the
/// second how many pairs of the equation are merged (ties broken by the
/// first measure). The second split ranges over the letters present after
/// the first pair stage.
pub fn guided_phase(
    eq: &Equation,
    sigma: &Substitution,
    registry: &mut AlphabetRegistry,
) -> Result<GuidedPhase, GuidedError> {
    if eq.is_trivial() {
        return Err(GuidedError::Trivial);
    }
    if verify(eq, sigma, registry, VERIFY_CAP) == Verdict::Unequal {
        return Err(GuidedError::NotASolution);
    }
    let mut cover = Cover::new(registry);
    let solution_length = sigma_lhs(eq, sigma).len();
    let (eq1, s1, mut records, block) = block_stage(eq, sigma, registry)?;
    let mut peak = eq1.len();
    let mut lengths = [eq1.len(), 0, 0];
    let (mut cur, mut s) = (eq1, s1);
    let mut pairs: Vec<PairChoice> = Vec::new();
    for stage in 0..2 {
        let letters = cur.letters();
        let choice = if letters.len() < 2 {
            PairChoice::default()
        } else {
            let word = sigma_lhs(&cur, &s);
            let covers: Vec<u64> = word.iter().map(|&a| cover.of(registry, a)).collect();
            let (left, right) = best_split(&letters, |(l, r)| {
                let sc = split_score(&word, &covers, l, r);
                if stage == 0 {
                    return (sc, 0);
                }
                let pops = pop_guess(&cur, &s, l, r);
                let popped = pop(&cur, l, r, &pops).expect("guess uses split letters").0;
                let merged = [&popped.lhs, &popped.rhs]
                    .iter()
                    .map(|side| {
                        let mut n = 0;
                        let mut i = 0;
                        while i + 1 < side.len() {
                            match (side[i], side[i + 1]) {
                                (Symbol::Letter(a), Symbol::Letter(b)) if l.contains(&a) && r.contains(&b) => {
                                    n += 1;
                                    i += 2;
                                }
                                _ => i += 1,
                            }
                        }
                        n
                    })
                    .sum::<u64>();
                (merged, sc)
            });
            let pops = pop_guess(&cur, &s, &left, &right);
            PairChoice { left, right, pops }
        };
        let (next, ns, recs, popped_len) = pair_stage(&cur, &s, registry, &choice)?;
        check(&next, &ns, registry, if stage == 0 { "first pair" } else { "second pair" })?;
        peak = peak.max(popped_len).max(next.len());
        lengths[stage + 1] = next.len();
        records.extend(recs);
        pairs.push(choice);
        cur = next;
        s = ns;
    }
    let compressed = cover.compressed(registry, &sigma_lhs(&cur, &s));
    let [p1, p2]: [PairChoice; 2] = pairs.try_into().expect("two pair stages");
    Ok(GuidedPhase {
        equation: cur,
        sigma: s,
        records,
        choices: PhaseChoices { block, pairs: [p1, p2] },
        stage_lengths: lengths,
        peak_length: peak,
        solution_length,
        compressed,
    })
}

/// Summary of one phase of a guided run.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PhaseSummary {
    pub stage_lengths: [usize; 3],
    pub peak_length: usize,
    pub solution_length: usize,
    pub compressed: usize,
}

#[derive(Clone, Debug)]
pub struct GuidedRun {
    pub phases: Vec<PhaseSummary>,
    pub final_equation: Equation,
    pub final_sigma: Substitution,
    pub registry: AlphabetRegistry,
    pub records: Vec<TransformRecord>,
    pub trace: ChoiceTrace,
}

impl GuidedRun {
    pub fn finished(&self) -> bool {
        self.final_equation.is_trivial()
    }
}

/// Guided phases until the equation is trivial or `max_phases` have run.
/// Variables that `sigma` maps to the empty word are erased first.
pub fn guided_run(problem: &Problem, sigma: &Substitution, max_phases: usize) -> Result<GuidedRun, GuidedError> {
    let mut registry = problem.registry.clone();
    if verify(&problem.equation, sigma, &registry, VERIFY_CAP) == Verdict::Unequal {
        return Err(GuidedError::NotASolution);
    }
    let erased: BTreeSet<VarId> = problem.equation.vars().into_iter().filter(|&x| sigma.get(x).is_empty()).collect();
    let (mut eq, mut records) = apply_erase(&problem.equation, &erased);
    let mut s: Substitution = eq.vars().into_iter().map(|x| (x, sigma.get(x).to_vec())).collect();
    let mut trace = ChoiceTrace { erased, steps: Vec::new() };
    let mut phases = Vec::new();
    while !eq.is_trivial() && phases.len() < max_phases {
        let p = guided_phase(&eq, &s, &mut registry)?;
        phases.push(PhaseSummary {
            stage_lengths: p.stage_lengths,
            peak_length: p.peak_length,
            solution_length: p.solution_length,
            compressed: p.compressed,
        });
        records.extend(p.records);
        let [p1, p2] = p.choices.pairs;
        trace.steps.extend([StageChoice::Block(p.choices.block), StageChoice::Pair(p1), StageChoice::Pair(p2)]);
        eq = p.equation;
        s = p.sigma;
    }
    Ok(GuidedRun { phases, final_equation: eq, final_sigma: s, registry, records, trace })
}

pub(super) fn solve_guided(problem: &Problem, config: &SolverConfig) -> Result<(Outcome, SearchStats), SolveError> {
    let Some(guide) = &config.guide else {
        return Ok((Outcome::Unknown(Limit::NoGuide), SearchStats::default()));
    };
    let run = guided_run(problem, guide, config.max_phases).map_err(|_| SolveError::BadGuide)?;
    let stats = SearchStats {
        phases: run.phases.len(),
        max_equation_len: run.phases.iter().map(|p| p.peak_length).max().unwrap_or(problem.equation.len()),
        ..SearchStats::default()
    };
    if !run.finished() {
        return Ok((Outcome::Unknown(Limit::MaxPhases(config.max_phases)), stats));
    }
    let mut registry = run.registry;
    let mut sigma = reconstruct(&run.records, &run.final_sigma, &mut registry).map_err(|_| SolveError::BadGuide)?;
    for x in problem.equation.vars() {
        if !sigma.is_assigned(x) {
            sigma.set(x, Vec::new());
        }
    }
    let verdict = verify(&problem.equation, &sigma, &registry, config.expansion_cap);
    if verdict == Verdict::Unequal {
        return Err(SolveError::BadGuide);
    }
    let solution = super::Solution { substitution: sigma, registry, records: run.records, trace: run.trace, verdict };
    Ok((Outcome::Sat(Box::new(solution)), stats))
}
