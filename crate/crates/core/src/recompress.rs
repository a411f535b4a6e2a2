//! Equation rewriting primitives.
//!
//! A pair `ab` is *crossing* when one of its letters comes from a
//! variable's value. Popping letters out of variables turns chosen crossing
//! pairs into explicit ones, which can then be replaced by a fresh letter
//! on both sides at once. Blocks `a^k` are handled the same way after
//! cutting whole leading and trailing runs out of every variable.
//!
//! Every rewrite returns [`TransformRecord`]s describing what was taken out
//! of each variable, so a solution of the rewritten equation can be turned
//! back into one of the original.

use std::collections::{BTreeMap, BTreeSet};

use num_bigint::BigUint;
use num_traits::One;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dioph::{self, LinExpr, Param, PrefixSuffixStructure, Witness};
use crate::model::{AlphabetRegistry, Equation, LetterId, Symbol, VarId};

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum RecompressError {
    /// The guessed branch cannot lead to a solution.
    #[error("branch rejected: {0}")]
    Rejected(String),
    /// The caller broke a precondition.
    #[error("contract violation: {0}")]
    Contract(String),
}

/// One step of a rewrite, enough to undo it on a solution.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum TransformRecord {
    /// `var` was guessed empty and dropped.
    Erase { var: VarId },
    Pop { var: VarId, left: Option<LetterId>, right: Option<LetterId>, removed: bool },
    Pair { fresh: LetterId, a: LetterId, b: LetterId },
    BlockExplicit { fresh: LetterId, a: LetterId, len: BigUint },
    /// `var` became `a^l var b^r` with explicit lengths.
    Cut { var: VarId, left: (LetterId, BigUint), right: Option<(LetterId, BigUint)>, removed: bool },
    /// `var` became `a^{x} var b^{y}` with lengths given by the stage witness.
    PrefSuff {
        var: VarId,
        left: LetterId,
        left_param: Param,
        right: Option<(LetterId, Param)>,
        removed: bool,
        is_block: bool,
    },
    BlockParam { fresh: LetterId, a: LetterId, expr: LinExpr },
    /// The block system of a stage and the witness used for its letters.
    /// Recorded after the stage's other records.
    Dioph { system: dioph::DiophSystem, witness: Witness },
}

/// What to pop from one variable.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarPop {
    pub left: Option<LetterId>,
    pub right: Option<LetterId>,
    pub empty_after_left: bool,
    pub empty_after_right: bool,
}

pub type PopGuess = BTreeMap<VarId, VarPop>;

fn replace_vars(eq: &Equation, mut f: impl FnMut(VarId, &mut Vec<Symbol>)) -> Equation {
    eq.flat_map_symbols(|s, out| match s {
        Symbol::Var(x) => f(x, out),
        l => out.push(l),
    })
}

/// Pop first letters in `sigma_r` and last letters in `sigma_l` out of variables.
pub fn pop(
    eq: &Equation,
    sigma_l: &BTreeSet<LetterId>,
    sigma_r: &BTreeSet<LetterId>,
    guess: &PopGuess,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    let present = eq.vars();
    for (x, g) in guess {
        if !present.contains(x) {
            return Err(RecompressError::Rejected(format!("variable {} is not in the equation", x.0)));
        }
        if g.left.is_some_and(|b| !sigma_r.contains(&b)) || g.right.is_some_and(|a| !sigma_l.contains(&a)) {
            return Err(RecompressError::Contract(format!("pop letter for {} outside its side set", x.0)));
        }
        if (g.empty_after_left && (g.left.is_none() || g.right.is_some()))
            || (g.empty_after_right && (g.right.is_none() || g.empty_after_left))
        {
            return Err(RecompressError::Contract(format!("inconsistent emptiness for {}", x.0)));
        }
    }
    let out = replace_vars(eq, |x, out| {
        let g = guess.get(&x).copied().unwrap_or_default();
        out.extend(g.left.map(Symbol::Letter));
        if !(g.empty_after_left || g.empty_after_right) {
            out.push(Symbol::Var(x));
        }
        out.extend(g.right.map(Symbol::Letter));
    });
    let records = guess
        .iter()
        .filter(|(_, g)| g.left.is_some() || g.right.is_some())
        .map(|(&var, g)| TransformRecord::Pop {
            var,
            left: g.left,
            right: g.right,
            removed: g.empty_after_left || g.empty_after_right,
        })
        .collect();
    Ok((out, records))
}

// Greedy left-to-right replacement of pairs chosen by `fresh_for`.
fn replace_pairs(side: &[Symbol], fresh_for: &impl Fn(LetterId, LetterId) -> Option<LetterId>) -> Vec<Symbol> {
    let mut out = Vec::with_capacity(side.len());
    let mut i = 0;
    while i < side.len() {
        if let (Symbol::Letter(a), Some(Symbol::Letter(b))) = (side[i], side.get(i + 1)) {
            if let Some(c) = fresh_for(a, *b) {
                out.push(Symbol::Letter(c));
                i += 2;
                continue;
            }
        }
        out.push(side[i]);
        i += 1;
    }
    out
}

/// Replace every explicit `ab` by a fresh letter. The letter is registered
/// even when `ab` does not occur.
pub fn compress_pair(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    a: LetterId,
    b: LetterId,
) -> Result<(Equation, LetterId, TransformRecord), RecompressError> {
    if a == b {
        return Err(RecompressError::Contract("pair compression needs two distinct letters".into()));
    }
    let fresh = registry.register_pair(a, b).map_err(|e| RecompressError::Contract(e.to_string()))?;
    let pick = |x, y| (x == a && y == b).then_some(fresh);
    let out = Equation::new(replace_pairs(&eq.lhs, &pick), replace_pairs(&eq.rhs, &pick));
    Ok((out, fresh, TransformRecord::Pair { fresh, a, b }))
}

fn explicit_pairs(eq: &Equation) -> BTreeSet<(LetterId, LetterId)> {
    let mut out = BTreeSet::new();
    for side in [&eq.lhs, &eq.rhs] {
        for w in side.windows(2) {
            if let (Symbol::Letter(a), Symbol::Letter(b)) = (w[0], w[1]) {
                out.insert((a, b));
            }
        }
    }
    out
}

/// Pop, then compress every occurring pair in `sigma_l x sigma_r`.
///
/// Fresh letters are allocated in lexicographic pair order. Such pairs
/// never overlap, so all of them are replaced in one scan.
pub fn pair_comp_crossing(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    sigma_l: &BTreeSet<LetterId>,
    sigma_r: &BTreeSet<LetterId>,
    guess: &PopGuess,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    if !sigma_l.is_disjoint(sigma_r) {
        return Err(RecompressError::Contract("left and right letter sets overlap".into()));
    }
    let (popped, mut records) = pop(eq, sigma_l, sigma_r, guess)?;
    let mut fresh = BTreeMap::new();
    for (a, b) in explicit_pairs(&popped) {
        if sigma_l.contains(&a) && sigma_r.contains(&b) {
            let c = registry.register_pair(a, b).map_err(|e| RecompressError::Contract(e.to_string()))?;
            records.push(TransformRecord::Pair { fresh: c, a, b });
            fresh.insert((a, b), c);
        }
    }
    if fresh.is_empty() {
        return Ok((popped, records));
    }
    let pick = |x, y| fresh.get(&(x, y)).copied();
    Ok((Equation::new(replace_pairs(&popped.lhs, &pick), replace_pairs(&popped.rhs, &pick)), records))
}

/// Maximal runs `(letter, length)` of a side with the index range they cover.
fn runs(side: &[Symbol]) -> Vec<(Option<LetterId>, usize)> {
    let mut out: Vec<(Option<LetterId>, usize)> = Vec::new();
    for &s in side {
        match (s, out.last_mut()) {
            (Symbol::Letter(a), Some((Some(b), n))) if *b == a => *n += 1,
            (Symbol::Letter(a), _) => out.push((Some(a), 1)),
            (Symbol::Var(_), _) => out.push((None, 1)),
        }
    }
    out
}

/// Replace every explicit maximal run `a^k` with `k >= 2` by a fresh letter,
/// one per distinct length.
pub fn compress_blocks_explicit(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    a: LetterId,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    let lengths: BTreeSet<usize> = [&eq.lhs, &eq.rhs]
        .into_iter()
        .flat_map(|s| runs(s))
        .filter(|&(l, n)| l == Some(a) && n >= 2)
        .map(|(_, n)| n)
        .collect();
    let mut fresh = BTreeMap::new();
    let mut records = Vec::new();
    for n in lengths {
        let c = registry.register_block(a, BigUint::from(n)).map_err(|e| RecompressError::Contract(e.to_string()))?;
        records.push(TransformRecord::BlockExplicit { fresh: c, a, len: BigUint::from(n) });
        fresh.insert(n, c);
    }
    let side = |s: &[Symbol]| {
        let mut out = Vec::with_capacity(s.len());
        let mut i = 0;
        for (l, n) in runs(s) {
            match fresh.get(&n) {
                Some(&c) if l == Some(a) => out.push(Symbol::Letter(c)),
                _ => out.extend_from_slice(&s[i..i + n]),
            }
            i += n;
        }
        out
    };
    Ok((Equation::new(side(&eq.lhs), side(&eq.rhs)), records))
}

/// Explicit guess for cutting runs off one variable.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CutGuess {
    pub first: LetterId,
    pub left_len: BigUint,
    pub last: LetterId,
    /// Zero exactly when `is_block`.
    pub right_len: BigUint,
    pub is_block: bool,
    pub empty: bool,
}

pub type CutPlan = BTreeMap<VarId, CutGuess>;

/// A symbol of an equation whose letter runs are stored by length.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum RunToken {
    Run(LetterId, BigUint),
    Var(VarId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct RunEquation {
    pub lhs: Vec<RunToken>,
    pub rhs: Vec<RunToken>,
}

/// The default explicit block cap `2^(2n)` for an input of length `n`.
pub fn default_block_cap(n: usize) -> BigUint {
    BigUint::one() << (2 * n)
}

/// Replace each `X` by `a^l X b^r` with the guessed lengths.
pub fn cut_pref_suff_explicit(
    eq: &Equation,
    plan: &CutPlan,
    cap: &BigUint,
) -> Result<(RunEquation, Vec<TransformRecord>), RecompressError> {
    for x in eq.vars() {
        let g = plan.get(&x).ok_or_else(|| RecompressError::Contract(format!("no cut guess for {}", x.0)))?;
        if g.left_len < BigUint::one() || g.is_block != (g.right_len == BigUint::default()) {
            return Err(RecompressError::Contract(format!("malformed cut guess for {}", x.0)));
        }
        if g.is_block && (!g.empty || g.first != g.last) {
            return Err(RecompressError::Contract(format!("block guess for {} must be a removed single run", x.0)));
        }
        if &g.left_len > cap || &g.right_len > cap {
            return Err(RecompressError::Rejected(format!("run length for {} exceeds the cap", x.0)));
        }
        if !g.is_block && g.empty && g.first == g.last {
            return Err(RecompressError::Rejected(format!("variable {} cannot be a two-run block", x.0)));
        }
    }
    let side = |s: &[Symbol]| {
        let mut out = Vec::with_capacity(s.len());
        for &sym in s {
            match sym {
                Symbol::Letter(a) => out.push(RunToken::Run(a, BigUint::one())),
                Symbol::Var(x) => {
                    let g = &plan[&x];
                    out.push(RunToken::Run(g.first, g.left_len.clone()));
                    if !g.empty {
                        out.push(RunToken::Var(x));
                    }
                    if !g.is_block {
                        out.push(RunToken::Run(g.last, g.right_len.clone()));
                    }
                }
            }
        }
        out
    };
    let records = eq
        .vars()
        .into_iter()
        .map(|x| {
            let g = &plan[&x];
            TransformRecord::Cut {
                var: x,
                left: (g.first, g.left_len.clone()),
                right: (!g.is_block).then(|| (g.last, g.right_len.clone())),
                removed: g.empty,
            }
        })
        .collect();
    Ok((RunEquation { lhs: side(&eq.lhs), rhs: side(&eq.rhs) }, records))
}

fn merge_runs(side: &[RunToken]) -> Vec<RunToken> {
    let mut out: Vec<RunToken> = Vec::with_capacity(side.len());
    for t in side {
        match (t, out.last_mut()) {
            (RunToken::Run(a, n), Some(RunToken::Run(b, m))) if a == b => *m += n,
            _ => out.push(t.clone()),
        }
    }
    out
}

/// Cut runs with explicit lengths, then compress every maximal run of
/// length at least two, one fresh letter per distinct (letter, length).
pub fn block_comp_explicit(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    plan: &CutPlan,
    cap: &BigUint,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    let (cut, mut records) = cut_pref_suff_explicit(eq, plan, cap)?;
    let sides = [merge_runs(&cut.lhs), merge_runs(&cut.rhs)];
    let mut wanted: BTreeSet<(LetterId, BigUint)> = BTreeSet::new();
    for t in sides.iter().flatten() {
        if let RunToken::Run(a, n) = t {
            if *n > BigUint::one() {
                wanted.insert((*a, n.clone()));
            }
        }
    }
    let mut fresh = BTreeMap::new();
    for (a, n) in wanted {
        let c = registry.register_block(a, n.clone()).map_err(|e| RecompressError::Contract(e.to_string()))?;
        records.push(TransformRecord::BlockExplicit { fresh: c, a, len: n.clone() });
        fresh.insert((a, n), c);
    }
    let lower = |side: &[RunToken]| -> Vec<Symbol> {
        side.iter()
            .map(|t| match t {
                RunToken::Var(x) => Symbol::Var(*x),
                RunToken::Run(a, n) if n.is_one() => Symbol::Letter(*a),
                RunToken::Run(a, n) => Symbol::Letter(fresh[&(*a, n.clone())]),
            })
            .collect()
    };
    Ok((Equation::new(lower(&sides[0]), lower(&sides[1])), records))
}

/// How the block stage of a phase is resolved.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BlockChoice {
    Param {
        pss: PrefixSuffixStructure,
        empties: BTreeSet<VarId>,
        partition: Vec<Vec<usize>>,
        witness: Witness,
    },
    Explicit { plan: CutPlan },
}

/// How one pair stage of a phase is resolved.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PairChoice {
    pub left: BTreeSet<LetterId>,
    pub right: BTreeSet<LetterId>,
    pub pops: PopGuess,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhaseChoices {
    pub block: BlockChoice,
    pub pairs: [PairChoice; 2],
}

pub fn apply_block_choice(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    choice: &BlockChoice,
    cap: &BigUint,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    match choice {
        BlockChoice::Param { pss, empties, partition, witness } => {
            let r = dioph::block_comp_param(eq, registry, pss, empties, partition, Some(witness))?;
            Ok((r.equation, r.records))
        }
        BlockChoice::Explicit { plan } => block_comp_explicit(eq, registry, plan, cap),
    }
}

/// Apply a pair stage; both letter sets must be drawn from letters present in `eq`.
pub fn apply_pair_choice(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    choice: &PairChoice,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    let present = eq.letters();
    if !choice.left.is_subset(&present) || !choice.right.is_subset(&present) {
        return Err(RecompressError::Contract("partition uses letters absent from the equation".into()));
    }
    pair_comp_crossing(eq, registry, &choice.left, &choice.right, &choice.pops)
}

/// One phase: block compression, then two pair stages. The second pair
/// stage partitions the letters present after the first one.
pub fn phase(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    choices: &PhaseChoices,
    cap: &BigUint,
) -> Result<(Equation, Vec<TransformRecord>), RecompressError> {
    if eq.is_trivial() {
        return Err(RecompressError::Contract("phase called on a trivial equation".into()));
    }
    let (mut cur, mut records) = apply_block_choice(eq, registry, &choices.block, cap)?;
    for p in &choices.pairs {
        let (next, more) = apply_pair_choice(&cur, registry, p)?;
        records.extend(more);
        cur = next;
    }
    Ok((cur, records))
}

/// All splits of `letters` into (left, right), visited in Gray-code order.
pub fn letter_partitions(letters: &BTreeSet<LetterId>) -> Vec<(BTreeSet<LetterId>, BTreeSet<LetterId>)> {
    let ls: Vec<LetterId> = letters.iter().copied().collect();
    assert!(ls.len() < 32, "too many letters to enumerate partitions");
    (0u64..1 << ls.len())
        .map(|i| {
            let g = i ^ (i >> 1);
            let (l, r): (Vec<_>, Vec<_>) = ls.iter().enumerate().partition(|(j, _)| g >> j & 1 == 1);
            (l.into_iter().map(|(_, &a)| a).collect(), r.into_iter().map(|(_, &a)| a).collect())
        })
        .collect()
}

/// Every pop guess a variable admits for the given split.
pub fn var_pop_options(sigma_l: &BTreeSet<LetterId>, sigma_r: &BTreeSet<LetterId>) -> Vec<VarPop> {
    let mut out = vec![VarPop::default()];
    let mut rights = vec![(None, false)];
    for &a in sigma_l {
        rights.push((Some(a), false));
        rights.push((Some(a), true));
    }
    for &b in sigma_r {
        out.push(VarPop { left: Some(b), empty_after_left: true, ..VarPop::default() });
    }
    for &(right, empty_after_right) in &rights[1..] {
        out.push(VarPop { right, empty_after_right, ..VarPop::default() });
    }
    for &b in sigma_r {
        for &(right, empty_after_right) in &rights {
            out.push(VarPop { left: Some(b), right, empty_after_right, empty_after_left: false });
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{canonical_form, Problem};

    fn set(ids: &[u32]) -> BTreeSet<LetterId> {
        ids.iter().map(|&i| LetterId(i)).collect()
    }

    // a=0, b=1, c=2; X=0, Y=1
    fn example() -> Problem {
        Problem::parse("aXca=abYa").unwrap()
    }

    fn show(p: &Problem, reg: &AlphabetRegistry, eq: &Equation) -> String {
        p.show(reg, eq)
    }

    #[test]
    fn pop_prepends_first_letter() {
        let p = example();
        let guess = PopGuess::from([(VarId(0), VarPop { left: Some(LetterId(1)), ..Default::default() })]);
        let (eq, rec) = pop(&p.equation, &set(&[0, 2]), &set(&[1]), &guess).unwrap();
        assert_eq!(show(&p, &p.registry, &eq), "abXca=abYa");
        assert_eq!(rec, vec![TransformRecord::Pop { var: VarId(0), left: Some(LetterId(1)), right: None, removed: false }]);
    }

    #[test]
    fn empty_guess_is_identity() {
        let p = example();
        let (eq, rec) = pop(&p.equation, &set(&[0]), &set(&[1]), &PopGuess::new()).unwrap();
        assert_eq!(eq, p.equation);
        assert!(rec.is_empty());
    }

    #[test]
    fn pop_with_removal() {
        let p = Problem::parse("Xa=aX").unwrap();
        let guess = PopGuess::from([(VarId(0), VarPop { left: Some(LetterId(0)), empty_after_left: true, ..Default::default() })]);
        let (eq, rec) = pop(&p.equation, &set(&[]), &set(&[0]), &guess).unwrap();
        assert_eq!(show(&p, &p.registry, &eq), "aa=aa");
        assert_eq!(rec, vec![TransformRecord::Pop { var: VarId(0), left: Some(LetterId(0)), right: None, removed: true }]);
    }

    #[test]
    fn pop_rejects_absent_variable() {
        let p = Problem::parse("Xa=aX").unwrap();
        let guess = PopGuess::from([(VarId(3), VarPop { left: Some(LetterId(0)), ..Default::default() })]);
        assert!(matches!(pop(&p.equation, &set(&[]), &set(&[0]), &guess), Err(RecompressError::Rejected(_))));
    }

    #[test]
    fn compress_pair_in_example() {
        let p = Problem::parse("abXca=abYa").unwrap();
        let mut reg = p.registry.clone();
        let (eq, c, _) = compress_pair(&p.equation, &mut reg, LetterId(0), LetterId(1)).unwrap();
        assert_eq!(c, LetterId(3));
        assert_eq!(show(&p, &reg, &eq), "#3 X c a=#3 Y a");
    }

    #[test]
    fn compress_pair_is_greedy() {
        let p = Problem::parse("ababa=ababa").unwrap();
        let mut reg = p.registry.clone();
        let (eq, _, _) = compress_pair(&p.equation, &mut reg, LetterId(0), LetterId(1)).unwrap();
        assert_eq!(show(&p, &reg, &eq), "#2 #2 a=#2 #2 a");
        assert!(!explicit_pairs(&eq).contains(&(LetterId(0), LetterId(1))));
        assert!(compress_pair(&p.equation, &mut reg, LetterId(1), LetterId(1)).is_err());
    }

    #[test]
    fn absent_pair_still_registers() {
        let p = Problem::parse("aa=aa").unwrap();
        let mut reg = AlphabetRegistry::new(["a", "b"]);
        let (eq, _, _) = compress_pair(&p.equation, &mut reg, LetterId(0), LetterId(1)).unwrap();
        assert_eq!(eq, p.equation);
        assert_eq!(reg.len(), 3);
    }

    #[test]
    fn example_phase_pair_stages() {
        let p = example();
        let mut reg = p.registry.clone();
        let x = VarId(0);
        let y = VarId(1);
        let g1 = PopGuess::from([(x, VarPop { left: Some(LetterId(1)), ..Default::default() })]);
        let (eq, _) = pair_comp_crossing(&p.equation, &mut reg, &set(&[0, 2]), &set(&[1]), &g1).unwrap();
        assert_eq!(show(&p, &reg, &eq), "#3 X c a=#3 Y a");
        // Second stage: c left, a right, Y pops a trailing c.
        let g2 = PopGuess::from([(y, VarPop { right: Some(LetterId(2)), ..Default::default() })]);
        let (eq, _) = pair_comp_crossing(&eq, &mut reg, &set(&[2]), &set(&[0]), &g2).unwrap();
        assert_eq!(show(&p, &reg, &eq), "#3 X #4=#3 Y #4");
    }

    #[test]
    fn empty_left_set_is_identity() {
        let p = example();
        let mut reg = p.registry.clone();
        let (eq, rec) = pair_comp_crossing(&p.equation, &mut reg, &set(&[]), &set(&[0, 1, 2]), &PopGuess::new()).unwrap();
        assert_eq!(eq, p.equation);
        assert!(rec.is_empty());
    }

    #[test]
    fn explicit_blocks() {
        let p = Problem::parse("aabaaab=ab").unwrap();
        let mut reg = p.registry.clone();
        let (eq, rec) = compress_blocks_explicit(&p.equation, &mut reg, LetterId(0)).unwrap();
        assert_eq!(show(&p, &reg, &eq), "#2 b #3 b=ab");
        assert_eq!(rec.len(), 2);
        let p = Problem::parse("aXa=aXa").unwrap();
        let (eq, rec) = compress_blocks_explicit(&p.equation, &mut reg, LetterId(0)).unwrap();
        assert_eq!(eq, p.equation);
        assert!(rec.is_empty());
    }

    fn block_guess(a: u32, n: u32) -> CutGuess {
        CutGuess {
            first: LetterId(a),
            left_len: BigUint::from(n),
            last: LetterId(a),
            right_len: BigUint::default(),
            is_block: true,
            empty: true,
        }
    }

    #[test]
    fn cut_block_variable() {
        let p = Problem::parse("Xb=aab").unwrap();
        let plan = CutPlan::from([(VarId(0), block_guess(0, 2))]);
        let cap = default_block_cap(p.equation.len());
        let (runs, _) = cut_pref_suff_explicit(&p.equation, &plan, &cap).unwrap();
        assert_eq!(runs.lhs, vec![RunToken::Run(LetterId(0), BigUint::from(2u32)), RunToken::Run(LetterId(1), BigUint::one())]);
        let too_big = CutPlan::from([(VarId(0), block_guess(0, 5000))]);
        assert!(matches!(cut_pref_suff_explicit(&p.equation, &too_big, &cap), Err(RecompressError::Rejected(_))));
    }

    #[test]
    fn block_comp_explicit_merges_runs() {
        let p = Problem::parse("aXa=aaa").unwrap();
        let mut reg = p.registry.clone();
        let plan = CutPlan::from([(VarId(0), block_guess(0, 1))]);
        let (eq, _) = block_comp_explicit(&p.equation, &mut reg, &plan, &default_block_cap(7)).unwrap();
        assert_eq!(show(&p, &reg, &eq), "#1=#1");
        assert_eq!(reg.expansion_length(LetterId(1)).unwrap(), &BigUint::from(3u32));
    }

    #[test]
    fn partitions_in_gray_order() {
        let parts = letter_partitions(&set(&[0, 1]));
        assert_eq!(parts.len(), 4);
        for w in parts.windows(2) {
            let moved = w[0].0.symmetric_difference(&w[1].0).count();
            assert_eq!(moved, 1);
        }
    }

    #[test]
    fn pop_options_are_distinct_and_valid() {
        let opts = var_pop_options(&set(&[0]), &set(&[1, 2]));
        let unique: BTreeSet<_> = opts.iter().collect();
        assert_eq!(unique.len(), opts.len());
        // none; 2 left-and-empty; 2 right-only; 2 lefts x 3 rights
        assert_eq!(opts.len(), 1 + 2 + 2 + 6);
    }

    #[test]
    fn canonical_forms_ignore_pair_order() {
        let p = Problem::parse("abXcd=abYcd").unwrap();
        let l = set(&[0, 2]);
        let r = set(&[1, 3]);
        let mut reg1 = p.registry.clone();
        let (e1, _) = pair_comp_crossing(&p.equation, &mut reg1, &l, &r, &PopGuess::new()).unwrap();
        let mut reg2 = p.registry.clone();
        let (tmp, _, _) = compress_pair(&p.equation, &mut reg2, LetterId(2), LetterId(3)).unwrap();
        let (e2, _, _) = compress_pair(&tmp, &mut reg2, LetterId(0), LetterId(1)).unwrap();
        assert_eq!(canonical_form(&e1, &reg1).0, canonical_form(&e2, &reg2).0);
    }
}
