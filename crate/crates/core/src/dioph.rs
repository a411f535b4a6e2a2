//! Small linear Diophantine systems and parametric block compression.
//!
//! When a variable `X` starts with a run of `a_X` and ends with a run of
//! `b_X`, the run lengths are unknown. They become parameters `x_X` and
//! `y_X`, maximal same-letter runs of the equation become linear
//! expressions over them, and a guessed grouping of equal-length runs
//! becomes a system of equalities. The system is decided by repeated
//! parity guessing and halving, which keeps every constant small.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::Zero;
use serde::{Deserialize, Serialize};

use crate::model::{AlphabetRegistry, Equation, LetterId, Symbol, VarId};
use crate::recompress::{RecompressError, TransformRecord};

/// A run-length parameter: `X(v)` is the length of the leading run of `v`,
/// `Y(v)` the length of its trailing run.
///
/// Serialized as `"x3"` or `"y3"` so that it can key a JSON object.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum Param {
    X(VarId),
    Y(VarId),
}

impl From<Param> for String {
    fn from(p: Param) -> String {
        p.render(&default_var_name)
    }
}

impl TryFrom<String> for Param {
    type Error = String;

    fn try_from(s: String) -> Result<Param, String> {
        let bad = || format!("bad parameter name {s:?}");
        let id = s.get(1..).and_then(|n| n.parse().ok()).map(VarId).ok_or_else(bad)?;
        match s.as_bytes().first() {
            Some(b'x') => Ok(Param::X(id)),
            Some(b'y') => Ok(Param::Y(id)),
            _ => Err(bad()),
        }
    }
}

impl Param {
    pub fn var(self) -> VarId {
        match self {
            Param::X(v) | Param::Y(v) => v,
        }
    }

    pub fn render(self, var_name: &dyn Fn(VarId) -> String) -> String {
        match self {
            Param::X(v) => format!("x{}", var_name(v)),
            Param::Y(v) => format!("y{}", var_name(v)),
        }
    }
}

fn default_var_name(v: VarId) -> String {
    v.0.to_string()
}

pub type Witness = BTreeMap<Param, BigUint>;

/// `constant + sum(coeff * param)` with natural coefficients.
#[derive(Clone, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LinExpr {
    pub constant: u64,
    pub coeffs: BTreeMap<Param, u64>,
}

impl LinExpr {
    pub fn constant(c: u64) -> Self {
        LinExpr { constant: c, coeffs: BTreeMap::new() }
    }

    pub fn param(p: Param) -> Self {
        LinExpr { constant: 0, coeffs: BTreeMap::from([(p, 1)]) }
    }

    pub fn add(&mut self, other: &LinExpr) {
        self.constant += other.constant;
        for (&p, &k) in &other.coeffs {
            *self.coeffs.entry(p).or_insert(0) += k;
        }
    }

    pub fn is_constant(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn params(&self) -> impl Iterator<Item = Param> + '_ {
        self.coeffs.keys().copied()
    }

    /// Value under `w`; parameters missing from `w` count as zero.
    pub fn eval(&self, w: &Witness) -> BigUint {
        let mut total = BigUint::from(self.constant);
        for (p, &k) in &self.coeffs {
            if let Some(v) = w.get(p) {
                total += v * k;
            }
        }
        total
    }

    /// True when `self > other` under every assignment with the given
    /// positive parameters at least one and the rest at least zero.
    pub fn always_greater(&self, other: &LinExpr, positive: &dyn Fn(Param) -> bool) -> bool {
        // self - other = (c_s - c_o) + sum (k_s - k_o) p. Each p with a
        // negative net coefficient must be absent, so the minimum is reached
        // at the lower bounds.
        let mut min = self.constant as i128 - other.constant as i128;
        let keys: BTreeSet<Param> = self.params().chain(other.params()).collect();
        for p in keys {
            let d = *self.coeffs.get(&p).unwrap_or(&0) as i128 - *other.coeffs.get(&p).unwrap_or(&0) as i128;
            if d < 0 {
                return false;
            }
            if positive(p) {
                min += d;
            }
        }
        min > 0
    }

    pub fn render(&self, var_name: &dyn Fn(VarId) -> String) -> String {
        let mut parts = Vec::new();
        if self.constant != 0 || self.coeffs.is_empty() {
            parts.push(self.constant.to_string());
        }
        for (p, &k) in &self.coeffs {
            if k == 1 {
                parts.push(p.render(var_name));
            } else {
                parts.push(format!("{}*{}", k, p.render(var_name)));
            }
        }
        parts.join(" + ")
    }
}

impl fmt::Display for LinExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&default_var_name))
    }
}

/// Equalities between expressions plus `p >= 1` for each parameter in `positive`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DiophSystem {
    pub equalities: Vec<(LinExpr, LinExpr)>,
    pub positive: BTreeSet<Param>,
}

impl DiophSystem {
    pub fn params(&self) -> BTreeSet<Param> {
        let mut out = self.positive.clone();
        for (l, r) in &self.equalities {
            out.extend(l.params());
            out.extend(r.params());
        }
        out
    }

    pub fn satisfied_by(&self, w: &Witness) -> bool {
        self.positive.iter().all(|p| w.get(p).is_some_and(|v| !v.is_zero()))
            && self.equalities.iter().all(|(l, r)| l.eval(w) == r.eval(w))
    }

    pub fn constant_sum(&self) -> u64 {
        self.equalities.iter().map(|(l, r)| l.constant + r.constant).sum()
    }

    pub fn coefficient_sum(&self) -> u64 {
        self.equalities.iter().flat_map(|(l, r)| l.coeffs.values().chain(r.coeffs.values())).sum()
    }

    /// Total coefficient of `p` over all equality sides.
    pub fn coefficient_of(&self, p: Param) -> u64 {
        self.equalities
            .iter()
            .map(|(l, r)| l.coeffs.get(&p).unwrap_or(&0) + r.coeffs.get(&p).unwrap_or(&0))
            .sum()
    }

    /// Upper bound `(w + r) * e^(c/e)` on components of minimal solutions,
    /// where each equality is read as `sum n_ij p_j = n_i`.
    pub fn minimal_solution_bound(&self) -> f64 {
        let params: Vec<Param> = self.params().into_iter().collect();
        let r = params.len() as f64;
        let mut w = r;
        let mut c = 0.0;
        for (l, rhs) in &self.equalities {
            w += (rhs.constant as f64 - l.constant as f64).abs();
            for p in &params {
                let n = *l.coeffs.get(p).unwrap_or(&0) as f64 - *rhs.coeffs.get(p).unwrap_or(&0) as f64;
                c += n.abs();
            }
        }
        (w + r) * (c / std::f64::consts::E).exp()
    }

    pub fn render(&self, var_name: &dyn Fn(VarId) -> String) -> String {
        let mut lines: Vec<String> =
            self.equalities.iter().map(|(l, r)| format!("{} = {}", l.render(var_name), r.render(var_name))).collect();
        lines.extend(self.positive.iter().map(|p| format!("{} >= 1", p.render(var_name))));
        lines.join("\n")
    }
}

impl fmt::Display for DiophSystem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.render(&default_var_name))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum DiophOutcome {
    Sat(Witness),
    Unsat,
}

impl DiophOutcome {
    pub fn witness(self) -> Option<Witness> {
        match self {
            DiophOutcome::Sat(w) => Some(w),
            DiophOutcome::Unsat => None,
        }
    }
}

/// Counters from one run of the parity search.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParityStats {
    pub states: usize,
    /// Largest sum of constants seen at the end of any round.
    pub max_residual: u64,
    /// `max(initial constant sum, coefficient sum)`.
    pub residual_bound: u64,
}

struct ParitySearch {
    // Per equality: coefficients of each param on the left and right.
    lcoef: Vec<Vec<u64>>,
    rcoef: Vec<Vec<u64>>,
    nparams: usize,
    visited: HashSet<(Vec<u64>, u64)>,
    stats: ParityStats,
}

impl ParitySearch {
    // `consts` holds (left, right) per equality, flattened. Returns the
    // parity masks of each round on success.
    fn run(&mut self, consts: &[u64], flags: u64) -> Option<Vec<u64>> {
        if flags == 0 && consts.iter().all(|&c| c == 0) {
            return Some(Vec::new());
        }
        if !self.visited.insert((consts.to_vec(), flags)) {
            return None;
        }
        self.stats.states += 1;
        let mut next = vec![0u64; consts.len()];
        'masks: for mask in (0..(1u64 << self.nparams)).rev() {
            for (i, eq) in consts.chunks(2).enumerate() {
                let add = |coef: &[u64]| -> u64 {
                    coef.iter().enumerate().filter(|(j, _)| mask >> j & 1 == 1).map(|(_, k)| k).sum()
                };
                let l = eq[0] + add(&self.lcoef[i]);
                let r = eq[1] + add(&self.rcoef[i]);
                if l % 2 != r % 2 {
                    continue 'masks;
                }
                next[2 * i] = l / 2;
                next[2 * i + 1] = r / 2;
            }
            let residual: u64 = next.iter().sum();
            self.stats.max_residual = self.stats.max_residual.max(residual);
            if let Some(mut rounds) = self.run(&next.clone(), flags & !mask) {
                rounds.insert(0, mask);
                return Some(rounds);
            }
        }
        None
    }
}

/// Decide a system by guessing parities and halving.
pub fn dioph_satisfiable(system: &DiophSystem) -> DiophOutcome {
    dioph_satisfiable_instrumented(system).0
}

/// [`dioph_satisfiable`] together with search statistics.
///
/// Each round guesses the lowest bit of every parameter, substitutes
/// `p -> 2p + bit`, rejects if some equality has sides of different
/// parity, and halves both sides. A `p >= 1` constraint is discharged by
/// the first round that guesses bit 1 for `p`. The search is a depth-first
/// walk over parity vectors (all ones first, so small witnesses come out
/// early) that never revisits a residual state; since the constant sum
/// stays bounded the walk is finite.
pub fn dioph_satisfiable_instrumented(system: &DiophSystem) -> (DiophOutcome, ParityStats) {
    let params: Vec<Param> = system.params().into_iter().collect();
    assert!(params.len() < 64, "parity search supports at most 63 parameters");
    let index: BTreeMap<Param, usize> = params.iter().enumerate().map(|(i, &p)| (p, i)).collect();
    let coef_vec = |e: &LinExpr| {
        let mut v = vec![0u64; params.len()];
        for (p, &k) in &e.coeffs {
            v[index[p]] = k;
        }
        v
    };
    let mut search = ParitySearch {
        lcoef: system.equalities.iter().map(|(l, _)| coef_vec(l)).collect(),
        rcoef: system.equalities.iter().map(|(_, r)| coef_vec(r)).collect(),
        nparams: params.len(),
        visited: HashSet::new(),
        stats: ParityStats::default(),
    };
    let consts: Vec<u64> = system.equalities.iter().flat_map(|(l, r)| [l.constant, r.constant]).collect();
    let flags = system.positive.iter().fold(0u64, |acc, p| acc | 1 << index[p]);
    let initial: u64 = consts.iter().sum();
    search.stats.max_residual = initial;
    search.stats.residual_bound = initial.max(system.coefficient_sum());
    let outcome = match search.run(&consts, flags) {
        None => DiophOutcome::Unsat,
        Some(rounds) => {
            let mut w = Witness::new();
            for (j, &p) in params.iter().enumerate() {
                let mut q = BigUint::zero();
                for (i, mask) in rounds.iter().enumerate() {
                    if mask >> j & 1 == 1 {
                        q.set_bit(i as u64, true);
                    }
                }
                w.insert(p, q);
            }
            assert!(system.satisfied_by(&w), "parity search produced a non-solution");
            DiophOutcome::Sat(w)
        }
    };
    (outcome, search.stats)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum BruteOutcome {
    Found(Witness),
    NoneUpTo(u64),
}

/// Lexicographically least solution with every component at most `cap`.
pub fn dioph_brute_force(system: &DiophSystem, cap: u64) -> BruteOutcome {
    let order: Vec<Param> = system.params().into_iter().collect();
    dioph_brute_force_ordered(system, cap, &order)
}

/// As [`dioph_brute_force`], comparing assignments in the given parameter order.
pub fn dioph_brute_force_ordered(system: &DiophSystem, cap: u64, order: &[Param]) -> BruteOutcome {
    let mut found = None;
    brute_walk(system, cap, order, &mut |w| {
        found = Some(w);
        false
    });
    match found {
        Some(w) => BruteOutcome::Found(w),
        None => BruteOutcome::NoneUpTo(cap),
    }
}

/// Up to `limit` solutions with every component at most `cap`, in
/// lexicographic order of the parameters.
pub fn enumerate_witnesses(system: &DiophSystem, cap: u64, limit: usize) -> Vec<Witness> {
    let order: Vec<Param> = system.params().into_iter().collect();
    let mut out = Vec::new();
    if limit == 0 {
        return out;
    }
    brute_walk(system, cap, &order, &mut |w| {
        out.push(w);
        out.len() < limit
    });
    out
}

// Visit solutions in lexicographic order until `f` returns false.
fn brute_walk(system: &DiophSystem, cap: u64, order: &[Param], f: &mut dyn FnMut(Witness) -> bool) {
    let eqs: Vec<(i128, Vec<i128>)> = system
        .equalities
        .iter()
        .map(|(l, r)| {
            let coef = order
                .iter()
                .map(|p| *l.coeffs.get(p).unwrap_or(&0) as i128 - *r.coeffs.get(p).unwrap_or(&0) as i128)
                .collect();
            (l.constant as i128 - r.constant as i128, coef)
        })
        .collect();
    let lows: Vec<i128> = order.iter().map(|p| system.positive.contains(p) as i128).collect();
    let mut values = vec![0i128; order.len()];
    let mut emit = |values: &[i128]| f(order.iter().zip(values).map(|(&p, &v)| (p, BigUint::from(v as u64))).collect());
    brute_assign(&eqs, &lows, cap as i128, 0, &mut values, &mut emit);
}

// Returns false once the visitor asks to stop.
fn brute_assign(
    eqs: &[(i128, Vec<i128>)],
    lows: &[i128],
    cap: i128,
    k: usize,
    values: &mut [i128],
    emit: &mut dyn FnMut(&[i128]) -> bool,
) -> bool {
    // Every equality's residual must still be able to reach zero.
    for (c, coef) in eqs {
        let (mut lo, mut hi) = (*c, *c);
        for (j, &n) in coef.iter().enumerate() {
            let (a, b) = if j < k { (values[j], values[j]) } else { (lows[j], cap) };
            lo += (n * a).min(n * b);
            hi += (n * a).max(n * b);
        }
        if lo > 0 || hi < 0 {
            return true;
        }
    }
    if k == values.len() {
        return emit(values);
    }
    for v in lows[k]..=cap {
        values[k] = v;
        if !brute_assign(eqs, lows, cap, k + 1, values, emit) {
            return false;
        }
    }
    true
}

/// Minimal solutions reachable as lexicographic minima under every
/// parameter order (each such minimum is componentwise minimal).
pub fn lex_minimal_witnesses(system: &DiophSystem, cap: u64) -> Vec<Witness> {
    let params: Vec<Param> = system.params().into_iter().collect();
    let mut out: Vec<Witness> = Vec::new();
    permute(&mut params.clone(), 0, &mut |order| {
        if let BruteOutcome::Found(w) = dioph_brute_force_ordered(system, cap, order) {
            if !out.contains(&w) {
                out.push(w);
            }
        }
    });
    out
}

fn permute(items: &mut Vec<Param>, k: usize, f: &mut dyn FnMut(&[Param])) {
    if k == items.len() {
        f(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, f);
        items.swap(k, i);
    }
}

/// Per-variable shape guessed for the block stage.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarShape {
    pub first: LetterId,
    pub last: LetterId,
    /// The value is a single run `first^k`.
    pub is_block: bool,
}

pub type PrefixSuffixStructure = BTreeMap<VarId, VarShape>;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Token {
    Letter(LetterId),
    Run(LetterId, Param),
    Var(VarId),
}

impl Token {
    fn run_letter(&self) -> Option<LetterId> {
        match self {
            Token::Letter(a) | Token::Run(a, _) => Some(*a),
            Token::Var(_) => None,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct TokenEquation {
    pub lhs: Vec<Token>,
    pub rhs: Vec<Token>,
}

/// A maximal same-letter run of tokens and its symbolic length.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ParamBlock {
    pub letter: LetterId,
    pub expr: LinExpr,
    /// 0 for lhs, 1 for rhs.
    pub side: usize,
    pub span: std::ops::Range<usize>,
}

/// Replace each `X` by `a_X^{x_X} X b_X^{y_X}` (no trailing run for blocks),
/// dropping `X` itself when it is in `empties`.
pub fn pref_suff_parametric(
    eq: &Equation,
    pss: &PrefixSuffixStructure,
    empties: &BTreeSet<VarId>,
) -> Result<(TokenEquation, Vec<TransformRecord>), RecompressError> {
    for x in eq.vars() {
        let shape = pss.get(&x).ok_or_else(|| RecompressError::Contract(format!("no shape for variable {}", x.0)))?;
        if shape.is_block && (shape.first != shape.last || !empties.contains(&x)) {
            return Err(RecompressError::Contract(format!("block variable {} must be one removed run", x.0)));
        }
        if !shape.is_block && empties.contains(&x) && shape.first == shape.last {
            // a^x a^y is a single run, which contradicts the non-block shape.
            return Err(RecompressError::Rejected(format!("variable {} cannot be a two-run block", x.0)));
        }
    }
    let side = |s: &[Symbol]| -> Vec<Token> {
        let mut out = Vec::with_capacity(s.len());
        for &sym in s {
            match sym {
                Symbol::Letter(a) => out.push(Token::Letter(a)),
                Symbol::Var(x) => {
                    let shape = pss[&x];
                    out.push(Token::Run(shape.first, Param::X(x)));
                    if !empties.contains(&x) {
                        out.push(Token::Var(x));
                    }
                    if !shape.is_block {
                        out.push(Token::Run(shape.last, Param::Y(x)));
                    }
                }
            }
        }
        out
    };
    let tokens = TokenEquation { lhs: side(&eq.lhs), rhs: side(&eq.rhs) };
    let records = eq
        .vars()
        .into_iter()
        .map(|x| {
            let shape = pss[&x];
            TransformRecord::PrefSuff {
                var: x,
                left: shape.first,
                left_param: Param::X(x),
                right: (!shape.is_block).then_some((shape.last, Param::Y(x))),
                removed: empties.contains(&x),
                is_block: shape.is_block,
            }
        })
        .collect();
    Ok((tokens, records))
}

/// Maximal same-letter runs of both sides, lhs first. Variables break runs.
pub fn collect_param_blocks(tokens: &TokenEquation) -> Vec<ParamBlock> {
    let mut out = Vec::new();
    for (side, seq) in [&tokens.lhs, &tokens.rhs].into_iter().enumerate() {
        let mut i = 0;
        while i < seq.len() {
            let Some(letter) = seq[i].run_letter() else {
                i += 1;
                continue;
            };
            let start = i;
            let mut expr = LinExpr::default();
            while i < seq.len() && seq[i].run_letter() == Some(letter) {
                match &seq[i] {
                    Token::Letter(_) => expr.constant += 1,
                    Token::Run(_, p) => *expr.coeffs.entry(*p).or_insert(0) += 1,
                    Token::Var(_) => unreachable!(),
                }
                i += 1;
            }
            out.push(ParamBlock { letter, expr, side, span: start..i });
        }
    }
    out
}

/// Chain the expressions of each class into equalities and require every
/// parameter used by any block to be positive.
pub fn word_to_diophantine(blocks: &[ParamBlock], partition: &[Vec<usize>]) -> Result<DiophSystem, RecompressError> {
    let mut system = DiophSystem::default();
    for class in partition {
        for w in class.windows(2) {
            let (a, b) = (&blocks[w[0]], &blocks[w[1]]);
            if a.letter != b.letter {
                return Err(RecompressError::Contract("partition class mixes letters".into()));
            }
            system.equalities.push((a.expr.clone(), b.expr.clone()));
        }
    }
    for b in blocks {
        system.positive.extend(b.expr.params());
    }
    Ok(system)
}

/// Result of [`block_comp_param`].
#[derive(Clone, Debug)]
pub struct ParamBlockResult {
    pub equation: Equation,
    pub records: Vec<TransformRecord>,
    pub system: DiophSystem,
    pub witness: Witness,
}

/// Cut parametric prefixes and suffixes, then replace each class of runs
/// by one letter whose length is the class expression at a witness.
///
/// A class containing a lone explicit letter is forced to length one and
/// keeps that letter; every other class gets a fresh block letter.
/// With `witness` given it is checked against the system instead of solving.
pub fn block_comp_param(
    eq: &Equation,
    registry: &mut AlphabetRegistry,
    pss: &PrefixSuffixStructure,
    empties: &BTreeSet<VarId>,
    partition: &[Vec<usize>],
    witness: Option<&Witness>,
) -> Result<ParamBlockResult, RecompressError> {
    let (tokens, mut records) = pref_suff_parametric(eq, pss, empties)?;
    let blocks = collect_param_blocks(&tokens);
    check_partition(&blocks, partition)?;
    let system = word_to_diophantine(&blocks, partition)?;
    let witness = match witness {
        Some(w) if system.satisfied_by(w) => w.clone(),
        Some(_) => return Err(RecompressError::Rejected("witness does not satisfy the block system".into())),
        None => dioph_satisfiable(&system)
            .witness()
            .ok_or_else(|| RecompressError::Rejected("block system is unsatisfiable".into()))?,
    };
    let mut letter_of = vec![LetterId(0); blocks.len()];
    for class in partition {
        let first = &blocks[class[0]];
        let keeps = class.iter().any(|&i| blocks[i].expr == LinExpr::constant(1));
        let letter = if keeps {
            first.letter
        } else {
            let len = first.expr.eval(&witness);
            let fresh = registry.register_block(first.letter, len).map_err(|e| RecompressError::Contract(e.to_string()))?;
            records.push(TransformRecord::BlockParam { fresh, a: first.letter, expr: first.expr.clone() });
            fresh
        };
        for &i in class {
            letter_of[i] = letter;
        }
    }
    let mut sides: [Vec<Symbol>; 2] = [Vec::new(), Vec::new()];
    let mut next_block = 0;
    for (side, seq) in [&tokens.lhs, &tokens.rhs].into_iter().enumerate() {
        let mut i = 0;
        while i < seq.len() {
            if let Token::Var(x) = seq[i] {
                sides[side].push(Symbol::Var(x));
                i += 1;
            } else {
                let b = &blocks[next_block];
                debug_assert_eq!((b.side, b.span.start), (side, i));
                sides[side].push(Symbol::Letter(letter_of[next_block]));
                i = b.span.end;
                next_block += 1;
            }
        }
    }
    records.push(TransformRecord::Dioph { system: system.clone(), witness: witness.clone() });
    let [lhs, rhs] = sides;
    Ok(ParamBlockResult { equation: Equation::new(lhs, rhs), records, system, witness })
}

fn check_partition(blocks: &[ParamBlock], partition: &[Vec<usize>]) -> Result<(), RecompressError> {
    let mut seen = vec![false; blocks.len()];
    for &i in partition.iter().flatten() {
        if i >= blocks.len() || std::mem::replace(&mut seen[i], true) {
            return Err(RecompressError::Contract("partition does not cover the blocks exactly once".into()));
        }
    }
    if partition.iter().any(Vec::is_empty) || seen.contains(&false) {
        return Err(RecompressError::Contract("partition does not cover the blocks exactly once".into()));
    }
    Ok(())
}

/// Group blocks by letter and value under `w`: the partition a solution induces.
pub fn coherent_partition(blocks: &[ParamBlock], w: &Witness) -> Vec<Vec<usize>> {
    let mut classes: BTreeMap<(LetterId, BigUint), Vec<usize>> = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        classes.entry((b.letter, b.expr.eval(w))).or_default().push(i);
    }
    let mut out: Vec<Vec<usize>> = classes.into_values().collect();
    out.sort();
    out
}

/// Pairs of blocks that must share a class for the compressed sides not to
/// start or end with two different letters.
///
/// Walks in from both ends while the sides show blocks or the same variable
/// in step. `None` when such a forced pair has two different letters.
pub fn forced_merges(tokens: &TokenEquation, blocks: &[ParamBlock]) -> Option<Vec<(usize, usize)>> {
    #[derive(Clone, Copy, PartialEq)]
    enum Item {
        Block(usize),
        Var(VarId),
    }
    let items = |side: usize, seq: &[Token]| -> Vec<Item> {
        let mut out = Vec::new();
        let mut bi = blocks.iter().enumerate().filter(|(_, b)| b.side == side).peekable();
        let mut i = 0;
        while i < seq.len() {
            match (&seq[i], bi.peek()) {
                (Token::Var(x), _) => {
                    out.push(Item::Var(*x));
                    i += 1;
                }
                (_, Some(&(k, b))) => {
                    out.push(Item::Block(k));
                    i = b.span.end;
                    bi.next();
                }
                (_, None) => unreachable!("every run token lies in a block"),
            }
        }
        out
    };
    let (l, r) = (items(0, &tokens.lhs), items(1, &tokens.rhs));
    let mut out = Vec::new();
    let mut walk = |pairs: &mut dyn Iterator<Item = (Item, Item)>| -> bool {
        for (x, y) in pairs {
            match (x, y) {
                (Item::Block(i), Item::Block(j)) => {
                    if blocks[i].letter != blocks[j].letter {
                        return false;
                    }
                    out.push((i, j));
                }
                (Item::Var(x), Item::Var(y)) if x == y => {}
                _ => break,
            }
        }
        true
    };
    if !walk(&mut l.iter().copied().zip(r.iter().copied())) || !walk(&mut l.iter().rev().copied().zip(r.iter().rev().copied())) {
        return None;
    }
    Some(out)
}

/// Every partition worth trying for the given blocks, each with a witness.
///
/// Blocks with identical expressions always share a class, as do the
/// `forced` pairs; blocks whose lengths provably differ never do, and only
/// partitions whose system is satisfiable are returned. Classes are listed
/// by smallest member.
pub fn feasible_partitions(
    blocks: &[ParamBlock],
    forced: &[(usize, usize)],
) -> Vec<(Vec<Vec<usize>>, DiophSystem, Witness)> {
    // Merge identical (letter, expr) blocks and forced pairs up front.
    let mut root: Vec<usize> = (0..blocks.len()).collect();
    fn find(root: &mut [usize], i: usize) -> usize {
        if root[i] != i {
            let r = find(root, root[i]);
            root[i] = r;
        }
        root[i]
    }
    let mut first_of: BTreeMap<(LetterId, &LinExpr), usize> = BTreeMap::new();
    for (i, b) in blocks.iter().enumerate() {
        let j = *first_of.entry((b.letter, &b.expr)).or_insert(i);
        let (ri, rj) = (find(&mut root, i), find(&mut root, j));
        root[ri] = rj;
    }
    for &(i, j) in forced {
        let (ri, rj) = (find(&mut root, i), find(&mut root, j));
        root[ri] = rj;
    }
    let mut group_of: BTreeMap<usize, usize> = BTreeMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..blocks.len() {
        let r = find(&mut root, i);
        let g = *group_of.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    let positive: BTreeSet<Param> = blocks.iter().flat_map(|b| b.expr.params()).collect();
    let is_pos = |p: Param| positive.contains(&p);
    let pair_ok = |i: usize, j: usize| {
        let (a, b) = (&blocks[i], &blocks[j]);
        a.letter == b.letter && !a.expr.always_greater(&b.expr, &is_pos) && !b.expr.always_greater(&a.expr, &is_pos)
    };
    let ng = groups.len();
    if groups.iter().any(|g| g.iter().any(|&i| g.iter().any(|&j| !pair_ok(i, j)))) {
        return Vec::new();
    }
    let mut compatible = vec![vec![false; ng]; ng];
    for i in 0..ng {
        for j in 0..ng {
            compatible[i][j] = groups[i].iter().all(|&a| groups[j].iter().all(|&b| pair_ok(a, b)));
        }
    }
    let mut out = Vec::new();
    let mut classes: Vec<Vec<usize>> = Vec::new();
    grow_partitions(0, ng, &compatible, &mut classes, &mut |classes| {
        let mut partition: Vec<Vec<usize>> = classes
            .iter()
            .map(|c| {
                let mut members: Vec<usize> = c.iter().flat_map(|&g| groups[g].iter().copied()).collect();
                members.sort();
                members
            })
            .collect();
        partition.sort();
        let system = word_to_diophantine(blocks, &partition).expect("classes are single-letter");
        if let DiophOutcome::Sat(w) = dioph_satisfiable(&system) {
            out.push((partition, system, w));
        }
    });
    out
}

fn grow_partitions(
    g: usize,
    ng: usize,
    compatible: &[Vec<bool>],
    classes: &mut Vec<Vec<usize>>,
    emit: &mut dyn FnMut(&[Vec<usize>]),
) {
    if g == ng {
        emit(classes);
        return;
    }
    for c in 0..classes.len() {
        if classes[c].iter().all(|&h| compatible[g][h]) {
            classes[c].push(g);
            grow_partitions(g + 1, ng, compatible, classes, emit);
            classes[c].pop();
        }
    }
    classes.push(vec![g]);
    grow_partitions(g + 1, ng, compatible, classes, emit);
    classes.pop();
}

/// Small-system invariants for a system built from an equation: per-variable
/// coefficient sums at most twice the occurrences, constants at most twice
/// the equation length, and no expression used on more than two sides.
pub fn check_small(system: &DiophSystem, eq: &Equation) -> Result<(), String> {
    for x in eq.vars() {
        let k = eq.occurrences(x) as u64;
        for p in [Param::X(x), Param::Y(x)] {
            let s = system.coefficient_of(p);
            if s > 2 * k {
                return Err(format!("coefficient sum {s} of {p:?} exceeds {}", 2 * k));
            }
        }
    }
    if system.constant_sum() > 2 * eq.len() as u64 {
        return Err(format!("constant sum {} exceeds {}", system.constant_sum(), 2 * eq.len()));
    }
    Ok(())
}

/// Number of equality sides each block index is used on, given the chain
/// layout produced by [`word_to_diophantine`].
pub fn sides_per_block(partition: &[Vec<usize>]) -> BTreeMap<usize, usize> {
    let mut uses = BTreeMap::new();
    for class in partition {
        for w in class.windows(2) {
            *uses.entry(w[0]).or_insert(0) += 1;
            *uses.entry(w[1]).or_insert(0) += 1;
        }
    }
    uses
}
