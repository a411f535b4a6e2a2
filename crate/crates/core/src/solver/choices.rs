//! Enumeration of the nondeterministic choices of each stage.

use std::collections::BTreeSet;

use num_bigint::BigUint;

use crate::dioph::{self, PrefixSuffixStructure, VarShape};
use super::prune;
use crate::model::{AlphabetRegistry, Equation, LetterId, Symbol, VarId};
use crate::recompress::{
    var_pop_options, BlockChoice, CutGuess, CutPlan, PairChoice, PopGuess, TransformRecord, VarPop,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every subset of the variables, ordered by the variable occurrences and
/// then the length left after erasing it, so cheap roots come first.
pub fn erase_choices(eq: &Equation) -> Vec<BTreeSet<VarId>> {
    let vars: Vec<VarId> = eq.vars().into_iter().collect();
    let mut subsets: Vec<BTreeSet<VarId>> = (0u64..1 << vars.len())
        .map(|m| vars.iter().enumerate().filter(|(i, _)| m >> i & 1 == 1).map(|(_, &x)| x).collect())
        .collect();
    subsets.sort_by_cached_key(|s| {
        let (e, _) = apply_erase(eq, s);
        (e.var_occurrences(), e.len())
    });
    subsets
}

pub fn apply_erase(eq: &Equation, erased: &BTreeSet<VarId>) -> (Equation, Vec<TransformRecord>) {
    let out = eq.flat_map_symbols(|s, out| match s {
        Symbol::Var(x) if erased.contains(&x) => {}
        s => out.push(s),
    });
    (out, erased.iter().map(|&var| TransformRecord::Erase { var }).collect())
}

/// Shapes a variable may take, with its emptiness after cutting.
fn shape_options(letters: &BTreeSet<LetterId>) -> Vec<(VarShape, bool)> {
    let mut out = Vec::new();
    for &a in letters {
        out.push((VarShape { first: a, last: a, is_block: true }, true));
    }
    for &a in letters {
        for &b in letters {
            let shape = VarShape { first: a, last: b, is_block: false };
            out.push((shape, false));
            if a != b {
                out.push((shape, true));
            }
        }
    }
    out
}

fn side_ends(side: &[Symbol], pss: &PrefixSuffixStructure) -> Option<(LetterId, LetterId)> {
    let first = match side.first()? {
        Symbol::Letter(a) => *a,
        Symbol::Var(x) => pss[x].first,
    };
    let last = match side.last()? {
        Symbol::Letter(a) => *a,
        Symbol::Var(x) if pss[x].is_block => pss[x].first,
        Symbol::Var(x) => pss[x].last,
    };
    Some((first, last))
}

/// Lazy cartesian product of option lists, first list varying fastest.
pub struct Product<T> {
    options: Vec<Vec<T>>,
    idx: Option<Vec<usize>>,
}

impl<T: Clone> Product<T> {
    pub fn new(options: Vec<Vec<T>>) -> Self {
        let idx = (!options.iter().any(Vec::is_empty)).then(|| vec![0; options.len()]);
        Product { options, idx }
    }
}

impl<T: Clone> Iterator for Product<T> {
    type Item = Vec<T>;

    fn next(&mut self) -> Option<Vec<T>> {
        let idx = self.idx.as_mut()?;
        let item = idx.iter().zip(&self.options).map(|(&i, o)| o[i].clone()).collect();
        let mut k = 0;
        loop {
            if k == idx.len() {
                self.idx = None;
                break;
            }
            idx[k] += 1;
            if idx[k] < self.options[k].len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
        Some(item)
    }
}

/// Optional shuffling of option lists, for randomized search orders.
pub type Shuffle<'r> = Option<&'r mut ChaCha8Rng>;

fn shuffled<T>(mut v: Vec<T>, rng: &mut Shuffle) -> Vec<T> {
    if let Some(r) = rng.as_deref_mut() {
        v.shuffle(r);
    }
    v
}

/// Parametric block-stage choices: every prefix-suffix structure over the
/// present letters whose side ends agree, with every feasible partition.
///
/// Structures are built one variable at a time and abandoned as soon as the
/// variables fixed so far leave no solution.
pub fn param_block_choices<'e>(
    eq: &'e Equation,
    registry: &AlphabetRegistry,
    mut rng: Shuffle,
) -> impl Iterator<Item = BlockChoice> + 'e {
    let vars: Vec<VarId> = eq.vars().into_iter().collect();
    let options: Vec<_> = vars.iter().map(|_| shuffled(shape_options(&eq.letters()), &mut rng)).collect();
    let combos = viable_shapes(eq, registry, &vars, &options);
    combos.into_iter().flat_map(move |combo| {
        let pss: PrefixSuffixStructure = vars.iter().zip(&combo).map(|(&x, (s, _))| (x, *s)).collect();
        let empties: BTreeSet<VarId> = vars.iter().zip(&combo).filter(|(_, (_, e))| *e).map(|(&x, _)| x).collect();
        if let (Some(l), Some(r)) = (side_ends(&eq.lhs, &pss), side_ends(&eq.rhs, &pss)) {
            if l != r {
                return Vec::new();
            }
        }
        let Ok((tokens, _)) = dioph::pref_suff_parametric(eq, &pss, &empties) else {
            return Vec::new();
        };
        let blocks = dioph::collect_param_blocks(&tokens);
        let Some(forced) = dioph::forced_merges(&tokens, &blocks) else {
            return Vec::new();
        };
        dioph::feasible_partitions(&blocks, &forced)
            .into_iter()
            .map(|(partition, _, witness)| BlockChoice::Param {
                pss: pss.clone(),
                empties: empties.clone(),
                partition,
                witness,
            })
            .collect()
    })
}

// Words over the old alphabet that a variable of the given shape must match,
// with the variable itself standing for a nonempty remainder. A value of the
// shape fits at least one of them.
fn shape_proxies(x: VarId, (shape, empty): (VarShape, bool)) -> Vec<Vec<Symbol>> {
    let (a, b, v) = (Symbol::Letter(shape.first), Symbol::Letter(shape.last), Symbol::Var(x));
    match (shape.is_block, empty) {
        (true, _) => vec![vec![a], vec![a, v]],
        (false, false) => vec![vec![a, v, b]],
        (false, true) => vec![vec![a, b], vec![a, v, b]],
    }
}

fn replace_var(eq: &Equation, x: VarId, word: &[Symbol]) -> Equation {
    eq.flat_map_symbols(|s, out| match s {
        Symbol::Var(y) if y == x => out.extend_from_slice(word),
        s => out.push(s),
    })
}

// Shape combinations, one per variable, for which some choice of proxies
// leaves an equation that is not obviously unsatisfiable.
fn viable_shapes(
    eq: &Equation,
    registry: &AlphabetRegistry,
    vars: &[VarId],
    options: &[Vec<(VarShape, bool)>],
) -> Vec<Vec<(VarShape, bool)>> {
    fn rec(
        k: usize,
        alive: Vec<Equation>,
        registry: &AlphabetRegistry,
        vars: &[VarId],
        options: &[Vec<(VarShape, bool)>],
        cur: &mut Vec<(VarShape, bool)>,
        out: &mut Vec<Vec<(VarShape, bool)>>,
    ) {
        if k == vars.len() {
            out.push(cur.clone());
            return;
        }
        for &opt in &options[k] {
            let next: Vec<Equation> = alive
                .iter()
                .flat_map(|e| shape_proxies(vars[k], opt).into_iter().map(move |w| replace_var(e, vars[k], &w)))
                .filter(|e| !prune::is_dead(e, registry))
                .collect();
            if next.is_empty() {
                continue;
            }
            cur.push(opt);
            rec(k + 1, next, registry, vars, options, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(0, vec![eq.clone()], registry, vars, options, &mut Vec::new(), &mut out);
    out
}

/// Explicit block-stage choices with run lengths up to `max_len`.
pub fn explicit_block_choices(eq: &Equation, max_len: usize) -> impl Iterator<Item = BlockChoice> + '_ {
    let vars: Vec<VarId> = eq.vars().into_iter().collect();
    let mut per_var: Vec<CutGuess> = Vec::new();
    for (shape, empty) in shape_options(&eq.letters()) {
        for l in 1..=max_len {
            if shape.is_block {
                per_var.push(CutGuess {
                    first: shape.first,
                    left_len: BigUint::from(l),
                    last: shape.last,
                    right_len: BigUint::default(),
                    is_block: true,
                    empty,
                });
                continue;
            }
            for r in 1..=max_len {
                per_var.push(CutGuess {
                    first: shape.first,
                    left_len: BigUint::from(l),
                    last: shape.last,
                    right_len: BigUint::from(r),
                    is_block: false,
                    empty,
                });
            }
        }
    }
    Product::new(vec![per_var; vars.len()]).filter_map(move |combo| {
        let plan: CutPlan = vars.iter().copied().zip(combo).collect();
        let pss: PrefixSuffixStructure = plan
            .iter()
            .map(|(&x, g)| (x, VarShape { first: g.first, last: g.last, is_block: g.is_block }))
            .collect();
        if let (Some(l), Some(r)) = (side_ends(&eq.lhs, &pss), side_ends(&eq.rhs, &pss)) {
            if l != r {
                return None;
            }
        }
        Some(BlockChoice::Explicit { plan })
    })
}

// What a variable becomes once its pops are done.
fn popped_word(x: VarId, pop: &VarPop) -> Vec<Symbol> {
    let mut w: Vec<Symbol> = pop.left.map(Symbol::Letter).into_iter().collect();
    if pop.empty_after_left {
        return w;
    }
    if !pop.empty_after_right {
        w.push(Symbol::Var(x));
    }
    w.extend(pop.right.map(Symbol::Letter));
    w
}

/// Pop guesses for the given split, as a product over variables, skipping
/// those whose popped equation is obviously unsatisfiable.
pub fn pop_guesses(
    eq: &Equation,
    registry: &AlphabetRegistry,
    left: &BTreeSet<LetterId>,
    right: &BTreeSet<LetterId>,
    rng: &mut Shuffle,
) -> Vec<PopGuess> {
    fn rec(
        k: usize,
        eq: &Equation,
        registry: &AlphabetRegistry,
        vars: &[VarId],
        options: &[Vec<VarPop>],
        cur: &mut PopGuess,
        out: &mut Vec<PopGuess>,
    ) {
        if k == vars.len() {
            out.push(cur.clone());
            return;
        }
        let x = vars[k];
        for pop in &options[k] {
            if pop.left.is_none() && pop.right.is_none() {
                rec(k + 1, eq, registry, vars, options, cur, out);
                continue;
            }
            let next = replace_var(eq, x, &popped_word(x, pop));
            if prune::is_dead(&next, registry) {
                continue;
            }
            cur.insert(x, *pop);
            rec(k + 1, &next, registry, vars, options, cur, out);
            cur.remove(&x);
        }
    }
    let vars: Vec<VarId> = eq.vars().into_iter().collect();
    let options: Vec<Vec<VarPop>> = vars.iter().map(|_| shuffled(var_pop_options(left, right), rng)).collect();
    let mut out = Vec::new();
    rec(0, eq, registry, &vars, &options, &mut PopGuess::new(), &mut out);
    out
}

/// Every pair-stage choice over the letters present in `eq`.
///
/// Splits with an empty side compress nothing and are skipped, except that
/// an equation with fewer than two letters gets a single do-nothing choice.
/// Splits are produced lazily; a shuffle visits them in a random affine
/// order of their bit masks.
pub fn pair_choices<'e>(
    eq: &'e Equation,
    registry: AlphabetRegistry,
    mut rng: Shuffle,
) -> Box<dyn Iterator<Item = PairChoice> + 'e> {
    let letters: Vec<LetterId> = eq.letters().into_iter().collect();
    let k = letters.len();
    if k < 2 {
        return Box::new(std::iter::once(PairChoice::default()));
    }
    assert!(k < 64, "too many letters to enumerate splits");
    let full: u64 = (1u64 << k) - 1;
    let (mul, add) = match rng.as_deref_mut() {
        Some(r) => (r.gen::<u64>() | 1, r.gen::<u64>()),
        None => (1, 0),
    };
    let base_seed: Option<u64> = rng.map(|r| r.gen());
    Box::new(
        (0..=full)
            .map(move |i| {
                let m = i.wrapping_mul(mul).wrapping_add(add) & full;
                m ^ (m >> 1)
            })
            .filter(move |&g| g != 0 && g != full)
            .flat_map(move |g| {
                let (left, right): (BTreeSet<LetterId>, BTreeSet<LetterId>) = {
                    let (l, r): (Vec<_>, Vec<_>) = letters.iter().enumerate().partition(|(j, _)| g >> j & 1 == 1);
                    (l.into_iter().map(|(_, &a)| a).collect(), r.into_iter().map(|(_, &a)| a).collect())
                };
                let mut r = base_seed.map(|s| ChaCha8Rng::seed_from_u64(s ^ g));
                pop_guesses(eq, &registry, &left, &right, &mut r.as_mut())
                    .into_iter()
                    .map(move |pops| PairChoice { left: left.clone(), right: right.clone(), pops })
            }),
    )
}
