//! Cheap unsatisfiability tests for search states.
//!
//! A state is only ever cut when it has no solution in which every
//! variable still present is nonempty. Variables that are empty in a
//! solution are removed by the search as soon as that is known, so such
//! states are never needed.

use std::collections::BTreeMap;

use crate::model::{AlphabetRegistry, Equation, Symbol, VarId};

/// Largest right-hand side for which representability is decided exactly.
const DP_LIMIT: i128 = 4096;

pub fn is_dead(eq: &Equation, registry: &AlphabetRegistry) -> bool {
    let (l, r) = cancel(&eq.lhs, &eq.rhs);
    let core = Equation::new(l.to_vec(), r.to_vec());
    ends_disagree(&core) || !counts_balance(&core, registry) || !abstract_counts_balance(&core)
}

// Drop the longest common prefix and suffix: `sU = sV` iff `U = V`.
fn cancel<'e>(mut l: &'e [Symbol], mut r: &'e [Symbol]) -> (&'e [Symbol], &'e [Symbol]) {
    while let (Some(a), Some(b)) = (l.first(), r.first()) {
        if a != b {
            break;
        }
        (l, r) = (&l[1..], &r[1..]);
    }
    while let (Some(a), Some(b)) = (l.last(), r.last()) {
        if a != b {
            break;
        }
        (l, r) = (&l[..l.len() - 1], &r[..r.len() - 1]);
    }
    (l, r)
}

// Occurrence counts with every letter taken as itself. Only needed for
// letters whose counts are not already covered by the expanded check, but
// cheap enough to run on all of them.
fn abstract_counts_balance(eq: &Equation) -> bool {
    let mut weight: BTreeMap<VarId, i128> = BTreeMap::new();
    let mut target: BTreeMap<crate::model::LetterId, i128> = BTreeMap::new();
    for (side, sign) in [(&eq.lhs, 1i128), (&eq.rhs, -1i128)] {
        for &s in side.iter() {
            match s {
                Symbol::Var(x) => *weight.entry(x).or_insert(0) += sign,
                Symbol::Letter(a) => *target.entry(a).or_insert(0) -= sign,
            }
        }
    }
    let coefs: Vec<i128> = weight.values().copied().collect();
    target.values().all(|&c| representable(&coefs, c, 0))
}

fn ends_disagree(eq: &Equation) -> bool {
    match (eq.lhs.is_empty(), eq.rhs.is_empty()) {
        (true, true) => return false,
        (true, false) | (false, true) => return true,
        _ => {}
    }
    let differ = |a: Symbol, b: Symbol| matches!((a, b), (Symbol::Letter(x), Symbol::Letter(y)) if x != y);
    differ(eq.lhs[0], eq.rhs[0]) || differ(eq.lhs[eq.lhs.len() - 1], eq.rhs[eq.rhs.len() - 1])
}

// For every input letter, and for total length, the occurrence counts of
// both sides must be reconcilable by some choice of variable values.
fn counts_balance(eq: &Equation, registry: &AlphabetRegistry) -> bool {
    let k = registry.num_inputs();
    let mut weight: BTreeMap<VarId, i128> = BTreeMap::new();
    let mut target = vec![0i128; k];
    for (side, sign) in [(&eq.lhs, 1i128), (&eq.rhs, -1i128)] {
        for &s in side.iter() {
            match s {
                Symbol::Var(x) => *weight.entry(x).or_insert(0) += sign,
                Symbol::Letter(a) => {
                    let Some(p) = registry.parikh(a) else { return true };
                    for (t, &n) in target.iter_mut().zip(p) {
                        *t -= sign * n as i128;
                    }
                }
            }
        }
    }
    let coefs: Vec<i128> = weight.values().copied().collect();
    if !target.iter().all(|&c| representable(&coefs, c, 0)) {
        return false;
    }
    representable(&coefs, target.iter().sum(), 1)
}

/// Whether `sum coefs[i] * p_i = c` has a solution with every `p_i >= low`.
pub fn representable(coefs: &[i128], c: i128, low: i128) -> bool {
    let c = c - low * coefs.iter().sum::<i128>();
    let nonzero: Vec<i128> = coefs.iter().copied().filter(|&d| d != 0).collect();
    if nonzero.is_empty() {
        return c == 0;
    }
    let g = nonzero.iter().fold(0, |g, &d| gcd(g, d.abs()));
    if c % g != 0 {
        return false;
    }
    let pos = nonzero.iter().any(|&d| d > 0);
    let neg = nonzero.iter().any(|&d| d < 0);
    if pos && neg {
        return true;
    }
    let (c, steps): (i128, Vec<i128>) = if pos { (c, nonzero) } else { (-c, nonzero.iter().map(|d| -d).collect()) };
    if c < 0 {
        return false;
    }
    if c > DP_LIMIT {
        return true;
    }
    let c = c as usize;
    let mut reach = vec![false; c + 1];
    reach[0] = true;
    for v in 1..=c {
        reach[v] = steps.iter().any(|&d| (d as usize) <= v && reach[v - d as usize]);
    }
    reach[c]
}

fn gcd(a: i128, b: i128) -> i128 {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
