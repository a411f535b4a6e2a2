//! Brute-force reference solver.
//!
//! Tries every assignment in length-lexicographic order: by total length,
//! then by the split of that length among variables (first variable
//! longest first), then by the words themselves in lexicographic order.

use std::collections::BTreeSet;

use crate::model::{AlphabetRegistry, Equation, LetterId, Substitution, VarId};
use crate::solver::reconstruct::{verify, Verdict};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OracleLimits {
    /// Largest sum of the lengths of all variable values.
    pub max_total_len: usize,
    /// Letters values are drawn from; `None` means the letters of the equation.
    pub alphabet: Option<BTreeSet<LetterId>>,
    /// Whether a variable may be the empty word.
    pub allow_empty: bool,
}

impl OracleLimits {
    pub fn new(max_total_len: usize) -> Self {
        OracleLimits { max_total_len, alphabet: None, allow_empty: true }
    }

    pub fn nonempty(self) -> Self {
        OracleLimits { allow_empty: false, ..self }
    }

    pub fn with_alphabet(self, alphabet: BTreeSet<LetterId>) -> Self {
        OracleLimits { alphabet: Some(alphabet), ..self }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum OracleResult {
    Found(Substitution),
    NoneUpTo(usize),
}

impl OracleResult {
    pub fn found(&self) -> Option<&Substitution> {
        match self {
            OracleResult::Found(s) => Some(s),
            OracleResult::NoneUpTo(_) => None,
        }
    }
}

/// The first solution in enumeration order, if any is within the limits.
pub fn brute_solve(eq: &Equation, registry: &AlphabetRegistry, limits: &OracleLimits) -> OracleResult {
    let mut found = None;
    for_each_solution(eq, registry, limits, |s| {
        found = Some(s.clone());
        false
    });
    match found {
        Some(s) => OracleResult::Found(s),
        None => OracleResult::NoneUpTo(limits.max_total_len),
    }
}

/// Every solution within the limits, in enumeration order.
pub fn enumerate_solutions(eq: &Equation, registry: &AlphabetRegistry, limits: &OracleLimits) -> Vec<Substitution> {
    let mut out = Vec::new();
    for_each_solution(eq, registry, limits, |s| {
        out.push(s.clone());
        true
    });
    out
}

/// Call `f` on each solution until it returns false.
pub fn for_each_solution(
    eq: &Equation,
    registry: &AlphabetRegistry,
    limits: &OracleLimits,
    mut f: impl FnMut(&Substitution) -> bool,
) {
    let vars: Vec<VarId> = eq.vars().into_iter().collect();
    let alphabet: Vec<LetterId> = limits.alphabet.clone().unwrap_or_else(|| eq.letters()).into_iter().collect();
    let cap = expansion_cap(eq, registry, limits.max_total_len);
    let min = usize::from(!limits.allow_empty);
    for total in 0..=limits.max_total_len {
        let mut go = true;
        for_each_split(vars.len(), total, min, &mut |lens| {
            for_each_words(&alphabet, lens, &mut |words| {
                let sigma: Substitution = vars.iter().copied().zip(words.iter().cloned()).collect();
                if verify(eq, &sigma, registry, cap) == Verdict::Equal {
                    go = f(&sigma);
                }
                go
            });
            go
        });
        if !go {
            return;
        }
    }
}

fn expansion_cap(eq: &Equation, registry: &AlphabetRegistry, total: usize) -> usize {
    let letters: usize = eq
        .letters()
        .iter()
        .map(|&a| registry.expansion_length(a).ok().and_then(num_traits::ToPrimitive::to_usize).unwrap_or(usize::MAX))
        .fold(0usize, |a, b| a.saturating_add(b));
    letters.saturating_mul(eq.len()).saturating_add(total.saturating_mul(eq.var_occurrences())).max(1)
}

// Ways to write `total` as `k` parts each at least `min`, first part largest first.
fn for_each_split(k: usize, total: usize, min: usize, f: &mut dyn FnMut(&[usize]) -> bool) {
    fn rec(k: usize, left: usize, min: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if cur.len() + 1 == k {
            cur.push(left);
            let go = f(cur);
            cur.pop();
            return go;
        }
        let rest_min = (k - cur.len() - 1) * min;
        if left < rest_min {
            return true;
        }
        for first in (min..=left - rest_min).rev() {
            cur.push(first);
            let go = rec(k, left - first, min, cur, f);
            cur.pop();
            if !go {
                return false;
            }
        }
        true
    }
    if k == 0 {
        if total == 0 {
            f(&[]);
        }
        return;
    }
    if total < k * min {
        return;
    }
    rec(k, total, min, &mut Vec::with_capacity(k), f);
}

// All tuples of words with the given lengths, lexicographically.
fn for_each_words(alphabet: &[LetterId], lens: &[usize], f: &mut dyn FnMut(&[Vec<LetterId>]) -> bool) -> bool {
    let total: usize = lens.iter().sum();
    if total > 0 && alphabet.is_empty() {
        return true;
    }
    let n = alphabet.len().max(1);
    let mut digits = vec![0usize; total];
    let mut words: Vec<Vec<LetterId>> = lens.iter().map(|&l| vec![LetterId(0); l]).collect();
    loop {
        let mut d = 0;
        for w in words.iter_mut() {
            for c in w.iter_mut() {
                *c = alphabet[digits[d]];
                d += 1;
            }
        }
        if !f(&words) {
            return false;
        }
        let mut i = total;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            digits[i] += 1;
            if digits[i] < n {
                break;
            }
            digits[i] = 0;
        }
    }
}

/// Exhaustive corpus of small equations, one per symmetry class.
///
/// Sides are words over `letters` and `vars` of length at most `max_side`,
/// with at most `max_occurrences` variable occurrences in total and at
/// least one. Two equations are in the same class when one becomes the
/// other by swapping sides, reversing both sides, or renaming letters
/// among themselves and variables among themselves. The representative is
/// the least text in the class.
pub fn small_corpus(letters: &str, vars: &str, max_side: usize, max_occurrences: usize) -> Vec<String> {
    let symbols: Vec<char> = letters.chars().chain(vars.chars()).collect();
    let mut sides: Vec<String> = Vec::new();
    for len in 0..=max_side {
        let mut idx = vec![0usize; len];
        loop {
            let s: String = idx.iter().map(|&i| symbols[i]).collect();
            if s.chars().filter(|c| vars.contains(*c)).count() <= max_occurrences {
                sides.push(s);
            }
            let mut i = len;
            loop {
                if i == 0 {
                    break;
                }
                i -= 1;
                idx[i] += 1;
                if idx[i] < symbols.len() {
                    break;
                }
                idx[i] = 0;
            }
            if idx.iter().all(|&d| d == 0) {
                break;
            }
        }
    }
    let letter_perms = permutations(&letters.chars().collect::<Vec<_>>());
    let var_perms = permutations(&vars.chars().collect::<Vec<_>>());
    let mut seen = BTreeSet::new();
    let occ = |s: &str| s.chars().filter(|c| vars.contains(*c)).count();
    for l in &sides {
        for r in &sides {
            let k = occ(l) + occ(r);
            if k == 0 || k > max_occurrences {
                continue;
            }
            let mut best: Option<String> = None;
            for lp in &letter_perms {
                for vp in &var_perms {
                    let map = |s: &str| -> String {
                        s.chars()
                            .map(|c| match letters.find(c) {
                                Some(i) => lp[i],
                                None => vp[vars.find(c).expect("symbol")],
                            })
                            .collect()
                    };
                    let (ml, mr) = (map(l), map(r));
                    let (rl, rr): (String, String) = (ml.chars().rev().collect(), mr.chars().rev().collect());
                    for cand in [
                        format!("{ml}={mr}"),
                        format!("{mr}={ml}"),
                        format!("{rl}={rr}"),
                        format!("{rr}={rl}"),
                    ] {
                        if best.as_ref().is_none_or(|b| cand < *b) {
                            best = Some(cand);
                        }
                    }
                }
            }
            seen.insert(best.expect("nonempty permutation set"));
        }
    }
    seen.into_iter().collect()
}

fn permutations(items: &[char]) -> Vec<Vec<char>> {
    if items.is_empty() {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for i in 0..items.len() {
        let mut rest = items.to_vec();
        let head = rest.remove(i);
        for mut p in permutations(&rest) {
            p.insert(0, head);
            out.push(p);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Problem;

    fn show(p: &Problem, s: &Substitution) -> Vec<String> {
        s.iter().map(|(_, w)| p.show_word(&p.registry, w)).collect()
    }

    #[test]
    fn first_solution_of_example() {
        let p = Problem::parse("aXca=abYa").unwrap();
        let r = brute_solve(&p.equation, &p.registry, &OracleLimits::new(4));
        assert_eq!(show(&p, r.found().unwrap()), ["b", "c"]);
    }

    #[test]
    fn no_solution() {
        let p = Problem::parse("a=b").unwrap();
        assert_eq!(brute_solve(&p.equation, &p.registry, &OracleLimits::new(3)), OracleResult::NoneUpTo(3));
        assert!(enumerate_solutions(&p.equation, &p.registry, &OracleLimits::new(3)).is_empty());
    }

    #[test]
    fn empty_policy() {
        let p = Problem::parse("X=Y").unwrap();
        let lim = OracleLimits::new(2).with_alphabet(p.registry.input_letters().collect());
        // No letters at all: only the empty assignment exists.
        assert_eq!(show(&p, brute_solve(&p.equation, &p.registry, &lim).found().unwrap()), ["", ""]);
        assert!(brute_solve(&p.equation, &p.registry, &lim.nonempty()).found().is_none());
        let p = Problem::parse("X=Ya").unwrap();
        let r = brute_solve(&p.equation, &p.registry, &OracleLimits::new(3).nonempty());
        assert_eq!(show(&p, r.found().unwrap()), ["aa", "a"]);
    }

    #[test]
    fn powers_of_a() {
        let p = Problem::parse("aX=Xa").unwrap();
        let all = enumerate_solutions(&p.equation, &p.registry, &OracleLimits::new(3).nonempty());
        let got: Vec<String> = all.iter().map(|s| show(&p, s).concat()).collect();
        assert_eq!(got, ["a", "aa", "aaa"]);
        let with_empty = enumerate_solutions(&p.equation, &p.registry, &OracleLimits::new(3));
        assert_eq!(with_empty.len(), 4);
    }

    #[test]
    fn splits_in_order() {
        let mut got = Vec::new();
        for_each_split(2, 2, 0, &mut |s| {
            got.push(s.to_vec());
            true
        });
        assert_eq!(got, [vec![2, 0], vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn corpus_classes() {
        let c = small_corpus("ab", "X", 1, 2);
        // Up to symmetry: X=, X=X, X=a, a=X ~ X=a, X=Y none (one variable).
        assert_eq!(c, ["=X", "X=X", "X=a"]);
    }
}
