//! Turning records back into solutions, and checking solutions.

use num_bigint::BigUint;
use num_traits::One;
use thiserror::Error;

use crate::dioph::{Param, Witness};
use crate::model::{AlphabetRegistry, Equation, Expansion, LetterId, RegistryError, Substitution, Symbol, VarId};
use crate::recompress::TransformRecord;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReconstructError {
    #[error("no witness recorded for the stage that cut {0:?}")]
    MissingWitness(VarId),
    #[error("witness has no value for {0:?}")]
    MissingParam(Param),
    #[error(transparent)]
    Registry(#[from] RegistryError),
}

fn run(registry: &mut AlphabetRegistry, a: LetterId, n: &BigUint) -> Result<Vec<LetterId>, RegistryError> {
    if n.is_one() {
        Ok(vec![a])
    } else if *n == BigUint::default() {
        Ok(Vec::new())
    } else {
        Ok(vec![registry.register_block(a, n.clone())?])
    }
}

fn param_value(witness: Option<&Witness>, var: VarId, p: Param) -> Result<&BigUint, ReconstructError> {
    witness
        .ok_or(ReconstructError::MissingWitness(var))?
        .get(&p)
        .ok_or(ReconstructError::MissingParam(p))
}

/// Undo `records` (in the order they were produced) on a solution of the
/// final equation. Runs cut from variables are added to `registry` as block
/// letters, so values stay compressed.
pub fn reconstruct(
    records: &[TransformRecord],
    trivial: &Substitution,
    registry: &mut AlphabetRegistry,
) -> Result<Substitution, ReconstructError> {
    let mut sigma = trivial.clone();
    let mut witness: Option<&Witness> = None;
    let wrap = |sigma: &mut Substitution, var: VarId, removed: bool, pre: Vec<LetterId>, post: Vec<LetterId>| {
        let mid = if removed { Vec::new() } else { sigma.get(var).to_vec() };
        let mut w = pre;
        w.extend(mid);
        w.extend(post);
        sigma.set(var, w);
    };
    for rec in records.iter().rev() {
        match rec {
            TransformRecord::Dioph { witness: w, .. } => witness = Some(w),
            TransformRecord::Pair { .. } | TransformRecord::BlockExplicit { .. } | TransformRecord::BlockParam { .. } => {}
            TransformRecord::Erase { var } => sigma.set(*var, Vec::new()),
            TransformRecord::Pop { var, left, right, removed } => {
                wrap(&mut sigma, *var, *removed, left.iter().copied().collect(), right.iter().copied().collect())
            }
            TransformRecord::Cut { var, left, right, removed } => {
                let pre = run(registry, left.0, &left.1)?;
                let post = match right {
                    Some((b, n)) => run(registry, *b, n)?,
                    None => Vec::new(),
                };
                wrap(&mut sigma, *var, *removed, pre, post);
            }
            TransformRecord::PrefSuff { var, left, left_param, right, removed, .. } => {
                let pre = run(registry, *left, param_value(witness, *var, *left_param)?)?;
                let post = match right {
                    Some((b, p)) => run(registry, *b, param_value(witness, *var, *p)?)?,
                    None => Vec::new(),
                };
                wrap(&mut sigma, *var, *removed, pre, post);
            }
        }
    }
    Ok(sigma)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Verdict {
    Equal,
    Unequal,
    /// Same length, but longer than the cap.
    Inconclusive(BigUint),
}

/// Compare both sides under `sigma` after expansion to input letters.
pub fn verify(eq: &Equation, sigma: &Substitution, registry: &AlphabetRegistry, cap: usize) -> Verdict {
    let (l, r) = eq.substitute(sigma);
    let (Ok(ll), Ok(rl)) = (registry.word_length(&l), registry.word_length(&r)) else {
        return Verdict::Unequal;
    };
    if ll != rl {
        return Verdict::Unequal;
    }
    match (registry.expand_word(&l, cap), registry.expand_word(&r, cap)) {
        (Ok(Expansion::Full(a)), Ok(Expansion::Full(b))) if a == b => Verdict::Equal,
        (Ok(Expansion::Full(_)), Ok(Expansion::Full(_))) => Verdict::Unequal,
        (Ok(_), Ok(_)) => Verdict::Inconclusive(ll),
        _ => Verdict::Unequal,
    }
}

/// Solve an equation whose sides have at most one symbol each.
///
/// Two distinct variables both get `fill` (a single letter, or the empty
/// word when the alphabet is empty).
pub fn solve_trivial(eq: &Equation, fill: Option<LetterId>) -> Option<Substitution> {
    debug_assert!(eq.is_trivial());
    let fill: Vec<LetterId> = fill.into_iter().collect();
    let mut s = Substitution::new();
    match (eq.lhs.first().copied(), eq.rhs.first().copied()) {
        (None, None) => {}
        (Some(Symbol::Letter(a)), Some(Symbol::Letter(b))) if a == b => {}
        (Some(Symbol::Letter(_)), _) | (_, Some(Symbol::Letter(_))) if eq.vars().is_empty() => return None,
        (Some(Symbol::Var(x)), None) | (None, Some(Symbol::Var(x))) => s.set(x, Vec::new()),
        (Some(Symbol::Var(x)), Some(Symbol::Letter(a))) | (Some(Symbol::Letter(a)), Some(Symbol::Var(x))) => {
            s.set(x, vec![a])
        }
        (Some(Symbol::Var(x)), Some(Symbol::Var(y))) => {
            s.set(x, fill.clone());
            s.set(y, fill);
        }
        _ => return None,
    }
    Some(s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Problem;

    #[test]
    fn no_records_returns_input() {
        let mut reg = AlphabetRegistry::new(["a"]);
        let s: Substitution = [(VarId(0), vec![LetterId(0)])].into_iter().collect();
        assert_eq!(reconstruct(&[], &s, &mut reg).unwrap(), s);
    }

    #[test]
    fn pop_prepends() {
        let mut reg = AlphabetRegistry::new(["a", "b"]);
        let s: Substitution = [(VarId(0), vec![LetterId(1)])].into_iter().collect();
        let rec = [TransformRecord::Pop { var: VarId(0), left: Some(LetterId(0)), right: None, removed: false }];
        let out = reconstruct(&rec, &s, &mut reg).unwrap();
        assert_eq!(out.get(VarId(0)), &[LetterId(0), LetterId(1)]);
    }

    #[test]
    fn missing_witness_is_reported() {
        let mut reg = AlphabetRegistry::new(["a"]);
        let rec = [TransformRecord::PrefSuff {
            var: VarId(0),
            left: LetterId(0),
            left_param: Param::X(VarId(0)),
            right: None,
            removed: true,
            is_block: true,
        }];
        assert_eq!(
            reconstruct(&rec, &Substitution::new(), &mut reg),
            Err(ReconstructError::MissingWitness(VarId(0)))
        );
    }

    #[test]
    fn verify_example() {
        let p = Problem::parse("aXca=abYa").unwrap();
        let mut s = Substitution::new();
        s.set(VarId(0), p.parse_word("baba").unwrap());
        s.set(VarId(1), p.parse_word("abac").unwrap());
        assert_eq!(verify(&p.equation, &s, &p.registry, 100), Verdict::Equal);
        s.set(VarId(0), p.parse_word("b").unwrap());
        s.set(VarId(1), p.parse_word("b").unwrap());
        assert_eq!(verify(&p.equation, &s, &p.registry, 100), Verdict::Unequal);
        s.set(VarId(1), p.parse_word("bb").unwrap());
        assert_eq!(verify(&p.equation, &s, &p.registry, 0), Verdict::Unequal);
        s.set(VarId(1), p.parse_word("c").unwrap());
        assert_eq!(verify(&p.equation, &s, &p.registry, 2), Verdict::Inconclusive(BigUint::from(4u32)));
    }

    #[test]
    fn trivial_cases() {
        let t = |s: &str| {
            let p = Problem::parse(s).unwrap();
            solve_trivial(&p.equation, p.registry.input_letters().next())
        };
        assert!(t("a=a").is_some());
        assert!(t("a=b").is_none());
        assert!(t("a=").is_none());
        assert!(t("=").is_some());
        assert_eq!(t("X=a").unwrap().get(VarId(0)), &[LetterId(0)]);
        assert_eq!(t("X=").unwrap().get(VarId(0)), &[] as &[LetterId]);
        let s = t("X=Y").unwrap();
        assert_eq!(s.get(VarId(0)), s.get(VarId(1)));
    }
}
