//! Symbols, equations, the letter registry and substitutions.
//!
//! Letters and variables live in separate dense id spaces. Input letters
//! occupy the low ids of an [`AlphabetRegistry`]; every later letter records
//! how it was built from older ones (a pair or a block), so the registry is
//! a straight-line program and any letter can be expanded back to input
//! letters.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, ToPrimitive};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct LetterId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl LetterId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl VarId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Symbol {
    Letter(LetterId),
    Var(VarId),
}

impl Symbol {
    pub fn letter(self) -> Option<LetterId> {
        match self {
            Symbol::Letter(a) => Some(a),
            Symbol::Var(_) => None,
        }
    }

    pub fn var(self) -> Option<VarId> {
        match self {
            Symbol::Var(x) => Some(x),
            Symbol::Letter(_) => None,
        }
    }
}

/// A word equation `lhs = rhs`.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
pub struct Equation {
    pub lhs: Vec<Symbol>,
    pub rhs: Vec<Symbol>,
}

impl Equation {
    pub fn new(lhs: Vec<Symbol>, rhs: Vec<Symbol>) -> Self {
        Equation { lhs, rhs }
    }

    pub fn len(&self) -> usize {
        self.lhs.len() + self.rhs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Both sides have at most one symbol.
    pub fn is_trivial(&self) -> bool {
        self.lhs.len() <= 1 && self.rhs.len() <= 1
    }

    pub fn symbols(&self) -> impl Iterator<Item = Symbol> + '_ {
        self.lhs.iter().chain(self.rhs.iter()).copied()
    }

    pub fn vars(&self) -> BTreeSet<VarId> {
        self.symbols().filter_map(Symbol::var).collect()
    }

    pub fn letters(&self) -> BTreeSet<LetterId> {
        self.symbols().filter_map(Symbol::letter).collect()
    }

    pub fn var_occurrences(&self) -> usize {
        self.symbols().filter(|s| s.var().is_some()).count()
    }

    pub fn occurrences(&self, x: VarId) -> usize {
        self.symbols().filter(|&s| s == Symbol::Var(x)).count()
    }

    pub fn has_vars(&self) -> bool {
        self.symbols().any(|s| s.var().is_some())
    }

    /// Apply `f` to every symbol, allowing each one to expand into several.
    pub fn flat_map_symbols<F>(&self, mut f: F) -> Equation
    where
        F: FnMut(Symbol, &mut Vec<Symbol>),
    {
        let mut side = |s: &[Symbol]| {
            let mut out = Vec::with_capacity(s.len());
            for &sym in s {
                f(sym, &mut out);
            }
            out
        };
        let lhs = side(&self.lhs);
        let rhs = side(&self.rhs);
        Equation { lhs, rhs }
    }

    /// Both sides with variables replaced by their values (not expanded).
    pub fn substitute(&self, sigma: &Substitution) -> (Vec<LetterId>, Vec<LetterId>) {
        (sigma.apply(&self.lhs), sigma.apply(&self.rhs))
    }
}

/// How a letter came to exist.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Provenance {
    Input(String),
    Pair(LetterId, LetterId),
    Block(LetterId, BigUint),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum RegistryError {
    #[error("unknown letter id {0}")]
    UnknownLetter(u32),
    #[error("production for {0} refers to a letter that is not older")]
    Cyclic(u32),
}

/// Result of expanding a letter or word under a length cap.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Expansion {
    Full(Vec<LetterId>),
    TooLong(BigUint),
}

impl Expansion {
    pub fn full(self) -> Option<Vec<LetterId>> {
        match self {
            Expansion::Full(w) => Some(w),
            Expansion::TooLong(_) => None,
        }
    }
}

/// Letters and their productions. Ids are dense; input letters come first.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AlphabetRegistry {
    entries: Vec<Provenance>,
    lengths: Vec<BigUint>,
    // Per-letter counts of input letters; `None` once a count overflows.
    parikh: Vec<Option<Vec<u64>>>,
    num_inputs: usize,
}

impl AlphabetRegistry {
    pub fn new<I, S>(input_names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let entries: Vec<Provenance> =
            input_names.into_iter().map(|n| Provenance::Input(n.into())).collect();
        let lengths = vec![BigUint::one(); entries.len()];
        let num_inputs = entries.len();
        let parikh = (0..num_inputs)
            .map(|i| {
                let mut v = vec![0; num_inputs];
                v[i] = 1;
                Some(v)
            })
            .collect();
        AlphabetRegistry { entries, lengths, parikh, num_inputs }
    }

    pub fn num_inputs(&self) -> usize {
        self.num_inputs
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn is_input(&self, a: LetterId) -> bool {
        a.index() < self.num_inputs
    }

    pub fn contains(&self, a: LetterId) -> bool {
        a.index() < self.entries.len()
    }

    pub fn input_letters(&self) -> impl Iterator<Item = LetterId> {
        (0..self.num_inputs as u32).map(LetterId)
    }

    /// The id the next registered letter will get.
    pub fn next_fresh(&self) -> LetterId {
        LetterId(self.entries.len() as u32)
    }

    pub fn provenance(&self, a: LetterId) -> Result<&Provenance, RegistryError> {
        self.entries.get(a.index()).ok_or(RegistryError::UnknownLetter(a.0))
    }

    pub fn entries(&self) -> impl Iterator<Item = (LetterId, &Provenance)> {
        self.entries.iter().enumerate().map(|(i, p)| (LetterId(i as u32), p))
    }

    fn check_older(&self, a: LetterId) -> Result<(), RegistryError> {
        if self.contains(a) {
            Ok(())
        } else {
            Err(RegistryError::Cyclic(self.entries.len() as u32))
        }
    }

    fn push(&mut self, p: Provenance, len: BigUint) -> LetterId {
        let id = self.next_fresh();
        let parikh = match &p {
            Provenance::Input(_) => None,
            Provenance::Pair(a, b) => match (&self.parikh[a.index()], &self.parikh[b.index()]) {
                (Some(x), Some(y)) => x.iter().zip(y).map(|(i, j)| i.checked_add(*j)).collect(),
                _ => None,
            },
            Provenance::Block(a, n) => match (&self.parikh[a.index()], n.to_u64()) {
                (Some(x), Some(n)) => x.iter().map(|i| i.checked_mul(n)).collect(),
                _ => None,
            },
        };
        self.entries.push(p);
        self.lengths.push(len);
        self.parikh.push(parikh);
        id
    }

    /// How many times each input letter occurs in the expansion of `a`,
    /// or `None` if a count does not fit in 64 bits.
    pub fn parikh(&self, a: LetterId) -> Option<&[u64]> {
        self.parikh.get(a.index())?.as_deref()
    }

    pub fn register_pair(&mut self, a: LetterId, b: LetterId) -> Result<LetterId, RegistryError> {
        self.check_older(a)?;
        self.check_older(b)?;
        let len = &self.lengths[a.index()] + &self.lengths[b.index()];
        Ok(self.push(Provenance::Pair(a, b), len))
    }

    pub fn register_block(&mut self, a: LetterId, n: BigUint) -> Result<LetterId, RegistryError> {
        self.check_older(a)?;
        let len = &self.lengths[a.index()] * &n;
        Ok(self.push(Provenance::Block(a, n), len))
    }

    /// Drop every letter with id `>= len`; input letters are never dropped.
    pub fn truncate(&mut self, len: usize) {
        let len = len.max(self.num_inputs);
        self.entries.truncate(len);
        self.lengths.truncate(len);
        self.parikh.truncate(len);
    }

    pub fn expansion_length(&self, a: LetterId) -> Result<&BigUint, RegistryError> {
        self.lengths.get(a.index()).ok_or(RegistryError::UnknownLetter(a.0))
    }

    pub fn word_length(&self, w: &[LetterId]) -> Result<BigUint, RegistryError> {
        let mut total = BigUint::default();
        for &a in w {
            total += self.expansion_length(a)?;
        }
        Ok(total)
    }

    pub fn expand(&self, a: LetterId, cap: usize) -> Result<Expansion, RegistryError> {
        self.expand_word(&[a], cap)
    }

    pub fn expand_word(&self, w: &[LetterId], cap: usize) -> Result<Expansion, RegistryError> {
        let total = self.word_length(w)?;
        if total > BigUint::from(cap) {
            return Ok(Expansion::TooLong(total));
        }
        let mut out = Vec::with_capacity(cap.min(total.to_usize().unwrap_or(cap)));
        for &a in w {
            self.expand_into(a, &mut out);
        }
        Ok(Expansion::Full(out))
    }

    // Caller guarantees `a` exists and its length fits in memory.
    fn expand_into(&self, a: LetterId, out: &mut Vec<LetterId>) {
        match &self.entries[a.index()] {
            Provenance::Input(_) => out.push(a),
            Provenance::Pair(x, y) => {
                self.expand_into(*x, out);
                self.expand_into(*y, out);
            }
            Provenance::Block(x, n) => {
                let start = out.len();
                self.expand_into(*x, out);
                let unit = out.len() - start;
                let n = n.to_usize().expect("block length checked against cap");
                for _ in 1..n {
                    out.extend_from_within(start..start + unit);
                }
            }
        }
    }

    pub fn name(&self, a: LetterId) -> String {
        match self.entries.get(a.index()) {
            Some(Provenance::Input(n)) => n.clone(),
            _ => format!("#{}", a.0),
        }
    }
}

/// Renaming applied by [`canonical_form`], from old to new letter ids.
pub type Renaming = BTreeMap<LetterId, LetterId>;

/// Renumber derived letters by first occurrence (lhs, then rhs).
///
/// Input letters and variables keep their ids. Derived letters get
/// `num_inputs, num_inputs + 1, ...` in order of first appearance.
pub fn canonical_form(eq: &Equation, registry: &AlphabetRegistry) -> (Equation, Renaming) {
    let base = registry.num_inputs() as u32;
    let mut renaming = Renaming::new();
    let canon = eq.flat_map_symbols(|s, out| match s {
        Symbol::Letter(a) if a.0 >= base => {
            let next = LetterId(base + renaming.len() as u32);
            out.push(Symbol::Letter(*renaming.entry(a).or_insert(next)));
        }
        other => out.push(other),
    });
    (canon, renaming)
}

/// Values for variables, as words over registry letters.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct Substitution {
    map: BTreeMap<VarId, Vec<LetterId>>,
}

impl Substitution {
    pub fn new() -> Self {
        Substitution::default()
    }

    /// Value of `x`; unassigned variables read as the empty word.
    pub fn get(&self, x: VarId) -> &[LetterId] {
        self.map.get(&x).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn is_assigned(&self, x: VarId) -> bool {
        self.map.contains_key(&x)
    }

    pub fn set(&mut self, x: VarId, w: Vec<LetterId>) {
        self.map.insert(x, w);
    }

    pub fn get_mut(&mut self, x: VarId) -> &mut Vec<LetterId> {
        self.map.entry(x).or_default()
    }

    pub fn remove(&mut self, x: VarId) -> Option<Vec<LetterId>> {
        self.map.remove(&x)
    }

    pub fn iter(&self) -> impl Iterator<Item = (VarId, &[LetterId])> {
        self.map.iter().map(|(&x, w)| (x, w.as_slice()))
    }

    pub fn apply(&self, side: &[Symbol]) -> Vec<LetterId> {
        let mut out = Vec::new();
        for &s in side {
            match s {
                Symbol::Letter(a) => out.push(a),
                Symbol::Var(x) => out.extend_from_slice(self.get(x)),
            }
        }
        out
    }

    /// Every value expanded to input letters, or `None` if some value exceeds `cap`.
    pub fn expanded(&self, registry: &AlphabetRegistry, cap: usize) -> Option<Substitution> {
        let mut out = Substitution::new();
        for (x, w) in self.iter() {
            out.set(x, registry.expand_word(w, cap).ok()?.full()?);
        }
        Some(out)
    }
}

impl FromIterator<(VarId, Vec<LetterId>)> for Substitution {
    fn from_iter<T: IntoIterator<Item = (VarId, Vec<LetterId>)>>(iter: T) -> Self {
        Substitution { map: iter.into_iter().collect() }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ParseError {
    #[error("missing '='")]
    MissingEquals,
    #[error("second '=' at column {0}")]
    ExtraEquals(usize),
    #[error("unexpected character {ch:?} at column {col}")]
    BadChar { ch: char, col: usize },
    #[error("invalid JSON equation: {0}")]
    Json(String),
    #[error("name {0:?} declared twice")]
    DuplicateName(String),
    #[error("unknown symbol {0:?}")]
    UnknownSymbol(String),
}

/// An equation together with the names of its letters and variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Problem {
    pub equation: Equation,
    pub registry: AlphabetRegistry,
    pub var_names: Vec<String>,
}

#[derive(Deserialize)]
struct JsonEquation {
    letters: Vec<String>,
    #[serde(default)]
    variables: Vec<String>,
    lhs: Vec<String>,
    rhs: Vec<String>,
}

impl Problem {
    /// Parse the one-line text form, e.g. `aXca = abYa`.
    ///
    /// Lowercase ASCII letters are letters, uppercase are variables.
    /// Ids are assigned in sorted order of the characters.
    pub fn parse(text: &str) -> Result<Problem, ParseError> {
        let mut eq_col = None;
        for (col, ch) in text.chars().enumerate() {
            match ch {
                '=' if eq_col.is_some() => return Err(ParseError::ExtraEquals(col + 1)),
                '=' => eq_col = Some(col),
                c if c.is_ascii_alphabetic() || c.is_whitespace() => {}
                c => return Err(ParseError::BadChar { ch: c, col: col + 1 }),
            }
        }
        let eq_col = eq_col.ok_or(ParseError::MissingEquals)?;
        let chars: Vec<char> = text.chars().filter(|c| !c.is_whitespace() || *c == '=').collect();
        let letters: BTreeSet<char> = chars.iter().copied().filter(char::is_ascii_lowercase).collect();
        let vars: BTreeSet<char> = chars.iter().copied().filter(char::is_ascii_uppercase).collect();
        let letter_id: BTreeMap<char, LetterId> =
            letters.iter().enumerate().map(|(i, &c)| (c, LetterId(i as u32))).collect();
        let var_id: BTreeMap<char, VarId> =
            vars.iter().enumerate().map(|(i, &c)| (c, VarId(i as u32))).collect();
        let side = |s: &str| -> Vec<Symbol> {
            s.chars()
                .filter(|c| !c.is_whitespace())
                .map(|c| match letter_id.get(&c) {
                    Some(&a) => Symbol::Letter(a),
                    None => Symbol::Var(var_id[&c]),
                })
                .collect()
        };
        let split = text.char_indices().nth(eq_col).map(|(i, _)| i).unwrap_or(0);
        let equation = Equation::new(side(&text[..split]), side(&text[split + 1..]));
        Ok(Problem {
            equation,
            registry: AlphabetRegistry::new(letters.iter().map(|c| c.to_string())),
            var_names: vars.iter().map(|c| c.to_string()).collect(),
        })
    }

    /// Parse the JSON form with explicit alphabets, for alphabets beyond 26 letters:
    /// `{"letters": ["a0", "a1"], "variables": ["X"], "lhs": ["a0", "X"], "rhs": ["X", "a0"]}`.
    pub fn parse_json(text: &str) -> Result<Problem, ParseError> {
        let raw: JsonEquation =
            serde_json::from_str(text).map_err(|e| ParseError::Json(e.to_string()))?;
        let mut names: BTreeMap<&str, Symbol> = BTreeMap::new();
        for (i, n) in raw.letters.iter().enumerate() {
            if names.insert(n, Symbol::Letter(LetterId(i as u32))).is_some() {
                return Err(ParseError::DuplicateName(n.clone()));
            }
        }
        for (i, n) in raw.variables.iter().enumerate() {
            if names.insert(n, Symbol::Var(VarId(i as u32))).is_some() {
                return Err(ParseError::DuplicateName(n.clone()));
            }
        }
        let side = |s: &[String]| -> Result<Vec<Symbol>, ParseError> {
            s.iter()
                .map(|n| names.get(n.as_str()).copied().ok_or_else(|| ParseError::UnknownSymbol(n.clone())))
                .collect()
        };
        Ok(Problem {
            equation: Equation::new(side(&raw.lhs)?, side(&raw.rhs)?),
            registry: AlphabetRegistry::new(raw.letters.iter().cloned()),
            var_names: raw.variables.clone(),
        })
    }

    /// Text form when the input looks like JSON, otherwise the one-line grammar.
    pub fn parse_any(text: &str) -> Result<Problem, ParseError> {
        if text.trim_start().starts_with('{') {
            Problem::parse_json(text)
        } else {
            Problem::parse(text)
        }
    }

    pub fn var_name(&self, x: VarId) -> String {
        self.var_names.get(x.index()).cloned().unwrap_or_else(|| format!("V{}", x.0))
    }

    pub fn var_by_name(&self, name: &str) -> Option<VarId> {
        self.var_names.iter().position(|n| n == name).map(|i| VarId(i as u32))
    }

    /// Parse a word of letter names given as a string of single-character names.
    pub fn parse_word(&self, text: &str) -> Result<Vec<LetterId>, ParseError> {
        let by_name: BTreeMap<String, LetterId> =
            self.registry.entries().map(|(a, _)| (self.registry.name(a), a)).collect();
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| {
                by_name.get(&c.to_string()).copied().ok_or_else(|| ParseError::UnknownSymbol(c.to_string()))
            })
            .collect()
    }

    pub fn show_word(&self, registry: &AlphabetRegistry, w: &[LetterId]) -> String {
        join_names(w.iter().map(|&a| registry.name(a)))
    }

    pub fn show_side(&self, registry: &AlphabetRegistry, side: &[Symbol]) -> String {
        join_names(side.iter().map(|&s| match s {
            Symbol::Letter(a) => registry.name(a),
            Symbol::Var(x) => self.var_name(x),
        }))
    }

    pub fn show(&self, registry: &AlphabetRegistry, eq: &Equation) -> String {
        format!("{}={}", self.show_side(registry, &eq.lhs), self.show_side(registry, &eq.rhs))
    }
}

// Single-character names concatenate; anything longer is space separated.
fn join_names<I: Iterator<Item = String>>(names: I) -> String {
    let names: Vec<String> = names.collect();
    if names.iter().all(|n| n.chars().count() == 1) {
        names.concat()
    } else {
        names.join(" ")
    }
}

impl fmt::Display for Problem {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.show(&self.registry, &self.equation))
    }
}
