//! Subshifts of finite type: the transition structure, admissible words,
//! locally constant potentials, Birkhoff sums and orbital (empirical) measures.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Symbol = usize;

/// Largest absolute table value accepted from user input; `e^700` is close to `f64::MAX`.
pub const MAX_POTENTIAL_MAGNITUDE: f64 = 700.0;

const MAX_TABLE_LEN: u128 = 1 << 24;

/// A mixing subshift of finite type given by a primitive 0/1 transition matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubshiftSpec {
    alphabet: Vec<String>,
    transitions: Vec<Vec<bool>>,
    primitivity_power: usize,
}

/// Validates a 0/1 matrix and returns the subshift it defines.
pub fn validate_spec(matrix: &[Vec<u8>]) -> Result<SubshiftSpec> {
    SubshiftSpec::new(matrix)
}

impl SubshiftSpec {
    /// Builds a subshift with symbol names `"0"`, `"1"`, ...
    pub fn new(matrix: &[Vec<u8>]) -> Result<Self> {
        let names = (0..matrix.len()).map(|i| i.to_string()).collect();
        Self::with_alphabet(names, matrix)
    }

    pub fn with_alphabet(alphabet: Vec<String>, matrix: &[Vec<u8>]) -> Result<Self> {
        let m = matrix.len();
        if m == 0 {
            return Err(Error::EmptyMatrix);
        }
        if alphabet.len() != m {
            return Err(Error::AlphabetMismatch { names: alphabet.len(), size: m });
        }
        for (i, name) in alphabet.iter().enumerate() {
            if name.is_empty() || name.contains('.') || alphabet[..i].contains(name) {
                return Err(Error::BadSymbolName(name.clone()));
            }
        }
        let mut transitions = vec![vec![false; m]; m];
        for (i, row) in matrix.iter().enumerate() {
            if row.len() != m {
                return Err(Error::NotSquare { row: i, len: row.len(), expected: m });
            }
            for (j, &v) in row.iter().enumerate() {
                transitions[i][j] = match v {
                    0 => false,
                    1 => true,
                    other => return Err(Error::NotBinary { row: i, col: j, value: other as i64 }),
                };
            }
        }
        for s in 0..m {
            if !transitions[s].iter().any(|&b| b) {
                return Err(Error::EmptyRowOrColumn { symbol: s, kind: "row" });
            }
            if !(0..m).any(|r| transitions[r][s]) {
                return Err(Error::EmptyRowOrColumn { symbol: s, kind: "column" });
            }
        }
        check_primitive(&transitions)?;
        let primitivity_power = boolean_primitivity_power(&transitions)
            .expect("strongly connected aperiodic graph has a positive power");
        Ok(SubshiftSpec { alphabet, transitions, primitivity_power })
    }

    /// The full shift on `m` symbols.
    pub fn full_shift(m: usize) -> Self {
        Self::new(&vec![vec![1; m]; m]).expect("full shift is primitive")
    }

    /// The golden-mean shift (no two consecutive 1s).
    pub fn golden_mean() -> Self {
        Self::new(&[vec![1, 1], vec![1, 0]]).expect("golden-mean shift is primitive")
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet.len()
    }

    pub fn alphabet(&self) -> &[String] {
        &self.alphabet
    }

    pub fn primitivity_power(&self) -> usize {
        self.primitivity_power
    }

    #[inline]
    pub fn allowed(&self, a: Symbol, b: Symbol) -> bool {
        self.transitions[a][b]
    }

    pub fn transitions(&self) -> &[Vec<bool>] {
        &self.transitions
    }

    pub fn matrix(&self) -> Vec<Vec<u8>> {
        self.transitions.iter().map(|r| r.iter().map(|&b| b as u8).collect()).collect()
    }

    pub fn successors(&self, a: Symbol) -> impl Iterator<Item = Symbol> + '_ {
        self.transitions[a].iter().enumerate().filter(|(_, &b)| b).map(|(j, _)| j)
    }

    pub fn is_admissible(&self, word: &[Symbol]) -> bool {
        word.iter().all(|&s| s < self.alphabet_size())
            && word.windows(2).all(|p| self.allowed(p[0], p[1]))
    }

    pub fn check_admissible(&self, word: &[Symbol]) -> Result<()> {
        if self.is_admissible(word) {
            Ok(())
        } else {
            Err(Error::InadmissibleWord { word: self.format_word(word) })
        }
    }

    fn uses_separators(&self) -> bool {
        self.alphabet.iter().any(|n| n.chars().count() > 1)
    }

    pub fn symbol(&self, name: &str) -> Result<Symbol> {
        self.alphabet
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| Error::UnknownSymbol(name.to_string()))
    }

    /// Parses a word string. Symbol names are concatenated, or joined with
    /// `'.'` when any symbol name is longer than one character.
    pub fn parse_word(&self, text: &str) -> Result<Vec<Symbol>> {
        if text.is_empty() {
            return Ok(Vec::new());
        }
        if self.uses_separators() {
            text.split('.').map(|part| self.symbol(part)).collect()
        } else {
            text.chars().map(|c| self.symbol(c.encode_utf8(&mut [0; 4]))).collect()
        }
    }

    /// Parses and checks admissibility.
    pub fn parse_admissible(&self, text: &str) -> Result<Vec<Symbol>> {
        let w = self.parse_word(text)?;
        self.check_admissible(&w)?;
        Ok(w)
    }

    pub fn format_word(&self, word: &[Symbol]) -> String {
        let name = |s: &Symbol| self.alphabet.get(*s).cloned().unwrap_or_else(|| format!("<{s}>"));
        let sep = if self.uses_separators() { "." } else { "" };
        word.iter().map(name).collect::<Vec<_>>().join(sep)
    }

    /// All admissible words of length `k`, in lexicographic order.
    pub fn admissible_words(&self, k: usize) -> Vec<Vec<Symbol>> {
        let mut out = Vec::new();
        let mut buf = Vec::with_capacity(k);
        for s in 0..self.alphabet_size() {
            buf.push(s);
            self.extend_words(&mut buf, k, &mut out);
            buf.pop();
        }
        if k == 0 {
            return vec![Vec::new()];
        }
        out
    }

    fn extend_words(&self, buf: &mut Vec<Symbol>, k: usize, out: &mut Vec<Vec<Symbol>>) {
        if buf.len() == k {
            out.push(buf.clone());
            return;
        }
        let last = *buf.last().unwrap();
        for s in 0..self.alphabet_size() {
            if self.allowed(last, s) {
                buf.push(s);
                self.extend_words(buf, k, out);
                buf.pop();
            }
        }
    }

    /// Shortest admissible path `from -> ... -> to` with at least one step,
    /// returned without its first symbol.
    pub(crate) fn path_to(&self, from: Symbol, to: Symbol) -> Vec<Symbol> {
        let m = self.alphabet_size();
        let mut prev = vec![usize::MAX; m];
        let mut queue = VecDeque::new();
        for s in self.successors(from) {
            if prev[s] == usize::MAX {
                prev[s] = from;
                queue.push_back(s);
            }
        }
        while let Some(u) = queue.pop_front() {
            if u == to {
                break;
            }
            for v in self.successors(u) {
                if prev[v] == usize::MAX {
                    prev[v] = u;
                    queue.push_back(v);
                }
            }
        }
        let mut path = vec![to];
        let mut cur = to;
        while prev[cur] != from {
            cur = prev[cur];
            path.push(cur);
        }
        path.reverse();
        path
    }
}

/// Strong connectivity plus aperiodicity, via BFS levels.
fn check_primitive(t: &[Vec<bool>]) -> Result<()> {
    let m = t.len();
    let reach = |forward: bool| {
        let mut seen = vec![false; m];
        let mut level = vec![usize::MAX; m];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        level[0] = 0;
        while let Some(u) = queue.pop_front() {
            for v in 0..m {
                let edge = if forward { t[u][v] } else { t[v][u] };
                if edge && !seen[v] {
                    seen[v] = true;
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        (seen, level)
    };
    let (fwd, level) = reach(true);
    let (bwd, _) = reach(false);
    if !fwd.iter().chain(bwd.iter()).all(|&b| b) {
        return Err(Error::NotPrimitive { reason: "transition graph is reducible".into() });
    }
    let mut period = 0usize;
    for u in 0..m {
        for v in 0..m {
            if t[u][v] {
                let d = (level[u] + 1).abs_diff(level[v]);
                period = gcd(period, d);
            }
        }
    }
    if period != 1 {
        return Err(Error::NotPrimitive { reason: format!("transition graph has period {period}") });
    }
    Ok(())
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Smallest `q <= (m-1)^2 + 1` with `A^q > 0`, by repeated boolean products.
pub(crate) fn boolean_primitivity_power(t: &[Vec<bool>]) -> Option<usize> {
    let m = t.len();
    let bound = (m - 1) * (m - 1) + 1;
    let mut power = t.to_vec();
    for q in 1..=bound {
        if power.iter().all(|r| r.iter().all(|&b| b)) {
            return Some(q);
        }
        let mut next = vec![vec![false; m]; m];
        for i in 0..m {
            for k in 0..m {
                if power[i][k] {
                    for j in 0..m {
                        next[i][j] |= t[k][j];
                    }
                }
            }
        }
        power = next;
    }
    None
}

/// All admissible words of length `n` beginning with `start`, in lexicographic order.
pub fn unstable_leaf_words(spec: &SubshiftSpec, start: Symbol, n: usize) -> Vec<Vec<Symbol>> {
    let mut out = Vec::new();
    if n == 0 || start >= spec.alphabet_size() {
        return out;
    }
    let mut buf = vec![start];
    spec.extend_words(&mut buf, n, &mut out);
    out
}

/// A locally constant potential reading `memory` consecutive symbols.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Potential {
    alphabet_size: usize,
    memory: usize,
    /// Dense table indexed by the base-`m` code of the word; NaN on inadmissible words.
    values: Vec<f64>,
}

impl Potential {
    /// Builds a potential from a table keyed by words of length `memory`.
    ///
    /// The table must cover every admissible word; entries must be finite with
    /// magnitude at most [`MAX_POTENTIAL_MAGNITUDE`].
    pub fn from_table(spec: &SubshiftSpec, memory: usize, table: &BTreeMap<Vec<Symbol>, f64>) -> Result<Self> {
        for (word, &value) in table {
            if word.len() != memory || !spec.is_admissible(word) {
                return Err(Error::InadmissibleWord { word: spec.format_word(word) });
            }
            if !value.is_finite() || value.abs() > MAX_POTENTIAL_MAGNITUDE {
                return Err(Error::BadPotentialValue { word: spec.format_word(word), value });
            }
        }
        Self::build(spec, memory, |w| {
            table
                .get(w)
                .copied()
                .ok_or_else(|| Error::IncompleteTable { word: spec.format_word(w) })
        })
    }

    /// Builds a potential by evaluating `f` on every admissible word of length `memory`.
    /// Values must be finite; the user-input magnitude cap is not applied.
    pub fn from_fn(spec: &SubshiftSpec, memory: usize, mut f: impl FnMut(&[Symbol]) -> f64) -> Result<Self> {
        Self::build(spec, memory, |w| {
            let v = f(w);
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::BadPotentialValue { word: spec.format_word(w), value: v })
            }
        })
    }

    fn build(spec: &SubshiftSpec, memory: usize, mut f: impl FnMut(&[Symbol]) -> Result<f64>) -> Result<Self> {
        if memory == 0 {
            return Err(Error::ZeroMemory);
        }
        let m = spec.alphabet_size();
        let len = (m as u128).checked_pow(memory as u32).unwrap_or(u128::MAX);
        if len > MAX_TABLE_LEN {
            return Err(Error::TableTooLarge(len));
        }
        let mut values = vec![f64::NAN; len as usize];
        for w in spec.admissible_words(memory) {
            values[code(m, &w)] = f(&w)?;
        }
        Ok(Potential { alphabet_size: m, memory, values })
    }

    pub fn constant(spec: &SubshiftSpec, c: f64) -> Result<Self> {
        Self::from_fn(spec, 1, |_| c)
    }

    pub fn zero(spec: &SubshiftSpec) -> Self {
        Self::constant(spec, 0.0).expect("zero is finite")
    }

    /// Indicator of the cylinder `[symbol]` at coordinate 0.
    pub fn indicator(spec: &SubshiftSpec, symbol: Symbol) -> Self {
        Self::from_fn(spec, 1, |w| if w[0] == symbol { 1.0 } else { 0.0 }).expect("finite")
    }

    /// `log p_a` on symbol `a`; on the full shift this is the normalized Bernoulli potential.
    pub fn bernoulli(spec: &SubshiftSpec, probs: &[f64]) -> Result<Self> {
        if probs.len() != spec.alphabet_size() || probs.iter().any(|&p| !(p > 0.0 && p <= 1.0)) {
            return Err(Error::InvalidArgument(format!("bad probability vector {probs:?}")));
        }
        Self::from_fn(spec, 1, |w| probs[w[0]].ln())
    }

    pub fn memory(&self) -> usize {
        self.memory
    }

    pub fn alphabet_size(&self) -> usize {
        self.alphabet_size
    }

    /// Value on the first `memory` symbols of `window`.
    pub fn value(&self, window: &[Symbol]) -> f64 {
        self.values[code(self.alphabet_size, &window[..self.memory])]
    }

    /// Value on the last `memory` symbols of `window`.
    pub fn value_at_end(&self, window: &[Symbol]) -> f64 {
        self.value(&window[window.len() - self.memory..])
    }

    /// `(word, value)` pairs over admissible words, in lexicographic order.
    pub fn entries(&self, spec: &SubshiftSpec) -> Vec<(Vec<Symbol>, f64)> {
        spec.admissible_words(self.memory).into_iter().map(|w| {
            let v = self.value(&w);
            (w, v)
        }).collect()
    }

    /// The same function read through a longer window.
    pub fn lift(&self, spec: &SubshiftSpec, memory: usize) -> Result<Self> {
        if memory < self.memory {
            return Err(Error::MemoryTooLarge { memory: self.memory, block: memory });
        }
        Self::from_fn(spec, memory, |w| self.value(w))
    }

    /// `self + t * other` at the larger of the two memories.
    pub fn add_scaled(&self, spec: &SubshiftSpec, other: &Potential, t: f64) -> Result<Self> {
        if self.alphabet_size != other.alphabet_size {
            return Err(Error::AlphabetSizeMismatch);
        }
        let k = self.memory.max(other.memory);
        Self::from_fn(spec, k, |w| self.value(w) + t * other.value(w))
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().filter(|v| !v.is_nan()).fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Equal when defined on the same words with the same values.
impl PartialEq for Potential {
    fn eq(&self, other: &Self) -> bool {
        self.alphabet_size == other.alphabet_size
            && self.memory == other.memory
            && self.values.iter().zip(&other.values).all(|(a, b)| a == b || (a.is_nan() && b.is_nan()))
    }
}

fn code(m: usize, w: &[Symbol]) -> usize {
    w.iter().fold(0, |acc, &s| acc * m + s)
}

/// `S_n phi` over the `n = |word|` windows starting in `word`; windows running
/// past the end read into `continuation`.
pub fn birkhoff_sum(spec: &SubshiftSpec, word: &[Symbol], phi: &Potential, continuation: &[Symbol]) -> Result<f64> {
    let need = phi.memory() - 1;
    if continuation.len() < need {
        return Err(Error::ContinuationTooShort { got: continuation.len(), need });
    }
    let full: Vec<Symbol> = word.iter().chain(continuation).copied().collect();
    if !spec.is_admissible(&full) {
        return Err(Error::InadmissibleConcatenation { word: spec.format_word(&full) });
    }
    Ok((0..word.len()).map(|i| phi.value(&full[i..])).sum())
}

/// Sliding-window marginal of an orbital measure: counts of the `n - k + 1`
/// length-`k` windows of a word.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalMeasure {
    pub window: usize,
    pub counts: BTreeMap<Vec<Symbol>, u64>,
    /// Number of windows counted.
    pub length: u64,
}

impl EmpiricalMeasure {
    pub fn frequency(&self, word: &[Symbol]) -> f64 {
        self.counts.get(word).map_or(0.0, |&c| c as f64 / self.length as f64)
    }

    pub fn frequencies(&self) -> BTreeMap<Vec<Symbol>, f64> {
        self.counts.iter().map(|(w, &c)| (w.clone(), c as f64 / self.length as f64)).collect()
    }

    /// Integral of a potential with memory at most `window`.
    pub fn integrate(&self, phi: &Potential) -> Result<f64> {
        if phi.memory() > self.window {
            return Err(Error::MemoryTooLarge { memory: phi.memory(), block: self.window });
        }
        Ok(self.counts.iter().map(|(w, &c)| c as f64 * phi.value(w)).sum::<f64>() / self.length as f64)
    }
}

pub fn orbital_empirical(word: &[Symbol], window: usize) -> Result<EmpiricalMeasure> {
    if window == 0 {
        return Err(Error::ZeroMemory);
    }
    if word.len() < window {
        return Err(Error::WordTooShort { got: word.len(), need: window });
    }
    let mut counts = BTreeMap::new();
    for w in word.windows(window) {
        *counts.entry(w.to_vec()).or_insert(0) += 1;
    }
    Ok(EmpiricalMeasure { window, counts, length: (word.len() - window + 1) as u64 })
}

/// Display helper pairing a word with its system for printing.
pub struct WordDisplay<'a>(pub &'a SubshiftSpec, pub &'a [Symbol]);

impl fmt::Display for WordDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.format_word(self.1))
    }
}
