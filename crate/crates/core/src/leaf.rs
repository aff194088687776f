//! Conditional Gibbs measures on local unstable leaves.
//!
//! The leaf through `x` is the set of points sharing `x`'s past up to and
//! including coordinate 0. Leaf words are therefore `w_0 w_1 ... w_{n-1}` with
//! `w_0 = x_0`, and the conditional measure is the Gibbs Markov chain of `G`
//! started at the block-`k` state ending at `x_0`.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::rng;
use crate::sft::{Potential, SubshiftSpec, Symbol};
use crate::thermo::{equilibrium_state, MarkovMeasure, RecodedChain};

pub const DEFAULT_ENUMERATION_BUDGET: u64 = 100_000_000;

/// `μ^u_{x,G}`: the Gibbs chain of `G` conditioned on a past.
#[derive(Debug, Clone)]
pub struct LeafMeasure {
    gibbs: MarkovMeasure,
    start_state: usize,
    pressure: f64,
    potential: Potential,
    g_values: Vec<f64>,
    /// Per state: successor states with cumulative probabilities.
    cumulative: Vec<Vec<(usize, f64)>>,
}

/// Leaf measure on the block-`G.memory()` recoding.
pub fn leaf_measure(spec: &SubshiftSpec, g: &Potential, past: &[Symbol]) -> Result<LeafMeasure> {
    leaf_measure_with_block(spec, g, past, g.memory())
}

/// Leaf measure on a longer recoding, needed when observables have memory above `G`'s.
pub fn leaf_measure_with_block(spec: &SubshiftSpec, g: &Potential, past: &[Symbol], block: usize) -> Result<LeafMeasure> {
    if block < g.memory() {
        return Err(Error::MemoryTooLarge { memory: g.memory(), block });
    }
    if past.len() < block || !spec.is_admissible(past) {
        return Err(Error::InadmissiblePast { word: spec.format_word(past) });
    }
    let (gibbs, pressure) = equilibrium_state(spec, g, block)?;
    let start_state = gibbs.chain().state_of(&past[past.len() - block..]).expect("admissible block is a state");
    LeafMeasure::from_gibbs(gibbs, pressure, g.clone(), start_state)
}

impl LeafMeasure {
    /// Wraps the Gibbs chain of `potential` (with pressure `pressure`) started at `start_state`.
    pub fn from_gibbs(gibbs: MarkovMeasure, pressure: f64, potential: Potential, start_state: usize) -> Result<Self> {
        let chain = gibbs.chain().clone();
        if start_state >= chain.len() {
            return Err(Error::InvalidArgument(format!("start state {start_state} out of range")));
        }
        let g_values = chain.state_values(&potential)?;
        let cumulative = (0..chain.len())
            .map(|s| {
                let mut acc = 0.0;
                chain
                    .successors(s)
                    .iter()
                    .filter(|&&j| gibbs.transition(s, j) > 0.0)
                    .map(|&j| {
                        acc += gibbs.transition(s, j);
                        (j, acc)
                    })
                    .collect()
            })
            .collect();
        Ok(LeafMeasure { gibbs, start_state, pressure, potential, g_values, cumulative })
    }

    /// The leaf measure of `G + t φ` on the same chain and start state.
    pub fn tilted(&self, phi: &Potential, t: f64) -> Result<LeafMeasure> {
        let chain = self.chain();
        let spec = chain.base();
        let tilted = self.potential.add_scaled(spec, phi, t)?;
        if tilted.memory() > chain.block() {
            return Err(Error::MemoryTooLarge { memory: tilted.memory(), block: chain.block() });
        }
        let (gibbs, pressure) = equilibrium_state(spec, &tilted, chain.block())?;
        LeafMeasure::from_gibbs(gibbs, pressure, tilted, self.start_state)
    }

    pub fn chain(&self) -> &Arc<RecodedChain> {
        self.gibbs.chain()
    }

    pub fn gibbs(&self) -> &MarkovMeasure {
        &self.gibbs
    }

    pub fn start_state(&self) -> usize {
        self.start_state
    }

    pub fn start_symbol(&self) -> Symbol {
        self.chain().current_symbol(self.start_state)
    }

    pub fn pressure(&self) -> f64 {
        self.pressure
    }

    pub fn potential(&self) -> &Potential {
        &self.potential
    }

    /// `G` on each chain state.
    pub fn g_values(&self) -> &[f64] {
        &self.g_values
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.gibbs.transition(from, to)
    }

    /// Chain states visited by a leaf word.
    pub fn states_of(&self, word: &[Symbol]) -> Result<Vec<usize>> {
        let spec = self.chain().base();
        match word.first() {
            None => return Err(Error::InconsistentStart("empty word".into())),
            Some(&w0) if w0 != self.start_symbol() => {
                return Err(Error::InconsistentStart(format!(
                    "word starts with {} but the leaf is based at {}",
                    spec.format_word(&[w0]),
                    spec.format_word(self.chain().state_word(self.start_state))
                )))
            }
            _ => {}
        }
        let mut states = Vec::with_capacity(word.len());
        let mut s = self.start_state;
        states.push(s);
        for &a in &word[1..] {
            s = self.chain().step(s, a).ok_or_else(|| Error::InadmissibleWord { word: spec.format_word(word) })?;
            states.push(s);
        }
        Ok(states)
    }

    pub fn log_cylinder_mass(&self, word: &[Symbol]) -> Result<f64> {
        let states = self.states_of(word)?;
        Ok(states.windows(2).map(|p| self.transition(p[0], p[1]).ln()).sum())
    }

    /// `μ^u([w_0 ... w_{n-1}])`; the length-1 cylinder at the base symbol has mass 1.
    pub fn cylinder_mass(&self, word: &[Symbol]) -> Result<f64> {
        let states = self.states_of(word)?;
        Ok(states.windows(2).map(|p| self.transition(p[0], p[1])).product())
    }

    /// Mass of the unstable Bowen ball `B(y, n, 2^{-r})`, which is the cylinder `[y_0 .. y_{n+r-1}]`.
    pub fn bowen_ball_mass(&self, y: &[Symbol], n: usize, r: usize) -> Result<f64> {
        if n == 0 {
            return Err(Error::InvalidArgument("n must be positive".into()));
        }
        if y.len() < n + r {
            return Err(Error::WordTooShort { got: y.len(), need: n + r });
        }
        self.cylinder_mass(&y[..n + r])
    }

    /// Number of leaf words of each length `1..=max_len`, as floats.
    pub fn leaf_word_counts(&self, max_len: usize) -> Vec<f64> {
        let chain = self.chain();
        let mut v = vec![0.0; chain.len()];
        v[self.start_state] = 1.0;
        let mut out = Vec::with_capacity(max_len);
        for len in 1..=max_len {
            out.push(v.iter().sum());
            if len < max_len {
                let mut nv = vec![0.0; chain.len()];
                for (s, &c) in v.iter().enumerate() {
                    if c > 0.0 {
                        for &j in chain.successors(s) {
                            nv[j] += c;
                        }
                    }
                }
                v = nv;
            }
        }
        out
    }

    pub fn gibbs_ratio_audit(&self, n_max: usize, r: usize) -> Result<GibbsRatioReport> {
        self.gibbs_ratio_audit_with_budget(n_max, r, DEFAULT_ENUMERATION_BUDGET)
    }

    /// Extremes of `μ^u(B(y, n, 2^{-r})) / e^{S_n G(y) - n P(G)}` over all leaf
    /// words `y` and `1 <= n <= n_max`.
    pub fn gibbs_ratio_audit_with_budget(&self, n_max: usize, r: usize, budget: u64) -> Result<GibbsRatioReport> {
        if n_max == 0 {
            return Err(Error::InvalidArgument("n_max must be positive".into()));
        }
        let count: f64 = self.leaf_word_counts(n_max + r).iter().sum();
        if count > budget as f64 {
            return Err(Error::EnumerationTooLarge { count, budget });
        }
        let half = (n_max / 2).max(1);
        let mut acc = AuditAcc::new(half);
        let mut word = vec![self.start_symbol()];
        let mut cum_g = vec![0.0, self.g_values[self.start_state]];
        self.audit_dfs(self.start_state, 0.0, n_max, r, &mut word, &mut cum_g, &mut acc);

        let k_min = acc.full.0.exp();
        let k_max = acc.full.1.exp();
        let half_min = acc.half.0.exp();
        let half_max = acc.half.1.exp();
        let drift = (k_max / half_max - 1.0).max(1.0 - k_min / half_min);
        let spec = self.chain().base();
        Ok(GibbsRatioReport {
            epsilon_exponent: r,
            n_max,
            k_min,
            k_max,
            k: k_max.max(1.0 / k_min),
            half_depth: half,
            half_k_min: half_min,
            half_k_max: half_max,
            drift,
            stable: drift < 0.05 && k_min > 0.0 && k_max.is_finite(),
            argmin: (spec.format_word(&acc.argmin.0), acc.argmin.1),
            argmax: (spec.format_word(&acc.argmax.0), acc.argmax.1),
            words_visited: acc.visited,
        })
    }

    #[allow(clippy::too_many_arguments)]
    fn audit_dfs(
        &self,
        state: usize,
        log_mass: f64,
        n_max: usize,
        r: usize,
        word: &mut Vec<Symbol>,
        cum_g: &mut Vec<f64>,
        acc: &mut AuditAcc,
    ) {
        acc.visited += 1;
        let len = word.len();
        if len > r {
            let n = len - r;
            let log_ratio = log_mass - (cum_g[n] - n as f64 * self.pressure);
            acc.record(log_ratio, n, word);
        }
        if len == n_max + r {
            return;
        }
        let chain = self.chain();
        for &next in chain.successors(state) {
            let p = self.transition(state, next);
            word.push(chain.current_symbol(next));
            let last = *cum_g.last().unwrap();
            cum_g.push(last + self.g_values[next]);
            self.audit_dfs(next, log_mass + p.ln(), n_max, r, word, cum_g, acc);
            cum_g.pop();
            word.pop();
        }
    }

    /// Next state drawn from the Gibbs transition row of `state`.
    #[inline]
    pub(crate) fn draw_next(&self, state: usize, u: f64) -> usize {
        let row = &self.cumulative[state];
        row.iter().find(|&&(_, c)| u < c).unwrap_or_else(|| row.last().unwrap()).0
    }

    /// Draws a path of `len` symbols (including the base symbol) as chain states.
    pub fn sample_states(&self, rng: &mut impl Rng, len: usize) -> Vec<usize> {
        let mut states = Vec::with_capacity(len);
        let mut s = self.start_state;
        states.push(s);
        for _ in 1..len {
            s = self.draw_next(s, rng.random::<f64>());
            states.push(s);
        }
        states
    }

    /// Leaf word of length `n` drawn with probability equal to its cylinder mass.
    pub fn sample_path(&self, n: usize, seed: u64) -> Vec<Symbol> {
        self.sample_path_indexed(n, seed, 0)
    }

    /// Sample `index` of the counter-based stream for `seed`.
    pub fn sample_path_indexed(&self, n: usize, seed: u64, index: u64) -> Vec<Symbol> {
        let mut rng = rng::stream(seed, index);
        let chain = self.chain();
        self.sample_states(&mut rng, n.max(1)).into_iter().map(|s| chain.current_symbol(s)).collect()
    }
}

struct AuditAcc {
    half_n: usize,
    full: (f64, f64),
    half: (f64, f64),
    argmin: (Vec<Symbol>, usize),
    argmax: (Vec<Symbol>, usize),
    visited: u64,
}

impl AuditAcc {
    fn new(half_n: usize) -> Self {
        AuditAcc {
            half_n,
            full: (f64::INFINITY, f64::NEG_INFINITY),
            half: (f64::INFINITY, f64::NEG_INFINITY),
            argmin: (Vec::new(), 0),
            argmax: (Vec::new(), 0),
            visited: 0,
        }
    }

    fn record(&mut self, log_ratio: f64, n: usize, word: &[Symbol]) {
        if log_ratio < self.full.0 {
            self.full.0 = log_ratio;
            self.argmin = (word.to_vec(), n);
        }
        if log_ratio > self.full.1 {
            self.full.1 = log_ratio;
            self.argmax = (word.to_vec(), n);
        }
        if n <= self.half_n {
            self.half.0 = self.half.0.min(log_ratio);
            self.half.1 = self.half.1.max(log_ratio);
        }
    }
}

/// Observed constants in the conditional Gibbs bound at `ε = 2^{-r}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GibbsRatioReport {
    pub epsilon_exponent: usize,
    pub n_max: usize,
    pub k_min: f64,
    pub k_max: f64,
    /// Smallest `K` with `K^{-1} <= ratio <= K` on the audited words.
    pub k: f64,
    pub half_depth: usize,
    pub half_k_min: f64,
    pub half_k_max: f64,
    /// Relative growth of the extremes between half and full depth.
    pub drift: f64,
    pub stable: bool,
    /// Witness words (with their `n`) for the extremes.
    pub argmin: (String, usize),
    pub argmax: (String, usize),
    pub words_visited: u64,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::unstable_leaf_words;
    use approx::assert_abs_diff_eq;

    const GAMMA: f64 = 1.618_033_988_749_895;

    fn fs2() -> SubshiftSpec {
        SubshiftSpec::full_shift(2)
    }

    #[test]
    fn leaf_measure_examples() {
        let spec = fs2();
        let uniform = leaf_measure(&spec, &Potential::zero(&spec), &[1, 0, 1]).unwrap();
        for w in unstable_leaf_words(&spec, 1, 6) {
            assert_abs_diff_eq!(uniform.cylinder_mass(&w).unwrap(), 0.5f64.powi(5), epsilon = 1e-15);
        }
        let g = Potential::bernoulli(&spec, &[0.3, 0.7]).unwrap();
        let bern = leaf_measure(&spec, &g, &[1, 0]).unwrap();
        assert_eq!(bern.start_symbol(), 0);
        assert_abs_diff_eq!(bern.cylinder_mass(&[0, 0, 1, 0]).unwrap(), 0.3 * 0.7 * 0.3, epsilon = 1e-14);
        let gm = SubshiftSpec::golden_mean();
        let parry = leaf_measure(&gm, &Potential::zero(&gm), &[0, 1]).unwrap();
        assert_eq!(parry.start_symbol(), 1);
        assert_abs_diff_eq!(parry.transition(0, 0), 1.0 / GAMMA, epsilon = 1e-12);
        assert!(matches!(leaf_measure(&gm, &Potential::zero(&gm), &[1, 1]), Err(Error::InadmissiblePast { .. })));
        let g2 = Potential::from_fn(&gm, 2, |w| w[0] as f64).unwrap();
        assert!(matches!(leaf_measure(&gm, &g2, &[0]), Err(Error::InadmissiblePast { .. })));
    }

    #[test]
    fn cylinder_mass_examples() {
        let spec = fs2();
        let uniform = leaf_measure(&spec, &Potential::zero(&spec), &[0]).unwrap();
        assert_abs_diff_eq!(uniform.cylinder_mass(&[0, 1, 1, 0]).unwrap(), 0.125, epsilon = 1e-15);
        assert_eq!(uniform.cylinder_mass(&[0]).unwrap(), 1.0);
        assert!(matches!(uniform.cylinder_mass(&[1, 0]), Err(Error::InconsistentStart(_))));
        let gm = SubshiftSpec::golden_mean();
        let from1 = leaf_measure(&gm, &Potential::zero(&gm), &[1]).unwrap();
        assert_abs_diff_eq!(from1.cylinder_mass(&[1, 0]).unwrap(), 1.0, epsilon = 1e-15);
        let from0 = leaf_measure(&gm, &Potential::zero(&gm), &[0]).unwrap();
        assert_abs_diff_eq!(from0.cylinder_mass(&[0, 0, 1]).unwrap(), GAMMA.powi(-3), epsilon = 1e-12);
        assert_abs_diff_eq!(GAMMA.powi(-3), 0.236_067_977_499_789_7, epsilon = 1e-12);
        assert!(matches!(from0.cylinder_mass(&[0, 1, 1]), Err(Error::InadmissibleWord { .. })));
    }

    #[test]
    fn bowen_ball_examples() {
        let spec = fs2();
        let uniform = leaf_measure(&spec, &Potential::zero(&spec), &[0]).unwrap();
        let y = [0, 1, 1, 0, 1, 0, 0];
        assert_eq!(uniform.bowen_ball_mass(&y, 4, 0).unwrap(), uniform.cylinder_mass(&y[..4]).unwrap());
        assert_abs_diff_eq!(uniform.bowen_ball_mass(&y, 5, 1).unwrap(), 0.5f64.powi(5), epsilon = 1e-15);
        assert!(matches!(uniform.bowen_ball_mass(&y, 7, 1), Err(Error::WordTooShort { .. })));
        let gm = SubshiftSpec::golden_mean();
        let parry = leaf_measure(&gm, &Potential::zero(&gm), &[1]).unwrap();
        let y = [1, 0, 0, 1, 0];
        let product = parry.transition(1, 0) * parry.transition(0, 0) * parry.transition(0, 1) * parry.transition(1, 0);
        assert_abs_diff_eq!(parry.bowen_ball_mass(&y, 3, 2).unwrap(), product, epsilon = 1e-15);
    }

    #[test]
    fn total_mass_and_consistency() {
        let gm = SubshiftSpec::golden_mean();
        let g = Potential::from_fn(&gm, 2, |w| 0.5 * w[0] as f64 - 0.2 * w[1] as f64).unwrap();
        for (spec, g, past) in [
            (fs2(), Potential::bernoulli(&fs2(), &[0.3, 0.7]).unwrap(), vec![1]),
            (gm.clone(), Potential::zero(&gm), vec![0]),
            (gm.clone(), g, vec![0, 1]),
        ] {
            let leaf = leaf_measure(&spec, &g, &past).unwrap();
            let s0 = leaf.start_symbol();
            for n in 1..=16 {
                let words = unstable_leaf_words(&spec, s0, n);
                let total: f64 = words.iter().map(|w| leaf.cylinder_mass(w).unwrap()).sum();
                assert!((total - 1.0).abs() < 1e-10, "n={n}: {total}");
                if n <= 10 {
                    for w in &words {
                        let ext: f64 = spec
                            .successors(*w.last().unwrap())
                            .map(|a| {
                                let mut e = w.clone();
                                e.push(a);
                                leaf.cylinder_mass(&e).unwrap()
                            })
                            .sum();
                        assert!((ext - leaf.cylinder_mass(w).unwrap()).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn audit_examples() {
        let spec = fs2();
        let p = 0.3;
        let bern = leaf_measure(&spec, &Potential::bernoulli(&spec, &[p, 1.0 - p]).unwrap(), &[0]).unwrap();
        let rep = bern.gibbs_ratio_audit(12, 0).unwrap();
        // ratio = 1 / p_{y_0} exactly, y_0 = 0 fixed
        assert_abs_diff_eq!(rep.k_min, 1.0 / p, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.k_max, 1.0 / p, epsilon = 1e-9);
        let uniform = leaf_measure(&spec, &Potential::zero(&spec), &[1]).unwrap();
        let rep = uniform.gibbs_ratio_audit(12, 0).unwrap();
        assert_abs_diff_eq!(rep.k_min, 2.0, epsilon = 1e-9);
        assert_abs_diff_eq!(rep.k_max, 2.0, epsilon = 1e-9);
        assert!(rep.stable);
        let gm = SubshiftSpec::golden_mean();
        for past in [[0], [1]] {
            let parry = leaf_measure(&gm, &Potential::zero(&gm), &past).unwrap();
            let rep = parry.gibbs_ratio_audit(14, 1).unwrap();
            assert!(rep.k_max / rep.k_min <= GAMMA * GAMMA + 1e-9, "{rep:?}");
            assert!(rep.stable);
        }
    }

    #[test]
    fn audit_budget_is_enforced() {
        let spec = SubshiftSpec::full_shift(3);
        let leaf = leaf_measure(&spec, &Potential::zero(&spec), &[0]).unwrap();
        assert!(matches!(leaf.gibbs_ratio_audit_with_budget(20, 2, 1000), Err(Error::EnumerationTooLarge { .. })));
    }

    #[test]
    fn sampler_examples() {
        let spec = fs2();
        let uniform = leaf_measure(&spec, &Potential::zero(&spec), &[0]).unwrap();
        assert_eq!(uniform.sample_path(1, 5), vec![0]);
        assert_eq!(uniform.sample_path(50, 5), uniform.sample_path(50, 5));
        let gm = SubshiftSpec::golden_mean();
        let parry = leaf_measure(&gm, &Potential::zero(&gm), &[1]).unwrap();
        for i in 0..2000 {
            let w = parry.sample_path_indexed(40, 3, i);
            assert!(gm.is_admissible(&w));
            assert_eq!(w[0], 1);
        }
    }
}
