//! Transfer-operator thermodynamics for locally constant potentials:
//! higher-block recoding, weighted transfer matrices, Perron eigendata,
//! pressure, Gibbs (equilibrium) Markov measures, entropy and integrals.
//!
//! States of a [`RecodedChain`] with block `k` are the admissible `k`-words,
//! read as the `k` symbols *ending* at the current coordinate. A potential of
//! memory `j <= k` is evaluated on the last `j` symbols of a state, which is the
//! potential composed with `f^{1-j}`; integrals against invariant measures,
//! pressures and rate functions are unchanged by that composition.

use std::collections::{HashMap, VecDeque};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::sft::{Potential, SubshiftSpec, Symbol};

pub const DEFAULT_TOL: f64 = 1e-13;
pub const DEFAULT_MAX_ITER: usize = 1_000_000;

/// Higher-block presentation of a subshift.
#[derive(Debug, Clone)]
pub struct RecodedChain {
    base: SubshiftSpec,
    block: usize,
    states: Vec<Vec<Symbol>>,
    successors: Vec<Vec<usize>>,
    predecessors: Vec<Vec<usize>>,
    next: Vec<Vec<Option<usize>>>,
    by_word: HashMap<Vec<Symbol>, usize>,
    primitive: bool,
}

pub fn recode(spec: &SubshiftSpec, block: usize) -> Result<Arc<RecodedChain>> {
    if block == 0 {
        return Err(Error::ZeroMemory);
    }
    let states = spec.admissible_words(block);
    let by_word: HashMap<_, _> = states.iter().cloned().enumerate().map(|(i, w)| (w, i)).collect();
    let m = spec.alphabet_size();
    let mut next = vec![vec![None; m]; states.len()];
    let mut successors = vec![Vec::new(); states.len()];
    let mut predecessors = vec![Vec::new(); states.len()];
    for (i, w) in states.iter().enumerate() {
        let last = *w.last().unwrap();
        for s in spec.successors(last) {
            let mut nw = w[1..].to_vec();
            nw.push(s);
            let j = by_word[&nw];
            next[i][s] = Some(j);
            successors[i].push(j);
            predecessors[j].push(i);
        }
    }
    let primitive = graph_is_primitive(&successors, &predecessors);
    Ok(Arc::new(RecodedChain { base: spec.clone(), block, states, successors, predecessors, next, by_word, primitive }))
}

fn graph_is_primitive(succ: &[Vec<usize>], pred: &[Vec<usize>]) -> bool {
    let n = succ.len();
    let bfs = |adj: &[Vec<usize>]| {
        let mut level = vec![usize::MAX; n];
        level[0] = 0;
        let mut queue = VecDeque::from([0]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if level[v] == usize::MAX {
                    level[v] = level[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        level
    };
    let fwd = bfs(succ);
    if fwd.contains(&usize::MAX) || bfs(pred).contains(&usize::MAX) {
        return false;
    }
    let mut g = 0usize;
    for u in 0..n {
        for &v in &succ[u] {
            let d = (fwd[u] + 1).abs_diff(fwd[v]);
            g = gcd(g, d);
        }
    }
    g == 1
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 { a } else { gcd(b, a % b) }
}

impl RecodedChain {
    pub fn base(&self) -> &SubshiftSpec {
        &self.base
    }

    pub fn block(&self) -> usize {
        self.block
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[Vec<Symbol>] {
        &self.states
    }

    pub fn state_word(&self, state: usize) -> &[Symbol] {
        &self.states[state]
    }

    pub fn state_of(&self, word: &[Symbol]) -> Option<usize> {
        self.by_word.get(word).copied()
    }

    pub fn successors(&self, state: usize) -> &[usize] {
        &self.successors[state]
    }

    pub fn predecessors(&self, state: usize) -> &[usize] {
        &self.predecessors[state]
    }

    /// The state reached by appending `symbol`, if admissible.
    #[inline]
    pub fn step(&self, state: usize, symbol: Symbol) -> Option<usize> {
        self.next[state].get(symbol).copied().flatten()
    }

    /// Last symbol of a state (the symbol at the current coordinate).
    #[inline]
    pub fn current_symbol(&self, state: usize) -> Symbol {
        *self.states[state].last().unwrap()
    }

    pub fn allowed(&self, from: usize, to: usize) -> bool {
        self.successors[from].contains(&to)
    }

    pub fn is_primitive(&self) -> bool {
        self.primitive
    }

    pub fn edge_count(&self) -> usize {
        self.successors.iter().map(Vec::len).sum()
    }

    /// `phi` evaluated on every state (last `phi.memory()` symbols).
    pub fn state_values(&self, phi: &Potential) -> Result<Vec<f64>> {
        if phi.memory() > self.block {
            return Err(Error::MemoryTooLarge { memory: phi.memory(), block: self.block });
        }
        if phi.alphabet_size() != self.base.alphabet_size() {
            return Err(Error::AlphabetSizeMismatch);
        }
        Ok(self.states.iter().map(|w| phi.value_at_end(w)).collect())
    }
}

/// `M_{w,w'} = [w -> w'] e^{phi(w)}`, stored as `phi(w)` per source state.
#[derive(Debug, Clone)]
pub struct WeightedMatrix {
    chain: Arc<RecodedChain>,
    log_weights: Vec<f64>,
    log_scale: f64,
}

pub fn transfer_matrix(chain: &Arc<RecodedChain>, phi: &Potential) -> Result<WeightedMatrix> {
    Ok(WeightedMatrix::from_state_values(chain, chain.state_values(phi)?))
}

impl WeightedMatrix {
    pub fn from_state_values(chain: &Arc<RecodedChain>, log_weights: Vec<f64>) -> Self {
        assert_eq!(log_weights.len(), chain.len());
        let log_scale = log_weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        WeightedMatrix { chain: chain.clone(), log_weights, log_scale }
    }

    pub fn chain(&self) -> &Arc<RecodedChain> {
        &self.chain
    }

    /// `phi(w)` for each source state.
    pub fn log_weights(&self) -> &[f64] {
        &self.log_weights
    }

    pub fn entry(&self, from: usize, to: usize) -> f64 {
        if self.chain.allowed(from, to) {
            self.log_weights[from].exp()
        } else {
            0.0
        }
    }

    /// Dense copy of `M` (unscaled).
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let n = self.chain.len();
        (0..n).map(|i| (0..n).map(|j| self.entry(i, j)).collect()).collect()
    }
}

/// Perron eigendata of a weighted transfer matrix.
#[derive(Debug, Clone, Serialize)]
pub struct RpfData {
    /// `log λ_P`, the pressure.
    pub log_eigenvalue: f64,
    /// Right eigenvector `h`, normalized with `Σ ν_w h_w = 1`.
    pub right: Vec<f64>,
    /// Left eigenvector `ν`, a probability vector.
    pub left: Vec<f64>,
    /// `log h`, finite even where `h` underflows.
    pub log_right: Vec<f64>,
    /// `log ν`.
    pub log_left: Vec<f64>,
    /// Relative Collatz–Wielandt gap at termination.
    pub residual: f64,
    pub iterations: usize,
}

impl RpfData {
    pub fn eigenvalue(&self) -> f64 {
        self.log_eigenvalue.exp()
    }

    pub fn pressure(&self) -> f64 {
        self.log_eigenvalue
    }
}

pub fn rpf_solve(m: &WeightedMatrix, tol: f64) -> Result<RpfData> {
    rpf_solve_with(m, tol, DEFAULT_MAX_ITER)
}

/// Plain iterations before switching to repeated squaring.
const PLAIN_ITER: usize = 4000;
/// Largest state count for which the dense squaring fallback is used.
const DENSE_LIMIT: usize = 1024;
/// Squarings per dense fallback, so one step applies `(M + sI)^(2^SQUARINGS)`.
const SQUARINGS: usize = 40;

fn log_sum_exp(it: impl Iterator<Item = f64> + Clone) -> f64 {
    let m = it.clone().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + it.map(|x| (x - m).exp()).sum::<f64>().ln()
}

fn log_add(a: f64, b: f64) -> f64 {
    let (hi, lo) = if a >= b { (a, b) } else { (b, a) };
    if lo == f64::NEG_INFINITY { hi } else { hi + (lo - hi).exp().ln_1p() }
}

/// Relative Collatz–Wielandt gap `1 - min r / max r` of log ratios `r`, and `log min r`.
fn log_cw_gap(v: &[f64], mv: &[f64]) -> (f64, f64) {
    let (lo, hi) = v.iter().zip(mv).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (&x, &y)| {
        let r = y - x;
        (lo.min(r), hi.max(r))
    });
    (-(lo - hi).exp_m1(), lo)
}

fn normalize_max(v: &mut [f64]) {
    let m = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    v.iter_mut().for_each(|x| *x -= m);
}

/// Power iteration on `M + sI` and its transpose, carried in log space.
///
/// The shift `s` is half the current lower eigenvalue bound, which damps
/// eigenvalues near the negative real axis without moving the Perron vectors.
/// Termination uses the Collatz–Wielandt bounds
/// `min_i (Mh)_i/h_i <= λ <= max_i (Mh)_i/h_i` on both sides; `tol` is floored
/// at a few ulps per state, scaled by the largest log magnitude. If plain iteration stalls, the shifted matrix is
/// squared repeatedly in the log semiring and iteration continues with the
/// resulting power.
pub fn rpf_solve_with(m: &WeightedMatrix, tol: f64, max_iter: usize) -> Result<RpfData> {
    let chain = &m.chain;
    if !chain.is_primitive() {
        return Err(Error::NotPrimitive { reason: "recoded state graph is not primitive".into() });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    let n = chain.len();
    let eff_tol = tol.max(8.0 * n as f64 * f64::EPSILON);
    let lw: Vec<f64> = m.log_weights.iter().map(|&v| v - m.log_scale).collect();
    let right = |lh: &[f64], out: &mut [f64]| {
        for (w, o) in out.iter_mut().enumerate() {
            *o = lw[w] + log_sum_exp(chain.successors(w).iter().map(|&v| lh[v]));
        }
    };
    let left = |lnu: &[f64], out: &mut [f64]| {
        for (v, o) in out.iter_mut().enumerate() {
            *o = log_sum_exp(chain.predecessors(v).iter().map(|&w| lnu[w] + lw[w]));
        }
    };
    let mut lh = vec![0.0; n];
    let mut lnu = vec![0.0; n];
    let mut mh = vec![0.0; n];
    let mut num = vec![0.0; n];
    let mut dense: Option<Vec<f64>> = None;
    let mut residual = f64::INFINITY;
    for it in 0..max_iter {
        right(&lh, &mut mh);
        left(&lnu, &mut num);
        let (gap_r, lo_r) = log_cw_gap(&lh, &mh);
        let (gap_l, lo_l) = log_cw_gap(&lnu, &num);
        residual = gap_r.max(gap_l);
        let magnitude = lh.iter().chain(&mh).chain(&lnu).chain(&num).fold(1.0f64, |a, x| a.max(x.abs()));
        if residual <= eff_tol.max(8.0 * n as f64 * f64::EPSILON * magnitude) {
            return Ok(finish(m, lh, lnu, &mh, residual, it));
        }
        let log_shift = lo_r.max(lo_l) - std::f64::consts::LN_2;
        if dense.is_none() && it >= PLAIN_ITER && n <= DENSE_LIMIT {
            dense = Some(shifted_power(chain, &lw, log_shift));
        }
        match &dense {
            None => {
                for (x, &y) in lh.iter_mut().zip(&mh) {
                    *x = log_add(y, log_shift + *x);
                }
                for (x, &y) in lnu.iter_mut().zip(&num) {
                    *x = log_add(y, log_shift + *x);
                }
            }
            Some(b) => {
                let h0 = lh.clone();
                let nu0 = lnu.clone();
                for i in 0..n {
                    lh[i] = log_sum_exp((0..n).map(|j| b[i * n + j] + h0[j]));
                    lnu[i] = log_sum_exp((0..n).map(|j| nu0[j] + b[j * n + i]));
                }
            }
        }
        normalize_max(&mut lh);
        normalize_max(&mut lnu);
        if dense.is_some() && it >= PLAIN_ITER + 200 {
            break;
        }
    }
    Err(Error::NoConvergence { max_iter, residual })
}

/// `log (M + sI)^(2^SQUARINGS)` up to a scalar, dense and row-major.
fn shifted_power(chain: &RecodedChain, lw: &[f64], log_shift: f64) -> Vec<f64> {
    let n = chain.len();
    let mut b = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        for &j in chain.successors(i) {
            b[i * n + j] = lw[i];
        }
        b[i * n + i] = log_add(b[i * n + i], log_shift);
    }
    let mut next = vec![f64::NEG_INFINITY; n * n];
    for _ in 0..SQUARINGS {
        for i in 0..n {
            for j in 0..n {
                next[i * n + j] = log_sum_exp((0..n).map(|k| b[i * n + k] + b[k * n + j]));
            }
        }
        let top = next.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for (x, &y) in b.iter_mut().zip(&next) {
            *x = y - top;
        }
    }
    b
}

fn finish(m: &WeightedMatrix, mut lh: Vec<f64>, mut lnu: Vec<f64>, mh: &[f64], residual: f64, iterations: usize) -> RpfData {
    let log_nu_sum = log_sum_exp(lnu.iter().copied());
    lnu.iter_mut().for_each(|x| *x -= log_nu_sum);
    let log_lambda = log_sum_exp(lnu.iter().zip(mh).map(|(a, b)| a + b)) - log_sum_exp(lnu.iter().zip(&lh).map(|(a, b)| a + b));
    let log_norm = log_sum_exp(lnu.iter().zip(&lh).map(|(a, b)| a + b));
    lh.iter_mut().for_each(|x| *x -= log_norm);
    RpfData {
        log_eigenvalue: log_lambda + m.log_scale,
        right: lh.iter().map(|x| x.exp()).collect(),
        left: lnu.iter().map(|x| x.exp()).collect(),
        log_right: lh,
        log_left: lnu,
        residual,
        iterations,
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `P(phi)` on the block-`phi.memory()` recoding.
pub fn pressure(spec: &SubshiftSpec, phi: &Potential) -> Result<f64> {
    pressure_at_block(spec, phi, phi.memory())
}

pub fn pressure_at_block(spec: &SubshiftSpec, phi: &Potential, block: usize) -> Result<f64> {
    let chain = recode(spec, block)?;
    Ok(rpf_solve(&transfer_matrix(&chain, phi)?, DEFAULT_TOL)?.log_eigenvalue)
}

/// `log Σ e^{φ(s_0) + ... + φ(s_{n-1})}` over all admissible state paths of length `n`,
/// accumulated in the log domain.
pub fn log_partition_sum(chain: &RecodedChain, phi: &Potential, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("path length must be positive".into()));
    }
    let g = chain.state_values(phi)?;
    let gmax = g.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = g.iter().map(|&x| (x - gmax).exp()).collect();
    let mut v = w.clone();
    let mut log_acc = gmax;
    let mut tmp = vec![0.0; v.len()];
    for _ in 1..n {
        for (s, t) in tmp.iter_mut().enumerate() {
            *t = w[s] * chain.successors(s).iter().map(|&j| v[j]).sum::<f64>();
        }
        let mx = tmp.iter().copied().fold(0.0, f64::max);
        v.iter_mut().zip(&tmp).for_each(|(a, &b)| *a = b / mx);
        log_acc += gmax + mx.ln();
    }
    Ok(log_acc + v.iter().sum::<f64>().ln())
}

/// A shift-invariant Markov measure on a recoded chain.
#[derive(Debug, Clone, Serialize)]
pub struct MarkovMeasure {
    #[serde(skip)]
    chain: Arc<RecodedChain>,
    /// Row-major stochastic matrix.
    transition: Vec<f64>,
    stationary: Vec<f64>,
}

const ROW_SUM_TOL: f64 = 1e-10;

impl MarkovMeasure {
    /// Validates a row-major transition matrix and solves for its stationary vector.
    pub fn new(chain: &Arc<RecodedChain>, transition: Vec<f64>) -> Result<Self> {
        let transition = Self::checked_transition(chain, transition)?;
        let stationary = stationary_vector(chain.len(), &transition)?;
        Ok(MarkovMeasure { chain: chain.clone(), transition, stationary })
    }

    fn checked_transition(chain: &RecodedChain, mut transition: Vec<f64>) -> Result<Vec<f64>> {
        let n = chain.len();
        if transition.len() != n * n {
            return Err(Error::InvalidArgument(format!("transition has {} entries, expected {}", transition.len(), n * n)));
        }
        for i in 0..n {
            let row = &mut transition[i * n..(i + 1) * n];
            for (j, &p) in row.iter().enumerate() {
                if !(p >= 0.0) || !p.is_finite() {
                    return Err(Error::NotStochastic { row: i, sum: p });
                }
                if p > 0.0 && !chain.allowed(i, j) {
                    return Err(Error::IncompatibleSupport { from: i, to: j });
                }
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > ROW_SUM_TOL {
                return Err(Error::NotStochastic { row: i, sum });
            }
            row.iter_mut().for_each(|p| *p /= sum);
        }
        Ok(transition)
    }

    /// Builds the Markov measure whose two-state marginal is `pair` (row-major,
    /// nonnegative, total mass 1, row sums equal to column sums).
    pub fn from_pair_measure(chain: &Arc<RecodedChain>, pair: &[f64]) -> Result<Self> {
        let n = chain.len();
        if pair.len() != n * n {
            return Err(Error::InvalidArgument("pair measure has the wrong size".into()));
        }
        let total: f64 = pair.iter().sum();
        let stationary: Vec<f64> = (0..n).map(|i| pair[i * n..(i + 1) * n].iter().sum::<f64>() / total).collect();
        for j in 0..n {
            let col: f64 = (0..n).map(|i| pair[i * n + j]).sum::<f64>() / total;
            if (col - stationary[j]).abs() > 1e-10 {
                return Err(Error::InvalidArgument(format!("pair measure is not shift-invariant at state {j}")));
            }
        }
        let mut transition = vec![0.0; n * n];
        for i in 0..n {
            let row_mass = stationary[i] * total;
            for j in 0..n {
                transition[i * n + j] = if row_mass > 0.0 {
                    pair[i * n + j] / row_mass
                } else if j == chain.successors(i)[0] {
                    // unvisited state: any admissible row keeps the matrix stochastic
                    1.0
                } else {
                    0.0
                };
            }
        }
        let transition = Self::checked_transition(chain, transition)?;
        Ok(MarkovMeasure { chain: chain.clone(), transition, stationary })
    }

    /// A random fully supported Markov measure with log-uniform edge weights of random spread.
    pub fn random(chain: &Arc<RecodedChain>, rng: &mut impl Rng) -> Self {
        let n = chain.len();
        let spread = rng.random_range(0.0..8.0);
        let mut transition = vec![0.0; n * n];
        for i in 0..n {
            let succ = chain.successors(i);
            let weights: Vec<f64> = succ.iter().map(|_| (spread * rng.random::<f64>()).exp()).collect();
            let total: f64 = weights.iter().sum();
            for (&j, w) in succ.iter().zip(weights) {
                transition[i * n + j] = w / total;
            }
        }
        Self::new(chain, transition).expect("positive weights on a primitive chain")
    }

    pub fn chain(&self) -> &Arc<RecodedChain> {
        &self.chain
    }

    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    #[inline]
    pub fn transition(&self, from: usize, to: usize) -> f64 {
        self.transition[from * self.chain.len() + to]
    }

    pub fn row(&self, from: usize) -> &[f64] {
        let n = self.chain.len();
        &self.transition[from * n..(from + 1) * n]
    }

    pub fn transition_matrix(&self) -> &[f64] {
        &self.transition
    }

    /// `m(w, w') = π_w P_{w,w'}`, row-major.
    pub fn pair_measure(&self) -> Vec<f64> {
        let n = self.chain.len();
        (0..n * n).map(|k| self.stationary[k / n] * self.transition[k]).collect()
    }

    pub fn entropy(&self) -> f64 {
        entropy(self)
    }

    pub fn integrate(&self, phi: &Potential) -> Result<f64> {
        integrate(self, phi)
    }

    /// `max_j |(πP)_j - π_j|`.
    pub fn stationarity_error(&self) -> f64 {
        let n = self.chain.len();
        (0..n)
            .map(|j| ((0..n).map(|i| self.stationary[i] * self.transition(i, j)).sum::<f64>() - self.stationary[j]).abs())
            .fold(0.0, f64::max)
    }

    /// `max_i |Σ_j P_{ij} - 1|`.
    pub fn stochasticity_error(&self) -> f64 {
        let n = self.chain.len();
        (0..n).map(|i| (self.row(i).iter().sum::<f64>() - 1.0).abs()).fold(0.0, f64::max)
    }
}

fn stationary_vector(n: usize, transition: &[f64]) -> Result<Vec<f64>> {
    // (P^T - I) π = 0 with the last equation replaced by Σ π = 1.
    let mut a = DMatrix::<f64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            a[(j, i)] = transition[i * n + j];
        }
        a[(i, i)] -= 1.0;
    }
    for j in 0..n {
        a[(n - 1, j)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(n);
    b[n - 1] = 1.0;
    let pi = a.lu().solve(&b).ok_or(Error::NoUniqueStationary)?;
    if pi.iter().any(|&x| !x.is_finite() || x < -1e-9) {
        return Err(Error::NoUniqueStationary);
    }
    let mut pi: Vec<f64> = pi.iter().map(|&x| x.max(0.0)).collect();
    let s: f64 = pi.iter().sum();
    pi.iter_mut().for_each(|x| *x /= s);
    Ok(pi)
}

/// Gibbs measure of the potential behind `m`:
/// `P_{w,w'} = M_{w,w'} h_{w'} / (λ h_w)`, `π_w = ν_w h_w`.
pub fn gibbs_measure(rpf: &RpfData, m: &WeightedMatrix) -> MarkovMeasure {
    let chain = m.chain.clone();
    let n = chain.len();
    let mut transition = vec![0.0; n * n];
    for i in 0..n {
        let row = &mut transition[i * n..(i + 1) * n];
        let succ = chain.successors(i);
        let top = succ.iter().map(|&j| rpf.log_right[j]).fold(f64::NEG_INFINITY, f64::max);
        for &j in succ {
            row[j] = (rpf.log_right[j] - top).exp();
        }
        let s: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= s);
    }
    let log_pi: Vec<f64> = rpf.log_left.iter().zip(&rpf.log_right).map(|(a, b)| a + b).collect();
    let top = log_pi.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut stationary: Vec<f64> = log_pi.iter().map(|x| (x - top).exp()).collect();
    let s: f64 = stationary.iter().sum();
    stationary.iter_mut().for_each(|x| *x /= s);
    MarkovMeasure { chain, transition, stationary }
}

/// Equilibrium state of `g` on the block-`block` recoding, with its pressure.
pub fn equilibrium_state(spec: &SubshiftSpec, g: &Potential, block: usize) -> Result<(MarkovMeasure, f64)> {
    let chain = recode(spec, block)?;
    let m = transfer_matrix(&chain, g)?;
    let rpf = rpf_solve(&m, DEFAULT_TOL)?;
    Ok((gibbs_measure(&rpf, &m), rpf.log_eigenvalue))
}

/// `-Σ_w π_w Σ_{w'} P_{w,w'} log P_{w,w'}`.
pub fn entropy(mu: &MarkovMeasure) -> f64 {
    let n = mu.chain.len();
    let mut h = 0.0;
    for i in 0..n {
        let row: f64 = mu.row(i).iter().filter(|&&p| p > 0.0).map(|&p| p * p.ln()).sum();
        h -= mu.stationary[i] * row;
    }
    h.max(0.0)
}

pub fn integrate(mu: &MarkovMeasure, phi: &Potential) -> Result<f64> {
    let values = mu.chain.state_values(phi)?;
    Ok(dot(&mu.stationary, &values))
}

/// `P(G) - ∫G dμ - h_μ`, nonnegative by the variational principle and zero
/// exactly at the equilibrium state of `G`.
pub fn variational_gap(spec: &SubshiftSpec, g: &Potential, mu: &MarkovMeasure) -> Result<f64> {
    if mu.chain.base() != spec {
        return Err(Error::ChainMismatch("measure lives on a different subshift".into()));
    }
    let p = pressure(spec, g)?;
    Ok(p - integrate(mu, g)? - entropy(mu))
}
