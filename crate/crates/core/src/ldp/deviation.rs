//! Masses of deviation sets `{y : S_nφ(y)/n ∈ L}` under a leaf measure.
//!
//! `S_nφ` sums `φ` over the `n` states entered after the base symbol, so a
//! deviation word has `n + 1` symbols.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leaf::LeafMeasure;
use crate::rng;
use crate::sft::Potential;

pub const DEFAULT_WORK_BUDGET: u64 = 1_000_000_000;
const MC_CHUNK: u64 = 4096;
const LATTICE_MAX_DENOMINATOR: i64 = 1_000_000;
const LATTICE_TOL: f64 = 1e-13;

/// A real interval with open or closed ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
    pub lo_closed: bool,
    pub hi_closed: bool,
}

impl Interval {
    pub fn new(lo: f64, hi: f64, lo_closed: bool, hi_closed: bool) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() {
            return Err(Error::InvalidArgument("interval endpoint is NaN".into()));
        }
        let iv = Interval { lo, hi, lo_closed, hi_closed };
        if lo > hi || (lo == hi && !(lo_closed && hi_closed)) {
            return Err(Error::EmptyInterval(iv.to_string()));
        }
        Ok(iv)
    }

    pub fn closed(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, true, true)
    }

    pub fn open(lo: f64, hi: f64) -> Result<Self> {
        Self::new(lo, hi, false, false)
    }

    fn slack(x: f64) -> f64 {
        1e-12 * x.abs().max(1.0)
    }

    /// Membership with a relative slack of `1e-12` in favor of closed ends.
    pub fn contains(&self, x: f64) -> bool {
        let lo_ok = if self.lo_closed { x >= self.lo - Self::slack(self.lo) } else { x > self.lo + Self::slack(self.lo) };
        let hi_ok = if self.hi_closed { x <= self.hi + Self::slack(self.hi) } else { x < self.hi - Self::slack(self.hi) };
        lo_ok && hi_ok
    }

    /// Whether all of `[a, b]` lies in the interval.
    pub fn contains_range(&self, a: f64, b: f64) -> bool {
        self.contains(a) && self.contains(b)
    }

    /// Whether `[a, b]` meets the interval.
    pub fn meets_range(&self, a: f64, b: f64) -> bool {
        let lo_ok = if self.lo_closed { b >= self.lo - Self::slack(self.lo) } else { b > self.lo + Self::slack(self.lo) };
        let hi_ok = if self.hi_closed { a <= self.hi + Self::slack(self.hi) } else { a < self.hi - Self::slack(self.hi) };
        lo_ok && hi_ok
    }

    pub fn is_subset_of(&self, other: &Interval) -> bool {
        let lo_ok = self.lo > other.lo || (self.lo == other.lo && (other.lo_closed || !self.lo_closed));
        let hi_ok = self.hi < other.hi || (self.hi == other.hi && (other.hi_closed || !self.hi_closed));
        lo_ok && hi_ok
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let l = if self.lo_closed { '[' } else { '(' };
        let r = if self.hi_closed { ']' } else { ')' };
        write!(f, "{l}{}, {}{r}", self.lo, self.hi)
    }
}

/// Accepts `a:b` (closed) or bracket notation such as `[a,b)` and `(a, b]`.
impl FromStr for Interval {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::InvalidArgument(format!("cannot parse interval {s:?}"));
        let num = |t: &str| -> Result<f64> {
            match t.trim() {
                "inf" | "+inf" | "infinity" => Ok(f64::INFINITY),
                "-inf" | "-infinity" => Ok(f64::NEG_INFINITY),
                t => t.parse::<f64>().map_err(|_| bad()),
            }
        };
        if let Some((a, b)) = s.split_once(':') {
            if !s.starts_with(['[', '(']) {
                return Interval::closed(num(a)?, num(b)?);
            }
        }
        let lo_closed = match s.chars().next() {
            Some('[') => true,
            Some('(') => false,
            _ => return Err(bad()),
        };
        let hi_closed = match s.chars().last() {
            Some(']') => true,
            Some(')') => false,
            _ => return Err(bad()),
        };
        let inner = &s[1..s.len() - 1];
        let (a, b) = inner.split_once([',', ':']).ok_or_else(bad)?;
        Interval::new(num(a)?, num(b)?, lo_closed, hi_closed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DeviationMethod {
    ExactEnumeration,
    DpLattice,
    DpBinned,
    MonteCarlo,
}

impl DeviationMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            DeviationMethod::ExactEnumeration => "exact-enumeration",
            DeviationMethod::DpLattice => "dp-lattice",
            DeviationMethod::DpBinned => "dp-binned",
            DeviationMethod::MonteCarlo => "monte-carlo",
        }
    }
}

/// Deviation mass at one length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DeviationPoint {
    pub n: usize,
    /// Point estimate; the midpoint of the bracket for binned DP.
    pub mass: f64,
    pub log_mass: f64,
    /// Certified bracket; equal to `mass` for exact methods.
    pub lower: f64,
    pub upper: f64,
    /// Standard error (Monte Carlo only, zero otherwise).
    pub stderr: f64,
}

impl DeviationPoint {
    fn exact(n: usize, mass: f64) -> Self {
        let mass = mass.clamp(0.0, 1.0);
        DeviationPoint { n, mass, log_mass: mass.ln(), lower: mass, upper: mass, stderr: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSeries {
    pub interval: Interval,
    pub method: DeviationMethod,
    pub bin_width: Option<f64>,
    pub points: Vec<DeviationPoint>,
}

impl DeviationSeries {
    pub fn lengths(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.n).collect()
    }

    pub fn log_masses(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.log_mass).collect()
    }
}

/// How `deviation_mass_exact` evaluates the mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum ExactMode {
    /// Lattice DP when `φ` is on a rational lattice, otherwise enumeration
    /// within budget, otherwise binned DP.
    Auto,
    Enumerate,
    Lattice,
    Binned { bin_width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactOptions {
    pub mode: ExactMode,
    /// Cap on words visited (enumeration) or state-sum cells updated (DP).
    pub budget: u64,
    /// Bin width for `Auto` when neither exact method applies; defaults to
    /// `1e-3` of the spread of `φ`.
    pub bin_width: Option<f64>,
}

impl Default for ExactOptions {
    fn default() -> Self {
        ExactOptions { mode: ExactMode::Auto, budget: DEFAULT_WORK_BUDGET, bin_width: None }
    }
}

/// `φ` values written as `base + step · m_s` with integers `m_s >= 0`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Lattice {
    pub base: f64,
    pub step: f64,
    pub multiples: Vec<i64>,
}

/// Best rational approximation `p/q` with `q <= max_den` by continued fractions.
fn rational(x: f64, max_den: i64, tol: f64) -> Option<(i64, i64)> {
    if !x.is_finite() || x.abs() > 1e12 {
        return None;
    }
    let (mut h0, mut h1) = (0i64, 1i64);
    let (mut k0, mut k1) = (1i64, 0i64);
    let mut r = x;
    for _ in 0..64 {
        let a = r.floor();
        if a.abs() > 1e15 {
            break;
        }
        let a = a as i64;
        let h2 = a.checked_mul(h1)?.checked_add(h0)?;
        let k2 = a.checked_mul(k1)?.checked_add(k0)?;
        if k2 > max_den {
            break;
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        if (h1 as f64 / k1 as f64 - x).abs() <= tol * x.abs().max(1.0) {
            return Some((h1, k1));
        }
        let frac = r - a as f64;
        if frac == 0.0 {
            break;
        }
        r = 1.0 / frac;
    }
    None
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

/// Detects a lattice `base + step·ℤ` containing `values`: every difference
/// from the minimum must be a rational multiple (denominator up to `10^6`) of
/// the smallest nonzero difference.
pub fn detect_lattice(values: &[f64]) -> Option<Lattice> {
    let base = values.iter().copied().fold(f64::INFINITY, f64::min);
    if !base.is_finite() || values.iter().any(|v| !v.is_finite()) {
        return None;
    }
    let diffs: Vec<f64> = values.iter().map(|v| v - base).collect();
    let scale = values.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let zero = LATTICE_TOL * scale;
    let unit = diffs.iter().copied().filter(|&d| d > zero).fold(f64::INFINITY, f64::min);
    if !unit.is_finite() {
        return Some(Lattice { base, step: 0.0, multiples: vec![0; values.len()] });
    }
    let mut fracs = Vec::with_capacity(diffs.len());
    for &d in &diffs {
        if d <= zero {
            fracs.push((0, 1));
            continue;
        }
        fracs.push(rational(d / unit, LATTICE_MAX_DENOMINATOR, LATTICE_TOL * scale / unit)?);
    }
    let mut lcm: i64 = 1;
    for &(_, q) in &fracs {
        lcm = lcm.checked_mul(q / gcd(lcm, q))?;
        if lcm > LATTICE_MAX_DENOMINATOR {
            return None;
        }
    }
    let nums: Vec<i64> = fracs.iter().map(|&(p, q)| p * (lcm / q)).collect();
    let g = nums.iter().fold(0, |a, &b| gcd(a, b));
    Some(Lattice { base, step: unit * g as f64 / lcm as f64, multiples: nums.iter().map(|m| m / g).collect() })
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    Ok(())
}

/// `μ^u{y : S_nφ(y)/n ∈ L}`.
pub fn deviation_mass_exact(
    leaf: &LeafMeasure,
    phi: &Potential,
    interval: &Interval,
    n: usize,
    options: &ExactOptions,
) -> Result<(DeviationPoint, DeviationMethod)> {
    let series = deviation_series_exact(leaf, phi, interval, &[n], options)?;
    Ok((series.points[0], series.method))
}

/// Deviation masses at several lengths; DP methods run once to the largest `n`.
pub fn deviation_series_exact(
    leaf: &LeafMeasure,
    phi: &Potential,
    interval: &Interval,
    lengths: &[usize],
    options: &ExactOptions,
) -> Result<DeviationSeries> {
    if lengths.is_empty() {
        return Err(Error::InvalidArgument("no lengths requested".into()));
    }
    for &n in lengths {
        check_n(n)?;
    }
    let values = leaf.chain().state_values(phi)?;
    let n_max = *lengths.iter().max().unwrap();
    let mode = match options.mode {
        ExactMode::Auto => {
            if detect_lattice(&values).is_some() {
                ExactMode::Lattice
            } else if enumeration_cost(leaf, n_max) <= options.budget as f64 {
                ExactMode::Enumerate
            } else {
                let (lo, hi) = values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
                let w = options.bin_width.unwrap_or(1e-3 * (hi - lo).max(f64::MIN_POSITIVE));
                ExactMode::Binned { bin_width: w }
            }
        }
        m => m,
    };
    let mut series = DeviationSeries { interval: *interval, method: DeviationMethod::ExactEnumeration, bin_width: None, points: Vec::new() };
    match mode {
        ExactMode::Enumerate => {
            let cost = enumeration_cost(leaf, n_max);
            if cost > options.budget as f64 {
                return Err(Error::BudgetExceeded { work: cost, budget: options.budget });
            }
            for &n in lengths {
                series.points.push(DeviationPoint::exact(n, enumerate(leaf, &values, interval, n)));
            }
        }
        ExactMode::Lattice => {
            let lattice = detect_lattice(&values)
                .ok_or_else(|| Error::InvalidArgument("potential values are not on a rational lattice".into()))?;
            series.method = DeviationMethod::DpLattice;
            let ints: Vec<i64> = lattice.multiples.clone();
            let base = lattice.base;
            let step = lattice.step;
            let masses = sum_dp(leaf, &ints, lengths, options.budget, |n, m| {
                let x = (n as f64 * base + m as f64 * step) / n as f64;
                let inside = interval.contains(x);
                (inside, inside)
            })?;
            for (&n, (lo, _)) in lengths.iter().zip(masses) {
                series.points.push(DeviationPoint::exact(n, lo));
            }
        }
        ExactMode::Binned { bin_width } => {
            if !(bin_width > 0.0) || !bin_width.is_finite() {
                return Err(Error::InvalidArgument(format!("bin width must be positive, got {bin_width}")));
            }
            series.method = DeviationMethod::DpBinned;
            series.bin_width = Some(bin_width);
            let ints: Vec<i64> = values.iter().map(|v| (v / bin_width).round() as i64).collect();
            let e_max = values.iter().zip(&ints).map(|(v, &m)| (v - m as f64 * bin_width).abs()).fold(0.0, f64::max);
            let masses = sum_dp(leaf, &ints, lengths, options.budget, |n, m| {
                let q = m as f64 * bin_width;
                let err = n as f64 * e_max;
                let (a, b) = ((q - err) / n as f64, (q + err) / n as f64);
                (interval.contains_range(a, b), interval.meets_range(a, b))
            })?;
            for (&n, (lo, hi)) in lengths.iter().zip(masses) {
                let (lo, hi) = (lo.clamp(0.0, 1.0), hi.clamp(0.0, 1.0));
                let mid = 0.5 * (lo + hi);
                series.points.push(DeviationPoint { n, mass: mid, log_mass: mid.ln(), lower: lo, upper: hi, stderr: 0.0 });
            }
        }
        ExactMode::Auto => unreachable!(),
    }
    Ok(series)
}

/// Visited words times length for the enumeration.
fn enumeration_cost(leaf: &LeafMeasure, n: usize) -> f64 {
    leaf.leaf_word_counts(n + 1).last().copied().unwrap_or(0.0) * n as f64
}

fn enumerate(leaf: &LeafMeasure, values: &[f64], interval: &Interval, n: usize) -> f64 {
    fn go(leaf: &LeafMeasure, values: &[f64], iv: &Interval, n: usize, depth: usize, s: usize, mass: f64, sum: f64) -> f64 {
        if depth == n {
            return if iv.contains(sum / n as f64) { mass } else { 0.0 };
        }
        leaf.chain()
            .successors(s)
            .iter()
            .map(|&j| go(leaf, values, iv, n, depth + 1, j, mass * leaf.transition(s, j), sum + values[j]))
            .sum()
    }
    go(leaf, values, interval, n, 0, leaf.start_state(), 1.0, 0.0)
}

/// Forward DP over `(state, Σ ints)`; `classify(n, Σ)` returns whether the
/// sum is certainly / possibly in the set. Returns `(certain, possible)` mass per length.
fn sum_dp(
    leaf: &LeafMeasure,
    ints: &[i64],
    lengths: &[usize],
    budget: u64,
    classify: impl Fn(usize, i64) -> (bool, bool) + Sync,
) -> Result<Vec<(f64, f64)>> {
    let chain = leaf.chain();
    let states = chain.len();
    let n_max = *lengths.iter().max().unwrap();
    let lo_step = ints.iter().copied().min().unwrap();
    let hi_step = ints.iter().copied().max().unwrap();
    let width = (hi_step - lo_step) as usize;
    let cells = (n_max * width + 1) as f64;
    let work = cells * chain.edge_count() as f64 * n_max as f64;
    if work > budget as f64 {
        return Err(Error::BudgetExceeded { work, budget });
    }
    let span = n_max * width + 1;
    // offsets relative to n·lo_step so indices stay nonnegative
    let shifted: Vec<usize> = ints.iter().map(|&m| (m - lo_step) as usize).collect();
    let mut cur = vec![0.0f64; states * span];
    cur[leaf.start_state() * span] = 1.0;
    let mut out = vec![(0.0, 0.0); lengths.len()];
    for n in 1..=n_max {
        let prev_width = (n - 1) * width + 1;
        let mut next = vec![0.0f64; states * span];
        next.par_chunks_mut(span).enumerate().for_each(|(j, row)| {
            let d = shifted[j];
            for &i in chain.predecessors(j) {
                let p = leaf.transition(i, j);
                if p == 0.0 {
                    continue;
                }
                let src = &cur[i * span..i * span + prev_width];
                for (m, &x) in src.iter().enumerate() {
                    if x != 0.0 {
                        row[m + d] += x * p;
                    }
                }
            }
        });
        cur = next;
        for (slot, _) in lengths.iter().enumerate().filter(|(_, &l)| l == n) {
            let mut certain = 0.0;
            let mut possible = 0.0;
            let cur_width = n * width + 1;
            for m in 0..cur_width {
                let total: f64 = (0..states).map(|s| cur[s * span + m]).sum();
                if total == 0.0 {
                    continue;
                }
                let (c, p) = classify(n, m as i64 + n as i64 * lo_step);
                if c {
                    certain += total;
                }
                if p {
                    possible += total;
                }
            }
            out[slot] = (certain, possible);
        }
    }
    Ok(out)
}

/// Monte Carlo settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McOptions {
    pub samples: u64,
    /// Proposal `G + tφ` with likelihood-ratio reweighting.
    pub tilt: Option<f64>,
    pub seed: u64,
}

/// Estimate of the deviation mass with its standard error.
///
/// Sample `i` uses stream `i` of `seed`; chunk sums are reduced in a fixed
/// order, so results do not depend on the thread count.
pub fn deviation_mass_mc(leaf: &LeafMeasure, phi: &Potential, interval: &Interval, n: usize, options: &McOptions) -> Result<DeviationPoint> {
    check_n(n)?;
    if options.samples == 0 {
        return Err(Error::InvalidArgument("samples must be positive".into()));
    }
    let proposal = match options.tilt {
        Some(t) if t != 0.0 => leaf.tilted(phi, t)?,
        _ => leaf.clone(),
    };
    let values = leaf.chain().state_values(phi)?;
    let log_ratio: Vec<f64> = {
        let size = leaf.chain().len();
        let mut r = vec![0.0; size * size];
        for i in 0..size {
            for &j in leaf.chain().successors(i) {
                r[i * size + j] = (leaf.transition(i, j) / proposal.transition(i, j)).ln();
            }
        }
        r
    };
    let size = leaf.chain().len();
    let chunks = options.samples.div_ceil(MC_CHUNK);
    let sums: Vec<(f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let (mut s1, mut s2) = (0.0, 0.0);
            for i in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(options.samples) {
                let mut rng = rng::stream(options.seed, i);
                let mut s = proposal.start_state();
                let mut sum = 0.0;
                let mut lw = 0.0;
                for _ in 0..n {
                    let next = proposal.draw_next(s, rng.random::<f64>());
                    lw += log_ratio[s * size + next];
                    sum += values[next];
                    s = next;
                }
                if interval.contains(sum / n as f64) {
                    let w = lw.exp();
                    s1 += w;
                    s2 += w * w;
                }
            }
            (s1, s2)
        })
        .collect();
    let (s1, s2) = sums.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let m = options.samples as f64;
    let mean = s1 / m;
    let var = if options.samples > 1 { ((s2 / m - mean * mean) * m / (m - 1.0)).max(0.0) } else { 0.0 };
    let stderr = (var / m).sqrt();
    Ok(DeviationPoint { n, mass: mean, log_mass: mean.ln(), lower: mean, upper: mean, stderr })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::leaf::leaf_measure;
    use crate::sft::SubshiftSpec;
    use approx::assert_abs_diff_eq;

    fn binom_tail(n: u64, k_min: u64) -> f64 {
        let mut total = 0.0;
        let mut c = 1.0f64;
        for k in 0..=n {
            if k >= k_min {
                total += c;
            }
            c = c * (n - k) as f64 / (k + 1) as f64;
        }
        total / 2f64.powi(n as i32)
    }

    fn fs2_leaf() -> (LeafMeasure, Potential) {
        let s = SubshiftSpec::full_shift(2);
        (leaf_measure(&s, &Potential::zero(&s), &[0]).unwrap(), Potential::indicator(&s, 1))
    }

    #[test]
    fn interval_parsing() {
        assert_eq!("0.7:1".parse::<Interval>().unwrap(), Interval::closed(0.7, 1.0).unwrap());
        assert_eq!("[0.7, 1)".parse::<Interval>().unwrap(), Interval::new(0.7, 1.0, true, false).unwrap());
        assert_eq!("(0,1]".parse::<Interval>().unwrap(), Interval::new(0.0, 1.0, false, true).unwrap());
        assert_eq!("[-inf, 0.5]".parse::<Interval>().unwrap().lo, f64::NEG_INFINITY);
        assert!(matches!("1:0".parse::<Interval>(), Err(Error::EmptyInterval(_))));
        assert!(matches!("(1,1)".parse::<Interval>(), Err(Error::EmptyInterval(_))));
        assert!("0.7-1".parse::<Interval>().is_err());
        let iv = Interval::new(0.0, 1.0, false, true).unwrap();
        assert!(!iv.contains(0.0) && iv.contains(1.0) && iv.contains(0.5));
        assert!(Interval::closed(0.2, 0.3).unwrap().is_subset_of(&Interval::closed(0.0, 1.0).unwrap()));
    }

    #[test]
    fn lattice_detection() {
        let l = detect_lattice(&[0.0, 1.0]).unwrap();
        assert_eq!((l.base, l.step, l.multiples.clone()), (0.0, 1.0, vec![0, 1]));
        let l = detect_lattice(&[0.25, -0.5, 1.0]).unwrap();
        assert_eq!(l.base, -0.5);
        assert_abs_diff_eq!(l.step, 0.75);
        assert_eq!(l.multiples, vec![1, 0, 2]);
        let l = detect_lattice(&[1.0 / 3.0, 0.5]).unwrap();
        assert_abs_diff_eq!(l.step, 1.0 / 6.0, epsilon = 1e-15);
        let l = detect_lattice(&[0.3f64.ln(), 0.7f64.ln()]).unwrap();
        assert_eq!(l.multiples, vec![0, 1]);
        let l = detect_lattice(&[0.0, 2f64.ln(), 3.0 * 2f64.ln()]).unwrap();
        assert_eq!(l.multiples, vec![0, 1, 3]);
        assert!(detect_lattice(&[0.0, 1.0, 2f64.sqrt()]).is_none());
        assert!(detect_lattice(&[0.0, 1.0, std::f64::consts::PI]).is_none());
    }

    #[test]
    fn binomial_tail_oracle() {
        let (leaf, phi) = fs2_leaf();
        let iv = Interval::closed(0.7, 1.0).unwrap();
        let expected = 60460.0 / 1_048_576.0;
        assert_abs_diff_eq!(binom_tail(20, 14), expected, epsilon = 1e-15);
        for mode in [ExactMode::Enumerate, ExactMode::Lattice, ExactMode::Auto] {
            let opts = ExactOptions { mode, ..Default::default() };
            let (p, _) = deviation_mass_exact(&leaf, &phi, &iv, 20, &opts).unwrap();
            assert_abs_diff_eq!(p.mass, expected, epsilon = 1e-14);
        }
        let opts = ExactOptions { mode: ExactMode::Binned { bin_width: 0.01 }, ..Default::default() };
        let (p, m) = deviation_mass_exact(&leaf, &phi, &iv, 20, &opts).unwrap();
        assert_eq!(m, DeviationMethod::DpBinned);
        assert!(p.lower <= expected + 1e-15 && expected <= p.upper + 1e-15);
    }

    #[test]
    fn full_range_and_impossible_sets() {
        let (leaf, phi) = fs2_leaf();
        let all = Interval::closed(0.0, 1.0).unwrap();
        for n in [1, 7, 30] {
            let (p, _) = deviation_mass_exact(&leaf, &phi, &all, n, &ExactOptions::default()).unwrap();
            assert_abs_diff_eq!(p.mass, 1.0, epsilon = 1e-12);
        }
        let gm = SubshiftSpec::golden_mean();
        // based at 1 the entered symbols alternate from 0, so no average exceeds 1/2
        let leaf = leaf_measure(&gm, &Potential::zero(&gm), &[1]).unwrap();
        let above = Interval::new(0.5, 1.0, false, true).unwrap();
        for n in 1..=25 {
            let (p, _) = deviation_mass_exact(&leaf, &Potential::indicator(&gm, 1), &above, n, &ExactOptions::default()).unwrap();
            assert_eq!(p.mass, 0.0);
        }
    }

    #[test]
    fn enumeration_and_lattice_agree_on_memory_two() {
        let gm = SubshiftSpec::golden_mean();
        let g = Potential::from_fn(&gm, 2, |w| 0.3 * w[0] as f64 - 0.4 * w[1] as f64).unwrap();
        let phi = Potential::from_fn(&gm, 2, |w| (w[0] + 2 * w[1]) as f64 * 0.5).unwrap();
        let leaf = leaf_measure(&gm, &g, &[0, 1]).unwrap();
        let iv = Interval::new(0.3, 0.6, true, false).unwrap();
        for n in [1, 5, 12] {
            let e = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions { mode: ExactMode::Enumerate, ..Default::default() }).unwrap().0;
            let l = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions { mode: ExactMode::Lattice, ..Default::default() }).unwrap().0;
            assert_abs_diff_eq!(e.mass, l.mass, epsilon = 1e-13);
        }
    }

    #[test]
    fn budgets_are_enforced() {
        let (leaf, phi) = fs2_leaf();
        let iv = Interval::closed(0.7, 1.0).unwrap();
        let opts = ExactOptions { mode: ExactMode::Enumerate, budget: 1000, bin_width: None };
        assert!(matches!(deviation_mass_exact(&leaf, &phi, &iv, 20, &opts), Err(Error::BudgetExceeded { .. })));
        let opts = ExactOptions { mode: ExactMode::Lattice, budget: 1000, bin_width: None };
        assert!(matches!(deviation_mass_exact(&leaf, &phi, &iv, 500, &opts), Err(Error::BudgetExceeded { .. })));
    }

    #[test]
    fn monte_carlo_examples() {
        let (leaf, phi) = fs2_leaf();
        let all = Interval::closed(0.0, 1.0).unwrap();
        let p = deviation_mass_mc(&leaf, &phi, &all, 20, &McOptions { samples: 1000, tilt: None, seed: 1 }).unwrap();
        assert_eq!((p.mass, p.stderr), (1.0, 0.0));
        let iv = Interval::closed(0.7, 1.0).unwrap();
        let exact = 60460.0 / 1_048_576.0;
        let t = (7.0f64 / 3.0).ln();
        let tilted = deviation_mass_mc(&leaf, &phi, &iv, 20, &McOptions { samples: 100_000, tilt: Some(t), seed: 9 }).unwrap();
        assert!((tilted.mass - exact).abs() < 4.0 * tilted.stderr, "{tilted:?}");
        let naive = deviation_mass_mc(&leaf, &phi, &iv, 20, &McOptions { samples: 100_000, tilt: None, seed: 9 }).unwrap();
        let joint = (tilted.stderr.powi(2) + naive.stderr.powi(2)).sqrt();
        assert!((tilted.mass - naive.mass).abs() < 4.0 * joint);
        let again = deviation_mass_mc(&leaf, &phi, &iv, 20, &McOptions { samples: 100_000, tilt: Some(t), seed: 9 }).unwrap();
        assert_eq!(tilted, again);
    }
}
