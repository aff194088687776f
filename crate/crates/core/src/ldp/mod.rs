//! Rate functions, the q-curve `q(t) = P(G + tφ) - P(G)`, growth estimates and
//! deviation-set masses.

mod cycle;
mod deviation;
mod fit;

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::leaf::LeafMeasure;
use crate::rng;
use crate::sft::{Potential, SubshiftSpec};
use crate::thermo::{
    self, gibbs_measure, recode, rpf_solve, MarkovMeasure, RecodedChain, WeightedMatrix, DEFAULT_TOL,
};

pub use cycle::{max_mean_cycle, min_mean_cycle};
pub use deviation::{
    deviation_mass_exact, deviation_mass_mc, deviation_series_exact, detect_lattice, DeviationMethod,
    DeviationPoint, DeviationSeries, ExactMode, ExactOptions, Interval, Lattice, McOptions, DEFAULT_WORK_BUDGET,
};
pub use fit::{fit_points, rate_fit, RateFit};

/// Tolerance on `q'(t) - α` when solving the Legendre problem.
pub const LEGENDRE_TOL: f64 = 1e-10;
/// Largest `|t|·(max φ - min φ)` used in tilts; keeps all transfer weights representable.
pub const MAX_TILT_SPREAD: f64 = 600.0;
/// Ergodic ranges narrower than this are treated as a single point.
const DEGENERATE_RANGE: f64 = 1e-12;

/// The family `G + tφ` on the common recoding of `G` and `φ`.
#[derive(Debug, Clone)]
pub struct TiltFamily {
    chain: Arc<RecodedChain>,
    g: Vec<f64>,
    phi: Vec<f64>,
    pressure_g: f64,
    range: (f64, f64),
}

/// One point of the family: `q(t)`, `q'(t)` and the tilted Gibbs measure.
#[derive(Debug, Clone)]
pub struct TiltPoint {
    pub t: f64,
    pub q: f64,
    pub derivative: f64,
    pub measure: MarkovMeasure,
}

impl TiltFamily {
    pub fn new(spec: &SubshiftSpec, g: &Potential, phi: &Potential) -> Result<Self> {
        Self::with_block(spec, g, phi, g.memory().max(phi.memory()))
    }

    pub fn with_block(spec: &SubshiftSpec, g: &Potential, phi: &Potential, block: usize) -> Result<Self> {
        let chain = recode(spec, block)?;
        Self::on_chain(&chain, g, phi)
    }

    pub fn on_chain(chain: &Arc<RecodedChain>, g: &Potential, phi: &Potential) -> Result<Self> {
        let gv = chain.state_values(g)?;
        let pv = chain.state_values(phi)?;
        let pressure_g = rpf_solve(&WeightedMatrix::from_state_values(chain, gv.clone()), DEFAULT_TOL)?.log_eigenvalue;
        let range = (min_mean_cycle(chain, &pv), max_mean_cycle(chain, &pv));
        Ok(TiltFamily { chain: chain.clone(), g: gv, phi: pv, pressure_g, range })
    }

    pub fn chain(&self) -> &Arc<RecodedChain> {
        &self.chain
    }

    /// `P(G)`.
    pub fn pressure(&self) -> f64 {
        self.pressure_g
    }

    /// `(α_min, α_max)`: the extreme values of `∫φ dν` over invariant `ν`.
    pub fn range(&self) -> (f64, f64) {
        self.range
    }

    pub fn is_degenerate(&self) -> bool {
        self.range.1 - self.range.0 <= DEGENERATE_RANGE * (1.0 + self.range.0.abs())
    }

    /// Largest usable `|t|`.
    pub fn tilt_cap(&self) -> f64 {
        let (lo, hi) = self.phi.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let span = hi - lo;
        if span > 0.0 { MAX_TILT_SPREAD / span } else { f64::INFINITY }
    }

    pub fn at(&self, t: f64) -> Result<TiltPoint> {
        let weights: Vec<f64> = self.g.iter().zip(&self.phi).map(|(g, p)| g + t * p).collect();
        let m = WeightedMatrix::from_state_values(&self.chain, weights);
        let rpf = rpf_solve(&m, DEFAULT_TOL)?;
        let measure = gibbs_measure(&rpf, &m);
        let derivative = measure.stationary().iter().zip(&self.phi).map(|(p, v)| p * v).sum();
        Ok(TiltPoint { t, q: rpf.log_eigenvalue - self.pressure_g, derivative, measure })
    }

    pub fn q(&self, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        Ok(self.at(t)?.q)
    }

    /// `∫φ dμ_{G+tφ}`.
    pub fn q_derivative(&self, t: f64) -> Result<f64> {
        Ok(self.at(t)?.derivative)
    }

    /// `∫φ dμ_G`.
    pub fn mean(&self) -> Result<f64> {
        self.q_derivative(0.0)
    }

    /// Solves `q'(t) = α` by bracket expansion and bisection.
    ///
    /// Returns `None` when `α` lies beyond `q'` at the tilt cap.
    pub fn solve_tilt(&self, alpha: f64) -> Result<Option<f64>> {
        let cap = self.tilt_cap();
        let d0 = self.q_derivative(0.0)?;
        if (d0 - alpha).abs() <= LEGENDRE_TOL {
            return Ok(Some(0.0));
        }
        let dir = if alpha > d0 { 1.0 } else { -1.0 };
        let (mut inner, mut outer) = (0.0, dir);
        loop {
            let d = self.q_derivative(outer)?;
            if (d - alpha).abs() <= LEGENDRE_TOL {
                return Ok(Some(outer));
            }
            if (d - alpha) * dir > 0.0 {
                break;
            }
            if outer.abs() >= cap {
                return Ok(None);
            }
            inner = outer;
            outer = (2.0 * outer).clamp(-cap, cap);
        }
        loop {
            let mid = 0.5 * (inner + outer);
            if mid == inner || mid == outer {
                return Ok(Some(mid));
            }
            let d = self.q_derivative(mid)?;
            if (d - alpha).abs() <= LEGENDRE_TOL {
                return Ok(Some(mid));
            }
            if (d - alpha) * dir > 0.0 {
                outer = mid;
            } else {
                inner = mid;
            }
        }
    }

    /// `Ĩ(α) = sup_t (tα - q(t))`.
    pub fn rate(&self, alpha: f64) -> Result<RateValue> {
        let (lo, hi) = self.range;
        if !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be finite, got {alpha}")));
        }
        if self.is_degenerate() {
            let on = (alpha - lo).abs() <= DEGENERATE_RANGE * (1.0 + lo.abs());
            return Ok(RateValue { alpha, rate: if on { 0.0 } else { f64::INFINITY }, tilt: on.then_some(0.0), boundary: on });
        }
        let slack = DEGENERATE_RANGE * (1.0 + lo.abs().max(hi.abs()));
        if alpha < lo - slack || alpha > hi + slack {
            return Ok(RateValue { alpha, rate: f64::INFINITY, tilt: None, boundary: false });
        }
        let interior = alpha > lo + slack && alpha < hi - slack;
        let solved = if interior { self.solve_tilt(alpha)? } else { None };
        let (t, boundary) = match solved {
            Some(t) => (t, false),
            None => (if alpha > 0.5 * (lo + hi) { self.tilt_cap() } else { -self.tilt_cap() }, true),
        };
        let rate = (t * alpha - self.q(t)?).max(0.0);
        Ok(RateValue { alpha, rate, tilt: Some(t), boundary })
    }

    /// `I(ν) = P(G) - ∫G dν - h_ν`.
    pub fn rate_of_measure(&self, nu: &MarkovMeasure) -> Result<f64> {
        if !Arc::ptr_eq(nu.chain(), &self.chain)
            && (nu.chain().base() != self.chain.base() || nu.chain().block() != self.chain.block())
        {
            return Err(Error::ChainMismatch("measure lives on a different recoding".into()));
        }
        let int_g: f64 = nu.stationary().iter().zip(&self.g).map(|(p, v)| p * v).sum();
        Ok(self.pressure_g - int_g - nu.entropy())
    }

    /// `∫φ dν` for a measure on this family's chain.
    pub fn integrate_phi(&self, nu: &MarkovMeasure) -> f64 {
        nu.stationary().iter().zip(&self.phi).map(|(p, v)| p * v).sum()
    }
}

/// `q(t) = P(G + tφ) - P(G)`.
pub fn q_value(spec: &SubshiftSpec, g: &Potential, phi: &Potential, t: f64) -> Result<f64> {
    TiltFamily::new(spec, g, phi)?.q(t)
}

/// `q'(t) = ∫φ dμ_{G+tφ}`.
pub fn q_derivative(spec: &SubshiftSpec, g: &Potential, phi: &Potential, t: f64) -> Result<f64> {
    TiltFamily::new(spec, g, phi)?.q_derivative(t)
}

/// Minimum and maximum of `∫φ dν` over invariant measures.
pub fn ergodic_range(spec: &SubshiftSpec, phi: &Potential) -> Result<(f64, f64)> {
    let chain = recode(spec, phi.memory())?;
    let w = chain.state_values(phi)?;
    Ok((min_mean_cycle(&chain, &w), max_mean_cycle(&chain, &w)))
}

/// `Ĩ(α)` together with the tilt attaining it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateValue {
    pub alpha: f64,
    /// `+∞` outside the ergodic range.
    pub rate: f64,
    /// `t(α)`; at a boundary, the tilt at which the limit was evaluated.
    pub tilt: Option<f64>,
    /// Set when `α` is an endpoint of the ergodic range.
    pub boundary: bool,
}

pub fn rate_scalar(spec: &SubshiftSpec, g: &Potential, phi: &Potential, alpha: f64) -> Result<RateValue> {
    TiltFamily::new(spec, g, phi)?.rate(alpha)
}

/// `I(ν) = P(G) - ∫G dν - h_ν`.
pub fn rate_measure(spec: &SubshiftSpec, g: &Potential, nu: &MarkovMeasure) -> Result<f64> {
    if nu.chain().block() < g.memory() {
        return Err(Error::MemoryTooLarge { memory: g.memory(), block: nu.chain().block() });
    }
    thermo::variational_gap(spec, g, nu)
}

/// `Ĩ` tabulated on a grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RateCurve {
    pub alphas: Vec<f64>,
    pub values: Vec<f64>,
    pub tilts: Vec<Option<f64>>,
    pub boundary: Vec<bool>,
    pub range: (f64, f64),
}

impl RateCurve {
    pub fn on_grid(family: &TiltFamily, alphas: &[f64]) -> Result<Self> {
        let mut curve = RateCurve {
            alphas: alphas.to_vec(),
            values: Vec::with_capacity(alphas.len()),
            tilts: Vec::with_capacity(alphas.len()),
            boundary: Vec::with_capacity(alphas.len()),
            range: family.range(),
        };
        for &a in alphas {
            let r = family.rate(a)?;
            curve.values.push(r.rate);
            curve.tilts.push(r.tilt);
            curve.boundary.push(r.boundary);
        }
        Ok(curve)
    }

    /// `points` equally spaced values across the closed ergodic range.
    pub fn uniform(family: &TiltFamily, points: usize) -> Result<Self> {
        if points < 2 {
            return Err(Error::InvalidArgument("a rate curve needs at least 2 points".into()));
        }
        let (lo, hi) = family.range();
        let alphas: Vec<f64> = (0..points).map(|i| lo + (hi - lo) * i as f64 / (points - 1) as f64).collect();
        Self::on_grid(family, &alphas)
    }

    /// Largest violation of convexity along the grid, `max(0, -second difference)`.
    pub fn convexity_defect(&self) -> f64 {
        let finite: Vec<(f64, f64)> =
            self.alphas.iter().zip(&self.values).filter(|(_, v)| v.is_finite()).map(|(&a, &v)| (a, v)).collect();
        finite
            .windows(3)
            .map(|w| {
                let s1 = (w[1].1 - w[0].1) / (w[1].0 - w[0].0);
                let s2 = (w[2].1 - w[1].1) / (w[2].0 - w[1].0);
                (s1 - s2).max(0.0)
            })
            .fold(0.0, f64::max)
    }

    /// `max_α (tα - Ĩ(α))` over the grid.
    pub fn conjugate_on_grid(&self, t: f64) -> f64 {
        self.alphas
            .iter()
            .zip(&self.values)
            .filter(|(_, v)| v.is_finite())
            .map(|(a, v)| t * a - v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// `sup_α (tα - Ĩ(α))` by golden-section search over the ergodic range.
pub fn rate_conjugate(family: &TiltFamily, t: f64) -> Result<f64> {
    let (lo, hi) = family.range();
    let f = |a: f64| -> Result<f64> { Ok(t * a - family.rate(a)?.rate) };
    if family.is_degenerate() {
        return f(lo);
    }
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > 1e-9 * (hi - lo) {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d)?;
        }
    }
    Ok(fc.max(fd).max(f(lo)?).max(f(hi)?))
}

/// Outcome of checking `Ĩ(α) <= I(ν)` over measures with `∫φ dν = α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContractionReport {
    pub alpha: f64,
    pub samples: usize,
    pub seed: u64,
    pub rate_scalar: f64,
    pub tilt: f64,
    /// `I` at the tilted Gibbs measure; equals `rate_scalar` up to solver error.
    pub rate_at_tilted: f64,
    pub equality_error: f64,
    pub min_rate_measure: f64,
    /// Largest `|∫φ dν - α|` over the samples.
    pub max_constraint_error: f64,
    pub violations: usize,
    pub max_violation: f64,
    pub passed: bool,
}

/// Random Markov measure pushed toward large (`bias > 0`) or small values of `φ`.
/// Gibbs measure of a random potential plus `bias·φ`. As `|bias|` grows its
/// `φ`-integral approaches the corresponding end of the ergodic range.
fn biased_random_measure(chain: &Arc<RecodedChain>, phi: &[f64], bias: f64, rng: &mut impl Rng) -> Result<MarkovMeasure> {
    let spread = rng.random_range(0.0..4.0);
    let values: Vec<f64> = phi.iter().map(|&p| spread * rng.random::<f64>() + bias * p).collect();
    let m = WeightedMatrix::from_state_values(chain, values);
    Ok(gibbs_measure(&rpf_solve(&m, DEFAULT_TOL)?, &m))
}

fn mix_pairs(a: &[f64], b: &[f64], s: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - s) * x + s * y).collect()
}

/// Samples measures with `∫φ dν = α` and checks `Ĩ(α) <= I(ν) + 1e-8`, with
/// equality (to `1e-6`) at the tilted Gibbs measure.
pub fn contraction_check(
    spec: &SubshiftSpec,
    g: &Potential,
    phi: &Potential,
    alpha: f64,
    samples: usize,
    seed: u64,
) -> Result<ContractionReport> {
    let family = TiltFamily::new(spec, g, phi)?;
    let (lo, hi) = family.range();
    if family.is_degenerate() || !(alpha > lo && alpha < hi) {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} is not in the open ergodic range ({lo}, {hi})")));
    }
    let rv = family.rate(alpha)?;
    let t = rv.tilt.expect("interior alpha has a tilt");
    let tilted = family.at(t)?.measure;
    let rate_at_tilted = family.rate_of_measure(&tilted)?;
    let tilted_pair = tilted.pair_measure();
    let chain = family.chain().clone();
    let mut report = ContractionReport {
        alpha,
        samples,
        seed,
        rate_scalar: rv.rate,
        tilt: t,
        rate_at_tilted,
        equality_error: (rate_at_tilted - rv.rate).abs(),
        min_rate_measure: f64::INFINITY,
        max_constraint_error: 0.0,
        violations: 0,
        max_violation: 0.0,
        passed: false,
    };
    let span = family.phi.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..samples {
        let mut rng = rng::stream(seed, i as u64);
        let pick = |above: bool, rng: &mut rand_chacha::ChaCha8Rng| -> Result<(MarkovMeasure, f64)> {
            let mut bias = 0.0;
            loop {
                let nu = biased_random_measure(&chain, &family.phi, if above { bias } else { -bias }, rng)?;
                let b = family.integrate_phi(&nu);
                if (above && b > alpha) || (!above && b < alpha) {
                    return Ok((nu, b));
                }
                bias = if bias == 0.0 { 1.0 / span } else { 2.0 * bias };
                if bias * span > MAX_TILT_SPREAD {
                    return Err(Error::NoConvergence { max_iter: 0, residual: (b - alpha).abs() });
                }
            }
        };
        let (low, b1) = pick(false, &mut rng)?;
        let (high, b2) = pick(true, &mut rng)?;
        let lam = (alpha - b1) / (b2 - b1);
        let pair = mix_pairs(&low.pair_measure(), &high.pair_measure(), lam);
        let s = rng.random::<f64>();
        let pair = mix_pairs(&pair, &tilted_pair, s);
        let nu = MarkovMeasure::from_pair_measure(&chain, &pair)?;
        let constraint = (family.integrate_phi(&nu) - alpha).abs();
        let i_nu = family.rate_of_measure(&nu)?;
        report.max_constraint_error = report.max_constraint_error.max(constraint);
        report.min_rate_measure = report.min_rate_measure.min(i_nu);
        let excess = rv.rate - i_nu;
        if excess > 1e-8 {
            report.violations += 1;
        }
        report.max_violation = report.max_violation.max(excess.max(0.0));
    }
    report.passed = report.violations == 0 && report.equality_error <= 1e-6;
    Ok(report)
}

/// `(1/n) log Σ_w μ^u[w] e^{S_nφ(w)}`, with the sum over the `n` symbols after
/// the base symbol.
pub fn growth_estimate(leaf: &LeafMeasure, phi: &Potential, n: usize) -> Result<f64> {
    Ok(*growth_series(leaf, phi, n)?.last().unwrap())
}

/// `growth_estimate` for every length `1..=n_max`, computed in one pass.
pub fn growth_series(leaf: &LeafMeasure, phi: &Potential, n_max: usize) -> Result<Vec<f64>> {
    if n_max == 0 {
        return Err(Error::InvalidArgument("n must be positive".into()));
    }
    let chain = leaf.chain();
    let pv = chain.state_values(phi)?;
    let size = chain.len();
    let mut v = vec![0.0; size];
    v[leaf.start_state()] = 1.0;
    let mut log_acc = 0.0;
    let mut out = Vec::with_capacity(n_max);
    let mut next = vec![0.0; size];
    let pmax = pv.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for n in 1..=n_max {
        next.iter_mut().for_each(|x| *x = 0.0);
        for (i, &vi) in v.iter().enumerate() {
            if vi == 0.0 {
                continue;
            }
            for &j in chain.successors(i) {
                next[j] += vi * leaf.transition(i, j) * (pv[j] - pmax).exp();
            }
        }
        let s: f64 = next.iter().sum();
        log_acc += pmax + s.ln();
        v.iter_mut().zip(&next).for_each(|(a, &b)| *a = b / s);
        out.push(log_acc / n as f64);
    }
    Ok(out)
}

/// Growth estimates against `q(1)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GrowthReport {
    pub q: f64,
    pub lengths: Vec<usize>,
    pub estimates: Vec<f64>,
    /// Least-squares `C` in `|growth(n) - q| ≈ C/n`.
    pub fitted_constant: f64,
    /// Largest observed `n·|growth(n) - q|`.
    pub max_scaled_error: f64,
}

pub fn growth_report(leaf: &LeafMeasure, phi: &Potential, lengths: &[usize]) -> Result<GrowthReport> {
    let n_max = lengths.iter().copied().max().ok_or_else(|| Error::InvalidArgument("no lengths".into()))?;
    let series = growth_series(leaf, phi, n_max)?;
    let chain = leaf.chain();
    let family = TiltFamily::on_chain(chain, leaf.potential(), phi)?;
    let q = family.q(1.0)?;
    let estimates: Vec<f64> = lengths.iter().map(|&n| series[n - 1]).collect();
    let max_scaled_error =
        lengths.iter().zip(&estimates).map(|(&n, e)| n as f64 * (e - q).abs()).fold(0.0, f64::max);
    let num: f64 = lengths.iter().zip(&estimates).map(|(&n, e)| (e - q).abs() / n as f64).sum();
    let den: f64 = lengths.iter().map(|&n| 1.0 / (n * n) as f64).sum();
    Ok(GrowthReport { q, lengths: lengths.to_vec(), estimates, fitted_constant: num / den, max_scaled_error })
}

/// Tilt whose mean is the endpoint of `interval` nearest the untilted mean.
pub fn recommended_tilt(family: &TiltFamily, interval: &Interval) -> Result<f64> {
    let mean = family.mean()?;
    if interval.contains(mean) {
        return Ok(0.0);
    }
    let target = if mean < interval.lo { interval.lo } else { interval.hi };
    let (lo, hi) = family.range();
    let target = target.clamp(lo, hi);
    match family.solve_tilt(target)? {
        Some(t) => Ok(t),
        None => Ok(if target > mean { family.tilt_cap() } else { -family.tilt_cap() }),
    }
}
