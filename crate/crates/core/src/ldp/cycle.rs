//! Minimum mean cycle (Karp) on a node-weighted state graph.

use crate::thermo::RecodedChain;

/// Minimum over cycles of the average node weight, by Karp's recurrence
/// `D_k(v) = min_u D_{k-1}(u) + w(u)` over walks of length `k`.
pub fn min_mean_cycle(chain: &RecodedChain, weights: &[f64]) -> f64 {
    let n = chain.len();
    assert_eq!(weights.len(), n);
    let inf = f64::INFINITY;
    // d[k][v]: least weight of a walk with k edges ending at v, starting anywhere
    let mut d = vec![vec![inf; n]; n + 1];
    d[0].iter_mut().for_each(|x| *x = 0.0);
    for k in 1..=n {
        for v in 0..n {
            let best = chain
                .predecessors(v)
                .iter()
                .map(|&u| d[k - 1][u] + weights[u])
                .fold(inf, f64::min);
            d[k][v] = best;
        }
    }
    let mut result = inf;
    for v in 0..n {
        if !d[n][v].is_finite() {
            continue;
        }
        let worst = (0..n)
            .filter(|&k| d[k][v].is_finite())
            .map(|k| (d[n][v] - d[k][v]) / (n - k) as f64)
            .fold(f64::NEG_INFINITY, f64::max);
        result = result.min(worst);
    }
    result
}

/// Maximum mean cycle weight.
pub fn max_mean_cycle(chain: &RecodedChain, weights: &[f64]) -> f64 {
    let neg: Vec<f64> = weights.iter().map(|w| -w).collect();
    -min_mean_cycle(chain, &neg)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sft::{Potential, SubshiftSpec};
    use crate::thermo::recode;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Brute force over simple cycles through DFS from each minimal start vertex.
    fn brute(chain: &RecodedChain, w: &[f64]) -> (f64, f64) {
        let n = chain.len();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        fn dfs(chain: &RecodedChain, w: &[f64], start: usize, v: usize, path: &mut Vec<usize>, lo: &mut f64, hi: &mut f64) {
            for &u in chain.successors(v) {
                if u == start {
                    let mean = path.iter().map(|&p| w[p]).sum::<f64>() / path.len() as f64;
                    *lo = lo.min(mean);
                    *hi = hi.max(mean);
                } else if u > start && !path.contains(&u) {
                    path.push(u);
                    dfs(chain, w, start, u, path, lo, hi);
                    path.pop();
                }
            }
        }
        for s in 0..n {
            dfs(chain, w, s, s, &mut vec![s], &mut lo, &mut hi);
        }
        (lo, hi)
    }

    #[test]
    fn matches_brute_force_on_random_weights() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for spec in [SubshiftSpec::full_shift(2), SubshiftSpec::golden_mean(), SubshiftSpec::full_shift(3)] {
            for block in 1..=3 {
                let chain = recode(&spec, block).unwrap();
                for _ in 0..20 {
                    let w: Vec<f64> = (0..chain.len()).map(|_| rng.random_range(-2.0..2.0)).collect();
                    let (lo, hi) = brute(&chain, &w);
                    assert!((min_mean_cycle(&chain, &w) - lo).abs() < 1e-12);
                    assert!((max_mean_cycle(&chain, &w) - hi).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn golden_mean_indicator() {
        let gm = SubshiftSpec::golden_mean();
        let chain = recode(&gm, 1).unwrap();
        let w = chain.state_values(&Potential::indicator(&gm, 1)).unwrap();
        assert_eq!(min_mean_cycle(&chain, &w), 0.0);
        assert_eq!(max_mean_cycle(&chain, &w), 0.5);
    }
}
