use std::collections::BTreeMap;

use ldplab::ldp::{
    contraction_check, deviation_mass_exact, deviation_mass_mc, growth_series, rate_conjugate, ExactMode, ExactOptions,
    Interval, McOptions, RateCurve, TiltFamily,
};
use ldplab::thermo::{
    equilibrium_state, gibbs_measure, log_partition_sum, pressure_at_block, recode, rpf_solve, transfer_matrix,
    MarkovMeasure, DEFAULT_TOL,
};
use ldplab::{
    axioms_check, leaf_measure, orbital_empirical, pressure, unstable_leaf_words, variational_gap, Potential,
    SubshiftSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn spec_strategy() -> impl Strategy<Value = SubshiftSpec> {
    (2usize..=4)
        .prop_flat_map(|m| proptest::collection::vec(proptest::collection::vec(0u8..=1, m), m))
        .prop_filter_map("not primitive", |rows| SubshiftSpec::new(&rows).ok())
}

fn system_strategy() -> impl Strategy<Value = (SubshiftSpec, Potential, Potential)> {
    (spec_strategy(), 1usize..=2, 1usize..=2, any::<u64>()).prop_map(|(spec, kg, kp, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = Potential::from_fn(&spec, kg, |_| rand::Rng::random_range(&mut rng, -2.0..2.0)).unwrap();
        let phi = Potential::from_fn(&spec, kp, |_| rand::Rng::random_range(&mut rng, -1.0..1.0)).unwrap();
        (spec, g, phi)
    })
}

/// Small-integer observable, so exact DP applies.
fn lattice_system_strategy() -> impl Strategy<Value = (SubshiftSpec, Potential, Potential)> {
    (system_strategy(), any::<u64>()).prop_map(|((spec, g, _), seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let phi = Potential::from_fn(&spec, 1, |_| rand::Rng::random_range(&mut rng, 0..3) as f64).unwrap();
        (spec, g, phi)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn perron_data_invariants((spec, g, _) in system_strategy()) {
        let chain = recode(&spec, g.memory()).unwrap();
        let m = transfer_matrix(&chain, &g).unwrap();
        let rpf = rpf_solve(&m, DEFAULT_TOL).unwrap();
        let dense = m.to_dense();
        let lambda = rpf.eigenvalue();
        prop_assert!(rpf.right.iter().all(|&x| x > 0.0) && rpf.left.iter().all(|&x| x > 0.0));
        let norm: f64 = rpf.left.iter().zip(&rpf.right).map(|(a, b)| a * b).sum();
        prop_assert!((norm - 1.0).abs() < 1e-12);
        prop_assert!((rpf.left.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let n = chain.len();
        for i in 0..n {
            let mh: f64 = (0..n).map(|j| dense[i][j] * rpf.right[j]).sum();
            let num: f64 = (0..n).map(|j| rpf.left[j] * dense[j][i]).sum();
            let slack = 2.0 * rpf.residual.max(1e-15) * lambda;
            prop_assert!((mh - lambda * rpf.right[i]).abs() <= slack * rpf.right[i] + 1e-300);
            prop_assert!((num - lambda * rpf.left[i]).abs() <= slack * rpf.left[i] + 1e-300);
        }
    }

    #[test]
    fn pressure_is_recoding_invariant((spec, g, _) in system_strategy()) {
        let k = g.memory();
        let a = pressure_at_block(&spec, &g, k).unwrap();
        let b = pressure_at_block(&spec, &g, k + 1).unwrap();
        prop_assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
    }

    #[test]
    fn finite_n_partition_sums_approach_pressure((spec, g, _) in system_strategy()) {
        let chain = recode(&spec, g.memory()).unwrap();
        let p = pressure(&spec, &g).unwrap();
        let dev: Vec<f64> = (5..=30).map(|n| (log_partition_sum(&chain, &g, n).unwrap() / n as f64 - p).abs()).collect();
        let c = dev.iter().enumerate().map(|(i, d)| (i + 5) as f64 * d).fold(0.0, f64::max);
        prop_assert!(c.is_finite());
        for (i, d) in dev.iter().enumerate() {
            prop_assert!(*d <= c / (i + 5) as f64 + 1e-12);
        }
        // C/n behaviour: the error at n = 30 is well below the one at n = 5
        prop_assert!(dev[25] <= dev[0] / 3.0 + 1e-12);
    }

    #[test]
    fn gibbs_measure_is_a_stationary_chain((spec, g, _) in system_strategy()) {
        let chain = recode(&spec, g.memory()).unwrap();
        let m = transfer_matrix(&chain, &g).unwrap();
        let mu = gibbs_measure(&rpf_solve(&m, DEFAULT_TOL).unwrap(), &m);
        prop_assert!(mu.stochasticity_error() <= 1e-10);
        prop_assert!(mu.stationarity_error() <= 1e-10);
        for i in 0..chain.len() {
            for j in 0..chain.len() {
                prop_assert_eq!(mu.transition(i, j) > 0.0, chain.allowed(i, j));
            }
        }
    }

    #[test]
    fn variational_principle((spec, g, _) in system_strategy(), seed in any::<u64>()) {
        let chain = recode(&spec, g.memory()).unwrap();
        let (gibbs, _) = equilibrium_state(&spec, &g, g.memory()).unwrap();
        prop_assert!(variational_gap(&spec, &g, &gibbs).unwrap().abs() <= 1e-8);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..50 {
            let nu = MarkovMeasure::random(&chain, &mut rng);
            prop_assert!(variational_gap(&spec, &g, &nu).unwrap() >= -1e-8);
        }
    }

    #[test]
    fn pressure_is_convex_along_tilts((spec, g, phi) in system_strategy()) {
        let fam = TiltFamily::new(&spec, &g, &phi).unwrap();
        let q: Vec<f64> = (-12..=12).map(|i| fam.q(0.25 * i as f64).unwrap()).collect();
        for w in q.windows(3) {
            prop_assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-8);
        }
    }

    #[test]
    fn leaf_mass_and_consistency((spec, g, _) in system_strategy(), pick in any::<prop::sample::Index>()) {
        let pasts = spec.admissible_words(g.memory());
        let past = pick.get(&pasts).clone();
        let leaf = leaf_measure(&spec, &g, &past).unwrap();
        let s0 = leaf.start_symbol();
        let n_max = if spec.alphabet_size() <= 2 { 20 } else { 10 };
        for n in 1..=n_max {
            let words = unstable_leaf_words(&spec, s0, n);
            let total: f64 = words.iter().map(|w| leaf.cylinder_mass(w).unwrap()).sum();
            prop_assert!((total - 1.0).abs() <= 1e-10, "n={} total={}", n, total);
            if n <= 6 {
                for w in &words {
                    let ext: f64 = spec.successors(*w.last().unwrap()).map(|a| {
                        let mut e = w.clone();
                        e.push(a);
                        leaf.cylinder_mass(&e).unwrap()
                    }).sum();
                    prop_assert!((ext - leaf.cylinder_mass(w).unwrap()).abs() <= 1e-12);
                }
            }
        }
    }

    #[test]
    fn rate_curve_shape((spec, g, phi) in system_strategy()) {
        let fam = TiltFamily::new(&spec, &g, &phi).unwrap();
        prop_assume!(!fam.is_degenerate());
        let curve = RateCurve::uniform(&fam, 25).unwrap();
        prop_assert!(curve.values.iter().all(|&v| v >= 0.0));
        prop_assert!(curve.convexity_defect() <= 1e-8);
        let mean = fam.mean().unwrap();
        prop_assert!(fam.rate(mean).unwrap().rate.abs() <= 1e-10);
        for (a, v) in curve.alphas.windows(2).zip(curve.values.windows(2)) {
            if a[1] <= mean {
                prop_assert!(v[1] <= v[0] + 1e-9);
            } else if a[0] >= mean {
                prop_assert!(v[1] >= v[0] - 1e-9);
            }
        }
    }

    #[test]
    fn double_legendre_transform((spec, g, phi) in system_strategy()) {
        let fam = TiltFamily::new(&spec, &g, &phi).unwrap();
        prop_assume!(!fam.is_degenerate());
        for t in [-2.0, -0.5, 0.0, 0.7, 2.0] {
            let conj = rate_conjugate(&fam, t).unwrap();
            prop_assert!((conj - fam.q(t).unwrap()).abs() <= 1e-6, "t={}: {} vs {}", t, conj, fam.q(t).unwrap());
        }
    }

    #[test]
    fn contraction_direction((spec, g, phi) in system_strategy(), u in 0.05f64..0.95, seed in any::<u64>()) {
        let fam = TiltFamily::new(&spec, &g, &phi).unwrap();
        prop_assume!(!fam.is_degenerate());
        let (lo, hi) = fam.range();
        let alpha = lo + u * (hi - lo);
        let rep = contraction_check(&spec, &g, &phi, alpha, 40, seed).unwrap();
        prop_assert!(rep.violations == 0, "{:?}", rep);
        prop_assert!(rep.equality_error <= 1e-6, "{:?}", rep);
        prop_assert!(rep.max_constraint_error <= 1e-9);
    }

    #[test]
    fn nested_intervals_have_ordered_masses((spec, g, phi) in lattice_system_strategy(), a in 0.0f64..1.0, b in 0.0f64..1.0) {
        let past = spec.admissible_words(g.memory()).remove(0);
        let leaf = leaf_measure(&spec, &g, &past).unwrap();
        let (lo, hi) = (2.0 * a.min(b), 2.0 * a.max(b));
        let inner = Interval::closed(lo + 0.25 * (hi - lo), hi - 0.25 * (hi - lo)).unwrap();
        let outer = Interval::closed(lo, hi).unwrap();
        for n in [3, 8, 15] {
            let mi = deviation_mass_exact(&leaf, &phi, &inner, n, &ExactOptions::default()).unwrap().0.mass;
            let mo = deviation_mass_exact(&leaf, &phi, &outer, n, &ExactOptions::default()).unwrap().0.mass;
            prop_assert!(mi <= mo + 1e-15 && (0.0..=1.0).contains(&mi) && mo <= 1.0);
        }
    }

    #[test]
    fn lattice_dp_matches_enumeration((spec, g, phi) in lattice_system_strategy(), a in 0.0f64..2.0) {
        let past = spec.admissible_words(g.memory()).pop().unwrap();
        let leaf = leaf_measure(&spec, &g, &past).unwrap();
        let iv = Interval::new(a, 2.0, false, true).unwrap();
        for n in [1, 4, 9] {
            let e = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions { mode: ExactMode::Enumerate, ..Default::default() }).unwrap().0;
            let l = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions { mode: ExactMode::Lattice, ..Default::default() }).unwrap().0;
            let b = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions { mode: ExactMode::Binned { bin_width: 0.37 }, ..Default::default() }).unwrap().0;
            prop_assert!((e.mass - l.mass).abs() <= 1e-12);
            prop_assert!(b.lower <= e.mass + 1e-12 && e.mass <= b.upper + 1e-12);
        }
    }

    #[test]
    fn growth_converges_at_rate_one_over_n((spec, g, phi) in system_strategy(), pick in any::<prop::sample::Index>()) {
        let block = g.memory().max(phi.memory());
        let pasts = spec.admissible_words(block);
        let past = pick.get(&pasts).clone();
        let leaf = ldplab::leaf_measure_with_block(&spec, &g, &past, block).unwrap();
        let q = TiltFamily::on_chain(leaf.chain(), &g, &phi).unwrap().q(1.0).unwrap();
        let series = growth_series(&leaf, &phi, 800).unwrap();
        let scaled = |n: usize| n as f64 * (series[n - 1] - q).abs();
        let c = (10..=200).map(scaled).fold(0.0, f64::max);
        for n in 201..=800 {
            prop_assert!(scaled(n) <= 1.05 * c + 1e-6, "n={}: {} vs C={}", n, scaled(n), c);
        }
    }

    #[test]
    fn axioms_hold_on_random_systems(spec in spec_strategy(), seed in any::<u64>()) {
        let rep = axioms_check(&spec, 200, seed);
        prop_assert_eq!(rep.total_violations(), 0, "{:?}", rep.failures);
        prop_assert!(rep.max_contraction_ratio <= 0.5);
    }

    #[test]
    fn orbital_frequencies_sum_to_one(spec in spec_strategy(), len in 3usize..40, seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut word = vec![0usize];
        while word.len() < len {
            let succ: Vec<usize> = spec.successors(*word.last().unwrap()).collect();
            word.push(succ[rand::Rng::random_range(&mut rng, 0..succ.len())]);
        }
        for k in 1..=3 {
            let emp = orbital_empirical(&word, k).unwrap();
            let total: f64 = emp.frequencies().values().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}

/// Binary relative entropy `KL(β ‖ r)`.
fn kl(beta: f64, r: f64) -> f64 {
    let xlx = |x: f64, y: f64| if x > 0.0 { x * (x / y).ln() } else { 0.0 };
    xlx(beta, r) + xlx(1.0 - beta, 1.0 - r)
}

#[test]
fn sandwich_bounds_on_bernoulli_family() {
    let spec = SubshiftSpec::full_shift(2);
    let phi = Potential::indicator(&spec, 1);
    for p0 in [0.5, 0.3, 0.7] {
        let g = Potential::bernoulli(&spec, &[p0, 1.0 - p0]).unwrap();
        let leaf = leaf_measure(&spec, &g, &[1]).unwrap();
        let fam = TiltFamily::new(&spec, &g, &phi).unwrap();
        let mean = 1.0 - p0;
        for beta in [mean + 0.1, mean + 0.2] {
            let rate = fam.rate(beta).unwrap().rate;
            assert!((rate - kl(beta, mean)).abs() < 1e-9);
            let iv = Interval::closed(beta, 1.0).unwrap();
            for n in (100..=500).step_by(100) {
                let m = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions::default()).unwrap().0;
                let r = -m.log_mass / n as f64;
                let upper = rate + (n as f64).ln() / n as f64 + 0.01;
                assert!(r >= rate - 0.01 && r <= upper, "p0={p0} beta={beta} n={n}: {r} vs {rate}");
            }
        }
    }
}

#[test]
fn tilted_estimator_is_unbiased_on_enumerable_cases() {
    let gm = SubshiftSpec::golden_mean();
    let fs3 = SubshiftSpec::full_shift(3);
    let cases = [
        (gm.clone(), Potential::zero(&gm), Potential::indicator(&gm, 1), vec![0], Interval::closed(0.4, 0.5).unwrap(), 16),
        (
            fs3.clone(),
            Potential::bernoulli(&fs3, &[0.5, 0.3, 0.2]).unwrap(),
            Potential::from_fn(&fs3, 1, |w| w[0] as f64).unwrap(),
            vec![2],
            Interval::closed(1.2, 2.0).unwrap(),
            10,
        ),
    ];
    for (spec, g, phi, past, iv, n) in cases {
        let leaf = leaf_measure(&spec, &g, &past).unwrap();
        let exact = deviation_mass_exact(&leaf, &phi, &iv, n, &ExactOptions { mode: ExactMode::Enumerate, ..Default::default() }).unwrap().0.mass;
        let fam = TiltFamily::on_chain(leaf.chain(), &g, &phi).unwrap();
        let t = ldplab::ldp::recommended_tilt(&fam, &iv).unwrap();
        let runs: Vec<_> = (0..50)
            .map(|s| deviation_mass_mc(&leaf, &phi, &iv, n, &McOptions { samples: 20_000, tilt: Some(t), seed: s }).unwrap())
            .collect();
        let mean = runs.iter().map(|p| p.mass).sum::<f64>() / 50.0;
        let se = runs.iter().map(|p| p.stderr * p.stderr).sum::<f64>().sqrt() / 50.0;
        assert!((mean - exact).abs() <= 4.0 * se, "exact {exact}, mean {mean}, se {se}");
        let naive = deviation_mass_mc(&leaf, &phi, &iv, n, &McOptions { samples: 200_000, tilt: None, seed: 77 }).unwrap();
        let joint = (naive.stderr.powi(2) + runs[0].stderr.powi(2)).sqrt();
        assert!((naive.mass - runs[0].mass).abs() <= 3.0 * joint);
    }
}

#[test]
fn sampler_matches_cylinder_masses() {
    let gm = SubshiftSpec::golden_mean();
    let fs3 = SubshiftSpec::full_shift(3);
    let pair = Potential::from_fn(&gm, 2, |w| 0.6 * w[0] as f64 - 0.4 * w[1] as f64).unwrap();
    let cases = [
        (gm.clone(), pair, vec![0, 1]),
        (fs3.clone(), Potential::bernoulli(&fs3, &[0.6, 0.3, 0.1]).unwrap(), vec![1]),
    ];
    let samples = 1_000_000u64;
    for (spec, g, past) in cases {
        let leaf = leaf_measure(&spec, &g, &past).unwrap();
        let n = 6;
        let mut counts: BTreeMap<Vec<usize>, u64> = BTreeMap::new();
        for i in 0..samples {
            *counts.entry(leaf.sample_path_indexed(n, 5, i)).or_default() += 1;
        }
        for w in unstable_leaf_words(&spec, leaf.start_symbol(), n) {
            let p = leaf.cylinder_mass(&w).unwrap();
            let freq = *counts.get(&w).unwrap_or(&0) as f64 / samples as f64;
            let se = (p * (1.0 - p) / samples as f64).sqrt();
            assert!((freq - p).abs() <= 4.0 * se + 1e-12, "{w:?}: {freq} vs {p}");
        }
        assert_eq!(counts.values().sum::<u64>(), samples);
        assert!(counts.keys().all(|w| spec.is_admissible(w)));
    }
}

#[test]
fn uniform_sampler_symbol_frequency() {
    let spec = SubshiftSpec::full_shift(2);
    let leaf = leaf_measure(&spec, &Potential::zero(&spec), &[0]).unwrap();
    let mut ones = 0u64;
    let mut total = 0u64;
    for i in 0..100_000 {
        let w = leaf.sample_path_indexed(100, 11, i);
        ones += w[1..].iter().filter(|&&a| a == 1).count() as u64;
        total += 99;
    }
    assert!((ones as f64 / total as f64 - 0.5).abs() < 0.005);
    let gm = SubshiftSpec::golden_mean();
    let parry = leaf_measure(&gm, &Potential::zero(&gm), &[0]).unwrap();
    for i in 0..100_000 {
        let w = parry.sample_path_indexed(30, 12, i);
        assert!(w.windows(2).all(|p| p != [1, 1]));
    }
}
