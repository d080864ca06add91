use indist_core::bayes::{
    confidence_curve, convex_log_ratio, infer_x, log_likelihood_ratio, posterior_probabilities, Favored, InputFamily, OutcomeModel,
};
use indist_core::distance::{tvd, tvd_report};
use indist_core::interference::{collision_free_inputs, convex_mixture, distribution_pair};
use indist_core::matrices::{
    fast_circuit, fidelity_of, fourier, haar_random, layer_pair, notable, sylvester, CircuitParams, NotableId,
};
use indist_core::scattershot::{analyze_config, sample_events, ScattershotConfig};
use indist_core::search::{local_optimize, phase_noise_ensemble, Objective, TvdStatistic};
use indist_core::tomography::{all_pairs, hom_visibility, single_photon_probs, DeviceModel, FastTemplate};
use indist_core::{math, CollisionPolicy, Complex64, ComplexMatrix, ModeConfig};
use proptest::prelude::*;

const POLICIES: [CollisionPolicy; 2] = [CollisionPolicy::WithCollisions, CollisionPolicy::Binned];

fn circuit(p: u32, tau: &[f64], phi: &[f64]) -> CircuitParams {
    let per = 1usize << (p - 1);
    let rows = |v: &[f64]| v.chunks(per).take(p as usize).map(<[f64]>::to_vec).collect::<Vec<_>>();
    CircuitParams::new(p, rows(tau), rows(phi)).unwrap()
}

/// The circuit as an explicit product of one matrix per coupler.
fn coupler_product(c: &CircuitParams) -> ComplexMatrix {
    let d = c.dim();
    let mut u = ComplexMatrix::identity(d);
    for t in 0..c.p() {
        for k in 0..c.pairs_per_layer() {
            let (a, b) = layer_pair(t, k);
            let tau = c.tau()[t as usize][k];
            let s = (1.0 - tau * tau).sqrt();
            let e = Complex64::from_polar(1.0, c.phi()[t as usize][k]);
            let mut g = ComplexMatrix::identity(d);
            g[(a, a)] = Complex64::new(tau, 0.0);
            g[(a, b)] = Complex64::new(s, 0.0);
            g[(b, a)] = e * s;
            g[(b, b)] = -e * tau;
            u = g.matmul(&u).unwrap();
        }
    }
    u
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn constructors_are_unitary(m in 1usize..9, seed in any::<u64>()) {
        prop_assert!(haar_random(m, seed).matrix().unitarity_deviation() < 1e-10);
        prop_assert!(fourier(m).matrix().unitarity_deviation() < 1e-10);
    }

    #[test]
    fn fast_circuit_is_a_coupler_product(
        p in 1u32..4,
        tau in prop::collection::vec(0.0f64..=1.0, 12),
        phi in prop::collection::vec(-10.0f64..10.0, 12),
    ) {
        let c = circuit(p, &tau, &phi);
        let u = fast_circuit(&c);
        prop_assert!(u.matrix().unitarity_deviation() < 1e-10);
        prop_assert!(u.matrix().max_abs_diff(&coupler_product(&c)) < 1e-12);
    }

    #[test]
    fn distributions_are_normalized(m in 2usize..9, n in 1usize..4, seed in any::<u64>(), pick in any::<prop::sample::Index>()) {
        prop_assume!(n <= m);
        let u = haar_random(m, seed);
        let inputs = collision_free_inputs(n, m);
        let input = &inputs[pick.index(inputs.len())];
        for policy in POLICIES {
            let (q, p) = distribution_pair(&u, input, policy).unwrap();
            prop_assert!((q.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn mixture_distance_is_linear(x in 0.0f64..=1.0, seed in any::<u64>()) {
        let u = haar_random(4, seed);
        let input = ModeConfig::from_distinct_modes(4, &[0, 2]).unwrap();
        let (q, p) = distribution_pair(&u, &input, CollisionPolicy::WithCollisions).unwrap();
        let h = convex_mixture(&q, &p, x).unwrap();
        prop_assert!((tvd(&h, &p).unwrap() - x * tvd(&q, &p).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn distance_is_relabelling_invariant(seed in any::<u64>(), perm in Just((0..5).collect::<Vec<usize>>()).prop_shuffle()) {
        let u = haar_random(5, seed);
        let v = u.relabel(&perm).unwrap();
        for policy in POLICIES {
            let a = tvd_report(&u, 2, policy).unwrap();
            let b = tvd_report(&v, 2, policy).unwrap();
            prop_assert!((a.max_tvd - b.max_tvd).abs() < 1e-12);
            prop_assert!((a.avg_tvd - b.avg_tvd).abs() < 1e-12);
            for (input, t) in &a.per_input {
                let moved = input.permuted(&perm).unwrap();
                let other = b.per_input.iter().find(|(c, _)| *c == moved).unwrap().1;
                prop_assert!((t - other).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn binary_posteriors_sum_to_one(l in -1000.0f64..1000.0) {
        let (a, b) = posterior_probabilities(l);
        prop_assert_eq!(a + b, 1.0);
        prop_assert!(a >= 0.0 && b >= 0.0);
    }

    #[test]
    fn log_ratio_matches_direct_product(events in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 0..30)) {
        let l = log_likelihood_ratio(&events, |e| e.0, |e| e.1).unwrap().value;
        let direct: f64 = events.iter().map(|e| e.0 / e.1).product();
        prop_assert!((l - direct.ln()).abs() < 1e-10);
    }

    #[test]
    fn posterior_is_a_density(events in prop::collection::vec((0.0f64..1.0, 0.01f64..1.0), 0..40)) {
        let post = infer_x(&events, 401).unwrap();
        prop_assert!(post.weights.iter().all(|&w| w >= 0.0));
        let integral: f64 = post.grid.windows(2).zip(post.weights.windows(2)).map(|(g, w)| 0.5 * (g[1] - g[0]) * (w[0] + w[1])).sum();
        prop_assert!((integral - 1.0).abs() < 1e-12);
        prop_assert!((0.0..=1.0).contains(&post.x_est));
        let mut rev = events.clone();
        rev.reverse();
        prop_assert_eq!(infer_x(&rev, 401).unwrap(), post);
    }

    #[test]
    fn convex_log_ratio_is_convex(events in prop::collection::vec((0.01f64..1.0, 0.01f64..1.0), 1..30)) {
        for favored in [Favored::Q, Favored::P] {
            let sign = if favored == Favored::Q { 1.0 } else { -1.0 };
            let f = |x: f64| sign * convex_log_ratio(&events, x, favored).unwrap();
            for k in 1..99 {
                let (a, b, c) = (f((k - 1) as f64 / 98.0), f(k as f64 / 98.0), f((k + 1) as f64 / 98.0));
                prop_assert!(a + c - 2.0 * b >= -1e-9);
            }
        }
    }
}

#[test]
fn hadamard_moduli() {
    for p in 0..=4 {
        let s = sylvester(p);
        let expect = 1.0 / (s.dim() as f64).sqrt();
        assert!(s.matrix().as_slice().iter().all(|z| (z.norm() - expect).abs() < 1e-12));
    }
    for m in 1..=16 {
        let f = fourier(m);
        let expect = 1.0 / (m as f64).sqrt();
        assert!(f.matrix().as_slice().iter().all(|z| (z.norm() - expect).abs() < 1e-12));
    }
    for id in NotableId::ALL {
        assert!(notable(id).matrix().unitarity_deviation() < 1e-10);
    }
}

#[test]
fn haar_column_moments() {
    // For Haar columns E|u|² = 1/m and E|u|⁴ = 2/(m(m+1)).
    let m = 4;
    let samples = 10_000;
    let (mut s2, mut s4) = (0.0, 0.0);
    for seed in 0..samples {
        let u = haar_random(m, seed);
        let a = u[(1, 2)].norm_sqr();
        s2 += a;
        s4 += a * a;
    }
    let n = samples as f64;
    assert!((s2 / n - 0.25).abs() < 0.01, "{}", s2 / n);
    assert!((s4 / n - 0.1).abs() < 0.006, "{}", s4 / n);
}

#[test]
fn sylvester_inputs_are_equivalent() {
    for p in 1..=3u32 {
        let u = sylvester(p);
        let m = u.dim();
        let spectrum = |input: &ModeConfig| {
            let (q, pd) = distribution_pair(&u, input, CollisionPolicy::WithCollisions).unwrap();
            let mut v: Vec<(i64, i64)> =
                q.probs().iter().zip(pd.probs()).map(|(a, b)| ((a * 1e9).round() as i64, (b * 1e9).round() as i64)).collect();
            v.sort_unstable();
            v
        };
        let inputs = collision_free_inputs(2, m);
        let first = spectrum(&inputs[0]);
        for i in &inputs {
            assert_eq!(spectrum(i), first);
        }
        let r = tvd_report(&u, 2, CollisionPolicy::WithCollisions).unwrap();
        assert!(r.per_input.iter().all(|(_, t)| (t - r.per_input[0].1).abs() < 1e-9));
    }
}

#[test]
fn confidence_rises_with_events() {
    let u = sylvester(2);
    let fam = InputFamily::from_unitary(&u, collision_free_inputs(2, 4), OutcomeModel::default(), None).unwrap();
    let trials = 1000;
    let curve = confidence_curve(&fam, 30, trials, 11).unwrap();
    // Each point is a mean of values in [0, 1]; its standard error is at most 0.5/sqrt(trials).
    let sigma = 0.5 / (trials as f64).sqrt();
    for w in curve.windows(2) {
        assert!(w[1].1 >= w[0].1 - 3.0 * sigma, "{w:?}");
    }
}

#[test]
fn ensembles_are_reproducible() {
    let a = phase_noise_ensemble(2, 2, CollisionPolicy::WithCollisions, TvdStatistic::Average, 200, 5).unwrap();
    let b = phase_noise_ensemble(2, 2, CollisionPolicy::WithCollisions, TvdStatistic::Average, 200, 5).unwrap();
    assert_eq!(a, b);
    let obj = Objective::new(4, 2, CollisionPolicy::WithCollisions, TvdStatistic::Average).unwrap();
    assert_eq!(obj.evaluate(&a.best), a.values[a.best_index]);
    assert_eq!(obj.evaluate(&a.worst), a.values[a.worst_index]);
    assert!(a.best.matrix().unitarity_deviation() < 1e-10);
}

#[test]
fn optimizer_traces_never_decrease() {
    let r = local_optimize(3, 2, CollisionPolicy::WithCollisions, TvdStatistic::BestInput, 4, 3).unwrap();
    for t in &r.traces {
        assert!(t.windows(2).all(|w| w[1] >= w[0]));
    }
    assert_eq!(r, local_optimize(3, 2, CollisionPolicy::WithCollisions, TvdStatistic::BestInput, 4, 3).unwrap());
}

/// Single-photon probabilities and all visibilities of a 4-mode device.
fn four_mode_data(m: &DeviceModel) -> Vec<f64> {
    let mut v = single_photon_probs(m).as_slice().to_vec();
    let t = m.transfer();
    for i in all_pairs(4) {
        for o in all_pairs(4) {
            v.push(hom_visibility(&t, i, o).unwrap().unwrap_or(f64::NAN));
        }
    }
    v
}

#[test]
fn four_mode_data_identifies_parameters() {
    let template = FastTemplate::standard(2).unwrap();
    let mut g = indist_core::rng::seeded(99);
    let draw = |g: &mut indist_core::rng::StreamRng| {
        let u = |g: &mut indist_core::rng::StreamRng| indist_core::rng::uniform(g);
        let tau = (0..2).map(|_| (0..2).map(|_| 0.55 + 0.35 * u(g)).collect()).collect();
        let phi = template.phase_table(&[math::PI * u(g)]).unwrap();
        let eta = vec![1.0, 0.7 + 0.6 * u(g), 0.7 + 0.6 * u(g), 0.7 + 0.6 * u(g)];
        DeviceModel::new(CircuitParams::new(2, tau, phi).unwrap(), eta).unwrap()
    };
    for _ in 0..1000 {
        let a = draw(&mut g);
        let b = draw(&mut g);
        let (da, db) = (four_mode_data(&a), four_mode_data(&b));
        let gap = da.iter().zip(&db).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(gap > 1e-6, "{a:?} and {b:?} give the same data");
    }
}

#[test]
fn output_phases_lower_fidelity() {
    let u = sylvester(2);
    for theta in [0.01, 0.3, 2.0] {
        let shifted = ComplexMatrix::from_fn(4, |r, c| u[(r, c)] * math::cis(if r == 1 { theta } else { 0.0 }));
        assert!(fidelity_of(u.matrix(), &shifted).unwrap() < 1.0);
    }
}

#[test]
fn scattershot_uncertainty_shrinks() {
    let config = ScattershotConfig::new(sylvester(2), 2).unwrap();
    let events = sample_events(&config, 0.7, 4000, 21).unwrap();
    let sigma = |n: usize| analyze_config(&events[..n], &config).unwrap().posterior.sigma_est;
    let s: Vec<f64> = [250, 1000, 4000].iter().map(|&n| sigma(n)).collect();
    assert!(s[0] > s[1] && s[1] > s[2], "{s:?}");
}
