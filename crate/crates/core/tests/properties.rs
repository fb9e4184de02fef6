use std::sync::OnceLock;

use proptest::prelude::*;

use collsym::engine::ClassifyOptions;
use collsym::fields::{OmegaProfile, ScalarField};
use collsym::geometry::{euclidean_catalog, MetricSpace};
use collsym::lie::classify_lie;
use collsym::poly::Poly;
use collsym::reparam::{damped_to_timedep, timedep_to_damped, DampingProfile};
use collsym::symmetry::Generator;
use collsym::verifier::{independence_rank, ResidualReport};

fn potentials(n: usize) -> Vec<ScalarField<f64>> {
    let mut p = vec![ScalarField::kepler(), ScalarField::exceptional(), ScalarField::quadratic(), ScalarField::central_power(3.0).unwrap()];
    p.push(ScalarField::central_power(-1.5).unwrap());
    // x1³ − 2x1·xn + 0.5
    let mut e = vec![0; n];
    e[0] = 3;
    let mut f = vec![0; n];
    f[0] += 1;
    f[n - 1] += 1;
    p.push(ScalarField::polynomial(Poly::from_terms(n, [(1.0, e), (-2.0, f), (0.5, vec![0; n])])));
    p
}

fn point(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-3.0..3.0f64, n).prop_filter("away from the origin", |x| x.iter().map(|v| v * v).sum::<f64>().sqrt() > 0.3)
}

proptest! {
    #[test]
    fn gradient_matches_finite_differences(x in (1usize..4).prop_flat_map(point)) {
        for v in potentials(x.len()) {
            let g = v.grad(&x).unwrap();
            let fd = v.fd_grad(&x, 1e-5).unwrap();
            let scale = 1.0 + g.iter().map(|c| c.abs()).fold(0.0, f64::max);
            for (a, b) in g.iter().zip(&fd) {
                prop_assert!((a - b).abs() < 1e-6 * scale, "{} at {x:?}: {g:?} vs {fd:?}", v.name());
            }
        }
    }

    #[test]
    fn pass_iff_below_tolerance(values in prop::collection::vec(0.0..1.0f64, 1..50), tol in 1e-3..1.0f64) {
        let r = ResidualReport::from_values("p", &values, tol, 0);
        let max = values.iter().copied().fold(0.0, f64::max);
        prop_assert_eq!(r.pass, max < tol);
        prop_assert_eq!(r.max, max);
        prop_assert!(r.mean <= r.max && r.p95 <= r.max);
    }

    #[test]
    fn time_map_inverts(c in -2.0..2.0f64, b in -3.0..3.0f64, t0 in 0.5..3.0f64, len in 0.5..8.0f64) {
        for phi in [DampingProfile::constant(c), DampingProfile::power_law(b)] {
            let (map, omega) = damped_to_timedep(&phi, (t0, t0 + len)).unwrap();
            let (s0, s1) = map.s_range();
            prop_assert!(s1 > s0);
            for k in 0..=16 {
                let t = t0 + len * k as f64 / 16.0;
                let s = map.s(t).unwrap();
                prop_assert!((map.t_of_s(s).unwrap() - t).abs() < 1e-10 * (1.0 + t.abs()));
                let s = s0 + (s1 - s0) * k as f64 / 16.0;
                prop_assert!((map.s(map.t_of_s(s).unwrap()).unwrap() - s).abs() < 1e-10 * (1.0 + s.abs()));
                prop_assert!(omega.eval(s).unwrap() > 0.0);
            }
        }
    }

    #[test]
    fn damping_round_trip(c in -1.5..1.5f64, b in -2.5..2.5f64, t0 in 0.5..2.0f64, len in 1.0..6.0f64) {
        for phi in [DampingProfile::constant(c), DampingProfile::power_law(b)] {
            let (map, omega) = damped_to_timedep(&phi, (t0, t0 + len)).unwrap();
            let (back_map, back) = timedep_to_damped(&omega, map.s_range()).unwrap();
            let (lo, hi) = back_map.t_range();
            prop_assert!((lo - t0).abs() < 1e-12 && (hi - t0 - len).abs() < 1e-8 * (1.0 + hi));
            for k in 0..=20 {
                let t = lo + (hi - lo) * k as f64 / 20.0;
                let (p, q) = (phi.eval(t).unwrap(), back.eval(t).unwrap());
                prop_assert!((p - q).abs() < 1e-8 * (1.0 + p.abs()), "{phi:?} t = {t}: {p} vs {q}");
            }
        }
    }
}

fn oscillator_generators() -> &'static Vec<Generator> {
    static GENS: OnceLock<Vec<Generator>> = OnceLock::new();
    GENS.get_or_init(|| {
        let space = MetricSpace::euclidean(1);
        let c = classify_lie(&space, &ScalarField::quadratic(), &OmegaProfile::power_law(1.0).unwrap(), &space.catalog(), &ClassifyOptions::default()).unwrap();
        c.symmetries.into_iter().map(|s| s.generator).collect()
    })
}

fn combine(gens: &[Generator], coeffs: &[f64]) -> Generator {
    let mut out = Generator::new(gens[0].n);
    for (g, &c) in gens.iter().zip(coeffs) {
        for ((f, p), l) in g.xi.iter().zip(&g.xi_labels) {
            out = out.with_xi(f.clone(), p.scale(c), l.clone());
        }
        for ((f, q), l) in g.eta.iter().zip(&g.eta_labels) {
            out = out.with_eta(f.clone(), q.iter().map(|p| p.scale(c)).collect(), l.clone());
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    // unit lower times unit upper triangular is invertible
    #[test]
    fn rank_invariant_under_recombination(lower in prop::collection::vec(-1.0..1.0f64, 64), upper in prop::collection::vec(-1.0..1.0f64, 64)) {
        let gens = oscillator_generators();
        let m = gens.len();
        let l = |i: usize, j: usize| if i == j { 1.0 } else if j < i { lower[i * m + j] } else { 0.0 };
        let u = |i: usize, j: usize| if i == j { 1.0 } else if j > i { upper[i * m + j] } else { 0.0 };
        let mixed: Vec<Generator> = (0..m)
            .map(|i| {
                let row: Vec<f64> = (0..m).map(|j| (0..m).map(|k| l(i, k) * u(k, j)).sum()).collect();
                combine(gens, &row)
            })
            .collect();
        let refs: Vec<&Generator> = mixed.iter().collect();
        prop_assert_eq!(independence_rank(&refs, 7).unwrap(), m);
        // dropping to a rank-deficient set is seen too
        let mut deficient = refs.clone();
        let dup = combine(&mixed[..2], &[2.0, -1.0]);
        deficient[m - 1] = &dup;
        prop_assert_eq!(independence_rank(&deficient, 7).unwrap(), m - 1 + usize::from(m <= 2));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    #[test]
    fn classification_ignores_catalog_order(perm in Just((0..13usize).collect::<Vec<_>>()).prop_shuffle(), a in prop::sample::select(vec![1.0, -0.5, 2.0])) {
        let space = MetricSpace::euclidean(3);
        let base = euclidean_catalog::<f64>(3);
        prop_assert_eq!(base.len(), 13);
        let shuffled: Vec<_> = perm.iter().map(|&i| base[i].clone()).collect();
        let omega = OmegaProfile::power_law(a).unwrap();
        let v = ScalarField::kepler();
        let opts = ClassifyOptions::default();
        let sorted = |c: collsym::lie::LieClassification| {
            let mut l: Vec<String> = c.symmetries.iter().map(|s| s.label()).collect();
            l.sort();
            l
        };
        let x = sorted(classify_lie(&space, &v, &omega, &base, &opts).unwrap());
        let y = sorted(classify_lie(&space, &v, &omega, &shuffled, &opts).unwrap());
        prop_assert_eq!(x, y);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn damped_solutions_map_to_solutions(c in -1.0..1.0f64, b in -2.0..2.0f64, x0 in -1.5..1.5f64, v0 in -1.0..1.0f64, kepler in any::<bool>()) {
        use collsym::reparam::{integrate_damped, map_trajectory, timedep_residual, Direction};
        use collsym::verifier::System;
        let (v, x, xd) = if kepler {
            (ScalarField::kepler(), vec![1.0 + x0.abs(), 0.0], vec![0.0, 0.8 + 0.2 * v0])
        } else {
            (ScalarField::quadratic(), vec![x0, 0.5], vec![v0, 0.0])
        };
        let space = MetricSpace::euclidean(2);
        for phi in [DampingProfile::constant(c), DampingProfile::power_law(b)] {
            let (map, omega) = damped_to_timedep(&phi, (1.0, 4.0)).unwrap();
            let damped = System::new(space.clone(), v.clone(), OmegaProfile::constant(1.0));
            let path = integrate_damped(&damped, &phi, &x, &xd, (1.0, 4.0), 1e-11).unwrap().to_path(200);
            let mapped = map_trajectory(&path, &map, Direction::DampedToTimeDep).unwrap();
            let target = System::new(space.clone(), v.clone(), omega);
            let r = timedep_residual(&mapped, &target, 1e-11).unwrap();
            prop_assert!(r < 1e-6, "{phi:?}: {r}");
        }
    }
}
