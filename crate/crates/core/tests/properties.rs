use nadyn_core::entropy::{
    bowen_dist, cover_join, format_g, max_separated, min_spanning, minimal_subcover_count, CountMode, FiniteCover,
};
use nadyn_core::space::{total_dist, Net, SpaceModel, SpacePoint, TotalPoint};
use nadyn_core::system::{constant_family, gathering, inverse_system, padded, perturb, splice, MapSpec, SystemSpec};
use proptest::prelude::*;

// Independent oracles.

fn circle_gap(x: f64, y: f64) -> f64 {
    let d = (x - y).rem_euclid(1.0);
    2.0 * d.min(1.0 - d)
}

fn oracle_dist(p: &SpacePoint, q: &SpacePoint) -> f64 {
    match (p, q) {
        (SpacePoint::Circle(x), SpacePoint::Circle(y)) => circle_gap(*x, *y),
        (SpacePoint::Torus([a, b]), SpacePoint::Torus([c, d])) => circle_gap(*a, *c).max(circle_gap(*b, *d)),
        _ => unreachable!(),
    }
}

/// Bowen distance by stepping each map by hand.
fn oracle_bowen(sys: &SystemSpec, i: i64, n: usize, mut p: SpacePoint, mut q: SpacePoint) -> f64 {
    let mut worst = oracle_dist(&p, &q);
    for j in 1..n {
        let f = sys.map_at(i + j as i64 - 1);
        p = f.apply(p).unwrap();
        q = f.apply(q).unwrap();
        worst = worst.max(oracle_dist(&p, &q));
    }
    worst
}

fn pairwise(sys: &SystemSpec, i: i64, n: usize, pts: &[SpacePoint]) -> Vec<Vec<f64>> {
    pts.iter()
        .map(|&p| pts.iter().map(|&q| oracle_bowen(sys, i, n, p, q)).collect())
        .collect()
}

/// Largest subset with all pairwise distances `> eps`, by enumeration.
fn oracle_separated(d: &[Vec<f64>], eps: f64) -> usize {
    let m = d.len();
    (0u32..1 << m)
        .filter(|&s| (0..m).all(|a| s >> a & 1 == 0 || (0..a).all(|b| s >> b & 1 == 0 || d[a][b] > eps + 1e-12)))
        .map(|s| s.count_ones() as usize)
        .max()
        .unwrap()
}

/// Smallest subset whose closed `eps`-balls contain every point.
fn oracle_spanning(d: &[Vec<f64>], eps: f64) -> usize {
    let m = d.len();
    (1u32..1 << m)
        .filter(|&s| (0..m).all(|a| (0..m).any(|c| s >> c & 1 == 1 && d[a][c] <= eps + 1e-12)))
        .map(|s| s.count_ones() as usize)
        .min()
        .unwrap()
}

fn circle_system() -> impl Strategy<Value = SystemSpec> {
    (0.0f64..1.0, 0.0f64..0.6, any::<u64>(), 0usize..3).prop_map(|(alpha, amp, seed, kind)| {
        let rot = constant_family(MapSpec::rotation(alpha).unwrap(), &SpaceModel::Circle).unwrap();
        match kind {
            0 => rot,
            1 => perturb(&rot, amp, seed).unwrap(),
            _ => splice(&rot, &perturb(&rot, amp, seed).unwrap(), 1).unwrap(),
        }
    })
}

fn circle_points(max: usize) -> impl Strategy<Value = Vec<SpacePoint>> {
    prop::collection::vec(0.0f64..1.0, 1..=max).prop_map(|v| v.into_iter().map(SpacePoint::Circle).collect())
}

fn torus_point() -> impl Strategy<Value = SpacePoint> {
    (0.0f64..1.0, 0.0f64..1.0).prop_map(|(x, y)| SpacePoint::torus(x, y))
}

fn cat() -> SystemSpec {
    constant_family(MapSpec::cat(), &SpaceModel::Torus2).unwrap()
}

fn close(space: &SpaceModel, p: &SpacePoint, q: &SpacePoint, tol: f64) -> bool {
    space.dist(p, q).unwrap() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn counts_match_enumeration(
        sys in circle_system(),
        pts in circle_points(10),
        i in -3i64..3,
        n in 1usize..4,
        eps in 0.05f64..0.8,
    ) {
        let net = Net::from_points(&SpaceModel::Circle, pts.clone()).unwrap();
        let d = pairwise(&sys, i, n, &pts);
        let sep = max_separated(&sys, i, n, eps, &net, CountMode::Exact).unwrap();
        let span = min_spanning(&sys, i, n, eps, &net, CountMode::Exact).unwrap();
        prop_assert_eq!(sep.count, oracle_separated(&d, eps));
        prop_assert_eq!(span.count, oracle_spanning(&d, eps));

        let greedy = max_separated(&sys, i, n, eps, &net, CountMode::Greedy).unwrap();
        prop_assert!(greedy.count <= sep.count);
        // Greedy sets are separated and maximal.
        for (x, &a) in greedy.witness.iter().enumerate() {
            for &b in &greedy.witness[..x] {
                prop_assert!(d[a][b] > eps);
            }
        }
        for row in &d {
            prop_assert!(greedy.witness.iter().any(|&c| row[c] <= eps + 1e-12));
        }
        let gspan = min_spanning(&sys, i, n, eps, &net, CountMode::Greedy).unwrap();
        prop_assert!(gspan.count >= span.count);
        for row in &d {
            prop_assert!(gspan.witness.iter().any(|&c| row[c] <= eps + 1e-12));
        }
    }

    #[test]
    fn sandwich(sys in circle_system(), pts in circle_points(12), n in 1usize..5, eps in 0.05f64..0.9) {
        let net = Net::from_points(&SpaceModel::Circle, pts).unwrap();
        let r = min_spanning(&sys, 0, n, eps, &net, CountMode::Exact).unwrap().count;
        let s = max_separated(&sys, 0, n, eps, &net, CountMode::Exact).unwrap().count;
        let r_half = min_spanning(&sys, 0, n, eps / 2.0, &net, CountMode::Exact).unwrap().count;
        prop_assert!(r <= s && s <= r_half, "r={} s={} r/2={}", r, s, r_half);
    }

    #[test]
    fn counts_monotone_in_n(sys in circle_system(), pts in circle_points(12), eps in 0.05f64..0.9) {
        let net = Net::from_points(&SpaceModel::Circle, pts).unwrap();
        let counts: Vec<usize> = (1..5)
            .map(|n| max_separated(&sys, 0, n, eps, &net, CountMode::Exact).unwrap().count)
            .collect();
        prop_assert!(counts.windows(2).all(|w| w[0] <= w[1]), "{:?}", counts);
    }

    #[test]
    fn bowen_matches_oracle(sys in circle_system(), p in 0.0f64..1.0, q in 0.0f64..1.0, i in -5i64..5, n in 1usize..8) {
        let (p, q) = (SpacePoint::Circle(p), SpacePoint::Circle(q));
        let got = bowen_dist(&sys, i, n, p, q).unwrap();
        prop_assert!((got - oracle_bowen(&sys, i, n, p, q)).abs() < 1e-12);
    }

    #[test]
    fn rotations_are_isometries(alpha in -2.0f64..2.0, p in torus_point(), q in torus_point(), n in 1usize..20) {
        let rot = constant_family(MapSpec::rotation(alpha).unwrap(), &SpaceModel::Torus2).unwrap();
        let d = SpaceModel::Torus2.dist(&p, &q).unwrap();
        prop_assert!((bowen_dist(&rot, 0, n, p, q).unwrap() - d).abs() < 1e-9);
    }

    #[test]
    fn cocycle(p in torus_point(), i in -6i64..6, n in 0usize..6, m in 0usize..6, amp in 0.0f64..0.5, seed in any::<u64>()) {
        let sys = perturb(&cat(), amp, seed).unwrap();
        let whole = sys.compose(i, p, n + m).unwrap();
        let split = sys.compose(i + n as i64, sys.compose(i, p, n).unwrap(), m).unwrap();
        prop_assert!(close(&SpaceModel::Torus2, &whole, &split, 1e-9));
        let back = sys.compose_inverse(i, sys.compose(i, p, n).unwrap(), n).unwrap();
        prop_assert!(close(&SpaceModel::Torus2, &back, &p, 1e-7));
    }

    #[test]
    fn gathering_composes_blocks(p in torus_point(), k in 1u64..4, i in -3i64..3, n in 0usize..4, seed in any::<u64>()) {
        let sys = perturb(&cat(), 0.3, seed).unwrap();
        let g = gathering(&sys, k).unwrap();
        let lhs = g.compose(i, p, n).unwrap();
        let rhs = sys.compose(k as i64 * i, p, k as usize * n).unwrap();
        prop_assert!(close(&SpaceModel::Torus2, &lhs, &rhs, 1e-9));
    }

    #[test]
    fn inverse_system_runs_backwards(p in torus_point(), n in 1usize..6, seed in any::<u64>()) {
        let sys = perturb(&cat(), 0.3, seed).unwrap();
        let inv = inverse_system(&sys);
        for j in 0..n as i64 {
            let x = sys.map_at(-j - 1).apply(p).unwrap();
            prop_assert!(close(&SpaceModel::Torus2, &inv.map_at(j).apply(x).unwrap(), &p, 1e-9));
        }
        let start = sys.compose(-(n as i64), p, n).unwrap();
        prop_assert!(close(&SpaceModel::Torus2, &inv.compose(0, start, n).unwrap(), &p, 1e-7));
        prop_assert_eq!(inverse_system(&inv).rule, sys.rule);
    }

    #[test]
    fn padding_shifts_time(p in torus_point(), i in 0i64..5, n in 0usize..5, seed in any::<u64>()) {
        let sys = perturb(&cat(), 0.2, seed).unwrap();
        let pad = padded(&sys, i);
        let lhs = pad.compose(0, p, i as usize + 1 + n).unwrap();
        let rhs = sys.compose(i + 1, p, n).unwrap();
        prop_assert!(close(&SpaceModel::Torus2, &lhs, &rhs, 1e-9));
    }

    #[test]
    fn metric_axioms(p in torus_point(), q in torus_point(), r in torus_point(), cp in -2i64..2, cq in -2i64..2) {
        let s = SpaceModel::Torus2;
        let d = |a: &SpacePoint, b: &SpacePoint| s.dist(a, b).unwrap();
        prop_assert_eq!(d(&p, &p), 0.0);
        prop_assert_eq!(d(&p, &q), d(&q, &p));
        prop_assert!((0.0..=1.0).contains(&d(&p, &q)));
        prop_assert!(d(&p, &r) <= d(&p, &q) + d(&q, &r) + 1e-12);
        prop_assert!((d(&p, &q) - oracle_dist(&p, &q)).abs() < 1e-12);

        let (tp, tq) = (TotalPoint { point: p, component: cp }, TotalPoint { point: q, component: cq });
        let td = total_dist(&s, &tp, &tq).unwrap();
        if cp == cq {
            prop_assert_eq!(td, d(&p, &q).min(1.0));
        } else {
            prop_assert_eq!(td, 1.0);
        }
    }

    #[test]
    fn finite_metric_is_normalized(raw in prop::collection::vec(1.0f64..2.0, 6)) {
        // Four points with all distances in [1, 2] always satisfy the triangle inequality.
        let mut m = vec![vec![0.0; 4]; 4];
        let pairs = [(1, 0), (2, 0), (2, 1), (3, 0), (3, 1), (3, 2)];
        for (&(a, b), &d) in pairs.iter().zip(&raw) {
            m[a][b] = d;
            m[b][a] = d;
        }
        let labels = (0..4).map(|k| k.to_string()).collect();
        let s = SpaceModel::finite(labels, m).unwrap();
        let max = raw.iter().cloned().fold(0.0, f64::max);
        let d = s.dist(&SpacePoint::Finite(1), &SpacePoint::Finite(0)).unwrap();
        prop_assert!((d - raw[0] / max).abs() < 1e-12);
    }

    #[test]
    fn format_round_trips(x in -1e9f64..1e9) {
        let back: f64 = format_g(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs().max(1e-300));
    }

    #[test]
    fn subcover_matches_enumeration(sets in prop::collection::vec(1u64..64, 1..8)) {
        let mut sets = sets;
        sets.push(63 ^ sets.iter().fold(0, |a, s| a | s));
        sets.retain(|&s| s != 0);
        let cover = FiniteCover::from_masks(6, sets.clone()).unwrap();
        let best = (1u32..1 << sets.len())
            .filter(|&pick| (0..sets.len()).filter(|&k| pick >> k & 1 == 1).fold(0, |a, k| a | sets[k]) == 63)
            .map(|pick| pick.count_ones() as usize)
            .min()
            .unwrap();
        prop_assert_eq!(minimal_subcover_count(&cover).unwrap(), best);
    }

    #[test]
    fn join_refines_factors(a in prop::collection::vec(1u64..32, 1..5), b in prop::collection::vec(1u64..32, 1..5)) {
        let close_up = |mut v: Vec<u64>| {
            v.push(31);
            FiniteCover::from_masks(5, v).unwrap()
        };
        let (a, b) = (close_up(a), close_up(b));
        let j = cover_join(&a, &b).unwrap();
        prop_assert!(j.refines(&a) && j.refines(&b));
        let (na, nb, nj) = (
            minimal_subcover_count(&a).unwrap(),
            minimal_subcover_count(&b).unwrap(),
            minimal_subcover_count(&j).unwrap(),
        );
        prop_assert!(nj <= na * nb && nj >= na.max(nb));
    }
}
