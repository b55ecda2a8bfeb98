//! Property-based checks of the invariants each module promises.

use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use sensalloc::baselines::{allocate_ewata, allocate_gpsta, allocate_oomta, allocate_unsta};
use sensalloc::eval::{aggregated_sensing_error, average_cost, ErrorNormalizer};
use sensalloc::inference::{idw_estimate, knn_estimate, SvrModel, SvrParams};
use sensalloc::mpi::{unified_priority, update_weights, AttributeWeights, UnifiedScores};
use sensalloc::nts::{assign_tasks, rank_cells, value_iteration, Mdp, NtsParams};
use sensalloc::spe::{compute_priorities, gaussian_mutual_information, temporal_entropy, PriorityScores, SpeParams};
use sensalloc::{
    generate_synthetic, AllocationPlan, CostModel, GridGeometry, InferenceKind, MeasurementStore, Participant,
    RunConfig, Scheme, Simulator, SyntheticConfig,
};

fn coords(n: usize) -> impl Strategy<Value = Vec<(f64, f64)>> {
    prop::collection::vec((-50.0..50.0f64, -50.0..50.0f64), n)
}

/// Geometry with `n` cells at least 50 m apart.
fn spread_geometry(n: usize) -> impl Strategy<Value = GridGeometry> {
    coords(n).prop_filter_map("cells too close", move |c| {
        let g = GridGeometry::from_coords(&c).ok()?;
        (0..n).all(|i| (0..i).all(|j| g.distance(i, j).unwrap() > 0.05)).then_some(g)
    })
}

fn ps(attribute: usize, v: Vec<f64>) -> PriorityScores {
    PriorityScores { attribute, cycle: 1, te: vec![], smi: vec![], ps: v, alpha_te: 0.5, alpha_smi: 0.5 }
}

fn participants_at(cells: &[usize]) -> Vec<Participant> {
    cells.iter().enumerate().map(|(id, &c)| Participant { id, current_cell: c }).collect()
}

proptest! {
    #[test]
    fn travel_cost_obeys_triangle_inequality(c in coords(3), k in 0.1..10.0f64) {
        let g = GridGeometry::from_coords(&c).unwrap();
        let m = CostModel::new(k).unwrap();
        let (ab, bc, ac) = (
            m.travel_cost(&g, 0, 1).unwrap(),
            m.travel_cost(&g, 1, 2).unwrap(),
            m.travel_cost(&g, 0, 2).unwrap(),
        );
        prop_assert!(ac <= ab + bc + 1e-9);
        prop_assert_eq!(g.distance(0, 1).unwrap(), g.distance(1, 0).unwrap());
        prop_assert_eq!(g.distance(2, 2).unwrap(), 0.0);
    }

    #[test]
    fn knn_and_idw_stay_in_range_and_shift_with_values(
        g in spread_geometry(8),
        vals in prop::collection::vec(-100.0..100.0f64, 7),
        k in 1usize..9,
        shift in -1e3..1e3f64,
    ) {
        let collected: Vec<(usize, f64)> = (1..8).zip(vals.iter().copied()).collect();
        let shifted: Vec<(usize, f64)> = collected.iter().map(|&(c, v)| (c, v + shift)).collect();
        let lo = vals.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        for est in [knn_estimate, idw_estimate] {
            let e = est(&collected, &g, k, 0).unwrap();
            prop_assert!(e >= lo - 1e-9 && e <= hi + 1e-9);
            let es = est(&shifted, &g, k, 0).unwrap();
            prop_assert!((es - e - shift).abs() < 1e-9 * (1.0 + shift.abs()));
        }
    }

    #[test]
    fn svr_predictions_shift_with_targets(
        pts in coords(6),
        vals in prop::collection::vec(-5.0..5.0f64, 6),
        shift in -50.0..50.0f64,
        q in (-50.0..50.0f64, -50.0..50.0f64),
    ) {
        let points: Vec<[f64; 2]> = pts.iter().map(|&(x, y)| [x, y]).collect();
        let shifted: Vec<f64> = vals.iter().map(|v| v + shift).collect();
        // Tight solver tolerance: at the default 1e-3 the two fits may stop at
        // different points of the tolerance band.
        let p = SvrParams { tol: 1e-10, ..SvrParams::default() };
        let a = SvrModel::fit(&points, &vals, &p).unwrap();
        let b = SvrModel::fit(&points, &shifted, &p).unwrap();
        let d = b.predict([q.0, q.1]) - a.predict([q.0, q.1]);
        prop_assert!((d - shift).abs() < 1e-6, "shift {shift} moved prediction by {d}");
    }

    #[test]
    fn temporal_entropy_grows_with_spread(
        series in prop::collection::vec(-10.0..10.0f64, 2..30),
        k in 1.0..20.0f64,
    ) {
        let wider: Vec<f64> = series.iter().map(|v| v * k).collect();
        prop_assert!(temporal_entropy(&wider, None, 1e-6) >= temporal_entropy(&series, None, 1e-6) - 1e-12);
    }

    #[test]
    fn mutual_information_is_symmetric_and_nonnegative(
        pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 3..40),
    ) {
        let (u, v): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        let (a, b) = (gaussian_mutual_information(&u, &v), gaussian_mutual_information(&v, &u));
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
    }

    #[test]
    fn priority_ranking_ignores_common_alpha_scale(
        hist in prop::collection::vec(prop::collection::vec(-5.0..5.0f64, 6), 5),
        at in 0.0..1.0f64,
        as_ in 0.0..1.0f64,
        pow in -3i32..4,
        normalize in any::<bool>(),
    ) {
        // Powers of two scale exactly, so equal scores stay equal.
        let k = 2f64.powi(pow);
        let p = SpeParams { alpha_te: at, alpha_smi: as_, normalize, ..Default::default() };
        let q = SpeParams { alpha_te: at * k, alpha_smi: as_ * k, ..p };
        let a = compute_priorities(&hist, 0, 6, &p).unwrap();
        let b = compute_priorities(&hist, 0, 6, &q).unwrap();
        prop_assert_eq!(rank_cells(&a.ps, None), rank_cells(&b.ps, None));
    }

    #[test]
    fn weight_update_normalizes_and_favours_lower_loss(
        w in prop::collection::vec(0.01..1.0f64, 2..6),
        losses in prop::collection::vec(0.0..1.0f64, 6),
        eta in 0.0..5.0f64,
    ) {
        let total: f64 = w.iter().sum();
        let n = w.len();
        let before = AttributeWeights { w: w.iter().map(|v| v / total).collect(), cycle: 3, eta, delta: 0.95 };
        let after = update_weights(&before, &losses[..n]).unwrap();
        prop_assert!((after.w.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        prop_assert_eq!(after.cycle, 4);
        if eta > 0.0 {
            for a in 0..n {
                for b in 0..n {
                    if losses[a] < losses[b] {
                        prop_assert!(after.w[a] / before.w[a] > after.w[b] / before.w[b]);
                    }
                }
            }
        }
    }

    #[test]
    fn ups_ranking_ignores_weight_renormalization(
        rows in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 7), 3),
        w in prop::collection::vec(0.01..1.0f64, 3),
        pow in -4i32..5,
    ) {
        let k = 2f64.powi(pow);
        let scores: Vec<PriorityScores> = rows.into_iter().enumerate().map(|(a, r)| ps(a, r)).collect();
        let unnorm = AttributeWeights { w: w.clone(), cycle: 1, eta: 0.5, delta: 0.95 };
        let scaled = AttributeWeights { w: w.iter().map(|v| v * k).collect(), ..unnorm.clone() };
        let a = unified_priority(&scores, &unnorm).unwrap();
        let b = unified_priority(&scores, &scaled).unwrap();
        prop_assert_eq!(rank_cells(&a.ups, None), rank_cells(&b.ups, None));
    }

    #[test]
    fn value_iteration_contracts(
        n in 1usize..=10,
        seed in any::<u64>(),
        beta in 0.05..0.95f64,
        gamma in 0.0..3.0f64,
    ) {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<(f64, f64)> = (0..n).map(|_| (rng.random_range(0.0..30.0), rng.random_range(0.0..30.0))).collect();
        let ups: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..1.0)).collect();
        let g = GridGeometry::from_coords(&c).unwrap();
        let params = NtsParams { gamma, beta, theta_conv: 1e-9, d_floor_km: 0.5, literal: false };
        let q = value_iteration(&Mdp::new(&ups, &g, &params).unwrap(), 1).unwrap();
        for w in q.deltas.windows(2) {
            prop_assert!(w[1] <= w[0] + 1e-12, "sweep deltas rose: {:?}", q.deltas);
        }
    }

    #[test]
    fn every_allocator_returns_p_distinct_cells(
        scores in prop::collection::vec(prop::collection::vec(0.0..1.0f64, 12), 1..4),
        starts in prop::collection::vec(0usize..12, 4..11),
        seed in any::<u64>(),
    ) {
        let g = GridGeometry::from_coords(&(0..12).map(|i| ((i % 4) as f64 * 3.0, (i / 4) as f64 * 2.0)).collect::<Vec<_>>()).unwrap();
        let parts = participants_at(&starts);
        let p = parts.len();
        let ps_all: Vec<PriorityScores> = scores.iter().cloned().enumerate().map(|(a, v)| ps(a, v)).collect();
        let w = AttributeWeights::uniform(ps_all.len(), 0.5, 0.95).unwrap();
        let ups = unified_priority(&ps_all, &w).unwrap();
        let nts = NtsParams { gamma: 1.0, beta: 0.5, theta_conv: 1e-6, d_floor_km: 1.0, literal: false };
        let qrs = value_iteration(&Mdp::new(&ups.ups, &g, &nts).unwrap(), 1).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plans = vec![
            assign_tasks(&qrs, Some(&ups.ups), &parts, &g).unwrap(),
            allocate_oomta(&ups, &parts, &g).unwrap(),
            allocate_gpsta(&ps_all, &parts, &g).unwrap(),
            allocate_ewata(&ps_all, &parts, &g).unwrap(),
            allocate_unsta(&mut rng, 1, &parts, &g).unwrap(),
        ];
        for plan in plans {
            prop_assert!(plan.validate(p, 12).is_ok());
            let mut cells = plan.selected_cells.clone();
            cells.sort();
            cells.dedup();
            prop_assert_eq!(cells.len(), p);
            prop_assert_eq!(plan.assignments.len(), p);
        }
    }

    #[test]
    fn epsilon_is_invariant_under_affine_rescaling(
        truth in prop::collection::vec(prop::collection::vec(prop::collection::vec(-10.0..10.0f64, 4), 3), 2),
        noise in prop::collection::vec(-1.0..1.0f64, 24),
        scale in prop::collection::vec((0.01..100.0f64, -100.0..100.0f64), 2),
    ) {
        let eps = |t: &Vec<Vec<Vec<f64>>>, f: &dyn Fn(usize, f64) -> f64| {
            let mut s = MeasurementStore::new(t).unwrap();
            for a in 0..2 {
                for y in 0..4 {
                    let row: Vec<f64> = (0..3).map(|x| f(a, truth[a][x][y] + noise[(a * 3 + x) * 4 + y])).collect();
                    s.set_is_row(a, y, &row).unwrap();
                }
            }
            let n = ErrorNormalizer::from_truth(&s, 1..4);
            aggregated_sensing_error(&s, 1..4, &n).unwrap()
        };
        let affine = |a: usize, v: f64| scale[a].0 * v + scale[a].1;
        let rescaled: Vec<Vec<Vec<f64>>> = truth
            .iter()
            .enumerate()
            .map(|(a, plane)| plane.iter().map(|row| row.iter().map(|&v| affine(a, v)).collect()).collect())
            .collect();
        let base = eps(&truth, &|_, v| v);
        let moved = eps(&rescaled, &affine);
        prop_assert!((base - moved).abs() <= 1e-9 * (1.0 + base), "{base} vs {moved}");
    }

    #[test]
    fn cost_is_additive_over_cycle_ranges(
        moves in prop::collection::vec(prop::collection::vec((0usize..6, 0usize..6), 3), 2..12),
        split in 1usize..11,
    ) {
        let g = GridGeometry::from_coords(&[(0.0, 0.0), (1.0, 2.0), (4.0, 1.0), (3.0, 3.0), (7.0, 0.0), (5.0, 5.0)]).unwrap();
        let m = CostModel::default();
        let plans: Vec<AllocationPlan> = moves
            .iter()
            .enumerate()
            .map(|(y, mv)| AllocationPlan {
                cycle: y,
                assignments: mv
                    .iter()
                    .enumerate()
                    .map(|(p, &(f, t))| sensalloc::model::Assignment { participant: p, from_cell: f, to_cell: t })
                    .collect(),
                selected_cells: vec![],
            })
            .collect();
        let k = split.min(plans.len() - 1);
        let n = plans.len() as f64;
        let whole = average_cost(&plans, &m, &g, 3).unwrap() * n;
        let parts = average_cost(&plans[..k], &m, &g, 3).unwrap() * k as f64
            + average_cost(&plans[k..], &m, &g, 3).unwrap() * (n - k as f64);
        prop_assert!((whole - parts).abs() <= 1e-9 * (1.0 + whole));
    }
}

#[test]
fn raising_gamma_never_lengthens_travel() {
    // A tight cluster beside the participants (one strong cell, two weak) and
    // three isolated mid-priority cells 10+ km away. The cost term lifts the
    // weak cluster cells, which sit within the distance floor of the strong one.
    let g = GridGeometry::from_coords(&[(0.0, 0.0), (0.4, 0.0), (0.0, 0.4), (10.0, 0.0), (10.0, 8.0), (18.0, 0.0)])
        .unwrap();
    let ups = [0.5, 0.1, 0.1, 0.3, 0.3, 0.3];
    let parts = participants_at(&[1, 2]);
    let mut lengths = Vec::new();
    for gamma in [0.0, 0.5, 1.0, 2.0] {
        let nts = NtsParams { gamma, beta: 0.5, theta_conv: 1e-9, d_floor_km: 0.5, literal: false };
        let qrs = value_iteration(&Mdp::new(&ups, &g, &nts).unwrap(), 1).unwrap();
        let plan = assign_tasks(&qrs, Some(&ups), &parts, &g).unwrap();
        lengths.push(plan.total_distance(&g));
    }
    for w in lengths.windows(2) {
        assert!(w[1] <= w[0] + 1e-12, "travel grew with gamma: {lengths:?}");
    }
    assert!(lengths[3] < lengths[0], "cost term had no effect: {lengths:?}");
}

#[test]
fn uniform_ups_equals_scaled_ewa_mean() {
    // The unified score under uniform weights is the per-cell mean of PS.
    let rows = [vec![0.1, 0.9, 0.4], vec![0.7, 0.2, 0.4]];
    let scores: Vec<PriorityScores> = rows.iter().cloned().enumerate().map(|(a, r)| ps(a, r)).collect();
    let u: UnifiedScores = unified_priority(&scores, &AttributeWeights::uniform(2, 0.5, 0.95).unwrap()).unwrap();
    for (x, v) in u.ups.iter().enumerate() {
        assert!((v - 0.5 * (rows[0][x] + rows[1][x])).abs() < 1e-15);
    }
}

#[test]
fn streaming_epsilon_matches_batch_epsilon() {
    let ds = generate_synthetic(&SyntheticConfig { cells: 12, cycles: 15, attributes: 3, seed: 2, ..Default::default() })
        .unwrap();
    for scheme in Scheme::ALL {
        for inference in InferenceKind::ALL {
            let mut cfg = RunConfig::new(scheme, inference, 4, 3);
            cfg.seed = 5;
            let sim = Simulator::new(&cfg, &ds).unwrap();
            let mut state = sim.initial_state(5).unwrap();
            while state.cycle < sim.cycles() {
                sim.run_cycle(&mut state).unwrap();
            }
            let streamed = sim.summarize(5, &state).unwrap().epsilon;
            let batch = aggregated_sensing_error(&state.store, 1..sim.cycles(), &sim.normalizer).unwrap();
            assert!((streamed - batch).abs() <= 1e-12, "{scheme}/{inference}: {streamed} vs {batch}");
        }
    }
}

#[test]
fn snapshot_replay_reproduces_downstream_cycles() {
    let ds = generate_synthetic(&SyntheticConfig { cells: 10, cycles: 12, attributes: 2, seed: 8, ..Default::default() })
        .unwrap();
    for scheme in Scheme::ALL {
        let cfg = RunConfig::new(scheme, InferenceKind::Idw, 3, 2);
        let sim = Simulator::new(&cfg, &ds).unwrap();
        let mut state = sim.initial_state(1).unwrap();
        for _ in 0..5 {
            sim.run_cycle(&mut state).unwrap();
        }
        let mut copy = state.clone();
        while state.cycle < sim.cycles() {
            sim.run_cycle(&mut state).unwrap();
            sim.run_cycle(&mut copy).unwrap();
        }
        assert_eq!(state.traces, copy.traces, "{scheme}");
        assert_eq!(state.plans, copy.plans, "{scheme}");
    }
}
