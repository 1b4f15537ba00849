use craneplan::flatness::{flat_step, FlatState};
use craneplan::geometry::{BoxObstacle, ClearanceConfig};
use craneplan::model::{CraneParams, FrictionVariant, Smoothing};
use craneplan::optimizer::nlp::check_jacobian_columns;
use craneplan::optimizer::{solve, CraneNlp, NlpProblem, PathSpec, SolveStatus, SqpOptions, Transcription};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Closed-form rest-to-rest minimum-snap profile on `[0, 1]`.
fn min_snap_profile(s: f64) -> f64 {
    let s4 = s.powi(4);
    s4 * (35.0 - 84.0 * s + 70.0 * s * s - 20.0 * s * s * s)
}

/// Fixed-time problem without path constraints. The terminal snap is left
/// free because the polynomial oracle does not constrain it.
fn unconstrained(intervals: usize, t: f64, start: [f64; 3], end: [f64; 3]) -> CraneNlp {
    let tr = Transcription {
        pin_terminal_snap: false,
        ..Transcription::new(intervals, 0.001, t, t).unwrap()
    };
    CraneNlp::new(
        tr,
        FlatState::at_rest(start),
        FlatState::at_rest(end),
        CraneParams::default(),
        FrictionVariant::COMPLETE,
        Smoothing::default(),
        None,
    )
    .unwrap()
}

/// Linear interpolation between the endpoints, with zero derivatives.
fn straight_guess(nlp: &CraneNlp, t: f64) -> Vec<f64> {
    let tr = &nlp.tr;
    let n = tr.intervals;
    let nodes: Vec<FlatState> = (0..=n)
        .map(|k| {
            let w = k as f64 / n as f64;
            let a = nlp.start.position();
            let b = nlp.end.position();
            FlatState::at_rest(std::array::from_fn(|i| a[i] + w * (b[i] - a[i])))
        })
        .collect();
    tr.pack(&nodes, &vec![[0.0; 3]; n], t).unwrap()
}

#[test]
fn fixed_time_solution_matches_min_snap_polynomial() {
    let t = 2.0;
    let start = [0.2, 0.3, -0.5];
    let end = [0.6, 0.5, -0.4];
    let nlp = unconstrained(1000, t, start, end);
    let (z, rep) = solve(&nlp, &straight_guess(&nlp, t), &SqpOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
    let mut worst = 0.0f64;
    for k in 0..=nlp.tr.intervals {
        let s = k as f64 / nlp.tr.intervals as f64;
        let p = nlp.tr.node(&z, k).position();
        for i in 0..3 {
            let oracle = start[i] + (end[i] - start[i]) * min_snap_profile(s);
            worst = worst.max((p[i] - oracle).abs());
        }
    }
    assert!(worst < 1e-6, "max deviation from min-snap polynomial {worst:e}");
}

#[test]
fn static_problem_converges_to_shortest_time() {
    let p = [0.5, 0.4, -0.5];
    let nlp = CraneNlp::new(
        Transcription::new(20, 0.001, 0.5, 4.0).unwrap(),
        FlatState::at_rest(p),
        FlatState::at_rest(p),
        CraneParams::default(),
        FrictionVariant::COMPLETE,
        Smoothing::default(),
        Some(PathSpec::new(vec![], ClearanceConfig::default())),
    )
    .unwrap();
    let guess = nlp.tr.pack(&vec![FlatState::at_rest(p); 21], &vec![[0.0; 3]; 20], 3.0).unwrap();
    let (z, rep) = solve(&nlp, &guess, &SqpOptions::default()).unwrap();
    assert_eq!(rep.status, SolveStatus::Optimal, "{rep:?}");
    assert!(rep.iterations <= 5, "{rep:?}");
    assert!((nlp.tr.final_time(&z) - 0.5).abs() < 1e-6);
    for k in 0..=20 {
        assert!((nlp.tr.node(&z, k).position()[0] - p[0]).abs() < 1e-8);
    }
}

fn obstacle_problem(intervals: usize) -> CraneNlp {
    let obstacles = vec![
        BoxObstacle::new([0.5, 0.3, -0.9], [0.7, 0.6, -0.3]).unwrap(),
        BoxObstacle::new([0.1, 0.6, -0.9], [0.3, 0.8, -0.5]).unwrap(),
    ];
    CraneNlp::new(
        Transcription::new(intervals, 0.001, 1.0, 8.0).unwrap(),
        FlatState::at_rest([0.2, 0.2, -0.5]),
        FlatState::at_rest([1.0, 0.7, -0.6]),
        CraneParams::default(),
        FrictionVariant::COMPLETE,
        Smoothing::default(),
        Some(PathSpec::new(obstacles, ClearanceConfig::default())),
    )
    .unwrap()
}

/// Random point with moderate accelerations: a chain driven by random
/// snaps, with position noise so that defects are nonzero.
fn random_point(nlp: &CraneNlp, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let tr = &nlp.tr;
    let t = rng.gen_range(2.0..5.0);
    let h = t / tr.intervals as f64;
    let mut nodes = vec![FlatState::at_rest([rng.gen_range(0.3..0.9), rng.gen_range(0.2..0.7), -0.5])];
    nodes[0].0[1] = rng.gen_range(-0.3..0.3);
    nodes[0].0[2] = rng.gen_range(-0.3..0.3);
    nodes[0].0[6] = rng.gen_range(-0.3..0.3);
    let snaps: Vec<[f64; 3]> = (0..tr.intervals)
        .map(|_| std::array::from_fn(|_| rng.gen_range(-0.3..0.3)))
        .collect();
    for s in &snaps {
        let mut next = flat_step(nodes.last().unwrap(), *s, h);
        next.0[0] += rng.gen_range(-1e-3..1e-3);
        nodes.push(next);
    }
    tr.pack(&nodes, &snaps, t).unwrap()
}

#[test]
fn derivatives_match_finite_differences() {
    let nlp = obstacle_problem(6);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = nlp.num_vars();
    for _ in 0..20 {
        let z = random_point(&nlp, &mut rng);
        let cols: Vec<usize> = (0..5).map(|_| rng.gen_range(0..n)).chain([n - 1]).collect();
        let je = nlp.eq_jacobian(&z).unwrap();
        let ji = nlp.ineq_jacobian(&z).unwrap();
        let e = check_jacobian_columns(|z| nlp.eq_constraints(z), &je, &z, &cols, 1e-7).unwrap();
        let i = check_jacobian_columns(|z| nlp.ineq_constraints(z), &ji, &z, &cols, 1e-7).unwrap();
        assert!(e < 1e-6 && i < 1e-6, "equality mismatch {e:e}, inequality mismatch {i:e}");
        let g = nlp.gradient(&z).unwrap();
        for &c in &cols {
            let h = 1e-7 * z[c].abs().max(1.0);
            let mut zp = z.clone();
            let mut zm = z.clone();
            zp[c] += h;
            zm[c] -= h;
            let fd = (nlp.objective(&zp).unwrap() - nlp.objective(&zm).unwrap()) / (2.0 * h);
            assert!((g[c] - fd).abs() / fd.abs().max(1.0) < 1e-6);
        }
    }
}

#[test]
fn dimensions_are_consistent() {
    let nlp = obstacle_problem(4);
    let z = random_point(&nlp, &mut ChaCha8Rng::seed_from_u64(3));
    assert_eq!(nlp.num_vars(), 12 * 5 + 3 * 4 + 1);
    assert_eq!(nlp.eq_constraints(&z).unwrap().len(), nlp.num_eq());
    assert_eq!(nlp.num_eq(), 12 * 4 + 24 + 3);
    assert_eq!(nlp.ineq_constraints(&z).unwrap().len(), nlp.num_ineq());
    assert_eq!(nlp.num_ineq(), 5 * (3 * 2 + 3 * 2 + 9 * 2 + 1));
    let je = nlp.eq_jacobian(&z).unwrap();
    assert_eq!((je.nrows, je.ncols), (nlp.num_eq(), nlp.num_vars()));
}
