use std::time::Instant;

use multicurve::moment::{
    feasibility_check, integrability_weight, kernel_moment_residual, simulate_yperp, solve_jump_kernel, Atom,
    Feasibility, FixedKernel, JumpKernel, KernelObjective, MomentTargets, StaticTargets, SupportGrid,
};
use multicurve::McEstimate;
use proptest::prelude::*;

fn moments_of(atoms: &[(f64, f64)], u: &[f64]) -> (Vec<f64>, f64) {
    let p = u.iter().map(|&ui| atoms.iter().map(|&(xi, w)| w * (ui * xi).exp_m1()).sum()).collect();
    let bound = atoms.iter().map(|&(xi, w)| w * integrability_weight(u, xi)).sum();
    (p, bound)
}

fn check_ray(ray: &[f64], targets: &MomentTargets, grid: &SupportGrid) {
    let mut rhs = targets.p.clone();
    rhs.push(targets.bound.unwrap_or(targets.cap));
    let zb: f64 = ray.iter().zip(&rhs).map(|(z, b)| z * b).sum();
    assert!(zb < 0.0, "z^T p = {zb}");
    for &xi in grid.points.iter().filter(|&&x| x >= -targets.floor && x != 0.0) {
        let za: f64 = ray.iter().zip(targets.moments(xi)).map(|(z, g)| z * g).sum();
        assert!(za >= -1e-9 * ray.iter().map(|z| z.abs()).sum::<f64>(), "z^T g({xi}) = {za}");
    }
}

#[test]
fn negative_target_at_zero_floor_is_infeasible() {
    let targets = MomentTargets { u: vec![1.0], p: vec![-0.01], cap: 100.0, floor: 0.0, bound: None };
    let grid = SupportGrid::default_for(&targets).unwrap();
    match feasibility_check(&targets, &grid).unwrap() {
        Feasibility::Infeasible { ray } => check_ray(&ray, &targets, &grid),
        f => panic!("expected infeasible, got {f:?}"),
    }
    assert!(solve_jump_kernel(&targets, &grid, KernelObjective::MinTotalMass).is_err());
}

#[test]
fn negative_target_is_feasible_with_room_below() {
    let targets = MomentTargets { u: vec![1.0], p: vec![-0.01], cap: 100.0, floor: 0.5, bound: None };
    let grid = SupportGrid::default_for(&targets).unwrap();
    assert!(feasibility_check(&targets, &grid).unwrap().is_feasible());
    let k = solve_jump_kernel(&targets, &grid, KernelObjective::MinTotalMass).unwrap();
    assert!(k.atoms.iter().all(|a| a.xi >= -0.5 && a.w >= 0.0));
    assert!(kernel_moment_residual(&k, &targets).iter().all(|r| r.abs() <= 1e-8));
}

#[test]
fn single_atom_recovered() {
    let u = vec![2.0];
    let grid = SupportGrid::log_spaced(0.0, 2.5, 400).unwrap();
    // With one moment plus the integrability row, a single atom is the unique
    // representation only on an extreme ray of the moment cone: the grid point
    // minimising g(xi) / (e^{u xi} - 1).
    let ratio = |xi: f64| integrability_weight(&u, xi) / (u[0] * xi).exp_m1();
    let xi0 = grid.points.iter().copied().fold(f64::NAN, |a, b| if a.is_nan() || ratio(b) < ratio(a) { b } else { a });
    let (p, bound) = moments_of(&[(xi0, 2.0)], &u);
    let targets = MomentTargets { u, p, cap: 1e6, floor: 0.0, bound: Some(bound) };
    match feasibility_check(&targets, &grid).unwrap() {
        Feasibility::Feasible { weights } => assert!(weights.iter().all(|&w| w >= 0.0)),
        f => panic!("{f:?}"),
    }
    for objective in [KernelObjective::MinTotalMass, KernelObjective::MinIntegrabilityMass] {
        let k = solve_jump_kernel(&targets, &grid, objective).unwrap();
        assert!(kernel_moment_residual(&k, &targets).iter().all(|r| r.abs() <= 1e-8));
        assert_eq!(k.atoms.len(), 1, "{k:?}");
        assert_eq!(k.atoms[0].xi, xi0);
        assert!((k.atoms[0].w - 2.0).abs() <= 1e-9, "{k:?}");
    }
}

#[test]
fn ratio_condition_violation_is_infeasible() {
    let u = vec![1.0, 2.0];
    let p1 = 0.02;
    let targets = MomentTargets { u: u.clone(), p: vec![p1, 0.95 * 2.0 * p1], cap: 1e6, floor: 0.0, bound: None };
    for size in [400, 800, 1600] {
        let grid = SupportGrid::log_spaced(0.0, 5.0, size).unwrap();
        match feasibility_check(&targets, &grid).unwrap() {
            Feasibility::Infeasible { ray } => check_ray(&ray, &targets, &grid),
            f => panic!("grid {size}: {f:?}"),
        }
    }
    let ok = MomentTargets { p: vec![p1, 2.5 * p1], ..targets };
    assert!(feasibility_check(&ok, &SupportGrid::default_for(&ok).unwrap()).unwrap().is_feasible());
}

#[test]
fn three_atom_synthesis_reproduced() {
    let u = vec![0.5, 1.0];
    for (floor, atoms) in
        [(0.0, vec![(0.03, 1.5), (0.4, 0.7), (1.7, 0.2)]), (0.3, vec![(-0.25, 0.8), (0.11, 2.0), (0.9, 0.4)])]
    {
        let (p, bound) = moments_of(&atoms, &u);
        let targets = MomentTargets { u: u.clone(), p, cap: 1e3, floor, bound: Some(bound) };
        let grid = SupportGrid::default_for(&targets).unwrap();
        let start = Instant::now();
        let k = solve_jump_kernel(&targets, &grid, KernelObjective::MinTotalMass).unwrap();
        assert!(start.elapsed().as_millis() < 50, "solve took {:?}", start.elapsed());
        let r = kernel_moment_residual(&k, &targets);
        assert_eq!(r.len(), 3);
        assert!(r.iter().all(|x| x.abs() <= 1e-8), "{r:?}");
        assert!(k.atoms.len() <= 3);
        assert!(k.atoms.iter().all(|a| a.xi >= -floor && a.w >= 1e-14));
    }
}

#[test]
fn integrability_rule_stays_below_cap() {
    let u = vec![1.0, 3.0];
    let (p, _) = moments_of(&[(0.1, 1.0), (0.5, 0.3)], &u);
    let targets = MomentTargets { u, p, cap: 50.0, floor: 0.0, bound: None };
    let k = solve_jump_kernel(&targets, &SupportGrid::default_for(&targets).unwrap(), KernelObjective::MinTotalMass)
        .unwrap();
    assert!(k.bound <= 50.0 + 1e-8);
    assert!(kernel_moment_residual(&k, &targets).iter().all(|x| x.abs() <= 1e-8));
}

#[test]
fn zero_targets_give_empty_kernel() {
    let targets = MomentTargets { u: vec![1.0, 2.0], p: vec![0.0, 0.0], cap: 1.0, floor: 0.0, bound: Some(0.0) };
    let k = solve_jump_kernel(&targets, &SupportGrid::default_for(&targets).unwrap(), KernelObjective::MinTotalMass)
        .unwrap();
    assert!(k.is_empty());
    assert_eq!(kernel_moment_residual(&JumpKernel::default(), &targets), vec![0.0, 0.0, 0.0]);
}

#[test]
fn residual_is_linear_in_weights() {
    let u = vec![1.0, 2.0];
    let targets = MomentTargets { u: u.clone(), p: vec![0.1, 0.3], cap: 10.0, floor: 0.0, bound: Some(1.0) };
    let base = JumpKernel { atoms: vec![Atom { xi: 0.2, w: 0.5 }, Atom { xi: 0.7, w: 0.1 }], ..Default::default() };
    let eps = 1e-3;
    let mut bumped = base.clone();
    bumped.atoms[0].w += eps;
    let (r0, r1) = (kernel_moment_residual(&base, &targets), kernel_moment_residual(&bumped, &targets));
    for ((a, b), g) in r0.iter().zip(&r1).zip(targets.moments(0.2)) {
        assert!((b - a - eps * g).abs() <= 1e-15);
    }
}

#[test]
fn single_atom_poisson_count() {
    let kernel = JumpKernel { atoms: vec![Atom { xi: 0.05, w: 2.0 }], ..Default::default() };
    let paths = simulate_yperp(&FixedKernel(kernel), 0.0, 1.0, 0.01, 100_000, 11, &[]).unwrap();
    let est = McEstimate::from_samples(paths.iter().map(|p| p.jumps as f64)).unwrap();
    assert!(est.z_score(2.0) <= 3.0, "{est:?}");
    assert!(paths.iter().all(|p| p.values.iter().all(|&y| y >= 0.0)));
}

#[test]
fn zero_kernel_gives_constant_path() {
    let paths = simulate_yperp(&FixedKernel(JumpKernel::default()), 0.3, 1.0, 0.1, 10, 1, &[1.0]).unwrap();
    assert!(paths.iter().all(|p| p.values.iter().all(|&y| y == 0.3) && p.jumps == 0));
}

#[test]
fn exponential_compensator_is_a_martingale() {
    let u = vec![1.0, 2.0];
    let (p, _) = moments_of(&[(0.2, 0.5), (0.6, 0.1)], &u);
    let family = StaticTargets::new(u.clone(), p, 1e3, 400, KernelObjective::MinTotalMass);
    let paths = simulate_yperp(&family, 0.0, 1.0, 0.05, 40_000, 5, &u).unwrap();
    for (i, &ui) in u.iter().enumerate() {
        let est =
            McEstimate::from_samples(paths.iter().map(|p| (ui * p.values.last().unwrap() - p.compensators[i]).exp()))
                .unwrap();
        assert!(est.z_score(1.0) <= 3.0, "u={ui}: {est:?}");
    }
    assert!(paths.iter().all(|p| p.values.iter().all(|&y| y >= 0.0)));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn solved_kernels_respect_invariants(
        w in proptest::collection::vec(0.05f64..2.0, 3),
        xi in proptest::collection::vec(0.01f64..1.5, 3),
        floor in 0.0f64..0.5,
    ) {
        let u = vec![0.7, 1.3];
        let atoms: Vec<(f64, f64)> = xi.iter().copied().zip(w.iter().copied()).collect();
        let (p, _) = moments_of(&atoms, &u);
        let targets = MomentTargets { u, p, cap: 1e4, floor, bound: None };
        let k = solve_jump_kernel(&targets, &SupportGrid::default_for(&targets).unwrap(), KernelObjective::MinTotalMass).unwrap();
        prop_assert!(k.atoms.len() <= 3);
        prop_assert!(k.atoms.iter().all(|a| a.w >= 0.0 && a.xi >= -floor));
        prop_assert!(kernel_moment_residual(&k, &targets).iter().all(|r| r.abs() <= 1e-8));
        prop_assert!(k.bound <= 1e4 + 1e-8);
    }
}
