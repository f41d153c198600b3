use daereach::model::{
    build_rotating_masses, rotating_masses_initial_star, rotating_masses_unsafe_m2, rotating_masses_unsafe_x4,
    to_autonomous,
};
use daereach::reachability::{compute_reach, ReachResult, ReachSettings};
use daereach::safety::{verify, UnsafeSpec, VerifyStatus};
use daereach::synthetic::SyntheticDae;
use daereach::{RealMatrix, RealVector, StarSet, TolerancePolicy};
use daereach_oracles::box_vertices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const SAMPLES: usize = 10_000;

fn tol() -> TolerancePolicy {
    TolerancePolicy::default()
}

struct Instance {
    dae: SyntheticDae,
    star: StarSet,
    lo: Vec<f64>,
    hi: Vec<f64>,
    settings: ReachSettings,
}

fn instance(index: usize, seed: u64) -> Instance {
    let dae = SyntheticDae::random(index, 6, 7000 + seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = dae.spec.dynamic_dim;
    let k = d.min(2);
    let z = RealMatrix::from_fn(d, k, |_, _| rng.random_range(-1.0..1.0));
    let lo: Vec<f64> = (0..k).map(|_| rng.random_range(-1.0..0.0)).collect();
    let hi: Vec<f64> = lo.iter().map(|l| l + rng.random_range(0.2..1.0)).collect();
    let star = StarSet::from_box(dae.consistent_basis() * z, &lo, &hi).unwrap();
    Instance { dae, star, lo, hi, settings: ReachSettings::new(0.05, 20).unwrap() }
}

/// Values `g . x(t_j)` for every step, from the analytic solution.
fn trajectory_values(inst: &Instance, g: &RealVector, alpha: &RealVector) -> Vec<f64> {
    let x0 = inst.star.basis() * alpha;
    (0..=inst.settings.num_steps)
        .map(|j| g.dot(&inst.dae.solution(&x0, j as f64 * inst.settings.time_step).unwrap()))
        .collect()
}

/// Dense sampling of the initial box (corners included) against `g . x <= f`.
fn sampling_oracle_unsafe(inst: &Instance, g: &RealVector, f: f64, rng: &mut ChaCha8Rng) -> bool {
    let k = inst.lo.len();
    let mut alphas = box_vertices(&inst.lo, &inst.hi);
    alphas.extend((0..SAMPLES).map(|_| RealVector::from_fn(k, |i, _| rng.random_range(inst.lo[i]..=inst.hi[i]))));
    let flows: Vec<RealMatrix> = (0..=inst.settings.num_steps)
        .map(|j| inst.dae.flow(j as f64 * inst.settings.time_step).unwrap())
        .collect();
    let gv: Vec<RealVector> = flows.iter().map(|phi| (g.transpose() * phi * inst.star.basis()).transpose()).collect();
    alphas.iter().any(|a| gv.iter().any(|row| row.dot(a) <= f))
}

#[test]
fn verdicts_agree_with_dense_sampling() {
    for index in 1..=2 {
        for seed in 0..10 {
            let inst = instance(index, seed);
            let reach = compute_reach(&inst.dae.system, &inst.star, &inst.settings, &tol()).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
            let n = inst.dae.dim();
            let g = RealVector::from_fn(n, |_, _| rng.random_range(-1.0..1.0));
            let corner_values: Vec<f64> = box_vertices(&inst.lo, &inst.hi)
                .iter()
                .flat_map(|a| trajectory_values(&inst, &g, a))
                .collect();
            let vmin = corner_values.iter().copied().fold(f64::INFINITY, f64::min);
            let vmax = corner_values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let range = (vmax - vmin).max(1e-3);
            for f in [vmin - 0.05 * range, vmin + 0.3 * range] {
                let spec = UnsafeSpec::on_full_state(RealMatrix::from_row_slice(1, n, g.as_slice()), RealVector::from_element(1, f)).unwrap();
                let ours = verify(&reach, &spec, &tol()).unwrap();
                let oracle = sampling_oracle_unsafe(&inst, &g, f, &mut rng);
                assert_eq!(ours.status == VerifyStatus::Unsafe, oracle, "index {index} seed {seed} f {f}");
            }
        }
    }
}

fn rotating_masses_reach() -> ReachResult {
    let (sys, inputs) = build_rotating_masses();
    let auto = to_autonomous(&sys, &inputs).unwrap();
    compute_reach(&auto, &rotating_masses_initial_star(), &ReachSettings::from_horizon(0.01, 10.0).unwrap(), &tol()).unwrap()
}

#[test]
fn unsafe_trace_is_a_genuine_simulation() {
    let reach = rotating_masses_reach();
    let out = verify(&reach, &rotating_masses_unsafe_m2(), &tol()).unwrap();
    let alpha = out.alpha_feasible.clone().unwrap();
    let trace = out.unsafe_trace.clone().unwrap();
    let j = out.first_unsafe_step.unwrap();

    // Soundness, re-checked by hand.
    let star0 = &reach.stars[0];
    assert!((star0.predicate_matrix() * &alpha - star0.predicate_bound()).max() <= 1e-9);
    let spec = rotating_masses_unsafe_m2();
    let g = spec.lifted_matrix(4, 6).unwrap();
    assert!((&g * &trace[j] - spec.f()).max() <= 1e-9);

    // The same pipeline run from the single point V(0) alpha.
    let (sys, inputs) = build_rotating_masses();
    let auto = to_autonomous(&sys, &inputs).unwrap();
    let x0 = star0.basis() * &alpha;
    let point = StarSet::from_box(RealMatrix::from_column_slice(6, 1, x0.as_slice()), &[1.0], &[1.0]).unwrap();
    let single = compute_reach(&auto, &point, &reach.settings, &tol()).unwrap();
    for (x, s) in trace.iter().zip(&single.stars) {
        assert!((x - s.basis().column(0)).amax() < 1e-10);
    }
    // Every trace point lies in its step's star with the same coefficients.
    for (x, s) in trace.iter().zip(&reach.stars) {
        assert!((x - s.point(&alpha)).amax() == 0.0);
    }
}

#[test]
fn shrinking_the_predicate_keeps_safe_verdicts_safe() {
    let reach = rotating_masses_reach();
    let safe = verify(&reach, &rotating_masses_unsafe_x4(), &tol()).unwrap();
    assert_eq!(safe.status, VerifyStatus::Safe);
    // Extra row alpha_1 + alpha_2 <= 1.25 shrinks the polytope.
    let star = rotating_masses_initial_star();
    let mut c = RealMatrix::zeros(5, 2);
    c.view_mut((0, 0), (4, 2)).copy_from(star.predicate_matrix());
    c[(4, 0)] = 1.0;
    c[(4, 1)] = 1.0;
    let mut d = RealVector::zeros(5);
    d.rows_mut(0, 4).copy_from(star.predicate_bound());
    d[4] = 1.25;
    let shrunk = StarSet::new(star.basis().clone(), c, d).unwrap();
    let (sys, inputs) = build_rotating_masses();
    let auto = to_autonomous(&sys, &inputs).unwrap();
    let reach2 = compute_reach(&auto, &shrunk, &reach.settings, &tol()).unwrap();
    assert_eq!(verify(&reach2, &rotating_masses_unsafe_x4(), &tol()).unwrap().status, VerifyStatus::Safe);
}
