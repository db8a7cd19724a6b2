//! The mean-field and Gaussian limits checked where they are known to be
//! accurate: the complete graph, with the per-edge rate scaled by 1/(N-1).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rumorlab::engine::{run_replicas, InitialCondition, ReplicaSet, SimConfig, YyRule};
use rumorlab::fluctuations::{
    center_and_rescale, eval_noise_covariance, moment_stats, solve_fclt, CovarianceModel, NoiseSampler, Reference,
};
use rumorlab::meanfield::{solve_flln, solve_flln_survival_weighted, MeanFieldProblem};
use rumorlab::qtgraph::{build_family, Family};
use rumorlab::stifling::StiflingLaw;

const N: usize = 600;
const Y0: f64 = 0.05;

fn law() -> StiflingLaw {
    StiflingLaw::weibull(2.0, 5.0).unwrap()
}

fn lambda() -> f64 {
    2.0 / (N - 1) as f64
}

fn problem(t_max: f64) -> MeanFieldProblem {
    MeanFieldProblem::from_fractions(
        Family::Complete(N).blueprint(),
        lambda(),
        law(),
        &[[1.0 - Y0, Y0, 0.0]],
        t_max,
        0.01,
    )
    .unwrap()
}

fn replicas(t_max: f64, replicas: usize) -> ReplicaSet {
    let g = build_family(Family::Complete(N)).unwrap();
    let cfg = SimConfig {
        lambda: lambda(),
        law: law(),
        t_max,
        grid_dt: 0.05,
        initial: InitialCondition::spreaders(1, Y0),
        seed: 3,
        yy_rule: YyRule::BothStifle,
        debug_checks: false,
    };
    run_replicas(&g, &cfg, replicas).unwrap()
}

#[test]
fn survival_weighted_closure_tracks_the_simulation() {
    let set = replicas(20.0, 200);
    let mean = set.mean();
    let sol = solve_flln_survival_weighted(&problem(20.0)).unwrap();
    let mut err = 0.0f64;
    for (i, row) in mean.iter().enumerate() {
        let j = sol.index_of(i as f64 * 0.05).unwrap();
        for s in 0..3 {
            err = err.max((row[0][s] - sol.values[j][0][s]).abs());
        }
    }
    assert!(err < 0.02, "sup error {err}");

    // the stated closure agrees early, then leaves the simplex while the
    // simulation does not
    let early = solve_flln(&problem(2.0)).unwrap();
    for i in 0..=40 {
        let j = early.index_of(i as f64 * 0.05).unwrap();
        for s in 0..3 {
            assert!((mean[i][0][s] - early.values[j][0][s]).abs() < 0.02);
        }
    }
    let late = solve_flln(&problem(8.0)).unwrap();
    assert!(late.values.iter().any(|r| r[0][1] < -1e-3));
    assert!(mean.iter().all(|r| r[0][1] >= 0.0));
}

#[test]
fn limit_variance_matches_the_simulation() {
    let t = 2.0;
    let set = replicas(t, 600);
    let fl = center_and_rescale(&set.trajectories, Reference::EmpiricalMean).unwrap();
    let i = fl.index_of(t).unwrap();
    let emp_z = moment_stats(&fl.total(i, 2)).unwrap().variance;
    let emp_y = moment_stats(&fl.total(i, 1)).unwrap().variance;

    let prob = problem(t);
    let sol = solve_flln(&prob).unwrap();
    let times = sol.times();
    let cov = eval_noise_covariance(&sol, &prob.blueprint, prob.lambda, &prob.law, &times, CovarianceModel::MarkedPoisson)
        .unwrap();
    let sampler = NoiseSampler::new(&cov).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let last = times.len() - 1;
    let (mut zs, mut ys) = (Vec::new(), Vec::new());
    for _ in 0..1500 {
        let noise = sampler.sample(&mut rng);
        let s = solve_fclt(&cov, &noise, &[(0.0, 0.0)], &prob.blueprint, prob.lambda, &prob.law, &sol).unwrap();
        zs.push(s.total(last, 2));
        ys.push(s.total(last, 1));
    }
    let lim_z = moment_stats(&zs).unwrap().variance;
    let lim_y = moment_stats(&ys).unwrap().variance;
    // 600 replicas give roughly 6% relative error on a variance
    assert!((lim_z / emp_z - 1.0).abs() < 0.25, "Z: limit {lim_z} simulated {emp_z}");
    assert!((lim_y / emp_y - 1.0).abs() < 0.25, "Y: limit {lim_y} simulated {emp_y}");
}
