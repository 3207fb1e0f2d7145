use std::hint::black_box;

use cma_core::mdp::{value_iteration, SolverConfig};
use cma_core::model::{BatteryHealth, Mdp};
use cma_core::policy::{Policy, PolicyKind};
use cma_core::pomdp::{belief_update, build_observation_model, initial_belief, pbvi_solve, BeliefSet, PbviConfig};
use cma_core::sim::{run_batch, SimConfig};
use criterion::{criterion_group, criterion_main, Criterion};

fn solvers(c: &mut Criterion) {
    let mdp = Mdp::default_model();
    c.bench_function("value_iteration", |b| {
        b.iter(|| value_iteration(black_box(&mdp), &SolverConfig::default()).unwrap())
    });

    let obs = build_observation_model(0.8).unwrap();
    let small = PbviConfig { num_expansions: 3, backups_per_expansion: 5, max_sweeps: 30, ..PbviConfig::default() };
    let mut group = c.benchmark_group("pbvi");
    group.sample_size(10);
    group.bench_function("p0.8_small", |b| {
        b.iter(|| pbvi_solve(black_box(&mdp), &obs, &BeliefSet::cohorts(), &small).unwrap())
    });
    group.finish();

    let prior = initial_belief(BatteryHealth::Medium);
    c.bench_function("belief_update", |b| {
        b.iter(|| belief_update(black_box(&prior), 0, 3, &mdp.transitions, &obs).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let mdp = Mdp::default_model();
    let vf = value_iteration(&mdp, &SolverConfig::default()).unwrap();
    let obs = build_observation_model(0.8).unwrap();
    let mut group = c.benchmark_group("run_batch_1000");
    group.sample_size(10);
    for kind in [PolicyKind::TrueMdp, PolicyKind::ObsMdp, PolicyKind::MapMdp] {
        let policy = Policy::new(kind, &mdp, Some(&vf), Some(&obs), None).unwrap();
        let config = SimConfig { n_episodes: 1000, p_obs: 0.8, policy: kind, ..SimConfig::default() };
        group.bench_function(kind.name(), |b| b.iter(|| run_batch(&config, &mdp, &obs, &policy).unwrap()));
    }
    group.finish();
}

criterion_group!(benches, solvers, simulation);
criterion_main!(benches);
