use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use pchsat::cf_solver::{self, enumerate_function_space, CfOptions};
use pchsat::instances::chain_formula;
use pchsat::prob_solver::{self, ProbOptions};
use pchsat::reductions::{gen_threesat_causal, CnfInstance};
use pchsat::{Execution, Formula};
use std::hint::black_box;

fn causal_instance() -> Formula {
    let cnf = CnfInstance::new(2, &[vec![1, 2], vec![1, -2], vec![-1, 2], vec![-1, -2]]).unwrap();
    gen_threesat_causal(&cnf)
}

/// Every ordering puts some `Y` before an `X` with `P[[X=1] Y=1] = 0`.
const CYCLE: &str = "domain {0,1}; vars A, B, C;
P[[A=1] B=1] = 0; P[[B=1] C=1] = 0; P[[C=1] A=1] = 0; P[A=1 & B=1 & C=1] >= 1/2;";

fn cf_orderings(c: &mut Criterion) {
    let f: Formula = CYCLE.parse().unwrap();
    let mut group = c.benchmark_group("cf_solver_unsat_cycle");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        let opts = CfOptions { exec, ..Default::default() };
        group.bench_with_input(BenchmarkId::from_parameter(format!("{exec:?}")), &opts, |b, o| {
            b.iter(|| black_box(cf_solver::solve(&f, o).unwrap().is_sat()))
        });
    }
    group.finish();
}

fn cf_lp_columns(c: &mut Criterion) {
    let f = causal_instance();
    let fs = enumerate_function_space(&f, &[0, 1, 2, 3], cf_solver::DEFAULT_FUNCTION_CAP).unwrap();
    let mut group = c.benchmark_group("cf_build_lp_32768_columns");
    group.sample_size(10);
    for exec in [Execution::Sequential, Execution::Parallel] {
        group.bench_function(format!("{exec:?}"), |b| {
            b.iter(|| black_box(cf_solver::build_lp_with(&f, &fs, exec).num_variables()))
        });
    }
    group.finish();
}

fn prob_chain(c: &mut Criterion) {
    let mut group = c.benchmark_group("prob_solver_chain");
    group.sample_size(10);
    for n in [15, 60] {
        let f = chain_formula(n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &f, |b, f| {
            b.iter(|| black_box(prob_solver::solve(f, &ProbOptions::default()).unwrap().is_sat()))
        });
    }
    group.finish();
}

criterion_group!(benches, cf_orderings, cf_lp_columns, prob_chain);
criterion_main!(benches);
