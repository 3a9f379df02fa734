use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use tvl::c2solver::{decide_sat_global, spectrum_report};
use tvl::config::Config;
use tvl::normalize::to_c2_normal_form;
use tvl::par::ExecMode;
use tvl::parser::parse;
use tvl::semantics::{find_model, OracleOptions};

fn fixture(name: &str) -> String {
    std::fs::read_to_string(format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))).expect("fixture")
}

const MODES: [(&str, ExecMode); 2] = [("sequential", ExecMode::Sequential), ("parallel", ExecMode::Parallel)];

fn spectrum(c: &mut Criterion) {
    let nf = to_c2_normal_form(&parse(&fixture("out_one.tvl")).unwrap()).unwrap().nf;
    let mut group = c.benchmark_group("spectrum_out_one_cap5");
    group.sample_size(10);
    for (label, exec) in MODES {
        let cfg = Config {
            exec,
            ..Config::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| spectrum_report(&nf, 5, cfg))
        });
    }
    group.finish();
}

fn decide(c: &mut Criterion) {
    let nf = to_c2_normal_form(&parse(&fixture("two_relations.tvl")).unwrap()).unwrap().nf;
    let mut group = c.benchmark_group("decide_two_relations");
    group.sample_size(10);
    for (label, exec) in MODES {
        let cfg = Config {
            exec,
            core_cap: 4,
            ..Config::default()
        };
        group.bench_with_input(BenchmarkId::from_parameter(label), &cfg, |b, cfg| {
            b.iter(|| decide_sat_global(&nf, &[], cfg))
        });
    }
    group.finish();
}

fn oracle(c: &mut Criterion) {
    let p = parse(&fixture("cycle_cover.tvl")).unwrap();
    let ts = tvl::typespace::TypeSpace::new(p.vocab.n(), p.vocab.m());
    let mut group = c.benchmark_group("oracle_cycle_cover_size4");
    group.sample_size(10);
    for (label, exec) in MODES {
        let opts = OracleOptions {
            min_size: 4,
            exec,
            ..OracleOptions::up_to(4)
        };
        group.bench_with_input(BenchmarkId::from_parameter(label), &opts, |b, opts| {
            b.iter(|| find_model(ts, &p.sentence, &[], opts))
        });
    }
    group.finish();
}

criterion_group!(benches, spectrum, decide, oracle);
criterion_main!(benches);
