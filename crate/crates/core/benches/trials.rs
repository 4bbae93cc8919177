use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};

use flamesmith::dsl::{parse_predicate, parse_spec, parse_stmt};
use flamesmith::interp::{input_state, run, Inputs};
use flamesmith::invariants::Mode;
use flamesmith::par::{map_slice, Strategy};
use flamesmith::sample::{hoare_test, implies, TrialConfig};
use flamesmith::spec::{Context, Role};
use flamesmith::worksheet::derive;

const POLYEVAL: &str = "op polyeval
var y : scalar, out
var a : vector(n), in
var x : scalar, in
var k : scalar, index
pre: 0 <= n
post: y = sum(i, 0, n-1, a[i] * x^i)
";

const STRATEGIES: [(&str, Strategy); 2] = [("sequential", Strategy::Sequential), ("parallel", Strategy::Parallel)];

fn ctx() -> Context {
    Context::default()
        .with_vector("a", "n")
        .with("x", Role::In)
        .with("y", Role::Out)
        .with("k", Role::Index)
}

/// Preservation of the Horner invariant, tested on random states.
fn bench_hoare(c: &mut Criterion) {
    let inv = parse_predicate("y = sum(i, k, n - 1, a[i] * x^(i - k)) && 0 <= k && k <= n").unwrap();
    let pre = inv.and(&parse_predicate("0 < k").unwrap());
    let body = parse_stmt("y := a[k - 1] + y * x; k := k - 1").unwrap();
    let mut group = c.benchmark_group("hoare_test");
    for trials in [250u64, 1000, 4000] {
        for (name, strategy) in STRATEGIES {
            let cfg = TrialConfig { trials, seed: 42, strategy };
            group.bench_with_input(BenchmarkId::new(name, trials), &cfg, |b, cfg| {
                b.iter(|| black_box(hoare_test(&ctx(), &pre, &body, &inv, cfg).unwrap()));
            });
        }
    }
    group.finish();
}

/// The exit implication of the Horner loop.
fn bench_implies(c: &mut Criterion) {
    let p = parse_predicate("y = sum(i, k, n - 1, a[i] * x^(i - k)) && 0 <= k && k <= n && k <= 0").unwrap();
    let q = parse_predicate("y = sum(i, 0, n - 1, a[i] * x^i)").unwrap();
    let mut group = c.benchmark_group("implies");
    for (name, strategy) in STRATEGIES {
        let cfg = TrialConfig { trials: 1000, seed: 42, strategy };
        group.bench_function(name, |b| b.iter(|| black_box(implies(&ctx(), &p, &q, &cfg))));
    }
    group.finish();
}

/// Runs the derived algorithm on a batch of random inputs.
fn bench_runs(c: &mut Criterion) {
    let spec = parse_spec(POLYEVAL).unwrap();
    let ws = derive(&spec, Mode::Flame, 5).unwrap().worksheet;
    let inputs: Vec<_> = Inputs::new(42).take(1000).map(|(a, x)| input_state(&spec, &a, &x)).collect();
    let mut group = c.benchmark_group("run_batch");
    for (name, strategy) in STRATEGIES {
        group.bench_function(name, |b| {
            b.iter(|| black_box(map_slice(&inputs, strategy, |s| run(&ws, s, true).is_ok())));
        });
    }
    group.finish();
}

criterion_group!(benches, bench_hoare, bench_implies, bench_runs);
criterion_main!(benches);
