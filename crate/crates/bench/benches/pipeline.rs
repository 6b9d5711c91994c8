use adafore_bench::{series, table};
use adafore_core::adaptive::{run_selection, PenaltyType, SelectorConfig};
use adafore_core::model_zoo::{enumerate_models, fit, ModelInput, ModelSpec};
use adafore_core::stationarity::rolling_adf;
use criterion::{black_box, criterion_group, criterion_main, Criterion};

fn fits(c: &mut Criterion) {
    let s = series(4);
    let input = ModelInput::from_series(&s);
    let t = input.len() - 1;
    let mut g = c.benchmark_group("fit");
    for code in ["M0_96_PDQ110", "M0_96_PDQ111", "M0_96_PDQ212", "M3_96_PDQ111", "M7_96_PDQ110", "M9_96_PDQ111"] {
        let spec: ModelSpec = code.parse().unwrap();
        g.bench_function(code, |b| b.iter(|| fit(black_box(&spec), &input, t)));
    }
    g.finish();
}

fn adf(c: &mut Criterion) {
    let prices = series(10).prices();
    c.bench_function("rolling_adf w=96 d<=2", |b| b.iter(|| rolling_adf(black_box(&prices), 96, 2).unwrap()));
}

fn selection(c: &mut Criterion) {
    let specs: Vec<ModelSpec> = enumerate_models().into_iter().filter(|s| s.group <= 1 && s.w <= 48 && s.d == 1).collect();
    let (t, prices) = table(6, &specs);
    let mut g = c.benchmark_group("select");
    let g13 = SelectorConfig::group13(0.9, 0.5, 0.75);
    let g14 = SelectorConfig::group14(PenaltyType::Two, 0.9, 0.5, 0.75);
    g.bench_function("group13", |b| b.iter(|| run_selection(black_box(&t), &prices, &g13).unwrap()));
    g.bench_function("group14 type 2", |b| b.iter(|| run_selection(black_box(&t), &prices, &g14).unwrap()));
    g.finish();
}

criterion_group!(benches, fits, adf, selection);
criterion_main!(benches);
