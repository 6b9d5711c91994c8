//! Shared inputs for the benchmarks.

use adafore_core::features::attach_features;
use adafore_core::market_data::{bracketize, synth_ticks, SynthParams};
use adafore_core::model_zoo::{run_fixed_grid, ForecastTable, ModelInput, ModelSpec};
use adafore_core::BracketSeries;

/// Synthetic bracket series with features attached.
pub fn series(days: usize) -> BracketSeries {
    let ticks = synth_ticks(7, days, &SynthParams::default()).expect("synthetic ticks");
    let mut s = bracketize(&ticks).expect("brackets");
    attach_features(&mut s, &ticks).expect("features");
    s
}

/// A small grid table to feed the selectors.
pub fn table(days: usize, specs: &[ModelSpec]) -> (ForecastTable, Vec<f64>) {
    let s = series(days);
    let input = ModelInput::from_series(&s);
    let max_w = specs.iter().map(|m| m.w).max().unwrap_or(0);
    let t = run_fixed_grid(&input, specs, &s.forecast_origins(max_w)).expect("grid");
    (t, s.prices())
}
