//! Stage runners. Every stage reads only the input and files written by
//! earlier stages into the output directory, so any stage can be rerun alone.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter};
use std::path::{Path, PathBuf};

use adafore_core::adaptive::{read_selection_csv, run_selection, write_selection_csv, SelectorMode};
use adafore_core::evaluation::{evaluate, session_spans, write_cum_pl_csv, write_report_csv, PlMode};
use adafore_core::features::{attach_features, read_features_csv, write_features_csv};
use adafore_core::hypotest::{rolling_tests, write_tests_csv};
use adafore_core::market_data::{bracketize, parse_ticks, synth_ticks, write_ticks_csv, BracketSeries, TickRecord, VolumeMode};
use adafore_core::model_zoo::{run_fixed_grid, ForecastTable, ModelInput};
use adafore_core::stationarity::rolling_adf;
use adafore_core::PerfReport;

use crate::config::{Plan, TickSource};
use crate::error::{CliError, CliResult, Stage};
use crate::manifest::{write_manifest, Manifest, PARTIAL_MARKER};
use crate::plotdata::{emit_plotdata, PlotKind};

pub const CONFIG_FILE: &str = "run_config.toml";
pub const TICKS_FILE: &str = "ticks.csv";
pub const BRACKETS_FILE: &str = "brackets.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const ADF_FILE: &str = "adf_scan.csv";
pub const FORECASTS_FILE: &str = "forecasts.csv";
pub const REPORT_FILE: &str = "report.csv";
pub const CUM_PL_FILE: &str = "cum_pl.csv";
pub const SELECTION_DIR: &str = "selections";
pub const TEST_DIR: &str = "tests";
pub const PLOT_DIR: &str = "plots";
/// Report code of the buy-and-hold baseline.
pub const BASELINE_CODE: &str = "BH";

type StageResult<T> = std::result::Result<T, Box<dyn std::error::Error + Send + Sync>>;

fn create(path: &Path) -> StageResult<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    Ok(BufWriter::new(File::create(path)?))
}

fn open(path: &Path) -> StageResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| format!("{}: {e} (run the earlier stages first)", path.display()).into())
}

fn plot(artifact: &Path, kind: PlotKind, target: &Path) -> StageResult<()> {
    let mut w = create(target)?;
    emit_plotdata(open(artifact)?, kind, &mut w)?;
    Ok(())
}

pub fn selection_path(out: &Path, code: &str) -> PathBuf {
    out.join(SELECTION_DIR).join(format!("{code}.csv"))
}

pub fn test_path(out: &Path, code: &str, query: &str) -> PathBuf {
    out.join(TEST_DIR).join(format!("{code}__{query}.csv"))
}

fn load_ticks(plan: &Plan) -> StageResult<Vec<TickRecord>> {
    let (path, mode) = match &plan.source {
        TickSource::File { path, volume } => (path.clone(), *volume),
        TickSource::Synth { .. } => (plan.out.join(TICKS_FILE), VolumeMode::PerEntry),
    };
    let parsed = parse_ticks(open(&path)?, mode)?;
    if parsed.dropped > 0 {
        eprintln!("ingest: dropped {} rows outside session hours", parsed.dropped);
    }
    Ok(parsed.ticks)
}

fn load_brackets(plan: &Plan) -> StageResult<BracketSeries> {
    Ok(BracketSeries::read_csv(open(&plan.out.join(BRACKETS_FILE))?)?)
}

fn load_series_with_features(plan: &Plan) -> StageResult<BracketSeries> {
    let mut series = load_brackets(plan)?;
    read_features_csv(open(&plan.out.join(FEATURES_FILE))?, &mut series)?;
    Ok(series)
}

fn load_forecasts(plan: &Plan) -> StageResult<ForecastTable> {
    Ok(ForecastTable::read_csv(open(&plan.out.join(FORECASTS_FILE))?)?)
}

fn synth(plan: &Plan) -> StageResult<()> {
    let TickSource::Synth { seed, days, params } = &plan.source else {
        return Ok(());
    };
    let ticks = synth_ticks(*seed, *days, params)?;
    write_ticks_csv(create(&plan.out.join(TICKS_FILE))?, &ticks)?;
    Ok(())
}

fn ingest(plan: &Plan) -> StageResult<()> {
    let series = bracketize(&load_ticks(plan)?)?;
    series.write_csv(create(&plan.out.join(BRACKETS_FILE))?)?;
    Ok(())
}

fn features(plan: &Plan) -> StageResult<()> {
    let ticks = load_ticks(plan)?;
    let mut series = load_brackets(plan)?;
    attach_features(&mut series, &ticks)?;
    write_features_csv(create(&plan.out.join(FEATURES_FILE))?, &series)?;
    Ok(())
}

fn adf(plan: &Plan) -> StageResult<()> {
    let series = load_brackets(plan)?;
    let scan = rolling_adf(&series.prices(), plan.config.adf.window, plan.config.adf.d_max)?;
    if scan.outside_grid {
        eprintln!("adf: window {} is outside the usual 12/48/96", scan.w);
    }
    let path = plan.out.join(ADF_FILE);
    scan.write_csv(create(&path)?)?;
    plot(&path, PlotKind::AdfScan, &plan.out.join(PLOT_DIR).join("adf_scan.csv"))
}

fn grid(plan: &Plan) -> StageResult<()> {
    let series = load_series_with_features(plan)?;
    let input = ModelInput::from_series(&series);
    let origins = series.forecast_origins(plan.min_history());
    if origins.is_empty() {
        return Err(format!("no forecast origins after {} brackets of history", plan.min_history()).into());
    }
    let table = run_fixed_grid(&input, &plan.universe, &origins)?;
    eprintln!(
        "grid: {} models x {} origins, {:.1}% usable forecasts",
        table.specs.len(),
        origins.len(),
        100.0 * table.coverage()
    );
    table.write_csv(create(&plan.out.join(FORECASTS_FILE))?)?;
    Ok(())
}

fn select(plan: &Plan) -> StageResult<()> {
    let table = load_forecasts(plan)?;
    let prices = load_brackets(plan)?.prices();
    for cfg in &plan.selectors {
        let records = run_selection(&table, &prices, cfg)?;
        let path = selection_path(&plan.out, &cfg.code());
        write_selection_csv(create(&path)?, &records)?;
        let hist = plan.out.join(PLOT_DIR).join(format!("selection_histogram_{}.csv", cfg.code()));
        plot(&path, PlotKind::SelectionHistogram, &hist)?;
    }
    Ok(())
}

fn report(plan: &Plan) -> StageResult<()> {
    let series = load_brackets(plan)?;
    let prices = series.prices();
    let spans = session_spans(&series);
    let table = load_forecasts(plan)?;
    let n = prices.len();
    let mut reports: Vec<PerfReport> = Vec::new();

    let naive: Vec<Option<f64>> = prices.iter().map(|&p| Some(p)).collect();
    reports.push(evaluate(BASELINE_CODE, &prices, &naive, &table.origins, &spans, PlMode::BuyAndHold)?);

    for cfg in &plan.selectors {
        let records = read_selection_csv(open(&selection_path(&plan.out, &cfg.code()))?)?;
        let mut f = vec![None; n];
        for r in &records {
            f[r.t] = Some(r.forecast);
        }
        let origins: Vec<usize> = records.iter().map(|r| r.t).collect();
        if origins.is_empty() {
            eprintln!("report: {} made no selections", cfg.code());
            continue;
        }
        reports.push(evaluate(&cfg.code(), &prices, &f, &origins, &spans, PlMode::Signal)?);
    }

    if plan.config.evaluation.fixed_models {
        for (h, spec) in table.specs.iter().enumerate() {
            let mut f = vec![None; n];
            for (k, &t) in table.origins.iter().enumerate() {
                f[t] = table.forecast(h, k);
            }
            if f.iter().all(Option::is_none) {
                eprintln!("report: {} produced no forecasts", spec.code());
                continue;
            }
            reports.push(evaluate(&spec.code(), &prices, &f, &table.origins, &spans, PlMode::Signal)?);
        }
    }

    write_report_csv(create(&plan.out.join(REPORT_FILE))?, &reports)?;
    let cum = plan.out.join(CUM_PL_FILE);
    write_cum_pl_csv(create(&cum)?, &reports)?;
    plot(&cum, PlotKind::CumulativePl, &plan.out.join(PLOT_DIR).join("cumulative_pl.csv"))
}

fn test(plan: &Plan) -> StageResult<()> {
    for cfg in &plan.selectors {
        let records = read_selection_csv(open(&selection_path(&plan.out, &cfg.code()))?)?;
        let dependent = cfg.mode == SelectorMode::Group14;
        for q in &plan.queries {
            let results = rolling_tests(&q.query, &plan.universe, &records, q.period, dependent)?;
            if results.is_empty() {
                eprintln!("test: {} has fewer than {} selections for {}", cfg.code(), q.period, q.query.name);
            }
            let path = test_path(&plan.out, &cfg.code(), &q.query.name);
            write_tests_csv(create(&path)?, &results)?;
            let bf = plan.out.join(PLOT_DIR).join(format!("bf_{}__{}.csv", cfg.code(), q.query.name));
            plot(&path, PlotKind::BfSeries, &bf)?;
        }
    }
    Ok(())
}

/// Runs one stage without touching the manifest.
pub fn run_stage(plan: &Plan, stage: Stage) -> CliResult<()> {
    let result = match stage {
        Stage::Synth => synth(plan),
        Stage::Ingest => ingest(plan),
        Stage::Features => features(plan),
        Stage::Adf => adf(plan),
        Stage::Grid => grid(plan),
        Stage::Select => select(plan),
        Stage::Report => report(plan),
        Stage::Test => test(plan),
    };
    result.map_err(|e| CliError::stage(stage, e))
}

/// Runs `stages` in order and refreshes the manifest. On failure the
/// outputs written so far are kept and a `.partial` marker names the stage.
pub fn execute(plan: &Plan, stages: &[Stage]) -> CliResult<Manifest> {
    let first = stages.first().copied().unwrap_or(Stage::Synth);
    let io_err = |e: std::io::Error| CliError::stage(first, e);
    fs::create_dir_all(&plan.out).map_err(io_err)?;
    fs::write(plan.out.join(CONFIG_FILE), plan.config.to_toml()).map_err(io_err)?;
    let marker = plan.out.join(PARTIAL_MARKER);
    for &stage in stages {
        if let Err(e) = run_stage(plan, stage) {
            fs::write(&marker, format!("stage = \"{stage}\"\nerror = {:?}\n", e.to_string())).map_err(io_err)?;
            write_manifest(&plan.out).map_err(io_err)?;
            return Err(e);
        }
    }
    if marker.exists() {
        fs::remove_file(&marker).map_err(io_err)?;
    }
    write_manifest(&plan.out).map_err(|e| CliError::stage(stages.last().copied().unwrap_or(first), e))
}

/// All stages, input to hypothesis tests.
pub fn run_pipeline(plan: &Plan) -> CliResult<Manifest> {
    execute(plan, &Stage::ALL)
}
