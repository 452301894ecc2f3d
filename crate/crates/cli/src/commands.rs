//! One function per subcommand.

use std::path::Path;

use anyhow::{Context, Result};
use chrono::{DateTime, Utc};
use rampkit_core::attention::bench;
use rampkit_core::csv_io::{POWER, WIND_SPEED};
use rampkit_core::forecast::{
    assemble_features, fit_predict, fit_predict_linear, rank_nwp_features, top_nwp, History, Persistence,
};
use rampkit_core::matching::{match_periods, MatchRecord};
use rampkit_core::metrics::evaluate;
use rampkit_core::pipeline::{ramp_stage, PipelineConfig};
use rampkit_core::poles::{vmd_ic, ExtremaSet, Extremum, ExtremumKind, SelectionParams};
use rampkit_core::ramp::{boundaries, segment_at, Definition, RampEvent};
use rampkit_core::series::{FeatureTable, SeriesKind, WindSeries};
use rampkit_core::synth::{synth_history, synth_scenario};
use serde::{Deserialize, Serialize};

use crate::config::{Model, RunConfig};
use crate::files::{self, input, load_table, read_json, read_rows, save_table, write_json, write_rows};
use crate::{Cli, Command, DenoiseArgs, UsageError};

pub fn run(cli: &Cli) -> Result<()> {
    let mut config = RunConfig::load(cli.config.as_deref())?;
    apply_overrides(&mut config, &cli.command);
    config.validate().map_err(|e| UsageError(format!("{e:#}")))?;
    let out = cli.out.as_path();
    match &cli.command {
        Command::Synth(_) => synth(&config, out),
        Command::Decompose(a) => decompose(&config, out, a.input.as_ref(), a.keep_all),
        Command::Ramps(a) => ramps(&config, out, a.input.as_ref()),
        Command::Match(a) => match_stage(&config, out, a.history.as_ref()),
        Command::Forecast(a) => forecast(&config, out, a.input.as_ref(), a.history.as_ref()),
        Command::Evaluate(a) => evaluate_stage(&config, out, a.forecast.as_ref()),
        Command::AttentionBench(a) => {
            let rows = a
                .l
                .iter()
                .map(|&l| bench(l, a.d, a.s, a.seeds, a.factor))
                .collect::<rampkit_core::Result<Vec<_>>>()?;
            println!("{}", serde_json::to_string_pretty(&rows)?);
            Ok(())
        }
    }
}

fn set<T>(slot: &mut T, v: &Option<T>)
where
    T: Clone,
{
    if let Some(v) = v {
        *slot = v.clone();
    }
}

fn apply_denoise(p: &mut PipelineConfig, a: &DenoiseArgs) {
    set(&mut p.vmd.k, &a.k);
    set(&mut p.vmd.alpha, &a.alpha);
    set(&mut p.vmd.max_iter, &a.max_iter);
    set(&mut p.selection.ell, &a.ell);
    set(&mut p.selection.tau_rate, &a.tau_rate);
}

fn apply_overrides(c: &mut RunConfig, command: &Command) {
    let p = &mut c.pipeline;
    match command {
        Command::Synth(a) => {
            set(&mut c.seed, &a.seed);
            set(&mut c.scenario.length, &a.length);
            if a.history_length.is_some() {
                c.scenario.history_length = a.history_length;
            }
        }
        Command::Decompose(a) => apply_denoise(p, &a.denoise),
        Command::Ramps(a) => {
            set(&mut p.definition, &a.definition);
            set(&mut p.p_val, &a.p_val);
            if a.rho_threshold.is_some() {
                p.rho_threshold = a.rho_threshold;
            }
            set(&mut p.split, &a.split);
        }
        Command::Match(a) => {
            set(&mut p.matching.radius, &a.radius);
            set(&mut p.matching.stride, &a.stride);
            apply_denoise(p, &a.denoise);
        }
        Command::Forecast(a) => {
            set(&mut c.model, &a.model);
            set(&mut p.horizon, &a.horizon);
            set(&mut p.lags, &a.lags);
            set(&mut p.ridge_lambda, &a.lambda);
            set(&mut p.split, &a.split);
            set(&mut p.capacity, &a.capacity);
            set(&mut p.nwp_k, &a.nwp_k);
        }
        Command::Evaluate(a) => set(&mut p.capacity, &a.capacity),
        Command::AttentionBench(_) => {}
    }
}

fn synth(c: &RunConfig, out: &Path) -> Result<()> {
    let scenario = synth_scenario(&c.scenario, c.seed)?;
    let history = match c.scenario.history_length {
        Some(_) => Some(synth_history(&c.scenario, c.seed)?),
        None => None,
    };
    files::create_dir(out)?;
    save_table(&scenario.table, &out.join(files::SCENARIO))?;
    write_json(&scenario.annotations, &out.join(files::ANNOTATIONS))?;
    if let Some(h) = history {
        save_table(&h.table, &out.join(files::HISTORY))?;
    }
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
struct PoleRow {
    index: usize,
    timestamp: String,
    value: f64,
    kind: ExtremumKind,
    /// Survived adaptive selection.
    kept: bool,
}

#[derive(Debug, Serialize)]
struct DecomposeSummary {
    k: usize,
    alpha: f64,
    ell: f64,
    tau_rate: Option<f64>,
    keep_all: bool,
    iterations: usize,
    residual_norm: f64,
    center_freqs: Vec<f64>,
    /// One-based, matching the `mode_*` columns.
    kept_modes: Vec<usize>,
    rates: Vec<Option<f64>>,
    counts: Vec<usize>,
    n_original: usize,
    width: f64,
    n_extrema: usize,
    n_selected: usize,
}

fn derived(clock: &WindSeries, values: Vec<f64>, label: String) -> Result<WindSeries> {
    Ok(clock.with_values(values, SeriesKind::Derived)?.relabel(label))
}

fn decompose(c: &RunConfig, out: &Path, explicit: Option<&std::path::PathBuf>, keep_all: bool) -> Result<()> {
    let path = input(explicit, out, files::SCENARIO, "synth")?;
    let table = load_table(&path)?;
    let speed = table.require(WIND_SPEED)?;
    let mut selection = c.pipeline.selection;
    if keep_all {
        selection = SelectionParams {
            tau_rate: f64::INFINITY,
            ..selection
        };
    }
    let res = vmd_ic(speed, &c.pipeline.vmd, &selection)?;

    let mut columns = Vec::with_capacity(res.modes.k() + 1);
    for (i, m) in res.modes.modes.iter().enumerate() {
        columns.push(derived(speed, m.clone(), format!("mode_{}", i + 1))?);
    }
    columns.push(derived(speed, res.recon.values().to_vec(), "recon".into())?);
    save_table(&FeatureTable::new(columns)?, &out.join(files::MODES))?;
    let recon = derived(speed, res.recon.values().to_vec(), "recon".into())?;
    save_table(&FeatureTable::new(vec![recon])?, &out.join(files::RECON))?;

    let kept: Vec<usize> = res.extrema.indices();
    let poles: Vec<PoleRow> = res
        .all_extrema
        .points
        .iter()
        .map(|p| PoleRow {
            index: p.index,
            timestamp: rampkit_core::csv_io::format_timestamp(speed.time_at(p.index)),
            value: p.value,
            kind: p.kind,
            kept: kept.binary_search(&p.index).is_ok(),
        })
        .collect();
    write_rows(&poles, &out.join(files::POLES))?;

    let finite = |x: f64| x.is_finite().then_some(x);
    let summary = DecomposeSummary {
        k: c.pipeline.vmd.k,
        alpha: c.pipeline.vmd.alpha,
        ell: selection.ell,
        tau_rate: finite(selection.tau_rate),
        keep_all,
        iterations: res.modes.iterations,
        residual_norm: res.modes.residual_norm,
        center_freqs: res.modes.center_freqs.clone(),
        kept_modes: res.screening.kept.iter().map(|k| k + 1).collect(),
        rates: res.screening.rates.iter().map(|&r| finite(r)).collect(),
        counts: res.screening.counts.clone(),
        n_original: res.screening.n_original,
        width: res.width,
        n_extrema: res.all_extrema.len(),
        n_selected: res.extrema.len(),
    };
    write_json(&summary, &out.join(files::DECOMPOSE))
}

#[derive(Debug, Serialize, Deserialize)]
struct RampFile {
    definition: Definition,
    rho_threshold: f64,
    p_val: f64,
    /// Segment boundary indices into the scenario.
    boundaries: Vec<usize>,
    events: Vec<RampEvent>,
}

#[derive(Debug, Serialize)]
struct RampRow<'a> {
    segment_id: usize,
    start_time: String,
    end_time: String,
    definition: &'a str,
    rho: f64,
    direction: &'a str,
    fired: bool,
}

fn stamp(t: DateTime<Utc>) -> String {
    rampkit_core::csv_io::format_timestamp(t)
}

fn load_recon(out: &Path, scenario: &FeatureTable) -> Result<WindSeries> {
    let recon_table = load_table(&input(None, out, files::RECON, "decompose")?)?;
    let recon = recon_table.require("recon")?.clone();
    let power = scenario.require(POWER)?;
    if recon.len() != power.len() || !recon.same_clock(power) {
        return Err(UsageError(format!("{} does not match the scenario clock", files::RECON)).into());
    }
    Ok(recon)
}

fn ramps(c: &RunConfig, out: &Path, explicit: Option<&std::path::PathBuf>) -> Result<()> {
    let scenario = load_table(&input(explicit, out, files::SCENARIO, "synth")?)?;
    let recon = load_recon(out, &scenario)?;
    let poles: Vec<PoleRow> = read_rows(&input(None, out, files::POLES, "decompose")?)?;
    let mut points = Vec::new();
    for p in poles.iter().filter(|p| p.kept) {
        if p.index >= recon.len() {
            return Err(UsageError(format!("pole index {} beyond the series", p.index)).into());
        }
        points.push(Extremum {
            index: p.index,
            value: p.value,
            kind: p.kind,
        });
    }
    let extrema = ExtremaSet {
        points,
        source_len: recon.len(),
    };
    let stage = ramp_stage(&recon, &extrema, scenario.require(POWER)?, &c.pipeline)?;
    let rows: Vec<RampRow> = stage
        .events
        .iter()
        .map(|e| RampRow {
            segment_id: e.segment,
            start_time: stamp(recon.time_at(e.start_idx)),
            end_time: stamp(recon.time_at(e.end_idx)),
            definition: e.definition.as_str(),
            rho: e.rho,
            direction: e.direction.as_str(),
            fired: e.fired,
        })
        .collect();
    write_rows(&rows, &out.join(files::RAMPS_CSV))?;
    let file = RampFile {
        definition: c.pipeline.definition,
        rho_threshold: stage.rho_threshold,
        p_val: c.pipeline.p_val,
        boundaries: boundaries(recon.len(), &extrema),
        events: stage.events,
    };
    write_json(&file, &out.join(files::RAMPS_JSON))
}

#[derive(Debug, Serialize)]
struct MatchRow {
    segment_id: usize,
    seg_start_time: String,
    seg_end_time: String,
    hist_start_time: String,
    dtw_distance: f64,
    wind_str: f64,
    wind_tre: f64,
    omega: f64,
}

fn match_stage(c: &RunConfig, out: &Path, history: Option<&std::path::PathBuf>) -> Result<()> {
    let scenario = load_table(&input(None, out, files::SCENARIO, "synth")?)?;
    let recon = load_recon(out, &scenario)?;
    let ramps: RampFile = read_json(&input(None, out, files::RAMPS_JSON, "ramps")?)?;
    let hist = load_table(&input(history, out, files::HISTORY, "synth")?)?;
    hist.require(POWER)?;
    let hist_speed = hist.require(WIND_SPEED)?;

    let segments = segment_at(&recon, &ramps.boundaries)?;
    let denoised = vmd_ic(hist_speed, &c.pipeline.vmd, &c.pipeline.selection).context("denoising history")?;
    let matches = match_periods(&segments, denoised.recon.values(), &c.pipeline.matching)?;

    save_table(
        &FeatureTable::new(vec![derived(hist_speed, denoised.recon.values().to_vec(), "recon".into())?])?,
        &out.join(files::HISTORY_RECON),
    )?;
    let rows: Vec<MatchRow> = matches
        .iter()
        .map(|m| MatchRow {
            segment_id: m.segment_index,
            seg_start_time: stamp(recon.time_at(m.seg_start)),
            seg_end_time: stamp(recon.time_at(m.seg_end)),
            hist_start_time: stamp(hist_speed.time_at(m.hist_start)),
            dtw_distance: m.dtw_distance,
            wind_str: m.wind_str,
            wind_tre: m.wind_tre,
            omega: m.omega,
        })
        .collect();
    write_rows(&rows, &out.join(files::MATCHES_CSV))?;
    write_json(&matches, &out.join(files::MATCHES_JSON))
}

#[derive(Debug, Serialize)]
struct ForecastFile<'a> {
    model: &'a str,
    features: &'a [String],
    nwp: &'a [String],
    #[serde(flatten)]
    report: &'a rampkit_core::forecast::ForecastReport,
}

fn forecast(
    c: &RunConfig,
    out: &Path,
    explicit: Option<&std::path::PathBuf>,
    history: Option<&std::path::PathBuf>,
) -> Result<()> {
    let p = &c.pipeline;
    let table = load_table(&input(explicit, out, files::SCENARIO, "synth")?)?;
    let nwp = top_nwp(&rank_nwp_features(&table, POWER)?, p.nwp_k);
    let full = c.model == Model::Ridge;
    let features = p.features(full, full, nwp.clone());
    let matrix = if full {
        let ramps: RampFile = read_json(&input(None, out, files::RAMPS_JSON, "ramps")?)?;
        let matches: Vec<MatchRecord> = read_json(&input(None, out, files::MATCHES_JSON, "match")?)?;
        let hist = load_table(&input(history, out, files::HISTORY, "synth")?)?;
        let h = History {
            speed: hist.require(WIND_SPEED)?.values(),
            power: hist.require(POWER)?.values(),
        };
        assemble_features(&matches, &ramps.events, &table, Some(h), &features)?
    } else {
        assemble_features(&[], &[], &table, None, &features)?
    };
    let report = match c.model {
        Model::Persistence => fit_predict(&mut Persistence, &matrix, p.split, p.capacity)?,
        Model::Ridge | Model::RidgeBare => fit_predict_linear(&matrix, p.ridge_lambda, p.split, p.capacity)?,
    };
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let path = out.join(files::FORECAST_CSV);
    std::fs::write(&path, csv).with_context(|| format!("writing {}", path.display()))?;
    let file = ForecastFile {
        model: c.model.as_str(),
        features: &matrix.names,
        nwp: &nwp,
        report: &report,
    };
    write_json(&file, &out.join(files::FORECAST_JSON))
}

fn evaluate_stage(c: &RunConfig, out: &Path, explicit: Option<&std::path::PathBuf>) -> Result<()> {
    let table = load_table(&input(explicit, out, files::FORECAST_CSV, "forecast")?)?;
    let actual = table.require("actual")?.values();
    let predicted = table.require("predicted")?.values();
    let report = evaluate(predicted, actual, c.pipeline.capacity)?;
    write_json(&report, &out.join(files::EVAL))?;
    print!("{}", report.table());
    Ok(())
}
