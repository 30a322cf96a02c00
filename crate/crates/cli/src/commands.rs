use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::time::Duration;

use pairrank_core::batch::co_program;
use pairrank_core::eval::{
    evaluate, fit_scores, grid_search, normalize_scores, params_string, write_reports_csv, EvalOptions, Grid,
    MethodParams,
};
use pairrank_core::labeling::{label_items, write_labels, Label, LabelParams};
use pairrank_core::simulate::{simulate_bt, SimulationConfig};
use pairrank_core::{Dataset, Format, ItemCatalog, Method, ScoreTable};
use pairrank_survey::{ServiceConfig, SurveyOptions};
use serde::Serialize;

use crate::args::*;
use crate::error::{CliError, Result};

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    match path {
        Some(p) => Ok(Box::new(BufWriter::new(File::create(p).map_err(|e| CliError::io(p, e))?))),
        None => Ok(Box::new(BufWriter::new(std::io::stdout().lock()))),
    }
}

fn format_of(arg: Option<FormatArg>, path: Option<&Path>) -> Format {
    match (arg, path) {
        (Some(FormatArg::Csv), _) => Format::Csv,
        (Some(FormatArg::Jsonl), _) => Format::Jsonl,
        (None, Some(p)) => Format::from_path(p),
        (None, None) => Format::Csv,
    }
}

fn load(input: &InputArgs) -> Result<Dataset> {
    let catalog = input.catalog.as_ref().map(ItemCatalog::read_manifest).transpose()?;
    Ok(Dataset::read(&input.input, format_of(input.format, Some(&input.input)), catalog)?)
}

fn usage(e: pairrank_core::Error) -> CliError {
    CliError::Usage(e.to_string())
}

fn method_params(args: &MethodArgs) -> Result<MethodParams> {
    let mut overrides = BTreeMap::new();
    if let Some(path) = &args.params_file {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let map: BTreeMap<String, f64> =
            serde_json::from_str(&text).map_err(|e| pairrank_core::Error::Parse { line: e.line(), message: e.to_string() })?;
        overrides.extend(map);
    }
    overrides.extend(args.params.iter().cloned());
    MethodParams::default_for(args.method.into()).with_overrides(&overrides).map_err(usage)
}

fn split_options(split: &SplitArgs) -> EvalOptions {
    EvalOptions { test_fraction: split.test_fraction, mode: split.mode.into() }
}

pub fn simulate(args: SimulateArgs) -> Result<()> {
    let config = SimulationConfig {
        items: args.items,
        comparisons: args.n,
        score_scale: args.scale,
        tie_rate: args.tie_rate,
        seed: args.seed,
    };
    let (truth, data) = simulate_bt(config).map_err(usage)?;
    let mut out = output(args.output.as_deref())?;
    match format_of(args.format, args.output.as_deref()) {
        Format::Csv => data.write_csv(&mut out)?,
        Format::Jsonl => data.write_jsonl(&mut out)?,
    }
    out.flush()?;
    if let Some(path) = &args.truth {
        truth.write_csv_file(path)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct ItemJson<'a> {
    item: &'a str,
    score: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    normalized: Option<f64>,
}

#[derive(Serialize)]
struct TableJson<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    method: Option<Method>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty")]
    params: &'a BTreeMap<String, f64>,
    items: Vec<ItemJson<'a>>,
}

fn table_json<'a>(table: &'a ScoreTable, method: Option<Method>, normalized: Option<&ScoreTable>) -> TableJson<'a> {
    let items = table
        .entries()
        .iter()
        .enumerate()
        .map(|(i, e)| ItemJson {
            item: e.item.as_str(),
            score: e.score,
            mu: e.rating.map(|r| r.mu),
            sigma: e.rating.map(|r| r.sigma()),
            normalized: normalized.map(|n| n.entries()[i].score),
        })
        .collect();
    TableJson { method, params: &table.params, items }
}

pub fn score(args: ScoreArgs) -> Result<()> {
    let data = load(&args.input)?;
    let params = method_params(&args.method)?;
    if let Some(path) = &args.dump_lp {
        let MethodParams::Co(co) = params else {
            return Err(CliError::Usage("--dump-lp applies to --method co only".into()));
        };
        let lp = co_program(&data, &co)?;
        let mut file = BufWriter::new(File::create(path).map_err(|e| CliError::io(path, e))?);
        lp.write_listing(&mut file).and_then(|_| file.flush()).map_err(|e| CliError::io(path, e))?;
    }
    let mut table = fit_scores(&data, &params)?;
    if args.normalize {
        table = normalize_scores(&table)?.table;
    }
    let mut out = output(args.output.as_deref())?;
    if args.json {
        serde_json::to_writer_pretty(&mut out, &table_json(&table, Some(params.method()), None))
            .map_err(pairrank_core::Error::from)?;
        writeln!(out)?;
    } else {
        table.write_csv(&mut out)?;
    }
    out.flush()?;
    Ok(())
}

pub fn evaluate_cmd(args: EvaluateArgs) -> Result<()> {
    let data = load(&args.input)?;
    let params = method_params(&args.method)?;
    let report = evaluate(&data, &params, &split_options(&args.split), &args.split.seeds)?;
    let mut out = output(args.output.as_deref())?;
    if args.report.json {
        serde_json::to_writer_pretty(&mut out, &report).map_err(pairrank_core::Error::from)?;
        writeln!(out)?;
    } else if args.report.csv {
        write_reports_csv(std::slice::from_ref(&report), &mut out)?;
    } else {
        writeln!(out, "{report}")?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct GridJson<'a> {
    best_index: usize,
    best: BTreeMap<String, f64>,
    reports: &'a [pairrank_core::eval::EvaluationReport],
}

pub fn grid(args: GridArgs) -> Result<()> {
    let data = load(&args.input)?;
    let base = method_params(&args.method)?;
    let grid = if args.grid.is_empty() {
        Grid::default_for(base.method())
    } else {
        Grid::parse(&args.grid).map_err(usage)?
    };
    // Bad axis names are usage errors; catch them before any fitting.
    for cell in grid.cells() {
        base.with_overrides(&cell).map_err(usage)?;
    }
    let result = grid_search(&data, &base, &grid, &split_options(&args.split), &args.split.seeds)?;
    let best = result.best.to_map();
    if let Some(path) = &args.best {
        let json = serde_json::to_string_pretty(&best).map_err(pairrank_core::Error::from)?;
        std::fs::write(path, json + "\n").map_err(|e| CliError::io(path, e))?;
    }
    let mut out = output(args.output.as_deref())?;
    if args.report.json {
        let body = GridJson { best_index: result.best_index, best, reports: &result.reports };
        serde_json::to_writer_pretty(&mut out, &body).map_err(pairrank_core::Error::from)?;
        writeln!(out)?;
    } else if args.report.csv {
        write_reports_csv(&result.reports, &mut out)?;
    } else {
        writeln!(out, "{} grid, {} cells, seeds {:?}", base.method(), result.reports.len(), args.split.seeds)?;
        writeln!(out, "  {:>10}  {:>9}  params", "log loss", "accuracy")?;
        for (i, r) in result.reports.iter().enumerate() {
            let mark = if i == result.best_index { "*" } else { " " };
            writeln!(out, "{mark} {:>10.6}  {:>9.4}  {}", r.log_loss, r.accuracy, params_string(&r.params))?;
        }
    }
    out.flush()?;
    Ok(())
}

fn read_table(path: &Path) -> Result<ScoreTable> {
    let file = File::open(path).map_err(|e| CliError::io(path, e))?;
    // The CSV does not carry the method; the tag is not used downstream.
    Ok(ScoreTable::read_csv(file, Method::Lsr)?)
}

pub fn label(args: LabelArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    let params = LabelParams {
        alpha: args.alpha,
        sigma_filter_ratio: args.sigma_filter_ratio,
        std_mode: args.std_mode.into(),
    };
    if !(args.alpha >= 0.0 && args.alpha.is_finite()) {
        return Err(CliError::Usage(format!("--alpha {} must be non-negative", args.alpha)));
    }
    let labels = match args.sigma0 {
        Some(sigma0) => {
            if !table.has_ratings() {
                return Err(CliError::Usage("--sigma0 needs mu and sigma columns in the score file".into()));
            }
            label_items(&table, Some(&table), &params, sigma0)?
        }
        None => label_items(&table, None, &params, 1.0)?,
    };
    let count = |l: Label| labels.iter().filter(|x| x.label == l).count();
    eprintln!(
        "{} labeled: {} safe, {} unsafe, {} neutral",
        labels.len(),
        count(Label::Safe),
        count(Label::Unsafe),
        count(Label::Neutral)
    );
    let mut out = output(args.output.as_deref())?;
    write_labels(&labels, &mut out, args.drop_neutral)?;
    out.flush()?;
    Ok(())
}

pub fn serve(args: ServeArgs) -> Result<()> {
    let config = ServiceConfig {
        data_dir: args.data_dir,
        catalog: args.catalog,
        image_dir: args.image_dir,
        listen: args.listen,
        strategy: args.strategy.into(),
        options: SurveyOptions {
            idle_timeout: Duration::from_secs(args.idle_timeout),
            seed: args.seed,
            ..Default::default()
        },
    };
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(pairrank_survey::serve(config))?;
    Ok(())
}

pub fn dump(args: DumpArgs) -> Result<()> {
    let table = read_table(&args.input)?;
    if table.is_empty() {
        return Err(pairrank_core::Error::InvalidInput("score table is empty".into()).into());
    }
    let normalized = normalize_scores(&table)?.table;
    let mut order: Vec<usize> = (0..table.len()).collect();
    order.sort_by(|&i, &j| table.entries()[j].score.total_cmp(&table.entries()[i].score));
    let mut out = output(args.output.as_deref())?;
    if args.json {
        let full = table_json(&table, None, Some(&normalized));
        let items = order.iter().map(|&i| &full.items[i]).collect::<Vec<_>>();
        serde_json::to_writer_pretty(&mut out, &serde_json::json!({ "items": items }))
            .map_err(pairrank_core::Error::from)?;
        writeln!(out)?;
        out.flush()?;
        return Ok(());
    }
    let width = table.entries().iter().map(|e| e.item.as_str().len()).max().unwrap_or(4).max(4);
    let ratings = table.has_ratings();
    write!(out, "{:>5}  {:<width$}  {:>14}  {:>10}", "rank", "item", "score", "normalized")?;
    if ratings {
        write!(out, "  {:>12}  {:>10}", "mu", "sigma")?;
    }
    writeln!(out)?;
    for (rank, &i) in order.iter().enumerate() {
        let e = &table.entries()[i];
        write!(out, "{:>5}  {:<width$}  {:>14.6}  {:>10.4}", rank + 1, e.item.as_str(), e.score, normalized.entries()[i].score)?;
        if let Some(r) = e.rating.filter(|_| ratings) {
            write!(out, "  {:>12.6}  {:>10.6}", r.mu, r.sigma())?;
        }
        writeln!(out)?;
    }
    out.flush()?;
    Ok(())
}
