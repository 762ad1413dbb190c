//! The pipeline commands. Each command computes all of its outputs in
//! memory and only then writes them, so a failing command leaves the
//! output directory as it was.

use std::cell::OnceCell;
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use panelcast::edr::{rank_features, EdrParams, FeatureRanking};
use panelcast::eval::{evaluate_model, split_train_test, BacktestReport};
use panelcast::eval::{forecast, ForecastResult};
use panelcast::gbtree::{deserialize_model, fit, serialize_model, BoostedModel, HyperParams};
use panelcast::panel::{
    build_panel_with_coverage, eligible_candidates, impute_series, prepare_for_ranking, read_target_csv, read_wdi_csv,
    CountryPanel, IndicatorSeries,
};
use panelcast::tuning::grid_search;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{LoadedConfig, PipelineConfig};
use crate::error::CliError;
use crate::output::{commit, InputRecord, ManifestInfo, Staged};
use crate::svg::backtest_chart;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Rank,
    Tune,
    Train,
    Evaluate,
    Forecast,
    Report,
    All,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rank => "rank",
            Command::Tune => "tune",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Forecast => "forecast",
            Command::Report => "report",
            Command::All => "all",
        }
    }

    /// The single-stage commands that `all` runs, in order.
    pub const STAGES: [Command; 6] = [
        Command::Rank,
        Command::Tune,
        Command::Train,
        Command::Evaluate,
        Command::Forecast,
        Command::Report,
    ];
}

/// Indicator and target series with their provenance.
struct Inputs {
    indicators: Vec<IndicatorSeries>,
    targets: Vec<IndicatorSeries>,
    names: BTreeMap<String, String>,
    records: Vec<InputRecord>,
}

/// One country's selected indicators and the panel built from them.
pub struct Selection {
    pub eligible: usize,
    pub ranking: FeatureRanking,
    pub panel: CountryPanel,
}

/// Forecast export: every feature row in it is extrapolated, never
/// observed.
#[derive(Debug, Serialize, Deserialize)]
struct ForecastDocument {
    features_provenance: String,
    results: Vec<ForecastResult>,
}

pub struct Pipeline {
    config: PipelineConfig,
    loaded: LoadedConfig,
    out_dir: PathBuf,
    no_svg: bool,
    inputs: OnceCell<Inputs>,
    selections: OnceCell<Vec<Selection>>,
}

/// File-name-safe form of a country code.
fn file_stem(country: &str) -> String {
    country
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn csv_bytes(
    f: impl FnOnce(&mut Vec<u8>) -> Result<(), Box<dyn std::error::Error>>,
) -> Result<Vec<u8>, CliError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| CliError::Runtime(e.to_string()))?;
    Ok(buf)
}

fn json_bytes<T: Serialize>(value: &T) -> Vec<u8> {
    let mut text = serde_json::to_string_pretty(value).expect("value serializes");
    text.push('\n');
    text.into_bytes()
}

/// Runs `f` for every item concurrently and returns results in input order,
/// failing with the first error in that order.
fn per_country<T: Sync, U: Send>(
    items: &[T],
    f: impl Fn(&T) -> Result<U, CliError> + Sync + Send,
) -> Result<Vec<U>, CliError> {
    let results: Vec<Result<U, CliError>> = items.par_iter().map(f).collect();
    results.into_iter().collect()
}

impl Pipeline {
    /// `seed` and `out` override the config values.
    pub fn new(loaded: LoadedConfig, seed: Option<u64>, out: Option<PathBuf>, no_svg: bool) -> Self {
        let mut config = loaded.config.clone();
        if let Some(seed) = seed {
            config.seed = seed;
        }
        let out_dir = out.unwrap_or_else(|| config.paths.output.clone());
        Self {
            config,
            loaded,
            out_dir,
            no_svg,
            inputs: OnceCell::new(),
            selections: OnceCell::new(),
        }
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn out_dir(&self) -> &Path {
        &self.out_dir
    }

    fn inputs(&self) -> Result<&Inputs, CliError> {
        if let Some(i) = self.inputs.get() {
            return Ok(i);
        }
        let inputs = self.load_inputs()?;
        Ok(self.inputs.get_or_init(|| inputs))
    }

    fn load_inputs(&self) -> Result<Inputs, CliError> {
        let read = |path: &Path| {
            std::fs::read(path).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
        };
        let paths = &self.config.paths;
        let declared = &self.loaded.declared_paths;
        let ind_bytes = read(&paths.indicators)?;
        let tgt_bytes = read(&paths.target)?;
        let indicators = read_wdi_csv(
            ind_bytes.as_slice(),
            &paths.indicators.display().to_string(),
            self.config.year_range,
        )?;
        let targets = read_target_csv(tgt_bytes.as_slice(), &paths.target.display().to_string())?;
        let mut names = BTreeMap::new();
        for s in &indicators {
            names
                .entry(s.indicator_code.clone())
                .or_insert_with(|| s.indicator_name.clone());
        }
        let mut staged = Staged::default();
        staged.input("indicators", declared.indicators.display().to_string(), &ind_bytes);
        staged.input("target", declared.target.display().to_string(), &tgt_bytes);
        Ok(Inputs {
            indicators,
            targets,
            names,
            records: staged.inputs,
        })
    }

    /// EDR ranking and panel assembly for every target country, in target
    /// file order.
    pub fn selections(&self) -> Result<&[Selection], CliError> {
        if let Some(s) = self.selections.get() {
            return Ok(s);
        }
        let inputs = self.inputs()?;
        let cfg = &self.config;
        let range = cfg.year_range;
        let params = EdrParams::new(cfg.edr.epsilon)?;
        let selections = per_country(&inputs.targets, |target| {
            let country = &target.country;
            let run = || -> Result<Selection, CliError> {
                let (target_z, _) = prepare_for_ranking(target, range)?;
                let reindexed = target.reindexed(range);
                let gaps = range.len() - reindexed.observed_count();
                if gaps > 0 {
                    log::warn!("{country}: interpolating {gaps} missing target value(s)");
                }
                let filled_target = impute_series(&reindexed)?;
                let candidates = eligible_candidates(&inputs.indicators, country, range, cfg.edr.coverage_threshold)
                    .into_iter()
                    .map(|s| Ok((s.indicator_code.clone(), prepare_for_ranking(s, range)?.0)))
                    .collect::<Result<BTreeMap<_, _>, CliError>>()?;
                let ranking = rank_features(&target_z, &candidates, params, cfg.edr.k)?;
                let panel = build_panel_with_coverage(
                    &filled_target,
                    &inputs.indicators,
                    &ranking.codes(),
                    range,
                    cfg.edr.coverage_threshold,
                )?;
                Ok(Selection {
                    eligible: candidates.len(),
                    ranking,
                    panel,
                })
            };
            run().map_err(|e| e.within(country))
        })?;
        Ok(self.selections.get_or_init(|| selections))
    }

    fn staged_with_inputs(&self) -> Result<Staged, CliError> {
        Ok(Staged {
            inputs: self.inputs()?.records.clone(),
            ..Staged::default()
        })
    }

    /// Reads a file written by an earlier command.
    fn read_artifact(&self, rel: &str, producer: Command) -> Result<Vec<u8>, CliError> {
        let path = self.out_dir.join(rel);
        match std::fs::read(&path) {
            Ok(bytes) => Ok(bytes),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(CliError::Data(format!(
                "{}: not found; run `{}` first",
                path.display(),
                producer.name()
            ))),
            Err(e) => Err(CliError::io(&path, e)),
        }
    }

    fn read_model(&self, staged: &mut Staged, rel: &str) -> Result<BoostedModel, CliError> {
        let bytes = self.read_artifact(rel, Command::Train)?;
        staged.input("model", rel, &bytes);
        let text = std::str::from_utf8(&bytes)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", self.out_dir.join(rel).display())))?;
        deserialize_model(text)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", self.out_dir.join(rel).display())))
    }

    fn stage_rank(&self) -> Result<Staged, CliError> {
        let inputs = self.inputs()?;
        let mut staged = self.staged_with_inputs()?;
        for sel in self.selections()? {
            let country = &sel.panel.country;
            let stem = file_stem(country);
            let ranking = csv_bytes(|buf| Ok(sel.ranking.write_csv(&inputs.names, buf)?))?;
            staged.add(format!("rank/{stem}.ranking.csv"), ranking);
            let mut panel = sel.panel.to_json();
            panel.push('\n');
            staged.add(format!("panels/{stem}.json"), panel);
            let _ = writeln!(
                staged.stdout,
                "{country}: top {} of {} eligible indicators",
                sel.ranking.len(),
                sel.eligible
            );
            for e in &sel.ranking.entries {
                let _ = writeln!(staged.stdout, "  {:>3}  {:<24} {}", e.rank, e.indicator_code, e.distance);
            }
        }
        Ok(staged)
    }

    fn stage_tune(&self) -> Result<Staged, CliError> {
        let cfg = &self.config;
        let mut staged = self.staged_with_inputs()?;
        let selections = self.selections()?;
        let results = per_country(selections, |sel| {
            let run = || -> Result<_, CliError> {
                let (train, _) = split_train_test(&sel.panel, cfg.split.last_train_year)?;
                Ok(grid_search(&train, &cfg.grid, &cfg.cv, cfg.seed)?)
            };
            run().map_err(|e| e.within(&sel.panel.country))
        })?;
        for (sel, result) in selections.iter().zip(results) {
            let country = &sel.panel.country;
            let stem = file_stem(country);
            let board = csv_bytes(|buf| Ok(result.write_leaderboard_csv(buf)?))?;
            staged.add(format!("tune/{stem}.leaderboard.csv"), board);
            staged.add(format!("tune/{stem}.best_params.json"), json_bytes(&result.best_params));
            let _ = writeln!(
                staged.stdout,
                "{country}: best mean CV MAPE {:.4}% over {} combinations ({} disqualified)",
                result.best_score,
                result.leaderboard.len() + result.disqualified.len(),
                result.disqualified.len()
            );
        }
        Ok(staged)
    }

    fn stage_train(&self) -> Result<Staged, CliError> {
        let cfg = &self.config;
        let mut staged = self.staged_with_inputs()?;
        let selections = self.selections()?;
        let mut params = Vec::with_capacity(selections.len());
        for sel in selections {
            let rel = format!("tune/{}.best_params.json", file_stem(&sel.panel.country));
            let bytes = self.read_artifact(&rel, Command::Tune)?;
            staged.input("best_params", rel.as_str(), &bytes);
            let p: HyperParams = serde_json::from_slice(&bytes)
                .map_err(|e| CliError::Runtime(format!("{}: {e}", self.out_dir.join(&rel).display())))?;
            p.validate()
                .map_err(|e| CliError::Runtime(format!("{}: {e}", self.out_dir.join(&rel).display())))?;
            params.push(p);
        }
        let pairs: Vec<(&Selection, HyperParams)> = selections.iter().zip(params).collect();
        let models = per_country(&pairs, |(sel, p)| {
            let run = || -> Result<_, CliError> {
                let (train, _) = split_train_test(&sel.panel, cfg.split.last_train_year)?;
                Ok((fit(&train, p, cfg.seed)?, fit(&sel.panel, p, cfg.seed)?))
            };
            run().map_err(|e| e.within(&sel.panel.country))
        })?;
        for (sel, (backtest_model, full_model)) in selections.iter().zip(models) {
            let country = &sel.panel.country;
            let stem = file_stem(country);
            for (kind, model) in [("backtest", &backtest_model), ("full", &full_model)] {
                let mut text = serialize_model(model);
                text.push('\n');
                staged.add(format!("models/{stem}.{kind}.json"), text);
            }
            let _ = writeln!(
                staged.stdout,
                "{country}: backtest model on years <= {} and full model, {} trees each",
                cfg.split.last_train_year,
                full_model.trees.len()
            );
        }
        Ok(staged)
    }

    fn stage_evaluate(&self) -> Result<Staged, CliError> {
        let cfg = &self.config;
        let mut staged = self.staged_with_inputs()?;
        let selections = self.selections()?;
        let mut reports = Vec::with_capacity(selections.len());
        for sel in selections {
            let rel = format!("models/{}.backtest.json", file_stem(&sel.panel.country));
            let model = self.read_model(&mut staged, &rel)?;
            let report = evaluate_model(&model, &sel.panel, cfg.split.last_train_year)
                .map_err(|e| CliError::from(e).within(&sel.panel.country))?;
            reports.push(report);
        }
        staged.add(
            "evaluate/backtest.csv",
            csv_bytes(|buf| Ok(BacktestReport::write_rows_csv(&reports, buf)?))?,
        );
        staged.add(
            "evaluate/summary.csv",
            csv_bytes(|buf| Ok(BacktestReport::write_summary_csv(&reports, buf)?))?,
        );
        staged.add("evaluate/reports.json", json_bytes(&reports));
        if !self.no_svg {
            for r in &reports {
                staged.add(format!("evaluate/{}.svg", file_stem(&r.country)), backtest_chart(r));
            }
        }
        let _ = writeln!(staged.stdout, "{:<8} {:>12} {:>12}", "country", "train MAPE %", "test MAPE %");
        for r in &reports {
            let _ = writeln!(staged.stdout, "{:<8} {:>12.6} {:>12.6}", r.country, r.train_mape, r.test_mape);
        }
        Ok(staged)
    }

    fn stage_forecast(&self) -> Result<Staged, CliError> {
        let cfg = &self.config;
        let mut staged = self.staged_with_inputs()?;
        let selections = self.selections()?;
        let mut results = Vec::with_capacity(selections.len());
        for sel in selections {
            let rel = format!("models/{}.full.json", file_stem(&sel.panel.country));
            let model = self.read_model(&mut staged, &rel)?;
            let result = forecast(&model, &sel.panel, cfg.forecast.horizon, cfg.forecast.trend_window)
                .map_err(|e| CliError::from(e).within(&sel.panel.country))?;
            results.push(result);
        }
        staged.add(
            "forecast/forecast.csv",
            csv_bytes(|buf| Ok(ForecastResult::write_csv(&results, buf)?))?,
        );
        for r in &results {
            let _ = write!(staged.stdout, "{:<8}", r.country);
            for (year, p) in r.horizon_years.iter().zip(&r.predictions) {
                let _ = write!(staged.stdout, " {year}: {p:.4}");
            }
            staged.stdout.push('\n');
        }
        staged.add(
            "forecast/forecast.json",
            json_bytes(&ForecastDocument {
                features_provenance: "simulated".into(),
                results,
            }),
        );
        Ok(staged)
    }

    fn stage_report(&self) -> Result<Staged, CliError> {
        let mut staged = Staged::default();
        let rel = "evaluate/reports.json";
        let bytes = self.read_artifact(rel, Command::Evaluate)?;
        staged.input("backtest_reports", rel, &bytes);
        let reports: Vec<BacktestReport> = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", self.out_dir.join(rel).display())))?;
        let rel = "forecast/forecast.json";
        let bytes = self.read_artifact(rel, Command::Forecast)?;
        staged.input("forecasts", rel, &bytes);
        let forecasts: ForecastDocument = serde_json::from_slice(&bytes)
            .map_err(|e| CliError::Runtime(format!("{}: {e}", self.out_dir.join(rel).display())))?;

        let mut md = String::new();
        md.push_str("# Backtest\n\n");
        let _ = writeln!(
            md,
            "MAPE in percent. Train: years <= {}; test: later years.\n",
            self.config.split.last_train_year
        );
        md.push_str("| country | train MAPE | test MAPE |\n|---|---:|---:|\n");
        for r in &reports {
            let _ = writeln!(md, "| {} | {:.6} | {:.6} |", r.country, r.train_mape, r.test_mape);
        }
        if let Some(first) = forecasts.results.first() {
            let _ = writeln!(
                md,
                "\n# Forecast\n\nPredictors extrapolated with `{}`.\n",
                first.method
            );
            md.push_str("| country |");
            for y in &first.horizon_years {
                let _ = write!(md, " {y} |");
            }
            md.push_str("\n|---|");
            md.push_str(&"---:|".repeat(first.horizon_years.len()));
            md.push('\n');
            for r in &forecasts.results {
                let _ = write!(md, "| {} |", r.country);
                for p in &r.predictions {
                    let _ = write!(md, " {p:.4} |");
                }
                md.push('\n');
            }
        }
        md.push_str("\n# Feature importance\n\nTotal split gain in the full model, top 5.\n\n");
        md.push_str("| country | indicator | gain |\n|---|---|---:|\n");
        for r in &reports {
            let rel = format!("models/{}.full.json", file_stem(&r.country));
            let model = self.read_model(&mut staged, &rel)?;
            let mut importance = model.feature_importance();
            importance.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
            for (code, gain) in importance.iter().take(5) {
                let _ = writeln!(md, "| {} | {code} | {gain:.6} |", r.country);
            }
        }
        staged.stdout = md.clone();
        staged.add("report.md", md);
        Ok(staged)
    }

    fn stage(&self, command: Command) -> Result<Staged, CliError> {
        match command {
            Command::Rank => self.stage_rank(),
            Command::Tune => self.stage_tune(),
            Command::Train => self.stage_train(),
            Command::Evaluate => self.stage_evaluate(),
            Command::Forecast => self.stage_forecast(),
            Command::Report => self.stage_report(),
            Command::All => unreachable!("expanded by run"),
        }
    }

    /// Runs `command`, writing its outputs and manifest, and echoes its
    /// summary to `stdout`.
    pub fn run(&self, command: Command, stdout: &mut dyn Write) -> Result<(), CliError> {
        let stages: &[Command] = if command == Command::All {
            &Command::STAGES
        } else {
            std::slice::from_ref(&command)
        };
        for &stage in stages {
            log::info!("running {}", stage.name());
            let staged = self.stage(stage)?;
            commit(
                &self.out_dir,
                &staged,
                ManifestInfo {
                    command: stage.name(),
                    config_sha256: &self.loaded.sha256,
                    seed: self.config.seed,
                },
            )?;
            stdout
                .write_all(staged.stdout.as_bytes())
                .map_err(|e| CliError::Runtime(format!("stdout: {e}")))?;
        }
        Ok(())
    }
}
