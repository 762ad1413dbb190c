//! Ingestion of indicator and target series, gap repair, normalization and
//! per-country panel assembly.
//!
//! Two file layouts are understood:
//!
//! * a wide indicator file, `country,indicator_code,indicator_name,<year>,...`
//!   with one row per (country, indicator) and blank cells for missing years;
//! * a long target file with columns `country,year,value`.
//!
//! Missing-data policy: the target and the sequences fed to EDR ranking are
//! repaired with [`impute_series`]; the feature matrix of a [`CountryPanel`]
//! keeps genuine gaps, which the tree learner routes through learned default
//! directions.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Fraction of years an indicator must have observed (before imputation)
/// to be eligible for ranking or to enter a panel.
pub const DEFAULT_COVERAGE_THRESHOLD: f64 = 0.7;

const WDI_KEY_COLUMNS: [&str; 3] = ["country", "indicator_code", "indicator_name"];

#[derive(Debug, Error)]
pub enum PanelError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },
    #[error("{path}: malformed header: {reason}")]
    MalformedHeader { path: String, reason: String },
    #[error("{path}:{line}: column `{column}` holds non-numeric value {value:?}")]
    InvalidNumber {
        path: String,
        line: u64,
        column: String,
        value: String,
    },
    #[error("{path}: duplicate series ({country}, {indicator}) on lines {first_line} and {second_line}")]
    DuplicateSeries {
        path: String,
        country: String,
        indicator: String,
        first_line: u64,
        second_line: u64,
    },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: String, column: String },
    #[error("{path}: duplicate observation ({country}, {year}) on lines {first_line} and {second_line}")]
    DuplicateObservation {
        path: String,
        country: String,
        year: i32,
        first_line: u64,
        second_line: u64,
    },
    #[error("{path}: no target observations")]
    NoTargetObservations { path: String },
    #[error("{path}: target series for {country} has no observed value")]
    EmptyTarget { path: String, country: String },
    #[error("insufficient coverage: {country}/{indicator} has {observed} observed value(s), need at least 2")]
    InsufficientCoverage {
        country: String,
        indicator: String,
        observed: usize,
    },
    #[error("indicator {code} not found for {country}")]
    IndicatorNotFound { code: String, country: String },
    #[error("indicator {code} selected twice for {country}")]
    DuplicateSelection { code: String, country: String },
    #[error("indicator {code} for {country} covers {coverage:.3} of the years, below the {threshold} threshold")]
    LowCoverage {
        code: String,
        country: String,
        coverage: f64,
        threshold: f64,
    },
    #[error("target for {country} is missing year {year}")]
    TargetGap { country: String, year: i32 },
    #[error("invalid year range [{start}, {end}]")]
    InvalidYearRange { start: i32, end: i32 },
    #[error("invalid panel: {0}")]
    InvalidPanel(String),
}

/// Inclusive range of calendar years.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "[i32; 2]", into = "[i32; 2]")]
pub struct YearRange {
    start: i32,
    end: i32,
}

impl YearRange {
    pub fn new(start: i32, end: i32) -> Result<Self, PanelError> {
        if start > end {
            return Err(PanelError::InvalidYearRange { start, end });
        }
        Ok(Self { start, end })
    }

    pub fn start(&self) -> i32 {
        self.start
    }

    pub fn end(&self) -> i32 {
        self.end
    }

    pub fn contains(&self, year: i32) -> bool {
        (self.start..=self.end).contains(&year)
    }

    pub fn years(&self) -> impl Iterator<Item = i32> {
        self.start..=self.end
    }

    pub fn len(&self) -> usize {
        (self.end - self.start) as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl Default for YearRange {
    fn default() -> Self {
        Self {
            start: 2008,
            end: 2023,
        }
    }
}

impl TryFrom<[i32; 2]> for YearRange {
    type Error = PanelError;

    fn try_from([start, end]: [i32; 2]) -> Result<Self, Self::Error> {
        Self::new(start, end)
    }
}

impl From<YearRange> for [i32; 2] {
    fn from(range: YearRange) -> Self {
        [range.start, range.end]
    }
}

impl fmt::Display for YearRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.start, self.end)
    }
}

/// One yearly series for a (country, indicator) pair. `None` marks a
/// missing observation.
#[derive(Debug, Clone, PartialEq)]
pub struct IndicatorSeries {
    pub country: String,
    pub indicator_code: String,
    pub indicator_name: String,
    pub observations: BTreeMap<i32, Option<f64>>,
}

impl IndicatorSeries {
    pub fn observed_count(&self) -> usize {
        self.observations.values().filter(|v| v.is_some()).count()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.observations.values().all(Option::is_some)
    }

    /// Fraction of the years in `range` that carry an observation.
    pub fn coverage(&self, range: YearRange) -> f64 {
        let observed = range
            .years()
            .filter(|y| matches!(self.observations.get(y), Some(Some(_))))
            .count();
        observed as f64 / range.len() as f64
    }

    /// Same series keyed by exactly the years of `range`; absent years
    /// become missing, years outside the range are dropped.
    pub fn reindexed(&self, range: YearRange) -> Self {
        let observations = range
            .years()
            .map(|y| (y, self.observations.get(&y).copied().flatten()))
            .collect();
        Self {
            observations,
            ..self.clone()
        }
    }

    /// Values in year order, or `None` if any observation is missing.
    pub fn values(&self) -> Option<Vec<f64>> {
        self.observations.values().copied().collect()
    }

    pub fn value_at(&self, year: i32) -> Option<f64> {
        self.observations.get(&year).copied().flatten()
    }
}

/// Mean and population standard deviation recorded by [`znormalize`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: f64,
    pub std: f64,
}

impl NormStats {
    pub fn apply(&self, x: f64) -> f64 {
        if self.std > 0.0 {
            (x - self.mean) / self.std
        } else {
            0.0
        }
    }

    /// Maps a normalized value back to the original scale. For a
    /// zero-variance series every value maps back to the mean.
    pub fn invert(&self, z: f64) -> f64 {
        self.mean + z * self.std
    }
}

/// Aligned target and raw feature matrix for one country.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountryPanel {
    pub country: String,
    pub years: Vec<i32>,
    pub target: Vec<f64>,
    pub feature_codes: Vec<String>,
    /// Row-major, one row per year.
    pub features: Vec<Vec<Option<f64>>>,
}

impl CountryPanel {
    pub fn n_rows(&self) -> usize {
        self.years.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_codes.len()
    }

    /// A panel without any feature column. Valid, but a model trained on it
    /// can only predict a constant.
    pub fn is_degenerate(&self) -> bool {
        self.feature_codes.is_empty()
    }

    pub fn column(&self, j: usize) -> Vec<Option<f64>> {
        self.features.iter().map(|row| row[j]).collect()
    }

    /// Sub-panel holding the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            country: self.country.clone(),
            years: rows.iter().map(|&i| self.years[i]).collect(),
            target: rows.iter().map(|&i| self.target[i]).collect(),
            feature_codes: self.feature_codes.clone(),
            features: rows.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }

    pub fn validate(&self) -> Result<(), PanelError> {
        let n = self.years.len();
        if self.target.len() != n || self.features.len() != n {
            return Err(PanelError::InvalidPanel(format!(
                "{}: {} years, {} targets, {} feature rows",
                self.country,
                n,
                self.target.len(),
                self.features.len()
            )));
        }
        if self.years.windows(2).any(|w| w[0] >= w[1]) {
            return Err(PanelError::InvalidPanel(format!(
                "{}: years not strictly increasing",
                self.country
            )));
        }
        if let Some(row) = self
            .features
            .iter()
            .position(|r| r.len() != self.feature_codes.len())
        {
            return Err(PanelError::InvalidPanel(format!(
                "{}: row {} has {} features, expected {}",
                self.country,
                row,
                self.features[row].len(),
                self.feature_codes.len()
            )));
        }
        if self.target.iter().any(|v| !v.is_finite()) {
            return Err(PanelError::InvalidPanel(format!(
                "{}: non-finite target value",
                self.country
            )));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("panel serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PanelError> {
        let panel: Self = serde_json::from_str(text)
            .map_err(|e| PanelError::InvalidPanel(e.to_string()))?;
        panel.validate()?;
        Ok(panel)
    }
}

fn open(path: &Path) -> Result<File, PanelError> {
    File::open(path).map_err(|source| PanelError::Io {
        path: path.display().to_string(),
        source,
    })
}

fn parse_cell(
    raw: &str,
    path: &str,
    line: u64,
    column: &str,
) -> Result<Option<f64>, PanelError> {
    let cell = raw.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        _ => Err(PanelError::InvalidNumber {
            path: path.to_string(),
            line,
            column: column.to_string(),
            value: raw.to_string(),
        }),
    }
}

/// Loads a wide indicator file, keeping only years inside `range`.
///
/// Rows with no observed value inside the range are dropped, since a
/// series must carry at least one observation.
pub fn load_wdi_csv(path: &Path, range: YearRange) -> Result<Vec<IndicatorSeries>, PanelError> {
    read_wdi_csv(open(path)?, &path.display().to_string(), range)
}

pub fn read_wdi_csv<R: Read>(
    reader: R,
    source_name: &str,
    range: YearRange,
) -> Result<Vec<IndicatorSeries>, PanelError> {
    let csv_err = |source| PanelError::Csv {
        path: source_name.to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_reader(reader);
    let mut records = rdr.records();

    let header = match records.next() {
        Some(rec) => rec.map_err(csv_err)?,
        None => {
            return Err(PanelError::MalformedHeader {
                path: source_name.to_string(),
                reason: "file is empty".into(),
            })
        }
    };
    let malformed = |reason: String| PanelError::MalformedHeader {
        path: source_name.to_string(),
        reason,
    };
    if header.len() < WDI_KEY_COLUMNS.len() {
        return Err(malformed(format!(
            "expected at least {} columns, found {}",
            WDI_KEY_COLUMNS.len(),
            header.len()
        )));
    }
    for (i, expected) in WDI_KEY_COLUMNS.iter().enumerate() {
        let found = header[i].trim().trim_start_matches('\u{feff}');
        if !found.eq_ignore_ascii_case(expected) {
            return Err(malformed(format!(
                "column {} is `{found}`, expected `{expected}`",
                i + 1
            )));
        }
    }
    let mut year_columns = Vec::with_capacity(header.len() - 3);
    let mut seen_years = HashSet::new();
    for name in header.iter().skip(3) {
        let year: i32 = name
            .trim()
            .parse()
            .map_err(|_| malformed(format!("year column `{name}` is not an integer")))?;
        if !seen_years.insert(year) {
            return Err(malformed(format!("year column {year} appears twice")));
        }
        year_columns.push(year);
    }

    let mut out = Vec::new();
    let mut first_seen: HashMap<(String, String), u64> = HashMap::new();
    for rec in records {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let country = rec[0].trim().to_string();
        let code = rec[1].trim().to_string();
        let name = rec[2].trim().to_string();
        if let Some(&first_line) = first_seen.get(&(country.clone(), code.clone())) {
            return Err(PanelError::DuplicateSeries {
                path: source_name.to_string(),
                country,
                indicator: code,
                first_line,
                second_line: line,
            });
        }
        first_seen.insert((country.clone(), code.clone()), line);

        let mut observations = BTreeMap::new();
        for (cell, &year) in rec.iter().skip(3).zip(&year_columns) {
            let value = parse_cell(cell, source_name, line, &year.to_string())?;
            if range.contains(year) {
                observations.insert(year, value);
            }
        }
        let series = IndicatorSeries {
            country,
            indicator_code: code,
            indicator_name: name,
            observations,
        };
        if series.observed_count() == 0 {
            log::debug!(
                "{source_name}:{line}: {}/{} has no observation in {range}, skipped",
                series.country,
                series.indicator_code
            );
            continue;
        }
        out.push(series);
    }
    Ok(out)
}

/// Writes series in the wide layout read by [`load_wdi_csv`]. The year
/// columns are the union of all series' years.
pub fn write_wdi_csv<W: Write>(series: &[IndicatorSeries], writer: W) -> Result<(), PanelError> {
    let csv_err = |source| PanelError::Csv {
        path: "<output>".into(),
        source,
    };
    let years: Vec<i32> = series
        .iter()
        .flat_map(|s| s.observations.keys().copied())
        .collect::<std::collections::BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header: Vec<String> = WDI_KEY_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(years.iter().map(|y| y.to_string()));
    wtr.write_record(&header).map_err(csv_err)?;
    for s in series {
        let mut row = vec![
            s.country.clone(),
            s.indicator_code.clone(),
            s.indicator_name.clone(),
        ];
        row.extend(
            years
                .iter()
                .map(|y| s.value_at(*y).map(|v| v.to_string()).unwrap_or_default()),
        );
        wtr.write_record(&row).map_err(csv_err)?;
    }
    wtr.flush().map_err(|source| PanelError::Io {
        path: "<output>".into(),
        source,
    })
}

pub const TARGET_CODE: &str = "target";

/// Loads the long-format target file: one series per country, in order of
/// first appearance.
pub fn load_target_csv(path: &Path) -> Result<Vec<IndicatorSeries>, PanelError> {
    read_target_csv(open(path)?, &path.display().to_string())
}

pub fn read_target_csv<R: Read>(
    reader: R,
    source_name: &str,
) -> Result<Vec<IndicatorSeries>, PanelError> {
    let csv_err = |source| PanelError::Csv {
        path: source_name.to_string(),
        source,
    };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim().trim_start_matches('\u{feff}').eq_ignore_ascii_case(name))
            .ok_or_else(|| PanelError::MissingColumn {
                path: source_name.to_string(),
                column: name.to_string(),
            })
    };
    let (c_col, y_col, v_col) = (column("country")?, column("year")?, column("value")?);

    let mut order: Vec<String> = Vec::new();
    let mut by_country: HashMap<String, BTreeMap<i32, Option<f64>>> = HashMap::new();
    let mut lines: HashMap<(String, i32), u64> = HashMap::new();
    for rec in rdr.records() {
        let rec = rec.map_err(csv_err)?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.iter().all(|c| c.trim().is_empty()) {
            continue;
        }
        let country = rec[c_col].trim().to_string();
        let year: i32 = rec[y_col]
            .trim()
            .parse()
            .map_err(|_| PanelError::InvalidNumber {
                path: source_name.to_string(),
                line,
                column: "year".into(),
                value: rec[y_col].to_string(),
            })?;
        let value = parse_cell(&rec[v_col], source_name, line, "value")?;
        if let Some(&first_line) = lines.get(&(country.clone(), year)) {
            return Err(PanelError::DuplicateObservation {
                path: source_name.to_string(),
                country,
                year,
                first_line,
                second_line: line,
            });
        }
        lines.insert((country.clone(), year), line);
        if !by_country.contains_key(&country) {
            order.push(country.clone());
        }
        by_country.entry(country).or_default().insert(year, value);
    }
    if order.is_empty() {
        return Err(PanelError::NoTargetObservations {
            path: source_name.to_string(),
        });
    }
    order
        .into_iter()
        .map(|country| {
            let observations = by_country.remove(&country).unwrap_or_default();
            let series = IndicatorSeries {
                country: country.clone(),
                indicator_code: TARGET_CODE.into(),
                indicator_name: TARGET_CODE.into(),
                observations,
            };
            if series.observed_count() == 0 {
                return Err(PanelError::EmptyTarget {
                    path: source_name.to_string(),
                    country,
                });
            }
            Ok(series)
        })
        .collect()
}

/// Fills gaps: interior gaps by linear interpolation in year units between
/// the nearest observed neighbours, leading and trailing gaps with the
/// nearest observed value.
pub fn impute_series(s: &IndicatorSeries) -> Result<IndicatorSeries, PanelError> {
    let known: Vec<(i32, f64)> = s
        .observations
        .iter()
        .filter_map(|(&y, v)| v.map(|v| (y, v)))
        .collect();
    if known.len() < 2 {
        return Err(PanelError::InsufficientCoverage {
            country: s.country.clone(),
            indicator: s.indicator_code.clone(),
            observed: known.len(),
        });
    }
    let (first, last) = (known[0], known[known.len() - 1]);
    // index of the first known point at or after the current year
    let mut next = 0;
    let observations = s
        .observations
        .iter()
        .map(|(&year, value)| {
            if let Some(v) = value {
                return (year, Some(*v));
            }
            while next < known.len() && known[next].0 < year {
                next += 1;
            }
            let filled = if year < first.0 {
                first.1
            } else if year > last.0 {
                last.1
            } else {
                let (y0, v0) = known[next - 1];
                let (y1, v1) = known[next];
                v0 + (v1 - v0) * f64::from(year - y0) / f64::from(y1 - y0)
            };
            (year, Some(filled))
        })
        .collect();
    Ok(IndicatorSeries {
        observations,
        ..s.clone()
    })
}

/// Z-normalizes with the population standard deviation. A constant input
/// maps to all zeros with `std = 0`.
pub fn znormalize(values: &[f64]) -> (Vec<f64>, NormStats) {
    if values.is_empty() {
        return (Vec::new(), NormStats { mean: 0.0, std: 0.0 });
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.iter().all(|&v| v == values[0]) {
        return (vec![0.0; values.len()], NormStats { mean, std: 0.0 });
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let stats = NormStats {
        mean,
        std: var.sqrt(),
    };
    (values.iter().map(|&v| stats.apply(v)).collect(), stats)
}

/// Repairs a series over `range` and z-normalizes it, giving the sequence
/// compared by EDR ranking.
pub fn prepare_for_ranking(
    s: &IndicatorSeries,
    range: YearRange,
) -> Result<(Vec<f64>, NormStats), PanelError> {
    let filled = impute_series(&s.reindexed(range))?;
    let values = filled.values().expect("imputed series is fully observed");
    Ok(znormalize(&values))
}

/// Candidate series for `country` whose observed coverage over `range`
/// reaches `threshold` (and that have the two points imputation needs).
pub fn eligible_candidates<'a>(
    candidates: &'a [IndicatorSeries],
    country: &str,
    range: YearRange,
    threshold: f64,
) -> Vec<&'a IndicatorSeries> {
    candidates
        .iter()
        .filter(|s| s.country == country)
        .filter(|s| s.coverage(range) >= threshold && s.reindexed(range).observed_count() >= 2)
        .collect()
}

/// Assembles the panel for `target.country` with one raw feature column per
/// selected code, using [`DEFAULT_COVERAGE_THRESHOLD`].
pub fn build_panel(
    target: &IndicatorSeries,
    candidates: &[IndicatorSeries],
    selected_codes: &[String],
    range: YearRange,
) -> Result<CountryPanel, PanelError> {
    build_panel_with_coverage(
        target,
        candidates,
        selected_codes,
        range,
        DEFAULT_COVERAGE_THRESHOLD,
    )
}

pub fn build_panel_with_coverage(
    target: &IndicatorSeries,
    candidates: &[IndicatorSeries],
    selected_codes: &[String],
    range: YearRange,
    coverage_threshold: f64,
) -> Result<CountryPanel, PanelError> {
    let country = &target.country;
    let years: Vec<i32> = range.years().collect();
    let target_values = years
        .iter()
        .map(|&year| {
            target.value_at(year).ok_or_else(|| PanelError::TargetGap {
                country: country.clone(),
                year,
            })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let by_code: HashMap<&str, &IndicatorSeries> = candidates
        .iter()
        .filter(|s| &s.country == country)
        .map(|s| (s.indicator_code.as_str(), s))
        .collect();
    let mut seen = HashSet::new();
    let mut columns = Vec::with_capacity(selected_codes.len());
    for code in selected_codes {
        if !seen.insert(code.as_str()) {
            return Err(PanelError::DuplicateSelection {
                code: code.clone(),
                country: country.clone(),
            });
        }
        let series = by_code
            .get(code.as_str())
            .ok_or_else(|| PanelError::IndicatorNotFound {
                code: code.clone(),
                country: country.clone(),
            })?;
        let coverage = series.coverage(range);
        if coverage < coverage_threshold {
            return Err(PanelError::LowCoverage {
                code: code.clone(),
                country: country.clone(),
                coverage,
                threshold: coverage_threshold,
            });
        }
        columns.push(series);
    }
    if columns.is_empty() {
        log::warn!("{country}: panel built without any feature column");
    }

    let features = years
        .iter()
        .map(|&y| columns.iter().map(|s| s.value_at(y)).collect())
        .collect();
    Ok(CountryPanel {
        country: country.clone(),
        years,
        target: target_values,
        feature_codes: selected_codes.to_vec(),
        features,
    })
}
