//! Synthetic six-country panel used by the tests and the README example.
//!
//! The target is a smooth index around a per-country level (2.0 to 3.0)
//! with a small cycle and drift. Each country gets 40 WDI-style
//! indicators: a dozen track the target cycle (some inverted), a few are
//! too sparse to pass the coverage filter, and the rest are unrelated
//! trends and random walks. About 3% of the remaining cells are blank.
//!
//! Output depends only on the seed.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write;

use panelcast::panel::{write_wdi_csv, IndicatorSeries};
use panelcast::sampling::{fisher_yates, rng_from_seed, TrainRng};
use rand::Rng;

pub const FIXTURE_SEED: u64 = 20_240_601;
pub const FIRST_YEAR: i32 = 2008;
pub const LAST_YEAR: i32 = 2023;

/// (code, level) for each country, in output order.
pub const COUNTRIES: [(&str, f64); 6] = [
    ("BHR", 2.45),
    ("KWT", 2.15),
    ("OMN", 2.05),
    ("QAT", 2.00),
    ("SAU", 2.60),
    ("ARE", 2.25),
];

/// (code, name, typical magnitude)
const INDICATORS: [(&str, &str, f64); 40] = [
    ("NY.GDP.MKTP.CD", "GDP (current US$)", 2.0e11),
    ("NY.GDP.PCAP.CD", "GDP per capita (current US$)", 3.0e4),
    ("NY.GDP.MKTP.KD.ZG", "GDP growth (annual %)", 3.0),
    ("NY.GNP.PCAP.CD", "GNI per capita, Atlas method (current US$)", 2.8e4),
    ("FP.CPI.TOTL.ZG", "Inflation, consumer prices (annual %)", 2.5),
    ("NE.EXP.GNFS.ZS", "Exports of goods and services (% of GDP)", 55.0),
    ("NE.IMP.GNFS.ZS", "Imports of goods and services (% of GDP)", 45.0),
    ("BX.KLT.DINV.WD.GD.ZS", "Foreign direct investment, net inflows (% of GDP)", 2.0),
    ("GC.REV.XGRT.GD.ZS", "Revenue, excluding grants (% of GDP)", 30.0),
    ("MS.MIL.XPND.GD.ZS", "Military expenditure (% of GDP)", 5.0),
    ("MS.MIL.XPND.CD", "Military expenditure (current USD)", 1.0e10),
    ("MS.MIL.TOTL.P1", "Armed forces personnel, total", 6.0e4),
    ("SP.POP.TOTL", "Population, total", 4.0e6),
    ("SP.POP.GROW", "Population growth (annual %)", 2.5),
    ("SP.URB.TOTL.IN.ZS", "Urban population (% of total population)", 88.0),
    ("SP.DYN.LE00.IN", "Life expectancy at birth, total (years)", 76.0),
    ("SP.DYN.IMRT.IN", "Mortality rate, infant (per 1,000 live births)", 7.0),
    ("SP.DYN.TFRT.IN", "Fertility rate, total (births per woman)", 2.2),
    ("SH.XPD.CHEX.GD.ZS", "Current health expenditure (% of GDP)", 4.0),
    ("SE.XPD.TOTL.GD.ZS", "Government expenditure on education, total (% of GDP)", 4.0),
    ("SE.TER.ENRR", "School enrollment, tertiary (% gross)", 45.0),
    ("SL.UEM.TOTL.ZS", "Unemployment, total (% of total labor force)", 3.5),
    ("SL.TLF.CACT.ZS", "Labor force participation rate, total (% of total population ages 15+)", 70.0),
    ("SL.TLF.CACT.FE.ZS", "Labor force participation rate, female (% of female population ages 15+)", 35.0),
    ("IT.NET.USER.ZS", "Individuals using the Internet (% of population)", 85.0),
    ("IT.CEL.SETS.P2", "Mobile cellular subscriptions (per 100 people)", 150.0),
    ("EG.USE.PCAP.KG.OE", "Energy use (kg of oil equivalent per capita)", 9.0e3),
    ("EG.ELC.ACCS.ZS", "Access to electricity (% of population)", 99.0),
    ("EN.ATM.CO2E.PC", "CO2 emissions (metric tons per capita)", 20.0),
    ("NY.GDP.PETR.RT.ZS", "Oil rents (% of GDP)", 20.0),
    ("NY.GDP.TOTL.RT.ZS", "Total natural resources rents (% of GDP)", 25.0),
    ("TX.VAL.FUEL.ZS.UN", "Fuel exports (% of merchandise exports)", 70.0),
    ("ST.INT.ARVL", "International tourism, number of arrivals", 5.0e6),
    ("SM.POP.TOTL.ZS", "International migrant stock (% of population)", 50.0),
    ("VC.IHR.PSRC.P5", "Intentional homicides (per 100,000 people)", 1.0),
    ("IQ.CPA.PUBS.XQ", "CPIA public sector management and institutions cluster average", 3.5),
    ("GE.EST", "Government Effectiveness: Estimate", 0.5),
    ("RL.EST", "Rule of Law: Estimate", 0.4),
    ("PV.EST", "Political Stability and Absence of Violence/Terrorism: Estimate", 0.3),
    ("CC.EST", "Control of Corruption: Estimate", 0.3),
];

const N_LINKED: usize = 8;
const N_INVERTED: usize = 4;
const N_SPARSE: usize = 3;
const MISSING_RATE: f64 = 0.03;

/// The three files of the bundled fixture.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FixtureFiles {
    pub indicators_csv: String,
    pub target_csv: String,
    pub config_toml: String,
}

#[derive(Clone, Copy)]
enum Kind {
    Linked(f64),
    Sparse,
    Trend,
    Walk,
}

/// Rounds to `digits` significant digits and prints without exponent.
fn fmt_sig(v: f64, digits: i32) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let magnitude = v.abs().log10().floor() as i32;
    let decimals = (digits - 1 - magnitude).max(0) as usize;
    let v = if magnitude >= digits {
        let unit = 10f64.powi(magnitude - digits + 1);
        (v / unit).round() * unit
    } else {
        v
    };
    let s = format!("{v:.decimals$}");
    let s = if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

fn parse(s: &str) -> f64 {
    s.parse().expect("formatted number parses")
}

fn country_series(country: &str, level: f64, rng: &mut TrainRng) -> (Vec<f64>, Vec<IndicatorSeries>) {
    let years = (LAST_YEAR - FIRST_YEAR + 1) as usize;
    let period = rng.random_range(6.0..11.0);
    let phase = rng.random_range(0.0..TAU);
    let amp = rng.random_range(0.05..0.09);
    let drift = rng.random_range(-0.004..0.004);
    // unit-scale cycle shared by the target and the linked indicators
    let cycle: Vec<f64> = (0..years)
        .map(|t| (TAU * t as f64 / period + phase).sin() + drift / amp * (t as f64 - 7.5))
        .collect();
    let target: Vec<f64> = cycle
        .iter()
        .map(|c| parse(&fmt_sig(level + amp * c + rng.random_range(-0.01..0.01), 4)))
        .collect();

    let mut order: Vec<usize> = (0..INDICATORS.len()).collect();
    fisher_yates(&mut order, rng);
    let mut kinds = vec![Kind::Walk; INDICATORS.len()];
    for (rank, &i) in order.iter().enumerate() {
        kinds[i] = match rank {
            r if r < N_LINKED => Kind::Linked(rng.random_range(0.05..0.2)),
            r if r < N_LINKED + N_INVERTED => Kind::Linked(-rng.random_range(0.05..0.2)),
            r if r < N_LINKED + N_INVERTED + N_SPARSE => Kind::Sparse,
            r if r % 2 == 0 => Kind::Trend,
            _ => Kind::Walk,
        };
    }

    let series = INDICATORS
        .iter()
        .zip(kinds)
        .map(|(&(code, name, scale), kind)| {
            let base: f64 = scale * rng.random_range(0.6..1.4);
            let growth: f64 = rng.random_range(-0.03..0.05);
            let mut walk = base;
            let observations: BTreeMap<i32, Option<f64>> = (0..years)
                .map(|t| {
                    let value = match kind {
                        Kind::Linked(rel) => base * (1.0 + rel * cycle[t] + rng.random_range(-0.01..0.01)),
                        Kind::Trend => base * (1.0 + growth).powi(t as i32) * (1.0 + rng.random_range(-0.02..0.02)),
                        Kind::Walk | Kind::Sparse => {
                            walk += base * rng.random_range(-0.08..0.08);
                            walk
                        }
                    };
                    let missing_rate = if matches!(kind, Kind::Sparse) { 0.55 } else { MISSING_RATE };
                    let cell = (!rng.random_bool(missing_rate)).then(|| parse(&fmt_sig(value, 5)));
                    (FIRST_YEAR + t as i32, cell)
                })
                .collect();
            IndicatorSeries {
                country: country.to_string(),
                indicator_code: code.to_string(),
                indicator_name: name.to_string(),
                observations,
            }
        })
        .collect();
    (target, series)
}

const CONFIG: &str = r#"# Bundled synthetic GCC panel. Regenerate with `gen-fixture`.
seed = 42
year_range = [2008, 2023]

[paths]
indicators = "indicators.csv"
target = "target.csv"
output = "out"

[edr]
epsilon = 0.25
k = 10
coverage_threshold = 0.7

[split]
last_train_year = 2017

[cv]
k = 3
shuffled = false

[grid]
n_estimators = [100, 500, 1000]
learning_rate = [0.01, 0.1, 0.3]
max_depth = [3, 5, 7]

[forecast]
horizon = 5
trend_window = 8
"#;

pub fn generate(seed: u64) -> FixtureFiles {
    let mut rng = rng_from_seed(seed);
    let mut all_series = Vec::new();
    let mut target_csv = String::from("country,year,value\n");
    for (country, level) in COUNTRIES {
        let (target, series) = country_series(country, level, &mut rng);
        for (t, v) in target.iter().enumerate() {
            let _ = writeln!(target_csv, "{country},{},{v}", FIRST_YEAR + t as i32);
        }
        all_series.extend(series);
    }
    let mut indicators = Vec::new();
    write_wdi_csv(&all_series, &mut indicators).expect("in-memory write");
    FixtureFiles {
        indicators_csv: String::from_utf8(indicators).expect("csv is utf-8"),
        target_csv,
        config_toml: CONFIG.to_string(),
    }
}
