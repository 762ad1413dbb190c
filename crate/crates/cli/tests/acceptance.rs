//! Acceptance criteria, one PASS/FAIL line each. Runs without the test
//! harness so the lines always reach the output.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use common::{check_tree, dyadic_instance, oracle_leaf, rng, sse_exact};
use panelcast::edr::edr_distance;
use panelcast::eval::{mape, EvalError};
use panelcast::gbtree::{deserialize_model, fit_matrix, grow_tree, leaf_weight, serialize_model, HyperParams};
use panelcast::panel::CountryPanel;
use panelcast::sampling::{fisher_yates, rng_from_seed};
use panelcast::tuning::{grid_search, CvConfig, GridSpec};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn split_oracle() -> Outcome {
    let start = Instant::now();
    let mut r = rng(2025);
    for case in 0..200 {
        let inst = dyadic_instance(&mut r);
        let rows: Vec<usize> = (0..inst.x.len()).collect();
        let tree = grow_tree(&rows, &inst.x, &inst.g, &inst.h, &inst.params, &mut rng_from_seed(0))
            .map_err(|e| format!("case {case}: {e}"))?;
        check_tree(&inst, &tree, 1e-9).map_err(|m| format!("case {case}: {m}"))?;
    }
    let elapsed = start.elapsed();
    ensure(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("200 instances agree within 1e-9 in {elapsed:.2?}"))
}

fn leaf_weights() -> Outcome {
    let mut n = 0;
    let mut worst = 0.0f64;
    for g in [-12.0, -5.5, -1.0, -0.25, 0.0, 0.25, 1.0, 3.0, 7.75, 20.0] {
        for h in [0.5, 1.0, 4.0, 16.0] {
            for lambda in [0.0, 0.5, 1.0, 5.0, 10.0] {
                for alpha in [0.0, 0.1, 1.0, 5.0, 10.0, 25.0] {
                    let w = leaf_weight(g, h, lambda, alpha).map_err(|e| e.to_string())?;
                    let diff = (w - oracle_leaf(g, h, lambda, alpha)).abs();
                    worst = worst.max(diff);
                    ensure(diff <= 1e-12, || format!("G={g} H={h} λ={lambda} α={alpha}: {w}"))?;
                    n += 1;
                }
            }
        }
    }
    Ok(format!("{n} grid points, max deviation {worst:e}"))
}

fn random_dataset(r: &mut ChaCha8Rng) -> (Vec<Vec<Option<f64>>>, Vec<f64>) {
    let n = r.random_range(5..40);
    let k = r.random_range(1..5);
    let x = (0..n)
        .map(|_| {
            (0..k)
                .map(|_| (!r.random_bool(0.1)).then(|| r.random_range(-10.0..10.0)))
                .collect()
        })
        .collect();
    let y = (0..n).map(|_| r.random_range(-5.0..5.0)).collect();
    (x, y)
}

fn codes(k: usize) -> Vec<String> {
    (0..k).map(|j| format!("F{j}")).collect()
}

fn monotonicity() -> Outcome {
    let mut r = rng(404);
    let mut checked = 0;
    for dataset in 0..50 {
        let (x, y) = random_dataset(&mut r);
        for lr in [0.1, 0.5, 1.0] {
            let params = HyperParams {
                n_estimators: 50,
                learning_rate: lr,
                max_depth: r.random_range(1..6),
                gamma: 0.0,
                alpha: 0.0,
                lambda: [0.0, 1.0, 3.0][r.random_range(0..3)],
                subsample: 1.0,
                colsample_bytree: 1.0,
                colsample_bylevel: 1.0,
                ..HyperParams::default()
            };
            let model = fit_matrix(&x, &y, &codes(x[0].len()), &params, 1).map_err(|e| e.to_string())?;
            let mut pred = vec![model.base_score; y.len()];
            let mut prev = sse_exact(&y, &pred);
            for (t, tree) in model.trees.iter().enumerate() {
                for (p, row) in pred.iter_mut().zip(&x) {
                    *p += lr * tree.predict(row);
                }
                let cur = sse_exact(&y, &pred);
                ensure(cur <= prev, || {
                    format!("dataset {dataset}, lr {lr}, round {t}: sum of squares rose by {}", &cur - &prev)
                })?;
                prev = cur;
                checked += 1;
            }
        }
    }
    Ok(format!("{checked} rounds, 0 violations"))
}

fn naive_edr(a: &[f64], b: &[f64], eps: f64) -> usize {
    match (a, b) {
        ([], _) => b.len(),
        (_, []) => a.len(),
        ([x, ra @ ..], [y, rb @ ..]) => {
            let subst = naive_edr(ra, rb, eps) + usize::from((x - y).abs() > eps);
            subst
                .min(naive_edr(ra, b, eps) + 1)
                .min(naive_edr(a, rb, eps) + 1)
        }
    }
}

fn edr_oracle() -> Outcome {
    let mut r = rng(77);
    let values = [-1.0, -0.5, -0.25, 0.0, 0.1, 0.25, 0.6, 1.0, 2.0];
    let seq = |r: &mut ChaCha8Rng, max: usize| -> Vec<f64> {
        let n = r.random_range(0..=max);
        (0..n).map(|_| values[r.random_range(0..values.len())]).collect()
    };
    for case in 0..500 {
        let a = seq(&mut r, 7);
        let b = seq(&mut r, 7);
        let eps = [0.1, 0.25, 0.5][r.random_range(0..3)];
        let dp = edr_distance(&a, &b, eps).map_err(|e| e.to_string())?;
        let naive = naive_edr(&a, &b, eps);
        ensure(dp == naive, || format!("case {case}: {a:?} {b:?} ε={eps}: {dp} vs {naive}"))?;
    }
    for case in 0..10_000 {
        let n = r.random_range(0..30);
        let m = r.random_range(0..30);
        let a: Vec<f64> = (0..n).map(|_| r.random_range(-2.0..2.0)).collect();
        let b: Vec<f64> = (0..m).map(|_| r.random_range(-2.0..2.0)).collect();
        let d = edr_distance(&a, &b, 0.25).map_err(|e| e.to_string())?;
        let d_rev = edr_distance(&b, &a, 0.25).map_err(|e| e.to_string())?;
        ensure(d == d_rev, || format!("pair {case}: asymmetric {d} vs {d_rev}"))?;
        ensure(d <= n.max(m), || format!("pair {case}: {d} > max({n}, {m})"))?;
    }
    Ok("500 exact matches, 10000 pairs symmetric and bounded".into())
}

fn direct_mape(a: &[f64], f: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += ((a[i] - f[i]) / a[i]).abs();
    }
    100.0 * s / a.len() as f64
}

fn mape_criteria() -> Outcome {
    let mut r = rng(5);
    let mut worst = 0.0f64;
    for _ in 0..2000 {
        let n = r.random_range(1..50);
        let a: Vec<f64> = (0..n)
            .map(|_| {
                let v: f64 = r.random_range(0.1..100.0);
                if r.random_bool(0.3) {
                    -v
                } else {
                    v
                }
            })
            .collect();
        let f: Vec<f64> = a.iter().map(|v| v * r.random_range(0.5..1.5)).collect();
        let got = mape(&a, &f).map_err(|e| e.to_string())?;
        let diff = (got - direct_mape(&a, &f)).abs();
        worst = worst.max(diff);
        ensure(diff <= 1e-12, || format!("{got} vs direct {}", direct_mape(&a, &f)))?;

        // power-of-two scaling is exact in floating point
        let k = r.random_range(-20..=20);
        let c = 2f64.powi(k) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let ca: Vec<f64> = a.iter().map(|v| c * v).collect();
        let cf: Vec<f64> = f.iter().map(|v| c * v).collect();
        let scaled = mape(&ca, &cf).map_err(|e| e.to_string())?;
        ensure(scaled.to_bits() == got.to_bits(), || format!("c = {c}: {scaled} vs {got}"))?;

        // integer data and integer c keep every product exact
        let ia: Vec<f64> = (0..n)
            .map(|_| f64::from(r.random_range(1..10_000)) * if r.random_bool(0.5) { 1.0 } else { -1.0 })
            .collect();
        let ifc: Vec<f64> = (0..n).map(|_| f64::from(r.random_range(-10_000..10_000))).collect();
        let ic = f64::from(r.random_range(1..1000i32)) * if r.random_bool(0.5) { 1.0 } else { -1.0 };
        let base = mape(&ia, &ifc).map_err(|e| e.to_string())?;
        let sa: Vec<f64> = ia.iter().map(|v| ic * v).collect();
        let sf: Vec<f64> = ifc.iter().map(|v| ic * v).collect();
        let scaled = mape(&sa, &sf).map_err(|e| e.to_string())?;
        ensure(scaled.to_bits() == base.to_bits(), || format!("c = {ic}: {scaled} vs {base}"))?;
    }
    let example = mape(&[100.0, 200.0], &[110.0, 190.0]).map_err(|e| e.to_string())?;
    ensure((example - 7.5).abs() <= 1e-12, || format!("worked example gave {example}"))?;
    match mape(&[100.0, 0.0], &[1.0, 2.0]) {
        Err(EvalError::ZeroActual { index: 1 }) => {}
        other => return Err(format!("zero actual gave {other:?}")),
    }
    Ok(format!("2000 vectors, max deviation {worst:e}; scaling exact; zero actual rejected"))
}

fn tuning_panel(r: &mut ChaCha8Rng) -> CountryPanel {
    let n = 12;
    let years: Vec<i32> = (2006..2006 + n).collect();
    let features: Vec<Vec<Option<f64>>> = (0..n)
        .map(|_| (0..3).map(|_| Some(r.random_range(0.0..10.0))).collect())
        .collect();
    let target = features
        .iter()
        .map(|row| 5.0 + row[0].unwrap() * 0.3 + r.random_range(-0.5..0.5))
        .collect();
    CountryPanel {
        country: "TST".into(),
        years,
        target,
        feature_codes: codes(3),
        features,
    }
}

fn random_grid(r: &mut ChaCha8Rng) -> GridSpec {
    let mut pick = |pool: &[f64]| -> Option<Vec<f64>> {
        r.random_bool(0.6).then(|| {
            let mut p = pool.to_vec();
            fisher_yates(&mut p, r);
            p.truncate(r.random_range(1..=3));
            p
        })
    };
    let mut grid = GridSpec {
        learning_rate: pick(&[0.1, 0.3, 0.5, 1.0]),
        min_child_weight: pick(&[0.0, 1.0, 2.0]),
        gamma: pick(&[0.0, 0.1, 1.0]),
        subsample: pick(&[0.5, 0.8, 1.0]),
        lambda: pick(&[0.0, 1.0, 5.0]),
        ..GridSpec::default()
    };
    grid.n_estimators = r.random_bool(0.6).then(|| vec![2, 5, 8][..r.random_range(1..=3)].to_vec());
    grid.max_depth = r.random_bool(0.6).then(|| vec![1, 2, 3][..r.random_range(1..=3)].to_vec());
    grid
}

fn shuffled<T: Clone>(v: &Option<Vec<T>>, r: &mut ChaCha8Rng) -> Option<Vec<T>> {
    v.clone().map(|mut v| {
        fisher_yates(&mut v, r);
        v
    })
}

fn grid_exhaustive() -> Outcome {
    let mut r = rng(31);
    let mut tested = 0;
    let mut largest = 0;
    while tested < 30 {
        let grid = random_grid(&mut r);
        let card = grid.cardinality();
        if card > 81 {
            continue;
        }
        let panel = tuning_panel(&mut r);
        let cv = CvConfig {
            k: 3,
            shuffled: r.random_bool(0.3),
        };
        let res = grid_search(&panel, &grid, &cv, 9).map_err(|e| e.to_string())?;
        let rows = res.leaderboard.len() + res.disqualified.len();
        ensure(rows == card, || format!("{rows} leaderboard rows for {card} combinations"))?;
        for _ in 0..3 {
            let permuted = GridSpec {
                n_estimators: shuffled(&grid.n_estimators, &mut r),
                learning_rate: shuffled(&grid.learning_rate, &mut r),
                max_depth: shuffled(&grid.max_depth, &mut r),
                min_child_weight: shuffled(&grid.min_child_weight, &mut r),
                gamma: shuffled(&grid.gamma, &mut r),
                subsample: shuffled(&grid.subsample, &mut r),
                lambda: shuffled(&grid.lambda, &mut r),
                ..grid.clone()
            };
            let other = grid_search(&panel, &permuted, &cv, 9).map_err(|e| e.to_string())?;
            ensure(other.best_score.to_bits() == res.best_score.to_bits(), || {
                format!("best score {} vs {} after permutation", other.best_score, res.best_score)
            })?;
        }
        largest = largest.max(card);
        tested += 1;
    }
    // the largest case the criterion names
    let grid = GridSpec {
        n_estimators: Some(vec![2, 4, 6]),
        max_depth: Some(vec![1, 2, 3]),
        learning_rate: Some(vec![0.1, 0.3, 1.0]),
        lambda: Some(vec![0.0, 1.0, 5.0]),
        ..GridSpec::default()
    };
    let panel = tuning_panel(&mut r);
    let res = grid_search(&panel, &grid, &CvConfig::default(), 9).map_err(|e| e.to_string())?;
    ensure(res.leaderboard.len() + res.disqualified.len() == 81, || "81-combination grid".into())?;
    Ok(format!("{tested} random grids (up to {largest} combos) plus an 81-combo grid; permutations keep best_score"))
}

fn fixture_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fixtures/gcc")
}

fn copy_fixture(dir: &Path) {
    for name in ["indicators.csv", "target.csv", "config.toml"] {
        std::fs::copy(fixture_dir().join(name), dir.join(name)).unwrap();
    }
}

fn run_all(dir: &Path) -> Result<Duration, String> {
    let start = Instant::now();
    let o = Command::new(env!("CARGO_BIN_EXE_panelcast"))
        .arg("--config")
        .arg(dir.join("config.toml"))
        .arg("all")
        .output()
        .map_err(|e| e.to_string())?;
    let elapsed = start.elapsed();
    ensure(o.status.success(), || {
        format!("exit {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr))
    })?;
    Ok(elapsed)
}

fn snapshot(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                out.insert(path.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&path).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

const COUNTRIES: [&str; 6] = ["BHR", "KWT", "OMN", "QAT", "SAU", "ARE"];

/// Runs the pipeline once and leaves the outputs for the forecast check.
fn end_to_end(workdir: &Path) -> Outcome {
    let a = workdir.join("a");
    let b = workdir.join("b");
    for d in [&a, &b] {
        std::fs::create_dir_all(d).unwrap();
        copy_fixture(d);
    }
    let elapsed = run_all(&a)?;
    ensure(elapsed < Duration::from_secs(60), || format!("took {elapsed:?}"))?;

    let summary = std::fs::read_to_string(a.join("out/evaluate/summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().skip(1).collect();
    ensure(rows.len() == 6, || format!("{} summary rows", rows.len()))?;
    let mut worst = 0.0f64;
    for (row, country) in rows.iter().zip(COUNTRIES) {
        let cells: Vec<&str> = row.split(',').collect();
        ensure(cells[0] == country, || format!("row {row}"))?;
        for cell in &cells[1..] {
            let v: f64 = cell.parse().map_err(|_| format!("bad MAPE {cell}"))?;
            ensure(v.is_finite() && v < 10.0, || format!("{country}: MAPE {v}"))?;
            worst = worst.max(v);
        }
    }

    let first = snapshot(&a.join("out"));
    run_all(&a)?;
    ensure(snapshot(&a.join("out")) == first, || "rerun in place changed outputs".into())?;
    run_all(&b)?;
    let other = snapshot(&b.join("out"));
    ensure(other == first, || {
        let differing: Vec<_> = first
            .keys()
            .filter(|k| other.get(*k) != first.get(*k))
            .collect();
        format!("fresh rerun differs in {differing:?}")
    })?;
    Ok(format!(
        "{elapsed:.2?}, 6 summary rows, max MAPE {worst:.3}%, {} files byte-identical across reruns",
        first.len()
    ))
}

fn forecast_contract(workdir: &Path) -> Outcome {
    let text = std::fs::read_to_string(workdir.join("a/out/forecast/forecast.csv"))
        .map_err(|e| format!("no forecast from the end-to-end run: {e}"))?;
    let mut by_country: BTreeMap<String, Vec<(i32, f64)>> = BTreeMap::new();
    for line in text.lines().skip(1) {
        let cells: Vec<&str> = line.split(',').collect();
        ensure(cells.len() == 4 && cells[3] == "ols_trend_m8", || format!("row {line}"))?;
        let year: i32 = cells[1].parse().map_err(|_| format!("row {line}"))?;
        let value: f64 = cells[2].parse().map_err(|_| format!("row {line}"))?;
        ensure(value.is_finite(), || format!("row {line}"))?;
        by_country.entry(cells[0].to_string()).or_default().push((year, value));
    }
    ensure(by_country.len() == 6, || format!("{} countries", by_country.len()))?;
    for country in COUNTRIES {
        let years: Vec<i32> = by_country[country].iter().map(|p| p.0).collect();
        ensure(years == vec![2024, 2025, 2026, 2027, 2028], || format!("{country}: {years:?}"))?;
    }
    Ok("6 countries x 2024-2028, all finite".into())
}

fn serialization() -> Outcome {
    let mut r = rng(8080);
    let mut compared = 0u64;
    for m in 0..100 {
        let (x, y) = random_dataset(&mut r);
        let params = HyperParams {
            n_estimators: r.random_range(0..30),
            learning_rate: r.random_range(0.01..1.0),
            max_depth: r.random_range(0..7),
            lambda: r.random_range(0.0..3.0),
            alpha: r.random_range(0.0..0.5),
            gamma: r.random_range(0.0..0.2),
            subsample: r.random_range(0.5..=1.0),
            colsample_bytree: r.random_range(0.5..=1.0),
            ..HyperParams::default()
        };
        let k = x[0].len();
        let model = fit_matrix(&x, &y, &codes(k), &params, r.random()).map_err(|e| e.to_string())?;
        let back = deserialize_model(&serialize_model(&model)).map_err(|e| format!("model {m}: {e}"))?;
        for _ in 0..1000 {
            let row: Vec<Option<f64>> = (0..k)
                .map(|_| match r.random_range(0..10) {
                    0 => None,
                    1 => Some(f64::NAN),
                    _ => Some(r.random_range(-15.0..15.0)),
                })
                .collect();
            let a = model.predict(&row).map_err(|e| e.to_string())?;
            let b = back.predict(&row).map_err(|e| e.to_string())?;
            ensure(a.to_bits() == b.to_bits(), || format!("model {m}: {a} vs {b}"))?;
            compared += 1;
        }
    }
    Ok(format!("{compared} predictions, 0 ulp difference"))
}

fn main() {
    let workdir = tempfile::tempdir().expect("temp dir");
    let wd = workdir.path().to_path_buf();
    let criteria: Vec<(&str, Box<dyn Fn() -> Outcome>)> = vec![
        ("GBT split oracle", Box::new(split_oracle)),
        ("leaf-weight analytics", Box::new(leaf_weights)),
        ("training-loss monotonicity", Box::new(monotonicity)),
        ("EDR oracle", Box::new(edr_oracle)),
        ("MAPE", Box::new(mape_criteria)),
        ("grid exhaustiveness", Box::new(grid_exhaustive)),
        ("end-to-end fixture run", Box::new({
            let wd = wd.clone();
            move || end_to_end(&wd)
        })),
        ("forecast contract", Box::new({
            let wd = wd.clone();
            move || forecast_contract(&wd)
        })),
        ("model serialization round-trip", Box::new(serialization)),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS  {name}: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL  {name}: {why}");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
