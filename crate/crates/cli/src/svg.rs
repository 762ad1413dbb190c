//! Actual-vs-predicted line charts as plain SVG markup.

use std::fmt::Write;

use panelcast::eval::BacktestReport;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 360.0;
const LEFT: f64 = 56.0;
const RIGHT: f64 = 16.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 40.0;

const ACTUAL_COLOR: &str = "#1f77b4";
const PREDICTED_COLOR: &str = "#d62728";

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// One chart per country: actual and predicted target by year, with the
/// train/test boundary marked.
pub fn backtest_chart(report: &BacktestReport) -> String {
    let years: Vec<f64> = report.rows.iter().map(|r| f64::from(r.year)).collect();
    let values = report.rows.iter().flat_map(|r| [r.actual, r.predicted]);
    let (mut lo, mut hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !(lo.is_finite() && hi.is_finite()) {
        (lo, hi) = (0.0, 1.0);
    }
    let pad = ((hi - lo) * 0.1).max(1e-6);
    let (lo, hi) = (lo - pad, hi + pad);
    let (x0, x1) = match (years.first(), years.last()) {
        (Some(&a), Some(&b)) if b > a => (a, b),
        (Some(&a), _) => (a - 1.0, a + 1.0),
        _ => (0.0, 1.0),
    };
    let px = |x: f64| LEFT + (x - x0) / (x1 - x0) * (WIDTH - LEFT - RIGHT);
    let py = |y: f64| HEIGHT - BOTTOM - (y - lo) / (hi - lo) * (HEIGHT - TOP - BOTTOM);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}: actual vs predicted</text>"#,
        WIDTH / 2.0,
        escape(&report.country)
    );
    // axes
    let _ = writeln!(
        s,
        r#"<path d="M{LEFT} {TOP} V{:.2} H{:.2}" fill="none" stroke="black"/>"#,
        HEIGHT - BOTTOM,
        WIDTH - RIGHT
    );
    for i in 0..=4 {
        let v = lo + (hi - lo) * f64::from(i) / 4.0;
        let y = py(v);
        let _ = writeln!(
            s,
            r##"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{v:.3}</text>"##,
            LEFT - 4.0,
            LEFT - 6.0,
            y + 4.0
        );
    }
    for (i, &year) in years.iter().enumerate() {
        let x = px(year);
        let _ = write!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            HEIGHT - BOTTOM,
            HEIGHT - BOTTOM + 4.0
        );
        if i % 2 == 0 || years.len() <= 8 {
            let _ = write!(
                s,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{year}</text>"#,
                HEIGHT - BOTTOM + 16.0
            );
        }
        s.push('\n');
    }
    // train/test boundary halfway between the last train and first test year
    let boundary = f64::from(report.last_train_year) + 0.5;
    if boundary > x0 && boundary < x1 {
        let x = px(boundary);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{TOP}" x2="{x:.2}" y2="{:.2}" stroke="gray" stroke-dasharray="4 3"/>"#,
            HEIGHT - BOTTOM
        );
    }
    for (color, pick, dash) in [
        (ACTUAL_COLOR, 0, ""),
        (PREDICTED_COLOR, 1, r#" stroke-dasharray="6 3""#),
    ] {
        let points: Vec<String> = report
            .rows
            .iter()
            .map(|r| {
                let v = if pick == 0 { r.actual } else { r.predicted };
                format!("{:.2},{:.2}", px(f64::from(r.year)), py(v))
            })
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="2"{dash}/>"#,
            points.join(" ")
        );
    }
    let legend_x = WIDTH - RIGHT - 110.0;
    for (i, (color, label)) in [(ACTUAL_COLOR, "actual"), (PREDICTED_COLOR, "predicted")]
        .into_iter()
        .enumerate()
    {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{legend_x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}">{label}</text>"#,
            legend_x + 20.0,
            legend_x + 26.0,
            y + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}
