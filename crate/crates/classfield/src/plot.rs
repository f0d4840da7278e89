//! Static SVG renderer for level-vs-log10 MSE curves. Pure string assembly:
//! identical input rows always produce byte-identical SVG.

use crate::error::{Error, Result};
use crate::eval::LevelSummary;
use std::fmt::Write as _;

const WIDTH: f64 = 820.0;
const HEIGHT: f64 = 520.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 50.0;
const MARGIN_B: f64 = 60.0;

/// Fixed method palette so colors are stable across runs.
fn color(method: &str) -> &'static str {
    match method {
        "cfp" => "#d62728",
        "avg" => "#1f77b4",
        "const" => "#2ca02c",
        "affine" => "#9467bd",
        _ => "#7f7f7f",
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

/// Parse rows written by `summary_csv`.
pub fn parse_summary_csv(text: &str) -> Result<Vec<LevelSummary>> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::InvalidArgument("empty CSV".into()))?;
    if header.trim() != "method,level,log10_mse_mean,log10_mse_std" {
        return Err(Error::InvalidArgument(format!(
            "unexpected CSV header '{header}'"
        )));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 4 {
            return Err(Error::InvalidArgument(format!(
                "line {}: expected 4 columns, got {}",
                i + 2,
                cols.len()
            )));
        }
        let parse = |s: &str| {
            s.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", i + 2)))
        };
        rows.push(LevelSummary {
            method: cols[0].to_string(),
            level: cols[1]
                .parse()
                .map_err(|e| Error::InvalidArgument(format!("line {}: {e}", i + 2)))?,
            log10_mse_mean: parse(cols[2])?,
            log10_mse_std: parse(cols[3])?,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("CSV has no data rows".into()));
    }
    Ok(rows)
}

/// Render per-method curves of log10 MSE against rollout level, with ±1 std
/// bands, on a log-scale (log10-valued) vertical axis.
pub fn render_level_curves(rows: &[LevelSummary], title: &str) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::InvalidArgument("no rows to plot".into()));
    }
    let min_l = rows.iter().map(|r| r.level).min().unwrap() as f64;
    let max_l = rows.iter().map(|r| r.level).max().unwrap() as f64;
    let lo = rows
        .iter()
        .map(|r| r.log10_mse_mean - r.log10_mse_std)
        .fold(f64::INFINITY, f64::min);
    let hi = rows
        .iter()
        .map(|r| r.log10_mse_mean + r.log10_mse_std)
        .fold(f64::NEG_INFINITY, f64::max);
    let (y_lo, y_hi) = (lo.floor(), hi.ceil().max(lo.floor() + 1.0));
    let span_l = (max_l - min_l).max(1.0);
    let px = |l: f64| MARGIN_L + (l - min_l) / span_l * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y - y_lo) / (y_hi - y_lo) * (HEIGHT - MARGIN_T - MARGIN_B);

    // stable method ordering: first appearance in the rows
    let mut methods: Vec<&str> = Vec::new();
    for r in rows {
        if !methods.contains(&r.method.as_str()) {
            methods.push(&r.method);
        }
    }

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n"
    );
    let _ = write!(svg, "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n");
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"28\" font-family=\"sans-serif\" font-size=\"18\" text-anchor=\"middle\">{title}</text>\n",
        fmt((MARGIN_L + WIDTH - MARGIN_R) / 2.0)
    );
    // axes
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(py(y_lo)),
        fmt(WIDTH - MARGIN_R),
        fmt(py(y_lo))
    );
    let _ = write!(
        svg,
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(MARGIN_L),
        fmt(py(y_lo)),
        fmt(MARGIN_L),
        fmt(py(y_hi))
    );
    // y ticks at integer log10 values, labelled as powers of ten
    let mut y = y_lo;
    while y <= y_hi + 1e-9 {
        let _ = write!(
            svg,
            "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#cccccc\"/>\n",
            fmt(MARGIN_L),
            fmt(py(y)),
            fmt(WIDTH - MARGIN_R),
            fmt(py(y))
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"end\">1e{}</text>\n",
            fmt(MARGIN_L - 8.0),
            fmt(py(y) + 4.0),
            y as i64
        );
        y += 1.0;
    }
    // x ticks at integer levels
    let mut l = min_l;
    while l <= max_l + 1e-9 {
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n",
            fmt(px(l)),
            fmt(HEIGHT - MARGIN_B + 20.0),
            l as i64
        );
        l += 1.0;
    }
    let _ = write!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">rollout level</text>\n",
        fmt((MARGIN_L + WIDTH - MARGIN_R) / 2.0),
        fmt(HEIGHT - 14.0)
    );
    let _ = write!(
        svg,
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">MSE (log scale)</text>\n",
        fmt(HEIGHT / 2.0),
        fmt(HEIGHT / 2.0)
    );

    for (mi, method) in methods.iter().enumerate() {
        let mut pts: Vec<&LevelSummary> = rows.iter().filter(|r| &r.method == method).collect();
        pts.sort_by_key(|r| r.level);
        let c = color(method);
        // ±1 std band
        let mut band = String::new();
        for r in &pts {
            let _ = write!(
                band,
                "{},{} ",
                fmt(px(r.level as f64)),
                fmt(py(r.log10_mse_mean + r.log10_mse_std))
            );
        }
        for r in pts.iter().rev() {
            let _ = write!(
                band,
                "{},{} ",
                fmt(px(r.level as f64)),
                fmt(py(r.log10_mse_mean - r.log10_mse_std))
            );
        }
        let _ = write!(
            svg,
            "<polygon points=\"{}\" fill=\"{c}\" opacity=\"0.15\"/>\n",
            band.trim_end()
        );
        // mean curve
        let mut line = String::new();
        for r in &pts {
            let _ = write!(line, "{},{} ", fmt(px(r.level as f64)), fmt(py(r.log10_mse_mean)));
        }
        let _ = write!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{c}\" stroke-width=\"2\"/>\n",
            line.trim_end()
        );
        for r in &pts {
            let _ = write!(
                svg,
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{c}\"/>\n",
                fmt(px(r.level as f64)),
                fmt(py(r.log10_mse_mean))
            );
        }
        // legend entry
        let ly = MARGIN_T + 22.0 * mi as f64;
        let _ = write!(
            svg,
            "<rect x=\"{}\" y=\"{}\" width=\"14\" height=\"14\" fill=\"{c}\"/>\n",
            fmt(WIDTH - MARGIN_R + 16.0),
            fmt(ly)
        );
        let _ = write!(
            svg,
            "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\">{method}</text>\n",
            fmt(WIDTH - MARGIN_R + 36.0),
            fmt(ly + 12.0)
        );
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}
