//! Result emission: CSV tables, JSON summaries, and SVG rate plots.
//!
//! The CSV table holds one row per (prior, n, replicate) cell with floats
//! printed in shortest round-trip form, so re-parsing reproduces the report
//! table bit for bit and repeated runs of a deterministic experiment yield
//! byte-identical files. The SVG plot shows replicate-mean median errors on
//! log10 axes with the fitted lines and one guide line per theoretical
//! exponent.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::experiment::{CellResult, RateReport, FUNCTIONAL_L2};
use crate::exponents::to_f64;
use crate::io::write_atomic;

/// Column order of the per-cell CSV table.
pub const CSV_HEADER: &str = "prior,n,replicate,median_l2,q90_l2,median_pred,q90_pred,pcn_acceptance";

/// One row per cell; an empty report yields only the header line.
pub fn cells_to_csv(cells: &[CellResult]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            c.prior,
            c.n,
            c.replicate,
            c.median_l2,
            c.q90_l2,
            c.median_pred,
            c.q90_pred,
            c.pcn_acceptance
        ));
    }
    out
}

/// Parses a table produced by [`cells_to_csv`]; the round trip is exact.
pub fn cells_from_csv(text: &str) -> Result<Vec<CellResult>> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => {
            return Err(Error::config(format!(
                "unexpected CSV header {other:?}, want {CSV_HEADER:?}"
            )))
        }
    }
    let mut cells = Vec::new();
    for (idx, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(Error::config(format!(
                "CSV row {} has {} fields, want 8",
                idx + 2,
                fields.len()
            )));
        }
        let num = |s: &str| -> Result<f64> {
            s.parse::<f64>()
                .map_err(|_| Error::config(format!("bad float {s:?} in CSV row {}", idx + 2)))
        };
        let int = |s: &str| -> Result<usize> {
            s.parse::<usize>()
                .map_err(|_| Error::config(format!("bad integer {s:?} in CSV row {}", idx + 2)))
        };
        cells.push(CellResult {
            prior: fields[0].to_string(),
            n: int(fields[1])?,
            replicate: int(fields[2])?,
            median_l2: num(fields[3])?,
            q90_l2: num(fields[4])?,
            median_pred: num(fields[5])?,
            q90_pred: num(fields[6])?,
            pcn_acceptance: num(fields[7])?,
        });
    }
    Ok(cells)
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 480.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 30.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b", "#e377c2",
];

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN_L + (x - self.x_min) / (self.x_max - self.x_min) * (PLOT_W - MARGIN_L - MARGIN_R)
    }

    fn py(&self, y: f64) -> f64 {
        PLOT_H - MARGIN_B
            - (y - self.y_min) / (self.y_max - self.y_min) * (PLOT_H - MARGIN_T - MARGIN_B)
    }
}

fn fmt(v: f64) -> String {
    format!("{v:.2}")
}

/// Log-log rate plot: replicate-mean median L2 errors per prior, dashed
/// fitted lines, and one dotted guide line per theoretical exponent, all on
/// log10 axes. Returns a complete SVG document.
pub fn rate_plot_svg(report: &RateReport) -> String {
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{PLOT_W}\" height=\"{PLOT_H}\" \
         viewBox=\"0 0 {PLOT_W} {PLOT_H}\" font-family=\"monospace\" font-size=\"11\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    let labels = report.plan.labels();
    let mut points: Vec<(usize, f64, f64)> = Vec::new();
    for agg in &report.aggregates {
        if agg.mean_median_l2 > 0.0 {
            let prior_idx = labels.iter().position(|l| *l == agg.prior).unwrap_or(0);
            points.push((
                prior_idx,
                (agg.n as f64).log10(),
                agg.mean_median_l2.log10(),
            ));
        }
    }
    if points.is_empty() {
        svg.push_str("<text x=\"50%\" y=\"50%\" text-anchor=\"middle\">no data</text>\n</svg>\n");
        return svg;
    }

    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for &(_, x, y) in &points {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(y);
        y_max = y_max.max(y);
    }
    if x_max - x_min < 1e-9 {
        x_min -= 0.5;
        x_max += 0.5;
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.5;
        y_max += 0.5;
    }
    let y_pad = 0.15 * (y_max - y_min);
    let frame = Frame {
        x_min,
        x_max,
        y_min: y_min - y_pad,
        y_max: y_max + y_pad,
    };
    let x_centroid = points.iter().map(|p| p.1).sum::<f64>() / points.len() as f64;
    let y_centroid = points.iter().map(|p| p.2).sum::<f64>() / points.len() as f64;

    // Axes with end-point labels.
    let (left, right) = (frame.px(frame.x_min), frame.px(frame.x_max));
    let (bottom, top) = (frame.py(frame.y_min), frame.py(frame.y_max));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(left),
        fmt(bottom),
        fmt(right),
        fmt(bottom)
    ));
    svg.push_str(&format!(
        "<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n",
        fmt(left),
        fmt(bottom),
        fmt(left),
        fmt(top)
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">log10 n</text>\n",
        fmt((left + right) / 2.0),
        fmt(PLOT_H - 12.0)
    ));
    svg.push_str(&format!(
        "<text x=\"14\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">log10 L2 error</text>\n",
        fmt((top + bottom) / 2.0),
        fmt((top + bottom) / 2.0)
    ));
    for (x, anchor) in [(frame.x_min, "start"), (frame.x_max, "end")] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"{anchor}\">{}</text>\n",
            fmt(frame.px(x)),
            fmt(bottom + 16.0),
            fmt(x)
        ));
    }
    for y in [frame.y_min, frame.y_max] {
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
            fmt(left - 6.0),
            fmt(frame.py(y) + 4.0),
            fmt(y)
        ));
    }

    svg.push_str(&format!(
        "<clipPath id=\"plot\"><rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\"/></clipPath>\n",
        fmt(left),
        fmt(top),
        fmt(right - left),
        fmt(bottom - top)
    ));
    svg.push_str("<g clip-path=\"url(#plot)\">\n");

    // Guide lines: slope -exponent through the data centroid.
    if let Some(exp) = &report.exponents {
        for (name, rat) in exp.entries() {
            let slope = -to_f64(rat);
            let y_at = |x: f64| y_centroid + slope * (x - x_centroid);
            svg.push_str(&format!(
                "<line class=\"guide\" data-label=\"{name}\" data-exponent=\"{rat}\" \
                 x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"#999999\" \
                 stroke-dasharray=\"2,3\"/>\n",
                fmt(frame.px(frame.x_min)),
                fmt(frame.py(y_at(frame.x_min))),
                fmt(frame.px(frame.x_max)),
                fmt(frame.py(y_at(frame.x_max)))
            ));
        }
    }

    // Fitted lines (natural-log fit converted to log10 axes).
    for fit in report.fits.iter().filter(|f| f.functional == FUNCTIONAL_L2) {
        let prior_idx = labels.iter().position(|l| *l == fit.prior).unwrap_or(0);
        let color = PALETTE[prior_idx % PALETTE.len()];
        let y_at = |x10: f64| fit.fit.intercept / std::f64::consts::LN_10 + fit.fit.slope * x10;
        svg.push_str(&format!(
            "<line class=\"fit\" data-prior=\"{}\" x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" \
             stroke=\"{color}\" stroke-dasharray=\"6,3\"/>\n",
            fit.prior,
            fmt(frame.px(frame.x_min)),
            fmt(frame.py(y_at(frame.x_min))),
            fmt(frame.px(frame.x_max)),
            fmt(frame.py(y_at(frame.x_max)))
        ));
    }

    // Data points and connecting polylines per prior.
    for (idx, label) in labels.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        let mut series: Vec<(f64, f64)> = points
            .iter()
            .filter(|(p, _, _)| *p == idx)
            .map(|&(_, x, y)| (x, y))
            .collect();
        if series.is_empty() {
            continue;
        }
        series.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite coordinates"));
        let path: Vec<String> = series
            .iter()
            .map(|&(x, y)| format!("{},{}", fmt(frame.px(x)), fmt(frame.py(y))))
            .collect();
        svg.push_str(&format!(
            "<polyline class=\"data\" data-prior=\"{label}\" points=\"{}\" fill=\"none\" \
             stroke=\"{color}\" stroke-width=\"1.5\"/>\n",
            path.join(" ")
        ));
        for &(x, y) in &series {
            svg.push_str(&format!(
                "<circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{color}\"/>\n",
                fmt(frame.px(x)),
                fmt(frame.py(y))
            ));
        }
    }
    svg.push_str("</g>\n");

    // Legend: priors in color, then guide-line labels in grey.
    let mut legend_y = MARGIN_T + 8.0;
    for (idx, label) in labels.iter().enumerate() {
        let color = PALETTE[idx % PALETTE.len()];
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" fill=\"{color}\">{label}</text>\n",
            fmt(PLOT_W - MARGIN_R - 220.0),
            fmt(legend_y)
        ));
        legend_y += 14.0;
    }
    if let Some(exp) = &report.exponents {
        for (name, rat) in exp.entries() {
            svg.push_str(&format!(
                "<text x=\"{}\" y=\"{}\" fill=\"#999999\">guide {name}: -{rat}</text>\n",
                fmt(PLOT_W - MARGIN_R - 220.0),
                fmt(legend_y)
            ));
            legend_y += 14.0;
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Writes `cells.csv`, `report.json`, and `rates.svg` into `dir`, creating
/// it if needed, and returns the written paths.
pub fn save_report(report: &RateReport, dir: &Path) -> Result<Vec<PathBuf>> {
    let csv_path = dir.join("cells.csv");
    let json_path = dir.join("report.json");
    let svg_path = dir.join("rates.svg");
    write_atomic(&csv_path, cells_to_csv(&report.cells).as_bytes())?;
    crate::io::save_json(report, &json_path)?;
    write_atomic(&svg_path, rate_plot_svg(report).as_bytes())?;
    Ok(vec![csv_path, json_path, svg_path])
}
