//! Deterministic result emission: pinned-schema CSV tables and hand-rolled
//! SVG line plots. Every byte is a pure function of the report, so reruns
//! and different worker counts produce identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use super::{ConvergenceReport, EprReport, HarnessError, StabilityReport};

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------

/// Plain `{}` float formatting: shortest round-trip decimal, `NaN` for NaN.
macro_rules! csv_row {
    ($out:expr, $first:expr $(, $rest:expr)* $(,)?) => {{
        let _ = write!($out, "{}", $first);
        $( let _ = write!($out, ",{}", $rest); )*
        $out.push('\n');
    }};
}

/// Stability table: `epoch,mean_distance,std_distance,mean_sq_distance,bound_sq`.
/// A disabled certificate renders as `NaN` in the last column.
pub fn stability_csv(report: &StabilityReport) -> String {
    let mut out = String::from("epoch,mean_distance,std_distance,mean_sq_distance,bound_sq\n");
    for (i, epoch) in report.epochs_axis.iter().enumerate() {
        let bound = report.bound_sq.as_ref().map_or(f64::NAN, |b| b[i]);
        csv_row!(
            out,
            epoch,
            report.distance_stats[i].mean,
            report.distance_stats[i].std,
            report.sq_stats[i].mean,
            bound,
        );
    }
    out
}

/// Convergence table: `outer_step,mean_subopt,std_subopt,bound`.
pub fn convergence_csv(report: &ConvergenceReport) -> String {
    let mut out = String::from("outer_step,mean_subopt,std_subopt,bound\n");
    for (i, t) in report.grid.iter().enumerate() {
        let bound = report.bound.as_ref().map_or(f64::NAN, |b| b[i]);
        csv_row!(
            out,
            t,
            report.subopt_stats[i].mean,
            report.subopt_stats[i].std,
            bound,
        );
    }
    out
}

/// Excess-risk table: `n,mean_epr,std_epr,slope_to_date`.
pub fn epr_csv(report: &EprReport) -> String {
    let mut out = String::from("n,mean_epr,std_epr,slope_to_date\n");
    for (i, n) in report.n_grid.iter().enumerate() {
        csv_row!(out, n, report.stats[i].mean, report.stats[i].std, report.slopes[i]);
    }
    out
}

// ---------------------------------------------------------------------------
// SVG
// ---------------------------------------------------------------------------

const SVG_W: f64 = 800.0;
const SVG_H: f64 = 600.0;
const MARGIN_LEFT: f64 = 60.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 40.0;
const MARGIN_BOTTOM: f64 = 40.0;
const MEAN_COLOR: &str = "#1f77b4";
const BOUND_COLOR: &str = "#d62728";

struct PlotSpec<'a> {
    title: &'a str,
    x_label: &'a str,
    y_label: &'a str,
    x: &'a [f64],
    mean: &'a [f64],
    std: &'a [f64],
    /// Optional dashed overlay curve (a certificate).
    extra: Option<&'a [f64]>,
    /// Request log-log axes; falls back to linear unless every plotted
    /// value (including the band edges) is strictly positive and finite.
    log_log: bool,
}

fn finite_min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

fn polyline(points: &[(f64, f64)], color: &str, dashed: bool) -> String {
    let mut path = String::new();
    for (x, y) in points {
        let _ = write!(path, "{x:.2},{y:.2} ");
    }
    let dash = if dashed { " stroke-dasharray=\"6,4\"" } else { "" };
    format!(
        "<polyline fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"{dash} points=\"{}\"/>\n",
        path.trim_end()
    )
}

/// Renders an 800×600 plot with a ±1 std band, a solid mean curve, and an
/// optional dashed overlay. Purely textual — byte-deterministic.
fn render_line_plot(spec: &PlotSpec<'_>) -> String {
    let band_lo: Vec<f64> =
        spec.mean.iter().zip(spec.std).map(|(m, s)| m - s).collect();
    let band_hi: Vec<f64> =
        spec.mean.iter().zip(spec.std).map(|(m, s)| m + s).collect();

    let all_y = || {
        band_lo
            .iter()
            .chain(band_hi.iter())
            .chain(spec.mean.iter())
            .chain(spec.extra.into_iter().flatten())
            .copied()
    };
    let log_ok = spec.log_log
        && spec.x.iter().all(|&v| v > 0.0 && v.is_finite())
        && all_y().all(|v| v > 0.0 && v.is_finite());
    let tx = |v: f64| if log_ok { v.log10() } else { v };

    let (x_lo, x_hi) = finite_min_max(spec.x.iter().map(|&v| tx(v)));
    let (y_lo, y_hi) = finite_min_max(all_y().map(tx));
    let plot_w = SVG_W - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = SVG_H - MARGIN_TOP - MARGIN_BOTTOM;
    let px = |v: f64| MARGIN_LEFT + (tx(v) - x_lo) / (x_hi - x_lo) * plot_w;
    let py = |v: f64| {
        let t = tx(v);
        // Non-finite values (empty-band degeneracies) pin to the frame edge.
        let t = if t.is_finite() { t } else { y_lo };
        SVG_H - MARGIN_BOTTOM - (t - y_lo) / (y_hi - y_lo) * plot_h
    };

    let mut svg = String::new();
    let _ = write!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{SVG_W}\" height=\"{SVG_H}\" \
         viewBox=\"0 0 {SVG_W} {SVG_H}\">\n\
         <rect width=\"{SVG_W}\" height=\"{SVG_H}\" fill=\"white\"/>\n"
    );
    let _ = write!(
        svg,
        "<rect x=\"{MARGIN_LEFT}\" y=\"{MARGIN_TOP}\" width=\"{plot_w}\" height=\"{plot_h}\" \
         fill=\"none\" stroke=\"#333333\" stroke-width=\"1\"/>\n"
    );

    if !spec.x.is_empty() {
        // ±1 std band: forward along the upper edge, back along the lower.
        let mut band = String::new();
        for (x, y) in spec.x.iter().zip(&band_hi) {
            let _ = write!(band, "{:.2},{:.2} ", px(*x), py(*y));
        }
        for (x, y) in spec.x.iter().rev().zip(band_lo.iter().rev()) {
            let _ = write!(band, "{:.2},{:.2} ", px(*x), py(*y));
        }
        let _ = write!(
            svg,
            "<polygon fill=\"{MEAN_COLOR}\" fill-opacity=\"0.2\" stroke=\"none\" \
             points=\"{}\"/>\n",
            band.trim_end()
        );

        let mean_pts: Vec<(f64, f64)> =
            spec.x.iter().zip(spec.mean).map(|(x, y)| (px(*x), py(*y))).collect();
        svg.push_str(&polyline(&mean_pts, MEAN_COLOR, false));

        if let Some(extra) = spec.extra {
            let pts: Vec<(f64, f64)> =
                spec.x.iter().zip(extra).map(|(x, y)| (px(*x), py(*y))).collect();
            svg.push_str(&polyline(&pts, BOUND_COLOR, true));
        }
    }

    let axis_note = if log_ok { " (log-log)" } else { "" };
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" \
         text-anchor=\"middle\">{}{axis_note}</text>\n",
        SVG_W / 2.0,
        spec.title
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        SVG_H - 8.0,
        spec.x_label
    );
    let _ = write!(
        svg,
        "<text x=\"16\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"12\" \
         text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\">{}</text>\n",
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        spec.y_label
    );
    // Corner tick labels in compact scientific notation.
    let _ = write!(
        svg,
        "<text x=\"{MARGIN_LEFT}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
         text-anchor=\"middle\">{:.3e}</text>\n",
        SVG_H - MARGIN_BOTTOM + 14.0,
        if log_ok { 10f64.powf(x_lo) } else { x_lo }
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
         text-anchor=\"middle\">{:.3e}</text>\n",
        SVG_W - MARGIN_RIGHT,
        SVG_H - MARGIN_BOTTOM + 14.0,
        if log_ok { 10f64.powf(x_hi) } else { x_hi }
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
         text-anchor=\"end\">{:.3e}</text>\n",
        MARGIN_LEFT - 4.0,
        SVG_H - MARGIN_BOTTOM,
        if log_ok { 10f64.powf(y_lo) } else { y_lo }
    );
    let _ = write!(
        svg,
        "<text x=\"{:.2}\" y=\"{:.2}\" font-family=\"sans-serif\" font-size=\"10\" \
         text-anchor=\"end\">{:.3e}</text>\n",
        MARGIN_LEFT - 4.0,
        MARGIN_TOP + 10.0,
        if log_ok { 10f64.powf(y_hi) } else { y_hi }
    );
    svg.push_str("</svg>\n");
    svg
}

// ---------------------------------------------------------------------------
// Emission
// ---------------------------------------------------------------------------

fn write_file(path: &Path, contents: &str) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|source| HarnessError::Io { path: dir.display().to_string(), source })?;
    }
    std::fs::write(path, contents)
        .map_err(|source| HarnessError::Io { path: path.display().to_string(), source })
}

/// Writes `<stem>.csv` and `<stem>.svg` under `dir`; returns the manifest.
/// The plot shows the distance scale, so the squared-distance certificate is
/// drawn as its square root.
pub fn emit_stability(
    report: &StabilityReport,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    write_file(&csv_path, &stability_csv(report))?;

    let mean: Vec<f64> = report.distance_stats.iter().map(|s| s.mean).collect();
    let std: Vec<f64> = report.distance_stats.iter().map(|s| s.std).collect();
    let bound_dist: Option<Vec<f64>> =
        report.bound_sq.as_ref().map(|b| b.iter().map(|v| v.sqrt()).collect());
    let title = format!("{} stability (n = {})", report.method, report.n);
    let svg = render_line_plot(&PlotSpec {
        title: &title,
        x_label: "data passes",
        y_label: "coupled distance",
        x: &report.epochs_axis,
        mean: &mean,
        std: &std,
        extra: bound_dist.as_deref(),
        log_log: false,
    });
    let svg_path = dir.join(format!("{stem}.svg"));
    write_file(&svg_path, &svg)?;
    Ok(vec![csv_path, svg_path])
}

/// Writes `<stem>.csv` and `<stem>.svg` under `dir`; returns the manifest.
pub fn emit_convergence(
    report: &ConvergenceReport,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    write_file(&csv_path, &convergence_csv(report))?;

    let x: Vec<f64> = report.grid.iter().map(|&t| t as f64).collect();
    let mean: Vec<f64> = report.subopt_stats.iter().map(|s| s.mean).collect();
    let std: Vec<f64> = report.subopt_stats.iter().map(|s| s.std).collect();
    let title = format!("{} convergence (n = {})", report.method, report.n);
    let svg = render_line_plot(&PlotSpec {
        title: &title,
        x_label: "outer units",
        y_label: "suboptimality",
        x: &x,
        mean: &mean,
        std: &std,
        extra: report.bound.as_deref(),
        log_log: false,
    });
    let svg_path = dir.join(format!("{stem}.svg"));
    write_file(&svg_path, &svg)?;
    Ok(vec![csv_path, svg_path])
}

/// Writes `<stem>.csv` and `<stem>.svg` under `dir`; returns the manifest.
/// The plot requests log-log axes (excess risk against sample size), falling
/// back to linear when any plotted value is nonpositive.
pub fn emit_epr(
    report: &EprReport,
    dir: &Path,
    stem: &str,
) -> Result<Vec<PathBuf>, HarnessError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    write_file(&csv_path, &epr_csv(report))?;

    let x: Vec<f64> = report.n_grid.iter().map(|&n| n as f64).collect();
    let mean: Vec<f64> = report.stats.iter().map(|s| s.mean).collect();
    let std: Vec<f64> = report.stats.iter().map(|s| s.std).collect();
    let title = format!("{} excess population risk", report.method);
    let svg = render_line_plot(&PlotSpec {
        title: &title,
        x_label: "sample size n",
        y_label: "excess population risk",
        x: &x,
        mean: &mean,
        std: &std,
        extra: None,
        log_log: true,
    });
    let svg_path = dir.join(format!("{stem}.svg"));
    write_file(&svg_path, &svg)?;
    Ok(vec![csv_path, svg_path])
}
