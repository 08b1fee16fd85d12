//! Learning curves from metrics CSV files: a tidy long-format CSV and one SVG
//! per metric family, with the across-run mean and a ±1 std band.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use auxdistill_core::env::TaskId;
use auxdistill_core::trainer::UpdateMetrics;

use crate::report::mean_std;
use crate::HarnessError;

/// Parses a metrics CSV written by the trainer. Errors carry the 1-based
/// line number of the offending row.
pub fn read_metrics(path: &Path) -> Result<Vec<UpdateMetrics>, HarnessError> {
    let shown = path.display().to_string();
    let bad = |row: usize, message: String| HarnessError::Csv { path: shown.clone(), row, message };
    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_path(path).map_err(|e| bad(0, e.to_string()))?;
    let header: Vec<String> = rdr.headers().map_err(|e| bad(1, e.to_string()))?.iter().map(str::to_string).collect();
    if header != UpdateMetrics::header() {
        return Err(bad(1, "header does not match the metrics schema".into()));
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| bad(e.position().map_or(0, |p| p.line() as usize), e.to_string()))?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let fields: Vec<&str> = rec.iter().collect();
        out.push(UpdateMetrics::parse(&fields).map_err(|m| bad(line, m))?);
    }
    Ok(out)
}

type Extract = fn(&UpdateMetrics) -> f64;

/// Named scalar series of a metrics row.
/// A named per-update quantity.
pub type Series = (String, Box<dyn Fn(&UpdateMetrics) -> f64>);

pub fn series_names() -> Vec<Series> {
    let mut v: Vec<Series> = Vec::new();
    for t in TaskId::ALL {
        v.push((format!("success_{t}"), Box::new(move |m: &UpdateMetrics| m.success[t.index()])));
    }
    v.push(("success_main_easy".into(), Box::new(|m: &UpdateMetrics| m.success_main_easy)));
    v.push(("success_main_hard".into(), Box::new(|m: &UpdateMetrics| m.success_main_hard)));
    for t in TaskId::ALL {
        v.push((format!("return_{t}"), Box::new(move |m: &UpdateMetrics| m.mean_return[t.index()])));
    }
    let losses: [(&str, Extract); 5] = [
        ("policy_loss", |m| m.policy_loss),
        ("value_loss", |m| m.value_loss),
        ("entropy", |m| m.entropy),
        ("distill_loss", |m| m.distill_loss),
        ("total_loss", |m| m.total_loss),
    ];
    for (n, f) in losses {
        v.push((n.into(), Box::new(f)));
    }
    v
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BandPoint {
    pub x: f64,
    pub mean: f64,
    pub std: f64,
}

/// Row-aligned mean and population std of one series across runs. Rows where
/// no run has a finite value are skipped.
pub fn aggregate_series(runs: &[Vec<UpdateMetrics>], f: &dyn Fn(&UpdateMetrics) -> f64) -> Vec<BandPoint> {
    let len = runs.iter().map(Vec::len).max().unwrap_or(0);
    let mut out = Vec::new();
    for i in 0..len {
        let rows: Vec<&UpdateMetrics> = runs.iter().filter_map(|r| r.get(i)).collect();
        let ys: Vec<f64> = rows.iter().map(|m| f(m)).filter(|y| y.is_finite()).collect();
        if ys.is_empty() {
            continue;
        }
        let x = rows.iter().map(|m| m.env_steps as f64).sum::<f64>() / rows.len() as f64;
        let (mean, std) = mean_std(&ys);
        out.push(BandPoint { x, mean, std });
    }
    out
}

const PALETTE: [&str; 8] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf"];

fn nice_range(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    if (hi - lo).abs() < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn fmt_tick(v: f64) -> String {
    let a = v.abs();
    if a != 0.0 && !(1e-2..1e5).contains(&a) {
        format!("{v:.1e}")
    } else if a >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

/// SVG line chart with shaded bands. `y_range` fixes the y axis; otherwise
/// it fits the bands.
pub fn render_svg(
    title: &str,
    y_label: &str,
    series: &[(String, Vec<BandPoint>)],
    y_range: Option<(f64, f64)>,
) -> String {
    let (w, h) = (760.0, 460.0);
    let (left, right, top, bottom) = (70.0, 190.0, 40.0, 50.0);
    let (pw, ph) = (w - left - right, h - top - bottom);
    let pts = series.iter().flat_map(|(_, p)| p.iter());
    let x_max = pts.clone().map(|p| p.x).fold(0.0, f64::max).max(1.0);
    let (y0, y1) = y_range.unwrap_or_else(|| {
        let lo = pts.clone().map(|p| p.mean - p.std).fold(f64::INFINITY, f64::min);
        let hi = pts.map(|p| p.mean + p.std).fold(f64::NEG_INFINITY, f64::max);
        nice_range(lo, hi)
    });
    let sx = |x: f64| left + pw * x / x_max;
    let sy = |y: f64| top + ph * (1.0 - (y - y0) / (y1 - y0));

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="15">{title}</text>"#, left + pw / 2.0);
    let _ = writeln!(
        s,
        r##"<g stroke="#333" stroke-width="1"><line x1="{left}" y1="{}" x2="{}" y2="{}"/><line x1="{left}" y1="{top}" x2="{left}" y2="{}"/></g>"##,
        top + ph,
        left + pw,
        top + ph,
        top + ph
    );
    for k in 0..=5 {
        let fx = x_max * k as f64 / 5.0;
        let fy = y0 + (y1 - y0) * k as f64 / 5.0;
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="#333"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"##,
            sx(fx),
            top + ph,
            top + ph + 5.0,
            top + ph + 18.0,
            fmt_tick(fx)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="#333"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"##,
            left - 5.0,
            sy(fy),
            left,
            left - 8.0,
            sy(fy) + 4.0,
            fmt_tick(fy)
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">env steps</text>"#, left + pw / 2.0, h - 10.0);
    let _ = writeln!(
        s,
        r#"<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{y_label}</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (i, (name, pts)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        if !pts.is_empty() {
            let upper = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean + p.std)));
            let lower = pts.iter().rev().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean - p.std)));
            let poly: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon class="band" data-series="{name}" points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
                poly.join(" ")
            );
            let line: Vec<String> = pts.iter().map(|p| format!("{:.2},{:.2}", sx(p.x), sy(p.mean))).collect();
            let _ = writeln!(
                s,
                r#"<polyline class="mean" data-series="{name}" points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
                line.join(" ")
            );
        }
        let ly = top + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{0}" y1="{ly}" x2="{1}" y2="{ly}" stroke="{color}" stroke-width="3"/><text x="{2}" y="{3}">{name}</text>"#,
            left + pw + 12.0,
            left + pw + 32.0,
            left + pw + 38.0,
            ly + 4.0
        );
    }
    s.push_str("</svg>\n");
    s
}

/// Writes `tidy.csv` plus `success.svg`, `returns.svg` and `losses.svg` into
/// `out_dir`; every input file is one run (typically one seed).
pub fn export_curves(inputs: &[PathBuf], out_dir: &Path) -> Result<Vec<PathBuf>, HarnessError> {
    if inputs.is_empty() {
        return Err(HarnessError::Config("at least one metrics file is required".into()));
    }
    let runs = inputs.iter().map(|p| read_metrics(p)).collect::<Result<Vec<_>, _>>()?;
    fs::create_dir_all(out_dir)?;
    let names = series_names();

    let tidy_path = out_dir.join("tidy.csv");
    let mut w = csv::Writer::from_path(&tidy_path).map_err(std::io::Error::other)?;
    w.write_record(["run", "update", "env_steps", "metric", "value"]).map_err(std::io::Error::other)?;
    for (path, run) in inputs.iter().zip(&runs) {
        let label = path.display().to_string();
        for m in run {
            for (n, f) in &names {
                w.write_record([label.as_str(), &m.update.to_string(), &m.env_steps.to_string(), n, &f(m).to_string()])
                    .map_err(std::io::Error::other)?;
            }
        }
    }
    w.flush()?;

    let family = |prefix: &dyn Fn(&str) -> bool| -> Vec<(String, Vec<BandPoint>)> {
        names.iter().filter(|(n, _)| prefix(n)).map(|(n, f)| (n.clone(), aggregate_series(&runs, f.as_ref()))).collect()
    };
    let mut written = vec![tidy_path];
    let plots = [
        (
            "success.svg",
            "Success rate (rolling window)",
            "success",
            family(&|n| n.starts_with("success_")),
            Some((0.0, 1.0)),
        ),
        ("returns.svg", "Mean episode return", "return", family(&|n| n.starts_with("return_")), None),
        ("losses.svg", "Losses", "loss", family(&|n| n.ends_with("_loss") || n == "entropy"), None),
    ];
    for (file, title, ylab, series, range) in plots {
        let p = out_dir.join(file);
        fs::write(&p, render_svg(title, ylab, &series, range))?;
        written.push(p);
    }
    Ok(written)
}
