use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use super::experiment::EvalReport;
use super::EvalError;

/// Paths written by [`emit_report`].
#[derive(Debug, Clone, PartialEq)]
pub struct EmittedFiles {
    pub report: PathBuf,
    pub timings: PathBuf,
    pub csv: Vec<PathBuf>,
    pub svg: Vec<PathBuf>,
}

impl EmittedFiles {
    pub fn all(&self) -> impl Iterator<Item = &PathBuf> {
        [&self.report, &self.timings].into_iter().chain(&self.csv).chain(&self.svg)
    }
}

fn file_stem(target: &str) -> String {
    target.chars().map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' }).collect()
}

fn fmt_threshold(t: f64) -> String {
    if t.is_finite() {
        t.to_string()
    } else {
        "inf".into()
    }
}

/// Writes `report.json`, `timings.json`, `accuracy_vs_population.csv` (for
/// identification reports), one `roc_<target>.csv` per evaluated target and
/// an SVG line plot next to every CSV.
pub fn emit_report(report: &EvalReport, out_dir: impl AsRef<Path>) -> Result<EmittedFiles, EvalError> {
    let dir = out_dir.as_ref();
    fs::create_dir_all(dir)?;
    let mut files = EmittedFiles {
        report: dir.join("report.json"),
        timings: dir.join("timings.json"),
        csv: Vec::new(),
        svg: Vec::new(),
    };
    fs::write(&files.report, serde_json::to_string_pretty(report)? + "\n")?;
    fs::write(&files.timings, serde_json::to_string_pretty(&report.timings)? + "\n")?;

    if !report.populations.is_empty() {
        let mut csv = String::from("population,stream_accuracy,frame_accuracy,n_seeds\n");
        for p in &report.populations {
            writeln!(csv, "{},{},{},{}", p.population, p.stream_accuracy, p.frame_accuracy, p.per_seed.len()).unwrap();
        }
        let points: Vec<(f64, f64)> =
            report.populations.iter().map(|p| (p.population as f64, p.stream_accuracy)).collect();
        write_pair(
            &mut files,
            dir,
            "accuracy_vs_population",
            &csv,
            &svg_plot("Identification accuracy vs. population", "speakers", "stream accuracy", &points, false),
        )?;
    }

    for t in &report.targets {
        let Some(roc) = &t.roc else { continue };
        let mut csv = String::from("threshold,fpr,tpr\n");
        for p in &roc.points {
            writeln!(csv, "{},{},{}", fmt_threshold(p.threshold), p.fpr, p.tpr).unwrap();
        }
        let points: Vec<(f64, f64)> = roc.points.iter().map(|p| (p.fpr, p.tpr)).collect();
        let title = format!("ROC {} (AUC {:.3})", t.target, t.auc.unwrap_or(f64::NAN));
        write_pair(
            &mut files,
            dir,
            &format!("roc_{}", file_stem(&t.target)),
            &csv,
            &svg_plot(&title, "false positive rate", "true positive rate", &points, true),
        )?;
    }
    Ok(files)
}

fn write_pair(files: &mut EmittedFiles, dir: &Path, stem: &str, csv: &str, svg: &str) -> Result<(), EvalError> {
    let csv_path = dir.join(format!("{stem}.csv"));
    let svg_path = dir.join(format!("{stem}.svg"));
    fs::write(&csv_path, csv)?;
    fs::write(&svg_path, svg)?;
    files.csv.push(csv_path);
    files.svg.push(svg_path);
    Ok(())
}

/// Minimal SVG line chart. The y axis always spans [0, 1]; `diagonal` adds
/// the chance line for ROC plots.
fn svg_plot(title: &str, x_label: &str, y_label: &str, points: &[(f64, f64)], diagonal: bool) -> String {
    let (w, h, m) = (480.0, 360.0, 50.0);
    let (x_min, x_max) = points.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0), hi.max(p.0)));
    let (x_min, x_max) = if diagonal { (0.0, 1.0) } else if x_max > x_min { (x_min, x_max) } else { (x_min - 1.0, x_max + 1.0) };
    let sx = |x: f64| m + (x - x_min) / (x_max - x_min) * (w - 2.0 * m);
    let sy = |y: f64| h - m - y.clamp(0.0, 1.0) * (h - 2.0 * m);
    let escape = |s: &str| s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;");

    let mut svg = String::new();
    writeln!(svg, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">"#).unwrap();
    writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#).unwrap();
    writeln!(svg, r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#, w / 2.0, escape(title)).unwrap();
    writeln!(
        svg,
        r#"<path d="M{m} {} L{m} {} L{} {}" fill="none" stroke="black"/>"#,
        m,
        h - m,
        w - m,
        h - m
    )
    .unwrap();
    for tick in [0.0, 0.25, 0.5, 0.75, 1.0] {
        writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{tick}</text>"#, m - 6.0, sy(tick) + 4.0).unwrap();
    }
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="start">{}</text>"#, m, h - m + 16.0, x_min).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, w - m, h - m + 16.0, x_max).unwrap();
    writeln!(svg, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, w / 2.0, h - 12.0, escape(x_label)).unwrap();
    writeln!(
        svg,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        h / 2.0,
        h / 2.0,
        escape(y_label)
    )
    .unwrap();
    if diagonal {
        writeln!(
            svg,
            r#"<line x1="{}" y1="{}" x2="{}" y2="{}" stroke="gray" stroke-dasharray="4 4"/>"#,
            sx(0.0),
            sy(0.0),
            sx(1.0),
            sy(1.0)
        )
        .unwrap();
    }
    let path: Vec<String> = points.iter().map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y))).collect();
    writeln!(svg, r#"<polyline points="{}" fill="none" stroke="steelblue" stroke-width="2"/>"#, path.join(" ")).unwrap();
    for &(x, y) in points {
        writeln!(svg, r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="steelblue"/>"#, sx(x), sy(y)).unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
