//! Learning-curve charts: mean line with a ±std band per run.

use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use plotters::prelude::*;

use super::metrics::{aggregate, read_curve, read_metrics, AggregateRow};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub label: String,
    pub rows: Vec<AggregateRow>,
}

/// Loads one labelled curve. A run directory contributes its
/// `aggregate.csv`, or failing that its `metrics_seed*.csv` files aggregated
/// across seeds; a file is read as a metrics or aggregate file.
pub fn load_curve(path: &Path, eval_interval: u64) -> Result<Curve> {
    let name = |p: &Path| p.file_stem().map(|s| s.to_string_lossy().into_owned());
    let label = match name(path).as_deref() {
        Some("aggregate") => path.parent().and_then(name),
        other => other.map(str::to_string),
    }
    .unwrap_or_else(|| path.display().to_string());
    let rows = if path.is_dir() && path.join("aggregate.csv").is_file() {
        read_curve(&path.join("aggregate.csv"))?
    } else if path.is_dir() {
        let mut files: Vec<PathBuf> = std::fs::read_dir(path)?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| {
                p.file_name()
                    .and_then(|n| n.to_str())
                    .is_some_and(|n| n.starts_with("metrics_seed") && n.ends_with(".csv"))
            })
            .collect();
        files.sort();
        if files.is_empty() {
            return Err(Error::Config(format!("{} holds no metrics_seed*.csv files", path.display())));
        }
        let runs = files.iter().map(|f| read_metrics(f)).collect::<Result<Vec<_>>>()?;
        aggregate(&runs, eval_interval)
    } else {
        read_curve(path)?
    };
    Ok(Curve { label, rows })
}

/// The plotted series as `label,env_steps,mean,std` rows.
pub fn write_series(path: &Path, curves: &[Curve]) -> Result<()> {
    let mut out = String::from("label,env_steps,mean,std\n");
    for c in curves {
        for r in &c.rows {
            out.push_str(&format!("{},{},{},{}\n", c.label, r.env_steps, r.mean, r.std));
        }
    }
    File::create(path)?.write_all(out.as_bytes())?;
    Ok(())
}

fn plot_error<E: std::fmt::Display>(e: E) -> Error {
    Error::Io(std::io::Error::other(format!("chart rendering failed: {e}")))
}

pub fn render_svg(path: &Path, curves: &[Curve], y_label: &str) -> Result<()> {
    let x_max = curves
        .iter()
        .flat_map(|c| c.rows.iter().map(|r| r.env_steps))
        .max()
        .unwrap_or(1)
        .max(1) as f64;
    let (mut y_min, mut y_max) = curves
        .iter()
        .flat_map(|c| c.rows.iter())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| {
            (lo.min(r.mean - r.std), hi.max(r.mean + r.std))
        });
    if !y_min.is_finite() || !y_max.is_finite() {
        (y_min, y_max) = (0.0, 1.0);
    }
    if y_max - y_min < 1e-9 {
        y_min -= 0.5;
        y_max += 0.5;
    }

    let root = SVGBackend::new(path, (800, 500)).into_drawing_area();
    root.fill(&WHITE).map_err(plot_error)?;
    let mut chart = ChartBuilder::on(&root)
        .margin(15)
        .x_label_area_size(40)
        .y_label_area_size(55)
        .build_cartesian_2d(0.0..x_max, y_min..y_max)
        .map_err(plot_error)?;
    chart
        .configure_mesh()
        .x_desc("env steps")
        .y_desc(y_label)
        .draw()
        .map_err(plot_error)?;

    for (k, c) in curves.iter().enumerate() {
        let color = Palette99::pick(k).to_rgba();
        let band: Vec<(f64, f64)> = c
            .rows
            .iter()
            .map(|r| (r.env_steps as f64, r.mean + r.std))
            .chain(c.rows.iter().rev().map(|r| (r.env_steps as f64, r.mean - r.std)))
            .collect();
        chart
            .draw_series(std::iter::once(Polygon::new(band, color.mix(0.2).filled())))
            .map_err(plot_error)?;
        chart
            .draw_series(LineSeries::new(
                c.rows.iter().map(|r| (r.env_steps as f64, r.mean)),
                color.stroke_width(2),
            ))
            .map_err(plot_error)?
            .label(c.label.clone())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color.stroke_width(2)));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .position(SeriesLabelPosition::LowerRight)
        .draw()
        .map_err(plot_error)?;
    root.present().map_err(plot_error)?;
    Ok(())
}

/// Writes `curves.svg` and `curves.csv` into `out_dir`.
pub fn run_plot(inputs: &[PathBuf], out_dir: &Path, eval_interval: u64, y_label: &str) -> Result<Vec<Curve>> {
    if inputs.is_empty() {
        return Err(Error::Config("plot needs at least one metrics file or run directory".into()));
    }
    let curves = inputs
        .iter()
        .map(|p| load_curve(p, eval_interval))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(out_dir)?;
    render_svg(&out_dir.join("curves.svg"), &curves, y_label)?;
    write_series(&out_dir.join("curves.csv"), &curves)?;
    Ok(curves)
}
