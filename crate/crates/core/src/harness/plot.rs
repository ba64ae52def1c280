//! SVG line charts from sweep CSV files.

use std::path::{Path, PathBuf};

use plotters::prelude::*;

use crate::error::{Error, Result};

/// One curve read from a CSV file.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Read `(swept_value, column)` pairs, skipping rows where either is blank.
pub fn read_series(path: &Path, column: &str) -> Result<Series> {
    let mut reader = csv::Reader::from_path(path)?;
    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidConfig(format!("{} has no `{name}` column", path.display()))
        })
    };
    let (xi, yi) = (find("swept_value")?, find(column)?);
    let mut points = Vec::new();
    for row in reader.records() {
        let row = row?;
        let (Ok(x), Ok(y)) = (row[xi].parse::<f64>(), row[yi].parse::<f64>()) else {
            continue;
        };
        points.push((x, y));
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(Series { label, points })
}

#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub inputs: Vec<PathBuf>,
    pub column: String,
    pub x_label: String,
    pub log_y: bool,
    pub out: PathBuf,
}

fn bounds(values: impl Iterator<Item = f64> + Clone, log: bool) -> (f64, f64) {
    let usable = values.filter(|v| v.is_finite() && (!log || *v > 0.0));
    let lo = usable.clone().fold(f64::INFINITY, f64::min);
    let hi = usable.fold(f64::NEG_INFINITY, f64::max);
    if !lo.is_finite() {
        return if log { (1e-6, 1.0) } else { (0.0, 1.0) };
    }
    match (log, lo == hi) {
        (true, _) => (lo / 2.0, hi * 2.0),
        (false, true) => (lo - 0.5, hi + 0.5),
        (false, false) => {
            let pad = 0.05 * (hi - lo);
            (lo - pad, hi + pad)
        }
    }
}

/// Draw one line per input file.
pub fn plot(spec: &PlotSpec) -> Result<()> {
    let series = spec
        .inputs
        .iter()
        .map(|p| read_series(p, &spec.column))
        .collect::<Result<Vec<_>>>()?;
    let all = series.iter().flat_map(|s| s.points.iter().copied());
    let (x0, x1) = bounds(all.clone().map(|p| p.0), false);
    let (y0, y1) = bounds(all.map(|p| p.1), spec.log_y);

    let root = SVGBackend::new(&spec.out, (640, 480)).into_drawing_area();
    let draw_err = |e: &dyn std::fmt::Display| Error::InvalidConfig(format!("plot: {e}"));
    root.fill(&WHITE).map_err(|e| draw_err(&e))?;
    let palette = [&BLUE, &RED, &GREEN, &MAGENTA, &CYAN, &BLACK];

    macro_rules! draw {
        ($y_range:expr) => {{
            let mut chart = ChartBuilder::on(&root)
                .margin(20)
                .x_label_area_size(40)
                .y_label_area_size(60)
                .build_cartesian_2d(x0..x1, $y_range)
                .map_err(|e| draw_err(&e))?;
            chart
                .configure_mesh()
                .x_desc(spec.x_label.as_str())
                .y_desc(spec.column.as_str())
                .draw()
                .map_err(|e| draw_err(&e))?;
            for (i, s) in series.iter().enumerate() {
                let color = palette[i % palette.len()];
                let pts = s
                    .points
                    .iter()
                    .copied()
                    .filter(|&(_, y)| !spec.log_y || y > 0.0);
                chart
                    .draw_series(LineSeries::new(pts, color))
                    .map_err(|e| draw_err(&e))?
                    .label(s.label.as_str())
                    .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 20, y)], color));
            }
            chart
                .configure_series_labels()
                .background_style(WHITE.mix(0.8))
                .border_style(BLACK)
                .draw()
                .map_err(|e| draw_err(&e))?;
        }};
    }
    if spec.log_y {
        draw!((y0..y1).log_scale());
    } else {
        draw!(y0..y1);
    }
    root.present().map_err(|e| draw_err(&e))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn plots_two_series() {
        let dir = tempfile::tempdir().unwrap();
        let a = dir.path().join("mpad.csv");
        let b = dir.path().join("lmmse.csv");
        std::fs::write(&a, "swept_value,eer,throughput\n20,0.01,\n30,0.001,\n").unwrap();
        std::fs::write(&b, "swept_value,eer,throughput\n20,0.05,\n30,0.02,\n").unwrap();
        assert_eq!(
            read_series(&a, "eer").unwrap().points,
            vec![(20.0, 0.01), (30.0, 0.001)]
        );
        assert!(read_series(&a, "throughput").unwrap().points.is_empty());
        assert!(read_series(&a, "nope").is_err());

        let out = dir.path().join("eer.svg");
        plot(&PlotSpec {
            inputs: vec![a, b],
            column: "eer".into(),
            x_label: "M*".into(),
            log_y: true,
            out: out.clone(),
        })
        .unwrap();
        let svg = std::fs::read_to_string(out).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("polyline"));
    }
}
