//! Minimal SVG rendering of a run directory: per-functional path plots,
//! terminal-value histograms and the summary's tables.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::{Path, PathBuf};

use spde_lab::harness::load;
use spde_lab::stats::density_histogram;
use spde_lab::{EnsembleSummary, Error};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];
const HISTOGRAM_BINS: usize = 30;

#[derive(Default)]
pub struct Figure {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// `(label, points)`; drawn as polylines.
    pub lines: Vec<(String, Vec<(f64, f64)>)>,
    /// `(left, right, height)` bars.
    pub bars: Vec<(f64, f64, f64)>,
    /// Thin, translucent lines without a legend entry.
    pub faint: bool,
}

fn extent(values: impl Iterator<Item = f64>) -> Option<(f64, f64)> {
    let (lo, hi) = values
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if lo > hi {
        return None;
    }
    if lo == hi {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return Some((lo - pad, hi + pad));
    }
    Some((lo, hi))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl Figure {
    pub fn to_svg(&self) -> String {
        let xs = self
            .lines
            .iter()
            .flat_map(|(_, p)| p.iter().map(|q| q.0))
            .chain(self.bars.iter().flat_map(|b| [b.0, b.1]));
        let ys = self
            .lines
            .iter()
            .flat_map(|(_, p)| p.iter().map(|q| q.1))
            .chain(self.bars.iter().flat_map(|b| [0.0, b.2]));
        let (x0, x1) = extent(xs).unwrap_or((0.0, 1.0));
        let (y0, y1) = extent(ys).unwrap_or((0.0, 1.0));
        let sx = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
        let sy = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
            WIDTH / 2.0,
            escape(&self.title)
        );
        let (left, right, top, bottom) = (MARGIN, WIDTH - MARGIN, MARGIN, HEIGHT - MARGIN);
        let _ = writeln!(
            s,
            r#"<path d="M{left},{top} L{left},{bottom} L{right},{bottom}" stroke="black" fill="none"/>"#
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let (xv, yv) = (x0 + f * (x1 - x0), y0 + f * (y1 - y0));
            let (px, py) = (sx(xv), sy(yv));
            let _ = writeln!(
                s,
                r#"<line x1="{px:.2}" y1="{bottom}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                bottom + 4.0,
                bottom + 16.0,
                tick(xv)
            );
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{py:.2}" x2="{left}" y2="{py:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                left - 4.0,
                left - 6.0,
                py + 4.0,
                tick(yv)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            WIDTH / 2.0,
            HEIGHT - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
            HEIGHT / 2.0,
            HEIGHT / 2.0,
            escape(&self.y_label)
        );
        for &(a, b, h) in &self.bars {
            if !(a.is_finite() && b.is_finite() && h.is_finite()) {
                continue;
            }
            let (px, py) = (sx(a), sy(h.max(y0)));
            let _ = writeln!(
                s,
                r##"<rect x="{px:.2}" y="{py:.2}" width="{:.2}" height="{:.2}" fill="#9ecae1" stroke="#3182bd"/>"##,
                (sx(b) - px).max(0.0),
                (sy(y0.max(0.0)) - py).max(0.0)
            );
        }
        for (i, (label, points)) in self.lines.iter().enumerate() {
            let color = PALETTE[i % PALETTE.len()];
            let mut d = String::new();
            let mut pen_down = false;
            for &(x, y) in points {
                if x.is_finite() && y.is_finite() {
                    let _ = write!(d, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, sx(x), sy(y));
                    pen_down = true;
                } else {
                    pen_down = false;
                }
            }
            let (width, opacity) = if self.faint { (0.8, 0.35) } else { (1.6, 1.0) };
            let _ = writeln!(
                s,
                r#"<path d="{}" stroke="{color}" stroke-width="{width}" stroke-opacity="{opacity}" fill="none"/>"#,
                d.trim_end()
            );
            if !self.faint {
                let y = MARGIN + 14.0 * i as f64;
                let _ = writeln!(
                    s,
                    r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                    right - 24.0,
                    right - 4.0,
                    right - 28.0,
                    y + 4.0,
                    escape(label)
                );
            }
        }
        s.push_str("</svg>\n");
        s
    }
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-2) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

/// A file-name-safe version of a functional or table name.
pub fn file_stem(name: &str) -> String {
    name.chars()
        .map(|c| if c.is_ascii_alphanumeric() || matches!(c, '.' | '-' | '_') { c } else { '_' })
        .collect()
}

fn write_figure(fig: &Figure, path: PathBuf, written: &mut Vec<PathBuf>) -> Result<(), Error> {
    std::fs::write(&path, fig.to_svg()).map_err(|source| Error::Io { path: path.clone(), source })?;
    written.push(path);
    Ok(())
}

/// `(path_index → points)` of one functional.
fn paths_of(s: &EnsembleSummary, functional: &str) -> BTreeMap<usize, Vec<(f64, f64)>> {
    let mut by_path: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
    for r in s.series_of(functional) {
        by_path.entry(r.path_index).or_default().push((r.time, r.value));
    }
    by_path
}

fn is_cell_series(name: &str) -> bool {
    name.starts_with("u[")
}

/// Renders every plot of the run in `run` into `out`; returns the files written.
pub fn render_run(run: &Path, out: &Path, max_paths: usize) -> Result<Vec<PathBuf>, Error> {
    let summary = load(run)?;
    std::fs::create_dir_all(out).map_err(|source| Error::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();

    for name in summary.series_functionals.iter().filter(|n| !is_cell_series(n)) {
        let by_path = paths_of(&summary, name);
        let lines = Figure {
            title: format!("{} ({} of {} paths)", name, by_path.len().min(max_paths), by_path.len()),
            x_label: "t".into(),
            y_label: name.clone(),
            lines: by_path
                .iter()
                .take(max_paths)
                .map(|(i, p)| (format!("path {i}"), p.clone()))
                .collect(),
            bars: Vec::new(),
            faint: true,
        };
        write_figure(&lines, out.join(format!("{}.svg", file_stem(name))), &mut written)?;

        let terminal: Vec<f64> = by_path
            .values()
            .filter_map(|p| p.last().map(|q| q.1))
            .filter(|v| v.is_finite())
            .collect();
        if let Some((lo, hi)) = extent(terminal.iter().copied()) {
            // The histogram's range is half-open; widen it to keep the maximum.
            let hi = hi + (hi - lo) * 1e-9;
            let bins = density_histogram(&terminal, lo, hi, HISTOGRAM_BINS);
            let width = (hi - lo) / HISTOGRAM_BINS as f64;
            let hist = Figure {
                title: format!("terminal {name}"),
                x_label: name.clone(),
                y_label: "density".into(),
                lines: Vec::new(),
                bars: bins
                    .iter()
                    .map(|&(centre, h)| (centre - width / 2.0, centre + width / 2.0, h))
                    .collect(),
                faint: false,
            };
            write_figure(&hist, out.join(format!("{}-terminal.svg", file_stem(name))), &mut written)?;
        }
    }

    let cells: Vec<&String> = summary.series_functionals.iter().filter(|n| is_cell_series(n)).collect();
    if !cells.is_empty() {
        let mut profiles: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        let m = cells.len() as f64;
        for (x, name) in cells.iter().enumerate() {
            for (i, p) in paths_of(&summary, name).into_iter().take(max_paths) {
                if let Some(&(_, v)) = p.last() {
                    profiles.entry(i).or_default().push((x as f64 / m, v));
                }
            }
        }
        let fig = Figure {
            title: "terminal field profiles".into(),
            x_label: "x".into(),
            y_label: "u(T, x)".into(),
            lines: profiles.into_iter().map(|(i, p)| (format!("path {i}"), p)).collect(),
            bars: Vec::new(),
            faint: true,
        };
        write_figure(&fig, out.join("fields.svg"), &mut written)?;
    }

    for table in &summary.tables {
        if table.rows.is_empty() || table.columns.len() < 2 {
            continue;
        }
        let x: Vec<f64> = table.rows.iter().map(|r| r[0].0).collect();
        let column = |j: usize| -> Vec<(f64, f64)> { x.iter().zip(&table.rows).map(|(&a, r)| (a, r[j].0)).collect() };
        let fig = if table.name == "histogram" {
            let width = if x.len() > 1 { x[1] - x[0] } else { 1.0 };
            Figure {
                title: "rescaled statistic: empirical density and asymptotic densities".into(),
                x_label: table.columns[0].clone(),
                y_label: "density".into(),
                lines: (2..table.columns.len()).map(|j| (table.columns[j].clone(), column(j))).collect(),
                bars: table.rows.iter().map(|r| (r[0].0 - width / 2.0, r[0].0 + width / 2.0, r[1].0)).collect(),
                faint: false,
            }
        } else {
            Figure {
                title: table.name.clone(),
                x_label: table.columns[0].clone(),
                y_label: String::new(),
                lines: (1..table.columns.len())
                    .filter(|&j| table.columns[j] != "stderr")
                    .map(|j| (table.columns[j].clone(), column(j)))
                    .collect(),
                bars: Vec::new(),
                faint: false,
            }
        };
        write_figure(&fig, out.join(format!("table-{}.svg", file_stem(&table.name))), &mut written)?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn svg_is_well_formed_with_non_finite_points() {
        let fig = Figure {
            title: "a <b>".into(),
            lines: vec![("l".into(), vec![(0.0, 1.0), (1.0, f64::NAN), (2.0, 3.0)])],
            bars: vec![(0.0, 1.0, 2.0)],
            ..Default::default()
        };
        let svg = fig.to_svg();
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(svg.contains("a &lt;b&gt;"));
        assert!(!svg.contains("NaN"));
    }

    #[test]
    fn file_stems_are_safe() {
        assert_eq!(file_stem("sup(gamma=1.2)"), "sup_gamma_1.2_");
        assert_eq!(file_stem("u[3]"), "u_3_");
    }
}
