//! Result tables, run manifests and their on-disk form: `results.csv`, `manifest.json`
//! and optional SVG line charts.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::error::{Error, Result};

/// Bumped when a results.csv header changes incompatibly.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format!("{v:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(v) => Some(v as f64),
            Cell::Float(v) => Some(v),
            _ => None,
        }
    }
}

impl std::fmt::Display for Cell {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.render())
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column, skipping non-numeric cells.
    pub fn numbers(&self, name: &str) -> Vec<f64> {
        let Some(c) = self.column(name) else {
            return Vec::new();
        };
        self.rows.iter().filter_map(|r| r[c].as_f64()).collect()
    }

    /// CSV text: header line then one line per row; strings quoted, floats in shortest
    /// round-trip form.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::WriterBuilder::new()
            .quote_style(csv::QuoteStyle::NonNumeric)
            .from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Csv(e.into_error().into()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// A line chart request: `y` columns of the result table against `x`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PlotSpec {
    pub file: String,
    pub title: String,
    pub x: String,
    pub y: Vec<String>,
    pub log_x: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub experiment: String,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub csv_schema_version: u32,
    pub results: Table,
    /// Named scalar outcomes (e.g. pass counts).
    pub summary: Vec<(String, Cell)>,
    pub plots: Vec<PlotSpec>,
    pub wall_time_secs: f64,
}

impl RunManifest {
    pub fn summary_value(&self, key: &str) -> Option<&Cell> {
        self.summary.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Writes `results.csv`, `manifest.json` and the requested SVG charts into `dir`.
/// Returns the paths written.
pub fn emit_report(manifest: &RunManifest, dir: &Path, plots: bool) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut written = Vec::new();
    let csv_path = dir.join("results.csv");
    write_file(&csv_path, &manifest.results.to_csv()?)?;
    written.push(csv_path);
    let manifest_path = dir.join("manifest.json");
    write_file(&manifest_path, &serde_json::to_string_pretty(manifest)?)?;
    written.push(manifest_path);
    if plots {
        for spec in &manifest.plots {
            let path = dir.join(&spec.file);
            write_file(&path, &render_svg(&manifest.results, spec))?;
            written.push(path);
        }
    }
    Ok(written)
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 56.0;
const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal SVG line chart with axis ticks at the data extremes.
pub fn render_svg(table: &Table, spec: &PlotSpec) -> String {
    let xs = table.numbers(&spec.x);
    let tx = |v: f64| if spec.log_x { v.max(f64::MIN_POSITIVE).log10() } else { v };
    let series: Vec<(&String, Vec<(f64, f64)>)> = spec
        .y
        .iter()
        .map(|name| {
            let ys = table.numbers(name);
            (name, xs.iter().zip(ys).map(|(x, y)| (tx(*x), y)).collect())
        })
        .collect();
    let all = series.iter().flat_map(|(_, pts)| pts.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, 0.0f64, f64::NEG_INFINITY);
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y1) = (0.0, 1.0, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if y1 <= y0 {
        y1 = y0 + 1.0;
    }
    let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (WIDTH - 2.0 * MARGIN);
    let py = |y: f64| HEIGHT - MARGIN - (y - y0) / (y1 - y0) * (HEIGHT - 2.0 * MARGIN);
    let untx = |v: f64| if spec.log_x { 10f64.powf(v) } else { v };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle">{}</text>"#, WIDTH / 2.0, escape(&spec.title));
    let _ = writeln!(
        s,
        r#"<path d="M{m} {t} V{b} H{r}" stroke="black" fill="none"/>"#,
        m = MARGIN,
        t = MARGIN,
        b = HEIGHT - MARGIN,
        r = WIDTH - MARGIN
    );
    for (v, anchor) in [(x0, "start"), (x1, "end")] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="{anchor}">{}</text>"#,
            px(v),
            HEIGHT - MARGIN + 16.0,
            short(untx(v))
        );
    }
    for v in [y0, y1] {
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            MARGIN - 6.0,
            py(v) + 4.0,
            short(v)
        );
    }
    let x_label = if spec.log_x { format!("{} (log scale)", spec.x) } else { spec.x.clone() };
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, WIDTH / 2.0, HEIGHT - 12.0, escape(&x_label));
    for (i, (name, pts)) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        if !pts.is_empty() {
            let d: Vec<String> = pts
                .iter()
                .enumerate()
                .map(|(j, (x, y))| format!("{}{:.2} {:.2}", if j == 0 { "M" } else { "L" }, px(*x), py(*y)))
                .collect();
            let _ = writeln!(s, r#"<path d="{}" stroke="{color}" stroke-width="2" fill="none"/>"#, d.join(" "));
            for (x, y) in pts {
                let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#, px(*x), py(*y));
            }
        }
        let _ = writeln!(
            s,
            r#"<text x="{:.1}" y="{:.1}" fill="{color}">{}</text>"#,
            WIDTH - MARGIN - 140.0,
            MARGIN + 16.0 * i as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn short(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e4 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{}", (v * 1e4).round() / 1e4)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(results: Table, plots: Vec<PlotSpec>) -> RunManifest {
        RunManifest {
            experiment: "test".into(),
            config_digest: "0".repeat(64),
            seed: 0,
            tool_version: "0".into(),
            csv_schema_version: CSV_SCHEMA_VERSION,
            results,
            summary: vec![],
            plots,
            wall_time_secs: 0.0,
        }
    }

    #[test]
    fn csv_rendering() {
        let mut t = Table::new(&["name", "n", "value", "flag", "missing"]);
        t.push(vec!["a,b".into(), 3usize.into(), 0.25.into(), true.into(), Cell::Empty]);
        t.push(vec!["x".into(), 4usize.into(), 1.0.into(), false.into(), None::<f64>.into()]);
        assert_eq!(
            t.to_csv().unwrap(),
            "\"name\",\"n\",\"value\",\"flag\",\"missing\"\n\"a,b\",3,0.25,\"true\",\"\"\n\"x\",4,1.0,\"false\",\"\"\n"
        );
    }

    #[test]
    fn header_only_for_empty_results() {
        let t = Table::new(&["a", "b"]);
        assert_eq!(t.to_csv().unwrap(), "\"a\",\"b\"\n");
        let dir = tempfile::tempdir().unwrap();
        let files = emit_report(&manifest(t, vec![]), dir.path(), true).unwrap();
        assert_eq!(files.len(), 2);
        assert_eq!(fs::read_to_string(dir.path().join("results.csv")).unwrap(), "\"a\",\"b\"\n");
        let m: serde_json::Value =
            serde_json::from_str(&fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
        assert_eq!(m["experiment"], "test");
    }

    #[test]
    fn plots_do_not_touch_csv() {
        let mut t = Table::new(&["n", "gap"]);
        for (n, g) in [(100usize, 0.3), (200, 0.2), (400, 0.1)] {
            t.push(vec![n.into(), g.into()]);
        }
        let spec = PlotSpec {
            file: "gap.svg".into(),
            title: "gap vs n".into(),
            x: "n".into(),
            y: vec!["gap".into()],
            log_x: true,
        };
        let with = tempfile::tempdir().unwrap();
        let without = tempfile::tempdir().unwrap();
        emit_report(&manifest(t.clone(), vec![spec.clone()]), with.path(), true).unwrap();
        emit_report(&manifest(t.clone(), vec![spec.clone()]), without.path(), false).unwrap();
        let a = fs::read(with.path().join("results.csv")).unwrap();
        let b = fs::read(without.path().join("results.csv")).unwrap();
        assert_eq!(a, b);
        let svg = fs::read_to_string(with.path().join("gap.svg")).unwrap();
        assert!(svg.starts_with("<svg") && svg.contains("log scale"));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(!without.path().join("gap.svg").exists());
    }

    #[test]
    fn unwritable_directory_is_io_error() {
        let file = tempfile::NamedTempFile::new().unwrap();
        let err = emit_report(&manifest(Table::new(&["a"]), vec![]), &file.path().join("sub"), false)
            .unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }
}
