//! Arrival-curve charts: result CSVs in, one self-contained SVG out.
//!
//! Every polyline carries the raw fraction strings from its CSV in a
//! `data-values` attribute, so a chart can be checked against its inputs
//! without parsing coordinates.

use std::path::{Path, PathBuf};

use crate::CliError;

pub struct ChartSpec {
    pub inputs: Vec<PathBuf>,
    /// Category names; each becomes one series per input file.
    pub series: Vec<String>,
    pub out: PathBuf,
    pub title: Option<String>,
}

const WIDTH: f64 = 960.0;
const HEIGHT: f64 = 540.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 180.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 55.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// One parsed result CSV: the t column and every fraction column, both as
/// the file's exact strings and as numbers.
struct RunCsv {
    label: String,
    t_text: Vec<String>,
    t: Vec<f64>,
    columns: Vec<(String, Vec<String>)>,
}

impl RunCsv {
    fn fraction_column(&self, category: &str, path: &Path) -> Result<&[String], CliError> {
        let name = format!("{category}_frac");
        self.columns
            .iter()
            .find(|(n, _)| *n == name)
            .map(|(_, v)| v.as_slice())
            .ok_or_else(|| {
                CliError::Config(format!("no column `{name}` in {}", path.display()))
            })
    }
}

fn read_run_csv(path: &Path) -> Result<RunCsv, CliError> {
    let bad = |msg: String| CliError::Config(format!("{}: {msg}", path.display()));
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("reading {}: {e}", path.display())))?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| bad("empty file".into()))?;
    let names: Vec<&str> = header.split(',').collect();
    let t_idx = names
        .iter()
        .position(|n| *n == "t")
        .ok_or_else(|| bad("no column `t`".into()))?;

    let mut t_text = Vec::new();
    let mut t = Vec::new();
    let mut columns: Vec<(String, Vec<String>)> = names
        .iter()
        .filter(|n| n.ends_with("_frac"))
        .map(|n| (n.to_string(), Vec::new()))
        .collect();
    for (row, line) in lines.enumerate() {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != names.len() {
            return Err(bad(format!(
                "row {}: {} fields, header has {}",
                row + 2,
                fields.len(),
                names.len()
            )));
        }
        t_text.push(fields[t_idx].to_string());
        t.push(
            fields[t_idx]
                .parse()
                .map_err(|_| bad(format!("row {}: t `{}` is not a number", row + 2, fields[t_idx])))?,
        );
        for (name, values) in &mut columns {
            let idx = names.iter().position(|n| n == name).expect("from header");
            values.push(fields[idx].to_string());
        }
    }
    let label = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok(RunCsv {
        label,
        t_text,
        t,
        columns,
    })
}

/// Render the chart, or explain which input or column spoils it.
pub fn render(spec: &ChartSpec) -> Result<String, CliError> {
    if spec.series.is_empty() {
        return Err(CliError::Config("no series selected".into()));
    }
    let runs: Vec<RunCsv> = spec
        .inputs
        .iter()
        .map(|p| read_run_csv(p))
        .collect::<Result<_, _>>()?;
    let first = runs.first().expect("clap requires at least one input");
    if first.t.is_empty() {
        return Err(CliError::Config("no data".into()));
    }
    for (run, path) in runs.iter().zip(&spec.inputs) {
        if run.t_text != first.t_text {
            return Err(CliError::Config(format!(
                "{} has a different t grid than {}",
                path.display(),
                spec.inputs[0].display()
            )));
        }
    }

    struct Series<'a> {
        label: String,
        values: &'a [String],
        color: &'static str,
    }
    let mut series = Vec::new();
    for (run, path) in runs.iter().zip(&spec.inputs) {
        for category in &spec.series {
            let values = run.fraction_column(category, path)?;
            let label = if runs.len() == 1 {
                category.clone()
            } else {
                format!("{} {category}", run.label)
            };
            series.push(Series {
                label,
                values,
                color: PALETTE[series.len() % PALETTE.len()],
            });
        }
    }

    let t_max = *first.t.last().expect("nonempty");
    let t_span = if t_max > 0.0 { t_max } else { 1.0 };
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let x_of = |t: f64| MARGIN_LEFT + t / t_span * plot_w;
    let y_of = |frac: f64| MARGIN_TOP + (1.0 - frac) * plot_h;

    let title = spec.title.clone().unwrap_or_else(|| {
        let names: Vec<&str> = runs.iter().map(|r| r.label.as_str()).collect();
        format!("Arrivals: {}", names.join(", "))
    });

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" \
         viewBox=\"0 0 {WIDTH} {HEIGHT}\" font-family=\"sans-serif\">\n"
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" font-size=\"18\" text-anchor=\"middle\">{}</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        escape(&title)
    ));

    // Gridlines and tick labels: quarters on y, fifths on x.
    for i in 0..=4 {
        let frac = i as f64 / 4.0;
        let y = y_of(frac);
        svg.push_str(&format!(
            "<line x1=\"{MARGIN_LEFT}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"#ddd\"/>\n",
            MARGIN_LEFT + plot_w
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"12\" text-anchor=\"end\">{frac:.2}</text>\n",
            MARGIN_LEFT - 8.0,
            y + 4.0
        ));
    }
    for i in 0..=5 {
        let t = t_span * i as f64 / 5.0;
        let x = x_of(t);
        svg.push_str(&format!(
            "<line x1=\"{x}\" y1=\"{MARGIN_TOP}\" x2=\"{x}\" y2=\"{}\" stroke=\"#eee\"/>\n",
            MARGIN_TOP + plot_h
        ));
        svg.push_str(&format!(
            "<text x=\"{x}\" y=\"{}\" font-size=\"12\" text-anchor=\"middle\">{t:.0}</text>\n",
            MARGIN_TOP + plot_h + 20.0
        ));
    }
    // Axes and labels.
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{MARGIN_TOP}\" x2=\"{MARGIN_LEFT}\" y2=\"{}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h
    ));
    svg.push_str(&format!(
        "<line x1=\"{MARGIN_LEFT}\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\"/>\n",
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\">t (s)</text>\n",
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 12.0
    ));
    svg.push_str(&format!(
        "<text x=\"18\" y=\"{}\" font-size=\"14\" text-anchor=\"middle\" \
         transform=\"rotate(-90 18 {0})\">arrival fraction</text>\n",
        MARGIN_TOP + plot_h / 2.0
    ));

    for s in &series {
        let mut points = String::new();
        for (i, value) in s.values.iter().enumerate() {
            let frac: f64 = value.parse().map_err(|_| {
                CliError::Config(format!("series {}: `{value}` is not a number", s.label))
            })?;
            if i > 0 {
                points.push(' ');
            }
            points.push_str(&format!("{:.2},{:.2}", x_of(first.t[i]), y_of(frac)));
        }
        svg.push_str(&format!(
            "<polyline fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{points}\" \
             data-series=\"{}\" data-values=\"{}\"/>\n",
            s.color,
            escape(&s.label),
            s.values.join(" ")
        ));
    }

    // Legend, to the right of the plot.
    let legend_x = MARGIN_LEFT + plot_w + 14.0;
    for (i, s) in series.iter().enumerate() {
        let y = MARGIN_TOP + 10.0 + i as f64 * 20.0;
        svg.push_str(&format!(
            "<line x1=\"{legend_x}\" y1=\"{y}\" x2=\"{}\" y2=\"{y}\" stroke=\"{}\" stroke-width=\"3\"/>\n",
            legend_x + 22.0,
            s.color
        ));
        svg.push_str(&format!(
            "<text x=\"{}\" y=\"{}\" font-size=\"13\">{}</text>\n",
            legend_x + 28.0,
            y + 4.0,
            escape(&s.label)
        ));
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
