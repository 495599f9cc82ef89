//! Dependency-free SVG line and scatter charts.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

use super::artifacts::read_metrics;
use super::{write_file, METRICS_FILE};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 64.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 48.0;
const TICKS: usize = 5;

const PALETTE: [&str; 20] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf", "#aec7e8", "#ffbb78", "#98df8a", "#ff9896", "#c5b0d5", "#c49c94",
    "#f7b6d2", "#c7c7c7", "#dbdb8d", "#9edae5",
];

pub const EMBEDDING_CSV: &str = "embedding.csv";

#[derive(Clone, Debug, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn fit(series: &[Series], y_floor: Option<f64>) -> Self {
        let pts = series.iter().flat_map(|s| s.points.iter());
        let (mut x0, mut x1, mut y0, mut y1) = (
            f64::INFINITY,
            f64::NEG_INFINITY,
            f64::INFINITY,
            f64::NEG_INFINITY,
        );
        for &(x, y) in pts {
            x0 = x0.min(x);
            x1 = x1.max(x);
            y0 = y0.min(y);
            y1 = y1.max(y);
        }
        if !x0.is_finite() {
            (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
        }
        if let Some(f) = y_floor {
            y0 = y0.min(f);
        }
        let widen = |lo: f64, hi: f64| {
            if hi > lo {
                (lo, hi)
            } else {
                (lo - 0.5, hi + 0.5)
            }
        };
        Self {
            x: widen(x0, x1),
            y: widen(y0, y1),
        }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

fn header(out: &mut String, title: &str, frame: &Frame, x_label: &str, y_label: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        escape(title)
    );
    let (x_axis, y_axis) = (HEIGHT - BOTTOM, LEFT);
    let _ = writeln!(
        out,
        r#"<path d="M{y_axis:.2} {TOP:.2} L{y_axis:.2} {x_axis:.2} L{:.2} {x_axis:.2}" stroke="black" fill="none"/>"#,
        WIDTH - RIGHT
    );
    for k in 0..TICKS {
        let t = k as f64 / (TICKS - 1) as f64;
        let xv = frame.x.0 + t * (frame.x.1 - frame.x.0);
        let yv = frame.y.0 + t * (frame.y.1 - frame.y.0);
        let (xp, yp) = (frame.px(xv), frame.py(yv));
        let _ = writeln!(
            out,
            r#"<text x="{xp:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            x_axis + 16.0,
            tick_label(xv)
        );
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            y_axis - 6.0,
            yp + 4.0,
            tick_label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (LEFT + WIDTH - RIGHT) / 2.0,
        HEIGHT - 10.0,
        escape(x_label)
    );
    let _ = writeln!(
        out,
        r#"<text x="14" y="{:.2}" text-anchor="middle" transform="rotate(-90 14 {:.2})">{}</text>"#,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        (TOP + HEIGHT - BOTTOM) / 2.0,
        escape(y_label)
    );
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate().take(PALETTE.len()) {
        let y = TOP + 14.0 * i as f64;
        let x = WIDTH - RIGHT + 12.0;
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{:.2}" width="10" height="10" fill="{}"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y,
            escape(name)
        );
    }
}

/// One polyline per series. Single-point series also get a marker.
pub fn render_line_chart(
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    y_floor: Option<f64>,
) -> String {
    let frame = Frame::fit(series, y_floor);
    let mut out = String::new();
    header(&mut out, title, &frame, x_label, y_label);
    if series.iter().all(|s| s.points.is_empty()) {
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" fill="gray">no data</text>"#,
            (LEFT + WIDTH - RIGHT) / 2.0,
            HEIGHT / 2.0
        );
    }
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (k, &(x, y)) in s.points.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2} {:.2}",
                if k == 0 { "M" } else { " L" },
                frame.px(x),
                frame.py(y)
            );
        }
        if !d.is_empty() {
            let _ = writeln!(
                out,
                r#"<path d="{d}" stroke="{color}" stroke-width="1.5" fill="none"/>"#
            );
        }
        if let [(x, y)] = s.points[..] {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                frame.px(x),
                frame.py(y)
            );
        }
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    if names.len() > 1 {
        legend(&mut out, &names);
    }
    out.push_str("</svg>\n");
    out
}

fn render_scatter(title: &str, points: &[(usize, f64, f64)]) -> String {
    let groups = points.iter().map(|p| p.0).max().map_or(0, |m| m + 1);
    let series: Vec<Series> = (0..groups)
        .map(|g| Series {
            name: format!("skill {g}"),
            points: points
                .iter()
                .filter(|p| p.0 == g)
                .map(|p| (p.1, p.2))
                .collect(),
        })
        .collect();
    let frame = Frame::fit(&series, None);
    let mut out = String::new();
    header(&mut out, title, &frame, "t-SNE 1", "t-SNE 2");
    for &(g, x, y) in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="2" fill="{}" fill-opacity="0.7"/>"#,
            frame.px(x),
            frame.py(y),
            PALETTE[g % PALETTE.len()]
        );
    }
    let names: Vec<&str> = series.iter().map(|s| s.name.as_str()).collect();
    legend(&mut out, &names);
    out.push_str("</svg>\n");
    out
}

fn read_embedding(path: &Path) -> Result<Vec<(usize, f64, f64)>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    let corrupt = |detail: String| Error::Format {
        what: format!("embedding file {}", path.display()),
        detail,
    };
    if rdr.headers()?.iter().collect::<Vec<_>>() != ["skill", "x", "y"] {
        return Err(corrupt("expected header skill,x,y".into()));
    }
    let mut out = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let g = row[0]
            .parse::<usize>()
            .map_err(|e| corrupt(e.to_string()))?;
        let x = row[1].parse::<f64>().map_err(|e| corrupt(e.to_string()))?;
        let y = row[2].parse::<f64>().map_err(|e| corrupt(e.to_string()))?;
        out.push((g, x, y));
    }
    Ok(out)
}

/// Renders the run's charts into `run_dir`, returning the files written.
pub fn plot(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let records = read_metrics(&run_dir.join(METRICS_FILE))?;
    let num_goals = records.first().map_or(0, |r| r.p_goal.len());
    let epoch = |r: &super::EpochRecord| r.epoch as f64;
    let per_goal = |value: &dyn Fn(&super::EpochRecord, usize) -> Option<f64>| -> Vec<Series> {
        (0..num_goals)
            .map(|g| Series {
                name: format!("goal {g}"),
                points: records
                    .iter()
                    .filter_map(|r| value(r, g).map(|v| (epoch(r), v)))
                    .collect(),
            })
            .collect()
    };

    let charts = [
        (
            "effective_skills.svg",
            render_line_chart(
                "Effective number of skills",
                "epoch",
                "exp(entropy)",
                &[Series {
                    name: "effective skills".into(),
                    points: records.iter().map(|r| (epoch(r), r.eff_skills)).collect(),
                }],
                Some(0.0),
            ),
        ),
        (
            "dp_values.svg",
            render_line_chart(
                "Diversity progress per goal",
                "epoch",
                "dp",
                &per_goal(&|r, g| r.dp.as_ref().map(|dp| dp[g])),
                None,
            ),
        ),
        (
            "goal_probs.svg",
            render_line_chart(
                "Goal-selection probabilities",
                "epoch",
                "p(goal)",
                &per_goal(&|r, g| Some(r.p_goal[g])),
                Some(0.0),
            ),
        ),
        (
            "cumulative_counts.svg",
            render_line_chart(
                "Cumulative goal selections",
                "epoch",
                "count",
                &per_goal(&|r, g| Some(r.counts[g] as f64)),
                Some(0.0),
            ),
        ),
    ];
    let mut written = Vec::new();
    for (name, svg) in charts {
        let path = run_dir.join(name);
        write_file(&path, svg.as_bytes())?;
        written.push(path);
    }
    let emb = run_dir.join(EMBEDDING_CSV);
    if emb.exists() {
        let path = run_dir.join("tsne.svg");
        write_file(
            &path,
            render_scatter("t-SNE of trajectory means", &read_embedding(&emb)?).as_bytes(),
        )?;
        written.push(path);
    }
    Ok(written)
}
