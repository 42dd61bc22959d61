//! Static SVG line charts. Output depends only on the input rows: fixed
//! canvas, fixed palette, fixed number formatting.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use crate::csvio::{self, SweepRow, TraceRow, SWEEP_HEADER, TRACE_HEADER};
use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum PlotKind {
    FidelityCurve,
    Signal,
    NrSweep,
    FieldSweep,
}

impl PlotKind {
    pub fn as_str(self) -> &'static str {
        match self {
            PlotKind::FidelityCurve => "fidelity_curve",
            PlotKind::Signal => "signal",
            PlotKind::NrSweep => "nr_sweep",
            PlotKind::FieldSweep => "field_sweep",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 420.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn linear_ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let (lo, hi) = if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
    let step = nice_step(hi - lo);
    let start = (lo / step).floor() * step;
    let end = (hi / step).ceil() * step;
    let n = ((end - start) / step).round() as usize;
    let ticks = (0..=n).map(|i| start + i as f64 * step).collect();
    (start, end, ticks)
}

fn log_ticks(lo: f64, hi: f64) -> (f64, f64, Vec<f64>) {
    let a = lo.log10().floor() as i32;
    let b = (hi.log10().ceil() as i32).max(a + 1);
    let ticks = (a..=b).map(|e| 10f64.powi(e)).collect();
    (10f64.powi(a), 10f64.powi(b), ticks)
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(1e-3..1e5).contains(&a) {
        return format!("{v:.0e}");
    }
    let s = format!("{v:.4}");
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
        .replace('"', "&quot;")
}

pub fn render_chart(chart: &Chart) -> String {
    let pts = chart
        .series
        .iter()
        .flat_map(|s| s.points.iter())
        .filter(|(x, y)| x.is_finite() && y.is_finite() && (!chart.log_x || *x > 0.0));
    let (mut x_lo, mut x_hi, mut y_lo, mut y_hi) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
    for &(x, y) in pts {
        x_lo = x_lo.min(x);
        x_hi = x_hi.max(x);
        y_lo = y_lo.min(y);
        y_hi = y_hi.max(y);
    }
    if x_lo > x_hi {
        (x_lo, x_hi, y_lo, y_hi) = (1.0, 10.0, 0.0, 1.0);
    }
    let (x0, x1, xt) = if chart.log_x {
        log_ticks(x_lo, x_hi)
    } else {
        linear_ticks(x_lo, x_hi)
    };
    let (y0, y1, yt) = linear_ticks(y_lo.min(0.0), y_hi);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let sx = |x: f64| {
        let f = if chart.log_x {
            (x.log10() - x0.log10()) / (x1.log10() - x0.log10())
        } else {
            (x - x0) / (x1 - x0)
        };
        LEFT + f * pw
    };
    let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;

    let mut s = String::new();
    writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">
<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>
<text x="{:.1}" y="22" text-anchor="middle" font-size="14">{}</text>"#,
        WIDTH / 2.0,
        escape(&chart.title)
    )
    .unwrap();
    s.push_str("<g stroke=\"#dddddd\" stroke-width=\"1\">\n");
    for &t in &xt {
        writeln!(
            s,
            r#"<line x1="{0:.2}" y1="{1:.2}" x2="{0:.2}" y2="{2:.2}"/>"#,
            sx(t),
            TOP,
            TOP + ph
        )
        .unwrap();
    }
    for &t in &yt {
        writeln!(
            s,
            r#"<line x1="{1:.2}" y1="{0:.2}" x2="{2:.2}" y2="{0:.2}"/>"#,
            sy(t),
            LEFT,
            LEFT + pw
        )
        .unwrap();
    }
    s.push_str("</g>\n");
    writeln!(
        s,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black" stroke-width="1"/>"#
    )
    .unwrap();
    for &t in &xt {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            sx(t),
            TOP + ph + 16.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    for &t in &yt {
        writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
            LEFT - 6.0,
            sy(t) + 4.0,
            fmt_tick(t)
        )
        .unwrap();
    }
    writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(&chart.x_label)
    )
    .unwrap();
    writeln!(
        s,
        r#"<text x="18" y="{0:.2}" text-anchor="middle" transform="rotate(-90 18 {0:.2})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    )
    .unwrap();
    for (i, series) in chart.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for &(x, y) in &series.points {
            if x.is_finite() && y.is_finite() && (!chart.log_x || x > 0.0) {
                write!(path, "{:.2},{:.2} ", sx(x), sy(y)).unwrap();
            }
        }
        writeln!(
            s,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.trim_end()
        )
        .unwrap();
        if series.points.len() <= 60 {
            for &(x, y) in &series.points {
                if x.is_finite() && y.is_finite() && (!chart.log_x || x > 0.0) {
                    writeln!(
                        s,
                        r#"<circle cx="{:.2}" cy="{:.2}" r="2.5" fill="{color}"/>"#,
                        sx(x),
                        sy(y)
                    )
                    .unwrap();
                }
            }
        }
        let ly = TOP + 14.0 + 16.0 * i as f64;
        let lx = LEFT + pw - 110.0;
        writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{0:.2}" x2="{1:.2}" y2="{0:.2}" stroke="{color}" stroke-width="2"/><text x="{2:.2}" y="{3:.2}">{4}</text>"#,
            ly,
            lx + 18.0,
            lx + 24.0,
            ly + 4.0,
            escape(&series.name)
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}

/// Groups `(key, x, y)` triples into series, keeping first-seen order.
fn group(items: impl Iterator<Item = (String, f64, f64)>) -> Vec<Series> {
    let mut order: Vec<String> = Vec::new();
    let mut map: BTreeMap<String, Vec<(f64, f64)>> = BTreeMap::new();
    for (k, x, y) in items {
        if !map.contains_key(&k) {
            order.push(k.clone());
        }
        map.entry(k).or_default().push((x, y));
    }
    order
        .into_iter()
        .map(|name| {
            let points = map.remove(&name).unwrap_or_default();
            Series { name, points }
        })
        .collect()
}

fn check_axis(rows: &[SweepRow], want: &str, source: &str, kind: PlotKind) -> Result<()> {
    if let Some(r) = rows.iter().find(|r| r.axis != want) {
        return Err(AppError::SchemaMismatch {
            path: source.into(),
            kind: kind.as_str().into(),
            reason: format!("expected axis `{want}`, found `{}`", r.axis),
        });
    }
    Ok(())
}

/// Builds the chart for `kind` from CSV text.
pub fn chart_from_csv(kind: PlotKind, text: &str, source: &str) -> Result<Chart> {
    let k = kind.as_str();
    Ok(match kind {
        PlotKind::FidelityCurve | PlotKind::Signal => {
            let rows: Vec<TraceRow> = csvio::parse_rows(text, source, k, &TRACE_HEADER)?;
            let fid = kind == PlotKind::FidelityCurve;
            Chart {
                title: if fid {
                    "Readout fidelity".into()
                } else {
                    "Cumulative signal C0 - C1".into()
                },
                x_label: "number of readouts N".into(),
                y_label: if fid { "F".into() } else { "C0 - C1 (counts)".into() },
                log_x: fid,
                series: group(
                    rows.into_iter()
                        .map(|r| (r.variant, r.n as f64, if fid { r.fidelity } else { r.signal })),
                ),
            }
        }
        PlotKind::NrSweep => {
            let rows: Vec<SweepRow> = csvio::parse_rows(text, source, k, &SWEEP_HEADER)?;
            check_axis(&rows, "nr", source, kind)?;
            let ec = rows
                .into_iter()
                .filter(|r| r.variant != "plain")
                .map(|r| ("improvement".to_string(), r.value, r.improvement));
            Chart {
                title: "Improvement against correction period".into(),
                x_label: "correction period N_r".into(),
                y_label: "F_ec / F_plain".into(),
                log_x: false,
                series: group(ec),
            }
        }
        PlotKind::FieldSweep => {
            let rows: Vec<SweepRow> = csvio::parse_rows(text, source, k, &SWEEP_HEADER)?;
            check_axis(&rows, "b0_mt", source, kind)?;
            let ec = rows
                .into_iter()
                .filter(|r| r.variant != "plain")
                .map(|r| (r.variant, r.value, r.improvement));
            Chart {
                title: "Improvement against field".into(),
                x_label: "B0 (mT)".into(),
                y_label: "F_ec / F_plain".into(),
                log_x: false,
                series: group(ec),
            }
        }
    })
}

pub fn render(kind: PlotKind, text: &str, source: &str) -> Result<String> {
    Ok(render_chart(&chart_from_csv(kind, text, source)?))
}

pub fn render_file(kind: PlotKind, path: &Path) -> Result<String> {
    let text = std::fs::read_to_string(path).map_err(|e| AppError::io_path(path, e))?;
    render(kind, &text, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    const TRACE: &str = "variant,n,c0,c1,signal,fidelity,fidelity_se\n\
        plain,1,0.02,0.01,0.01,0.05,\n\
        plain,10,0.2,0.1,0.1,0.15,\n\
        plain,100,2,1,1,0.4,\n";

    #[test]
    fn fidelity_curve_uses_log_axis() {
        let c = chart_from_csv(PlotKind::FidelityCurve, TRACE, "t").unwrap();
        assert!(c.log_x);
        assert_eq!(c.series.len(), 1);
        let svg = render_chart(&c);
        // Decade labels 1, 10, 100 are present.
        for t in [">1<", ">10<", ">100<"] {
            assert!(svg.contains(t), "{t}");
        }
        assert!(svg.starts_with("<?xml"));
        assert!(svg.ends_with("</svg>\n"));
    }

    #[test]
    fn output_is_deterministic() {
        let a = render(PlotKind::Signal, TRACE, "t").unwrap();
        let b = render(PlotKind::Signal, TRACE, "t").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(
            render(PlotKind::FidelityCurve, "", "t"),
            Err(AppError::SchemaMismatch { .. })
        ));
        assert!(matches!(
            render(PlotKind::NrSweep, TRACE, "t"),
            Err(AppError::SchemaMismatch { .. })
        ));
        let sweep = "axis,value,variant,f_max,n_opt,improvement\nb0_mt,50,plain,0.1,10,1\n";
        assert!(matches!(
            render(PlotKind::NrSweep, sweep, "t"),
            Err(AppError::SchemaMismatch { .. })
        ));
        assert!(render(PlotKind::FieldSweep, sweep, "t").is_ok());
    }

    #[test]
    fn tick_helpers() {
        assert_eq!(
            linear_ticks(0.0, 0.43).2,
            vec![0.0, 0.1, 0.2, 0.30000000000000004, 0.4, 0.5]
        );
        assert_eq!(log_ticks(1.0, 6000.0).2, vec![1.0, 10.0, 100.0, 1000.0, 10000.0]);
        assert_eq!(fmt_tick(0.30000000000000004), "0.3");
        assert_eq!(fmt_tick(2500.0), "2500");
        assert_eq!(fmt_tick(1e6), "1e6");
    }

    #[test]
    fn text_is_escaped() {
        let c = Chart {
            title: "a<b & c".into(),
            x_label: String::new(),
            y_label: String::new(),
            log_x: false,
            series: vec![],
        };
        assert!(render_chart(&c).contains("a&lt;b &amp; c"));
    }
}
