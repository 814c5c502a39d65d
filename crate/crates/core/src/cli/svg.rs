//! Minimal self-contained SVG line charts.

use std::fmt::Write;

use crate::error::{Error, Result};

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    /// Optional symmetric error bar half-widths, one per point.
    pub errors: Option<Vec<f64>>,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            name: name.into(),
            points,
            errors: None,
        }
    }

    pub fn with_errors(mut self, errors: Vec<f64>) -> Self {
        self.errors = Some(errors);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Axes {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot log10(x) instead of x.
    pub log_x: bool,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if hi - lo < 1e-12 {
        (lo - 0.5, hi + 0.5)
    } else {
        let pad = 0.05 * (hi - lo);
        (lo - pad, hi + pad)
    }
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

/// Renders the series as an 800×500 line chart with axes and a legend.
pub fn emit_svg(series: &[Series], axes: &Axes) -> Result<String> {
    if series.is_empty() || series.iter().any(|s| s.points.is_empty()) {
        return Err(Error::InvalidInput("chart needs at least one non-empty series".into()));
    }
    for s in series {
        if s.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidInput(format!("series {:?} has non-finite points", s.name)));
        }
        if axes.log_x && s.points.iter().any(|&(x, _)| x <= 0.0) {
            return Err(Error::InvalidInput("log x axis needs positive x values".into()));
        }
        if let Some(e) = &s.errors {
            if e.len() != s.points.len() {
                return Err(Error::InvalidInput(format!("series {:?} error bars do not match points", s.name)));
            }
        }
    }
    let tx = |x: f64| if axes.log_x { x.log10() } else { x };
    let (x0, x1) = range(series.iter().flat_map(|s| s.points.iter().map(|p| tx(p.0))));
    let (y0, y1) = range(series.iter().flat_map(|s| {
        s.points.iter().enumerate().flat_map(move |(i, p)| {
            let e = s.errors.as_ref().map_or(0.0, |e| e[i]);
            [p.1 - e, p.1 + e]
        })
    }));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (tx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (1.0 - (y - y0) / (y1 - y0)) * ph;

    let mut out = String::new();
    let w = &mut out;
    // Writing to a String cannot fail.
    let _ = writeln!(
        w,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(w, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
        LEFT + pw / 2.0,
        escape(&axes.title)
    );
    let _ = writeln!(
        w,
        r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    for i in 0..=4 {
        let f = i as f64 / 4.0;
        let xv = x0 + f * (x1 - x0);
        let yv = y0 + f * (y1 - y0);
        let xp = LEFT + f * pw;
        let yp = TOP + (1.0 - f) * ph;
        let xlabel = if axes.log_x { format!("1e{}", fmt_tick(xv)) } else { fmt_tick(xv) };
        let _ = writeln!(
            w,
            r#"<line x1="{xp:.1}" y1="{:.1}" x2="{xp:.1}" y2="{:.1}" stroke="black"/><text x="{xp:.1}" y="{:.1}" text-anchor="middle">{xlabel}</text>"#,
            TOP + ph,
            TOP + ph + 5.0,
            TOP + ph + 18.0
        );
        let _ = writeln!(
            w,
            r#"<line x1="{:.1}" y1="{yp:.1}" x2="{LEFT}" y2="{yp:.1}" stroke="black"/><text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 5.0,
            LEFT - 8.0,
            yp + 4.0,
            fmt_tick(yv)
        );
    }
    let _ = writeln!(
        w,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 15.0,
        escape(&axes.x_label)
    );
    let _ = writeln!(
        w,
        r#"<text x="18" y="{:.1}" text-anchor="middle" transform="rotate(-90 18 {:.1})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&axes.y_label)
    );

    for (si, s) in series.iter().enumerate() {
        let color = PALETTE[si % PALETTE.len()];
        let _ = writeln!(w, r#"<g class="series" stroke="{color}" fill="{color}">"#);
        if s.points.len() > 1 {
            let pts: Vec<String> = s
                .points
                .iter()
                .map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y)))
                .collect();
            let _ = writeln!(w, r#"<polyline fill="none" stroke-width="2" points="{}"/>"#, pts.join(" "));
        }
        for (i, &(x, y)) in s.points.iter().enumerate() {
            if let Some(e) = s.errors.as_ref().map(|e| e[i]).filter(|e| *e > 0.0) {
                let _ = writeln!(
                    w,
                    r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke-width="1"/>"#,
                    px(x),
                    py(y - e),
                    px(x),
                    py(y + e)
                );
            }
            let _ = writeln!(w, r#"<circle cx="{:.2}" cy="{:.2}" r="3"/>"#, px(x), py(y));
        }
        let _ = writeln!(w, "</g>");
        let ly = TOP + 10.0 + 20.0 * si as f64;
        let lx = WIDTH - RIGHT + 15.0;
        let _ = writeln!(
            w,
            r#"<g class="legend-entry"><rect x="{lx:.1}" y="{:.1}" width="14" height="4" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text></g>"#,
            ly - 2.0,
            lx + 20.0,
            ly + 4.0,
            escape(&s.name)
        );
    }
    let _ = writeln!(w, "</svg>");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn axes() -> Axes {
        Axes {
            title: "accuracy".into(),
            x_label: "shots".into(),
            y_label: "acc".into(),
            log_x: false,
        }
    }

    #[test]
    fn single_point_has_one_marker() {
        let svg = emit_svg(&[Series::new("a", vec![(1.0, 0.5)])], &axes()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn legend_has_one_entry_per_series() {
        let s = [
            Series::new("a", vec![(1.0, 0.5), (2.0, 0.6)]),
            Series::new("b <x>", vec![(1.0, 0.4), (2.0, 0.7)]).with_errors(vec![0.1, 0.0]),
        ];
        let svg = emit_svg(&s, &axes()).unwrap();
        assert_eq!(svg.matches(r#"class="legend-entry""#).count(), 2);
        assert!(svg.contains("b &lt;x&gt;"));
        assert_eq!(svg, emit_svg(&s, &axes()).unwrap());
    }

    #[test]
    fn rejects_empty_and_bad_input() {
        assert!(emit_svg(&[], &axes()).is_err());
        assert!(emit_svg(&[Series::new("a", vec![])], &axes()).is_err());
        let log = Axes { log_x: true, ..axes() };
        assert!(emit_svg(&[Series::new("a", vec![(0.0, 1.0)])], &log).is_err());
    }
}
