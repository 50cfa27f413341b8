//! Precision-recall charts as standalone SVG.
//!
//! Curves are drawn inside a group whose transform maps recall and
//! precision onto the plot area, so polyline coordinates are the data
//! values themselves.

use std::fmt::Write as _;

use crate::anchors::BoxDims;
use crate::error::{Error, Result};
use crate::geometry::ClassId;
use crate::metrics::{PrCurve, PrPoint, PR_CSV_HEADER};
use crate::multiview::{EvalMode, MODE_CSV_HEADER};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 60.0;
const TOP: f64 = 20.0;
const PLOT_W: f64 = 440.0;
const PLOT_H: f64 = 400.0;
const COLORS: [&str; 8] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

#[derive(Debug, Clone)]
pub struct PrSeries<'a> {
    pub label: String,
    pub curve: &'a PrCurve,
}

/// Shortest decimal form with at most six fractional digits.
fn num(x: f64) -> String {
    let s = format!("{x:.6}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

/// One polyline per series through its `(recall, precision)` points.
pub fn plot_pr(series: &[PrSeries<'_>]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::EmptyInput("a PR plot needs at least one curve"));
    }
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = num(WIDTH),
        h = num(HEIGHT)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);

    // grid and ticks every 0.1
    for i in 0..=10 {
        let v = f64::from(i) / 10.0;
        let x = LEFT + v * PLOT_W;
        let y = TOP + (1.0 - v) * PLOT_H;
        let _ = writeln!(
            s,
            r##"<line x1="{x}" y1="{t}" x2="{x}" y2="{b}" stroke="#e0e0e0"/><text x="{x}" y="{ty}" text-anchor="middle">{v:.1}</text>"##,
            x = num(x),
            t = num(TOP),
            b = num(TOP + PLOT_H),
            ty = num(TOP + PLOT_H + 16.0)
        );
        let _ = writeln!(
            s,
            r##"<line x1="{l}" y1="{y}" x2="{r}" y2="{y}" stroke="#e0e0e0"/><text x="{tx}" y="{yt}" text-anchor="end">{v:.1}</text>"##,
            l = num(LEFT),
            r = num(LEFT + PLOT_W),
            y = num(y),
            tx = num(LEFT - 6.0),
            yt = num(y + 4.0)
        );
    }
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(LEFT),
        num(TOP),
        num(PLOT_W),
        num(PLOT_H)
    );
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Recall</text>"#,
        num(LEFT + PLOT_W / 2.0),
        num(HEIGHT - 12.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">Precision</text>"#,
        y = num(TOP + PLOT_H / 2.0)
    );

    let _ = writeln!(
        s,
        r#"<g transform="matrix({} 0 0 {} {} {})">"#,
        num(PLOT_W),
        num(-PLOT_H),
        num(LEFT),
        num(TOP + PLOT_H)
    );
    for (i, series) in series.iter().enumerate() {
        let points: Vec<String> = series
            .curve
            .points
            .iter()
            .map(|p| format!("{},{}", num(p.recall), num(p.precision)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline fill="none" stroke="{}" stroke-width="2" vector-effect="non-scaling-stroke" points="{}"/>"#,
            COLORS[i % COLORS.len()],
            points.join(" ")
        );
    }
    let _ = writeln!(s, "</g>");

    let legend_x = LEFT + PLOT_W + 20.0;
    for (i, series) in series.iter().enumerate() {
        let y = TOP + 10.0 + 18.0 * i as f64;
        let _ = writeln!(
            s,
            r#"<line x1="{x0}" y1="{y}" x2="{x1}" y2="{y}" stroke="{c}" stroke-width="2"/><text x="{tx}" y="{ty}">{label} AP={ap:.3}</text>"#,
            x0 = num(legend_x),
            x1 = num(legend_x + 20.0),
            y = num(y),
            c = COLORS[i % COLORS.len()],
            tx = num(legend_x + 26.0),
            ty = num(y + 4.0),
            label = escape(&series.label),
            ap = series.curve.ap
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

/// Reads curves written by [`crate::metrics::write_pr_csv`] (one curve)
/// or [`crate::multiview::write_mode_csv`] (one curve per mode).
pub fn parse_pr_csv(text: &str, class_id: ClassId) -> Result<Vec<(Option<EvalMode>, PrCurve)>> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    let header = lines.next().ok_or(Error::EmptyInput("PR CSV has no header"))?;
    let with_mode = match header.trim() {
        PR_CSV_HEADER => false,
        MODE_CSV_HEADER => true,
        other => return Err(Error::Annotation(format!("unrecognised PR CSV header {other:?}"))),
    };
    let mut curves: Vec<(Option<EvalMode>, Vec<PrPoint>)> = Vec::new();
    for (i, line) in lines.enumerate() {
        let bad = |m: &str| Error::Record {
            path: "<pr csv>".into(),
            line: i + 2,
            message: m.into(),
        };
        let mut cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let mode = if with_mode {
            if cells.is_empty() {
                return Err(bad("missing mode"));
            }
            Some(match cells.remove(0) {
                "single" => EvalMode::Single,
                "fused" => EvalMode::Fused,
                _ => return Err(bad("mode must be single or fused")),
            })
        } else {
            None
        };
        let [threshold, precision, recall] = cells[..] else {
            return Err(bad("expected threshold,precision,recall"));
        };
        let value = |c: &str| c.parse::<f64>().map_err(|_| bad("not a number"));
        let point = PrPoint {
            threshold: value(threshold)?,
            precision: value(precision)?,
            recall: value(recall)?,
            tp: 0,
            fp: 0,
            fn_: 0,
        };
        match curves.last_mut() {
            Some((m, pts)) if *m == mode => pts.push(point),
            _ => curves.push((mode, vec![point])),
        }
    }
    Ok(curves
        .into_iter()
        .map(|(m, pts)| (m, PrCurve::from_points(class_id, pts)))
        .collect())
}

/// Scatter of box widths and heights with cluster centroids overlaid.
pub fn plot_dims(dims: &[BoxDims], centroids: &[BoxDims]) -> Result<String> {
    if dims.is_empty() {
        return Err(Error::EmptyInput("a dimension plot needs at least one box"));
    }
    let max = dims
        .iter()
        .chain(centroids)
        .map(|d| d.w.max(d.h))
        .fold(0.0, f64::max)
        * 1.05;
    let px = |v: f64| LEFT + v / max * PLOT_W;
    let py = |v: f64| TOP + (1.0 - v / max) * PLOT_H;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#,
        w = num(WIDTH),
        h = num(HEIGHT)
    );
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<rect x="{}" y="{}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        num(LEFT),
        num(TOP),
        num(PLOT_W),
        num(PLOT_H)
    );
    for i in 0..=10 {
        let v = max * f64::from(i) / 10.0;
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{:.0}</text><text x="{}" y="{}" text-anchor="end">{:.0}</text>"#,
            num(px(v)),
            num(TOP + PLOT_H + 16.0),
            v,
            num(LEFT - 6.0),
            num(py(v) + 4.0),
            v
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">Width (px)</text>"#,
        num(LEFT + PLOT_W / 2.0),
        num(HEIGHT - 12.0)
    );
    let _ = writeln!(
        s,
        r#"<text x="16" y="{y}" text-anchor="middle" transform="rotate(-90 16 {y})">Height (px)</text>"#,
        y = num(TOP + PLOT_H / 2.0)
    );
    for d in dims {
        let _ = writeln!(
            s,
            r##"<circle cx="{}" cy="{}" r="2" fill="#1f77b4" fill-opacity="0.4"/>"##,
            num(px(d.w)),
            num(py(d.h))
        );
    }
    for c in centroids {
        let _ = writeln!(
            s,
            r##"<path d="M{x0} {y0}L{x1} {y1}M{x0} {y1}L{x1} {y0}" stroke="#d62728" stroke-width="2"/>"##,
            x0 = num(px(c.w) - 5.0),
            x1 = num(px(c.w) + 5.0),
            y0 = num(py(c.h) - 5.0),
            y1 = num(py(c.h) + 5.0)
        );
    }
    s.push_str("</svg>\n");
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn number_format() {
        assert_eq!(num(1.0), "1");
        assert_eq!(num(0.5), "0.5");
        assert_eq!(num(2.0 / 3.0), "0.666667");
        assert_eq!(num(0.0), "0");
    }

    #[test]
    fn empty_input() {
        assert!(plot_pr(&[]).is_err());
    }
}
