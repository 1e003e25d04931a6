//! Minimal self-contained SVG line charts: no external assets, one polyline
//! plus markers per series, legend, labeled linear axes.

use std::fs;
use std::path::Path;

use crate::error::SimError;
use crate::export::format_sig;

const COLORS: [&str; 6] = ["#1b6ca8", "#d1495b", "#2e933c", "#e28413", "#6b4e9b", "#3a3a3a"];
const WIDTH: f64 = 860.0;
const HEIGHT: f64 = 540.0;
const MARGIN_L: f64 = 82.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 48.0;
const MARGIN_B: f64 = 64.0;

/// One chart series.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// Axis labels and title.
#[derive(Debug, Clone, Default)]
pub struct ChartLabels {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn range_of(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        // Single value: open a symmetric window around it.
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

/// Renders a line chart into an SVG string. Fails on an empty series list or
/// a series without points.
pub fn render_chart(series: &[Series], labels: &ChartLabels) -> Result<String, SimError> {
    if series.is_empty() {
        return Err(SimError::config("cannot plot an empty series list"));
    }
    if let Some(empty) = series.iter().find(|s| s.points.is_empty()) {
        return Err(SimError::config(format!("series '{}' has no points", empty.label)));
    }

    let (x_lo, x_hi) = range_of(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = range_of(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    let plot_h = HEIGHT - MARGIN_T - MARGIN_B;
    let to_x = |x: f64| MARGIN_L + (x - x_lo) / (x_hi - x_lo) * plot_w;
    let to_y = |y: f64| MARGIN_T + plot_h - (y - y_lo) / (y_hi - y_lo) * plot_h;

    let mut svg = String::new();
    svg.push_str(&format!(
        r#"<svg version="1.1" xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    ));
    svg.push('\n');
    svg.push_str(r#"<rect width="100%" height="100%" fill="white"/>"#);
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{}" y="26" text-anchor="middle" font-family="sans-serif" font-size="17" font-weight="bold">{}</text>"#,
        WIDTH / 2.0,
        escape(&labels.title)
    ));
    svg.push('\n');

    // Grid and ticks: five divisions per axis.
    for i in 0..=5 {
        let fx = i as f64 / 5.0;
        let x_val = x_lo + fx * (x_hi - x_lo);
        let y_val = y_lo + fx * (y_hi - y_lo);
        let gx = to_x(x_val);
        let gy = to_y(y_val);
        svg.push_str(&format!(
            r##"<line x1="{gx:.2}" y1="{MARGIN_T}" x2="{gx:.2}" y2="{:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_T + plot_h
        ));
        svg.push_str(&format!(
            r##"<line x1="{MARGIN_L}" y1="{gy:.2}" x2="{:.2}" y2="{gy:.2}" stroke="#dddddd" stroke-width="1"/>"##,
            MARGIN_L + plot_w
        ));
        svg.push_str(&format!(
            r#"<text x="{gx:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_T + plot_h + 20.0,
            escape(&format_sig(x_val, 4))
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-family="sans-serif" font-size="12">{}</text>"#,
            MARGIN_L - 8.0,
            gy + 4.0,
            escape(&format_sig(y_val, 4))
        ));
        svg.push('\n');
    }

    // Axes.
    svg.push_str(&format!(
        r#"<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
        MARGIN_T + plot_h
    ));
    svg.push_str(&format!(
        r#"<line x1="{MARGIN_L}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="black" stroke-width="1.5"/>"#,
        MARGIN_T + plot_h,
        MARGIN_L + plot_w,
        MARGIN_T + plot_h
    ));
    svg.push('\n');
    svg.push_str(&format!(
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="14">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        HEIGHT - 18.0,
        escape(&labels.x_label)
    ));
    svg.push_str(&format!(
        r#"<text x="20" y="{:.2}" text-anchor="middle" font-family="sans-serif" font-size="14" transform="rotate(-90 20 {:.2})">{}</text>"#,
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape(&labels.y_label)
    ));
    svg.push('\n');

    // Series in input order; the legend mirrors that order.
    for (idx, s) in series.iter().enumerate() {
        let color = COLORS[idx % COLORS.len()];
        if s.points.len() > 1 {
            let mut d = String::new();
            for (i, &(x, y)) in s.points.iter().enumerate() {
                d.push_str(&format!(
                    "{}{:.2} {:.2}",
                    if i == 0 { "M" } else { " L" },
                    to_x(x),
                    to_y(y)
                ));
            }
            svg.push_str(&format!(
                r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="2"/>"#
            ));
        }
        for &(x, y) in &s.points {
            svg.push_str(&format!(
                r#"<circle cx="{:.2}" cy="{:.2}" r="3.5" fill="{color}"/>"#,
                to_x(x),
                to_y(y)
            ));
        }
        let ly = MARGIN_T + 10.0 + idx as f64 * 20.0;
        svg.push_str(&format!(
            r#"<rect x="{:.2}" y="{:.2}" width="14" height="14" fill="{color}"/>"#,
            MARGIN_L + plot_w - 170.0,
            ly - 11.0
        ));
        svg.push_str(&format!(
            r#"<text x="{:.2}" y="{ly:.2}" font-family="sans-serif" font-size="13">{}</text>"#,
            MARGIN_L + plot_w - 150.0,
            escape(&s.label)
        ));
        svg.push('\n');
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}

/// Renders and writes the chart.
pub fn write_chart(series: &[Series], labels: &ChartLabels, path: &Path) -> Result<(), SimError> {
    let svg = render_chart(series, labels)?;
    fs::write(path, svg).map_err(|e| SimError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Minimal well-formedness check: every opened tag closes and angle
    /// brackets balance.
    fn check_xml(text: &str) {
        let mut stack: Vec<String> = Vec::new();
        let mut rest = text;
        while let Some(start) = rest.find('<') {
            let end = rest[start..].find('>').expect("unclosed angle bracket") + start;
            let tag = &rest[start + 1..end];
            rest = &rest[end + 1..];
            if let Some(name) = tag.strip_prefix('/') {
                let open = stack.pop().expect("close without open");
                assert_eq!(open, name, "mismatched tag");
            } else if !tag.ends_with('/') && !tag.starts_with('?') && !tag.starts_with('!') {
                let name: String =
                    tag.chars().take_while(|c| !c.is_whitespace() && *c != '>').collect();
                stack.push(name);
            }
        }
        assert!(stack.is_empty(), "unclosed tags: {stack:?}");
        assert!(!rest.contains('>'), "stray closing bracket");
    }

    #[test]
    fn single_point_series_renders() {
        let series = vec![Series { label: "only".into(), points: vec![(1.0, 2.0)] }];
        let svg = render_chart(&series, &ChartLabels::default()).unwrap();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains("circle"));
        check_xml(&svg);
    }

    #[test]
    fn output_is_well_formed() {
        let series = vec![
            Series { label: "a & b".into(), points: vec![(0.0, 1.0), (1.0, 3.0), (2.0, 2.0)] },
            Series { label: "c<d>".into(), points: vec![(0.0, 2.0), (2.0, 0.5)] },
        ];
        let labels = ChartLabels {
            title: "t".into(),
            x_label: "x (W)".into(),
            y_label: "y (Mbit/s)".into(),
        };
        let svg = render_chart(&series, &labels).unwrap();
        check_xml(&svg);
        assert!(svg.contains("&amp;"));
        assert!(svg.contains("&lt;d&gt;"));
    }

    #[test]
    fn legend_preserves_series_order() {
        let series = vec![
            Series { label: "zzz".into(), points: vec![(0.0, 0.0), (1.0, 1.0)] },
            Series { label: "aaa".into(), points: vec![(0.0, 1.0), (1.0, 0.0)] },
        ];
        let svg = render_chart(&series, &ChartLabels::default()).unwrap();
        assert!(svg.find("zzz").unwrap() < svg.find("aaa").unwrap());
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(render_chart(&[], &ChartLabels::default()).is_err());
        let bad = vec![Series { label: "empty".into(), points: vec![] }];
        assert!(render_chart(&bad, &ChartLabels::default()).is_err());
    }
}
