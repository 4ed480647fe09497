//! Minimal SVG figures: line charts, heatmaps, and image contact sheets.

use std::fmt::Write;

use crate::analysis::gray_level;
use crate::tensor::{Real, Tensor};

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub struct Series {
    pub label: String,
    pub points: Vec<(Real, Real)>,
}

/// A line chart with shared axes for every series.
pub fn line_chart(title: &str, x_label: &str, y_label: &str, series: &[Series]) -> String {
    let (w, h, m) = (640.0, 400.0, 60.0);
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut x0, mut x1, mut y0, mut y1) = (Real::INFINITY, Real::NEG_INFINITY, Real::INFINITY, Real::NEG_INFINITY);
    for &(x, y) in pts.filter(|p| p.0.is_finite() && p.1.is_finite()) {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    if !x0.is_finite() {
        (x0, x1, y0, y1) = (0.0, 1.0, 0.0, 1.0);
    }
    if x1 - x0 <= 0.0 {
        x1 = x0 + 1.0;
    }
    if y1 - y0 <= 0.0 {
        y0 -= 0.5;
        y1 += 0.5;
    }
    let sx = |x: Real| m + (x - x0) as f64 / (x1 - x0) as f64 * (w - 2.0 * m);
    let sy = |y: Real| h - m - (y - y0) as f64 / (y1 - y0) as f64 * (h - 2.0 * m);
    let mut svg = String::new();
    let _ = write!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" font-family="sans-serif" font-size="12">
<rect width="100%" height="100%" fill="white"/>
<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>
<line x1="{m}" y1="{}" x2="{}" y2="{}" stroke="black"/>
<line x1="{m}" y1="{m}" x2="{m}" y2="{}" stroke="black"/>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="16" y="{}" text-anchor="middle" transform="rotate(-90 16 {})">{}</text>
<text x="{m}" y="{}" text-anchor="middle">{}</text>
<text x="{}" y="{}" text-anchor="middle">{}</text>
<text x="{}" y="{}" text-anchor="end">{}</text>
<text x="{}" y="{}" text-anchor="end">{}</text>
"#,
        w / 2.0,
        escape(title),
        h - m,
        w - m,
        h - m,
        h - m,
        w / 2.0,
        h - 16.0,
        escape(x_label),
        h / 2.0,
        h / 2.0,
        escape(y_label),
        h - m + 16.0,
        fmt_tick(x0),
        w - m,
        h - m + 16.0,
        fmt_tick(x1),
        m - 6.0,
        h - m,
        fmt_tick(y0),
        m - 6.0,
        m + 4.0,
        fmt_tick(y1),
    );
    for (i, s) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .filter(|p| p.0.is_finite() && p.1.is_finite())
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
            path.join(" ")
        );
        let ly = m + 16.0 * i as f64;
        let _ = writeln!(
            svg,
            r#"<rect x="{}" y="{}" width="10" height="10" fill="{color}"/><text x="{}" y="{}">{}</text>"#,
            w - m - 110.0,
            ly - 9.0,
            w - m - 95.0,
            ly,
            escape(&s.label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_tick(v: Real) -> String {
    if v.abs() >= 1000.0 || v == v.trunc() {
        format!("{v:.0}")
    } else {
        format!("{v:.3}")
    }
}

/// Heatmap of `values[row][col]` in `[0, 1]`, darker meaning larger.
pub fn heatmap(title: &str, row_labels: &[String], col_labels: &[String], values: &[Vec<Real>]) -> String {
    let cell = 48.0;
    let (left, top) = (90.0, 50.0);
    let cols = col_labels.len() as f64;
    let rows = row_labels.len() as f64;
    let (w, h) = (left + cell * cols + 20.0, top + cell * rows + 20.0);
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for (c, label) in col_labels.iter().enumerate() {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            left + cell * (c as f64 + 0.5),
            top - 6.0,
            escape(label)
        );
    }
    for (r, label) in row_labels.iter().enumerate() {
        let y = top + cell * r as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 6.0,
            y + cell / 2.0 + 4.0,
            escape(label)
        );
        for (c, &v) in values[r].iter().enumerate() {
            let g = 255 - gray_level(v);
            let text = if g < 128 { "white" } else { "black" };
            let x = left + cell * c as f64;
            let _ = writeln!(
                svg,
                r##"<rect x="{x}" y="{y}" width="{cell}" height="{cell}" fill="rgb({g},{g},{g})" stroke="#ccc"/><text x="{}" y="{}" text-anchor="middle" fill="{text}">{v:.2}</text>"##,
                x + cell / 2.0,
                y + cell / 2.0 + 4.0
            );
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Grayscale `[h, w]` images laid out in labelled rows, one pixel rect per
/// image pixel.
pub fn contact_sheet(title: &str, rows: &[(String, Vec<Tensor>)], pixel: f64) -> String {
    let gap = 6.0;
    let left = 110.0;
    let top = 36.0;
    let (ih, iw) = rows
        .iter()
        .flat_map(|(_, imgs)| imgs.first())
        .map(|t| (t.shape()[0] as f64, t.shape()[1] as f64))
        .next()
        .unwrap_or((1.0, 1.0));
    let ncols = rows.iter().map(|(_, v)| v.len()).max().unwrap_or(0) as f64;
    let (fw, fh) = (iw * pixel, ih * pixel);
    let w = left + ncols * (fw + gap) + gap;
    let h = top + rows.len() as f64 * (fh + gap) + gap;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\" shape-rendering=\"crispEdges\">\n\
<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    for (r, (label, imgs)) in rows.iter().enumerate() {
        let y0 = top + r as f64 * (fh + gap);
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            left - 8.0,
            y0 + fh / 2.0 + 4.0,
            escape(label)
        );
        for (c, img) in imgs.iter().enumerate() {
            let x0 = left + c as f64 * (fw + gap);
            let _ = write!(svg, r#"<g transform="translate({x0},{y0})">"#);
            for i in 0..img.shape()[0] {
                for j in 0..img.shape()[1] {
                    let g = gray_level(img.at(&[i, j]));
                    let _ = write!(
                        svg,
                        r#"<rect x="{}" y="{}" width="{pixel}" height="{pixel}" fill="rgb({g},{g},{g})"/>"#,
                        j as f64 * pixel,
                        i as f64 * pixel
                    );
                }
            }
            svg.push_str("</g>\n");
        }
    }
    svg.push_str("</svg>\n");
    svg
}

/// Per-task chain of the most heavily weighted layer at each depth, drawn as
/// a grid of layer nodes (rows) by depth (columns).
pub fn strongest_path(title: &str, paths: &[(String, Vec<usize>)], layers: usize) -> String {
    let depth = paths.iter().map(|(_, p)| p.len()).max().unwrap_or(0);
    let (left, top, dx, dy) = (80.0, 60.0, 90.0, 50.0);
    let w = left + dx * depth.max(1) as f64 + 140.0;
    let h = top + dy * layers.max(1) as f64 + 20.0;
    let mut svg = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" font-family=\"sans-serif\" font-size=\"12\">\n\
<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
<text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        w / 2.0,
        escape(title)
    );
    let node = |j: usize, k: usize| (left + dx * k as f64, top + dy * j as f64);
    for k in 0..depth {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="middle">depth {}</text>"#,
            node(0, k).0,
            top - 24.0,
            k + 1
        );
    }
    for j in 0..layers {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end">layer {}</text>"#,
            left - 20.0,
            node(j, 0).1 + 4.0,
            j + 1
        );
        for k in 0..depth {
            let (x, y) = node(j, k);
            let _ = writeln!(svg, r##"<circle cx="{x}" cy="{y}" r="6" fill="#eee" stroke="#999"/>"##);
        }
    }
    for (i, (label, path)) in paths.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let off = (i as f64 - (paths.len() as f64 - 1.0) / 2.0) * 3.0;
        let pts: Vec<String> = path
            .iter()
            .enumerate()
            .map(|(k, &j)| {
                let (x, y) = node(j, k);
                format!("{x},{}", y + off)
            })
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" stroke-width="2.5" points="{}"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}">{}</text>"#,
            left + dx * depth as f64 + 10.0,
            top + 16.0 * i as f64,
            escape(label)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn figures_are_well_formed() {
        let chart = line_chart(
            "a<b",
            "iteration",
            "loss",
            &[Series {
                label: "t".into(),
                points: vec![(0.0, 1.0), (1.0, 0.5)],
            }],
        );
        assert!(chart.starts_with("<svg") && chart.trim_end().ends_with("</svg>"));
        assert!(chart.contains("a&lt;b"));
        let hm = heatmap("u", &["1".into()], &["1".into(), "2".into()], &[vec![0.0, 1.0]]);
        assert_eq!(hm.matches("<rect x=").count(), 2);
        let sheet = contact_sheet("s", &[("row".into(), vec![Tensor::zeros(&[2, 2])])], 4.0);
        assert_eq!(sheet.matches("fill=\"rgb(0,0,0)\"").count(), 4);
        let p = strongest_path("p", &[("task 1".into(), vec![0, 1])], 2);
        assert!(p.contains("<polyline"));
    }
}
