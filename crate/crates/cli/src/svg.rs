//! Minimal static SVG line charts: axes, polylines, labels.

use std::fmt::Write;

const WIDTH: f64 = 800.0;
const PANEL_HEIGHT: f64 = 220.0;
const STACKED_HEIGHT: f64 = 110.0;
const MARGIN_LEFT: f64 = 70.0;
const MARGIN_RIGHT: f64 = 20.0;
const MARGIN_TOP: f64 = 30.0;
const GAP: f64 = 24.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Line<'a> {
    pub label: &'a str,
    pub values: &'a [f64],
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn bounds<'a>(lines: impl Iterator<Item = &'a [f64]>) -> (f64, f64) {
    let (lo, hi) = lines
        .flat_map(|l| l.iter().copied())
        .filter(|v| v.is_finite())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi - lo < 1e-12 * lo.abs().max(1.0) {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Draws one framed panel at vertical offset `top`.
fn panel(svg: &mut String, title: &str, lines: &[Line<'_>], top: f64, height: f64, legend: bool) {
    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let (lo, hi) = bounds(lines.iter().map(|l| l.values));
    let n = lines.iter().map(|l| l.values.len()).max().unwrap_or(0);
    let x = |i: usize| MARGIN_LEFT + if n > 1 { plot_w * i as f64 / (n - 1) as f64 } else { plot_w / 2.0 };
    let y = |v: f64| top + height * (hi - v) / (hi - lo);

    let _ = writeln!(
        svg,
        r##"<rect class="axes" x="{MARGIN_LEFT}" y="{top}" width="{plot_w}" height="{height}" fill="none" stroke="#444"/>"##
    );
    let _ = writeln!(
        svg,
        r#"<text class="title" x="{MARGIN_LEFT}" y="{:.1}" font-size="13">{}</text>"#,
        top - 6.0,
        escape(title)
    );
    for (v, ty) in [(hi, top + 4.0), (lo, top + height)] {
        let _ = writeln!(
            svg,
            r#"<text class="tick" x="{:.1}" y="{ty:.1}" font-size="10" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 4.0,
            format_tick(v)
        );
    }
    for (k, line) in lines.iter().enumerate() {
        let color = PALETTE[k % PALETTE.len()];
        let points: Vec<String> = line
            .values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, v)| format!("{:.2},{:.2}", x(i), y(*v)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline class="series" data-label="{}" data-points="{}" fill="none" stroke="{color}" stroke-width="1.2" points="{}"/>"#,
            escape(line.label),
            points.len(),
            points.join(" ")
        );
        if legend {
            let ly = top + 14.0 + 14.0 * k as f64;
            let lx = WIDTH - MARGIN_RIGHT - 150.0;
            let _ = writeln!(
                svg,
                r#"<line x1="{lx}" y1="{:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/><text class="legend" x="{:.1}" y="{ly:.1}" font-size="11">{}</text>"#,
                ly - 4.0,
                lx + 18.0,
                ly - 4.0,
                lx + 22.0,
                escape(line.label)
            );
        }
    }
}

fn format_tick(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.2e}")
    } else {
        format!("{v:.3}")
    }
}

fn document(height: f64, body: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{height}\" viewBox=\"0 0 {WIDTH} {height}\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n{body}</svg>\n"
    )
}

/// All lines on one set of axes with a legend.
pub fn line_chart(title: &str, lines: &[Line<'_>]) -> String {
    let mut body = String::new();
    panel(&mut body, title, lines, MARGIN_TOP, PANEL_HEIGHT, true);
    document(MARGIN_TOP + PANEL_HEIGHT + GAP, &body)
}

/// One panel per line, stacked vertically, each with its own y range.
pub fn stacked_chart(lines: &[Line<'_>]) -> String {
    let mut body = String::new();
    for (k, line) in lines.iter().enumerate() {
        let top = MARGIN_TOP + k as f64 * (STACKED_HEIGHT + MARGIN_TOP);
        panel(&mut body, line.label, std::slice::from_ref(line), top, STACKED_HEIGHT, false);
    }
    let height = MARGIN_TOP + lines.len() as f64 * (STACKED_HEIGHT + MARGIN_TOP) + GAP;
    document(height, &body)
}
