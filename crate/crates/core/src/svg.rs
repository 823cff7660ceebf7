//! Standalone SVG rendering of a normalized Moran scatterplot.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::autocorr::{ScatterDataset, ScatterMode, TrendLine};
use crate::error::{Error, Result};

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;

const MARGIN_LEFT: f64 = 80.0;
const MARGIN_RIGHT: f64 = 40.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;

/// Lines whose slope and intercept agree to this relative precision are drawn once.
const COINCIDENT_TOLERANCE: f64 = 1e-12;

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= COINCIDENT_TOLERANCE * a.abs().max(b.abs()).max(1.0)
}

fn nice_step(span: f64, target_ticks: f64) -> f64 {
    let raw = span / target_ticks;
    let magnitude = 10f64.powf(raw.log10().floor());
    let fraction = raw / magnitude;
    let nice = if fraction <= 1.0 {
        1.0
    } else if fraction <= 2.0 {
        2.0
    } else if fraction <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo, 6.0);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + step * 1e-9 {
        out.push(if t.abs() < step * 1e-9 { 0.0 } else { t });
        t += step;
    }
    out
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if hi - lo <= f64::EPSILON * lo.abs().max(hi.abs()).max(1.0) {
        return (lo - 1.0, hi + 1.0);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    let s = format!("{:.4}", v);
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".to_string()
    } else {
        s.to_string()
    }
}

fn describe(line: &TrendLine) -> String {
    format!(
        "y = {:.4} {} {:.4}x",
        line.intercept,
        if line.slope < 0.0 { "-" } else { "+" },
        line.slope.abs()
    )
}

pub fn render_svg_string(dataset: &ScatterDataset) -> Result<String> {
    if dataset.points.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let (xmin, xmax) = dataset
        .points
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), (x, _)| {
            (lo.min(*x), hi.max(*x))
        });
    let (x0, x1) = padded(xmin, xmax);

    let mut lines: Vec<(TrendLine, &str)> = Vec::new();
    match dataset.theoretical_line {
        Some(t)
            if close(t.slope, dataset.empirical_line.slope)
                && close(t.intercept, dataset.empirical_line.intercept) =>
        {
            lines.push((dataset.empirical_line, "theoretical = empirical"));
        }
        Some(t) => {
            lines.push((t, "theoretical"));
            lines.push((dataset.empirical_line, "empirical"));
        }
        None => lines.push((dataset.empirical_line, "empirical")),
    }

    let mut ylo = f64::INFINITY;
    let mut yhi = f64::NEG_INFINITY;
    for (_, y) in &dataset.points {
        ylo = ylo.min(*y);
        yhi = yhi.max(*y);
    }
    for (line, _) in &lines {
        for x in [x0, x1] {
            ylo = ylo.min(line.at(x));
            yhi = yhi.max(line.at(x));
        }
    }
    let (y0, y1) = padded(ylo, yhi);

    let plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT;
    let plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM;
    let sx = |x: f64| MARGIN_LEFT + (x - x0) / (x1 - x0) * plot_w;
    let sy = |y: f64| MARGIN_TOP + (y1 - y) / (y1 - y0) * plot_h;

    let title = match dataset.mode {
        ScatterMode::Autocorrelation => "Normalized Moran scatterplot (autocorrelation)",
        ScatterMode::Autoregression => "Normalized scatterplot (spatial autoregression)",
    };

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        s,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        s,
        r#"<text class="title" x="{}" y="28" text-anchor="middle" font-size="16">{title}</text>"#,
        WIDTH / 2.0
    );

    let _ = writeln!(s, r#"<g class="axes" stroke="black" stroke-width="1">"#);
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{MARGIN_LEFT}" y1="{}" x2="{}" y2="{}"/>"#,
        MARGIN_TOP + plot_h,
        MARGIN_LEFT + plot_w,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(
        s,
        r#"<line class="axis" x1="{MARGIN_LEFT}" y1="{MARGIN_TOP}" x2="{MARGIN_LEFT}" y2="{}"/>"#,
        MARGIN_TOP + plot_h
    );
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="ticks">"#);
    for t in ticks(x0, x1) {
        let px = sx(t);
        let base = MARGIN_TOP + plot_h;
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{px:.2}" y1="{base}" x2="{px:.2}" y2="{}" stroke="black"/>"#,
            base + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text class="tick-label" x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            base + 20.0,
            tick_label(t)
        );
    }
    for t in ticks(y0, y1) {
        let py = sy(t);
        let _ = writeln!(
            s,
            r#"<line class="tick" x1="{}" y1="{py:.2}" x2="{MARGIN_LEFT}" y2="{py:.2}" stroke="black"/>"#,
            MARGIN_LEFT - 5.0
        );
        let _ = writeln!(
            s,
            r#"<text class="tick-label" x="{}" y="{:.2}" text-anchor="end">{}</text>"#,
            MARGIN_LEFT - 8.0,
            py + 4.0,
            tick_label(t)
        );
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_LEFT + plot_w / 2.0,
        HEIGHT - 20.0,
        dataset.x_label()
    );
    let _ = writeln!(
        s,
        r#"<text class="axis-label" x="20" y="{}" text-anchor="middle" transform="rotate(-90 20 {})">{}</text>"#,
        MARGIN_TOP + plot_h / 2.0,
        MARGIN_TOP + plot_h / 2.0,
        dataset.y_label()
    );

    let colors = ["#c0392b", "#2c7fb8"];
    let _ = writeln!(s, r#"<g class="trend-lines" stroke-width="2">"#);
    for (k, (line, label)) in lines.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<line class="trend" data-label="{label}" data-slope="{}" data-intercept="{}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{}"{}/>"#,
            line.slope,
            line.intercept,
            sx(x0),
            sy(line.at(x0)),
            sx(x1),
            sy(line.at(x1)),
            colors[k % 2],
            if *label == "theoretical" {
                r#" stroke-dasharray="6 4""#
            } else {
                ""
            }
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(
        s,
        r##"<g class="points" fill="#333333" fill-opacity="0.8">"##
    );
    for (x, y) in &dataset.points {
        let _ = writeln!(
            s,
            r#"<circle class="point" cx="{:.2}" cy="{:.2}" r="4"/>"#,
            sx(*x),
            sy(*y)
        );
    }
    let _ = writeln!(s, "</g>");

    let _ = writeln!(s, r#"<g class="legend">"#);
    for (k, (line, label)) in lines.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text class="legend-entry" x="{}" y="{}" fill="{}">{label}: {}</text>"#,
            MARGIN_LEFT + 12.0,
            MARGIN_TOP + 16.0 + 16.0 * k as f64,
            colors[k % 2],
            describe(line)
        );
    }
    let _ = writeln!(s, "</g>");
    s.push_str("</svg>\n");
    Ok(s)
}

pub fn render_svg(dataset: &ScatterDataset, path: &Path) -> Result<()> {
    let svg = render_svg_string(dataset)?;
    fs::write(path, svg).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}
