//! Minimal SVG line charts for run reports. No dependencies; output is a
//! pure function of the data handed in.

use std::fmt::Write;

pub struct SeriesPlot<'a> {
    pub label: &'a str,
    pub color: &'a str,
    pub x: &'a [f64],
    pub y: &'a [f64],
}

const W: f64 = 720.0;
const H: f64 = 420.0;
const MARGIN: f64 = 55.0;

fn finite_min_max(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        (0.0, 1.0)
    } else if lo == hi {
        (lo - 0.5, hi + 0.5)
    } else {
        (lo, hi)
    }
}

/// Renders overlaid line series with axes and a legend.
pub fn line_chart(title: &str, series: &[SeriesPlot]) -> String {
    let (x_lo, x_hi) = finite_min_max(series.iter().flat_map(|s| s.x.iter().copied()));
    let (y_lo, y_hi) = finite_min_max(series.iter().flat_map(|s| s.y.iter().copied()));
    let sx = |x: f64| MARGIN + (x - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = |y: f64| H - MARGIN - (y - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        out,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="24" font-family="monospace" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        title
    );
    // axes
    let _ = write!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        b = H - MARGIN
    );
    for frac in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let xv = x_lo + frac * (x_hi - x_lo);
        let yv = y_lo + frac * (y_hi - y_lo);
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="10" text-anchor="middle">{:.3}</text>"#,
            sx(xv),
            H - MARGIN + 16.0,
            xv
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="10" text-anchor="end">{:.3e}</text>"#,
            MARGIN - 6.0,
            sy(yv) + 3.0,
            yv
        );
    }
    for (idx, s) in series.iter().enumerate() {
        let mut points = String::new();
        for (x, y) in s.x.iter().zip(s.y) {
            if x.is_finite() && y.is_finite() {
                let _ = write!(points, "{:.2},{:.2} ", sx(*x), sy(*y));
            }
        }
        let _ = write!(
            out,
            r#"<polyline fill="none" stroke="{}" stroke-width="1.5" points="{}"/>"#,
            s.color,
            points.trim_end()
        );
        let ly = 40.0 + 16.0 * idx as f64;
        let _ = write!(
            out,
            r#"<line x1="{x0}" y1="{ly}" x2="{x1}" y2="{ly}" stroke="{c}" stroke-width="2"/><text x="{xt}" y="{yt}" font-family="monospace" font-size="11">{l}</text>"#,
            x0 = W - 190.0,
            x1 = W - 165.0,
            c = s.color,
            xt = W - 158.0,
            yt = ly + 4.0,
            l = s.label
        );
    }
    out.push_str("</svg>");
    out
}

/// Line chart with symmetric error bars on a single series.
pub fn error_bar_chart(title: &str, x: &[f64], y: &[f64], se: &[f64]) -> String {
    let lows: Vec<f64> = y.iter().zip(se).map(|(v, e)| v - e).collect();
    let highs: Vec<f64> = y.iter().zip(se).map(|(v, e)| v + e).collect();
    let (x_lo, x_hi) = finite_min_max(x.iter().copied());
    let (y_lo, y_hi) = finite_min_max(lows.iter().chain(highs.iter()).copied());
    let sx = |xv: f64| MARGIN + (xv - x_lo) / (x_hi - x_lo) * (W - 2.0 * MARGIN);
    let sy = |yv: f64| H - MARGIN - (yv - y_lo) / (y_hi - y_lo) * (H - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = write!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">"#
    );
    let _ = write!(
        out,
        r#"<rect width="{W}" height="{H}" fill="white"/><text x="{}" y="24" font-family="monospace" font-size="15" text-anchor="middle">{}</text>"#,
        W / 2.0,
        title
    );
    let _ = write!(
        out,
        r#"<line x1="{m}" y1="{b}" x2="{r}" y2="{b}" stroke="black"/><line x1="{m}" y1="{t}" x2="{m}" y2="{b}" stroke="black"/>"#,
        m = MARGIN,
        r = W - MARGIN,
        t = MARGIN,
        b = H - MARGIN
    );
    let mut points = String::new();
    for k in 0..x.len() {
        let _ = write!(points, "{:.2},{:.2} ", sx(x[k]), sy(y[k]));
        let _ = write!(
            out,
            r#"<line x1="{cx}" y1="{lo}" x2="{cx}" y2="{hi}" stroke="steelblue"/>"#,
            cx = sx(x[k]),
            lo = sy(lows[k]),
            hi = sy(highs[k])
        );
    }
    let _ = write!(
        out,
        r#"<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{}"/>"#,
        points.trim_end()
    );
    for frac in [0.0, 0.5, 1.0] {
        let xv = x_lo + frac * (x_hi - x_lo);
        let yv = y_lo + frac * (y_hi - y_lo);
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="10" text-anchor="middle">{:.3}</text>"#,
            sx(xv),
            H - MARGIN + 16.0,
            xv
        );
        let _ = write!(
            out,
            r#"<text x="{}" y="{}" font-family="monospace" font-size="10" text-anchor="end">{:.3e}</text>"#,
            MARGIN - 6.0,
            sy(yv) + 3.0,
            yv
        );
    }
    out.push_str("</svg>");
    out
}
