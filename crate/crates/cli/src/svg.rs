//! Static SVG plots written by hand so the bytes depend only on the data.
//!
//! Coordinates are printed with two decimals and numbers in labels with at
//! most four significant digits; nothing else (no timestamps, no ids)
//! varies between runs.

use std::fmt::Write as _;

use plstat_core::inference::histogram;
use plstat_core::{Barcode, PersistenceLandscape};

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Short decimal label: up to four significant digits, no trailing zeros.
pub fn label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    if !x.is_finite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let magnitude = x.abs().log10().floor() as i32;
    if !(-3..6).contains(&magnitude) {
        return format!("{x:.3e}");
    }
    let decimals = (3 - magnitude).max(0) as usize;
    let s = format!("{x:.decimals$}");
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.').to_string() } else { s };
    if s == "-0" {
        "0".into()
    } else {
        s
    }
}

/// Roughly five round tick values covering `[lo, hi]`.
pub fn ticks(lo: f64, hi: f64) -> Vec<f64> {
    let span = hi - lo;
    if !(span > 0.0) || !span.is_finite() {
        return vec![lo];
    }
    let raw = span / 5.0;
    let base = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * base)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * base);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

struct Frame {
    x: (f64, f64),
    y: (f64, f64),
}

impl Frame {
    fn new(x: (f64, f64), y: (f64, f64)) -> Self {
        let widen = |(lo, hi): (f64, f64)| if hi > lo { (lo, hi) } else { (lo - 0.5, lo + 0.5) };
        Self { x: widen(x), y: widen(y) }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x.0) / (self.x.1 - self.x.0) * (WIDTH - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y.0) / (self.y.1 - self.y.0) * (HEIGHT - TOP - BOTTOM)
    }
}

/// Opening tags, frame, axes, ticks and labels.
fn open(out: &mut String, frame: &Frame, title: &str, xlabel: &str, ylabel: &str, y_ticks: bool) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(out, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
    let (x0, x1) = (frame.px(frame.x.0), frame.px(frame.x.1));
    let (y0, y1) = (frame.py(frame.y.0), frame.py(frame.y.1));
    let _ = writeln!(
        out,
        r#"<path class="axes" d="M{x0:.2},{y1:.2} L{x0:.2},{y0:.2} L{x1:.2},{y0:.2}" fill="none" stroke="black"/>"#
    );
    for t in ticks(frame.x.0, frame.x.1) {
        let x = frame.px(t);
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y0:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/><text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 19.0,
            label(t)
        );
    }
    if y_ticks {
        for t in ticks(frame.y.0, frame.y.1) {
            let y = frame.py(t);
            let _ = writeln!(
                out,
                r#"<line x1="{:.2}" y1="{y:.2}" x2="{x0:.2}" y2="{y:.2}" stroke="black"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#,
                x0 - 5.0,
                x0 - 8.0,
                y + 4.0,
                label(t)
            );
        }
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
        (x0 + x1) / 2.0,
        HEIGHT - 14.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn close(out: &mut String) {
    out.push_str("</svg>\n");
}

fn note(out: &mut String, text: &str) {
    let _ = writeln!(
        out,
        r##"<text class="note" x="{:.2}" y="{:.2}" text-anchor="middle" fill="#555">{}</text>"##,
        WIDTH / 2.0,
        HEIGHT / 2.0,
        escape(text)
    );
}

fn legend(out: &mut String, entries: &[(String, &str)]) {
    for (i, (text, color)) in entries.iter().enumerate() {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let x = WIDTH - RIGHT - 110.0;
        let _ = writeln!(
            out,
            r#"<line x1="{x:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}">{}</text>"#,
            x + 18.0,
            x + 24.0,
            y + 4.0,
            escape(text)
        );
    }
}

/// One horizontal bar per interval, grouped by degree. Infinite bars run to
/// the right edge and end in an arrow.
pub fn plot_barcode(barcode: &Barcode, title: &str) -> String {
    let mut out = String::new();
    let intervals = &barcode.intervals;
    let right = intervals
        .iter()
        .map(|i| if i.is_finite() { i.death } else { i.birth })
        .fold(0.0f64, f64::max);
    let has_infinite = intervals.iter().any(|i| !i.is_finite());
    let x_max = if right <= 0.0 {
        1.0
    } else if has_infinite {
        // room for the arrows
        right * 1.1
    } else {
        right
    };
    let x_min = intervals.iter().map(|i| i.birth).fold(0.0f64, f64::min);
    let rows = intervals.len().max(1) as f64;
    let frame = Frame::new((x_min, x_max), (0.0, rows + 1.0));
    open(&mut out, &frame, title, "filtration value", "intervals", false);
    if intervals.is_empty() {
        note(&mut out, "no intervals");
        close(&mut out);
        return out;
    }
    let mut degrees: Vec<usize> = intervals.iter().map(|i| i.degree).collect();
    degrees.dedup();
    let stroke = ((HEIGHT - TOP - BOTTOM) / (rows + 1.0) * 0.6).clamp(0.5, 6.0);
    for (row, i) in intervals.iter().enumerate() {
        let color = PALETTE[i.degree % PALETTE.len()];
        let y = frame.py(rows - row as f64);
        let x0 = frame.px(i.birth);
        let x1 = frame.px(if i.is_finite() { i.death } else { x_max });
        let _ = writeln!(
            out,
            r#"<line class="bar" data-degree="{}" data-birth="{}" data-death="{}" x1="{x0:.2}" y1="{y:.2}" x2="{x1:.2}" y2="{y:.2}" stroke="{color}" stroke-width="{stroke:.2}"/>"#,
            i.degree,
            plstat_core::data::format_f64(i.birth),
            plstat_core::data::format_f64(i.death),
        );
        if !i.is_finite() {
            let _ = writeln!(
                out,
                r#"<path d="M{:.2},{:.2} L{x1:.2},{y:.2} L{:.2},{:.2} Z" fill="{color}"/>"#,
                x1 - 7.0,
                y - 4.0,
                x1 - 7.0,
                y + 4.0
            );
        }
    }
    let entries: Vec<(String, &str)> = degrees
        .iter()
        .map(|&d| (format!("degree {d}"), PALETTE[d % PALETTE.len()]))
        .collect();
    legend(&mut out, &entries);
    close(&mut out);
    out
}

/// Levels `1..=max_levels` of a landscape as polylines.
pub fn plot_landscape(l: &PersistenceLandscape, title: &str, max_levels: usize) -> String {
    let mut out = String::new();
    let levels = &l.levels[..l.levels.len().min(max_levels)];
    let xs = levels.iter().flat_map(|f| f.points().iter().map(|p| p.0));
    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for x in xs {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
    }
    if !x_min.is_finite() {
        (x_min, x_max) = (0.0, 1.0);
    }
    let y_max = levels
        .iter()
        .flat_map(|f| f.points().iter().map(|p| p.1))
        .fold(0.0f64, f64::max);
    let frame = Frame::new((x_min, x_max), (0.0, if y_max > 0.0 { y_max * 1.05 } else { 1.0 }));
    open(&mut out, &frame, title, "t", "lambda_k(t)", true);
    if levels.is_empty() {
        note(&mut out, "empty landscape");
    }
    for (k, f) in levels.iter().enumerate().rev() {
        let color = PALETTE[k % PALETTE.len()];
        let mut d = String::new();
        for (j, &(x, y)) in f.points().iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, frame.px(x), frame.py(y));
        }
        let _ = writeln!(
            out,
            r#"<path class="level" data-k="{}" d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            k + 1
        );
    }
    let shown = levels.len().min(PALETTE.len());
    let entries: Vec<(String, &str)> = (0..shown).map(|k| (format!("lambda_{}", k + 1), PALETTE[k])).collect();
    legend(&mut out, &entries);
    if l.levels.len() > levels.len() {
        let _ = writeln!(
            out,
            r##"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="#555">{} of {} levels shown</text>"##,
            WIDTH - RIGHT,
            HEIGHT - 14.0,
            levels.len(),
            l.levels.len()
        );
    }
    close(&mut out);
    out
}

/// Residual variance against embedding dimension.
pub fn plot_scree(rows: &[(usize, f64)], title: &str) -> String {
    let mut out = String::new();
    let x_max = rows.iter().map(|r| r.0).max().unwrap_or(1) as f64;
    let y_max = rows.iter().map(|r| r.1).fold(0.0f64, f64::max);
    let frame = Frame::new((0.0, x_max + 1.0), (0.0, if y_max > 0.0 { y_max * 1.05 } else { 1.0 }));
    open(&mut out, &frame, title, "dimension", "residual variance", true);
    if rows.is_empty() {
        note(&mut out, "no data");
    } else {
        let mut d = String::new();
        for (j, &(x, y)) in rows.iter().enumerate() {
            let _ = write!(d, "{}{:.2},{:.2}", if j == 0 { "M" } else { " L" }, frame.px(x as f64), frame.py(y));
        }
        let _ = writeln!(out, r#"<path d="{d}" fill="none" stroke="{}" stroke-width="1.5"/>"#, PALETTE[0]);
        for &(x, y) in rows {
            let _ = writeln!(
                out,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{}"/>"#,
                frame.px(x as f64),
                frame.py(y),
                PALETTE[0]
            );
        }
    }
    close(&mut out);
    out
}

/// Histogram of a null distribution with the observed statistic marked.
pub fn plot_null_histogram(null: &[f64], observed: f64, bins: usize, title: &str) -> String {
    let mut out = String::new();
    let hist = histogram(null, bins);
    let x_min = hist.first().map_or(0.0, |h| h.0);
    let mut x_max = hist.last().map_or(1.0, |h| h.1);
    if observed.is_finite() && observed > x_max {
        x_max = observed;
    }
    let c_max = hist.iter().map(|h| h.2).max().unwrap_or(0).max(1) as f64;
    let frame = Frame::new((x_min, x_max), (0.0, c_max * 1.05));
    open(&mut out, &frame, title, "statistic", "count", true);
    if null.is_empty() {
        note(&mut out, "empty null distribution");
    }
    for &(lo, hi, c) in &hist {
        let (x0, x1) = (frame.px(lo), frame.px(hi));
        let (y0, y1) = (frame.py(0.0), frame.py(c as f64));
        let _ = writeln!(
            out,
            r#"<rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}" fill="{}" stroke="white"/>"#,
            (x1 - x0).max(0.0),
            (y0 - y1).max(0.0),
            PALETTE[0]
        );
    }
    let x = frame.px(if observed.is_finite() { observed } else { x_max });
    let _ = writeln!(
        out,
        r#"<line class="observed" x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="{}" stroke-width="2" stroke-dasharray="6,3"/>"#,
        frame.py(0.0),
        frame.py(frame.y.1),
        PALETTE[1]
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="end" fill="{}">observed {}</text>"#,
        x - 4.0,
        TOP + 12.0,
        PALETTE[1],
        label(observed)
    );
    close(&mut out);
    out
}
