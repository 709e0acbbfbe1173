//! Self-contained SVG charts.
//!
//! Heatmaps use a linear colour map: each channel is interpolated linearly
//! from white `#ffffff` at the smallest finite value to `#08306b` at the
//! largest. Non-finite cells are drawn grey.

use std::fmt::Write;

const LOW: [f64; 3] = [255.0, 255.0, 255.0];
const HIGH: [f64; 3] = [8.0, 48.0, 107.0];
const CELL: f64 = 36.0;
const MARGIN: f64 = 70.0;

pub fn colour(t: f64) -> String {
    if !t.is_finite() {
        return "#bbbbbb".into();
    }
    let t = t.clamp(0.0, 1.0);
    let c: Vec<u8> = (0..3).map(|k| (LOW[k] + t * (HIGH[k] - LOW[k])).round() as u8).collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.filter(|v| v.is_finite()).fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

/// `values[row][col]`, rows drawn top to bottom.
pub fn heatmap(title: &str, x_label: &str, y_label: &str, rows: &[String], cols: &[String], values: &[Vec<f64>]) -> String {
    let (lo, hi) = range(values.iter().flatten().copied());
    let span = if hi > lo { hi - lo } else { 1.0 };
    let width = MARGIN + CELL * cols.len() as f64 + 20.0;
    let height = MARGIN + CELL * rows.len() as f64 + 50.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    for (i, row) in values.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            let t = (v - lo) / span;
            let (x, y) = (MARGIN + CELL * j as f64, 40.0 + CELL * i as f64);
            let _ = writeln!(
                s,
                r#"<rect x="{x}" y="{y}" width="{CELL}" height="{CELL}" fill="{}"><title>{}</title></rect>"#,
                colour(t),
                v
            );
            let ink = if t > 0.5 { "#ffffff" } else { "#000000" };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle" fill="{ink}" font-size="8">{}</text>"#,
                x + CELL / 2.0,
                y + CELL / 2.0 + 3.0,
                short(v)
            );
        }
    }
    for (i, r) in rows.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#,
            MARGIN - 4.0,
            40.0 + CELL * i as f64 + CELL / 2.0 + 3.0,
            escape(r)
        );
    }
    let bottom = 40.0 + CELL * rows.len() as f64;
    for (j, c) in cols.iter().enumerate() {
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            MARGIN + CELL * j as f64 + CELL / 2.0,
            bottom + 12.0,
            escape(c)
        );
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN + CELL * cols.len() as f64 / 2.0,
        bottom + 30.0,
        escape(x_label)
    );
    let _ = writeln!(
        s,
        r#"<text x="14" y="{}" text-anchor="middle" transform="rotate(-90 14 {})">{}</text>"#,
        40.0 + CELL * rows.len() as f64 / 2.0,
        40.0 + CELL * rows.len() as f64 / 2.0,
        escape(y_label)
    );
    s.push_str("</svg>\n");
    s
}

/// Vertical bars; missing values leave a gap.
pub fn bar_chart(title: &str, y_label: &str, labels: &[String], values: &[Option<f64>]) -> String {
    let (lo, hi) = range(values.iter().flatten().copied());
    let top = if hi.is_finite() { hi.max(0.0) } else { 1.0 };
    let top = if top > 0.0 { top } else { 1.0 };
    let base = if lo.is_finite() { lo.min(0.0) } else { 0.0 };
    let plot_h = 200.0;
    let bar = 24.0;
    let width = MARGIN + bar * labels.len() as f64 + 20.0;
    let height = plot_h + 130.0;
    let y_of = |v: f64| 40.0 + plot_h * (top - v) / (top - base);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="20" font-size="13" text-anchor="middle">{}</text>"#, width / 2.0, escape(title));
    let _ = writeln!(
        s,
        r##"<line x1="{MARGIN}" y1="{0}" x2="{1}" y2="{0}" stroke="#000000"/>"##,
        y_of(0.0),
        width - 20.0
    );
    for (k, (label, v)) in labels.iter().zip(values).enumerate() {
        let x = MARGIN + bar * k as f64;
        if let Some(v) = v {
            let (y0, y1) = (y_of(v.max(0.0)), y_of(v.min(0.0)));
            let _ = writeln!(
                s,
                r##"<rect x="{}" y="{y0}" width="{}" height="{}" fill="#2171b5"><title>{}</title></rect>"##,
                x + 2.0,
                bar - 4.0,
                y1 - y0,
                v
            );
        }
        let ly = 40.0 + plot_h + 8.0;
        let _ = writeln!(
            s,
            r#"<text x="{0}" y="{ly}" text-anchor="end" transform="rotate(-60 {0} {ly})">{1}</text>"#,
            x + bar / 2.0,
            escape(label)
        );
    }
    for v in [base, top] {
        let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, y_of(v) + 3.0, short(v));
    }
    let _ = writeln!(
        s,
        r#"<text x="14" y="{0}" text-anchor="middle" transform="rotate(-90 14 {0})">{1}</text>"#,
        40.0 + plot_h / 2.0,
        escape(y_label)
    );
    s.push_str("</svg>\n");
    s
}

fn short(v: f64) -> String {
    if !v.is_finite() {
        "-".into()
    } else if v.abs() >= 100.0 {
        format!("{v:.0}")
    } else if v.abs() >= 1.0 {
        format!("{v:.1}")
    } else {
        format!("{v:.2}")
    }
}
