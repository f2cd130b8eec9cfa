//! Minimal SVG charts for `analyze --plot`.

use std::fmt::Write;

const W: f64 = 720.0;
const H: f64 = 360.0;
const MARGIN: f64 = 48.0;

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn frame(title: &str, body: &str, y_max: f64) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="10">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<line x1="{MARGIN}" y1="{}" x2="{}" y2="{}" stroke="black"/>"#,
        H - MARGIN,
        W - MARGIN / 2.0,
        H - MARGIN
    );
    let _ = writeln!(s, r#"<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{}" stroke="black"/>"#, H - MARGIN);
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{}</text>"#, MARGIN - 4.0, MARGIN + 4.0, fmt_tick(y_max));
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">0</text>"#, MARGIN - 4.0, H - MARGIN + 4.0);
    s.push_str(body);
    s.push_str("</svg>\n");
    s
}

fn fmt_tick(x: f64) -> String {
    if x.abs() >= 100.0 {
        format!("{x:.0}")
    } else {
        format!("{x:.3}")
    }
}

fn y_of(v: f64, y_max: f64) -> f64 {
    let plot_h = H - 2.0 * MARGIN;
    H - MARGIN - plot_h * (v / y_max).clamp(0.0, 1.0)
}

fn nice_max(values: impl Iterator<Item = f64>) -> f64 {
    let m = values.filter(|v| v.is_finite()).fold(0.0, f64::max);
    if m > 0.0 {
        m * 1.05
    } else {
        1.0
    }
}

/// Vertical bars, one per label.
pub fn bar_chart(title: &str, bars: &[(String, f64)]) -> String {
    let y_max = nice_max(bars.iter().map(|b| b.1));
    let slot = (W - 1.5 * MARGIN) / bars.len().max(1) as f64;
    let mut body = String::new();
    for (i, (label, v)) in bars.iter().enumerate() {
        let x = MARGIN + i as f64 * slot + slot * 0.1;
        let y = y_of(*v, y_max);
        let _ = writeln!(
            body,
            r##"<rect x="{x:.2}" y="{y:.2}" width="{:.2}" height="{:.2}" fill="#4a78b0"><title>{}: {}</title></rect>"##,
            slot * 0.8,
            H - MARGIN - y,
            escape(label),
            v
        );
        let lx = x + slot * 0.4;
        let ly = H - MARGIN + 10.0;
        let _ = writeln!(
            body,
            r#"<text x="{lx:.2}" y="{ly:.2}" text-anchor="end" transform="rotate(-45 {lx:.2} {ly:.2})">{}</text>"#,
            escape(label)
        );
    }
    frame(title, &body, y_max)
}

/// One column of points per group, with the group mean marked.
pub fn strip_chart(title: &str, groups: &[(String, Vec<f64>)]) -> String {
    let y_max = nice_max(groups.iter().flat_map(|g| g.1.iter().copied()));
    let slot = (W - 1.5 * MARGIN) / groups.len().max(1) as f64;
    let mut body = String::new();
    for (i, (label, values)) in groups.iter().enumerate() {
        let cx = MARGIN + (i as f64 + 0.5) * slot;
        for (j, v) in values.iter().enumerate() {
            // Deterministic horizontal jitter.
            let dx = ((j * 37) % 21) as f64 / 20.0 - 0.5;
            let _ = writeln!(
                body,
                r##"<circle cx="{:.2}" cy="{:.2}" r="2" fill="#4a78b0" fill-opacity="0.6"/>"##,
                cx + dx * slot * 0.5,
                y_of(*v, y_max)
            );
        }
        if !values.is_empty() {
            let m = values.iter().sum::<f64>() / values.len() as f64;
            let y = y_of(m, y_max);
            let _ = writeln!(
                body,
                r##"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#c0392b" stroke-width="2"/>"##,
                cx - slot * 0.35,
                cx + slot * 0.35
            );
        }
        let _ = writeln!(
            body,
            r#"<text x="{cx:.2}" y="{:.2}" text-anchor="middle">{} (n={})</text>"#,
            H - MARGIN + 14.0,
            escape(label),
            values.len()
        );
    }
    frame(title, &body, y_max)
}
