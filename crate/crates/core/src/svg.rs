//! Minimal SVG scatter maps of stations by latitude and longitude.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN: f64 = 40.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    pub latitude: f64,
    pub longitude: f64,
    pub fill: String,
    pub label: String,
}

/// Distinct color per cluster id; ids past the palette get evenly spread hues.
pub fn cluster_color(id: usize) -> String {
    if let Some(c) = PALETTE.get(id) {
        return c.to_string();
    }
    // Golden-angle hue steps keep neighbors apart.
    let hue = (id as f64 * 137.507_764) % 360.0;
    let (r, g, b) = hsl_to_rgb(hue, 0.65, 0.5);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r, g, b) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    let to = |v: f64| ((v + m) * 255.0).round() as u8;
    (to(r), to(g), to(b))
}

/// Three-stop ramp (green, yellow, red) over `score / max_score`.
pub fn heat_color(score: u32, max_score: u32) -> String {
    let t = if max_score == 0 {
        0.0
    } else {
        (score as f64 / max_score as f64).clamp(0.0, 1.0)
    };
    let stops = [(0x1a, 0x98, 0x50), (0xfe, 0xe0, 0x8b), (0xd7, 0x30, 0x27)];
    let (a, b, f) = if t <= 0.5 {
        (stops[0], stops[1], t * 2.0)
    } else {
        (stops[1], stops[2], (t - 0.5) * 2.0)
    };
    let lerp = |x: u8, y: u8| (x as f64 + (y as f64 - x as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(a.0, b.0), lerp(a.1, b.1), lerp(a.2, b.2))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

pub fn scatter(points: &[Point], title: &str) -> String {
    let (mut lat_lo, mut lat_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut lon_lo, mut lon_hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for p in points {
        lat_lo = lat_lo.min(p.latitude);
        lat_hi = lat_hi.max(p.latitude);
        lon_lo = lon_lo.min(p.longitude);
        lon_hi = lon_hi.max(p.longitude);
    }
    let span = |lo: f64, hi: f64| if hi > lo { hi - lo } else { 1.0 };
    let x = |lon: f64| MARGIN + (lon - lon_lo) / span(lon_lo, lon_hi) * (WIDTH - 2.0 * MARGIN);
    let y = |lat: f64| HEIGHT - MARGIN - (lat - lat_lo) / span(lat_lo, lat_hi) * (HEIGHT - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(out, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        out,
        r#"<text x="{MARGIN}" y="24" font-family="sans-serif" font-size="14">{}</text>"#,
        escape(title)
    );
    for p in points {
        let _ = writeln!(
            out,
            r#"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{}" stroke="black" stroke-width="0.5"><title>{}</title></circle>"#,
            x(p.longitude),
            y(p.latitude),
            p.fill,
            escape(&p.label)
        );
    }
    out.push_str("</svg>\n");
    out
}
