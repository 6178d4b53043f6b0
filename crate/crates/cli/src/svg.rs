//! Vector rendering of a tessellation, segments colored by birth time.

use std::fmt::Write;

use celldiv::engine::TimedSegment;
use celldiv::geometry::Polygon;

const CANVAS: f64 = 800.0;
const MARGIN: f64 = 20.0;

/// Linear ramp from dark blue (early) to orange-red (late).
fn color(frac: f64) -> String {
    let f = frac.clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(20.0, 230.0), lerp(40.0, 90.0), lerp(140.0, 30.0))
}

pub fn render(window: &Polygon, segments: &[TimedSegment], time: f64) -> String {
    let (lo, hi) = window.bounding_box();
    let span = (hi.x - lo.x).max(hi.y - lo.y);
    let k = (CANVAS - 2.0 * MARGIN) / span;
    let w = (hi.x - lo.x) * k + 2.0 * MARGIN;
    let h = (hi.y - lo.y) * k + 2.0 * MARGIN;
    // y grows downward in SVG.
    let tx = |x: f64| MARGIN + (x - lo.x) * k;
    let ty = |y: f64| MARGIN + (hi.y - y) * k;

    let mut out = String::new();
    writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.3}" height="{h:.3}" viewBox="0 0 {w:.3} {h:.3}">"#
    )
    .unwrap();
    let pts: Vec<String> = window
        .vertices()
        .iter()
        .map(|p| format!("{:.3},{:.3}", tx(p.x), ty(p.y)))
        .collect();
    writeln!(
        out,
        r#"<polygon points="{}" fill="white" stroke="black" stroke-width="1.5"/>"#,
        pts.join(" ")
    )
    .unwrap();
    for s in segments {
        let frac = if time > 0.0 { s.birth_time / time } else { 0.0 };
        let (p, q) = (s.segment.p, s.segment.q);
        writeln!(
            out,
            r#"<line x1="{:.3}" y1="{:.3}" x2="{:.3}" y2="{:.3}" stroke="{}" stroke-width="1"><title>{:.17e}</title></line>"#,
            tx(p.x),
            ty(p.y),
            tx(q.x),
            ty(q.y),
            color(frac),
            s.birth_time
        )
        .unwrap();
    }
    out.push_str("</svg>\n");
    out
}
