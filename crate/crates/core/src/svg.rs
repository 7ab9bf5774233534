//! Time-space diagrams: the interval runs left to right, time runs downward.

use std::fmt::Write;

use crate::engine::Trace;
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct SvgOptions {
    pub width: u32,
    pub height: u32,
    /// Dashed vertical lines at `i / n`.
    pub gridlines: bool,
    pub event_markers: bool,
}

impl Default for SvgOptions {
    fn default() -> Self {
        Self {
            width: 600,
            height: 900,
            gridlines: true,
            event_markers: false,
        }
    }
}

const MARGIN: f64 = 30.0;

fn color(i: usize, n: usize) -> String {
    let hue = (360.0 * i as f64 / n.max(1) as f64).round() as u32;
    format!("hsl({hue},70%,42%)")
}

/// Renders one polyline per drone through its exact path breakpoints.
/// Drones are drawn in index order, so where paths coincide the rightmost
/// drone ends up on top.
pub fn render<T: Scalar>(trace: &Trace<T>, opts: &SvgOptions) -> String {
    let n = trace.n();
    let (w, h) = (opts.width as f64, opts.height as f64);
    let t0 = trace.initial.time.approx_f64();
    let span = (trace.end_time.approx_f64() - t0).max(f64::MIN_POSITIVE);
    let sx = |x: f64| MARGIN + x * (w - 2.0 * MARGIN);
    let sy = |t: f64| MARGIN + (t - t0) / span * (h - 2.0 * MARGIN);

    let mut out = String::new();
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
        opts.width, opts.height, opts.width, opts.height
    );
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(
        out,
        r#"<rect x="{:.3}" y="{:.3}" width="{:.3}" height="{:.3}" fill="none" stroke="black" stroke-width="1"/>"#,
        sx(0.0),
        sy(t0),
        sx(1.0) - sx(0.0),
        sy(t0 + span) - sy(t0)
    );
    if opts.gridlines {
        for i in 1..n {
            let x = sx(i as f64 / n as f64);
            let _ = writeln!(
                out,
                r##"<line x1="{x:.3}" y1="{:.3}" x2="{x:.3}" y2="{:.3}" stroke="#999" stroke-width="0.5" stroke-dasharray="4 3"/>"##,
                sy(t0),
                sy(t0 + span)
            );
        }
    }
    for t in 0..=span.floor() as i64 {
        let y = sy(t0 + t as f64);
        let _ = writeln!(
            out,
            r#"<text x="{:.3}" y="{y:.3}" font-size="10" text-anchor="end" dominant-baseline="middle">{}</text>"#,
            MARGIN - 4.0,
            t0 + t as f64
        );
    }
    for (k, path) in trace.paths.iter().enumerate() {
        let mut pts = String::new();
        for bp in path {
            if !pts.is_empty() {
                pts.push(' ');
            }
            let _ = write!(pts, "{:.3},{:.3}", sx(bp.pos.approx_f64()), sy(bp.time.approx_f64()));
        }
        let _ = writeln!(
            out,
            r#"<polyline data-drone="{}" points="{pts}" fill="none" stroke="{}" stroke-width="1.5"/>"#,
            k + 1,
            color(k, n)
        );
    }
    if opts.event_markers {
        for ev in &trace.events {
            let y = sy(ev.time.approx_f64());
            let x = sx(ev.after[0].pos.approx_f64());
            let _ = writeln!(
                out,
                r#"<circle cx="{x:.3}" cy="{y:.3}" r="2" fill="black"><title>{} {:?} t={}</title></circle>"#,
                ev.kind.as_str(),
                ev.drones,
                ev.time
            );
        }
    }
    out.push_str("</svg>\n");
    out
}
