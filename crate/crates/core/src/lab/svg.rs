//! Minimal hand-written SVG: a density histogram with a Gaussian overlay and
//! a log-log scatter with its fitted line.

use crate::statkit::normal_pdf;
use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn open(out: &mut String, title: &str, xlabel: &str, ylabel: &str) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" \
         font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{:.1}\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">{}</text>\n\
         <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"16\" y=\"{:.1}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.1})\">{}</text>\n",
        W / 2.0,
        escape(title),
        (LEFT + W - RIGHT) / 2.0,
        H - 12.0,
        escape(xlabel),
        (TOP + H - BOTTOM) / 2.0,
        (TOP + H - BOTTOM) / 2.0,
        escape(ylabel),
    );
}

fn axes(out: &mut String, f: &Frame, xticks: &[(f64, String)], yticks: &[(f64, String)]) {
    let _ = writeln!(
        out,
        "<rect x=\"{LEFT}\" y=\"{TOP}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>",
        W - LEFT - RIGHT,
        H - TOP - BOTTOM
    );
    for (x, label) in xticks {
        let px = f.px(*x);
        let _ = writeln!(
            out,
            "<line x1=\"{px:.1}\" y1=\"{:.1}\" x2=\"{px:.1}\" y2=\"{:.1}\" stroke=\"black\"/>\
             <text x=\"{px:.1}\" y=\"{:.1}\" text-anchor=\"middle\">{label}</text>",
            H - BOTTOM,
            H - BOTTOM + 5.0,
            H - BOTTOM + 18.0
        );
    }
    for (y, label) in yticks {
        let py = f.py(*y);
        let _ = writeln!(
            out,
            "<line x1=\"{:.1}\" y1=\"{py:.1}\" x2=\"{LEFT}\" y2=\"{py:.1}\" stroke=\"black\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\">{label}</text>",
            LEFT - 5.0,
            LEFT - 8.0,
            py + 4.0
        );
    }
}

fn linear_ticks(a: f64, b: f64, count: usize) -> Vec<(f64, String)> {
    (0..=count)
        .map(|i| {
            let v = a + (b - a) * i as f64 / count as f64;
            (v, format!("{v:.3}"))
        })
        .collect()
}

/// Density bars from `edges`/`density`, with the `N(mean, variance)` curve on top.
pub fn histogram_svg(
    title: &str,
    xlabel: &str,
    edges: &[f64],
    density: &[f64],
    overlay: Option<(f64, f64)>,
) -> String {
    let x0 = edges[0];
    let x1 = *edges.last().unwrap();
    let mut ymax = density.iter().copied().fold(0.0f64, f64::max);
    if let Some((m, v)) = overlay {
        ymax = ymax.max(normal_pdf(m, m, v));
    }
    let f = Frame {
        x0,
        x1,
        y0: 0.0,
        y1: 1.1 * ymax.max(1e-300),
    };
    let mut out = String::new();
    open(&mut out, title, xlabel, "density");
    for (i, d) in density.iter().enumerate() {
        let (a, b) = (f.px(edges[i]), f.px(edges[i + 1]));
        let top = f.py(*d);
        let _ = writeln!(
            out,
            "<rect x=\"{a:.2}\" y=\"{top:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"#9ecae1\" stroke=\"#3182bd\" stroke-width=\"0.5\"/>",
            (b - a).max(0.0),
            (f.py(0.0) - top).max(0.0)
        );
    }
    if let Some((m, v)) = overlay {
        let pts: Vec<String> = (0..=200)
            .map(|i| {
                let x = x0 + (x1 - x0) * i as f64 / 200.0;
                format!("{:.2},{:.2}", f.px(x), f.py(normal_pdf(x, m, v)))
            })
            .collect();
        let _ = writeln!(
            out,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"#d62728\" stroke-width=\"2\"/>",
            pts.join(" ")
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" fill=\"#d62728\">N({m:.3}, {v:.4})</text>",
            W - RIGHT - 6.0,
            TOP + 16.0
        );
    }
    axes(&mut out, &f, &linear_ticks(x0, x1, 4), &linear_ticks(0.0, f.y1, 4));
    out.push_str("</svg>\n");
    out
}

/// Scatter of `(x, y)` on log-log axes with `log y = intercept + slope log x`.
pub fn loglog_svg(
    title: &str,
    xlabel: &str,
    ylabel: &str,
    xs: &[f64],
    ys: &[f64],
    fit: Option<(f64, f64)>,
) -> String {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let span = |v: &[f64]| -> (f64, f64) {
        let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let pad = 0.08 * (hi - lo).max(0.1);
        (lo - pad, hi + pad)
    };
    let (x0, x1) = span(&lx);
    let (y0, y1) = span(&ly);
    let f = Frame { x0, x1, y0, y1 };
    let mut out = String::new();
    open(&mut out, title, xlabel, ylabel);
    if let Some((slope, intercept)) = fit {
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"#d62728\" stroke-width=\"2\"/>\
             <text x=\"{:.1}\" y=\"{:.1}\" text-anchor=\"end\" fill=\"#d62728\">slope {slope:.4}</text>",
            f.px(x0),
            f.py(intercept + slope * x0),
            f.px(x1),
            f.py(intercept + slope * x1),
            W - RIGHT - 6.0,
            TOP + 16.0
        );
    }
    for (x, y) in lx.iter().zip(&ly) {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"4\" fill=\"#3182bd\"/>",
            f.px(*x),
            f.py(*y)
        );
    }
    let ticks = |a: f64, b: f64| -> Vec<(f64, String)> {
        (0..=4)
            .map(|i| {
                let v = a + (b - a) * i as f64 / 4.0;
                (v, format!("{:.3e}", v.exp()))
            })
            .collect()
    };
    axes(&mut out, &f, &ticks(x0, x1), &ticks(y0, y1));
    out.push_str("</svg>\n");
    out
}
