//! Minimal static SVG charts: scatter, grouped bars, lines. Coordinates
//! are printed with two decimals so output is byte-stable.

use std::fmt::Write as _;

const W: f64 = 640.0;
const H: f64 = 420.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 60.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn fit(values: impl Iterator<Item = f64>) -> Axis {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for v in values.filter(|v| v.is_finite()) {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if !lo.is_finite() {
            return Axis { lo: 0.0, hi: 1.0 };
        }
        if hi - lo < 1e-12 {
            let pad = 0.5 * (1.0 + lo.abs());
            return Axis { lo: lo - pad, hi: hi + pad };
        }
        let pad = 0.05 * (hi - lo);
        Axis { lo: lo - pad, hi: hi + pad }
    }

    fn map(&self, v: f64, a: f64, b: f64) -> f64 {
        a + (v - self.lo) / (self.hi - self.lo) * (b - a)
    }
}

fn frame(out: &mut String, title: &str, xlabel: &str, ylabel: &str, x: &Axis, y: &Axis, x_ticks: bool) {
    let _ = write!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{W}\" height=\"{H}\" fill=\"white\"/>\n\
         <text x=\"{:.2}\" y=\"24\" text-anchor=\"middle\" font-size=\"15\">{}</text>\n",
        W / 2.0,
        escape(title)
    );
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let _ = writeln!(
        out,
        "<path d=\"M{x0:.2} {y1:.2} L{x0:.2} {y0:.2} L{x1:.2} {y0:.2}\" stroke=\"black\" fill=\"none\"/>"
    );
    for i in 0..=4 {
        let t = i as f64 / 4.0;
        let xv = x.lo + t * (x.hi - x.lo);
        let yv = y.lo + t * (y.hi - y.lo);
        let px = x.map(xv, x0, x1);
        let py = y.map(yv, y0, y1);
        if x_ticks {
            let _ =
                writeln!(out, "<text x=\"{px:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>", y0 + 18.0, tick(xv));
        }
        let _ =
            writeln!(out, "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>", x0 - 6.0, py + 4.0, tick(yv));
    }
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
        (x0 + x1) / 2.0,
        H - 16.0,
        escape(xlabel)
    );
    let _ = writeln!(
        out,
        "<text transform=\"translate(16 {:.2}) rotate(-90)\" text-anchor=\"middle\">{}</text>",
        (y0 + y1) / 2.0,
        escape(ylabel)
    );
}

fn tick(v: f64) -> String {
    if v != 0.0 && (v.abs() < 1e-2 || v.abs() >= 1e4) {
        format!("{v:.1e}")
    } else {
        format!("{v:.3}")
    }
}

fn legend(out: &mut String, names: &[&str]) {
    for (i, name) in names.iter().enumerate() {
        let y = TOP + 8.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/><text x=\"{:.2}\" y=\"{:.2}\">{}</text>",
            y - 9.0,
            PALETTE[i % PALETTE.len()],
            x + 14.0,
            y,
            escape(name)
        );
    }
}

/// Scatter of `(x, y)` pairs; `diagonal` adds the `y = x` reference line.
pub fn scatter(points: &[(f64, f64)], title: &str, xlabel: &str, ylabel: &str, diagonal: bool) -> String {
    let all = points.iter().flat_map(|&(a, b)| [a, b]);
    let (xa, ya) = if diagonal {
        (Axis::fit(all.clone()), Axis::fit(all))
    } else {
        (Axis::fit(points.iter().map(|p| p.0)), Axis::fit(points.iter().map(|p| p.1)))
    };
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, &xa, &ya, true);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    if diagonal {
        let lo = xa.lo.max(ya.lo);
        let hi = xa.hi.min(ya.hi);
        let _ = writeln!(
            out,
            "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>",
            xa.map(lo, x0, x1),
            ya.map(lo, y0, y1),
            xa.map(hi, x0, x1),
            ya.map(hi, y0, y1)
        );
    }
    for &(a, b) in points.iter().filter(|p| p.0.is_finite() && p.1.is_finite()) {
        let _ = writeln!(
            out,
            "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3\" fill=\"{}\" fill-opacity=\"0.7\"/>",
            xa.map(a, x0, x1),
            ya.map(b, y0, y1),
            PALETTE[0]
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Grouped bars: one group per label, one bar per series.
pub fn bars(labels: &[String], series: &[(&str, Vec<f64>)], title: &str, ylabel: &str) -> String {
    let ya = Axis::fit(series.iter().flat_map(|s| s.1.iter().copied()).chain([0.0]));
    let xa = Axis { lo: 0.0, hi: 1.0 };
    let mut out = String::new();
    frame(&mut out, title, "", ylabel, &xa, &ya, false);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    let groups = labels.len().max(1) as f64;
    let gw = (x1 - x0) / groups;
    let bw = 0.8 * gw / series.len().max(1) as f64;
    let zero = ya.map(0.0, y0, y1);
    for (g, label) in labels.iter().enumerate() {
        let gx = x0 + gw * g as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{}</text>",
            gx + gw / 2.0,
            y0 + 18.0,
            escape(label)
        );
        for (s, (_, values)) in series.iter().enumerate() {
            let v = values.get(g).copied().unwrap_or(0.0);
            let top = ya.map(v, y0, y1);
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{bw:.2}\" height=\"{:.2}\" fill=\"{}\"/>",
                gx + 0.1 * gw + bw * s as f64,
                top.min(zero),
                (top - zero).abs(),
                PALETTE[s % PALETTE.len()]
            );
        }
    }
    if series.len() > 1 {
        legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    }
    out.push_str("</svg>\n");
    out
}

/// Polylines, one per named series.
pub fn lines(series: &[(&str, Vec<(f64, f64)>)], title: &str, xlabel: &str, ylabel: &str) -> String {
    let xa = Axis::fit(series.iter().flat_map(|s| s.1.iter().map(|p| p.0)));
    let ya = Axis::fit(series.iter().flat_map(|s| s.1.iter().map(|p| p.1)));
    let mut out = String::new();
    frame(&mut out, title, xlabel, ylabel, &xa, &ya, true);
    let (x0, x1, y0, y1) = (LEFT, W - RIGHT, H - BOTTOM, TOP);
    for (i, (_, pts)) in series.iter().enumerate() {
        let mut d = String::new();
        for (j, &(a, b)) in pts.iter().enumerate() {
            let _ = write!(d, "{}{:.2} {:.2} ", if j == 0 { "M" } else { "L" }, xa.map(a, x0, x1), ya.map(b, y0, y1));
        }
        let _ = writeln!(
            out,
            "<path d=\"{}\" stroke=\"{}\" stroke-width=\"2\" fill=\"none\"/>",
            d.trim_end(),
            PALETTE[i % PALETTE.len()]
        );
    }
    if series.len() > 1 {
        legend(&mut out, &series.iter().map(|s| s.0).collect::<Vec<_>>());
    }
    out.push_str("</svg>\n");
    out
}
