//! Minimal SVG emission: heatmaps, curves with envelopes, and p-value
//! histograms. Static figures only; no plotting dependency.

use ppstat_core::mctest::Envelope;
use ppstat_core::sumstats::SummaryFunction;
use ppstat_core::IntensitySurface;

const MARGIN: f64 = 45.0;

fn header(width: f64, height: f64, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width:.0}\" height=\"{height:.0}\" viewBox=\"0 0 {width:.0} {height:.0}\">\n\
         <rect width=\"{width:.0}\" height=\"{height:.0}\" fill=\"white\"/>\n\
         <text x=\"{:.0}\" y=\"20\" font-family=\"sans-serif\" font-size=\"14\" text-anchor=\"middle\">{title}</text>\n",
        width / 2.0
    )
}

/// Five-stop blue-to-yellow ramp.
fn heat_color(t: f64) -> String {
    let stops = [
        (68u8, 1u8, 84u8),
        (59, 82, 139),
        (33, 145, 140),
        (94, 201, 98),
        (253, 231, 37),
    ];
    let t = t.clamp(0.0, 1.0) * (stops.len() - 1) as f64;
    let i = (t.floor() as usize).min(stops.len() - 2);
    let f = t - i as f64;
    let mix = |a: u8, b: u8| (a as f64 + f * (b as f64 - a as f64)).round() as u8;
    let (r, g, b) = (
        mix(stops[i].0, stops[i + 1].0),
        mix(stops[i].1, stops[i + 1].1),
        mix(stops[i].2, stops[i + 1].2),
    );
    format!("rgb({r},{g},{b})")
}

pub fn heatmap(surface: &IntensitySurface, title: &str) -> String {
    let plot_w = 720.0;
    let plot_h = plot_w * surface.window().height() / surface.window().width();
    let width = plot_w + 2.0 * MARGIN;
    let height = plot_h + 2.0 * MARGIN;
    let mut out = header(width, height, title);
    let vmax = surface.max_value().max(1e-300);
    let cw = plot_w / surface.nx() as f64;
    let ch = plot_h / surface.ny() as f64;
    for iy in 0..surface.ny() {
        for ix in 0..surface.nx() {
            let v = surface.value(ix, iy) / vmax;
            let x = MARGIN + ix as f64 * cw;
            // SVG y grows downward.
            let y = MARGIN + plot_h - (iy + 1) as f64 * ch;
            out.push_str(&format!(
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\"/>\n",
                cw + 0.5,
                ch + 0.5,
                heat_color(v)
            ));
        }
    }
    out.push_str(&format!(
        "<rect x=\"{MARGIN}\" y=\"{MARGIN}\" width=\"{plot_w}\" height=\"{plot_h}\" fill=\"none\" stroke=\"black\"/>\n"
    ));
    out.push_str("</svg>\n");
    out
}

struct Frame {
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    xmin: f64,
    xmax: f64,
    ymin: f64,
    ymax: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        self.x0 + (v - self.xmin) / (self.xmax - self.xmin) * self.w
    }
    fn y(&self, v: f64) -> f64 {
        self.y0 + self.h - (v - self.ymin) / (self.ymax - self.ymin) * self.h
    }

    fn axes(&self) -> String {
        let mut s = format!(
            "<rect x=\"{:.1}\" y=\"{:.1}\" width=\"{:.1}\" height=\"{:.1}\" fill=\"none\" stroke=\"black\"/>\n",
            self.x0, self.y0, self.w, self.h
        );
        for i in 0..=4 {
            let fx = self.xmin + (self.xmax - self.xmin) * i as f64 / 4.0;
            let fy = self.ymin + (self.ymax - self.ymin) * i as f64 / 4.0;
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{fx:.3}</text>\n",
                self.x(fx),
                self.y0 + self.h + 14.0
            ));
            s.push_str(&format!(
                "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{fy:.3}</text>\n",
                self.x0 - 4.0,
                self.y(fy) + 3.0
            ));
        }
        s
    }
}

fn polyline(points: &[(f64, f64)], stroke: &str, dash: Option<&str>) -> String {
    if points.len() < 2 {
        return String::new();
    }
    let coords: Vec<String> = points
        .iter()
        .map(|(x, y)| format!("{x:.2},{y:.2}"))
        .collect();
    let dash = dash
        .map(|d| format!(" stroke-dasharray=\"{d}\""))
        .unwrap_or_default();
    format!(
        "<polyline points=\"{}\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"1.5\"{dash}/>\n",
        coords.join(" ")
    )
}

/// A statistic curve with its theoretical reference.
pub fn curve(sf: &SummaryFunction, title: &str) -> String {
    let width = 640.0;
    let height = 420.0;
    let mut ys: Vec<f64> = Vec::new();
    for i in 0..sf.len() {
        if sf.defined[i] {
            ys.push(sf.value[i]);
        }
        ys.push(sf.reference[i]);
    }
    let (ymin, ymax) = y_bounds(&ys);
    let frame = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: width - 2.0 * MARGIN,
        h: height - 2.0 * MARGIN,
        xmin: sf.r.values()[0],
        xmax: sf.r.max(),
        ymin,
        ymax,
    };
    let mut out = header(width, height, title);
    out.push_str(&frame.axes());
    out.push_str(&polyline(
        &collect_xy(sf.r.values(), &sf.reference, None, &frame),
        "gray",
        Some("4 3"),
    ));
    out.push_str(&polyline(
        &collect_xy(sf.r.values(), &sf.value, Some(&sf.defined), &frame),
        "black",
        None,
    ));
    out.push_str("</svg>\n");
    out
}

fn y_bounds(ys: &[f64]) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in ys {
        if v.is_finite() {
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = (hi - lo) * 0.05;
    (lo - pad, hi + pad)
}

fn collect_xy(
    rs: &[f64],
    vals: &[f64],
    defined: Option<&[bool]>,
    frame: &Frame,
) -> Vec<(f64, f64)> {
    rs.iter()
        .zip(vals)
        .enumerate()
        .filter(|(i, _)| defined.map(|d| d[*i]).unwrap_or(true))
        .map(|(_, (r, v))| (frame.x(*r), frame.y(*v)))
        .collect()
}

/// Observed curve inside its pointwise simulation band.
pub fn envelope(env: &Envelope, title: &str) -> String {
    let width = 640.0;
    let height = 420.0;
    let mut ys: Vec<f64> = Vec::new();
    for i in 0..env.r.len() {
        if env.defined[i] {
            ys.extend([env.lower[i], env.upper[i], env.observed[i]]);
        }
        ys.push(env.reference[i]);
    }
    let (ymin, ymax) = y_bounds(&ys);
    let frame = Frame {
        x0: MARGIN,
        y0: MARGIN,
        w: width - 2.0 * MARGIN,
        h: height - 2.0 * MARGIN,
        xmin: env.r.values()[0],
        xmax: env.r.max(),
        ymin,
        ymax,
    };
    let mut out = header(width, height, title);
    out.push_str(&frame.axes());

    // Band polygons over contiguous defined runs.
    let mut run: Vec<usize> = Vec::new();
    let flush = |run: &mut Vec<usize>, out: &mut String| {
        if run.len() >= 2 {
            let mut pts: Vec<String> = run
                .iter()
                .map(|&i| {
                    format!(
                        "{:.2},{:.2}",
                        frame.x(env.r.values()[i]),
                        frame.y(env.upper[i])
                    )
                })
                .collect();
            pts.extend(run.iter().rev().map(|&i| {
                format!(
                    "{:.2},{:.2}",
                    frame.x(env.r.values()[i]),
                    frame.y(env.lower[i])
                )
            }));
            out.push_str(&format!(
                "<polygon points=\"{}\" fill=\"lightsteelblue\" stroke=\"none\" opacity=\"0.8\"/>\n",
                pts.join(" ")
            ));
        }
        run.clear();
    };
    for i in 0..env.r.len() {
        if env.defined[i] {
            run.push(i);
        } else {
            flush(&mut run, &mut out);
        }
    }
    flush(&mut run, &mut out);

    out.push_str(&polyline(
        &collect_xy(env.r.values(), &env.reference, None, &frame),
        "gray",
        Some("4 3"),
    ));
    out.push_str(&polyline(
        &collect_xy(env.r.values(), &env.observed, Some(&env.defined), &frame),
        "black",
        None,
    ));
    out.push_str("</svg>\n");
    out
}

/// Two-panel p-value histogram: bins of width 0.05 on [0,1] and a zoomed
/// [0, 0.1] panel with bins of width 0.01.
pub fn p_value_histogram(p_values: &[f64], title: &str) -> String {
    let width = 900.0;
    let height = 400.0;
    let mut out = header(width, height, title);
    out.push_str(&histogram_panel(
        p_values, 0.0, 1.0, 20, MARGIN, MARGIN, 380.0, 300.0, "bin",
    ));
    out.push_str(&histogram_panel(
        p_values,
        0.0,
        0.1,
        10,
        width / 2.0 + MARGIN,
        MARGIN,
        380.0,
        300.0,
        "bin-zoom",
    ));
    out.push_str("</svg>\n");
    out
}

#[allow(clippy::too_many_arguments)]
fn histogram_panel(
    p_values: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
    x0: f64,
    y0: f64,
    w: f64,
    h: f64,
    class: &str,
) -> String {
    let mut counts = vec![0usize; bins];
    for &p in p_values {
        if p >= lo && p <= hi {
            let b = (((p - lo) / (hi - lo) * bins as f64) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let max_count = counts.iter().copied().max().unwrap_or(0).max(1);
    let bw = w / bins as f64;
    let mut s = format!(
        "<rect x=\"{x0:.1}\" y=\"{y0:.1}\" width=\"{w:.1}\" height=\"{h:.1}\" fill=\"none\" stroke=\"black\"/>\n"
    );
    for (b, &c) in counts.iter().enumerate() {
        let bh = h * c as f64 / max_count as f64;
        s.push_str(&format!(
            "<rect class=\"{class}\" x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" fill=\"steelblue\" stroke=\"black\" stroke-width=\"0.5\"/>\n",
            x0 + b as f64 * bw,
            y0 + h - bh,
            bw
        ));
    }
    for i in 0..=4 {
        let v = lo + (hi - lo) * i as f64 / 4.0;
        s.push_str(&format!(
            "<text x=\"{:.1}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{v}</text>\n",
            x0 + w * i as f64 / 4.0,
            y0 + h + 14.0
        ));
    }
    s
}
