//! Minimal self-contained SVG charts for study output: log-log rate plots
//! and staircase control plots. No external plotting dependency.

use std::fmt::Write;

pub(crate) struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
    pub color: &'static str,
    pub line: bool,
    pub markers: bool,
}

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 500.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;

// Tick positions at {1, 2, 5}·10^e covering [lo, hi].
fn decades(lo: f64, hi: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut e = lo.log10().floor() as i32 - 1;
    while 10f64.powi(e) <= hi * 1.0000001 {
        for mant in [1.0, 2.0, 5.0] {
            let v = mant * 10f64.powi(e);
            if v >= lo * 0.9999999 && v <= hi * 1.0000001 {
                out.push(v);
            }
        }
        e += 1;
    }
    out
}

/// Log-log chart of the given series. Points with nonpositive coordinates
/// are dropped (they have no place on a log axis).
pub(crate) fn loglog_chart(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let finite: Vec<(f64, f64)> = series
        .iter()
        .flat_map(|s| s.points.iter().copied())
        .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
        .collect();
    let (x_min, x_max, y_min, y_max) = if finite.is_empty() {
        (1.0, 10.0, 1.0, 10.0)
    } else {
        let xs: Vec<f64> = finite.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = finite.iter().map(|p| p.1).collect();
        (
            xs.iter().cloned().fold(f64::INFINITY, f64::min),
            xs.iter().cloned().fold(0.0, f64::max),
            ys.iter().cloned().fold(f64::INFINITY, f64::min),
            ys.iter().cloned().fold(0.0, f64::max),
        )
    };
    let pad = |lo: f64, hi: f64| {
        let (l, h) = (lo.ln(), hi.ln());
        let span = (h - l).max(0.2);
        ((l - 0.08 * span).exp(), (h + 0.08 * span).exp())
    };
    let (x_min, x_max) = pad(x_min, x_max);
    let (y_min, y_max) = pad(y_min, y_max);

    let px = |x: f64| MARGIN_L + (x.ln() - x_min.ln()) / (x_max.ln() - x_min.ln()) * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |y: f64| HEIGHT - MARGIN_B - (y.ln() - y_min.ln()) / (y_max.ln() - y_min.ln()) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>"
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>",
        WIDTH / 2.0,
        title
    );

    // Grid and tick labels at decades.
    for gx in decades(x_min, x_max) {
        let x = px(gx);
        let _ = writeln!(
            svg,
            "<line x1=\"{x:.1}\" y1=\"{MARGIN_T}\" x2=\"{x:.1}\" y2=\"{}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{x:.1}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">{gx:e}</text>",
            HEIGHT - MARGIN_B,
            HEIGHT - MARGIN_B + 16.0
        );
    }
    for gy in decades(y_min, y_max) {
        let y = py(gy);
        let _ = writeln!(
            svg,
            "<line x1=\"{MARGIN_L}\" y1=\"{y:.1}\" x2=\"{}\" y2=\"{y:.1}\" stroke=\"#dddddd\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">{gy:.0e}</text>",
            WIDTH - MARGIN_R,
            MARGIN_L - 6.0,
            y + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">{}</text>",
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 12.0,
        xlabel
    );
    let _ = writeln!(
        svg,
        "<text x=\"18\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\" transform=\"rotate(-90 18 {})\">{}</text>",
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        ylabel
    );

    for (idx, s) in series.iter().enumerate() {
        let pts: Vec<(f64, f64)> = s
            .points
            .iter()
            .copied()
            .filter(|(x, y)| *x > 0.0 && *y > 0.0 && x.is_finite() && y.is_finite())
            .collect();
        if s.line && pts.len() > 1 {
            let path: Vec<String> = pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", px(x), py(y))).collect();
            let _ = writeln!(
                svg,
                "<polyline points=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.6\"/>",
                path.join(" "),
                s.color
            );
        }
        if s.markers {
            for &(x, y) in &pts {
                let _ = writeln!(
                    svg,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"3.2\" fill=\"{}\"/>",
                    px(x),
                    py(y),
                    s.color
                );
            }
        }
        let ly = MARGIN_T + 16.0 + 18.0 * idx as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{ly:.1}\" x2=\"{}\" y2=\"{ly:.1}\" stroke=\"{}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{}</text>",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0,
            s.color,
            MARGIN_L + 40.0,
            ly + 4.0,
            s.label
        );
    }
    svg.push_str("</svg>");
    svg
}

/// Staircase plot of piecewise-constant channel values over time.
pub(crate) fn step_chart(title: &str, t_final: f64, channels: &[(String, Vec<f64>)]) -> String {
    let palette = ["#1f6fb2", "#c23b22", "#2e8540", "#8031a7"];
    let all: Vec<f64> = channels.iter().flat_map(|(_, v)| v.iter().copied()).collect();
    let mut lo = all.iter().cloned().fold(f64::INFINITY, f64::min).min(0.0);
    let mut hi = all.iter().cloned().fold(f64::NEG_INFINITY, f64::max).max(0.0);
    if hi <= lo {
        lo -= 1.0;
        hi += 1.0;
    }
    let span = hi - lo;
    let (lo, hi) = (lo - 0.05 * span, hi + 0.05 * span);

    let px = |t: f64| MARGIN_L + t / t_final * (WIDTH - MARGIN_L - MARGIN_R);
    let py = |v: f64| HEIGHT - MARGIN_B - (v - lo) / (hi - lo) * (HEIGHT - MARGIN_T - MARGIN_B);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"16\" text-anchor=\"middle\">{}</text>\n\
         <rect x=\"{MARGIN_L}\" y=\"{MARGIN_T}\" width=\"{}\" height=\"{}\" fill=\"none\" stroke=\"black\"/>",
        WIDTH / 2.0,
        title,
        WIDTH - MARGIN_L - MARGIN_R,
        HEIGHT - MARGIN_T - MARGIN_B
    );
    let zero_y = py(0.0);
    let _ = writeln!(
        svg,
        "<line x1=\"{MARGIN_L}\" y1=\"{zero_y:.1}\" x2=\"{}\" y2=\"{zero_y:.1}\" stroke=\"#bbbbbb\" stroke-dasharray=\"4 3\"/>",
        WIDTH - MARGIN_R
    );
    for (idx, (label, values)) in channels.iter().enumerate() {
        let color = palette[idx % palette.len()];
        let q = values.len();
        let dt = t_final / q as f64;
        let mut path = String::new();
        for (k, &v) in values.iter().enumerate() {
            let t0 = k as f64 * dt;
            let t1 = t0 + dt;
            let _ = write!(path, "{:.2},{:.2} {:.2},{:.2} ", px(t0), py(v), px(t1), py(v));
        }
        let _ = writeln!(
            svg,
            "<polyline points=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.8\"/>",
            path.trim_end()
        );
        let ly = MARGIN_T + 16.0 + 18.0 * idx as f64;
        let _ = writeln!(
            svg,
            "<line x1=\"{}\" y1=\"{ly:.1}\" x2=\"{}\" y2=\"{ly:.1}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{:.1}\" font-family=\"sans-serif\" font-size=\"12\">{label}</text>",
            MARGIN_L + 10.0,
            MARGIN_L + 34.0,
            MARGIN_L + 40.0,
            ly + 4.0
        );
    }
    let _ = writeln!(
        svg,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"13\" text-anchor=\"middle\">t</text>",
        MARGIN_L + (WIDTH - MARGIN_L - MARGIN_R) / 2.0,
        HEIGHT - 12.0
    );
    svg.push_str("</svg>");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn loglog_chart_is_wellformed() {
        let s = Series {
            label: "mean".into(),
            points: vec![(4.0, 0.5), (16.0, 0.25), (64.0, 0.125)],
            color: "#1f6fb2",
            line: true,
            markers: true,
        };
        let svg = loglog_chart("t", "N", "err", &[s]);
        assert!(svg.starts_with("<svg"));
        assert!(svg.ends_with("</svg>"));
        assert!(svg.contains("polyline"));
        assert!(svg.contains("circle"));
    }

    #[test]
    fn step_chart_draws_every_channel() {
        let svg = step_chart("u", 1.0, &[("u1".into(), vec![0.5, -0.5]), ("u2".into(), vec![1.0, 1.0])]);
        assert_eq!(svg.matches("polyline").count(), 2);
    }
}
