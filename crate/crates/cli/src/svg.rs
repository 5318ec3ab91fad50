//! Native SVG rendering of log-log decay plots: axes with power-of-ten
//! ticks, scatter points, the fitted line, and a slope annotation. Output is
//! a static self-contained figure with no external dependencies.

use std::fmt::Write;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 480.0;
const MARGIN_L: f64 = 78.0;
const MARGIN_R: f64 = 24.0;
const MARGIN_T: f64 = 46.0;
const MARGIN_B: f64 = 58.0;

struct AxisMap {
    lo: f64,
    hi: f64,
    pix_lo: f64,
    pix_hi: f64,
}

impl AxisMap {
    fn to_pix(&self, v: f64) -> f64 {
        let t = (v - self.lo) / (self.hi - self.lo);
        self.pix_lo + t * (self.pix_hi - self.pix_lo)
    }

    /// Decade tick positions (integer powers of ten) inside the range,
    /// falling back to 2–5–10 mantissa subdivisions when the span is short.
    fn ticks(&self) -> Vec<f64> {
        let mut major: Vec<f64> = ((self.lo.ceil() as i64)..=(self.hi.floor() as i64))
            .map(|k| k as f64)
            .collect();
        if major.len() < 2 {
            for k in (self.lo.floor() as i64 - 1)..=(self.hi.ceil() as i64) {
                for m in [2.0f64, 5.0] {
                    let t = k as f64 + m.log10();
                    if t >= self.lo && t <= self.hi {
                        major.push(t);
                    }
                }
            }
            major.sort_by(|a, b| a.partial_cmp(b).expect("finite ticks"));
        }
        major
    }
}

fn escape_text(raw: &str) -> String {
    raw.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(log10_value: f64) -> String {
    let nearest = log10_value.round();
    if (log10_value - nearest).abs() < 1e-9 {
        return format!("1e{}", nearest as i64);
    }
    let value = 10f64.powf(log10_value);
    if (1e-3..1e4).contains(&value.abs()) {
        let s = format!("{value:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{value:.2e}")
    }
}

/// Render a log-log scatter of `(n, |value|)` points with an optional
/// fitted line given in natural-log coordinates: ln|v| = intercept +
/// slope·ln n. Points must have positive coordinates; an empty slice
/// produces a labeled empty frame.
pub fn loglog_plot(title: &str, points: &[(f64, f64)], fit: Option<(f64, f64)>) -> String {
    let mut svg = String::new();
    let _ = write!(
        svg,
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {w} {h}\" ",
            "font-family=\"monospace\" font-size=\"13\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"26\" text-anchor=\"middle\" font-size=\"16\">{title}</text>\n"
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = escape_text(title),
    );
    let frame = format!(
        "<rect x=\"{x}\" y=\"{y}\" width=\"{w}\" height=\"{h}\" fill=\"none\" stroke=\"black\"/>\n",
        x = MARGIN_L,
        y = MARGIN_T,
        w = WIDTH - MARGIN_L - MARGIN_R,
        h = HEIGHT - MARGIN_T - MARGIN_B,
    );
    svg.push_str(&frame);

    let positive: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|&(x, y)| (x.log10(), y.log10()))
        .collect();
    if positive.is_empty() {
        let _ = write!(
            svg,
            "<text x=\"{x}\" y=\"{y}\" text-anchor=\"middle\">no nonzero values</text>\n</svg>\n",
            x = WIDTH / 2.0,
            y = HEIGHT / 2.0,
        );
        return svg;
    }

    let (mut x_lo, mut x_hi) = positive
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(x, _)| {
            (lo.min(x), hi.max(x))
        });
    let (mut y_lo, mut y_hi) = positive
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, y)| {
            (lo.min(y), hi.max(y))
        });
    for (lo, hi) in [(&mut x_lo, &mut x_hi), (&mut y_lo, &mut y_hi)] {
        let pad = 0.06 * (*hi - *lo).max(0.5);
        *lo -= pad;
        *hi += pad;
    }
    let xm = AxisMap {
        lo: x_lo,
        hi: x_hi,
        pix_lo: MARGIN_L,
        pix_hi: WIDTH - MARGIN_R,
    };
    let ym = AxisMap {
        lo: y_lo,
        hi: y_hi,
        pix_lo: HEIGHT - MARGIN_B,
        pix_hi: MARGIN_T,
    };

    for t in xm.ticks() {
        let px = xm.to_pix(t);
        let _ = write!(
            svg,
            concat!(
                "<line x1=\"{x}\" y1=\"{y0}\" x2=\"{x}\" y2=\"{y1}\" stroke=\"black\"/>\n",
                "<text x=\"{x}\" y=\"{ly}\" text-anchor=\"middle\">{label}</text>\n"
            ),
            x = px,
            y0 = HEIGHT - MARGIN_B,
            y1 = HEIGHT - MARGIN_B + 6.0,
            ly = HEIGHT - MARGIN_B + 22.0,
            label = tick_label(t),
        );
    }
    for t in ym.ticks() {
        let py = ym.to_pix(t);
        let _ = write!(
            svg,
            concat!(
                "<line x1=\"{x0}\" y1=\"{y}\" x2=\"{x1}\" y2=\"{y}\" stroke=\"black\"/>\n",
                "<text x=\"{lx}\" y=\"{ty}\" text-anchor=\"end\">{label}</text>\n"
            ),
            x0 = MARGIN_L - 6.0,
            x1 = MARGIN_L,
            y = py,
            lx = MARGIN_L - 10.0,
            ty = py + 4.0,
            label = tick_label(t),
        );
    }
    let _ = write!(
        svg,
        concat!(
            "<text x=\"{xc}\" y=\"{xy}\" text-anchor=\"middle\">separation n</text>\n",
            "<text x=\"18\" y=\"{yc}\" text-anchor=\"middle\" ",
            "transform=\"rotate(-90 18 {yc})\">|O|</text>\n"
        ),
        xc = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        xy = HEIGHT - 14.0,
        yc = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
    );

    if let Some((slope, intercept)) = fit {
        // convert ln-space fit to log10 coordinates along the x-range
        let ln10 = std::f64::consts::LN_10;
        let y_at = |x10: f64| (intercept + slope * x10 * ln10) / ln10;
        let _ = write!(
            svg,
            concat!(
                "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y1}\" ",
                "stroke=\"darkorange\" stroke-width=\"2\"/>\n",
                "<text x=\"{ax}\" y=\"{ay}\" fill=\"darkorange\">slope &#8776; {slope:.3}</text>\n"
            ),
            x0 = xm.to_pix(x_lo),
            y0 = ym.to_pix(y_at(x_lo)),
            x1 = xm.to_pix(x_hi),
            y1 = ym.to_pix(y_at(x_hi)),
            ax = MARGIN_L + 16.0,
            ay = MARGIN_T + 22.0,
            slope = slope,
        );
    }
    for &(x, y) in &positive {
        let _ = writeln!(
            svg,
            "<circle cx=\"{cx}\" cy=\"{cy}\" r=\"4\" fill=\"steelblue\"/>",
            cx = xm.to_pix(x),
            cy = ym.to_pix(y),
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_input_renders_a_labeled_frame() {
        let svg = loglog_plot("nothing", &[], None);
        assert!(svg.starts_with("<svg"));
        assert!(svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains("no nonzero values"));
        assert!(!svg.contains("circle"));
    }

    #[test]
    fn scatter_and_fit_line_appear() {
        let points = [(2.0, 1e-2), (4.0, 1.25e-3), (8.0, 1.5625e-4)];
        let svg = loglog_plot("decay", &points, Some((-3.0, 1e-2f64.ln() - 3.0 * 2f64.ln())));
        assert_eq!(svg.matches("<circle").count(), 3);
        assert!(svg.contains("slope &#8776; -3.000"));
        assert!(svg.contains("darkorange"));
        assert!(svg.contains("separation n"));
    }

    #[test]
    fn nonpositive_points_are_dropped_not_plotted() {
        let svg = loglog_plot("mixed", &[(1.0, 0.5), (2.0, 0.0), (3.0, -0.1)], None);
        assert_eq!(svg.matches("<circle").count(), 1);
    }

    #[test]
    fn exact_decade_ticks_use_power_labels() {
        assert_eq!(tick_label(2.0), "1e2");
        assert_eq!(tick_label(-5.0), "1e-5");
        assert_eq!(tick_label(2f64.log10()), "2");
    }

    #[test]
    fn titles_are_xml_escaped() {
        let svg = loglog_plot("a < b & c", &[], None);
        assert!(svg.contains("a &lt; b &amp; c"));
        assert!(!svg.contains("a < b"));
    }

    #[test]
    fn fit_line_endpoints_follow_the_slope() {
        // one point => padded half-decade range; the line must still be
        // finite and inside the viewBox horizontally
        let svg = loglog_plot("single", &[(10.0, 1e-3)], Some((-3.0, 0.0)));
        assert!(svg.contains("darkorange"));
        assert!(!svg.contains("NaN"));
    }
}
