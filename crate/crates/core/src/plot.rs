//! Minimal static SVG charts: overlaid histograms and precision/recall curves.

use std::fmt::Write as _;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 400.0;
const MARGIN: f64 = 48.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// One named series of `(x, y)` values.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Self {
            label: label.into(),
            points,
        }
    }
}

struct Frame {
    x0: f64,
    x1: f64,
    y1: f64,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        MARGIN + (x - self.x0) / (self.x1 - self.x0).max(f64::MIN_POSITIVE) * (WIDTH - 2.0 * MARGIN)
    }

    fn py(&self, y: f64) -> f64 {
        HEIGHT - MARGIN - y / self.y1.max(f64::MIN_POSITIVE) * (HEIGHT - 2.0 * MARGIN)
    }
}

fn header(title: &str, xlabel: &str, ylabel: &str, f: &Frame) -> String {
    let mut s = format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH}\" height=\"{HEIGHT}\" viewBox=\"0 0 {WIDTH} {HEIGHT}\">\n\
         <rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" text-anchor=\"middle\">{}</text>\n",
        WIDTH / 2.0,
        escape(title)
    );
    let (l, r, b, t) = (MARGIN, WIDTH - MARGIN, HEIGHT - MARGIN, MARGIN);
    let _ = writeln!(
        s,
        "<path d=\"M{l} {t} L{l} {b} L{r} {b}\" stroke=\"black\" fill=\"none\"/>\n\
         <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">{}</text>\n\
         <text x=\"14\" y=\"{}\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 14 {})\">{}</text>",
        WIDTH / 2.0,
        HEIGHT - 10.0,
        escape(xlabel),
        HEIGHT / 2.0,
        HEIGHT / 2.0,
        escape(ylabel)
    );
    for (v, x) in [(f.x0, l), (f.x1, r)] {
        let _ = writeln!(
            s,
            "<text x=\"{x}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"middle\">{v:.3}</text>",
            b + 14.0
        );
    }
    let _ = writeln!(
        s,
        "<text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"10\" text-anchor=\"end\">{:.3}</text>",
        l - 4.0,
        t + 4.0,
        f.y1
    );
    s
}

fn legend(s: &mut String, labels: &[&str]) {
    for (i, label) in labels.iter().enumerate() {
        let y = MARGIN + 14.0 * i as f64;
        let color = PALETTE[i % PALETTE.len()];
        let _ = writeln!(
            s,
            "<rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{color}\"/>\
             <text x=\"{}\" y=\"{}\" font-family=\"sans-serif\" font-size=\"11\">{}</text>",
            WIDTH - MARGIN - 140.0,
            y,
            WIDTH - MARGIN - 126.0,
            y + 9.0,
            escape(label)
        );
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Overlaid step histograms sharing `edges`; each series gives one mass per bin.
pub fn histogram_svg(title: &str, xlabel: &str, edges: &[f64], series: &[(&str, &[f64])]) -> String {
    let ymax = series.iter().flat_map(|(_, m)| m.iter().copied()).fold(0.0, f64::max) * 1.05;
    let f = Frame {
        x0: edges[0],
        x1: edges[edges.len() - 1],
        y1: ymax,
    };
    let mut s = header(title, xlabel, "mass", &f);
    for (i, (_, masses)) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = format!("M{:.2} {:.2}", f.px(edges[0]), f.py(0.0));
        for (j, m) in masses.iter().enumerate() {
            let _ = write!(
                d,
                " L{:.2} {:.2} L{:.2} {:.2}",
                f.px(edges[j]),
                f.py(*m),
                f.px(edges[j + 1]),
                f.py(*m)
            );
        }
        let _ = write!(d, " L{:.2} {:.2}", f.px(edges[edges.len() - 1]), f.py(0.0));
        let _ = writeln!(
            s,
            "<path d=\"{d}\" stroke=\"{color}\" fill=\"{color}\" fill-opacity=\"0.15\" stroke-width=\"1.5\"/>"
        );
    }
    legend(&mut s, &series.iter().map(|(l, _)| *l).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// Polyline chart on the unit square, used for precision/recall curves.
pub fn curve_svg(title: &str, xlabel: &str, ylabel: &str, series: &[Series]) -> String {
    let f = Frame {
        x0: 0.0,
        x1: 1.0,
        y1: 1.0,
    };
    let mut s = header(title, xlabel, ylabel, &f);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let pts: Vec<String> = ser
            .points
            .iter()
            .map(|(x, y)| format!("{:.2},{:.2}", f.px(*x), f.py(*y)))
            .collect();
        let _ = writeln!(
            s,
            "<polyline points=\"{}\" stroke=\"{color}\" fill=\"none\" stroke-width=\"1.5\"/>",
            pts.join(" ")
        );
    }
    legend(&mut s, &series.iter().map(|x| x.label.as_str()).collect::<Vec<_>>());
    s.push_str("</svg>\n");
    s
}

/// `(recall, precision)` points of a ranked detection list.
pub fn pr_points(results: &[crate::eval::MatchResult]) -> Vec<(f64, f64)> {
    let total: usize = results.iter().map(|r| r.annotations.len()).sum();
    let mut dets: Vec<_> = results.iter().flat_map(|r| r.detections.iter().copied()).collect();
    dets.sort_by(|a, b| b.score.total_cmp(&a.score));
    let mut tp = 0;
    let mut out = vec![(0.0, 1.0)];
    for (i, d) in dets.iter().enumerate() {
        tp += usize::from(d.true_positive);
        out.push((tp as f64 / total.max(1) as f64, tp as f64 / (i + 1) as f64));
    }
    out
}
