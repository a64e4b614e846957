//! Minimal self-contained SVG line plots for result tables.
//!
//! No drawing dependencies: the renderer lays out axes, ticks, a
//! legend, and one polyline-with-markers per series, and returns the
//! SVG document as a string. A logarithmic y axis clamps non-positive
//! values to a floor one decade below the smallest positive value so
//! zero-error points stay visible at the bottom edge of the plot.

use thiserror::Error;

const WIDTH: f64 = 800.0;
const HEIGHT: f64 = 500.0;
const MARGIN_LEFT: f64 = 90.0;
const MARGIN_RIGHT: f64 = 170.0;
const MARGIN_TOP: f64 = 50.0;
const MARGIN_BOTTOM: f64 = 70.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// One labelled line.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

/// A complete figure description.
#[derive(Debug, Clone)]
pub struct PlotSpec {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

#[derive(Debug, Error, PartialEq)]
pub enum PlotError {
    #[error("plot has no points to draw")]
    Empty,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn fmt_num(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if !(0.01..10000.0).contains(&a) {
        let s = format!("{v:.1e}");
        return s.replace("e0", "e").replace("e-0", "e-");
    }
    let s = format!("{v:.3}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    s.to_string()
}

struct Frame {
    x_min: f64,
    x_max: f64,
    y_min: f64,
    y_max: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        let t = (v - self.x_min) / (self.x_max - self.x_min);
        MARGIN_LEFT + t * (WIDTH - MARGIN_LEFT - MARGIN_RIGHT)
    }
    fn y(&self, v: f64) -> f64 {
        let t = (v - self.y_min) / (self.y_max - self.y_min);
        HEIGHT - MARGIN_BOTTOM - t * (HEIGHT - MARGIN_TOP - MARGIN_BOTTOM)
    }
}

fn pad(min: f64, max: f64) -> (f64, f64) {
    if min == max {
        let d = if min == 0.0 { 1.0 } else { min.abs() * 0.1 };
        (min - d, max + d)
    } else {
        let d = (max - min) * 0.05;
        (min - d, max + d)
    }
}

/// Renders the figure to an SVG document.
pub fn render_svg(spec: &PlotSpec) -> Result<String, PlotError> {
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in &spec.series {
        pts.extend_from_slice(&s.points);
    }
    if pts.is_empty() {
        return Err(PlotError::Empty);
    }

    // Log-y floor: one decade under the smallest positive value.
    let y_floor = if spec.log_y {
        let min_pos = pts
            .iter()
            .map(|p| p.1)
            .filter(|&y| y > 0.0)
            .fold(f64::INFINITY, f64::min);
        if min_pos.is_finite() {
            min_pos / 10.0
        } else {
            1e-12
        }
    } else {
        0.0
    };
    let ty = |y: f64| {
        if spec.log_y {
            y.max(y_floor).log10()
        } else {
            y
        }
    };

    let (mut x_min, mut x_max) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut y_min, mut y_max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in &pts {
        x_min = x_min.min(x);
        x_max = x_max.max(x);
        y_min = y_min.min(ty(y));
        y_max = y_max.max(ty(y));
    }
    let (x_min, x_max) = pad(x_min, x_max);
    let (y_min, y_max) = pad(y_min, y_max);
    let f = Frame { x_min, x_max, y_min, y_max };

    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" viewBox=\"0 0 {WIDTH} {HEIGHT}\" \
         font-family=\"sans-serif\" font-size=\"13\">\n"
    ));
    svg.push_str(&format!(
        "<rect width=\"{WIDTH}\" height=\"{HEIGHT}\" fill=\"white\"/>\n"
    ));
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"28\" text-anchor=\"middle\" font-size=\"16\">{}</text>\n",
        WIDTH / 2.0,
        esc(&spec.title)
    ));

    // Axes.
    let x0 = MARGIN_LEFT;
    let x1 = WIDTH - MARGIN_RIGHT;
    let y0 = HEIGHT - MARGIN_BOTTOM;
    let y1 = MARGIN_TOP;
    svg.push_str(&format!(
        "<line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x1}\" y2=\"{y0}\" stroke=\"black\"/>\n\
         <line x1=\"{x0}\" y1=\"{y0}\" x2=\"{x0}\" y2=\"{y1}\" stroke=\"black\"/>\n"
    ));

    // X ticks: five evenly spaced values.
    for i in 0..=4 {
        let v = x_min + (x_max - x_min) * i as f64 / 4.0;
        let px = f.x(v);
        svg.push_str(&format!(
            "<line x1=\"{px}\" y1=\"{y0}\" x2=\"{px}\" y2=\"{}\" stroke=\"black\"/>\n\
             <text x=\"{px}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
            y0 + 6.0,
            y0 + 22.0,
            fmt_num(v)
        ));
    }
    // Y ticks: powers of ten on a log axis, else five even values.
    if spec.log_y {
        let lo = y_min.ceil() as i32;
        let hi = y_max.floor() as i32;
        for e in lo..=hi {
            let py = f.y(e as f64);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"end\">1e{e}</text>\n",
                x0 - 6.0,
                x0 - 10.0,
                py + 4.0
            ));
        }
    } else {
        for i in 0..=4 {
            let v = y_min + (y_max - y_min) * i as f64 / 4.0;
            let py = f.y(v);
            svg.push_str(&format!(
                "<line x1=\"{}\" y1=\"{py}\" x2=\"{x0}\" y2=\"{py}\" stroke=\"black\"/>\n\
                 <text x=\"{}\" y=\"{}\" text-anchor=\"end\">{}</text>\n",
                x0 - 6.0,
                x0 - 10.0,
                py + 4.0,
                fmt_num(v)
            ));
        }
    }

    // Axis labels.
    svg.push_str(&format!(
        "<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">{}</text>\n",
        (x0 + x1) / 2.0,
        HEIGHT - 20.0,
        esc(&spec.x_label)
    ));
    svg.push_str(&format!(
        "<text x=\"24\" y=\"{}\" text-anchor=\"middle\" transform=\"rotate(-90 24 {})\">{}</text>\n",
        (y0 + y1) / 2.0,
        (y0 + y1) / 2.0,
        esc(&spec.y_label)
    ));

    // Series.
    for (i, s) in spec.series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut path = String::new();
        for (j, &(x, y)) in s.points.iter().enumerate() {
            let (px, py) = (f.x(x), f.y(ty(y)));
            path.push_str(if j == 0 { "M" } else { "L" });
            path.push_str(&format!("{px:.1},{py:.1} "));
        }
        svg.push_str(&format!(
            "<path d=\"{}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"2\"/>\n",
            path.trim_end()
        ));
        for &(x, y) in &s.points {
            svg.push_str(&format!(
                "<circle cx=\"{:.1}\" cy=\"{:.1}\" r=\"3.5\" fill=\"{color}\"/>\n",
                f.x(x),
                f.y(ty(y))
            ));
        }
        // Legend entry.
        let ly = MARGIN_TOP + 14.0 + i as f64 * 20.0;
        svg.push_str(&format!(
            "<line x1=\"{}\" y1=\"{ly}\" x2=\"{}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{}\" y=\"{}\">{}</text>\n",
            x1 + 10.0,
            x1 + 34.0,
            x1 + 40.0,
            ly + 4.0,
            esc(&s.label)
        ));
    }

    svg.push_str("</svg>\n");
    Ok(svg)
}
