//! Self-contained 800x600 SVG line charts with optional error bars.

use std::fmt::Write;

pub const WIDTH: f64 = 800.0;
pub const HEIGHT: f64 = 600.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 50.0;
const BOTTOM: f64 = 80.0;
const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    /// `None` breaks the polyline.
    pub y: Option<f64>,
    pub err: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub name: String,
    pub points: Vec<Point>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<Series>,
    /// Explicit x tick positions and labels; numeric ticks otherwise.
    pub x_ticks: Option<Vec<(f64, String)>>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm < 1.5 {
        1.0
    } else if norm < 3.0 {
        2.0
    } else if norm < 7.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64, step: f64) -> String {
    let decimals = (-step.log10().floor()).max(0.0) as usize;
    format!("{v:.decimals$}")
}

impl Chart {
    fn bounds(&self) -> (f64, f64, f64, f64) {
        let mut xs = (f64::INFINITY, f64::NEG_INFINITY);
        let mut ys = (f64::INFINITY, f64::NEG_INFINITY);
        for p in self.series.iter().flat_map(|s| &s.points) {
            xs = (xs.0.min(p.x), xs.1.max(p.x));
            if let Some(y) = p.y {
                let e = p.err.unwrap_or(0.0);
                ys = (ys.0.min(y - e), ys.1.max(y + e));
            }
        }
        if !xs.0.is_finite() {
            xs = (0.0, 1.0);
        }
        if !ys.0.is_finite() {
            ys = (0.0, 1.0);
        }
        if xs.1 - xs.0 < 1e-12 {
            xs = (xs.0 - 0.5, xs.1 + 0.5);
        }
        let pad = ((ys.1 - ys.0) * 0.05).max(1e-6);
        (xs.0, xs.1, ys.0 - pad, ys.1 + pad)
    }

    pub fn render(&self) -> String {
        let (x0, x1, y0, y1) = self.bounds();
        let pw = WIDTH - LEFT - RIGHT;
        let ph = HEIGHT - TOP - BOTTOM;
        let sx = |x: f64| LEFT + (x - x0) / (x1 - x0) * pw;
        let sy = |y: f64| TOP + ph - (y - y0) / (y1 - y0) * ph;
        let mut out = String::new();
        let _ = writeln!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="28" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + pw / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(out, r#"<rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#);

        let ystep = nice_step(y1 - y0);
        let mut t = (y0 / ystep).ceil() * ystep;
        while t <= y1 + 1e-12 {
            let y = sy(t);
            let _ = writeln!(
                out,
                r##"<line x1="{LEFT}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + pw,
                LEFT - 6.0,
                y + 4.0,
                tick_label(t, ystep)
            );
            t += ystep;
        }
        let xticks: Vec<(f64, String)> = match &self.x_ticks {
            Some(ticks) => ticks.clone(),
            None => {
                let step = nice_step(x1 - x0);
                let mut v = Vec::new();
                let mut t = (x0 / step).ceil() * step;
                while t <= x1 + 1e-12 {
                    v.push((t, tick_label(t, step)));
                    t += step;
                }
                v
            }
        };
        for (x, label) in &xticks {
            let px = sx(*x);
            let _ = writeln!(
                out,
                r#"<line x1="{px:.2}" y1="{:.2}" x2="{px:.2}" y2="{:.2}" stroke="black"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
                TOP + ph,
                TOP + ph + 5.0,
                TOP + ph + 20.0,
                escape(label)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
            LEFT + pw / 2.0,
            HEIGHT - 30.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            r#"<text x="20" y="{:.1}" text-anchor="middle" transform="rotate(-90 20 {:.1})">{}</text>"#,
            TOP + ph / 2.0,
            TOP + ph / 2.0,
            escape(&self.y_label)
        );

        for (k, s) in self.series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let mut segment: Vec<String> = Vec::new();
            let flush = |segment: &mut Vec<String>, out: &mut String| {
                if segment.len() > 1 {
                    let _ = writeln!(
                        out,
                        r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                        segment.join(" ")
                    );
                }
                segment.clear();
            };
            for p in &s.points {
                match p.y {
                    Some(y) => {
                        let (px, py) = (sx(p.x), sy(y));
                        segment.push(format!("{px:.2},{py:.2}"));
                        let _ = writeln!(out, r#"<circle cx="{px:.2}" cy="{py:.2}" r="2.5" fill="{color}"/>"#);
                        if let Some(e) = p.err.filter(|e| *e > 0.0) {
                            let (ya, yb) = (sy(y - e), sy(y + e));
                            let _ = writeln!(
                                out,
                                r#"<path d="M{px:.2},{ya:.2}V{yb:.2}M{:.2},{ya:.2}H{:.2}M{:.2},{yb:.2}H{:.2}" stroke="{color}" fill="none"/>"#,
                                px - 3.0,
                                px + 3.0,
                                px - 3.0,
                                px + 3.0
                            );
                        }
                    }
                    None => flush(&mut segment, &mut out),
                }
            }
            flush(&mut segment, &mut out);
            let ly = TOP + 10.0 + 20.0 * k as f64;
            let lx = WIDTH - RIGHT + 15.0;
            let _ = writeln!(
                out,
                r#"<line x1="{lx:.1}" y1="{ly:.1}" x2="{:.1}" y2="{ly:.1}" stroke="{color}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 25.0,
                lx + 32.0,
                ly + 4.0,
                escape(&s.name)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_polylines_and_error_bars() {
        let chart = Chart {
            title: "t <1>".into(),
            x_label: "x".into(),
            y_label: "y".into(),
            series: vec![Series {
                name: "a".into(),
                points: vec![
                    Point { x: 0.0, y: Some(1.0), err: Some(0.1) },
                    Point { x: 1.0, y: Some(2.0), err: None },
                    Point { x: 2.0, y: None, err: None },
                    Point { x: 3.0, y: Some(1.5), err: None },
                ],
            }],
            x_ticks: None,
        };
        let svg = chart.render();
        assert!(svg.starts_with("<svg"));
        assert!(svg.contains(r#"width="800""#) && svg.contains(r#"height="600""#));
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert_eq!(svg.matches("<path").count(), 1);
        assert!(svg.contains("t &lt;1&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn nice_steps() {
        assert_eq!(nice_step(1.0), 0.2);
        assert_eq!(nice_step(0.05), 0.01);
        assert_eq!(nice_step(30.0), 5.0);
    }
}
