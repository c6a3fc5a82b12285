//! Static SVG rendering of a two-axis regime map.
//!
//! Cells are drawn as rectangles spanning the midpoints between neighboring
//! grid values; horizontal runs of the same label are merged. Output depends
//! only on the inputs, so identical inputs give identical bytes.

use std::fmt::Write;

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 560.0;
const LEFT: f64 = 80.0;
const TOP: f64 = 44.0;
const PLOT_W: f64 = 480.0;
const PLOT_H: f64 = 440.0;

/// Fill color and legend text per regime label.
pub const PALETTE: [(&str, &str, &str); 6] = [
    ("A", "#4e79a7", "A: misbehavior deterred"),
    ("B1", "#f28e2b", "B1: no inspection"),
    ("B2", "#59a14f", "B2: partial inspection"),
    ("B3", "#e15759", "B3: full inspection"),
    ("Boundary", "#7f7f7f", "regime boundary"),
    ("", "#ffffff", "no solution"),
];

#[derive(Debug, Clone)]
pub struct Axis {
    pub values: Vec<f64>,
    pub log: bool,
    pub label: String,
}

impl Axis {
    fn t(&self, v: f64) -> f64 {
        if self.log {
            v.log10()
        } else {
            v
        }
    }

    /// Cell edges in transformed coordinates.
    fn edges(&self) -> Vec<f64> {
        let t: Vec<f64> = self.values.iter().map(|&v| self.t(v)).collect();
        let n = t.len();
        if n == 1 {
            let half = if t[0] == 0.0 { 0.5 } else { 0.05 * t[0].abs() };
            return vec![t[0] - half, t[0] + half];
        }
        let mut e = Vec::with_capacity(n + 1);
        e.push(t[0] - 0.5 * (t[1] - t[0]));
        for i in 1..n {
            e.push(0.5 * (t[i - 1] + t[i]));
        }
        e.push(t[n - 1] + 0.5 * (t[n - 1] - t[n - 2]));
        e
    }

    fn ticks(&self, lo: f64, hi: f64) -> Vec<f64> {
        if self.log {
            let (a, b) = (lo.ceil() as i32, hi.floor() as i32);
            if b - a >= 1 {
                return (a..=b).map(|k| 10f64.powi(k)).collect();
            }
            return vec![self.values[0], *self.values.last().unwrap()];
        }
        let (min, max) = (self.values[0], *self.values.last().unwrap());
        if min == max {
            return vec![min];
        }
        (0..=5)
            .map(|k| min + (max - min) * k as f64 / 5.0)
            .collect()
    }
}

/// A polyline drawn over the map; `None` breaks the line.
#[derive(Debug, Clone)]
pub struct Overlay {
    pub label: String,
    pub color: &'static str,
    pub dash: &'static str,
    pub points: Vec<Option<(f64, f64)>>,
}

#[derive(Debug, Clone)]
pub struct RegimeMap {
    pub title: String,
    pub x: Axis,
    pub y: Axis,
    /// Labels in row-major order: `y` outer, `x` inner.
    pub labels: Vec<String>,
    pub overlays: Vec<Overlay>,
}

fn num(v: f64) -> String {
    let s = format!("{v:.2}");
    if s == "-0.00" {
        "0.00".into()
    } else {
        s
    }
}

/// Short tick label: up to four significant decimals, trailing zeros cut.
pub fn tick_label(v: f64) -> String {
    let digits = if v == 0.0 {
        0
    } else {
        (4 - v.abs().log10().floor() as i32 - 1).clamp(0, 6) as usize
    };
    let s = format!("{v:.digits$}");
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

impl RegimeMap {
    pub fn render(&self) -> String {
        let (xe, ye) = (self.x.edges(), self.y.edges());
        let (x0, x1) = (xe[0], *xe.last().unwrap());
        let (y0, y1) = (ye[0], *ye.last().unwrap());
        let px = |t: f64| LEFT + (t - x0) / (x1 - x0) * PLOT_W;
        let py = |t: f64| TOP + PLOT_H - (t - y0) / (y1 - y0) * PLOT_H;
        let nx = self.x.values.len();

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(
            s,
            r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
            num(LEFT + PLOT_W / 2.0),
            escape(&self.title)
        );
        let _ = writeln!(
            s,
            r#"<defs><clipPath id="plot"><rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}"/></clipPath></defs>"#
        );

        // one group per label, rectangles merged along x
        for (label, color, _) in PALETTE {
            let mut body = String::new();
            for (j, row) in self.labels.chunks(nx).enumerate() {
                let mut i = 0;
                while i < nx {
                    if row[i] != label {
                        i += 1;
                        continue;
                    }
                    let start = i;
                    while i < nx && row[i] == label {
                        i += 1;
                    }
                    let (xa, xb) = (px(xe[start]), px(xe[i]));
                    let (ya, yb) = (py(ye[j + 1]), py(ye[j]));
                    let _ = writeln!(
                        body,
                        r#"<rect x="{}" y="{}" width="{}" height="{}"/>"#,
                        num(xa),
                        num(ya),
                        num(xb - xa),
                        num(yb - ya)
                    );
                }
            }
            if !body.is_empty() {
                let id = if label.is_empty() { "none" } else { label };
                let _ = writeln!(
                    s,
                    r#"<g id="region-{id}" fill="{color}" stroke="{color}" stroke-width="0.3">"#
                );
                s.push_str(&body);
                s.push_str("</g>\n");
            }
        }

        s.push_str("<g clip-path=\"url(#plot)\" fill=\"none\" stroke-width=\"1.6\">\n");
        for o in &self.overlays {
            let mut seg: Vec<String> = Vec::new();
            let flush = |seg: &mut Vec<String>, s: &mut String| {
                if seg.len() >= 2 {
                    let _ = writeln!(
                        s,
                        r#"<polyline stroke="{}" stroke-dasharray="{}" points="{}"/>"#,
                        o.color,
                        o.dash,
                        seg.join(" ")
                    );
                }
                seg.clear();
            };
            for p in &o.points {
                let valid = p.filter(|(x, y)| {
                    x.is_finite()
                        && y.is_finite()
                        && (!self.x.log || *x > 0.0)
                        && (!self.y.log || *y > 0.0)
                });
                match valid {
                    Some((x, y)) => {
                        seg.push(format!("{},{}", num(px(self.x.t(x))), num(py(self.y.t(y)))))
                    }
                    None => flush(&mut seg, &mut s),
                }
            }
            flush(&mut seg, &mut s);
        }
        s.push_str("</g>\n");

        let _ = writeln!(
            s,
            r#"<rect x="{LEFT}" y="{TOP}" width="{PLOT_W}" height="{PLOT_H}" fill="none" stroke="black"/>"#
        );
        for v in self.x.ticks(x0, x1) {
            let x = px(self.x.t(v));
            let yb = TOP + PLOT_H;
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{0}" y2="{2}" stroke="black"/><text x="{0}" y="{3}" text-anchor="middle">{4}</text>"#,
                num(x),
                num(yb),
                num(yb + 5.0),
                num(yb + 18.0),
                tick_label(v)
            );
        }
        for v in self.y.ticks(y0, y1) {
            let y = py(self.y.t(v));
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{1}" x2="{2}" y2="{1}" stroke="black"/><text x="{3}" y="{4}" text-anchor="end">{5}</text>"#,
                num(LEFT - 5.0),
                num(y),
                num(LEFT),
                num(LEFT - 8.0),
                num(y + 4.0),
                tick_label(v)
            );
        }
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
            num(LEFT + PLOT_W / 2.0),
            num(TOP + PLOT_H + 42.0),
            escape(&self.x.label)
        );
        let (lx, ly) = (22.0, TOP + PLOT_H / 2.0);
        let _ = writeln!(
            s,
            r#"<text x="{0}" y="{1}" text-anchor="middle" transform="rotate(-90 {0} {1})">{2}</text>"#,
            num(lx),
            num(ly),
            escape(&self.y.label)
        );

        let legend_x = LEFT + PLOT_W + 20.0;
        let mut y = TOP + 10.0;
        for (label, color, text) in PALETTE {
            if !self.labels.iter().any(|l| l == label) {
                continue;
            }
            let _ = writeln!(
                s,
                r#"<rect x="{}" y="{}" width="14" height="14" fill="{color}" stroke="black" stroke-width="0.5"/><text x="{}" y="{}">{}</text>"#,
                num(legend_x),
                num(y),
                num(legend_x + 20.0),
                num(y + 11.0),
                escape(text)
            );
            y += 22.0;
        }
        for o in &self.overlays {
            let _ = writeln!(
                s,
                r#"<line x1="{0}" y1="{2}" x2="{1}" y2="{2}" stroke="{3}" stroke-dasharray="{4}" stroke-width="1.6"/><text x="{5}" y="{6}">{7}</text>"#,
                num(legend_x),
                num(legend_x + 14.0),
                num(y + 7.0),
                o.color,
                o.dash,
                num(legend_x + 20.0),
                num(y + 11.0),
                escape(&o.label)
            );
            y += 22.0;
        }
        s.push_str("</svg>\n");
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> RegimeMap {
        RegimeMap {
            title: "t".into(),
            x: Axis {
                values: vec![1.0, 2.0, 3.0],
                log: false,
                label: "x (USD)".into(),
            },
            y: Axis {
                values: vec![0.1, 1.0],
                log: true,
                label: "y (USD)".into(),
            },
            labels: ["B1", "B1", "A", "B2", "A", "A"].map(String::from).to_vec(),
            overlays: vec![Overlay {
                label: "line".into(),
                color: "black",
                dash: "4 2",
                points: vec![Some((1.0, 0.1)), Some((2.0, 1.0)), None, Some((3.0, 0.0))],
            }],
        }
    }

    #[test]
    fn runs_are_merged_per_label() {
        let svg = tiny().render();
        let b1 = svg.split("<g id=\"region-B1\"").nth(1).unwrap();
        let b1 = &b1[..b1.find("</g>").unwrap()];
        assert_eq!(b1.matches("<rect").count(), 1);
        let a = svg.split("<g id=\"region-A\"").nth(1).unwrap();
        let a = &a[..a.find("</g>").unwrap()];
        assert_eq!(a.matches("<rect").count(), 2);
        assert!(!svg.contains("region-B3"));
    }

    #[test]
    fn overlay_skips_points_off_a_log_axis() {
        let svg = tiny().render();
        assert_eq!(svg.matches("<polyline").count(), 1);
        assert!(!svg.contains("NaN") && !svg.contains("inf"));
    }

    #[test]
    fn deterministic_bytes() {
        assert_eq!(tiny().render(), tiny().render());
    }

    #[test]
    fn tick_labels() {
        assert_eq!(tick_label(0.001), "0.001");
        assert_eq!(tick_label(100.0), "100");
        assert_eq!(tick_label(2.448979), "2.449");
        assert_eq!(tick_label(0.0), "0");
    }
}
