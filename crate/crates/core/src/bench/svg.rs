//! Small standalone SVG line/band/bar chart writer.

use std::fmt::Write as _;

pub const PALETTE: [&str; 6] = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b"];

const WIDTH: f64 = 760.0;
const HEIGHT: f64 = 480.0;
const LEFT: f64 = 80.0;
const RIGHT: f64 = 190.0;
const TOP: f64 = 44.0;
const BOTTOM: f64 = 64.0;

#[derive(Debug, Clone)]
pub struct Line {
    pub label: String,
    pub color: String,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

/// Shaded region between `lo` and `hi` at each x.
#[derive(Debug, Clone)]
pub struct Band {
    pub color: String,
    pub points: Vec<(f64, f64, f64)>,
}

#[derive(Debug, Clone)]
pub struct Dot {
    pub x: f64,
    pub y: f64,
    pub color: String,
}

/// Vertical bar against the right-hand 0–100 % axis.
#[derive(Debug, Clone, Copy)]
pub struct Bar {
    pub x: f64,
    pub percent: f64,
}

#[derive(Debug, Clone, Default)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub lines: Vec<Line>,
    pub bands: Vec<Band>,
    pub dots: Vec<Dot>,
    pub bars: Vec<Bar>,
    pub bar_label: Option<String>,
    /// Extra legend entries without a line, e.g. a color scale.
    pub notes: Vec<(String, String)>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let norm = raw / mag;
    let nice = if norm <= 1.0 {
        1.0
    } else if norm <= 2.0 {
        2.0
    } else if norm <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * mag
}

fn tick_label(v: f64) -> String {
    if v != 0.0 && (v.abs() >= 1e5 || v.abs() < 1e-3) {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.4}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

/// Blue-to-red ramp for a 0–100 percentage.
pub fn utilization_color(percent: f64) -> String {
    let t = (percent / 100.0).clamp(0.0, 1.0);
    let lerp = |a: f64, b: f64| (a + (b - a) * t).round() as u8;
    format!("#{:02x}{:02x}{:02x}", lerp(59.0, 180.0), lerp(76.0, 4.0), lerp(192.0, 38.0))
}

impl Chart {
    fn x_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.lines
            .iter()
            .flat_map(|l| l.points.iter().map(|p| p.0))
            .chain(self.bands.iter().flat_map(|b| b.points.iter().map(|p| p.0)))
            .chain(self.dots.iter().map(|d| d.x))
            .chain(self.bars.iter().map(|b| b.x))
            .filter(|x| x.is_finite() && (!self.log_x || *x > 0.0))
    }

    fn y_max(&self) -> f64 {
        self.lines
            .iter()
            .flat_map(|l| l.points.iter().map(|p| p.1))
            .chain(self.bands.iter().flat_map(|b| b.points.iter().map(|p| p.2)))
            .chain(self.dots.iter().map(|d| d.y))
            .filter(|y| y.is_finite())
            .fold(0.0, f64::max)
    }

    pub fn render(&self) -> String {
        let plot_w = WIDTH - LEFT - RIGHT;
        let plot_h = HEIGHT - TOP - BOTTOM;
        let xf = |x: f64| if self.log_x { x.log10() } else { x };
        let (mut x0, mut x1) = self
            .x_values()
            .map(xf)
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
        if !x0.is_finite() {
            (x0, x1) = (0.0, 1.0);
        }
        if x1 - x0 < 1e-12 {
            x0 -= 0.5;
            x1 += 0.5;
        }
        let pad = (x1 - x0) * 0.04;
        let (x0, x1) = (x0 - pad, x1 + pad);
        let y_top = {
            let m = self.y_max();
            if m > 0.0 {
                m * 1.08
            } else {
                1.0
            }
        };
        let sx = |x: f64| LEFT + (xf(x) - x0) / (x1 - x0) * plot_w;
        let sy = |y: f64| TOP + plot_h - (y / y_top) * plot_h;

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
        );
        let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
        let _ = writeln!(
            s,
            r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
            LEFT + plot_w / 2.0,
            escape(&self.title)
        );

        // grid and y ticks
        let step = nice_step(y_top);
        let mut y = 0.0;
        while y <= y_top + 1e-12 {
            let py = sy(y);
            let _ = writeln!(
                s,
                r##"<line x1="{LEFT}" y1="{py:.2}" x2="{:.2}" y2="{py:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"##,
                LEFT + plot_w,
                LEFT - 6.0,
                py + 4.0,
                tick_label(y)
            );
            y += step;
        }
        // x ticks: decades on a log axis, otherwise a linear step
        let ticks: Vec<f64> = if self.log_x {
            let (lo, hi) = (x0.ceil() as i32, x1.floor() as i32);
            if hi >= lo {
                (lo..=hi).map(|e| 10f64.powi(e)).collect()
            } else {
                let mut xs: Vec<f64> = self.x_values().collect();
                xs.sort_by(f64::total_cmp);
                xs.dedup();
                xs
            }
        } else {
            let step = nice_step(x1 - x0);
            let mut v = (x0 / step).ceil() * step;
            let mut out = Vec::new();
            while v <= x1 {
                out.push(v);
                v += step;
            }
            out
        };
        for t in ticks {
            let px = sx(t);
            let _ = writeln!(
                s,
                r##"<line x1="{px:.2}" y1="{TOP}" x2="{px:.2}" y2="{:.2}" stroke="#f0f0f0"/><text x="{px:.2}" y="{:.2}" text-anchor="middle">{}</text>"##,
                TOP + plot_h,
                TOP + plot_h + 18.0,
                tick_label(t)
            );
        }

        if !self.bars.is_empty() {
            for b in &self.bars {
                let h = b.percent.clamp(0.0, 100.0) / 100.0 * plot_h;
                let _ = writeln!(
                    s,
                    r##"<rect x="{:.2}" y="{:.2}" width="10" height="{h:.2}" fill="#7f7f7f" fill-opacity="0.3"><title>{:.1}%</title></rect>"##,
                    sx(b.x) - 5.0,
                    TOP + plot_h - h,
                    b.percent
                );
            }
            for pct in [0.0, 25.0, 50.0, 75.0, 100.0] {
                let _ = writeln!(
                    s,
                    r##"<text x="{:.2}" y="{:.2}" fill="#7f7f7f">{pct:.0}%</text>"##,
                    LEFT + plot_w + 6.0,
                    TOP + plot_h - pct / 100.0 * plot_h + 4.0
                );
            }
        }

        for band in &self.bands {
            if band.points.is_empty() {
                continue;
            }
            let upper = band.points.iter().map(|&(x, _, hi)| format!("{:.2},{:.2}", sx(x), sy(hi)));
            let lower = band.points.iter().rev().map(|&(x, lo, _)| format!("{:.2},{:.2}", sx(x), sy(lo.max(0.0))));
            let pts: Vec<String> = upper.chain(lower).collect();
            let _ = writeln!(
                s,
                r#"<polygon points="{}" fill="{}" fill-opacity="0.18" stroke="none"/>"#,
                pts.join(" "),
                band.color
            );
        }

        for line in &self.lines {
            let pts: Vec<String> = line
                .points
                .iter()
                .filter(|p| p.1.is_finite())
                .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
                .collect();
            let dash = if line.dashed { r#" stroke-dasharray="6 4""# } else { "" };
            let _ = writeln!(
                s,
                r#"<polyline points="{}" fill="none" stroke="{}" stroke-width="2"{dash}/>"#,
                pts.join(" "),
                line.color
            );
            for p in &pts {
                let (px, py) = p.split_once(',').expect("pair");
                let _ = writeln!(s, r#"<circle cx="{px}" cy="{py}" r="3" fill="{}"/>"#, line.color);
            }
        }

        for d in &self.dots {
            let _ = writeln!(
                s,
                r##"<circle cx="{:.2}" cy="{:.2}" r="5" fill="{}" stroke="#333" stroke-width="0.5"/>"##,
                sx(d.x),
                sy(d.y),
                d.color
            );
        }

        // axes
        let _ = writeln!(
            s,
            r#"<line x1="{LEFT}" y1="{TOP}" x2="{LEFT}" y2="{b:.2}" stroke="black"/><line x1="{LEFT}" y1="{b:.2}" x2="{r:.2}" y2="{b:.2}" stroke="black"/>"#,
            b = TOP + plot_h,
            r = LEFT + plot_w
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            LEFT + plot_w / 2.0,
            HEIGHT - 18.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            s,
            r#"<text transform="translate(20,{:.2}) rotate(-90)" text-anchor="middle">{}</text>"#,
            TOP + plot_h / 2.0,
            escape(&self.y_label)
        );

        // legend
        let lx = LEFT + plot_w + 46.0;
        let mut ly = TOP + 10.0;
        for line in &self.lines {
            let _ = writeln!(
                s,
                r#"<line x1="{lx}" y1="{ly}" x2="{:.1}" y2="{ly}" stroke="{}" stroke-width="2"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 18.0,
                line.color,
                lx + 24.0,
                ly + 4.0,
                escape(&line.label)
            );
            ly += 18.0;
        }
        if let Some(label) = &self.bar_label {
            let _ = writeln!(
                s,
                r##"<rect x="{lx}" y="{:.1}" width="18" height="10" fill="#7f7f7f" fill-opacity="0.3"/><text x="{:.1}" y="{:.1}">{}</text>"##,
                ly - 5.0,
                lx + 24.0,
                ly + 4.0,
                escape(label)
            );
            ly += 18.0;
        }
        for (color, label) in &self.notes {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.1}" cy="{ly}" r="5" fill="{color}"/><text x="{:.1}" y="{:.1}">{}</text>"#,
                lx + 9.0,
                lx + 24.0,
                ly + 4.0,
                escape(label)
            );
            ly += 18.0;
        }
        s.push_str("</svg>\n");
        s
    }
}
