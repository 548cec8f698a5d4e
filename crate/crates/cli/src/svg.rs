//! Minimal hand-rolled SVG plots: axes, polylines, markers, cell maps.

use std::fmt::Write as _;

const W: f64 = 720.0;
const H: f64 = 480.0;
const ML: f64 = 70.0; // left margin
const MR: f64 = 20.0;
const MT: f64 = 40.0;
const MB: f64 = 55.0;

pub struct LineStyle {
    pub color: &'static str,
    pub dashed: bool,
    pub width: f64,
}

pub const SOLID_BLUE: LineStyle = LineStyle {
    color: "#1f77b4",
    dashed: false,
    width: 1.8,
};
pub const DASHED_BLUE: LineStyle = LineStyle {
    color: "#1f77b4",
    dashed: true,
    width: 1.4,
};
pub const SOLID_GREEN: LineStyle = LineStyle {
    color: "#2ca02c",
    dashed: false,
    width: 1.8,
};
pub const SOLID_ORANGE: LineStyle = LineStyle {
    color: "#ff7f0e",
    dashed: false,
    width: 1.8,
};
pub const DASHED_BLACK: LineStyle = LineStyle {
    color: "#222222",
    dashed: true,
    width: 1.4,
};
pub const SOLID_BLACK: LineStyle = LineStyle {
    color: "#222222",
    dashed: false,
    width: 1.8,
};

pub struct Plot {
    title: String,
    x_label: String,
    y_label: String,
    x_range: (f64, f64),
    y_range: (f64, f64),
    desc: String,
    body: String,
    legend: Vec<(String, &'static str, bool)>,
}

impl Plot {
    pub fn new(title: &str, x_label: &str, y_label: &str, desc: &str) -> Self {
        Plot {
            title: title.into(),
            x_label: x_label.into(),
            y_label: y_label.into(),
            x_range: (f64::INFINITY, f64::NEG_INFINITY),
            y_range: (f64::INFINITY, f64::NEG_INFINITY),
            desc: desc.into(),
            body: String::new(),
            legend: Vec::new(),
        }
    }

    pub fn include_point(&mut self, x: f64, y: f64) {
        if x.is_finite() {
            self.x_range.0 = self.x_range.0.min(x);
            self.x_range.1 = self.x_range.1.max(x);
        }
        if y.is_finite() {
            self.y_range.0 = self.y_range.0.min(y);
            self.y_range.1 = self.y_range.1.max(y);
        }
    }

    fn finite_ranges(&self) -> ((f64, f64), (f64, f64)) {
        let fix = |(lo, hi): (f64, f64)| -> (f64, f64) {
            if !lo.is_finite() || !hi.is_finite() {
                return (0.0, 1.0);
            }
            if lo == hi {
                return (lo - 0.5, hi + 0.5);
            }
            let pad = (hi - lo) * 0.04;
            (lo - pad, hi + pad)
        };
        (fix(self.x_range), fix(self.y_range))
    }

    fn sx(&self, x: f64, xr: (f64, f64)) -> f64 {
        ML + (x - xr.0) / (xr.1 - xr.0) * (W - ML - MR)
    }

    fn sy(&self, y: f64, yr: (f64, f64)) -> f64 {
        H - MB - (y - yr.0) / (yr.1 - yr.0) * (H - MT - MB)
    }

    /// Queues a polyline; coordinates are data-space. Call after all
    /// `include_point` calls so scaling is final.
    pub fn polyline(&mut self, pts: &[(f64, f64)], style: &LineStyle, label: Option<&str>) {
        if pts.len() < 2 {
            return;
        }
        let (xr, yr) = self.finite_ranges();
        let mut d = String::new();
        for (i, &(x, y)) in pts.iter().enumerate() {
            let cmd = if i == 0 { 'M' } else { 'L' };
            let _ = write!(d, "{}{:.2},{:.2} ", cmd, self.sx(x, xr), self.sy(y, yr));
        }
        let dash = if style.dashed {
            " stroke-dasharray=\"6,4\""
        } else {
            ""
        };
        let _ = writeln!(
            self.body,
            "<path d=\"{}\" fill=\"none\" stroke=\"{}\" stroke-width=\"{}\"{} />",
            d.trim_end(),
            style.color,
            style.width,
            dash
        );
        if let Some(lbl) = label {
            self.legend.push((lbl.into(), style.color, style.dashed));
        }
    }

    pub fn marker(&mut self, x: f64, y: f64, color: &str, label: Option<&str>) {
        let (xr, yr) = self.finite_ranges();
        let (px, py) = (self.sx(x, xr), self.sy(y, yr));
        let _ = writeln!(
            self.body,
            "<circle cx=\"{px:.2}\" cy=\"{py:.2}\" r=\"4\" fill=\"{color}\" stroke=\"#222\" stroke-width=\"0.8\" />"
        );
        if let Some(lbl) = label {
            let _ = writeln!(
                self.body,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#222\">{}</text>",
                px + 6.0,
                py - 6.0,
                escape(lbl)
            );
        }
    }

    /// Filled cell for grid maps; (x, y) is the cell center with data-space
    /// half-widths hx, hy.
    pub fn cell(&mut self, x: f64, y: f64, hx: f64, hy: f64, color: &str) {
        let (xr, yr) = self.finite_ranges();
        let x0 = self.sx(x - hx, xr);
        let x1 = self.sx(x + hx, xr);
        let y0 = self.sy(y + hy, yr);
        let y1 = self.sy(y - hy, yr);
        let _ = writeln!(
            self.body,
            "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"{}\" stroke=\"none\" />",
            x0,
            y0,
            x1 - x0,
            y1 - y0,
            color
        );
    }

    pub fn legend_entry(&mut self, label: &str, color: &'static str, dashed: bool) {
        self.legend.push((label.into(), color, dashed));
    }

    pub fn render(&self) -> String {
        let (xr, yr) = self.finite_ranges();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{W}\" height=\"{H}\" viewBox=\"0 0 {W} {H}\">"
        );
        let _ = writeln!(out, "<desc>{}</desc>", escape(&self.desc));
        let _ = writeln!(
            out,
            "<rect x=\"0\" y=\"0\" width=\"{W}\" height=\"{H}\" fill=\"white\" />"
        );
        // axes box
        let _ = writeln!(
            out,
            "<rect x=\"{ML}\" y=\"{MT}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"#333\" stroke-width=\"1\" />",
            W - ML - MR,
            H - MT - MB
        );
        // ticks: 5 per axis
        for k in 0..=5 {
            let fx = xr.0 + (xr.1 - xr.0) * k as f64 / 5.0;
            let px = self.sx(fx, xr);
            let _ = writeln!(
                out,
                "<line x1=\"{px:.2}\" y1=\"{:.2}\" x2=\"{px:.2}\" y2=\"{:.2}\" stroke=\"#333\" />",
                H - MB,
                H - MB + 5.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{px:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"middle\" fill=\"#222\">{}</text>",
                H - MB + 18.0,
                tick_label(fx)
            );
            let fy = yr.0 + (yr.1 - yr.0) * k as f64 / 5.0;
            let py = self.sy(fy, yr);
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{py:.2}\" x2=\"{ML}\" y2=\"{py:.2}\" stroke=\"#333\" />",
                ML - 5.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" text-anchor=\"end\" fill=\"#222\">{}</text>",
                ML - 8.0,
                py + 4.0,
                tick_label(fy)
            );
        }
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"22\" font-size=\"14\" text-anchor=\"middle\" fill=\"#111\">{}</text>",
            (W + ML - MR) / 2.0,
            escape(&self.title)
        );
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" fill=\"#111\">{}</text>",
            (W + ML - MR) / 2.0,
            H - 12.0,
            escape(&self.x_label)
        );
        let _ = writeln!(
            out,
            "<text x=\"16\" y=\"{:.2}\" font-size=\"12\" text-anchor=\"middle\" transform=\"rotate(-90 16 {:.2})\" fill=\"#111\">{}</text>",
            (H + MT - MB) / 2.0,
            (H + MT - MB) / 2.0,
            escape(&self.y_label)
        );
        out.push_str(&self.body);
        // legend in the top-right corner
        for (i, (label, color, dashed)) in self.legend.iter().enumerate() {
            let y = MT + 16.0 + 16.0 * i as f64;
            let dash = if *dashed {
                " stroke-dasharray=\"6,4\""
            } else {
                ""
            };
            let _ = writeln!(
                out,
                "<line x1=\"{:.2}\" y1=\"{y:.2}\" x2=\"{:.2}\" y2=\"{y:.2}\" stroke=\"{color}\" stroke-width=\"2\"{dash} />",
                W - MR - 150.0,
                W - MR - 120.0
            );
            let _ = writeln!(
                out,
                "<text x=\"{:.2}\" y=\"{:.2}\" font-size=\"11\" fill=\"#222\">{}</text>",
                W - MR - 114.0,
                y + 4.0,
                escape(label)
            );
        }
        out.push_str("</svg>\n");
        out
    }
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 0.01 && v.abs() < 10000.0 {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        format!("{v:.2e}")
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
