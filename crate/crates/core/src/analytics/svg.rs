use super::{HeatMap, TechniqueMap};
use crate::geometry::{HIGH_POST, LOW_POST};
use crate::technique::TechniqueName;
use std::fmt::Write as _;

const PX: f64 = 12.0;
const LEGEND_H: f64 = 70.0;
const MARGIN: f64 = 10.0;

const MIN_WIDTH: f64 = 380.0;

const HATCH_STYLE: &str = r##"fill="none" stroke="#444" stroke-width="0.8""##;

fn technique_color(t: TechniqueName) -> &'static str {
    match t {
        TechniqueName::AggressiveSet => "#d95f02",
        TechniqueName::PassiveSet => "#1b9e77",
        TechniqueName::Spread => "#7570b3",
        TechniqueName::Smother => "#e7298a",
    }
}

/// Blue (negative) through white to red (positive).
fn diverging(v: f64, max_abs: f64) -> String {
    let t = if max_abs > 0.0 { (v / max_abs).clamp(-1.0, 1.0) } else { 0.0 };
    let (r, g, b) = if t >= 0.0 {
        (255.0, 255.0 * (1.0 - t), 255.0 * (1.0 - t))
    } else {
        (255.0 * (1.0 + t), 255.0 * (1.0 + t), 255.0)
    };
    format!("#{:02x}{:02x}{:02x}", r.round() as u8, g.round() as u8, b.round() as u8)
}

struct Canvas {
    out: String,
    /// One diagonal stroke per low-confidence cell, emitted as a single path.
    hatch: String,
    x0: f64,
    y0: f64,
    width: f64,
    height: f64,
}

impl Canvas {
    fn new(grid: &super::GridSpec, title: &str) -> Self {
        let width = (grid.x_max - grid.x_min) * PX;
        let height = (grid.y_max - grid.y_min) * PX;
        let total_w = (width + 2.0 * MARGIN).max(MIN_WIDTH);
        let total_h = height + 2.0 * MARGIN + LEGEND_H + 20.0;
        let mut out = String::new();
        let _ = write!(
            out,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{total_w}" height="{total_h}" viewBox="0 0 {total_w} {total_h}" font-family="sans-serif" font-size="11">"#
        );
        let _ = write!(
            out,
            r#"<text x="{MARGIN}" y="{}" font-size="13">{title}</text>"#,
            MARGIN + 4.0
        );
        Canvas {
            out,
            hatch: String::new(),
            x0: grid.x_min,
            y0: grid.y_min,
            width,
            height,
        }
    }

    fn px(&self, x: f64, y: f64) -> (f64, f64) {
        (MARGIN + (x - self.x0) * PX, MARGIN + 20.0 + (y - self.y0) * PX)
    }

    fn cell(&mut self, cx: f64, cy: f64, size: f64, fill: &str, low_confidence: bool) {
        let (x, y) = self.px(cx - size / 2.0, cy - size / 2.0);
        let s = size * PX;
        let opacity = if low_confidence { 0.45 } else { 1.0 };
        let _ = write!(
            self.out,
            r#"<rect x="{x}" y="{y}" width="{s}" height="{s}" fill="{fill}" fill-opacity="{opacity}"/>"#
        );
        if low_confidence {
            let _ = write!(self.hatch, "M{x},{} l{s},-{s}", y + s);
        }
    }

    fn frame(&mut self) {
        if !self.hatch.is_empty() {
            let _ = write!(self.out, r#"<path class="hatch" {HATCH_STYLE} d="{}"/>"#, self.hatch);
        }
        let (x, y) = self.px(self.x0, self.y0);
        let _ = write!(
            self.out,
            r##"<rect x="{x}" y="{y}" width="{}" height="{}" fill="none" stroke="#222"/>"##,
            self.width, self.height
        );
        let (gx, gy0) = self.px(LOW_POST.x, LOW_POST.y);
        let (_, gy1) = self.px(HIGH_POST.x, HIGH_POST.y);
        if gx <= MARGIN + self.width + 1e-9 {
            let _ = write!(
                self.out,
                r##"<line x1="{gx}" y1="{gy0}" x2="{gx}" y2="{gy1}" stroke="#000" stroke-width="4"/>"##
            );
        }
    }

    fn legend_y(&self) -> f64 {
        MARGIN + 20.0 + self.height + 16.0
    }

    fn finish(mut self) -> String {
        self.out.push_str("</svg>\n");
        self.out
    }
}

fn low_conf_key(c: &mut Canvas, x: f64, y: f64) {
    let _ = write!(
        c.out,
        r##"<rect x="{x}" y="{y}" width="14" height="14" fill="#999" fill-opacity="0.45"/><path {HATCH_STYLE} d="M{x},{} l14,-14 M{x},{} l7,-7 M{},{} l7,-7"/><text x="{}" y="{}">low confidence</text>"##,
        y + 14.0,
        y + 7.0,
        x + 7.0,
        y + 14.0,
        x + 18.0,
        y + 11.0
    );
}

pub fn heatmap_svg(map: &HeatMap) -> String {
    let title = format!(
        "xSAA: {} ({})",
        map.technique.as_str(),
        if map.under_pressure { "under pressure" } else { "no pressure" }
    );
    let mut c = Canvas::new(&map.grid, &title);
    let max_abs = map
        .cells
        .iter()
        .map(|h| h.value.abs())
        .fold(0.0, f64::max);
    for h in &map.cells {
        let fill = diverging(h.value, max_abs);
        c.cell(h.x, h.y, map.grid.cell, &fill, h.low_confidence);
    }
    c.frame();

    let ly = c.legend_y();
    let steps = 11;
    for i in 0..steps {
        let v = -max_abs + 2.0 * max_abs * i as f64 / (steps - 1) as f64;
        let _ = write!(
            c.out,
            r#"<rect x="{}" y="{ly}" width="16" height="14" fill="{}"/>"#,
            MARGIN + 16.0 * i as f64,
            diverging(v, max_abs)
        );
    }
    let _ = write!(
        c.out,
        r#"<text x="{MARGIN}" y="{}">{:+.3}</text><text x="{}" y="{}" text-anchor="end">{:+.3}</text>"#,
        ly + 28.0,
        -max_abs,
        MARGIN + 16.0 * steps as f64,
        ly + 28.0,
        max_abs
    );
    low_conf_key(&mut c, MARGIN + 16.0 * steps as f64 + 24.0, ly);
    c.finish()
}

pub fn technique_map_svg(map: &TechniqueMap) -> String {
    let title = format!(
        "Optimal technique ({})",
        if map.under_pressure { "under pressure" } else { "no pressure" }
    );
    let mut c = Canvas::new(&map.grid, &title);
    for t in &map.cells {
        c.cell(t.x, t.y, map.grid.cell, technique_color(t.technique), t.low_confidence);
    }
    c.frame();
    let ly = c.legend_y();
    for (i, t) in TechniqueName::ALL.into_iter().enumerate() {
        let x = MARGIN + 115.0 * (i % 2) as f64;
        let y = ly + 18.0 * (i / 2) as f64;
        let _ = write!(
            c.out,
            r#"<rect x="{x}" y="{y}" width="14" height="14" fill="{}"/><text x="{}" y="{}">{}</text>"#,
            technique_color(t),
            x + 18.0,
            y + 11.0,
            t.as_str()
        );
    }
    low_conf_key(&mut c, MARGIN + 235.0, ly);
    c.finish()
}
