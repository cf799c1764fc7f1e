//! Static SVG plots (scatters, polylines, filled bins, segments) built from
//! parsed CSV rows. No external plotting dependency.

pub struct SvgPlot {
    width: f64,
    height: f64,
    margin: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
    title: String,
    body: Vec<String>,
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

impl SvgPlot {
    pub fn new(title: &str, x_range: (f64, f64), y_range: (f64, f64)) -> Self {
        let pad_x = (x_range.1 - x_range.0).max(1e-12) * 0.05;
        let pad_y = (y_range.1 - y_range.0).max(1e-12) * 0.05;
        SvgPlot {
            width: 640.0,
            height: 440.0,
            margin: 50.0,
            x_range: (x_range.0 - pad_x, x_range.1 + pad_x),
            y_range: (y_range.0 - pad_y, y_range.1 + pad_y),
            title: title.to_string(),
            body: Vec::new(),
        }
    }

    /// Range helper: (min, max) of a slice with a fallback for empty input.
    pub fn range(values: &[f64]) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in values {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        if lo > hi {
            (0.0, 1.0)
        } else {
            (lo, hi)
        }
    }

    fn px(&self, x: f64) -> f64 {
        let (lo, hi) = self.x_range;
        self.margin + (x - lo) / (hi - lo) * (self.width - 2.0 * self.margin)
    }

    fn py(&self, y: f64) -> f64 {
        let (lo, hi) = self.y_range;
        self.height - self.margin - (y - lo) / (hi - lo) * (self.height - 2.0 * self.margin)
    }

    pub fn scatter(&mut self, pts: &[(f64, f64)], color: &str, radius: f64) {
        for &(x, y) in pts {
            self.body.push(format!(
                r#"<circle cx="{:.2}" cy="{:.2}" r="{radius}" fill="{color}" fill-opacity="0.55"/>"#,
                self.px(x),
                self.py(y)
            ));
        }
    }

    pub fn polyline(&mut self, pts: &[(f64, f64)], color: &str, width: f64) {
        let path: Vec<String> =
            pts.iter().map(|&(x, y)| format!("{:.2},{:.2}", self.px(x), self.py(y))).collect();
        self.body.push(format!(
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="{width}"/>"#,
            path.join(" ")
        ));
    }

    pub fn segments(&mut self, segs: &[((f64, f64), (f64, f64))], color: &str, width: f64) {
        for &((x1, y1), (x2, y2)) in segs {
            self.body.push(format!(
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="{width}" stroke-opacity="0.6"/>"#,
                self.px(x1),
                self.py(y1),
                self.px(x2),
                self.py(y2)
            ));
        }
    }

    /// Filled histogram bins: (lo, hi, height) triples.
    pub fn bars(&mut self, bins: &[(f64, f64, f64)], color: &str) {
        for &(lo, hi, h) in bins {
            let x = self.px(lo);
            let w = (self.px(hi) - x).max(0.5);
            let y = self.py(h);
            let base = self.py(0.0);
            self.body.push(format!(
                r#"<rect x="{x:.2}" y="{y:.2}" width="{w:.2}" height="{:.2}" fill="{color}" fill-opacity="0.45"/>"#,
                (base - y).max(0.0)
            ));
        }
    }

    pub fn diagonal(&mut self, color: &str) {
        let lo = self.x_range.0.max(self.y_range.0);
        let hi = self.x_range.1.min(self.y_range.1);
        self.polyline(&[(lo, lo), (hi, hi)], color, 1.0);
    }

    pub fn label(&mut self, x: f64, y: f64, text: &str, color: &str) {
        self.body.push(format!(
            r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="{color}">{}</text>"#,
            self.px(x),
            self.py(y),
            esc(text)
        ));
    }

    pub fn finish(self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{}" viewBox="0 0 {} {}">"#,
            self.width, self.height, self.width, self.height
        ));
        out.push('\n');
        out.push_str(&format!(
            r#"<rect width="{}" height="{}" fill="white"/>"#,
            self.width, self.height
        ));
        out.push('\n');
        // frame
        out.push_str(&format!(
            r##"<rect x="{m}" y="{m}" width="{w}" height="{h}" fill="none" stroke="#444" stroke-width="1"/>"##,
            m = self.margin,
            w = self.width - 2.0 * self.margin,
            h = self.height - 2.0 * self.margin
        ));
        out.push('\n');
        // ticks
        for k in 0..=4 {
            let fx = self.x_range.0 + (self.x_range.1 - self.x_range.0) * k as f64 / 4.0;
            let fy = self.y_range.0 + (self.y_range.1 - self.y_range.0) * k as f64 / 4.0;
            let px = self.px(fx);
            let py = self.py(fy);
            out.push_str(&format!(
                r##"<text x="{px:.1}" y="{:.1}" font-size="10" fill="#333" text-anchor="middle">{fx:.2}</text>"##,
                self.height - self.margin + 16.0
            ));
            out.push_str(&format!(
                r##"<text x="{:.1}" y="{py:.1}" font-size="10" fill="#333" text-anchor="end">{fy:.2}</text>"##,
                self.margin - 6.0
            ));
            out.push('\n');
        }
        out.push_str(&format!(
            r##"<text x="{:.1}" y="22" font-size="14" fill="#111" text-anchor="middle">{}</text>"##,
            self.width / 2.0,
            esc(&self.title)
        ));
        out.push('\n');
        for el in &self.body {
            out.push_str(el);
            out.push('\n');
        }
        out.push_str("</svg>\n");
        out
    }
}
