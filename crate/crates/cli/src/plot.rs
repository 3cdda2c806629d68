//! Learning curves as standalone SVG: mean best fitness per iteration with a
//! band of one standard deviation across seeds.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::output::SeedRow;

#[derive(Debug, Clone, PartialEq)]
pub struct SeriesStats {
    pub label: String,
    pub iterations: Vec<usize>,
    pub mean: Vec<f64>,
    /// Population standard deviation across seeds.
    pub std: Vec<f64>,
}

impl SeriesStats {
    pub fn from_rows(label: impl Into<String>, rows: &[SeedRow]) -> Self {
        let mut by_iter: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
        for r in rows {
            by_iter.entry(r.row.iteration).or_default().push(r.row.best_fitness);
        }
        let mut out = Self { label: label.into(), iterations: Vec::new(), mean: Vec::new(), std: Vec::new() };
        for (it, values) in by_iter {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            out.iterations.push(it);
            out.mean.push(mean);
            out.std.push(var.sqrt());
        }
        out
    }
}

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

/// Maps data coordinates onto the plot area.
#[derive(Debug, Clone, Copy)]
pub struct Frame {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Frame {
    pub fn fit(series: &[SeriesStats]) -> Self {
        let mut f = Frame { x_min: f64::MAX, x_max: f64::MIN, y_min: f64::MAX, y_max: f64::MIN };
        for s in series {
            for ((&it, &m), &sd) in s.iterations.iter().zip(&s.mean).zip(&s.std) {
                f.x_min = f.x_min.min(it as f64);
                f.x_max = f.x_max.max(it as f64);
                f.y_min = f.y_min.min(m - sd);
                f.y_max = f.y_max.max(m + sd);
            }
        }
        if f.x_min > f.x_max {
            return Frame { x_min: 0.0, x_max: 1.0, y_min: 0.0, y_max: 1.0 };
        }
        if f.x_max == f.x_min {
            f.x_max = f.x_min + 1.0;
        }
        let pad = if f.y_max > f.y_min { 0.05 * (f.y_max - f.y_min) } else { 0.05 };
        f.y_min -= pad;
        f.y_max += pad;
        f
    }

    pub fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x_min) / (self.x_max - self.x_min) * (WIDTH - LEFT - RIGHT)
    }

    pub fn py(&self, y: f64) -> f64 {
        HEIGHT - BOTTOM - (y - self.y_min) / (self.y_max - self.y_min) * (HEIGHT - TOP - BOTTOM)
    }
}

pub fn render_svg(series: &[SeriesStats], title: &str) -> String {
    let frame = Frame::fit(series);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ =
        writeln!(s, r#"<text x="{}" y="24" text-anchor="middle" font-size="15">{}</text>"#, WIDTH / 2.0, escape(title));
    axes(&mut s, &frame);

    for (i, ser) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let upper = ser.iterations.iter().zip(ser.mean.iter().zip(&ser.std)).map(|(&it, (m, sd))| (it, m + sd));
        let lower = ser.iterations.iter().zip(ser.mean.iter().zip(&ser.std)).map(|(&it, (m, sd))| (it, m - sd));
        let band: Vec<(usize, f64)> = upper.chain(lower.rev()).collect();
        let _ = writeln!(
            s,
            r#"<polygon class="band" fill="{color}" fill-opacity="0.2" stroke="none" points="{}"/>"#,
            points(&frame, band.into_iter())
        );
        let _ = writeln!(
            s,
            r#"<polyline class="mean" fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
            points(&frame, ser.iterations.iter().copied().zip(ser.mean.iter().copied()))
        );
        let ly = TOP + 16.0 + 18.0 * i as f64;
        let lx = WIDTH - RIGHT - 150.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx}" y1="{ly}" x2="{}" y2="{ly}" stroke="{color}" stroke-width="2"/><text x="{}" y="{}">{}</text>"#,
            lx + 20.0,
            lx + 26.0,
            ly + 4.0,
            escape(&ser.label)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn axes(s: &mut String, f: &Frame) {
    let (x0, x1) = (LEFT, WIDTH - RIGHT);
    let (y0, y1) = (HEIGHT - BOTTOM, TOP);
    let _ = writeln!(s, r#"<path d="M{x0},{y1} L{x0},{y0} L{x1},{y0}" fill="none" stroke="black"/>"#);
    for k in 0..=5 {
        let t = k as f64 / 5.0;
        let xv = f.x_min + t * (f.x_max - f.x_min);
        let px = f.px(xv);
        let _ = writeln!(
            s,
            r#"<line x1="{px:.2}" y1="{y0}" x2="{px:.2}" y2="{}" stroke="black"/><text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#,
            y0 + 5.0,
            y0 + 18.0,
            xv.round()
        );
        let yv = f.y_min + t * (f.y_max - f.y_min);
        let py = f.py(yv);
        let _ = writeln!(
            s,
            r#"<line x1="{}" y1="{py:.2}" x2="{x0}" y2="{py:.2}" stroke="black"/><text x="{}" y="{:.2}" text-anchor="end">{yv:.3}</text>"#,
            x0 - 5.0,
            x0 - 8.0,
            py + 4.0
        );
    }
    let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">iteration</text>"#, (x0 + x1) / 2.0, HEIGHT - 15.0);
    let _ = writeln!(
        s,
        r#"<text x="18" y="{0}" text-anchor="middle" transform="rotate(-90 18 {0})">best fitness</text>"#,
        (y0 + y1) / 2.0
    );
}

fn points(f: &Frame, pts: impl Iterator<Item = (usize, f64)>) -> String {
    let parts: Vec<String> = pts.map(|(x, y)| format!("{:.2},{:.2}", f.px(x as f64), f.py(y))).collect();
    parts.join(" ")
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use selfmod_core::HistoryRow;

    fn row(seed: u64, iteration: usize, best: f64) -> SeedRow {
        SeedRow {
            seed,
            row: HistoryRow {
                iteration,
                total_env_steps: 0,
                parent_fitness: 0.0,
                child_fitness: 0.0,
                best_fitness: best,
                nonempty_buckets: 1,
                range_min: 0.0,
                range_max: best,
            },
        }
    }

    #[test]
    fn stats_group_by_iteration() {
        let rows = vec![row(0, 0, 0.2), row(1, 0, 0.4), row(0, 1, 0.5), row(1, 1, 0.5)];
        let s = SeriesStats::from_rows("x", &rows);
        assert_eq!(s.iterations, vec![0, 1]);
        assert!((s.mean[0] - 0.3).abs() < 1e-15);
        assert!((s.std[0] - 0.1).abs() < 1e-15);
        assert_eq!(s.std[1], 0.0);
    }

    #[test]
    fn flat_series_has_padded_frame() {
        let s = SeriesStats::from_rows("x", &[row(0, 0, 0.7), row(0, 1, 0.7)]);
        let f = Frame::fit(&[s]);
        assert!(f.y_min < 0.7 && f.y_max > 0.7);
        assert_eq!(f.px(0.0), LEFT);
    }

    #[test]
    fn titles_are_escaped() {
        let svg = render_svg(&[], "a<b");
        assert!(svg.contains("a&lt;b"));
    }
}
