//! Static SVG line charts with mean ± one standard deviation bands.
//!
//! Output depends only on the input traces, so identical CSVs render to
//! identical bytes.

use std::fmt::Write as _;
use std::str::FromStr;

use crate::harness::{AggregatePoint, AggregateTrace, MeanStd};

const PANEL_WIDTH: f64 = 440.0;
const PANEL_HEIGHT: f64 = 320.0;
const MARGIN_LEFT: f64 = 72.0;
const MARGIN_RIGHT: f64 = 16.0;
const MARGIN_TOP: f64 = 36.0;
const MARGIN_BOTTOM: f64 = 48.0;
const LEGEND_ROW: f64 = 18.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f",
    "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Metric {
    Regret,
    Switches,
    RegretWithCost,
}

impl Metric {
    pub const ALL: [Metric; 3] = [Metric::Regret, Metric::Switches, Metric::RegretWithCost];

    pub fn title(self) -> &'static str {
        match self {
            Metric::Regret => "Pseudo-regret",
            Metric::Switches => "Number of switches",
            Metric::RegretWithCost => "Pseudo-regret with switching cost",
        }
    }

    pub fn of(self, p: &AggregatePoint) -> MeanStd {
        match self {
            Metric::Regret => p.regret,
            Metric::Switches => p.switches,
            Metric::RegretWithCost => p.regret_with_cost,
        }
    }
}

impl FromStr for Metric {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "regret" => Ok(Metric::Regret),
            "switches" => Ok(Metric::Switches),
            "regret_with_cost" => Ok(Metric::RegretWithCost),
            other => Err(format!("unknown metric `{other}`")),
        }
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Step of roughly `span / 5` from {1, 2, 5} x 10^k.
fn nice_step(span: f64) -> f64 {
    if span.is_nan() || span <= 0.0 {
        return 1.0;
    }
    let raw = span / 5.0;
    let magnitude = 10f64.powf(raw.log10().floor());
    let fraction = raw / magnitude;
    let nice = if fraction <= 1.0 {
        1.0
    } else if fraction <= 2.0 {
        2.0
    } else if fraction <= 5.0 {
        5.0
    } else {
        10.0
    };
    nice * magnitude
}

fn tick_label(value: f64, step: f64) -> String {
    let decimals = if step >= 1.0 {
        0
    } else {
        (-step.log10()).ceil() as usize
    };
    let text = format!("{value:.decimals$}");
    if text.starts_with('-') && text[1..].chars().all(|c| c == '0' || c == '.') {
        text[1..].to_string()
    } else {
        text
    }
}

struct Axis {
    lo: f64,
    hi: f64,
    step: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64) -> Self {
        let (lo, hi) = if hi > lo { (lo, hi) } else { (lo, lo + 1.0) };
        let step = nice_step(hi - lo);
        Self {
            lo: (lo / step).floor() * step,
            hi: (hi / step).ceil() * step,
            step,
        }
    }

    fn ticks(&self) -> Vec<f64> {
        let count = ((self.hi - self.lo) / self.step).round() as i64;
        (0..=count)
            .map(|i| self.lo + i as f64 * self.step)
            .collect()
    }

    fn scale(&self, v: f64, from: f64, to: f64) -> f64 {
        from + (v - self.lo) / (self.hi - self.lo) * (to - from)
    }
}

fn panel(svg: &mut String, traces: &[AggregateTrace], metric: Metric, x0: f64, title: &str) {
    let left = x0 + MARGIN_LEFT;
    let right = x0 + PANEL_WIDTH - MARGIN_RIGHT;
    let top = MARGIN_TOP;
    let bottom = PANEL_HEIGHT - MARGIN_BOTTOM;

    let t_max = traces
        .iter()
        .flat_map(|tr| tr.points.iter().map(|p| p.t))
        .max()
        .unwrap_or(1) as f64;
    let (mut y_lo, mut y_hi) = (0.0f64, 0.0f64);
    for p in traces.iter().flat_map(|tr| &tr.points) {
        let m = metric.of(p);
        y_lo = y_lo.min(m.mean - m.std);
        y_hi = y_hi.max(m.mean + m.std);
    }
    let x_axis = Axis::new(0.0, t_max);
    let y_axis = Axis::new(y_lo, y_hi);
    let sx = |t: f64| x_axis.scale(t, left, right);
    let sy = |v: f64| y_axis.scale(v, bottom, top);

    writeln!(
        svg,
        r#"<text x="{:.2}" y="20" text-anchor="middle" font-size="14">{}</text>"#,
        (left + right) / 2.0,
        escape(title)
    )
    .unwrap();
    for t in x_axis.ticks() {
        let x = sx(t);
        writeln!(
            svg,
            r##"<line x1="{x:.2}" y1="{top:.2}" x2="{x:.2}" y2="{bottom:.2}" stroke="#e0e0e0"/><text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{}</text>"##,
            bottom + 14.0,
            tick_label(t, x_axis.step)
        )
        .unwrap();
    }
    for v in y_axis.ticks() {
        let y = sy(v);
        writeln!(
            svg,
            r##"<line x1="{left:.2}" y1="{y:.2}" x2="{right:.2}" y2="{y:.2}" stroke="#e0e0e0"/><text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{}</text>"##,
            left - 6.0,
            y + 3.5,
            tick_label(v, y_axis.step)
        )
        .unwrap();
    }
    writeln!(
        svg,
        r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
        right - left,
        bottom - top
    )
    .unwrap();
    writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">t</text>"#,
        (left + right) / 2.0,
        bottom + 32.0
    )
    .unwrap();

    for (i, trace) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut band = String::new();
        for p in &trace.points {
            let m = metric.of(p);
            write!(band, "{:.2},{:.2} ", sx(p.t as f64), sy(m.mean + m.std)).unwrap();
        }
        for p in trace.points.iter().rev() {
            let m = metric.of(p);
            write!(band, "{:.2},{:.2} ", sx(p.t as f64), sy(m.mean - m.std)).unwrap();
        }
        writeln!(
            svg,
            r#"<polygon points="{}" fill="{color}" fill-opacity="0.2" stroke="none"/>"#,
            band.trim_end()
        )
        .unwrap();
        let line: Vec<String> = trace
            .points
            .iter()
            .map(|p| format!("{:.2},{:.2}", sx(p.t as f64), sy(metric.of(p).mean)))
            .collect();
        writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        )
        .unwrap();
    }
}

/// Renders one panel per metric, side by side, with a shared legend.
pub fn render_svg(experiment: &str, traces: &[AggregateTrace], metrics: &[Metric]) -> String {
    let width = PANEL_WIDTH * metrics.len().max(1) as f64;
    let legend_top = PANEL_HEIGHT + 8.0;
    let height = legend_top + LEGEND_ROW * traces.len() as f64 + 8.0;
    let mut svg = String::new();
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width:.0}" height="{height:.0}" viewBox="0 0 {width:.0} {height:.0}" font-family="sans-serif">"#
    )
    .unwrap();
    writeln!(svg, "<title>{}</title>", escape(experiment)).unwrap();
    writeln!(
        svg,
        r#"<rect width="{width:.0}" height="{height:.0}" fill="white"/>"#
    )
    .unwrap();
    for (i, &metric) in metrics.iter().enumerate() {
        panel(
            &mut svg,
            traces,
            metric,
            i as f64 * PANEL_WIDTH,
            metric.title(),
        );
    }
    for (i, trace) in traces.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let y = legend_top + LEGEND_ROW * i as f64 + 9.0;
        writeln!(
            svg,
            r#"<line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="3"/><text x="{:.2}" y="{:.2}" font-size="11">{}</text>"#,
            MARGIN_LEFT,
            MARGIN_LEFT + 24.0,
            MARGIN_LEFT + 30.0,
            y + 4.0,
            escape(&trace.algorithm)
        )
        .unwrap();
    }
    svg.push_str("</svg>\n");
    svg
}
