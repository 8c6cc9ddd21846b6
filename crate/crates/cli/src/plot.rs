//! Small deterministic SVG renderer: line plots (optionally log-log with a
//! slope guide) and vertex heatmaps.

use std::fmt::Write as _;
use std::path::Path;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 72.0;
const RIGHT: f64 = 24.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 56.0;

const LINE_COLORS: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub enum PlotError {
    Empty(String),
    Io(String),
}

impl std::fmt::Display for PlotError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            PlotError::Empty(what) => write!(f, "nothing to plot: {what}"),
            PlotError::Io(msg) => write!(f, "{msg}"),
        }
    }
}

impl std::error::Error for PlotError {}

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        Self {
            label: label.into(),
            points: xs.iter().copied().zip(ys.iter().copied()).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinePlot<'a> {
    pub title: &'a str,
    pub xlabel: &'a str,
    pub ylabel: &'a str,
    pub loglog: bool,
    /// Dashed reference line of this slope (log-log only), anchored at the
    /// last point of the first series.
    pub guide_slope: Option<f64>,
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(
        out,
        r#"<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#
    );
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="24" text-anchor="middle" font-size="15">{}</text>"#,
        WIDTH / 2.0,
        escape(title)
    );
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

/// Compact tick label.
fn tick_label(x: f64) -> String {
    if x == 0.0 {
        return "0".into();
    }
    let a = x.abs();
    if !(1e-3..1e5).contains(&a) {
        format!("{x:.1e}")
    } else if a >= 100.0 {
        format!("{x:.0}")
    } else {
        let s = format!("{x:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

struct Axis {
    lo: f64,
    hi: f64,
}

impl Axis {
    fn new(lo: f64, hi: f64) -> Self {
        if hi > lo {
            Self { lo, hi }
        } else {
            Self {
                lo: lo - 0.5,
                hi: hi + 0.5,
            }
        }
    }

    fn frac(&self, v: f64) -> f64 {
        (v - self.lo) / (self.hi - self.lo)
    }
}

/// Round tick positions inside the axis: whole decades on a log axis
/// (falling back to linear steps when the range spans less than two), and
/// steps of 1, 2 or 5 times a power of ten otherwise. Positions are in
/// plotted units.
fn ticks(axis: &Axis, log: bool) -> Vec<f64> {
    let (lo, hi) = (axis.lo, axis.hi);
    if log && hi - lo >= 1.0 {
        let step = ((hi - lo) / 6.0).ceil().max(1.0);
        let first = (lo / step).ceil() as i64;
        let last = (hi / step).floor() as i64;
        return (first..=last).map(|k| k as f64 * step).collect();
    }
    if log {
        // short log range: round values in data units, mapped back
        let (a, b) = (10f64.powf(lo), 10f64.powf(hi));
        return linear_ticks(a, b)
            .into_iter()
            .filter(|&v| v > 0.0)
            .map(f64::log10)
            .collect();
    }
    linear_ticks(lo, hi)
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 5.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0]
        .iter()
        .map(|m| m * mag)
        .find(|&s| s >= raw)
        .unwrap_or(10.0 * mag);
    let first = (lo / step).ceil() as i64;
    let last = (hi / step).floor() as i64;
    (first..=last).map(|k| k as f64 * step).collect()
}

pub fn line_plot(spec: &LinePlot<'_>, series: &[Series]) -> Result<String, PlotError> {
    let tf = |v: f64| if spec.loglog { v.log10() } else { v };
    let keep = |&(x, y): &(f64, f64)| {
        x.is_finite() && y.is_finite() && (!spec.loglog || (x > 0.0 && y > 0.0))
    };
    let cleaned: Vec<Vec<(f64, f64)>> = series
        .iter()
        .map(|s| {
            s.points
                .iter()
                .filter(|p| keep(p))
                .map(|&(x, y)| (tf(x), tf(y)))
                .collect()
        })
        .collect();
    if cleaned.iter().all(Vec::is_empty) {
        return Err(PlotError::Empty(spec.title.to_string()));
    }
    let all = cleaned.iter().flatten();
    let (mut x0, mut x1, mut y0, mut y1) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in all {
        x0 = x0.min(x);
        x1 = x1.max(x);
        y0 = y0.min(y);
        y1 = y1.max(y);
    }
    let (xa, ya) = (Axis::new(x0, x1), Axis::new(y0, y1));
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + xa.frac(x) * pw;
    let py = |y: f64| TOP + (1.0 - ya.frac(y)) * ph;

    let mut out = String::new();
    header(&mut out, spec.title);
    let _ = writeln!(
        out,
        r##"<clipPath id="area"><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}"/></clipPath><rect x="{LEFT}" y="{TOP}" width="{pw}" height="{ph}" fill="none" stroke="#333"/>"##
    );
    let label = |v: f64| tick_label(if spec.loglog { 10f64.powf(v) } else { v });
    for xv in ticks(&xa, spec.loglog) {
        let _ = writeln!(
            out,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{0:.1}" y2="{2:.1}" stroke="#ddd"/><text x="{0:.1}" y="{3:.1}" text-anchor="middle">{4}</text>"##,
            px(xv),
            TOP,
            TOP + ph,
            TOP + ph + 16.0,
            label(xv)
        );
    }
    for yv in ticks(&ya, spec.loglog) {
        let _ = writeln!(
            out,
            r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#ddd"/><text x="{3:.1}" y="{4:.1}" text-anchor="end">{5}</text>"##,
            LEFT,
            py(yv),
            LEFT + pw,
            LEFT - 6.0,
            py(yv) + 4.0,
            label(yv)
        );
    }
    let _ = writeln!(
        out,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{}</text>"#,
        LEFT + pw / 2.0,
        HEIGHT - 14.0,
        escape(spec.xlabel)
    );
    let _ = writeln!(
        out,
        r#"<text x="16" y="{0:.1}" text-anchor="middle" transform="rotate(-90 16 {0:.1})">{1}</text>"#,
        TOP + ph / 2.0,
        escape(spec.ylabel)
    );

    for (k, (pts, s)) in cleaned.iter().zip(series).enumerate() {
        if pts.is_empty() {
            continue;
        }
        let color = LINE_COLORS[k % LINE_COLORS.len()];
        let mut d = String::new();
        for (n, &(x, y)) in pts.iter().enumerate() {
            let _ = write!(
                d,
                "{}{:.2},{:.2}",
                if n == 0 { "M" } else { " L" },
                px(x),
                py(y)
            );
        }
        let _ = writeln!(
            out,
            r#"<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5" clip-path="url(#area)"/>"#
        );
        let ly = TOP + 14.0 + 16.0 * k as f64;
        let _ = writeln!(
            out,
            r#"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="{color}" stroke-width="2"/><text x="{3:.1}" y="{4:.1}">{5}</text>"#,
            LEFT + 10.0,
            ly,
            LEFT + 30.0,
            LEFT + 36.0,
            ly + 4.0,
            escape(&s.label)
        );
    }

    if let (true, Some(slope)) = (spec.loglog, spec.guide_slope) {
        if let Some(&(xe, ye)) = cleaned
            .iter()
            .find(|p| !p.is_empty())
            .and_then(|p| p.last())
        {
            let ys = ye - slope * (xe - xa.lo);
            let _ = writeln!(
                out,
                r##"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="#555" stroke-dasharray="6 4" clip-path="url(#area)"/>"##,
                px(xa.lo),
                py(ys),
                px(xe),
                py(ye)
            );
            let ly = TOP + 14.0 + 16.0 * series.len() as f64;
            let _ = writeln!(
                out,
                r##"<line x1="{0:.1}" y1="{1:.1}" x2="{2:.1}" y2="{1:.1}" stroke="#555" stroke-dasharray="6 4"/><text x="{3:.1}" y="{4:.1}">slope {5}</text>"##,
                LEFT + 10.0,
                ly,
                LEFT + 30.0,
                LEFT + 36.0,
                ly + 4.0,
                tick_label(slope)
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Continuous values shade from dark blue to yellow; categorical labels use
/// a fixed palette with `0` white and the top label black.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Palette {
    Continuous,
    Categorical,
}

const CATEGORIES: [&str; 10] = [
    "#ffffff", "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2",
    "#bcbd22", "#17becf",
];

fn ramp(t: f64) -> String {
    const STOPS: [[f64; 3]; 4] = [
        [48.0, 18.0, 84.0],
        [40.0, 120.0, 142.0],
        [94.0, 201.0, 98.0],
        [253.0, 231.0, 37.0],
    ];
    let t = t.clamp(0.0, 1.0) * 3.0;
    let k = (t.floor() as usize).min(2);
    let f = t - k as f64;
    let c: Vec<u8> = (0..3)
        .map(|i| (STOPS[k][i] + f * (STOPS[k + 1][i] - STOPS[k][i])).round() as u8)
        .collect();
    format!("#{:02x}{:02x}{:02x}", c[0], c[1], c[2])
}

/// Smallest positive gap between distinct sorted values, or one.
fn spacing(mut vals: Vec<f64>) -> f64 {
    vals.sort_by(f64::total_cmp);
    let gap = vals
        .windows(2)
        .map(|w| w[1] - w[0])
        .filter(|&d| d > 1e-12)
        .fold(f64::INFINITY, f64::min);
    if gap.is_finite() {
        gap
    } else {
        1.0
    }
}

/// One square per vertex at its coordinates (`[row, col]`, rows downward).
pub fn heatmap(
    title: &str,
    coords: &[[f64; 2]],
    values: &[f64],
    palette: Palette,
) -> Result<String, PlotError> {
    if coords.is_empty() || values.len() != coords.len() {
        return Err(PlotError::Empty(title.to_string()));
    }
    let rows: Vec<f64> = coords.iter().map(|c| c[0]).collect();
    let cols: Vec<f64> = coords.iter().map(|c| c[1]).collect();
    let (r0, r1) = rows
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
            (a.0.min(v), a.1.max(v))
        });
    let (c0, c1) = cols
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
            (a.0.min(v), a.1.max(v))
        });
    let (dr, dc) = (spacing(rows), spacing(cols));
    let nr = ((r1 - r0) / dr).round() + 1.0;
    let nc = ((c1 - c0) / dc).round() + 1.0;
    let avail_w = WIDTH - LEFT - RIGHT - 70.0;
    let avail_h = HEIGHT - TOP - 20.0;
    let cell = (avail_w / nc).min(avail_h / nr);
    let (vmin, vmax) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |a, &v| {
            (a.0.min(v), a.1.max(v))
        });
    let top_label = vmax.round().max(1.0);

    let mut out = String::new();
    header(&mut out, title);
    for (c, &v) in coords.iter().zip(values) {
        let x = LEFT + ((c[1] - c0) / dc).round() * cell;
        let y = TOP + ((c[0] - r0) / dr).round() * cell;
        let fill = match palette {
            Palette::Continuous => ramp(if vmax > vmin {
                (v - vmin) / (vmax - vmin)
            } else {
                0.5
            }),
            Palette::Categorical => {
                let label = v.round().max(0.0);
                if label >= top_label && label >= 10.0 {
                    "#000000".to_string()
                } else {
                    CATEGORIES[label as usize % CATEGORIES.len()].to_string()
                }
            }
        };
        let _ = writeln!(
            out,
            r#"<rect x="{x:.2}" y="{y:.2}" width="{cell:.2}" height="{cell:.2}" fill="{fill}"/>"#
        );
    }
    if palette == Palette::Continuous {
        let bx = LEFT + nc * cell + 20.0;
        let bh = nr * cell;
        for k in 0..32 {
            let t = 1.0 - k as f64 / 31.0;
            let _ = writeln!(
                out,
                r#"<rect x="{bx:.2}" y="{:.2}" width="14" height="{:.2}" fill="{}"/>"#,
                TOP + k as f64 * bh / 32.0,
                bh / 32.0 + 0.5,
                ramp(t)
            );
        }
        let _ = writeln!(
            out,
            r#"<text x="{:.2}" y="{:.2}">{}</text><text x="{:.2}" y="{:.2}">{}</text>"#,
            bx + 18.0,
            TOP + 10.0,
            tick_label(vmax),
            bx + 18.0,
            TOP + bh,
            tick_label(vmin)
        );
    }
    out.push_str("</svg>\n");
    Ok(out)
}

pub fn write_svg(path: &Path, svg: &str) -> Result<(), PlotError> {
    std::fs::write(path, svg).map_err(|e| PlotError::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(loglog: bool) -> LinePlot<'static> {
        LinePlot {
            title: "cumulative regret",
            xlabel: "step",
            ylabel: "regret",
            loglog,
            guide_slope: Some(2.0 / 3.0),
        }
    }

    #[test]
    fn ticks_are_round() {
        assert_eq!(
            linear_ticks(0.0, 1.0),
            vec![0.0, 0.2, 0.4, 0.6000000000000001, 0.8, 1.0]
        );
        assert_eq!(ticks(&Axis::new(0.0, 3.5), true), vec![0.0, 1.0, 2.0, 3.0]);
        assert!(!ticks(&Axis::new(0.3, 0.6), true).is_empty());
    }

    #[test]
    fn empty_series_is_an_error() {
        assert!(line_plot(&spec(false), &[]).is_err());
        assert!(line_plot(&spec(false), &[Series::new("a", &[], &[])]).is_err());
        // nothing positive on log axes
        assert!(line_plot(&spec(true), &[Series::new("a", &[0.0], &[1.0])]).is_err());
        assert!(heatmap("h", &[], &[], Palette::Continuous).is_err());
    }

    #[test]
    fn identical_inputs_give_identical_bytes() {
        let xs: Vec<f64> = (1..50).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.powf(0.7)).collect();
        let a = line_plot(&spec(true), &[Series::new("dsmlc", &xs, &ys)]).unwrap();
        let b = line_plot(&spec(true), &[Series::new("dsmlc", &xs, &ys)]).unwrap();
        assert_eq!(a, b);
        assert!(a.contains("stroke-dasharray"));
        assert!(a.contains("slope 0.667"));
    }

    #[test]
    fn heatmap_draws_every_vertex() {
        let coords: Vec<[f64; 2]> = (0..6).map(|v| [(v / 3) as f64, (v % 3) as f64]).collect();
        let svg = heatmap(
            "p",
            &coords,
            &[0.0, 1.0, 2.0, 10.0, 1.0, 0.0],
            Palette::Categorical,
        )
        .unwrap();
        assert_eq!(svg.matches("<rect x=").count(), 6);
        assert!(svg.contains("#000000"));
        assert_eq!(ramp(0.0), "#301254");
        assert_eq!(ramp(1.0), "#fde725");
    }
}
