//! Hand-built SVG line charts with fixed coordinate precision.

use std::fmt::Write;

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 440.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 150.0;
const TOP: f64 = 40.0;
const BOTTOM: f64 = 55.0;

const PALETTE: [&str; 10] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    /// Points with a missing value split the line.
    pub points: Vec<(f64, Option<f64>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Chart {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    /// Plot x on a base-10 log axis.
    pub x_log: bool,
    pub series: Vec<Series>,
    /// Dashed horizontal reference lines.
    pub rules: Vec<f64>,
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" { "0".into() } else { s.into() }
}

fn nice_step(span: f64) -> f64 {
    let raw = span / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let unit = raw / mag;
    let nice = if unit <= 1.0 { 1.0 } else if unit <= 2.0 { 2.0 } else if unit <= 5.0 { 5.0 } else { 10.0 };
    nice * mag
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let step = nice_step(hi - lo);
    let first = (lo / step - 1e-9).ceil() as i64;
    let last = (hi / step + 1e-9).floor() as i64;
    (first..=last).map(|i| i as f64 * step).collect()
}

fn range(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        return (lo - 0.5, hi + 0.5);
    }
    let pad = 0.05 * (hi - lo);
    (lo - pad, hi + pad)
}

pub fn render(chart: &Chart) -> String {
    let fx = |x: f64| if chart.x_log { x.log10() } else { x };
    let xs = chart.series.iter().flat_map(|s| s.points.iter().map(|p| fx(p.0)));
    let (x0, x1) = {
        let (lo, hi) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
        if !lo.is_finite() { (0.0, 1.0) } else if hi - lo < 1e-12 { (lo - 0.5, hi + 0.5) } else { (lo, hi) }
    };
    let ys = chart.series.iter().flat_map(|s| s.points.iter().filter_map(|p| p.1)).chain(chart.rules.iter().copied());
    let (y0, y1) = range(ys);
    let pw = WIDTH - LEFT - RIGHT;
    let ph = HEIGHT - TOP - BOTTOM;
    let px = |x: f64| LEFT + (fx(x) - x0) / (x1 - x0) * pw;
    let py = |y: f64| TOP + (y1 - y) / (y1 - y0) * ph;

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{:.2}" y="22" text-anchor="middle" font-size="15">{}</text>"#, LEFT + pw / 2.0, escape(&chart.title));

    // axes and ticks
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1" fill="none">"#);
    let _ = writeln!(s, r#"<rect x="{LEFT:.2}" y="{TOP:.2}" width="{pw:.2}" height="{ph:.2}"/>"#);
    let _ = writeln!(s, "</g>");
    let x_ticks: Vec<(f64, String)> = if chart.x_log {
        (x0.ceil() as i64..=x1.floor() as i64).map(|e| (e as f64, format!("1e{e}"))).collect()
    } else {
        linear_ticks(x0, x1).into_iter().map(|t| (t, tick_label(t))).collect()
    };
    let _ = writeln!(s, r#"<g stroke="black" stroke-width="1">"#);
    for (t, _) in &x_ticks {
        let x = LEFT + (t - x0) / (x1 - x0) * pw;
        let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}"/>"#, TOP + ph, TOP + ph + 5.0);
    }
    let y_ticks = linear_ticks(y0, y1);
    for t in &y_ticks {
        let y = py(*t);
        let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{LEFT:.2}" y2="{y:.2}"/>"#, LEFT - 5.0);
    }
    let _ = writeln!(s, "</g>");
    let _ = writeln!(s, r#"<g fill="black">"#);
    for (t, label) in &x_ticks {
        let x = LEFT + (t - x0) / (x1 - x0) * pw;
        let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{label}</text>"#, TOP + ph + 19.0);
    }
    for t in &y_ticks {
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">{}</text>"#, LEFT - 8.0, py(*t) + 4.0, tick_label(*t));
    }
    let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, LEFT + pw / 2.0, HEIGHT - 14.0, escape(&chart.x_label));
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">{}</text>"#,
        TOP + ph / 2.0,
        TOP + ph / 2.0,
        escape(&chart.y_label)
    );
    let _ = writeln!(s, "</g>");

    // reference lines
    if !chart.rules.is_empty() {
        let _ = writeln!(s, r##"<g stroke="#444444" stroke-width="1" stroke-dasharray="6 4">"##);
        for r in &chart.rules {
            let y = py(*r);
            let _ = writeln!(s, r#"<line x1="{LEFT:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}"/>"#, LEFT + pw);
        }
        let _ = writeln!(s, "</g>");
    }

    // data
    for (i, series) in chart.series.iter().enumerate() {
        let colour = PALETTE[i % PALETTE.len()];
        let _ = writeln!(s, r#"<g stroke="{colour}" stroke-width="1.5" fill="none">"#);
        for run in series.points.split(|p| p.1.is_none()).filter(|r| !r.is_empty()) {
            let coords: Vec<String> = run.iter().map(|(x, y)| format!("{:.2},{:.2}", px(*x), py(y.unwrap()))).collect();
            let _ = writeln!(s, r#"<polyline points="{}"/>"#, coords.join(" "));
        }
        let _ = writeln!(s, "</g>");
        let ly = TOP + 10.0 + 18.0 * i as f64;
        let lx = LEFT + pw + 14.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{colour}" stroke-width="2"/>"#,
            lx + 20.0
        );
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}">{}</text>"#, lx + 26.0, ly + 4.0, escape(&series.label));
    }
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chart(rules: Vec<f64>) -> Chart {
        Chart {
            title: "t".into(),
            x_label: "nu".into(),
            y_label: "mu".into(),
            x_log: true,
            series: vec![Series { label: "A & B".into(), points: vec![(1e-3, Some(0.1)), (1.0, None), (1e3, Some(0.4))] }],
            rules,
        }
    }

    #[test]
    fn deterministic_and_escaped() {
        let a = render(&chart(vec![0.255, -0.255]));
        assert_eq!(a, render(&chart(vec![0.255, -0.255])));
        assert!(a.contains("A &amp; B"));
        assert_eq!(a.matches("stroke-dasharray").count(), 1);
        assert_eq!(a.matches("<polyline").count(), 2);
        assert!(a.contains(">1e-3<") && a.contains(">1e3<"));
    }

    #[test]
    fn ticks_are_round() {
        let labels: Vec<String> = linear_ticks(-0.3, 0.3).into_iter().map(tick_label).collect();
        assert_eq!(labels, ["-0.3", "-0.2", "-0.1", "0", "0.1", "0.2", "0.3"]);
        assert_eq!(tick_label(-0.0), "0");
        assert_eq!(tick_label(0.25), "0.25");
    }
}
