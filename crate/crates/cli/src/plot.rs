//! Minimal SVG line plots of interface error against iterations and time.

use std::fmt::Write;

use crate::experiment::ExperimentOutcome;

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];
const W: f64 = 420.0;
const H: f64 = 300.0;
const PAD: f64 = 48.0;

struct Series<'a> {
    name: &'a str,
    points: Vec<(f64, f64)>,
}

fn panel(svg: &mut String, x0: f64, title: &str, xlabel: &str, series: &[Series]) {
    let pts = series.iter().flat_map(|s| s.points.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) = (
        f64::INFINITY,
        f64::NEG_INFINITY,
        f64::INFINITY,
        f64::NEG_INFINITY,
    );
    for &(x, y) in pts {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    if !xmin.is_finite() {
        (xmin, xmax, ymin, ymax) = (0.0, 1.0, -1.0, 0.0);
    }
    if xmax <= xmin {
        xmax = xmin + 1.0;
    }
    (ymin, ymax) = (ymin.floor(), ymax.ceil().max(ymin.floor() + 1.0));
    let sx = |x: f64| x0 + PAD + (x - xmin) / (xmax - xmin) * (W - 2.0 * PAD);
    let sy = |y: f64| H - PAD - (y - ymin) / (ymax - ymin) * (H - 2.0 * PAD);

    let _ = writeln!(
        svg,
        r#"<rect x="{}" y="{PAD}" width="{}" height="{}" fill="none" stroke="black"/>"#,
        x0 + PAD,
        W - 2.0 * PAD,
        H - 2.0 * PAD
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="20" text-anchor="middle">{title}</text>"#,
        x0 + W / 2.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="{}" y="{}" text-anchor="middle">{xlabel}</text>"#,
        x0 + W / 2.0,
        H - 10.0
    );
    let mut e = ymin as i64;
    while e <= ymax as i64 {
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" text-anchor="end" font-size="10">1e{e}</text>"#,
            x0 + PAD - 4.0,
            sy(e as f64) + 3.0
        );
        e += 1.max((ymax - ymin) as i64 / 8);
    }
    for (i, s) in series.iter().enumerate() {
        let color = COLORS[i % COLORS.len()];
        let path: Vec<String> = s
            .points
            .iter()
            .map(|&(x, y)| format!("{:.2},{:.2}", sx(x), sy(y)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline fill="none" stroke="{color}" points="{}"/>"#,
            path.join(" ")
        );
        let _ = writeln!(
            svg,
            r#"<text x="{}" y="{}" fill="{color}" font-size="11">{}</text>"#,
            x0 + W - PAD - 70.0,
            PAD + 14.0 * (i as f64 + 1.0),
            s.name
        );
    }
}

/// Two panels: log10 interface error against iteration and against wall time.
pub fn convergence_svg(outcome: &ExperimentOutcome) -> String {
    let positive = |e: f64| e > 0.0 && e.is_finite();
    let by_k: Vec<Series> = outcome
        .runs
        .iter()
        .map(|r| Series {
            name: r.method.name(),
            points: r
                .records
                .iter()
                .filter(|x| positive(x.interface_error))
                .map(|x| ((x.k + 1) as f64, x.interface_error.log10()))
                .collect(),
        })
        .collect();
    let by_t: Vec<Series> = outcome
        .runs
        .iter()
        .map(|r| Series {
            name: r.method.name(),
            points: r
                .records
                .iter()
                .filter(|x| positive(x.interface_error))
                .map(|x| (x.wall_time, x.interface_error.log10()))
                .collect(),
        })
        .collect();
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{H}" font-family="sans-serif" font-size="12">"#,
        2.0 * W
    );
    panel(&mut svg, 0.0, "interface error", "iteration k", &by_k);
    panel(&mut svg, W, "interface error", "wall time [s]", &by_t);
    svg.push_str("</svg>\n");
    svg
}
