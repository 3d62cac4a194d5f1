//! Minimal SVG line plots: stacked panels sharing the rank axis.

use std::fmt::Write as _;

pub struct Series {
    pub name: String,
    pub values: Vec<f64>,
}

pub struct Panel {
    pub y_label: String,
    pub log_y: bool,
    pub series: Vec<Series>,
}

const WIDTH: f64 = 720.0;
const PANEL_HEIGHT: f64 = 260.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 150.0;
const MARGIN_T: f64 = 30.0;
const GAP: f64 = 40.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"];

fn transform(v: f64, log: bool) -> Option<f64> {
    if !v.is_finite() {
        return None;
    }
    if log {
        (v > 0.0).then(|| v.log10())
    } else {
        Some(v)
    }
}

/// Renders the panels top to bottom against x = 1..len.
pub fn render(title: &str, x_label: &str, panels: &[Panel]) -> String {
    let height = MARGIN_T + panels.len() as f64 * (PANEL_HEIGHT + GAP) + 20.0;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="11">"#
    );
    let _ = writeln!(s, r#"<text x="{}" y="18" text-anchor="middle" font-size="14">{}</text>"#, WIDTH / 2.0, escape(title));
    let plot_w = WIDTH - MARGIN_L - MARGIN_R;
    for (p, panel) in panels.iter().enumerate() {
        let top = MARGIN_T + p as f64 * (PANEL_HEIGHT + GAP);
        let len = panel.series.iter().map(|s| s.values.len()).max().unwrap_or(0);
        let ys: Vec<f64> = panel
            .series
            .iter()
            .flat_map(|s| s.values.iter().filter_map(|&v| transform(v, panel.log_y)))
            .collect();
        let (mut lo, mut hi) = ys.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &v| (a.min(v), b.max(v)));
        if !lo.is_finite() {
            lo = 0.0;
            hi = 1.0;
        }
        if hi - lo < 1e-12 {
            lo -= 0.5;
            hi += 0.5;
        }
        let x_of = |i: usize| MARGIN_L + if len > 1 { i as f64 / (len - 1) as f64 * plot_w } else { plot_w / 2.0 };
        let y_of = |v: f64| top + PANEL_HEIGHT - (v - lo) / (hi - lo) * PANEL_HEIGHT;

        let _ = writeln!(
            s,
            r#"<rect x="{MARGIN_L}" y="{top}" width="{plot_w}" height="{PANEL_HEIGHT}" fill="none" stroke="black"/>"#
        );
        for k in 0..=4 {
            let v = lo + (hi - lo) * k as f64 / 4.0;
            let y = y_of(v);
            let label = if panel.log_y { format!("1e{v:.1}") } else { format!("{v:.3}") };
            let _ = writeln!(s, r#"<text x="{}" y="{}" text-anchor="end">{label}</text>"#, MARGIN_L - 4.0, y + 4.0);
        }
        let _ = writeln!(
            s,
            r#"<text transform="translate(14,{}) rotate(-90)" text-anchor="middle">{}</text>"#,
            top + PANEL_HEIGHT / 2.0,
            escape(&panel.y_label)
        );
        for k in 0..=4 {
            let i = if len > 1 { (len - 1) * k / 4 } else { 0 };
            let _ = writeln!(
                s,
                r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
                x_of(i),
                top + PANEL_HEIGHT + 14.0,
                i + 1
            );
        }
        for (j, series) in panel.series.iter().enumerate() {
            let color = COLORS[j % COLORS.len()];
            let mut path = String::new();
            let mut pen_down = false;
            for (i, &v) in series.values.iter().enumerate() {
                match transform(v, panel.log_y) {
                    Some(t) => {
                        let _ = write!(path, "{}{:.2},{:.2} ", if pen_down { "L" } else { "M" }, x_of(i), y_of(t));
                        pen_down = true;
                    }
                    None => pen_down = false,
                }
            }
            let _ = writeln!(s, r#"<path d="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#, path.trim_end());
            let ly = top + 14.0 + 16.0 * j as f64;
            let lx = WIDTH - MARGIN_R + 10.0;
            let _ = writeln!(s, r#"<line x1="{lx}" y1="{}" x2="{}" y2="{}" stroke="{color}" stroke-width="2"/>"#, ly - 4.0, lx + 18.0, ly - 4.0);
            let _ = writeln!(s, r#"<text x="{}" y="{ly}">{}</text>"#, lx + 22.0, escape(&series.name));
        }
    }
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#,
        MARGIN_L + plot_w / 2.0,
        height - 4.0,
        escape(x_label)
    );
    s.push_str("</svg>\n");
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn renders_all_series() {
        let panels = vec![
            Panel {
                y_label: "p".into(),
                log_y: false,
                series: vec![Series { name: "p<tf>".into(), values: vec![1.0, 0.5, 0.25] }],
            },
            Panel {
                y_label: "|s|".into(),
                log_y: true,
                series: vec![
                    Series { name: "a".into(), values: vec![1e-3, 0.0, 1.0] },
                    Series { name: "b".into(), values: vec![f64::NAN, 2.0, 3.0] },
                ],
            },
        ];
        let svg = render("t", "rank", &panels);
        assert!(svg.starts_with("<svg"));
        assert_eq!(svg.matches("<path").count(), 3);
        assert!(svg.contains("p&lt;tf&gt;"));
        assert!(svg.trim_end().ends_with("</svg>"));
    }
}
