//! Activation bands as SVG: one row per association, time on x.

use std::collections::BTreeSet;
use std::fmt::Write;

use playlearn_core::learn::LearnReport;
use playlearn_core::Resource;

const LEFT: f64 = 230.0;
const WIDTH: f64 = 900.0;
const ROW: f64 = 22.0;
const TOP: f64 = 40.0;

fn color(r: Resource) -> &'static str {
    match r {
        Resource::WheelsRotation => "#4e79a7",
        Resource::WheelsTranslation => "#f28e2b",
        Resource::Head => "#59a14f",
        Resource::Arm => "#e15759",
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn bands_svg(report: &LearnReport) -> String {
    let rows: Vec<(Resource, String)> = report
        .bands
        .iter()
        .map(|b| (b.resource, b.association.to_string()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let t_max = (report.samples.saturating_sub(1) as f64 * report.dt).max(1e-9);
    let plot_w = WIDTH - LEFT - 20.0;
    let x = |t: f64| LEFT + t / t_max * plot_w;
    let height = TOP + ROW * rows.len() as f64 + 40.0;

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{height}" font-family="sans-serif" font-size="12">"#
    );
    let mut title = String::from("decoded activations");
    for g in &report.tree.groups {
        let _ = write!(title, "   {}: {}", g.name, g.interval);
    }
    let _ = writeln!(
        svg,
        r#"<text x="10" y="20" font-size="14">{}</text>"#,
        escape(&title)
    );

    for (i, (res, name)) in rows.iter().enumerate() {
        let y = TOP + ROW * i as f64;
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="end">{}</text>"#,
            LEFT - 8.0,
            y + ROW * 0.7,
            escape(name)
        );
        for b in report
            .bands
            .iter()
            .filter(|b| b.resource == *res && b.association.to_string() == *name)
        {
            let x0 = x(b.t_start);
            let w = (x(b.t_end + report.dt) - x0).max(1.0);
            let _ = writeln!(
                svg,
                r#"<rect x="{x0:.1}" y="{:.1}" width="{w:.1}" height="{:.1}" fill="{}" fill-opacity="{}"><title>d {:.2} to {:.2}</title></rect>"#,
                y + 3.0,
                ROW - 6.0,
                color(*res),
                if b.kept { 0.9 } else { 0.3 },
                b.d_start,
                b.d_end
            );
        }
    }

    let axis_y = TOP + ROW * rows.len() as f64 + 5.0;
    let _ = writeln!(
        svg,
        r##"<line x1="{LEFT}" y1="{axis_y:.1}" x2="{:.1}" y2="{axis_y:.1}" stroke="#333"/>"##,
        LEFT + plot_w
    );
    let step = if t_max > 20.0 { 5.0 } else { 1.0 };
    let mut t = 0.0;
    while t <= t_max + 1e-9 {
        let _ = writeln!(
            svg,
            r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">{t}</text>"#,
            x(t),
            axis_y + 15.0
        );
        t += step;
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.1}" y="{:.1}" text-anchor="middle">time (s)</text>"#,
        LEFT + plot_w / 2.0,
        axis_y + 32.0
    );
    svg.push_str("</svg>\n");
    svg
}
