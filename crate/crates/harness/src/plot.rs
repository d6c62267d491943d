//! Self-contained SVG of a run: obstacles, disturbance patches, start and
//! goal, executed trajectory, per-cycle reach boxes and repair markers.

use std::fmt::Write as _;
use std::path::Path;

use rtdrax::{Box2, ConvexPolygon};

use crate::scenario::Scenario;
use crate::sim::{Action, RunResult};

const PX_PER_M: f64 = 80.0;
const MARGIN_M: f64 = 0.5;

struct View {
    min: [f64; 2],
    max: [f64; 2],
}

impl View {
    fn x(&self, x: f64) -> f64 {
        (x - self.min[0]) * PX_PER_M
    }

    /// SVG y grows downwards.
    fn y(&self, y: f64) -> f64 {
        (self.max[1] - y) * PX_PER_M
    }

    fn pt(&self, p: [f64; 2]) -> String {
        format!("{:.2},{:.2}", self.x(p[0]), self.y(p[1]))
    }
}

fn polygon_points(view: &View, poly: &ConvexPolygon) -> String {
    poly.vertices()
        .iter()
        .map(|v| view.pt(*v))
        .collect::<Vec<_>>()
        .join(" ")
}

fn star(view: &View, c: [f64; 2], r: f64) -> String {
    (0..10)
        .map(|i| {
            let a = std::f64::consts::FRAC_PI_2 + i as f64 * std::f64::consts::PI / 5.0;
            let rad = if i % 2 == 0 { r } else { 0.4 * r };
            view.pt([c[0] + rad * a.cos(), c[1] + rad * a.sin()])
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Renders the run as an SVG document. Every tube sample box becomes one
/// `rect` of class `reach-box`.
pub fn render_svg(scenario: &Scenario, result: &RunResult) -> String {
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    let mut grow = |p: [f64; 2]| {
        for d in 0..2 {
            lo[d] = lo[d].min(p[d]);
            hi[d] = hi[d].max(p[d]);
        }
    };
    grow(scenario.start.position());
    grow(scenario.goal);
    scenario
        .obstacles
        .iter()
        .flat_map(|o| o.vertices())
        .for_each(|v| grow(*v));
    result
        .trajectory()
        .iter()
        .for_each(|(_, s)| grow(s.position()));
    let boxes: Vec<&Box2> = result
        .cycles
        .iter()
        .filter_map(|c| c.tube.as_ref())
        .flat_map(|t| &t.position_boxes)
        .collect();
    boxes.iter().for_each(|b| {
        grow(b.lo());
        grow(b.hi());
    });
    let view = View {
        min: [lo[0] - MARGIN_M, lo[1] - MARGIN_M],
        max: [hi[0] + MARGIN_M, hi[1] + MARGIN_M],
    };
    let (w, h) = (
        (view.max[0] - view.min[0]) * PX_PER_M,
        (view.max[1] - view.min[1]) * PX_PER_M,
    );

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">"#
    );
    let _ = writeln!(
        svg,
        "<title>{} ({})</title>",
        xml_escape(&scenario.name),
        result.outcome.tag()
    );
    let _ = writeln!(
        svg,
        r##"<rect width="100%" height="100%" fill="#ffffff"/>"##
    );
    for p in &scenario.patches {
        let _ = writeln!(
            svg,
            r##"<polygon class="patch" points="{}" fill="#9ecae1" fill-opacity="0.35" stroke="none"/>"##,
            polygon_points(&view, &p.region)
        );
    }
    for o in &scenario.obstacles {
        let _ = writeln!(
            svg,
            r##"<polygon class="obstacle" points="{}" fill="#555555" stroke="#222222"/>"##,
            polygon_points(&view, o)
        );
    }
    for b in &boxes {
        let _ = writeln!(
            svg,
            r##"<rect class="reach-box" x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="#e6550d" stroke-opacity="0.35" stroke-width="0.5"/>"##,
            view.x(b[0].lo()),
            view.y(b[1].hi()),
            b[0].width() * PX_PER_M,
            b[1].width() * PX_PER_M
        );
    }
    let path: Vec<String> = result
        .trajectory()
        .iter()
        .map(|(_, s)| view.pt(s.position()))
        .collect();
    let _ = writeln!(
        svg,
        r##"<polyline class="trajectory" points="{}" fill="none" stroke="#3182bd" stroke-width="2"/>"##,
        path.join(" ")
    );
    for c in &result.cycles {
        if let Action::Execute { repaired: true, .. } = c.action {
            let p = c.state.position();
            let _ = writeln!(
                svg,
                r##"<circle class="repair" cx="{:.2}" cy="{:.2}" r="6" fill="none" stroke="#d62728" stroke-width="2"/>"##,
                view.x(p[0]),
                view.y(p[1])
            );
            let _ = writeln!(
                svg,
                r##"<text class="repair-label" x="{:.2}" y="{:.2}" font-size="11" fill="#d62728">repair @ cycle {}</text>"##,
                view.x(p[0]) + 8.0,
                view.y(p[1]) - 8.0,
                c.index
            );
        }
    }
    let s = scenario.start.position();
    let _ = writeln!(
        svg,
        r##"<circle class="start" cx="{:.2}" cy="{:.2}" r="{:.2}" fill="#31a354" fill-opacity="0.6" stroke="#006d2c"/>"##,
        view.x(s[0]),
        view.y(s[1]),
        scenario.robot_radius() * PX_PER_M
    );
    let _ = writeln!(
        svg,
        r##"<polygon class="goal" points="{}" fill="#ffd700" stroke="#b8860b"/>"##,
        star(&view, scenario.goal, scenario.goal_radius.max(0.15))
    );
    svg.push_str("</svg>\n");
    svg
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
}

pub fn emit_plot(scenario: &Scenario, result: &RunResult, path: &Path) -> std::io::Result<()> {
    std::fs::write(path, render_svg(scenario, result))
}
