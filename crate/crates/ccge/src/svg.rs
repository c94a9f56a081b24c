//! SVG rendering of trajectory dumps.

use std::fmt::Write as _;

use ccge_core::pushbox::PushBoxConfig;

use crate::run::TrajectoryRecord;

const SIZE: f64 = 600.0;
const REGION_COLOURS: [&str; 8] = ["#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02", "#a6761d", "#666666"];

fn px(x: f64) -> f64 {
    x * SIZE
}

fn py(y: f64) -> f64 {
    (1.0 - y) * SIZE
}

/// Draws one episode: wall, goal, initial (dashed) and final box, ball path,
/// and contacts coloured by surface region.
pub fn render_episode(records: &[TrajectoryRecord], env: &PushBoxConfig) -> String {
    let mut s = String::new();
    writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#).unwrap();
    writeln!(s, r#"<rect x="0" y="0" width="{SIZE}" height="{SIZE}" fill="white" stroke="black"/>"#).unwrap();
    writeln!(
        s,
        r##"<rect x="0" y="0" width="{SIZE}" height="{:.2}" fill="#888"/>"##,
        px(1.0 - env.wall_y)
    )
    .unwrap();
    writeln!(
        s,
        r##"<line x1="{0:.2}" y1="0" x2="{0:.2}" y2="{SIZE}" stroke="#2a2" stroke-dasharray="6 4"/>"##,
        px(env.goal_x)
    )
    .unwrap();
    let h = env.box_half();
    let cy = env.box_center_y();
    let draw_box = |s: &mut String, x: f64, style: &str| {
        writeln!(
            s,
            r#"<rect x="{:.2}" y="{:.2}" width="{:.2}" height="{:.2}" {style}/>"#,
            px(x - h),
            py(cy + h),
            px(2.0 * h),
            px(2.0 * h)
        )
        .unwrap();
    };
    if let (Some(first), Some(last)) = (records.first(), records.last()) {
        let start_x = match first.state.init_side {
            ccge_core::pushbox::Side::Left => env.box_x_min,
            ccge_core::pushbox::Side::Right => env.box_x_max,
        };
        draw_box(&mut s, start_x, r##"fill="none" stroke="#555" stroke-dasharray="4 3""##);
        draw_box(&mut s, last.state.box_x, r##"fill="#c9a26b" stroke="black""##);
        let pts: Vec<String> =
            records.iter().map(|r| format!("{:.2},{:.2}", px(r.state.ball[0]), py(r.state.ball[1]))).collect();
        writeln!(s, r##"<polyline points="{}" fill="none" stroke="#36c" stroke-width="1.5"/>"##, pts.join(" ")).unwrap();
        for r in records.iter().filter(|r| r.contact.in_contact) {
            let colour = REGION_COLOURS[r.contact.region % REGION_COLOURS.len()];
            writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{colour}"/>"#,
                px(r.state.ball[0]),
                py(r.state.ball[1])
            )
            .unwrap();
        }
        writeln!(
            s,
            r##"<circle cx="{:.2}" cy="{:.2}" r="{:.2}" fill="none" stroke="#036"/>"##,
            px(last.state.ball[0]),
            py(last.state.ball[1]),
            px(env.ball_radius)
        )
        .unwrap();
        writeln!(
            s,
            r#"<text x="8" y="{:.0}" font-family="monospace" font-size="14">episode {} steps {} success {}</text>"#,
            SIZE - 10.0,
            last.episode,
            last.step,
            (last.state.box_x - last.state.goal_x).abs() < env.success_radius
        )
        .unwrap();
    }
    s.push_str("</svg>\n");
    s
}
