//! Static SVG frames of a plan at uniformly spaced times.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use handoff_core::geometry::{ArmConfig, ObjectState, Obstacle, Scene, Vec2};
use handoff_core::plan::{Plan, TransitionKind};

pub const DEFAULT_FRAMES: usize = 20;

const PX_PER_M: f64 = 200.0;
const MARGIN: f64 = 0.2;

/// `frames` times from 0 to the plan's duration, both included.
pub fn frame_times(plan: &Plan, frames: usize) -> Vec<f64> {
    let end = plan.duration();
    match frames {
        0 => Vec::new(),
        1 => vec![0.0],
        k => (0..k).map(|i| end * i as f64 / (k - 1) as f64).collect(),
    }
}

/// Joint positions of `arm` at `q`, base first, end-effector last; `None`
/// outside the joint limits.
pub fn arm_points(scene: &Scene, arm: usize, q: &ArmConfig) -> Option<Vec<Vec2>> {
    let chain = scene.arms[arm].forward_kinematics(q).ok()?;
    let mut pts = vec![scene.arms[arm].base.translation()];
    pts.extend(chain.segments.iter().map(|seg| seg.b));
    Some(pts)
}

fn fmt_points(pts: &[Vec2]) -> String {
    let mut s = String::new();
    for (i, p) in pts.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        let _ = write!(s, "{:.4},{:.4}", p.x, p.y);
    }
    s
}

fn bounds(scene: &Scene) -> (Vec2, Vec2) {
    let mut lo = Vec2::new(f64::INFINITY, f64::INFINITY);
    let mut hi = Vec2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut add = |p: Vec2, r: f64| {
        lo = Vec2::new(lo.x.min(p.x - r), lo.y.min(p.y - r));
        hi = Vec2::new(hi.x.max(p.x + r), hi.y.max(p.y + r));
    };
    for arm in &scene.arms {
        add(arm.base.translation(), arm.reach());
    }
    for o in &scene.obstacles {
        match o {
            Obstacle::Polygon { vertices } => vertices.vertices().iter().for_each(|&v| add(v, 0.0)),
            Obstacle::Circle(c) => add(c.center, c.radius),
        }
    }
    (lo, hi)
}

fn marker_color(kind: &TransitionKind) -> &'static str {
    match kind {
        TransitionKind::Pick { .. } => "#2a9d8f",
        TransitionKind::Handoff { .. } => "#e9c46a",
        TransitionKind::Place { .. } => "#e76f51",
    }
}

/// The scene and the plan's state at time `t`. World y points up; the
/// drawing is flipped inside one group so coordinates stay in meters.
pub fn frame_svg(scene: &Scene, plan: &Plan, t: f64) -> String {
    let (lo, hi) = bounds(scene);
    let (lo, hi) = (
        Vec2::new(lo.x - MARGIN, lo.y - MARGIN),
        Vec2::new(hi.x + MARGIN, hi.y + MARGIN),
    );
    let (w, h) = (hi.x - lo.x, hi.y - lo.y);
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.0}" height="{:.0}" viewBox="{:.4} {:.4} {:.4} {:.4}">"#,
        w * PX_PER_M,
        h * PX_PER_M,
        lo.x,
        -hi.y,
        w,
        h
    );
    let _ = writeln!(
        s,
        r#"<rect x="{:.4}" y="{:.4}" width="{w:.4}" height="{h:.4}" fill="white"/>"#,
        lo.x, -hi.y
    );
    s.push_str("<g transform=\"scale(1,-1)\">\n");
    for [a, b] in &scene.surfaces {
        let _ = writeln!(
            s,
            r##"<line class="surface" x1="{:.4}" y1="{:.4}" x2="{:.4}" y2="{:.4}" stroke="#8d6e63" stroke-width="0.02"/>"##,
            a.x, a.y, b.x, b.y
        );
    }
    for o in &scene.obstacles {
        match o {
            Obstacle::Polygon { vertices } => {
                let _ = writeln!(
                    s,
                    r##"<polygon class="obstacle" points="{}" fill="#555"/>"##,
                    fmt_points(vertices.vertices())
                );
            }
            Obstacle::Circle(c) => {
                let _ = writeln!(
                    s,
                    r##"<circle class="obstacle" cx="{:.4}" cy="{:.4}" r="{:.4}" fill="#555"/>"##,
                    c.center.x, c.center.y, c.radius
                );
            }
        }
    }
    let (q, object) = plan.state_at(t);
    for m in &plan.transitions {
        let (mq, mobj) = plan.state_at(m.t);
        let Some(p) = scene.object_pose(&mq, &mobj) else {
            continue;
        };
        let fill = if m.t <= t {
            marker_color(&m.kind)
        } else {
            "none"
        };
        let _ = writeln!(
            s,
            r#"<circle class="transition" cx="{:.4}" cy="{:.4}" r="0.03" fill="{fill}" stroke="{}" stroke-width="0.01"/>"#,
            p.x,
            p.y,
            marker_color(&m.kind)
        );
    }
    if let Some(p) = scene.object_pose(&q, &object) {
        let held = matches!(object, ObjectState::Held { .. });
        let _ = writeln!(
            s,
            r##"<polygon class="object" points="{}" fill="{}"/>"##,
            fmt_points(scene.object_polygon(&p).vertices()),
            if held { "#f4a261" } else { "#264653" }
        );
    }
    for (i, arm) in scene.arms.iter().enumerate() {
        let Some(pts) = arm_points(scene, i, &q.per_arm[i]) else {
            continue;
        };
        let _ = writeln!(
            s,
            r##"<polyline class="arm" data-arm="{i}" points="{}" fill="none" stroke="#1d3557" stroke-opacity="0.8" stroke-width="{:.4}" stroke-linecap="round" stroke-linejoin="round"/>"##,
            fmt_points(&pts),
            arm.thickness
        );
        let b = pts[0];
        let _ = writeln!(
            s,
            r##"<circle class="base" cx="{:.4}" cy="{:.4}" r="0.04" fill="#1d3557"/>"##,
            b.x, b.y
        );
    }
    s.push_str("</g>\n");
    let _ = writeln!(
        s,
        r#"<text x="{:.4}" y="{:.4}" font-size="0.08" font-family="monospace">t = {t:.3} / {:.3} s</text>"#,
        lo.x + 0.05,
        -hi.y + 0.12,
        plan.duration()
    );
    s.push_str("</svg>\n");
    s
}

/// Writes `frame_000.svg`, `frame_001.svg`, .. into `dir`.
pub fn render_plan(
    scene: &Scene,
    plan: &Plan,
    frames: usize,
    dir: &Path,
) -> std::io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut out = Vec::new();
    for (i, t) in frame_times(plan, frames).into_iter().enumerate() {
        let path = dir.join(format!("frame_{i:03}.svg"));
        fs::write(&path, frame_svg(scene, plan, t))?;
        out.push(path);
    }
    Ok(out)
}
