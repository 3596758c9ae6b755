//! SVG overlay of demonstrations, reproductions and the stabilized field.

use std::fmt::Write;

use esds::{Rollout, StabilizedDs, VectorField};
use nalgebra::DVector;

const WIDTH: f64 = 640.0;
const HEIGHT: f64 = 640.0;
const MARGIN: f64 = 24.0;
/// Field arrows per axis, roughly.
const GRID: usize = 17;

/// Axis-aligned bounds `[xmin, xmax] × [ymin, ymax]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds {
    pub min: [f64; 2],
    pub max: [f64; 2],
}

impl Bounds {
    fn around<'a>(points: impl IntoIterator<Item = &'a DVector<f64>>) -> Self {
        let mut b = Bounds { min: [f64::INFINITY; 2], max: [f64::NEG_INFINITY; 2] };
        for p in points {
            for i in 0..2 {
                b.min[i] = b.min[i].min(p[i]);
                b.max[i] = b.max[i].max(p[i]);
            }
        }
        let span = (b.max[0] - b.min[0]).max(b.max[1] - b.min[1]).max(1e-9);
        for i in 0..2 {
            b.min[i] -= 0.08 * span;
            b.max[i] += 0.08 * span;
        }
        b
    }

    fn contains(&self, p: &DVector<f64>) -> bool {
        (0..2).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }
}

/// Grid points anchored at the goal, with the velocity of a full tank at each.
pub fn arrow_grid<F: VectorField>(ds: &StabilizedDs<F>, bounds: &Bounds) -> esds::Result<Vec<(DVector<f64>, DVector<f64>)>> {
    let goal = ds.goal();
    let h = (bounds.max[0] - bounds.min[0]).max(bounds.max[1] - bounds.min[1]) / (GRID - 1) as f64;
    let range = |i: usize| {
        let lo = ((bounds.min[i] - goal[i]) / h).ceil() as i64;
        let hi = ((bounds.max[i] - goal[i]) / h).floor() as i64;
        lo..=hi
    };
    let mut out = Vec::new();
    for iy in range(1) {
        for ix in range(0) {
            let p = goal + DVector::from_vec(vec![ix as f64 * h, iy as f64 * h]);
            if !bounds.contains(&p) {
                continue;
            }
            let rel = &p - goal;
            let v = ds.velocity(&rel, &ds.init_tank(&rel))?.xdot;
            out.push((p, v));
        }
    }
    Ok(out)
}

struct Frame {
    bounds: Bounds,
    scale: f64,
}

impl Frame {
    fn new(bounds: Bounds) -> Self {
        let sx = (WIDTH - 2.0 * MARGIN) / (bounds.max[0] - bounds.min[0]);
        let sy = (HEIGHT - 2.0 * MARGIN) / (bounds.max[1] - bounds.min[1]);
        Self { bounds, scale: sx.min(sy) }
    }

    fn map(&self, p: &DVector<f64>) -> (f64, f64) {
        (MARGIN + (p[0] - self.bounds.min[0]) * self.scale, HEIGHT - MARGIN - (p[1] - self.bounds.min[1]) * self.scale)
    }
}

/// Render one 2-D motion. Returns `None` for other dimensions.
///
/// `demos` and `rollouts` are absolute positions. Output depends only on the
/// inputs, so repeated calls give identical documents.
pub fn plot_motion<F: VectorField>(
    title: &str,
    demos: &[Vec<DVector<f64>>],
    rollouts: &[Rollout],
    ds: Option<&StabilizedDs<F>>,
) -> esds::Result<Option<String>> {
    let dim = demos.iter().flatten().chain(rollouts.iter().flat_map(|r| &r.states)).map(|p| p.len()).next();
    if dim.is_some_and(|d| d != 2) || ds.is_some_and(|d| d.dim() != 2) {
        return Ok(None);
    }
    let goal = ds.map(|d| d.goal().clone());
    let bounds = Bounds::around(demos.iter().flatten().chain(rollouts.iter().flat_map(|r| &r.states)).chain(goal.as_ref()));
    let frame = Frame::new(bounds);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r#"<title>{}</title>"#, escape(title));
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);

    if let Some(ds) = ds {
        let arrows = arrow_grid(ds, &bounds)?;
        let longest = arrows.iter().map(|(_, v)| v.norm()).fold(0.0, f64::max);
        let cell = (bounds.max[0] - bounds.min[0]).max(bounds.max[1] - bounds.min[1]) / (GRID - 1) as f64;
        let k = if longest > 0.0 { 0.8 * cell / longest } else { 0.0 };
        let _ = writeln!(svg, r##"<g id="field" stroke="#9aa5b1" stroke-width="1">"##);
        for (p, v) in &arrows {
            let (x0, y0) = frame.map(p);
            let (x1, y1) = frame.map(&(p + v * k));
            let _ = writeln!(svg, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y1:.2}"/>"#);
        }
        let _ = writeln!(svg, "</g>");
    }

    let _ = writeln!(svg, r##"<g id="demos" fill="#d64545">"##);
    for demo in demos {
        for p in demo {
            let (x, y) = frame.map(p);
            let _ = writeln!(svg, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6"/>"#);
        }
    }
    let _ = writeln!(svg, "</g>");

    if !rollouts.is_empty() {
        let _ = writeln!(svg, r##"<g id="rollouts" fill="none" stroke="#1f4e8c" stroke-width="1.5">"##);
        for r in rollouts {
            let pts: Vec<String> = r
                .states
                .iter()
                .map(|p| {
                    let (x, y) = frame.map(p);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(svg, r#"<polyline points="{}"/>"#, pts.join(" "));
        }
        let _ = writeln!(svg, "</g>");
    }

    if let Some(g) = goal {
        let (x, y) = frame.map(&g);
        let _ = writeln!(svg, r#"<circle id="goal" cx="{x:.2}" cy="{y:.2}" r="4" fill="black"/>"#);
    }
    svg.push_str("</svg>\n");
    Ok(Some(svg))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use esds::regression::FnField;
    use esds::GainParams;

    fn p(a: f64, b: f64) -> DVector<f64> {
        DVector::from_vec(vec![a, b])
    }

    fn swirl_ds() -> StabilizedDs<FnField<impl Fn(&DVector<f64>) -> DVector<f64> + Send + Sync>> {
        let field = FnField::new(2, |x: &DVector<f64>| p(-3.0 * x[1], 3.0 * x[0]));
        StabilizedDs::new(field, 100.0, GainParams::default()).unwrap().with_goal(p(5.0, -2.0)).unwrap()
    }

    #[test]
    fn demo_layer_only_without_rollouts() {
        let demos = vec![vec![p(0.0, 0.0), p(1.0, 1.0)]];
        let svg = plot_motion::<FnField<fn(&DVector<f64>) -> DVector<f64>>>("m", &demos, &[], None).unwrap().unwrap();
        assert!(svg.contains(r#"id="demos""#));
        assert!(!svg.contains(r#"id="rollouts""#));
        assert!(!svg.contains(r#"id="field""#));
    }

    #[test]
    fn deterministic_output() {
        let ds = swirl_ds();
        let demos = vec![vec![p(-20.0, 10.0), p(-5.0, 4.0), p(5.0, -2.0)]];
        let r = ds.integrate(&p(-20.0, 10.0), &esds::IntegrationSettings::default()).unwrap();
        let a = plot_motion("m", &demos, std::slice::from_ref(&r), Some(&ds)).unwrap().unwrap();
        let b = plot_motion("m", &demos, &[r], Some(&ds)).unwrap().unwrap();
        assert_eq!(a, b);
        assert!(a.contains("<polyline"));
    }

    #[test]
    fn arrow_at_goal_is_zero() {
        let ds = swirl_ds();
        let bounds = Bounds { min: [-30.0, -30.0], max: [30.0, 30.0] };
        let arrows = arrow_grid(&ds, &bounds).unwrap();
        let at_goal: Vec<_> = arrows.iter().filter(|(q, _)| q == ds.goal()).collect();
        assert_eq!(at_goal.len(), 1);
        assert_eq!(at_goal[0].1.norm(), 0.0);
        assert!(arrows.iter().any(|(_, v)| v.norm() > 0.0));
    }

    #[test]
    fn other_dimensions_are_skipped() {
        let demos = vec![vec![DVector::zeros(3), DVector::from_element(3, 1.0)]];
        assert!(plot_motion::<FnField<fn(&DVector<f64>) -> DVector<f64>>>("m", &demos, &[], None).unwrap().is_none());
    }
}
