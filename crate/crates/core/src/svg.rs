//! Standalone SVG plots of the κ-plane atlas and of eigenvalue trajectories.

use std::fmt::Write as _;
use std::path::Path as FsPath;

use crate::error::Result;
use crate::linalg::C64;
use crate::output::write_atomic;
use crate::singular::Atlas;
use crate::tracker::Trajectory;

const SIZE: f64 = 640.0;
const MARGIN: f64 = 56.0;
const PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf", "#8c564b", "#e377c2"];

pub fn branch_color(branch: usize) -> &'static str {
    PALETTE[branch % PALETTE.len()]
}

/// What to draw.
pub enum Plot<'a> {
    /// EPs, cuts and optional named loops in the κ-plane.
    Atlas { atlas: &'a Atlas, loops: &'a [(String, Vec<C64>)] },
    /// Re λ against Im λ for each state, coloured by the branch holding it.
    Trajectory(&'a Trajectory),
}

/// Maps data coordinates onto the canvas, keeping the aspect ratio.
struct Frame {
    lo: C64,
    scale: f64,
    span: C64,
}

impl Frame {
    fn fit(points: impl Iterator<Item = C64>) -> Self {
        let (mut x0, mut x1, mut y0, mut y1) = (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
        for z in points.filter(|z| z.re.is_finite() && z.im.is_finite()) {
            x0 = x0.min(z.re);
            x1 = x1.max(z.re);
            y0 = y0.min(z.im);
            y1 = y1.max(z.im);
        }
        if !(x0 <= x1) {
            (x0, x1, y0, y1) = (-1.0, 1.0, -1.0, 1.0);
        }
        let pad = 0.05 * (x1 - x0).max(y1 - y0).max(1e-9);
        let (x0, x1, y0, y1) = (x0 - pad, x1 + pad, y0 - pad, y1 + pad);
        let inner = SIZE - 2.0 * MARGIN;
        let scale = inner / (x1 - x0).max(y1 - y0);
        Self { lo: C64::new(x0, y0), scale, span: C64::new(x1 - x0, y1 - y0) }
    }

    fn map(&self, z: C64) -> (f64, f64) {
        (MARGIN + (z.re - self.lo.re) * self.scale, SIZE - MARGIN - (z.im - self.lo.im) * self.scale)
    }

    fn polyline(&self, pts: &[C64]) -> String {
        let mut s = String::new();
        for (k, z) in pts.iter().enumerate() {
            let (x, y) = self.map(*z);
            if k > 0 {
                s.push(' ');
            }
            let _ = write!(s, "{x:.2},{y:.2}");
        }
        s
    }

    fn axes(&self, out: &mut String, xlabel: &str, ylabel: &str) {
        let (x0, y0) = self.map(self.lo);
        let (x1, y1) = self.map(self.lo + self.span);
        let _ = writeln!(
            out,
            r##"<g class="axes" stroke="#444" fill="none"><rect x="{x0:.2}" y="{y1:.2}" width="{:.2}" height="{:.2}"/>"##,
            x1 - x0,
            y0 - y1
        );
        for k in 0..=4 {
            let f = k as f64 / 4.0;
            let xv = self.lo.re + f * self.span.re;
            let yv = self.lo.im + f * self.span.im;
            let (tx, _) = self.map(C64::new(xv, self.lo.im));
            let (_, ty) = self.map(C64::new(self.lo.re, yv));
            let _ = writeln!(out, r#"<line x1="{tx:.2}" y1="{y0:.2}" x2="{tx:.2}" y2="{:.2}"/>"#, y0 + 5.0);
            let _ = writeln!(out, r#"<line x1="{x0:.2}" y1="{ty:.2}" x2="{:.2}" y2="{ty:.2}"/>"#, x0 - 5.0);
            let _ = writeln!(out, r##"<text x="{tx:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="#444" font-size="11">{xv:.3}</text>"##, y0 + 18.0);
            let _ = writeln!(out, r##"<text x="{:.2}" y="{:.2}" text-anchor="end" stroke="none" fill="#444" font-size="11">{yv:.3}</text>"##, x0 - 8.0, ty + 4.0);
        }
        let _ = writeln!(out, r##"<text x="{:.2}" y="{:.2}" text-anchor="middle" stroke="none" fill="#000" font-size="13">{xlabel}</text>"##, 0.5 * (x0 + x1), SIZE - 10.0);
        let _ = writeln!(out, r##"<text x="14" y="{:.2}" text-anchor="middle" stroke="none" fill="#000" font-size="13" transform="rotate(-90 14 {:.2})">{ylabel}</text>"##, 0.5 * (y0 + y1), 0.5 * (y0 + y1));
        out.push_str("</g>\n");
    }
}

fn header(out: &mut String, title: &str) {
    let _ = writeln!(out, r#"<?xml version="1.0" encoding="UTF-8"?>"#);
    let _ = writeln!(out, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{SIZE}" height="{SIZE}" viewBox="0 0 {SIZE} {SIZE}">"#);
    let _ = writeln!(out, "<title>{title}</title>");
    let _ = writeln!(out, r#"<rect width="100%" height="100%" fill="white"/>"#);
}

fn render_atlas(atlas: &Atlas, loops: &[(String, Vec<C64>)]) -> String {
    let r = atlas.region;
    let corners = [C64::new(r.re[0], r.im[0]), C64::new(r.re[1], r.im[1])];
    let frame = Frame::fit(corners.into_iter().chain(loops.iter().flat_map(|(_, p)| p.iter().copied())));
    let mut out = String::new();
    header(&mut out, "branch cut atlas");
    frame.axes(&mut out, "Re κ", "Im κ");
    for cut in &atlas.cuts {
        let color = branch_color(cut.id as usize - 1);
        let _ = writeln!(out, r#"<g class="cut" data-id="{}" data-perm="{}" fill="{color}" stroke="none">"#, cut.id, cut.perm);
        for z in &cut.points {
            let (x, y) = frame.map(*z);
            let _ = writeln!(out, r#"<circle cx="{x:.2}" cy="{y:.2}" r="1.6"/>"#);
        }
        if let Some(mid) = cut.points.get(cut.points.len() / 2) {
            let (x, y) = frame.map(*mid);
            let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12">{}</text>"#, x + 6.0, y - 6.0, cut.id);
        }
        out.push_str("</g>\n");
    }
    for (name, pts) in loops {
        let _ = writeln!(
            out,
            r##"<polyline class="loop" data-name="{name}" points="{}" fill="none" stroke="#222" stroke-width="1.5"/>"##,
            frame.polyline(pts)
        );
    }
    for (k, ep) in atlas.eps.iter().enumerate() {
        let (x, y) = frame.map(ep.location);
        let _ = writeln!(
            out,
            r##"<g class="ep" data-index="{}" data-order="{}"><circle cx="{x:.2}" cy="{y:.2}" r="5" fill="#000"/><text x="{:.2}" y="{:.2}" font-size="12">EP {}</text></g>"##,
            k + 1,
            ep.order,
            x + 7.0,
            y + 14.0,
            k + 1
        );
    }
    out.push_str("</svg>\n");
    out
}

fn render_trajectory(traj: &Trajectory) -> String {
    let frame = Frame::fit(traj.samples.iter().flat_map(|s| s.branch_values.iter().copied()));
    let mut out = String::new();
    header(&mut out, "eigenvalue trajectories");
    frame.axes(&mut out, "Re λ", "Im λ");
    let n = traj.samples.first().map_or(0, |s| s.state_branch.len());
    for j in 0..n {
        let _ = writeln!(out, r#"<g class="state" data-state="{}" fill="none" stroke-width="2">"#, j + 1);
        let mut run: Vec<C64> = Vec::new();
        let mut branch = traj.samples[0].state_branch[j];
        let mut joints = Vec::new();
        for s in &traj.samples {
            let b = s.state_branch[j];
            let z = s.state_value(j);
            if b != branch {
                // close the run at the joint so consecutive colours meet
                run.push(z);
                flush(&mut out, &frame, &run, branch);
                joints.push(z);
                run = vec![z];
                branch = b;
            } else {
                run.push(z);
            }
        }
        flush(&mut out, &frame, &run, branch);
        for z in joints {
            let (x, y) = frame.map(z);
            let _ = writeln!(out, r##"<circle class="joint" cx="{x:.2}" cy="{y:.2}" r="3" fill="#000"/>"##);
        }
        let (x, y) = frame.map(traj.samples[0].state_value(j));
        let _ = writeln!(out, r#"<text x="{:.2}" y="{:.2}" font-size="12" fill="black">s{}</text>"#, x + 5.0, y - 5.0, j + 1);
        out.push_str("</g>\n");
    }
    out.push_str("</svg>\n");
    out
}

fn flush(out: &mut String, frame: &Frame, run: &[C64], branch: usize) {
    if run.len() >= 2 {
        let _ = writeln!(
            out,
            r#"<polyline class="run" data-branch="{}" points="{}" stroke="{}"/>"#,
            branch + 1,
            frame.polyline(run),
            branch_color(branch)
        );
    }
}

pub fn render(plot: &Plot) -> String {
    match plot {
        Plot::Atlas { atlas, loops } => render_atlas(atlas, loops),
        Plot::Trajectory(t) => render_trajectory(t),
    }
}

/// Renders `plot` and writes it to `out_path`.
pub fn emit_plot(plot: &Plot, out_path: &FsPath) -> Result<()> {
    write_atomic(out_path, render(plot).as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::branches::SortKey;

    #[test]
    fn empty_trajectory_draws_axes_only() {
        let t = Trajectory { key: SortKey::ReAsc, samples: vec![], events: vec![] };
        let svg = render(&Plot::Trajectory(&t));
        assert!(svg.starts_with("<?xml") && svg.trim_end().ends_with("</svg>"));
        assert!(svg.contains(r#"class="axes""#));
        assert!(!svg.contains("polyline"));
        assert_eq!(svg.matches("<svg").count(), 1);
    }

    #[test]
    fn unwritable_target() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("f");
        std::fs::write(&file, "").unwrap();
        let t = Trajectory { key: SortKey::ReAsc, samples: vec![], events: vec![] };
        assert!(emit_plot(&Plot::Trajectory(&t), &file.join("x.svg")).is_err());
    }
}
