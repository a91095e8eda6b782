use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::ingest::Mode;

const WIDTH: f64 = 420.0;
const HEIGHT: f64 = 440.0;
const CX: f64 = 210.0;
const CY: f64 = 230.0;
const RADIUS: f64 = 150.0;

#[derive(Debug, Clone, PartialEq)]
pub struct RadarMeta {
    pub cluster_id: usize,
    pub size: usize,
    pub share: f64,
}

/// Radial scale symmetric about zero: `[-extent, extent]` mapped onto
/// `[0, RADIUS]`, so the zero ring sits at half radius.
fn extent(profile: &[f64; Mode::COUNT]) -> f64 {
    profile.iter().fold(0.0f64, |m, v| m.max(v.abs())).ceil().max(1.0)
}

fn radius_of(value: f64, extent: f64) -> f64 {
    (value + extent) / (2.0 * extent) * RADIUS
}

fn axis_angle(i: usize) -> f64 {
    -PI / 2.0 + 2.0 * PI * i as f64 / Mode::COUNT as f64
}

fn point(i: usize, r: f64) -> (f64, f64) {
    let a = axis_angle(i);
    (CX + r * a.cos(), CY + r * a.sin())
}

fn polygon_points(radii: impl Iterator<Item = f64>) -> String {
    radii
        .enumerate()
        .map(|(i, r)| {
            let (x, y) = point(i, r);
            format!("{x:.3},{y:.3}")
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn ring_values(extent: f64) -> Vec<f64> {
    let step = (extent / 4.0).ceil().max(1.0);
    let mut v = vec![0.0];
    let mut x = step;
    while x < extent {
        v.push(x);
        v.push(-x);
        x += step;
    }
    v.push(extent);
    v.push(-extent);
    v.sort_by(f64::total_cmp);
    v
}

/// Five-axis radar plot of a cluster's mean deviance per mode. Axes run
/// clockwise from the top in mode order.
pub fn render_radar(profile: &[f64; Mode::COUNT], meta: &RadarMeta) -> Result<String> {
    if profile.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("radar profile must be finite".into()));
    }
    let ext = extent(profile);
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">"#
    );
    let _ = writeln!(svg, r##"<rect width="100%" height="100%" fill="#ffffff"/>"##);
    let _ = writeln!(
        svg,
        r#"<text x="{CX}" y="24" text-anchor="middle" font-family="sans-serif" font-size="15">Cluster {} ({:.1}% of anomalous hours, n={})</text>"#,
        meta.cluster_id,
        meta.share * 100.0,
        meta.size
    );

    for v in ring_values(ext) {
        let r = radius_of(v, ext);
        let (class, stroke, width) = if v == 0.0 {
            ("zero-ring", "#333333", 1.5)
        } else {
            ("ring", "#cccccc", 0.8)
        };
        let _ = writeln!(
            svg,
            r#"<polygon class="{class}" points="{}" fill="none" stroke="{stroke}" stroke-width="{width}"/>"#,
            polygon_points(std::iter::repeat_n(r, Mode::COUNT))
        );
        let (lx, ly) = point(0, r);
        let _ = writeln!(
            svg,
            r##"<text x="{:.3}" y="{:.3}" font-family="sans-serif" font-size="9" fill="#777777">{v}</text>"##,
            lx + 3.0,
            ly - 2.0
        );
    }

    for (i, mode) in Mode::ALL.iter().enumerate() {
        let (x, y) = point(i, RADIUS);
        let _ = writeln!(
            svg,
            r##"<line class="axis" x1="{CX}" y1="{CY}" x2="{x:.3}" y2="{y:.3}" stroke="#bbbbbb" stroke-width="0.8"/>"##
        );
        let (lx, ly) = point(i, RADIUS + 22.0);
        let _ = writeln!(
            svg,
            r#"<text x="{lx:.3}" y="{ly:.3}" text-anchor="middle" font-family="sans-serif" font-size="12">{} ({:+.2})</text>"#,
            mode.name(),
            profile[i]
        );
    }

    let _ = writeln!(
        svg,
        r##"<polygon class="profile" points="{}" fill="#1f77b4" fill-opacity="0.3" stroke="#1f77b4" stroke-width="2"/>"##,
        polygon_points(profile.iter().map(|&v| radius_of(v, ext)))
    );
    svg.push_str("</svg>\n");
    Ok(svg)
}
