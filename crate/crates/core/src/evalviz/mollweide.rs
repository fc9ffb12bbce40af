//! Mollweide scatter plots of SO(3) distributions as SVG.
//!
//! Each rotation is converted to XYX Euler angles. `alpha` becomes the
//! longitude and `pi/2 - beta` the latitude, so the identity sits on the
//! north pole. `gamma` picks the hue. Dots are drawn only for cells above a
//! probability threshold, with area proportional to probability relative to
//! the most probable cell; ground-truth rotations are drawn as open rings.

use std::f64::consts::{FRAC_PI_2, PI, SQRT_2};
use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;
use crate::evalviz::SUPPORT_FACTOR;
use crate::head::PoseDistribution;
use crate::rotation::Rotation;

/// Fixed drawing constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MollweideStyle {
    /// Pixels per unit of the projection (the ellipse is `4√2 x 2√2` units).
    pub scale: f64,
    pub margin: f64,
    /// Radius of the dot of the most probable cell.
    pub max_radius: f64,
    pub min_radius: f64,
    pub ring_radius: f64,
}

impl Default for MollweideStyle {
    fn default() -> Self {
        MollweideStyle {
            scale: 140.0,
            margin: 12.0,
            max_radius: 6.0,
            min_radius: 0.6,
            ring_radius: 9.0,
        }
    }
}

/// Mollweide coordinates of `(longitude, latitude)`, in units where the
/// map spans `[-2√2, 2√2] x [-√2, √2]`.
pub fn mollweide(lon: f64, lat: f64) -> (f64, f64) {
    let target = PI * lat.sin();
    let theta = if (lat.abs() - FRAC_PI_2).abs() < 1e-12 {
        lat
    } else {
        // Newton on 2t + sin 2t = pi sin(lat)
        let mut t = lat;
        for _ in 0..50 {
            let f = 2.0 * t + (2.0 * t).sin() - target;
            let df = 2.0 + 2.0 * (2.0 * t).cos();
            if df.abs() < 1e-15 {
                break;
            }
            let step = f / df;
            t -= step;
            if step.abs() < 1e-14 {
                break;
            }
        }
        t
    };
    (2.0 * SQRT_2 / PI * lon * theta.cos(), SQRT_2 * theta.sin())
}

/// `(longitude, latitude, hue angle)` of a rotation.
pub fn rotation_to_plot(r: &Rotation) -> (f64, f64, f64) {
    let e = r.to_euler_xyx();
    (e.alpha, FRAC_PI_2 - e.beta, e.gamma)
}

/// Hex colour on the HSV wheel (full saturation and value) for an angle in
/// `[-pi, pi)`.
pub fn hue_color(angle: f64) -> String {
    let h = ((angle + PI) / (2.0 * PI)).rem_euclid(1.0) * 6.0;
    let x = 1.0 - (h % 2.0 - 1.0).abs();
    let (r, g, b) = match h as u32 {
        0 => (1.0, x, 0.0),
        1 => (x, 1.0, 0.0),
        2 => (0.0, 1.0, x),
        3 => (0.0, x, 1.0),
        4 => (x, 0.0, 1.0),
        _ => (1.0, 0.0, x),
    };
    let q = |v: f64| (v * 255.0).round() as u8;
    format!("#{:02x}{:02x}{:02x}", q(r), q(g), q(b))
}

fn to_px(style: &MollweideStyle, x: f64, y: f64) -> (f64, f64) {
    let cx = style.margin + 2.0 * SQRT_2 * style.scale;
    let cy = style.margin + SQRT_2 * style.scale;
    (cx + x * style.scale, cy - y * style.scale)
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// SVG document for a distribution. `threshold` defaults to
/// [`SUPPORT_FACTOR`] times the uniform cell probability. `metadata` is
/// stored verbatim (escaped) in a `<metadata>` element.
pub fn mollweide_svg(
    dist: &PoseDistribution,
    ground_truth: &[Rotation],
    threshold: Option<f64>,
    style: &MollweideStyle,
    metadata: Option<&str>,
) -> String {
    let threshold = threshold.unwrap_or(SUPPORT_FACTOR / dist.len().max(1) as f64);
    let w = 2.0 * style.margin + 4.0 * SQRT_2 * style.scale;
    let h = 2.0 * style.margin + 2.0 * SQRT_2 * style.scale;
    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<?xml version="1.0" encoding="UTF-8"?>
<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.2} {h:.2}">
<rect x="0" y="0" width="{w:.2}" height="{h:.2}" fill="white"/>"#
    );
    if let Some(m) = metadata {
        let _ = writeln!(s, "<metadata>{}</metadata>", xml_escape(m));
    }
    let (cx, cy) = to_px(style, 0.0, 0.0);
    let _ = writeln!(
        s,
        r##"<g id="frame" fill="none" stroke="#999999" stroke-width="0.8">
<ellipse cx="{cx:.2}" cy="{cy:.2}" rx="{:.2}" ry="{:.2}"/>"##,
        2.0 * SQRT_2 * style.scale,
        SQRT_2 * style.scale
    );
    for lat_deg in [-60.0f64, -30.0, 0.0, 30.0, 60.0] {
        let (x, y) = mollweide(PI, lat_deg.to_radians());
        let (x0, y0) = to_px(style, -x, y);
        let (x1, _) = to_px(style, x, y);
        let _ = writeln!(s, r#"<line x1="{x0:.2}" y1="{y0:.2}" x2="{x1:.2}" y2="{y0:.2}"/>"#);
    }
    for lon_deg in [-120.0f64, -60.0, 0.0, 60.0, 120.0] {
        let mut d = String::new();
        for k in 0..=36 {
            let lat = -FRAC_PI_2 + PI * k as f64 / 36.0;
            let (x, y) = mollweide(lon_deg.to_radians(), lat);
            let (px, py) = to_px(style, x, y);
            let _ = write!(d, "{}{px:.2},{py:.2}", if k == 0 { "M" } else { " L" });
        }
        let _ = writeln!(s, r#"<path d="{d}"/>"#);
    }
    s.push_str("</g>\n<g id=\"cells\" stroke=\"none\">\n");
    let pmax = dist.probs.iter().copied().fold(0.0, f64::max);
    for (i, &p) in dist.probs.iter().enumerate() {
        if p <= threshold {
            continue;
        }
        let (lon, lat, tilt) = rotation_to_plot(&dist.grid.rotations[i]);
        let (x, y) = mollweide(lon, lat);
        let (px, py) = to_px(style, x, y);
        let r = (style.max_radius * (p / pmax).sqrt()).max(style.min_radius);
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{r:.2}" fill="{}" fill-opacity="0.8"/>"#,
            hue_color(tilt)
        );
    }
    s.push_str("</g>\n<g id=\"ground-truth\" fill=\"none\" stroke-width=\"1.5\">\n");
    for g in ground_truth {
        let (lon, lat, tilt) = rotation_to_plot(g);
        let (x, y) = mollweide(lon, lat);
        let (px, py) = to_px(style, x, y);
        let _ = writeln!(
            s,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="{:.2}" stroke="{}"/>"#,
            style.ring_radius,
            hue_color(tilt)
        );
    }
    s.push_str("</g>\n</svg>\n");
    s
}

/// Write [`mollweide_svg`] with the default style to `path`.
pub fn render_mollweide(
    dist: &PoseDistribution,
    ground_truth: &[Rotation],
    threshold: Option<f64>,
    metadata: Option<&str>,
    path: &Path,
) -> Result<()> {
    let svg = mollweide_svg(dist, ground_truth, threshold, &MollweideStyle::default(), metadata);
    std::fs::write(path, svg)?;
    Ok(())
}

/// Number of probability dots in an SVG produced by [`mollweide_svg`].
pub fn count_dots(svg: &str) -> usize {
    svg.split("<g id=\"cells\"")
        .nth(1)
        .and_then(|rest| rest.split("</g>").next())
        .map_or(0, |cells| cells.matches("<circle").count())
}
