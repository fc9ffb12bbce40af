//! Synthetic symmetric-solid dataset rendered as Gaussian keypoint splats.
//!
//! Each shape is a set of keypoints on or inside the unit ball, each with a
//! channel and weight. Rendering rotates the keypoints, projects them
//! orthographically onto the image plane (camera looking along `-z`, so `+z`
//! faces the camera) and splats an isotropic Gaussian per point. Because the
//! keypoint set of an unmarked solid is mapped onto itself by every symmetry,
//! images of `r` and `r s` agree up to summation order.
//!
//! Marked shapes (`tetX`, `cylO`, `sphX`) add one marker keypoint in channel
//! 2. The marker fades in over `z ∈ [0.1, 0.3]` and is invisible for
//! `z <= 0.1`, in which case the image is exactly that of the unmarked body
//! and every body symmetry that keeps the marker hidden is an equally valid
//! label.

use std::f64::consts::PI;
use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grids::healpix_so3;
use crate::io::{read_f32, read_f64, read_magic, read_u32, read_u64, read_u8};
use crate::projection::FeatureMap;
use crate::rotation::{mat_vec, sample_uniform, Rotation, Vec3};

pub const IMAGE_SIZE: usize = 32;
pub const IMAGE_CHANNELS: usize = 3;
pub const SPLAT_SIGMA: f64 = 1.5;
/// Marker weight ramps from 0 at this height to full at `+0.2`.
pub const MARKER_THRESHOLD: f64 = 0.1;
const MARKER_RAMP: f64 = 0.2;
const MARKER_WEIGHT: f64 = 1.5;
const RING_POINTS: usize = 360;
const RING_WEIGHT: f64 = 0.05;
/// Splats are cut off beyond this many sigmas.
const SPLAT_RADIUS: f64 = 4.0;
const SOLID_RADIUS: f64 = 0.8;
const SPHERE_RADIUS: f64 = 0.75;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Shape {
    Tet,
    Cube,
    Ico,
    Cone,
    Cyl,
    TetX,
    CylO,
    SphX,
}

impl Shape {
    pub const ALL: [Shape; 8] = [
        Shape::Tet,
        Shape::Cube,
        Shape::Ico,
        Shape::Cone,
        Shape::Cyl,
        Shape::TetX,
        Shape::CylO,
        Shape::SphX,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Shape::Tet => "tet",
            Shape::Cube => "cube",
            Shape::Ico => "ico",
            Shape::Cone => "cone",
            Shape::Cyl => "cyl",
            Shape::TetX => "tetX",
            Shape::CylO => "cylO",
            Shape::SphX => "sphX",
        }
    }

    pub fn id(&self) -> u32 {
        Shape::ALL.iter().position(|s| s == self).unwrap_or(0) as u32
    }

    pub fn from_id(id: u32) -> Result<Shape> {
        Shape::ALL
            .get(id as usize)
            .copied()
            .ok_or_else(|| Error::Format(format!("unknown shape id {id}")))
    }

    pub fn is_marked(&self) -> bool {
        matches!(self, Shape::TetX | Shape::CylO | Shape::SphX)
    }

    fn valid_names() -> String {
        Shape::ALL.iter().map(|s| s.name()).collect::<Vec<_>>().join(", ")
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Shape {
    type Err = Error;
    fn from_str(s: &str) -> Result<Shape> {
        Shape::ALL
            .iter()
            .find(|shape| shape.name() == s)
            .copied()
            .ok_or_else(|| Error::UnknownShape {
                name: s.to_string(),
                valid: Shape::valid_names(),
            })
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Keypoint {
    pub pos: Vec3,
    pub channel: usize,
    pub weight: f64,
}

/// Geometry and symmetry data of one shape.
#[derive(Clone, Debug)]
pub struct ShapeModel {
    pub shape: Shape,
    pub keypoints: Vec<Keypoint>,
    /// Radius of a uniformly filled disk in channel 0 (sphere body).
    pub disk: Option<f64>,
    pub marker: Option<Vec3>,
    /// Symmetries of the unmarked body.
    pub body_group: Vec<Rotation>,
    /// Symmetries of the full object, marker included.
    pub group: Vec<Rotation>,
}

fn scale(v: Vec3, s: f64) -> Vec3 {
    let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
    [v[0] * s / n, v[1] * s / n, v[2] * s / n]
}

fn midpoint(a: &Vec3, b: &Vec3) -> Vec3 {
    [(a[0] + b[0]) / 2.0, (a[1] + b[1]) / 2.0, (a[2] + b[2]) / 2.0]
}

fn dist2(a: &Vec3, b: &Vec3) -> f64 {
    (0..3).map(|i| (a[i] - b[i]).powi(2)).sum()
}

/// Vertices in channel 0 plus midpoints of the shortest edges in channel 1.
fn polyhedron(vertices: Vec<Vec3>) -> Vec<Keypoint> {
    let mut edge = f64::INFINITY;
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            edge = edge.min(dist2(&vertices[i], &vertices[j]));
        }
    }
    let mut out: Vec<Keypoint> = vertices
        .iter()
        .map(|v| Keypoint {
            pos: *v,
            channel: 0,
            weight: 1.0,
        })
        .collect();
    for i in 0..vertices.len() {
        for j in (i + 1)..vertices.len() {
            if dist2(&vertices[i], &vertices[j]) < edge * (1.0 + 1e-6) {
                out.push(Keypoint {
                    pos: midpoint(&vertices[i], &vertices[j]),
                    channel: 1,
                    weight: 1.0,
                });
            }
        }
    }
    out
}

fn ring(z: f64, radius: f64, channel: usize) -> Vec<Keypoint> {
    (0..RING_POINTS)
        .map(|k| {
            let a = 2.0 * PI * k as f64 / RING_POINTS as f64;
            Keypoint {
                pos: [radius * a.cos(), radius * a.sin(), z],
                channel,
                weight: RING_WEIGHT,
            }
        })
        .collect()
}

/// Group generated by `gens`, identity first, in breadth-first order.
pub fn group_closure(gens: &[Rotation]) -> Vec<Rotation> {
    let mut out = vec![Rotation::identity()];
    let mut frontier = 0;
    while frontier < out.len() {
        let g = out[frontier];
        frontier += 1;
        for h in gens {
            let c = g * *h;
            if !out.iter().any(|e| e.abs_dot(&c) > 1.0 - 1e-10) {
                out.push(c);
                if out.len() > 10_000 {
                    panic!("generators do not span a finite group");
                }
            }
        }
    }
    out
}

fn axial_group(flip: bool) -> Vec<Rotation> {
    let about: Vec<Rotation> = (0..360)
        .map(|k| Rotation::rot_z((k as f64).to_radians()))
        .collect();
    if !flip {
        return about;
    }
    let f = Rotation::rot_x(PI);
    let mut out = about.clone();
    out.extend(about.iter().map(|r| *r * f));
    out
}

fn tet_vertices() -> Vec<Vec3> {
    [[1.0, 1.0, 1.0], [1.0, -1.0, -1.0], [-1.0, 1.0, -1.0], [-1.0, -1.0, 1.0]]
        .iter()
        .map(|v| scale(*v, SOLID_RADIUS))
        .collect()
}

fn tet_group() -> Vec<Rotation> {
    let three = Rotation::from_axis_angle(scale([1.0, 1.0, 1.0], 1.0), 2.0 * PI / 3.0);
    group_closure(&[three, Rotation::rot_z(PI)])
}

impl ShapeModel {
    pub fn new(shape: Shape) -> ShapeModel {
        let phi = (1.0 + 5f64.sqrt()) / 2.0;
        let (keypoints, disk, body_group) = match shape {
            Shape::Tet | Shape::TetX => (polyhedron(tet_vertices()), None, tet_group()),
            Shape::Cube => {
                let mut v = Vec::new();
                for x in [-1.0, 1.0] {
                    for y in [-1.0, 1.0] {
                        for z in [-1.0, 1.0] {
                            v.push(scale([x, y, z], SOLID_RADIUS));
                        }
                    }
                }
                let g = group_closure(&[Rotation::rot_z(PI / 2.0), Rotation::rot_x(PI / 2.0)]);
                (polyhedron(v), None, g)
            }
            Shape::Ico => {
                let mut v = Vec::new();
                for a in [-1.0, 1.0] {
                    for b in [-phi, phi] {
                        v.push(scale([0.0, a, b], SOLID_RADIUS));
                        v.push(scale([a, b, 0.0], SOLID_RADIUS));
                        v.push(scale([b, 0.0, a], SOLID_RADIUS));
                    }
                }
                let five = Rotation::from_axis_angle(scale([0.0, 1.0, phi], 1.0), 2.0 * PI / 5.0);
                let g = group_closure(&[five, Rotation::rot_z(PI)]);
                (polyhedron(v), None, g)
            }
            Shape::Cone => {
                let mut k = ring(-0.4, 0.6, 0);
                k.push(Keypoint {
                    pos: [0.0, 0.0, 0.6],
                    channel: 1,
                    weight: 1.0,
                });
                (k, None, axial_group(false))
            }
            Shape::Cyl | Shape::CylO => {
                let mut k = ring(0.5, 0.55, 0);
                k.extend(ring(-0.5, 0.55, 0));
                (k, None, axial_group(true))
            }
            Shape::SphX => (Vec::new(), Some(SPHERE_RADIUS), Vec::new()),
        };
        let (marker, group) = match shape {
            Shape::TetX => {
                // off-center on the face opposite vertex 0, so no face
                // rotation keeps it in place
                let v = tet_vertices();
                let c = [
                    (v[1][0] + v[2][0] + v[3][0]) / 3.0,
                    (v[1][1] + v[2][1] + v[3][1]) / 3.0,
                    (v[1][2] + v[2][2] + v[3][2]) / 3.0,
                ];
                let m = [
                    c[0] + 0.35 * (v[1][0] - c[0]),
                    c[1] + 0.35 * (v[1][1] - c[1]),
                    c[2] + 0.35 * (v[1][2] - c[2]),
                ];
                (Some(m), vec![Rotation::identity()])
            }
            Shape::CylO => (
                Some([0.55, 0.0, 0.0]),
                vec![Rotation::identity(), Rotation::rot_x(PI)],
            ),
            Shape::SphX => (Some([0.0, 0.0, SPHERE_RADIUS]), axial_group(false)),
            _ => (None, body_group.clone()),
        };
        ShapeModel {
            shape,
            keypoints,
            disk,
            marker,
            body_group,
            group,
        }
    }

    /// Whether the marker faces the camera under rotation `r`; `None` for
    /// unmarked shapes.
    pub fn marker_visible(&self, r: &Rotation) -> Option<bool> {
        self.marker.map(|m| r.apply(&m)[2] > MARKER_THRESHOLD)
    }

    /// All rotations producing the same image as `r`.
    pub fn equivalent_set(&self, r: &Rotation) -> Vec<Rotation> {
        match self.marker_visible(r) {
            None | Some(true) => self.group.iter().map(|s| *r * *s).collect(),
            Some(false) if self.shape == Shape::SphX => {
                // every rotation hiding the marker renders the bare disk;
                // represent that set by the grid points in it plus r
                let mut out = vec![*r];
                out.extend(sphx_hidden_grid().iter().copied());
                out
            }
            Some(false) => self
                .body_group
                .iter()
                .map(|s| *r * *s)
                .filter(|g| self.marker_visible(g) == Some(false))
                .collect(),
        }
    }

    /// A uniformly random element of the equivalent set of `r`.
    pub fn sample_equivalent<R: Rng>(&self, r: &Rotation, rng: &mut R) -> Rotation {
        if self.shape == Shape::SphX && self.marker_visible(r) == Some(false) {
            // the hidden set is continuous: rejection-sample it
            loop {
                let g = sample_uniform(rng);
                if self.marker_visible(&g) == Some(false) {
                    return g;
                }
            }
        }
        let set = self.equivalent_set(r);
        set[rng.gen_range(0..set.len())]
    }
}

fn sphx_hidden_grid() -> &'static [Rotation] {
    static HIDDEN: std::sync::OnceLock<Vec<Rotation>> = std::sync::OnceLock::new();
    HIDDEN.get_or_init(|| {
        let m = [0.0, 0.0, SPHERE_RADIUS];
        healpix_so3(2)
            .expect("fixed recursion")
            .rotations
            .into_iter()
            .filter(|g| g.apply(&m)[2] <= MARKER_THRESHOLD)
            .collect()
    })
}

pub fn symmetry_group(shape: Shape) -> Vec<Rotation> {
    ShapeModel::new(shape).group
}

/// Image size and splat width.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RenderConfig {
    pub height: usize,
    pub width: usize,
    pub sigma: f64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            height: IMAGE_SIZE,
            width: IMAGE_SIZE,
            sigma: SPLAT_SIGMA,
        }
    }
}

fn splat(img: &mut [f64], cfg: &RenderConfig, channel: usize, x: f64, y: f64, amp: f64) {
    let (h, w) = (cfg.height, cfg.width);
    let col = (x + 1.0) * w as f64 / 2.0 - 0.5;
    let row = (1.0 - y) * h as f64 / 2.0 - 0.5;
    let reach = SPLAT_RADIUS * cfg.sigma;
    let r0 = (row - reach).ceil().max(0.0) as usize;
    let r1 = (row + reach).floor().min(h as f64 - 1.0);
    let c0 = (col - reach).ceil().max(0.0) as usize;
    let c1 = (col + reach).floor().min(w as f64 - 1.0);
    if r1 < 0.0 || c1 < 0.0 {
        return;
    }
    let inv = 1.0 / (2.0 * cfg.sigma * cfg.sigma);
    let plane = &mut img[channel * h * w..(channel + 1) * h * w];
    for r in r0..=r1 as usize {
        let dr = r as f64 - row;
        for c in c0..=c1 as usize {
            let dc = c as f64 - col;
            plane[r * w + c] += amp * (-(dr * dr + dc * dc) * inv).exp();
        }
    }
}

/// Render a shape under rotation `r`.
pub fn render(model: &ShapeModel, r: &Rotation, cfg: &RenderConfig) -> FeatureMap {
    let (h, w) = (cfg.height, cfg.width);
    let mut img = vec![0.0; IMAGE_CHANNELS * h * w];
    let m = r.to_matrix();
    for k in &model.keypoints {
        let p = mat_vec(&m, &k.pos);
        let att = (0.55 + 0.45 * p[2]).max(0.0);
        splat(&mut img, cfg, k.channel, p[0], p[1], k.weight * att);
    }
    if let Some(radius) = model.disk {
        let rpx = radius * w as f64 / 2.0;
        for row in 0..h {
            for col in 0..w {
                let dx = col as f64 + 0.5 - w as f64 / 2.0;
                let dy = row as f64 + 0.5 - h as f64 / 2.0;
                let d = (dx * dx + dy * dy).sqrt();
                img[row * w + col] += 0.5 / (1.0 + ((d - rpx) / 0.5).exp());
            }
        }
    }
    if let Some(mk) = model.marker {
        let p = r.apply(&mk);
        let wgt = ((p[2] - MARKER_THRESHOLD) / MARKER_RAMP).clamp(0.0, 1.0) * MARKER_WEIGHT;
        if wgt > 0.0 {
            splat(&mut img, cfg, 2, p[0], p[1], wgt);
        }
    }
    FeatureMap {
        height: h,
        width: w,
        channels: IMAGE_CHANNELS,
        values: img,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn name(&self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

impl FromStr for Split {
    type Err = Error;
    fn from_str(s: &str) -> Result<Split> {
        match s {
            "train" => Ok(Split::Train),
            "test" | "eval" => Ok(Split::Test),
            _ => Err(Error::InvalidArgument(format!(
                "unknown split '{s}' (expected train or test)"
            ))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Sample {
    /// Channel, row, column.
    pub image: Vec<f32>,
    pub label: Rotation,
    /// Empty for training samples.
    pub equivalent: Vec<Rotation>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub shape: Shape,
    pub split: Split,
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    /// JSON echo of the generation parameters.
    pub config: String,
    pub samples: Vec<Sample>,
}

const DATASET_MAGIC: &[u8; 4] = b"SYML";
const DATASET_VERSION: u32 = 2;

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn image(&self, i: usize) -> FeatureMap {
        FeatureMap {
            height: self.height,
            width: self.width,
            channels: self.channels,
            values: self.samples[i].image.iter().map(|v| *v as f64).collect(),
        }
    }

    /// Marker visibility of sample `i`, derived from its label.
    pub fn marker_visible(&self, model: &ShapeModel, i: usize) -> Option<bool> {
        model.marker_visible(&self.samples[i].label)
    }

    pub fn write(&self, mut w: impl Write) -> Result<()> {
        w.write_all(DATASET_MAGIC)?;
        w.write_all(&DATASET_VERSION.to_le_bytes())?;
        w.write_all(&self.shape.id().to_le_bytes())?;
        w.write_all(&[matches!(self.split, Split::Test) as u8])?;
        w.write_all(&(self.samples.len() as u64).to_le_bytes())?;
        for d in [self.height, self.width, self.channels] {
            w.write_all(&(d as u32).to_le_bytes())?;
        }
        w.write_all(&(self.config.len() as u64).to_le_bytes())?;
        w.write_all(self.config.as_bytes())?;
        for s in &self.samples {
            for v in &s.image {
                w.write_all(&v.to_le_bytes())?;
            }
            for c in s.label.quaternion() {
                w.write_all(&c.to_le_bytes())?;
            }
            w.write_all(&(s.equivalent.len() as u32).to_le_bytes())?;
            for e in &s.equivalent {
                for c in e.quaternion() {
                    w.write_all(&c.to_le_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read(mut r: impl Read) -> Result<Dataset> {
        read_magic(&mut r, DATASET_MAGIC)?;
        let version = read_u32(&mut r)?;
        if version != DATASET_VERSION {
            return Err(Error::Format(format!("unsupported dataset version {version}")));
        }
        let shape = Shape::from_id(read_u32(&mut r)?)?;
        let split = match read_u8(&mut r)? {
            0 => Split::Train,
            1 => Split::Test,
            s => return Err(Error::Format(format!("bad split tag {s}"))),
        };
        let count = read_u64(&mut r)? as usize;
        let height = read_u32(&mut r)? as usize;
        let width = read_u32(&mut r)? as usize;
        let channels = read_u32(&mut r)? as usize;
        let config_len = read_u64(&mut r)? as usize;
        if config_len > 1 << 20 {
            return Err(Error::Format(format!("config blob of {config_len} bytes is implausible")));
        }
        let mut config = vec![0u8; config_len];
        r.read_exact(&mut config)?;
        let config = String::from_utf8(config)
            .map_err(|_| Error::Format("dataset config is not UTF-8".into()))?;
        let npix = height * width * channels;
        let read_rot = |r: &mut dyn Read| -> Result<Rotation> {
            let mut q = [0.0; 4];
            for c in &mut q {
                *c = read_f64(&mut &mut *r)?;
            }
            Ok(Rotation::from_quaternion(q[0], q[1], q[2], q[3]))
        };
        let mut samples = Vec::with_capacity(count.min(1 << 20));
        for _ in 0..count {
            let mut image = Vec::with_capacity(npix);
            for _ in 0..npix {
                image.push(read_f32(&mut r)?);
            }
            let label = read_rot(&mut r)?;
            let n_eq = read_u32(&mut r)? as usize;
            let mut equivalent = Vec::with_capacity(n_eq);
            for _ in 0..n_eq {
                equivalent.push(read_rot(&mut r)?);
            }
            samples.push(Sample {
                image,
                label,
                equivalent,
            });
        }
        Ok(Dataset {
            shape,
            split,
            height,
            width,
            channels,
            config,
            samples,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Dataset> {
        let f = std::fs::File::open(path)?;
        Dataset::read(std::io::BufReader::new(f))
    }
}

/// `n` samples with Haar-random rotations. Training labels are one random
/// member of each equivalent set; test samples store the pose itself as the
/// label and the whole set.
pub fn generate(shape: Shape, n: usize, seed: u64, split: Split, cfg: &RenderConfig) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::InvalidArgument("sample count must be at least 1".into()));
    }
    let model = ShapeModel::new(shape);
    let stream_base = match split {
        Split::Train => 0u64,
        Split::Test => 1u64 << 40,
    };
    let samples = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(stream_base + i as u64);
            let r = sample_uniform(&mut rng);
            let image: Vec<f32> = render(&model, &r, cfg).values.iter().map(|v| *v as f32).collect();
            match split {
                Split::Train => Sample {
                    image,
                    label: model.sample_equivalent(&r, &mut rng),
                    equivalent: Vec::new(),
                },
                Split::Test => Sample {
                    image,
                    label: r,
                    equivalent: model.equivalent_set(&r),
                },
            }
        })
        .collect();
    let config = serde_json::json!({
        "shape": shape.name(),
        "n": n,
        "seed": seed,
        "split": split.name(),
        "height": cfg.height,
        "width": cfg.width,
        "sigma": cfg.sigma,
    })
    .to_string();
    Ok(Dataset {
        shape,
        split,
        height: cfg.height,
        width: cfg.width,
        channels: IMAGE_CHANNELS,
        config,
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::geodesic_distance;

    fn max_abs_diff(a: &FeatureMap, b: &FeatureMap) -> f64 {
        a.values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max)
    }

    #[test]
    fn group_orders() {
        assert_eq!(symmetry_group(Shape::Tet).len(), 12);
        assert_eq!(symmetry_group(Shape::Cube).len(), 24);
        assert_eq!(symmetry_group(Shape::Ico).len(), 60);
        assert_eq!(symmetry_group(Shape::Cone).len(), 360);
        assert_eq!(symmetry_group(Shape::Cyl).len(), 720);
        assert_eq!(symmetry_group(Shape::TetX).len(), 1);
        assert_eq!(symmetry_group(Shape::CylO).len(), 2);
        assert_eq!(symmetry_group(Shape::SphX).len(), 360);
        assert!("bogus".parse::<Shape>().is_err());
        assert_eq!("cylO".parse::<Shape>().unwrap(), Shape::CylO);
    }

    #[test]
    fn groups_are_closed() {
        for shape in [Shape::Tet, Shape::Cube, Shape::Ico, Shape::Cyl, Shape::CylO] {
            let g = symmetry_group(shape);
            for a in g.iter().step_by(7) {
                for b in g.iter().step_by(5) {
                    let c = *a * *b;
                    assert!(g.iter().any(|e| geodesic_distance(e, &c) < 1e-6), "{shape}");
                }
            }
        }
    }

    #[test]
    fn renders_invariant_under_symmetry() {
        let cfg = RenderConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(70);
        for shape in [Shape::Tet, Shape::Cube, Shape::Ico, Shape::Cone, Shape::Cyl] {
            let model = ShapeModel::new(shape);
            let r = sample_uniform(&mut rng);
            let base = render(&model, &r, &cfg);
            for s in model.group.iter().step_by(37) {
                let other = render(&model, &(r * *s), &cfg);
                assert!(max_abs_diff(&base, &other) < 1e-6, "{shape}");
            }
        }
    }

    #[test]
    fn render_is_deterministic_and_nonzero() {
        let model = ShapeModel::new(Shape::Cube);
        let r = Rotation::rot_x(0.3);
        let a = render(&model, &r, &RenderConfig::default());
        let b = render(&model, &r, &RenderConfig::default());
        assert_eq!(a.values, b.values);
        assert!(a.values.iter().any(|v| *v > 0.5));
    }

    #[test]
    fn marker_visibility_and_hidden_images() {
        let cfg = RenderConfig::default();
        let cylo = ShapeModel::new(Shape::CylO);
        // marker at +x; rotating it to face away hides it
        assert_eq!(cylo.marker_visible(&Rotation::rot_y(-PI / 2.0)), Some(true));
        assert_eq!(cylo.marker_visible(&Rotation::rot_y(PI / 2.0)), Some(false));
        assert_eq!(ShapeModel::new(Shape::Cube).marker_visible(&Rotation::identity()), None);

        let r = Rotation::rot_y(PI / 2.0);
        let eq = cylo.equivalent_set(&r);
        assert!(eq.len() > 100);
        let base = render(&cylo, &r, &cfg);
        for g in eq.iter().step_by(41) {
            assert_eq!(cylo.marker_visible(g), Some(false));
            assert!(max_abs_diff(&base, &render(&cylo, g, &cfg)) < 1e-6);
        }
        let vis = cylo.equivalent_set(&Rotation::rot_y(-PI / 2.0));
        assert_eq!(vis.len(), 2);

        let tetx = ShapeModel::new(Shape::TetX);
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let mut seen = (false, false);
        for _ in 0..50 {
            let r = sample_uniform(&mut rng);
            let eq = tetx.equivalent_set(&r);
            match tetx.marker_visible(&r).unwrap() {
                true => {
                    seen.0 = true;
                    assert_eq!(eq.len(), 1);
                }
                false => {
                    seen.1 = true;
                    assert!(!eq.is_empty() && eq.len() <= 12);
                }
            }
        }
        assert!(seen.0 && seen.1);

        let sphx = ShapeModel::new(Shape::SphX);
        let hidden = Rotation::rot_x(PI);
        assert_eq!(sphx.marker_visible(&hidden), Some(false));
        let a = render(&sphx, &hidden, &cfg);
        let b = render(&sphx, &Rotation::rot_y(2.0), &cfg);
        assert!(max_abs_diff(&a, &b) < 1e-12);
        assert_eq!(sphx.equivalent_set(&Rotation::identity()).len(), 360);
    }

    #[test]
    fn generate_labels_and_roundtrip() {
        let cfg = RenderConfig::default();
        let train = generate(Shape::Cyl, 20, 5, Split::Train, &cfg).unwrap();
        let test = generate(Shape::Cyl, 20, 5, Split::Test, &cfg).unwrap();
        let model = ShapeModel::new(Shape::Cyl);
        for a in &train.samples {
            // any member of the equivalent set renders the same image
            let img = render(&model, &a.label, &cfg);
            let diff = img
                .values
                .iter()
                .zip(&a.image)
                .map(|(x, y)| (*x as f32 - y).abs())
                .fold(0.0f32, f32::max);
            assert!(diff < 1e-5);
            assert!(a.equivalent.is_empty());
        }
        for b in &test.samples {
            assert_eq!(b.equivalent.len(), model.group.len());
            assert!(b.equivalent.iter().any(|e| geodesic_distance(e, &b.label) < 0.5f64.to_radians()));
        }
        assert_ne!(train.samples[0].image, test.samples[0].image);
        let mut buf = Vec::new();
        test.write(&mut buf).unwrap();
        assert_eq!(&buf[..4], b"SYML");
        assert_eq!(Dataset::read(&buf[..]).unwrap(), test);
        assert!(generate(Shape::Cyl, 0, 5, Split::Train, &cfg).is_err());
    }
}
