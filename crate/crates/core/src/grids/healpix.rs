//! Ring-scheme HEALPix pixel centers on S² and their SO(3) extension.

use std::f64::consts::PI;
use std::sync::OnceLock;

use super::index::RotationIndex;
use super::EulerLayout;
use crate::error::{Error, Result};
use crate::rotation::{Rotation, Vec3};

pub const MAX_S2_RECURSION: u32 = 8;
pub const MAX_SO3_RECURSION: u32 = 5;

/// HEALPix centers at one recursion level (`nside = 2^recursion`).
#[derive(Clone, Debug)]
pub struct S2Grid {
    pub recursion: u32,
    pub points: Vec<Vec3>,
    /// Colatitude and longitude of each point, in the same order.
    pub angles: Vec<(f64, f64)>,
    pub cell_area: f64,
}

impl S2Grid {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// One iso-latitude ring: `z`, number of pixels and the longitude of pixel 0.
#[derive(Clone, Copy, Debug)]
pub(crate) struct HealpixRing {
    pub z: f64,
    pub count: usize,
    pub phi0: f64,
}

pub(crate) fn healpix_rings(nside: usize) -> Vec<HealpixRing> {
    let ns = nside as f64;
    let mut rings = Vec::with_capacity(4 * nside - 1);
    for i in 1..4 * nside {
        let ring = if i < nside {
            let fi = i as f64;
            HealpixRing {
                z: 1.0 - fi * fi / (3.0 * ns * ns),
                count: 4 * i,
                phi0: PI / (2.0 * fi) * 0.5,
            }
        } else if i <= 3 * nside {
            let shift = ((i - nside + 1) % 2) as f64;
            HealpixRing {
                z: 4.0 / 3.0 - 2.0 * i as f64 / (3.0 * ns),
                count: 4 * nside,
                phi0: PI / (2.0 * ns) * (1.0 - shift / 2.0),
            }
        } else {
            let ip = (4 * nside - i) as f64;
            HealpixRing {
                z: -(1.0 - ip * ip / (3.0 * ns * ns)),
                count: 4 * (4 * nside - i),
                phi0: PI / (2.0 * ip) * 0.5,
            }
        };
        rings.push(ring);
    }
    rings
}

impl HealpixRing {
    pub fn dphi(&self) -> f64 {
        2.0 * PI / self.count as f64
    }

    pub fn theta(&self) -> f64 {
        self.z.clamp(-1.0, 1.0).acos()
    }
}

fn check_recursion(level: u32, max: u32) -> Result<()> {
    if level > max {
        Err(Error::RecursionOutOfRange { level, max })
    } else {
        Ok(())
    }
}

/// HEALPix pixel centers, ring ordering, `12 * 4^recursion` points.
pub fn healpix_s2(recursion: u32) -> Result<S2Grid> {
    check_recursion(recursion, MAX_S2_RECURSION)?;
    let nside = 1usize << recursion;
    let mut points = Vec::with_capacity(12 * nside * nside);
    let mut angles = Vec::with_capacity(12 * nside * nside);
    for ring in healpix_rings(nside) {
        let theta = ring.theta();
        let s = (1.0 - ring.z * ring.z).max(0.0).sqrt();
        for j in 0..ring.count {
            let phi = ring.phi0 + j as f64 * ring.dphi();
            points.push([s * phi.cos(), s * phi.sin(), ring.z]);
            angles.push((theta, phi));
        }
    }
    let cell_area = 4.0 * PI / points.len() as f64;
    Ok(S2Grid {
        recursion,
        points,
        angles,
        cell_area,
    })
}

/// Points of a full grid facing the camera (`z >= 0`, equator included).
/// The camera looks along `-z`, so `+z` points toward it.
pub fn hemisphere(grid: &S2Grid) -> S2Grid {
    // the equatorial ring sits at z = 0 up to rounding
    const EQUATOR_EPS: f64 = 1e-12;
    let keep: Vec<usize> = (0..grid.len())
        .filter(|&i| grid.points[i][2] >= -EQUATOR_EPS)
        .collect();
    S2Grid {
        recursion: grid.recursion,
        points: keep.iter().map(|&i| grid.points[i]).collect(),
        angles: keep.iter().map(|&i| grid.angles[i]).collect(),
        cell_area: grid.cell_area,
    }
}

/// Equivolumetric SO(3) grid: every HEALPix pixel `(theta, phi)` combined
/// with `6 * 2^recursion` evenly spaced third angles `psi`, giving the
/// rotation `Rz(phi) Ry(theta) Rz(psi)`. Index = `pixel * n_psi + j`.
#[derive(Debug)]
pub struct SO3Grid {
    pub recursion: u32,
    pub rotations: Vec<Rotation>,
    pub cell_volume: f64,
    pub layout: EulerLayout,
    index: OnceLock<RotationIndex>,
}

impl Clone for SO3Grid {
    fn clone(&self) -> Self {
        SO3Grid {
            recursion: self.recursion,
            rotations: self.rotations.clone(),
            cell_volume: self.cell_volume,
            layout: self.layout.clone(),
            index: OnceLock::new(),
        }
    }
}

pub fn healpix_so3(recursion: u32) -> Result<SO3Grid> {
    check_recursion(recursion, MAX_SO3_RECURSION)?;
    let nside = 1usize << recursion;
    let n_psi = 6 * nside;
    let gammas: Vec<f64> = (0..n_psi)
        .map(|j| 2.0 * PI * j as f64 / n_psi as f64)
        .collect();
    let rings = healpix_rings(nside)
        .iter()
        .map(|r| super::EulerRing {
            beta: r.theta(),
            alphas: (0..r.count).map(|j| r.phi0 + j as f64 * r.dphi()).collect(),
        })
        .collect();
    let layout = EulerLayout { rings, gammas };
    let rotations = layout.rotations();
    let cell_volume = PI * PI / rotations.len() as f64;
    Ok(SO3Grid {
        recursion,
        rotations,
        cell_volume,
        layout,
        index: OnceLock::new(),
    })
}

impl SO3Grid {
    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    /// Rebuild a grid from stored rotations (for example a grid file). The
    /// rotations must match the generated grid at that recursion.
    pub fn from_rotations(recursion: u32, rotations: Vec<Rotation>) -> Result<SO3Grid> {
        let grid = healpix_so3(recursion)?;
        if grid.rotations.len() != rotations.len() {
            return Err(Error::Format(format!(
                "SO(3) grid file has {} rotations, recursion {} needs {}",
                rotations.len(),
                recursion,
                grid.rotations.len()
            )));
        }
        let worst = grid
            .rotations
            .iter()
            .zip(&rotations)
            .map(|(a, b)| 1.0 - a.abs_dot(b))
            .fold(0.0f64, f64::max);
        if worst > 1e-12 {
            return Err(Error::Format(
                "SO(3) grid file does not match the generated grid".into(),
            ));
        }
        Ok(grid)
    }

    fn index(&self) -> &RotationIndex {
        self.index.get_or_init(|| RotationIndex::build(&self.rotations))
    }

    /// Index of the grid rotation closest to `r` in geodesic distance; ties go
    /// to the lowest index. Identical to [`SO3Grid::nearest_index_exhaustive`].
    pub fn nearest_index(&self, r: &Rotation) -> usize {
        self.index().nearest(&self.rotations, r)
    }

    pub fn nearest_index_exhaustive(&self, r: &Rotation) -> usize {
        nearest_exhaustive(&self.rotations, r)
    }
}

pub(crate) fn nearest_exhaustive(rotations: &[Rotation], r: &Rotation) -> usize {
    let mut best = f64::NEG_INFINITY;
    let mut arg = 0;
    for (i, g) in rotations.iter().enumerate() {
        let d = g.abs_dot(r);
        if d > best {
            best = d;
            arg = i;
        }
    }
    arg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rotation::{geodesic_distance, sample_uniform};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn s2_counts_and_norms() {
        for r in 0..=5 {
            let g = healpix_s2(r).unwrap();
            assert_eq!(g.len(), 12 * 4usize.pow(r));
            for p in &g.points {
                let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
                assert!((n - 1.0).abs() < 1e-12);
            }
            assert!((g.cell_area * g.len() as f64 - 4.0 * PI).abs() < 1e-12);
        }
        assert_eq!(healpix_s2(2).unwrap().len(), 192);
        assert!(healpix_s2(9).is_err());
    }

    #[test]
    fn s2_centroid_vanishes() {
        for r in 0..=3 {
            let g = healpix_s2(r).unwrap();
            let mut c = [0.0; 3];
            for p in &g.points {
                for k in 0..3 {
                    c[k] += p[k];
                }
            }
            for v in c {
                assert!((v / g.len() as f64).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn hemisphere_counts() {
        // nside=1: rings at z = 2/3, 0, -2/3 with 4 pixels each
        let h0 = hemisphere(&healpix_s2(0).unwrap());
        assert_eq!(h0.len(), 8);
        for r in 0..=4 {
            let g = healpix_s2(r).unwrap();
            let h = hemisphere(&g);
            let ring = 4 * (1usize << r);
            assert!(h.points.iter().all(|p| p[2] >= -1e-12));
            assert!(h.len() >= g.len() / 2 - ring && h.len() <= g.len() / 2 + ring);
            let h2 = hemisphere(&g);
            assert_eq!(h.points, h2.points);
        }
        assert_eq!(hemisphere(&healpix_s2(2).unwrap()).len(), 104);
    }

    #[test]
    fn so3_counts() {
        assert_eq!(healpix_so3(0).unwrap().len(), 72);
        assert_eq!(healpix_so3(1).unwrap().len(), 576);
        assert_eq!(healpix_so3(3).unwrap().len(), 36864);
        assert!(healpix_so3(6).is_err());
        let g = healpix_so3(2).unwrap();
        assert!((g.cell_volume * g.len() as f64 - PI * PI).abs() < 1e-12);
    }

    #[test]
    fn so3_pixel_axis_matches_s2_grid() {
        let s2 = healpix_s2(1).unwrap();
        let so3 = healpix_so3(1).unwrap();
        let n_psi = so3.layout.gammas.len();
        for (p, x) in s2.points.iter().enumerate() {
            for j in [0, n_psi / 2] {
                let z = so3.rotations[p * n_psi + j].apply(&[0.0, 0.0, 1.0]);
                for k in 0..3 {
                    assert!((z[k] - x[k]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn nearest_index_examples() {
        let g = healpix_so3(2).unwrap();
        for i in (0..g.len()).step_by(97) {
            assert_eq!(g.nearest_index(&g.rotations[i]), i);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = sample_uniform(&mut rng);
            assert_eq!(g.nearest_index(&r), g.nearest_index_exhaustive(&r));
        }
    }

    #[test]
    fn nearest_after_small_perturbation() {
        let g = healpix_so3(3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for i in (0..g.len()).step_by(1231) {
            let axis = sample_uniform(&mut rng).apply(&[1.0, 0.0, 0.0]);
            let r = g.rotations[i] * Rotation::from_axis_angle(axis, 1f64.to_radians());
            assert_eq!(g.nearest_index_exhaustive(&r), i);
            assert_eq!(g.nearest_index(&r), i);
            assert!(geodesic_distance(&r, &g.rotations[i]) < 1.0001f64.to_radians());
        }
    }
}
