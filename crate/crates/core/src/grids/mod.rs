//! Point sets on S² and SO(3): HEALPix pixelizations, the equivolumetric
//! SO(3) grid, exact quadrature grids and their cache files.

mod healpix;
pub(crate) mod index;
mod quadrature;

use std::io::{Read, Write};
use std::path::Path;

pub use healpix::{
    healpix_s2, healpix_so3, hemisphere, S2Grid, SO3Grid, MAX_S2_RECURSION, MAX_SO3_RECURSION,
};
pub use quadrature::{
    gauss_legendre, quadrature_s2, quadrature_so3, S2Quadrature, SO3Quadrature,
    MAX_QUADRATURE_BAND,
};

use crate::error::{Error, Result};
use crate::io::{read_f64, read_u32, read_u64};
use crate::rotation::{EulerZYZ, Rotation};

/// A ring of constant `beta` in a Z-Y-Z Euler grid.
#[derive(Clone, Debug)]
pub struct EulerRing {
    pub beta: f64,
    pub alphas: Vec<f64>,
}

/// Rotations `Rz(alpha) Ry(beta) Rz(gamma)` arranged as rings of constant
/// `beta`, each with its own `alpha` values, times a shared set of `gamma`
/// values. Points are ordered ring, then alpha, then gamma.
///
/// Both the HEALPix SO(3) grid and the SO(3) quadrature grid have this
/// shape, which the transforms in [`crate::harmonics`] exploit.
#[derive(Clone, Debug)]
pub struct EulerLayout {
    pub rings: Vec<EulerRing>,
    pub gammas: Vec<f64>,
}

impl EulerLayout {
    pub fn len(&self) -> usize {
        self.rings.iter().map(|r| r.alphas.len()).sum::<usize>() * self.gammas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn euler_angles(&self) -> Vec<EulerZYZ> {
        let mut out = Vec::with_capacity(self.len());
        for ring in &self.rings {
            for &alpha in &ring.alphas {
                for &gamma in &self.gammas {
                    out.push(EulerZYZ {
                        alpha,
                        beta: ring.beta,
                        gamma,
                    });
                }
            }
        }
        out
    }

    pub fn rotations(&self) -> Vec<Rotation> {
        self.euler_angles()
            .iter()
            .map(Rotation::from_euler_zyz)
            .collect()
    }
}

const S2_MAGIC: &[u8; 4] = b"S2GR";
const SO3_MAGIC: &[u8; 4] = b"SOGR";
const GRID_VERSION: u32 = 1;

fn write_header(w: &mut impl Write, magic: &[u8; 4], recursion: u32, count: u64) -> Result<()> {
    w.write_all(magic)?;
    w.write_all(&GRID_VERSION.to_le_bytes())?;
    w.write_all(&recursion.to_le_bytes())?;
    w.write_all(&count.to_le_bytes())?;
    Ok(())
}

fn read_header(r: &mut impl Read, magic: &[u8; 4]) -> Result<(u32, u64)> {
    let mut m = [0u8; 4];
    r.read_exact(&mut m)?;
    if &m != magic {
        return Err(Error::Format(format!(
            "expected magic {:?}, found {:?}",
            String::from_utf8_lossy(magic),
            String::from_utf8_lossy(&m)
        )));
    }
    let version = read_u32(r)?;
    if version != GRID_VERSION {
        return Err(Error::Format(format!("unsupported grid version {version}")));
    }
    Ok((read_u32(r)?, read_u64(r)?))
}

/// `S2GR` file: header then `x, y, z` per point as little-endian f64.
pub fn write_s2_grid(grid: &S2Grid, mut w: impl Write) -> Result<()> {
    write_header(&mut w, S2_MAGIC, grid.recursion, grid.len() as u64)?;
    for p in &grid.points {
        for c in p {
            w.write_all(&c.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_s2_grid(mut r: impl Read) -> Result<S2Grid> {
    let (recursion, count) = read_header(&mut r, S2_MAGIC)?;
    let mut points = Vec::with_capacity(count as usize);
    for _ in 0..count {
        points.push([read_f64(&mut r)?, read_f64(&mut r)?, read_f64(&mut r)?]);
    }
    let angles = points
        .iter()
        .map(|p| (p[2].clamp(-1.0, 1.0).acos(), p[1].atan2(p[0]).rem_euclid(2.0 * std::f64::consts::PI)))
        .collect();
    let cell_area = 4.0 * std::f64::consts::PI / (12u64 << (2 * recursion)) as f64;
    Ok(S2Grid {
        recursion,
        points,
        angles,
        cell_area,
    })
}

/// `SOGR` file: header then `w, x, y, z` per rotation as little-endian f64.
pub fn write_so3_grid(grid: &SO3Grid, mut w: impl Write) -> Result<()> {
    write_header(&mut w, SO3_MAGIC, grid.recursion, grid.len() as u64)?;
    for r in &grid.rotations {
        w.write_all(&r.to_le_bytes())?;
    }
    Ok(())
}

pub fn read_so3_grid(mut r: impl Read) -> Result<SO3Grid> {
    let (recursion, count) = read_header(&mut r, SO3_MAGIC)?;
    let mut rotations = Vec::with_capacity(count as usize);
    let mut buf = [0u8; 32];
    for _ in 0..count {
        r.read_exact(&mut buf)?;
        rotations.push(Rotation::from_le_bytes(&buf));
    }
    SO3Grid::from_rotations(recursion, rotations)
}

/// Load an SO(3) grid from `dir` if a cache file exists there, otherwise
/// build it and try to write the cache. Cache write failures are ignored.
pub fn so3_grid_cached(recursion: u32, dir: Option<&Path>) -> Result<SO3Grid> {
    let Some(dir) = dir else {
        return healpix_so3(recursion);
    };
    let path = dir.join(format!("so3_r{recursion}.sogr"));
    if let Ok(f) = std::fs::File::open(&path) {
        if let Ok(g) = read_so3_grid(std::io::BufReader::new(f)) {
            return Ok(g);
        }
    }
    let grid = healpix_so3(recursion)?;
    if std::fs::create_dir_all(dir).is_ok() {
        if let Ok(f) = std::fs::File::create(&path) {
            let _ = write_so3_grid(&grid, std::io::BufWriter::new(f));
        }
    }
    Ok(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_files_roundtrip() {
        let g = healpix_s2(2).unwrap();
        let mut buf = Vec::new();
        write_s2_grid(&g, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"S2GR");
        assert_eq!(buf.len(), 20 + 192 * 24);
        let back = read_s2_grid(&buf[..]).unwrap();
        assert_eq!(back.points, g.points);

        let s = healpix_so3(1).unwrap();
        let mut buf = Vec::new();
        write_so3_grid(&s, &mut buf).unwrap();
        assert_eq!(&buf[..4], b"SOGR");
        assert_eq!(u64::from_le_bytes(buf[12..20].try_into().unwrap()), 576);
        let back = read_so3_grid(&buf[..]).unwrap();
        assert_eq!(back.rotations, s.rotations);

        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(read_so3_grid(&bad[..]).is_err());
    }

    #[test]
    fn cache_dir_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let a = so3_grid_cached(1, Some(dir.path())).unwrap();
        assert!(dir.path().join("so3_r1.sogr").exists());
        let b = so3_grid_cached(1, Some(dir.path())).unwrap();
        assert_eq!(a.rotations, b.rotations);
    }
}
