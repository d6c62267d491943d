//! Binary cache of FRS tables.
//!
//! Layout (little endian): magic `RTDFRS\0\0`, `u32` version, 32-byte SHA-256
//! key of the build parameters, the parameters themselves, `u32` time count,
//! `u32` cell count, one `[lo_x, lo_y, hi_x, hi_y]` `f64` record per footprint,
//! a `u8` inflation flag and, when set, one `f64` pad per footprint. Floats are
//! stored as raw bits, so write → read → write is byte identical.

use std::io::{self, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{build_frs, FrsError, FrsParams, FrsTable, B2};
use crate::dynamics::VehicleLimits;

const MAGIC: &[u8; 8] = b"RTDFRS\0\0";
const VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CacheError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("not an FRS cache file")]
    BadMagic,
    #[error("unsupported cache version {0}")]
    BadVersion(u32),
    #[error("cache key does not match its parameters")]
    KeyMismatch,
    #[error("corrupt cache: {0}")]
    Corrupt(&'static str),
    #[error(transparent)]
    Build(#[from] FrsError),
}

fn param_bytes(p: &FrsParams) -> Vec<u8> {
    let l = &p.limits;
    let mut out = Vec::with_capacity(72);
    for x in [l.v_max, l.omega_max, l.a_max, l.k_a, l.t_plan, l.t_stop] {
        out.extend_from_slice(&x.to_le_bytes());
    }
    out.extend_from_slice(&(p.n_k as u32).to_le_bytes());
    out.extend_from_slice(&p.dt.to_le_bytes());
    out.extend_from_slice(&p.robot_radius.to_le_bytes());
    out
}

/// SHA-256 of the build parameters; a cached table is reused only when its
/// key matches.
pub fn cache_key(p: &FrsParams) -> [u8; 32] {
    Sha256::digest(param_bytes(p)).into()
}

struct Reader<R> {
    inner: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const N: usize>(&mut self) -> io::Result<[u8; N]> {
        let mut b = [0u8; N];
        self.inner.read_exact(&mut b)?;
        Ok(b)
    }

    fn u32(&mut self) -> io::Result<u32> {
        Ok(u32::from_le_bytes(self.bytes()?))
    }

    fn f64(&mut self) -> io::Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }
}

impl FrsTable {
    pub fn write_to<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&cache_key(&self.params))?;
        w.write_all(&param_bytes(&self.params))?;
        w.write_all(&(self.times.len() as u32).to_le_bytes())?;
        w.write_all(&(self.n_cells() as u32).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.footprints.len() * 32);
        for b in &self.footprints {
            for x in b.lo().into_iter().chain(b.hi()) {
                buf.extend_from_slice(&x.to_le_bytes());
            }
        }
        w.write_all(&buf)?;
        match &self.inflation {
            None => w.write_all(&[0])?,
            Some(v) => {
                w.write_all(&[1])?;
                let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
                w.write_all(&bytes)?;
            }
        }
        w.flush()
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self, CacheError> {
        let mut r = Reader {
            inner: io::BufReader::new(r),
        };
        if &r.bytes::<8>()? != MAGIC {
            return Err(CacheError::BadMagic);
        }
        let version = r.u32()?;
        if version != VERSION {
            return Err(CacheError::BadVersion(version));
        }
        let key: [u8; 32] = r.bytes()?;
        let mut lim = [0.0; 6];
        for x in &mut lim {
            *x = r.f64()?;
        }
        let n_k = r.u32()? as usize;
        let dt = r.f64()?;
        let robot_radius = r.f64()?;
        let params = FrsParams {
            limits: VehicleLimits {
                v_max: lim[0],
                omega_max: lim[1],
                a_max: lim[2],
                k_a: lim[3],
                t_plan: lim[4],
                t_stop: lim[5],
            },
            n_k,
            dt,
            robot_radius,
        };
        if cache_key(&params) != key {
            return Err(CacheError::KeyMismatch);
        }
        params.validate()?;
        let n_t = r.u32()? as usize;
        let n_cells = r.u32()? as usize;
        if n_t != params.n_times() || n_cells != n_k * n_k {
            return Err(CacheError::Corrupt("grid sizes disagree with parameters"));
        }
        let mut footprints = Vec::with_capacity(n_t * n_cells);
        for _ in 0..n_t * n_cells {
            let (a, b, c, d) = (r.f64()?, r.f64()?, r.f64()?, r.f64()?);
            let bx = B2::try_new([a, b], [c, d])
                .map_err(|_| CacheError::Corrupt("invalid footprint"))?;
            footprints.push(bx);
        }
        let inflation = match r.bytes::<1>()?[0] {
            0 => None,
            1 => Some(
                (0..n_t * n_cells)
                    .map(|_| r.f64())
                    .collect::<io::Result<Vec<_>>>()?,
            ),
            _ => return Err(CacheError::Corrupt("bad inflation flag")),
        };
        if r.inner.read(&mut [0u8; 1])? != 0 {
            return Err(CacheError::Corrupt("trailing bytes"));
        }
        Ok(Self::from_parts(params, footprints, inflation))
    }

    pub fn save(&self, path: &Path) -> Result<(), CacheError> {
        let f = std::fs::File::create(path)?;
        self.write_to(io::BufWriter::new(f))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, CacheError> {
        Self::read_from(std::fs::File::open(path)?)
    }

    /// Loads the non-inflated table from `path` when its parameters match,
    /// otherwise builds it and rewrites the file.
    pub fn load_or_build(path: &Path, params: &FrsParams) -> Result<Self, CacheError> {
        if let Ok(t) = Self::load(path) {
            if t.params == *params && !t.is_inflated() {
                return Ok(t);
            }
        }
        let t = build_frs(params)?;
        t.save(path)?;
        Ok(t)
    }
}

#[cfg(test)]
mod tests {
    use super::super::{inflate_frs, TrackingErrorBound};
    use super::*;

    fn table() -> FrsTable {
        build_frs(&FrsParams {
            n_k: 5,
            dt: 0.1,
            ..FrsParams::default()
        })
        .unwrap()
    }

    #[test]
    fn round_trip_is_byte_identical() {
        let t = table();
        let g = TrackingErrorBound::constant(t.times().len(), 0.1, 0.05);
        for t in [t.clone(), inflate_frs(&t, &g).unwrap()] {
            let mut a = Vec::new();
            t.write_to(&mut a).unwrap();
            let back = FrsTable::read_from(a.as_slice()).unwrap();
            assert_eq!(back, t);
            let mut b = Vec::new();
            back.write_to(&mut b).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn rejects_tampering() {
        let mut a = Vec::new();
        table().write_to(&mut a).unwrap();
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(matches!(
            FrsTable::read_from(bad.as_slice()),
            Err(CacheError::BadMagic)
        ));
        let mut bad = a.clone();
        bad[44] ^= 1; // first parameter byte
        assert!(matches!(
            FrsTable::read_from(bad.as_slice()),
            Err(CacheError::KeyMismatch)
        ));
        a.push(0);
        assert!(matches!(
            FrsTable::read_from(a.as_slice()),
            Err(CacheError::Corrupt(_))
        ));
    }

    #[test]
    fn key_depends_on_every_parameter() {
        let p = FrsParams::default();
        let mut q = p;
        q.limits.a_max += 1.0;
        assert_ne!(cache_key(&p), cache_key(&q));
        let mut q = p;
        q.n_k += 2;
        assert_ne!(cache_key(&p), cache_key(&q));
    }
}
