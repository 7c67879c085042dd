//! Binary snapshot dumps of coupled trajectories, for debugging.
//!
//! Layout (all integers and floats little-endian):
//!
//! ```text
//! header:
//!   magic         8 bytes  "LLSNAP01"
//!   n             u32      modes per axis
//!   cutoff        u32      largest retained |k|_inf
//!   levels        u32      number of alpha levels
//!   stride        u32      steps between frames
//!   modes         u32      retained wave vectors per field
//!   length, nu, dt, horizon   f64 x 4
//!   alphas        f64 x levels
//!   params_hash   16 bytes  truncated SHA-256 of the parameters
//! frame (repeated):
//!   step          u64
//!   t             f64
//!   fields        (1 + levels) x modes x [x.re, x.im, y.re, y.im] f64
//! ```
//!
//! Fields are `u` followed by each `u^α`; modes follow
//! `Grid::retained_indices` order.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::integrator::{CoupledState, SimParams};
use crate::spectral::SpectralVelocity;

pub const MAGIC: &[u8; 8] = b"LLSNAP01";

/// Truncated SHA-256 over every input that determines a trajectory
/// (besides the sample seed).
pub fn params_hash(params: &SimParams) -> [u8; 16] {
    let mut h = Sha256::new();
    let g = &params.grid;
    h.update((g.n() as u64).to_le_bytes());
    h.update((g.cutoff() as u64).to_le_bytes());
    h.update((g.dealias_cutoff() as u64).to_le_bytes());
    for v in [g.length(), params.nu, params.dt, params.horizon] {
        h.update(v.to_le_bytes());
    }
    h.update((params.alphas.len() as u64).to_le_bytes());
    for a in &params.alphas {
        h.update(a.to_le_bytes());
    }
    for m in params.noise.modes() {
        h.update((m.index as u64).to_le_bytes());
        h.update([m.part as u8]);
        h.update(m.a.to_le_bytes());
        h.update(m.b.to_le_bytes());
    }
    for c in params.u0.x().iter().chain(params.u0.y()) {
        h.update(c.re.to_le_bytes());
        h.update(c.im.to_le_bytes());
    }
    h.update([params.advection as u8]);
    let digest = h.finalize();
    let mut out = [0u8; 16];
    out.copy_from_slice(&digest[..16]);
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotHeader {
    pub n: u32,
    pub cutoff: u32,
    pub stride: u32,
    pub modes: u32,
    pub length: f64,
    pub nu: f64,
    pub dt: f64,
    pub horizon: f64,
    pub alphas: Vec<f64>,
    pub params_hash: [u8; 16],
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotFrame {
    pub step: u64,
    pub t: f64,
    /// `fields[f][4 * mode + c]`, `c` over `x.re, x.im, y.re, y.im`.
    pub fields: Vec<Vec<f64>>,
}

pub struct SnapshotWriter {
    out: BufWriter<File>,
    stride: usize,
    indices: Vec<usize>,
}

impl SnapshotWriter {
    pub fn create(path: &Path, params: &SimParams, stride: usize) -> Result<Self> {
        if stride == 0 {
            return Err(Error::Validation("snapshot stride must be positive".into()));
        }
        let indices: Vec<usize> = params.grid.retained_indices().collect();
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(MAGIC)?;
        for v in [
            params.grid.n(),
            params.grid.cutoff(),
            params.alphas.len(),
            stride,
            indices.len(),
        ] {
            out.write_all(&(v as u32).to_le_bytes())?;
        }
        for v in [params.grid.length(), params.nu, params.dt, params.horizon] {
            out.write_all(&v.to_le_bytes())?;
        }
        for a in &params.alphas {
            out.write_all(&a.to_le_bytes())?;
        }
        out.write_all(&params_hash(params))?;
        Ok(SnapshotWriter { out, stride, indices })
    }

    fn write_field(&mut self, f: &SpectralVelocity) -> Result<()> {
        for &i in &self.indices {
            for v in [f.x()[i].re, f.x()[i].im, f.y()[i].re, f.y()[i].im] {
                self.out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Record the state if its step is on the stride.
    pub fn observe(&mut self, state: &CoupledState<'_>) -> Result<()> {
        if !state.step.is_multiple_of(self.stride) {
            return Ok(());
        }
        self.out.write_all(&(state.step as u64).to_le_bytes())?;
        self.out.write_all(&state.t.to_le_bytes())?;
        self.write_field(state.u_ref)?;
        for u in state.u_alpha {
            self.write_field(u)?;
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush()?;
        Ok(())
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_f64(r: &mut impl Read) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_snapshot(path: &Path) -> Result<(SnapshotHeader, Vec<SnapshotFrame>)> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::Data(format!("{} is not a snapshot file", path.display())));
    }
    let n = read_u32(&mut r)?;
    let cutoff = read_u32(&mut r)?;
    let levels = read_u32(&mut r)? as usize;
    let stride = read_u32(&mut r)?;
    let modes = read_u32(&mut r)?;
    let length = read_f64(&mut r)?;
    let nu = read_f64(&mut r)?;
    let dt = read_f64(&mut r)?;
    let horizon = read_f64(&mut r)?;
    let alphas = (0..levels).map(|_| read_f64(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut params_hash = [0u8; 16];
    r.read_exact(&mut params_hash)?;
    let header = SnapshotHeader {
        n,
        cutoff,
        stride,
        modes,
        length,
        nu,
        dt,
        horizon,
        alphas,
        params_hash,
    };

    let mut frames = Vec::new();
    let mut step_bytes = [0u8; 8];
    loop {
        match r.read_exact(&mut step_bytes) {
            Ok(()) => {}
            Err(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => break,
            Err(e) => return Err(e.into()),
        }
        let t = read_f64(&mut r)?;
        let fields = (0..=levels)
            .map(|_| (0..4 * modes as usize).map(|_| read_f64(&mut r)).collect())
            .collect::<Result<Vec<Vec<f64>>>>()?;
        frames.push(SnapshotFrame {
            step: u64::from_le_bytes(step_bytes),
            t,
            fields,
        });
    }
    Ok((header, frames))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::integrator::{random_initial_condition, run_coupled_observed};
    use crate::noise::{make_noise_model, NoiseConfig, NoiseStream};
    use crate::spectral::{Grid, GridSpec};

    fn params() -> SimParams {
        let g = Grid::new(GridSpec::new(1.0, 16)).unwrap();
        let noise = make_noise_model(&g, &NoiseConfig { noise_cutoff: 5, ..NoiseConfig::default() }).unwrap();
        let u0 = random_initial_condition(&g, 1, 3.0).unwrap();
        SimParams::new(0.05, vec![0.2, 0.1], 0.01, 0.1, noise, u0).unwrap()
    }

    #[test]
    fn round_trip() {
        let p = params();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.bin");
        let mut w = SnapshotWriter::create(&path, &p, 3).unwrap();
        let mut expected = Vec::new();
        run_coupled_observed(&p, NoiseStream::new(2, 0), |s| {
            if s.step % 3 == 0 {
                let idx = p.grid.retained_indices().next().unwrap();
                expected.push((s.step as u64, s.u_alpha[1].y()[idx].im));
            }
            w.observe(s)
        })
        .unwrap();
        w.finish().unwrap();

        let (h, frames) = read_snapshot(&path).unwrap();
        assert_eq!(h.n, 16);
        assert_eq!(h.alphas, vec![0.2, 0.1]);
        assert_eq!(h.params_hash, params_hash(&p));
        assert_eq!(h.modes as usize, p.grid.retained_indices().count());
        assert_eq!(frames.len(), expected.len());
        for (f, (step, v)) in frames.iter().zip(&expected) {
            assert_eq!(f.step, *step);
            assert_eq!(f.fields.len(), 3);
            assert_eq!(f.fields[2][3], *v);
        }
    }

    #[test]
    fn hash_tracks_parameters() {
        let p = params();
        let mut q = p.clone();
        q.nu = 0.06;
        assert_ne!(params_hash(&p), params_hash(&q));
        assert_eq!(params_hash(&p), params_hash(&p.clone()));
    }
}
