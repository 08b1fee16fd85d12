//! Versioned little-endian snapshot of weights, optimizer moments and return
//! statistics.

use std::io::{Read, Write};

use thiserror::Error;

use crate::nn::{AdamState, NetDims, PolicyParams};
use crate::trainer::PopArtState;

const MAGIC: &[u8; 8] = b"AUXDCKPT";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("not a checkpoint file")]
    BadMagic,
    #[error("unsupported checkpoint version {0}")]
    Version(u32),
    #[error("corrupt checkpoint: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub params: PolicyParams,
    pub adam: AdamState,
    pub popart: PopArtState,
}

fn put_u64(w: &mut impl Write, v: u64) -> std::io::Result<()> {
    w.write_all(&v.to_le_bytes())
}

fn put_f64s(w: &mut impl Write, xs: &[f64]) -> std::io::Result<()> {
    put_u64(w, xs.len() as u64)?;
    for x in xs {
        w.write_all(&x.to_le_bytes())?;
    }
    Ok(())
}

fn get_u64(r: &mut impl Read) -> Result<u64, CheckpointError> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn get_f64(r: &mut impl Read) -> Result<f64, CheckpointError> {
    Ok(f64::from_bits(get_u64(r)?))
}

fn get_f64s(r: &mut impl Read, expect: Option<usize>) -> Result<Vec<f64>, CheckpointError> {
    let n = get_u64(r)? as usize;
    if let Some(e) = expect {
        if n != e {
            return Err(CheckpointError::Corrupt(format!("expected {e} values, found {n}")));
        }
    }
    if n > 1 << 28 {
        return Err(CheckpointError::Corrupt(format!("implausible length {n}")));
    }
    (0..n).map(|_| get_f64(r)).collect()
}

impl Checkpoint {
    pub fn write_to(&self, mut w: impl Write) -> Result<(), CheckpointError> {
        let d = self.params.dims();
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        for v in [d.obs_dim, d.hidden, d.n_actions, d.n_values] {
            put_u64(&mut w, v as u64)?;
        }
        put_f64s(&mut w, self.params.as_slice())?;
        put_u64(&mut w, self.adam.step)?;
        for v in [self.adam.beta1, self.adam.beta2, self.adam.eps] {
            w.write_all(&v.to_le_bytes())?;
        }
        put_f64s(&mut w, &self.adam.m)?;
        put_f64s(&mut w, &self.adam.v)?;
        w.write_all(&self.popart.beta.to_le_bytes())?;
        put_f64s(&mut w, &self.popart.first)?;
        put_f64s(&mut w, &self.popart.second)?;
        put_f64s(&mut w, &self.popart.debias)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self, CheckpointError> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(CheckpointError::BadMagic);
        }
        let mut v = [0u8; 4];
        r.read_exact(&mut v)?;
        let version = u32::from_le_bytes(v);
        if version != FORMAT_VERSION {
            return Err(CheckpointError::Version(version));
        }
        let mut dim = || -> Result<usize, CheckpointError> { Ok(get_u64(&mut r)? as usize) };
        let dims = NetDims { obs_dim: dim()?, hidden: dim()?, n_actions: dim()?, n_values: dim()? };
        let n = dims.param_count();
        let params = PolicyParams::from_flat(dims, get_f64s(&mut r, Some(n))?)
            .map_err(|e| CheckpointError::Corrupt(e.to_string()))?;
        let step = get_u64(&mut r)?;
        let (beta1, beta2, eps) = (get_f64(&mut r)?, get_f64(&mut r)?, get_f64(&mut r)?);
        let m = get_f64s(&mut r, Some(n))?;
        let v = get_f64s(&mut r, Some(n))?;
        let adam = AdamState { step, m, v, beta1, beta2, eps };
        let beta = get_f64(&mut r)?;
        let k = dims.n_values;
        let popart = PopArtState {
            beta,
            first: get_f64s(&mut r, Some(k))?,
            second: get_f64s(&mut r, Some(k))?,
            debias: get_f64s(&mut r, Some(k))?,
        };
        Ok(Checkpoint { params, adam, popart })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<(), CheckpointError> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<Self, CheckpointError> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    fn sample() -> Checkpoint {
        let dims = NetDims { obs_dim: 13, hidden: 8, n_actions: 7, n_values: 5 };
        let params = PolicyParams::init(dims, &mut rand_chacha::ChaCha8Rng::seed_from_u64(4));
        let n = params.as_slice().len();
        let mut adam = AdamState::new(n);
        adam.step = 17;
        adam.m.iter_mut().enumerate().for_each(|(i, x)| *x = i as f64 * 1e-3);
        adam.v.iter_mut().enumerate().for_each(|(i, x)| *x = i as f64 * 1e-6);
        let mut popart = PopArtState::new(5, 3e-4);
        popart.first = vec![0.1, -0.2, 0.3, 1.5, 2.0];
        popart.second = vec![1.0, 2.0, 3.0, 4.0, 5.0];
        popart.debias = vec![0.5; 5];
        Checkpoint { params, adam, popart }
    }

    #[test]
    fn round_trip_is_exact() {
        let c = sample();
        let mut bytes = Vec::new();
        c.write_to(&mut bytes).unwrap();
        assert_eq!(Checkpoint::read_from(bytes.as_slice()).unwrap(), c);
    }

    #[test]
    fn rejects_bad_input() {
        let c = sample();
        let mut bytes = Vec::new();
        c.write_to(&mut bytes).unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::BadMagic)));
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(matches!(Checkpoint::read_from(bad.as_slice()), Err(CheckpointError::Version(9))));
        bytes.truncate(bytes.len() - 3);
        assert!(Checkpoint::read_from(bytes.as_slice()).is_err());
    }
}
