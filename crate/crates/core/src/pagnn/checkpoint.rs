//! Parameter checkpoint: `"GHGP"`, u32 version, u32 config length, config
//! JSON, u64 scalar count, then every tensor in declaration order as
//! little-endian f64.

use std::io::{Read, Write};

use super::params::init_shape_template;
use super::{ModelError, PagnnConfig, PagnnParams};

const MAGIC: &[u8; 4] = b"GHGP";
const VERSION: u32 = 1;

pub fn write_checkpoint(mut w: impl Write, config: &PagnnConfig, params: &PagnnParams) -> Result<(), ModelError> {
    params.check_shapes(config)?;
    let cfg = serde_json::to_vec(config).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(cfg.len() as u32).to_le_bytes())?;
    w.write_all(&cfg)?;
    w.write_all(&(params.scalar_count() as u64).to_le_bytes())?;
    for t in params.tensors() {
        for x in t {
            w.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn read_checkpoint(mut r: impl Read) -> Result<(PagnnConfig, PagnnParams), ModelError> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(ModelError::Checkpoint("bad magic".into()));
    }
    let mut b4 = [0u8; 4];
    r.read_exact(&mut b4)?;
    let version = u32::from_le_bytes(b4);
    if version != VERSION {
        return Err(ModelError::Checkpoint(format!("unsupported version {version}")));
    }
    r.read_exact(&mut b4)?;
    let mut cfg = vec![0u8; u32::from_le_bytes(b4) as usize];
    r.read_exact(&mut cfg)?;
    let config: PagnnConfig = serde_json::from_slice(&cfg).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    config.validate()?;
    let mut b8 = [0u8; 8];
    r.read_exact(&mut b8)?;
    let count = u64::from_le_bytes(b8) as usize;
    let mut params = init_shape_template(&config);
    if count != params.scalar_count() {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint holds {count} scalars, configuration needs {}",
            params.scalar_count()
        )));
    }
    let mut values = Vec::with_capacity(count);
    for _ in 0..count {
        r.read_exact(&mut b8)?;
        values.push(f64::from_le_bytes(b8));
    }
    let mut trailing = [0u8; 1];
    if r.read(&mut trailing)? != 0 {
        return Err(ModelError::Checkpoint("trailing bytes".into()));
    }
    params.load_flat(&values)?;
    if !params.is_finite() {
        return Err(ModelError::Checkpoint("non-finite parameter".into()));
    }
    Ok((config, params))
}
