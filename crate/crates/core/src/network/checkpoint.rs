//! Binary checkpoint format for [`CompositeModel`].
//!
//! All integers are little-endian `u32`, all reals little-endian IEEE-754
//! `f64`, so a save/load round trip is bit-exact.
//!
//! ```text
//! magic       8 bytes   b"SPLCKPT\0"
//! version     u32       currently 1
//! input_dim   u32
//! n_outer     u32
//! n_inner     u32
//! n_outer x   net
//! n_inner x   component u32, kind u8 (0 = offset, 1 = complement),
//!             axis u32, origin f64 (0 for complement), delta f64, net
//!
//! net:        n_sizes u32, sizes u32 x n_sizes,
//!             params f64 x sum_k (sizes[k] * sizes[k+1] + sizes[k+1])
//!             (per layer: row-major weights, then biases)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::{BlendDescriptor, BoundaryDistance, CompositeModel, InnerNet, Mlp};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SPLCKPT\0";
pub const FORMAT_VERSION: u32 = 1;

// Guards against absurd allocations when reading a corrupt file.
const MAX_LAYERS: u32 = 1 << 10;
const MAX_WIDTH: u32 = 1 << 16;

pub fn write_model<W: Write>(model: &CompositeModel, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    put_u32(&mut w, FORMAT_VERSION)?;
    put_u32(&mut w, model.input_dim() as u32)?;
    put_u32(&mut w, model.outer().len() as u32)?;
    put_u32(&mut w, model.inner().len() as u32)?;
    for net in model.outer() {
        write_net(&mut w, net)?;
    }
    for inner in model.inner() {
        put_u32(&mut w, inner.component as u32)?;
        let (kind, axis, origin) = match inner.blend.distance {
            BoundaryDistance::Offset { axis, origin } => (0u8, axis, origin),
            BoundaryDistance::Complement { axis } => (1u8, axis, 0.0),
        };
        w.write_all(&[kind])?;
        put_u32(&mut w, axis as u32)?;
        put_f64(&mut w, origin)?;
        put_f64(&mut w, inner.blend.delta)?;
        write_net(&mut w, &inner.net)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<CompositeModel> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic).map_err(truncated)?;
    if &magic != MAGIC {
        return Err(Error::Checkpoint("bad magic, not a splayer checkpoint".into()));
    }
    let version = get_u32(&mut r)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!("unsupported format version {version}")));
    }
    let _input_dim = get_u32(&mut r)?;
    let n_outer = get_u32(&mut r)?;
    let n_inner = get_u32(&mut r)?;
    if n_outer > MAX_LAYERS || n_inner > MAX_LAYERS {
        return Err(Error::Checkpoint("implausible subnetwork count".into()));
    }
    let outer = (0..n_outer).map(|_| read_net(&mut r)).collect::<Result<Vec<_>>>()?;
    let mut inner = Vec::with_capacity(n_inner as usize);
    for _ in 0..n_inner {
        let component = get_u32(&mut r)? as usize;
        let mut kind = [0u8; 1];
        r.read_exact(&mut kind).map_err(truncated)?;
        let axis = get_u32(&mut r)? as usize;
        let origin = get_f64(&mut r)?;
        let delta = get_f64(&mut r)?;
        let distance = match kind[0] {
            0 => BoundaryDistance::Offset { axis, origin },
            1 => BoundaryDistance::Complement { axis },
            k => return Err(Error::Checkpoint(format!("unknown boundary distance kind {k}"))),
        };
        let blend = BlendDescriptor::new(distance, delta).map_err(|e| Error::Checkpoint(e.to_string()))?;
        let net = read_net(&mut r)?;
        inner.push(InnerNet { net, blend, component });
    }
    CompositeModel::new(outer, inner).map_err(|e| Error::Checkpoint(e.to_string()))
}

pub fn save(model: &CompositeModel, path: impl AsRef<Path>) -> Result<()> {
    let mut buf = Vec::new();
    write_model(model, &mut buf)?;
    std::fs::write(path, buf)?;
    Ok(())
}

pub fn load(path: impl AsRef<Path>) -> Result<CompositeModel> {
    let bytes = std::fs::read(path)?;
    read_model(bytes.as_slice())
}

fn write_net<W: Write>(w: &mut W, net: &Mlp) -> Result<()> {
    put_u32(w, net.layer_sizes().len() as u32)?;
    for &s in net.layer_sizes() {
        put_u32(w, s as u32)?;
    }
    for &p in net.params() {
        put_f64(w, p)?;
    }
    Ok(())
}

fn read_net<R: Read>(r: &mut R) -> Result<Mlp> {
    let n = get_u32(r)?;
    if n > MAX_LAYERS {
        return Err(Error::Checkpoint(format!("implausible layer count {n}")));
    }
    let mut sizes = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let s = get_u32(r)?;
        if s > MAX_WIDTH {
            return Err(Error::Checkpoint(format!("implausible layer width {s}")));
        }
        sizes.push(s as usize);
    }
    let len = Mlp::zeros(&sizes).map_err(|e| Error::Checkpoint(e.to_string()))?.n_params();
    let params = (0..len).map(|_| get_f64(r)).collect::<Result<Vec<_>>>()?;
    Mlp::from_params(&sizes, params).map_err(|e| Error::Checkpoint(e.to_string()))
}

fn put_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn put_f64<W: Write>(w: &mut W, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

fn get_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(u32::from_le_bytes(b))
}

fn get_f64<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b).map_err(truncated)?;
    Ok(f64::from_le_bytes(b))
}

fn truncated(e: std::io::Error) -> Error {
    if e.kind() == std::io::ErrorKind::UnexpectedEof {
        Error::Checkpoint("truncated checkpoint".into())
    } else {
        Error::Io(e)
    }
}
