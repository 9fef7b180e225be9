//! Binary encoding of named tensors shared by the checkpoint and dataset
//! containers.
//!
//! An entry is: u32 name length, UTF-8 name bytes, u32 rank, u32 per
//! dimension, then row-major little-endian 64-bit reals. All integers are
//! little-endian.

use std::io::{Read, Write};

use crate::autodiff::Array;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn write_u32<W: Write>(w: &mut W, v: u32) -> Result<()> {
    w.write_all(&v.to_le_bytes())?;
    Ok(())
}

pub fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

pub fn write_string<W: Write>(w: &mut W, s: &str) -> Result<()> {
    write_u32(w, s.len() as u32)?;
    w.write_all(s.as_bytes())?;
    Ok(())
}

pub fn read_string<R: Read>(r: &mut R) -> Result<String> {
    let len = read_u32(r)? as usize;
    if len > 1 << 20 {
        return Err(Error::Format(format!("string length {len} implausible")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    String::from_utf8(buf).map_err(|e| Error::Format(format!("non-UTF-8 string: {e}")))
}

pub fn write_entry<W: Write, F: Scalar>(w: &mut W, name: &str, tensor: &Array<F>) -> Result<()> {
    write_string(w, name)?;
    write_u32(w, tensor.shape().len() as u32)?;
    for &dim in tensor.shape() {
        write_u32(w, dim as u32)?;
    }
    for &v in tensor.iter() {
        w.write_all(&v.f64().to_le_bytes())?;
    }
    Ok(())
}

pub fn read_entry<R: Read, F: Scalar>(r: &mut R) -> Result<(String, Array<F>)> {
    let name = read_string(r)?;
    let rank = read_u32(r)? as usize;
    if rank > 8 {
        return Err(Error::Format(format!("tensor {name}: rank {rank} implausible")));
    }
    let mut shape = Vec::with_capacity(rank);
    for _ in 0..rank {
        shape.push(read_u32(r)? as usize);
    }
    let len: usize = shape.iter().product();
    if len > 1 << 28 {
        return Err(Error::Format(format!("tensor {name}: {len} elements implausible")));
    }
    let mut data = Vec::with_capacity(len);
    let mut buf = [0u8; 8];
    for _ in 0..len {
        r.read_exact(&mut buf)?;
        data.push(F::c(f64::from_le_bytes(buf)));
    }
    Ok((name, Array::from_vec(shape, data)))
}

/// Write a magic header (4 bytes) plus format version.
pub fn write_header<W: Write>(w: &mut W, magic: &[u8; 4], version: u32) -> Result<()> {
    w.write_all(magic)?;
    write_u32(w, version)
}

/// Check a magic header and return the version.
pub fn read_header<R: Read>(r: &mut R, magic: &[u8; 4]) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    if &buf != magic {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected {:?}",
            String::from_utf8_lossy(&buf),
            String::from_utf8_lossy(magic)
        )));
    }
    read_u32(r)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn entry_roundtrip_is_bit_exact() {
        let t = Array::matrix(2, 3, vec![1.5, -0.25, 3.0e-17, f64::MIN_POSITIVE, 0.0, -9.75]);
        let mut buf = Vec::new();
        write_entry(&mut buf, "layer.weight", &t).unwrap();
        let (name, back): (String, Array<f64>) = read_entry(&mut buf.as_slice()).unwrap();
        assert_eq!(name, "layer.weight");
        assert_eq!(back, t);
    }

    #[test]
    fn bad_magic_is_rejected() {
        let mut buf = Vec::new();
        write_header(&mut buf, b"BGAN", 1).unwrap();
        assert!(read_header(&mut buf.as_slice(), b"BGDT").is_err());
    }
}
