//! Little-endian binary field files.
//!
//! Layout: the magic `GFLD`, `u32` version, `u32` dimension, one `u64` node
//! count per axis, `f64` spacing, `f64` exponent, one `f64` origin
//! coordinate per axis, the domain (`u8` kind followed by its `f64`
//! parameters), the values as row-major `f64` pairs, and one byte per node
//! marking fixed nodes.

use std::io::{Read, Write};

use super::{Domain, Field, Lattice};
use crate::error::{Error, Result};

pub const FIELD_MAGIC: &[u8; 4] = b"GFLD";
const VERSION: u32 = 1;

pub fn write_field<W: Write>(f: &Field, mut w: W) -> Result<()> {
    let lat = f.lattice();
    w.write_all(FIELD_MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(lat.dim() as u32).to_le_bytes())?;
    for &d in &lat.dims {
        w.write_all(&(d as u64).to_le_bytes())?;
    }
    w.write_all(&lat.h.to_le_bytes())?;
    w.write_all(&f.p().to_le_bytes())?;
    for o in &lat.origin {
        w.write_all(&o.to_le_bytes())?;
    }
    let (kind, params): (u8, Vec<f64>) = match f.domain() {
        Domain::Disk { center, radius } => (0, vec![center[0], center[1], *radius]),
        Domain::Annulus { center, inner, outer } => (1, vec![center[0], center[1], *inner, *outer]),
        Domain::Box { lo, hi } => (2, lo.iter().chain(hi).copied().collect()),
    };
    w.write_all(&[kind])?;
    for v in params {
        w.write_all(&v.to_le_bytes())?;
    }
    for v in f.values() {
        w.write_all(&v[0].to_le_bytes())?;
        w.write_all(&v[1].to_le_bytes())?;
    }
    let mask: Vec<u8> = f.fixed().iter().map(|&b| u8::from(b)).collect();
    w.write_all(&mask)?;
    Ok(())
}

fn u32_of<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn u64_of<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn f64_of<R: Read>(r: &mut R) -> Result<f64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(f64::from_le_bytes(b))
}

pub fn read_field<R: Read>(mut r: R) -> Result<Field> {
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != FIELD_MAGIC {
        return Err(Error::Validation("not a field file".into()));
    }
    let version = u32_of(&mut r)?;
    if version != VERSION {
        return Err(Error::Validation(format!("unsupported field file version {version}")));
    }
    let d = u32_of(&mut r)? as usize;
    if !(2..=3).contains(&d) {
        return Err(Error::Validation(format!("bad field dimension {d}")));
    }
    let mut dims = Vec::with_capacity(d);
    for _ in 0..d {
        let n = u64_of(&mut r)?;
        if n > 1 << 24 {
            return Err(Error::Validation("field is implausibly large".into()));
        }
        dims.push(n as usize);
    }
    let h = f64_of(&mut r)?;
    let p = f64_of(&mut r)?;
    let mut origin = Vec::with_capacity(d);
    for _ in 0..d {
        origin.push(f64_of(&mut r)?);
    }
    let mut kind = [0u8; 1];
    r.read_exact(&mut kind)?;
    let domain = match kind[0] {
        0 => Domain::Disk { center: [f64_of(&mut r)?, f64_of(&mut r)?], radius: f64_of(&mut r)? },
        1 => Domain::Annulus {
            center: [f64_of(&mut r)?, f64_of(&mut r)?],
            inner: f64_of(&mut r)?,
            outer: f64_of(&mut r)?,
        },
        2 => {
            let mut lo = Vec::with_capacity(d);
            let mut hi = Vec::with_capacity(d);
            for _ in 0..d {
                lo.push(f64_of(&mut r)?);
            }
            for _ in 0..d {
                hi.push(f64_of(&mut r)?);
            }
            Domain::Box { lo, hi }
        }
        k => return Err(Error::Validation(format!("unknown domain kind {k}"))),
    };
    let lattice = Lattice::new(origin, h, dims)?;
    let n = lattice.len();
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        values.push([f64_of(&mut r)?, f64_of(&mut r)?]);
    }
    let mut mask = vec![0u8; n];
    r.read_exact(&mut mask)?;
    let fixed = mask.into_iter().map(|b| b != 0).collect();
    Field::new(lattice, domain, values, fixed, p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fields::unit;

    #[test]
    fn round_trip() {
        let lat = Lattice::cell_centered(-1.0, 1.0, 8, 2).unwrap();
        let f = Field::from_fn(lat, Domain::unit_disk(), 1.8, |x| unit(x[0] * 3.0)).unwrap();
        let mut buf = Vec::new();
        write_field(&f, &mut buf).unwrap();
        assert_eq!(read_field(buf.as_slice()).unwrap(), f);
        buf[0] = b'X';
        assert!(read_field(buf.as_slice()).is_err());
    }
}
