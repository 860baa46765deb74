//! Portable parameter checkpoints.
//!
//! Byte layout, all integers little-endian:
//!
//! ```text
//! magic    8 bytes  "ASYMCKPT"
//! version  u32      currently 1
//! count    u32      number of tensors
//! count times:
//!   name_len u32, name (UTF-8, name_len bytes)
//!   rows u32, cols u32
//!   rows*cols f64 values (IEEE-754 binary64, row-major)
//! ```
//!
//! Only parameter values are stored; optimizer moments are not.

use std::io::{Read, Write};

use crate::error::{AdError, Result};
use crate::params::ParamStore;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"ASYMCKPT";
pub const VERSION: u32 = 1;

pub fn write_checkpoint<W: Write>(store: &ParamStore, mut w: W) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(store.len() as u32).to_le_bytes())?;
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        let t = store.value(id);
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(t.rows() as u32).to_le_bytes())?;
        w.write_all(&(t.cols() as u32).to_le_bytes())?;
        for v in t.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

pub fn checkpoint_bytes(store: &ParamStore) -> Vec<u8> {
    let mut buf = Vec::new();
    write_checkpoint(store, &mut buf).expect("writing to a Vec cannot fail");
    buf
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

/// Reads a checkpoint into a fresh store, preserving tensor order.
pub fn read_checkpoint<R: Read>(mut r: R) -> Result<ParamStore> {
    let mut magic = [0u8; 8];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(AdError::Checkpoint("bad magic".into()));
    }
    let version = read_u32(&mut r)?;
    if version != VERSION {
        return Err(AdError::Checkpoint(format!("unsupported version {version}")));
    }
    let count = read_u32(&mut r)?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let n = read_u32(&mut r)? as usize;
        let mut name = vec![0u8; n];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|_| AdError::Checkpoint("name is not UTF-8".into()))?;
        let rows = read_u32(&mut r)? as usize;
        let cols = read_u32(&mut r)? as usize;
        let mut data = Vec::with_capacity(rows * cols);
        let mut b = [0u8; 8];
        for _ in 0..rows * cols {
            r.read_exact(&mut b)?;
            data.push(f64::from_le_bytes(b));
        }
        store.add(name, Tensor::from_vec(rows, cols, data)?)?;
    }
    Ok(store)
}

/// Copies checkpoint values into an existing store with the same layout.
pub fn load_into(store: &mut ParamStore, loaded: &ParamStore) -> Result<()> {
    if store.len() != loaded.len() {
        return Err(AdError::Checkpoint(format!(
            "expected {} tensors, found {}",
            store.len(),
            loaded.len()
        )));
    }
    let ids: Vec<_> = store.ids().collect();
    for id in ids {
        let name = store.name(id).to_string();
        let src = loaded.id(&name)?;
        store.set_value(id, loaded.value(src).clone())?;
    }
    Ok(())
}

/// Copies every checkpoint tensor whose name exists in `store` and returns
/// how many were copied. Shapes must agree for each copied tensor.
pub fn load_matching(store: &mut ParamStore, loaded: &ParamStore) -> Result<usize> {
    let ids: Vec<_> = store.ids().collect();
    let mut copied = 0;
    for id in ids {
        if let Ok(src) = loaded.id(store.name(id)) {
            store.set_value(id, loaded.value(src).clone())?;
            copied += 1;
        }
    }
    Ok(copied)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn header_layout() {
        let mut s = ParamStore::new();
        s.add("ab", Tensor::from_vec(1, 2, vec![1.0, -0.5]).unwrap()).unwrap();
        let bytes = checkpoint_bytes(&s);
        assert_eq!(&bytes[..8], b"ASYMCKPT");
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &1u32.to_le_bytes());
        assert_eq!(&bytes[16..20], &2u32.to_le_bytes());
        assert_eq!(&bytes[20..22], b"ab");
        assert_eq!(bytes.len(), 8 + 4 + 4 + 4 + 2 + 4 + 4 + 16);
        assert_eq!(&bytes[30..38], &1.0f64.to_le_bytes());
        let back = read_checkpoint(bytes.as_slice()).unwrap();
        assert!(back.same_values(&s));
    }

    #[test]
    fn rejects_bad_magic_and_truncation() {
        assert!(read_checkpoint(&b"NOTACKPT\x01\0\0\0\0\0\0\0"[..]).is_err());
        let mut s = ParamStore::new();
        s.add("x", Tensor::scalar(3.0).unwrap()).unwrap();
        let bytes = checkpoint_bytes(&s);
        assert!(read_checkpoint(&bytes[..bytes.len() - 1]).is_err());
    }

    #[test]
    fn partial_load_copies_shared_names() {
        let mut a = ParamStore::new();
        a.add("x", Tensor::scalar(1.0).unwrap()).unwrap();
        a.add("y", Tensor::scalar(2.0).unwrap()).unwrap();
        let mut b = ParamStore::new();
        b.add("x", Tensor::scalar(5.0).unwrap()).unwrap();
        b.add("z", Tensor::scalar(7.0).unwrap()).unwrap();
        assert_eq!(load_matching(&mut a, &b).unwrap(), 1);
        assert_eq!(a.value(a.id("x").unwrap()).item(), Some(5.0));
        assert_eq!(a.value(a.id("y").unwrap()).item(), Some(2.0));
        assert!(load_into(&mut a, &b).is_err());
    }
}
