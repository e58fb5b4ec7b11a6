//! Portable binary parameter files and checkpoint directories.
//!
//! One file per named parameter: magic, u32 ndim, u64 dims, then the data as
//! little-endian 32-bit floats. Optimizer moments use the same layout with
//! both arrays back to back plus the step counter. Byte-identical round trips
//! are part of the contract and covered by tests.

use super::{ParamStore, ParamId};
use crate::error::{Error, Result};
use crate::tensor::Element;
use ndarray::{ArrayD, IxDyn};
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

const PARAM_MAGIC: &[u8; 4] = b"CTP1";
const OPT_MAGIC: &[u8; 4] = b"CTO1";

fn write_header(out: &mut Vec<u8>, magic: &[u8; 4], shape: &[usize]) {
    out.extend_from_slice(magic);
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
}

fn write_data<T: Element>(out: &mut Vec<u8>, a: &ArrayD<T>) {
    for &v in a.iter() {
        out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
    }
}

fn read_exact_n(r: &mut impl Read, n: usize) -> Result<Vec<u8>> {
    let mut buf = vec![0u8; n];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

fn read_header(r: &mut impl Read, magic: &[u8; 4], path: &Path) -> Result<Vec<usize>> {
    let got = read_exact_n(r, 4)?;
    if got != magic {
        return Err(Error::Data(format!("{}: bad magic", path.display())));
    }
    let nd = u32::from_le_bytes(read_exact_n(r, 4)?.try_into().unwrap()) as usize;
    if nd > 8 {
        return Err(Error::Data(format!("{}: implausible ndim {nd}", path.display())));
    }
    let mut shape = Vec::with_capacity(nd);
    for _ in 0..nd {
        shape.push(u64::from_le_bytes(read_exact_n(r, 8)?.try_into().unwrap()) as usize);
    }
    Ok(shape)
}

fn read_data<T: Element>(r: &mut impl Read, len: usize, path: &Path) -> Result<ArrayD<T>> {
    let bytes = read_exact_n(r, len * 4)?;
    let data: Vec<T> = bytes
        .chunks_exact(4)
        .map(|c| T::from_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
        .collect();
    ArrayD::from_shape_vec(IxDyn(&[len]), data)
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

pub fn write_array<T: Element>(path: &Path, a: &ArrayD<T>) -> Result<()> {
    let mut out = Vec::with_capacity(16 + a.len() * 4);
    write_header(&mut out, PARAM_MAGIC, a.shape());
    write_data(&mut out, a);
    fs::write(path, out)?;
    Ok(())
}

pub fn read_array<T: Element>(path: &Path) -> Result<ArrayD<T>> {
    let mut f = fs::File::open(path)?;
    let shape = read_header(&mut f, PARAM_MAGIC, path)?;
    let len: usize = shape.iter().product();
    let flat = read_data::<T>(&mut f, len, path)?;
    let mut rest = Vec::new();
    f.read_to_end(&mut rest)?;
    if !rest.is_empty() {
        return Err(Error::Data(format!("{}: trailing bytes", path.display())));
    }
    flat.into_shape_with_order(IxDyn(&shape))
        .map_err(|e| Error::Data(format!("{}: {e}", path.display())))
}

/// File-safe encoding of a parameter name (dots kept, slashes forbidden by
/// construction of layer names).
fn file_name(param: &str) -> String {
    debug_assert!(!param.contains('/'));
    format!("{param}.bin")
}

/// Write parameter values plus optimizer state under `dir/params` and `dir/opt`.
pub fn save_store<T: Element>(dir: &Path, store: &ParamStore<T>) -> Result<()> {
    let pdir = dir.join("params");
    let odir = dir.join("opt");
    fs::create_dir_all(&pdir)?;
    fs::create_dir_all(&odir)?;
    for entry in &store.entries {
        write_array(&pdir.join(file_name(&entry.name)), &entry.value)?;
        let mut out = Vec::with_capacity(24 + entry.m.len() * 8);
        write_header(&mut out, OPT_MAGIC, entry.m.shape());
        write_data(&mut out, &entry.m);
        write_data(&mut out, &entry.v);
        out.extend_from_slice(&entry.t.to_le_bytes());
        fs::write(odir.join(file_name(&entry.name)), out)?;
    }
    Ok(())
}

/// Load values (and optimizer state when present) into an identically
/// structured store. Every registered parameter must have a file.
pub fn load_store<T: Element>(dir: &Path, store: &mut ParamStore<T>) -> Result<()> {
    let pdir = dir.join("params");
    let odir = dir.join("opt");
    for idx in 0..store.entries.len() {
        let name = store.entries[idx].name.clone();
        let ppath = pdir.join(file_name(&name));
        let value = read_array::<T>(&ppath)?;
        if value.shape() != store.entries[idx].value.shape() {
            return Err(Error::shape(
                format!("{:?} for {name}", store.entries[idx].value.shape()),
                format!("{:?}", value.shape()),
            ));
        }
        store.entries[idx].value = value;
        let opath = odir.join(file_name(&name));
        if opath.exists() {
            let mut f = fs::File::open(&opath)?;
            let shape = read_header(&mut f, OPT_MAGIC, &opath)?;
            let len: usize = shape.iter().product();
            let m = read_data::<T>(&mut f, len, &opath)?
                .into_shape_with_order(IxDyn(&shape))
                .map_err(|e| Error::Data(e.to_string()))?;
            let v = read_data::<T>(&mut f, len, &opath)?
                .into_shape_with_order(IxDyn(&shape))
                .map_err(|e| Error::Data(e.to_string()))?;
            let t = u64::from_le_bytes(read_exact_n(&mut f, 8)?.try_into().unwrap());
            store.entries[idx].m = m;
            store.entries[idx].v = v;
            store.entries[idx].t = t;
        }
    }
    Ok(())
}

/// Load only parameter values whose names start with `prefix` (e.g. just the
/// generator side of a full training checkpoint).
pub fn load_values_with_prefix<T: Element>(
    dir: &Path,
    store: &mut ParamStore<T>,
    prefix: &str,
) -> Result<Vec<ParamId>> {
    let pdir = dir.join("params");
    let mut loaded = Vec::new();
    for idx in 0..store.entries.len() {
        let name = store.entries[idx].name.clone();
        if !name.starts_with(prefix) {
            continue;
        }
        let value = read_array::<T>(&pdir.join(file_name(&name)))?;
        store.entries[idx].value = value;
        loaded.push(ParamId(idx));
    }
    Ok(loaded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::IxDyn;

    #[test]
    fn array_round_trip_is_byte_identical() {
        let dir = tempfile::tempdir().unwrap();
        let a = ArrayD::<f32>::from_shape_vec(
            IxDyn(&[2, 3]),
            vec![1.0, -2.5, 3.25, 0.0, -0.0, f32::MIN_POSITIVE],
        )
        .unwrap();
        let p1 = dir.path().join("a.bin");
        let p2 = dir.path().join("b.bin");
        write_array(&p1, &a).unwrap();
        let b = read_array::<f32>(&p1).unwrap();
        write_array(&p2, &b).unwrap();
        assert_eq!(fs::read(&p1).unwrap(), fs::read(&p2).unwrap());
        assert_eq!(a.shape(), b.shape());
    }

    #[test]
    fn store_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        use rand::SeedableRng;
        let mut s1: ParamStore<f32> = ParamStore::new();
        s1.register_normal("layer.w", &[4, 2, 3, 3], 0.02, &mut rng);
        s1.register_const("layer.b", &[4], 0.0);
        save_store(dir.path(), &s1).unwrap();

        let mut s2: ParamStore<f32> = ParamStore::new();
        s2.register_const("layer.w", &[4, 2, 3, 3], 0.0);
        s2.register_const("layer.b", &[4], 0.0);
        load_store(dir.path(), &mut s2).unwrap();
        assert_eq!(s1.value(s1.lookup("layer.w").unwrap()), s2.value(s2.lookup("layer.w").unwrap()));

        let dir2 = tempfile::tempdir().unwrap();
        save_store(dir2.path(), &s2).unwrap();
        for name in ["params/layer.w.bin", "params/layer.b.bin", "opt/layer.w.bin"] {
            assert_eq!(
                fs::read(dir.path().join(name)).unwrap(),
                fs::read(dir2.path().join(name)).unwrap(),
                "{name} differs"
            );
        }
    }
}
