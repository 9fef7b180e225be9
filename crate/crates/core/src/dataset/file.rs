//! Serialized dataset container.
//!
//! Layout: magic `BGDT`, u32 version, u32 sample count, u32 n, u32 d,
//! u32 target index, feature names (u32 count then strings), dropped
//! feature names likewise, a normalization flag byte followed by the
//! `norm.mean` / `norm.std` tensor entries when set, then per sample:
//! id string, split code byte, and `values` / `mask` / `times` tensor
//! entries. Strings and tensors use the checkpoint entry encoding; delta
//! matrices are recomputed on read.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::dataset::{Dataset, NormStats, SeriesSample, Split, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensorfile::{
    read_entry, read_header, read_string, read_u32, write_entry, write_header, write_string,
    write_u32,
};
use crate::autodiff::Array;

const MAGIC: &[u8; 4] = b"BGDT";
const VERSION: u32 = 1;

pub fn save_dataset<F: Scalar>(dataset: &Dataset<F>, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_dataset(dataset, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_dataset<F: Scalar, W: Write>(dataset: &Dataset<F>, w: &mut W) -> Result<()> {
    write_header(w, MAGIC, VERSION)?;
    write_u32(w, dataset.len() as u32)?;
    write_u32(w, dataset.n() as u32)?;
    write_u32(w, dataset.d() as u32)?;
    write_u32(w, dataset.target_index as u32)?;
    write_u32(w, dataset.feature_names.len() as u32)?;
    for name in &dataset.feature_names {
        write_string(w, name)?;
    }
    write_u32(w, dataset.dropped_features.len() as u32)?;
    for name in &dataset.dropped_features {
        write_string(w, name)?;
    }
    match &dataset.norm {
        Some(norm) => {
            w.write_all(&[1])?;
            write_entry(w, "norm.mean", &Array::vector(norm.mean.clone()))?;
            write_entry(w, "norm.std", &Array::vector(norm.std.clone()))?;
        }
        None => w.write_all(&[0])?,
    }
    for (s, &split) in dataset.samples.iter().zip(&dataset.splits) {
        write_string(w, &s.id)?;
        w.write_all(&[split.code()])?;
        write_entry(w, "values", &s.values)?;
        write_entry(w, "mask", &s.mask)?;
        write_entry(w, "times", &Array::vector(s.grid.timestamps().to_vec()))?;
    }
    Ok(())
}

pub fn load_dataset<F: Scalar>(path: &Path) -> Result<Dataset<F>> {
    let mut r = BufReader::new(File::open(path)?);
    read_dataset(&mut r)
}

pub fn read_dataset<F: Scalar, R: Read>(r: &mut R) -> Result<Dataset<F>> {
    let version = read_header(r, MAGIC)?;
    if version != VERSION {
        return Err(Error::Format(format!("unsupported dataset version {version}")));
    }
    let count = read_u32(r)? as usize;
    let n = read_u32(r)? as usize;
    let d = read_u32(r)? as usize;
    let target_index = read_u32(r)? as usize;
    let name_count = read_u32(r)? as usize;
    let mut feature_names = Vec::with_capacity(name_count);
    for _ in 0..name_count {
        feature_names.push(read_string(r)?);
    }
    let dropped_count = read_u32(r)? as usize;
    let mut dropped_features = Vec::with_capacity(dropped_count);
    for _ in 0..dropped_count {
        dropped_features.push(read_string(r)?);
    }
    let mut flag = [0u8; 1];
    r.read_exact(&mut flag)?;
    let norm = if flag[0] == 1 {
        let (name, mean) = read_entry::<_, F>(r)?;
        expect_name("norm.mean", &name)?;
        let (name, std) = read_entry::<_, F>(r)?;
        expect_name("norm.std", &name)?;
        Some(NormStats { mean: mean.data().to_vec(), std: std.data().to_vec() })
    } else {
        None
    };

    let mut samples = Vec::with_capacity(count);
    let mut splits = Vec::with_capacity(count);
    for _ in 0..count {
        let id = read_string(r)?;
        let mut code = [0u8; 1];
        r.read_exact(&mut code)?;
        splits.push(Split::from_code(code[0])?);
        let (name, values) = read_entry::<_, F>(r)?;
        expect_name("values", &name)?;
        let (name, mask) = read_entry::<_, F>(r)?;
        expect_name("mask", &name)?;
        let (name, times) = read_entry::<_, F>(r)?;
        expect_name("times", &name)?;
        if values.shape() != [n, d] {
            return Err(Error::Format(format!(
                "sample {id}: values shape {:?}, expected [{n}, {d}]",
                values.shape()
            )));
        }
        samples.push(SeriesSample::new(
            id,
            values,
            mask,
            TimeGrid::new(times.data().to_vec())?,
            target_index,
            feature_names.clone(),
        )?);
    }
    let mut dataset = Dataset::from_samples(samples, splits)?;
    dataset.norm = norm;
    dataset.dropped_features = dropped_features;
    Ok(dataset)
}

fn expect_name(expected: &str, got: &str) -> Result<()> {
    if expected != got {
        return Err(Error::Format(format!("expected entry {expected:?}, found {got:?}")));
    }
    Ok(())
}
