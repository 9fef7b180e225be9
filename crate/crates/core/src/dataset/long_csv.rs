//! Generic long-format ingestion: `sample_id,time,feature,value` rows,
//! comma separated with a header; a cell is missing when no row mentions
//! it. Samples are padded to the longest series.

use std::collections::BTreeMap;
use std::path::Path;

use crate::autodiff::Array;
use crate::dataset::{normalize, pad_and_align, Dataset, SeriesSample, Split, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub fn load_long_csv<F: Scalar>(path: &Path, target: Option<&str>) -> Result<Dataset<F>> {
    let text = std::fs::read_to_string(path)?;
    load_long_csv_str(&text, target)
}

pub fn load_long_csv_str<F: Scalar>(text: &str, target: Option<&str>) -> Result<Dataset<F>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let cols: Vec<&str> = header.trim_end_matches(['\r', '\n']).split(',').collect();
    if cols != ["sample_id", "time", "feature", "value"] {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header sample_id,time,feature,value, got {:?}", cols),
        });
    }

    // BTreeMaps keep sample and feature order deterministic.
    let mut cells: BTreeMap<String, BTreeMap<(u64, String), f64>> = BTreeMap::new();
    let mut features: Vec<String> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let line = line.trim_end_matches(['\r', '\n']);
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected 4 fields, got {}", fields.len()),
            });
        }
        let time: f64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("unparsable time {:?}", fields[1]),
        })?;
        let value: f64 = fields[3].parse().map_err(|_| Error::Parse {
            line: lineno,
            message: format!("unparsable value {:?}", fields[3]),
        })?;
        if !time.is_finite() || !value.is_finite() {
            return Err(Error::Parse { line: lineno, message: "non-finite time or value".into() });
        }
        let feature = fields[2].to_string();
        if !features.contains(&feature) {
            features.push(feature.clone());
        }
        let key = (time.to_bits(), feature);
        let prior = cells.entry(fields[0].to_string()).or_default().insert(key, value);
        if prior.is_some() {
            return Err(Error::Parse {
                line: lineno,
                message: format!(
                    "duplicate cell for sample {:?} at time {} feature {:?}",
                    fields[0], time, fields[2]
                ),
            });
        }
    }
    if cells.is_empty() {
        return Err(Error::Data("no samples".into()));
    }

    features.sort();
    let d = features.len();
    let target_name = target.unwrap_or(&features[0]);
    let target_index = features
        .iter()
        .position(|f| f == target_name)
        .ok_or_else(|| Error::Data(format!("target feature {target_name:?} not in data")))?;

    let mut samples = Vec::new();
    for (id, sample_cells) in cells {
        let mut times: Vec<f64> = sample_cells.keys().map(|(t, _)| f64::from_bits(*t)).collect();
        times.sort_by(|a, b| a.partial_cmp(b).expect("finite times"));
        times.dedup();
        if times.len() < 2 {
            return Err(Error::Data(format!("sample {id:?} has fewer than 2 time points")));
        }
        let n = times.len();
        let mut values = vec![F::zero(); n * d];
        let mut mask = vec![F::zero(); n * d];
        for ((tbits, feature), value) in &sample_cells {
            let t = f64::from_bits(*tbits);
            let i = times.iter().position(|&x| x == t).expect("time present");
            let j = features.iter().position(|f| f == feature).expect("feature present");
            values[i * d + j] = F::c(*value);
            mask[i * d + j] = F::one();
        }
        samples.push(SeriesSample::new(
            id,
            Array::from_vec(vec![n, d], values),
            Array::from_vec(vec![n, d], mask),
            TimeGrid::new(times.into_iter().map(F::c).collect())?,
            target_index,
            features.clone(),
        )?);
    }

    let n_max = samples.iter().map(|s| s.n()).max().expect("non-empty");
    let samples = pad_and_align(samples, n_max)?;
    let count = samples.len();
    normalize(Dataset::from_samples(samples, vec![Split::Train; count])?)
}
