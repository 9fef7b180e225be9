//! Loader for the UCI air-quality CSV as distributed: semicolon
//! delimited, decimal commas, a Date and a Time column followed by 13
//! numeric sensor columns, and -200 marking missing values.

use std::path::Path;

use crate::autodiff::Array;
use crate::dataset::{normalize, Dataset, SeriesSample, Split, TimeGrid};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Rows per sample window.
pub const WINDOW: usize = 20;
/// Sentinel marking a missing measurement.
pub const MISSING_SENTINEL: f64 = -200.0;
/// Feature whose values are imputed and predicted.
pub const TARGET_FEATURE: &str = "CO(GT)";

const TEST_MONTHS: [(i32, u32); 3] = [(2004, 7), (2004, 10), (2005, 2)];
const VALIDATION_MONTHS: [(i32, u32); 1] = [(2004, 5)];

/// Counts reported by the loader.
#[derive(Debug, Clone, Default)]
pub struct IngestSummary {
    /// Rows left over at month boundaries, too few to fill a window.
    pub dropped_rows: usize,
    /// Windows produced per split: (train, validation, test).
    pub window_counts: (usize, usize, usize),
}

struct RawRow {
    year: i32,
    month: u32,
    /// Hours since the civil epoch; the dataset's native integer grid.
    hour_index: i64,
    values: Vec<f64>,
}

/// Parse, window, split by month, and z-score with train statistics.
pub fn load_air_quality_csv<F: Scalar>(path: &Path) -> Result<(Dataset<F>, IngestSummary)> {
    let text = std::fs::read_to_string(path)?;
    load_air_quality_str(&text)
}

pub fn load_air_quality_str<F: Scalar>(text: &str) -> Result<(Dataset<F>, IngestSummary)> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Parse { line: 1, message: "empty file".into() })?;
    let columns = split_fields(header);
    if columns.len() < 3 || columns[0] != "Date" || columns[1] != "Time" {
        return Err(Error::Parse {
            line: 1,
            message: format!("expected header starting Date;Time, got {columns:?}"),
        });
    }
    let feature_names: Vec<String> = columns[2..].iter().map(|c| c.to_string()).collect();
    let d = feature_names.len();
    let target_index = feature_names
        .iter()
        .position(|n| n == TARGET_FEATURE)
        .ok_or_else(|| Error::Parse {
            line: 1,
            message: format!("no {TARGET_FEATURE} column in header"),
        })?;

    let mut rows: Vec<RawRow> = Vec::new();
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields = split_fields(line);
        if fields.iter().all(|f| f.is_empty()) {
            continue; // the distributed file ends with blank lines
        }
        if fields.len() != d + 2 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected {} fields, got {}", d + 2, fields.len()),
            });
        }
        let (year, month, day) = parse_date(fields[0], lineno)?;
        let hour = parse_hour(fields[1], lineno)?;
        let hour_index = days_from_civil(year, month, day) * 24 + i64::from(hour);
        let mut values = Vec::with_capacity(d);
        for (ci, field) in fields[2..].iter().enumerate() {
            let v: f64 = field.replace(',', ".").parse().map_err(|_| Error::Parse {
                line: lineno,
                message: format!("unparsable number {:?} in column {}", field, columns[ci + 2]),
            })?;
            values.push(v);
        }
        rows.push(RawRow { year, month, hour_index, values });
    }
    if rows.is_empty() {
        return Err(Error::Data("no samples".into()));
    }

    // Windows never straddle month boundaries: chunk each consecutive
    // same-month run into non-overlapping blocks of WINDOW rows.
    let mut samples = Vec::new();
    let mut splits = Vec::new();
    let mut summary = IngestSummary::default();
    let mut run_start = 0usize;
    let mut window_seq = 0usize;
    for i in 1..=rows.len() {
        let boundary = i == rows.len()
            || rows[i].year != rows[run_start].year
            || rows[i].month != rows[run_start].month;
        if !boundary {
            continue;
        }
        let run = &rows[run_start..i];
        let whole = run.len() / WINDOW;
        summary.dropped_rows += run.len() - whole * WINDOW;
        for w in 0..whole {
            let block = &run[w * WINDOW..(w + 1) * WINDOW];
            let id = format!("{:04}-{:02}.w{}", block[0].year, block[0].month, window_seq);
            window_seq += 1;
            let times: Vec<F> = block.iter().map(|r| F::c(r.hour_index as f64)).collect();
            let mut values = Vec::with_capacity(WINDOW * d);
            let mut mask = Vec::with_capacity(WINDOW * d);
            for r in block {
                for &v in &r.values {
                    if v == MISSING_SENTINEL {
                        values.push(F::zero());
                        mask.push(F::zero());
                    } else {
                        values.push(F::c(v));
                        mask.push(F::one());
                    }
                }
            }
            let sample = SeriesSample::new(
                id,
                Array::from_vec(vec![WINDOW, d], values),
                Array::from_vec(vec![WINDOW, d], mask),
                TimeGrid::new(times)?,
                target_index,
                feature_names.clone(),
            )?;
            let split = month_split(block[0].year, block[0].month);
            match split {
                Split::Train => summary.window_counts.0 += 1,
                Split::Validation => summary.window_counts.1 += 1,
                Split::Test => summary.window_counts.2 += 1,
            }
            samples.push(sample);
            splits.push(split);
        }
        run_start = i;
    }

    let dataset = normalize(Dataset::from_samples(samples, splits)?)?;
    Ok((dataset, summary))
}

fn month_split(year: i32, month: u32) -> Split {
    if TEST_MONTHS.contains(&(year, month)) {
        Split::Test
    } else if VALIDATION_MONTHS.contains(&(year, month)) {
        Split::Validation
    } else {
        Split::Train
    }
}

/// Split on ';' and drop the trailing empty fields the distributed file
/// carries after its last data column.
fn split_fields(line: &str) -> Vec<&str> {
    let mut fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split(';').collect();
    while fields.len() > 1 && fields.last().is_some_and(|f| f.is_empty()) {
        fields.pop();
    }
    fields
}

fn parse_date(s: &str, line: usize) -> Result<(i32, u32, u32)> {
    let parts: Vec<&str> = s.split('/').collect();
    if parts.len() != 3 {
        return Err(Error::Parse { line, message: format!("bad date {s:?}, expected DD/MM/YYYY") });
    }
    let day: u32 = parts[0].parse().map_err(|_| bad_date(s, line))?;
    let month: u32 = parts[1].parse().map_err(|_| bad_date(s, line))?;
    let year: i32 = parts[2].parse().map_err(|_| bad_date(s, line))?;
    if !(1..=12).contains(&month) || !(1..=31).contains(&day) {
        return Err(bad_date(s, line));
    }
    Ok((year, month, day))
}

fn bad_date(s: &str, line: usize) -> Error {
    Error::Parse { line, message: format!("bad date {s:?}, expected DD/MM/YYYY") }
}

fn parse_hour(s: &str, line: usize) -> Result<u32> {
    let hh = s.split('.').next().unwrap_or_default();
    let hour: u32 = hh.parse().map_err(|_| Error::Parse {
        line,
        message: format!("bad time {s:?}, expected HH.MM.SS"),
    })?;
    if hour > 23 {
        return Err(Error::Parse { line, message: format!("hour {hour} out of range") });
    }
    Ok(hour)
}

/// Days since 1970-01-01 for a proleptic Gregorian civil date.
fn days_from_civil(year: i32, month: u32, day: u32) -> i64 {
    let y = i64::from(year) - i64::from(month <= 2);
    let era = if y >= 0 { y } else { y - 399 } / 400;
    let yoe = (y - era * 400) as u64;
    let mp = u64::from(if month > 2 { month - 3 } else { month + 9 });
    let doy = (153 * mp + 2) / 5 + u64::from(day) - 1;
    let doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    era * 146_097 + doe as i64 - 719_468
}
