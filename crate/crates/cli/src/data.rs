//! Datasets: synthetic generation, the CSV exchange format and loaders for
//! the two public benchmark files.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use nalgebra::DVector;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::config::SyntheticSpec;
use crate::error::{invalid, HarnessError, Result};

/// `(y_t, v_t)` pairs of a loss stream.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub ys: Vec<f64>,
    pub vs: Vec<DVector<f64>>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.ys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ys.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vs.first().map_or(0, DVector::len)
    }

    pub fn pairs(&self) -> Vec<(f64, DVector<f64>)> {
        self.ys.iter().copied().zip(self.vs.iter().cloned()).collect()
    }

    /// Largest `‖v_t‖` and `|y_t|`.
    pub fn max_norms(&self) -> (f64, f64) {
        let v = self.vs.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let y = self.ys.iter().map(|y| y.abs()).fold(0.0, f64::max);
        (v, y)
    }

    /// Seeded shuffle, then the trailing `fraction` of rows is held out.
    pub fn split(&self, fraction: f64, seed: u64) -> (Dataset, Dataset) {
        let mut order: Vec<usize> = (0..self.len()).collect();
        order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        let n_test = (self.len() as f64 * fraction).round() as usize;
        let pick = |idx: &[usize]| Dataset {
            ys: idx.iter().map(|&i| self.ys[i]).collect(),
            vs: idx.iter().map(|&i| self.vs[i].clone()).collect(),
        };
        let (train, test) = order.split_at(self.len() - n_test);
        (pick(train), pick(test))
    }

    pub fn truncate(&mut self, n: usize) {
        self.ys.truncate(n);
        self.vs.truncate(n);
    }

    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut out = String::from("y");
        for j in 1..=d {
            let _ = write!(out, ",v{j}");
        }
        out.push('\n');
        for (y, v) in self.ys.iter().zip(&self.vs) {
            let _ = write!(out, "{}", fmt_float(*y));
            for x in v.iter() {
                let _ = write!(out, ",{}", fmt_float(*x));
            }
            out.push('\n');
        }
        out
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()).map_err(HarnessError::io(path.display().to_string()))
    }

    pub fn parse_csv(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| invalid("dataset is empty"))?;
        let cols: Vec<&str> = header.split(',').map(str::trim).collect();
        let expected_dim = cols.len().saturating_sub(1);
        let well_formed = cols.first() == Some(&"y")
            && expected_dim > 0
            && cols[1..].iter().enumerate().all(|(j, c)| *c == format!("v{}", j + 1));
        if !well_formed {
            return Err(invalid(format!("dataset header must be y,v1,...,vd, got '{header}'")));
        }
        let mut data = Dataset::default();
        for (n, line) in lines {
            let row = parse_row(line, n + 1)?;
            if row.len() != cols.len() {
                return Err(invalid(format!("line {}: expected {} fields, found {}", n + 1, cols.len(), row.len())));
            }
            data.ys.push(row[0]);
            data.vs.push(DVector::from_row_slice(&row[1..]));
        }
        if data.is_empty() {
            return Err(invalid("dataset has no rows"));
        }
        Ok(data)
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        Self::parse_csv(&read(path)?)
    }
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(HarnessError::io(path.display().to_string()))
}

fn parse_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|f| {
            f.trim()
                .parse::<f64>()
                .map_err(|e| invalid(format!("line {lineno}: '{}': {e}", f.trim())))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Generated {
    pub data: Dataset,
    pub xstar: DVector<f64>,
    pub clipped_features: usize,
    pub clipped_targets: usize,
}

/// Draws the synthetic regression stream. Gaussian features are scaled by
/// `R/(2√d)`, so the norm clip at `R` only touches far tails.
pub fn gen_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<Generated> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d = spec.dim;
    let xstar = match &spec.xstar {
        Some(x) => DVector::from_row_slice(x),
        None => {
            let z = DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng));
            let n: f64 = z.norm();
            if n > 0.0 {
                z * (spec.xstar_norm / n)
            } else {
                z
            }
        }
    };
    let scale = spec.bound / (2.0 * (d as f64).sqrt());
    let mut out = Generated { data: Dataset::default(), xstar, clipped_features: 0, clipped_targets: 0 };
    for _ in 0..spec.horizon {
        let mut v = match spec.constant_feature {
            Some(c) => DVector::from_element(d, c),
            None => DVector::from_fn(d, |_, _| StandardNormal.sample(&mut rng)) * scale,
        };
        let n = v.norm();
        if n > spec.bound {
            v *= spec.bound / n;
            out.clipped_features += 1;
        }
        let noise: f64 = if spec.noise_std > 0.0 { StandardNormal.sample(&mut rng) } else { 0.0 };
        let mut y = v.dot(&out.xstar) + spec.noise_std * noise;
        if y.abs() > spec.bound {
            y = y.signum() * spec.bound;
            out.clipped_targets += 1;
        }
        out.data.ys.push(y);
        out.data.vs.push(v);
    }
    log::info!(
        "generated {} rows: {} feature vectors and {} targets clipped to R = {}",
        spec.horizon,
        out.clipped_features,
        out.clipped_targets,
        spec.bound
    );
    Ok(out)
}

/// Forest cover type rows: 54 features then the class in 1..=7. Class 2
/// becomes +1 and every other class -1. Features are min-max scaled to
/// [0, 1] and then multiplied by `R/√d`, which bounds every row by `R`.
pub fn load_covertype(path: &Path, bound: f64) -> Result<Dataset> {
    let rows = numeric_rows(&read(path)?)?;
    let mut labels = Vec::with_capacity(rows.len());
    let mut features = Vec::with_capacity(rows.len());
    for (n, row) in rows.into_iter().enumerate() {
        let (class, v) = row.split_last().ok_or_else(|| invalid(format!("row {}: empty", n + 1)))?;
        if !(1.0..=7.0).contains(class) || class.fract() != 0.0 {
            return Err(invalid(format!("row {}: class {class} outside 1..=7", n + 1)));
        }
        labels.push(if *class == 2.0 { 1.0 } else { -1.0 });
        features.push(v.to_vec());
    }
    Ok(Dataset { ys: labels, vs: scale_features(features, bound)? })
}

/// Year prediction rows: the target first, then the features. The target is
/// standardised and clipped to `R`; features are scaled as for cover type.
pub fn load_year_prediction(path: &Path, bound: f64) -> Result<Dataset> {
    let rows = numeric_rows(&read(path)?)?;
    let mut targets = Vec::with_capacity(rows.len());
    let mut features = Vec::with_capacity(rows.len());
    for (n, row) in rows.into_iter().enumerate() {
        let (y, v) = row.split_first().ok_or_else(|| invalid(format!("row {}: empty", n + 1)))?;
        targets.push(*y);
        features.push(v.to_vec());
    }
    let n = targets.len() as f64;
    let mean = targets.iter().sum::<f64>() / n;
    let sd = (targets.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / n).sqrt();
    let sd = if sd > 0.0 { sd } else { 1.0 };
    let mut clipped = 0;
    for y in &mut targets {
        *y = (*y - mean) / sd;
        if y.abs() > bound {
            *y = y.signum() * bound;
            clipped += 1;
        }
    }
    log::info!("{clipped} of {} targets clipped to R = {bound}", targets.len());
    Ok(Dataset { ys: targets, vs: scale_features(features, bound)? })
}

fn numeric_rows(text: &str) -> Result<Vec<Vec<f64>>> {
    let rows: Vec<Vec<f64>> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(n, l)| parse_row(l, n + 1))
        .collect::<Result<_>>()?;
    let width = rows.first().map_or(0, Vec::len);
    if width < 2 {
        return Err(invalid("expected at least two numeric columns"));
    }
    if let Some(n) = rows.iter().position(|r| r.len() != width) {
        return Err(invalid(format!("row {}: expected {width} fields", n + 1)));
    }
    Ok(rows)
}

fn scale_features(rows: Vec<Vec<f64>>, bound: f64) -> Result<Vec<DVector<f64>>> {
    if !(bound > 0.0) {
        return Err(invalid("R must be positive"));
    }
    let d = rows.first().map_or(0, Vec::len);
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in &rows {
        for j in 0..d {
            lo[j] = lo[j].min(r[j]);
            hi[j] = hi[j].max(r[j]);
        }
    }
    let scale = bound / (d as f64).sqrt();
    Ok(rows
        .into_iter()
        .map(|r| {
            DVector::from_fn(d, |j, _| {
                let span = hi[j] - lo[j];
                if span > 0.0 {
                    (r[j] - lo[j]) / span * scale
                } else {
                    0.0
                }
            })
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let data = Dataset {
            ys: vec![0.1, -1.0 / 3.0],
            vs: vec![DVector::from_row_slice(&[1e-300, 2.5]), DVector::from_row_slice(&[-0.0, f64::MAX])],
        };
        assert_eq!(Dataset::parse_csv(&data.to_csv()).unwrap(), data);
    }

    #[test]
    fn rejects_bad_header_and_ragged_rows() {
        assert!(Dataset::parse_csv("y,x1\n1,2\n").is_err());
        assert!(Dataset::parse_csv("y,v1,v2\n1,2\n").is_err());
        assert!(Dataset::parse_csv("y,v1\n1,abc\n").is_err());
        assert!(Dataset::parse_csv("y,v1\n").is_err());
    }

    #[test]
    fn covertype_binarises_and_bounds_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cov.data");
        fs::write(&path, "1,10,5,2\n3,20,5,1\n2,15,5,7\n").unwrap();
        let data = load_covertype(&path, 2.0).unwrap();
        assert_eq!(data.ys, vec![1.0, -1.0, -1.0]);
        assert!(data.vs.iter().all(|v| v.norm() <= 2.0 + 1e-12));
        assert!((data.vs[1][0] - 2.0 / 3f64.sqrt()).abs() < 1e-12);
        assert_eq!(data.vs[0][2], 0.0);
    }

    #[test]
    fn year_prediction_standardises_target() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("year.txt");
        fs::write(&path, "2000,1,2\n2002,3,4\n").unwrap();
        let data = load_year_prediction(&path, 10.0).unwrap();
        assert_eq!(data.ys, vec![-1.0, 1.0]);
    }

    #[test]
    fn split_holds_out_fraction() {
        let data = Dataset { ys: (0..20).map(f64::from).collect(), vs: vec![DVector::zeros(1); 20] };
        let (train, test) = data.split(0.1, 3);
        assert_eq!((train.len(), test.len()), (18, 2));
        let mut all: Vec<f64> = train.ys.iter().chain(&test.ys).copied().collect();
        all.sort_by(f64::total_cmp);
        assert_eq!(all, data.ys);
    }
}
