//! Survival data: observed times, event indicators and the two covariate
//! blocks (clinical `x`, genomic `z`), plus the risk-set bookkeeping the
//! partial likelihood needs.

use std::cmp::Ordering;
use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column means and sample standard deviations (n - 1 denominator) used to
/// standardize a training set. Test data is mapped with the same statistics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub x_mean: Vec<f64>,
    pub x_sd: Vec<f64>,
    pub z_mean: Vec<f64>,
    pub z_sd: Vec<f64>,
}

impl Standardization {
    pub fn apply_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_columns(x, &self.x_mean, &self.x_sd, "x")
    }

    pub fn apply_z(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        apply_columns(z, &self.z_mean, &self.z_sd, "z")
    }

    pub fn invert_x(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        invert_columns(x, &self.x_mean, &self.x_sd, "x")
    }

    pub fn invert_z(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        invert_columns(z, &self.z_mean, &self.z_sd, "z")
    }
}

fn apply_columns(m: &DMatrix<f64>, mean: &[f64], sd: &[f64], block: &str) -> Result<DMatrix<f64>> {
    if m.ncols() != mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "{block} block has {} columns, standardization expects {}",
            m.ncols(),
            mean.len()
        )));
    }
    let mut out = m.clone();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        col.apply(|v| *v = (*v - mean[c]) / sd[c]);
    }
    Ok(out)
}

fn invert_columns(m: &DMatrix<f64>, mean: &[f64], sd: &[f64], block: &str) -> Result<DMatrix<f64>> {
    if m.ncols() != mean.len() {
        return Err(Error::DimensionMismatch(format!(
            "{block} block has {} columns, standardization expects {}",
            m.ncols(),
            mean.len()
        )));
    }
    let mut out = m.clone();
    for (c, mut col) in out.column_iter_mut().enumerate() {
        col.apply(|v| *v = *v * sd[c] + mean[c]);
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct SurvivalDataset {
    pub(crate) time: Vec<f64>,
    pub(crate) status: Vec<bool>,
    pub(crate) x: DMatrix<f64>,
    pub(crate) z: DMatrix<f64>,
    pub(crate) x_names: Vec<String>,
    pub(crate) z_names: Vec<String>,
    pub(crate) scaling: Option<Standardization>,
    pub(crate) order: Vec<usize>,
}

impl SurvivalDataset {
    /// Builds a dataset with default column names `x1..xP`, `z1..zQ`.
    pub fn new(time: Vec<f64>, status: Vec<bool>, x: DMatrix<f64>, z: DMatrix<f64>) -> Result<Self> {
        let x_names = (1..=x.ncols()).map(|j| format!("x{j}")).collect();
        let z_names = (1..=z.ncols()).map(|j| format!("z{j}")).collect();
        Self::with_names(time, status, x, z, x_names, z_names)
    }

    pub fn with_names(
        time: Vec<f64>,
        status: Vec<bool>,
        x: DMatrix<f64>,
        z: DMatrix<f64>,
        x_names: Vec<String>,
        z_names: Vec<String>,
    ) -> Result<Self> {
        let n = time.len();
        if status.len() != n || x.nrows() != n || z.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "time has {n} rows, status {}, x {}, z {}",
                status.len(),
                x.nrows(),
                z.nrows()
            )));
        }
        if x_names.len() != x.ncols() || z_names.len() != z.ncols() {
            return Err(Error::DimensionMismatch("column names do not match matrix widths".into()));
        }
        if time.iter().any(|t| !t.is_finite()) {
            return Err(Error::NonFinite("time"));
        }
        if let Some(t) = time.iter().find(|t| **t < 0.0) {
            return Err(Error::SchemaMismatch(format!("negative observed time {t}")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("x"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("z"));
        }
        let order = time_order(&time, &status);
        Ok(Self { time, status, x, z, x_names, z_names, scaling: None, order })
    }

    pub fn n(&self) -> usize {
        self.time.len()
    }

    pub fn p(&self) -> usize {
        self.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.z.ncols()
    }

    pub fn time(&self) -> &[f64] {
        &self.time
    }

    pub fn status(&self) -> &[bool] {
        &self.status
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn x_names(&self) -> &[String] {
        &self.x_names
    }

    pub fn z_names(&self) -> &[String] {
        &self.z_names
    }

    /// Permutation sorting subjects by ascending time, events before
    /// censorings at equal times.
    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn is_standardized(&self) -> bool {
        self.scaling.is_some()
    }

    pub fn standardization(&self) -> Option<&Standardization> {
        self.scaling.as_ref()
    }

    pub fn n_events(&self) -> usize {
        self.status.iter().filter(|s| **s).count()
    }

    pub fn censor_rate(&self) -> f64 {
        if self.n() == 0 {
            return 0.0;
        }
        1.0 - self.n_events() as f64 / self.n() as f64
    }

    /// Centers and scales every covariate column to sample mean 0 and
    /// sample SD 1, retaining the statistics.
    pub fn standardize(&self) -> Result<Self> {
        if self.scaling.is_some() {
            return Err(Error::AlreadyStandardized);
        }
        let (x_mean, x_sd) = column_moments(&self.x, &self.x_names)?;
        let (z_mean, z_sd) = column_moments(&self.z, &self.z_names)?;
        let scaling = Standardization { x_mean, x_sd, z_mean, z_sd };
        self.standardize_with(&scaling)
    }

    /// Maps covariates with externally supplied statistics (e.g. a training
    /// set's) and marks the result standardized.
    pub fn standardize_with(&self, scaling: &Standardization) -> Result<Self> {
        if self.scaling.is_some() {
            return Err(Error::AlreadyStandardized);
        }
        let mut out = self.clone();
        out.x = scaling.apply_x(&self.x)?;
        out.z = scaling.apply_z(&self.z)?;
        out.scaling = Some(scaling.clone());
        Ok(out)
    }

    /// Undoes `standardize`, returning covariates on the original scale.
    pub fn destandardize(&self) -> Result<Self> {
        let Some(scaling) = &self.scaling else {
            return Ok(self.clone());
        };
        let mut out = self.clone();
        out.x = scaling.invert_x(&self.x)?;
        out.z = scaling.invert_z(&self.z)?;
        out.scaling = None;
        Ok(out)
    }

    /// Rows `rows` (in that order) as a new dataset. Standardization state
    /// and statistics carry over unchanged.
    pub fn subset(&self, rows: &[usize]) -> Self {
        let time: Vec<f64> = rows.iter().map(|&r| self.time[r]).collect();
        let status: Vec<bool> = rows.iter().map(|&r| self.status[r]).collect();
        let x = self.x.select_rows(rows);
        let z = self.z.select_rows(rows);
        let order = time_order(&time, &status);
        Self {
            time,
            status,
            x,
            z,
            x_names: self.x_names.clone(),
            z_names: self.z_names.clone(),
            scaling: self.scaling.clone(),
            order,
        }
    }

    pub fn risk_index(&self) -> RiskIndex {
        build_risk_index(self)
    }
}

fn column_moments(m: &DMatrix<f64>, names: &[String]) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = m.nrows();
    let mut means = Vec::with_capacity(m.ncols());
    let mut sds = Vec::with_capacity(m.ncols());
    for (c, col) in m.column_iter().enumerate() {
        let mean = col.iter().sum::<f64>() / n as f64;
        let ss: f64 = col.iter().map(|v| (v - mean) * (v - mean)).sum();
        let sd = if n > 1 { (ss / (n - 1) as f64).sqrt() } else { 0.0 };
        if !mean.is_finite() || !sd.is_finite() {
            return Err(Error::NonFinite("covariate column"));
        }
        if sd <= 1e-12 * (1.0 + mean.abs()) {
            return Err(Error::ConstantColumn(names[c].clone()));
        }
        means.push(mean);
        sds.push(sd);
    }
    Ok((means, sds))
}

fn time_order(time: &[f64], status: &[bool]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..time.len()).collect();
    // Stable: equal (time, status) keeps input order.
    order.sort_by(|&a, &b| {
        time[a]
            .partial_cmp(&time[b])
            .unwrap_or(Ordering::Equal)
            .then_with(|| status[b].cmp(&status[a]))
    });
    order
}

/// Risk sets in ascending time order. For the subject at sorted position
/// `k`, `R = order[group_start[k]..]` and `E = order[..=group_end[k]]`,
/// where the group is the block of positions sharing `time[order[k]]`.
/// Tied events therefore share one risk set (Breslow).
#[derive(Debug, Clone)]
pub struct RiskIndex {
    order: Vec<usize>,
    rank: Vec<usize>,
    group_start: Vec<usize>,
    group_end: Vec<usize>,
}

impl RiskIndex {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    /// Sorted position of subject `i`.
    pub fn rank(&self, i: usize) -> usize {
        self.rank[i]
    }

    /// First sorted position of the tie group at position `k`.
    pub fn group_start(&self, k: usize) -> usize {
        self.group_start[k]
    }

    /// Last sorted position (inclusive) of the tie group at position `k`.
    pub fn group_end(&self, k: usize) -> usize {
        self.group_end[k]
    }

    /// Subjects in `R_i = {l : T_l >= T_i}`.
    pub fn risk_set(&self, i: usize) -> Vec<usize> {
        let k = self.rank[i];
        self.order[self.group_start[k]..].to_vec()
    }

    /// Subjects `m` whose risk set contains `i`.
    pub fn containing_sets(&self, i: usize) -> Vec<usize> {
        let k = self.rank[i];
        self.order[..=self.group_end[k]].to_vec()
    }
}

pub fn build_risk_index(ds: &SurvivalDataset) -> RiskIndex {
    risk_index_from(&ds.time, &ds.order)
}

pub(crate) fn risk_index_from(time: &[f64], order: &[usize]) -> RiskIndex {
    let n = order.len();
    let mut rank = vec![0; n];
    for (k, &i) in order.iter().enumerate() {
        rank[i] = k;
    }
    let mut group_start = vec![0; n];
    let mut group_end = vec![0; n];
    let mut k = 0;
    while k < n {
        let t = time[order[k]];
        let mut end = k;
        while end + 1 < n && time[order[end + 1]] == t {
            end += 1;
        }
        for pos in k..=end {
            group_start[pos] = k;
            group_end[pos] = end;
        }
        k = end + 1;
    }
    RiskIndex { order: order.to_vec(), rank, group_start, group_end }
}

/// Column partition of a survival CSV.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub time: String,
    pub status: String,
    #[serde(default)]
    pub x: Vec<String>,
    #[serde(default)]
    pub z: Vec<String>,
}

impl CsvSchema {
    pub fn from_json_file(path: &Path) -> Result<Self> {
        let mut s = String::new();
        File::open(path)?.read_to_string(&mut s)?;
        Ok(serde_json::from_str(&s)?)
    }

    pub fn write_json_file(&self, path: &Path) -> Result<()> {
        let mut f = File::create(path)?;
        serde_json::to_writer_pretty(&mut f, self)?;
        writeln!(f)?;
        Ok(())
    }

    /// Convention used by generated files: `time`, `status`, then columns
    /// prefixed `x` and `z`.
    pub fn infer(header: &[String]) -> Result<Self> {
        let has = |name: &str| header.iter().any(|h| h == name);
        if !has("time") || !has("status") {
            return Err(Error::SchemaMismatch(
                "no schema given and header lacks `time`/`status` columns".into(),
            ));
        }
        let x = header.iter().filter(|h| h.starts_with('x')).cloned().collect();
        let z = header.iter().filter(|h| h.starts_with('z')).cloned().collect();
        Ok(Self { time: "time".into(), status: "status".into(), x, z })
    }
}

/// Reads the CSV header row only.
pub fn read_csv_header(path: &Path) -> Result<Vec<String>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    Ok(rdr.headers()?.iter().map(|h| h.trim().to_string()).collect())
}

pub fn read_csv(path: &Path, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    read_csv_from(rdr, schema)
}

pub fn read_csv_str(text: &str, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    read_csv_from(rdr, schema)
}

fn read_csv_from<R: Read>(mut rdr: csv::Reader<R>, schema: &CsvSchema) -> Result<SurvivalDataset> {
    let header: Vec<String> = rdr.headers()?.iter().map(|h| h.trim().to_string()).collect();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::SchemaMismatch(format!("column `{name}` not in header")))
    };
    let time_col = find(&schema.time)?;
    let status_col = find(&schema.status)?;
    let x_cols = schema.x.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;
    let z_cols = schema.z.iter().map(|c| find(c)).collect::<Result<Vec<_>>>()?;

    let mut time = Vec::new();
    let mut status = Vec::new();
    let mut xv = Vec::new();
    let mut zv = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        let field = |c: usize| -> Result<f64> {
            let raw = record.get(c).map(str::trim).unwrap_or("");
            if raw.is_empty() || raw.eq_ignore_ascii_case("na") || raw.eq_ignore_ascii_case("nan") {
                return Err(Error::MissingValue { row, col: header[c].clone() });
            }
            raw.parse::<f64>().map_err(|_| Error::Parse { row, col: header[c].clone() })
        };
        time.push(field(time_col)?);
        let s = field(status_col)?;
        if s == 0.0 {
            status.push(false);
        } else if s == 1.0 {
            status.push(true);
        } else {
            return Err(Error::SchemaMismatch(format!(
                "status at row {row} is {s}, expected 0 or 1"
            )));
        }
        for &c in &x_cols {
            xv.push(field(c)?);
        }
        for &c in &z_cols {
            zv.push(field(c)?);
        }
    }
    let n = time.len();
    let x = DMatrix::from_row_slice(n, x_cols.len(), &xv);
    let z = DMatrix::from_row_slice(n, z_cols.len(), &zv);
    SurvivalDataset::with_names(time, status, x, z, schema.x.clone(), schema.z.clone())
}

/// Writes `time,status,<x names>,<z names>` with shortest round-trip float
/// formatting. Standardized datasets are written as stored.
pub fn write_csv<W: Write>(ds: &SurvivalDataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend(ds.x_names.iter().cloned());
    header.extend(ds.z_names.iter().cloned());
    w.write_record(&header)?;
    for i in 0..ds.n() {
        let mut rec = Vec::with_capacity(header.len());
        rec.push(format!("{}", ds.time[i]));
        rec.push(if ds.status[i] { "1".into() } else { "0".into() });
        rec.extend(ds.x.row(i).iter().map(|v| format!("{v}")));
        rec.extend(ds.z.row(i).iter().map(|v| format!("{v}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv_file(ds: &SurvivalDataset, path: &Path) -> Result<()> {
    write_csv(ds, File::create(path)?)
}

impl SurvivalDataset {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            time: "time".into(),
            status: "status".into(),
            x: self.x_names.clone(),
            z: self.z_names.clone(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(time: &[f64], status: &[bool]) -> SurvivalDataset {
        let n = time.len();
        SurvivalDataset::new(time.to_vec(), status.to_vec(), DMatrix::zeros(n, 0), DMatrix::zeros(n, 0))
            .unwrap()
    }

    #[test]
    fn standardize_symmetric_column() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let d = SurvivalDataset::new(vec![1.0, 2.0, 3.0], vec![true; 3], x, DMatrix::zeros(3, 0)).unwrap();
        let s = d.standardize().unwrap();
        let col: Vec<f64> = s.x().column(0).iter().copied().collect();
        assert_eq!(col, vec![-1.0, 0.0, 1.0]);
        assert!(s.is_standardized());
        assert_eq!(s.time(), d.time());
    }

    #[test]
    fn standardize_is_idempotent_on_normalized_values() {
        let x = DMatrix::from_column_slice(3, 1, &[-1.0, 0.0, 1.0]);
        let d = SurvivalDataset::new(vec![1.0, 2.0, 3.0], vec![true; 3], x.clone(), DMatrix::zeros(3, 0)).unwrap();
        let s = d.standardize().unwrap();
        for (a, b) in s.x().iter().zip(x.iter()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_column_rejected() {
        let z = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 3.0, 5.0, 5.0, 5.0]);
        let d = SurvivalDataset::new(vec![1.0, 2.0, 3.0], vec![true; 3], DMatrix::zeros(3, 0), z).unwrap();
        match d.standardize() {
            Err(Error::ConstantColumn(name)) => assert_eq!(name, "z2"),
            other => panic!("expected ConstantColumn, got {other:?}"),
        }
    }

    #[test]
    fn non_finite_rejected() {
        let x = DMatrix::from_column_slice(2, 1, &[1.0, f64::NAN]);
        let err = SurvivalDataset::new(vec![1.0, 2.0], vec![true; 2], x, DMatrix::zeros(2, 0)).unwrap_err();
        assert!(matches!(err, Error::NonFinite(_)));
    }

    #[test]
    fn double_standardize_rejected() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 4.0]);
        let d = SurvivalDataset::new(vec![1.0, 2.0, 3.0], vec![true; 3], x, DMatrix::zeros(3, 0)).unwrap();
        let s = d.standardize().unwrap();
        assert!(matches!(s.standardize(), Err(Error::AlreadyStandardized)));
    }

    #[test]
    fn smallest_time_sees_everyone() {
        let d = ds(&[3.0, 1.0, 2.0], &[true; 3]);
        let risk = d.risk_index();
        let mut r = risk.risk_set(1);
        r.sort();
        assert_eq!(r, vec![0, 1, 2]);
    }

    #[test]
    fn largest_time_risk_set_is_itself() {
        let d = ds(&[1.0, 2.0, 3.0], &[true; 3]);
        assert_eq!(d.risk_index().risk_set(2), vec![2]);
    }

    #[test]
    fn tied_event_precedes_censoring() {
        let d = ds(&[1.0, 1.0, 2.0], &[false, true, true]);
        assert_eq!(d.order(), &[1, 0, 2]);
        let risk = d.risk_index();
        for i in 0..3 {
            let mut got = risk.risk_set(i);
            got.sort();
            let want: Vec<usize> = (0..3).filter(|&l| d.time()[l] >= d.time()[i]).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn csv_shape_and_status_domain() {
        let schema = CsvSchema {
            time: "time".into(),
            status: "status".into(),
            x: vec!["x1".into()],
            z: vec!["z1".into(), "z2".into()],
        };
        let text = "time,status,x1,z1,z2\n1,1,0.5,1,2\n2,0,0.1,3,4\n3,1,0.2,5,7\n";
        let d = read_csv_str(text, &schema).unwrap();
        assert_eq!((d.n(), d.p(), d.q()), (3, 1, 2));

        let bad = "time,status,x1,z1,z2\n1,2,0.5,1,2\n";
        assert!(matches!(read_csv_str(bad, &schema), Err(Error::SchemaMismatch(_))));

        let missing = "time,status,x1,z1,z2\n1,1,,1,2\n";
        assert!(matches!(
            read_csv_str(missing, &schema),
            Err(Error::MissingValue { row: 1, .. })
        ));

        let garbage = "time,status,x1,z1,z2\n1,1,abc,1,2\n";
        assert!(matches!(read_csv_str(garbage, &schema), Err(Error::Parse { row: 1, .. })));

        let no_col = CsvSchema { z: vec!["z9".into()], ..schema.clone() };
        assert!(matches!(read_csv_str(text, &no_col), Err(Error::SchemaMismatch(_))));
    }

    #[test]
    fn schema_inference() {
        let header: Vec<String> = ["time", "status", "x1", "z1", "z2"].iter().map(|s| s.to_string()).collect();
        let s = CsvSchema::infer(&header).unwrap();
        assert_eq!(s.x, vec!["x1"]);
        assert_eq!(s.z, vec!["z1", "z2"]);
    }
}
