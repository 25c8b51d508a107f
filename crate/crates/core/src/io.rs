//! File formats: a small binary container, CSV datasets, and JSON helpers.
//!
//! Container layout, all integers and floats little-endian:
//!
//! ```text
//! magic   b"GLKN"
//! version u32 (= 1)
//! count   u32
//! entries:
//!   name_len u32, name utf-8
//!   kind     u8   0 = f64 array, 1 = utf-8 text
//!   array:   ndim u32, dims u64 * ndim, values f64 * prod(dims), row-major
//!   text:    len u64, bytes
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DMatrix;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::galerkin::{GramTriplet, SpectralEstimate};
use crate::hermite::HermiteProblem;

pub const MAGIC: &[u8; 4] = b"GLKN";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Entry {
    Array { shape: Vec<usize>, values: Vec<f64> },
    Text(String),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Container {
    pub entries: Vec<(String, Entry)>,
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::Format(msg.into())
}

impl Container {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push_array(&mut self, name: &str, shape: Vec<usize>, values: Vec<f64>) {
        self.entries.push((name.to_string(), Entry::Array { shape, values }));
    }

    pub fn push_matrix(&mut self, name: &str, m: &DMatrix<f64>) {
        let values = m.transpose().as_slice().to_vec();
        self.push_array(name, vec![m.nrows(), m.ncols()], values);
    }

    pub fn push_text(&mut self, name: &str, text: &str) {
        self.entries.push((name.to_string(), Entry::Text(text.to_string())));
    }

    pub fn get(&self, name: &str) -> Result<&Entry> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, e)| e)
            .ok_or_else(|| format_err(format!("missing entry {name:?}")))
    }

    pub fn get_array(&self, name: &str) -> Result<(&[usize], &[f64])> {
        match self.get(name)? {
            Entry::Array { shape, values } => Ok((shape, values)),
            Entry::Text(_) => Err(format_err(format!("entry {name:?} is text"))),
        }
    }

    pub fn get_matrix(&self, name: &str) -> Result<DMatrix<f64>> {
        let (shape, values) = self.get_array(name)?;
        match *shape {
            [r, c] => Ok(DMatrix::from_row_slice(r, c, values)),
            _ => Err(format_err(format!("entry {name:?} has shape {shape:?}, expected 2-d"))),
        }
    }

    pub fn get_scalar(&self, name: &str) -> Result<f64> {
        match self.get_array(name)? {
            (_, [v]) => Ok(*v),
            (shape, _) => Err(format_err(format!(
                "entry {name:?} has shape {shape:?}, expected scalar"
            ))),
        }
    }

    pub fn get_text(&self, name: &str) -> Result<&str> {
        match self.get(name)? {
            Entry::Text(t) => Ok(t),
            Entry::Array { .. } => Err(format_err(format!("entry {name:?} is an array"))),
        }
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.entries.len() as u32).to_le_bytes())?;
        for (name, entry) in &self.entries {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            match entry {
                Entry::Array { shape, values } => {
                    let expect: usize = shape.iter().product();
                    if expect != values.len() {
                        return Err(format_err(format!(
                            "entry {name:?}: shape {shape:?} does not match {} values",
                            values.len()
                        )));
                    }
                    w.write_all(&[0])?;
                    w.write_all(&(shape.len() as u32).to_le_bytes())?;
                    for &s in shape {
                        w.write_all(&(s as u64).to_le_bytes())?;
                    }
                    for v in values {
                        w.write_all(&v.to_le_bytes())?;
                    }
                }
                Entry::Text(t) => {
                    w.write_all(&[1])?;
                    w.write_all(&(t.len() as u64).to_le_bytes())?;
                    w.write_all(t.as_bytes())?;
                }
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(format_err("not a container file (bad magic)"));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(format_err(format!("unsupported container version {version}")));
        }
        let count = read_u32(r)?;
        let mut entries = Vec::with_capacity(count.min(1024) as usize);
        for _ in 0..count {
            let len = read_u32(r)? as usize;
            let name = String::from_utf8(read_bytes(r, len)?).map_err(|_| format_err("entry name is not utf-8"))?;
            let mut kind = [0u8; 1];
            r.read_exact(&mut kind)?;
            let entry = match kind[0] {
                0 => {
                    let ndim = read_u32(r)? as usize;
                    let mut shape = Vec::with_capacity(ndim.min(16));
                    for _ in 0..ndim {
                        shape.push(read_u64(r)? as usize);
                    }
                    let total = shape
                        .iter()
                        .try_fold(1usize, |acc, &s| acc.checked_mul(s))
                        .ok_or_else(|| format_err("array shape overflows"))?;
                    let bytes = read_bytes(r, total.checked_mul(8).ok_or_else(|| format_err("array too large"))?)?;
                    let values = bytes
                        .chunks_exact(8)
                        .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
                        .collect();
                    Entry::Array { shape, values }
                }
                1 => {
                    let len = read_u64(r)? as usize;
                    Entry::Text(
                        String::from_utf8(read_bytes(r, len)?).map_err(|_| format_err("text entry is not utf-8"))?,
                    )
                }
                k => return Err(format_err(format!("unknown entry kind {k}"))),
            };
            entries.push((name, entry));
        }
        Ok(Container { entries })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::read_from(&mut BufReader::new(File::open(path)?))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

fn read_bytes<R: Read>(r: &mut R, len: usize) -> Result<Vec<u8>> {
    let mut buf = Vec::new();
    r.take(len as u64).read_to_end(&mut buf)?;
    if buf.len() != len {
        return Err(format_err("unexpected end of file"));
    }
    Ok(buf)
}

impl From<&Dataset> for Container {
    fn from(ds: &Dataset) -> Self {
        let mut c = Container::new();
        c.push_array("points", vec![ds.n(), ds.d()], ds.as_row_major().to_vec());
        c
    }
}

impl TryFrom<&Container> for Dataset {
    type Error = Error;

    fn try_from(c: &Container) -> Result<Self> {
        let (shape, values) = c.get_array("points")?;
        match *shape {
            [n, d] => Dataset::from_row_major(n, d, values.to_vec()),
            _ => Err(format_err("points must be 2-d")),
        }
    }
}

impl From<&GramTriplet> for Container {
    fn from(g: &GramTriplet) -> Self {
        let mut c = Container::new();
        c.push_matrix("L", &g.l);
        c.push_matrix("Phi", &g.phi);
        c.push_matrix("Psi", &g.psi);
        c.push_array("n_samples", vec![1], vec![g.n_samples as f64]);
        c
    }
}

impl TryFrom<&Container> for GramTriplet {
    type Error = Error;

    fn try_from(c: &Container) -> Result<Self> {
        Ok(GramTriplet {
            l: c.get_matrix("L")?,
            phi: c.get_matrix("Phi")?,
            psi: c.get_matrix("Psi")?,
            n_samples: c.get_scalar("n_samples")? as usize,
        })
    }
}

impl From<&SpectralEstimate> for Container {
    fn from(e: &SpectralEstimate) -> Self {
        let mut c = Container::new();
        c.push_array("values", vec![e.values.len()], e.values.clone());
        c.push_matrix("left", &e.left);
        c.push_matrix("right", &e.right);
        let lm = &e.landmarks;
        c.push_array("landmarks", vec![lm.n(), lm.d()], lm.as_row_major().to_vec());
        c.push_text("kernel", &serde_json::to_string(&e.kernel).expect("kernel serializes"));
        c.push_array("epsilon", vec![1], vec![e.epsilon]);
        c
    }
}

impl TryFrom<&Container> for SpectralEstimate {
    type Error = Error;

    fn try_from(c: &Container) -> Result<Self> {
        let (shape, values) = c.get_array("landmarks")?;
        let landmarks = match *shape {
            [n, d] => Dataset::from_row_major(n, d, values.to_vec())?,
            _ => return Err(format_err("landmarks must be 2-d")),
        };
        Ok(SpectralEstimate {
            values: c.get_array("values")?.1.to_vec(),
            left: c.get_matrix("left")?,
            right: c.get_matrix("right")?,
            landmarks,
            kernel: c.get_text("kernel")?.parse()?,
            epsilon: c.get_scalar("epsilon")?,
        })
    }
}

fn read_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = rec
            .iter()
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|_| Error::input(format!("line {}: cannot parse {f:?} as a number", i + 1)))
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(row);
    }
    Ok(rows)
}

/// Headerless CSV, one point per line.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    Dataset::from_rows(&read_rows(path)?)
}

pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for x in ds.points() {
        w.write_record(x.iter().map(|v| format!("{v:e}")))?;
    }
    w.flush()?;
    Ok(())
}

/// CSV for paths ending in `.csv`, the binary container otherwise.
pub fn load_dataset(path: &Path) -> Result<Dataset> {
    if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("csv")) {
        read_dataset_csv(path)
    } else {
        Dataset::try_from(&Container::load(path)?)
    }
}

/// Rows `[x (d), y, t (d)]`.
pub fn read_hermite_csv(path: &Path) -> Result<HermiteProblem> {
    let rows = read_rows(path)?;
    let width = rows.first().map_or(0, |r| r.len());
    if width < 3 || width % 2 == 0 {
        return Err(Error::input(format!("hermite rows need 2d+1 columns, got {width}")));
    }
    let d = (width - 1) / 2;
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut t = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        if r.len() != width {
            return Err(Error::input(format!(
                "row {i} has {} columns, expected {width}",
                r.len()
            )));
        }
        x.extend_from_slice(&r[..d]);
        y.push(r[d]);
        t.extend_from_slice(&r[d + 1..]);
    }
    HermiteProblem::new(Dataset::from_row_major(rows.len(), d, x)?, y, t)
}

pub fn write_hermite_csv(path: &Path, problem: &HermiteProblem) -> Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_path(path)?;
    for k in 0..problem.data().n() {
        let row = problem
            .data()
            .point(k)
            .iter()
            .chain(std::iter::once(&problem.values()[k]))
            .chain(problem.gradient(k))
            .map(|v| format!("{v:e}"));
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Serde adapter storing a matrix as a list of rows.
pub mod matrix_rows {
    use nalgebra::DMatrix;
    use serde::de::Error as _;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(m: &DMatrix<f64>, s: S) -> Result<S::Ok, S::Error> {
        let rows: Vec<Vec<f64>> = m.row_iter().map(|r| r.iter().copied().collect()).collect();
        rows.serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DMatrix<f64>, D::Error> {
        let rows = Vec::<Vec<f64>>::deserialize(d)?;
        let ncols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != ncols) {
            return Err(D::Error::custom("ragged matrix rows"));
        }
        let flat: Vec<f64> = rows.into_iter().flatten().collect();
        Ok(DMatrix::from_row_slice(flat.len() / ncols.max(1), ncols, &flat))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::galerkin::{decompose, DecomposeOptions};
    use crate::ground_truth::sample_sphere;
    use crate::kernels::KernelSpec;

    #[test]
    fn container_round_trip() {
        let mut c = Container::new();
        c.push_matrix("m", &DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]));
        c.push_text("note", "hello");
        c.push_array("empty", vec![0], vec![]);
        let mut buf = Vec::new();
        c.write_to(&mut buf).unwrap();
        assert_eq!(&buf[..4], MAGIC);
        // First matrix value sits after header, name, kind, ndim and dims.
        let off = 4 + 4 + 4 + 4 + 1 + 1 + 4 + 16;
        assert_eq!(f64::from_le_bytes(buf[off..off + 8].try_into().unwrap()), 1.0);
        let back = Container::read_from(&mut buf.as_slice()).unwrap();
        assert_eq!(back, c);
        assert_eq!(back.get_matrix("m").unwrap()[(1, 0)], 4.0);
        assert!(Container::read_from(&mut &buf[..buf.len() - 1]).is_err());
        assert!(Container::read_from(&mut &b"NOPE"[..]).is_err());
    }

    #[test]
    fn estimate_round_trips() {
        let data = sample_sphere(200, 3, 0).unwrap();
        let opts = DecomposeOptions {
            p: Some(12),
            ..Default::default()
        };
        let est = decompose(&data, &KernelSpec::exponential(1.0), &opts).unwrap();
        let c = Container::from(&est);
        assert_eq!(SpectralEstimate::try_from(&c).unwrap(), est);
        let json = serde_json::to_string(&est).unwrap();
        assert_eq!(serde_json::from_str::<SpectralEstimate>(&json).unwrap(), est);
    }

    #[test]
    fn csv_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let ds = sample_sphere(20, 3, 1).unwrap();
        let p = dir.path().join("x.csv");
        write_dataset_csv(&p, &ds).unwrap();
        assert_eq!(load_dataset(&p).unwrap(), ds);
        let b = dir.path().join("x.bin");
        Container::from(&ds).save(&b).unwrap();
        assert_eq!(load_dataset(&b).unwrap(), ds);

        let problem = HermiteProblem::new(ds.clone(), vec![0.5; 20], vec![0.25; 60]).unwrap();
        let h = dir.path().join("h.csv");
        write_hermite_csv(&h, &problem).unwrap();
        assert_eq!(read_hermite_csv(&h).unwrap(), problem);

        std::fs::write(&p, "1,2\n3,x\n").unwrap();
        assert!(read_dataset_csv(&p).unwrap_err().is_config());
    }
}
