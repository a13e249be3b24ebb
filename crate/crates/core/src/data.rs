//! Dataset IO, preprocessing and seeded synthetic generators.
//!
//! Random numbers come from ChaCha8 with one stream per column, so column `j`
//! of a generated design does not depend on `p`. Gaussians use the
//! Box–Muller transform (one draw per pair of uniforms).

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, norm2};
use crate::types::{Dataset, DesignMatrix, GroupLayout};

const MAGIC: &[u8; 4] = b"DPPS";
const VERSION: u16 = 1;
const HEADER_LEN: u64 = 4 + 2 + 8 + 8;

// Streams past any plausible column index.
const SUPPORT_STREAM: u64 = u64::MAX - 1;
const NOISE_STREAM: u64 = u64::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Correlation {
    Iid,
    /// `corr(x_i, x_j) = ρ^{|i−j|}`
    Ar1(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub n: usize,
    pub p: usize,
    /// Number of nonzero coefficients, or of nonzero groups when `group_sizes` is set.
    pub nnz: usize,
    pub sigma: f64,
    pub correlation: Correlation,
    pub seed: u64,
    pub group_sizes: Option<Vec<usize>>,
}

impl SyntheticSpec {
    pub fn new(n: usize, p: usize, nnz: usize, sigma: f64, seed: u64) -> Self {
        Self {
            n,
            p,
            nnz,
            sigma,
            correlation: Correlation::Iid,
            seed,
            group_sizes: None,
        }
    }

    pub fn with_correlation(mut self, c: Correlation) -> Self {
        self.correlation = c;
        self
    }

    pub fn with_groups(mut self, sizes: Vec<usize>) -> Self {
        self.group_sizes = Some(sizes);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidSpec(m));
        if self.n == 0 || self.p == 0 {
            return bad(format!("n and p must be positive (n={}, p={})", self.n, self.p));
        }
        let units = match &self.group_sizes {
            Some(sizes) => {
                GroupLayout::for_features(sizes.clone(), self.p).map_err(|e| Error::InvalidSpec(e.to_string()))?;
                sizes.len()
            }
            None => self.p,
        };
        if self.nnz > units {
            return bad(format!("nnz = {} exceeds {units}", self.nnz));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return bad(format!("sigma = {} must be finite and >= 0", self.sigma));
        }
        if let Correlation::Ar1(rho) = self.correlation {
            if !(0.0..1.0).contains(&rho) {
                return bad(format!("rho = {rho} must lie in [0, 1)"));
            }
        }
        Ok(())
    }

    pub fn layout(&self) -> Option<GroupLayout> {
        self.group_sizes.as_ref().map(|s| GroupLayout::new(s.clone()).expect("validated"))
    }
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

pub(crate) fn standard_normal<R: Rng>(rng: &mut R) -> f64 {
    // 1 − U keeps the log argument in (0, 1]
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen::<f64>();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Draws `X`, a sparse `β*` and `y = Xβ* + σε`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<(Dataset, Vec<f64>)> {
    spec.validate()?;
    let (n, p) = (spec.n, spec.p);
    let mut data = Vec::with_capacity(n * p);
    for j in 0..p {
        let mut rng = stream(spec.seed, j as u64);
        let z: Vec<f64> = (0..n).map(|_| standard_normal(&mut rng)).collect();
        match spec.correlation {
            Correlation::Ar1(rho) if j > 0 => {
                let tail = (1.0 - rho * rho).sqrt();
                let prev = (j - 1) * n;
                for (i, zi) in z.into_iter().enumerate() {
                    let v = rho * data[prev + i] + tail * zi;
                    data.push(v);
                }
            }
            _ => data.extend(z),
        }
    }
    let x = DesignMatrix::from_col_major(n, p, data)?;

    let mut rng = stream(spec.seed, SUPPORT_STREAM);
    let mut beta = vec![0.0; p];
    match spec.layout() {
        None => {
            for j in index::sample(&mut rng, p, spec.nnz).into_iter() {
                beta[j] = rng.gen_range(-1.0..=1.0);
            }
        }
        Some(g) => {
            for k in index::sample(&mut rng, g.n_groups(), spec.nnz).into_iter() {
                for j in g.range(k) {
                    beta[j] = rng.gen_range(-1.0..=1.0);
                }
            }
        }
    }

    let mut y = vec![0.0; n];
    for (j, b) in beta.iter().enumerate() {
        if *b != 0.0 {
            linalg::axpy(*b, x.col(j), &mut y);
        }
    }
    if spec.sigma > 0.0 {
        let mut rng = stream(spec.seed, NOISE_STREAM);
        for yi in y.iter_mut() {
            *yi += spec.sigma * standard_normal(&mut rng);
        }
    }
    Ok((Dataset::new(x, y)?, beta))
}

fn parse_rows(path: &Path) -> Result<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut rows = Vec::new();
    let mut width = None;
    for (k, rec) in reader.records().enumerate() {
        let rec = rec?;
        let row = k + 1;
        let parsed: Vec<std::result::Result<f64, _>> = rec.iter().map(str::parse::<f64>).collect();
        if k == 0 && parsed.iter().any(|v| v.is_err()) {
            // header row
            continue;
        }
        match width {
            None => width = Some(parsed.len()),
            Some(w) if w != parsed.len() => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    row,
                    column: parsed.len().min(w) + 1,
                    message: format!("expected {w} fields, found {}", parsed.len()),
                })
            }
            _ => {}
        }
        let mut vals = Vec::with_capacity(parsed.len());
        for (c, v) in parsed.into_iter().enumerate() {
            match v {
                Ok(v) => vals.push(v),
                Err(e) => {
                    return Err(Error::Parse {
                        path: path.to_path_buf(),
                        row,
                        column: c + 1,
                        message: format!("{:?}: {e}", rec.get(c).unwrap_or("")),
                    })
                }
            }
        }
        rows.push(vals);
    }
    Ok(rows)
}

/// Reads an `N × p` design and an `N × 1` response. A first row that does
/// not parse as numbers is treated as a header.
pub fn load_csv(path_x: &Path, path_y: &Path) -> Result<Dataset> {
    let rows = parse_rows(path_x)?;
    let ys = parse_rows(path_y)?;
    if let Some((k, _)) = ys.iter().enumerate().find(|(_, r)| r.len() != 1) {
        return Err(Error::Parse {
            path: path_y.to_path_buf(),
            row: k + 1,
            column: 2,
            message: "response file must have exactly one column".into(),
        });
    }
    let y: Vec<f64> = ys.into_iter().map(|r| r[0]).collect();
    if rows.len() != y.len() {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but y has {}",
            rows.len(),
            y.len()
        )));
    }
    if rows.is_empty() {
        return Err(Error::DimensionMismatch("empty design".into()));
    }
    Dataset::new(DesignMatrix::from_rows(&rows)?, y)
}

/// Writes headerless CSVs using shortest round-trip float formatting.
pub fn save_csv(d: &Dataset, path_x: &Path, path_y: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path_x)?);
    for i in 0..d.n_samples() {
        let line: Vec<String> = (0..d.n_features()).map(|j| d.col(j)[i].to_string()).collect();
        writeln!(w, "{}", line.join(","))?;
    }
    w.flush()?;
    let mut w = BufWriter::new(File::create(path_y)?);
    for v in d.y() {
        writeln!(w, "{v}")?;
    }
    w.flush()?;
    Ok(())
}

/// `DPPS` binary: magic, `u16` version, `u64` N, `u64` p, X column-major, y.
/// All little-endian.
pub fn save_binary(d: &Dataset, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(d.n_samples() as u64).to_le_bytes())?;
    w.write_all(&(d.n_features() as u64).to_le_bytes())?;
    for v in d.x().as_slice().iter().chain(d.y()) {
        w.write_all(&v.to_le_bytes())?;
    }
    w.flush()?;
    Ok(())
}

pub fn load_binary(path: &Path) -> Result<Dataset> {
    let mut bytes = Vec::new();
    BufReader::new(File::open(path)?).read_to_end(&mut bytes)?;
    let found = bytes.len() as u64;
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::BadMagic);
    }
    if found < HEADER_LEN {
        return Err(Error::TruncatedFile {
            expected: HEADER_LEN,
            found,
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::UnsupportedVersion(version));
    }
    let n = u64::from_le_bytes(bytes[6..14].try_into().expect("8 bytes"));
    let p = u64::from_le_bytes(bytes[14..22].try_into().expect("8 bytes"));
    let expected = n
        .checked_mul(p)
        .and_then(|np| np.checked_add(n))
        .and_then(|c| c.checked_mul(8))
        .and_then(|b| b.checked_add(HEADER_LEN))
        .ok_or_else(|| Error::DimensionMismatch(format!("header sizes overflow (N={n}, p={p})")))?;
    if found < expected {
        return Err(Error::TruncatedFile { expected, found });
    }
    let floats: Vec<f64> = bytes[HEADER_LEN as usize..expected as usize]
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let (n, p) = (n as usize, p as usize);
    let (xs, ys) = floats.split_at(n * p);
    Dataset::new(DesignMatrix::from_col_major(n, p, xs.to_vec())?, ys.to_vec())
}

/// Optionally centers columns and `y`, and rescales columns to unit norm.
/// Zero-norm columns are left as they are (see `Dataset::zero_norm_columns`).
pub fn center_and_scale(d: &Dataset, center: bool, scale: bool) -> Result<Dataset> {
    if !center && !scale {
        return Ok(d.clone());
    }
    let n = d.n_samples();
    let mut cols: Vec<Vec<f64>> = (0..d.n_features()).map(|j| d.col(j).to_vec()).collect();
    let mut y = d.y().to_vec();
    if center {
        for c in cols.iter_mut().chain(std::iter::once(&mut y)) {
            let mean = c.iter().sum::<f64>() / n as f64;
            c.iter_mut().for_each(|v| *v -= mean);
        }
    }
    if scale {
        for c in cols.iter_mut() {
            let norm = norm2(c);
            if norm > 0.0 {
                c.iter_mut().for_each(|v| *v /= norm);
            }
        }
    }
    Dataset::new(DesignMatrix::from_columns(&cols)?, y)
}
