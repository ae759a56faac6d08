//! Symmetric random matrices `W = X / sqrt(n)` and their principal minors.

use std::io::{self, Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::entry_laws::{EntryLaw, EntrySampler, LawError, TruncationSpec};

const MAGIC: &[u8; 4] = b"WGNR";
const FORMAT_VERSION: u32 = 1;
const EXTERNAL_LAW: &str = "external";

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error(transparent)]
    Law(#[from] LawError),
    #[error("dimension must be at least 1")]
    EmptyDimension,
    #[error("index {index} out of range for dimension {n}")]
    IndexOutOfRange { index: usize, n: usize },
    #[error("matrix data is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("expected {expected} entries, got {got}")]
    WrongLength { expected: usize, got: usize },
    #[error("malformed matrix file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] io::Error),
}

/// How a sampled matrix was produced; `(n, law, seed, truncation)` pins it down.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Provenance {
    pub law: EntryLaw,
    pub seed: u64,
    pub truncation: Option<TruncationSpec>,
}

/// Dense real symmetric matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct WignerMatrix {
    n: usize,
    data: Vec<f64>,
    provenance: Option<Provenance>,
}

impl WignerMatrix {
    /// Samples the upper triangle (diagonal included) row by row from one
    /// ChaCha stream seeded with `seed`, then mirrors it.
    pub fn build(n: usize, law: EntryLaw, seed: u64, trunc: Option<TruncationSpec>) -> Result<Self, EnsembleError> {
        if n == 0 {
            return Err(EnsembleError::EmptyDimension);
        }
        let sampler = EntrySampler::new(law, trunc.as_ref(), n)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = 1.0 / (n as f64).sqrt();
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for k in j..n {
                let x = sampler.sample(&mut rng) * scale;
                data[j * n + k] = x;
                data[k * n + j] = x;
            }
        }
        Ok(Self { n, data, provenance: Some(Provenance { law, seed, truncation: trunc }) })
    }

    /// Wraps caller-supplied row-major data. Symmetry must be exact.
    pub fn from_symmetric(n: usize, data: Vec<f64>) -> Result<Self, EnsembleError> {
        if n == 0 {
            return Err(EnsembleError::EmptyDimension);
        }
        if data.len() != n * n {
            return Err(EnsembleError::WrongLength { expected: n * n, got: data.len() });
        }
        for j in 0..n {
            for k in j + 1..n {
                if data[j * n + k].to_bits() != data[k * n + j].to_bits() {
                    return Err(EnsembleError::NotSymmetric(j, k));
                }
            }
        }
        Ok(Self { n, data, provenance: None })
    }

    pub fn diagonal(values: &[f64]) -> Result<Self, EnsembleError> {
        let n = values.len();
        let mut data = vec![0.0; n * n];
        for (j, &v) in values.iter().enumerate() {
            data[j * n + j] = v;
        }
        Self::from_symmetric(n, data)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.data[j * self.n + k]
    }

    pub fn row(&self, j: usize) -> &[f64] {
        &self.data[j * self.n..(j + 1) * self.n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn provenance(&self) -> Option<&Provenance> {
        self.provenance.as_ref()
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|j| self.get(j, j)).sum()
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    /// Principal submatrix with the rows and columns in `deleted` removed
    /// (0-based parent indices). Entries keep the parent's `1/sqrt(n)` scale.
    pub fn minor(&self, deleted: &[usize]) -> Result<MinorView<'_>, EnsembleError> {
        for &d in deleted {
            if d >= self.n {
                return Err(EnsembleError::IndexOutOfRange { index: d, n: self.n });
            }
        }
        let kept = (0..self.n).filter(|i| !deleted.contains(i)).collect();
        Ok(MinorView { parent: self, kept })
    }

    /// Binary layout, all little-endian:
    /// `"WGNR"`, u32 version, u64 n, u32 law length, law bytes, u64 seed,
    /// u8 truncation flag, [f64 D, f64 kappa], then the upper triangle
    /// (diagonal included) packed row-major as f64.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<(), EnsembleError> {
        w.write_all(MAGIC)?;
        w.write_u32::<LittleEndian>(FORMAT_VERSION)?;
        w.write_u64::<LittleEndian>(self.n as u64)?;
        let (law, seed, trunc) = match &self.provenance {
            Some(p) => (p.law.to_string(), p.seed, p.truncation),
            None => (EXTERNAL_LAW.to_string(), 0, None),
        };
        w.write_u32::<LittleEndian>(law.len() as u32)?;
        w.write_all(law.as_bytes())?;
        w.write_u64::<LittleEndian>(seed)?;
        match trunc {
            Some(t) => {
                w.write_u8(1)?;
                w.write_f64::<LittleEndian>(t.d_const())?;
                w.write_f64::<LittleEndian>(t.kappa())?;
            }
            None => w.write_u8(0)?,
        }
        for j in 0..self.n {
            for k in j..self.n {
                w.write_f64::<LittleEndian>(self.get(j, k))?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self, EnsembleError> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(EnsembleError::Format("bad magic".into()));
        }
        let version = r.read_u32::<LittleEndian>()?;
        if version != FORMAT_VERSION {
            return Err(EnsembleError::Format(format!("unsupported version {version}")));
        }
        let n = r.read_u64::<LittleEndian>()? as usize;
        if n == 0 {
            return Err(EnsembleError::EmptyDimension);
        }
        let len = r.read_u32::<LittleEndian>()? as usize;
        let mut law_bytes = vec![0u8; len];
        r.read_exact(&mut law_bytes)?;
        let law_str = String::from_utf8(law_bytes).map_err(|_| EnsembleError::Format("law is not utf-8".into()))?;
        let seed = r.read_u64::<LittleEndian>()?;
        let truncation = match r.read_u8()? {
            0 => None,
            1 => {
                let d = r.read_f64::<LittleEndian>()?;
                let kappa = r.read_f64::<LittleEndian>()?;
                Some(TruncationSpec::new(d, kappa)?)
            }
            other => return Err(EnsembleError::Format(format!("bad truncation flag {other}"))),
        };
        let mut data = vec![0.0; n * n];
        for j in 0..n {
            for k in j..n {
                let x = r.read_f64::<LittleEndian>()?;
                data[j * n + k] = x;
                data[k * n + j] = x;
            }
        }
        let provenance = if law_str == EXTERNAL_LAW {
            None
        } else {
            Some(Provenance { law: law_str.parse()?, seed, truncation })
        };
        Ok(Self { n, data, provenance })
    }
}

/// Read-only principal minor of a [`WignerMatrix`]; local index `i` maps to
/// parent index `parent_index(i)`.
#[derive(Debug, Clone)]
pub struct MinorView<'a> {
    parent: &'a WignerMatrix,
    kept: Vec<usize>,
}

impl<'a> MinorView<'a> {
    pub fn dim(&self) -> usize {
        self.kept.len()
    }

    pub fn parent(&self) -> &'a WignerMatrix {
        self.parent
    }

    pub fn parent_index(&self, i: usize) -> usize {
        self.kept[i]
    }

    pub fn kept(&self) -> &[usize] {
        &self.kept
    }

    pub fn get(&self, i: usize, k: usize) -> f64 {
        self.parent.get(self.kept[i], self.kept[k])
    }

    /// Deletes further rows/columns, given in parent coordinates.
    pub fn minor(&self, deleted: &[usize]) -> Result<MinorView<'a>, EnsembleError> {
        for &d in deleted {
            if !self.kept.contains(&d) {
                return Err(EnsembleError::IndexOutOfRange { index: d, n: self.parent.n });
            }
        }
        let kept = self.kept.iter().copied().filter(|i| !deleted.contains(i)).collect();
        Ok(MinorView { parent: self.parent, kept })
    }

    /// Copies the minor into its own dense matrix. Returns `None` when every
    /// index was deleted.
    pub fn to_matrix(&self) -> Option<WignerMatrix> {
        let m = self.dim();
        if m == 0 {
            return None;
        }
        let mut data = Vec::with_capacity(m * m);
        for &a in &self.kept {
            let row = self.parent.row(a);
            data.extend(self.kept.iter().map(|&b| row[b]));
        }
        Some(WignerMatrix { n: m, data, provenance: None })
    }
}
