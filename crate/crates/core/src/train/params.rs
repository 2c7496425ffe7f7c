//! Flat model parameter vector with a named group index, plus binary
//! checkpoint serialization.
//!
//! Checkpoint layout (little-endian throughout):
//!
//! ```text
//! magic   b"MPAR"
//! version u16          (currently 1)
//! count   u64          number of f64 parameter values
//! values  count * f64
//! ilen    u32          byte length of the index text
//! index   ilen bytes   UTF-8 lines "name offset len"
//! ```
//!
//! The index must tile `0..count` contiguously and in order; loading
//! verifies this, so a checkpoint round-trips bit-exactly or fails with a
//! byte-offset error.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::net::NetConfig;

const MAGIC: &[u8; 4] = b"MPAR";
const VERSION: u16 = 1;

/// All parameters of one model as a flat `f64` vector plus an ordered
/// `(name, offset, len)` group index.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelParams {
    values: Vec<f64>,
    index: Vec<(String, usize, usize)>,
}

impl ModelParams {
    /// Deterministic initialization for the given architecture.
    ///
    /// Frechet-mean weight groups (convolutions, merges, templates) draw
    /// each raw entry from U[0.5, 1.5]; the final linear map draws from
    /// U[-1/sqrt(f), 1/sqrt(f)] with `f` the feature length, and its bias
    /// starts at zero. Draws happen in layout order, so a given seed always
    /// produces the same vector.
    pub fn init(config: &NetConfig, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let fc_bound = 1.0 / (config.feature_len() as f64).sqrt();
        let mut values = Vec::with_capacity(config.param_count());
        let mut index = Vec::new();
        for (name, len) in config.param_layout() {
            let offset = values.len();
            match name.as_str() {
                "head.fc.weight" => {
                    for _ in 0..len {
                        values.push(rng.random_range(-fc_bound..fc_bound));
                    }
                }
                "head.fc.bias" => values.extend(std::iter::repeat(0.0).take(len)),
                _ => {
                    for _ in 0..len {
                        values.push(rng.random_range(0.5..1.5));
                    }
                }
            }
            index.push((name, offset, len));
        }
        ModelParams { values, index }
    }

    /// Wraps an existing flat vector, validating its length against the
    /// architecture's layout.
    pub fn from_values(config: &NetConfig, values: Vec<f64>) -> Result<Self> {
        let layout = config.param_layout();
        let total: usize = layout.iter().map(|(_, l)| l).sum();
        if values.len() != total {
            return Err(Error::domain(format!(
                "expected {total} parameters for this architecture, got {}",
                values.len()
            )));
        }
        let mut index = Vec::with_capacity(layout.len());
        let mut offset = 0;
        for (name, len) in layout {
            index.push((name, offset, len));
            offset += len;
        }
        Ok(ModelParams { values, index })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Ordered `(name, offset, len)` triples of the parameter groups.
    pub fn index(&self) -> &[(String, usize, usize)] {
        &self.index
    }

    /// Values of one named group.
    pub fn group(&self, name: &str) -> Option<&[f64]> {
        self.index
            .iter()
            .find(|(n, _, _)| n == name)
            .map(|&(_, off, len)| &self.values[off..off + len])
    }

    /// True for groups holding raw Frechet-mean weights (everything except
    /// the final linear map), which the optimizer keeps away from zero.
    pub fn is_weight_group(name: &str) -> bool {
        !name.starts_with("head.fc.")
    }

    /// True when this parameter vector was laid out for `config`.
    pub fn layout_matches(&self, config: &NetConfig) -> bool {
        let layout = config.param_layout();
        self.index.len() == layout.len()
            && self
                .index
                .iter()
                .zip(&layout)
                .all(|((n, _, l), (ln, ll))| n == ln && l == ll)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        Self::read_from(&mut r)
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.values.len() as u64).to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        let mut text = String::new();
        for (name, off, len) in &self.index {
            text.push_str(&format!("{name} {off} {len}\n"));
        }
        w.write_all(&(text.len() as u32).to_le_bytes())?;
        w.write_all(text.as_bytes())?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        read_exact_at(r, &mut magic, 0)?;
        if &magic != MAGIC {
            return Err(Error::format(0, "bad magic, not a parameter checkpoint"));
        }
        let mut v2 = [0u8; 2];
        read_exact_at(r, &mut v2, 4)?;
        let version = u16::from_le_bytes(v2);
        if version != VERSION {
            return Err(Error::format(4, format!("unsupported version {version}")));
        }
        let mut c8 = [0u8; 8];
        read_exact_at(r, &mut c8, 6)?;
        let count = u64::from_le_bytes(c8);
        if count > (1 << 32) {
            return Err(Error::format(6, format!("implausible parameter count {count}")));
        }
        let mut values = Vec::with_capacity(count as usize);
        let mut f8 = [0u8; 8];
        for i in 0..count {
            read_exact_at(r, &mut f8, 14 + 8 * i)?;
            values.push(f64::from_le_bytes(f8));
        }
        let index_off = 14 + 8 * count;
        let mut l4 = [0u8; 4];
        read_exact_at(r, &mut l4, index_off)?;
        let ilen = u32::from_le_bytes(l4) as usize;
        let mut raw = vec![0u8; ilen];
        read_exact_at(r, &mut raw, index_off + 4)?;
        let text = String::from_utf8(raw)
            .map_err(|_| Error::format(index_off + 4, "index is not valid UTF-8"))?;
        let mut index = Vec::new();
        let mut expect_offset = 0usize;
        for line in text.lines() {
            let mut parts = line.split_whitespace();
            let (name, off, len) = match (parts.next(), parts.next(), parts.next(), parts.next())
            {
                (Some(n), Some(o), Some(l), None) => {
                    let off: usize = o.parse().map_err(|_| {
                        Error::format(index_off + 4, format!("bad offset in index line '{line}'"))
                    })?;
                    let len: usize = l.parse().map_err(|_| {
                        Error::format(index_off + 4, format!("bad length in index line '{line}'"))
                    })?;
                    (n.to_string(), off, len)
                }
                _ => {
                    return Err(Error::format(
                        index_off + 4,
                        format!("malformed index line '{line}'"),
                    ))
                }
            };
            if off != expect_offset || len == 0 {
                return Err(Error::format(
                    index_off + 4,
                    format!("index group '{name}' does not tile the value array"),
                ));
            }
            expect_offset = off + len;
            index.push((name, off, len));
        }
        if expect_offset != count as usize {
            return Err(Error::format(
                index_off + 4,
                format!("index covers {expect_offset} values, file holds {count}"),
            ));
        }
        Ok(ModelParams { values, index })
    }
}

fn read_exact_at<R: Read>(r: &mut R, buf: &mut [u8], offset: u64) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        Error::format(offset, format!("truncated or unreadable at byte {offset}: {e}"))
    })
}
