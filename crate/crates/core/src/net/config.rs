//! Architecture configuration and the derived parameter layout.
//!
//! The plain-text schema is line-oriented `key = value` with `#` comments:
//!
//! ```text
//! manifold  = spd | sphere
//! dim       = <point dimension>
//! blocks    = c_in,c_mid,c_out; c_in,c_mid,c_out; ...
//! kernel    = <taps per convolution>          (default 3)
//! head      = invariant | tangent              (default invariant)
//! templates = <frechet-mean templates, invariant head only> (default 3)
//! classes   = <number of classes>              (default 2)
//! ```
//!
//! Residual block `b` uses dilation `2^b` in both of its convolutions, and
//! consecutive blocks must chain: each block's `c_in` equals the previous
//! block's `c_out`. An empty `blocks` value (allowed as `blocks =`) means
//! the head reads the input sequence directly.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::manifold::ManifoldKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Distances from last-timestep values to learned Frechet-mean
    /// templates, then a linear map. Isometry-invariant.
    Invariant,
    /// Tangent coordinates of last-timestep values at a fixed base point
    /// (identity matrix or first basis vector), then a linear map.
    Tangent,
}

impl HeadKind {
    pub fn name(self) -> &'static str {
        match self {
            HeadKind::Invariant => "invariant",
            HeadKind::Tangent => "tangent",
        }
    }
}

/// Channel counts of one residual block: `c_in` into the first convolution,
/// `c_mid` between the two convolutions, `c_out` out of the block (the
/// residual merge emits `c_out` channels from `c_in + c_out` inputs).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BlockSpec {
    pub c_in: usize,
    pub c_mid: usize,
    pub c_out: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetConfig {
    pub kind: ManifoldKind,
    pub dim: usize,
    pub blocks: Vec<BlockSpec>,
    pub kernel: usize,
    pub head: HeadKind,
    pub templates: usize,
    pub classes: usize,
}

impl NetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::domain("dim must be at least 1"));
        }
        if self.kind == ManifoldKind::Sphere && self.dim < 2 {
            return Err(Error::domain("sphere networks need dim >= 2"));
        }
        if self.kernel == 0 {
            return Err(Error::domain("kernel must be at least 1"));
        }
        if self.classes < 2 {
            return Err(Error::domain("classes must be at least 2"));
        }
        if self.head == HeadKind::Invariant && self.templates == 0 {
            return Err(Error::domain("invariant head needs at least one template"));
        }
        for (i, b) in self.blocks.iter().enumerate() {
            if b.c_in == 0 || b.c_mid == 0 || b.c_out == 0 {
                return Err(Error::domain(format!("block {i} has a zero channel count")));
            }
            if i > 0 && b.c_in != self.blocks[i - 1].c_out {
                return Err(Error::domain(format!(
                    "block {i} expects {} input channels but block {} emits {}",
                    b.c_in,
                    i - 1,
                    self.blocks[i - 1].c_out
                )));
            }
        }
        Ok(())
    }

    /// Channels the input sequence must have.
    pub fn input_channels(&self) -> usize {
        self.blocks.first().map_or(1, |b| b.c_in)
    }

    /// Channels coming out of the block stack.
    pub fn output_channels(&self) -> usize {
        self.blocks.last().map_or(self.input_channels(), |b| b.c_out)
    }

    /// Dilation of block `b`: doubles per block starting at 1.
    pub fn dilation(&self, block: usize) -> usize {
        1usize << block.min(40)
    }

    /// Dimension of the flattened tangent coordinates of one point.
    pub fn tangent_len(&self) -> usize {
        match self.kind {
            ManifoldKind::Spd => self.dim * (self.dim + 1) / 2,
            ManifoldKind::Sphere => self.dim,
        }
    }

    /// Length of the head's feature vector.
    pub fn feature_len(&self) -> usize {
        let c = self.output_channels();
        match self.head {
            HeadKind::Invariant => c * self.templates,
            HeadKind::Tangent => c * self.tangent_len(),
        }
    }

    /// Ordered parameter groups as `(name, length)` pairs: convolution and
    /// merge weights block by block, then head parameters. This order is
    /// the layout of the flat parameter vector.
    pub fn param_layout(&self) -> Vec<(String, usize)> {
        let mut layout = Vec::new();
        for (b, spec) in self.blocks.iter().enumerate() {
            for o in 0..spec.c_mid {
                layout.push((format!("block{b}.conv1.out{o}"), self.kernel * spec.c_in));
            }
            for o in 0..spec.c_out {
                layout.push((format!("block{b}.conv2.out{o}"), self.kernel * spec.c_mid));
            }
            for o in 0..spec.c_out {
                layout.push((format!("block{b}.merge.out{o}"), spec.c_in + spec.c_out));
            }
        }
        if self.head == HeadKind::Invariant {
            for j in 0..self.templates {
                layout.push((format!("head.template{j}"), self.output_channels()));
            }
        }
        layout.push(("head.fc.weight".to_string(), self.classes * self.feature_len()));
        layout.push(("head.fc.bias".to_string(), self.classes));
        layout
    }

    pub fn param_count(&self) -> usize {
        self.param_layout().iter().map(|(_, l)| l).sum()
    }

    /// Parses the full text schema. Unknown keys are rejected.
    pub fn parse(text: &str) -> Result<Self> {
        let map = parse_key_values(text)?;
        for key in map.keys() {
            if !matches!(
                key.as_str(),
                "manifold" | "dim" | "blocks" | "kernel" | "head" | "templates" | "classes"
            ) {
                return Err(Error::domain(format!("unknown architecture key '{key}'")));
            }
        }
        Self::from_map(&map)
    }

    /// Builds a config from a key-value map, ignoring unrelated keys.
    /// `manifold` and `dim` are required; the rest have defaults.
    pub fn from_map(map: &BTreeMap<String, String>) -> Result<Self> {
        let kind = match map.get("manifold").map(String::as_str) {
            Some("spd") => ManifoldKind::Spd,
            Some("sphere") => ManifoldKind::Sphere,
            Some(other) => {
                return Err(Error::domain(format!(
                    "manifold must be 'spd' or 'sphere', got '{other}'"
                )))
            }
            None => return Err(Error::domain("missing required key 'manifold'")),
        };
        let dim = parse_usize(map, "dim")?
            .ok_or_else(|| Error::domain("missing required key 'dim'"))?;
        let blocks = match map.get("blocks") {
            Some(text) => parse_blocks(text)?,
            None => vec![BlockSpec { c_in: 1, c_mid: 3, c_out: 3 }],
        };
        let config = NetConfig {
            kind,
            dim,
            blocks,
            kernel: parse_usize(map, "kernel")?.unwrap_or(3),
            head: match map.get("head").map(String::as_str) {
                Some("invariant") | None => HeadKind::Invariant,
                Some("tangent") => HeadKind::Tangent,
                Some(other) => {
                    return Err(Error::domain(format!(
                        "head must be 'invariant' or 'tangent', got '{other}'"
                    )))
                }
            },
            templates: parse_usize(map, "templates")?.unwrap_or(3),
            classes: parse_usize(map, "classes")?.unwrap_or(2),
        };
        config.validate()?;
        Ok(config)
    }

    /// Text form that `parse` accepts.
    pub fn to_text(&self) -> String {
        let blocks = self
            .blocks
            .iter()
            .map(|b| format!("{},{},{}", b.c_in, b.c_mid, b.c_out))
            .collect::<Vec<_>>()
            .join("; ");
        format!(
            "manifold = {}\ndim = {}\nblocks = {}\nkernel = {}\nhead = {}\ntemplates = {}\nclasses = {}\n",
            self.kind.name(),
            self.dim,
            blocks,
            self.kernel,
            self.head.name(),
            self.templates,
            self.classes
        )
    }
}

/// Shared line-oriented `key = value` parser used by configs.
pub fn parse_key_values(text: &str) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (lineno, raw_line) in text.lines().enumerate() {
        let line = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::domain(format!(
                "line {}: expected 'key = value', got '{line}'",
                lineno + 1
            )));
        };
        let key = key.trim().to_string();
        if key.is_empty() {
            return Err(Error::domain(format!("line {}: empty key", lineno + 1)));
        }
        if map.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(Error::domain(format!("line {}: duplicate key '{key}'", lineno + 1)));
        }
    }
    Ok(map)
}

fn parse_usize(map: &BTreeMap<String, String>, key: &str) -> Result<Option<usize>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::domain(format!("key '{key}' must be a non-negative integer, got '{v}'"))),
    }
}

fn parse_blocks(text: &str) -> Result<Vec<BlockSpec>> {
    let text = text.trim();
    if text.is_empty() {
        return Ok(Vec::new());
    }
    let mut blocks = Vec::new();
    for (i, part) in text.split(';').enumerate() {
        let nums: Vec<&str> = part.split(',').map(str::trim).collect();
        if nums.len() != 3 {
            return Err(Error::domain(format!(
                "block {i} must be three comma-separated channel counts, got '{part}'"
            )));
        }
        let mut vals = [0usize; 3];
        for (slot, n) in vals.iter_mut().zip(&nums) {
            *slot = n
                .parse()
                .map_err(|_| Error::domain(format!("block {i} has a non-integer channel '{n}'")))?;
        }
        blocks.push(BlockSpec { c_in: vals[0], c_mid: vals[1], c_out: vals[2] });
    }
    Ok(blocks)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_config() -> NetConfig {
        NetConfig {
            kind: ManifoldKind::Spd,
            dim: 3,
            blocks: vec![
                BlockSpec { c_in: 1, c_mid: 3, c_out: 3 },
                BlockSpec { c_in: 3, c_mid: 3, c_out: 5 },
            ],
            kernel: 3,
            head: HeadKind::Invariant,
            templates: 4,
            classes: 2,
        }
    }

    #[test]
    fn text_roundtrip() {
        let c = sample_config();
        let parsed = NetConfig::parse(&c.to_text()).unwrap();
        assert_eq!(parsed, c);
    }

    #[test]
    fn parse_applies_defaults() {
        let c = NetConfig::parse("manifold = sphere\ndim = 8\n").unwrap();
        assert_eq!(c.kind, ManifoldKind::Sphere);
        assert_eq!(c.kernel, 3);
        assert_eq!(c.head, HeadKind::Invariant);
        assert_eq!(c.templates, 3);
        assert_eq!(c.classes, 2);
        assert_eq!(c.blocks.len(), 1);
    }

    #[test]
    fn parse_rejects_bad_input() {
        assert!(NetConfig::parse("dim = 3").is_err());
        assert!(NetConfig::parse("manifold = torus\ndim = 3").is_err());
        assert!(NetConfig::parse("manifold = spd\ndim = 3\nbogus = 1").is_err());
        assert!(NetConfig::parse("manifold = spd\ndim = 3\nblocks = 1,2").is_err());
        // Mismatched channel chaining.
        assert!(NetConfig::parse("manifold = spd\ndim = 3\nblocks = 1,2,2; 3,3,3").is_err());
    }

    #[test]
    fn dilation_doubles_per_block() {
        let c = sample_config();
        assert_eq!(c.dilation(0), 1);
        assert_eq!(c.dilation(1), 2);
        assert_eq!(c.dilation(2), 4);
    }

    #[test]
    fn layout_covers_every_group_in_order() {
        let c = sample_config();
        let layout = c.param_layout();
        let names: Vec<&str> = layout.iter().map(|(n, _)| n.as_str()).collect();
        assert_eq!(names[0], "block0.conv1.out0");
        assert!(names.contains(&"block1.merge.out4"));
        assert!(names.contains(&"head.template3"));
        assert_eq!(names.last().unwrap(), &"head.fc.bias");
        // conv1 of block0 takes kernel * c_in = 3 weights per output channel.
        assert_eq!(layout[0].1, 3);
        // Feature length: 5 output channels x 4 templates.
        assert_eq!(c.feature_len(), 20);
        let total: usize = layout.iter().map(|(_, l)| l).sum();
        assert_eq!(total, c.param_count());
    }

    #[test]
    fn tangent_feature_length_uses_triangle_count() {
        let mut c = sample_config();
        c.head = HeadKind::Tangent;
        // dim 3 spd tangents flatten to 6 coordinates, 5 channels.
        assert_eq!(c.feature_len(), 30);
    }

    #[test]
    fn empty_blocks_mean_headless_stack_is_identity() {
        let c = NetConfig::parse("manifold = spd\ndim = 3\nblocks =\n").unwrap();
        assert!(c.blocks.is_empty());
        assert_eq!(c.input_channels(), 1);
        assert_eq!(c.output_channels(), 1);
    }
}
