use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};
use crate::tensor::{l2_norm, Matrix};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Architecture {
    #[default]
    Gcn,
    Mlp,
}

impl std::str::FromStr for Architecture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gcn" => Ok(Architecture::Gcn),
            "mlp" => Ok(Architecture::Mlp),
            other => Err(Error::InvalidParameter(format!("unknown architecture {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    GcnConv,
    Dense,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerShape {
    pub in_dim: usize,
    pub out_dim: usize,
    pub kind: LayerKind,
}

impl LayerShape {
    fn len(&self) -> usize {
        self.in_dim * self.out_dim + self.out_dim
    }
}

/// Flat parameter vector: per layer, the row-major `in × out` weight followed
/// by the `out` bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    layers: Vec<LayerShape>,
    values: Vec<f64>,
    init_seed: u64,
}

/// JSON header stored next to the raw little-endian parameter file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub schema_version: u32,
    pub dtype: String,
    pub byte_order: String,
    pub len: usize,
    pub layers: Vec<LayerShape>,
    pub init_seed: u64,
    #[serde(default)]
    pub metadata: serde_json::Value,
}

impl ModelParams {
    /// Glorot-uniform weights, zero biases. Layer widths are
    /// `in_dim → hidden … → num_classes` over `num_layers` layers.
    pub fn init(
        architecture: Architecture,
        in_dim: usize,
        hidden_dim: usize,
        num_classes: usize,
        num_layers: usize,
        seed: u64,
    ) -> Result<Self> {
        if num_layers == 0 || in_dim == 0 || num_classes == 0 || (num_layers > 1 && hidden_dim == 0) {
            return Err(Error::InvalidParameter("model dimensions must be positive".into()));
        }
        let kind = match architecture {
            Architecture::Gcn => LayerKind::GcnConv,
            Architecture::Mlp => LayerKind::Dense,
        };
        let layers: Vec<LayerShape> = (0..num_layers)
            .map(|l| LayerShape {
                in_dim: if l == 0 { in_dim } else { hidden_dim },
                out_dim: if l + 1 == num_layers { num_classes } else { hidden_dim },
                kind,
            })
            .collect();
        let mut rng = stream_rng(seed, Stream::Init);
        let mut values = Vec::with_capacity(layers.iter().map(LayerShape::len).sum());
        for layer in &layers {
            let limit = (6.0 / (layer.in_dim + layer.out_dim) as f64).sqrt();
            values.extend((0..layer.in_dim * layer.out_dim).map(|_| rng.random_range(-limit..limit)));
            values.extend(std::iter::repeat_n(0.0, layer.out_dim));
        }
        Ok(Self {
            layers,
            values,
            init_seed: seed,
        })
    }

    pub fn from_parts(layers: Vec<LayerShape>, values: Vec<f64>, init_seed: u64) -> Result<Self> {
        let expected: usize = layers.iter().map(LayerShape::len).sum();
        if values.len() != expected {
            return Err(Error::Shape(format!(
                "{} parameters for layers needing {expected}",
                values.len()
            )));
        }
        if layers.windows(2).any(|w| w[0].out_dim != w[1].in_dim) {
            return Err(Error::Shape("consecutive layer widths disagree".into()));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        Ok(Self {
            layers,
            values,
            init_seed,
        })
    }

    pub fn layers(&self) -> &[LayerShape] {
        &self.layers
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn init_seed(&self) -> u64 {
        self.init_seed
    }

    pub fn architecture(&self) -> Architecture {
        match self.layers.first().map(|l| l.kind) {
            Some(LayerKind::Dense) => Architecture::Mlp,
            _ => Architecture::Gcn,
        }
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.values)
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn num_classes(&self) -> usize {
        self.layers.last().map_or(0, |l| l.out_dim)
    }

    /// Offsets of each layer's weight and bias blocks in the flat vector.
    pub(crate) fn offsets(&self) -> Vec<(usize, usize)> {
        let mut at = 0;
        self.layers
            .iter()
            .map(|l| {
                let w = at;
                let b = w + l.in_dim * l.out_dim;
                at = b + l.out_dim;
                (w, b)
            })
            .collect()
    }

    pub(crate) fn layer_matrices(&self, layer: usize) -> (Matrix, Matrix) {
        let shape = self.layers[layer];
        let (w, b) = self.offsets()[layer];
        let weight = Matrix::from_vec(
            shape.in_dim,
            shape.out_dim,
            self.values[w..w + shape.in_dim * shape.out_dim].to_vec(),
        )
        .expect("layer slice matches its shape");
        let bias = Matrix::from_vec(1, shape.out_dim, self.values[b..b + shape.out_dim].to_vec())
            .expect("bias slice matches its shape");
        (weight, bias)
    }

    pub fn header(&self, metadata: serde_json::Value) -> ModelHeader {
        ModelHeader {
            schema_version: 1,
            dtype: "f64".into(),
            byte_order: "little".into(),
            len: self.values.len(),
            layers: self.layers.clone(),
            init_seed: self.init_seed,
            metadata,
        }
    }

    pub fn to_le_bytes(&self) -> Vec<u8> {
        self.values.iter().flat_map(|v| v.to_le_bytes()).collect()
    }

    pub fn from_le_bytes(header: &ModelHeader, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != header.len * 8 {
            return Err(Error::Shape(format!(
                "{} bytes for {} f64 parameters",
                bytes.len(),
                header.len
            )));
        }
        let values = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Self::from_parts(header.layers.clone(), values, header.init_seed)
    }

    /// Writes `<stem>.bin` (raw parameters) and `<stem>.json` (header).
    pub fn save(&self, dir: impl AsRef<Path>, stem: &str, metadata: serde_json::Value) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(format!("{stem}.bin")), self.to_le_bytes())?;
        std::fs::write(
            dir.join(format!("{stem}.json")),
            serde_json::to_string_pretty(&self.header(metadata))?,
        )?;
        Ok(())
    }

    pub fn load(dir: impl AsRef<Path>, stem: &str) -> Result<(Self, ModelHeader)> {
        let dir = dir.as_ref();
        let header: ModelHeader =
            serde_json::from_str(&std::fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
        let bytes = std::fs::read(dir.join(format!("{stem}.bin")))?;
        Ok((Self::from_le_bytes(&header, &bytes)?, header))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_length_matches_layers() {
        let p = ModelParams::init(Architecture::Gcn, 10, 32, 2, 2, 0).unwrap();
        assert_eq!(p.len(), 10 * 32 + 32 + 32 * 2 + 2);
        assert_eq!(p.layers().len(), 2);
        assert_eq!(p.num_classes(), 2);
        let single = ModelParams::init(Architecture::Mlp, 4, 0, 3, 1, 0).unwrap();
        assert_eq!(single.len(), 4 * 3 + 3);
        assert_eq!(single.architecture(), Architecture::Mlp);
    }

    #[test]
    fn glorot_range_and_zero_bias() {
        let p = ModelParams::init(Architecture::Gcn, 10, 32, 2, 2, 3).unwrap();
        let limit = (6.0f64 / 42.0).sqrt();
        let (w, b) = p.layer_matrices(0);
        assert!(w.data().iter().all(|x| x.abs() <= limit));
        assert!(b.data().iter().all(|&x| x == 0.0));
        assert_eq!(p, ModelParams::init(Architecture::Gcn, 10, 32, 2, 2, 3).unwrap());
    }

    #[test]
    fn byte_round_trip_and_file_format() {
        let p = ModelParams::init(Architecture::Gcn, 3, 4, 2, 2, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        p.save(dir.path(), "model", serde_json::json!({"variant": "non_dp"})).unwrap();
        let raw = std::fs::read(dir.path().join("model.bin")).unwrap();
        assert_eq!(raw.len(), p.len() * 8);
        assert_eq!(&raw[..8], &p.values()[0].to_le_bytes());
        let (back, header) = ModelParams::load(dir.path(), "model").unwrap();
        assert_eq!(back, p);
        assert_eq!(header.metadata["variant"], "non_dp");
    }

    #[test]
    fn rejects_wrong_length() {
        let layers = vec![LayerShape {
            in_dim: 2,
            out_dim: 2,
            kind: LayerKind::Dense,
        }];
        assert!(ModelParams::from_parts(layers, vec![0.0; 5], 0).is_err());
    }
}
