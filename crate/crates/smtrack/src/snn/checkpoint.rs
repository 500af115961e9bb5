//! Weight checkpoint container: a flat JSON map from layer-path strings to
//! shape-tagged arrays. Values are stored as f64 (f32 tensors upcast
//! exactly) and serialized with shortest-round-trip formatting, so
//! save/load is lossless. See README for the layout.

use crate::error::{Error, Result};
use ndarray::{Array1, Array2, Array4, ArrayD, IxDyn};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const CHECKPOINT_FORMAT: &str = "smtrack-weights-v1";

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TensorEntry {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Checkpoint {
    pub format: String,
    pub tensors: BTreeMap<String, TensorEntry>,
}

impl Default for Checkpoint {
    fn default() -> Self {
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_string(),
            tensors: BTreeMap::new(),
        }
    }
}

impl Checkpoint {
    fn put_entry(&mut self, path: &str, shape: Vec<usize>, data: Vec<f64>) {
        self.tensors
            .insert(path.to_string(), TensorEntry { shape, data });
    }

    fn entry(&self, path: &str) -> Result<&TensorEntry> {
        self.tensors
            .get(path)
            .ok_or_else(|| Error::Checkpoint(format!("missing tensor '{path}'")))
    }

    fn get_f64_dyn(&self, path: &str) -> Result<ArrayD<f64>> {
        let e = self.entry(path)?;
        ArrayD::from_shape_vec(IxDyn(&e.shape), e.data.clone())
            .map_err(|err| Error::Checkpoint(format!("tensor '{path}': {err}")))
    }

    pub fn put1(&mut self, path: &str, a: &Array1<f32>) {
        self.put_entry(path, a.shape().to_vec(), a.iter().map(|&v| v as f64).collect());
    }

    pub fn put4(&mut self, path: &str, a: &Array4<f32>) {
        self.put_entry(path, a.shape().to_vec(), a.iter().map(|&v| v as f64).collect());
    }

    pub fn put1d(&mut self, path: &str, a: &Array1<f64>) {
        self.put_entry(path, a.shape().to_vec(), a.iter().copied().collect());
    }

    pub fn put2d(&mut self, path: &str, a: &Array2<f64>) {
        self.put_entry(path, a.shape().to_vec(), a.iter().copied().collect());
    }

    pub fn get1(&self, path: &str) -> Result<Array1<f32>> {
        self.get_f64_dyn(path)?
            .mapv(|v| v as f32)
            .into_dimensionality()
            .map_err(|e| Error::Checkpoint(format!("tensor '{path}': {e}")))
    }

    pub fn get4(&self, path: &str) -> Result<Array4<f32>> {
        self.get_f64_dyn(path)?
            .mapv(|v| v as f32)
            .into_dimensionality()
            .map_err(|e| Error::Checkpoint(format!("tensor '{path}': {e}")))
    }

    pub fn get1d(&self, path: &str) -> Result<Array1<f64>> {
        self.get_f64_dyn(path)?
            .into_dimensionality()
            .map_err(|e| Error::Checkpoint(format!("tensor '{path}': {e}")))
    }

    pub fn get2d(&self, path: &str) -> Result<Array2<f64>> {
        self.get_f64_dyn(path)?
            .into_dimensionality()
            .map_err(|e| Error::Checkpoint(format!("tensor '{path}': {e}")))
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let file = std::fs::File::create(path)?;
        serde_json::to_writer(std::io::BufWriter::new(file), self)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Checkpoint> {
        let file = std::fs::File::open(path)?;
        let ck: Checkpoint = serde_json::from_reader(std::io::BufReader::new(file))?;
        if ck.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "unsupported checkpoint format '{}'",
                ck.format
            )));
        }
        Ok(ck)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn roundtrip_is_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut ck = Checkpoint::default();
        let w = Array4::from_shape_fn((2, 3, 3, 3), |_| rng.random_range(-1.0..1.0f32));
        let b = Array1::from_shape_fn(7, |_| rng.random::<f32>() * 1e-7);
        let d = Array2::from_shape_fn((4, 5), |_| rng.random_range(-1.0..1.0f64));
        ck.put4("layer.weight", &w);
        ck.put1("layer.bias", &b);
        ck.put2d("dense.weight", &d);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back.get4("layer.weight").unwrap(), w);
        assert_eq!(back.get1("layer.bias").unwrap(), b);
        assert_eq!(back.get2d("dense.weight").unwrap(), d);
        assert_eq!(back, ck);
    }

    #[test]
    fn missing_tensor_is_an_error() {
        let ck = Checkpoint::default();
        assert!(ck.get1("nope").is_err());
    }
}

