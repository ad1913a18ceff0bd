//! Labeled per-layer embedding datasets and their on-disk containers.

mod format;
mod labels;
mod split;

pub use format::{
    read_dataset, read_jsonl, read_speb, write_dataset, write_jsonl, write_speb, SPEB_MAGIC, SPEB_VERSION,
};
pub use labels::{age_schema, bin_age, AgeBin, AGE_OLD_ABOVE, AGE_YOUNG_BELOW};
pub use split::{split_dataset, subsample, SplitSpec};

use std::collections::HashSet;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed container at byte {offset}: {message}")]
    Format { offset: u64, message: String },
    #[error("truncated record stream at byte {offset}: {message}")]
    Truncated { offset: u64, message: String },
    #[error("record at byte {offset} has label {label} but only {num_classes} classes are declared")]
    LabelRange { offset: u64, label: u64, num_classes: usize },
    #[error("record at byte {offset}: {message}")]
    Dimension { offset: u64, message: String },
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("{part} split would be empty ({n} records)")]
    EmptySplit { part: &'static str, n: usize },
    #[error("cannot sample {requested} records from {available}")]
    SampleTooLarge { requested: usize, available: usize },
    #[error("age must be non-negative, got {0}")]
    NegativeAge(i64),
}

/// Ordered class names; the class index is the position in the list.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelSchema {
    class_names: Vec<String>,
}

impl LabelSchema {
    pub fn new<S: Into<String>>(names: impl IntoIterator<Item = S>) -> Result<Self, StoreError> {
        let class_names: Vec<String> = names.into_iter().map(Into::into).collect();
        if class_names.len() < 2 {
            return Err(StoreError::Invalid(format!(
                "a label schema needs at least 2 classes, got {}",
                class_names.len()
            )));
        }
        let mut seen = HashSet::new();
        for name in &class_names {
            if name.is_empty() {
                return Err(StoreError::Invalid("empty class name".into()));
            }
            if !seen.insert(name.as_str()) {
                return Err(StoreError::Invalid(format!("duplicate class name {name:?}")));
            }
        }
        Ok(Self { class_names })
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.class_names.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.class_names.iter().position(|n| n == name)
    }
}

/// One labeled example: `num_layers` vectors of `dim` components stored
/// layer-major in a single buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingRecord {
    pub id: String,
    pub label: usize,
    values: Vec<f32>,
    dim: usize,
}

impl EmbeddingRecord {
    pub fn new(id: impl Into<String>, label: usize, layers: Vec<Vec<f32>>) -> Result<Self, StoreError> {
        let id = id.into();
        let dim = layers.first().map_or(0, Vec::len);
        if layers.is_empty() || dim == 0 {
            return Err(StoreError::Invalid(format!("record {id:?} has no layer data")));
        }
        if let Some(bad) = layers.iter().position(|l| l.len() != dim) {
            return Err(StoreError::Invalid(format!(
                "record {id:?}: layer {} has dimension {} but layer 1 has {dim}",
                bad + 1,
                layers[bad].len()
            )));
        }
        Self::from_flat(id, label, layers.concat(), dim)
    }

    /// Builds a record from a layer-major buffer of `num_layers * dim` floats.
    pub fn from_flat(id: impl Into<String>, label: usize, values: Vec<f32>, dim: usize) -> Result<Self, StoreError> {
        let id = id.into();
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(StoreError::Invalid(format!(
                "record {id:?}: {} values do not split into layers of dimension {dim}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(StoreError::Invalid(format!("record {id:?} has a non-finite component")));
        }
        Ok(Self { id, label, values, dim })
    }

    pub fn num_layers(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Vector of the 0-based `layer`.
    pub fn layer(&self, layer: usize) -> &[f32] {
        &self.values[layer * self.dim..(layer + 1) * self.dim]
    }

    pub fn layers(&self) -> impl Iterator<Item = &[f32]> {
        self.values.chunks_exact(self.dim)
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingDataset {
    schema: LabelSchema,
    num_layers: usize,
    dim: usize,
    records: Vec<EmbeddingRecord>,
}

impl EmbeddingDataset {
    pub fn empty(schema: LabelSchema, num_layers: usize, dim: usize) -> Result<Self, StoreError> {
        if num_layers == 0 || dim == 0 {
            return Err(StoreError::Invalid(format!(
                "layer count and dimension must be positive (got L={num_layers}, d={dim})"
            )));
        }
        Ok(Self { schema, num_layers, dim, records: Vec::new() })
    }

    pub fn new(
        schema: LabelSchema,
        num_layers: usize,
        dim: usize,
        records: Vec<EmbeddingRecord>,
    ) -> Result<Self, StoreError> {
        let mut dataset = Self::empty(schema, num_layers, dim)?;
        dataset.records.reserve(records.len());
        for record in records {
            dataset.push(record)?;
        }
        Ok(dataset)
    }

    pub fn push(&mut self, record: EmbeddingRecord) -> Result<(), StoreError> {
        if record.dim != self.dim || record.num_layers() != self.num_layers {
            return Err(StoreError::Invalid(format!(
                "record {:?} has shape L={} d={}, dataset expects L={} d={}",
                record.id,
                record.num_layers(),
                record.dim,
                self.num_layers,
                self.dim
            )));
        }
        if record.label >= self.schema.num_classes() {
            return Err(StoreError::Invalid(format!(
                "record {:?} has label {} but K={}",
                record.id,
                record.label,
                self.schema.num_classes()
            )));
        }
        self.records.push(record);
        Ok(())
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn num_classes(&self) -> usize {
        self.schema.num_classes()
    }

    pub fn num_layers(&self) -> usize {
        self.num_layers
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn records(&self) -> &[EmbeddingRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of records per class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for r in &self.records {
            counts[r.label] += 1;
        }
        counts
    }

    /// New dataset with the same shape holding the records at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        Self {
            schema: self.schema.clone(),
            num_layers: self.num_layers,
            dim: self.dim,
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
        }
    }

    pub(crate) fn with_records(&self, records: Vec<EmbeddingRecord>) -> Self {
        Self { schema: self.schema.clone(), num_layers: self.num_layers, dim: self.dim, records }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schema_rejects_duplicates_and_singletons() {
        assert!(LabelSchema::new(["a"]).is_err());
        assert!(LabelSchema::new(["a", "a"]).is_err());
        assert!(LabelSchema::new(["a", ""]).is_err());
        let s = LabelSchema::new(["Man", "Woman"]).unwrap();
        assert_eq!(s.index_of("Woman"), Some(1));
    }

    #[test]
    fn record_layers_are_layer_major() {
        let r = EmbeddingRecord::new("x", 0, vec![vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        assert_eq!(r.num_layers(), 2);
        assert_eq!(r.layer(1), &[3.0, 4.0]);
        assert!(EmbeddingRecord::new("x", 0, vec![vec![1.0], vec![3.0, 4.0]]).is_err());
        assert!(EmbeddingRecord::new("x", 0, vec![vec![f32::NAN]]).is_err());
    }

    #[test]
    fn dataset_checks_shape_and_label() {
        let schema = LabelSchema::new(["a", "b"]).unwrap();
        let mut ds = EmbeddingDataset::empty(schema, 1, 2).unwrap();
        assert!(ds.push(EmbeddingRecord::new("r", 2, vec![vec![0.0, 0.0]]).unwrap()).is_err());
        assert!(ds.push(EmbeddingRecord::new("r", 1, vec![vec![0.0; 3]]).unwrap()).is_err());
        ds.push(EmbeddingRecord::new("r", 1, vec![vec![0.0, 0.0]]).unwrap()).unwrap();
        assert_eq!(ds.class_counts(), vec![0, 1]);
    }
}
