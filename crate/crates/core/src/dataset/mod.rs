//! Embedding datasets: feature matrix, per-row game/genre/style metadata and
//! optional game-state targets, with eager validation on load.

pub mod gemb;
pub mod metadata;

use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

pub use metadata::{SampleMetadata, StyleLabel};

use crate::error::{dim_mismatch, Error, Result};
use crate::matrix::FeatureMatrix;

/// Game-state variables aligned row-wise with a feature matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct TargetTable {
    names: Vec<String>,
    values: FeatureMatrix,
}

impl TargetTable {
    pub fn new(names: Vec<String>, values: FeatureMatrix) -> Result<Self> {
        if names.len() != values.n_cols() {
            return Err(dim_mismatch(format!("{} target names for {} target columns", names.len(), values.n_cols())));
        }
        Ok(Self { names, values })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &FeatureMatrix {
        &self.values
    }

    pub fn n_rows(&self) -> usize {
        self.values.n_rows()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self { names: self.names.clone(), values: self.values.select_rows(rows) }
    }
}

/// Locations of a target table: the `GEMB` values file and its names CSV.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetPaths {
    pub values: PathBuf,
    pub names: PathBuf,
}

impl TargetPaths {
    /// Names file next to the values file: `targets.gemb` → `targets.csv`.
    pub fn beside(values: impl Into<PathBuf>) -> Self {
        let values = values.into();
        let names = values.with_extension("csv");
        Self { values, names }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingDataset {
    features: FeatureMatrix,
    metadata: Vec<SampleMetadata>,
    targets: Option<TargetTable>,
}

impl EmbeddingDataset {
    pub fn new(features: FeatureMatrix, metadata: Vec<SampleMetadata>, targets: Option<TargetTable>) -> Result<Self> {
        if metadata.len() != features.n_rows() {
            return Err(dim_mismatch(format!(
                "metadata has {} rows, features have {}",
                metadata.len(),
                features.n_rows()
            )));
        }
        if let Some(t) = &targets {
            if t.n_rows() != features.n_rows() {
                return Err(dim_mismatch(format!(
                    "targets have {} rows, features have {}",
                    t.n_rows(),
                    features.n_rows()
                )));
            }
        }
        validate_metadata(&metadata)?;
        Ok(Self { features, metadata, targets })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn metadata(&self) -> &[SampleMetadata] {
        &self.metadata
    }

    pub fn targets(&self) -> Option<&TargetTable> {
        self.targets.as_ref()
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    /// Distinct genres, sorted.
    pub fn genres(&self) -> Vec<String> {
        let set: BTreeSet<&str> = self.metadata.iter().map(|m| m.genre_id.as_str()).collect();
        set.into_iter().map(str::to_owned).collect()
    }

    pub fn game_ids(&self) -> Vec<&str> {
        self.metadata.iter().map(|m| m.game_id.as_str()).collect()
    }

    pub fn style_labels(&self) -> Vec<StyleLabel> {
        self.metadata.iter().map(|m| m.style_label).collect()
    }

    /// Rows whose genre matches, in original order.
    pub fn filter_by_genre(&self, genre_id: &str) -> Result<Self> {
        let rows: Vec<usize> =
            self.metadata.iter().enumerate().filter(|(_, m)| m.genre_id == genre_id).map(|(i, _)| i).collect();
        if rows.is_empty() {
            return Err(Error::UnknownGenre(genre_id.to_owned()));
        }
        Ok(self.select_rows(&rows))
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            features: self.features.select_rows(rows),
            metadata: rows.iter().map(|&i| self.metadata[i].clone()).collect(),
            targets: self.targets.as_ref().map(|t| t.select_rows(rows)),
        }
    }

    /// Same rows and metadata with a different feature matrix (e.g. an
    /// embedding derived from these features).
    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Self::new(features, self.metadata.clone(), self.targets.clone())
    }
}

/// Checks that every game maps to one genre and one style label.
pub fn validate_metadata(metadata: &[SampleMetadata]) -> Result<()> {
    let mut seen: BTreeMap<&str, (&str, StyleLabel)> = BTreeMap::new();
    for m in metadata {
        if m.game_id.is_empty() || m.genre_id.is_empty() {
            return Err(Error::InvalidConfig("game_id and genre_id must be non-empty".into()));
        }
        match seen.entry(&m.game_id) {
            Entry::Vacant(e) => {
                e.insert((&m.genre_id, m.style_label));
            }
            Entry::Occupied(e) => {
                let (genre, style) = *e.get();
                if genre != m.genre_id {
                    return Err(Error::InconsistentGameMapping {
                        game: m.game_id.clone(),
                        first: format!("genre `{genre}`"),
                        second: format!("genre `{}`", m.genre_id),
                    });
                }
                if style != m.style_label {
                    return Err(Error::InconsistentGameMapping {
                        game: m.game_id.clone(),
                        first: format!("style `{style}`"),
                        second: format!("style `{}`", m.style_label),
                    });
                }
            }
        }
    }
    Ok(())
}

/// Dense cluster ids for string labels, numbered in sorted label order so the
/// assignment does not depend on row order.
pub fn cluster_ids<S: AsRef<str>>(labels: &[S]) -> (Vec<usize>, Vec<String>) {
    let names: Vec<String> =
        labels.iter().map(|s| s.as_ref()).collect::<BTreeSet<_>>().into_iter().map(str::to_owned).collect();
    let ids =
        labels.iter().map(|s| names.binary_search_by(|n| n.as_str().cmp(s.as_ref())).expect("label present")).collect();
    (ids, names)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::Io(e).in_file(path))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::Io(e).in_file(path))
}

pub fn load_matrix(path: &Path) -> Result<FeatureMatrix> {
    gemb::decode_matrix(&read(path)?).map_err(|e| e.in_file(path))
}

pub fn save_matrix(matrix: &FeatureMatrix, path: &Path) -> Result<()> {
    let bytes = gemb::encode(matrix).map_err(|e| e.in_file(path))?;
    write(path, &bytes)
}

pub fn load_metadata(path: &Path) -> Result<Vec<SampleMetadata>> {
    let metadata = metadata::parse_metadata(&read(path)?).map_err(|e| e.in_file(path))?;
    validate_metadata(&metadata).map_err(|e| e.in_file(path))?;
    Ok(metadata)
}

pub fn load_targets(paths: &TargetPaths) -> Result<TargetTable> {
    let values = load_matrix(&paths.values)?;
    let names = metadata::parse_target_names(&read(&paths.names)?).map_err(|e| e.in_file(&paths.names))?;
    TargetTable::new(names, values).map_err(|e| e.in_file(&paths.names))
}

pub fn load_dataset(
    features_path: &Path,
    metadata_path: &Path,
    targets: Option<&TargetPaths>,
) -> Result<EmbeddingDataset> {
    let features = load_matrix(features_path)?;
    let metadata = load_metadata(metadata_path)?;
    let targets = targets.map(load_targets).transpose()?;
    EmbeddingDataset::new(features, metadata, targets)
}

pub fn save_dataset(
    dataset: &EmbeddingDataset,
    features_path: &Path,
    metadata_path: &Path,
    targets: Option<&TargetPaths>,
) -> Result<()> {
    // Encode everything first so a rejected dataset leaves no partial output.
    let features = gemb::encode(&dataset.features)?;
    let meta = metadata::write_metadata(&dataset.metadata)?;
    let target_bytes = match (targets, &dataset.targets) {
        (Some(_), Some(t)) => Some((gemb::encode(&t.values)?, metadata::write_target_names(&t.names)?)),
        (Some(_), None) => return Err(Error::InvalidConfig("dataset has no targets to save".into())),
        (None, _) => None,
    };
    write(features_path, &features)?;
    write(metadata_path, &meta)?;
    if let (Some(paths), Some((values, names))) = (targets, target_bytes) {
        write(&paths.values, &values)?;
        write(&paths.names, &names)?;
    }
    Ok(())
}
