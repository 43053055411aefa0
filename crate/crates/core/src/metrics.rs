//! Domain gap as silhouette score over game-labelled embeddings.

use std::fmt;
use std::str::FromStr;

use ndarray::{ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{cluster_ids, EmbeddingDataset};
use crate::decomposition::{embed_content, embed_style, SubspaceSplit};
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::sq_dist;
use crate::matrix::FeatureMatrix;
use crate::tsne::{self, TsneConfig};

/// Space in which the silhouette is evaluated.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    #[default]
    Raw,
    Tsne2d,
}

impl Space {
    pub fn as_str(self) -> &'static str {
        match self {
            Space::Raw => "raw",
            Space::Tsne2d => "tsne2d",
        }
    }
}

impl fmt::Display for Space {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Space {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "raw" => Ok(Space::Raw),
            "tsne2d" | "tsne" => Ok(Space::Tsne2d),
            other => Err(format!("unknown space `{other}` (expected raw or tsne2d)")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SilhouetteResult {
    pub mean_score: f64,
    pub per_sample: Vec<f64>,
    pub n_clusters: usize,
    pub space: Space,
}

/// Mean silhouette over Euclidean distances.
///
/// `s(i) = (b − a) / max(a, b)` with `a` the mean distance to the rest of
/// the own cluster and `b` the smallest mean distance to another cluster.
/// Members of singleton clusters, and points with `max(a, b) = 0`, score 0.
pub fn silhouette(x: ArrayView2<'_, f64>, labels: &[usize]) -> Result<SilhouetteResult> {
    if labels.len() != x.nrows() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: labels.len() });
    }
    let mut distinct = labels.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let n_clusters = distinct.len();
    let dense: Vec<usize> = labels.iter().map(|l| distinct.binary_search(l).expect("present")).collect();
    if n_clusters < 2 {
        return Err(Error::SingleCluster(n_clusters));
    }
    let mut counts = vec![0usize; n_clusters];
    for &c in &dense {
        counts[c] += 1;
    }
    let x = x.as_standard_layout();
    let rows: Vec<&[f64]> = x.axis_iter(Axis(0)).map(|r| r.to_slice().expect("standard layout")).collect();
    let per_sample: Vec<f64> = (0..rows.len())
        .into_par_iter()
        .map(|i| {
            let own = dense[i];
            if counts[own] == 1 {
                return 0.0;
            }
            let mut sums = vec![0.0; n_clusters];
            for (j, row) in rows.iter().enumerate() {
                if j != i {
                    sums[dense[j]] += sq_dist(rows[i], row).max(0.0).sqrt();
                }
            }
            let a = sums[own] / (counts[own] - 1) as f64;
            let b =
                (0..n_clusters).filter(|&c| c != own).map(|c| sums[c] / counts[c] as f64).fold(f64::INFINITY, f64::min);
            let denom = a.max(b);
            if denom == 0.0 {
                0.0
            } else {
                (b - a) / denom
            }
        })
        .collect();
    let mean_score = per_sample.iter().sum::<f64>() / per_sample.len() as f64;
    Ok(SilhouetteResult { mean_score, per_sample, n_clusters, space: Space::Raw })
}

/// Silhouette of `x` in the requested space; for [`Space::Tsne2d`] the rows
/// are first embedded with exact t-SNE.
pub fn silhouette_in(
    x: &FeatureMatrix,
    labels: &[usize],
    space: Space,
    tsne_config: &TsneConfig,
) -> Result<SilhouetteResult> {
    match space {
        Space::Raw => silhouette(x.view(), labels),
        Space::Tsne2d => {
            let embedding = tsne::fit(x, tsne_config)?;
            let mut result = silhouette(embedding.coords.view(), labels)?;
            result.space = Space::Tsne2d;
            Ok(result)
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantScore {
    pub variant: String,
    pub result: SilhouetteResult,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DomainGapReport {
    pub genre_id: String,
    pub k_used: usize,
    pub space: Space,
    /// Directions actually available to the split, `min(N, D)`; smaller than
    /// D when the genre has fewer samples than dimensions.
    pub available_directions: usize,
    pub rows: Vec<VariantScore>,
}

impl DomainGapReport {
    pub fn score(&self, variant: &str) -> Option<f64> {
        self.rows.iter().find(|r| r.variant == variant).map(|r| r.result.mean_score)
    }
}

/// Silhouette of the latent, content and style embeddings of one genre,
/// followed by any extra row-aligned variants, all clustered by game id.
pub fn domain_gap_report(
    genre: &EmbeddingDataset,
    split: &SubspaceSplit,
    extra_variants: &[(String, FeatureMatrix)],
    space: Space,
    tsne_config: &TsneConfig,
) -> Result<DomainGapReport> {
    let (labels, _) = cluster_ids(&genre.game_ids());
    let latent = genre.features();
    let mut variants: Vec<(String, FeatureMatrix)> = vec![
        ("latent".to_owned(), latent.clone()),
        ("content".to_owned(), embed_content(latent, split)?),
        ("style".to_owned(), embed_style(latent, split)?),
    ];
    for (name, m) in extra_variants {
        if m.n_rows() != genre.n_rows() {
            return Err(dim_mismatch(format!(
                "variant `{name}` has {} rows, genre has {}",
                m.n_rows(),
                genre.n_rows()
            )));
        }
        variants.push((name.clone(), m.clone()));
    }
    let rows = variants
        .iter()
        .map(|(name, m)| {
            silhouette_in(m, &labels, space, tsne_config).map(|result| VariantScore { variant: name.clone(), result })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(DomainGapReport {
        genre_id: split.genre_id.clone(),
        k_used: split.k,
        space,
        available_directions: split.available_directions(),
        rows,
    })
}

pub const GAP_CSV_HEADER: [&str; 5] = ["genre", "variant", "space", "k", "mean_silhouette"];

/// One line of the summary CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub genre: String,
    pub variant: String,
    pub space: Space,
    pub k: usize,
    pub mean_silhouette: f64,
}

impl DomainGapReport {
    pub fn csv_rows(&self) -> Vec<GapRow> {
        self.rows
            .iter()
            .map(|r| GapRow {
                genre: self.genre_id.clone(),
                variant: r.variant.clone(),
                space: self.space,
                k: self.k_used,
                mean_silhouette: r.result.mean_score,
            })
            .collect()
    }
}

pub fn write_gap_csv(rows: &[GapRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(GAP_CSV_HEADER).map_err(csv_error)?;
    for r in rows {
        w.write_record([
            r.genre.as_str(),
            &r.variant,
            r.space.as_str(),
            &r.k.to_string(),
            &r.mean_silhouette.to_string(),
        ])
        .map_err(csv_error)?;
    }
    w.into_inner().map_err(|e| Error::Io(e.into_error()))
}

fn csv_error(e: csv::Error) -> Error {
    Error::Csv { line: e.position().map_or(0, csv::Position::line), message: e.to_string() }
}

/// Parses a summary CSV written by [`write_gap_csv`].
pub fn parse_gap_csv(bytes: &[u8]) -> Result<Vec<GapRow>> {
    let mut reader = csv::ReaderBuilder::new().has_headers(false).from_reader(bytes);
    let mut records = reader.records();
    let header = records.next().ok_or(Error::Csv { line: 1, message: "missing header".into() })?.map_err(csv_error)?;
    if header.iter().ne(GAP_CSV_HEADER) {
        return Err(Error::Csv { line: 1, message: format!("expected header `{}`", GAP_CSV_HEADER.join(",")) });
    }
    records
        .map(|rec| {
            let rec = rec.map_err(csv_error)?;
            let line = rec.position().map_or(0, csv::Position::line);
            let bad = |what: &str| Error::Csv { line, message: format!("bad {what}") };
            let mean_silhouette: f64 = rec[4].parse().map_err(|_| bad("mean_silhouette"))?;
            if !(-1.0..=1.0).contains(&mean_silhouette) {
                return Err(bad("mean_silhouette (outside [-1, 1])"));
            }
            if rec[0].is_empty() || rec[1].is_empty() {
                return Err(bad("genre or variant (empty)"));
            }
            Ok(GapRow {
                genre: rec[0].to_owned(),
                variant: rec[1].to_owned(),
                space: rec[2].parse().map_err(|_| bad("space"))?,
                k: rec[3].parse().map_err(|_| bad("k"))?,
                mean_silhouette,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn two_cluster_hand_value() {
        let x = array![[0.0, 0.0], [0.0, 1.0], [10.0, 0.0], [10.0, 1.0]];
        let r = silhouette(x.view(), &[0, 0, 1, 1]).unwrap();
        assert!((r.mean_score - 0.90025).abs() < 1e-4);
        let b = (10.0 + 101f64.sqrt()) / 2.0;
        assert!((r.mean_score - (b - 1.0) / b).abs() < 1e-12);
        assert_eq!(r.n_clusters, 2);
    }

    #[test]
    fn identical_points_score_zero() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [1.0, 1.0], [1.0, 1.0]];
        let r = silhouette(x.view(), &[0, 1, 0, 1]).unwrap();
        assert_eq!(r.mean_score, 0.0);
    }

    #[test]
    fn singletons_and_errors() {
        let x = array![[0.0], [1.0], [5.0]];
        let r = silhouette(x.view(), &[7, 7, 3]).unwrap();
        assert_eq!(r.per_sample[2], 0.0);
        assert!(matches!(silhouette(x.view(), &[1, 1, 1]), Err(Error::SingleCluster(1))));
        assert!(matches!(silhouette(x.view(), &[1, 2]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn gap_csv_round_trip() {
        let rows = vec![GapRow {
            genre: "soccer".into(),
            variant: "style".into(),
            space: Space::Raw,
            k: 16,
            mean_silhouette: 0.348,
        }];
        let bytes = write_gap_csv(&rows).unwrap();
        assert!(bytes.starts_with(b"genre,variant,space,k,mean_silhouette\n"));
        assert_eq!(parse_gap_csv(&bytes).unwrap(), rows);
        assert!(parse_gap_csv(b"genre,variant,space,k,mean_silhouette\nx,y,raw,1,3.0\n").is_err());
    }
}
