//! Style/content split of a genre's latent space from its SVD.
//!
//! The right singular vectors are ranked by singular value. A split picks
//! `k` of them as the style subspace and leaves the rest as content. Which
//! `k` directions are picked depends on the [`SelectionStrategy`]; the
//! toolkit default is the top `k` with `k = 16`.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::cluster_ids;
use crate::error::{dim_mismatch, Error, Result};
use crate::linalg::{project, svd, Basis, SvdFactorization};
use crate::matrix::FeatureMatrix;
use crate::rng::{SplitMix64, Stream};

pub const DEFAULT_K: usize = 16;
pub const DEFAULT_CANDIDATES: [usize; 9] = [1, 2, 4, 8, 16, 32, 64, 128, 256];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum SelectionStrategy {
    /// The `k` largest singular values.
    TopK,
    /// `k` directions drawn uniformly without replacement.
    RandomK { seed: u64 },
    /// The `k` smallest of the computed singular values.
    LastK,
    /// The top `⌊k/2⌋` plus `⌈k/2⌉` drawn from the remaining directions.
    TopHalfRandomHalf { seed: u64 },
}

impl SelectionStrategy {
    pub fn name(&self) -> &'static str {
        match self {
            SelectionStrategy::TopK => "top",
            SelectionStrategy::RandomK { .. } => "random",
            SelectionStrategy::LastK => "last",
            SelectionStrategy::TopHalfRandomHalf { .. } => "top-half-random",
        }
    }

    /// Parses a CLI strategy name; randomized variants take `seed`.
    pub fn parse(name: &str, seed: u64) -> Result<Self, String> {
        match name {
            "top" => Ok(SelectionStrategy::TopK),
            "random" => Ok(SelectionStrategy::RandomK { seed }),
            "last" => Ok(SelectionStrategy::LastK),
            "top-half-random" => Ok(SelectionStrategy::TopHalfRandomHalf { seed }),
            other => Err(format!("unknown strategy `{other}` (expected top, random, last or top-half-random)")),
        }
    }
}

impl fmt::Display for SelectionStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SelectionStrategy {
    type Err = String;

    /// Deterministic variants only; use [`SelectionStrategy::parse`] for seeded ones.
    fn from_str(s: &str) -> Result<Self, String> {
        Self::parse(s, 0)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceSplit {
    pub genre_id: String,
    pub k: usize,
    pub strategy: SelectionStrategy,
    /// Ascending indices into the descending singular values.
    pub style_indices: Vec<usize>,
    /// Complement of `style_indices` within the computed directions, ascending.
    pub content_indices: Vec<usize>,
    pub style_basis: Basis,
    pub content_basis: Basis,
    pub singular_values: Vec<f64>,
}

impl SubspaceSplit {
    pub fn dim(&self) -> usize {
        self.style_basis.dim_in()
    }

    pub fn available_directions(&self) -> usize {
        self.style_indices.len() + self.content_indices.len()
    }
}

/// Picks the style directions of `svd` and packages both bases.
pub fn split(svd: &SvdFactorization, k: usize, strategy: SelectionStrategy, genre_id: &str) -> Result<SubspaceSplit> {
    let r = svd.rank_bound();
    if k == 0 || k >= r {
        return Err(Error::KOutOfRange { k, available: r });
    }
    let mut style_indices: Vec<usize> = match strategy {
        SelectionStrategy::TopK => (0..k).collect(),
        SelectionStrategy::LastK => (r - k..r).collect(),
        SelectionStrategy::RandomK { seed } => {
            let eligible: Vec<usize> = (0..r).collect();
            SplitMix64::derive(seed, Stream::Selection).sample_without_replacement(&eligible, k)
        }
        SelectionStrategy::TopHalfRandomHalf { seed } => {
            let top = k / 2;
            let eligible: Vec<usize> = (top..r).collect();
            let drawn = SplitMix64::derive(seed, Stream::Selection).sample_without_replacement(&eligible, k - top);
            (0..top).chain(drawn).collect()
        }
    };
    style_indices.sort_unstable();
    let content_indices: Vec<usize> = (0..r).filter(|i| style_indices.binary_search(i).is_err()).collect();
    Ok(SubspaceSplit {
        genre_id: genre_id.to_owned(),
        k,
        strategy,
        style_basis: Basis::from_columns_of(&svd.v, &style_indices)?,
        content_basis: Basis::from_columns_of(&svd.v, &content_indices)?,
        style_indices,
        content_indices,
        singular_values: svd.s.to_vec(),
    })
}

/// SVD of `x` followed by [`split`].
pub fn fit_split(x: &FeatureMatrix, k: usize, strategy: SelectionStrategy, genre_id: &str) -> Result<SubspaceSplit> {
    split(&svd(x)?, k, strategy, genre_id)
}

fn check_dim(x: &FeatureMatrix, split: &SubspaceSplit) -> Result<()> {
    if x.n_cols() != split.dim() {
        return Err(dim_mismatch(format!("embedding has {} columns, split was fit on D={}", x.n_cols(), split.dim())));
    }
    Ok(())
}

/// N×k style coordinates.
pub fn embed_style(x: &FeatureMatrix, split: &SubspaceSplit) -> Result<FeatureMatrix> {
    check_dim(x, split)?;
    project(x, &split.style_basis)
}

/// N×(r−k) content coordinates.
pub fn embed_content(x: &FeatureMatrix, split: &SubspaceSplit) -> Result<FeatureMatrix> {
    check_dim(x, split)?;
    project(x, &split.content_basis)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KSweepResult {
    pub candidates: Vec<usize>,
    pub style_scores: Vec<f64>,
    pub content_scores: Vec<f64>,
    /// `style_scores[i] − content_scores[i]`.
    pub gap_diff: Vec<f64>,
    pub chosen_k: usize,
}

/// Sweeps TopK splits over `candidates` and keeps the `k` with the largest
/// domain-gap difference (smallest `k` on ties).
///
/// `gap_fn` scores an embedding against per-row cluster ids (game ids).
pub fn select_k<S, F>(
    genre_data: &FeatureMatrix,
    game_labels: &[S],
    candidates: &[usize],
    gap_fn: F,
) -> Result<KSweepResult>
where
    S: AsRef<str>,
    F: Fn(&FeatureMatrix, &[usize]) -> Result<f64> + Sync,
{
    if game_labels.len() != genre_data.n_rows() {
        return Err(Error::LengthMismatch { left: genre_data.n_rows(), right: game_labels.len() });
    }
    let (labels, games) = cluster_ids(game_labels);
    if games.len() < 2 {
        return Err(Error::TooFewGames(games.len()));
    }
    if candidates.is_empty() {
        return Err(Error::InvalidConfig("no k candidates".into()));
    }
    let factorization = svd(genre_data)?;
    if let Some(&k) = candidates.iter().find(|&&k| k == 0 || k >= factorization.rank_bound()) {
        return Err(Error::KOutOfRange { k, available: factorization.rank_bound() });
    }
    let scores = candidates
        .par_iter()
        .map(|&k| {
            let s = split(&factorization, k, SelectionStrategy::TopK, "")?;
            let style = gap_fn(&embed_style(genre_data, &s)?, &labels)?;
            let content = gap_fn(&embed_content(genre_data, &s)?, &labels)?;
            Ok((style, content))
        })
        .collect::<Result<Vec<_>>>()?;
    let (style_scores, content_scores): (Vec<f64>, Vec<f64>) = scores.into_iter().unzip();
    let gap_diff: Vec<f64> = style_scores.iter().zip(&content_scores).map(|(s, c)| s - c).collect();
    let mut best = 0;
    for i in 1..candidates.len() {
        let better = gap_diff[i] > gap_diff[best];
        let tie_smaller = gap_diff[i] == gap_diff[best] && candidates[i] < candidates[best];
        if better || tie_smaller {
            best = i;
        }
    }
    Ok(KSweepResult {
        chosen_k: candidates[best],
        candidates: candidates.to_vec(),
        style_scores,
        content_scores,
        gap_diff,
    })
}
