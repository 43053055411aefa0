//! Synthetic embedding datasets with planted style and content subspaces.
//!
//! Per genre a random orthonormal frame is split into `style_dim` style
//! directions and `content_dim` content directions. Each game sits at a fixed
//! offset of norm `style_scale` inside the style directions; every sample
//! adds Gaussian content coordinates (std `content_scale`) in the content
//! directions and isotropic noise of std `noise_scale`. Targets are one
//! fixed linear map of the content coordinates, shared by all genres.

use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use crate::dataset::{EmbeddingDataset, SampleMetadata, StyleLabel, TargetTable};
use crate::error::{Error, Result};
use crate::matrix::FeatureMatrix;
use crate::rng::{SplitMix64, Stream};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_genres: usize,
    pub games_per_genre: usize,
    pub samples_per_game: usize,
    pub latent_dim: usize,
    pub style_dim: usize,
    pub content_dim: usize,
    pub style_scale: f64,
    pub content_scale: f64,
    pub noise_scale: f64,
    /// Norm of a per-style-label offset added inside the style directions,
    /// making the retro/modern/photoreal label linearly recoverable across
    /// games. Zero disables it.
    #[serde(default)]
    pub label_offset_scale: f64,
    pub n_target_vars: usize,
    pub seed: u64,
}

impl SynthConfig {
    /// One genre, 9 games (3 per style), 200 frames each, D=64 with a
    /// 4-dimensional planted style subspace and 16 content directions.
    pub fn standard(seed: u64) -> Self {
        Self {
            n_genres: 1,
            games_per_genre: 9,
            samples_per_game: 200,
            latent_dim: 64,
            style_dim: 4,
            content_dim: 16,
            style_scale: 10.0,
            content_scale: 1.0,
            noise_scale: 0.1,
            label_offset_scale: 0.0,
            n_target_vars: 8,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidConfig(m));
        if self.n_genres == 0 || self.games_per_genre == 0 {
            return fail("need at least one genre and one game".into());
        }
        if self.samples_per_game < 2 {
            return fail(format!("samples_per_game must be >= 2, got {}", self.samples_per_game));
        }
        if self.style_dim + self.content_dim > self.latent_dim {
            return fail(format!(
                "style_dim + content_dim = {} exceeds latent_dim {}",
                self.style_dim + self.content_dim,
                self.latent_dim
            ));
        }
        if self.latent_dim == 0 {
            return fail("latent_dim must be positive".into());
        }
        let scales = [self.style_scale, self.content_scale, self.noise_scale, self.label_offset_scale];
        if scales.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return fail("scales must be finite and non-negative".into());
        }
        if self.n_target_vars > 0 && self.content_dim == 0 {
            return fail("targets need at least one content direction".into());
        }
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_genres * self.games_per_genre * self.samples_per_game
    }
}

/// Planted structure of one genre. Matrices are stored row-major as nested
/// vectors so they serialize as plain JSON arrays.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenreTruth {
    pub genre_id: String,
    /// D×style_dim.
    pub style_basis: Vec<Vec<f64>>,
    /// D×content_dim.
    pub content_basis: Vec<Vec<f64>>,
    /// Per game: id, style label, offset in style coordinates.
    pub games: Vec<GameTruth>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameTruth {
    pub game_id: String,
    pub style_label: StyleLabel,
    pub style_offset: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub config: SynthConfig,
    pub genres: Vec<GenreTruth>,
    /// n_target_vars×content_dim.
    pub target_map: Vec<Vec<f64>>,
}

pub(crate) fn to_nested(m: &Array2<f64>) -> Vec<Vec<f64>> {
    m.rows().into_iter().map(|r| r.to_vec()).collect()
}

pub fn from_nested(rows: &[Vec<f64>]) -> Array2<f64> {
    let cols = rows.first().map_or(0, Vec::len);
    Array2::from_shape_fn((rows.len(), cols), |(i, j)| rows[i][j])
}

fn gaussian(rng: &mut SplitMix64, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.standard_normal())
}

/// Orthonormalizes the columns of a full-column-rank matrix (two passes of
/// modified Gram-Schmidt).
fn orthonormal_columns(mut m: Array2<f64>) -> Array2<f64> {
    for j in 0..m.ncols() {
        for _ in 0..2 {
            for k in 0..j {
                let proj = m.column(j).dot(&m.column(k));
                let prev = m.column(k).to_owned();
                m.column_mut(j).scaled_add(-proj, &prev);
            }
        }
        let norm = m.column(j).dot(&m.column(j)).sqrt();
        m.column_mut(j).mapv_inplace(|v| v / norm);
    }
    m
}

fn unit_vector(rng: &mut SplitMix64, dim: usize) -> Array1<f64> {
    loop {
        let v = Array1::from_shape_simple_fn(dim, || rng.standard_normal());
        let norm = v.dot(&v).sqrt();
        if norm > 1e-9 {
            return v / norm;
        }
    }
}

pub fn genre_name(g: usize) -> String {
    format!("genre{g:02}")
}

pub fn game_name(g: usize, game: usize) -> String {
    format!("genre{g:02}-game{game:02}")
}

/// Generates the dataset and its ground truth. Feature and target values are
/// rounded to `f32` so the dataset survives a save/load round trip unchanged.
pub fn generate(config: &SynthConfig) -> Result<(EmbeddingDataset, GroundTruth)> {
    config.validate()?;
    let (d, ks, m) = (config.latent_dim, config.style_dim, config.content_dim);
    let seed = mix_seed(config.seed);
    let target_map = gaussian(&mut SplitMix64::derive_raw(seed, u64::MAX), config.n_target_vars, m);

    let n = config.n_rows();
    let mut features = Array2::<f64>::zeros((n, d));
    let mut targets = Array2::<f64>::zeros((n, config.n_target_vars));
    let mut metadata = Vec::with_capacity(n);
    let mut genres = Vec::with_capacity(config.n_genres);
    let mut row = 0;
    for g in 0..config.n_genres {
        let mut rng = SplitMix64::derive_raw(seed, g as u64);
        let frame = orthonormal_columns(gaussian(&mut rng, d, ks + m));
        let style_basis = frame.slice(ndarray::s![.., ..ks]).to_owned();
        let content_basis = frame.slice(ndarray::s![.., ks..]).to_owned();
        let label_centers: Vec<Array1<f64>> = StyleLabel::KNOWN
            .iter()
            .map(|_| if ks > 0 { unit_vector(&mut rng, ks) } else { Array1::zeros(0) })
            .collect();
        let mut games = Vec::with_capacity(config.games_per_genre);
        for game in 0..config.games_per_genre {
            let label = StyleLabel::KNOWN[game % 3];
            let mut offset = if ks > 0 { unit_vector(&mut rng, ks) * config.style_scale } else { Array1::zeros(0) };
            if ks > 0 {
                offset.scaled_add(config.label_offset_scale, &label_centers[label.index()]);
            }
            let style_part = style_basis.dot(&offset);
            for sample in 0..config.samples_per_game {
                let content = Array1::from_shape_simple_fn(m, || config.content_scale * rng.standard_normal());
                let noise = Array1::from_shape_simple_fn(d, || config.noise_scale * rng.standard_normal());
                let x = &style_part + &content_basis.dot(&content) + noise;
                features.row_mut(row).assign(&x);
                targets.row_mut(row).assign(&target_map.dot(&content));
                metadata.push(SampleMetadata {
                    game_id: game_name(g, game),
                    genre_id: genre_name(g),
                    style_label: label,
                    source_frame: Some(format!("synth/{}/{sample:05}", game_name(g, game))),
                });
                row += 1;
            }
            games.push(GameTruth { game_id: game_name(g, game), style_label: label, style_offset: offset.to_vec() });
        }
        genres.push(GenreTruth {
            genre_id: genre_name(g),
            style_basis: to_nested(&style_basis),
            content_basis: to_nested(&content_basis),
            games,
        });
    }
    let features = FeatureMatrix::new(features)?.quantize_f32();
    let targets = if config.n_target_vars > 0 {
        let names = (0..config.n_target_vars).map(|v| format!("var{v:02}")).collect();
        Some(TargetTable::new(names, FeatureMatrix::new(targets)?.quantize_f32())?)
    } else {
        None
    };
    let dataset = EmbeddingDataset::new(features, metadata, targets)?;
    let truth = GroundTruth { config: config.clone(), genres, target_map: to_nested(&target_map) };
    Ok((dataset, truth))
}

fn mix_seed(seed: u64) -> u64 {
    SplitMix64::derive(seed, Stream::Synth).next()
}
