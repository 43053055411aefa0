use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use latent_split::dataset::{gemb, load_dataset, load_matrix, metadata, EmbeddingDataset, TargetPaths};
use latent_split::decomposition::{
    embed_content, embed_style, fit_split, select_k, SelectionStrategy, SubspaceSplit, DEFAULT_CANDIDATES,
};
use latent_split::metrics::{domain_gap_report, parse_gap_csv, silhouette_in, write_gap_csv, GapRow, Space};
use latent_split::probes::{classification_probe, make_folds, regression_probe, LogisticConfig, Ridge, RowSplit};
use latent_split::synth::{self, SynthConfig};
use latent_split::tsne::{self, TsneConfig};
use latent_split::{Error, FeatureMatrix};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::artifacts::{csv_bytes, digest_inputs, file_tag, json_bytes, params, OutputDir};
use crate::{Cli, Command, Failure, InputArgs, RowSplitSpec, SplitArgs, SynthArgs, TsneArgs, Variant};

const VARIANTS: [Variant; 3] = [Variant::Latent, Variant::Content, Variant::Style];

pub fn run(cli: &Cli) -> Result<(), Failure> {
    let seed = cli.seed;
    let out = match &cli.command {
        Command::Validate { input } => return validate(input),
        Command::Synth(args) => synth_cmd(args, seed)?,
        Command::Decompose { input, split, out } => decompose(input, split, seed, out)?,
        Command::Sweep { input, candidates, space, tsne, out } => {
            sweep(input, candidates.as_deref(), *space, tsne, seed, out)?
        }
        Command::Gap { input, split, space, extras, tsne, out } => gap(input, split, *space, extras, tsne, seed, out)?,
        Command::ProbeReg { input, split, test_split, out } => probe_reg(input, split, test_split, seed, out)?,
        Command::ProbeCls { input, split, folds, out } => probe_cls(input, split, *folds, seed, out)?,
        Command::Tsne { input, split, embedding, tsne, out } => tsne_cmd(input, split, *embedding, tsne, seed, out)?,
        Command::Report { inputs, out } => report(inputs, out)?,
    };
    println!("wrote {} artifact(s): {}", out.written().len(), out.written().join(", "));
    Ok(())
}

struct Loaded {
    dataset: EmbeddingDataset,
    /// Selected genres with their global row indices.
    genres: Vec<(String, Vec<usize>)>,
    inputs: Vec<PathBuf>,
}

impl Loaded {
    fn genre(&self, rows: &[usize]) -> EmbeddingDataset {
        self.dataset.select_rows(rows)
    }
}

fn load(input: &InputArgs, need_targets: bool) -> Result<Loaded, Failure> {
    if need_targets && input.targets.is_none() {
        return Err(Failure::Usage("this command needs --targets".into()));
    }
    let targets = input.targets.as_ref().map(TargetPaths::beside);
    let dataset = load_dataset(&input.features, &input.metadata, targets.as_ref())?;
    let names = match &input.genre {
        Some(g) if dataset.metadata().iter().any(|m| &m.genre_id == g) => vec![g.clone()],
        Some(g) => return Err(Error::UnknownGenre(g.clone()).into()),
        None => dataset.genres(),
    };
    let genres = names
        .into_iter()
        .map(|g| {
            let rows = (0..dataset.n_rows()).filter(|&i| dataset.metadata()[i].genre_id == g).collect();
            (g, rows)
        })
        .collect();
    let mut inputs = vec![input.features.clone(), input.metadata.clone()];
    if let Some(t) = targets {
        inputs.push(t.values);
        inputs.push(t.names);
    }
    Ok(Loaded { dataset, genres, inputs })
}

fn output(loaded: &Loaded, dir: &Path, command: &'static str, seed: u64) -> Result<OutputDir, Failure> {
    let paths: Vec<&Path> = loaded.inputs.iter().map(PathBuf::as_path).collect();
    OutputDir::create(dir, command, digest_inputs(&paths)?, seed)
}

fn strategy(args: &SplitArgs, seed: u64) -> SelectionStrategy {
    SelectionStrategy::parse(&args.strategy, seed).expect("clap restricts strategy names")
}

fn split_params(genre: &str, args: &SplitArgs, seed: u64) -> Map<String, Value> {
    params([("genre", json!(genre)), ("k", json!(args.k)), ("strategy", json!(strategy(args, seed)))])
}

fn fit(genre: &EmbeddingDataset, args: &SplitArgs, seed: u64, genre_id: &str) -> Result<SubspaceSplit, Failure> {
    Ok(fit_split(genre.features(), args.k as usize, strategy(args, seed), genre_id)?)
}

fn tsne_config(args: &TsneArgs, seed: u64) -> TsneConfig {
    TsneConfig { perplexity: args.perplexity, n_iter: args.iterations as usize, seed, ..TsneConfig::default() }
}

fn variant_matrix(genre: &EmbeddingDataset, split: &SubspaceSplit, v: Variant) -> Result<FeatureMatrix, Failure> {
    Ok(match v {
        Variant::Latent => genre.features().clone(),
        Variant::Content => embed_content(genre.features(), split)?,
        Variant::Style => embed_style(genre.features(), split)?,
    })
}

fn validate(input: &InputArgs) -> Result<(), Failure> {
    let loaded = load(input, false)?;
    let ds = &loaded.dataset;
    let mut games = ds.game_ids();
    games.sort_unstable();
    games.dedup();
    println!(
        "ok: {} rows, {} columns, {} genre(s), {} game(s){}",
        ds.n_rows(),
        ds.n_cols(),
        ds.genres().len(),
        games.len(),
        ds.targets().map_or(String::new(), |t| format!(", {} target variable(s)", t.names().len()))
    );
    Ok(())
}

fn synth_cmd(args: &SynthArgs, seed: u64) -> Result<OutputDir, Failure> {
    let config = SynthConfig {
        n_genres: args.genres,
        games_per_genre: args.games_per_genre,
        samples_per_game: args.samples_per_game,
        latent_dim: args.dim,
        style_dim: args.style_dim,
        content_dim: args.content_dim,
        style_scale: args.style_scale,
        content_scale: args.content_scale,
        noise_scale: args.noise_scale,
        label_offset_scale: args.label_offset_scale,
        n_target_vars: args.target_vars,
        seed,
    };
    config.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (ds, truth) = synth::generate(&config)?;
    let mut out = OutputDir::create(&args.out, "synth", Vec::new(), seed)?;
    let p = params([("config", json!(config))]);
    out.write("features.gemb", &gemb::encode(ds.features())?, &p)?;
    out.write("metadata.csv", &metadata::write_metadata(ds.metadata())?, &p)?;
    if let Some(t) = ds.targets() {
        out.write("targets.gemb", &gemb::encode(t.values())?, &p)?;
        out.write("targets.csv", &metadata::write_target_names(t.names())?, &p)?;
    }
    out.write("ground_truth.json", &json_bytes(&truth)?, &p)?;
    Ok(out)
}

#[derive(Serialize)]
struct SplitFile<'a> {
    genre_id: &'a str,
    n_rows: usize,
    dim: usize,
    k: usize,
    strategy: SelectionStrategy,
    style_indices: &'a [usize],
    content_indices: &'a [usize],
    singular_values: &'a [f64],
}

fn decompose(input: &InputArgs, args: &SplitArgs, seed: u64, dir: &Path) -> Result<OutputDir, Failure> {
    let loaded = load(input, false)?;
    let mut out = output(&loaded, dir, "decompose", seed)?;
    for (genre_id, rows) in &loaded.genres {
        let genre = loaded.genre(rows);
        let split = fit(&genre, args, seed, genre_id)?;
        let tag = file_tag(genre_id);
        let p = split_params(genre_id, args, seed);
        let file = SplitFile {
            genre_id,
            n_rows: genre.n_rows(),
            dim: split.dim(),
            k: split.k,
            strategy: split.strategy,
            style_indices: &split.style_indices,
            content_indices: &split.content_indices,
            singular_values: &split.singular_values,
        };
        out.write(&format!("split_{tag}.json"), &json_bytes(&file)?, &p)?;
        out.write(&format!("style_{tag}.gemb"), &gemb::encode(&embed_style(genre.features(), &split)?)?, &p)?;
        out.write(&format!("content_{tag}.gemb"), &gemb::encode(&embed_content(genre.features(), &split)?)?, &p)?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct SweepRow {
    k: usize,
    style_silhouette: f64,
    content_silhouette: f64,
    gap_diff: f64,
}

fn sweep(
    input: &InputArgs,
    candidates: Option<&[u64]>,
    space: Space,
    tsne_args: &TsneArgs,
    seed: u64,
    dir: &Path,
) -> Result<OutputDir, Failure> {
    let loaded = load(input, false)?;
    let mut out = output(&loaded, dir, "sweep", seed)?;
    let config = tsne_config(tsne_args, seed);
    for (genre_id, rows) in &loaded.genres {
        let genre = loaded.genre(rows);
        let available = genre.n_rows().min(genre.n_cols());
        // The default list is trimmed to the genre's rank bound; an explicit
        // list is used as given and fails if any value is out of range.
        let (ks, dropped): (Vec<usize>, Vec<usize>) = match candidates {
            Some(list) => (list.iter().map(|&k| k as usize).collect(), Vec::new()),
            None => DEFAULT_CANDIDATES.iter().partition(|&&k| k < available),
        };
        if !dropped.is_empty() {
            eprintln!("note: {genre_id}: skipping k in {dropped:?} (only {available} directions)");
        }
        let games = genre.game_ids();
        let result = select_k(genre.features(), &games, &ks, |m, labels| {
            Ok(silhouette_in(m, labels, space, &config)?.mean_score)
        })?;
        let tag = file_tag(genre_id);
        let p = params([
            ("genre", json!(genre_id)),
            ("space", json!(space)),
            ("candidates", json!(result.candidates)),
            ("dropped_candidates", json!(dropped)),
            ("tsne", if space == Space::Tsne2d { json!(config) } else { Value::Null }),
        ]);
        let table = (0..result.candidates.len()).map(|i| SweepRow {
            k: result.candidates[i],
            style_silhouette: result.style_scores[i],
            content_silhouette: result.content_scores[i],
            gap_diff: result.gap_diff[i],
        });
        out.write(
            &format!("sweep_{tag}.csv"),
            &csv_bytes(&["k", "style_silhouette", "content_silhouette", "gap_diff"], table)?,
            &p,
        )?;
        out.write(&format!("sweep_{tag}.json"), &json_bytes(&json!({ "genre_id": genre_id, "result": result }))?, &p)?;
    }
    Ok(out)
}

fn gap(
    input: &InputArgs,
    args: &SplitArgs,
    space: Space,
    extras: &[(String, PathBuf)],
    tsne_args: &TsneArgs,
    seed: u64,
    dir: &Path,
) -> Result<OutputDir, Failure> {
    let mut loaded = load(input, false)?;
    let mut extra_matrices = Vec::with_capacity(extras.len());
    for (name, path) in extras {
        let m = load_matrix(path)?;
        if m.n_rows() != loaded.dataset.n_rows() {
            return Err(Failure::Data(format!(
                "{}: extra embedding `{name}` has {} rows, dataset has {}",
                path.display(),
                m.n_rows(),
                loaded.dataset.n_rows()
            )));
        }
        extra_matrices.push((name.clone(), m));
        loaded.inputs.push(path.clone());
    }
    let mut out = output(&loaded, dir, "gap", seed)?;
    let config = tsne_config(tsne_args, seed);
    for (genre_id, rows) in &loaded.genres {
        let genre = loaded.genre(rows);
        let split = fit(&genre, args, seed, genre_id)?;
        let genre_extras: Vec<(String, FeatureMatrix)> =
            extra_matrices.iter().map(|(n, m)| (n.clone(), m.select_rows(rows))).collect();
        let report = domain_gap_report(&genre, &split, &genre_extras, space, &config)?;
        let tag = file_tag(genre_id);
        let mut p = split_params(genre_id, args, seed);
        p.insert("space".into(), json!(space));
        if space == Space::Tsne2d {
            p.insert("tsne".into(), json!(config));
        }
        out.write(&format!("gap_{tag}.csv"), &write_gap_csv(&report.csv_rows())?, &p)?;
        out.write(&format!("gap_{tag}.json"), &json_bytes(&report)?, &p)?;
    }
    Ok(out)
}

fn row_split(spec: &RowSplitSpec, genre: &EmbeddingDataset, genre_id: &str, seed: u64) -> Result<RowSplit, Failure> {
    match spec {
        RowSplitSpec::Fraction(f) => Ok(RowSplit::by_fraction(genre.n_rows(), *f, seed)?),
        RowSplitSpec::Games(games) => {
            let present: Vec<&String> =
                games.iter().filter(|g| genre.metadata().iter().any(|m| &m.game_id == *g)).collect();
            if present.is_empty() {
                return Err(Failure::Data(format!("none of the test games belong to genre `{genre_id}`")));
            }
            Ok(RowSplit::by_games(genre.metadata(), &present)?)
        }
    }
}

fn probe_reg(
    input: &InputArgs,
    args: &SplitArgs,
    spec: &RowSplitSpec,
    seed: u64,
    dir: &Path,
) -> Result<OutputDir, Failure> {
    let loaded = load(input, true)?;
    let mut out = output(&loaded, dir, "probe-reg", seed)?;
    for (genre_id, rows) in &loaded.genres {
        let genre = loaded.genre(rows);
        let split = fit(&genre, args, seed, genre_id)?;
        let rows = row_split(spec, &genre, genre_id, seed)?;
        let targets = genre.targets().expect("targets loaded");
        let tag = file_tag(genre_id);
        let mut p = split_params(genre_id, args, seed);
        p.insert("test_rows".into(), json!(rows.test.len()));
        p.insert("train_rows".into(), json!(rows.train.len()));
        let mut reports = Vec::new();
        for v in VARIANTS {
            let m = variant_matrix(&genre, &split, v)?;
            let report = regression_probe(&m, targets, &rows, v.as_str(), Ridge::default())?;
            out.write(
                &format!("probe_reg_{tag}_{}.csv", v.as_str()),
                &csv_bytes(&["variable", "r2"], &report.per_variable_r2)?,
                &p,
            )?;
            reports.push(report);
        }
        out.write(
            &format!("probe_reg_{tag}.json"),
            &json_bytes(&json!({ "genre_id": genre_id, "split": rows, "reports": reports }))?,
            &p,
        )?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct FoldRow {
    fold: usize,
    accuracy: f64,
    baseline: f64,
}

fn probe_cls(input: &InputArgs, args: &SplitArgs, n_folds: usize, seed: u64, dir: &Path) -> Result<OutputDir, Failure> {
    if n_folds == 0 {
        return Err(Failure::Usage("--folds must be at least 1".into()));
    }
    let loaded = load(input, false)?;
    let mut out = output(&loaded, dir, "probe-cls", seed)?;
    let config = LogisticConfig::default();
    for (genre_id, rows) in &loaded.genres {
        let genre = loaded.genre(rows);
        let folds = make_folds(genre.metadata(), n_folds, seed)?;
        let split = fit(&genre, args, seed, genre_id)?;
        let labels = genre.style_labels();
        let tag = file_tag(genre_id);
        let mut p = split_params(genre_id, args, seed);
        p.insert("folds".into(), json!(n_folds));
        p.insert("classifier".into(), json!(config));
        let mut reports = Vec::new();
        for v in VARIANTS {
            let m = variant_matrix(&genre, &split, v)?;
            let report = classification_probe(&m, &labels, &folds, v.as_str(), &config)?;
            let table = (0..report.n_folds).map(|i| FoldRow {
                fold: i,
                accuracy: report.per_fold_accuracy[i],
                baseline: report.per_fold_baseline[i],
            });
            out.write(
                &format!("probe_cls_{tag}_{}.csv", v.as_str()),
                &csv_bytes(&["fold", "accuracy", "baseline"], table)?,
                &p,
            )?;
            reports.push(report);
        }
        let test_games: Vec<&[String]> = folds.iter().map(|f| f.test_games.as_slice()).collect();
        out.write(
            &format!("probe_cls_{tag}.json"),
            &json_bytes(&json!({ "genre_id": genre_id, "fold_test_games": test_games, "reports": reports }))?,
            &p,
        )?;
    }
    Ok(out)
}

#[derive(Serialize)]
struct PointRow<'a> {
    row: usize,
    x: f64,
    y: f64,
    game_id: &'a str,
    style_label: &'a str,
}

fn tsne_cmd(
    input: &InputArgs,
    args: &SplitArgs,
    variant: Variant,
    tsne_args: &TsneArgs,
    seed: u64,
    dir: &Path,
) -> Result<OutputDir, Failure> {
    let loaded = load(input, false)?;
    let mut out = output(&loaded, dir, "tsne", seed)?;
    let config = tsne_config(tsne_args, seed);
    for (genre_id, rows) in &loaded.genres {
        let genre = loaded.genre(rows);
        let m = if variant == Variant::Latent {
            genre.features().clone()
        } else {
            variant_matrix(&genre, &fit(&genre, args, seed, genre_id)?, variant)?
        };
        let embedding = tsne::fit(&m, &config)?;
        let tag = file_tag(genre_id);
        let mut p =
            params([("genre", json!(genre_id)), ("embedding", json!(variant.as_str())), ("tsne", json!(config))]);
        if variant != Variant::Latent {
            p.extend(split_params(genre_id, args, seed));
        }
        let points = rows.iter().enumerate().map(|(i, &row)| {
            let meta = &genre.metadata()[i];
            PointRow {
                row,
                x: embedding.coords[[i, 0]],
                y: embedding.coords[[i, 1]],
                game_id: &meta.game_id,
                style_label: meta.style_label.as_str(),
            }
        });
        let name = format!("tsne_{tag}_{}", variant.as_str());
        out.write(&format!("{name}.csv"), &csv_bytes(&["row", "x", "y", "game_id", "style_label"], points)?, &p)?;
        out.write(
            &format!("{name}.json"),
            &json_bytes(&json!({ "final_kl": embedding.final_kl, "kl_trace": embedding.kl_trace }))?,
            &p,
        )?;
    }
    Ok(out)
}

fn gap_files(inputs: &[PathBuf]) -> Result<Vec<PathBuf>, Failure> {
    let mut files = Vec::new();
    for path in inputs {
        if path.is_dir() {
            let entries = fs::read_dir(path).map_err(|e| Failure::Data(format!("{}: {e}", path.display())))?;
            let mut found: Vec<PathBuf> = entries
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| {
                    p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("gap_") && n.ends_with(".csv"))
                })
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(path.clone());
        }
    }
    if files.is_empty() {
        return Err(Failure::Data("no gap_*.csv files found".into()));
    }
    Ok(files)
}

#[derive(Serialize)]
struct SummaryRow {
    genre: String,
    space: Space,
    k: usize,
    scores: BTreeMap<String, f64>,
}

fn report(inputs: &[PathBuf], dir: &Path) -> Result<OutputDir, Failure> {
    let files = gap_files(inputs)?;
    let mut rows: Vec<GapRow> = Vec::new();
    for f in &files {
        let bytes = fs::read(f).map_err(|e| Failure::Data(format!("{}: {e}", f.display())))?;
        rows.extend(parse_gap_csv(&bytes).map_err(|e| Failure::Data(format!("{}: {e}", f.display())))?);
    }
    // Standard variants first, then any extras in order of appearance.
    let mut variants: Vec<String> = VARIANTS.iter().map(|v| v.as_str().to_owned()).collect();
    for r in &rows {
        if !variants.contains(&r.variant) {
            variants.push(r.variant.clone());
        }
    }
    let mut table: BTreeMap<(String, &str, usize), BTreeMap<String, f64>> = BTreeMap::new();
    for r in &rows {
        let cell = table.entry((r.genre.clone(), r.space.as_str(), r.k)).or_default();
        if cell.insert(r.variant.clone(), r.mean_silhouette).is_some() {
            return Err(Failure::Data(format!(
                "duplicate score for genre `{}`, variant `{}`, space {}, k={}",
                r.genre, r.variant, r.space, r.k
            )));
        }
    }
    variants.retain(|v| table.values().any(|cells| cells.contains_key(v)));

    let mut header = vec!["genre", "space", "k"];
    header.extend(variants.iter().map(String::as_str));
    let records = table.iter().map(|((genre, space, k), cells)| {
        let mut record = vec![genre.clone(), (*space).to_owned(), k.to_string()];
        record.extend(variants.iter().map(|v| cells.get(v).map_or(String::new(), f64::to_string)));
        record
    });
    let csv = csv_bytes(&header, records)?;
    let summary: Vec<SummaryRow> = table
        .iter()
        .map(|((genre, space, k), cells)| SummaryRow {
            genre: genre.clone(),
            space: space.parse().expect("written by Space::as_str"),
            k: *k,
            scores: cells.clone(),
        })
        .collect();

    let paths: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();
    let mut out = OutputDir::create(dir, "report", digest_inputs(&paths)?, 0)?;
    let p = params([("variants", json!(variants))]);
    out.write("summary.csv", &csv, &p)?;
    out.write("summary.json", &json_bytes(&summary)?, &p)?;
    Ok(out)
}
