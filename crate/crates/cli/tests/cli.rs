use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_latent-split")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

struct Fixture {
    _dir: tempfile::TempDir,
    root: PathBuf,
}

impl Fixture {
    fn synth(extra: &[&str]) -> Self {
        let dir = tempfile::tempdir().unwrap();
        let root = dir.path().to_owned();
        let data = root.join("data");
        let mut args = vec!["synth", "--out", data.to_str().unwrap()];
        if !extra.contains(&"--samples-per-game") {
            args.extend(["--samples-per-game", "30"]);
        }
        args.extend_from_slice(extra);
        let out = run(&args);
        assert!(out.status.success(), "{}", stderr(&out));
        Self { _dir: dir, root }
    }

    fn path(&self, rel: &str) -> String {
        self.root.join(rel).to_string_lossy().into_owned()
    }

    fn run(&self, command: &str, rest: &[&str]) -> Output {
        let (f, m) = (self.path("data/features.gemb"), self.path("data/metadata.csv"));
        let mut args = vec![command, "--features", &f, "--metadata", &m];
        args.extend_from_slice(rest);
        run(&args)
    }
}

fn gemb_shape(path: &Path) -> (u32, u32) {
    let bytes = fs::read(path).unwrap();
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    (word(8), word(12))
}

#[test]
fn validate_reports_success_and_data_errors() {
    let fx = Fixture::synth(&[]);
    let out = fx.run("validate", &[]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok: 270 rows, 64 columns"));

    let truncated = fx.path("cut.gemb");
    fs::write(&truncated, &fs::read(fx.path("data/features.gemb")).unwrap()[..40]).unwrap();
    let out = run(&["validate", "--features", &truncated, "--metadata", &fx.path("data/metadata.csv")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("cut.gemb") && stderr(&out).contains("offset 16"), "{}", stderr(&out));

    let meta = fs::read_to_string(fx.path("data/metadata.csv")).unwrap();
    let short = fx.path("short.csv");
    fs::write(&short, meta.lines().take(100).collect::<Vec<_>>().join("\n") + "\n").unwrap();
    let out = run(&["validate", "--features", &fx.path("data/features.gemb"), "--metadata", &short]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("dimension mismatch"), "{}", stderr(&out));
}

#[test]
fn decompose_writes_split_and_embeddings() {
    let fx = Fixture::synth(&[]);
    let out_dir = fx.path("out");
    let out = fx.run("decompose", &["--k", "4", "--strategy", "top", "--out", &out_dir]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert_eq!(gemb_shape(&fx.root.join("out/content_genre00.gemb")), (270, 60));
    assert_eq!(gemb_shape(&fx.root.join("out/style_genre00.gemb")), (270, 4));
    let split: serde_json::Value =
        serde_json::from_slice(&fs::read(fx.root.join("out/split_genre00.json")).unwrap()).unwrap();
    assert_eq!(split["style_indices"], serde_json::json!([0, 1, 2, 3]));
    assert_eq!(split["singular_values"].as_array().unwrap().len(), 64);
    let meta = fs::read_to_string(fx.root.join("out/split_genre00.json.meta.json")).unwrap();
    assert!(meta.contains("\"features.gemb\"") && !meta.contains(fx.root.to_str().unwrap()));

    assert_eq!(code(&fx.run("decompose", &["--k", "0", "--out", &out_dir])), 64);
}

#[test]
fn seeded_random_strategy_is_reproducible() {
    let fx = Fixture::synth(&[]);
    let mut outputs = Vec::new();
    for dir in ["a", "b"] {
        let out = fx.run("decompose", &["--seed", "7", "--k", "4", "--strategy", "random", "--out", &fx.path(dir)]);
        assert!(out.status.success());
        outputs.push(
            ["split_genre00.json", "style_genre00.gemb", "content_genre00.gemb", "style_genre00.gemb.meta.json"]
                .map(|f| fs::read(fx.root.join(dir).join(f)).unwrap()),
        );
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn sweep_finds_planted_k() {
    let fx = Fixture::synth(&[]);
    let out = fx.run("sweep", &["--candidates", "1,2,4,8,16", "--out", &fx.path("out")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(fx.root.join("out/sweep_genre00.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("k,style_silhouette,content_silhouette,gap_diff"));
    assert_eq!(csv.lines().count(), 6);
    let json: serde_json::Value =
        serde_json::from_slice(&fs::read(fx.root.join("out/sweep_genre00.json")).unwrap()).unwrap();
    assert_eq!(json["result"]["chosen_k"], 4);
}

#[test]
fn sweep_default_candidates_when_wide_enough() {
    let fx =
        Fixture::synth(&["--dim", "300", "--games-per-genre", "6", "--samples-per-game", "50", "--target-vars", "0"]);
    let out = fx.run("sweep", &["--out", &fx.path("out")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(fx.root.join("out/sweep_genre00.csv")).unwrap();
    let ks: Vec<&str> = csv.lines().skip(1).map(|l| l.split(',').next().unwrap()).collect();
    assert_eq!(ks, ["1", "2", "4", "8", "16", "32", "64", "128", "256"]);
}

#[test]
fn sweep_on_single_game_genre_is_a_data_error() {
    let fx = Fixture::synth(&["--games-per-genre", "1"]);
    let out = fx.run("sweep", &["--candidates", "1,2", "--out", &fx.path("out")]);
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn probe_cls_rejects_unknown_style_labels() {
    let fx = Fixture::synth(&[]);
    let meta = fs::read_to_string(fx.path("data/metadata.csv"))
        .unwrap()
        .replace("genre00-game00,genre00,retro", "genre00-game00,genre00,unknown");
    fs::write(fx.path("data/metadata.csv"), meta).unwrap();
    let out = fx.run("probe-cls", &["--k", "4", "--out", &fx.path("out")]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("unknown style label"), "{}", stderr(&out));
}

#[test]
fn probe_reg_needs_targets_and_a_split() {
    let fx = Fixture::synth(&[]);
    assert_eq!(code(&fx.run("probe-reg", &["--test-split", "fraction:0.2", "--out", &fx.path("o")])), 64);
    let t = fx.path("data/targets.gemb");
    assert_eq!(code(&fx.run("probe-reg", &["--targets", &t, "--test-split", "half", "--out", &fx.path("o")])), 64);
    let out = fx.run(
        "probe-reg",
        &["--targets", &t, "--k", "4", "--test-split", "games:genre00-game02,genre00-game07", "--out", &fx.path("o")],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(fx.root.join("o/probe_reg_genre00_content.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("variable,r2"));
    assert_eq!(csv.lines().count(), 9);
}

#[test]
fn report_merges_three_genres() {
    let fx = Fixture::synth(&["--genres", "3", "--samples-per-game", "15"]);
    let out = fx.run("gap", &["--k", "4", "--out", &fx.path("out")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let out = run(&["report", &fx.path("out"), "--out", &fx.path("report")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(fx.root.join("report/summary.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "genre,space,k,latent,content,style");
    assert_eq!(lines.len(), 4);
    assert!(lines[3].starts_with("genre02,raw,4,"));
}

#[test]
fn tsne_emits_plot_ready_rows() {
    let fx = Fixture::synth(&["--genres", "2", "--games-per-genre", "3", "--samples-per-game", "10"]);
    let out = fx.run(
        "tsne",
        &[
            "--genre",
            "genre01",
            "--perplexity",
            "5",
            "--iterations",
            "300",
            "--embedding",
            "style",
            "--k",
            "4",
            "--out",
            &fx.path("out"),
        ],
    );
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(fx.root.join("out/tsne_genre01_style.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "row,x,y,game_id,style_label");
    assert_eq!(lines.len(), 31);
    assert!(lines[1].starts_with("30,") && lines[1].ends_with(",genre01-game00,retro"));
    assert_eq!(code(&fx.run("tsne", &["--genre", "nope", "--out", &fx.path("out")])), 2);
}

#[test]
fn gap_accepts_extra_embeddings() {
    let fx = Fixture::synth(&["--target-vars", "0"]);
    let extra = fx.path("data/features.gemb");
    let out = fx.run("gap", &["--k", "4", "--extra", &format!("copy={extra}"), "--out", &fx.path("out")]);
    assert!(out.status.success(), "{}", stderr(&out));
    let csv = fs::read_to_string(fx.root.join("out/gap_genre00.csv")).unwrap();
    let latent = csv.lines().nth(1).unwrap().rsplit(',').next().unwrap().to_owned();
    let copy = csv.lines().nth(4).unwrap();
    assert!(copy.starts_with("genre00,copy,raw,4,") && copy.ends_with(&latent));
}

#[test]
fn thread_cap_must_be_positive() {
    let fx = Fixture::synth(&[]);
    let (f, m) = (fx.path("data/features.gemb"), fx.path("data/metadata.csv"));
    let bin = env!("CARGO_BIN_EXE_latent-split");
    let status = |v: &str| {
        Command::new(bin)
            .env("LATENT_SPLIT_THREADS", v)
            .args(["validate", "--features", &f, "--metadata", &m])
            .status()
            .unwrap()
            .code()
            .unwrap()
    };
    assert_eq!(status("2"), 0);
    assert_eq!(status("zero"), 64);
    assert_eq!(status("0"), 64);
}

#[test]
fn help_and_version_exit_cleanly() {
    assert_eq!(code(&run(&["--help"])), 0);
    assert_eq!(code(&run(&["--version"])), 0);
    assert_eq!(code(&run(&[])), 64);
}
