//! Replays the fuzz seed corpora through the same round-trip properties the
//! fuzz targets assert, and extends them with structured random inputs.

use std::fs;
use std::path::PathBuf;

use latent_split::dataset::metadata::{parse_metadata, parse_target_names, write_metadata, write_target_names};
use latent_split::dataset::{gemb, SampleMetadata, StyleLabel};
use latent_split::metrics::{parse_gap_csv, write_gap_csv, GapRow, Space};
use proptest::prelude::*;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut files: Vec<_> =
        fs::read_dir(&dir).unwrap_or_else(|e| panic!("{}: {e}", dir.display())).map(|e| e.unwrap().path()).collect();
    files.sort();
    assert!(!files.is_empty(), "empty corpus {target}");
    files.into_iter().map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap())).collect()
}

fn gemb_property(data: &[u8]) -> bool {
    match gemb::decode_matrix(data) {
        Ok(m) => gemb::encode(&m).unwrap() == data,
        Err(_) => false,
    }
}

fn metadata_property(data: &[u8]) -> bool {
    match parse_metadata(data) {
        Ok(rows) => parse_metadata(&write_metadata(&rows).unwrap()).unwrap() == rows,
        Err(_) => false,
    }
}

fn names_property(data: &[u8]) -> bool {
    match parse_target_names(data) {
        Ok(names) => parse_target_names(&write_target_names(&names).unwrap()).unwrap() == names,
        Err(_) => false,
    }
}

fn gap_property(data: &[u8]) -> bool {
    match parse_gap_csv(data) {
        Ok(rows) => parse_gap_csv(&write_gap_csv(&rows).unwrap()).unwrap() == rows,
        Err(_) => false,
    }
}

#[test]
fn seed_corpora_round_trip_or_reject() {
    let cases: [(&str, fn(&[u8]) -> bool, &[&str]); 4] = [
        ("gemb_decode", gemb_property, &["valid_1x1", "valid_2x3"]),
        // game/genre consistency is checked at load time, not by the parser
        ("metadata_csv", metadata_property, &["header_only", "inconsistent_genre", "unknown_label", "valid"]),
        ("target_names_csv", names_property, &["valid"]),
        ("gap_csv", gap_property, &["valid"]),
    ];
    for (target, property, accepted) in cases {
        for (name, bytes) in corpus(target) {
            assert_eq!(property(&bytes), accepted.contains(&name.as_str()), "{target}/{name}");
        }
    }
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9 _,\"'./-]{1,12}".prop_filter("non-blank", |s| !s.trim().is_empty())
}

proptest! {
    #[test]
    fn metadata_round_trips(rows in proptest::collection::vec((text(), 0usize..4, proptest::option::of(text())), 1..20)) {
        let meta: Vec<SampleMetadata> = rows
            .into_iter()
            .map(|(game, style, frame)| SampleMetadata {
                genre_id: format!("genre-{game}"),
                game_id: game,
                style_label: [StyleLabel::Retro, StyleLabel::Modern, StyleLabel::Photoreal, StyleLabel::Unknown][style],
                source_frame: frame,
            })
            .collect();
        let bytes = write_metadata(&meta).unwrap();
        prop_assert_eq!(parse_metadata(&bytes).unwrap(), meta);
    }

    #[test]
    fn target_names_round_trip(names in proptest::collection::vec(text(), 1..10)) {
        prop_assert_eq!(parse_target_names(&write_target_names(&names).unwrap()).unwrap(), names);
    }

    #[test]
    fn gap_rows_round_trip(rows in proptest::collection::vec((text(), text(), any::<bool>(), 1usize..300, -1.0f64..=1.0), 0..10)) {
        let rows: Vec<GapRow> = rows
            .into_iter()
            .map(|(genre, variant, tsne, k, s)| GapRow {
                genre,
                variant,
                space: if tsne { Space::Tsne2d } else { Space::Raw },
                k,
                mean_silhouette: s,
            })
            .collect();
        prop_assert_eq!(parse_gap_csv(&write_gap_csv(&rows).unwrap()).unwrap(), rows);
    }
}
