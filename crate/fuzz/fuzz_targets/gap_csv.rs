#![no_main]

use latent_split::metrics::{parse_gap_csv, write_gap_csv};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_gap_csv(data) {
        let written = write_gap_csv(&rows).expect("parsed rows are writable");
        assert_eq!(parse_gap_csv(&written).expect("written rows parse"), rows);
    }
});
