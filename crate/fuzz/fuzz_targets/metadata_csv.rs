#![no_main]

use latent_split::dataset::metadata::{parse_metadata, write_metadata};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_metadata(data) {
        let written = write_metadata(&rows).expect("parsed metadata is writable");
        assert_eq!(parse_metadata(&written).expect("written metadata parses"), rows);
    }
});
