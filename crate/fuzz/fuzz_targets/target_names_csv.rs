#![no_main]

use latent_split::dataset::metadata::{parse_target_names, write_target_names};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(names) = parse_target_names(data) {
        let written = write_target_names(&names).expect("parsed names are writable");
        assert_eq!(parse_target_names(&written).expect("written names parse"), names);
    }
});
