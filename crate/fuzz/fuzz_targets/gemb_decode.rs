#![no_main]

use latent_split::dataset::gemb;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    // Anything that decodes must re-encode to the same bytes.
    if let Ok(m) = gemb::decode_matrix(data) {
        let bytes = gemb::encode(&m).expect("decoded values fit in f32");
        assert_eq!(bytes, data);
    }
});
