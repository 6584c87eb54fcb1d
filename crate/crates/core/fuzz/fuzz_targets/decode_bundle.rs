#![no_main]

use std::path::Path;

use attrition_core::model_store::{decode_bundle, encode_bundle};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(bundle) = decode_bundle(data, Path::new("fuzz")) {
        let bytes = encode_bundle(&bundle).expect("decoded bundle re-encodes");
        decode_bundle(&bytes, Path::new("fuzz")).expect("re-encoded bundle decodes");
    }
});
