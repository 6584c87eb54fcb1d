#![no_main]

use attrition_core::pipeline::parse_candidates;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = parse_candidates(data);
});
