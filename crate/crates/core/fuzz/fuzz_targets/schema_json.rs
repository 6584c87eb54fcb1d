#![no_main]

use attrition_core::ingest::DatasetSchema;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = DatasetSchema::from_json_slice(data);
});
