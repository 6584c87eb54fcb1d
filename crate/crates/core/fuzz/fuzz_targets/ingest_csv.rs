#![no_main]

use attrition_core::ingest::{read_dataset, LoadOptions};
use attrition_core::pipeline::defaults;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let schema = defaults::inputs().schema;
    for options in [LoadOptions::labeled(), LoadOptions::unlabeled()] {
        if let Ok(loaded) = read_dataset(data, &schema, options) {
            assert_eq!(loaded.summary.n_rows, loaded.records.len());
        }
    }
});
