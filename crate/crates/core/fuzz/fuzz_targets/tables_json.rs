#![no_main]

use attrition_core::drivers::Phrasebook;
use attrition_core::features::{DemandTable, DimensionTaxonomy};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let _ = DemandTable::from_json_slice(data);
    let _ = DimensionTaxonomy::from_json_slice(data);
    let _ = Phrasebook::from_json_slice(data);
});
