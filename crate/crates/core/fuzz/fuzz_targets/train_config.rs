#![no_main]

use attrition_core::pipeline::TrainConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(config) = TrainConfig::from_json_slice(data) {
        let _ = config.validate();
    }
});
