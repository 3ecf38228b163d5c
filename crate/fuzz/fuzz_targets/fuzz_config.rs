#![no_main]

use fracsemi::config::ExperimentConfig;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(cfg) = ExperimentConfig::from_toml_str(text) {
        // Anything accepted must survive a round trip.
        let again = cfg.to_toml_string().expect("serialize accepted config");
        ExperimentConfig::from_toml_str(&again).expect("reparse accepted config");
    }
});
