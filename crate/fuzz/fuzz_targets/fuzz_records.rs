#![no_main]

use fracsemi::experiment::{summary_csv, RunRecords};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = RunRecords::parse(text) {
        let _ = summary_csv(&r);
    }
});
