#![no_main]

use eomsim::model::SeriesUnit;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = eomsim::io::parse_series(text, "fuzz", SeriesUnit::Megawatt);
    }
});
