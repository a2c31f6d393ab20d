#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(units) = eomsim::io::parse_storage(text, "fuzz") {
            let csv = eomsim::io::storage_to_csv(&units).unwrap();
            let again = eomsim::io::parse_storage(&csv, "again").unwrap();
            assert_eq!(eomsim::io::storage_to_csv(&again).unwrap(), csv);
        }
    }
});
