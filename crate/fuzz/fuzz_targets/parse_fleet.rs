#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(fleet) = eomsim::io::parse_fleet(text, "fuzz") {
            let csv = eomsim::io::fleet_to_csv(&fleet).unwrap();
            let again = eomsim::io::parse_fleet(&csv, "again").unwrap();
            assert_eq!(eomsim::io::fleet_to_csv(&again).unwrap(), csv);
        }
    }
});
