#![no_main]

use armctl::log::TrajectoryLog;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok(text) = std::str::from_utf8(data) {
        if let Ok(log) = TrajectoryLog::from_csv_str(text) {
            // whatever parses must survive a write/read cycle unchanged
            let again = log.to_csv_string().expect("parsed logs can be written");
            let back = TrajectoryLog::from_csv_str(&again).expect("written logs parse");
            assert_eq!(back.rows.len(), log.rows.len());
            assert_eq!(back.to_csv_string().unwrap(), again);
        }
    }
});
