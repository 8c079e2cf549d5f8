#![no_main]

use libfuzzer_sys::fuzz_target;
use pacreg::harness::EstimatorId;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(id) = text.parse::<EstimatorId>() {
        let shown = id.to_string();
        assert_eq!(shown.parse::<EstimatorId>().unwrap(), id);
    }
});
