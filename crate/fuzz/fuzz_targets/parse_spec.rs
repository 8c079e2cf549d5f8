#![no_main]

use libfuzzer_sys::fuzz_target;
use pacreg::synthetic::SpecFile;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(spec) = SpecFile::from_toml_str(text) {
        // anything accepted must serialize and parse back to itself
        let again = SpecFile::from_toml_str(&spec.to_toml_string().unwrap()).unwrap();
        assert_eq!(again, spec);
        let _ = spec.law.moments();
    }
});
