#![no_main]

use libfuzzer_sys::fuzz_target;
use pacreg::harness::{parse_dataset_csv, write_dataset_csv};

fuzz_target!(|data: &[u8]| {
    if let Ok(ds) = parse_dataset_csv(data) {
        assert!(ds.outputs().iter().all(|y| y.is_finite()));
        if !ds.is_empty() {
            let mut buf = Vec::new();
            write_dataset_csv(&mut buf, &ds).unwrap();
            assert_eq!(parse_dataset_csv(&buf[..]).unwrap(), ds);
        }
    }
});
