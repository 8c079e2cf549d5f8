#![no_main]

use libfuzzer_sys::fuzz_target;
use pacreg::harness::report::{
    parse_aggregates, parse_bounds, parse_replications, strip_timing, write_aggregates, write_bounds,
    write_replications,
};

fuzz_target!(|data: &[u8]| {
    if let Ok(rows) = parse_replications(data) {
        let mut buf = Vec::new();
        write_replications(&mut buf, &rows).unwrap();
        assert_eq!(parse_replications(&buf[..]).unwrap().len(), rows.len());
    }
    if let Ok(rows) = parse_aggregates(data) {
        let mut buf = Vec::new();
        write_aggregates(&mut buf, &rows).unwrap();
        assert_eq!(parse_aggregates(&buf[..]).unwrap().len(), rows.len());
    }
    if let Ok(rows) = parse_bounds(data) {
        let mut buf = Vec::new();
        write_bounds(&mut buf, &rows).unwrap();
        assert_eq!(parse_bounds(&buf[..]).unwrap().len(), rows.len());
    }
    if let Ok(text) = std::str::from_utf8(data) {
        let _ = strip_timing(text);
    }
});
