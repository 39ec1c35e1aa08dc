#![no_main]

use libfuzzer_sys::fuzz_target;
use qpscatter::formats::{fit_layered, parse_layered_rows};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let Ok(rows) = parse_layered_rows(text) else {
        return;
    };
    assert!(rows.windows(2).all(|w| w[0].0 < w[1].0));
    assert_eq!((rows[0].0, rows[rows.len() - 1].0), (-1.0, 1.0));
    let _ = fit_layered(&rows);
});
