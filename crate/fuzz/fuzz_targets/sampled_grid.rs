#![no_main]

use libfuzzer_sys::fuzz_target;
use qpscatter::formats::parse_sampled_grid;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(grid) = parse_sampled_grid(text) {
        assert_eq!(grid.values.len(), grid.nx * grid.ny);
        if grid.values.len() <= 4096 {
            let _ = grid.eval(1.0, 0.25);
        }
    }
});
