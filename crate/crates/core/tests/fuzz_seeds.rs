//! Runs the parsers behind the fuzz targets over the checked-in corpus
//! seeds. Seeds named `invalid-*` must be rejected; all others must parse.

use std::fs;
use std::path::{Path, PathBuf};

use qpscatter::formats::{
    parse_config, parse_layered_rows, parse_layered_table, parse_sampled_grid,
};
use qpscatter::C64;

fn seeds(target: &str) -> Vec<(String, String)> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../../fuzz/corpus")
        .join(target);
    let mut paths: Vec<PathBuf> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| e.unwrap().path())
        .collect();
    paths.sort();
    assert!(!paths.is_empty(), "no seeds in {}", dir.display());
    paths
        .into_iter()
        .map(|p| {
            let name = p.file_name().unwrap().to_string_lossy().into_owned();
            (name, fs::read_to_string(&p).unwrap())
        })
        .collect()
}

fn expect<T, E: std::fmt::Debug>(name: &str, r: Result<T, E>) -> Option<T> {
    if name.starts_with("invalid-") {
        assert!(r.is_err(), "{name} should be rejected");
        None
    } else {
        Some(r.unwrap_or_else(|e| panic!("{name}: {e:?}")))
    }
}

#[test]
fn config_seeds() {
    for (name, text) in seeds("config") {
        if let Some(cfg) = expect(&name, parse_config(&text)) {
            assert!(cfg.medium.is_some() != cfg.medium_file.is_some(), "{name}");
        }
    }
}

#[test]
fn layered_table_seeds() {
    for (name, text) in seeds("layered_table") {
        if let Some(rows) = expect(&name, parse_layered_rows(&text)) {
            let medium = parse_layered_table(&text).unwrap();
            let (lo, hi) = (rows[0], rows[rows.len() - 1]);
            assert!((medium.eval(0.0, -1.0) - lo.1).norm() < 1e-12, "{name}");
            assert!((medium.eval(3.0, 1.0) - hi.1).norm() < 1e-12, "{name}");
        }
    }
}

#[test]
fn sampled_grid_seeds() {
    for (name, text) in seeds("sampled_grid") {
        if let Some(grid) = expect(&name, parse_sampled_grid(&text)) {
            // The interpolant reproduces every sample.
            for k in 0..grid.ny {
                let y = (k as f64 * std::f64::consts::PI / (grid.ny - 1) as f64).cos();
                for i in 0..grid.nx {
                    let x = 2.0 * std::f64::consts::PI * i as f64 / grid.nx as f64;
                    let want: C64 = grid.values[k * grid.nx + i];
                    assert!(
                        (grid.eval(x, y) - want).norm() < 1e-11,
                        "{name} at ({i}, {k})"
                    );
                }
            }
        }
    }
}
