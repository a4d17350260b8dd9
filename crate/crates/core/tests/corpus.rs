//! Replays the checked-in fuzz corpus through the decoders the fuzz targets
//! exercise. Every seed must decode or fail with an error, never panic, and
//! whatever decodes must survive a write/read cycle.

use std::fs;
use std::path::PathBuf;

use fairlead::harness::run::decode_checkpoint;
use fairlead::harness::RunConfig;
use fairlead::nn::checkpoint::{decode, encode};
use fairlead::solver::ExplicitModel;
use fairlead::table::ValueTable;

fn seeds(target: &str) -> Vec<(PathBuf, String)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fuzz/corpus").join(target);
    let mut out: Vec<(PathBuf, String)> = fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|entry| {
            let path = entry.unwrap().path();
            let text = fs::read_to_string(&path).unwrap();
            (path, text)
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds for {target}");
    out
}

#[test]
fn config_seeds() {
    let mut parsed = 0;
    for (_, text) in seeds("config") {
        if let Ok(cfg) = RunConfig::parse(&text) {
            parsed += 1;
            let _ = cfg.validate();
        }
    }
    assert!(parsed >= 2);
}

#[test]
fn value_table_seeds_round_trip() {
    for (path, text) in seeds("value_table") {
        let table = ValueTable::from_text(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let once = table.to_text();
        assert_eq!(once, ValueTable::from_text(&once).unwrap().to_text(), "{}", path.display());
    }
}

#[test]
fn run_checkpoint_seeds_decode() {
    for (path, text) in seeds("run_checkpoint") {
        let checkpoint = decode_checkpoint(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        for part in &checkpoint.parts {
            ValueTable::from_text(part).unwrap();
        }
    }
}

#[test]
fn explicit_model_seeds_round_trip() {
    let mut parsed = 0;
    for (path, text) in seeds("explicit_model") {
        let Ok(model) = ExplicitModel::from_text(&text) else { continue };
        parsed += 1;
        let once = model.to_text();
        assert_eq!(once, ExplicitModel::from_text(&once).unwrap().to_text(), "{}", path.display());
    }
    assert!(parsed >= 3);
}

#[test]
fn network_seeds_round_trip() {
    let mut parsed = 0;
    for (path, text) in seeds("network_checkpoint") {
        let Ok(net) = decode(&text) else { continue };
        parsed += 1;
        let once = encode(&net);
        assert_eq!(once, encode(&decode(&once).unwrap()), "{}", path.display());
    }
    assert_eq!(parsed, 1);
}
