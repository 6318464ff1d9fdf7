//! Replays the checked-in fuzz seeds through the fuzz-target properties, plus
//! every truncation of each seed, which must be rejected or handled without a
//! panic.

use std::path::PathBuf;

use twoscale::cell::{decode_correctors, encode_correctors};
use twoscale::fem::meshio::{read_field, read_mesh, write_field, write_mesh};
use twoscale::harness::{ExperimentConfig, SuiteConfig};

fn seeds(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<(String, Vec<u8>)> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "no seeds in {}", dir.display());
    out
}

fn config_property(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let mut parsed = false;
    if let Ok(cfg) = ExperimentConfig::from_toml(text) {
        let again = ExperimentConfig::from_toml(&cfg.to_toml()).expect("serialized config parses");
        assert_eq!(cfg.to_toml(), again.to_toml());
        parsed = true;
    }
    parsed | SuiteConfig::from_toml(text).is_ok()
}

fn mesh_property(data: &[u8]) -> bool {
    let Ok(text) = std::str::from_utf8(data) else { return false };
    let mut parsed = false;
    if let Ok(mesh) = read_mesh(text) {
        let back = read_mesh(&write_mesh(&mesh)).expect("written mesh parses");
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.boundary, mesh.boundary);
        parsed = true;
    }
    if let Ok(field) = read_field(text) {
        let back = read_field(&write_field(&field)).expect("written field parses");
        assert_eq!(back.name, field.name);
        assert_eq!(back.values, field.values);
        parsed = true;
    }
    parsed
}

fn dump_property(data: &[u8]) -> bool {
    match decode_correctors(data) {
        Ok(set) => {
            let bytes = encode_correctors(&set);
            let again = decode_correctors(&bytes).expect("encoded dump decodes");
            assert_eq!(encode_correctors(&again), bytes);
            true
        }
        Err(_) => false,
    }
}

fn replay(target: &str, property: fn(&[u8]) -> bool) {
    for (name, data) in seeds(target) {
        assert!(property(&data), "seed {target}/{name} no longer parses");
        let step = (data.len() / 64).max(1);
        for cut in (0..data.len()).step_by(step) {
            property(&data[..cut]);
        }
    }
}

#[test]
fn config_seeds() {
    replay("config_toml", config_property);
}

#[test]
fn mesh_seeds() {
    replay("mesh_text", mesh_property);
}

#[test]
fn corrector_dump_seeds() {
    replay("corrector_dump", dump_property);
}
