#![no_main]
use libfuzzer_sys::fuzz_target;

use twoscale::fem::meshio::{read_field, read_mesh, write_field, write_mesh};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(mesh) = read_mesh(text) {
        let back = read_mesh(&write_mesh(&mesh)).expect("written mesh parses");
        assert_eq!(back.triangles, mesh.triangles);
        assert_eq!(back.boundary, mesh.boundary);
    }
    if let Ok(field) = read_field(text) {
        let back = read_field(&write_field(&field)).expect("written field parses");
        assert_eq!(back.name, field.name);
        assert_eq!(back.values.len(), field.values.len());
    }
});
