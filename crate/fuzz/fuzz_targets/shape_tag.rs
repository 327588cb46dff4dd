#![no_main]

use libfuzzer_sys::fuzz_target;
use rotator_core::{ShapeFunction, ShapeKind};

fuzz_target!(|data: &[u8]| {
    let Ok(tag) = std::str::from_utf8(data) else { return };
    let Ok(kind) = tag.parse::<ShapeKind>() else { return };
    assert_eq!(kind.to_string().parse::<ShapeKind>().unwrap(), kind);
    if let Ok(shape) = ShapeFunction::new(kind, 1.0, 1.0) {
        for q in [0.0, 1e-6, 0.3, 0.99, 1.0, 4.0] {
            let _ = shape.eval(q);
        }
    }
});
