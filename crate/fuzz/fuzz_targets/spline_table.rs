#![no_main]

use libfuzzer_sys::fuzz_target;
use rotator_core::profile::parse_spline_table;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(sp) = parse_spline_table(text) else { return };
    let (a, b) = sp.domain();
    assert!(a < b);
    for k in 0..=8 {
        let x = a + (b - a) * k as f64 / 8.0;
        let _ = sp.eval(x);
    }
    assert!(sp.eval(b + (b - a).max(1.0)).is_err());
});
