#![no_main]

use libfuzzer_sys::fuzz_target;
use rotator_core::profile::{PhaseProfile, ProfileTag};

fuzz_target!(|data: &[u8]| {
    let Ok(tag) = std::str::from_utf8(data) else { return };
    let Ok(parsed) = tag.parse::<ProfileTag>() else { return };
    // spline tags name a file; only the analytic kinds are evaluated here
    if matches!(parsed, ProfileTag::Spline(_)) {
        return;
    }
    let p = PhaseProfile::from_tag(tag, None).unwrap();
    for t in [0.0, 0.5, 10.0, -3.0] {
        let _ = p.eval(t);
    }
    let _ = p.check_admissible(1.0, &[0.0, 1.0, 2.0]);
});
