#![no_main]

use libfuzzer_sys::fuzz_target;
use rotator_cli::scenario::parse;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(scn) = parse(text) else { return };
    // the resolved form embedded in reports must parse back to the same scenario
    let again = serde_json::to_string(&scn).unwrap();
    assert_eq!(parse(&again).unwrap(), scn);
});
