//! Replays the fuzz corpus and feeds arbitrary input to every parser.

use std::path::Path;

use proptest::prelude::*;

use rotator_cli::scenario::parse;
use rotator_core::profile::{parse_spline_table, PhaseProfile, ProfileTag};
use rotator_core::{ShapeFunction, ShapeKind};

fn check_scenario(text: &str) -> bool {
    let Ok(scn) = parse(text) else { return false };
    let again = serde_json::to_string(&scn).unwrap();
    assert_eq!(parse(&again).unwrap(), scn);
    true
}

fn check_shape(tag: &str) -> bool {
    let Ok(kind) = tag.parse::<ShapeKind>() else { return false };
    assert_eq!(kind.to_string().parse::<ShapeKind>().unwrap(), kind);
    if let Ok(shape) = ShapeFunction::new(kind, 1.0, 1.0) {
        for q in [0.0, 1e-6, 0.3, 0.99, 1.0, 4.0] {
            let _ = shape.eval(q);
        }
    }
    true
}

fn check_profile(tag: &str) -> bool {
    let Ok(parsed) = tag.parse::<ProfileTag>() else { return false };
    if !matches!(parsed, ProfileTag::Spline(_)) {
        let p = PhaseProfile::from_tag(tag, None).unwrap();
        for t in [0.0, 0.5, 10.0, -3.0] {
            let _ = p.eval(t);
        }
    }
    true
}

fn check_spline(text: &str) -> bool {
    let Ok(sp) = parse_spline_table(text) else { return false };
    let (a, b) = sp.domain();
    assert!(a < b);
    for k in 0..=8 {
        let _ = sp.eval(a + (b - a) * k as f64 / 8.0);
    }
    assert!(sp.eval(b + (b - a).max(1.0)).is_err());
    true
}

#[test]
fn corpus_seeds_are_accepted() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus");
    let targets: [(&str, fn(&str) -> bool); 4] = [
        ("scenario_json", check_scenario),
        ("shape_tag", check_shape),
        ("profile_tag", check_profile),
        ("spline_table", check_spline),
    ];
    for (dir, check) in targets {
        let mut n = 0;
        for e in std::fs::read_dir(root.join(dir)).unwrap() {
            let p = e.unwrap().path();
            let text = std::fs::read_to_string(&p).unwrap();
            assert!(check(&text), "seed {} rejected", p.display());
            n += 1;
        }
        assert!(n >= 3, "{dir}: only {n} seeds");
    }
}

proptest! {
    #[test]
    fn shape_tags_never_panic(s in "(fundamental[+-]|sqrt_poly:a=|custom:|smooth|rational_sqrt)?[-0-9.,;=a-z+e]{0,24}") {
        check_shape(&s);
    }

    #[test]
    fn profile_tags_never_panic(s in "(linear|modulated|spline)?:?[-0-9.,=a-z ]{0,40}") {
        check_profile(&s);
    }

    #[test]
    fn spline_tables_never_panic(rows in proptest::collection::vec((-1e3..1e3f64, -1e3..1e3f64), 0..12), junk in "[#, a-z0-9.\n-]{0,12}") {
        let mut text: String = rows.iter().map(|(t, y)| format!("{t} {y}\n")).collect();
        text.push_str(&junk);
        check_spline(&text);
    }

    #[test]
    fn scenario_documents_never_panic(s in "\\{[\"a-z_:, 0-9.\\[\\]{}+-]{0,80}\\}") {
        check_scenario(&s);
    }

    #[test]
    fn scenario_numbers_round_trip(m in 1e-3..1e3f64, l in 1e-3..1e3f64, count in 1usize..50, qmax in 0.01..0.99f64) {
        let text = format!(
            r#"{{"version": 1, "task": "hessian", "model": {{"type": "rotator", "shape": "smooth", "m": {m}, "l": {l}}},
            "sampling": {{"count": {count}, "q_max": {qmax}}}}}"#
        );
        prop_assert!(check_scenario(&text));
    }
}
