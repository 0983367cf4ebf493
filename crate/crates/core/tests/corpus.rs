//! The bundled model files match the built-in generators and survive a
//! print/parse round trip.

use std::path::PathBuf;

use pbcheck_core::lang::{parse, print_machine, typecheck};
use pbcheck_core::models::{controller_source, faulty_source, loop_source, mincut_source, ControllerParams};
use pbcheck_core::scalar::ratio;

fn corpus(name: &str) -> String {
    let p = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("models").join(name);
    std::fs::read_to_string(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()))
}

fn golden() -> Vec<(&'static str, String)> {
    vec![
        ("mincut.pbm", mincut_source(10, false)),
        ("mincut_bug.pbm", mincut_source(3, true)),
        ("controller.pbm", controller_source(&ControllerParams::default())),
        ("loop.pbm", loop_source()),
        ("faulty.pbm", faulty_source(&ratio(1, 2), 10, true)),
    ]
}

#[test]
fn files_match_generators() {
    for (name, src) in golden() {
        let file = parse(&corpus(name)).unwrap_or_else(|d| panic!("{name}: {d:?}"));
        assert!(typecheck(&file).is_empty(), "{name}");
        assert_eq!(file, parse(&src).unwrap(), "{name}");
    }
}

#[test]
fn printing_round_trips() {
    for (name, _) in golden() {
        let m = parse(&corpus(name)).unwrap();
        let printed = print_machine(&m);
        let back = parse(&printed).unwrap_or_else(|d| panic!("{name}: {d:?}\n{printed}"));
        assert_eq!(print_machine(&back), printed, "{name}");
    }
}

#[test]
fn bad_probability_is_rejected_with_position() {
    let src = corpus("faulty.pbm").replace("const p = 1/2", "const p = 1.5");
    let err = parse(&src).unwrap_err();
    assert!(err.iter().any(|d| d.message.contains("probability out of range") && d.line > 0), "{err:?}");
}

#[test]
fn unknown_symbol_in_expectations_is_named() {
    let src = corpus("loop.pbm").replace("x / 2", "y / 2");
    let msgs: Vec<String> = match parse(&src) {
        Err(d) => d.iter().map(|d| d.to_string()).collect(),
        Ok(m) => typecheck(&m).iter().map(|d| d.to_string()).collect(),
    };
    assert!(msgs.iter().any(|m| m.contains("`y`")), "{msgs:?}");
}
