use std::sync::{Arc, OnceLock};

use lagdir::fd::ScalarField;
use lagdir::geometry::{build_grid, BoundaryData, DomainGrid, DomainSpec};
use lagdir::runner::{exit_code, read_field_csv, write_field_csv, Problem, RunConfig};
use proptest::prelude::*;

fn grid() -> &'static Arc<DomainGrid> {
    static CELL: OnceLock<Arc<DomainGrid>> = OnceLock::new();
    CELL.get_or_init(|| Arc::new(build_grid(&DomainSpec::ellipse([0.3, -0.1], 1.2, 0.9), 0.125).unwrap()))
}

fn finite() -> impl Strategy<Value = f64> {
    prop_oneof![
        prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO,
        -1e3..1e3f64,
    ]
}

const BASE: &str = r#"{
    "domain": {"kind": "ellipse", "center": [0, 0], "semiAxes": [1, 0.8]},
    "grid": {"h": 0.125},
    "phase": {"kind": "constant", "value": 2.0},
    "boundary": {"kind": "preset", "name": "saddle"},
    "solver": {"kind": "continuity"}
}"#;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn field_csv_round_trips_bit_exactly(values in prop::collection::vec(finite(), 1..512)) {
        let g = grid();
        let v: Vec<f64> = (0..g.len()).map(|k| values[k % values.len()]).collect();
        let u = ScalarField::new(g, v, BoundaryData::constant(0.0));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("u.csv");
        write_field_csv(&path, &u).unwrap();
        let back = read_field_csv(&path, g, BoundaryData::constant(0.0)).unwrap();
        for (a, b) in u.values.iter().zip(&back.values) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn invalid_numbers_are_config_errors(
        field in prop::sample::select(vec!["\"h\": 0.125", "\"value\": 2.0", "\"semiAxes\": [1, 0.8]"]),
        bad in prop_oneof![-10.0..=0.0f64, 4.0..100.0f64],
    ) {
        let replacement = match field {
            "\"h\": 0.125" => format!("\"h\": {bad}"),
            "\"value\": 2.0" => format!("\"value\": {}", bad.abs() + 3.2),
            _ => format!("\"semiAxes\": [1, {}]", -bad.abs()),
        };
        let s = BASE.replace(field, &replacement);
        let err = RunConfig::from_json(&s).and_then(|c| Problem::build(&c).map(|_| ())).unwrap_err();
        prop_assert_eq!(exit_code(&err), 1, "{}", err);
    }

    #[test]
    fn arbitrary_text_never_panics(text in ".{0,200}") {
        if let Err(e) = RunConfig::from_json(&text) {
            prop_assert_eq!(exit_code(&e), 1);
        }
    }
}
