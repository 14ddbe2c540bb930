use std::path::Path;

use proptest::prelude::*;
use sparse_lqr::files::{from_rows, load_plant, parse_json, save_plant, to_json, to_rows, Rows};
use sparse_lqr::table::{column, float, Table};
use sparse_lqr_core::systems::gen_multiagent;
use sparse_lqr_core::Mat;

fn finite() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

proptest! {
    #[test]
    fn json_matrices_round_trip_bit_exact(
        (r, c, data) in (1usize..6, 1usize..6).prop_flat_map(|(r, c)| (Just(r), Just(c), prop::collection::vec(finite(), r * c)))
    ) {
        let m = Mat::from_vec(r, c, data);
        let text = to_json(&to_rows(&m));
        let rows: Rows = parse_json(&text, Path::new("m.json")).unwrap();
        let back = from_rows(&rows, "M", Some((r, c))).unwrap();
        for (a, b) in m.iter().zip(back.iter()) {
            prop_assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn csv_floats_round_trip_bit_exact(v in finite()) {
        let mut t = Table::new(&["x"]);
        t.row(&[float(v)]);
        let back = column(t.as_str(), "x").unwrap();
        prop_assert_eq!(back[0].to_bits(), v.to_bits());
    }
}

#[test]
fn non_finite_csv_values_are_spelled_out() {
    assert_eq!(float(f64::INFINITY), "inf");
    assert_eq!(float(f64::NEG_INFINITY), "-inf");
    assert_eq!(float(f64::NAN), "nan");
}

#[test]
fn plant_files_round_trip() {
    let dir = tempfile::TempDir::new().unwrap();
    let path = dir.path().join("plant.json");
    let plant = gen_multiagent(3).unwrap();
    save_plant(&plant, &path).unwrap();
    assert_eq!(load_plant(&path).unwrap(), plant);
}

#[test]
fn ragged_rows_name_the_field() {
    let rows: Rows = vec![vec![1.0, 2.0], vec![3.0]];
    let err = from_rows(&rows, "B1", None).unwrap_err().to_string();
    assert!(err.starts_with("B1:"), "{err}");
}
