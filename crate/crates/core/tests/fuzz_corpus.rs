//! Replays the checked-in fuzz corpus through the same checks the fuzz
//! targets run, so regressions show up under plain `cargo test`.

use std::path::PathBuf;

use qestim::geometry::info_geometry;
use qestim::io::{emit_json, parse_report, parse_weight, BoundReport, GeometryReport, MeasurementReport, OracleReport, QmleReport, Report};
use qestim::models::spec::load_model;
use qestim::models::tangent_frame;
use qestim::simulate::TestPowerReport;

fn corpus(target: &str) -> Vec<(String, Vec<u8>)> {
    let dir = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fuzz/corpus").join(target);
    let mut out: Vec<_> = std::fs::read_dir(&dir)
        .unwrap_or_else(|e| panic!("{}: {e}", dir.display()))
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    out.sort();
    assert!(!out.is_empty(), "empty corpus for {target}");
    out
}

#[test]
fn model_spec_corpus() {
    let mut built = 0;
    for (name, data) in corpus("model_spec") {
        let Ok(text) = std::str::from_utf8(&data) else { continue };
        if let Ok((model, theta)) = load_model(text) {
            built += 1;
            if model.dim() <= 64 {
                if let Ok(frame) = tangent_frame(&model, &theta) {
                    let _ = info_geometry(&frame);
                }
            }
        } else {
            assert!(name.contains("missing_comma"), "{name} failed to load");
        }
    }
    assert!(built >= 8);
}

#[test]
fn weight_matrix_corpus() {
    for (name, data) in corpus("weight_matrix") {
        let text = std::str::from_utf8(&data).unwrap();
        match parse_weight(text) {
            Ok(w) => {
                let g = w.matrix();
                assert!(g.iter().all(|x| x.is_finite()), "{name}");
                assert_eq!(g, &g.transpose(), "{name}");
            }
            Err(_) => assert!(name.contains("indefinite"), "{name} rejected"),
        }
    }
}

#[test]
fn huge_weights_stay_finite() {
    let w = parse_weight("1.7e308 1.7e308\n1.7e308 1.7e308\n").unwrap();
    assert!(w.matrix().iter().all(|x| x.is_finite()));
}

fn check<R: Report>(text: &str) -> bool {
    match parse_report::<R>(text) {
        Ok(r) => {
            emit_json(&r).expect("parsed report re-emits");
            true
        }
        Err(_) => false,
    }
}

#[test]
fn reports_corpus() {
    for (name, data) in corpus("reports") {
        let (&tag, rest) = data.split_first().unwrap();
        let text = std::str::from_utf8(rest).unwrap();
        let ok = match tag % 6 {
            0 => check::<GeometryReport>(text),
            1 => check::<BoundReport>(text),
            2 => check::<MeasurementReport>(text),
            3 => check::<OracleReport>(text),
            4 => check::<QmleReport>(text),
            _ => check::<TestPowerReport>(text),
        };
        assert!(ok, "{name} did not parse as its tagged report");
    }
}
