#![no_main]

use libfuzzer_sys::fuzz_target;
use qestim::io::{emit_json, parse_report, BoundReport, GeometryReport, MeasurementReport, OracleReport, QmleReport, Report};
use qestim::simulate::TestPowerReport;

fn check<R: Report>(text: &str) {
    // anything that parses must survive re-emission
    if let Ok(r) = parse_report::<R>(text) {
        emit_json(&r).expect("parsed report re-emits");
    }
}

fuzz_target!(|data: &[u8]| {
    let Some((&tag, rest)) = data.split_first() else { return };
    let Ok(text) = std::str::from_utf8(rest) else { return };
    match tag % 6 {
        0 => check::<GeometryReport>(text),
        1 => check::<BoundReport>(text),
        2 => check::<MeasurementReport>(text),
        3 => check::<OracleReport>(text),
        4 => check::<QmleReport>(text),
        _ => check::<TestPowerReport>(text),
    }
});
