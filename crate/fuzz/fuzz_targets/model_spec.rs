#![no_main]

use libfuzzer_sys::fuzz_target;
use qestim::geometry::info_geometry;
use qestim::models::spec::load_model;
use qestim::models::tangent_frame;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    // errors are fine, panics are not
    if let Ok((model, theta)) = load_model(text) {
        if model.dim() <= 64 {
            if let Ok(frame) = tangent_frame(&model, &theta) {
                let _ = info_geometry(&frame);
            }
        }
    }
});
