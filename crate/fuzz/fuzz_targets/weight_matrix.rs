#![no_main]

use libfuzzer_sys::fuzz_target;
use qestim::io::parse_weight;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(w) = parse_weight(text) {
        let g = w.matrix();
        assert!(g.is_square());
        assert!(g.iter().all(|x| x.is_finite()));
        assert_eq!(g, &g.transpose());
    }
});
