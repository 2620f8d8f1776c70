#![no_main]

use libfuzzer_sys::fuzz_target;
use rewardtilt::io::parse_vector;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(v) = parse_vector(text) {
        assert!(v.len() > 0);
        assert!(v.iter().all(|x| x.is_finite()));
    }
});
