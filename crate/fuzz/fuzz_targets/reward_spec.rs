#![no_main]

use libfuzzer_sys::fuzz_target;
use rewardtilt::rewards::RewardSpec;
use rewardtilt::Vector;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(r) = RewardSpec::from_json(text) {
        if r.dim() <= 64 {
            let _ = r.eval(&Vector::zeros(r.dim()));
            let _ = r.curvature();
        }
    }
});
