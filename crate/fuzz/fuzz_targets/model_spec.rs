#![no_main]

use libfuzzer_sys::fuzz_target;
use rewardtilt::model::BaseModel;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(model) = BaseModel::from_json(text) {
        // accepted models must round-trip through their spec
        let again = model.to_spec().build().expect("spec of a valid model rebuilds");
        assert_eq!(again.dim(), model.dim());
    }
});
