#![no_main]

use fairlead::solver::ExplicitModel;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(model) = ExplicitModel::from_text(text) else { return };
    let once = model.to_text();
    let again = ExplicitModel::from_text(&once).expect("written model parses");
    assert_eq!(once, again.to_text());
});
