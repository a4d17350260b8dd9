#![no_main]

use fairlead::harness::run::decode_checkpoint;
use fairlead::table::ValueTable;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(checkpoint) = decode_checkpoint(text) else { return };
    for part in &checkpoint.parts {
        let _ = ValueTable::from_text(part);
    }
});
