#![no_main]

use fairlead::table::ValueTable;
use libfuzzer_sys::fuzz_target;

// Whatever parses must survive a write/read cycle unchanged.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(table) = ValueTable::from_text(text) else { return };
    let once = table.to_text();
    let again = ValueTable::from_text(&once).expect("written table parses");
    assert_eq!(once, again.to_text());
});
