#![no_main]

use fairlead::nn::checkpoint::{decode, encode};
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    let Ok(net) = decode(text) else { return };
    let once = encode(&net);
    assert_eq!(once, encode(&decode(&once).expect("written network parses")));
});
