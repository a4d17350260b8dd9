//! Text checkpoint for network parameters.
//!
//! ```text
//! # fairlead network v1
//! sizes 4 128 128 2
//! params 17410
//! 0.01 -0.2 ...
//! ```
//!
//! Values are written in shortest round-trip form, any number per line.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::nn::net::Mlp;

pub const NETWORK_HEADER: &str = "# fairlead network v1";

/// Largest parameter count accepted when decoding.
pub const MAX_PARAMS: usize = 50_000_000;

pub fn encode(net: &Mlp) -> String {
    let mut out = String::new();
    writeln!(out, "{NETWORK_HEADER}").unwrap();
    let sizes: Vec<String> = net.sizes().iter().map(|s| s.to_string()).collect();
    writeln!(out, "sizes {}", sizes.join(" ")).unwrap();
    writeln!(out, "params {}", net.param_count()).unwrap();
    for chunk in net.params.chunks(8) {
        let parts: Vec<String> = chunk.iter().map(|p| format!("{p:?}")).collect();
        writeln!(out, "{}", parts.join(" ")).unwrap();
    }
    out
}

pub fn decode(text: &str) -> Result<Mlp> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or_else(|| Error::parse(1, "empty network checkpoint"))?;
    if header != NETWORK_HEADER {
        return Err(if header.starts_with("# fairlead network") {
            Error::Incompatible(format!("unsupported network checkpoint version `{header}`"))
        } else {
            Error::parse(line, format!("expected `{NETWORK_HEADER}`"))
        });
    }
    let (line, sizes_line) = lines.next().ok_or_else(|| Error::parse(line + 1, "missing sizes"))?;
    let sizes = sizes_line
        .strip_prefix("sizes ")
        .ok_or_else(|| Error::parse_key(line, "sizes", "expected `sizes <w>...`"))?
        .split_whitespace()
        .map(|s| s.parse::<usize>().ok().filter(|w| (1..=1 << 20).contains(w)))
        .collect::<Option<Vec<usize>>>()
        .filter(|s| s.len() >= 2)
        .ok_or_else(|| Error::parse_key(line, "sizes", "expected at least two positive widths"))?;
    let expected = sizes
        .windows(2)
        .try_fold(0usize, |acc, w| w[0].checked_mul(w[1])?.checked_add(w[1])?.checked_add(acc))
        .filter(|n| *n <= MAX_PARAMS)
        .ok_or_else(|| Error::parse_key(line, "sizes", "network too large"))?;
    let (line, count_line) = lines.next().ok_or_else(|| Error::parse(line + 1, "missing params"))?;
    let count = count_line
        .strip_prefix("params ")
        .and_then(|c| c.trim().parse::<usize>().ok())
        .ok_or_else(|| Error::parse_key(line, "params", "expected `params <count>`"))?;
    if count != expected {
        return Err(Error::parse_key(line, "params", format!("sizes imply {expected} parameters, header says {count}")));
    }
    let mut params = Vec::with_capacity(expected);
    for (line, text) in lines {
        for token in text.split_whitespace() {
            let v = token
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| Error::parse(line, format!("invalid parameter `{token}`")))?;
            if params.len() == expected {
                return Err(Error::parse(line, "more parameters than declared"));
            }
            params.push(v);
        }
    }
    if params.len() != expected {
        return Err(Error::parse(text.lines().count(), format!("expected {expected} parameters, found {}", params.len())));
    }
    Mlp::from_parts(sizes, params)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::SimRng;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_exact() {
        let mut rng = SimRng::seed_from_u64(2);
        let net = Mlp::standard(5, 7, 3, &mut rng);
        assert_eq!(decode(&encode(&net)).unwrap(), net);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(matches!(decode(""), Err(Error::Parse { .. })));
        assert!(matches!(decode("# fairlead network v9\n"), Err(Error::Incompatible(_))));
        let short = format!("{NETWORK_HEADER}\nsizes 1 1\nparams 2\n0.5\n");
        assert!(matches!(decode(&short), Err(Error::Parse { .. })));
        let wrong = format!("{NETWORK_HEADER}\nsizes 1 1\nparams 3\n0.5 1 2\n");
        assert!(matches!(decode(&wrong), Err(Error::Parse { line: 3, .. })));
        let huge = format!("{NETWORK_HEADER}\nsizes 1000000 1000000\nparams 1\n");
        assert!(decode(&huge).is_err());
    }
}
