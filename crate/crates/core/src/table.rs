//! Tabular value storage with a portable text format.
//!
//! A table maps `(state key, action)` to a vector of `width` reals; agents
//! use width 1 and the mediator one entry per agent. Missing entries read
//! as zero.
//!
//! Text format:
//!
//! ```text
//! # fairlead value table v1
//! actions 3
//! width 2
//! 17 0 1.5 -2
//! ```

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const TABLE_HEADER: &str = "# fairlead value table v1";

#[derive(Clone, Debug, PartialEq)]
pub struct ValueTable {
    actions: usize,
    width: usize,
    rows: HashMap<u64, Vec<f64>>,
    zeros: Vec<f64>,
}

impl ValueTable {
    pub fn new(actions: usize, width: usize) -> Self {
        assert!(actions > 0 && width > 0, "tables need at least one action and one value");
        Self {
            actions,
            width,
            rows: HashMap::new(),
            zeros: vec![0.0; actions * width],
        }
    }

    pub fn actions(&self) -> usize {
        self.actions
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Number of stored state rows.
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// All `actions × width` values of a state, zero if unseen.
    pub fn row(&self, key: u64) -> &[f64] {
        self.rows.get(&key).map(Vec::as_slice).unwrap_or(&self.zeros)
    }

    pub fn get(&self, key: u64, action: usize) -> &[f64] {
        let w = self.width;
        &self.row(key)[action * w..(action + 1) * w]
    }

    pub fn scalar(&self, key: u64, action: usize) -> f64 {
        self.get(key, action)[0]
    }

    pub fn get_mut(&mut self, key: u64, action: usize) -> &mut [f64] {
        let w = self.width;
        let zeros = &self.zeros;
        let row = self.rows.entry(key).or_insert_with(|| zeros.clone());
        &mut row[action * w..(action + 1) * w]
    }

    pub fn set(&mut self, key: u64, action: usize, values: &[f64]) {
        assert_eq!(values.len(), self.width, "value width mismatch");
        self.get_mut(key, action).copy_from_slice(values);
    }

    /// Largest scalar value over actions (width-1 tables).
    pub fn max_scalar(&self, key: u64) -> f64 {
        self.row(key)
            .iter()
            .step_by(self.width)
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Stored keys in ascending order.
    pub fn keys(&self) -> Vec<u64> {
        let mut keys: Vec<u64> = self.rows.keys().copied().collect();
        keys.sort_unstable();
        keys
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "{TABLE_HEADER}").unwrap();
        writeln!(out, "actions {}", self.actions).unwrap();
        writeln!(out, "width {}", self.width).unwrap();
        for key in self.keys() {
            for a in 0..self.actions {
                write!(out, "{key} {a}").unwrap();
                for v in self.get(key, a) {
                    write!(out, " {v:?}").unwrap();
                }
                out.push('\n');
            }
        }
        out
    }

    /// Parses the text format. Line numbers in errors are one-based and
    /// relative to `text`.
    pub fn from_text(text: &str) -> Result<Self> {
        Self::parse_lines(text.lines().enumerate().map(|(i, l)| (i + 1, l)))
    }

    pub(crate) fn parse_lines<'a, I>(mut lines: I) -> Result<Self>
    where
        I: Iterator<Item = (usize, &'a str)>,
    {
        let (line, header) = next_content(&mut lines).ok_or_else(|| Error::parse(1, "empty value table"))?;
        if header.trim() != TABLE_HEADER {
            return Err(Error::parse(line, format!("expected `{TABLE_HEADER}`")));
        }
        let actions = dimension(&mut lines, "actions", line)?;
        let width = dimension(&mut lines, "width", line)?;
        if actions.saturating_mul(width) > 1 << 20 {
            return Err(Error::parse(line, "table rows too wide"));
        }
        let mut table = Self::new(actions, width);
        for (line, text) in lines {
            let text = text.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let mut parts = text.split_whitespace();
            let key = parts
                .next()
                .and_then(|k| k.parse::<u64>().ok())
                .ok_or_else(|| Error::parse(line, "invalid state key"))?;
            let action = parts
                .next()
                .and_then(|a| a.parse::<usize>().ok())
                .filter(|a| *a < actions)
                .ok_or_else(|| Error::parse(line, "invalid action index"))?;
            let values = parts
                .map(|v| v.parse::<f64>().ok().filter(|x| x.is_finite()))
                .collect::<Option<Vec<f64>>>()
                .ok_or_else(|| Error::parse(line, "invalid value"))?;
            if values.len() != width {
                return Err(Error::parse(line, format!("expected {width} values, got {}", values.len())));
            }
            table.set(key, action, &values);
        }
        Ok(table)
    }
}

fn next_content<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Option<(usize, &'a str)> {
    lines.find(|(_, l)| !l.trim().is_empty())
}

fn dimension<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>, name: &str, after: usize) -> Result<usize> {
    let (line, text) =
        next_content(lines).ok_or_else(|| Error::parse_key(after + 1, name, "missing dimension line"))?;
    let mut parts = text.split_whitespace();
    if parts.next() != Some(name) {
        return Err(Error::parse_key(line, name, format!("expected `{name} <count>`")));
    }
    let value = parts
        .next()
        .and_then(|v| v.parse::<usize>().ok())
        .filter(|v| (1..=1 << 20).contains(v))
        .ok_or_else(|| Error::parse_key(line, name, "expected a positive count"))?;
    if parts.next().is_some() {
        return Err(Error::parse_key(line, name, "trailing tokens"));
    }
    Ok(value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn absent_entries_read_zero() {
        let t = ValueTable::new(3, 2);
        assert_eq!(t.get(42, 1), &[0.0, 0.0]);
        assert_eq!(t.len(), 0);
    }

    #[test]
    fn set_and_get() {
        let mut t = ValueTable::new(2, 1);
        t.set(5, 1, &[3.5]);
        assert_eq!(t.scalar(5, 1), 3.5);
        assert_eq!(t.scalar(5, 0), 0.0);
        assert_eq!(t.max_scalar(5), 3.5);
    }

    #[test]
    fn text_round_trip() {
        let mut t = ValueTable::new(2, 2);
        t.set(9, 0, &[1.0 / 3.0, -2.0]);
        t.set(1, 1, &[1e-300, 7.25]);
        let text = t.to_text();
        assert!(text.starts_with(TABLE_HEADER));
        assert_eq!(ValueTable::from_text(&text).unwrap(), t);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let bad = format!("{TABLE_HEADER}\nactions 2\nwidth 1\n0 0 1.0\n0 5 1.0\n");
        match ValueTable::from_text(&bad) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 5),
            other => panic!("unexpected {other:?}"),
        }
        assert!(ValueTable::from_text("").is_err());
        assert!(ValueTable::from_text("# other\n").is_err());
        let wrong_width = format!("{TABLE_HEADER}\nactions 1\nwidth 2\n0 0 1.0\n");
        assert!(ValueTable::from_text(&wrong_width).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_exact(entries in proptest::collection::vec((any::<u64>(), 0usize..3, -1e6f64..1e6, -1e6f64..1e6), 0..20)) {
            let mut t = ValueTable::new(3, 2);
            for (k, a, x, y) in entries {
                t.set(k, a, &[x, y]);
            }
            prop_assert_eq!(ValueTable::from_text(&t.to_text()).unwrap(), t);
        }
    }
}
