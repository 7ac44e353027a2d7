//! Helpers for the versioned text artifact formats (codec, model, network).

use crate::{Error, Result};

/// Escape a string so it survives as a single whitespace-free token on a
/// line-oriented format. Shared by every table the tools read or write, so
/// an id round-trips identically through edge lists, manifests, and
/// prediction tables.
pub fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            ' ' => out.push_str("\\s"),
            other => out.push(other),
        }
    }
    if out.is_empty() {
        out.push_str("\\e");
    }
    out
}

/// Inverse of [`escape`].
pub fn unescape(s: &str) -> Result<String> {
    if s == "\\e" {
        return Ok(String::new());
    }
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            Some('s') => out.push(' '),
            Some('e') => {}
            other => {
                return Err(Error::Format(format!(
                    "bad escape sequence '\\{}'",
                    other.map(String::from).unwrap_or_default()
                )))
            }
        }
    }
    Ok(out)
}

/// Bit-exact float serialization: the raw IEEE-754 bits in hex.
pub(crate) fn f64_to_hex(v: f64) -> String {
    format!("{:016x}", v.to_bits())
}

pub(crate) fn f64_from_hex(s: &str) -> Result<f64> {
    u64::from_str_radix(s, 16)
        .map(f64::from_bits)
        .map_err(|_| Error::Format(format!("bad float bits '{s}'")))
}
