//! Whitespace-separated decimal text shared by the eigenspace and weight files.

use std::fmt::Write;

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub(crate) fn push_decimals(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        write!(out, "{v:.16e}").expect("writing to a String cannot fail");
    }
    out.push('\n');
}

/// Token cursor over a text body.
pub(crate) struct Tokens<'a> {
    inner: std::str::SplitAsciiWhitespace<'a>,
}

impl<'a> Tokens<'a> {
    pub(crate) fn new(text: &'a str) -> Self {
        Tokens {
            inner: text.split_ascii_whitespace(),
        }
    }

    pub(crate) fn next_token(&mut self) -> Option<&'a str> {
        self.inner.next()
    }

    pub(crate) fn next_f64(&mut self) -> Result<f64, String> {
        let tok = self.next_token().ok_or("unexpected end of data")?;
        tok.parse::<f64>()
            .map_err(|_| format!("invalid decimal {tok:?}"))
    }

    pub(crate) fn next_usize(&mut self) -> Result<usize, String> {
        let tok = self.next_token().ok_or("unexpected end of data")?;
        tok.parse::<usize>()
            .map_err(|_| format!("invalid integer {tok:?}"))
    }

    pub(crate) fn read_f64s(&mut self, n: usize) -> Result<Vec<f64>, String> {
        (0..n).map(|_| self.next_f64()).collect()
    }

    pub(crate) fn is_exhausted(&mut self) -> bool {
        self.inner.next().is_none()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn decimals_round_trip_exactly() {
        let values = [0.1, -1.0 / 3.0, f64::MIN_POSITIVE, 1e300, 0.0, -0.0];
        let mut s = String::new();
        push_decimals(&mut s, &values);
        let mut toks = Tokens::new(&s);
        let back = toks.read_f64s(values.len()).unwrap();
        for (a, b) in values.iter().zip(&back) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
        assert!(toks.is_exhausted());
    }
}
