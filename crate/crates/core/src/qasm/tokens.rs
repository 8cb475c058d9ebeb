//! Preprocessing of dense documents into token sequences for sequence models.
//!
//! Headers are dropped and each gate becomes its rounded matrix entries
//! followed by the two register tokens:
//!
//! ```text
//! DenseMatrix(2,0,0.541645,0,-0.038637,0, ... ,0.540171,0) q[0],q[1];
//! 0.5, 0, 0, 0, ..., 0.5, q[0], q[1]
//! ```
//!
//! Rounding works on the decimal text, half away from zero, so `0.25`
//! always becomes `0.3` at one decimal.

use super::{Dialect, Instruction, QasmDocument};
use crate::error::{Error, Result};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum NumberStyle {
    /// Trailing zeros and a bare `.` are dropped: `0.50` → `0.5`, `0.0` → `0`.
    #[default]
    Compact,
    /// Exactly the configured number of decimals.
    Fixed,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TokenOptions {
    pub decimals: u32,
    pub style: NumberStyle,
    /// Also emit imaginary parts (interleaved after each real part).
    pub imaginary: bool,
}

impl Default for TokenOptions {
    fn default() -> Self {
        TokenOptions {
            decimals: 1,
            style: NumberStyle::Compact,
            imaginary: false,
        }
    }
}

impl TokenOptions {
    pub fn with_decimals(decimals: u32) -> Self {
        TokenOptions {
            decimals,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TokenStream {
    /// One token sequence per gate.
    pub lines: Vec<Vec<String>>,
    pub options: TokenOptions,
}

impl TokenStream {
    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.lines.iter().flatten().map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.lines.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// One gate per line, tokens separated by `", "`.
impl fmt::Display for TokenStream {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for line in &self.lines {
            writeln!(f, "{}", line.join(", "))?;
        }
        Ok(())
    }
}

pub fn tokenize(doc: &QasmDocument, options: &TokenOptions) -> Result<TokenStream> {
    if doc.dialect != Dialect::Dense {
        return Err(Error::UnsupportedDialect(
            "tokenization needs DenseMatrix statements".into(),
        ));
    }
    let mut lines = Vec::with_capacity(doc.statements.len());
    for st in &doc.statements {
        let Instruction::Dense { entries, qa, qb } = &st.instruction else {
            unreachable!("dense document holds only dense statements");
        };
        let step = if options.imaginary { 1 } else { 2 };
        let mut line = Vec::with_capacity(32 / step + 2);
        for raw in entries.iter().step_by(step) {
            let rounded = round_text(raw, options.decimals).ok_or_else(|| Error::Parse {
                line: st.line,
                message: format!("`{raw}` is not a plain decimal"),
            })?;
            line.push(styled(&rounded, options.style));
        }
        line.push(format!("q[{qa}]"));
        line.push(format!("q[{qb}]"));
        lines.push(line);
    }
    Ok(TokenStream {
        lines,
        options: *options,
    })
}

/// Round a decimal literal to `decimals` places, half away from zero, and
/// print it with exactly that many places. `-0.0…` loses its sign.
pub fn round_text(raw: &str, decimals: u32) -> Option<String> {
    let raw = raw.trim();
    let (negative, body) = match raw.as_bytes().first()? {
        b'-' => (true, &raw[1..]),
        b'+' => (false, &raw[1..]),
        _ => (false, raw),
    };
    let (mantissa, exponent) = match body.find(['e', 'E']) {
        Some(i) => (&body[..i], body[i + 1..].parse::<i64>().ok()?),
        None => (body, 0),
    };
    let (int_part, frac_part) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part
        .bytes()
        .chain(frac_part.bytes())
        .all(|b| b.is_ascii_digit())
    {
        return None;
    }
    // digits · 10^(point - len): the value with the point `point` digits in.
    let mut digits: Vec<u8> = int_part
        .bytes()
        .chain(frac_part.bytes())
        .map(|b| b - b'0')
        .collect();
    let point = int_part.len() as i64 + exponent;
    let keep = point + decimals as i64;
    if keep < 0 {
        return Some(styled_zero(decimals));
    }
    let keep = keep as usize;
    let round_up = digits.get(keep).is_some_and(|&d| d >= 5);
    digits.resize(keep.max(digits.len()), 0);
    digits.truncate(keep);
    if round_up {
        let mut k = digits.len();
        loop {
            if k == 0 {
                digits.insert(0, 1);
                break;
            }
            k -= 1;
            if digits[k] == 9 {
                digits[k] = 0;
            } else {
                digits[k] += 1;
                break;
            }
        }
    }
    // Now the value is digits · 10^-decimals.
    let decimals = decimals as usize;
    while digits.len() <= decimals {
        digits.insert(0, 0);
    }
    let split = digits.len() - decimals;
    let int_digits = &digits[..split];
    let first_nonzero = int_digits
        .iter()
        .position(|&d| d != 0)
        .unwrap_or(int_digits.len() - 1);
    let mut out = String::new();
    let zero = digits.iter().all(|&d| d == 0);
    if negative && !zero {
        out.push('-');
    }
    out.extend(
        int_digits[first_nonzero..]
            .iter()
            .map(|&d| char::from(b'0' + d)),
    );
    if decimals > 0 {
        out.push('.');
        out.extend(digits[split..].iter().map(|&d| char::from(b'0' + d)));
    }
    Some(out)
}

fn styled_zero(decimals: u32) -> String {
    if decimals == 0 {
        "0".into()
    } else {
        format!("0.{}", "0".repeat(decimals as usize))
    }
}

fn styled(rounded: &str, style: NumberStyle) -> String {
    match style {
        NumberStyle::Fixed => rounded.to_string(),
        NumberStyle::Compact => match rounded.split_once('.') {
            Some((int, frac)) => {
                let frac = frac.trim_end_matches('0');
                if frac.is_empty() {
                    int.to_string()
                } else {
                    format!("{int}.{frac}")
                }
            }
            None => rounded.to_string(),
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qasm::{emit_dense, parse_document};
    use crate::statevec::tests::random_circuit;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rounding_examples() {
        assert_eq!(round_text("0.541645", 1).unwrap(), "0.5");
        assert_eq!(round_text("0.12345", 2).unwrap(), "0.12");
        assert_eq!(round_text("-0.038637", 1).unwrap(), "0.0");
        assert_eq!(round_text("0.25", 1).unwrap(), "0.3");
        assert_eq!(round_text("-0.25", 1).unwrap(), "-0.3");
        assert_eq!(round_text("0.95", 1).unwrap(), "1.0");
        assert_eq!(round_text("-9.96", 1).unwrap(), "-10.0");
        assert_eq!(round_text("0", 1).unwrap(), "0.0");
        assert_eq!(round_text("1", 3).unwrap(), "1.000");
        assert_eq!(round_text(".5", 0).unwrap(), "1");
        assert_eq!(round_text("0.4999", 0).unwrap(), "0");
        assert_eq!(round_text("-0.000000", 2).unwrap(), "0.00");
        assert_eq!(round_text("2.5e-3", 2).unwrap(), "0.00");
        assert_eq!(round_text("5e-3", 2).unwrap(), "0.01");
        assert_eq!(round_text("1.25E1", 0).unwrap(), "13");
        assert_eq!(round_text("1e-40", 3).unwrap(), "0.000");
        for bad in ["", "-", ".", "1.2.3", "abc", "1e", "0x1"] {
            assert!(round_text(bad, 1).is_none(), "{bad}");
        }
    }

    #[test]
    fn styles() {
        assert_eq!(styled("0.0", NumberStyle::Compact), "0");
        assert_eq!(styled("0.50", NumberStyle::Compact), "0.5");
        assert_eq!(styled("-1.00", NumberStyle::Compact), "-1");
        assert_eq!(styled("0.50", NumberStyle::Fixed), "0.50");
        assert_eq!(styled("3", NumberStyle::Compact), "3");
    }

    #[test]
    fn base_dialect_is_unsupported() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let doc = crate::qasm::emit_base(&random_circuit(&mut rng, 3, 2)).unwrap();
        let err = tokenize(&doc, &TokenOptions::default()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedDialect(_)));
    }

    #[test]
    fn shape_of_stream() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let doc = emit_dense(&random_circuit(&mut rng, 4, 7));
        let real = tokenize(&doc, &TokenOptions::default()).unwrap();
        assert_eq!(real.lines.len(), 7);
        assert!(real.lines.iter().all(|l| l.len() == 18));
        let both = tokenize(
            &doc,
            &TokenOptions {
                imaginary: true,
                ..TokenOptions::default()
            },
        )
        .unwrap();
        assert!(both.lines.iter().all(|l| l.len() == 34));
        assert!(real
            .tokens()
            .all(|t| !t.contains("OPENQASM") && !t.contains("qreg")));
        assert_eq!(real.to_string().lines().count(), 7);
    }

    proptest! {
        #[test]
        fn fixed_tokens_have_configured_places(seed in any::<u64>(), decimals in 0u32..5) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let doc = parse_document(emit_dense(&random_circuit(&mut rng, 3, 3)).text()).unwrap();
            let opts = TokenOptions { decimals, style: NumberStyle::Fixed, imaginary: true };
            let stream = tokenize(&doc, &opts).unwrap();
            for t in stream.tokens().filter(|t| !t.starts_with('q')) {
                let places = t.split_once('.').map_or(0, |(_, f)| f.len());
                prop_assert_eq!(places, decimals as usize, "{}", t);
                prop_assert!(!t.starts_with("-0") || t.bytes().any(|b| (b'1'..=b'9').contains(&b)), "{}", t);
            }
        }

        #[test]
        fn text_rounding_matches_exact_arithmetic(m in -10_000_000i64..10_000_000, decimals in 0u32..6) {
            // m · 10^-6 printed exactly, rounded via integer arithmetic.
            let raw = format!("{}{}.{:06}", if m < 0 { "-" } else { "" }, m.abs() / 1_000_000, m.abs() % 1_000_000);
            let scale = 10i64.pow(6 - decimals);
            let q = (m.abs() + scale / 2) / scale;
            let sign = if m < 0 && q != 0 { "-" } else { "" };
            let p = 10i64.pow(decimals);
            let expected = if decimals == 0 {
                format!("{sign}{q}")
            } else {
                format!("{sign}{}.{:0width$}", q / p, q % p, width = decimals as usize)
            };
            prop_assert_eq!(round_text(&raw, decimals).unwrap(), expected);
        }
    }
}
