//! Minimal CSV assembly. Every field we emit is a number or a bare word, so
//! no quoting is needed.

use std::fmt::Write;

/// `%.12g`: 12 significant digits, trailing zeros dropped.
pub fn fmt_g(x: f64) -> String {
    const DIGITS: i32 = 12;
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return "0".into();
    }
    // exponent after rounding to DIGITS significant figures
    let sci = format!("{:.*e}", (DIGITS - 1) as usize, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if !(-4..DIGITS).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{m}e{sign}{:02}", exp.abs())
    } else {
        let decimals = (DIGITS - 1 - exp) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

pub enum Field {
    F(f64),
    I(i64),
    Text(String),
    Empty,
}

impl From<f64> for Field {
    fn from(x: f64) -> Self {
        Field::F(x)
    }
}

impl From<i64> for Field {
    fn from(x: i64) -> Self {
        Field::I(x)
    }
}

impl From<usize> for Field {
    fn from(x: usize) -> Self {
        Field::I(x as i64)
    }
}

impl From<&str> for Field {
    fn from(s: &str) -> Self {
        Field::Text(s.to_string())
    }
}

impl From<Option<f64>> for Field {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Field::Empty, Field::F)
    }
}

pub struct Table {
    text: String,
    columns: usize,
    rows: usize,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Table {
            text: format!("{header}\n"),
            columns: header.split(',').count(),
            rows: 0,
        }
    }

    pub fn row(&mut self, fields: Vec<Field>) {
        assert_eq!(fields.len(), self.columns, "row width");
        for (i, f) in fields.into_iter().enumerate() {
            if i > 0 {
                self.text.push(',');
            }
            match f {
                Field::F(x) => self.text.push_str(&fmt_g(x)),
                Field::I(n) => write!(self.text, "{n}").unwrap(),
                Field::Text(s) => self.text.push_str(&s),
                Field::Empty => {}
            }
        }
        self.text.push('\n');
        self.rows += 1;
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn as_str(&self) -> &str {
        &self.text
    }

    pub fn into_string(self) -> String {
        self.text
    }
}
