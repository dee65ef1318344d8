use std::fmt::Write as _;
use std::fs;
use std::io::{self, Write};
use std::path::Path;

use anyhow::{Context, Result};

/// `%.12g`: twelve significant digits, trailing zeros trimmed, scientific
/// notation below `1e-4` and from `1e12`.
pub fn fmt_g(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{v:.11e}");
    let (mantissa, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("exponent");
    if !(-4..12).contains(&exp) {
        let m = trim_zeros(mantissa);
        let sign = if exp < 0 { '-' } else { '+' };
        return format!("{m}e{sign}{:02}", exp.abs());
    }
    let decimals = (11 - exp).max(0) as usize;
    trim_zeros(&format!("{v:.decimals$}"))
}

fn trim_zeros(s: &str) -> String {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    } else {
        s.to_string()
    }
}

/// Output text with a `#` metadata header.
#[derive(Debug, Default)]
pub struct Document {
    text: String,
}

impl Document {
    pub fn new(command: &str) -> Self {
        let mut d = Self::default();
        d.comment(&format!("qsdc {} {command}", env!("CARGO_PKG_VERSION")));
        d
    }

    pub fn comment(&mut self, line: &str) {
        let _ = writeln!(self.text, "# {line}");
    }

    pub fn meta(&mut self, key: &str, value: impl std::fmt::Display) {
        let _ = writeln!(self.text, "# {key}={value}");
    }

    pub fn row<S: AsRef<str>>(&mut self, fields: &[S]) {
        let line: Vec<&str> = fields.iter().map(AsRef::as_ref).collect();
        let _ = writeln!(self.text, "{}", line.join(","));
    }

    pub fn raw(&mut self, text: &str) {
        self.text.push_str(text);
    }

    /// Writes to `out`, or to stdout when no path is given.
    pub fn emit(&self, out: Option<&Path>) -> Result<()> {
        match out {
            Some(p) => fs::write(p, &self.text).with_context(|| format!("writing {}", p.display())),
            None => {
                let mut stdout = io::stdout().lock();
                stdout.write_all(self.text.as_bytes())?;
                Ok(stdout.flush()?)
            }
        }
    }
}
