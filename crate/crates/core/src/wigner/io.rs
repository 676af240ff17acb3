use super::Spectrum;
use crate::error::{Result, SskError};
use std::io::{BufRead, Write};

/// One eigenvalue per line, decreasing, 17 significant digits.
pub fn write_spectrum_csv<W: Write>(s: &Spectrum, mut out: W) -> Result<()> {
    for l in s.lambdas() {
        write!(out, "{l:.16e}\r\n")?;
    }
    Ok(())
}

pub fn spectrum_csv_string(s: &Spectrum) -> String {
    let mut buf = Vec::new();
    write_spectrum_csv(s, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("ascii output")
}

/// Reads a spectrum written by [`write_spectrum_csv`]. Blank lines and lines
/// starting with `#` are skipped; values are re-sorted on load.
pub fn read_spectrum_csv<R: BufRead>(input: R) -> Result<Spectrum> {
    let mut values = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let v: f64 = t.parse().map_err(|_| {
            SskError::Config(format!("spectrum line {}: cannot parse {t:?}", lineno + 1))
        })?;
        values.push(v);
    }
    Spectrum::new(values)
}
