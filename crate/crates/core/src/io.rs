//! CSV helpers shared by the exporters and the CLI.
//!
//! Dialect: comma separated, one header row, `.` decimal separator, floats
//! written with 17 significant digits so that every value round-trips.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Formats a float with 17 significant digits (scientific notation).
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        return "NaN".to_string();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    format!("{x:.16e}")
}

/// Row-by-row reader for numeric CSV with a header row. Rows are yielded as
/// they arrive, so the reader works on unbounded streams. Errors carry the
/// 1-based line number of the offending row.
pub struct NumericCsvReader<R: Read> {
    inner: csv::Reader<R>,
    header: Vec<String>,
    record: csv::StringRecord,
}

impl<R: Read> NumericCsvReader<R> {
    pub fn new(reader: R) -> Result<Self> {
        let mut inner =
            csv::ReaderBuilder::new().has_headers(true).comment(Some(b'#')).trim(csv::Trim::All).from_reader(reader);
        let header = inner
            .headers()
            .map_err(|e| Error::data(format!("bad CSV header: {e}")))?
            .iter()
            .map(str::to_string)
            .collect();
        Ok(Self { inner, header, record: csv::StringRecord::new() })
    }

    pub fn header(&self) -> &[String] {
        &self.header
    }
}

impl<R: Read> Iterator for NumericCsvReader<R> {
    type Item = Result<Vec<f64>>;

    fn next(&mut self) -> Option<Self::Item> {
        match self.inner.read_record(&mut self.record) {
            Ok(false) => None,
            Err(e) => {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Some(Err(Error::data(format!("line {line}: {e}"))))
            }
            Ok(true) => Some(parse_record(&self.record)),
        }
    }
}

fn parse_record(rec: &csv::StringRecord) -> Result<Vec<f64>> {
    let line = rec.position().map(|p| p.line()).unwrap_or(0);
    let row = rec
        .iter()
        .enumerate()
        .map(|(col, s)| {
            s.parse::<f64>().map_err(|_| Error::data(format!("line {line}, column {}: not a number: {s:?}", col + 1)))
        })
        .collect::<Result<Vec<f64>>>()?;
    if let Some(bad) = row.iter().position(|v| !v.is_finite()) {
        return Err(Error::data(format!("line {line}, column {}: non-finite value", bad + 1)));
    }
    Ok(row)
}

/// Reads a whole numeric CSV: header names and rows.
pub fn read_numeric_csv<R: Read>(reader: R) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let mut rdr = NumericCsvReader::new(reader)?;
    let rows = rdr.by_ref().collect::<Result<Vec<_>>>()?;
    Ok((rdr.header, rows))
}

/// Writes a header plus float rows.
pub fn write_rows<W: Write>(mut w: W, header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> Result<()> {
    writeln!(w, "{}", header.join(","))?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| fmt_f64(*v)).collect();
        writeln!(w, "{}", cells.join(","))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 0.0] {
            let s = fmt_f64(x);
            assert_eq!(s.parse::<f64>().unwrap().to_bits(), x.to_bits(), "{s}");
        }
    }

    #[test]
    fn parse_errors_name_the_line() {
        let txt = "a,b\n1,2\n3,x\n";
        let err = read_numeric_csv(txt.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
    }

    #[test]
    fn ragged_rows_rejected() {
        let txt = "a,b\n1,2\n3\n";
        assert!(read_numeric_csv(txt.as_bytes()).is_err());
    }
}
