use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};

use super::Mat;
use crate::error::{Error, Result};

const HEADER: &str = "%%MatrixMarket matrix array real general";

/// Reads a dense MatrixMarket array (column-major values).
pub fn read_matrix_market<R: Read>(reader: R) -> Result<Mat> {
    let mut lines = BufReader::new(reader).lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Parse("empty MatrixMarket input".into()))?
        .map_err(|e| Error::Parse(e.to_string()))?;
    let fields: Vec<String> = header.split_whitespace().map(str::to_ascii_lowercase).collect();
    if fields.len() != 5
        || fields[0] != "%%matrixmarket"
        || fields[1] != "matrix"
        || fields[2] != "array"
        || fields[3] != "real"
        || fields[4] != "general"
    {
        return Err(Error::Parse(format!("unsupported header: {header}")));
    }
    let mut tokens = Vec::new();
    for line in lines {
        let line = line.map_err(|e| Error::Parse(e.to_string()))?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('%') {
            continue;
        }
        tokens.extend(line.split_whitespace().map(str::to_owned));
    }
    let parse_usize = |s: &str| s.parse::<usize>().map_err(|e| Error::Parse(format!("{s}: {e}")));
    if tokens.len() < 2 {
        return Err(Error::Parse("missing size line".into()));
    }
    let rows = parse_usize(&tokens[0])?;
    let cols = parse_usize(&tokens[1])?;
    let values = &tokens[2..];
    if values.len() != rows * cols {
        return Err(Error::Parse(format!(
            "expected {} values, found {}",
            rows * cols,
            values.len()
        )));
    }
    let mut m = Mat::zeros(rows, cols);
    for (idx, v) in values.iter().enumerate() {
        let x = v.parse::<f64>().map_err(|e| Error::Parse(format!("{v}: {e}")))?;
        m[(idx % rows, idx / rows)] = x;
    }
    Ok(m)
}

pub fn write_matrix_market(a: &Mat) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "{HEADER}");
    let _ = writeln!(s, "{} {}", a.rows(), a.cols());
    for j in 0..a.cols() {
        for i in 0..a.rows() {
            let _ = writeln!(s, "{:e}", a[(i, j)]);
        }
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let a = Mat::from_fn(3, 2, |i, j| i as f64 - 0.1 * j as f64);
        let text = write_matrix_market(&a);
        assert_eq!(read_matrix_market(text.as_bytes()).unwrap(), a);
    }

    #[test]
    fn column_major_with_comments() {
        let text = "%%MatrixMarket matrix array real general\n% c\n2 2\n1\n2\n3\n4\n";
        let a = read_matrix_market(text.as_bytes()).unwrap();
        assert_eq!(a, Mat::from_rows(&[&[1.0, 3.0], &[2.0, 4.0]]));
    }

    #[test]
    fn rejects_coordinate_and_short_input() {
        let t = "%%MatrixMarket matrix coordinate real general\n1 1 1\n1 1 2\n";
        assert!(matches!(read_matrix_market(t.as_bytes()), Err(Error::Parse(_))));
        let t = "%%MatrixMarket matrix array real general\n2 2\n1\n";
        assert!(matches!(read_matrix_market(t.as_bytes()), Err(Error::Parse(_))));
    }
}
