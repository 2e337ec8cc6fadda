//! Matrix Market, CSV and PGM readers and writers. Parse errors carry the
//! 1-based line and column of the offending token.

use crate::linops::{CscMatrix, Triplets};
use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = read_bytes(path)?;
    String::from_utf8(bytes).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        line: 1,
        column: 1,
        message: format!("not UTF-8: {e}"),
    })
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Whitespace-separated tokens with their positions.
struct Tokens<'a> {
    label: &'a str,
    items: Vec<(usize, usize, &'a str)>,
    pos: usize,
}

impl<'a> Tokens<'a> {
    /// Splits `line` (1-based `line_no`) into tokens.
    fn of_line(label: &'a str, line_no: usize, line: &'a str) -> Self {
        let mut items = Vec::new();
        let mut start = None;
        for (k, ch) in line.char_indices().chain(std::iter::once((line.len(), ' '))) {
            match (ch.is_whitespace(), start) {
                (true, Some(s)) => {
                    items.push((line_no, line[..s].chars().count() + 1, &line[s..k]));
                    start = None;
                }
                (false, None) => start = Some(k),
                _ => {}
            }
        }
        Self { label, items, pos: 0 }
    }

    fn error(&self, line: usize, column: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.label.to_string(),
            line,
            column,
            message: message.into(),
        }
    }

    fn next<T: std::str::FromStr>(&mut self, what: &str, end: (usize, usize)) -> Result<T> {
        let Some(&(line, col, tok)) = self.items.get(self.pos) else {
            return Err(self.error(end.0, end.1, format!("missing {what}")));
        };
        self.pos += 1;
        tok.parse()
            .map_err(|_| self.error(line, col, format!("expected {what}, found '{tok}'")))
    }

    fn finish(&self) -> Result<()> {
        match self.items.get(self.pos) {
            Some(&(line, col, tok)) => Err(self.error(line, col, format!("unexpected token '{tok}'"))),
            None => Ok(()),
        }
    }
}

fn parse_error(label: &str, line: usize, column: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: label.to_string(),
        line,
        column,
        message: message.into(),
    }
}

/// Parses Matrix Market text: `coordinate` (real, integer or pattern;
/// general, symmetric or skew-symmetric) and `array` (real or integer,
/// general).
pub fn parse_matrix_market(text: &str, label: &str) -> Result<CscMatrix> {
    let mut lines = text.lines().enumerate().map(|(k, l)| (k + 1, l));
    let (_, header) = lines.next().ok_or_else(|| parse_error(label, 1, 1, "empty file"))?;
    let fields: Vec<String> = header.split_whitespace().map(|s| s.to_ascii_lowercase()).collect();
    if fields.len() != 5 || fields[0] != "%%matrixmarket" || fields[1] != "matrix" {
        return Err(parse_error(label, 1, 1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    let coordinate = match fields[2].as_str() {
        "coordinate" => true,
        "array" => false,
        f => return Err(parse_error(label, 1, header.find(' ').unwrap_or(0) + 1, format!("unsupported format '{f}'"))),
    };
    let pattern = match fields[3].as_str() {
        "real" | "integer" | "double" => false,
        "pattern" if coordinate => true,
        f => return Err(parse_error(label, 1, 1, format!("unsupported field '{f}'"))),
    };
    let sign = match fields[4].as_str() {
        "general" => None,
        "symmetric" => Some(1.0),
        "skew-symmetric" => Some(-1.0),
        f => return Err(parse_error(label, 1, 1, format!("unsupported symmetry '{f}'"))),
    };
    if !coordinate && sign.is_some() {
        return Err(parse_error(label, 1, 1, "symmetric array storage is not supported"));
    }

    let mut body = lines.filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('%'));
    let (size_line, size_text) = body.next().ok_or_else(|| parse_error(label, 2, 1, "missing size line"))?;
    let mut size = Tokens::of_line(label, size_line, size_text);
    let end = (size_line, size_text.chars().count() + 1);
    let nrows: usize = size.next("row count", end)?;
    let ncols: usize = size.next("column count", end)?;
    let mut triplets;
    if coordinate {
        let nnz: usize = size.next("entry count", end)?;
        size.finish()?;
        triplets = Triplets::with_capacity(nrows, ncols, nnz);
        let mut seen = 0;
        for (ln, text) in body {
            let mut t = Tokens::of_line(label, ln, text);
            let end = (ln, text.chars().count() + 1);
            let col_of = |k: usize| t.items.get(k).map_or(end.1, |e| e.1);
            let (c_row, c_col) = (col_of(0), col_of(1));
            let i: usize = t.next("row index", end)?;
            let j: usize = t.next("column index", end)?;
            if i == 0 || i > nrows {
                return Err(parse_error(label, ln, c_row, format!("row index {i} outside 1..={nrows}")));
            }
            if j == 0 || j > ncols {
                return Err(parse_error(label, ln, c_col, format!("column index {j} outside 1..={ncols}")));
            }
            let v: f64 = if pattern { 1.0 } else { t.next("value", end)? };
            t.finish()?;
            triplets.push(i - 1, j - 1, v);
            if let Some(s) = sign {
                if i != j {
                    triplets.push(j - 1, i - 1, s * v);
                }
            }
            seen += 1;
        }
        if seen != nnz {
            return Err(parse_error(label, end.0, 1, format!("header announces {nnz} entries, found {seen}")));
        }
    } else {
        size.finish()?;
        triplets = Triplets::with_capacity(nrows, ncols, nrows * ncols);
        let mut k = 0;
        for (ln, text) in body {
            let mut t = Tokens::of_line(label, ln, text);
            let end = (ln, text.chars().count() + 1);
            while t.pos < t.items.len() {
                let v: f64 = t.next("value", end)?;
                if k >= nrows * ncols {
                    return Err(parse_error(label, ln, t.items[t.pos - 1].1, "more values than the size line allows"));
                }
                if v != 0.0 {
                    triplets.push(k % nrows, k / nrows, v);
                }
                k += 1;
            }
        }
        if k != nrows * ncols {
            return Err(parse_error(label, size_line, 1, format!("expected {} values, found {k}", nrows * ncols)));
        }
    }
    Ok(triplets.to_csc())
}

pub fn read_matrix_market(path: &Path) -> Result<CscMatrix> {
    parse_matrix_market(&read_text(path)?, &path.display().to_string())
}

/// `coordinate real general`, values in shortest round-trip form.
pub fn format_matrix_market(a: &CscMatrix) -> String {
    let mut out = String::from("%%MatrixMarket matrix coordinate real general\n");
    let _ = writeln!(out, "{} {} {}", a.nrows(), a.ncols(), a.nnz());
    for (i, j, v) in a.iter() {
        let _ = writeln!(out, "{} {} {v:?}", i + 1, j + 1);
    }
    out
}

pub fn write_matrix_market(path: &Path, a: &CscMatrix) -> Result<()> {
    write_bytes(path, format_matrix_market(a).as_bytes())
}

/// Numeric CSV table with an optional header row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvTable {
    pub header: Option<Vec<String>>,
    pub rows: Vec<Vec<f64>>,
}

/// Parses comma-separated numbers. The first line is a header when any of
/// its fields is not a number. Every row must have the same width.
pub fn parse_csv(text: &str, label: &str) -> Result<CsvTable> {
    let mut header = None;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let ln = k + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut fields = Vec::new();
        let mut col = 1;
        for f in line.split(',') {
            fields.push((col, f.trim()));
            col += f.chars().count() + 1;
        }
        if rows.is_empty() && header.is_none() && fields.iter().any(|(_, f)| f.parse::<f64>().is_err()) {
            header = Some(fields.iter().map(|(_, f)| f.to_string()).collect::<Vec<_>>());
            continue;
        }
        let width = header.as_ref().map(Vec::len).or(rows.first().map(Vec::len));
        if let Some(w) = width {
            if fields.len() != w {
                return Err(parse_error(label, ln, 1, format!("expected {w} fields, found {}", fields.len())));
            }
        }
        let row = fields
            .iter()
            .map(|(c, f)| {
                f.parse::<f64>()
                    .map_err(|_| parse_error(label, ln, *c, format!("expected a number, found '{f}'")))
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    Ok(CsvTable { header, rows })
}

pub fn read_csv(path: &Path) -> Result<CsvTable> {
    parse_csv(&read_text(path)?, &path.display().to_string())
}

pub fn format_csv(table: &CsvTable) -> String {
    let mut out = String::new();
    if let Some(h) = &table.header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for r in &table.rows {
        let fields: Vec<String> = r.iter().map(|v| format!("{v:?}")).collect();
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    out
}

pub fn write_csv(path: &Path, table: &CsvTable) -> Result<()> {
    write_bytes(path, format_csv(table).as_bytes())
}

/// Grey-level image, row-major, raw sample values in `0..=maxval`.
#[derive(Debug, Clone, PartialEq)]
pub struct GrayImage {
    pub rows: usize,
    pub cols: usize,
    pub maxval: u16,
    pub pixels: Vec<u16>,
}

impl GrayImage {
    /// Samples scaled to `[0, 1]`.
    pub fn to_unit(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64 / self.maxval as f64).collect()
    }

    /// Quantizes `[0, 1]` values (clamped) to `0..=maxval`.
    pub fn from_unit(values: &[f64], rows: usize, cols: usize, maxval: u16) -> Result<Self> {
        if values.len() != rows * cols {
            return Err(Error::dims(format!("{} values for a {rows}x{cols} image", values.len())));
        }
        if maxval == 0 {
            return Err(Error::invalid("maxval must be positive"));
        }
        let m = maxval as f64;
        let pixels = values.iter().map(|v| (v.clamp(0.0, 1.0) * m).round() as u16).collect();
        Ok(Self { rows, cols, maxval, pixels })
    }
}

/// Header scanner for PGM: whitespace-separated tokens, `#` comments.
struct PgmScanner<'a> {
    bytes: &'a [u8],
    label: &'a str,
    pos: usize,
    line: usize,
    col: usize,
}

impl PgmScanner<'_> {
    fn token(&mut self, what: &str) -> Result<(usize, usize, String)> {
        let b = self.bytes;
        loop {
            while self.pos < b.len() && b[self.pos].is_ascii_whitespace() {
                if b[self.pos] == b'\n' {
                    self.line += 1;
                    self.col = 1;
                } else {
                    self.col += 1;
                }
                self.pos += 1;
            }
            if self.pos < b.len() && b[self.pos] == b'#' {
                while self.pos < b.len() && b[self.pos] != b'\n' {
                    self.pos += 1;
                }
                continue;
            }
            break;
        }
        if self.pos >= b.len() {
            return Err(parse_error(self.label, self.line, self.col, format!("missing {what}")));
        }
        let (l, c, start) = (self.line, self.col, self.pos);
        while self.pos < b.len() && !b[self.pos].is_ascii_whitespace() {
            self.pos += 1;
            self.col += 1;
        }
        Ok((l, c, String::from_utf8_lossy(&b[start..self.pos]).into_owned()))
    }

    fn number<T: std::str::FromStr>(&mut self, what: &str) -> Result<(usize, usize, T)> {
        let (l, c, tok) = self.token(what)?;
        let v = tok
            .parse()
            .map_err(|_| parse_error(self.label, l, c, format!("expected {what}, found '{tok}'")))?;
        Ok((l, c, v))
    }
}

/// Parses binary (P5) or plain (P2) PGM.
pub fn parse_pgm(bytes: &[u8], label: &str) -> Result<GrayImage> {
    let mut sc = PgmScanner {
        bytes,
        label,
        pos: 0,
        line: 1,
        col: 1,
    };
    let (l, c, magic) = sc.token("magic number")?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        _ => return Err(parse_error(label, l, c, format!("expected P2 or P5, found '{magic}'"))),
    };
    let mut dims = [0usize; 3];
    for (k, what) in ["width", "height", "maxval"].iter().enumerate() {
        let (l, c, v) = sc.number::<usize>(what)?;
        if v == 0 || (k == 2 && v > 65535) {
            return Err(parse_error(label, l, c, format!("{what} {v} out of range")));
        }
        dims[k] = v;
    }
    let [cols, rows, maxval] = dims;
    let n = rows * cols;
    let mut pixels = Vec::with_capacity(n);
    if binary {
        // exactly one whitespace byte separates the header from the raster
        let width = if maxval < 256 { 1 } else { 2 };
        let raster = bytes.get(sc.pos + 1..).unwrap_or(&[]);
        if raster.len() < n * width {
            return Err(parse_error(
                label,
                sc.line,
                sc.col,
                format!("raster has {} bytes, need {}", raster.len(), n * width),
            ));
        }
        for k in 0..n {
            let p = if width == 1 {
                raster[k] as u16
            } else {
                u16::from_be_bytes([raster[2 * k], raster[2 * k + 1]])
            };
            pixels.push(p);
        }
    } else {
        for _ in 0..n {
            let (l, c, p) = sc.number::<u16>("pixel value")?;
            if p as usize > maxval {
                return Err(parse_error(label, l, c, format!("pixel {p} exceeds maxval {maxval}")));
            }
            pixels.push(p);
        }
    }
    if let Some(k) = pixels.iter().position(|&p| p as usize > maxval) {
        return Err(parse_error(label, sc.line, sc.col, format!("pixel {k} exceeds maxval {maxval}")));
    }
    Ok(GrayImage {
        rows,
        cols,
        maxval: maxval as u16,
        pixels,
    })
}

pub fn read_pgm(path: &Path) -> Result<GrayImage> {
    parse_pgm(&read_bytes(path)?, &path.display().to_string())
}

pub fn format_pgm(img: &GrayImage, binary: bool) -> Vec<u8> {
    let mut out = format!("{}\n{} {}\n{}\n", if binary { "P5" } else { "P2" }, img.cols, img.rows, img.maxval).into_bytes();
    if binary {
        for &p in &img.pixels {
            if img.maxval < 256 {
                out.push(p as u8);
            } else {
                out.extend_from_slice(&p.to_be_bytes());
            }
        }
    } else {
        for row in img.pixels.chunks(img.cols) {
            let line: Vec<String> = row.iter().map(|p| p.to_string()).collect();
            out.extend_from_slice(line.join(" ").as_bytes());
            out.push(b'\n');
        }
    }
    out
}

pub fn write_pgm(path: &Path, img: &GrayImage, binary: bool) -> Result<()> {
    write_bytes(path, &format_pgm(img, binary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn parse_pos(e: Error) -> (usize, usize) {
        match e {
            Error::Parse { line, column, .. } => (line, column),
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn matrix_market_coordinate_general() {
        let text = "%%MatrixMarket matrix coordinate real general\n% comment\n3 2 3\n1 1 1.5\n3 2 -2\n2 1 4e-3\n";
        let a = parse_matrix_market(text, "t").unwrap();
        assert_eq!((a.nrows(), a.ncols(), a.nnz()), (3, 2, 3));
        assert_eq!(a.get(2, 1), -2.0);
        assert_eq!(a.get(1, 0), 4e-3);
    }

    #[test]
    fn matrix_market_symmetric_and_pattern() {
        let text = "%%MatrixMarket matrix coordinate real symmetric\n2 2 2\n1 1 2\n2 1 -1\n";
        let a = parse_matrix_market(text, "t").unwrap();
        assert_eq!(a.get(0, 1), -1.0);
        assert_eq!(a.get(1, 0), -1.0);
        let p = parse_matrix_market("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n2 2\n", "t").unwrap();
        assert_eq!(p.get(1, 1), 1.0);
    }

    #[test]
    fn matrix_market_array_is_column_major() {
        let a = parse_matrix_market("%%MatrixMarket matrix array real general\n2 2\n1\n2\n3\n4\n", "t").unwrap();
        assert_eq!(a.get(1, 0), 2.0);
        assert_eq!(a.get(0, 1), 3.0);
    }

    #[test]
    fn matrix_market_errors_point_at_the_token() {
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n1   x 1.0\n";
        assert_eq!(parse_pos(parse_matrix_market(text, "t").unwrap_err()), (3, 5));
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n";
        assert_eq!(parse_pos(parse_matrix_market(text, "t").unwrap_err()), (3, 1));
        let text = "%%MatrixMarket matrix coordinate real general\n2 2 2\n1 1 1.0\n";
        assert!(parse_matrix_market(text, "t").is_err());
        assert_eq!(parse_pos(parse_matrix_market("hello\n", "t").unwrap_err()), (1, 1));
    }

    #[test]
    fn csv_header_and_errors() {
        let t = parse_csv("a,b\n1,2\n3.5,-4\n", "t").unwrap();
        assert_eq!(t.header, Some(vec!["a".to_string(), "b".to_string()]));
        assert_eq!(t.rows, vec![vec![1.0, 2.0], vec![3.5, -4.0]]);
        assert_eq!(parse_pos(parse_csv("1,2\n3,zz\n", "t").unwrap_err()), (2, 3));
        assert_eq!(parse_pos(parse_csv("1,2\n3\n", "t").unwrap_err()), (2, 1));
        assert_eq!(parse_csv("1,2\n", "t").unwrap().header, None);
    }

    #[test]
    fn pgm_plain_with_comments() {
        let img = parse_pgm(b"P2\n# made by hand\n3 2\n# max\n10\n0 5 10\n1 2 3\n", "t").unwrap();
        assert_eq!((img.rows, img.cols, img.maxval), (2, 3, 10));
        assert_eq!(img.pixels, vec![0, 5, 10, 1, 2, 3]);
        assert_eq!(img.to_unit()[1], 0.5);
    }

    #[test]
    fn pgm_errors() {
        assert_eq!(parse_pos(parse_pgm(b"P3\n1 1\n255\n0\n", "t").unwrap_err()), (1, 1));
        assert_eq!(parse_pos(parse_pgm(b"P2\n2 x\n255\n", "t").unwrap_err()), (2, 3));
        assert!(parse_pgm(b"P5\n2 2\n255\n\x01\x02", "t").is_err());
        assert!(parse_pgm(b"P2\n1 1\n5\n9\n", "t").is_err());
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = CscMatrix::from_triplets(3, 3, &[(0, 0, 0.1), (2, 1, -1.0 / 3.0), (1, 2, 1e-300)]).unwrap();
        let p = dir.path().join("a.mtx");
        write_matrix_market(&p, &a).unwrap();
        assert_eq!(read_matrix_market(&p).unwrap(), a);

        let img = GrayImage { rows: 2, cols: 2, maxval: 1000, pixels: vec![0, 999, 1000, 7] };
        for binary in [true, false] {
            let p = dir.path().join(format!("i{binary}.pgm"));
            write_pgm(&p, &img, binary).unwrap();
            assert_eq!(read_pgm(&p).unwrap(), img);
        }
        assert!(read_pgm(&dir.path().join("missing.pgm")).is_err());
    }

    #[test]
    fn unit_quantization() {
        let img = GrayImage::from_unit(&[0.0, 0.5, 1.2, -0.1], 2, 2, 255).unwrap();
        assert_eq!(img.pixels, vec![0, 128, 255, 0]);
        assert!(GrayImage::from_unit(&[0.0], 2, 2, 255).is_err());
    }

    proptest! {
        #[test]
        fn matrix_market_text_round_trip(
            entries in proptest::collection::vec((0usize..6, 0usize..5, -1e6f64..1e6), 0..20),
        ) {
            let a = CscMatrix::from_triplets(6, 5, &entries).unwrap();
            let text = format_matrix_market(&a);
            prop_assert_eq!(parse_matrix_market(&text, "t").unwrap(), a);
        }

        #[test]
        fn csv_round_trip(rows in proptest::collection::vec(proptest::collection::vec(-1e9f64..1e9, 3), 1..10)) {
            let t = CsvTable { header: Some(vec!["x".into(), "y".into(), "z".into()]), rows };
            prop_assert_eq!(parse_csv(&format_csv(&t), "t").unwrap(), t);
        }

        #[test]
        fn pgm_round_trip(pixels in proptest::collection::vec(0u16..=255, 12), binary in any::<bool>()) {
            let img = GrayImage { rows: 3, cols: 4, maxval: 255, pixels };
            prop_assert_eq!(parse_pgm(&format_pgm(&img, binary), "t").unwrap(), img);
        }
    }
}
