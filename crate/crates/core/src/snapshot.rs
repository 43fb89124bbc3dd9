//! Plain-text field snapshots.
//!
//! ```text
//! grid n=<N> L=<float> kind=<scalar|vector|matrix>
//! <N lines of N comma-separated values>      component 1
//!
//! <N lines>                                  component 2 (vector, matrix)
//! ...
//! ```
//!
//! Each block is row-major (one grid row `x2 = const` per line, `x1`
//! increasing along the line). Matrix blocks are ordered 11, 12, 21, 22.

use std::fmt::Write as _;
use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::field::{MatrixField, ScalarField, VectorField};
use crate::grid::Grid;
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Snapshot<T: Real> {
    Scalar(ScalarField<T>),
    Vector(VectorField<T>),
    Matrix(MatrixField<T>),
}

impl<T: Real> Snapshot<T> {
    pub fn kind(&self) -> &'static str {
        match self {
            Snapshot::Scalar(_) => "scalar",
            Snapshot::Vector(_) => "vector",
            Snapshot::Matrix(_) => "matrix",
        }
    }

    fn grid(&self) -> &Grid<T> {
        match self {
            Snapshot::Scalar(f) => f.grid(),
            Snapshot::Vector(v) => v.grid(),
            Snapshot::Matrix(m) => m.grid(),
        }
    }

    fn blocks(&self) -> Vec<&ScalarField<T>> {
        match self {
            Snapshot::Scalar(f) => vec![f],
            Snapshot::Vector(v) => vec![v.component(0), v.component(1)],
            Snapshot::Matrix(m) => vec![m.entry(0, 0), m.entry(0, 1), m.entry(1, 0), m.entry(1, 1)],
        }
    }

    pub fn to_text(&self) -> String {
        let grid = self.grid();
        let n = grid.n();
        let mut out = String::new();
        let _ = writeln!(
            out,
            "grid n={} L={} kind={}",
            n,
            grid.length().to_f64_lossy(),
            self.kind()
        );
        for (b, block) in self.blocks().iter().enumerate() {
            if b > 0 {
                out.push('\n');
            }
            for row in block.values().chunks(n) {
                let line: Vec<String> = row.iter().map(|v| format!("{}", v.to_f64_lossy())).collect();
                out.push_str(&line.join(","));
                out.push('\n');
            }
        }
        out
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(self.to_text().as_bytes())?;
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_text())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let mut s = String::new();
        std::fs::File::open(path)?.read_to_string(&mut s)?;
        Self::parse(&s)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let (_, header) = lines.next().ok_or_else(|| err(1, "empty snapshot"))?;
        let (n, length, kind) = parse_header(header)?;
        let grid = Grid::new(n, length).map_err(|e| err(1, &e.to_string()))?;
        let n_blocks = match kind.as_str() {
            "scalar" => 1,
            "vector" => 2,
            "matrix" => 4,
            other => return Err(err(1, &format!("unknown kind '{other}'"))),
        };

        let mut blocks: Vec<Vec<T>> = Vec::with_capacity(n_blocks);
        let mut current: Vec<T> = Vec::with_capacity(grid.len());
        for (lineno, line) in lines {
            let line = line.trim();
            if line.is_empty() {
                if !current.is_empty() {
                    blocks.push(std::mem::take(&mut current));
                }
                continue;
            }
            let before = current.len();
            for tok in line.split(',') {
                let v: f64 = tok
                    .trim()
                    .parse()
                    .map_err(|_| err(lineno + 1, &format!("bad number '{tok}'")))?;
                current.push(T::lit(v));
            }
            if current.len() - before != n {
                return Err(err(
                    lineno + 1,
                    &format!("expected {n} values, got {}", current.len() - before),
                ));
            }
        }
        if !current.is_empty() {
            blocks.push(current);
        }
        if blocks.len() != n_blocks {
            return Err(err(0, &format!("expected {n_blocks} blocks, found {}", blocks.len())));
        }
        let mut fields = Vec::with_capacity(n_blocks);
        for (b, vals) in blocks.into_iter().enumerate() {
            if vals.len() != grid.len() {
                return Err(err(0, &format!("block {} has {} values", b + 1, vals.len())));
            }
            fields.push(ScalarField::from_values(&grid, vals)?);
        }
        Ok(match n_blocks {
            1 => Snapshot::Scalar(fields.pop().expect("one block")),
            2 => {
                let c2 = fields.pop().expect("block");
                let c1 = fields.pop().expect("block");
                Snapshot::Vector(VectorField::new(c1, c2)?)
            }
            _ => {
                let mut it = fields.into_iter();
                let mut next = || it.next().expect("four blocks");
                let (a, b, c, d) = (next(), next(), next(), next());
                Snapshot::Matrix(MatrixField::new([[a, b], [c, d]])?)
            }
        })
    }
}

fn err(line: usize, message: &str) -> Error {
    Error::Snapshot {
        line,
        message: message.to_string(),
    }
}

fn parse_header<T: Real>(header: &str) -> Result<(usize, T, String)> {
    let mut parts = header.split_whitespace();
    if parts.next() != Some("grid") {
        return Err(err(1, "header must start with 'grid'"));
    }
    let (mut n, mut l, mut kind) = (None, None, None);
    for p in parts {
        let (key, value) = p
            .split_once('=')
            .ok_or_else(|| err(1, &format!("malformed header entry '{p}'")))?;
        match key {
            "n" => n = value.parse::<usize>().ok(),
            "L" => l = value.parse::<f64>().ok().map(T::lit),
            "kind" => kind = Some(value.to_string()),
            _ => return Err(err(1, &format!("unknown header key '{key}'"))),
        }
    }
    match (n, l, kind) {
        (Some(n), Some(l), Some(k)) => Ok((n, l, k)),
        _ => Err(err(1, "header needs n, L and kind")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::Mat2;

    #[test]
    fn vector_roundtrip_is_bitwise() {
        let g = Grid::<f64>::periodic(8).unwrap();
        let v = VectorField::from_fn(&g, |x, y| [x.sin() / 3.0, (x * y).cos()]);
        let snap = Snapshot::Vector(v);
        let text = snap.to_text();
        assert!(text.starts_with("grid n=8 L=6.283185307179586 kind=vector\n"));
        assert_eq!(Snapshot::parse(&text).unwrap(), snap);
    }

    #[test]
    fn matrix_block_order() {
        let g = Grid::<f64>::periodic(8).unwrap();
        let m = MatrixField::from_pointwise(&g, |_| Mat2::new(1.0, 2.0, 3.0, 4.0));
        let text = Snapshot::Matrix(m.clone()).to_text();
        let blocks: Vec<&str> = text.split("\n\n").collect();
        assert_eq!(blocks.len(), 4);
        assert!(blocks[1].starts_with("2,2,"));
        assert_eq!(Snapshot::parse(&text).unwrap(), Snapshot::Matrix(m));
    }

    #[test]
    fn malformed_inputs() {
        assert!(Snapshot::<f64>::parse("").is_err());
        assert!(Snapshot::<f64>::parse("grid n=8 L=1 kind=tensor\n").is_err());
        let bad_row = "grid n=8 L=1 kind=scalar\n1,2,3\n";
        match Snapshot::<f64>::parse(bad_row) {
            Err(Error::Snapshot { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
