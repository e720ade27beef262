//! Binary file holding a solved model together with its configuration.
//!
//! Layout, all integers and floats little-endian:
//!
//! | field      | type                                    |
//! |------------|-----------------------------------------|
//! | magic      | `b"CSWBNDL\0"`                          |
//! | version    | `u32`                                   |
//! | config     | `u64` length, then UTF-8 TOML           |
//! | horizon    | `u64`                                   |
//! | levels     | `u64`                                   |
//! | grid       | `u64` rows, `u64` cols, `f64` row-major |
//! | values     | `(T+1)·|P|` matrices, `f64` row-major   |
//! | expected   | `T·|P|` matrices, `f64` row-major       |
//!
//! Every stored matrix has the shape of the grid.

use std::io::{Read, Write};
use std::path::Path;

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::pwc::{FunctionMatrix, Grid, Matrix};
use crate::solver::SolveResult;

pub const MAGIC: &[u8; 8] = b"CSWBNDL\0";
pub const VERSION: u32 = 1;

/// A solution and the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct Bundle {
    pub config: RunConfig,
    pub result: SolveResult,
}

impl Bundle {
    pub fn new(config: RunConfig, result: SolveResult) -> Self {
        Self { config, result }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let r = &self.result;
        let toml = self.config.to_toml_string();
        let grid = r.grid();
        let cells = grid.len() * grid.dim();
        let mut out = Vec::with_capacity(
            64 + toml.len() + 8 * cells * (1 + r.values().len() + r.expected().len()),
        );
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        put_u64(&mut out, toml.len());
        out.extend_from_slice(toml.as_bytes());
        put_u64(&mut out, r.horizon());
        put_u64(&mut out, r.levels());
        put_u64(&mut out, grid.len());
        put_u64(&mut out, grid.dim());
        for pt in grid.points() {
            put_f64s(&mut out, pt);
        }
        for m in r.values().iter().chain(r.expected()) {
            put_f64s(&mut out, m.as_slice());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut rd = Reader { buf: bytes, pos: 0 };
        if rd.take(8, "magic")? != MAGIC {
            return Err(Error::Bundle("not a solution bundle (bad magic)".into()));
        }
        let version = u32::from_le_bytes(rd.take(4, "version")?.try_into().unwrap());
        if version != VERSION {
            return Err(Error::Bundle(format!(
                "unsupported bundle version {version}, expected {VERSION}"
            )));
        }
        let len = rd.len("config length")?;
        let text = std::str::from_utf8(rd.take(len, "config")?)
            .map_err(|_| Error::Bundle("embedded config is not UTF-8".into()))?;
        let config = RunConfig::from_toml_str(text)
            .map_err(|e| Error::Bundle(format!("embedded config: {e}")))?;
        let horizon = rd.len("horizon")?;
        let levels = rd.len("levels")?;
        let rows = rd.len("grid rows")?;
        let cols = rd.len("grid cols")?;
        let cells = rows
            .checked_mul(cols)
            .ok_or_else(|| Error::Bundle("grid size overflows".into()))?;
        let grid = Grid::from_matrix(Matrix::new(rows, cols, rd.f64s(cells, "grid")?)?)
            .map_err(|e| Error::Bundle(format!("grid: {e}")))?;
        let count = |n: usize| {
            n.checked_mul(levels)
                .ok_or_else(|| Error::Bundle("matrix count overflows".into()))
        };
        let nv = count(horizon + 1)?;
        let ne = count(horizon)?;
        let mut read = |n: usize, what: &'static str| -> Result<Vec<FunctionMatrix>> {
            (0..n)
                .map(|_| FunctionMatrix::new(rows, cols, rd.f64s(cells, what)?))
                .collect()
        };
        let values = read(nv, "value matrices")?;
        let expected = read(ne, "expected-value matrices")?;
        if rd.pos != bytes.len() {
            return Err(Error::Bundle(format!(
                "{} trailing bytes after the last matrix",
                bytes.len() - rd.pos
            )));
        }
        let result = SolveResult::from_parts(grid, horizon, levels, values, expected)?;
        Ok(Self { config, result })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut buf = Vec::new();
        r.read_to_end(&mut buf)?;
        Self::from_bytes(&buf)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn put_u64(out: &mut Vec<u8>, x: usize) {
    out.extend_from_slice(&(x as u64).to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, xs: &[f64]) {
    for x in xs {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        match end {
            Some(end) => {
                let s = &self.buf[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(Error::Bundle(format!("truncated while reading {what}"))),
        }
    }

    fn len(&mut self, what: &str) -> Result<usize> {
        let x = u64::from_le_bytes(self.take(8, what)?.try_into().unwrap());
        usize::try_from(x).map_err(|_| Error::Bundle(format!("{what} {x} too large")))
    }

    fn f64s(&mut self, n: usize, what: &str) -> Result<Vec<f64>> {
        let bytes = n
            .checked_mul(8)
            .ok_or_else(|| Error::Bundle(format!("{what} size overflows")))?;
        Ok(self
            .take(bytes, what)?
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}
