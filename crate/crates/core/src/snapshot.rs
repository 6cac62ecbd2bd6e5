//! Plain-text field snapshots, used for checkpoints and for loading raw
//! initial data.
//!
//! A file is a sequence of blocks. Each block is a header line
//! `dim N t name` followed by `N^dim` values, one per line, in cell order
//! (axis 0 fastest). Values are written in shortest round-trip exponent form,
//! so a write/read cycle is exact. Blank lines and lines starting with `#`
//! are ignored.
//!
//! A state checkpoint holds the blocks `n`, `v.0..v.{d-1}`, `rho`,
//! `u.0..u.{d-1}`; raw initial data holds `n0`, `m0.*`, `rho0`, `m0_tilde.*`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::grid::{PeriodicGrid, ScalarField, VectorField};
use crate::init::RawInitialData;
use crate::model::State;

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub t: f64,
    pub field: ScalarField,
}

pub fn render(blocks: &[Block]) -> String {
    let mut out = String::new();
    for b in blocks {
        let g = b.field.grid();
        let _ = writeln!(out, "{} {} {:e} {}", g.dim(), g.points_per_axis(), b.t, b.name);
        for v in b.field.values() {
            let _ = writeln!(out, "{v:e}");
        }
    }
    out
}

pub fn parse(text: &str) -> Result<Vec<Block>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let mut blocks = Vec::new();
    while let Some((line_no, header)) = lines.next() {
        let bad = |m: &str| Error::Snapshot(format!("line {line_no}: {m}"));
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(bad("expected header `dim N t name`"));
        }
        let dim: usize = parts[0].parse().map_err(|_| bad("dim is not an integer"))?;
        let n: usize = parts[1].parse().map_err(|_| bad("N is not an integer"))?;
        let t: f64 = parts[2].parse().map_err(|_| bad("t is not a number"))?;
        let grid = PeriodicGrid::new(dim, n).map_err(|e| bad(&e.to_string()))?;
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.len() {
            let (ln, l) = lines.next().ok_or_else(|| {
                Error::Snapshot(format!(
                    "block `{}` at line {line_no}: expected {} values, file ended after {}",
                    parts[3],
                    grid.len(),
                    values.len()
                ))
            })?;
            values.push(
                l.parse::<f64>()
                    .map_err(|_| Error::Snapshot(format!("line {ln}: `{l}` is not a number")))?,
            );
        }
        blocks.push(Block {
            name: parts[3].to_string(),
            t,
            field: ScalarField::new(grid, values)?,
        });
    }
    Ok(blocks)
}

pub fn write_blocks(path: &Path, blocks: &[Block]) -> Result<()> {
    fs::write(path, render(blocks)).map_err(Error::from)
}

pub fn read_blocks(path: &Path) -> Result<Vec<Block>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Snapshot(format!("{}: {e}", path.display())))?;
    parse(&text)
}

fn vector_blocks<'a>(prefix: &str, t: f64, v: &'a VectorField) -> impl Iterator<Item = Block> + 'a {
    let prefix = prefix.to_string();
    v.comps().iter().enumerate().map(move |(i, c)| Block {
        name: format!("{prefix}.{i}"),
        t,
        field: c.clone(),
    })
}

pub fn state_blocks(s: &State) -> Vec<Block> {
    let mut out = vec![Block { name: "n".into(), t: s.t, field: s.n.clone() }];
    out.extend(vector_blocks("v", s.t, &s.v));
    out.push(Block { name: "rho".into(), t: s.t, field: s.rho.clone() });
    out.extend(vector_blocks("u", s.t, &s.u));
    out
}

pub fn raw_blocks(raw: &RawInitialData) -> Vec<Block> {
    let mut out = vec![Block { name: "n0".into(), t: 0.0, field: raw.n0.clone() }];
    out.extend(vector_blocks("m0", 0.0, &raw.m0));
    out.push(Block { name: "rho0".into(), t: 0.0, field: raw.rho0.clone() });
    out.extend(vector_blocks("m0_tilde", 0.0, &raw.m0_tilde));
    out
}

fn find<'a>(blocks: &'a [Block], name: &str) -> Result<&'a Block> {
    blocks
        .iter()
        .find(|b| b.name == name)
        .ok_or_else(|| Error::Snapshot(format!("missing block `{name}`")))
}

fn find_vector(blocks: &[Block], prefix: &str, grid: PeriodicGrid) -> Result<VectorField> {
    let comps = (0..grid.dim())
        .map(|i| find(blocks, &format!("{prefix}.{i}")).map(|b| b.field.clone()))
        .collect::<Result<Vec<_>>>()?;
    let v = VectorField::new(comps)?;
    if v.grid() != grid {
        return Err(Error::GridMismatch);
    }
    Ok(v)
}

/// Blocks hold a checkpointed state (as opposed to raw data).
pub fn is_state(blocks: &[Block]) -> bool {
    blocks.iter().any(|b| b.name == "n")
}

pub fn state_from_blocks(blocks: &[Block]) -> Result<State> {
    let n = find(blocks, "n")?;
    let g = n.field.grid();
    let rho = find(blocks, "rho")?;
    State::new(
        n.field.clone(),
        find_vector(blocks, "v", g)?,
        rho.field.clone(),
        find_vector(blocks, "u", g)?,
        n.t,
    )
}

pub fn raw_from_blocks(blocks: &[Block], eta0: f64) -> Result<RawInitialData> {
    let n0 = find(blocks, "n0")?.field.clone();
    let g = n0.grid();
    let raw = RawInitialData {
        n0,
        m0: find_vector(blocks, "m0", g)?,
        rho0: find(blocks, "rho0")?.field.clone(),
        m0_tilde: find_vector(blocks, "m0_tilde", g)?,
        eta0,
    };
    raw.validate()?;
    Ok(raw)
}

pub fn write_state(path: &Path, s: &State) -> Result<()> {
    write_blocks(path, &state_blocks(s))
}

pub fn read_state(path: &Path) -> Result<State> {
    state_from_blocks(&read_blocks(path)?)
}

pub fn write_raw(path: &Path, raw: &RawInitialData) -> Result<()> {
    write_blocks(path, &raw_blocks(raw))
}

/// Raw data from either a raw-data file or a state checkpoint.
pub fn read_raw(path: &Path, eta0: f64) -> Result<RawInitialData> {
    let blocks = read_blocks(path)?;
    if is_state(&blocks) {
        Ok(RawInitialData::from_state(&state_from_blocks(&blocks)?, eta0))
    } else {
        raw_from_blocks(&blocks, eta0)
    }
}
