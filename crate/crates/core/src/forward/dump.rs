//! Binary and CSV exports of path bundles.
//!
//! Binary layout, little-endian throughout:
//!
//! ```text
//! magic   8 bytes  "BSDEPATH"
//! version u32      1
//! seed    u64
//! h       f64
//! t_max   f64
//! n_paths u64
//! dim     u32
//! refine  u32
//! per path:
//!   exit       i64   coarse exit node, -1 if censored
//!   fault      u8
//!   fine_exit  f64   NaN if censored or uncoupled
//!   n_nodes    u32   stored nodes (0 without node storage)
//!   states     n_nodes * dim f64
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::PathBundle;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"BSDEPATH";

#[derive(Clone, Debug, PartialEq)]
pub struct BundleDump {
    pub seed: u64,
    pub h: f64,
    pub t_max: f64,
    pub dim: usize,
    pub refine: usize,
    pub exits: Vec<Option<u32>>,
    pub faults: Vec<bool>,
    pub fine_exits: Vec<Option<f64>>,
    /// Per path, the stored coarse states (node-major within the path).
    pub states: Vec<Vec<f64>>,
}

pub fn write_bundle_dump(b: &PathBundle, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    out.write_all(MAGIC)?;
    out.write_all(&1u32.to_le_bytes())?;
    out.write_all(&b.seed.to_le_bytes())?;
    out.write_all(&b.grid.h.to_le_bytes())?;
    out.write_all(&b.grid.t_max.to_le_bytes())?;
    out.write_all(&(b.n_paths as u64).to_le_bytes())?;
    out.write_all(&(b.problem.dim as u32).to_le_bytes())?;
    out.write_all(&(b.options.refine as u32).to_le_bytes())?;
    for i in 0..b.n_paths {
        let e = b.exits[i].map(|n| n as i64).unwrap_or(-1);
        out.write_all(&e.to_le_bytes())?;
        out.write_all(&[b.faults[i] as u8])?;
        out.write_all(&b.fine_exits[i].unwrap_or(f64::NAN).to_le_bytes())?;
        match &b.store {
            Some(s) => {
                let r = s.rank[i] as usize;
                let n = b.last_node(i) + 1;
                out.write_all(&(n as u32).to_le_bytes())?;
                for k in 0..n {
                    for v in s.state(k, r) {
                        out.write_all(&v.to_le_bytes())?;
                    }
                }
            }
            None => out.write_all(&0u32.to_le_bytes())?,
        }
    }
    out.flush()?;
    Ok(())
}

fn take<const N: usize>(r: &mut impl Read) -> Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub fn read_bundle_dump(path: &Path) -> Result<BundleDump> {
    let mut r = BufReader::new(File::open(path)?);
    if &take::<8>(&mut r)? != MAGIC {
        return Err(Error::InvalidInput(format!("{} is not a path dump", path.display())));
    }
    let version = u32::from_le_bytes(take(&mut r)?);
    if version != 1 {
        return Err(Error::InvalidInput(format!("unsupported dump version {version}")));
    }
    let seed = u64::from_le_bytes(take(&mut r)?);
    let h = f64::from_le_bytes(take(&mut r)?);
    let t_max = f64::from_le_bytes(take(&mut r)?);
    let n = u64::from_le_bytes(take(&mut r)?) as usize;
    let dim = u32::from_le_bytes(take(&mut r)?) as usize;
    let refine = u32::from_le_bytes(take(&mut r)?) as usize;
    let mut d = BundleDump {
        seed,
        h,
        t_max,
        dim,
        refine,
        exits: Vec::with_capacity(n),
        faults: Vec::with_capacity(n),
        fine_exits: Vec::with_capacity(n),
        states: Vec::with_capacity(n),
    };
    for _ in 0..n {
        let e = i64::from_le_bytes(take(&mut r)?);
        d.exits.push((e >= 0).then_some(e as u32));
        d.faults.push(take::<1>(&mut r)?[0] != 0);
        let f = f64::from_le_bytes(take(&mut r)?);
        d.fine_exits.push((!f.is_nan()).then_some(f));
        let nodes = u32::from_le_bytes(take(&mut r)?) as usize;
        let mut s = Vec::with_capacity(nodes * dim);
        for _ in 0..nodes * dim {
            s.push(f64::from_le_bytes(take(&mut r)?));
        }
        d.states.push(s);
    }
    Ok(d)
}

/// One row per path: coarse and reference exit times, empty when censored.
pub fn write_exit_csv(b: &PathBundle, path: &Path) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "path,coarse_exit,reference_exit,fault")?;
    let h = b.grid.h;
    for i in 0..b.n_paths {
        let c = b.exits[i].map(|n| format!("{}", n as f64 * h)).unwrap_or_default();
        let f = b.fine_exits[i].map(|t| format!("{t}")).unwrap_or_default();
        writeln!(out, "{i},{c},{f},{}", b.faults[i] as u8)?;
    }
    out.flush()?;
    Ok(())
}
