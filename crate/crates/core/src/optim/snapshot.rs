//! `SOSTATE1` binary snapshot of an [`SoState`], little-endian:
//!
//! ```text
//! "SOSTATE1" | tensors: u32
//! per tensor: id: u32 | t: u64 | len: u64 | m: u64
//!             | support_len: u64 | support indices: u64 × support_len
//!             | moment_len: u64 | (index: u64, mu: f64, nu: f64) × moment_len
//! ```
//!
//! The selection generator is not stored; a restored state draws from a
//! fresh stream seeded by the caller.

use std::io::{Cursor, Read};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::so::{SoState, TensorState};
use super::SparseBuffer;
use crate::error::{Error, Result};
use crate::math::IndexSet;

const MAGIC: &[u8; 8] = b"SOSTATE1";

impl SoState {
    pub fn to_snapshot_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.write_u32::<LittleEndian>(self.tensors.len() as u32).unwrap();
        for (id, ts) in self.tensors.iter().enumerate() {
            out.write_u32::<LittleEndian>(id as u32).unwrap();
            out.write_u64::<LittleEndian>(self.t).unwrap();
            out.write_u64::<LittleEndian>(ts.len as u64).unwrap();
            out.write_u64::<LittleEndian>(ts.m as u64).unwrap();
            out.write_u64::<LittleEndian>(ts.support.len() as u64).unwrap();
            for &j in ts.support.as_slice() {
                out.write_u64::<LittleEndian>(j as u64).unwrap();
            }
            out.write_u64::<LittleEndian>(ts.mu.len() as u64).unwrap();
            for ((j, mu), nu) in ts.mu.iter().zip(ts.nu.values()) {
                out.write_u64::<LittleEndian>(j as u64).unwrap();
                out.write_f64::<LittleEndian>(mu).unwrap();
                out.write_f64::<LittleEndian>(*nu).unwrap();
            }
        }
        out
    }

    pub fn from_snapshot_bytes(bytes: &[u8], seed: u64) -> Result<SoState> {
        let mut cur = Cursor::new(bytes);
        let mut magic = [0u8; 8];
        cur.read_exact(&mut magic)
            .map_err(|_| Error::format("magic", "file shorter than header"))?;
        if &magic != MAGIC {
            return Err(Error::format("magic", format!("expected SOSTATE1, got {magic:?}")));
        }
        let count = cur
            .read_u32::<LittleEndian>()
            .map_err(|_| Error::format("tensor_count", "truncated"))?;
        let mut tensors = Vec::with_capacity(count as usize);
        let mut t_all = None;
        for expected_id in 0..count {
            let id = read_u32(&mut cur, "tensor_id")?;
            if id != expected_id {
                return Err(Error::format("tensor_id", format!("expected {expected_id}, got {id}")));
            }
            let t = read_u64(&mut cur, "t")?;
            if *t_all.get_or_insert(t) != t {
                return Err(Error::format("t", "step counters differ between tensors"));
            }
            let len = read_u64(&mut cur, "len")? as usize;
            let m = read_u64(&mut cur, "m")? as usize;
            if m == 0 || m > len {
                return Err(Error::format("m", format!("{m} not in 1..={len}")));
            }
            let support_len = read_len(&mut cur, "support_len", 8)?;
            let mut support = Vec::with_capacity(support_len);
            for _ in 0..support_len {
                support.push(read_u64(&mut cur, "support")? as usize);
            }
            let support =
                IndexSet::new(support, len).map_err(|e| Error::format("support", e.to_string()))?;
            let moment_len = read_len(&mut cur, "moment_len", 24)?;
            let mut idx = Vec::with_capacity(moment_len);
            let mut mu = Vec::with_capacity(moment_len);
            let mut nu = Vec::with_capacity(moment_len);
            for _ in 0..moment_len {
                idx.push(read_u64(&mut cur, "moments")? as usize);
                mu.push(read_f64(&mut cur, "moments")?);
                nu.push(read_f64(&mut cur, "moments")?);
            }
            if idx.last().is_some_and(|&j| j >= len) {
                return Err(Error::format("moments", "index outside tensor"));
            }
            let mu_buf = SparseBuffer::from_parts(idx.clone(), mu, m)
                .map_err(|e| Error::format("moments", e.to_string()))?;
            let nu_buf = SparseBuffer::from_parts(idx, nu, m)
                .map_err(|e| Error::format("moments", e.to_string()))?;
            let mut ts = TensorState::new(id.to_string(), len, m);
            ts.support = support;
            ts.mu = mu_buf;
            ts.nu = nu_buf;
            tensors.push(ts);
        }
        if (cur.position() as usize) != bytes.len() {
            return Err(Error::format("trailer", "unexpected bytes after last tensor"));
        }
        Ok(SoState::from_parts(tensors, t_all.unwrap_or(0), seed))
    }
}

fn read_u32(cur: &mut Cursor<&[u8]>, field: &'static str) -> Result<u32> {
    cur.read_u32::<LittleEndian>()
        .map_err(|_| Error::format(field, "truncated"))
}

fn read_u64(cur: &mut Cursor<&[u8]>, field: &'static str) -> Result<u64> {
    cur.read_u64::<LittleEndian>()
        .map_err(|_| Error::format(field, "truncated"))
}

fn read_f64(cur: &mut Cursor<&[u8]>, field: &'static str) -> Result<f64> {
    cur.read_f64::<LittleEndian>()
        .map_err(|_| Error::format(field, "truncated"))
}

/// Reads a count and checks the remaining bytes can hold it.
fn read_len(cur: &mut Cursor<&[u8]>, field: &'static str, elem: usize) -> Result<usize> {
    let n = read_u64(cur, field)? as usize;
    let remaining = cur.get_ref().len() - cur.position() as usize;
    if n.checked_mul(elem).map_or(true, |b| b > remaining) {
        return Err(Error::format(field, format!("{n} entries do not fit in {remaining} bytes")));
    }
    Ok(n)
}
