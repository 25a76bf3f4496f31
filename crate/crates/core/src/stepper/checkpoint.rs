//! Binary checkpoints of a run in progress.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! offset  size  field
//! 0       8     magic "FKVCKPT\0"
//! 8       4     u32 format version (1)
//! 12      1     endianness marker, 1 = little-endian
//! 13      3     zero padding
//! 16      8     u64 last computed step j
//! 24      8     u64 dofs per state
//! 32      8     u64 number of states (j + 2: u_{-1}, u_0, ..., u_j)
//! 40      ...   states as consecutive f64 values
//! ```

use std::io::{Read, Write};

use nalgebra::DVector;

use super::StepContext;
use crate::error::{Error, Result};

const MAGIC: &[u8; 8] = b"FKVCKPT\0";
const VERSION: u32 = 1;
const LITTLE_ENDIAN: u8 = 1;

/// States needed to resume the full-history recurrence.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub step: usize,
    pub u_minus1: DVector<f64>,
    /// `u_0 ..= u_step`
    pub states: Vec<DVector<f64>>,
}

pub fn write_checkpoint(ctx: &StepContext, out: &mut impl Write) -> Result<()> {
    let states = ctx.states();
    let ndof = states[0].len();
    out.write_all(MAGIC)?;
    out.write_all(&VERSION.to_le_bytes())?;
    out.write_all(&[LITTLE_ENDIAN, 0, 0, 0])?;
    out.write_all(&(ctx.current_step() as u64).to_le_bytes())?;
    out.write_all(&(ndof as u64).to_le_bytes())?;
    out.write_all(&((states.len() + 1) as u64).to_le_bytes())?;
    for v in std::iter::once(ctx.state_before_start()).chain(states) {
        for x in v.iter() {
            out.write_all(&x.to_le_bytes())?;
        }
    }
    Ok(())
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}

pub fn read_checkpoint(r: &mut impl Read) -> Result<Checkpoint> {
    let mut head = [0u8; 16];
    r.read_exact(&mut head)
        .map_err(|_| Error::Format("checkpoint header is truncated".into()))?;
    if &head[..8] != MAGIC {
        return Err(Error::Format("not a checkpoint file".into()));
    }
    let version = u32::from_le_bytes(head[8..12].try_into().expect("4 bytes"));
    if version != VERSION {
        return Err(Error::Format(format!(
            "unsupported checkpoint version {version}"
        )));
    }
    if head[12] != LITTLE_ENDIAN {
        return Err(Error::Format(format!(
            "unsupported endianness marker {}",
            head[12]
        )));
    }
    let step = read_u64(r)? as usize;
    let ndof = read_u64(r)? as usize;
    let count = read_u64(r)? as usize;
    if count != step + 2 {
        return Err(Error::Format(format!(
            "step {step} needs {} states, file has {count}",
            step + 2
        )));
    }
    let mut vectors = Vec::with_capacity(count);
    let mut buf = [0u8; 8];
    for _ in 0..count {
        let mut v = DVector::zeros(ndof);
        for x in v.iter_mut() {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format("checkpoint data is truncated".into()))?;
            *x = f64::from_le_bytes(buf);
        }
        vectors.push(v);
    }
    let u_minus1 = vectors.remove(0);
    Ok(Checkpoint {
        step,
        u_minus1,
        states: vectors,
    })
}

impl StepContext {
    /// Replaces the computed states by those of a checkpoint.
    pub fn restore(&mut self, ckpt: Checkpoint) -> Result<()> {
        let d = self.discretization();
        let ndof = d.u0.len();
        if ckpt.step > d.n
            || ckpt.u_minus1.len() != ndof
            || ckpt.states.iter().any(|v| v.len() != ndof)
        {
            return Err(Error::GridMismatch(format!(
                "checkpoint at step {} with {} dofs does not fit a run of {} steps with {ndof} dofs",
                ckpt.step,
                ckpt.u_minus1.len(),
                d.n
            )));
        }
        self.restore_states(ckpt.u_minus1, ckpt.states);
        Ok(())
    }
}
