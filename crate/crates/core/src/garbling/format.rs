//! Binary files for garbled circuits and labels. Little-endian throughout.
//!
//! Garbled circuit:
//!
//! ```text
//! magic      "GEDA"
//! version    u16 (= 1)
//! num_wires  u32
//! counts     u32 garbler inputs, u32 evaluator inputs, u32 outputs, u32 gates
//! wires      u32 per garbler input, evaluator input, output (in that order)
//! gates      tag u8, then u32 a, u32 b, u32 out
//!              tag 0: free gate, b = 0xFFFF_FFFF when it has one operand
//!              tag 1: table gate, followed by 3 x 16 ciphertext bytes
//! ```
//!
//! Table gates are numbered by order of appearance; that number is the hash tweak.
//!
//! Label pairs: 32 bytes per input wire in evaluation bit order, `L0` then `L1`.
//! Labels: 16 bytes per label. Decode bits: one byte (0 or 1) per output.

use thiserror::Error;

use super::{
    DecodingInfo, Delta, EncodingInfo, GarbledCircuit, GarbledGate, GarbledTable, WireLabel, ROWS_PER_TABLE,
    ROW_BYTES,
};
use crate::netlist::WireId;

pub const MAGIC: &[u8; 4] = b"GEDA";
pub const VERSION: u16 = 1;
const NO_WIRE: u32 = u32::MAX;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic, not a garbled circuit file")]
    BadMagic,
    #[error("unsupported version {0}")]
    Version(u16),
    #[error("truncated input at byte {0}")]
    Truncated(usize),
    #[error("unknown gate tag {0}")]
    UnknownTag(u8),
    #[error("wire {wire} out of range (circuit has {num_wires})")]
    WireRange { wire: u32, num_wires: u32 },
    #[error("{0} trailing bytes")]
    Trailing(usize),
    #[error("length {len} is not a multiple of {unit}")]
    Length { len: usize, unit: usize },
    #[error("label pairs do not share one offset")]
    InconsistentDelta,
    #[error("decode byte {0} is not 0 or 1")]
    DecodeByte(u8),
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or(FormatError::Truncated(self.buf.len()))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u128(&mut self) -> Result<u128, FormatError> {
        Ok(u128::from_le_bytes(self.take(16)?.try_into().unwrap()))
    }
}

impl GarbledCircuit {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(32 + self.gates.len() * 13 + self.table_bytes());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        for v in [
            self.num_wires,
            self.garbler_inputs.len() as u32,
            self.evaluator_inputs.len() as u32,
            self.outputs.len() as u32,
            self.gates.len() as u32,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        for w in self
            .garbler_inputs
            .iter()
            .chain(&self.evaluator_inputs)
            .chain(&self.outputs)
        {
            out.extend_from_slice(&w.0.to_le_bytes());
        }
        for g in &self.gates {
            match g {
                GarbledGate::Free { a, b, out: o } => {
                    out.push(0);
                    for v in [a.0, b.map_or(NO_WIRE, |w| w.0), o.0] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                }
                GarbledGate::Table {
                    a, b, out: o, table, ..
                } => {
                    out.push(1);
                    for v in [a.0, b.0, o.0] {
                        out.extend_from_slice(&v.to_le_bytes());
                    }
                    for row in table.0 {
                        out.extend_from_slice(&row.to_le_bytes());
                    }
                }
            }
        }
        out
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, FormatError> {
        let mut r = Reader { buf, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(FormatError::BadMagic);
        }
        let version = r.u16()?;
        if version != VERSION {
            return Err(FormatError::Version(version));
        }
        let num_wires = r.u32()?;
        let (ng, ne, no, ngates) = (r.u32()?, r.u32()?, r.u32()?, r.u32()?);
        let wire = |r: &mut Reader| -> Result<WireId, FormatError> {
            let w = r.u32()?;
            if w >= num_wires {
                return Err(FormatError::WireRange { wire: w, num_wires });
            }
            Ok(WireId(w))
        };
        let list = |r: &mut Reader, n: u32| -> Result<Vec<WireId>, FormatError> {
            (0..n).map(|_| wire(r)).collect()
        };
        let garbler_inputs = list(&mut r, ng)?;
        let evaluator_inputs = list(&mut r, ne)?;
        let outputs = list(&mut r, no)?;
        let mut gates = Vec::new();
        let mut next_id = 0u64;
        for _ in 0..ngates {
            let tag = r.u8()?;
            match tag {
                0 => {
                    let a = wire(&mut r)?;
                    let b = match r.u32()? {
                        NO_WIRE => None,
                        w if w < num_wires => Some(WireId(w)),
                        w => return Err(FormatError::WireRange { wire: w, num_wires }),
                    };
                    let out = wire(&mut r)?;
                    gates.push(GarbledGate::Free { a, b, out });
                }
                1 => {
                    let (a, b, out) = (wire(&mut r)?, wire(&mut r)?, wire(&mut r)?);
                    let mut rows = [0u128; ROWS_PER_TABLE];
                    for row in &mut rows {
                        *row = r.u128()?;
                    }
                    gates.push(GarbledGate::Table {
                        id: next_id,
                        a,
                        b,
                        out,
                        table: GarbledTable(rows),
                    });
                    next_id += 1;
                }
                t => return Err(FormatError::UnknownTag(t)),
            }
        }
        if r.pos != buf.len() {
            return Err(FormatError::Trailing(buf.len() - r.pos));
        }
        Ok(GarbledCircuit {
            num_wires,
            garbler_inputs,
            evaluator_inputs,
            outputs,
            gates,
        })
    }
}

pub fn labels_to_bytes(labels: &[WireLabel]) -> Vec<u8> {
    labels.iter().flat_map(|l| l.to_bytes()).collect()
}

pub fn labels_from_bytes(buf: &[u8]) -> Result<Vec<WireLabel>, FormatError> {
    if !buf.len().is_multiple_of(ROW_BYTES) {
        return Err(FormatError::Length {
            len: buf.len(),
            unit: ROW_BYTES,
        });
    }
    Ok(buf
        .chunks_exact(ROW_BYTES)
        .map(|c| WireLabel::from_bytes(c.try_into().unwrap()))
        .collect())
}

impl EncodingInfo {
    /// Label pairs file contents.
    pub fn to_bytes(&self) -> Vec<u8> {
        (0..self.input_size())
            .flat_map(|i| {
                let (l0, l1) = self.pair(i);
                l0.to_bytes().into_iter().chain(l1.to_bytes())
            })
            .collect()
    }

    /// Reads a label pairs file; `garbler_len` says how many leading pairs belong to the
    /// garbler.
    pub fn from_bytes(buf: &[u8], garbler_len: usize) -> Result<Self, FormatError> {
        let labels = labels_from_bytes(buf)?;
        if labels.len() % 2 != 0 {
            return Err(FormatError::Length {
                len: buf.len(),
                unit: 2 * ROW_BYTES,
            });
        }
        let pairs: Vec<(WireLabel, WireLabel)> = labels.chunks_exact(2).map(|p| (p[0], p[1])).collect();
        let delta = pairs.first().map_or(1, |(l0, l1)| (*l0 ^ *l1).0);
        if delta & 1 == 0 || pairs.iter().any(|(l0, l1)| (*l0 ^ *l1).0 != delta) {
            return Err(FormatError::InconsistentDelta);
        }
        Ok(EncodingInfo {
            delta: Delta::new(delta),
            zero: pairs.into_iter().map(|(l0, _)| l0).collect(),
            garbler_len: garbler_len.min(labels.len() / 2),
        })
    }
}

impl DecodingInfo {
    pub fn to_bytes(&self) -> Vec<u8> {
        self.0.iter().map(|&b| b as u8).collect()
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self, FormatError> {
        buf.iter()
            .map(|&b| match b {
                0 => Ok(false),
                1 => Ok(true),
                other => Err(FormatError::DecodeByte(other)),
            })
            .collect::<Result<_, _>>()
            .map(DecodingInfo)
    }
}
