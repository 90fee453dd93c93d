//! Yao garbling with Free-XOR, point-and-permute and 3-row reduction (GRR3).
//!
//! The scheme is the usual five-tuple: [`garble`] produces the garbled circuit, the input
//! encoding and the output decoding; [`encode`] maps plaintext inputs to labels; [`evaluate`]
//! runs the garbled circuit on labels; [`decode`] maps output labels back to bits; plaintext
//! semantics live in [`Circuit::eval_plain`].
//!
//! Every wire carries two 128-bit labels `L0` and `L1 = L0 ^ delta`. The least-significant bit
//! of a label is its color; `delta` has color 1, so the two labels of a wire always differ in
//! color. Free gates (XOR, XNOR, NOT, BUF) cost nothing: the evaluator XORs or copies labels, and
//! the garbler folds inversions into the output's zero label. AND/OR/NAND/NOR become three
//! 16-byte rows; the row for color pair (0,0) is forced to zero and not stored.
//!
//! The garbled circuit keeps the wire topology but not gate kinds: the evaluator sees only
//! "free" and "table" gates. What it reveals is the circuit size (gate, input and output counts)
//! and that skeleton.

mod format;
mod hash;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use thiserror::Error;

use crate::netlist::{Circuit, GateKind, WireId};

pub use format::{labels_from_bytes, labels_to_bytes, FormatError};
pub use hash::gate_hash;
pub(crate) use hash::{hash_tweaked, DOMAIN_OT, DOMAIN_STREAM, DOMAIN_TAG};

/// Bytes per stored ciphertext row.
pub const ROW_BYTES: usize = 16;
/// Rows stored per table gate.
pub const ROWS_PER_TABLE: usize = 3;
/// Garbled-material bytes per non-free gate.
pub const TABLE_BYTES: usize = ROW_BYTES * ROWS_PER_TABLE;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GarbleError {
    #[error("expected {expected} input labels, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("expected {expected} output labels, got {got}")]
    OutputLength { expected: usize, got: usize },
    #[error("gate reads wire {0} before it holds a label")]
    MissingLabel(u32),
    #[error("malformed garbled circuit: {0}")]
    Malformed(String),
}

/// A 128-bit wire token.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct WireLabel(pub u128);

impl WireLabel {
    #[inline]
    pub fn color(self) -> bool {
        self.0 & 1 == 1
    }

    pub fn to_bytes(self) -> [u8; 16] {
        self.0.to_le_bytes()
    }

    pub fn from_bytes(bytes: [u8; 16]) -> Self {
        WireLabel(u128::from_le_bytes(bytes))
    }
}

impl std::ops::BitXor for WireLabel {
    type Output = WireLabel;
    #[inline]
    fn bitxor(self, rhs: WireLabel) -> WireLabel {
        WireLabel(self.0 ^ rhs.0)
    }
}

/// The Free-XOR offset shared by all wires of one garbling. Its color bit is always 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Delta(u128);

impl Delta {
    pub fn new(value: u128) -> Self {
        Delta(value | 1)
    }

    pub fn value(self) -> u128 {
        self.0
    }

    pub fn as_label(self) -> WireLabel {
        WireLabel(self.0)
    }
}

/// 256-bit seed for the deterministic generator behind garbling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Seed(pub [u8; 32]);

impl Seed {
    /// Fresh seed from the operating system.
    pub fn random() -> Self {
        let mut bytes = [0u8; 32];
        rand::rngs::OsRng.fill_bytes(&mut bytes);
        Seed(bytes)
    }

    pub fn from_u64(v: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[..8].copy_from_slice(&v.to_le_bytes());
        Seed(bytes)
    }

    pub fn from_hex(s: &str) -> Option<Self> {
        let v = hex::decode(s.trim()).ok()?;
        Some(Seed(v.try_into().ok()?))
    }

    pub fn to_hex(&self) -> String {
        hex::encode(self.0)
    }

    /// Independent generator for one purpose. Stream 0 drives garbling itself.
    pub fn rng(&self, stream: u64) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::from_seed(self.0);
        rng.set_stream(stream);
        rng
    }
}

/// Generator streams derived from one session seed.
pub(crate) mod streams {
    pub const GARBLE: u64 = 0;
    pub const SCHEDULE: u64 = 1;
    pub const MASK: u64 = 2;
    pub const OT: u64 = 3;
    pub const STREAM_KEYS: u64 = 4;
}

/// Zero labels and the offset for every input wire, in evaluation bit order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EncodingInfo {
    delta: Delta,
    zero: Vec<WireLabel>,
    garbler_len: usize,
}

impl EncodingInfo {
    pub fn delta(&self) -> Delta {
        self.delta
    }

    pub fn input_size(&self) -> usize {
        self.zero.len()
    }

    pub fn garbler_len(&self) -> usize {
        self.garbler_len
    }

    /// `(L0, L1)` for input `i`.
    pub fn pair(&self, i: usize) -> (WireLabel, WireLabel) {
        let l0 = self.zero[i];
        (l0, l0 ^ self.delta.as_label())
    }

    pub fn label(&self, i: usize, bit: bool) -> WireLabel {
        if bit {
            self.zero[i] ^ self.delta.as_label()
        } else {
            self.zero[i]
        }
    }
}

/// Output decode bits: the color of each output wire's zero label.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodingInfo(pub Vec<bool>);

/// Three stored rows, for color pairs (0,1), (1,0) and (1,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GarbledTable(pub [u128; ROWS_PER_TABLE]);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum GarbledGate {
    /// `out = a ^ b`, or `out = a` when `b` is absent.
    Free {
        a: WireId,
        b: Option<WireId>,
        out: WireId,
    },
    /// Table gate; `id` is its position among the table gates and the hash tweak.
    Table {
        id: u64,
        a: WireId,
        b: WireId,
        out: WireId,
        table: GarbledTable,
    },
}

impl GarbledGate {
    pub fn out(&self) -> WireId {
        match self {
            GarbledGate::Free { out, .. } | GarbledGate::Table { out, .. } => *out,
        }
    }

    pub fn inputs(&self) -> impl Iterator<Item = WireId> {
        let (a, b) = match *self {
            GarbledGate::Free { a, b, .. } => (a, b),
            GarbledGate::Table { a, b, .. } => (a, Some(b)),
        };
        std::iter::once(a).chain(b)
    }

    pub fn is_table(&self) -> bool {
        matches!(self, GarbledGate::Table { .. })
    }
}

/// The garbled circuit: wiring skeleton plus one table per non-free gate, in dependency order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledCircuit {
    pub(crate) num_wires: u32,
    pub(crate) garbler_inputs: Vec<WireId>,
    pub(crate) evaluator_inputs: Vec<WireId>,
    pub(crate) outputs: Vec<WireId>,
    pub(crate) gates: Vec<GarbledGate>,
}

impl GarbledCircuit {
    pub fn num_wires(&self) -> usize {
        self.num_wires as usize
    }

    pub fn garbler_inputs(&self) -> &[WireId] {
        &self.garbler_inputs
    }

    pub fn evaluator_inputs(&self) -> &[WireId] {
        &self.evaluator_inputs
    }

    pub fn inputs(&self) -> impl Iterator<Item = WireId> + '_ {
        self.garbler_inputs.iter().chain(&self.evaluator_inputs).copied()
    }

    pub fn input_size(&self) -> usize {
        self.garbler_inputs.len() + self.evaluator_inputs.len()
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    pub fn gates(&self) -> &[GarbledGate] {
        &self.gates
    }

    pub fn tables(&self) -> impl Iterator<Item = &GarbledTable> + '_ {
        self.gates.iter().filter_map(|g| match g {
            GarbledGate::Table { table, .. } => Some(table),
            GarbledGate::Free { .. } => None,
        })
    }

    pub fn table_count(&self) -> usize {
        self.gates.iter().filter(|g| g.is_table()).count()
    }

    /// Ciphertext bytes: 48 per table gate.
    pub fn table_bytes(&self) -> usize {
        self.table_count() * TABLE_BYTES
    }
}

/// Everything the garbler holds after garbling, including every wire's zero label.
#[derive(Debug, Clone)]
pub struct Garbling {
    pub circuit: GarbledCircuit,
    pub encoding: EncodingInfo,
    pub decoding: DecodingInfo,
    zero_labels: Vec<WireLabel>,
}

impl Garbling {
    pub fn delta(&self) -> Delta {
        self.encoding.delta
    }

    /// Zero label of every wire, by wire index.
    pub fn zero_labels(&self) -> &[WireLabel] {
        &self.zero_labels
    }

    pub fn into_parts(self) -> (GarbledCircuit, EncodingInfo, DecodingInfo) {
        (self.circuit, self.encoding, self.decoding)
    }
}

/// Label carrying `bit` on a wire whose zero label is `l0`.
#[inline]
fn select(l0: WireLabel, bit: bool, delta: Delta) -> WireLabel {
    if bit {
        l0 ^ delta.as_label()
    } else {
        l0
    }
}

fn garble_table(
    kind: GateKind,
    a0: WireLabel,
    b0: WireLabel,
    delta: Delta,
    id: u64,
) -> (WireLabel, GarbledTable) {
    let (pa, pb) = (a0.color(), b0.color());
    // Row (0,0) holds the labels whose plaintext values equal the zero labels' colors.
    let h00 = gate_hash(select(a0, pa, delta), select(b0, pb, delta), id);
    let out0 = WireLabel(h00) ^ select(WireLabel(0), kind.eval(pa, pb), delta);
    let mut rows = [0u128; ROWS_PER_TABLE];
    for (r, row) in rows.iter_mut().enumerate() {
        let (ca, cb) = ((r + 1) >> 1 == 1, (r + 1) & 1 == 1);
        let (x, y) = (ca ^ pa, cb ^ pb);
        let h = gate_hash(select(a0, x, delta), select(b0, y, delta), id);
        *row = h ^ select(out0, kind.eval(x, y), delta).0;
    }
    (out0, GarbledTable(rows))
}

#[inline]
fn eval_table(a: WireLabel, b: WireLabel, id: u64, table: &GarbledTable) -> WireLabel {
    let h = gate_hash(a, b, id);
    let row = ((a.color() as usize) << 1) | b.color() as usize;
    if row == 0 {
        WireLabel(h)
    } else {
        WireLabel(h ^ table.0[row - 1])
    }
}

/// Garbles `c` with randomness drawn from `seed`. Identical seeds give bit-identical results.
pub fn garble_full(c: &Circuit, seed: &Seed) -> Garbling {
    let mut rng = seed.rng(streams::GARBLE);
    let delta = Delta::new(rng.gen());
    let mut zero = vec![WireLabel(0); c.num_wires()];
    for w in c.inputs() {
        zero[w.index()] = WireLabel(rng.gen());
    }

    let mut gates = Vec::with_capacity(c.gates().len());
    let mut next_id = 0u64;
    for g in c.topo_gates() {
        let a0 = zero[g.a.index()];
        let out0 = match g.kind {
            GateKind::Buf | GateKind::Not | GateKind::Xor | GateKind::Xnor => {
                let b0 = g.b.map_or(WireLabel(0), |w| zero[w.index()]);
                let invert = matches!(g.kind, GateKind::Not | GateKind::Xnor);
                gates.push(GarbledGate::Free {
                    a: g.a,
                    b: g.b,
                    out: g.out,
                });
                select(a0 ^ b0, invert, delta)
            }
            GateKind::And | GateKind::Or | GateKind::Nand | GateKind::Nor => {
                let b = g.b.expect("binary gate");
                let (out0, table) = garble_table(g.kind, a0, zero[b.index()], delta, next_id);
                gates.push(GarbledGate::Table {
                    id: next_id,
                    a: g.a,
                    b,
                    out: g.out,
                    table,
                });
                next_id += 1;
                out0
            }
        };
        zero[g.out.index()] = out0;
    }

    let encoding = EncodingInfo {
        delta,
        zero: c.inputs().map(|w| zero[w.index()]).collect(),
        garbler_len: c.garbler_inputs().len(),
    };
    let decoding = DecodingInfo(c.outputs().iter().map(|w| zero[w.index()].color()).collect());
    let circuit = GarbledCircuit {
        num_wires: c.num_wires() as u32,
        garbler_inputs: c.garbler_inputs().to_vec(),
        evaluator_inputs: c.evaluator_inputs().to_vec(),
        outputs: c.outputs().to_vec(),
        gates,
    };
    Garbling {
        circuit,
        encoding,
        decoding,
        zero_labels: zero,
    }
}

/// `(F, e, d)` for circuit `c`.
pub fn garble(c: &Circuit, seed: &Seed) -> (GarbledCircuit, EncodingInfo, DecodingInfo) {
    garble_full(c, seed).into_parts()
}

/// Picks `L_{x_i}` for every input.
pub fn encode(e: &EncodingInfo, x: &[bool]) -> Result<Vec<WireLabel>, GarbleError> {
    if x.len() != e.input_size() {
        return Err(GarbleError::InputLength {
            expected: e.input_size(),
            got: x.len(),
        });
    }
    Ok(x.iter().enumerate().map(|(i, &b)| e.label(i, b)).collect())
}

/// Label store for evaluation. Tracks which wires currently hold a label.
pub(crate) struct LabelStore {
    labels: Vec<WireLabel>,
    present: Vec<bool>,
    live: usize,
    peak: usize,
}

impl LabelStore {
    pub fn new(num_wires: usize) -> Self {
        LabelStore {
            labels: vec![WireLabel(0); num_wires],
            present: vec![false; num_wires],
            live: 0,
            peak: 0,
        }
    }

    pub fn get(&self, w: WireId) -> Result<WireLabel, GarbleError> {
        match self.present.get(w.index()) {
            Some(true) => Ok(self.labels[w.index()]),
            _ => Err(GarbleError::MissingLabel(w.0)),
        }
    }

    pub fn set(&mut self, w: WireId, label: WireLabel) -> Result<(), GarbleError> {
        let i = w.index();
        if i >= self.labels.len() {
            return Err(GarbleError::Malformed(format!("wire {} out of range", w.0)));
        }
        if !self.present[i] {
            self.present[i] = true;
            self.live += 1;
            self.peak = self.peak.max(self.live);
        }
        self.labels[i] = label;
        Ok(())
    }

    pub fn drop_label(&mut self, w: WireId) {
        if let Some(p) = self.present.get_mut(w.index()) {
            if *p {
                *p = false;
                self.live -= 1;
            }
        }
    }

    pub fn peak(&self) -> usize {
        self.peak
    }

    pub fn apply(&mut self, gate: &GarbledGate) -> Result<(), GarbleError> {
        let out = match gate {
            GarbledGate::Free { a, b, .. } => {
                let mut l = self.get(*a)?;
                if let Some(b) = b {
                    l = l ^ self.get(*b)?;
                }
                l
            }
            GarbledGate::Table { id, a, b, table, .. } => {
                eval_table(self.get(*a)?, self.get(*b)?, *id, table)
            }
        };
        self.set(gate.out(), out)
    }
}

/// Runs the garbled circuit on input labels `x` (evaluation bit order) and returns one label per
/// output wire.
pub fn evaluate(f: &GarbledCircuit, x: &[WireLabel]) -> Result<Vec<WireLabel>, GarbleError> {
    if x.len() != f.input_size() {
        return Err(GarbleError::InputLength {
            expected: f.input_size(),
            got: x.len(),
        });
    }
    let mut store = LabelStore::new(f.num_wires());
    for (w, &l) in f.inputs().zip(x) {
        store.set(w, l)?;
    }
    for g in &f.gates {
        store.apply(g)?;
    }
    f.outputs.iter().map(|&w| store.get(w)).collect()
}

/// `y_i = color(Y_i) ^ d_i`.
pub fn decode(d: &DecodingInfo, y: &[WireLabel]) -> Result<Vec<bool>, GarbleError> {
    if y.len() != d.0.len() {
        return Err(GarbleError::OutputLength {
            expected: d.0.len(),
            got: y.len(),
        });
    }
    Ok(y.iter().zip(&d.0).map(|(l, &bit)| l.color() ^ bit).collect())
}
