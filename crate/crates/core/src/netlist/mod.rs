//! Gate-level circuit representation.
//!
//! A [`Circuit`] is an immutable, validated netlist of two-input (or one-input) Boolean gates.
//! Wire names are interned to dense [`WireId`]s in a canonical order: garbler inputs, evaluator
//! inputs, then gate outputs in gate order. Two circuits that describe the same netlist with the
//! same gate order therefore compare equal.
//!
//! Input bit order for evaluation is always garbler inputs first, then evaluator inputs, each in
//! declaration order.

mod bench;
mod verilog;

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::fmt;

use serde::Serialize;
use thiserror::Error;

pub use bench::{emit_bench, parse_bench};
pub use verilog::parse_verilog_subset;

/// Errors raised while parsing, building or evaluating a circuit.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum NetlistError {
    #[error("line {line}: syntax error: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown gate kind `{kind}`")]
    UnknownGate { line: usize, kind: String },
    #[error("line {line}: unsupported construct: {construct}")]
    Unsupported { line: usize, construct: String },
    #[error("undeclared wire `{0}`")]
    UndeclaredWire(String),
    #[error("wire `{0}` has more than one driver")]
    DuplicateDriver(String),
    #[error("cyclic definition through wire `{0}`")]
    Cycle(String),
    #[error("{kind} gate driving `{wire}` has {got} inputs, expected {expected}")]
    Arity {
        kind: GateKind,
        wire: String,
        got: usize,
        expected: usize,
    },
    #[error("wire `{0}` is not a circuit input")]
    NotAnInput(String),
    #[error("expected {expected} input bits, got {got}")]
    InputLength { expected: usize, got: usize },
}

/// The eight supported gate kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum GateKind {
    And,
    Or,
    Nand,
    Nor,
    Xor,
    Xnor,
    Not,
    Buf,
}

impl GateKind {
    pub const ALL: [GateKind; 8] = [
        GateKind::And,
        GateKind::Or,
        GateKind::Nand,
        GateKind::Nor,
        GateKind::Xor,
        GateKind::Xnor,
        GateKind::Not,
        GateKind::Buf,
    ];

    pub fn arity(self) -> usize {
        match self {
            GateKind::Not | GateKind::Buf => 1,
            _ => 2,
        }
    }

    /// Free gates cost no garbled table: XOR/XNOR via the global offset, NOT/BUF as label
    /// pass-through.
    pub fn is_free(self) -> bool {
        matches!(
            self,
            GateKind::Xor | GateKind::Xnor | GateKind::Not | GateKind::Buf
        )
    }

    /// Plaintext semantics. `b` is ignored by unary kinds.
    #[inline]
    pub fn eval(self, a: bool, b: bool) -> bool {
        match self {
            GateKind::And => a & b,
            GateKind::Or => a | b,
            GateKind::Nand => !(a & b),
            GateKind::Nor => !(a | b),
            GateKind::Xor => a ^ b,
            GateKind::Xnor => !(a ^ b),
            GateKind::Not => !a,
            GateKind::Buf => a,
        }
    }

    pub fn bench_name(self) -> &'static str {
        match self {
            GateKind::And => "AND",
            GateKind::Or => "OR",
            GateKind::Nand => "NAND",
            GateKind::Nor => "NOR",
            GateKind::Xor => "XOR",
            GateKind::Xnor => "XNOR",
            GateKind::Not => "NOT",
            GateKind::Buf => "BUF",
        }
    }

    /// Case-insensitive; accepts the ISCAS spelling `BUFF`.
    pub fn from_bench_name(name: &str) -> Option<Self> {
        let kind = match name.to_ascii_uppercase().as_str() {
            "AND" => GateKind::And,
            "OR" => GateKind::Or,
            "NAND" => GateKind::Nand,
            "NOR" => GateKind::Nor,
            "XOR" => GateKind::Xor,
            "XNOR" => GateKind::Xnor,
            "NOT" => GateKind::Not,
            "BUF" | "BUFF" => GateKind::Buf,
            _ => return None,
        };
        Some(kind)
    }
}

impl fmt::Display for GateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.bench_name())
    }
}

/// Dense wire index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct WireId(pub u32);

impl WireId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Gate {
    pub kind: GateKind,
    pub a: WireId,
    /// Second operand; `None` exactly for NOT/BUF.
    pub b: Option<WireId>,
    pub out: WireId,
}

impl Gate {
    pub fn inputs(&self) -> impl Iterator<Item = WireId> + '_ {
        std::iter::once(self.a).chain(self.b)
    }
}

/// A validated, acyclic gate-level circuit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Circuit {
    name: String,
    wire_names: Vec<String>,
    gates: Vec<Gate>,
    garbler_inputs: Vec<WireId>,
    evaluator_inputs: Vec<WireId>,
    outputs: Vec<WireId>,
    topo: Vec<usize>,
}

/// Incremental construction by wire name. Names are case-sensitive.
#[derive(Debug, Clone, Default)]
pub struct CircuitBuilder {
    name: String,
    names: Vec<String>,
    index: HashMap<String, u32>,
    gates: Vec<(GateKind, Vec<u32>, u32)>,
    garbler_inputs: Vec<u32>,
    evaluator_inputs: Vec<u32>,
    outputs: Vec<u32>,
}

impl CircuitBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        CircuitBuilder {
            name: name.into(),
            ..Default::default()
        }
    }

    fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.index.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_string());
        self.index.insert(name.to_string(), id);
        id
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn evaluator_input(&mut self, name: &str) -> &mut Self {
        let id = self.intern(name);
        self.evaluator_inputs.push(id);
        self
    }

    pub fn garbler_input(&mut self, name: &str) -> &mut Self {
        let id = self.intern(name);
        self.garbler_inputs.push(id);
        self
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        let id = self.intern(name);
        self.outputs.push(id);
        self
    }

    pub fn gate(&mut self, kind: GateKind, inputs: &[&str], out: &str) -> &mut Self {
        let ins = inputs.iter().map(|n| self.intern(n)).collect();
        let out = self.intern(out);
        self.gates.push((kind, ins, out));
        self
    }

    pub fn build(&self) -> Result<Circuit, NetlistError> {
        let name_of = |id: u32| self.names[id as usize].clone();
        let n = self.names.len();

        // Inputs may not be declared twice or in both partitions.
        let mut defined = vec![false; n];
        for &w in self.garbler_inputs.iter().chain(&self.evaluator_inputs) {
            if defined[w as usize] {
                return Err(NetlistError::DuplicateDriver(name_of(w)));
            }
            defined[w as usize] = true;
        }
        for (kind, ins, out) in &self.gates {
            if ins.len() != kind.arity() {
                return Err(NetlistError::Arity {
                    kind: *kind,
                    wire: name_of(*out),
                    got: ins.len(),
                    expected: kind.arity(),
                });
            }
            if defined[*out as usize] {
                return Err(NetlistError::DuplicateDriver(name_of(*out)));
            }
            defined[*out as usize] = true;
        }
        for (_, ins, _) in &self.gates {
            if let Some(&w) = ins.iter().find(|&&w| !defined[w as usize]) {
                return Err(NetlistError::UndeclaredWire(name_of(w)));
            }
        }
        if let Some(&w) = self.outputs.iter().find(|&&w| !defined[w as usize]) {
            return Err(NetlistError::UndeclaredWire(name_of(w)));
        }

        // Canonical renumbering: garbler inputs, evaluator inputs, gate outputs.
        let mut remap = vec![u32::MAX; n];
        let mut wire_names = Vec::with_capacity(n);
        let order = self
            .garbler_inputs
            .iter()
            .chain(&self.evaluator_inputs)
            .chain(self.gates.iter().map(|(_, _, out)| out));
        for &old in order {
            remap[old as usize] = wire_names.len() as u32;
            wire_names.push(self.names[old as usize].clone());
        }
        let map = |old: u32| WireId(remap[old as usize]);
        let gates: Vec<Gate> = self
            .gates
            .iter()
            .map(|(kind, ins, out)| Gate {
                kind: *kind,
                a: map(ins[0]),
                b: ins.get(1).map(|&w| map(w)),
                out: map(*out),
            })
            .collect();
        let garbler_inputs: Vec<WireId> = self.garbler_inputs.iter().map(|&w| map(w)).collect();
        let evaluator_inputs: Vec<WireId> = self.evaluator_inputs.iter().map(|&w| map(w)).collect();
        let num_inputs = garbler_inputs.len() + evaluator_inputs.len();

        let topo = topo_order(&gates, wire_names.len(), num_inputs)
            .map_err(|w| NetlistError::Cycle(wire_names[w.index()].clone()))?;

        Ok(Circuit {
            name: self.name.clone(),
            wire_names,
            gates,
            garbler_inputs,
            evaluator_inputs,
            outputs: self.outputs.iter().map(|&w| map(w)).collect(),
            topo,
        })
    }
}

/// Kahn's algorithm, always releasing the lowest-index ready gate first so the order is
/// deterministic for a fixed gate list. Wires below `num_inputs` are primary inputs; every other
/// wire is driven by exactly one gate. If some gates cannot be ordered, returns the output wire
/// of the first such gate.
pub fn topo_order(gates: &[Gate], num_wires: usize, num_inputs: usize) -> Result<Vec<usize>, WireId> {
    let mut driver = vec![usize::MAX; num_wires];
    for (i, g) in gates.iter().enumerate() {
        driver[g.out.index()] = i;
    }
    let mut pending = vec![0usize; gates.len()];
    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); gates.len()];
    for (i, g) in gates.iter().enumerate() {
        for w in g.inputs() {
            if w.index() >= num_inputs {
                let d = driver[w.index()];
                pending[i] += 1;
                consumers[d].push(i);
            }
        }
    }
    let mut ready: BinaryHeap<Reverse<usize>> = (0..gates.len())
        .filter(|&i| pending[i] == 0)
        .map(Reverse)
        .collect();
    let mut order = Vec::with_capacity(gates.len());
    while let Some(Reverse(i)) = ready.pop() {
        order.push(i);
        for &c in &consumers[i] {
            pending[c] -= 1;
            if pending[c] == 0 {
                ready.push(Reverse(c));
            }
        }
    }
    if order.len() < gates.len() {
        let stuck = (0..gates.len()).find(|&i| pending[i] > 0).unwrap();
        return Err(gates[stuck].out);
    }
    Ok(order)
}

impl Circuit {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn num_wires(&self) -> usize {
        self.wire_names.len()
    }

    pub fn wire_name(&self, w: WireId) -> &str {
        &self.wire_names[w.index()]
    }

    pub fn wire_by_name(&self, name: &str) -> Option<WireId> {
        self.wire_names
            .iter()
            .position(|n| n == name)
            .map(|i| WireId(i as u32))
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn garbler_inputs(&self) -> &[WireId] {
        &self.garbler_inputs
    }

    pub fn evaluator_inputs(&self) -> &[WireId] {
        &self.evaluator_inputs
    }

    /// All inputs in evaluation bit order.
    pub fn inputs(&self) -> impl Iterator<Item = WireId> + '_ {
        self.garbler_inputs.iter().chain(&self.evaluator_inputs).copied()
    }

    pub fn input_size(&self) -> usize {
        self.garbler_inputs.len() + self.evaluator_inputs.len()
    }

    pub fn outputs(&self) -> &[WireId] {
        &self.outputs
    }

    /// Gate indices in dependency order, stable by gate index.
    pub fn topo_order(&self) -> &[usize] {
        &self.topo
    }

    /// Gates in dependency order.
    pub fn topo_gates(&self) -> impl Iterator<Item = &Gate> + '_ {
        self.topo.iter().map(|&i| &self.gates[i])
    }

    /// Moves the named inputs into the garbler partition. Remaining inputs stay with the
    /// evaluator; relative declaration order is kept within each partition.
    pub fn with_garbler_inputs<S: AsRef<str>>(&self, names: &[S]) -> Result<Circuit, NetlistError> {
        let mut chosen = HashSet::new();
        for name in names {
            let name = name.as_ref();
            let w = self
                .wire_by_name(name)
                .ok_or_else(|| NetlistError::UndeclaredWire(name.to_string()))?;
            if w.index() >= self.input_size() {
                return Err(NetlistError::NotAnInput(name.to_string()));
            }
            chosen.insert(w);
        }
        let mut b = CircuitBuilder::new(self.name.clone());
        for w in self.inputs() {
            if chosen.contains(&w) {
                b.garbler_input(self.wire_name(w));
            }
        }
        for w in self.inputs() {
            if !chosen.contains(&w) {
                b.evaluator_input(self.wire_name(w));
            }
        }
        self.copy_body_into(&mut b);
        b.build()
    }

    /// Moves every input into the evaluator partition.
    pub fn all_evaluator_inputs(&self) -> Circuit {
        self.with_garbler_inputs::<&str>(&[])
            .expect("repartitioning a valid circuit")
    }

    fn copy_body_into(&self, b: &mut CircuitBuilder) {
        for g in &self.gates {
            let ins: Vec<&str> = g.inputs().map(|w| self.wire_name(w)).collect();
            b.gate(g.kind, &ins, self.wire_name(g.out));
        }
        for &o in &self.outputs {
            b.output(self.wire_name(o));
        }
    }

    /// Plaintext evaluation: the reference semantics every garbled run is checked against.
    pub fn eval_plain(&self, x: &[bool]) -> Result<Vec<bool>, NetlistError> {
        if x.len() != self.input_size() {
            return Err(NetlistError::InputLength {
                expected: self.input_size(),
                got: x.len(),
            });
        }
        let mut values = vec![false; self.num_wires()];
        values[..x.len()].copy_from_slice(x);
        for g in self.topo_gates() {
            let a = values[g.a.index()];
            let b = g.b.is_some_and(|w| values[w.index()]);
            values[g.out.index()] = g.kind.eval(a, b);
        }
        Ok(self.outputs.iter().map(|w| values[w.index()]).collect())
    }

    pub fn stats(&self) -> CircuitStats {
        CircuitStats::of(self)
    }
}

/// Gate-count summary. `xor_count` counts every free gate (XOR, XNOR, NOT, BUF); the raw per-kind
/// split is in `histogram`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CircuitStats {
    pub gate_count: usize,
    pub xor_count: usize,
    pub nonfree_count: usize,
    pub input_size: usize,
    pub output_size: usize,
    pub instruction_count: usize,
    pub histogram: BTreeMap<GateKind, usize>,
}

/// Gates per garbled instruction.
pub const GATES_PER_INSTRUCTION: usize = 4;

impl CircuitStats {
    pub fn of(c: &Circuit) -> Self {
        let mut histogram = BTreeMap::new();
        for g in c.gates() {
            *histogram.entry(g.kind).or_insert(0) += 1;
        }
        let xor_count = c.gates().iter().filter(|g| g.kind.is_free()).count();
        let nonfree_count = c.gates().len() - xor_count;
        CircuitStats {
            gate_count: c.gates().len(),
            xor_count,
            nonfree_count,
            input_size: c.input_size(),
            output_size: c.outputs().len(),
            instruction_count: nonfree_count.div_ceil(GATES_PER_INSTRUCTION),
            histogram,
        }
    }
}

/// The `stats` JSON report.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StatsReport {
    pub name: String,
    pub gates: usize,
    pub xor: usize,
    pub nonfree: usize,
    pub inputs: usize,
    pub outputs: usize,
    pub instructions: usize,
}

impl StatsReport {
    pub fn new(c: &Circuit) -> Self {
        let s = c.stats();
        StatsReport {
            name: c.name().to_string(),
            gates: s.gate_count,
            xor: s.xor_count,
            nonfree: s.nonfree_count,
            inputs: s.input_size,
            outputs: s.output_size,
            instructions: s.instruction_count,
        }
    }
}

/// Bit vector from a string of `0`/`1` characters; `_` and whitespace are ignored.
pub fn parse_bits(s: &str) -> Option<Vec<bool>> {
    s.chars()
        .filter(|c| !c.is_whitespace() && *c != '_')
        .map(|c| match c {
            '0' => Some(false),
            '1' => Some(true),
            _ => None,
        })
        .collect()
}

pub fn format_bits(bits: &[bool]) -> String {
    bits.iter().map(|&b| if b { '1' } else { '0' }).collect()
}

/// Bits of `value`, least-significant first.
pub fn bits_of(value: u64, width: usize) -> Vec<bool> {
    (0..width).map(|i| (value >> i) & 1 == 1).collect()
}
