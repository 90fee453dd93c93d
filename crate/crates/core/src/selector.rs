//! Merging several circuits into one selector-gated circuit.
//!
//! Every member reads a shared input bus `in0, in1, ...`; a member with `n` inputs reads the
//! first `n`. Selector bits `sel0, sel1, ...` (least significant first) follow the bus. Output `j`
//! of the merge is a multiplexer tree over output `j` of every member, where members with fewer
//! outputs contribute a constant zero. Each 2-way multiplexer is `a ^ (s & (a ^ b))`: one AND and
//! two XOR gates. Selector values past the last member select the last member.

use serde::Serialize;
use thiserror::Error;

use crate::garbling::TABLE_BYTES;
use crate::netlist::{Circuit, CircuitBuilder, CircuitStats, GateKind, NetlistError};
use crate::protocol::{ot_count, Mode};

pub const MAX_MEMBERS: usize = 64;

#[derive(Debug, Error)]
pub enum SelectorError {
    #[error("need between 2 and {MAX_MEMBERS} circuits, got {0}")]
    MemberCount(usize),
    #[error(transparent)]
    Netlist(#[from] NetlistError),
}

/// Where one member sits inside the merge.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct MemberInfo {
    pub index: usize,
    pub name: String,
    pub selector_value: usize,
    /// Member input names; input `j` reads bus wire `in{j}`.
    pub inputs: Vec<String>,
    /// Member output names; output `j` drives merged output `out{j}`.
    pub outputs: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct CombinedCircuit {
    pub circuit: Circuit,
    pub selector_wires: Vec<String>,
    pub member_map: Vec<MemberInfo>,
}

impl CombinedCircuit {
    pub fn bus_width(&self) -> usize {
        self.circuit.input_size() - self.selector_wires.len()
    }

    /// Input vector selecting member `i` with member inputs `x`; unused bus bits are zero.
    pub fn input_for(&self, i: usize, x: &[bool]) -> Vec<bool> {
        let mut v = vec![false; self.circuit.input_size()];
        v[..x.len()].copy_from_slice(x);
        let bus = self.bus_width();
        for b in 0..self.selector_wires.len() {
            v[bus + b] = (i >> b) & 1 == 1;
        }
        v
    }
}

pub fn selector_bits(k: usize) -> usize {
    k.next_power_of_two().trailing_zeros() as usize
}

pub fn combine(circuits: &[Circuit]) -> Result<CombinedCircuit, SelectorError> {
    let k = circuits.len();
    if !(2..=MAX_MEMBERS).contains(&k) {
        return Err(SelectorError::MemberCount(k));
    }
    let bus = circuits.iter().map(Circuit::input_size).max().unwrap_or(0);
    let outs = circuits.iter().map(|c| c.outputs().len()).max().unwrap_or(0);
    let sel_bits = selector_bits(k);

    let names: Vec<String> = circuits.iter().map(|c| c.name().to_string()).collect();
    let mut b = CircuitBuilder::new(format!("combined_{}", names.join("_")));
    for j in 0..bus {
        b.evaluator_input(&format!("in{j}"));
    }
    let selector_wires: Vec<String> = (0..sel_bits).map(|s| format!("sel{s}")).collect();
    for s in &selector_wires {
        b.evaluator_input(s);
    }

    let mut member_map = Vec::with_capacity(k);
    let mut member_outputs: Vec<Vec<String>> = Vec::with_capacity(k);
    for (i, c) in circuits.iter().enumerate() {
        let local = |w: crate::netlist::WireId| -> String {
            if w.index() < c.input_size() {
                format!("in{}", w.index())
            } else {
                format!("m{i}_{}", c.wire_name(w))
            }
        };
        for g in c.gates() {
            let ins: Vec<String> = g.inputs().map(local).collect();
            let ins: Vec<&str> = ins.iter().map(String::as_str).collect();
            b.gate(g.kind, &ins, &local(g.out));
        }
        member_outputs.push(c.outputs().iter().map(|&w| local(w)).collect());
        member_map.push(MemberInfo {
            index: i,
            name: c.name().to_string(),
            selector_value: i,
            inputs: c.inputs().map(|w| c.wire_name(w).to_string()).collect(),
            outputs: c.outputs().iter().map(|&w| c.wire_name(w).to_string()).collect(),
        });
    }

    let needs_zero = member_outputs.iter().any(|o| o.len() < outs);
    if needs_zero {
        b.gate(GateKind::Xor, &["sel0", "sel0"], "zero");
    }
    for j in 0..outs {
        let mut level: Vec<String> = (0..1usize << sel_bits)
            .map(|i| {
                let m = &member_outputs[i.min(k - 1)];
                m.get(j).cloned().unwrap_or_else(|| "zero".to_string())
            })
            .collect();
        for (s, sel) in selector_wires.iter().enumerate() {
            level = level
                .chunks(2)
                .enumerate()
                .map(|(t, pair)| {
                    let (lo, hi) = (&pair[0], &pair[1]);
                    if lo == hi {
                        return lo.clone();
                    }
                    let p = format!("mux{j}_{s}_{t}");
                    b.gate(GateKind::Xor, &[lo, hi], &format!("{p}_d"));
                    b.gate(GateKind::And, &[sel, &format!("{p}_d")], &format!("{p}_s"));
                    b.gate(GateKind::Xor, &[lo, &format!("{p}_s")], &p);
                    p
                })
                .collect();
        }
        let root = &level[0];
        let out = format!("out{j}");
        b.gate(GateKind::Buf, &[root], &out);
        b.output(&out);
    }

    Ok(CombinedCircuit {
        circuit: b.build()?,
        selector_wires,
        member_map,
    })
}

/// One combined session against `k` separate ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SavingsReport {
    pub members: usize,
    pub sessions_separate: usize,
    pub sessions_combined: usize,
    pub sessions_saved: usize,
    pub garbled_bytes_separate: usize,
    pub garbled_bytes_combined: usize,
    pub ot_max_performance_separate: usize,
    pub ot_max_performance_combined: usize,
    pub ot_resource_efficient_separate: usize,
    pub ot_resource_efficient_combined: usize,
    pub instructions_separate: usize,
    pub instructions_combined: usize,
    pub instructions_max_member: usize,
    /// Multiplexer gate budget: max member outputs x (k - 1) x 3.
    pub mux_bound_gates: usize,
    /// Non-free gates the merge adds on top of its members.
    pub mux_nonfree_overhead: usize,
}

pub fn selector_savings(members: &[CircuitStats], combined: &CircuitStats) -> SavingsReport {
    let k = members.len();
    let sum = |f: &dyn Fn(&CircuitStats) -> usize| members.iter().map(f).sum::<usize>();
    let member_nonfree = sum(&|s| s.nonfree_count);
    let max_outputs = members.iter().map(|s| s.output_size).max().unwrap_or(0);
    SavingsReport {
        members: k,
        sessions_separate: k,
        sessions_combined: 1,
        sessions_saved: k.saturating_sub(1),
        garbled_bytes_separate: TABLE_BYTES * member_nonfree,
        garbled_bytes_combined: TABLE_BYTES * combined.nonfree_count,
        ot_max_performance_separate: sum(&|s| ot_count(s, Mode::MaxPerformance)),
        ot_max_performance_combined: ot_count(combined, Mode::MaxPerformance),
        ot_resource_efficient_separate: sum(&|s| ot_count(s, Mode::ResourceEfficient)),
        ot_resource_efficient_combined: ot_count(combined, Mode::ResourceEfficient),
        instructions_separate: sum(&|s| s.instruction_count),
        instructions_combined: combined.instruction_count,
        instructions_max_member: members.iter().map(|s| s.instruction_count).max().unwrap_or(0),
        mux_bound_gates: max_outputs * k.saturating_sub(1) * 3,
        mux_nonfree_overhead: combined.nonfree_count.saturating_sub(member_nonfree),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{hamming16, ripple_adder, single_gate};
    use crate::netlist::{bits_of, parse_bench};

    fn c17() -> Circuit {
        parse_bench(include_str!("../benchmarks/c17.bench")).unwrap()
    }

    #[test]
    fn and_xor_pair() {
        let cc = combine(&[single_gate(GateKind::And), single_gate(GateKind::Xor)]).unwrap();
        assert_eq!(cc.selector_wires, vec!["sel0"]);
        let run = |sel, x: &[bool]| cc.circuit.eval_plain(&cc.input_for(sel, x)).unwrap();
        assert_eq!(run(0, &[true, true]), vec![true]);
        assert_eq!(run(1, &[true, true]), vec![false]);
    }

    #[test]
    fn c17_twice_exhaustive() {
        let c = c17();
        let cc = combine(&[c.clone(), c.clone()]).unwrap();
        for sel in 0..2 {
            for x in 0..32 {
                let bits = bits_of(x, 5);
                assert_eq!(
                    cc.circuit.eval_plain(&cc.input_for(sel, &bits)).unwrap(),
                    c.eval_plain(&bits).unwrap()
                );
            }
        }
    }

    #[test]
    fn member_count_bounds() {
        assert!(matches!(combine(&[c17()]), Err(SelectorError::MemberCount(1))));
        let many = vec![single_gate(GateKind::And); 65];
        assert!(matches!(combine(&many), Err(SelectorError::MemberCount(65))));
        assert!(combine(&vec![single_gate(GateKind::And); 64]).is_ok());
    }

    #[test]
    fn three_members_all_selector_values() {
        let members = [c17(), ripple_adder(4), single_gate(GateKind::Nor)];
        let cc = combine(&members).unwrap();
        assert_eq!(cc.selector_wires.len(), 2);
        assert_eq!(cc.circuit.input_size(), 8 + 2);
        assert_eq!(cc.circuit.outputs().len(), 5);
        for (i, m) in members.iter().enumerate() {
            for x in 0..(1u64 << m.input_size()) {
                let bits = bits_of(x, m.input_size());
                let got = cc.circuit.eval_plain(&cc.input_for(i, &bits)).unwrap();
                let want = m.eval_plain(&bits).unwrap();
                assert_eq!(&got[..want.len()], &want[..]);
                assert!(got[want.len()..].iter().all(|b| !b));
            }
        }
        // Selector value 3 is past the last member.
        let got = cc.circuit.eval_plain(&cc.input_for(3, &[true, false])).unwrap();
        assert_eq!(got[0], members[2].eval_plain(&[true, false]).unwrap()[0]);
    }

    #[test]
    fn savings_report() {
        let members = [c17(), ripple_adder(8), hamming16()];
        let cc = combine(&members).unwrap();
        let stats: Vec<CircuitStats> = members.iter().map(Circuit::stats).collect();
        let r = selector_savings(&stats, &cc.circuit.stats());
        assert_eq!(
            (r.sessions_separate, r.sessions_combined, r.sessions_saved),
            (3, 1, 2)
        );
        assert!(r.garbled_bytes_combined < r.garbled_bytes_separate + TABLE_BYTES * r.mux_bound_gates);
        assert!(r.instructions_combined > r.instructions_max_member);
        assert!(r.instructions_combined <= r.instructions_separate + r.mux_bound_gates);
        // Outputs 0..9 need two multiplexers; outputs 9..16 pick between zero and Hamming only.
        assert_eq!(r.mux_nonfree_overhead, 9 * 2 + 7);
    }

    #[test]
    fn identical_members_and_no_outputs() {
        let m = single_gate(GateKind::And);
        let stats = vec![m.stats(); 4];
        let cc = combine(&vec![m; 4]).unwrap();
        assert_eq!(selector_savings(&stats, &cc.circuit.stats()).sessions_saved, 3);

        let mut b = CircuitBuilder::new("sink");
        b.evaluator_input("a");
        let sink = b.build().unwrap();
        let cc = combine(&[sink.clone(), sink.clone()]).unwrap();
        let r = selector_savings(&[sink.stats(), sink.stats()], &cc.circuit.stats());
        assert_eq!(r.mux_nonfree_overhead, 0);
        assert_eq!(cc.circuit.stats().nonfree_count, 0);
    }
}
