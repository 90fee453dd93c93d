//! Instruction scheduling for the streamed mode.
//!
//! Tables are ordered by a topological sort over table-to-table dependencies (free gates are
//! transparent), then cut into consecutive batches. Tables that reach an output through free gates
//! only, and every table downstream of those, form the output layer and are always scheduled
//! after the interior tables. Free gates are attached to the instruction of the first table that
//! reads them; free gates needed only by outputs form the tail.

use rand::{Rng, RngCore};

use crate::garbling::{GarbledCircuit, GarbledGate};
use crate::netlist::WireId;

/// Drop the label on input `a` after this op.
pub const DROP_A: u8 = 1;
/// Drop the label on input `b` after this op.
pub const DROP_B: u8 = 2;
/// Drop the output label right away; nothing reads it.
pub const DROP_OUT: u8 = 4;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScheduledOp {
    pub gate: GarbledGate,
    pub drop: u8,
}

/// One streamed unit: up to `batch_size` tables plus the free gates they need.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GarbledInstruction {
    pub id: u32,
    pub ops: Vec<ScheduledOp>,
    /// Contains at least one output-layer table.
    pub output_layer: bool,
}

impl GarbledInstruction {
    pub fn table_ids(&self) -> Vec<u64> {
        self.ops
            .iter()
            .filter_map(|op| match op.gate {
                GarbledGate::Table { id, .. } => Some(id),
                GarbledGate::Free { .. } => None,
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StreamPlan {
    pub instructions: Vec<GarbledInstruction>,
    pub tail: Vec<ScheduledOp>,
    /// Most labels held at once by an evaluator that follows the drop flags.
    pub live_bound: usize,
}

impl StreamPlan {
    pub fn ops(&self) -> impl Iterator<Item = &ScheduledOp> + '_ {
        self.instructions.iter().flat_map(|i| &i.ops).chain(&self.tail)
    }
}

fn drivers(f: &GarbledCircuit) -> Vec<Option<usize>> {
    let mut d = vec![None; f.num_wires()];
    for (i, g) in f.gates().iter().enumerate() {
        d[g.out().index()] = Some(i);
    }
    d
}

/// Per gate of `f`: true for output-layer tables.
pub fn output_layer(f: &GarbledCircuit) -> Vec<bool> {
    let driver = drivers(f);
    let gates = f.gates();
    let mut layer = vec![false; gates.len()];

    // Tables feeding an output through free gates only.
    let mut seen = vec![false; f.num_wires()];
    let mut stack: Vec<WireId> = f.outputs().to_vec();
    while let Some(w) = stack.pop() {
        if std::mem::replace(&mut seen[w.index()], true) {
            continue;
        }
        if let Some(g) = driver[w.index()] {
            if gates[g].is_table() {
                layer[g] = true;
            } else {
                stack.extend(gates[g].inputs());
            }
        }
    }

    // Close under descendants; gates are stored in dependency order.
    let mut tainted = vec![false; f.num_wires()];
    for (i, g) in gates.iter().enumerate() {
        let from_inputs = g.inputs().any(|w| tainted[w.index()]);
        if g.is_table() {
            layer[i] |= from_inputs;
            tainted[g.out().index()] = layer[i];
        } else {
            tainted[g.out().index()] = from_inputs;
        }
    }
    layer
}

/// Deterministic schedule: among ready tables the lowest gate index goes first.
pub fn make_instructions(f: &GarbledCircuit, batch_size: usize) -> Vec<GarbledInstruction> {
    plan_stream(f, batch_size, None).instructions
}

/// Builds the stream. With `rng`, the next table is drawn uniformly from the ready set.
pub fn plan_stream(f: &GarbledCircuit, batch_size: usize, mut rng: Option<&mut dyn RngCore>) -> StreamPlan {
    assert!(batch_size >= 1, "batch size must be positive");
    let gates = f.gates();
    let driver = drivers(f);
    let layer = output_layer(f);

    let mut consumers: Vec<Vec<usize>> = vec![Vec::new(); f.num_wires()];
    let mut pending = vec![0usize; gates.len()];
    for (i, g) in gates.iter().enumerate() {
        for w in g.inputs() {
            if driver[w.index()].is_some() {
                consumers[w.index()].push(i);
                pending[i] += 1;
            }
        }
    }

    let mut interior = Vec::new();
    let mut outer = Vec::new();
    let mut ready_free = Vec::new();
    let route = |i: usize, interior: &mut Vec<usize>, outer: &mut Vec<usize>, ready_free: &mut Vec<usize>| {
        if !gates[i].is_table() {
            ready_free.push(i);
        } else if layer[i] {
            outer.push(i);
        } else {
            interior.push(i);
        }
    };
    for (i, &p) in pending.iter().enumerate() {
        if p == 0 {
            route(i, &mut interior, &mut outer, &mut ready_free);
        }
    }

    let complete = |i: usize,
                    interior: &mut Vec<usize>,
                    outer: &mut Vec<usize>,
                    ready_free: &mut Vec<usize>,
                    pending: &mut Vec<usize>| {
        for &c in &consumers[gates[i].out().index()] {
            pending[c] -= 1;
            if pending[c] == 0 {
                route(c, interior, outer, ready_free);
            }
        }
    };

    let mut order = Vec::new();
    loop {
        while let Some(i) = ready_free.pop() {
            complete(i, &mut interior, &mut outer, &mut ready_free, &mut pending);
        }
        let pool = if !interior.is_empty() {
            &mut interior
        } else {
            &mut outer
        };
        if pool.is_empty() {
            break;
        }
        let k = match rng.as_deref_mut() {
            Some(r) => r.gen_range(0..pool.len()),
            None => (0..pool.len()).min_by_key(|&k| pool[k]).unwrap(),
        };
        let t = pool.swap_remove(k);
        order.push(t);
        complete(t, &mut interior, &mut outer, &mut ready_free, &mut pending);
    }
    debug_assert_eq!(order.len(), f.table_count());

    let mut emitted = vec![false; gates.len()];
    let mut seq: Vec<usize> = Vec::with_capacity(gates.len());
    let mut bounds = Vec::new();
    for chunk in order.chunks(batch_size) {
        for &t in chunk {
            for w in gates[t].inputs() {
                emit_free(w, gates, &driver, &mut emitted, &mut seq);
            }
            emitted[t] = true;
            seq.push(t);
        }
        bounds.push((seq.len(), chunk.iter().any(|&t| layer[t])));
    }
    for &w in f.outputs() {
        emit_free(w, gates, &driver, &mut emitted, &mut seq);
    }

    let drops = drop_flags(f, &seq);
    let live_bound = live_bound(f, &drops);
    let mut ops = seq.iter().zip(&drops).map(|(&g, &drop)| ScheduledOp {
        gate: gates[g].clone(),
        drop,
    });
    let mut instructions = Vec::with_capacity(bounds.len());
    let mut start = 0;
    for (id, &(end, output_layer)) in bounds.iter().enumerate() {
        instructions.push(GarbledInstruction {
            id: id as u32,
            ops: ops.by_ref().take(end - start).collect(),
            output_layer,
        });
        start = end;
    }
    StreamPlan {
        instructions,
        tail: ops.collect(),
        live_bound,
    }
}

/// Appends the not-yet-emitted free gates behind `wire`, dependencies first.
fn emit_free(
    wire: WireId,
    gates: &[GarbledGate],
    driver: &[Option<usize>],
    emitted: &mut [bool],
    seq: &mut Vec<usize>,
) {
    let mut stack = vec![(wire, false)];
    while let Some((w, expanded)) = stack.pop() {
        let Some(g) = driver[w.index()] else { continue };
        if emitted[g] {
            continue;
        }
        if expanded {
            emitted[g] = true;
            seq.push(g);
            continue;
        }
        // Every table is emitted before anything that reads it.
        debug_assert!(!gates[g].is_table());
        stack.push((w, true));
        for i in gates[g].inputs() {
            stack.push((i, false));
        }
    }
}

fn drop_flags(f: &GarbledCircuit, seq: &[usize]) -> Vec<u8> {
    let gates = f.gates();
    let mut is_output = vec![false; f.num_wires()];
    for w in f.outputs() {
        is_output[w.index()] = true;
    }
    let mut last_use = vec![usize::MAX; f.num_wires()];
    for (p, &g) in seq.iter().enumerate() {
        for w in gates[g].inputs() {
            last_use[w.index()] = p;
        }
    }
    seq.iter()
        .enumerate()
        .map(|(p, &g)| {
            let gate = &gates[g];
            let mut flags = 0;
            let mut inputs = gate.inputs();
            let a = inputs.next().unwrap();
            let b = inputs.next();
            if !is_output[a.index()] && last_use[a.index()] == p {
                flags |= DROP_A;
            }
            if let Some(b) = b {
                if b != a && !is_output[b.index()] && last_use[b.index()] == p {
                    flags |= DROP_B;
                }
            }
            let out = gate.out();
            if !is_output[out.index()] && last_use[out.index()] == usize::MAX {
                flags |= DROP_OUT;
            }
            flags
        })
        .collect()
}

fn live_bound(f: &GarbledCircuit, drops: &[u8]) -> usize {
    let mut live = f.input_size();
    let mut peak = live;
    for &d in drops {
        live += 1;
        peak = peak.max(live);
        live -= (d & DROP_A != 0) as usize + (d & DROP_B != 0) as usize + (d & DROP_OUT != 0) as usize;
    }
    peak
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::garbling::{garble, Seed};
    use crate::generators::{parity, random_dag, ripple_adder};
    use crate::netlist::{parse_bench, CircuitBuilder, GateKind};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use std::collections::HashSet;

    fn and_chain(n: usize) -> GarbledCircuit {
        let mut b = CircuitBuilder::new("chain");
        b.evaluator_input("x0");
        for i in 0..n {
            b.evaluator_input(&format!("y{i}"));
            b.gate(
                GateKind::And,
                &[&format!("x{i}"), &format!("y{i}")],
                &format!("x{}", i + 1),
            );
        }
        b.output(&format!("x{n}"));
        garble(&b.build().unwrap(), &Seed::from_u64(1)).0
    }

    #[test]
    fn instruction_counts() {
        assert_eq!(make_instructions(&and_chain(5), 4).len(), 2);
        assert_eq!(make_instructions(&and_chain(5), 4)[1].table_ids().len(), 1);
        assert_eq!(make_instructions(&and_chain(5), 1).len(), 5);
        let xor_only = garble(&parity(6), &Seed::from_u64(1)).0;
        assert!(make_instructions(&xor_only, 4).is_empty());
        let c17 = parse_bench(include_str!("../../benchmarks/c17.bench")).unwrap();
        assert_eq!(make_instructions(&garble(&c17, &Seed::from_u64(1)).0, 4).len(), 2);
    }

    #[test]
    fn every_gate_scheduled_once_in_dependency_order() {
        for seed in 0..5u64 {
            let c = random_dag(12, 400, 6, 30, seed);
            let f = garble(&c, &Seed::from_u64(seed)).0;
            let mut r = ChaCha20Rng::seed_from_u64(seed);
            let plan = plan_stream(&f, 4, Some(&mut r));
            let mut have: HashSet<WireId> = f.inputs().collect();
            let mut tables = HashSet::new();
            for op in plan.ops() {
                for w in op.gate.inputs() {
                    assert!(have.contains(&w), "wire {} read before it exists", w.0);
                }
                assert!(have.insert(op.gate.out()));
                if let GarbledGate::Table { id, .. } = op.gate {
                    assert!(tables.insert(id));
                }
            }
            assert_eq!(tables.len(), f.table_count());
            for w in f.outputs() {
                assert!(have.contains(w));
            }
        }
    }

    #[test]
    fn output_layer_comes_last() {
        let c = ripple_adder(8);
        let f = garble(&c, &Seed::from_u64(3)).0;
        for s in 0..10 {
            let mut r = ChaCha20Rng::seed_from_u64(s);
            let plan = plan_stream(&f, 2, Some(&mut r));
            let first_outer = plan.instructions.iter().position(|i| i.output_layer);
            if let Some(p) = first_outer {
                assert!(plan.instructions[p..].iter().all(|i| i.output_layer));
            }
        }
    }

    #[test]
    fn live_bound_below_wire_count_on_wide_dag() {
        let c = random_dag(32, 2000, 16, 40, 5);
        let f = garble(&c, &Seed::from_u64(5)).0;
        let plan = plan_stream(&f, 4, None);
        assert!(
            plan.live_bound < f.num_wires() / 4,
            "{} of {}",
            plan.live_bound,
            f.num_wires()
        );
    }
}
