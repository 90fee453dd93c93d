//! Circuits and oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::HashSet;
use std::net::TcpListener;
use std::path::PathBuf;

use garbled_eda::generators::{array_multiplier, hamming16, parity, random_dag, ripple_adder, single_gate};
use garbled_eda::netlist::{bits_of, parse_bench, parse_verilog_subset, Circuit, GateKind};
use garbled_eda::protocol::{
    run_evaluator, run_garbler, tcp_channel, EvaluatorOutcome, GarblerOutcome, ProtocolError, SessionConfig,
};
use rand::Rng;

pub fn bench_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("benchmarks")
}

pub fn c17() -> Circuit {
    parse_bench(&std::fs::read_to_string(bench_dir().join("c17.bench")).unwrap())
        .unwrap()
        .with_name("c17")
}

pub fn majority() -> Circuit {
    parse_verilog_subset(&std::fs::read_to_string(bench_dir().join("majority.v")).unwrap()).unwrap()
}

pub fn dag6000() -> Circuit {
    random_dag(64, 6000, 32, 64, 6000)
}

/// The correctness suite: every gate kind alone plus assorted larger circuits.
pub fn suite() -> Vec<Circuit> {
    let mut v: Vec<Circuit> = GateKind::ALL.iter().map(|&k| single_gate(k)).collect();
    v.push(c17());
    v.push(ripple_adder(8));
    v.push(hamming16());
    v.push(array_multiplier(4));
    v.push(array_multiplier(8));
    v.push(parity(16));
    v.push(majority());
    v.push(ripple_adder(3));
    v.push(random_dag(10, 60, 4, 8, 1));
    v.push(random_dag(12, 250, 6, 20, 2));
    v.push(random_dag(24, 1200, 12, 40, 3));
    v.push(dag6000());
    v
}

/// Gives the garbler the first half of the inputs.
pub fn split(c: &Circuit) -> Circuit {
    let names: Vec<String> = c
        .inputs()
        .take(c.input_size() / 2)
        .map(|w| c.wire_name(w).to_string())
        .collect();
    c.with_garbler_inputs(&names).unwrap()
}

/// Exhaustive input vectors up to 12 bits, `random` samples otherwise.
pub fn vectors<R: Rng>(n: usize, random: usize, rng: &mut R) -> Vec<Vec<bool>> {
    if n <= 12 {
        (0..1u64 << n).map(|x| bits_of(x, n)).collect()
    } else {
        (0..random).map(|_| (0..n).map(|_| rng.gen()).collect()).collect()
    }
}

/// Non-free gate ids in garbling order.
pub fn table_ids(c: &Circuit) -> Vec<(u64, usize)> {
    let mut out = Vec::new();
    let mut next = 0;
    for &g in c.topo_order() {
        if !c.gates()[g].kind.is_free() {
            out.push((next, g));
            next += 1;
        }
    }
    out
}

/// Independent computation of the tables that must be evaluated last: non-free gates with a
/// free-only path to an output, plus every non-free gate downstream of one.
pub fn output_layer_ids(c: &Circuit) -> HashSet<u64> {
    let gates = c.gates();
    let mut driver = vec![None; c.num_wires()];
    for (i, g) in gates.iter().enumerate() {
        driver[g.out.index()] = Some(i);
    }
    let mut near = vec![false; gates.len()];
    let mut seen = HashSet::new();
    let mut stack: Vec<_> = c.outputs().to_vec();
    while let Some(w) = stack.pop() {
        if !seen.insert(w) {
            continue;
        }
        if let Some(g) = driver[w.index()] {
            if gates[g].kind.is_free() {
                stack.extend(gates[g].inputs());
            } else {
                near[g] = true;
            }
        }
    }
    // Forward reachability from the near set, through any gate.
    let mut consumers = vec![Vec::new(); c.num_wires()];
    for (i, g) in gates.iter().enumerate() {
        for w in g.inputs() {
            consumers[w.index()].push(i);
        }
    }
    let mut reach = near.clone();
    let mut stack: Vec<usize> = (0..gates.len()).filter(|&i| near[i]).collect();
    while let Some(g) = stack.pop() {
        for &n in &consumers[gates[g].out.index()] {
            if !reach[n] {
                reach[n] = true;
                stack.push(n);
            }
        }
    }
    table_ids(c)
        .into_iter()
        .filter(|&(_, g)| reach[g] && !gates[g].kind.is_free())
        .map(|(id, _)| id)
        .collect()
}

/// True when no instruction free of output-layer tables follows one that has them.
pub fn output_layer_last(trace: &[Vec<u64>], layer: &HashSet<u64>) -> bool {
    let mut seen_outer = false;
    for instr in trace {
        let outer = instr.iter().any(|t| layer.contains(t));
        if seen_outer && !outer {
            return false;
        }
        seen_outer |= outer;
    }
    true
}

/// One localhost TCP session per `(x_g, x_e)` pair, run in order.
pub fn tcp_sessions(
    c: &Circuit,
    cfg: &SessionConfig,
    inputs: &[(Vec<bool>, Vec<bool>)],
) -> Vec<Result<(GarblerOutcome, EvaluatorOutcome), ProtocolError>> {
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    std::thread::scope(|s| {
        let garbler = s.spawn(|| {
            inputs
                .iter()
                .map(|(x_g, _)| {
                    let (stream, _) = listener.accept().unwrap();
                    run_garbler(c, x_g, cfg, &mut tcp_channel(stream).unwrap())
                })
                .collect::<Vec<_>>()
        });
        let evals: Vec<_> = inputs
            .iter()
            .map(|(_, x_e)| {
                let stream = std::net::TcpStream::connect(addr).unwrap();
                run_evaluator(x_e, cfg, &mut tcp_channel(stream).unwrap())
            })
            .collect();
        let gs = garbler.join().unwrap();
        gs.into_iter().zip(evals).map(|(g, e)| Ok((g?, e?))).collect()
    })
}
