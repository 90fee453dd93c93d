//! Parameterized benchmark circuits.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::netlist::{Circuit, CircuitBuilder, GateKind};

/// One gate of `kind` over evaluator inputs `a` (and `b`), output `y`.
pub fn single_gate(kind: GateKind) -> Circuit {
    let mut b = CircuitBuilder::new(format!("{}_gate", kind.bench_name().to_lowercase()));
    b.evaluator_input("a");
    if kind.arity() == 2 {
        b.evaluator_input("b").gate(kind, &["a", "b"], "y");
    } else {
        b.gate(kind, &["a"], "y");
    }
    b.output("y").build().expect("single gate")
}

/// `n`-bit ripple-carry adder. Inputs `a0..a{n-1}`, `b0..b{n-1}` (LSB first), outputs
/// `s0..s{n-1}` and carry-out `cout`. Full adders use one AND each:
/// `cout = ((a ^ c) & (b ^ c)) ^ c`.
pub fn ripple_adder(n: usize) -> Circuit {
    assert!(n >= 1);
    let mut b = CircuitBuilder::new(format!("adder{n}"));
    for i in 0..n {
        b.evaluator_input(&format!("a{i}"));
    }
    for i in 0..n {
        b.evaluator_input(&format!("b{i}"));
    }
    let (a0, b0) = ("a0".to_string(), "b0".to_string());
    b.gate(GateKind::Xor, &[&a0, &b0], "s0");
    b.gate(GateKind::And, &[&a0, &b0], "c1");
    for i in 1..n {
        let (ai, bi, ci) = (format!("a{i}"), format!("b{i}"), format!("c{i}"));
        let (ac, bc, t) = (format!("ac{i}"), format!("bc{i}"), format!("t{i}"));
        b.gate(GateKind::Xor, &[&ai, &bi], &format!("p{i}"));
        b.gate(GateKind::Xor, &[&format!("p{i}"), &ci], &format!("s{i}"));
        b.gate(GateKind::Xor, &[&ai, &ci], &ac);
        b.gate(GateKind::Xor, &[&bi, &ci], &bc);
        b.gate(GateKind::And, &[&ac, &bc], &t);
        b.gate(GateKind::Xor, &[&t, &ci], &format!("c{}", i + 1));
    }
    for i in 0..n {
        b.output(&format!("s{i}"));
    }
    b.gate(GateKind::Buf, &[&format!("c{n}")], "cout");
    b.output("cout");
    b.build().expect("adder")
}

/// Per-bit difference vector of two 16-bit words `a`, `b` (32 inputs, 16 outputs `d0..d15`); the
/// Hamming distance is the popcount of the outputs. Bits 0, 1 and 2 use an XOR gate, the other 13 use
/// `AND(OR(a,b), NAND(a,b))`, giving exactly 3 XOR and 39 non-XOR gates.
pub fn hamming16() -> Circuit {
    let mut b = CircuitBuilder::new("hamming16");
    for i in 0..16 {
        b.evaluator_input(&format!("a{i}"));
    }
    for i in 0..16 {
        b.evaluator_input(&format!("b{i}"));
    }
    for i in 0..16 {
        let (ai, bi, di) = (format!("a{i}"), format!("b{i}"), format!("d{i}"));
        if i < 3 {
            b.gate(GateKind::Xor, &[&ai, &bi], &di);
        } else {
            let (o, n) = (format!("o{i}"), format!("n{i}"));
            b.gate(GateKind::Or, &[&ai, &bi], &o);
            b.gate(GateKind::Nand, &[&ai, &bi], &n);
            b.gate(GateKind::And, &[&o, &n], &di);
        }
        b.output(&di);
    }
    b.build().expect("hamming16")
}

/// `n`-bit unsigned array multiplier producing a `2n`-bit product `prod0..prod{2n-1}`.
pub fn array_multiplier(n: usize) -> Circuit {
    assert!(n >= 2);
    let mut b = CircuitBuilder::new(format!("mult{n}"));
    for i in 0..n {
        b.evaluator_input(&format!("a{i}"));
    }
    for i in 0..n {
        b.evaluator_input(&format!("b{i}"));
    }
    for i in 0..n {
        for j in 0..n {
            b.gate(
                GateKind::And,
                &[&format!("a{i}"), &format!("b{j}")],
                &format!("pp{i}_{j}"),
            );
        }
    }
    // Row-by-row accumulation; `acc` holds the running sum bits by weight.
    let mut acc: Vec<String> = (0..n).map(|j| format!("pp0_{j}")).collect();
    let mut fresh = 0usize;
    let mut name = |prefix: &str| {
        fresh += 1;
        format!("{prefix}{fresh}")
    };
    for i in 1..n {
        let mut carry: Option<String> = None;
        for j in 0..n {
            let w = i + j;
            let x = format!("pp{i}_{j}");
            let y = match (acc.get(w).cloned(), carry.take()) {
                (None, None) => {
                    acc.push(x);
                    continue;
                }
                (Some(y), None) | (None, Some(y)) => {
                    let (s, c) = (name("s"), name("c"));
                    b.gate(GateKind::Xor, &[&x, &y], &s);
                    b.gate(GateKind::And, &[&x, &y], &c);
                    carry = Some(c);
                    s
                }
                (Some(y), Some(ci)) => {
                    let (p, s, xc, yc, t, c) =
                        (name("p"), name("s"), name("xc"), name("yc"), name("t"), name("c"));
                    b.gate(GateKind::Xor, &[&x, &y], &p);
                    b.gate(GateKind::Xor, &[&p, &ci], &s);
                    b.gate(GateKind::Xor, &[&x, &ci], &xc);
                    b.gate(GateKind::Xor, &[&y, &ci], &yc);
                    b.gate(GateKind::And, &[&xc, &yc], &t);
                    b.gate(GateKind::Xor, &[&t, &ci], &c);
                    carry = Some(c);
                    s
                }
            };
            if w < acc.len() {
                acc[w] = y;
            } else {
                acc.push(y);
            }
        }
        if let Some(c) = carry {
            acc.push(c);
        }
    }
    if acc.len() < 2 * n {
        b.gate(GateKind::Xor, &["a0", "a0"], "zero");
        acc.resize(2 * n, "zero".to_string());
    }
    for (k, w) in acc.iter().enumerate().take(2 * n) {
        b.gate(GateKind::Buf, &[w], &format!("prod{k}"));
        b.output(&format!("prod{k}"));
    }
    b.build().expect("multiplier")
}

/// XOR-only parity tree over `n` inputs.
pub fn parity(n: usize) -> Circuit {
    assert!(n >= 2);
    let mut b = CircuitBuilder::new(format!("parity{n}"));
    let mut layer: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
    for w in &layer {
        b.evaluator_input(w);
    }
    let mut fresh = 0;
    while layer.len() > 1 {
        let mut next = Vec::new();
        for pair in layer.chunks(2) {
            if let [l, r] = pair {
                fresh += 1;
                let o = format!("p{fresh}");
                b.gate(GateKind::Xor, &[l, r], &o);
                next.push(o);
            } else {
                next.push(pair[0].clone());
            }
        }
        layer = next;
    }
    b.output(&layer[0]);
    b.build().expect("parity")
}

/// Random acyclic circuit with `gates` gates over all eight kinds. Operands are drawn from
/// the most recent `window` wires, like a synthesized netlist where fan-in is local. Outputs are
/// the last `outputs` gates.
pub fn random_dag(inputs: usize, gates: usize, outputs: usize, window: usize, seed: u64) -> Circuit {
    assert!(inputs >= 1 && gates >= outputs && window >= 1);
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut b = CircuitBuilder::new(format!("random_dag{gates}"));
    let mut wires: Vec<String> = (0..inputs).map(|i| format!("x{i}")).collect();
    for w in &wires {
        b.evaluator_input(w);
    }
    for g in 0..gates {
        let kind = GateKind::ALL[rng.gen_range(0..GateKind::ALL.len())];
        let n = wires.len();
        let pick = |rng: &mut ChaCha20Rng| {
            let lo = n.saturating_sub(window);
            wires[rng.gen_range(lo..n)].clone()
        };
        let a = pick(&mut rng);
        let out = format!("g{g}");
        if kind.arity() == 2 {
            let c = pick(&mut rng);
            b.gate(kind, &[&a, &c], &out);
        } else {
            b.gate(kind, &[&a], &out);
        }
        wires.push(out);
    }
    for w in &wires[wires.len() - outputs..] {
        b.output(w);
    }
    b.build().expect("random dag")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::netlist::bits_of;

    fn to_u64(bits: &[bool]) -> u64 {
        bits.iter().enumerate().map(|(i, &b)| (b as u64) << i).sum()
    }

    #[test]
    fn adder_adds() {
        let c = ripple_adder(4);
        for a in 0..16u64 {
            for b in 0..16u64 {
                let mut x = bits_of(a, 4);
                x.extend(bits_of(b, 4));
                assert_eq!(to_u64(&c.eval_plain(&x).unwrap()), a + b);
            }
        }
    }

    #[test]
    fn multiplier_multiplies() {
        for n in [2, 3, 4] {
            let c = array_multiplier(n);
            for a in 0..(1u64 << n) {
                for b in 0..(1u64 << n) {
                    let mut x = bits_of(a, n);
                    x.extend(bits_of(b, n));
                    assert_eq!(to_u64(&c.eval_plain(&x).unwrap()), a * b, "{n}: {a}*{b}");
                }
            }
        }
    }

    #[test]
    fn hamming_counts_match_table_row() {
        let s = hamming16().stats();
        assert_eq!((s.xor_count, s.nonfree_count), (3, 39));
        let c = hamming16();
        let (a, b) = (0xbeefu64, 0x1234u64);
        let mut x = bits_of(a, 16);
        x.extend(bits_of(b, 16));
        assert_eq!(to_u64(&c.eval_plain(&x).unwrap()), a ^ b);
    }

    #[test]
    fn parity_is_free() {
        let c = parity(7);
        assert_eq!(c.stats().nonfree_count, 0);
        for v in 0..128u64 {
            assert_eq!(c.eval_plain(&bits_of(v, 7)).unwrap()[0], v.count_ones() % 2 == 1);
        }
    }

    #[test]
    fn random_dag_is_deterministic() {
        assert_eq!(random_dag(8, 200, 4, 16, 3), random_dag(8, 200, 4, 16, 3));
        assert_eq!(random_dag(8, 200, 4, 16, 3).gates().len(), 200);
    }
}
