//! Analytic time, OT and memory estimates for both session modes.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garbling::TABLE_BYTES;
use crate::netlist::CircuitStats;
use crate::protocol::{ot_count_from, Mode};

#[derive(Debug, Error, PartialEq)]
pub enum CostError {
    #[error("cost constant `{0}` must be positive and finite")]
    NonPositive(&'static str),
}

/// Per-unit costs. Any field left out of a constants file keeps its default.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostConstants {
    /// Nanoseconds per instruction, max-performance mode.
    pub cycle_ns_max: f64,
    /// Nanoseconds per instruction, resource-efficient mode.
    pub cycle_ns_stream: f64,
    /// Microseconds per OT round trip or instance.
    pub ot_latency_us: f64,
    pub ot_mem_kb_per_io_bit: f64,
    pub stream_mem_kb_per_gate: f64,
}

impl Default for CostConstants {
    fn default() -> Self {
        CostConstants {
            cycle_ns_max: 50.0,
            cycle_ns_stream: 150.0,
            ot_latency_us: 24.0,
            ot_mem_kb_per_io_bit: 3.2,
            stream_mem_kb_per_gate: 2.0,
        }
    }
}

impl CostConstants {
    pub fn validate(&self) -> Result<(), CostError> {
        let fields = [
            ("cycle_ns_max", self.cycle_ns_max),
            ("cycle_ns_stream", self.cycle_ns_stream),
            ("ot_latency_us", self.ot_latency_us),
            ("ot_mem_kb_per_io_bit", self.ot_mem_kb_per_io_bit),
            ("stream_mem_kb_per_gate", self.stream_mem_kb_per_gate),
        ];
        for (name, v) in fields {
            if !(v.is_finite() && v > 0.0) {
                return Err(CostError::NonPositive(name));
            }
        }
        Ok(())
    }
}

/// Circuit figures the estimate depends on. Gate counts are optional so that published
/// instruction counts can be replayed on their own.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostInput {
    pub instructions: usize,
    pub input_size: usize,
    pub output_size: usize,
    pub nonfree: Option<usize>,
    pub gates: Option<usize>,
}

impl CostInput {
    pub fn from_stats(s: &CircuitStats) -> Self {
        CostInput {
            instructions: s.instruction_count,
            input_size: s.input_size,
            output_size: s.output_size,
            nonfree: Some(s.nonfree_count),
            gates: Some(s.gate_count),
        }
    }

    pub fn io(&self) -> usize {
        self.input_size + self.output_size
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MemoryComponents {
    /// `ot_mem_kb_per_io_bit x (I + O)`.
    pub ot_kb: f64,
    /// `stream_mem_kb_per_gate x gates`; streamed mode with a known gate count only.
    pub stream_kb: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ModeReport {
    pub mode: Mode,
    pub ot_interactions: usize,
    pub ot_rounds: usize,
    pub time_instruction_s: f64,
    pub time_ot_s: f64,
    pub time_total_s: f64,
    /// Instruction time alone in max-performance mode, the total otherwise.
    pub headline_time_s: f64,
    pub garbled_bytes: Option<usize>,
    pub memory: MemoryComponents,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostReport {
    pub input: CostInput,
    pub constants: CostConstants,
    pub modes: Vec<ModeReport>,
}

pub fn estimate(input: &CostInput, mode: Mode, k: &CostConstants) -> ModeReport {
    let ot = ot_count_from(input.instructions, input.input_size, input.output_size, mode);
    // Max-performance batches every instance into one round; streamed OT is charged per instance.
    let (cycle_ns, ot_charged, ot_rounds) = match mode {
        Mode::MaxPerformance => (k.cycle_ns_max, usize::from(ot > 0), usize::from(ot > 0)),
        Mode::ResourceEfficient => (
            k.cycle_ns_stream,
            ot,
            input.instructions + usize::from(input.input_size > 0) + usize::from(input.output_size > 0),
        ),
    };
    let time_instruction_s = input.instructions as f64 * cycle_ns * 1e-9;
    let time_ot_s = ot_charged as f64 * k.ot_latency_us * 1e-6;
    let time_total_s = time_instruction_s + time_ot_s;
    ModeReport {
        mode,
        ot_interactions: ot,
        ot_rounds,
        time_instruction_s,
        time_ot_s,
        time_total_s,
        headline_time_s: match mode {
            Mode::MaxPerformance => time_instruction_s,
            Mode::ResourceEfficient => time_total_s,
        },
        garbled_bytes: input.nonfree.map(|n| TABLE_BYTES * n),
        memory: MemoryComponents {
            ot_kb: k.ot_mem_kb_per_io_bit * input.io() as f64,
            stream_kb: match mode {
                Mode::ResourceEfficient => input.gates.map(|g| k.stream_mem_kb_per_gate * g as f64),
                Mode::MaxPerformance => None,
            },
        },
    }
}

pub fn estimate_modes(input: &CostInput, modes: &[Mode], k: &CostConstants) -> CostReport {
    CostReport {
        input: *input,
        constants: *k,
        modes: modes.iter().map(|&m| estimate(input, m, k)).collect(),
    }
}

fn opt<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map_or_else(|| "-".to_string(), |v| v.to_string())
}

/// Aligned plain-text rendering.
pub fn render_table(r: &CostReport) -> String {
    let mut s = String::new();
    let _ = writeln!(
        s,
        "instructions {}  inputs {}  outputs {}  non-free {}  gates {}",
        r.input.instructions,
        r.input.input_size,
        r.input.output_size,
        opt(r.input.nonfree),
        opt(r.input.gates)
    );
    let _ = writeln!(
        s,
        "{:<20} {:>8} {:>7} {:>12} {:>12} {:>12} {:>12} {:>12} {:>10} {:>10}",
        "mode",
        "OT",
        "rounds",
        "t_instr(s)",
        "t_ot(s)",
        "t_total(s)",
        "headline(s)",
        "garbled(B)",
        "ot_kB",
        "stream_kB"
    );
    for m in &r.modes {
        let name = match m.mode {
            Mode::MaxPerformance => "max-performance",
            Mode::ResourceEfficient => "resource-efficient",
        };
        let _ = writeln!(
            s,
            "{:<20} {:>8} {:>7} {:>12.3e} {:>12.3e} {:>12.3e} {:>12.3e} {:>12} {:>10.1} {:>10}",
            name,
            m.ot_interactions,
            m.ot_rounds,
            m.time_instruction_s,
            m.time_ot_s,
            m.time_total_s,
            m.headline_time_s,
            opt(m.garbled_bytes),
            m.memory.ot_kb,
            opt(m.memory.stream_kb.map(|v| format!("{v:.1}")))
        );
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn row(inst: usize, io: usize) -> CostInput {
        CostInput {
            instructions: inst,
            input_size: io / 2,
            output_size: io - io / 2,
            nonfree: None,
            gates: None,
        }
    }

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 1e-12 * b.abs().max(1.0)
    }

    #[test]
    fn replayed_rows() {
        let k = CostConstants::default();
        let aes = estimate(&row(426, 256), Mode::ResourceEfficient, &k);
        assert_eq!(aes.ot_interactions, 682);
        assert!(close(aes.time_ot_s, 682.0 * 24e-6));
        let mult = estimate(&row(2012, 1024), Mode::MaxPerformance, &k);
        assert!(close(mult.time_instruction_s, 2012.0 * 50e-9));
        assert_eq!(mult.headline_time_s, mult.time_instruction_s);
        assert_eq!(mult.ot_rounds, 1);
        let c6288 = estimate(&row(4669, 64), Mode::ResourceEfficient, &k);
        assert_eq!(c6288.ot_interactions, 4733);
        assert!(close(c6288.time_instruction_s, 4669.0 * 150e-9));
    }

    #[test]
    fn components_and_missing_counts() {
        let k = CostConstants::default();
        let input = CostInput {
            nonfree: Some(10),
            gates: Some(25),
            ..row(3, 8)
        };
        let r = estimate(&input, Mode::ResourceEfficient, &k);
        assert_eq!(r.garbled_bytes, Some(480));
        assert!(close(r.memory.ot_kb, 3.2 * 8.0));
        assert_eq!(r.memory.stream_kb, Some(50.0));
        assert_eq!(r.ot_rounds, 3 + 2);
        let r = estimate(&row(3, 8), Mode::MaxPerformance, &k);
        assert_eq!(r.garbled_bytes, None);
        assert_eq!(r.memory.stream_kb, None);
    }

    #[test]
    fn constants_validation_and_partial_override() {
        let k: CostConstants = serde_json::from_str(r#"{"ot_latency_us": 10}"#).unwrap();
        assert_eq!(k.ot_latency_us, 10.0);
        assert_eq!(k.cycle_ns_max, 50.0);
        k.validate().unwrap();
        let bad = CostConstants {
            cycle_ns_stream: 0.0,
            ..Default::default()
        };
        assert_eq!(bad.validate(), Err(CostError::NonPositive("cycle_ns_stream")));
        assert!(serde_json::from_str::<CostConstants>(r#"{"bogus": 1}"#).is_err());
    }

    #[test]
    fn table_lists_every_mode() {
        let r = estimate_modes(&row(4669, 64), &Mode::ALL, &CostConstants::default());
        let t = render_table(&r);
        assert!(t.contains("max-performance") && t.contains("resource-efficient"));
        assert!(t.contains("4733"));
    }

    fn stats_input() -> impl Strategy<Value = (usize, usize, usize, usize)> {
        (0usize..5000, 0usize..5000, 0usize..500, 0usize..500)
    }

    proptest! {
        #[test]
        fn totals_are_sums((nonfree, xor, i, o) in stats_input()) {
            let input = CostInput {
                instructions: nonfree.div_ceil(4),
                input_size: i,
                output_size: o,
                nonfree: Some(nonfree),
                gates: Some(nonfree + xor),
            };
            for mode in Mode::ALL {
                let r = estimate(&input, mode, &CostConstants::default());
                prop_assert!(close(r.time_total_s, r.time_instruction_s + r.time_ot_s));
                prop_assert_eq!(r.garbled_bytes, Some(48 * nonfree));
            }
        }

        #[test]
        fn more_nonfree_never_costs_less((nonfree, xor, i, o) in stats_input(), extra in 1usize..100) {
            let mk = |n: usize| CostInput {
                instructions: n.div_ceil(4),
                input_size: i,
                output_size: o,
                nonfree: Some(n),
                gates: Some(n + xor),
            };
            for mode in Mode::ALL {
                let k = CostConstants::default();
                let (a, b) = (estimate(&mk(nonfree), mode, &k), estimate(&mk(nonfree + extra), mode, &k));
                prop_assert!(b.ot_interactions >= a.ot_interactions);
                prop_assert!(b.time_instruction_s >= a.time_instruction_s);
                prop_assert!(b.time_ot_s >= a.time_ot_s);
                prop_assert!(b.time_total_s >= a.time_total_s);
                prop_assert!(b.garbled_bytes > a.garbled_bytes);
                prop_assert!(b.memory.ot_kb >= a.memory.ot_kb);
                prop_assert!(b.memory.stream_kb >= a.memory.stream_kb);
            }
        }

        #[test]
        fn xor_fraction_only_moves_bytes_through_nonfree(total in 10usize..5000, n1 in 0usize..10, n2 in 0usize..10) {
            let mk = |n: usize| CostInput {
                instructions: n.div_ceil(4),
                input_size: 8,
                output_size: 8,
                nonfree: Some(n),
                gates: Some(total),
            };
            let k = CostConstants::default();
            let a = estimate(&mk(n1 * total / 10), Mode::MaxPerformance, &k);
            let b = estimate(&mk(n2 * total / 10), Mode::MaxPerformance, &k);
            let diff = b.garbled_bytes.unwrap() as i64 - a.garbled_bytes.unwrap() as i64;
            prop_assert_eq!(diff, 48 * ((n2 * total / 10) as i64 - (n1 * total / 10) as i64));
        }
    }
}
