mod common;

use std::collections::HashSet;
use std::io::{self, Read, Write};

use garbled_eda::garbling::{garble_full, Seed};
use garbled_eda::generators::{random_dag, ripple_adder};
use garbled_eda::netlist::Circuit;
use garbled_eda::protocol::{
    loopback_pair, ot_count, run_evaluator, run_garbler, run_local, unmask_verify, Channel, Loopback, Mode,
    MsgType, OtKind, ProtocolError, SessionConfig,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use common::*;

fn run_split(c: &Circuit, x: &[bool], cfg: &SessionConfig) -> Vec<bool> {
    let ng = c.garbler_inputs().len();
    let (_, e) = run_local(c, &x[..ng], &x[ng..], cfg).unwrap();
    e.plain().unwrap().to_vec()
}

#[test]
fn small_suite_matches_plaintext_in_both_modes() {
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    for c in suite().iter().filter(|c| c.gates().len() <= 300) {
        let c = split(c);
        let xs = vectors(c.input_size(), 20, &mut rng);
        for (i, x) in xs.iter().enumerate().take(64) {
            let seed = Seed::from_u64(i as u64);
            let want = c.eval_plain(x).unwrap();
            for mode in Mode::ALL {
                let cfg = SessionConfig::new(mode)
                    .with_seed(seed)
                    .with_ot(OtKind::InsecureDealer);
                assert_eq!(run_split(&c, x, &cfg), want, "{} {mode:?}", c.name());
            }
        }
    }
}

#[test]
fn transcripts_count_ot_instances_exactly() {
    for c in [c17(), ripple_adder(8), random_dag(12, 250, 6, 20, 2)] {
        let c = split(&c);
        let x = vec![true; c.input_size()];
        let ng = c.garbler_inputs().len();
        for mode in Mode::ALL {
            let (g, e) = run_local(&c, &x[..ng], &x[ng..], &SessionConfig::new(mode)).unwrap();
            let want = ot_count(&c.stats(), mode);
            assert_eq!(e.transcript.ot_interactions, want);
            assert_eq!(g.transcript.ot_interactions, want);
            let rounds = e.transcript.ot_rounds;
            match mode {
                Mode::MaxPerformance => assert_eq!(rounds, 1),
                Mode::ResourceEfficient => assert_eq!(rounds, c.stats().instruction_count + 2),
            }
        }
    }
}

#[test]
fn batch_size_changes_instruction_count() {
    let c = random_dag(12, 250, 6, 20, 2);
    let x = vec![false; c.input_size()];
    for batch in [1, 3, 7] {
        let cfg = SessionConfig::new(Mode::ResourceEfficient)
            .with_batch_size(batch)
            .with_ot(OtKind::InsecureDealer);
        let (_, e) = run_local(&c, &[], &x, &cfg).unwrap();
        let nonfree = c.stats().nonfree_count;
        assert_eq!(e.instruction_trace.len(), nonfree.div_ceil(batch));
        assert!(e.instruction_trace.iter().all(|i| i.len() <= batch));
        assert_eq!(e.transcript.ot_interactions, cfg.expected_ot_count(&c.stats()));
        assert_eq!(e.plain().unwrap(), c.eval_plain(&x).unwrap());
    }
}

#[test]
fn different_seeds_reorder_but_agree() {
    let c = random_dag(16, 600, 8, 24, 600);
    let x: Vec<bool> = (0..16).map(|i| i % 3 == 0).collect();
    let layer = output_layer_ids(&c);
    let mut orders = HashSet::new();
    for s in 0..4 {
        let cfg = SessionConfig::new(Mode::ResourceEfficient)
            .with_seed(Seed::from_u64(s))
            .with_ot(OtKind::InsecureDealer);
        let (g, e) = run_local(&c, &[], &x, &cfg).unwrap();
        assert_eq!(e.plain().unwrap(), c.eval_plain(&x).unwrap());
        assert_eq!(g.instruction_order, e.instruction_trace);
        assert!(output_layer_last(&e.instruction_trace, &layer));
        orders.insert(e.instruction_trace.clone());
    }
    assert_eq!(orders.len(), 4);
}

#[test]
fn streaming_peak_respects_schedule_bound() {
    for c in [random_dag(24, 1200, 12, 40, 3), ripple_adder(8), c17()] {
        let x = vec![true; c.input_size()];
        let cfg = SessionConfig::new(Mode::ResourceEfficient).with_ot(OtKind::InsecureDealer);
        let (g, e) = run_local(&c, &[], &x, &cfg).unwrap();
        assert!(e.peak_live_labels <= g.live_bound.unwrap());
        if c.stats().nonfree_count > 2 * cfg.batch_size {
            assert!(e.peak_live_labels < c.num_wires(), "{}", c.name());
        }
    }
}

/// Every 16-byte window of every payload the evaluator received.
fn windows(capture: &[(MsgType, Vec<u8>)]) -> HashSet<u128> {
    let mut set = HashSet::new();
    for (_, p) in capture {
        for w in p.windows(16) {
            set.insert(u128::from_le_bytes(w.try_into().unwrap()));
        }
    }
    set
}

#[test]
fn evaluator_never_sees_both_labels() {
    let c = split(&random_dag(12, 250, 6, 20, 2));
    let x: Vec<bool> = (0..c.input_size()).map(|i| i % 2 == 1).collect();
    let ng = c.garbler_inputs().len();
    for mode in Mode::ALL {
        for ot in [OtKind::DiffieHellman, OtKind::InsecureDealer] {
            let seed = Seed::from_u64(77);
            let cfg = SessionConfig::new(mode)
                .with_seed(seed)
                .with_ot(ot)
                .with_mask(true);
            let (a, b) = loopback_pair();
            let capture = std::thread::scope(|s| {
                let h = s.spawn(|| run_garbler(&c, &x[..ng], &cfg, &mut Channel::new(a)).unwrap());
                let mut ch = Channel::capturing(b);
                run_evaluator(&x[ng..], &cfg, &mut ch).unwrap();
                h.join().unwrap();
                ch.take_capture()
            });
            let delta = garble_full(&c, &seed).delta().value();
            let set = windows(&capture);
            assert!(set.len() > 100);
            assert!(set.iter().all(|v| !set.contains(&(v ^ delta))), "{mode:?} {ot:?}");
            // The harness itself would notice a leaked pair.
            let z = garble_full(&c, &seed).zero_labels()[0].0;
            let mut leaked = set.clone();
            leaked.insert(z);
            leaked.insert(z ^ delta);
            assert!(leaked.iter().any(|v| leaked.contains(&(v ^ delta))));
        }
    }
}

/// Flips the first payload byte of every OUT_MASKED frame written through it.
struct Tamper(Loopback);

impl Read for Tamper {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        self.0.read(buf)
    }
}

impl Write for Tamper {
    fn write(&mut self, data: &[u8]) -> io::Result<usize> {
        let mut frame = data.to_vec();
        if frame.len() > 5 && frame[0] == MsgType::OutMasked as u8 {
            frame[5] ^= 1;
        }
        self.0.write_all(&frame)?;
        Ok(data.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        self.0.flush()
    }
}

#[test]
fn tampered_masked_output_is_rejected() {
    let c = ripple_adder(4);
    let x = vec![true; 8];
    for mode in Mode::ALL {
        let cfg = SessionConfig::new(mode)
            .with_mask(true)
            .with_ot(OtKind::InsecureDealer);
        let (a, b) = loopback_pair();
        std::thread::scope(|s| {
            let h = s.spawn(|| run_garbler(&c, &[], &cfg, &mut Channel::new(a)));
            let e = run_evaluator(&x, &cfg, &mut Channel::new(Tamper(b)));
            assert!(matches!(e, Err(ProtocolError::MacFailure)));
            assert!(matches!(h.join().unwrap(), Err(ProtocolError::MacFailure)));
        });
    }
}

#[test]
fn masked_sessions_unmask_to_plaintext() {
    let c = split(&ripple_adder(8));
    let mut rng = ChaCha20Rng::seed_from_u64(5);
    let ng = c.garbler_inputs().len();
    for _ in 0..50 {
        let x: Vec<bool> = (0..16).map(|_| rng.gen()).collect();
        let cfg = SessionConfig::new(Mode::MaxPerformance).with_mask(true);
        let (g, e) = run_local(&c, &x[..ng], &x[ng..], &cfg).unwrap();
        let y = c.eval_plain(&x).unwrap();
        assert_eq!(g.verified_output.as_deref(), Some(&y[..]));
        let garbled_eda::protocol::EvaluatorOutput::Masked(m) = &e.output else {
            panic!("masked session returned a plain output")
        };
        let mask = g.mask.unwrap();
        assert_eq!(unmask_verify(m, &mask.pad, &mask.key).unwrap(), y);
    }
}

#[test]
fn tcp_sessions_match_loopback() {
    let c = split(&c17());
    let inputs: Vec<(Vec<bool>, Vec<bool>)> = (0..32u64)
        .map(|x| {
            let b = garbled_eda::netlist::bits_of(x, 5);
            (b[..2].to_vec(), b[2..].to_vec())
        })
        .collect();
    for mode in Mode::ALL {
        let cfg = SessionConfig::new(mode);
        for (res, (xg, xe)) in tcp_sessions(&c, &cfg, &inputs).into_iter().zip(&inputs) {
            let (_, e) = res.unwrap();
            let x: Vec<bool> = xg.iter().chain(xe).copied().collect();
            assert_eq!(e.plain().unwrap(), c.eval_plain(&x).unwrap());
        }
    }
}

#[test]
fn malformed_peer_messages_are_errors() {
    // Evaluator receives garbage instead of HELLO.
    let (a, b) = loopback_pair();
    let mut peer = Channel::new(a);
    peer.send(MsgType::Hello, &[1, 2, 3]).unwrap();
    let r = run_evaluator(&[], &SessionConfig::default(), &mut Channel::new(b));
    assert!(matches!(r, Err(ProtocolError::Framing(_))));

    // Garbler's peer hangs up mid-session.
    let (a, b) = loopback_pair();
    drop(b);
    let r = run_garbler(&c17(), &[], &SessionConfig::default(), &mut Channel::new(a));
    assert!(matches!(r, Err(ProtocolError::Io(_))));
}
