//! Garbler and evaluator state machines.

use std::io::{Read, Write};

use log::{debug, info};
use rand::rngs::OsRng;
use rand::{CryptoRng, Rng, RngCore};

use super::codec::{Put, Reader};
use super::mask::{open_tag_share, tag_share_rows, MaskedOutput, OutputMask};
use super::schedule::{plan_stream, ScheduledOp, DROP_A, DROP_B, DROP_OUT};
use super::{Channel, Mode, MsgType, OtKind, ProtocolError, SessionConfig, Transcript, PROTOCOL_VERSION};
use crate::garbling::{
    garble_full, hash_tweaked, streams, GarbledCircuit, GarbledGate, GarbledTable, LabelStore, Seed,
    WireLabel, DOMAIN_STREAM, ROWS_PER_TABLE,
};
use crate::netlist::{Circuit, WireId};
use crate::ot::{
    insecure, OtBatchReceiver, OtBatchSender, OtCiphertexts, OtReceiverMsg, OtSenderMsg, POINT_BYTES,
};

const NO_WIRE: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct GarblerOutcome {
    pub transcript: Transcript,
    pub seed: Seed,
    pub mask: Option<OutputMask>,
    /// Plain output, recovered after the tag checks out. Masked sessions only.
    pub verified_output: Option<Vec<bool>>,
    /// Table ids per streamed instruction, in send order.
    pub instruction_order: Vec<Vec<u64>>,
    /// Live-label bound of the streamed schedule.
    pub live_bound: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EvaluatorOutput {
    Plain(Vec<bool>),
    Masked(MaskedOutput),
}

#[derive(Debug, Clone)]
pub struct EvaluatorOutcome {
    pub output: EvaluatorOutput,
    pub transcript: Transcript,
    pub peak_live_labels: usize,
    /// Table ids per received instruction.
    pub instruction_trace: Vec<Vec<u64>>,
}

impl EvaluatorOutcome {
    pub fn plain(&self) -> Option<&[bool]> {
        match &self.output {
            EvaluatorOutput::Plain(y) => Some(y),
            EvaluatorOutput::Masked(_) => None,
        }
    }

    /// Output bits as seen by the evaluator: `y`, or `y ^ pad` when masked.
    pub fn bits(&self) -> &[bool] {
        match &self.output {
            EvaluatorOutput::Plain(y) => y,
            EvaluatorOutput::Masked(m) => &m.bits,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
enum Purpose {
    GarblerInput = 0,
    EvaluatorInput = 1,
    InstructionKey = 2,
    DecodeBit = 3,
}

type Slot = (Purpose, u32);

struct OtItem {
    slot: Slot,
    pair: (WireLabel, WireLabel),
}

fn same(slot: Slot, v: WireLabel) -> OtItem {
    OtItem { slot, pair: (v, v) }
}

// ---- hello / meta ----

fn mode_code(m: Mode) -> u8 {
    match m {
        Mode::MaxPerformance => 0,
        Mode::ResourceEfficient => 1,
    }
}

fn ot_code(k: OtKind) -> u8 {
    match k {
        OtKind::DiffieHellman => 0,
        OtKind::InsecureDealer => 1,
    }
}

fn hello(cfg: &SessionConfig) -> Vec<u8> {
    let mut b = Vec::new();
    b.put_u16(PROTOCOL_VERSION);
    b.put_u8(mode_code(cfg.mode));
    b.put_u32(cfg.batch_size as u32);
    b.put_u8(cfg.mask_outputs as u8);
    b.put_u8(ot_code(cfg.ot));
    b
}

fn check_hello(cfg: &SessionConfig, payload: &[u8]) -> Result<(), ProtocolError> {
    let mut r = Reader::new(payload, "HELLO");
    let version = r.u16()?;
    let mode = match r.u8()? {
        0 => Mode::MaxPerformance,
        1 => Mode::ResourceEfficient,
        m => return Err(ProtocolError::Framing(format!("unknown mode {m}"))),
    };
    let batch = r.u32()? as usize;
    let mask = r.u8()? != 0;
    let ot = r.u8()?;
    r.finish()?;
    if version != PROTOCOL_VERSION {
        return Err(ProtocolError::ConfigMismatch(format!(
            "protocol version {version}"
        )));
    }
    if mode != cfg.mode {
        return Err(ProtocolError::ModeMismatch {
            local: cfg.mode,
            peer: mode,
        });
    }
    if batch != cfg.batch_size {
        return Err(ProtocolError::ConfigMismatch(format!(
            "batch size {} vs {batch}",
            cfg.batch_size
        )));
    }
    if mask != cfg.mask_outputs {
        return Err(ProtocolError::ConfigMismatch("output masking".into()));
    }
    if ot != ot_code(cfg.ot) {
        return Err(ProtocolError::ConfigMismatch("oblivious transfer kind".into()));
    }
    Ok(())
}

/// Public circuit metadata.
#[derive(Debug, PartialEq, Eq)]
struct Meta {
    num_wires: u32,
    gates: u32,
    tables: u32,
    garbler_inputs: Vec<WireId>,
    evaluator_inputs: Vec<WireId>,
    outputs: Vec<WireId>,
}

impl Meta {
    fn of(f: &GarbledCircuit) -> Self {
        Meta {
            num_wires: f.num_wires() as u32,
            gates: f.gates().len() as u32,
            tables: f.table_count() as u32,
            garbler_inputs: f.garbler_inputs().to_vec(),
            evaluator_inputs: f.evaluator_inputs().to_vec(),
            outputs: f.outputs().to_vec(),
        }
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut b = Vec::new();
        b.put_u32(self.num_wires);
        b.put_u32(self.gates);
        b.put_u32(self.tables);
        for list in [&self.garbler_inputs, &self.evaluator_inputs, &self.outputs] {
            b.put_u32(list.len() as u32);
            for w in list {
                b.put_u32(w.0);
            }
        }
        b
    }

    fn from_bytes(payload: &[u8]) -> Result<Self, ProtocolError> {
        let mut r = Reader::new(payload, "META");
        let num_wires = r.u32()?;
        let gates = r.u32()?;
        let tables = r.u32()?;
        let mut list = || -> Result<Vec<WireId>, ProtocolError> {
            let n = r.count(4)?;
            (0..n)
                .map(|_| {
                    let w = r.u32()?;
                    if w >= num_wires {
                        return Err(ProtocolError::Framing(format!("wire {w} out of range")));
                    }
                    Ok(WireId(w))
                })
                .collect()
        };
        let garbler_inputs = list()?;
        let evaluator_inputs = list()?;
        let outputs = list()?;
        r.finish()?;
        Ok(Meta {
            num_wires,
            gates,
            tables,
            garbler_inputs,
            evaluator_inputs,
            outputs,
        })
    }

    fn input_slots(&self) -> Vec<Slot> {
        let g = (0..self.garbler_inputs.len()).map(|k| (Purpose::GarblerInput, k as u32));
        let e = (0..self.evaluator_inputs.len()).map(|k| (Purpose::EvaluatorInput, k as u32));
        g.chain(e).collect()
    }

    fn decode_slots(&self) -> Vec<Slot> {
        (0..self.outputs.len())
            .map(|i| (Purpose::DecodeBit, i as u32))
            .collect()
    }

    fn inputs(&self) -> impl Iterator<Item = WireId> + '_ {
        self.garbler_inputs.iter().chain(&self.evaluator_inputs).copied()
    }
}

// ---- instruction and decode payloads ----

#[inline]
fn keystream(key: u128, id: u64, row: usize) -> u128 {
    hash_tweaked(key, id as u128, DOMAIN_STREAM | row as u128)
}

fn put_op(b: &mut Vec<u8>, op: &ScheduledOp, key: Option<u128>) {
    match &op.gate {
        GarbledGate::Free { a, b: rhs, out } => {
            b.put_u8(0);
            b.put_u8(op.drop);
            b.put_u32(a.0);
            b.put_u32(rhs.map_or(NO_WIRE, |w| w.0));
            b.put_u32(out.0);
        }
        GarbledGate::Table {
            id,
            a,
            b: rhs,
            out,
            table,
        } => {
            let key = key.expect("tables travel only inside instructions");
            b.put_u8(1);
            b.put_u8(op.drop);
            b.put_u32(a.0);
            b.put_u32(rhs.0);
            b.put_u32(out.0);
            b.put_u64(*id);
            for (r, row) in table.0.iter().enumerate() {
                b.put_u128(row ^ keystream(key, *id, r));
            }
        }
    }
}

fn get_op(r: &mut Reader<'_>) -> Result<ScheduledOp, ProtocolError> {
    let tag = r.u8()?;
    let drop = r.u8()?;
    let a = WireId(r.u32()?);
    let b = r.u32()?;
    let out = WireId(r.u32()?);
    let gate = match tag {
        0 => GarbledGate::Free {
            a,
            b: (b != NO_WIRE).then_some(WireId(b)),
            out,
        },
        1 => {
            let id = r.u64()?;
            let mut rows = [0u128; ROWS_PER_TABLE];
            for row in rows.iter_mut() {
                *row = r.u128()?;
            }
            GarbledGate::Table {
                id,
                a,
                b: WireId(b),
                out,
                table: GarbledTable(rows),
            }
        }
        t => return Err(ProtocolError::Framing(format!("unknown op tag {t}"))),
    };
    Ok(ScheduledOp { gate, drop })
}

fn instruction_bytes(id: u32, ops: &[ScheduledOp], key: u128) -> Vec<u8> {
    let mut b = Vec::new();
    b.put_u32(id);
    b.put_u32(ops.len() as u32);
    for op in ops {
        put_op(&mut b, op, Some(key));
    }
    b
}

fn decode_bytes(tail: &[ScheduledOp], tag_rows: Option<&[[u128; 2]]>) -> Vec<u8> {
    let mut b = Vec::new();
    b.put_u32(tail.len() as u32);
    for op in tail {
        put_op(&mut b, op, None);
    }
    match tag_rows {
        None => b.put_u8(0),
        Some(rows) => {
            b.put_u8(1);
            for r in rows {
                b.put_u128(r[0]);
                b.put_u128(r[1]);
            }
        }
    }
    b
}

fn apply_op(store: &mut LabelStore, op: &ScheduledOp) -> Result<(), ProtocolError> {
    store.apply(&op.gate)?;
    let mut inputs = op.gate.inputs();
    let a = inputs.next().unwrap();
    if op.drop & DROP_A != 0 {
        store.drop_label(a);
    }
    if op.drop & DROP_B != 0 {
        if let Some(b) = inputs.next() {
            store.drop_label(b);
        }
    }
    if op.drop & DROP_OUT != 0 {
        store.drop_label(op.gate.out());
    }
    Ok(())
}

// ---- oblivious transfer rounds ----

fn manifest_bytes(slots: impl Iterator<Item = Slot>, n: usize) -> Vec<u8> {
    let mut b = Vec::with_capacity(4 + 5 * n);
    b.put_u32(n as u32);
    for (p, i) in slots {
        b.put_u8(p as u8);
        b.put_u32(i);
    }
    b
}

fn ot_send<S: Read + Write, R: RngCore + CryptoRng>(
    ch: &mut Channel<S>,
    kind: OtKind,
    items: &[OtItem],
    rng: &mut R,
) -> Result<(), ProtocolError> {
    let n = items.len();
    ch.send(
        MsgType::Labels,
        &manifest_bytes(items.iter().map(|it| it.slot), n),
    )?;
    match kind {
        OtKind::DiffieHellman => {
            let (sender, msgs) = OtBatchSender::setup(n, rng);
            let out: Vec<u8> = msgs.iter().flat_map(|m| m.0).collect();
            ch.send(MsgType::OtS, &out)?;
            let reply = ch.recv(MsgType::OtR)?;
            if reply.len() != n * POINT_BYTES {
                return Err(ProtocolError::Framing(format!("OT_R of {} bytes", reply.len())));
            }
            let replies: Vec<OtReceiverMsg> = reply
                .chunks_exact(POINT_BYTES)
                .map(|c| OtReceiverMsg(c.try_into().unwrap()))
                .collect();
            let pairs: Vec<_> = items.iter().map(|it| it.pair).collect();
            let cts = sender.transfer(&pairs, &replies)?;
            let out: Vec<u8> = cts.iter().flat_map(|c| c.to_bytes()).collect();
            ch.send(MsgType::OtCt, &out)?;
        }
        OtKind::InsecureDealer => {
            ch.send(MsgType::OtS, &[])?;
            let choices = ch.recv(MsgType::OtR)?;
            if choices.len() != n {
                return Err(ProtocolError::Framing(format!("OT_R of {} bytes", choices.len())));
            }
            let mut out = Vec::with_capacity(16 * n);
            for (it, &c) in items.iter().zip(&choices) {
                out.put_u128(insecure::dealer_transfer(it.pair.0, it.pair.1, c != 0).0);
            }
            ch.send(MsgType::OtCt, &out)?;
        }
    }
    let t = ch.transcript_mut();
    t.ot_interactions += n;
    t.ot_rounds += 1;
    Ok(())
}

fn ot_receive<S: Read + Write, R: RngCore + CryptoRng>(
    ch: &mut Channel<S>,
    kind: OtKind,
    expected: &[Slot],
    choices: &[bool],
    rng: &mut R,
) -> Result<Vec<WireLabel>, ProtocolError> {
    let n = expected.len();
    let manifest = ch.recv(MsgType::Labels)?;
    if manifest != manifest_bytes(expected.iter().copied(), n) {
        return Err(ProtocolError::Framing("unexpected OT manifest".into()));
    }
    let labels = match kind {
        OtKind::DiffieHellman => {
            let setup = ch.recv(MsgType::OtS)?;
            if setup.len() != n * POINT_BYTES {
                return Err(ProtocolError::Framing(format!("OT_S of {} bytes", setup.len())));
            }
            let msgs: Vec<OtSenderMsg> = setup
                .chunks_exact(POINT_BYTES)
                .map(|c| OtSenderMsg(c.try_into().unwrap()))
                .collect();
            let (receiver, replies) = OtBatchReceiver::choose(choices, &msgs, rng)?;
            let out: Vec<u8> = replies.iter().flat_map(|m| m.0).collect();
            ch.send(MsgType::OtR, &out)?;
            let ct = ch.recv(MsgType::OtCt)?;
            if ct.len() != n * 32 {
                return Err(ProtocolError::Framing(format!("OT_CT of {} bytes", ct.len())));
            }
            let cts = ct
                .chunks_exact(32)
                .map(|c| OtCiphertexts::from_slices(&c[..16], &c[16..]))
                .collect::<Result<Vec<_>, _>>()?;
            receiver.retrieve(&cts)?
        }
        OtKind::InsecureDealer => {
            ch.recv(MsgType::OtS)?;
            let out: Vec<u8> = choices.iter().map(|&c| c as u8).collect();
            ch.send(MsgType::OtR, &out)?;
            let ct = ch.recv(MsgType::OtCt)?;
            let mut r = Reader::new(&ct, "OT_CT");
            let labels = (0..n)
                .map(|_| r.u128().map(WireLabel))
                .collect::<Result<Vec<_>, _>>()?;
            r.finish()?;
            labels
        }
    };
    let t = ch.transcript_mut();
    t.ot_interactions += n;
    t.ot_rounds += 1;
    Ok(labels)
}

// ---- garbler ----

pub fn run_garbler<S: Read + Write>(
    c: &Circuit,
    x_g: &[bool],
    cfg: &SessionConfig,
    ch: &mut Channel<S>,
) -> Result<GarblerOutcome, ProtocolError> {
    cfg.validate()?;
    if x_g.len() != c.garbler_inputs().len() {
        return Err(ProtocolError::InputLength {
            expected: c.garbler_inputs().len(),
            got: x_g.len(),
        });
    }
    if cfg.mask_outputs && c.outputs().is_empty() {
        return Err(ProtocolError::InvalidConfig(
            "masking a circuit without outputs".into(),
        ));
    }
    ch.send(MsgType::Hello, &hello(cfg))?;
    check_hello(cfg, &ch.recv(MsgType::Hello)?)?;

    let seed = cfg.seed.unwrap_or_else(Seed::random);
    let garbling = garble_full(c, &seed);
    let f = &garbling.circuit;
    let enc = &garbling.encoding;
    let delta = garbling.delta();
    ch.send(MsgType::Meta, &Meta::of(f).to_bytes())?;
    info!(
        "garbler: {} gates, {} tables, mode {:?}",
        f.gates().len(),
        f.table_count(),
        cfg.mode
    );

    let mask = cfg
        .mask_outputs
        .then(|| OutputMask::random(f.outputs().len(), &mut seed.rng(streams::MASK)));
    let tag_rows = mask.as_ref().map(|m| {
        let zero: Vec<WireLabel> = f
            .outputs()
            .iter()
            .map(|w| garbling.zero_labels()[w.index()])
            .collect();
        let mut rng = seed.rng(streams::MASK);
        // Skip past the draws that produced the mask.
        let _ = OutputMask::random(f.outputs().len(), &mut rng);
        tag_share_rows(m, &zero, delta, &mut rng)
    });

    let ng = f.garbler_inputs().len();
    let mut input_items: Vec<OtItem> = x_g
        .iter()
        .enumerate()
        .map(|(k, &bit)| same((Purpose::GarblerInput, k as u32), enc.label(k, bit)))
        .collect();
    input_items.extend((0..f.evaluator_inputs().len()).map(|k| OtItem {
        slot: (Purpose::EvaluatorInput, k as u32),
        pair: enc.pair(ng + k),
    }));
    let decode_items: Vec<OtItem> = garbling
        .decoding
        .0
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            let pad = mask.as_ref().is_some_and(|m| m.pad[i]);
            same((Purpose::DecodeBit, i as u32), WireLabel((d ^ pad) as u128))
        })
        .collect();

    let mut ot_rng = seed.rng(streams::OT);
    let mut instruction_order = Vec::new();
    let mut live_bound = None;
    match cfg.mode {
        Mode::MaxPerformance => {
            ch.send(MsgType::FBlob, &f.to_bytes())?;
            ch.send(MsgType::Decode, &decode_bytes(&[], tag_rows.as_deref()))?;
            input_items.extend(decode_items);
            if !input_items.is_empty() {
                ot_send(ch, cfg.ot, &input_items, &mut ot_rng)?;
            }
        }
        Mode::ResourceEfficient => {
            if !input_items.is_empty() {
                ot_send(ch, cfg.ot, &input_items, &mut ot_rng)?;
            }
            let plan = plan_stream(f, cfg.batch_size, Some(&mut seed.rng(streams::SCHEDULE)));
            live_bound = Some(plan.live_bound);
            let mut key_rng = seed.rng(streams::STREAM_KEYS);
            for instr in &plan.instructions {
                let key: u128 = key_rng.gen();
                ch.send(MsgType::Instr, &instruction_bytes(instr.id, &instr.ops, key))?;
                ot_send(
                    ch,
                    cfg.ot,
                    &[same((Purpose::InstructionKey, instr.id), WireLabel(key))],
                    &mut ot_rng,
                )?;
                instruction_order.push(instr.table_ids());
            }
            debug!("garbler: streamed {} instructions", plan.instructions.len());
            ch.send(MsgType::Decode, &decode_bytes(&plan.tail, tag_rows.as_deref()))?;
            if !decode_items.is_empty() {
                ot_send(ch, cfg.ot, &decode_items, &mut ot_rng)?;
            }
        }
    }

    let mut verified_output = None;
    if let Some(m) = &mask {
        let bits_payload = ch.recv(MsgType::OutMasked)?;
        let tag_payload = ch.recv(MsgType::OutTag)?;
        if bits_payload.len() != m.pad.len() || bits_payload.iter().any(|&b| b > 1) {
            return Err(ProtocolError::Framing("malformed OUT_MASKED".into()));
        }
        let mut r = Reader::new(&tag_payload, "OUT_TAG");
        let tag = r.u128()?;
        r.finish()?;
        let masked = MaskedOutput {
            bits: bits_payload.iter().map(|&b| b == 1).collect(),
            tag,
        };
        match super::unmask_verify(&masked, &m.pad, &m.key) {
            Ok(y) => verified_output = Some(y),
            Err(e) => {
                ch.send(MsgType::Done, &[1])?;
                return Err(e.into());
            }
        }
    }
    ch.send(MsgType::Done, &[0])?;
    Ok(GarblerOutcome {
        transcript: ch.transcript().clone(),
        seed,
        mask,
        verified_output,
        instruction_order,
        live_bound,
    })
}

// ---- evaluator ----

fn random_bits<R: RngCore>(n: usize, rng: &mut R) -> Vec<bool> {
    (0..n).map(|_| rng.gen()).collect()
}

/// Tail ops and, when masked, the encrypted tag-share rows.
type DecodeMsg = (Vec<ScheduledOp>, Option<Vec<[u128; 2]>>);

fn parse_decode(payload: &[u8], outputs: usize, masked: bool) -> Result<DecodeMsg, ProtocolError> {
    let mut r = Reader::new(payload, "DECODE");
    let n = r.count(14)?;
    let mut tail = Vec::with_capacity(n);
    for _ in 0..n {
        let op = get_op(&mut r)?;
        if op.gate.is_table() {
            return Err(ProtocolError::Framing("table outside an instruction".into()));
        }
        tail.push(op);
    }
    let has_tags = r.u8()? != 0;
    if has_tags != masked {
        return Err(ProtocolError::Framing(
            "tag shares do not match the masking setting".into(),
        ));
    }
    let rows = if has_tags {
        Some(
            (0..outputs)
                .map(|_| Ok([r.u128()?, r.u128()?]))
                .collect::<Result<Vec<_>, ProtocolError>>()?,
        )
    } else {
        None
    };
    r.finish()?;
    Ok((tail, rows))
}

fn decode_bit(v: WireLabel) -> Result<bool, ProtocolError> {
    match v.0 {
        0 => Ok(false),
        1 => Ok(true),
        _ => Err(ProtocolError::Framing("decode value is not a bit".into())),
    }
}

pub fn run_evaluator<S: Read + Write>(
    x_e: &[bool],
    cfg: &SessionConfig,
    ch: &mut Channel<S>,
) -> Result<EvaluatorOutcome, ProtocolError> {
    cfg.validate()?;
    let peer_hello = ch.recv(MsgType::Hello)?;
    ch.send(MsgType::Hello, &hello(cfg))?;
    check_hello(cfg, &peer_hello)?;

    let meta = Meta::from_bytes(&ch.recv(MsgType::Meta)?)?;
    if x_e.len() != meta.evaluator_inputs.len() {
        return Err(ProtocolError::InputLength {
            expected: meta.evaluator_inputs.len(),
            got: x_e.len(),
        });
    }
    let mut rng = OsRng;
    let ng = meta.garbler_inputs.len();
    let no = meta.outputs.len();
    let mut input_choices = random_bits(ng, &mut rng);
    input_choices.extend_from_slice(x_e);
    let mut store = LabelStore::new(meta.num_wires as usize);
    let mut trace = Vec::new();

    let (decode_labels, tag_rows) = match cfg.mode {
        Mode::MaxPerformance => {
            let f = GarbledCircuit::from_bytes(&ch.recv(MsgType::FBlob)?)?;
            if Meta::of(&f) != meta {
                return Err(ProtocolError::Framing(
                    "garbled circuit disagrees with META".into(),
                ));
            }
            let (tail, rows) = parse_decode(&ch.recv(MsgType::Decode)?, no, cfg.mask_outputs)?;
            if !tail.is_empty() {
                return Err(ProtocolError::Framing("free ops after a full circuit".into()));
            }
            let mut slots = meta.input_slots();
            slots.extend(meta.decode_slots());
            let mut choices = input_choices;
            choices.extend(random_bits(no, &mut rng));
            let mut labels = if slots.is_empty() {
                Vec::new()
            } else {
                ot_receive(ch, cfg.ot, &slots, &choices, &mut rng)?
            };
            let decode_labels = labels.split_off(meta.inputs().count());
            for (w, l) in meta.inputs().zip(labels) {
                store.set(w, l)?;
            }
            for g in f.gates() {
                store.apply(g)?;
            }
            (decode_labels, rows)
        }
        Mode::ResourceEfficient => {
            let slots = meta.input_slots();
            if !slots.is_empty() {
                let labels = ot_receive(ch, cfg.ot, &slots, &input_choices, &mut rng)?;
                for (w, l) in meta.inputs().zip(labels) {
                    store.set(w, l)?;
                }
            }
            let decode_payload = loop {
                let (msg, payload) = ch.recv_any()?;
                match msg {
                    MsgType::Instr => {
                        let mut r = Reader::new(&payload, "INSTR");
                        let id = r.u32()?;
                        let n = r.count(14)?;
                        let ops = (0..n).map(|_| get_op(&mut r)).collect::<Result<Vec<_>, _>>()?;
                        r.finish()?;
                        let choice = random_bits(1, &mut rng);
                        let key =
                            ot_receive(ch, cfg.ot, &[(Purpose::InstructionKey, id)], &choice, &mut rng)?[0].0;
                        let mut tables = Vec::new();
                        for mut op in ops {
                            if let GarbledGate::Table { id, table, .. } = &mut op.gate {
                                for (r, row) in table.0.iter_mut().enumerate() {
                                    *row ^= keystream(key, *id, r);
                                }
                                tables.push(*id);
                            }
                            apply_op(&mut store, &op)?;
                        }
                        trace.push(tables);
                    }
                    MsgType::Decode => break payload,
                    got => {
                        return Err(ProtocolError::UnexpectedMessage {
                            expected: MsgType::Instr,
                            got,
                        })
                    }
                }
            };
            let (tail, rows) = parse_decode(&decode_payload, no, cfg.mask_outputs)?;
            for op in &tail {
                apply_op(&mut store, op)?;
            }
            let labels = if no == 0 {
                Vec::new()
            } else {
                let choices = random_bits(no, &mut rng);
                ot_receive(ch, cfg.ot, &meta.decode_slots(), &choices, &mut rng)?
            };
            (labels, rows)
        }
    };

    let y_labels = meta
        .outputs
        .iter()
        .map(|&w| store.get(w))
        .collect::<Result<Vec<_>, _>>()?;
    let bits = y_labels
        .iter()
        .zip(&decode_labels)
        .map(|(l, &d)| Ok(l.color() ^ decode_bit(d)?))
        .collect::<Result<Vec<bool>, ProtocolError>>()?;

    let output = match tag_rows {
        None => EvaluatorOutput::Plain(bits),
        Some(rows) => {
            let tag = y_labels
                .iter()
                .enumerate()
                .fold(0u128, |acc, (i, &l)| acc ^ open_tag_share(&rows[i], l, i));
            ch.send(
                MsgType::OutMasked,
                &bits.iter().map(|&b| b as u8).collect::<Vec<_>>(),
            )?;
            ch.send(MsgType::OutTag, &tag.to_le_bytes())?;
            EvaluatorOutput::Masked(MaskedOutput { bits, tag })
        }
    };
    match ch.recv(MsgType::Done)?.as_slice() {
        [0] => {}
        [1] => return Err(ProtocolError::MacFailure),
        _ => return Err(ProtocolError::Framing("malformed DONE".into())),
    }
    Ok(EvaluatorOutcome {
        output,
        transcript: ch.transcript().clone(),
        peak_live_labels: store.peak(),
        instruction_trace: trace,
    })
}

/// Runs both parties in-process over a loopback pipe.
pub fn run_local(
    c: &Circuit,
    x_g: &[bool],
    x_e: &[bool],
    cfg: &SessionConfig,
) -> Result<(GarblerOutcome, EvaluatorOutcome), ProtocolError> {
    let (a, b) = super::loopback_pair();
    std::thread::scope(|s| {
        let garbler = s.spawn(move || run_garbler(c, x_g, cfg, &mut Channel::new(a)));
        let evaluator = run_evaluator(x_e, cfg, &mut Channel::new(b));
        let garbler = garbler.join().expect("garbler thread panicked");
        match (garbler, evaluator) {
            (Ok(g), Ok(e)) => Ok((g, e)),
            (Err(g), Err(e)) => Err(if matches!(g, ProtocolError::Io(_)) { e } else { g }),
            (Err(err), Ok(_)) | (Ok(_), Err(err)) => Err(err),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{parity, ripple_adder, single_gate};
    use crate::netlist::{bits_of, parse_bench, GateKind};

    fn c17() -> Circuit {
        parse_bench(include_str!("../../benchmarks/c17.bench")).unwrap()
    }

    fn all_modes() -> Vec<SessionConfig> {
        let mut v = Vec::new();
        for mode in Mode::ALL {
            for ot in [OtKind::DiffieHellman, OtKind::InsecureDealer] {
                v.push(SessionConfig::new(mode).with_ot(ot).with_seed(Seed::from_u64(7)));
            }
        }
        v
    }

    #[test]
    fn and_gate_both_modes() {
        let c = single_gate(GateKind::And).with_garbler_inputs(&["a"]).unwrap();
        for cfg in all_modes() {
            for x in 0..4u64 {
                let bits = bits_of(x, 2);
                let (g, e) = run_local(&c, &bits[..1], &bits[1..], &cfg).unwrap();
                assert_eq!(e.plain().unwrap(), &[bits[0] & bits[1]]);
                let expect = cfg.expected_ot_count(&c.stats());
                assert_eq!(e.transcript.ot_interactions, expect);
                assert_eq!(g.transcript.ot_interactions, expect);
            }
        }
    }

    #[test]
    fn c17_split_inputs_exhaustive() {
        let c = c17().with_garbler_inputs(&["1", "2"]).unwrap();
        for cfg in all_modes() {
            for x in 0..32u64 {
                let bits = bits_of(x, 5);
                let (_, e) = run_local(&c, &bits[..2], &bits[2..], &cfg).unwrap();
                assert_eq!(e.plain().unwrap(), c.eval_plain(&bits).unwrap());
            }
        }
    }

    #[test]
    fn xor_only_circuit_streams_no_instructions() {
        let c = parity(5);
        let cfg = SessionConfig::new(Mode::ResourceEfficient).with_ot(OtKind::InsecureDealer);
        let bits = bits_of(0b10110, 5);
        let (_, e) = run_local(&c, &[], &bits, &cfg).unwrap();
        assert_eq!(e.plain().unwrap(), c.eval_plain(&bits).unwrap());
        assert!(e.instruction_trace.is_empty());
    }

    #[test]
    fn masked_session_verifies() {
        let c = ripple_adder(4)
            .with_garbler_inputs(&["a0", "a1", "a2", "a3"])
            .unwrap();
        for mode in Mode::ALL {
            let cfg = SessionConfig::new(mode)
                .with_mask(true)
                .with_ot(OtKind::InsecureDealer);
            let bits = bits_of(0b1011_0110, 8);
            let (g, e) = run_local(&c, &bits[..4], &bits[4..], &cfg).unwrap();
            let y = c.eval_plain(&bits).unwrap();
            assert_eq!(g.verified_output.as_deref(), Some(&y[..]));
            let pad = &g.mask.as_ref().unwrap().pad;
            let unmasked: Vec<bool> = e.bits().iter().zip(pad).map(|(a, b)| a ^ b).collect();
            assert_eq!(unmasked, y);
        }
    }

    #[test]
    fn mode_mismatch_detected() {
        let c = single_gate(GateKind::Or);
        let (a, b) = super::super::loopback_pair();
        std::thread::scope(|s| {
            let h = s.spawn(move || {
                run_garbler(
                    &c,
                    &[],
                    &SessionConfig::new(Mode::MaxPerformance),
                    &mut Channel::new(a),
                )
            });
            let e = run_evaluator(
                &[true, false],
                &SessionConfig::new(Mode::ResourceEfficient),
                &mut Channel::new(b),
            );
            assert!(matches!(e, Err(ProtocolError::ModeMismatch { .. })));
            assert!(matches!(
                h.join().unwrap(),
                Err(ProtocolError::ModeMismatch { .. })
            ));
        });
    }

    #[test]
    fn wrong_input_length() {
        let c = single_gate(GateKind::Or);
        let r = run_local(&c, &[], &[true], &SessionConfig::default());
        assert!(matches!(
            r,
            Err(ProtocolError::InputLength { expected: 2, got: 1 })
        ));
    }
}
