//! Two-party sessions between a garbler and an evaluator.
//!
//! Two modes are supported. In max-performance mode the garbler ships the whole garbled circuit
//! up front and all input and decode material moves in a single OT round. In resource-efficient
//! mode the garbler streams one instruction at a time, each unlocked by its own OT instance, so
//! the evaluator only holds the labels that later instructions still read.

mod channel;
mod codec;
pub mod mask;
pub mod schedule;
mod session;

use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::garbling::{FormatError, GarbleError, Seed};
use crate::netlist::CircuitStats;
use crate::ot::OtError;

pub use channel::{
    loopback_pair, tcp_channel, Channel, Direction, Loopback, MsgType, Transcript, TranscriptEntry,
};
pub use mask::{mac_tag, mask_outputs, unmask_verify, MacKey, MaskError, MaskedOutput, OutputMask};
pub use schedule::{
    make_instructions, output_layer, plan_stream, GarbledInstruction, ScheduledOp, StreamPlan,
};
pub use session::{run_evaluator, run_garbler, run_local, EvaluatorOutcome, EvaluatorOutput, GarblerOutcome};

pub const PROTOCOL_VERSION: u16 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MaxPerformance,
    ResourceEfficient,
}

impl Mode {
    pub const ALL: [Mode; 2] = [Mode::MaxPerformance, Mode::ResourceEfficient];
}

/// How oblivious transfers are carried out.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OtKind {
    DiffieHellman,
    /// The receiver sends its choice bits in the clear. Test use only.
    InsecureDealer,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionConfig {
    pub mode: Mode,
    pub batch_size: usize,
    pub mask_outputs: bool,
    /// Garbler only. A fresh seed is drawn when absent.
    pub seed: Option<Seed>,
    pub ot: OtKind,
}

impl Default for SessionConfig {
    fn default() -> Self {
        SessionConfig {
            mode: Mode::MaxPerformance,
            batch_size: crate::netlist::GATES_PER_INSTRUCTION,
            mask_outputs: false,
            seed: None,
            ot: OtKind::DiffieHellman,
        }
    }
}

impl SessionConfig {
    pub fn new(mode: Mode) -> Self {
        SessionConfig {
            mode,
            ..Default::default()
        }
    }

    pub fn with_seed(mut self, seed: Seed) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_mask(mut self, mask: bool) -> Self {
        self.mask_outputs = mask;
        self
    }

    pub fn with_ot(mut self, ot: OtKind) -> Self {
        self.ot = ot;
        self
    }

    pub fn validate(&self) -> Result<(), ProtocolError> {
        if self.batch_size == 0 || self.batch_size > u32::MAX as usize {
            return Err(ProtocolError::InvalidConfig(format!(
                "batch size {}",
                self.batch_size
            )));
        }
        Ok(())
    }

    /// OT instances a session under this config runs on a circuit with `stats`.
    pub fn expected_ot_count(&self, stats: &CircuitStats) -> usize {
        let inst = stats.nonfree_count.div_ceil(self.batch_size.max(1));
        ot_count_from(inst, stats.input_size, stats.output_size, self.mode)
    }
}

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
    #[error("framing violation: {0}")]
    Framing(String),
    #[error("expected {expected:?} message, got {got:?}")]
    UnexpectedMessage { expected: MsgType, got: MsgType },
    #[error("mode mismatch: local {local:?}, peer {peer:?}")]
    ModeMismatch { local: Mode, peer: Mode },
    #[error("session parameters differ: {0}")]
    ConfigMismatch(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("expected {expected} input bits, got {got}")]
    InputLength { expected: usize, got: usize },
    #[error("oblivious transfer failed: {0}")]
    Ot(#[from] OtError),
    #[error(transparent)]
    Garble(#[from] GarbleError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("output MAC verification failed")]
    MacFailure,
}

impl From<MaskError> for ProtocolError {
    fn from(e: MaskError) -> Self {
        match e {
            MaskError::MacMismatch => ProtocolError::MacFailure,
            other => ProtocolError::Framing(other.to_string()),
        }
    }
}

/// OT instances for a circuit with `stats` in `mode`, at four tables per instruction.
pub fn ot_count(stats: &CircuitStats, mode: Mode) -> usize {
    ot_count_from(stats.instruction_count, stats.input_size, stats.output_size, mode)
}

pub fn ot_count_from(instructions: usize, input_size: usize, output_size: usize, mode: Mode) -> usize {
    match mode {
        Mode::MaxPerformance => input_size + output_size,
        Mode::ResourceEfficient => instructions + input_size + output_size,
    }
}
