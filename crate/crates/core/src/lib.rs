pub mod costmodel;
pub mod garbling;
pub mod generators;
mod gf128;
pub mod netlist;
pub mod ot;
pub mod protocol;
pub mod selector;
