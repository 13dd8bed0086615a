//! Post-dominators, control and data dependence, and PDG assembly.

mod control;
mod iso;
pub mod oracle;
mod pdg;
mod postdom;
mod reaching;

use thiserror::Error;

pub use control::control_dependences;
pub use iso::{find_isomorphism, is_isomorphic};
pub use pdg::{build_pdg, Pdg, PdgNode};
pub use postdom::{compute_postdominators, PostDomTree};
pub use reaching::{data_dependences, reaching_definitions, reaching_definitions_with_order, Definition, ReachInfo};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DataflowError {
    #[error("exit is unreachable from statement {statement}")]
    UnreachableExit { statement: usize },
    #[error("invalid PDG: {0}")]
    InvalidPdg(String),
}
