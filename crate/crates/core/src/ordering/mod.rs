//! Block production: FIFO total order, size and time-to-cut triggers,
//! hash chaining and orderer signatures.

mod block;
mod sequencer;

pub use block::{Block, BlockError};
pub use sequencer::{CutTrigger, OrdererConfig, OrderingBackend, OrderingError, Sequencer, SubmitAck};
