use crate::codec::{Canonical, DecodeError, Decoder, Encoder};
use crate::ordering::Block;
use crate::tx::Transaction;

use super::checkpoint::{CheckpointRecord, NodeId};

/// Everything exchanged over the simulated network.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    /// Client to node.
    ClientTx(Transaction),
    /// Node to node (execute-and-order flow).
    ForwardTx(Transaction),
    /// Client or node to the ordering service.
    SubmitTx(Transaction),
    DeliverBlock(Block),
    SubmitCheckpoint(CheckpointRecord),
    DeliverCheckpoint(CheckpointRecord),
    /// Asks the ordering service to resend blocks from `from` on.
    FetchBlocks { from: u64, node: NodeId },
    TimeToCut(u64),
}

impl Canonical for Message {
    fn encode_to(&self, e: &mut Encoder) {
        match self {
            Message::ClientTx(t) => t.encode_to(e.u8(1)),
            Message::ForwardTx(t) => t.encode_to(e.u8(2)),
            Message::SubmitTx(t) => t.encode_to(e.u8(3)),
            Message::DeliverBlock(b) => b.encode_to(e.u8(4)),
            Message::SubmitCheckpoint(c) => c.encode_to(e.u8(5)),
            Message::DeliverCheckpoint(c) => c.encode_to(e.u8(6)),
            Message::FetchBlocks { from, node } => {
                e.u8(7).u64(*from).u32(*node);
            }
            Message::TimeToCut(h) => {
                e.u8(8).u64(*h);
            }
        }
    }

    fn decode_from(d: &mut Decoder<'_>) -> Result<Self, DecodeError> {
        Ok(match d.u8()? {
            1 => Message::ClientTx(Transaction::decode_from(d)?),
            2 => Message::ForwardTx(Transaction::decode_from(d)?),
            3 => Message::SubmitTx(Transaction::decode_from(d)?),
            4 => Message::DeliverBlock(Block::decode_from(d)?),
            5 => Message::SubmitCheckpoint(CheckpointRecord::decode_from(d)?),
            6 => Message::DeliverCheckpoint(CheckpointRecord::decode_from(d)?),
            7 => Message::FetchBlocks { from: d.u64()?, node: d.u32()? },
            8 => Message::TimeToCut(d.u64()?),
            tag => return Err(DecodeError::BadTag { what: "message", tag }),
        })
    }
}
