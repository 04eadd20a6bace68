//! The metered in-process channel. Both parties run in one process; every
//! protocol message is serialized, recorded, then delivered, so byte counts
//! and round structure are exact and runs replay bit-identically.

use crate::error::{Error, Result};
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Receiver,
    Sender,
}

impl Party {
    pub fn other(self) -> Party {
        match self {
            Party::Receiver => Party::Sender,
            Party::Sender => Party::Receiver,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Party::Receiver => "receiver",
            Party::Sender => "sender",
        }
    }
}

impl fmt::Display for Party {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsgTag {
    SetupR,
    SetupS,
    Chromatic,
    Query,
    Resp,
    Result,
}

impl MsgTag {
    pub fn name(self) -> &'static str {
        match self {
            MsgTag::SetupR => "SETUP-R",
            MsgTag::SetupS => "SETUP-S",
            MsgTag::Chromatic => "CHROMATIC",
            MsgTag::Query => "QUERY",
            MsgTag::Resp => "RESP",
            MsgTag::Result => "RESULT",
        }
    }

    /// Setup messages are counted separately from protocol rounds.
    pub fn is_setup(self) -> bool {
        matches!(self, MsgTag::SetupR | MsgTag::SetupS)
    }
}

impl fmt::Display for MsgTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TranscriptEntry {
    pub from: Party,
    pub tag: MsgTag,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Transcript {
    pub entries: Vec<TranscriptEntry>,
}

impl Transcript {
    /// Protocol rounds: one per non-setup message.
    pub fn rounds(&self) -> u32 {
        self.entries.iter().filter(|e| !e.tag.is_setup()).count() as u32
    }

    pub fn total_bytes(&self) -> u64 {
        self.entries.iter().map(|e| e.payload.len() as u64).sum()
    }

    pub fn find(&self, tag: MsgTag) -> Option<&TranscriptEntry> {
        self.entries.iter().find(|e| e.tag == tag)
    }

    /// Flat byte image, used for determinism comparisons.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        for e in &self.entries {
            out.push(match e.from {
                Party::Receiver => 0u8,
                Party::Sender => 1u8,
            });
            out.push(e.tag as u8);
            crate::wire::put_bytes(&mut out, &e.payload);
        }
        out
    }
}

/// Strictly alternating half-duplex channel: a sent message must be received
/// by the peer before the next send.
#[derive(Debug, Default)]
pub struct Channel {
    pub transcript: Transcript,
    inbox: Option<(Party, MsgTag, Vec<u8>)>,
}

impl Channel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn send(&mut self, from: Party, tag: MsgTag, payload: Vec<u8>) -> Result<()> {
        if self.inbox.is_some() {
            return Err(Error::Wire("previous message not yet delivered".into()));
        }
        self.transcript.entries.push(TranscriptEntry {
            from,
            tag,
            payload: payload.clone(),
        });
        self.inbox = Some((from, tag, payload));
        Ok(())
    }

    pub fn recv(&mut self, to: Party, expect: MsgTag) -> Result<Vec<u8>> {
        match self.inbox.take() {
            Some((from, tag, payload)) if from == to.other() && tag == expect => Ok(payload),
            Some((from, tag, _)) => Err(Error::Wire(format!(
                "expected {expect} for {to}, found {tag} from {from}"
            ))),
            None => Err(Error::Wire(format!("no pending message for {to}"))),
        }
    }
}
