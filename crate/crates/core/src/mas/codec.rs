//! Textual message codec.
//!
//! One message per line:
//!
//! ```text
//! message (inform, VD362, LPS34, 23, V<0.912>)
//! ```
//!
//! Content payloads: `V<voltage>` for violations (the bus is the sending
//! VD's index), `ADJ<dg,+delta,Q|P>` for adjustments, `STAT<dg,off>` /
//! `STAT<dg,on,upper,lower>` for DG status, `ESC<reason>`, `ORG<epsilon>`,
//! `RST<>` and `ASG<subnetwork,member|member|...>`. Floats are rendered in
//! shortest round-trip form, so encode-decode is the identity.

use std::fmt;

use thiserror::Error;

use super::{AgentId, Message, MessageContent, Performative, Role};
use crate::grid::DgMode;
use crate::regulation::InsufficientReason;

#[derive(Debug, Error, PartialEq)]
#[error("message parse error at column {column}: {reason}")]
pub struct CodecError {
    /// 1-based byte position where parsing failed.
    pub column: usize,
    pub reason: String,
}

fn performative_str(p: Performative) -> &'static str {
    match p {
        Performative::Inform => "inform",
        Performative::Request => "request",
        Performative::Confirm => "confirm",
        Performative::QueryIf => "query-if",
        Performative::Failure => "failure",
    }
}

fn mode_letter(mode: DgMode) -> char {
    match mode {
        DgMode::Pfc => 'Q',
        DgMode::Upf => 'P',
    }
}

struct ContentDisplay<'a>(&'a MessageContent);

impl fmt::Display for ContentDisplay<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.0 {
            MessageContent::Violation { voltage, .. } => write!(f, "V<{voltage}>"),
            MessageContent::Adjust { dg, delta, mode } => {
                write!(f, "ADJ<{dg},{delta:+},{}>", mode_letter(*mode))
            }
            MessageContent::DgStatus {
                dg,
                available: false,
                ..
            } => write!(f, "STAT<{dg},off>"),
            MessageContent::DgStatus {
                dg,
                available: true,
                surplus: (up, lo),
            } => write!(f, "STAT<{dg},on,{up},{lo}>"),
            MessageContent::EscalationRequest { reason } => write!(f, "ESC<{reason}>"),
            MessageContent::ReorganizeNotice { epsilon } => write!(f, "ORG<{epsilon}>"),
            MessageContent::RestoreRequest => write!(f, "RST<>"),
            MessageContent::Assignment {
                subnetwork,
                members,
            } => {
                let subnet = match subnetwork {
                    Some(s) => s.to_string(),
                    None => "none".to_string(),
                };
                let members = members
                    .iter()
                    .map(|m| m.to_string())
                    .collect::<Vec<_>>()
                    .join("|");
                write!(f, "ASG<{subnet},{members}>")
            }
        }
    }
}

/// Renders a message as its single-line wire form.
pub fn encode_message(m: &Message) -> String {
    format!(
        "message ({}, {}, {}, {}, {})",
        performative_str(m.performative),
        m.sender,
        m.destination,
        m.time,
        ContentDisplay(&m.content)
    )
}

struct Cursor<'a> {
    text: &'a str,
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn err<T>(&self, reason: impl Into<String>) -> Result<T, CodecError> {
        Err(CodecError {
            column: self.pos + 1,
            reason: reason.into(),
        })
    }

    fn expect(&mut self, token: &str) -> Result<(), CodecError> {
        if self.text[self.pos..].starts_with(token) {
            self.pos += token.len();
            Ok(())
        } else {
            self.err(format!("expected `{token}`"))
        }
    }

    fn take_until(&mut self, stop: char) -> Result<&'a str, CodecError> {
        match self.text[self.pos..].find(stop) {
            Some(rel) => {
                let s = &self.text[self.pos..self.pos + rel];
                self.pos += rel;
                Ok(s)
            }
            None => self.err(format!("expected `{stop}` before end of line")),
        }
    }

    fn parse_with<T>(
        &mut self,
        raw: &str,
        what: &str,
        parse: impl FnOnce(&str) -> Option<T>,
    ) -> Result<T, CodecError> {
        match parse(raw) {
            Some(v) => Ok(v),
            None => self.err(format!("invalid {what} `{raw}`")),
        }
    }
}

fn parse_agent(cur: &mut Cursor, raw: &str) -> Result<AgentId, CodecError> {
    let split = raw.find(|c: char| c.is_ascii_digit());
    let Some(split) = split else {
        return cur.err(format!("agent id `{raw}` has no index"));
    };
    let (role_s, idx_s) = raw.split_at(split);
    let role = match role_s {
        "ED" => Role::Ed,
        "VD" => Role::Vd,
        "LPS" => Role::Lps,
        "DG" => Role::Dg,
        _ => return cur.err(format!("unknown agent role `{role_s}`")),
    };
    let index = cur.parse_with(idx_s, "agent index", |s| s.parse().ok())?;
    Ok(AgentId { role, index })
}

fn parse_content(
    cur: &mut Cursor,
    sender: AgentId,
) -> Result<MessageContent, CodecError> {
    let tag = cur.take_until('<')?.to_string();
    cur.expect("<")?;
    let payload = cur.take_until('>')?.to_string();
    cur.expect(">")?;
    match tag.as_str() {
        "V" => {
            let voltage = cur.parse_with(&payload, "voltage", |s| s.parse().ok())?;
            // The violated bus is the sending VD's own bus.
            Ok(MessageContent::Violation {
                bus: sender.index,
                voltage,
            })
        }
        "ADJ" => {
            let parts: Vec<&str> = payload.split(',').collect();
            if parts.len() != 3 {
                return cur.err("ADJ payload needs dg,delta,mode");
            }
            let dg = cur.parse_with(parts[0], "dg id", |s| s.parse().ok())?;
            let delta = cur.parse_with(parts[1], "delta", |s| s.parse().ok())?;
            let mode = match parts[2] {
                "Q" => DgMode::Pfc,
                "P" => DgMode::Upf,
                other => return cur.err(format!("unknown adjust mode `{other}`")),
            };
            Ok(MessageContent::Adjust { dg, delta, mode })
        }
        "STAT" => {
            let parts: Vec<&str> = payload.split(',').collect();
            let dg = cur.parse_with(parts[0], "dg id", |s| s.parse().ok())?;
            match (parts.len(), parts.get(1).copied()) {
                (2, Some("off")) => Ok(MessageContent::DgStatus {
                    dg,
                    available: false,
                    surplus: (0.0, 0.0),
                }),
                (4, Some("on")) => {
                    let up = cur.parse_with(parts[2], "surplus", |s| s.parse().ok())?;
                    let lo = cur.parse_with(parts[3], "surplus", |s| s.parse().ok())?;
                    Ok(MessageContent::DgStatus {
                        dg,
                        available: true,
                        surplus: (up, lo),
                    })
                }
                _ => cur.err("STAT payload needs dg,off or dg,on,upper,lower"),
            }
        }
        "ESC" => {
            let reason: InsufficientReason =
                cur.parse_with(&payload, "escalation reason", |s| s.parse().ok())?;
            Ok(MessageContent::EscalationRequest { reason })
        }
        "ORG" => {
            let epsilon = cur.parse_with(&payload, "epsilon", |s| s.parse().ok())?;
            Ok(MessageContent::ReorganizeNotice { epsilon })
        }
        "RST" => {
            if payload.is_empty() {
                Ok(MessageContent::RestoreRequest)
            } else {
                cur.err("RST payload must be empty")
            }
        }
        "ASG" => {
            let (subnet_s, members_s) = match payload.split_once(',') {
                Some(pair) => pair,
                None => return cur.err("ASG payload needs subnetwork,members"),
            };
            let subnetwork = if subnet_s == "none" {
                None
            } else {
                Some(cur.parse_with(subnet_s, "subnetwork id", |s| s.parse().ok())?)
            };
            let mut members = Vec::new();
            if !members_s.is_empty() {
                for token in members_s.split('|') {
                    members.push(parse_agent(cur, token)?);
                }
            }
            Ok(MessageContent::Assignment {
                subnetwork,
                members,
            })
        }
        other => cur.err(format!("unknown content tag `{other}`")),
    }
}

/// Parses one wire line back into a [`Message`]. Errors carry the 1-based
/// column where parsing failed.
pub fn decode_message(line: &str) -> Result<Message, CodecError> {
    let mut cur = Cursor { text: line, pos: 0 };
    cur.expect("message (")?;
    let raw = cur.take_until(',')?.to_string();
    let performative = match raw.as_str() {
        "inform" => Performative::Inform,
        "request" => Performative::Request,
        "confirm" => Performative::Confirm,
        "query-if" => Performative::QueryIf,
        "failure" => Performative::Failure,
        other => return cur.err(format!("unknown performative `{other}`")),
    };
    cur.expect(", ")?;
    let raw = cur.take_until(',')?.to_string();
    let sender = parse_agent(&mut cur, &raw)?;
    cur.expect(", ")?;
    let raw = cur.take_until(',')?.to_string();
    let destination = parse_agent(&mut cur, &raw)?;
    cur.expect(", ")?;
    let raw = cur.take_until(',')?.to_string();
    let time = cur.parse_with(&raw, "time", |s| s.parse().ok())?;
    cur.expect(", ")?;
    let content = parse_content(&mut cur, sender)?;
    cur.expect(")")?;
    if cur.pos != line.len() {
        return cur.err("trailing characters after message");
    }
    Ok(Message {
        performative,
        sender,
        destination,
        time,
        content,
    })
}
