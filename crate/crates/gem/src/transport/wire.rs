//! Newline-delimited wire format.
//!
//! One JSON object per line, self-describing via a `kind` field:
//!
//! ```text
//! {"kind":"request","from":"h","to":"c1","seq":0,
//!  "id":["h_1"],"requester":"h","goal":"memberOfAlpha(c1,X)"}
//! {"kind":"response","from":"c1","to":"h","seq":8,
//!  "id":["h_1"],"answers":["memberOfAlpha(c1,alice)"],
//!  "status":"disposed","loops":[]}
//! {"kind":"flounder","from":"c1","to":"h","seq":3,
//!  "id":["h_1"],"reason":"negative literal not ground"}
//! ```
//!
//! Atoms travel in clause syntax and are re-parsed on decode. Decoding
//! errors carry the byte offset of the offending line.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::engine::{Payload, Request, Response, ResponseStatus};
use crate::ident::RequestId;
use crate::policy::parse_atom;

use super::Envelope;

/// A decode error, with the byte offset of the line that failed.
#[derive(Debug, Clone, thiserror::Error)]
#[error("wire error at byte {offset}: {msg}")]
pub struct WireError {
    pub offset: usize,
    pub msg: String,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum Frame {
    Request {
        from: String,
        to: String,
        seq: u64,
        id: Vec<String>,
        requester: String,
        goal: String,
    },
    Response {
        from: String,
        to: String,
        seq: u64,
        id: Vec<String>,
        answers: Vec<String>,
        status: FrameStatus,
        loops: Vec<Vec<String>>,
    },
    Flounder {
        from: String,
        to: String,
        seq: u64,
        id: Vec<String>,
        reason: String,
    },
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum FrameStatus {
    Active,
    Loop(Vec<String>),
    Disposed,
}

/// Encode one envelope as a single line (no trailing newline).
pub fn encode(env: &Envelope) -> String {
    let frame = match &env.payload {
        Payload::Request(r) => Frame::Request {
            from: env.from.clone(),
            to: env.to.clone(),
            seq: env.seq,
            id: r.id.segments().to_vec(),
            requester: r.requester.clone(),
            goal: r.goal.to_string(),
        },
        Payload::Response(r) => match &r.status {
            ResponseStatus::Floundered(reason) => Frame::Flounder {
                from: env.from.clone(),
                to: env.to.clone(),
                seq: env.seq,
                id: r.id.segments().to_vec(),
                reason: reason.clone(),
            },
            status => Frame::Response {
                from: env.from.clone(),
                to: env.to.clone(),
                seq: env.seq,
                id: r.id.segments().to_vec(),
                answers: r.answers.iter().map(|a| a.to_string()).collect(),
                status: match status {
                    ResponseStatus::Active => FrameStatus::Active,
                    ResponseStatus::Disposed => FrameStatus::Disposed,
                    ResponseStatus::Loop(l) => FrameStatus::Loop(l.segments().to_vec()),
                    ResponseStatus::Floundered(_) => unreachable!(),
                },
                loops: r.loops.iter().map(|l| l.segments().to_vec()).collect(),
            },
        },
    };
    serde_json::to_string(&frame).expect("frames serialize")
}

fn id_from(segments: Vec<String>, offset: usize) -> Result<RequestId, WireError> {
    if segments.is_empty() {
        return Err(WireError { offset, msg: "empty identifier".into() });
    }
    Ok(RequestId::from_segments(segments))
}

/// Decode one line known to start at `offset` bytes into the stream.
pub fn decode_line(line: &str, offset: usize) -> Result<Envelope, WireError> {
    let frame: Frame = serde_json::from_str(line)
        .map_err(|e| WireError { offset, msg: e.to_string() })?;
    let atom = |s: &str| {
        parse_atom(s).map_err(|e| WireError { offset, msg: format!("bad atom `{s}`: {e}") })
    };
    Ok(match frame {
        Frame::Request { from, to, seq, id, requester, goal } => Envelope {
            from,
            to,
            seq,
            payload: Payload::Request(Request {
                id: id_from(id, offset)?,
                requester,
                goal: atom(&goal)?,
            }),
        },
        Frame::Response { from, to, seq, id, answers, status, loops } => {
            let mut loop_set = BTreeSet::new();
            for l in loops {
                loop_set.insert(id_from(l, offset)?);
            }
            Envelope {
                from,
                to,
                seq,
                payload: Payload::Response(Response {
                    id: id_from(id, offset)?,
                    answers: answers.iter().map(|a| atom(a)).collect::<Result<_, _>>()?,
                    status: match status {
                        FrameStatus::Active => ResponseStatus::Active,
                        FrameStatus::Disposed => ResponseStatus::Disposed,
                        FrameStatus::Loop(l) => ResponseStatus::Loop(id_from(l, offset)?),
                    },
                    loops: loop_set,
                }),
            }
        }
        Frame::Flounder { from, to, seq, id, reason } => Envelope {
            from,
            to,
            seq,
            payload: Payload::Response(Response {
                id: id_from(id, offset)?,
                answers: Vec::new(),
                status: ResponseStatus::Floundered(reason),
                loops: BTreeSet::new(),
            }),
        },
    })
}

/// Decode a whole newline-delimited stream.
pub fn decode_stream(input: &str) -> Result<Vec<Envelope>, WireError> {
    let mut out = Vec::new();
    let mut offset = 0;
    for line in input.split_inclusive('\n') {
        let body = line.trim_end_matches('\n');
        if !body.trim().is_empty() {
            out.push(decode_line(body, offset)?);
        }
        offset += line.len();
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::ResponseStatus;

    fn rid(segs: &[&str]) -> RequestId {
        RequestId::from_segments(segs.iter().map(|s| s.to_string()).collect())
    }

    #[test]
    fn round_trips_requests_and_responses() {
        let envs = vec![
            Envelope {
                from: "h".into(),
                to: "c1".into(),
                seq: 0,
                payload: Payload::Request(Request {
                    id: rid(&["h_1"]),
                    requester: "h".into(),
                    goal: parse_atom("memberOfAlpha(c1,X)").unwrap(),
                }),
            },
            Envelope {
                from: "c2".into(),
                to: "c1".into(),
                seq: 5,
                payload: Payload::Response(Response {
                    id: rid(&["h_1", "c1_2"]),
                    answers: vec![parse_atom("memberOfAlpha(c2,alice)").unwrap()],
                    status: ResponseStatus::Loop(rid(&["h_1"])),
                    loops: [rid(&["h_1"])].into_iter().collect(),
                }),
            },
            Envelope {
                from: "c1".into(),
                to: "h".into(),
                seq: 9,
                payload: Payload::Response(Response {
                    id: rid(&["h_1"]),
                    answers: Vec::new(),
                    status: ResponseStatus::Floundered("not(x) in loop".into()),
                    loops: BTreeSet::new(),
                }),
            },
        ];
        let stream: String = envs.iter().map(|e| encode(e) + "\n").collect();
        assert_eq!(decode_stream(&stream).unwrap(), envs);
    }

    #[test]
    fn error_carries_byte_offset() {
        let good = encode(&Envelope {
            from: "h".into(),
            to: "c1".into(),
            seq: 0,
            payload: Payload::Request(Request {
                id: rid(&["h_1"]),
                requester: "h".into(),
                goal: parse_atom("m(c1,X)").unwrap(),
            }),
        });
        let stream = format!("{good}\nnot json\n");
        let err = decode_stream(&stream).unwrap_err();
        assert_eq!(err.offset, good.len() + 1);
    }

    #[test]
    fn rejects_malformed_atom() {
        let line = r#"{"kind":"request","from":"h","to":"c1","seq":0,"id":["h_1"],"requester":"h","goal":"m(c1,"}"#;
        let err = decode_line(line, 120).unwrap_err();
        assert_eq!(err.offset, 120);
        assert!(err.msg.contains("bad atom"));
    }
}
