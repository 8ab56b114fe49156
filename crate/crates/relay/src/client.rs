//! Line-protocol client used by the headless agents and the admin commands.

use std::io;

use futures_util::StreamExt;
use serde_json::json;
use sharecam_core::protocol::{
    decode_frame, encode_frame, kind, CodecError, Frame, ProtocolParams, Role, SharingMode, Timestamp,
};
use thiserror::Error;
use tokio::io::{AsyncRead, AsyncWrite, AsyncWriteExt, ReadHalf, WriteHalf};
use tokio::net::{TcpStream, ToSocketAddrs};
use tokio_util::codec::{AnyDelimiterCodec, AnyDelimiterCodecError, FramedRead};

use crate::transport::line_codec;

/// Longest line a client accepts; media frames carry their payload inline.
pub const MAX_CLIENT_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("connection closed by the relay")]
    Closed,
    #[error("relay sent an undecodable frame: {0}")]
    Codec(#[from] CodecError),
    #[error("relay refused ({code}): {reason}")]
    Refused { code: String, reason: String },
    #[error("unexpected reply: {0}")]
    Unexpected(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CreatedSession {
    pub session_id: String,
    pub token: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attached {
    /// Session clock at attach time.
    pub ts_ms: Timestamp,
    pub active: bool,
}

pub struct Client<S> {
    reader: FramedRead<ReadHalf<S>, AnyDelimiterCodec>,
    writer: WriteHalf<S>,
    next_seq: u64,
}

impl Client<TcpStream> {
    pub async fn connect(addr: impl ToSocketAddrs) -> io::Result<Self> {
        Ok(Self::new(TcpStream::connect(addr).await?))
    }
}

impl<S: AsyncRead + AsyncWrite> Client<S> {
    pub fn new(stream: S) -> Self {
        let (reader, writer) = tokio::io::split(stream);
        Self { reader: FramedRead::new(reader, line_codec(MAX_CLIENT_FRAME)), writer, next_seq: 1 }
    }

    pub async fn send(&mut self, frame: &Frame) -> Result<(), ClientError> {
        self.writer.write_all(encode_frame(frame).as_bytes()).await?;
        Ok(())
    }

    /// Next frame from the relay. Cancel-safe.
    pub async fn recv(&mut self) -> Result<Frame, ClientError> {
        match self.reader.next().await {
            None => Err(ClientError::Closed),
            Some(Ok(bytes)) => {
                let line = std::str::from_utf8(&bytes).map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e))?;
                Ok(decode_frame(line)?)
            }
            Some(Err(AnyDelimiterCodecError::Io(e))) => Err(e.into()),
            Some(Err(e)) => Err(io::Error::new(io::ErrorKind::InvalidData, e.to_string()).into()),
        }
    }

    fn control(&mut self, session_id: &str, from: Role, kind: &str, body: serde_json::Value) -> Frame {
        let seq = self.next_seq;
        self.next_seq += 1;
        Frame::new(session_id, seq, 0, from, kind, body)
    }

    async fn expect(&mut self, wanted: &str) -> Result<Frame, ClientError> {
        let frame = self.recv().await?;
        if frame.kind == kind::ERROR {
            return Err(refused(&frame));
        }
        if frame.kind != wanted {
            return Err(ClientError::Unexpected(format!("expected '{wanted}', got '{}'", frame.kind)));
        }
        Ok(frame)
    }

    pub async fn create_session(
        &mut self,
        friend_id: &str,
        mode: SharingMode,
        params: Option<&ProtocolParams>,
    ) -> Result<CreatedSession, ClientError> {
        let mut body = json!({ "friend_id": friend_id, "mode": mode });
        if let Some(p) = params {
            body["params"] = json!(p);
        }
        let frame = self.control("", Role::Wearer, kind::CREATE_SESSION, body);
        self.send(&frame).await?;
        let reply = self.expect(kind::SESSION_CREATED).await?;
        let field = |name: &str| {
            reply.body_str(name).map(str::to_owned).ok_or_else(|| ClientError::Unexpected(format!("missing '{name}'")))
        };
        Ok(CreatedSession { session_id: field("session_id")?, token: field("token")? })
    }

    pub async fn attach(&mut self, session_id: &str, role: Role, token: &str) -> Result<Attached, ClientError> {
        let frame = self.control(session_id, role, kind::ATTACH, json!({ "token": token }));
        self.send(&frame).await?;
        let reply = self.expect(kind::ATTACHED).await?;
        let active = reply.body.get("active").and_then(serde_json::Value::as_bool).unwrap_or(false);
        Ok(Attached { ts_ms: reply.ts_ms, active })
    }
}

pub(crate) fn refused(frame: &Frame) -> ClientError {
    ClientError::Refused {
        code: frame.body_str("code").unwrap_or("unknown").to_owned(),
        reason: frame.body_str("reason").unwrap_or_default().to_owned(),
    }
}
