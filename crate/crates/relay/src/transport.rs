//! Newline-delimited byte streams and the WebSocket bridge.
//!
//! Both carry the same frame bytes. A WebSocket message holds one frame without
//! the trailing newline.

use std::future::Future;
use std::io;
use std::path::PathBuf;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::io::{AsyncRead, AsyncWrite, AsyncWriteExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc;
use bytes::{Bytes, BytesMut};
use tokio_util::codec::{AnyDelimiterCodec, AnyDelimiterCodecError, Decoder, FramedRead};
use tower_http::services::ServeDir;

use crate::conn::Connection;
use crate::relay::Relay;

/// Longest inbound line the relay accepts. Client frames are small.
pub const MAX_INBOUND_FRAME: usize = 64 * 1024;

pub(crate) fn line_codec(max: usize) -> AnyDelimiterCodec {
    AnyDelimiterCodec::new_with_max_length(b"\n".to_vec(), b"\n".to_vec(), max)
}

/// An overlong line, already skipped up to its newline.
struct Oversized;

/// Lines that survive an overlong one; `FramedRead` ends the stream on any decoder error.
struct InboundLines(AnyDelimiterCodec);

impl Decoder for InboundLines {
    type Item = Result<Bytes, Oversized>;
    type Error = io::Error;

    fn decode(&mut self, src: &mut BytesMut) -> io::Result<Option<Self::Item>> {
        lift(self.0.decode(src))
    }

    fn decode_eof(&mut self, src: &mut BytesMut) -> io::Result<Option<Self::Item>> {
        lift(self.0.decode_eof(src))
    }
}

fn lift(r: Result<Option<Bytes>, AnyDelimiterCodecError>) -> io::Result<Option<Result<Bytes, Oversized>>> {
    match r {
        Ok(line) => Ok(line.map(Ok)),
        Err(AnyDelimiterCodecError::MaxChunkLengthExceeded) => Ok(Some(Err(Oversized))),
        Err(AnyDelimiterCodecError::Io(e)) => Err(e),
    }
}

/// Serves one newline-delimited connection until the peer closes it.
pub async fn serve_stream<S>(relay: Relay, stream: S)
where
    S: AsyncRead + AsyncWrite + Send + 'static,
{
    let (reader, mut writer) = tokio::io::split(stream);
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    tokio::spawn(async move {
        while let Some(line) = rx.recv().await {
            if writer.write_all(line.as_bytes()).await.is_err() {
                break;
            }
        }
        let _ = writer.shutdown().await;
    });
    let mut lines = FramedRead::new(reader, InboundLines(line_codec(MAX_INBOUND_FRAME)));
    let mut conn = Connection::new(relay, tx);
    while let Some(item) = lines.next().await {
        match item {
            Ok(Ok(bytes)) => match std::str::from_utf8(&bytes) {
                Ok(line) => conn.on_line(line).await,
                Err(e) => conn.on_malformed(format!("invalid UTF-8: {e}")),
            },
            Ok(Err(Oversized)) => conn.on_malformed(format!("frame longer than {MAX_INBOUND_FRAME} bytes")),
            Err(_) => break,
        }
    }
    conn.close();
}

pub async fn serve_tcp(relay: Relay, listener: TcpListener, shutdown: impl Future<Output = ()>) {
    tokio::pin!(shutdown);
    loop {
        tokio::select! {
            () = &mut shutdown => break,
            accepted = listener.accept() => {
                if let Ok((stream, _)) = accepted {
                    tokio::spawn(serve_stream(relay.clone(), stream));
                }
            }
        }
    }
}

/// `/ws` bridges to the relay; with `console_dir`, every other path serves static files from it.
pub fn router(relay: Relay, console_dir: Option<PathBuf>) -> Router {
    let router = Router::new().route("/ws", get(upgrade)).with_state(relay);
    match console_dir {
        Some(dir) => router.fallback_service(ServeDir::new(dir)),
        None => router,
    }
}

pub async fn serve_http(
    relay: Relay,
    listener: TcpListener,
    console_dir: Option<PathBuf>,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> io::Result<()> {
    axum::serve(listener, router(relay, console_dir)).with_graceful_shutdown(shutdown).await
}

async fn upgrade(State(relay): State<Relay>, ws: WebSocketUpgrade) -> Response {
    ws.max_message_size(MAX_INBOUND_FRAME).on_upgrade(move |socket| serve_ws(relay, socket))
}

async fn serve_ws(relay: Relay, socket: WebSocket) {
    let (mut sink, mut stream) = socket.split();
    let (tx, mut rx) = mpsc::unbounded_channel::<String>();
    tokio::spawn(async move {
        while let Some(mut line) = rx.recv().await {
            if line.ends_with('\n') {
                line.pop();
            }
            if sink.send(Message::Text(line.into())).await.is_err() {
                break;
            }
        }
        let _ = sink.close().await;
    });
    let mut conn = Connection::new(relay, tx);
    while let Some(Ok(msg)) = stream.next().await {
        match msg {
            Message::Text(text) => conn.on_line(text.as_str()).await,
            Message::Binary(bytes) => match std::str::from_utf8(&bytes) {
                Ok(line) => conn.on_line(line).await,
                Err(e) => conn.on_malformed(format!("invalid UTF-8: {e}")),
            },
            Message::Close(_) => break,
            Message::Ping(_) | Message::Pong(_) => {}
        }
    }
    conn.close();
}
