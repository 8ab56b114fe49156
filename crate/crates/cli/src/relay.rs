use sharecam_relay::client::{Client, ClientError};
use sharecam_relay::transport::{serve_http, serve_tcp};
use sharecam_relay::Relay;
use tokio::net::TcpListener;
use tokio::sync::watch;

use crate::{CreateSessionArgs, Failure, RelayCommand, ServeArgs, EXIT_BIND, EXIT_CONNECT, EXIT_IO};

pub(crate) async fn run(cmd: RelayCommand) -> Result<(), Failure> {
    match cmd {
        RelayCommand::Serve(args) => serve(args).await,
        RelayCommand::CreateSession(args) => create_session(&args).await,
    }
}

async fn serve(args: ServeArgs) -> Result<(), Failure> {
    std::fs::create_dir_all(&args.log_dir)
        .map_err(|e| Failure::new(EXIT_IO, format!("cannot create log dir {}: {e}", args.log_dir.display())))?;
    if let Some(dir) = args.console_dir.as_ref().filter(|d| !d.is_dir()) {
        return Err(Failure::new(EXIT_IO, format!("console dir {} is not a directory", dir.display())));
    }
    let relay = Relay::new(&args.log_dir);
    let (stop, stopped) = watch::channel(false);
    let until_stopped = move || {
        let mut rx = stopped.clone();
        async move {
            let _ = rx.wait_for(|s| *s).await;
        }
    };

    let listener = bind(args.listen).await?;
    let http = match args.http {
        Some(addr) => Some(bind(addr).await?),
        None => None,
    };
    println!("listening on {}", local_addr(&listener)?);
    let mut tasks = vec![tokio::spawn(serve_tcp(relay.clone(), listener, until_stopped()))];
    if let Some(listener) = http {
        println!("http on {}", local_addr(&listener)?);
        let shutdown = until_stopped();
        let (relay, console_dir) = (relay.clone(), args.console_dir.clone());
        tasks.push(tokio::spawn(async move {
            let _ = serve_http(relay, listener, console_dir, shutdown).await;
        }));
    }

    interrupted().await;
    let _ = stop.send(true);
    let open = relay.session_ids().len();
    relay.shutdown().await;
    // Open WebSocket connections would hold a graceful HTTP shutdown forever.
    for task in tasks {
        task.abort();
    }
    eprintln!("shut down, {open} session logs closed");
    Ok(())
}

async fn bind(addr: std::net::SocketAddr) -> Result<TcpListener, Failure> {
    TcpListener::bind(addr).await.map_err(|e| Failure::new(EXIT_BIND, format!("cannot listen on {addr}: {e}")))
}

fn local_addr(listener: &TcpListener) -> Result<std::net::SocketAddr, Failure> {
    listener.local_addr().map_err(|e| Failure::new(EXIT_BIND, e.to_string()))
}

#[cfg(unix)]
async fn interrupted() {
    use tokio::signal::unix::{signal, SignalKind};
    match signal(SignalKind::terminate()) {
        Ok(mut term) => tokio::select! {
            _ = tokio::signal::ctrl_c() => {}
            _ = term.recv() => {}
        },
        Err(_) => {
            let _ = tokio::signal::ctrl_c().await;
        }
    }
}

#[cfg(not(unix))]
async fn interrupted() {
    let _ = tokio::signal::ctrl_c().await;
}

async fn create_session(args: &CreateSessionArgs) -> Result<(), Failure> {
    let mut client = Client::connect(args.addr).await.map_err(|e| connect_failure(args.addr, e.into()))?;
    let created =
        client.create_session(&args.friend_id, args.mode, None).await.map_err(|e| connect_failure(args.addr, e))?;
    println!("session_id={}", created.session_id);
    println!("token={}", created.token);
    Ok(())
}

/// Anything that stops a conversation with the relay, refusals included.
pub(crate) fn connect_failure(addr: std::net::SocketAddr, e: ClientError) -> Failure {
    let message = match e {
        ClientError::Refused { code, reason } => format!("relay refused: {} ({code}): {reason}", refusal_name(&code)),
        other => format!("relay at {addr}: {other}"),
    };
    Failure::new(EXIT_CONNECT, message)
}

/// `bad_token` -> `BadToken`.
fn refusal_name(code: &str) -> String {
    code.split('_')
        .map(|w| {
            let mut c = w.chars();
            c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn refusal_names() {
        assert_eq!(refusal_name("bad_token"), "BadToken");
        assert_eq!(refusal_name("no_such_session"), "NoSuchSession");
    }
}
