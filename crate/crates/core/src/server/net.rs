//! TCP front end.
//!
//! Connections are read on their own threads, but every decoded frame is
//! funnelled through one channel into a single engine thread that owns the
//! [`Server`]. That channel is the total order of all state mutations.

use std::collections::HashMap;
use std::io::{BufWriter, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::mpsc::{self, Receiver, Sender};
use std::thread;
use std::time::{SystemTime, UNIX_EPOCH};

use log::{debug, info, warn};

use super::Server;
use crate::activity::{ParticipantId, Timestamp};
use crate::wire::{decode_client, encode_server, ClientMessage, ErrorCode, LineFramer, ServerMessage};

type SessionId = u64;

enum Command {
    Connect { session: SessionId, tx: Sender<String> },
    Frame { session: SessionId, frame: Vec<u8> },
    TooLong { session: SessionId },
    Disconnect { session: SessionId },
}

struct Session {
    who: Option<ParticipantId>,
    tx: Sender<String>,
}

pub fn wall_clock() -> Timestamp {
    Timestamp(
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    )
}

/// Accept connections forever. `clock` supplies `now` for each command.
pub fn run<C>(listener: TcpListener, server: Server, clock: C) -> std::io::Result<()>
where
    C: Fn() -> Timestamp + Send + 'static,
{
    let (tx, rx) = mpsc::channel();
    thread::Builder::new()
        .name("engine".into())
        .spawn(move || engine(server, rx, clock))?;

    let mut next_session: SessionId = 0;
    for stream in listener.incoming() {
        let stream = match stream {
            Ok(s) => s,
            Err(e) => {
                warn!("accept failed: {e}");
                continue;
            }
        };
        next_session += 1;
        let session = next_session;
        let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
        info!("session {session} connected from {peer}");
        let writer = stream.try_clone()?;
        let (out_tx, out_rx) = mpsc::channel::<String>();
        if tx.send(Command::Connect { session, tx: out_tx }).is_err() {
            break;
        }
        thread::spawn(move || write_loop(writer, out_rx));
        let cmd_tx = tx.clone();
        thread::spawn(move || read_loop(session, stream, cmd_tx));
    }
    Ok(())
}

fn read_loop(session: SessionId, mut stream: TcpStream, tx: Sender<Command>) {
    let mut framer = LineFramer::new();
    let mut buf = [0u8; 4096];
    loop {
        let n = match stream.read(&mut buf) {
            Ok(0) | Err(_) => break,
            Ok(n) => n,
        };
        for frame in framer.push(&buf[..n]) {
            let cmd = match frame {
                Ok(frame) => Command::Frame { session, frame },
                Err(_) => Command::TooLong { session },
            };
            if tx.send(cmd).is_err() {
                return;
            }
        }
    }
    let _ = tx.send(Command::Disconnect { session });
}

fn write_loop(stream: TcpStream, rx: Receiver<String>) {
    let mut out = BufWriter::new(stream);
    while let Ok(line) = rx.recv() {
        if out.write_all(line.as_bytes()).is_err() {
            return;
        }
        // drain whatever else is ready before flushing
        while let Ok(more) = rx.try_recv() {
            if out.write_all(more.as_bytes()).is_err() {
                return;
            }
        }
        if out.flush().is_err() {
            return;
        }
    }
}

fn engine<C: Fn() -> Timestamp>(mut server: Server, rx: Receiver<Command>, clock: C) {
    let mut sessions: HashMap<SessionId, Session> = HashMap::new();

    let reply = |sessions: &HashMap<SessionId, Session>, session: SessionId, msg: &ServerMessage| {
        if let Some(s) = sessions.get(&session) {
            let _ = s.tx.send(encode_server(msg));
        }
    };
    let err = |code: ErrorCode, detail: String| ServerMessage::Err { code, detail };

    while let Ok(cmd) = rx.recv() {
        match cmd {
            Command::Connect { session, tx } => {
                sessions.insert(session, Session { who: None, tx });
            }
            Command::Disconnect { session } => {
                sessions.remove(&session);
                debug!("session {session} closed");
            }
            Command::TooLong { session } => {
                reply(&sessions, session, &err(ErrorCode::BadFrame, "frame too long".into()));
            }
            Command::Frame { session, frame } => {
                let msg = match std::str::from_utf8(&frame)
                    .map_err(|e| e.to_string())
                    .and_then(|f| decode_client(f).map_err(|e| e.to_string()))
                {
                    Ok(m) => m,
                    Err(e) => {
                        reply(&sessions, session, &err(ErrorCode::BadFrame, e));
                        continue;
                    }
                };
                if let ClientMessage::Hello { participant } = &msg {
                    if let Some(s) = sessions.get_mut(&session) {
                        s.who = Some(participant.clone());
                    }
                }
                let Some(who) = sessions.get(&session).and_then(|s| s.who.clone()) else {
                    reply(
                        &sessions,
                        session,
                        &err(ErrorCode::NotIdentified, "send HELLO first".into()),
                    );
                    continue;
                };
                let outcome = match server.handle(&msg, &who, clock()) {
                    Ok(o) => o,
                    Err(e) => {
                        // the log could not be written; stop rather than diverge from it
                        log::error!("event log write failed: {e}");
                        return;
                    }
                };
                for (to, out) in &outcome.outbound {
                    if matches!(out, ServerMessage::Notify { .. }) {
                        let line = encode_server(out);
                        for s in sessions.values().filter(|s| s.who.as_ref() == Some(to)) {
                            let _ = s.tx.send(line.clone());
                        }
                    } else {
                        reply(&sessions, session, out);
                    }
                }
            }
        }
    }
}
