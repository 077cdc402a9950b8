//! TCP operator endpoint: one connection at a time, newline-delimited
//! frames. Threads hand frames to the runner over channels only.

use std::io::{self, BufRead, BufReader, Write};
use std::net::{TcpListener, TcpStream, ToSocketAddrs};
use std::sync::mpsc::{channel, Receiver, Sender};
use std::thread;

use teleassist_core::protocol::Envelope;

use crate::codec::{decode, encode_line, DecodeError};
use crate::operator::{LinkOutput, OperatorLink};

enum Inbound {
    Frame(Envelope),
    Unknown(u64, u64, String),
    Disconnected,
}

enum Outbound {
    Frame(String),
    Connection(TcpStream),
}

/// Operator reached over the network.
pub struct NetworkOperator {
    inbound: Receiver<Inbound>,
    outbound: Sender<Outbound>,
    local: std::net::SocketAddr,
}

impl NetworkOperator {
    pub fn listen(addr: impl ToSocketAddrs) -> io::Result<Self> {
        let listener = TcpListener::bind(addr)?;
        let local = listener.local_addr()?;
        let (in_tx, inbound) = channel();
        let (outbound, out_rx) = channel();
        let conn_tx = outbound.clone();
        thread::spawn(move || writer(out_rx));
        thread::spawn(move || {
            for stream in listener.incoming() {
                let Ok(stream) = stream else { continue };
                let Ok(write_half) = stream.try_clone() else {
                    continue;
                };
                if conn_tx.send(Outbound::Connection(write_half)).is_err() {
                    return;
                }
                // serve until the operator goes away, then accept the next
                reader(stream, &in_tx);
                if in_tx.send(Inbound::Disconnected).is_err() {
                    return;
                }
            }
        });
        Ok(Self {
            inbound,
            outbound,
            local,
        })
    }

    pub fn local_addr(&self) -> std::net::SocketAddr {
        self.local
    }
}

fn writer(rx: Receiver<Outbound>) {
    let mut conn: Option<TcpStream> = None;
    for msg in rx {
        match msg {
            Outbound::Connection(s) => conn = Some(s),
            Outbound::Frame(line) => {
                if let Some(s) = &mut conn {
                    if s.write_all(line.as_bytes()).is_err() {
                        conn = None;
                    }
                }
            }
        }
    }
}

fn reader(stream: TcpStream, tx: &Sender<Inbound>) {
    let shutdown = stream.try_clone().ok();
    for line in BufReader::new(stream).lines() {
        let Ok(line) = line else { break };
        if line.trim().is_empty() {
            continue;
        }
        let msg = match decode(&line) {
            Ok(env) => Inbound::Frame(env),
            Err(DecodeError::UnknownPayload { session, seq, kind }) => Inbound::Unknown(session, seq, kind),
            Err(DecodeError::MalformedFrame(_)) => break,
        };
        if tx.send(msg).is_err() {
            break;
        }
    }
    if let Some(s) = shutdown {
        let _ = s.shutdown(std::net::Shutdown::Both);
    }
}

impl OperatorLink for NetworkOperator {
    fn exchange(&mut self, _now: f64, inbound: Vec<Envelope>) -> LinkOutput {
        for env in inbound {
            let _ = self.outbound.send(Outbound::Frame(encode_line(&env)));
        }
        let mut out = LinkOutput::default();
        while let Ok(msg) = self.inbound.try_recv() {
            match msg {
                Inbound::Frame(f) => out.frames.push(f),
                Inbound::Unknown(session, seq, kind) => out.unknown.push((session, seq, kind)),
                Inbound::Disconnected => out.disconnected = true,
            }
        }
        out
    }

    fn realtime(&self) -> bool {
        true
    }
}
