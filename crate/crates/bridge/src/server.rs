//! TCP pub/sub server.
//!
//! Thread layout: one acceptor, one dispatcher that encodes each envelope
//! once and fans it out, and a reader plus a writer per client. The tick
//! loop only ever does a non-blocking `try_send` into the dispatcher.

use std::collections::{HashMap, HashSet, VecDeque};
use std::io::{ErrorKind, Read, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, AtomicU64, AtomicUsize, Ordering};
use std::sync::mpsc::{self, Receiver, SyncSender, TrySendError};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::codec::{decode_frame, encode_frame, Envelope, Frame};
use crate::schema::CommandMsg;
use crate::{glob_match, BridgeError};

pub const CLIENT_QUEUE_DEPTH: usize = 1024;
pub const HANDOFF_DEPTH: usize = 8192;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub bind: String,
    pub port: u16,
    /// Globs of topics handed to the server; others are not published.
    pub topics: Vec<String>,
    pub client_queue_depth: usize,
    pub handoff_depth: usize,
}

impl ServerConfig {
    pub fn new(bind: impl Into<String>, port: u16) -> Self {
        Self {
            bind: bind.into(),
            port,
            topics: vec!["*".into()],
            client_queue_depth: CLIENT_QUEUE_DEPTH,
            handoff_depth: HANDOFF_DEPTH,
        }
    }
}

/// Counter snapshot.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostics {
    pub published: u64,
    /// Envelopes refused because the dispatcher queue was full.
    pub handoff_dropped: u64,
    /// Frames discarded from slow clients' queues.
    pub client_dropped: u64,
    pub clients: usize,
    pub protocol_errors: u64,
    pub commands_received: u64,
    pub unknown_agent_commands: u64,
}

#[derive(Default)]
struct Counters {
    published: AtomicU64,
    handoff_dropped: AtomicU64,
    client_dropped: AtomicU64,
    protocol_errors: AtomicU64,
    commands_received: AtomicU64,
    unknown_agent_commands: AtomicU64,
}

struct Outbox {
    frames: VecDeque<Arc<[u8]>>,
    closed: bool,
}

struct Client {
    id: u64,
    subs: Mutex<Vec<String>>,
    subscribed: AtomicBool,
    outbox: Mutex<Outbox>,
    ready: Condvar,
    depth: usize,
}

impl Client {
    fn wants(&self, topic: &str) -> bool {
        self.subs.lock().unwrap().iter().any(|g| glob_match(g, topic))
    }

    fn push(&self, frame: Arc<[u8]>, counters: &Counters) {
        let mut o = self.outbox.lock().unwrap();
        if o.closed {
            return;
        }
        if o.frames.len() >= self.depth {
            o.frames.pop_front();
            counters.client_dropped.fetch_add(1, Ordering::Relaxed);
        }
        o.frames.push_back(frame);
        self.ready.notify_one();
    }

    /// Replace anything queued with a final ERROR frame.
    fn fail(&self, message: &str) {
        let mut o = self.outbox.lock().unwrap();
        o.frames.clear();
        if let Ok(f) = encode_frame(&Frame::Error { message: message.to_string() }) {
            o.frames.push_back(f.into());
        }
        o.closed = true;
        self.ready.notify_one();
    }

    fn close(&self) {
        self.outbox.lock().unwrap().closed = true;
        self.ready.notify_one();
    }

    fn pending(&self) -> usize {
        self.outbox.lock().unwrap().frames.len()
    }
}

struct Shared {
    clients: Mutex<Vec<Arc<Client>>>,
    inbox: Mutex<Vec<CommandMsg>>,
    counters: Counters,
    shutdown: AtomicBool,
    live_clients: AtomicUsize,
    subscribers: AtomicUsize,
}

enum Outgoing {
    Envelope(Envelope),
    Barrier(mpsc::Sender<()>),
}

pub struct BridgeServer {
    addr: SocketAddr,
    handoff: Option<SyncSender<Outgoing>>,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
    topics: Vec<String>,
    last_tick: HashMap<String, u64>,
    agents: HashSet<String>,
}

impl BridgeServer {
    /// Binds and starts serving. `agents` are the names commands may address.
    pub fn serve(config: &ServerConfig, agents: impl IntoIterator<Item = String>) -> Result<Self, BridgeError> {
        let listener = TcpListener::bind((config.bind.as_str(), config.port))
            .map_err(|e| BridgeError::Bind { addr: format!("{}:{}", config.bind, config.port), source: e })?;
        let addr = listener.local_addr()?;
        listener.set_nonblocking(true)?;
        let shared = Arc::new(Shared {
            clients: Mutex::new(Vec::new()),
            inbox: Mutex::new(Vec::new()),
            counters: Counters::default(),
            shutdown: AtomicBool::new(false),
            live_clients: AtomicUsize::new(0),
            subscribers: AtomicUsize::new(0),
        });
        let (tx, rx) = mpsc::sync_channel(config.handoff_depth.max(1));
        let depth = config.client_queue_depth.max(1);
        let mut threads = Vec::new();
        {
            let shared = shared.clone();
            threads.push(thread::Builder::new().name("bridge-accept".into()).spawn(move || accept_loop(listener, shared, depth))?);
        }
        {
            let shared = shared.clone();
            threads.push(thread::Builder::new().name("bridge-dispatch".into()).spawn(move || dispatch_loop(rx, shared))?);
        }
        debug!("bridge listening on {addr}");
        Ok(Self {
            addr,
            handoff: Some(tx),
            shared,
            threads,
            topics: config.topics.clone(),
            last_tick: HashMap::new(),
            agents: agents.into_iter().collect(),
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Hands `envelope` to the network side without blocking. Envelopes whose
    /// topic is outside the configured globs are skipped; a full handoff
    /// queue drops the envelope and counts it.
    pub fn publish(&mut self, envelope: Envelope) -> Result<(), BridgeError> {
        envelope.check()?;
        if let Some(&last) = self.last_tick.get(&envelope.topic) {
            if envelope.tick < last {
                return Err(BridgeError::NonMonotoneTick { topic: envelope.topic, last, got: envelope.tick });
            }
        }
        if !self.topics.iter().any(|g| glob_match(g, &envelope.topic)) {
            return Ok(());
        }
        match self.last_tick.get_mut(&envelope.topic) {
            Some(t) => *t = envelope.tick,
            None => {
                self.last_tick.insert(envelope.topic.clone(), envelope.tick);
            }
        }
        let tx = self.handoff.as_ref().ok_or(BridgeError::Closed)?;
        match tx.try_send(Outgoing::Envelope(envelope)) {
            Ok(()) => Ok(()),
            Err(TrySendError::Full(_)) => {
                self.shared.counters.handoff_dropped.fetch_add(1, Ordering::Relaxed);
                Ok(())
            }
            Err(TrySendError::Disconnected(_)) => Err(BridgeError::Closed),
        }
    }

    /// Commands received since the last poll, at most one per agent (the
    /// last received), in order of arrival of those survivors. Commands for
    /// unknown agents are dropped and counted.
    pub fn poll_commands(&mut self) -> Vec<CommandMsg> {
        let drained = std::mem::take(&mut *self.shared.inbox.lock().unwrap());
        let mut out: Vec<CommandMsg> = Vec::new();
        for cmd in drained {
            if !self.agents.contains(&cmd.agent) {
                self.shared.counters.unknown_agent_commands.fetch_add(1, Ordering::Relaxed);
                continue;
            }
            out.retain(|c| c.agent != cmd.agent);
            out.push(cmd);
        }
        out
    }

    pub fn diagnostics(&self) -> Diagnostics {
        let c = &self.shared.counters;
        Diagnostics {
            published: c.published.load(Ordering::Relaxed),
            handoff_dropped: c.handoff_dropped.load(Ordering::Relaxed),
            client_dropped: c.client_dropped.load(Ordering::Relaxed),
            clients: self.shared.live_clients.load(Ordering::Relaxed),
            protocol_errors: c.protocol_errors.load(Ordering::Relaxed),
            commands_received: c.commands_received.load(Ordering::Relaxed),
            unknown_agent_commands: c.unknown_agent_commands.load(Ordering::Relaxed),
        }
    }

    /// Number of clients that have completed the TCP handshake and not left.
    pub fn client_count(&self) -> usize {
        self.shared.live_clients.load(Ordering::Relaxed)
    }

    /// Blocks until everything published so far is dispatched and every
    /// client queue is empty, or `timeout` passes. Not for the tick loop.
    pub fn flush(&self, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        let Some(tx) = &self.handoff else { return false };
        let (ack_tx, ack_rx) = mpsc::channel();
        if tx.send(Outgoing::Barrier(ack_tx)).is_err() || ack_rx.recv_timeout(deadline.saturating_duration_since(Instant::now())).is_err() {
            return false;
        }
        while Instant::now() < deadline {
            if self.shared.clients.lock().unwrap().iter().all(|c| c.pending() == 0) {
                return true;
            }
            thread::sleep(Duration::from_millis(1));
        }
        false
    }

    /// Blocks until `n` clients are connected or `timeout` passes.
    pub fn wait_for_clients(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        while Instant::now() < deadline {
            if self.client_count() >= n {
                return true;
            }
            thread::sleep(Duration::from_millis(1));
        }
        self.client_count() >= n
    }

    /// Blocks until `n` connected clients have sent at least one SUBSCRIBE,
    /// or `timeout` passes. Frames a client sent before its first SUBSCRIBE
    /// (commands, say) have been taken in by then.
    pub fn wait_for_subscribers(&self, n: usize, timeout: Duration) -> bool {
        let deadline = Instant::now() + timeout;
        loop {
            if self.shared.subscribers.load(Ordering::SeqCst) >= n {
                return true;
            }
            if Instant::now() >= deadline {
                return false;
            }
            thread::sleep(Duration::from_millis(1));
        }
    }

    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.handoff = None;
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for c in self.shared.clients.lock().unwrap().iter() {
            c.close();
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
    }
}

impl Drop for BridgeServer {
    fn drop(&mut self) {
        self.stop();
    }
}

fn accept_loop(listener: TcpListener, shared: Arc<Shared>, depth: usize) {
    let mut next_id = 0u64;
    let mut workers: Vec<JoinHandle<()>> = Vec::new();
    while !shared.shutdown.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, peer)) => {
                next_id += 1;
                debug!("client {next_id} connected from {peer}");
                if let Err(e) = start_client(stream, next_id, depth, &shared, &mut workers) {
                    warn!("client {next_id} setup failed: {e}");
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(2)),
            Err(e) => {
                warn!("accept failed: {e}");
                thread::sleep(Duration::from_millis(10));
            }
        }
        workers.retain(|w| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

fn start_client(stream: TcpStream, id: u64, depth: usize, shared: &Arc<Shared>, workers: &mut Vec<JoinHandle<()>>) -> std::io::Result<()> {
    stream.set_nonblocking(false)?;
    stream.set_nodelay(true)?;
    let client = Arc::new(Client {
        id,
        subs: Mutex::new(Vec::new()),
        subscribed: AtomicBool::new(false),
        outbox: Mutex::new(Outbox { frames: VecDeque::new(), closed: false }),
        ready: Condvar::new(),
        depth,
    });
    let reader_stream = stream.try_clone()?;
    shared.clients.lock().unwrap().push(client.clone());
    shared.live_clients.fetch_add(1, Ordering::SeqCst);
    {
        let (client, shared) = (client.clone(), shared.clone());
        workers.push(thread::Builder::new().name(format!("bridge-write-{id}")).spawn(move || write_loop(stream, client, shared))?);
    }
    {
        let (client, shared) = (client.clone(), shared.clone());
        workers.push(thread::Builder::new().name(format!("bridge-read-{id}")).spawn(move || read_loop(reader_stream, client, shared))?);
    }
    Ok(())
}

fn read_loop(mut stream: TcpStream, client: Arc<Client>, shared: Arc<Shared>) {
    // Poll so shutdown is noticed even when the peer is silent.
    let _ = stream.set_read_timeout(Some(Duration::from_millis(50)));
    let mut buf: Vec<u8> = Vec::new();
    let mut chunk = [0u8; 8192];
    loop {
        if shared.shutdown.load(Ordering::SeqCst) || client.outbox.lock().unwrap().closed {
            return;
        }
        match stream.read(&mut chunk) {
            Ok(0) => {
                client.close();
                return;
            }
            Ok(n) => buf.extend_from_slice(&chunk[..n]),
            Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut | ErrorKind::Interrupted) => continue,
            Err(_) => {
                client.close();
                return;
            }
        }
        loop {
            match decode_frame(&buf) {
                Ok((frame, used)) => {
                    buf.drain(..used);
                    match frame {
                        Frame::Subscribe { topics } => {
                            client.subs.lock().unwrap().extend(topics);
                            if !client.subscribed.swap(true, Ordering::SeqCst) {
                                shared.subscribers.fetch_add(1, Ordering::SeqCst);
                            }
                        }
                        Frame::Command(cmd) => {
                            shared.counters.commands_received.fetch_add(1, Ordering::Relaxed);
                            shared.inbox.lock().unwrap().push(cmd);
                        }
                        other => {
                            protocol_error(&client, &shared, &format!("clients may not send {} frames", other.kind()));
                            return;
                        }
                    }
                }
                Err(BridgeError::Truncated { .. }) => break,
                Err(e) => {
                    protocol_error(&client, &shared, &e.to_string());
                    return;
                }
            }
        }
    }
}

fn protocol_error(client: &Client, shared: &Shared, message: &str) {
    debug!("client {}: protocol error: {message}", client.id);
    shared.counters.protocol_errors.fetch_add(1, Ordering::Relaxed);
    client.fail(message);
}

fn write_loop(mut stream: TcpStream, client: Arc<Client>, shared: Arc<Shared>) {
    loop {
        let next = {
            let mut o = client.outbox.lock().unwrap();
            while o.frames.is_empty() && !o.closed {
                o = client.ready.wait(o).unwrap();
            }
            o.frames.pop_front()
        };
        match next {
            Some(frame) => {
                if stream.write_all(&frame).is_err() {
                    client.close();
                    break;
                }
            }
            None => break,
        }
    }
    let _ = stream.shutdown(Shutdown::Both);
    shared.clients.lock().unwrap().retain(|c| c.id != client.id);
    shared.live_clients.fetch_sub(1, Ordering::SeqCst);
    if client.subscribed.load(Ordering::SeqCst) {
        shared.subscribers.fetch_sub(1, Ordering::SeqCst);
    }
    debug!("client {} disconnected", client.id);
}

fn dispatch_loop(rx: Receiver<Outgoing>, shared: Arc<Shared>) {
    for item in rx {
        match item {
            Outgoing::Envelope(env) => {
                let frame: Arc<[u8]> = match encode_frame(&Frame::Publish(env.clone())) {
                    Ok(f) => f.into(),
                    Err(e) => {
                        warn!("dropping envelope on {}: {e}", env.topic);
                        continue;
                    }
                };
                let clients = shared.clients.lock().unwrap().clone();
                for c in clients.iter().filter(|c| c.wants(&env.topic)) {
                    c.push(frame.clone(), &shared.counters);
                }
                shared.counters.published.fetch_add(1, Ordering::Relaxed);
            }
            Outgoing::Barrier(ack) => {
                let _ = ack.send(());
            }
        }
    }
}
