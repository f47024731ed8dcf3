use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::{Arc, Condvar, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use tungstenite::Message;

use super::{ClientCommand, ClientQueue, Reply, ServiceError, Session, DEFAULT_QUEUE_CAP};
use crate::sim::RunReport;

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub addr: String,
    /// Wall-clock time per tick.
    pub tick: Duration,
    pub queue_cap: usize,
    /// Where to write run artifacts once the run ends.
    pub out: Option<PathBuf>,
    /// Start paused, waiting for `resume` or `step`.
    pub paused: bool,
}

impl Default for ServeConfig {
    fn default() -> Self {
        ServeConfig {
            addr: "127.0.0.1:7878".into(),
            tick: Duration::from_millis(100),
            queue_cap: DEFAULT_QUEUE_CAP,
            out: None,
            paused: false,
        }
    }
}

struct Client {
    id: u64,
    queue: Mutex<ClientQueue>,
    ready: Condvar,
    closed: AtomicBool,
    subscribed: AtomicBool,
}

impl Client {
    fn send(&self, f: impl FnOnce(&mut ClientQueue)) {
        f(&mut self.queue.lock().expect("queue lock"));
        self.ready.notify_all();
    }

    fn close(&self) {
        self.closed.store(true, Ordering::SeqCst);
        self.ready.notify_all();
    }

    fn is_closed(&self) -> bool {
        self.closed.load(Ordering::SeqCst)
    }
}

type Clients = Arc<Mutex<Vec<Arc<Client>>>>;
type Inbound = (u64, Result<ClientCommand, String>);

pub struct ServerHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    tick_loop: JoinHandle<Result<RunReport, ServiceError>>,
    acceptor: JoinHandle<()>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Stops the server and returns the run so far.
    pub fn shutdown(self) -> Result<RunReport, ServiceError> {
        self.stop.store(true, Ordering::SeqCst);
        self.wait()
    }

    /// Blocks until the server stops.
    pub fn wait(self) -> Result<RunReport, ServiceError> {
        let r = self.tick_loop.join().expect("tick loop panicked");
        self.stop.store(true, Ordering::SeqCst);
        let _ = self.acceptor.join();
        r
    }
}

/// Binds `cfg.addr` and serves `session` until shut down.
pub fn start(mut session: Session, cfg: ServeConfig) -> Result<ServerHandle, ServiceError> {
    let listener = TcpListener::bind(&cfg.addr).map_err(|source| ServiceError::Bind {
        addr: cfg.addr.clone(),
        source,
    })?;
    listener.set_nonblocking(true)?;
    let addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let clients: Clients = Arc::default();
    let (tx, rx) = mpsc::channel::<Inbound>();
    if cfg.paused {
        session.apply(&ClientCommand::Pause)?;
    }

    let acceptor = {
        let stop = stop.clone();
        let clients = clients.clone();
        let cap = cfg.queue_cap;
        thread::spawn(move || accept_loop(listener, stop, clients, tx, cap))
    };
    let tick_loop = {
        let stop = stop.clone();
        thread::spawn(move || tick_loop(session, cfg, stop, clients, rx))
    };
    Ok(ServerHandle {
        addr,
        stop,
        tick_loop,
        acceptor,
    })
}

fn accept_loop(
    listener: TcpListener,
    stop: Arc<AtomicBool>,
    clients: Clients,
    tx: Sender<Inbound>,
    cap: usize,
) {
    let mut next_id = 0;
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                next_id += 1;
                let client = Arc::new(Client {
                    id: next_id,
                    queue: Mutex::new(ClientQueue::new(cap)),
                    ready: Condvar::new(),
                    closed: AtomicBool::new(false),
                    subscribed: AtomicBool::new(false),
                });
                clients.lock().expect("clients lock").push(client.clone());
                let tx = tx.clone();
                let stop = stop.clone();
                thread::spawn(move || serve_client(stream, client, tx, stop));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(_) => thread::sleep(Duration::from_millis(5)),
        }
    }
    for c in clients.lock().expect("clients lock").iter() {
        c.close();
    }
}

fn serve_client(stream: TcpStream, client: Arc<Client>, tx: Sender<Inbound>, stop: Arc<AtomicBool>) {
    let _ = stream.set_nonblocking(false);
    let mut head = [0u8; 4];
    let is_ws = matches!(stream.peek(&mut head), Ok(4) if &head == b"GET ");
    if is_ws {
        serve_ws(stream, &client, &tx, &stop);
    } else {
        serve_ndjson(stream, &client, &tx);
    }
    client.close();
}

fn serve_ndjson(stream: TcpStream, client: &Arc<Client>, tx: &Sender<Inbound>) {
    let Ok(read_half) = stream.try_clone() else { return };
    let reader = {
        let client = client.clone();
        let tx = tx.clone();
        thread::spawn(move || {
            let mut r = BufReader::new(read_half);
            let mut buf = Vec::new();
            loop {
                buf.clear();
                match r.read_until(b'\n', &mut buf) {
                    Ok(0) | Err(_) => break,
                    Ok(_) => {
                        let line = String::from_utf8_lossy(&buf);
                        let line = line.trim();
                        if !line.is_empty() && tx.send((client.id, ClientCommand::parse(line))).is_err() {
                            break;
                        }
                    }
                }
            }
            client.close();
        })
    };
    let mut w = stream;
    loop {
        let lines = {
            let mut q = client.queue.lock().expect("queue lock");
            while q.is_empty() && !client.is_closed() {
                q = client.ready.wait(q).expect("queue lock");
            }
            q.drain()
        };
        if lines.is_empty() && client.is_closed() {
            break;
        }
        let mut out = String::new();
        for l in lines {
            out.push_str(&l);
            out.push('\n');
        }
        if w.write_all(out.as_bytes()).and_then(|_| w.flush()).is_err() {
            break;
        }
    }
    let _ = w.shutdown(std::net::Shutdown::Both);
    let _ = reader.join();
}

fn serve_ws(stream: TcpStream, client: &Arc<Client>, tx: &Sender<Inbound>, stop: &AtomicBool) {
    let Ok(mut ws) = tungstenite::accept(stream) else {
        return;
    };
    let _ = ws.get_ref().set_read_timeout(Some(Duration::from_millis(10)));
    while !client.is_closed() && !stop.load(Ordering::SeqCst) {
        match ws.read() {
            Ok(Message::Text(t)) => {
                let _ = tx.send((client.id, ClientCommand::parse(t.as_str())));
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
        let lines = client.queue.lock().expect("queue lock").drain();
        for l in lines {
            if ws.send(Message::Text(l)).is_err() {
                return;
            }
        }
    }
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn tick_loop(
    mut session: Session,
    cfg: ServeConfig,
    stop: Arc<AtomicBool>,
    clients: Clients,
    rx: Receiver<Inbound>,
) -> Result<RunReport, ServiceError> {
    // envelopes already pushed to live subscribers
    let mut sent = 0usize;
    let mut next_tick = Instant::now() + cfg.tick;
    let mut written = false;
    while !stop.load(Ordering::SeqCst) {
        let wait = next_tick.saturating_duration_since(Instant::now());
        match rx.recv_timeout(wait.min(Duration::from_millis(20))) {
            Ok((id, cmd)) => {
                let Some(client) = find(&clients, id) else {
                    continue;
                };
                match cmd {
                    Err(msg) => client.send(|q| q.push_reply(&Reply::Error { msg })),
                    Ok(ClientCommand::Subscribe { from }) => {
                        let log = session.log();
                        let from = (from as usize).min(sent);
                        client.send(|q| {
                            for e in &log[from..sent] {
                                q.push_envelope(e);
                            }
                        });
                        client.subscribed.store(true, Ordering::SeqCst);
                    }
                    Ok(cmd) => {
                        let reply = session.apply(&cmd)?;
                        if let Reply::Reset { .. } = reply {
                            sent = 0;
                            written = false;
                            for c in live(&clients) {
                                c.send(|q| q.push_reply(&reply));
                            }
                        } else {
                            client.send(|q| q.push_reply(&reply));
                        }
                    }
                }
            }
            Err(RecvTimeoutError::Timeout) => {}
            Err(RecvTimeoutError::Disconnected) => thread::sleep(wait.min(Duration::from_millis(20))),
        }
        if Instant::now() >= next_tick {
            next_tick += cfg.tick;
            if session.outcome().is_none() {
                session.tick()?;
            }
        }
        sent = broadcast(&session, &clients, sent);
        if session.outcome().is_some() && !written {
            written = true;
            let status = session.status();
            for c in live(&clients) {
                c.send(|q| q.push_reply(&status));
            }
            if let Some(dir) = &cfg.out {
                session.report().write_dir(dir)?;
            }
        }
    }
    Ok(session.report())
}

fn find(clients: &Clients, id: u64) -> Option<Arc<Client>> {
    clients
        .lock()
        .expect("clients lock")
        .iter()
        .find(|c| c.id == id)
        .cloned()
}

/// Subscribed clients, pruning closed ones.
fn live(clients: &Clients) -> Vec<Arc<Client>> {
    let mut all = clients.lock().expect("clients lock");
    all.retain(|c| !c.is_closed());
    all.iter()
        .filter(|c| c.subscribed.load(Ordering::SeqCst))
        .cloned()
        .collect()
}

fn broadcast(session: &Session, clients: &Clients, sent: usize) -> usize {
    let log = session.log();
    if log.len() > sent {
        for c in live(clients) {
            c.send(|q| {
                for e in &log[sent..] {
                    q.push_envelope(e);
                }
            });
        }
    }
    log.len()
}
