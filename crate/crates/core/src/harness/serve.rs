//! Live operator sessions over a local socket. Frames are a 4-byte
//! big-endian length followed by one JSON message. One operator at a time;
//! a dropped connection pauses the episode until a client resumes it.

use std::collections::VecDeque;
use std::fs::File;
use std::io::{self, BufWriter, ErrorKind, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::controller::ControllerTelemetry;
use crate::error::{Error, Result};
use crate::sim::log::{write_log, EpisodeMetrics, LogRecord};
use crate::sim::protocol::{CommandMessage, HumanCommand};
use crate::sim::world::{Action, SubTask, WorldState};
use crate::sim::{generate_scenario, Condition, EpisodeSetup, ScenarioParams, Session};
use crate::trust::TrustTelemetry;

pub const MAX_FRAME: usize = 16 << 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    SubmitCommand { seq: u64, command: HumanCommand },
    MoveHuman { seq: u64, x: i32, y: i32 },
    DoSubtask { seq: u64, task: Option<SubTask> },
    StartEpisode {
        seq: u64,
        #[serde(default)]
        seed: Option<u64>,
    },
    Pause { seq: u64 },
}

impl ClientMessage {
    pub fn seq(&self) -> u64 {
        match *self {
            ClientMessage::SubmitCommand { seq, .. }
            | ClientMessage::MoveHuman { seq, .. }
            | ClientMessage::DoSubtask { seq, .. }
            | ClientMessage::StartEpisode { seq, .. }
            | ClientMessage::Pause { seq } => seq,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    WorldSnapshot {
        seq: u64,
        paused: bool,
        finished: bool,
        world: Option<Box<WorldState>>,
    },
    RobotReply {
        seq: u64,
        /// Client sequence number of the command answered; none for unprompted messages.
        in_reply_to: Option<u64>,
        messages: Vec<CommandMessage>,
    },
    TrustTelemetry {
        seq: u64,
        trust: Vec<TrustTelemetry>,
        controller: Vec<ControllerTelemetry>,
    },
    EpisodeResult { seq: u64, metrics: EpisodeMetrics },
    Error { seq: u64, message: String },
}

impl ServerMessage {
    pub fn seq(&self) -> u64 {
        match *self {
            ServerMessage::WorldSnapshot { seq, .. }
            | ServerMessage::RobotReply { seq, .. }
            | ServerMessage::TrustTelemetry { seq, .. }
            | ServerMessage::EpisodeResult { seq, .. }
            | ServerMessage::Error { seq, .. } => seq,
        }
    }
}

pub fn write_frame<T: Serialize>(mut w: impl Write, msg: &T) -> Result<()> {
    let body = serde_json::to_vec(msg).map_err(|e| Error::Protocol(e.to_string()))?;
    if body.len() > MAX_FRAME {
        return Err(Error::Protocol("frame too large".into()));
    }
    w.write_all(&(body.len() as u32).to_be_bytes())?;
    w.write_all(&body)?;
    w.flush()?;
    Ok(())
}

/// Reads one blocking frame.
pub fn read_frame<T: for<'de> Deserialize<'de>>(mut r: impl Read) -> Result<T> {
    let mut len = [0u8; 4];
    r.read_exact(&mut len)?;
    let len = u32::from_be_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(Error::Protocol(format!("frame of {len} bytes exceeds the limit")));
    }
    let mut body = vec![0u8; len];
    r.read_exact(&mut body)?;
    serde_json::from_slice(&body).map_err(|e| Error::Protocol(e.to_string()))
}

/// Splits complete frames off the front of `buf`.
fn take_frames(buf: &mut Vec<u8>) -> Result<Vec<Vec<u8>>> {
    let mut out = Vec::new();
    loop {
        if buf.len() < 4 {
            return Ok(out);
        }
        let len = u32::from_be_bytes([buf[0], buf[1], buf[2], buf[3]]) as usize;
        if len > MAX_FRAME {
            return Err(Error::Protocol(format!("frame of {len} bytes exceeds the limit")));
        }
        if buf.len() < 4 + len {
            return Ok(out);
        }
        out.push(buf[4..4 + len].to_vec());
        buf.drain(..4 + len);
    }
}

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub host: String,
    pub port: u16,
    pub tick: Duration,
    pub condition: Condition,
    pub seed: u64,
    pub scenario: ScenarioParams,
    pub setup: EpisodeSetup,
    /// Episode logs are written here, one file per episode.
    pub log_dir: Option<PathBuf>,
    /// Stop after this many finished episodes.
    pub max_episodes: Option<usize>,
}

struct Client {
    stream: TcpStream,
    buf: Vec<u8>,
    last_seq: Option<u64>,
}

struct Server {
    opts: ServeOptions,
    session: Option<Session>,
    paused: bool,
    queue: VecDeque<(u64, HumanCommand)>,
    human_move: Option<Action>,
    seq: u64,
    episodes: usize,
    log: Option<BufWriter<File>>,
    written: usize,
}

impl Server {
    fn next_seq(&mut self) -> u64 {
        self.seq += 1;
        self.seq
    }

    fn send(&mut self, client: &mut Option<Client>, msg: impl FnOnce(u64) -> ServerMessage) {
        let m = msg(self.next_seq());
        if let Some(c) = client.as_mut() {
            if write_frame(&mut c.stream, &m).is_err() {
                *client = None;
                self.paused = true;
            }
        }
    }

    fn snapshot(&mut self, client: &mut Option<Client>) {
        let world = self.session.as_ref().map(|s| Box::new(s.world().clone()));
        let finished = self.session.as_ref().is_some_and(|s| s.is_finished());
        let paused = self.paused;
        self.send(client, |seq| ServerMessage::WorldSnapshot {
            seq,
            paused,
            finished,
            world,
        });
    }

    fn flush_log(&mut self) -> Result<()> {
        if let (Some(s), Some(w)) = (self.session.as_ref(), self.log.as_mut()) {
            write_log(&mut *w, &s.log()[self.written..])?;
            w.flush()?;
            self.written = s.log().len();
        }
        Ok(())
    }

    fn start(&mut self, seed: Option<u64>) -> Result<()> {
        if self.session.as_ref().is_some_and(|s| !s.is_finished()) {
            self.paused = false;
            return Ok(());
        }
        let seed = seed.unwrap_or(self.opts.seed.wrapping_add(self.episodes as u64));
        let scenario = generate_scenario(seed, &self.opts.scenario)?;
        let mut s = Session::new(scenario, self.opts.condition, self.opts.setup.clone(), seed)?;
        s.greedy_human = false;
        self.log = match &self.opts.log_dir {
            Some(dir) => {
                std::fs::create_dir_all(dir)?;
                let path = dir.join(format!("episode-{seed}-{}.jsonl", self.episodes));
                Some(BufWriter::new(File::create(path)?))
            }
            None => None,
        };
        self.written = 0;
        self.session = Some(s);
        self.queue.clear();
        self.human_move = None;
        self.paused = false;
        Ok(())
    }

    fn handle(&mut self, client: &mut Option<Client>, frame: &[u8]) {
        let msg: ClientMessage = match serde_json::from_slice(frame) {
            Ok(m) => m,
            Err(e) => {
                let message = format!("protocol error: {e}");
                self.send(client, |seq| ServerMessage::Error { seq, message });
                return;
            }
        };
        let seq = msg.seq();
        if let Some(c) = client.as_mut() {
            if c.last_seq.is_some_and(|l| seq <= l) {
                let message = format!("stale sequence number {seq}");
                self.send(client, |seq| ServerMessage::Error { seq, message });
                return;
            }
            c.last_seq = Some(seq);
        }
        let result = match msg {
            ClientMessage::StartEpisode { seed, .. } => self.start(seed),
            ClientMessage::Pause { .. } => {
                self.paused = true;
                Ok(())
            }
            _ if self.session.is_none() => Err(Error::Protocol("no episode running".into())),
            ClientMessage::SubmitCommand { command, .. } => {
                self.queue.push_back((seq, command));
                Ok(())
            }
            ClientMessage::MoveHuman { x, y, .. } => {
                self.human_move = Some(Action::MoveTo { x, y });
                Ok(())
            }
            ClientMessage::DoSubtask { task, .. } => {
                if let Some(s) = self.session.as_mut() {
                    s.set_human_task(task);
                }
                Ok(())
            }
        };
        match result {
            Ok(()) => self.snapshot(client),
            Err(e) => {
                let message = e.to_string();
                self.send(client, |seq| ServerMessage::Error { seq, message });
            }
        }
    }

    /// One simulation tick: drain queued commands, step, publish.
    fn step(&mut self, client: &mut Option<Client>) -> Result<()> {
        let Some(mut s) = self.session.take() else {
            return Ok(());
        };
        while let Some((cseq, cmd)) = self.queue.pop_front() {
            match s.submit(cmd) {
                Ok(messages) => self.send(client, |seq| ServerMessage::RobotReply {
                    seq,
                    in_reply_to: Some(cseq),
                    messages,
                }),
                Err(e) => {
                    let message = e.to_string();
                    self.send(client, |seq| ServerMessage::Error { seq, message });
                }
            }
        }
        let shared = s.share_critical_states()?;
        if !shared.is_empty() {
            self.send(client, |seq| ServerMessage::RobotReply {
                seq,
                in_reply_to: None,
                messages: shared,
            });
        }
        let before = s.log().len();
        let human = self.human_move.take();
        let out = match s.tick(human) {
            Ok(o) => o,
            // an illegal human move is reported and the tick retried without it
            Err(Error::RuleViolation(m)) => {
                let message = format!("rule violation: {m}");
                self.send(client, |seq| ServerMessage::Error { seq, message });
                s.tick(None)?
            }
            Err(e) => return Err(e),
        };
        if out.windows_closed > 0 {
            let (mut trust, mut controller) = (Vec::new(), Vec::new());
            for r in &s.log()[before..] {
                match r {
                    LogRecord::Trust(t) => trust.push(t.clone()),
                    LogRecord::Controller(c) => controller.push(c.clone()),
                    _ => {}
                }
            }
            self.send(client, |seq| ServerMessage::TrustTelemetry { seq, trust, controller });
        }
        let finished = out.finished;
        let metrics = s.metrics();
        self.session = Some(s);
        self.flush_log()?;
        self.snapshot(client);
        if finished {
            self.episodes += 1;
            self.send(client, |seq| ServerMessage::EpisodeResult { seq, metrics });
        }
        Ok(())
    }
}

/// Binds the port, then serves until `max_episodes` episodes have finished.
pub fn serve(opts: ServeOptions) -> Result<()> {
    let listener = TcpListener::bind((opts.host.as_str(), opts.port)).map_err(|e| {
        Error::Io(io::Error::new(e.kind(), format!("cannot bind {}:{}: {e}", opts.host, opts.port)))
    })?;
    serve_on(listener, opts)
}

/// Serves on an already bound listener.
pub fn serve_on(listener: TcpListener, opts: ServeOptions) -> Result<()> {
    listener.set_nonblocking(true)?;
    let tick = opts.tick;
    let mut server = Server {
        opts,
        session: None,
        paused: true,
        queue: VecDeque::new(),
        human_move: None,
        seq: 0,
        episodes: 0,
        log: None,
        written: 0,
    };
    let mut client: Option<Client> = None;
    let mut last_tick = Instant::now();
    loop {
        match listener.accept() {
            Ok((mut stream, _)) => {
                if client.is_some() {
                    let seq = server.next_seq();
                    let _ = write_frame(
                        &mut stream,
                        &ServerMessage::Error {
                            seq,
                            message: "single-operator session".into(),
                        },
                    );
                } else {
                    stream.set_nonblocking(false)?;
                    stream.set_read_timeout(Some(Duration::from_millis(1)))?;
                    stream.set_nodelay(true)?;
                    client = Some(Client {
                        stream,
                        buf: Vec::new(),
                        last_seq: None,
                    });
                    server.snapshot(&mut client);
                }
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => {}
            Err(e) => return Err(e.into()),
        }
        if let Some(c) = client.as_mut() {
            let mut chunk = [0u8; 4096];
            let mut gone = false;
            loop {
                match c.stream.read(&mut chunk) {
                    Ok(0) => {
                        gone = true;
                        break;
                    }
                    Ok(n) => c.buf.extend_from_slice(&chunk[..n]),
                    Err(e) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => break,
                    Err(e) if e.kind() == ErrorKind::Interrupted => {}
                    Err(_) => {
                        gone = true;
                        break;
                    }
                }
            }
            let frames = take_frames(&mut c.buf);
            if gone {
                client = None;
                server.paused = true;
                server.flush_log()?;
            }
            match frames {
                Ok(frames) => {
                    for f in frames {
                        server.handle(&mut client, &f);
                    }
                }
                Err(e) => {
                    let message = e.to_string();
                    server.send(&mut client, |seq| ServerMessage::Error { seq, message });
                    client = None;
                    server.paused = true;
                }
            }
        }
        let running = server.session.as_ref().is_some_and(|s| !s.is_finished());
        if running && !server.paused && last_tick.elapsed() >= tick {
            last_tick = Instant::now();
            server.step(&mut client)?;
        }
        if server.opts.max_episodes.is_some_and(|m| server.episodes >= m) {
            server.flush_log()?;
            return Ok(());
        }
        std::thread::sleep(Duration::from_millis(1));
    }
}
