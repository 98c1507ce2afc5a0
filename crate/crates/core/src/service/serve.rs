//! TCP bridge for a live console. Network reads and writes run on their own
//! threads and talk to the paced loop only through channels, so the loop
//! never waits on the socket.

use std::net::{TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use super::pilot::{LiveEvent, LivePilot, PilotEvent, PilotSource};
use super::session::Session;
use super::wire::{read_frame, write_frame, Body, Control, Frame, ReadOutcome, Telemetry};
use crate::config::Config;
use crate::error::{Result, TeleopError};
use crate::log::RunLog;
use crate::sim::Scenario;
use crate::state::PilotInput;

#[derive(Debug, Clone)]
pub struct ServeOptions {
    pub cfg: Config,
    /// `Start { scenario }` loads `<scenario_dir>/<scenario>.toml`.
    pub scenario_dir: PathBuf,
    pub session_id: u64,
    /// Telemetry goes out every this many ticks; haptics every tick.
    pub telemetry_every: u64,
    /// How long to wait for `Start` before giving up.
    pub start_timeout: Duration,
}

impl ServeOptions {
    pub fn new(cfg: Config, scenario_dir: PathBuf) -> Self {
        let telemetry_every = cfg.sim.telemetry_rate_divisor().max(1);
        Self {
            cfg,
            scenario_dir,
            session_id: 1,
            telemetry_every,
            start_timeout: Duration::from_secs(30),
        }
    }
}

#[derive(Debug)]
pub struct ServeReport {
    /// Frames rejected by the bridge (undecodable, wrong direction, or late
    /// toggles).
    pub malformed: u64,
    pub log: RunLog,
    /// Wall-clock start of every tick relative to the first, s.
    pub tick_starts: Vec<f64>,
}

impl ServeReport {
    /// Loop period percentile in seconds.
    pub fn period_percentile(&self, p: f64) -> f64 {
        let mut d: Vec<f64> = self.tick_starts.windows(2).map(|w| w[1] - w[0]).collect();
        if d.is_empty() {
            return 0.0;
        }
        d.sort_by(f64::total_cmp);
        let i = ((p / 100.0) * (d.len() - 1) as f64).round() as usize;
        d[i.min(d.len() - 1)]
    }
}

/// Accept one console connection and run one session for it.
pub fn serve(listener: &TcpListener, opts: &ServeOptions) -> Result<ServeReport> {
    let (stream, _) = listener.accept()?;
    serve_connection(stream, opts)
}

fn spawn_reader(
    mut stream: TcpStream,
    inputs: Sender<LiveEvent>,
    controls: Sender<Control>,
    malformed: Arc<AtomicU64>,
) -> thread::JoinHandle<()> {
    thread::spawn(move || loop {
        match read_frame(&mut stream) {
            Ok(ReadOutcome::Frame(f)) => match f.body {
                Body::PilotInput(u) => {
                    let _ = inputs.send(LiveEvent::Input(u));
                }
                Body::Control(Control::Stop) => {
                    let _ = inputs.send(LiveEvent::Stop);
                    let _ = controls.send(Control::Stop);
                }
                Body::Control(c) => {
                    let _ = controls.send(c);
                }
                Body::Telemetry(_) | Body::Haptic(_) => {
                    malformed.fetch_add(1, Ordering::Relaxed);
                }
            },
            Ok(ReadOutcome::Malformed(_)) => {
                malformed.fetch_add(1, Ordering::Relaxed);
            }
            Ok(ReadOutcome::Eof) => break,
            Err(_) => {
                malformed.fetch_add(1, Ordering::Relaxed);
                break;
            }
        }
    })
}

fn spawn_writer(mut stream: TcpStream, frames: Receiver<Frame>) -> thread::JoinHandle<()> {
    thread::spawn(move || {
        for f in frames {
            if write_frame(&mut stream, &f).is_err() {
                break;
            }
        }
    })
}

/// Wait for `Start`, applying feedback toggles that arrive before it.
fn await_start(controls: &Receiver<Control>, opts: &ServeOptions, cfg: &mut Config, malformed: &AtomicU64) -> Result<Scenario> {
    let deadline = Instant::now() + opts.start_timeout;
    loop {
        let left = deadline.saturating_duration_since(Instant::now());
        match controls.recv_timeout(left) {
            Ok(Control::Start { scenario }) => {
                let ok = !scenario.is_empty() && scenario.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
                let path = opts.scenario_dir.join(format!("{scenario}.toml"));
                match ok.then(|| Scenario::load(&path)) {
                    Some(Ok(s)) => return Ok(s),
                    _ => {
                        malformed.fetch_add(1, Ordering::Relaxed);
                    }
                }
            }
            Ok(Control::Feedback {
                contact_force,
                moment_fb,
                ff_moment,
            }) => {
                cfg.feedback.enable_contact_force = contact_force;
                cfg.feedback.enable_moment_fb = moment_fb;
                cfg.feedback.enable_ff_moment = ff_moment;
            }
            Ok(Control::Stop) => return Err(TeleopError::Wire("stopped before start".into())),
            Err(RecvTimeoutError::Timeout) => return Err(TeleopError::Wire("no start message".into())),
            Err(RecvTimeoutError::Disconnected) => return Err(TeleopError::Wire("console disconnected before start".into())),
        }
    }
}

/// Run one session over an accepted connection.
pub fn serve_connection(stream: TcpStream, opts: &ServeOptions) -> Result<ServeReport> {
    stream.set_nodelay(true)?;
    let malformed = Arc::new(AtomicU64::new(0));
    let (input_tx, input_rx) = mpsc::channel();
    let (control_tx, control_rx) = mpsc::channel();
    let (frame_tx, frame_rx) = mpsc::channel();
    let reader = spawn_reader(stream.try_clone()?, input_tx, control_tx, malformed.clone());
    let writer = spawn_writer(stream.try_clone()?, frame_rx);

    let mut cfg = opts.cfg.clone();
    let scenario = await_start(&control_rx, opts, &mut cfg, &malformed)?;
    let sim = cfg.sim;
    let mut pilot = LivePilot::new(input_rx, sim.stream_gap_limit, sim.rate_filter_cutoff, sim.control_dt);
    let mut session = Session::new(&scenario, &cfg, &PilotInput::default())?;
    let (has_box, has_object) = (session.world.box_world.is_some(), session.world.object.is_some());
    let period = Duration::from_secs_f64(sim.control_dt);
    let start = Instant::now();
    let mut tick_starts = Vec::new();

    while !session.done() {
        let due = start + period * session.tick as u32;
        let now = Instant::now();
        if due > now {
            thread::sleep(due - now);
        }
        tick_starts.push(start.elapsed().as_secs_f64());
        // Toggles after start would change the run without reaching the
        // logged config, so they are refused.
        while let Ok(c) = control_rx.try_recv() {
            if !matches!(c, Control::Stop) {
                malformed.fetch_add(1, Ordering::Relaxed);
            }
        }
        let record = match pilot.next(&session.view())? {
            PilotEvent::Input(u) => session.step(u)?,
            PilotEvent::Gap => session.safe_stop()?,
            PilotEvent::Stop => break,
        };
        let frame = |body| Frame {
            session: opts.session_id,
            tick: record.tick,
            body,
        };
        let _ = frame_tx.send(frame(Body::Haptic(record.haptics)));
        if record.tick % opts.telemetry_every == 0 || record.fault || session.done() {
            let _ = frame_tx.send(frame(Body::Telemetry(Telemetry::from_record(&record, has_box, has_object))));
        }
    }
    drop(frame_tx);
    let _ = writer.join();
    // Unblock the reader, which may be waiting on the socket.
    let _ = stream.shutdown(std::net::Shutdown::Both);
    let _ = reader.join();
    Ok(ServeReport {
        malformed: malformed.load(Ordering::Relaxed),
        log: session.log,
        tick_starts,
    })
}
