//! Pilot input sources: recorded traces, live streams, and log replays.

use std::io::Write;
use std::path::Path;
use std::sync::mpsc::{Receiver, TryRecvError};

use crate::config::fmt_f64;
use crate::error::{Result, TeleopError};
use crate::log::RunLog;
use crate::retarget::ModeState;
use crate::sim::World;
use crate::state::{Mode, PilotInput};

const TRACE_MAGIC: &str = "# teleop-trace 1";

/// Column header of a pilot trace.
pub const TRACE_COLUMNS: [&str; 17] = [
    "t", "theta_h", "thetadot_h", "phi_h", "phidot_h", "m_zh", "q_ah_r0", "q_ah_r1", "q_ah_r2", "q_ah_r3",
    "q_ah_l0", "q_ah_l1", "q_ah_l2", "q_ah_l3", "u_s", "u_y", "u_a",
];

/// What a source hands the loop for one tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PilotEvent {
    Input(PilotInput),
    /// The stream went silent for longer than allowed.
    Gap,
    Stop,
}

/// State a closed-loop pilot may look at before choosing its next input.
pub struct SessionView<'a> {
    pub tick: u64,
    pub t: f64,
    pub world: &'a World,
    pub modes: &'a ModeState,
    /// Committed contact state code (0 none, 1 left, 2 right, 3 both).
    pub contact: u8,
}

pub trait PilotSource {
    fn next(&mut self, view: &SessionView) -> Result<PilotEvent>;
}

/// Time-stamped pilot samples with zero-order hold between rows.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trace {
    pub rows: Vec<PilotInput>,
}

impl Trace {
    /// Sample at time `t`: the last row stamped at or before `t`.
    pub fn at(&self, t: f64) -> PilotInput {
        let idx = self.rows.partition_point(|r| r.timestamp <= t + 1e-9);
        match idx {
            0 => self.rows.first().copied().unwrap_or_default(),
            i => self.rows[i - 1],
        }
    }

    pub fn first(&self) -> PilotInput {
        self.rows.first().copied().unwrap_or_default()
    }

    pub fn write_to<W: Write>(&self, out: W) -> Result<()> {
        let mut out = std::io::BufWriter::new(out);
        writeln!(out, "{TRACE_MAGIC}")?;
        {
            let mut w = csv::Writer::from_writer(&mut out);
            w.write_record(TRACE_COLUMNS)?;
            for r in &self.rows {
                let mut vals = vec![r.timestamp, r.theta_h, r.thetadot_h, r.phi_h, r.phidot_h, r.m_zh];
                vals.extend(r.q_ah.concat());
                vals.extend([r.u_s, r.u_y, r.u_a].map(|m| f64::from(m.as_trigger())));
                w.write_record(vals.iter().map(|v| fmt_f64(*v)))?;
            }
            w.flush()?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.write_to(std::fs::File::create(path)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TeleopError::Scenario(format!("trace {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let bad = |m: String| TeleopError::Scenario(format!("trace: {m}"));
        let body = text
            .strip_prefix(TRACE_MAGIC)
            .ok_or_else(|| bad("missing `# teleop-trace 1` header".into()))?;
        let mut reader = csv::Reader::from_reader(body.trim_start().as_bytes());
        let header: Vec<String> = reader.headers()?.iter().map(str::to_string).collect();
        if header != TRACE_COLUMNS {
            return Err(bad(format!("unexpected columns {header:?}")));
        }
        let mut rows = Vec::new();
        for rec in reader.records() {
            let rec = rec?;
            let v = rec
                .iter()
                .map(|s| s.parse::<f64>().map_err(|_| bad(format!("bad number `{s}`"))))
                .collect::<Result<Vec<_>>>()?;
            let trig = |x: f64| Mode::from_trigger(u8::from(x != 0.0));
            let input = PilotInput {
                timestamp: v[0],
                theta_h: v[1],
                thetadot_h: v[2],
                phi_h: v[3],
                phidot_h: v[4],
                m_zh: v[5],
                q_ah: [[v[6], v[7], v[8], v[9]], [v[10], v[11], v[12], v[13]]],
                u_s: trig(v[14]),
                u_y: trig(v[15]),
                u_a: trig(v[16]),
            };
            if let Some(prev) = rows.last() {
                let prev: &PilotInput = prev;
                if input.timestamp < prev.timestamp {
                    return Err(bad("timestamps must be non-decreasing".into()));
                }
            }
            rows.push(input);
        }
        Ok(Self { rows })
    }
}

/// Replays a trace; every tick sees the exact trace value for its time.
pub struct ScriptedPilot {
    trace: Trace,
}

impl ScriptedPilot {
    pub fn new(trace: Trace) -> Self {
        Self { trace }
    }
}

impl PilotSource for ScriptedPilot {
    fn next(&mut self, view: &SessionView) -> Result<PilotEvent> {
        Ok(PilotEvent::Input(self.trace.at(view.t)))
    }
}

/// Re-issues the inputs recorded in a log, including a recorded stream fault.
pub struct LogPilot {
    inputs: Vec<PilotInput>,
    fault_at: Option<usize>,
}

impl LogPilot {
    pub fn new(log: &RunLog) -> Result<Self> {
        let inputs = (0..log.len()).map(|i| log.input_at(i)).collect::<Result<Vec<_>>>()?;
        let fault_at = log.series("fault")?.iter().position(|v| *v != 0.0);
        Ok(Self { inputs, fault_at })
    }

    pub fn first(&self) -> PilotInput {
        self.inputs.first().copied().unwrap_or_default()
    }
}

impl PilotSource for LogPilot {
    fn next(&mut self, view: &SessionView) -> Result<PilotEvent> {
        let i = view.tick as usize;
        if Some(i) == self.fault_at {
            return Ok(PilotEvent::Gap);
        }
        Ok(self.inputs.get(i).map_or(PilotEvent::Stop, |u| PilotEvent::Input(*u)))
    }
}

/// Messages a live bridge pushes into the loop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LiveEvent {
    Input(PilotInput),
    Stop,
}

/// First-order low-pass, `y += a·(u − y)` with `a = dt / (dt + 1/(2π·fc))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LowPass {
    pub a: f64,
    pub y: Option<f64>,
}

impl LowPass {
    pub fn new(cutoff_hz: f64, dt: f64) -> Self {
        let tau = 1.0 / (2.0 * std::f64::consts::PI * cutoff_hz);
        Self { a: dt / (dt + tau), y: None }
    }

    pub fn update(&mut self, u: f64) -> f64 {
        let y = match self.y {
            None => u,
            Some(y) => y + self.a * (u - y),
        };
        self.y = Some(y);
        y
    }
}

/// Live stream: latest message wins, held between messages; gaps are
/// measured in loop time.
pub struct LivePilot {
    rx: Receiver<LiveEvent>,
    last: Option<PilotInput>,
    last_tick: u64,
    gap_ticks: u64,
    filters: [LowPass; 2],
}

impl LivePilot {
    pub fn new(rx: Receiver<LiveEvent>, gap_limit: f64, cutoff_hz: f64, control_dt: f64) -> Self {
        Self {
            rx,
            last: None,
            last_tick: 0,
            gap_ticks: (gap_limit / control_dt).round() as u64,
            filters: [LowPass::new(cutoff_hz, control_dt); 2],
        }
    }
}

impl PilotSource for LivePilot {
    fn next(&mut self, view: &SessionView) -> Result<PilotEvent> {
        let mut fresh = None;
        loop {
            match self.rx.try_recv() {
                Ok(LiveEvent::Input(u)) => fresh = Some(u),
                Ok(LiveEvent::Stop) => return Ok(PilotEvent::Stop),
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => {
                    if fresh.is_none() && self.last.is_none() {
                        return Ok(PilotEvent::Gap);
                    }
                    break;
                }
            }
        }
        if let Some(u) = fresh {
            self.last_tick = view.tick;
            self.last = Some(u);
        }
        // Before the first message the gap clock runs from tick 0.
        if view.tick.saturating_sub(self.last_tick) > self.gap_ticks {
            return Ok(PilotEvent::Gap);
        }
        let mut u = self.last.unwrap_or_default();
        u.thetadot_h = self.filters[0].update(u.thetadot_h);
        u.phidot_h = self.filters[1].update(u.phidot_h);
        Ok(PilotEvent::Input(u))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trace_round_trips_exactly() {
        let rows = (0..50)
            .map(|k| PilotInput {
                timestamp: k as f64 * 0.005,
                theta_h: (k as f64 * 0.37).sin() * 0.1,
                q_ah: [[0.1 * k as f64, 1.0 / 3.0, 0.0, 2.0], [0.0; 4]],
                u_a: Mode::from_trigger((k % 2) as u8),
                ..Default::default()
            })
            .collect();
        let trace = Trace { rows };
        let mut buf = Vec::new();
        trace.write_to(&mut buf).unwrap();
        let back = Trace::parse(std::str::from_utf8(&buf).unwrap()).unwrap();
        assert_eq!(back, trace);
    }

    #[test]
    fn trace_holds_last_sample() {
        let trace = Trace {
            rows: vec![
                PilotInput {
                    timestamp: 0.0,
                    theta_h: 1.0,
                    ..Default::default()
                },
                PilotInput {
                    timestamp: 0.1,
                    theta_h: 2.0,
                    ..Default::default()
                },
            ],
        };
        assert_eq!(trace.at(0.05).theta_h, 1.0);
        assert_eq!(trace.at(0.1).theta_h, 2.0);
        assert_eq!(trace.at(9.0).theta_h, 2.0);
    }

    #[test]
    fn low_pass_settles_and_attenuates() {
        let mut f = LowPass::new(10.0, 0.005);
        f.update(0.0);
        let mut y = 0.0;
        for _ in 0..200 {
            y = f.update(1.0);
        }
        assert!((y - 1.0).abs() < 1e-9);
        assert!(f.a > 0.0 && f.a < 1.0);
    }
}
