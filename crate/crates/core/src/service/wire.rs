//! Binary wire protocol between the loop and a live console.
//!
//! A frame is `u32 len | u8 version | u8 kind | u64 session | u64 tick |
//! payload`, all little-endian, where `len` counts every byte after itself.
//! Payload fields follow the per-kind tables below in order; the same tables
//! generate the JSON schema document, so the two cannot drift apart.

use std::io::{ErrorKind, Read, Write};

use serde_json::{json, Value};

use crate::error::{Result, TeleopError};
use crate::haptics::{FeedbackComponents, HapticFeedback, HapticSaturation};
use crate::log::TickRecord;
use crate::state::{Mode, PilotInput};

pub const WIRE_VERSION: u8 = 1;
/// Bytes after the length prefix that precede the payload.
pub const HEADER_LEN: usize = 18;
/// Frames longer than this are rejected without being read.
pub const MAX_FRAME: usize = 64 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ty {
    F64,
    U8,
    /// `u32` byte length followed by UTF-8.
    Str,
}

impl Ty {
    fn name(self) -> &'static str {
        match self {
            Ty::F64 => "f64",
            Ty::U8 => "u8",
            Ty::Str => "str",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Kind {
    PilotInput = 1,
    Telemetry = 2,
    Haptic = 3,
    Control = 4,
}

impl Kind {
    pub const ALL: [Kind; 4] = [Kind::PilotInput, Kind::Telemetry, Kind::Haptic, Kind::Control];

    fn from_u8(v: u8) -> Option<Kind> {
        Kind::ALL.into_iter().find(|k| *k as u8 == v)
    }

    fn name(self) -> &'static str {
        match self {
            Kind::PilotInput => "pilot_input",
            Kind::Telemetry => "telemetry",
            Kind::Haptic => "haptic",
            Kind::Control => "control",
        }
    }

    pub fn fields(self) -> &'static [(&'static str, Ty)] {
        match self {
            Kind::PilotInput => PILOT_FIELDS,
            Kind::Telemetry => TELEMETRY_FIELDS,
            Kind::Haptic => HAPTIC_FIELDS,
            Kind::Control => CONTROL_FIELDS,
        }
    }
}

use Ty::{Str, F64, U8};

const PILOT_FIELDS: &[(&str, Ty)] = &[
    ("timestamp", F64),
    ("theta_h", F64),
    ("thetadot_h", F64),
    ("phi_h", F64),
    ("phidot_h", F64),
    ("m_zh", F64),
    ("q_ah_r0", F64),
    ("q_ah_r1", F64),
    ("q_ah_r2", F64),
    ("q_ah_r3", F64),
    ("q_ah_l0", F64),
    ("q_ah_l1", F64),
    ("q_ah_l2", F64),
    ("q_ah_l3", F64),
    ("u_s", U8),
    ("u_y", U8),
    ("u_a", U8),
];

const TELEMETRY_FIELDS: &[(&str, Ty)] = &[
    ("t", F64),
    ("x", F64),
    ("xdot", F64),
    ("theta", F64),
    ("thetadot", F64),
    ("phi", F64),
    ("phidot", F64),
    ("base_x", F64),
    ("base_y", F64),
    ("q_r0", F64),
    ("q_r1", F64),
    ("q_r2", F64),
    ("q_r3", F64),
    ("q_l0", F64),
    ("q_l1", F64),
    ("q_l2", F64),
    ("q_l3", F64),
    ("mode_s", U8),
    ("mode_y", U8),
    ("mode_a", U8),
    ("alpha", F64),
    ("x_des", F64),
    ("phi_offset", F64),
    ("contact", U8),
    ("xi_r", F64),
    ("xi_h", F64),
    ("has_box", U8),
    ("box_x", F64),
    ("box_y", F64),
    ("box_yaw", F64),
    ("has_object", U8),
    ("object_x", F64),
    ("object_y", F64),
    ("object_yaw", F64),
    ("f_ext_x", F64),
    ("wall_normal", F64),
    ("fault", U8),
];

const HAPTIC_FIELDS: &[(&str, Ty)] = &[
    ("f_xh", F64),
    ("m_zh_fb", F64),
    ("sat_force", U8),
    ("sat_moment", U8),
    ("dcm_sync", F64),
    ("contact_force", F64),
    ("robot_moment", F64),
    ("contact_moment", F64),
];

const CONTROL_FIELDS: &[(&str, Ty)] = &[
    ("op", U8),
    ("scenario", Str),
    ("enable_contact_force", U8),
    ("enable_moment_fb", U8),
    ("enable_ff_moment", U8),
];

/// Loop state summary sent to the console.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Telemetry {
    pub t: f64,
    pub x: f64,
    pub xdot: f64,
    pub theta: f64,
    pub thetadot: f64,
    pub phi: f64,
    pub phidot: f64,
    pub base: [f64; 2],
    pub q: [[f64; 4]; 2],
    pub modes: [Mode; 3],
    pub alpha: f64,
    pub x_des: f64,
    pub phi_offset: f64,
    pub contact: u8,
    pub xi_r: f64,
    pub xi_h: f64,
    pub box_pose: Option<[f64; 3]>,
    pub object_pose: Option<[f64; 3]>,
    pub f_ext_x: f64,
    pub wall_normal: f64,
    pub fault: bool,
}

impl Telemetry {
    pub fn from_record(r: &TickRecord, has_box: bool, has_object: bool) -> Self {
        Self {
            t: r.t,
            x: r.robot.x,
            xdot: r.robot.xdot,
            theta: r.robot.theta,
            thetadot: r.robot.thetadot,
            phi: r.robot.phi,
            phidot: r.robot.phidot,
            base: r.base,
            q: r.robot.arms.map(|a| a.q),
            modes: [r.modes.mode_s, r.modes.mode_y, r.modes.mode_a],
            alpha: r.modes.alpha,
            x_des: r.modes.x_des,
            phi_offset: r.modes.phi_offset,
            contact: r.contact.state.code(),
            xi_r: r.xi_r,
            xi_h: r.xi_h,
            box_pose: has_box.then_some(r.box_pose),
            object_pose: has_object.then_some(r.object_pose),
            f_ext_x: r.interaction.f_ext_x,
            wall_normal: r.interaction.wall_normal,
            fault: r.fault,
        }
    }
}

/// Console commands.
#[derive(Debug, Clone, PartialEq)]
pub enum Control {
    /// Start the named scenario.
    Start { scenario: String },
    Stop,
    /// Feedback toggles; honored only before `Start`.
    Feedback {
        contact_force: bool,
        moment_fb: bool,
        ff_moment: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Body {
    PilotInput(PilotInput),
    Telemetry(Telemetry),
    Haptic(HapticFeedback),
    Control(Control),
}

impl Body {
    pub fn kind(&self) -> Kind {
        match self {
            Body::PilotInput(_) => Kind::PilotInput,
            Body::Telemetry(_) => Kind::Telemetry,
            Body::Haptic(_) => Kind::Haptic,
            Body::Control(_) => Kind::Control,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub session: u64,
    pub tick: u64,
    pub body: Body,
}

#[derive(Debug, Clone, PartialEq)]
enum Val {
    F(f64),
    B(u8),
    S(String),
}

fn mode(m: Mode) -> Val {
    Val::B(m.as_trigger())
}

fn flag(b: bool) -> Val {
    Val::B(u8::from(b))
}

fn pose(p: Option<[f64; 3]>) -> [Val; 4] {
    let v = p.unwrap_or([0.0; 3]);
    [flag(p.is_some()), Val::F(v[0]), Val::F(v[1]), Val::F(v[2])]
}

fn values(body: &Body) -> Vec<Val> {
    use Val::{B, F, S};
    match body {
        Body::PilotInput(u) => {
            let mut v = vec![F(u.timestamp), F(u.theta_h), F(u.thetadot_h), F(u.phi_h), F(u.phidot_h), F(u.m_zh)];
            v.extend(u.q_ah.concat().into_iter().map(F));
            v.extend([mode(u.u_s), mode(u.u_y), mode(u.u_a)]);
            v
        }
        Body::Telemetry(m) => {
            let mut v = vec![F(m.t), F(m.x), F(m.xdot), F(m.theta), F(m.thetadot), F(m.phi), F(m.phidot)];
            v.extend(m.base.into_iter().map(F));
            v.extend(m.q.concat().into_iter().map(F));
            v.extend(m.modes.map(mode));
            v.extend([F(m.alpha), F(m.x_des), F(m.phi_offset), B(m.contact), F(m.xi_r), F(m.xi_h)]);
            v.extend(pose(m.box_pose));
            v.extend(pose(m.object_pose));
            v.extend([F(m.f_ext_x), F(m.wall_normal), flag(m.fault)]);
            v
        }
        Body::Haptic(h) => vec![
            F(h.f_xh),
            F(h.m_zh_fb),
            flag(h.saturated.force),
            flag(h.saturated.moment),
            F(h.components.dcm_sync),
            F(h.components.contact_force),
            F(h.components.robot_moment),
            F(h.components.contact_moment),
        ],
        Body::Control(c) => match c {
            Control::Start { scenario } => vec![B(1), S(scenario.clone()), B(0), B(0), B(0)],
            Control::Stop => vec![B(2), S(String::new()), B(0), B(0), B(0)],
            Control::Feedback {
                contact_force,
                moment_fb,
                ff_moment,
            } => vec![B(3), S(String::new()), flag(*contact_force), flag(*moment_fb), flag(*ff_moment)],
        },
    }
}

fn malformed(m: impl Into<String>) -> TeleopError {
    TeleopError::Wire(m.into())
}

/// Sequential reader over decoded payload values.
struct Cursor {
    vals: std::vec::IntoIter<Val>,
}

impl Cursor {
    fn f(&mut self) -> f64 {
        match self.vals.next() {
            Some(Val::F(x)) => x,
            _ => unreachable!("payload layout follows the field table"),
        }
    }

    fn b(&mut self) -> u8 {
        match self.vals.next() {
            Some(Val::B(x)) => x,
            _ => unreachable!("payload layout follows the field table"),
        }
    }

    fn s(&mut self) -> String {
        match self.vals.next() {
            Some(Val::S(x)) => x,
            _ => unreachable!("payload layout follows the field table"),
        }
    }

    fn fs<const N: usize>(&mut self) -> [f64; N] {
        std::array::from_fn(|_| self.f())
    }

    fn mode(&mut self) -> Result<Mode> {
        match self.b() {
            b @ (0 | 1) => Ok(Mode::from_trigger(b)),
            b => Err(malformed(format!("mode byte {b}"))),
        }
    }

    fn flag(&mut self) -> Result<bool> {
        match self.b() {
            0 => Ok(false),
            1 => Ok(true),
            b => Err(malformed(format!("flag byte {b}"))),
        }
    }

    fn pose(&mut self) -> Result<Option<[f64; 3]>> {
        let present = self.flag()?;
        let p = self.fs::<3>();
        Ok(present.then_some(p))
    }
}

fn build(kind: Kind, vals: Vec<Val>) -> Result<Body> {
    let mut c = Cursor { vals: vals.into_iter() };
    Ok(match kind {
        Kind::PilotInput => {
            let [timestamp, theta_h, thetadot_h, phi_h, phidot_h, m_zh] = c.fs();
            let q_ah = [c.fs(), c.fs()];
            Body::PilotInput(PilotInput {
                theta_h,
                thetadot_h,
                phi_h,
                phidot_h,
                m_zh,
                q_ah,
                u_s: c.mode()?,
                u_y: c.mode()?,
                u_a: c.mode()?,
                timestamp,
            })
        }
        Kind::Telemetry => {
            let [t, x, xdot, theta, thetadot, phi, phidot] = c.fs();
            let base = c.fs();
            let q = [c.fs(), c.fs()];
            let modes = [c.mode()?, c.mode()?, c.mode()?];
            let [alpha, x_des, phi_offset] = c.fs();
            let contact = c.b();
            if contact > 3 {
                return Err(malformed(format!("contact code {contact}")));
            }
            let [xi_r, xi_h] = c.fs();
            let box_pose = c.pose()?;
            let object_pose = c.pose()?;
            let [f_ext_x, wall_normal] = c.fs();
            Body::Telemetry(Telemetry {
                t,
                x,
                xdot,
                theta,
                thetadot,
                phi,
                phidot,
                base,
                q,
                modes,
                alpha,
                x_des,
                phi_offset,
                contact,
                xi_r,
                xi_h,
                box_pose,
                object_pose,
                f_ext_x,
                wall_normal,
                fault: c.flag()?,
            })
        }
        Kind::Haptic => {
            let [f_xh, m_zh_fb] = c.fs();
            let saturated = HapticSaturation {
                force: c.flag()?,
                moment: c.flag()?,
            };
            let [dcm_sync, contact_force, robot_moment, contact_moment] = c.fs();
            Body::Haptic(HapticFeedback {
                f_xh,
                m_zh_fb,
                saturated,
                components: FeedbackComponents {
                    dcm_sync,
                    contact_force,
                    robot_moment,
                    contact_moment,
                },
            })
        }
        Kind::Control => {
            let op = c.b();
            let scenario = c.s();
            let flags = [c.flag()?, c.flag()?, c.flag()?];
            Body::Control(match op {
                1 => Control::Start { scenario },
                2 => Control::Stop,
                3 => Control::Feedback {
                    contact_force: flags[0],
                    moment_fb: flags[1],
                    ff_moment: flags[2],
                },
                _ => return Err(malformed(format!("control op {op}"))),
            })
        }
    })
}

/// Serialize a frame, length prefix included.
pub fn encode(frame: &Frame) -> Vec<u8> {
    let kind = frame.body.kind();
    let mut out = vec![0u8; 4];
    out.push(WIRE_VERSION);
    out.push(kind as u8);
    out.extend(frame.session.to_le_bytes());
    out.extend(frame.tick.to_le_bytes());
    for v in values(&frame.body) {
        match v {
            Val::F(x) => out.extend(x.to_le_bytes()),
            Val::B(b) => out.push(b),
            Val::S(s) => {
                out.extend((s.len() as u32).to_le_bytes());
                out.extend(s.as_bytes());
            }
        }
    }
    let len = (out.len() - 4) as u32;
    out[..4].copy_from_slice(&len.to_le_bytes());
    out
}

/// Parse the bytes after a length prefix.
pub fn decode_body(bytes: &[u8]) -> Result<Frame> {
    if bytes.len() < HEADER_LEN {
        return Err(malformed(format!("frame of {} bytes is shorter than the header", bytes.len())));
    }
    if bytes[0] != WIRE_VERSION {
        return Err(malformed(format!("version {} (expected {WIRE_VERSION})", bytes[0])));
    }
    let kind = Kind::from_u8(bytes[1]).ok_or_else(|| malformed(format!("unknown kind {}", bytes[1])))?;
    let session = u64::from_le_bytes(bytes[2..10].try_into().expect("8 bytes"));
    let tick = u64::from_le_bytes(bytes[10..18].try_into().expect("8 bytes"));
    let mut rest = &bytes[HEADER_LEN..];
    let mut take = |n: usize| -> Result<&[u8]> {
        if rest.len() < n {
            return Err(malformed(format!("{} payload truncated", kind.name())));
        }
        let (head, tail) = rest.split_at(n);
        rest = tail;
        Ok(head)
    };
    let mut vals = Vec::with_capacity(kind.fields().len());
    for (_, ty) in kind.fields() {
        vals.push(match ty {
            Ty::F64 => Val::F(f64::from_le_bytes(take(8)?.try_into().expect("8 bytes"))),
            Ty::U8 => Val::B(take(1)?[0]),
            Ty::Str => {
                let n = u32::from_le_bytes(take(4)?.try_into().expect("4 bytes")) as usize;
                let s = std::str::from_utf8(take(n)?).map_err(|_| malformed("string is not UTF-8"))?;
                Val::S(s.to_string())
            }
        });
    }
    if !rest.is_empty() {
        return Err(malformed(format!("{} trailing bytes", rest.len())));
    }
    Ok(Frame {
        session,
        tick,
        body: build(kind, vals)?,
    })
}

/// Parse one complete frame including its length prefix.
pub fn decode(bytes: &[u8]) -> Result<Frame> {
    if bytes.len() < 4 {
        return Err(malformed("missing length prefix"));
    }
    let len = u32::from_le_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if bytes.len() - 4 != len {
        return Err(malformed(format!("length prefix {len} but {} bytes follow", bytes.len() - 4)));
    }
    decode_body(&bytes[4..])
}

/// Outcome of reading one frame off a stream.
#[derive(Debug)]
pub enum ReadOutcome {
    Frame(Frame),
    /// Well-delimited but unparseable; the stream is still in sync.
    Malformed(TeleopError),
    Eof,
}

/// Read one frame. An I/O error or an oversized length prefix is returned
/// as `Err`, since the stream can no longer be trusted to be in sync.
pub fn read_frame<R: Read>(r: &mut R) -> Result<ReadOutcome> {
    let mut len = [0u8; 4];
    match r.read_exact(&mut len) {
        Ok(()) => {}
        Err(e) if e.kind() == ErrorKind::UnexpectedEof => return Ok(ReadOutcome::Eof),
        Err(e) => return Err(e.into()),
    }
    let len = u32::from_le_bytes(len) as usize;
    if len > MAX_FRAME {
        return Err(malformed(format!("frame length {len} exceeds {MAX_FRAME}")));
    }
    let mut buf = vec![0u8; len];
    r.read_exact(&mut buf)?;
    Ok(match decode_body(&buf) {
        Ok(f) => ReadOutcome::Frame(f),
        Err(e) => ReadOutcome::Malformed(e),
    })
}

pub fn write_frame<W: Write>(w: &mut W, frame: &Frame) -> Result<()> {
    w.write_all(&encode(frame))?;
    Ok(())
}

/// JSON schema document describing the framing and every message layout.
pub fn schema() -> Value {
    let kinds: Vec<Value> = Kind::ALL
        .iter()
        .map(|k| {
            json!({
                "kind": *k as u8,
                "name": k.name(),
                "fields": k.fields().iter().map(|(n, t)| json!({"name": n, "type": t.name()})).collect::<Vec<_>>(),
            })
        })
        .collect();
    json!({
        "version": WIRE_VERSION,
        "endianness": "little",
        "header": [
            {"name": "length", "type": "u32", "note": "bytes after this field"},
            {"name": "version", "type": "u8"},
            {"name": "kind", "type": "u8"},
            {"name": "session", "type": "u64"},
            {"name": "tick", "type": "u64"},
        ],
        "types": {
            "f64": "IEEE-754 binary64",
            "u8": "unsigned byte; modes are 0 = P, 1 = D; flags are 0 or 1",
            "str": "u32 byte length followed by UTF-8",
        },
        "control_ops": {"1": "start", "2": "stop", "3": "feedback"},
        "max_frame": MAX_FRAME,
        "messages": kinds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn finite() -> impl Strategy<Value = f64> {
        prop_oneof![-1e6..1e6f64, Just(0.0), Just(-0.0), Just(f64::MIN_POSITIVE), Just(1.0 / 3.0)]
    }

    fn mode_s() -> impl Strategy<Value = Mode> {
        any::<bool>().prop_map(|b| Mode::from_trigger(u8::from(b)))
    }

    fn pose_s() -> impl Strategy<Value = Option<[f64; 3]>> {
        proptest::option::of(proptest::array::uniform3(finite()))
    }

    fn pilot() -> impl Strategy<Value = Body> {
        (proptest::array::uniform6(finite()), proptest::array::uniform8(finite()), [mode_s(), mode_s(), mode_s()]).prop_map(
            |(a, q, m)| {
                Body::PilotInput(PilotInput {
                    timestamp: a[0],
                    theta_h: a[1],
                    thetadot_h: a[2],
                    phi_h: a[3],
                    phidot_h: a[4],
                    m_zh: a[5],
                    q_ah: [[q[0], q[1], q[2], q[3]], [q[4], q[5], q[6], q[7]]],
                    u_s: m[0],
                    u_y: m[1],
                    u_a: m[2],
                })
            },
        )
    }

    fn telemetry() -> impl Strategy<Value = Body> {
        (
            proptest::collection::vec(finite(), 24),
            [mode_s(), mode_s(), mode_s()],
            0u8..4,
            pose_s(),
            pose_s(),
            any::<bool>(),
        )
            .prop_map(|(f, modes, contact, box_pose, object_pose, fault)| {
                Body::Telemetry(Telemetry {
                    t: f[0],
                    x: f[1],
                    xdot: f[2],
                    theta: f[3],
                    thetadot: f[4],
                    phi: f[5],
                    phidot: f[6],
                    base: [f[7], f[8]],
                    q: [[f[9], f[10], f[11], f[12]], [f[13], f[14], f[15], f[16]]],
                    modes,
                    alpha: f[17],
                    x_des: f[18],
                    phi_offset: f[19],
                    contact,
                    xi_r: f[20],
                    xi_h: f[21],
                    box_pose,
                    object_pose,
                    f_ext_x: f[22],
                    wall_normal: f[23],
                    fault,
                })
            })
    }

    fn haptic() -> impl Strategy<Value = Body> {
        (proptest::array::uniform6(finite()), any::<bool>(), any::<bool>()).prop_map(|(f, force, moment)| {
            Body::Haptic(HapticFeedback {
                f_xh: f[0],
                m_zh_fb: f[1],
                saturated: HapticSaturation { force, moment },
                components: FeedbackComponents {
                    dcm_sync: f[2],
                    contact_force: f[3],
                    robot_moment: f[4],
                    contact_moment: f[5],
                },
            })
        })
    }

    fn control() -> impl Strategy<Value = Body> {
        prop_oneof![
            "\\PC{0,24}".prop_map(|scenario| Body::Control(Control::Start { scenario })),
            Just(Body::Control(Control::Stop)),
            (any::<bool>(), any::<bool>(), any::<bool>()).prop_map(|(a, b, c)| Body::Control(Control::Feedback {
                contact_force: a,
                moment_fb: b,
                ff_moment: c
            })),
        ]
    }

    fn frame(body: impl Strategy<Value = Body>) -> impl Strategy<Value = Frame> {
        (any::<u64>(), any::<u64>(), body).prop_map(|(session, tick, body)| Frame { session, tick, body })
    }

    fn round_trip(f: &Frame) {
        let bytes = encode(f);
        assert_eq!(&decode(&bytes).unwrap(), f);
        let mut r = bytes.as_slice();
        match read_frame(&mut r).unwrap() {
            ReadOutcome::Frame(g) => assert_eq!(&g, f),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(10_000))]
        #[test]
        fn pilot_round_trips(f in frame(pilot())) { round_trip(&f) }
        #[test]
        fn telemetry_round_trips(f in frame(telemetry())) { round_trip(&f) }
        #[test]
        fn haptic_round_trips(f in frame(haptic())) { round_trip(&f) }
        #[test]
        fn control_round_trips(f in frame(control())) { round_trip(&f) }
    }

    fn fixed_size(kind: Kind) -> usize {
        kind.fields()
            .iter()
            .map(|(_, t)| match t {
                Ty::F64 => 8,
                Ty::U8 => 1,
                Ty::Str => 4,
            })
            .sum()
    }

    #[test]
    fn encoded_sizes_match_schema_tables() {
        let body = Body::PilotInput(PilotInput::default());
        let f = Frame { session: 1, tick: 2, body };
        assert_eq!(encode(&f).len(), 4 + HEADER_LEN + fixed_size(Kind::PilotInput));
        let f = Frame {
            session: 1,
            tick: 2,
            body: Body::Telemetry(Telemetry::default()),
        };
        assert_eq!(encode(&f).len(), 4 + HEADER_LEN + fixed_size(Kind::Telemetry));
        let s = schema();
        for (k, m) in Kind::ALL.iter().zip(s["messages"].as_array().unwrap()) {
            assert_eq!(m["fields"].as_array().unwrap().len(), k.fields().len());
        }
    }

    #[test]
    fn header_layout_is_little_endian() {
        let f = Frame {
            session: 0x0102030405060708,
            tick: 9,
            body: Body::Control(Control::Stop),
        };
        let b = encode(&f);
        assert_eq!(u32::from_le_bytes(b[..4].try_into().unwrap()) as usize, b.len() - 4);
        assert_eq!(b[4], WIRE_VERSION);
        assert_eq!(b[5], Kind::Control as u8);
        assert_eq!(b[6..14], [8, 7, 6, 5, 4, 3, 2, 1]);
        assert_eq!(b[14], 9);
    }

    #[test]
    fn malformed_frames_are_rejected_but_keep_sync() {
        let good = encode(&Frame {
            session: 1,
            tick: 1,
            body: Body::Control(Control::Stop),
        });
        let mut bad_version = good.clone();
        bad_version[4] = 9;
        let mut bad_kind = good.clone();
        bad_kind[5] = 77;
        let mut bad_op = good.clone();
        bad_op[4 + HEADER_LEN] = 42;
        let mut stream = Vec::new();
        for b in [&bad_version, &bad_kind, &bad_op, &good] {
            stream.extend_from_slice(b);
        }
        let mut r = stream.as_slice();
        for _ in 0..3 {
            assert!(matches!(read_frame(&mut r).unwrap(), ReadOutcome::Malformed(_)));
        }
        assert!(matches!(read_frame(&mut r).unwrap(), ReadOutcome::Frame(_)));
        assert!(matches!(read_frame(&mut r).unwrap(), ReadOutcome::Eof));
        assert!(decode(&good[..good.len() - 1]).is_err());
    }

    #[test]
    fn oversized_length_is_fatal() {
        let mut r: &[u8] = &[0xff, 0xff, 0xff, 0x7f];
        assert!(read_frame(&mut r).is_err());
    }
}
