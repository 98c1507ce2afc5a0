use std::sync::mpsc;

use teleop_core::log::RunLog;
use teleop_core::service::{
    first_divergence, replay, run_session, run_trace, LiveEvent, LivePilot, Session, Trace,
};
use teleop_core::sim::{evaluate_scenario, Scenario};
use teleop_core::{Config, Mode, PilotInput};

const FLAT: &str = r#"
name = "flat"
duration = 2.0
success = { kind = "upright", max_pitch = 0.3 }
"#;

fn flat() -> Scenario {
    Scenario::from_toml_str(FLAT).unwrap()
}

fn lean_trace() -> Trace {
    let rows = (0..400)
        .map(|k| {
            let t = k as f64 * 0.005;
            PilotInput {
                timestamp: t,
                theta_h: 0.05 * (2.0 * t).sin(),
                thetadot_h: 0.1 * (2.0 * t).cos(),
                phi_h: 0.2 * t.sin(),
                phidot_h: 0.2 * t.cos(),
                q_ah: [[0.2, 0.6, 0.0, 0.8]; 2],
                u_s: if t < 1.0 { Mode::P } else { Mode::D },
                u_a: if t < 0.5 { Mode::P } else { Mode::D },
                ..Default::default()
            }
        })
        .collect();
    Trace { rows }
}

#[test]
fn zero_input_stays_exactly_at_rest() {
    let cfg = Config::default();
    let trace = Trace {
        rows: vec![PilotInput::default()],
    };
    let log = run_trace(&flat(), &trace, &cfg).unwrap();
    for col in ["x", "xdot", "theta", "thetadot", "phi", "base_x", "wheel_force", "tau_y"] {
        assert!(log.series(col).unwrap().iter().all(|v| *v == 0.0), "{col} moved");
    }
    assert!(evaluate_scenario(&log).unwrap().success);
}

#[test]
fn tick_accounting() {
    let cfg = Config::default();
    let log = run_trace(&flat(), &lean_trace(), &cfg).unwrap();
    assert_eq!(log.len(), 400);
    let t = log.series("t").unwrap();
    let tick = log.series("tick").unwrap();
    for (i, (ti, ki)) in t.iter().zip(&tick).enumerate() {
        assert_eq!(*ki, i as f64);
        assert!((ti - (i + 1) as f64 * 0.005).abs() < 1e-12);
    }
    let e = evaluate_scenario(&log).unwrap();
    assert_eq!(e.mode_switches, [1, 0, 1]);
    assert!(!e.fault);
}

#[test]
fn replay_is_bitwise_and_edits_diverge() {
    let cfg = Config::default();
    let log = run_trace(&flat(), &lean_trace(), &cfg).unwrap();
    assert_eq!(first_divergence(&log, &replay(&log).unwrap()), None);

    let mut edited = log.clone();
    let col = edited.col("theta_h").unwrap();
    edited.rows[200][col] += 0.01;
    let again = replay(&edited).unwrap();
    let (row, _) = first_divergence(&log, &again).expect("edited input must change the run");
    assert_eq!(row, 200);
}

#[test]
fn truncated_log_is_rejected() {
    let cfg = Config::default();
    let log = run_trace(&flat(), &lean_trace(), &cfg).unwrap();
    let mut text = Vec::new();
    log.write_to(&mut text).unwrap();
    let text = String::from_utf8(text).unwrap();

    // Cut mid-row.
    let cut = &text[..text.len() - 7];
    assert!(RunLog::parse(cut).is_err());

    // Whole rows missing: parses, but cannot be judged.
    let mut short = log.clone();
    short.rows.truncate(300);
    assert!(evaluate_scenario(&short).is_err());
}

#[test]
fn stream_gap_ends_in_zero_torque_fault() {
    let cfg = Config::default();
    let (tx, rx) = mpsc::channel();
    let input = PilotInput {
        theta_h: 0.02,
        ..Default::default()
    };
    tx.send(LiveEvent::Input(input)).unwrap();
    drop(tx);
    let mut pilot = LivePilot::new(rx, cfg.sim.stream_gap_limit, cfg.sim.rate_filter_cutoff, cfg.sim.control_dt);
    let log = run_session(&flat(), &mut pilot, &cfg, &input, &mut |_| {}, None).unwrap();

    let gap_ticks = (cfg.sim.stream_gap_limit / cfg.sim.control_dt).round() as usize;
    assert_eq!(log.len(), gap_ticks + 2);
    let fault = log.series("fault").unwrap();
    assert_eq!(fault.iter().filter(|v| **v != 0.0).count(), 1);
    assert_eq!(*fault.last().unwrap(), 1.0);
    let last = log.rows.last().unwrap();
    for col in ["wheel_force", "tau_y", "tau_r0", "tau_r3", "tau_l1", "f_xh", "m_zh_fb"] {
        assert_eq!(last[log.col(col).unwrap()], 0.0, "{col}");
    }
    let e = evaluate_scenario(&log).unwrap();
    assert!(e.fault && !e.success);
}

#[test]
fn finished_session_refuses_more_ticks() {
    let cfg = Config::default();
    let mut s = Session::new(&flat(), &cfg, &PilotInput::default()).unwrap();
    s.step(PilotInput::default()).unwrap();
    s.safe_stop().unwrap();
    assert!(s.done());
    assert!(s.step(PilotInput::default()).is_err());
}

#[test]
fn non_finite_input_is_an_error() {
    let cfg = Config::default();
    let mut s = Session::new(&flat(), &cfg, &PilotInput::default()).unwrap();
    let bad = PilotInput {
        theta_h: f64::NAN,
        ..Default::default()
    };
    assert!(s.step(bad).is_err());
    assert_eq!(s.tick, 0);
}

#[test]
fn scripted_pilot_holds_last_row() {
    let cfg = Config::default();
    let mut trace = lean_trace();
    trace.rows.truncate(50);
    let short = run_trace(&flat(), &trace, &cfg).unwrap();
    assert_eq!(short.len(), 400);
    let theta_h = short.series("theta_h").unwrap();
    assert!(theta_h[50..].iter().all(|v| *v == theta_h[49]));
}
