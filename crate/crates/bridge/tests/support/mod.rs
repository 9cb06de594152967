//! Envelope generators and bridge measurements shared by the integration
//! tests and the acceptance harness.
#![allow(dead_code)]

use std::net::TcpStream;
use std::time::{Duration, Instant};

use mariner_bridge::schema::{DepthMsg, DvlMsg, ImuMsg};
use mariner_bridge::{decode, encode, encode_frame, BridgeClient, BridgeServer, CommandMsg, Envelope, Frame, Payload, ServerConfig, StateMsg};
use mariner_core::dynamics::ControlCommand;
use mariner_core::sensors::{EchoReturn, MultibeamScan, PointCloud, SidescanLine};
use mariner_core::world::SemanticLabel;
use proptest::prelude::*;
use proptest::test_runner::{Config, TestCaseError, TestRng, TestRunner};
use serde_json::Value;

pub const WAIT: Duration = Duration::from_secs(5);

pub fn real() -> impl Strategy<Value = f64> {
    prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO
}

fn range() -> impl Strategy<Value = f64> {
    prop_oneof![4 => 0.0f64..1e4, 1 => Just(f64::INFINITY)]
}

fn label() -> impl Strategy<Value = SemanticLabel> {
    (any::<u16>(), any::<u32>()).prop_map(|(c, i)| SemanticLabel::new(c, i))
}

fn text() -> impl Strategy<Value = String> {
    "[a-zA-Z0-9_/\\-\u{e9}\u{3b1} \"\\\\]{1,24}"
}

fn command() -> impl Strategy<Value = ControlCommand> {
    prop_oneof![
        (prop::collection::vec(real(), 0..6), real()).prop_map(|(fin_commands, prop_speed)| ControlCommand::Direct { fin_commands, prop_speed }),
        (real(), real(), real()).prop_map(|(depth, heading, speed)| ControlCommand::Setpoint { depth, heading, speed }),
    ]
}

fn payload() -> impl Strategy<Value = Payload> {
    let v3 = || prop::array::uniform3(real());
    prop_oneof![
        (prop::array::uniform6(real()), prop::array::uniform6(real()), prop::collection::vec(real(), 0..5), real(), v3())
            .prop_map(|(pose, twist, fin_angles, prop_speed, current)| Payload::State(StateMsg { pose, twist, fin_angles, prop_speed, current })),
        (range(), real(), prop::option::of(label())).prop_map(|(range, intensity, label)| Payload::SonarEcho(EchoReturn { range, intensity, label })),
        (1usize..20).prop_flat_map(|n| (
            prop::collection::vec(real(), n),
            prop::collection::vec(range(), n),
            prop::collection::vec(real(), n),
            prop::option::of(prop::collection::vec(prop::option::of(label()), n)),
        ))
        .prop_map(|(beam_angles, ranges, intensities, labels)| Payload::MultibeamScan(MultibeamScan { beam_angles, ranges, intensities, labels })),
        (1usize..20).prop_flat_map(|n| (
            real(),
            prop::collection::vec(real(), n),
            prop::collection::vec(real(), n),
            prop::option::of(prop::collection::vec(prop::option::of(label()), n)),
            prop::option::of(prop::collection::vec(prop::option::of(label()), n)),
        ))
        .prop_map(|(bin_size, port, starboard, port_labels, starboard_labels)| {
            Payload::SidescanLine(SidescanLine { bin_size, port, starboard, port_labels, starboard_labels })
        }),
        (0usize..20).prop_flat_map(|n| (
            prop::collection::vec(prop::array::uniform3(real()), n),
            prop::collection::vec(real(), n),
            prop::option::of(prop::collection::vec(label(), n)),
        ))
        .prop_map(|(points, intensities, labels)| Payload::PointCloud(PointCloud { points, intensities, labels })),
        (v3(), v3()).prop_map(|(specific_force, angular_rate)| Payload::Imu(ImuMsg { specific_force, angular_rate })),
        v3().prop_map(|velocity| Payload::Dvl(DvlMsg { velocity })),
        real().prop_map(|depth| Payload::Depth(DepthMsg { depth })),
        (text(), command()).prop_map(|(agent, command)| Payload::Command(CommandMsg { agent, command })),
    ]
}

pub fn envelope() -> impl Strategy<Value = Envelope> {
    (text(), any::<u64>(), real(), payload()).prop_map(|(topic, tick, stamp, payload)| Envelope::new(topic, tick, stamp, payload))
}

/// Independent canonical writer: objects with keys sorted bytewise, no whitespace.
pub fn canonical(v: &Value) -> String {
    match v {
        Value::Object(m) => {
            let mut keys: Vec<&String> = m.keys().collect();
            keys.sort_by(|a, b| a.as_bytes().cmp(b.as_bytes()));
            let parts: Vec<String> = keys.iter().map(|k| format!("{}:{}", Value::String((*k).clone()), canonical(&m[*k]))).collect();
            format!("{{{}}}", parts.join(","))
        }
        Value::Array(a) => format!("[{}]", a.iter().map(canonical).collect::<Vec<_>>().join(",")),
        leaf => leaf.to_string(),
    }
}

/// Encode, decode, re-encode and compare with the independent canonical
/// writer.
pub fn check_round_trip(e: &Envelope) -> Result<(), String> {
    let frame = encode(e).map_err(|err| err.to_string())?;
    let back = decode(&frame).map_err(|err| err.to_string())?;
    if &back != e {
        return Err(format!("decoded {back:?}"));
    }
    if encode(&back).map_err(|err| err.to_string())? != frame {
        return Err("re-encode differs".into());
    }
    let body: Value = serde_json::from_slice(&frame[4..]).map_err(|err| err.to_string())?;
    if canonical(&body).as_bytes() != &frame[4..] {
        return Err("body is not canonical JSON".into());
    }
    Ok(())
}

/// Runs `cases` generated envelopes through [`check_round_trip`] with a
/// fixed seed.
pub fn fuzz_round_trip(cases: u32) -> Result<(), String> {
    let rng = TestRng::deterministic_rng(proptest::test_runner::RngAlgorithm::ChaCha);
    let mut runner = TestRunner::new_with_rng(Config { cases, failure_persistence: None, ..Config::default() }, rng);
    runner.run(&envelope(), |e| check_round_trip(&e).map_err(TestCaseError::fail)).map_err(|e| e.to_string())
}

pub fn server(agents: &[&str]) -> BridgeServer {
    BridgeServer::serve(&ServerConfig::new("127.0.0.1", 0), agents.iter().map(|s| s.to_string())).unwrap()
}

pub fn depth(topic: &str, tick: u64) -> Envelope {
    Envelope::new(topic, tick, tick as f64 / 30.0, Payload::Depth(DepthMsg { depth: tick as f64 }))
}

pub fn subscribed(s: &BridgeServer, globs: &[&str], expected: usize) -> BridgeClient {
    let mut c = BridgeClient::connect(s.local_addr()).unwrap();
    c.subscribe(globs).unwrap();
    assert!(s.wait_for_subscribers(expected, WAIT));
    c
}

pub fn drain(c: &mut BridgeClient, quiet: Duration) -> Vec<Envelope> {
    let mut out = Vec::new();
    while let Ok(Some(f)) = c.recv(quiet) {
        match f {
            Frame::Publish(e) => out.push(e),
            other => panic!("unexpected {other:?}"),
        }
    }
    out
}

/// Two clients with different globs; each must receive exactly the
/// published sequence it matches, in publish order.
pub fn fan_out_order(ticks: u64) -> Result<usize, String> {
    let mut s = server(&[]);
    let mut a = subscribed(&s, &["*"], 1);
    let mut b = subscribed(&s, &["auv0/*"], 2);
    let topics = ["auv0/depth", "auv1/depth", "auv0/state"];
    let mut sent = Vec::new();
    for tick in 0..ticks {
        for t in topics {
            let e = depth(t, tick);
            sent.push(e.clone());
            s.publish(e).map_err(|e| e.to_string())?;
        }
    }
    if !s.flush(WAIT) {
        return Err("flush timed out".into());
    }
    let got_a = drain(&mut a, Duration::from_millis(300));
    if got_a != sent {
        return Err(format!("client a got {} of {} or out of order", got_a.len(), sent.len()));
    }
    let want_b: Vec<Envelope> = sent.iter().filter(|e| e.topic.starts_with("auv0/")).cloned().collect();
    let got_b = drain(&mut b, Duration::from_millis(300));
    if got_b != want_b {
        return Err(format!("client b got {} of {} or out of order", got_b.len(), want_b.len()));
    }
    if s.diagnostics().client_dropped != 0 {
        return Err("frames dropped for keeping-up clients".into());
    }
    Ok(sent.len())
}

/// Per-tick wall time of a loop doing fixed work plus publishing four
/// multibeam scans.
fn tick_times(s: &mut BridgeServer, ticks: std::ops::Range<u64>, payload_len: usize) -> Vec<f64> {
    let body: Vec<f64> = (0..payload_len).map(|i| i as f64 * 0.001).collect();
    let mut times = Vec::new();
    for tick in ticks {
        let t = Instant::now();
        let spin = Instant::now();
        while spin.elapsed() < Duration::from_micros(300) {
            std::hint::spin_loop();
        }
        for k in 0..4 {
            let payload = Payload::MultibeamScan(MultibeamScan {
                beam_angles: body.clone(),
                ranges: body.clone(),
                intensities: body.clone(),
                labels: None,
            });
            s.publish(Envelope::new(format!("auv0/mb{k}"), tick, tick as f64, payload)).unwrap();
        }
        times.push(t.elapsed().as_secs_f64());
    }
    times
}

pub fn percentile(v: &[f64], p: f64) -> f64 {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s[((s.len() - 1) as f64 * p).round() as usize]
}

#[derive(Debug, Clone, Copy)]
pub struct Jitter {
    pub baseline_p95: f64,
    pub stalled_p95: f64,
    pub client_dropped: u64,
}

/// p95 tick time with one reading client, then again after a second
/// subscriber that never reads has joined.
pub fn stalled_client_jitter() -> Jitter {
    let mut s = server(&[]);
    let mut reader = subscribed(&s, &["*"], 1);
    let drainer = std::thread::spawn(move || while reader.recv(Duration::from_millis(500)).is_ok_and(|f| f.is_some()) {});
    let baseline = tick_times(&mut s, 0..1500, 256);

    // Its socket buffers fill, then its queue.
    let stalled = TcpStream::connect(s.local_addr()).unwrap();
    let sub = encode_frame(&Frame::Subscribe { topics: vec!["*".into()] }).unwrap();
    std::io::Write::write_all(&mut &stalled, &sub).unwrap();
    assert!(s.wait_for_subscribers(2, WAIT));
    let loaded = tick_times(&mut s, 1500..3000, 256);

    let j = Jitter { baseline_p95: percentile(&baseline, 0.95), stalled_p95: percentile(&loaded, 0.95), client_dropped: s.diagnostics().client_dropped };
    drop(stalled);
    s.shutdown();
    drainer.join().unwrap();
    j
}
