use std::io::{BufReader, BufWriter};
use std::net::TcpStream;
use std::sync::Arc;

use rlxkit::bridge::{
    read_message, serve_env, write_message, RemoteEnv, ServerHandle, WireMessage, CODE_BAD_STATE,
    CODE_PROTOCOL,
};
use rlxkit::env::{Env, EnvError};
use rlxkit::envs::{run_task, Pendulum, RunTask};

fn run_task_server() -> ServerHandle {
    serve_env(Arc::new(|| Ok(Box::new(RunTask::new()) as Box<dyn Env>)), "127.0.0.1:0").unwrap()
}

fn raw(server: &ServerHandle) -> (BufReader<TcpStream>, BufWriter<TcpStream>) {
    let s = TcpStream::connect(server.local_addr()).unwrap();
    (BufReader::new(s.try_clone().unwrap()), BufWriter::new(s))
}

#[test]
fn spaces_match_local_construction() {
    let server = run_task_server();
    let remote = RemoteEnv::connect(&server.local_addr().to_string()).unwrap();
    let local = RunTask::new();
    assert_eq!(remote.observation_space(), local.observation_space());
    assert_eq!(remote.action_space(), local.action_space());
}

#[test]
fn full_episode_truncates_at_step_160() {
    let server = run_task_server();
    let mut remote = RemoteEnv::connect(&server.local_addr().to_string()).unwrap();
    remote.reset(Some(0)).unwrap();
    let mut steps = 0;
    loop {
        // Zero throttle never reaches the goal.
        let r = remote.step(&[0.0]).unwrap();
        steps += 1;
        if r.done() {
            assert!(r.truncated && !r.terminated);
            break;
        }
    }
    assert_eq!(steps, run_task::MAX_STEPS as usize);
    assert!(matches!(remote.step(&[0.0]), Err(EnvError::Usage(_))));
}

#[test]
fn remote_pendulum_tracks_local() {
    let server =
        serve_env(Arc::new(|| Ok(Box::new(Pendulum::new()) as Box<dyn Env>)), "127.0.0.1:0").unwrap();
    let mut remote = RemoteEnv::connect(&server.local_addr().to_string()).unwrap();
    let mut local = Pendulum::new();
    let a = remote.reset(Some(11)).unwrap();
    let b = local.reset(Some(11)).unwrap();
    assert_eq!(a, b);
    for t in 0..200 {
        let action = [2.0 * (t as f64 * 0.37).sin()];
        let r = remote.step(&action).unwrap();
        let l = local.step(&action).unwrap();
        assert!((r.reward - l.reward).abs() <= 1e-9);
        for (x, y) in r.observation.iter().zip(&l.observation) {
            assert!((x - y).abs() <= 1e-9);
        }
        assert_eq!((r.terminated, r.truncated), (l.terminated, l.truncated));
    }
}

#[test]
fn sequential_sessions_get_independent_envs() {
    let server = run_task_server();
    let addr = server.local_addr().to_string();
    let mut first = RemoteEnv::connect(&addr).unwrap();
    first.reset(None).unwrap();
    for _ in 0..50 {
        first.step(&[1.0]).unwrap();
    }
    drop(first);
    let mut second = RemoteEnv::connect(&addr).unwrap();
    let obs = second.reset(None).unwrap();
    assert_eq!(obs, RunTask::new().reset(None).unwrap());
}

#[test]
fn step_before_reset_is_bad_state() {
    let server = run_task_server();
    let (mut r, mut w) = raw(&server);
    write_message(&mut w, &WireMessage::Hello).unwrap();
    assert_eq!(read_message(&mut r).unwrap(), WireMessage::Hello);
    assert!(matches!(read_message(&mut r).unwrap(), WireMessage::Spaces { .. }));
    write_message(&mut w, &WireMessage::Step { action: vec![0.0] }).unwrap();
    match read_message(&mut r).unwrap() {
        WireMessage::Error { code, .. } => assert_eq!(code, CODE_BAD_STATE),
        other => panic!("expected error, got {other:?}"),
    }
    assert!(read_message(&mut r).is_err(), "session should be closed");
}

#[test]
fn reset_before_hello_is_bad_state() {
    let server = run_task_server();
    let (mut r, mut w) = raw(&server);
    write_message(&mut w, &WireMessage::Reset { seed: None }).unwrap();
    assert!(matches!(read_message(&mut r).unwrap(), WireMessage::Error { code, .. } if code == CODE_BAD_STATE));
}

#[test]
fn unknown_type_closes_session() {
    use std::io::Write;
    let server = run_task_server();
    let (mut r, mut w) = raw(&server);
    let body = br#"{"type":"warp","v":1}"#;
    w.write_all(&(body.len() as u32).to_be_bytes()).unwrap();
    w.write_all(body).unwrap();
    w.flush().unwrap();
    assert!(matches!(read_message(&mut r).unwrap(), WireMessage::Error { code, .. } if code == CODE_PROTOCOL));
    assert!(read_message(&mut r).is_err());
}

#[test]
fn server_vanishing_mid_episode_is_transport_error() {
    use std::net::TcpListener;
    let listener = TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap().to_string();
    let fake = std::thread::spawn(move || {
        let (s, _) = listener.accept().unwrap();
        let mut r = BufReader::new(s.try_clone().unwrap());
        let mut w = BufWriter::new(s);
        let local = RunTask::new();
        read_message(&mut r).unwrap();
        write_message(&mut w, &WireMessage::Hello).unwrap();
        write_message(
            &mut w,
            &WireMessage::Spaces {
                observation_space: local.observation_space().clone(),
                action_space: local.action_space().clone(),
            },
        )
        .unwrap();
        read_message(&mut r).unwrap();
        write_message(&mut w, &WireMessage::ResetResult { observation: vec![1.0, 0.0, 1.0] }).unwrap();
        // Read the step request, then hang up without answering.
        read_message(&mut r).unwrap();
    });
    let mut remote = RemoteEnv::connect(&addr).unwrap();
    remote.reset(None).unwrap();
    let err = remote.step(&[0.5]).unwrap_err();
    assert!(matches!(err, EnvError::Transport(_)), "{err}");
    fake.join().unwrap();
}

#[test]
fn connection_refused_is_startup_error() {
    let port = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
        l.local_addr().unwrap().port()
    };
    assert!(matches!(
        RemoteEnv::connect(&format!("127.0.0.1:{port}")),
        Err(EnvError::Transport(_))
    ));
}

#[test]
fn concurrent_sessions_are_isolated() {
    let server = run_task_server();
    let addr = server.local_addr().to_string();
    let handles: Vec<_> = (0..4)
        .map(|k| {
            let addr = addr.clone();
            std::thread::spawn(move || {
                let mut remote = RemoteEnv::connect(&addr).unwrap();
                let mut local = RunTask::new();
                remote.reset(None).unwrap();
                local.reset(None).unwrap();
                for t in 0..40 {
                    let a = [((t + k) as f64 * 0.1).cos()];
                    assert_eq!(remote.step(&a).unwrap().observation, local.step(&a).unwrap().observation);
                }
            })
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
}
