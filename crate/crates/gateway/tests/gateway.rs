use std::io::Write;
use std::sync::atomic::{AtomicU32, AtomicUsize, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use trajlens_gateway::*;

fn fast_config() -> GatewayConfig {
    GatewayConfig {
        retry: RetryPolicy {
            max_attempts: 3,
            base_delay_ms: 1,
            max_delay_ms: 4,
        },
        ..GatewayConfig::default()
    }
}

fn ok(text: &str) -> Result<Completion, TransportError> {
    Ok(Completion {
        text: text.into(),
        usage: Usage {
            input_tokens: 10,
            output_tokens: 2,
        },
    })
}

fn status(code: u16) -> TransportError {
    TransportError::Status {
        status: code,
        message: "x".into(),
    }
}

#[test]
fn rate_limited_twice_then_success() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let t = FnTransport::new(move |_| match c.fetch_add(1, Ordering::SeqCst) {
        0 | 1 => Err(status(429)),
        _ => ok("done"),
    });
    let gw = Gateway::with_transport(fast_config(), Arc::new(t)).unwrap();
    let resp = gw.send(&gw.request("s", vec![Part::text("q")])).unwrap();
    assert_eq!(resp.text, "done");
    assert_eq!(resp.attempts, 3);
    assert_eq!(calls.load(Ordering::SeqCst), 3);
    let totals = gw.ledger().totals(&gw.config().model).unwrap();
    assert_eq!((totals.calls, totals.attempts, totals.failures), (1, 3, 0));
}

#[test]
fn permanent_errors_are_not_retried() {
    let calls = Arc::new(AtomicU32::new(0));
    let c = calls.clone();
    let t = FnTransport::new(move |_| {
        c.fetch_add(1, Ordering::SeqCst);
        Err(status(400))
    });
    let gw = Gateway::with_transport(fast_config(), Arc::new(t)).unwrap();
    let err = gw.send(&gw.request("s", vec![Part::text("q")])).unwrap_err();
    assert!(matches!(err, GatewayError::Permanent { attempts: 1, .. }), "{err}");
    assert_eq!(calls.load(Ordering::SeqCst), 1);
}

#[test]
fn persistent_overload_exhausts_attempts() {
    let t = FnTransport::new(|_| Err(status(503)));
    let gw = Gateway::with_transport(fast_config(), Arc::new(t)).unwrap();
    let err = gw.send(&gw.request("s", vec![Part::text("q")])).unwrap_err();
    assert!(matches!(err, GatewayError::Exhausted { attempts: 3, .. }), "{err}");
    assert_eq!(gw.ledger().totals(&gw.config().model).unwrap().failures, 1);
}

#[test]
fn burst_respects_in_flight_cap() {
    let live = Arc::new(AtomicUsize::new(0));
    let peak = Arc::new(AtomicUsize::new(0));
    let (l, p) = (live.clone(), peak.clone());
    let t = FnTransport::new(move |_| {
        let n = l.fetch_add(1, Ordering::SeqCst) + 1;
        p.fetch_max(n, Ordering::SeqCst);
        thread::sleep(Duration::from_millis(10));
        l.fetch_sub(1, Ordering::SeqCst);
        ok("x")
    });
    let cfg = GatewayConfig {
        max_in_flight: 2,
        ..fast_config()
    };
    let gw = Arc::new(Gateway::with_transport(cfg, Arc::new(t)).unwrap());
    let handles: Vec<_> = (0..10)
        .map(|i| {
            let gw = gw.clone();
            thread::spawn(move || gw.send(&gw.request("s", vec![Part::text(format!("q{i}"))])).unwrap())
        })
        .collect();
    for h in handles {
        h.join().unwrap();
    }
    assert_eq!(peak.load(Ordering::SeqCst), 2);
    assert_eq!(gw.ledger().totals(&gw.config().model).unwrap().calls, 10);
}

#[test]
fn remote_without_credential_fails_before_network() {
    let cfg = GatewayConfig {
        backend: Backend::Remote,
        api_key_env: "TRAJLENS_TEST_SURELY_UNSET_KEY".into(),
        endpoint: "http://127.0.0.1:9/never".into(),
        ..GatewayConfig::default()
    };
    match Gateway::from_config(cfg) {
        Err(GatewayError::Config(v)) => assert!(v[0].contains("TRAJLENS_TEST_SURELY_UNSET_KEY")),
        Err(e) => panic!("unexpected error {e}"),
        Ok(_) => panic!("gateway built without a credential"),
    }
}

#[test]
fn mock_replays_fixture_file_deterministically() {
    let probe = ChatRequest::new("gpt-4o-mini", "sys", vec![Part::text("a"), Part::png("QUJD")]);
    let mut file = tempfile::NamedTempFile::new().unwrap();
    let entry = FixtureEntry {
        digest: request_digest(&probe),
        text: "Final Answer: 120 sec".into(),
        usage: None,
        note: Some("t1".into()),
    };
    writeln!(file, "// recorded answers").unwrap();
    writeln!(file, "{}", serde_json::to_string(&entry).unwrap()).unwrap();
    let cfg = GatewayConfig {
        fixtures: Some(file.path().to_path_buf()),
        ..GatewayConfig::default()
    };
    let gw = Gateway::from_config(cfg).unwrap();
    let req = gw.request("sys", vec![Part::text("a"), Part::png("QUJD")]);
    let a = gw.send(&req).unwrap();
    let b = gw.send(&req).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.latency_s, 0.0);
    assert_eq!(a.backend, Backend::Mock);
    let miss = gw.send(&gw.request("sys", vec![Part::text("other")])).unwrap_err();
    assert!(matches!(
        miss,
        GatewayError::Permanent {
            source: TransportError::NoFixture(_),
            ..
        }
    ));
}

#[test]
fn invalid_config_lists_every_problem() {
    let cfg = GatewayConfig {
        max_in_flight: 0,
        timeout_s: 0,
        ..GatewayConfig::default()
    };
    match Gateway::from_config(cfg) {
        Err(GatewayError::Config(v)) => assert_eq!(v.len(), 2),
        _ => panic!("expected config error"),
    }
}
