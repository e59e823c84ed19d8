//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each,
//! and exits non-zero if any fails.

mod conformance;
mod crypto;

use std::future::Future;
use std::net::SocketAddr;
use std::pin::Pin;
use std::sync::Arc;
use std::time::{Duration, Instant};

use ecu_core::clock::FixedClock;
use ecu_core::codec::text::is_stamp;
use ecu_core::codec::{parse_request, parse_response, EclRequest, Param, ParamType, ReturnType};
use ecu_core::gateway::{ErrorCode, Gateway, GatewaySettings, RunningGateway, Stage};
use ecu_core::registry::{load_registry, Registry};
use ecu_testkit::{
    canonical_diff, client_send, client_send_raw, golden, rebind_backends, spawn_mock, EcuAddress, Failure,
    MockBehavior, MockKind, MockServer, TranscriptRecorder, APPLE_MEANING,
};

type Outcome = Result<String, String>;
type Criterion = fn() -> Pin<Box<dyn Future<Output = Outcome>>>;

const MAX_REQUEST: &str = include_str!("../../../../samples/max-request.xml");
const MAX_RESPONSE: &str = include_str!("../../../../samples/max-response.xml");

fn sample_registry() -> Registry {
    load_registry(include_str!("../../../../samples/registry.xml")).expect("sample registry loads")
}

fn any_port() -> Option<SocketAddr> {
    Some("127.0.0.1:0".parse().unwrap())
}

async fn mock(kind: MockKind, behavior: MockBehavior) -> MockServer {
    spawn_mock(kind, "127.0.0.1:0".parse().unwrap(), behavior)
        .await
        .expect("mock binds")
}

async fn start(gateway: Gateway) -> RunningGateway {
    RunningGateway::start(Arc::new(gateway), any_port(), any_port())
        .await
        .expect("gateway binds")
}

fn addrs(running: &RunningGateway) -> [EcuAddress; 2] {
    [
        EcuAddress::http(running.http_addr().unwrap()),
        EcuAddress::tcp(running.tcp_addr().unwrap()),
    ]
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

async fn golden_round_trip() -> Outcome {
    let started = Instant::now();
    let dictionary = mock(MockKind::SoapDictionary, MockBehavior::default()).await;
    let registry = rebind_backends(&sample_registry(), 2, &[dictionary.addr()]);
    let record = registry.lookup(2).map_err(|e| e.to_string())?;
    check(record.advertised_ip == "192.168.1.6", || {
        "dictionary is not at 192.168.1.6".into()
    })?;
    let recorder = Arc::new(TranscriptRecorder::new());
    let running = start(
        Gateway::new(registry, GatewaySettings::default())
            .with_clock(Arc::new(FixedClock("12/4/2011 09:32:13PM".into())))
            .with_transcript(recorder.clone()),
    )
    .await;
    let [http, _] = addrs(&running);
    let raw = client_send_raw(&http, golden::ECL_REQUEST.as_bytes())
        .await
        .map_err(|e| e.to_string())?;
    running.shutdown().await;

    let groups = recorder.by_request();
    check(groups.len() == 1, || format!("{} requests recorded", groups.len()))?;
    let entries = groups.into_values().next().unwrap();
    let expected = [
        (Stage::EclIn, golden::ECL_REQUEST),
        (Stage::WireOut, golden::SOAP_REQUEST),
        (Stage::WireIn, golden::SOAP_RESPONSE),
        (Stage::EclOut, golden::ECL_RESPONSE),
    ];
    check(entries.len() == 4, || format!("{} transcript entries", entries.len()))?;
    for (entry, (stage, want)) in entries.iter().zip(expected) {
        check(entry.stage == stage, || {
            format!("stage {:?} where {stage:?} expected", entry.stage)
        })?;
        if let Some(diff) = canonical_diff(&String::from_utf8_lossy(&entry.bytes), want) {
            return Err(format!("{stage:?} differs from golden: {diff}"));
        }
    }
    let resp = parse_response(&String::from_utf8_lossy(&raw)).map_err(|e| e.to_string())?;
    check(resp.return_value == APPLE_MEANING, || {
        format!("returnValue {:?}", resp.return_value)
    })?;
    check(resp.return_type == ReturnType::String, || {
        "returnType is not string".into()
    })?;
    check((resp.source_id, resp.destination_id) == (2, 45), || {
        format!("ids {}->{}", resp.source_id, resp.destination_id)
    })?;
    let elapsed = started.elapsed();
    check(elapsed < Duration::from_secs(5), || format!("took {elapsed:?}"))?;
    Ok(format!("4 transcript entries canonical-equal to golden, {elapsed:.2?}"))
}

async fn max_pair() -> Outcome {
    let calc = mock(MockKind::SocketCalc, MockBehavior::default()).await;
    let registry = rebind_backends(&sample_registry(), 91, &[calc.addr()]);
    let running = start(Gateway::new(registry, GatewaySettings::default())).await;
    let req = parse_request(MAX_REQUEST).map_err(|e| e.to_string())?;
    let expected = parse_response(MAX_RESPONSE).map_err(|e| e.to_string())?;
    for addr in addrs(&running) {
        let mut resp = client_send(&addr, &req, None).await.map_err(|e| e.to_string())?;
        check(is_stamp(&resp.stamp), || {
            format!("stamp {:?} breaks the pattern", resp.stamp)
        })?;
        resp.stamp = expected.stamp.clone();
        check(resp == expected, || format!("{resp:?} != {expected:?}"))?;
    }
    running.shutdown().await;
    Ok("returnValue 15/int, ids 91->24, over HTTP and TCP".into())
}

async fn conformance_suite() -> Outcome {
    let (n, failures) = conformance::run();
    if failures.is_empty() {
        Ok(format!("{n}/{n} cases agree with the oracle table"))
    } else {
        Err(format!("{}/{n} disagree: {}", failures.len(), failures.join("; ")))
    }
}

async fn crypto_suite() -> Outcome {
    crypto::known_answers().map_err(|e| format!("(a) {e}"))?;
    let n = crypto::round_trips(1000).map_err(|e| format!("(b) {e}"))?;
    crypto::shape().map_err(|e| format!("(c) {e}"))?;
    let k = crypto::corruptions().map_err(|e| format!("(d) {e}"))?;
    Ok(format!("KATs, {n} round trips, shape, {k} corruptions rejected"))
}

async fn calc_pool(n: usize) -> Vec<MockServer> {
    let mut mocks = Vec::new();
    for _ in 0..n {
        mocks.push(mock(MockKind::SocketCalc, MockBehavior::default()).await);
    }
    mocks
}

async fn balance_run(requests: usize) -> Result<Vec<usize>, String> {
    let mocks = calc_pool(3).await;
    let addrs_: Vec<_> = mocks.iter().map(MockServer::addr).collect();
    let registry = rebind_backends(&sample_registry(), 91, &addrs_);
    let running = start(Gateway::new(registry, GatewaySettings::default())).await;
    let [_, tcp] = addrs(&running);
    let req = parse_request(MAX_REQUEST).map_err(|e| e.to_string())?;
    for _ in 0..requests {
        client_send(&tcp, &req, None).await.map_err(|e| e.to_string())?;
    }
    running.shutdown().await;
    Ok(mocks.iter().map(MockServer::hits).collect())
}

async fn balance() -> Outcome {
    let even = balance_run(90).await?;
    check(even == [30, 30, 30], || format!("90 requests -> {even:?}"))?;
    let odd = balance_run(91).await?;
    check(odd == [31, 30, 30], || format!("91 requests -> {odd:?}"))?;
    Ok(format!("90 -> {even:?}, 91 -> {odd:?}"))
}

fn distinct_request(i: usize) -> (EclRequest, String) {
    let mut req = parse_request(MAX_REQUEST).unwrap();
    req.source_id = 1000 + i as u64;
    req.source_ip = format!("10.0.{}.{}", i / 256, i % 256);
    if i.is_multiple_of(3) {
        req.destination_id = 7;
        req.destination_ip = "192.168.1.50".into();
        req.function_invoked = "echo".into();
        let text = format!("message {i}");
        req.params = vec![Param::new("text", text.clone(), ParamType::String)];
        (req, text)
    } else {
        let (x, y) = (i as i64 * 7 - 300, 100 - i as i64);
        req.params[0].value = x.to_string();
        req.params[1].value = y.to_string();
        (req, x.max(y).to_string())
    }
}

async fn concurrency() -> Outcome {
    let started = Instant::now();
    let delay = MockBehavior::delayed(Duration::from_millis(25));
    let calcs = [
        mock(MockKind::SocketCalc, delay).await,
        mock(MockKind::SocketCalc, delay).await,
    ];
    let echo = mock(MockKind::RestEcho, delay).await;
    let mut registry = rebind_backends(&sample_registry(), 91, &[calcs[0].addr(), calcs[1].addr()]);
    registry = rebind_backends(&registry, 7, &[echo.addr()]);
    let running = start(Gateway::new(
        registry,
        GatewaySettings {
            max_agents: 8,
            ..GatewaySettings::default()
        },
    ))
    .await;
    let gateway = running.gateway().clone();
    let targets = addrs(&running);
    let tasks: Vec<_> = (0..100)
        .map(|i| {
            let addr = targets[i % 2].clone();
            tokio::spawn(async move {
                let (req, want) = distinct_request(i);
                let resp = client_send(&addr, &req, None).await.map_err(|e| format!("#{i}: {e}"))?;
                if resp.destination_id != req.source_id
                    || resp.destination_ip != req.source_ip
                    || resp.return_value != want
                {
                    return Err(format!("#{i}: cross-correlated reply {resp:?}"));
                }
                Ok(())
            })
        })
        .collect();
    let mut errors = Vec::new();
    for t in tasks {
        if let Err(e) = t.await.map_err(|e| e.to_string()).and_then(|r| r) {
            errors.push(e);
        }
    }
    let peak = gateway.agents().peak();
    running.shutdown().await;
    let active = gateway.agents().active();
    let elapsed = started.elapsed();
    check(errors.is_empty(), || {
        format!("{} failures: {}", errors.len(), errors.join("; "))
    })?;
    check(peak <= 8, || format!("peak active agents {peak}"))?;
    check(active == 0, || format!("{active} agents still active"))?;
    check(elapsed < Duration::from_secs(30), || format!("took {elapsed:?}"))?;
    Ok(format!(
        "100/100 correlated, peak agents {peak}, gauge 0, {elapsed:.2?}"
    ))
}

async fn error_mapping() -> Outcome {
    let slow = mock(
        MockKind::SocketCalc,
        MockBehavior::failing(Failure::Sleep(Duration::from_secs(3))),
    )
    .await;
    let dead = {
        let l = std::net::TcpListener::bind("127.0.0.1:0").map_err(|e| e.to_string())?;
        l.local_addr().map_err(|e| e.to_string())?
    };
    let mut registry = rebind_backends(&sample_registry(), 91, &[slow.addr()]);
    registry = rebind_backends(&registry, 2, &[dead]);
    let running = start(Gateway::new(
        registry,
        GatewaySettings {
            adapter_timeout: Duration::from_millis(500),
            ..GatewaySettings::default()
        },
    ))
    .await;
    let cases: [(&str, String, u16, ErrorCode); 4] = [
        (
            "unknown service",
            MAX_REQUEST.replace("<destinationID>91<", "<destinationID>999<"),
            404,
            ErrorCode::UnknownService,
        ),
        (
            "backend down",
            golden::ECL_REQUEST.to_string(),
            502,
            ErrorCode::BackendUnreachable,
        ),
        ("slow backend", MAX_REQUEST.to_string(), 504, ErrorCode::Timeout),
        (
            "malformed XML",
            "<protocol><sourceIP>".to_string(),
            400,
            ErrorCode::InvalidXml,
        ),
    ];
    let mut checked = 0;
    for addr in addrs(&running) {
        for (label, body, status, code) in &cases {
            let err = match client_send_raw(&addr, body.as_bytes()).await {
                Ok(_) => return Err(format!("{label} over {addr}: request succeeded")),
                Err(e) => e,
            };
            let got_status = err.http_status().or(err.code().map(ErrorCode::http_status));
            check(err.code() == Some(*code) && got_status == Some(*status), || {
                format!("{label} over {addr}: got {err} (status {got_status:?})")
            })?;
            if matches!(addr, EcuAddress::Http(_)) {
                check(err.http_status().is_some(), || format!("{label}: no HTTP status"))?;
            }
            checked += 1;
        }
    }
    running.shutdown().await;
    Ok(format!("{checked} cases: 404/502/504/400 over HTTP and framed TCP"))
}

fn main() {
    let criteria: [(&str, Criterion); 7] = [
        ("golden dictionary round trip", || Box::pin(golden_round_trip())),
        ("Max request/response pair", || Box::pin(max_pair())),
        ("grammar conformance suite", || Box::pin(conformance_suite())),
        ("crypto", || Box::pin(crypto_suite())),
        ("round-robin balance", || Box::pin(balance())),
        ("concurrency soundness", || Box::pin(concurrency())),
        ("error mapping", || Box::pin(error_mapping())),
    ];
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .expect("tokio runtime");
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = runtime.block_on(run());
        match outcome {
            Ok(detail) => println!("criterion {} {name}: PASS ({detail})", i + 1),
            Err(why) => {
                failed += 1;
                println!("criterion {} {name}: FAIL ({why})", i + 1);
            }
        }
    }
    println!(
        "acceptance: {}/{} criteria passed",
        criteria.len() - failed,
        criteria.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
