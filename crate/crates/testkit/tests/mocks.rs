use std::net::SocketAddr;
use std::sync::Arc;
use std::time::Duration;

use ecu_core::adapters::{AdapterError, Adapters};
use ecu_core::clock::FixedClock;
use ecu_core::codec::parse_request;
use ecu_core::registry::{load_registry, resolve_function, Endpoint};
use ecu_testkit::{
    canonical_eq, golden, rest_echo_mock, soap_dictionary_mock, socket_calc_mock, spawn_mock, Failure, MockBehavior,
    MockKind, APPLE_MEANING, UNKNOWN_WORD,
};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

fn http() -> reqwest::Client {
    reqwest::Client::builder().no_proxy().build().unwrap()
}

fn any() -> SocketAddr {
    "127.0.0.1:0".parse().unwrap()
}

async fn line_call(addr: SocketAddr, line: &str) -> String {
    let mut s = TcpStream::connect(addr).await.unwrap();
    s.write_all(line.as_bytes()).await.unwrap();
    let mut out = String::new();
    s.read_to_string(&mut out).await.unwrap();
    out
}

fn soap_call(word: Option<&str>) -> String {
    let inner = word.map_or(String::new(), |w| format!("<m:word>{w}</m:word>"));
    format!(
        r#"<soap:Envelope xmlns:soap="http://www.w3.org/2001/12/soap-envelope"><soap:Body><m:whatIs xmlns:m="urn:ecl:dictionary">{inner}</m:whatIs></soap:Body></soap:Envelope>"#
    )
}

#[tokio::test]
async fn dictionary_answers() {
    let mock = soap_dictionary_mock(0).await.unwrap();
    let url = format!("http://{}/ws", mock.addr());

    let resp = http().post(&url).body(soap_call(Some("apple"))).send().await.unwrap();
    assert_eq!(resp.status(), 200);
    let body = resp.text().await.unwrap();
    assert!(canonical_eq(&body, golden::SOAP_RESPONSE), "{body}");
    assert!(body.contains("<m:WhatIsResponse"));

    let body = http()
        .post(&url)
        .body(soap_call(Some("zzz")))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert!(body.contains(&format!("<m:meaning>{UNKNOWN_WORD}</m:meaning>")));

    let resp = http().post(&url).body(soap_call(None)).send().await.unwrap();
    assert_eq!(resp.status(), 500);
    assert!(resp.text().await.unwrap().contains("<soap:Fault>"));

    let resp = http().get(&url).send().await.unwrap();
    assert_eq!(resp.status(), 405);
    assert_eq!(mock.hits(), 4);
}

#[tokio::test]
async fn calc_answers() {
    let mock = socket_calc_mock(0).await.unwrap();
    for (line, reply) in [("Max 10,15\n", "15\n"), ("Max 7,7\n", "7\n"), ("Max -3,-9\n", "-3\n")] {
        assert_eq!(line_call(mock.addr(), line).await, reply);
    }
    assert_eq!(mock.hits(), 3);
}

#[tokio::test]
async fn echo_answers() {
    let mock = rest_echo_mock(0).await.unwrap();
    let body = http()
        .get(format!("http://{}/ws/concat?a=fruit%20salad&b=x", mock.addr()))
        .send()
        .await
        .unwrap()
        .text()
        .await
        .unwrap();
    assert_eq!(body, "fruit salad x");
}

#[tokio::test]
async fn in_process_answers_match_the_wire() {
    let soap = soap_dictionary_mock(0).await.unwrap();
    let calc = socket_calc_mock(0).await.unwrap();
    let echo = rest_echo_mock(0).await.unwrap();

    let envelope = soap_call(Some("apple"));
    let wire = http()
        .post(format!("http://{}/ws", soap.addr()))
        .body(envelope.clone())
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(MockKind::SoapDictionary.respond(envelope.as_bytes()), wire);
    // Deterministic.
    assert_eq!(
        MockKind::SoapDictionary.respond(envelope.as_bytes()),
        MockKind::SoapDictionary.respond(envelope.as_bytes())
    );

    assert_eq!(
        MockKind::SocketCalc.respond(b"Max 3,4\n"),
        line_call(calc.addr(), "Max 3,4\n").await.into_bytes()
    );

    let target = "/ws/echo?text=hi%21";
    let wire = http()
        .get(format!("http://{}{target}", echo.addr()))
        .send()
        .await
        .unwrap()
        .bytes()
        .await
        .unwrap();
    assert_eq!(MockKind::RestEcho.respond(target.as_bytes()), wire);
    assert_eq!(wire, "hi!");
}

#[tokio::test]
async fn hit_counters_are_exact_under_concurrency() {
    let calc = Arc::new(socket_calc_mock(0).await.unwrap());
    let soap = Arc::new(soap_dictionary_mock(0).await.unwrap());
    let mut tasks = Vec::new();
    for i in 0..50 {
        let (calc, soap) = (calc.clone(), soap.clone());
        tasks.push(tokio::spawn(async move {
            assert_eq!(line_call(calc.addr(), &format!("Max {i},0\n")).await, format!("{i}\n"));
            let body = reqwest::Client::builder()
                .no_proxy()
                .build()
                .unwrap()
                .post(format!("http://{}/ws", soap.addr()))
                .body(soap_call(Some("apple")))
                .send()
                .await
                .unwrap()
                .text()
                .await
                .unwrap();
            assert!(body.contains(APPLE_MEANING));
        }));
    }
    for t in tasks {
        t.await.unwrap();
    }
    assert_eq!(calc.hits(), 50);
    assert_eq!(soap.hits(), 50);
    calc.reset_hits();
    assert_eq!(calc.hits(), 0);
}

/// Runs one call through the adapter for `kind` against `mock`.
async fn adapter_result(kind: MockKind, addr: SocketAddr, timeout: Duration) -> Result<String, AdapterError> {
    let registry = load_registry(include_str!("../../../samples/registry.xml")).unwrap();
    let (id, function, req) = match kind {
        MockKind::SoapDictionary => (
            2,
            "whatIs",
            include_str!("../../../samples/whatis-request.xml").to_string(),
        ),
        MockKind::SocketCalc => (91, "Max", include_str!("../../../samples/max-request.xml").to_string()),
        MockKind::RestEcho => (
            7,
            "echo",
            include_str!("../../../samples/whatis-request.xml")
                .replace("whatIs", "echo")
                .replace("<name>word<", "<name>text<"),
        ),
    };
    let record = registry.lookup(id).unwrap();
    let sig = resolve_function(record, function).unwrap();
    let backend = Endpoint {
        host: addr.ip().to_string(),
        port: addr.port(),
        ..record.backends[0].clone()
    };
    let req = parse_request(&req).unwrap();
    let clock = FixedClock("1/1/2020 12:00:00AM".into());
    Adapters::new(timeout)
        .execute(record.protocol, record, &backend, &req, sig, &clock)
        .await
        .result
        .map(|r| r.return_value)
}

#[tokio::test]
async fn failure_injection() {
    let short = Duration::from_millis(300);
    for kind in [MockKind::SoapDictionary, MockKind::SocketCalc, MockKind::RestEcho] {
        let mock = spawn_mock(kind, any(), MockBehavior::default()).await.unwrap();
        let ok = adapter_result(kind, mock.addr(), short).await.unwrap();
        assert!(["15", "apple", APPLE_MEANING].contains(&ok.as_str()), "{kind:?}: {ok}");

        mock.set_behavior(MockBehavior::failing(Failure::Garble));
        let garbled = adapter_result(kind, mock.addr(), short).await;
        assert!(
            matches!(
                garbled,
                Err(AdapterError::BackendFailure(_) | AdapterError::MalformedSoap(_))
            ),
            "{kind:?}: {garbled:?}"
        );

        mock.set_behavior(MockBehavior::failing(Failure::Sleep(Duration::from_secs(2))));
        let slow = adapter_result(kind, mock.addr(), short).await;
        assert!(matches!(slow, Err(AdapterError::Timeout(_))), "{kind:?}: {slow:?}");

        mock.set_behavior(MockBehavior::failing(Failure::Refuse));
        let before = mock.hits();
        let refused = adapter_result(kind, mock.addr(), short).await;
        assert!(
            matches!(
                refused,
                Err(AdapterError::BackendFailure(_) | AdapterError::BackendUnreachable(_))
            ),
            "{kind:?}: {refused:?}"
        );
        assert!(mock.hits() > before);

        mock.set_behavior(MockBehavior::delayed(Duration::from_millis(50)));
        assert_eq!(adapter_result(kind, mock.addr(), short).await.unwrap(), ok);

        let addr = mock.addr();
        mock.stop().await;
        let down = adapter_result(kind, addr, short).await;
        assert!(
            matches!(down, Err(AdapterError::BackendUnreachable(_))),
            "{kind:?}: {down:?}"
        );
    }
}
