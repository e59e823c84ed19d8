//! Grammar conformance: mutations of the sample messages, each paired with
//! the rule id it must be rejected under. The expected ids were assigned by
//! hand from the rule definitions, not by running the validator.

use ecu_core::codec::{validate_request, validate_response, ValidationReport};

const MAX_REQUEST: &str = include_str!("../../../../samples/max-request.xml");
const MAX_RESPONSE: &str = include_str!("../../../../samples/max-response.xml");
const WHATIS_REQUEST: &str = include_str!("../../../../samples/whatis-request.xml");
const WHATIS_RESPONSE: &str = include_str!("../../../../samples/whatis-response.xml");

#[derive(Clone, Copy)]
enum Kind {
    Request,
    Response,
}

struct Case {
    label: &'static str,
    kind: Kind,
    xml: String,
    rule: &'static str,
}

fn mutate(base: &str, edits: &[(&str, &str)]) -> String {
    let mut out = base.to_string();
    for (from, to) in edits {
        assert!(out.contains(from), "mutation anchor `{from}` missing");
        out = out.replacen(from, to, 1);
    }
    out
}

fn req(label: &'static str, edits: &[(&str, &str)], rule: &'static str) -> Case {
    Case {
        label,
        kind: Kind::Request,
        xml: mutate(MAX_REQUEST, edits),
        rule,
    }
}

fn resp(label: &'static str, edits: &[(&str, &str)], rule: &'static str) -> Case {
    Case {
        label,
        kind: Kind::Response,
        xml: mutate(MAX_RESPONSE, edits),
        rule,
    }
}

const SRC_IP: &str = "<sourceIP>192.168.1.20</sourceIP>\n";
const DST_IP: &str = "<destinationIP>192.168.1.177</destinationIP>\n";
const FUNC: &str = "<functionInvoked>Max</functionInvoked>\n";
const STAMP: &str = "<stamp>11/4/2011 09:32:10PM</stamp>\n";
const VERSION: &str = "<version>1.0</version>\n";
const PARAM_X: &str = "  <name>x</name>\n  <value>10</value>\n  <type>int</type>\n";

fn cases() -> Vec<Case> {
    vec![
        req(
            "swap sourceIP/destinationIP",
            &[(SRC_IP, ""), (DST_IP, &format!("{DST_IP}{SRC_IP}"))],
            "element-order",
        ),
        req(
            "functionInvoked after functionParams",
            &[
                (FUNC, ""),
                ("</functionParams>\n", &format!("</functionParams>\n{FUNC}")),
            ],
            "element-order",
        ),
        req(
            "version before stamp",
            &[(VERSION, ""), (STAMP, &format!("{VERSION}{STAMP}"))],
            "element-order",
        ),
        req("missing sourceIP", &[(SRC_IP, "")], "missing-element"),
        req("missing functionInvoked", &[(FUNC, "")], "missing-element"),
        req("missing version", &[(VERSION, "")], "missing-element"),
        req(
            "duplicate stamp",
            &[(STAMP, &format!("{STAMP}{STAMP}"))],
            "duplicate-element",
        ),
        req(
            "unknown element",
            &[(VERSION, &format!("{VERSION}<priority>1</priority>\n"))],
            "unknown-element",
        ),
        req(
            "type float",
            &[("<type>int</type>", "<type>float</type>")],
            "param-type",
        ),
        req(
            "type integer",
            &[("<type>int</type>", "<type>integer</type>")],
            "param-type",
        ),
        req("type Int", &[("<type>int</type>", "<type>Int</type>")], "param-type"),
        req(
            "value before name",
            &[(PARAM_X, "  <value>10</value>\n  <name>x</name>\n  <type>int</type>\n")],
            "params-triple",
        ),
        req(
            "incomplete triple",
            &[(PARAM_X, "  <name>x</name>\n  <value>10</value>\n")],
            "params-triple",
        ),
        req("three-octet sourceIP", &[("192.168.1.20<", "192.168.1<")], "ip-syntax"),
        req("octet over 255", &[("192.168.1.177", "256.168.1.177")], "ip-syntax"),
        req("hostname sourceIP", &[("192.168.1.20<", "localhost<")], "ip-syntax"),
        req("version 2.0", &[("<version>1.0<", "<version>2.0<")], "version"),
        req("version 1.1", &[("<version>1.0<", "<version>1.1<")], "version"),
        req(
            "wrong root",
            &[("<protocol>", "<message>"), ("</protocol>", "</message>")],
            "root",
        ),
        req(
            "non-integer sourceID",
            &[("<sourceID>24<", "<sourceID>abc<")],
            "id-integer",
        ),
        req(
            "ISO stamp",
            &[("11/4/2011 09:32:10PM", "2011-04-11T21:32:10")],
            "stamp-format",
        ),
        req(
            "int value not an integer",
            &[("<value>10<", "<value>ten<")],
            "value-type",
        ),
        req(
            "attribute on root",
            &[("<protocol>", "<protocol id=\"1\">")],
            "attribute",
        ),
        req("not well-formed", &[("</protocol>", "")], "well-formed"),
        resp(
            "array return type int[]",
            &[("<returnType>int<", "<returnType>int[]<")],
            "return-type",
        ),
        resp(
            "array return type string[]",
            &[("<returnType>int<", "<returnType>string[]<")],
            "return-type",
        ),
        resp(
            "return type float",
            &[("<returnType>int<", "<returnType>float<")],
            "return-type",
        ),
        resp(
            "missing returnValue",
            &[("<returnValue>15</returnValue>\n", "")],
            "missing-element",
        ),
        resp("response bad IP", &[("192.168.1.20", "192.168.1.x")], "ip-syntax"),
        resp("response version 0.9", &[("<version>1.0<", "<version>0.9<")], "version"),
    ]
}

fn report(kind: Kind, xml: &str) -> ValidationReport {
    match kind {
        Kind::Request => validate_request(xml),
        Kind::Response => validate_response(xml),
    }
}

/// Returns (cases run, disagreements).
pub fn run() -> (usize, Vec<String>) {
    let mut failures = Vec::new();
    let cases = cases();
    for c in &cases {
        let r = report(c.kind, &c.xml);
        let ids: Vec<&str> = r.rules().iter().map(|r| r.id()).collect();
        if r.ok() || !ids.contains(&c.rule) {
            failures.push(format!("{}: expected {}, got {:?}", c.label, c.rule, ids));
        }
    }
    let zero_params = mutate(
        MAX_REQUEST,
        &[(
            "<functionParams>\n  <name>x</name>\n  <value>10</value>\n  <type>int</type>\n  <name>y</name>\n  <value>15</value>\n  <type>int</type>\n</functionParams>",
            "<functionParams/>",
        )],
    );
    let accepted = [
        ("max request", Kind::Request, MAX_REQUEST.to_string()),
        ("whatIs request", Kind::Request, WHATIS_REQUEST.to_string()),
        ("max response", Kind::Response, MAX_RESPONSE.to_string()),
        ("whatIs response", Kind::Response, WHATIS_RESPONSE.to_string()),
        ("zero-param request", Kind::Request, zero_params),
    ];
    for (label, kind, xml) in &accepted {
        let r = report(*kind, xml);
        if !r.ok() {
            failures.push(format!("{label}: expected acceptance, got {r}"));
        }
    }
    (cases.len() + accepted.len(), failures)
}
