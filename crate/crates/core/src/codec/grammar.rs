//! The request and response grammars, checked by hand.
//!
//! Each message is a `protocol` element holding an ordered sequence of eight
//! children. Everything but `functionParams` is #PCDATA; `functionParams` is
//! `(name, value, type)*`. Strict mode layers lexical checks on top.

use roxmltree::{Node, NodeType};

use super::model::{ParamType, ReturnType, Rule, ValidationReport, ECL_VERSION};
use super::text;

pub const REQUEST_SEQUENCE: [&str; 8] = [
    "sourceIP",
    "destinationIP",
    "sourceID",
    "destinationID",
    "functionInvoked",
    "functionParams",
    "stamp",
    "version",
];

pub const RESPONSE_SEQUENCE: [&str; 8] = [
    "sourceIP",
    "destinationIP",
    "sourceID",
    "destinationID",
    "returnValue",
    "returnType",
    "stamp",
    "version",
];

const TRIPLE: [&str; 3] = ["name", "value", "type"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Grammar {
    Request,
    Response,
}

impl Grammar {
    pub fn sequence(self) -> &'static [&'static str; 8] {
        match self {
            Grammar::Request => &REQUEST_SEQUENCE,
            Grammar::Response => &RESPONSE_SEQUENCE,
        }
    }
}

/// Direct text content of an element, trimmed.
pub(crate) fn element_text(node: Node<'_, '_>) -> String {
    let raw: String = node
        .children()
        .filter(|c| c.is_text())
        .filter_map(|c| c.text())
        .collect();
    raw.trim().to_string()
}

pub(crate) fn is_ecl(node: Node<'_, '_>, name: &str) -> bool {
    node.is_element() && node.tag_name().namespace().is_none() && node.tag_name().name() == name
}

fn earlier_siblings<'a, 'i>(node: Node<'a, 'i>) -> impl Iterator<Item = Node<'a, 'i>> {
    std::iter::successors(node.prev_sibling(), |n| n.prev_sibling())
}

fn display_name(node: Node<'_, '_>) -> String {
    match node.tag_name().namespace() {
        Some(ns) => format!("{{{ns}}}{}", node.tag_name().name()),
        None => node.tag_name().name().to_string(),
    }
}

/// Path of `node` under `parent_path`, with a 1-based index when the name repeats.
fn child_path(parent_path: &str, node: Node<'_, '_>) -> String {
    let name = node.tag_name();
    let same = |n: &Node<'_, '_>| n.is_element() && n.tag_name() == name;
    let total = node.parent().map_or(1, |p| p.children().filter(same).count());
    let name = display_name(node);
    if total > 1 {
        let pos = earlier_siblings(node).filter(same).count() + 1;
        format!("{parent_path}/{name}[{pos}]")
    } else {
        format!("{parent_path}/{name}")
    }
}

fn check_no_attributes(node: Node<'_, '_>, path: &str, report: &mut ValidationReport) {
    for attr in node.attributes() {
        report.push(
            Rule::Attribute,
            path,
            format!("attribute `{}` is not declared", attr.name()),
        );
    }
}

/// Element-only content: flags stray non-whitespace text.
fn check_element_only(node: Node<'_, '_>, path: &str, report: &mut ValidationReport) {
    for child in node.children() {
        if child.node_type() == NodeType::Text && child.text().is_some_and(|t| !t.trim().is_empty()) {
            report.push(
                Rule::MixedContent,
                path,
                format!(
                    "character data `{}` not allowed in element content",
                    child.text().unwrap_or_default().trim()
                ),
            );
        }
    }
}

fn check_pcdata(node: Node<'_, '_>, path: &str, report: &mut ValidationReport) {
    check_no_attributes(node, path, report);
    for child in node.children().filter(|c| c.is_element()) {
        report.push(
            Rule::TextOnly,
            child_path(path, child),
            format!("`{}` may only contain text", node.tag_name().name()),
        );
    }
}

/// Checks that `children` follow `sequence` exactly once each, in order.
fn check_sequence(parent_path: &str, children: &[Node<'_, '_>], sequence: &[&str], report: &mut ValidationReport) {
    let index_of = |n: &Node<'_, '_>| {
        if n.tag_name().namespace().is_some() {
            return None;
        }
        sequence.iter().position(|s| *s == n.tag_name().name())
    };
    let mut seen = vec![false; sequence.len()];
    let mut last: Option<(usize, &str)> = None;
    for child in children {
        let path = child_path(parent_path, *child);
        let Some(idx) = index_of(child) else {
            report.push(
                Rule::UnknownElement,
                path,
                format!("element `{}` is not allowed here", display_name(*child)),
            );
            continue;
        };
        if seen[idx] {
            report.push(
                Rule::DuplicateElement,
                path,
                format!("`{}` may appear only once", sequence[idx]),
            );
            continue;
        }
        seen[idx] = true;
        if let Some((prev_idx, prev_name)) = last {
            if idx < prev_idx {
                report.push(
                    Rule::ElementOrder,
                    path,
                    format!("`{}` must precede `{}`", sequence[idx], prev_name),
                );
            }
        }
        if last.is_none_or(|(p, _)| idx > p) {
            last = Some((idx, sequence[idx]));
        }
    }
    for (idx, name) in sequence.iter().enumerate() {
        if !seen[idx] {
            report.push(
                Rule::MissingElement,
                format!("{parent_path}/{name}"),
                format!("required element `{name}` is missing"),
            );
        }
    }
}

fn check_function_params(node: Node<'_, '_>, path: &str, strict: bool, report: &mut ValidationReport) {
    check_no_attributes(node, path, report);
    check_element_only(node, path, report);
    let children: Vec<_> = node.children().filter(|c| c.is_element()).collect();
    for (i, child) in children.iter().enumerate() {
        let cpath = child_path(path, *child);
        let expected = TRIPLE[i % 3];
        if !is_ecl(*child, expected) {
            report.push(
                Rule::ParamsTriple,
                cpath.clone(),
                format!(
                    "expected `{expected}` at position {} of parameter {}, found `{}`",
                    i % 3 + 1,
                    i / 3 + 1,
                    display_name(*child)
                ),
            );
        }
        if TRIPLE.iter().any(|t| is_ecl(*child, t)) {
            check_pcdata(*child, &cpath, report);
        }
        if is_ecl(*child, "type") {
            let t = element_text(*child);
            if t.parse::<ParamType>().is_err() {
                report.push(
                    Rule::ParamType,
                    cpath,
                    format!("`{t}` is not one of int, double, string, int[], double[], string[]"),
                );
            }
        }
    }
    if children.len() % 3 != 0 {
        report.push(
            Rule::ParamsTriple,
            path,
            format!(
                "{} child elements do not form complete (name, value, type) triples",
                children.len()
            ),
        );
    }
    for triple in children.chunks_exact(3) {
        if !triple.iter().zip(TRIPLE).all(|(n, t)| is_ecl(*n, t)) {
            continue;
        }
        let name = element_text(triple[0]);
        if name.is_empty() {
            report.push(Rule::EmptyName, child_path(path, triple[0]), "parameter name is empty");
        }
        if strict {
            if let Ok(ptype) = element_text(triple[2]).parse::<ParamType>() {
                let value = element_text(triple[1]);
                if !text::value_matches(&value, ptype) {
                    report.push(
                        Rule::ValueType,
                        child_path(path, triple[1]),
                        format!("value `{value}` is not a valid {ptype}"),
                    );
                }
            }
        }
    }
}

/// Validates a parsed document against one of the two grammars.
pub fn check_document(root: Node<'_, '_>, grammar: Grammar, strict: bool) -> ValidationReport {
    let mut report = ValidationReport::new();
    if !is_ecl(root, "protocol") {
        report.push(
            Rule::Root,
            format!("/{}", display_name(root)),
            "document element must be `protocol`",
        );
        return report;
    }
    let path = "/protocol";
    check_no_attributes(root, path, &mut report);
    check_element_only(root, path, &mut report);

    let children: Vec<_> = root.children().filter(|c| c.is_element()).collect();
    let sequence = grammar.sequence();
    check_sequence(path, &children, sequence, &mut report);

    for child in &children {
        if child.tag_name().namespace().is_some() {
            continue;
        }
        let name = child.tag_name().name();
        if !sequence.contains(&name) {
            continue;
        }
        // Duplicates were already reported; check only the first occurrence.
        if earlier_siblings(*child).any(|s| s.is_element() && s.tag_name() == child.tag_name()) {
            continue;
        }
        let cpath = child_path(path, *child);
        if name == "functionParams" {
            check_function_params(*child, &cpath, strict, &mut report);
            continue;
        }
        check_pcdata(*child, &cpath, &mut report);
        let value = element_text(*child);
        match name {
            "sourceID" | "destinationID" => {
                if value.is_empty() || !value.bytes().all(|b| b.is_ascii_digit()) || value.parse::<u64>().is_err() {
                    report.push(
                        Rule::IdInteger,
                        cpath,
                        format!("`{value}` is not a non-negative integer"),
                    );
                }
            }
            "functionInvoked" if value.is_empty() => {
                report.push(Rule::EmptyName, cpath, "function name is empty");
            }
            "returnType" => {
                if value.parse::<ReturnType>().is_err() {
                    report.push(
                        Rule::ReturnType,
                        cpath,
                        format!("`{value}` is not one of int, double, string"),
                    );
                }
            }
            "sourceIP" | "destinationIP" if strict && !text::is_ipv4(&value) => {
                report.push(
                    Rule::IpSyntax,
                    cpath,
                    format!("`{value}` is not a dotted-quad IPv4 address"),
                );
            }
            "version" if strict && value != ECL_VERSION => {
                report.push(
                    Rule::Version,
                    cpath,
                    format!("unsupported version `{value}` (expected {ECL_VERSION})"),
                );
            }
            "stamp" if strict && !text::is_stamp(&value) => {
                report.push(
                    Rule::StampFormat,
                    cpath,
                    format!("`{value}` does not match D/M/YYYY hh:mm:ss(AM|PM)"),
                );
            }
            "returnValue" if strict => {
                let ty = children
                    .iter()
                    .find(|c| is_ecl(**c, "returnType"))
                    .and_then(|c| element_text(*c).parse::<ReturnType>().ok());
                if let Some(ty) = ty {
                    if !text::value_matches(&value, ty.as_param_type()) {
                        report.push(Rule::ValueType, cpath, format!("value `{value}` is not a valid {ty}"));
                    }
                }
            }
            _ => {}
        }
    }
    report
}
