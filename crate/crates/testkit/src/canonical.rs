//! XML canonical equality: element names compared as (namespace, local
//! name), attributes as an unordered set with namespace declarations
//! ignored, text with runs of whitespace collapsed, and whitespace-only text,
//! comments and processing instructions dropped.

use roxmltree::{Document, Node};

fn collapse(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

#[derive(Debug, PartialEq)]
enum Item {
    Element {
        ns: Option<String>,
        name: String,
        attrs: Vec<(Option<String>, String, String)>,
        children: Vec<Item>,
    },
    Text(String),
}

fn canon(node: Node<'_, '_>) -> Item {
    let mut attrs: Vec<_> = node
        .attributes()
        .map(|a| {
            (
                a.namespace().map(str::to_string),
                a.name().to_string(),
                collapse(a.value()),
            )
        })
        .collect();
    attrs.sort();
    let mut children = Vec::new();
    let mut text = String::new();
    for c in node.children() {
        if c.is_text() {
            text.push_str(c.text().unwrap_or_default());
        } else if c.is_element() {
            flush(&mut text, &mut children);
            children.push(canon(c));
        }
    }
    flush(&mut text, &mut children);
    Item::Element {
        ns: node.tag_name().namespace().map(str::to_string),
        name: node.tag_name().name().to_string(),
        attrs,
        children,
    }
}

fn flush(text: &mut String, children: &mut Vec<Item>) {
    let t = collapse(text);
    if !t.is_empty() {
        children.push(Item::Text(t));
    }
    text.clear();
}

fn first_difference(a: &Item, b: &Item, path: &str) -> Option<String> {
    match (a, b) {
        (Item::Text(x), Item::Text(y)) if x == y => None,
        (Item::Text(x), Item::Text(y)) => Some(format!("{path}: text {x:?} vs {y:?}")),
        (
            Item::Element {
                ns: n1,
                name: e1,
                attrs: a1,
                children: c1,
            },
            Item::Element {
                ns: n2,
                name: e2,
                attrs: a2,
                children: c2,
            },
        ) => {
            let here = format!("{path}/{e1}");
            if (n1, e1) != (n2, e2) {
                return Some(format!("{path}: element {{{n1:?}}}{e1} vs {{{n2:?}}}{e2}"));
            }
            if a1 != a2 {
                return Some(format!("{here}: attributes {a1:?} vs {a2:?}"));
            }
            if c1.len() != c2.len() {
                return Some(format!("{here}: {} children vs {}", c1.len(), c2.len()));
            }
            c1.iter().zip(c2).find_map(|(x, y)| first_difference(x, y, &here))
        }
        _ => Some(format!("{path}: element vs text")),
    }
}

/// `None` when the documents are canonically equal, else a description of
/// the first difference.
pub fn canonical_diff(a: &str, b: &str) -> Option<String> {
    let da = match Document::parse(a) {
        Ok(d) => d,
        Err(e) => return Some(format!("left is not XML: {e}")),
    };
    let db = match Document::parse(b) {
        Ok(d) => d,
        Err(e) => return Some(format!("right is not XML: {e}")),
    };
    first_difference(&canon(da.root_element()), &canon(db.root_element()), "")
}

pub fn canonical_eq(a: &str, b: &str) -> bool {
    canonical_diff(a, b).is_none()
}
