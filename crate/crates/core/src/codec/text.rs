//! Lexical rules for ECL element text: IPs, numbers, stamps, arrays, escaping.

use super::model::ParamType;

/// Dotted-quad IPv4: four groups of 1-3 digits, each at most 255.
pub fn is_ipv4(s: &str) -> bool {
    let mut groups = 0;
    for part in s.split('.') {
        groups += 1;
        if part.is_empty() || part.len() > 3 || !part.bytes().all(|b| b.is_ascii_digit()) {
            return false;
        }
        if part.parse::<u16>().map_or(true, |n| n > 255) {
            return false;
        }
    }
    groups == 4
}

pub fn is_int(s: &str) -> bool {
    let digits = s.strip_prefix(['+', '-']).unwrap_or(s);
    !digits.is_empty() && digits.bytes().all(|b| b.is_ascii_digit()) && s.parse::<i64>().is_ok()
}

/// Finite decimal with optional fraction and exponent. Rejects `inf`, `NaN`
/// and anything that overflows to infinity.
pub fn is_double(s: &str) -> bool {
    let b = s.as_bytes();
    let mut i = 0;
    if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut mantissa_digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        mantissa_digits += i - frac_start;
    }
    if mantissa_digits == 0 {
        return false;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if i < b.len() && (b[i] == b'+' || b[i] == b'-') {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return false;
        }
    }
    i == b.len() && s.parse::<f64>().is_ok_and(f64::is_finite)
}

/// `D/M/YYYY hh:mm:ss(AM|PM)`, e.g. `11/4/2011 09:32:10PM`. Pattern only,
/// no calendar checks.
pub fn is_stamp(s: &str) -> bool {
    fn digits(s: &str, min: usize, max: usize) -> bool {
        (min..=max).contains(&s.len()) && s.bytes().all(|b| b.is_ascii_digit())
    }
    let Some((date, time)) = s.split_once(' ') else {
        return false;
    };
    let date: Vec<&str> = date.split('/').collect();
    if date.len() != 3 || !digits(date[0], 1, 2) || !digits(date[1], 1, 2) || !digits(date[2], 4, 4) {
        return false;
    }
    let Some(clock) = time.strip_suffix("AM").or_else(|| time.strip_suffix("PM")) else {
        return false;
    };
    let clock: Vec<&str> = clock.split(':').collect();
    clock.len() == 3 && clock.iter().all(|p| digits(p, 2, 2))
}

/// Splits array text on unescaped commas, resolving `\,` and `\\`.
/// Empty text is the empty array. Returns `None` on a dangling or unknown escape.
pub fn split_array(s: &str) -> Option<Vec<String>> {
    if s.is_empty() {
        return Some(Vec::new());
    }
    let mut items = Vec::new();
    let mut cur = String::new();
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        match c {
            '\\' => match chars.next() {
                Some(e @ (',' | '\\')) => cur.push(e),
                _ => return None,
            },
            ',' => items.push(std::mem::take(&mut cur)),
            c => cur.push(c),
        }
    }
    items.push(cur);
    Some(items)
}

pub fn escape_array_item(item: &str) -> String {
    let mut out = String::with_capacity(item.len());
    for c in item.chars() {
        if c == ',' || c == '\\' {
            out.push('\\');
        }
        out.push(c);
    }
    out
}

pub fn join_array<I, S>(items: I) -> String
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    items
        .into_iter()
        .map(|s| escape_array_item(s.as_ref()))
        .collect::<Vec<_>>()
        .join(",")
}

/// Whether `value` is well-typed text for `ptype`.
pub fn value_matches(value: &str, ptype: ParamType) -> bool {
    match ptype {
        ParamType::Int => is_int(value),
        ParamType::Double => is_double(value),
        ParamType::String => true,
        array => match split_array(value) {
            None => false,
            Some(items) => match array.item_type() {
                ParamType::Int => items.iter().all(|i| is_int(i.trim())),
                ParamType::Double => items.iter().all(|i| is_double(i.trim())),
                _ => true,
            },
        },
    }
}

/// Characters legal in XML 1.0 character data.
pub fn is_xml_char(c: char) -> bool {
    matches!(c, '\t' | '\n' | '\r' | '\u{20}'..='\u{D7FF}' | '\u{E000}'..='\u{FFFD}' | '\u{10000}'..)
}

pub fn escape_text(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
    out
}

pub fn escape_attr(s: &str) -> String {
    escape_text(s).replace('"', "&quot;")
}
