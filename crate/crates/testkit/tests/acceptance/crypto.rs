//! Crypto checks: collapsed-key known answers, round trips over random
//! requests, document shape, and rejection of precomputed corruptions.

use ecu_core::codec::{parse_request, EclRequest, Param, ParamType, XMLENC_NS};
use ecu_core::crypto::{
    decrypt_element, decrypt_request_payload, encrypt_element_with, encrypt_request_payload, tdes_encrypt_block,
    CryptoError, EncryptedPayload, FixedIv, TripleDesKey, ELEMENT_TYPE_URI,
};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};

const KEY_HEX: &str = "0123456789ABCDEF23456789ABCDEF01456789ABCDEF0123";

/// Single-DES vectors `(key, plaintext, ciphertext)` from published
/// validation suites, checked against an independent implementation before
/// the build.
const DES_KAT: [(&str, &str, &str); 6] = [
    ("133457799BBCDFF1", "0123456789ABCDEF", "85E813540F0AB405"),
    ("0123456789ABCDEF", "4E6F772069732074", "3FA40E8A984D4815"),
    ("0101010101010101", "8000000000000000", "95F8A5E5DD31D900"),
    ("0101010101010101", "0000000000000001", "166B40B44ABA4BD6"),
    ("8001010101010101", "0000000000000000", "95A8D72813DAA94D"),
    ("0E329232EA6D0D73", "8787878787878787", "0000000000000000"),
];

/// base64(IV ‖ ciphertext) of `<functionInvoked>Max</functionInvoked>` under
/// KEY_HEX with IV 00..07, from the independent implementation.
const CIPHER_VALUE: &str = "AAECAwQFBgfUVXKOqnLwvVZQKYa/UNsJ/UJ/IPX8vHtctm3LLUSXpruJi4b6vQnf";
const FAILING_CORRUPTIONS: [(usize, char); 14] = [
    (50, 'T'),
    (51, 'Y'),
    (52, 'q'),
    (53, 's'),
    (54, 'v'),
    (55, 'K'),
    (56, 'j'),
    (57, '5'),
    (58, 'c'),
    (59, '7'),
    (60, 'w'),
    (61, 'R'),
    (62, 'o'),
    (63, 'g'),
];

fn h8(s: &str) -> [u8; 8] {
    let mut out = [0u8; 8];
    for (i, o) in out.iter_mut().enumerate() {
        *o = u8::from_str_radix(&s[2 * i..2 * i + 2], 16).unwrap();
    }
    out
}

fn key() -> TripleDesKey {
    TripleDesKey::from_hex(KEY_HEX).unwrap()
}

pub fn known_answers() -> Result<(), String> {
    for (k, p, c) in DES_KAT {
        let key = TripleDesKey::from_hex(&k.repeat(3)).map_err(|e| e.to_string())?;
        let got = tdes_encrypt_block(&h8(p), &key);
        if got != h8(c) {
            return Err(format!("key {k}: got {got:02X?}, want {c}"));
        }
    }
    Ok(())
}

fn request_strategy() -> impl Strategy<Value = EclRequest> {
    let ip = prop::array::uniform4(0u8..=255).prop_map(|o| format!("{}.{}.{}.{}", o[0], o[1], o[2], o[3]));
    let text = "[a-zA-Z0-9<>&'\"!?;:_ ,\\\\.é-]{0,16}".prop_map(|s| s.trim().to_string());
    let param = prop_oneof![
        ("[a-z]{1,6}", any::<i64>()).prop_map(|(n, v)| Param::new(n, v.to_string(), ParamType::Int)),
        ("[a-z]{1,6}", -1e6f64..1e6).prop_map(|(n, v)| Param::new(n, v.to_string(), ParamType::Double)),
        ("[a-z]{1,6}", text.clone()).prop_map(|(n, v)| Param::new(n, v, ParamType::String)),
        ("[a-z]{1,6}", prop::collection::vec(any::<i32>(), 0..4)).prop_map(|(n, v)| {
            let items: Vec<String> = v.iter().map(i32::to_string).collect();
            Param::new(n, items.join(","), ParamType::IntArray)
        }),
    ];
    let stamp = (
        1u8..=28,
        1u8..=12,
        2000u16..2100,
        1u8..=12,
        0u8..60,
        0u8..60,
        any::<bool>(),
    )
        .prop_map(|(d, m, y, h, mi, s, pm)| {
            format!("{d}/{m}/{y} {h:02}:{mi:02}:{s:02}{}", if pm { "PM" } else { "AM" })
        });
    (
        ip.clone(),
        ip,
        any::<u32>(),
        any::<u32>(),
        "[a-zA-Z][a-zA-Z0-9_]{0,10}",
        prop::collection::vec(param, 0..5),
        stamp,
    )
        .prop_map(|(sip, dip, sid, did, f, params, stamp)| EclRequest {
            source_ip: sip,
            destination_ip: dip,
            source_id: sid.into(),
            destination_id: did.into(),
            function_invoked: f,
            params,
            stamp,
            version: "1.0".into(),
        })
}

/// Returns the number of requests checked.
pub fn round_trips(cases: u32) -> Result<u32, String> {
    let mut runner = TestRunner::new(Config {
        cases,
        failure_persistence: None,
        ..Config::default()
    });
    let key = key();
    runner
        .run(&request_strategy(), |req| {
            let doc = encrypt_request_payload(&req, &key).map_err(|e| TestCaseError::fail(e.to_string()))?;
            let back = decrypt_request_payload(&doc, &key).map_err(|e| TestCaseError::fail(e.to_string()))?;
            prop_assert_eq!(back, req);
            Ok(())
        })
        .map_err(|e| e.to_string())?;
    Ok(cases)
}

pub fn shape() -> Result<(), String> {
    let req = parse_request(include_str!("../../../../samples/max-request.xml")).map_err(|e| e.to_string())?;
    let doc = encrypt_request_payload(&req, &key()).map_err(|e| e.to_string())?;
    let parsed = roxmltree::Document::parse(&doc).map_err(|e| e.to_string())?;
    let children: Vec<_> = parsed.root_element().children().filter(|c| c.is_element()).collect();
    let names: Vec<_> = children.iter().map(|c| c.tag_name().name()).collect();
    let want = [
        "sourceIP",
        "destinationIP",
        "sourceID",
        "destinationID",
        "EncryptedData",
        "EncryptedData",
        "stamp",
        "version",
    ];
    if names != want {
        return Err(format!("children {names:?}"));
    }
    for block in &children[4..6] {
        if block.attribute("Type") != Some(ELEMENT_TYPE_URI) || block.lookup_namespace_uri(None) != Some(XMLENC_NS) {
            return Err("EncryptedData Type or xmlns URI differs".into());
        }
    }
    let clear = [
        ("sourceIP", "192.168.1.20"),
        ("destinationIP", "192.168.1.177"),
        ("sourceID", "24"),
        ("destinationID", "91"),
        ("stamp", "11/4/2011 09:32:10PM"),
        ("version", "1.0"),
    ];
    for (name, text) in clear {
        let node = children.iter().find(|c| c.tag_name().name() == name).unwrap();
        if node.text() != Some(text) {
            return Err(format!("metadata {name} is not in the clear"));
        }
    }
    if doc.contains("Max") || doc.contains("<name>") {
        return Err("payload leaked".into());
    }
    Ok(())
}

pub fn corruptions() -> Result<usize, String> {
    let element = "<functionInvoked>Max</functionInvoked>";
    let enc = encrypt_element_with(element, &key(), &FixedIv([0, 1, 2, 3, 4, 5, 6, 7])).map_err(|e| e.to_string())?;
    if enc.cipher_value != CIPHER_VALUE {
        return Err("fixed-IV ciphertext differs from the oracle".into());
    }
    for (pos, c) in FAILING_CORRUPTIONS {
        let mut chars: Vec<char> = CIPHER_VALUE.chars().collect();
        chars[pos] = c;
        let tampered = EncryptedPayload {
            cipher_value: chars.into_iter().collect(),
        };
        match decrypt_element(&tampered, &key()) {
            Err(CryptoError::BadPadding) => {}
            other => return Err(format!("corruption {pos}->{c}: {other:?}")),
        }
    }
    Ok(FAILING_CORRUPTIONS.len())
}
