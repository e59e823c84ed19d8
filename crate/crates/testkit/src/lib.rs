//! Test support for the ECU gateway: mock backend services, a client that
//! speaks both gateway transports, a transcript recorder, and XML
//! canonical-equality for golden-file comparison.

mod canonical;
mod client;
mod mocks;
mod transcript;

pub use canonical::{canonical_diff, canonical_eq};
pub use client::{client_send, client_send_raw, ClientError, EcuAddress};
pub use mocks::{
    rest_echo_mock, soap_dictionary_mock, socket_calc_mock, spawn_mock, Failure, MockBehavior, MockKind, MockServer,
    APPLE_MEANING, DICTIONARY_NS, UNKNOWN_WORD,
};
pub use transcript::TranscriptRecorder;

use std::net::SocketAddr;

use ecu_core::registry::{Endpoint, Registry};

/// Points every backend of `service_id` at `addrs`, keeping each record's
/// existing URL path.
pub fn rebind_backends(registry: &Registry, service_id: u64, addrs: &[SocketAddr]) -> Registry {
    let records = registry.services().cloned().map(|mut r| {
        if r.service_id == service_id {
            let path = r.backends.first().and_then(|b| b.path.clone());
            r.backends = addrs
                .iter()
                .map(|a| Endpoint {
                    path: path.clone(),
                    ..Endpoint::new(a.ip().to_string(), a.port())
                })
                .collect();
        }
        r
    });
    Registry::from_records(records.collect::<Vec<_>>()).expect("rebinding keeps ids unique")
}

/// Golden transcript of the dictionary `whatIs("apple")` exchange.
pub mod golden {
    pub const ECL_REQUEST: &str = include_str!("../transcripts/whatis-ecl-request.xml");
    pub const SOAP_REQUEST: &str = include_str!("../transcripts/whatis-soap-request.xml");
    pub const SOAP_RESPONSE: &str = include_str!("../transcripts/whatis-soap-response.xml");
    pub const ECL_RESPONSE: &str = include_str!("../transcripts/whatis-ecl-response.xml");
}
