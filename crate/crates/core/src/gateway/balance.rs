use std::collections::HashMap;
use std::sync::Mutex;

use crate::registry::{Endpoint, ServiceRecord};

/// Per-service round-robin cursors, kept in memory only.
#[derive(Debug, Default)]
pub struct RoundRobin {
    cursors: Mutex<HashMap<u64, usize>>,
}

impl RoundRobin {
    pub fn new() -> Self {
        Self::default()
    }

    /// Next backend for `record`. Linearizable: concurrent callers never see
    /// the same cursor value.
    pub fn next_backend<'r>(&self, record: &'r ServiceRecord) -> &'r Endpoint {
        let n = record.backends.len();
        assert!(n > 0, "registry guarantees at least one backend");
        let mut cursors = self.cursors.lock().unwrap_or_else(|e| e.into_inner());
        let cursor = cursors.entry(record.service_id).or_insert(0);
        let i = *cursor % n;
        *cursor = (i + 1) % n;
        &record.backends[i]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::ReturnType;
    use crate::registry::{AdapterKind, FunctionSig};
    use std::sync::Arc;

    fn record(id: u64, ports: &[u16]) -> ServiceRecord {
        ServiceRecord {
            service_id: id,
            name: format!("S{id}"),
            advertised_ip: "10.0.0.1".into(),
            protocol: AdapterKind::Socket,
            backends: ports.iter().map(|p| Endpoint::new("127.0.0.1", *p)).collect(),
            soap_namespace: None,
            functions: vec![FunctionSig {
                name: "f".into(),
                params: vec![],
                return_type: ReturnType::Int,
            }],
        }
    }

    #[test]
    fn cycles_in_list_order() {
        let rr = RoundRobin::new();
        let r = record(1, &[1, 2, 3]);
        let ports: Vec<u16> = (0..6).map(|_| rr.next_backend(&r).port).collect();
        assert_eq!(ports, [1, 2, 3, 1, 2, 3]);
        let single = record(2, &[9]);
        assert!((0..4).all(|_| rr.next_backend(&single).port == 9));
    }

    #[test]
    fn services_have_independent_cursors() {
        let rr = RoundRobin::new();
        let (a, b) = (record(1, &[1, 2]), record(2, &[5, 6, 7]));
        assert_eq!(rr.next_backend(&a).port, 1);
        assert_eq!(rr.next_backend(&b).port, 5);
        assert_eq!(rr.next_backend(&a).port, 2);
        assert_eq!(rr.next_backend(&b).port, 6);
    }

    #[test]
    fn concurrent_selection_is_balanced() {
        let rr = Arc::new(RoundRobin::new());
        let r = Arc::new(record(1, &[1, 2, 3]));
        let handles: Vec<_> = (0..9)
            .map(|_| {
                let (rr, r) = (rr.clone(), r.clone());
                std::thread::spawn(move || (0..100).map(|_| rr.next_backend(&r).port).collect::<Vec<_>>())
            })
            .collect();
        let mut counts = HashMap::new();
        for h in handles {
            for p in h.join().unwrap() {
                *counts.entry(p).or_insert(0) += 1;
            }
        }
        assert_eq!(counts, HashMap::from([(1, 300), (2, 300), (3, 300)]));
    }
}
