//! Bounded agent pool. Tokio's semaphore queues waiters FIFO, which gives the
//! admission order.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use tokio::sync::{OwnedSemaphorePermit, Semaphore};

#[derive(Debug)]
struct Gauges {
    active: AtomicUsize,
    peak: AtomicUsize,
    waiting: AtomicUsize,
}

#[derive(Debug, Clone)]
pub struct AgentPool {
    max_agents: usize,
    permits: Arc<Semaphore>,
    gauges: Arc<Gauges>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("no free agent within {0:?}")]
pub struct QueueTimeout(pub Duration);

/// Held while an adapter runs; dropping it frees the agent.
#[derive(Debug)]
pub struct AgentLease {
    _permit: OwnedSemaphorePermit,
    gauges: Arc<Gauges>,
}

impl Drop for AgentLease {
    fn drop(&mut self) {
        self.gauges.active.fetch_sub(1, Ordering::SeqCst);
    }
}

struct Waiting<'a>(&'a AtomicUsize);

impl Drop for Waiting<'_> {
    fn drop(&mut self) {
        self.0.fetch_sub(1, Ordering::SeqCst);
    }
}

impl AgentPool {
    /// # Panics
    /// If `max_agents` is zero.
    pub fn new(max_agents: usize) -> Self {
        assert!(max_agents > 0, "max_agents must be positive");
        Self {
            max_agents,
            permits: Arc::new(Semaphore::new(max_agents)),
            gauges: Arc::new(Gauges {
                active: AtomicUsize::new(0),
                peak: AtomicUsize::new(0),
                waiting: AtomicUsize::new(0),
            }),
        }
    }

    pub fn max_agents(&self) -> usize {
        self.max_agents
    }

    pub fn active(&self) -> usize {
        self.gauges.active.load(Ordering::SeqCst)
    }

    /// Highest `active` value observed since creation or the last reset.
    pub fn peak(&self) -> usize {
        self.gauges.peak.load(Ordering::SeqCst)
    }

    pub fn reset_peak(&self) {
        self.gauges.peak.store(self.active(), Ordering::SeqCst);
    }

    /// Requests currently queued for an agent.
    pub fn waiting(&self) -> usize {
        self.gauges.waiting.load(Ordering::SeqCst)
    }

    pub async fn acquire(&self, queue_timeout: Duration) -> Result<AgentLease, QueueTimeout> {
        self.gauges.waiting.fetch_add(1, Ordering::SeqCst);
        let waiting = Waiting(&self.gauges.waiting);
        let permit = tokio::time::timeout(queue_timeout, self.permits.clone().acquire_owned())
            .await
            .map_err(|_| QueueTimeout(queue_timeout))?
            .expect("agent semaphore is never closed");
        drop(waiting);
        let now = self.gauges.active.fetch_add(1, Ordering::SeqCst) + 1;
        self.gauges.peak.fetch_max(now, Ordering::SeqCst);
        Ok(AgentLease {
            _permit: permit,
            gauges: self.gauges.clone(),
        })
    }
}
