use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use nextword_core::ModelBundle64;

/// Request counters; the only mutable server state.
#[derive(Debug, Default)]
pub struct Metrics {
    pub suggest: AtomicU64,
    pub complete: AtomicU64,
    pub health: AtomicU64,
    pub errors: AtomicU64,
}

impl Metrics {
    pub(crate) fn bump(counter: &AtomicU64) {
        counter.fetch_add(1, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> [u64; 4] {
        [&self.suggest, &self.complete, &self.health, &self.errors].map(|c| c.load(Ordering::Relaxed))
    }
}

#[derive(Debug, Default)]
struct Inner {
    bundle: OnceLock<ModelBundle64>,
    metrics: Metrics,
}

/// Shared handle to the (write-once) bundle and the counters.
#[derive(Clone, Debug, Default)]
pub struct AppState {
    inner: Arc<Inner>,
}

impl AppState {
    /// A state with no bundle yet; every endpoint answers 503 until
    /// [`AppState::install`] is called.
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_bundle(bundle: ModelBundle64) -> Self {
        let state = Self::new();
        state.install(bundle);
        state
    }

    /// Installs the bundle. A second call is ignored: the bundle never changes once served.
    pub fn install(&self, bundle: ModelBundle64) {
        if self.inner.bundle.set(bundle).is_err() {
            log::warn!("bundle already installed; ignoring replacement");
        }
    }

    pub fn bundle(&self) -> Option<&ModelBundle64> {
        self.inner.bundle.get()
    }

    pub fn metrics(&self) -> &Metrics {
        &self.inner.metrics
    }
}
