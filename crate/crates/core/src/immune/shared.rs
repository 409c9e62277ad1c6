use std::sync::{Arc, RwLock};

use super::ClassifierState;

/// Single-writer, many-reader handle with snapshot isolation.
///
/// Readers take an `Arc` snapshot and classify against it without holding
/// any lock; a writer mutates a private copy and publishes it atomically, so
/// a reader never sees a half-applied update.
#[derive(Debug, Clone)]
pub struct SharedClassifier {
    current: Arc<RwLock<Arc<ClassifierState>>>,
    writer: Arc<std::sync::Mutex<()>>,
}

impl SharedClassifier {
    pub fn new(state: ClassifierState) -> Self {
        Self {
            current: Arc::new(RwLock::new(Arc::new(state))),
            writer: Arc::new(std::sync::Mutex::new(())),
        }
    }

    pub fn snapshot(&self) -> Arc<ClassifierState> {
        self.current.read().expect("state lock poisoned").clone()
    }

    /// Applies `f` to a copy of the current state and publishes the result.
    /// Writers are serialized; if `f` fails nothing is published.
    pub fn update<T, E>(
        &self,
        f: impl FnOnce(&mut ClassifierState) -> Result<T, E>,
    ) -> Result<T, E> {
        let _guard = self.writer.lock().expect("writer lock poisoned");
        let mut next = (*self.snapshot()).clone();
        let out = f(&mut next)?;
        *self.current.write().expect("state lock poisoned") = Arc::new(next);
        Ok(out)
    }
}
