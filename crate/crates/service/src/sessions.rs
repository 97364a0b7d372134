use std::collections::HashMap;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use piqflow_core::feedback::GuidedSession;
use tokio::sync::Mutex as AsyncMutex;

pub struct Entry {
    pub session: GuidedSession,
    pub touched: Instant,
}

pub type Handle = Arc<AsyncMutex<Entry>>;

/// In-memory guided sessions. Idle sessions expire after `ttl`.
pub struct SessionStore {
    map: Mutex<HashMap<String, Handle>>,
    ttl: Duration,
}

impl SessionStore {
    pub fn new(ttl: Duration) -> Self {
        SessionStore {
            map: Mutex::new(HashMap::new()),
            ttl,
        }
    }

    pub fn create(&self) -> String {
        self.evict_expired();
        let id = uuid::Uuid::new_v4().to_string();
        let entry = Entry {
            session: GuidedSession::new(),
            touched: Instant::now(),
        };
        self.map
            .lock()
            .unwrap()
            .insert(id.clone(), Arc::new(AsyncMutex::new(entry)));
        id
    }

    pub fn get(&self, id: &str) -> Option<Handle> {
        self.evict_expired();
        self.map.lock().unwrap().get(id).cloned()
    }

    /// Drops idle sessions. A session busy with an event is never evicted.
    pub fn evict_expired(&self) {
        let ttl = self.ttl;
        self.map.lock().unwrap().retain(|id, handle| match handle.try_lock() {
            Ok(entry) => {
                let keep = entry.touched.elapsed() < ttl;
                if !keep {
                    log::debug!("session {id} expired");
                }
                keep
            }
            Err(_) => true,
        });
    }
}
