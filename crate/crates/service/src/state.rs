use std::collections::HashMap;
use std::io;
use std::path::Path;
use std::sync::{Arc, Mutex, RwLock};
use std::time::Instant;

use specassist_core::kb::FlushReport;
use specassist_core::{KnowledgeBase, LearnedSample, Session};

use crate::config::ServiceConfig;

pub(crate) struct SessionSlot {
    /// `None` once the session has been closed.
    pub session: Option<Session>,
    pub last_seen: Instant,
}

pub(crate) type SharedSlot = Arc<tokio::sync::Mutex<SessionSlot>>;

/// Shared service state. The knowledge base is an immutable snapshot behind
/// a pointer swap: requests clone the `Arc` and keep that version for the
/// whole request.
pub struct AppState {
    pub config: ServiceConfig,
    kb: RwLock<Arc<KnowledgeBase>>,
    sessions: Mutex<HashMap<String, SharedSlot>>,
    queue: Mutex<Vec<LearnedSample>>,
    flush_lock: tokio::sync::Mutex<()>,
}

impl AppState {
    pub fn new(config: ServiceConfig, kb: KnowledgeBase) -> Arc<Self> {
        Arc::new(Self {
            config,
            kb: RwLock::new(Arc::new(kb)),
            sessions: Mutex::new(HashMap::new()),
            queue: Mutex::new(Vec::new()),
            flush_lock: tokio::sync::Mutex::new(()),
        })
    }

    pub fn kb(&self) -> Arc<KnowledgeBase> {
        self.kb.read().expect("kb lock").clone()
    }

    pub fn queue_len(&self) -> usize {
        self.queue.lock().expect("queue lock").len()
    }

    pub fn session_count(&self) -> usize {
        self.sessions.lock().expect("session lock").len()
    }

    pub(crate) fn open_session(&self, user: &str) -> String {
        let session = Session::open(user);
        let id = session.id().to_string();
        let slot = SessionSlot { session: Some(session), last_seen: Instant::now() };
        self.sessions.lock().expect("session lock").insert(id.clone(), Arc::new(tokio::sync::Mutex::new(slot)));
        id
    }

    pub(crate) fn session(&self, id: &str) -> Option<SharedSlot> {
        self.sessions.lock().expect("session lock").get(id).cloned()
    }

    /// Closes a session and queues its samples. `false` if it was unknown.
    pub(crate) async fn close_session(&self, id: &str) -> bool {
        let Some(slot) = self.sessions.lock().expect("session lock").remove(id) else {
            return false;
        };
        let mut slot = slot.lock().await;
        match slot.session.take() {
            Some(session) => {
                self.queue.lock().expect("queue lock").extend(session.close_session());
                true
            }
            None => false,
        }
    }

    /// Closes sessions idle for longer than the configured TTL.
    pub async fn expire_sessions(&self) -> usize {
        let ttl = self.config.session_ttl();
        let ids: Vec<String> = self.sessions.lock().expect("session lock").keys().cloned().collect();
        let mut closed = 0;
        for id in ids {
            let Some(slot) = self.session(&id) else { continue };
            let idle = slot.lock().await.last_seen.elapsed() >= ttl;
            if idle && self.close_session(&id).await {
                closed += 1;
            }
        }
        closed
    }

    /// Validates queued samples against the current snapshot and publishes
    /// the next one. Flushes are serialized; sessions keep reading the old
    /// snapshot until their next request.
    pub async fn flush(&self) -> io::Result<FlushReport> {
        let _guard = self.flush_lock.lock().await;
        let samples = std::mem::take(&mut *self.queue.lock().expect("queue lock"));
        let current = self.kb();
        let (next, report) = current.flush_learned(&samples, &self.config.validation);
        if let Some(path) = &self.config.kb_path {
            if let Err(e) = write_atomically(path, &next.save()) {
                let mut queue = self.queue.lock().expect("queue lock");
                let newer = std::mem::replace(&mut *queue, samples);
                queue.extend(newer);
                return Err(e);
            }
        }
        *self.kb.write().expect("kb lock") = Arc::new(next);
        Ok(report)
    }
}

fn write_atomically(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}
