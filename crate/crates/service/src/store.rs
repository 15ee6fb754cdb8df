//! Sessions as JSON values in a single-file embedded store.

use std::path::Path;

use redb::{Database, ReadableDatabase, ReadableTable, TableDefinition};

use crate::session::Session;

const SESSIONS: TableDefinition<&str, &str> = TableDefinition::new("sessions");
const COUNTERS: TableDefinition<&str, u64> = TableDefinition::new("counters");

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("store: {0}")]
    Backend(String),
    #[error("stored session {id} is unreadable: {message}")]
    Corrupt { id: String, message: String },
}

fn backend(e: impl std::fmt::Display) -> StoreError {
    StoreError::Backend(e.to_string())
}

pub struct SessionStore {
    db: Database,
}

impl SessionStore {
    pub fn open(path: &Path) -> Result<Self, StoreError> {
        let db = Database::create(path).map_err(backend)?;
        let tx = db.begin_write().map_err(backend)?;
        tx.open_table(SESSIONS).map_err(backend)?;
        tx.open_table(COUNTERS).map_err(backend)?;
        tx.commit().map_err(backend)?;
        Ok(SessionStore { db })
    }

    pub fn get(&self, id: &str) -> Result<Option<Session>, StoreError> {
        let tx = self.db.begin_read().map_err(backend)?;
        let table = tx.open_table(SESSIONS).map_err(backend)?;
        let Some(raw) = table.get(id).map_err(backend)? else {
            return Ok(None);
        };
        serde_json::from_str(raw.value())
            .map(Some)
            .map_err(|e| StoreError::Corrupt { id: id.to_owned(), message: e.to_string() })
    }

    /// Writes several sessions in one transaction.
    pub fn put_all(&self, sessions: &[&Session]) -> Result<(), StoreError> {
        let tx = self.db.begin_write().map_err(backend)?;
        {
            let mut table = tx.open_table(SESSIONS).map_err(backend)?;
            for s in sessions {
                let json = serde_json::to_string(s).expect("sessions serialize");
                table.insert(s.id.as_str(), json.as_str()).map_err(backend)?;
            }
        }
        tx.commit().map_err(backend)
    }

    pub fn put(&self, session: &Session) -> Result<(), StoreError> {
        self.put_all(&[session])
    }

    pub fn ids(&self) -> Result<Vec<String>, StoreError> {
        let tx = self.db.begin_read().map_err(backend)?;
        let table = tx.open_table(SESSIONS).map_err(backend)?;
        let mut out = Vec::new();
        for entry in table.iter().map_err(backend)? {
            let (k, _) = entry.map_err(backend)?;
            out.push(k.value().to_owned());
        }
        Ok(out)
    }

    /// Increments a named counter and returns its previous value.
    pub fn bump(&self, name: &str) -> Result<u64, StoreError> {
        let tx = self.db.begin_write().map_err(backend)?;
        let prev = {
            let mut table = tx.open_table(COUNTERS).map_err(backend)?;
            let prev = table.get(name).map_err(backend)?.map_or(0, |v| v.value());
            table.insert(name, prev + 1).map_err(backend)?;
            prev
        };
        tx.commit().map_err(backend)?;
        Ok(prev)
    }

    pub fn counter(&self, name: &str) -> Result<u64, StoreError> {
        let tx = self.db.begin_read().map_err(backend)?;
        let table = tx.open_table(COUNTERS).map_err(backend)?;
        Ok(table.get(name).map_err(backend)?.map_or(0, |v| v.value()))
    }
}
