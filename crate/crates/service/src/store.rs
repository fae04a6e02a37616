//! Durable storage. The journal of accepted engine commands is the source of
//! truth; all read models are rebuilt from it on start.

use std::fs::{File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::Serialize;

use cogniplay_core::platform::JournalEntry;

use crate::auth::Account;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("io: {0}")]
    Io(#[from] io::Error),
    #[error("{file} line {line}: {message}")]
    Corrupt {
        file: String,
        line: usize,
        message: String,
    },
}

#[derive(Debug, Default, Clone)]
pub struct Snapshot {
    pub accounts: Vec<Account>,
    pub journal: Vec<JournalEntry>,
}

pub trait Store: Send {
    fn load(&mut self) -> Result<Snapshot, StoreError>;
    fn append_account(&mut self, account: &Account) -> Result<(), StoreError>;
    fn append_entry(&mut self, entry: &JournalEntry) -> Result<(), StoreError>;
}

pub const ACCOUNTS_FILE: &str = "accounts.jsonl";
pub const JOURNAL_FILE: &str = "journal.jsonl";

/// Two append-only JSON-lines files, fsynced per record.
#[derive(Debug)]
pub struct FileStore {
    dir: PathBuf,
}

impl FileStore {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        std::fs::create_dir_all(&dir)?;
        Ok(Self { dir })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn append<T: Serialize>(&self, name: &str, value: &T) -> Result<(), StoreError> {
        let mut line = serde_json::to_string(value).expect("record serializes");
        line.push('\n');
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(self.dir.join(name))?;
        f.write_all(line.as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    /// Parse a JSON-lines file. A final line without its newline is a write
    /// that never finished; it is cut off rather than treated as corruption.
    fn read<T: DeserializeOwned>(&self, name: &str) -> Result<Vec<T>, StoreError> {
        let path = self.dir.join(name);
        let src = match std::fs::read_to_string(&path) {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        let complete = match src.rfind('\n') {
            Some(i) => i + 1,
            None => 0,
        };
        if complete < src.len() {
            tracing::warn!(file = name, bytes = src.len() - complete, "dropping torn final record");
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(complete as u64)?;
            f.sync_data()?;
        }
        src[..complete]
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
            .map(|(i, l)| {
                serde_json::from_str(l).map_err(|e| StoreError::Corrupt {
                    file: name.into(),
                    line: i + 1,
                    message: e.to_string(),
                })
            })
            .collect()
    }
}

impl Store for FileStore {
    fn load(&mut self) -> Result<Snapshot, StoreError> {
        if let Ok(d) = File::open(&self.dir) {
            // Make the directory entries themselves durable.
            let _ = d.sync_all();
        }
        Ok(Snapshot {
            accounts: self.read(ACCOUNTS_FILE)?,
            journal: self.read(JOURNAL_FILE)?,
        })
    }

    fn append_account(&mut self, account: &Account) -> Result<(), StoreError> {
        self.append(ACCOUNTS_FILE, account)
    }

    fn append_entry(&mut self, entry: &JournalEntry) -> Result<(), StoreError> {
        self.append(JOURNAL_FILE, entry)
    }
}

/// In-memory store. Clones share data, and writes can be made to fail on
/// demand for testing the recovery path.
#[derive(Debug, Clone, Default)]
pub struct MemoryStore {
    data: Arc<std::sync::Mutex<Snapshot>>,
    fail: Arc<AtomicBool>,
}

impl MemoryStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn fail_writes(&self, fail: bool) {
        self.fail.store(fail, Ordering::SeqCst);
    }

    pub fn snapshot(&self) -> Snapshot {
        self.data.lock().expect("store lock").clone()
    }

    fn check(&self) -> Result<(), StoreError> {
        if self.fail.load(Ordering::SeqCst) {
            Err(io::Error::other("injected write failure").into())
        } else {
            Ok(())
        }
    }
}

impl Store for MemoryStore {
    fn load(&mut self) -> Result<Snapshot, StoreError> {
        Ok(self.snapshot())
    }

    fn append_account(&mut self, account: &Account) -> Result<(), StoreError> {
        self.check()?;
        self.data.lock().expect("store lock").accounts.push(account.clone());
        Ok(())
    }

    fn append_entry(&mut self, entry: &JournalEntry) -> Result<(), StoreError> {
        self.check()?;
        self.data.lock().expect("store lock").journal.push(entry.clone());
        Ok(())
    }
}
