//! HTTP service around the course engine, with accounts, sessions and a
//! file-backed journal.

pub mod api;
pub mod auth;
pub mod config;
pub mod error;
pub mod store;

use std::collections::HashMap;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::http::StatusCode;
use chrono::{DateTime, Utc};

use cogniplay_core::ids::LearnerId;
use cogniplay_core::platform::{Command, Outcome, Platform, PlatformError, PlatformSetup};

use auth::{Account, Role, Sessions};
use config::ServiceConfig;
use error::ApiError;
use store::{Store, StoreError};

pub type Clock = Arc<dyn Fn() -> DateTime<Utc> + Send + Sync>;

pub fn system_clock() -> Clock {
    Arc::new(Utc::now)
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("journal does not replay: {0}")]
    Replay(PlatformError),
}

pub struct Inner {
    pub platform: Platform,
    setup: PlatformSetup,
    accounts: Vec<Account>,
    by_name: HashMap<String, u64>,
    by_mail: HashMap<String, u64>,
    sessions: Sessions,
    store: Box<dyn Store>,
    config: ServiceConfig,
}

/// Shared handle. One lock guards the engine and the store, so journal
/// order on disk always equals apply order.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Mutex<Inner>>,
    clock: Clock,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct LoginGrant {
    pub token: String,
    pub expires_at: DateTime<Utc>,
    pub user_id: u64,
    pub role: Role,
}

fn validate_account(new: &NewAccount) -> Result<(String, String), ApiError> {
    let name = new.user_name.trim().to_string();
    let mail = new.user_mail.trim().to_string();
    let invalid = |m: &str| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_account", m);
    if name.is_empty() || name.len() > 64 {
        return Err(invalid("user_name must be 1 to 64 characters"));
    }
    if !auth::valid_mail(&mail) {
        return Err(invalid("user_mail is not a valid address"));
    }
    if new.password.is_empty() {
        return Err(invalid("password must not be empty"));
    }
    Ok((name, mail))
}

pub struct NewAccount {
    pub user_name: String,
    pub user_mail: String,
    pub password: String,
    pub role: Role,
    pub gender: Option<String>,
}

impl AppState {
    pub fn new(config: ServiceConfig, mut store: Box<dyn Store>, clock: Clock) -> Result<Self, StartError> {
        let setup = config.platform_setup()?;
        let snap = store.load()?;
        let platform = Platform::replay(setup.clone(), &snap.journal).map_err(StartError::Replay)?;
        let mut inner = Inner {
            platform,
            setup,
            accounts: Vec::new(),
            by_name: HashMap::new(),
            by_mail: HashMap::new(),
            sessions: Sessions::default(),
            store,
            config,
        };
        for a in snap.accounts {
            inner.index(a);
        }
        let state = Self {
            inner: Arc::new(Mutex::new(inner)),
            clock,
        };
        state.bootstrap_admin()?;
        Ok(state)
    }

    /// Build from the environment-derived config, with a file store when a
    /// storage path is set.
    pub fn from_config(config: ServiceConfig) -> Result<Self, StartError> {
        let store: Box<dyn Store> = match &config.storage {
            Some(dir) => Box::new(store::FileStore::open(dir)?),
            None => Box::new(store::MemoryStore::new()),
        };
        Self::new(config, store, system_clock())
    }

    fn bootstrap_admin(&self) -> Result<(), StoreError> {
        let mut g = self.lock();
        let Some((name, mail, password)) = g.config.bootstrap_admin.clone() else {
            return Ok(());
        };
        if g.accounts.iter().any(|a| a.role == Role::Admin) || g.by_name.contains_key(&name) {
            return Ok(());
        }
        let now = (self.clock)();
        g.create_account(
            NewAccount {
                user_name: name,
                user_mail: mail,
                password,
                role: Role::Admin,
                gender: None,
            },
            now,
        )
        .map(|_| ())
        .map_err(|e| StoreError::Io(std::io::Error::other(e.message)))
    }

    pub fn lock(&self) -> MutexGuard<'_, Inner> {
        self.inner.lock().unwrap_or_else(|p| p.into_inner())
    }

    pub fn now(&self) -> DateTime<Utc> {
        (self.clock)()
    }

    /// Create an account. The password is hashed before taking the lock.
    pub fn register(&self, new: NewAccount) -> Result<Account, ApiError> {
        let (name, mail) = validate_account(&new)?;
        let credential = auth::hash_password(&new.password);
        let now = self.now();
        self.lock()
            .insert_account(name, mail, new.role, new.gender, credential, now)
            .cloned()
    }

    /// Exchange a name or mail plus password for a bearer token.
    pub fn login(&self, login: &str, password: &str) -> Result<LoginGrant, ApiError> {
        let found = self
            .lock()
            .find_login(login)
            .map(|a| (a.user_id, a.role, a.credential.clone()));
        let Some((user_id, role, _)) =
            found.filter(|(_, _, c)| auth::verify_password(password, c))
        else {
            return Err(ApiError::new(
                StatusCode::UNAUTHORIZED,
                "bad_credentials",
                "unknown user or wrong password",
            ));
        };
        let now = self.now();
        let mut g = self.lock();
        let ttl = g.config.session_ttl_secs;
        let (token, session) = g.sessions.issue(user_id, now, ttl);
        Ok(LoginGrant {
            token,
            expires_at: session.expires_at,
            user_id,
            role,
        })
    }

    /// Lock with every timer due by now already expired, so reads see
    /// auto-submitted attempts.
    pub fn settled(&self) -> Result<MutexGuard<'_, Inner>, ApiError> {
        let now = self.now();
        let mut g = self.lock();
        g.settle(now)?;
        Ok(g)
    }

    /// Expire due timers; run periodically so expiry does not wait for a request.
    pub fn settle(&self) -> Result<(), ApiError> {
        self.settled().map(|_| ())
    }

    /// Engine state as JSON, for restart comparisons.
    pub fn state_json(&self) -> String {
        self.lock().platform.state_json()
    }
}

impl Inner {
    fn index(&mut self, a: Account) {
        self.by_name.insert(a.user_name.clone(), a.user_id);
        self.by_mail.insert(a.user_mail.to_lowercase(), a.user_id);
        self.accounts.push(a);
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn account(&self, user_id: u64) -> Option<&Account> {
        user_id
            .checked_sub(1)
            .and_then(|i| self.accounts.get(i as usize))
    }

    fn create_account(&mut self, new: NewAccount, now: DateTime<Utc>) -> Result<&Account, ApiError> {
        let (name, mail) = validate_account(&new)?;
        self.insert_account(name, mail, new.role, new.gender, auth::hash_password(&new.password), now)
    }

    fn insert_account(
        &mut self,
        name: String,
        mail: String,
        role: Role,
        gender: Option<String>,
        credential: String,
        now: DateTime<Utc>,
    ) -> Result<&Account, ApiError> {
        if self.by_name.contains_key(&name) || self.by_mail.contains_key(&mail.to_lowercase()) {
            return Err(ApiError::new(
                StatusCode::CONFLICT,
                "duplicate_account",
                "user_name or user_mail already registered",
            ));
        }
        let account = Account {
            user_id: self.accounts.len() as u64 + 1,
            user_name: name,
            user_mail: mail,
            role,
            gender: gender.filter(|g| !g.trim().is_empty()),
            credential,
            created_at: now,
        };
        self.store.append_account(&account)?;
        self.index(account);
        Ok(self.accounts.last().expect("just pushed"))
    }

    fn find_login(&self, login: &str) -> Option<&Account> {
        self.by_name
            .get(login.trim())
            .or_else(|| self.by_mail.get(&login.trim().to_lowercase()))
            .and_then(|&id| self.account(id))
    }

    pub fn authenticate(&self, token: Option<&str>, now: DateTime<Utc>) -> Result<Account, ApiError> {
        token
            .and_then(|t| self.sessions.resolve(t, now))
            .and_then(|id| self.account(id))
            .cloned()
            .ok_or_else(ApiError::unauthorized)
    }

    pub fn settle(&mut self, now: DateTime<Utc>) -> Result<(), ApiError> {
        if self.platform.next_deadline().is_some_and(|d| d <= now) {
            self.apply_and_persist(Command::Tick { at: now })?;
        }
        Ok(())
    }

    /// Run an engine command stamped no earlier than the learner's last
    /// activity, expiring due timers first. Accepted commands are persisted
    /// before returning; if that fails, memory is rebuilt from disk so the
    /// two never disagree.
    pub fn execute(
        &mut self,
        learner: Option<LearnerId>,
        now: DateTime<Utc>,
        build: impl FnOnce(DateTime<Utc>) -> Command,
    ) -> Result<Outcome, ApiError> {
        let at = learner
            .and_then(|l| self.platform.last_activity(l))
            .map_or(now, |last| last.max(now));
        self.settle(at)?;
        self.apply_and_persist(build(at))
    }

    fn apply_and_persist(&mut self, command: Command) -> Result<Outcome, ApiError> {
        let outcome = self.platform.apply(command)?;
        let entry = self.platform.journal().last().expect("accepted command is journaled");
        if let Err(e) = self.store.append_entry(entry) {
            self.recover();
            return Err(e.into());
        }
        Ok(outcome)
    }

    fn recover(&mut self) {
        let rebuilt = self
            .store
            .load()
            .map_err(|e| e.to_string())
            .and_then(|s| Platform::replay(self.setup.clone(), &s.journal).map_err(|e| e.to_string()));
        match rebuilt {
            Ok(p) => self.platform = p,
            Err(e) => tracing::error!(error = %e, "could not rebuild engine from storage"),
        }
    }
}
