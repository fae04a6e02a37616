use std::collections::HashMap;

use chrono::{DateTime, Duration, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use cogniplay_core::ids::LearnerId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Learner,
    Instructor,
    Admin,
}

impl Role {
    pub fn is_staff(self) -> bool {
        matches!(self, Self::Instructor | Self::Admin)
    }
}

/// A stored account. The user id doubles as the learner id in the engine.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Account {
    pub user_id: u64,
    pub user_name: String,
    pub user_mail: String,
    pub role: Role,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gender: Option<String>,
    pub credential: String,
    pub created_at: DateTime<Utc>,
}

impl Account {
    pub fn learner_id(&self) -> LearnerId {
        LearnerId(self.user_id)
    }
}

/// An account as returned over the wire.
#[derive(Debug, Clone, Serialize)]
pub struct PublicAccount<'a> {
    pub user_id: u64,
    pub user_name: &'a str,
    pub user_mail: &'a str,
    pub role: Role,
    pub created_at: DateTime<Utc>,
}

impl<'a> From<&'a Account> for PublicAccount<'a> {
    fn from(a: &'a Account) -> Self {
        Self {
            user_id: a.user_id,
            user_name: &a.user_name,
            user_mail: &a.user_mail,
            role: a.role,
            created_at: a.created_at,
        }
    }
}

const ITERATIONS: u32 = 4096;
const SCHEME: &str = "sha256i";

fn stretch(salt: &[u8], password: &str, iterations: u32) -> Vec<u8> {
    let mut h = Sha256::new();
    h.update(salt);
    h.update(password.as_bytes());
    let mut out = h.finalize().to_vec();
    for _ in 1..iterations {
        let mut h = Sha256::new();
        h.update(&out);
        h.update(salt);
        out = h.finalize().to_vec();
    }
    out
}

/// Salted, iterated SHA-256 in the form `sha256i$<iters>$<salt>$<hash>`.
pub fn hash_password(password: &str) -> String {
    let salt = *uuid::Uuid::new_v4().as_bytes();
    format!(
        "{SCHEME}${ITERATIONS}${}${}",
        hex::encode(salt),
        hex::encode(stretch(&salt, password, ITERATIONS))
    )
}

pub fn verify_password(password: &str, stored: &str) -> bool {
    let parts: Vec<&str> = stored.split('$').collect();
    let [scheme, iters, salt, hash] = parts[..] else {
        return false;
    };
    let (Ok(iters), Ok(salt), Ok(hash)) = (iters.parse::<u32>(), hex::decode(salt), hex::decode(hash))
    else {
        return false;
    };
    if scheme != SCHEME || iters == 0 {
        return false;
    }
    let got = stretch(&salt, password, iters);
    got.len() == hash.len() && got.iter().zip(&hash).fold(0u8, |acc, (a, b)| acc | (a ^ b)) == 0
}

pub fn valid_mail(mail: &str) -> bool {
    let Some((local, domain)) = mail.split_once('@') else {
        return false;
    };
    !local.is_empty()
        && domain.contains('.')
        && !domain.starts_with('.')
        && !domain.ends_with('.')
        && !mail.chars().any(|c| c.is_whitespace())
        && !domain.contains('@')
}

#[derive(Debug, Clone)]
pub struct Session {
    pub user_id: u64,
    pub expires_at: DateTime<Utc>,
}

/// Bearer tokens. Held in memory only; a restart logs everyone out.
#[derive(Debug, Default)]
pub struct Sessions {
    by_token: HashMap<String, Session>,
}

impl Sessions {
    pub fn issue(&mut self, user_id: u64, now: DateTime<Utc>, ttl_secs: i64) -> (String, Session) {
        self.by_token.retain(|_, s| s.expires_at > now);
        let token = uuid::Uuid::new_v4().simple().to_string();
        let session = Session {
            user_id,
            expires_at: now + Duration::seconds(ttl_secs),
        };
        self.by_token.insert(token.clone(), session.clone());
        (token, session)
    }

    pub fn resolve(&self, token: &str, now: DateTime<Utc>) -> Option<u64> {
        self.by_token
            .get(token)
            .filter(|s| s.expires_at > now)
            .map(|s| s.user_id)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::TimeZone;

    #[test]
    fn passwords_verify_and_salt_differs() {
        let a = hash_password("hunter2");
        let b = hash_password("hunter2");
        assert_ne!(a, b);
        assert!(verify_password("hunter2", &a));
        assert!(!verify_password("hunter3", &a));
        assert!(!verify_password("hunter2", "garbage"));
        assert!(!verify_password("hunter2", "sha256i$0$00$00"));
    }

    #[test]
    fn mail_shape() {
        assert!(valid_mail("a@b.org"));
        for bad in ["", "ab.org", "@b.org", "a@b", "a@.org", "a b@c.org", "a@b@c.org"] {
            assert!(!valid_mail(bad), "{bad}");
        }
    }

    #[test]
    fn sessions_expire() {
        let t0 = Utc.with_ymd_and_hms(2022, 3, 1, 0, 0, 0).unwrap();
        let mut s = Sessions::default();
        let (tok, _) = s.issue(7, t0, 60);
        assert_eq!(s.resolve(&tok, t0 + Duration::seconds(59)), Some(7));
        assert_eq!(s.resolve(&tok, t0 + Duration::seconds(60)), None);
        assert_eq!(s.resolve("nope", t0), None);
    }
}
