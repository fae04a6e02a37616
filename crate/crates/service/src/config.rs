use std::net::SocketAddr;
use std::path::PathBuf;

use cogniplay_core::course::CourseGraph;
use cogniplay_core::platform::PlatformSetup;

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub bind: SocketAddr,
    /// Directory holding the account and journal files. `None` keeps
    /// everything in memory.
    pub storage: Option<PathBuf>,
    pub session_ttl_secs: i64,
    /// Overrides each course's own pass threshold.
    pub pass_threshold: Option<u8>,
    /// Course definition files; empty means the shipped course.
    pub course_files: Vec<PathBuf>,
    /// `name:mail:password` of an admin created on first start.
    pub bootstrap_admin: Option<(String, String, String)>,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            bind: ([127, 0, 0, 1], 8080).into(),
            storage: None,
            session_ttl_secs: 8 * 3600,
            pass_threshold: None,
            course_files: Vec::new(),
            bootstrap_admin: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{var}: {message}")]
pub struct ConfigError {
    pub var: &'static str,
    pub message: String,
}

fn err(var: &'static str, message: impl ToString) -> ConfigError {
    ConfigError {
        var,
        message: message.to_string(),
    }
}

impl ServiceConfig {
    pub fn from_env() -> Result<Self, ConfigError> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    /// Reads settings through `get`, so tests need not touch the process
    /// environment.
    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, ConfigError> {
        let mut cfg = Self::default();
        if let Some(v) = get("COGNIPLAY_BIND") {
            cfg.bind = v.parse().map_err(|e| err("COGNIPLAY_BIND", e))?;
        }
        if let Some(v) = get("COGNIPLAY_STORAGE") {
            cfg.storage = Some(PathBuf::from(v));
        }
        if let Some(v) = get("COGNIPLAY_SESSION_TTL_SECS") {
            cfg.session_ttl_secs = v
                .parse()
                .ok()
                .filter(|&s: &i64| s > 0)
                .ok_or_else(|| err("COGNIPLAY_SESSION_TTL_SECS", "expected a positive integer"))?;
        }
        if let Some(v) = get("COGNIPLAY_PASS_THRESHOLD") {
            cfg.pass_threshold = Some(
                v.parse()
                    .ok()
                    .filter(|t: &u8| (1..=100).contains(t))
                    .ok_or_else(|| err("COGNIPLAY_PASS_THRESHOLD", "expected 1..=100"))?,
            );
        }
        if let Some(v) = get("COGNIPLAY_COURSES") {
            cfg.course_files = v
                .split(',')
                .map(str::trim)
                .filter(|s| !s.is_empty())
                .map(PathBuf::from)
                .collect();
        }
        if let Some(v) = get("COGNIPLAY_BOOTSTRAP_ADMIN") {
            let mut parts = v.splitn(3, ':');
            match (parts.next(), parts.next(), parts.next()) {
                (Some(n), Some(m), Some(p)) if !n.is_empty() && !p.is_empty() => {
                    cfg.bootstrap_admin = Some((n.into(), m.into(), p.into()));
                }
                _ => return Err(err("COGNIPLAY_BOOTSTRAP_ADMIN", "expected name:mail:password")),
            }
        }
        Ok(cfg)
    }

    pub fn platform_setup(&self) -> Result<PlatformSetup, ConfigError> {
        let mut setup = if self.course_files.is_empty() {
            PlatformSetup::standard()
        } else {
            let courses = self
                .course_files
                .iter()
                .map(|p| {
                    let src = std::fs::read_to_string(p)
                        .map_err(|e| err("COGNIPLAY_COURSES", format!("{}: {e}", p.display())))?;
                    CourseGraph::from_toml(&src)
                        .map_err(|e| err("COGNIPLAY_COURSES", format!("{}: {e}", p.display())))
                })
                .collect::<Result<Vec<_>, _>>()?;
            PlatformSetup::with_courses(courses)
        };
        setup.pass_threshold_override = self.pass_threshold;
        Ok(setup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashMap;

    fn lookup(pairs: &[(&str, &str)]) -> impl Fn(&str) -> Option<String> {
        let m: HashMap<String, String> =
            pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        move |k| m.get(k).cloned()
    }

    #[test]
    fn reads_all_variables() {
        let cfg = ServiceConfig::from_lookup(lookup(&[
            ("COGNIPLAY_BIND", "0.0.0.0:9000"),
            ("COGNIPLAY_STORAGE", "/tmp/x"),
            ("COGNIPLAY_SESSION_TTL_SECS", "60"),
            ("COGNIPLAY_PASS_THRESHOLD", "70"),
            ("COGNIPLAY_BOOTSTRAP_ADMIN", "root:root@example.org:pw:with:colons"),
        ]))
        .unwrap();
        assert_eq!(cfg.bind.port(), 9000);
        assert_eq!(cfg.session_ttl_secs, 60);
        assert_eq!(cfg.pass_threshold, Some(70));
        assert_eq!(cfg.bootstrap_admin.unwrap().2, "pw:with:colons");
        let setup = ServiceConfig::from_lookup(lookup(&[("COGNIPLAY_PASS_THRESHOLD", "70")]))
            .unwrap()
            .platform_setup()
            .unwrap();
        assert_eq!(setup.pass_threshold_override, Some(70));
    }

    #[test]
    fn rejects_bad_values() {
        for (k, v) in [
            ("COGNIPLAY_BIND", "nowhere"),
            ("COGNIPLAY_SESSION_TTL_SECS", "0"),
            ("COGNIPLAY_PASS_THRESHOLD", "101"),
            ("COGNIPLAY_BOOTSTRAP_ADMIN", "justaname"),
        ] {
            let e = ServiceConfig::from_lookup(lookup(&[(k, v)])).unwrap_err();
            assert_eq!(e.var, k);
        }
    }
}
