//! Scenario configuration.
//!
//! A scenario is a TOML document: actor tables followed by an ordered list
//! of `[[steps]]`, each tagged by `action`. Every step may carry an
//! `expect` string naming the outcome it should produce (`"ok"`, an error
//! kind such as `"use_limit_exceeded"`, or for `verify` steps `"accept"` or
//! a rejection reason).
//!
//! ```toml
//! name = "example"
//!
//! [fees]
//! rate = 360
//!
//! [[issuers]]
//! name = "registry"
//! fields = ["name", "status"]
//! funds = 10_000_000
//!
//! [[users]]
//! name = "alice"
//! funds = 2_000_000
//!
//! [[providers]]
//! name = "shop"
//!
//! [[steps]]
//! action = "setup"
//! issuer = "registry"
//!
//! [[steps]]
//! action = "enroll"
//! label = "alice-id"
//! issuer = "registry"
//! user = "alice"
//! uses = 2
//! attributes = { name = "Alice", status = "member" }
//! ```

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chainid_core::economics::{FeeSchedule, UsdQuote};
use serde::Deserialize;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("invalid TOML: {0}")]
    Syntax(String),
    #[error("{field}: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeeOverrides {
    pub rate: Option<u64>,
    pub dust: Option<u64>,
    pub usd_per_btc: Option<UsdQuote>,
}

impl FeeOverrides {
    pub fn apply(&self, mut schedule: FeeSchedule) -> FeeSchedule {
        if let Some(r) = self.rate {
            schedule.rate = r;
        }
        if let Some(d) = self.dust {
            schedule.dust = d;
        }
        if let Some(q) = self.usd_per_btc {
            schedule.usd_per_btc = q;
        }
        schedule
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ActorConfig {
    pub name: String,
    /// Key seed; defaults to the name.
    pub seed: Option<String>,
    #[serde(default = "default_funds")]
    pub funds: u64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IssuerConfig {
    pub name: String,
    pub seed: Option<String>,
    #[serde(default = "default_funds")]
    pub funds: u64,
    /// Attribute labels certified by this issuer, in generator order.
    pub fields: Vec<String>,
}

fn default_funds() -> u64 {
    10_000_000
}

fn one() -> u32 {
    1
}

impl ActorConfig {
    pub fn seed(&self) -> &str {
        self.seed.as_deref().unwrap_or(&self.name)
    }
}

impl IssuerConfig {
    pub fn seed(&self) -> &str {
        self.seed.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClaimConfig {
    pub user: String,
    pub requests: Vec<String>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "action", rename_all = "snake_case", deny_unknown_fields)]
pub enum Action {
    Setup {
        issuer: String,
    },
    Enroll {
        label: String,
        issuer: String,
        user: String,
        uses: u32,
        #[serde(default)]
        margin: u64,
        attributes: BTreeMap<String, String>,
    },
    Mine {
        branch: Option<usize>,
        #[serde(default = "one")]
        count: u32,
    },
    Request {
        label: String,
        identity: String,
        sp: String,
        #[serde(default)]
        reveal: Vec<String>,
        #[serde(default)]
        link: Vec<[String; 2]>,
    },
    RequestDouble {
        label: String,
        identities: [String; 2],
        sp: String,
        #[serde(default)]
        reveal: Vec<String>,
        #[serde(default)]
        link: Vec<[String; 2]>,
    },
    Verify {
        request: String,
        /// Field to required value.
        #[serde(default)]
        demand: BTreeMap<String, String>,
        /// Trusted issuers; all issuers when absent.
        trust: Option<Vec<String>>,
        /// Also ask a block explorer.
        #[serde(default)]
        explorer: bool,
    },
    Accept {
        request: String,
    },
    Revoke {
        identity: String,
        by: String,
        to: Option<String>,
    },
    Fork {
        at_height: Option<u32>,
    },
    Reorg {},
    Report {
        user: String,
    },
    Lightweight {
        challenge: String,
        claims: Vec<ClaimConfig>,
    },
    /// Spender of an identity's original token on every branch.
    Trace {
        identity: String,
    },
}

impl Action {
    pub fn name(&self) -> &'static str {
        match self {
            Action::Setup { .. } => "setup",
            Action::Enroll { .. } => "enroll",
            Action::Mine { .. } => "mine",
            Action::Request { .. } => "request",
            Action::RequestDouble { .. } => "request_double",
            Action::Verify { .. } => "verify",
            Action::Accept { .. } => "accept",
            Action::Revoke { .. } => "revoke",
            Action::Fork { .. } => "fork",
            Action::Reorg {} => "reorg",
            Action::Report { .. } => "report",
            Action::Lightweight { .. } => "lightweight",
            Action::Trace { .. } => "trace",
        }
    }
}

#[derive(Clone, Debug)]
pub struct Step {
    pub action: Action,
    pub expect: Option<String>,
}

#[derive(Clone, Debug)]
pub struct ScenarioConfig {
    pub name: String,
    pub fees: FeeOverrides,
    pub issuers: Vec<IssuerConfig>,
    pub users: Vec<ActorConfig>,
    pub providers: Vec<ActorConfig>,
    pub steps: Vec<Step>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    name: String,
    #[serde(default)]
    fees: FeeOverrides,
    #[serde(default)]
    issuers: Vec<IssuerConfig>,
    #[serde(default)]
    users: Vec<ActorConfig>,
    #[serde(default)]
    providers: Vec<ActorConfig>,
    #[serde(default)]
    steps: Vec<toml::Table>,
}

/// Field reference inside a request: `field` or `identity.field`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FieldSpec {
    pub identity: Option<String>,
    pub field: String,
}

impl FieldSpec {
    pub fn parse(s: &str) -> Self {
        match s.split_once('.') {
            Some((i, f)) => FieldSpec { identity: Some(i.to_string()), field: f.to_string() },
            None => FieldSpec { identity: None, field: s.to_string() },
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| ConfigError::Syntax(e.message().to_string()))?;
        let mut steps = Vec::with_capacity(raw.steps.len());
        for (i, mut table) in raw.steps.into_iter().enumerate() {
            let expect = match table.remove("expect") {
                None => None,
                Some(toml::Value::String(s)) => Some(s),
                Some(_) => return Err(invalid(format!("steps[{i}].expect"), "must be a string")),
            };
            let action = Action::deserialize(toml::Value::Table(table))
                .map_err(|e| invalid(format!("steps[{i}]"), e.message().to_string()))?;
            steps.push(Step { action, expect });
        }
        let config = ScenarioConfig {
            name: raw.name,
            fees: raw.fees,
            issuers: raw.issuers,
            users: raw.users,
            providers: raw.providers,
            steps,
        };
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn schedule(&self) -> FeeSchedule {
        self.fees.apply(FeeSchedule::standard())
    }

    fn issuer(&self, name: &str) -> Option<&IssuerConfig> {
        self.issuers.iter().find(|i| i.name == name)
    }

    /// Checks every reference a step makes against what earlier steps and
    /// the actor tables declare.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let mut names = BTreeSet::new();
        for (table, list) in [("users", &self.users), ("providers", &self.providers)] {
            for (i, a) in list.iter().enumerate() {
                if !names.insert(a.name.as_str()) {
                    return Err(invalid(format!("{table}[{i}].name"), format!("duplicate actor {:?}", a.name)));
                }
            }
        }
        for (i, issuer) in self.issuers.iter().enumerate() {
            if !names.insert(issuer.name.as_str()) {
                return Err(invalid(format!("issuers[{i}].name"), format!("duplicate actor {:?}", issuer.name)));
            }
            let mut seen = BTreeSet::new();
            for (j, f) in issuer.fields.iter().enumerate() {
                if f.is_empty() || f.starts_with('_') || f.contains('.') || !seen.insert(f) {
                    return Err(invalid(format!("issuers[{i}].fields[{j}]"), format!("invalid or repeated field {f:?}")));
                }
            }
        }
        self.schedule().validate().map_err(|e| invalid("fees", e.to_string()))?;

        let is_user = |n: &str| self.users.iter().any(|a| a.name == n);
        let is_sp = |n: &str| self.providers.iter().any(|a| a.name == n);
        // identity label -> (issuer, user)
        let mut identities: BTreeMap<&str, (&str, &str)> = BTreeMap::new();
        // request label -> identities it spent
        let mut requests: BTreeMap<&str, Vec<&str>> = BTreeMap::new();

        for (i, step) in self.steps.iter().enumerate() {
            let at = |f: &str| format!("steps[{i}].{f}");
            match &step.action {
                Action::Setup { issuer } => {
                    self.issuer(issuer).ok_or_else(|| invalid(at("issuer"), format!("unknown issuer {issuer:?}")))?;
                }
                Action::Enroll { label, issuer, user, uses, attributes, .. } => {
                    let cfg =
                        self.issuer(issuer).ok_or_else(|| invalid(at("issuer"), format!("unknown issuer {issuer:?}")))?;
                    if !is_user(user) {
                        return Err(invalid(at("user"), format!("unknown user {user:?}")));
                    }
                    if *uses == 0 || *uses > u16::MAX as u32 {
                        return Err(invalid(at("uses"), format!("use limit {uses} out of range")));
                    }
                    for f in &cfg.fields {
                        if !attributes.contains_key(f) {
                            return Err(invalid(at(&format!("attributes.{f}")), "missing value"));
                        }
                    }
                    if let Some(extra) = attributes.keys().find(|k| !cfg.fields.contains(k)) {
                        return Err(invalid(at(&format!("attributes.{extra}")), format!("{issuer} certifies no such field")));
                    }
                    if identities.insert(label, (issuer, user)).is_some() {
                        return Err(invalid(at("label"), format!("duplicate identity {label:?}")));
                    }
                }
                Action::Mine { count, .. } => {
                    if *count == 0 {
                        return Err(invalid(at("count"), "must be positive"));
                    }
                }
                Action::Request { label, identity, sp, reveal, link } => {
                    if !identities.contains_key(identity.as_str()) {
                        return Err(invalid(at("identity"), format!("unknown identity {identity:?}")));
                    }
                    if !is_sp(sp) {
                        return Err(invalid(at("sp"), format!("unknown provider {sp:?}")));
                    }
                    let ids = [identity.as_str()];
                    self.check_fields(&ids, &identities, "reveal", reveal, link, &at)?;
                    if requests.insert(label, ids.to_vec()).is_some() {
                        return Err(invalid(at("label"), format!("duplicate request {label:?}")));
                    }
                }
                Action::RequestDouble { label, identities: pair, sp, reveal, link } => {
                    for (k, id) in pair.iter().enumerate() {
                        if !identities.contains_key(id.as_str()) {
                            return Err(invalid(at(&format!("identities[{k}]")), format!("unknown identity {id:?}")));
                        }
                    }
                    if pair[0] == pair[1] || identities[pair[0].as_str()].0 == identities[pair[1].as_str()].0 {
                        return Err(invalid(at("identities"), "needs identities from two different issuers"));
                    }
                    if !is_sp(sp) {
                        return Err(invalid(at("sp"), format!("unknown provider {sp:?}")));
                    }
                    let ids = [pair[0].as_str(), pair[1].as_str()];
                    self.check_fields(&ids, &identities, "reveal", reveal, link, &at)?;
                    if requests.insert(label, ids.to_vec()).is_some() {
                        return Err(invalid(at("label"), format!("duplicate request {label:?}")));
                    }
                }
                Action::Verify { request, demand, trust, .. } => {
                    let ids =
                        requests.get(request.as_str()).ok_or_else(|| invalid(at("request"), format!("unknown request {request:?}")))?;
                    let keys: Vec<String> = demand.keys().cloned().collect();
                    self.check_fields(ids, &identities, "demand", &keys, &[], &at)?;
                    for (k, t) in trust.iter().flatten().enumerate() {
                        self.issuer(t).ok_or_else(|| invalid(at(&format!("trust[{k}]")), format!("unknown issuer {t:?}")))?;
                    }
                }
                Action::Accept { request } => {
                    if !requests.contains_key(request.as_str()) {
                        return Err(invalid(at("request"), format!("unknown request {request:?}")));
                    }
                }
                Action::Revoke { identity, by, to } => {
                    let (issuer, user) = *identities
                        .get(identity.as_str())
                        .ok_or_else(|| invalid(at("identity"), format!("unknown identity {identity:?}")))?;
                    if by != issuer && by != user {
                        return Err(invalid(at("by"), format!("{by:?} holds no key of {identity:?}")));
                    }
                    if let Some(to) = to {
                        if !names.contains(to.as_str()) {
                            return Err(invalid(at("to"), format!("unknown actor {to:?}")));
                        }
                    }
                }
                Action::Fork { .. } | Action::Reorg {} => {}
                Action::Report { user } => {
                    if !is_user(user) {
                        return Err(invalid(at("user"), format!("unknown user {user:?}")));
                    }
                }
                Action::Lightweight { claims, .. } => {
                    if claims.is_empty() {
                        return Err(invalid(at("claims"), "at least one claim is needed"));
                    }
                    for (k, c) in claims.iter().enumerate() {
                        if !is_user(&c.user) {
                            return Err(invalid(at(&format!("claims[{k}].user")), format!("unknown user {:?}", c.user)));
                        }
                        if let Some(r) = c.requests.iter().find(|r| !requests.contains_key(r.as_str())) {
                            return Err(invalid(at(&format!("claims[{k}].requests")), format!("unknown request {r:?}")));
                        }
                    }
                }
                Action::Trace { identity } => {
                    if !identities.contains_key(identity.as_str()) {
                        return Err(invalid(at("identity"), format!("unknown identity {identity:?}")));
                    }
                }
            }
        }
        Ok(())
    }

    fn check_fields(
        &self,
        ids: &[&str],
        identities: &BTreeMap<&str, (&str, &str)>,
        reveal_key: &str,
        reveal: &[String],
        link: &[[String; 2]],
        at: &dyn Fn(&str) -> String,
    ) -> Result<(), ConfigError> {
        let check = |spec: &str, path: String| -> Result<(), ConfigError> {
            let f = FieldSpec::parse(spec);
            let id = match (&f.identity, ids) {
                (Some(id), _) => ids
                    .iter()
                    .find(|i| **i == id)
                    .ok_or_else(|| invalid(path.clone(), format!("identity {id:?} is not part of this request")))?,
                (None, [only]) => only,
                (None, _) => return Err(invalid(path, "two identities are involved; write identity.field")),
            };
            let issuer = self.issuer(identities[id].0).expect("validated issuer");
            if !issuer.fields.contains(&f.field) {
                return Err(invalid(path, format!("{} certifies no field {:?}", issuer.name, f.field)));
            }
            Ok(())
        };
        for r in reveal {
            check(r, at(&format!("{reveal_key}.{r}")))?;
        }
        for (k, pair) in link.iter().enumerate() {
            for side in pair {
                check(side, at(&format!("link[{k}]")))?;
            }
        }
        Ok(())
    }
}
