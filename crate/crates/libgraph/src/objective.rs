//! Objective parsing.
//!
//! The mock parser is a fixed phrase table. Its keyword weights are
//! hand-picked for the bundled corpus and carry no meaning beyond it.

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

use crate::graph::Value;
use crate::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GoalKind {
    Performance,
    ResourceConstraint,
    Security,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Goal {
    pub kind: GoalKind,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveSpec {
    pub goals: Vec<Goal>,
    pub keywords: BTreeMap<String, f64>,
    #[serde(default)]
    pub hard_constraints: BTreeMap<String, Value>,
}

impl ObjectiveSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.goals.is_empty() {
            return Err("at least one goal is required".into());
        }
        for (k, w) in &self.keywords {
            if k.trim().is_empty() {
                return Err("empty keyword".into());
            }
            if !(0.0..=1.0).contains(w) {
                return Err(format!("weight of `{k}` is {w}, outside [0, 1]"));
            }
        }
        Ok(())
    }

    pub fn total_weight(&self) -> f64 {
        self.keywords.values().sum()
    }
}

pub trait ObjectiveParser {
    fn parse(&self, text: &str) -> Result<ObjectiveSpec, GraphError>;
}

struct Rule {
    triggers: &'static [&'static str],
    kind: GoalKind,
    description: &'static str,
    keywords: &'static [(&'static str, f64)],
}

const RULES: &[Rule] = &[
    Rule {
        triggers: &["real-time", "realtime", "deterministic", "low latency", "latency", "control loop"],
        kind: GoalKind::Performance,
        description: "bounded response latency",
        keywords: &[("real-time", 1.0), ("scheduler", 0.8), ("preemption", 0.7), ("latency", 0.6)],
    },
    Rule {
        triggers: &["minimize memory", "memory", "footprint", "lightweight", "small image"],
        kind: GoalKind::ResourceConstraint,
        description: "small memory footprint",
        keywords: &[("memory", 1.0), ("allocator", 0.6), ("footprint", 0.5)],
    },
    Rule {
        triggers: &["power", "battery", "energy"],
        kind: GoalKind::ResourceConstraint,
        description: "low power consumption",
        keywords: &[("power", 1.0), ("tickless", 0.7), ("idle", 0.6)],
    },
    Rule {
        triggers: &["security", "secure", "isolation", "hardening", "hardened"],
        kind: GoalKind::Security,
        description: "hardened, isolated runtime",
        keywords: &[("security", 1.0), ("isolation", 0.8), ("stack protector", 0.6), ("random", 0.4)],
    },
    Rule {
        triggers: &["network", "networking", "tcp", "http", "web", "iot", "mqtt"],
        kind: GoalKind::Performance,
        description: "network service",
        keywords: &[("network", 1.0), ("tcp", 0.8), ("socket", 0.6)],
    },
    Rule {
        triggers: &["file", "storage", "filesystem", "database", "persist"],
        kind: GoalKind::Performance,
        description: "persistent storage",
        keywords: &[("filesystem", 1.0), ("storage", 0.7), ("block", 0.4)],
    },
    Rule {
        triggers: &["throughput", "performance", "fast", "parallel", "multicore"],
        kind: GoalKind::Performance,
        description: "high throughput",
        keywords: &[("performance", 1.0), ("smp", 0.6), ("cache", 0.5)],
    },
];

const STOPWORDS: &[&str] = &[
    "with", "that", "this", "from", "into", "over", "under", "for", "and", "the", "should", "must", "have", "using",
    "make", "build", "want", "need", "very", "some",
];

/// Deterministic phrase-table parser.
///
/// `SYMBOL=value` tokens in the text (optionally `CONFIG_`-prefixed) become
/// hard constraints. Text matching no rule yields one generic goal whose
/// keywords are the text's longer words at weight 0.5.
#[derive(Debug, Clone, Copy, Default)]
pub struct MockParser;

impl ObjectiveParser for MockParser {
    fn parse(&self, text: &str) -> Result<ObjectiveSpec, GraphError> {
        if text.trim().is_empty() {
            return Err(GraphError::EmptyObjective);
        }
        let lower = text.to_lowercase();
        let mut goals = Vec::new();
        let mut keywords: BTreeMap<String, f64> = BTreeMap::new();
        for rule in RULES {
            if rule.triggers.iter().any(|t| contains_phrase(&lower, t)) {
                goals.push(Goal { kind: rule.kind, description: rule.description.to_string() });
                for (k, w) in rule.keywords {
                    let e = keywords.entry(k.to_string()).or_insert(0.0);
                    *e = e.max(*w);
                }
            }
        }

        let mut hard_constraints = BTreeMap::new();
        for tok in text.split_whitespace() {
            let tok = tok.trim_end_matches([',', '.', ';']);
            let Some((sym, val)) = tok.split_once('=') else { continue };
            let sym = sym.strip_prefix("CONFIG_").unwrap_or(sym);
            let is_sym = !sym.is_empty()
                && sym.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
                && sym.starts_with(|c: char| c.is_ascii_uppercase());
            if is_sym && !val.is_empty() {
                let val = val.trim_matches('"');
                let v: Value = match val.parse::<i64>() {
                    Ok(i) => Value::Int(i),
                    Err(_) => serde_json::from_value(serde_json::Value::String(val.to_string()))
                        .unwrap_or(Value::Str(val.to_string())),
                };
                hard_constraints.insert(sym.to_string(), v);
            }
        }

        if goals.is_empty() {
            goals.push(Goal { kind: GoalKind::Performance, description: "general purpose".into() });
            for w in lower.split(|c: char| !c.is_alphanumeric()) {
                if w.len() >= 4 && !STOPWORDS.contains(&w) {
                    keywords.insert(w.to_string(), 0.5);
                }
            }
        }
        let spec = ObjectiveSpec { goals, keywords, hard_constraints };
        spec.validate().map_err(GraphError::SchemaViolation)?;
        Ok(spec)
    }
}

/// Word-boundary phrase containment over lowercase text.
pub(crate) fn contains_phrase(haystack: &str, phrase: &str) -> bool {
    let words = |s: &str| -> Vec<String> {
        s.split(|c: char| !c.is_alphanumeric()).filter(|w| !w.is_empty()).map(str::to_string).collect()
    };
    let hay = words(haystack);
    let needle = words(phrase);
    !needle.is_empty() && hay.windows(needle.len()).any(|w| w == needle.as_slice())
}

/// Wire access for the remote parser.
pub trait Transport {
    fn post(&self, endpoint: &str, api_key: Option<&str>, body: &str, timeout: Duration) -> Result<String, String>;
}

/// Blocking HTTP transport.
#[derive(Debug, Clone, Copy, Default)]
pub struct HttpTransport;

impl Transport for HttpTransport {
    fn post(&self, endpoint: &str, api_key: Option<&str>, body: &str, timeout: Duration) -> Result<String, String> {
        let client = reqwest::blocking::Client::builder().timeout(timeout).build().map_err(|e| e.to_string())?;
        let mut req = client
            .post(endpoint)
            .header(reqwest::header::CONTENT_TYPE, "application/json")
            .body(body.to_string());
        if let Some(key) = api_key {
            req = req.bearer_auth(key);
        }
        let resp = req.send().map_err(|e| e.to_string())?;
        if !resp.status().is_success() {
            return Err(format!("status {}", resp.status()));
        }
        resp.text().map_err(|e| e.to_string())
    }
}

pub const ENDPOINT_VAR: &str = "ORCH_LLM_ENDPOINT";
pub const API_KEY_VAR: &str = "ORCH_LLM_API_KEY";

/// Sends `{"objective", "schema_version": 1}` and validates the reply.
/// One retry on transport failure; replies are never patched.
pub struct RemoteParser<T: Transport = HttpTransport> {
    endpoint: String,
    api_key: Option<String>,
    transport: T,
    timeout: Duration,
}

impl RemoteParser<HttpTransport> {
    pub fn from_env() -> Result<Self, GraphError> {
        let endpoint = std::env::var(ENDPOINT_VAR)
            .ok()
            .filter(|e| !e.trim().is_empty())
            .ok_or_else(|| GraphError::RemoteUnavailable(format!("{ENDPOINT_VAR} is not set")))?;
        Ok(RemoteParser::new(endpoint, std::env::var(API_KEY_VAR).ok(), HttpTransport))
    }
}

impl<T: Transport> RemoteParser<T> {
    pub fn new(endpoint: impl Into<String>, api_key: Option<String>, transport: T) -> Self {
        RemoteParser { endpoint: endpoint.into(), api_key, transport, timeout: Duration::from_secs(30) }
    }

    pub fn with_timeout(mut self, timeout: Duration) -> Self {
        self.timeout = timeout;
        self
    }
}

impl<T: Transport> ObjectiveParser for RemoteParser<T> {
    fn parse(&self, text: &str) -> Result<ObjectiveSpec, GraphError> {
        if text.trim().is_empty() {
            return Err(GraphError::EmptyObjective);
        }
        let body = serde_json::json!({ "objective": text, "schema_version": 1 }).to_string();
        let mut last = String::new();
        for _ in 0..2 {
            match self.transport.post(&self.endpoint, self.api_key.as_deref(), &body, self.timeout) {
                Ok(reply) => {
                    let spec: ObjectiveSpec =
                        serde_json::from_str(&reply).map_err(|e| GraphError::SchemaViolation(e.to_string()))?;
                    spec.validate().map_err(GraphError::SchemaViolation)?;
                    return Ok(spec);
                }
                Err(e) => last = e,
            }
        }
        Err(GraphError::RemoteUnavailable(last))
    }
}
