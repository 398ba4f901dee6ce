//! Verification report records and serialisation.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::Result;

pub const ARTIFACT_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckRecord {
    pub check: String,
    pub suite: String,
    pub model: String,
    pub inputs_digest: String,
    pub residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
    pub elapsed_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CheckRecord {
    pub fn from_outcome(
        check: &str,
        suite: &str,
        model: &str,
        inputs: &str,
        outcome: Result<f64>,
        tolerance: f64,
        elapsed_ms: u64,
    ) -> Self {
        let (residual, error) = match outcome {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        Self {
            check: check.into(),
            suite: suite.into(),
            model: model.into(),
            inputs_digest: digest(inputs),
            residual,
            tolerance,
            pass: residual.is_some_and(|r| r < tolerance),
            elapsed_ms,
            error,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub artifact_version: String,
    pub config: RunConfig,
    pub records: Vec<CheckRecord>,
    pub summary: Summary,
}

impl VerificationReport {
    pub fn new(config: RunConfig, records: Vec<CheckRecord>) -> Self {
        let mut r = Self {
            artifact_version: ARTIFACT_VERSION.into(),
            config,
            records,
            summary: Summary::default(),
        };
        r.recount();
        r
    }

    pub fn append(&mut self, records: Vec<CheckRecord>) {
        self.records.extend(records);
        self.recount();
    }

    fn recount(&mut self) {
        let passed = self.records.iter().filter(|r| r.pass).count();
        self.summary = Summary {
            total: self.records.len(),
            passed,
            failed: self.records.len() - passed,
        };
    }

    pub fn all_passed(&self) -> bool {
        self.summary.failed == 0
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mut r: Self = serde_json::from_str(text)?;
        r.recount();
        Ok(r)
    }
}

/// Hex SHA-256 of a canonical description of a check's inputs.
pub fn digest(inputs: &str) -> String {
    hex::encode(Sha256::digest(inputs.as_bytes()))
}
