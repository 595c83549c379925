//! Machine-readable reports: command echo, input digest, results with exact
//! half-integers rendered as strings, certificates, and the tolerances used.
//! Identical inputs and flags produce byte-identical reports.

use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

pub const SCHEMA_VERSION: &str = "symindex/1";

#[derive(Clone, Debug, Serialize)]
pub struct Report {
    pub version: &'static str,
    pub command: String,
    /// SHA-256 of the raw input bytes.
    pub input_digest: String,
    pub tolerances: Value,
    pub results: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub certificates: Option<Value>,
}

impl Report {
    pub fn new(command: &str, input: &[u8], tolerances: Value, results: Value) -> Self {
        Report {
            version: SCHEMA_VERSION,
            command: command.to_string(),
            input_digest: digest(input),
            tolerances,
            results,
            certificates: None,
        }
    }

    pub fn with_certificates(mut self, certificates: Value) -> Self {
        self.certificates = Some(certificates);
        self
    }

    pub fn to_json_string(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serialization");
        s.push('\n');
        s
    }
}

/// Error payload emitted on module failures (exit code 3).
pub fn error_report(command: &str, input: &[u8], err: &crate::error::SymError) -> String {
    let v = json!({
        "version": SCHEMA_VERSION,
        "command": command,
        "input_digest": digest(input),
        "error": {
            "type": error_tag(err),
            "message": err.to_string(),
        },
    });
    let mut s = serde_json::to_string_pretty(&v).expect("error serialization");
    s.push('\n');
    s
}

fn error_tag(err: &crate::error::SymError) -> &'static str {
    use crate::error::SymError::*;
    match err {
        InvalidInput(_) => "invalid_input",
        NotSymplectic { .. } => "not_symplectic",
        NotTransverse { .. } => "not_transverse",
        Diverged { .. } => "diverged",
        DegenerateArc { .. } => "degenerate_arc",
        IrregularCrossing { .. } => "irregular_crossing",
        IrregularEndpoint { .. } => "irregular_endpoint",
        EpsilonUnstable { .. } => "epsilon_unstable",
        MaxCzMismatch { .. } => "max_cz_mismatch",
        AmbiguousFloor { .. } => "ambiguous_floor",
        OriginUndefined => "origin_undefined",
        DeltaTooLarge { .. } => "delta_too_large",
        CannotSeparate => "cannot_separate",
        Uncertified { .. } => "uncertified",
        RegimeViolation(_) => "regime_violation",
        InconsistentModel { .. } => "inconsistent_model",
        NotFixed => "not_fixed",
    }
}

pub fn digest(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    hex::encode(h.finalize())
}

/// Render a half-integer as an exact string ("-2", "-1/2", ...). Rationals
/// are never emitted as floats.
pub fn half_str(h: crate::half::HalfInt) -> String {
    h.to_string()
}
