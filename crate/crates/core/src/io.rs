//! Instance files and JSON formatting.
//!
//! An instance file is a JSON envelope `{schema_version, kind, payload}`.
//! Numbers are written with 17 significant digits so that every 64-bit
//! float round-trips exactly. Unknown schema versions and mismatched kind
//! tags are rejected at load time.

use std::io::Write;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::QuadraticObjective;

pub const SCHEMA_VERSION: &str = "1";

/// Payload tag of an instance file.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InstanceKind {
    Regime,
    Counterexample,
    QuadraticObjective,
    Report,
}

impl std::fmt::Display for InstanceKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            InstanceKind::Regime => "regime",
            InstanceKind::Counterexample => "counterexample",
            InstanceKind::QuadraticObjective => "quadratic_objective",
            InstanceKind::Report => "report",
        };
        f.write_str(s)
    }
}

#[derive(Serialize, Deserialize)]
struct InstanceFile {
    schema_version: String,
    kind: InstanceKind,
    payload: serde_json::Value,
}

/// Standalone payload for solver input files: an objective with the
/// regularization weight and factorization rank to use.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ObjectivePayload {
    pub objective: QuadraticObjective,
    pub lambda: f64,
    pub r: usize,
}

/// JSON formatter writing every `f64` with 17 significant digits.
struct SigDigitFormatter;

impl serde_json::ser::Formatter for SigDigitFormatter {
    fn write_f64<W: ?Sized + Write>(&mut self, writer: &mut W, value: f64) -> std::io::Result<()> {
        write!(writer, "{value:.16e}")
    }
}

/// Serialize any value to JSON with exact-round-trip floats.
pub fn to_json_string<T: Serialize>(value: &T) -> Result<String> {
    let mut out = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut out, SigDigitFormatter);
    value.serialize(&mut ser)?;
    Ok(String::from_utf8(out).expect("serde_json emits utf-8"))
}

/// Render a typed payload as an instance-file string.
pub fn instance_to_string<T: Serialize>(kind: InstanceKind, payload: &T) -> Result<String> {
    let file = InstanceFile {
        schema_version: SCHEMA_VERSION.to_string(),
        kind,
        payload: serde_json::to_value(payload)?,
    };
    to_json_string(&file)
}

/// Parse an instance-file string, checking schema version and kind.
pub fn instance_from_str<T: DeserializeOwned>(text: &str, kind: InstanceKind) -> Result<T> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unknown schema_version {:?}, expected {SCHEMA_VERSION:?}",
            file.schema_version
        )));
    }
    if file.kind != kind {
        return Err(Error::Schema(format!(
            "expected kind {kind}, found {}",
            file.kind
        )));
    }
    Ok(serde_json::from_value(file.payload)?)
}

/// Peek at the kind tag without deserializing the payload.
pub fn peek_kind(text: &str) -> Result<InstanceKind> {
    let file: InstanceFile = serde_json::from_str(text)?;
    if file.schema_version != SCHEMA_VERSION {
        return Err(Error::Schema(format!(
            "unknown schema_version {:?}, expected {SCHEMA_VERSION:?}",
            file.schema_version
        )));
    }
    Ok(file.kind)
}

pub fn save_instance<T: Serialize>(path: &Path, kind: InstanceKind, payload: &T) -> Result<()> {
    let text = instance_to_string(kind, payload)?;
    std::fs::write(path, text)?;
    Ok(())
}

pub fn load_instance<T: DeserializeOwned>(path: &Path, kind: InstanceKind) -> Result<T> {
    let text = std::fs::read_to_string(path)?;
    instance_from_str(&text, kind)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Mat;
    use crate::objective::RegimeParams;
    use proptest::prelude::*;

    #[test]
    fn seventeen_digit_floats_round_trip() {
        let values = [0.1, 1.0 / 3.0, 2.75, f64::MIN_POSITIVE, 1e300, -12345.6789e-200];
        for &v in &values {
            let text = to_json_string(&v).unwrap();
            let back: f64 = serde_json::from_str(&text).unwrap();
            assert_eq!(v, back, "{text}");
        }
    }

    #[test]
    fn instance_envelope_round_trip() {
        let p = RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 0.5).unwrap();
        let text = instance_to_string(InstanceKind::Regime, &p).unwrap();
        let back: RegimeParams = instance_from_str(&text, InstanceKind::Regime).unwrap();
        assert_eq!(p, back);
        assert_eq!(peek_kind(&text).unwrap(), InstanceKind::Regime);
    }

    #[test]
    fn wrong_kind_and_version_rejected() {
        let p = RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 1.0).unwrap();
        let text = instance_to_string(InstanceKind::Regime, &p).unwrap();
        assert!(matches!(
            instance_from_str::<RegimeParams>(&text, InstanceKind::Report),
            Err(Error::Schema(_))
        ));
        let bumped = text.replace("\"schema_version\":\"1\"", "\"schema_version\":\"99\"");
        assert!(matches!(
            instance_from_str::<RegimeParams>(&bumped, InstanceKind::Regime),
            Err(Error::Schema(_))
        ));
    }

    #[test]
    fn mismatched_factor_widths_rejected_at_load() {
        let text = r#"{"u":{"rows":2,"cols":2,"data":[1.0,0.0,0.0,1.0]},
                       "v":{"rows":3,"cols":1,"data":[1.0,0.0,0.0]}}"#;
        assert!(serde_json::from_str::<crate::objective::FactorPair>(text).is_err());
    }

    #[test]
    fn counterexample_files_round_trip() {
        let p = RegimeParams::new(3, 3, 1, 1, 4.0, 1.0, 1.0).unwrap();
        let inst = crate::forge::forge(&p).unwrap();
        let text = instance_to_string(InstanceKind::Counterexample, &inst).unwrap();
        let back: crate::forge::CounterexampleInstance =
            instance_from_str(&text, InstanceKind::Counterexample).unwrap();
        assert_eq!(back.xbar, inst.xbar);
        assert_eq!(back.h, inst.h);
        assert_eq!(back.witness, inst.witness);
        let report = crate::forge::verify_counterexample(&back, &Default::default());
        assert!(report.all_pass);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn random_matrices_round_trip(
            rows in 1usize..5,
            cols in 1usize..5,
            seed in any::<u64>(),
        ) {
            use rand::SeedableRng;
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let m = crate::linalg::gaussian_mat(rows, cols, &mut rng).scale(1e3);
            let text = to_json_string(&m).unwrap();
            let back: Mat = serde_json::from_str(&text).unwrap();
            prop_assert_eq!(m, back);
        }

        #[test]
        fn random_regimes_round_trip(
            m in 1usize..6,
            extra_n in 0usize..3,
            kappa in 1.0f64..10.0,
            mu in 0.1f64..5.0,
            lambda in 0.1f64..4.0,
        ) {
            let p = RegimeParams::new(m, m + extra_n, 1, m.min(2), kappa * mu, mu, lambda).unwrap();
            let text = instance_to_string(InstanceKind::Regime, &p).unwrap();
            let back: RegimeParams = instance_from_str(&text, InstanceKind::Regime).unwrap();
            prop_assert_eq!(p, back);
        }

        #[test]
        fn random_verdicts_round_trip(
            m in 1usize..6,
            r in 1usize..6,
            r_star in 0usize..6,
            kappa in 1.0f64..10.0,
        ) {
            let r = r.min(m);
            let r_star = r_star.min(m);
            let p = RegimeParams::new(m, m, r, r_star, kappa, 1.0, 1.0).unwrap();
            for verdict in [crate::factorizability::oracle(&p), crate::factorizability::solve_reduced_qp(&p)] {
                let text = to_json_string(&verdict).unwrap();
                let back: crate::factorizability::Verdict = serde_json::from_str(&text).unwrap();
                prop_assert_eq!(&back, &verdict);
            }
        }
    }
}
