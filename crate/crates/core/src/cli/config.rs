use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use super::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

/// A validated run configuration.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    pub x0: f64,
    pub theta: f64,
    pub h: f64,
    pub horizon: f64,
    pub seed: u64,
    pub replications: usize,
    pub quad_abs_tol: f64,
    pub bridge_correction: bool,
    pub output_path: Option<PathBuf>,
    pub output_format: Option<OutputFormat>,
    pub allow_nonnegative_a: bool,
}

pub const DEFAULT_H: f64 = 1e-4;
pub const DEFAULT_QUAD_ABS_TOL: f64 = 1e-10;

const KEYS: [&str; 14] = [
    "a",
    "b",
    "eta",
    "x0",
    "theta",
    "h",
    "horizon",
    "seed",
    "replications",
    "quad_abs_tol",
    "bridge_correction",
    "output_path",
    "output_format",
    "allow_nonnegative_a",
];

struct Fields<'a> {
    source: &'a str,
    obj: &'a Map<String, Value>,
}

impl Fields<'_> {
    /// 1-based line of the first `"key":` in the source.
    fn line_of(&self, key: &str) -> Option<usize> {
        let quoted = format!("\"{key}\"");
        self.source
            .lines()
            .position(|line| {
                line.match_indices(&quoted)
                    .any(|(i, _)| line[i + quoted.len()..].trim_start().starts_with(':'))
            })
            .map(|i| i + 1)
    }

    fn error(&self, key: &str, msg: impl std::fmt::Display) -> CliError {
        CliError::Config(match self.line_of(key) {
            Some(line) => format!("line {line}, key `{key}`: {msg}"),
            None => format!("key `{key}`: {msg}"),
        })
    }

    fn get(&self, key: &str) -> Option<&Value> {
        self.obj.get(key).filter(|v| !v.is_null())
    }

    fn required<T>(&self, key: &str, v: Option<T>) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Config(format!("missing required key `{key}`")))
    }

    fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => match v.as_f64() {
                Some(x) if x.is_finite() => Ok(Some(x)),
                _ => Err(self.error(key, format!("expected a finite number, found {v}"))),
            },
        }
    }

    fn unsigned(&self, key: &str) -> Result<Option<u64>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v.as_u64().map(Some).ok_or_else(|| {
                self.error(key, format!("expected a non-negative integer, found {v}"))
            }),
        }
    }

    fn boolean(&self, key: &str) -> Result<Option<bool>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_bool()
                .map(Some)
                .ok_or_else(|| self.error(key, format!("expected true or false, found {v}"))),
        }
    }

    fn string(&self, key: &str) -> Result<Option<&str>, CliError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .as_str()
                .map(Some)
                .ok_or_else(|| self.error(key, format!("expected a string, found {v}"))),
        }
    }
}

/// Parses and validates a JSON configuration document.
pub fn parse_config(source: &str) -> Result<RunConfig, CliError> {
    let value: Value =
        serde_json::from_str(source).map_err(|e| CliError::Config(format!("invalid JSON: {e}")))?;
    let obj = value
        .as_object()
        .ok_or_else(|| CliError::Config("top level must be a JSON object".into()))?;
    let f = Fields { source, obj };
    if let Some(key) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(f.error(
            key,
            format!("unknown key; expected one of {}", KEYS.join(", ")),
        ));
    }
    let output_format = match f.string("output_format")? {
        None => None,
        Some("csv") => Some(OutputFormat::Csv),
        Some("json") => Some(OutputFormat::Json),
        Some(other) => {
            return Err(f.error(
                "output_format",
                format!("expected \"csv\" or \"json\", found \"{other}\""),
            ))
        }
    };
    let replications = match f.unsigned("replications")? {
        None => 1,
        Some(r) => usize::try_from(r).map_err(|_| f.error("replications", "too large"))?,
    };
    let config = RunConfig {
        a: f.required("a", f.number("a")?)?,
        b: f.required("b", f.number("b")?)?,
        eta: f.required("eta", f.number("eta")?)?,
        x0: f.required("x0", f.number("x0")?)?,
        theta: f.required("theta", f.number("theta")?)?,
        seed: f.required("seed", f.unsigned("seed")?)?,
        horizon: f.required("horizon", f.number("horizon")?)?,
        h: f.number("h")?.unwrap_or(DEFAULT_H),
        replications,
        quad_abs_tol: f.number("quad_abs_tol")?.unwrap_or(DEFAULT_QUAD_ABS_TOL),
        bridge_correction: f.boolean("bridge_correction")?.unwrap_or(false),
        output_path: f.string("output_path")?.map(PathBuf::from),
        output_format,
        allow_nonnegative_a: f.boolean("allow_nonnegative_a")?.unwrap_or(false),
    };
    config.validate().map_err(CliError::Config)?;
    Ok(config)
}

impl RunConfig {
    /// Checks every model precondition; the message names the offending values.
    pub fn validate(&self) -> Result<(), String> {
        let RunConfig {
            a,
            b,
            eta,
            x0,
            theta,
            ..
        } = *self;
        if b <= 0.0 {
            return Err(format!(
                "b={b} must be > 0 (beta = sqrt(2b) requires b > 0)"
            ));
        }
        if a >= 0.0 && !self.allow_nonnegative_a {
            return Err(format!(
                "a={a} must be < 0; set allow_nonnegative_a to waive"
            ));
        }
        if eta < 0.0 {
            return Err(format!("eta={eta} must be >= 0"));
        }
        if eta >= theta {
            return Err(format!("eta={eta} must be < theta={theta}"));
        }
        if x0 <= eta {
            return Err(format!("x0={x0} must be > eta={eta}"));
        }
        if x0 >= theta {
            return Err(format!("x0={x0} must be < theta={theta}"));
        }
        if self.h <= 0.0 {
            return Err(format!("h={} must be > 0", self.h));
        }
        if self.horizon <= 0.0 {
            return Err(format!("horizon={} must be > 0", self.horizon));
        }
        if self.replications == 0 {
            return Err("replications=0 must be >= 1".into());
        }
        if self.quad_abs_tol <= 0.0 {
            return Err(format!("quad_abs_tol={} must be > 0", self.quad_abs_tol));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str =
        r#"{"a": -1, "b": 0.5, "eta": 1, "x0": 1.5, "theta": 3, "seed": 42, "horizon": 1000}"#;

    fn message(src: &str) -> String {
        match parse_config(src).unwrap_err() {
            CliError::Config(m) => m,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn defaults_are_filled() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!((c.a, c.b, c.eta, c.x0, c.theta), (-1.0, 0.5, 1.0, 1.5, 3.0));
        assert_eq!(c.seed, 42);
        assert_eq!(c.h, 1e-4);
        assert_eq!(c.quad_abs_tol, 1e-10);
        assert_eq!(c.replications, 1);
        assert!(!c.bridge_correction && !c.allow_nonnegative_a);
        assert_eq!(c.output_format, None);
    }

    #[test]
    fn corridor_errors_name_both_values() {
        let m = message(
            r#"{"a": -1, "b": 0.5, "eta": 2, "x0": 1.5, "theta": 1.5, "seed": 1, "horizon": 1}"#,
        );
        assert_eq!(m, "eta=2 must be < theta=1.5");
    }

    #[test]
    fn zero_b_cites_beta() {
        let m = message(
            r#"{"a": -1, "b": 0, "eta": 1, "x0": 1.5, "theta": 3, "seed": 1, "horizon": 1}"#,
        );
        assert!(m.contains("sqrt(2b)"), "{m}");
    }

    #[test]
    fn unknown_and_mistyped_keys_are_located() {
        let src = "{\n  \"a\": -1,\n  \"b\": 0.5,\n  \"eta\": 1,\n  \"x0\": 1.5,\n  \"theta\": 3,\n  \"seed\": 42,\n  \"horizon\": 10,\n  \"tehta\": 3\n}";
        assert!(message(src).starts_with("line 9, key `tehta`: unknown key"));
        let typed = src.replace("\"tehta\": 3", "\"h\": \"small\"");
        assert!(message(&typed).starts_with("line 9, key `h`: expected a finite number"));
        let neg_seed = MINIMAL.replace("42", "-3");
        assert!(message(&neg_seed).contains("key `seed`"));
        assert!(message("[1, 2]").contains("object"));
        assert!(message("{").starts_with("invalid JSON"));
        assert_eq!(
            message(r#"{"a": -1, "b": 0.5, "eta": 1, "x0": 1.5, "theta": 3, "seed": 1}"#),
            "missing required key `horizon`"
        );
    }

    #[test]
    fn nonnegative_drift_needs_waiver() {
        let src = MINIMAL.replace("\"a\": -1", "\"a\": 0.5");
        assert!(message(&src).contains("allow_nonnegative_a"));
        let waived = src.replace("\"seed\"", "\"allow_nonnegative_a\": true, \"seed\"");
        assert_eq!(parse_config(&waived).unwrap().a, 0.5);
    }

    #[test]
    fn start_must_be_interior() {
        let src = MINIMAL.replace("\"x0\": 1.5", "\"x0\": 1");
        assert_eq!(message(&src), "x0=1 must be > eta=1");
    }
}
