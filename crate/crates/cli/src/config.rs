//! Declarative pipeline configuration.
//!
//! A run configuration is one JSON object. Relative paths are resolved
//! against the directory holding the configuration file. Validation reports
//! every problem it finds, each tagged with the offending field path.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use tempofuse::{ApConvention, Placement, Split};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest: PathBuf,
    pub features: Vec<PathBuf>,
    pub class_count: usize,
    pub output_dir: PathBuf,
    /// Precomputed temporal models; fitted from the manifest when absent.
    pub models: Option<PathBuf>,
    /// `item_id,class_id` CSV of external items to filter by date.
    pub class_map: Option<PathBuf>,
    pub seed: u64,
    pub cost: f64,
    pub smoothing: f64,
    pub pad: usize,
    pub placement: Placement,
    pub folds: usize,
    pub ap: ApConvention,
    pub threshold: f64,
    pub l2_normalize: bool,
    pub merge_validation: bool,
    pub eval_split: Split,
    pub curves: bool,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl RunConfig {
    /// Resolves a configured path against the configuration's directory.
    pub fn resolve(&self, path: &Path) -> PathBuf {
        resolve(&self.base_dir, path)
    }

    pub fn output_path(&self, name: &str) -> PathBuf {
        self.resolve(&self.output_dir).join(name)
    }

    /// The configuration as written, with paths left unresolved.
    pub fn canonical_json(&self) -> String {
        serde_json::to_string(self).expect("config serializes")
    }
}

fn resolve(base: &Path, path: &Path) -> PathBuf {
    if path.is_absolute() {
        path.to_path_buf()
    } else {
        base.join(path)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FieldError {
    pub path: String,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigErrors(pub Vec<FieldError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "invalid run configuration ({} problems):", self.0.len())?;
        for e in &self.0 {
            writeln!(f, "  {e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const KNOWN_FIELDS: &[&str] = &[
    "manifest",
    "features",
    "class_count",
    "output_dir",
    "models",
    "class_map",
    "seed",
    "cost",
    "smoothing",
    "pad",
    "placement",
    "folds",
    "ap",
    "threshold",
    "l2_normalize",
    "merge_validation",
    "eval_split",
    "curves",
];

struct Checker<'a> {
    fields: &'a Map<String, Value>,
    base: &'a Path,
    errors: Vec<FieldError>,
}

impl<'a> Checker<'a> {
    fn fail(&mut self, path: impl Into<String>, message: impl Into<String>) {
        self.errors.push(FieldError {
            path: path.into(),
            message: message.into(),
        });
    }

    fn existing_path(&mut self, path: String, value: &Value) -> Option<PathBuf> {
        let Some(text) = value.as_str() else {
            self.fail(path, "expected a path string");
            return None;
        };
        let p = PathBuf::from(text);
        if !resolve(self.base, &p).exists() {
            self.fail(path, format!("`{text}` does not exist"));
            return None;
        }
        Some(p)
    }

    fn required_path(&mut self, key: &str) -> Option<PathBuf> {
        match self.fields.get(key) {
            None | Some(Value::Null) => {
                self.fail(key, "required field is missing");
                None
            }
            Some(v) => self.existing_path(key.to_string(), v),
        }
    }

    fn optional_path(&mut self, key: &str) -> Option<PathBuf> {
        match self.fields.get(key) {
            None | Some(Value::Null) => None,
            Some(v) => self.existing_path(key.to_string(), v),
        }
    }

    fn number(&mut self, key: &str, default: f64, valid: impl Fn(f64) -> bool, expect: &str) -> f64 {
        match self.fields.get(key) {
            None => default,
            Some(v) => match v.as_f64() {
                Some(x) if valid(x) => x,
                _ => {
                    self.fail(key, format!("expected {expect}, got {v}"));
                    default
                }
            },
        }
    }

    fn integer(&mut self, key: &str, default: Option<u64>, min: u64) -> u64 {
        match (self.fields.get(key), default) {
            (None, Some(d)) => d,
            (None, None) => {
                self.fail(key, "required field is missing");
                min
            }
            (Some(v), _) => match v.as_u64() {
                Some(x) if x >= min => x,
                _ => {
                    self.fail(key, format!("expected an integer >= {min}, got {v}"));
                    min
                }
            },
        }
    }

    fn boolean(&mut self, key: &str) -> bool {
        match self.fields.get(key) {
            None => false,
            Some(Value::Bool(b)) => *b,
            Some(v) => {
                self.fail(key, format!("expected true or false, got {v}"));
                false
            }
        }
    }

    fn parsed<T: std::str::FromStr>(&mut self, key: &str, default: T, allowed: &str) -> T {
        match self.fields.get(key) {
            None => default,
            Some(Value::String(s)) => match s.parse() {
                Ok(v) => v,
                Err(_) => {
                    self.fail(key, format!("`{s}` is not one of {allowed}"));
                    default
                }
            },
            Some(v) => {
                self.fail(key, format!("expected one of {allowed}, got {v}"));
                default
            }
        }
    }
}

fn parse_split(s: &str) -> Option<Split> {
    match s {
        "train" => Some(Split::Train),
        "validation" => Some(Split::Validation),
        "test" => Some(Split::Test),
        _ => None,
    }
}

/// Parses and checks a run configuration; `base_dir` anchors relative paths.
pub fn validate_config(text: &str, base_dir: &Path) -> Result<RunConfig, ConfigErrors> {
    let value: Value = serde_json::from_str(text).map_err(|e| {
        ConfigErrors(vec![FieldError {
            path: "$".into(),
            message: format!("not valid JSON: {e}"),
        }])
    })?;
    validate_value(&value, base_dir)
}

pub fn validate_value(value: &Value, base_dir: &Path) -> Result<RunConfig, ConfigErrors> {
    let Some(fields) = value.as_object() else {
        return Err(ConfigErrors(vec![FieldError {
            path: "$".into(),
            message: "configuration must be a JSON object".into(),
        }]));
    };
    let mut c = Checker {
        fields,
        base: base_dir,
        errors: Vec::new(),
    };
    for key in fields.keys() {
        if !KNOWN_FIELDS.contains(&key.as_str()) {
            c.fail(key.clone(), "unknown field");
        }
    }

    let manifest = c.required_path("manifest");
    let features = match fields.get("features") {
        Some(Value::Array(items)) if !items.is_empty() => items
            .iter()
            .enumerate()
            .filter_map(|(i, v)| c.existing_path(format!("features[{i}]"), v))
            .collect(),
        Some(Value::Array(_)) => {
            c.fail("features", "at least one feature source is required");
            Vec::new()
        }
        Some(v) => {
            c.fail("features", format!("expected an array of paths, got {v}"));
            Vec::new()
        }
        None => {
            c.fail("features", "required field is missing");
            Vec::new()
        }
    };
    let class_count = c.integer("class_count", None, 2) as usize;
    let output_dir = match fields.get("output_dir") {
        Some(Value::String(s)) if !s.is_empty() => PathBuf::from(s),
        Some(v) => {
            c.fail("output_dir", format!("expected a directory path, got {v}"));
            PathBuf::new()
        }
        None => {
            c.fail("output_dir", "required field is missing");
            PathBuf::new()
        }
    };
    let models = c.optional_path("models");
    let class_map = c.optional_path("class_map");
    let seed = c.integer("seed", Some(0), 0);
    let cost = c.number("cost", 1.0, |x| x > 0.0 && x.is_finite(), "a positive number");
    let smoothing = c.number(
        "smoothing",
        tempofuse::temporal_model::DEFAULT_SMOOTHING,
        |x| x > 0.0 && x <= 1.0,
        "a number in (0, 1]",
    );
    let pad = c.integer("pad", Some(tempofuse::temporal_model::DEFAULT_PAD as u64), 0) as usize;
    if pad > 365 {
        c.fail("pad", format!("expected at most 365 days, got {pad}"));
    }
    let placement = c.parsed("placement", Placement::default(), "none, low, high, both");
    let folds = c.integer("folds", Some(5), 2) as usize;
    let ap = c.parsed("ap", ApConvention::default(), "step, interp11");
    let threshold = c.number("threshold", 0.9, |x| (0.0..=1.0).contains(&x), "a number in [0, 1]");
    let l2_normalize = c.boolean("l2_normalize");
    let merge_validation = c.boolean("merge_validation");
    let curves = c.boolean("curves");
    let eval_split = match fields.get("eval_split") {
        None => Split::Test,
        Some(v) => match v.as_str().and_then(parse_split) {
            Some(s) => s,
            None => {
                c.fail("eval_split", format!("expected train, validation or test, got {v}"));
                Split::Test
            }
        },
    };

    if !c.errors.is_empty() {
        return Err(ConfigErrors(c.errors));
    }
    Ok(RunConfig {
        manifest: manifest.expect("checked"),
        features,
        class_count,
        output_dir,
        models,
        class_map,
        seed,
        cost,
        smoothing,
        pad,
        placement,
        folds,
        ap,
        threshold,
        l2_normalize,
        merge_validation,
        eval_split,
        curves,
        base_dir: base_dir.to_path_buf(),
    })
}
