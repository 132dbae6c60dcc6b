//! Experiment configuration.
//!
//! A config file is TOML; nested tables flatten to dotted keys, so
//! `[w.1] slope = 2` and `"w.1.slope" = 2` are the same setting. Command-line
//! overrides use the same keys. Unknown keys and bad values are collected and
//! reported together.

use std::collections::BTreeMap;
use std::path::Path;

use toml::{Table, Value};

use crate::dynamics::RateFamily;
use crate::env::{EnvironmentKind, EnvironmentSpec};
use crate::fluctuations::{CylinderFunction, TestFunction};
use crate::oulimit::default_reference_size;
use crate::wfunc::{AxisProfile, WFunction};
use crate::{Error, Result};

const SCALAR_KEYS: &[&str] = &[
    "N",
    "d",
    "rho",
    "b",
    "a",
    "family",
    "T",
    "replicas",
    "seed",
    "threads",
    "timing",
    "events",
    "G-set",
    "times",
    "lambda",
    "N-list",
    "N_ref",
    "K",
    "rhs",
    "f",
    "empirical",
    "env.kind",
    "env.theta",
    "env.seed",
    "env.value",
    "env.values",
    "env.probs",
    "env.period",
    "env.table",
];

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub n: usize,
    pub d: usize,
    pub rho: f64,
    pub family: RateFamily,
    pub t_end: f64,
    pub replicas: u64,
    pub seed: u64,
    pub threads: Option<usize>,
    /// Fill the `wall_time` column; off by default so outputs are reproducible.
    pub timing: bool,
    /// Write one binary event log per replica.
    pub events: bool,
    pub g_set: Vec<String>,
    pub times: Vec<f64>,
    pub lambda: f64,
    pub n_list: Vec<usize>,
    pub n_ref: usize,
    pub modes: usize,
    pub rhs: String,
    pub cylinder: String,
    pub empirical: Option<String>,
    pub w: Vec<AxisProfile>,
    pub env: EnvironmentSpec,
    /// Resolved settings, used for hashing and the manifest.
    entries: BTreeMap<String, Value>,
}

fn flatten(prefix: &str, table: &Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Parses a single override value as TOML, falling back to a bare string.
/// An unbracketed comma list becomes an array.
fn parse_value(text: &str) -> Value {
    let text = text.trim();
    if !text.starts_with('[') && !text.starts_with('"') && text.contains(',') {
        return Value::Array(text.split(',').map(parse_value).collect());
    }
    let doc = format!("v = {text}");
    match doc.parse::<Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| Value::String(text.into())),
        Err(_) => Value::String(text.into()),
    }
}

struct Reader {
    entries: BTreeMap<String, Value>,
    errors: Vec<String>,
}

impl Reader {
    fn float(&mut self, key: &str, default: f64) -> f64 {
        match self.entries.get(key) {
            None => default,
            Some(Value::Float(v)) => *v,
            Some(Value::Integer(v)) => *v as f64,
            Some(other) => {
                self.errors.push(format!("{key}: expected a number, got {other}"));
                default
            }
        }
    }

    fn uint(&mut self, key: &str, default: u64) -> u64 {
        match self.entries.get(key) {
            None => default,
            Some(Value::Integer(v)) if *v >= 0 => *v as u64,
            Some(other) => {
                self.errors
                    .push(format!("{key}: expected a nonnegative integer, got {other}"));
                default
            }
        }
    }

    fn boolean(&mut self, key: &str, default: bool) -> bool {
        match self.entries.get(key) {
            None => default,
            Some(Value::Boolean(v)) => *v,
            Some(other) => {
                self.errors.push(format!("{key}: expected true or false, got {other}"));
                default
            }
        }
    }

    fn string(&mut self, key: &str, default: &str) -> String {
        match self.entries.get(key) {
            None => default.to_string(),
            Some(Value::String(s)) => s.clone(),
            Some(other) => {
                self.errors.push(format!("{key}: expected a string, got {other}"));
                default.to_string()
            }
        }
    }

    fn list<T>(&mut self, key: &str, default: Vec<T>, item: impl Fn(&Value) -> Option<T>) -> Vec<T> {
        let parsed = match self.entries.get(key) {
            None => return default,
            Some(Value::Array(a)) => a.iter().map(&item).collect::<Option<Vec<T>>>(),
            Some(v) => item(v).map(|x| vec![x]),
        };
        parsed.unwrap_or_else(|| {
            self.errors.push(format!("{key}: malformed list {}", self.entries[key]));
            default
        })
    }

    fn floats(&mut self, key: &str, default: Vec<f64>) -> Vec<f64> {
        self.list(key, default, |v| match v {
            Value::Float(f) => Some(*f),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        })
    }

    fn uints(&mut self, key: &str, default: Vec<usize>) -> Vec<usize> {
        self.list(key, default, |v| match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => None,
        })
    }

    fn strings(&mut self, key: &str, default: Vec<String>) -> Vec<String> {
        if let Some(Value::String(s)) = self.entries.get(key) {
            return s
                .split(',')
                .map(|t| t.trim().to_string())
                .filter(|t| !t.is_empty())
                .collect();
        }
        self.list(key, default, |v| v.as_str().map(str::to_string))
    }

    fn jumps(&mut self, key: &str) -> Vec<(f64, f64)> {
        self.list(key, Vec::new(), |v| {
            let pair = v.as_array()?;
            let num = |x: &Value| x.as_float().or_else(|| x.as_integer().map(|i| i as f64));
            match pair.as_slice() {
                [u, s] => Some((num(u)?, num(s)?)),
                _ => None,
            }
        })
    }

    fn check<T>(&mut self, key: &str, r: Result<T>) -> Option<T> {
        r.map_err(|e| self.errors.push(format!("{key}: {e}"))).ok()
    }
}

impl ExperimentConfig {
    /// Defaults: a flat one-dimensional system.
    pub fn default_config() -> Self {
        Self::from_entries(BTreeMap::new()).expect("defaults are valid")
    }

    pub fn from_toml_str(text: &str, overrides: &[(String, String)]) -> Result<Self> {
        let table: Table = text
            .parse()
            .map_err(|e: toml::de::Error| Error::Config(vec![e.to_string()]))?;
        let mut entries = BTreeMap::new();
        flatten("", &table, &mut entries);
        for (k, v) in overrides {
            entries.insert(k.clone(), parse_value(v));
        }
        Self::from_entries(entries)
    }

    pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> Result<Self> {
        let text = match path {
            Some(p) => std::fs::read_to_string(p)?,
            None => String::new(),
        };
        Self::from_toml_str(&text, overrides)
    }

    fn from_entries(entries: BTreeMap<String, Value>) -> Result<Self> {
        let mut r = Reader {
            entries,
            errors: Vec::new(),
        };
        let unknown: Vec<String> = r
            .entries
            .keys()
            .filter(|k| !SCALAR_KEYS.contains(&k.as_str()) && !is_w_key(k))
            .map(|k| format!("{k}: unknown key"))
            .collect();
        r.errors.extend(unknown);

        let d = r.uint("d", 1) as usize;
        let n = r.uint("N", 64) as usize;
        let rho = r.float("rho", 0.5);
        let b = r.float("b", 0.0);
        let a = r.float("a", 0.0);
        let family_name = r.string("family", "standard");
        let t_end = r.float("T", 0.05);
        let replicas = r.uint("replicas", 100);
        let seed = r.uint("seed", 1);
        let threads = r.entries.contains_key("threads").then(|| r.uint("threads", 1) as usize);
        let timing = r.boolean("timing", false);
        let events = r.boolean("events", false);
        let g_set = r.strings("G-set", vec!["c1".into(), "s1".into()]);
        let times = r.floats("times", vec![0.0, t_end / 5.0, t_end]);
        let lambda = r.float("lambda", 1.0);
        let n_list = r.uints("N-list", vec![64, 128, 256]);
        let n_ref = r.uint("N_ref", default_reference_size(d.max(1)) as u64) as usize;
        let modes = r.uint("K", 16) as usize;
        let rhs = r.string("rhs", "c1");
        let cylinder = r.string("f", "h11");
        let empirical = r.entries.contains_key("empirical").then(|| r.string("empirical", ""));

        if d == 0 || d > 3 {
            r.errors.push(format!("d: dimension must be 1, 2 or 3, got {d}"));
        }
        if n < 2 {
            r.errors.push(format!("N: lattice size must be ≥ 2, got {n}"));
        }
        if !(0.0..=1.0).contains(&rho) {
            r.errors.push(format!("rho: density must lie in [0, 1], got {rho}"));
        }
        if !(t_end >= 0.0 && t_end.is_finite()) {
            r.errors.push(format!("T: final time must be nonnegative, got {t_end}"));
        }
        if !(lambda > 0.0 && lambda.is_finite()) {
            r.errors.push(format!("lambda: λ must be positive, got {lambda}"));
        }
        if threads == Some(0) {
            r.errors.push("threads: must be at least 1".into());
        }
        if modes == 0 {
            r.errors.push("K: need at least one mode".into());
        }
        if n_list.is_empty() || n_list.windows(2).any(|w| w[0] >= w[1]) || n_list.iter().any(|&m| m < 2) {
            r.errors
                .push(format!("N-list: sizes must be ≥ 2 and increasing, got {n_list:?}"));
        }
        if times.iter().any(|t| !(*t >= 0.0 && *t <= t_end)) || times.windows(2).any(|w| w[0] >= w[1]) {
            r.errors
                .push(format!("times: must increase within [0, T], got {times:?}"));
        }
        let family = match family_name.as_str() {
            "standard" => r.check("b", RateFamily::standard(b)),
            "extended" => r.check("a, b", RateFamily::extended(a, b)),
            other => {
                r.errors
                    .push(format!("family: expected 'standard' or 'extended', got '{other}'"));
                None
            }
        };

        let mut w = Vec::new();
        for k in 1..=d.max(1) {
            let slope = r.float(&format!("w.{k}.slope"), 1.0);
            let jumps = r.jumps(&format!("w.{k}.jumps"));
            if let Some(p) = r.check(&format!("w.{k}"), AxisProfile::new(slope, jumps)) {
                w.push(p);
            }
        }
        let stray_axes: Vec<String> = r
            .entries
            .keys()
            .filter(|k| is_w_key(k) && axis_of(k).is_none_or(|a| a == 0 || a > d))
            .map(|k| format!("{k}: axis out of range for d = {d}"))
            .collect();
        r.errors.extend(stray_axes);

        let env = read_env(&mut r, d);

        for g in &g_set {
            r.check("G-set", TestFunction::parse(g, d.max(1)));
        }
        r.check("rhs", TestFunction::parse(&rhs, d.max(1)));
        r.check("f", CylinderFunction::parse(&cylinder, d.max(1)));

        if !r.errors.is_empty() {
            return Err(Error::Config(r.errors));
        }
        Ok(ExperimentConfig {
            n,
            d,
            rho,
            family: family.expect("validated"),
            t_end,
            replicas,
            seed,
            threads,
            timing,
            events,
            g_set,
            times,
            lambda,
            n_list,
            n_ref,
            modes,
            rhs,
            cylinder,
            empirical,
            w,
            env: env.expect("validated"),
            entries: r.entries,
        })
    }

    pub fn wfunction(&self) -> WFunction {
        WFunction::new(self.w.clone()).expect("validated profiles")
    }

    pub fn test_functions(&self) -> Vec<TestFunction> {
        self.g_set
            .iter()
            .map(|g| TestFunction::parse(g, self.d).expect("validated"))
            .collect()
    }

    pub fn rhs_function(&self) -> TestFunction {
        TestFunction::parse(&self.rhs, self.d).expect("validated")
    }

    pub fn cylinder_function(&self) -> CylinderFunction {
        CylinderFunction::parse(&self.cylinder, self.d).expect("validated")
    }

    /// The explicitly given settings as sorted `key = value` lines.
    pub fn canonical_text(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

fn is_w_key(k: &str) -> bool {
    k.starts_with("w.") && (k.ends_with(".slope") || k.ends_with(".jumps"))
}

fn axis_of(k: &str) -> Option<usize> {
    k.split('.').nth(1)?.parse().ok()
}

fn read_env(r: &mut Reader, d: usize) -> Option<EnvironmentSpec> {
    let kind = r.string("env.kind", "constant");
    let seed = r.uint("env.seed", 0);
    let kind = match kind.as_str() {
        "constant" => EnvironmentKind::Constant {
            value: r.float("env.value", 1.0),
        },
        "iid" => EnvironmentKind::Iid {
            values: r.floats("env.values", vec![1.0, 2.0]),
            probs: r.floats("env.probs", vec![0.5, 0.5]),
        },
        "periodic" => EnvironmentKind::Periodic {
            period: r.uints("env.period", vec![2; d.max(1)]),
            table: r.floats("env.table", vec![1.0, 3.0]),
        },
        other => {
            r.errors
                .push(format!("env.kind: expected constant, iid or periodic, got '{other}'"));
            return None;
        }
    };
    let default_theta = match &kind {
        EnvironmentKind::Constant { value } => value.max(1.0 / value).max(1.0),
        EnvironmentKind::Iid { values, .. } | EnvironmentKind::Periodic { table: values, .. } => {
            values.iter().fold(1.0f64, |m, &v| m.max(v).max(1.0 / v))
        }
    };
    let theta = r.float("env.theta", default_theta);
    if let EnvironmentKind::Periodic { period, .. } = &kind {
        if period.len() != d {
            r.errors
                .push(format!("env.period: need {d} entries, got {}", period.len()));
            return None;
        }
    }
    let spec = EnvironmentSpec { kind, theta, seed };
    r.check("env", spec.validate())?;
    Some(spec)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<ExperimentConfig> {
        ExperimentConfig::from_toml_str(text, &[])
    }

    #[test]
    fn defaults() {
        let c = ExperimentConfig::default_config();
        assert_eq!((c.n, c.d, c.rho), (64, 1, 0.5));
        assert_eq!(c.family, RateFamily::Standard { b: 0.0 });
        assert_eq!(c.n_ref, 512);
        assert_eq!(c.wfunction(), WFunction::identity(1));
    }

    #[test]
    fn nested_tables_and_dotted_keys_agree() {
        let a = parse("d = 1\n[w.1]\nslope = 2.0\njumps = [[0.5, 0.1]]\n[env]\nkind = \"periodic\"\nperiod = [2]\ntable = [1, 3]\n").unwrap();
        let b = parse("d = 1\n\"w.1.slope\" = 2.0\n\"w.1.jumps\" = [[0.5, 0.1]]\n\"env.kind\" = \"periodic\"\n\"env.period\" = [2]\n\"env.table\" = [1.0, 3.0]\n").unwrap();
        assert_eq!(a.w, b.w);
        assert_eq!(a.env, b.env);
        assert_eq!(a.env.theta, 3.0);
    }

    #[test]
    fn comma_lists_on_the_command_line() {
        let o = |k: &str, v: &str| (k.to_string(), v.to_string());
        let c =
            ExperimentConfig::from_toml_str("", &[o("N-list", "32, 64"), o("G-set", "c1,s2"), o("times", "0,0.01")])
                .unwrap();
        assert_eq!(c.n_list, vec![32, 64]);
        assert_eq!(c.g_set, vec!["c1".to_string(), "s2".to_string()]);
        assert_eq!(c.times, vec![0.0, 0.01]);
    }

    #[test]
    fn overrides_take_precedence() {
        let c = ExperimentConfig::from_toml_str(
            "N = 32\nrho = 0.2",
            &[("N".into(), "128".into()), ("G-set".into(), "c1, s2".into())],
        )
        .unwrap();
        assert_eq!(c.n, 128);
        assert_eq!(c.rho, 0.2);
        assert_eq!(c.g_set, vec!["c1", "s2"]);
    }

    #[test]
    fn field_level_errors_are_collected() {
        let err = parse("rho = 1.5\nb = -0.7\nlambda = 0\nbogus = 1\n\"env.kind\" = \"iid\"\n\"env.values\" = [0.1, 2]\n\"env.theta\" = 2")
            .unwrap_err();
        let Error::Config(msgs) = err else { panic!("{err}") };
        for key in ["rho:", "b:", "lambda:", "bogus:", "env:"] {
            assert!(msgs.iter().any(|m| m.starts_with(key)), "{key} missing from {msgs:?}");
        }
    }

    #[test]
    fn extended_family_constraint() {
        assert!(parse("family = \"extended\"\na = 0.1\nb = 0.1").is_ok());
        assert!(parse("family = \"extended\"\na = -1.0\nb = 0.1").is_err());
    }

    #[test]
    fn canonical_text_is_order_free() {
        let a = parse("N = 8\nrho = 0.25").unwrap();
        let b = parse("rho = 0.25\nN = 8").unwrap();
        assert_eq!(a.canonical_text(), b.canonical_text());
    }
}
