use std::collections::BTreeMap;
use std::fmt;

use super::RunError;

pub const NAMESPACES: [&str; 3] = ["algorithm", "environment", "runner"];

#[derive(Debug, Clone, PartialEq)]
pub enum ConfigValue {
    Int(i64),
    Real(f64),
    Bool(bool),
    Text(String),
}

impl ConfigValue {
    pub fn type_name(&self) -> &'static str {
        match self {
            ConfigValue::Int(_) => "integer",
            ConfigValue::Real(_) => "real",
            ConfigValue::Bool(_) => "boolean",
            ConfigValue::Text(_) => "text",
        }
    }

    /// Parses `raw` as a value of the same type as `self`.
    pub fn parse_like(&self, raw: &str) -> Option<ConfigValue> {
        match self {
            ConfigValue::Int(_) => raw.parse().ok().map(ConfigValue::Int),
            ConfigValue::Real(_) => raw
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(ConfigValue::Real),
            ConfigValue::Bool(_) => match raw {
                "true" => Some(ConfigValue::Bool(true)),
                "false" => Some(ConfigValue::Bool(false)),
                _ => None,
            },
            ConfigValue::Text(_) => Some(ConfigValue::Text(raw.to_string())),
        }
    }
}

impl fmt::Display for ConfigValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigValue::Int(v) => write!(f, "{v}"),
            ConfigValue::Real(v) => write!(f, "{v:?}"),
            ConfigValue::Bool(v) => write!(f, "{v}"),
            ConfigValue::Text(v) => f.write_str(v),
        }
    }
}

/// Three flat namespaces of typed settings.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigTree {
    namespaces: BTreeMap<String, BTreeMap<String, ConfigValue>>,
}

impl ConfigTree {
    pub fn new() -> Self {
        let mut namespaces = BTreeMap::new();
        for ns in NAMESPACES {
            namespaces.insert(ns.to_string(), BTreeMap::new());
        }
        Self { namespaces }
    }

    fn check_ns(ns: &str) -> Result<(), RunError> {
        if NAMESPACES.contains(&ns) {
            Ok(())
        } else {
            Err(RunError::Usage(format!(
                "unknown namespace {ns:?}; expected one of {}",
                NAMESPACES.join(", ")
            )))
        }
    }

    /// Adds or replaces a default. Defaults may change a key's type.
    pub fn set_default(&mut self, ns: &str, key: &str, value: ConfigValue) {
        Self::check_ns(ns).expect("defaults use known namespaces");
        self.namespaces
            .get_mut(ns)
            .expect("namespace exists")
            .insert(key.to_string(), value);
    }

    pub fn get(&self, ns: &str, key: &str) -> Option<&ConfigValue> {
        self.namespaces.get(ns)?.get(key)
    }

    pub fn contains(&self, ns: &str, key: &str) -> bool {
        self.get(ns, key).is_some()
    }

    /// Applies an override to an existing key, enforcing its type.
    pub fn apply_override(&mut self, ns: &str, key: &str, raw: &str) -> Result<(), RunError> {
        Self::check_ns(ns)?;
        let current = self.get(ns, key).ok_or_else(|| {
            RunError::Usage(format!("unknown key \"{ns}.{key}\" in --{ns}.{key}={raw}"))
        })?;
        let value = current.parse_like(raw).ok_or_else(|| {
            RunError::Usage(format!(
                "--{ns}.{key}={raw}: expected a {} value",
                current.type_name()
            ))
        })?;
        self.namespaces
            .get_mut(ns)
            .expect("namespace exists")
            .insert(key.to_string(), value);
        Ok(())
    }

    pub fn entries(&self, ns: &str) -> impl Iterator<Item = (&str, &ConfigValue)> {
        self.namespaces
            .get(ns)
            .into_iter()
            .flat_map(|m| m.iter().map(|(k, v)| (k.as_str(), v)))
    }

    fn missing(ns: &str, key: &str) -> RunError {
        RunError::Usage(format!("missing setting {ns}.{key}"))
    }

    fn wrong(ns: &str, key: &str, want: &str, got: &ConfigValue) -> RunError {
        RunError::Usage(format!(
            "{ns}.{key} must be a {want} value, found {} {got}",
            got.type_name()
        ))
    }

    pub fn int(&self, ns: &str, key: &str) -> Result<i64, RunError> {
        match self.get(ns, key) {
            Some(ConfigValue::Int(v)) => Ok(*v),
            Some(other) => Err(Self::wrong(ns, key, "integer", other)),
            None => Err(Self::missing(ns, key)),
        }
    }

    /// Integer setting that must be non-negative.
    pub fn count(&self, ns: &str, key: &str) -> Result<u64, RunError> {
        let v = self.int(ns, key)?;
        u64::try_from(v).map_err(|_| RunError::Usage(format!("{ns}.{key} must be non-negative, got {v}")))
    }

    pub fn real(&self, ns: &str, key: &str) -> Result<f64, RunError> {
        match self.get(ns, key) {
            Some(ConfigValue::Real(v)) => Ok(*v),
            Some(ConfigValue::Int(v)) => Ok(*v as f64),
            Some(other) => Err(Self::wrong(ns, key, "real", other)),
            None => Err(Self::missing(ns, key)),
        }
    }

    pub fn boolean(&self, ns: &str, key: &str) -> Result<bool, RunError> {
        match self.get(ns, key) {
            Some(ConfigValue::Bool(v)) => Ok(*v),
            Some(other) => Err(Self::wrong(ns, key, "boolean", other)),
            None => Err(Self::missing(ns, key)),
        }
    }

    pub fn text(&self, ns: &str, key: &str) -> Result<&str, RunError> {
        match self.get(ns, key) {
            Some(ConfigValue::Text(v)) => Ok(v),
            Some(other) => Err(Self::wrong(ns, key, "text", other)),
            None => Err(Self::missing(ns, key)),
        }
    }

    /// TOML document with one table per namespace.
    pub fn to_toml(&self) -> String {
        let mut doc = toml::Table::new();
        for (ns, entries) in &self.namespaces {
            let mut table = toml::Table::new();
            for (k, v) in entries {
                let tv = match v {
                    ConfigValue::Int(i) => toml::Value::Integer(*i),
                    ConfigValue::Real(r) => toml::Value::Float(*r),
                    ConfigValue::Bool(b) => toml::Value::Boolean(*b),
                    ConfigValue::Text(s) => toml::Value::String(s.clone()),
                };
                table.insert(k.clone(), tv);
            }
            doc.insert(ns.clone(), toml::Value::Table(table));
        }
        toml::to_string(&doc).expect("plain tables serialize")
    }

    pub fn from_toml(text: &str) -> Result<Self, RunError> {
        let doc: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| RunError::Usage(format!("invalid config snapshot: {e}")))?;
        let mut tree = ConfigTree::new();
        for (ns, value) in doc {
            Self::check_ns(&ns)?;
            let table = value
                .as_table()
                .ok_or_else(|| RunError::Usage(format!("snapshot section {ns} is not a table")))?;
            for (k, v) in table {
                let cv = match v {
                    toml::Value::Integer(i) => ConfigValue::Int(*i),
                    toml::Value::Float(f) => ConfigValue::Real(*f),
                    toml::Value::Boolean(b) => ConfigValue::Bool(*b),
                    toml::Value::String(s) => ConfigValue::Text(s.clone()),
                    other => {
                        return Err(RunError::Usage(format!(
                            "snapshot value {ns}.{k} has unsupported type {}",
                            other.type_str()
                        )))
                    }
                };
                tree.set_default(&ns, k, cv);
            }
        }
        Ok(tree)
    }

    /// One `ns.key = value` line per setting, sorted.
    pub fn describe(&self) -> String {
        let mut out = String::new();
        for (ns, entries) in &self.namespaces {
            for (k, v) in entries {
                out.push_str(&format!("{ns}.{k} = {v}\n"));
            }
        }
        out
    }
}

/// Splits `--ns.key=value` into its parts.
pub fn parse_token(token: &str) -> Result<(String, String, String), RunError> {
    let bad = || RunError::Usage(format!("expected --<namespace>.<key>=<value>, got {token:?}"));
    let body = token.strip_prefix("--").ok_or_else(bad)?;
    let (path, value) = body.split_once('=').ok_or_else(bad)?;
    let (ns, key) = path.split_once('.').ok_or_else(bad)?;
    if ns.is_empty() || key.is_empty() {
        return Err(bad());
    }
    Ok((ns.to_string(), key.to_string(), value.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tree() -> ConfigTree {
        let mut t = ConfigTree::new();
        t.set_default("algorithm", "gamma", ConfigValue::Real(0.99));
        t.set_default("algorithm", "nr_epochs", ConfigValue::Int(10));
        t.set_default("runner", "record_wall_time", ConfigValue::Bool(false));
        t.set_default("runner", "project", ConfigValue::Text("p".into()));
        t
    }

    #[test]
    fn overrides_respect_types() {
        let mut t = tree();
        t.apply_override("algorithm", "gamma", "0.9").unwrap();
        assert_eq!(t.real("algorithm", "gamma").unwrap(), 0.9);
        assert!(t.apply_override("algorithm", "nr_epochs", "2.5").is_err());
        assert!(t.apply_override("runner", "record_wall_time", "yes").is_err());
        t.apply_override("algorithm", "gamma", "1").unwrap();
        assert_eq!(t.get("algorithm", "gamma"), Some(&ConfigValue::Real(1.0)));
    }

    #[test]
    fn unknown_key_names_the_token() {
        let err = tree().apply_override("algorithm", "gama", "0.9").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("unknown key") && msg.contains("--algorithm.gama=0.9"), "{msg}");
    }

    #[test]
    fn token_grammar() {
        assert_eq!(
            parse_token("--runner.seed=3").unwrap(),
            ("runner".into(), "seed".into(), "3".into())
        );
        assert_eq!(parse_token("--a.b=x=y").unwrap().2, "x=y");
        for bad in ["runner.seed=3", "--runner=3", "--.x=1", "--runner.seed"] {
            assert!(parse_token(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn toml_round_trip() {
        let mut t = tree();
        t.set_default("algorithm", "learning_rate", ConfigValue::Real(0.0003));
        t.set_default("algorithm", "tiny", ConfigValue::Real(1e-300));
        t.set_default("algorithm", "third", ConfigValue::Real(1.0 / 3.0));
        let back = ConfigTree::from_toml(&t.to_toml()).unwrap();
        assert_eq!(back, t);
    }
}
