//! `key = value` run configuration checked against a per-command schema.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Int,
    Real,
    Bool,
    Str,
    Path,
}

impl Kind {
    fn describe(self) -> &'static str {
        match self {
            Kind::Int => "an integer",
            Kind::Real => "a real number",
            Kind::Bool => "true or false",
            Kind::Str => "a string",
            Kind::Path => "a path",
        }
    }

    fn short(self) -> &'static str {
        match self {
            Kind::Int => "int",
            Kind::Real => "real",
            Kind::Bool => "bool",
            Kind::Str => "string",
            Kind::Path => "path",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(u64),
    Real(f64),
    Bool(bool),
    Str(String),
}

/// One schema entry. `default: None` marks a required key; `Some("")`
/// marks an optional key that is unset unless given.
#[derive(Debug, Clone, Copy)]
pub struct Key {
    pub name: &'static str,
    pub kind: Kind,
    pub default: Option<&'static str>,
    pub help: &'static str,
}

pub const fn key(
    name: &'static str,
    kind: Kind,
    default: Option<&'static str>,
    help: &'static str,
) -> Key {
    Key {
        name,
        kind,
        default,
        help,
    }
}

pub type Schema = &'static [Key];

/// Help text listing every key with its type and default.
pub fn describe(schema: Schema) -> String {
    let width = schema.iter().map(|k| k.name.len()).max().unwrap_or(0);
    let mut s = String::from("Config keys (set in --config FILE or as KEY=VALUE arguments):\n");
    for k in schema {
        let default = match k.default {
            None => "required".to_owned(),
            Some("") => "unset".to_owned(),
            Some(d) => format!("default {d}"),
        };
        writeln!(
            s,
            "  {:width$}  {:6}  {:14}  {}",
            k.name,
            k.kind.short(),
            default,
            k.help
        )
        .unwrap();
    }
    s
}

fn parse_value(kind: Kind, raw: &str) -> Option<Value> {
    match kind {
        Kind::Int => raw.parse().ok().map(Value::Int),
        Kind::Real => raw
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .map(Value::Real),
        Kind::Bool => match raw {
            "true" => Some(Value::Bool(true)),
            "false" => Some(Value::Bool(false)),
            _ => None,
        },
        Kind::Str | Kind::Path => Some(Value::Str(raw.to_owned())),
    }
}

/// Typed values resolved against a schema.
#[derive(Debug, Clone)]
pub struct RunConfig {
    schema: Schema,
    values: BTreeMap<&'static str, Value>,
}

impl RunConfig {
    pub fn new(schema: Schema) -> Self {
        RunConfig {
            schema,
            values: BTreeMap::new(),
        }
    }

    fn lookup(&self, name: &str) -> Result<&'static Key> {
        self.schema
            .iter()
            .find(|k| k.name == name)
            .ok_or_else(|| Error::UnknownKey(name.to_owned()))
    }

    /// Sets one key from its textual value; `line` is reported on errors.
    pub fn set(&mut self, name: &str, raw: &str, line: usize) -> Result<()> {
        let k = self.lookup(name)?;
        let v = parse_value(k.kind, raw).ok_or_else(|| Error::TypeError {
            line,
            key: name.to_owned(),
            expected: k.kind.describe(),
            value: raw.to_owned(),
        })?;
        self.values.insert(k.name, v);
        Ok(())
    }

    /// Applies `key = value` lines; later duplicates win.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (k, v) = content.split_once('=').ok_or_else(|| Error::Parse {
                line,
                msg: format!("expected `key = value`, got `{content}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(Error::Parse {
                    line,
                    msg: "empty key".into(),
                });
            }
            self.set(k, v, line)?;
        }
        Ok(())
    }

    /// Fills defaults and checks that every required key is present.
    pub fn finish(mut self) -> Result<Self> {
        for k in self.schema {
            if self.values.contains_key(k.name) {
                continue;
            }
            match k.default {
                None => {
                    return Err(Error::InvalidConfig(format!(
                        "missing required key `{}`",
                        k.name
                    )))
                }
                Some("") => {}
                Some(d) => {
                    let v = parse_value(k.kind, d).expect("schema defaults are well-typed");
                    self.values.insert(k.name, v);
                }
            }
        }
        Ok(self)
    }

    fn value(&self, name: &str) -> Option<&Value> {
        debug_assert!(self.lookup(name).is_ok(), "`{name}` not in schema");
        self.values.get(name)
    }

    pub fn usize(&self, name: &str) -> usize {
        match self.value(name) {
            Some(Value::Int(v)) => *v as usize,
            other => panic!("`{name}` is not an integer: {other:?}"),
        }
    }

    pub fn u64(&self, name: &str) -> u64 {
        match self.value(name) {
            Some(Value::Int(v)) => *v,
            other => panic!("`{name}` is not an integer: {other:?}"),
        }
    }

    pub fn f64(&self, name: &str) -> f64 {
        match self.value(name) {
            Some(Value::Real(v)) => *v,
            other => panic!("`{name}` is not a real: {other:?}"),
        }
    }

    pub fn bool(&self, name: &str) -> bool {
        match self.value(name) {
            Some(Value::Bool(v)) => *v,
            other => panic!("`{name}` is not a bool: {other:?}"),
        }
    }

    pub fn opt_str(&self, name: &str) -> Option<&str> {
        match self.value(name) {
            Some(Value::Str(s)) if !s.is_empty() => Some(s),
            _ => None,
        }
    }

    pub fn str(&self, name: &str) -> &str {
        self.opt_str(name).unwrap_or("")
    }

    pub fn opt_path(&self, name: &str) -> Option<PathBuf> {
        self.opt_str(name).map(PathBuf::from)
    }

    pub fn path(&self, name: &str) -> PathBuf {
        PathBuf::from(self.str(name))
    }

    /// Integer key where `0` means "pick automatically".
    pub fn auto(&self, name: &str) -> Option<usize> {
        Some(self.usize(name)).filter(|&v| v > 0)
    }

    /// Parses a string key with `FromStr`.
    pub fn parsed<T: std::str::FromStr<Err = Error>>(&self, name: &str) -> Result<T> {
        self.str(name).parse()
    }
}

/// Parses `text` against `schema` and fills defaults.
pub fn parse_config(text: &str, schema: Schema) -> Result<RunConfig> {
    let mut c = RunConfig::new(schema);
    c.apply_text(text)?;
    c.finish()
}
