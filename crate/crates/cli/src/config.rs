//! Run configuration: flags layered over an optional key=value file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use gfe_core::exponents::Method;
use gfe_core::{lookup_system, Execution, StateVector, SystemDefinition, Tolerances};

use crate::Common;

/// Keys accepted in a config file; the same names as the long flags.
const KNOWN_KEYS: &[&str] = &[
    "system", "set", "seed", "T", "m", "transient", "tol-abs", "tol-rel", "out", "views", "workers", "methods",
    "zero-star", "crossings", "section", "closure-tol", "max-time", "scale", "scale-fraction", "neutral", "spacing",
    "param", "values", "match-tol", "periodic-set", "component", "span",
];

/// Parsed config file. Repeatable keys keep every value in file order.
#[derive(Debug, Default)]
pub struct FileConfig {
    entries: BTreeMap<String, Vec<String>>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("in config {}", path.display()))
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (no, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| anyhow!("line {}: expected key=value", no + 1))?;
            let key = key.trim();
            if !KNOWN_KEYS.contains(&key) {
                bail!("line {}: unknown key `{key}`", no + 1);
            }
            entries.entry(key.to_string()).or_default().push(value.trim().to_string());
        }
        Ok(FileConfig { entries })
    }

    fn last(&self, key: &str) -> Option<&str> {
        self.entries.get(key).and_then(|v| v.last()).map(String::as_str)
    }

    pub fn all(&self, key: &str) -> &[String] {
        self.entries.get(key).map(Vec::as_slice).unwrap_or(&[])
    }

    /// Flag value if given, otherwise the file value parsed as `T`.
    pub fn pick<T: FromStr>(&self, key: &str, flag: Option<T>) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        if flag.is_some() {
            return Ok(flag);
        }
        match self.last(key) {
            None => Ok(None),
            Some(s) => s.parse().map(Some).map_err(|e| anyhow!("config key `{key}`: {e}")),
        }
    }

    pub fn flag(&self, key: &str, flag: bool) -> Result<bool> {
        if flag {
            return Ok(true);
        }
        Ok(self.pick::<bool>(key, None)?.unwrap_or(false))
    }
}

pub fn parse_assignment(s: &str) -> Result<(String, f64)> {
    let (k, v) = s.split_once('=').ok_or_else(|| anyhow!("expected KEY=VALUE, got `{s}`"))?;
    let value: f64 = v.trim().parse().map_err(|_| anyhow!("`{}` is not a number in `{s}`", v.trim()))?;
    Ok((k.trim().to_string(), value))
}

/// File assignments first, then flags; the last value of a key wins.
pub fn merge_assignments(file: &[String], flags: &[String]) -> Result<Vec<(String, f64)>> {
    let mut out: Vec<(String, f64)> = Vec::new();
    for s in file.iter().chain(flags) {
        let (k, v) = parse_assignment(s)?;
        out.retain(|(key, _)| *key != k);
        out.push((k, v));
    }
    Ok(out)
}

pub fn parse_list<T: FromStr>(s: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    s.split(',')
        .map(str::trim)
        .filter(|p| !p.is_empty())
        .map(|p| p.parse().map_err(|e| anyhow!("`{p}`: {e}")))
        .collect()
}

pub fn parse_methods(s: Option<String>) -> Result<Vec<Method>> {
    match s {
        None => Ok(Method::ALL.to_vec()),
        Some(s) => {
            let v: Vec<Method> = parse_list(&s)?;
            if v.is_empty() {
                bail!("--methods must name at least one method");
            }
            Ok(v)
        }
    }
}

/// Everything shared by the subcommands, resolved and validated.
#[derive(Debug)]
pub struct RunConfig {
    pub file: FileConfig,
    pub overrides: Vec<(String, f64)>,
    pub system: SystemDefinition,
    pub seed: StateVector,
    pub window: Option<f64>,
    pub count: Option<usize>,
    pub transient: Option<f64>,
    pub tolerances: Tolerances,
    pub out: PathBuf,
    pub views: Vec<String>,
    pub workers: Option<usize>,
}

impl RunConfig {
    pub fn resolve(common: Common) -> Result<Self> {
        let file = match &common.config {
            Some(p) => FileConfig::load(p)?,
            None => FileConfig::default(),
        };
        let name = file.pick("system", common.system.clone())?.unwrap_or_else(|| "silnikov".to_string());
        let overrides = merge_assignments(file.all("set"), &common.set)?;
        let system = lookup_system(&name, &overrides)?;
        let seed = match file.pick::<String>("seed", common.seed.clone())? {
            Some(s) => {
                let v: Vec<f64> = parse_list(&s).context("--seed")?;
                let y = StateVector::from_slice(&v)?;
                if y.dim() != system.dimension() {
                    bail!("--seed has {} components, {} expects {}", y.dim(), system.name(), system.dimension());
                }
                y
            }
            None => system.default_seed(),
        };
        let defaults = Tolerances::default();
        let tolerances = defaults.with_tolerances(
            file.pick("tol-abs", common.tol_abs)?.unwrap_or(defaults.abs),
            file.pick("tol-rel", common.tol_rel)?.unwrap_or(defaults.rel),
        );
        if !(tolerances.abs > 0.0 && tolerances.rel > 0.0) {
            bail!("tolerances must be positive");
        }
        let views = parse_list::<String>(&file.pick("views", common.views.clone())?.unwrap_or_else(|| "xy".into()))?;
        let workers = file.pick("workers", common.workers)?;
        if workers == Some(0) {
            bail!("--workers must be at least 1");
        }
        Ok(RunConfig {
            window: file.pick("T", common.window)?,
            count: file.pick("m", common.count)?,
            transient: file.pick("transient", common.transient)?,
            out: file.pick("out", common.out.clone())?.unwrap_or_else(|| PathBuf::from(".")),
            file,
            overrides,
            system,
            seed,
            tolerances,
            views,
            workers,
        })
    }

    pub fn execution(&self) -> Execution {
        if self.workers == Some(1) {
            Execution::Sequential
        } else {
            Execution::Parallel
        }
    }

    /// Transient for attractor-style runs: 200 for autonomous systems, 0 otherwise.
    pub fn attractor_transient(&self) -> f64 {
        self.transient.unwrap_or(if self.system.autonomous() { 200.0 } else { 0.0 })
    }

    /// Transient before searching for returns: 500 for autonomous systems, 0 otherwise.
    pub fn orbit_transient(&self) -> f64 {
        self.transient.unwrap_or(if self.system.autonomous() { 500.0 } else { 0.0 })
    }

    pub fn write(&self, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(&self.out).with_context(|| format!("creating {}", self.out.display()))?;
        let path = self.out.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn file_parsing() {
        let f = FileConfig::parse("# comment\nsystem = lorenz\nset = rho=20\nset=sigma=9\n\nT=0.4\n").unwrap();
        assert_eq!(f.pick::<String>("system", None).unwrap().unwrap(), "lorenz");
        assert_eq!(f.pick::<f64>("T", Some(1.0)).unwrap(), Some(1.0));
        assert_eq!(f.pick::<f64>("T", None).unwrap(), Some(0.4));
        assert_eq!(f.all("set").len(), 2);
        assert!(FileConfig::parse("bogus = 1").is_err());
        assert!(FileConfig::parse("no equals sign").is_err());
    }

    #[test]
    fn flags_win_over_file() {
        let merged = merge_assignments(&["b=0.5".into(), "a=2".into()], &["b=0.6".into()]).unwrap();
        assert_eq!(merged, vec![("a".to_string(), 2.0), ("b".to_string(), 0.6)]);
        assert!(parse_assignment("b").is_err());
        assert!(parse_assignment("b=x").is_err());
    }

    #[test]
    fn lists() {
        assert_eq!(parse_list::<f64>("0.8, 0.6,0.5").unwrap(), vec![0.8, 0.6, 0.5]);
        assert!(parse_list::<f64>("").unwrap().is_empty());
        assert_eq!(parse_methods(Some("gfe,le_j".into())).unwrap(), vec![Method::Gfe, Method::LeJ]);
        assert!(parse_methods(Some(",".into())).is_err());
    }
}
