//! Experiment configuration: `key = value` lines under `[section]` headers.
//! Keys are case-insensitive and may also be written as `section.key` at
//! top level. Unknown keys are fatal and name the nearest known key.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use cgokit_core::ScheduleVariant;
use thiserror::Error;

use crate::averaging::WeightMode;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: cannot parse {text:?}")]
    Syntax { line: usize, text: String },
    #[error("unknown key {key:?}{}", suggestion.as_ref().map(|s| format!(" (did you mean {s:?}?)")).unwrap_or_default())]
    UnknownKey { key: String, suggestion: Option<String> },
    #[error("line {line}: duplicate key {key:?}")]
    Duplicate { key: String, line: usize },
    #[error("missing required key {0:?}")]
    Missing(&'static str),
    #[error("{key}: expected {expected}, got {value:?}")]
    Type {
        key: &'static str,
        value: String,
        expected: &'static str,
    },
    #[error("{key}: {reason}")]
    Invalid { key: &'static str, reason: String },
    #[error("{key}: file {path} does not exist")]
    MissingFile { key: &'static str, path: String },
}

/// Every accepted key with its default (`None` = required or optional
/// without a default).
const KEYS: &[(&str, Option<&str>)] = &[
    ("grid.n", None),
    ("grid.l", Some("4")),
    ("potentials.family", None),
    ("potentials.scale", Some("1")),
    ("potentials.width", Some("0.15")),
    ("potentials.dq", Some("0")),
    ("potentials.a1", None),
    ("potentials.q1", None),
    ("potentials.a2", None),
    ("potentials.q2", None),
    ("plan.tau_list", Some("16, 32, 64, 128, 256")),
    ("plan.n_frames", Some("8")),
    ("plan.r_list", Some("1.5")),
    ("plan.k", Some("3")),
    ("plan.seed", Some("1")),
    ("plan.weight", Some("log-log")),
    ("solver.tol", Some("1e-8")),
    ("solver.max_iter", Some("200")),
    ("solver.delta_clamp", Some("0.001")),
    ("solver.zeta_variant", Some("null")),
    ("solver.opnorm_samples", Some("12")),
    ("output.dir", Some("out")),
    ("output.emit_fields", Some("false")),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    GaussianBump,
    FourierModes,
    GaugePair,
    File,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::GaussianBump => "gaussian-bump",
            Family::FourierModes => "fourier-modes",
            Family::GaugePair => "gauge-pair",
            Family::File => "file",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridConfig {
    pub n: usize,
    pub l: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PotentialConfig {
    pub family: Family,
    pub scale: f64,
    pub width: f64,
    /// Amplitude of the single Fourier mode `q₁ − q₂` of the gauge-pair
    /// family (0 gives a pure gauge pair).
    pub dq: f64,
    /// CGO1 files for the `file` family, resolved against the config's
    /// directory.
    pub a1: Option<PathBuf>,
    pub q1: Option<PathBuf>,
    pub a2: Option<PathBuf>,
    pub q2: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanConfig {
    pub tau_list: Vec<f64>,
    pub n_frames: usize,
    pub r_list: Vec<f64>,
    pub k: u32,
    pub seed: u64,
    pub weight: WeightMode,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
    pub delta_clamp: f64,
    pub zeta_variant: ScheduleVariant,
    pub opnorm_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub dir: PathBuf,
    pub emit_fields: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub grid: GridConfig,
    pub potentials: PotentialConfig,
    pub plan: PlanConfig,
    pub solver: SolverConfig,
    pub output: OutputConfig,
}

fn suggest(key: &str) -> Option<String> {
    KEYS.iter()
        .map(|(k, _)| (strsim::levenshtein(key, k), *k))
        .min()
        .filter(|(d, _)| *d <= 4)
        .map(|(_, k)| k.to_string())
}

/// Raw `section.key → (value, line)` map.
fn tokenize(text: &str) -> Result<BTreeMap<String, (String, usize)>, ConfigError> {
    let mut out = BTreeMap::new();
    let mut section = String::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(name) = s.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| ConfigError::Syntax { line, text: raw.into() })?;
            section = name.trim().to_ascii_lowercase();
            continue;
        }
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| ConfigError::Syntax { line, text: raw.into() })?;
        let k = k.trim().to_ascii_lowercase();
        if k.is_empty() {
            return Err(ConfigError::Syntax { line, text: raw.into() });
        }
        let full = if k.contains('.') || section.is_empty() {
            k
        } else {
            format!("{section}.{k}")
        };
        if !KEYS.iter().any(|(known, _)| *known == full) {
            return Err(ConfigError::UnknownKey {
                suggestion: suggest(&full),
                key: full,
            });
        }
        let v = v.trim().trim_matches('"').to_string();
        if out.insert(full.clone(), (v, line)).is_some() {
            return Err(ConfigError::Duplicate { key: full, line });
        }
    }
    Ok(out)
}

struct Values {
    map: BTreeMap<String, (String, usize)>,
}

impl Values {
    fn raw(&self, key: &'static str) -> Option<String> {
        self.map.get(key).map(|(v, _)| v.clone()).or_else(|| {
            KEYS.iter()
                .find(|(k, _)| *k == key)
                .and_then(|(_, d)| d.map(str::to_string))
        })
    }

    fn required(&self, key: &'static str) -> Result<String, ConfigError> {
        self.raw(key).ok_or(ConfigError::Missing(key))
    }

    fn parse<T: std::str::FromStr>(&self, key: &'static str, expected: &'static str) -> Result<T, ConfigError> {
        let v = self.required(key)?;
        v.parse().map_err(|_| ConfigError::Type {
            key,
            value: v,
            expected,
        })
    }

    fn list(&self, key: &'static str) -> Result<Vec<f64>, ConfigError> {
        let v = self.required(key)?;
        v.split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|_| ConfigError::Type {
                key,
                value: v,
                expected: "comma-separated numbers",
            })
    }

    fn path(&self, key: &'static str, base: &Path) -> Option<PathBuf> {
        self.raw(key).map(|p| base.join(p))
    }
}

fn positive(key: &'static str, v: f64) -> Result<f64, ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(v)
    } else {
        Err(ConfigError::Invalid {
            key,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}

/// Parse configuration text. Relative file paths resolve against `base`.
pub fn parse_config_str(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let v = Values { map: tokenize(text)? };

    let n: usize = v.parse("grid.n", "an integer")?;
    if n < 8 || !n.is_multiple_of(2) {
        return Err(ConfigError::Invalid {
            key: "grid.n",
            reason: format!("must be even and at least 8, got {n}"),
        });
    }
    let l = positive("grid.l", v.parse("grid.l", "a number")?)?;

    let family = match v.required("potentials.family")?.as_str() {
        "gaussian-bump" => Family::GaussianBump,
        "fourier-modes" => Family::FourierModes,
        "gauge-pair" => Family::GaugePair,
        "file" => Family::File,
        other => {
            return Err(ConfigError::Type {
                key: "potentials.family",
                value: other.into(),
                expected: "gaussian-bump, fourier-modes, gauge-pair or file",
            })
        }
    };
    let scale: f64 = v.parse("potentials.scale", "a number")?;
    if !(scale >= 0.0 && scale.is_finite()) {
        return Err(ConfigError::Invalid {
            key: "potentials.scale",
            reason: format!("must be non-negative, got {scale}"),
        });
    }
    let width = positive("potentials.width", v.parse("potentials.width", "a number")?)?;
    let dq: f64 = v.parse("potentials.dq", "a number")?;
    if !dq.is_finite() {
        return Err(ConfigError::Invalid {
            key: "potentials.dq",
            reason: format!("must be finite, got {dq}"),
        });
    }
    let potentials = PotentialConfig {
        family,
        scale,
        width,
        dq,
        a1: v.path("potentials.a1", base),
        q1: v.path("potentials.q1", base),
        a2: v.path("potentials.a2", base),
        q2: v.path("potentials.q2", base),
    };
    if family == Family::File && potentials.a1.is_none() && potentials.q1.is_none() {
        return Err(ConfigError::Missing("potentials.a1"));
    }
    for (key, p) in [
        ("potentials.a1", &potentials.a1),
        ("potentials.q1", &potentials.q1),
        ("potentials.a2", &potentials.a2),
        ("potentials.q2", &potentials.q2),
    ] {
        if let Some(p) = p {
            if !p.exists() {
                return Err(ConfigError::MissingFile {
                    key,
                    path: p.display().to_string(),
                });
            }
        }
    }

    let tau_list = v.list("plan.tau_list")?;
    if tau_list.is_empty() || tau_list.iter().any(|t| !(*t >= 2.0 && t.is_finite())) {
        return Err(ConfigError::Invalid {
            key: "plan.tau_list",
            reason: "every τ must be at least 2".into(),
        });
    }
    let n_frames: usize = v.parse("plan.n_frames", "an integer")?;
    if n_frames < 8 {
        return Err(ConfigError::Invalid {
            key: "plan.n_frames",
            reason: format!("must be at least 8, got {n_frames}"),
        });
    }
    let r_list = v.list("plan.r_list")?;
    if r_list.is_empty() || r_list.iter().any(|r| !(*r > 0.0)) {
        return Err(ConfigError::Invalid {
            key: "plan.r_list",
            reason: "every r must be positive".into(),
        });
    }
    let k: u32 = v.parse("plan.k", "an integer")?;
    if k < 2 {
        return Err(ConfigError::Invalid {
            key: "plan.k",
            reason: format!("must be at least 2, got {k}"),
        });
    }
    let weight_s = v.required("plan.weight")?;
    let weight = WeightMode::parse(&weight_s).ok_or(ConfigError::Type {
        key: "plan.weight",
        value: weight_s,
        expected: "uniform or log-log",
    })?;
    let plan = PlanConfig {
        tau_list,
        n_frames,
        r_list,
        k,
        seed: v.parse("plan.seed", "an unsigned integer")?,
        weight,
    };

    let tol = positive("solver.tol", v.parse("solver.tol", "a number")?)?;
    let max_iter: usize = v.parse("solver.max_iter", "an integer")?;
    if max_iter == 0 {
        return Err(ConfigError::Invalid {
            key: "solver.max_iter",
            reason: "must be at least 1".into(),
        });
    }
    let delta_clamp = positive("solver.delta_clamp", v.parse("solver.delta_clamp", "a number")?)?;
    let variant_s = v.required("solver.zeta_variant")?;
    let zeta_variant = ScheduleVariant::parse(&variant_s).ok_or(ConfigError::Type {
        key: "solver.zeta_variant",
        value: variant_s,
        expected: "null or paper",
    })?;
    let solver = SolverConfig {
        tol,
        max_iter,
        delta_clamp,
        zeta_variant,
        opnorm_samples: v.parse("solver.opnorm_samples", "an integer")?,
    };

    let emit = v.required("output.emit_fields")?;
    let emit_fields = match emit.to_ascii_lowercase().as_str() {
        "true" | "yes" | "1" => true,
        "false" | "no" | "0" => false,
        _ => {
            return Err(ConfigError::Type {
                key: "output.emit_fields",
                value: emit,
                expected: "true or false",
            })
        }
    };
    let output = OutputConfig {
        dir: base.join(v.required("output.dir")?),
        emit_fields,
    };

    Ok(ExperimentConfig {
        grid: GridConfig { n, l },
        potentials,
        plan,
        solver,
        output,
    })
}

pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, base)
}

fn join(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

impl ExperimentConfig {
    /// The full configuration with defaults materialized, in the input
    /// format.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let p = &self.potentials;
        let _ = writeln!(s, "[grid]\nn = {}\nl = {}\n", self.grid.n, self.grid.l);
        let _ = writeln!(
            s,
            "[potentials]\nfamily = {}\nscale = {}\nwidth = {}\ndq = {}",
            p.family.name(),
            p.scale,
            p.width,
            p.dq
        );
        for (k, f) in [("a1", &p.a1), ("q1", &p.q1), ("a2", &p.a2), ("q2", &p.q2)] {
            if let Some(f) = f {
                let _ = writeln!(s, "{k} = {}", f.display());
            }
        }
        let pl = &self.plan;
        let weight = match pl.weight {
            WeightMode::Uniform => "uniform",
            WeightMode::LogLog => "log-log",
        };
        let _ = writeln!(
            s,
            "\n[plan]\ntau_list = {}\nn_frames = {}\nr_list = {}\nk = {}\nseed = {}\nweight = {weight}\n",
            join(&pl.tau_list),
            pl.n_frames,
            join(&pl.r_list),
            pl.k,
            pl.seed
        );
        let so = &self.solver;
        let _ = writeln!(
            s,
            "[solver]\ntol = {:e}\nmax_iter = {}\ndelta_clamp = {}\nzeta_variant = {}\nopnorm_samples = {}\n",
            so.tol,
            so.max_iter,
            so.delta_clamp,
            so.zeta_variant.name(),
            so.opnorm_samples
        );
        let _ = writeln!(
            s,
            "[output]\ndir = {}\nemit_fields = {}",
            self.output.dir.display(),
            self.output.emit_fields
        );
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjlap::DEFAULT_DELTA;

    const MINIMAL: &str = "[grid]\nN = 32\n\n[potentials]\nfamily = gaussian-bump\n";

    fn parse(s: &str) -> Result<ExperimentConfig, ConfigError> {
        parse_config_str(s, Path::new("."))
    }

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.grid, GridConfig { n: 32, l: 4.0 });
        assert_eq!(c.plan.tau_list, vec![16.0, 32.0, 64.0, 128.0, 256.0]);
        assert_eq!(c.plan.n_frames, 8);
        assert_eq!(c.solver.tol, 1e-8);
        assert_eq!(c.solver.delta_clamp, DEFAULT_DELTA);
        assert_eq!(c.solver.zeta_variant, ScheduleVariant::Null);
        assert!(!c.output.emit_fields);
    }

    #[test]
    fn echo_round_trips() {
        let c = parse(&format!(
            "{MINIMAL}[plan]\ntau_list = 8, 24\nseed = 7\n[solver]\nzeta_variant = paper\n"
        ))
        .unwrap();
        assert_eq!(parse_config_str(&c.echo(), Path::new("")).unwrap(), c);
    }

    #[test]
    fn unknown_key_names_nearest_match() {
        let err = parse("gird.N = 64\npotentials.family = file\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::UnknownKey {
                key: "gird.n".into(),
                suggestion: Some("grid.n".into())
            }
        );
        assert!(err.to_string().contains("grid.n"));
    }

    #[test]
    fn rejects_bad_values() {
        let neg = parse(&format!("{MINIMAL}[solver]\ntol = -1e-8\n")).unwrap_err();
        assert!(matches!(neg, ConfigError::Invalid { key: "solver.tol", .. }));
        let odd = parse("[grid]\nn = 33\n[potentials]\nfamily = gauge-pair\n").unwrap_err();
        assert!(matches!(odd, ConfigError::Invalid { key: "grid.n", .. }));
        let ty = parse(&format!("{MINIMAL}[plan]\nn_frames = many\n")).unwrap_err();
        assert!(matches!(
            ty,
            ConfigError::Type {
                key: "plan.n_frames",
                ..
            }
        ));
        assert_eq!(
            parse("[grid]\nn = 32\n").unwrap_err(),
            ConfigError::Missing("potentials.family")
        );
        let dup = parse(&format!("{MINIMAL}[grid]\nn = 64\n")).unwrap_err();
        assert!(matches!(dup, ConfigError::Duplicate { .. }));
        let file = parse("[grid]\nn = 32\n[potentials]\nfamily = file\na1 = /nonexistent/a.cgo\n").unwrap_err();
        assert!(matches!(file, ConfigError::MissingFile { .. }));
    }
}
