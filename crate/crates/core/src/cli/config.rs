//! Sectioned `key = value` configuration: strict schema, defaults, and a round-trippable echo.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use crate::analysis::energy::fmt_num;
use crate::delay_line::HistorySpec;
use crate::domain::{build_grid, BoxDomain, MaterialPreset, Vec3};
use crate::error::{Error, Result};
use crate::feedback::{FeedbackLaw, LawKind, RadialTable};
use crate::solver::{
    Closure, HistoryChoice, InitialCondition, MaterialSpec, RunLength, Scenario, Weighting, XiMode,
};

pub const DEFAULT_CFL_SAFETY: f64 = 0.95;
pub const DEFAULT_SLACK_DISSIPATION: f64 = 1.05;
pub const DEFAULT_SLACK_OBSERVABILITY: f64 = 1.10;
pub const DEFAULT_OUTPUT_DIR: &str = "out";

const SECTIONS: [&str; 8] = [
    "domain",
    "materials",
    "feedback",
    "history",
    "initial",
    "run",
    "analysis",
    "output",
];

/// Accepted keys per section; anything else is rejected.
fn schema(section: &str) -> &'static [&'static str] {
    match section {
        "domain" => &["Lx", "Ly", "Lz", "nx", "ny", "nz", "x0"],
        "materials" => &["eps", "mu"],
        "feedback" => &["kind", "a", "b", "gamma1", "gamma2", "tau", "table"],
        "history" => &["kind", "value", "file"],
        "initial" => &[
            "preset",
            "center",
            "width",
            "amplitude",
            "polarization",
            "file",
            "project",
        ],
        "run" => &[
            "t_end",
            "cfl_safety",
            "record_every",
            "cfl_override",
            "closure",
            "dump_every",
            "unsafe",
        ],
        "analysis" => &[
            "weighting",
            "xi",
            "slack_dissipation",
            "slack_observability",
            "horizon",
        ],
        "output" => &["dir"],
        _ => &[],
    }
}

/// Keys holding a single number; the only legal sweep targets.
const NUMERIC_KEYS: [&str; 20] = [
    "domain.Lx",
    "domain.Ly",
    "domain.Lz",
    "domain.nx",
    "domain.ny",
    "domain.nz",
    "feedback.a",
    "feedback.b",
    "feedback.gamma1",
    "feedback.gamma2",
    "feedback.tau",
    "initial.width",
    "initial.amplitude",
    "run.t_end",
    "run.cfl_safety",
    "run.record_every",
    "analysis.xi",
    "analysis.slack_dissipation",
    "analysis.slack_observability",
    "analysis.horizon",
];

#[derive(Debug, Clone, PartialEq)]
pub enum MaterialChoice {
    Preset(MaterialPreset),
    File(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeedbackKind {
    Linear,
    Saturating,
    Table,
}

#[derive(Debug, Clone, PartialEq)]
pub enum HistoryKind {
    Zero,
    Replay,
    /// The same vector in every slot of every sample; must be tangential everywhere.
    Constant([f64; 3]),
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitialPreset {
    Off,
    Gaussian {
        center: [f64; 3],
        width: f64,
        amplitude: f64,
        polarization: [f64; 3],
    },
    File(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DomainCfg {
    pub lengths: [f64; 3],
    pub cells: [usize; 3],
    pub x0: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeedbackCfg {
    pub kind: FeedbackKind,
    pub a: f64,
    pub b: f64,
    pub gamma1: f64,
    pub gamma2: f64,
    pub tau: f64,
    pub table: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunCfg {
    pub t_end: f64,
    pub cfl_safety: f64,
    pub record_every: usize,
    pub cfl_override: bool,
    pub closure: Closure,
    pub dump_every: Option<usize>,
    pub unsafe_run: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisCfg {
    pub weighting: Weighting,
    pub xi: XiMode,
    pub slack_dissipation: f64,
    pub slack_observability: f64,
    /// Certificate window length; defaults to `1.25 * 4c` when absent.
    pub horizon: Option<f64>,
}

/// Fully resolved configuration. Relative paths resolve against `base_dir`.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub domain: DomainCfg,
    pub eps: MaterialChoice,
    pub mu: MaterialChoice,
    pub feedback: FeedbackCfg,
    pub history: HistoryKind,
    pub initial: InitialPreset,
    pub project: bool,
    pub run: RunCfg,
    pub analysis: AnalysisCfg,
    pub output_dir: String,
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw `section.key -> value` map with source lines, in file order of sections.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    entries: BTreeMap<String, Entry>,
    headers: BTreeMap<String, usize>,
    lines: usize,
}

impl RawConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let mut raw = RawConfig::default();
        let mut section: Option<String> = None;
        for (i, full) in text.lines().enumerate() {
            let ln = i + 1;
            raw.lines = ln;
            let line = full.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| Error::Parse {
                        line: ln,
                        msg: format!("malformed section header `{line}`"),
                    })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!("unknown section [{name}]"),
                    });
                }
                if let Some(prev) = raw.headers.get(name) {
                    return Err(Error::Parse {
                        line: ln,
                        msg: format!(
                            "duplicate section [{name}] (first at line {prev}, again at line {ln})"
                        ),
                    });
                }
                raw.headers.insert(name.to_string(), ln);
                section = Some(name.to_string());
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                line: ln,
                msg: format!("expected `key = value`, found `{line}`"),
            })?;
            let (k, v) = (k.trim(), v.trim());
            let sec = section.as_deref().ok_or_else(|| Error::Parse {
                line: ln,
                msg: format!("key `{k}` appears before any section header"),
            })?;
            if !schema(sec).contains(&k) {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("unknown key `{k}` in [{sec}]"),
                });
            }
            if v.is_empty() {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!("key `{sec}.{k}` has no value"),
                });
            }
            let path = format!("{sec}.{k}");
            if let Some(prev) = raw.entries.get(&path) {
                return Err(Error::Parse {
                    line: ln,
                    msg: format!(
                        "duplicate key `{path}` (first at line {}, again at line {ln})",
                        prev.line
                    ),
                });
            }
            raw.entries.insert(
                path,
                Entry {
                    value: v.to_string(),
                    line: ln,
                },
            );
        }
        Ok(raw)
    }

    /// Replaces or inserts a numeric leaf; used by sweeps.
    pub fn set_numeric(&mut self, path: &str, value: f64) -> Result<()> {
        if !NUMERIC_KEYS.contains(&path) {
            return Err(Error::Config(format!(
                "sweep parameter `{path}` is not a numeric configuration key"
            )));
        }
        let line = self.entries.get(path).map_or(0, |e| e.line);
        let text = if path.ends_with(".nx")
            || path.ends_with(".ny")
            || path.ends_with(".nz")
            || path == "run.record_every"
        {
            if value.fract() != 0.0 || value < 0.0 {
                return Err(Error::Config(format!(
                    "`{path}` needs a non-negative integer, got {value}"
                )));
            }
            format!("{}", value as u64)
        } else {
            fmt_num(value)
        };
        self.entries
            .insert(path.to_string(), Entry { value: text, line });
        Ok(())
    }

    fn get(&self, path: &str) -> Option<&Entry> {
        self.entries.get(path)
    }

    fn missing(&self, path: &str) -> Error {
        let sec = path.split('.').next().unwrap_or("");
        let line = self.headers.get(sec).copied().unwrap_or(self.lines.max(1));
        Error::Parse {
            line,
            msg: format!("missing required key `{path}`"),
        }
    }

    fn num(&self, path: &str) -> Result<Option<f64>> {
        self.get(path)
            .map(|e| parse_f64(&e.value, e.line, path))
            .transpose()
    }

    fn num_or(&self, path: &str, default: f64) -> Result<f64> {
        Ok(self.num(path)?.unwrap_or(default))
    }

    fn req_num(&self, path: &str) -> Result<f64> {
        self.num(path)?.ok_or_else(|| self.missing(path))
    }

    fn count(&self, path: &str) -> Result<Option<usize>> {
        self.get(path)
            .map(|e| {
                e.value.parse::<usize>().map_err(|_| Error::Parse {
                    line: e.line,
                    msg: format!("`{path}` needs a non-negative integer, got `{}`", e.value),
                })
            })
            .transpose()
    }

    fn vec3(&self, path: &str) -> Result<Option<[f64; 3]>> {
        self.get(path)
            .map(|e| {
                let v = numbers(&e.value, e.line, path)?;
                <[f64; 3]>::try_from(v.as_slice()).map_err(|_| Error::Parse {
                    line: e.line,
                    msg: format!("`{path}` needs three numbers"),
                })
            })
            .transpose()
    }

    fn flag(&self, path: &str, default: bool) -> Result<bool> {
        match self.get(path) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" => Ok(true),
                "false" => Ok(false),
                other => Err(Error::Parse {
                    line: e.line,
                    msg: format!("`{path}` must be true or false, got `{other}`"),
                }),
            },
        }
    }

    fn word(&self, path: &str) -> Option<(&str, usize)> {
        self.get(path).map(|e| (e.value.as_str(), e.line))
    }

    fn reject(&self, path: &str, why: &str) -> Result<()> {
        match self.get(path) {
            Some(e) => Err(Error::Parse {
                line: e.line,
                msg: format!("`{path}` is not used {why}"),
            }),
            None => Ok(()),
        }
    }
}

fn parse_f64(s: &str, line: usize, path: &str) -> Result<f64> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => Err(Error::Parse {
            line,
            msg: format!("`{path}` must be finite, got `{s}`"),
        }),
        Err(_) => Err(Error::Parse {
            line,
            msg: format!("`{path}` needs a decimal number, got `{s}`"),
        }),
    }
}

fn numbers(s: &str, line: usize, path: &str) -> Result<Vec<f64>> {
    s.split_whitespace()
        .map(|t| parse_f64(t, line, path))
        .collect()
}

fn material(raw: &RawConfig, path: &str) -> Result<MaterialChoice> {
    let Some((text, line)) = raw.word(path) else {
        return Ok(MaterialChoice::Preset(MaterialPreset::Isotropic(1.0)));
    };
    let (kind, rest) = text.split_once(char::is_whitespace).unwrap_or((text, ""));
    let rest = rest.trim();
    if kind == "file" {
        if rest.is_empty() {
            return Err(Error::Parse {
                line,
                msg: format!("`{path} = file` needs a path"),
            });
        }
        return Ok(MaterialChoice::File(rest.to_string()));
    }
    let v = numbers(rest, line, path)?;
    let arity = |n: usize| {
        if v.len() == n {
            Ok(())
        } else {
            Err(Error::Parse {
                line,
                msg: format!("`{path} = {kind}` needs {n} numbers, got {}", v.len()),
            })
        }
    };
    let preset = match kind {
        "isotropic" => {
            arity(1)?;
            MaterialPreset::Isotropic(v[0])
        }
        "diagonal" => {
            arity(3)?;
            MaterialPreset::Diagonal([v[0], v[1], v[2]])
        }
        "ramp" => {
            arity(4)?;
            MaterialPreset::Ramp {
                base: [v[0], v[1], v[2]],
                slope: v[3],
            }
        }
        "exponential" => {
            arity(1)?;
            MaterialPreset::Exponential(v[0])
        }
        "full" => {
            arity(6)?;
            MaterialPreset::Full([v[0], v[1], v[2], v[3], v[4], v[5]])
        }
        other => {
            return Err(Error::Parse {
                line,
                msg: format!(
                "unknown material `{other}` (isotropic, diagonal, ramp, exponential, full, file)"
            ),
            })
        }
    };
    Ok(MaterialChoice::Preset(preset))
}

fn material_text(m: &MaterialChoice) -> String {
    let join = |v: &[f64]| v.iter().map(|x| fmt_num(*x)).collect::<Vec<_>>().join(" ");
    match m {
        MaterialChoice::File(p) => format!("file {p}"),
        MaterialChoice::Preset(p) => match p {
            MaterialPreset::Isotropic(s) => format!("isotropic {}", fmt_num(*s)),
            MaterialPreset::Diagonal(d) => format!("diagonal {}", join(d)),
            MaterialPreset::Ramp { base, slope } => {
                format!("ramp {} {}", join(base), fmt_num(*slope))
            }
            MaterialPreset::Exponential(k) => format!("exponential {}", fmt_num(*k)),
            MaterialPreset::Full(u) => format!("full {}", join(u)),
        },
    }
}

fn vec_text(v: &[f64; 3]) -> String {
    format!("{} {} {}", fmt_num(v[0]), fmt_num(v[1]), fmt_num(v[2]))
}

impl Config {
    /// Parses configuration text; relative paths will resolve against `base_dir`.
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self> {
        Self::from_raw(&RawConfig::parse(text)?, base_dir)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn from_raw(raw: &RawConfig, base_dir: &Path) -> Result<Self> {
        let lengths = [
            raw.num_or("domain.Lx", 1.0)?,
            raw.num_or("domain.Ly", 1.0)?,
            raw.num_or("domain.Lz", 1.0)?,
        ];
        let mut cells = [0usize; 3];
        for (a, key) in ["domain.nx", "domain.ny", "domain.nz"].iter().enumerate() {
            cells[a] = raw.count(key)?.ok_or_else(|| raw.missing(key))?;
        }
        let center = [lengths[0] / 2.0, lengths[1] / 2.0, lengths[2] / 2.0];
        let x0 = raw.vec3("domain.x0")?.unwrap_or(center);

        let kind = match raw.word("feedback.kind") {
            None | Some(("linear", _)) => FeedbackKind::Linear,
            Some(("saturating", _)) => FeedbackKind::Saturating,
            Some(("table", _)) => FeedbackKind::Table,
            Some((other, line)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown feedback kind `{other}` (linear, saturating, table)"),
                })
            }
        };
        let gamma1 = raw.req_num("feedback.gamma1")?;
        let gamma2 = raw.num_or("feedback.gamma2", 0.0)?;
        let g1_line = raw.get("feedback.gamma1").map_or(0, |e| e.line);
        // Both gains zero selects the uncontrolled (PMC) boundary; otherwise gamma1 must be positive.
        if !(gamma1 > 0.0 || (gamma1 == 0.0 && gamma2 == 0.0)) {
            return Err(Error::Parse {
                line: g1_line,
                msg: format!("gamma1 = {gamma1}; gamma1 > 0 is required unless both gains are 0"),
            });
        }
        if gamma2 < 0.0 {
            let line = raw.get("feedback.gamma2").map_or(0, |e| e.line);
            return Err(Error::Parse {
                line,
                msg: format!("gamma2 = {gamma2}; gamma2 >= 0 is required"),
            });
        }
        let table = raw.word("feedback.table").map(|(p, _)| p.to_string());
        match kind {
            FeedbackKind::Table if table.is_none() => return Err(raw.missing("feedback.table")),
            FeedbackKind::Table => {}
            _ => raw.reject("feedback.table", "unless kind = table")?,
        }
        let feedback = FeedbackCfg {
            kind,
            a: raw.num_or("feedback.a", 1.0)?,
            b: raw.num_or("feedback.b", 1.0)?,
            gamma1,
            gamma2,
            tau: raw.req_num("feedback.tau")?,
            table,
        };

        let history = match raw.word("history.kind") {
            None | Some(("zero", _)) => HistoryKind::Zero,
            Some(("replay", _)) => HistoryKind::Replay,
            Some(("constant", _)) => HistoryKind::Constant(
                raw.vec3("history.value")?
                    .ok_or_else(|| raw.missing("history.value"))?,
            ),
            Some(("file", _)) => HistoryKind::File(
                raw.word("history.file")
                    .map(|(p, _)| p.to_string())
                    .ok_or_else(|| raw.missing("history.file"))?,
            ),
            Some((other, line)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown history kind `{other}` (zero, replay, constant, file)"),
                })
            }
        };
        if !matches!(history, HistoryKind::Constant(_)) {
            raw.reject("history.value", "unless kind = constant")?;
        }
        if !matches!(history, HistoryKind::File(_)) {
            raw.reject("history.file", "unless kind = file")?;
        }

        let initial = match raw.word("initial.preset") {
            None | Some(("gaussian", _)) => {
                let min_len = lengths.iter().copied().fold(f64::INFINITY, f64::min);
                InitialPreset::Gaussian {
                    center: raw.vec3("initial.center")?.unwrap_or(center),
                    width: raw.num_or("initial.width", 0.25 * min_len)?,
                    amplitude: raw.num_or("initial.amplitude", 1.0)?,
                    polarization: raw.vec3("initial.polarization")?.unwrap_or([0.0, 0.0, 1.0]),
                }
            }
            Some(("off", _)) => InitialPreset::Off,
            Some(("file", _)) => InitialPreset::File(
                raw.word("initial.file")
                    .map(|(p, _)| p.to_string())
                    .ok_or_else(|| raw.missing("initial.file"))?,
            ),
            Some((other, line)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown initial preset `{other}` (off, gaussian, file)"),
                })
            }
        };
        if !matches!(initial, InitialPreset::Gaussian { .. }) {
            for k in [
                "initial.center",
                "initial.width",
                "initial.amplitude",
                "initial.polarization",
            ] {
                raw.reject(k, "unless preset = gaussian")?;
            }
        }
        if !matches!(initial, InitialPreset::File(_)) {
            raw.reject("initial.file", "unless preset = file")?;
        }

        let cfl_override = raw.flag("run.cfl_override", false)?;
        let cfl_safety = raw.num_or("run.cfl_safety", DEFAULT_CFL_SAFETY)?;
        if !(cfl_safety > 0.0 && (cfl_safety <= 1.0 || cfl_override)) {
            let line = raw.get("run.cfl_safety").map_or(0, |e| e.line);
            return Err(Error::Parse {
                line,
                msg: format!(
                    "cfl_safety = {cfl_safety} must lie in (0, 1] unless cfl_override = true"
                ),
            });
        }
        let t_end = raw.req_num("run.t_end")?;
        if t_end < 0.0 {
            let line = raw.get("run.t_end").map_or(0, |e| e.line);
            return Err(Error::Parse {
                line,
                msg: format!("t_end = {t_end} must be non-negative"),
            });
        }
        let record_every = raw.count("run.record_every")?.unwrap_or(1);
        if record_every == 0 {
            let line = raw.get("run.record_every").map_or(0, |e| e.line);
            return Err(Error::Parse {
                line,
                msg: "record_every must be at least 1".into(),
            });
        }
        let closure = match raw.word("run.closure") {
            None | Some(("implicit", _)) => Closure::Implicit,
            Some(("explicit-lag", _)) => Closure::ExplicitLag,
            Some((other, line)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown closure `{other}` (implicit, explicit-lag)"),
                })
            }
        };
        let dump_every = raw.count("run.dump_every")?;
        if dump_every == Some(0) {
            let line = raw.get("run.dump_every").map_or(0, |e| e.line);
            return Err(Error::Parse {
                line,
                msg: "dump_every must be at least 1".into(),
            });
        }
        let run = RunCfg {
            t_end,
            cfl_safety,
            record_every,
            cfl_override,
            closure,
            dump_every,
            unsafe_run: raw.flag("run.unsafe", false)?,
        };

        let weighting = match raw.word("analysis.weighting") {
            None | Some(("weighted", _)) => Weighting::Weighted,
            Some(("plain", _)) => Weighting::Plain,
            Some((other, line)) => {
                return Err(Error::Parse {
                    line,
                    msg: format!("unknown weighting `{other}` (weighted, plain)"),
                })
            }
        };
        let xi = match raw.get("analysis.xi") {
            None => XiMode::Auto,
            Some(e) if e.value == "auto" => XiMode::Auto,
            Some(e) => {
                let v = parse_f64(&e.value, e.line, "analysis.xi")?;
                if v < 0.0 {
                    return Err(Error::Parse {
                        line: e.line,
                        msg: format!("xi = {v} must be non-negative"),
                    });
                }
                XiMode::Explicit(v)
            }
        };
        let slack = |key: &str, default: f64| -> Result<f64> {
            let v = raw.num_or(key, default)?;
            if v < 1.0 {
                let line = raw.get(key).map_or(0, |e| e.line);
                return Err(Error::Parse {
                    line,
                    msg: format!("`{key}` = {v} must be at least 1"),
                });
            }
            Ok(v)
        };
        let horizon = raw.num("analysis.horizon")?;
        if let Some(h) = horizon {
            if h <= 0.0 {
                let line = raw.get("analysis.horizon").map_or(0, |e| e.line);
                return Err(Error::Parse {
                    line,
                    msg: format!("horizon = {h} must be positive"),
                });
            }
        }
        let analysis = AnalysisCfg {
            weighting,
            xi,
            slack_dissipation: slack("analysis.slack_dissipation", DEFAULT_SLACK_DISSIPATION)?,
            slack_observability: slack(
                "analysis.slack_observability",
                DEFAULT_SLACK_OBSERVABILITY,
            )?,
            horizon,
        };

        Ok(Config {
            domain: DomainCfg { lengths, cells, x0 },
            eps: material(raw, "materials.eps")?,
            mu: material(raw, "materials.mu")?,
            feedback,
            history,
            initial,
            project: raw.flag("initial.project", true)?,
            run,
            analysis,
            output_dir: raw
                .word("output.dir")
                .map_or(DEFAULT_OUTPUT_DIR.to_string(), |(d, _)| d.to_string()),
            base_dir: base_dir.to_path_buf(),
        })
    }

    /// Resolved configuration with every key explicit; numbers carry 17 significant digits.
    pub fn echo(&self) -> String {
        let mut s = String::new();
        let d = &self.domain;
        let _ = writeln!(s, "[domain]");
        for (k, v) in ["Lx", "Ly", "Lz"].iter().zip(d.lengths) {
            let _ = writeln!(s, "{k} = {}", fmt_num(v));
        }
        for (k, v) in ["nx", "ny", "nz"].iter().zip(d.cells) {
            let _ = writeln!(s, "{k} = {v}");
        }
        let _ = writeln!(s, "x0 = {}", vec_text(&d.x0));

        let _ = writeln!(
            s,
            "\n[materials]\neps = {}\nmu = {}",
            material_text(&self.eps),
            material_text(&self.mu)
        );

        let f = &self.feedback;
        let kind = match f.kind {
            FeedbackKind::Linear => "linear",
            FeedbackKind::Saturating => "saturating",
            FeedbackKind::Table => "table",
        };
        let _ = writeln!(s, "\n[feedback]\nkind = {kind}");
        for (k, v) in [
            ("a", f.a),
            ("b", f.b),
            ("gamma1", f.gamma1),
            ("gamma2", f.gamma2),
            ("tau", f.tau),
        ] {
            let _ = writeln!(s, "{k} = {}", fmt_num(v));
        }
        if let Some(t) = &f.table {
            let _ = writeln!(s, "table = {t}");
        }

        let _ = writeln!(s, "\n[history]");
        match &self.history {
            HistoryKind::Zero => s.push_str("kind = zero\n"),
            HistoryKind::Replay => s.push_str("kind = replay\n"),
            HistoryKind::Constant(v) => {
                let _ = writeln!(s, "kind = constant\nvalue = {}", vec_text(v));
            }
            HistoryKind::File(p) => {
                let _ = writeln!(s, "kind = file\nfile = {p}");
            }
        }

        let _ = writeln!(s, "\n[initial]");
        match &self.initial {
            InitialPreset::Off => s.push_str("preset = off\n"),
            InitialPreset::Gaussian {
                center,
                width,
                amplitude,
                polarization,
            } => {
                let _ = writeln!(
                    s,
                    "preset = gaussian\ncenter = {}\nwidth = {}\namplitude = {}\npolarization = {}",
                    vec_text(center),
                    fmt_num(*width),
                    fmt_num(*amplitude),
                    vec_text(polarization)
                );
            }
            InitialPreset::File(p) => {
                let _ = writeln!(s, "preset = file\nfile = {p}");
            }
        }
        let _ = writeln!(s, "project = {}", self.project);

        let r = &self.run;
        let _ = writeln!(
            s,
            "\n[run]\nt_end = {}\ncfl_safety = {}\nrecord_every = {}\ncfl_override = {}\nclosure = {}",
            fmt_num(r.t_end),
            fmt_num(r.cfl_safety),
            r.record_every,
            r.cfl_override,
            match r.closure {
                Closure::Implicit => "implicit",
                Closure::ExplicitLag => "explicit-lag",
            }
        );
        if let Some(k) = r.dump_every {
            let _ = writeln!(s, "dump_every = {k}");
        }
        let _ = writeln!(s, "unsafe = {}", r.unsafe_run);

        let a = &self.analysis;
        let _ = writeln!(
            s,
            "\n[analysis]\nweighting = {}\nxi = {}\nslack_dissipation = {}\nslack_observability = {}",
            match a.weighting {
                Weighting::Weighted => "weighted",
                Weighting::Plain => "plain",
            },
            match a.xi {
                XiMode::Auto => "auto".to_string(),
                XiMode::Explicit(v) => fmt_num(v),
            },
            fmt_num(a.slack_dissipation),
            fmt_num(a.slack_observability)
        );
        if let Some(h) = a.horizon {
            let _ = writeln!(s, "horizon = {}", fmt_num(h));
        }
        let _ = writeln!(s, "\n[output]\ndir = {}", self.output_dir);
        s
    }

    pub fn resolve_path(&self, p: &str) -> PathBuf {
        let p = Path::new(p);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn box_domain(&self) -> Result<BoxDomain> {
        BoxDomain::new(self.domain.lengths, self.domain.cells, self.domain.x0)
    }

    pub fn law(&self) -> Result<FeedbackLaw> {
        let f = &self.feedback;
        if f.gamma1 == 0.0 && f.gamma2 == 0.0 {
            return FeedbackLaw::pmc(f.tau);
        }
        let kind = match f.kind {
            FeedbackKind::Linear => LawKind::Linear { a: f.a },
            FeedbackKind::Saturating => LawKind::Saturating { a: f.a, b: f.b },
            FeedbackKind::Table => {
                let path = self.resolve_path(f.table.as_deref().unwrap_or_default());
                LawKind::Table(RadialTable::from_file(&path)?)
            }
        };
        FeedbackLaw::new(kind, f.gamma1, f.gamma2, f.tau)
    }

    fn material_spec(&self, m: &MaterialChoice) -> MaterialSpec {
        match m {
            MaterialChoice::Preset(p) => MaterialSpec::Preset(p.clone()),
            MaterialChoice::File(p) => MaterialSpec::File(self.resolve_path(p)),
        }
    }

    pub fn eps_spec(&self) -> MaterialSpec {
        self.material_spec(&self.eps)
    }

    pub fn mu_spec(&self) -> MaterialSpec {
        self.material_spec(&self.mu)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        let domain = self.box_domain()?;
        let history = match &self.history {
            HistoryKind::Zero => HistoryChoice::Spec(HistorySpec::Zero),
            HistoryKind::Replay => HistoryChoice::Spec(HistorySpec::Replay),
            HistoryKind::Constant(v) => {
                let samples = build_grid(&domain)?.samples.len();
                HistoryChoice::Spec(HistorySpec::Constant(vec![Vec3::from(*v); samples]))
            }
            HistoryKind::File(p) => HistoryChoice::File(self.resolve_path(p)),
        };
        let initial = match &self.initial {
            InitialPreset::Off => InitialCondition::Off,
            InitialPreset::Gaussian {
                center,
                width,
                amplitude,
                polarization,
            } => InitialCondition::Gaussian {
                center: *center,
                width: *width,
                amplitude: *amplitude,
                polarization: *polarization,
                project: self.project,
            },
            InitialPreset::File(p) => InitialCondition::File {
                path: self.resolve_path(p),
                project: self.project,
            },
        };
        Ok(Scenario {
            domain,
            eps: self.eps_spec(),
            mu: self.mu_spec(),
            law: self.law()?,
            history,
            initial,
            length: RunLength::Time(self.run.t_end),
            cfl_safety: self.run.cfl_safety,
            cfl_override: self.run.cfl_override,
            record_every: self.run.record_every,
            weighting: self.analysis.weighting,
            xi: self.analysis.xi,
            closure: self.run.closure,
            unsafe_run: self.run.unsafe_run,
            dump_every: self.run.dump_every,
        })
    }
}
