//! Repo System: a hidden versioned dependency graph behind a small shell.
//!
//! Packages are ordered topologically; every constraint points from a
//! requirer (the project or a later package) to an earlier provider. Installing
//! a package fires the resolution behaviors of its outgoing edges, which may
//! install, upgrade, downgrade or pin other packages.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{ArenaError, Result};
use crate::rng::RngStream;

pub const RUN_SCRIPT: &str = "run.py";
pub const SUCCESS_MESSAGE: &str = "Task completed! Project ran successfully!";
/// Guard on the version product space searched by [`count_solutions`].
pub const MAX_BRUTE_FORCE: u64 = 2_000_000;

/// A `major.minor` version. Three-component input is truncated to two.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Version {
    pub major: u32,
    pub minor: u32,
}

impl Version {
    pub const fn new(major: u32, minor: u32) -> Self {
        Self { major, minor }
    }
}

impl fmt::Display for Version {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.major, self.minor)
    }
}

impl FromStr for Version {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let s = s.trim();
        let mut parts = s.split('.');
        let major = parts.next().and_then(|p| p.parse().ok());
        let minor = match parts.next() {
            None => Some(0),
            Some(p) => p.parse().ok(),
        };
        if let Some(patch) = parts.next() {
            if patch.parse::<u32>().is_err() || parts.next().is_some() {
                return Err(format!("invalid version '{s}'"));
            }
        }
        match (major, minor) {
            (Some(major), Some(minor)) => Ok(Version { major, minor }),
            _ => Err(format!("invalid version '{s}'")),
        }
    }
}

impl Serialize for Version {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Version {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

pub fn python_menu() -> Vec<Version> {
    (8..=12).map(|m| Version::new(3, m)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Cmp {
    #[serde(rename = "==")]
    Eq,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = ">")]
    Gt,
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = "<")]
    Lt,
}

impl Cmp {
    fn holds(self, v: Version, bound: Version) -> bool {
        let o = v.cmp(&bound);
        match self {
            Cmp::Eq => o == Ordering::Equal,
            Cmp::Ge => o != Ordering::Less,
            Cmp::Gt => o == Ordering::Greater,
            Cmp::Le => o != Ordering::Greater,
            Cmp::Lt => o == Ordering::Less,
        }
    }

    fn as_str(self) -> &'static str {
        match self {
            Cmp::Eq => "==",
            Cmp::Ge => ">=",
            Cmp::Gt => ">",
            Cmp::Le => "<=",
            Cmp::Lt => "<",
        }
    }
}

/// A conjunction of comparisons; empty accepts every version.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct VersionSpec(pub Vec<(Cmp, Version)>);

impl VersionSpec {
    pub fn matches(&self, v: Version) -> bool {
        self.0.iter().all(|(c, b)| c.holds(v, *b))
    }
}

impl fmt::Display for VersionSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|(c, v)| format!("{}{v}", c.as_str())).collect();
        f.write_str(&parts.join(","))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PackageSpec {
    pub name: String,
    /// Ascending.
    pub versions: Vec<Version>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Requirer {
    Project,
    Package(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    /// Provider version equals the requirer version.
    ExactMatch,
    /// Provider major equals the requirer major.
    MajorMatch,
    /// Provider version within `[lo, hi]`.
    Range { lo: Version, hi: Version },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Behavior {
    /// Install the provider when it is missing.
    Ensure,
    /// Move the provider to its highest compatible version.
    ForceHigh,
    /// Move the provider to its lowest compatible version.
    ForceLow,
    /// Set the provider to a fixed version.
    Pin { version: Version },
}

/// Names used to phrase range violations as import or call errors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorHint {
    pub module: String,
    pub symbol: String,
    pub keyword: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Constraint {
    pub requirer: Requirer,
    pub provider: String,
    pub kind: ConstraintKind,
    pub behavior: Behavior,
    pub hint: ErrorHint,
}

impl Constraint {
    /// Whether `provider_version` is acceptable given the requirer's version
    /// (ignored for project edges).
    pub fn admits(&self, requirer_version: Option<Version>, provider_version: Version) -> bool {
        match self.kind {
            ConstraintKind::Range { lo, hi } => lo <= provider_version && provider_version <= hi,
            ConstraintKind::ExactMatch => requirer_version == Some(provider_version),
            ConstraintKind::MajorMatch => requirer_version.map(|r| r.major) == Some(provider_version.major),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Script {
    pub path: String,
    /// Packages imported directly by this script, in import order.
    pub packages: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoConfig {
    /// In topological order: providers before their requirers.
    pub packages: Vec<PackageSpec>,
    pub base_libraries: Vec<String>,
    pub constraints: Vec<Constraint>,
    pub required_python: Version,
    /// Entry sequence run by `run.py`.
    pub scripts: Vec<Script>,
    pub ground_truth: BTreeMap<String, Version>,
    pub ground_truth_python: Version,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepoState {
    pub installed: BTreeMap<String, Version>,
    pub python: Option<Version>,
    pub command_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "command", rename_all = "snake_case")]
pub enum ShellCommand {
    RepoTree,
    PipInstall { name: String, spec: VersionSpec },
    PipUninstall { name: String },
    PipList,
    Python { path: String },
}

impl ShellCommand {
    pub fn render(&self) -> String {
        match self {
            ShellCommand::RepoTree => "repo tree".into(),
            ShellCommand::PipInstall { name, spec } => format!("pip install {name}{spec}"),
            ShellCommand::PipUninstall { name } => format!("pip uninstall {name}"),
            ShellCommand::PipList => "pip list".into(),
            ShellCommand::Python { path } => format!("python {path}"),
        }
    }
}

pub const SUPPORTED_COMMANDS: &str =
    "repo tree | repo ls | pip install <pkg>[==x.y | >=x.y,<x.y] | pip uninstall <pkg> | pip list | python <script>";

fn parse_spec(text: &str) -> std::result::Result<(String, VersionSpec), String> {
    let text: String = text.chars().filter(|c| !c.is_whitespace() && *c != '"' && *c != '\'').collect();
    let name_end = text.find(|c: char| "=<>!~".contains(c)).unwrap_or(text.len());
    let name = text[..name_end].to_string();
    if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-' || c == '.') {
        return Err(format!("ERROR: Invalid requirement: '{text}'"));
    }
    let rest = &text[name_end..];
    let mut spec = Vec::new();
    if !rest.is_empty() {
        for clause in rest.split(',') {
            let (cmp, v) = if let Some(v) = clause.strip_prefix("==") {
                (Cmp::Eq, v)
            } else if let Some(v) = clause.strip_prefix(">=") {
                (Cmp::Ge, v)
            } else if let Some(v) = clause.strip_prefix("<=") {
                (Cmp::Le, v)
            } else if let Some(v) = clause.strip_prefix('>') {
                (Cmp::Gt, v)
            } else if let Some(v) = clause.strip_prefix('<') {
                (Cmp::Lt, v)
            } else {
                return Err(format!("ERROR: Invalid requirement: '{text}'"));
            };
            let v: Version = v.parse().map_err(|_| format!("ERROR: Invalid requirement: '{text}'"))?;
            spec.push((cmp, v));
        }
    }
    Ok((name, VersionSpec(spec)))
}

/// Parse one shell line. The error string is the feedback shown to the agent.
pub fn parse_command(line: &str) -> std::result::Result<ShellCommand, String> {
    let line = line.trim().trim_matches('`').trim();
    let words: Vec<&str> = line.split_whitespace().collect();
    match words.as_slice() {
        ["repo", "tree"] | ["repo", "ls"] => Ok(ShellCommand::RepoTree),
        ["pip", "list"] => Ok(ShellCommand::PipList),
        ["pip", "install", rest @ ..] | ["pip", "uninstall", rest @ ..] if rest.iter().any(|w| w.starts_with('-')) => {
            let flag = rest.iter().find(|w| w.starts_with('-')).unwrap();
            Err(format!("ERROR: option {flag} is not supported."))
        }
        ["pip", "install", rest @ ..] if !rest.is_empty() => {
            let joined = rest.join(" ");
            // A space-separated list of names is not supported; operators may be spaced.
            let names =
                joined.split(|c: char| "=<>!~,".contains(c)).next().map(|n| n.split_whitespace().count()).unwrap_or(0);
            if names != 1 {
                return Err("ERROR: install one package per command.".into());
            }
            let (name, spec) = parse_spec(&joined)?;
            Ok(ShellCommand::PipInstall { name, spec })
        }
        ["pip", "uninstall", name] => {
            let (name, spec) = parse_spec(name)?;
            if !spec.0.is_empty() {
                return Err("ERROR: pip uninstall takes a package name without a version.".into());
            }
            Ok(ShellCommand::PipUninstall { name })
        }
        ["python", path] | ["python3", path] => {
            Ok(ShellCommand::Python { path: path.trim_start_matches("./").to_string() })
        }
        _ => Err(format!("Unsupported command: '{line}'. Supported commands: {SUPPORTED_COMMANDS}.")),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommandOutcome {
    pub state: RepoState,
    pub feedback: String,
    pub progressed: bool,
    /// Set only when `python run.py` passes every check.
    pub success: bool,
}

/// Natural ordering for names like `pkg2` < `pkg10`.
fn natural_key(name: &str) -> (String, u64, String) {
    let split = name.find(|c: char| c.is_ascii_digit()).unwrap_or(name.len());
    let digits: String = name[split..].chars().take_while(|c| c.is_ascii_digit()).collect();
    let rest = name[split + digits.len()..].to_string();
    (name[..split].to_string(), digits.parse().unwrap_or(0), rest)
}

impl RepoConfig {
    pub fn package(&self, name: &str) -> Option<&PackageSpec> {
        self.packages.iter().find(|p| p.name == name)
    }

    pub fn topo_index(&self, name: &str) -> Option<usize> {
        self.packages.iter().position(|p| p.name == name)
    }

    pub fn outgoing<'a>(&'a self, name: &'a str) -> impl Iterator<Item = &'a Constraint> + 'a {
        self.constraints.iter().filter(move |c| matches!(&c.requirer, Requirer::Package(r) if r == name))
    }

    pub fn script(&self, path: &str) -> Option<&Script> {
        self.scripts.iter().find(|s| s.path == path)
    }

    /// Constraints exercised by a script: project edges to its packages and
    /// every edge whose requirer it imports.
    pub fn script_constraints(&self, script: &Script) -> Vec<&Constraint> {
        self.constraints
            .iter()
            .filter(|c| match &c.requirer {
                Requirer::Project => script.packages.contains(&c.provider),
                Requirer::Package(r) => script.packages.contains(r),
            })
            .collect()
    }

    pub fn validate(&self) -> Result<()> {
        let names: BTreeSet<&str> = self.packages.iter().map(|p| p.name.as_str()).collect();
        if names.len() != self.packages.len() || self.packages.is_empty() {
            return Err(ArenaError::config("packages", "package names must be unique and non-empty"));
        }
        for p in &self.packages {
            if p.versions.is_empty() || p.versions.windows(2).any(|w| w[0] >= w[1]) {
                return Err(ArenaError::config("packages", format!("{} needs ascending distinct versions", p.name)));
            }
        }
        for b in &self.base_libraries {
            if !names.contains(b.as_str()) || self.outgoing(b).next().is_some() {
                return Err(ArenaError::config(
                    "base_libraries",
                    format!("{b} must be a known package without dependencies"),
                ));
            }
        }
        for c in &self.constraints {
            let p = self
                .topo_index(&c.provider)
                .ok_or_else(|| ArenaError::config("constraints", format!("unknown provider {}", c.provider)))?;
            match &c.requirer {
                Requirer::Project => {
                    if !matches!(c.kind, ConstraintKind::Range { .. }) {
                        return Err(ArenaError::config("constraints", "project requirements must be ranges"));
                    }
                }
                Requirer::Package(r) => {
                    let ri = self
                        .topo_index(r)
                        .ok_or_else(|| ArenaError::config("constraints", format!("unknown requirer {r}")))?;
                    if ri <= p {
                        return Err(ArenaError::config(
                            "constraints",
                            format!("edge {r} -> {} breaks the topological order", c.provider),
                        ));
                    }
                }
            }
            if let Behavior::Pin { version } = c.behavior {
                if !self.packages[p].versions.contains(&version) {
                    return Err(ArenaError::config(
                        "constraints",
                        format!("pin {}=={version} is not available", c.provider),
                    ));
                }
            }
        }
        let mut seen = BTreeSet::new();
        for s in &self.scripts {
            if s.path == RUN_SCRIPT || !seen.insert(s.path.as_str()) {
                return Err(ArenaError::config("scripts", format!("duplicate or reserved script path {}", s.path)));
            }
            for p in &s.packages {
                if !names.contains(p.as_str()) {
                    return Err(ArenaError::config("scripts", format!("{} imports unknown package {p}", s.path)));
                }
            }
        }
        if self.ground_truth.len() != self.packages.len()
            || self.packages.iter().any(|p| self.ground_truth.get(&p.name).is_none_or(|v| !p.versions.contains(v)))
        {
            return Err(ArenaError::config("ground_truth", "must assign an available version to every package"));
        }
        if !self.satisfied_by(&self.ground_truth) || self.ground_truth_python < self.required_python {
            return Err(ArenaError::config("ground_truth", "does not satisfy the constraints"));
        }
        Ok(())
    }

    /// Whether a full assignment satisfies every constraint.
    pub fn satisfied_by(&self, assignment: &BTreeMap<String, Version>) -> bool {
        self.constraints.iter().all(|c| {
            let Some(&pv) = assignment.get(&c.provider) else { return false };
            let rv = match &c.requirer {
                Requirer::Project => None,
                Requirer::Package(r) => match assignment.get(r) {
                    Some(v) => Some(*v),
                    None => return false,
                },
            };
            c.admits(rv, pv)
        }) && self.packages.iter().all(|p| assignment.contains_key(&p.name))
    }

    pub fn rules_text(&self) -> String {
        let mut lines = vec![format!("Requires python>={}", self.required_python)];
        for c in self.constraints.iter().filter(|c| c.requirer == Requirer::Project) {
            if let ConstraintKind::Range { lo, hi } = c.kind {
                lines.push(describe_range("Project requires", &c.provider, lo, hi, self));
            }
        }
        for c in &self.constraints {
            let Requirer::Package(r) = &c.requirer else { continue };
            lines.push(match c.kind {
                ConstraintKind::ExactMatch => {
                    format!("{r} version must equal {} version exactly (major and minor)", c.provider)
                }
                ConstraintKind::MajorMatch => format!("{r} major version must match {} major version", c.provider),
                ConstraintKind::Range { lo, hi } => describe_range(&format!("{r} requires"), &c.provider, lo, hi, self),
            });
            match c.behavior {
                Behavior::Ensure => {}
                Behavior::ForceHigh => lines.push(format!(
                    "Installing {r} moves {} to its highest version compatible with that rule",
                    c.provider
                )),
                Behavior::ForceLow => lines.push(format!(
                    "Installing {r} moves {} to its lowest version compatible with that rule",
                    c.provider
                )),
                Behavior::Pin { version } => lines.push(format!("Installing {r} pins {}=={version}", c.provider)),
            }
        }
        lines.push("Installing a package also installs any missing dependency it needs".to_string());
        let order: Vec<&str> = self.scripts.iter().map(|s| s.path.as_str()).collect();
        lines.push(format!("run.py runs: {}", order.join(" -> ")));
        lines.iter().map(|l| format!("- {l}\n")).collect()
    }

    /// The configuration walked through in the interactive tutorial.
    pub fn tutorial() -> Self {
        let v = Version::new;
        let hint = |module: &str, symbol: &str, keyword: &str| ErrorHint {
            module: module.into(),
            symbol: symbol.into(),
            keyword: keyword.into(),
        };
        let project = |provider: &str, lo: Version, hi: Version, h: ErrorHint| Constraint {
            requirer: Requirer::Project,
            provider: provider.into(),
            kind: ConstraintKind::Range { lo, hi },
            behavior: Behavior::Ensure,
            hint: h,
        };
        RepoConfig {
            packages: vec![
                PackageSpec { name: "pkg1".into(), versions: vec![v(0, 1), v(1, 0), v(1, 2), v(2, 0)] },
                PackageSpec { name: "pkg2".into(), versions: vec![v(1, 0), v(1, 2), v(2, 0)] },
                PackageSpec { name: "pkg3".into(), versions: vec![v(0, 1), v(1, 0), v(1, 2)] },
            ],
            base_libraries: vec!["pkg1".into()],
            constraints: vec![
                project("pkg1", v(1, 0), v(1, 0), hint("core", "Engine", "backend")),
                project("pkg2", v(1, 2), v(2, 0), hint("io", "load_table", "strict")),
                project("pkg3", v(0, 1), v(1, 0), hint("ops", "fused_add", "axis")),
                Constraint {
                    requirer: Requirer::Package("pkg3".into()),
                    provider: "pkg1".into(),
                    kind: ConstraintKind::ExactMatch,
                    behavior: Behavior::Ensure,
                    hint: hint("core", "Engine", "device"),
                },
                Constraint {
                    requirer: Requirer::Package("pkg2".into()),
                    provider: "pkg1".into(),
                    kind: ConstraintKind::MajorMatch,
                    behavior: Behavior::Ensure,
                    hint: hint("core", "Engine", "timeout"),
                },
            ],
            required_python: v(3, 10),
            scripts: vec![
                Script { path: "core/smoke.py".into(), packages: vec!["pkg1".into(), "pkg2".into()] },
                Script { path: "ops/pipeline.py".into(), packages: vec!["pkg3".into()] },
            ],
            ground_truth: [("pkg1".to_string(), v(1, 0)), ("pkg2".to_string(), v(1, 2)), ("pkg3".to_string(), v(1, 0))]
                .into(),
            ground_truth_python: v(3, 10),
        }
    }
}

fn describe_range(prefix: &str, provider: &str, lo: Version, hi: Version, cfg: &RepoConfig) -> String {
    let versions = cfg.package(provider).map(|p| p.versions.as_slice()).unwrap_or(&[]);
    let min = versions.first().copied();
    let max = versions.last().copied();
    if lo == hi {
        format!("{prefix} {provider}=={lo}")
    } else if Some(lo) == min && Some(hi) == max {
        format!("{prefix} {provider} (any version)")
    } else if Some(lo) == min {
        format!("{prefix} {provider}<={hi}")
    } else if Some(hi) == max {
        format!("{prefix} {provider}>={lo}")
    } else {
        format!("{prefix} {provider}>={lo},<={hi}")
    }
}

/// Apply the behaviors of every edge leaving a changed package, newest
/// requirers first, then install missing `ensure` dependencies until closed.
fn propagate(
    config: &RepoConfig,
    installed: &mut BTreeMap<String, Version>,
    mut queue: BTreeSet<usize>,
    lines: &mut Vec<String>,
) {
    loop {
        while let Some(idx) = queue.pop_last() {
            let name = &config.packages[idx].name;
            let Some(&rv) = installed.get(name) else { continue };
            for edge in config.outgoing(name) {
                let pidx = config.topo_index(&edge.provider).expect("validated provider");
                let versions = &config.packages[pidx].versions;
                let current = installed.get(&edge.provider).copied();
                let compatible: Vec<Version> = versions.iter().copied().filter(|v| edge.admits(Some(rv), *v)).collect();
                let target = match edge.behavior {
                    Behavior::Ensure if current.is_none() => {
                        compatible.last().copied().or_else(|| versions.last().copied())
                    }
                    Behavior::Ensure => None,
                    Behavior::ForceHigh => compatible.last().copied(),
                    Behavior::ForceLow => compatible.first().copied(),
                    Behavior::Pin { version } => Some(version),
                };
                if let Some(t) = target {
                    if current != Some(t) {
                        installed.insert(edge.provider.clone(), t);
                        lines.push(side_effect_line(&edge.provider, current, t, name));
                        queue.insert(pidx);
                    }
                }
            }
        }
        // Closure: every ensure edge from an installed package must be met.
        let missing = config.constraints.iter().find_map(|c| {
            let Requirer::Package(r) = &c.requirer else { return None };
            let rv = *installed.get(r)?;
            if c.behavior != Behavior::Ensure || installed.contains_key(&c.provider) {
                return None;
            }
            let versions = &config.package(&c.provider)?.versions;
            let v = versions.iter().rev().find(|v| c.admits(Some(rv), **v)).or(versions.last()).copied()?;
            Some((c.provider.clone(), v, r.clone()))
        });
        match missing {
            Some((provider, v, by)) => {
                installed.insert(provider.clone(), v);
                lines.push(side_effect_line(&provider, None, v, &by));
                queue.insert(config.topo_index(&provider).expect("validated provider"));
            }
            None => break,
        }
    }
}

fn side_effect_line(provider: &str, from: Option<Version>, to: Version, by: &str) -> String {
    match from {
        None => format!("Also installed {provider}=={to} (required by {by})."),
        Some(f) if to > f => format!("Also upgraded {provider} {f} -> {to} (required by {by})."),
        Some(f) => format!("Also downgraded {provider} {f} -> {to} (required by {by})."),
    }
}

/// `pip install`: pick the highest available version matching `spec` and
/// resolve side effects.
pub fn resolve_install(state: &RepoState, config: &RepoConfig, name: &str, spec: &VersionSpec) -> (RepoState, String) {
    let mut next = state.clone();
    let requirement = format!("{name}{spec}");
    if name == "python" {
        let menu = python_menu();
        return match menu.iter().rev().find(|v| spec.matches(**v)) {
            Some(&v) if state.python == Some(v) => (next, format!("Requirement already satisfied: python=={v}")),
            Some(&v) => {
                next.python = Some(v);
                (next, format!("Successfully installed python=={v}"))
            }
            None => (next, no_match(&requirement, &menu)),
        };
    }
    let Some(idx) = config.topo_index(name) else {
        return (next, no_match(&requirement, &[]));
    };
    let versions = &config.packages[idx].versions;
    let Some(&v) = versions.iter().rev().find(|v| spec.matches(**v)) else {
        return (next, no_match(&requirement, versions));
    };
    let mut queue = BTreeSet::new();
    let mut lines = Vec::new();
    if state.installed.get(name) == Some(&v) {
        // Missing dependencies are still restored.
        lines.push(format!("Requirement already satisfied: {name}=={v}"));
    } else {
        next.installed.insert(name.to_string(), v);
        lines.push(format!("Successfully installed {name}=={v}"));
        queue.insert(idx);
    }
    propagate(config, &mut next.installed, queue, &mut lines);
    (next, lines.join("\n"))
}

fn no_match(requirement: &str, versions: &[Version]) -> String {
    let listed = if versions.is_empty() {
        "none".to_string()
    } else {
        versions.iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
    };
    format!(
        "ERROR: Could not find a version that satisfies the requirement {requirement} (from versions: {listed})\n\
         ERROR: No matching distribution found for {requirement}"
    )
}

fn check_python(state: &RepoState, config: &RepoConfig) -> Option<String> {
    match state.python {
        None => Some("bash: python: command not found".into()),
        Some(v) if v < config.required_python => {
            Some(format!("SyntaxError: invalid syntax (this project uses language features unavailable in Python {v})"))
        }
        Some(_) => None,
    }
}

/// First failing check of one script, in the fixed order: missing package,
/// range, major match, exact match.
fn check_script(state: &RepoState, config: &RepoConfig, script: &Script) -> Option<String> {
    let edges = config.script_constraints(script);
    let mut needed: Vec<&str> = script.packages.iter().map(String::as_str).collect();
    for e in &edges {
        if !needed.contains(&e.provider.as_str()) {
            needed.push(&e.provider);
        }
    }
    if let Some(p) = needed.iter().find(|p| !state.installed.contains_key(**p)) {
        return Some(format!("ModuleNotFoundError: No module named '{p}'."));
    }
    let violated = |e: &&&Constraint| {
        let pv = state.installed[&e.provider];
        let rv = match &e.requirer {
            Requirer::Project => None,
            Requirer::Package(r) => Some(state.installed[r]),
        };
        !e.admits(rv, pv)
    };
    let of_kind = |pred: fn(&ConstraintKind) -> bool| edges.iter().filter(move |e| pred(&e.kind)).find(violated);
    if let Some(e) = of_kind(|k| matches!(k, ConstraintKind::Range { .. })) {
        let h = &e.hint;
        return Some(match &e.requirer {
            Requirer::Project => {
                format!("ImportError: cannot import name '{}' from {}.{}", h.symbol, e.provider, h.module)
            }
            Requirer::Package(r) => format!(
                "TypeError: {}() got an unexpected keyword argument '{}' while importing {r}",
                h.symbol, h.keyword
            ),
        });
    }
    if let Some(e) = of_kind(|k| matches!(k, ConstraintKind::MajorMatch)) {
        return Some(format!("RuntimeError: ABI mismatch detected between '{}' and dependent packages.", e.provider));
    }
    if let Some(e) = of_kind(|k| matches!(k, ConstraintKind::ExactMatch)) {
        return Some(format!("RuntimeError: tightly-coupled components are out of sync with '{}'.", e.provider));
    }
    None
}

/// Run a script. Returns the feedback and whether the whole project passed.
pub fn diagnose(state: &RepoState, config: &RepoConfig, path: &str) -> (String, bool) {
    let path = path.trim_start_matches("./");
    if path == RUN_SCRIPT {
        if let Some(err) = check_python(state, config) {
            return (err, false);
        }
        for script in &config.scripts {
            if let Some(err) = check_script(state, config, script) {
                return (err, false);
            }
        }
        return (SUCCESS_MESSAGE.to_string(), true);
    }
    let Some(script) = config.script(path) else {
        return (format!("python: can't open file '{path}': [Errno 2] No such file or directory"), false);
    };
    if let Some(err) = check_python(state, config) {
        return (err, false);
    }
    match check_script(state, config, script) {
        Some(err) => (err, false),
        None => (format!("{path} finished without errors. Run python run.py to check the whole project."), false),
    }
}

pub fn render_tree(config: &RepoConfig) -> String {
    let order: Vec<&str> = config.scripts.iter().map(|s| s.path.as_str()).collect();
    let mut lines = vec![".".to_string(), format!("├── run.py  (runs: {})", order.join(", "))];
    let mut paths: Vec<&str> = order.clone();
    paths.sort_unstable();
    for (i, p) in paths.iter().enumerate() {
        let branch = if i + 1 == paths.len() { "└──" } else { "├──" };
        lines.push(format!("{branch} {p}"));
    }
    lines.join("\n")
}

pub fn render_pip_list(state: &RepoState) -> String {
    let mut rows: Vec<(String, String)> = Vec::new();
    if let Some(v) = state.python {
        rows.push(("python".into(), v.to_string()));
    }
    let mut pkgs: Vec<(&String, &Version)> = state.installed.iter().collect();
    pkgs.sort_by_key(|(n, _)| natural_key(n));
    rows.extend(pkgs.into_iter().map(|(n, v)| (n.clone(), v.to_string())));
    let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(0).max(7);
    let mut out = format!("{:<width$} Version\n{} -------", "Package", "-".repeat(width));
    for (n, v) in rows {
        out.push_str(&format!("\n{n:<width$} {v}"));
    }
    out
}

/// Execute one shell command.
pub fn execute_command(state: &RepoState, config: &RepoConfig, command: &ShellCommand) -> CommandOutcome {
    let mut next = state.clone();
    next.command_count += 1;
    let (feedback, success) = match command {
        ShellCommand::RepoTree => (render_tree(config), false),
        ShellCommand::PipList => (render_pip_list(state), false),
        ShellCommand::PipInstall { name, spec } => {
            let (s, fb) = resolve_install(state, config, name, spec);
            next.installed = s.installed;
            next.python = s.python;
            (fb, false)
        }
        ShellCommand::PipUninstall { name } => {
            if name == "python" {
                ("ERROR: Cannot uninstall the Python interpreter.".to_string(), false)
            } else {
                match next.installed.remove(name) {
                    Some(v) => (format!("Successfully uninstalled {name}=={v}"), false),
                    None => (format!("WARNING: Skipping {name} as it is not installed."), false),
                }
            }
        }
        ShellCommand::Python { path } => diagnose(state, config, path),
    };
    let progressed = next.installed != state.installed || next.python != state.python;
    CommandOutcome { state: next, feedback, progressed, success }
}

/// Number of package assignments over the full version product space that
/// satisfy every constraint. Errors when the space exceeds `MAX_BRUTE_FORCE`.
pub fn count_solutions(config: &RepoConfig) -> Result<u64> {
    let size =
        config.packages.iter().try_fold(1u64, |acc, p| acc.checked_mul(p.versions.len() as u64)).unwrap_or(u64::MAX);
    if size > MAX_BRUTE_FORCE {
        return Err(ArenaError::Capacity(format!(
            "version space of {size} assignments exceeds the brute-force limit of {MAX_BRUTE_FORCE}"
        )));
    }
    if !python_menu().iter().any(|v| *v >= config.required_python) {
        return Ok(0);
    }
    let n = config.packages.len();
    let mut idx = vec![0usize; n];
    let mut assignment: BTreeMap<String, Version> =
        config.packages.iter().map(|p| (p.name.clone(), p.versions[0])).collect();
    let mut count = 0;
    loop {
        if config.satisfied_by(&assignment) {
            count += 1;
        }
        let mut k = 0;
        loop {
            if k == n {
                return Ok(count);
            }
            idx[k] += 1;
            let p = &config.packages[k];
            if idx[k] < p.versions.len() {
                assignment.insert(p.name.clone(), p.versions[idx[k]]);
                break;
            }
            idx[k] = 0;
            assignment.insert(p.name.clone(), p.versions[0]);
            k += 1;
        }
    }
}

/// Commands that install the ground truth: python first, then packages from
/// the last in topological order to the first, each pinned exactly.
pub fn ground_truth_commands(config: &RepoConfig) -> Vec<ShellCommand> {
    let mut cmds = vec![ShellCommand::PipInstall {
        name: "python".into(),
        spec: VersionSpec(vec![(Cmp::Eq, config.ground_truth_python)]),
    }];
    for p in config.packages.iter().rev() {
        cmds.push(ShellCommand::PipInstall {
            name: p.name.clone(),
            spec: VersionSpec(vec![(Cmp::Eq, config.ground_truth[&p.name])]),
        });
    }
    cmds.push(ShellCommand::Python { path: RUN_SCRIPT.into() });
    cmds
}

/// Replay [`ground_truth_commands`] from an empty environment.
pub fn certify_ground_truth(config: &RepoConfig) -> bool {
    let mut state = RepoState::default();
    let mut success = false;
    for cmd in ground_truth_commands(config) {
        let out = execute_command(&state, config, &cmd);
        state = out.state;
        success = out.success;
    }
    success && state.installed == config.ground_truth
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RepoParams {
    pub n_packages: usize,
    /// Probability that a package gets a second, range-typed dependency.
    pub extra_edge_prob: f64,
    /// Probability that the project pins a range on a package.
    pub project_range_prob: f64,
}

impl RepoParams {
    pub fn new(n_packages: usize) -> Self {
        Self { n_packages, extra_edge_prob: 0.4, project_range_prob: 0.6 }
    }
}

const MODULES: [&str; 8] = ["core", "utils", "io", "api", "ops", "compat", "backend", "runtime"];
const SYMBOLS: [&str; 12] = [
    "Engine",
    "load_table",
    "Session",
    "encode",
    "transform",
    "Tensor",
    "Client",
    "parse_args",
    "Pipeline",
    "register",
    "fused_add",
    "Config",
];
const KEYWORDS: [&str; 8] = ["timeout", "device", "strict", "axis", "dtype", "verbose", "backend", "cache"];
const SCRIPT_PATHS: [&str; 8] = [
    "core/smoke.py",
    "data/loader.py",
    "models/train.py",
    "utils/check.py",
    "io/export.py",
    "api/server.py",
    "ops/kernels.py",
    "eval/report.py",
];

fn sample_hint(rng: &mut RngStream) -> ErrorHint {
    ErrorHint {
        module: rng.choose(&MODULES).unwrap().to_string(),
        symbol: rng.choose(&SYMBOLS).unwrap().to_string(),
        keyword: rng.choose(&KEYWORDS).unwrap().to_string(),
    }
}

fn sample_versions(rng: &mut RngStream) -> Vec<Version> {
    let count = rng.range_inclusive(3, 5) as usize;
    let mut set = BTreeSet::new();
    while set.len() < count {
        set.insert(Version::new(rng.range_inclusive(0, 3) as u32, rng.range_inclusive(0, 9) as u32));
    }
    set.into_iter().collect()
}

/// A range over `versions` containing `gt`, usually excluding some versions.
fn sample_range(rng: &mut RngStream, versions: &[Version], gt: Version) -> (Version, Version) {
    let g = versions.iter().position(|v| *v == gt).expect("ground truth is available");
    if rng.bernoulli(0.25) {
        return (gt, gt);
    }
    let lo = rng.range_inclusive(0, g as i64) as usize;
    let hi = rng.range_inclusive(g as i64, versions.len() as i64 - 1) as usize;
    (versions[lo], versions[hi])
}

fn sample_behavior(rng: &mut RngStream, provider_versions: &[Version]) -> Behavior {
    let u = rng.next_f64();
    if u < 0.5 {
        Behavior::Ensure
    } else if u < 0.7 {
        Behavior::ForceHigh
    } else if u < 0.85 {
        Behavior::ForceLow
    } else {
        Behavior::Pin { version: *rng.choose(provider_versions).unwrap() }
    }
}

/// Solution-first generation: sample versions and a ground truth in
/// topological order, emit only constraints the ground truth satisfies, then
/// certify by replaying the ground-truth install sequence and by exhaustive
/// search.
pub fn generate_repo_task(seed: u64, params: &RepoParams) -> Result<RepoConfig> {
    let n = params.n_packages;
    if !(2..=10).contains(&n) {
        return Err(ArenaError::config("n_packages", format!("must be in 2..=10, got {n}")));
    }
    let mut rng = RngStream::new(seed, "repo");
    let mut name_ids: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut name_ids);
    let names: Vec<String> = name_ids.iter().map(|i| format!("pkg{i}")).collect();
    let n_base = if n >= 4 && rng.bernoulli(0.5) { 2 } else { 1 };

    let mut packages: Vec<PackageSpec> = Vec::with_capacity(n);
    let mut gt: Vec<Version> = Vec::with_capacity(n);
    let mut constraints = Vec::new();
    for i in 0..n {
        let mut versions = sample_versions(&mut rng);
        if i < n_base {
            let g = *rng.choose(&versions).unwrap();
            packages.push(PackageSpec { name: names[i].clone(), versions });
            gt.push(g);
            continue;
        }
        let primary = rng.index(i);
        let pv = gt[primary];
        let u = rng.next_f64();
        let kind_tag = if u < 0.25 {
            0
        } else if u < 0.6 {
            1
        } else {
            2
        };
        let g = match kind_tag {
            0 => {
                if !versions.contains(&pv) {
                    versions.push(pv);
                    versions.sort_unstable();
                }
                pv
            }
            1 => {
                let same: Vec<Version> = versions.iter().copied().filter(|v| v.major == pv.major).collect();
                match rng.choose(&same) {
                    Some(v) => *v,
                    None => {
                        let v = Version::new(pv.major, rng.range_inclusive(0, 9) as u32);
                        versions.push(v);
                        versions.sort_unstable();
                        versions.dedup();
                        v
                    }
                }
            }
            _ => *rng.choose(&versions).unwrap(),
        };
        let provider_versions = packages[primary].versions.clone();
        let kind = match kind_tag {
            0 => ConstraintKind::ExactMatch,
            1 => ConstraintKind::MajorMatch,
            _ => {
                let (lo, hi) = sample_range(&mut rng, &provider_versions, pv);
                ConstraintKind::Range { lo, hi }
            }
        };
        constraints.push(Constraint {
            requirer: Requirer::Package(names[i].clone()),
            provider: names[primary].clone(),
            kind,
            behavior: sample_behavior(&mut rng, &provider_versions),
            hint: sample_hint(&mut rng),
        });
        if i >= 2 && rng.bernoulli(params.extra_edge_prob) {
            let mut second = rng.index(i);
            if second == primary {
                second = (second + 1) % i;
            }
            let sv = packages[second].versions.clone();
            let (lo, hi) = sample_range(&mut rng, &sv, gt[second]);
            constraints.push(Constraint {
                requirer: Requirer::Package(names[i].clone()),
                provider: names[second].clone(),
                kind: ConstraintKind::Range { lo, hi },
                behavior: sample_behavior(&mut rng, &sv),
                hint: sample_hint(&mut rng),
            });
        }
        packages.push(PackageSpec { name: names[i].clone(), versions });
        gt.push(g);
    }
    for i in 0..n {
        if rng.bernoulli(params.project_range_prob) {
            let (lo, hi) = sample_range(&mut rng, &packages[i].versions, gt[i]);
            constraints.push(Constraint {
                requirer: Requirer::Project,
                provider: names[i].clone(),
                kind: ConstraintKind::Range { lo, hi },
                behavior: Behavior::Ensure,
                hint: sample_hint(&mut rng),
            });
        }
    }
    let menu = python_menu();
    let required_python = *rng.choose(&menu).unwrap();
    let ok_python: Vec<Version> = menu.iter().copied().filter(|v| *v >= required_python).collect();
    let ground_truth_python = *rng.choose(&ok_python).unwrap();

    let n_scripts = if n >= 5 { rng.range_inclusive(2, 3) as usize } else { 2 };
    let mut paths: Vec<&str> = SCRIPT_PATHS.to_vec();
    rng.shuffle(&mut paths);
    let mut scripts: Vec<Script> =
        paths[..n_scripts].iter().map(|p| Script { path: p.to_string(), packages: Vec::new() }).collect();
    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    for (k, &i) in order.iter().enumerate() {
        let s = if k < n_scripts { k } else { rng.index(n_scripts) };
        scripts[s].packages.push(names[i].clone());
    }

    let config = RepoConfig {
        base_libraries: names[..n_base].to_vec(),
        ground_truth: names.iter().cloned().zip(gt).collect(),
        packages,
        constraints,
        required_python,
        scripts,
        ground_truth_python,
    };
    config.validate()?;
    if !certify_ground_truth(&config) {
        return Err(ArenaError::Generation("ground-truth install sequence does not reach success".into()));
    }
    if count_solutions(&config)? == 0 {
        return Err(ArenaError::Generation("exhaustive search found no satisfying assignment".into()));
    }
    Ok(config)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(state: &mut RepoState, cfg: &RepoConfig, line: &str) -> CommandOutcome {
        let cmd = parse_command(line).unwrap();
        let out = execute_command(state, cfg, &cmd);
        *state = out.state.clone();
        out
    }

    #[test]
    fn version_parsing() {
        assert_eq!("1.2".parse::<Version>().unwrap(), Version::new(1, 2));
        assert_eq!("1.2.7".parse::<Version>().unwrap(), Version::new(1, 2));
        assert_eq!("3".parse::<Version>().unwrap(), Version::new(3, 0));
        assert!("a.b".parse::<Version>().is_err());
        assert!(Version::new(3, 10) > Version::new(3, 9));
    }

    #[test]
    fn command_parsing() {
        assert_eq!(parse_command("repo ls").unwrap(), ShellCommand::RepoTree);
        assert_eq!(
            parse_command("pip install pkgX>=1.1,<2.0").unwrap(),
            ShellCommand::PipInstall {
                name: "pkgX".into(),
                spec: VersionSpec(vec![(Cmp::Ge, Version::new(1, 1)), (Cmp::Lt, Version::new(2, 0))])
            }
        );
        assert_eq!(
            parse_command("pip install pkg0 == 2.1.3").unwrap(),
            ShellCommand::PipInstall { name: "pkg0".into(), spec: VersionSpec(vec![(Cmp::Eq, Version::new(2, 1))]) }
        );
        assert!(parse_command("pip install --upgrade pkg0").unwrap_err().contains("--upgrade"));
        assert!(parse_command("pip install a b").is_err());
        assert!(parse_command("rm -rf /").unwrap_err().starts_with("Unsupported command"));
        assert_eq!(
            parse_command("python ./core/smoke.py").unwrap(),
            ShellCommand::Python { path: "core/smoke.py".into() }
        );
    }

    #[test]
    fn tutorial_config_is_valid_and_solvable() {
        let cfg = RepoConfig::tutorial();
        cfg.validate().unwrap();
        assert!(certify_ground_truth(&cfg));
        assert!(count_solutions(&cfg).unwrap() >= 1);
    }

    #[test]
    fn reinstall_is_a_noop() {
        let cfg = RepoConfig::tutorial();
        let mut s = RepoState::default();
        run(&mut s, &cfg, "pip install pkg1==1.0");
        let out = run(&mut s, &cfg, "pip install pkg1==1.0");
        assert!(!out.progressed);
        assert_eq!(out.feedback, "Requirement already satisfied: pkg1==1.0");
    }

    #[test]
    fn unknown_version_reports_available_ones() {
        let cfg = RepoConfig::tutorial();
        let out = run(&mut RepoState::default(), &cfg, "pip install pkg2==9.9");
        assert!(!out.progressed);
        assert!(out.feedback.contains("from versions: 1.0, 1.2, 2.0"), "{}", out.feedback);
    }

    #[test]
    fn ensure_installs_missing_dependency() {
        let cfg = RepoConfig::tutorial();
        let mut s = RepoState::default();
        let out = run(&mut s, &cfg, "pip install pkg2==1.2");
        assert_eq!(s.installed.get("pkg1"), Some(&Version::new(1, 2)));
        assert!(out.feedback.contains("Also installed pkg1==1.2 (required by pkg2)."), "{}", out.feedback);
    }

    #[test]
    fn force_high_is_order_dependent() {
        let mut cfg = RepoConfig::tutorial();
        cfg.constraints[4].behavior = Behavior::ForceHigh;
        let mut a = RepoState::default();
        run(&mut a, &cfg, "pip install pkg1==1.0");
        run(&mut a, &cfg, "pip install pkg2==1.2");
        let mut b = RepoState::default();
        run(&mut b, &cfg, "pip install pkg2==1.2");
        run(&mut b, &cfg, "pip install pkg1==1.0");
        assert_eq!(a.installed["pkg1"], Version::new(1, 2));
        assert_eq!(b.installed["pkg1"], Version::new(1, 0));
    }

    #[test]
    fn uninstall_does_not_cascade() {
        let cfg = RepoConfig::tutorial();
        let mut s = RepoState::default();
        run(&mut s, &cfg, "pip install pkg2==1.2");
        let out = run(&mut s, &cfg, "pip uninstall pkg1");
        assert_eq!(out.feedback, "Successfully uninstalled pkg1==1.2");
        assert!(s.installed.contains_key("pkg2"));
        assert!(!s.installed.contains_key("pkg1"));
    }

    #[test]
    fn sub_script_pass_is_not_success() {
        let cfg = RepoConfig::tutorial();
        let mut s = RepoState::default();
        for l in ["pip install python==3.10", "pip install pkg1==1.0", "pip install pkg2==1.2"] {
            run(&mut s, &cfg, l);
        }
        let sub = run(&mut s, &cfg, "python core/smoke.py");
        assert!(!sub.success);
        assert!(sub.feedback.contains("without errors"));
        let full = run(&mut s, &cfg, "python run.py");
        assert!(!full.success);
        assert_eq!(full.feedback, "ModuleNotFoundError: No module named 'pkg3'.");
        let bad = run(&mut s, &cfg, "python nope.py");
        assert!(bad.feedback.contains("No such file"));
    }

    #[test]
    fn python_checks_come_first() {
        let cfg = RepoConfig::tutorial();
        let mut s = RepoState::default();
        assert_eq!(run(&mut s, &cfg, "python run.py").feedback, "bash: python: command not found");
        run(&mut s, &cfg, "pip install python==3.8");
        assert!(run(&mut s, &cfg, "python run.py").feedback.starts_with("SyntaxError"));
        let out = run(&mut s, &cfg, "pip install python>=3.9");
        assert_eq!(out.feedback, "Successfully installed python==3.12");
    }

    #[test]
    fn range_errors_name_symbols() {
        let cfg = RepoConfig::tutorial();
        let mut s = RepoState::default();
        for l in ["pip install python==3.11", "pip install pkg1==2.0"] {
            run(&mut s, &cfg, l);
        }
        let out = run(&mut s, &cfg, "python core/smoke.py");
        assert_eq!(out.feedback, "ModuleNotFoundError: No module named 'pkg2'.");
        run(&mut s, &cfg, "pip install pkg2==2.0");
        let out = run(&mut s, &cfg, "python core/smoke.py");
        assert_eq!(out.feedback, "ImportError: cannot import name 'Engine' from pkg1.core");
    }

    #[test]
    fn pip_list_is_sorted_naturally() {
        let s = RepoState {
            installed: [("pkg10".to_string(), Version::new(1, 0)), ("pkg2".to_string(), Version::new(0, 1))].into(),
            python: Some(Version::new(3, 10)),
            command_count: 0,
        };
        let listing = render_pip_list(&s);
        assert_eq!(listing, "Package Version\n------- -------\npython  3.10\npkg2    0.1\npkg10   1.0");
    }

    #[test]
    fn generation_is_certified_and_deterministic() {
        for n in 3..=8 {
            for seed in 0..5 {
                let a = generate_repo_task(seed, &RepoParams::new(n)).unwrap();
                assert_eq!(a, generate_repo_task(seed, &RepoParams::new(n)).unwrap());
                assert!(certify_ground_truth(&a));
            }
        }
    }
}
