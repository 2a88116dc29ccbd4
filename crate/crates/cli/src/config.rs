//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! `#` and `;` start comments. Every key is checked against the section's
//! known keys, and diagnostics carry the 1-based line number.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use parctrl_core::fem::Side;
use parctrl_core::scalar::ScalarVariant;

use crate::error::{CliError, CliResult};
use crate::profile::Profile;

const SECTIONS: &[(&str, &[&str])] = &[
    ("mesh", &["dim", "cells", "nx", "ny", "gamma1"]),
    ("time", &["t_final", "steps"]),
    ("data", &["g", "b", "v_b", "z_d", "q", "q0"]),
    ("weights", &["m", "m1"]),
    ("robin", &["alpha", "alphas"]),
    ("solver", &["tol", "max_iter"]),
    ("solve", &["kind"]),
    ("optimize", &["problem"]),
    ("lambda", &["variant"]),
    ("sweep", &["control"]),
    ("decay", &["g_inf", "q_inf"]),
    (
        "compare",
        &["lambda1", "lambda2", "g1", "g2", "b1", "b2", "v_b1", "v_b2", "variant", "lumped"],
    ),
    ("verify", &["seed", "suites"]),
    ("output", &["dir", "plots"]),
];

#[derive(Debug, Clone)]
struct Entry {
    value: String,
    line: usize,
}

/// Raw `section.key` table, in file order of first appearance.
#[derive(Debug, Clone, Default)]
struct Table {
    entries: BTreeMap<(String, String), Entry>,
    sections: BTreeMap<String, usize>,
}

fn parse_table(text: &str) -> CliResult<Table> {
    let mut table = Table::default();
    let mut section: Option<String> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.split(['#', ';']).next().unwrap_or("").trim();
        if s.is_empty() {
            continue;
        }
        if let Some(rest) = s.strip_prefix('[') {
            let name = rest
                .strip_suffix(']')
                .ok_or_else(|| CliError::config(line, format!("malformed section header '{s}'")))?
                .trim()
                .to_string();
            if !SECTIONS.iter().any(|(n, _)| *n == name) {
                return Err(CliError::config(line, format!("unknown section [{name}]")));
            }
            if table.sections.insert(name.clone(), line).is_some() {
                return Err(CliError::config(line, format!("duplicate section [{name}]")));
            }
            section = Some(name);
            continue;
        }
        let (key, value) = s
            .split_once('=')
            .ok_or_else(|| CliError::config(line, format!("expected 'key = value', found '{s}'")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        let sec = section
            .clone()
            .ok_or_else(|| CliError::config(line, format!("key '{key}' appears before any [section]")))?;
        let known = SECTIONS.iter().find(|(n, _)| *n == sec).map(|(_, k)| *k).unwrap_or(&[]);
        if !known.contains(&key.as_str()) {
            return Err(CliError::config(
                line,
                format!("unknown key '{key}' in [{sec}] (known: {})", known.join(", ")),
            ));
        }
        if value.is_empty() {
            return Err(CliError::config(line, format!("key '{key}' has no value")));
        }
        if table.entries.insert((sec.clone(), key.clone()), Entry { value, line }).is_some() {
            return Err(CliError::config(line, format!("duplicate key '{key}' in [{sec}]")));
        }
    }
    Ok(table)
}

impl Table {
    fn get(&self, sec: &str, key: &str) -> Option<&Entry> {
        self.entries.get(&(sec.to_string(), key.to_string()))
    }

    fn has_section(&self, sec: &str) -> bool {
        self.sections.contains_key(sec)
    }

    fn require(&self, sec: &str, key: &str) -> CliResult<&Entry> {
        self.get(sec, key).ok_or_else(|| {
            CliError::config(
                self.sections.get(sec).copied(),
                format!("missing required key '{key}' in [{sec}]"),
            )
        })
    }

    fn parse<T: std::str::FromStr>(&self, sec: &str, key: &str, what: &str) -> CliResult<Option<T>> {
        self.get(sec, key)
            .map(|e| {
                e.value
                    .parse::<T>()
                    .map_err(|_| CliError::config(e.line, format!("'{key}' must be {what}, found '{}'", e.value)))
            })
            .transpose()
    }

    fn positive(&self, sec: &str, key: &str) -> CliResult<Option<f64>> {
        let v: Option<f64> = self.parse(sec, key, "a number")?;
        if let Some(x) = v {
            if !(x > 0.0) || !x.is_finite() {
                let line = self.get(sec, key).map(|e| e.line);
                return Err(CliError::config(line, format!("'{key}' must be positive and finite, found {x}")));
            }
        }
        Ok(v)
    }

    fn count(&self, sec: &str, key: &str) -> CliResult<Option<usize>> {
        let v: Option<usize> = self.parse(sec, key, "a positive integer")?;
        if v == Some(0) {
            let line = self.get(sec, key).map(|e| e.line);
            return Err(CliError::config(line, format!("'{key}' must be at least 1")));
        }
        Ok(v)
    }

    fn profile(&self, sec: &str, key: &str, base_dir: &Path) -> CliResult<Option<Profile>> {
        self.get(sec, key)
            .map(|e| {
                let p = Profile::parse(&e.value, base_dir).map_err(|m| CliError::config(e.line, m))?;
                for t in &p.terms {
                    if let crate::profile::Term::Csv(path) = t {
                        if !path.is_file() {
                            return Err(CliError::config(
                                e.line,
                                format!("referenced file {} does not exist", path.display()),
                            ));
                        }
                    }
                }
                if p.has_steady() && key != "v_b" {
                    return Err(CliError::config(e.line, "'steady' is only allowed for v_b"));
                }
                Ok(p)
            })
            .transpose()
    }

    fn flag(&self, sec: &str, key: &str, default: bool) -> CliResult<bool> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(e) => match e.value.to_ascii_lowercase().as_str() {
                "true" | "yes" | "on" | "1" => Ok(true),
                "false" | "no" | "off" | "0" => Ok(false),
                _ => Err(CliError::config(e.line, format!("'{key}' must be true or false"))),
            },
        }
    }

    fn choice<T: Copy>(&self, sec: &str, key: &str, options: &[(&str, T)], default: T) -> CliResult<T> {
        match self.get(sec, key) {
            None => Ok(default),
            Some(e) => options
                .iter()
                .find(|(n, _)| *n == e.value)
                .map(|(_, v)| *v)
                .ok_or_else(|| {
                    let names: Vec<&str> = options.iter().map(|(n, _)| *n).collect();
                    CliError::config(e.line, format!("'{key}' must be one of {}", names.join(", ")))
                }),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeshConfig {
    pub dim: usize,
    pub nx: usize,
    /// Unused in 1D.
    pub ny: usize,
    pub gamma1: Vec<Side>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataConfig {
    pub g: Profile,
    pub b: Profile,
    pub v_b: Profile,
    pub z_d: Profile,
    pub q: Profile,
    pub q0: Option<Profile>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveKind {
    Parabolic,
    Elliptic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizeProblem {
    Boundary,
    Distributed,
    Simultaneous,
}

impl OptimizeProblem {
    pub fn name(&self) -> &'static str {
        match self {
            OptimizeProblem::Boundary => "boundary",
            OptimizeProblem::Distributed => "distributed",
            OptimizeProblem::Simultaneous => "simultaneous",
        }
    }
}

/// Scalar-control variant without its Robin coefficient, which comes from
/// `[robin] alpha`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LambdaKind {
    Parabolic,
    ParabolicRobin,
    Elliptic,
    EllipticRobin,
}

const LAMBDA_KINDS: &[(&str, LambdaKind)] = &[
    ("parabolic", LambdaKind::Parabolic),
    ("parabolic-robin", LambdaKind::ParabolicRobin),
    ("elliptic", LambdaKind::Elliptic),
    ("elliptic-robin", LambdaKind::EllipticRobin),
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepMode {
    Fixed,
    Optimize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecayConfig {
    pub g_inf: Option<Profile>,
    pub q_inf: Option<Profile>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub g1: Profile,
    pub g2: Profile,
    pub b1: Profile,
    pub b2: Profile,
    pub v_b1: Profile,
    pub v_b2: Profile,
    pub variant: LambdaKind,
    pub lumped: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    /// Verbatim config text, echoed into the manifest.
    pub text: String,
    /// Directory that relative paths resolve against.
    pub base_dir: PathBuf,
    pub mesh: MeshConfig,
    pub t_final: f64,
    pub steps: usize,
    pub data: DataConfig,
    pub m: f64,
    pub m1: f64,
    /// `None` selects the Dirichlet problem.
    pub alpha: Option<f64>,
    pub alphas: Vec<f64>,
    pub tol: f64,
    pub max_iter: usize,
    pub solve_kind: SolveKind,
    pub problem: OptimizeProblem,
    pub lambda_kind: LambdaKind,
    pub sweep_mode: SweepMode,
    /// Present when `[decay]` appears; triggers the forced-decay study.
    pub decay: Option<DecayConfig>,
    pub compare: Option<CompareConfig>,
    pub seed: u64,
    pub suites: Option<Vec<String>>,
    pub out_dir: PathBuf,
    pub plots: bool,
}

pub const DEFAULT_ALPHAS: [f64; 4] = [10.0, 100.0, 1000.0, 10000.0];
/// Robin coefficient used for `*-robin` variants when `[robin] alpha` is absent or infinite.
pub const DEFAULT_ROBIN_ALPHA: f64 = 5.0;

fn parse_alpha(e: &Entry) -> CliResult<Option<f64>> {
    let v = e.value.to_ascii_lowercase();
    if v == "inf" || v == "infinity" {
        return Ok(None);
    }
    let a: f64 = v
        .parse()
        .map_err(|_| CliError::config(e.line, format!("'alpha' must be a number or inf, found '{}'", e.value)))?;
    if !(a > 0.0) || !a.is_finite() {
        return Err(CliError::config(e.line, format!("'alpha' must be positive, found {a}")));
    }
    Ok(Some(a))
}

fn parse_list(e: &Entry, key: &str) -> CliResult<Vec<f64>> {
    e.value
        .split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| CliError::config(e.line, format!("'{key}': '{}' is not a number", s.trim())))
        })
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        let base = if base.as_os_str().is_empty() { PathBuf::from(".") } else { base };
        Self::parse(&text, &base)
    }

    pub fn parse(text: &str, base_dir: &Path) -> CliResult<Self> {
        let t = parse_table(text)?;
        let dim: usize = t.parse("mesh", "dim", "1 or 2")?.unwrap_or(1);
        if dim != 1 && dim != 2 {
            let line = t.get("mesh", "dim").map(|e| e.line);
            return Err(CliError::config(line, format!("'dim' must be 1 or 2, found {dim}")));
        }
        let cells = t.count("mesh", "cells")?;
        let (nx, ny) = if dim == 1 {
            if t.get("mesh", "ny").is_some() {
                return Err(CliError::config(t.get("mesh", "ny").map(|e| e.line), "'ny' is only valid for dim = 2"));
            }
            let nx = match (cells, t.count("mesh", "nx")?) {
                (Some(c), None) | (None, Some(c)) => c,
                (Some(_), Some(_)) => {
                    return Err(CliError::config(t.get("mesh", "nx").map(|e| e.line), "give either 'cells' or 'nx'"))
                }
                (None, None) => {
                    t.require("mesh", "cells")?;
                    unreachable!()
                }
            };
            (nx, 1)
        } else {
            let nx = t.count("mesh", "nx")?.or(cells);
            let ny = t.count("mesh", "ny")?.or(cells);
            match (nx, ny) {
                (Some(x), Some(y)) => (x, y),
                (None, _) => {
                    t.require("mesh", "nx")?;
                    unreachable!()
                }
                (_, None) => {
                    t.require("mesh", "ny")?;
                    unreachable!()
                }
            }
        };
        let gamma1 = match t.get("mesh", "gamma1") {
            None => vec![Side::Left],
            Some(e) => {
                let sides = e
                    .value
                    .split(',')
                    .map(|s| s.parse::<Side>().map_err(|err| CliError::config(e.line, err.to_string())))
                    .collect::<CliResult<Vec<Side>>>()?;
                if dim == 1 && (sides.len() != 1 || !matches!(sides[0], Side::Left | Side::Right)) {
                    return Err(CliError::config(e.line, "in 1D 'gamma1' must be left or right"));
                }
                sides
            }
        };
        let t_final = t.require("time", "t_final").and_then(|_| t.positive("time", "t_final"))?.unwrap();
        let steps = t.require("time", "steps").and_then(|_| t.count("time", "steps"))?.unwrap();

        let prof = |key: &str, default: f64| -> CliResult<Profile> {
            Ok(t.profile("data", key, base_dir)?.unwrap_or_else(|| Profile::constant(default)))
        };
        let data = DataConfig {
            g: prof("g", 0.0)?,
            b: prof("b", 0.0)?,
            v_b: prof("v_b", 0.0)?,
            z_d: prof("z_d", 0.0)?,
            q: prof("q", 0.0)?,
            q0: t.profile("data", "q0", base_dir)?,
        };
        let m = t.positive("weights", "m")?.unwrap_or(1.0);
        let m1 = t.positive("weights", "m1")?.unwrap_or(1.0);
        let alpha = t.get("robin", "alpha").map(parse_alpha).transpose()?.flatten();
        let alphas = match t.get("robin", "alphas") {
            None => DEFAULT_ALPHAS.to_vec(),
            Some(e) => {
                let list = parse_list(e, "alphas")?;
                if list.is_empty() || list.iter().any(|a| !(*a > 1.0) || !a.is_finite()) {
                    return Err(CliError::config(e.line, "'alphas' must be finite and greater than 1"));
                }
                if list.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(CliError::config(e.line, "'alphas' must be strictly increasing"));
                }
                list
            }
        };
        let tol = t.positive("solver", "tol")?.unwrap_or(1e-10);
        let max_iter = t.count("solver", "max_iter")?.unwrap_or(parctrl_core::control::DEFAULT_MAX_ITER);
        let solve_kind = t.choice(
            "solve",
            "kind",
            &[("parabolic", SolveKind::Parabolic), ("elliptic", SolveKind::Elliptic)],
            SolveKind::Parabolic,
        )?;
        let problem = t.choice(
            "optimize",
            "problem",
            &[
                ("boundary", OptimizeProblem::Boundary),
                ("distributed", OptimizeProblem::Distributed),
                ("simultaneous", OptimizeProblem::Simultaneous),
            ],
            OptimizeProblem::Boundary,
        )?;
        let lambda_kind = t.choice("lambda", "variant", LAMBDA_KINDS, LambdaKind::Parabolic)?;
        let sweep_mode = t.choice(
            "sweep",
            "control",
            &[("fixed", SweepMode::Fixed), ("optimize", SweepMode::Optimize)],
            SweepMode::Fixed,
        )?;
        let decay = if t.has_section("decay") {
            Some(DecayConfig {
                g_inf: t.profile("decay", "g_inf", base_dir)?,
                q_inf: t.profile("decay", "q_inf", base_dir)?,
            })
        } else {
            None
        };
        let compare = if t.has_section("compare") {
            let num = |key: &str| -> CliResult<f64> {
                t.require("compare", key)?;
                Ok(t.parse::<f64>("compare", key, "a number")?.unwrap())
            };
            let or = |key: &str, fallback: &Profile| -> CliResult<Profile> {
                Ok(t.profile("compare", key, base_dir)?.unwrap_or_else(|| fallback.clone()))
            };
            Some(CompareConfig {
                lambda1: num("lambda1")?,
                lambda2: num("lambda2")?,
                g1: or("g1", &data.g)?,
                g2: or("g2", &data.g)?,
                b1: or("b1", &data.b)?,
                b2: or("b2", &data.b)?,
                v_b1: or("v_b1", &data.v_b)?,
                v_b2: or("v_b2", &data.v_b)?,
                variant: t.choice("compare", "variant", LAMBDA_KINDS, LambdaKind::Parabolic)?,
                lumped: t.flag("compare", "lumped", true)?,
            })
        } else {
            None
        };
        let seed = t.parse::<u64>("verify", "seed", "a non-negative integer")?.unwrap_or(1);
        let suites = t
            .get("verify", "suites")
            .map(|e| e.value.split(',').map(|s| s.trim().to_string()).collect());
        let out_dir = match t.get("output", "dir") {
            Some(e) => base_dir.join(&e.value),
            None => base_dir.join("out"),
        };
        let plots = t.flag("output", "plots", true)?;
        Ok(RunConfig {
            text: text.to_string(),
            base_dir: base_dir.to_path_buf(),
            mesh: MeshConfig { dim, nx, ny, gamma1 },
            t_final,
            steps,
            data,
            m,
            m1,
            alpha,
            alphas,
            tol,
            max_iter,
            solve_kind,
            problem,
            lambda_kind,
            sweep_mode,
            decay,
            compare,
            seed,
            suites,
            out_dir,
            plots,
        })
    }

    /// Robin coefficient for `*-robin` scalar variants.
    pub fn robin_alpha(&self) -> f64 {
        self.alpha.unwrap_or(DEFAULT_ROBIN_ALPHA)
    }

    pub fn scalar_variant(&self, kind: LambdaKind) -> ScalarVariant {
        match kind {
            LambdaKind::Parabolic => ScalarVariant::ParabolicDirichlet,
            LambdaKind::ParabolicRobin => ScalarVariant::ParabolicRobin(self.robin_alpha()),
            LambdaKind::Elliptic => ScalarVariant::Elliptic,
            LambdaKind::EllipticRobin => ScalarVariant::EllipticRobin(self.robin_alpha()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "[mesh]\ncells = 8\n[time]\nt_final = 1\nsteps = 4\n";

    fn parse(s: &str) -> CliResult<RunConfig> {
        RunConfig::parse(s, Path::new("."))
    }

    #[test]
    fn minimal_defaults() {
        let c = parse(MINIMAL).unwrap();
        assert_eq!(c.mesh, MeshConfig { dim: 1, nx: 8, ny: 1, gamma1: vec![Side::Left] });
        assert_eq!(c.alpha, None);
        assert_eq!(c.alphas, DEFAULT_ALPHAS.to_vec());
        assert_eq!(c.tol, 1e-10);
        assert!(c.decay.is_none() && c.compare.is_none());
    }

    #[test]
    fn missing_mesh_size_names_key() {
        let err = parse("[mesh]\ndim = 1\n[time]\nt_final = 1\nsteps = 4\n").unwrap_err();
        assert!(err.to_string().contains("'cells'"), "{err}");
        let err = parse("[mesh]\ndim = 2\nnx = 4\n[time]\nt_final = 1\nsteps = 4\n").unwrap_err();
        assert!(err.to_string().contains("'ny'"), "{err}");
        assert_eq!(err.exit_code(), 2);
    }

    #[test]
    fn diagnostics_cite_lines() {
        let err = parse("[mesh]\ncells = 8\nsize = 3\n").unwrap_err();
        assert!(err.to_string().starts_with("config line 3:"), "{err}");
        let err = parse("[mesh]\ncells = 8\n[time]\nt_final = -1\nsteps = 4\n").unwrap_err();
        assert!(err.to_string().starts_with("config line 4:"), "{err}");
        let err = parse("cells = 8\n").unwrap_err();
        assert!(err.to_string().contains("before any"), "{err}");
        let err = parse(&format!("{MINIMAL}[data]\ng = wobble(2)\n")).unwrap_err();
        assert!(err.to_string().contains("line 7") && err.to_string().contains("unknown profile"), "{err}");
        let err = parse(&format!("{MINIMAL}[data]\ng = csv:nope.csv\n")).unwrap_err();
        assert!(err.to_string().contains("does not exist"), "{err}");
        let err = parse(&format!("{MINIMAL}[robin]\nalphas = 10, 5\n")).unwrap_err();
        assert!(err.to_string().contains("increasing"), "{err}");
    }

    #[test]
    fn robin_and_sections() {
        let c = parse(&format!(
            "{MINIMAL}[robin]\nalpha = inf\nalphas = 2, 20\n[compare]\nlambda1 = 1\nlambda2 = 0.5 ; comment\n[decay]\n"
        ))
        .unwrap();
        assert_eq!(c.alpha, None);
        assert_eq!(c.alphas, vec![2.0, 20.0]);
        assert!(c.decay.is_some());
        let cmp = c.compare.unwrap();
        assert_eq!((cmp.lambda1, cmp.lambda2, cmp.lumped), (1.0, 0.5, true));
        assert_eq!(parse(&format!("{MINIMAL}[robin]\nalpha = 5\n")).unwrap().alpha, Some(5.0));
    }
}
