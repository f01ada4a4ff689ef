//! `key = value` config files with `[section]` headers.
//!
//! Blank lines and lines starting with `#` or `;` are ignored. Every key is
//! checked against the table below; only `case` may repeat.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::grid::{GridSpec, Shape};
use crate::jets::Witness;
use crate::operator::check_exponent;
use crate::presets::{standard_cases, BoundaryPreset, Case, RhsPreset};
use crate::solver::{Descent, SolveConfig};

const KEYS: &[(&str, &[&str])] = &[
    ("run", &["seed", "out", "plots"]),
    ("problem", &["p", "dim", "n", "shape", "f", "boundary"]),
    ("solver", &["grad_tol", "max_iters", "armijo_c", "backtrack_factor", "descent"]),
    (
        "lemmas",
        &[
            "prop4_samples", "prop5_samples", "zt_samples", "claims_dim", "claims_m", "claims_c_emp",
            "witness", "scales", "exponent_p_steps", "exponent_gamma_steps",
        ],
    ),
    ("regularity", &["r", "gammas", "jitter", "case", "scaling", "scaling_tol"]),
    ("convergence", &["levels", "min_order"]),
];

const REPEATABLE: &[&str] = &["case"];

#[derive(Debug, Clone)]
struct Entry {
    section: String,
    key: String,
    value: String,
    line: u64,
}

/// Parsed entries in file order.
#[derive(Debug, Clone)]
pub struct Ini {
    path: PathBuf,
    entries: Vec<Entry>,
}

impl Ini {
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Parse { path: path.to_path_buf(), line: line as u64 + 1, msg };
        let mut section: Option<String> = None;
        let mut entries: Vec<Entry> = Vec::new();
        let mut seen_sections: Vec<String> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') || line.starts_with(';') {
                continue;
            }
            if let Some(rest) = line.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(i, format!("unterminated section header `{line}`")))?
                    .trim();
                if !KEYS.iter().any(|(s, _)| *s == name) {
                    return Err(err(i, format!("unknown section `[{name}]`")));
                }
                if seen_sections.iter().any(|s| s == name) {
                    return Err(err(i, format!("section `[{name}]` appears twice")));
                }
                seen_sections.push(name.to_string());
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| err(i, format!("expected `key = value`, got `{line}`")))?;
            let (key, value) = (key.trim(), value.trim());
            let sec = section.as_deref().ok_or_else(|| err(i, "entry before any section header".into()))?;
            let known = KEYS.iter().find(|(s, _)| *s == sec).map(|(_, k)| *k).unwrap_or(&[]);
            if !known.contains(&key) {
                return Err(err(i, format!("unknown key `{key}` in `[{sec}]`")));
            }
            if !REPEATABLE.contains(&key) && entries.iter().any(|e| e.section == sec && e.key == key) {
                return Err(err(i, format!("duplicate key `{key}` in `[{sec}]`")));
            }
            if value.is_empty() {
                return Err(err(i, format!("empty value for `{key}`")));
            }
            entries.push(Entry { section: sec.to_string(), key: key.to_string(), value: value.to_string(), line: i as u64 + 1 });
        }
        Ok(Self { path: path.to_path_buf(), entries })
    }

    fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.section == section && e.key == key)
    }

    fn all<'a>(&'a self, section: &'a str, key: &'a str) -> impl Iterator<Item = &'a Entry> {
        self.entries.iter().filter(move |e| e.section == section && e.key == key)
    }

    fn error(&self, line: u64, msg: impl std::fmt::Display) -> Error {
        Error::Parse { path: self.path.clone(), line, msg: msg.to_string() }
    }

    /// Line of `key`, or of the first entry in `section`, or 1.
    fn line_of(&self, section: &str, key: &str) -> u64 {
        self.get(section, key)
            .or_else(|| self.entries.iter().find(|e| e.section == section))
            .map_or(1, |e| e.line)
    }

    fn value<T>(&self, section: &str, key: &str, default: T, parse: impl Fn(&str) -> Result<T>) -> Result<T> {
        match self.get(section, key) {
            Some(e) => parse(&e.value).map_err(|err| self.error(e.line, format!("`{key}`: {}", strip(err)))),
            None => Ok(default),
        }
    }

    fn num<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        self.value(section, key, default, |v| {
            v.parse::<T>().map_err(|_| Error::Config(format!("cannot parse `{v}`")))
        })
    }

    /// Runs a cross-field check and attributes a failure to `key`'s line.
    fn check(&self, section: &str, key: &str, res: Result<()>) -> Result<()> {
        res.map_err(|e| self.error(self.line_of(section, key), strip(e)))
    }
}

fn strip(e: Error) -> String {
    match e {
        Error::Config(m) => m,
        other => other.to_string(),
    }
}

fn parse_f64(v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(Error::Config(format!("`{v}` is not a finite number"))),
    }
}

fn parse_list<T>(v: &str, item: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    v.split(',').map(|s| item(s.trim())).collect()
}

fn parse_bool(v: &str) -> Result<bool> {
    match v {
        "true" | "yes" | "on" => Ok(true),
        "false" | "no" | "off" => Ok(false),
        _ => Err(Error::Config(format!("expected true or false, got `{v}`"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    VerifyLemmas,
    MeasureRegularity,
    ConvergenceStudy,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::VerifyLemmas => "verify-lemmas",
            Command::MeasureRegularity => "measure-regularity",
            Command::ConvergenceStudy => "convergence-study",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ProblemConfig {
    pub p: f64,
    pub dim: usize,
    pub n: usize,
    pub shape: Shape,
    pub case: Case,
}

#[derive(Debug, Clone)]
pub struct LemmaConfig {
    pub prop4_samples: usize,
    pub prop5_samples: usize,
    pub zt_samples: usize,
    pub claims_dim: usize,
    pub claims_m: f64,
    pub claims_c_emp: f64,
    pub witness: Witness,
    pub scales: Vec<f64>,
    pub exponent_p_steps: usize,
    pub exponent_gamma_steps: usize,
}

#[derive(Debug, Clone)]
pub struct RegularityConfig {
    pub r: f64,
    pub gammas: Vec<f64>,
    pub jitter: f64,
    pub cases: Vec<Case>,
    pub scaling: Vec<f64>,
    pub scaling_tol: f64,
}

#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub levels: Vec<usize>,
    pub min_order: f64,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub plots: bool,
    pub problem: ProblemConfig,
    pub solver: SolveConfig,
    pub lemmas: LemmaConfig,
    pub regularity: RegularityConfig,
    pub convergence: ConvergenceConfig,
    /// Hex SHA-256 of the config file bytes.
    pub hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn parse_case(v: &str) -> Result<Case> {
    let (f, b) = v
        .split_once('|')
        .ok_or_else(|| Error::Config(format!("expected `<f preset> | <boundary preset>`, got `{v}`")))?;
    Ok(Case::new(f.trim().parse()?, b.trim().parse()?))
}

impl RunConfig {
    pub fn load(command: Command, path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let text = std::str::from_utf8(&bytes)
            .map_err(|_| Error::Parse { path: path.to_path_buf(), line: 1, msg: "config is not UTF-8".into() })?;
        let ini = Ini::parse(path, text)?;
        Self::from_ini(command, &ini, sha256_hex(&bytes))
    }

    pub fn from_ini(command: Command, ini: &Ini, hash: String) -> Result<Self> {
        let seed = ini.num("run", "seed", 0u64)?;
        let out_dir = ini.value("run", "out", PathBuf::from("out"), |v| Ok(PathBuf::from(v)))?;
        let plots = ini.value("run", "plots", true, parse_bool)?;

        let p = ini.value("problem", "p", 3.0, |v| {
            let p = parse_f64(v)?;
            check_exponent(p)?;
            Ok(p)
        })?;
        let dim = ini.num("problem", "dim", 2usize)?;
        let n = ini.num("problem", "n", 65usize)?;
        let shape = ini.value("problem", "shape", Shape::Ball, |v| v.parse())?;
        ini.check("problem", "dim", GridSpec::new(dim, 9, shape).map(|_| ()))?;
        if command != Command::ConvergenceStudy {
            ini.check("problem", "n", GridSpec::new(dim, n, shape).map(|_| ()))?;
        }
        let f = ini.value("problem", "f", RhsPreset::Constant { c: 1.0 }, |v| v.parse())?;
        let boundary = ini.value("problem", "boundary", BoundaryPreset::Zero, |v| v.parse())?;
        let problem = ProblemConfig { p, dim, n, shape, case: Case::new(f, boundary) };

        let d = SolveConfig::default();
        let solver = SolveConfig {
            grad_tol: ini.value("solver", "grad_tol", d.grad_tol, parse_f64)?,
            max_iters: ini.num("solver", "max_iters", d.max_iters)?,
            armijo_c: ini.value("solver", "armijo_c", d.armijo_c, parse_f64)?,
            backtrack_factor: ini.value("solver", "backtrack_factor", d.backtrack_factor, parse_f64)?,
            descent: ini.value("solver", "descent", d.descent, |v| match v {
                "cg" => Ok(Descent::ConjugateGradient),
                "steepest" => Ok(Descent::Steepest),
                _ => Err(Error::Config(format!("descent must be cg or steepest, got `{v}`"))),
            })?,
            ..d
        };
        let first_solver_key = ["grad_tol", "max_iters", "armijo_c", "backtrack_factor"]
            .into_iter()
            .find(|k| ini.get("solver", k).is_some())
            .unwrap_or("grad_tol");
        ini.check("solver", first_solver_key, solver.validate())?;

        let positive = |v: &str| -> Result<usize> {
            match v.parse::<usize>() {
                Ok(k) if k > 0 => Ok(k),
                _ => Err(Error::Config(format!("expected a positive integer, got `{v}`"))),
            }
        };
        let lemmas = LemmaConfig {
            prop4_samples: ini.value("lemmas", "prop4_samples", 1000, positive)?,
            prop5_samples: ini.value("lemmas", "prop5_samples", 500, positive)?,
            zt_samples: ini.value("lemmas", "zt_samples", 10_000, positive)?,
            claims_dim: ini.value("lemmas", "claims_dim", 2, |v| match v.parse::<usize>() {
                Ok(k @ 1..=3) => Ok(k),
                _ => Err(Error::Config(format!("claims_dim must be 1, 2 or 3, got `{v}`"))),
            })?,
            claims_m: ini.value("lemmas", "claims_m", 100.0, |v| {
                let m = parse_f64(v)?;
                if m > 1.0 { Ok(m) } else { Err(Error::Config(format!("claims_m must exceed 1, got {m}"))) }
            })?,
            claims_c_emp: ini.value("lemmas", "claims_c_emp", 10.0, |v| {
                let c = parse_f64(v)?;
                if c > 0.0 { Ok(c) } else { Err(Error::Config(format!("claims_c_emp must be positive, got {c}"))) }
            })?,
            witness: ini.value("lemmas", "witness", Witness::Sampled, |v| match v {
                "sampled" => Ok(Witness::Sampled),
                "unperturbed" => Ok(Witness::Unperturbed),
                "saturating" => Ok(Witness::Saturating),
                _ => Err(Error::Config(format!(
                    "witness must be sampled, unperturbed or saturating, got `{v}`"
                ))),
            })?,
            scales: ini.value("lemmas", "scales", crate::jets::claims::SWEEP_SCALES.to_vec(), |v| {
                let s = parse_list(v, parse_f64)?;
                if s.iter().all(|&x| x > 0.0 && x < 1.0) {
                    Ok(s)
                } else {
                    Err(Error::Config("scales must lie in (0, 1)".into()))
                }
            })?,
            exponent_p_steps: ini.value("lemmas", "exponent_p_steps", 20, positive)?,
            exponent_gamma_steps: ini.value("lemmas", "exponent_gamma_steps", 20, positive)?,
        };

        let unit = |name: &'static str| {
            move |v: &str| -> Result<f64> {
                let x = parse_f64(v)?;
                if x > 0.0 && x < 1.0 { Ok(x) } else { Err(Error::Config(format!("{name} must lie in (0, 1), got {x}"))) }
            }
        };
        let mut cases = Vec::new();
        for e in ini.all("regularity", "case") {
            cases.push(parse_case(&e.value).map_err(|err| ini.error(e.line, format!("`case`: {}", strip(err))))?);
        }
        if cases.is_empty() {
            cases = standard_cases();
        }
        let regularity = RegularityConfig {
            r: ini.value("regularity", "r", 0.5, unit("r"))?,
            gammas: ini.value("regularity", "gammas", vec![0.25, 0.5, 0.75], |v| parse_list(v, unit("gamma")))?,
            jitter: ini.value("regularity", "jitter", 0.01, |v| {
                let j = parse_f64(v)?;
                if (0.0..0.5).contains(&j) { Ok(j) } else { Err(Error::Config(format!("jitter must lie in [0, 0.5), got {j}"))) }
            })?,
            cases,
            scaling: ini.value("regularity", "scaling", vec![0.1, 10.0], |v| {
                let s = parse_list(v, parse_f64)?;
                if s.iter().all(|&x| x > 0.0) { Ok(s) } else { Err(Error::Config("scaling factors must be positive".into())) }
            })?,
            scaling_tol: ini.value("regularity", "scaling_tol", 1e-6, |v| {
                let t = parse_f64(v)?;
                if t > 0.0 { Ok(t) } else { Err(Error::Config(format!("scaling_tol must be positive, got {t}"))) }
            })?,
        };
        if command == Command::MeasureRegularity {
            let h = 2.0 / (n as f64 - 1.0);
            let r = regularity.r;
            let res = if r < 1.0 - 2.0 * h {
                Ok(())
            } else {
                Err(Error::Config(format!("r = {r} must be below 1 - 2h = {}", 1.0 - 2.0 * h)))
            };
            ini.check("regularity", "r", res)?;
        }

        let convergence = ConvergenceConfig {
            levels: ini.value("convergence", "levels", vec![33, 65, 129], |v| {
                let levels = parse_list(v, |s| {
                    s.parse::<usize>().map_err(|_| Error::Config(format!("`{s}` is not a grid size")))
                })?;
                for &l in &levels {
                    GridSpec::new(dim, l, shape)?;
                }
                if levels.len() < 2 || levels.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(Error::Config("levels must be at least two increasing grid sizes".into()));
                }
                Ok(levels)
            })?,
            min_order: ini.value("convergence", "min_order", 0.8, parse_f64)?,
        };
        if command == Command::ConvergenceStudy && problem.case.exact(p, dim).is_none() {
            let res = Err(Error::Config(format!(
                "no closed-form solution for f = `{}` with boundary `{}` in dimension {dim}",
                problem.case.f, problem.case.boundary
            )));
            ini.check("problem", "f", res)?;
        }

        Ok(Self { command, seed, out_dir, plots, problem, solver, lemmas, regularity, convergence, hash })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn load(text: &str, command: Command) -> Result<RunConfig> {
        let ini = Ini::parse(Path::new("cfg.ini"), text)?;
        RunConfig::from_ini(command, &ini, sha256_hex(text.as_bytes()))
    }

    fn line_of(err: Error) -> u64 {
        match err {
            Error::Parse { line, .. } => line,
            other => panic!("expected a parse error, got {other}"),
        }
    }

    #[test]
    fn defaults_and_values() {
        let text = "# lab\n[run]\nseed = 7\n\n[problem]\np = 4.5\ndim = 1\nn = 33\nf = gaussian amp=2\n";
        let cfg = load(text, Command::Solve).unwrap();
        assert_eq!(cfg.seed, 7);
        assert_eq!((cfg.problem.p, cfg.problem.dim, cfg.problem.n), (4.5, 1, 33));
        assert_eq!(cfg.problem.case.boundary, BoundaryPreset::Zero);
        assert_eq!(cfg.lemmas.prop4_samples, 1000);
        assert_eq!(cfg.regularity.cases.len(), 10);
        assert_eq!(cfg.hash.len(), 64);
    }

    #[test]
    fn diagnostics_carry_lines() {
        let bad = [
            ("[problem]\np = 1.5\n", 2),
            ("[problem]\ndim = 2\nn = 64\n", 3),
            ("\n[problem]\nshape = torus\n", 3),
            ("[problem]\nf = wave\n", 2),
            ("[nope]\n", 1),
            ("p = 3\n", 1),
            ("[problem]\np = 3\np = 4\n", 3),
            ("[problem]\nq = 3\n", 2),
            ("[solver]\n\narmijo_c = 2\n", 3),
            ("[lemmas]\nwitness = best\n", 2),
            ("[problem]\nn = 33\n[regularity]\nr = 0.95\n", 4),
            ("[regularity]\ncase = constant c=1\n", 2),
            ("[convergence]\nlevels = 65,33\n", 2),
            ("[problem\n", 1),
        ];
        for (text, line) in bad {
            let err = load(text, Command::MeasureRegularity).unwrap_err();
            assert_eq!(line_of(err), line, "{text:?}");
        }
        let err = load("[problem]\ndim = 2\nf = gaussian\n", Command::ConvergenceStudy).unwrap_err();
        assert_eq!(line_of(err), 3);
        let msg = load("[problem]\np = 1.5\n", Command::Solve).unwrap_err().to_string();
        assert!(msg.starts_with("cfg.ini:2:"), "{msg}");
    }

    #[test]
    fn repeated_cases() {
        let text = "[regularity]\ncase = constant c=1 | zero\ncase = checkerboard freq=3 | affine slope=1,0\n";
        let cfg = load(text, Command::MeasureRegularity).unwrap();
        assert_eq!(cfg.regularity.cases.len(), 2);
        assert_eq!(cfg.regularity.cases[1].boundary, BoundaryPreset::Affine { offset: 0.0, slope: vec![1.0, 0.0] });
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}
