//! Batch verification: named suites over the numerical kernels, with
//! per-case records and deterministic JSON / CSV reports.

mod suites;

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Result, TsmError};
use crate::group::{GroupMode, GroupSpec, StepTwoGroup};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SuiteName {
    Structure,
    Reduce,
    Harmonics,
    Ode,
    Th42,
    Lemma32,
    Hecke,
    Boundary,
}

impl SuiteName {
    pub const ALL: [SuiteName; 8] = [
        SuiteName::Structure,
        SuiteName::Reduce,
        SuiteName::Harmonics,
        SuiteName::Ode,
        SuiteName::Th42,
        SuiteName::Lemma32,
        SuiteName::Hecke,
        SuiteName::Boundary,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SuiteName::Structure => "structure",
            SuiteName::Reduce => "reduce",
            SuiteName::Harmonics => "harmonics",
            SuiteName::Ode => "ode",
            SuiteName::Th42 => "th42",
            SuiteName::Lemma32 => "lemma32",
            SuiteName::Hecke => "hecke",
            SuiteName::Boundary => "boundary",
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|s| s.as_str() == name)
            .ok_or_else(|| TsmError::Invalid(format!("unknown suite '{name}'")))
    }

    pub fn default_tolerance(&self) -> f64 {
        match self {
            SuiteName::Structure | SuiteName::Harmonics | SuiteName::Ode => 1e-12,
            SuiteName::Reduce | SuiteName::Boundary => 1e-10,
            SuiteName::Lemma32 => 1e-8,
            SuiteName::Th42 => 1e-7,
            SuiteName::Hecke => 1e-6,
        }
    }

    pub fn default_quad(&self) -> &'static str {
        match self {
            SuiteName::Hecke => "grid:40",
            _ => "angles:64",
        }
    }

    fn default_group(&self) -> &'static str {
        match self {
            SuiteName::Lemma32 | SuiteName::Th42 => "quaternionic",
            _ => "heisenberg",
        }
    }
}

/// A group given by builtin name (`heisenberg`, `heisenberg:N`,
/// `quaternionic`), by path to a JSON spec, or inline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GroupRef {
    Name(String),
    Inline(GroupSpec),
}

impl GroupRef {
    pub fn resolve(&self, base: Option<&Path>) -> Result<GroupSpec> {
        match self {
            GroupRef::Inline(spec) => Ok(spec.clone()),
            GroupRef::Name(name) => {
                if let Some(spec) = builtin_group(name)? {
                    return Ok(spec);
                }
                let mut path = PathBuf::from(name);
                if path.is_relative() {
                    if let Some(b) = base {
                        path = b.join(path);
                    }
                }
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| TsmError::Io(format!("{}: {e}", path.display())))?;
                GroupSpec::from_json(&text)
            }
        }
    }
}

fn builtin_group(name: &str) -> Result<Option<GroupSpec>> {
    if name == "quaternionic" {
        return Ok(Some(GroupSpec::from_group(&StepTwoGroup::quaternionic(), GroupMode::Htype)));
    }
    let n = match name.strip_prefix("heisenberg") {
        Some("") => 1,
        Some(rest) => match rest.strip_prefix(':').map(str::parse::<usize>) {
            Some(Ok(n)) if n > 0 => n,
            Some(_) => return Err(TsmError::Invalid(format!("bad builtin group '{name}'"))),
            None => return Ok(None),
        },
        None => return Ok(None),
    };
    Ok(Some(GroupSpec::from_group(&StepTwoGroup::heisenberg(n), GroupMode::Heisenberg)))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Centers `z` per kernel (th42) or per Hecke case.
    #[serde(default = "default_z_samples")]
    pub z_samples: usize,
    /// Radii per center (th42).
    #[serde(default = "default_s_samples")]
    pub s_samples: usize,
    /// Inner radius `r`; th42 radii satisfy `s > |z| + r`.
    #[serde(default = "default_r")]
    pub r: f64,
    /// Points of the boundary-ODE grid on `[r_min, r_max]`.
    #[serde(default = "default_r_points")]
    pub r_points: usize,
    #[serde(default = "default_r_min")]
    pub r_min: f64,
    #[serde(default = "default_r_max")]
    pub r_max: f64,
}

fn default_z_samples() -> usize {
    4
}
fn default_s_samples() -> usize {
    5
}
fn default_r() -> f64 {
    0.5
}
fn default_r_points() -> usize {
    1000
}
fn default_r_min() -> f64 {
    0.05
}
fn default_r_max() -> f64 {
    2.0
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            z_samples: default_z_samples(),
            s_samples: default_s_samples(),
            r: default_r(),
            r_points: default_r_points(),
            r_min: default_r_min(),
            r_max: default_r_max(),
        }
    }
}

/// Suite-specific ranges. Unset fields take per-suite defaults.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Vec<u32>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<Vec<usize>>,
    /// Highest `p + q` for the harmonics suite.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub degree: Option<u32>,
    /// Complex `nu` for the ode suite, as `[re, im]`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nu: Option<[f64; 2]>,
    /// Gauss-Legendre points per interval of the boundary grid.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub panel_order: Option<usize>,
}

/// Deliberate damage applied to the primary cases; used to confirm that a
/// suite can fail.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Perturbation {
    /// Added to the exponent index `i` of the th42 kernels.
    #[serde(default)]
    pub exponent_offset: i32,
    /// Multiplies the Gaussian rate of the th42 kernels and the boundary
    /// solutions.
    #[serde(default = "one")]
    pub gaussian_sign: f64,
}

fn one() -> f64 {
    1.0
}

impl Default for Perturbation {
    fn default() -> Self {
        Self {
            exponent_offset: 0,
            gaussian_sign: 1.0,
        }
    }
}

impl Perturbation {
    fn is_identity(&self) -> bool {
        self.exponent_offset == 0 && self.gaussian_sign == 1.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SuiteConfig {
    pub suite: SuiteName,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupRef>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub lambdas: Vec<Vec<f64>>,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quad: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub seed: u64,
    /// Number of random cases for the sampled suites.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cases: Option<usize>,
    #[serde(default)]
    pub params: SuiteParams,
    #[serde(default, skip_serializing_if = "Perturbation::is_identity")]
    pub perturb: Perturbation,
    #[serde(default = "yes")]
    pub negative_controls: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
}

fn yes() -> bool {
    true
}

impl SuiteConfig {
    pub fn new(suite: SuiteName) -> Self {
        Self {
            suite,
            group: None,
            lambdas: Vec::new(),
            grid: GridConfig::default(),
            quad: None,
            tol: None,
            seed: 0,
            cases: None,
            params: SuiteParams::default(),
            perturb: Perturbation::default(),
            negative_controls: true,
            out: None,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.check()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| TsmError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn tolerance(&self) -> f64 {
        match (self.tol, self.suite) {
            (Some(t), _) => t,
            (None, SuiteName::Hecke) if self.quad_spec().starts_with("mc") => 1e-2,
            (None, suite) => suite.default_tolerance(),
        }
    }

    pub fn quad_spec(&self) -> &str {
        self.quad.as_deref().unwrap_or_else(|| self.suite.default_quad())
    }

    pub fn check(&self) -> Result<()> {
        if !(self.tolerance() > 0.0) {
            return Err(TsmError::Invalid("tolerance must be positive".into()));
        }
        let g = &self.grid;
        if g.z_samples == 0 || g.s_samples == 0 {
            return Err(TsmError::Invalid("grids must be non-empty".into()));
        }
        if g.r_points < 2 || !(g.r_min > 0.0 && g.r_max > g.r_min) {
            return Err(TsmError::Invalid("boundary grid needs 0 < r_min < r_max and 2+ points".into()));
        }
        if !(g.r >= 0.0) {
            return Err(TsmError::Invalid("inner radius r must be non-negative".into()));
        }
        if self.cases == Some(0) {
            return Err(TsmError::Invalid("cases must be positive".into()));
        }
        if self.lambdas.iter().any(|l| l.iter().all(|x| *x == 0.0)) {
            return Err(TsmError::ZeroLambda);
        }
        Ok(())
    }

    /// The configured group, or the suite default.
    pub fn group_spec(&self, base: Option<&Path>) -> Result<GroupSpec> {
        match &self.group {
            Some(g) => g.resolve(base),
            None => GroupRef::Name(self.suite.default_group().into()).resolve(None),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Expectation {
    /// A primary check: the residual must be within tolerance.
    Pass,
    /// A negative control: the residual must exceed its threshold.
    Fail,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CaseRecord {
    pub key: String,
    pub expect: Expectation,
    pub inputs: serde_json::Value,
    pub values: serde_json::Value,
    pub residual: Option<f64>,
    /// Tolerance for primary cases; detection threshold for controls.
    pub tolerance: f64,
    /// `residual <= tolerance`.
    pub passed: bool,
    pub as_expected: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl CaseRecord {
    pub fn new(
        key: String,
        expect: Expectation,
        inputs: serde_json::Value,
        outcome: Result<(f64, serde_json::Value)>,
        tolerance: f64,
    ) -> Self {
        match outcome {
            Ok((residual, values)) => {
                let passed = residual <= tolerance;
                Self {
                    key,
                    expect,
                    inputs,
                    values,
                    residual: Some(residual),
                    tolerance,
                    passed,
                    as_expected: passed == (expect == Expectation::Pass),
                    error: None,
                }
            }
            Err(e) => Self {
                key,
                expect,
                inputs,
                values: serde_json::Value::Null,
                residual: None,
                tolerance,
                passed: false,
                as_expected: false,
                error: Some(e.to_string()),
            },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub total: usize,
    pub passed: usize,
    pub failed: usize,
    pub errors: usize,
    pub controls: usize,
    pub unexpected: usize,
    /// Largest residual among primary cases.
    pub worst_residual: Option<f64>,
    pub worst_case: Option<String>,
    pub ok: bool,
}

impl Summary {
    fn of(records: &[CaseRecord]) -> Self {
        let mut worst: Option<(f64, &str)> = None;
        for r in records.iter().filter(|r| r.expect == Expectation::Pass) {
            if let Some(res) = r.residual {
                if worst.map_or(true, |(w, _)| res > w || res.is_nan()) {
                    worst = Some((res, &r.key));
                }
            }
        }
        let unexpected = records.iter().filter(|r| !r.as_expected).count();
        Self {
            total: records.len(),
            passed: records.iter().filter(|r| r.passed).count(),
            failed: records.iter().filter(|r| !r.passed && r.error.is_none()).count(),
            errors: records.iter().filter(|r| r.error.is_some()).count(),
            controls: records.iter().filter(|r| r.expect == Expectation::Fail).count(),
            unexpected,
            worst_residual: worst.map(|w| w.0),
            worst_case: worst.map(|w| w.1.to_string()),
            ok: unexpected == 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Provenance {
    /// SHA-256 of `n`, `m` and the row-major structure matrices.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group_hash: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub group: Option<GroupSpec>,
    pub seed: u64,
    pub quad: String,
    pub tolerance: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SuiteReport {
    pub suite: SuiteName,
    pub provenance: Provenance,
    pub config: SuiteConfig,
    pub records: Vec<CaseRecord>,
    pub summary: Summary,
    pub wall_clock_seconds: f64,
}

impl SuiteReport {
    pub fn ok(&self) -> bool {
        self.summary.ok
    }

    pub fn record(&self, key: &str) -> Option<&CaseRecord> {
        self.records.iter().find(|r| r.key == key)
    }

    /// Pretty JSON; `include_timing = false` drops the wall clock so that
    /// equal configs give byte-identical output.
    pub fn to_json(&self, include_timing: bool) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if !include_timing {
            if let Some(obj) = value.as_object_mut() {
                obj.remove("wall_clock_seconds");
            }
        }
        Ok(serde_json::to_string_pretty(&value)?)
    }

    /// One row per case.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| TsmError::Io(e.to_string());
        w.write_record(["key", "expect", "residual", "tolerance", "passed", "as_expected", "error"])
            .map_err(io)?;
        for r in &self.records {
            w.write_record([
                r.key.as_str(),
                match r.expect {
                    Expectation::Pass => "pass",
                    Expectation::Fail => "fail",
                },
                &r.residual.map(|x| format!("{x:e}")).unwrap_or_default(),
                &format!("{:e}", r.tolerance),
                &r.passed.to_string(),
                &r.as_expected.to_string(),
                r.error.as_deref().unwrap_or(""),
            ])
            .map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| TsmError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| TsmError::Io(e.to_string()))
    }
}

pub fn group_hash(group: &StepTwoGroup) -> String {
    let mut h = Sha256::new();
    h.update((group.n() as u64).to_le_bytes());
    h.update((group.m() as u64).to_le_bytes());
    for row in group.to_row_major() {
        for v in row {
            h.update(v.to_le_bytes());
        }
    }
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

/// One unit of work: a key, an expectation, its inputs and a computation
/// returning `(residual, values)`.
pub(crate) struct Case {
    pub key: String,
    pub expect: Expectation,
    pub inputs: serde_json::Value,
    pub tolerance: f64,
    pub run: Box<dyn Fn() -> Result<(f64, serde_json::Value)> + Send + Sync>,
}

impl Case {
    fn execute(&self) -> CaseRecord {
        CaseRecord::new(
            self.key.clone(),
            self.expect,
            self.inputs.clone(),
            (self.run)(),
            self.tolerance,
        )
    }
}

/// Runs a suite with group paths resolved against the working directory.
pub fn run_suite(config: &SuiteConfig) -> Result<SuiteReport> {
    run_suite_in(config, None)
}

/// Runs a suite; relative group paths are resolved against `base`.
pub fn run_suite_in(config: &SuiteConfig, base: Option<&Path>) -> Result<SuiteReport> {
    config.check()?;
    let start = Instant::now();
    let uses_group = !matches!(config.suite, SuiteName::Harmonics | SuiteName::Ode | SuiteName::Hecke)
        || config.group.is_some();
    let (spec, group) = if uses_group {
        let spec = config.group_spec(base)?;
        let group = spec.build()?;
        (Some(spec), Some(group))
    } else {
        (None, None)
    };
    let cases = suites::build(config, spec.as_ref(), group.as_ref())?;
    let mut records: Vec<CaseRecord> = cases.par_iter().map(Case::execute).collect();
    records.sort_by(|a, b| a.key.cmp(&b.key));
    let summary = Summary::of(&records);
    Ok(SuiteReport {
        suite: config.suite,
        provenance: Provenance {
            group_hash: group.as_ref().map(group_hash),
            group: spec,
            seed: config.seed,
            quad: config.quad_spec().to_string(),
            tolerance: config.tolerance(),
        },
        config: config.clone(),
        records,
        summary,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(suite: SuiteName) -> SuiteConfig {
        let mut cfg = SuiteConfig::new(suite);
        cfg.cases = Some(5);
        cfg
    }

    #[test]
    fn reports_are_deterministic_and_sorted() {
        let cfg = small(SuiteName::Structure);
        let a = run_suite(&cfg).unwrap();
        let b = run_suite(&cfg).unwrap();
        assert_eq!(a.to_json(false).unwrap(), b.to_json(false).unwrap());
        assert!(a.records.windows(2).all(|w| w[0].key < w[1].key));
        assert!(!a.to_json(false).unwrap().contains("wall_clock_seconds"));
        assert!(a.to_json(true).unwrap().contains("wall_clock_seconds"));
    }

    #[test]
    fn seed_changes_cases() {
        let mut cfg = small(SuiteName::Reduce);
        let a = run_suite(&cfg).unwrap();
        cfg.seed += 1;
        let b = run_suite(&cfg).unwrap();
        assert_ne!(a.record("frame/0000").unwrap().inputs, b.record("frame/0000").unwrap().inputs);
    }

    #[test]
    fn group_hash_tracks_structure() {
        let h1 = group_hash(&StepTwoGroup::heisenberg(1));
        assert_eq!(h1, group_hash(&StepTwoGroup::heisenberg(1)));
        assert_ne!(h1, group_hash(&StepTwoGroup::heisenberg(2)));
        assert_ne!(h1, group_hash(&StepTwoGroup::quaternionic()));
        assert_eq!(h1.len(), 64);
    }

    #[test]
    fn config_parsing() {
        let cfg = SuiteConfig::from_json(r#"{"suite": "th42", "tol": 1e-6, "params": {"p": [1]}}"#).unwrap();
        assert_eq!(cfg.suite, SuiteName::Th42);
        assert_eq!(cfg.tolerance(), 1e-6);
        assert_eq!(cfg.quad_spec(), "angles:64");
        assert!(cfg.negative_controls);

        assert!(SuiteConfig::from_json(r#"{"suite": "th42", "bogus": 1}"#).is_err());
        assert!(SuiteConfig::from_json(r#"{"suite": "nope"}"#).is_err());
        assert!(SuiteConfig::from_json(r#"{"suite": "reduce", "tol": -1}"#).is_err());
        assert!(SuiteConfig::from_json(r#"{"suite": "reduce", "cases": 0}"#).is_err());
        assert!(SuiteConfig::from_json(r#"{"suite": "reduce", "lambdas": [[0, 0, 0]]}"#).is_err());
        assert!(SuiteName::parse("hecke").is_ok());
        assert!(SuiteName::parse("Hecke2").is_err());
    }

    #[test]
    fn mc_hecke_uses_loose_tolerance() {
        let mut cfg = SuiteConfig::new(SuiteName::Hecke);
        assert_eq!(cfg.tolerance(), 1e-6);
        cfg.quad = Some("mc:1000".into());
        assert_eq!(cfg.tolerance(), 1e-2);
    }

    #[test]
    fn case_errors_are_unexpected() {
        let mut cfg = small(SuiteName::Th42);
        cfg.group = Some(GroupRef::Name("heisenberg".into()));
        cfg.params.p = Some(vec![1]);
        cfg.perturb.exponent_offset = -5;
        cfg.negative_controls = false;
        let report = run_suite(&cfg).unwrap();
        assert!(report.records.iter().all(|r| r.error.is_some() && !r.as_expected));
        assert_eq!(report.summary.errors, report.summary.total);
        assert!(!report.ok());
    }

    #[test]
    fn csv_has_one_row_per_case() {
        let report = run_suite(&small(SuiteName::Structure)).unwrap();
        let text = report.to_csv().unwrap();
        assert_eq!(text.lines().count(), report.records.len() + 1);
        assert!(text.starts_with("key,expect,residual,tolerance,passed,as_expected,error"));
    }

    #[test]
    fn unknown_group_is_rejected() {
        let mut cfg = small(SuiteName::Reduce);
        cfg.group = Some(GroupRef::Name("no_such_group.json".into()));
        assert!(run_suite(&cfg).is_err());
    }
}
