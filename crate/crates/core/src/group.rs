//! Step-two nilpotent groups `R^{2n} x R^m` given by skew structure matrices.
//!
//! A group is described by `m` real skew-symmetric `2n x 2n` matrices
//! `U^(1), ..., U^(m)`; the product is
//! `(x, t)(xi, tau) = (x + xi, t_j + tau_j + <x, U^(j) xi> / 2)`.
//! Métivier groups additionally require `sum_j lambda_j U^(j)` to be
//! invertible for every nonzero `lambda`; H-type groups require each
//! `U^(j)` to be orthogonal and distinct matrices to anticommute.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, TsmError};

/// Residual threshold for exact algebraic identities.
pub const STRUCTURAL_TOL: f64 = 1e-12;
/// Residual threshold for anything that passes through an eigensolver.
pub const SPECTRAL_TOL: f64 = 1e-10;
/// Default number of sampled directions for the Métivier heuristic.
pub const DEFAULT_METIVIER_SAMPLES: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GroupMode {
    Metivier,
    Htype,
    Heisenberg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepTwoGroup {
    n: usize,
    m: usize,
    structure: Vec<DMatrix<f64>>,
}

impl StepTwoGroup {
    /// Builds a group after checking shapes only; use [`validate_group`] for
    /// the structural conditions.
    pub fn new(n: usize, m: usize, structure: Vec<DMatrix<f64>>) -> Result<Self> {
        if n == 0 || m == 0 {
            return Err(TsmError::Dimension("n and m must be positive".into()));
        }
        if structure.len() != m {
            return Err(TsmError::Dimension(format!(
                "expected {m} structure matrices, got {}",
                structure.len()
            )));
        }
        for (index, u) in structure.iter().enumerate() {
            if u.nrows() != 2 * n || u.ncols() != 2 * n {
                return Err(TsmError::MatrixShape {
                    index,
                    rows: u.nrows(),
                    cols: u.ncols(),
                    expected: 2 * n,
                });
            }
        }
        Ok(Self { n, m, structure })
    }

    /// Each entry of `data` is one matrix stored row-major.
    pub fn from_row_major(n: usize, m: usize, data: &[Vec<f64>]) -> Result<Self> {
        let d = 2 * n;
        let mut mats = Vec::with_capacity(data.len());
        for (index, flat) in data.iter().enumerate() {
            if flat.len() != d * d {
                let rows = (flat.len() as f64).sqrt() as usize;
                return Err(TsmError::MatrixShape {
                    index,
                    rows,
                    cols: if rows == 0 { 0 } else { flat.len() / rows },
                    expected: d,
                });
            }
            mats.push(DMatrix::from_row_slice(d, d, flat));
        }
        Self::new(n, m, mats)
    }

    /// The Heisenberg group `H^n`: a single matrix `[[0, -I], [I, 0]]`.
    pub fn heisenberg(n: usize) -> Self {
        let mut u = DMatrix::zeros(2 * n, 2 * n);
        for j in 0..n {
            u[(j, n + j)] = -1.0;
            u[(n + j, j)] = 1.0;
        }
        Self {
            n,
            m: 1,
            structure: vec![u],
        }
    }

    /// H-type group on `R^4 x R^3`: left multiplication by the quaternion
    /// units `i`, `j`, `k` on `H = R^4` with coordinates `(a, b, c, d)`.
    pub fn quaternionic() -> Self {
        #[rustfmt::skip]
        let li = [
            0.0, -1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, 1.0, 0.0,
        ];
        #[rustfmt::skip]
        let lj = [
            0.0, 0.0, -1.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
            1.0, 0.0, 0.0, 0.0,
            0.0, -1.0, 0.0, 0.0,
        ];
        #[rustfmt::skip]
        let lk = [
            0.0, 0.0, 0.0, -1.0,
            0.0, 0.0, -1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            1.0, 0.0, 0.0, 0.0,
        ];
        let structure = [li, lj, lk]
            .iter()
            .map(|m| DMatrix::from_row_slice(4, 4, m))
            .collect();
        Self {
            n: 2,
            m: 3,
            structure,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn structure(&self) -> &[DMatrix<f64>] {
        &self.structure
    }

    pub fn identity(&self) -> GroupPoint {
        GroupPoint {
            x: vec![0.0; 2 * self.n],
            t: vec![0.0; self.m],
        }
    }

    fn check_lambda(&self, lambda: &[f64]) -> Result<()> {
        if lambda.len() != self.m {
            return Err(TsmError::Dimension(format!(
                "lambda has length {}, group has m = {}",
                lambda.len(),
                self.m
            )));
        }
        if lambda.iter().all(|&l| l == 0.0) {
            return Err(TsmError::ZeroLambda);
        }
        Ok(())
    }

    /// `V_lambda = sum_j lambda_j U^(j)`.
    pub fn combination(&self, lambda: &[f64]) -> Result<DMatrix<f64>> {
        self.check_lambda(lambda)?;
        let d = 2 * self.n;
        let mut v = DMatrix::zeros(d, d);
        for (u, &l) in self.structure.iter().zip(lambda) {
            v += u * l;
        }
        Ok(v)
    }

    pub fn to_row_major(&self) -> Vec<Vec<f64>> {
        self.structure
            .iter()
            .map(|u| u.transpose().as_slice().to_vec())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupPoint {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
}

impl GroupPoint {
    pub fn inverse(&self) -> GroupPoint {
        GroupPoint {
            x: self.x.iter().map(|v| -v).collect(),
            t: self.t.iter().map(|v| -v).collect(),
        }
    }
}

pub fn group_law(group: &StepTwoGroup, p: &GroupPoint, q: &GroupPoint) -> Result<GroupPoint> {
    let d = 2 * group.n;
    for pt in [p, q] {
        if pt.x.len() != d || pt.t.len() != group.m {
            return Err(TsmError::Dimension(format!(
                "point has ({}, {}) coordinates, group expects ({d}, {})",
                pt.x.len(),
                pt.t.len(),
                group.m
            )));
        }
    }
    let x: Vec<f64> = p.x.iter().zip(&q.x).map(|(a, b)| a + b).collect();
    let t = group
        .structure
        .iter()
        .enumerate()
        .map(|(j, u)| {
            let mut form = 0.0;
            for r in 0..d {
                let mut row = 0.0;
                for c in 0..d {
                    row += u[(r, c)] * q.x[c];
                }
                form += p.x[r] * row;
            }
            p.t[j] + q.t[j] + 0.5 * form
        })
        .collect();
    Ok(GroupPoint { x, t })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetivierStatus {
    Certified,
    HeuristicPass,
    HeuristicFail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetivierReport {
    pub status: MetivierStatus,
    pub samples: usize,
    pub min_abs_det: f64,
    pub argmin_lambda: Vec<f64>,
    pub tolerance: f64,
}

impl MetivierReport {
    pub fn passed(&self) -> bool {
        self.status != MetivierStatus::HeuristicFail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mode: GroupMode,
    pub n: usize,
    pub m: usize,
    pub conditions: Vec<Condition>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub metivier: Option<MetivierReport>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.conditions.iter().all(|c| c.passed)
            && self.metivier.as_ref().map_or(true, MetivierReport::passed)
    }

    pub fn condition(&self, name: &str) -> Option<&Condition> {
        self.conditions.iter().find(|c| c.name == name)
    }
}

fn max_abs(m: &DMatrix<f64>) -> f64 {
    m.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

fn residual_condition(name: &str, residual: f64, tolerance: f64) -> Condition {
    Condition {
        name: name.to_string(),
        passed: residual <= tolerance,
        residual,
        tolerance,
        detail: None,
    }
}

pub fn skew_residual(group: &StepTwoGroup) -> f64 {
    group
        .structure
        .iter()
        .map(|u| max_abs(&(u + u.transpose())))
        .fold(0.0, f64::max)
}

pub fn orthogonality_residual(group: &StepTwoGroup) -> f64 {
    let id = DMatrix::<f64>::identity(2 * group.n, 2 * group.n);
    group
        .structure
        .iter()
        .map(|u| max_abs(&(u.transpose() * u - &id)))
        .fold(0.0, f64::max)
}

pub fn anticommutation_residual(group: &StepTwoGroup) -> f64 {
    let mut worst = 0.0_f64;
    for (j, uj) in group.structure.iter().enumerate() {
        for ul in group.structure.iter().skip(j + 1) {
            worst = worst.max(max_abs(&(uj * ul + ul * uj)));
        }
    }
    worst
}

/// Number of linearly independent structure matrices.
pub fn structure_rank(group: &StepTwoGroup) -> usize {
    let d2 = 4 * group.n * group.n;
    let mut stacked = DMatrix::<f64>::zeros(group.m, d2);
    for (j, u) in group.structure.iter().enumerate() {
        for (c, v) in u.iter().enumerate() {
            stacked[(j, c)] = *v;
        }
    }
    let sv = stacked.singular_values();
    let scale = sv.iter().fold(0.0_f64, |a, &b| a.max(b)).max(1.0);
    sv.iter().filter(|&&s| s > SPECTRAL_TOL * scale).count()
}

fn is_htype(group: &StepTwoGroup) -> bool {
    skew_residual(group) <= STRUCTURAL_TOL
        && orthogonality_residual(group) <= STRUCTURAL_TOL
        && anticommutation_residual(group) <= STRUCTURAL_TOL
}

/// Checks the structural conditions for `mode`. Shape problems are errors;
/// violated conditions are reported, not raised.
pub fn validate_group(
    matrices: &[Vec<f64>],
    n: usize,
    m: usize,
    mode: GroupMode,
) -> Result<ValidationReport> {
    let group = StepTwoGroup::from_row_major(n, m, matrices)?;
    Ok(validate(&group, mode))
}

pub fn validate(group: &StepTwoGroup, mode: GroupMode) -> ValidationReport {
    let mut conditions = vec![residual_condition(
        "skew_symmetry",
        skew_residual(group),
        STRUCTURAL_TOL,
    )];
    let rank = structure_rank(group);
    conditions.push(Condition {
        name: "linear_independence".into(),
        passed: rank == group.m,
        residual: (group.m - rank) as f64,
        tolerance: 0.0,
        detail: Some(format!("rank {rank} of {}", group.m)),
    });
    let mut metivier = None;
    match mode {
        GroupMode::Metivier => {
            let skew_ok = conditions[0].passed;
            if skew_ok {
                metivier = Some(check_metivier(group, DEFAULT_METIVIER_SAMPLES, 0));
            }
        }
        GroupMode::Htype | GroupMode::Heisenberg => {
            conditions.push(residual_condition(
                "orthogonality",
                orthogonality_residual(group),
                STRUCTURAL_TOL,
            ));
            conditions.push(residual_condition(
                "anticommutation",
                anticommutation_residual(group),
                STRUCTURAL_TOL,
            ));
            if mode == GroupMode::Heisenberg {
                conditions.push(Condition {
                    name: "one_dimensional_center".into(),
                    passed: group.m == 1,
                    residual: (group.m as f64 - 1.0).abs(),
                    tolerance: 0.0,
                    detail: None,
                });
            }
        }
    }
    ValidationReport {
        mode,
        n: group.n,
        m: group.m,
        conditions,
        metivier,
    }
}

/// Deterministic directions on `S^{m-1}`: the coordinate axes first, then
/// normalized Gaussian draws from a seeded stream.
pub fn sample_directions(m: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for j in 0..m.min(count) {
        let mut e = vec![0.0; m];
        e[j] = 1.0;
        out.push(e);
    }
    while out.len() < count {
        let v: Vec<f64> = (0..m).map(|_| StandardNormal.sample(&mut rng)).collect();
        let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-8 {
            out.push(v.into_iter().map(|a| a / norm).collect());
        }
    }
    out
}

/// Sampling heuristic for Métivier non-degeneracy. H-type groups are
/// certified outright since `det V_lambda = |lambda|^{2n}` for them.
pub fn check_metivier(group: &StepTwoGroup, sample_count: usize, seed: u64) -> MetivierReport {
    let samples = sample_count.max(1);
    let mut min_abs_det = f64::INFINITY;
    let mut argmin = vec![0.0; group.m];
    for lambda in sample_directions(group.m, samples, seed) {
        let v = group
            .combination(&lambda)
            .expect("sampled directions are unit vectors");
        let det = v.determinant().abs();
        if det < min_abs_det {
            min_abs_det = det;
            argmin = lambda;
        }
    }
    let status = if is_htype(group) {
        MetivierStatus::Certified
    } else if min_abs_det > SPECTRAL_TOL {
        MetivierStatus::HeuristicPass
    } else {
        MetivierStatus::HeuristicFail
    };
    MetivierReport {
        status,
        samples,
        min_abs_det,
        argmin_lambda: argmin,
        tolerance: SPECTRAL_TOL,
    }
}

/// Coefficients of the twisted vector fields for a fixed `lambda`.
///
/// All tables are indexed `(l, j)`: `j` is the field `Z_j^lambda` and `l` the
/// coordinate multiplying `z_l` / `conj(z_l)`. With these,
/// `Z_j = d/dz_j + 1/4 sum_l (eta[l,j] z_l + nu[l,j] conj(z_l))` and
/// `Zbar_j = d/dzbar_j - 1/4 sum_l (conj(nu[l,j]) z_l + conj(eta[l,j]) conj(z_l))`.
#[derive(Debug, Clone, PartialEq)]
pub struct TwistTable {
    pub lambda: Vec<f64>,
    pub alpha: DMatrix<Complex64>,
    pub beta: DMatrix<Complex64>,
    pub nu: DMatrix<Complex64>,
    pub eta: DMatrix<Complex64>,
}

impl TwistTable {
    pub fn n(&self) -> usize {
        self.nu.nrows()
    }

    /// Diagonal coefficient `nu_j` used by the radial operators `D_j`.
    pub fn nu_diag(&self, j: usize) -> Complex64 {
        self.nu[(j, j)]
    }

    pub fn max_eta_diag(&self) -> f64 {
        (0..self.n())
            .map(|j| self.eta[(j, j)].norm())
            .fold(0.0, f64::max)
    }
}

pub fn twist_coefficients(group: &StepTwoGroup, lambda: &[f64]) -> Result<TwistTable> {
    group.check_lambda(lambda)?;
    let n = group.n;
    let i = Complex64::i();
    let mut alpha = DMatrix::from_element(n, n, Complex64::new(0.0, 0.0));
    let mut beta = alpha.clone();
    for (u, &lk) in group.structure.iter().zip(lambda) {
        for l in 0..n {
            for j in 0..n {
                alpha[(l, j)] += 0.5 * lk * Complex64::new(u[(l, j)], -u[(l, n + j)]);
                beta[(l, j)] += 0.5 * lk * Complex64::new(u[(n + l, j)], -u[(n + l, n + j)]);
            }
        }
    }
    let nu = alpha.map(|a| i * a) - &beta;
    let eta = alpha.map(|a| i * a) + &beta;
    Ok(TwistTable {
        lambda: lambda.to_vec(),
        alpha,
        beta,
        nu,
        eta,
    })
}

/// JSON form of a group: `{"n", "m", "U": [...], "mode"}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupSpec {
    pub n: usize,
    pub m: usize,
    #[serde(rename = "U")]
    pub matrices: Vec<MatrixInput>,
    #[serde(default = "default_mode")]
    pub mode: GroupMode,
}

fn default_mode() -> GroupMode {
    GroupMode::Metivier
}

/// A structure matrix as either a flat row-major list or a list of rows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MatrixInput {
    Flat(Vec<f64>),
    Rows(Vec<Vec<f64>>),
}

impl MatrixInput {
    pub fn flatten(&self) -> Vec<f64> {
        match self {
            MatrixInput::Flat(v) => v.clone(),
            MatrixInput::Rows(rows) => rows.iter().flatten().copied().collect(),
        }
    }
}

impl GroupSpec {
    pub fn from_group(group: &StepTwoGroup, mode: GroupMode) -> Self {
        Self {
            n: group.n,
            m: group.m,
            matrices: group
                .to_row_major()
                .into_iter()
                .map(MatrixInput::Flat)
                .collect(),
            mode,
        }
    }

    pub fn flat_matrices(&self) -> Vec<Vec<f64>> {
        self.matrices.iter().map(MatrixInput::flatten).collect()
    }

    pub fn build(&self) -> Result<StepTwoGroup> {
        StepTwoGroup::from_row_major(self.n, self.m, &self.flat_matrices())
    }

    pub fn validate(&self) -> Result<ValidationReport> {
        validate_group(&self.flat_matrices(), self.n, self.m, self.mode)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random_skew(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
        let a = DMatrix::from_fn(d, d, |_, _| rng.gen_range(-1.0..1.0));
        &a - a.transpose()
    }

    #[test]
    fn heisenberg_validates() {
        let report = validate_group(&[vec![0.0, -1.0, 1.0, 0.0]], 1, 1, GroupMode::Heisenberg)
            .unwrap();
        assert!(report.passed(), "{report:?}");
    }

    #[test]
    fn quaternion_units_satisfy_htype_conditions() {
        let q = StepTwoGroup::quaternionic();
        // oracle: quaternion relations i^2 = j^2 = k^2 = -1, ij = k
        let [li, lj, lk] = [&q.structure[0], &q.structure[1], &q.structure[2]];
        let id = DMatrix::<f64>::identity(4, 4);
        assert_eq!(li * li, -&id);
        assert_eq!(lj * lj, -&id);
        assert_eq!(lk * lk, -&id);
        assert_eq!(li * lj, lk.clone());
        let report = validate(&q, GroupMode::Htype);
        assert!(report.passed());
        for c in &report.conditions {
            assert!(c.residual <= 1e-12);
        }
    }

    #[test]
    fn symmetric_matrix_fails_skew_condition() {
        let report =
            validate_group(&[vec![0.0, 1.0, 1.0, 0.0]], 1, 1, GroupMode::Metivier).unwrap();
        let skew = report.condition("skew_symmetry").unwrap();
        assert!(!skew.passed);
        assert_eq!(skew.residual, 2.0);
        assert!(!report.passed());
    }

    #[test]
    fn shape_mismatch_names_matrix() {
        let err = validate_group(
            &[vec![0.0, -1.0, 1.0, 0.0], vec![0.0; 9]],
            1,
            2,
            GroupMode::Metivier,
        )
        .unwrap_err();
        assert!(matches!(err, TsmError::MatrixShape { index: 1, .. }));
    }

    #[test]
    fn metivier_certification() {
        let h = StepTwoGroup::heisenberg(1);
        let r = check_metivier(&h, 16, 3);
        assert_eq!(r.status, MetivierStatus::Certified);
        assert!((r.min_abs_det - 1.0).abs() < 1e-12);

        let q = StepTwoGroup::quaternionic();
        assert_eq!(check_metivier(&q, 64, 1).status, MetivierStatus::Certified);
    }

    #[test]
    fn degenerate_second_matrix_fails_heuristic() {
        let canonical = vec![0.0, -1.0, 1.0, 0.0];
        let g = StepTwoGroup::from_row_major(1, 2, &[canonical, vec![0.0; 4]]).unwrap();
        let r = check_metivier(&g, 32, 0);
        assert_eq!(r.status, MetivierStatus::HeuristicFail);
        assert_eq!(r.argmin_lambda, vec![0.0, 1.0]);
        assert!(r.min_abs_det <= 1e-15);
        assert!(!validate(&g, GroupMode::Metivier).passed());
    }

    #[test]
    fn group_law_examples() {
        let h = StepTwoGroup::heisenberg(1);
        let p = GroupPoint {
            x: vec![1.0, 0.0],
            t: vec![0.0],
        };
        let q = GroupPoint {
            x: vec![0.0, 1.0],
            t: vec![0.0],
        };
        let r = group_law(&h, &p, &q).unwrap();
        assert_eq!(r.x, vec![1.0, 1.0]);
        assert_eq!(r.t, vec![-0.5]);
        assert_eq!(group_law(&h, &p, &h.identity()).unwrap(), p);
        let e = group_law(&h, &r, &r.inverse()).unwrap();
        assert!(e.x.iter().chain(&e.t).all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn group_law_rejects_wrong_dimension() {
        let h = StepTwoGroup::heisenberg(1);
        let bad = GroupPoint {
            x: vec![1.0],
            t: vec![0.0],
        };
        assert!(group_law(&h, &bad, &h.identity()).is_err());
    }

    #[test]
    fn heisenberg_twist_table() {
        let h = StepTwoGroup::heisenberg(1);
        let t = twist_coefficients(&h, &[1.0]).unwrap();
        assert_eq!(t.eta[(0, 0)], Complex64::new(0.0, 0.0));
        // nu_jj = sum_k lambda_k U_{j, n+j}
        assert_eq!(t.nu_diag(0), Complex64::new(-1.0, 0.0));
        let t2 = twist_coefficients(&h, &[2.0]).unwrap();
        assert_eq!(t2.nu, t.nu.map(|c| c * 2.0));
        assert!(twist_coefficients(&h, &[0.0]).is_err());
    }

    #[test]
    fn eta_diagonal_vanishes_for_random_skew() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..50 {
            let n = rng.gen_range(1..4);
            let m = rng.gen_range(1..4);
            let mats = (0..m).map(|_| random_skew(2 * n, &mut rng)).collect();
            let g = StepTwoGroup::new(n, m, mats).unwrap();
            let lambda: Vec<f64> = (0..m).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let t = twist_coefficients(&g, &lambda).unwrap();
            // oracle: eta_jj by direct summation of the defining formula
            for j in 0..n {
                let mut direct = Complex64::new(0.0, 0.0);
                for (u, lk) in g.structure().iter().zip(&lambda) {
                    let a = Complex64::new(u[(j, j)], -u[(j, n + j)]) * 0.5 * lk;
                    let b = Complex64::new(u[(n + j, j)], -u[(n + j, n + j)]) * 0.5 * lk;
                    direct += b + Complex64::i() * a;
                }
                assert!(direct.norm() <= 1e-12);
            }
            assert!(t.max_eta_diag() <= 1e-12);
        }
    }

    #[test]
    fn group_spec_accepts_flat_and_nested_matrices() {
        let flat = r#"{"n":1,"m":1,"U":[[0,-1,1,0]],"mode":"heisenberg"}"#;
        let nested = r#"{"n":1,"m":1,"U":[[[0,-1],[1,0]]],"mode":"heisenberg"}"#;
        let a = GroupSpec::from_json(flat).unwrap().build().unwrap();
        let b = GroupSpec::from_json(nested).unwrap().build().unwrap();
        assert_eq!(a, b);
        assert_eq!(a, StepTwoGroup::heisenberg(1));
    }
}
