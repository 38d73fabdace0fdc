//! Problem data for impulsive systems and the semigroup providers.
//!
//! Stage numbers are 1-based throughout: stage `k` fires at `t_k`, with the
//! conventions `t_0 = 0` and `t_{p+1} = b`. Interval `k` is `(t_{k-1}, t_k]`.

use std::fmt;

use crate::{Error, Matrix, Result, StateVector};

/// The generator `A` of the semigroup `S(t)`.
#[derive(Debug, Clone, PartialEq)]
pub enum GeneratorSpec {
    /// Bounded generator; `S(t) = e^{tA}`.
    Dense(Matrix),
    /// One 2×2 rotation block per frequency, acting in canonical
    /// coordinates `(m α_m, β_m)` where each block is
    /// `[[cos mt, sin mt], [-sin mt, cos mt]]`. This is a group, so `S(t)` is
    /// defined for every real `t` and `S*(t) = S(-t)`.
    SpectralBlocks(Vec<f64>),
}

impl GeneratorSpec {
    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        match self {
            GeneratorSpec::Dense(a) => a.nrows(),
            GeneratorSpec::SpectralBlocks(freqs) => 2 * freqs.len(),
        }
    }

    /// The generator as a dense matrix. For spectral blocks this is the
    /// block-diagonal `[[0, m], [-m, 0]]`.
    pub fn to_dense(&self) -> Matrix {
        match self {
            GeneratorSpec::Dense(a) => a.clone(),
            GeneratorSpec::SpectralBlocks(freqs) => {
                let n = 2 * freqs.len();
                let mut a = Matrix::zeros(n, n);
                for (block, &m) in freqs.iter().enumerate() {
                    let i = 2 * block;
                    a[(i, i + 1)] = m;
                    a[(i + 1, i)] = -m;
                }
                a
            }
        }
    }

    fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() {
            return Err(Error::NonFinite("semigroup time"));
        }
        if t < 0.0 && matches!(self, GeneratorSpec::Dense(_)) {
            return Err(Error::NegativeTime(t));
        }
        Ok(())
    }

    /// `S(t) X`, column by column.
    pub fn apply_columns(&self, t: f64, x: &Matrix) -> Result<Matrix> {
        self.check_time(t)?;
        match self {
            GeneratorSpec::Dense(a) => Ok((a * t).exp() * x),
            GeneratorSpec::SpectralBlocks(freqs) => Ok(rotate_blocks(freqs, t, x)),
        }
    }

    /// `S*(t) X`, column by column.
    pub fn apply_adjoint_columns(&self, t: f64, x: &Matrix) -> Result<Matrix> {
        self.check_time(t)?;
        match self {
            GeneratorSpec::Dense(a) => Ok((a * t).exp().transpose() * x),
            GeneratorSpec::SpectralBlocks(freqs) => Ok(rotate_blocks(freqs, -t, x)),
        }
    }

    pub fn apply(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        self.check_time(t)?;
        match self {
            GeneratorSpec::Dense(a) => Ok((a * t).exp() * x),
            GeneratorSpec::SpectralBlocks(freqs) => {
                let mut y = x.clone();
                rotate_vector(freqs, t, &mut y);
                Ok(y)
            }
        }
    }

    pub fn apply_adjoint(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        self.check_time(t)?;
        match self {
            GeneratorSpec::Dense(a) => Ok((a * t).exp().tr_mul(x)),
            GeneratorSpec::SpectralBlocks(freqs) => {
                let mut y = x.clone();
                rotate_vector(freqs, -t, &mut y);
                Ok(y)
            }
        }
    }
}

fn rotate_vector(freqs: &[f64], t: f64, x: &mut StateVector) {
    for (block, &m) in freqs.iter().enumerate() {
        let (s, c) = (m * t).sin_cos();
        let (x1, x2) = (x[2 * block], x[2 * block + 1]);
        x[2 * block] = c * x1 + s * x2;
        x[2 * block + 1] = -s * x1 + c * x2;
    }
}

fn rotate_blocks(freqs: &[f64], t: f64, x: &Matrix) -> Matrix {
    let mut y = x.clone();
    for (block, &m) in freqs.iter().enumerate() {
        let (s, c) = (m * t).sin_cos();
        let (r1, r2) = (2 * block, 2 * block + 1);
        for j in 0..x.ncols() {
            let (x1, x2) = (x[(r1, j)], x[(r2, j)]);
            y[(r1, j)] = c * x1 + s * x2;
            y[(r2, j)] = -s * x1 + c * x2;
        }
    }
    y
}

/// `S(t) x`.
pub fn semigroup_apply(g: &GeneratorSpec, t: f64, x: &StateVector) -> Result<StateVector> {
    g.apply(t, x)
}

/// `S*(t) x`.
pub fn semigroup_adjoint_apply(g: &GeneratorSpec, t: f64, x: &StateVector) -> Result<StateVector> {
    g.apply_adjoint(t, x)
}

/// One impulse: `x(t⁺) = (I + C) x(t⁻) + D v`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseStage {
    pub t: f64,
    pub c: Matrix,
    pub d: Matrix,
}

/// Unvalidated problem data. Turn it into an [`ImpulsiveSystem`] with
/// [`ImpulsiveSystem::new`].
#[derive(Debug, Clone, PartialEq)]
pub struct SystemDefinition {
    pub generator: GeneratorSpec,
    pub b: Matrix,
    pub horizon: f64,
    pub stages: Vec<ImpulseStage>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    EmptyState,
    NonSquareGenerator { rows: usize, cols: usize },
    NonFinite(String),
    NonPositiveFrequency { index: usize, value: f64 },
    NonPositiveHorizon(f64),
    DimensionMismatch { what: String, expected: (usize, usize), got: (usize, usize) },
    ImpulseTimeOutside { stage: usize, t: f64 },
    NonIncreasingTimes { stage: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyState => write!(f, "state dimension is zero"),
            Violation::NonSquareGenerator { rows, cols } => {
                write!(f, "generator is not square ({rows}×{cols})")
            }
            Violation::NonFinite(what) => write!(f, "non-finite entry in {what}"),
            Violation::NonPositiveFrequency { index, value } => {
                write!(f, "frequency {index} is not strictly positive ({value})")
            }
            Violation::NonPositiveHorizon(b) => write!(f, "horizon {b} is not strictly positive"),
            Violation::DimensionMismatch { what, expected, got } => write!(
                f,
                "dimension mismatch in {what}: expected {}×{}, got {}×{}",
                expected.0, expected.1, got.0, got.1
            ),
            Violation::ImpulseTimeOutside { stage, t } => {
                write!(f, "impulse time outside (0,b): stage {stage} at t = {t}")
            }
            Violation::NonIncreasingTimes { stage } => {
                write!(f, "non-increasing impulse times at stage {stage}")
            }
        }
    }
}

/// Outcome of [`validate_system`]; empty means valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "ok");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                write!(f, "; ")?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

fn all_finite(m: &Matrix) -> bool {
    m.iter().all(|v| v.is_finite())
}

pub fn validate_system(def: &SystemDefinition) -> ValidationReport {
    let mut violations = Vec::new();
    let n = def.generator.dim();
    match &def.generator {
        GeneratorSpec::Dense(a) => {
            if a.nrows() != a.ncols() {
                violations.push(Violation::NonSquareGenerator { rows: a.nrows(), cols: a.ncols() });
            }
            if !all_finite(a) {
                violations.push(Violation::NonFinite("generator".into()));
            }
        }
        GeneratorSpec::SpectralBlocks(freqs) => {
            for (index, &value) in freqs.iter().enumerate() {
                if !value.is_finite() {
                    violations.push(Violation::NonFinite(format!("frequency {index}")));
                } else if value <= 0.0 {
                    violations.push(Violation::NonPositiveFrequency { index, value });
                }
            }
        }
    }
    if n == 0 {
        violations.push(Violation::EmptyState);
    }

    let m_u = def.b.ncols();
    if def.b.nrows() != n {
        violations.push(Violation::DimensionMismatch {
            what: "B".into(),
            expected: (n, m_u),
            got: def.b.shape(),
        });
    }
    if !all_finite(&def.b) {
        violations.push(Violation::NonFinite("B".into()));
    }

    let horizon = def.horizon;
    if !horizon.is_finite() {
        violations.push(Violation::NonFinite("horizon".into()));
    } else if horizon <= 0.0 {
        violations.push(Violation::NonPositiveHorizon(horizon));
    }

    let mut previous = 0.0;
    for (idx, stage) in def.stages.iter().enumerate() {
        let k = idx + 1;
        if !stage.t.is_finite() {
            violations.push(Violation::NonFinite(format!("stage {k} time")));
        } else {
            if stage.t <= 0.0 || stage.t >= horizon || horizon.is_nan() {
                violations.push(Violation::ImpulseTimeOutside { stage: k, t: stage.t });
            }
            if k > 1 && stage.t <= previous {
                violations.push(Violation::NonIncreasingTimes { stage: k });
            }
            previous = stage.t;
        }
        if stage.c.shape() != (n, n) {
            violations.push(Violation::DimensionMismatch {
                what: format!("C_{k}"),
                expected: (n, n),
                got: stage.c.shape(),
            });
        }
        if stage.d.shape() != (n, m_u) {
            violations.push(Violation::DimensionMismatch {
                what: format!("D_{k}"),
                expected: (n, m_u),
                got: stage.d.shape(),
            });
        }
        if !all_finite(&stage.c) {
            violations.push(Violation::NonFinite(format!("C_{k}")));
        }
        if !all_finite(&stage.d) {
            violations.push(Violation::NonFinite(format!("D_{k}")));
        }
    }
    ValidationReport { violations }
}

/// A validated impulsive system. Immutable after construction.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulsiveSystem {
    def: SystemDefinition,
    knots: Vec<f64>,
}

impl ImpulsiveSystem {
    pub fn new(def: SystemDefinition) -> Result<Self> {
        let report = validate_system(&def);
        if !report.is_ok() {
            return Err(Error::InvalidSystem(report));
        }
        let mut knots = Vec::with_capacity(def.stages.len() + 2);
        knots.push(0.0);
        knots.extend(def.stages.iter().map(|s| s.t));
        knots.push(def.horizon);
        Ok(ImpulsiveSystem { def, knots })
    }

    pub fn definition(&self) -> &SystemDefinition {
        &self.def
    }

    pub fn generator(&self) -> &GeneratorSpec {
        &self.def.generator
    }

    pub fn b_matrix(&self) -> &Matrix {
        &self.def.b
    }

    pub fn horizon(&self) -> f64 {
        self.def.horizon
    }

    pub fn stages(&self) -> &[ImpulseStage] {
        &self.def.stages
    }

    /// Stage `k` (1-based).
    pub fn stage(&self, k: usize) -> Result<&ImpulseStage> {
        self.check_stage(k)?;
        Ok(&self.def.stages[k - 1])
    }

    pub fn n(&self) -> usize {
        self.def.generator.dim()
    }

    pub fn m_u(&self) -> usize {
        self.def.b.ncols()
    }

    /// Number of impulses `p`.
    pub fn p(&self) -> usize {
        self.def.stages.len()
    }

    /// `t_0 = 0, t_1, ..., t_p, t_{p+1} = b`.
    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// `t_i` for `i` in `0..=p+1`.
    pub fn knot(&self, i: usize) -> f64 {
        self.knots[i]
    }

    /// Time of the last impulse, `t_p` (0 when `p = 0`).
    pub fn last_impulse_time(&self) -> f64 {
        self.knots[self.p()]
    }

    /// Index `k` in `1..=p+1` of the interval `(t_{k-1}, t_k]` containing
    /// `t`; `t = 0` belongs to interval 1.
    pub fn interval_of(&self, t: f64) -> Result<usize> {
        self.check_time(t)?;
        let p = self.p();
        Ok((1..=p).find(|&k| t <= self.knots[k]).unwrap_or(p + 1))
    }

    pub(crate) fn check_time(&self, t: f64) -> Result<()> {
        if !(0.0..=self.horizon()).contains(&t) {
            return Err(Error::TimeOutOfRange { t, lo: 0.0, hi: self.horizon() });
        }
        Ok(())
    }

    pub(crate) fn check_stage(&self, k: usize) -> Result<()> {
        if k == 0 || k > self.p() {
            return Err(Error::StageOutOfRange { index: k, p: self.p() });
        }
        Ok(())
    }

    pub(crate) fn check_state(&self, what: &'static str, x: &StateVector) -> Result<()> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { what, expected: self.n(), got: x.len() });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite(what));
        }
        Ok(())
    }

    pub fn semigroup(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        self.def.generator.apply(t, x)
    }

    pub fn semigroup_adjoint(&self, t: f64, x: &StateVector) -> Result<StateVector> {
        self.def.generator.apply_adjoint(t, x)
    }

    /// `S_C(t_j, t_{j-1}) x = (I + C_j) S(t_j - t_{j-1}) x`.
    pub fn jump_propagator(&self, j: usize, x: &StateVector) -> Result<StateVector> {
        let stage = self.stage(j)?;
        let y = self.semigroup(self.knots[j] - self.knots[j - 1], x)?;
        Ok(&y + &stage.c * &y)
    }

    /// `S_C*(t_j, t_{j-1}) x = S*(t_j - t_{j-1}) (I + C_jᵀ) x`.
    pub fn jump_propagator_adjoint(&self, j: usize, x: &StateVector) -> Result<StateVector> {
        let stage = self.stage(j)?;
        let y = x + stage.c.tr_mul(x);
        self.semigroup_adjoint(self.knots[j] - self.knots[j - 1], &y)
    }

    fn check_product(&self, k: usize, i: usize) -> Result<()> {
        let p = self.p();
        if k > p {
            return Err(Error::StageOutOfRange { index: k, p });
        }
        if i == 0 || i > p + 1 {
            return Err(Error::StageOutOfRange { index: i, p });
        }
        Ok(())
    }

    /// `S_C(t_k, t_{k-1}) ⋯ S_C(t_i, t_{i-1}) x`; identity when `i > k`.
    pub fn product_propagator(&self, k: usize, i: usize, x: &StateVector) -> Result<StateVector> {
        self.check_product(k, i)?;
        let mut y = x.clone();
        for j in i..=k {
            y = self.jump_propagator(j, &y)?;
        }
        Ok(y)
    }

    /// Adjoint of [`Self::product_propagator`]: applies `S_C*(t_k, ·)` first.
    pub fn product_propagator_adjoint(
        &self,
        k: usize,
        i: usize,
        x: &StateVector,
    ) -> Result<StateVector> {
        self.check_product(k, i)?;
        let mut y = x.clone();
        for j in (i..=k).rev() {
            y = self.jump_propagator_adjoint(j, &y)?;
        }
        Ok(y)
    }

    /// Dense matrix of `S(b - t_p) ∏_{j=p}^{i} S_C(t_j, t_{j-1})`, the map
    /// pushing a state just after `t_{i-1}` to the horizon, for `i` in
    /// `1..=p+1`.
    pub(crate) fn push_to_horizon_matrix(&self, i: usize) -> Result<Matrix> {
        let n = self.n();
        let p = self.p();
        let mut m = Matrix::identity(n, n);
        for j in i..=p {
            let stage = &self.def.stages[j - 1];
            let y = self
                .def
                .generator
                .apply_columns(self.knots[j] - self.knots[j - 1], &m)?;
            m = &y + &stage.c * &y;
        }
        self.def.generator.apply_columns(self.horizon() - self.knots[p], &m)
    }

    /// `(I + C_k) x + D_k v`, the jump at stage `k`.
    pub fn apply_jump(&self, k: usize, x_left: &StateVector, v: &StateVector) -> Result<StateVector> {
        let stage = self.stage(k)?;
        Ok(x_left + &stage.c * x_left + &stage.d * v)
    }
}

/// `S_C(t_j, t_{j-1}) x`.
pub fn jump_propagator_apply(sys: &ImpulsiveSystem, j: usize, x: &StateVector) -> Result<StateVector> {
    sys.jump_propagator(j, x)
}

/// Descending product `∏_{j=k}^{i} S_C(t_j, t_{j-1}) x`.
pub fn product_propagator_apply(
    sys: &ImpulsiveSystem,
    k: usize,
    i: usize,
    x: &StateVector,
) -> Result<StateVector> {
    sys.product_propagator(k, i, x)
}
