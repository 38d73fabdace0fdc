//! Decision procedures for approximate controllability.
//!
//! In finite dimension the four equivalent characterizations (dense range,
//! trivial kernel of `M*`, positivity of `W = MM*`, strong decay of the
//! resolvent family `ε(εI + W)⁻¹`) all reduce to `λ_min(W) > 0`; weak and
//! strong operator convergence coincide. The report still computes each
//! signal separately so a disagreement exposes numerical trouble.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::gramian::{gramian_set, GramianSet};
use crate::linalg::{asymmetry, numerical_rank, regularized_solve, symmetric_eigenvalues};
use crate::quadrature::QuadratureConfig;
use crate::system::{GeneratorSpec, ImpulsiveSystem};
use crate::{Error, Matrix, Result, StateVector};

pub const DEFAULT_RANK_TOL: f64 = 1e-9;
pub const DEFAULT_DECAY_TOL: f64 = 1e-4;
pub const DEFAULT_PROBE_SEED: u64 = 0x5EED;
pub const RANDOM_PROBES: usize = 4;

/// Relative change between consecutive resolvent samples below which the
/// tail counts as a plateau.
const PLATEAU_REL_CHANGE: f64 = 1e-6;

/// `1, 1/2, …, 2⁻²⁷`.
pub fn default_schedule() -> Vec<f64> {
    (0..28).map(|k| 0.5f64.powi(k)).collect()
}

/// `(λ_min, positive)` where positive means `λ_min > rank_tol · λ_max`.
pub fn positivity_test(w: &Matrix, rank_tol: f64) -> Result<(f64, bool)> {
    if w.nrows() != w.ncols() {
        return Err(Error::DimensionMismatch { what: "Gramian", expected: w.nrows(), got: w.ncols() });
    }
    let skew = asymmetry(w);
    if skew > 1e-10 * w.amax().max(1.0) {
        return Err(Error::NotSymmetric(skew));
    }
    let eigs = symmetric_eigenvalues(w);
    let (Some(&min), Some(&max)) = (eigs.first(), eigs.last()) else {
        return Ok((0.0, false));
    };
    Ok((min, max > 0.0 && min > rank_tol * max))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventSample {
    pub epsilon: f64,
    /// `‖ε(εI + W)⁻¹h‖`.
    pub norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventDecay {
    pub samples: Vec<ResolventSample>,
    /// Final sample is at most `tol · ‖h‖`.
    pub converging: bool,
    /// Limiting value when the tail of the schedule stopped changing; in
    /// exact arithmetic this is the norm of the projection of `h` onto
    /// `ker W`.
    pub plateau: Option<f64>,
}

pub fn resolvent_decay(w: &Matrix, h: &StateVector, schedule: &[f64], tol: f64) -> Result<ResolventDecay> {
    if schedule.is_empty() {
        return Err(Error::InvalidParameter("empty epsilon schedule".into()));
    }
    for pair in schedule.windows(2) {
        if pair[1].partial_cmp(&pair[0]) != Some(std::cmp::Ordering::Less) {
            return Err(Error::InvalidParameter("epsilon schedule must be strictly decreasing".into()));
        }
    }
    let samples = schedule
        .iter()
        .map(|&epsilon| {
            let y = regularized_solve(w, epsilon, h)?;
            Ok(ResolventSample { epsilon, norm: (y * epsilon).norm() })
        })
        .collect::<Result<Vec<_>>>()?;
    let last = samples.last().map(|s| s.norm).unwrap_or(0.0);
    let converging = last <= tol * h.norm();
    let plateau = if samples.len() >= 3 && last > 0.0 {
        let tail = &samples[samples.len() - 3..];
        let flat = tail
            .windows(2)
            .all(|w| (w[0].norm - w[1].norm).abs() <= PLATEAU_REL_CHANGE * w[0].norm);
        flat.then_some(last)
    } else {
        None
    };
    Ok(ResolventDecay { samples, converging, plateau })
}

/// Numerical rank of `[B, AB, …, A^{n-1}B]`; rank `n` means
/// `⋂_k ker(B*(A*)^k) = {0}`.
pub fn kalman_span_test(a: &Matrix, b: &Matrix, rank_tol: f64) -> Result<usize> {
    let n = a.nrows();
    if a.ncols() != n || b.nrows() != n {
        return Err(Error::DimensionMismatch { what: "Kalman pair", expected: n, got: b.nrows() });
    }
    let m = b.ncols();
    let mut krylov = Matrix::zeros(n, n * m);
    let mut block = b.clone();
    for k in 0..n {
        krylov.columns_mut(k * m, m).copy_from(&block);
        block = a * block;
    }
    Ok(numerical_rank(&krylov, rank_tol))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Controllable,
    NotControllable,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckOptions {
    pub rank_tol: f64,
    pub decay_tol: f64,
    pub schedule: Vec<f64>,
    pub seed: u64,
    /// Run the rank test on spectral generators by expanding them to dense.
    pub expand_spectral: bool,
}

impl Default for CheckOptions {
    fn default() -> Self {
        CheckOptions {
            rank_tol: DEFAULT_RANK_TOL,
            decay_tol: DEFAULT_DECAY_TOL,
            schedule: default_schedule(),
            seed: DEFAULT_PROBE_SEED,
            expand_spectral: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolventProbe {
    pub h: Vec<f64>,
    #[serde(flatten)]
    pub decay: ResolventDecay,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerGramianMinEigs {
    pub theta: f64,
    pub gamma: f64,
    pub theta_tilde: f64,
    pub gamma_tilde: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ControllabilityReport {
    pub n: usize,
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub w_positive: bool,
    pub per_gramian_min_eigs: PerGramianMinEigs,
    /// Some single Gramian is positive on its own.
    pub single_gramian_positive: bool,
    pub kalman_rank: Option<usize>,
    pub resolvent_samples: Vec<ResolventProbe>,
    pub verdict: Verdict,
    #[serde(skip)]
    pub gramians: GramianSet,
}

/// Canonical basis vectors followed by `RANDOM_PROBES` seeded random unit
/// vectors.
pub fn probe_vectors(n: usize, seed: u64) -> Vec<StateVector> {
    let mut probes: Vec<StateVector> = (0..n)
        .map(|i| {
            let mut e = StateVector::zeros(n);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while probes.len() < n + RANDOM_PROBES {
        let v = StateVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
        let norm = v.norm();
        if norm > 1e-8 {
            probes.push(v / norm);
        }
    }
    probes
}

pub fn controllability_report(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    options: &CheckOptions,
) -> Result<ControllabilityReport> {
    let gramians = gramian_set(sys, q)?;
    let n = sys.n();
    let tol = options.rank_tol;

    let eigs = symmetric_eigenvalues(&gramians.total);
    let (lambda_min, w_positive) = positivity_test(&gramians.total, tol)?;
    let lambda_max = eigs.last().copied().unwrap_or(0.0);

    let mut mins = [0.0; 4];
    let mut single_gramian_positive = false;
    for (slot, (_, g)) in mins.iter_mut().zip(gramians.named()) {
        let (min, positive) = positivity_test(g, tol)?;
        *slot = min;
        single_gramian_positive |= positive;
    }

    let kalman_rank = match sys.generator() {
        GeneratorSpec::Dense(a) => Some(kalman_span_test(a, sys.b_matrix(), tol)?),
        g @ GeneratorSpec::SpectralBlocks(_) if options.expand_spectral => {
            Some(kalman_span_test(&g.to_dense(), sys.b_matrix(), tol)?)
        }
        GeneratorSpec::SpectralBlocks(_) => None,
    };

    let resolvent_samples = probe_vectors(n, options.seed)
        .into_iter()
        .map(|h| {
            let decay = resolvent_decay(&gramians.total, &h, &options.schedule, options.decay_tol)?;
            Ok(ResolventProbe { h: h.iter().copied().collect(), decay })
        })
        .collect::<Result<Vec<_>>>()?;
    let all_decay = resolvent_samples.iter().all(|p| p.decay.converging);

    let kalman_full = kalman_rank.map(|r| r == n);
    let verdict = if w_positive && kalman_full != Some(false) {
        Verdict::Controllable
    } else if !w_positive && !single_gramian_positive && kalman_full != Some(true) && !all_decay {
        Verdict::NotControllable
    } else {
        Verdict::Inconclusive
    };

    Ok(ControllabilityReport {
        n,
        lambda_min,
        lambda_max,
        w_positive,
        per_gramian_min_eigs: PerGramianMinEigs {
            theta: mins[0],
            gamma: mins[1],
            theta_tilde: mins[2],
            gamma_tilde: mins[3],
        },
        single_gramian_positive,
        kalman_rank,
        resolvent_samples,
        verdict,
        gramians,
    })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    use super::*;
    use crate::fixtures;

    #[test]
    fn positivity_examples() {
        let (min, pos) = positivity_test(&dmatrix![2.625], DEFAULT_RANK_TOL).unwrap();
        assert_eq!((min, pos), (2.625, true));
        let (min, pos) = positivity_test(&dmatrix![1.0, 0.0; 0.0, 0.0], DEFAULT_RANK_TOL).unwrap();
        assert_eq!((min, pos), (0.0, false));
        assert!(!positivity_test(&Matrix::zeros(3, 3), DEFAULT_RANK_TOL).unwrap().1);
        assert!(matches!(
            positivity_test(&dmatrix![1.0, 1.0; 0.0, 1.0], DEFAULT_RANK_TOL),
            Err(Error::NotSymmetric(_))
        ));
    }

    #[test]
    fn resolvent_scalar_closed_form() {
        let d = resolvent_decay(&dmatrix![2.625], &dvector![2.0], &[0.01], DEFAULT_DECAY_TOL).unwrap();
        assert_relative_eq!(d.samples[0].norm, 0.02 / 2.635, epsilon = 1e-15);
    }

    #[test]
    fn resolvent_plateau_on_kernel() {
        let w = dmatrix![1.0, 0.0; 0.0, 0.0];
        let d = resolvent_decay(&w, &dvector![0.0, 1.0], &default_schedule(), DEFAULT_DECAY_TOL).unwrap();
        assert!(d.samples.iter().all(|s| (s.norm - 1.0).abs() <= 1e-12));
        assert!(!d.converging);
        assert_relative_eq!(d.plateau.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn resolvent_of_zero_target() {
        let d = resolvent_decay(&dmatrix![1.0], &dvector![0.0], &default_schedule(), DEFAULT_DECAY_TOL).unwrap();
        assert!(d.samples.iter().all(|s| s.norm == 0.0));
        assert!(d.converging);
        assert_eq!(d.plateau, None);
    }

    #[test]
    fn resolvent_rejects_bad_schedules() {
        let w = dmatrix![1.0];
        let h = dvector![1.0];
        assert!(resolvent_decay(&w, &h, &[], 1e-4).is_err());
        assert!(resolvent_decay(&w, &h, &[0.1, 0.1], 1e-4).is_err());
        assert!(resolvent_decay(&w, &h, &[0.1, 0.2], 1e-4).is_err());
    }

    #[test]
    fn resolvent_decay_is_monotone_in_epsilon() {
        let w = dmatrix![3.0, 1.0, 0.0; 1.0, 2.0, 0.01; 0.0, 0.01, 1e-3];
        let d = resolvent_decay(&w, &dvector![0.3, -1.0, 2.0], &default_schedule(), 1e-4).unwrap();
        for pair in d.samples.windows(2) {
            assert!(pair[1].norm <= pair[0].norm * (1.0 + 1e-12));
        }
    }

    #[test]
    fn kalman_examples() {
        assert_eq!(kalman_span_test(&dmatrix![0.0, 1.0; 0.0, 0.0], &dmatrix![0.0; 1.0], 1e-9).unwrap(), 2);
        assert_eq!(kalman_span_test(&Matrix::zeros(2, 2), &dmatrix![1.0; 0.0], 1e-9).unwrap(), 1);
        assert_eq!(kalman_span_test(&Matrix::zeros(2, 2), &Matrix::zeros(2, 1), 1e-9).unwrap(), 0);
    }

    #[test]
    fn probes_are_reproducible_unit_vectors() {
        let a = probe_vectors(3, DEFAULT_PROBE_SEED);
        assert_eq!(a.len(), 3 + RANDOM_PROBES);
        assert_eq!(a, probe_vectors(3, DEFAULT_PROBE_SEED));
        for v in &a {
            assert_relative_eq!(v.norm(), 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn s1_report() {
        let r = controllability_report(&fixtures::s1(), &QuadratureConfig::default(), &CheckOptions::default())
            .unwrap();
        assert_eq!(r.verdict, Verdict::Controllable);
        assert_relative_eq!(r.lambda_min, 2.625, epsilon = 1e-14);
        assert_eq!(r.kalman_rank, Some(1));
        assert!(r.resolvent_samples.iter().all(|p| p.decay.converging));
    }

    #[test]
    fn s2_report() {
        let r = controllability_report(&fixtures::s2(), &QuadratureConfig::default(), &CheckOptions::default())
            .unwrap();
        assert_eq!(r.verdict, Verdict::NotControllable);
        assert_eq!(r.lambda_min, 0.0);
        assert_eq!(r.kalman_rank, Some(1));
        let e2 = &r.resolvent_samples[1];
        assert_eq!(e2.h, vec![0.0, 1.0]);
        assert_relative_eq!(e2.decay.plateau.unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn positive_single_gramian_implies_positive_sum() {
        let q = QuadratureConfig::default();
        for sys in [fixtures::s1(), fixtures::s2(), fixtures::two_stage_scalar(1.5, 2.0), fixtures::two_stage_scalar(0.0, 0.0)] {
            let r = controllability_report(&sys, &q, &CheckOptions::default()).unwrap();
            let m = &r.per_gramian_min_eigs;
            let best = m.theta.max(m.gamma).max(m.theta_tilde).max(m.gamma_tilde);
            if best > DEFAULT_RANK_TOL {
                assert!(r.lambda_min > DEFAULT_RANK_TOL);
            }
        }
    }
}
