//! Forward mild solutions through impulses, backward adjoint solutions and
//! the duality pairing between them.
//!
//! Forward states at an impulse time report the left value `x(t_k⁻)`;
//! adjoint states use the bracketing `(t_{k-1}, t_k]`, so `ψ(t_k)` is the
//! left value as well and [`adjoint_post_impulse`] exposes `ψ(t_k⁺)`.

use crate::control::{ControlPair, IntervalLaw};
use crate::quadrature::QuadratureConfig;
use crate::system::ImpulsiveSystem;
use crate::{Error, Result, StateVector};

/// `∫_a^end S(end - s) B u(s) ds` on a piece of one impulse subinterval.
pub(crate) fn input_integral(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    law: &IntervalLaw<'_>,
    a: f64,
    end: f64,
) -> Result<StateVector> {
    let mut acc = StateVector::zeros(sys.n());
    for node in q.nodes(a, end, &law.breakpoints()) {
        let bu = sys.b_matrix() * law.eval(sys, node.s)?;
        acc += sys.semigroup(end - node.s, &bu)? * node.w;
    }
    Ok(acc)
}

/// `∫_{t_{k-1}}^{t_k} S(t_k - s) B u(s) ds`.
pub(crate) fn interval_input(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    w: &ControlPair,
    k: usize,
) -> Result<StateVector> {
    let law = w.law.on_interval(sys, k)?;
    input_integral(sys, q, &law, sys.knot(k - 1), sys.knot(k))
}

/// `x(t_k⁺)` written out as the sum of the free term, the pushed-forward
/// distributed-control integrals and the impulse-control terms.
pub fn state_after_impulse(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    x0: &StateVector,
    w: &ControlPair,
    k: usize,
) -> Result<StateVector> {
    sys.check_stage(k)?;
    sys.check_state("initial state", x0)?;
    w.check(sys)?;

    let mut x = sys.product_propagator(k, 1, x0)?;
    for i in 1..=k {
        let integral = interval_input(sys, q, w, i)?;
        let c = &sys.stage(i)?.c;
        let jumped = &integral + c * &integral;
        x += sys.product_propagator(k, i + 1, &jumped)?;
    }
    for i in 2..=k {
        let dv = &sys.stage(i - 1)?.d * &w.impulses[i - 2];
        x += sys.product_propagator(k, i, &dv)?;
    }
    x += &sys.stage(k)?.d * &w.impulses[k - 1];
    Ok(x)
}

/// `x(t)` for `0 ≤ t ≤ b`; the left value at impulse times.
pub fn mild_solution(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    x0: &StateVector,
    w: &ControlPair,
    t: f64,
) -> Result<StateVector> {
    sys.check_state("initial state", x0)?;
    w.check(sys)?;
    let k = sys.interval_of(t)?;
    let start = if k == 1 { x0.clone() } else { state_after_impulse(sys, q, x0, w, k - 1)? };
    let t_start = sys.knot(k - 1);
    let law = w.law.on_interval(sys, k)?;
    Ok(sys.semigroup(t - t_start, &start)? + input_integral(sys, q, &law, t_start, t)?)
}

/// Which one-sided value a trajectory sample holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// `x(t_k⁻)` at an impulse time.
    Left,
    /// `x(t_k⁺)` at an impulse time.
    Right,
    /// Away from impulse times.
    Regular,
}

impl Side {
    pub fn code(self) -> &'static str {
        match self {
            Side::Left => "L",
            Side::Right => "R",
            Side::Regular => "-",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub side: Side,
    pub x: StateVector,
}

/// Time-ordered samples with both one-sided values at every impulse time.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub samples: Vec<Sample>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Samples `x(·)` on `grid`, adding both one-sided values at every impulse
/// time. Right values are computed from left values by
/// [`ImpulsiveSystem::apply_jump`].
pub fn simulate(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    x0: &StateVector,
    w: &ControlPair,
    grid: &[f64],
) -> Result<Trajectory> {
    sys.check_state("initial state", x0)?;
    w.check(sys)?;
    for &t in grid {
        sys.check_time(t)?;
    }
    let p = sys.p();

    // Right values after each impulse (index 0 holds x0) and left values.
    let mut right = Vec::with_capacity(p + 1);
    let mut left = Vec::with_capacity(p);
    right.push(x0.clone());
    for k in 1..=p {
        let xl = sys.semigroup(sys.knot(k) - sys.knot(k - 1), &right[k - 1])?
            + interval_input(sys, q, w, k)?;
        let xr = sys.apply_jump(k, &xl, &w.impulses[k - 1])?;
        left.push(xl);
        right.push(xr);
    }

    let mut times: Vec<f64> = grid.to_vec();
    times.extend(&sys.knots()[1..=p]);
    times.sort_by(f64::total_cmp);
    times.dedup();

    let mut samples = Vec::with_capacity(times.len() + p);
    for t in times {
        if let Some(k) = (1..=p).find(|&k| sys.knot(k) == t) {
            samples.push(Sample { t, side: Side::Left, x: left[k - 1].clone() });
            samples.push(Sample { t, side: Side::Right, x: right[k].clone() });
            continue;
        }
        let k = sys.interval_of(t)?;
        let t_start = sys.knot(k - 1);
        let law = w.law.on_interval(sys, k)?;
        let x = sys.semigroup(t - t_start, &right[k - 1])? + input_integral(sys, q, &law, t_start, t)?;
        samples.push(Sample { t, side: Side::Regular, x });
    }
    Ok(Trajectory { samples })
}

/// `ψ(t_k⁺) = ∏_{i=k+1}^{p} S_C*(t_i, t_{i-1}) S*(b - t_p) φ`.
pub fn adjoint_post_impulse(sys: &ImpulsiveSystem, phi: &StateVector, k: usize) -> Result<StateVector> {
    sys.check_stage(k)?;
    sys.check_state("adjoint terminal state", phi)?;
    let p = sys.p();
    let at_tp = sys.semigroup_adjoint(sys.horizon() - sys.last_impulse_time(), phi)?;
    sys.product_propagator_adjoint(p, k + 1, &at_tp)
}

/// Adjoint value at the right end of interval `k`: `ψ(t_k⁻)` for `k ≤ p`
/// and `φ` for `k = p + 1`. On `(t_{k-1}, t_k]`, `ψ(t) = S*(t_k - t)` of it.
pub fn adjoint_interval_anchor(sys: &ImpulsiveSystem, phi: &StateVector, k: usize) -> Result<StateVector> {
    let p = sys.p();
    if k == 0 || k > p + 1 {
        return Err(Error::StageOutOfRange { index: k, p });
    }
    if k == p + 1 {
        sys.check_state("adjoint terminal state", phi)?;
        return Ok(phi.clone());
    }
    let post = adjoint_post_impulse(sys, phi, k)?;
    Ok(&post + sys.stage(k)?.c.tr_mul(&post))
}

/// `ψ(t)` for `0 ≤ t ≤ b`, the solution of the adjoint equation with
/// `ψ(b) = φ`.
pub fn adjoint_solution(sys: &ImpulsiveSystem, phi: &StateVector, t: f64) -> Result<StateVector> {
    let k = sys.interval_of(t)?;
    let anchor = adjoint_interval_anchor(sys, phi, k)?;
    sys.semigroup_adjoint(sys.knot(k) - t, &anchor)
}

/// Both sides of the duality identity
/// `⟨x(b), ψ(b)⟩ - ⟨x(0), ψ(0)⟩ = ∫⟨u, B*ψ⟩ + Σ⟨v_k, D_k*ψ(t_k⁺)⟩`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityTerms {
    pub lhs: f64,
    pub rhs: f64,
    /// `⟨x(b), ψ(b)⟩`.
    pub terminal_pairing: f64,
}

impl DualityTerms {
    pub fn gap(&self) -> f64 {
        self.lhs - self.rhs
    }
}

pub fn duality_terms(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    x0: &StateVector,
    w: &ControlPair,
    phi: &StateVector,
) -> Result<DualityTerms> {
    sys.check_state("adjoint terminal state", phi)?;
    let xb = mild_solution(sys, q, x0, w, sys.horizon())?;
    let psi0 = adjoint_solution(sys, phi, 0.0)?;
    let terminal_pairing = xb.dot(phi);
    let lhs = terminal_pairing - x0.dot(&psi0);

    let mut rhs = 0.0;
    for k in 1..=sys.p() + 1 {
        let law = w.law.on_interval(sys, k)?;
        let anchor = adjoint_interval_anchor(sys, phi, k)?;
        let end = sys.knot(k);
        for node in q.nodes(sys.knot(k - 1), end, &law.breakpoints()) {
            let psi = sys.semigroup_adjoint(end - node.s, &anchor)?;
            let b_psi = sys.b_matrix().tr_mul(&psi);
            rhs += node.w * law.eval(sys, node.s)?.dot(&b_psi);
        }
    }
    for k in 1..=sys.p() {
        let post = adjoint_post_impulse(sys, phi, k)?;
        rhs += w.impulses[k - 1].dot(&sys.stage(k)?.d.tr_mul(&post));
    }
    Ok(DualityTerms { lhs, rhs, terminal_pairing })
}

/// Left side minus right side of the duality identity; vanishes up to
/// quadrature error.
pub fn duality_gap(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    x0: &StateVector,
    w: &ControlPair,
    phi: &StateVector,
) -> Result<f64> {
    Ok(duality_terms(sys, q, x0, w, phi)?.gap())
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    use super::*;
    use crate::control::{ControlLaw, PiecewiseConstant};
    use crate::fixtures;

    fn unit_control(sys: &ImpulsiveSystem) -> ControlPair {
        ControlPair::new(
            sys,
            ControlLaw::PiecewiseConstant(PiecewiseConstant::constant(sys, dvector![1.0]).unwrap()),
            vec![dvector![1.0]; sys.p()],
        )
        .unwrap()
    }

    #[test]
    fn state_after_impulse_examples() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let zero = ControlPair::zero(&sys);
        assert_relative_eq!(state_after_impulse(&sys, &q, &dvector![1.0], &zero, 1).unwrap()[0], 1.5);
        let x = state_after_impulse(&sys, &q, &dvector![0.0], &unit_control(&sys), 1).unwrap();
        assert_relative_eq!(x[0], 1.75, epsilon = 1e-14);
        assert_eq!(state_after_impulse(&sys, &q, &dvector![0.0], &zero, 1).unwrap(), dvector![0.0]);
        assert!(state_after_impulse(&sys, &q, &dvector![0.0], &zero, 2).is_err());
    }

    #[test]
    fn mild_solution_examples() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let zero = ControlPair::zero(&sys);
        assert_relative_eq!(mild_solution(&sys, &q, &dvector![1.0], &zero, 1.0).unwrap()[0], 1.5);
        let x = mild_solution(&sys, &q, &dvector![0.0], &unit_control(&sys), 1.0).unwrap();
        assert_relative_eq!(x[0], 2.25, epsilon = 1e-14);
        assert_eq!(mild_solution(&sys, &q, &dvector![1.0], &zero, 0.5).unwrap(), dvector![1.0]);
        assert!(mild_solution(&sys, &q, &dvector![1.0], &zero, 1.01).is_err());
        assert!(mild_solution(&sys, &q, &dvector![1.0, 0.0], &zero, 0.3).is_err());
    }

    #[test]
    fn simulate_s1_grid() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let traj = simulate(&sys, &q, &dvector![1.0], &ControlPair::zero(&sys), &[0.0, 0.5, 1.0]).unwrap();
        let got: Vec<(f64, Side, f64)> = traj.samples.iter().map(|s| (s.t, s.side, s.x[0])).collect();
        assert_eq!(
            got,
            vec![
                (0.0, Side::Regular, 1.0),
                (0.5, Side::Left, 1.0),
                (0.5, Side::Right, 1.5),
                (1.0, Side::Regular, 1.5)
            ]
        );
    }

    #[test]
    fn simulate_s2_constant_input() {
        let sys = fixtures::s2();
        let q = QuadratureConfig::default();
        let traj = simulate(&sys, &q, &dvector![0.0, 0.0], &unit_control(&sys), &[1.0]).unwrap();
        assert_eq!(traj.len(), 1);
        assert_relative_eq!(traj.samples[0].x, dvector![1.0, 0.0], epsilon = 1e-14);
    }

    #[test]
    fn simulate_always_brackets_impulses() {
        let sys = fixtures::two_stage_scalar(1.5, 2.0);
        let q = QuadratureConfig::default();
        let traj = simulate(&sys, &q, &dvector![0.0], &ControlPair::zero(&sys), &[0.9, 0.1, 0.9]).unwrap();
        let sides: Vec<Side> = traj.samples.iter().map(|s| s.side).collect();
        assert_eq!(sides, vec![Side::Regular, Side::Left, Side::Right, Side::Left, Side::Right, Side::Regular]);
        assert!(traj.samples.iter().all(|s| s.x[0] == 0.0));
        assert!(simulate(&sys, &q, &dvector![0.0], &ControlPair::zero(&sys), &[-0.1]).is_err());
    }

    #[test]
    fn adjoint_examples() {
        let sys = fixtures::s1();
        assert_relative_eq!(adjoint_solution(&sys, &dvector![1.0], 0.75).unwrap()[0], 1.0);
        assert_relative_eq!(adjoint_solution(&sys, &dvector![1.0], 0.25).unwrap()[0], 1.5);
        assert_relative_eq!(adjoint_solution(&sys, &dvector![1.0], 0.5).unwrap()[0], 1.5);
        assert_relative_eq!(adjoint_post_impulse(&sys, &dvector![1.0], 1).unwrap()[0], 1.0);
        let two = fixtures::two_stage_scalar(1.5, 2.0);
        assert_relative_eq!(adjoint_post_impulse(&two, &dvector![1.0], 1).unwrap()[0], 2.0);
        assert_relative_eq!(adjoint_solution(&two, &dvector![1.0], 0.0).unwrap()[0], 3.0);
        assert!(adjoint_post_impulse(&two, &dvector![1.0], 3).is_err());
    }

    #[test]
    fn trivial_adjoint_is_constant() {
        let sys = fixtures::two_stage_scalar(1.0, 1.0);
        for &t in &[0.0, 0.2, 1.0 / 3.0, 0.5, 1.0] {
            assert_eq!(adjoint_solution(&sys, &dvector![4.0], t).unwrap(), dvector![4.0]);
        }
        assert_eq!(adjoint_post_impulse(&sys, &dvector![4.0], 2).unwrap(), dvector![4.0]);
    }

    #[test]
    fn duality_worked_example() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let terms = duality_terms(&sys, &q, &dvector![0.0], &unit_control(&sys), &dvector![1.0]).unwrap();
        assert_relative_eq!(terms.lhs, 2.25, epsilon = 1e-14);
        assert_relative_eq!(terms.rhs, 2.25, epsilon = 1e-14);
    }

    #[test]
    fn duality_with_zero_control() {
        let sys = fixtures::two_stage_scalar(1.5, -0.5);
        let q = QuadratureConfig::default();
        let terms = duality_terms(&sys, &q, &dvector![1.3], &ControlPair::zero(&sys), &dvector![0.7]).unwrap();
        assert_eq!(terms.rhs, 0.0);
        assert!(terms.lhs.abs() < 1e-15);
    }
}
