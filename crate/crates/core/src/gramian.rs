//! Controllability Gramians of the impulsive system and the actions of the
//! reachability operator `M` and its adjoint.
//!
//! `M w = x(b; 0, w)` maps a control pair to the terminal state from rest.
//! `MM*` splits into four nonnegative pieces:
//!
//! - `Γ`: distributed control on the last interval `[t_p, b]`,
//! - `Γ̃`: the last impulse control `D_p`,
//! - `Θ`: distributed control on `[0, t_p]`, pushed through later jumps,
//! - `Θ̃`: impulse controls `D_1..D_{p-1}`, pushed through later jumps.
//!
//! With no impulses only `Γ` (over `[0, b]`) survives.

use crate::control::{ControlLaw, ControlPair};
use crate::linalg::symmetrize;
use crate::propagation::{adjoint_post_impulse, interval_input};
use crate::quadrature::QuadratureConfig;
use crate::system::ImpulsiveSystem;
use crate::{Matrix, Result, StateVector};

#[derive(Debug, Clone, PartialEq)]
pub struct GramianSet {
    pub theta: Matrix,
    pub gamma: Matrix,
    pub theta_tilde: Matrix,
    pub gamma_tilde: Matrix,
    /// `theta + gamma + theta_tilde + gamma_tilde`, summed in that order.
    pub total: Matrix,
}

impl GramianSet {
    /// The four pieces with their conventional names.
    pub fn named(&self) -> [(&'static str, &Matrix); 4] {
        [
            ("theta", &self.theta),
            ("gamma", &self.gamma),
            ("theta_tilde", &self.theta_tilde),
            ("gamma_tilde", &self.gamma_tilde),
        ]
    }

    /// `Θ + Γ`: the part generated by the distributed control alone.
    pub fn distributed(&self) -> Matrix {
        &self.theta + &self.gamma
    }
}

/// `∫_{t_{k-1}}^{t_k} P (I + C_k) S(t_k - s) B Bᵀ S*(t_k - s) (I + C_k)ᵀ Pᵀ ds`
/// where `P` pushes a state just after `t_k` to `b`. For `k = p + 1` the jump
/// factor is absent and `P = I`.
fn interval_gramian(sys: &ImpulsiveSystem, q: &QuadratureConfig, k: usize) -> Result<Matrix> {
    let n = sys.n();
    let p = sys.p();
    let (lo, hi) = (sys.knot(k - 1), sys.knot(k));
    let push = if k <= p {
        let c = &sys.stage(k)?.c;
        let after = sys.push_to_horizon_matrix(k + 1)?;
        Some(&after + &after * c)
    } else {
        None
    };
    let mut acc = Matrix::zeros(n, n);
    for node in q.nodes(lo, hi, &[]) {
        let sb = sys.generator().apply_columns(hi - node.s, sys.b_matrix())?;
        let g = match &push {
            Some(push) => push * sb,
            None => sb,
        };
        acc += (&g * g.transpose()) * node.w;
    }
    Ok(acc)
}

/// `Γ = ∫_{t_p}^{b} S(b-s) B B* S*(b-s) ds` (over `[0, b]` when `p = 0`).
pub fn gamma_gramian(sys: &ImpulsiveSystem, q: &QuadratureConfig) -> Result<Matrix> {
    Ok(symmetrize(&interval_gramian(sys, q, sys.p() + 1)?))
}

/// `Γ̃ = S(b-t_p) D_p D_p* S*(b-t_p)`; zero when `p = 0`.
pub fn gamma_tilde_gramian(sys: &ImpulsiveSystem) -> Result<Matrix> {
    let n = sys.n();
    let p = sys.p();
    if p == 0 {
        return Ok(Matrix::zeros(n, n));
    }
    let f = sys
        .generator()
        .apply_columns(sys.horizon() - sys.last_impulse_time(), &sys.stage(p)?.d)?;
    Ok(symmetrize(&(&f * f.transpose())))
}

/// `Θ = Σ_{i=1}^{p} S(b-t_p) ∏_{j=p}^{i+1} S_C ∫ S_C(t_i,s) B B* S_C*(t_i,s) ds (…)*`.
pub fn theta_gramian(sys: &ImpulsiveSystem, q: &QuadratureConfig) -> Result<Matrix> {
    let n = sys.n();
    let mut acc = Matrix::zeros(n, n);
    for i in 1..=sys.p() {
        acc += interval_gramian(sys, q, i)?;
    }
    Ok(symmetrize(&acc))
}

/// `Θ̃ = Σ_{i=2}^{p} S(b-t_p) ∏_{j=p}^{i} S_C D_{i-1} D_{i-1}* (…)*`; zero
/// when `p ≤ 1`.
pub fn theta_tilde_gramian(sys: &ImpulsiveSystem) -> Result<Matrix> {
    let n = sys.n();
    let mut acc = Matrix::zeros(n, n);
    for i in 2..=sys.p() {
        let f = sys.push_to_horizon_matrix(i)? * &sys.stage(i - 1)?.d;
        acc += &f * f.transpose();
    }
    Ok(symmetrize(&acc))
}

pub fn gramian_set(sys: &ImpulsiveSystem, q: &QuadratureConfig) -> Result<GramianSet> {
    let theta = theta_gramian(sys, q)?;
    let gamma = gamma_gramian(sys, q)?;
    let theta_tilde = theta_tilde_gramian(sys)?;
    let gamma_tilde = gamma_tilde_gramian(sys)?;
    let total = &theta + &gamma + &theta_tilde + &gamma_tilde;
    Ok(GramianSet { theta, gamma, theta_tilde, gamma_tilde, total })
}

/// `M w`: the terminal state reached from rest under `w`, assembled term by
/// term from the explicit operator formula.
pub fn apply_m(sys: &ImpulsiveSystem, q: &QuadratureConfig, w: &ControlPair) -> Result<StateVector> {
    w.check(sys)?;
    let p = sys.p();
    let last = interval_input(sys, q, w, p + 1)?;
    if p == 0 {
        return Ok(last);
    }
    let mut before_tp = StateVector::zeros(sys.n());
    for i in 1..=p {
        let integral = interval_input(sys, q, w, i)?;
        let jumped = &integral + &sys.stage(i)?.c * &integral;
        before_tp += sys.product_propagator(p, i + 1, &jumped)?;
    }
    for i in 2..=p {
        let dv = &sys.stage(i - 1)?.d * &w.impulses[i - 2];
        before_tp += sys.product_propagator(p, i, &dv)?;
    }
    before_tp += &sys.stage(p)?.d * &w.impulses[p - 1];
    Ok(sys.semigroup(sys.horizon() - sys.last_impulse_time(), &before_tp)? + last)
}

/// `M* φ = (B* ψ(·), {D_k* ψ(t_k⁺)})` where `ψ` is the adjoint solution with
/// `ψ(b) = φ`. The distributed part stays in feedback form and is evaluated
/// on demand.
pub fn apply_m_star(sys: &ImpulsiveSystem, phi: &StateVector) -> Result<ControlPair> {
    sys.check_state("adjoint terminal state", phi)?;
    let impulses = (1..=sys.p())
        .map(|k| Ok(sys.stage(k)?.d.tr_mul(&adjoint_post_impulse(sys, phi, k)?)))
        .collect::<Result<Vec<_>>>()?;
    Ok(ControlPair { law: ControlLaw::AdjointFeedback { phi: phi.clone() }, impulses })
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    use super::*;
    use crate::control::PiecewiseConstant;
    use crate::fixtures;
    use crate::linalg::asymmetry;
    use crate::system::{GeneratorSpec, ImpulseStage, SystemDefinition};

    #[test]
    fn s1_closed_forms() {
        let g = gramian_set(&fixtures::s1(), &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(g.gamma[(0, 0)], 0.5, epsilon = 1e-14);
        assert_relative_eq!(g.theta[(0, 0)], 1.125, epsilon = 1e-14);
        assert_relative_eq!(g.gamma_tilde[(0, 0)], 1.0, epsilon = 1e-14);
        assert_eq!(g.theta_tilde[(0, 0)], 0.0);
        assert_relative_eq!(g.total[(0, 0)], 2.625, epsilon = 1e-14);
    }

    #[test]
    fn s2_reduces_to_single_gramian() {
        let sys = fixtures::s2();
        let q = QuadratureConfig::default();
        let g = gramian_set(&sys, &q).unwrap();
        assert_relative_eq!(g.total, dmatrix![1.0, 0.0; 0.0, 0.0], epsilon = 1e-14);
        assert_eq!(g.total, gamma_gramian(&sys, &q).unwrap());
        assert_eq!(g.theta, Matrix::zeros(2, 2));
        assert_eq!(g.theta_tilde, Matrix::zeros(2, 2));
        assert_eq!(g.gamma_tilde, Matrix::zeros(2, 2));
    }

    #[test]
    fn zero_inputs_give_zero_gramians() {
        let mut def = fixtures::two_stage_scalar(1.5, 2.0).definition().clone();
        def.b = dmatrix![0.0];
        for stage in &mut def.stages {
            stage.d = dmatrix![0.0];
        }
        let sys = ImpulsiveSystem::new(def).unwrap();
        let g = gramian_set(&sys, &QuadratureConfig::default()).unwrap();
        assert_eq!(g.total, dmatrix![0.0]);
    }

    #[test]
    fn theta_with_identity_input() {
        let sys = ImpulsiveSystem::new(SystemDefinition {
            generator: GeneratorSpec::Dense(Matrix::zeros(2, 2)),
            b: Matrix::identity(2, 2),
            horizon: 1.0,
            stages: vec![ImpulseStage { t: 0.5, c: Matrix::zeros(2, 2), d: Matrix::zeros(2, 2) }],
        })
        .unwrap();
        let theta = theta_gramian(&sys, &QuadratureConfig::default()).unwrap();
        assert_relative_eq!(theta, Matrix::identity(2, 2) * 0.5, epsilon = 1e-14);
    }

    #[test]
    fn theta_tilde_two_stage() {
        let sys = fixtures::two_stage_scalar(1.0, 1.0);
        assert_relative_eq!(theta_tilde_gramian(&sys).unwrap()[(0, 0)], 1.0);
        assert_eq!(theta_tilde_gramian(&fixtures::s1()).unwrap()[(0, 0)], 0.0);
        // Jump factor 2 at t_2 doubles D_1's reach.
        let sys = fixtures::two_stage_scalar(1.0, 2.0);
        assert_relative_eq!(theta_tilde_gramian(&sys).unwrap()[(0, 0)], 4.0);
    }

    #[test]
    fn apply_m_examples() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let w = ControlPair::new(
            &sys,
            ControlLaw::PiecewiseConstant(PiecewiseConstant::constant(&sys, dvector![1.0]).unwrap()),
            vec![dvector![1.0]],
        )
        .unwrap();
        assert_relative_eq!(apply_m(&sys, &q, &w).unwrap()[0], 2.25, epsilon = 1e-14);
        assert_eq!(apply_m(&sys, &q, &ControlPair::zero(&sys)).unwrap(), dvector![0.0]);
    }

    #[test]
    fn apply_m_star_examples() {
        let sys = fixtures::s1();
        let w = apply_m_star(&sys, &dvector![1.0]).unwrap();
        assert_relative_eq!(w.law.eval(&sys, 0.25).unwrap()[0], 1.5);
        assert_relative_eq!(w.law.eval(&sys, 0.5).unwrap()[0], 1.5);
        assert_relative_eq!(w.law.eval(&sys, 0.75).unwrap()[0], 1.0);
        assert_relative_eq!(w.impulses[0][0], 1.0);

        let zero = apply_m_star(&sys, &dvector![0.0]).unwrap();
        assert_eq!(zero.impulses, vec![dvector![0.0]]);
        assert_eq!(zero.law.eval(&sys, 0.3).unwrap(), dvector![0.0]);
    }

    #[test]
    fn mm_star_matches_total_on_s1() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let w = apply_m_star(&sys, &dvector![2.0]).unwrap();
        assert_relative_eq!(apply_m(&sys, &q, &w).unwrap()[0], 2.0 * 2.625, epsilon = 1e-13);
    }

    #[test]
    fn oscillator_gramians_are_symmetric() {
        let sys = ImpulsiveSystem::new(SystemDefinition {
            generator: GeneratorSpec::Dense(dmatrix![0.0, 1.0; -4.0, -0.3]),
            b: dmatrix![0.0; 1.0],
            horizon: 2.0,
            stages: vec![
                ImpulseStage { t: 0.7, c: dmatrix![0.1, 0.2; -0.3, 0.0], d: dmatrix![1.0; 0.0] },
                ImpulseStage { t: 1.3, c: dmatrix![0.0, 0.0; 0.5, -0.2], d: dmatrix![0.5; 0.5] },
            ],
        })
        .unwrap();
        let g = gramian_set(&sys, &QuadratureConfig::default()).unwrap();
        for (_, m) in g.named() {
            assert_eq!(asymmetry(m), 0.0);
            let eigs = crate::linalg::symmetric_eigenvalues(m);
            assert!(eigs[0] >= -1e-10 * eigs[1].abs().max(1.0));
        }
    }
}
