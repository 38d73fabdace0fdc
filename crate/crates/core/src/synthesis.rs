//! Regularized minimum-energy steering.
//!
//! For `ε > 0` the functional
//! `J_ε(φ) = ½‖M*φ‖² + ½ε‖φ‖² - ⟨φ, h - x_free⟩`
//! has the unique minimizer `φ̂ = (εI + W)⁻¹(h - x_free)`. Driving the system
//! with `M*φ̂` lands at `x(b) = x_free + Wφ̂`, so the terminal error is exactly
//! `x(b) - h = -εφ̂`, whether or not the system is controllable.

use nalgebra::SymmetricEigen;

use crate::control::{ControlLaw, ControlPair};
use crate::gramian::{apply_m_star, gramian_set, GramianSet};
use crate::linalg::{regularized_solve, symmetrize};
use crate::propagation::mild_solution;
use crate::quadrature::QuadratureConfig;
use crate::system::ImpulsiveSystem;
use crate::{Error, Matrix, Result, StateVector};

/// Relative change of the terminal error below which the schedule driver
/// declares a plateau.
const PLATEAU_REL_CHANGE: f64 = 1e-6;

/// `S(b - t_p) ∏_{j=p}^{1} S_C(t_j, t_{j-1}) x0`, the terminal state without
/// any control.
pub fn free_final_state(sys: &ImpulsiveSystem, x0: &StateVector) -> Result<StateVector> {
    sys.check_state("initial state", x0)?;
    let after = sys.product_propagator(sys.p(), 1, x0)?;
    sys.semigroup(sys.horizon() - sys.last_impulse_time(), &after)
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon > 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("epsilon must be positive and finite, got {epsilon}")))
    }
}

/// Summed mode by mode in the eigenbasis of `W`: near-singular `W` makes
/// `φ` large, and the entrywise form `Σ W_ij φ_i φ_j` then loses every
/// significant digit to cancellation.
fn functional(w: &Matrix, phi: &StateVector, drive: &StateVector, epsilon: f64) -> f64 {
    let eig = SymmetricEigen::new(symmetrize(w));
    let c = eig.eigenvectors.tr_mul(phi);
    let g = eig.eigenvectors.tr_mul(drive);
    (0..c.len()).map(|i| 0.5 * (eig.eigenvalues[i] + epsilon) * c[i] * c[i] - c[i] * g[i]).sum()
}

/// `J_ε(φ)`, with `‖M*φ‖²` evaluated as `⟨Wφ, φ⟩`.
pub fn j_epsilon(
    sys: &ImpulsiveSystem,
    w: &Matrix,
    phi: &StateVector,
    h: &StateVector,
    x0: &StateVector,
    epsilon: f64,
) -> Result<f64> {
    check_epsilon(epsilon)?;
    sys.check_state("phi", phi)?;
    sys.check_state("target", h)?;
    let drive = h - free_final_state(sys, x0)?;
    Ok(functional(w, phi, &drive, epsilon))
}

/// `φ̂_ε = (εI + W)⁻¹(h - x_free)`.
pub fn phi_hat(
    sys: &ImpulsiveSystem,
    w: &Matrix,
    epsilon: f64,
    h: &StateVector,
    x0: &StateVector,
) -> Result<StateVector> {
    check_epsilon(epsilon)?;
    sys.check_state("target", h)?;
    let drive = h - free_final_state(sys, x0)?;
    regularized_solve(w, epsilon, &drive)
}

/// The steering control `(u^ε, {v_k^ε}) = M*φ̂`.
pub fn synthesize_control(sys: &ImpulsiveSystem, phi_hat: &StateVector) -> Result<ControlPair> {
    apply_m_star(sys, phi_hat)
}

/// Whether impulse controls are decision variables or fixed data.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ImpulseMode {
    /// `v_k` are synthesized along with `u`; the full `W` is used.
    #[default]
    Free,
    /// `v_k` are held at the given values; only `Θ + Γ` is used and the
    /// fixed impulses are folded into the uncontrolled terminal state.
    Fixed(Vec<StateVector>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisResult {
    pub epsilon: f64,
    pub phi_hat: StateVector,
    pub control: ControlPair,
    /// `-ε φ̂`.
    pub predicted_error: StateVector,
    /// `x_ε(b) - h` from forward simulation.
    pub achieved_error: StateVector,
    pub terminal_state: StateVector,
    pub j_value: f64,
}

impl SynthesisResult {
    /// `‖achieved_error - predicted_error‖`.
    pub fn identity_residual(&self) -> f64 {
        (&self.achieved_error - &self.predicted_error).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    ToleranceMet,
    Plateau,
    ScheduleExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleOutcome {
    /// `(ε, ‖x_ε(b) - h‖)` for every ε tried.
    pub trace: Vec<(f64, f64)>,
    pub result: SynthesisResult,
    pub stop: StopReason,
}

/// Gramians assembled once, reused across targets and ε values.
#[derive(Debug, Clone)]
pub struct Steering<'a> {
    sys: &'a ImpulsiveSystem,
    q: QuadratureConfig,
    gramians: GramianSet,
    mode: ImpulseMode,
    w: Matrix,
}

impl<'a> Steering<'a> {
    pub fn new(sys: &'a ImpulsiveSystem, q: &QuadratureConfig, mode: ImpulseMode) -> Result<Self> {
        if let ImpulseMode::Fixed(v) = &mode {
            ControlPair::new(sys, ControlLaw::zero(sys), v.clone())?;
        }
        let gramians = gramian_set(sys, q)?;
        let w = match mode {
            ImpulseMode::Free => gramians.total.clone(),
            ImpulseMode::Fixed(_) => gramians.distributed(),
        };
        Ok(Steering { sys, q: q.clone(), gramians, mode, w })
    }

    pub fn gramians(&self) -> &GramianSet {
        &self.gramians
    }

    /// The Gramian of the decision variables.
    pub fn synthesis_gramian(&self) -> &Matrix {
        &self.w
    }

    /// Terminal state reached with no distributed control (and, in fixed
    /// mode, the fixed impulses).
    pub fn uncontrolled_terminal(&self, x0: &StateVector) -> Result<StateVector> {
        match &self.mode {
            ImpulseMode::Free => free_final_state(self.sys, x0),
            ImpulseMode::Fixed(v) => {
                let w = ControlPair::new(self.sys, ControlLaw::zero(self.sys), v.clone())?;
                mild_solution(self.sys, &self.q, x0, &w, self.sys.horizon())
            }
        }
    }

    pub fn steer(&self, x0: &StateVector, h: &StateVector, epsilon: f64) -> Result<SynthesisResult> {
        check_epsilon(epsilon)?;
        self.sys.check_state("target", h)?;
        let drive = h - self.uncontrolled_terminal(x0)?;
        let phi = regularized_solve(&self.w, epsilon, &drive)?;
        let mut control = synthesize_control(self.sys, &phi)?;
        if let ImpulseMode::Fixed(v) = &self.mode {
            control.impulses = v.clone();
        }
        let terminal_state = mild_solution(self.sys, &self.q, x0, &control, self.sys.horizon())?;
        Ok(SynthesisResult {
            epsilon,
            predicted_error: &phi * -epsilon,
            achieved_error: &terminal_state - h,
            terminal_state,
            j_value: functional(&self.w, &phi, &drive, epsilon),
            phi_hat: phi,
            control,
        })
    }

    /// Walks a decreasing ε schedule until `‖x_ε(b) - h‖ ≤ tolerance`, the
    /// error stops improving, or the schedule runs out.
    pub fn steer_schedule(
        &self,
        x0: &StateVector,
        h: &StateVector,
        schedule: &[f64],
        tolerance: f64,
    ) -> Result<ScheduleOutcome> {
        if schedule.is_empty() {
            return Err(Error::InvalidParameter("empty epsilon schedule".into()));
        }
        let mut trace: Vec<(f64, f64)> = Vec::with_capacity(schedule.len());
        let mut last = None;
        for &epsilon in schedule {
            let result = self.steer(x0, h, epsilon)?;
            let err = result.achieved_error.norm();
            trace.push((epsilon, err));
            if err <= tolerance {
                return Ok(ScheduleOutcome { trace, result, stop: StopReason::ToleranceMet });
            }
            if trace.len() >= 3 {
                let tail = &trace[trace.len() - 3..];
                if tail.windows(2).all(|w| (w[0].1 - w[1].1).abs() <= PLATEAU_REL_CHANGE * w[0].1) {
                    return Ok(ScheduleOutcome { trace, result, stop: StopReason::Plateau });
                }
            }
            last = Some(result);
        }
        let result = last.expect("schedule is non-empty");
        Ok(ScheduleOutcome { trace, result, stop: StopReason::ScheduleExhausted })
    }
}

/// Full pipeline with free impulse controls.
pub fn steer(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    x0: &StateVector,
    h: &StateVector,
    epsilon: f64,
) -> Result<SynthesisResult> {
    Steering::new(sys, q, ImpulseMode::Free)?.steer(x0, h, epsilon)
}
