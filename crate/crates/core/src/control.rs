//! Control pairs `w = (u(·), {v_k})`.

use crate::propagation::adjoint_interval_anchor;
use crate::quadrature::QuadratureConfig;
use crate::system::ImpulsiveSystem;
use crate::{Error, Result, StateVector};

/// Piecewise-constant distributed control. Each impulse subinterval
/// `[t_{k-1}, t_k]` carries its own uniform grid of cells, so no cell
/// straddles an impulse time.
#[derive(Debug, Clone, PartialEq)]
pub struct PiecewiseConstant {
    knots: Vec<f64>,
    cells: Vec<Vec<StateVector>>,
}

impl PiecewiseConstant {
    /// `cells[k-1]` holds the values on interval `k`, in time order.
    pub fn new(sys: &ImpulsiveSystem, cells: Vec<Vec<StateVector>>) -> Result<Self> {
        let intervals = sys.p() + 1;
        if cells.len() != intervals {
            return Err(Error::InvalidControl(format!(
                "expected sample grids for {intervals} subintervals, got {}",
                cells.len()
            )));
        }
        for (k, grid) in cells.iter().enumerate() {
            if grid.is_empty() {
                return Err(Error::InvalidControl(format!("subinterval {} has no cells", k + 1)));
            }
            for value in grid {
                if value.len() != sys.m_u() {
                    return Err(Error::InvalidControl(format!(
                        "control value of length {} on subinterval {}, expected {}",
                        value.len(),
                        k + 1,
                        sys.m_u()
                    )));
                }
                if value.iter().any(|v| !v.is_finite()) {
                    return Err(Error::InvalidControl(format!(
                        "non-finite control value on subinterval {}",
                        k + 1
                    )));
                }
            }
        }
        Ok(PiecewiseConstant { knots: sys.knots().to_vec(), cells })
    }

    /// The same value on the whole horizon.
    pub fn constant(sys: &ImpulsiveSystem, value: StateVector) -> Result<Self> {
        Self::new(sys, vec![vec![value]; sys.p() + 1])
    }

    pub fn cells(&self) -> &[Vec<StateVector>] {
        &self.cells
    }

    /// Value on interval `k` at time `t`.
    fn eval_on(&self, k: usize, t: f64) -> &StateVector {
        let grid = &self.cells[k - 1];
        let (lo, hi) = (self.knots[k - 1], self.knots[k]);
        let frac = ((t - lo) / (hi - lo)).clamp(0.0, 1.0);
        let idx = ((frac * grid.len() as f64) as usize).min(grid.len() - 1);
        &grid[idx]
    }

    /// Interior cell boundaries of interval `k`.
    fn breakpoints(&self, k: usize) -> Vec<f64> {
        let cells = self.cells[k - 1].len();
        let (lo, hi) = (self.knots[k - 1], self.knots[k]);
        (1..cells).map(|j| lo + (hi - lo) * j as f64 / cells as f64).collect()
    }

    fn matches(&self, sys: &ImpulsiveSystem) -> bool {
        self.knots == sys.knots()
            && self.cells.first().and_then(|g| g.first()).map(|v| v.len()) == Some(sys.m_u())
    }
}

/// The distributed part `u(·)` of a control pair.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlLaw {
    PiecewiseConstant(PiecewiseConstant),
    /// `u(t) = B* ψ(t)`, where `ψ` solves the adjoint equation with
    /// terminal value `phi`.
    AdjointFeedback { phi: StateVector },
}

/// A control law restricted to one impulse subinterval, ready for cheap
/// repeated evaluation at quadrature nodes.
pub(crate) enum IntervalLaw<'a> {
    Samples { law: &'a PiecewiseConstant, k: usize },
    /// `u(s) = Bᵀ S*(end - s) anchor`.
    Feedback { anchor: StateVector, end: f64 },
}

impl IntervalLaw<'_> {
    pub(crate) fn eval(&self, sys: &ImpulsiveSystem, s: f64) -> Result<StateVector> {
        match self {
            IntervalLaw::Samples { law, k } => Ok(law.eval_on(*k, s).clone()),
            IntervalLaw::Feedback { anchor, end } => {
                let psi = sys.semigroup_adjoint(end - s, anchor)?;
                Ok(sys.b_matrix().tr_mul(&psi))
            }
        }
    }

    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        match self {
            IntervalLaw::Samples { law, k } => law.breakpoints(*k),
            IntervalLaw::Feedback { .. } => Vec::new(),
        }
    }
}

impl ControlLaw {
    pub fn zero(sys: &ImpulsiveSystem) -> Self {
        ControlLaw::PiecewiseConstant(
            PiecewiseConstant::constant(sys, StateVector::zeros(sys.m_u()))
                .expect("zero control is valid"),
        )
    }

    pub(crate) fn on_interval(&self, sys: &ImpulsiveSystem, k: usize) -> Result<IntervalLaw<'_>> {
        match self {
            ControlLaw::PiecewiseConstant(law) => Ok(IntervalLaw::Samples { law, k }),
            ControlLaw::AdjointFeedback { phi } => Ok(IntervalLaw::Feedback {
                anchor: adjoint_interval_anchor(sys, phi, k)?,
                end: sys.knot(k),
            }),
        }
    }

    /// `u(t)`, using the interval `(t_{k-1}, t_k]` containing `t`.
    pub fn eval(&self, sys: &ImpulsiveSystem, t: f64) -> Result<StateVector> {
        let k = sys.interval_of(t)?;
        self.on_interval(sys, k)?.eval(sys, t)
    }

    pub(crate) fn check(&self, sys: &ImpulsiveSystem) -> Result<()> {
        match self {
            ControlLaw::PiecewiseConstant(law) if !law.matches(sys) => Err(Error::InvalidControl(
                "sample grid does not match the system's impulse times or input dimension".into(),
            )),
            ControlLaw::AdjointFeedback { phi } => sys.check_state("adjoint feedback state", phi),
            _ => Ok(()),
        }
    }
}

/// `w = (u(·), {v_k}_{k=1}^p)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPair {
    pub law: ControlLaw,
    pub impulses: Vec<StateVector>,
}

impl ControlPair {
    pub fn new(sys: &ImpulsiveSystem, law: ControlLaw, impulses: Vec<StateVector>) -> Result<Self> {
        let pair = ControlPair { law, impulses };
        pair.check(sys)?;
        Ok(pair)
    }

    pub fn zero(sys: &ImpulsiveSystem) -> Self {
        ControlPair {
            law: ControlLaw::zero(sys),
            impulses: vec![StateVector::zeros(sys.m_u()); sys.p()],
        }
    }

    pub(crate) fn check(&self, sys: &ImpulsiveSystem) -> Result<()> {
        self.law.check(sys)?;
        if self.impulses.len() != sys.p() {
            return Err(Error::InvalidControl(format!(
                "expected {} impulse vectors, got {}",
                sys.p(),
                self.impulses.len()
            )));
        }
        for (k, v) in self.impulses.iter().enumerate() {
            if v.len() != sys.m_u() || v.iter().any(|x| !x.is_finite()) {
                return Err(Error::InvalidControl(format!(
                    "impulse control v_{} must be a finite vector of length {}",
                    k + 1,
                    sys.m_u()
                )));
            }
        }
        Ok(())
    }
}

/// `⟨w₁, w₂⟩₁ = ∫_0^b ⟨u₁, u₂⟩ ds + Σ_k ⟨v₁ₖ, v₂ₖ⟩`.
pub fn control_inner(
    sys: &ImpulsiveSystem,
    q: &QuadratureConfig,
    w1: &ControlPair,
    w2: &ControlPair,
) -> Result<f64> {
    w1.check(sys)?;
    w2.check(sys)?;
    let mut total = 0.0;
    for k in 1..=sys.p() + 1 {
        let l1 = w1.law.on_interval(sys, k)?;
        let l2 = w2.law.on_interval(sys, k)?;
        let mut breaks = l1.breakpoints();
        breaks.extend(l2.breakpoints());
        for node in q.nodes(sys.knot(k - 1), sys.knot(k), &breaks) {
            total += node.w * l1.eval(sys, node.s)?.dot(&l2.eval(sys, node.s)?);
        }
    }
    let impulses: f64 = w1.impulses.iter().zip(&w2.impulses).map(|(a, b)| a.dot(b)).sum();
    Ok(total + impulses)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    use super::*;
    use crate::fixtures;

    #[test]
    fn grid_lookup_respects_cells() {
        let sys = fixtures::s1();
        let law = PiecewiseConstant::new(
            &sys,
            vec![vec![dvector![1.0], dvector![2.0]], vec![dvector![3.0]]],
        )
        .unwrap();
        let law = ControlLaw::PiecewiseConstant(law);
        assert_eq!(law.eval(&sys, 0.0).unwrap()[0], 1.0);
        assert_eq!(law.eval(&sys, 0.2).unwrap()[0], 1.0);
        assert_eq!(law.eval(&sys, 0.3).unwrap()[0], 2.0);
        assert_eq!(law.eval(&sys, 0.5).unwrap()[0], 2.0);
        assert_eq!(law.eval(&sys, 0.75).unwrap()[0], 3.0);
        assert!(law.eval(&sys, 1.5).is_err());
    }

    #[test]
    fn rejects_misaligned_grids() {
        let sys = fixtures::s1();
        assert!(PiecewiseConstant::new(&sys, vec![vec![dvector![1.0]]]).is_err());
        assert!(PiecewiseConstant::new(&sys, vec![vec![dvector![1.0]], vec![]]).is_err());
        assert!(PiecewiseConstant::new(&sys, vec![vec![dvector![1.0, 2.0]], vec![dvector![1.0]]]).is_err());
        let other = fixtures::two_stage_scalar(1.0, 1.0);
        let law = ControlLaw::PiecewiseConstant(PiecewiseConstant::constant(&other, dvector![1.0]).unwrap());
        assert!(ControlPair::new(&sys, law, vec![dvector![0.0]]).is_err());
    }

    #[test]
    fn rejects_wrong_impulse_count() {
        let sys = fixtures::s1();
        assert!(ControlPair::new(&sys, ControlLaw::zero(&sys), vec![]).is_err());
        assert!(ControlPair::new(&sys, ControlLaw::zero(&sys), vec![dvector![f64::NAN]]).is_err());
    }

    #[test]
    fn inner_product_of_constants() {
        let sys = fixtures::s1();
        let q = QuadratureConfig::default();
        let one = ControlPair::new(
            &sys,
            ControlLaw::PiecewiseConstant(PiecewiseConstant::constant(&sys, dvector![1.0]).unwrap()),
            vec![dvector![2.0]],
        )
        .unwrap();
        let feedback = ControlPair::new(&sys, ControlLaw::AdjointFeedback { phi: dvector![1.0] }, vec![dvector![1.0]])
            .unwrap();
        assert_relative_eq!(control_inner(&sys, &q, &one, &one).unwrap(), 5.0, epsilon = 1e-14);
        // u = 1.5 on (0, 0.5], 1 on (0.5, 1]
        assert_relative_eq!(control_inner(&sys, &q, &one, &feedback).unwrap(), 1.25 + 2.0, epsilon = 1e-14);
    }
}
