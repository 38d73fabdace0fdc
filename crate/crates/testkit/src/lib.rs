//! Randomized fixtures and an independent time-stepping oracle for the
//! impulsive-control test suites.
//!
//! The oracle never calls the library's propagators: it rebuilds the dense
//! generator from the system data, steps `x' = Ax + Bu` with classical RK4 and
//! applies the jumps `x⁺ = (I + C_k)x⁻ + D_k v_k` exactly.

use impulsive_control::control::{ControlLaw, ControlPair, PiecewiseConstant};
use impulsive_control::system::{GeneratorSpec, ImpulseStage, ImpulsiveSystem, SystemDefinition};
use impulsive_control::{Matrix, StateVector};
use nalgebra::linalg::QR;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub use rand::SeedableRng;

pub type TestRng = ChaCha8Rng;

pub fn rng(seed: u64) -> TestRng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal(rng: &mut TestRng) -> f64 {
    StandardNormal.sample(rng)
}

pub fn random_vector(rng: &mut TestRng, n: usize) -> StateVector {
    StateVector::from_fn(n, |_, _| normal(rng))
}

pub fn random_unit_vector(rng: &mut TestRng, n: usize) -> StateVector {
    loop {
        let v = random_vector(rng, n);
        let norm = v.norm();
        if norm > 1e-3 {
            return v / norm;
        }
    }
}

pub fn random_matrix(rng: &mut TestRng, rows: usize, cols: usize, scale: f64) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| scale * normal(rng))
}

/// Haar-ish random orthogonal matrix (QR of a Gaussian matrix with sign fix).
pub fn random_orthogonal(rng: &mut TestRng, n: usize) -> Matrix {
    let qr = QR::new(random_matrix(rng, n, n, 1.0));
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// `p` sorted impulse times in `(0, b)` separated from each other and from
/// the ends by at least `b / (8(p+1))`.
pub fn random_times(rng: &mut TestRng, b: f64, p: usize) -> Vec<f64> {
    let gap = b / (8.0 * (p + 1) as f64);
    let free = b - gap * (p + 1) as f64;
    let mut cuts: Vec<f64> = (0..p).map(|_| rng.random::<f64>() * free).collect();
    cuts.sort_by(f64::total_cmp);
    cuts.iter().enumerate().map(|(i, c)| c + gap * (i + 1) as f64).collect()
}

fn random_stages(rng: &mut TestRng, n: usize, m_u: usize, b: f64, p: usize) -> Vec<ImpulseStage> {
    random_times(rng, b, p)
        .into_iter()
        .map(|t| ImpulseStage { t, c: random_matrix(rng, n, n, 0.3), d: random_matrix(rng, n, m_u, 1.0) })
        .collect()
}

/// Dense generator with entries `~ N(0, 0.5²)`, horizon in `[0.5, 2]`.
pub fn random_dense_system(rng: &mut TestRng, n: usize, m_u: usize, p: usize) -> ImpulsiveSystem {
    let b = 0.5 + 1.5 * rng.random::<f64>();
    ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::Dense(random_matrix(rng, n, n, 0.5)),
        b: random_matrix(rng, n, m_u, 1.0),
        horizon: b,
        stages: random_stages(rng, n, m_u, b, p),
    })
    .expect("random dense system is valid")
}

/// Rotation-block generator with frequencies in `[0.2, 3]`.
pub fn random_spectral_system(rng: &mut TestRng, modes: usize, m_u: usize, p: usize) -> ImpulsiveSystem {
    let n = 2 * modes;
    let b = 0.5 + 1.5 * rng.random::<f64>();
    let freqs = (0..modes).map(|_| 0.2 + 2.8 * rng.random::<f64>()).collect();
    ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::SpectralBlocks(freqs),
        b: random_matrix(rng, n, m_u, 1.0),
        horizon: b,
        stages: random_stages(rng, n, m_u, b, p),
    })
    .expect("random spectral system is valid")
}

/// Dense or spectral (even coin), `n ≤ max_n`, `p ≤ max_p`, `m_u ≤ 3`.
pub fn random_system(rng: &mut TestRng, max_n: usize, max_p: usize) -> ImpulsiveSystem {
    let p = rng.random_range(0..=max_p);
    let m_u = rng.random_range(1..=3);
    if max_n >= 2 && rng.random_bool(0.5) {
        let modes = rng.random_range(1..=max_n / 2);
        random_spectral_system(rng, modes, m_u, p)
    } else {
        let n = rng.random_range(1..=max_n);
        random_dense_system(rng, n, m_u, p)
    }
}

/// `(A, B)` whose Kalman matrix has rank exactly `rank < n`: block upper
/// triangular with the lower block unreachable, hidden by a random
/// orthogonal similarity.
pub fn rank_deficient_pair(rng: &mut TestRng, n: usize, m_u: usize, rank: usize) -> (Matrix, Matrix) {
    assert!(rank < n, "rank must be below n");
    let mut a = random_matrix(rng, n, n, 1.0);
    let mut b = random_matrix(rng, n, m_u, 1.0);
    for i in rank..n {
        for j in 0..rank {
            a[(i, j)] = 0.0;
        }
        b.row_mut(i).fill(0.0);
    }
    let q = random_orthogonal(rng, n);
    (&q * a * q.transpose(), &q * b)
}

/// A system whose reachable set is a proper subspace, like S2: block
/// triangular `A`, `C_k` and zero lower blocks in `B`, `D_k`, rotated by a
/// random orthogonal similarity. Returns the system and a unit vector
/// orthogonal to every reachable state from zero.
pub fn random_uncontrollable_system(
    rng: &mut TestRng,
    n: usize,
    m_u: usize,
    p: usize,
) -> (ImpulsiveSystem, StateVector) {
    assert!(n >= 2);
    let rank = rng.random_range(1..n);
    let triangular = |rng: &mut TestRng, rows, cols, scale| {
        let mut m = random_matrix(rng, rows, cols, scale);
        for i in rank..rows {
            for j in 0..cols.min(rank) {
                m[(i, j)] = 0.0;
            }
        }
        m
    };
    let lower_zero = |rng: &mut TestRng, cols| {
        let mut m = random_matrix(rng, n, cols, 1.0);
        for i in rank..n {
            m.row_mut(i).fill(0.0);
        }
        m
    };
    let q = random_orthogonal(rng, n);
    let rot = |m: Matrix| &q * m * q.transpose();
    let b = 0.5 + 1.5 * rng.random::<f64>();
    let stages = random_times(rng, b, p)
        .into_iter()
        .map(|t| ImpulseStage {
            t,
            c: rot(triangular(rng, n, n, 0.3)),
            d: &q * lower_zero(rng, m_u),
        })
        .collect();
    let sys = ImpulsiveSystem::new(SystemDefinition {
        generator: GeneratorSpec::Dense(rot(triangular(rng, n, n, 0.5))),
        b: &q * lower_zero(rng, m_u),
        horizon: b,
        stages,
    })
    .expect("uncontrollable system is valid");
    // Reachable states lie in span(q e_1..q e_rank); q e_n is orthogonal.
    (sys, q.column(n - 1).into_owned())
}

/// Random piecewise-constant control with 1..=max_cells cells per interval
/// and random impulse controls.
pub fn random_control(rng: &mut TestRng, sys: &ImpulsiveSystem, max_cells: usize) -> ControlPair {
    let cells = (0..=sys.p())
        .map(|_| {
            let count = rng.random_range(1..=max_cells);
            (0..count).map(|_| random_vector(rng, sys.m_u())).collect()
        })
        .collect();
    let law = PiecewiseConstant::new(sys, cells).expect("random control is valid");
    let impulses = (0..sys.p()).map(|_| random_vector(rng, sys.m_u())).collect();
    ControlPair::new(sys, ControlLaw::PiecewiseConstant(law), impulses).expect("random control pair is valid")
}

/// Dense copy of the generator, built from the raw system data.
pub fn dense_generator(spec: &GeneratorSpec) -> Matrix {
    match spec {
        GeneratorSpec::Dense(a) => a.clone(),
        GeneratorSpec::SpectralBlocks(freqs) => {
            let mut a = Matrix::zeros(2 * freqs.len(), 2 * freqs.len());
            for (i, &m) in freqs.iter().enumerate() {
                a[(2 * i, 2 * i + 1)] = m;
                a[(2 * i + 1, 2 * i)] = -m;
            }
            a
        }
    }
}

/// RK4 integrator for the forward and adjoint equations.
#[derive(Debug, Clone)]
pub struct Rk4Oracle {
    a: Matrix,
    b: Matrix,
    times: Vec<f64>,
    horizon: f64,
    stages: Vec<(Matrix, Matrix)>,
    max_step: f64,
}

impl Rk4Oracle {
    pub const DEFAULT_STEP: f64 = 1e-4;

    pub fn new(sys: &ImpulsiveSystem) -> Self {
        let def = sys.definition();
        Rk4Oracle {
            a: dense_generator(&def.generator),
            b: def.b.clone(),
            times: def.stages.iter().map(|s| s.t).collect(),
            horizon: def.horizon,
            stages: def.stages.iter().map(|s| (s.c.clone(), s.d.clone())).collect(),
            max_step: Self::DEFAULT_STEP,
        }
    }

    pub fn with_step(mut self, max_step: f64) -> Self {
        self.max_step = max_step;
        self
    }

    fn knot(&self, i: usize) -> f64 {
        match i {
            0 => 0.0,
            i if i <= self.times.len() => self.times[i - 1],
            _ => self.horizon,
        }
    }

    /// Steps `x' = sign·(M x + f)` from `t0` to `t1` with constant forcing.
    fn steps(&self, m: &Matrix, f: &StateVector, x: StateVector, len: f64) -> StateVector {
        if len <= 0.0 {
            return x;
        }
        let count = (len / self.max_step).ceil().max(1.0) as usize;
        let h = len / count as f64;
        let rhs = |y: &StateVector| m * y + f;
        let mut y = x;
        for _ in 0..count {
            let k1 = rhs(&y);
            let k2 = rhs(&(&y + &k1 * (h / 2.0)));
            let k3 = rhs(&(&y + &k2 * (h / 2.0)));
            let k4 = rhs(&(&y + &k3 * h));
            y += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        }
        y
    }

    /// `x(t)`, left value at impulse times. Only piecewise-constant laws are
    /// supported, so every step sees a constant input.
    pub fn forward(&self, x0: &StateVector, w: &ControlPair, t: f64) -> StateVector {
        self.forward_at(x0, w, &[t]).pop().expect("one time")
    }

    /// `x(t)` at every requested time (any order), in one sweep.
    pub fn forward_at(&self, x0: &StateVector, w: &ControlPair, times: &[f64]) -> Vec<StateVector> {
        let ControlLaw::PiecewiseConstant(law) = &w.law else {
            panic!("oracle needs a piecewise-constant law");
        };
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[i].total_cmp(&times[j]));
        let mut pending = order.into_iter().peekable();
        let mut out = vec![StateVector::zeros(0); times.len()];

        let p = self.times.len();
        let mut x = x0.clone();
        for k in 1..=p + 1 {
            let (lo, hi) = (self.knot(k - 1), self.knot(k));
            let grid = &law.cells()[k - 1];
            let width = (hi - lo) / grid.len() as f64;
            for (j, value) in grid.iter().enumerate() {
                let c1 = if j + 1 == grid.len() { hi } else { lo + width * (j + 1) as f64 };
                let mut cur = lo + width * j as f64;
                let f = &self.b * value;
                while let Some(&i) = pending.peek() {
                    if times[i] > c1 {
                        break;
                    }
                    x = self.steps(&self.a, &f, x, times[i] - cur);
                    cur = cur.max(times[i]);
                    out[i] = x.clone();
                    pending.next();
                }
                x = self.steps(&self.a, &f, x, c1 - cur);
            }
            if k <= p {
                let (c, d) = &self.stages[k - 1];
                x = &x + c * &x + d * &w.impulses[k - 1];
            }
        }
        assert!(pending.next().is_none(), "sample time outside [0, b]");
        out
    }

    /// `ψ(t)` for the backward equation `ψ' = -Aᵀψ`, `ψ(b) = φ`, with
    /// `ψ(t_k⁻) = (I + C_kᵀ)ψ(t_k⁺)`; left value at impulse times.
    pub fn adjoint(&self, phi: &StateVector, t: f64) -> StateVector {
        self.adjoint_at(phi, &[t]).pop().expect("one time")
    }

    /// `ψ(t)` at every requested time (any order), in one backward sweep.
    pub fn adjoint_at(&self, phi: &StateVector, times: &[f64]) -> Vec<StateVector> {
        let mut order: Vec<usize> = (0..times.len()).collect();
        order.sort_by(|&i, &j| times[j].total_cmp(&times[i]));
        let mut pending = order.into_iter().peekable();
        let mut out = vec![StateVector::zeros(0); times.len()];

        let at = self.a.transpose();
        let zero = StateVector::zeros(phi.len());
        let mut psi = phi.clone();
        for k in (1..=self.times.len() + 1).rev() {
            let (lo, hi) = (self.knot(k - 1), self.knot(k));
            let mut cur = hi;
            // In reversed time the equation reads dψ/dr = Aᵀψ.
            while let Some(&i) = pending.peek() {
                if !(times[i] > lo || (k == 1 && times[i] >= lo)) {
                    break;
                }
                psi = self.steps(&at, &zero, psi, cur - times[i]);
                cur = cur.min(times[i]);
                out[i] = psi.clone();
                pending.next();
            }
            psi = self.steps(&at, &zero, psi, cur - lo);
            if k > 1 {
                let (c, _) = &self.stages[k - 2];
                psi = &psi + c.tr_mul(&psi);
            }
        }
        assert!(pending.next().is_none(), "sample time outside [0, b]");
        out
    }
}

/// `max |a_i - b_i| / max(1, ‖b‖_∞)`.
pub fn relative_error(a: &StateVector, b: &StateVector) -> f64 {
    (a - b).amax() / b.amax().max(1.0)
}
