//! Pure-state k-cycle discrete-time quantum walk.
//!
//! The joint space is coin ⊗ position with flat index `c * k + x`, coin
//! `c ∈ {0, 1}` and position `x ∈ {0, …, k-1}`. One walk step is
//! `S_k · C(ρ)`: a real one-parameter coin followed by a coin-conditioned
//! cyclic shift (coin 0 moves to `x - 1`, coin 1 to `x + 1`, mod k).

use std::f64::consts::{FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};

use crate::{QsdcError, Result, C64};

pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Cycle lengths with tabulated revival parameters.
pub const TABLE1_KS: [usize; 6] = [3, 4, 5, 6, 8, 10];

/// Deviation from a phase-aligned identity below which a matrix power
/// counts as a full recurrence.
pub const RECURRENCE_TOL: f64 = 1e-9;

pub const DEFAULT_CHI: f64 = FRAC_PI_4;

const ONE: C64 = C64::new(1.0, 0.0);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WalkConfig {
    /// Cycle length.
    pub k: usize,
    /// Coin parameter ρ.
    pub rho: f64,
    /// Initial coin angle χ; the coin starts in `[cos χ, i sin χ]`.
    pub chi: f64,
    /// Recurrence period, when known.
    pub t_r: Option<usize>,
}

impl WalkConfig {
    pub fn new(k: usize, rho: f64) -> Result<Self> {
        check_k(k)?;
        check_rho(rho)?;
        Ok(Self {
            k,
            rho,
            chi: DEFAULT_CHI,
            t_r: None,
        })
    }

    /// Configuration for one of the tabulated cycles, with `t_r` filled in.
    pub fn table1(k: usize) -> Result<Self> {
        let (rho, t_r) = known_cycle_params(k)?;
        Ok(Self::new(k, rho)?.with_recurrence(t_r))
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn with_recurrence(mut self, t_r: usize) -> Self {
        self.t_r = Some(t_r);
        self
    }

    /// Dimension of the coin ⊗ position space.
    pub fn dim(&self) -> usize {
        2 * self.k
    }

    pub fn recurrence_period(&self) -> Result<usize> {
        self.t_r.ok_or_else(|| {
            QsdcError::Configuration(format!("k = {} walk has no recurrence period set", self.k))
        })
    }

    pub fn label_map(&self) -> OamLabelMap {
        OamLabelMap::new(self.k)
    }

    pub fn step_operator(&self) -> Result<UnitaryOperator> {
        step_operator(self)
    }
}

fn check_k(k: usize) -> Result<()> {
    if k < 2 {
        return Err(QsdcError::ParameterDomain {
            name: "k",
            value: k as f64,
            expected: "k >= 2",
        });
    }
    Ok(())
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(QsdcError::ParameterDomain {
            name: "rho",
            value: rho,
            expected: "0 <= rho <= 1",
        });
    }
    Ok(())
}

/// A normalized state on coin ⊗ position.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    k: usize,
    amplitudes: CVector,
}

impl PureState {
    /// Builds a state from flat amplitudes, rejecting wrong lengths and
    /// unnormalized vectors (tolerance 1e-10).
    pub fn from_amplitudes(k: usize, amplitudes: Vec<C64>) -> Result<Self> {
        if amplitudes.len() != 2 * k {
            return Err(QsdcError::Shape {
                expected: 2 * k,
                actual: amplitudes.len(),
            });
        }
        let state = Self {
            k,
            amplitudes: CVector::from_vec(amplitudes),
        };
        let norm = state.norm_sqr();
        if (norm - 1.0).abs() > 1e-10 {
            return Err(QsdcError::Domain(format!(
                "state is not normalized (|psi|^2 = {norm})"
            )));
        }
        Ok(state)
    }

    pub(crate) fn from_vector_unchecked(k: usize, amplitudes: CVector) -> Self {
        debug_assert_eq!(amplitudes.len(), 2 * k);
        Self { k, amplitudes }
    }

    /// `|coin⟩ ⊗ |x⟩`.
    pub fn basis(k: usize, coin: usize, x: usize) -> Result<Self> {
        if coin > 1 {
            return Err(QsdcError::Index {
                index: coin as i64,
                len: 2,
            });
        }
        if x >= k {
            return Err(QsdcError::Index {
                index: x as i64,
                len: k,
            });
        }
        let mut v = CVector::zeros(2 * k);
        v[coin * k + x] = ONE;
        Ok(Self { k, amplitudes: v })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        2 * self.k
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    /// Amplitude on `|coin⟩ ⊗ |x⟩`.
    pub fn amplitude(&self, coin: usize, x: usize) -> C64 {
        self.amplitudes[coin * self.k + x]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PureState) -> C64 {
        self.amplitudes.dotc(&other.amplitudes)
    }

    pub fn fidelity(&self, other: &PureState) -> f64 {
        self.inner(other).norm_sqr()
    }

    /// Cyclic relabeling of positions, `x ↦ x + shift (mod k)`.
    pub fn translated(&self, shift: usize) -> PureState {
        let k = self.k;
        let mut v = CVector::zeros(2 * k);
        for c in 0..2 {
            for x in 0..k {
                v[c * k + (x + shift) % k] = self.amplitudes[c * k + x];
            }
        }
        Self { k, amplitudes: v }
    }
}

/// A unitary on coin ⊗ position (or on any finite space for the optics model).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator {
    matrix: CMatrix,
}

impl UnitaryOperator {
    /// Wraps `matrix` after checking `U†U = I` entrywise within `tol`.
    pub fn new_checked(matrix: CMatrix, tol: f64) -> Result<Self> {
        if !matrix.is_square() {
            return Err(QsdcError::Shape {
                expected: matrix.nrows(),
                actual: matrix.ncols(),
            });
        }
        let op = Self { matrix };
        let defect = op.unitarity_defect();
        if defect > tol {
            return Err(QsdcError::Domain(format!(
                "matrix is not unitary (max |U†U - I| = {defect:.3e})"
            )));
        }
        Ok(op)
    }

    pub(crate) fn from_matrix_unchecked(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        Self {
            matrix: self.matrix.adjoint(),
        }
    }

    /// `self · other`.
    pub fn compose(&self, other: &UnitaryOperator) -> UnitaryOperator {
        Self {
            matrix: &self.matrix * &other.matrix,
        }
    }

    pub fn apply(&self, state: &PureState) -> Result<PureState> {
        if state.dim() != self.dim() {
            return Err(QsdcError::Shape {
                expected: self.dim(),
                actual: state.dim(),
            });
        }
        Ok(PureState::from_vector_unchecked(
            state.k,
            &self.matrix * &state.amplitudes,
        ))
    }

    /// `U^t` by repeated squaring.
    pub fn power(&self, mut t: usize) -> UnitaryOperator {
        let n = self.dim();
        let mut result = CMatrix::identity(n, n);
        let mut base = self.matrix.clone();
        while t > 0 {
            if t & 1 == 1 {
                result = &result * &base;
            }
            t >>= 1;
            if t > 0 {
                base = &base * &base;
            }
        }
        Self { matrix: result }
    }

    /// Largest entry of `|U†U - I|`.
    pub fn unitarity_defect(&self) -> f64 {
        let n = self.dim();
        let product = self.matrix.adjoint() * &self.matrix;
        max_abs_diff(&product, &CMatrix::identity(n, n))
    }

    /// Largest entrywise difference to another operator of the same size.
    pub fn distance(&self, other: &UnitaryOperator) -> f64 {
        max_abs_diff(&self.matrix, &other.matrix)
    }

    /// Largest entry of `|e^{-iθ} U - I|`, with θ the phase of the
    /// largest-magnitude diagonal entry. Zero iff `U` is a pure phase.
    pub fn identity_deviation(&self) -> f64 {
        let n = self.dim();
        let pivot = (0..n)
            .map(|i| self.matrix[(i, i)])
            .max_by(|a, b| a.norm().total_cmp(&b.norm()))
            .unwrap_or(ONE);
        if pivot.norm() == 0.0 {
            return f64::INFINITY;
        }
        let phase = C64::from_polar(1.0, -pivot.arg());
        let aligned = self.matrix.map(|z| z * phase);
        max_abs_diff(&aligned, &CMatrix::identity(n, n))
    }
}

pub(crate) fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).norm())
        .fold(0.0, f64::max)
}

/// Correspondence between position index and OAM label.
///
/// Positions are ordered by ascending label: index 0 is `ell_min`, so the
/// first basis vector of the walk carries the smallest OAM value.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OamLabelMap {
    pub k: usize,
    pub ell_min: i32,
    pub ell_max: i32,
}

impl OamLabelMap {
    pub fn new(k: usize) -> Self {
        let half = (k / 2) as i32;
        let ell_min = if k.is_multiple_of(2) { -half + 1 } else { -half };
        Self {
            k,
            ell_min,
            ell_max: half,
        }
    }

    pub fn label(&self, index: usize) -> i32 {
        self.ell_min + (index % self.k) as i32
    }

    pub fn index(&self, ell: i32) -> Result<usize> {
        if ell < self.ell_min || ell > self.ell_max {
            return Err(QsdcError::Overflow {
                ell,
                lo: self.ell_min,
                hi: self.ell_max,
            });
        }
        Ok((ell - self.ell_min) as usize)
    }

    /// The label in `[ell_min, ell_max]` congruent to `ell` mod k.
    pub fn wrap(&self, ell: i32) -> i32 {
        self.ell_min + (ell - self.ell_min).rem_euclid(self.k as i32)
    }

    pub fn labels(&self) -> impl Iterator<Item = i32> + '_ {
        self.ell_min..=self.ell_max
    }
}

/// The 2×2 coin block `[[√ρ, √(1-ρ)], [√(1-ρ), -√ρ]]`.
pub fn coin_matrix(rho: f64) -> Result<CMatrix> {
    check_rho(rho)?;
    let a = C64::new(rho.sqrt(), 0.0);
    let b = C64::new((1.0 - rho).sqrt(), 0.0);
    Ok(CMatrix::from_row_slice(2, 2, &[a, b, b, -a]))
}

/// Coin block tensored with the position identity.
pub fn coin_operator(config: &WalkConfig) -> Result<UnitaryOperator> {
    check_k(config.k)?;
    let coin = coin_matrix(config.rho)?;
    Ok(UnitaryOperator::from_matrix_unchecked(coin.kronecker(
        &CMatrix::identity(config.k, config.k),
    )))
}

/// Coin-conditioned cyclic shift.
pub fn shift_operator(k: usize) -> Result<UnitaryOperator> {
    check_k(k)?;
    let mut m = CMatrix::zeros(2 * k, 2 * k);
    for x in 0..k {
        m[((x + k - 1) % k, x)] = ONE;
        m[(k + (x + 1) % k, k + x)] = ONE;
    }
    Ok(UnitaryOperator::from_matrix_unchecked(m))
}

/// One walk step, `S_k · C(ρ)`.
pub fn step_operator(config: &WalkConfig) -> Result<UnitaryOperator> {
    Ok(shift_operator(config.k)?.compose(&coin_operator(config)?))
}

/// Coin `[cos χ, i sin χ]` localized at `position`.
pub fn initial_state(config: &WalkConfig, position: usize) -> Result<PureState> {
    let k = config.k;
    if position >= k {
        return Err(QsdcError::Index {
            index: position as i64,
            len: k,
        });
    }
    let mut v = CVector::zeros(2 * k);
    v[position] = C64::new(config.chi.cos(), 0.0);
    v[k + position] = C64::new(0.0, config.chi.sin());
    Ok(PureState::from_vector_unchecked(k, v))
}

/// Applies `t` walk steps one at a time.
pub fn evolve(state: &PureState, config: &WalkConfig, t: usize) -> Result<PureState> {
    let step = step_operator(config)?;
    evolve_with(state, &step, t)
}

/// Applies `t` steps of a precomputed step operator.
pub fn evolve_with(state: &PureState, step: &UnitaryOperator, t: usize) -> Result<PureState> {
    if state.dim() != step.dim() {
        return Err(QsdcError::Shape {
            expected: step.dim(),
            actual: state.dim(),
        });
    }
    let mut v = state.amplitudes.clone();
    for _ in 0..t {
        v = step.matrix() * v;
    }
    Ok(PureState::from_vector_unchecked(state.k, v))
}

/// Probability of each position, coin traced out.
pub fn position_distribution(state: &PureState) -> Vec<f64> {
    let k = state.k;
    (0..k)
        .map(|x| state.amplitudes[x].norm_sqr() + state.amplitudes[k + x].norm_sqr())
        .collect()
}

/// Probability of finding the walker at its starting position after `t`
/// steps from `initial_state(config, 0)`.
pub fn return_probability(config: &WalkConfig, t: usize) -> Result<f64> {
    let psi = evolve(&initial_state(config, 0)?, config, t)?;
    Ok(position_distribution(&psi)[0])
}

/// Smallest `t ≤ t_max` with `(S_k C)^t` proportional to the identity.
pub fn find_recurrence(config: &WalkConfig, t_max: usize) -> Result<Option<usize>> {
    let step = step_operator(config)?;
    Ok(first_identity_power(&step, t_max))
}

pub(crate) fn first_identity_power(step: &UnitaryOperator, t_max: usize) -> Option<usize> {
    let mut power = step.clone();
    for t in 1..=t_max {
        if power.identity_deviation() < RECURRENCE_TOL {
            return Some(t);
        }
        power = step.compose(&power);
    }
    None
}

/// Coin parameter and recurrence period for the tabulated cycles.
pub fn known_cycle_params(k: usize) -> Result<(f64, usize)> {
    let sqrt5 = 5f64.sqrt();
    match k {
        3 => Ok((2.0 / 3.0, 8)),
        4 => Ok(((3.0 - sqrt5) / 8.0, 20)),
        5 | 10 => Ok(((5.0 - sqrt5) / 10.0, 60)),
        6 => Ok((2.0 * (1.0 - (PI / 7.0).cos()) / 3.0, 28)),
        8 => Ok((0.5, 24)),
        _ => Err(QsdcError::UnknownParameter(k)),
    }
}
