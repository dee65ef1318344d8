//! Information measures: von Neumann entropy, coin/OAM quantum mutual
//! information and negativity, plus the classical (ℓ, t) joint
//! distribution an eavesdropper faces when guessing step counts.
//!
//! All logarithms are base 2.

use std::ops::RangeInclusive;

use nalgebra::DMatrix;

use crate::noise::{hermitian_eigenvalues, DensityMatrix};
use crate::walk::{
    initial_state, position_distribution, step_operator, CMatrix, OamLabelMap, WalkConfig,
};
use crate::{QsdcError, Result};

/// Eigenvalues below this are treated as exact zeros in entropy sums.
const EIGEN_FLOOR: f64 = 1e-12;

/// Shannon entropy (bits) of a spectrum, with `0 log 0 = 0`.
pub fn spectrum_entropy(values: &[f64]) -> f64 {
    values
        .iter()
        .filter(|&&p| p > EIGEN_FLOOR)
        .map(|&p| -p * p.log2())
        .sum()
}

pub fn von_neumann_entropy(rho: &DensityMatrix) -> Result<f64> {
    let defect = rho.hermiticity_defect();
    if defect > 1e-10 {
        return Err(QsdcError::Domain(format!(
            "entropy of a non-Hermitian matrix (defect {defect:.3e})"
        )));
    }
    Ok(spectrum_entropy(&rho.eigenvalues()).max(0.0))
}

fn joint_k(rho: &DensityMatrix) -> Result<usize> {
    if !rho.dim().is_multiple_of(2) || rho.dim() < 4 {
        return Err(QsdcError::Shape {
            expected: 2 * (rho.dim() / 2).max(2),
            actual: rho.dim(),
        });
    }
    Ok(rho.k())
}

/// Coin state, position traced out.
pub fn reduced_coin(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let k = joint_k(rho)?;
    let m = rho.matrix();
    let mut out = CMatrix::zeros(2, 2);
    for a in 0..2 {
        for b in 0..2 {
            out[(a, b)] = (0..k).map(|x| m[(a * k + x, b * k + x)]).sum();
        }
    }
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// Position (OAM) state, coin traced out.
pub fn reduced_position(rho: &DensityMatrix) -> Result<DensityMatrix> {
    let k = joint_k(rho)?;
    let m = rho.matrix();
    let out = m.view((0, 0), (k, k)) + m.view((k, k), (k, k));
    Ok(DensityMatrix::from_matrix_unchecked(out))
}

/// `S(ρ_coin) + S(ρ_position) - S(ρ)`.
pub fn mutual_information_quantum(rho: &DensityMatrix) -> Result<f64> {
    let coin = von_neumann_entropy(&reduced_coin(rho)?)?;
    let position = von_neumann_entropy(&reduced_position(rho)?)?;
    let joint = von_neumann_entropy(rho)?;
    Ok(coin + position - joint)
}

/// Transpose on the coin factor: `ρ_{(a,x),(b,y)} ↦ ρ_{(b,x),(a,y)}`.
pub fn partial_transpose_coin(rho: &DensityMatrix) -> Result<CMatrix> {
    let k = joint_k(rho)?;
    let m = rho.matrix();
    Ok(CMatrix::from_fn(2 * k, 2 * k, |i, j| {
        let (a, x) = (i / k, i % k);
        let (b, y) = (j / k, j % k);
        m[(b * k + x, a * k + y)]
    }))
}

/// Sum of the magnitudes of the negative eigenvalues of the partial transpose.
pub fn negativity(rho: &DensityMatrix) -> Result<f64> {
    let pt = partial_transpose_coin(rho)?;
    Ok(hermitian_eigenvalues(&pt)
        .into_iter()
        .filter(|&v| v < 0.0)
        .map(f64::abs)
        .sum())
}

/// Which step counts form the columns of the joint distribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StepWindow {
    /// Every non-trivial step inside one period, `1..=t_r-1`.
    #[default]
    Period,
    /// The protocol's admissible step counts `t_i`, `2..=t_r`.
    Protocol,
}

impl StepWindow {
    pub fn steps(self, t_r: usize) -> RangeInclusive<usize> {
        match self {
            Self::Period => 1..=t_r - 1,
            Self::Protocol => 2..=t_r,
        }
    }
}

/// `P(ℓ, t)`: rows are OAM labels `ell_min..=ell_max`, columns step counts.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    pub table: DMatrix<f64>,
    pub steps: Vec<usize>,
    pub config: WalkConfig,
    pub label_map: OamLabelMap,
}

impl JointDistribution {
    pub fn total(&self) -> f64 {
        self.table.sum()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.table.column_iter().map(|c| c.sum()).collect()
    }

    pub fn probability(&self, ell: i32, t: usize) -> Option<f64> {
        let row = self.label_map.index(ell).ok()?;
        let col = self.steps.iter().position(|&s| s == t)?;
        Some(self.table[(row, col)])
    }
}

/// Position distribution of the walk started at `initial_state(config, 0)`
/// for every step in `window`, each column weighted by `1/(number of steps)`.
pub fn joint_distribution(config: &WalkConfig, window: StepWindow) -> Result<JointDistribution> {
    let t_r = config.recurrence_period()?;
    if t_r < 2 {
        return Err(QsdcError::Configuration(format!(
            "recurrence period {t_r} leaves no admissible steps"
        )));
    }
    let steps: Vec<usize> = window.steps(t_r).collect();
    let weight = 1.0 / steps.len() as f64;
    let step = step_operator(config)?;
    let mut psi = initial_state(config, 0)?;
    let mut table = DMatrix::zeros(config.k, steps.len());
    let mut t = 0;
    for (col, &target) in steps.iter().enumerate() {
        while t < target {
            psi = step.apply(&psi)?;
            t += 1;
        }
        for (row, p) in position_distribution(&psi).into_iter().enumerate() {
            table[(row, col)] = p * weight;
        }
    }
    Ok(JointDistribution {
        table,
        steps,
        config: *config,
        label_map: config.label_map(),
    })
}

/// `P(ℓ) = Σ_t P(ℓ, t)`, indexed like the label map.
pub fn marginal_oam(j: &JointDistribution) -> Vec<f64> {
    j.table.row_iter().map(|r| r.sum()).collect()
}

pub fn marginal_steps(j: &JointDistribution) -> Vec<f64> {
    j.column_sums()
}

/// `Σ P(ℓ,t) log2[P(ℓ,t) / (P(ℓ) P(t))]`.
pub fn eve_mutual_information(j: &JointDistribution) -> f64 {
    classical_mutual_information(&j.table)
}

/// Mutual information (bits) between the row and column variables of a
/// joint probability table. Zero cells contribute nothing.
pub fn classical_mutual_information(table: &DMatrix<f64>) -> f64 {
    let rows: Vec<f64> = table.row_iter().map(|r| r.sum()).collect();
    let cols: Vec<f64> = table.column_iter().map(|c| c.sum()).collect();
    let mut total = 0.0;
    for (i, pr) in rows.iter().enumerate() {
        for (j, pc) in cols.iter().enumerate() {
            let p = table[(i, j)];
            if p > 0.0 {
                total += p * (p / (pr * pc)).log2();
            }
        }
    }
    total.max(0.0)
}

/// `I_mu(t)` for a trajectory of states.
pub fn mutual_information_series(states: &[DensityMatrix]) -> Result<Vec<f64>> {
    states.iter().map(mutual_information_quantum).collect()
}
