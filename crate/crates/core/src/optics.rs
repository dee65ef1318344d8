//! Operator models of the optical elements that realize one walk step on
//! the polarization (coin) and OAM (position) of a single photon.
//!
//! Elements are ideal: lossless, aligned, and coherent across fiber
//! couplers. A layout is an ordered element list acting on a set of beam
//! paths; mode sorters open new paths, fiber couplers merge them back.
//! [`compose_cycle_step`] turns a layout into a matrix on the 2k-dimensional
//! walk space so it can be compared against `S_k C(ρ)`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
use std::fmt;

use crate::walk::{
    step_operator, CMatrix, OamLabelMap, PureState, UnitaryOperator, WalkConfig,
};
use crate::{QsdcError, Result, C64};

const PHASE_TOL: f64 = 1e-9;

/// Amplitudes indexed by OAM label, each with an H (coin 0) and V (coin 1)
/// component. Labels may leave the walk window mid-step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OamState {
    modes: BTreeMap<i32, [C64; 2]>,
}

impl OamState {
    pub fn new() -> Self {
        Self::default()
    }

    /// Horizontally polarized superposition `Σ c_ℓ |ℓ⟩`.
    pub fn from_coefficients(coeffs: &[(i32, C64)]) -> Self {
        let mut s = Self::new();
        for &(ell, c) in coeffs {
            s.add(ell, 0, c);
        }
        s
    }

    pub fn basis(ell: i32, coin: usize) -> Self {
        let mut s = Self::new();
        s.add(ell, coin, C64::new(1.0, 0.0));
        s
    }

    pub fn from_pure(state: &PureState) -> Self {
        let map = OamLabelMap::new(state.k());
        let mut s = Self::new();
        for coin in 0..2 {
            for x in 0..state.k() {
                let a = state.amplitude(coin, x);
                if a != C64::new(0.0, 0.0) {
                    s.add(map.label(x), coin, a);
                }
            }
        }
        s
    }

    /// Projects onto the window of `map`; amplitude outside it is returned
    /// separately as a squared norm.
    pub fn to_walk_vector(&self, map: &OamLabelMap) -> (Vec<C64>, f64) {
        let k = map.k;
        let mut v = vec![C64::new(0.0, 0.0); 2 * k];
        let mut lost = 0.0;
        for (&ell, amps) in &self.modes {
            match map.index(ell) {
                Ok(x) => {
                    v[x] += amps[0];
                    v[k + x] += amps[1];
                }
                Err(_) => lost += amps[0].norm_sqr() + amps[1].norm_sqr(),
            }
        }
        (v, lost)
    }

    pub fn to_pure(&self, map: &OamLabelMap) -> Result<PureState> {
        if let Some(&ell) = self
            .modes
            .iter()
            .find(|(&ell, a)| map.index(ell).is_err() && a.iter().any(|z| z.norm() > 0.0))
            .map(|(ell, _)| ell)
        {
            return Err(QsdcError::Overflow {
                ell,
                lo: map.ell_min,
                hi: map.ell_max,
            });
        }
        PureState::from_amplitudes(map.k, self.to_walk_vector(map).0)
    }

    pub fn add(&mut self, ell: i32, coin: usize, amplitude: C64) {
        self.modes.entry(ell).or_insert([C64::new(0.0, 0.0); 2])[coin] += amplitude;
    }

    pub fn amplitude(&self, ell: i32, coin: usize) -> C64 {
        self.modes
            .get(&ell)
            .map_or(C64::new(0.0, 0.0), |a| a[coin])
    }

    /// Labels carrying non-zero amplitude.
    pub fn support(&self) -> Vec<i32> {
        self.modes
            .iter()
            .filter(|(_, a)| a.iter().any(|z| z.norm() > 0.0))
            .map(|(&ell, _)| ell)
            .collect()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.modes
            .values()
            .map(|a| a[0].norm_sqr() + a[1].norm_sqr())
            .sum()
    }

    pub fn is_empty(&self) -> bool {
        self.support().is_empty()
    }

    fn map_modes(&self, f: impl Fn(i32, [C64; 2]) -> [(i32, C64); 2]) -> OamState {
        let mut out = OamState::new();
        for (&ell, &amps) in &self.modes {
            for (coin, (new_ell, a)) in f(ell, amps).into_iter().enumerate() {
                if a != C64::new(0.0, 0.0) {
                    out.add(new_ell, coin, a);
                }
            }
        }
        out
    }

    fn merge(&mut self, other: &OamState) {
        for (&ell, amps) in &other.modes {
            for (coin, &a) in amps.iter().enumerate() {
                self.add(ell, coin, a);
            }
        }
    }
}

/// Jones matrix `R(θ) diag(e^{iδx}, e^{iδy}) R(-θ)` of a J-plate pixel.
pub fn jones_matrix(delta_x: f64, delta_y: f64, theta: f64) -> CMatrix {
    let rot = |a: f64| {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(a.cos(), 0.0),
                C64::new(-a.sin(), 0.0),
                C64::new(a.sin(), 0.0),
                C64::new(a.cos(), 0.0),
            ],
        )
    };
    let phases = CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::from_polar(1.0, delta_x),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::from_polar(1.0, delta_y),
        ],
    );
    rot(theta) * phases * rot(-theta)
}

/// Rotation angle β of the coin half-wave plate, `tan β = √((1-ρ)/ρ)`.
pub fn hwp_angle(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(QsdcError::ParameterDomain {
            name: "rho",
            value: rho,
            expected: "0 < rho <= 1 (beta undefined at rho = 0)",
        });
    }
    Ok(((1.0 - rho) / rho).sqrt().atan())
}

/// Jones matrix of a half-wave plate with its fast axis at β/2.
pub fn hwp_operator(rho: f64) -> Result<CMatrix> {
    let beta = hwp_angle(rho)?;
    let (s, c) = beta.sin_cos();
    Ok(CMatrix::from_row_slice(
        2,
        2,
        &[
            C64::new(c, 0.0),
            C64::new(s, 0.0),
            C64::new(s, 0.0),
            C64::new(-c, 0.0),
        ],
    ))
}

/// Applies a 2×2 polarization matrix to every OAM mode.
pub fn apply_polarization(state: &OamState, jones: &CMatrix) -> OamState {
    state.map_modes(|ell, [h, v]| {
        [
            (ell, jones[(0, 0)] * h + jones[(0, 1)] * v),
            (ell, jones[(1, 0)] * h + jones[(1, 1)] * v),
        ]
    })
}

/// J-plate with azimuthal charges `(h_charge, v_charge)` on its principal
/// axes, rotated by `theta`. The walk uses charges `(-1, +1)`, θ = 0:
/// `e^{-iφ}|H⟩⟨H| + e^{iφ}|V⟩⟨V|`, so H loses and V gains one unit of ℓ.
pub fn jplate_general(state: &OamState, h_charge: i32, v_charge: i32, theta: f64) -> OamState {
    let (s, c) = theta.sin_cos();
    let rotate = |a: f64, b: f64, sgn: f64| {
        CMatrix::from_row_slice(
            2,
            2,
            &[
                C64::new(a, 0.0),
                C64::new(-sgn * b, 0.0),
                C64::new(sgn * b, 0.0),
                C64::new(a, 0.0),
            ],
        )
    };
    let into_axes = apply_polarization(state, &rotate(c, s, -1.0));
    let shifted = into_axes.map_modes(|ell, [h, v]| [(ell + h_charge, h), (ell + v_charge, v)]);
    apply_polarization(&shifted, &rotate(c, s, 1.0))
}

/// The walk's J-plate, `J(-φ, φ, 0)`, with the pre-wrap window check
/// `[ell_min - 1, ell_max + 1]`.
pub fn jplate_action(state: &OamState, map: &OamLabelMap) -> Result<OamState> {
    let out = jplate_general(state, -1, 1, 0.0);
    check_window(&out, map.ell_min - 1, map.ell_max + 1)?;
    Ok(out)
}

fn check_window(state: &OamState, lo: i32, hi: i32) -> Result<()> {
    match state.support().into_iter().find(|&l| l < lo || l > hi) {
        Some(ell) => Err(QsdcError::Overflow { ell, lo, hi }),
        None => Ok(()),
    }
}

/// Spiral phase plate: every label shifted by `m`.
pub fn spp(state: &OamState, m: i32) -> OamState {
    state.map_modes(|ell, [h, v]| [(ell + m, h), (ell + m, v)])
}

/// Dove-prism Mach-Zehnder sorter with relative rotation `alpha`.
pub fn mz_sort(state: &OamState, alpha: f64) -> Result<(OamState, OamState)> {
    mz_sort_biased(state, alpha, 0.0)
}

/// Sorter whose interference phase for mode ℓ is `ℓ α + bias`: phase
/// `+1` exits port A, `-1` port B. Any other phase would split the mode
/// between ports and is rejected.
pub fn mz_sort_biased(state: &OamState, alpha: f64, bias: f64) -> Result<(OamState, OamState)> {
    let mut port_a = OamState::new();
    let mut port_b = OamState::new();
    for (&ell, amps) in &state.modes {
        if amps.iter().all(|z| z.norm() == 0.0) {
            continue;
        }
        let phase = ell as f64 * alpha + bias;
        if phase.sin().abs() > PHASE_TOL {
            return Err(QsdcError::NonBinaryInterference { ell, alpha });
        }
        let port = if phase.cos() > 0.0 {
            &mut port_a
        } else {
            &mut port_b
        };
        port.modes.insert(ell, *amps);
    }
    Ok((port_a, port_b))
}

/// Bank of two OAM sorters: `ell_max + 1` is routed through an SPP of `-k`
/// and `ell_min - 1` through `+k`, then recombined with the in-window modes.
pub fn sorter_bank(state: &OamState, map: &OamLabelMap) -> Result<OamState> {
    check_window(state, map.ell_min - 1, map.ell_max + 1)?;
    let k = map.k as i32;
    let mut inside = OamState::new();
    let mut above = OamState::new();
    let mut below = OamState::new();
    for (&ell, amps) in &state.modes {
        let target = if ell > map.ell_max {
            &mut above
        } else if ell < map.ell_min {
            &mut below
        } else {
            &mut inside
        };
        target.modes.insert(ell, *amps);
    }
    Ok(fiber_combine(&[inside, spp(&above, -k), spp(&below, k)]))
}

/// Coherent merge of paths into one fiber mode.
pub fn fiber_combine(paths: &[OamState]) -> OamState {
    let mut out = OamState::new();
    for p in paths {
        out.merge(p);
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub enum OpticalElement {
    /// Coin half-wave plate; `rho = None` takes the walk's coin parameter.
    HalfWavePlate { rho: Option<f64> },
    JPlate {
        h_charge: i32,
        v_charge: i32,
        theta: f64,
    },
    SpiralPhasePlate { path: usize, m: i32 },
    /// Port A stays on `path`; port B becomes a new path appended at the end.
    ModeSorter { path: usize, alpha: f64, bias: f64 },
    OamSorterBank,
    FiberCombine,
}

impl OpticalElement {
    pub fn walk_jplate() -> Self {
        Self::JPlate {
            h_charge: -1,
            v_charge: 1,
            theta: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalLayout {
    pub k: usize,
    pub elements: Vec<OpticalElement>,
}

impl OpticalLayout {
    pub fn new(k: usize, elements: Vec<OpticalElement>) -> Self {
        Self { k, elements }
    }

    pub fn oam_window(&self) -> (i32, i32) {
        let map = OamLabelMap::new(self.k);
        (map.ell_min, map.ell_max)
    }

    /// Runs `input` through every element and returns the surviving paths.
    pub fn propagate(&self, input: &OamState, config: &WalkConfig) -> Result<Vec<OamState>> {
        let map = OamLabelMap::new(self.k);
        let mut paths = vec![input.clone()];
        for (i, element) in self.elements.iter().enumerate() {
            let path_of = |p: usize, paths: &Vec<OamState>| {
                if p < paths.len() {
                    Ok(p)
                } else {
                    Err(QsdcError::Configuration(format!(
                        "element {i} refers to path {p} but only {} exist",
                        paths.len()
                    )))
                }
            };
            match element {
                OpticalElement::HalfWavePlate { rho } => {
                    let jones = hwp_operator(rho.unwrap_or(config.rho))?;
                    for p in paths.iter_mut() {
                        *p = apply_polarization(p, &jones);
                    }
                }
                OpticalElement::JPlate {
                    h_charge,
                    v_charge,
                    theta,
                } => {
                    for p in paths.iter_mut() {
                        *p = jplate_general(p, *h_charge, *v_charge, *theta);
                        check_window(p, map.ell_min - 1, map.ell_max + 1)?;
                    }
                }
                OpticalElement::SpiralPhasePlate { path, m } => {
                    let p = path_of(*path, &paths)?;
                    paths[p] = spp(&paths[p], *m);
                }
                OpticalElement::ModeSorter { path, alpha, bias } => {
                    let p = path_of(*path, &paths)?;
                    let (a, b) = mz_sort_biased(&paths[p], *alpha, *bias)?;
                    paths[p] = a;
                    paths.push(b);
                }
                OpticalElement::OamSorterBank => {
                    for p in paths.iter_mut() {
                        *p = sorter_bank(p, &map)?;
                    }
                }
                OpticalElement::FiberCombine => {
                    paths = vec![fiber_combine(&paths)];
                }
            }
        }
        Ok(paths)
    }

    /// Matrix of the layout on the walk space, without any validity check.
    /// Amplitude that leaves the window or stays on an unmerged side path is
    /// dropped, which shows up as a non-unitary result.
    pub fn transfer_matrix(&self, config: &WalkConfig) -> Result<CMatrix> {
        if config.k != self.k {
            return Err(QsdcError::Shape {
                expected: self.k,
                actual: config.k,
            });
        }
        let map = OamLabelMap::new(self.k);
        let dim = 2 * self.k;
        let mut m = CMatrix::zeros(dim, dim);
        for coin in 0..2 {
            for x in 0..self.k {
                let paths = self.propagate(&OamState::basis(map.label(x), coin), config)?;
                let (column, _) = paths[0].to_walk_vector(&map);
                for (row, a) in column.into_iter().enumerate() {
                    m[(row, coin * self.k + x)] = a;
                }
            }
        }
        Ok(m)
    }
}

/// Composes `layout` into one operator, rejecting non-unitary results.
pub fn compose_cycle_step(layout: &OpticalLayout, config: &WalkConfig) -> Result<UnitaryOperator> {
    let m = layout.transfer_matrix(config)?;
    let n = m.nrows();
    let defect = crate::walk::max_abs_diff(&(m.adjoint() * &m), &CMatrix::identity(n, n));
    if defect > 1e-10 {
        return Err(QsdcError::LayoutInvalid { distance: defect });
    }
    Ok(UnitaryOperator::from_matrix_unchecked(m))
}

/// Outcome of checking a layout against a reference operator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LayoutCheck {
    /// Max entrywise distance between the layout's matrix and the reference.
    pub distance: f64,
    /// Max entry of `|M†M - I|` for the layout's matrix.
    pub unitarity_defect: f64,
    pub passed: bool,
}

/// Compares a layout with `reference` (normally the walk step operator).
pub fn check_layout(
    layout: &OpticalLayout,
    config: &WalkConfig,
    reference: &UnitaryOperator,
    tol: f64,
) -> Result<LayoutCheck> {
    let m = layout.transfer_matrix(config)?;
    let n = m.nrows();
    let distance = crate::walk::max_abs_diff(&m, reference.matrix());
    let unitarity_defect =
        crate::walk::max_abs_diff(&(m.adjoint() * &m), &CMatrix::identity(n, n));
    Ok(LayoutCheck {
        distance,
        unitarity_defect,
        passed: distance < tol && unitarity_defect < tol,
    })
}

/// [`check_layout`] against `S_k C(ρ)`.
pub fn verify_layout(layout: &OpticalLayout, config: &WalkConfig) -> Result<LayoutCheck> {
    check_layout(layout, config, &step_operator(config)?, 1e-10)
}

/// Coin plate, J-plate and the two-sorter wraparound bank; valid for any k.
pub fn sorter_bank_layout(k: usize) -> OpticalLayout {
    OpticalLayout::new(
        k,
        vec![
            OpticalElement::HalfWavePlate { rho: None },
            OpticalElement::walk_jplate(),
            OpticalElement::OamSorterBank,
        ],
    )
}

/// Shift stage of the 5-cycle Mach-Zehnder tree, applied after the J-plate.
fn five_cycle_tree() -> Vec<OpticalElement> {
    use OpticalElement::{FiberCombine, ModeSorter, SpiralPhasePlate};
    vec![
        ModeSorter { path: 0, alpha: PI, bias: 0.0 },
        SpiralPhasePlate { path: 1, m: -1 },
        ModeSorter { path: 1, alpha: FRAC_PI_2, bias: 0.0 },
        ModeSorter { path: 2, alpha: FRAC_PI_4, bias: FRAC_PI_2 },
        ModeSorter { path: 1, alpha: FRAC_PI_4, bias: 0.0 },
        SpiralPhasePlate { path: 2, m: 1 },
        SpiralPhasePlate { path: 3, m: -4 },
        SpiralPhasePlate { path: 4, m: 6 },
        SpiralPhasePlate { path: 1, m: 1 },
        FiberCombine,
    ]
}

/// Half-wave plate, J-plate and four Mach-Zehnder sorters with SPPs that
/// fold `ℓ ∈ [-3, 3]` back into `[-2, 2]`.
pub fn canonical_five_cycle_layout() -> OpticalLayout {
    let mut elements = vec![
        OpticalElement::HalfWavePlate { rho: None },
        OpticalElement::walk_jplate(),
    ];
    elements.extend(five_cycle_tree());
    OpticalLayout::new(5, elements)
}

/// One labeled intermediate state of the 5-cycle sorting tree.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceStep {
    pub name: &'static str,
    pub state: OamState,
}

/// Follows `Σ_{ℓ=-3}^{3} c_ℓ |ℓ⟩` through the 5-cycle sorting tree and
/// returns ψ₁ … ψ₈ in order, followed by the fiber-combined output.
pub fn fig2b_trace(psi: &OamState) -> Result<Vec<TraceStep>> {
    check_window(psi, -3, 3)?;
    let (psi2, psi1) = mz_sort(psi, PI)?;
    let (psi4, psi3) = mz_sort(&spp(&psi1, -1), FRAC_PI_2)?;
    let (from3_a, from3_b) = mz_sort_biased(&psi3, FRAC_PI_4, FRAC_PI_2)?;
    let (from4_a, from4_b) = mz_sort(&psi4, FRAC_PI_4)?;
    let psi5 = spp(&from3_a, 1);
    let psi6 = spp(&from3_b, -4);
    let psi7 = spp(&from4_b, 6);
    let psi8 = spp(&from4_a, 1);
    let output = fiber_combine(&[
        psi2.clone(),
        psi5.clone(),
        psi6.clone(),
        psi7.clone(),
        psi8.clone(),
    ]);
    let named = [
        ("psi1", psi1),
        ("psi2", psi2),
        ("psi3", psi3),
        ("psi4", psi4),
        ("psi5", psi5),
        ("psi6", psi6),
        ("psi7", psi7),
        ("psi8", psi8),
        ("output", output),
    ];
    Ok(named
        .into_iter()
        .map(|(name, state)| TraceStep { name, state })
        .collect())
}

fn parse_angle(text: &str) -> Option<f64> {
    let t = text.trim();
    if let Ok(v) = t.parse::<f64>() {
        return Some(v);
    }
    let (sign, body) = match t.strip_prefix('-') {
        Some(rest) => (-1.0, rest),
        None => (1.0, t),
    };
    let (numerator, denominator) = match body.split_once('/') {
        Some((n, d)) => (n, d.parse::<f64>().ok()?),
        None => (body, 1.0),
    };
    let factor = match numerator {
        "pi" => 1.0,
        other => other.strip_suffix("*pi")?.parse::<f64>().ok()?,
    };
    Some(sign * factor * PI / denominator)
}

impl OpticalLayout {
    /// Parses the plain-text layout format:
    ///
    /// ```text
    /// # comment
    /// cycle k=5
    /// hwp                       # or: hwp rho=0.5
    /// jplate                    # or: jplate h=-1 v=1 theta=0
    /// sorter path=0 alpha=pi bias=0
    /// spp path=1 m=-1
    /// sorter_bank
    /// combine
    /// ```
    pub fn parse(text: &str) -> Result<Self> {
        let mut k = None;
        let mut elements = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| QsdcError::LayoutParse {
                line: line_no,
                message,
            };
            let mut words = line.split_whitespace();
            let name = words.next().unwrap_or_default();
            let mut params = BTreeMap::new();
            for w in words {
                let (key, value) = w
                    .split_once('=')
                    .ok_or_else(|| err(format!("expected key=value, found `{w}`")))?;
                params.insert(key, value);
            }
            let int = |key: &str, default: Option<i64>| -> Result<i64> {
                match params.get(key) {
                    Some(v) => v
                        .parse::<i64>()
                        .map_err(|_| err(format!("`{key}` must be an integer, found `{v}`"))),
                    None => default.ok_or_else(|| err(format!("missing `{key}`"))),
                }
            };
            let angle = |key: &str, default: Option<f64>| -> Result<f64> {
                match params.get(key) {
                    Some(v) => parse_angle(v)
                        .ok_or_else(|| err(format!("`{key}` is not an angle: `{v}`"))),
                    None => default.ok_or_else(|| err(format!("missing `{key}`"))),
                }
            };
            let element = match name {
                "cycle" => {
                    let value = int("k", None)?;
                    if value < 2 {
                        return Err(err(format!("cycle length {value} < 2")));
                    }
                    k = Some(value as usize);
                    continue;
                }
                "hwp" => OpticalElement::HalfWavePlate {
                    rho: match params.get("rho") {
                        Some(v) => Some(
                            v.parse::<f64>()
                                .map_err(|_| err(format!("bad rho `{v}`")))?,
                        ),
                        None => None,
                    },
                },
                "jplate" => OpticalElement::JPlate {
                    h_charge: int("h", Some(-1))? as i32,
                    v_charge: int("v", Some(1))? as i32,
                    theta: angle("theta", Some(0.0))?,
                },
                "spp" => OpticalElement::SpiralPhasePlate {
                    path: int("path", Some(0))? as usize,
                    m: int("m", None)? as i32,
                },
                "sorter" => OpticalElement::ModeSorter {
                    path: int("path", Some(0))? as usize,
                    alpha: angle("alpha", None)?,
                    bias: angle("bias", Some(0.0))?,
                },
                "sorter_bank" => OpticalElement::OamSorterBank,
                "combine" => OpticalElement::FiberCombine,
                other => return Err(err(format!("unknown element `{other}`"))),
            };
            elements.push(element);
        }
        let k = k.ok_or(QsdcError::LayoutParse {
            line: 0,
            message: "missing `cycle k=<n>` line".into(),
        })?;
        Ok(Self::new(k, elements))
    }
}

impl fmt::Display for OpticalLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "cycle k={}", self.k)?;
        for e in &self.elements {
            match e {
                OpticalElement::HalfWavePlate { rho: None } => writeln!(f, "hwp")?,
                OpticalElement::HalfWavePlate { rho: Some(r) } => writeln!(f, "hwp rho={r:?}")?,
                OpticalElement::JPlate {
                    h_charge,
                    v_charge,
                    theta,
                } => writeln!(f, "jplate h={h_charge} v={v_charge} theta={theta:?}")?,
                OpticalElement::SpiralPhasePlate { path, m } => {
                    writeln!(f, "spp path={path} m={m}")?
                }
                OpticalElement::ModeSorter { path, alpha, bias } => {
                    writeln!(f, "sorter path={path} alpha={alpha:?} bias={bias:?}")?
                }
                OpticalElement::OamSorterBank => writeln!(f, "sorter_bank")?,
                OpticalElement::FiberCombine => writeln!(f, "combine")?,
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{coin_matrix, coin_operator, max_abs_diff, shift_operator, TABLE1_KS};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn five() -> WalkConfig {
        WalkConfig::table1(5).unwrap()
    }

    /// Distinct, non-trivial coefficients for ℓ = -3..=3.
    fn coefficients() -> Vec<(i32, C64)> {
        (-3..=3)
            .map(|l| (l, C64::new(0.1 * (l + 4) as f64, 0.05 * l as f64)))
            .collect()
    }

    #[test]
    fn hwp_examples() {
        assert_eq!(hwp_angle(1.0).unwrap(), 0.0);
        let m = hwp_operator(1.0).unwrap();
        assert!(max_abs_diff(&m, &CMatrix::from_row_slice(2, 2, &[c(1.0), c(0.0), c(0.0), c(-1.0)])) < 1e-15);

        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = hwp_operator(0.5).unwrap();
        assert!(max_abs_diff(&m, &CMatrix::from_row_slice(2, 2, &[c(h), c(h), c(h), c(-h)])) < 1e-15);

        for k in TABLE1_KS {
            let rho = WalkConfig::table1(k).unwrap().rho;
            assert!(max_abs_diff(&hwp_operator(rho).unwrap(), &coin_matrix(rho).unwrap()) < 1e-12);
        }
        assert!(matches!(
            hwp_operator(0.0),
            Err(QsdcError::ParameterDomain { name: "rho", .. })
        ));
    }

    #[test]
    fn jones_matrix_of_walk_jplate_is_azimuthal_phase() {
        for phi in [0.0, 0.3, 1.7, -2.9] {
            let j = jones_matrix(-phi, phi, 0.0);
            assert!((j[(0, 0)] - C64::from_polar(1.0, -phi)).norm() < 1e-15);
            assert!((j[(1, 1)] - C64::from_polar(1.0, phi)).norm() < 1e-15);
            assert!(j[(0, 1)].norm() < 1e-15 && j[(1, 0)].norm() < 1e-15);
        }
    }

    #[test]
    fn jplate_examples() {
        let map = OamLabelMap::new(5);
        let out = jplate_action(&OamState::basis(0, 0), &map).unwrap();
        assert_eq!(out, OamState::basis(-1, 0));
        let out = jplate_action(&OamState::basis(2, 1), &map).unwrap();
        assert_eq!(out, OamState::basis(3, 1));

        let mut sup = OamState::new();
        sup.add(1, 0, C64::new(0.6, 0.0));
        sup.add(1, 1, C64::new(0.0, 0.8));
        let out = jplate_action(&sup, &map).unwrap();
        assert_eq!(out.amplitude(0, 0), C64::new(0.6, 0.0));
        assert_eq!(out.amplitude(2, 1), C64::new(0.0, 0.8));

        let err = jplate_action(&OamState::basis(3, 1), &map).unwrap_err();
        assert_eq!(err, QsdcError::Overflow { ell: 4, lo: -3, hi: 3 });
    }

    #[test]
    fn rotated_jplate_matches_jones_matrix_on_each_phase() {
        // With charges (a, b), the action on e^{iℓφ} must equal the Jones
        // matrix J(aφ, bφ, θ) evaluated pointwise; test by comparing Fourier
        // components at sampled azimuths.
        let theta = 0.4;
        let input = {
            let mut s = OamState::new();
            s.add(0, 0, C64::new(0.6, 0.0));
            s.add(0, 1, C64::new(0.0, 0.8));
            s
        };
        let out = jplate_general(&input, -1, 1, theta);
        for phi in [0.2, 1.1, 2.5] {
            let j = jones_matrix(-phi, phi, theta);
            let field: Vec<C64> = (0..2)
                .map(|coin| {
                    out.support()
                        .iter()
                        .map(|&l| out.amplitude(l, coin) * C64::from_polar(1.0, l as f64 * phi))
                        .sum()
                })
                .collect();
            let expected = [
                j[(0, 0)] * c(0.6) + j[(0, 1)] * C64::new(0.0, 0.8),
                j[(1, 0)] * c(0.6) + j[(1, 1)] * C64::new(0.0, 0.8),
            ];
            for coin in 0..2 {
                assert!((field[coin] - expected[coin]).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn spp_examples() {
        let s = OamState::from_coefficients(&coefficients());
        assert_eq!(spp(&s, 0), s);
        assert_eq!(spp(&OamState::basis(3, 0), -5), OamState::basis(-2, 0));
        assert_eq!(spp(&OamState::basis(-3, 1), 5), OamState::basis(2, 1));
        assert_eq!(spp(&spp(&s, 7), -7), s);
    }

    #[test]
    fn mz_parity_sort() {
        let s = OamState::from_coefficients(&coefficients());
        let (a, b) = mz_sort(&s, PI).unwrap();
        assert_eq!(a.support(), vec![-2, 0, 2]);
        assert_eq!(b.support(), vec![-3, -1, 1, 3]);
        assert!((a.norm_sqr() + b.norm_sqr() - s.norm_sqr()).abs() < 1e-12);
    }

    #[test]
    fn mz_quarter_sort_after_odd_shift() {
        let coeffs = coefficients();
        let cf = |l: i32| coeffs.iter().find(|(x, _)| *x == l).unwrap().1;
        let odd = OamState::from_coefficients(&[(-3, cf(-3)), (-1, cf(-1)), (1, cf(1)), (3, cf(3))]);
        let (a, b) = mz_sort(&spp(&odd, -1), FRAC_PI_2).unwrap();
        assert_eq!(a, OamState::from_coefficients(&[(-4, cf(-3)), (0, cf(1))]));
        assert_eq!(b, OamState::from_coefficients(&[(-2, cf(-1)), (2, cf(3))]));
    }

    #[test]
    fn mz_single_mode_and_rejection() {
        let (a, b) = mz_sort(&OamState::basis(4, 1), FRAC_PI_2).unwrap();
        assert!((a.norm_sqr() - 1.0).abs() < 1e-15 && b.is_empty());
        let (a, b) = mz_sort(&OamState::basis(1, 0), PI).unwrap();
        assert!(a.is_empty() && (b.norm_sqr() - 1.0).abs() < 1e-15);
        assert!(matches!(
            mz_sort(&OamState::basis(1, 0), FRAC_PI_2),
            Err(QsdcError::NonBinaryInterference { ell: 1, .. })
        ));
    }

    #[test]
    fn fig2b_trace_matches_symbolic_states() {
        let coeffs = coefficients();
        let cf = |l: i32| coeffs.iter().find(|(x, _)| *x == l).unwrap().1;
        let input = OamState::from_coefficients(&coeffs);
        let trace = fig2b_trace(&input).unwrap();
        let by_name = |n: &str| trace.iter().find(|s| s.name == n).unwrap().state.clone();
        let from = OamState::from_coefficients;
        assert_eq!(by_name("psi1"), from(&[(-3, cf(-3)), (-1, cf(-1)), (1, cf(1)), (3, cf(3))]));
        assert_eq!(by_name("psi2"), from(&[(-2, cf(-2)), (0, cf(0)), (2, cf(2))]));
        assert_eq!(by_name("psi3"), from(&[(-2, cf(-1)), (2, cf(3))]));
        assert_eq!(by_name("psi4"), from(&[(-4, cf(-3)), (0, cf(1))]));
        assert_eq!(by_name("psi5"), from(&[(-1, cf(-1))]));
        assert_eq!(by_name("psi6"), from(&[(-2, cf(3))]));
        assert_eq!(by_name("psi7"), from(&[(2, cf(-3))]));
        assert_eq!(by_name("psi8"), from(&[(1, cf(1))]));
    }

    #[test]
    fn fig2b_output_preserves_norm_after_jplate() {
        // After the J-plate, ℓ = 3 is V-only and ℓ = -2 is H-only, so the
        // folded paths never collide.
        let cfg = five();
        let map = cfg.label_map();
        let psi = crate::walk::evolve(&crate::walk::initial_state(&cfg, 1).unwrap(), &cfg, 3).unwrap();
        let h = hwp_operator(cfg.rho).unwrap();
        let after = jplate_action(&apply_polarization(&OamState::from_pure(&psi), &h), &map).unwrap();
        let trace = fig2b_trace(&after).unwrap();
        let output = &trace.last().unwrap().state;
        assert!((output.norm_sqr() - 1.0).abs() < 1e-12);
        let expected = step_operator(&cfg).unwrap().apply(&psi).unwrap();
        assert!((output.to_pure(&map).unwrap().fidelity(&expected) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fig2b_trace_single_coefficients() {
        let t = fig2b_trace(&OamState::basis(3, 0)).unwrap();
        assert_eq!(t[5].name, "psi6");
        assert_eq!(t[5].state, OamState::basis(-2, 0));
        let t = fig2b_trace(&OamState::basis(0, 0)).unwrap();
        assert_eq!(t[1].state, OamState::basis(0, 0));
        assert!(fig2b_trace(&OamState::basis(4, 0)).is_err());
    }

    #[test]
    fn canonical_layout_composes_to_the_walk_step() {
        let cfg = five();
        let u = compose_cycle_step(&canonical_five_cycle_layout(), &cfg).unwrap();
        assert!(u.distance(&step_operator(&cfg).unwrap()) < 1e-10);
    }

    #[test]
    fn layout_without_coin_is_the_shift() {
        let cfg = five();
        let mut layout = canonical_five_cycle_layout();
        layout.elements.remove(0);
        let u = compose_cycle_step(&layout, &cfg).unwrap();
        assert!(u.distance(&shift_operator(5).unwrap()) < 1e-10);
        let coin_only = OpticalLayout::new(5, vec![OpticalElement::HalfWavePlate { rho: None }]);
        let u = compose_cycle_step(&coin_only, &cfg).unwrap();
        assert!(u.distance(&coin_operator(&cfg).unwrap()) < 1e-12);
    }

    #[test]
    fn empty_layout_is_identity() {
        let u = compose_cycle_step(&OpticalLayout::new(5, vec![]), &five()).unwrap();
        assert!(u.distance(&UnitaryOperator::identity(10)) < 1e-15);
    }

    #[test]
    fn sorter_bank_layout_works_for_every_tabulated_cycle() {
        for k in TABLE1_KS {
            let cfg = WalkConfig::table1(k).unwrap();
            let check = verify_layout(&sorter_bank_layout(k), &cfg).unwrap();
            assert!(check.passed, "k = {k}: {check:?}");
        }
    }

    #[test]
    fn flipped_spp_is_detected() {
        let cfg = five();
        let mut layout = canonical_five_cycle_layout();
        let idx = layout
            .elements
            .iter()
            .position(|e| matches!(e, OpticalElement::SpiralPhasePlate { path: 2, m: 1 }))
            .unwrap();
        layout.elements[idx] = OpticalElement::SpiralPhasePlate { path: 2, m: -1 };
        let check = verify_layout(&layout, &cfg).unwrap();
        assert!(!check.passed);
        assert!(check.distance > 0.1);
        assert!(matches!(
            compose_cycle_step(&layout, &cfg),
            Err(QsdcError::LayoutInvalid { .. })
        ));
    }

    #[test]
    fn layout_text_round_trip() {
        let layout = canonical_five_cycle_layout();
        let parsed = OpticalLayout::parse(&layout.to_string()).unwrap();
        assert_eq!(parsed, layout);

        let text = "# five cycle\ncycle k=5\nhwp\njplate\nsorter path=0 alpha=pi\nspp path=1 m=-1\n\
                    sorter path=1 alpha=pi/2\nsorter path=2 alpha=pi/4 bias=pi/2\nsorter path=1 alpha=pi/4\n\
                    spp path=2 m=1\nspp path=3 m=-4\nspp path=4 m=6\nspp path=1 m=1\ncombine\n";
        let parsed = OpticalLayout::parse(text).unwrap();
        assert!(verify_layout(&parsed, &five()).unwrap().passed);
    }

    #[test]
    fn layout_parse_errors() {
        assert!(matches!(OpticalLayout::parse("hwp\n"), Err(QsdcError::LayoutParse { line: 0, .. })));
        assert!(matches!(
            OpticalLayout::parse("cycle k=5\nmirror\n"),
            Err(QsdcError::LayoutParse { line: 2, .. })
        ));
        assert!(matches!(
            OpticalLayout::parse("cycle k=5\nspp path=0\n"),
            Err(QsdcError::LayoutParse { line: 2, .. })
        ));
        assert_eq!(parse_angle("-3*pi/4"), Some(-3.0 * PI / 4.0));
        assert_eq!(parse_angle("0.25"), Some(0.25));
    }

    #[test]
    fn layout_referencing_missing_path_fails() {
        let layout = OpticalLayout::new(5, vec![OpticalElement::SpiralPhasePlate { path: 3, m: 1 }]);
        assert!(matches!(
            compose_cycle_step(&layout, &five()),
            Err(QsdcError::Configuration(_))
        ));
    }

    #[test]
    fn state_conversion_round_trip() {
        let cfg = five();
        let psi = crate::walk::evolve(&crate::walk::initial_state(&cfg, 2).unwrap(), &cfg, 7).unwrap();
        let map = cfg.label_map();
        let back = OamState::from_pure(&psi).to_pure(&map).unwrap();
        assert!((back.fidelity(&psi) - 1.0).abs() < 1e-12);
        assert!(OamState::basis(3, 0).to_pure(&map).is_err());
    }
}
