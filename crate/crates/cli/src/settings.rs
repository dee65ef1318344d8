//! Resolution of flags and `key=value` config files into one settings set.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use qsdc::attacks::EveStrategy;
use qsdc::info::StepWindow;
use qsdc::noise::{NoiseKind, NoisePlacement, NoiseSpec};
use qsdc::walk::{known_cycle_params, WalkConfig};

pub const KEYS: &[&str] = &[
    "k", "rho", "chi", "noise", "placement", "gamma", "steps", "n", "seed", "trials", "reps", "out",
    "eve", "x", "message", "window", "reference", "layout", "attempts",
];

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_config(text: &str, origin: &Path) -> Result<BTreeMap<String, String>> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| anyhow!("{}:{}: expected key=value", origin.display(), i + 1))?;
        let key = key.trim().replace('_', "-");
        if !KEYS.contains(&key.as_str()) {
            bail!("{}:{}: unknown key `{key}`", origin.display(), i + 1);
        }
        map.insert(key, value.trim().to_string());
    }
    Ok(map)
}

pub fn load_config(path: &Path) -> Result<BTreeMap<String, String>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_config(&text, path)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveChoice {
    None,
    InterceptResend,
    Tamper,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Reference {
    Step,
    Identity,
    Shift,
    Coin,
}

#[derive(Debug, Clone)]
pub struct Settings {
    pub k: usize,
    pub rho: f64,
    pub chi: f64,
    pub noise: NoiseKind,
    pub placement: NoisePlacement,
    pub gammas: Vec<f64>,
    pub steps: Option<usize>,
    pub n: usize,
    pub seed: u64,
    pub trials: usize,
    pub reps: usize,
    pub out: Option<PathBuf>,
    pub eve: EveChoice,
    pub x: usize,
    pub message: String,
    pub window: StepWindow,
    pub reference: Reference,
    pub layout: Option<PathBuf>,
    pub attempts: usize,
    /// Recurrence period, when known for `(k, rho)`.
    pub t_r: Option<usize>,
}

fn parse<T: std::str::FromStr>(map: &BTreeMap<String, String>, key: &str) -> Result<Option<T>> {
    match map.get(key) {
        None => Ok(None),
        Some(v) => v
            .parse::<T>()
            .map(Some)
            .map_err(|_| anyhow!("invalid value `{v}` for `{key}`")),
    }
}

impl Settings {
    pub fn resolve(map: &BTreeMap<String, String>) -> Result<Self> {
        let k: usize = parse(map, "k")?.unwrap_or(5);
        if k < 2 {
            bail!("k must be at least 2");
        }
        let (rho, t_r) = match map.get("rho").map(String::as_str) {
            None | Some("table1") => {
                let (rho, t_r) = known_cycle_params(k)
                    .map_err(|_| anyhow!("no tabulated rho for k = {k}; pass --rho"))?;
                (rho, Some(t_r))
            }
            Some(v) if v.starts_with("table1:") => {
                let from: usize = v["table1:".len()..]
                    .parse()
                    .map_err(|_| anyhow!("invalid value `{v}` for `rho`"))?;
                let (rho, t_r) = known_cycle_params(from)
                    .map_err(|_| anyhow!("no tabulated rho for k = {from}"))?;
                (rho, (from == k).then_some(t_r))
            }
            Some(v) => {
                let rho: f64 = v.parse().map_err(|_| anyhow!("invalid value `{v}` for `rho`"))?;
                if !(0.0..=1.0).contains(&rho) {
                    bail!("rho must lie in [0, 1]");
                }
                let t_r = known_cycle_params(k)
                    .ok()
                    .filter(|(r, _)| (r - rho).abs() < 1e-12)
                    .map(|(_, t)| t);
                (rho, t_r)
            }
        };
        let noise = match map.get("noise").map(String::as_str) {
            None | Some("none") => NoiseKind::None,
            Some("amplitude-damping" | "ad") => NoiseKind::AmplitudeDamping,
            Some("depolarizing" | "dep") => NoiseKind::Depolarizing,
            Some(v) => bail!("invalid value `{v}` for `noise` (none, amplitude-damping, depolarizing)"),
        };
        let placement = match map.get("placement").map(String::as_str) {
            None | Some("per-element") => NoisePlacement::PerElement,
            Some("per-step") => NoisePlacement::PerStep,
            Some(v) => bail!("invalid value `{v}` for `placement` (per-element, per-step)"),
        };
        let gammas = match map.get("gamma") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .map(|g| {
                    let g: f64 = g
                        .trim()
                        .parse()
                        .map_err(|_| anyhow!("invalid value `{g}` in `gamma`"))?;
                    if !(0.0..=1.0).contains(&g) {
                        bail!("gamma must lie in [0, 1]");
                    }
                    Ok(g)
                })
                .collect::<Result<_>>()?,
        };
        let eve = match map.get("eve").map(String::as_str) {
            None | Some("none") => EveChoice::None,
            Some("intercept-resend" | "intercept_resend_all" | "intercept-resend-all") => {
                EveChoice::InterceptResend
            }
            Some("tamper" | "tamper_subset" | "tamper-subset") => EveChoice::Tamper,
            Some(v) => bail!("invalid value `{v}` for `eve` (none, intercept-resend, tamper)"),
        };
        let window = match map.get("window").map(String::as_str) {
            None | Some("period") => StepWindow::Period,
            Some("protocol") => StepWindow::Protocol,
            Some(v) => bail!("invalid value `{v}` for `window` (period, protocol)"),
        };
        let reference = match map.get("reference").map(String::as_str) {
            None | Some("step") => Reference::Step,
            Some("identity") => Reference::Identity,
            Some("shift") => Reference::Shift,
            Some("coin") => Reference::Coin,
            Some(v) => bail!("invalid value `{v}` for `reference` (step, identity, shift, coin)"),
        };
        let reps = parse(map, "reps")?.unwrap_or(1);
        if reps % 2 == 0 {
            bail!("reps must be odd");
        }
        let n = parse(map, "n")?.unwrap_or(40);
        if n == 0 || n % 4 != 0 {
            bail!("n must be a positive multiple of 4");
        }
        Ok(Self {
            k,
            rho,
            chi: parse(map, "chi")?.unwrap_or(FRAC_PI_4),
            noise,
            placement,
            gammas,
            steps: parse(map, "steps")?,
            n,
            seed: parse(map, "seed")?.unwrap_or(0),
            trials: parse(map, "trials")?.unwrap_or(1),
            reps,
            out: map.get("out").map(PathBuf::from),
            eve,
            x: parse(map, "x")?.unwrap_or(0),
            message: map.get("message").cloned().unwrap_or_else(|| "hello".into()),
            window,
            reference,
            layout: map.get("layout").map(PathBuf::from),
            attempts: parse(map, "attempts")?.unwrap_or(1000),
            t_r,
        })
    }

    pub fn walk_config(&self) -> Result<WalkConfig> {
        let mut cfg = WalkConfig::new(self.k, self.rho)?.with_chi(self.chi);
        if let Some(t) = self.t_r {
            cfg = cfg.with_recurrence(t);
        }
        Ok(cfg)
    }

    /// Recurrence period, searched up to `limit` steps when not tabulated.
    pub fn recurrence(&self, limit: usize) -> Result<Option<usize>> {
        match self.t_r {
            Some(t) => Ok(Some(t)),
            None => Ok(qsdc::walk::find_recurrence(&self.walk_config()?, limit)?),
        }
    }

    /// First γ of the list, or 0.
    pub fn gamma(&self) -> f64 {
        self.gammas.first().copied().unwrap_or(0.0)
    }

    pub fn noise_spec(&self, gamma: f64) -> Result<NoiseSpec> {
        let kind = if gamma == 0.0 { NoiseKind::None } else { self.noise };
        Ok(NoiseSpec::new(kind, gamma)?.with_placement(self.placement))
    }

    pub fn eve_strategy(&self) -> Option<EveStrategy> {
        match self.eve {
            EveChoice::None => None,
            EveChoice::InterceptResend => Some(EveStrategy::InterceptResendAll),
            EveChoice::Tamper => Some(EveStrategy::TamperSubset { x: self.x }),
        }
    }

    /// Header lines describing the resolved run.
    pub fn describe(&self) -> Vec<(&'static str, String)> {
        use crate::output::fmt_g;
        let noise = match self.noise {
            NoiseKind::None => "none",
            NoiseKind::AmplitudeDamping => "amplitude-damping",
            NoiseKind::Depolarizing => "depolarizing",
        };
        let placement = match self.placement {
            NoisePlacement::PerElement => "per-element",
            NoisePlacement::PerStep => "per-step",
        };
        let gammas: Vec<String> = self.gammas.iter().map(|g| fmt_g(*g)).collect();
        let eve = match self.eve {
            EveChoice::None => "none",
            EveChoice::InterceptResend => "intercept-resend",
            EveChoice::Tamper => "tamper",
        };
        vec![
            ("k", self.k.to_string()),
            ("rho", fmt_g(self.rho)),
            ("chi", fmt_g(self.chi)),
            ("noise", noise.into()),
            ("placement", placement.into()),
            ("gamma", if gammas.is_empty() { "0".into() } else { gammas.join(",") }),
            ("n", self.n.to_string()),
            ("seed", self.seed.to_string()),
            ("trials", self.trials.to_string()),
            ("reps", self.reps.to_string()),
            ("eve", eve.into()),
            ("x", self.x.to_string()),
        ]
    }
}
