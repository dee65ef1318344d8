//! Eavesdropper models, closed-form security figures and Monte Carlo
//! estimators for cross-checking them.

use std::fmt::Write as _;

use rand::Rng;
use statrs::function::factorial::ln_binomial;

use crate::noise::NoiseSpec;
use crate::protocol::{run_until_secure, PhotonRecord, PhotonState, ProtocolParams, Role, WalkChannel};
use crate::rng::{trial_rng, SimRng};
use crate::walk::{evolve_with, position_distribution, PureState, UnitaryOperator, WalkConfig};
use crate::{QsdcError, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EveStrategy {
    /// Measure every photon on its way to Alice and resend a fresh one.
    InterceptResendAll,
    /// Shift the OAM of `x` random photons on the way back to Bob.
    TamperSubset { x: usize },
}

/// Eve guesses `t_E` uniformly on `{2, …, t_r}`, completes the cycle as if
/// `t_E` were right, measures ℓ_E and sends a fresh photon prepared at ℓ_E
/// with the default coin and advanced `t_E` steps. Returns `(t_E, ℓ_E)`.
pub fn intercept_resend_eve(
    photon: &mut PhotonRecord,
    channel: &mut WalkChannel,
    rng: &mut SimRng,
) -> Result<(usize, i32)> {
    let t_r = channel.t_r();
    let t_e = rng.random_range(2..=t_r);
    let probe = PhotonState {
        shift: photon.state.shift,
        steps: photon.state.steps + (t_r - t_e),
    };
    let x = channel.sample_index(probe, rng)?;
    photon.state = PhotonState { shift: x, steps: t_e };
    photon.tampered = true;
    Ok((t_e, channel.label_map().label(x)))
}

/// Shifts the photon's OAM by a random non-zero amount `e ∈ {1, …, k-1}`
/// index units and returns `e`.
pub fn tamper_photon(photon: &mut PhotonRecord, k: usize, rng: &mut SimRng) -> usize {
    let e = rng.random_range(1..k);
    photon.state.shift = (photon.state.shift + e) % k;
    photon.tampered = true;
    e
}

/// Exact probability that an intercept-resent photon passes Alice's check,
/// for an arbitrary step operator. Enumerates ℓ_i, t_i, t_E and Eve's
/// outcome; the position distribution after `m` steps from every start is
/// tabulated once.
pub fn intercept_resend_pass_probability_with_step(
    step: &UnitaryOperator,
    k: usize,
    t_r: usize,
    chi: f64,
) -> Result<f64> {
    if t_r < 2 {
        return Err(QsdcError::ParameterDomain {
            name: "t_r",
            value: t_r as f64,
            expected: "t_r >= 2",
        });
    }
    if step.dim() != 2 * k {
        return Err(QsdcError::Shape {
            expected: 2 * k,
            actual: step.dim(),
        });
    }
    let max_m = 2 * t_r;
    // table[start][m][pos]
    let mut table = Vec::with_capacity(k);
    for start in 0..k {
        let mut amps = vec![C64::new(0.0, 0.0); 2 * k];
        amps[start] = C64::new(chi.cos(), 0.0);
        amps[k + start] = C64::new(0.0, chi.sin());
        let mut psi = PureState::from_amplitudes(k, amps)?;
        let mut rows = Vec::with_capacity(max_m + 1);
        rows.push(position_distribution(&psi));
        for _ in 0..max_m {
            psi = evolve_with(&psi, step, 1)?;
            rows.push(position_distribution(&psi));
        }
        table.push(rows);
    }
    let mut total = 0.0;
    for (ell, from_ell) in table.iter().enumerate() {
        for t_i in 2..=t_r {
            for t_e in 2..=t_r {
                let eve = &from_ell[t_i + t_r - t_e];
                for (o, &p_o) in eve.iter().enumerate() {
                    total += p_o * table[o][t_e + t_r - t_i][ell];
                }
            }
        }
    }
    let n = (t_r - 1) as f64;
    Ok(total / (k as f64 * n * n))
}

/// Per-photon pass probability under intercept-resend for the walk and
/// channel noise of `config` and `noise`. Uses translation invariance, so
/// only distributions from index 0 are needed.
pub fn intercept_resend_pass_probability(config: &WalkConfig, noise: NoiseSpec) -> Result<f64> {
    let mut ch = WalkChannel::new(config, noise)?;
    let t_r = ch.t_r();
    let k = ch.k();
    let mut total = 0.0;
    for t_i in 2..=t_r {
        for t_e in 2..=t_r {
            let eve = ch.base_distribution(t_i + t_r - t_e)?.to_vec();
            let back = ch.base_distribution(t_e + t_r - t_i)?;
            for (o, &p_o) in eve.iter().enumerate() {
                total += p_o * back[(k - o) % k];
            }
        }
    }
    let n = (t_r - 1) as f64;
    Ok(total / (n * n))
}

/// Probability that a single intercept-resent photon fails Alice's check on
/// the noiseless walk: one minus [`intercept_resend_pass_probability`].
pub fn analytic_detection_probability(config: &WalkConfig) -> Result<f64> {
    Ok(1.0 - intercept_resend_pass_probability(config, NoiseSpec::none())?)
}

/// Successes out of trials with the binomial standard error.
#[derive(Debug, Clone, PartialEq)]
pub struct RateEstimate {
    pub successes: usize,
    pub trials: usize,
}

impl RateEstimate {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }

    pub fn std_error(&self) -> f64 {
        if self.trials == 0 {
            return 0.0;
        }
        let p = self.rate();
        (p * (1.0 - p) / self.trials as f64).sqrt()
    }

    /// `|rate - p| ≤ z σ`, with σ taken at the reference value `p`.
    pub fn agrees_with(&self, p: f64, z: f64) -> bool {
        let sigma = (p * (1.0 - p) / self.trials as f64).sqrt();
        (self.rate() - p).abs() <= z * sigma
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InterceptResendSample {
    pub passes: RateEstimate,
    /// Counts of Eve's guesses, indexed by `t_E`.
    pub guess_counts: Vec<usize>,
}

/// Single-photon Monte Carlo: Bob prepares, Eve intercepts and resends,
/// Alice checks. Trial `i` draws from stream `i` of `seed`.
pub fn intercept_resend_monte_carlo(
    config: &WalkConfig,
    noise: NoiseSpec,
    trials: usize,
    seed: u64,
) -> Result<InterceptResendSample> {
    let mut ch = WalkChannel::new(config, noise)?;
    let k = ch.k();
    let t_r = ch.t_r();
    let mut guess_counts = vec![0; t_r + 1];
    let mut successes = 0;
    for trial in 0..trials {
        let mut rng = trial_rng(seed, trial as u64);
        let x = rng.random_range(0..k);
        let t_i = rng.random_range(2..=t_r);
        let mut photon = PhotonRecord {
            id: 0,
            ell_i: ch.label_map().label(x),
            t_i,
            role: Some(Role::SecuritySample),
            state: PhotonState { shift: x, steps: t_i },
            encoded_digit: None,
            tampered: false,
        };
        let (t_e, _) = intercept_resend_eve(&mut photon, &mut ch, &mut rng)?;
        guess_counts[t_e] += 1;
        let final_state = PhotonState {
            shift: photon.state.shift,
            steps: photon.state.steps + (t_r - t_i),
        };
        if ch.sample_index(final_state, &mut rng)? == x {
            successes += 1;
        }
    }
    Ok(InterceptResendSample {
        passes: RateEstimate { successes, trials },
        guess_counts,
    })
}

fn check_sizes(n_sample: usize, t_r: usize) -> Result<()> {
    if n_sample == 0 {
        return Err(QsdcError::ParameterDomain {
            name: "N",
            value: 0.0,
            expected: "N >= 1",
        });
    }
    if t_r < 2 {
        return Err(QsdcError::ParameterDomain {
            name: "t_r",
            value: t_r as f64,
            expected: "t_r >= 2",
        });
    }
    Ok(())
}

/// `log10` of the probability that Eve picks out the `2N` message photons
/// among `3N` and guesses every one of their `t_i`:
/// `1 / (C(3N, 2N) (t_r - 1)^{2N})`.
pub fn log10_decrypt_probability(n_sample: usize, t_r: usize) -> Result<f64> {
    check_sizes(n_sample, t_r)?;
    let n = n_sample as u64;
    let ln = -ln_binomial(3 * n, 2 * n) - (2 * n) as f64 * ((t_r - 1) as f64).ln();
    Ok(ln / std::f64::consts::LN_10)
}

/// See [`log10_decrypt_probability`]; underflows to 0 for large `N`.
pub fn decrypt_probability(n_sample: usize, t_r: usize) -> Result<f64> {
    Ok(10f64.powf(log10_decrypt_probability(n_sample, t_r)?))
}

/// Hypergeometric law of the number `y` of dummies among `x` photons drawn
/// from `N` dummies and `2N` message photons. Index `y` runs `0..=min(N, x)`.
pub fn dummy_hit_distribution(x: usize, n_sample: usize) -> Result<Vec<f64>> {
    let n = n_sample as u64;
    if x > 3 * n_sample {
        return Err(QsdcError::ParameterDomain {
            name: "x",
            value: x as f64,
            expected: "0 <= x <= 3N",
        });
    }
    let x64 = x as u64;
    let total = ln_binomial(3 * n, x64);
    let lo = x64.saturating_sub(2 * n);
    Ok((0..=x64.min(n))
        .map(|y| {
            if y < lo {
                0.0
            } else {
                (ln_binomial(n, y) + ln_binomial(2 * n, x64 - y) - total).exp()
            }
        })
        .collect())
}

/// `1 - P(y = 0)`: some tampered photon is a dummy.
pub fn tamper_detection_probability(x: usize, n_sample: usize) -> Result<f64> {
    Ok(1.0 - dummy_hit_distribution(x, n_sample)?[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct AttackReport {
    pub x: usize,
    pub n_sample: usize,
    pub trials: usize,
    /// Runs whose dummy check failed.
    pub detections: usize,
    /// `y_histogram[y]`: runs in which `y` tampered photons were dummies.
    pub y_histogram: Vec<usize>,
    pub y_analytic: Vec<f64>,
    /// Noiseless detection probability `1 - C(2N, x) / C(3N, x)`.
    pub analytic_detection: f64,
    /// Mean number of dummies returning the wrong ℓ per run.
    pub mean_dummy_failures: f64,
    /// Message digits received wrong in runs that passed the dummy check.
    pub altered_undetected: usize,
    /// Protocol restarts caused by failed security checks.
    pub restarts: usize,
}

impl AttackReport {
    pub fn detection(&self) -> RateEstimate {
        RateEstimate {
            successes: self.detections,
            trials: self.trials,
        }
    }

    pub fn detection_rate(&self) -> f64 {
        self.detection().rate()
    }

    pub fn std_error(&self) -> f64 {
        self.detection().std_error()
    }

    /// Tab-separated `key  value` lines followed by `y  count  analytic`
    /// rows.
    pub fn to_tsv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "x\t{}", self.x);
        let _ = writeln!(s, "N\t{}", self.n_sample);
        let _ = writeln!(s, "trials\t{}", self.trials);
        let _ = writeln!(s, "detections\t{}", self.detections);
        let _ = writeln!(s, "detection_rate\t{}", fmt_float(self.detection_rate()));
        let _ = writeln!(s, "std_error\t{}", fmt_float(self.std_error()));
        let _ = writeln!(s, "analytic_detection\t{}", fmt_float(self.analytic_detection));
        let _ = writeln!(s, "mean_dummy_failures\t{}", fmt_float(self.mean_dummy_failures));
        let _ = writeln!(s, "altered_undetected\t{}", self.altered_undetected);
        let _ = writeln!(s, "restarts\t{}", self.restarts);
        let _ = writeln!(s, "y\tcount\tanalytic");
        for (y, (&c, &p)) in self.y_histogram.iter().zip(&self.y_analytic).enumerate() {
            let _ = writeln!(s, "{y}\t{c}\t{}", fmt_float(p));
        }
        s
    }
}

fn fmt_float(v: f64) -> String {
    format!("{v:.12e}")
}

/// Full protocol runs in which Eve shifts `x` random photons on the return
/// leg. Each trial restarts until Alice's security check passes, then
/// records whether Bob's dummy check caught the tampering.
pub fn optimal_attack_simulation(params: &ProtocolParams, x: usize, trials: usize) -> Result<AttackReport> {
    let n_sample = params.sample_size();
    let y_analytic = dummy_hit_distribution(x, n_sample)?;
    let mut channel = WalkChannel::new(&params.config, params.noise)?;
    let eve = EveStrategy::TamperSubset { x };
    let mut report = AttackReport {
        x,
        n_sample,
        trials,
        detections: 0,
        y_histogram: vec![0; y_analytic.len()],
        analytic_detection: 1.0 - y_analytic[0],
        y_analytic,
        mean_dummy_failures: 0.0,
        altered_undetected: 0,
        restarts: 0,
    };
    let mut dummy_failures = 0usize;
    for trial in 0..trials {
        let mut rng = trial_rng(params.seed, trial as u64);
        let (attempts, t) = run_until_secure(params, &[], Some(&eve), &mut channel, &mut rng, 1_000_000)?;
        report.restarts += attempts - 1;
        if !t.security_pass {
            return Err(QsdcError::ProtocolViolation(
                "security check never passed".into(),
            ));
        }
        let y = t.photons_with_role(Role::Dummy).filter(|p| p.tampered).count();
        report.y_histogram[y] += 1;
        let failed = t
            .events
            .iter()
            .filter(|e| {
                e.kind == crate::protocol::EventKind::DummyMeasure && e.outcome.as_deref() == Some("fail")
            })
            .count();
        dummy_failures += failed;
        if t.dummy_pass == Some(false) {
            report.detections += 1;
        } else if let Some(decoded) = &t.decoded_digits {
            report.altered_undetected += decoded
                .iter()
                .zip(&t.sent_digits)
                .filter(|(a, b)| a != b)
                .count();
        }
    }
    report.mean_dummy_failures = dummy_failures as f64 / trials.max(1) as f64;
    Ok(report)
}
