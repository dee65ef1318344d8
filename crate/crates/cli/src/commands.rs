use anyhow::{anyhow, bail, Result};
use qsdc::attacks::{
    decrypt_probability, intercept_resend_monte_carlo, intercept_resend_pass_probability,
    log10_decrypt_probability, optimal_attack_simulation,
};
use qsdc::codec::MessageCodec;
use qsdc::info::{
    eve_mutual_information, joint_distribution, marginal_oam, mutual_information_quantum,
    StepWindow,
};
use qsdc::noise::{noisy_trajectory, to_density, NoiseKind, NoiseSpec};
use qsdc::optics::{
    canonical_five_cycle_layout, check_layout, sorter_bank_layout, OpticalLayout,
};
use qsdc::protocol::{
    run_majority, run_protocol_with, run_until_secure, ProtocolParams, Transcript, WalkChannel,
};
use qsdc::rng::{seeded_rng, trial_rng};
use qsdc::walk::{
    coin_operator, evolve_with, find_recurrence, initial_state, position_distribution,
    shift_operator, step_operator, UnitaryOperator, WalkConfig, TABLE1_KS,
};
use qsdc::QsdcError;

use crate::output::{fmt_g, Document};
use crate::settings::{EveChoice, Reference, Settings};

pub enum Status {
    Ok,
    VerificationFailed(String),
}

const RECURRENCE_SEARCH: usize = 1000;

fn header(command: &str, s: &Settings) -> Document {
    let mut d = Document::new(command);
    for (key, value) in s.describe() {
        d.meta(key, value);
    }
    d
}

fn default_steps(s: &Settings, periods: usize, fallback: usize) -> Result<usize> {
    Ok(match s.steps {
        Some(t) => t,
        None => s.recurrence(RECURRENCE_SEARCH)?.map_or(fallback, |t| periods * t),
    })
}

/// Return probabilities `P_1(t)`, `t = 0..=t_max`, and the coin-position
/// mutual information along the way.
fn trajectory(cfg: &WalkConfig, noise: NoiseSpec, t_max: usize, with_info: bool) -> Result<Vec<(f64, f64)>> {
    if noise.is_noiseless() {
        let step = step_operator(cfg)?;
        let mut psi = initial_state(cfg, 0)?;
        let mut out = Vec::with_capacity(t_max + 1);
        for t in 0..=t_max {
            if t > 0 {
                psi = evolve_with(&psi, &step, 1)?;
            }
            let info = if with_info {
                mutual_information_quantum(&to_density(&psi))?
            } else {
                0.0
            };
            out.push((position_distribution(&psi)[0], info));
        }
        return Ok(out);
    }
    noisy_trajectory(cfg, noise, t_max)?
        .iter()
        .map(|rho| {
            let info = if with_info {
                mutual_information_quantum(rho)?
            } else {
                0.0
            };
            Ok((qsdc::noise::position_distribution(rho)[0], info))
        })
        .collect()
}

pub fn walk(s: &Settings) -> Result<Status> {
    let cfg = s.walk_config()?;
    let t_max = default_steps(s, 2, 100)?;
    let mut d = header("walk", s);
    d.meta("steps", t_max);
    if let Some(t) = s.recurrence(RECURRENCE_SEARCH)? {
        d.meta("t_r", t);
    }
    d.meta("initial_index", 0);
    d.meta("initial_position", 1);
    d.meta("initial_ell", cfg.label_map().ell_min);
    d.row(&["t", "p_initial"]);
    for (t, (p, _)) in trajectory(&cfg, s.noise_spec(s.gamma())?, t_max, false)?.into_iter().enumerate() {
        d.row(&[t.to_string(), fmt_g(p)]);
    }
    d.emit(s.out.as_deref())?;
    Ok(Status::Ok)
}

pub fn table1(s: &Settings) -> Result<Status> {
    let mut d = Document::new("table1");
    d.meta("chi", fmt_g(s.chi));
    d.meta("window", window_name(s.window));
    d.row(&["k", "rho", "t_r", "p_ell_min", "eve_information"]);
    for k in TABLE1_KS {
        let base = WalkConfig::table1(k)?;
        let cfg = WalkConfig::new(k, base.rho)?.with_chi(s.chi);
        let t_r = find_recurrence(&cfg, RECURRENCE_SEARCH)?
            .ok_or_else(|| anyhow!("no recurrence found for k = {k}"))?;
        let j = joint_distribution(&cfg.with_recurrence(t_r), s.window)?;
        d.row(&[
            k.to_string(),
            fmt_g(cfg.rho),
            t_r.to_string(),
            fmt_g(marginal_oam(&j)[0]),
            fmt_g(eve_mutual_information(&j)),
        ]);
    }
    d.emit(s.out.as_deref())?;
    Ok(Status::Ok)
}

fn window_name(w: StepWindow) -> &'static str {
    match w {
        StepWindow::Period => "period",
        StepWindow::Protocol => "protocol",
    }
}

pub fn noise_sweep(s: &Settings) -> Result<Status> {
    let mut s = s.clone();
    if s.noise == NoiseKind::None {
        s.noise = NoiseKind::AmplitudeDamping;
    }
    if s.gammas.is_empty() {
        s.gammas = vec![0.0, 0.0007, 0.01, 0.1, 0.5];
    }
    let cfg = s.walk_config()?;
    let t_max = default_steps(&s, 1, 60)?;
    let mut d = header("noise-sweep", &s);
    d.meta("steps", t_max);
    d.row(&["t", "gamma", "p_initial", "mutual_information"]);
    for &g in &s.gammas {
        for (t, (p, info)) in trajectory(&cfg, s.noise_spec(g)?, t_max, true)?.into_iter().enumerate() {
            d.row(&[t.to_string(), fmt_g(g), fmt_g(p), fmt_g(info)]);
        }
    }
    d.emit(s.out.as_deref())?;
    Ok(Status::Ok)
}

pub fn joint(s: &Settings) -> Result<Status> {
    let cfg = s.walk_config()?;
    let t_r = s
        .recurrence(RECURRENCE_SEARCH)?
        .ok_or_else(|| anyhow!("no recurrence within {RECURRENCE_SEARCH} steps"))?;
    let j = joint_distribution(&cfg.with_recurrence(t_r), s.window)?;
    let mut d = header("joint", s);
    d.meta("t_r", t_r);
    d.meta("window", window_name(s.window));
    d.meta("total", fmt_g(j.total()));
    d.meta("p_ell_min", fmt_g(marginal_oam(&j)[0]));
    d.meta("eve_information", fmt_g(eve_mutual_information(&j)));
    let steps: Vec<usize> = s.window.steps(t_r).collect();
    let mut head = vec!["ell".to_string()];
    head.extend(steps.iter().map(|t| format!("t={t}")));
    d.row(&head);
    for (i, ell) in j.label_map.labels().enumerate() {
        let mut row = vec![ell.to_string()];
        row.extend((0..steps.len()).map(|c| fmt_g(j.table[(i, c)])));
        d.row(&row);
    }
    d.emit(s.out.as_deref())?;
    Ok(Status::Ok)
}

fn protocol_params(s: &Settings) -> Result<ProtocolParams> {
    let cfg = s.walk_config()?;
    let t_r = s
        .recurrence(RECURRENCE_SEARCH)?
        .ok_or_else(|| anyhow!("the walk has no recurrence within {RECURRENCE_SEARCH} steps"))?;
    Ok(ProtocolParams::new(s.n, cfg.with_recurrence(t_r), s.seed)?
        .with_noise(s.noise_spec(s.gamma())?)
        .with_repetitions(s.reps)?)
}

fn escape(bytes: &[u8]) -> String {
    bytes.escape_ascii().to_string()
}

pub fn protocol(s: &Settings) -> Result<Status> {
    let params = protocol_params(s)?;
    if s.trials > 1 {
        return protocol_batch(s, &params);
    }
    let codec = MessageCodec::new(s.k)?;
    let digits = codec.encode(s.message.as_bytes());
    if digits.len() > params.capacity() {
        bail!(
            "message needs {} digits but n = {} carries {}; raise --n",
            digits.len(),
            s.n,
            params.capacity()
        );
    }
    let eve = s.eve_strategy();
    let mut rng = seeded_rng(s.seed);
    let mut d = header("protocol", s);
    d.meta("t_r", params.t_r());
    d.meta("attempts_allowed", s.attempts);
    d.meta("message", escape(s.message.as_bytes()));
    d.meta("digits_sent", join(&digits));

    let (attempts, transcripts, received): (usize, Vec<Transcript>, Option<Vec<usize>>) = if s.reps == 1 {
        let mut channel = WalkChannel::new(&params.config, params.noise)?;
        let (a, t) = run_until_secure(&params, &digits, eve.as_ref(), &mut channel, &mut rng, s.attempts)?;
        let got = t.message(digits.len()).map(<[usize]>::to_vec);
        (a, vec![t], got)
    } else {
        match run_majority(&params, &digits, eve.as_ref(), &mut rng, s.attempts) {
            Ok(m) => (m.attempts, m.runs, Some(m.voted)),
            Err(QsdcError::ProtocolViolation(_)) => (s.attempts, Vec::new(), None),
            Err(e) => return Err(e.into()),
        }
    };
    let exact = received.as_deref() == Some(&digits[..]);
    d.meta("attempts", attempts);
    if let Some(last) = transcripts.last() {
        d.meta("security_pass", last.security_pass);
        d.meta(
            "dummy_pass",
            last.dummy_pass.map_or("-".to_string(), |p| p.to_string()),
        );
    }
    match &received {
        Some(r) => {
            d.meta("digits_received", join(r));
            let text = codec.decode(r).map(|b| escape(&b)).unwrap_or_else(|_| "-".into());
            d.meta("message_received", text);
        }
        None => d.meta("digits_received", "-"),
    }
    d.meta("message_exact", exact);
    for (i, t) in transcripts.iter().enumerate() {
        if transcripts.len() > 1 {
            d.comment(&format!("repetition={}", i + 1));
        }
        d.raw(&t.to_tsv());
    }
    d.emit(s.out.as_deref())?;
    Ok(if exact {
        Status::Ok
    } else {
        Status::VerificationFailed("message not delivered intact".into())
    })
}

fn join(digits: &[usize]) -> String {
    digits.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
}

/// Independent single runs (no restarts); reports how often Alice's check
/// aborts and, against intercept-resend, compares with the exact oracle.
fn protocol_batch(s: &Settings, params: &ProtocolParams) -> Result<Status> {
    let eve = s.eve_strategy();
    let mut channel = WalkChannel::new(&params.config, params.noise)?;
    let mut d = header("protocol", s);
    d.meta("t_r", params.t_r());
    let mut rows = Vec::with_capacity(s.trials);
    let (mut aborted, mut dummy_failed) = (0usize, 0usize);
    for trial in 0..s.trials {
        let mut rng = trial_rng(s.seed, trial as u64);
        let t = run_protocol_with(params, &[], eve.as_ref(), &mut channel, &mut rng)?;
        if !t.security_pass {
            aborted += 1;
        }
        if t.dummy_pass == Some(false) {
            dummy_failed += 1;
        }
        let errors = t.decoded_digits.as_ref().map(|dec| {
            dec.iter().zip(&t.sent_digits).filter(|(a, b)| a != b).count()
        });
        rows.push([
            trial.to_string(),
            t.security_pass.to_string(),
            t.dummy_pass.map_or("-".into(), |p| p.to_string()),
            errors.map_or("-".into(), |e| e.to_string()),
        ]);
    }
    let rate = aborted as f64 / s.trials as f64;
    d.meta("detection_rate", fmt_g(rate));
    d.meta("std_error", fmt_g((rate * (1.0 - rate) / s.trials as f64).sqrt()));
    d.meta("dummy_failures", dummy_failed);
    let mut status = Status::Ok;
    if s.eve == EveChoice::InterceptResend {
        let pass = intercept_resend_pass_probability(&params.config, params.noise)?;
        let predicted = 1.0 - pass.powi(params.sample_size() as i32);
        let sigma = (predicted * (1.0 - predicted) / s.trials as f64).sqrt();
        let within = (rate - predicted).abs() <= 3.0 * sigma;
        d.meta("per_photon_pass", fmt_g(pass));
        d.meta("predicted_detection", fmt_g(predicted));
        d.meta("within_3sigma", within);
        if !within {
            status = Status::VerificationFailed(format!(
                "detection rate {rate} is more than 3 sigma from {predicted}"
            ));
        }
    }
    d.row(&["run", "security_pass", "dummy_pass", "digit_errors"]);
    for r in rows {
        d.row(&r);
    }
    d.emit(s.out.as_deref())?;
    Ok(status)
}

pub fn attack(s: &Settings) -> Result<Status> {
    let params = protocol_params(s)?;
    let mut d = header("attack", s);
    d.meta("t_r", params.t_r());
    let n_sample = params.sample_size();
    d.meta("decrypt_probability", fmt_g(decrypt_probability(n_sample, params.t_r())?));
    d.meta("decrypt_log10", fmt_g(log10_decrypt_probability(n_sample, params.t_r())?));
    if s.eve == EveChoice::InterceptResend {
        let mc = intercept_resend_monte_carlo(&params.config, params.noise, s.trials, s.seed)?;
        let oracle = intercept_resend_pass_probability(&params.config, params.noise)?;
        let within = mc.passes.agrees_with(oracle, 3.0);
        d.meta("pass_rate", fmt_g(mc.passes.rate()));
        d.meta("std_error", fmt_g(mc.passes.std_error()));
        d.meta("oracle_pass", fmt_g(oracle));
        d.meta("within_3sigma", within);
        d.row(&["t_e", "count"]);
        for (t, c) in mc.guess_counts.iter().enumerate().skip(2) {
            d.row(&[t.to_string(), c.to_string()]);
        }
        d.emit(s.out.as_deref())?;
        return Ok(if within {
            Status::Ok
        } else {
            Status::VerificationFailed("intercept-resend pass rate outside 3 sigma".into())
        });
    }
    let report = optimal_attack_simulation(&params, s.x, s.trials)?;
    d.raw(&report.to_tsv());
    d.emit(s.out.as_deref())?;
    Ok(Status::Ok)
}

fn load_layout(s: &Settings) -> Result<(String, OpticalLayout)> {
    match s.layout.as_ref().and_then(|p| p.to_str()) {
        None | Some("canonical") => {
            if s.k != 5 {
                bail!("the canonical layout is a 5-cycle; use `sorter-bank` or a layout file for k = {}", s.k);
            }
            Ok(("canonical".into(), canonical_five_cycle_layout()))
        }
        Some("sorter-bank") => Ok(("sorter-bank".into(), sorter_bank_layout(s.k))),
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| anyhow!("reading {path}: {e}"))?;
            Ok((path.to_string(), OpticalLayout::parse(&text)?))
        }
    }
}

pub fn verify_optics(s: &Settings) -> Result<Status> {
    let (name, layout) = load_layout(s)?;
    let cfg = if layout.k == s.k {
        s.walk_config()?
    } else {
        WalkConfig::table1(layout.k)?
    };
    let (reference, ref_name) = match s.reference {
        Reference::Step => (step_operator(&cfg)?, "step"),
        Reference::Identity => (UnitaryOperator::identity(2 * layout.k), "identity"),
        Reference::Shift => (shift_operator(layout.k)?, "shift"),
        Reference::Coin => (coin_operator(&cfg)?, "coin"),
    };
    let mut d = Document::new("verify-optics");
    d.meta("layout", &name);
    d.meta("k", layout.k);
    d.meta("rho", fmt_g(cfg.rho));
    d.meta("reference", ref_name);
    d.meta("tolerance", "1e-10");
    d.row(&["distance", "unitarity_defect", "passed"]);
    let status = match check_layout(&layout, &cfg, &reference, 1e-10) {
        Ok(c) => {
            d.row(&[fmt_g(c.distance), fmt_g(c.unitarity_defect), c.passed.to_string()]);
            if c.passed {
                Status::Ok
            } else {
                Status::VerificationFailed(format!("layout differs from {ref_name} by {}", fmt_g(c.distance)))
            }
        }
        Err(e) => {
            d.row(&["-", "-", "false"]);
            d.comment(&format!("error={e}"));
            Status::VerificationFailed(e.to_string())
        }
    };
    d.emit(s.out.as_deref())?;
    Ok(status)
}
