//! The six-step direct-communication protocol over simulated photons.
//!
//! A photon's state is stored as `T_shift Φ^steps(ρ₀)`, where `ρ₀` is the
//! initial walk state at index 0, `Φ` one (possibly noisy) walk step and
//! `T` the cyclic OAM translation. Both channels in use act on the coin
//! only, so they commute with `T`; every state reachable in the protocol
//! (preparation at ℓ_i, message shifts, further steps, re-preparation after
//! a measurement) has this form, and measurement statistics come from a
//! cached table of position distributions.

use std::fmt::{self, Write as _};

use rand::seq::index::sample;
use rand::Rng;

use crate::attacks::{intercept_resend_eve, tamper_photon, EveStrategy};
use crate::noise::{self, apply_unitary, NoiseSpec, NoisyStep, QuantumState};
use crate::rng::{seeded_rng, SimRng};
use crate::walk::{
    evolve_with, initial_state, CMatrix, OamLabelMap, PureState, UnitaryOperator, WalkConfig,
};
use crate::{QsdcError, Result, C64};

/// `I_coin ⊗ T_{ell_m}`: cyclic OAM shift by `ell_m` index units.
pub fn message_operator(ell_m: usize, k: usize) -> Result<UnitaryOperator> {
    if ell_m >= k {
        return Err(QsdcError::ParameterDomain {
            name: "ell_m",
            value: ell_m as f64,
            expected: "0 <= ell_m <= k - 1",
        });
    }
    let mut m = CMatrix::zeros(2 * k, 2 * k);
    for c in 0..2 {
        for x in 0..k {
            m[(c * k + (x + ell_m) % k, c * k + x)] = C64::new(1.0, 0.0);
        }
    }
    Ok(UnitaryOperator::from_matrix_unchecked(m))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProtocolParams {
    /// Photon count, a positive multiple of 4.
    pub n: usize,
    /// Walk parameters; the recurrence period is always resolved.
    pub config: WalkConfig,
    pub seed: u64,
    pub noise: NoiseSpec,
    /// Odd number of repetitions for majority voting.
    pub repetitions: usize,
}

impl ProtocolParams {
    pub fn new(n: usize, config: WalkConfig, seed: u64) -> Result<Self> {
        if n == 0 || !n.is_multiple_of(4) {
            return Err(QsdcError::ParameterDomain {
                name: "n",
                value: n as f64,
                expected: "positive multiple of 4",
            });
        }
        let t_r = config.recurrence_period()?;
        Ok(Self {
            n,
            config: config.with_recurrence(t_r),
            seed,
            noise: NoiseSpec::none(),
            repetitions: 1,
        })
    }

    pub fn with_noise(mut self, noise: NoiseSpec) -> Self {
        self.noise = noise;
        self
    }

    pub fn with_repetitions(mut self, r: usize) -> Result<Self> {
        if r.is_multiple_of(2) {
            return Err(QsdcError::ParameterDomain {
                name: "repetitions",
                value: r as f64,
                expected: "odd positive integer",
            });
        }
        self.repetitions = r;
        Ok(self)
    }

    pub fn t_r(&self) -> usize {
        self.config.t_r.expect("resolved in ProtocolParams::new")
    }

    /// `N = n / 4`.
    pub fn sample_size(&self) -> usize {
        self.n / 4
    }

    /// Message photons per run, `n / 2`.
    pub fn capacity(&self) -> usize {
        self.n / 2
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Role {
    SecuritySample,
    Dummy,
    Message,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::SecuritySample => "security_sample",
            Role::Dummy => "dummy",
            Role::Message => "message",
        }
    }
}

/// `T_shift Φ^steps(ρ₀)` in index units.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhotonState {
    pub shift: usize,
    pub steps: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PhotonRecord {
    pub id: usize,
    pub ell_i: i32,
    pub t_i: usize,
    pub role: Option<Role>,
    pub state: PhotonState,
    pub encoded_digit: Option<usize>,
    /// Set when Eve has intercepted or modified the photon.
    pub tampered: bool,
}

/// Cached position distributions of `Φ^m(ρ₀)` for the protocol's walk and
/// channel noise.
#[derive(Debug, Clone)]
pub struct WalkChannel {
    config: WalkConfig,
    noise: NoiseSpec,
    map: OamLabelMap,
    t_r: usize,
    distributions: Vec<Vec<f64>>,
    frontier: Option<(NoisyStep, noise::DensityMatrix)>,
}

impl WalkChannel {
    pub fn new(config: &WalkConfig, noise: NoiseSpec) -> Result<Self> {
        let t_r = config.recurrence_period()?;
        let config = (*config).with_recurrence(t_r);
        let horizon = 2 * t_r;
        let (distributions, frontier) = if noise.is_noiseless() {
            let step = config.step_operator()?;
            let mut psi = initial_state(&config, 0)?;
            let mut d = Vec::with_capacity(horizon + 1);
            d.push(crate::walk::position_distribution(&psi));
            for _ in 0..horizon {
                psi = evolve_with(&psi, &step, 1)?;
                d.push(crate::walk::position_distribution(&psi));
            }
            (d, None)
        } else {
            let step = NoisyStep::new(&config, noise)?;
            let traj = noise::noisy_trajectory(&config, noise, horizon)?;
            let d = traj.iter().map(noise::position_distribution).collect();
            let last = traj.into_iter().last().expect("non-empty trajectory");
            (d, Some((step, last)))
        };
        Ok(Self {
            map: config.label_map(),
            config,
            noise,
            t_r,
            distributions,
            frontier,
        })
    }

    pub fn config(&self) -> &WalkConfig {
        &self.config
    }

    pub fn noise(&self) -> NoiseSpec {
        self.noise
    }

    pub fn t_r(&self) -> usize {
        self.t_r
    }

    pub fn k(&self) -> usize {
        self.config.k
    }

    pub fn label_map(&self) -> &OamLabelMap {
        &self.map
    }

    /// Position distribution of `Φ^steps(ρ₀)`.
    pub fn base_distribution(&mut self, steps: usize) -> Result<&[f64]> {
        if self.frontier.is_none() {
            let reduced = if steps < self.distributions.len() {
                steps
            } else {
                steps % self.t_r
            };
            return Ok(&self.distributions[reduced]);
        }
        while self.distributions.len() <= steps {
            let (step, rho) = self.frontier.as_mut().expect("noisy channel");
            *rho = step.apply(rho)?;
            self.distributions.push(noise::position_distribution(rho));
        }
        Ok(&self.distributions[steps])
    }

    /// Probability of index `x` for a photon in `state`.
    pub fn probability(&mut self, state: PhotonState, x: usize) -> Result<f64> {
        let k = self.k();
        let d = self.base_distribution(state.steps)?;
        Ok(d[(x + k - state.shift % k) % k])
    }

    /// Samples an OAM index for `state`.
    pub fn sample_index(&mut self, state: PhotonState, rng: &mut SimRng) -> Result<usize> {
        let k = self.k();
        let shift = state.shift % k;
        let d = self.base_distribution(state.steps)?;
        Ok((sample_from(d, rng) + shift) % k)
    }

    /// Full quantum state of a photon.
    pub fn quantum_state(&self, state: PhotonState) -> Result<QuantumState> {
        let psi0 = initial_state(&self.config, 0)?;
        if self.noise.is_noiseless() {
            let psi = evolve_with(&psi0, &self.config.step_operator()?, state.steps)?;
            return Ok(QuantumState::Pure(psi.translated(state.shift % self.k())));
        }
        let rho = noise::evolve_density(&noise::to_density(&psi0), &self.config, self.noise, state.steps)?;
        let t = message_operator(state.shift % self.k(), self.k())?;
        Ok(QuantumState::Mixed(apply_unitary(&rho, &t)?))
    }
}

/// Index drawn from a probability vector; round-off mass falls on the last
/// entry with positive weight.
fn sample_from(d: &[f64], rng: &mut SimRng) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in d.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Projective OAM measurement with the coin traced out.
pub fn measure_oam(state: &QuantumState, rng: &mut SimRng) -> i32 {
    let map = OamLabelMap::new(state.k());
    map.label(sample_from(&state.position_distribution(), rng))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EventKind {
    Prepare,
    Send,
    EveIntercept,
    SampleRequest,
    SecurityMeasure,
    SecurityVerdict,
    Encode,
    Dummy,
    EveTamper,
    Decode,
    DummyMeasure,
    DummyCheckVerdict,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Prepare => "prepare",
            EventKind::Send => "send",
            EventKind::EveIntercept => "eve-intercept",
            EventKind::SampleRequest => "sample-request",
            EventKind::SecurityMeasure => "security-measure",
            EventKind::SecurityVerdict => "security-verdict",
            EventKind::Encode => "encode",
            EventKind::Dummy => "dummy",
            EventKind::EveTamper => "eve-tamper",
            EventKind::Decode => "decode",
            EventKind::DummyMeasure => "dummy-measure",
            EventKind::DummyCheckVerdict => "dummy-check-verdict",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Event {
    pub kind: EventKind,
    pub photon: Option<usize>,
    pub role: Option<Role>,
    pub ell: Option<i32>,
    pub t: Option<usize>,
    pub outcome: Option<String>,
}

impl Event {
    fn new(kind: EventKind) -> Self {
        Self {
            kind,
            photon: None,
            role: None,
            ell: None,
            t: None,
            outcome: None,
        }
    }

    fn photon(mut self, p: &PhotonRecord) -> Self {
        self.photon = Some(p.id);
        self.role = p.role;
        self
    }

    fn ell(mut self, ell: i32) -> Self {
        self.ell = Some(ell);
        self
    }

    fn t(mut self, t: usize) -> Self {
        self.t = Some(t);
        self
    }

    fn outcome(mut self, o: impl ToString) -> Self {
        self.outcome = Some(o.to_string());
        self
    }
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fn opt<T: ToString>(v: &Option<T>) -> String {
            v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
        }
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.kind.as_str(),
            opt(&self.photon),
            self.role.map_or("-", Role::as_str),
            opt(&self.ell),
            opt(&self.t),
            opt(&self.outcome)
        )
    }
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "pass"
    } else {
        "fail"
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Transcript {
    pub events: Vec<Event>,
    pub photons: Vec<PhotonRecord>,
    /// Digits carried by the message photons, zero-padded to `n / 2`.
    pub sent_digits: Vec<usize>,
    /// Bob's digits in message-photon order; `None` after an abort.
    pub decoded_digits: Option<Vec<usize>>,
    pub security_pass: bool,
    /// `None` when the run aborted before the dummy check.
    pub dummy_pass: Option<bool>,
}

impl Transcript {
    /// Event log, one tab-separated line per event:
    /// `event  photon  role  ell  t  outcome`, with `-` for empty fields.
    pub fn to_tsv(&self) -> String {
        let mut s = String::from("event\tphoton\trole\tell\tt\toutcome\n");
        for e in &self.events {
            let _ = writeln!(s, "{e}");
        }
        s
    }

    /// Completed without abort and with a clean dummy check.
    pub fn accepted(&self) -> bool {
        self.security_pass && self.dummy_pass == Some(true)
    }

    /// First `len` decoded digits.
    pub fn message(&self, len: usize) -> Option<&[usize]> {
        self.decoded_digits.as_deref().map(|d| &d[..len.min(d.len())])
    }

    pub fn photons_with_role(&self, role: Role) -> impl Iterator<Item = &PhotonRecord> {
        self.photons.iter().filter(move |p| p.role == Some(role))
    }
}

/// One protocol run in progress.
pub struct Session<'a> {
    pub params: &'a ProtocolParams,
    pub channel: &'a mut WalkChannel,
    pub rng: &'a mut SimRng,
    pub photons: Vec<PhotonRecord>,
    pub events: Vec<Event>,
}

impl<'a> Session<'a> {
    pub fn new(params: &'a ProtocolParams, channel: &'a mut WalkChannel, rng: &'a mut SimRng) -> Self {
        Self {
            params,
            channel,
            rng,
            photons: Vec::new(),
            events: Vec::new(),
        }
    }

    /// Step 1: pre-agreed ℓ_i and random t_i ∈ {2, …, t_r} per photon.
    pub fn bob_prepare(&mut self) {
        let k = self.params.config.k;
        let t_r = self.params.t_r();
        let map = *self.channel.label_map();
        self.photons = (0..self.params.n)
            .map(|id| {
                let x = self.rng.random_range(0..k);
                let t_i = self.rng.random_range(2..=t_r);
                PhotonRecord {
                    id,
                    ell_i: map.label(x),
                    t_i,
                    role: None,
                    state: PhotonState { shift: x, steps: t_i },
                    encoded_digit: None,
                    tampered: false,
                }
            })
            .collect();
        for p in &self.photons {
            self.events
                .push(Event::new(EventKind::Prepare).photon(p).ell(p.ell_i).t(p.t_i));
        }
    }

    /// Step 2: photons cross the channel, possibly through Eve.
    pub fn bob_send(&mut self, eve: Option<&EveStrategy>) -> Result<()> {
        for i in 0..self.photons.len() {
            self.events
                .push(Event::new(EventKind::Send).photon(&self.photons[i]));
            if let Some(EveStrategy::InterceptResendAll) = eve {
                let (t_e, ell_e) = intercept_resend_eve(&mut self.photons[i], self.channel, self.rng)?;
                self.events.push(
                    Event::new(EventKind::EveIntercept)
                        .photon(&self.photons[i])
                        .ell(ell_e)
                        .t(t_e),
                );
            }
        }
        Ok(())
    }

    /// Step 3: Alice picks `n/4` photons for the security check.
    pub fn alice_sample(&mut self) -> Vec<usize> {
        let mut ids = sample(self.rng, self.photons.len(), self.params.sample_size()).into_vec();
        ids.sort_unstable();
        for &id in &ids {
            self.photons[id].role = Some(Role::SecuritySample);
            self.events
                .push(Event::new(EventKind::SampleRequest).photon(&self.photons[id]));
        }
        ids
    }

    /// Step 4: remaining `t_r - t_i` steps on each sampled photon and an OAM
    /// measurement; passes iff every outcome is the pre-agreed ℓ_i.
    pub fn alice_security_check(&mut self, sample_ids: &[usize], disclosed_t: &[usize]) -> Result<bool> {
        if sample_ids.len() != self.params.sample_size() {
            return Err(QsdcError::ProtocolViolation(format!(
                "security sample has {} photons, expected {}",
                sample_ids.len(),
                self.params.sample_size()
            )));
        }
        if disclosed_t.len() != sample_ids.len() {
            return Err(QsdcError::ProtocolViolation(
                "one disclosed t_i is needed per sampled photon".into(),
            ));
        }
        let t_r = self.params.t_r();
        let mut pass = true;
        for (&id, &t) in sample_ids.iter().zip(disclosed_t) {
            let p = self.photons.get(id).ok_or(QsdcError::Index {
                index: id as i64,
                len: self.photons.len(),
            })?;
            if p.t_i != t {
                return Err(QsdcError::ProtocolViolation(format!(
                    "disclosed t = {t} for photon {id} does not match"
                )));
            }
            let state = PhotonState {
                shift: p.state.shift,
                steps: p.state.steps + (t_r - t),
            };
            let x = self.channel.sample_index(state, self.rng)?;
            let ell = self.channel.label_map().label(x);
            let ok = ell == p.ell_i;
            pass &= ok;
            self.photons[id].state = state;
            self.events.push(
                Event::new(EventKind::SecurityMeasure)
                    .photon(&self.photons[id])
                    .ell(ell)
                    .t(t)
                    .outcome(verdict(ok)),
            );
        }
        self.events
            .push(Event::new(EventKind::SecurityVerdict).outcome(verdict(pass)));
        Ok(pass)
    }

    /// Step 5: `n/2` of the remaining photons carry `digits` (zero-padded),
    /// the other `n/4` stay untouched as dummies. Digits go to message
    /// photons in ascending id order.
    pub fn alice_encode(&mut self, digits: &[usize]) -> Result<Vec<usize>> {
        let k = self.params.config.k;
        let capacity = self.params.capacity();
        if digits.len() > capacity {
            return Err(QsdcError::Capacity {
                needed: digits.len(),
                capacity,
            });
        }
        if let Some(&d) = digits.iter().find(|&&d| d >= k) {
            return Err(QsdcError::Domain(format!("digit {d} is not below k = {k}")));
        }
        let remaining: Vec<usize> = self
            .photons
            .iter()
            .filter(|p| p.role.is_none())
            .map(|p| p.id)
            .collect();
        let mut chosen: Vec<usize> = sample(self.rng, remaining.len(), capacity)
            .into_iter()
            .map(|i| remaining[i])
            .collect();
        chosen.sort_unstable();
        for &id in &remaining {
            self.photons[id].role = Some(Role::Dummy);
        }
        for (j, &id) in chosen.iter().enumerate() {
            let digit = digits.get(j).copied().unwrap_or(0);
            let p = &mut self.photons[id];
            p.role = Some(Role::Message);
            p.encoded_digit = Some(digit);
            p.state.shift = (p.state.shift + digit) % k;
        }
        for &id in &remaining {
            let p = &self.photons[id];
            let e = match p.encoded_digit {
                Some(d) => Event::new(EventKind::Encode).photon(p).outcome(d),
                None => Event::new(EventKind::Dummy).photon(p),
            };
            self.events.push(e);
        }
        Ok(chosen)
    }

    /// Eve's action on the return leg.
    pub fn return_leg(&mut self, eve: Option<&EveStrategy>) -> Result<()> {
        if let Some(EveStrategy::TamperSubset { x }) = eve {
            let pool: Vec<usize> = self
                .photons
                .iter()
                .filter(|p| matches!(p.role, Some(Role::Dummy | Role::Message)))
                .map(|p| p.id)
                .collect();
            if *x > pool.len() {
                return Err(QsdcError::ParameterDomain {
                    name: "x",
                    value: *x as f64,
                    expected: "0 <= x <= 3N",
                });
            }
            let mut ids: Vec<usize> = sample(self.rng, pool.len(), *x)
                .into_iter()
                .map(|i| pool[i])
                .collect();
            ids.sort_unstable();
            for id in ids {
                let e = tamper_photon(&mut self.photons[id], self.params.config.k, self.rng);
                self.events.push(
                    Event::new(EventKind::EveTamper)
                        .photon(&self.photons[id])
                        .outcome(e),
                );
            }
        }
        Ok(())
    }

    /// Step 6: Bob runs the remaining `t_r - t_i` steps on every returned
    /// photon. Message digits are `(index(ℓ_out) - index(ℓ_i)) mod k`;
    /// dummies must come back at ℓ_i.
    pub fn bob_decode(&mut self) -> Result<(Vec<usize>, bool)> {
        let k = self.params.config.k;
        let t_r = self.params.t_r();
        let map = *self.channel.label_map();
        let mut digits = Vec::new();
        let mut dummy_pass = true;
        for i in 0..self.photons.len() {
            let role = self.photons[i].role;
            if !matches!(role, Some(Role::Dummy | Role::Message)) {
                continue;
            }
            let p = &self.photons[i];
            let state = PhotonState {
                shift: p.state.shift,
                steps: p.state.steps + (t_r - p.t_i),
            };
            let x = self.channel.sample_index(state, self.rng)?;
            let ell = map.label(x);
            let start = map.index(p.ell_i)?;
            self.photons[i].state = state;
            let p = &self.photons[i];
            if role == Some(Role::Message) {
                let d = (x + k - start) % k;
                digits.push(d);
                self.events.push(
                    Event::new(EventKind::Decode)
                        .photon(p)
                        .ell(ell)
                        .t(p.t_i)
                        .outcome(d),
                );
            } else {
                let ok = ell == p.ell_i;
                dummy_pass &= ok;
                self.events.push(
                    Event::new(EventKind::DummyMeasure)
                        .photon(p)
                        .ell(ell)
                        .t(p.t_i)
                        .outcome(verdict(ok)),
                );
            }
        }
        self.events
            .push(Event::new(EventKind::DummyCheckVerdict).outcome(verdict(dummy_pass)));
        Ok((digits, dummy_pass))
    }

    fn into_transcript(
        self,
        sent_digits: Vec<usize>,
        decoded: Option<Vec<usize>>,
        security_pass: bool,
        dummy_pass: Option<bool>,
    ) -> Transcript {
        Transcript {
            events: self.events,
            photons: self.photons,
            sent_digits,
            decoded_digits: decoded,
            security_pass,
            dummy_pass,
        }
    }
}

/// Runs steps 1 to 6 with draws from `rng`. A failed security check ends
/// the run with `security_pass = false`.
pub fn run_protocol_with(
    params: &ProtocolParams,
    digits: &[usize],
    eve: Option<&EveStrategy>,
    channel: &mut WalkChannel,
    rng: &mut SimRng,
) -> Result<Transcript> {
    if digits.len() > params.capacity() {
        return Err(QsdcError::Capacity {
            needed: digits.len(),
            capacity: params.capacity(),
        });
    }
    let mut s = Session::new(params, channel, rng);
    s.bob_prepare();
    s.bob_send(eve)?;
    let sample_ids = s.alice_sample();
    let disclosed: Vec<usize> = sample_ids.iter().map(|&i| s.photons[i].t_i).collect();
    if !s.alice_security_check(&sample_ids, &disclosed)? {
        return Ok(s.into_transcript(Vec::new(), None, false, None));
    }
    let message_ids = s.alice_encode(digits)?;
    let sent = message_ids
        .iter()
        .map(|&i| s.photons[i].encoded_digit.unwrap_or(0))
        .collect();
    s.return_leg(eve)?;
    let (decoded, dummy_pass) = s.bob_decode()?;
    Ok(s.into_transcript(sent, Some(decoded), true, Some(dummy_pass)))
}

/// One run seeded from `params.seed`.
pub fn run_protocol(
    params: &ProtocolParams,
    digits: &[usize],
    eve: Option<&EveStrategy>,
) -> Result<Transcript> {
    let mut channel = WalkChannel::new(&params.config, params.noise)?;
    let mut rng = seeded_rng(params.seed);
    run_protocol_with(params, digits, eve, &mut channel, &mut rng)
}

/// Restarts the protocol with fresh photons until the security check
/// passes, up to `max_attempts` runs. Returns the number of attempts and
/// the last transcript.
pub fn run_until_secure(
    params: &ProtocolParams,
    digits: &[usize],
    eve: Option<&EveStrategy>,
    channel: &mut WalkChannel,
    rng: &mut SimRng,
    max_attempts: usize,
) -> Result<(usize, Transcript)> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        let t = run_protocol_with(params, digits, eve, channel, rng)?;
        if t.security_pass || attempt >= max_attempts {
            return Ok((attempt, t));
        }
    }
}

/// Per-position plurality over an odd number of equal-length sequences;
/// ties go to the lowest digit.
pub fn majority_vote(sequences: &[Vec<usize>]) -> Result<Vec<usize>> {
    if sequences.len().is_multiple_of(2) {
        return Err(QsdcError::ParameterDomain {
            name: "repetitions",
            value: sequences.len() as f64,
            expected: "odd number of sequences",
        });
    }
    let len = sequences[0].len();
    if let Some(bad) = sequences.iter().find(|s| s.len() != len) {
        return Err(QsdcError::Shape {
            expected: len,
            actual: bad.len(),
        });
    }
    Ok((0..len)
        .map(|i| {
            let mut counts = std::collections::BTreeMap::new();
            for s in sequences {
                *counts.entry(s[i]).or_insert(0usize) += 1;
            }
            let mut best = (0, 0);
            for (digit, c) in counts {
                if c > best.1 {
                    best = (digit, c);
                }
            }
            best.0
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub struct MajorityOutcome {
    pub voted: Vec<usize>,
    /// One accepted transcript per repetition.
    pub runs: Vec<Transcript>,
    pub attempts: usize,
}

/// Sends `digits` `params.repetitions` times, each repetition restarted
/// until its security check passes, and votes per digit.
pub fn run_majority(
    params: &ProtocolParams,
    digits: &[usize],
    eve: Option<&EveStrategy>,
    rng: &mut SimRng,
    max_attempts: usize,
) -> Result<MajorityOutcome> {
    let mut channel = WalkChannel::new(&params.config, params.noise)?;
    let mut runs = Vec::with_capacity(params.repetitions);
    let mut attempts = 0;
    let mut received = Vec::with_capacity(params.repetitions);
    for _ in 0..params.repetitions {
        let (a, t) = run_until_secure(params, digits, eve, &mut channel, rng, max_attempts)?;
        attempts += a;
        let got = t.message(digits.len()).ok_or_else(|| {
            QsdcError::ProtocolViolation(format!("no secure run within {max_attempts} attempts"))
        })?;
        received.push(got.to_vec());
        runs.push(t);
    }
    Ok(MajorityOutcome {
        voted: majority_vote(&received)?,
        runs,
        attempts,
    })
}

/// Materializes a pure photon state; for tests and diagnostics.
pub fn photon_pure_state(config: &WalkConfig, state: PhotonState) -> Result<PureState> {
    let psi0 = initial_state(config, 0)?;
    Ok(evolve_with(&psi0, &config.step_operator()?, state.steps)?.translated(state.shift % config.k))
}
