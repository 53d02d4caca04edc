//! Monte-Carlo simulation of the measurement protocols. Sampling paths use
//! only Born-rule probabilities of the simulated states; closed forms enter
//! through the `exact` columns for comparison.

use std::collections::BTreeMap;
use std::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::classical::{beta_binomial, beta_poisson, binomial_ump_test, ClassicalRandomizedTest};
use crate::error::{check_range, Error, Result};
use crate::group::{haar_special_unitary, sample_rng};
use crate::qstate::{
    bell_basis, bipartite_factors, fidelity_defect, isotropic_state, max_entangled_ket, max_entangled_projector,
    pair_factors, pair_to_group_perm, partial_trace, permute_systems, random_density_with_defect, CMatrix, CVector,
    DensityMatrix, Factor, Ket, Operator, Tensor, POVM_TOL,
};
use crate::quantum::{bell_test, t1_inv, two_copy_defect};

/// Largest copy count simulated outcome by outcome in a sweep.
pub const SAMPLED_N_CAP: usize = 1000;

/// Trials per rayon work unit.
const BLOCK: usize = 512;

/// At the null boundary `t' = delta` the level-alpha Bell-pair test accepts
/// with probability tending to `1 - alpha`; one printed statement of this
/// limit reads `1 - delta`.
pub const NULL_BOUNDARY_NOTE: &str = "Bell-pair test at the null boundary t' = delta: acceptance tends to 1 - alpha \
(a printed form of this limit reads 1 - delta)";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Protocol {
    GlobalProjective,
    BellPairs,
    OneWayT1,
    RepeatedT1,
}

impl Protocol {
    pub fn name(self) -> &'static str {
        match self {
            Protocol::GlobalProjective => "global_projective",
            Protocol::BellPairs => "bell_pairs",
            Protocol::OneWayT1 => "one_way_t1",
            Protocol::RepeatedT1 => "repeated_t1",
        }
    }
}

impl FromStr for Protocol {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "global_projective" => Protocol::GlobalProjective,
            "bell_pairs" => Protocol::BellPairs,
            "one_way_t1" => Protocol::OneWayT1,
            "repeated_t1" => Protocol::RepeatedT1,
            _ => return Err(Error::Unsupported(format!("unknown protocol '{s}'"))),
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateFamily {
    /// `(1-p) P + p (I-P)/(d^2-1)`.
    Isotropic,
    /// `sum_k w_k |phi^k><phi^k|` over the Bell basis.
    BellDiagonal,
    /// Random state with defect `p`, optionally with coherences.
    Random,
    MaxEntangled,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StateParams {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coherent: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub family: StateFamily,
    #[serde(default)]
    pub params: StateParams,
}

impl StateSpec {
    pub fn isotropic(p: f64) -> Self {
        StateSpec { family: StateFamily::Isotropic, params: StateParams { p: Some(p), ..Default::default() } }
    }

    pub fn max_entangled() -> Self {
        StateSpec { family: StateFamily::MaxEntangled, params: StateParams::default() }
    }

    fn need_p(&self) -> Result<f64> {
        self.params.p.ok_or_else(|| Error::Unsupported(format!("state family {:?} needs params.p", self.family)))
    }

    pub fn build(&self, d: usize) -> Result<DensityMatrix> {
        match self.family {
            StateFamily::Isotropic => isotropic_state(d, self.need_p()?),
            StateFamily::MaxEntangled => Ok(DensityMatrix::pure(&max_entangled_ket(d)?)),
            StateFamily::Random => {
                let mut rng = sample_rng(self.params.seed.unwrap_or(0), 0);
                random_density_with_defect(d, self.need_p()?, self.params.coherent.unwrap_or(false), &mut rng)
            }
            StateFamily::BellDiagonal => {
                let w = self
                    .params
                    .weights
                    .as_ref()
                    .ok_or_else(|| Error::Unsupported("bell_diagonal needs params.weights".into()))?;
                if w.len() != d * d {
                    return Err(Error::DimensionMismatch { expected: d * d, found: w.len() });
                }
                if w.iter().any(|&x| x.is_nan() || x < 0.0) {
                    return Err(Error::NegativeProbability(w.iter().cloned().fold(f64::INFINITY, f64::min)));
                }
                let mut op = Operator::zeros(bipartite_factors(d));
                for (x, k) in w.iter().zip(bell_basis(d)?) {
                    op = op.add(&k.projector().scale(*x))?;
                }
                DensityMatrix::new(op)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub protocol: Protocol,
    pub d: usize,
    /// Copies per trial. `bell_pairs` uses them two at a time; `one_way_t1`
    /// measures a single copy and ignores this.
    pub n: usize,
    pub epsilon: f64,
    pub alpha: f64,
    pub state: StateSpec,
    /// Second source for `bell_pairs`; the first source is reused when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub second_state: Option<StateSpec>,
    pub trials: usize,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::InvalidDimension(format!("local dimension must be >= 2, got {}", self.d)));
        }
        if self.trials == 0 {
            return Err(Error::OutOfRange { name: "trials", value: 0.0, range: "[1, inf)" });
        }
        if self.n == 0 {
            return Err(Error::OutOfRange { name: "n", value: 0.0, range: "[1, inf)" });
        }
        check_range("epsilon", self.epsilon, 0.0, 1.0, "[0, 1]")?;
        check_range("alpha", self.alpha, f64::MIN_POSITIVE, 1.0 - f64::EPSILON, "(0, 1)")?;
        if self.protocol == Protocol::BellPairs {
            if self.n < 2 || self.n % 2 == 1 {
                return Err(Error::OutOfRange { name: "n", value: self.n as f64, range: "even, >= 2" });
            }
            let d2 = (self.d * self.d) as f64;
            check_range("epsilon", self.epsilon, 0.0, (d2 - 1.0) / d2, "[0, (d^2-1)/d^2]")?;
        }
        if self.second_state.is_some() && self.protocol != Protocol::BellPairs {
            return Err(Error::Unsupported("second_state is only used by bell_pairs".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub protocol: Protocol,
    pub trials: u64,
    pub accepted: u64,
    /// Empirical acceptance rate of the full test.
    pub rate: f64,
    /// `1.96 sqrt(r (1-r) / trials)`.
    pub ci_half_width: f64,
    /// Predicted acceptance probability.
    pub exact: f64,
    /// Measured units (copies or pairs) across all trials.
    pub units: u64,
    /// Empirical per-unit acceptance rate.
    pub unit_rate: f64,
    pub unit_exact: f64,
    pub counts: BTreeMap<String, u64>,
}

impl ExperimentResult {
    /// `|rate - exact| <= k * ci_half_width`.
    pub fn within(&self, k: f64) -> bool {
        (self.rate - self.exact).abs() <= k * self.ci_half_width + 1e-12
    }

    pub fn unit_ci_half_width(&self) -> f64 {
        ci_half_width(self.unit_rate, self.units)
    }
}

pub fn ci_half_width(rate: f64, trials: u64) -> f64 {
    if trials == 0 {
        return f64::INFINITY;
    }
    1.96 * (rate * (1.0 - rate) / trials as f64).max(0.0).sqrt()
}

/// Outcome probabilities `Tr(state E_i)`, checking completeness within
/// 1e-9 and clamping values in `[-1e-12, 0)` to zero before renormalizing.
pub fn born_probabilities(state: &DensityMatrix, povm: &[Operator]) -> Result<Vec<f64>> {
    if povm.is_empty() {
        return Err(Error::NotAPovm(1.0));
    }
    let dim = state.dim();
    let mut sum = CMatrix::zeros(dim, dim);
    for e in povm {
        if e.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: e.dim() });
        }
        sum += e.entries();
    }
    let dev = crate::qstate::max_abs_diff(&sum, &CMatrix::identity(dim, dim));
    if dev > POVM_TOL {
        return Err(Error::NotAPovm(dev));
    }
    let probs: Vec<f64> = povm.iter().map(|e| state.expect(e)).collect::<Result<_>>()?;
    normalize(probs)
}

fn normalize(mut probs: Vec<f64>) -> Result<Vec<f64>> {
    for p in probs.iter_mut() {
        if *p < -1e-12 {
            return Err(Error::NegativeProbability(*p));
        }
        *p = p.max(0.0);
    }
    let total: f64 = probs.iter().sum();
    if total <= 0.0 {
        return Err(Error::NegativeProbability(total));
    }
    probs.iter_mut().for_each(|p| *p /= total);
    Ok(probs)
}

/// Index drawn from a probability vector.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > 0.0 {
            last = i;
        }
        cum += p;
        if u < cum {
            return i;
        }
    }
    last
}

/// Born-rule measurement of `state` with the POVM `povm`.
pub fn sample_povm_outcome<R: Rng + ?Sized>(state: &DensityMatrix, povm: &[Operator], rng: &mut R) -> Result<usize> {
    Ok(sample_index(&born_probabilities(state, povm)?, rng))
}

fn decide<R: Rng + ?Sized>(test: &ClassicalRandomizedTest, count: usize, rng: &mut R) -> bool {
    let a = test.accept_prob(count);
    a >= 1.0 || (a > 0.0 && rng.random::<f64>() < a)
}

#[derive(Clone, Copy, Default)]
struct Tally {
    accepted: u64,
    unit_accepted: u64,
    units: u64,
}

/// Runs `trials` independent trials, trial `k` on stream `k` of `seed`.
fn run_trials<F>(trials: usize, seed: u64, trial: F) -> Result<Tally>
where
    F: Fn(&mut ChaCha8Rng) -> Result<(bool, u64, u64)> + Sync,
{
    let parts: Vec<Result<Tally>> = (0..trials.div_ceil(BLOCK))
        .into_par_iter()
        .map(|b| {
            let mut t = Tally::default();
            for k in b * BLOCK..((b + 1) * BLOCK).min(trials) {
                let mut rng = sample_rng(seed, k as u64);
                let (acc, ua, u) = trial(&mut rng)?;
                t.accepted += acc as u64;
                t.unit_accepted += ua;
                t.units += u;
            }
            Ok(t)
        })
        .collect();
    let mut total = Tally::default();
    for p in parts {
        let p = p?;
        total.accepted += p.accepted;
        total.unit_accepted += p.unit_accepted;
        total.units += p.units;
    }
    Ok(total)
}

fn result(protocol: Protocol, trials: usize, t: Tally, exact: f64, unit_exact: f64) -> ExperimentResult {
    let rate = t.accepted as f64 / trials as f64;
    let unit_rate = if t.units > 0 { t.unit_accepted as f64 / t.units as f64 } else { 0.0 };
    let mut counts = BTreeMap::new();
    counts.insert("accept".to_string(), t.accepted);
    counts.insert("reject".to_string(), trials as u64 - t.accepted);
    counts.insert("unit_accept".to_string(), t.unit_accepted);
    counts.insert("unit_reject".to_string(), t.units - t.unit_accepted);
    ExperimentResult {
        protocol,
        trials: trials as u64,
        accepted: t.accepted,
        rate,
        ci_half_width: ci_half_width(rate, trials as u64),
        exact,
        units: t.units,
        unit_rate,
        unit_exact,
        counts,
    }
}

/// Predicted `(test acceptance, per-unit acceptance)` for a configuration.
pub fn exact_prediction(config: &ExperimentConfig) -> Result<(f64, f64)> {
    config.validate()?;
    let d = config.d;
    let sigma = config.state.build(d)?;
    match config.protocol {
        Protocol::GlobalProjective => {
            let p = fidelity_defect(&sigma)?;
            Ok((beta_binomial(config.n, config.epsilon, config.alpha, p)?, 1.0 - p))
        }
        Protocol::BellPairs => {
            let second = match &config.second_state {
                Some(s) => s.build(d)?,
                None => sigma.clone(),
            };
            let pair = pair_state(&sigma, &second, d)?;
            let a = bell_test(d)?.accept(&pair)?.clamp(0.0, 1.0);
            let eps = two_copy_defect(d, config.epsilon).clamp(0.0, 1.0);
            Ok((beta_binomial(config.n / 2, eps, config.alpha, 1.0 - a)?, a))
        }
        Protocol::OneWayT1 => {
            let a = t1_inv(d)?.accept(&sigma)?.clamp(0.0, 1.0);
            Ok((a, a))
        }
        Protocol::RepeatedT1 => {
            let a = t1_inv(d)?.accept(&sigma)?.clamp(0.0, 1.0);
            let r = d as f64 / (d as f64 + 1.0);
            Ok((beta_binomial(config.n, r * config.epsilon, config.alpha, 1.0 - a)?, a))
        }
    }
}

/// `sigma1 (x) sigma2` on `(A1 B1)(A2 B2)`.
fn pair_state(s1: &DensityMatrix, s2: &DensityMatrix, d: usize) -> Result<DensityMatrix> {
    let op = s1.op().tensor(s2.op()).with_factors(pair_factors(d, 2))?;
    DensityMatrix::new(op)
}

pub fn run(config: &ExperimentConfig) -> Result<ExperimentResult> {
    match config.protocol {
        Protocol::GlobalProjective => run_global(config),
        Protocol::BellPairs => run_bell_pairs(config),
        Protocol::OneWayT1 => {
            config.validate()?;
            let sigma = config.state.build(config.d)?;
            run_one_way_t1(&sigma, config.trials, config.seed)
        }
        Protocol::RepeatedT1 => run_repeated_t1(config),
    }
}

/// Each copy is measured with `{P, I-P}`; the failure count goes through
/// the level-alpha binomial test of `p <= eps`.
pub fn run_global(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let d = config.d;
    let sigma = config.state.build(d)?;
    let p = max_entangled_projector(d)?;
    let probs = born_probabilities(&sigma, &[p.clone(), p.complement()])?;
    let test = binomial_ump_test(config.n, config.epsilon, config.alpha)?;
    let n = config.n;
    let tally = run_trials(config.trials, config.seed, |rng| {
        let fails = (0..n).filter(|_| sample_index(&probs, rng) == 1).count();
        Ok((decide(&test, fails, rng), (n - fails) as u64, n as u64))
    })?;
    let (exact, unit) = exact_prediction(config)?;
    Ok(result(Protocol::GlobalProjective, config.trials, tally, exact, unit))
}

/// Alice's outcome distribution and, per outcome, Bob's acceptance
/// probability on his conditional state.
struct OneWayModel {
    alice: Vec<f64>,
    bob_accept: Vec<f64>,
}

/// Alice measures `{|a_i><a_i|}` on the first `k` factors of `rho`; Bob
/// then measures `{|b_i><b_i|, I - |b_i><b_i|}` on the rest.
fn one_way_model(rho: &DensityMatrix, k: usize, alice: &[CVector], bob: &[CVector]) -> Result<OneWayModel> {
    let factors = rho.op().factors().to_vec();
    let fa: Vec<Factor> = factors[..k].to_vec();
    let fb: Vec<Factor> = factors[k..].to_vec();
    let id_b = Operator::identity(fb.clone());
    let elements: Vec<Operator> = alice
        .iter()
        .map(|a| Ok(Operator::new(a * a.adjoint(), fa.clone())?.tensor(&id_b)))
        .collect::<Result<_>>()?;
    let probs = born_probabilities(rho, &elements)?;
    let keep: Vec<usize> = (k..factors.len()).collect();
    let mut bob_accept = Vec::with_capacity(alice.len());
    for (i, e) in elements.iter().enumerate() {
        if probs[i] <= 0.0 {
            bob_accept.push(0.0);
            continue;
        }
        let post = e.mul(rho.op())?.mul(e)?;
        let rb = partial_trace(&post, &keep)?;
        let w = rb.trace().re;
        let rb = DensityMatrix::new(rb.scale(1.0 / w))?;
        let q = Operator::new(&bob[i] * bob[i].adjoint(), fb.clone())?;
        bob_accept.push(born_probabilities(&rb, &[q.clone(), q.complement()])?[0]);
    }
    Ok(OneWayModel { alice: probs, bob_accept })
}

impl OneWayModel {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> bool {
        let i = sample_index(&self.alice, rng);
        let b = self.bob_accept[i];
        b >= 1.0 || rng.random::<f64>() < b
    }
}

/// One copy of the covariant one-way protocol: Haar `g`, Alice measures
/// `{g|i><i|g^dagger}`, Bob checks `conj(g)|i>`.
fn one_way_t1_copy<R: Rng + ?Sized>(sigma: &DensityMatrix, d: usize, rng: &mut R) -> Result<bool> {
    let g = haar_special_unitary(d, rng);
    let alice: Vec<CVector> = (0..d).map(|i| g.column(i).into_owned()).collect();
    let bob: Vec<CVector> = alice.iter().map(|a| a.conjugate()).collect();
    Ok(one_way_model(sigma, 1, &alice, &bob)?.sample(rng))
}

fn check_bipartite(sigma: &DensityMatrix) -> Result<usize> {
    let d = (sigma.dim() as f64).sqrt().round() as usize;
    if d < 2 || d * d != sigma.dim() {
        return Err(Error::InvalidDimension(format!("{} is not d^2", sigma.dim())));
    }
    Ok(d)
}

/// Single-copy acceptance of the one-way protocol over `trials` runs.
pub fn run_one_way_t1(sigma: &DensityMatrix, trials: usize, seed: u64) -> Result<ExperimentResult> {
    if trials == 0 {
        return Err(Error::OutOfRange { name: "trials", value: 0.0, range: "[1, inf)" });
    }
    let d = check_bipartite(sigma)?;
    let sigma = DensityMatrix::new(sigma.op().clone().with_factors(bipartite_factors(d))?)?;
    let tally = run_trials(trials, seed, |rng| {
        let a = one_way_t1_copy(&sigma, d, rng)?;
        Ok((a, a as u64, 1))
    })?;
    let exact = t1_inv(d)?.accept(&sigma)?.clamp(0.0, 1.0);
    Ok(result(Protocol::OneWayT1, trials, tally, exact, exact))
}

/// `n` copies through the one-way protocol, failures tested at `d eps/(d+1)`.
pub fn run_repeated_t1(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let d = config.d;
    let sigma = config.state.build(d)?;
    let r = d as f64 / (d as f64 + 1.0);
    let test = binomial_ump_test(config.n, r * config.epsilon, config.alpha)?;
    let n = config.n;
    let tally = run_trials(config.trials, config.seed, |rng| {
        let mut fails = 0;
        for _ in 0..n {
            if !one_way_t1_copy(&sigma, d, rng)? {
                fails += 1;
            }
        }
        Ok((decide(&test, fails, rng), (n - fails) as u64, n as u64))
    })?;
    let (exact, unit) = exact_prediction(config)?;
    Ok(result(Protocol::RepeatedT1, config.trials, tally, exact, unit))
}

/// Per-pair acceptance model of the Bell protocol: Alice measures the Bell
/// basis on `A1 A2`, Bob checks the conjugate Bell vector on `B1 B2`.
fn bell_pair_model(s1: &DensityMatrix, s2: &DensityMatrix, d: usize) -> Result<OneWayModel> {
    let pair = pair_state(s1, s2, d)?;
    let rho = DensityMatrix::new(permute_systems(pair.op(), &pair_to_group_perm(2))?)?;
    let basis: Vec<Ket> = bell_basis(d)?;
    let alice: Vec<CVector> = basis.iter().map(|k| k.amplitudes().clone()).collect();
    let bob: Vec<CVector> = alice.iter().map(|a| a.conjugate()).collect();
    one_way_model(&rho, 2, &alice, &bob)
}

/// Per-pair acceptance probability of the Bell protocol, from sampling-side
/// Born probabilities.
pub fn bell_pair_accept(s1: &DensityMatrix, s2: &DensityMatrix) -> Result<f64> {
    let d = check_bipartite(s1)?;
    let m = bell_pair_model(s1, s2, d)?;
    Ok(m.alice.iter().zip(&m.bob_accept).map(|(a, b)| a * b).sum())
}

/// `n/2` pairs, each through the Bell protocol; the failure count is
/// tested at the mapped boundary `2 eps - d^2 eps^2/(d^2-1)`.
pub fn run_bell_pairs(config: &ExperimentConfig) -> Result<ExperimentResult> {
    config.validate()?;
    let d = config.d;
    let s1 = config.state.build(d)?;
    let s2 = match &config.second_state {
        Some(s) => s.build(d)?,
        None => s1.clone(),
    };
    let model = bell_pair_model(&s1, &s2, d)?;
    let pairs = config.n / 2;
    let eps = two_copy_defect(d, config.epsilon).clamp(0.0, 1.0);
    let test = binomial_ump_test(pairs, eps, config.alpha)?;
    let tally = run_trials(config.trials, config.seed, |rng| {
        let fails = (0..pairs).filter(|_| !model.sample(rng)).count();
        Ok((decide(&test, fails, rng), (pairs - fails) as u64, pairs as u64))
    })?;
    let (exact, unit) = exact_prediction(config)?;
    Ok(result(Protocol::BellPairs, config.trials, tally, exact, unit))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub protocol: Protocol,
    pub d: usize,
    pub delta: f64,
    pub t: f64,
    pub alpha: f64,
    pub n_list: Vec<usize>,
    /// Simulated trials per row; zero skips simulation.
    pub trials: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n: usize,
    pub exact: f64,
    pub empirical: Option<f64>,
    pub ci_half_width: Option<f64>,
    pub limit: f64,
}

/// Poisson limit of the sweep for `protocol`.
pub fn sweep_limit(protocol: Protocol, d: usize, delta: f64, t: f64, alpha: f64) -> Result<f64> {
    match protocol {
        Protocol::GlobalProjective | Protocol::BellPairs => beta_poisson(delta, alpha, t),
        Protocol::RepeatedT1 => {
            let r = d as f64 / (d as f64 + 1.0);
            beta_poisson(r * delta, alpha, r * t)
        }
        Protocol::OneWayT1 => Err(Error::Unsupported("one_way_t1 has no sample-size sweep".into())),
    }
}

/// For each `n`: `eps = delta/n` on `isotropic(d, t'/n)`, exact and (for
/// `n <= SAMPLED_N_CAP`) simulated acceptance, plus the Poisson limit.
pub fn asymptotic_sweep(sweep: &SweepConfig) -> Result<Vec<SweepRow>> {
    let limit = sweep_limit(sweep.protocol, sweep.d, sweep.delta, sweep.t, sweep.alpha)?;
    if !(sweep.delta >= 0.0 && sweep.t >= 0.0) {
        return Err(Error::OutOfRange { name: "delta/t", value: sweep.delta.min(sweep.t), range: "[0, inf)" });
    }
    let mut rows = Vec::with_capacity(sweep.n_list.len());
    for (i, &n) in sweep.n_list.iter().enumerate() {
        let p = sweep.t / n as f64;
        let config = ExperimentConfig {
            protocol: sweep.protocol,
            d: sweep.d,
            n,
            epsilon: sweep.delta / n as f64,
            alpha: sweep.alpha,
            state: StateSpec::isotropic(p),
            second_state: None,
            trials: sweep.trials.max(1),
            seed: sweep.seed.wrapping_add(i as u64),
        };
        let (exact, _) = exact_prediction(&config)?;
        let (empirical, ci) = if sweep.trials > 0 && n <= SAMPLED_N_CAP {
            let r = run(&config)?;
            (Some(r.rate), Some(r.ci_half_width))
        } else {
            (None, None)
        };
        rows.push(SweepRow { n, exact, empirical, ci_half_width: ci, limit });
    }
    Ok(rows)
}

/// `(1-p)^2 <= Tr(T sigma (x) sigma) <= (1-p)^2 + p^2` for the Bell-pair test.
pub fn bell_sandwich(p: f64) -> (f64, f64) {
    ((1.0 - p).powi(2), (1.0 - p).powi(2) + p * p)
}
