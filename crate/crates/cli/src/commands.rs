//! The five subcommands. Each returns its output files in memory.

use entbench_core::classical::{
    beta_binomial, beta_binomial_ge, beta_poisson, binomial_ump_test, binomial_ump_test_ge, poisson_ump_test,
};
use entbench_core::group::{mc_twirl_pure, sample_rng, GroupAction, GroupKind, TwirlComparison};
use entbench_core::multisource::{
    beta_three_source, beta_three_source_printed, beta_two_source, beta_two_source_local, ghz_twirl, t3_inv,
    THREE_SOURCE_NOTE,
};
use entbench_core::protocol::{
    asymptotic_sweep, run, ExperimentConfig, ExperimentResult, Protocol, StateFamily, StateSpec, SweepConfig,
    NULL_BOUNDARY_NOTE,
};
use entbench_core::qstate::{bell_basis, bipartite_factors, group_to_pair_perm, permute_ket, Factor, Ket, Tensor};
use entbench_core::quantum::{beta_2n_bound, beta_pooled, beta_t1_formula, beta_t2_formula, t1_inv, t2_inv};
use entbench_core::qubit_pair::{beta_1to2, beta_opt_2sample, doubled_pair_major, effective_operator, u_op, OPT_WEIGHTS};
use entbench_core::Flagged;
use serde::Serialize;

use crate::config::RunConfig;
use crate::format::{fmt_g, opt_g, to_json_bytes, Table};
use crate::CliError;

/// Largest per-entry standard error for a twirl check to count.
pub const INCONCLUSIVE_STDERR: f64 = 0.02;

pub const EXACT_EQS: [&str; 11] = ["5", "21", "23", "27", "28", "38", "40", "41", "42", "45", "45_printed"];
pub const TWIRL_TARGETS: [&str; 4] = ["eq18", "eq22", "eq44", "app_o_weights"];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Done,
    Pass,
    Fail,
    Inconclusive,
}

impl Status {
    pub fn name(self) -> &'static str {
        match self {
            Status::Done => "done",
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::Inconclusive => "inconclusive",
        }
    }
}

#[derive(Debug)]
pub struct Output {
    pub files: Vec<(String, Vec<u8>)>,
    pub status: Status,
    pub notes: Vec<String>,
    pub summary: Vec<String>,
}

type Point = Vec<(&'static str, f64)>;

/// Cartesian product of the axes, last axis fastest.
fn grid(axes: &[(&'static str, &[f64])]) -> Vec<Point> {
    let mut out: Vec<Point> = vec![Vec::new()];
    for (name, vals) in axes {
        out = out.into_iter().flat_map(|p| vals.iter().map(move |&v| [p.clone(), vec![(*name, v)]].concat())).collect();
    }
    out
}

fn get(p: &Point, name: &str) -> f64 {
    p.iter().find(|(k, _)| *k == name).map(|(_, v)| *v).expect("axis present")
}

fn params(p: &Point) -> String {
    p.iter().map(|(k, v)| format!("{k}={}", fmt_g(*v))).collect::<Vec<_>>().join(";")
}

fn as_f64(v: &[usize]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn base_state(cfg: &RunConfig) -> Result<StateSpec, CliError> {
    match &cfg.state {
        Some(s) => Ok(s.clone()),
        None => Ok(StateSpec::isotropic(cfg.p.single("p")?)),
    }
}

/// States for the qubit-pair formulas: the configured state, with `p` swept
/// over the grid when its family takes a defect.
fn qubit_states(cfg: &RunConfig) -> Result<Vec<(String, StateSpec)>, CliError> {
    let base = match &cfg.state {
        Some(s) => s.clone(),
        None => StateSpec::isotropic(0.0),
    };
    if matches!(base.family, StateFamily::Isotropic | StateFamily::Random) {
        Ok(cfg
            .p
            .values()
            .iter()
            .map(|&p| {
                let mut s = base.clone();
                s.params.p = Some(p);
                (p, s)
            })
            .map(|(p, s)| (format!("state={};p={}", family_name(s.family), fmt_g(p)), s))
            .collect())
    } else {
        Ok(vec![(format!("state={}", family_name(base.family)), base)])
    }
}

fn family_name(f: StateFamily) -> &'static str {
    match f {
        StateFamily::Isotropic => "isotropic",
        StateFamily::BellDiagonal => "bell_diagonal",
        StateFamily::Random => "random",
        StateFamily::MaxEntangled => "max_entangled",
    }
}

fn flag(f: Flagged) -> (f64, String) {
    (f.value, f.condition.to_string())
}

/// Closed-form values over the configured grid.
pub fn exact(cfg: &RunConfig) -> Result<Output, CliError> {
    let mut table = Table::new(vec!["eq", "params", "value", "condition"]);
    let mut notes = Vec::new();
    let d = as_f64(cfg.d.values());
    let n = as_f64(cfg.n.values());
    let (eps, alpha, p) = (cfg.epsilon.values(), cfg.alpha.values(), cfg.p.values());
    let (p1, p2, p3) = (cfg.p1.values(), cfg.p2.values(), cfg.p3.values());
    for eq in cfg.eq.values() {
        let eq = eq.0.as_str();
        let axes: Vec<(&'static str, &[f64])> = match eq {
            "5" => vec![("n", &n), ("epsilon", eps), ("alpha", alpha), ("p", p)],
            "21" => vec![("d", &d), ("epsilon", eps), ("alpha", alpha), ("p", p)],
            "23" => vec![("d", &d), ("p", p)],
            "27" => vec![("d", &d), ("n", &n), ("epsilon", eps), ("alpha", alpha), ("p", p)],
            "28" => vec![("d", &d), ("n", &n), ("p", p)],
            "41" | "42" => vec![("d", &d), ("p1", p1), ("p2", p2)],
            "45" | "45_printed" => vec![("d", &d), ("p1", p1), ("p2", p2), ("p3", p3)],
            "38" | "40" => {
                for (label, spec) in qubit_states(cfg)? {
                    let s = spec.build(2)?;
                    let (v, c) = if eq == "38" { flag(beta_opt_2sample(&s)?) } else { (beta_1to2(&s)?, String::new()) };
                    table.push(vec![eq.into(), label, fmt_g(v), c]);
                }
                continue;
            }
            other => {
                return Err(CliError::Invalid(format!("unknown eq `{other}`; expected one of {}", EXACT_EQS.join(", "))))
            }
        };
        if eq.starts_with("45") && !notes.iter().any(|n| n == THREE_SOURCE_NOTE) {
            notes.push(THREE_SOURCE_NOTE.to_string());
        }
        for pt in grid(&axes) {
            let g = |k| get(&pt, k);
            let du = || g("d") as usize;
            let (v, c) = match eq {
                "5" => (beta_binomial(g("n") as usize, g("epsilon"), g("alpha"), g("p"))?, String::new()),
                "21" => (beta_t1_formula(du(), g("epsilon"), g("alpha"), g("p"))?, String::new()),
                "23" => (beta_t2_formula(du(), g("p"))?, String::new()),
                "27" => flag(beta_2n_bound(du(), g("n") as usize, g("epsilon"), g("alpha"), g("p"))?),
                "28" => (beta_pooled(du(), g("n") as usize, g("p"))?, String::new()),
                "41" => flag(beta_two_source(du(), g("p1"), g("p2"))?),
                "42" => (beta_two_source_local(du(), g("p1"), g("p2"))?, String::new()),
                "45" => flag(beta_three_source(du(), g("p1"), g("p2"), g("p3"))?),
                _ => (beta_three_source_printed(du(), g("p1"), g("p2"), g("p3"))?, String::new()),
            };
            table.push(vec![eq.into(), params(&pt), fmt_g(v), c]);
        }
    }
    let summary = vec![format!("{} rows", table.rows.len())];
    Ok(Output { files: vec![("exact.csv".into(), table.to_csv())], status: Status::Done, notes, summary })
}

/// The experiment described by `cfg`, validated.
pub fn experiment(cfg: &RunConfig) -> Result<ExperimentConfig, CliError> {
    let ec = ExperimentConfig {
        protocol: cfg.protocol.parse()?,
        d: cfg.d.single("d")?,
        n: cfg.n.single("n")?,
        epsilon: cfg.epsilon.single("epsilon")?,
        alpha: cfg.alpha.single("alpha")?,
        state: base_state(cfg)?,
        second_state: cfg.second_state.clone(),
        trials: cfg.trials.unwrap_or(100_000),
        seed: cfg.seed,
    };
    ec.validate()?;
    Ok(ec)
}

#[derive(Serialize)]
struct SimulationReport<'a> {
    experiment: &'a ExperimentConfig,
    result: &'a ExperimentResult,
}

/// Trial counts at which the running acceptance is reported.
fn checkpoints(trials: usize) -> Vec<usize> {
    let mut out: Vec<usize> = std::iter::successors(Some(10usize), |&m| m.checked_mul(10)).take_while(|&m| m < trials).collect();
    out.push(trials);
    out
}

/// Simulated acceptance plus a running trace. Trial `k` always uses the
/// same random stream, so each prefix of the run is itself reproducible.
pub fn simulate(cfg: &RunConfig) -> Result<Output, CliError> {
    let ec = experiment(cfg)?;
    let result = run(&ec)?;
    let mut trace = Table::new(vec!["trials", "accepted", "rate", "ci_half_width", "exact", "unit_rate", "unit_exact"]);
    for m in checkpoints(ec.trials) {
        let r = if m == ec.trials { result.clone() } else { run(&ExperimentConfig { trials: m, ..ec.clone() })? };
        trace.push(vec![
            m.to_string(),
            r.accepted.to_string(),
            fmt_g(r.rate),
            fmt_g(r.ci_half_width),
            fmt_g(r.exact),
            fmt_g(r.unit_rate),
            fmt_g(r.unit_exact),
        ]);
    }
    let json = to_json_bytes(&SimulationReport { experiment: &ec, result: &result }).map_err(|e| CliError::Failed(e.to_string()))?;
    let summary = vec![format!(
        "{}: accepted {}/{} = {} +- {} (exact {})",
        ec.protocol.name(),
        result.accepted,
        result.trials,
        fmt_g(result.rate),
        fmt_g(result.ci_half_width),
        fmt_g(result.exact)
    )];
    let mut notes = Vec::new();
    if ec.protocol == Protocol::BellPairs {
        let p = ec.state.build(ec.d).and_then(|s| entbench_core::qstate::fidelity_defect(&s))?;
        if (p - ec.epsilon).abs() < 1e-12 {
            notes.push(NULL_BOUNDARY_NOTE.to_string());
        }
    }
    Ok(Output {
        files: vec![("result.json".into(), json), ("trace.csv".into(), trace.to_csv())],
        status: Status::Done,
        notes,
        summary,
    })
}

/// `d^2 |u (x) conj(u)><...|` for `u` on `A1 A2`, pair-major.
pub fn two_pair_seed(u: &Ket, d: usize) -> Result<Ket, CliError> {
    let ua = u.clone().with_factors(vec![Factor::new("A1", d), Factor::new("A2", d)])?;
    let ub = u.conj().with_factors(vec![Factor::new("B1", d), Factor::new("B2", d)])?;
    Ok(permute_ket(&ua.tensor(&ub), &group_to_pair_perm(2))?)
}

/// Monte-Carlo twirl of the seed behind `target`, compared with the
/// closed-form operator. For `eq22`, `bell_index` picks the maximally
/// entangled vector `u` from the Bell basis.
pub fn twirl_target(target: &str, d: usize, samples: usize, seed: u64, stream: u64, bell_index: usize) -> Result<TwirlComparison, CliError> {
    let mut rng = sample_rng(seed, stream);
    let df = d as f64;
    let (est, want) = match target {
        "eq18" => {
            let v = Ket::basis(0, bipartite_factors(d));
            let est = mc_twirl_pure(&v, df, &GroupAction::new(GroupKind::SUd, d, 1)?, samples, &mut rng)?;
            (est, t1_inv(d)?)
        }
        "eq22" => {
            let basis = bell_basis(d)?;
            let u = basis
                .get(bell_index)
                .ok_or_else(|| CliError::Invalid(format!("Bell index {bell_index} out of range for d = {d}")))?;
            let v = two_pair_seed(u, d)?;
            let est = mc_twirl_pure(&v, df * df, &GroupAction::independent(GroupKind::SUd, d, 2)?, samples, &mut rng)?;
            (est, t2_inv(d)?)
        }
        "eq44" => (ghz_twirl(d, samples, &mut rng)?, t3_inv(d)?),
        "app_o_weights" => {
            if d != 2 {
                return Err(CliError::Invalid("app_o_weights needs d = 2".into()));
            }
            let v = doubled_pair_major(&u_op())?;
            let est = mc_twirl_pure(&v, 4.0, &GroupAction::new(GroupKind::SUdxU1, 2, 2)?, samples, &mut rng)?;
            (est, effective_operator(&OPT_WEIGHTS))
        }
        other => {
            return Err(CliError::Invalid(format!("unknown target `{other}`; expected one of {}", TWIRL_TARGETS.join(", "))))
        }
    };
    Ok(est.compare(want.op()))
}

pub fn twirl_status(c: &TwirlComparison) -> Status {
    if c.max_stderr > INCONCLUSIVE_STDERR {
        Status::Inconclusive
    } else if c.pass {
        Status::Pass
    } else {
        Status::Fail
    }
}

/// Twirl checks for every (target, d); fails if any check fails and is
/// inconclusive if any standard error is too large to decide.
pub fn twirl_verify(cfg: &RunConfig) -> Result<Output, CliError> {
    let samples = cfg.samples.unwrap_or(100_000);
    let mut table = Table::new(vec!["target", "d", "samples", "max_deviation", "max_stderr", "max_sigmas", "status"]);
    let mut statuses = Vec::new();
    let mut summary = Vec::new();
    let mut stream = 0;
    for target in cfg.target.values() {
        for &d in cfg.d.values() {
            let c = twirl_target(&target.0, d, samples, cfg.seed, stream, 1)?;
            stream += 1;
            let s = twirl_status(&c);
            statuses.push(s);
            summary.push(format!("{} d={d}: {} (max dev {}, max stderr {})", target.0, s.name(), fmt_g(c.max_deviation), fmt_g(c.max_stderr)));
            table.push(vec![
                target.0.clone(),
                d.to_string(),
                samples.to_string(),
                fmt_g(c.max_deviation),
                fmt_g(c.max_stderr),
                fmt_g(c.max_sigmas),
                s.name().into(),
            ]);
        }
    }
    let status = if statuses.contains(&Status::Fail) {
        Status::Fail
    } else if statuses.contains(&Status::Inconclusive) {
        Status::Inconclusive
    } else {
        Status::Pass
    };
    Ok(Output { files: vec![("twirl.csv".into(), table.to_csv())], status, notes: Vec::new(), summary })
}

/// Exact and simulated acceptance along `eps = delta/n`, `p = t'/n`.
pub fn sweep(cfg: &RunConfig) -> Result<Output, CliError> {
    let s = SweepConfig {
        protocol: cfg.protocol.parse()?,
        d: cfg.d.single("d")?,
        delta: cfg.delta.single("delta")?,
        t: cfg.t.single("t")?,
        alpha: cfg.alpha.single("alpha")?,
        n_list: cfg.n_list.clone(),
        trials: cfg.trials.unwrap_or(1000),
        seed: cfg.seed,
    };
    let rows = asymptotic_sweep(&s)?;
    let mut table = Table::new(vec!["n", "exact", "empirical", "ci_half_width", "limit"]);
    for r in &rows {
        table.push(vec![r.n.to_string(), fmt_g(r.exact), opt_g(r.empirical), opt_g(r.ci_half_width), fmt_g(r.limit)]);
    }
    let mut notes = Vec::new();
    if s.protocol == Protocol::BellPairs && (s.t - s.delta).abs() < 1e-12 {
        notes.push(NULL_BOUNDARY_NOTE.to_string());
    }
    let summary = vec![format!("{} rows, limit {}", rows.len(), rows.first().map(|r| fmt_g(r.limit)).unwrap_or_default())];
    Ok(Output { files: vec![("sweep.csv".into(), table.to_csv())], status: Status::Done, notes, summary })
}

/// Optimal classical tests: threshold, randomization and second error.
pub fn classical(cfg: &RunConfig) -> Result<Output, CliError> {
    let (eps, alpha, q) = (cfg.epsilon.values(), cfg.alpha.values(), cfg.p.values());
    let table = match cfg.dist.as_str() {
        "binomial" => {
            let ge = match cfg.direction.as_str() {
                "le" => false,
                "ge" => true,
                other => return Err(CliError::Invalid(format!("direction must be le or ge, got `{other}`"))),
            };
            let n = as_f64(cfg.n.values());
            let mut t = Table::new(vec!["n", "epsilon", "alpha", "direction", "l", "gamma", "null_accept", "q", "beta"]);
            for pt in grid(&[("n", &n), ("epsilon", eps), ("alpha", alpha), ("q", q)]) {
                let (nn, e, a, qq) = (get(&pt, "n") as usize, get(&pt, "epsilon"), get(&pt, "alpha"), get(&pt, "q"));
                let (test, beta) = if ge {
                    (binomial_ump_test_ge(nn, e, a)?, beta_binomial_ge(nn, e, a, qq)?)
                } else {
                    (binomial_ump_test(nn, e, a)?, beta_binomial(nn, e, a, qq)?)
                };
                t.push(vec![
                    nn.to_string(),
                    fmt_g(e),
                    fmt_g(a),
                    cfg.direction.clone(),
                    test.l.to_string(),
                    fmt_g(test.gamma),
                    fmt_g(test.accept_binomial(e)),
                    fmt_g(qq),
                    fmt_g(beta),
                ]);
            }
            t
        }
        "poisson" => {
            let mut t = Table::new(vec!["delta", "alpha", "l", "gamma", "t", "beta"]);
            for pt in grid(&[("delta", cfg.delta.values()), ("alpha", alpha), ("t", cfg.t.values())]) {
                let (dl, a, tt) = (get(&pt, "delta"), get(&pt, "alpha"), get(&pt, "t"));
                let test = poisson_ump_test(dl, a)?;
                t.push(vec![fmt_g(dl), fmt_g(a), test.l.to_string(), fmt_g(test.gamma), fmt_g(tt), fmt_g(beta_poisson(dl, a, tt)?)]);
            }
            t
        }
        other => return Err(CliError::Invalid(format!("dist must be binomial or poisson, got `{other}`"))),
    };
    let summary = vec![format!("{} rows", table.rows.len())];
    Ok(Output { files: vec![("classical.csv".into(), table.to_csv())], status: Status::Done, notes: Vec::new(), summary })
}
