//! A tabular alignment game for one prompt.
//!
//! The policy `π` over traces `Y` induces an answer marginal `ν_π` through the
//! parser `E`. In the KL geometry both players minimise the common objective
//!
//! `J(π, q) = β KL(π ‖ π0) - β Σ_z ν_π(z) ln q(z)`
//!
//! with the target `q` restricted to `q >= q_min`. The polynomial geometries
//! (`euclid`, `cubic`) are saddle problems in `(π, u)`:
//!
//! `L(π, u) = β/2 ‖π - π0‖² + <ν_π, u> - R*(u)`,
//!
//! where `R*(u) = β max_{q ∈ Δ} <q, u/β> - Φ(q)` and `∇Φ(q) = q` or `q²`.

use std::collections::BTreeMap;

use rand::distributions::{Distribution, WeightedIndex};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::error::{domain, input, Error, Result};
use crate::estimators::{falling_factorial_estimate, PolynomialReward, Sign};
use crate::table::EstimatorTable;

/// Guard added to the group standard deviation.
pub const ADV_EPS: f64 = 1e-8;
/// Damping of the alternating best responses that define the reference NE.
pub const NE_DAMPING: f64 = 0.5;
pub const NE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Geometry {
    Kl,
    Euclid,
    Cubic,
}

impl Geometry {
    /// `∇Φ(q) = Σ_m link_m q^m` for the polynomial geometries.
    pub fn link(self) -> Option<&'static [f64]> {
        match self {
            Geometry::Kl => None,
            Geometry::Euclid => Some(&[1.0]),
            Geometry::Cubic => Some(&[0.0, 1.0]),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Alignment {
    CoherenceEmpirical,
    DiversityCollision,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub traces: Vec<String>,
    pub answers: Vec<String>,
    /// `parser[y]` is the answer index of trace `y`.
    pub parser: Vec<usize>,
    pub ref_policy: Vec<f64>,
    pub beta: f64,
    pub geometry: Geometry,
    pub alignment: Alignment,
    pub sign: Sign,
    pub k: usize,
    pub seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpecFile {
    traces: Vec<String>,
    answers: Vec<String>,
    parser: BTreeMap<String, String>,
    ref_policy: Vec<f64>,
    beta: f64,
    geometry: Geometry,
    alignment: Alignment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sign: Option<i32>,
    #[serde(rename = "K")]
    k: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

impl GameSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        traces: Vec<String>,
        answers: Vec<String>,
        parser: Vec<usize>,
        ref_policy: Vec<f64>,
        beta: f64,
        geometry: Geometry,
        alignment: Alignment,
        k: usize,
    ) -> Result<GameSpec> {
        let sign = match alignment {
            Alignment::CoherenceEmpirical => Sign::Coherence,
            Alignment::DiversityCollision => Sign::Diversity,
        };
        let spec = GameSpec { traces, answers, parser, ref_policy, beta, geometry, alignment, sign, k, seed: None };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let (ny, nz) = (self.traces.len(), self.answers.len());
        if ny == 0 || nz == 0 {
            return Err(Error::Validation("traces and answers must be nonempty".into()));
        }
        if self.parser.len() != ny || self.ref_policy.len() != ny {
            return Err(Error::Validation(format!(
                "parser has {} entries and ref_policy {}, expected one per trace ({ny})",
                self.parser.len(),
                self.ref_policy.len()
            )));
        }
        if let Some(y) = self.parser.iter().position(|&z| z >= nz) {
            return Err(Error::Validation(format!("trace `{}` maps to no answer", self.traces[y])));
        }
        if let Some(z) = (0..nz).find(|z| !self.parser.contains(z)) {
            return Err(Error::Validation(format!("answer `{}` has no preimage", self.answers[z])));
        }
        if let Some(y) = self.ref_policy.iter().position(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Validation(format!("ref_policy[{y}] must be strictly positive")));
        }
        let total: f64 = self.ref_policy.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Validation(format!("ref_policy sums to {total}, not 1")));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::Validation(format!("beta must be positive, got {}", self.beta)));
        }
        if self.k == 0 {
            return Err(Error::Validation("K must be positive".into()));
        }
        let ok = match self.geometry {
            Geometry::Kl => self.alignment == Alignment::CoherenceEmpirical && self.sign == Sign::Coherence,
            _ => self.alignment == Alignment::DiversityCollision && self.sign == Sign::Diversity,
        };
        if !ok {
            return Err(Error::Validation(
                "kl pairs with coherence_empirical (s = -1); euclid and cubic pair with diversity_collision (s = +1)".into(),
            ));
        }
        Ok(())
    }

    pub fn z_size(&self) -> usize {
        self.answers.len()
    }

    /// `1 / (2 K |Z|)`
    pub fn q_min(&self) -> f64 {
        1.0 / (2.0 * self.k as f64 * self.z_size() as f64)
    }

    pub fn marginal(&self, policy: &[f64]) -> Vec<f64> {
        answer_marginal(policy, &self.parser, self.z_size())
    }

    pub fn from_json_str(text: &str) -> Result<GameSpec> {
        let f: SpecFile = serde_json::from_str(text)
            .map_err(|e| Error::Parse(format!("game spec line {} column {}: {e}", e.line(), e.column())))?;
        let parser = f
            .traces
            .iter()
            .map(|y| {
                let z = f.parser.get(y).ok_or_else(|| Error::Validation(format!("parser has no entry for trace `{y}`")))?;
                f.answers
                    .iter()
                    .position(|a| a == z)
                    .ok_or_else(|| Error::Validation(format!("trace `{y}` maps to unknown answer `{z}`")))
            })
            .collect::<Result<Vec<usize>>>()?;
        if let Some(y) = f.parser.keys().find(|y| !f.traces.contains(y)) {
            return Err(Error::Validation(format!("parser names unknown trace `{y}`")));
        }
        let mut spec = GameSpec::new(f.traces, f.answers, parser, f.ref_policy, f.beta, f.geometry, f.alignment, f.k)?;
        if let Some(s) = f.sign {
            if s as f64 != spec.sign.value() {
                return Err(Error::Validation(format!("sign {s} contradicts alignment {:?}", spec.alignment)));
            }
        }
        spec.seed = f.seed;
        Ok(spec)
    }

    pub fn to_json_string(&self) -> String {
        let f = SpecFile {
            traces: self.traces.clone(),
            answers: self.answers.clone(),
            parser: self.traces.iter().zip(&self.parser).map(|(y, &z)| (y.clone(), self.answers[z].clone())).collect(),
            ref_policy: self.ref_policy.clone(),
            beta: self.beta,
            geometry: self.geometry,
            alignment: self.alignment,
            sign: Some(self.sign.value() as i32),
            k: self.k,
            seed: self.seed,
        };
        serde_json::to_string_pretty(&f).expect("spec serializes") + "\n"
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<GameSpec> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Input(format!("cannot read {}: {e}", path.display())))?;
        GameSpec::from_json_str(&text)
    }

    /// Six traces, two per answer, with most reference mass on answer 0.
    pub fn euclid_toy() -> GameSpec {
        toy(vec![0.5, 0.02, 0.2, 0.02, 0.2, 0.06], Geometry::Euclid, Alignment::DiversityCollision)
    }

    pub fn kl_toy() -> GameSpec {
        toy(vec![0.3, 0.2, 0.2, 0.1, 0.12, 0.08], Geometry::Kl, Alignment::CoherenceEmpirical)
    }
}

fn toy(ref_policy: Vec<f64>, geometry: Geometry, alignment: Alignment) -> GameSpec {
    GameSpec::new(
        (1..=6).map(|i| format!("y{i}")).collect(),
        vec!["a".into(), "b".into(), "c".into()],
        vec![0, 0, 1, 1, 2, 2],
        ref_policy,
        1.0,
        geometry,
        alignment,
        16,
    )
    .expect("valid toy game")
}

/// `ν(z) = Σ_{y: E(y) = z} π(y)`
pub fn answer_marginal(policy: &[f64], parser: &[usize], z_size: usize) -> Vec<f64> {
    let mut nu = vec![0.0; z_size];
    for (p, &z) in policy.iter().zip(parser) {
        nu[z] += p;
    }
    nu
}

/// Euclidean projection onto the probability simplex.
pub fn sparsemax_project(v: &[f64]) -> Vec<f64> {
    let tau = sparsemax_threshold(v);
    v.iter().map(|x| (x - tau).max(0.0)).collect()
}

/// The threshold `τ` with `Σ max(v - τ, 0) = 1`.
pub fn sparsemax_threshold(v: &[f64]) -> f64 {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).expect("finite input"));
    let mut css = 0.0;
    let mut tau = u[0] - 1.0;
    for (i, x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (i + 1) as f64;
        if x - t > 0.0 {
            tau = t;
        }
    }
    tau
}

fn eval_link(link: &[f64], q: f64) -> f64 {
    link.iter().enumerate().map(|(j, c)| c * q.powi(j as i32 + 1)).sum()
}

/// `Φ(q) = Σ_z Σ_m link_m q_z^(m+1) / (m+1)`
fn potential(link: &[f64], q: &[f64]) -> f64 {
    q.iter()
        .map(|&x| link.iter().enumerate().map(|(j, c)| c * x.powi(j as i32 + 2) / (j + 2) as f64).sum::<f64>())
        .sum()
}

fn inverse_link(link: &[f64], y: f64) -> f64 {
    if y <= 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    if eval_link(link, hi) <= y {
        return hi;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if eval_link(link, mid) < y {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= f64::EPSILON * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// `argmax_{q ∈ Δ} <q, w> - Φ(q)` by water-filling on `∇Φ(q_z) = (w_z - λ)_+`.
pub fn conjugate_argmax(link: &[f64], w: &[f64]) -> Vec<f64> {
    if link == [1.0] {
        return sparsemax_project(w);
    }
    let wmax = w.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let fill = |lam: f64| -> f64 { w.iter().map(|&x| inverse_link(link, x - lam)).sum() };
    let (mut lo, mut hi) = (wmax - eval_link(link, 1.0), wmax);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if fill(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let q: Vec<f64> = w.iter().map(|&x| inverse_link(link, x - 0.5 * (lo + hi))).collect();
    let s: f64 = q.iter().sum();
    q.iter().map(|x| x / s).collect()
}

/// `argmax_{q >= q_min, Σq = 1} Σ ν ln q`, which is `max(ν/λ, q_min)`.
pub fn floor_target(nu: &[f64], q_min: f64) -> Vec<f64> {
    let n = nu.len();
    let mut floored = vec![false; n];
    loop {
        let free_mass: f64 = (0..n).filter(|&z| !floored[z]).map(|z| nu[z]).sum();
        let budget = 1.0 - q_min * floored.iter().filter(|&&f| f).count() as f64;
        let lam = free_mass / budget;
        let mut changed = false;
        for z in 0..n {
            if !floored[z] && nu[z] / lam < q_min {
                floored[z] = true;
                changed = true;
            }
        }
        if !changed {
            return (0..n).map(|z| if floored[z] { q_min } else { nu[z] / lam }).collect();
        }
    }
}

/// Dual variable `u = s β ∇Φ(q)`; for KL, `∇Φ(q) = ln q + 1`.
pub fn dual_u(spec: &GameSpec, q: &[f64]) -> Vec<f64> {
    let s = spec.sign.value();
    match spec.geometry.link() {
        None => q.iter().map(|x| s * spec.beta * (x.ln() + 1.0)).collect(),
        Some(link) => q.iter().map(|&x| s * spec.beta * eval_link(link, x)).collect(),
    }
}

/// Target step of the game from the answer counts of one group.
pub fn target_best_response(spec: &GameSpec, counts: &[usize]) -> Result<(Vec<f64>, Vec<f64>)> {
    if counts.len() != spec.z_size() {
        return input(format!("expected {} answer counts, got {}", spec.z_size(), counts.len()));
    }
    let total: usize = counts.iter().sum();
    if total == 0 {
        return input("answer counts sum to zero");
    }
    if total != spec.k {
        return input(format!("answer counts sum to {total}, expected K = {}", spec.k));
    }
    let q = match spec.alignment {
        Alignment::CoherenceEmpirical => {
            let nu: Vec<f64> = counts.iter().map(|&c| c as f64 / total as f64).collect();
            floor_target(&nu, spec.q_min())
        }
        Alignment::DiversityCollision => {
            let inv: Vec<f64> = counts.iter().map(|&c| 1.0 / (c as f64 + 1.0)).collect();
            let s: f64 = inv.iter().sum();
            inv.iter().map(|x| x / s).collect()
        }
    };
    let u = dual_u(spec, &q);
    Ok((q, u))
}

/// Best-response policy to the target `q`.
pub fn optimal_policy(spec: &GameSpec, q: &[f64]) -> Result<Vec<f64>> {
    if q.len() != spec.z_size() {
        return input(format!("target has {} entries, expected {}", q.len(), spec.z_size()));
    }
    match spec.geometry.link() {
        None => {
            if let Some(y) = spec.parser.iter().position(|&z| !(q[z] > 0.0)) {
                return domain(format!(
                    "q({}) = 0 but trace `{}` has reference mass: outside the KL geometry",
                    spec.answers[spec.parser[y]], spec.traces[y]
                ));
            }
            let w: Vec<f64> = spec.ref_policy.iter().zip(&spec.parser).map(|(p, &z)| p * q[z]).collect();
            let s: f64 = w.iter().sum();
            Ok(w.iter().map(|x| x / s).collect())
        }
        Some(link) => {
            let s = spec.sign.value();
            let v: Vec<f64> = spec
                .ref_policy
                .iter()
                .zip(&spec.parser)
                .map(|(p, &z)| p - s * eval_link(link, q[z]))
                .collect();
            Ok(sparsemax_project(&v))
        }
    }
}

fn policy_for_u(spec: &GameSpec, u: &[f64]) -> Vec<f64> {
    let v: Vec<f64> = spec.ref_policy.iter().zip(&spec.parser).map(|(p, &z)| p - u[z] / spec.beta).collect();
    sparsemax_project(&v)
}

fn kl_objective(spec: &GameSpec, policy: &[f64], q: &[f64]) -> f64 {
    let kl: f64 = policy
        .iter()
        .zip(&spec.ref_policy)
        .filter(|(p, _)| **p > 0.0)
        .map(|(p, r)| p * (p / r).ln())
        .sum();
    let nu = spec.marginal(policy);
    let cross: f64 = nu.iter().zip(q).filter(|(n, _)| **n > 0.0).map(|(n, x)| n * x.ln()).sum();
    spec.beta * (kl - cross)
}

fn conjugate(spec: &GameSpec, link: &[f64], u: &[f64]) -> f64 {
    let w: Vec<f64> = u.iter().map(|x| x / spec.beta).collect();
    let q = conjugate_argmax(link, &w);
    spec.beta * (dot(&q, &w) - potential(link, &q))
}

/// Duality gap of the state `(π, q)`.
///
/// KL: the sum of both players' best-response improvements in `J`; the target
/// player's feasible set is `{q >= q_min}` together with its current `q`.
/// Polynomial: `max_u L(π, u) - min_π L(π, u)` at `u = β ∇Φ(q)`.
pub fn duality_gap(spec: &GameSpec, policy: &[f64], q: &[f64]) -> f64 {
    match spec.geometry {
        Geometry::Kl => {
            let j = kl_objective(spec, policy, q);
            let pol = optimal_policy(spec, q).map(|p| kl_objective(spec, &p, q)).unwrap_or(j);
            let tgt = floor_target(&spec.marginal(policy), spec.q_min());
            let tgt = kl_objective(spec, policy, &tgt);
            (j - pol).max(0.0) + (j - tgt).max(0.0)
        }
        _ => duality_gap_u(spec, policy, &dual_u(spec, q)),
    }
}

/// Duality gap of `(π, u)` in a polynomial geometry; in KL, `u` is mapped to
/// the target `q ∝ exp(-u/β)`.
pub fn duality_gap_u(spec: &GameSpec, policy: &[f64], u: &[f64]) -> f64 {
    let Some(link) = spec.geometry.link() else {
        let m = u.iter().cloned().fold(f64::INFINITY, f64::min);
        let w: Vec<f64> = u.iter().map(|x| (-(x - m) / spec.beta).exp()).collect();
        let s: f64 = w.iter().sum();
        let q: Vec<f64> = w.iter().map(|x| x / s).collect();
        return duality_gap(spec, policy, &q);
    };
    let b = spec.beta;
    let nu = spec.marginal(policy);
    let upper = 0.5 * b * dist_sq(policy, &spec.ref_policy) + b * potential(link, &nu);
    let pb = policy_for_u(spec, u);
    let lower = 0.5 * b * dist_sq(&pb, &spec.ref_policy) + dot(&spec.marginal(&pb), u) - conjugate(spec, link, u);
    upper - lower
}

/// Reference equilibrium by damped alternating exact best responses.
#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub policy: Vec<f64>,
    pub q: Vec<f64>,
    pub marginal: Vec<f64>,
    pub iterations: usize,
}

pub fn exact_ne(spec: &GameSpec) -> Result<Equilibrium> {
    let target = |pi: &[f64]| -> Vec<f64> {
        let nu = spec.marginal(pi);
        match spec.geometry {
            Geometry::Kl => floor_target(&nu, spec.q_min()),
            _ => nu,
        }
    };
    let mut pi = spec.ref_policy.clone();
    for it in 1..=1_000_000 {
        let br = optimal_policy(spec, &target(&pi))?;
        let next: Vec<f64> = pi.iter().zip(&br).map(|(a, b)| (1.0 - NE_DAMPING) * a + NE_DAMPING * b).collect();
        let step = next.iter().zip(&pi).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if step <= NE_TOL {
            let q = target(&pi);
            let marginal = spec.marginal(&pi);
            return Ok(Equilibrium { policy: pi, q, marginal, iterations: it });
        }
    }
    Err(Error::Solver("alternating best responses did not reach a fixed point".into()))
}

pub fn entropy(p: &[f64]) -> f64 {
    -p.iter().filter(|&&x| x > 0.0).map(|x| x * x.ln()).sum::<f64>()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn dist_sq(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Grpo,
    Mirror,
    MirrorExact,
}

/// One row of a trace. Mirror runs store uniform averages of the iterates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GameRecord {
    pub t: usize,
    pub policy: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
    pub counts: Vec<usize>,
    /// Per sampled trace.
    pub rewards: Vec<f64>,
    pub advantages: Vec<f64>,
    pub gap: f64,
    pub entropy: f64,
    pub l1_error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameTrace {
    pub mode: Mode,
    pub seed: u64,
    pub reference: Equilibrium,
    pub records: Vec<GameRecord>,
    /// Largest `ν_π(z) / q(z)` seen along the run.
    pub max_importance_ratio: f64,
    /// Mean squared norm of the policy step direction.
    pub grad_second_moment: f64,
}

impl GameTrace {
    pub fn last(&self) -> &GameRecord {
        self.records.last().expect("a trace holds at least the initial state")
    }

    pub fn final_gap(&self) -> f64 {
        self.last().gap
    }

    pub fn final_l1_error(&self) -> f64 {
        self.last().l1_error
    }

    pub fn csv_header() -> [&'static str; 4] {
        ["t", "gap", "entropy_of_policy", "l1_error_to_ref_NE"]
    }

    pub fn csv_rows(&self) -> Vec<Vec<String>> {
        self.records
            .iter()
            .map(|r| vec![r.t.to_string(), r.gap.to_string(), r.entropy.to_string(), r.l1_error.to_string()])
            .collect()
    }

    /// Final state and run summary.
    pub fn sidecar(&self) -> serde_json::Value {
        let r = self.last();
        json!({
            "mode": self.mode,
            "seed": self.seed,
            "iterations": r.t,
            "final": r,
            "reference_ne": {
                "policy": self.reference.policy,
                "q": self.reference.q,
                "marginal": self.reference.marginal,
            },
            "max_importance_ratio": self.max_importance_ratio,
            "grad_second_moment": self.grad_second_moment,
        })
    }
}

fn rng_for(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn sample_counts(spec: &GameSpec, policy: &[f64], rng: &mut ChaCha8Rng) -> (Vec<usize>, Vec<usize>) {
    let dist = WeightedIndex::new(policy).expect("policy is a distribution");
    let ys: Vec<usize> = (0..spec.k).map(|_| dist.sample(rng)).collect();
    let mut counts = vec![0; spec.z_size()];
    for &y in &ys {
        counts[spec.parser[y]] += 1;
    }
    (ys, counts)
}

struct Recorder<'a> {
    spec: &'a GameSpec,
    reference: &'a Equilibrium,
    records: Vec<GameRecord>,
    ratio: f64,
    grad_sq: f64,
    steps: usize,
}

impl<'a> Recorder<'a> {
    fn new(spec: &'a GameSpec, reference: &'a Equilibrium) -> Self {
        Recorder { spec, reference, records: Vec::new(), ratio: 0.0, grad_sq: 0.0, steps: 0 }
    }

    #[allow(clippy::too_many_arguments)]
    fn push(&mut self, t: usize, policy: &[f64], q: &[f64], u: &[f64], gap: f64, counts: Vec<usize>, rewards: Vec<f64>, advantages: Vec<f64>) {
        let nu = self.spec.marginal(policy);
        self.records.push(GameRecord {
            t,
            policy: policy.to_vec(),
            q: q.to_vec(),
            u: u.to_vec(),
            counts,
            rewards,
            advantages,
            gap,
            entropy: entropy(policy),
            l1_error: l1(&nu, &self.reference.marginal),
        });
    }

    fn observe(&mut self, policy: &[f64], q: &[f64], direction: &[f64]) {
        let nu = self.spec.marginal(policy);
        for (n, x) in nu.iter().zip(q) {
            if *x > 0.0 {
                self.ratio = self.ratio.max(n / x);
            }
        }
        self.grad_sq += dot(direction, direction);
        self.steps += 1;
    }

    fn finish(self, mode: Mode, seed: u64) -> GameTrace {
        GameTrace {
            mode,
            seed,
            reference: self.reference.clone(),
            records: self.records,
            max_importance_ratio: self.ratio,
            grad_second_moment: if self.steps == 0 { 0.0 } else { self.grad_sq / self.steps as f64 },
        }
    }
}

/// Sampled-group dynamics with table rewards.
///
/// Each iteration draws `K` traces from `π`, looks up `R_z = c_{X_z}` for every
/// answer and standardises the group rewards into advantages. The policy step
/// uses the centred rewards `R_{E(y)} - mean_i R_i` (advantage times group
/// standard deviation): entropic mirror step on `ln π` for KL, projected
/// gradient for the polynomial geometries. The target moves toward the
/// group's best response with the same rate: the floored empirical
/// distribution for KL, the empirical distribution (the conjugate maximiser
/// of `L`) for the polynomial geometries.
pub fn run_game_grpo(spec: &GameSpec, table: &EstimatorTable, t_max: usize, lr: f64, seed: u64) -> Result<GameTrace> {
    spec.validate()?;
    if table.k != spec.k {
        return input(format!("table has K = {} but the game has K = {}", table.k, spec.k));
    }
    if !(lr > 0.0 && lr.is_finite()) {
        return input(format!("learning rate must be positive, got {lr}"));
    }
    let reference = exact_ne(spec)?;
    let mut rec = Recorder::new(spec, &reference);
    let mut rng = rng_for(seed);
    let lam = lr.min(1.0);
    let b = spec.beta;
    let mut pi = spec.ref_policy.clone();
    let mut q = vec![1.0 / spec.z_size() as f64; spec.z_size()];
    rec.push(0, &pi, &q, &dual_u(spec, &q), duality_gap(spec, &pi, &q), vec![], vec![], vec![]);
    for t in 1..=t_max {
        let (ys, counts) = sample_counts(spec, &pi, &mut rng);
        let rz: Vec<f64> = counts.iter().map(|&x| table.coeffs[x]).collect();
        let rewards: Vec<f64> = ys.iter().map(|&y| rz[spec.parser[y]]).collect();
        let n = rewards.len() as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let std = (rewards.iter().map(|r| (r - mean) * (r - mean)).sum::<f64>() / n).sqrt();
        let advantages: Vec<f64> = rewards.iter().map(|r| (r - mean) / (std + ADV_EPS)).collect();
        let centred: Vec<f64> = spec.parser.iter().map(|&z| rz[z] - mean).collect();
        let direction: Vec<f64>;
        match spec.geometry {
            Geometry::Kl => {
                let mut lp: Vec<f64> = pi
                    .iter()
                    .zip(&spec.ref_policy)
                    .zip(&centred)
                    .map(|((p, r), a)| (1.0 - lam) * p.ln() + lam * (r.ln() + a / b))
                    .collect();
                let m = lp.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                lp.iter_mut().for_each(|x| *x = (*x - m).exp());
                let s: f64 = lp.iter().sum();
                let next: Vec<f64> = lp.iter().map(|x| x / s).collect();
                direction = next.iter().zip(&pi).map(|(a, c)| a - c).collect();
                pi = next;
            }
            _ => {
                direction = pi
                    .iter()
                    .zip(&spec.ref_policy)
                    .zip(&centred)
                    .map(|((p, r), a)| b * (p - r) - a)
                    .collect();
                let v: Vec<f64> = pi.iter().zip(&direction).map(|(p, g)| p - lam * g).collect();
                pi = sparsemax_project(&v);
            }
        }
        let target = match spec.geometry {
            Geometry::Kl => target_best_response(spec, &counts)?.0,
            _ => counts.iter().map(|&c| c as f64 / spec.k as f64).collect(),
        };
        for (x, y) in q.iter_mut().zip(&target) {
            *x = (1.0 - lam) * *x + lam * y;
        }
        rec.observe(&pi, &q, &direction);
        let gap = duality_gap(spec, &pi, &q);
        rec.push(t, &pi, &q, &dual_u(spec, &q), gap, counts, rewards, advantages);
    }
    Ok(rec.finish(Mode::Grpo, seed))
}

/// Step sizes for mirror descent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    Constant(f64),
    /// `η0 / √T`, fixed over a run of length `T`.
    Horizon(f64),
    /// `η0 / √(t + 1)`
    Decaying(f64),
}

impl StepRule {
    pub fn step(self, t: usize, t_max: usize) -> f64 {
        match self {
            StepRule::Constant(e) => e,
            StepRule::Horizon(e) => e / (t_max.max(1) as f64).sqrt(),
            StepRule::Decaying(e) => e / ((t + 1) as f64).sqrt(),
        }
    }

    fn check(self) -> Result<()> {
        let e = match self {
            StepRule::Constant(e) | StepRule::Horizon(e) | StepRule::Decaying(e) => e,
        };
        if !(e > 0.0 && e.is_finite()) {
            return input(format!("step rule must give positive steps, got {e}"));
        }
        Ok(())
    }
}

/// `1, 2, 3, 5, 8, ...` up to `T` (about ten points per decade), always ending at `T`.
pub fn log_schedule(t_max: usize) -> Vec<usize> {
    let mut out: Vec<usize> = (0..)
        .map(|j| 10f64.powf(j as f64 / 10.0).round() as usize)
        .take_while(|&t| t < t_max)
        .collect();
    out.dedup();
    out.push(t_max);
    out
}

fn check_polynomial(spec: &GameSpec) -> Result<&'static [f64]> {
    spec.validate()?;
    spec.geometry
        .link()
        .ok_or_else(|| Error::Input("mirror descent needs a polynomial geometry (euclid or cubic)".into()))
}

/// Simultaneous stochastic mirror descent on `π` and ascent on `u`.
///
/// `π ← Π_Δ(π - η (β(π - π0) + u∘E))`, `u ← u + η (Û - u)` where `Û_z` is the
/// U-statistic of `u(ν) = β ∇Φ(ν)` from a fresh group of `K` traces. Gaps are
/// those of the uniform averages of the iterates `0..t`, recorded on
/// [`log_schedule`].
pub fn run_mirror_descent(spec: &GameSpec, reward: &PolynomialReward, t_max: usize, step: StepRule, seed: u64) -> Result<GameTrace> {
    let link = check_polynomial(spec)?;
    step.check()?;
    if t_max == 0 {
        return input("mirror descent needs T >= 1");
    }
    if reward.degree() > spec.k {
        return domain(format!("reward degree {} exceeds K = {}", reward.degree(), spec.k));
    }
    if reward.coeffs != link || reward.sign != spec.sign || reward.beta != spec.beta {
        return input("reward polynomial, sign and beta must match the game's geometry");
    }
    let reference = exact_ne(spec)?;
    let mut rec = Recorder::new(spec, &reference);
    let mut rng = rng_for(seed);
    let (ny, nz) = (spec.traces.len(), spec.z_size());
    let mut pi = vec![1.0 / ny as f64; ny];
    let mut u = dual_u(spec, &vec![1.0 / nz as f64; nz]);
    let (mut spi, mut su) = (vec![0.0; ny], vec![0.0; nz]);
    let schedule = log_schedule(t_max);
    let mut next = 0;
    for t in 0..t_max {
        add_to(&mut spi, &pi);
        add_to(&mut su, &u);
        if schedule[next] == t + 1 {
            let (ap, au) = (scaled(&spi, t + 1), scaled(&su, t + 1));
            let q = conjugate_argmax(link, &au.iter().map(|x| x / spec.beta).collect::<Vec<_>>());
            let gap = duality_gap_u(spec, &ap, &au);
            rec.push(t + 1, &ap, &q, &au, gap, vec![], vec![], vec![]);
            next += 1;
        }
        if t + 1 == t_max {
            break;
        }
        let eta = step.step(t, t_max);
        let (_, counts) = sample_counts(spec, &pi, &mut rng);
        let mut u_hat = vec![0.0; nz];
        for (z, &x) in counts.iter().enumerate() {
            for (j, c) in reward.coeffs.iter().enumerate() {
                u_hat[z] += spec.beta * c * falling_factorial_estimate(x, spec.k, j + 1)?;
            }
        }
        let (next_pi, dir) = policy_step(spec, &pi, &u, eta);
        rec.observe(&pi, &conjugate_argmax(link, &u.iter().map(|x| x / spec.beta).collect::<Vec<_>>()), &dir);
        let e = eta.min(1.0);
        for (a, b) in u.iter_mut().zip(&u_hat) {
            *a += e * (b - *a);
        }
        pi = next_pi;
    }
    Ok(rec.finish(Mode::Mirror, seed))
}

/// Full-gradient variant of [`run_mirror_descent`] with exact marginals and a
/// constant step; records the last iterate every iteration.
pub fn run_mirror_descent_exact(spec: &GameSpec, t_max: usize, eta: f64) -> Result<GameTrace> {
    let link = check_polynomial(spec)?;
    StepRule::Constant(eta).check()?;
    let reference = exact_ne(spec)?;
    let mut rec = Recorder::new(spec, &reference);
    let (ny, nz) = (spec.traces.len(), spec.z_size());
    let mut pi = vec![1.0 / ny as f64; ny];
    let mut u = dual_u(spec, &vec![1.0 / nz as f64; nz]);
    let e = eta.min(1.0);
    for t in 0..=t_max {
        let q = conjugate_argmax(link, &u.iter().map(|x| x / spec.beta).collect::<Vec<_>>());
        rec.push(t, &pi, &q, &u, duality_gap_u(spec, &pi, &u), vec![], vec![], vec![]);
        if t == t_max {
            break;
        }
        let u_exact = dual_u(spec, &spec.marginal(&pi));
        let (next_pi, dir) = policy_step(spec, &pi, &u, eta);
        rec.observe(&pi, &q, &dir);
        for (a, b) in u.iter_mut().zip(&u_exact) {
            *a += e * (b - *a);
        }
        pi = next_pi;
    }
    Ok(rec.finish(Mode::MirrorExact, 0))
}

fn policy_step(spec: &GameSpec, pi: &[f64], u: &[f64], eta: f64) -> (Vec<f64>, Vec<f64>) {
    let dir: Vec<f64> = pi
        .iter()
        .zip(&spec.ref_policy)
        .zip(&spec.parser)
        .map(|((p, r), &z)| spec.beta * (p - r) + u[z])
        .collect();
    let v: Vec<f64> = pi.iter().zip(&dir).map(|(p, g)| p - eta * g).collect();
    (sparsemax_project(&v), dir)
}

fn add_to(acc: &mut [f64], x: &[f64]) {
    acc.iter_mut().zip(x).for_each(|(a, b)| *a += b);
}

fn scaled(acc: &[f64], n: usize) -> Vec<f64> {
    acc.iter().map(|a| a / n as f64).collect()
}
