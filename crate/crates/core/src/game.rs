//! Game instances, strategies, utilities and the follower best-response oracle.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Two follower expected utilities closer than this are tied.
pub const TIE_TOL: f64 = 1e-9;
/// Allowed deviation of a mixed strategy's entries from the simplex.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Side information revealed at the start of a round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Context {
    #[serde(default)]
    pub vector: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
}

/// Exact identity of a context, used for caching and hindsight grouping.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ContextKey {
    Label(String),
    Bits(Vec<u64>),
}

impl fmt::Display for ContextKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextKey::Label(s) => f.write_str(s),
            ContextKey::Bits(bits) => {
                for (i, b) in bits.iter().enumerate() {
                    if i > 0 {
                        f.write_str(" ")?;
                    }
                    write!(f, "{}", f64::from_bits(*b))?;
                }
                Ok(())
            }
        }
    }
}

impl Context {
    pub fn new(vector: Vec<f64>) -> Result<Self> {
        let z = Context { vector, label: None };
        z.validate()?;
        Ok(z)
    }

    pub fn labeled(label: impl Into<String>, vector: Vec<f64>) -> Result<Self> {
        let z = Context {
            vector,
            label: Some(label.into()),
        };
        z.validate()?;
        Ok(z)
    }

    pub fn dim(&self) -> usize {
        self.vector.len()
    }

    pub fn key(&self) -> ContextKey {
        match &self.label {
            Some(l) => ContextKey::Label(l.clone()),
            None => ContextKey::Bits(self.vector.iter().map(|v| v.to_bits()).collect()),
        }
    }

    fn validate(&self) -> Result<()> {
        if self.vector.is_empty() {
            return Err(Error::InstanceFormat("context vector must have d >= 1".into()));
        }
        if self.vector.iter().any(|v| !v.is_finite()) {
            return Err(Error::InstanceFormat("context components must be finite".into()));
        }
        Ok(())
    }
}

/// A probability vector over leader actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct MixedStrategy(Vec<f64>);

impl TryFrom<Vec<f64>> for MixedStrategy {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        MixedStrategy::new(v)
    }
}

impl From<MixedStrategy> for Vec<f64> {
    fn from(x: MixedStrategy) -> Self {
        x.0
    }
}

impl MixedStrategy {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InstanceFormat("mixed strategy needs A >= 1 entries".into()));
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(Error::InstanceFormat(format!(
                "mixed strategy entries must be finite and nonnegative: {probs:?}"
            )));
        }
        let s: f64 = probs.iter().sum();
        if (s - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::InstanceFormat(format!("mixed strategy must sum to 1 (got {s})")));
        }
        Ok(MixedStrategy(probs))
    }

    /// Projects a numerically computed point that lies on the simplex up to
    /// round-off: tiny negatives are zeroed and the vector is renormalized.
    /// Returns `None` when the deviation exceeds `tol`.
    pub fn from_approx(mut v: Vec<f64>, tol: f64) -> Option<Self> {
        if v.is_empty() || v.iter().any(|p| !p.is_finite() || *p < -tol) {
            return None;
        }
        for p in v.iter_mut() {
            if *p < 0.0 {
                *p = 0.0;
            }
        }
        let s: f64 = v.iter().sum();
        if (s - 1.0).abs() > tol.max(SIMPLEX_TOL) {
            return None;
        }
        v.iter_mut().for_each(|p| *p /= s);
        Some(MixedStrategy(v))
    }

    pub fn pure(len: usize, action: usize) -> Self {
        assert!(action < len, "action {action} out of range for {len} actions");
        let mut v = vec![0.0; len];
        v[action] = 1.0;
        MixedStrategy(v)
    }

    pub fn uniform(len: usize) -> Self {
        assert!(len >= 1);
        MixedStrategy(vec![1.0 / len as f64; len])
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn l1_distance(&self, other: &MixedStrategy) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| (a - b).abs()).sum()
    }

    pub fn linf_distance(&self, other: &MixedStrategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Draws a leader action from this distribution.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in self.0.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // round-off: last action with positive mass
        self.0.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

/// A follower action; the index doubles as the tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FollowerAction(pub usize);

/// `u(z, a_l, a_f) in [0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum UtilityModel {
    /// One row-major `[A][A_f]` table per context label.
    Tabular { tables: BTreeMap<String, Vec<Vec<f64>>> },
    /// `clamp(<z, theta[a_l][a_f]>, 0, 1)`.
    LinearClipped {
        theta: Vec<Vec<Vec<f64>>>,
        /// Declares that the utility does not vary with the context.
        #[serde(default)]
        context_free: bool,
    },
}

/// Dense `[A][A_f]` payoff matrix for one context.
#[derive(Debug, Clone, PartialEq)]
pub struct PayoffMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl PayoffMatrix {
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, |r| r.len());
        let data = rows.iter().flat_map(|r| r.iter().copied()).collect();
        PayoffMatrix {
            rows: rows.len(),
            cols,
            data,
        }
    }

    #[inline]
    pub fn get(&self, a_l: usize, a_f: usize) -> f64 {
        self.data[a_l * self.cols + a_f]
    }

    pub fn leader_actions(&self) -> usize {
        self.rows
    }

    pub fn follower_actions(&self) -> usize {
        self.cols
    }

    /// Column `a_f` as a vector over leader actions.
    pub fn column(&self, a_f: usize) -> Vec<f64> {
        (0..self.rows).map(|l| self.get(l, a_f)).collect()
    }

    /// `sum_l x[l] * M[l][a_f]`.
    #[inline]
    pub fn expected(&self, x: &[f64], a_f: usize) -> f64 {
        x.iter()
            .enumerate()
            .map(|(l, p)| p * self.data[l * self.cols + a_f])
            .sum()
    }

    pub fn expected_all(&self, x: &[f64]) -> Vec<f64> {
        (0..self.cols).map(|a| self.expected(x, a)).collect()
    }
}

impl UtilityModel {
    pub fn eval(&self, z: &Context, a_l: usize, a_f: FollowerAction) -> Result<f64> {
        match self {
            UtilityModel::Tabular { tables } => {
                let table = tabular_lookup(tables, z)?;
                table
                    .get(a_l)
                    .and_then(|row| row.get(a_f.0))
                    .copied()
                    .ok_or_else(|| Error::InstanceFormat(format!("action index ({a_l}, {}) out of range", a_f.0)))
            }
            UtilityModel::LinearClipped { theta, .. } => {
                let th = theta
                    .get(a_l)
                    .and_then(|row| row.get(a_f.0))
                    .ok_or_else(|| Error::InstanceFormat(format!("action index ({a_l}, {}) out of range", a_f.0)))?;
                linear_clipped(th, z)
            }
        }
    }

    /// Evaluates the full `[A][A_f]` matrix under context `z`.
    pub fn matrix(&self, z: &Context) -> Result<PayoffMatrix> {
        match self {
            UtilityModel::Tabular { tables } => Ok(PayoffMatrix::from_rows(tabular_lookup(tables, z)?)),
            UtilityModel::LinearClipped { theta, .. } => {
                let rows = theta
                    .iter()
                    .map(|row| row.iter().map(|th| linear_clipped(th, z)).collect::<Result<Vec<_>>>())
                    .collect::<Result<Vec<_>>>()?;
                Ok(PayoffMatrix::from_rows(&rows))
            }
        }
    }

    fn shape(&self) -> Option<(usize, usize)> {
        match self {
            UtilityModel::Tabular { tables } => tables
                .values()
                .next()
                .map(|t| (t.len(), t.first().map_or(0, |r| r.len()))),
            UtilityModel::LinearClipped { theta, .. } => Some((theta.len(), theta.first().map_or(0, |r| r.len()))),
        }
    }
}

fn tabular_lookup<'a>(tables: &'a BTreeMap<String, Vec<Vec<f64>>>, z: &Context) -> Result<&'a Vec<Vec<f64>>> {
    let label = z
        .label
        .as_deref()
        .ok_or_else(|| Error::InstanceFormat("tabular utility needs a labeled context".into()))?;
    tables
        .get(label)
        .ok_or_else(|| Error::InstanceFormat(format!("unknown context label `{label}`")))
}

fn linear_clipped(theta: &[f64], z: &Context) -> Result<f64> {
    if theta.len() != z.dim() {
        return Err(Error::InstanceFormat(format!(
            "context dimension {} does not match theta dimension {}",
            z.dim(),
            theta.len()
        )));
    }
    let dot: f64 = theta.iter().zip(&z.vector).map(|(a, b)| a * b).sum();
    Ok(dot.clamp(0.0, 1.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FollowerType {
    pub name: String,
    pub utility: UtilityModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ContextSpace {
    Finite { contexts: Vec<Context> },
    Box { dim: usize, lo: Vec<f64>, hi: Vec<f64> },
}

impl ContextSpace {
    pub fn dim(&self) -> usize {
        match self {
            ContextSpace::Finite { contexts } => contexts.first().map_or(0, |c| c.dim()),
            ContextSpace::Box { dim, .. } => *dim,
        }
    }

    /// Some context in the space; used where any context will do.
    pub fn reference_context(&self) -> Context {
        match self {
            ContextSpace::Finite { contexts } => contexts[0].clone(),
            ContextSpace::Box { lo, hi, .. } => Context {
                vector: lo.iter().zip(hi).map(|(a, b)| 0.5 * (a + b)).collect(),
                label: None,
            },
        }
    }
}

/// A Stackelberg game with side information.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    #[serde(default)]
    pub name: String,
    pub leader_actions: usize,
    pub follower_actions: usize,
    pub types: Vec<FollowerType>,
    pub leader_utility: UtilityModel,
    pub context_space: ContextSpace,
    /// Type distribution used by stochastic-follower scenarios (uniform if absent).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub follower_probs: Option<Vec<f64>>,
    /// Context distribution over a finite space for stochastic-context scenarios.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_probs: Option<Vec<f64>>,
}

/// All payoff matrices of an instance evaluated under one context.
#[derive(Debug, Clone)]
pub struct ContextPayoffs {
    pub leader: PayoffMatrix,
    pub followers: Vec<PayoffMatrix>,
}

impl ContextPayoffs {
    pub fn best_response(&self, type_idx: usize, x: &[f64]) -> FollowerAction {
        FollowerAction(best_response_index(&self.followers[type_idx].expected_all(x)))
    }

    /// Best-response function `sigma` of `x`: one action per follower type.
    pub fn response_profile(&self, x: &[f64]) -> Vec<FollowerAction> {
        (0..self.followers.len()).map(|i| self.best_response(i, x)).collect()
    }

    pub fn leader_expected(&self, x: &[f64], a_f: FollowerAction) -> f64 {
        self.leader.expected(x, a_f.0)
    }
}

/// Index of the best response given follower expected utilities: the highest
/// index among actions within [`TIE_TOL`] of the maximum.
pub fn best_response_index(utils: &[f64]) -> usize {
    let m = utils.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    utils
        .iter()
        .rposition(|u| *u >= m - TIE_TOL)
        .expect("at least one follower action")
}

impl GameInstance {
    pub fn num_types(&self) -> usize {
        self.types.len()
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut inst: GameInstance = serde_json::from_str(s)?;
        inst.normalize_and_validate()?;
        Ok(inst)
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self> {
        let s = std::fs::read_to_string(path.as_ref())?;
        let mut inst = Self::from_json(&s)?;
        if inst.name.is_empty() {
            inst.name = path
                .as_ref()
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
        }
        Ok(inst)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Fills default context vectors and checks every structural invariant.
    pub fn normalize_and_validate(&mut self) -> Result<()> {
        if let ContextSpace::Finite { contexts } = &mut self.context_space {
            for (i, c) in contexts.iter_mut().enumerate() {
                if c.vector.is_empty() {
                    c.vector = vec![i as f64];
                }
            }
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<()> {
        let fmt_err = |m: String| Err(Error::InstanceFormat(m));
        if self.leader_actions == 0 || self.follower_actions == 0 {
            return fmt_err("leader_actions and follower_actions must be >= 1".into());
        }
        if self.types.is_empty() {
            return fmt_err("at least one follower type is required".into());
        }
        let d = match &self.context_space {
            ContextSpace::Finite { contexts } => {
                if contexts.is_empty() {
                    return fmt_err("finite context space is empty".into());
                }
                let d = contexts[0].dim();
                let mut seen = std::collections::HashSet::new();
                for c in contexts {
                    c.validate()?;
                    if c.dim() != d {
                        return fmt_err("context vectors have inconsistent dimensions".into());
                    }
                    if !seen.insert(c.key()) {
                        return fmt_err(format!("duplicate context `{}`", c.key()));
                    }
                }
                if let Some(p) = &self.context_probs {
                    check_distribution(p, contexts.len(), "context_probs")?;
                }
                d
            }
            ContextSpace::Box { dim, lo, hi } => {
                if *dim == 0 || lo.len() != *dim || hi.len() != *dim {
                    return fmt_err("box context space needs dim >= 1 and matching lo/hi".into());
                }
                if lo
                    .iter()
                    .zip(hi)
                    .any(|(a, b)| !a.is_finite() || !b.is_finite() || a > b)
                {
                    return fmt_err("box bounds must be finite with lo <= hi".into());
                }
                if self.context_probs.is_some() {
                    return fmt_err("context_probs only applies to finite context spaces".into());
                }
                *dim
            }
        };
        if let Some(p) = &self.follower_probs {
            check_distribution(p, self.types.len(), "follower_probs")?;
        }
        let models = std::iter::once(("leader", &self.leader_utility))
            .chain(self.types.iter().map(|t| (t.name.as_str(), &t.utility)));
        for (who, model) in models {
            self.validate_model(who, model, d)?;
        }
        Ok(())
    }

    fn validate_model(&self, who: &str, model: &UtilityModel, d: usize) -> Result<()> {
        let (a, af) = (self.leader_actions, self.follower_actions);
        if model.shape() != Some((a, af)) {
            return Err(Error::InstanceFormat(format!(
                "utility of `{who}` must be shaped [{a}][{af}]"
            )));
        }
        match model {
            UtilityModel::Tabular { tables } => {
                let ContextSpace::Finite { contexts } = &self.context_space else {
                    return Err(Error::InstanceFormat(format!(
                        "tabular utility of `{who}` requires a finite context space"
                    )));
                };
                for c in contexts {
                    let label = c
                        .label
                        .as_deref()
                        .ok_or_else(|| Error::InstanceFormat("tabular utilities require labeled contexts".into()))?;
                    if !tables.contains_key(label) {
                        return Err(Error::InstanceFormat(format!(
                            "utility of `{who}` has no table for context `{label}`"
                        )));
                    }
                }
                for (label, t) in tables {
                    if t.len() != a || t.iter().any(|r| r.len() != af) {
                        return Err(Error::InstanceFormat(format!(
                            "table `{label}` of `{who}` must be shaped [{a}][{af}]"
                        )));
                    }
                    if t.iter().flatten().any(|v| !(0.0..=1.0).contains(v)) {
                        return Err(Error::InstanceFormat(format!(
                            "table `{label}` of `{who}` has entries outside [0, 1]"
                        )));
                    }
                }
            }
            UtilityModel::LinearClipped { theta, .. } => {
                if theta
                    .iter()
                    .flatten()
                    .any(|th| th.len() != d || th.iter().any(|v| !v.is_finite()))
                {
                    return Err(Error::InstanceFormat(format!(
                        "theta of `{who}` must hold finite vectors of dimension {d}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Bandit-mode precondition: follower utilities must not vary with the
    /// context. Tabular tables are compared across labels; linear models must
    /// be declared `context_free` in the instance.
    pub fn check_followers_context_free(&self) -> Result<()> {
        for t in &self.types {
            match &t.utility {
                UtilityModel::Tabular { tables } => {
                    let mut it = tables.values();
                    if let Some(first) = it.next() {
                        if it.any(|tbl| tbl != first) {
                            return Err(Error::ContextDependentFollowers(format!(
                                "tables of type `{}` differ across contexts",
                                t.name
                            )));
                        }
                    }
                }
                UtilityModel::LinearClipped { context_free, .. } => {
                    if !context_free {
                        return Err(Error::ContextDependentFollowers(format!(
                            "linear utility of type `{}` is not marked context_free",
                            t.name
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn payoffs(&self, z: &Context) -> Result<ContextPayoffs> {
        Ok(ContextPayoffs {
            leader: self.leader_utility.matrix(z)?,
            followers: self
                .types
                .iter()
                .map(|t| t.utility.matrix(z))
                .collect::<Result<Vec<_>>>()?,
        })
    }

    pub fn expected_leader_utility(&self, z: &Context, x: &MixedStrategy, a_f: FollowerAction) -> Result<f64> {
        self.check_strategy(x)?;
        let mut acc = 0.0;
        for (a_l, p) in x.probs().iter().enumerate() {
            acc += p * self.leader_utility.eval(z, a_l, a_f)?;
        }
        Ok(acc)
    }

    pub fn follower_best_response(&self, type_idx: usize, z: &Context, x: &MixedStrategy) -> Result<FollowerAction> {
        self.check_strategy(x)?;
        let ty = self
            .types
            .get(type_idx)
            .ok_or_else(|| Error::InstanceFormat(format!("follower type {type_idx} out of range")))?;
        let m = ty.utility.matrix(z)?;
        Ok(FollowerAction(best_response_index(&m.expected_all(x.probs()))))
    }

    /// Samples the leader action, resolves the follower response and records
    /// both the realized and the expected leader utility.
    pub fn play_round<R: Rng + ?Sized>(
        &self,
        t: usize,
        z: &Context,
        x: &MixedStrategy,
        type_idx: usize,
        rng: &mut R,
    ) -> Result<RoundRecord> {
        let action = self.follower_best_response(type_idx, z, x)?;
        let leader_action = x.sample(rng);
        let realized = self.leader_utility.eval(z, leader_action, action)?;
        let expected = self.expected_leader_utility(z, x, action)?;
        Ok(RoundRecord {
            t,
            context: z.clone(),
            strategy: x.clone(),
            follower_type: Some(type_idx),
            follower_action: action,
            leader_action,
            realized_utility: realized,
            expected_utility: expected,
        })
    }

    fn check_strategy(&self, x: &MixedStrategy) -> Result<()> {
        if x.len() != self.leader_actions {
            return Err(Error::InstanceFormat(format!(
                "strategy has {} entries, instance has {} leader actions",
                x.len(),
                self.leader_actions
            )));
        }
        Ok(())
    }
}

fn check_distribution(p: &[f64], n: usize, field: &str) -> Result<()> {
    if p.len() != n {
        return Err(Error::InstanceFormat(format!("{field} must have {n} entries")));
    }
    if p.iter().any(|v| !v.is_finite() || *v < 0.0) || (p.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InstanceFormat(format!("{field} must be a probability vector")));
    }
    Ok(())
}

/// One round of play.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub t: usize,
    pub context: Context,
    pub strategy: MixedStrategy,
    /// Revealed type; `None` under bandit feedback.
    pub follower_type: Option<usize>,
    pub follower_action: FollowerAction,
    pub leader_action: usize,
    pub realized_utility: f64,
    pub expected_utility: f64,
}
