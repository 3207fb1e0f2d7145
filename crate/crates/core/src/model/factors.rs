//! Conditional probability tables of the dynamic decision network and the
//! JSON model document that carries them together with the reward weights.
//!
//! Each [`FactorTable`] gives the distribution of one child variable at
//! `t+1` conditioned on parent variables at `t` (state features and the
//! action). The complete model needs one factor for each of the five state
//! features plus the two absorbing triggers `C` (completion) and `FL`
//! (failure).

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::reward::RewardWeights;
use super::state::{
    Action, BatteryHealth, FactoredState, FlightStatus, MotorHealth, MotorMargin, ReachMargin,
};
use crate::error::{CmaError, Result};

/// Tolerance on the sum of every conditional distribution.
pub const STOCHASTIC_TOL: f64 = 1e-12;

/// Variables that can appear in a factor table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variable {
    FS,
    MH,
    MM,
    BH,
    RM,
    /// Completion trigger.
    C,
    /// Failure trigger.
    FL,
    /// The action taken at `t`.
    A,
}

const TRIGGER_VALUES: &[&str] = &["False", "True"];

impl Variable {
    pub const CHILDREN: [Variable; 7] = [
        Variable::FS,
        Variable::MH,
        Variable::MM,
        Variable::BH,
        Variable::RM,
        Variable::C,
        Variable::FL,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variable::FS => "FS",
            Variable::MH => "MH",
            Variable::MM => "MM",
            Variable::BH => "BH",
            Variable::RM => "RM",
            Variable::C => "C",
            Variable::FL => "FL",
            Variable::A => "A",
        }
    }

    pub fn values(self) -> &'static [&'static str] {
        match self {
            Variable::FS => FlightStatus::LABELS,
            Variable::MH => MotorHealth::LABELS,
            Variable::MM => MotorMargin::LABELS,
            Variable::BH => BatteryHealth::LABELS,
            Variable::RM => ReachMargin::LABELS,
            Variable::C | Variable::FL => TRIGGER_VALUES,
            Variable::A => Action::LABELS,
        }
    }

    pub fn cardinality(self) -> usize {
        self.values().len()
    }

    fn value_index(self, label: &str) -> Option<usize> {
        self.values().iter().position(|v| *v == label)
    }

    pub fn can_be_parent(self) -> bool {
        !matches!(self, Variable::C | Variable::FL)
    }

    /// Value of this variable at `(s, a)`. Triggers are never parents.
    fn observe(self, s: &FactoredState, a: Action) -> usize {
        match self {
            Variable::FS => s.fs.index(),
            Variable::MH => s.mh.index(),
            Variable::MM => s.mm.index(),
            Variable::BH => s.bh.index(),
            Variable::RM => s.rm.index(),
            Variable::A => a.index(),
            Variable::C | Variable::FL => unreachable!("trigger used as a parent"),
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A conditional probability table `P(child | parents)`.
///
/// Rows are stored in mixed-radix order over the parent list, first parent
/// most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorTable {
    child: Variable,
    parents: Vec<Variable>,
    rows: Vec<Vec<f64>>,
}

impl FactorTable {
    /// Builds a table by evaluating `f` at every parent assignment.
    pub fn from_fn(
        child: Variable,
        parents: &[Variable],
        mut f: impl FnMut(&[usize]) -> Vec<f64>,
    ) -> Result<Self> {
        let n_rows: usize = parents.iter().map(|p| p.cardinality()).product();
        let mut rows = Vec::with_capacity(n_rows);
        let mut assignment = vec![0usize; parents.len()];
        for row in 0..n_rows {
            decode_assignment(row, parents, &mut assignment);
            rows.push(f(&assignment));
        }
        let table = Self { child, parents: parents.to_vec(), rows };
        table.validate()?;
        Ok(table)
    }

    pub fn child(&self) -> Variable {
        self.child
    }

    pub fn parents(&self) -> &[Variable] {
        &self.parents
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    /// Mutable row access for overrides; callers re-validate afterwards.
    pub fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.rows
    }

    pub fn row_mut(&mut self, assignment: &[usize]) -> &mut Vec<f64> {
        let i = encode_assignment(assignment, &self.parents);
        &mut self.rows[i]
    }

    pub fn validate(&self) -> Result<()> {
        let err = |message: String| CmaError::Construction {
            location: format!("factor {}", self.child),
            message,
        };
        if !Variable::CHILDREN.contains(&self.child) {
            return Err(err(format!("{} cannot be a child variable", self.child)));
        }
        for (i, p) in self.parents.iter().enumerate() {
            if !p.can_be_parent() {
                return Err(err(format!("{p} cannot be a parent")));
            }
            if self.parents[..i].contains(p) {
                return Err(err(format!("duplicate parent {p}")));
            }
        }
        let expected: usize = self.parents.iter().map(|p| p.cardinality()).product();
        if self.rows.len() != expected {
            return Err(err(format!("expected {expected} parent assignments, found {}", self.rows.len())));
        }
        let mut assignment = vec![0usize; self.parents.len()];
        for (r, row) in self.rows.iter().enumerate() {
            decode_assignment(r, &self.parents, &mut assignment);
            let where_ = || self.describe_assignment(&assignment);
            if row.len() != self.child.cardinality() {
                return Err(err(format!(
                    "distribution at {} has {} entries, expected {}",
                    where_(),
                    row.len(),
                    self.child.cardinality()
                )));
            }
            if row.iter().any(|p| !(0.0..=1.0).contains(p) || !p.is_finite()) {
                return Err(err(format!("distribution at {} has entries outside [0,1]", where_())));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_TOL {
                return Err(err(format!("distribution at {} sums to {sum}", where_())));
            }
        }
        Ok(())
    }

    fn describe_assignment(&self, assignment: &[usize]) -> String {
        let parts: Vec<String> = self
            .parents
            .iter()
            .zip(assignment)
            .map(|(p, &v)| format!("{}={}", p, p.values()[v]))
            .collect();
        format!("{{{}}}", parts.join(", "))
    }

    /// Distribution over child values given the time-`t` state and action.
    pub fn distribution(&self, s: &FactoredState, a: Action) -> &[f64] {
        let mut idx = 0;
        for p in &self.parents {
            idx = idx * p.cardinality() + p.observe(s, a);
        }
        &self.rows[idx]
    }

    /// Probability that a trigger factor fires.
    pub fn fires(&self, s: &FactoredState, a: Action) -> f64 {
        self.distribution(s, a)[1]
    }

    fn to_document(&self) -> FactorDocument {
        let mut assignment = vec![0usize; self.parents.len()];
        let cpt = self
            .rows
            .iter()
            .enumerate()
            .map(|(r, row)| {
                decode_assignment(r, &self.parents, &mut assignment);
                let given = self
                    .parents
                    .iter()
                    .zip(&assignment)
                    .map(|(p, &v)| (p.name().to_string(), p.values()[v].to_string()))
                    .collect();
                let dist = self
                    .child
                    .values()
                    .iter()
                    .zip(row)
                    .map(|(v, &p)| (v.to_string(), p))
                    .collect();
                CptEntry { given, dist }
            })
            .collect();
        FactorDocument { child: self.child, parents: self.parents.clone(), cpt }
    }

    fn from_document(doc: &FactorDocument, path: &str) -> Result<Self> {
        let err = |loc: String, message: String| CmaError::Construction { location: loc, message };
        let child = doc.child;
        let name = format!("{path} (factor {child})");
        let parents = doc.parents.clone();
        for p in &parents {
            if !p.can_be_parent() {
                return Err(err(format!("{name}.parents"), format!("{p} cannot be a parent")));
            }
        }
        let n_rows: usize = parents.iter().map(|p| p.cardinality()).product();
        let mut rows: Vec<Option<Vec<f64>>> = vec![None; n_rows];
        for (e, entry) in doc.cpt.iter().enumerate() {
            let loc = format!("{name}.cpt[{e}]");
            if entry.given.len() != parents.len() {
                return Err(err(
                    format!("{loc}.given"),
                    format!("expected keys {:?}", parents.iter().map(|p| p.name()).collect::<Vec<_>>()),
                ));
            }
            let mut assignment = Vec::with_capacity(parents.len());
            for p in &parents {
                let label = entry.given.get(p.name()).ok_or_else(|| {
                    err(format!("{loc}.given"), format!("missing parent {p}"))
                })?;
                let v = p.value_index(label).ok_or_else(|| {
                    err(format!("{loc}.given.{p}"), format!("unknown value '{label}'"))
                })?;
                assignment.push(v);
            }
            let mut dist = Vec::with_capacity(child.cardinality());
            for v in child.values() {
                let p = entry.dist.get(*v).ok_or_else(|| {
                    err(format!("{loc}.dist"), format!("missing probability for {child}={v}"))
                })?;
                dist.push(*p);
            }
            if entry.dist.len() != child.cardinality() {
                return Err(err(format!("{loc}.dist"), format!("unexpected values for {child}")));
            }
            let r = encode_assignment(&assignment, &parents);
            if rows[r].is_some() {
                return Err(err(loc, "duplicate parent assignment".to_string()));
            }
            rows[r] = Some(dist);
        }
        let mut full = Vec::with_capacity(n_rows);
        let mut assignment = vec![0usize; parents.len()];
        for (r, row) in rows.into_iter().enumerate() {
            match row {
                Some(d) => full.push(d),
                None => {
                    decode_assignment(r, &parents, &mut assignment);
                    let t = FactorTable { child, parents: parents.clone(), rows: vec![] };
                    return Err(err(
                        format!("{name}.cpt"),
                        format!("missing parent assignment {}", t.describe_assignment(&assignment)),
                    ));
                }
            }
        }
        let table = FactorTable { child, parents, rows: full };
        table.validate().map_err(|e| match e {
            CmaError::Construction { message, .. } => CmaError::Construction { location: name, message },
            other => other,
        })?;
        Ok(table)
    }
}

fn decode_assignment(mut row: usize, parents: &[Variable], out: &mut [usize]) {
    for (i, p) in parents.iter().enumerate().rev() {
        out[i] = row % p.cardinality();
        row /= p.cardinality();
    }
}

fn encode_assignment(assignment: &[usize], parents: &[Variable]) -> usize {
    assignment
        .iter()
        .zip(parents)
        .fold(0, |acc, (&v, p)| acc * p.cardinality() + v)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CptEntry {
    given: BTreeMap<String, String>,
    dist: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct FactorDocument {
    child: Variable,
    parents: Vec<Variable>,
    cpt: Vec<CptEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelDocument {
    version: u32,
    factors: Vec<FactorDocument>,
    weights: RewardWeights,
}

/// Current version of the model document format.
pub const MODEL_FORMAT_VERSION: u32 = 1;

/// The full set of factors plus reward weights.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    factors: BTreeMap<Variable, FactorTable>,
    pub weights: RewardWeights,
}

impl ModelSpec {
    pub fn new(factors: Vec<FactorTable>, weights: RewardWeights) -> Result<Self> {
        let mut map = BTreeMap::new();
        for f in factors {
            f.validate()?;
            let child = f.child;
            if map.insert(child, f).is_some() {
                return Err(CmaError::Construction {
                    location: format!("factor {child}"),
                    message: "defined more than once".into(),
                });
            }
        }
        for v in Variable::CHILDREN {
            if !map.contains_key(&v) {
                return Err(CmaError::Construction {
                    location: format!("factor {v}"),
                    message: "missing".into(),
                });
            }
        }
        weights.validate()?;
        Ok(Self { factors: map, weights })
    }

    pub fn factor(&self, child: Variable) -> &FactorTable {
        &self.factors[&child]
    }

    pub fn factor_mut(&mut self, child: Variable) -> &mut FactorTable {
        self.factors.get_mut(&child).expect("all children present")
    }

    pub fn factors(&self) -> impl Iterator<Item = &FactorTable> {
        self.factors.values()
    }

    pub fn validate(&self) -> Result<()> {
        for f in self.factors.values() {
            f.validate()?;
        }
        self.weights.validate()
    }

    pub fn to_json(&self) -> Result<String> {
        let doc = ModelDocument {
            version: MODEL_FORMAT_VERSION,
            factors: Variable::CHILDREN.iter().map(|v| self.factors[v].to_document()).collect(),
            weights: self.weights.clone(),
        };
        Ok(serde_json::to_string_pretty(&doc)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ModelDocument = serde_json::from_str(text).map_err(|e| CmaError::Construction {
            location: format!("line {} column {}", e.line(), e.column()),
            message: e.to_string(),
        })?;
        if doc.version != MODEL_FORMAT_VERSION {
            return Err(CmaError::Construction {
                location: "version".into(),
                message: format!("unsupported version {}", doc.version),
            });
        }
        let factors = doc
            .factors
            .iter()
            .enumerate()
            .map(|(i, f)| FactorTable::from_document(f, &format!("factors[{i}]")))
            .collect::<Result<Vec<_>>>()?;
        ModelSpec::new(factors, doc.weights)
    }

    /// Overrides the per-step probability of a spalling fault developing
    /// from the no-fault condition.
    pub fn with_spalling_onset(mut self, p: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&p) {
            return Err(CmaError::Domain(format!("spalling onset probability {p} outside [0,1]")));
        }
        let mh = self.factor_mut(Variable::MH);
        let parents = mh.parents().to_vec();
        let mut assignment = vec![0usize; parents.len()];
        for r in 0..mh.rows().len() {
            decode_assignment(r, &parents, &mut assignment);
            let from_nf = parents
                .iter()
                .zip(&assignment)
                .any(|(v, &x)| *v == Variable::MH && x == MotorHealth::NoFault.index());
            if from_nf {
                let row = &mut mh.rows[r];
                let jf = row[MotorHealth::Jam.index()];
                row[MotorHealth::Spalling.index()] = p;
                row[MotorHealth::NoFault.index()] = 1.0 - p - jf;
            }
        }
        mh.validate()?;
        Ok(self)
    }
}

/// Default factor tables.
///
/// Motor health and motor margin follow the published 1 Hz tables; battery
/// health is constant. Flight status, reachability margin, completion and
/// failure use the defaults below, which are regression-pinned by the test
/// suite.
pub mod defaults {
    use super::*;

    /// `P(MH_{t+1} | MH_t)`, rows NF, SF, JF.
    pub const MOTOR_HEALTH: [[f64; 3]; 3] = [
        [0.9999525, 0.0000475, 0.0],
        [0.0, 0.997191, 0.002809],
        [0.0, 0.0, 1.0],
    ];

    /// `P(MM_{t+1} | MM_t, MH_t)` as `[mm][mh] = [P(MM0), P(MM1)]`.
    pub const MOTOR_MARGIN: [[[f64; 2]; 3]; 2] = [
        [[0.0, 1.0], [0.995, 0.005], [1.0, 0.0]],
        [[0.0, 1.0], [0.002809, 0.997191], [1.0, 0.0]],
    ];

    /// Per-step `P(RM1 -> RM0)` under NoOp, indexed by battery health.
    pub const RM_DEGRADATION: [f64; 3] = [0.001, 0.005, 0.02];
    /// `P(RM0 -> RM1)` on a step where LandASAP is commanded.
    pub const RM_RECOVERY_ASAP: f64 = 0.9;
    /// `P(RM0 -> RM1)` on a step where LandPract is commanded, indexed by
    /// battery health. The pre-planned route is longer, so a poor battery
    /// rarely regains a nonnegative margin on it.
    pub const RM_RECOVERY_PRACT: [f64; 3] = [0.9, 0.9, 0.05];
    /// Per-step completion probability with RM1, indexed by flight status.
    pub const COMPLETION: [f64; 3] = [0.01, 0.10, 0.05];
    /// Failure hazard from insufficient energy (RM0).
    pub const FAILURE_RM0: f64 = 0.05;
    /// Failure hazard from instability after a jam fault with MM0.
    pub const FAILURE_JAM: f64 = 0.05;

    fn bern(p: f64) -> Vec<f64> {
        vec![1.0 - p, p]
    }

    pub fn flight_status() -> FactorTable {
        FactorTable::from_fn(Variable::FS, &[Variable::FS, Variable::A], |v| {
            let fs = FlightStatus::ALL[v[0]];
            let next = match Action::ALL[v[1]] {
                Action::NoOp | Action::Terminate => fs,
                Action::LandAsap => FlightStatus::EmergencyAsap,
                Action::LandPract => FlightStatus::EmergencyPract,
            };
            let mut d = vec![0.0; 3];
            d[next.index()] = 1.0;
            d
        })
        .expect("default FS factor")
    }

    pub fn motor_health() -> FactorTable {
        FactorTable::from_fn(Variable::MH, &[Variable::MH], |v| MOTOR_HEALTH[v[0]].to_vec())
            .expect("default MH factor")
    }

    pub fn motor_margin() -> FactorTable {
        FactorTable::from_fn(Variable::MM, &[Variable::MM, Variable::MH, Variable::A], |v| {
            MOTOR_MARGIN[v[0]][v[1]].to_vec()
        })
        .expect("default MM factor")
    }

    pub fn battery_health() -> FactorTable {
        FactorTable::from_fn(Variable::BH, &[Variable::BH], |v| {
            let mut d = vec![0.0; 3];
            d[v[0]] = 1.0;
            d
        })
        .expect("default BH factor")
    }

    pub fn reach_margin() -> FactorTable {
        FactorTable::from_fn(Variable::RM, &[Variable::RM, Variable::BH, Variable::A], |v| {
            let recovery = match Action::ALL[v[2]] {
                Action::LandAsap => Some(RM_RECOVERY_ASAP),
                Action::LandPract => Some(RM_RECOVERY_PRACT[v[1]]),
                Action::NoOp | Action::Terminate => None,
            };
            // [P(RM0), P(RM1)]
            match (ReachMargin::ALL[v[0]], recovery) {
                (ReachMargin::Negative, Some(p)) => vec![1.0 - p, p],
                (ReachMargin::Negative, None) => vec![1.0, 0.0],
                (ReachMargin::NonNegative, Some(_)) => vec![0.0, 1.0],
                (ReachMargin::NonNegative, None) => {
                    let p = RM_DEGRADATION[v[1]];
                    vec![p, 1.0 - p]
                }
            }
        })
        .expect("default RM factor")
    }

    pub fn completion() -> FactorTable {
        FactorTable::from_fn(Variable::C, &[Variable::FS, Variable::RM], |v| {
            match ReachMargin::ALL[v[1]] {
                ReachMargin::Negative => bern(0.0),
                ReachMargin::NonNegative => bern(COMPLETION[v[0]]),
            }
        })
        .expect("default C factor")
    }

    pub fn failure() -> FactorTable {
        FactorTable::from_fn(Variable::FL, &[Variable::MH, Variable::MM, Variable::RM], |v| {
            let mut p = 0.0;
            if ReachMargin::ALL[v[2]] == ReachMargin::Negative {
                p += FAILURE_RM0;
            }
            if MotorHealth::ALL[v[0]] == MotorHealth::Jam
                && MotorMargin::ALL[v[1]] == MotorMargin::Negative
            {
                p += FAILURE_JAM;
            }
            bern(p)
        })
        .expect("default FL factor")
    }

    pub fn model() -> ModelSpec {
        ModelSpec::new(
            vec![
                flight_status(),
                motor_health(),
                motor_margin(),
                battery_health(),
                reach_margin(),
                completion(),
                failure(),
            ],
            RewardWeights::default(),
        )
        .expect("default model is well formed")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_json() {
        let m = defaults::model();
        let text = m.to_json().unwrap();
        let back = ModelSpec::from_json(&text).unwrap();
        assert_eq!(m, back);
        assert_eq!(back.to_json().unwrap(), text);
    }

    #[test]
    fn missing_assignment_is_named() {
        let text = defaults::model().to_json().unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        let factors = doc["factors"].as_array_mut().unwrap();
        let mh = factors.iter_mut().find(|f| f["child"] == "MH").unwrap();
        let cpt = mh["cpt"].as_array_mut().unwrap();
        cpt.retain(|e| e["given"]["MH"] != "JF");
        let err = ModelSpec::from_json(&doc.to_string()).unwrap_err().to_string();
        assert!(err.contains("factor MH"), "{err}");
        assert!(err.contains("MH=JF"), "{err}");
    }

    #[test]
    fn non_stochastic_row_is_rejected() {
        let text = defaults::model().to_json().unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["factors"][2]["cpt"][0]["dist"]["MM1"] = serde_json::json!(0.5);
        let err = ModelSpec::from_json(&doc.to_string()).unwrap_err().to_string();
        assert!(err.contains("factors[2]"), "{err}");
        assert!(err.contains("sums to"), "{err}");
    }

    #[test]
    fn unknown_value_reports_path() {
        let text = defaults::model().to_json().unwrap();
        let mut doc: serde_json::Value = serde_json::from_str(&text).unwrap();
        doc["factors"][0]["cpt"][0]["given"]["FS"] = serde_json::json!("Cruise");
        let err = ModelSpec::from_json(&doc.to_string()).unwrap_err().to_string();
        assert!(err.contains("factors[0]"), "{err}");
        assert!(err.contains("Cruise"), "{err}");
    }

    #[test]
    fn spalling_override_rewrites_nf_row() {
        let m = defaults::model().with_spalling_onset(0.5).unwrap();
        let nf = FactoredState::nominal(BatteryHealth::Good);
        assert_eq!(m.factor(Variable::MH).distribution(&nf, Action::NoOp), &[0.5, 0.5, 0.0]);
        assert!(defaults::model().with_spalling_onset(1.5).is_err());
    }

    #[test]
    fn golden_default_tables() {
        let m = defaults::model();
        let mut s = FactoredState::nominal(BatteryHealth::Poor);
        assert_eq!(m.factor(Variable::RM).distribution(&s, Action::NoOp), &[0.02, 0.98]);
        assert_eq!(m.factor(Variable::C).fires(&s, Action::NoOp), 0.01);
        s.rm = ReachMargin::Negative;
        let d = m.factor(Variable::RM).distribution(&s, Action::LandPract);
        assert!((d[0] - 0.95).abs() < 1e-15 && d[1] == 0.05);
        assert!((m.factor(Variable::RM).distribution(&s, Action::LandAsap)[1] - 0.9).abs() < 1e-15);
        s.bh = BatteryHealth::Medium;
        assert!((m.factor(Variable::RM).distribution(&s, Action::LandPract)[1] - 0.9).abs() < 1e-15);
        s.bh = BatteryHealth::Poor;
        assert_eq!(m.factor(Variable::C).fires(&s, Action::NoOp), 0.0);
        assert_eq!(m.factor(Variable::FL).fires(&s, Action::NoOp), 0.05);
        s.mh = MotorHealth::Jam;
        s.mm = MotorMargin::Negative;
        assert!((m.factor(Variable::FL).fires(&s, Action::NoOp) - 0.1).abs() < 1e-15);
        s.fs = FlightStatus::EmergencyAsap;
        s.rm = ReachMargin::NonNegative;
        assert_eq!(m.factor(Variable::C).fires(&s, Action::NoOp), 0.10);
        assert_eq!(
            m.factor(Variable::FS).distribution(&s, Action::LandPract),
            &[0.0, 0.0, 1.0]
        );
    }
}
