//! Finite scenario trees with two information structures.
//!
//! Stages are numbered `1..=T` in documents and messages but stored
//! zero-based. A [`ScenarioTree`] carries:
//!
//! * scenario probabilities (node probabilities are derived sums),
//! * the full filtration, generated by everything that is observed,
//! * the manager filtration, a coarsening of the full one,
//! * the price `S(t)` for `t = 1..=T`, constant on full atoms of stage `t`,
//! * the inflow `R(t)` for `t = 1..T`, constant on full atoms of stage `t + 1`.
//!
//! Inflow during period `t` is only revealed when stage `t + 1` is reached,
//! so the water level `V(t) = V(1) + Σ_{s<t} (R(s) - D(s))` is known at
//! stage `t`. Both filtrations must separate every scenario at stage `T`.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::TreeError;
use crate::model::DamSystem;

/// Absolute tolerance for probabilities and adaptedness.
pub const TREE_TOL: f64 = 1e-9;

/// An increasing sequence of partitions of the scenario indices.
#[derive(Clone, Debug, PartialEq)]
pub struct Filtration {
    atoms: Vec<Vec<Vec<usize>>>,
    lookup: Vec<Vec<usize>>,
}

impl Filtration {
    /// Builds and validates a filtration. Scenario indices inside each
    /// atom are sorted; atom order is kept.
    pub fn new(atoms: Vec<Vec<Vec<usize>>>, n_scenarios: usize) -> Result<Self, TreeError> {
        Self::named(atoms, n_scenarios, "filtration")
    }

    fn named(mut atoms: Vec<Vec<Vec<usize>>>, n_scenarios: usize, label: &str) -> Result<Self, TreeError> {
        let mut lookup = Vec::with_capacity(atoms.len());
        for (t, stage) in atoms.iter_mut().enumerate() {
            let mut owner = vec![usize::MAX; n_scenarios];
            for (a, atom) in stage.iter_mut().enumerate() {
                atom.sort_unstable();
                if atom.is_empty() {
                    return Err(TreeError::NotPartition {
                        filtration: label.into(),
                        stage: t + 1,
                        detail: format!("atom {a} is empty"),
                    });
                }
                for &k in atom.iter() {
                    if k >= n_scenarios {
                        return Err(TreeError::NotPartition {
                            filtration: label.into(),
                            stage: t + 1,
                            detail: format!("scenario index {k} out of range"),
                        });
                    }
                    if owner[k] != usize::MAX {
                        return Err(TreeError::NotPartition {
                            filtration: label.into(),
                            stage: t + 1,
                            detail: format!("scenario {k} appears in atoms {} and {a}", owner[k]),
                        });
                    }
                    owner[k] = a;
                }
            }
            if let Some(k) = owner.iter().position(|&o| o == usize::MAX) {
                return Err(TreeError::NotPartition {
                    filtration: label.into(),
                    stage: t + 1,
                    detail: format!("scenario {k} is not covered"),
                });
            }
            lookup.push(owner);
        }
        for t in 1..atoms.len() {
            for (a, atom) in atoms[t].iter().enumerate() {
                let parent = lookup[t - 1][atom[0]];
                if atom.iter().any(|&k| lookup[t - 1][k] != parent) {
                    return Err(TreeError::NotRefining {
                        filtration: label.into(),
                        stage: t + 1,
                        atom: a,
                    });
                }
            }
        }
        Ok(Self { atoms, lookup })
    }

    /// Every stage is a single atom except the last, which separates all scenarios.
    pub fn trivial(stages: usize, n_scenarios: usize) -> Self {
        let mut atoms: Vec<Vec<Vec<usize>>> = (0..stages.saturating_sub(1))
            .map(|_| vec![(0..n_scenarios).collect()])
            .collect();
        atoms.push((0..n_scenarios).map(|k| vec![k]).collect());
        Self::new(atoms, n_scenarios).expect("trivial filtration is valid")
    }

    pub fn num_stages(&self) -> usize {
        self.atoms.len()
    }

    pub fn num_scenarios(&self) -> usize {
        self.lookup.first().map_or(0, |l| l.len())
    }

    pub fn atoms(&self, t: usize) -> &[Vec<usize>] {
        &self.atoms[t]
    }

    pub fn num_atoms(&self, t: usize) -> usize {
        self.atoms[t].len()
    }

    /// Atom of stage `t` containing scenario `k`.
    pub fn atom_of(&self, t: usize, k: usize) -> usize {
        self.lookup[t][k]
    }

    pub fn all_atoms(&self) -> &[Vec<Vec<usize>>] {
        &self.atoms
    }
}

/// True iff every atom of `fine` lies inside one atom of `coarse`, at every stage.
pub fn is_subfiltration(coarse: &Filtration, fine: &Filtration) -> Result<bool, TreeError> {
    if coarse.num_stages() != fine.num_stages() || coarse.num_scenarios() != fine.num_scenarios() {
        return Err(TreeError::MismatchedScenarioSets);
    }
    Ok(first_straddling_atom(coarse, fine).is_none())
}

fn first_straddling_atom(coarse: &Filtration, fine: &Filtration) -> Option<(usize, usize)> {
    for t in 0..fine.num_stages() {
        for (a, atom) in fine.atoms(t).iter().enumerate() {
            let owner = coarse.atom_of(t, atom[0]);
            if atom.iter().any(|&k| coarse.atom_of(t, k) != owner) {
                return Some((t, a));
            }
        }
    }
    None
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PriceRegime {
    Martingale,
    Submartingale,
    Supermartingale,
    #[serde(rename = "None")]
    Irregular,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FloodViolation {
    /// One-based stage.
    pub stage: usize,
    pub scenario: String,
    pub dam: usize,
    pub slack: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoFloodReport {
    pub holds: bool,
    pub violations: Vec<FloodViolation>,
}

/// A validated scenario tree; immutable after construction.
#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioTree {
    stages: usize,
    dams: usize,
    ids: Vec<String>,
    probs: Vec<f64>,
    full: Filtration,
    manager: Filtration,
    price: Vec<Vec<Vec<f64>>>,
    inflow: Vec<Vec<Vec<f64>>>,
    description: Option<String>,
}

impl ScenarioTree {
    /// Validates and assembles a tree.
    ///
    /// `price` is indexed `[t][scenario][dam]` for `t < T`, `inflow` the
    /// same for `t < T - 1`.
    pub fn new(
        ids: Vec<String>,
        probs: Vec<f64>,
        full: Filtration,
        manager: Filtration,
        price: Vec<Vec<Vec<f64>>>,
        inflow: Vec<Vec<Vec<f64>>>,
    ) -> Result<Self, TreeError> {
        let stages = price.len();
        let k = ids.len();
        if stages < 2 {
            return Err(TreeError::Dimension(format!("need at least 2 stages, got {stages}")));
        }
        if k == 0 {
            return Err(TreeError::Dimension("no scenarios".into()));
        }
        let dams = price[0].first().map_or(0, |v| v.len());
        if dams == 0 {
            return Err(TreeError::Dimension("no dams".into()));
        }
        for (i, id) in ids.iter().enumerate() {
            if ids[..i].contains(id) {
                return Err(TreeError::DuplicateScenario(id.clone()));
            }
        }
        if probs.len() != k {
            return Err(TreeError::Dimension(format!("{} probabilities for {k} scenarios", probs.len())));
        }
        for (id, &p) in ids.iter().zip(&probs) {
            if !(p.is_finite() && p > 0.0) {
                return Err(TreeError::BadProbability {
                    scenario: id.clone(),
                    prob: p,
                });
            }
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > TREE_TOL {
            return Err(TreeError::BadProbabilities { sum });
        }
        check_shape("price", &price, stages, k, dams)?;
        check_shape("inflow", &inflow, stages - 1, k, dams)?;
        for (label, f) in [("full", &full), ("manager", &manager)] {
            if f.num_stages() != stages || f.num_scenarios() != k {
                return Err(TreeError::Dimension(format!(
                    "{label} filtration has {} stages over {} scenarios, expected {stages} over {k}",
                    f.num_stages(),
                    f.num_scenarios()
                )));
            }
            if f.num_atoms(stages - 1) != k {
                return Err(TreeError::TerminalNotSeparating { filtration: label.into() });
            }
        }
        for t in 0..stages {
            check_adapted("price", &price[t], &full, t, t)?;
        }
        for t in 0..stages - 1 {
            check_adapted("inflow", &inflow[t], &full, t + 1, t)?;
        }
        if let Some((t, a)) = first_straddling_atom(&manager, &full) {
            return Err(TreeError::NotSubfiltration { stage: t + 1, atom: a });
        }
        Ok(Self {
            stages,
            dams,
            ids,
            probs,
            full,
            manager,
            price,
            inflow,
            description: None,
        })
    }

    pub fn with_description(mut self, text: impl Into<String>) -> Self {
        self.description = Some(text.into());
        self
    }

    pub fn from_json(text: &str) -> Result<Self, TreeError> {
        let doc: TreeDoc = serde_json::from_str(text).map_err(|e| TreeError::Malformed(e.to_string()))?;
        doc_to_tree(doc)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tree serializes")
    }

    /// Number of stages `T`.
    pub fn stages(&self) -> usize {
        self.stages
    }

    pub fn dams(&self) -> usize {
        self.dams
    }

    pub fn num_scenarios(&self) -> usize {
        self.ids.len()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn description(&self) -> Option<&str> {
        self.description.as_deref()
    }

    pub fn full(&self) -> &Filtration {
        &self.full
    }

    pub fn manager(&self) -> &Filtration {
        &self.manager
    }

    /// `S_i(t)` in scenario `k`, zero-based stage.
    pub fn price(&self, t: usize, k: usize, i: usize) -> f64 {
        self.price[t][k][i]
    }

    /// `R_i(t)` in scenario `k`, zero-based `t < T - 1`.
    pub fn inflow(&self, t: usize, k: usize, i: usize) -> f64 {
        self.inflow[t][k][i]
    }

    pub fn price_table(&self) -> &[Vec<Vec<f64>>] {
        &self.price
    }

    pub fn inflow_table(&self) -> &[Vec<Vec<f64>>] {
        &self.inflow
    }

    /// `Σ_{s<t} R_i(s)` in scenario `k`.
    pub fn cumulative_inflow(&self, t: usize, k: usize, i: usize) -> f64 {
        (0..t).map(|s| self.inflow[s][k][i]).sum()
    }

    pub fn prob_of(&self, atom: &[usize]) -> f64 {
        atom.iter().map(|&k| self.probs[k]).sum()
    }

    /// `E[values | G_t]` as one value per manager atom of stage `t`.
    pub fn conditional_expectation(&self, values: &[f64], t: usize) -> Result<Vec<f64>, TreeError> {
        self.conditional_expectation_on(&self.manager, values, t)
    }

    /// Conditional expectation on an arbitrary filtration over this tree's scenarios.
    pub fn conditional_expectation_on(
        &self,
        filtration: &Filtration,
        values: &[f64],
        t: usize,
    ) -> Result<Vec<f64>, TreeError> {
        if values.len() != self.num_scenarios() || filtration.num_scenarios() != self.num_scenarios() {
            return Err(TreeError::Dimension(format!(
                "{} values for {} scenarios",
                values.len(),
                self.num_scenarios()
            )));
        }
        if t >= filtration.num_stages() {
            return Err(TreeError::Dimension(format!("stage {} beyond horizon", t + 1)));
        }
        filtration
            .atoms(t)
            .iter()
            .enumerate()
            .map(|(a, atom)| {
                let p = self.prob_of(atom);
                if p <= 0.0 {
                    return Err(TreeError::ZeroProbabilityAtom { stage: t + 1, atom: a });
                }
                Ok(atom.iter().map(|&k| self.probs[k] * values[k]).sum::<f64>() / p)
            })
            .collect()
    }

    /// Per-dam classification of the price process against the manager's information.
    pub fn classify_price(&self) -> Vec<PriceRegime> {
        (0..self.dams)
            .map(|i| {
                let series: Vec<Vec<f64>> = (0..self.stages)
                    .map(|t| (0..self.num_scenarios()).map(|k| self.price[t][k][i]).collect())
                    .collect();
                self.classify_series(&series)
            })
            .collect()
    }

    /// Compares `E[X(t+1) | G_t]` with `E[X(t) | G_t]` for `t = 1..T-1`.
    pub fn classify_series(&self, series: &[Vec<f64>]) -> PriceRegime {
        let mut up = false;
        let mut down = false;
        for t in 0..self.stages - 1 {
            let next = self.conditional_expectation(&series[t + 1], t).expect("shape");
            let now = self.conditional_expectation(&series[t], t).expect("shape");
            for (a, b) in next.iter().zip(&now) {
                let d = a - b;
                if d > TREE_TOL {
                    up = true;
                } else if d < -TREE_TOL {
                    down = true;
                }
            }
        }
        match (up, down) {
            (false, false) => PriceRegime::Martingale,
            (true, false) => PriceRegime::Submartingale,
            (false, true) => PriceRegime::Supermartingale,
            (true, true) => PriceRegime::Irregular,
        }
    }

    /// Checks `m - V(1) - Σ_{s<t} R(s) >= 0` for `t = 1..T-1` in every scenario.
    pub fn check_no_flood(&self, sys: &DamSystem) -> Result<NoFloodReport, TreeError> {
        if sys.n_dams != self.dams {
            return Err(TreeError::Dimension(format!(
                "system has {} dams, tree has {}",
                sys.n_dams, self.dams
            )));
        }
        let mut violations = Vec::new();
        for t in 0..self.stages - 1 {
            for k in 0..self.num_scenarios() {
                for i in 0..self.dams {
                    let slack = sys.m[i] - sys.v1[i] - self.cumulative_inflow(t, k, i);
                    if slack < 0.0 {
                        violations.push(FloodViolation {
                            stage: t + 1,
                            scenario: self.ids[k].clone(),
                            dam: i,
                            slack,
                        });
                    }
                }
            }
        }
        Ok(NoFloodReport {
            holds: violations.is_empty(),
            violations,
        })
    }

    /// True when every inflow value is nonnegative.
    pub fn inflow_nonnegative(&self) -> bool {
        self.inflow.iter().flatten().flatten().all(|&r| r >= 0.0)
    }
}

fn check_shape(label: &str, data: &[Vec<Vec<f64>>], stages: usize, k: usize, n: usize) -> Result<(), TreeError> {
    if data.len() != stages {
        return Err(TreeError::Dimension(format!("{label} has {} stages, expected {stages}", data.len())));
    }
    for (t, stage) in data.iter().enumerate() {
        if stage.len() != k {
            return Err(TreeError::Dimension(format!(
                "{label} at stage {} has {} scenarios, expected {k}",
                t + 1,
                stage.len()
            )));
        }
        for row in stage {
            if row.len() != n {
                return Err(TreeError::Dimension(format!(
                    "{label} at stage {} has a vector of length {}, expected {n}",
                    t + 1,
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(TreeError::Dimension(format!("{label} at stage {} is not finite", t + 1)));
            }
        }
    }
    Ok(())
}

fn check_adapted(
    label: &str,
    values: &[Vec<f64>],
    full: &Filtration,
    atom_stage: usize,
    value_stage: usize,
) -> Result<(), TreeError> {
    for (a, atom) in full.atoms(atom_stage).iter().enumerate() {
        let first = &values[atom[0]];
        for &k in &atom[1..] {
            for (i, (x, y)) in values[k].iter().zip(first).enumerate() {
                if (x - y).abs() > TREE_TOL {
                    return Err(TreeError::NotAdapted {
                        process: label.into(),
                        stage: value_stage + 1,
                        atom: a,
                        dam: i,
                    });
                }
            }
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// JSON document
// ---------------------------------------------------------------------------

/// A number written either as a JSON number or as a decimal string.
#[derive(Clone, Copy, Debug, PartialEq)]
struct Num(f64);

impl<'de> Deserialize<'de> for Num {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            F(f64),
            S(String),
        }
        match Raw::deserialize(d)? {
            Raw::F(v) => Ok(Num(v)),
            Raw::S(s) => s
                .trim()
                .parse::<f64>()
                .map(Num)
                .map_err(|_| serde::de::Error::custom(format!("`{s}` is not a decimal number"))),
        }
    }
}

impl Serialize for Num {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_f64(self.0)
    }
}

#[derive(Serialize, Deserialize)]
struct ScenarioDoc {
    id: String,
    prob: Num,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TreeDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    description: Option<String>,
    stages: usize,
    dams: usize,
    scenarios: Vec<ScenarioDoc>,
    price: Vec<Vec<Vec<Num>>>,
    inflow: Vec<Vec<Vec<Num>>>,
    full_atoms: Vec<Vec<Vec<String>>>,
    manager_atoms: Vec<Vec<Vec<String>>>,
}

fn doc_to_tree(doc: TreeDoc) -> Result<ScenarioTree, TreeError> {
    let ids: Vec<String> = doc.scenarios.iter().map(|s| s.id.clone()).collect();
    let probs: Vec<f64> = doc.scenarios.iter().map(|s| s.prob.0).collect();
    let k = ids.len();
    if doc.stages < 2 {
        return Err(TreeError::Dimension(format!("need at least 2 stages, got {}", doc.stages)));
    }
    let unwrap = |v: Vec<Vec<Vec<Num>>>| -> Vec<Vec<Vec<f64>>> {
        v.into_iter()
            .map(|s| s.into_iter().map(|r| r.into_iter().map(|n| n.0).collect()).collect())
            .collect()
    };
    let price = unwrap(doc.price);
    let inflow = unwrap(doc.inflow);
    if price.len() != doc.stages {
        return Err(TreeError::Dimension(format!(
            "price has {} stages, document declares {}",
            price.len(),
            doc.stages
        )));
    }
    for stage in price.iter().chain(&inflow) {
        if stage.iter().any(|row| row.len() != doc.dams) {
            return Err(TreeError::Dimension(format!("expected {} dams per value vector", doc.dams)));
        }
    }
    let index_of = |id: &str| -> Result<usize, TreeError> {
        ids.iter()
            .position(|x| x == id)
            .ok_or_else(|| TreeError::UnknownScenario(id.to_string()))
    };
    let to_indices = |atoms: Vec<Vec<Vec<String>>>| -> Result<Vec<Vec<Vec<usize>>>, TreeError> {
        atoms
            .into_iter()
            .map(|stage| {
                stage
                    .into_iter()
                    .map(|atom| atom.iter().map(|id| index_of(id)).collect())
                    .collect()
            })
            .collect()
    };
    let full = Filtration::named(to_indices(doc.full_atoms)?, k, "full")?;
    let manager = Filtration::named(to_indices(doc.manager_atoms)?, k, "manager")?;
    let tree = ScenarioTree::new(ids, probs, full, manager, price, inflow)?;
    Ok(match doc.description {
        Some(d) => tree.with_description(d),
        None => tree,
    })
}

fn tree_to_doc(tree: &ScenarioTree) -> TreeDoc {
    let wrap = |v: &[Vec<Vec<f64>>]| -> Vec<Vec<Vec<Num>>> {
        v.iter()
            .map(|s| s.iter().map(|r| r.iter().map(|&x| Num(x)).collect()).collect())
            .collect()
    };
    let names = |f: &Filtration| -> Vec<Vec<Vec<String>>> {
        f.all_atoms()
            .iter()
            .map(|stage| {
                stage
                    .iter()
                    .map(|atom| atom.iter().map(|&k| tree.ids[k].clone()).collect())
                    .collect()
            })
            .collect()
    };
    TreeDoc {
        description: tree.description.clone(),
        stages: tree.stages,
        dams: tree.dams,
        scenarios: tree
            .ids
            .iter()
            .zip(&tree.probs)
            .map(|(id, &p)| ScenarioDoc {
                id: id.clone(),
                prob: Num(p),
            })
            .collect(),
        price: wrap(&tree.price),
        inflow: wrap(&tree.inflow),
        full_atoms: names(&tree.full),
        manager_atoms: names(&tree.manager),
    }
}

impl Serialize for ScenarioTree {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        tree_to_doc(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for ScenarioTree {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let doc = TreeDoc::deserialize(d)?;
        doc_to_tree(doc).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn f(atoms: Vec<Vec<Vec<usize>>>) -> Filtration {
        Filtration::new(atoms, 5).unwrap()
    }

    #[test]
    fn subfiltration_of_the_hidden_process_example() {
        let full = f(vec![vec![vec![0, 1, 2, 3, 4]], vec![vec![0], vec![1], vec![3], vec![2, 4]]]);
        let manager = f(vec![vec![vec![0, 1, 2, 3, 4]], vec![vec![0, 3], vec![1], vec![2, 4]]]);
        assert!(is_subfiltration(&manager, &full).unwrap());
        assert!(is_subfiltration(&full, &full).unwrap());
        assert!(!is_subfiltration(&full, &manager).unwrap());
        let short = Filtration::trivial(3, 5);
        assert_eq!(is_subfiltration(&short, &full), Err(TreeError::MismatchedScenarioSets));
    }

    #[test]
    fn filtration_validation() {
        assert!(matches!(
            Filtration::new(vec![vec![vec![0, 1], vec![1]]], 2),
            Err(TreeError::NotPartition { .. })
        ));
        assert!(matches!(
            Filtration::new(vec![vec![vec![0]]], 2),
            Err(TreeError::NotPartition { .. })
        ));
        assert!(matches!(
            Filtration::new(vec![vec![vec![0], vec![1, 2]], vec![vec![0, 1], vec![2]]], 3),
            Err(TreeError::NotRefining { stage: 2, atom: 0, .. })
        ));
    }

    #[test]
    fn numbers_may_be_strings() {
        let doc = r#"{"stages":2,"dams":1,"scenarios":[{"id":"a","prob":"1.0"}],
            "price":[[["3"]],[[4.5]]],"inflow":[[["0.25"]]],
            "full_atoms":[[["a"]],[["a"]]],"manager_atoms":[[["a"]],[["a"]]]}"#;
        let tree = ScenarioTree::from_json(doc).unwrap();
        assert_eq!(tree.price(0, 0, 0), 3.0);
        assert_eq!(tree.inflow(0, 0, 0), 0.25);
        let again = ScenarioTree::from_json(&tree.to_json()).unwrap();
        assert_eq!(again, tree);
    }

    #[test]
    fn validation_errors_keep_their_type() {
        let doc = r#"{"stages":2,"dams":1,"scenarios":[{"id":"a","prob":0.5},{"id":"b","prob":0.4}],
            "price":[[[1],[1]],[[1],[1]]],"inflow":[[[0],[0]]],
            "full_atoms":[[["a","b"]],[["a"],["b"]]],"manager_atoms":[[["a","b"]],[["a"],["b"]]]}"#;
        assert!(matches!(
            ScenarioTree::from_json(doc),
            Err(TreeError::BadProbabilities { sum }) if (sum - 0.9).abs() < 1e-12
        ));
        assert!(matches!(ScenarioTree::from_json("{"), Err(TreeError::Malformed(_))));
    }
}
