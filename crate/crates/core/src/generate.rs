//! Seeded synthetic scenario trees.
//!
//! Trees are built node by node from a per-depth branching vector. Child
//! probabilities are drawn and normalized per node, prices follow the chosen
//! model and inflow is attached to child nodes, so `R(t)` is known once the
//! branch at stage `t + 1` is revealed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{HydroError, Result};
use crate::tree::{Filtration, ScenarioTree};

/// Largest number of scenarios a spec may produce.
pub const MAX_SCENARIOS: usize = 1 << 14;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PriceModel {
    MartingaleBinomial,
    SubmartingaleDrift,
    SupermartingaleDrift,
    IidLognormalDiscretized,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InflowModel {
    NonnegativeIid,
    Seasonal,
}

fn default_price() -> f64 {
    10.0
}
fn default_drift() -> f64 {
    1.0
}
fn default_volatility() -> f64 {
    0.4
}
fn default_inflow() -> f64 {
    3.0
}
fn default_period() -> usize {
    4
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub stages: usize,
    pub dams: usize,
    /// Children per node at stages `1..T-1`.
    pub branching: Vec<usize>,
    pub price_model: PriceModel,
    pub inflow_model: InflowModel,
    #[serde(default = "default_price")]
    pub initial_price: f64,
    /// Additive drift per stage for the drift models.
    #[serde(default = "default_drift")]
    pub drift: f64,
    /// Half-width of the relative price moves (or the log-volatility).
    #[serde(default = "default_volatility")]
    pub volatility: f64,
    #[serde(default = "default_inflow")]
    pub inflow_mean: f64,
    #[serde(default = "default_period")]
    pub season_period: usize,
    /// One-based stages at which the manager only sees the previous stage's atoms.
    #[serde(default)]
    pub coarsen_stages: Vec<usize>,
}

impl GeneratorSpec {
    pub fn new(
        stages: usize,
        dams: usize,
        branching: Vec<usize>,
        price_model: PriceModel,
        inflow_model: InflowModel,
    ) -> Self {
        Self {
            stages,
            dams,
            branching,
            price_model,
            inflow_model,
            initial_price: default_price(),
            drift: default_drift(),
            volatility: default_volatility(),
            inflow_mean: default_inflow(),
            season_period: default_period(),
            coarsen_stages: Vec::new(),
        }
    }

    pub fn with_coarsening(mut self, stages: Vec<usize>) -> Self {
        self.coarsen_stages = stages;
        self
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn num_scenarios(&self) -> usize {
        self.branching.iter().product()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HydroError::InvalidSpec(msg));
        if self.stages < 2 {
            return bad(format!("need at least 2 stages, got {}", self.stages));
        }
        if self.dams == 0 {
            return bad("need at least one dam".into());
        }
        if self.branching.len() != self.stages - 1 {
            return bad(format!(
                "branching has {} entries, expected {}",
                self.branching.len(),
                self.stages - 1
            ));
        }
        if self.branching.contains(&0) {
            return bad("branching factors must be positive".into());
        }
        let k = self
            .branching
            .iter()
            .try_fold(1usize, |acc, &b| acc.checked_mul(b).filter(|&p| p <= MAX_SCENARIOS));
        if k.is_none() {
            return bad(format!("more than {MAX_SCENARIOS} scenarios"));
        }
        let finite = [self.initial_price, self.drift, self.volatility, self.inflow_mean];
        if finite.iter().any(|x| !x.is_finite()) || self.volatility < 0.0 || self.inflow_mean < 0.0 {
            return bad("price and inflow parameters must be finite, volatility and inflow mean nonnegative".into());
        }
        if self.price_model == PriceModel::MartingaleBinomial && self.volatility >= 0.5 {
            return bad("martingale moves need volatility below 0.5 to keep prices positive".into());
        }
        if self.season_period == 0 {
            return bad("season period must be positive".into());
        }
        if let Some(&s) = self.coarsen_stages.iter().find(|&&s| s < 2 || s >= self.stages) {
            return bad(format!("coarsened stage {s} outside 2..={}", self.stages - 1));
        }
        Ok(())
    }
}

struct Node {
    price: Vec<f64>,
    /// Inflow revealed on arrival at this node; empty at the root.
    inflow: Vec<f64>,
    prob: f64,
    /// Index of the first scenario below this node.
    first: usize,
    width: usize,
}

/// Builds a tree deterministically from `(spec, seed)`.
pub fn generate_tree(spec: &GeneratorSpec, seed: u64) -> Result<ScenarioTree> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = spec.dams;
    let k_total = spec.num_scenarios();
    let mut levels: Vec<Vec<Node>> = vec![vec![Node {
        price: vec![spec.initial_price; n],
        inflow: Vec::new(),
        prob: 1.0,
        first: 0,
        width: k_total,
    }]];
    for (depth, &branches) in spec.branching.iter().enumerate() {
        let mut next = Vec::new();
        for parent in &levels[depth] {
            let raw: Vec<f64> = (0..branches).map(|_| rng.gen_range(0.5..1.5)).collect();
            let total: f64 = raw.iter().sum();
            let q: Vec<f64> = raw.iter().map(|x| x / total).collect();
            let prices = child_prices(spec, &parent.price, &q, &mut rng);
            let width = parent.width / branches;
            for (c, price) in prices.into_iter().enumerate() {
                let inflow = (0..n).map(|_| draw_inflow(spec, depth, &mut rng)).collect();
                next.push(Node {
                    price,
                    inflow,
                    prob: parent.prob * q[c],
                    first: parent.first + c * width,
                    width,
                });
            }
        }
        levels.push(next);
    }

    let leaves = levels.last().expect("at least one level");
    let ids: Vec<String> = (0..k_total).map(|k| format!("w{}", k + 1)).collect();
    let probs: Vec<f64> = leaves.iter().map(|l| l.prob).collect();
    let atoms: Vec<Vec<Vec<usize>>> = levels
        .iter()
        .map(|nodes| nodes.iter().map(|nd| (nd.first..nd.first + nd.width).collect()).collect())
        .collect();
    let expand = |depth: usize, pick: &dyn Fn(&Node) -> Vec<f64>| -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new(); k_total];
        for nd in &levels[depth] {
            for row in &mut out[nd.first..nd.first + nd.width] {
                *row = pick(nd);
            }
        }
        out
    };
    let price: Vec<Vec<Vec<f64>>> = (0..spec.stages).map(|d| expand(d, &|nd| nd.price.clone())).collect();
    let inflow: Vec<Vec<Vec<f64>>> = (1..spec.stages).map(|d| expand(d, &|nd| nd.inflow.clone())).collect();

    let manager_atoms: Vec<Vec<Vec<usize>>> = (0..spec.stages)
        .map(|t| {
            let src = if spec.coarsen_stages.contains(&(t + 1)) { t - 1 } else { t };
            atoms[src].clone()
        })
        .collect();
    let full = Filtration::new(atoms, k_total)?;
    let manager = Filtration::new(manager_atoms, k_total)?;
    let tree = ScenarioTree::new(ids, probs, full, manager, price, inflow)?;
    Ok(tree.with_description(format!(
        "generated with seed {seed}: {:?} prices, {:?} inflow, branching {:?}",
        spec.price_model, spec.inflow_model, spec.branching
    )))
}

fn child_prices(spec: &GeneratorSpec, parent: &[f64], q: &[f64], rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let branches = q.len();
    let mut out = vec![vec![0.0; parent.len()]; branches];
    for (i, &s) in parent.iter().enumerate() {
        match spec.price_model {
            PriceModel::IidLognormalDiscretized => {
                let sigma = spec.volatility;
                for row in out.iter_mut() {
                    let z: f64 = StandardNormal.sample(rng);
                    row[i] = spec.initial_price * (sigma * z - 0.5 * sigma * sigma).exp();
                }
            }
            model => {
                let raw: Vec<f64> = (0..branches)
                    .map(|_| rng.gen_range(-spec.volatility..=spec.volatility))
                    .collect();
                let mean: f64 = raw.iter().zip(q).map(|(u, p)| u * p).sum();
                let shift = match model {
                    PriceModel::SubmartingaleDrift => spec.drift,
                    PriceModel::SupermartingaleDrift => -spec.drift,
                    _ => 0.0,
                };
                for (row, u) in out.iter_mut().zip(&raw) {
                    row[i] = s * (1.0 + u - mean) + shift;
                }
            }
        }
    }
    out
}

/// Inflow `R(t)` for zero-based `t`, revealed at stage `t + 1`.
fn draw_inflow(spec: &GeneratorSpec, t: usize, rng: &mut ChaCha8Rng) -> f64 {
    let mean = spec.inflow_mean;
    match spec.inflow_model {
        InflowModel::NonnegativeIid => rng.gen_range(0.0..=2.0 * mean),
        InflowModel::Seasonal => {
            let phase = 2.0 * std::f64::consts::PI * t as f64 / spec.season_period as f64;
            mean * (1.0 + 0.5 * phase.sin()) * rng.gen_range(0.5..1.5)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tree::{is_subfiltration, PriceRegime};

    fn spec(model: PriceModel) -> GeneratorSpec {
        GeneratorSpec::new(3, 1, vec![2, 2], model, InflowModel::NonnegativeIid)
    }

    #[test]
    fn martingale_binomial_classifies_as_martingale() {
        let tree = generate_tree(&spec(PriceModel::MartingaleBinomial), 7).unwrap();
        assert_eq!(tree.classify_price(), vec![PriceRegime::Martingale]);
        assert_eq!(tree.num_scenarios(), 4);
    }

    #[test]
    fn drift_models_classify_by_sign() {
        let up = generate_tree(&spec(PriceModel::SubmartingaleDrift), 3).unwrap();
        assert_eq!(up.classify_price(), vec![PriceRegime::Submartingale]);
        let down = generate_tree(&spec(PriceModel::SupermartingaleDrift), 3).unwrap();
        assert_eq!(down.classify_price(), vec![PriceRegime::Supermartingale]);
    }

    #[test]
    fn same_seed_same_tree() {
        let s = spec(PriceModel::IidLognormalDiscretized);
        assert_eq!(generate_tree(&s, 11).unwrap(), generate_tree(&s, 11).unwrap());
        assert_ne!(generate_tree(&s, 11).unwrap(), generate_tree(&s, 12).unwrap());
    }

    #[test]
    fn coarsening_delays_information() {
        let s = GeneratorSpec::new(4, 2, vec![2, 3, 2], PriceModel::MartingaleBinomial, InflowModel::Seasonal)
            .with_coarsening(vec![2, 3]);
        let tree = generate_tree(&s, 5).unwrap();
        assert_eq!(tree.manager().num_atoms(1), 1);
        assert_eq!(tree.manager().num_atoms(2), 2);
        assert_eq!(tree.manager().num_atoms(3), 12);
        assert!(is_subfiltration(tree.manager(), tree.full()).unwrap());
        assert_eq!(tree.classify_price(), vec![PriceRegime::Martingale; 2]);
    }

    #[test]
    fn inconsistent_specs_are_rejected() {
        let mut s = spec(PriceModel::MartingaleBinomial);
        s.branching = vec![2];
        assert!(matches!(generate_tree(&s, 0), Err(HydroError::InvalidSpec(_))));
        let s = spec(PriceModel::MartingaleBinomial).with_coarsening(vec![3]);
        assert!(matches!(generate_tree(&s, 0), Err(HydroError::InvalidSpec(_))));
    }

    #[test]
    fn spec_json_uses_kebab_case_tags() {
        let text = r#"{"stages":3,"dams":1,"branching":[2,2],"price_model":"submartingale-drift","inflow_model":"seasonal"}"#;
        let s = GeneratorSpec::from_json(text).unwrap();
        assert_eq!(s.price_model, PriceModel::SubmartingaleDrift);
        assert_eq!(s.drift, 1.0);
    }
}
