//! Synthetic consideration markets with a known, planted preference rule.
//!
//! The generator plants a pairwise product-similarity rule (a weighted blend
//! of per-attribute agreements), then simulates survey customers: each
//! customer picks a seed product uniformly and fills the rest of their
//! consideration set by sampling partners with probability proportional to
//! `exp(similarity / temperature)`. High-similarity pairs therefore co-occur
//! often and cross the co-consideration cutoff, so the resulting network is a
//! noisy image of the planted rule — and the exact rule is returned alongside
//! the data, which makes recovered structure checkable against ground truth.
//!
//! Two survey years are produced. A configurable fraction of products carries
//! over into the second year with perturbed continuous attributes (capped
//! additive drift; categorical values stay fixed); the remainder of the
//! second-year catalog is brand new. That mirrors a real market refresh and
//! gives a held-out, partially unseen graph to predict.
//!
//! At `temperature == 0` the generator switches to a deterministic limit:
//! set sizes pin to `max_considered`, seed products rotate round-robin, and
//! partners are the highest-similarity products (ties to the lowest index).
//! The survey — and thus the network — becomes a pure function of the
//! planted similarities, which tests exploit.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ingest::{
    AttrKind, AttributeSchema, AttributeValue, ConsiderationRecord, ProductRecord,
};
use crate::{mix_seed, Error, Result};

/// Softmax temperatures below this would overflow `exp`; zero selects the
/// deterministic limit instead.
const MIN_TEMPERATURE: f64 = 1e-3;

/// One attribute of the synthetic catalog: its column type and the weight it
/// carries in the planted similarity rule. Weight zero means the attribute is
/// pure noise — it exists in the data but never influences co-consideration.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthAttribute {
    pub name: String,
    pub kind: AttrKind,
    /// Number of distinct categories; zero for continuous attributes.
    pub cardinality: usize,
    /// For continuous attributes, the number of evenly spaced grid points the
    /// value is drawn from (real catalogs quantize most specs into trim
    /// levels). Zero draws from the full unit interval instead.
    pub levels: usize,
    /// Non-negative weight in the planted similarity blend.
    pub weight: f64,
}

impl SynthAttribute {
    pub fn continuous(name: &str, weight: f64) -> Self {
        SynthAttribute {
            name: name.to_string(),
            kind: AttrKind::Continuous,
            cardinality: 0,
            levels: 0,
            weight,
        }
    }

    /// Continuous attribute quantized to `levels` evenly spaced values in
    /// the unit interval.
    pub fn continuous_grid(name: &str, levels: usize, weight: f64) -> Self {
        SynthAttribute {
            name: name.to_string(),
            kind: AttrKind::Continuous,
            cardinality: 0,
            levels,
            weight,
        }
    }

    pub fn categorical(name: &str, cardinality: usize, weight: f64) -> Self {
        SynthAttribute {
            name: name.to_string(),
            kind: AttrKind::Categorical,
            cardinality,
            levels: 0,
            weight,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    /// Catalog size, per year.
    pub products: usize,
    pub attributes: Vec<SynthAttribute>,
    /// Softmax temperature for partner choice. Lower is more deterministic;
    /// exactly zero switches to the deterministic limit.
    pub temperature: f64,
    /// Survey respondents, per year.
    pub customers: usize,
    /// Largest consideration-set size a customer may report (1 to 3).
    pub max_considered: usize,
    /// Fraction of year-one products that survive into year two.
    pub overlap: f64,
    /// Cap on the additive perturbation applied to each carried-over
    /// continuous attribute value.
    pub drift: f64,
    pub seed: u64,
}

impl SynthConfig {
    /// Benchmark-scale market: 400 products over two years with a strong
    /// planted rule, tuned so the cutoff-1 co-consideration network lands
    /// near 14% density. The catalog is deliberately all-categorical with
    /// one dominant low-cardinality attribute ("segment") and high-cardinality
    /// companions: that shape gives the encoded rows constant norm, so cosine
    /// similarity collapses onto a few exactly tied levels and the KNN
    /// adjacency keeps a density close to the survey network's instead of
    /// collapsing into mutual cliques. "brand" carries zero planted weight —
    /// it is recorded in the catalog but never influences co-consideration.
    pub fn benchmark(seed: u64) -> Self {
        SynthConfig {
            products: 400,
            attributes: vec![
                SynthAttribute::categorical("segment", 5, 2.0),
                SynthAttribute::categorical("model_line", 40, 1.0),
                SynthAttribute::categorical("brand", 40, 0.0),
            ],
            temperature: 0.08,
            customers: 22_000,
            max_considered: 3,
            overlap: 0.74,
            drift: 0.05,
            seed,
        }
    }

    /// Small market for fast tests: same shape as [`SynthConfig::benchmark`]
    /// but forty products and a few hundred respondents.
    pub fn small(seed: u64) -> Self {
        SynthConfig {
            products: 40,
            attributes: vec![
                SynthAttribute::continuous("performance", 3.0),
                SynthAttribute::continuous("styling", 0.0),
                SynthAttribute::categorical("segment", 4, 1.5),
            ],
            temperature: 0.1,
            customers: 800,
            max_considered: 3,
            overlap: 0.75,
            drift: 0.05,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.products < 2 {
            return Err(Error::Validation(
                "a market needs at least two products".into(),
            ));
        }
        if self.customers == 0 {
            return Err(Error::Validation(
                "a market needs at least one customer".into(),
            ));
        }
        if self.attributes.is_empty() {
            return Err(Error::Validation(
                "a market needs at least one attribute".into(),
            ));
        }
        let mut seen = std::collections::HashSet::new();
        for attr in &self.attributes {
            if attr.name.is_empty() {
                return Err(Error::Validation("attribute with an empty name".into()));
            }
            if !seen.insert(attr.name.as_str()) {
                return Err(Error::Validation(format!(
                    "duplicate attribute '{}'",
                    attr.name
                )));
            }
            if !attr.weight.is_finite() || attr.weight < 0.0 {
                return Err(Error::Validation(format!(
                    "attribute '{}' has invalid weight {}",
                    attr.name, attr.weight
                )));
            }
            match attr.kind {
                AttrKind::Categorical if attr.cardinality < 2 => {
                    return Err(Error::Validation(format!(
                        "categorical attribute '{}' needs at least two categories",
                        attr.name
                    )));
                }
                AttrKind::Categorical if attr.levels != 0 => {
                    return Err(Error::Validation(format!(
                        "categorical attribute '{}' must not declare grid levels",
                        attr.name
                    )));
                }
                AttrKind::Continuous if attr.cardinality != 0 => {
                    return Err(Error::Validation(format!(
                        "continuous attribute '{}' must not declare categories",
                        attr.name
                    )));
                }
                AttrKind::Continuous if attr.levels == 1 => {
                    return Err(Error::Validation(format!(
                        "continuous attribute '{}' needs at least two grid levels",
                        attr.name
                    )));
                }
                _ => {}
            }
        }
        if !self.attributes.iter().any(|a| a.weight > 0.0) {
            return Err(Error::Validation(
                "the planted rule needs at least one attribute with positive weight".into(),
            ));
        }
        if self.temperature != 0.0
            && (!self.temperature.is_finite() || self.temperature < MIN_TEMPERATURE)
        {
            return Err(Error::Validation(format!(
                "temperature must be zero or at least {MIN_TEMPERATURE}"
            )));
        }
        if !(1..=3).contains(&self.max_considered) {
            return Err(Error::Validation(
                "consideration sets hold one to three products".into(),
            ));
        }
        if !self.overlap.is_finite() || !(0.0..=1.0).contains(&self.overlap) {
            return Err(Error::Validation("overlap must lie in [0, 1]".into()));
        }
        if !self.drift.is_finite() || self.drift < 0.0 {
            return Err(Error::Validation("drift must be non-negative".into()));
        }
        Ok(())
    }
}

/// A single product's attribute values in generator-internal form.
#[derive(Debug, Clone, PartialEq)]
enum SynthValue {
    Cont(f64),
    Cat(usize),
}

/// The planted rule, materialized: every pairwise similarity for one year's
/// catalog. This is the ground truth a recovered model is judged against.
#[derive(Debug, Clone, PartialEq)]
pub struct TruthTable {
    product_ids: Vec<String>,
    index: HashMap<String, usize>,
    /// Row-major `n × n`, symmetric, unit diagonal.
    sims: Vec<f64>,
}

impl TruthTable {
    fn new(product_ids: Vec<String>, values: &[Vec<SynthValue>], attrs: &[SynthAttribute]) -> Self {
        let n = product_ids.len();
        let mut sims = vec![0.0; n * n];
        for i in 0..n {
            sims[i * n + i] = 1.0;
            for j in i + 1..n {
                let s = pair_similarity(attrs, &values[i], &values[j]);
                sims[i * n + j] = s;
                sims[j * n + i] = s;
            }
        }
        let index = product_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.clone(), i))
            .collect();
        TruthTable {
            product_ids,
            index,
            sims,
        }
    }

    pub fn len(&self) -> usize {
        self.product_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.product_ids.is_empty()
    }

    pub fn product_ids(&self) -> &[String] {
        &self.product_ids
    }

    /// Planted co-consideration propensity by node index.
    pub fn propensity_by_index(&self, i: usize, j: usize) -> f64 {
        let n = self.len();
        assert!(i < n && j < n, "product index out of range");
        self.sims[i * n + j]
    }

    /// Planted propensity by product id; `None` when either id is unknown.
    pub fn propensity(&self, a: &str, b: &str) -> Option<f64> {
        let i = *self.index.get(a)?;
        let j = *self.index.get(b)?;
        Some(self.propensity_by_index(i, j))
    }

    /// CSV dump of all unordered pairs: `product_a,product_b,propensity`.
    pub fn to_csv(&self) -> String {
        let n = self.len();
        let mut out = String::from("product_a,product_b,propensity\n");
        for i in 0..n {
            for j in i + 1..n {
                out.push_str(&format!(
                    "{},{},{}\n",
                    self.product_ids[i],
                    self.product_ids[j],
                    self.sims[i * n + j]
                ));
            }
        }
        out
    }
}

/// Everything generated for one survey year.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketYear {
    pub products: Vec<ProductRecord>,
    pub records: Vec<ConsiderationRecord>,
    pub truth: TruthTable,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticMarket {
    pub schema: AttributeSchema,
    pub year1: MarketYear,
    pub year2: MarketYear,
}

/// Per-attribute agreement, blended by the planted weights and normalized to
/// `[0, 1]`: continuous attributes contribute `1 - |a - b|` (values live in
/// the unit interval), categorical attributes contribute an exact-match
/// indicator.
fn pair_similarity(attrs: &[SynthAttribute], a: &[SynthValue], b: &[SynthValue]) -> f64 {
    let mut num = 0.0;
    let mut den = 0.0;
    for (attr, (va, vb)) in attrs.iter().zip(a.iter().zip(b)) {
        let s = match (va, vb) {
            (SynthValue::Cont(x), SynthValue::Cont(y)) => 1.0 - (x - y).abs(),
            (SynthValue::Cat(x), SynthValue::Cat(y)) => {
                if x == y {
                    1.0
                } else {
                    0.0
                }
            }
            _ => unreachable!("value kind always matches its attribute"),
        };
        num += attr.weight * s;
        den += attr.weight;
    }
    num / den
}

fn draw_product(attrs: &[SynthAttribute], rng: &mut ChaCha8Rng) -> Vec<SynthValue> {
    attrs
        .iter()
        .map(|attr| match attr.kind {
            AttrKind::Continuous if attr.levels >= 2 => {
                SynthValue::Cont(rng.random_range(0..attr.levels) as f64 / (attr.levels - 1) as f64)
            }
            AttrKind::Continuous => SynthValue::Cont(rng.random::<f64>()),
            AttrKind::Categorical => SynthValue::Cat(rng.random_range(0..attr.cardinality)),
        })
        .collect()
}

/// Carry a product into the next year: continuous values move by at most
/// `drift` (and stay inside the unit interval); categorical values persist.
fn drift_product(values: &[SynthValue], drift: f64, rng: &mut ChaCha8Rng) -> Vec<SynthValue> {
    values
        .iter()
        .map(|v| match v {
            SynthValue::Cont(x) => {
                let delta = rng.random::<f64>() * 2.0 * drift - drift;
                SynthValue::Cont((x + delta).clamp(0.0, 1.0))
            }
            SynthValue::Cat(c) => SynthValue::Cat(*c),
        })
        .collect()
}

fn product_records(
    ids: &[String],
    values: &[Vec<SynthValue>],
    attrs: &[SynthAttribute],
) -> Vec<ProductRecord> {
    ids.iter()
        .zip(values)
        .map(|(id, vals)| {
            let pairs = attrs.iter().zip(vals).map(|(attr, v)| {
                let value = match v {
                    SynthValue::Cont(x) => AttributeValue::Continuous(*x),
                    SynthValue::Cat(c) => AttributeValue::Categorical(format!("v{c}")),
                };
                (attr.name.clone(), value)
            });
            ProductRecord::new(id.clone(), pairs)
        })
        .collect()
}

/// Highest-similarity partner outside `taken`, ties to the lowest index.
fn best_partner(truth: &TruthTable, seed: usize, taken: &[usize]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for j in 0..truth.len() {
        if taken.contains(&j) {
            continue;
        }
        let s = truth.propensity_by_index(seed, j);
        if best.is_none_or(|(_, bs)| s > bs) {
            best = Some((j, s));
        }
    }
    best.map(|(j, _)| j)
}

/// Sample a partner outside `taken` with probability proportional to
/// `exp(similarity(seed, ·) / temperature)`.
fn weighted_partner(
    truth: &TruthTable,
    seed: usize,
    taken: &[usize],
    temperature: f64,
    rng: &mut ChaCha8Rng,
) -> Option<usize> {
    let mut weights = Vec::with_capacity(truth.len());
    let mut total = 0.0;
    for j in 0..truth.len() {
        if taken.contains(&j) {
            continue;
        }
        let w = (truth.propensity_by_index(seed, j) / temperature).exp();
        weights.push((j, w));
        total += w;
    }
    let mut u = rng.random::<f64>() * total;
    for &(j, w) in &weights {
        if u < w {
            return Some(j);
        }
        u -= w;
    }
    weights.last().map(|&(j, _)| j)
}

fn draw_survey(config: &SynthConfig, truth: &TruthTable, seed: u64) -> Vec<ConsiderationRecord> {
    let n = truth.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut records = Vec::with_capacity(config.customers);
    for c in 0..config.customers {
        let (size, seed_product) = if config.temperature == 0.0 {
            (config.max_considered, c % n)
        } else {
            (
                rng.random_range(1..=config.max_considered),
                rng.random_range(0..n),
            )
        };
        let mut set = vec![seed_product];
        while set.len() < size {
            let next = if config.temperature == 0.0 {
                best_partner(truth, seed_product, &set)
            } else {
                weighted_partner(truth, seed_product, &set, config.temperature, &mut rng)
            };
            match next {
                Some(j) => set.push(j),
                None => break,
            }
        }
        let considered = set.iter().map(|&j| truth.product_ids[j].clone()).collect();
        let record = ConsiderationRecord::new(format!("c{:05}", c + 1), considered)
            .expect("generated sets are non-empty and duplicate-free");
        records.push(record);
    }
    records
}

/// Generate a two-year market from a planted rule.
///
/// Year one draws `products` fresh catalog entries and `customers` survey
/// responses. Year two carries `round(overlap * products)` entries forward
/// (same ids, drifted continuous attributes, stable categorical attributes),
/// fills the catalog back up with brand-new entries, and surveys a fresh
/// respondent pool of the same size. Each year's exact planted pairwise
/// propensities come back in its [`TruthTable`].
///
/// The same seed reproduces the same market bit for bit.
pub fn generate_market(config: &SynthConfig) -> Result<SyntheticMarket> {
    config.validate()?;
    let schema = AttributeSchema::new(
        config
            .attributes
            .iter()
            .map(|a| (a.name.clone(), a.kind))
            .collect(),
    )?;
    let n = config.products;

    let mut attr_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, "market-attrs", 0));
    let year1_values: Vec<Vec<SynthValue>> = (0..n)
        .map(|_| draw_product(&config.attributes, &mut attr_rng))
        .collect();
    let year1_ids: Vec<String> = (1..=n).map(|i| format!("p{i:04}")).collect();

    let carried = (config.overlap * n as f64).round() as usize;
    let mut next_rng = ChaCha8Rng::seed_from_u64(mix_seed(config.seed, "market-attrs", 1));
    let mut year2_values = Vec::with_capacity(n);
    let mut year2_ids = Vec::with_capacity(n);
    for i in 0..carried {
        year2_values.push(drift_product(&year1_values[i], config.drift, &mut next_rng));
        year2_ids.push(year1_ids[i].clone());
    }
    for i in 0..n - carried {
        year2_values.push(draw_product(&config.attributes, &mut next_rng));
        year2_ids.push(format!("p{:04}", n + i + 1));
    }

    let truth1 = TruthTable::new(year1_ids.clone(), &year1_values, &config.attributes);
    let truth2 = TruthTable::new(year2_ids.clone(), &year2_values, &config.attributes);

    let records1 = draw_survey(config, &truth1, mix_seed(config.seed, "survey", 0));
    let records2 = draw_survey(config, &truth2, mix_seed(config.seed, "survey", 1));

    let products1 = product_records(&year1_ids, &year1_values, &config.attributes);
    let products2 = product_records(&year2_ids, &year2_values, &config.attributes);

    Ok(SyntheticMarket {
        schema,
        year1: MarketYear {
            products: products1,
            records: records1,
            truth: truth1,
        },
        year2: MarketYear {
            products: products2,
            records: records2,
            truth: truth2,
        },
    })
}
