//! Pool measurement and seeded stratified resampling.
//!
//! `balanced_resample` works in two levels: the requested size is first split
//! across element types by `type_weights`, then each type's share is split
//! across ratio buckets by `ratio_weights`. Both splits use largest-remainder
//! rounding with capacity caps; mass that a stratum cannot absorb goes to the
//! remaining strata in proportion to their weights. Within a `(type, bucket)`
//! cell, members are drawn uniformly without replacement from a ChaCha8
//! stream seeded from `DistributionSpec::seed`, and the output keeps pool order.

use std::collections::BTreeMap;

use rand::seq::index;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::StatsRow;
use crate::error::{Error, Result};
use crate::model::{ElementType, Platform, RatioBucket};

const WEIGHT_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionSpec {
    pub type_weights: BTreeMap<ElementType, f64>,
    pub ratio_weights: BTreeMap<RatioBucket, f64>,
    pub seed: u64,
}

impl Default for DistributionSpec {
    /// Uniform over types and buckets.
    fn default() -> Self {
        Self {
            type_weights: ElementType::ALL.iter().map(|&t| (t, 0.2)).collect(),
            ratio_weights: RatioBucket::ALL.iter().map(|&b| (b, 1.0 / 3.0)).collect(),
            seed: 0,
        }
    }
}

fn check_family<K: std::fmt::Debug>(name: &str, weights: &BTreeMap<K, f64>) -> Result<()> {
    for (k, w) in weights {
        if !w.is_finite() || *w < 0.0 {
            return Err(Error::invalid(format!("{name} weight for {k:?} is {w}")));
        }
    }
    let sum: f64 = weights.values().sum();
    if (sum - 1.0).abs() > WEIGHT_TOLERANCE {
        return Err(Error::invalid(format!("{name} weights sum to {sum}, expected 1")));
    }
    Ok(())
}

impl DistributionSpec {
    pub fn validate(&self) -> Result<()> {
        check_family("type", &self.type_weights)?;
        check_family("ratio", &self.ratio_weights)
    }

    pub fn type_weight(&self, t: ElementType) -> f64 {
        self.type_weights.get(&t).copied().unwrap_or(0.0)
    }

    pub fn ratio_weight(&self, b: RatioBucket) -> f64 {
        self.ratio_weights.get(&b).copied().unwrap_or(0.0)
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        crate::sha256_hex(&serde_json::to_vec(self).expect("spec serializes"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoolStats {
    pub total: usize,
    pub by_type: BTreeMap<ElementType, usize>,
    pub by_bucket: BTreeMap<RatioBucket, usize>,
    pub by_platform: BTreeMap<Platform, usize>,
    pub non_text_fraction: f64,
}

impl PoolStats {
    pub fn type_fraction(&self, t: ElementType) -> f64 {
        self.by_type.get(&t).copied().unwrap_or(0) as f64 / self.total as f64
    }

    pub fn bucket_fraction(&self, b: RatioBucket) -> f64 {
        self.by_bucket.get(&b).copied().unwrap_or(0) as f64 / self.total as f64
    }
}

pub fn measure_distribution<R: StatsRow>(pool: &[R]) -> Result<PoolStats> {
    if pool.is_empty() {
        return Err(Error::invalid("cannot measure an empty pool"));
    }
    let mut stats = PoolStats {
        total: pool.len(),
        by_type: ElementType::ALL.iter().map(|&t| (t, 0)).collect(),
        by_bucket: RatioBucket::ALL.iter().map(|&b| (b, 0)).collect(),
        by_platform: Platform::ALL.iter().map(|&p| (p, 0)).collect(),
        non_text_fraction: 0.0,
    };
    for r in pool {
        *stats.by_type.entry(r.element_type()).or_default() += 1;
        *stats.by_bucket.entry(r.ratio_bucket()).or_default() += 1;
        *stats.by_platform.entry(r.platform()).or_default() += 1;
    }
    stats.non_text_fraction = 1.0 - stats.by_type[&ElementType::Text] as f64 / pool.len() as f64;
    Ok(stats)
}

/// Split `total` across slots proportionally to `weights`, never exceeding
/// `caps`. Zero-weight slots get nothing. When the positive-weight capacity is
/// below `total`, every such slot is filled to its cap.
pub fn allocate(total: usize, weights: &[f64], caps: &[usize]) -> Vec<usize> {
    assert_eq!(weights.len(), caps.len());
    let mut alloc = vec![0usize; weights.len()];
    let mut open: Vec<usize> = (0..weights.len())
        .filter(|&i| weights[i] > 0.0 && caps[i] > 0)
        .collect();
    let mut left = total;
    loop {
        if open.is_empty() || left == 0 {
            return alloc;
        }
        let mass: f64 = open.iter().map(|&i| weights[i]).sum();
        let quota = |i: usize| left as f64 * weights[i] / mass;
        // Saturate every slot whose proportional share meets its cap, then
        // re-split what is left over the others.
        let saturated: Vec<usize> = open.iter().copied().filter(|&i| quota(i) >= caps[i] as f64).collect();
        if !saturated.is_empty() {
            for &i in &saturated {
                alloc[i] = caps[i];
                left -= caps[i].min(left);
            }
            open.retain(|i| !saturated.contains(i));
            continue;
        }
        let mut given = 0;
        let mut remainders: Vec<(f64, usize)> = Vec::with_capacity(open.len());
        for &i in &open {
            let q = quota(i);
            let base = q.floor() as usize;
            alloc[i] = base;
            given += base;
            remainders.push((q - base as f64, i));
        }
        // ties go to the earlier slot
        remainders.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
        for &(_, i) in remainders.iter().take(left - given) {
            alloc[i] += 1;
        }
        return alloc;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleHeader {
    pub seed: u64,
    pub spec_hash: String,
    pub requested: usize,
    pub returned: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Resampled<R> {
    pub items: Vec<R>,
    pub header: SampleHeader,
}

pub fn balanced_resample<R: StatsRow + Clone>(
    pool: &[R],
    spec: &DistributionSpec,
    n: usize,
) -> Result<Resampled<R>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::invalid("sample size must be at least 1"));
    }
    if pool.is_empty() {
        return Err(Error::invalid("cannot resample an empty pool"));
    }
    if n > pool.len() {
        return Err(Error::invalid(format!(
            "requested {n} elements from a pool of {}",
            pool.len()
        )));
    }

    let mut cells: BTreeMap<(ElementType, RatioBucket), Vec<usize>> = BTreeMap::new();
    for (i, r) in pool.iter().enumerate() {
        cells.entry((r.element_type(), r.ratio_bucket())).or_default().push(i);
    }
    let cell_len = |t, b| cells.get(&(t, b)).map_or(0, Vec::len);

    let mut warnings = Vec::new();
    let type_caps: Vec<usize> = ElementType::ALL
        .iter()
        .map(|&t| {
            RatioBucket::ALL
                .iter()
                .filter(|&&b| spec.ratio_weight(b) > 0.0)
                .map(|&b| cell_len(t, b))
                .sum()
        })
        .collect();
    let type_weights: Vec<f64> = ElementType::ALL.iter().map(|&t| spec.type_weight(t)).collect();
    for (ti, &t) in ElementType::ALL.iter().enumerate() {
        if type_weights[ti] > 0.0 && type_caps[ti] == 0 {
            warnings.push(format!("no pool elements for positive-weight type {t}"));
        }
    }
    let per_type = allocate(n, &type_weights, &type_caps);

    let ratio_weights: Vec<f64> = RatioBucket::ALL.iter().map(|&b| spec.ratio_weight(b)).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen: Vec<usize> = Vec::with_capacity(n);
    for (ti, &t) in ElementType::ALL.iter().enumerate() {
        if per_type[ti] == 0 {
            continue;
        }
        let caps: Vec<usize> = RatioBucket::ALL.iter().map(|&b| cell_len(t, b)).collect();
        let per_bucket = allocate(per_type[ti], &ratio_weights, &caps);
        for (bi, &b) in RatioBucket::ALL.iter().enumerate() {
            if per_bucket[bi] == 0 {
                continue;
            }
            let members = &cells[&(t, b)];
            chosen.extend(
                index::sample(&mut rng, members.len(), per_bucket[bi])
                    .into_iter()
                    .map(|k| members[k]),
            );
        }
    }
    chosen.sort_unstable();

    if chosen.len() < n {
        warnings.push(format!(
            "positive-weight strata hold only {} elements; returning fewer than {n}",
            chosen.len()
        ));
    }
    for w in &warnings {
        tracing::warn!("{w}");
    }
    Ok(Resampled {
        header: SampleHeader {
            seed: spec.seed,
            spec_hash: spec.hash(),
            requested: n,
            returned: chosen.len(),
            warnings,
        },
        items: chosen.into_iter().map(|i| pool[i].clone()).collect(),
    })
}

/// Up to `per_type` items of each element type, chosen by a seeded shuffle.
/// Scarce types contribute everything they have. Output keeps pool order.
pub fn stratified_bench_sample<R: StatsRow + Clone>(pool: &[R], per_type: usize, seed: u64) -> Vec<R> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut chosen = Vec::new();
    for t in ElementType::ALL {
        let mut members: Vec<usize> = (0..pool.len()).filter(|&i| pool[i].element_type() == t).collect();
        members.shuffle(&mut rng);
        members.truncate(per_type);
        chosen.extend(members);
    }
    chosen.sort_unstable();
    chosen.into_iter().map(|i| pool[i].clone()).collect()
}
