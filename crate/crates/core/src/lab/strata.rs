use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arms::CampaignArm;
use crate::error::{Error, Result};

pub const NUM_STRATA: u8 = 5;

/// Rank-based fifths of `values` (district id, dissimilarity), lowest
/// values in stratum 1. Ties are ordered by id. When the count is not a
/// multiple of five the lower strata take one extra district each, so 23
/// districts split 5/5/5/4/4.
pub fn compute_quintiles(values: &[(String, f64)]) -> Result<BTreeMap<String, u8>> {
    let n = values.len();
    if n < NUM_STRATA as usize {
        return Err(Error::TooFewClusters {
            needed: NUM_STRATA as usize,
            found: n,
        });
    }
    if let Some((id, v)) = values.iter().find(|(_, v)| !v.is_finite()) {
        return Err(Error::validation(format!("district {id}"), format!("non-finite value {v}")));
    }
    let mut ranked: Vec<&(String, f64)> = values.iter().collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then_with(|| a.0.cmp(&b.0)));

    let (base, extra) = (n / NUM_STRATA as usize, n % NUM_STRATA as usize);
    let mut strata = BTreeMap::new();
    let mut rank = 0;
    for q in 0..NUM_STRATA as usize {
        let size = base + usize::from(q < extra);
        for (id, _) in &ranked[rank..rank + size] {
            if strata.insert(id.clone(), q as u8 + 1).is_some() {
                return Err(Error::validation(format!("district {id}"), "duplicate district id"));
            }
        }
        rank += size;
    }
    Ok(strata)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AllocationPlan {
    pub seed: u64,
    /// District id → arm id.
    pub assignments: BTreeMap<String, String>,
    /// District id → stratum 1–5.
    pub strata: BTreeMap<String, u8>,
}

impl AllocationPlan {
    pub fn arm_of(&self, district: &str) -> Option<&str> {
        self.assignments.get(district).map(String::as_str)
    }

    /// Arm counts per stratum.
    pub fn stratum_counts(&self) -> BTreeMap<u8, BTreeMap<&str, usize>> {
        let mut out: BTreeMap<u8, BTreeMap<&str, usize>> = BTreeMap::new();
        for (district, q) in &self.strata {
            if let Some(arm) = self.assignments.get(district) {
                *out.entry(*q).or_default().entry(arm.as_str()).or_default() += 1;
            }
        }
        out
    }

    /// Largest (max − min) arm count within any stratum, counting arms that
    /// received no district in that stratum as zero.
    pub fn max_imbalance(&self, arms: &[CampaignArm]) -> usize {
        self.stratum_counts()
            .values()
            .map(|counts| {
                let per_arm: Vec<usize> = arms
                    .iter()
                    .map(|a| counts.get(a.id.as_str()).copied().unwrap_or(0))
                    .collect();
                per_arm.iter().max().unwrap_or(&0) - per_arm.iter().min().unwrap_or(&0)
            })
            .max()
            .unwrap_or(0)
    }
}

/// Within each stratum the districts and the arm order are shuffled with a
/// generator seeded from `seed`, then arms are dealt round-robin.
pub fn assign_arms(strata: &BTreeMap<String, u8>, arms: &[CampaignArm], seed: u64) -> Result<AllocationPlan> {
    if arms.is_empty() {
        return Err(Error::Precondition("at least one campaign arm is required".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut by_stratum: BTreeMap<u8, Vec<&String>> = BTreeMap::new();
    for (district, q) in strata {
        by_stratum.entry(*q).or_default().push(district);
    }
    let mut assignments = BTreeMap::new();
    for districts in by_stratum.values_mut() {
        districts.shuffle(&mut rng);
        let mut order: Vec<&CampaignArm> = arms.iter().collect();
        order.shuffle(&mut rng);
        for (i, district) in districts.iter().enumerate() {
            assignments.insert((*district).clone(), order[i % order.len()].id.clone());
        }
    }
    Ok(AllocationPlan {
        seed,
        assignments,
        strata: strata.clone(),
    })
}
