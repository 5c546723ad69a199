use std::collections::BTreeMap;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::strata::AllocationPlan;
use super::{RaceCategory, Recipient};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaseRates {
    pub open: f64,
    pub click: f64,
    pub unsubscribe: f64,
}

impl Default for BaseRates {
    fn default() -> Self {
        Self {
            open: 0.39,
            click: 0.025,
            unsubscribe: 0.015,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EngagementOptions {
    /// Log-odds offset per arm id, applied to opens and clicks. Missing arms
    /// get 0.
    pub effects: BTreeMap<String, f64>,
    pub base: BaseRates,
    /// Only openers can click. The click probability is then conditional on
    /// opening, with base rate `click / open`.
    pub click_requires_open: bool,
}

fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

fn inv_logit(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Redraws opened, clicked and unsubscribed for every recipient. Delivery
/// is taken from the input; undelivered recipients get no engagement.
pub fn simulate_engagement(
    plan: &AllocationPlan,
    recipients: &[Recipient],
    options: &EngagementOptions,
    seed: u64,
) -> Result<Vec<Recipient>> {
    let base = options.base;
    for (name, p) in [("open", base.open), ("click", base.click), ("unsubscribe", base.unsubscribe)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::Precondition(format!("{name} base rate must be in (0, 1), got {p}")));
        }
    }
    if options.click_requires_open && base.click >= base.open {
        return Err(Error::Precondition("click rate must be below open rate when clicks require opens".into()));
    }
    let click_base = if options.click_requires_open {
        base.click / base.open
    } else {
        base.click
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    recipients
        .iter()
        .map(|r| {
            let arm = plan.arm_of(&r.district_id).ok_or_else(|| {
                Error::validation(format!("recipient {}", r.id), format!("district {} not in plan", r.district_id))
            })?;
            let effect = options.effects.get(arm).copied().unwrap_or(0.0);
            let (u_open, u_click, u_unsub): (f64, f64, f64) = (rng.random(), rng.random(), rng.random());
            let mut out = r.clone();
            out.opened = r.delivered && u_open < inv_logit(logit(base.open) + effect);
            let may_click = r.delivered && (!options.click_requires_open || out.opened);
            out.clicked = may_click && u_click < inv_logit(logit(click_base) + effect);
            out.unsubscribed = r.delivered && u_unsub < base.unsubscribe;
            Ok(out)
        })
        .collect()
}

/// `per_district` delivered recipients for each district, with race drawn
/// from fixed shares and every email sent on `sent_on`.
pub fn synthesize_recipients(district_ids: &[String], per_district: usize, sent_on: NaiveDate, seed: u64) -> Vec<Recipient> {
    const SHARES: [(RaceCategory, f64); 4] = [
        (RaceCategory::White, 0.7),
        (RaceCategory::Black, 0.12),
        (RaceCategory::Hispanic, 0.12),
        (RaceCategory::Asian, 0.06),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(district_ids.len() * per_district);
    for district in district_ids {
        for i in 0..per_district {
            let u: f64 = rng.random();
            let mut acc = 0.0;
            let race = SHARES
                .iter()
                .find(|(_, share)| {
                    acc += share;
                    u < acc
                })
                .map_or(RaceCategory::Asian, |(c, _)| *c);
            out.push(Recipient {
                id: format!("{district}-r{i:05}"),
                district_id: district.clone(),
                race,
                delivered: true,
                opened: false,
                clicked: false,
                unsubscribed: false,
                sent_on,
            });
        }
    }
    out
}
