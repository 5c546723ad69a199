//! Outreach experiment: stratified cluster randomization, regression with
//! cluster-robust errors, count models and an engagement simulator.

mod arms;
mod design;
mod glm;
mod simulate;
mod strata;
pub mod table;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use arms::{control_arm, subject_line_catalog, validate_arms, CampaignArm, CONTROL_SUBJECT};
pub use design::{
    default_send_date, recipient_design, ClickDenominator, DesignMatrix, DesignOptions, DistrictCovariates, Outcome,
    INTERCEPT,
};
pub use glm::{
    bonferroni, fit_logistic, fit_negative_binomial, fit_negative_binomial_fixed_alpha, fit_poisson, Convergence,
    CovarianceKind, Family, FitOptions, GlmFit,
};
pub use simulate::{simulate_engagement, synthesize_recipients, BaseRates, EngagementOptions};
pub use strata::{assign_arms, compute_quintiles, AllocationPlan, NUM_STRATA};

/// Recipient race as recorded in the input; `White` is the reference level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaceCategory {
    White,
    Black,
    Hispanic,
    Asian,
}

impl RaceCategory {
    pub const ALL: [RaceCategory; 4] = [
        RaceCategory::White,
        RaceCategory::Black,
        RaceCategory::Hispanic,
        RaceCategory::Asian,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RaceCategory::White => "white",
            RaceCategory::Black => "black",
            RaceCategory::Hispanic => "hispanic",
            RaceCategory::Asian => "asian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recipient {
    pub id: String,
    pub district_id: String,
    pub race: RaceCategory,
    pub delivered: bool,
    pub opened: bool,
    pub clicked: bool,
    pub unsubscribed: bool,
    pub sent_on: NaiveDate,
}

impl Recipient {
    /// Opens and clicks require delivery.
    pub fn validate(&self) -> Result<()> {
        if (self.opened || self.clicked) && !self.delivered {
            return Err(Error::validation(
                format!("recipient {}", self.id),
                "opened or clicked without delivery",
            ));
        }
        Ok(())
    }
}
