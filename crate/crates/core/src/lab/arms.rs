use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CampaignArm {
    pub id: String,
    pub subject: String,
    pub wave: String,
    pub hypothesis: String,
    #[serde(default)]
    pub control: bool,
}

pub const CONTROL_SUBJECT: &str = "Diversify Learning";

/// Unique ids and exactly one control arm.
pub fn validate_arms(arms: &[CampaignArm]) -> Result<()> {
    if arms.is_empty() {
        return Err(Error::Precondition("at least one campaign arm is required".into()));
    }
    let mut seen = BTreeSet::new();
    for arm in arms {
        if !seen.insert(arm.id.as_str()) {
            return Err(Error::validation(format!("arm {}", arm.id), "duplicate arm id"));
        }
    }
    let controls = arms.iter().filter(|a| a.control).count();
    if controls != 1 {
        return Err(Error::Precondition(format!(
            "exactly one control arm is required, found {controls}"
        )));
    }
    Ok(())
}

pub fn control_arm(arms: &[CampaignArm]) -> Option<&CampaignArm> {
    arms.iter().find(|a| a.control)
}

/// The fourteen subject lines of the outreach campaign, control first.
pub fn subject_line_catalog() -> Vec<CampaignArm> {
    const LINES: [(&str, &str, &str, &str); 14] = [
        (
            "diversify-learning",
            "Diversify Learning",
            "Test, 1",
            "Concise subject line that highlights project topic",
        ),
        (
            "diversify-learning-20",
            "Diversify Learning and get $20 for a school",
            "1",
            "A small incentive that board members can allocate to a teacher of their choice may increase engagement",
        ),
        (
            "ds-boundaries",
            "Data science to diversify attendance boundaries",
            "2",
            "\"Data science\" might pique interest, especially in the context of boundary planning",
        ),
        (
            "views-20",
            "$20 for your views on diversifying attendance boundaries",
            "2",
            "A small incentive that board members can allocate to a teacher of their choice may increase engagement",
        ),
        (
            "ds-improve-learning",
            "Data science to improve learning experiences",
            "2",
            "\"Data science\", focusing on learning instead of diversity may increase engagement",
        ),
        (
            "ds-diversify-learning",
            "Data science to diversify learning experiences",
            "2, 5",
            "Same as above, but mentioning diversity and learning together",
        ),
        (
            "shorter-commutes",
            "More diversity with shorter commutes?",
            "3, 5",
            "Stating the main finding of prior work up front may increase engagement",
        ),
        (
            "shorter-commutes-20",
            "More diversity with shorter commutes? $20 for your thoughts!",
            "3",
            "Stating the main finding of prior work up front and adding the incentive may increase engagement",
        ),
        (
            "less-driving",
            "More diversity, less driving?",
            "4",
            "Pithy description of findings from prior work",
        ),
        (
            "pennies",
            "2,000 pennies for your thoughts",
            "4",
            "Pithy version of incentive email",
        ),
        (
            "families",
            "Improve discussions about school diversity with families",
            "5",
            "Heard from districts that they find it difficult to talk with families about diversifying schools",
        ),
        (
            "ds-commuting",
            "Data science to diversify learning and reduce commuting times",
            "6",
            "Combining learning, diversity, and shorter commute messages from earlier",
        ),
        (
            "ds-open-close",
            "Data science to decide which schools to open or close",
            "6",
            "Framing in terms of a problem school districts often face that triggers boundary planning may increase engagement",
        ),
        (
            "ds-commute-final",
            "Data science to diversify learning and reduce commute times",
            "Final",
            "Has elements of promising subject lines throughout runs",
        ),
    ];
    LINES
        .iter()
        .map(|&(id, subject, wave, hypothesis)| CampaignArm {
            id: id.into(),
            subject: subject.into(),
            wave: wave.into(),
            hypothesis: hypothesis.into(),
            control: subject == CONTROL_SUBJECT,
        })
        .collect()
}
