use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

pub const OTHER: &str = "Other:";

const HAPPY: &[&str] = &["Very happy", "Somewhat happy", "Neutral", "Somewhat unhappy", "Very unhappy", OTHER];
const TRUST: &[&str] = &[
    "I trust it completely",
    "I sort of trust it",
    "I'm not sure if I trust it or not",
    "I don't trust it",
    OTHER,
];
const INTEREST: &[&str] = &[
    "More interested in the idea than before",
    "Less interested in the idea than before",
    "About the same level of interest as before",
    OTHER,
];
const AGREE: &[&str] = &["Strongly agree", "Agree", "Neutral", "Disagree", "Strongly disagree", OTHER];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QuestionKind {
    Choice,
    OpenText,
    Contact,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Question {
    pub id: &'static str,
    pub text: &'static str,
    pub kind: QuestionKind,
    #[serde(skip_serializing_if = "<[_]>::is_empty")]
    pub options: &'static [&'static str],
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SurveySchema {
    pub questions: Vec<Question>,
}

pub fn schema() -> SurveySchema {
    use QuestionKind::*;
    let q = |id, text, kind, options| Question { id, text, kind, options };
    SurveySchema {
        questions: vec![
            q("happiness", "How happy would you be with this rezoning?", Choice, HAPPY),
            q(
                "others_happiness",
                "How happy do you believe other families would be with this rezoning?",
                Choice,
                HAPPY,
            ),
            q(
                "trust",
                "How much do you trust the computer program that created this rezoning?",
                Choice,
                TRUST,
            ),
            q(
                "interest",
                "After learning about this project, how do you feel about the idea of redrawing attendance boundaries to increase diversity in your district's schools?",
                Choice,
                INTEREST,
            ),
            q(
                "agreement",
                "How much do you agree with the following statement: \"I believe changing attendance boundaries is a valuable strategy for promoting more diverse schools in my district\"",
                Choice,
                AGREE,
            ),
            q(
                "interesting",
                "What's something you found interesting, surprising, or novel about the proposed rezoning, if anything?",
                OpenText,
                &[],
            ),
            q(
                "troubling",
                "What's something you found troubling or concerning about the proposed rezoning, if anything?",
                OpenText,
                &[],
            ),
            q(
                "other_thoughts",
                "Do you have any other thoughts or reactions that you'd like to share?",
                OpenText,
                &[],
            ),
            q(
                "contact",
                "Please share your contact information if you would like for a member of our team to reach out to you to discuss this project further, including how it might be applied to your school district.",
                Contact,
                &[],
            ),
        ],
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClosedAnswer {
    pub choice: String,
    /// Free text accompanying "Other:".
    #[serde(default)]
    pub other: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveyAnswers {
    #[serde(default)]
    pub happiness: Option<ClosedAnswer>,
    #[serde(default)]
    pub others_happiness: Option<ClosedAnswer>,
    #[serde(default)]
    pub trust: Option<ClosedAnswer>,
    #[serde(default)]
    pub interest: Option<ClosedAnswer>,
    #[serde(default)]
    pub agreement: Option<ClosedAnswer>,
    #[serde(default)]
    pub interesting: String,
    #[serde(default)]
    pub troubling: String,
    #[serde(default)]
    pub other_thoughts: String,
    #[serde(default)]
    pub contact: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SurveySubmission {
    pub district_id: String,
    pub answers: SurveyAnswers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SurveyResponse {
    pub response_id: u64,
    pub district_id: String,
    pub submitted_at: DateTime<Utc>,
    pub answers: SurveyAnswers,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

/// Closed answers must come from the option lists; `other` text is only
/// allowed with "Other:".
pub fn validate_answers(answers: &SurveyAnswers) -> Vec<FieldError> {
    let closed = [
        ("happiness", &answers.happiness, HAPPY),
        ("others_happiness", &answers.others_happiness, HAPPY),
        ("trust", &answers.trust, TRUST),
        ("interest", &answers.interest, INTEREST),
        ("agreement", &answers.agreement, AGREE),
    ];
    let mut errors = Vec::new();
    for (id, answer, options) in closed {
        let Some(a) = answer else { continue };
        if !options.contains(&a.choice.as_str()) {
            errors.push(FieldError {
                field: format!("answers.{id}"),
                message: format!("{:?} is not one of {}", a.choice, options.join(" / ")),
            });
        } else if a.choice != OTHER && a.other.as_deref().is_some_and(|t| !t.is_empty()) {
            errors.push(FieldError {
                field: format!("answers.{id}.other"),
                message: format!("free text is only accepted with {OTHER:?}"),
            });
        }
    }
    errors
}

/// One CSV row per response, closed answers split into choice and other.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct SurveyRow {
    response_id: u64,
    district_id: String,
    submitted_at: DateTime<Utc>,
    happiness: Option<String>,
    happiness_other: Option<String>,
    others_happiness: Option<String>,
    others_happiness_other: Option<String>,
    trust: Option<String>,
    trust_other: Option<String>,
    interest: Option<String>,
    interest_other: Option<String>,
    agreement: Option<String>,
    agreement_other: Option<String>,
    interesting: String,
    troubling: String,
    other_thoughts: String,
    contact: Option<String>,
}

fn split(a: &Option<ClosedAnswer>) -> (Option<String>, Option<String>) {
    match a {
        Some(a) => (Some(a.choice.clone()), a.other.clone()),
        None => (None, None),
    }
}

fn join(choice: Option<String>, other: Option<String>) -> Option<ClosedAnswer> {
    choice.map(|choice| ClosedAnswer { choice, other })
}

impl From<&SurveyResponse> for SurveyRow {
    fn from(r: &SurveyResponse) -> Self {
        let a = &r.answers;
        let (happiness, happiness_other) = split(&a.happiness);
        let (others_happiness, others_happiness_other) = split(&a.others_happiness);
        let (trust, trust_other) = split(&a.trust);
        let (interest, interest_other) = split(&a.interest);
        let (agreement, agreement_other) = split(&a.agreement);
        Self {
            response_id: r.response_id,
            district_id: r.district_id.clone(),
            submitted_at: r.submitted_at,
            happiness,
            happiness_other,
            others_happiness,
            others_happiness_other,
            trust,
            trust_other,
            interest,
            interest_other,
            agreement,
            agreement_other,
            interesting: a.interesting.clone(),
            troubling: a.troubling.clone(),
            other_thoughts: a.other_thoughts.clone(),
            contact: a.contact.clone(),
        }
    }
}

impl From<SurveyRow> for SurveyResponse {
    fn from(r: SurveyRow) -> Self {
        Self {
            response_id: r.response_id,
            district_id: r.district_id,
            submitted_at: r.submitted_at,
            answers: SurveyAnswers {
                happiness: join(r.happiness, r.happiness_other),
                others_happiness: join(r.others_happiness, r.others_happiness_other),
                trust: join(r.trust, r.trust_other),
                interest: join(r.interest, r.interest_other),
                agreement: join(r.agreement, r.agreement_other),
                interesting: r.interesting,
                troubling: r.troubling,
                other_thoughts: r.other_thoughts,
                contact: r.contact,
            },
        }
    }
}

pub fn export_csv(responses: &[SurveyResponse]) -> Result<String, String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in responses {
        w.serialize(SurveyRow::from(r)).map_err(|e| e.to_string())?;
    }
    String::from_utf8(w.into_inner().map_err(|e| e.to_string())?).map_err(|e| e.to_string())
}

pub fn import_csv(text: &str) -> Result<Vec<SurveyResponse>, String> {
    csv::Reader::from_reader(text.as_bytes())
        .deserialize::<SurveyRow>()
        .map(|r| r.map(SurveyResponse::from).map_err(|e| e.to_string()))
        .collect()
}

/// Append-only response store, optionally mirrored to a JSON-lines file.
#[derive(Default)]
pub struct SurveyStore {
    responses: Vec<SurveyResponse>,
    log: Option<File>,
}

impl SurveyStore {
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut store = Self::default();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let r: SurveyResponse = serde_json::from_str(&line)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                store.responses.push(r);
            }
        }
        store.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(store)
    }

    pub fn responses(&self) -> &[SurveyResponse] {
        &self.responses
    }

    pub fn append(&mut self, submission: SurveySubmission, now: DateTime<Utc>) -> Result<SurveyResponse, String> {
        let response = SurveyResponse {
            response_id: self.responses.len() as u64 + 1,
            district_id: submission.district_id,
            submitted_at: now,
            answers: submission.answers,
        };
        if let Some(log) = &mut self.log {
            let line = serde_json::to_string(&response).map_err(|e| e.to_string())?;
            writeln!(log, "{line}").map_err(|e| format!("cannot persist response: {e}"))?;
        }
        self.responses.push(response.clone());
        Ok(response)
    }
}
