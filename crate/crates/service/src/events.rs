use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    DistrictSelected,
    MapToggled,
    SchoolDrilldown,
    TravelViewed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplorationEvent {
    pub event_id: u64,
    pub district_id: String,
    pub session: String,
    pub timestamp: DateTime<Utc>,
    pub action: Action,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NewEvent {
    pub district_id: String,
    pub session: String,
    pub action: Action,
    /// Server time when absent.
    #[serde(default)]
    pub timestamp: Option<DateTime<Utc>>,
}

/// What counts as one exploration of a district.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExplorationCount {
    /// One per session that selected the district.
    #[default]
    DistinctSessionSelections,
    /// Every `district_selected` event.
    AllSelections,
    /// Every event of any action.
    AllEvents,
}

impl std::str::FromStr for ExplorationCount {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "distinct_session_selections" => Ok(Self::DistinctSessionSelections),
            "all_selections" => Ok(Self::AllSelections),
            "all_events" => Ok(Self::AllEvents),
            other => Err(format!("unknown exploration count `{other}`")),
        }
    }
}

/// Append-only event log, optionally mirrored to a JSON-lines file.
#[derive(Default)]
pub struct EventStore {
    events: Vec<ExplorationEvent>,
    last_seen: HashMap<String, DateTime<Utc>>,
    log: Option<File>,
}

impl EventStore {
    /// Replays `path` if it exists and appends new events to it.
    pub fn open(path: &Path) -> std::io::Result<Self> {
        let mut store = Self::default();
        if path.exists() {
            for line in BufReader::new(File::open(path)?).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                let event: ExplorationEvent = serde_json::from_str(&line)
                    .map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
                store.last_seen.insert(event.session.clone(), event.timestamp);
                store.events.push(event);
            }
        }
        store.log = Some(OpenOptions::new().create(true).append(true).open(path)?);
        Ok(store)
    }

    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn events(&self) -> &[ExplorationEvent] {
        &self.events
    }

    /// Rejects timestamps earlier than the session's previous event. The
    /// caller checks that the district exists.
    pub fn append(&mut self, new: NewEvent, now: DateTime<Utc>) -> Result<ExplorationEvent, String> {
        if new.session.trim().is_empty() {
            return Err("session must not be empty".into());
        }
        let timestamp = new.timestamp.unwrap_or(now);
        if let Some(last) = self.last_seen.get(&new.session) {
            if timestamp < *last {
                return Err(format!("timestamp {timestamp} precedes the session's previous event at {last}"));
            }
        }
        let event = ExplorationEvent {
            event_id: self.events.len() as u64 + 1,
            district_id: new.district_id,
            session: new.session,
            timestamp,
            action: new.action,
        };
        if let Some(log) = &mut self.log {
            let line = serde_json::to_string(&event).map_err(|e| e.to_string())?;
            writeln!(log, "{line}").map_err(|e| format!("cannot persist event: {e}"))?;
        }
        self.last_seen.insert(event.session.clone(), timestamp);
        self.events.push(event.clone());
        Ok(event)
    }

    pub fn counts(&self, rule: ExplorationCount) -> BTreeMap<String, u64> {
        let mut out: BTreeMap<String, u64> = BTreeMap::new();
        match rule {
            ExplorationCount::DistinctSessionSelections => {
                let pairs: BTreeSet<(&str, &str)> = self
                    .events
                    .iter()
                    .filter(|e| e.action == Action::DistrictSelected)
                    .map(|e| (e.district_id.as_str(), e.session.as_str()))
                    .collect();
                for (district, _) in pairs {
                    *out.entry(district.to_owned()).or_default() += 1;
                }
            }
            ExplorationCount::AllSelections | ExplorationCount::AllEvents => {
                for e in &self.events {
                    if rule == ExplorationCount::AllEvents || e.action == Action::DistrictSelected {
                        *out.entry(e.district_id.clone()).or_default() += 1;
                    }
                }
            }
        }
        out
    }

    pub fn export_csv(&self) -> Result<String, String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.events {
            w.serialize(e).map_err(|e| e.to_string())?;
        }
        let bytes = w.into_inner().map_err(|e| e.to_string())?;
        String::from_utf8(bytes).map_err(|e| e.to_string())
    }
}
