use rezone_core::metrics::{SegregationReport, TravelDeltaReport};

fn percent(x: f64) -> String {
    format!("{:.0}%", (x * 100.0).abs())
}

/// Plain-language description of a scenario. The headline talks about
/// students and schools rather than the index itself.
pub fn plain_summary(report: &SegregationReport, travel: &TravelDeltaReport, unchanged: bool) -> String {
    if unchanged {
        return "No change is proposed for this district: every student would keep their current school.".into();
    }
    let rel = report.relative_change;
    let mix = if rel.abs() < 0.005 {
        "segregation between White and non-White students across schools would stay about the same".to_owned()
    } else if rel < 0.0 {
        format!(
            "segregation between White and non-White students across schools would fall by {}",
            percent(rel)
        )
    } else {
        format!(
            "segregation between White and non-White students across schools would rise by {}",
            percent(rel)
        )
    };
    let delta = travel.overall.mean_delta_minutes;
    let commute = if delta.abs() < 0.05 {
        "average travel time would stay about the same".to_owned()
    } else if delta > 0.0 {
        format!("average travel time would rise by {delta:.1} minutes")
    } else {
        format!("average travel time would fall by {:.1} minutes", -delta)
    };
    format!(
        "Under this scenario, {mix}. About {} of students would switch schools, and {commute}.",
        percent(report.percent_switched)
    )
}
