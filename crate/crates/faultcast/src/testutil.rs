//! Builders shared by the unit tests.

use crate::telemetry::{AlarmEvent, ApplianceTelemetry, CohortDataset, SensorSeries};
use crate::time::{Duration, TimeRange, Timestamp, MINUTES_PER_DAY};
use std::collections::BTreeMap;

/// Cohort of `n` appliances (`ap01`, `ap02`, ...) whose sensors all read a
/// constant, sampled hourly over `days` days starting at the epoch.
pub fn constant_cohort(n: usize, sensors: &[&str], days: i64) -> CohortDataset {
    cohort_with(n, sensors, days, 60, |_, _, _| 1.0)
}

/// Cohort with `grid_minutes` sampling where sample values come from
/// `fill(appliance_index, sensor_index, sample_index)`.
pub fn cohort_with(
    n: usize,
    sensors: &[&str],
    days: i64,
    grid_minutes: i64,
    fill: impl Fn(usize, usize, usize) -> f64,
) -> CohortDataset {
    assert!(days * MINUTES_PER_DAY % grid_minutes == 0);
    let len = (days * MINUTES_PER_DAY / grid_minutes) as usize;
    let grid = Duration::from_minutes(grid_minutes);
    let appliances = (0..n)
        .map(|ai| {
            let series: BTreeMap<String, SensorSeries> = sensors
                .iter()
                .enumerate()
                .map(|(si, sensor_id)| {
                    let values = (0..len).map(|i| Some(fill(ai, si, i))).collect();
                    (
                        (*sensor_id).to_owned(),
                        SensorSeries::new(*sensor_id, Timestamp::from_minutes(0), grid, values),
                    )
                })
                .collect();
            ApplianceTelemetry { appliance_id: format!("ap{:02}", ai + 1), series }
        })
        .collect();
    CohortDataset {
        appliances,
        alarms: Vec::new(),
        extent: TimeRange::new(
            Timestamp::from_minutes(0),
            Timestamp::from_minutes(days * MINUTES_PER_DAY),
        ),
    }
}

pub fn alarm(appliance_id: &str, alarm_id: &str, at: Timestamp) -> AlarmEvent {
    AlarmEvent {
        appliance_id: appliance_id.to_owned(),
        alarm_id: alarm_id.to_owned(),
        at,
    }
}
