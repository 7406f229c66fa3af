#![allow(dead_code)]

use std::sync::Arc;

use perfxfer::{ConfigurationSpace, EnvironmentId, MeasurementDataset, MeasurementRecord, Metric};

/// Min-max encoding computed from level indices.
pub fn encode(levels: &[usize], counts: &[usize]) -> Vec<f64> {
    levels
        .iter()
        .zip(counts)
        .map(|(&l, &n)| if n == 1 { 0.0 } else { l as f64 / (n - 1) as f64 })
        .collect()
}

/// Full-factorial dataset with one noiseless record per configuration.
pub fn full_dataset(
    space: &Arc<ConfigurationSpace>,
    env: &str,
    metric: Metric,
    f: impl Fn(&[f64]) -> f64,
) -> MeasurementDataset {
    let counts = space.level_counts();
    let records = space
        .enumerate()
        .map(|c| {
            let value = f(&encode(c.level_indices(), &counts));
            MeasurementRecord {
                config: c,
                metric,
                value,
                replicate: 0,
            }
        })
        .collect();
    MeasurementDataset::new(EnvironmentId::new(env, "m", "w").unwrap(), Arc::clone(space), records).unwrap()
}

pub fn space(counts: &[usize]) -> Arc<ConfigurationSpace> {
    Arc::new(ConfigurationSpace::from_level_counts(counts).unwrap())
}
