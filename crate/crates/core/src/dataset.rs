//! Measurement datasets, CSV ingestion, seeded sampling and splitting, and
//! the metered lookup oracle that stands in for evaluating a configuration
//! in an environment.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::learners::TrainingSet;
use crate::space::{Configuration, ConfigurationSpace};

pub(crate) fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Non-functional property being modeled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    /// Milliseconds.
    InferenceTime,
    /// Millijoules.
    Energy,
}

impl Metric {
    pub const ALL: [Metric; 2] = [Metric::InferenceTime, Metric::Energy];

    pub fn as_str(self) -> &'static str {
        match self {
            Metric::InferenceTime => "inference_time",
            Metric::Energy => "energy",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inference_time" => Ok(Metric::InferenceTime),
            "energy" => Ok(Metric::Energy),
            other => Err(Error::UnknownMetric(other.to_string())),
        }
    }
}

/// Deployment context: hardware platform, deployed model, workload.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EnvironmentId {
    pub hardware: String,
    pub model: String,
    pub workload: String,
}

impl EnvironmentId {
    pub fn new(hardware: impl Into<String>, model: impl Into<String>, workload: impl Into<String>) -> Result<Self> {
        let env = EnvironmentId {
            hardware: hardware.into(),
            model: model.into(),
            workload: workload.into(),
        };
        for label in [&env.hardware, &env.model, &env.workload] {
            if label.is_empty() {
                return Err(Error::InvalidEnvironment("empty label".into()));
            }
            if label.contains(',') || label.contains('/') || label.chars().any(char::is_whitespace) {
                return Err(Error::InvalidEnvironment(format!(
                    "label `{label}` must not contain commas, slashes or whitespace"
                )));
            }
        }
        Ok(env)
    }
}

impl fmt::Display for EnvironmentId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}/{}/{}", self.hardware, self.model, self.workload)
    }
}

impl FromStr for EnvironmentId {
    type Err = Error;

    /// Parses the `hardware/model/workload` form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split('/').collect();
        match parts.as_slice() {
            [h, m, w] => EnvironmentId::new(*h, *m, *w),
            _ => Err(Error::InvalidEnvironment(format!(
                "`{s}` is not of the form hardware/model/workload"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    pub config: Configuration,
    pub metric: Metric,
    pub value: f64,
    pub replicate: u32,
}

/// Measurements of one environment over one configuration space.
#[derive(Debug, Clone)]
pub struct MeasurementDataset {
    env: EnvironmentId,
    space: Arc<ConfigurationSpace>,
    records: Vec<MeasurementRecord>,
}

const CSV_TAIL: [&str; 6] = [
    "metric",
    "value",
    "replicate",
    "env_hardware",
    "env_model",
    "env_workload",
];

fn snap_level(levels: &[f64], value: f64) -> Option<usize> {
    levels
        .iter()
        .position(|&l| l == value || (l - value).abs() <= 1e-9 * l.abs().max(1.0))
}

impl MeasurementDataset {
    pub fn new(env: EnvironmentId, space: Arc<ConfigurationSpace>, records: Vec<MeasurementRecord>) -> Result<Self> {
        let mut seen = HashSet::with_capacity(records.len());
        for rec in &records {
            space.validate(&rec.config)?;
            if !(rec.value.is_finite() && rec.value > 0.0) {
                return Err(Error::NonPositiveMetric {
                    value: rec.value,
                    line: 0,
                });
            }
            if !seen.insert((&rec.config, rec.metric, rec.replicate)) {
                return Err(Error::DuplicateRecord {
                    config: rec.config.to_string(),
                    metric: rec.metric.to_string(),
                    replicate: rec.replicate,
                });
            }
        }
        Ok(MeasurementDataset { env, space, records })
    }

    pub fn env(&self) -> &EnvironmentId {
        &self.env
    }

    pub fn space(&self) -> &Arc<ConfigurationSpace> {
        &self.space
    }

    pub fn records(&self) -> &[MeasurementRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn distinct_configs(&self) -> Vec<Configuration> {
        let set: BTreeSet<_> = self.records.iter().map(|r| &r.config).collect();
        set.into_iter().cloned().collect()
    }

    pub fn metrics(&self) -> Vec<Metric> {
        let set: BTreeSet<_> = self.records.iter().map(|r| r.metric).collect();
        set.into_iter().collect()
    }

    /// Replicate means for one metric, sorted by configuration.
    pub fn mean_table(&self, metric: Metric) -> Vec<(Configuration, f64)> {
        let mut acc: BTreeMap<&Configuration, (f64, usize)> = BTreeMap::new();
        for rec in self.records.iter().filter(|r| r.metric == metric) {
            let e = acc.entry(&rec.config).or_insert((0.0, 0));
            e.0 += rec.value;
            e.1 += 1;
        }
        acc.into_iter()
            .map(|(c, (sum, n))| (c.clone(), sum / n as f64))
            .collect()
    }

    /// Encoded features and replicate-mean targets for one metric.
    pub fn training_set(&self, metric: Metric) -> TrainingSet {
        let table = self.mean_table(metric);
        let rows = table.iter().map(|(c, _)| self.space.encode_unchecked(c)).collect();
        let targets = table.iter().map(|(_, v)| *v).collect();
        TrainingSet::new(rows, targets).expect("rows and targets have equal length")
    }

    pub fn with_env(mut self, env: EnvironmentId) -> Self {
        self.env = env;
        self
    }

    pub fn load_csv(path: impl AsRef<Path>, space: Arc<ConfigurationSpace>) -> Result<Self> {
        let path = path.as_ref();
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::read_csv(file, space)
    }

    pub fn read_csv<R: Read>(reader: R, space: Arc<ConfigurationSpace>) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();

        let mut column_of: HashMap<&str, usize> = HashMap::new();
        for (i, h) in headers.iter().enumerate() {
            if space.option_index(h).is_none() && !CSV_TAIL.contains(&h) {
                return Err(Error::UnknownOption(h.to_string()));
            }
            column_of.insert(h, i);
        }
        let col = |name: &str| {
            column_of
                .get(name)
                .copied()
                .ok_or_else(|| Error::MissingColumn(name.to_string()))
        };
        let option_cols = space
            .options()
            .iter()
            .map(|o| col(&o.name))
            .collect::<Result<Vec<_>>>()?;
        let [metric_col, value_col, rep_col, hw_col, model_col, wl_col] = CSV_TAIL.map(col);
        let (metric_col, value_col, rep_col) = (metric_col?, value_col?, rep_col?);
        let (hw_col, model_col, wl_col) = (hw_col?, model_col?, wl_col?);

        let mut env: Option<EnvironmentId> = None;
        let mut records = Vec::new();
        let mut seen = HashSet::new();
        for row in rdr.records() {
            let row = row?;
            let line = row.position().map_or(0, |p| p.line());
            let field = |i: usize| row.get(i).unwrap_or("");
            let parse_f64 = |i: usize| {
                field(i).parse::<f64>().map_err(|_| {
                    Error::InvalidParameter(format!("line {line}: cannot parse `{}` as a number", field(i)))
                })
            };

            let mut levels = Vec::with_capacity(option_cols.len());
            for (opt, &c) in space.options().iter().zip(&option_cols) {
                let v = parse_f64(c)?;
                let idx = snap_level(&opt.levels, v).ok_or_else(|| Error::OffDomainValue {
                    option: opt.name.clone(),
                    value: v,
                    line,
                })?;
                levels.push(idx);
            }
            let config = Configuration::new(levels);
            let metric: Metric = field(metric_col).parse()?;
            let value = parse_f64(value_col)?;
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::NonPositiveMetric { value, line });
            }
            let replicate: u32 = field(rep_col).parse().map_err(|_| {
                Error::InvalidParameter(format!(
                    "line {line}: replicate `{}` is not a non-negative integer",
                    field(rep_col)
                ))
            })?;
            let row_env = EnvironmentId::new(field(hw_col), field(model_col), field(wl_col))?;
            match &env {
                None => env = Some(row_env),
                Some(e) if *e != row_env => return Err(Error::MixedEnvironments(e.to_string(), row_env.to_string())),
                Some(_) => {}
            }
            if !seen.insert((config.clone(), metric, replicate)) {
                return Err(Error::DuplicateRecord {
                    config: config.to_string(),
                    metric: metric.to_string(),
                    replicate,
                });
            }
            records.push(MeasurementRecord {
                config,
                metric,
                value,
                replicate,
            });
        }
        let env = env.ok_or(Error::EmptyDataset)?;
        Ok(MeasurementDataset { env, space, records })
    }

    /// Writes the dataset in the ingestion schema; option columns carry level values.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.space.options().iter().map(|o| o.name.as_str()).collect();
        header.extend(CSV_TAIL);
        wtr.write_record(&header)?;
        for rec in &self.records {
            let mut row: Vec<String> = self.space.values(&rec.config).iter().map(|v| v.to_string()).collect();
            row.push(rec.metric.to_string());
            row.push(rec.value.to_string());
            row.push(rec.replicate.to_string());
            row.push(self.env.hardware.clone());
            row.push(self.env.model.clone());
            row.push(self.env.workload.clone());
            wtr.write_record(&row)?;
        }
        wtr.flush().map_err(|e| Error::io("<csv writer>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    /// Records restricted to a set of configurations.
    pub fn subset(&self, keep: &HashSet<Configuration>) -> MeasurementDataset {
        MeasurementDataset {
            env: self.env.clone(),
            space: Arc::clone(&self.space),
            records: self
                .records
                .iter()
                .filter(|r| keep.contains(&r.config))
                .cloned()
                .collect(),
        }
    }

    /// Holds out `test_count` distinct configurations, chosen uniformly per seed.
    pub fn split(&self, test_count: usize, seed: u64) -> Result<(MeasurementDataset, MeasurementDataset)> {
        let configs = self.distinct_configs();
        if test_count == 0 || test_count >= configs.len() {
            return Err(Error::InvalidTestCount {
                test_count,
                distinct: configs.len(),
            });
        }
        let mut rng = rng_from_seed(seed);
        let test: HashSet<Configuration> = index::sample(&mut rng, configs.len(), test_count)
            .into_iter()
            .map(|i| configs[i].clone())
            .collect();
        let train: HashSet<Configuration> = configs.into_iter().filter(|c| !test.contains(c)).collect();
        Ok((self.subset(&train), self.subset(&test)))
    }
}

/// `n` distinct configurations drawn uniformly without replacement.
pub fn random_sample(space: &ConfigurationSpace, n: usize, seed: u64) -> Result<Vec<Configuration>> {
    let card = space.cardinality();
    if n == 0 || n > card {
        return Err(Error::SampleTooLarge {
            requested: n,
            available: card,
        });
    }
    let mut rng = rng_from_seed(seed);
    Ok(index::sample(&mut rng, card, n)
        .into_iter()
        .map(|i| space.config_at(i))
        .collect())
}

/// Queryable table of replicate means with a tally of distinct configurations evaluated.
///
/// The tally is the evaluation cost of whatever used the oracle. Repeated
/// queries of a configuration are free after the first.
#[derive(Debug)]
pub struct Oracle {
    table: HashMap<(Configuration, Metric), f64>,
    pool: BTreeMap<Metric, Vec<Configuration>>,
    queried: Mutex<HashSet<Configuration>>,
}

impl Oracle {
    pub fn new(dataset: &MeasurementDataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut table = HashMap::new();
        let mut pool = BTreeMap::new();
        for metric in dataset.metrics() {
            let means = dataset.mean_table(metric);
            pool.insert(metric, means.iter().map(|(c, _)| c.clone()).collect());
            table.extend(means.into_iter().map(|(c, v)| ((c, metric), v)));
        }
        Ok(Oracle {
            table,
            pool,
            queried: Mutex::new(HashSet::new()),
        })
    }

    pub fn query(&self, config: &Configuration, metric: Metric) -> Result<f64> {
        let value = self
            .table
            .get(&(config.clone(), metric))
            .copied()
            .ok_or_else(|| Error::UnmeasuredConfiguration(config.to_string()))?;
        self.queried.lock().unwrap().insert(config.clone());
        Ok(value)
    }

    /// Number of distinct configurations queried so far.
    pub fn tally(&self) -> usize {
        self.queried.lock().unwrap().len()
    }

    /// How many of `configs` have been queried.
    pub fn tally_of<'a>(&self, configs: impl IntoIterator<Item = &'a Configuration>) -> usize {
        let queried = self.queried.lock().unwrap();
        configs.into_iter().filter(|c| queried.contains(*c)).count()
    }

    pub fn contains(&self, config: &Configuration, metric: Metric) -> bool {
        self.table.contains_key(&(config.clone(), metric))
    }

    /// Configurations measured for `metric`, sorted.
    pub fn pool(&self, metric: Metric) -> &[Configuration] {
        self.pool.get(&metric).map_or(&[], Vec::as_slice)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space23() -> Arc<ConfigurationSpace> {
        let text = r#"
[[options]]
name = "cpu"
levels = [1000, 2000]
[[options]]
name = "gpu"
levels = [10, 20, 30]
"#;
        Arc::new(ConfigurationSpace::from_toml_str(text).unwrap())
    }

    const HEADER: &str = "cpu,gpu,metric,value,replicate,env_hardware,env_model,env_workload\n";

    fn six_rows() -> String {
        let mut s = HEADER.to_string();
        let mut v = 1.0;
        for cpu in [1000, 2000] {
            for gpu in [10, 20, 30] {
                s.push_str(&format!("{cpu},{gpu},inference_time,{v},0,h1,m2,s3\n"));
                v += 1.5;
            }
        }
        s
    }

    #[test]
    fn loads_six_rows() {
        let ds = MeasurementDataset::read_csv(six_rows().as_bytes(), space23()).unwrap();
        assert_eq!(ds.len(), 6);
        assert_eq!(ds.env().to_string(), "h1/m2/s3");
        assert_eq!(ds.records()[4].config, Configuration::new(vec![1, 1]));
    }

    #[test]
    fn rejects_off_domain_value() {
        let csv = format!("{HEADER}1100,10,inference_time,3.0,0,h,m,w\n");
        let err = MeasurementDataset::read_csv(csv.as_bytes(), space23()).unwrap_err();
        assert!(err.to_string().contains("off-domain value"), "{err}");
    }

    #[test]
    fn rejects_non_positive_metric() {
        let csv = format!("{HEADER}1000,10,energy,-3.0,0,h,m,w\n");
        let err = MeasurementDataset::read_csv(csv.as_bytes(), space23()).unwrap_err();
        assert!(err.to_string().contains("non-positive metric"), "{err}");
    }

    #[test]
    fn rejects_unknown_column_and_duplicates() {
        let csv = "cpu,gpu,mem,metric,value,replicate,env_hardware,env_model,env_workload\n";
        let err = MeasurementDataset::read_csv(csv.as_bytes(), space23()).unwrap_err();
        assert!(matches!(err, Error::UnknownOption(ref c) if c == "mem"));

        let csv = format!("{HEADER}1000,10,energy,3.0,0,h,m,w\n1000,10,energy,4.0,0,h,m,w\n");
        let err = MeasurementDataset::read_csv(csv.as_bytes(), space23()).unwrap_err();
        assert!(matches!(err, Error::DuplicateRecord { .. }));

        let csv = "cpu,metric,value,replicate,env_hardware,env_model,env_workload\n";
        let err = MeasurementDataset::read_csv(csv.as_bytes(), space23()).unwrap_err();
        assert!(matches!(err, Error::MissingColumn(ref c) if c == "gpu"));
    }

    #[test]
    fn rejects_mixed_environments() {
        let csv = format!("{HEADER}1000,10,energy,3.0,0,h,m,w\n1000,20,energy,4.0,0,h2,m,w\n");
        let err = MeasurementDataset::read_csv(csv.as_bytes(), space23()).unwrap_err();
        assert!(matches!(err, Error::MixedEnvironments(..)));
    }

    #[test]
    fn csv_round_trip() {
        let ds = MeasurementDataset::read_csv(six_rows().as_bytes(), space23()).unwrap();
        let mut buf = Vec::new();
        ds.write_csv(&mut buf).unwrap();
        let again = MeasurementDataset::read_csv(buf.as_slice(), space23()).unwrap();
        assert_eq!(ds.records(), again.records());
        assert_eq!(ds.env(), again.env());
    }

    #[test]
    fn random_sample_exhaustion_is_a_permutation() {
        let space = ConfigurationSpace::from_level_counts(&[2, 3, 2]).unwrap();
        let mut s = random_sample(&space, 12, 9).unwrap();
        s.sort();
        assert_eq!(s, space.enumerate().collect::<Vec<_>>());
        assert!(random_sample(&space, 13, 9).is_err());
        assert!(random_sample(&space, 0, 9).is_err());
    }

    #[test]
    fn random_sample_is_deterministic_and_valid() {
        let space = ConfigurationSpace::from_level_counts(&[4, 12, 20, 48]).unwrap();
        let a = random_sample(&space, 100, 42).unwrap();
        let b = random_sample(&space, 100, 42).unwrap();
        assert_eq!(a, b);
        let distinct: HashSet<_> = a.iter().collect();
        assert_eq!(distinct.len(), 100);
        assert!(a.iter().all(|c| space.validate(c).is_ok()));
        assert_ne!(a, random_sample(&space, 100, 43).unwrap());
    }

    fn dataset_100() -> MeasurementDataset {
        let space = Arc::new(ConfigurationSpace::from_level_counts(&[10, 10]).unwrap());
        let records = space
            .enumerate()
            .enumerate()
            .map(|(i, config)| MeasurementRecord {
                config,
                metric: Metric::Energy,
                value: 1.0 + i as f64,
                replicate: 0,
            })
            .collect();
        MeasurementDataset::new(EnvironmentId::new("h", "m", "w").unwrap(), space, records).unwrap()
    }

    #[test]
    fn split_is_disjoint_and_deterministic() {
        let ds = dataset_100();
        let (train, test) = ds.split(10, 5).unwrap();
        assert_eq!(train.distinct_configs().len(), 90);
        assert_eq!(test.distinct_configs().len(), 10);
        let train_set: HashSet<_> = train.distinct_configs().into_iter().collect();
        assert!(test.distinct_configs().iter().all(|c| !train_set.contains(c)));
        assert_eq!(train.len() + test.len(), ds.len());
        let (_, test2) = ds.split(10, 5).unwrap();
        assert_eq!(test.distinct_configs(), test2.distinct_configs());
        assert!(ds.split(0, 5).is_err());
        assert!(ds.split(100, 5).is_err());
    }

    #[test]
    fn oracle_means_and_tally() {
        let space = Arc::new(ConfigurationSpace::from_level_counts(&[2, 2]).unwrap());
        let c0 = Configuration::new(vec![0, 0]);
        let c1 = Configuration::new(vec![0, 1]);
        let rec = |config: &Configuration, value, replicate| MeasurementRecord {
            config: config.clone(),
            metric: Metric::InferenceTime,
            value,
            replicate,
        };
        let ds = MeasurementDataset::new(
            EnvironmentId::new("h", "m", "w").unwrap(),
            space,
            vec![rec(&c0, 10.0, 0), rec(&c0, 12.0, 1), rec(&c1, 5.0, 0)],
        )
        .unwrap();
        let oracle = Oracle::new(&ds).unwrap();
        assert_eq!(oracle.tally(), 0);
        assert_eq!(oracle.query(&c0, Metric::InferenceTime).unwrap(), 11.0);
        assert_eq!(oracle.query(&c0, Metric::InferenceTime).unwrap(), 11.0);
        assert_eq!(oracle.tally(), 1);
        assert_eq!(oracle.query(&c1, Metric::InferenceTime).unwrap(), 5.0);
        assert_eq!(oracle.tally(), 2);
        let missing = Configuration::new(vec![1, 1]);
        let err = oracle.query(&missing, Metric::InferenceTime).unwrap_err();
        assert!(err.to_string().contains("unmeasured configuration"));
        assert!(oracle.query(&c0, Metric::Energy).is_err());
        assert_eq!(oracle.tally(), 2);
        assert_eq!(oracle.tally_of([&c1, &missing]), 1);
    }

    #[test]
    fn oracle_tally_is_thread_safe() {
        let ds = dataset_100();
        let oracle = Oracle::new(&ds).unwrap();
        let configs = ds.distinct_configs();
        std::thread::scope(|s| {
            for t in 0..4 {
                let oracle = &oracle;
                let configs = &configs;
                s.spawn(move || {
                    for c in configs.iter().skip(t * 10).take(40) {
                        oracle.query(c, Metric::Energy).unwrap();
                    }
                });
            }
        });
        assert_eq!(oracle.tally(), 70);
    }
}
