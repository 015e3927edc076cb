//! Flat TOML run configuration. Every key is optional; an empty file yields
//! the published training hyperparameters and the default synthetic
//! benchmark.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dqn::{EpsilonSchedule, LearningRateSchedule, TrainConfig};
use crate::error::{Error, Result};
use crate::synth::{AttributePattern, DatasetSpec, FieldSpec, NoiseModel};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub seed: u64,
    /// Independent runs averaged in compare/sweep tables.
    pub seeds: usize,

    pub epochs: usize,
    pub transitions_per_epoch: usize,
    pub batch_size: usize,
    pub gamma: f64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_anneal_transitions: usize,
    pub learning_rate_schedule: Vec<(usize, f64)>,
    pub replay_capacity: usize,
    pub target_sync_period: usize,

    /// M: candidate answers per episode.
    pub max_answers: usize,
    /// `"field|attribute|pattern"`; repeat a field name to give it several
    /// attributes.
    pub fields: Vec<String>,
    pub categories_per_field: usize,
    pub train_per_field: usize,
    pub test_per_field: usize,
    pub background_per_category: usize,
    pub p_correct_present: f64,
    pub corruption_rate: f64,
    pub near_miss_weight: f64,
    pub sibling_weight: f64,
    pub off_pattern_weight: f64,
    pub confidence_overlap: f64,

    pub sweep_fractions: Vec<f64>,
}

impl Default for Config {
    fn default() -> Self {
        let train = TrainConfig::default();
        let data = DatasetSpec::default();
        let noise = NoiseModel::default();
        let first = &data.fields[0];
        Self {
            seed: 0,
            seeds: 3,
            epochs: train.epochs,
            transitions_per_epoch: train.transitions_per_epoch,
            batch_size: train.batch_size,
            gamma: train.gamma,
            epsilon_start: train.epsilon.start,
            epsilon_end: train.epsilon.end,
            epsilon_anneal_transitions: train.epsilon.anneal_transitions,
            learning_rate_schedule: train.learning_rate.breakpoints().to_vec(),
            replay_capacity: train.replay_capacity,
            target_sync_period: train.target_sync_period,
            max_answers: data.max_answers,
            fields: data
                .fields
                .iter()
                .flat_map(|f| {
                    f.attributes
                        .iter()
                        .map(move |a| format!("{}|{}|{}", f.name, a.attribute, a.pattern))
                })
                .collect(),
            categories_per_field: first.categories,
            train_per_field: first.train_entities,
            test_per_field: first.test_entities,
            background_per_category: data.background_per_category,
            p_correct_present: noise.p_correct_present,
            corruption_rate: noise.corruption_rate,
            near_miss_weight: noise.near_miss_weight,
            sibling_weight: noise.sibling_weight,
            off_pattern_weight: noise.off_pattern_weight,
            confidence_overlap: noise.confidence_overlap,
            sweep_fractions: (0..=10).map(|i| i as f64 / 10.0).collect(),
        }
    }
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds == 0 {
            return Err(Error::Config("seeds must be at least 1".into()));
        }
        self.train_config(self.seed)?;
        self.dataset_spec()?.validate()?;
        self.noise().validate()?;
        if self
            .sweep_fractions
            .iter()
            .any(|f| !(0.0..=1.0).contains(f))
        {
            return Err(Error::Config("sweep fractions must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// The seeds averaged over: `seed, seed + 1, ...`.
    pub fn seed_list(&self) -> Vec<u64> {
        (0..self.seeds as u64).map(|k| self.seed + k).collect()
    }

    pub fn train_config(&self, seed: u64) -> Result<TrainConfig> {
        let cfg = TrainConfig {
            epochs: self.epochs,
            transitions_per_epoch: self.transitions_per_epoch,
            batch_size: self.batch_size,
            gamma: self.gamma,
            epsilon: EpsilonSchedule {
                start: self.epsilon_start,
                end: self.epsilon_end,
                anneal_transitions: self.epsilon_anneal_transitions,
            },
            learning_rate: LearningRateSchedule::new(self.learning_rate_schedule.clone())?,
            replay_capacity: self.replay_capacity,
            target_sync_period: self.target_sync_period,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn dataset_spec(&self) -> Result<DatasetSpec> {
        let mut fields: Vec<FieldSpec> = Vec::new();
        for entry in &self.fields {
            let parts: Vec<&str> = entry.splitn(3, '|').collect();
            let [name, attribute, pattern] = parts[..] else {
                return Err(Error::Config(format!(
                    "field entry {entry:?} is not \"field|attribute|pattern\""
                )));
            };
            let attr = AttributePattern::new(attribute, pattern);
            match fields.iter_mut().find(|f| f.name == name) {
                Some(f) => f.attributes.push(attr),
                None => fields.push(FieldSpec {
                    name: name.to_string(),
                    attributes: vec![attr],
                    categories: self.categories_per_field,
                    train_entities: self.train_per_field,
                    test_entities: self.test_per_field,
                }),
            }
        }
        let spec = DatasetSpec {
            fields,
            background_per_category: self.background_per_category,
            max_answers: self.max_answers,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn noise(&self) -> NoiseModel {
        NoiseModel {
            p_correct_present: self.p_correct_present,
            corruption_rate: self.corruption_rate,
            near_miss_weight: self.near_miss_weight,
            sibling_weight: self.sibling_weight,
            off_pattern_weight: self.off_pattern_weight,
            confidence_overlap: self.confidence_overlap,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_published_defaults() {
        let cfg = Config::from_toml("").unwrap();
        assert_eq!(cfg, Config::default());
        let t = cfg.train_config(0).unwrap();
        assert_eq!(t, TrainConfig::default());
        assert_eq!(t.epochs, 100);
        assert_eq!(t.transitions_per_epoch, 1000);
        assert_eq!(t.replay_capacity, 10_000);
        assert_eq!(cfg.dataset_spec().unwrap(), DatasetSpec::default());
        assert_eq!(cfg.noise(), NoiseModel::default());
        assert_eq!(cfg.seed_list(), vec![0, 1, 2]);
        assert_eq!(cfg.sweep_fractions.len(), 11);
    }

    #[test]
    fn typed_keys() {
        let cfg = Config::from_toml(
            r#"
seed = 7
epochs = 3
gamma = 0.9
learning_rate_schedule = [[0, 0.1], [2, 0.01]]
fields = ["gpu|core code|LLDDD", "gpu|memory|DD GB"]
"#,
        )
        .unwrap();
        assert_eq!(cfg.seed, 7);
        let t = cfg.train_config(cfg.seed).unwrap();
        assert_eq!(t.learning_rate.at(1), 0.1);
        assert_eq!(t.gamma, 0.9);
        let spec = cfg.dataset_spec().unwrap();
        assert_eq!(spec.fields.len(), 1);
        assert_eq!(spec.fields[0].attributes.len(), 2);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(Config::from_toml("no_such_key = 1").is_err());
        assert!(Config::from_toml("epochs = \"many\"").is_err());
        assert!(Config::from_toml("gamma = 2.0").is_err());
        assert!(Config::from_toml("fields = [\"gpu|LLDDD\"]").is_err());
        assert!(Config::from_toml("sweep_fractions = [1.5]").is_err());
        assert!(Config::from_toml("learning_rate_schedule = [[0, 0.1], [0, 0.2]]").is_err());
    }

    #[test]
    fn toml_round_trip() {
        let cfg = Config {
            seed: 11,
            gamma: 0.95,
            ..Config::default()
        };
        assert_eq!(Config::from_toml(&cfg.to_toml().unwrap()).unwrap(), cfg);
    }
}
