//! Static pickup-and-delivery instances for the `plan` and `validate`
//! commands.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::config::ConfigError;
use crate::model::{sample_task, Company, ModelError, Task, TaskDistribution, Vehicle};
use crate::rng::{stream, streams};
use crate::topology::Topology;

pub const INSTANCE_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlanInstance {
    #[serde(default = "version")]
    pub format_version: u32,
    /// Bundled topology name or path to a topology document.
    pub topology: String,
    pub vehicles: Vec<Vehicle>,
    pub tasks: Vec<Task>,
}

fn version() -> u32 {
    INSTANCE_FORMAT_VERSION
}

impl PlanInstance {
    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, ConfigError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let inst: PlanInstance = serde_json::from_str(&text)?;
        if inst.format_version != INSTANCE_FORMAT_VERSION {
            return Err(ConfigError::UnsupportedVersion(inst.format_version));
        }
        Ok(inst)
    }

    /// `count` uniform tasks and the given fleet, homes drawn from `seed`.
    pub fn random(
        topology_name: &str,
        topology: &Topology,
        fleet: &[(f64, f64)],
        count: usize,
        weights: (f64, f64),
        seed: u64,
    ) -> Result<Self, ModelError> {
        let dist = TaskDistribution::new(topology.num_cities(), weights.0, weights.1)?;
        let mut rng = stream(seed, streams::TASKS);
        let tasks = (0..count).map(|i| sample_task(&dist, i as u32, &mut rng)).collect();
        let mut homes = stream(seed, streams::FLEET);
        let vehicles = fleet
            .iter()
            .enumerate()
            .map(|(id, &(capacity, cost_per_km))| Vehicle {
                id,
                home: homes.gen_range(0..topology.num_cities()),
                capacity,
                cost_per_km,
            })
            .collect();
        Ok(Self {
            format_version: INSTANCE_FORMAT_VERSION,
            topology: topology_name.to_string(),
            vehicles,
            tasks,
        })
    }

    pub fn company(&self, topology: &Topology) -> Result<Company, ModelError> {
        let c = Company::new(0, self.vehicles.clone())?;
        c.check_cities(topology.num_cities())?;
        for t in &self.tasks {
            t.check()?;
            if t.pickup >= topology.num_cities() || t.delivery >= topology.num_cities() {
                return Err(ModelError::CityOutOfRange {
                    city: t.pickup.max(t.delivery),
                    cities: topology.num_cities(),
                });
            }
        }
        Ok(c)
    }
}
