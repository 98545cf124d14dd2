//! Experiment configuration.
//!
//! ```toml
//! seed = 7
//! threads = 1
//! out = "runs/cat"
//!
//! [[system]]
//! id = "rot"
//! space = "torus2"
//! map = { kind = "rotation", alpha = 0.41421356 }
//!
//! [[system]]
//! id = "spliced"
//! space = "torus2"
//! map = { kind = "cat" }
//! transforms = [{ op = "splice", outer = "rot", k = 3 }]
//!
//! [query]
//! n_max = 12
//! eps = [0.1, 0.05, 0.025]
//! net = 256
//! ```
//!
//! Transforms run top to bottom, each acting on the result of the previous
//! one. Systems referenced by a transform must be defined earlier in the file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use nadyn_core::conjugacy::ConjugacyFamily;
use nadyn_core::entropy::{EstimateParams, LawScope, DEFAULT_SATURATION};
use nadyn_core::space::{jittered_net, uniform_net, Net, SpaceModel};
use nadyn_core::system::{
    conjugate_system, constant_family, gathering, gathering_at, inverse_system, perturb, splice, switch, MapSpec,
    SystemSpec,
};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub threads: usize,
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub system: Vec<SystemConfig>,
    pub query: Option<QueryConfig>,
    #[serde(default)]
    pub checks: ChecksConfig,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub id: String,
    pub space: SpaceConfig,
    pub map: MapConfig,
    #[serde(default)]
    pub transforms: Vec<Transform>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(untagged)]
pub enum SpaceConfig {
    Named(String),
    Finite {
        labels: Vec<String>,
        distances: Vec<Vec<f64>>,
    },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum MapConfig {
    Identity,
    Rotation { alpha: f64 },
    Cat,
    Toral { matrix: [[i64; 2]; 2] },
    Permutation { perm: Vec<usize> },
    Bump { amplitude: f64, phase: f64 },
}

#[derive(Clone, Debug, Deserialize)]
#[serde(tag = "op", rename_all = "lowercase", deny_unknown_fields)]
pub enum Transform {
    /// This system on `|i| ≤ k`, `outer` elsewhere.
    Splice {
        outer: String,
        k: u64,
    },
    /// This system for `i < at`, `after` from `at` on.
    Switch {
        after: String,
        at: i64,
    },
    Gather {
        stride: Option<u64>,
        anchors: Option<Vec<i64>>,
    },
    Perturb {
        amplitude: f64,
        seed: Option<u64>,
    },
    /// Conjugation by seeded bump maps over `window`.
    Conjugate {
        amplitude: f64,
        seed: Option<u64>,
        window: [i64; 2],
    },
    Inverse,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QueryConfig {
    #[serde(default = "default_indices")]
    pub i: Vec<i64>,
    pub n_max: usize,
    pub eps: Vec<f64>,
    pub net: usize,
    #[serde(default)]
    pub jitter: bool,
    pub tail: Option<usize>,
    pub saturation: Option<f64>,
    #[serde(default)]
    pub timings: bool,
    /// Systems to estimate; all of them when absent.
    pub systems: Option<Vec<String>>,
}

fn default_indices() -> Vec<i64> {
    vec![0]
}

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChecksConfig {
    pub sandwich: Option<SandwichCheck>,
    pub constancy: Option<ConstancyCheck>,
    pub gathering: Option<GatheringCheck>,
    pub splice: Option<SpliceCheck>,
    pub inverse: Option<InverseCheck>,
    pub perturb: Option<PerturbCheck>,
    pub conjugacy: Option<ConjugacyCheck>,
    #[serde(rename = "cover-laws")]
    pub cover_laws: Option<CoverLawsCheck>,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SandwichCheck {
    pub systems: Vec<String>,
    /// Net resolutions; nets larger than the exact limit are rejected.
    pub nets: Vec<usize>,
    #[serde(default = "sandwich_eps")]
    pub eps: Vec<f64>,
    #[serde(default = "five")]
    pub n_max: usize,
}

fn sandwich_eps() -> Vec<f64> {
    vec![0.2, 0.4]
}

fn five() -> usize {
    5
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstancyCheck {
    pub system: String,
    #[serde(default = "constancy_indices")]
    pub i: Vec<i64>,
    #[serde(default = "tol_005")]
    pub tolerance: f64,
}

fn constancy_indices() -> Vec<i64> {
    vec![0, 5]
}

fn tol_005() -> f64 {
    0.05
}

fn tol_008() -> f64 {
    0.08
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GatheringCheck {
    pub system: String,
    #[serde(default = "two")]
    pub stride: u64,
    #[serde(default = "six")]
    pub n_max: usize,
    #[serde(default = "tol_015")]
    pub relative_tolerance: f64,
}

fn two() -> u64 {
    2
}

fn six() -> usize {
    6
}

fn tol_015() -> f64 {
    0.15
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpliceCheck {
    pub system: String,
    pub reference: String,
    #[serde(default = "tol_008")]
    pub tolerance: f64,
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InverseCheck {
    pub system: String,
    #[serde(default = "zero_band")]
    pub forward_max: f64,
    #[serde(default = "cat_band")]
    pub inverse_band: [f64; 2],
}

fn zero_band() -> f64 {
    0.02
}

fn cat_band() -> [f64; 2] {
    [0.82, 1.06]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PerturbCheck {
    pub system: String,
    #[serde(default = "small_amplitude")]
    pub amplitude: f64,
    #[serde(default = "three_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "tol_005")]
    pub tolerance: f64,
}

fn small_amplitude() -> f64 {
    1e-3
}

fn three_seeds() -> Vec<u64> {
    vec![1, 2, 3]
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConjugacyCheck {
    pub system: String,
    #[serde(default = "bump_amplitude")]
    pub amplitude: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "tol_008")]
    pub tolerance: f64,
    #[serde(default = "residual_tol")]
    pub residual: f64,
}

fn bump_amplitude() -> f64 {
    0.2
}

fn residual_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CoverLawsCheck {
    /// A system on a finite model.
    pub system: String,
    #[serde(default = "four")]
    pub max_sets: usize,
    #[serde(default = "two_usize")]
    pub partner_sets: usize,
    #[serde(default = "three")]
    pub max_shift: usize,
    #[serde(default = "four")]
    pub n_max: usize,
}

fn four() -> usize {
    4
}

fn three() -> usize {
    3
}

fn two_usize() -> usize {
    2
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        let mut seen = std::collections::BTreeSet::new();
        for s in &cfg.system {
            if !seen.insert(s.id.as_str()) {
                return Err(CliError::Config(format!("duplicate system id {}", s.id)));
            }
        }
        if let Some(q) = &cfg.query {
            q.validate()?;
        }
        Ok(cfg)
    }

    /// Builds every system in file order.
    pub fn systems(&self) -> Result<BTreeMap<String, SystemSpec>, CliError> {
        let mut built: BTreeMap<String, SystemSpec> = BTreeMap::new();
        for s in &self.system {
            let sys = s.build(&built, self.seed)?;
            built.insert(s.id.clone(), sys);
        }
        Ok(built)
    }

    pub fn query(&self) -> Result<&QueryConfig, CliError> {
        self.query
            .as_ref()
            .ok_or_else(|| CliError::Config("missing [query] section".into()))
    }
}

fn lookup<'a>(built: &'a BTreeMap<String, SystemSpec>, id: &str) -> Result<&'a SystemSpec, CliError> {
    built
        .get(id)
        .ok_or_else(|| CliError::Config(format!("system {id} is not defined before its use")))
}

impl SpaceConfig {
    pub fn build(&self) -> Result<SpaceModel, CliError> {
        match self {
            SpaceConfig::Named(name) => match name.as_str() {
                "circle" => Ok(SpaceModel::Circle),
                "torus2" => Ok(SpaceModel::Torus2),
                other => Err(CliError::Config(format!("unknown space {other}"))),
            },
            SpaceConfig::Finite { labels, distances } => Ok(SpaceModel::finite(labels.clone(), distances.clone())?),
        }
    }
}

impl MapConfig {
    fn build(&self) -> Result<MapSpec, CliError> {
        Ok(match self {
            MapConfig::Identity => MapSpec::Identity,
            MapConfig::Rotation { alpha } => MapSpec::rotation(*alpha)?,
            MapConfig::Cat => MapSpec::cat(),
            MapConfig::Toral { matrix } => MapSpec::toral_auto(*matrix)?,
            MapConfig::Permutation { perm } => MapSpec::permutation(perm.clone())?,
            MapConfig::Bump { amplitude, phase } => MapSpec::bump(MapSpec::Identity, *amplitude, *phase)?,
        })
    }
}

impl SystemConfig {
    fn build(&self, built: &BTreeMap<String, SystemSpec>, seed: u64) -> Result<SystemSpec, CliError> {
        let space = self.space.build()?;
        let mut sys = constant_family(self.map.build()?, &space)?;
        for t in &self.transforms {
            sys = match t {
                Transform::Splice { outer, k } => splice(&sys, lookup(built, outer)?, *k)?,
                Transform::Switch { after, at } => switch(&sys, lookup(built, after)?, *at)?,
                Transform::Gather { stride, anchors } => match (stride, anchors) {
                    (Some(n), None) => gathering(&sys, *n)?,
                    (None, Some(a)) => gathering_at(&sys, a.clone())?,
                    _ => return Err(CliError::Config("gather needs exactly one of stride, anchors".into())),
                },
                Transform::Perturb { amplitude, seed: s } => perturb(&sys, *amplitude, s.unwrap_or(seed))?,
                Transform::Conjugate {
                    amplitude,
                    seed: s,
                    window,
                } => {
                    let h = ConjugacyFamily::bumps(&space, *amplitude, s.unwrap_or(seed), window[0]..=window[1])?;
                    conjugate_system(&sys, &h)?
                }
                Transform::Inverse => inverse_system(&sys),
            };
        }
        sys.description = self.id.clone();
        Ok(sys)
    }
}

impl QueryConfig {
    fn validate(&self) -> Result<(), CliError> {
        if self.i.is_empty() {
            return Err(CliError::Config("query needs at least one index i".into()));
        }
        if self.eps.windows(2).any(|w| w[1] >= w[0]) {
            return Err(CliError::Config("eps ladder must be strictly decreasing".into()));
        }
        Ok(())
    }

    pub fn params(&self) -> EstimateParams {
        EstimateParams {
            eps_ladder: self.eps.clone(),
            n_max: self.n_max,
            tail: self.tail,
            saturation: self.saturation.unwrap_or(DEFAULT_SATURATION),
            timings: self.timings,
        }
    }

    /// The query net on `space`; density against the ladder is checked here.
    pub fn net(&self, space: &SpaceModel, seed: u64) -> Result<Net, CliError> {
        let net = if self.jitter {
            jittered_net(space, self.net, seed)?
        } else {
            uniform_net(space, self.net)?
        };
        if let Some(&finest) = self.eps.last() {
            if net.density > finest / 2.0 + 1e-12 {
                return Err(CliError::Config(format!(
                    "net density {} exceeds half the finest radius {finest}",
                    net.density
                )));
            }
        }
        Ok(net)
    }
}

impl CoverLawsCheck {
    pub fn scope(&self) -> LawScope {
        LawScope {
            max_sets: self.max_sets,
            partner_sets: self.partner_sets,
            max_shift: self.max_shift,
            n_max: self.n_max,
        }
    }
}
