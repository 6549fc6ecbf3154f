//! A parsed model: topology, security declarations and analysis settings.

use std::collections::BTreeMap;

use crate::config::AnalysisConfig;
use crate::lattice::{Category, Lattice, LevelTriple, SecEnv};
use crate::syntax::{normalize, Component, Network};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Model {
    pub lattice: Lattice,
    /// Every category atom the model mentions.
    pub atoms: Category,
    pub network: Network,
    /// Declared initial security environment.
    pub env: SecEnv,
    /// Declared final environment, when the model states one.
    pub signature: Option<SecEnv>,
    /// Channel name to the cache line it communicates through.
    pub channels: BTreeMap<String, String>,
    pub var_init: BTreeMap<String, i64>,
    /// Initial cache content of every declared line (`None` is the flushed marker).
    pub cache_init: BTreeMap<String, Option<i64>>,
    pub config: AnalysisConfig,
}

impl Model {
    pub fn components(&self) -> Vec<Component> {
        normalize(&self.network)
    }

    /// The configured observation triple, defaulting to `(⊥, all atoms, all atoms)`.
    pub fn obs(&self) -> LevelTriple {
        self.config.obs.clone().unwrap_or_else(|| {
            LevelTriple::new(self.lattice.bottom(), self.atoms.clone(), self.atoms.clone())
        })
    }

    pub fn channel_line(&self, chan: &str) -> Option<&str> {
        self.channels.get(chan).map(String::as_str)
    }

    /// The declared final environment, or the initial one when none is declared.
    pub fn signature_or_initial(&self) -> &SecEnv {
        self.signature.as_ref().unwrap_or(&self.env)
    }
}
