//! Name-keyed registry of interchangeable reduction and clustering
//! strategies. The harvesting loop only ever talks to the traits; which
//! implementation runs is picked by name from configuration.

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::cluster::{Clusterer, KMeansClusterer, WardClusterer};
use crate::dimred::{NoReduction, Pca, Reducer, TruncatedSvd};
use crate::error::{IchError, Result};

#[derive(Clone, Default)]
pub struct StrategyRegistry {
    reducers: BTreeMap<String, Arc<dyn Reducer>>,
    clusterers: BTreeMap<String, Arc<dyn Clusterer>>,
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self::default()
    }

    /// `pca`, `truncated-svd` (alias `svd`), `none`; `ward` (alias
    /// `ward-ac`), `kmeans` (alias `k-means`).
    pub fn builtin() -> Self {
        let mut reg = Self::empty();
        reg.register_reducer(Arc::new(Pca), &[]);
        reg.register_reducer(Arc::new(TruncatedSvd), &["svd"]);
        reg.register_reducer(Arc::new(NoReduction), &[]);
        reg.register_clusterer(Arc::new(WardClusterer), &["ward-ac"]);
        reg.register_clusterer(Arc::new(KMeansClusterer::default()), &["k-means"]);
        reg
    }

    /// Registers under the strategy's own name plus any aliases. A later
    /// registration under the same name replaces the earlier one.
    pub fn register_reducer(&mut self, reducer: Arc<dyn Reducer>, aliases: &[&str]) {
        self.reducers
            .insert(reducer.name().to_string(), Arc::clone(&reducer));
        for alias in aliases {
            self.reducers
                .insert(alias.to_string(), Arc::clone(&reducer));
        }
    }

    pub fn register_clusterer(&mut self, clusterer: Arc<dyn Clusterer>, aliases: &[&str]) {
        self.clusterers
            .insert(clusterer.name().to_string(), Arc::clone(&clusterer));
        for alias in aliases {
            self.clusterers
                .insert(alias.to_string(), Arc::clone(&clusterer));
        }
    }

    pub fn reducer(&self, name: &str) -> Result<Arc<dyn Reducer>> {
        self.reducers
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| IchError::UnknownStrategy {
                name: name.to_string(),
                known: join_keys(&self.reducers),
            })
    }

    pub fn clusterer(&self, name: &str) -> Result<Arc<dyn Clusterer>> {
        self.clusterers
            .get(&name.to_ascii_lowercase())
            .cloned()
            .ok_or_else(|| IchError::UnknownStrategy {
                name: name.to_string(),
                known: join_keys(&self.clusterers),
            })
    }

    pub fn reducer_names(&self) -> Vec<&str> {
        self.reducers.keys().map(String::as_str).collect()
    }

    pub fn clusterer_names(&self) -> Vec<&str> {
        self.clusterers.keys().map(String::as_str).collect()
    }
}

fn join_keys<V>(map: &BTreeMap<String, V>) -> String {
    map.keys().cloned().collect::<Vec<_>>().join(", ")
}
