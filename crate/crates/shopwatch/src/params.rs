//! Named parameter sets shared by the two model stages.

use std::collections::BTreeMap;

use numkit::checkpoint::Checkpoint;
use numkit::{Array, NodeId, Tape};
use sha2::{Digest, Sha256};

use crate::Result;

/// Trainable tensors keyed by a stable dotted name.
#[derive(Debug, Clone, Default)]
pub struct ParamSet {
    map: BTreeMap<String, Array>,
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Array) {
        self.map.insert(name.into(), value);
    }

    pub fn get(&self, name: &str) -> &Array {
        self.map
            .get(name)
            .unwrap_or_else(|| panic!("missing parameter '{name}'"))
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn numel(&self) -> usize {
        self.map.values().map(Array::numel).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Array)> {
        self.map.iter()
    }

    pub fn as_map(&self) -> &BTreeMap<String, Array> {
        &self.map
    }

    pub fn as_map_mut(&mut self) -> &mut BTreeMap<String, Array> {
        &mut self.map
    }

    /// Insert every parameter as a tape leaf, returning name → node handles.
    pub fn register(&self, tape: &mut Tape) -> BTreeMap<String, NodeId> {
        self.map
            .iter()
            .map(|(k, v)| (k.clone(), tape.leaf(v.clone())))
            .collect()
    }

    /// Collect gradients for registered parameters after a backward pass.
    /// Parameters the loss never touched are skipped.
    pub fn collect_grads(
        tape: &Tape,
        ids: &BTreeMap<String, NodeId>,
    ) -> BTreeMap<String, Array> {
        ids.iter()
            .filter_map(|(name, id)| tape.grad(*id).map(|g| (name.clone(), g.clone())))
            .collect()
    }

    /// SHA-256 over names, shapes, and raw value bits; stable across runs.
    pub fn checksum(&self) -> String {
        checksum_params(self.map.iter().map(|(k, v)| (k.as_str(), v)))
    }

    /// Checksum restricted to parameters whose name passes `keep`.
    pub fn checksum_filtered(&self, keep: impl Fn(&str) -> bool) -> String {
        checksum_params(
            self.map
                .iter()
                .filter(|(k, _)| keep(k))
                .map(|(k, v)| (k.as_str(), v)),
        )
    }

    pub fn to_checkpoint(&self, meta: BTreeMap<String, String>) -> Checkpoint {
        Checkpoint {
            meta,
            params: self.map.clone(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self> {
        Ok(ParamSet {
            map: ck.params.clone(),
        })
    }
}

fn checksum_params<'a>(entries: impl Iterator<Item = (&'a str, &'a Array)>) -> String {
    let mut hasher = Sha256::new();
    for (name, arr) in entries {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
        for &d in arr.shape() {
            hasher.update((d as u64).to_le_bytes());
        }
        for &v in arr.data() {
            hasher.update(v.to_bits().to_le_bytes());
        }
    }
    hex(&hasher.finalize())
}

/// Lowercase hex of a byte slice.
pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
