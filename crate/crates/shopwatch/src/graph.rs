//! Skeleton graph construction: the fixed physical adjacency over COCO17
//! joints (optionally extended with a virtual center node), symmetric
//! normalization, and the relation stack consumed by the graph convolutions.

use numkit::Array;

use crate::pose::KEYPOINTS;
use crate::{Error, Result};

/// COCO17 joint names, in keypoint order.
pub const JOINT_NAMES: [&str; 17] = [
    "nose",
    "left_eye",
    "right_eye",
    "left_ear",
    "right_ear",
    "left_shoulder",
    "right_shoulder",
    "left_elbow",
    "right_elbow",
    "left_wrist",
    "right_wrist",
    "left_hip",
    "right_hip",
    "left_knee",
    "right_knee",
    "left_ankle",
    "right_ankle",
];

/// Bone list over COCO17 joints (0-indexed pairs), the standard 2-D skeleton
/// edge set: limbs, torso, and head linkage.
pub const COCO17_BONES: [(usize, usize); 19] = [
    (15, 13), // left ankle - left knee
    (13, 11), // left knee - left hip
    (16, 14), // right ankle - right knee
    (14, 12), // right knee - right hip
    (11, 12), // hips
    (5, 11),  // left shoulder - left hip
    (6, 12),  // right shoulder - right hip
    (5, 6),   // shoulders
    (5, 7),   // left shoulder - left elbow
    (6, 8),   // right shoulder - right elbow
    (7, 9),   // left elbow - left wrist
    (8, 10),  // right elbow - right wrist
    (1, 2),   // eyes
    (0, 1),   // nose - left eye
    (0, 2),   // nose - right eye
    (1, 3),   // left eye - left ear
    (2, 4),   // right eye - right ear
    (3, 5),   // left ear - left shoulder
    (4, 6),   // right ear - right shoulder
];

/// Index of the virtual center node when V = 18.
pub const CENTER_NODE: usize = KEYPOINTS;

/// Edges attaching the virtual center node: both shoulders and both hips.
pub const CENTER_EDGES: [(usize, usize); 4] = [
    (CENTER_NODE, 5),
    (CENTER_NODE, 6),
    (CENTER_NODE, 11),
    (CENTER_NODE, 12),
];

/// Binary symmetric physical adjacency with zero diagonal for V ∈ {17, 18}.
/// V = 18 appends the virtual center node wired to shoulders and hips.
pub fn build_physical_adjacency(v: usize) -> Result<Array> {
    let edges = physical_edges(v)?;
    adjacency_from_edges(v, &edges)
}

/// The edge list behind [`build_physical_adjacency`].
pub fn physical_edges(v: usize) -> Result<Vec<(usize, usize)>> {
    match v {
        17 => Ok(COCO17_BONES.to_vec()),
        18 => {
            let mut edges = COCO17_BONES.to_vec();
            edges.extend_from_slice(&CENTER_EDGES);
            Ok(edges)
        }
        other => Err(Error::Config(format!(
            "unsupported node count {other} (expected 17 or 18)"
        ))),
    }
}

fn adjacency_from_edges(v: usize, edges: &[(usize, usize)]) -> Result<Array> {
    let mut a = Array::zeros(&[v, v]);
    for &(i, j) in edges {
        if i >= v || j >= v || i == j {
            return Err(Error::Config(format!(
                "invalid edge ({i}, {j}) for {v}-node graph"
            )));
        }
        a.set2(i, j, 1.0);
        a.set2(j, i, 1.0);
    }
    Ok(a)
}

/// Symmetric normalization with self-loops: Â = D^{-1/2} (A + I) D^{-1/2},
/// where D is the degree matrix of A + I. Self-loops keep every degree
/// positive, so the result is always defined.
pub fn normalize_adjacency(a: &Array) -> Result<Array> {
    let s = a.shape();
    if s.len() != 2 || s[0] != s[1] {
        return Err(Error::Config(format!(
            "normalize_adjacency expects a square matrix, got {s:?}"
        )));
    }
    let v = s[0];
    let mut with_loops = a.clone();
    for i in 0..v {
        with_loops.set2(i, i, with_loops.at2(i, i) + 1.0);
    }
    let mut inv_sqrt_deg = vec![0.0; v];
    for i in 0..v {
        let deg: f64 = (0..v).map(|j| with_loops.at2(i, j)).sum();
        inv_sqrt_deg[i] = 1.0 / deg.sqrt();
    }
    let mut out = Array::zeros(&[v, v]);
    for i in 0..v {
        for j in 0..v {
            out.set2(i, j, inv_sqrt_deg[i] * with_loops.at2(i, j) * inv_sqrt_deg[j]);
        }
    }
    Ok(out)
}

/// The relation matrices a graph-convolution layer sums over.
///
/// Slot 1 is the frozen normalized physical adjacency. Slot 2, when enabled,
/// is a freely learned V×V parameter shared across all inputs; it passes
/// through a row-wise softmax before use and is initialized to zeros (uniform
/// rows). Slot 3, when enabled, is computed per input window from node
/// feature similarity inside the layer itself.
#[derive(Debug, Clone)]
pub struct RelationStack {
    pub physical: Array,
    pub learned_init: Option<Array>,
    pub instance: bool,
}

impl RelationStack {
    pub fn active_slots(&self) -> usize {
        1 + usize::from(self.learned_init.is_some()) + usize::from(self.instance)
    }
}

/// Skeleton graph: node count, physical adjacency, and relation config.
#[derive(Debug, Clone)]
pub struct SkeletonGraph {
    v: usize,
    physical: Array,
    normalized: Array,
    relations: usize,
    edges: Vec<(usize, usize)>,
}

impl SkeletonGraph {
    /// Standard skeleton for V ∈ {17, 18} with R relation slots (1..=3).
    pub fn new(v: usize, relations: usize) -> Result<Self> {
        Self::from_edges(v, physical_edges(v)?, relations)
    }

    /// Graph over an explicit edge list (toy skeletons, custom datasets).
    pub fn from_edges(v: usize, edges: Vec<(usize, usize)>, relations: usize) -> Result<Self> {
        if !(1..=3).contains(&relations) {
            return Err(Error::Config(format!(
                "relation count {relations} out of range (expected 1..=3)"
            )));
        }
        let physical = adjacency_from_edges(v, &edges)?;
        let normalized = normalize_adjacency(&physical)?;
        Ok(SkeletonGraph {
            v,
            physical,
            normalized,
            relations,
            edges,
        })
    }

    pub fn v(&self) -> usize {
        self.v
    }

    pub fn relations(&self) -> usize {
        self.relations
    }

    pub fn physical(&self) -> &Array {
        &self.physical
    }

    pub fn normalized(&self) -> &Array {
        &self.normalized
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Build the relation stack for this graph.
    pub fn relation_stack(&self) -> RelationStack {
        RelationStack {
            physical: self.normalized.clone(),
            learned_init: (self.relations >= 2).then(|| Array::zeros(&[self.v, self.v])),
            instance: self.relations >= 3,
        }
    }

    /// Serialized edge list (for checkpoints and the `graph dump` command).
    pub fn edges_string(&self) -> String {
        self.edges
            .iter()
            .map(|(a, b)| format!("{a}-{b}"))
            .collect::<Vec<_>>()
            .join(",")
    }

    pub fn parse_edges(s: &str) -> Result<Vec<(usize, usize)>> {
        s.split(',')
            .map(|pair| {
                let (a, b) = pair
                    .split_once('-')
                    .ok_or_else(|| Error::Config(format!("bad edge '{pair}'")))?;
                Ok((
                    a.parse()
                        .map_err(|_| Error::Config(format!("bad edge '{pair}'")))?,
                    b.parse()
                        .map_err(|_| Error::Config(format!("bad edge '{pair}'")))?,
                ))
            })
            .collect()
    }
}
