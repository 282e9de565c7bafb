//! Static bounding-box index over parcel footprints.
//!
//! Bulk-loaded once with sort-tile-recursive packing and never mutated.
//! Queries answer at the box level only: exactly the entries whose boxes
//! meet the query box under closed-interval overlap. Exact geometry is the
//! caller's job.

use std::collections::{BTreeSet, HashSet};

use thiserror::Error;

use crate::geometry::{BoundingBox, Point};
use crate::ingest::ParcelFootprint;

const NODE_CAPACITY: usize = 16;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum IndexError {
    #[error("duplicate parcel id {0:?}")]
    DuplicateId(String),
}

#[derive(Debug, Clone)]
struct Node {
    bbox: BoundingBox,
    /// Range into `order` for leaves, into `nodes` for branches.
    start: usize,
    end: usize,
    leaf: bool,
}

#[derive(Debug, Clone)]
pub struct FootprintIndex {
    ids: Vec<String>,
    boxes: Vec<BoundingBox>,
    /// Entry positions in leaf order.
    order: Vec<usize>,
    nodes: Vec<Node>,
    root: Option<usize>,
}

impl FootprintIndex {
    /// Positions returned by queries refer to the order of `footprints`.
    pub fn build(footprints: &[ParcelFootprint]) -> Result<Self, IndexError> {
        Self::from_entries(
            footprints
                .iter()
                .map(|f| (f.parcel_id.clone(), f.geometry.bounding_box())),
        )
    }

    pub fn from_entries(
        entries: impl IntoIterator<Item = (String, BoundingBox)>,
    ) -> Result<Self, IndexError> {
        let (ids, boxes): (Vec<String>, Vec<BoundingBox>) = entries.into_iter().unzip();
        let mut seen = HashSet::with_capacity(ids.len());
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(IndexError::DuplicateId(id.clone()));
            }
        }

        let mut order: Vec<usize> = (0..ids.len()).collect();
        let mut nodes = Vec::new();
        if order.is_empty() {
            return Ok(FootprintIndex {
                ids,
                boxes,
                order,
                nodes,
                root: None,
            });
        }

        str_sort(&mut order, &boxes);
        let mut level: Vec<usize> = order
            .chunks(NODE_CAPACITY)
            .enumerate()
            .map(|(i, chunk)| {
                let start = i * NODE_CAPACITY;
                nodes.push(Node {
                    bbox: union_of(chunk.iter().map(|&e| boxes[e])),
                    start,
                    end: start + chunk.len(),
                    leaf: true,
                });
                nodes.len() - 1
            })
            .collect();

        while level.len() > 1 {
            let node_boxes: Vec<BoundingBox> = nodes.iter().map(|n| n.bbox).collect();
            let mut sorted = level.clone();
            str_sort(&mut sorted, &node_boxes);
            // Children of one branch must be contiguous in `nodes`.
            let mut next = Vec::with_capacity(sorted.len().div_ceil(NODE_CAPACITY));
            for chunk in sorted.chunks(NODE_CAPACITY) {
                let start = nodes.len();
                for &child in chunk {
                    let copy = nodes[child].clone();
                    nodes.push(copy);
                }
                nodes.push(Node {
                    bbox: union_of(chunk.iter().map(|&c| node_boxes[c])),
                    start,
                    end: start + chunk.len(),
                    leaf: false,
                });
                next.push(nodes.len() - 1);
            }
            level = next;
        }

        Ok(FootprintIndex {
            ids,
            boxes,
            order,
            nodes,
            root: level.first().copied(),
        })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn id(&self, position: usize) -> &str {
        &self.ids[position]
    }

    pub fn entry_box(&self, position: usize) -> BoundingBox {
        self.boxes[position]
    }

    /// Positions of entries whose boxes meet `query`, ascending.
    pub fn box_candidates(&self, query: &BoundingBox) -> Vec<usize> {
        let mut out = Vec::new();
        let Some(root) = self.root else {
            return out;
        };
        let mut stack = vec![root];
        while let Some(n) = stack.pop() {
            let node = &self.nodes[n];
            if !node.bbox.intersects(query) {
                continue;
            }
            if node.leaf {
                out.extend(
                    self.order[node.start..node.end]
                        .iter()
                        .copied()
                        .filter(|&e| self.boxes[e].intersects(query)),
                );
            } else {
                stack.extend(node.start..node.end);
            }
        }
        out.sort_unstable();
        out
    }

    /// Positions of entries whose boxes meet the square `p ± radius`.
    pub fn point_candidates(&self, p: Point, radius: f64) -> Vec<usize> {
        self.box_candidates(&BoundingBox::around(p, radius.max(0.0)))
    }

    pub fn query_point(&self, p: Point, radius: f64) -> BTreeSet<&str> {
        self.point_candidates(p, radius)
            .into_iter()
            .map(|e| self.id(e))
            .collect()
    }

    pub fn query_box(&self, b: &BoundingBox) -> BTreeSet<&str> {
        self.box_candidates(b)
            .into_iter()
            .map(|e| self.id(e))
            .collect()
    }
}

fn union_of(mut boxes: impl Iterator<Item = BoundingBox>) -> BoundingBox {
    let first = boxes.next().expect("non-empty chunk");
    boxes.fold(first, |acc, b| acc.union(&b))
}

/// Sort-tile-recursive ordering: slabs by center x, then by center y inside
/// each slab. Ties fall back to position so the layout is deterministic.
fn str_sort(items: &mut [usize], boxes: &[BoundingBox]) {
    let leaves = items.len().div_ceil(NODE_CAPACITY);
    let slabs = (leaves as f64).sqrt().ceil().max(1.0) as usize;
    let slab_len = NODE_CAPACITY * leaves.div_ceil(slabs);
    let cx = |i: usize| boxes[i].min_x + boxes[i].max_x;
    let cy = |i: usize| boxes[i].min_y + boxes[i].max_y;
    items.sort_by(|&a, &b| cx(a).total_cmp(&cx(b)).then(a.cmp(&b)));
    for slab in items.chunks_mut(slab_len.max(1)) {
        slab.sort_by(|&a, &b| cy(a).total_cmp(&cy(b)).then(a.cmp(&b)));
    }
}
