//! Approximate nearest-neighbor search over a support set: a forest of
//! random-projection trees with exact cosine rescoring.
//!
//! Each tree splits a node's items by the sign of their (normalized)
//! projection onto the difference of two randomly chosen member items, until
//! nodes hold at most `leaf_capacity` items. Queries walk all trees with a
//! shared priority queue ordered by hyperplane margin, collect candidates up
//! to the search budget, then rescore candidates with the same cosine the
//! exact scan uses — so with a budget covering the whole support the result
//! is bit-identical to exact k-NN.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{RankError, Result};
use crate::knn::{aggregate, sort_neighbors, Neighbor, Prediction, SupportSet};
use crate::ranking::{cosine_raw, dot, Vector};

const INDEX_MAGIC: &[u8; 5] = b"RSAN1";
const MAX_SPLIT_ATTEMPTS: usize = 3;

/// Forest shape and query budget.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AnnConfig {
    pub tree_count: usize,
    pub leaf_capacity: usize,
    /// Unique candidates inspected per query before rescoring. The
    /// effective budget for a top-k query is `max(search_budget, 64 * k)`.
    pub search_budget: usize,
    pub seed: u64,
}

impl Default for AnnConfig {
    fn default() -> Self {
        AnnConfig {
            tree_count: 16,
            leaf_capacity: 32,
            search_budget: 2048,
            seed: 42,
        }
    }
}

impl AnnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tree_count == 0 {
            return Err(RankError::invalid("tree_count", "must be >= 1"));
        }
        if self.leaf_capacity == 0 {
            return Err(RankError::invalid("leaf_capacity", "must be >= 1"));
        }
        if self.search_budget == 0 {
            return Err(RankError::invalid("search_budget", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf {
        items: Vec<u32>,
    },
    Internal {
        direction: Vec<f64>,
        left: u32,
        right: u32,
    },
}

#[derive(Debug, Clone, PartialEq)]
struct Tree {
    nodes: Vec<Node>,
    root: u32,
}

/// A built forest bound to its support set's embeddings.
#[derive(Debug, Clone)]
pub struct AnnIndex {
    config: AnnConfig,
    dim: usize,
    ids: Vec<u64>,
    years: Vec<i32>,
    embeddings: Vec<Vec<f64>>,
    year_span: (i32, i32),
    trees: Vec<Tree>,
}

struct TreeBuilder<'a> {
    normalized: &'a [Vec<f64>],
    leaf_capacity: usize,
    nodes: Vec<Node>,
}

impl TreeBuilder<'_> {
    fn build(&mut self, mut items: Vec<u32>, rng: &mut ChaCha8Rng) -> u32 {
        if items.len() > self.leaf_capacity {
            for _ in 0..MAX_SPLIT_ATTEMPTS {
                let a = items[rng.random_range(0..items.len())] as usize;
                let b = items[rng.random_range(0..items.len())] as usize;
                if a == b {
                    continue;
                }
                let direction: Vec<f64> = self.normalized[a]
                    .iter()
                    .zip(&self.normalized[b])
                    .map(|(x, y)| x - y)
                    .collect();
                if dot(&direction, &direction).sqrt() < 1e-12 {
                    continue; // coincident picks, e.g. duplicated points
                }
                let (mut left, mut right) = (Vec::new(), Vec::new());
                for &it in &items {
                    if dot(&self.normalized[it as usize], &direction) > 0.0 {
                        right.push(it);
                    } else {
                        left.push(it);
                    }
                }
                if left.is_empty() || right.is_empty() {
                    continue;
                }
                let left_node = self.build(left, rng);
                let right_node = self.build(right, rng);
                self.nodes.push(Node::Internal {
                    direction,
                    left: left_node,
                    right: right_node,
                });
                return (self.nodes.len() - 1) as u32;
            }
            // degenerate region (e.g. all items identical): give up splitting
        }
        items.sort_unstable();
        self.nodes.push(Node::Leaf { items });
        (self.nodes.len() - 1) as u32
    }
}

/// Build a random-projection forest over `support`; deterministic per seed.
pub fn build_ann(support: &SupportSet, config: &AnnConfig) -> Result<AnnIndex> {
    config.validate()?;
    let n = support.len();
    let dim = support.dim();
    let ids: Vec<u64> = support.items().iter().map(|i| i.id).collect();
    let years: Vec<i32> = support.items().iter().map(|i| i.year).collect();
    let embeddings: Vec<Vec<f64>> = support
        .items()
        .iter()
        .map(|i| i.embedding.as_slice().to_vec())
        .collect();
    let normalized: Vec<Vec<f64>> = embeddings
        .iter()
        .map(|e| {
            let norm = dot(e, e).sqrt();
            e.iter().map(|v| v / norm).collect()
        })
        .collect();

    let trees: Vec<Tree> = (0..config.tree_count)
        .into_par_iter()
        .map(|t| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(t as u64));
            let mut builder = TreeBuilder {
                normalized: &normalized,
                leaf_capacity: config.leaf_capacity,
                nodes: Vec::new(),
            };
            let root = builder.build((0..n as u32).collect(), &mut rng);
            Tree {
                nodes: builder.nodes,
                root,
            }
        })
        .collect();

    Ok(AnnIndex {
        config: *config,
        dim,
        ids,
        years,
        embeddings,
        year_span: support.year_span(),
        trees,
    })
}

struct Visit {
    priority: f64,
    tree: u32,
    node: u32,
}

impl PartialEq for Visit {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Visit {}
impl PartialOrd for Visit {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Visit {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority
            .total_cmp(&other.priority)
            .then(self.tree.cmp(&other.tree))
            .then(self.node.cmp(&other.node))
    }
}

impl AnnIndex {
    pub fn config(&self) -> &AnnConfig {
        &self.config
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// Gather up to `budget` unique candidate positions across all trees,
    /// most-confident hyperplane sides first.
    fn candidates(&self, query_normalized: &[f64], budget: usize) -> Vec<u32> {
        let mut heap: BinaryHeap<Visit> = self
            .trees
            .iter()
            .enumerate()
            .map(|(t, tree)| Visit {
                priority: f64::INFINITY,
                tree: t as u32,
                node: tree.root,
            })
            .collect();
        let mut seen = vec![false; self.ids.len()];
        let mut out = Vec::with_capacity(budget.min(self.ids.len()));
        while let Some(visit) = heap.pop() {
            if out.len() >= budget {
                break;
            }
            match &self.trees[visit.tree as usize].nodes[visit.node as usize] {
                Node::Leaf { items } => {
                    for &pos in items {
                        if !seen[pos as usize] {
                            seen[pos as usize] = true;
                            out.push(pos);
                        }
                    }
                }
                Node::Internal { direction, left, right } => {
                    let margin = dot(query_normalized, direction);
                    let (near, far) = if margin > 0.0 {
                        (*right, *left)
                    } else {
                        (*left, *right)
                    };
                    heap.push(Visit {
                        priority: visit.priority.min(margin.abs()),
                        tree: visit.tree,
                        node: near,
                    });
                    heap.push(Visit {
                        priority: visit.priority.min(-margin.abs()),
                        tree: visit.tree,
                        node: far,
                    });
                }
            }
        }
        out
    }

    /// Top-k approximate neighbors: candidate gathering followed by exact
    /// cosine rescoring in canonical (similarity desc, id asc) order.
    pub fn query(&self, query: &Vector, k: usize) -> Result<Vec<Neighbor>> {
        Ok(self
            .query_scored(query, k)?
            .into_iter()
            .map(|(id, similarity, _)| Neighbor { id, similarity })
            .collect())
    }

    fn query_scored(&self, query: &Vector, k: usize) -> Result<Vec<(u64, f64, i32)>> {
        if k == 0 {
            return Err(RankError::invalid("k", "must be >= 1"));
        }
        if query.dim() != self.dim {
            return Err(RankError::DimensionMismatch {
                left: query.dim(),
                right: self.dim,
            });
        }
        let qnorm = query.norm();
        if qnorm == 0.0 {
            return Err(RankError::ZeroNorm);
        }
        let query_normalized: Vec<f64> = query.as_slice().iter().map(|v| v / qnorm).collect();
        let budget = self.config.search_budget.max(64 * k);
        let mut scored: Vec<(u64, f64, i32)> = self
            .candidates(&query_normalized, budget)
            .into_iter()
            .map(|pos| {
                let p = pos as usize;
                let s = cosine_raw(query.as_slice(), &self.embeddings[p])?;
                Ok((self.ids[p], s, self.years[p]))
            })
            .collect::<Result<Vec<_>>>()?;
        sort_neighbors(&mut scored);
        scored.truncate(k);
        Ok(scored)
    }

    /// Year prediction over the index's own support labels.
    pub fn predict(&self, query: &Vector, k: usize, weighted: bool) -> Result<Prediction> {
        let scored = self.query_scored(query, k)?;
        if scored.is_empty() {
            return Err(RankError::Empty("ann candidates"));
        }
        let k_clamped = k > self.ids.len();
        Ok(aggregate(&scored, weighted, self.year_span, k_clamped))
    }

    /// Serialize the forest (`RSAN1`, little-endian): parameters, the id
    /// array, and per-tree node arrays. Embeddings are not stored; loading
    /// rebinds them from the support set.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| RankError::io(path, e))?;
        let mut w = BufWriter::new(file);
        let io = |e| RankError::io(path, e);
        w.write_all(INDEX_MAGIC).map_err(io)?;
        w.write_u32::<LittleEndian>(self.config.tree_count as u32).map_err(io)?;
        w.write_u32::<LittleEndian>(self.config.leaf_capacity as u32).map_err(io)?;
        w.write_u32::<LittleEndian>(self.config.search_budget as u32).map_err(io)?;
        w.write_u64::<LittleEndian>(self.config.seed).map_err(io)?;
        w.write_u32::<LittleEndian>(self.dim as u32).map_err(io)?;
        w.write_u32::<LittleEndian>(self.ids.len() as u32).map_err(io)?;
        for &id in &self.ids {
            w.write_u64::<LittleEndian>(id).map_err(io)?;
        }
        for tree in &self.trees {
            w.write_u32::<LittleEndian>(tree.nodes.len() as u32).map_err(io)?;
            w.write_u32::<LittleEndian>(tree.root).map_err(io)?;
            for node in &tree.nodes {
                match node {
                    Node::Leaf { items } => {
                        w.write_u8(0).map_err(io)?;
                        w.write_u32::<LittleEndian>(items.len() as u32).map_err(io)?;
                        for &it in items {
                            w.write_u32::<LittleEndian>(it).map_err(io)?;
                        }
                    }
                    Node::Internal { direction, left, right } => {
                        w.write_u8(1).map_err(io)?;
                        w.write_u32::<LittleEndian>(*left).map_err(io)?;
                        w.write_u32::<LittleEndian>(*right).map_err(io)?;
                        for &d in direction {
                            w.write_f64::<LittleEndian>(d).map_err(io)?;
                        }
                    }
                }
            }
        }
        w.flush().map_err(io)?;
        Ok(())
    }

    /// Load a forest and rebind it to `support`, which must carry the same
    /// items in the same order as at build time.
    pub fn load(path: &Path, support: &SupportSet) -> Result<Self> {
        let file = File::open(path).map_err(|e| RankError::io(path, e))?;
        let mut r = BufReader::new(file);
        let perr = |loc: &str, e: std::io::Error| RankError::parse(path, loc, e.to_string());
        let mut magic = [0u8; 5];
        r.read_exact(&mut magic).map_err(|e| perr("header", e))?;
        if &magic != INDEX_MAGIC {
            return Err(RankError::parse(
                path,
                "header",
                format!("bad magic {magic:?}, expected {INDEX_MAGIC:?}"),
            ));
        }
        let tree_count = r.read_u32::<LittleEndian>().map_err(|e| perr("header", e))? as usize;
        let leaf_capacity = r.read_u32::<LittleEndian>().map_err(|e| perr("header", e))? as usize;
        let search_budget = r.read_u32::<LittleEndian>().map_err(|e| perr("header", e))? as usize;
        let seed = r.read_u64::<LittleEndian>().map_err(|e| perr("header", e))?;
        let dim = r.read_u32::<LittleEndian>().map_err(|e| perr("header", e))? as usize;
        let count = r.read_u32::<LittleEndian>().map_err(|e| perr("header", e))? as usize;
        if dim != support.dim() || count != support.len() {
            return Err(RankError::Validation(format!(
                "index built for {count} items of dim {dim}, support has {} of dim {}",
                support.len(),
                support.dim()
            )));
        }
        let mut ids = Vec::with_capacity(count);
        for _ in 0..count {
            ids.push(r.read_u64::<LittleEndian>().map_err(|e| perr("ids", e))?);
        }
        let support_ids: Vec<u64> = support.items().iter().map(|i| i.id).collect();
        if ids != support_ids {
            return Err(RankError::Validation(
                "index ids do not match the support set (same items, same order, required)"
                    .to_string(),
            ));
        }
        let mut trees = Vec::with_capacity(tree_count);
        for t in 0..tree_count {
            let loc = format!("tree {t}");
            let node_count =
                r.read_u32::<LittleEndian>().map_err(|e| perr(&loc, e))? as usize;
            let root = r.read_u32::<LittleEndian>().map_err(|e| perr(&loc, e))?;
            let mut nodes = Vec::with_capacity(node_count);
            for _ in 0..node_count {
                let tag = r.read_u8().map_err(|e| perr(&loc, e))?;
                match tag {
                    0 => {
                        let len =
                            r.read_u32::<LittleEndian>().map_err(|e| perr(&loc, e))? as usize;
                        let mut items = Vec::with_capacity(len);
                        for _ in 0..len {
                            let pos = r.read_u32::<LittleEndian>().map_err(|e| perr(&loc, e))?;
                            if pos as usize >= count {
                                return Err(RankError::parse(
                                    path,
                                    loc.clone(),
                                    format!("leaf position {pos} out of range"),
                                ));
                            }
                            items.push(pos);
                        }
                        nodes.push(Node::Leaf { items });
                    }
                    1 => {
                        let left = r.read_u32::<LittleEndian>().map_err(|e| perr(&loc, e))?;
                        let right = r.read_u32::<LittleEndian>().map_err(|e| perr(&loc, e))?;
                        let mut direction = vec![0.0; dim];
                        for d in &mut direction {
                            *d = r.read_f64::<LittleEndian>().map_err(|e| perr(&loc, e))?;
                        }
                        nodes.push(Node::Internal { direction, left, right });
                    }
                    other => {
                        return Err(RankError::parse(
                            path,
                            loc.clone(),
                            format!("unknown node tag {other}"),
                        ))
                    }
                }
            }
            if root as usize >= nodes.len() {
                return Err(RankError::parse(path, loc, "root out of range"));
            }
            trees.push(Tree { nodes, root });
        }
        let embeddings: Vec<Vec<f64>> = support
            .items()
            .iter()
            .map(|i| i.embedding.as_slice().to_vec())
            .collect();
        Ok(AnnIndex {
            config: AnnConfig {
                tree_count,
                leaf_capacity,
                search_budget,
                seed,
            },
            dim,
            years: support.items().iter().map(|i| i.year).collect(),
            year_span: support.year_span(),
            ids,
            embeddings,
            trees,
        })
    }

    #[cfg(test)]
    fn max_leaf_len(&self) -> usize {
        self.trees
            .iter()
            .flat_map(|t| &t.nodes)
            .filter_map(|n| match n {
                Node::Leaf { items } => Some(items.len()),
                Node::Internal { .. } => None,
            })
            .max()
            .unwrap_or(0)
    }

    /// Every item must be reachable in every tree.
    #[cfg(test)]
    fn reachable_everywhere(&self) -> bool {
        self.trees.iter().all(|tree| {
            let mut seen = vec![false; self.ids.len()];
            let mut stack = vec![tree.root];
            while let Some(n) = stack.pop() {
                match &tree.nodes[n as usize] {
                    Node::Leaf { items } => {
                        for &i in items {
                            seen[i as usize] = true;
                        }
                    }
                    Node::Internal { left, right, .. } => {
                        stack.push(*left);
                        stack.push(*right);
                    }
                }
            }
            seen.iter().all(|&s| s)
        })
    }
}
