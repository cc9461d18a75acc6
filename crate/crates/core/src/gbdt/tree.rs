//! Second-order regression trees grown by exact greedy split search.
//!
//! Each node keeps, for every feature, its rows in ascending feature order.
//! Splitting a node stably partitions those lists, so the sort happens once
//! per training run instead of once per node.

use serde::{Deserialize, Serialize};

use super::{ExecMode, TrainConfig};
use crate::dataset::Dataset;

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Nodes below this many (rows x features) are always searched sequentially.
#[cfg(feature = "parallel")]
const PARALLEL_MIN_WORK: usize = 1 << 14;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    /// Rows with `x[feature] < threshold` go left, everything else right.
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        weight: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionTree {
    nodes: Vec<Node>,
}

impl RegressionTree {
    pub fn leaf(weight: f64) -> Self {
        Self {
            nodes: vec![Node::Leaf { weight }],
        }
    }

    /// Checks child indices and acyclicity; node 0 is the root.
    pub fn from_nodes(nodes: Vec<Node>) -> Result<Self, String> {
        let tree = Self { nodes };
        tree.validate()?;
        Ok(tree)
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Longest root-to-leaf path, counted in edges.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, left).max(walk(nodes, right)),
            }
        }
        walk(&self.nodes, 0)
    }

    /// Index of the leaf reached by `row`.
    #[inline]
    pub fn leaf_index(&self, row: &[f64]) -> usize {
        let mut i = 0;
        loop {
            match self.nodes[i] {
                Node::Leaf { .. } => return i,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[feature] < threshold {
                        left
                    } else {
                        right
                    };
                }
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.nodes[self.leaf_index(row)] {
            Node::Leaf { weight } => weight,
            Node::Split { .. } => unreachable!("leaf_index always stops at a leaf"),
        }
    }

    pub(crate) fn max_feature(&self) -> Option<usize> {
        self.nodes
            .iter()
            .filter_map(|n| match n {
                Node::Split { feature, .. } => Some(*feature),
                Node::Leaf { .. } => None,
            })
            .max()
    }

    pub(crate) fn validate(&self) -> Result<(), String> {
        if self.nodes.is_empty() {
            return Err("tree has no nodes".into());
        }
        let mut seen = vec![false; self.nodes.len()];
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            if seen[i] {
                return Err(format!("node {i} reachable twice"));
            }
            seen[i] = true;
            match &self.nodes[i] {
                Node::Leaf { weight } if !weight.is_finite() => {
                    return Err(format!("leaf {i} has non-finite weight"));
                }
                Node::Leaf { .. } => {}
                Node::Split {
                    threshold,
                    left,
                    right,
                    ..
                } => {
                    if threshold.is_nan() {
                        return Err(format!("split {i} has NaN threshold"));
                    }
                    for &c in [left, right] {
                        if c >= self.nodes.len() || c <= i {
                            return Err(format!("split {i} has invalid child {c}"));
                        }
                        stack.push(c);
                    }
                }
            }
        }
        if let Some(i) = seen.iter().position(|s| !s) {
            return Err(format!("node {i} unreachable from root"));
        }
        Ok(())
    }
}

/// Row indices of every feature column in ascending value order (ties by row).
#[derive(Debug, Clone)]
pub(crate) struct SortedColumns {
    columns: Vec<Vec<u32>>,
}

impl SortedColumns {
    pub(crate) fn new(data: &Dataset, exec: ExecMode) -> Self {
        let n = data.n_rows() as u32;
        let sort_column = |j: usize| {
            let mut idx: Vec<u32> = (0..n).collect();
            idx.sort_by(|&a, &b| {
                data.value(a as usize, j)
                    .total_cmp(&data.value(b as usize, j))
                    .then(a.cmp(&b))
            });
            idx
        };
        let features = 0..data.n_features();
        let columns = match exec {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => features.into_par_iter().map(sort_column).collect(),
            _ => features.map(sort_column).collect(),
        };
        Self { columns }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

/// Gradient statistics shared by every node of one tree.
struct Grower<'a> {
    data: &'a Dataset,
    gradients: &'a [f64],
    hessians: &'a [f64],
    config: &'a TrainConfig,
    nodes: Vec<Node>,
}

/// `x / 2 + y / 2` cannot overflow; fall back to the upper value when the
/// midpoint collapses onto the lower one.
fn split_threshold(lower: f64, upper: f64) -> f64 {
    let mid = lower / 2.0 + upper / 2.0;
    if mid > lower && mid <= upper {
        mid
    } else {
        upper
    }
}

impl<'a> Grower<'a> {
    fn leaf_weight(&self, g: f64, h: f64) -> f64 {
        -g / (h + self.config.lambda)
    }

    fn score(&self, g: f64, h: f64) -> f64 {
        g * g / (h + self.config.lambda)
    }

    /// Best split of one feature column; earliest (lowest) threshold wins ties.
    fn best_for_feature(
        &self,
        feature: usize,
        rows: &[u32],
        g_total: f64,
        h_total: f64,
    ) -> Option<Candidate> {
        let parent = self.score(g_total, h_total);
        // Splits of a homogeneous node can show rounding-level gain.
        let min_gain = 1e-12 * parent.abs();
        let mcw = self.config.min_child_weight;
        let mut best: Option<Candidate> = None;
        let (mut gl, mut hl) = (0.0, 0.0);
        for w in rows.windows(2) {
            let (i, next) = (w[0] as usize, w[1] as usize);
            gl += self.gradients[i];
            hl += self.hessians[i];
            let (v, v_next) = (self.data.value(i, feature), self.data.value(next, feature));
            if v >= v_next {
                continue;
            }
            let (gr, hr) = (g_total - gl, h_total - hl);
            if hl < mcw || hr < mcw {
                continue;
            }
            let gain = 0.5 * (self.score(gl, hl) + self.score(gr, hr) - parent);
            if gain > min_gain && best.is_none_or(|b| gain > b.gain) {
                best = Some(Candidate {
                    gain,
                    feature,
                    threshold: split_threshold(v, v_next),
                });
            }
        }
        best
    }

    fn best_split(&self, columns: &[Vec<u32>], g: f64, h: f64) -> Option<Candidate> {
        let search = |j: usize| self.best_for_feature(j, &columns[j], g, h);
        let per_feature: Vec<Option<Candidate>> = match self.exec_for(columns) {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => (0..columns.len()).into_par_iter().map(search).collect(),
            _ => (0..columns.len()).map(search).collect(),
        };
        // Reduce in feature order: strict improvement keeps the lower index on ties.
        per_feature
            .into_iter()
            .flatten()
            .fold(None, |best: Option<Candidate>, c| match best {
                Some(b) if c.gain <= b.gain => Some(b),
                _ => Some(c),
            })
    }

    #[allow(unused_variables)]
    fn exec_for(&self, columns: &[Vec<u32>]) -> ExecMode {
        #[cfg(feature = "parallel")]
        {
            let work = columns.first().map_or(0, Vec::len) * columns.len();
            if self.config.exec == ExecMode::Parallel && work >= PARALLEL_MIN_WORK {
                return ExecMode::Parallel;
            }
        }
        ExecMode::Sequential
    }

    fn partition(
        &self,
        columns: Vec<Vec<u32>>,
        split: Candidate,
    ) -> (Vec<Vec<u32>>, Vec<Vec<u32>>) {
        let goes_left = |i: u32| self.data.value(i as usize, split.feature) < split.threshold;
        let exec = self.exec_for(&columns);
        let part = |col: Vec<u32>| -> (Vec<u32>, Vec<u32>) {
            col.into_iter().partition(|&i| goes_left(i))
        };
        let halves: Vec<(Vec<u32>, Vec<u32>)> = match exec {
            #[cfg(feature = "parallel")]
            ExecMode::Parallel => columns.into_par_iter().map(part).collect(),
            _ => columns.into_iter().map(part).collect(),
        };
        halves.into_iter().unzip()
    }

    /// Grows the subtree for `columns` and returns its node index.
    fn grow(&mut self, columns: Vec<Vec<u32>>, depth: usize) -> usize {
        let (g, h) = columns[0].iter().fold((0.0, 0.0), |(g, h), &i| {
            (
                g + self.gradients[i as usize],
                h + self.hessians[i as usize],
            )
        });
        let index = self.nodes.len();
        self.nodes.push(Node::Leaf {
            weight: self.leaf_weight(g, h),
        });
        if depth >= self.config.max_depth || columns[0].len() < 2 {
            return index;
        }
        let Some(split) = self.best_split(&columns, g, h) else {
            return index;
        };
        let (left_cols, right_cols) = self.partition(columns, split);
        let left = self.grow(left_cols, depth + 1);
        let right = self.grow(right_cols, depth + 1);
        self.nodes[index] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        index
    }
}

pub(crate) fn grow_tree(
    gradients: &[f64],
    hessians: &[f64],
    data: &Dataset,
    sorted: &SortedColumns,
    config: &TrainConfig,
) -> RegressionTree {
    let mut grower = Grower {
        data,
        gradients,
        hessians,
        config,
        nodes: Vec::new(),
    };
    grower.grow(sorted.columns.clone(), 0);
    RegressionTree {
        nodes: grower.nodes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn data(rows: &[Vec<f64>]) -> Dataset {
        let d = rows[0].len();
        Dataset::from_rows(
            rows,
            vec![0.0; rows.len()],
            (0..d).map(|j| format!("x{j}")).collect(),
        )
        .unwrap()
    }

    fn config(max_depth: usize, lambda: f64, min_child_weight: f64) -> TrainConfig {
        TrainConfig {
            max_depth,
            lambda,
            min_child_weight,
            ..TrainConfig::default()
        }
    }

    fn build(g: &[f64], h: &[f64], d: &Dataset, c: &TrainConfig) -> RegressionTree {
        grow_tree(g, h, d, &SortedColumns::new(d, c.exec), c)
    }

    #[test]
    fn homogeneous_gradients_give_a_single_leaf() {
        let d = data(&[vec![1.0], vec![2.0], vec![3.0], vec![4.0]]);
        let g = [0.7; 4];
        let h = [1.0; 4];
        let tree = build(&g, &h, &d, &config(6, 0.0, 0.0));
        assert_eq!(tree.nodes().len(), 1);
        assert_eq!(tree.predict_row(&[2.5]), -0.7);
    }

    #[test]
    fn zero_depth_forces_a_leaf() {
        let d = data(&[vec![1.0], vec![2.0], vec![3.0]]);
        let g = [1.0, -2.0, 4.0];
        let h = [1.0, 1.0, 2.0];
        let tree = build(&g, &h, &d, &config(0, 1.0, 0.0));
        assert_eq!(tree.nodes(), &[Node::Leaf { weight: -3.0 / 5.0 }]);
    }

    #[test]
    fn separable_clusters_split_on_the_informative_feature() {
        // Feature 1 is noise ordered against the gradient sign pattern.
        let d = data(&[
            vec![0.0, 0.3],
            vec![0.1, 0.1],
            vec![5.0, 0.2],
            vec![5.1, 0.0],
        ]);
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        // Hand enumeration with lambda = 0: feature 0 between 0.1 and 5.0 gives
        // 0.5 * (4/2 + 4/2 - 0) = 2. Every other split scores at most
        // 0.5 * (1/1 + 1/3) = 0.667, e.g. rows {3} | {1, 2, 0} on feature 1.
        let tree = build(&g, &h, &d, &config(1, 0.0, 0.0));
        match tree.nodes()[0] {
            Node::Split {
                feature, threshold, ..
            } => {
                assert_eq!(feature, 0);
                assert_eq!(threshold, 0.1 / 2.0 + 5.0 / 2.0);
            }
            ref other => panic!("expected split, got {other:?}"),
        }
        assert_eq!(tree.predict_row(&[0.0, 0.0]), 1.0);
        assert_eq!(tree.predict_row(&[9.0, 0.0]), -1.0);
    }

    #[test]
    fn singleton_leaf_weight_is_exact() {
        let d = data(&[vec![0.0], vec![1.0]]);
        let g = [0.3, -1.7];
        let h = [0.9, 2.2];
        let tree = build(&g, &h, &d, &config(3, 0.5, 0.0));
        assert_eq!(tree.predict_row(&[0.0]), -0.3 / (0.9 + 0.5));
        assert_eq!(tree.predict_row(&[1.0]), 1.7 / (2.2 + 0.5));
    }

    #[test]
    fn min_child_weight_blocks_small_children() {
        let d = data(&[vec![0.0], vec![1.0], vec![2.0]]);
        let g = [-5.0, 1.0, 1.0];
        let h = [1.0; 3];
        let tree = build(&g, &h, &d, &config(3, 0.0, 2.0));
        assert_eq!(tree.nodes().len(), 1);
    }

    #[test]
    fn equal_gain_prefers_lower_feature_index() {
        // Two identical columns: the split must land on feature 0.
        let d = data(&[
            vec![0.0, 0.0],
            vec![1.0, 1.0],
            vec![2.0, 2.0],
            vec![3.0, 3.0],
        ]);
        let g = [-1.0, -1.0, 1.0, 1.0];
        let h = [1.0; 4];
        let tree = build(&g, &h, &d, &config(1, 0.0, 0.0));
        assert!(matches!(tree.nodes()[0], Node::Split { feature: 0, .. }));
    }

    #[test]
    fn ties_in_feature_value_are_never_separated() {
        let d = data(&[vec![1.0], vec![1.0], vec![1.0], vec![2.0]]);
        let g = [-1.0, 1.0, -1.0, 3.0];
        let h = [1.0; 4];
        let tree = build(&g, &h, &d, &config(4, 0.0, 0.0));
        assert_eq!(tree.predict_row(&[1.0]), 1.0 / 3.0);
        // value equal to threshold goes right
        if let Node::Split { threshold, .. } = tree.nodes()[0] {
            assert_eq!(tree.predict_row(&[threshold]), -3.0);
        }
    }

    #[test]
    fn threshold_between_adjacent_floats() {
        let a = 1.0f64;
        let b = f64::from_bits(a.to_bits() + 1);
        let t = split_threshold(a, b);
        assert!(a < t && t <= b);
        assert_eq!(split_threshold(-1e308, 1e308), 0.0);
    }

    #[test]
    fn validate_rejects_broken_trees() {
        assert!(RegressionTree::from_nodes(vec![]).is_err());
        assert!(RegressionTree::from_nodes(vec![Node::Split {
            feature: 0,
            threshold: 0.0,
            left: 1,
            right: 5
        }])
        .is_err());
        assert!(RegressionTree::from_nodes(vec![
            Node::Split {
                feature: 0,
                threshold: 0.0,
                left: 1,
                right: 1
            },
            Node::Leaf { weight: 0.0 }
        ])
        .is_err());
        assert!(RegressionTree::from_nodes(vec![Node::Leaf { weight: f64::NAN }]).is_err());
    }
}
