//! Regression-tree ensembles: a random forest (bootstrap, best split over a
//! random √d feature subset) and extremely randomized trees (no bootstrap,
//! one random threshold per feature) used for feature importance.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Splitter {
    /// Best threshold over a random subset of √d features.
    Best,
    /// One uniform-random threshold per feature, all features considered.
    RandomThreshold,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_split: usize,
    pub bootstrap: bool,
    pub splitter: Splitter,
    pub seed: u64,
}

impl ForestParams {
    /// The benchmark forest: 200 trees, depth 10, at least 45 samples to split.
    pub fn random_forest(seed: u64) -> Self {
        Self {
            n_trees: 200,
            max_depth: 10,
            min_samples_split: 45,
            bootstrap: true,
            splitter: Splitter::Best,
            seed,
        }
    }

    pub fn extra_trees(n_trees: usize, seed: u64) -> Self {
        Self {
            n_trees,
            max_depth: 10,
            min_samples_split: 45,
            bootstrap: false,
            splitter: Splitter::RandomThreshold,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_trees < 1 {
            return Err(Error::InvalidParams("n_trees must be >= 1".into()));
        }
        if self.max_depth < 1 {
            return Err(Error::InvalidParams("max_depth must be >= 1".into()));
        }
        if self.min_samples_split < 2 {
            return Err(Error::InvalidParams("min_samples_split must be >= 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n_samples: usize,
        /// Sum-of-squares reduction achieved by this split.
        gain: f64,
    },
    Leaf {
        value: f64,
        n_samples: usize,
    },
}

/// Nodes stored flat; node 0 is the root. Rows with `x[feature] <= threshold`
/// go left.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTree {
    pub nodes: Vec<Node>,
}

impl DecisionTree {
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        let mut k = 0;
        loop {
            match &self.nodes[k] {
                Node::Leaf { value, .. } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => k = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(t: &DecisionTree, k: usize) -> usize {
            match &t.nodes[k] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(t, *left).max(walk(t, *right)),
            }
        }
        walk(self, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf { .. })).count()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    pub params: ForestParams,
    pub column_names: Vec<String>,
    pub trees: Vec<DecisionTree>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub names: Vec<String>,
    pub importance: Vec<f64>,
    /// No tree contains a split; all importances are zero.
    pub no_splits: bool,
}

impl FeatureImportance {
    pub fn get(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|j| self.importance[j])
    }

    /// Names ordered by decreasing importance (ties keep column order).
    pub fn ranked(&self) -> Vec<(String, f64)> {
        let mut v: Vec<(String, f64)> = self.names.iter().cloned().zip(self.importance.iter().copied()).collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1));
        v
    }
}

struct Builder<'a> {
    cols: &'a [&'a [f64]],
    y: &'a [f64],
    params: &'a ForestParams,
    n_candidates: usize,
    nodes: Vec<Node>,
    buf: Vec<(f64, f64)>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

fn sse(y: &[f64], idx: &[usize]) -> (f64, f64) {
    let n = idx.len() as f64;
    let mean = idx.iter().map(|&i| y[i]).sum::<f64>() / n;
    let s = idx.iter().map(|&i| (y[i] - mean).powi(2)).sum();
    (mean, s)
}

impl Builder<'_> {
    fn grow(&mut self, idx: &mut [usize], depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let (mean, parent_sse) = sse(self.y, idx);
        let at = self.nodes.len();
        self.nodes.push(Node::Leaf {
            value: mean,
            n_samples: idx.len(),
        });
        if depth >= self.params.max_depth || idx.len() < self.params.min_samples_split || parent_sse <= 0.0 {
            return at;
        }
        let Some(best) = self.find_split(idx, parent_sse, rng) else {
            return at;
        };
        let col = self.cols[best.feature];
        let mut mid = 0;
        for k in 0..idx.len() {
            if col[idx[k]] <= best.threshold {
                idx.swap(k, mid);
                mid += 1;
            }
        }
        if mid == 0 || mid == idx.len() {
            return at;
        }
        let (l, r) = idx.split_at_mut(mid);
        // keep a stable order inside children so results don't depend on swaps
        l.sort_unstable();
        r.sort_unstable();
        let left = self.grow(l, depth + 1, rng);
        let right = self.grow(r, depth + 1, rng);
        self.nodes[at] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left,
            right,
            n_samples: idx.len(),
            gain: best.gain,
        };
        at
    }

    fn find_split(&mut self, idx: &[usize], parent_sse: f64, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let d = self.cols.len();
        let features: Vec<usize> = match self.params.splitter {
            Splitter::Best if self.n_candidates < d => {
                let mut f = sample(rng, d, self.n_candidates).into_vec();
                f.sort_unstable();
                f
            }
            _ => (0..d).collect(),
        };
        let mut best: Option<Candidate> = None;
        for f in features {
            let cand = match self.params.splitter {
                Splitter::Best => self.best_threshold(f, idx, parent_sse),
                Splitter::RandomThreshold => self.random_threshold(f, idx, parent_sse, rng),
            };
            if let Some(c) = cand {
                let better = match &best {
                    None => true,
                    Some(b) => c.gain > b.gain,
                };
                if better && c.gain > 0.0 {
                    best = Some(c);
                }
            }
        }
        best
    }

    fn best_threshold(&mut self, f: usize, idx: &[usize], parent_sse: f64) -> Option<Candidate> {
        let col = self.cols[f];
        self.buf.clear();
        self.buf.extend(idx.iter().map(|&i| (col[i], self.y[i])));
        self.buf.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));
        let n = self.buf.len();
        let total: f64 = self.buf.iter().map(|p| p.1).sum();
        let total_sq: f64 = self.buf.iter().map(|p| p.1 * p.1).sum();
        let (mut sl, mut sql) = (0.0, 0.0);
        let mut best: Option<Candidate> = None;
        for k in 0..n - 1 {
            let (x, v) = self.buf[k];
            sl += v;
            sql += v * v;
            let next = self.buf[k + 1].0;
            if next <= x {
                continue;
            }
            let nl = (k + 1) as f64;
            let nr = (n - k - 1) as f64;
            let sr = total - sl;
            let sqr = total_sq - sql;
            let child = (sql - sl * sl / nl) + (sqr - sr * sr / nr);
            let gain = parent_sse - child;
            if best.as_ref().map_or(true, |b| gain > b.gain) {
                best = Some(Candidate {
                    feature: f,
                    threshold: x + (next - x) / 2.0,
                    gain,
                });
            }
        }
        best
    }

    fn random_threshold(&self, f: usize, idx: &[usize], parent_sse: f64, rng: &mut ChaCha8Rng) -> Option<Candidate> {
        let col = self.cols[f];
        let (lo, hi) = idx
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &i| (lo.min(col[i]), hi.max(col[i])));
        if !(hi > lo) {
            return None;
        }
        let t = rng.random_range(lo..hi);
        let (mut nl, mut sl, mut sql) = (0usize, 0.0, 0.0);
        let (mut sr, mut sqr) = (0.0, 0.0);
        for &i in idx {
            let v = self.y[i];
            if col[i] <= t {
                nl += 1;
                sl += v;
                sql += v * v;
            } else {
                sr += v;
                sqr += v * v;
            }
        }
        let nr = idx.len() - nl;
        if nl == 0 || nr == 0 {
            return None;
        }
        let child = (sql - sl * sl / nl as f64) + (sqr - sr * sr / nr as f64);
        Some(Candidate {
            feature: f,
            threshold: t,
            gain: parent_sse - child,
        })
    }
}

/// Per-tree generator: the forest seed, on a stream chosen by tree index.
fn tree_rng(seed: u64, tree: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tree as u64);
    rng
}

pub fn fit_forest(m: &FeatureMatrix, y: &[f64], params: &ForestParams) -> Result<Forest> {
    params.validate()?;
    let n = m.n_rows();
    if y.len() != n {
        return Err(Error::DimensionMismatch(format!("{n} rows but {} targets", y.len())));
    }
    if n < params.min_samples_split || n == 0 {
        return Err(Error::TooFewSamples {
            needed: params.min_samples_split,
            got: n,
        });
    }
    if m.n_cols() == 0 {
        return Err(Error::DimensionMismatch("forest needs at least one feature".into()));
    }
    let cols: Vec<&[f64]> = (0..m.n_cols()).map(|j| m.values(j)).collect();
    let d = cols.len();
    let n_candidates = ((d as f64).sqrt().floor() as usize).max(1);
    let trees = (0..params.n_trees)
        .map(|t| {
            let mut rng = tree_rng(params.seed, t);
            let mut idx: Vec<usize> = if params.bootstrap {
                let mut v: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
                v.sort_unstable();
                v
            } else {
                (0..n).collect()
            };
            let mut b = Builder {
                cols: &cols,
                y,
                params,
                n_candidates,
                nodes: Vec::new(),
                buf: Vec::with_capacity(n),
            };
            b.grow(&mut idx, 0, &mut rng);
            DecisionTree { nodes: b.nodes }
        })
        .collect();
    Ok(Forest {
        params: params.clone(),
        column_names: m.names(),
        trees,
    })
}

/// Mean of the per-tree predictions.
pub fn predict_forest(forest: &Forest, m: &FeatureMatrix) -> Result<Vec<f64>> {
    let names = m.names();
    if names != forest.column_names {
        return Err(Error::ColumnMismatch {
            expected: forest.column_names.clone(),
            actual: names,
        });
    }
    let k = forest.trees.len() as f64;
    Ok((0..m.n_rows())
        .map(|r| {
            let row = m.row(r);
            forest.trees.iter().map(|t| t.predict_row(&row)).sum::<f64>() / k
        })
        .collect())
}

/// Total variance reduction credited to each feature, summed over all trees
/// and normalized to sum to one.
pub fn feature_importance(forest: &Forest) -> FeatureImportance {
    let mut raw = vec![0.0; forest.column_names.len()];
    for t in &forest.trees {
        for node in &t.nodes {
            if let Node::Split { feature, gain, .. } = node {
                raw[*feature] += gain.max(0.0);
            }
        }
    }
    let total: f64 = raw.iter().sum();
    let no_splits = total <= 0.0;
    if !no_splits {
        raw.iter_mut().for_each(|v| *v /= total);
    }
    FeatureImportance {
        names: forest.column_names.clone(),
        importance: raw,
        no_splits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::ColumnKind;
    use crate::series::TimePoint;
    use chrono::NaiveDate;

    fn matrix(cols: Vec<(&str, Vec<f64>)>) -> FeatureMatrix {
        let n = cols[0].1.len();
        let s = TimePoint::day_start(NaiveDate::from_ymd_opt(2020, 1, 1).unwrap());
        let mut m = FeatureMatrix::new((0..n as i64).map(|i| s.offset(i)).collect());
        for (name, v) in cols {
            m.push(name, ColumnKind::Continuous, v).unwrap();
        }
        m
    }

    fn noisy_problem(n: usize, seed: u64) -> (FeatureMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let c: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
        let y = (0..n)
            .map(|i| (3.0 * a[i]).sin() + b[i] * b[i] + 0.1 * rng.random_range(-1.0..1.0))
            .collect();
        (matrix(vec![("a", a), ("b", b), ("c", c)]), y)
    }

    fn mse(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64
    }

    #[test]
    fn constant_target_gives_single_leaves() {
        let (m, _) = noisy_problem(100, 1);
        let y = vec![4.5; 100];
        let f = fit_forest(&m, &y, &ForestParams::random_forest(3)).unwrap();
        assert!(f.trees.iter().all(|t| t.nodes == vec![Node::Leaf { value: 4.5, n_samples: 100 }]));
        let imp = feature_importance(&f);
        assert!(imp.no_splits);
        assert!(imp.importance.iter().all(|&v| v == 0.0));
        assert!(predict_forest(&f, &m).unwrap().iter().all(|&v| v == 4.5));
    }

    #[test]
    fn binary_feature_stump() {
        let x: Vec<f64> = (0..10).map(|i| (i % 2) as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| if v == 0.0 { 1.0 } else { 5.0 }).collect();
        let m = matrix(vec![("x", x)]);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 1,
            min_samples_split: 2,
            bootstrap: false,
            splitter: Splitter::Best,
            seed: 0,
        };
        let f = fit_forest(&m, &y, &params).unwrap();
        let t = &f.trees[0];
        match &t.nodes[0] {
            Node::Split {
                feature,
                threshold,
                left,
                right,
                ..
            } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.5);
                assert_eq!(t.nodes[*left], Node::Leaf { value: 1.0, n_samples: 5 });
                assert_eq!(t.nodes[*right], Node::Leaf { value: 5.0, n_samples: 5 });
            }
            other => panic!("expected split, got {other:?}"),
        }
    }

    #[test]
    fn benchmark_defaults_echoed() {
        let (m, y) = noisy_problem(60, 2);
        let f = fit_forest(&m, &y, &ForestParams::random_forest(1)).unwrap();
        assert_eq!(f.params.n_trees, 200);
        assert_eq!(f.params.max_depth, 10);
        assert_eq!(f.params.min_samples_split, 45);
        assert_eq!(f.trees.len(), 200);
    }

    #[test]
    fn too_few_samples_and_invalid_params() {
        let (m, y) = noisy_problem(44, 2);
        assert!(matches!(
            fit_forest(&m, &y, &ForestParams::random_forest(1)),
            Err(Error::TooFewSamples { needed: 45, got: 44 })
        ));
        let bad = ForestParams {
            min_samples_split: 1,
            ..ForestParams::random_forest(1)
        };
        assert!(matches!(fit_forest(&m, &y, &bad), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn column_mismatch_on_predict() {
        let (m, y) = noisy_problem(80, 2);
        let f = fit_forest(&m, &y, &ForestParams::extra_trees(3, 1)).unwrap();
        let other = m.select(&["b".into(), "a".into(), "c".into()]).unwrap();
        assert!(matches!(predict_forest(&f, &other), Err(Error::ColumnMismatch { .. })));
    }

    #[test]
    fn fully_grown_noiseless_tree_interpolates() {
        let x: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let y: Vec<f64> = x.iter().map(|v| v * v - 3.0 * v).collect();
        let m = matrix(vec![("x", x)]);
        let params = ForestParams {
            n_trees: 1,
            max_depth: 20,
            min_samples_split: 2,
            bootstrap: false,
            splitter: Splitter::Best,
            seed: 0,
        };
        let f = fit_forest(&m, &y, &params).unwrap();
        let p = predict_forest(&f, &m).unwrap();
        for (a, b) in p.iter().zip(&y) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn forest_is_mean_of_its_trees() {
        let (m, y) = noisy_problem(200, 5);
        let f = fit_forest(&m, &y, &ForestParams { n_trees: 2, ..ForestParams::random_forest(8) }).unwrap();
        let p = predict_forest(&f, &m).unwrap();
        for r in 0..m.n_rows() {
            let row = m.row(r);
            let by_hand = (f.trees[0].predict_row(&row) + f.trees[1].predict_row(&row)) / 2.0;
            assert_eq!(p[r], by_hand);
        }
    }

    #[test]
    fn deterministic_under_seed() {
        let (m, y) = noisy_problem(300, 6);
        for params in [ForestParams::random_forest(4), ForestParams::extra_trees(20, 4)] {
            let a = fit_forest(&m, &y, &params).unwrap();
            let b = fit_forest(&m, &y, &params).unwrap();
            assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
        }
    }

    #[test]
    fn structural_limits_respected() {
        let (m, y) = noisy_problem(600, 7);
        let params = ForestParams {
            n_trees: 10,
            max_depth: 4,
            min_samples_split: 30,
            ..ForestParams::random_forest(2)
        };
        let f = fit_forest(&m, &y, &params).unwrap();
        for t in &f.trees {
            assert!(t.depth() <= 4);
            for node in &t.nodes {
                if let Node::Split { n_samples, .. } = node {
                    assert!(*n_samples >= 30);
                }
            }
        }
    }

    #[test]
    fn deeper_forest_fits_training_data_at_least_as_well() {
        let (m, y) = noisy_problem(500, 9);
        let deep = ForestParams {
            n_trees: 20,
            ..ForestParams::random_forest(1)
        };
        let shallow = ForestParams { max_depth: 2, ..deep.clone() };
        let e_deep = mse(&predict_forest(&fit_forest(&m, &y, &deep).unwrap(), &m).unwrap(), &y);
        let e_shallow = mse(&predict_forest(&fit_forest(&m, &y, &shallow).unwrap(), &m).unwrap(), &y);
        assert!(e_deep <= e_shallow);
    }

    #[test]
    fn importances_sum_to_one() {
        let (m, y) = noisy_problem(400, 11);
        let imp = feature_importance(&fit_forest(&m, &y, &ForestParams::extra_trees(30, 1)).unwrap());
        assert!(!imp.no_splits);
        assert!((imp.importance.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(imp.get("c").unwrap() < imp.get("a").unwrap());
    }
}
