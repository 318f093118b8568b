//! Bagged CART forest over the 24 structural features.
//!
//! Each tree is grown on a seeded bootstrap sample with greedy Gini splits
//! over every feature; thresholds are midpoints between consecutive distinct
//! values and a sample goes left when its value is `<=` the threshold. The
//! score of a feature vector is the mean phishing fraction of the leaves it
//! reaches.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::features::{FeatureVector, FEATURE_COUNT, FEATURE_NAMES};

pub const MODEL_SCHEMA: &str = "alfa-forest/1";
pub const DEFAULT_DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("need at least 2 training rows, got {0}")]
    InsufficientData(usize),
    #[error("training rows contain a single class")]
    SingleClassData,
    #[error("expected {FEATURE_COUNT} features, got {0}")]
    DimensionMismatch(usize),
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("model schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid hyperparameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Phishing,
    Legitimate,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Phishing => "phishing",
            Label::Legitimate => "legitimate",
        }
    }

    pub fn is_phishing(self) -> bool {
        self == Label::Phishing
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Label {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "phishing" | "1" => Ok(Label::Phishing),
            "legitimate" | "0" => Ok(Label::Legitimate),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TreeNode {
    Leaf {
        phishing_fraction: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: Box<TreeNode>,
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    fn score(&self, x: &[f64; FEATURE_COUNT]) -> f64 {
        let mut node = self;
        loop {
            match node {
                TreeNode::Leaf { phishing_fraction } => return *phishing_fraction,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        match self {
            TreeNode::Leaf { phishing_fraction } => {
                if !(0.0..=1.0).contains(phishing_fraction) {
                    return Err(ClassifierError::SchemaMismatch(format!(
                        "leaf fraction {phishing_fraction} outside [0,1]"
                    )));
                }
                Ok(())
            }
            TreeNode::Split {
                feature, left, right, ..
            } => {
                if *feature >= FEATURE_COUNT {
                    return Err(ClassifierError::SchemaMismatch(format!(
                        "feature index {feature}"
                    )));
                }
                left.validate()?;
                right.validate()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    pub schema: String,
    pub trees: Vec<TreeNode>,
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
    pub feature_names: Vec<String>,
    pub decision_threshold: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: Label,
    pub score: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainParams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub seed: u64,
}

impl Default for TrainParams {
    fn default() -> Self {
        TrainParams {
            n_trees: 100,
            max_depth: 6,
            seed: 42,
        }
    }
}

/// Column-major view of the training matrix.
struct TrainSet<'a> {
    rows: &'a [(FeatureVector, Label)],
}

impl TrainSet<'_> {
    fn x(&self, i: usize, f: usize) -> f64 {
        self.rows[i].0 .0[f]
    }

    fn y(&self, i: usize) -> bool {
        self.rows[i].1.is_phishing()
    }
}

fn gini(pos: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = pos as f64 / total as f64;
    2.0 * p * (1.0 - p)
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

fn best_split(data: &TrainSet, idx: &[usize]) -> Option<BestSplit> {
    let n = idx.len();
    let total_pos = idx.iter().filter(|&&i| data.y(i)).count();
    let mut best: Option<BestSplit> = None;
    let mut order: Vec<(f64, bool)> = Vec::with_capacity(n);
    for f in 0..FEATURE_COUNT {
        order.clear();
        order.extend(idx.iter().map(|&i| (data.x(i, f), data.y(i))));
        order.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut left_pos = 0usize;
        for k in 0..n - 1 {
            left_pos += order[k].1 as usize;
            let (lo, hi) = (order[k].0, order[k + 1].0);
            if lo == hi {
                continue;
            }
            let nl = k + 1;
            let nr = n - nl;
            let impurity = (nl as f64 * gini(left_pos, nl)
                + nr as f64 * gini(total_pos - left_pos, nr))
                / n as f64;
            if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                best = Some(BestSplit {
                    feature: f,
                    threshold: lo + (hi - lo) / 2.0,
                    impurity,
                });
            }
        }
    }
    best
}

fn grow(data: &TrainSet, idx: Vec<usize>, depth: usize, max_depth: usize) -> TreeNode {
    let pos = idx.iter().filter(|&&i| data.y(i)).count();
    let leaf = TreeNode::Leaf {
        phishing_fraction: if idx.is_empty() { 0.0 } else { pos as f64 / idx.len() as f64 },
    };
    if pos == 0 || pos == idx.len() || depth >= max_depth || idx.len() < 2 {
        return leaf;
    }
    let Some(split) = best_split(data, &idx) else {
        return leaf;
    };
    let (left, right): (Vec<usize>, Vec<usize>) = idx
        .into_iter()
        .partition(|&i| data.x(i, split.feature) <= split.threshold);
    TreeNode::Split {
        feature: split.feature,
        threshold: split.threshold,
        left: Box::new(grow(data, left, depth + 1, max_depth)),
        right: Box::new(grow(data, right, depth + 1, max_depth)),
    }
}

pub fn train(rows: &[(FeatureVector, Label)], params: TrainParams) -> Result<ForestModel, ClassifierError> {
    if rows.len() < 2 {
        return Err(ClassifierError::InsufficientData(rows.len()));
    }
    let phishing = rows.iter().filter(|r| r.1.is_phishing()).count();
    if phishing == 0 || phishing == rows.len() {
        return Err(ClassifierError::SingleClassData);
    }
    if params.n_trees == 0 {
        return Err(ClassifierError::InvalidParameter("n_trees must be >= 1".into()));
    }
    let data = TrainSet { rows };
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let n = rows.len();
    let trees = (0..params.n_trees)
        .map(|_| {
            let sample: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            grow(&data, sample, 0, params.max_depth)
        })
        .collect();
    Ok(ForestModel {
        schema: MODEL_SCHEMA.to_string(),
        trees,
        n_trees: params.n_trees,
        max_depth: params.max_depth,
        seed: params.seed,
        feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
        decision_threshold: DEFAULT_DECISION_THRESHOLD,
    })
}

impl ForestModel {
    pub fn score(&self, fv: &FeatureVector) -> f64 {
        let sum: f64 = self.trees.iter().map(|t| t.score(&fv.0)).sum();
        (sum / self.trees.len() as f64).clamp(0.0, 1.0)
    }

    pub fn predict(&self, fv: &FeatureVector) -> Prediction {
        let score = self.score(fv);
        Prediction {
            label: self.label_for(score, self.decision_threshold),
            score,
        }
    }

    /// Phishing iff `score >= threshold`.
    pub fn label_for(&self, score: f64, threshold: f64) -> Label {
        if score >= threshold {
            Label::Phishing
        } else {
            Label::Legitimate
        }
    }

    /// Dimension-checked prediction from a raw slice.
    pub fn predict_slice(&self, values: &[f64]) -> Result<Prediction, ClassifierError> {
        let fv = FeatureVector::from_slice(values)
            .ok_or(ClassifierError::DimensionMismatch(values.len()))?;
        Ok(self.predict(&fv))
    }

    fn validate(&self) -> Result<(), ClassifierError> {
        if self.schema != MODEL_SCHEMA {
            return Err(ClassifierError::SchemaMismatch(format!(
                "expected {MODEL_SCHEMA:?}, found {:?}",
                self.schema
            )));
        }
        if self.feature_names.len() != FEATURE_COUNT
            || self.feature_names.iter().zip(FEATURE_NAMES).any(|(a, b)| a != b)
        {
            return Err(ClassifierError::SchemaMismatch("feature names differ".into()));
        }
        if self.trees.is_empty() || self.trees.len() != self.n_trees {
            return Err(ClassifierError::SchemaMismatch(format!(
                "n_trees {} but {} trees",
                self.n_trees,
                self.trees.len()
            )));
        }
        if !(0.0..=1.0).contains(&self.decision_threshold) {
            return Err(ClassifierError::SchemaMismatch("decision_threshold outside [0,1]".into()));
        }
        self.trees.iter().try_for_each(TreeNode::validate)
    }

    /// Canonical JSON: keys sorted, shortest round-trip float formatting.
    pub fn to_json(&self) -> String {
        // serde_json::Value maps are BTreeMaps, so keys come out sorted.
        let value = serde_json::to_value(self).expect("model serialises");
        let mut out = serde_json::to_string_pretty(&value).expect("value serialises");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ClassifierError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| ClassifierError::SchemaMismatch(e.to_string()))?;
        match value.get("schema").and_then(|s| s.as_str()) {
            Some(MODEL_SCHEMA) => {}
            other => {
                return Err(ClassifierError::SchemaMismatch(format!(
                    "expected {MODEL_SCHEMA:?}, found {other:?}"
                )))
            }
        }
        let model: ForestModel =
            serde_json::from_value(value).map_err(|e| ClassifierError::SchemaMismatch(e.to_string()))?;
        model.validate()?;
        Ok(model)
    }
}

pub fn save_model(model: &ForestModel, path: impl AsRef<Path>) -> Result<(), ClassifierError> {
    fs::write(path, model.to_json())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ForestModel, ClassifierError> {
    ForestModel::from_json(&fs::read_to_string(path)?)
}

/// Confusion counts with phishing as the positive class. Rows whose
/// extraction failed are tallied in `unsuccessful` and excluded from rates.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub unsuccessful_phishing: usize,
    pub unsuccessful_legitimate: usize,
}

impl Metrics {
    pub fn unsuccessful(&self) -> usize {
        self.unsuccessful_phishing + self.unsuccessful_legitimate
    }

    /// `fn / (fn + tp)`, 0 when there are no scored phishing rows.
    pub fn fnr(&self) -> f64 {
        ratio(self.fn_, self.fn_ + self.tp)
    }

    /// `fp / (fp + tn)`, 0 when there are no scored legitimate rows.
    pub fn fpr(&self) -> f64 {
        ratio(self.fp, self.fp + self.tn)
    }

    pub fn record(&mut self, truth: Label, predicted: Option<Label>) {
        match (truth, predicted) {
            (Label::Phishing, None) => self.unsuccessful_phishing += 1,
            (Label::Legitimate, None) => self.unsuccessful_legitimate += 1,
            (Label::Phishing, Some(Label::Phishing)) => self.tp += 1,
            (Label::Phishing, Some(Label::Legitimate)) => self.fn_ += 1,
            (Label::Legitimate, Some(Label::Legitimate)) => self.tn += 1,
            (Label::Legitimate, Some(Label::Phishing)) => self.fp += 1,
        }
    }

    /// Correct / Wrong / Unsuccessful per class, followed by FNR and FPR as
    /// fractions.
    pub fn table(&self, title: &str) -> String {
        let mut out = String::new();
        out.push_str(&format!("({title})\n"));
        out.push_str(&format!(
            "{:<12}{:>7}{:>10}{:>8}{:>15}\n",
            "Category", "Total", "Correct", "Wrong", "Unsuccessful"
        ));
        let rows = [
            ("Phishing", self.tp, self.fn_, self.unsuccessful_phishing),
            ("Legitimate", self.tn, self.fp, self.unsuccessful_legitimate),
        ];
        for (name, ok, wrong, failed) in rows {
            out.push_str(&format!(
                "{:<12}{:>7}{:>10}{:>8}{:>15}\n",
                name,
                ok + wrong + failed,
                ok,
                wrong,
                failed
            ));
        }
        out.push_str(&format!("FNR (fraction) = {:.4}\n", self.fnr()));
        out.push_str(&format!("FPR (fraction) = {:.4}\n", self.fpr()));
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Scores every row; `None` feature vectors count as unsuccessful scans.
pub fn evaluate(model: &ForestModel, rows: &[(Option<FeatureVector>, Label)]) -> Metrics {
    let mut m = Metrics::default();
    for (fv, truth) in rows {
        m.record(*truth, fv.as_ref().map(|f| model.predict(f).label));
    }
    m
}
