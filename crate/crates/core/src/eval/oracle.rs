//! Slow, exhaustive reference implementations of the metrics.
//!
//! The matching here enumerates every injective assignment of a scene's
//! predictions to its ground truth and keeps the one whose per-prediction
//! outcomes, read in ranking order, are lexicographically best. AP is
//! integrated per ground-truth step rather than per ranked prediction.

use std::collections::BTreeMap;

use crate::layout::{iou, item_bbox, CategoryId};

use super::{EvalError, EvalPair, MetricSet, IOU_THRESHOLD};

/// Largest scene (predictions or ground truth) the oracle will enumerate.
pub const ORACLE_MAX_ITEMS: usize = 8;

/// Outcome of one prediction: matched, IoU, then lower ground-truth index first.
type Outcome = (bool, f64, i64);

fn better(a: &[Outcome], b: &[Outcome]) -> bool {
    for (x, y) in a.iter().zip(b) {
        let o = x.0.cmp(&y.0).then(x.1.total_cmp(&y.1)).then(x.2.cmp(&y.2));
        if o.is_ne() {
            return o.is_gt();
        }
    }
    false
}

struct Search<'a> {
    iou: &'a [Vec<f64>],
    used: Vec<bool>,
    current: Vec<Outcome>,
    choice: Vec<Option<usize>>,
    best: Option<(Vec<Outcome>, Vec<Option<usize>>)>,
}

impl Search<'_> {
    fn run(&mut self, depth: usize) {
        if depth == self.iou.len() {
            if self.best.as_ref().is_none_or(|(b, _)| better(&self.current, b)) {
                self.best = Some((self.current.clone(), self.choice.clone()));
            }
            return;
        }
        self.current.push((false, 0.0, 0));
        self.choice.push(None);
        self.run(depth + 1);
        self.current.pop();
        self.choice.pop();
        for k in 0..self.used.len() {
            let v = self.iou[depth][k];
            if self.used[k] || v < IOU_THRESHOLD {
                continue;
            }
            self.used[k] = true;
            self.current.push((true, v, -(k as i64)));
            self.choice.push(Some(k));
            self.run(depth + 1);
            self.current.pop();
            self.choice.pop();
            self.used[k] = false;
        }
    }
}

/// Sort key of a prediction: confidence descending, scene id, pair, index.
fn key(pairs: &[EvalPair], pi: usize, j: usize) -> (std::cmp::Reverse<OrdF64>, &str, usize, usize) {
    (std::cmp::Reverse(OrdF64(pairs[pi].predictions[j].confidence)), pairs[pi].scene_id.as_str(), pi, j)
}

#[derive(Clone, Copy, PartialEq)]
struct OrdF64(f64);

impl Eq for OrdF64 {}

impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Per pair and prediction, the ground truth chosen by exhaustive search.
fn oracle_matching(pairs: &[EvalPair]) -> Vec<Vec<Option<usize>>> {
    let mut out: Vec<Vec<Option<usize>>> = pairs.iter().map(|p| vec![None; p.predictions.len()]).collect();
    for (pi, p) in pairs.iter().enumerate() {
        for cat in CategoryId::all() {
            let mut preds: Vec<usize> = (0..p.predictions.len()).filter(|j| p.predictions[*j].item.category == cat).collect();
            preds.sort_by_key(|j| key(pairs, pi, *j));
            let gts: Vec<usize> = (0..p.ground_truth.len()).filter(|k| p.ground_truth[*k].category == cat).collect();
            let table: Vec<Vec<f64>> = preds
                .iter()
                .map(|j| {
                    let b = item_bbox(&p.predictions[*j].item);
                    gts.iter().map(|k| iou(&b, &item_bbox(&p.ground_truth[*k]))).collect()
                })
                .collect();
            let mut s = Search { iou: &table, used: vec![false; gts.len()], current: vec![], choice: vec![], best: None };
            s.run(0);
            let (_, choice) = s.best.expect("the empty assignment always exists");
            for (slot, c) in preds.iter().zip(choice) {
                out[pi][*slot] = c.map(|local| gts[local]);
            }
        }
    }
    out
}

/// `AP = (1/n) sum_j max{precision at ranks whose hit count reaches j}`.
fn stepwise_ap(hits_in_order: &[bool], n_gt: usize) -> f64 {
    let mut points = Vec::new();
    let mut hits = 0usize;
    for (i, h) in hits_in_order.iter().enumerate() {
        hits += *h as usize;
        points.push((hits, hits as f64 / (i + 1) as f64));
    }
    let mut sum = 0.0;
    for j in 1..=n_gt {
        sum += points.iter().filter(|(h, _)| *h >= j).map(|(_, p)| *p).fold(0.0, f64::max);
    }
    sum / n_gt as f64
}

/// Reference metrics for small instances.
pub fn brute_force_oracles(pairs: &[EvalPair]) -> Result<MetricSet, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoScenes);
    }
    for p in pairs {
        let n = p.predictions.len().max(p.ground_truth.len());
        if n > ORACLE_MAX_ITEMS {
            return Err(EvalError::OracleTooLarge { scene_id: p.scene_id.clone(), items: n });
        }
    }
    let n_gt: usize = pairs.iter().map(|p| p.ground_truth.len()).sum();
    if n_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }

    // Mode: walk each ground-truth item and consume one unused prediction
    // of the same category from its scene.
    let mut mode_hits = 0usize;
    for p in pairs {
        let mut taken = vec![false; p.predictions.len()];
        for g in &p.ground_truth {
            if let Some(j) = (0..p.predictions.len()).find(|j| !taken[*j] && p.predictions[*j].item.category == g.category) {
                taken[j] = true;
                mode_hits += 1;
            }
        }
    }

    let matching = oracle_matching(pairs);
    let mut per_category = BTreeMap::new();
    for cat in CategoryId::all() {
        let n_cat = pairs.iter().map(|p| p.ground_truth.iter().filter(|g| g.category == cat).count()).sum::<usize>();
        if n_cat == 0 {
            continue;
        }
        let mut all: Vec<(usize, usize)> = Vec::new();
        for (pi, p) in pairs.iter().enumerate() {
            for (j, d) in p.predictions.iter().enumerate() {
                if d.item.category == cat {
                    all.push((pi, j));
                }
            }
        }
        all.sort_by_key(|(pi, j)| key(pairs, *pi, *j));
        let hits: Vec<bool> = all.iter().map(|(pi, j)| matching[*pi][*j].is_some()).collect();
        per_category.insert(cat.name().to_string(), stepwise_ap(&hits, n_cat));
    }
    let map50 = per_category.values().sum::<f64>() / per_category.len() as f64;

    let mut deg = 0.0;
    for (p, m) in pairs.iter().zip(&matching) {
        for (k, g) in p.ground_truth.iter().enumerate() {
            deg += match m.iter().position(|c| *c == Some(k)) {
                Some(j) => {
                    let a = p.predictions[j].item.direction.degrees() as f64;
                    let b = g.direction.degrees() as f64;
                    let d = (a - b).abs();
                    d.min(360.0 - d)
                }
                None => 180.0,
            };
        }
    }

    Ok(MetricSet {
        mode: mode_hits as f64 / n_gt as f64,
        map50,
        rot: 1.0 - deg / (n_gt as f64 * 90.0),
        per_category,
        n_scenes: pairs.len(),
        n_gt,
        n_pred: pairs.iter().map(|p| p.predictions.len()).sum(),
    })
}
