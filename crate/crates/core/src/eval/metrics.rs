use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::layout::{iou, item_bbox, CategoryId, FurnitureItem};
use crate::raster::Detection;

use super::EvalError;

pub const IOU_THRESHOLD: f64 = 0.5;
/// Direction error charged for a ground-truth item nobody matched.
pub const UNMATCHED_PENALTY_DEG: f64 = 180.0;

/// Predictions and ground truth for one scene in one orientation.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPair {
    pub scene_id: String,
    pub predictions: Vec<Detection>,
    pub ground_truth: Vec<FurnitureItem>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricSet {
    pub mode: f64,
    pub map50: f64,
    pub rot: f64,
    /// AP of every category that has ground truth.
    pub per_category: BTreeMap<String, f64>,
    pub n_scenes: usize,
    pub n_gt: usize,
    pub n_pred: usize,
}

/// For every pair and prediction, the ground-truth index it matched.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matching {
    pub pred_to_gt: Vec<Vec<Option<usize>>>,
}

fn check(pairs: &[EvalPair]) -> Result<usize, EvalError> {
    if pairs.is_empty() {
        return Err(EvalError::NoScenes);
    }
    let n_gt: usize = pairs.iter().map(|p| p.ground_truth.len()).sum();
    if n_gt == 0 {
        return Err(EvalError::NoGroundTruth);
    }
    Ok(n_gt)
}

/// Predictions of one category in ranking order: confidence descending,
/// then scene id, then position within the scene.
fn ranked(pairs: &[EvalPair], cat: CategoryId) -> Vec<(usize, usize)> {
    let mut v: Vec<(usize, usize)> = pairs
        .iter()
        .enumerate()
        .flat_map(|(pi, p)| p.predictions.iter().enumerate().filter(|(_, d)| d.item.category == cat).map(move |(j, _)| (pi, j)))
        .collect();
    v.sort_by(|&(pa, ja), &(pb, jb)| {
        let (a, b) = (&pairs[pa], &pairs[pb]);
        b.predictions[jb]
            .confidence
            .total_cmp(&a.predictions[ja].confidence)
            .then_with(|| a.scene_id.cmp(&b.scene_id))
            .then_with(|| pa.cmp(&pb))
            .then_with(|| ja.cmp(&jb))
    });
    v
}

/// Greedy matching per category: each prediction in ranking order takes the
/// unmatched same-category ground truth of its scene with the highest IoU,
/// provided that IoU reaches `threshold`.
pub fn match_predictions(pairs: &[EvalPair], threshold: f64) -> Matching {
    let mut pred_to_gt: Vec<Vec<Option<usize>>> = pairs.iter().map(|p| vec![None; p.predictions.len()]).collect();
    let mut used: Vec<Vec<bool>> = pairs.iter().map(|p| vec![false; p.ground_truth.len()]).collect();
    for cat in CategoryId::all() {
        for (pi, j) in ranked(pairs, cat) {
            let pb = item_bbox(&pairs[pi].predictions[j].item);
            let mut best: Option<(usize, f64)> = None;
            for (k, g) in pairs[pi].ground_truth.iter().enumerate() {
                if g.category != cat || used[pi][k] {
                    continue;
                }
                let v = iou(&pb, &item_bbox(g));
                if v >= threshold && best.is_none_or(|(_, b)| v > b) {
                    best = Some((k, v));
                }
            }
            if let Some((k, _)) = best {
                used[pi][k] = true;
                pred_to_gt[pi][j] = Some(k);
            }
        }
    }
    Matching { pred_to_gt }
}

/// Mode accuracy with per-scene min-count matching per category.
pub fn mode_accuracy(pairs: &[EvalPair]) -> Result<f64, EvalError> {
    let n_gt = check(pairs)?;
    let mut matched = 0usize;
    for p in pairs {
        let mut counts: BTreeMap<CategoryId, (usize, usize)> = BTreeMap::new();
        for d in &p.predictions {
            counts.entry(d.item.category).or_default().0 += 1;
        }
        for g in &p.ground_truth {
            counts.entry(g.category).or_default().1 += 1;
        }
        matched += counts.values().map(|(np, ng)| np.min(ng)).sum::<usize>();
    }
    Ok(matched as f64 / n_gt as f64)
}

/// All-point interpolated AP from true-positive flags in ranking order.
fn average_precision(tp: &[bool], n_gt: usize) -> f64 {
    let mut precision = Vec::with_capacity(tp.len());
    let mut recall = Vec::with_capacity(tp.len());
    let mut hits = 0usize;
    for (i, t) in tp.iter().enumerate() {
        hits += *t as usize;
        precision.push(hits as f64 / (i + 1) as f64);
        recall.push(hits as f64 / n_gt as f64);
    }
    for i in (0..precision.len().saturating_sub(1)).rev() {
        precision[i] = precision[i].max(precision[i + 1]);
    }
    let mut ap = 0.0;
    let mut prev = 0.0;
    for (r, p) in recall.iter().zip(&precision) {
        ap += (r - prev) * p;
        prev = *r;
    }
    ap
}

/// Mean AP over categories with ground truth, plus the per-category APs.
pub fn map_at_iou(pairs: &[EvalPair], threshold: f64) -> Result<(f64, BTreeMap<String, f64>), EvalError> {
    check(pairs)?;
    let m = match_predictions(pairs, threshold);
    Ok(map_from_matching(pairs, &m))
}

fn map_from_matching(pairs: &[EvalPair], m: &Matching) -> (f64, BTreeMap<String, f64>) {
    let mut per = BTreeMap::new();
    for cat in CategoryId::all() {
        let n_gt = pairs.iter().flat_map(|p| &p.ground_truth).filter(|g| g.category == cat).count();
        if n_gt == 0 {
            continue;
        }
        let tp: Vec<bool> = ranked(pairs, cat).into_iter().map(|(pi, j)| m.pred_to_gt[pi][j].is_some()).collect();
        per.insert(cat.name().to_string(), average_precision(&tp, n_gt));
    }
    let map = per.values().sum::<f64>() / per.len() as f64;
    (map, per)
}

/// `1 - sum(diff) / (n_gt * 90)` over all ground-truth items, using the
/// detection matching; unmatched items count as 180 degrees.
pub fn rot_accuracy(pairs: &[EvalPair]) -> Result<f64, EvalError> {
    let n_gt = check(pairs)?;
    Ok(rot_from_matching(pairs, &match_predictions(pairs, IOU_THRESHOLD), n_gt))
}

fn rot_from_matching(pairs: &[EvalPair], m: &Matching, n_gt: usize) -> f64 {
    let mut total = 0.0;
    for (p, map) in pairs.iter().zip(&m.pred_to_gt) {
        let mut diff = vec![UNMATCHED_PENALTY_DEG; p.ground_truth.len()];
        for (j, k) in map.iter().enumerate() {
            if let Some(k) = k {
                diff[*k] = p.predictions[j].item.direction.circular_difference(p.ground_truth[*k].direction) as f64;
            }
        }
        total += diff.iter().sum::<f64>();
    }
    1.0 - total / (n_gt as f64 * 90.0)
}

/// Mode, mAP at IoU 0.5 and RoT in one pass.
pub fn compute_metrics(pairs: &[EvalPair]) -> Result<MetricSet, EvalError> {
    let n_gt = check(pairs)?;
    let m = match_predictions(pairs, IOU_THRESHOLD);
    let (map50, per_category) = map_from_matching(pairs, &m);
    Ok(MetricSet {
        mode: mode_accuracy(pairs)?,
        map50,
        rot: rot_from_matching(pairs, &m, n_gt),
        per_category,
        n_scenes: pairs.len(),
        n_gt,
        n_pred: pairs.iter().map(|p| p.predictions.len()).sum(),
    })
}

/// Compares metric sets field by field within `tol`.
pub fn metrics_close(a: &MetricSet, b: &MetricSet, tol: f64) -> bool {
    let near = |x: f64, y: f64| (x - y).abs() <= tol;
    near(a.mode, b.mode)
        && near(a.map50, b.map50)
        && near(a.rot, b.rot)
        && a.per_category.len() == b.per_category.len()
        && a.per_category.iter().zip(&b.per_category).all(|((ka, va), (kb, vb))| ka == kb && near(*va, *vb))
        && (a.n_scenes, a.n_gt, a.n_pred) == (b.n_scenes, b.n_gt, b.n_pred)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::layout::{Extent, Point, Rotation};

    fn item(cat: CategoryId, x: f64, y: f64, w: f64, h: f64, dir: Rotation) -> FurnitureItem {
        FurnitureItem::new(cat, Point::new(x, y), Extent::new(w, h), dir)
    }

    fn det(it: FurnitureItem, confidence: f64) -> Detection {
        Detection { item: it, confidence }
    }

    fn pair(preds: Vec<Detection>, gt: Vec<FurnitureItem>) -> EvalPair {
        EvalPair { scene_id: "s".into(), predictions: preds, ground_truth: gt }
    }

    #[test]
    fn mode_min_count_example() {
        use CategoryId as C;
        let r = Rotation::R0;
        let gt = vec![
            item(C::BED, 100.0, 100.0, 100.0, 200.0, r),
            item(C::NIGHTSTAND, 20.0, 20.0, 40.0, 40.0, r),
            item(C::NIGHTSTAND, 200.0, 20.0, 40.0, 40.0, r),
        ];
        let preds = vec![det(gt[0], 1.0), det(gt[1], 1.0), det(item(C::WARDROBE, 300.0, 300.0, 100.0, 60.0, r), 1.0)];
        assert!((mode_accuracy(&[pair(preds, gt.clone())]).unwrap() - 2.0 / 3.0).abs() < 1e-15);
        assert_eq!(mode_accuracy(&[pair(vec![], gt)]).unwrap(), 0.0);
        assert!(matches!(mode_accuracy(&[pair(vec![], vec![])]), Err(EvalError::NoGroundTruth)));
        assert!(matches!(mode_accuracy(&[]), Err(EvalError::NoScenes)));
    }

    #[test]
    fn low_iou_gives_zero_ap() {
        let r = Rotation::R0;
        // [0,4]x[0,1] against [3,7]x[0,1]: IoU 1/7
        let gt = item(CategoryId::DESK, 2.0, 0.5, 4.0, 1.0, r);
        let p = item(CategoryId::DESK, 5.0, 0.5, 4.0, 1.0, r);
        assert!((iou(&item_bbox(&gt), &item_bbox(&p)) - 1.0 / 7.0).abs() < 1e-15);
        let (map, per) = map_at_iou(&[pair(vec![det(p, 0.9)], vec![gt])], 0.5).unwrap();
        assert_eq!(map, 0.0);
        assert_eq!(per["desk"], 0.0);
    }

    #[test]
    fn one_hit_one_false_positive() {
        let r = Rotation::R0;
        let a = item(CategoryId::CHAIR, 50.0, 50.0, 50.0, 50.0, r);
        let b = item(CategoryId::CHAIR, 250.0, 50.0, 50.0, 50.0, r);
        let fp = item(CategoryId::CHAIR, 150.0, 300.0, 50.0, 50.0, r);
        let (map, _) = map_at_iou(&[pair(vec![det(a, 0.9), det(fp, 0.8)], vec![a, b])], 0.5).unwrap();
        assert!((map - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rot_formula_examples() {
        let a = item(CategoryId::SOFA, 100.0, 100.0, 160.0, 80.0, Rotation::R0);
        let b = item(CategoryId::DESK, 300.0, 300.0, 120.0, 60.0, Rotation::R0);
        let b_turned = FurnitureItem { direction: Rotation::R90, size: b.size.transposed(), ..b };
        // same box, direction off by 90
        let v = rot_accuracy(&[pair(vec![det(a, 1.0), det(b_turned, 1.0)], vec![a, b])]).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
        let flipped = FurnitureItem { direction: Rotation::R180, ..a };
        assert_eq!(rot_accuracy(&[pair(vec![det(flipped, 1.0)], vec![a])]).unwrap(), -1.0);
        assert_eq!(rot_accuracy(&[pair(vec![], vec![a])]).unwrap(), -1.0);
        let perfect = compute_metrics(&[pair(vec![det(a, 1.0), det(b, 0.5)], vec![a, b])]).unwrap();
        assert_eq!((perfect.mode, perfect.map50, perfect.rot), (1.0, 1.0, 1.0));
        let wrap = FurnitureItem { direction: Rotation::R270, size: a.size, ..a };
        let wrap_gt = FurnitureItem { direction: Rotation::R0, size: a.size.transposed(), ..a };
        assert_eq!(rot_accuracy(&[pair(vec![det(wrap, 1.0)], vec![wrap_gt])]).unwrap(), 0.0);
    }

    #[test]
    fn greedy_prefers_highest_iou() {
        let r = Rotation::R0;
        let g1 = item(CategoryId::BED, 100.0, 100.0, 100.0, 100.0, r);
        let g2 = item(CategoryId::BED, 120.0, 100.0, 100.0, 100.0, r);
        let p = item(CategoryId::BED, 118.0, 100.0, 100.0, 100.0, r);
        let m = match_predictions(&[pair(vec![det(p, 1.0)], vec![g1, g2])], 0.5);
        assert_eq!(m.pred_to_gt, vec![vec![Some(1)]]);
    }
}
