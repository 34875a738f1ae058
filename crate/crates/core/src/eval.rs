//! Metrics, early-stage curves, localization scoring and profile summaries.

use crate::data::{GroundTruth, LabeledDataset, WindowConfig};
use crate::error::{Result, SpamsError};
use crate::mil::{AggregationResult, TemporalProfile};
use crate::training::TrainedModel;

/// Mann–Whitney AUC: fraction of (positive, negative) pairs where the
/// positive scores higher, ties counting one half.
pub fn auc(scores: &[f64], positive: &[bool]) -> Result<f64> {
    if scores.len() != positive.len() {
        return Err(SpamsError::dim("auc inputs", scores.len(), positive.len()));
    }
    let n_pos = positive.iter().filter(|&&p| p).count();
    let n_neg = positive.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(SpamsError::Metric(format!(
            "auc needs both classes ({n_pos} positive, {n_neg} negative)"
        )));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(SpamsError::Metric("NaN score".into()));
    }
    // Rank-sum with average ranks over tie groups.
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut pos_rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            if positive[idx] {
                pos_rank_sum += avg_rank;
            }
        }
        i = j + 1;
    }
    let np = n_pos as f64;
    let u = pos_rank_sum - np * (np + 1.0) / 2.0;
    Ok(u / (np * n_neg as f64))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BinaryCounts {
    pub tp: usize,
    pub fp: usize,
    pub fn_: usize,
}

impl BinaryCounts {
    pub fn count(predictions: &[usize], labels: &[usize], positive_class: usize) -> Self {
        let mut c = BinaryCounts { tp: 0, fp: 0, fn_: 0 };
        for (&p, &y) in predictions.iter().zip(labels) {
            match (p == positive_class, y == positive_class) {
                (true, true) => c.tp += 1,
                (true, false) => c.fp += 1,
                (false, true) => c.fn_ += 1,
                _ => {}
            }
        }
        c
    }

    /// 0 when nothing was predicted positive.
    pub fn precision(&self) -> f64 {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> f64 {
        ratio(self.tp, self.tp + self.fn_)
    }

    pub fn f1(&self) -> f64 {
        let (p, r) = (self.precision(), self.recall());
        if p + r == 0.0 {
            0.0
        } else {
            2.0 * p * r / (p + r)
        }
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        0.0
    } else {
        a as f64 / b as f64
    }
}

/// F1 of `positive_class` against the rest.
pub fn f1(predictions: &[usize], labels: &[usize], positive_class: usize) -> f64 {
    BinaryCounts::count(predictions, labels, positive_class).f1()
}

/// Unweighted mean of per-class F1 over classes `1..=num_classes`.
pub fn macro_f1(predictions: &[usize], labels: &[usize], num_classes: usize) -> f64 {
    (1..=num_classes).map(|k| f1(predictions, labels, k)).sum::<f64>() / num_classes as f64
}

fn check_posteriors(posteriors: &[Vec<f64>], labels: &[usize], num_classes: usize) -> Result<()> {
    if posteriors.is_empty() {
        return Err(SpamsError::EmptyInput("posteriors"));
    }
    if posteriors.len() != labels.len() {
        return Err(SpamsError::dim("posteriors vs labels", posteriors.len(), labels.len()));
    }
    if let Some(p) = posteriors.iter().find(|p| p.len() != num_classes) {
        return Err(SpamsError::dim("posterior length", num_classes, p.len()));
    }
    Ok(())
}

/// K = 2: AUC of the positive-class posterior. K > 2: mean one-vs-rest AUC
/// over classes that occur alongside at least one other class.
pub fn multiclass_auc(posteriors: &[Vec<f64>], labels: &[usize], num_classes: usize, positive_class: usize) -> Result<f64> {
    check_posteriors(posteriors, labels, num_classes)?;
    let one_vs_rest = |k: usize| {
        let scores: Vec<f64> = posteriors.iter().map(|p| p[k - 1]).collect();
        let pos: Vec<bool> = labels.iter().map(|&y| y == k).collect();
        auc(&scores, &pos)
    };
    if num_classes == 2 {
        return one_vs_rest(positive_class);
    }
    let per_class: Vec<f64> = (1..=num_classes).filter_map(|k| one_vs_rest(k).ok()).collect();
    if per_class.is_empty() {
        return Err(SpamsError::Metric("no class has both positive and negative samples".into()));
    }
    Ok(per_class.iter().sum::<f64>() / per_class.len() as f64)
}

/// 1-based argmax, lowest index on ties.
pub fn argmax_class(posterior: &[f64]) -> usize {
    let mut best = 0;
    for (k, &p) in posterior.iter().enumerate() {
        if p > posterior[best] {
            best = k;
        }
    }
    best + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    pub auc: f64,
    /// Positive-class F1 for K = 2, macro F1 otherwise.
    pub f1: f64,
    /// Indexed by class − 1.
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub n: usize,
}

pub fn metric_report(posteriors: &[Vec<f64>], labels: &[usize], num_classes: usize, positive_class: usize) -> Result<MetricReport> {
    let auc = multiclass_auc(posteriors, labels, num_classes, positive_class)?;
    let preds: Vec<usize> = posteriors.iter().map(|p| argmax_class(p)).collect();
    let counts: Vec<BinaryCounts> = (1..=num_classes).map(|k| BinaryCounts::count(&preds, labels, k)).collect();
    let f1 = if num_classes == 2 {
        counts[positive_class - 1].f1()
    } else {
        counts.iter().map(BinaryCounts::f1).sum::<f64>() / num_classes as f64
    };
    Ok(MetricReport {
        auc,
        f1,
        precision: counts.iter().map(BinaryCounts::precision).collect(),
        recall: counts.iter().map(BinaryCounts::recall).collect(),
        n: labels.len(),
    })
}

/// Posterior after each window index `t = 1..=n_w`, using only windows `1..=t`.
pub fn early_stage_posteriors(model: &TrainedModel, profile: &TemporalProfile) -> Result<Vec<Vec<f64>>> {
    (1..=profile.num_windows())
        .map(|t| model.aggregate(profile, t).map(|r| r.posterior))
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct EarlyStageCurve {
    /// `points[t-1]` uses windows `1..=t`.
    pub points: Vec<MetricReport>,
}

impl EarlyStageCurve {
    pub fn auc_at(&self, t: usize) -> f64 {
        self.points[t - 1].auc
    }
}

pub fn early_stage_curve(model: &TrainedModel, ds: &LabeledDataset) -> Result<EarlyStageCurve> {
    let profiles: Vec<TemporalProfile> = ds.sequences().iter().map(|s| model.profile(s)).collect::<Result<_>>()?;
    early_stage_curve_from_profiles(model, &profiles, ds.labels())
}

pub fn early_stage_curve_from_profiles(model: &TrainedModel, profiles: &[TemporalProfile], labels: &[usize]) -> Result<EarlyStageCurve> {
    let n_w = profiles.first().ok_or(SpamsError::EmptyInput("early-stage profiles"))?.num_windows();
    let per_sample: Vec<Vec<Vec<f64>>> = profiles.iter().map(|p| early_stage_posteriors(model, p)).collect::<Result<_>>()?;
    let points = (0..n_w)
        .map(|t| {
            let post: Vec<Vec<f64>> = per_sample.iter().map(|s| s[t].clone()).collect();
            metric_report(&post, labels, model.num_classes(), model.positive_class)
        })
        .collect::<Result<_>>()?;
    Ok(EarlyStageCurve { points })
}

/// Steps `[first, last]` covered by windows `t..t+len-1` (1-based windows).
pub fn block_steps(window: &WindowConfig, t: usize, len: usize) -> (usize, usize) {
    (window.window_start_step(t), window.window_end_step(t + len - 1))
}

/// Predicted block for one sample: `(t_star, length)` for its true class.
pub fn true_class_block(result: &AggregationResult, label: usize) -> (usize, usize) {
    (result.t_star[label - 1], result.lengths[label - 1])
}

/// Fraction of samples whose block, widened by `slack` windows on each side
/// and mapped to time steps, overlaps one of that sample's true intervals
/// (inclusive step ranges).
pub fn localization_score(
    blocks: &[(usize, usize)],
    truth: &[Vec<(usize, usize)>],
    window: &WindowConfig,
    num_windows: usize,
    slack: usize,
) -> Result<f64> {
    if blocks.is_empty() {
        return Err(SpamsError::EmptyInput("localization blocks"));
    }
    if blocks.len() != truth.len() {
        return Err(SpamsError::dim("blocks vs ground truth", blocks.len(), truth.len()));
    }
    let mut hits = 0;
    for (i, (&(t, len), intervals)) in blocks.iter().zip(truth).enumerate() {
        if intervals.is_empty() {
            return Err(SpamsError::Config(format!("no ground truth for sample {}", i + 1)));
        }
        if t == 0 || len == 0 || t + len - 1 > num_windows {
            return Err(SpamsError::Range(format!("block ({t},{len}) outside {num_windows} windows")));
        }
        let first = t.saturating_sub(slack).max(1);
        let last = (t + len - 1 + slack).min(num_windows);
        let (s0, s1) = block_steps(window, first, last - first + 1);
        if intervals.iter().any(|&(a, b)| a <= s1 && s0 <= b) {
            hits += 1;
        }
    }
    Ok(hits as f64 / blocks.len() as f64)
}

/// True-class intervals per sample, matched by id. Errors when a sample has
/// none.
pub fn truth_intervals(ds: &LabeledDataset, truth: &[GroundTruth]) -> Result<Vec<Vec<(usize, usize)>>> {
    ds.ids()
        .iter()
        .zip(ds.labels())
        .map(|(id, &y)| {
            let v: Vec<(usize, usize)> = truth
                .iter()
                .filter(|g| &g.sample_id == id && g.class == y)
                .map(|g| (g.offset_start, g.offset_end))
                .collect();
            if v.is_empty() {
                Err(SpamsError::Config(format!("no ground truth for sample {id} class {y}")))
            } else {
                Ok(v)
            }
        })
        .collect()
}

/// Mean over (context, class) groups with at least two members of the
/// per-cell variance across members, averaged over all `n_w × K` cells.
pub fn within_context_variance(profiles: &[TemporalProfile], labels: &[usize], contexts: &[usize]) -> Result<f64> {
    if profiles.is_empty() {
        return Err(SpamsError::EmptyInput("profiles"));
    }
    if profiles.len() != labels.len() || profiles.len() != contexts.len() {
        return Err(SpamsError::dim("profiles/labels/contexts", profiles.len(), labels.len().min(contexts.len())));
    }
    let mut groups: std::collections::BTreeMap<(usize, usize), Vec<usize>> = Default::default();
    for (i, (&y, &c)) in labels.iter().zip(contexts).enumerate() {
        groups.entry((c, y)).or_default().push(i);
    }
    let cells = profiles[0].values().len();
    let mut total = 0.0;
    let mut count = 0;
    for members in groups.values().filter(|m| m.len() >= 2) {
        let n = members.len() as f64;
        let mut acc = 0.0;
        for j in 0..cells {
            let mean = members.iter().map(|&i| profiles[i].values()[j]).sum::<f64>() / n;
            acc += members.iter().map(|&i| (profiles[i].values()[j] - mean).powi(2)).sum::<f64>() / n;
        }
        total += acc / cells as f64;
        count += 1;
    }
    if count == 0 {
        return Err(SpamsError::Metric("no (context, class) group has two members".into()));
    }
    Ok(total / count as f64)
}

/// Mean of channel `class` over the given profiles, per window.
pub fn mean_channel(profiles: &[&TemporalProfile], class: usize) -> Result<Vec<f64>> {
    let first = profiles.first().ok_or(SpamsError::EmptyInput("profiles"))?;
    let n_w = first.num_windows();
    let mut mean = vec![0.0; n_w];
    for p in profiles {
        if p.num_windows() != n_w {
            return Err(SpamsError::dim("profile windows", n_w, p.num_windows()));
        }
        for (t, m) in mean.iter_mut().enumerate() {
            *m += p.get(t, class - 1);
        }
    }
    mean.iter_mut().for_each(|m| *m /= profiles.len() as f64);
    Ok(mean)
}

/// 1-based index of the largest entry (earliest on ties).
pub fn peak_window(values: &[f64]) -> usize {
    argmax_class(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    fn naive_auc(scores: &[f64], pos: &[bool]) -> f64 {
        let mut num = 0.0;
        let mut den = 0.0;
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if pos[i] && !pos[j] {
                    den += 1.0;
                    if scores[i] > scores[j] {
                        num += 1.0;
                    } else if scores[i] == scores[j] {
                        num += 0.5;
                    }
                }
            }
        }
        num / den
    }

    #[test]
    fn auc_examples() {
        let y = [true, true, false, false];
        assert_eq!(auc(&[0.9, 0.8, 0.2, 0.1], &y).unwrap(), 1.0);
        assert_eq!(auc(&[0.5; 4], &y).unwrap(), 0.5);
        assert_eq!(auc(&[0.1, 0.2, 0.8, 0.9], &y).unwrap(), 0.0);
        let s = [0.7, 0.4, 0.6, 0.3];
        assert_eq!(auc(&s, &[true, false, true, false]).unwrap(), 1.0);
        // pairs (0.7>0.4) (0.7>0.3) (0.4<0.6) (0.4>0.3)
        assert_eq!(auc(&s, &[true, true, false, false]).unwrap(), 0.75);
        assert!(matches!(auc(&[0.1, 0.2], &[true, true]), Err(SpamsError::Metric(_))));
    }

    #[test]
    fn f1_examples() {
        assert_eq!(f1(&[1, 2, 2], &[1, 2, 2], 2), 1.0);
        assert_eq!(f1(&[1, 1, 1], &[1, 2, 2], 2), 0.0);
        let c = BinaryCounts::count(&[2, 2, 2, 1, 1], &[2, 2, 1, 2, 1], 2);
        assert_eq!((c.tp, c.fp, c.fn_), (2, 1, 1));
        assert!((c.f1() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn metric_oracles_on_random_instances() {
        let mut rng = Rng::new(77);
        for _ in 0..100 {
            let n = rng.int_range(2, 40);
            let mut scores: Vec<f64> = (0..n).map(|_| (rng.uniform() * 10.0).floor() / 10.0).collect();
            let mut labels: Vec<bool> = (0..n).map(|_| rng.uniform() < 0.5).collect();
            labels[0] = true;
            labels[1] = false;
            scores[0] = scores[1];
            assert!((auc(&scores, &labels).unwrap() - naive_auc(&scores, &labels)).abs() <= 1e-12);

            let preds: Vec<usize> = (0..n).map(|_| rng.int_range(1, 3)).collect();
            let ys: Vec<usize> = (0..n).map(|_| rng.int_range(1, 3)).collect();
            let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
            for i in 0..n {
                tp += f64::from(u8::from(preds[i] == 2 && ys[i] == 2));
                fp += f64::from(u8::from(preds[i] == 2 && ys[i] != 2));
                fn_ += f64::from(u8::from(preds[i] != 2 && ys[i] == 2));
            }
            let expected = if tp == 0.0 { 0.0 } else { 2.0 * tp / (2.0 * tp + fp + fn_) };
            assert!((f1(&preds, &ys, 2) - expected).abs() <= 1e-12);
        }
    }

    proptest! {
        #[test]
        fn auc_invariant_under_monotone_transform(
            scores in prop::collection::vec(-5.0f64..5.0, 4..30),
            flips in prop::collection::vec(any::<bool>(), 30),
        ) {
            let mut labels: Vec<bool> = flips[..scores.len()].to_vec();
            labels[0] = true;
            labels[1] = false;
            let a = auc(&scores, &labels).unwrap();
            let t: Vec<f64> = scores.iter().map(|s| s.exp() * 3.0 + 1.0).collect();
            prop_assert!((a - auc(&t, &labels).unwrap()).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&a));
        }
    }

    #[test]
    fn multiclass_report() {
        let post = vec![vec![0.9, 0.1], vec![0.3, 0.7], vec![0.6, 0.4], vec![0.2, 0.8]];
        let r = metric_report(&post, &[1, 2, 1, 2], 2, 2).unwrap();
        assert_eq!((r.auc, r.f1, r.n), (1.0, 1.0, 4));
        let r1 = metric_report(&post, &[1, 2, 1, 2], 2, 1).unwrap();
        assert_eq!(r1.auc, 1.0);
        let post3 = vec![vec![0.8, 0.1, 0.1], vec![0.1, 0.8, 0.1], vec![0.1, 0.1, 0.8]];
        let r3 = metric_report(&post3, &[1, 2, 3], 3, 2).unwrap();
        assert_eq!((r3.auc, r3.f1), (1.0, 1.0));
        assert!(metric_report(&post, &[1, 2], 2, 2).is_err());
    }

    #[test]
    fn localization_edge_cases() {
        let w = WindowConfig::new(5, 1).unwrap();
        // window 10 covers steps 10..14
        let truth = vec![vec![(12, 17)]];
        assert_eq!(localization_score(&[(10, 1)], &truth, &w, 30, 0).unwrap(), 1.0);
        assert_eq!(localization_score(&[(20, 2)], &truth, &w, 30, 0).unwrap(), 0.0);
        assert_eq!(localization_score(&[(20, 2)], &truth, &w, 30, 3).unwrap(), 1.0);
        assert_eq!(localization_score(&[(30, 1)], &truth, &w, 30, 30).unwrap(), 1.0);
        assert!(matches!(localization_score(&[(1, 1)], &[vec![]], &w, 30, 0), Err(SpamsError::Config(_))));
    }

    #[test]
    fn random_blocks_match_exact_overlap_probability() {
        let w = WindowConfig::new(3, 1).unwrap();
        let n_w = 60;
        let (len, slack) = (4, 2);
        let truth = (30, 35);
        let exact = (1..=n_w - len + 1)
            .filter(|&t: &usize| {
                let first = t.saturating_sub(slack).max(1);
                let last = (t + len - 1 + slack).min(n_w);
                let (s0, s1) = (first, last + 2);
                truth.0 <= s1 && s0 <= truth.1
            })
            .count() as f64
            / (n_w - len + 1) as f64;
        let mut rng = Rng::new(3);
        let blocks: Vec<(usize, usize)> = (0..20000).map(|_| (rng.int_range(1, n_w - len + 1), len)).collect();
        let score = localization_score(&blocks, &vec![vec![truth]; blocks.len()], &w, n_w, slack).unwrap();
        assert!((score - exact).abs() < 0.02, "{score} vs {exact}");
        // rough closed form (l + pattern + width + 2·slack) / n_w
        let approx = (len + 6 + 2 + 2 * slack) as f64 / (n_w - len + 1) as f64;
        assert!((exact - approx).abs() < 0.05);
    }

    #[test]
    fn within_context_variance_fixture() {
        let p = |a: f64, b: f64| TemporalProfile::new(1, 2, vec![a, b]).unwrap();
        let profiles = vec![p(0.2, 0.8), p(0.4, 0.6), p(0.9, 0.1)];
        // group (1,1) has two members with per-cell variance 0.01; the singleton is ignored
        let v = within_context_variance(&profiles, &[1, 1, 2], &[1, 1, 1]).unwrap();
        assert!((v - 0.01).abs() < 1e-12);
        assert!(within_context_variance(&profiles, &[1, 2, 1], &[1, 2, 3]).is_err());
    }

    #[test]
    fn mean_channel_and_peak() {
        let a = TemporalProfile::new(3, 2, vec![0.1, 0.2, 0.5, 0.3, 0.2, 0.9]).unwrap();
        let b = TemporalProfile::new(3, 2, vec![0.3, 0.4, 0.7, 0.1, 0.2, 0.5]).unwrap();
        let m = mean_channel(&[&a, &b], 2).unwrap();
        assert!((m[0] - 0.3).abs() < 1e-12 && (m[2] - 0.7).abs() < 1e-12);
        assert_eq!(peak_window(&m), 3);
        assert_eq!(peak_window(&[0.5, 0.5]), 1);
    }
}
