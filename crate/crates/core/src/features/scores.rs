use std::collections::BTreeMap;

use chrono::Datelike;

use super::{FeatureError, Label, LabelingSummary, StationMonth};
use crate::ingest::StationObservation;

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledScore {
    pub key: StationMonth,
    pub score: f64,
    pub label: Label,
}

struct MinMax {
    min: f64,
    max: f64,
}

impl MinMax {
    fn of(values: impl Iterator<Item = f64>) -> Self {
        values.fold(MinMax { min: f64::INFINITY, max: f64::NEG_INFINITY }, |m, v| MinMax { min: m.min.min(v), max: m.max.max(v) })
    }

    /// Constant measures normalize to 0.
    fn normalize(&self, v: f64) -> f64 {
        let span = self.max - self.min;
        if span > 0.0 {
            (v - self.min) / span
        } else {
            0.0
        }
    }
}

/// Per-record score = sum of the three min-max normalized measures; the
/// monthly score is the mean record score within each station-month.
pub fn combine_observations(records: &[StationObservation]) -> Result<BTreeMap<StationMonth, f64>, FeatureError> {
    if records.is_empty() {
        return Err(FeatureError::Empty);
    }
    let trap = MinMax::of(records.iter().map(|r| r.trap_count as f64));
    let berry = MinMax::of(records.iter().map(|r| r.berry_infestation));
    let egg = MinMax::of(records.iter().map(|r| r.egg_rate));

    let mut sums: BTreeMap<StationMonth, (f64, usize)> = BTreeMap::new();
    for r in records {
        let score = trap.normalize(r.trap_count as f64) + berry.normalize(r.berry_infestation) + egg.normalize(r.egg_rate);
        let key = StationMonth { station_id: r.station_id.clone(), year: r.date.year(), month: r.date.month() };
        let e = sums.entry(key).or_insert((0.0, 0));
        e.0 += score;
        e.1 += 1;
    }
    Ok(sums.into_iter().map(|(k, (s, n))| (k, s / n as f64)).collect())
}

/// Nearest-rank percentile: the value at 1-based rank `ceil(p * n)` of the
/// ascending order.
pub fn nearest_rank(values: &[f64], percentile: f64) -> Result<f64, FeatureError> {
    if values.is_empty() {
        return Err(FeatureError::Empty);
    }
    if !(percentile > 0.0 && percentile < 1.0) {
        return Err(FeatureError::InvalidPercentile(percentile));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    // guard against p*n landing a hair above an integer, e.g. 0.7 * 10
    let rank = ((percentile * n as f64) - 1e-9).ceil().clamp(1.0, n as f64) as usize;
    Ok(sorted[rank - 1])
}

/// Label each station-month positive iff its score is strictly above the
/// nearest-rank `percentile` of all scores.
pub fn label_instances(
    scores: &BTreeMap<StationMonth, f64>,
    percentile: f64,
) -> Result<(Vec<LabeledScore>, LabelingSummary), FeatureError> {
    let values: Vec<f64> = scores.values().copied().collect();
    let threshold = nearest_rank(&values, percentile)?;
    let labeled: Vec<LabeledScore> = scores
        .iter()
        .map(|(k, &score)| LabeledScore { key: k.clone(), score, label: Label::from_positive(score > threshold) })
        .collect();
    let n_positive = labeled.iter().filter(|l| l.label.is_positive()).count();
    let summary = LabelingSummary {
        percentile,
        threshold_value: threshold,
        n_total: labeled.len(),
        n_positive,
        n_negative: labeled.len() - n_positive,
    };
    Ok((labeled, summary))
}

#[cfg(test)]
mod tests {
    use chrono::NaiveDate;
    use proptest::prelude::*;

    use super::*;
    use crate::geo::LonLat;

    fn rec(id: &str, day: u32, trap: u32, berry: f64, egg: f64) -> StationObservation {
        StationObservation {
            station_id: id.into(),
            location: LonLat::new(8.0, 48.0),
            date: NaiveDate::from_ymd_opt(2016, 8, day).unwrap(),
            trap_count: trap,
            berry_infestation: berry,
            egg_rate: egg,
        }
    }

    fn scores_map(values: &[f64]) -> BTreeMap<StationMonth, f64> {
        values
            .iter()
            .enumerate()
            .map(|(i, &v)| (StationMonth { station_id: format!("S{i:03}"), year: 2016, month: 8 }, v))
            .collect()
    }

    #[test]
    fn single_record_scores_zero() {
        let s = combine_observations(&[rec("S1", 1, 40, 30.0, 200.0)]).unwrap();
        assert_eq!(s.values().copied().collect::<Vec<_>>(), vec![0.0]);
    }

    #[test]
    fn extremes_average_to_one_and_a_half() {
        let s = combine_observations(&[rec("S1", 1, 0, 0.0, 0.0), rec("S1", 2, 10, 100.0, 300.0)]).unwrap();
        assert_eq!(s.len(), 1);
        assert!((s.values().next().unwrap() - 1.5).abs() < 1e-12);
    }

    #[test]
    fn midrange_record_scores_one_and_a_half() {
        let s = combine_observations(&[
            rec("A", 1, 0, 0.0, 0.0),
            rec("B", 1, 10, 100.0, 300.0),
            rec("C", 1, 5, 50.0, 150.0),
        ])
        .unwrap();
        let c = s.iter().find(|(k, _)| k.station_id == "C").unwrap().1;
        assert!((c - 1.5).abs() < 1e-12);
    }

    #[test]
    fn empty_input_is_an_error() {
        assert!(matches!(combine_observations(&[]), Err(FeatureError::Empty)));
        assert!(matches!(label_instances(&BTreeMap::new(), 0.8), Err(FeatureError::Empty)));
    }

    #[test]
    fn eighty_percent_on_zero_heavy_scores() {
        let (labeled, summary) = label_instances(&scores_map(&[0., 0., 0., 0., 0., 0., 0., 0., 1., 2.]), 0.8).unwrap();
        assert_eq!(summary.threshold_value, 0.0);
        assert_eq!((summary.n_positive, summary.n_negative), (2, 8));
        assert!(labeled[8].label.is_positive() && labeled[9].label.is_positive());
    }

    #[test]
    fn equal_scores_have_no_positives() {
        let (_, summary) = label_instances(&scores_map(&[0.7; 12]), 0.8).unwrap();
        assert_eq!(summary.n_positive, 0);
    }

    #[test]
    fn percentile_must_be_open_unit_interval() {
        for p in [0.0, 1.0, -0.1, 1.5] {
            assert!(matches!(label_instances(&scores_map(&[1.0]), p), Err(FeatureError::InvalidPercentile(_))));
        }
    }

    #[test]
    fn nearest_rank_small_cases() {
        assert_eq!(nearest_rank(&[5.0, 1.0, 3.0], 0.5).unwrap(), 3.0);
        assert_eq!(nearest_rank(&[5.0, 1.0, 3.0], 0.01).unwrap(), 1.0);
        assert_eq!(nearest_rank(&[5.0, 1.0, 3.0], 0.99).unwrap(), 5.0);
        let ten: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(nearest_rank(&ten, 0.7).unwrap(), 7.0);
    }

    proptest! {
        #[test]
        fn raising_a_score_never_flips_it_negative(values in proptest::collection::vec(0.0f64..3.0, 2..40), idx in 0usize..40, bump in 0.0f64..2.0) {
            let idx = idx % values.len();
            let threshold = nearest_rank(&values, 0.8).unwrap();
            let before = values[idx] > threshold;
            let after = values[idx] + bump > threshold;
            prop_assert!(!before || after);
        }

        #[test]
        fn labels_are_scale_invariant(
            raw in proptest::collection::vec((0u32..50, 0.0f64..100.0, 0.0f64..300.0), 2..30),
            scale in 1u32..5,
        ) {
            let mk = |k: u32| -> Vec<StationObservation> {
                raw.iter().enumerate().map(|(i, &(t, b, e))| {
                    let mut r = rec(&format!("S{i}"), 1, t * k, b, e * k as f64);
                    // berry is capped at 100%, so scale it downward instead
                    r.berry_infestation = b / k as f64;
                    r
                }).collect()
            };
            // two scalings of the same data: counts and eggs up by k, berries down by k
            let base = combine_observations(&mk(1)).unwrap();
            let scaled = combine_observations(&mk(scale)).unwrap();
            let (l1, _) = label_instances(&base, 0.8).unwrap();
            let (l2, _) = label_instances(&scaled, 0.8).unwrap();
            let labels1: Vec<_> = l1.iter().map(|l| l.label).collect();
            let labels2: Vec<_> = l2.iter().map(|l| l.label).collect();
            for (a, b) in base.values().zip(scaled.values()) {
                prop_assert!((a - b).abs() < 1e-9);
            }
            prop_assert_eq!(labels1, labels2);
        }
    }
}
