//! Sequence types shared by every repair algorithm.
//!
//! Positions are 0-based in the API. Error messages and the CLI report them
//! 1-based.

use std::collections::BTreeMap;
use std::ops::{Deref, Index};

use crate::error::{RepairError, Result};

fn check_finite(values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        Some(index) => Err(RepairError::NonFinite { index }),
        None => Ok(()),
    }
}

/// Observed sequence `x` of `n >= 1` finite values.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeries {
    values: Vec<f64>,
}

impl TimeSeries {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(RepairError::EmptySeries);
        }
        check_finite(&values)?;
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

impl Deref for TimeSeries {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.values
    }
}

impl TryFrom<Vec<f64>> for TimeSeries {
    type Error = RepairError;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

/// Partial map from position to known true value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LabeledSeries {
    labels: BTreeMap<usize, f64>,
}

impl LabeledSeries {
    pub fn new() -> Self {
        Self::default()
    }

    /// Labels positions `0..values.len()`.
    pub fn prefix(values: &[f64]) -> Result<Self> {
        Self::from_pairs(values.iter().copied().enumerate())
    }

    pub fn from_pairs<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, f64)>,
    {
        let mut labels = Self::new();
        for (index, value) in pairs {
            labels.insert(index, value)?;
        }
        Ok(labels)
    }

    /// Inserts or overwrites the label at `index`.
    pub fn insert(&mut self, index: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(RepairError::NonFinite { index });
        }
        self.labels.insert(index, value);
        Ok(())
    }

    pub fn get(&self, index: usize) -> Option<f64> {
        self.labels.get(&index).copied()
    }

    pub fn contains(&self, index: usize) -> bool {
        self.labels.contains_key(&index)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// Labels in increasing index order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.labels.iter().map(|(&i, &v)| (i, v))
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.labels.keys().copied()
    }

    /// Length of the labeled run starting at position 0.
    pub fn prefix_len(&self) -> usize {
        self.indices()
            .enumerate()
            .take_while(|&(expected, index)| expected == index)
            .count()
    }

    fn check_range(&self, len: usize) -> Result<()> {
        match self.labels.range(len..).next() {
            Some((&index, _)) => Err(RepairError::IndexOutOfRange { index, len }),
            None => Ok(()),
        }
    }
}

/// Current repair `y(k)` together with the labeled mask.
///
/// Labeled positions hold their label for the lifetime of the state; only
/// unlabeled positions can be written.
#[derive(Debug, Clone, PartialEq)]
pub struct RepairState {
    current: Vec<f64>,
    labeled: Vec<bool>,
}

impl RepairState {
    pub fn values(&self) -> &[f64] {
        &self.current
    }

    pub fn len(&self) -> usize {
        self.current.len()
    }

    pub fn is_empty(&self) -> bool {
        self.current.is_empty()
    }

    pub fn is_labeled(&self, index: usize) -> bool {
        self.labeled[index]
    }

    pub fn labeled_mask(&self) -> &[bool] {
        &self.labeled
    }

    pub fn labeled_count(&self) -> usize {
        self.labeled.iter().filter(|&&l| l).count()
    }

    /// Overwrites an unlabeled position and returns the previous value.
    pub fn repair(&mut self, index: usize, value: f64) -> Result<f64> {
        let len = self.current.len();
        if index >= len {
            return Err(RepairError::IndexOutOfRange { index, len });
        }
        if self.labeled[index] {
            return Err(RepairError::LabeledIndex { index });
        }
        if !value.is_finite() {
            return Err(RepairError::NonFinite { index });
        }
        Ok(std::mem::replace(&mut self.current[index], value))
    }

    pub fn into_values(self) -> Vec<f64> {
        self.current
    }
}

impl Index<usize> for RepairState {
    type Output = f64;

    fn index(&self, index: usize) -> &f64 {
        &self.current[index]
    }
}

/// Builds `y(0)`: labels where known, observations elsewhere.
pub fn init_repair_state(x: &TimeSeries, labels: &LabeledSeries) -> Result<RepairState> {
    labels.check_range(x.len())?;
    let mut current = x.values().to_vec();
    let mut labeled = vec![false; x.len()];
    for (index, value) in labels.iter() {
        current[index] = value;
        labeled[index] = true;
    }
    Ok(RepairState { current, labeled })
}

/// Displacement sequence `z = y - x`.
#[derive(Debug, Clone, PartialEq)]
pub struct DiffSeries {
    diffs: Vec<f64>,
}

impl DiffSeries {
    pub fn from_values(diffs: Vec<f64>) -> Result<Self> {
        check_finite(&diffs)?;
        Ok(Self { diffs })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            diffs: vec![0.0; len],
        }
    }

    pub fn into_values(self) -> Vec<f64> {
        self.diffs
    }
}

impl Deref for DiffSeries {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.diffs
    }
}

pub fn diff(state: &RepairState, x: &TimeSeries) -> Result<DiffSeries> {
    if state.len() != x.len() {
        return Err(RepairError::LengthMismatch {
            expected: x.len(),
            actual: state.len(),
        });
    }
    let diffs = state
        .values()
        .iter()
        .zip(x.iter())
        .map(|(y, x)| y - x)
        .collect();
    Ok(DiffSeries { diffs })
}

/// Inclusive 0-based bounds of a maximal run of labeled positions.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Segment {
    pub start: usize,
    pub end: usize,
}

impl Segment {
    pub fn len(&self) -> usize {
        self.end - self.start + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SegmentIndex {
    segments: Vec<Segment>,
}

impl SegmentIndex {
    pub fn from_mask(mask: &[bool]) -> Self {
        let mut segments = Vec::new();
        let mut open: Option<usize> = None;
        for (i, &labeled) in mask.iter().enumerate() {
            match (labeled, open) {
                (true, None) => open = Some(i),
                (false, Some(start)) => {
                    segments.push(Segment { start, end: i - 1 });
                    open = None;
                }
                _ => {}
            }
        }
        if let Some(start) = open {
            segments.push(Segment {
                start,
                end: mask.len() - 1,
            });
        }
        Self { segments }
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn len(&self) -> usize {
        self.segments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.segments.is_empty()
    }
}

/// Maximal runs of consecutive labels among positions `0..len`.
pub fn labeled_segments(labels: &LabeledSeries, len: usize) -> SegmentIndex {
    let mut mask = vec![false; len];
    for index in labels.indices().filter(|&i| i < len) {
        mask[index] = true;
    }
    SegmentIndex::from_mask(&mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn worked_x() -> TimeSeries {
        TimeSeries::new(vec![
            6.0, 10.0, 9.6, 8.3, 7.7, 5.4, 5.6, 5.9, 6.3, 6.8, 7.5, 8.5,
        ])
        .unwrap()
    }

    fn worked_labels() -> LabeledSeries {
        LabeledSeries::from_pairs([(0, 6.0), (1, 5.6), (2, 5.4), (5, 5.4), (11, 8.5)]).unwrap()
    }

    #[test]
    fn init_substitutes_labels() {
        let state = init_repair_state(&worked_x(), &worked_labels()).unwrap();
        assert_eq!(
            state.values(),
            &[6.0, 5.6, 5.4, 8.3, 7.7, 5.4, 5.6, 5.9, 6.3, 6.8, 7.5, 8.5]
        );
        assert_eq!(state.labeled_count(), 5);
        assert!(state.is_labeled(5) && !state.is_labeled(4));
    }

    #[test]
    fn init_without_labels_copies_observations() {
        let x = worked_x();
        let state = init_repair_state(&x, &LabeledSeries::new()).unwrap();
        assert_eq!(state.values(), x.values());
        assert_eq!(state.labeled_count(), 0);
    }

    #[test]
    fn init_with_matching_labels() {
        let x = TimeSeries::new(vec![1.0, 2.0]).unwrap();
        let labels = LabeledSeries::prefix(&[1.0, 2.0]).unwrap();
        let state = init_repair_state(&x, &labels).unwrap();
        assert_eq!(state.values(), &[1.0, 2.0]);
        assert!(state.labeled_mask().iter().all(|&l| l));
    }

    #[test]
    fn init_rejects_out_of_range_label() {
        let x = TimeSeries::new(vec![1.0, 2.0]).unwrap();
        let labels = LabeledSeries::from_pairs([(2, 1.0)]).unwrap();
        let err = init_repair_state(&x, &labels).unwrap_err();
        assert_eq!(err, RepairError::IndexOutOfRange { index: 2, len: 2 });
        assert_eq!(err.to_string(), "index 3 out of range 1..=2");
    }

    #[test]
    fn rejects_non_finite() {
        assert_eq!(
            TimeSeries::new(vec![1.0, f64::NAN]).unwrap_err(),
            RepairError::NonFinite { index: 1 }
        );
        assert!(TimeSeries::new(vec![f64::INFINITY]).is_err());
        assert_eq!(
            TimeSeries::new(vec![]).unwrap_err(),
            RepairError::EmptySeries
        );
        assert!(LabeledSeries::new().insert(0, f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn labeled_positions_cannot_be_repaired() {
        let mut state = init_repair_state(&worked_x(), &worked_labels()).unwrap();
        assert_eq!(
            state.repair(2, 1.0).unwrap_err(),
            RepairError::LabeledIndex { index: 2 }
        );
        assert_eq!(state.repair(3, 6.2).unwrap(), 8.3);
        assert_eq!(state[3], 6.2);
        assert!(state.repair(4, f64::NAN).is_err());
    }

    #[test]
    fn segments_of_figure_labeling() {
        // 1-based {1,2,4,5,9}
        let labels =
            LabeledSeries::from_pairs([0, 1, 3, 4, 8].into_iter().map(|i| (i, 0.0))).unwrap();
        let segs = labeled_segments(&labels, 10);
        assert_eq!(
            segs.segments(),
            &[
                Segment { start: 0, end: 1 },
                Segment { start: 3, end: 4 },
                Segment { start: 8, end: 8 },
            ]
        );
    }

    #[test]
    fn segments_edge_cases() {
        assert!(labeled_segments(&LabeledSeries::new(), 5).is_empty());
        let prefix = LabeledSeries::prefix(&[1.0; 4]).unwrap();
        let segs = labeled_segments(&prefix, 10);
        assert_eq!(segs.segments(), &[Segment { start: 0, end: 3 }]);
        assert_eq!(segs.segments()[0].len(), 4);
        let full = labeled_segments(&prefix, 4);
        assert_eq!(full.segments(), &[Segment { start: 0, end: 3 }]);
    }

    #[test]
    fn diff_of_worked_example() {
        let x = worked_x();
        let state = init_repair_state(&x, &worked_labels()).unwrap();
        let z = diff(&state, &x).unwrap();
        let expected = [0.0, -4.4, -4.2, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        for (got, want) in z.iter().zip(expected) {
            assert!((got - want).abs() < 1e-12);
        }
    }

    #[test]
    fn diff_basic_cases() {
        let x = TimeSeries::new(vec![1.0, 1.0]).unwrap();
        let labels = LabeledSeries::prefix(&[2.0, 3.0]).unwrap();
        let state = init_repair_state(&x, &labels).unwrap();
        assert_eq!(&*diff(&state, &x).unwrap(), &[1.0, 2.0]);

        let plain = init_repair_state(&x, &LabeledSeries::new()).unwrap();
        assert_eq!(&*diff(&plain, &x).unwrap(), &[0.0, 0.0]);

        let longer = TimeSeries::new(vec![1.0, 1.0, 1.0]).unwrap();
        assert!(matches!(
            diff(&state, &longer),
            Err(RepairError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn prefix_len_counts_leading_run() {
        let labels = LabeledSeries::from_pairs([(0, 1.0), (1, 1.0), (3, 1.0)]).unwrap();
        assert_eq!(labels.prefix_len(), 2);
        assert_eq!(LabeledSeries::new().prefix_len(), 0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        fn instance() -> impl Strategy<Value = (Vec<f64>, Vec<Option<f64>>)> {
            (1usize..60).prop_flat_map(|n| {
                (
                    prop::collection::vec(-100.0f64..100.0, n),
                    prop::collection::vec(prop::option::weighted(0.3, -100.0f64..100.0), n),
                )
            })
        }

        proptest! {
            #[test]
            fn labels_hold_and_diff_vanishes_elsewhere((xs, ls) in instance()) {
                let x = TimeSeries::new(xs.clone()).unwrap();
                let labels = LabeledSeries::from_pairs(
                    ls.iter().enumerate().filter_map(|(i, l)| l.map(|v| (i, v)))
                ).unwrap();
                let state = init_repair_state(&x, &labels).unwrap();
                let z = diff(&state, &x).unwrap();
                for i in 0..xs.len() {
                    match ls[i] {
                        Some(v) => prop_assert_eq!(state[i].to_bits(), v.to_bits()),
                        None => prop_assert_eq!(z[i], 0.0),
                    }
                }
            }

            #[test]
            fn segments_partition_labels((xs, ls) in instance()) {
                let labels = LabeledSeries::from_pairs(
                    ls.iter().enumerate().filter_map(|(i, l)| l.map(|v| (i, v)))
                ).unwrap();
                let segs = labeled_segments(&labels, xs.len());
                let covered: Vec<usize> = segs
                    .segments()
                    .iter()
                    .flat_map(|s| s.start..=s.end)
                    .collect();
                let expected: Vec<usize> = labels.indices().collect();
                prop_assert_eq!(covered, expected);
                for pair in segs.segments().windows(2) {
                    // maximal: the gap holds at least one unlabeled point
                    prop_assert!(pair[0].end + 1 < pair[1].start);
                }
            }
        }
    }
}
