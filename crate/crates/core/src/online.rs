//! Closed-form IMR(1).
//!
//! With order 1 and `τ → 0`, iterative repairing settles on a geometric
//! continuation of the last labeled displacement: every unlabeled `i` after a
//! labeled segment ending at `e` receives `φ^{i-e}·z_e + x_i`. The converged
//! `φ` is available directly, so repairs can be emitted in a single pass.

use crate::error::{RepairError, Result};
use crate::series::{labeled_segments, LabeledSeries, Segment, TimeSeries};

/// Step cap for the damped fixpoint iteration.
pub const FIXPOINT_STEPS: usize = 10_000;

/// Half-width of the interval scanned for roots of the parameter equation.
pub const ROOT_SCAN_LIMIT: f64 = 4.0;
const ROOT_SCAN_STEPS: usize = 8_000;

fn prefix_diffs(x: &TimeSeries, labels: &LabeledSeries, ell: usize) -> Result<Vec<f64>> {
    if ell < 2 {
        return Err(RepairError::InvalidParameter(format!(
            "labeled prefix must hold at least 2 points, got {ell}"
        )));
    }
    if ell > x.len() {
        return Err(RepairError::TooShort {
            len: x.len(),
            order: ell,
        });
    }
    (0..ell)
        .map(|i| match labels.get(i) {
            Some(y) => Ok(y - x[i]),
            None => Err(RepairError::InvalidParameter(format!(
                "position {} inside the prefix is not labeled",
                i + 1
            ))),
        })
        .collect()
}

/// `(Σ z_t·z_{t+1}, Σ z_t²)` over `t = 0..len-2`.
fn lag_sums(z: &[f64]) -> (f64, f64) {
    z.windows(2)
        .fold((0.0, 0.0), |(n, d), w| (n + w[0] * w[1], d + w[0] * w[0]))
}

/// Converged order-1 parameter for a labeled prefix of length `ell`.
pub fn phi_single(x: &TimeSeries, labels: &LabeledSeries, ell: usize) -> Result<f64> {
    let (num, den) = lag_sums(&prefix_diffs(x, labels, ell)?);
    if den == 0.0 {
        return Err(RepairError::DegenerateLabels);
    }
    Ok(num / den)
}

/// Sufficient condition for `|φ(k)| < 1` throughout iterative IMR(1).
pub fn check_bound_condition(x: &TimeSeries, labels: &LabeledSeries, ell: usize) -> Result<bool> {
    let (num, den) = lag_sums(&prefix_diffs(x, labels, ell)?);
    Ok(num.abs() < den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct OnlinePrefixModel {
    phi1: f64,
    ell: usize,
    z_ell: f64,
    prefix: Vec<f64>,
}

impl OnlinePrefixModel {
    /// Fits the model to the first `ell` labeled points.
    pub fn fit(x: &TimeSeries, labels: &LabeledSeries, ell: usize) -> Result<Self> {
        let phi1 = phi_single(x, labels, ell)?;
        let prefix: Vec<f64> = (0..ell).map(|i| labels.get(i).unwrap_or(x[i])).collect();
        Ok(Self {
            phi1,
            ell,
            z_ell: prefix[ell - 1] - x[ell - 1],
            prefix,
        })
    }

    /// Uses the longest labeled prefix of `labels`.
    pub fn fit_prefix(x: &TimeSeries, labels: &LabeledSeries) -> Result<Self> {
        Self::fit(x, labels, labels.prefix_len().min(x.len()))
    }

    /// Builds a model directly. `prefix` holds the labeled values.
    pub fn new(phi1: f64, z_ell: f64, prefix: Vec<f64>) -> Result<Self> {
        if !phi1.is_finite() || !z_ell.is_finite() {
            return Err(RepairError::InvalidParameter(
                "online model parameters must be finite".into(),
            ));
        }
        if prefix.len() < 2 {
            return Err(RepairError::InvalidParameter(format!(
                "labeled prefix must hold at least 2 points, got {}",
                prefix.len()
            )));
        }
        Ok(Self {
            phi1,
            ell: prefix.len(),
            z_ell,
            prefix,
        })
    }

    pub fn phi1(&self) -> f64 {
        self.phi1
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn z_ell(&self) -> f64 {
        self.z_ell
    }

    pub fn prefix(&self) -> &[f64] {
        &self.prefix
    }
}

/// Writes `φ^{i-anchor}·z + x_i` into `out[i]` for each `i` in `range`.
fn propagate(out: &mut [f64], x: &[f64], phi: f64, z: f64, range: std::ops::Range<usize>) {
    let mut carry = z;
    for i in range {
        carry *= phi;
        out[i] = carry + x[i];
    }
}

/// Converged IMR(1) repair for a labeled prefix.
pub fn repair_single(x: &TimeSeries, model: &OnlinePrefixModel) -> Result<Vec<f64>> {
    if x.len() < model.ell {
        return Err(RepairError::TooShort {
            len: x.len(),
            order: model.ell,
        });
    }
    let mut out = x.values().to_vec();
    out[..model.ell].copy_from_slice(&model.prefix);
    propagate(&mut out, x, model.phi1, model.z_ell, model.ell..x.len());
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MultiSegmentRepair {
    pub values: Vec<f64>,
    pub phi1: f64,
    /// `|F(φ) - φ|` at the returned parameter.
    pub residual: f64,
    /// Every distinct root found in `[-4, 4]`.
    pub roots: Vec<f64>,
    pub multiple_roots: bool,
    /// Whether the damped iteration from the within-segment ratio settled.
    pub fixpoint_settled: bool,
}

/// The parameter equation `φ = F(φ)` for a fixed set of labeled segments.
struct SegmentEquation {
    /// Per segment: (gap exponent, z at previous segment end, z at start).
    cross: Vec<(i32, f64, f64)>,
    w1: f64,
    w2: f64,
}

impl SegmentEquation {
    fn new(z: &[f64], segments: &[Segment]) -> Self {
        let mut eq = SegmentEquation {
            cross: Vec::new(),
            w1: 0.0,
            w2: 0.0,
        };
        let mut prev_end: Option<usize> = None;
        for seg in segments {
            let (n, d) = lag_sums(&z[seg.start..=seg.end]);
            eq.w1 += n;
            eq.w2 += d;
            if let Some(e) = prev_end {
                let gap = (seg.start - 1 - e) as i32;
                if z[e] != 0.0 {
                    eq.cross.push((gap, z[e], z[seg.start]));
                }
            }
            prev_end = Some(seg.end);
        }
        eq
    }

    fn is_degenerate(&self) -> bool {
        self.w2 == 0.0 && self.cross.is_empty()
    }

    fn sums(&self, phi: f64) -> (f64, f64) {
        self.cross
            .iter()
            .fold((self.w1, self.w2), |(num, den), &(g, ze, zs)| {
                let carried = phi.powi(g) * ze;
                (num + carried * zs, den + carried * carried)
            })
    }

    fn f(&self, phi: f64) -> f64 {
        let (num, den) = self.sums(phi);
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }

    fn h(&self, phi: f64) -> f64 {
        let (num, den) = self.sums(phi);
        phi * den - num
    }

    fn initial(&self) -> f64 {
        if self.w2 == 0.0 {
            0.0
        } else {
            self.w1 / self.w2
        }
    }

    fn damped_fixpoint(&self, start: f64, tol: f64) -> Option<f64> {
        let mut phi = start;
        for _ in 0..FIXPOINT_STEPS {
            let next = 0.5 * phi + 0.5 * self.f(phi);
            if !next.is_finite() {
                return None;
            }
            if (next - phi).abs() <= tol {
                return Some(next);
            }
            phi = next;
        }
        None
    }

    fn bisect(&self, mut lo: f64, mut hi: f64, mut h_lo: f64) -> f64 {
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            let h_mid = self.h(mid);
            if h_mid == 0.0 {
                return mid;
            }
            if (h_mid < 0.0) == (h_lo < 0.0) {
                lo = mid;
                h_lo = h_mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn bracketed_roots(&self) -> Vec<f64> {
        let step = 2.0 * ROOT_SCAN_LIMIT / ROOT_SCAN_STEPS as f64;
        let mut roots = Vec::new();
        let mut prev: Option<(f64, f64)> = None;
        for k in 0..=ROOT_SCAN_STEPS {
            let phi = -ROOT_SCAN_LIMIT + k as f64 * step;
            let h = self.h(phi);
            if !h.is_finite() {
                prev = None;
                continue;
            }
            if h == 0.0 {
                roots.push(phi);
            } else if let Some((p_phi, p_h)) = prev {
                if p_h != 0.0 && (p_h < 0.0) != (h < 0.0) {
                    roots.push(self.bisect(p_phi, phi, p_h));
                }
            }
            prev = Some((phi, h));
        }
        roots
    }
}

fn same_root(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * b.abs().max(1.0)
}

fn dedup_roots(mut roots: Vec<f64>) -> Vec<f64> {
    roots.sort_by(f64::total_cmp);
    roots.dedup_by(|a, b| same_root(*a, *b));
    roots
}

/// Converged IMR(1) repair for arbitrary labeled segments.
///
/// The parameter equation may have several roots. All roots in `[-4, 4]` are
/// collected along with the result of a damped fixpoint iteration started
/// from the within-segment ratio, and the root closest to that ratio is used.
pub fn repair_multi_segment(
    x: &TimeSeries,
    labels: &LabeledSeries,
    tol: f64,
) -> Result<MultiSegmentRepair> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(RepairError::InvalidParameter(format!(
            "fixpoint tolerance must be positive, got {tol}"
        )));
    }
    let index = labeled_segments(labels, x.len());
    let segments = index.segments();
    if segments.is_empty() {
        return Err(RepairError::DegenerateLabels);
    }
    let mut out = x.values().to_vec();
    let mut z = vec![0.0; x.len()];
    for (i, y) in labels.iter().filter(|&(i, _)| i < x.len()) {
        out[i] = y;
        z[i] = y - x[i];
    }

    let eq = SegmentEquation::new(&z, segments);
    if labels.len() == x.len() {
        return Ok(MultiSegmentRepair {
            values: out,
            phi1: eq.initial(),
            residual: 0.0,
            roots: Vec::new(),
            multiple_roots: false,
            fixpoint_settled: true,
        });
    }
    if eq.is_degenerate() {
        return Err(RepairError::DegenerateLabels);
    }

    let start = eq.initial();
    let settled = eq.damped_fixpoint(start, tol);
    let mut roots = dedup_roots(eq.bracketed_roots());
    if let Some(phi) = settled {
        if !roots.iter().any(|&r| same_root(r, phi)) {
            roots.push(phi);
            roots.sort_by(f64::total_cmp);
        }
    }
    let Some(phi1) = roots
        .iter()
        .copied()
        .min_by(|a, b| (a - start).abs().total_cmp(&(b - start).abs()))
    else {
        return Err(RepairError::NoFixpoint {
            steps: FIXPOINT_STEPS,
            residual: (eq.f(start) - start).abs(),
        });
    };

    for (j, seg) in segments.iter().enumerate() {
        let stop = segments.get(j + 1).map_or(x.len(), |next| next.start);
        propagate(&mut out, x, phi1, z[seg.end], seg.end + 1..stop);
    }

    Ok(MultiSegmentRepair {
        values: out,
        phi1,
        residual: (eq.f(phi1) - phi1).abs(),
        multiple_roots: roots.len() > 1,
        roots,
        fixpoint_settled: settled.is_some(),
    })
}

/// Single-pass repairer for a stream that begins with labeled points.
///
/// Running sums of `z_t·z_{t+1}` and `z_t²` cover the entire history,
/// repaired points included, so a label arriving after observations re-anchors
/// the model on everything seen so far.
#[derive(Debug, Clone, Default)]
pub struct StreamRepairer {
    num: f64,
    den: f64,
    last_z: Option<f64>,
    carry: f64,
    phi: f64,
    seen: usize,
}

impl StreamRepairer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn phi1(&self) -> f64 {
        self.phi
    }

    pub fn seen(&self) -> usize {
        self.seen
    }

    fn absorb(&mut self, z: f64) {
        if let Some(prev) = self.last_z {
            self.num += prev * z;
            self.den += prev * prev;
        }
        self.last_z = Some(z);
        self.carry = z;
        self.seen += 1;
    }

    /// Extends the labeled history. Returns the label.
    pub fn push_label(&mut self, x: f64, y: f64) -> Result<f64> {
        if !x.is_finite() || !y.is_finite() {
            return Err(RepairError::NonFinite { index: self.seen });
        }
        self.absorb(y - x);
        self.phi = if self.den == 0.0 {
            0.0
        } else {
            self.num / self.den
        };
        Ok(y)
    }

    /// Repairs one observation immediately.
    pub fn push_observation(&mut self, x: f64) -> Result<f64> {
        if !x.is_finite() {
            return Err(RepairError::NonFinite { index: self.seen });
        }
        let z = self.carry * self.phi;
        self.absorb(z);
        Ok(z + x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{imr_repair, RepairConfig};

    fn series(v: &[f64]) -> TimeSeries {
        TimeSeries::new(v.to_vec()).unwrap()
    }

    fn prefix_with_diffs(z: &[f64], tail: usize) -> (TimeSeries, LabeledSeries) {
        let x: Vec<f64> = (0..z.len() + tail).map(|i| 10.0 + i as f64).collect();
        let labels =
            LabeledSeries::from_pairs(z.iter().enumerate().map(|(i, d)| (i, x[i] + d))).unwrap();
        (series(&x), labels)
    }

    #[test]
    fn phi_single_worked_prefix() {
        let x = series(&[6.0, 10.0, 9.6, 8.3]);
        let labels = LabeledSeries::prefix(&[6.0, 5.6, 5.4]).unwrap();
        let phi = phi_single(&x, &labels, 3).unwrap();
        assert!((phi - 18.48 / 19.36).abs() < 1e-12);
        assert!((phi - 0.9545).abs() < 5e-5);
    }

    #[test]
    fn phi_single_constant_and_zero() {
        let (x, labels) = prefix_with_diffs(&[1.0, 1.0, 1.0], 2);
        assert_eq!(phi_single(&x, &labels, 3).unwrap(), 1.0);
        let (x, labels) = prefix_with_diffs(&[0.0, 0.0, 0.0], 2);
        assert_eq!(
            phi_single(&x, &labels, 3).unwrap_err(),
            RepairError::DegenerateLabels
        );
    }

    #[test]
    fn phi_single_input_checks() {
        let (x, labels) = prefix_with_diffs(&[1.0, 2.0], 2);
        assert!(phi_single(&x, &labels, 1).is_err());
        assert!(phi_single(&x, &labels, 3).is_err());
        assert!(phi_single(&x, &labels, 9).is_err());
    }

    #[test]
    fn bound_condition_cases() {
        let (x, labels) = prefix_with_diffs(&[1.0, -0.5, 0.25], 1);
        assert!(check_bound_condition(&x, &labels, 3).unwrap());
        let (x, labels) = prefix_with_diffs(&[1.0, 1.0], 1);
        assert!(!check_bound_condition(&x, &labels, 2).unwrap());
        let (x, labels) = prefix_with_diffs(&[0.0, 0.0, 0.0], 1);
        assert!(!check_bound_condition(&x, &labels, 3).unwrap());
    }

    #[test]
    fn repair_single_cases() {
        let model = OnlinePrefixModel::new(0.5, 2.0, vec![1.0, 2.0]).unwrap();
        let x = series(&[0.0, 0.0, 10.0, 20.0]);
        assert_eq!(
            repair_single(&x, &model).unwrap(),
            vec![1.0, 2.0, 11.0, 20.5]
        );

        let model = OnlinePrefixModel::new(0.0, 2.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(&repair_single(&x, &model).unwrap()[2..], &[10.0, 20.0]);
        let model = OnlinePrefixModel::new(0.7, 0.0, vec![1.0, 2.0]).unwrap();
        assert_eq!(&repair_single(&x, &model).unwrap()[2..], &[10.0, 20.0]);
    }

    #[test]
    fn fitted_model_fields() {
        let (x, labels) = prefix_with_diffs(&[1.0, -0.5, 0.25], 3);
        let model = OnlinePrefixModel::fit_prefix(&x, &labels).unwrap();
        assert_eq!(model.ell(), 3);
        assert_eq!(model.z_ell(), 0.25);
        assert!((model.phi1() - (-0.625 / 1.25)).abs() < 1e-12);
    }

    #[test]
    fn multi_segment_single_prefix_reduces() {
        let (x, labels) = prefix_with_diffs(&[1.0, -0.5, 0.75, 0.4], 6);
        let model = OnlinePrefixModel::fit(&x, &labels, 4).unwrap();
        let single = repair_single(&x, &model).unwrap();
        let multi = repair_multi_segment(&x, &labels, 1e-12).unwrap();
        assert!((multi.phi1 - model.phi1()).abs() < 1e-12);
        for (a, b) in multi.values.iter().zip(&single) {
            assert!((a - b).abs() < 1e-9);
        }
        assert!(!multi.multiple_roots);
    }

    #[test]
    fn multi_segment_all_labeled() {
        let x = series(&[1.0, 2.0, 3.0]);
        let labels = LabeledSeries::from_pairs([(0, 1.5), (1, 2.5), (2, 2.0)]).unwrap();
        let res = repair_multi_segment(&x, &labels, 1e-10).unwrap();
        assert_eq!(res.values, vec![1.5, 2.5, 2.0]);
    }

    #[test]
    fn multi_segment_degenerate() {
        let x = series(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(
            repair_multi_segment(&x, &LabeledSeries::new(), 1e-10).unwrap_err(),
            RepairError::DegenerateLabels
        );
        let zeros = LabeledSeries::from_pairs([(0, 1.0), (1, 2.0)]).unwrap();
        assert_eq!(
            repair_multi_segment(&x, &zeros, 1e-10).unwrap_err(),
            RepairError::DegenerateLabels
        );
        let singleton = LabeledSeries::from_pairs([(1, 5.0)]).unwrap();
        assert_eq!(
            repair_multi_segment(&x, &singleton, 1e-10).unwrap_err(),
            RepairError::DegenerateLabels
        );
        assert!(repair_multi_segment(&x, &zeros, 0.0).is_err());
    }

    #[test]
    fn two_segment_matches_iterative() {
        // segments (0..=2) and (5, 5), n = 8
        let x = series(&[3.0, 4.0, 2.0, 5.0, 6.0, 1.0, 2.0, 4.0]);
        let labels = LabeledSeries::from_pairs([(0, 3.5), (1, 3.2), (2, 3.0), (5, 1.8)]).unwrap();
        let closed = repair_multi_segment(&x, &labels, 1e-12).unwrap();
        assert!(closed.residual <= 1e-12);
        let cfg = RepairConfig::new(1, 1e-6).with_max_iterations(1_000_000);
        let iterative = imr_repair(&x, &labels, &cfg).unwrap();
        assert!(iterative.converged);
        for (a, b) in closed.values.iter().zip(&iterative.values) {
            assert!((a - b).abs() < 1e-3, "{a} vs {b}");
        }
    }

    #[test]
    fn stream_matches_closed_form() {
        let (x, labels) = prefix_with_diffs(&[1.0, -0.5, 0.75, 0.4], 6);
        let model = OnlinePrefixModel::fit(&x, &labels, 4).unwrap();
        let batch = repair_single(&x, &model).unwrap();
        let mut stream = StreamRepairer::new();
        let mut out = Vec::new();
        for i in 0..x.len() {
            out.push(match labels.get(i) {
                Some(y) => stream.push_label(x[i], y).unwrap(),
                None => stream.push_observation(x[i]).unwrap(),
            });
        }
        assert_eq!(out, batch);
        assert_eq!(stream.seen(), x.len());
    }

    #[test]
    fn stream_before_any_label_passes_through() {
        let mut stream = StreamRepairer::new();
        assert_eq!(stream.push_observation(4.0).unwrap(), 4.0);
        assert_eq!(stream.push_label(1.0, 3.0).unwrap(), 3.0);
        assert_eq!(stream.phi1(), 0.0);
        assert_eq!(stream.push_observation(5.0).unwrap(), 5.0);
        assert!(stream.push_observation(f64::NAN).is_err());
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn geometric_decay(
                z in prop::collection::vec(-3.0f64..3.0, 2..8),
                tail in 1usize..30,
            ) {
                let (x, labels) = prefix_with_diffs(&z, tail);
                let Ok(model) = OnlinePrefixModel::fit_prefix(&x, &labels) else {
                    return Ok(());
                };
                prop_assume!(model.phi1().abs() < 1.0);
                let y = repair_single(&x, &model).unwrap();
                let dev: Vec<f64> = (model.ell()..x.len()).map(|i| (y[i] - x[i]).abs()).collect();
                for w in dev.windows(2) {
                    prop_assert!(w[1] <= w[0] + 1e-12);
                }
            }

            #[test]
            fn multi_segment_root_is_fixpoint(
                x in prop::collection::vec(-5.0f64..5.0, 6..30),
                mask in prop::collection::vec(prop::option::weighted(0.4, -5.0f64..5.0), 30),
            ) {
                let n = x.len();
                let x = TimeSeries::new(x).unwrap();
                let labels = LabeledSeries::from_pairs(
                    mask[..n].iter().enumerate().filter_map(|(i, l)| l.map(|v| (i, v))),
                ).unwrap();
                let tol = 1e-10;
                match repair_multi_segment(&x, &labels, tol) {
                    Ok(res) => {
                        if res.fixpoint_settled || !res.roots.is_empty() {
                            prop_assert!(res.residual <= tol.max(1e-9 * res.phi1.abs().max(1.0)));
                        }
                        for (i, v) in labels.iter() {
                            prop_assert_eq!(res.values[i], v);
                        }
                    }
                    Err(e) => prop_assert!(e.is_numeric()),
                }
            }
        }
    }
}
