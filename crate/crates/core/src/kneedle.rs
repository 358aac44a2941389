//! Kneedle knee detection on ascending curves.
//!
//! No smoothing is applied: the call sites pass sorted statistics, which are
//! already monotone.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const MIN_POINTS: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KneeResult<T: Scalar> {
    pub index: Option<usize>,
    pub value: Option<T>,
}

impl<T: Scalar> KneeResult<T> {
    fn none() -> Self {
        Self {
            index: None,
            value: None,
        }
    }
}

/// Normalized curve in canonical (concave, increasing) form plus whether it
/// was flipped to get there. The orientation follows the curve's mean
/// position relative to its chord.
pub fn canonical_difference<T: Scalar>(values: &[T]) -> Option<(Vec<f64>, bool)> {
    let y = normalized(values)?;
    let n = y.len();
    let mean_gap = y.iter().enumerate().map(|(i, &yi)| yi - unit_x(i, n)).sum::<f64>() / n as f64;
    let flipped = mean_gap < 0.0;
    Some((difference(&y, flipped), flipped))
}

fn normalized<T: Scalar>(values: &[T]) -> Option<Vec<f64>> {
    let v: Vec<f64> = values.iter().map(|x| x.as_f64()).collect();
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let range = hi - lo;
    if !(range > 0.0 && range.is_finite()) {
        return None;
    }
    Some(v.iter().map(|&vi| (vi - lo) / range).collect())
}

fn unit_x(i: usize, n: usize) -> f64 {
    i as f64 / (n - 1) as f64
}

/// `D = y − x` of the normalized curve, rotated by 180° when `flipped`.
fn difference(y: &[f64], flipped: bool) -> Vec<f64> {
    let n = y.len();
    (0..n)
        .map(|k| {
            let yk = if flipped { 1.0 - y[n - 1 - k] } else { y[k] };
            yk - unit_x(k, n)
        })
        .collect()
}

/// Which canonicalization the detector applies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Shape {
    /// Chosen from the curve: flipped when it lies below its chord on
    /// average.
    #[default]
    Any,
    /// Read as flat, then rising sharply: the knee ends a cluster of low
    /// values ahead of the bulk.
    Convex,
    /// Read as rising sharply, then flat.
    Concave,
}

/// Finds the knee of an ascending curve, choosing the orientation from the
/// curve itself.
///
/// Candidates are local maxima of the difference curve `D = y − x` after
/// min-max normalization and canonicalization that lie strictly above the
/// chord (`D > 0`). A candidate is accepted once `D` drops below
/// `D[c] − sensitivity / (n − 1)` before the next local maximum; the first
/// accepted candidate wins.
pub fn find_knee<T: Scalar>(values: &[T], sensitivity: f64) -> Result<KneeResult<T>> {
    find_knee_with(values, sensitivity, Shape::Any)
}

/// [`find_knee`] with the canonicalization fixed by `shape`.
pub fn find_knee_with<T: Scalar>(values: &[T], sensitivity: f64, shape: Shape) -> Result<KneeResult<T>> {
    let n = values.len();
    if n < MIN_POINTS {
        return Err(Error::TooFewPoints {
            got: n,
            min: MIN_POINTS,
        });
    }
    let (diff, flipped) = match shape {
        Shape::Any => canonical_difference(values),
        Shape::Convex => normalized(values).map(|y| (difference(&y, true), true)),
        Shape::Concave => normalized(values).map(|y| (difference(&y, false), false)),
    }
    .map_or((Vec::new(), false), |d| d);
    if diff.is_empty() {
        return Ok(KneeResult::none());
    }
    let step = sensitivity / (n - 1) as f64;
    let is_max = |i: usize| i > 0 && i + 1 < n && diff[i] > diff[i - 1] && diff[i] >= diff[i + 1];

    let mut candidate: Option<(usize, f64)> = None;
    let mut knee = None;
    for j in 1..n {
        if is_max(j) {
            candidate = (diff[j] > 0.0).then_some((j, diff[j] - step));
            continue;
        }
        if let Some((c, threshold)) = candidate {
            if diff[j] < threshold {
                knee = Some(c);
                break;
            }
        }
    }
    Ok(match knee {
        None => KneeResult::none(),
        Some(k) => {
            let index = if flipped { n - 1 - k } else { k };
            KneeResult {
                index: Some(index),
                value: Some(values[index]),
            }
        }
    })
}

/// How the sensitivity passed to [`find_knee`] is chosen for a curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum Sensitivity {
    /// The same `S` for every curve length.
    Fixed(f64),
    /// `S = kappa · √(n − 1)`, see [`scaled_sensitivity`].
    Scaled(f64),
}

impl Sensitivity {
    pub fn at(self, n: usize) -> f64 {
        match self {
            Sensitivity::Fixed(s) => s,
            Sensitivity::Scaled(kappa) => scaled_sensitivity(kappa, n),
        }
    }
}

/// Sensitivity for a curve of `n` points: `kappa · √(n − 1)`.
///
/// With a fixed sensitivity the acceptance drop `S / (n − 1)` shrinks with
/// `n`, so sampling noise alone produces knees on long curves. Scaling with
/// `√(n − 1)` keeps the drop proportional to that noise.
pub fn scaled_sensitivity(kappa: f64, n: usize) -> f64 {
    kappa * (n.saturating_sub(1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn too_few_points() {
        assert!(matches!(
            find_knee(&[1.0, 2.0, 3.0, 4.0], 1.0),
            Err(Error::TooFewPoints { got: 4, min: 5 })
        ));
    }

    #[test]
    fn line_and_constant_have_no_knee() {
        let ramp: Vec<f64> = (0..100).map(f64::from).collect();
        assert_eq!(find_knee(&ramp, 1.0).unwrap().index, None);
        assert_eq!(find_knee(&[4.2f64; 30], 1.0).unwrap().index, None);
    }

    #[test]
    fn quartic_knee_is_global_maximum_of_difference() {
        let v: Vec<f64> = (0..100).map(|i| (i as f64 / 99.0).powi(4)).collect();
        let k = find_knee(&v, 1.0).unwrap();
        // Oracle: convex increasing, so canonical D_k = 1 − y[99 − k] − k/99;
        // the knee maximizes it.
        let oracle_k = (0..100)
            .map(|k| (k, 1.0 - v[99 - k] - k as f64 / 99.0))
            .fold((0, f64::NEG_INFINITY), |best, (k, d)| if d > best.1 { (k, d) } else { best })
            .0;
        assert_eq!(k.index, Some(99 - oracle_k));
        assert_eq!(k.value, Some(v[99 - oracle_k]));
    }

    #[test]
    fn concave_curve_is_not_flipped() {
        let v: Vec<f64> = (0..50).map(|i| (i as f64 / 49.0).sqrt()).collect();
        let (_, flipped) = canonical_difference(&v).unwrap();
        assert!(!flipped);
        let k = find_knee(&v, 1.0).unwrap().index.unwrap();
        assert!(k < 25);
    }

    #[test]
    fn sharp_jump_found_on_p_curve() {
        // Five tiny p-values followed by a compressed clean block: concave,
        // so the knee is the first point after the jump.
        let mut v: Vec<f64> = vec![1e-9, 2e-9, 1e-8, 5e-8, 1e-7];
        v.extend((0..45).map(|i| 0.9 + 0.1 * i as f64 / 44.0));
        let k = find_knee(&v, scaled_sensitivity(1.0, v.len())).unwrap();
        assert_eq!(k.index, Some(5));

        // The same outliers in front of a uniform block leave a nearly
        // linear curve with no knee at this sensitivity.
        let mut v: Vec<f64> = vec![1e-9, 2e-9, 1e-8, 5e-8, 1e-7];
        v.extend((1..=45).map(|i| i as f64 / 46.0));
        assert_eq!(find_knee(&v, scaled_sensitivity(1.0, v.len())).unwrap().index, None);
    }

    #[test]
    fn forced_convex_reading() {
        // 2u − u² is concave everywhere: read as convex it lies above its
        // chord, so no point qualifies.
        let v: Vec<f64> = (0..80).map(|i| {
            let u = i as f64 / 79.0;
            2.0 * u - u * u
        }).collect();
        assert_eq!(find_knee_with(&v, 1.0, Shape::Convex).unwrap().index, None);
        assert!(find_knee_with(&v, 1.0, Shape::Concave).unwrap().index.is_some());

        // A flat run of ten near-zero values ahead of a concave bulk: the
        // convex reading ends the run, the automatic one does not.
        let mut v: Vec<f64> = (0..10).map(|i| i as f64 * 1e-6).collect();
        v.extend((0..70).map(|i| {
            let u = (i + 1) as f64 / 70.0;
            0.05 + 0.95 * (2.0 * u - u * u)
        }));
        let convex = find_knee_with(&v, scaled_sensitivity(1.0, v.len()), Shape::Convex).unwrap();
        assert_eq!(convex.index, Some(9));
        assert_ne!(find_knee(&v, scaled_sensitivity(1.0, v.len())).unwrap().index, Some(9));
    }

    #[test]
    fn scaled_sensitivity_values() {
        assert_eq!(scaled_sensitivity(1.0, 101), 10.0);
        assert_eq!(scaled_sensitivity(2.0, 1), 0.0);
    }

    fn curve(seed: &[f64], convex: bool) -> Vec<f64> {
        let mut acc = 0.0;
        let mut incs: Vec<f64> = seed.iter().map(|s| s.abs() + 1e-3).collect();
        incs.sort_by(|a, b| if convex { a.partial_cmp(b) } else { b.partial_cmp(a) }.unwrap());
        incs.iter()
            .map(|d| {
                acc += d;
                acc
            })
            .collect()
    }

    proptest! {
        #[test]
        fn affine_invariance(
            incs in proptest::collection::vec(1u32..1000, 5..60),
            convex in any::<bool>(),
            shift in -100_000i32..100_000,
            exp in -20i32..20,
        ) {
            // Integer-valued curves with power-of-two scales keep the affine
            // map exact in floating point.
            let mut incs = incs;
            incs.sort_unstable();
            if !convex {
                incs.reverse();
            }
            let v: Vec<f64> = incs
                .iter()
                .scan(0.0, |acc, &d| {
                    *acc += f64::from(d);
                    Some(*acc)
                })
                .collect();
            let w: Vec<f64> = v.iter().map(|x| (x + f64::from(shift)) * 2f64.powi(exp)).collect();
            prop_assert_eq!(find_knee(&v, 1.0).unwrap().index, find_knee(&w, 1.0).unwrap().index);
        }

        #[test]
        fn deterministic(seed in proptest::collection::vec(-1.0f64..1.0, 5..60)) {
            let v = curve(&seed, true);
            prop_assert_eq!(find_knee(&v, 1.0).unwrap(), find_knee(&v, 1.0).unwrap());
        }

        #[test]
        fn higher_sensitivity_never_creates_a_knee(
            seed in proptest::collection::vec(-1.0f64..1.0, 5..60),
            convex in any::<bool>(),
            s in 0.1f64..5.0,
            extra in 0.0f64..5.0,
        ) {
            let v = curve(&seed, convex);
            let low = find_knee(&v, s).unwrap().index;
            let high = find_knee(&v, s + extra).unwrap().index;
            if low.is_none() {
                prop_assert!(high.is_none());
            }
        }
    }
}
