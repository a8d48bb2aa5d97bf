//! Quadratic response-surface fit of `V` over ratio triples.

use std::collections::btree_map::Entry;
use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector, Matrix3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};

use super::{EvaluationError, MetricSummary, RatingRecord};
use crate::phoneme::{ClassId, PhonemeClassTable};
use crate::ratios::{ProficiencyBand, RatioTable, RatioTriple, MAX_RATIO, MIN_RATIO};

pub const MIN_FIT_SAMPLES: usize = 10;
const COEFFICIENTS: usize = 10;
const COARSE_STEP: f64 = 0.05;
const FINE_STEP: f64 = 0.01;

/// Per-axis search box for the fitted optimum, in `(pitch, duration, energy)` order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitBounds {
    pub lo: [f64; 3],
    pub hi: [f64; 3],
}

impl Default for FitBounds {
    fn default() -> Self {
        Self {
            lo: [MIN_RATIO; 3],
            hi: [MAX_RATIO; 3],
        }
    }
}

impl FitBounds {
    pub fn uniform(lo: f64, hi: f64) -> Self {
        Self {
            lo: [lo; 3],
            hi: [hi; 3],
        }
    }

    pub fn validate(&self) -> Result<(), EvaluationError> {
        for axis in 0..3 {
            let (lo, hi) = (self.lo[axis], self.hi[axis]);
            if !(MIN_RATIO..=MAX_RATIO).contains(&lo)
                || !(MIN_RATIO..=MAX_RATIO).contains(&hi)
                || lo >= hi
            {
                return Err(EvaluationError::InvalidBounds(format!(
                    "axis {axis}: [{lo}, {hi}] must be increasing within [{MIN_RATIO}, {MAX_RATIO}]"
                )));
            }
        }
        Ok(())
    }

    fn contains(&self, x: &[f64; 3]) -> bool {
        (0..3).all(|i| x[i] >= self.lo[i] && x[i] <= self.hi[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub ratios: RatioTriple,
    /// Fitted `V` at `ratios`.
    pub predicted_v: f64,
    /// `[1, p, d, e, p², d², e², pd, pe, de]` weights.
    pub coefficients: [f64; COEFFICIENTS],
    /// Set when the surface has no maximum inside the bounds; `ratios` then
    /// lies on the boundary.
    pub non_concave: bool,
    pub samples: usize,
}

fn features(x: &[f64; 3]) -> [f64; COEFFICIENTS] {
    let [p, d, e] = *x;
    [1.0, p, d, e, p * p, d * d, e * e, p * d, p * e, d * e]
}

fn evaluate(c: &[f64; COEFFICIENTS], x: &[f64; 3]) -> f64 {
    features(x).iter().zip(c).map(|(f, w)| f * w).sum()
}

/// Least-squares quadratic fit of `V` followed by a bounded grid argmax
/// (0.05 coarse pass, 0.01 refinement). Sample order does not matter.
pub fn fit_optimum_ratios(
    samples: &[(RatioTriple, f64)],
    bounds: &FitBounds,
) -> Result<FitResult, EvaluationError> {
    bounds.validate()?;
    if samples.len() < MIN_FIT_SAMPLES {
        return Err(EvaluationError::InsufficientData {
            needed: MIN_FIT_SAMPLES,
            got: samples.len(),
        });
    }
    let mut sorted: Vec<([f64; 3], f64)> =
        samples.iter().map(|(t, v)| (t.as_array(), *v)).collect();
    sorted.sort_by(|a, b| {
        a.0.iter()
            .zip(&b.0)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.1.total_cmp(&b.1))
    });

    let n = sorted.len();
    let design = DMatrix::from_fn(n, COEFFICIENTS, |r, c| features(&sorted[r].0)[c]);
    let target = DVector::from_iterator(n, sorted.iter().map(|s| s.1));
    let svd = design.svd(true, true);
    let max_sv = svd.singular_values.max();
    let tol = max_sv * 1e-10;
    let rank = svd.rank(tol);
    if rank < COEFFICIENTS {
        return Err(EvaluationError::DegenerateDesign {
            rank,
            needed: COEFFICIENTS,
        });
    }
    let solution = svd.solve(&target, tol).expect("U and V were computed");
    let mut c = [0.0; COEFFICIENTS];
    c.copy_from_slice(solution.as_slice());

    let x = grid_argmax(&c, bounds);
    let ratios = RatioTriple::new(x[0], x[1], x[2]).expect("bounds lie within the ratio range");
    Ok(FitResult {
        ratios,
        predicted_v: evaluate(&c, &x),
        coefficients: c,
        non_concave: !has_interior_maximum(&c, bounds),
        samples: n,
    })
}

fn has_interior_maximum(c: &[f64; COEFFICIENTS], bounds: &FitBounds) -> bool {
    let h = Matrix3::new(
        2.0 * c[4],
        c[7],
        c[8],
        c[7],
        2.0 * c[5],
        c[9],
        c[8],
        c[9],
        2.0 * c[6],
    );
    let scale = h.abs().max().max(1e-300);
    if SymmetricEigen::new(h)
        .eigenvalues
        .iter()
        .any(|&l| l >= -1e-9 * scale)
    {
        return false;
    }
    let g = Vector3::new(c[1], c[2], c[3]);
    match h.lu().solve(&(-g)) {
        Some(x) => bounds.contains(&[x[0], x[1], x[2]]),
        None => false,
    }
}

fn axis_points(lo: f64, hi: f64, step: f64) -> Vec<f64> {
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    let mut pts: Vec<f64> = (0..=n)
        .map(|k| ((lo + k as f64 * step) * 100.0).round() / 100.0)
        .map(|x| x.clamp(lo, hi))
        .collect();
    if *pts.last().expect("non-empty") < hi {
        pts.push(hi);
    }
    pts.dedup();
    pts
}

fn best_on(c: &[f64; COEFFICIENTS], axes: [&[f64]; 3]) -> [f64; 3] {
    let mut best = (f64::NEG_INFINITY, [axes[0][0], axes[1][0], axes[2][0]]);
    for &p in axes[0] {
        for &d in axes[1] {
            for &e in axes[2] {
                let x = [p, d, e];
                let v = evaluate(c, &x);
                // Strict comparison keeps the first point in lexicographic order on ties.
                if v > best.0 {
                    best = (v, x);
                }
            }
        }
    }
    best.1
}

fn grid_argmax(c: &[f64; COEFFICIENTS], bounds: &FitBounds) -> [f64; 3] {
    let coarse: Vec<Vec<f64>> = (0..3)
        .map(|i| axis_points(bounds.lo[i], bounds.hi[i], COARSE_STEP))
        .collect();
    let x = best_on(c, [&coarse[0], &coarse[1], &coarse[2]]);
    let fine: Vec<Vec<f64>> = (0..3)
        .map(|i| {
            let lo = (x[i] - COARSE_STEP).max(bounds.lo[i]);
            let hi = (x[i] + COARSE_STEP).min(bounds.hi[i]);
            axis_points(lo, hi, FINE_STEP)
        })
        .collect();
    best_on(c, [&fine[0], &fine[1], &fine[2]])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Grouping {
    /// One fit per (band, class).
    PerClass,
    /// One fit per band shared by every class.
    Global,
}

/// `(triple, mean V)` samples keyed by band and class (`None` when pooled).
pub type SampleGroups = BTreeMap<(ProficiencyBand, Option<ClassId>), Vec<(RatioTriple, f64)>>;

/// `(band, class)` keyed samples; `class` is `None` under global grouping.
/// Records sharing a ratio triple within a group yield one `(triple, V)`
/// sample. Level-keyed records without ratios are skipped.
pub fn fitting_samples(
    records: &[RatingRecord],
    grouping: Grouping,
) -> Result<SampleGroups, EvaluationError> {
    type Cell<'a> = BTreeMap<[u64; 3], (RatioTriple, Vec<RatingRecord>)>;
    let mut groups: BTreeMap<(ProficiencyBand, Option<ClassId>), Cell> = BTreeMap::new();
    for r in records {
        let Some(t) = r.ratios else { continue };
        let class = match grouping {
            Grouping::PerClass => Some(r.class_id.clone()),
            Grouping::Global => None,
        };
        let key = t.as_array().map(f64::to_bits);
        groups
            .entry((r.band, class))
            .or_default()
            .entry(key)
            .or_insert_with(|| (t, Vec::new()))
            .1
            .push(r.clone());
    }
    groups
        .into_iter()
        .map(|(k, cells)| {
            let samples = cells
                .into_values()
                .map(|(t, recs)| Ok((t, MetricSummary::from_records(&recs)?.v())))
                .collect::<Result<Vec<_>, EvaluationError>>()?;
            Ok((k, samples))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupFit {
    pub band: ProficiencyBand,
    pub class_id: ClassId,
    /// True when the class used its band's pooled fit.
    pub pooled: bool,
    pub result: FitResult,
}

/// Fits a full ratio table. Under per-class grouping a class with fewer than
/// [`MIN_FIT_SAMPLES`] distinct triples falls back to its band's pooled fit.
pub fn fit_ratio_table(
    records: &[RatingRecord],
    grouping: Grouping,
    bounds: &FitBounds,
    classes: &PhonemeClassTable,
) -> Result<(RatioTable, Vec<GroupFit>), EvaluationError> {
    let per_class = match grouping {
        Grouping::PerClass => fitting_samples(records, Grouping::PerClass)?,
        Grouping::Global => BTreeMap::new(),
    };
    let pooled_samples = fitting_samples(records, Grouping::Global)?;
    let mut pooled: BTreeMap<ProficiencyBand, FitResult> = BTreeMap::new();
    let mut entries = BTreeMap::new();
    let mut fits = Vec::new();
    for band in ProficiencyBand::ALL {
        for class in classes.class_ids() {
            let own = per_class
                .get(&(band, Some(class.clone())))
                .filter(|s| s.len() >= MIN_FIT_SAMPLES);
            let (result, is_pooled) = match own {
                Some(samples) => (fit_optimum_ratios(samples, bounds)?, false),
                None => {
                    if let Entry::Vacant(slot) = pooled.entry(band) {
                        let samples = pooled_samples.get(&(band, None)).ok_or_else(|| {
                            EvaluationError::MissingGroup {
                                band: band.to_string(),
                            }
                        })?;
                        slot.insert(fit_optimum_ratios(samples, bounds)?);
                    }
                    (pooled[&band].clone(), true)
                }
            };
            entries.insert((band, class.clone()), result.ratios);
            fits.push(GroupFit {
                band,
                class_id: class.clone(),
                pooled: is_pooled,
                result,
            });
        }
    }
    let table = RatioTable::from_entries(entries, classes)
        .expect("fitted ratios are in range and cover every class");
    Ok((table, fits))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn planted(x: &[f64; 3]) -> f64 {
        3.0 - (x[0] - 1.3).powi(2) - (x[1] - 1.5).powi(2) - (x[2] - 1.4).powi(2)
    }

    fn lattice(f: impl Fn(&[f64; 3]) -> f64) -> Vec<(RatioTriple, f64)> {
        let vals = [0.8, 1.0, 1.26, 1.6, 2.0];
        let mut out = Vec::new();
        for p in vals {
            for d in vals {
                for e in vals {
                    let t = RatioTriple::new(p, d, e).unwrap();
                    out.push((t, f(&[p, d, e])));
                }
            }
        }
        out
    }

    #[test]
    fn recovers_planted_optimum_exactly() {
        let fit = fit_optimum_ratios(&lattice(planted), &FitBounds::default()).unwrap();
        assert_eq!(fit.ratios.as_array(), [1.3, 1.5, 1.4]);
        assert!(!fit.non_concave);
        assert!((fit.predicted_v - 3.0).abs() < 1e-9);
    }

    #[test]
    fn plane_is_flagged_and_hits_the_boundary() {
        let samples = lattice(|x| 0.2 * x[0] + 0.1 * x[1] - 0.3 * x[2] + 1.0);
        let fit = fit_optimum_ratios(&samples, &FitBounds::default()).unwrap();
        assert!(fit.non_concave);
        assert_eq!(fit.ratios.as_array(), [3.0, 3.0, 0.5]);
    }

    #[test]
    fn degenerate_design() {
        let samples: Vec<_> = (0..20)
            .map(|i| {
                let p = 0.8 + 0.05 * i as f64;
                (RatioTriple::new(p, 1.0, 1.0).unwrap(), 1.0)
            })
            .collect();
        assert!(matches!(
            fit_optimum_ratios(&samples, &FitBounds::default()),
            Err(EvaluationError::DegenerateDesign { .. })
        ));
    }

    #[test]
    fn too_few_samples_and_bad_bounds() {
        let s = lattice(planted);
        assert!(matches!(
            fit_optimum_ratios(&s[..9], &FitBounds::default()),
            Err(EvaluationError::InsufficientData { .. })
        ));
        assert!(fit_optimum_ratios(&s, &FitBounds::uniform(0.4, 2.0)).is_err());
        assert!(fit_optimum_ratios(&s, &FitBounds::uniform(2.0, 1.0)).is_err());
    }

    #[test]
    fn order_and_duplication_invariant() {
        let s = lattice(|x| planted(x) + 0.01 * (x[0] * 7.0).sin());
        let base = fit_optimum_ratios(&s, &FitBounds::default()).unwrap();
        let mut rev = s.clone();
        rev.reverse();
        assert_eq!(
            fit_optimum_ratios(&rev, &FitBounds::default()).unwrap(),
            base
        );
        let doubled: Vec<_> = s.iter().chain(&s).cloned().collect();
        assert_eq!(
            fit_optimum_ratios(&doubled, &FitBounds::default())
                .unwrap()
                .ratios,
            base.ratios
        );
    }

    #[test]
    fn interior_maximum_outside_bounds_is_flagged() {
        let fit = fit_optimum_ratios(&lattice(planted), &FitBounds::uniform(1.6, 3.0)).unwrap();
        assert!(fit.non_concave);
        assert_eq!(fit.ratios.as_array(), [1.6, 1.6, 1.6]);
    }
}
