//! Imbalance corrections applied to a training set before model fitting:
//! random undersampling of the majority class, random oversampling of the
//! minority class, and SMOTE. All three balance the classes to equal size.

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::rng::RngStream;
use rand::seq::index::sample;
use rand::Rng;

/// The (minority, majority) row-index split, erroring on one-class input.
/// When the classes are equal the event rows count as "minority" so the
/// call is still well-defined (all three corrections are then no-ops).
fn split_classes(ds: &Dataset) -> Result<(Vec<usize>, Vec<usize>)> {
    let (events, nonevents) = ds.class_indices();
    if events.is_empty() || nonevents.is_empty() {
        return Err(Error::DegenerateInput("resampling needs both outcome classes".into()));
    }
    if events.len() <= nonevents.len() {
        Ok((events, nonevents))
    } else {
        Ok((nonevents, events))
    }
}

/// Random undersampling: keep the whole minority class plus a uniform
/// without-replacement draw of the majority class of the same size. Row
/// order of the original dataset is preserved.
pub fn undersample(ds: &Dataset, stream: &mut RngStream) -> Result<Dataset> {
    let (minority, majority) = split_classes(ds)?;
    let m = minority.len();
    if m == majority.len() {
        return Ok(ds.clone());
    }
    let picked = sample(stream, majority.len(), m);
    let mut keep: Vec<usize> = minority;
    keep.extend(picked.iter().map(|i| majority[i]));
    keep.sort_unstable();
    Ok(ds.subset(&keep))
}

/// Random oversampling: all original rows, followed by with-replacement
/// copies of minority rows until the classes balance.
pub fn oversample(ds: &Dataset, stream: &mut RngStream) -> Result<Dataset> {
    let (minority, majority) = split_classes(ds)?;
    let m = minority.len();
    if m == majority.len() {
        return Ok(ds.clone());
    }
    let mut idx: Vec<usize> = (0..ds.n()).collect();
    for _ in 0..majority.len() - m {
        idx.push(minority[stream.random_range(0..m)]);
    }
    Ok(ds.subset(&idx))
}

/// SMOTE: all original rows plus synthetic minority points until the
/// classes balance.
///
/// Synthetic points are built by cycling through the minority rows in
/// dataset order; each visit picks one of the `k` nearest minority
/// neighbours (Euclidean distance, self excluded, ties broken toward the
/// lower row index) uniformly at random and interpolates a uniform fraction
/// of the way toward it. Ordinal features snap back to their level grid.
/// When the minority class has fewer than `k + 1` members, all of its other
/// members serve as the neighbour pool.
pub fn smote(ds: &Dataset, k: usize, stream: &mut RngStream) -> Result<Dataset> {
    if k == 0 {
        return Err(Error::Config("SMOTE needs k >= 1".into()));
    }
    let (minority, majority) = split_classes(ds)?;
    let m = minority.len();
    if m == majority.len() {
        return Ok(ds.clone());
    }
    if m < 2 {
        return Err(Error::DegenerateInput(format!(
            "SMOTE needs at least 2 minority rows, found {m}"
        )));
    }
    let k_eff = k.min(m - 1);
    let minority_label = ds.y()[minority[0]];

    // k nearest minority neighbours of each minority row, by brute force.
    // Minority classes here are small (tens to a few hundred rows).
    let neighbours: Vec<Vec<usize>> = (0..m)
        .map(|i| {
            let mut d: Vec<(f64, usize)> = (0..m)
                .filter(|&j| j != i)
                .map(|j| {
                    let (a, b) = (ds.x().row(minority[i]), ds.x().row(minority[j]));
                    let dist2: f64 = a.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum();
                    (dist2, j)
                })
                .collect();
            d.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap().then(x.1.cmp(&y.1)));
            d.truncate(k_eff);
            d.into_iter().map(|(_, j)| j).collect()
        })
        .collect();

    let mut x = ds.x().clone();
    let mut y = ds.y().to_vec();
    let n_extra = majority.len() - m;
    let mut synth = vec![0.0; ds.p()];
    for t in 0..n_extra {
        let bi = t % m;
        let base = ds.x().row(minority[bi]);
        let pool = &neighbours[bi];
        let nb = ds.x().row(minority[pool[stream.random_range(0..pool.len())]]);
        let u: f64 = stream.random_range(0.0..1.0);
        for ((s, &bv), (&nv, kind)) in synth.iter_mut().zip(base).zip(nb.iter().zip(ds.kinds())) {
            *s = kind.snap(bv + u * (nv - bv));
        }
        x.push_row(&synth);
        y.push(minority_label);
    }
    Dataset::new(x, y, ds.kinds().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{FeatureKind, Matrix};

    fn imbalanced(n_events: usize, n_nonevents: usize) -> Dataset {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..n_events + n_nonevents {
            rows.push(vec![i as f64, (i * i % 17) as f64]);
            y.push(u8::from(i < n_events));
        }
        Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap()
    }

    fn stream(tag: u64) -> RngStream {
        RngStream::derive(2024, &[tag])
    }

    #[test]
    fn undersample_balances_with_original_rows() {
        let ds = imbalanced(3, 12);
        let out = undersample(&ds, &mut stream(1)).unwrap();
        assert_eq!(out.n(), 6);
        assert_eq!(out.n_events(), 3);
        // every kept row exists in the original
        for i in 0..out.n() {
            let found =
                (0..ds.n()).any(|j| ds.x().row(j) == out.x().row(i) && ds.y()[j] == out.y()[i]);
            assert!(found, "row {i} not in original");
        }
        // distinct majority rows (without replacement)
        let mut kept: Vec<&[f64]> =
            (0..out.n()).filter(|&i| out.y()[i] == 0).map(|i| out.x().row(i)).collect();
        kept.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        kept.dedup();
        assert_eq!(kept.len(), 3);
    }

    #[test]
    fn oversample_keeps_all_and_duplicates_minority() {
        let ds = imbalanced(2, 7);
        let out = oversample(&ds, &mut stream(2)).unwrap();
        assert_eq!(out.n(), 14);
        assert_eq!(out.n_events(), 7);
        // first 9 rows are the original, in order
        for i in 0..ds.n() {
            assert_eq!(ds.x().row(i), out.x().row(i));
            assert_eq!(ds.y()[i], out.y()[i]);
        }
        // the extras are bit-copies of minority rows
        for i in ds.n()..out.n() {
            assert_eq!(out.y()[i], 1);
            let found = (0..2).any(|j| ds.x().row(j) == out.x().row(i));
            assert!(found);
        }
    }

    #[test]
    fn smote_synthesizes_on_segments() {
        let ds = imbalanced(4, 11);
        let out = smote(&ds, 5, &mut stream(3)).unwrap();
        assert_eq!(out.n(), 22);
        assert_eq!(out.n_events(), 11);
        // originals preserved
        for i in 0..ds.n() {
            assert_eq!(ds.x().row(i), out.x().row(i));
        }
        // each synthetic row lies, per coordinate, inside the minority hull
        let minority_rows: Vec<&[f64]> = (0..4).map(|i| ds.x().row(i)).collect();
        for i in ds.n()..out.n() {
            assert_eq!(out.y()[i], 1);
            let s = out.x().row(i);
            for c in 0..ds.p() {
                let lo = minority_rows.iter().map(|r| r[c]).fold(f64::INFINITY, f64::min);
                let hi = minority_rows.iter().map(|r| r[c]).fold(f64::NEG_INFINITY, f64::max);
                assert!(s[c] >= lo - 1e-12 && s[c] <= hi + 1e-12);
            }
        }
    }

    #[test]
    fn smote_interpolation_is_collinear() {
        // With exactly 2 minority rows the neighbour is forced, so every
        // synthetic point must sit on the segment between them.
        let rows = vec![
            vec![0.0, 0.0],
            vec![2.0, 4.0],
            vec![9.0, 9.0],
            vec![8.0, 8.0],
            vec![7.0, 7.0],
            vec![6.5, 6.0],
        ];
        let y = vec![1, 1, 0, 0, 0, 0];
        let ds = Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let out = smote(&ds, 5, &mut stream(4)).unwrap();
        for i in ds.n()..out.n() {
            let s = out.x().row(i);
            // on the segment (0,0)-(2,4): y = 2x with x in [0,2]
            assert!((s[1] - 2.0 * s[0]).abs() < 1e-12, "off segment: {s:?}");
            assert!((0.0..=2.0).contains(&s[0]));
        }
    }

    #[test]
    fn smote_snaps_ordinal_features() {
        let rows = vec![
            vec![0.0, 0.0],
            vec![1.0, 4.0],
            vec![0.5, 2.0],
            vec![9.0, 0.0],
            vec![8.0, 1.0],
            vec![7.0, 2.0],
            vec![6.0, 3.0],
            vec![5.0, 4.0],
        ];
        let y = vec![1, 1, 1, 0, 0, 0, 0, 0];
        let kinds = vec![
            FeatureKind::Continuous,
            FeatureKind::Ordinal { levels: vec![0.0, 1.0, 2.0, 3.0, 4.0] },
        ];
        let ds = Dataset::new(Matrix::from_rows(&rows).unwrap(), y, kinds).unwrap();
        let out = smote(&ds, 5, &mut stream(5)).unwrap();
        for i in ds.n()..out.n() {
            let v = out.x().row(i)[1];
            assert!(v == v.round() && (0.0..=4.0).contains(&v), "not a level: {v}");
        }
    }

    #[test]
    fn balanced_input_is_identity() {
        let ds = imbalanced(4, 4);
        for f in [undersample, oversample] {
            let out = f(&ds, &mut stream(6)).unwrap();
            assert_eq!(out.n(), ds.n());
            assert_eq!(out.x(), ds.x());
        }
        let out = smote(&ds, 5, &mut stream(7)).unwrap();
        assert_eq!(out.n(), ds.n());
    }

    #[test]
    fn degenerate_inputs_error() {
        let x = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        let one_class = Dataset::continuous(x, vec![1, 1]).unwrap();
        assert!(undersample(&one_class, &mut stream(8)).is_err());
        assert!(oversample(&one_class, &mut stream(9)).is_err());
        assert!(smote(&one_class, 5, &mut stream(10)).is_err());

        // single minority row: nothing to interpolate with
        let ds = imbalanced(1, 5);
        assert!(smote(&ds, 5, &mut stream(11)).is_err());
        // but undersampling and oversampling still work
        assert_eq!(undersample(&ds, &mut stream(12)).unwrap().n(), 2);
        assert_eq!(oversample(&ds, &mut stream(13)).unwrap().n(), 10);
    }

    #[test]
    fn resampling_is_reproducible() {
        let ds = imbalanced(5, 20);
        let a = smote(&ds, 5, &mut stream(14)).unwrap();
        let b = smote(&ds, 5, &mut stream(14)).unwrap();
        assert_eq!(a.x(), b.x());
        let c = smote(&ds, 5, &mut stream(15)).unwrap();
        assert!(a.x() != c.x(), "different streams should differ");
    }

    #[test]
    fn minority_can_be_the_nonevent_class() {
        let mut rows = Vec::new();
        let mut y = Vec::new();
        for i in 0..10 {
            rows.push(vec![i as f64]);
            y.push(u8::from(i >= 3)); // 7 events, 3 non-events
        }
        let ds = Dataset::continuous(Matrix::from_rows(&rows).unwrap(), y).unwrap();
        let out = undersample(&ds, &mut stream(16)).unwrap();
        assert_eq!(out.n(), 6);
        assert_eq!(out.n_events(), 3);
        let out = smote(&ds, 2, &mut stream(17)).unwrap();
        assert_eq!(out.n(), 14);
        assert_eq!(out.n_events(), 7);
        for i in ds.n()..out.n() {
            assert_eq!(out.y()[i], 0, "synthetic rows carry the minority label");
        }
    }
}
