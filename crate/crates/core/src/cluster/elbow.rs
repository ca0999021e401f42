//! Elbow band from the inertia curve.
//!
//! Both axes are normalized to [0, 1] and each point's perpendicular distance
//! to the chord joining the first and last points is measured. The band is the
//! contiguous run of k values around the farthest point whose distance is at
//! least 90% of the maximum.

use serde::{Deserialize, Serialize};

use super::ClusterError;

/// Share of the maximum chord distance a neighbour needs to join the band.
pub const BAND_FRACTION: f64 = 0.9;

/// Below this normalized distance the curve has no distinct elbow.
const FLAT: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElbowBand {
    pub lo: usize,
    pub hi: usize,
    /// k of the point farthest from the chord.
    pub knee: usize,
    /// False when the curve is a straight line (or has fewer than 3 points);
    /// the band then spans the whole range.
    pub distinct: bool,
}

impl ElbowBand {
    pub fn contains(&self, k: usize) -> bool {
        (self.lo..=self.hi).contains(&k)
    }
}

/// Perpendicular distances of each point to the chord, in normalized units.
pub fn chord_distances(k_values: &[usize], inertias: &[f64]) -> Vec<f64> {
    let n = k_values.len();
    if n < 3 {
        return vec![0.0; n];
    }
    let (kmin, kmax) = (k_values[0] as f64, k_values[n - 1] as f64);
    let imin = inertias.iter().copied().fold(f64::INFINITY, f64::min);
    let imax = inertias.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let yspan = imax - imin;
    if kmax <= kmin || !(yspan > 0.0) {
        return vec![0.0; n];
    }
    let xs: Vec<f64> = k_values.iter().map(|&k| (k as f64 - kmin) / (kmax - kmin)).collect();
    let ys: Vec<f64> = inertias.iter().map(|&v| (v - imin) / yspan).collect();
    let (ax, ay, bx, by) = (xs[0], ys[0], xs[n - 1], ys[n - 1]);
    let (dx, dy) = (bx - ax, by - ay);
    let norm = (dx * dx + dy * dy).sqrt();
    xs.iter()
        .zip(&ys)
        .map(|(&px, &py)| (dy * px - dx * py + bx * ay - by * ax).abs() / norm)
        .collect()
}

pub fn detect_elbow(k_values: &[usize], inertias: &[f64]) -> Result<ElbowBand, ClusterError> {
    if k_values.is_empty() || k_values.len() != inertias.len() {
        return Err(ClusterError::LengthMismatch {
            expected: k_values.len(),
            got: inertias.len(),
        });
    }
    let d = chord_distances(k_values, inertias);
    let (mut best, mut dmax) = (0usize, f64::NEG_INFINITY);
    for (i, &v) in d.iter().enumerate() {
        if v > dmax {
            best = i;
            dmax = v;
        }
    }
    if dmax <= FLAT {
        return Ok(ElbowBand {
            lo: k_values[0],
            hi: k_values[k_values.len() - 1],
            knee: k_values[0],
            distinct: false,
        });
    }
    let cut = BAND_FRACTION * dmax;
    let mut lo = best;
    while lo > 0 && d[lo - 1] >= cut {
        lo -= 1;
    }
    let mut hi = best;
    while hi + 1 < d.len() && d[hi + 1] >= cut {
        hi += 1;
    }
    Ok(ElbowBand {
        lo: k_values[lo],
        hi: k_values[hi],
        knee: k_values[best],
        distinct: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_breakpoint() {
        let ks: Vec<usize> = (1..=20).collect();
        let inertias: Vec<f64> = ks
            .iter()
            .map(|&k| if k <= 5 { 100.0 - 20.0 * (k as f64 - 1.0) } else { 20.0 - (k as f64 - 5.0) })
            .collect();
        let band = detect_elbow(&ks, &inertias).unwrap();
        assert!(band.distinct);
        assert_eq!(band.knee, 5);
        assert!(band.contains(5));
    }

    #[test]
    fn straight_line_has_no_elbow() {
        let ks: Vec<usize> = (1..=20).collect();
        let inertias: Vec<f64> = ks.iter().map(|&k| 200.0 - 10.0 * k as f64).collect();
        let band = detect_elbow(&ks, &inertias).unwrap();
        assert!(!band.distinct);
        assert_eq!((band.lo, band.hi), (1, 20));
    }

    #[test]
    fn flat_curve_has_no_elbow() {
        let ks: Vec<usize> = (1..=5).collect();
        let band = detect_elbow(&ks, &[0.0; 5]).unwrap();
        assert!(!band.distinct);
    }

    #[test]
    fn band_is_contiguous_and_holds_knee() {
        let ks: Vec<usize> = (1..=20).collect();
        let inertias: Vec<f64> = ks.iter().map(|&k| 1000.0 / (k as f64).powf(1.5)).collect();
        let band = detect_elbow(&ks, &inertias).unwrap();
        let d = chord_distances(&ks, &inertias);
        let max = d.iter().cloned().fold(0.0, f64::max);
        assert!(band.lo <= band.knee && band.knee <= band.hi);
        for k in band.lo..=band.hi {
            assert!(d[k - 1] >= 0.9 * max);
        }
    }

    #[test]
    fn mismatched_lengths() {
        assert!(detect_elbow(&[1, 2], &[1.0]).is_err());
        assert!(detect_elbow(&[], &[]).is_err());
    }
}
