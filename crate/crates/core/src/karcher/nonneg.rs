//! Densities that vanish on a finite number of intervals.
//!
//! Their CDFs are constant on those flats, so the warp between two such
//! densities is not unique. The minimizer of `‖1 − √γ̇‖` inverts the CDFs on
//! the increasing stretches and runs linearly across each flat.

use rayon::prelude::*;

use crate::density_est::DensityEstimate;
use crate::error::{Error, Result};
use crate::grid_fn::{generalized_inverse, node, WarpingFunction};
use crate::phase_metrics::{d_ext, optimal_warp, warp_distance_ext};
use crate::warping::{act_area, karcher_mean_warps};

/// Flat threshold relative to the largest pdf value.
pub const EPS_FLAT: f64 = 1e-4;
/// Tolerance when matching CDF plateau levels.
pub const EPS_LEVEL: f64 = 1e-3;

/// Sorted, disjoint intervals where a density vanishes, stored as grid node
/// index pairs `(start, end)` with `start < end`.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FlatStructure {
    grid_size: usize,
    spans: Vec<(usize, usize)>,
}

impl FlatStructure {
    pub fn count(&self) -> usize {
        self.spans.len()
    }

    pub fn intervals(&self) -> Vec<(f64, f64)> {
        self.spans
            .iter()
            .map(|&(a, b)| (node(a, self.grid_size), node(b, self.grid_size)))
            .collect()
    }

    pub fn spans(&self) -> &[(usize, usize)] {
        &self.spans
    }

    fn span_of(&self, k: usize) -> Option<usize> {
        self.spans.iter().position(|&(a, b)| a <= k && k <= b)
    }

    /// Keeps the `k` longest flats, in their original order.
    fn keep_longest(&self, k: usize) -> FlatStructure {
        let mut order: Vec<usize> = (0..self.spans.len()).collect();
        order.sort_by_key(|&i| (std::cmp::Reverse(self.spans[i].1 - self.spans[i].0), i));
        let mut kept: Vec<usize> = order.into_iter().take(k).collect();
        kept.sort_unstable();
        FlatStructure {
            grid_size: self.grid_size,
            spans: kept.into_iter().map(|i| self.spans[i]).collect(),
        }
    }
}

/// Maximal runs of nodes with `pdf < EPS_FLAT · max`, joined when at most two
/// cells apart. Single-node runs have zero length and are dropped.
pub fn detect_flats(d: &DensityEstimate) -> FlatStructure {
    let pdf = d.pdf().values();
    let n = pdf.len();
    let thr = EPS_FLAT * d.pdf().max();
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut k = 0;
    while k < n {
        if pdf[k] < thr {
            let start = k;
            while k + 1 < n && pdf[k + 1] < thr {
                k += 1;
            }
            match runs.last_mut() {
                Some(last) if start - last.1 <= 2 => last.1 = k,
                _ => runs.push((start, k)),
            }
        }
        k += 1;
    }
    runs.retain(|&(a, b)| b > a);
    FlatStructure {
        grid_size: n,
        spans: runs,
    }
}

/// Reduces every structure to the most common flat count (ties go to the
/// smaller count) by keeping its longest flats.
pub fn snap_flats(structs: &[FlatStructure]) -> Result<Vec<FlatStructure>> {
    let max_k = structs.iter().map(FlatStructure::count).max().unwrap_or(0);
    let mut freq = vec![0usize; max_k + 1];
    for s in structs {
        freq[s.count()] += 1;
    }
    let modal = (0..=max_k).max_by_key(|&k| (freq[k], std::cmp::Reverse(k))).unwrap_or(0);
    structs
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if s.count() < modal {
                Err(Error::PlateauMismatch(format!(
                    "density {i} has {} flats, most members have {modal}",
                    s.count()
                )))
            } else {
                Ok(s.keep_longest(modal))
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonnegAlignment {
    pub gamma_star: WarpingFunction,
    pub distance_d: f64,
}

/// Minimizing warp with `H = G ∘ γ*` for densities that may vanish.
pub fn optimal_warp_nonneg(h: &DensityEstimate, g: &DensityEstimate) -> Result<NonnegAlignment> {
    let n = h.grid_size().max(g.grid_size());
    let (h, g) = (h.resample(n), g.resample(n));
    let fh = detect_flats(&h);
    let fg = detect_flats(&g);
    let gamma_star = warp_with_flats(&h, &g, &fh, &fg)?;
    let distance_d = if fh.count() == 0 && h.is_strictly_positive() && g.is_strictly_positive() {
        d_ext(&h, &g)?
    } else {
        warp_distance_ext(&gamma_star)
    };
    Ok(NonnegAlignment { gamma_star, distance_d })
}

/// The piecewise construction for given flat structures on a shared grid.
pub(crate) fn warp_with_flats(
    h: &DensityEstimate,
    g: &DensityEstimate,
    fh: &FlatStructure,
    fg: &FlatStructure,
) -> Result<WarpingFunction> {
    if fh.count() != fg.count() {
        return Err(Error::PlateauMismatch(format!(
            "{} flats against {}",
            fh.count(),
            fg.count()
        )));
    }
    if fh.count() == 0 && h.is_strictly_positive() && g.is_strictly_positive() {
        return optimal_warp(h, g);
    }
    let n = h.grid_size();
    let hc = h.cdf().values();
    let gc = g.cdf().values();
    for (k, (&(a, _), &(c, _))) in fh.spans.iter().zip(&fg.spans).enumerate() {
        if (hc[a] - gc[c]).abs() > EPS_LEVEL {
            return Err(Error::PlateauMismatch(format!(
                "flat {k}: level {} at t={} against {} at t={}",
                hc[a],
                node(a, n),
                gc[c],
                node(c, n)
            )));
        }
    }
    let mut v = vec![0.0; n];
    for (k, slot) in v.iter_mut().enumerate() {
        let t = node(k, n);
        *slot = match fh.span_of(k) {
            Some(i) => {
                let (a, b) = fh.spans[i];
                let (c, d) = fg.spans[i];
                let (ta, tb) = (node(a, n), node(b, n));
                let (tc, td) = (node(c, n), node(d, n));
                tc + (td - tc) * (t - ta) / (tb - ta)
            }
            None => {
                // increasing stretch between flat i-1 and flat i of both densities
                let i = fh.spans.partition_point(|&(_, b)| b < k);
                let lo = if i == 0 { 0.0 } else { node(fg.spans[i - 1].1, n) };
                let hi = fg.spans.get(i).map_or(1.0, |&(c, _)| node(c, n));
                generalized_inverse(gc, hc[k]).clamp(lo, hi)
            }
        };
    }
    v[0] = 0.0;
    v[n - 1] = 1.0;
    WarpingFunction::project(v)
}

/// Snapped flat structures and the flat-aware warps `γᵢ` with
/// `F₀ = Fᵢ ∘ γᵢ`, all on the largest input grid; `fs[0]` is the template.
pub fn nonneg_alignments(fs: &[DensityEstimate]) -> Result<(Vec<FlatStructure>, Vec<WarpingFunction>)> {
    if fs.is_empty() {
        return Err(Error::Empty("karcher mean of an empty set of densities"));
    }
    let n = fs.iter().map(DensityEstimate::grid_size).max().unwrap();
    let fs: Vec<DensityEstimate> = fs.iter().map(|f| f.resample(n)).collect();
    let flats: Vec<FlatStructure> = fs.iter().map(detect_flats).collect();
    let flats = snap_flats(&flats)?;
    let warps = fs
        .par_iter()
        .zip(&flats)
        .enumerate()
        .map(|(i, (fi, fl))| {
            warp_with_flats(&fs[0], fi, &flats[0], fl).map_err(|e| match e {
                Error::PlateauMismatch(msg) => Error::PlateauMismatch(format!("density {i}: {msg}")),
                other => other,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((flats, warps))
}

/// Karcher mean with the flat-aware warps; the first member is the template.
pub fn karcher_mean_nonneg(fs: &[DensityEstimate]) -> Result<DensityEstimate> {
    let (_, warps) = nonneg_alignments(fs)?;
    let mean = karcher_mean_warps(&warps)?;
    let n = warps[0].grid_size();
    DensityEstimate::from_pdf_clipped(act_area(fs[0].resample(n).pdf(), &mean.inverse()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid_fn::GridFunction;
    use crate::phase_metrics::d_ext;

    const N: usize = 1001;

    fn triangle(t: f64) -> f64 {
        if (0.25..=0.75).contains(&t) {
            -16000.0 * (t - 0.5).abs() + 4000.0
        } else {
            0.0
        }
    }

    fn density(f: impl Fn(f64) -> f64) -> DensityEstimate {
        DensityEstimate::from_pdf(GridFunction::from_fn(N, f).unwrap()).unwrap()
    }

    #[test]
    fn flats_of_positive_density() {
        assert_eq!(detect_flats(&density(|t| 1.0 + t)).count(), 0);
    }

    #[test]
    fn flats_of_triangle() {
        let fl = detect_flats(&density(triangle));
        assert_eq!(fl.count(), 2);
        let iv = fl.intervals();
        let cell = 1.0 / (N - 1) as f64;
        assert!(iv[0].0.abs() <= 2.0 * cell && (iv[0].1 - 0.25).abs() <= 2.0 * cell);
        assert!((iv[1].0 - 0.75).abs() <= 2.0 * cell && (iv[1].1 - 1.0).abs() <= 2.0 * cell);
    }

    #[test]
    fn single_interior_flat() {
        let fl = detect_flats(&density(|t| if (0.4..=0.6).contains(&t) { 0.0 } else { 1.0 }));
        assert_eq!(fl.count(), 1);
        let (a, b) = fl.intervals()[0];
        assert!((a - 0.4).abs() < 0.003 && (b - 0.6).abs() < 0.003);
    }

    #[test]
    fn self_alignment_is_identity() {
        let f = density(triangle);
        let al = optimal_warp_nonneg(&f, &f).unwrap();
        assert!(al.gamma_star.sup_distance(&WarpingFunction::identity(N)) <= 10.0 / (N - 1) as f64);
        assert!(al.distance_d < 1e-3);
    }

    #[test]
    fn positive_pair_reduces_to_closed_form() {
        let a = density(|t| 1.0 + t);
        let b = density(|t| 2.0 - t * t);
        let al = optimal_warp_nonneg(&a, &b).unwrap();
        assert!((al.distance_d - d_ext(&a, &b).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn mismatched_levels_are_reported() {
        let a = density(|t| if (0.2..=0.3).contains(&t) { 0.0 } else { 1.0 });
        let b = density(|t| if (0.7..=0.8).contains(&t) { 0.0 } else { 1.0 });
        match optimal_warp_nonneg(&a, &b) {
            Err(Error::PlateauMismatch(msg)) => assert!(msg.contains("flat 0")),
            other => panic!("{other:?}"),
        }
        let c = density(triangle);
        assert!(matches!(optimal_warp_nonneg(&a, &c), Err(Error::PlateauMismatch(_))));
    }

    #[test]
    fn snapping_keeps_longest_flats() {
        let s = |spans: Vec<(usize, usize)>| FlatStructure { grid_size: N, spans };
        let out = snap_flats(&[
            s(vec![(0, 250), (750, 1000)]),
            s(vec![(0, 240), (300, 303), (760, 1000)]),
            s(vec![(0, 260), (740, 1000)]),
        ])
        .unwrap();
        assert_eq!(out[1].spans(), &[(0, 240), (760, 1000)]);
        let ties = snap_flats(&[s(vec![(0, 250)]), s(vec![]), s(vec![]), s(vec![(0, 9)])]).unwrap();
        assert!(ties.iter().all(|f| f.count() == 0));
        assert!(matches!(
            snap_flats(&[s(vec![(0, 250)]), s(vec![]), s(vec![(0, 10)])]),
            Err(Error::PlateauMismatch(_))
        ));
    }

    #[test]
    fn mean_of_equal_triangles() {
        let f = density(triangle);
        let m = karcher_mean_nonneg(&vec![f.clone(); 3]).unwrap();
        assert!(m.pdf().sup_distance(f.pdf()) / f.pdf().max() <= 10.0 / (N - 1) as f64);
        let single = karcher_mean_nonneg(std::slice::from_ref(&f)).unwrap();
        assert!(single.pdf().sup_distance(f.pdf()) / f.pdf().max() <= 10.0 / (N - 1) as f64);
    }
}
