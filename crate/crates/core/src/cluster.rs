//! Stage 3: min-max normalization, dynamic time warping, PAM (k-medoids)
//! clustering, elbow tables and cluster export.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ingest::StationMeta;
use crate::rng;
use crate::svg;

/// Rescales to `[0, 1]`; a constant series maps to all 0.5.
pub fn minmax_normalize(values: &[f64]) -> Vec<f64> {
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !(hi > lo) {
        return vec![0.5; values.len()];
    }
    let span = hi - lo;
    values
        .iter()
        .map(|&v| if v == hi { 1.0 } else { (v - lo) / span })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub distance: f64,
    /// 0-based index pairs from `(0, 0)` to `(m - 1, n - 1)`.
    pub path: Vec<(usize, usize)>,
}

fn check_band(m: usize, n: usize, band: Option<usize>) -> Result<()> {
    if m == 0 || n == 0 {
        return Err(Error::Empty);
    }
    match band {
        Some(b) if b < m.abs_diff(n) => Err(Error::BandTooNarrow),
        _ => Ok(()),
    }
}

/// Column range `[lo, hi)` (1-based DP indices) allowed in row `i`.
fn band_cols(i: usize, n: usize, band: Option<usize>) -> (usize, usize) {
    match band {
        None => (1, n + 1),
        Some(b) => (i.saturating_sub(b).max(1), (i + b).min(n) + 1),
    }
}

/// Plain comparison min; inputs are never NaN, and this avoids the NaN
/// handling of `f64::min` on the hot path.
#[inline(always)]
fn min(a: f64, b: f64) -> f64 {
    if b < a {
        b
    } else {
        a
    }
}

/// DTW distance with pointwise cost `|u_i - v_j|` and steps
/// `(1,0), (0,1), (1,1)`. `band` restricts cells to `|i - j| <= band`.
pub fn dtw_distance(u: &[f64], v: &[f64], band: Option<usize>) -> Result<f64> {
    let (m, n) = (u.len(), v.len());
    check_band(m, n, band)?;
    let mut prev = vec![f64::INFINITY; n + 1];
    let mut cur = vec![f64::INFINITY; n + 1];
    prev[0] = 0.0;
    for (i, &ui) in (1..=m).zip(u) {
        let (lo, hi) = band_cols(i, n, band);
        // Rows only move right, so the cell left of the band is the only
        // stale entry this row can read.
        cur[lo - 1] = f64::INFINITY;
        let mut diag = prev[lo - 1];
        let mut left = f64::INFINITY;
        for ((c, &up), &vj) in cur[lo..hi].iter_mut().zip(&prev[lo..hi]).zip(&v[lo - 1..hi - 1]) {
            let x = (ui - vj).abs() + min(min(diag, up), left);
            *c = x;
            diag = up;
            left = x;
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(prev[n])
}

/// DTW distance together with an optimal warping path. Uses the full
/// `(m+1) x (n+1)` table; prefer [`dtw_distance`] when the path is not needed.
pub fn dtw(u: &[f64], v: &[f64], band: Option<usize>) -> Result<Alignment> {
    let (m, n) = (u.len(), v.len());
    check_band(m, n, band)?;
    let w = n + 1;
    let mut d = vec![f64::INFINITY; (m + 1) * w];
    d[0] = 0.0;
    for i in 1..=m {
        let (lo, hi) = band_cols(i, n, band);
        for j in lo..hi {
            let best = min(min(d[(i - 1) * w + j - 1], d[(i - 1) * w + j]), d[i * w + j - 1]);
            d[i * w + j] = (u[i - 1] - v[j - 1]).abs() + best;
        }
    }
    let mut path = vec![(m - 1, n - 1)];
    let (mut i, mut j) = (m, n);
    while (i, j) != (1, 1) {
        let diag = d[(i - 1) * w + j - 1];
        let up = d[(i - 1) * w + j];
        let left = d[i * w + j - 1];
        // Prefer the diagonal on ties.
        if diag <= up && diag <= left {
            i -= 1;
            j -= 1;
        } else if up <= left {
            i -= 1;
        } else {
            j -= 1;
        }
        path.push((i - 1, j - 1));
    }
    path.reverse();
    Ok(Alignment {
        distance: d[m * w + n],
        path,
    })
}

/// Symmetric matrix of pairwise distances, stored densely.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_fn(n: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let mut data = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                data[i * n + j] = f(i, j);
            }
        }
        Self { n, data }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n..(i + 1) * self.n]
    }
}

/// All pairwise DTW distances, computed in parallel over the upper triangle.
pub fn dtw_matrix<S: AsRef<[f64]> + Sync>(samples: &[S], band: Option<usize>) -> Result<DistanceMatrix> {
    let n = samples.len();
    if n < 2 {
        return Err(Error::TooShort { needed: 1, got: n });
    }
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let dists: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| dtw_distance(samples[i].as_ref(), samples[j].as_ref(), band))
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; n * n];
    for (&(i, j), d) in pairs.iter().zip(dists) {
        data[i * n + j] = d;
        data[j * n + i] = d;
    }
    Ok(DistanceMatrix { n, data })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Clustering {
    /// Medoid sample indices, ascending; cluster `c` is represented by `medoids[c]`.
    pub medoids: Vec<usize>,
    pub assignment: Vec<usize>,
    pub total_cost: f64,
    /// Total cost after initialization and after every accepted swap.
    pub cost_trace: Vec<f64>,
}

impl Clustering {
    pub fn n_clusters(&self) -> usize {
        self.medoids.len()
    }

    pub fn sizes(&self) -> Vec<usize> {
        let mut s = vec![0; self.medoids.len()];
        for &a in &self.assignment {
            s[a] += 1;
        }
        s
    }

    /// Mean member-to-medoid distance per cluster (the medoid counts as a
    /// member at distance 0).
    pub fn intra_distances(&self, dist: &DistanceMatrix) -> Vec<f64> {
        let mut sum = vec![0.0; self.medoids.len()];
        for (i, &c) in self.assignment.iter().enumerate() {
            sum[c] += dist.get(i, self.medoids[c]);
        }
        sum.iter()
            .zip(self.sizes())
            .map(|(s, n)| s / n as f64)
            .collect()
    }

    /// Average of [`Self::intra_distances`] over clusters.
    pub fn mean_intra_distance(&self, dist: &DistanceMatrix) -> f64 {
        let d = self.intra_distances(dist);
        d.iter().sum::<f64>() / d.len() as f64
    }
}

/// Nearest medoid per sample (ties go to the lowest medoid index) and the
/// summed distance.
fn assign(dist: &DistanceMatrix, medoids: &[usize]) -> (Vec<usize>, f64) {
    let mut total = 0.0;
    let assignment = (0..dist.len())
        .map(|i| {
            let row = dist.row(i);
            let mut best = 0;
            for c in 1..medoids.len() {
                if row[medoids[c]] < row[medoids[best]] {
                    best = c;
                }
            }
            total += row[medoids[best]];
            best
        })
        .collect();
    (assignment, total)
}

/// Partitioning around medoids: random initial medoids, then repeated
/// passes over every (medoid, non-medoid) swap, keeping a swap only when it
/// strictly lowers the total cost, until a pass makes no change.
pub fn pam(dist: &DistanceMatrix, l: usize, seed: u64) -> Result<Clustering> {
    let n = dist.len();
    if l == 0 || l > n {
        return Err(Error::InvalidConfig(format!(
            "cluster count {l} must lie in 1..={n}"
        )));
    }
    let mut medoids: Vec<usize> = sample(&mut rng::stream(seed, 0), n, l).into_vec();
    medoids.sort_unstable();
    let (_, mut cost) = assign(dist, &medoids);
    let mut trace = vec![cost];

    let mut improved = true;
    while improved {
        improved = false;
        for slot in 0..l {
            for cand in 0..n {
                if medoids.contains(&cand) {
                    continue;
                }
                let old = medoids[slot];
                medoids[slot] = cand;
                let (_, c) = assign(dist, &medoids);
                if c < cost {
                    debug_assert!(c <= *trace.last().expect("trace nonempty"));
                    cost = c;
                    trace.push(c);
                    improved = true;
                } else {
                    medoids[slot] = old;
                }
            }
        }
    }
    // Canonical order: ascending sample index.
    medoids.sort_unstable();
    let (assignment, total_cost) = assign(dist, &medoids);
    Ok(Clustering {
        medoids,
        assignment,
        total_cost,
        cost_trace: trace,
    })
}

/// Best of `restarts` PAM runs (restart `r` seeded with `derive(seed, [r])`).
pub fn pam_with_restarts(dist: &DistanceMatrix, l: usize, restarts: usize, seed: u64) -> Result<Clustering> {
    let runs: Vec<Clustering> = (0..restarts.max(1) as u64)
        .into_par_iter()
        .map(|r| pam(dist, l, rng::derive(seed, &[r])))
        .collect::<Result<_>>()?;
    let mut best = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.total_cost < runs[best].total_cost {
            best = i;
        }
    }
    Ok(runs.into_iter().nth(best).expect("at least one run"))
}

/// `(L, mean intra-cluster distance)` for each requested cluster count.
pub fn elbow(dist: &DistanceMatrix, counts: &[usize], restarts: usize, seed: u64) -> Result<Vec<(usize, f64)>> {
    counts
        .iter()
        .map(|&l| Ok((l, pam_with_restarts(dist, l, restarts, seed)?.mean_intra_distance(dist))))
        .collect()
}

fn comb2(x: u64) -> f64 {
    (x * x.saturating_sub(1)) as f64 / 2.0
}

/// Adjusted Rand index between two labelings of the same samples.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings differ in length");
    let ka = a.iter().max().map_or(0, |m| m + 1);
    let kb = b.iter().max().map_or(0, |m| m + 1);
    let mut table = vec![0u64; ka * kb];
    for (&x, &y) in a.iter().zip(b) {
        table[x * kb + y] += 1;
    }
    let rows = (0..ka).map(|i| table[i * kb..(i + 1) * kb].iter().sum::<u64>());
    let cols = (0..kb).map(|j| (0..ka).map(|i| table[i * kb + j]).sum::<u64>());
    let index: f64 = table.iter().map(|&c| comb2(c)).sum();
    let sum_a: f64 = rows.map(comb2).sum();
    let sum_b: f64 = cols.map(comb2).sum();
    let expected = sum_a * sum_b / comb2(a.len() as u64);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// `clusters,mean_intra_distance`
pub fn write_elbow<W: Write>(table: &[(usize, f64)], mut w: W) -> Result<()> {
    let io = |e| Error::io("<elbow>", e);
    writeln!(w, "clusters,mean_intra_distance").map_err(io)?;
    for (l, d) in table {
        writeln!(w, "{l},{d}").map_err(io)?;
    }
    Ok(())
}

/// `station_id,lat,lon,cluster`
pub fn write_assignments<W: Write>(clustering: &Clustering, stations: &[StationMeta], mut w: W) -> Result<()> {
    if stations.len() != clustering.assignment.len() {
        return Err(Error::DimensionMismatch {
            expected: clustering.assignment.len(),
            got: stations.len(),
        });
    }
    let io = |e| Error::io("<assignments>", e);
    writeln!(w, "station_id,lat,lon,cluster").map_err(io)?;
    for (s, c) in stations.iter().zip(&clustering.assignment) {
        writeln!(w, "{},{},{},{c}", s.station_id, s.latitude, s.longitude).map_err(io)?;
    }
    Ok(())
}

/// Writes the assignment CSV and, when `svg_path` is given, a map of
/// stations colored by cluster.
pub fn geo_export(
    clustering: &Clustering,
    stations: &[StationMeta],
    csv_path: &Path,
    svg_path: Option<&Path>,
) -> Result<()> {
    let file = File::create(csv_path).map_err(|e| Error::io(csv_path, e))?;
    let mut w = BufWriter::new(file);
    write_assignments(clustering, stations, &mut w)?;
    w.flush().map_err(|e| Error::io(csv_path, e))?;
    if let Some(p) = svg_path {
        let points: Vec<svg::Point> = stations
            .iter()
            .zip(&clustering.assignment)
            .map(|(s, &c)| svg::Point {
                latitude: s.latitude,
                longitude: s.longitude,
                fill: svg::cluster_color(c),
                label: format!("{} (cluster {c})", s.name),
            })
            .collect();
        let title = format!("{} clusters", clustering.n_clusters());
        std::fs::write(p, svg::scatter(&points, &title)).map_err(|e| Error::io(p, e))?;
    }
    Ok(())
}
