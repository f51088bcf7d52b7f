//! Voxel-space posterior summaries, simultaneous-band significance, and
//! cluster extraction.
//!
//! For a contrast `C = c^T Coef` the per-draw voxel maps are streamed, never
//! materialized as one `M' x Nv` matrix: one pass accumulates the posterior
//! mean and standard deviation (Welford), a second pass computes the
//! max-statistics `z^(m) = max_v |C^(m)(v) - Chat(v)| / s(v)`. The per-voxel
//! score `P(v)` is the fraction of draws whose max-statistic dominates
//! `|Chat(v)| / s(v)`; it equals the smallest level at which the joint
//! credible band `Chat(v) +- q_(1-alpha) s(v)` excludes zero, and a voxel is
//! flagged at level `alpha` exactly when `P(v) < alpha`.

use crate::basis::BasisMaps;
use crate::bayes::McmcChain;
use crate::error::{Error, Result};
use crate::tensor::Mat;

/// Group-level contrast `c^T Coef`, e.g. `(1, 0)` for the intercept map.
#[derive(Debug, Clone)]
pub struct ContrastSpec {
    pub weights: Vec<f64>,
    pub name: String,
}

impl ContrastSpec {
    pub fn new(weights: Vec<f64>, name: impl Into<String>) -> Result<Self> {
        if weights.is_empty() || weights.iter().all(|&w| w == 0.0) {
            return Err(Error::invalid_argument(
                "contrast weights must not be all zero",
            ));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::invalid_argument("contrast weights must be finite"));
        }
        Ok(ContrastSpec {
            weights,
            name: name.into(),
        })
    }
}

/// A source of per-draw voxel maps, visited row by row.
pub trait SampleStream {
    fn n_samples(&self) -> usize;
    fn n_voxels(&self) -> usize;
    /// Write draw `m`'s voxel map into `out` (length `n_voxels`).
    fn fill_row(&self, m: usize, out: &mut [f64]);
}

/// Streams `c^T Coef^(m) L` one posterior draw at a time.
pub struct ContrastStream<'a> {
    coef_samples: &'a [Mat],
    basis: &'a BasisMaps,
    weights: Vec<f64>,
}

impl<'a> ContrastStream<'a> {
    pub fn new(
        chain: &'a McmcChain,
        basis: &'a BasisMaps,
        contrast: &ContrastSpec,
    ) -> Result<Self> {
        Self::from_samples(&chain.coef_samples, basis, contrast)
    }

    /// Build from raw coefficient draws, e.g. a persisted chain.
    pub fn from_samples(
        coef_samples: &'a [Mat],
        basis: &'a BasisMaps,
        contrast: &ContrastSpec,
    ) -> Result<Self> {
        let Some(coef) = coef_samples.first() else {
            return Err(Error::invalid_argument("chain holds no samples"));
        };
        if coef.ncols() != basis.rank {
            return Err(Error::invalid_argument(format!(
                "chain rank {} does not match basis rank {}",
                coef.ncols(),
                basis.rank
            )));
        }
        if contrast.weights.len() != coef.nrows() {
            return Err(Error::invalid_argument(format!(
                "contrast has {} weights but coefficients have {} rows",
                contrast.weights.len(),
                coef.nrows()
            )));
        }
        Ok(ContrastStream {
            coef_samples,
            basis,
            weights: contrast.weights.clone(),
        })
    }
}

impl SampleStream for ContrastStream<'_> {
    fn n_samples(&self) -> usize {
        self.coef_samples.len()
    }

    fn n_voxels(&self) -> usize {
        self.basis.n_voxels()
    }

    fn fill_row(&self, m: usize, out: &mut [f64]) {
        let coef = &self.coef_samples[m];
        let rank = self.basis.rank;
        let mut v = vec![0.0; rank];
        for (i, &w) in self.weights.iter().enumerate() {
            if w == 0.0 {
                continue;
            }
            for (r, vr) in v.iter_mut().enumerate() {
                *vr += w * coef[(i, r)];
            }
        }
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.basis.loading.column(j).dot_slice(&v);
        }
    }
}

trait DotSlice {
    fn dot_slice(&self, v: &[f64]) -> f64;
}

impl DotSlice for nalgebra::DVectorView<'_, f64> {
    fn dot_slice(&self, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (a, b) in self.iter().zip(v) {
            acc += a * b;
        }
        acc
    }
}

/// Dense `M' x Nv` sample matrix, for tests and small instances.
pub struct MatrixStream<'a>(pub &'a Mat);

impl SampleStream for MatrixStream<'_> {
    fn n_samples(&self) -> usize {
        self.0.nrows()
    }

    fn n_voxels(&self) -> usize {
        self.0.ncols()
    }

    fn fill_row(&self, m: usize, out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = self.0[(m, j)];
        }
    }
}

/// Posterior mean and standard deviation (denominator `M' - 1`), one pass.
pub fn contrast_moments<S: SampleStream>(stream: &S) -> Result<(Vec<f64>, Vec<f64>)> {
    let m_count = stream.n_samples();
    let nv = stream.n_voxels();
    if m_count < 2 {
        return Err(Error::invalid_argument(
            "need at least two samples for posterior moments",
        ));
    }
    let mut mean = vec![0.0; nv];
    let mut m2 = vec![0.0; nv];
    let mut row = vec![0.0; nv];
    for m in 0..m_count {
        stream.fill_row(m, &mut row);
        let k = (m + 1) as f64;
        for v in 0..nv {
            let delta = row[v] - mean[v];
            mean[v] += delta / k;
            m2[v] += delta * (row[v] - mean[v]);
        }
    }
    let denom = (m_count - 1) as f64;
    let std: Vec<f64> = m2.iter().map(|&s| (s / denom).sqrt()).collect();
    Ok((mean, std))
}

/// Per-voxel significance via simultaneous credible bands.
#[derive(Debug, Clone)]
pub struct SimBasResult {
    pub mean_map: Vec<f64>,
    pub std_map: Vec<f64>,
    /// Sorted max-statistics `z^(m)`, ascending.
    pub z_quantiles: Vec<f64>,
    /// `P(v)` in `{0, 1/M', ..., 1}`; out-of-mask voxels carry 1.
    pub psimbas: Vec<f64>,
    /// `psimbas(v) < alpha`.
    pub flags: Vec<bool>,
    pub alpha: f64,
    /// Floor applied to the standard deviation in every ratio.
    pub std_floor: f64,
    /// Which voxels participated (all, when no mask was given).
    pub in_mask: Vec<bool>,
}

impl SimBasResult {
    pub fn n_flagged(&self) -> usize {
        self.flags.iter().filter(|&&f| f).count()
    }

    /// The `q_(1-alpha)` multiplier of the joint band at an arbitrary level.
    pub fn band_quantile(&self, alpha: f64) -> f64 {
        let m = self.z_quantiles.len();
        let j = m - allowed_exceedances(alpha, m) + 1;
        self.z_quantiles[j - 1]
    }

    /// Whether the joint band `mean +- q_(1-alpha) s` excludes zero, per
    /// voxel. Out-of-mask voxels report `false`. Equals `psimbas < alpha`
    /// for every level.
    pub fn band_excludes_zero(&self, alpha: f64) -> Vec<bool> {
        let q = self.band_quantile(alpha);
        self.mean_map
            .iter()
            .zip(&self.std_map)
            .zip(&self.in_mask)
            .map(|((&c, &s), &inside)| inside && c.abs() > q * s.max(self.std_floor))
            .collect()
    }
}

/// Smallest integer `>= alpha * m`, with mathematically-integer products
/// snapped before the ceiling so the band/flag duality survives rounding.
fn allowed_exceedances(alpha: f64, m: usize) -> usize {
    let x = alpha * m as f64;
    let r = x.round();
    let xi = if (x - r).abs() < 1e-9 * (m as f64).max(1.0) {
        r
    } else {
        x.ceil()
    };
    (xi as usize).clamp(1, m)
}

/// Compute the SimBaS summary over all voxels.
pub fn simbas<S: SampleStream>(
    mean_map: &[f64],
    std_map: &[f64],
    stream: &S,
    alpha: f64,
) -> Result<SimBasResult> {
    simbas_masked(mean_map, std_map, stream, None, alpha)
}

/// [`simbas`] restricted to a voxel mask: out-of-mask voxels are excluded
/// from the max-statistics, and their score is pinned to 1 (never flagged).
pub fn simbas_masked<S: SampleStream>(
    mean_map: &[f64],
    std_map: &[f64],
    stream: &S,
    mask: Option<&[bool]>,
    alpha: f64,
) -> Result<SimBasResult> {
    let nv = stream.n_voxels();
    let m_count = stream.n_samples();
    if mean_map.len() != nv || std_map.len() != nv {
        return Err(Error::invalid_argument(format!(
            "map length mismatch: stream has {nv} voxels, maps have {} and {}",
            mean_map.len(),
            std_map.len()
        )));
    }
    if let Some(mk) = mask {
        if mk.len() != nv {
            return Err(Error::invalid_argument(format!(
                "mask length {} does not match voxel count {nv}",
                mk.len()
            )));
        }
    }
    if m_count < 2 {
        return Err(Error::invalid_argument("need at least two samples"));
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::invalid_argument("alpha must lie in (0, 1)"));
    }

    let in_mask: Vec<bool> = match mask {
        Some(mk) => mk.to_vec(),
        None => vec![true; nv],
    };
    if !in_mask.iter().any(|&b| b) {
        return Err(Error::DegeneratePosterior(
            "mask excludes every voxel".into(),
        ));
    }

    let max_std = std_map
        .iter()
        .zip(&in_mask)
        .filter(|(_, &inside)| inside)
        .map(|(&s, _)| s)
        .fold(0.0f64, f64::max);
    if max_std <= 0.0 || max_std.is_nan() {
        return Err(Error::DegeneratePosterior(
            "posterior standard deviation is zero at every in-mask voxel".into(),
        ));
    }
    let std_floor = 1e-12 * max_std;
    let s_of = |v: usize| std_map[v].max(std_floor);

    let mut z = vec![0.0f64; m_count];
    let mut row = vec![0.0; nv];
    for (m, zm) in z.iter_mut().enumerate() {
        stream.fill_row(m, &mut row);
        let mut max_dev = 0.0f64;
        for v in 0..nv {
            if !in_mask[v] {
                continue;
            }
            let dev = (row[v] - mean_map[v]).abs() / s_of(v);
            if dev > max_dev {
                max_dev = dev;
            }
        }
        *zm = max_dev;
    }
    z.sort_by(|a, b| a.partial_cmp(b).expect("finite max-statistics"));

    let mut psimbas = vec![1.0; nv];
    let mut flags = vec![false; nv];
    for v in 0..nv {
        if !in_mask[v] {
            continue;
        }
        let t = mean_map[v].abs() / s_of(v);
        // #{m : z^(m) >= t} via binary search on the sorted statistics.
        let below = z.partition_point(|&zm| zm < t);
        let k = m_count - below;
        psimbas[v] = k as f64 / m_count as f64;
        flags[v] = psimbas[v] < alpha;
    }

    Ok(SimBasResult {
        mean_map: mean_map.to_vec(),
        std_map: std_map.to_vec(),
        z_quantiles: z,
        psimbas,
        flags,
        alpha,
        std_floor,
        in_mask,
    })
}

/// Neighborhood used for cluster labeling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    /// Face-adjacent neighbors.
    Six,
    /// Face, edge, and corner neighbors.
    TwentySix,
}

impl Connectivity {
    pub fn from_count(n: usize) -> Result<Self> {
        match n {
            6 => Ok(Connectivity::Six),
            26 => Ok(Connectivity::TwentySix),
            other => Err(Error::invalid_argument(format!(
                "connectivity must be 6 or 26, got {other}"
            ))),
        }
    }
}

/// A connected component of flagged voxels.
#[derive(Debug, Clone)]
pub struct Cluster {
    /// Member voxels as zero-based `(i, j, k)` triples.
    pub voxels: Vec<[usize; 3]>,
    pub size: usize,
    /// Voxel with the largest `|mean|` inside the cluster.
    pub peak_voxel: [usize; 3],
    /// Signed mean value at the peak voxel.
    pub peak_value: f64,
}

/// Connected components of `true` voxels with at least `min_size` members,
/// sorted by size descending. Peaks come from `mean_map`.
pub fn extract_clusters(
    flags: &[bool],
    dims: [usize; 3],
    mean_map: &[f64],
    min_size: usize,
    connectivity: Connectivity,
) -> Result<Vec<Cluster>> {
    let nv = dims[0] * dims[1] * dims[2];
    if flags.len() != nv || mean_map.len() != nv {
        return Err(Error::invalid_argument(format!(
            "flag/mean length must equal {nv} for dims {dims:?}"
        )));
    }
    let [di, dj, dk] = dims;
    let idx = |i: usize, j: usize, k: usize| i + di * (j + dj * k);

    let mut visited = vec![false; nv];
    let mut clusters = Vec::new();
    let mut stack = Vec::new();

    for k0 in 0..dk {
        for j0 in 0..dj {
            for i0 in 0..di {
                let start = idx(i0, j0, k0);
                if !flags[start] || visited[start] {
                    continue;
                }
                visited[start] = true;
                stack.push([i0, j0, k0]);
                let mut voxels = Vec::new();
                while let Some([i, j, k]) = stack.pop() {
                    voxels.push([i, j, k]);
                    visit_neighbors(i, j, k, dims, connectivity, |ni, nj, nk| {
                        let l = idx(ni, nj, nk);
                        if flags[l] && !visited[l] {
                            visited[l] = true;
                            stack.push([ni, nj, nk]);
                        }
                    });
                }
                if voxels.len() < min_size {
                    continue;
                }
                voxels.sort_unstable();
                let mut peak = voxels[0];
                let mut peak_abs = -1.0f64;
                for &[i, j, k] in &voxels {
                    let v = mean_map[idx(i, j, k)].abs();
                    if v > peak_abs {
                        peak_abs = v;
                        peak = [i, j, k];
                    }
                }
                clusters.push(Cluster {
                    size: voxels.len(),
                    peak_value: mean_map[idx(peak[0], peak[1], peak[2])],
                    peak_voxel: peak,
                    voxels,
                });
            }
        }
    }

    clusters.sort_by(|a, b| b.size.cmp(&a.size).then(a.voxels[0].cmp(&b.voxels[0])));
    Ok(clusters)
}

fn visit_neighbors(
    i: usize,
    j: usize,
    k: usize,
    dims: [usize; 3],
    connectivity: Connectivity,
    mut f: impl FnMut(usize, usize, usize),
) {
    let deltas: &[[i64; 3]] = match connectivity {
        Connectivity::Six => &[
            [-1, 0, 0],
            [1, 0, 0],
            [0, -1, 0],
            [0, 1, 0],
            [0, 0, -1],
            [0, 0, 1],
        ],
        Connectivity::TwentySix => &ALL_26,
    };
    for d in deltas {
        let ni = i as i64 + d[0];
        let nj = j as i64 + d[1];
        let nk = k as i64 + d[2];
        if ni >= 0
            && nj >= 0
            && nk >= 0
            && (ni as usize) < dims[0]
            && (nj as usize) < dims[1]
            && (nk as usize) < dims[2]
        {
            f(ni as usize, nj as usize, nk as usize);
        }
    }
}

const ALL_26: [[i64; 3]; 26] = build_26();

const fn build_26() -> [[i64; 3]; 26] {
    let mut out = [[0i64; 3]; 26];
    let mut n = 0;
    let mut a = -1i64;
    while a <= 1 {
        let mut b = -1i64;
        while b <= 1 {
            let mut c = -1i64;
            while c <= 1 {
                if !(a == 0 && b == 0 && c == 0) {
                    out[n] = [a, b, c];
                    n += 1;
                }
                c += 1;
            }
            b += 1;
        }
        a += 1;
    }
    out
}

/// `cluster_id,size,peak_i,peak_j,peak_k,peak_value` rows, floats with 17
/// significant digits. Ids are 1-based in size order.
pub fn clusters_to_csv(clusters: &[Cluster]) -> String {
    let mut out = String::from("cluster_id,size,peak_i,peak_j,peak_k,peak_value\n");
    for (id, c) in clusters.iter().enumerate() {
        out.push_str(&format!(
            "{},{},{},{},{},{:.16e}\n",
            id + 1,
            c.size,
            c.peak_voxel[0],
            c.peak_voxel[1],
            c.peak_voxel[2],
            c.peak_value
        ));
    }
    out
}
