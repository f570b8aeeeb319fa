//! Precoder codebooks: Grassmann max–min packings and permutation codebooks.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CMatrix;
use crate::rng;
use crate::scalar::{Cx, Real};
use crate::zfdfe::{Precoder, ORTHONORMAL_TOL};

/// Largest permutation codebook built without an explicit cap.
pub const DEFAULT_PERMUTATION_CAP: usize = 10_000;
/// Default number of candidate evaluations for the packing optimizer.
pub const DEFAULT_BUDGET: usize = 50_000;
/// Share of the budget spent on farthest-point initialization.
const INIT_SHARE: f64 = 0.2;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Metric {
    Proj2,
    FubiniStudy,
    None,
}

impl Metric {
    /// Metric actually used to measure distances; `None` falls back to proj2.
    fn effective(self) -> Metric {
        match self {
            Metric::None => Metric::Proj2,
            m => m,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Metric::Proj2 => "proj2",
            Metric::FubiniStudy => "fubini-study",
            Metric::None => "none",
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "proj2" => Ok(Metric::Proj2),
            "fubini-study" | "fs" => Ok(Metric::FubiniStudy),
            "none" => Ok(Metric::None),
            other => Err(Error::Format(format!("unknown metric `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CodebookKind {
    Grassmann,
    Permutation,
}

fn check_pair<T: Real>(p1: &Precoder<T>, p2: &Precoder<T>) -> Result<()> {
    let (a, b) = (p1.matrix(), p2.matrix());
    if a.shape() != b.shape() {
        return Err(Error::ShapeMismatch(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// Projection 2-norm distance `‖P̄₁P̄₁ᴴ − P̄₂P̄₂ᴴ‖₂`.
pub fn dist_proj2<T: Real>(p1: &Precoder<T>, p2: &Precoder<T>) -> Result<T> {
    check_pair(p1, p2)?;
    let (a, b) = (p1.matrix(), p2.matrix());
    let diff = &(a * &a.adjoint()) - &(b * &b.adjoint());
    Ok(diff.spectral_norm().min(T::one()))
}

/// Fubini–Study distance `arccos |det(P̄₁ᴴP̄₂)|`.
pub fn dist_fs<T: Real>(p1: &Precoder<T>, p2: &Precoder<T>) -> Result<T> {
    check_pair(p1, p2)?;
    Ok(fs_from_cross(&p1.matrix().adj_mul(p2.matrix())))
}

fn fs_from_cross<T: Real>(cross: &CMatrix<T>) -> T {
    cross.det().norm().min(T::one()).acos()
}

/// Distance through principal angles: `P̄₁ᴴP̄₂` has singular values `cos θᵢ`,
/// so proj2 is `sin θ_max`. Faster than forming projectors.
fn fast_distance(metric: Metric, a: &CMatrix<f64>, b: &CMatrix<f64>) -> f64 {
    let cross = a.adj_mul(b);
    match metric.effective() {
        Metric::FubiniStudy => fs_from_cross(&cross),
        _ => {
            let smin2 = if cross.rows() == 1 {
                cross[(0, 0)].norm_sqr()
            } else {
                let g = cross.adj_mul(&cross).hermitian_part();
                *g.hermitian_eigenvalues().last().expect("non-empty")
            };
            (1.0 - smin2).max(0.0).sqrt().min(1.0)
        }
    }
}

fn distance(metric: Metric, p1: &Precoder<f64>, p2: &Precoder<f64>) -> f64 {
    match metric.effective() {
        Metric::FubiniStudy => dist_fs(p1, p2),
        _ => dist_proj2(p1, p2),
    }
    .expect("codebook entries share a shape")
}

/// Ordered collection of normalized precoders.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    nt: usize,
    k: usize,
    kind: CodebookKind,
    metric: Metric,
    build_seed: u64,
    min_distance: f64,
    entries: Vec<Precoder<f64>>,
}

impl Codebook {
    /// Builds a codebook from explicit entries; `min_distance` is recomputed.
    pub fn new(entries: Vec<Precoder<f64>>, kind: CodebookKind, metric: Metric, build_seed: u64) -> Result<Self> {
        let first = entries.first().ok_or(Error::TooFewEntries(0))?;
        let (nt, k) = (first.nt(), first.k());
        for (i, e) in entries.iter().enumerate() {
            if e.nt() != nt || e.k() != k {
                return Err(Error::ShapeMismatch(format!("entry {i} is {}x{}, expected {nt}x{k}", e.nt(), e.k())));
            }
            if !e.is_normalized() {
                return Err(Error::Domain(format!("entry {i} is not a normalized precoder")));
            }
        }
        if kind == CodebookKind::Permutation {
            let want = permutation_count(nt, k);
            if want != entries.len() as u128 {
                return Err(Error::Domain(format!("permutation codebook needs {want} entries, got {}", entries.len())));
            }
        }
        let mut cb = Self { nt, k, kind, metric, build_seed, min_distance: f64::INFINITY, entries };
        if cb.entries.len() > 1 {
            cb.min_distance = min_pairwise_distance(&cb, metric)?;
        }
        Ok(cb)
    }

    pub fn nt(&self) -> usize {
        self.nt
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn kind(&self) -> CodebookKind {
        self.kind
    }

    pub fn metric(&self) -> Metric {
        self.metric
    }

    pub fn build_seed(&self) -> u64 {
        self.build_seed
    }

    /// Minimum pairwise distance under the codebook's metric (proj2 for
    /// `Metric::None`); `+∞` for a single entry.
    pub fn min_distance(&self) -> f64 {
        self.min_distance
    }

    pub fn entries(&self) -> &[Precoder<f64>] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Feedback bits needed to index the codebook.
    pub fn feedback_bits(&self) -> u32 {
        usize::BITS - (self.entries.len().max(1) - 1).leading_zeros()
    }

    pub fn to_json(&self) -> Result<String> {
        let file = CodebookFile {
            nt: self.nt,
            k: self.k,
            kind: self.kind,
            metric: self.metric,
            build_seed: self.build_seed,
            min_distance: self.min_distance.is_finite().then_some(self.min_distance),
            entries: self
                .entries
                .iter()
                .map(|e| e.matrix().as_slice().iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let file: CodebookFile = serde_json::from_str(s)?;
        let mut entries = Vec::with_capacity(file.entries.len());
        for (i, flat) in file.entries.into_iter().enumerate() {
            if flat.len() != file.nt * file.k {
                return Err(Error::Format(format!("entry {i} has {} values, expected {}", flat.len(), file.nt * file.k)));
            }
            let m = CMatrix::from_vec(file.nt, file.k, flat.into_iter().map(|[re, im]| Cx::new(re, im)).collect());
            entries.push(Precoder::normalized(m).map_err(|e| Error::Format(format!("entry {i}: {e}")))?);
        }
        let cb = Self::new(entries, file.kind, file.metric, file.build_seed)?;
        let stored = file.min_distance.unwrap_or(f64::INFINITY);
        let consistent = if stored.is_infinite() || cb.min_distance.is_infinite() {
            stored == cb.min_distance
        } else {
            (stored - cb.min_distance).abs() <= 1e-12
        };
        if !consistent {
            return Err(Error::Format(format!("stored min_distance {stored} disagrees with recomputed {}", cb.min_distance)));
        }
        Ok(cb)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}

#[derive(Serialize, Deserialize)]
struct CodebookFile {
    nt: usize,
    k: usize,
    kind: CodebookKind,
    metric: Metric,
    build_seed: u64,
    min_distance: Option<f64>,
    entries: Vec<Vec<[f64; 2]>>,
}

/// Exact minimum over all unordered pairs of entries.
pub fn min_pairwise_distance(cb: &Codebook, metric: Metric) -> Result<f64> {
    let n = cb.entries.len();
    if n < 2 {
        return Err(Error::TooFewEntries(n));
    }
    let best = (0..n)
        .into_par_iter()
        .map(|i| {
            ((i + 1)..n)
                .map(|j| distance(metric, &cb.entries[i], &cb.entries[j]))
                .fold(f64::INFINITY, f64::min)
        })
        .reduce(|| f64::INFINITY, f64::min);
    Ok(best)
}

/// `nt! / (nt − k)!`
pub fn permutation_count(nt: usize, k: usize) -> u128 {
    if k > nt {
        return 0;
    }
    ((nt - k + 1)..=nt).fold(1u128, |acc, x| acc.saturating_mul(x as u128))
}

/// Index tuples of `k` distinct columns out of `nt`, in lexicographic order.
pub fn permutation_tuples(nt: usize, k: usize) -> Vec<Vec<usize>> {
    fn rec(nt: usize, k: usize, cur: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for c in 0..nt {
            if !used[c] {
                used[c] = true;
                cur.push(c);
                rec(nt, k, cur, used, out);
                cur.pop();
                used[c] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(nt, k, &mut Vec::with_capacity(k), &mut vec![false; nt], &mut out);
    out
}

/// Column-selection matrix whose column `j` is `e_{tuple[j]}`.
pub fn selection_matrix<T: Real>(nt: usize, tuple: &[usize]) -> CMatrix<T> {
    let mut m = CMatrix::zeros(nt, tuple.len());
    for (j, &c) in tuple.iter().enumerate() {
        m[(c, j)] = Cx::new(T::one(), T::zero());
    }
    m
}

/// Position of `tuple` in the lexicographic enumeration of [`permutation_tuples`].
pub fn permutation_rank(nt: usize, tuple: &[usize]) -> usize {
    let k = tuple.len();
    let mut rank = 0usize;
    let mut used = vec![false; nt];
    for (pos, &c) in tuple.iter().enumerate() {
        let smaller = (0..c).filter(|&x| !used[x]).count();
        let below = permutation_count(nt - pos - 1, k - pos - 1) as usize;
        rank += smaller * below;
        used[c] = true;
    }
    rank
}

pub fn build_permutation_codebook(nt: usize, k: usize) -> Result<Codebook> {
    build_permutation_codebook_capped(nt, k, DEFAULT_PERMUTATION_CAP)
}

pub fn build_permutation_codebook_capped(nt: usize, k: usize, cap: usize) -> Result<Codebook> {
    if k == 0 || k > nt {
        return Err(Error::Domain(format!("need 1 <= k <= nt, got k={k}, nt={nt}")));
    }
    let count = permutation_count(nt, k);
    if count > cap as u128 {
        return Err(Error::TooLarge { count, cap });
    }
    let entries = permutation_tuples(nt, k)
        .iter()
        .map(|t| Precoder::normalized_unchecked(selection_matrix(nt, t)))
        .collect();
    Codebook::new(entries, CodebookKind::Permutation, Metric::None, 0)
}

/// Packing optimizer output with its best-so-far distance after every
/// candidate evaluation.
#[derive(Debug, Clone)]
pub struct GrassmannBuild {
    pub codebook: Codebook,
    /// Optimizer's running minimum distance (non-decreasing once every slot is filled).
    pub trace: Vec<f64>,
    pub evaluations: usize,
}

fn random_point<R: Rng + ?Sized>(rng: &mut R, nt: usize, k: usize) -> CMatrix<f64> {
    rng::random_stiefel(rng, nt, k)
}

fn nearest(metric: Metric, pts: &[CMatrix<f64>], x: &CMatrix<f64>, skip: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, usize::MAX);
    for (j, p) in pts.iter().enumerate() {
        if j == skip {
            continue;
        }
        let d = fast_distance(metric, x, p);
        if d < best.0 {
            best = (d, j);
        }
    }
    best
}

/// Greedy max–min Grassmann packing.
///
/// Farthest-point initialization over random Stiefel samples, then repeated
/// moves of one point of the closest pair along the tangent direction away
/// from its neighbour; a move is kept only if it strictly increases that
/// point's nearest-neighbour distance above the current minimum.
pub fn build_grassmann_codebook(nt: usize, k: usize, size: usize, metric: Metric, budget: usize, seed: u64) -> Result<Codebook> {
    build_grassmann_traced(nt, k, size, metric, budget, seed).map(|b| b.codebook)
}

pub fn build_grassmann_traced(nt: usize, k: usize, size: usize, metric: Metric, budget: usize, seed: u64) -> Result<GrassmannBuild> {
    if k == 0 || k > nt {
        return Err(Error::Domain(format!("need 1 <= k <= nt, got k={k}, nt={nt}")));
    }
    if size == 0 {
        return Err(Error::Domain("codebook size must be at least 1".into()));
    }
    if size > 1 << 14 {
        return Err(Error::Domain(format!("codebook size {size} exceeds 16384")));
    }
    if budget < size {
        return Err(Error::Domain(format!("budget {budget} cannot fill {size} entries")));
    }
    let per_slot = (((budget as f64 * INIT_SHARE) / size as f64) as usize).max(1);
    let mut pts: Vec<CMatrix<f64>> = Vec::with_capacity(size);
    let mut trace = Vec::with_capacity(budget);
    let mut evaluations = 0usize;

    for slot in 0..size {
        let cands: Vec<(f64, CMatrix<f64>)> = (0..per_slot)
            .into_par_iter()
            .map(|c| {
                let mut r = rng::stream(seed, &[1, slot as u64, c as u64]);
                let x = random_point(&mut r, nt, k);
                (nearest(metric, &pts, &x, usize::MAX).0, x)
            })
            .collect();
        evaluations += cands.len();
        let (best_i, _) = cands
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |(bi, bd), (i, (d, _))| if *d > bd { (i, *d) } else { (bi, bd) });
        pts.push(cands.into_iter().nth(best_i).expect("non-empty").1);
    }
    // The running minimum is only meaningful once every slot is filled.
    trace.resize(evaluations, f64::NAN);

    let mut nn: Vec<(f64, usize)> = (0..size).map(|i| nearest(metric, &pts, &pts[i], i)).collect();
    let global = |nn: &[(f64, usize)]| nn.iter().map(|x| x.0).fold(f64::INFINITY, f64::min);
    if let Some(last) = trace.last_mut() {
        *last = global(&nn);
    }

    let mut r = rng::stream(seed, &[2]);
    let mut step = 0.3f64;
    while size > 1 && evaluations < budget {
        let (i0, &(dmin, j0)) = nn
            .iter()
            .enumerate()
            .min_by(|a, b| a.1 .0.partial_cmp(&b.1 .0).unwrap_or(std::cmp::Ordering::Equal))
            .expect("size > 1");
        let (i, j) = if r.random::<bool>() { (i0, j0) } else { (j0, i0) };
        let p = &pts[i];
        let q = &pts[j];
        // Descent direction of ‖PᴴQ‖²_F projected on the tangent space at P.
        let pull = q * &q.adj_mul(p);
        let tangent = &pull - &(p * &p.adj_mul(&pull));
        let noise: CMatrix<f64> = rng::complex_gaussian_matrix(&mut r, nt, k);
        let noise = &noise - &(p * &p.adj_mul(&noise));
        let tn = tangent.frob_norm();
        let dir = if tn > 1e-12 { tangent.scale(-1.0 / tn) } else { CMatrix::zeros(nt, k) };
        let nn_noise = noise.frob_norm().max(1e-300);
        let cand = &(p + &dir.scale(step)) + &noise.scale(0.5 * step / nn_noise);
        evaluations += 1;
        let Some(cand) = cand.orthonormalize_columns() else {
            trace.push(global(&nn));
            continue;
        };
        let dists: Vec<f64> = pts.iter().enumerate().map(|(l, x)| if l == i { f64::INFINITY } else { fast_distance(metric, &cand, x) }).collect();
        let (cd, cj) = dists.iter().enumerate().fold((f64::INFINITY, usize::MAX), |acc, (l, &d)| if d < acc.0 { (d, l) } else { acc });
        if cd > dmin {
            pts[i] = cand;
            nn[i] = (cd, cj);
            for l in 0..size {
                if l == i {
                    continue;
                }
                if nn[l].1 == i {
                    nn[l] = nearest(metric, &pts, &pts[l], l);
                } else if dists[l] < nn[l].0 {
                    nn[l] = (dists[l], i);
                }
            }
            step = (step * 1.5).min(1.0);
        } else {
            step *= 0.8;
            if step < 1e-7 {
                step = 0.3;
            }
        }
        trace.push(global(&nn));
    }

    let entries = pts.into_iter().map(Precoder::normalized_unchecked).collect::<Vec<_>>();
    for (i, e) in entries.iter().enumerate() {
        debug_assert!(e.matrix().orthonormality_error() <= ORTHONORMAL_TOL, "entry {i}");
    }
    let codebook = Codebook::new(entries, CodebookKind::Grassmann, metric, seed)?;
    Ok(GrassmannBuild { codebook, trace, evaluations })
}
