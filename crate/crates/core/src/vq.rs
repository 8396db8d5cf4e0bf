//! K-means vector quantization.
//!
//! Exact (brute-force) nearest-centroid assignment, mean updates accumulated in
//! `f64`, full Lloyd runs for post-training compression and the decoupled
//! schedule used during quantization-aware training: centroids are refreshed
//! every step, assignments only every `assign_every` steps up to a cutoff.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::matrix::{Matrix, MatrixRef, Scalar};
use crate::model::{Field, GaussianCloud, ParamGroup};
use crate::par;

/// Rows per work unit in [`assign`]. No `rows × k` distance matrix is ever built.
pub const DEFAULT_CHUNK_ROWS: usize = 1024;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum VqError {
    #[error("cannot build a codebook from an empty data set")]
    EmptyData,
    #[error("codebook size must be at least 1")]
    ZeroK,
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("length mismatch: expected {expected} assignments, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("assignment {index} at row {row} is out of range for k = {k}")]
    IndexOutOfRange { row: usize, index: u32, k: usize },
}

/// Centroid seeding strategy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Init {
    #[default]
    KMeansPlusPlus,
    /// Uniform sample of rows without replacement.
    RandomSample,
}

/// `k` centroids plus the per-row code of every vector they quantize.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook<T = f32> {
    pub centroids: Matrix<T>,
    pub assignments: Vec<u32>,
}

impl<T: Scalar> Codebook<T> {
    pub fn k(&self) -> usize {
        self.centroids.rows()
    }

    pub fn dim(&self) -> usize {
        self.centroids.cols()
    }

    /// Checks that every assignment indexes an existing centroid.
    pub fn check_assignments(&self) -> Result<(), VqError> {
        let k = self.k();
        match self.assignments.iter().position(|&a| a as usize >= k) {
            Some(row) => Err(VqError::IndexOutOfRange {
                row,
                index: self.assignments[row],
                k,
            }),
            None => Ok(()),
        }
    }

    /// Centroid assigned to row `i`.
    pub fn code(&self, i: usize) -> &[T] {
        self.centroids.row(self.assignments[i] as usize)
    }

    /// `rows × dim` matrix of each row's centroid.
    pub fn reconstruct(&self) -> Matrix<T> {
        let mut data = Vec::with_capacity(self.assignments.len() * self.dim());
        for &a in &self.assignments {
            data.extend_from_slice(self.centroids.row(a as usize));
        }
        Matrix::from_vec(self.assignments.len(), self.dim(), data)
    }

    /// Keeps only the listed rows' assignments (in the given order).
    pub fn retain_rows(&mut self, keep: &[usize]) {
        self.assignments = keep.iter().map(|&i| self.assignments[i]).collect();
    }
}

#[inline]
fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(&x, &y)| {
            let d = x.to_f64() - y.to_f64();
            d * d
        })
        .sum()
}

/// Nearest centroid to `row` and its squared distance. Ties go to the lowest index.
#[inline]
pub fn nearest<T: Scalar>(row: &[T], centroids: MatrixRef<'_, T>) -> (u32, f64) {
    let mut best = 0u32;
    let mut best_d = f64::INFINITY;
    for j in 0..centroids.rows() {
        let c = centroids.row(j);
        let mut d = 0.0;
        let mut pruned = false;
        for (&x, &y) in row.iter().zip(c) {
            let t = x.to_f64() - y.to_f64();
            d += t * t;
            // Partial sums only grow; a tie cannot win either.
            if d >= best_d {
                pruned = true;
                break;
            }
        }
        if !pruned && d < best_d {
            best_d = d;
            best = j as u32;
        }
    }
    (best, best_d)
}

/// Assigns each row to its nearest centroid by squared Euclidean distance.
///
/// Panics if the column counts differ or `centroids` is empty while `data` is not.
pub fn assign<T: Scalar>(data: MatrixRef<'_, T>, centroids: MatrixRef<'_, T>) -> Vec<u32> {
    assign_chunked(data, centroids, DEFAULT_CHUNK_ROWS)
}

/// [`assign`] with an explicit work-unit size. The result does not depend on `chunk_rows`.
pub fn assign_chunked<T: Scalar>(
    data: MatrixRef<'_, T>,
    centroids: MatrixRef<'_, T>,
    chunk_rows: usize,
) -> Vec<u32> {
    assert_eq!(
        data.cols(),
        centroids.cols(),
        "data/centroid dimension mismatch"
    );
    if data.rows() == 0 {
        return Vec::new();
    }
    assert!(centroids.rows() > 0, "cannot assign to an empty codebook");
    let d = data.cols();
    let mut out = vec![0u32; data.rows()];
    let chunk_rows = chunk_rows.max(1);
    par::for_each_chunk_mut(&mut out, chunk_rows, |ci, out| {
        let start = ci * chunk_rows;
        for (r, slot) in out.iter_mut().enumerate() {
            let i = start + r;
            let row = &data.as_slice()[i * d..(i + 1) * d];
            *slot = nearest(row, centroids).0;
        }
    });
    out
}

/// Result of one centroid update.
#[derive(Debug, Clone, PartialEq)]
pub struct CentroidUpdate<T> {
    pub centroids: Matrix<T>,
    /// Clusters without members; their previous centroid was kept.
    pub empty: Vec<usize>,
}

/// Row indices grouped by cluster (stable within each cluster) and cluster offsets.
fn members_by_cluster(assignments: &[u32], k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut offsets = vec![0usize; k + 1];
    for &a in assignments {
        offsets[a as usize + 1] += 1;
    }
    for j in 0..k {
        offsets[j + 1] += offsets[j];
    }
    let mut cursor = offsets.clone();
    let mut members = vec![0usize; assignments.len()];
    for (i, &a) in assignments.iter().enumerate() {
        members[cursor[a as usize]] = i;
        cursor[a as usize] += 1;
    }
    (members, offsets)
}

/// Recomputes each centroid as the mean of its members.
///
/// Sums run in `f64` over members in row order, so the result is independent
/// of the thread count. Empty clusters keep their centroid from `previous` and
/// are listed in [`CentroidUpdate::empty`].
pub fn update_centroids<T: Scalar>(
    data: MatrixRef<'_, T>,
    assignments: &[u32],
    previous: MatrixRef<'_, T>,
) -> CentroidUpdate<T> {
    assert_eq!(data.rows(), assignments.len(), "assignment length mismatch");
    assert_eq!(
        data.cols(),
        previous.cols(),
        "data/centroid dimension mismatch"
    );
    let k = previous.rows();
    let d = data.cols();
    let (members, offsets) = members_by_cluster(assignments, k);
    let rows: Vec<Option<Vec<T>>> = par::map_range(k, |j| {
        let m = &members[offsets[j]..offsets[j + 1]];
        if m.is_empty() {
            return None;
        }
        let mut acc = vec![0f64; d];
        for &i in m {
            for (a, &x) in acc.iter_mut().zip(data.row(i)) {
                *a += x.to_f64();
            }
        }
        let n = m.len() as f64;
        Some(acc.into_iter().map(|s| T::from_f64(s / n)).collect())
    });
    let mut centroids = previous.to_owned();
    let mut empty = Vec::new();
    for (j, row) in rows.into_iter().enumerate() {
        match row {
            Some(r) => centroids.row_mut(j).copy_from_slice(&r),
            None => empty.push(j),
        }
    }
    CentroidUpdate { centroids, empty }
}

/// Moves each empty centroid onto a distinct row that is farthest from its own centroid.
///
/// Assignments are left as they are; the next [`assign`] pass picks up the new centroids.
pub fn reseed_empty<T: Scalar>(
    data: MatrixRef<'_, T>,
    assignments: &[u32],
    centroids: &mut Matrix<T>,
    empty: &[usize],
) {
    if empty.is_empty() || data.rows() == 0 {
        return;
    }
    let mut dist: Vec<(f64, usize)> = (0..data.rows())
        .map(|i| {
            let c = centroids.row(assignments[i] as usize);
            (squared_distance(data.row(i), c), i)
        })
        .collect();
    // Largest distance first, lowest row index among equals.
    dist.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    for (&j, &(d, i)) in empty.iter().zip(&dist) {
        if d <= 0.0 {
            break;
        }
        centroids.row_mut(j).copy_from_slice(data.row(i));
    }
}

/// Within-cluster sum of squared distances.
pub fn sse<T: Scalar>(
    data: MatrixRef<'_, T>,
    assignments: &[u32],
    centroids: MatrixRef<'_, T>,
) -> f64 {
    let d = data.cols();
    let partial = par::map_chunks(assignments, DEFAULT_CHUNK_ROWS, |ci, chunk| {
        let start = ci * DEFAULT_CHUNK_ROWS;
        chunk
            .iter()
            .enumerate()
            .map(|(r, &a)| {
                let i = start + r;
                squared_distance(
                    &data.as_slice()[i * d..(i + 1) * d],
                    centroids.row(a as usize),
                )
            })
            .sum::<f64>()
    });
    partial.into_iter().sum()
}

fn kmeans_plus_plus<T: Scalar>(
    data: MatrixRef<'_, T>,
    k: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<usize> {
    let n = data.rows();
    let mut chosen = Vec::with_capacity(k);
    let mut taken = vec![false; n];
    let first = rng.random_range(0..n);
    chosen.push(first);
    taken[first] = true;
    let mut min_d: Vec<f64> = par::map_range(n, |i| squared_distance(data.row(i), data.row(first)));
    while chosen.len() < k {
        let total: f64 = min_d.iter().sum();
        let next = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &w) in min_d.iter().enumerate() {
                acc += w;
                if w > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            // Rounding can leave `target` just past the final sum.
            pick.unwrap_or_else(|| min_d.iter().rposition(|&w| w > 0.0).expect("total > 0"))
        } else {
            // Every remaining row duplicates a chosen centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !taken[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen.push(next);
        taken[next] = true;
        let c = data.row(next);
        let updated: Vec<f64> =
            par::map_range(n, |i| min_d[i].min(squared_distance(data.row(i), c)));
        min_d = updated;
    }
    chosen
}

/// Seeds `k` centroids from `data` and assigns every row once.
///
/// With `k > rows` the codebook holds every row followed by `k - rows` copies of the last one.
pub fn init_codebook<T: Scalar>(
    data: MatrixRef<'_, T>,
    k: usize,
    init: Init,
    seed: u64,
) -> Result<Codebook<T>, VqError> {
    let n = data.rows();
    if n == 0 {
        return Err(VqError::EmptyData);
    }
    if k == 0 {
        return Err(VqError::ZeroK);
    }
    let picks: Vec<usize> = if k >= n {
        if k > n {
            log::warn!(
                "codebook size {k} exceeds {n} rows; padding with duplicates of the last row"
            );
        }
        (0..n).chain(std::iter::repeat_n(n - 1, k - n)).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        match init {
            Init::RandomSample => index::sample(&mut rng, n, k).into_vec(),
            Init::KMeansPlusPlus => kmeans_plus_plus(data, k, &mut rng),
        }
    };
    let mut centroids = Vec::with_capacity(k * data.cols());
    for &i in &picks {
        centroids.extend_from_slice(data.row(i));
    }
    let centroids = Matrix::from_vec(k, data.cols(), centroids);
    let assignments = assign(data, centroids.view());
    Ok(Codebook {
        centroids,
        assignments,
    })
}

/// Parameters of one K-means run.
#[derive(Debug, Clone, PartialEq)]
pub struct KMeansParams {
    pub k: usize,
    /// Lloyd iterations after seeding (0 returns the seeded codebook).
    pub iters: usize,
    pub init: Init,
    pub seed: u64,
    pub reseed_empty: bool,
}

impl KMeansParams {
    pub fn new(k: usize, iters: usize) -> Self {
        Self {
            k,
            iters,
            init: Init::KMeansPlusPlus,
            seed: 0,
            reseed_empty: true,
        }
    }
}

/// Output of [`lloyd`].
#[derive(Debug, Clone, PartialEq)]
pub struct LloydRun<T> {
    pub codebook: Codebook<T>,
    /// Objective after seeding, then after every iteration.
    pub sse_trace: Vec<f64>,
    pub iterations: usize,
    /// True when an assignment pass changed nothing.
    pub converged: bool,
}

/// Lloyd's algorithm: alternate centroid means and nearest-centroid assignment.
pub fn lloyd<T: Scalar>(
    data: MatrixRef<'_, T>,
    params: &KMeansParams,
) -> Result<LloydRun<T>, VqError> {
    let mut book = init_codebook(data, params.k, params.init, params.seed)?;
    let mut trace = vec![sse(data, &book.assignments, book.centroids.view())];
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..params.iters {
        let update = update_centroids(data, &book.assignments, book.centroids.view());
        book.centroids = update.centroids;
        if params.reseed_empty {
            reseed_empty(data, &book.assignments, &mut book.centroids, &update.empty);
        }
        let next = assign(data, book.centroids.view());
        let changed = next != book.assignments;
        book.assignments = next;
        iterations += 1;
        trace.push(sse(data, &book.assignments, book.centroids.view()));
        if !changed {
            converged = true;
            break;
        }
    }
    Ok(LloydRun {
        codebook: book,
        sse_trace: trace,
        iterations,
        converged,
    })
}

/// When assignments are refreshed during quantization-aware training.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AssignSchedule {
    pub assign_every: usize,
    /// Last step (inclusive) at which assignments may change.
    pub assign_until: usize,
}

impl AssignSchedule {
    pub fn refreshes_at(&self, step: usize) -> bool {
        self.assign_every > 0 && step.is_multiple_of(self.assign_every) && step <= self.assign_until
    }
}

/// What [`qat_update`] did.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct QatUpdate {
    pub reassigned: bool,
    pub empty: Vec<usize>,
}

/// One training-time codebook update from the current non-quantized parameters.
///
/// Centroids are recomputed on every call. On refresh steps the rows are then
/// reassigned to those fresh centroids and the centroids recomputed once more,
/// so a row that is itself a centroid keeps its own code.
pub fn qat_update<T: Scalar>(
    book: &mut Codebook<T>,
    data: MatrixRef<'_, T>,
    step: usize,
    schedule: &AssignSchedule,
) -> QatUpdate {
    let mut update = update_centroids(data, &book.assignments, book.centroids.view());
    book.centroids = update.centroids;
    let reassigned = schedule.refreshes_at(step);
    if reassigned {
        book.assignments = assign(data, book.centroids.view());
        update = update_centroids(data, &book.assignments, book.centroids.view());
        book.centroids = update.centroids;
    }
    QatUpdate {
        reassigned,
        empty: update.empty,
    }
}

/// Codebook sizes and K-means settings for the four 3D parameter groups.
#[derive(Debug, Clone, PartialEq)]
pub struct VqConfig {
    pub k_dc: usize,
    pub k_sh: usize,
    pub k_scale: usize,
    pub k_rot: usize,
    pub lloyd_iters: usize,
    pub init: Init,
    pub seed: u64,
    pub reseed_empty: bool,
}

impl Default for VqConfig {
    fn default() -> Self {
        Self {
            k_dc: 4096,
            k_sh: 4096,
            k_scale: 16384,
            k_rot: 16384,
            lloyd_iters: 30,
            init: Init::KMeansPlusPlus,
            seed: 0,
            reseed_empty: true,
        }
    }
}

impl VqConfig {
    /// The same codebook size for all four groups.
    pub fn uniform(k: usize) -> Self {
        Self {
            k_dc: k,
            k_sh: k,
            k_scale: k,
            k_rot: k,
            ..Self::default()
        }
    }

    pub fn k(&self, group: ParamGroup) -> usize {
        match group {
            ParamGroup::ColorDc => self.k_dc,
            ParamGroup::Sh => self.k_sh,
            ParamGroup::Scale => self.k_scale,
            ParamGroup::Rotation => self.k_rot,
        }
    }

    fn params(&self, group: ParamGroup) -> KMeansParams {
        KMeansParams {
            k: self.k(group),
            iters: self.lloyd_iters,
            init: self.init,
            // Independent but reproducible streams per group.
            seed: self
                .seed
                .wrapping_add((group.index() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)),
            reseed_empty: self.reseed_empty,
        }
    }
}

/// One codebook per quantized group. `sh` is `None` when SH is dropped.
#[derive(Debug, Clone, PartialEq)]
pub struct CloudCodebooks {
    pub dc: Codebook,
    pub sh: Option<Codebook>,
    pub scale: Codebook,
    pub rotation: Codebook,
}

impl CloudCodebooks {
    pub fn get(&self, group: ParamGroup) -> Option<&Codebook> {
        match group {
            ParamGroup::ColorDc => Some(&self.dc),
            ParamGroup::Sh => self.sh.as_ref(),
            ParamGroup::Scale => Some(&self.scale),
            ParamGroup::Rotation => Some(&self.rotation),
        }
    }

    pub fn get_mut(&mut self, group: ParamGroup) -> Option<&mut Codebook> {
        match group {
            ParamGroup::ColorDc => Some(&mut self.dc),
            ParamGroup::Sh => self.sh.as_mut(),
            ParamGroup::Scale => Some(&mut self.scale),
            ParamGroup::Rotation => Some(&mut self.rotation),
        }
    }

    /// Number of rows the assignments describe (taken from the DC book).
    pub fn len(&self) -> usize {
        self.dc.assignments.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks dimensions, assignment lengths and index ranges against `n` rows.
    pub fn check(&self, n: usize) -> Result<(), VqError> {
        for group in ParamGroup::ALL {
            let Some(book) = self.get(group) else {
                continue;
            };
            if book.dim() != group.dim() {
                return Err(VqError::DimensionMismatch {
                    expected: group.dim(),
                    found: book.dim(),
                });
            }
            if book.assignments.len() != n {
                return Err(VqError::LengthMismatch {
                    expected: n,
                    found: book.assignments.len(),
                });
            }
            book.check_assignments()?;
        }
        Ok(())
    }
}

/// A cloud whose group blocks equal their centroids, with the books that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedCloud {
    pub cloud: GaussianCloud,
    pub codebooks: CloudCodebooks,
}

/// Runs [`lloyd`] independently on each group of `cloud`. `k_sh = 0` skips SH.
pub fn build_codebooks(
    cloud: &GaussianCloud,
    config: &VqConfig,
) -> Result<CloudCodebooks, VqError> {
    let run = |g: ParamGroup| lloyd(cloud.group_view(g), &config.params(g)).map(|r| r.codebook);
    Ok(CloudCodebooks {
        dc: run(ParamGroup::ColorDc)?,
        sh: if config.k_sh == 0 {
            None
        } else {
            Some(run(ParamGroup::Sh)?)
        },
        scale: run(ParamGroup::Scale)?,
        rotation: run(ParamGroup::Rotation)?,
    })
}

/// Replaces the four group blocks with their assigned centroids.
///
/// Position and opacity are copied unchanged. A missing SH book yields zero SH.
pub fn quantize_cloud(
    cloud: &GaussianCloud,
    books: &CloudCodebooks,
) -> Result<GaussianCloud, VqError> {
    books.check(cloud.count)?;
    let mut out = cloud.clone();
    for group in ParamGroup::ALL {
        let block = match books.get(group) {
            Some(book) => book.reconstruct().into_vec(),
            None => vec![0.0; cloud.count * group.dim()],
        };
        *out.field_mut(group.field()) = block;
    }
    debug_assert_eq!(out.field(Field::Position), cloud.field(Field::Position));
    Ok(out)
}

/// Assigns `cloud` against fixed codebooks (for example from another scene).
///
/// Centroids are copied, never updated.
pub fn assign_frozen(
    cloud: &GaussianCloud,
    frozen: &CloudCodebooks,
) -> Result<QuantizedCloud, VqError> {
    let reassign = |group: ParamGroup, book: &Codebook| -> Result<Codebook, VqError> {
        if book.dim() != group.dim() {
            return Err(VqError::DimensionMismatch {
                expected: group.dim(),
                found: book.dim(),
            });
        }
        if book.k() == 0 {
            return Err(VqError::ZeroK);
        }
        Ok(Codebook {
            centroids: book.centroids.clone(),
            assignments: assign(cloud.group_view(group), book.centroids.view()),
        })
    };
    let codebooks = CloudCodebooks {
        dc: reassign(ParamGroup::ColorDc, &frozen.dc)?,
        sh: frozen
            .sh
            .as_ref()
            .map(|b| reassign(ParamGroup::Sh, b))
            .transpose()?,
        scale: reassign(ParamGroup::Scale, &frozen.scale)?,
        rotation: reassign(ParamGroup::Rotation, &frozen.rotation)?,
    };
    let cloud = quantize_cloud(cloud, &codebooks)?;
    Ok(QuantizedCloud { cloud, codebooks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix<f32> {
        let mut r = rng(seed);
        Matrix::from_vec(
            rows,
            cols,
            (0..rows * cols)
                .map(|_| r.random_range(-1.0f32..1.0))
                .collect(),
        )
    }

    // Independent oracle: exhaustive scan with a plain strict comparison.
    fn brute_force_nearest(data: &Matrix<f32>, cents: &Matrix<f32>) -> Vec<u32> {
        (0..data.rows())
            .map(|i| {
                let mut best = (f64::MAX, 0u32);
                for j in 0..cents.rows() {
                    let mut d = 0.0f64;
                    for c in 0..data.cols() {
                        let t = data.row(i)[c] as f64 - cents.row(j)[c] as f64;
                        d += t * t;
                    }
                    if d < best.0 {
                        best = (d, j as u32);
                    }
                }
                best.1
            })
            .collect()
    }

    #[test]
    fn point_on_centroid_is_assigned_to_it() {
        let cents = random_matrix(8, 3, 1);
        let data = Matrix::from_rows(3, &[cents.row(5).to_vec()]);
        assert_eq!(assign(data.view(), cents.view()), vec![5]);
    }

    #[test]
    fn ties_go_to_lowest_index() {
        let mut cents = Matrix::zeros(8, 1);
        cents.row_mut(2)[0] = -1.0;
        cents.row_mut(7)[0] = 1.0;
        for j in [0, 1, 3, 4, 5, 6] {
            cents.row_mut(j)[0] = 10.0 + j as f32;
        }
        let data = Matrix::from_rows(1, &[[0.0f32]]);
        assert_eq!(assign(data.view(), cents.view()), vec![2]);
    }

    #[test]
    fn assign_matches_brute_force() {
        let data = random_matrix(50, 3, 2);
        let cents = random_matrix(8, 3, 3);
        assert_eq!(
            assign(data.view(), cents.view()),
            brute_force_nearest(&data, &cents)
        );
    }

    #[test]
    fn two_points_average_to_midpoint() {
        let data = Matrix::from_rows(2, &[[0.0f32, 2.0], [4.0, -2.0]]);
        let prev = Matrix::from_rows(2, &[[9.0f32, 9.0]]);
        let up = update_centroids(data.view(), &[0, 0], prev.view());
        assert_eq!(up.centroids.row(0), &[2.0, 0.0]);
        assert!(up.empty.is_empty());
    }

    #[test]
    fn empty_cluster_is_flagged_and_kept() {
        let data = Matrix::from_rows(1, &[[1.0f32], [3.0]]);
        let prev = Matrix::from_rows(1, &[[0.0f32], [42.0]]);
        let up = update_centroids(data.view(), &[0, 0], prev.view());
        assert_eq!(up.centroids.row(0), &[2.0]);
        assert_eq!(up.centroids.row(1), &[42.0]);
        assert_eq!(up.empty, vec![1]);
    }

    #[test]
    fn update_matches_group_by_mean() {
        let data = random_matrix(200, 4, 4);
        let mut r = rng(5);
        let k = 7;
        let asg: Vec<u32> = (0..200).map(|_| r.random_range(0..k as u32)).collect();
        let prev = Matrix::zeros(k, 4);
        let up = update_centroids(data.view(), &asg, prev.view());
        // Oracle: a separate group-by with per-cluster vectors.
        let mut groups: Vec<Vec<usize>> = vec![Vec::new(); k];
        for (i, &a) in asg.iter().enumerate() {
            groups[a as usize].push(i);
        }
        for (j, g) in groups.iter().enumerate() {
            for c in 0..4 {
                let mean = g.iter().map(|&i| data.row(i)[c] as f64).sum::<f64>() / g.len() as f64;
                let got = up.centroids.row(j)[c] as f64;
                assert!(
                    (got - mean).abs() <= 1e-5 * mean.abs().max(1e-3),
                    "{got} vs {mean}"
                );
            }
        }
    }

    #[test]
    fn k_equals_n_random_sample_is_exact() {
        let data = Matrix::from_rows(2, &[[0.0f32, 0.0], [1.0, 0.0], [0.0, 1.0], [5.0, 5.0]]);
        let book = init_codebook(data.view(), 4, Init::RandomSample, 9).unwrap();
        let mut rows: Vec<Vec<f32>> = (0..4).map(|j| book.centroids.row(j).to_vec()).collect();
        rows.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut want: Vec<Vec<f32>> = (0..4).map(|i| data.row(i).to_vec()).collect();
        want.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(rows, want);
        assert_eq!(
            sse(data.view(), &book.assignments, book.centroids.view()),
            0.0
        );
    }

    #[test]
    fn k_one_converges_to_global_mean() {
        let data = random_matrix(100, 3, 6);
        let run = lloyd(data.view(), &KMeansParams::new(1, 1)).unwrap();
        for c in 0..3 {
            let mean = (0..100).map(|i| data.row(i)[c] as f64).sum::<f64>() / 100.0;
            assert!((run.codebook.centroids.row(0)[c] as f64 - mean).abs() < 1e-6);
        }
    }

    #[test]
    fn k_larger_than_n_pads_with_last_row() {
        let data = Matrix::from_rows(1, &[[1.0f32], [2.0]]);
        let book = init_codebook(data.view(), 4, Init::KMeansPlusPlus, 0).unwrap();
        assert_eq!(book.centroids.as_slice(), &[1.0, 2.0, 2.0, 2.0]);
        assert_eq!(book.assignments, vec![0, 1]);
    }

    #[test]
    fn empty_data_is_an_error() {
        let data = Matrix::<f32>::zeros(0, 3);
        assert_eq!(
            init_codebook(data.view(), 2, Init::KMeansPlusPlus, 0),
            Err(VqError::EmptyData)
        );
    }

    fn blobs(seed: u64) -> (Matrix<f32>, [[f32; 2]; 3]) {
        let means = [[-5.0f32, 0.0], [5.0, 5.0], [0.0, -6.0]];
        let mut r = rng(seed);
        let mut rows = Vec::new();
        for i in 0..1000 {
            let m = means[i % 3];
            // Uniform noise in [-0.5, 0.5)²: blob means are exact in expectation.
            rows.push([
                m[0] + r.random_range(-0.5f32..0.5),
                m[1] + r.random_range(-0.5f32..0.5),
            ]);
        }
        (Matrix::from_rows(2, &rows), means)
    }

    #[test]
    fn kmeans_pp_finds_separated_blobs() {
        let (data, means) = blobs(11);
        let run = lloyd(data.view(), &KMeansParams::new(3, 20)).unwrap();
        for m in means {
            let best = (0..3)
                .map(|j| {
                    let c = run.codebook.centroids.row(j);
                    ((c[0] - m[0]).powi(2) + (c[1] - m[1]).powi(2)).sqrt()
                })
                .fold(f32::MAX, f32::min);
            assert!(best < 0.1, "blob mean {m:?} missed by {best}");
        }
    }

    // Reference Lloyd: naive loops from the same seeding, fixed iteration count.
    fn reference_lloyd(data: &Matrix<f32>, init: &Matrix<f32>, iters: usize) -> f64 {
        let mut cents: Vec<Vec<f64>> = (0..init.rows())
            .map(|j| init.row(j).iter().map(|&x| x as f64).collect())
            .collect();
        let dist = |x: &[f32], c: &[f64]| {
            x.iter()
                .zip(c)
                .map(|(&a, &b)| (a as f64 - b).powi(2))
                .sum::<f64>()
        };
        let assign_all = |cents: &Vec<Vec<f64>>| -> Vec<usize> {
            (0..data.rows())
                .map(|i| {
                    let mut best = (f64::MAX, 0);
                    for (j, c) in cents.iter().enumerate() {
                        let d = dist(data.row(i), c);
                        if d < best.0 {
                            best = (d, j);
                        }
                    }
                    best.1
                })
                .collect()
        };
        let mut asg = assign_all(&cents);
        for _ in 0..iters {
            for (j, c) in cents.iter_mut().enumerate() {
                let m: Vec<usize> = (0..data.rows()).filter(|&i| asg[i] == j).collect();
                if m.is_empty() {
                    continue;
                }
                for (dd, v) in c.iter_mut().enumerate() {
                    *v = m.iter().map(|&i| data.row(i)[dd] as f64).sum::<f64>() / m.len() as f64;
                }
            }
            asg = assign_all(&cents);
        }
        (0..data.rows())
            .map(|i| dist(data.row(i), &cents[asg[i]]))
            .sum()
    }

    #[test]
    fn lloyd_objective_matches_reference() {
        let (data, _) = blobs(12);
        let params = KMeansParams {
            reseed_empty: false,
            ..KMeansParams::new(5, 20)
        };
        let run = lloyd(data.view(), &params).unwrap();
        let seeded = init_codebook(data.view(), 5, Init::KMeansPlusPlus, 0).unwrap();
        let oracle = reference_lloyd(&data, &seeded.centroids, 20);
        let got = *run.sse_trace.last().unwrap();
        assert!((got - oracle).abs() <= 0.01 * oracle, "{got} vs {oracle}");
    }

    #[test]
    fn repeated_values_converge_to_zero_quickly() {
        let vals = [[0.0f32, 1.0], [3.0, 3.0], [-2.0, 7.0]];
        let rows: Vec<[f32; 2]> = (0..30).map(|i| vals[i % 3]).collect();
        let data = Matrix::from_rows(2, &rows);
        let run = lloyd(data.view(), &KMeansParams::new(3, 10)).unwrap();
        assert!(run.iterations <= 2);
        assert_eq!(*run.sse_trace.last().unwrap(), 0.0);
    }

    #[test]
    fn zero_iterations_returns_seeded_codebook() {
        let data = random_matrix(60, 2, 13);
        let run = lloyd(data.view(), &KMeansParams::new(4, 0)).unwrap();
        let seeded = init_codebook(data.view(), 4, Init::KMeansPlusPlus, 0).unwrap();
        assert_eq!(run.codebook, seeded);
    }

    #[test]
    fn qat_schedule_gates_assignments() {
        let sched = AssignSchedule {
            assign_every: 100,
            assign_until: 25_000,
        };
        assert!(!sched.refreshes_at(25_100));
        assert!(sched.refreshes_at(100));
        assert!(sched.refreshes_at(25_000));
        assert!(!sched.refreshes_at(150));

        let data = random_matrix(40, 2, 14);
        let mut book = init_codebook(data.view(), 4, Init::RandomSample, 1).unwrap();
        let frozen = book.assignments.clone();
        let moved = random_matrix(40, 2, 15);
        let up = qat_update(&mut book, moved.view(), 25_100, &sched);
        assert!(!up.reassigned);
        assert_eq!(book.assignments, frozen);
        let expect = update_centroids(moved.view(), &frozen, book.centroids.view());
        assert_eq!(book.centroids, expect.centroids);

        let up = qat_update(&mut book, moved.view(), 100, &sched);
        assert!(up.reassigned);
        assert_eq!(
            book.assignments,
            brute_force_nearest(&moved, &expect.centroids)
        );
        let refreshed = update_centroids(moved.view(), &book.assignments, expect.centroids.view());
        assert_eq!(book.centroids, refreshed.centroids);
    }

    #[test]
    fn qat_centroid_update_is_idempotent() {
        let data = random_matrix(40, 3, 16);
        let sched = AssignSchedule {
            assign_every: 100,
            assign_until: 0,
        };
        let mut book = init_codebook(data.view(), 5, Init::KMeansPlusPlus, 2).unwrap();
        qat_update(&mut book, data.view(), 7, &sched);
        let first = book.clone();
        qat_update(&mut book, data.view(), 8, &sched);
        assert_eq!(book, first);
    }

    fn random_cloud(n: usize, seed: u64) -> GaussianCloud {
        let mut r = rng(seed);
        let rows: Vec<Vec<f32>> = (0..n)
            .map(|_| (0..59).map(|_| r.random_range(-2.0f32..2.0)).collect())
            .collect();
        GaussianCloud::from_rows(&rows).unwrap()
    }

    #[test]
    fn quantize_with_identity_books_is_lossless() {
        let cloud = random_cloud(12, 20);
        let books = build_codebooks(&cloud, &VqConfig::uniform(12)).unwrap();
        assert_eq!(quantize_cloud(&cloud, &books).unwrap(), cloud);
    }

    #[test]
    fn quantize_single_gaussian_looks_up_rows() {
        let cloud = random_cloud(1, 21);
        let mk = |g: ParamGroup| Codebook {
            centroids: Matrix::from_vec(2, g.dim(), (0..2 * g.dim()).map(|x| x as f32).collect()),
            assignments: vec![1],
        };
        let books = CloudCodebooks {
            dc: mk(ParamGroup::ColorDc),
            sh: Some(mk(ParamGroup::Sh)),
            scale: mk(ParamGroup::Scale),
            rotation: mk(ParamGroup::Rotation),
        };
        let q = quantize_cloud(&cloud, &books).unwrap();
        assert_eq!(q.rotation, vec![4.0, 5.0, 6.0, 7.0]);
        assert_eq!(q.color_dc, vec![3.0, 4.0, 5.0]);
        assert_eq!(q.position, cloud.position);
        assert_eq!(q.logit_opacity, cloud.logit_opacity);
    }

    #[test]
    fn quantize_error_is_distance_to_nearest_centroid() {
        let cloud = random_cloud(80, 22);
        let books = build_codebooks(
            &cloud,
            &VqConfig {
                lloyd_iters: 5,
                ..VqConfig::uniform(16)
            },
        )
        .unwrap();
        let q = quantize_cloud(&cloud, &books).unwrap();
        for g in ParamGroup::ALL {
            let book = books.get(g).unwrap();
            let data = cloud.group_view(g).to_owned();
            let oracle = brute_force_nearest(&data, &book.centroids);
            let qv = q.group_view(g);
            for i in 0..cloud.count {
                let err: f64 = (0..g.dim())
                    .map(|c| (qv.row(i)[c] as f64 - data.row(i)[c] as f64).powi(2))
                    .sum();
                let best: f64 = (0..g.dim())
                    .map(|c| {
                        (book.centroids.row(oracle[i] as usize)[c] as f64 - data.row(i)[c] as f64)
                            .powi(2)
                    })
                    .sum();
                assert_eq!(err, best);
            }
        }
    }

    #[test]
    fn quantize_rejects_length_mismatch() {
        let cloud = random_cloud(5, 23);
        let books = build_codebooks(&random_cloud(4, 24), &VqConfig::uniform(2)).unwrap();
        assert!(matches!(
            quantize_cloud(&cloud, &books),
            Err(VqError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn frozen_books_with_own_rows_are_exact() {
        let cloud = random_cloud(10, 25);
        let books = build_codebooks(&cloud, &VqConfig::uniform(10)).unwrap();
        let shuffled = cloud.select_rows(&[3, 1, 4, 0, 9, 2, 6, 5, 8, 7]);
        let q = assign_frozen(&shuffled, &books).unwrap();
        assert_eq!(q.cloud, shuffled);
        assert_eq!(q.codebooks.dc.centroids, books.dc.centroids);
    }

    #[test]
    fn frozen_two_centroid_assignments_match_brute_force() {
        let cloud = random_cloud(30, 26);
        let donor = random_cloud(30, 27);
        let books = build_codebooks(&donor, &VqConfig::uniform(2)).unwrap();
        let q = assign_frozen(&cloud, &books).unwrap();
        for g in ParamGroup::ALL {
            let oracle = brute_force_nearest(
                &cloud.group_view(g).to_owned(),
                &books.get(g).unwrap().centroids,
            );
            assert_eq!(q.codebooks.get(g).unwrap().assignments, oracle);
        }
    }

    #[test]
    fn frozen_on_empty_cloud_is_empty() {
        let books = build_codebooks(&random_cloud(6, 28), &VqConfig::uniform(3)).unwrap();
        let q = assign_frozen(&GaussianCloud::zeros(0), &books).unwrap();
        assert!(q.codebooks.dc.assignments.is_empty());
        assert_eq!(q.cloud.count, 0);
    }

    #[test]
    fn frozen_dimension_mismatch_is_an_error() {
        let mut books = build_codebooks(&random_cloud(6, 29), &VqConfig::uniform(3)).unwrap();
        books.scale = books.rotation.clone();
        assert!(matches!(
            assign_frozen(&random_cloud(3, 30), &books),
            Err(VqError::DimensionMismatch {
                expected: 3,
                found: 4
            })
        ));
    }

    #[test]
    fn lloyd_is_deterministic() {
        let data = random_matrix(300, 3, 31);
        let p = KMeansParams::new(9, 10);
        assert_eq!(
            lloyd(data.view(), &p).unwrap(),
            lloyd(data.view(), &p).unwrap()
        );
    }

    proptest! {
        #[test]
        fn chunk_size_does_not_change_assignments(seed in any::<u64>(), chunk in 1usize..97) {
            let data = random_matrix(120, 3, seed);
            let cents = random_matrix(11, 3, seed ^ 1);
            prop_assert_eq!(
                assign_chunked(data.view(), cents.view(), chunk),
                assign_chunked(data.view(), cents.view(), usize::MAX)
            );
        }

        #[test]
        fn assign_is_permutation_equivariant(seed in any::<u64>()) {
            let data = random_matrix(40, 2, seed);
            let cents = random_matrix(6, 2, seed ^ 2);
            let mut perm: Vec<usize> = (0..40).collect();
            let mut r = rng(seed ^ 3);
            for i in (1..perm.len()).rev() {
                perm.swap(i, r.random_range(0..=i));
            }
            let rows: Vec<Vec<f32>> = perm.iter().map(|&i| data.row(i).to_vec()).collect();
            let permuted = Matrix::from_rows(2, &rows);
            let a = assign(data.view(), cents.view());
            let b = assign(permuted.view(), cents.view());
            for (pos, &i) in perm.iter().enumerate() {
                prop_assert_eq!(b[pos], a[i]);
            }
        }

        #[test]
        fn lloyd_sse_never_increases(seed in any::<u64>(), k in 1usize..12) {
            let data = random_matrix(150, 3, seed);
            let run = lloyd(data.view(), &KMeansParams { seed, ..KMeansParams::new(k, 15) }).unwrap();
            for w in run.sse_trace.windows(2) {
                prop_assert!(w[1] <= w[0] * (1.0 + 1e-9) + 1e-12, "{:?}", run.sse_trace);
            }
        }
    }
}
