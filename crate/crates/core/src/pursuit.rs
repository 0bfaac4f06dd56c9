//! HBW-OMP2D: block-wise orthogonal matching pursuit with separable atoms.
//!
//! The three coefficient planes are stacked into one tall array which is
//! cut into square blocks. Every block runs its own OMP2D state (residual,
//! selected atoms, orthogonalised atoms `Q` and the biorthogonal duals `B`),
//! and a max-heap over the blocks' best candidate magnitudes decides which
//! block receives the next atom.
//!
//! Atom indices are zero-based here; the bitstream maps them to one-based
//! single indices.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use rayon::prelude::*;

use crate::dictionary::SeparableDictionary;
use crate::error::{Error, Result};
use crate::plane::Plane;
use crate::wavelet::{CoeffPlane, CoeffVolume};

/// Stack the three planes vertically, channel order preserved.
pub fn concat_channels(volume: &CoeffVolume) -> Plane {
    let (rows, cols) = (volume.planes[0].data.rows(), volume.planes[0].data.cols());
    let mut data = Vec::with_capacity(3 * rows * cols);
    for p in &volume.planes {
        data.extend_from_slice(p.data.as_slice());
    }
    Plane::from_vec(3 * rows, cols, data)
}

/// Inverse of [`concat_channels`].
pub fn split_channels(extended: &Plane, levels: usize) -> Result<CoeffVolume> {
    if !extended.rows().is_multiple_of(3) {
        return Err(Error::DimensionMismatch(format!(
            "extended array has {} rows, not a multiple of 3",
            extended.rows()
        )));
    }
    let rows = extended.rows() / 3;
    let cols = extended.cols();
    let chunk = rows * cols;
    let planes = std::array::from_fn(|z| CoeffPlane {
        data: Plane::from_vec(
            rows,
            cols,
            extended.as_slice()[z * chunk..(z + 1) * chunk].to_vec(),
        ),
        levels,
    });
    CoeffVolume::new(planes)
}

/// Row-major list of non-overlapping `side`×`side` tiles.
pub fn partition_blocks(array: &Plane, side: usize) -> Result<Vec<Plane>> {
    let (rows, cols) = (array.rows(), array.cols());
    if side == 0 || !rows.is_multiple_of(side) || !cols.is_multiple_of(side) {
        return Err(Error::IndivisibleDims { rows, cols, side });
    }
    let mut blocks = Vec::with_capacity((rows / side) * (cols / side));
    for br in 0..rows / side {
        for bc in 0..cols / side {
            blocks.push(array.window(br * side, bc * side, side, side));
        }
    }
    Ok(blocks)
}

/// Inverse of [`partition_blocks`].
pub fn assemble_blocks(blocks: &[Plane], rows: usize, cols: usize, side: usize) -> Result<Plane> {
    if side == 0 || !rows.is_multiple_of(side) || !cols.is_multiple_of(side) {
        return Err(Error::IndivisibleDims { rows, cols, side });
    }
    let per_row = cols / side;
    if blocks.len() != (rows / side) * per_row {
        return Err(Error::DimensionMismatch(format!(
            "expected {} blocks, got {}",
            (rows / side) * per_row,
            blocks.len()
        )));
    }
    let mut out = Plane::zeros(rows, cols);
    for (q, block) in blocks.iter().enumerate() {
        out.set_window((q / per_row) * side, (q % per_row) * side, block);
    }
    Ok(out)
}

/// Best atom for a residual: indices and the signed inner product.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Candidate {
    pub lx: usize,
    pub ly: usize,
    pub value: f64,
}

/// Flat bitset over the `M_x · M_y` atom grid.
#[derive(Debug, Clone)]
struct PairSet {
    words: Vec<u64>,
}

impl PairSet {
    fn new(size: usize) -> Self {
        Self {
            words: vec![0; size.div_ceil(64)],
        }
    }

    #[inline]
    fn contains(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    #[inline]
    fn insert(&mut self, i: usize) {
        self.words[i / 64] |= 1 << (i % 64);
    }
}

/// Scans `D_xᵀ·R·D_y` for the largest magnitude. Ties go to the lowest
/// `ly`, then the lowest `lx`. Pairs in `skip` are ignored.
fn best_candidate(
    residual: &[f64],
    dict: &SeparableDictionary,
    skip: Option<&PairSet>,
) -> Option<Candidate> {
    let side = dict.block_side();
    let (mx, my) = (dict.x.count(), dict.y.count());
    // rd[m * side + i] = Σ_j R(i, j) · d^y_m(j)
    let mut rd = vec![0.0; my * side];
    for m in 0..my {
        let dy = dict.y.atom(m);
        let out = &mut rd[m * side..(m + 1) * side];
        for (i, o) in out.iter_mut().enumerate() {
            let row = &residual[i * side..(i + 1) * side];
            *o = row.iter().zip(dy).map(|(a, b)| a * b).sum();
        }
    }
    let mut best: Option<Candidate> = None;
    let mut best_mag = -1.0;
    for m in 0..my {
        let col = &rd[m * side..(m + 1) * side];
        for n in 0..mx {
            if skip.is_some_and(|s| s.contains(m * mx + n)) {
                continue;
            }
            let v: f64 = dict.x.atom(n).iter().zip(col).map(|(a, b)| a * b).sum();
            if v.abs() > best_mag {
                best_mag = v.abs();
                best = Some(Candidate {
                    lx: n,
                    ly: m,
                    value: v,
                });
            }
        }
    }
    best
}

/// Atom selection over a single residual block.
pub fn select_atom(residual: &Plane, dict: &SeparableDictionary) -> Candidate {
    let side = dict.block_side();
    assert_eq!((residual.rows(), residual.cols()), (side, side));
    best_candidate(residual.as_slice(), dict, None).unwrap_or(Candidate {
        lx: 0,
        ly: 0,
        value: 0.0,
    })
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// OMP2D state for one block.
#[derive(Debug, Clone)]
pub struct BlockPursuit {
    side: usize,
    target: Vec<f64>,
    residual: Vec<f64>,
    residual_norm2: f64,
    picks: Vec<(usize, usize)>,
    /// Selected pairs plus pairs rejected as linearly dependent.
    excluded: PairSet,
    /// Orthogonalised atoms, `side²` values each.
    q: Vec<f64>,
    q_norm2: Vec<f64>,
    /// Biorthogonal duals of the selected atoms.
    b: Vec<f64>,
    candidate: Option<Candidate>,
}

impl BlockPursuit {
    pub fn new(block: &Plane, dict: &SeparableDictionary) -> Self {
        let side = dict.block_side();
        assert_eq!(
            (block.rows(), block.cols()),
            (side, side),
            "block size mismatch"
        );
        let target = block.as_slice().to_vec();
        let residual_norm2 = dot(&target, &target);
        Self {
            side,
            residual: target.clone(),
            target,
            residual_norm2,
            picks: Vec::new(),
            excluded: PairSet::new(dict.size()),
            q: Vec::new(),
            q_norm2: Vec::new(),
            b: Vec::new(),
            candidate: None,
        }
    }

    #[inline]
    pub fn atom_count(&self) -> usize {
        self.picks.len()
    }

    pub fn picks(&self) -> &[(usize, usize)] {
        &self.picks
    }

    pub fn residual(&self) -> Plane {
        Plane::from_vec(self.side, self.side, self.residual.clone())
    }

    pub fn residual_norm2(&self) -> f64 {
        self.residual_norm2
    }

    pub fn target_norm2(&self) -> f64 {
        dot(&self.target, &self.target)
    }

    /// Cached best candidate from the last [`refresh_candidate`](Self::refresh_candidate).
    pub fn candidate(&self) -> Option<Candidate> {
        self.candidate
    }

    /// Recomputes the best admissible candidate for the current residual.
    pub fn refresh_candidate(&mut self, dict: &SeparableDictionary) {
        self.candidate = best_candidate(&self.residual, dict, Some(&self.excluded));
    }

    /// Dual of the `n`-th selected atom.
    pub fn dual(&self, n: usize) -> Plane {
        let s2 = self.side * self.side;
        Plane::from_vec(self.side, self.side, self.b[n * s2..(n + 1) * s2].to_vec())
    }

    /// `c(n) = ⟨B_n, W′_q⟩` for every selected atom.
    pub fn coefficients(&self) -> Vec<f64> {
        self.b
            .chunks_exact(self.side * self.side)
            .map(|bn| dot(bn, &self.target))
            .collect()
    }

    /// Adds atom `d^x_lx (d^y_ly)ᵀ`, upgrading the biorthogonal set and
    /// projecting the residual onto the complement of the enlarged span.
    pub fn extend(&mut self, dict: &SeparableDictionary, lx: usize, ly: usize) -> Result<()> {
        let (mx, my) = (dict.x.count(), dict.y.count());
        if lx >= mx || ly >= my {
            return Err(Error::IndexOutOfRange {
                index: ly * mx + lx,
                limit: mx * my,
            });
        }
        let key = ly * mx + lx;
        if self.excluded.contains(key) {
            return Err(Error::DegenerateSelection);
        }
        let side = self.side;
        let s2 = side * side;
        let (dx, dy) = (dict.x.atom(lx), dict.y.atom(ly));
        let mut atom = vec![0.0; s2];
        for i in 0..side {
            let row = &mut atom[i * side..(i + 1) * side];
            for (r, &y) in row.iter_mut().zip(dy) {
                *r = dx[i] * y;
            }
        }

        // Gram-Schmidt against the current Q set, then once more.
        let k = self.picks.len();
        let mut q_new = atom.clone();
        for _pass in 0..2 {
            for n in 0..k {
                let qn = &self.q[n * s2..(n + 1) * s2];
                let proj = dot(qn, &q_new) / self.q_norm2[n];
                axpy(-proj, qn, &mut q_new);
            }
        }
        let q_norm2 = dot(&q_new, &q_new);
        // atoms are unit norm, so the relative test is absolute
        if q_norm2.sqrt() < 1e-10 {
            self.excluded.insert(key);
            return Err(Error::DegenerateSelection);
        }

        let b_new: Vec<f64> = q_new.iter().map(|v| v / q_norm2).collect();
        for n in 0..k {
            let bn = &mut self.b[n * s2..(n + 1) * s2];
            let overlap = dot(&atom, bn);
            axpy(-overlap, &b_new, bn);
        }

        let proj = dot(&q_new, &self.residual) / q_norm2;
        axpy(-proj, &q_new, &mut self.residual);
        self.residual_norm2 = dot(&self.residual, &self.residual);

        self.q.extend_from_slice(&q_new);
        self.q_norm2.push(q_norm2);
        self.b.extend_from_slice(&b_new);
        self.picks.push((lx, ly));
        self.excluded.insert(key);
        Ok(())
    }

    pub fn decomposition(&self, block: usize) -> BlockDecomposition {
        let entries = self
            .picks
            .iter()
            .zip(self.coefficients())
            .map(|(&(lx, ly), coeff)| AtomEntry { lx, ly, coeff })
            .collect();
        BlockDecomposition { block, entries }
    }
}

/// One selected atom and its coefficient.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomEntry {
    pub lx: usize,
    pub ly: usize,
    pub coeff: f64,
}

/// Atomic decomposition of block `block`, in selection order.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BlockDecomposition {
    pub block: usize,
    pub entries: Vec<AtomEntry>,
}

impl BlockDecomposition {
    pub fn atom_count(&self) -> usize {
        self.entries.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopRule {
    /// Stop after `K` atoms in total.
    TotalAtoms(usize),
    /// Stop once `sqrt(Σ_q ‖R_q‖²_F)` is at most this value.
    ResidualNorm(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct HeapEntry {
    magnitude: f64,
    block: usize,
}

impl Eq for HeapEntry {}

impl Ord for HeapEntry {
    fn cmp(&self, other: &Self) -> Ordering {
        self.magnitude
            .total_cmp(&other.magnitude)
            .then_with(|| other.block.cmp(&self.block))
    }
}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// One extension performed by the scheduler.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub block: usize,
    pub candidate: Candidate,
}

/// Global greedy scheduler over all blocks.
pub struct HbwPursuit<'d> {
    dict: &'d SeparableDictionary,
    blocks: Vec<BlockPursuit>,
    heap: BinaryHeap<HeapEntry>,
    total_atoms: usize,
    residual_energy: f64,
    /// Residual norms below this never receive further atoms.
    floor: Vec<f64>,
}

/// Blocks whose residual falls below this fraction of their own norm (or
/// below it absolutely) are finished.
const RESIDUAL_FLOOR: f64 = 1e-12;

impl<'d> HbwPursuit<'d> {
    pub fn new(blocks: &[Plane], dict: &'d SeparableDictionary) -> Self {
        let mut states: Vec<BlockPursuit> = blocks
            .par_iter()
            .map(|b| {
                let mut s = BlockPursuit::new(b, dict);
                s.refresh_candidate(dict);
                s
            })
            .collect();
        let floor: Vec<f64> = states
            .iter()
            .map(|s| RESIDUAL_FLOOR * s.target_norm2().sqrt().max(1.0))
            .collect();
        let mut heap = BinaryHeap::with_capacity(states.len());
        for (q, s) in states.iter_mut().enumerate() {
            if s.residual_norm2.sqrt() > floor[q] {
                if let Some(c) = s.candidate {
                    heap.push(HeapEntry {
                        magnitude: c.value.abs(),
                        block: q,
                    });
                }
            }
        }
        let residual_energy = states.iter().map(|s| s.residual_norm2).sum();
        Self {
            dict,
            blocks: states,
            heap,
            total_atoms: 0,
            residual_energy,
            floor,
        }
    }

    pub fn blocks(&self) -> &[BlockPursuit] {
        &self.blocks
    }

    pub fn total_atoms(&self) -> usize {
        self.total_atoms
    }

    /// `Σ_q ‖R_q‖²_F`.
    pub fn residual_energy(&self) -> f64 {
        self.residual_energy
    }

    /// The block and candidate the next step would use.
    pub fn peek(&self) -> Option<Step> {
        self.heap.peek().map(|e| Step {
            block: e.block,
            candidate: self.blocks[e.block]
                .candidate
                .expect("queued block has a candidate"),
        })
    }

    /// Extends the block holding the globally largest candidate. Returns
    /// `None` when no block can take another atom.
    pub fn step(&mut self) -> Option<Step> {
        while let Some(entry) = self.heap.pop() {
            let q = entry.block;
            let state = &mut self.blocks[q];
            let cand = state.candidate.expect("queued block has a candidate");
            let before = state.residual_norm2;
            let extended = state.extend(self.dict, cand.lx, cand.ly).is_ok();
            if extended {
                self.total_atoms += 1;
                self.residual_energy += state.residual_norm2 - before;
            }
            if state.residual_norm2.sqrt() > self.floor[q] {
                state.refresh_candidate(self.dict);
                if let Some(c) = state.candidate {
                    self.heap.push(HeapEntry {
                        magnitude: c.value.abs(),
                        block: q,
                    });
                }
            } else {
                state.candidate = None;
            }
            if extended {
                return Some(Step {
                    block: q,
                    candidate: cand,
                });
            }
        }
        None
    }

    /// Runs until the stop rule fires or every block is exhausted. Can be
    /// called again with a stricter rule to resume.
    pub fn run(&mut self, stop: StopRule) {
        loop {
            let done = match stop {
                StopRule::TotalAtoms(k) => self.total_atoms >= k,
                StopRule::ResidualNorm(tol) => {
                    self.residual_energy <= tol * tol && {
                        // incremental sum drifts; confirm before stopping
                        self.residual_energy = self.blocks.iter().map(|b| b.residual_norm2).sum();
                        self.residual_energy <= tol * tol
                    }
                }
            };
            if done || self.step().is_none() {
                break;
            }
        }
    }

    pub fn decompositions(&self) -> Vec<BlockDecomposition> {
        self.blocks
            .par_iter()
            .enumerate()
            .map(|(q, b)| b.decomposition(q))
            .collect()
    }
}

/// Convenience wrapper: partition-level pursuit under one stop rule.
pub fn hbw_run(
    blocks: &[Plane],
    dict: &SeparableDictionary,
    stop: StopRule,
) -> Vec<BlockDecomposition> {
    let mut pursuit = HbwPursuit::new(blocks, dict);
    pursuit.run(stop);
    pursuit.decompositions()
}

/// Sum of rank-one atoms for a single block.
pub fn reconstruct_block(decomp: &BlockDecomposition, dict: &SeparableDictionary) -> Result<Plane> {
    let side = dict.block_side();
    let (mx, my) = (dict.x.count(), dict.y.count());
    let mut out = Plane::zeros(side, side);
    for e in &decomp.entries {
        if e.lx >= mx || e.ly >= my {
            return Err(Error::IndexOutOfRange {
                index: e.ly * mx + e.lx,
                limit: mx * my,
            });
        }
        let (dx, dy) = (dict.x.atom(e.lx), dict.y.atom(e.ly));
        for (i, &x) in dx.iter().enumerate() {
            axpy(e.coeff * x, dy, out.row_mut(i));
        }
    }
    Ok(out)
}

/// Assembles the approximated extended array from per-block decompositions.
/// Blocks absent from `decomps` stay zero.
pub fn reconstruct(
    decomps: &[BlockDecomposition],
    dict: &SeparableDictionary,
    rows: usize,
    cols: usize,
) -> Result<Plane> {
    let side = dict.block_side();
    if !rows.is_multiple_of(side) || !cols.is_multiple_of(side) {
        return Err(Error::IndivisibleDims { rows, cols, side });
    }
    let per_row = cols / side;
    let count = (rows / side) * per_row;
    let tiles: Vec<(usize, Plane)> = decomps
        .par_iter()
        .map(|d| {
            if d.block >= count {
                return Err(Error::IndexOutOfRange {
                    index: d.block,
                    limit: count,
                });
            }
            Ok((d.block, reconstruct_block(d, dict)?))
        })
        .collect::<Result<_>>()?;
    let mut out = Plane::zeros(rows, cols);
    for (q, tile) in tiles {
        out.set_window((q / per_row) * side, (q % per_row) * side, &tile);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dictionary::{build_mixed, build_trig_cos, DictParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_block(side: usize, rng: &mut ChaCha8Rng) -> Plane {
        Plane::from_fn(side, side, |_, _| rng.random_range(-10.0..10.0))
    }

    fn frob(a: &Plane, b: &Plane) -> f64 {
        dot(a.as_slice(), b.as_slice())
    }

    fn outer(dict: &SeparableDictionary, lx: usize, ly: usize) -> Plane {
        let side = dict.block_side();
        Plane::from_fn(side, side, |i, j| dict.x.atom(lx)[i] * dict.y.atom(ly)[j])
    }

    #[test]
    fn concat_and_split() {
        let planes: [CoeffPlane; 3] = std::array::from_fn(|z| CoeffPlane {
            data: Plane::from_fn(16, 16, |r, c| (z * 1000 + r * 16 + c) as f64),
            levels: 2,
        });
        let vol = CoeffVolume::new(planes).unwrap();
        let ext = concat_channels(&vol);
        assert_eq!((ext.rows(), ext.cols()), (48, 16));
        assert_eq!(ext[(16, 0)], vol.planes[1].data[(0, 0)]);
        assert_eq!(split_channels(&ext, 2).unwrap(), vol);
    }

    #[test]
    fn partition_order_and_inverse() {
        let ext = Plane::from_fn(48, 16, |r, c| (r * 16 + c) as f64);
        let blocks = partition_blocks(&ext, 16).unwrap();
        assert_eq!(blocks.len(), 3);
        assert_eq!(blocks[1][(0, 0)], ext[(16, 0)]);
        assert_eq!(assemble_blocks(&blocks, 48, 16, 16).unwrap(), ext);
        assert!(matches!(
            partition_blocks(&Plane::zeros(20, 16), 16),
            Err(Error::IndivisibleDims { .. })
        ));
    }

    #[test]
    fn selects_planted_atom() {
        let d = build_mixed(DictParams::default()).unwrap();
        let planted = outer(&d, 3, 5);
        let residual = Plane::from_fn(16, 16, |r, c| 7.0 * planted[(r, c)]);
        let c = select_atom(&residual, &d);
        assert_eq!((c.lx, c.ly), (3, 5));
        assert!((c.value - 7.0).abs() < 1e-12);

        let zero = select_atom(&Plane::zeros(16, 16), &d);
        assert_eq!((zero.lx, zero.ly, zero.value), (0, 0, 0.0));
    }

    #[test]
    fn selection_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = SeparableDictionary::from_atoms(build_trig_cos(4, 7));
        for _ in 0..20 {
            let r = random_block(4, &mut rng);
            let got = select_atom(&r, &d);
            let mut best = (0, 0, 0.0f64);
            let mut best_mag = -1.0;
            for m in 0..7 {
                for n in 0..7 {
                    let v = frob(&outer(&d, n, m), &r);
                    if v.abs() > best_mag {
                        best_mag = v.abs();
                        best = (n, m, v);
                    }
                }
            }
            assert_eq!((got.lx, got.ly), (best.0, best.1));
            assert!((got.value - best.2).abs() < 1e-12);
        }
    }

    #[test]
    fn first_dual_is_the_atom() {
        let d = build_mixed(DictParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let block = random_block(16, &mut rng);
        let mut s = BlockPursuit::new(&block, &d);
        s.extend(&d, 4, 9).unwrap();
        assert!(s.dual(0).max_abs_diff(&outer(&d, 4, 9)) < 1e-15);
        assert!(matches!(
            s.extend(&d, 4, 9),
            Err(Error::DegenerateSelection)
        ));
    }

    #[test]
    fn biorthogonality_and_least_squares() {
        use nalgebra::{DMatrix, DVector};
        let d = build_mixed(DictParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let block = random_block(16, &mut rng);
        let mut s = BlockPursuit::new(&block, &d);
        for _ in 0..30 {
            s.refresh_candidate(&d);
            let c = s.candidate().unwrap();
            s.extend(&d, c.lx, c.ly).unwrap();
        }
        let atoms: Vec<Plane> = s.picks().iter().map(|&(x, y)| outer(&d, x, y)).collect();
        for (m, _) in atoms.iter().enumerate() {
            for (n, a) in atoms.iter().enumerate() {
                let g = frob(&s.dual(m), a);
                let expect = if m == n { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-8);
            }
        }
        let a = DMatrix::from_fn(256, atoms.len(), |i, n| atoms[n].as_slice()[i]);
        let y = DVector::from_column_slice(block.as_slice());
        let ls = (a.transpose() * &a)
            .lu()
            .solve(&(a.transpose() * y))
            .unwrap();
        for (c, l) in s.coefficients().iter().zip(ls.iter()) {
            assert!((c - l).abs() < 1e-8);
        }
    }

    #[test]
    fn heap_prefers_larger_candidate() {
        let d = build_mixed(DictParams::default()).unwrap();
        let a = outer(&d, 2, 2);
        let blocks = vec![
            Plane::from_fn(16, 16, |r, c| 5.0 * a[(r, c)]),
            Plane::from_fn(16, 16, |r, c| 3.0 * a[(r, c)]),
        ];
        let mut p = HbwPursuit::new(&blocks, &d);
        assert_eq!(p.step().unwrap().block, 0);
        assert_eq!(p.step().unwrap().block, 1);
        assert!(p.step().is_none());
    }

    #[test]
    fn total_atoms_rule_counts_exactly() {
        let d = build_mixed(DictParams::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks: Vec<Plane> = (0..6).map(|_| random_block(16, &mut rng)).collect();
        let decomps = hbw_run(&blocks, &d, StopRule::TotalAtoms(77));
        assert_eq!(decomps.iter().map(|b| b.atom_count()).sum::<usize>(), 77);
    }

    #[test]
    fn exhaustive_pursuit_reconstructs() {
        let d = SeparableDictionary::from_atoms(build_trig_cos(4, 6));
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let ext = Plane::from_fn(12, 8, |_, _| rng.random_range(-50.0..50.0));
        let blocks = partition_blocks(&ext, 4).unwrap();
        let decomps = hbw_run(&blocks, &d, StopRule::TotalAtoms(10_000));
        let back = reconstruct(&decomps, &d, 12, 8).unwrap();
        assert!(back.max_abs_diff(&ext) < 1e-6);
        for dcmp in &decomps {
            assert!(dcmp.atom_count() <= 16);
        }
    }

    #[test]
    fn reconstruct_edge_cases() {
        let d = build_mixed(DictParams::default()).unwrap();
        assert_eq!(reconstruct(&[], &d, 32, 16).unwrap(), Plane::zeros(32, 16));
        let single = BlockDecomposition {
            block: 0,
            entries: vec![AtomEntry {
                lx: 3,
                ly: 5,
                coeff: 2.5,
            }],
        };
        let tile = reconstruct_block(&single, &d).unwrap();
        let expected = outer(&d, 3, 5);
        assert!(tile.max_abs_diff(&Plane::from_fn(16, 16, |r, c| 2.5 * expected[(r, c)])) < 1e-15);
        let bad = BlockDecomposition {
            block: 0,
            entries: vec![AtomEntry {
                lx: 1000,
                ly: 0,
                coeff: 1.0,
            }],
        };
        assert!(matches!(
            reconstruct(&[bad], &d, 16, 16),
            Err(Error::IndexOutOfRange { .. })
        ));
    }
}
