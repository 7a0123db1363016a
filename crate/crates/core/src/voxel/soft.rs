use super::grid::{BinAssignment, BinIndex, GridSpec, NEIGHBOR_COUNT, OWN_CODE};
use super::tensor::{OccupancyTensor, TensorGrad};
use crate::error::{Error, Result};
use crate::exec::{self, Exec};
use crate::projection::PointGrad;

pub fn assign_bins(points: &[[f64; 3]], grid: &GridSpec) -> BinAssignment {
    assign_bins_with(points, grid, Exec::default())
}

fn assign_bins_with(points: &[[f64; 3]], grid: &GridSpec, exec: Exec) -> BinAssignment {
    BinAssignment(exec::map_slice(exec, points, |&p| {
        grid.cell_of(p).map(|c| grid.index_of(c))
    }))
}

pub fn hard_voxelize(points: &[[f64; 3]], grid: &GridSpec) -> Result<OccupancyTensor> {
    hard_voxelize_with(points, grid, Exec::default())
}

/// `T(m) = 1` for every bin containing at least one point.
pub fn hard_voxelize_with(points: &[[f64; 3]], grid: &GridSpec, exec: Exec) -> Result<OccupancyTensor> {
    grid.validate()?;
    let mut bins: Vec<BinIndex> = assign_bins_with(points, grid, exec).0.into_iter().flatten().collect();
    bins.sort_unstable();
    bins.dedup();
    Ok(OccupancyTensor::from_sorted(
        *grid,
        bins.into_iter().map(|b| (b, 1.0)).collect(),
    ))
}

/// Points sharing one containing bin.
#[derive(Clone, Copy, Debug)]
struct SourceGroup {
    bin: BinIndex,
    cell: [usize; 3],
    /// Range into `members`.
    start: usize,
    len: usize,
}

const NO_SLOT: u32 = u32::MAX;

/// Groups are processed in blocks of this many so the parallel weight pass
/// needs bounded scratch memory.
const BLOCK: usize = 8192;

/// Everything the backward pass needs from a soft forward pass.
///
/// RBF weights are not cached; both passes evaluate them the same way from
/// the points, which keeps the map at one word per (source, target) term.
#[derive(Clone, Debug)]
pub struct VoxelBackwardMap {
    grid: GridSpec,
    n_points: usize,
    /// Point indices grouped by containing bin, ascending within a group.
    members: Vec<u32>,
    member_group: Vec<u32>,
    groups: Vec<SourceGroup>,
    /// `slots[g·K + j]` with K offset codes: slot of the target at offset
    /// `codes[j]` from group g, `NO_SLOT` when that target leaves the grid.
    slots: Vec<u32>,
    /// Stored bins, ascending; the position is the bin's slot.
    bins: Vec<BinIndex>,
}

/// One point's contribution to a stored bin.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Influence {
    pub point: usize,
    pub source_bin: BinIndex,
    pub weight: f64,
    pub source_count: usize,
}

impl VoxelBackwardMap {
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn stored_bins(&self) -> &[BinIndex] {
        &self.bins
    }

    pub fn is_empty(&self) -> bool {
        self.bins.is_empty()
    }

    /// Number of (target, source) terms.
    pub fn pair_count(&self) -> usize {
        self.slots.iter().filter(|&&x| x != NO_SLOT).count()
    }

    /// All (point, source bin) pairs that influence `bin`, ordered by source
    /// bin then point index. `points` must be the cloud the map was built
    /// from. `None` when `bin` is not stored.
    pub fn influences(&self, bin: BinIndex, points: &[[f64; 3]]) -> Option<Vec<Influence>> {
        self.bins.binary_search(&bin).ok()?;
        let target = self.grid.cell_of_index(bin);
        let mut out = Vec::new();
        // a larger offset code means a smaller source index
        for &code in self.grid.offset_codes().iter().rev() {
            let Some(src) = self.grid.offset_cell(target, 26 - code) else {
                continue;
            };
            let Ok(gi) = self.groups.binary_search_by_key(&self.grid.index_of(src), |g| g.bin) else {
                continue;
            };
            let g = &self.groups[gi];
            for &m in &self.members[g.start..g.start + g.len] {
                out.push(Influence {
                    point: m as usize,
                    source_bin: g.bin,
                    weight: AxisFactors::new(&self.grid, g.cell, points[m as usize]).weight(code),
                    source_count: g.len,
                });
            }
        }
        Some(out)
    }
}

/// Per-axis RBF factors of one point against the three bin centers around its
/// own cell along each axis: `exp(−(p_a − c_a)²/σ²)` for offsets −1, 0, +1.
/// The weight against a neighbor is the product of one factor per axis, which
/// needs 9 exponentials per point instead of 27.
struct AxisFactors {
    e: [[f64; 3]; 3],
    /// `p_a − c_a` per axis and offset.
    d: [[f64; 3]; 3],
}

impl AxisFactors {
    #[inline]
    fn new(grid: &GridSpec, cell: [usize; 3], p: [f64; 3]) -> Self {
        let mut e = [[0.0; 3]; 3];
        let mut d = [[0.0; 3]; 3];
        for a in 0..3 {
            for k in 0..3 {
                let c = grid.origin[a] + (cell[a] as f64 + k as f64 - 0.5) * grid.bin_size[a];
                let x = p[a] - c;
                d[a][k] = x;
                e[a][k] = (-(x * x) / grid.sigma_sq).exp();
            }
        }
        AxisFactors { e, d }
    }

    #[inline]
    fn split(code: u8) -> (usize, usize, usize) {
        ((code / 9) as usize, ((code / 3) % 3) as usize, (code % 3) as usize)
    }

    #[inline]
    fn weight(&self, code: u8) -> f64 {
        let (i, j, k) = Self::split(code);
        self.e[0][i] * self.e[1][j] * self.e[2][k]
    }

    #[inline]
    fn offset(&self, code: u8) -> [f64; 3] {
        let (i, j, k) = Self::split(code);
        [self.d[0][i], self.d[1][j], self.d[2][k]]
    }
}

/// Merge three ascending sequences into one ascending sequence without
/// duplicates.
fn merge3(a: &[usize], b: &[usize], c: &[usize]) -> Vec<usize> {
    let mut out = Vec::with_capacity(a.len() + b.len() + c.len());
    let (mut i, mut j, mut k) = (0, 0, 0);
    loop {
        let x = a.get(i).copied().unwrap_or(usize::MAX);
        let y = b.get(j).copied().unwrap_or(usize::MAX);
        let z = c.get(k).copied().unwrap_or(usize::MAX);
        let m = x.min(y).min(z);
        if m == usize::MAX {
            break;
        }
        out.push(m);
        i += (x == m) as usize;
        j += (y == m) as usize;
        k += (z == m) as usize;
    }
    out
}

/// Bins within one step along every axis of an occupied bin, ascending: three
/// one-axis dilations, each a merge of shifted copies of a sorted list.
fn dilate(occupied: &[usize], grid: &GridSpec) -> Vec<usize> {
    let [_, ny, nz] = grid.counts;
    let strides = [ny * nz, nz, 1];
    let mut cur = occupied.to_vec();
    for a in (0..3).rev() {
        let (s, n) = (strides[a], grid.counts[a]);
        let down: Vec<usize> = cur.iter().filter(|&&t| (t / s) % n > 0).map(|&t| t - s).collect();
        let up: Vec<usize> = cur.iter().filter(|&&t| (t / s) % n + 1 < n).map(|&t| t + s).collect();
        cur = merge3(&down, &cur, &up);
    }
    cur
}

pub fn soft_voxelize(points: &[[f64; 3]], grid: &GridSpec) -> Result<(OccupancyTensor, VoxelBackwardMap)> {
    soft_voxelize_with(points, grid, Exec::default())
}

/// RBF soft occupancy and the bookkeeping for [`voxelize_backward`].
///
/// Stored bins are exactly those with a nonempty bin in their 3×3×3 cube (or
/// only themselves with [`Neighborhood::None`](super::Neighborhood::None)).
/// Weights that underflow to zero are kept as zero. Each stored value sums
/// its neighbor terms in ascending source-bin order.
pub fn soft_voxelize_with(
    points: &[[f64; 3]],
    grid: &GridSpec,
    exec: Exec,
) -> Result<(OccupancyTensor, VoxelBackwardMap)> {
    grid.validate()?;
    if points.len() >= u32::MAX as usize {
        return Err(Error::InvalidArgument("too many points".into()));
    }
    let assignment = assign_bins_with(points, grid, exec).0;

    let mut keyed: Vec<(BinIndex, u32)> = assignment
        .iter()
        .enumerate()
        .filter_map(|(i, b)| b.map(|b| (b, i as u32)))
        .collect();
    exec::sort_unique_by_key(exec, &mut keyed, |e| *e);

    let mut groups: Vec<SourceGroup> = Vec::new();
    let mut members = Vec::with_capacity(keyed.len());
    let mut member_group = Vec::with_capacity(keyed.len());
    for (bin, idx) in keyed {
        if groups.last().map(|g| g.bin) != Some(bin) {
            groups.push(SourceGroup {
                bin,
                cell: grid.cell_of_index(bin),
                start: members.len(),
                len: 0,
            });
        }
        groups.last_mut().unwrap().len += 1;
        member_group.push((groups.len() - 1) as u32);
        members.push(idx);
    }

    let codes = grid.offset_codes();
    let occupied: Vec<usize> = groups.iter().map(|g| g.bin.0).collect();
    let bins: Vec<usize> = if codes.len() == 1 {
        occupied
    } else {
        dilate(&occupied, grid)
    };
    if bins.len() >= NO_SLOT as usize {
        return Err(Error::InvalidArgument("too many stored bins".into()));
    }

    // Targets at a fixed offset rise with the source, so each offset's slots
    // come from one forward walk over the stored bins.
    let by_code: Vec<Vec<u32>> = exec::map_slice(exec, codes, |&code| {
        let mut out = Vec::with_capacity(groups.len());
        let mut pos = 0usize;
        for g in &groups {
            match grid.offset_cell(g.cell, code) {
                None => out.push(NO_SLOT),
                Some(t) => {
                    let t = grid.index_of(t).0;
                    while bins[pos] < t {
                        pos += 1;
                    }
                    debug_assert_eq!(bins[pos], t);
                    out.push(pos as u32);
                }
            }
        }
        out
    });
    let k = codes.len();
    let mut slots = vec![NO_SLOT; groups.len() * k];
    for (j, col) in by_code.into_iter().enumerate() {
        for (gi, s) in col.into_iter().enumerate() {
            slots[gi * k + j] = s;
        }
    }

    // [own term, neighbor sum] per stored bin
    let mut acc = vec![[0.0f64; 2]; bins.len()];
    for block in (0..groups.len()).step_by(BLOCK) {
        let end = (block + BLOCK).min(groups.len());
        let means = exec::map_range(exec, end - block, |i| {
            let g = &groups[block + i];
            let mut sums = [0.0; 27];
            for &m in &members[g.start..g.start + g.len] {
                let f = AxisFactors::new(grid, g.cell, points[m as usize]);
                for (j, &code) in codes.iter().enumerate() {
                    sums[j] += f.weight(code);
                }
            }
            let inv = 1.0 / g.len as f64;
            sums.iter_mut().for_each(|s| *s *= inv);
            sums
        });
        for (i, sums) in means.iter().enumerate() {
            let row = &slots[(block + i) * k..(block + i + 1) * k];
            for (j, (&code, &s)) in codes.iter().zip(row).enumerate() {
                if s == NO_SLOT {
                    continue;
                }
                if code == OWN_CODE {
                    acc[s as usize][0] = sums[j];
                } else {
                    acc[s as usize][1] += sums[j];
                }
            }
        }
    }
    let entries = bins
        .iter()
        .zip(&acc)
        .map(|(&b, [o, n])| (BinIndex(b), o + n / NEIGHBOR_COUNT))
        .collect();
    let tensor = OccupancyTensor::from_sorted(*grid, entries);

    let bwd = VoxelBackwardMap {
        grid: *grid,
        n_points: points.len(),
        members,
        member_group,
        groups,
        slots,
        bins: bins.into_iter().map(BinIndex).collect(),
    };
    Ok((tensor, bwd))
}

pub fn voxelize_backward(bwd: &VoxelBackwardMap, tensor_grad: &TensorGrad, points: &[[f64; 3]]) -> Result<PointGrad> {
    voxelize_backward_with(bwd, tensor_grad, points, Exec::default())
}

/// Point gradients from `∂L/∂T(m)`.
///
/// Each point in bin m' receives, for every stored target m it influences,
/// `∂L/∂T(m) · c · (1/|P_m'|) · (−2(p − ĉ_m)/σ²) · exp(−‖p − ĉ_m‖²/σ²)` with
/// `c = 1` for m = m' and `1/26` otherwise, summed in ascending target order.
/// Points outside the grid get exactly zero.
pub fn voxelize_backward_with(
    bwd: &VoxelBackwardMap,
    tensor_grad: &TensorGrad,
    points: &[[f64; 3]],
    exec: Exec,
) -> Result<PointGrad> {
    if points.len() != bwd.n_points {
        return Err(Error::LengthMismatch {
            expected: bwd.n_points,
            actual: points.len(),
        });
    }
    let mut slot_grad = vec![0.0; bwd.bins.len()];
    for (bin, g) in tensor_grad.iter() {
        let slot = bwd.bins.binary_search(&bin).map_err(|_| Error::UnknownBin(bin.0))?;
        slot_grad[slot] = g;
    }

    let grid = &bwd.grid;
    let codes = grid.offset_codes();
    let k = codes.len();
    let rbf_scale = -2.0 / grid.sigma_sq;
    let per_member = exec::map_range(exec, bwd.members.len(), |i| {
        let gi = bwd.member_group[i] as usize;
        let g = &bwd.groups[gi];
        let p = points[bwd.members[i] as usize];
        let inv_count = 1.0 / g.len as f64;
        let mut f = None;
        let mut acc = [0.0; 3];
        for (&code, &s) in codes.iter().zip(&bwd.slots[gi * k..(gi + 1) * k]) {
            if s == NO_SLOT {
                continue;
            }
            let upstream = slot_grad[s as usize];
            if upstream == 0.0 {
                continue;
            }
            let f = f.get_or_insert_with(|| AxisFactors::new(grid, g.cell, p));
            let coeff = if code == OWN_CODE { 1.0 } else { 1.0 / NEIGHBOR_COUNT };
            let s = upstream * coeff * inv_count * rbf_scale * f.weight(code);
            let d = f.offset(code);
            for a in 0..3 {
                acc[a] += s * d[a];
            }
        }
        acc
    });

    let mut out = PointGrad::zeros(points.len());
    for (k, g) in per_member.into_iter().enumerate() {
        out.0[bwd.members[k] as usize] = g;
    }
    Ok(out)
}
