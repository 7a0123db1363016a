use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use super::grid::{BinIndex, GridSpec, Neighborhood};
use crate::error::{Error, Result};

/// Sparse occupancy tensor: bins absent from `entries` hold 0.
#[derive(Clone, Debug, PartialEq)]
pub struct OccupancyTensor {
    grid: GridSpec,
    /// Sorted by bin, no duplicates.
    entries: Vec<(BinIndex, f64)>,
}

impl OccupancyTensor {
    pub fn empty(grid: GridSpec) -> Self {
        OccupancyTensor {
            grid,
            entries: Vec::new(),
        }
    }

    /// Entries may come in any order; duplicate bins are rejected.
    pub fn from_entries(grid: GridSpec, mut entries: Vec<(BinIndex, f64)>) -> Result<Self> {
        entries.sort_by_key(|e| e.0);
        if let Some(w) = entries.windows(2).find(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidArgument(format!("duplicate bin {}", w[0].0)));
        }
        if let Some(e) = entries.iter().find(|e| !grid.contains_bin(e.0)) {
            return Err(Error::UnknownBin(e.0 .0));
        }
        Ok(OccupancyTensor { grid, entries })
    }

    pub(crate) fn from_sorted(grid: GridSpec, entries: Vec<(BinIndex, f64)>) -> Self {
        debug_assert!(entries.windows(2).all(|w| w[0].0 < w[1].0));
        OccupancyTensor { grid, entries }
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, bin: BinIndex) -> f64 {
        self.entries
            .binary_search_by_key(&bin, |e| e.0)
            .map(|i| self.entries[i].1)
            .unwrap_or(0.0)
    }

    pub fn contains(&self, bin: BinIndex) -> bool {
        self.entries.binary_search_by_key(&bin, |e| e.0).is_ok()
    }

    pub fn entries(&self) -> &[(BinIndex, f64)] {
        &self.entries
    }

    pub fn bins(&self) -> impl Iterator<Item = BinIndex> + '_ {
        self.entries.iter().map(|e| e.0)
    }

    /// Binary tensor of the bins whose value exceeds `level`.
    pub fn thresholded(&self, level: f64) -> OccupancyTensor {
        OccupancyTensor {
            grid: self.grid,
            entries: self
                .entries
                .iter()
                .filter(|e| e.1 > level)
                .map(|e| (e.0, 1.0))
                .collect(),
        }
    }
}

/// Sparse `∂L/∂T(m)`; absent bins carry zero gradient.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct TensorGrad(pub BTreeMap<BinIndex, f64>);

impl TensorGrad {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, bin: BinIndex, value: f64) {
        self.0.insert(bin, value);
    }

    pub fn get(&self, bin: BinIndex) -> f64 {
        self.0.get(&bin).copied().unwrap_or(0.0)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (BinIndex, f64)> + '_ {
        self.0.iter().map(|(b, g)| (*b, *g))
    }

    pub fn scaled(&self, s: f64) -> TensorGrad {
        TensorGrad(self.0.iter().map(|(b, g)| (*b, g * s)).collect())
    }

    /// Drop bins the tensor does not store. Their `T(m)` is identically zero
    /// for the current bin memberships, so no point gradient is lost.
    pub fn restricted_to(&self, tensor: &OccupancyTensor) -> TensorGrad {
        TensorGrad(
            self.0
                .iter()
                .filter(|(b, _)| tensor.contains(**b))
                .map(|(b, g)| (*b, *g))
                .collect(),
        )
    }
}

const DUMP_MAGIC: &str = "# plcor occupancy tensor v1";

/// Text dump: a header describing the grid, then one `ix iy iz value` line
/// per stored bin in lexicographic cell order.
pub fn format_tensor_dump(tensor: &OccupancyTensor) -> String {
    let g = tensor.grid();
    let mut out = String::new();
    let _ = writeln!(out, "{DUMP_MAGIC}");
    let _ = writeln!(out, "# origin {} {} {}", g.origin[0], g.origin[1], g.origin[2]);
    let _ = writeln!(out, "# bin_size {} {} {}", g.bin_size[0], g.bin_size[1], g.bin_size[2]);
    let _ = writeln!(out, "# counts {} {} {}", g.counts[0], g.counts[1], g.counts[2]);
    let _ = writeln!(out, "# sigma_sq {}", g.sigma_sq);
    let _ = writeln!(out, "# neighborhood {}", g.neighborhood.as_str());
    for &(bin, value) in tensor.entries() {
        let c = g.cell_of_index(bin);
        let _ = writeln!(out, "{} {} {} {}", c[0], c[1], c[2], value);
    }
    out
}

pub fn write_tensor_dump(tensor: &OccupancyTensor, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, format_tensor_dump(tensor)).map_err(|e| Error::io(path, e))
}

pub fn read_tensor_dump(path: impl AsRef<Path>) -> Result<OccupancyTensor> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_tensor_dump(&text)
}

pub fn parse_tensor_dump(text: &str) -> Result<OccupancyTensor> {
    let bad = |line: usize, msg: &str| Error::InvalidArgument(format!("tensor dump line {line}: {msg}"));
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, l)) if l.trim() == DUMP_MAGIC => {}
        _ => return Err(bad(1, "missing header")),
    }
    let mut header = BTreeMap::new();
    let mut body = Vec::new();
    for (i, line) in lines {
        if let Some(rest) = line.strip_prefix("# ") {
            let (k, v) = rest.split_once(' ').ok_or_else(|| bad(i + 1, "malformed header"))?;
            header.insert(k.to_string(), (i + 1, v.to_string()));
        } else if !line.trim().is_empty() {
            body.push((i + 1, line));
        }
    }
    let field = |k: &str| header.get(k).ok_or_else(|| Error::MissingKey(k.to_string()));
    let floats3 = |k: &str| -> Result<[f64; 3]> {
        let (line, v) = field(k)?;
        let vals: Vec<f64> = v
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| bad(*line, "bad number")))
            .collect::<Result<_>>()?;
        vals.try_into().map_err(|_| bad(*line, "expected 3 values"))
    };
    let origin = floats3("origin")?;
    let bin_size = floats3("bin_size")?;
    let counts = floats3("counts")?.map(|c| c as usize);
    let (sl, s) = field("sigma_sq")?;
    let sigma_sq: f64 = s.trim().parse().map_err(|_| bad(*sl, "bad sigma_sq"))?;
    let neighborhood: Neighborhood = field("neighborhood")?.1.trim().parse()?;
    let grid = GridSpec::new(origin, bin_size, counts, sigma_sq, neighborhood)?;

    let mut entries = Vec::with_capacity(body.len());
    for (line, text) in body {
        let toks: Vec<&str> = text.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(bad(line, "expected `ix iy iz value`"));
        }
        let mut cell = [0usize; 3];
        for a in 0..3 {
            cell[a] = toks[a].parse().map_err(|_| bad(line, "bad index"))?;
            if cell[a] >= grid.counts[a] {
                return Err(bad(line, "index outside grid"));
            }
        }
        let value: f64 = toks[3].parse().map_err(|_| bad(line, "bad value"))?;
        entries.push((grid.index_of(cell), value));
    }
    OccupancyTensor::from_entries(grid, entries)
}
