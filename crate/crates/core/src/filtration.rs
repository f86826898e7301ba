//! Nested partitions `P_0 ⊂ P_1 ⊂ …` of an atomic measure space.
//!
//! Two constructions are provided: the canonical dyadic one, and the
//! cover-based one that starts from a set-difference chain of a countable
//! cover and refines by a schedule of basis sets. Frontier pieces carry no
//! atoms under the half-open convention; they are kept as zero-measure
//! ghost entries so the null set stays representable.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::space::{MeasureSpace, Point};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Dyadic,
    CoverBased,
}

/// An element `O_n(x)` of the level-`n` partition.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Cell {
    pub id: usize,
    pub level: usize,
    /// Ascending atom indices.
    pub atoms: Vec<usize>,
    pub measure: f64,
}

impl Cell {
    pub fn is_null(&self) -> bool {
        self.measure == 0.0
    }
}

/// Zero-measure frontier piece left by a cover or basis split.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Ghost {
    pub id: usize,
    pub level: usize,
    /// Ghost id at the previous level this one descends from.
    pub parent: Option<usize>,
    pub origin: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum NullKind {
    /// A real cell whose atoms all have zero measure.
    ZeroMeasure,
    Ghost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct NullCell {
    pub level: usize,
    pub id: usize,
    pub kind: NullKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Partition {
    pub cells: Vec<Cell>,
    /// Cell index of every atom.
    pub atom_cell: Vec<usize>,
    /// Parent cell index at the previous level (empty at level 0).
    pub parent: Vec<usize>,
    pub ghosts: Vec<Ghost>,
}

impl Partition {
    fn from_pieces(
        space: &MeasureSpace,
        level: usize,
        pieces: Vec<(Vec<usize>, Option<usize>)>,
        ghosts: Vec<Ghost>,
    ) -> Self {
        let measures = space.atoms();
        let mut atom_cell = vec![usize::MAX; space.len()];
        let mut cells = Vec::with_capacity(pieces.len());
        let mut parent = Vec::with_capacity(pieces.len());
        for (id, (mut atoms, p)) in pieces.into_iter().enumerate() {
            atoms.sort_unstable();
            for &a in &atoms {
                atom_cell[a] = id;
            }
            let measure = atoms.iter().map(|&a| measures[a].measure).sum();
            cells.push(Cell { id, level, atoms, measure });
            if let Some(p) = p {
                parent.push(p);
            }
        }
        Self { cells, atom_cell, parent, ghosts }
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn measures(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.measure).collect()
    }
}

/// A grid-aligned set: half-open interval or box.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Region {
    Interval([f64; 2]),
    Rect([[f64; 2]; 2]),
}

impl Region {
    fn describe(&self) -> String {
        match self {
            Region::Interval([lo, hi]) => format!("{lo}, {hi}"),
            Region::Rect([[x0, x1], [y0, y1]]) => format!("{x0}, {x1}] x [{y0}, {y1}"),
        }
    }

    /// Atom mask of the region; errors when an edge is off the atom grid.
    pub fn atom_mask(&self, space: &MeasureSpace) -> Result<Vec<bool>> {
        let n = space.per_axis();
        let snap = |t: f64, axis: usize| -> Result<usize> {
            let (lo, len) = space.axis_extent(axis);
            let pos = (t - lo) / len * n as f64;
            let k = pos.round();
            if (pos - k).abs() > 1e-9 * n as f64 || k < 0.0 || k > n as f64 {
                return Err(Error::NotGridAligned(self.describe()));
            }
            Ok(k as usize)
        };
        let mut mask = vec![false; space.len()];
        match (*self, space.dim()) {
            (Region::Interval([lo, hi]), 1) => {
                let (i0, i1) = (snap(lo, 0)?, snap(hi, 0)?);
                for m in &mut mask[i0..i1.max(i0)] {
                    *m = true;
                }
            }
            (Region::Rect([[x0, x1], [y0, y1]]), 2) => {
                let (i0, i1) = (snap(x0, 0)?, snap(x1, 0)?);
                let (j0, j1) = (snap(y0, 1)?, snap(y1, 1)?);
                for i in i0..i1 {
                    for j in j0..j1 {
                        mask[i * n + j] = true;
                    }
                }
            }
            _ => {
                return Err(Error::Argument(format!(
                    "region [{}] does not match a {}-dimensional space",
                    self.describe(),
                    space.dim()
                )))
            }
        }
        Ok(mask)
    }
}

/// Ordered cover `{A_i}` of the space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cover {
    pub sets: Vec<Region>,
}

/// Dyadic cells of levels `1, 2, …` in breadth-first order, first `count`.
pub fn dyadic_bfs_schedule(space: &MeasureSpace, count: usize) -> Vec<Region> {
    let mut out = Vec::with_capacity(count);
    let (x0, xl) = space.axis_extent(0);
    let (y0, yl) = if space.dim() == 2 { space.axis_extent(1) } else { (0.0, 0.0) };
    let mut level = 1u32;
    'outer: while out.len() < count && level <= space.atom_level() {
        let k = 1usize << level;
        let edge = |o: f64, l: f64, i: usize| o + l * i as f64 / k as f64;
        for i in 0..k {
            if space.dim() == 1 {
                out.push(Region::Interval([edge(x0, xl, i), edge(x0, xl, i + 1)]));
                if out.len() == count {
                    break 'outer;
                }
            } else {
                for j in 0..k {
                    out.push(Region::Rect([
                        [edge(x0, xl, i), edge(x0, xl, i + 1)],
                        [edge(y0, yl, j), edge(y0, yl, j + 1)],
                    ]));
                    if out.len() == count {
                        break 'outer;
                    }
                }
            }
        }
        level += 1;
    }
    out
}

/// An increasing sequence of partitions over a shared space.
#[derive(Debug, Clone, Serialize)]
pub struct Filtration {
    #[serde(skip)]
    space: Arc<MeasureSpace>,
    mode: Mode,
    levels: Vec<Partition>,
}

impl Filtration {
    /// Dyadic filtration with levels `0..=depth`; level `n` has `2^n` cells
    /// per axis.
    pub fn dyadic(space: Arc<MeasureSpace>, depth: usize) -> Result<Self> {
        let limit = space.atom_level() as usize;
        if depth > limit {
            return Err(Error::Depth { depth, limit });
        }
        let n_atoms = space.per_axis();
        let levels = (0..=depth)
            .map(|n| {
                let cells_per_axis = 1usize << n;
                let block = n_atoms / cells_per_axis;
                let pieces = if space.dim() == 1 {
                    (0..cells_per_axis)
                        .map(|c| {
                            let atoms = (c * block..(c + 1) * block).collect();
                            (atoms, (n > 0).then_some(c / 2))
                        })
                        .collect()
                } else {
                    let mut pieces = Vec::with_capacity(cells_per_axis * cells_per_axis);
                    for i in 0..cells_per_axis {
                        for j in 0..cells_per_axis {
                            let mut atoms = Vec::with_capacity(block * block);
                            for a in i * block..(i + 1) * block {
                                for b in j * block..(j + 1) * block {
                                    atoms.push(a * n_atoms + b);
                                }
                            }
                            let parent = (i / 2) * (cells_per_axis / 2) + j / 2;
                            pieces.push((atoms, (n > 0).then_some(parent)));
                        }
                    }
                    pieces
                };
                Partition::from_pieces(&space, n, pieces, Vec::new())
            })
            .collect();
        Ok(Self { space, mode: Mode::Dyadic, levels })
    }

    /// Cover-based filtration: `P_0` is the set-difference chain of the
    /// cover, and level `n + 1` splits every level-`n` cell by `basis[n]`.
    /// `depth` basis sets are applied.
    pub fn from_cover(
        space: Arc<MeasureSpace>,
        cover: &Cover,
        basis: &[Region],
        depth: usize,
    ) -> Result<Self> {
        if depth > basis.len() {
            return Err(Error::Depth { depth, limit: basis.len() });
        }
        let masks = cover
            .sets
            .iter()
            .map(|r| r.atom_mask(&space))
            .collect::<Result<Vec<_>>>()?;
        let basis_masks = basis[..depth]
            .iter()
            .map(|r| r.atom_mask(&space))
            .collect::<Result<Vec<_>>>()?;

        let mut covered = vec![false; space.len()];
        let mut pieces = Vec::new();
        let mut ghosts = Vec::new();
        for (i, mask) in masks.iter().enumerate() {
            let piece: Vec<usize> = (0..space.len()).filter(|&a| mask[a] && !covered[a]).collect();
            for &a in &piece {
                covered[a] = true;
            }
            if piece.is_empty() {
                continue;
            }
            pieces.push((piece, None));
            if covered.iter().any(|c| !c) {
                ghosts.push((None, format!("frontier of cover set {i}")));
            }
        }
        if let Some(gap) = covered.iter().position(|c| !c) {
            return Err(Error::CoverGap(gap));
        }
        let n0 = pieces.len();
        let ghosts = number_ghosts(0, n0, ghosts);
        let mut levels = vec![Partition::from_pieces(&space, 0, pieces, ghosts)];

        for (n, mask) in basis_masks.iter().enumerate() {
            let prev = levels.last().expect("level 0 exists");
            let mut pieces = Vec::with_capacity(prev.len() * 2);
            let mut ghosts: Vec<(Option<usize>, String)> =
                prev.ghosts.iter().map(|g| (Some(g.id), g.origin.clone())).collect();
            for (p, cell) in prev.cells.iter().enumerate() {
                let (inside, outside): (Vec<usize>, Vec<usize>) =
                    cell.atoms.iter().partition(|&&a| mask[a]);
                let split = !inside.is_empty() && !outside.is_empty();
                if !inside.is_empty() {
                    pieces.push((inside, Some(p)));
                }
                if !outside.is_empty() {
                    pieces.push((outside, Some(p)));
                }
                if split {
                    ghosts.push((None, format!("frontier of basis set {n} in cell {p}")));
                }
            }
            let count = pieces.len();
            let ghosts = number_ghosts(n + 1, count, ghosts);
            levels.push(Partition::from_pieces(&space, n + 1, pieces, ghosts));
        }
        Ok(Self { space, mode: Mode::CoverBased, levels })
    }

    pub fn space(&self) -> &Arc<MeasureSpace> {
        &self.space
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    /// Index of the finest level.
    pub fn depth(&self) -> usize {
        self.levels.len() - 1
    }

    pub fn levels(&self) -> &[Partition] {
        &self.levels
    }

    pub fn level(&self, n: usize) -> Result<&Partition> {
        self.levels.get(n).ok_or(Error::Level { level: n, levels: self.levels.len() })
    }

    /// `O_n(x)`.
    pub fn cell_of(&self, n: usize, x: Point) -> Result<&Cell> {
        let level = self.level(n)?;
        let atom = self.space.atom_of(x)?;
        Ok(&level.cells[level.atom_cell[atom]])
    }

    /// Zero-measure cells and ghosts of level `n`.
    pub fn null_cells(&self, n: usize) -> Result<Vec<NullCell>> {
        let level = self.level(n)?;
        let real = level
            .cells
            .iter()
            .filter(|c| c.is_null())
            .map(|c| NullCell { level: n, id: c.id, kind: NullKind::ZeroMeasure });
        let ghosts = level
            .ghosts
            .iter()
            .map(|g| NullCell { level: n, id: g.id, kind: NullKind::Ghost });
        Ok(real.chain(ghosts).collect())
    }
}

fn number_ghosts(level: usize, first_id: usize, raw: Vec<(Option<usize>, String)>) -> Vec<Ghost> {
    raw.into_iter()
        .enumerate()
        .map(|(k, (parent, origin))| Ghost { id: first_id + k, level, parent, origin })
        .collect()
}
