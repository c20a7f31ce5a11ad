//! Two-dimensional deterministic cellular automaton.
//!
//! Rules are numbered over a 3x3 dependency mask where each position carries
//! a power of two:
//!
//! ```text
//!   64 128 256
//!   32   1   2
//!   16   8   4
//! ```
//!
//! giving 512 rules. The evolution itself runs over the von Neumann
//! neighbourhood (self plus the four axial neighbours) with a null boundary.

use std::fmt;

use crate::error::{Error, Result};

/// Largest supported lattice side.
pub const MAX_DIM: usize = 6;

/// Number of distinct dependency masks.
pub const RULE_COUNT: u16 = 512;

/// Power of two carried by each mask position, row-major.
const POWERS: [[u8; 3]; 3] = [[6, 7, 8], [5, 0, 1], [4, 3, 2]];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Neighborhood {
    /// Self plus north, west, south and east.
    #[default]
    VonNeumann5,
}

impl Neighborhood {
    pub fn size(self) -> usize {
        match self {
            Neighborhood::VonNeumann5 => 5,
        }
    }

    /// Offsets as (row, col) deltas: self, north, west, south, east.
    pub fn offsets(self) -> [(isize, isize); 5] {
        match self {
            Neighborhood::VonNeumann5 => [(0, 0), (-1, 0), (0, -1), (1, 0), (0, 1)],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Out-of-bounds cells read as dead.
    #[default]
    Null,
}

/// The cellular space: lattice side, binary states, neighbourhood and boundary.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CellularSpace {
    dim: usize,
    neighborhood: Neighborhood,
    boundary: Boundary,
}

impl CellularSpace {
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            neighborhood: Neighborhood::VonNeumann5,
            boundary: Boundary::Null,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn neighborhood(&self) -> Neighborhood {
        self.neighborhood
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }
}

fn check_dim(dim: usize) -> Result<()> {
    if (1..=MAX_DIM).contains(&dim) {
        Ok(())
    } else {
        Err(Error::InvalidDimension(dim))
    }
}

/// An M x M binary lattice; one generation of a facial region's automaton.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct RuleMatrix {
    dim: usize,
    cells: Vec<bool>,
}

impl RuleMatrix {
    /// All-dead lattice.
    pub fn new(dim: usize) -> Result<Self> {
        check_dim(dim)?;
        Ok(Self {
            dim,
            cells: vec![false; dim * dim],
        })
    }

    /// Lattice with exactly the listed cells active.
    pub fn with_active(dim: usize, active: &[(usize, usize)]) -> Result<Self> {
        let mut m = Self::new(dim)?;
        for &(r, c) in active {
            m.set(r, c, true)?;
        }
        Ok(m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, row: usize, col: usize) -> Option<bool> {
        (row < self.dim && col < self.dim).then(|| self.cells[row * self.dim + col])
    }

    pub fn set(&mut self, row: usize, col: usize, value: bool) -> Result<()> {
        if row >= self.dim || col >= self.dim {
            return Err(Error::InvalidCell {
                row,
                col,
                dim: self.dim,
            });
        }
        self.cells[row * self.dim + col] = value;
        Ok(())
    }

    /// Cell value at a signed offset; anything outside the lattice reads dead.
    fn read(&self, row: isize, col: isize) -> bool {
        if row < 0 || col < 0 {
            return false;
        }
        self.get(row as usize, col as usize).unwrap_or(false)
    }

    pub fn active_count(&self) -> usize {
        self.cells.iter().filter(|&&c| c).count()
    }

    pub fn cells(&self) -> &[bool] {
        &self.cells
    }

    /// Row-major flattening, length M².
    pub fn column_vector(&self) -> Vec<bool> {
        self.cells.clone()
    }

    /// Main diagonal, length M.
    pub fn diagonal_bits(&self) -> Vec<bool> {
        (0..self.dim).map(|k| self.cells[k * self.dim + k]).collect()
    }
}

impl fmt::Debug for RuleMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "RuleMatrix({}x{}: ", self.dim, self.dim)?;
        for (r, row) in self.cells.chunks(self.dim).enumerate() {
            if r > 0 {
                f.write_str("/")?;
            }
            for &c in row {
                f.write_str(if c { "1" } else { "0" })?;
            }
        }
        f.write_str(")")
    }
}

pub fn rule_column_vector(rm: &RuleMatrix) -> Vec<bool> {
    rm.column_vector()
}

pub fn diagonal_bits(rm: &RuleMatrix) -> Vec<bool> {
    rm.diagonal_bits()
}

/// A 3x3 neighbour-dependency mask and its rule number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct DependencyMask(u16);

impl DependencyMask {
    pub fn from_grid(grid: [[bool; 3]; 3]) -> Self {
        Self(rule_number(&grid))
    }

    /// Inverse of [`rule_number`].
    pub fn from_rule(rule: u32) -> Result<Self> {
        if rule < u32::from(RULE_COUNT) {
            Ok(Self(rule as u16))
        } else {
            Err(Error::InvalidRule(rule))
        }
    }

    pub fn rule_number(self) -> u16 {
        self.0
    }

    pub fn grid(self) -> [[bool; 3]; 3] {
        let mut grid = [[false; 3]; 3];
        for (r, row) in POWERS.iter().enumerate() {
            for (c, &p) in row.iter().enumerate() {
                grid[r][c] = self.0 & (1 << p) != 0;
            }
        }
        grid
    }

    pub fn active_positions(self) -> u32 {
        self.0.count_ones()
    }

    pub fn transpose(self) -> Self {
        let g = self.grid();
        let mut t = [[false; 3]; 3];
        for (r, row) in t.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = g[c][r];
            }
        }
        Self::from_grid(t)
    }
}

impl fmt::Display for DependencyMask {
    /// Rows separated by `/`, e.g. `000/010/000` for rule 1.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (r, row) in self.grid().iter().enumerate() {
            if r > 0 {
                f.write_str("/")?;
            }
            for &c in row {
                f.write_str(if c { "1" } else { "0" })?;
            }
        }
        Ok(())
    }
}

/// Power-of-two sum over the active mask positions.
pub fn rule_number(mask: &[[bool; 3]; 3]) -> u16 {
    let mut n = 0u16;
    for (r, row) in POWERS.iter().enumerate() {
        for (c, &p) in row.iter().enumerate() {
            if mask[r][c] {
                n |= 1 << p;
            }
        }
    }
    n
}

pub fn mask_of(rule: u32) -> Result<DependencyMask> {
    DependencyMask::from_rule(rule)
}

/// Every dependency mask, ordered by rule number.
pub fn enumerate_rules() -> Vec<DependencyMask> {
    (0..RULE_COUNT).map(DependencyMask).collect()
}

pub fn transpose_rule(rule: DependencyMask) -> DependencyMask {
    rule.transpose()
}

/// One line per rule: `<rule_number>: <mask>`, ascending.
pub fn rule_table() -> String {
    let mut out = String::with_capacity(512 * 16);
    for mask in enumerate_rules() {
        out.push_str(&format!("{}: {}\n", mask.rule_number(), mask));
    }
    out
}

/// Neighbourhood state of a cell as (self, north, west, south, east).
pub fn neighborhood_state(
    space: &CellularSpace,
    lattice: &RuleMatrix,
    cell: (usize, usize),
) -> Result<[bool; 5]> {
    if lattice.dim() != space.dim() {
        return Err(Error::InvalidDimension(lattice.dim()));
    }
    let (row, col) = cell;
    if row >= lattice.dim() || col >= lattice.dim() {
        return Err(Error::InvalidCell {
            row,
            col,
            dim: lattice.dim(),
        });
    }
    let mut state = [false; 5];
    for (slot, (dr, dc)) in state.iter_mut().zip(space.neighborhood().offsets()) {
        *slot = lattice.read(row as isize + dr, col as isize + dc);
    }
    Ok(state)
}

/// Whether an active cell with the given neighbourhood state fires.
///
/// Fires when the four axial neighbours are dead, or the {north, west} pair
/// is dead, or the {south, east} pair is dead.
fn fires(state: [bool; 5]) -> bool {
    let [me, north, west, south, east] = state;
    me && ((!north && !west && !south && !east) || (!north && !west) || (!south && !east))
}

/// Diagonal target of a firing cell: north-east if inside, else south-west.
fn diagonal_target(dim: usize, row: usize, col: usize) -> Option<(usize, usize)> {
    if row >= 1 && col + 1 < dim {
        Some((row - 1, col + 1))
    } else if row + 1 < dim && col >= 1 {
        Some((row + 1, col - 1))
    } else {
        None
    }
}

/// One synchronous generation.
///
/// Every firing cell dies and activates one diagonal neighbour. A cell with no
/// diagonal neighbour inside the lattice keeps its activation. Collisions OR
/// together. All reads come from the input lattice.
pub fn step(space: &CellularSpace, lattice: &RuleMatrix) -> Result<RuleMatrix> {
    let dim = lattice.dim();
    if dim != space.dim() {
        return Err(Error::InvalidDimension(dim));
    }
    let mut next = RuleMatrix::new(dim)?;
    for row in 0..dim {
        for col in 0..dim {
            if !lattice.cells[row * dim + col] {
                continue;
            }
            let state = neighborhood_state(space, lattice, (row, col))?;
            let (tr, tc) = if fires(state) {
                diagonal_target(dim, row, col).unwrap_or((row, col))
            } else {
                (row, col)
            };
            next.cells[tr * dim + tc] = true;
        }
    }
    Ok(next)
}

/// Runs `generations` steps.
pub fn evolve(space: &CellularSpace, lattice: &RuleMatrix, generations: usize) -> Result<RuleMatrix> {
    let mut current = lattice.clone();
    for _ in 0..generations {
        current = step(space, &current)?;
    }
    Ok(current)
}
