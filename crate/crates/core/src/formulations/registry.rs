use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::expr::ComplexExpr;

/// Physical or lifted quantity a scalar variable belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    /// Bus voltage vector `U_i`.
    Voltage,
    /// Branch current `I_lij` (from-side).
    BranchCurrent,
    LoadCurrent,
    GenCurrent,
    /// Per-conductor branch power at the from end, `S_lij`.
    BranchPowerFrom,
    /// Per-conductor branch power at the to end, `S_lji`.
    BranchPowerTo,
    LoadPower,
    GenPower,
    /// Generator dispatch `P + jQ`.
    Dispatch,
    /// Lifted voltage `W_i = U_i U_i^H`.
    VoltageProduct,
    /// Lifted current `L_l = I_lij I_lij^H`.
    CurrentProduct,
    /// Lifted branch power `U_i I_lij^H`.
    BranchMatrixFrom,
    /// Lifted branch power `U_j I_lji^H`.
    BranchMatrixTo,
    /// Lifted load power `U_i I_d^H` (rows: bus conductors, columns: load terminals).
    LoadMatrix,
    GenMatrix,
}

impl Symbol {
    pub fn name(self) -> &'static str {
        match self {
            Symbol::Voltage => "U",
            Symbol::BranchCurrent => "I_lij",
            Symbol::LoadCurrent => "I_d",
            Symbol::GenCurrent => "I_g",
            Symbol::BranchPowerFrom => "S_lij",
            Symbol::BranchPowerTo => "S_lji",
            Symbol::LoadPower => "S_d",
            Symbol::GenPower => "S_g",
            Symbol::Dispatch => "S_g_disp",
            Symbol::VoltageProduct => "W",
            Symbol::CurrentProduct => "L",
            Symbol::BranchMatrixFrom => "Sbar_lij",
            Symbol::BranchMatrixTo => "Sbar_lji",
            Symbol::LoadMatrix => "Sbar_d",
            Symbol::GenMatrix => "Sbar_g",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Coord {
    Scalar,
    Entry(usize),
    Matrix(usize, usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Part {
    Re,
    Im,
}

/// One scalar real variable: `part` of `symbol[coord]` owned by network element `owner`
/// (an index into the bus, branch, load or generator list, depending on the symbol).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct VarTag {
    pub symbol: Symbol,
    pub owner: usize,
    pub coord: Coord,
    pub part: Part,
}

impl fmt::Display for VarTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let part = match self.part {
            Part::Re => "re",
            Part::Im => "im",
        };
        match self.coord {
            Coord::Scalar => write!(f, "{}[{}].{part}", self.symbol.name(), self.owner),
            Coord::Entry(k) => write!(f, "{}[{}][{k}].{part}", self.symbol.name(), self.owner),
            Coord::Matrix(r, c) => write!(f, "{}[{}][{r},{c}].{part}", self.symbol.name(), self.owner),
        }
    }
}

/// Ordered list of real scalar variables.
///
/// Hermitian matrices keep only the upper triangle (diagonal real parts,
/// off-diagonal real and imaginary parts); the lower triangle is read back
/// through conjugation.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(from = "Vec<VarTag>", into = "Vec<VarTag>")]
pub struct VariableRegistry {
    tags: Vec<VarTag>,
    index: HashMap<VarTag, usize>,
}

impl From<Vec<VarTag>> for VariableRegistry {
    fn from(tags: Vec<VarTag>) -> Self {
        let index = tags.iter().enumerate().map(|(i, t)| (*t, i)).collect();
        VariableRegistry { tags, index }
    }
}

impl From<VariableRegistry> for Vec<VarTag> {
    fn from(reg: VariableRegistry) -> Self {
        reg.tags
    }
}

impl VariableRegistry {
    pub fn len(&self) -> usize {
        self.tags.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tags.is_empty()
    }

    pub fn tags(&self) -> &[VarTag] {
        &self.tags
    }

    pub fn get(&self, tag: &VarTag) -> Option<usize> {
        self.index.get(tag).copied()
    }

    pub fn contains_symbol(&self, symbol: Symbol) -> bool {
        self.tags.iter().any(|t| t.symbol == symbol)
    }

    pub fn count_symbol(&self, symbol: Symbol) -> usize {
        self.tags.iter().filter(|t| t.symbol == symbol).count()
    }

    fn push(&mut self, symbol: Symbol, owner: usize, coord: Coord, part: Part) -> usize {
        let tag = VarTag { symbol, owner, coord, part };
        debug_assert!(!self.index.contains_key(&tag), "duplicate variable {tag}");
        self.tags.push(tag);
        self.index.insert(tag, self.tags.len() - 1);
        self.tags.len() - 1
    }

    pub fn add_scalar(&mut self, symbol: Symbol, owner: usize) {
        self.push(symbol, owner, Coord::Scalar, Part::Re);
        self.push(symbol, owner, Coord::Scalar, Part::Im);
    }

    pub fn add_vector(&mut self, symbol: Symbol, owner: usize, len: usize) {
        for k in 0..len {
            self.push(symbol, owner, Coord::Entry(k), Part::Re);
            self.push(symbol, owner, Coord::Entry(k), Part::Im);
        }
    }

    pub fn add_hermitian(&mut self, symbol: Symbol, owner: usize, n: usize) {
        for r in 0..n {
            for c in r..n {
                self.push(symbol, owner, Coord::Matrix(r, c), Part::Re);
                if r != c {
                    self.push(symbol, owner, Coord::Matrix(r, c), Part::Im);
                }
            }
        }
    }

    pub fn add_matrix(&mut self, symbol: Symbol, owner: usize, rows: usize, cols: usize) {
        for r in 0..rows {
            for c in 0..cols {
                self.push(symbol, owner, Coord::Matrix(r, c), Part::Re);
                self.push(symbol, owner, Coord::Matrix(r, c), Part::Im);
            }
        }
    }

    fn pair(&self, symbol: Symbol, owner: usize, coord: Coord) -> ComplexExpr {
        let re = self.get(&VarTag { symbol, owner, coord, part: Part::Re });
        let im = self.get(&VarTag { symbol, owner, coord, part: Part::Im });
        match (re, im) {
            (Some(re), Some(im)) => ComplexExpr::var(re, im),
            _ => panic!("variable {}[{owner}] {coord:?} is not registered", symbol.name()),
        }
    }

    pub fn scalar(&self, symbol: Symbol, owner: usize) -> ComplexExpr {
        self.pair(symbol, owner, Coord::Scalar)
    }

    pub fn entry(&self, symbol: Symbol, owner: usize, k: usize) -> ComplexExpr {
        self.pair(symbol, owner, Coord::Entry(k))
    }

    pub fn matrix(&self, symbol: Symbol, owner: usize, r: usize, c: usize) -> ComplexExpr {
        self.pair(symbol, owner, Coord::Matrix(r, c))
    }

    pub fn hermitian(&self, symbol: Symbol, owner: usize, r: usize, c: usize) -> ComplexExpr {
        if r == c {
            let re = self
                .get(&VarTag { symbol, owner, coord: Coord::Matrix(r, r), part: Part::Re })
                .unwrap_or_else(|| panic!("variable {}[{owner}] ({r},{r}) is not registered", symbol.name()));
            ComplexExpr::real_var(re)
        } else if r < c {
            self.pair(symbol, owner, Coord::Matrix(r, c))
        } else {
            self.pair(symbol, owner, Coord::Matrix(c, r)).conj()
        }
    }
}
