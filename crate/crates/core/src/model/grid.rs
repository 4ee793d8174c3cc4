use super::{FactorGraph, ModelBuilder};
use crate::error::{Error, Result};
use crate::group::{GeneratingSet, Permutation};

/// Pairwise factor used on every grid edge of a 2-coloring model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GridMode {
    /// `exp(w)` when neighbours differ, `1` otherwise.
    Soft(f64),
    /// `1` when neighbours differ, `0` otherwise.
    Hard,
}

pub fn grid_variable_name(r: usize, c: usize) -> String {
    format!("cell({r},{c})")
}

/// Binary 2-coloring model on a `rows x cols` grid. Cell `(r, c)` has id
/// `r * cols + c`.
pub fn make_grid_model(rows: usize, cols: usize, mode: GridMode) -> Result<FactorGraph> {
    if rows == 0 || cols == 0 {
        return Err(Error::InvalidModel(format!("grid size {rows}x{cols}")));
    }
    let potentials = match mode {
        GridMode::Soft(w) => {
            if !w.is_finite() {
                return Err(Error::NonFiniteWeight(w));
            }
            let e = w.exp();
            vec![1.0, e, e, 1.0]
        }
        GridMode::Hard => vec![0.0, 1.0, 1.0, 0.0],
    };
    let mut b = ModelBuilder::new();
    for r in 0..rows {
        for c in 0..cols {
            b.add_variable(grid_variable_name(r, c), 2)?;
        }
    }
    let id = |r: usize, c: usize| r * cols + c;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                b.add_table(vec![id(r, c), id(r, c + 1)], potentials.clone())?;
            }
            if r + 1 < rows {
                b.add_table(vec![id(r, c), id(r + 1, c)], potentials.clone())?;
            }
        }
    }
    b.build()
}

/// Generators of the grid's reflection/rotation symmetries: a quarter turn
/// and a mirror for square grids (dihedral group of order 8), the two
/// mirrors otherwise (order 4 or less). Identity generators are dropped.
pub fn grid_symmetry_generators(rows: usize, cols: usize) -> GeneratingSet {
    let n = rows * cols;
    let id = |r: usize, c: usize| r * cols + c;
    let perm = |f: &dyn Fn(usize, usize) -> usize| {
        let mut image = vec![0; n];
        for r in 0..rows {
            for c in 0..cols {
                image[id(r, c)] = f(r, c);
            }
        }
        Permutation::from_image_unchecked(image)
    };
    let mirror_cols = perm(&|r, c| id(r, cols - 1 - c));
    let second = if rows == cols {
        perm(&|r, c| id(c, cols - 1 - r))
    } else {
        perm(&|r, c| id(rows - 1 - r, c))
    };
    let generators = [mirror_cols, second]
        .into_iter()
        .filter(|g| !g.is_identity())
        .collect();
    GeneratingSet::new(n, generators).expect("grid generators act on n cells")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_by_two_soft() {
        let m = make_grid_model(2, 2, GridMode::Soft(0.2)).unwrap();
        assert_eq!(m.num_variables(), 4);
        assert_eq!(m.tables().len(), 4);
        let e = 0.2f64.exp();
        for t in m.tables() {
            assert_eq!(t.potentials(), &[1.0, e, e, 1.0]);
        }
    }

    #[test]
    fn degenerate_and_edge_counts() {
        let m = make_grid_model(1, 1, GridMode::Hard).unwrap();
        assert_eq!((m.num_variables(), m.tables().len()), (1, 0));
        // 3 rows * 2 horizontal + 3 cols * 2 vertical
        let m = make_grid_model(3, 3, GridMode::Soft(0.2)).unwrap();
        assert_eq!(m.tables().len(), 12);
        assert!(make_grid_model(0, 3, GridMode::Hard).is_err());
    }

    #[test]
    fn symmetry_generators() {
        assert_eq!(grid_symmetry_generators(4, 4).generators().len(), 2);
        assert_eq!(grid_symmetry_generators(1, 1).generators().len(), 0);
        let g = grid_symmetry_generators(2, 3);
        assert_eq!(g.generators().len(), 2);
    }
}
