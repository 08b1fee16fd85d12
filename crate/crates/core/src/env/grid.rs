use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::EnvError;

/// Integer grid coordinate. `x` grows east, `y` grows south.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub x: i32,
    pub y: i32,
}

impl Cell {
    pub const fn new(x: i32, y: i32) -> Self {
        Cell { x, y }
    }

    pub fn chebyshev(self, other: Cell) -> i32 {
        (self.x - other.x).abs().max((self.y - other.y).abs())
    }

    pub fn offset(self, dx: i32, dy: i32) -> Cell {
        Cell::new(self.x + dx, self.y + dy)
    }
}

/// Static layout of a MiniRearrange scene.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridWorldSpec {
    pub width: i32,
    pub height: i32,
    pub container_cell: Cell,
    pub goal_cell: Cell,
    pub walls: Vec<Cell>,
    pub max_steps_main: u32,
    pub max_steps_aux: u32,
}

impl Default for GridWorldSpec {
    /// 9x9 room, container in the north-west corner region, goal in the
    /// south-east, and a short north-south wall in the middle.
    fn default() -> Self {
        GridWorldSpec {
            width: 9,
            height: 9,
            container_cell: Cell::new(1, 1),
            goal_cell: Cell::new(7, 7),
            walls: vec![Cell::new(4, 3), Cell::new(4, 4), Cell::new(4, 5)],
            max_steps_main: 120,
            max_steps_aux: 60,
        }
    }
}

impl GridWorldSpec {
    pub fn in_bounds(&self, c: Cell) -> bool {
        c.x >= 0 && c.y >= 0 && c.x < self.width && c.y < self.height
    }

    pub fn validate(&self) -> Result<(), EnvError> {
        let bad = |msg: String| Err(EnvError::InvalidSpec(msg));
        if self.width < 5 || self.height < 5 {
            return bad(format!("grid must be at least 5x5, got {}x{}", self.width, self.height));
        }
        if self.width > 64 || self.height > 64 {
            return bad("grid larger than 64x64 is not supported".into());
        }
        for (name, cell) in [("container", self.container_cell), ("goal", self.goal_cell)] {
            if !self.in_bounds(cell) {
                return bad(format!("{name} cell {cell:?} out of bounds"));
            }
            if self.walls.contains(&cell) {
                return bad(format!("{name} cell {cell:?} is a wall"));
            }
        }
        if self.container_cell == self.goal_cell {
            return bad("container and goal cells coincide".into());
        }
        if let Some(w) = self.walls.iter().find(|w| !self.in_bounds(**w)) {
            return bad(format!("wall {w:?} out of bounds"));
        }
        if !(self.max_steps_main > self.max_steps_aux && self.max_steps_aux > 0) {
            return bad(format!(
                "need max_steps_main > max_steps_aux > 0, got {} / {}",
                self.max_steps_main, self.max_steps_aux
            ));
        }
        Ok(())
    }
}

pub(crate) const MOVES: [(i32, i32); 4] = [(0, -1), (1, 0), (0, 1), (-1, 0)];

/// A validated spec plus precomputed all-pairs geodesic distances.
#[derive(Debug, Clone)]
pub struct Grid {
    spec: GridWorldSpec,
    wall: Vec<bool>,
    free: Vec<Cell>,
    dist: Vec<u16>,
}

pub const UNREACHABLE: u16 = u16::MAX;

impl Grid {
    pub fn new(spec: GridWorldSpec) -> Result<Self, EnvError> {
        spec.validate()?;
        let n = (spec.width * spec.height) as usize;
        let mut wall = vec![false; n];
        for w in &spec.walls {
            wall[(w.y * spec.width + w.x) as usize] = true;
        }
        let mut grid = Grid { free: Vec::new(), dist: vec![UNREACHABLE; n * n], wall, spec };
        grid.free = (0..grid.spec.height)
            .flat_map(|y| (0..grid.spec.width).map(move |x| Cell::new(x, y)))
            .filter(|c| !grid.is_wall(*c))
            .collect();
        for src in 0..n {
            if grid.wall[src] {
                continue;
            }
            let field = grid.bfs(&[grid.cell_at(src)]);
            grid.dist[src * n..(src + 1) * n].copy_from_slice(&field);
        }
        let anchor = grid.spec.goal_cell;
        if grid.free.iter().any(|c| grid.distance(anchor, *c) == UNREACHABLE) {
            return Err(EnvError::InvalidSpec("free cells are not all connected".into()));
        }
        Ok(grid)
    }

    pub fn spec(&self) -> &GridWorldSpec {
        &self.spec
    }

    pub fn free_cells(&self) -> &[Cell] {
        &self.free
    }

    fn index(&self, c: Cell) -> usize {
        (c.y * self.spec.width + c.x) as usize
    }

    fn cell_at(&self, i: usize) -> Cell {
        let w = self.spec.width as usize;
        Cell::new((i % w) as i32, (i / w) as i32)
    }

    pub fn is_wall(&self, c: Cell) -> bool {
        self.wall[self.index(c)]
    }

    /// True when `c` is inside the grid and not a wall.
    pub fn passable(&self, c: Cell) -> bool {
        self.spec.in_bounds(c) && !self.is_wall(c)
    }

    /// Shortest 4-connected path length between two free cells.
    pub fn distance(&self, a: Cell, b: Cell) -> u16 {
        let n = self.wall.len();
        self.dist[self.index(a) * n + self.index(b)]
    }

    /// Multi-source BFS distance field over the whole grid.
    pub fn bfs(&self, sources: &[Cell]) -> Vec<u16> {
        let mut out = vec![UNREACHABLE; self.wall.len()];
        let mut queue = VecDeque::new();
        for &s in sources {
            if self.passable(s) && out[self.index(s)] == UNREACHABLE {
                out[self.index(s)] = 0;
                queue.push_back(s);
            }
        }
        while let Some(c) = queue.pop_front() {
            let d = out[self.index(c)];
            for (dx, dy) in MOVES {
                let nb = c.offset(dx, dy);
                if self.passable(nb) && out[self.index(nb)] == UNREACHABLE {
                    out[self.index(nb)] = d + 1;
                    queue.push_back(nb);
                }
            }
        }
        out
    }

    /// Looks up a cell in a field returned by [`Grid::bfs`].
    pub fn field_at(&self, field: &[u16], c: Cell) -> u16 {
        field[self.index(c)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_spec_is_valid() {
        let grid = Grid::new(GridWorldSpec::default()).unwrap();
        assert_eq!(grid.free_cells().len(), 81 - 3);
    }

    #[test]
    fn distances_go_around_walls() {
        let grid = Grid::new(GridWorldSpec::default()).unwrap();
        // (3,4) -> (5,4) must detour around the wall at x=4, y=3..=5.
        assert_eq!(grid.distance(Cell::new(3, 4), Cell::new(5, 4)), 6);
        assert_eq!(grid.distance(Cell::new(0, 0), Cell::new(8, 8)), 16);
        assert_eq!(grid.distance(Cell::new(2, 2), Cell::new(2, 2)), 0);
    }

    #[test]
    fn rejects_bad_specs() {
        let mut s = GridWorldSpec::default();
        s.goal_cell = s.container_cell;
        assert!(Grid::new(s).is_err());

        let mut s = GridWorldSpec::default();
        s.width = 4;
        assert!(Grid::new(s).is_err());

        let mut s = GridWorldSpec::default();
        s.walls.push(s.goal_cell);
        assert!(Grid::new(s).is_err());

        let mut s = GridWorldSpec::default();
        s.max_steps_aux = s.max_steps_main;
        assert!(Grid::new(s).is_err());

        // wall ring isolating the corner cell (0,0)
        let mut s = GridWorldSpec::default();
        s.walls = vec![Cell::new(1, 0), Cell::new(0, 1)];
        s.container_cell = Cell::new(2, 2);
        assert!(Grid::new(s).is_err());
    }
}
