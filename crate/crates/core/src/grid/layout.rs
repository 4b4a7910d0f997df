//! ASCII layout files.
//!
//! One character per cell: `#` wall, `.` floor, `L` lava, `1`/`2` keys,
//! `D` door, `G` goal, `F` fire, `S` survivor, `X` extinguisher, `A` agent
//! start. A separate line `A@<dir>` with `<dir>` one of `N`, `E`, `S`, `W`
//! sets the starting direction (east when absent). Blank lines are ignored.

use std::collections::VecDeque;

use crate::env::EnvError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Dir {
    N,
    E,
    S,
    W,
}

impl Dir {
    pub const ALL: [Dir; 4] = [Dir::N, Dir::E, Dir::S, Dir::W];

    pub fn index(self) -> u8 {
        self as u8
    }

    pub fn from_index(i: u8) -> Dir {
        Dir::ALL[(i & 3) as usize]
    }

    pub fn left(self) -> Dir {
        Dir::from_index(self.index() + 3)
    }

    pub fn right(self) -> Dir {
        Dir::from_index(self.index() + 1)
    }

    fn delta(self) -> (isize, isize) {
        match self {
            Dir::N => (0, -1),
            Dir::E => (1, 0),
            Dir::S => (0, 1),
            Dir::W => (-1, 0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Tile {
    Floor,
    Wall,
    Lava,
    Door,
    Goal,
    Fire,
    /// Survivor with its index in reading order.
    Survivor(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ItemKind {
    Key1,
    Key2,
    Extinguisher,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    /// Row-major static tiles; items and the agent sit on `Floor`.
    pub tiles: Vec<Tile>,
    /// Movable items and their start cells, sorted by kind.
    pub items: Vec<(ItemKind, usize)>,
    pub agent: usize,
    pub facing: Dir,
}

fn invalid(msg: impl Into<String>) -> EnvError {
    EnvError::InvalidLayout(msg.into())
}

impl GridLayout {
    pub fn cell(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    pub fn coords(&self, cell: usize) -> (usize, usize) {
        (cell % self.width, cell / self.width)
    }

    /// The neighbouring cell in direction `d`, if inside the grid.
    pub fn neighbor(&self, cell: usize, d: Dir) -> Option<usize> {
        let (x, y) = self.coords(cell);
        let (dx, dy) = d.delta();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.width && ny < self.height).then(|| self.cell(nx, ny))
    }

    pub fn count(&self, tile: Tile) -> usize {
        self.tiles.iter().filter(|&&t| t == tile).count()
    }

    pub fn survivors(&self) -> usize {
        self.tiles.iter().filter(|t| matches!(t, Tile::Survivor(_))).count()
    }

    pub fn item_cell(&self, kind: ItemKind) -> Option<usize> {
        self.items.iter().find(|(k, _)| *k == kind).map(|&(_, c)| c)
    }

    pub fn parse(text: &str) -> Result<GridLayout, EnvError> {
        let mut facing = None;
        let mut rows: Vec<&str> = Vec::new();
        for line in text.lines() {
            let line = line.trim_end();
            if line.is_empty() {
                continue;
            }
            if let Some(d) = line.strip_prefix("A@") {
                if facing.is_some() {
                    return Err(invalid("duplicate A@ line"));
                }
                facing = Some(match d {
                    "N" => Dir::N,
                    "E" => Dir::E,
                    "S" => Dir::S,
                    "W" => Dir::W,
                    _ => return Err(invalid(format!("bad direction {d:?}"))),
                });
                continue;
            }
            rows.push(line);
        }
        let height = rows.len();
        let width = rows.first().map_or(0, |r| r.chars().count());
        if width == 0 || height == 0 {
            return Err(invalid("empty grid"));
        }
        if width * height > 255 {
            return Err(invalid("grid larger than 255 cells"));
        }
        let mut tiles = Vec::with_capacity(width * height);
        let mut items = Vec::new();
        let mut agent = None;
        let mut survivors = 0u8;
        for (y, row) in rows.iter().enumerate() {
            if row.chars().count() != width {
                return Err(invalid(format!("row {} has width {}, expected {width}", y + 1, row.chars().count())));
            }
            for ch in row.chars() {
                let here = tiles.len();
                let tile = match ch {
                    '#' => Tile::Wall,
                    '.' => Tile::Floor,
                    'L' => Tile::Lava,
                    'D' => Tile::Door,
                    'G' => Tile::Goal,
                    'F' => Tile::Fire,
                    'S' => {
                        survivors += 1;
                        Tile::Survivor(survivors - 1)
                    }
                    '1' | '2' | 'X' => {
                        let kind = match ch {
                            '1' => ItemKind::Key1,
                            '2' => ItemKind::Key2,
                            _ => ItemKind::Extinguisher,
                        };
                        if items.iter().any(|(k, _)| *k == kind) {
                            return Err(invalid(format!("more than one {ch:?}")));
                        }
                        items.push((kind, here));
                        Tile::Floor
                    }
                    'A' => {
                        if agent.replace(here).is_some() {
                            return Err(invalid("more than one agent"));
                        }
                        Tile::Floor
                    }
                    other => return Err(invalid(format!("unknown cell {other:?}"))),
                };
                tiles.push(tile);
            }
        }
        items.sort();
        let layout = GridLayout {
            width,
            height,
            tiles,
            items,
            agent: agent.ok_or_else(|| invalid("no agent"))?,
            facing: facing.unwrap_or(Dir::E),
        };
        layout.validate()?;
        Ok(layout)
    }

    fn validate(&self) -> Result<(), EnvError> {
        if self.count(Tile::Goal) != 1 {
            return Err(invalid("exactly one goal required"));
        }
        if self.survivors() > 4 {
            return Err(invalid("at most four survivors"));
        }
        for (c, &t) in self.tiles.iter().enumerate() {
            if t == Tile::Door {
                let wall = |d| self.neighbor(c, d).map(|n| self.tiles[n]) == Some(Tile::Wall);
                if !(wall(Dir::N) && wall(Dir::S) || wall(Dir::E) && wall(Dir::W)) {
                    let (x, y) = self.coords(c);
                    return Err(invalid(format!("door at ({x},{y}) is not in a wall gap")));
                }
            }
        }
        // Everything of interest must be reachable without crossing lava,
        // with doors open and objects treated as passable.
        let mut seen = vec![false; self.tiles.len()];
        seen[self.agent] = true;
        let mut queue = VecDeque::from([self.agent]);
        while let Some(c) = queue.pop_front() {
            for d in Dir::ALL {
                if let Some(n) = self.neighbor(c, d) {
                    if !seen[n] && !matches!(self.tiles[n], Tile::Wall | Tile::Lava) {
                        seen[n] = true;
                        queue.push_back(n);
                    }
                }
            }
        }
        let special = self
            .tiles
            .iter()
            .enumerate()
            .filter(|(_, t)| !matches!(t, Tile::Floor | Tile::Wall | Tile::Lava))
            .map(|(c, _)| c)
            .chain(self.items.iter().map(|&(_, c)| c));
        for c in special {
            if !seen[c] {
                let (x, y) = self.coords(c);
                return Err(invalid(format!("cell ({x},{y}) is unreachable from the start")));
            }
        }
        Ok(())
    }

    /// Renders back to the file format.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for y in 0..self.height {
            for x in 0..self.width {
                let c = self.cell(x, y);
                let ch = if c == self.agent {
                    'A'
                } else if let Some(&(k, _)) = self.items.iter().find(|(_, ic)| *ic == c) {
                    match k {
                        ItemKind::Key1 => '1',
                        ItemKind::Key2 => '2',
                        ItemKind::Extinguisher => 'X',
                    }
                } else {
                    match self.tiles[c] {
                        Tile::Floor => '.',
                        Tile::Wall => '#',
                        Tile::Lava => 'L',
                        Tile::Door => 'D',
                        Tile::Goal => 'G',
                        Tile::Fire => 'F',
                        Tile::Survivor(_) => 'S',
                    }
                };
                out.push(ch);
            }
            out.push('\n');
        }
        out.push_str(&format!("A@{:?}\n", self.facing));
        out
    }
}
