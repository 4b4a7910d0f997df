//! Deterministic gridworlds: the two-key DoorKey task and Search-and-Rescue.
//!
//! Actions: 0 forward, 1 turn left, 2 turn right, 3 pick up, 4 drop,
//! 5 toggle, and (Search-and-Rescue only) 6 use.

mod layout;

pub use layout::{Dir, GridLayout, ItemKind, Tile};

use crate::env::{EnvError, LabeledMdp, StateKey, TerminalReason, Transition};
use crate::spec::LabelSet;

pub const FORWARD: usize = 0;
pub const LEFT: usize = 1;
pub const RIGHT: usize = 2;
pub const PICKUP: usize = 3;
pub const DROP: usize = 4;
pub const TOGGLE: usize = 5;
pub const USE: usize = 6;

/// Item position marker for "in the agent's inventory".
pub const HELD: u8 = u8::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Domain {
    DoorKey,
    SearchRescue,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridState {
    pub agent: u8,
    pub facing: Dir,
    /// Cell of each layout item, in layout item order, or [`HELD`].
    pub items: [u8; 2],
    pub door_open: bool,
    pub fire_out: bool,
    /// Bit `i` set once survivor `i` is rescued.
    pub rescued: u8,
}

impl GridState {
    pub fn held(&self, n_items: usize) -> Option<usize> {
        self.items[..n_items].iter().position(|&p| p == HELD)
    }
}

#[derive(Debug, Clone)]
pub struct GridEnv {
    pub domain: Domain,
    pub layout: GridLayout,
    pub max_steps: usize,
    state: GridState,
    done: bool,
}

impl GridEnv {
    pub fn doorkey(layout: GridLayout) -> Result<GridEnv, EnvError> {
        let kinds: Vec<ItemKind> = layout.items.iter().map(|i| i.0).collect();
        if kinds != [ItemKind::Key1, ItemKind::Key2] {
            return Err(EnvError::InvalidLayout("DoorKey needs keys 1 and 2 and no other items".into()));
        }
        if layout.count(Tile::Door) != 1 || layout.count(Tile::Fire) != 0 || layout.survivors() != 0 {
            return Err(EnvError::InvalidLayout("DoorKey needs one door and no fire or survivors".into()));
        }
        Ok(Self::new(Domain::DoorKey, layout, 300))
    }

    pub fn search_rescue(layout: GridLayout) -> Result<GridEnv, EnvError> {
        let kinds: Vec<ItemKind> = layout.items.iter().map(|i| i.0).collect();
        if kinds != [ItemKind::Key1, ItemKind::Extinguisher] {
            return Err(EnvError::InvalidLayout("Search-and-Rescue needs key 1 and an extinguisher".into()));
        }
        if layout.count(Tile::Door) != 1 || layout.count(Tile::Fire) != 1 || layout.survivors() == 0 {
            return Err(EnvError::InvalidLayout("Search-and-Rescue needs one door, one fire and survivors".into()));
        }
        Ok(Self::new(Domain::SearchRescue, layout, 600))
    }

    fn new(domain: Domain, layout: GridLayout, max_steps: usize) -> GridEnv {
        let state = initial_state(&layout);
        GridEnv { domain, layout, max_steps, state, done: false }
    }

    pub fn initial_state(&self) -> GridState {
        initial_state(&self.layout)
    }

    pub fn state(&self) -> GridState {
        self.state
    }

    /// Places the agent in `s`, clearing any terminal flag.
    pub fn set_state(&mut self, s: GridState) {
        self.state = s;
        self.done = false;
    }

    pub fn key_of(&self, s: &GridState) -> StateKey {
        let mut k = s.agent as u64
            | (s.facing.index() as u64) << 8
            | (s.door_open as u64) << 10
            | (s.fire_out as u64) << 11
            | (s.rescued as u64) << 12;
        for (i, &p) in s.items.iter().enumerate() {
            k |= (p as u64) << (16 + 8 * i);
        }
        StateKey(k)
    }

    pub fn terminal_of(&self, s: &GridState) -> Option<TerminalReason> {
        match self.layout.tiles[s.agent as usize] {
            Tile::Goal => Some(TerminalReason::Goal),
            Tile::Lava => Some(TerminalReason::Hazard),
            _ => None,
        }
    }

    pub fn labels_of(&self, s: &GridState) -> LabelSet {
        let mut l = LabelSet::new();
        let mut add = |a: &str| l.insert(a).expect("valid atom");
        let held = s.held(self.layout.items.len()).map(|i| self.layout.items[i].0);
        match (self.domain, held) {
            (Domain::DoorKey, Some(ItemKind::Key1)) => add("k1"),
            (Domain::DoorKey, Some(ItemKind::Key2)) => add("k2"),
            (Domain::SearchRescue, Some(ItemKind::Key1)) => add("k"),
            (Domain::SearchRescue, Some(ItemKind::Extinguisher)) => add("x"),
            _ => {}
        }
        if s.door_open {
            add("d");
        }
        if s.fire_out {
            add("f");
        }
        for i in 0..self.layout.survivors() {
            if s.rescued & (1 << i) != 0 {
                add(&format!("s{}", i + 1));
            }
        }
        match self.layout.tiles[s.agent as usize] {
            Tile::Goal => add("g"),
            Tile::Lava => add("l"),
            _ => {}
        }
        l
    }

    fn item_at(&self, s: &GridState, cell: usize) -> Option<usize> {
        s.items[..self.layout.items.len()].iter().position(|&p| p as usize == cell)
    }

    fn blocked(&self, s: &GridState, cell: usize) -> bool {
        let solid = match self.layout.tiles[cell] {
            Tile::Wall => true,
            Tile::Door => !s.door_open,
            Tile::Fire => !s.fire_out,
            Tile::Survivor(i) => s.rescued & (1 << i) == 0,
            Tile::Floor | Tile::Lava | Tile::Goal => false,
        };
        solid || self.item_at(s, cell).is_some()
    }

    /// The unique successor of `s` under `action`. Terminal states are not
    /// special-cased here.
    pub fn successor(&self, s: &GridState, action: usize) -> GridState {
        let mut n = *s;
        let ahead = self.layout.neighbor(s.agent as usize, s.facing);
        let n_items = self.layout.items.len();
        match action {
            FORWARD => {
                if let Some(c) = ahead.filter(|&c| !self.blocked(s, c)) {
                    n.agent = c as u8;
                }
            }
            LEFT => n.facing = s.facing.left(),
            RIGHT => n.facing = s.facing.right(),
            PICKUP => {
                if let (None, Some(i)) = (s.held(n_items), ahead.and_then(|c| self.item_at(s, c))) {
                    n.items[i] = HELD;
                }
            }
            DROP => {
                if let (Some(i), Some(c)) = (s.held(n_items), ahead) {
                    if self.layout.tiles[c] == Tile::Floor && self.item_at(s, c).is_none() {
                        n.items[i] = c as u8;
                    }
                }
            }
            TOGGLE => {
                let holds_key = s
                    .held(n_items)
                    .is_some_and(|i| matches!(self.layout.items[i].0, ItemKind::Key1 | ItemKind::Key2));
                if holds_key && ahead.is_some_and(|c| self.layout.tiles[c] == Tile::Door) {
                    n.door_open = true;
                }
            }
            USE => match ahead.map(|c| self.layout.tiles[c]) {
                Some(Tile::Fire)
                    if s.held(n_items).is_some_and(|i| self.layout.items[i].0 == ItemKind::Extinguisher) =>
                {
                    n.fire_out = true
                }
                Some(Tile::Survivor(i)) => n.rescued |= 1 << i,
                _ => {}
            },
            _ => {}
        }
        n
    }
}

fn initial_state(layout: &GridLayout) -> GridState {
    let mut items = [HELD; 2];
    for (slot, &(_, c)) in items.iter_mut().zip(&layout.items) {
        *slot = c as u8;
    }
    GridState {
        agent: layout.agent as u8,
        facing: layout.facing,
        items,
        door_open: false,
        fire_out: false,
        rescued: 0,
    }
}

impl LabeledMdp for GridEnv {
    fn action_count(&self) -> usize {
        match self.domain {
            Domain::DoorKey => 6,
            Domain::SearchRescue => 7,
        }
    }

    fn max_episode_steps(&self) -> usize {
        self.max_steps
    }

    fn reset(&mut self, _seed: u64) -> StateKey {
        self.state = self.initial_state();
        self.done = false;
        self.key_of(&self.state)
    }

    fn step(&mut self, action: usize) -> Result<Transition, EnvError> {
        if self.done {
            return Err(EnvError::StepAfterTerminal);
        }
        let count = self.action_count();
        if action >= count {
            return Err(EnvError::InvalidAction { action, count });
        }
        self.state = self.successor(&self.state, action);
        let terminal = self.terminal_of(&self.state);
        self.done = terminal.is_some();
        Ok(Transition { terminal })
    }

    fn labels(&self) -> LabelSet {
        self.labels_of(&self.state)
    }

    fn state_key(&self) -> StateKey {
        self.key_of(&self.state)
    }

    fn is_deterministic(&self) -> bool {
        true
    }
}

#[cfg(test)]
mod tests {
    use std::collections::{HashMap, HashSet, VecDeque};

    use super::*;

    fn env(text: &str) -> GridEnv {
        GridEnv::doorkey(GridLayout::parse(text).unwrap()).unwrap()
    }

    const TINY: &str = "\
#######
#A1.#G#
#2..D.#
#######
A@E
";

    #[test]
    fn pickup_drop_toggle() {
        let mut e = env(TINY);
        e.reset(0);
        e.step(TOGGLE).unwrap();
        assert!(!e.state().door_open, "toggle with empty hands");
        e.step(PICKUP).unwrap();
        assert_eq!(e.labels(), LabelSet::from_atoms(["k1"]).unwrap());
        e.step(PICKUP).unwrap();
        assert_eq!(e.state().held(2), Some(0), "one slot");
        e.step(FORWARD).unwrap();
        e.step(FORWARD).unwrap();
        assert_eq!(e.layout.coords(e.state().agent as usize), (3, 1));
        e.step(RIGHT).unwrap();
        e.step(FORWARD).unwrap();
        e.step(LEFT).unwrap();
        e.step(TOGGLE).unwrap();
        assert_eq!(e.labels(), LabelSet::from_atoms(["k1", "d"]).unwrap());
        e.step(LEFT).unwrap();
        e.step(LEFT).unwrap();
        e.step(DROP).unwrap();
        assert!(e.labels().contains("d") && !e.labels().contains("k1"));
        e.step(RIGHT).unwrap();
        e.step(RIGHT).unwrap();
        e.step(FORWARD).unwrap();
        e.step(FORWARD).unwrap();
        e.step(LEFT).unwrap();
        let t = e.step(FORWARD).unwrap();
        assert_eq!(t.terminal, Some(TerminalReason::Goal));
        assert!(e.labels().contains("g"));
        assert_eq!(e.step(FORWARD), Err(EnvError::StepAfterTerminal));
    }

    #[test]
    fn rejects_out_of_range_action() {
        let mut e = env(TINY);
        e.reset(0);
        assert_eq!(e.step(USE), Err(EnvError::InvalidAction { action: 6, count: 6 }));
    }

    #[test]
    fn reset_is_seed_independent() {
        let mut a = env(TINY);
        let mut b = env(TINY);
        assert_eq!(a.reset(1), b.reset(99));
        for act in [0, 3, 2, 0, 0, 5, 1] {
            assert_eq!(a.step(act).unwrap(), b.step(act).unwrap());
            assert_eq!(a.state_key(), b.state_key());
        }
    }

    /// Independent reimplementation of movement on a 3x3 open room.
    #[test]
    fn open_room_transition_table() {
        let mut e = env("#####\n#A..#\n#...#\n#..G#\n###D#\n#12.#\n#####\n");
        let lay = e.layout.clone();
        for cell in 0..lay.width * lay.height {
            let (x, y) = lay.coords(cell);
            if !(1..=3).contains(&x) || !(1..=3).contains(&y) {
                continue;
            }
            for f in Dir::ALL {
                let mut s = e.initial_state();
                s.agent = cell as u8;
                s.facing = f;
                for a in 0..6 {
                    let n = e.successor(&s, a);
                    let (dx, dy): (i32, i32) = match f {
                        Dir::N => (0, -1),
                        Dir::E => (1, 0),
                        Dir::S => (0, 1),
                        Dir::W => (-1, 0),
                    };
                    let (tx, ty) = (x as i32 + dx, y as i32 + dy);
                    let inside = (1..=3).contains(&tx) && (1..=3).contains(&ty);
                    let expect_cell = if a == 0 && inside { lay.cell(tx as usize, ty as usize) } else { cell };
                    let expect_facing = match a {
                        1 => Dir::from_index(f.index() + 3),
                        2 => Dir::from_index(f.index() + 1),
                        _ => f,
                    };
                    assert_eq!((n.agent as usize, n.facing), (expect_cell, expect_facing), "{x},{y} {f:?} a{a}");
                    assert_eq!(n.items, s.items);
                    assert!(!n.door_open);
                }
            }
        }
        e.reset(0);
    }

    #[test]
    fn labels_are_sound_on_reachable_states() {
        let e = GridEnv::doorkey(GridLayout::parse(include_str!("../../configs/doorkey.layout")).unwrap()).unwrap();
        let mut seen = HashSet::from([e.initial_state()]);
        let mut queue = VecDeque::from([e.initial_state()]);
        let mut keys = HashMap::new();
        while let Some(s) = queue.pop_front() {
            let l = e.labels_of(&s);
            assert!(!(l.contains("g") && l.contains("l")));
            assert!(!(l.contains("k1") && l.contains("k2")));
            assert_eq!(keys.insert(e.key_of(&s), s), None, "key collision");
            if e.terminal_of(&s).is_some() {
                continue;
            }
            for a in 0..6 {
                let n = e.successor(&s, a);
                if seen.insert(n) {
                    queue.push_back(n);
                }
            }
        }
        assert!(seen.len() > 1000);
    }
}
