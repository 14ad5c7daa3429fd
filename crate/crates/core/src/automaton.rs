//! The column-window state machine whose accepted words of length `s` are
//! exactly the maximal pattern-avoiding `rows × s` matrices.
//!
//! A state remembers the last `max(2W, 1)` columns, `W` being the machine
//! width of the pattern set. Reading column `j` checks that no occurrence
//! ends in column `j` (type 1) and that every 0 in column `j - W` is
//! satisfied (type 2); by then all columns an occurrence through column
//! `j - W` could touch are known. At the end of the word the last `W`
//! columns are still untested, so acceptance tests them with everything
//! right of the grid treated as outside.

use std::collections::{HashMap, VecDeque};

use serde_json::{json, Value};

use crate::error::{Error, Guards, Result};
use crate::pattern::PatternSet;

/// Largest row count the automaton supports; every state enumerates all
/// `2^rows` candidate columns.
pub const MAX_ROWS: usize = 24;

/// A column as a bitmask: bit `i` set iff the seat in row `i` is occupied.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ColumnWord(pub u64);

impl ColumnWord {
    pub fn ones(self) -> u32 {
        self.0.count_ones()
    }
}

/// One window position: a known column or the left/right edge of the grid.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Slot {
    OutOfGrid,
    Column(ColumnWord),
}

impl Slot {
    fn word(self) -> Option<u64> {
        match self {
            Slot::OutOfGrid => None,
            Slot::Column(c) => Some(c.0),
        }
    }
}

/// The last `window_len` columns read, most recent last.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct MachineState {
    pub window: Box<[Slot]>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Transition {
    pub column: ColumnWord,
    pub target: usize,
    /// Number of ones in `column`.
    pub weight: u32,
}

struct CompiledPattern {
    masks: Vec<u64>,
    width: usize,
    height: usize,
    cells: Vec<(usize, usize)>,
}

/// Pattern geometry specialized to a row count.
pub struct Checker {
    rows: usize,
    width: usize,
    patterns: Vec<CompiledPattern>,
}

impl Checker {
    pub fn new(rows: usize, set: &PatternSet) -> Self {
        let patterns = set
            .patterns()
            .iter()
            .map(|p| CompiledPattern {
                masks: p.column_masks(),
                width: p.width(),
                height: p.height(),
                cells: p
                    .cells()
                    .iter()
                    .map(|&(r, c)| (r as usize, c as usize))
                    .collect(),
            })
            .collect();
        Checker {
            rows,
            width: set.machine_width(),
            patterns,
        }
    }

    /// Machine width `W`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn window_len(&self) -> usize {
        (2 * self.width).max(1)
    }

    /// Whether pattern `p` occurs with its left column at `origin` and top row
    /// at `shift`; `flip` optionally ORs a bit into one slot first.
    fn occurs(
        &self,
        slots: &[Slot],
        p: &CompiledPattern,
        origin: usize,
        shift: usize,
        flip: Option<(usize, u64)>,
    ) -> bool {
        if shift + p.height > self.rows || origin + p.width >= slots.len() {
            return false;
        }
        p.masks.iter().enumerate().all(|(k, &mask)| {
            let idx = origin + k;
            match slots[idx].word() {
                None => false,
                Some(mut c) => {
                    if let Some((at, bit)) = flip {
                        if at == idx {
                            c |= bit;
                        }
                    }
                    let m = mask << shift;
                    c & m == m
                }
            }
        })
    }

    /// Type-1 check: appending `column` after `window` creates no occurrence
    /// whose rightmost column is the new one.
    pub fn type1_ok(&self, window: &[Slot], column: ColumnWord) -> bool {
        let mut ext: Vec<Slot> = window.to_vec();
        ext.push(Slot::Column(column));
        self.type1_ok_extended(&ext)
    }

    fn type1_ok_extended(&self, ext: &[Slot]) -> bool {
        let last = ext.len() - 1;
        self.patterns.iter().all(|p| {
            if p.width > last || p.height > self.rows {
                return true;
            }
            let origin = last - p.width;
            (0..=self.rows - p.height).all(|v| !self.occurs(ext, p, origin, v, None))
        })
    }

    /// Every 0 of the column in slot `t` would complete an occurrence lying
    /// entirely inside `slots` if it were flipped to 1. Outside slots never
    /// count. A slot holding [`Slot::OutOfGrid`] is vacuously satisfied.
    pub fn zeros_satisfied(&self, slots: &[Slot], t: usize) -> bool {
        let Some(c) = slots[t].word() else {
            return true;
        };
        (0..self.rows).filter(|i| c >> i & 1 == 0).all(|i| {
            let bit = 1u64 << i;
            self.patterns.iter().any(|p| {
                p.cells.iter().any(|&(dr, dc)| {
                    dr <= i
                        && dc <= t
                        && self.occurs(slots, p, t - dc, i - dr, Some((t, bit)))
                })
            })
        })
    }

    /// Type-2 check on a window that already ends with the new column: the
    /// column `W` places left of the newest has all its 0s satisfied.
    pub fn type2_ok(&self, ext: &[Slot]) -> bool {
        match (ext.len() - 1).checked_sub(self.width) {
            Some(t) => self.zeros_satisfied(ext, t),
            None => true,
        }
    }

    /// Acceptance: the trailing `W` columns, untested so far, have their 0s
    /// satisfied with nothing to their right.
    pub fn accepting(&self, window: &[Slot]) -> bool {
        let len = window.len();
        (len.saturating_sub(self.width)..len).all(|t| self.zeros_satisfied(window, t))
    }
}

/// Free-function form of [`Checker::type1_ok`].
pub fn check_type1(window: &[Slot], column: ColumnWord, rows: usize, set: &PatternSet) -> bool {
    Checker::new(rows, set).type1_ok(window, column)
}

/// Free-function form of [`Checker::type2_ok`]; `window` already ends with
/// the appended column.
pub fn check_type2(window: &[Slot], rows: usize, set: &PatternSet) -> bool {
    Checker::new(rows, set).type2_ok(window)
}

/// The reachable part of the seating machine. State 0 is the initial
/// all-outside window; other indices follow breadth-first discovery order.
#[derive(Clone, Debug)]
pub struct Automaton {
    rows: usize,
    width: usize,
    states: Vec<MachineState>,
    transitions: Vec<Vec<Transition>>,
    accepting: Vec<bool>,
    depth_limit: Option<usize>,
}

impl Automaton {
    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn initial(&self) -> usize {
        0
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[MachineState] {
        &self.states
    }

    /// Outgoing transitions of `state`, sorted by column.
    pub fn transitions(&self, state: usize) -> &[Transition] {
        &self.transitions[state]
    }

    pub fn num_transitions(&self) -> usize {
        self.transitions.iter().map(Vec::len).sum()
    }

    pub fn is_accepting(&self, state: usize) -> bool {
        self.accepting[state]
    }

    /// `None` for the full machine; `Some(d)` if only states within `d`
    /// steps of the initial state were expanded, in which case the machine
    /// is exact for words of length at most `d`.
    pub fn depth_limit(&self) -> Option<usize> {
        self.depth_limit
    }

    pub fn step(&self, state: usize, column: ColumnWord) -> Option<usize> {
        let ts = &self.transitions[state];
        ts.binary_search_by_key(&column, |t| t.column)
            .ok()
            .map(|k| ts[k].target)
    }

    /// Serializes states, accept flags and transitions for inspection.
    pub fn to_json(&self) -> Value {
        let states: Vec<Value> = self
            .states
            .iter()
            .zip(&self.accepting)
            .enumerate()
            .map(|(i, (s, &acc))| {
                let window: Vec<Value> = s
                    .window
                    .iter()
                    .map(|slot| match slot {
                        Slot::OutOfGrid => Value::Null,
                        Slot::Column(c) => json!(c.0),
                    })
                    .collect();
                json!({"index": i, "window": window, "accept": acc})
            })
            .collect();
        let transitions: Vec<Value> = self
            .transitions
            .iter()
            .enumerate()
            .flat_map(|(i, ts)| {
                ts.iter()
                    .map(move |t| json!([i, t.column.0, t.target, t.weight]))
            })
            .collect();
        json!({
            "rows": self.rows,
            "width": self.width,
            "window_len": self.states.first().map_or(0, |s| s.window.len()),
            "initial": 0,
            "complete": self.depth_limit.is_none(),
            "states": states,
            "transitions": transitions,
        })
    }
}

/// Builds the full reachable machine for `rows` rows.
pub fn build_automaton(rows: usize, set: &PatternSet, guards: &Guards) -> Result<Automaton> {
    build(rows, set, guards, None)
}

/// Builds only the states reachable within `depth` steps; enough to count
/// words of length at most `depth` when the full machine would be huge.
pub fn build_automaton_bounded(
    rows: usize,
    set: &PatternSet,
    guards: &Guards,
    depth: usize,
) -> Result<Automaton> {
    build(rows, set, guards, Some(depth))
}

fn build(
    rows: usize,
    set: &PatternSet,
    guards: &Guards,
    depth_limit: Option<usize>,
) -> Result<Automaton> {
    if rows == 0 || rows > MAX_ROWS {
        return Err(Error::InvalidInput(format!(
            "rows must be in 1..={MAX_ROWS}, got {rows}"
        )));
    }
    let checker = Checker::new(rows, set);
    let len = checker.window_len();

    // A column failing a pattern on its own fails everywhere.
    let blank = vec![Slot::OutOfGrid; len];
    let candidates: Vec<ColumnWord> = (0..1u64 << rows)
        .map(ColumnWord)
        .filter(|&c| checker.type1_ok(&blank, c))
        .collect();

    let initial = MachineState {
        window: blank.into_boxed_slice(),
    };
    let mut states = vec![initial.clone()];
    let mut depth = vec![0usize];
    let mut index: HashMap<MachineState, usize> = HashMap::from([(initial, 0)]);
    let mut transitions: Vec<Vec<Transition>> = vec![Vec::new()];
    let mut queue = VecDeque::from([0usize]);
    let mut ext: Vec<Slot> = vec![Slot::OutOfGrid; len + 1];

    while let Some(current) = queue.pop_front() {
        if depth_limit.is_some_and(|d| depth[current] >= d) {
            continue;
        }
        ext[..len].copy_from_slice(&states[current].window);
        let mut out = Vec::new();
        for &c in &candidates {
            ext[len] = Slot::Column(c);
            if !checker.type1_ok_extended(&ext) || !checker.type2_ok(&ext) {
                continue;
            }
            let next = MachineState {
                window: ext[1..].to_vec().into_boxed_slice(),
            };
            let target = match index.get(&next) {
                Some(&j) => j,
                None => {
                    let j = states.len();
                    Guards::check("automaton states", j as u128 + 1, guards.states as u128)?;
                    index.insert(next.clone(), j);
                    states.push(next);
                    depth.push(depth[current] + 1);
                    transitions.push(Vec::new());
                    queue.push_back(j);
                    j
                }
            };
            out.push(Transition {
                column: c,
                target,
                weight: c.ones(),
            });
        }
        transitions[current] = out;
    }

    let accepting = states
        .iter()
        .map(|s| checker.accepting(&s.window))
        .collect();
    Ok(Automaton {
        rows,
        width: checker.width(),
        states,
        transitions,
        accepting,
        depth_limit,
    })
}

/// Runs the machine on a word of columns.
///
/// Panics if the word is longer than the depth limit of a bounded machine.
pub fn accepts(a: &Automaton, columns: &[ColumnWord]) -> bool {
    if let Some(d) = a.depth_limit {
        assert!(columns.len() <= d, "word longer than the machine's depth limit");
    }
    let mut state = a.initial();
    for &c in columns {
        if c.0 >> a.rows != 0 {
            return false;
        }
        match a.step(state, c) {
            Some(next) => state = next,
            None => return false,
        }
    }
    a.is_accepting(state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::{is_maximal, Grid};
    use crate::pattern::{builtin, Pattern};

    fn hrun2() -> PatternSet {
        builtin("hrun", Some(2)).unwrap()
    }

    fn col(c: u64) -> Slot {
        Slot::Column(ColumnWord(c))
    }

    fn words(v: &[u64]) -> Vec<ColumnWord> {
        v.iter().map(|&c| ColumnWord(c)).collect()
    }

    #[test]
    fn type1_examples() {
        let out = Slot::OutOfGrid;
        assert!(!check_type1(&[out, col(1)], ColumnWord(1), 1, &hrun2()));
        assert!(check_type1(&[out, col(1)], ColumnWord(0), 1, &hrun2()));
        let kings = builtin("kings", None).unwrap();
        assert!(!check_type1(&[out, col(0b01)], ColumnWord(0b10), 2, &kings));
        assert!(check_type1(&[out, out], ColumnWord(1), 1, &hrun2()));
    }

    #[test]
    fn type2_examples() {
        // window [1, 0, 1]: tested column is the middle one
        assert!(check_type2(&[col(1), col(0), col(1)], 1, &hrun2()));
        assert!(!check_type2(&[col(0), col(0), col(0)], 1, &hrun2()));
        assert!(check_type2(&[col(0), col(1), col(0)], 1, &hrun2()));
        // a 0 beside the left edge needs its right neighbour
        assert!(!check_type2(&[Slot::OutOfGrid, col(0), col(0)], 1, &hrun2()));
        assert!(check_type2(&[Slot::OutOfGrid, col(0), col(1)], 1, &hrun2()));
    }

    #[test]
    fn hrun2_words() {
        let a = build_automaton(1, &hrun2(), &Guards::default()).unwrap();
        assert!(accepts(&a, &words(&[1, 0, 1])));
        assert!(accepts(&a, &words(&[0, 1, 0])));
        assert!(!accepts(&a, &words(&[1, 0, 0])));
        assert!(!accepts(&a, &words(&[1, 1, 0])));
        assert!(accepts(&a, &[]));
        assert!(!accepts(&a, &words(&[2])));
        let len3: Vec<u64> = (0..8u64)
            .filter(|g| accepts(&a, &words(&[g & 1, g >> 1 & 1, g >> 2 & 1])))
            .collect();
        assert_eq!(len3, vec![0b010, 0b101]);
        let steady = a
            .states()
            .iter()
            .filter(|s| s.window.iter().all(|x| *x != Slot::OutOfGrid))
            .count();
        assert!(steady <= 4);
    }

    #[test]
    fn deterministic_and_reachable() {
        for set in [
            hrun2(),
            builtin("kings", None).unwrap(),
            builtin("tblock", None).unwrap(),
        ] {
            let a = build_automaton(3, &set, &Guards::default()).unwrap();
            let mut seen = vec![false; a.num_states()];
            seen[0] = true;
            let mut stack = vec![0];
            while let Some(i) = stack.pop() {
                let ts = a.transitions(i);
                assert!(ts.windows(2).all(|w| w[0].column < w[1].column));
                for t in ts {
                    assert!(t.target < a.num_states());
                    assert_eq!(t.weight, t.column.ones());
                    if !seen[t.target] {
                        seen[t.target] = true;
                        stack.push(t.target);
                    }
                }
            }
            assert!(seen.iter().all(|&b| b));
        }
    }

    fn language_equivalence(rows: usize, set: &PatternSet, max_cols: usize) {
        let a = build_automaton(rows, set, &Guards::default()).unwrap();
        for cols in 0..=max_cols {
            for g in 0u64..1 << (rows * cols) {
                let mask = (1u64 << rows) - 1;
                let columns: Vec<u64> = (0..cols).map(|j| g >> (j * rows) & mask).collect();
                let grid = Grid::from_columns(rows, &columns);
                assert_eq!(
                    accepts(&a, &words(&columns)),
                    is_maximal(&grid, set),
                    "rows {rows}, columns {columns:?}, {set:?}"
                );
            }
        }
    }

    #[test]
    fn width_zero_machine() {
        let vdimer = PatternSet::new(vec![Pattern::new([(0, 0), (1, 0)]).unwrap()]).unwrap();
        assert_eq!(Checker::new(2, &vdimer).window_len(), 1);
        language_equivalence(2, &vdimer, 5);
        language_equivalence(3, &vdimer, 4);
    }

    #[test]
    fn small_language_equivalence() {
        language_equivalence(1, &hrun2(), 10);
        language_equivalence(2, &builtin("kings", None).unwrap(), 5);
        language_equivalence(2, &builtin("tblock", None).unwrap(), 5);
        language_equivalence(1, &builtin("spaced", Some(3)).unwrap(), 10);
        language_equivalence(3, &builtin("block22", None).unwrap(), 4);
    }

    #[test]
    fn tall_patterns_never_fit() {
        // block22 on one row constrains nothing: only the all-ones row is maximal
        language_equivalence(1, &builtin("block22", None).unwrap(), 8);
    }

    #[test]
    fn guards_and_bounds() {
        let g = Guards { states: 3, ..Guards::default() };
        assert!(matches!(
            build_automaton(2, &builtin("kings", None).unwrap(), &g),
            Err(Error::Guard { .. })
        ));
        assert!(build_automaton(0, &hrun2(), &Guards::default()).is_err());
        assert!(build_automaton(MAX_ROWS + 1, &hrun2(), &Guards::default()).is_err());
        let b = build_automaton_bounded(6, &hrun2(), &Guards::default(), 1).unwrap();
        assert_eq!(b.depth_limit(), Some(1));
        assert!(b.transitions(1).is_empty());
    }

    #[test]
    fn dump_shape() {
        let a = build_automaton(1, &hrun2(), &Guards::default()).unwrap();
        let v = a.to_json();
        assert_eq!(v["initial"], 0);
        assert_eq!(v["states"].as_array().unwrap().len(), a.num_states());
        assert_eq!(v["transitions"].as_array().unwrap().len(), a.num_transitions());
        assert_eq!(v["states"][0]["window"], json!([null, null]));
    }
}
