use std::collections::HashMap;
use std::sync::Arc as Shared;

use crate::semiring::DualCost;

use super::{FstError, Result};

pub type Label = u32;
pub type StateId = usize;

pub const EPSILON: Label = 0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Arc {
    pub ilabel: Label,
    pub olabel: Label,
    pub weight: DualCost,
    pub nextstate: StateId,
}

impl Arc {
    pub fn new(ilabel: Label, olabel: Label, weight: DualCost, nextstate: StateId) -> Self {
        Arc {
            ilabel,
            olabel,
            weight,
            nextstate,
        }
    }
}

/// Bidirectional `symbol <-> id` table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SymbolTable {
    symbols: Vec<Option<String>>,
    ids: HashMap<String, Label>,
}

impl SymbolTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// A table with `<eps>` bound to 0.
    pub fn with_epsilon() -> Self {
        let mut t = Self::new();
        t.insert_with_id("<eps>", EPSILON).expect("fresh table");
        t
    }

    /// Returns the id of `symbol`, adding it with the next free id if absent.
    pub fn add(&mut self, symbol: &str) -> Label {
        if let Some(&id) = self.ids.get(symbol) {
            return id;
        }
        let id = self.symbols.len() as Label;
        self.symbols.push(Some(symbol.to_string()));
        self.ids.insert(symbol.to_string(), id);
        id
    }

    pub fn insert_with_id(&mut self, symbol: &str, id: Label) -> Result<()> {
        if let Some(&old) = self.ids.get(symbol) {
            if old == id {
                return Ok(());
            }
            return Err(FstError::Symbols(format!(
                "symbol {symbol:?} bound to both {old} and {id}"
            )));
        }
        let idx = id as usize;
        if self.symbols.len() <= idx {
            self.symbols.resize(idx + 1, None);
        }
        if let Some(existing) = &self.symbols[idx] {
            return Err(FstError::Symbols(format!(
                "id {id} bound to both {existing:?} and {symbol:?}"
            )));
        }
        self.symbols[idx] = Some(symbol.to_string());
        self.ids.insert(symbol.to_string(), id);
        Ok(())
    }

    pub fn id(&self, symbol: &str) -> Option<Label> {
        self.ids.get(symbol).copied()
    }

    pub fn symbol(&self, id: Label) -> Option<&str> {
        self.symbols.get(id as usize).and_then(|s| s.as_deref())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `(id, symbol)` pairs in id order.
    pub fn iter(&self) -> impl Iterator<Item = (Label, &str)> {
        self.symbols
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.as_deref().map(|s| (i as Label, s)))
    }

    /// Parses `symbol<TAB>id` lines (any whitespace accepted).
    pub fn read_text(text: &str) -> Result<Self> {
        let mut table = SymbolTable::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(sym), Some(id), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(FstError::Parse {
                    line: lineno + 1,
                    msg: format!("expected `symbol id`, got {line:?}"),
                });
            };
            let id: Label = id.parse().map_err(|_| FstError::Parse {
                line: lineno + 1,
                msg: format!("bad symbol id {id:?}"),
            })?;
            table.insert_with_id(sym, id)?;
        }
        Ok(table)
    }

    pub fn write_text(&self) -> String {
        let mut out = String::new();
        for (id, sym) in self.iter() {
            out.push_str(sym);
            out.push('\t');
            out.push_str(&id.to_string());
            out.push('\n');
        }
        out
    }
}

/// An immutable weighted transducer.
///
/// Arcs leaving each state are sorted by `(ilabel, olabel, nextstate)`, the
/// input-epsilon subgraph is acyclic, and every arc target is a valid state.
/// `eps_order` ranks states topologically with respect to input-epsilon arcs.
#[derive(Clone, Debug)]
pub struct Wfst {
    states: Vec<Vec<Arc>>,
    finals: Vec<Option<DualCost>>,
    start: Option<StateId>,
    eps_rank: Vec<u32>,
    isymbols: Option<Shared<SymbolTable>>,
    osymbols: Option<Shared<SymbolTable>>,
}

impl Wfst {
    pub fn empty() -> Self {
        Wfst {
            states: Vec::new(),
            finals: Vec::new(),
            start: None,
            eps_rank: Vec::new(),
            isymbols: None,
            osymbols: None,
        }
    }

    pub fn start(&self) -> Option<StateId> {
        self.start
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn num_arcs(&self) -> usize {
        self.states.iter().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.start.is_none()
    }

    pub fn arcs(&self, s: StateId) -> &[Arc] {
        &self.states[s]
    }

    pub fn final_weight(&self, s: StateId) -> Option<DualCost> {
        self.finals[s]
    }

    pub fn is_final(&self, s: StateId) -> bool {
        self.finals[s].is_some()
    }

    /// Position of `s` in a topological order of the input-epsilon subgraph.
    pub fn eps_rank(&self, s: StateId) -> u32 {
        self.eps_rank[s]
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> {
        0..self.states.len()
    }

    pub fn isymbols(&self) -> Option<&SymbolTable> {
        self.isymbols.as_deref()
    }

    pub fn osymbols(&self) -> Option<&SymbolTable> {
        self.osymbols.as_deref()
    }

    pub fn with_symbols(
        mut self,
        isymbols: Option<SymbolTable>,
        osymbols: Option<SymbolTable>,
    ) -> Self {
        self.isymbols = isymbols.map(Shared::new);
        self.osymbols = osymbols.map(Shared::new);
        self
    }

    pub fn max_ilabel(&self) -> Label {
        self.states
            .iter()
            .flatten()
            .map(|a| a.ilabel)
            .max()
            .unwrap_or(0)
    }

    /// Distinct non-epsilon output labels.
    pub fn output_labels(&self) -> Vec<Label> {
        let mut labels: Vec<Label> = self
            .states
            .iter()
            .flatten()
            .map(|a| a.olabel)
            .filter(|&l| l != EPSILON)
            .collect();
        labels.sort_unstable();
        labels.dedup();
        labels
    }

    /// A mutable copy of this machine.
    pub fn to_builder(&self) -> WfstBuilder {
        WfstBuilder {
            states: self.states.clone(),
            finals: self.finals.clone(),
            start: self.start,
        }
    }
}

/// Mutable construction side of [`Wfst`].
#[derive(Clone, Debug, Default)]
pub struct WfstBuilder {
    states: Vec<Vec<Arc>>,
    finals: Vec<Option<DualCost>>,
    start: Option<StateId>,
}

impl WfstBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_state(&mut self) -> StateId {
        self.states.push(Vec::new());
        self.finals.push(None);
        self.states.len() - 1
    }

    /// Grows the state set so that `s` is valid.
    pub fn ensure_state(&mut self, s: StateId) {
        while self.states.len() <= s {
            self.add_state();
        }
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn set_start(&mut self, s: StateId) {
        self.start = Some(s);
    }

    pub fn set_final(&mut self, s: StateId, weight: DualCost) {
        self.finals[s] = Some(weight);
    }

    pub fn add_arc(&mut self, s: StateId, arc: Arc) {
        self.states[s].push(arc);
    }

    /// Validates and freezes the machine.
    pub fn build(self) -> Result<Wfst> {
        let WfstBuilder {
            mut states,
            finals,
            start,
        } = self;
        let n = states.len();
        if let Some(s) = start {
            if s >= n {
                return Err(FstError::DanglingState(s));
            }
        } else if n > 0 {
            return Err(FstError::NoStart);
        }
        for arcs in states.iter_mut() {
            if let Some(bad) = arcs.iter().find(|a| a.nextstate >= n) {
                return Err(FstError::DanglingState(bad.nextstate));
            }
            arcs.sort_by(|a, b| {
                (a.ilabel, a.olabel, a.nextstate)
                    .cmp(&(b.ilabel, b.olabel, b.nextstate))
                    .then_with(|| a.weight.cmp_cost(&b.weight))
            });
        }
        let eps_rank = epsilon_topological_rank(&states)?;
        Ok(Wfst {
            states,
            finals,
            start,
            eps_rank,
            isymbols: None,
            osymbols: None,
        })
    }
}

/// Kahn's algorithm over input-epsilon arcs; fails on a cycle.
fn epsilon_topological_rank(states: &[Vec<Arc>]) -> Result<Vec<u32>> {
    let n = states.len();
    let mut indegree = vec![0usize; n];
    for arcs in states {
        for a in arcs.iter().filter(|a| a.ilabel == EPSILON) {
            indegree[a.nextstate] += 1;
        }
    }
    let mut stack: Vec<StateId> = (0..n).rev().filter(|&s| indegree[s] == 0).collect();
    let mut rank = vec![u32::MAX; n];
    let mut next = 0u32;
    while let Some(s) = stack.pop() {
        rank[s] = next;
        next += 1;
        for a in states[s].iter().filter(|a| a.ilabel == EPSILON).rev() {
            indegree[a.nextstate] -= 1;
            if indegree[a.nextstate] == 0 {
                stack.push(a.nextstate);
            }
        }
    }
    if let Some(s) = rank.iter().position(|&r| r == u32::MAX) {
        return Err(FstError::EpsilonCycle(s));
    }
    Ok(rank)
}

/// States from which some final state is reachable.
pub fn coaccessible(fst: &Wfst) -> Vec<bool> {
    let n = fst.num_states();
    let mut reverse: Vec<Vec<StateId>> = vec![Vec::new(); n];
    for s in fst.states() {
        for a in fst.arcs(s) {
            reverse[a.nextstate].push(s);
        }
    }
    let mut coaccess = vec![false; n];
    let mut stack: Vec<StateId> = fst.states().filter(|&s| fst.is_final(s)).collect();
    for &s in &stack {
        coaccess[s] = true;
    }
    while let Some(s) = stack.pop() {
        for &p in &reverse[s] {
            if !coaccess[p] {
                coaccess[p] = true;
                stack.push(p);
            }
        }
    }
    coaccess
}

/// Removes states that are not both accessible and co-accessible.
pub fn connect(fst: &Wfst) -> Wfst {
    let Some(start) = fst.start() else {
        return Wfst::empty();
    };
    let n = fst.num_states();
    let mut access = vec![false; n];
    let mut stack = vec![start];
    access[start] = true;
    while let Some(s) = stack.pop() {
        for a in fst.arcs(s) {
            if !access[a.nextstate] {
                access[a.nextstate] = true;
                stack.push(a.nextstate);
            }
        }
    }
    let coaccess = coaccessible(fst);
    if !(access[start] && coaccess[start]) {
        return Wfst::empty();
    }
    let mut map = vec![usize::MAX; n];
    let mut b = WfstBuilder::new();
    for s in fst.states() {
        if access[s] && coaccess[s] {
            map[s] = b.add_state();
        }
    }
    for s in fst.states().filter(|&s| map[s] != usize::MAX) {
        for a in fst.arcs(s) {
            if map[a.nextstate] != usize::MAX {
                b.add_arc(
                    map[s],
                    Arc::new(a.ilabel, a.olabel, a.weight, map[a.nextstate]),
                );
            }
        }
        if let Some(w) = fst.final_weight(s) {
            b.set_final(map[s], w);
        }
    }
    b.set_start(map[start]);
    let out = b.build().expect("sub-machine of a valid machine is valid");
    Wfst {
        isymbols: fst.isymbols.clone(),
        osymbols: fst.osymbols.clone(),
        ..out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arcs_are_sorted_by_ilabel() {
        let mut b = WfstBuilder::new();
        let s0 = b.add_state();
        let s1 = b.add_state();
        b.set_start(s0);
        b.add_arc(s0, Arc::new(3, 3, DualCost::one(), s1));
        b.add_arc(s0, Arc::new(1, 1, DualCost::one(), s1));
        b.add_arc(s0, Arc::new(0, 2, DualCost::one(), s1));
        let f = b.build().unwrap();
        let labels: Vec<_> = f.arcs(s0).iter().map(|a| a.ilabel).collect();
        assert_eq!(labels, vec![0, 1, 3]);
    }

    #[test]
    fn epsilon_cycle_rejected() {
        let mut b = WfstBuilder::new();
        let s0 = b.add_state();
        let s1 = b.add_state();
        b.set_start(s0);
        b.add_arc(s0, Arc::new(0, 1, DualCost::one(), s1));
        b.add_arc(s1, Arc::new(0, 0, DualCost::one(), s0));
        assert!(matches!(b.build(), Err(FstError::EpsilonCycle(_))));
    }

    #[test]
    fn emitting_self_loop_allowed_and_eps_rank_topological() {
        let mut b = WfstBuilder::new();
        for _ in 0..3 {
            b.add_state();
        }
        b.set_start(0);
        b.add_arc(0, Arc::new(1, 0, DualCost::one(), 0));
        b.add_arc(2, Arc::new(0, 0, DualCost::one(), 1));
        b.add_arc(0, Arc::new(0, 0, DualCost::one(), 2));
        let f = b.build().unwrap();
        assert!(f.eps_rank(0) < f.eps_rank(2));
        assert!(f.eps_rank(2) < f.eps_rank(1));
    }

    #[test]
    fn connect_drops_dead_states() {
        let mut b = WfstBuilder::new();
        for _ in 0..4 {
            b.add_state();
        }
        b.set_start(0);
        b.add_arc(0, Arc::new(1, 1, DualCost::one(), 1));
        b.add_arc(0, Arc::new(2, 2, DualCost::one(), 2));
        b.set_final(1, DualCost::one());
        b.add_arc(3, Arc::new(1, 1, DualCost::one(), 1));
        let f = connect(&b.build().unwrap());
        assert_eq!(f.num_states(), 2);
        assert_eq!(f.num_arcs(), 1);
    }

    #[test]
    fn symbol_table_round_trip() {
        let t = SymbolTable::read_text("<eps>\t0\nhello\t1\nworld\t5\n").unwrap();
        assert_eq!(t.id("world"), Some(5));
        assert_eq!(t.symbol(1), Some("hello"));
        assert_eq!(SymbolTable::read_text(&t.write_text()).unwrap(), t);
        assert!(SymbolTable::read_text("a 1\nb 1\n").is_err());
    }
}
