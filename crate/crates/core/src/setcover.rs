//! Minimum set cover over a finite universe.
//!
//! The exact solver reduces the instance (forced sets, dominated sets and
//! points, duplicate points), splits it into independent components and runs
//! a depth-first branch and bound on each, seeded with the greedy cover.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use crate::bitset::BitSet;
use crate::error::{EntropyError, Result};

/// Default branch-and-bound node budget.
pub const DEFAULT_NODE_BUDGET: u64 = 10_000_000;

/// Sets over `0..universe`, each stored as sorted distinct indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SetCoverInstance {
    universe: usize,
    sets: Vec<Vec<u32>>,
}

impl SetCoverInstance {
    pub fn new(universe: usize, sets: Vec<Vec<u32>>) -> Result<Self> {
        let mut sets = sets;
        for s in &mut sets {
            s.sort_unstable();
            s.dedup();
            if let Some(&bad) = s.last().filter(|&&p| p as usize >= universe) {
                return Err(EntropyError::domain(format!(
                    "set member {bad} outside universe of size {universe}"
                )));
            }
        }
        Ok(Self { universe, sets })
    }

    pub fn from_bitsets(sets: &[BitSet]) -> Result<Self> {
        let universe = sets.first().map_or(0, BitSet::len);
        Self::new(
            universe,
            sets.iter()
                .map(|b| b.iter().map(|i| i as u32).collect())
                .collect(),
        )
    }

    pub fn universe(&self) -> usize {
        self.universe
    }

    pub fn sets(&self) -> &[Vec<u32>] {
        &self.sets
    }

    /// First universe point contained in no set, if any.
    pub fn uncovered_point(&self) -> Option<usize> {
        let mut seen = vec![false; self.universe];
        for s in &self.sets {
            for &p in s {
                seen[p as usize] = true;
            }
        }
        seen.iter().position(|&b| !b)
    }

    fn check_coverage(&self) -> Result<()> {
        match self.uncovered_point() {
            Some(point) => Err(EntropyError::CoverageViolation { point }),
            None => Ok(()),
        }
    }
}

/// Outcome of [`solve`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoverSolution {
    /// Size of the best cover found.
    pub size: usize,
    /// Certified lower bound; equals `size` when `exact`.
    pub lower_bound: usize,
    pub exact: bool,
    /// Indices of the chosen sets, ascending.
    pub chosen: Vec<usize>,
    pub greedy_size: usize,
    pub nodes: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SolverConfig {
    pub node_budget: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            node_budget: DEFAULT_NODE_BUDGET,
        }
    }
}

/// Anything the greedy rule can run on.
pub trait SetFamily {
    fn universe(&self) -> usize;
    fn family_len(&self) -> usize;
    fn gain(&self, set: usize, uncovered: &BitSet) -> usize;
    fn cover(&self, set: usize, uncovered: &mut BitSet);
}

impl SetFamily for SetCoverInstance {
    fn universe(&self) -> usize {
        self.universe
    }

    fn family_len(&self) -> usize {
        self.sets.len()
    }

    fn gain(&self, set: usize, uncovered: &BitSet) -> usize {
        self.sets[set]
            .iter()
            .filter(|&&p| uncovered.contains(p as usize))
            .count()
    }

    fn cover(&self, set: usize, uncovered: &mut BitSet) {
        for &p in &self.sets[set] {
            uncovered.remove(p as usize);
        }
    }
}

impl SetFamily for [BitSet] {
    fn universe(&self) -> usize {
        self.first().map_or(0, BitSet::len)
    }

    fn family_len(&self) -> usize {
        self.len()
    }

    fn gain(&self, set: usize, uncovered: &BitSet) -> usize {
        self[set].intersection_count(uncovered)
    }

    fn cover(&self, set: usize, uncovered: &mut BitSet) {
        uncovered.difference_with(&self[set]);
    }
}

/// Greedy cover: repeatedly take the set covering the most uncovered points,
/// lowest index on ties. Returns the chosen indices in pick order, or the
/// first point no set covers.
pub fn greedy_cover<F: SetFamily + ?Sized>(family: &F) -> Result<Vec<usize>> {
    let mut uncovered = BitSet::full(family.universe());
    let mut heap: BinaryHeap<(usize, Reverse<usize>)> = (0..family.family_len())
        .map(|i| (family.gain(i, &uncovered), Reverse(i)))
        .filter(|&(g, _)| g > 0)
        .collect();
    let mut picks = Vec::new();
    let mut remaining = uncovered.count();
    // Gains only shrink, so a popped entry whose refreshed gain is unchanged
    // beats every stale entry below it.
    while remaining > 0 {
        let Some((g, Reverse(i))) = heap.pop() else {
            return Err(EntropyError::CoverageViolation {
                point: uncovered.first().unwrap(),
            });
        };
        let fresh = family.gain(i, &uncovered);
        if fresh == g {
            family.cover(i, &mut uncovered);
            remaining -= g;
            picks.push(i);
        } else if fresh > 0 {
            heap.push((fresh, Reverse(i)));
        }
    }
    Ok(picks)
}

/// Exact minimum cover within the node budget.
pub fn solve(inst: &SetCoverInstance, cfg: SolverConfig) -> Result<CoverSolution> {
    inst.check_coverage()?;
    let greedy = greedy_cover(inst)?;
    if inst.universe == 0 {
        return Ok(CoverSolution {
            size: 0,
            lower_bound: 0,
            exact: true,
            chosen: vec![],
            greedy_size: 0,
            nodes: 0,
        });
    }
    let kernel = Kernel::reduce(inst);
    let mut chosen = kernel.forced.clone();
    let mut lower = kernel.forced.len();
    let mut exact = true;
    let mut nodes = 0u64;
    for comp in kernel.components() {
        let budget = cfg.node_budget.saturating_sub(nodes);
        let out = comp.branch_and_bound(budget);
        nodes += out.nodes;
        exact &= out.exact;
        lower += out.lower_bound;
        chosen.extend(out.best.iter().map(|&local| comp.set_ids[local]));
    }
    chosen.sort_unstable();
    let size = chosen.len();
    if !exact {
        let ln_factor = 1.0 + (inst.universe as f64).ln();
        lower = lower.max((greedy.len() as f64 / ln_factor).ceil() as usize);
    }
    // The greedy cover may beat an interrupted search.
    let (size, chosen) = if greedy.len() < size {
        let mut g = greedy.clone();
        g.sort_unstable();
        (g.len(), g)
    } else {
        (size, chosen)
    };
    Ok(CoverSolution {
        size,
        lower_bound: if exact { size } else { lower.min(size) },
        exact,
        chosen,
        greedy_size: greedy.len(),
        nodes,
    })
}

/// Reduced instance: forced picks plus the residual sets over the points
/// still needing a decision.
struct Kernel {
    forced: Vec<usize>,
    /// Residual sets (original index, residual points).
    sets: Vec<(usize, Vec<u32>)>,
}

impl Kernel {
    fn reduce(inst: &SetCoverInstance) -> Self {
        let mut forced = Vec::new();
        let mut sets: Vec<(usize, Vec<u32>)> = inst
            .sets
            .iter()
            .enumerate()
            .filter(|(_, s)| !s.is_empty())
            .map(|(i, s)| (i, s.clone()))
            .collect();
        loop {
            let before: usize = sets.iter().map(|(_, s)| s.len()).sum::<usize>() + sets.len();
            // Points → containing sets (positions in `sets`).
            let mut incidence: HashMap<u32, Vec<u32>> = HashMap::new();
            for (k, (_, s)) in sets.iter().enumerate() {
                for &p in s {
                    incidence.entry(p).or_default().push(k as u32);
                }
            }
            if incidence.is_empty() {
                break;
            }
            // Forced sets.
            let mut force: Vec<u32> = incidence
                .values()
                .filter(|v| v.len() == 1)
                .map(|v| v[0])
                .collect();
            force.sort_unstable();
            force.dedup();
            if !force.is_empty() {
                let mut covered = std::collections::HashSet::new();
                for &k in &force {
                    forced.push(sets[k as usize].0);
                    covered.extend(sets[k as usize].1.iter().copied());
                }
                sets = sets
                    .into_iter()
                    .enumerate()
                    .filter(|(k, _)| force.binary_search(&(*k as u32)).is_err())
                    .map(|(_, (id, s))| {
                        (
                            id,
                            s.into_iter()
                                .filter(|p| !covered.contains(p))
                                .collect::<Vec<_>>(),
                        )
                    })
                    .filter(|(_, s)| !s.is_empty())
                    .collect();
                continue;
            }
            // Dominated points: if sets(p) ⊆ sets(q), covering p covers q.
            let mut pts: Vec<(u32, Vec<u32>)> = incidence.into_iter().collect();
            pts.sort_unstable_by(|a, b| a.1.len().cmp(&b.1.len()).then(a.0.cmp(&b.0)));
            let mut drop_point = std::collections::HashSet::new();
            let mut by_set: HashMap<u32, Vec<usize>> = HashMap::new();
            for (i, (_, ks)) in pts.iter().enumerate() {
                for &k in ks {
                    by_set.entry(k).or_default().push(i);
                }
            }
            for (i, (p, ks)) in pts.iter().enumerate() {
                if drop_point.contains(p) {
                    continue;
                }
                let pivot = ks.iter().min_by_key(|k| by_set[k].len()).unwrap();
                for &j in &by_set[pivot] {
                    let (q, qs) = &pts[j];
                    if j != i && !drop_point.contains(q) && is_sorted_subset(ks, qs) {
                        drop_point.insert(*q);
                    }
                }
            }
            if !drop_point.is_empty() {
                for (_, s) in &mut sets {
                    s.retain(|p| !drop_point.contains(p));
                }
            }
            // Dominated sets: A ⊆ B drops A (identical sets keep the lower index).
            let mut point_sets: HashMap<u32, Vec<usize>> = HashMap::new();
            for (k, (_, s)) in sets.iter().enumerate() {
                for &p in s {
                    point_sets.entry(p).or_default().push(k);
                }
            }
            let mut dead = vec![false; sets.len()];
            for a in 0..sets.len() {
                let sa = &sets[a].1;
                if sa.is_empty() {
                    dead[a] = true;
                    continue;
                }
                let pivot = sa.iter().min_by_key(|p| point_sets[p].len()).unwrap();
                for &b in &point_sets[pivot] {
                    if b == a || dead[b] {
                        continue;
                    }
                    let sb = &sets[b].1;
                    if is_sorted_subset(sa, sb) && (sa.len() < sb.len() || b < a) {
                        dead[a] = true;
                        break;
                    }
                }
            }
            sets = sets
                .into_iter()
                .zip(dead)
                .filter(|(_, d)| !d)
                .map(|(s, _)| s)
                .collect();
            let after: usize = sets.iter().map(|(_, s)| s.len()).sum::<usize>() + sets.len();
            if after == before {
                break;
            }
        }
        Kernel { forced, sets }
    }

    /// Splits the residual sets into connected components (sets sharing a point).
    fn components(&self) -> Vec<Component> {
        let n = self.sets.len();
        let mut parent: Vec<usize> = (0..n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        let mut owner: HashMap<u32, usize> = HashMap::new();
        for (k, (_, s)) in self.sets.iter().enumerate() {
            for &p in s {
                if let Some(&o) = owner.get(&p) {
                    let (ra, rb) = (find(&mut parent, o), find(&mut parent, k));
                    if ra != rb {
                        parent[ra.max(rb)] = ra.min(rb);
                    }
                } else {
                    owner.insert(p, k);
                }
            }
        }
        let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
        for k in 0..n {
            let r = find(&mut parent, k);
            groups.entry(r).or_default().push(k);
        }
        groups
            .into_values()
            .map(|ks| {
                let mut points: Vec<u32> = ks
                    .iter()
                    .flat_map(|&k| self.sets[k].1.iter().copied())
                    .collect();
                points.sort_unstable();
                points.dedup();
                let sets = ks
                    .iter()
                    .map(|&k| {
                        BitSet::from_indices(
                            points.len(),
                            self.sets[k]
                                .1
                                .iter()
                                .map(|p| points.binary_search(p).unwrap()),
                        )
                    })
                    .collect();
                Component {
                    set_ids: ks.iter().map(|&k| self.sets[k].0).collect(),
                    sets,
                }
            })
            .collect()
    }
}

fn is_sorted_subset(a: &[u32], b: &[u32]) -> bool {
    if a.len() > b.len() {
        return false;
    }
    let mut j = 0;
    for &x in a {
        while j < b.len() && b[j] < x {
            j += 1;
        }
        if j == b.len() || b[j] != x {
            return false;
        }
        j += 1;
    }
    true
}

struct Component {
    set_ids: Vec<usize>,
    sets: Vec<BitSet>,
}

struct SearchOutcome {
    best: Vec<usize>,
    lower_bound: usize,
    exact: bool,
    nodes: u64,
}

struct Search<'a> {
    sets: &'a [BitSet],
    /// For each point, the sets containing it.
    containing: Vec<Vec<usize>>,
    best: Vec<usize>,
    nodes: u64,
    budget: u64,
    aborted: bool,
}

impl Component {
    fn branch_and_bound(&self, budget: u64) -> SearchOutcome {
        let universe = self.sets[0].len();
        let incumbent = greedy_cover(self.sets.as_slice()).expect("components are covered");
        let mut containing = vec![Vec::new(); universe];
        for (k, s) in self.sets.iter().enumerate() {
            for p in s.iter() {
                containing[p].push(k);
            }
        }
        let mut search = Search {
            sets: &self.sets,
            containing,
            best: incumbent,
            nodes: 0,
            budget,
            aborted: false,
        };
        let all = BitSet::full(universe);
        let root_bound = search.lower_bound(&all);
        let mut path = Vec::new();
        if root_bound < search.best.len() {
            search.descend(&all, &mut path);
        }
        let exact = !search.aborted;
        SearchOutcome {
            lower_bound: if exact { search.best.len() } else { root_bound },
            best: search.best,
            exact,
            nodes: search.nodes,
        }
    }
}

impl Search<'_> {
    /// max(ceil(|uncovered| / largest residual set), disjoint-point packing).
    fn lower_bound(&self, uncovered: &BitSet) -> usize {
        let remaining = uncovered.count();
        if remaining == 0 {
            return 0;
        }
        let widest = self
            .sets
            .iter()
            .map(|s| s.intersection_count(uncovered))
            .max()
            .unwrap_or(1)
            .max(1);
        let counting = remaining.div_ceil(widest);
        let mut blocked = vec![false; self.sets.len()];
        let mut order: Vec<usize> = uncovered.iter().collect();
        order.sort_by_key(|&p| self.containing[p].len());
        let mut packing = 0;
        for p in order {
            if self.containing[p].iter().all(|&k| !blocked[k]) {
                packing += 1;
                for &k in &self.containing[p] {
                    blocked[k] = true;
                }
            }
        }
        counting.max(packing)
    }

    fn descend(&mut self, uncovered: &BitSet, path: &mut Vec<usize>) {
        if self.aborted {
            return;
        }
        self.nodes += 1;
        if self.nodes > self.budget {
            self.aborted = true;
            return;
        }
        if uncovered.is_empty() {
            if path.len() < self.best.len() {
                self.best = path.clone();
            }
            return;
        }
        if path.len() + self.lower_bound(uncovered) >= self.best.len() {
            return;
        }
        let pivot = uncovered
            .iter()
            .min_by_key(|&p| self.containing[p].len())
            .unwrap();
        let mut options: Vec<(usize, usize)> = self.containing[pivot]
            .iter()
            .map(|&k| (self.sets[k].intersection_count(uncovered), k))
            .collect();
        options.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
        for (_, k) in options {
            let mut next = uncovered.clone();
            next.difference_with(&self.sets[k]);
            path.push(k);
            self.descend(&next, path);
            path.pop();
            if self.aborted {
                return;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Exhaustive optimum over all subsets; the oracle for small instances.
    fn brute_force(inst: &SetCoverInstance) -> usize {
        let m = inst.sets().len();
        let masks: Vec<u64> = inst
            .sets()
            .iter()
            .map(|s| s.iter().fold(0u64, |a, &p| a | 1 << p))
            .collect();
        let full = if inst.universe() == 64 {
            !0
        } else {
            (1u64 << inst.universe()) - 1
        };
        (0u32..1 << m)
            .filter(|sub| {
                (0..m)
                    .filter(|k| sub >> k & 1 == 1)
                    .fold(0, |a, k| a | masks[k])
                    == full
            })
            .map(|sub| sub.count_ones() as usize)
            .min()
            .unwrap()
    }

    #[test]
    fn partition_needs_every_part() {
        let inst =
            SetCoverInstance::new(6, vec![vec![0, 1], vec![2], vec![3, 4, 5], vec![]]).unwrap();
        let sol = solve(&inst, SolverConfig::default()).unwrap();
        assert_eq!((sol.size, sol.exact), (3, true));
        assert_eq!(sol.chosen, vec![0, 1, 2]);
    }

    #[test]
    fn uncovered_point_is_reported() {
        let inst = SetCoverInstance::new(4, vec![vec![0, 1], vec![3]]).unwrap();
        assert_eq!(
            solve(&inst, SolverConfig::default()),
            Err(EntropyError::CoverageViolation { point: 2 })
        );
        assert!(SetCoverInstance::new(2, vec![vec![5]]).is_err());
    }

    #[test]
    fn greedy_is_suboptimal_on_classic_trap_but_solver_is_not() {
        // Rows 0..6 split in two halves; greedy grabs the large middle sets first.
        let inst = SetCoverInstance::new(
            12,
            vec![
                (0..6).collect(),
                (6..12).collect(),
                vec![0, 1, 6, 7],
                vec![2, 3, 4, 5, 8, 9, 10, 11],
            ],
        )
        .unwrap();
        let greedy = greedy_cover(&inst).unwrap();
        let sol = solve(&inst, SolverConfig::default()).unwrap();
        assert_eq!(sol.size, 2);
        assert!(greedy.len() >= sol.size);
        assert_eq!(sol.greedy_size, greedy.len());
    }

    #[test]
    fn greedy_breaks_ties_by_lowest_index() {
        let inst =
            SetCoverInstance::new(4, vec![vec![0, 1], vec![2, 3], vec![1, 2], vec![0, 3]]).unwrap();
        assert_eq!(greedy_cover(&inst).unwrap(), vec![0, 1]);
    }

    #[test]
    fn budget_exhaustion_gives_certified_interval() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let n = 40;
        let mut sets: Vec<Vec<u32>> = (0..60)
            .map(|_| (0..5).map(|_| rng.random_range(0..n as u32)).collect())
            .collect();
        sets.extend((0..n as u32).map(|p| vec![p]));
        let inst = SetCoverInstance::new(n, sets).unwrap();
        let sol = solve(&inst, SolverConfig { node_budget: 3 }).unwrap();
        assert!(!sol.exact);
        assert!(sol.lower_bound <= sol.size);
        let full = solve(&inst, SolverConfig::default()).unwrap();
        assert!(full.exact);
        assert!(sol.lower_bound <= full.size && full.size <= sol.size);
        assert!(sol.lower_bound as f64 >= sol.greedy_size as f64 / (1.0 + (n as f64).ln()));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]
        #[test]
        fn matches_exhaustive_enumeration(
            universe in 1usize..14,
            raw in prop::collection::vec(prop::collection::vec(0u32..14, 0..6), 1..16),
        ) {
            let mut sets: Vec<Vec<u32>> = raw.into_iter().map(|s| s.into_iter().filter(|&p| (p as usize) < universe).collect()).collect();
            // Guarantee coverage with singletons on the tail.
            let inst0 = SetCoverInstance::new(universe, sets.clone()).unwrap();
            let mut seen = vec![false; universe];
            for s in inst0.sets() { for &p in s { seen[p as usize] = true; } }
            for (p, s) in seen.iter().enumerate() {
                if !s && sets.len() < 20 { sets.push(vec![p as u32]); }
            }
            let inst = SetCoverInstance::new(universe, sets).unwrap();
            prop_assume!(inst.uncovered_point().is_none() && inst.sets().len() <= 20);
            let sol = solve(&inst, SolverConfig::default()).unwrap();
            prop_assert!(sol.exact);
            prop_assert_eq!(sol.size, brute_force(&inst));
            let mut covered = BitSet::new(universe);
            for &k in &sol.chosen {
                for &p in &inst.sets()[k] { covered.insert(p as usize); }
            }
            prop_assert_eq!(covered.count(), universe);
            prop_assert!(greedy_cover(&inst).unwrap().len() >= sol.size);
        }
    }
}
