//! Minimum-regrasp grasp selection and allocation to robots.
//!
//! Each robot needs its own sequence of grasp segments covering `[0, 1]`.
//! A sequence of `k` segments costs `k - 1` regrasps. Robots may never hold
//! the same grasp at the same parameter.

use std::cmp::Ordering;
use std::collections::BTreeSet;

use crate::coverage::{grid_index, grid_t, ParamIntervalSet, MERGE_EPS};
use crate::error::{Error, Result};

/// Grasp sets above this size are covered greedily.
pub const EXACT_LIMIT: usize = 20;

/// Per-robot chains kept for the combination search.
const MAX_CHAINS: usize = 64;

/// Minimal covers of `[0, 1]` by grasp index sets, smallest first.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverSearch {
    /// Each cover lists grasp indices in ascending order.
    pub covers: Vec<Vec<usize>>,
    /// False when the greedy fallback produced the covers.
    pub optimal: bool,
}

impl CoverSearch {
    /// Size of the smallest cover.
    pub fn min_size(&self) -> usize {
        self.covers.first().map_or(0, Vec::len)
    }
}

/// Points and open gaps between consecutive interval endpoints. A union of
/// closed intervals is constant on each gap, so membership of one point per
/// element decides coverage exactly.
struct Elements {
    probes: Vec<f64>,
}

impl Elements {
    fn new(sets: &[&ParamIntervalSet]) -> Self {
        let mut pts: Vec<f64> = vec![0.0, 1.0];
        for s in sets {
            for &(a, b) in s.intervals() {
                pts.push(a);
                pts.push(b);
            }
        }
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        pts.dedup();
        let mut probes = Vec::with_capacity(2 * pts.len());
        for w in pts.windows(2) {
            probes.push(w[0]);
            probes.push(0.5 * (w[0] + w[1]));
        }
        probes.push(*pts.last().unwrap());
        Self { probes }
    }

    fn mask(&self, set: &ParamIntervalSet) -> Vec<u64> {
        let mut m = vec![0u64; self.probes.len().div_ceil(64)];
        for (i, t) in self.probes.iter().enumerate() {
            if set.contains(*t) {
                m[i / 64] |= 1 << (i % 64);
            }
        }
        m
    }

    fn full(&self) -> Vec<u64> {
        let n = self.probes.len();
        let mut m = vec![u64::MAX; n.div_ceil(64)];
        if !n.is_multiple_of(64) {
            *m.last_mut().unwrap() = (1u64 << (n % 64)) - 1;
        }
        m
    }
}

fn or_into(acc: &mut [u64], m: &[u64]) {
    for (a, b) in acc.iter_mut().zip(m) {
        *a |= b;
    }
}

/// Every subset (as a bit mask over grasp indices) whose union covers
/// `[0, 1]`. Only for `sets.len() <= EXACT_LIMIT`.
fn covering_subsets(sets: &[&ParamIntervalSet]) -> Vec<u32> {
    let m = sets.len();
    let el = Elements::new(sets);
    let masks: Vec<Vec<u64>> = sets.iter().map(|s| el.mask(s)).collect();
    let full = el.full();
    let mut out = Vec::new();
    let mut acc = vec![0u64; full.len()];
    for subset in 1u32..(1u32 << m) {
        acc.iter_mut().for_each(|a| *a = 0);
        for (j, mk) in masks.iter().enumerate() {
            if subset & (1 << j) != 0 {
                or_into(&mut acc, mk);
            }
        }
        if acc == full {
            out.push(subset);
        }
    }
    out
}

fn bits(subset: u32) -> Vec<usize> {
    (0..32).filter(|j| subset & (1 << j) != 0).collect()
}

fn uncovered(sets: &[&ParamIntervalSet]) -> Vec<(f64, f64)> {
    sets.iter()
        .fold(ParamIntervalSet::empty(), |acc, s| acc.union(s))
        .gaps()
}

/// Smallest grasp subsets whose coverable sets jointly cover `[0, 1]`.
///
/// All inclusion-minimal covers are returned, ordered by size and then by
/// grasp indices. Above [`EXACT_LIMIT`] grasps a single greedy cover is
/// returned with `optimal = false`.
pub fn min_cover(sets: &[&ParamIntervalSet]) -> Result<CoverSearch> {
    if sets.is_empty() {
        return Err(Error::Precondition("grasp set is empty".into()));
    }
    let gaps = uncovered(sets);
    if !gaps.is_empty() {
        return Err(Error::NoCover { gaps });
    }
    if sets.len() > EXACT_LIMIT {
        return Ok(CoverSearch {
            covers: vec![greedy_cover(sets)],
            optimal: false,
        });
    }
    let all = covering_subsets(sets);
    let lookup: BTreeSet<u32> = all.iter().copied().collect();
    let mut minimal: Vec<Vec<usize>> = all
        .iter()
        .filter(|&&s| bits(s).iter().all(|j| !lookup.contains(&(s & !(1 << j)))))
        .map(|&s| bits(s))
        .collect();
    minimal.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    Ok(CoverSearch {
        covers: minimal,
        optimal: true,
    })
}

/// Classic greedy set cover over the elementary pieces of `[0, 1]`.
fn greedy_cover(sets: &[&ParamIntervalSet]) -> Vec<usize> {
    let el = Elements::new(sets);
    let masks: Vec<Vec<u64>> = sets.iter().map(|s| el.mask(s)).collect();
    let full = el.full();
    let mut acc = vec![0u64; full.len()];
    let mut chosen = Vec::new();
    while acc != full {
        let gain = |m: &Vec<u64>| -> u32 {
            m.iter().zip(&acc).map(|(x, a)| (x & !a).count_ones()).sum()
        };
        let (best, _) = masks
            .iter()
            .enumerate()
            .filter(|(j, _)| !chosen.contains(j))
            .max_by(|(ja, a), (jb, b)| gain(a).cmp(&gain(b)).then(jb.cmp(ja)))
            .expect("union covers");
        or_into(&mut acc, &masks[best]);
        chosen.push(best);
    }
    chosen.sort_unstable();
    chosen
}

/// One grasp held over a piece of its coverable set.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub grasp: String,
    /// The coverable interval of `grasp` this segment draws from.
    pub interval: (f64, f64),
    /// Parameters over which the grasp is actually held.
    pub active: (f64, f64),
}

/// Ordered grasp segments for one robot.
#[derive(Debug, Clone, PartialEq)]
pub struct CoverScheme {
    pub owner: usize,
    pub segments: Vec<Segment>,
}

impl CoverScheme {
    pub fn regrasps(&self) -> usize {
        self.segments.len().saturating_sub(1)
    }

    pub fn grasp_ids(&self) -> Vec<&str> {
        self.segments.iter().map(|s| s.grasp.as_str()).collect()
    }

    /// Grasp held at `t`. At a handover the incoming grasp is reported.
    pub fn active_at(&self, t: f64) -> &str {
        let mut cur = &self.segments[0].grasp;
        for s in &self.segments {
            if t >= s.active.0 {
                cur = &s.grasp;
            }
        }
        cur
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegraspEvent {
    pub robot: usize,
    pub t: f64,
    pub from: String,
    pub to: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Assignment {
    pub schemes: Vec<CoverScheme>,
    pub regrasps: Vec<RegraspEvent>,
    /// False when some robot's covers came from the greedy fallback.
    pub optimal: bool,
    /// Position of this assignment in the ranked search (0 = best).
    pub rank: usize,
}

impl Assignment {
    pub fn regrasp_count(&self) -> usize {
        self.schemes.iter().map(CoverScheme::regrasps).sum()
    }

    pub fn total_segments(&self) -> usize {
        self.schemes.iter().map(|s| s.segments.len()).sum()
    }

    fn rebuild_events(&mut self) {
        self.regrasps = self
            .schemes
            .iter()
            .flat_map(|s| {
                s.segments.windows(2).map(move |w| RegraspEvent {
                    robot: s.owner,
                    t: w[1].active.0,
                    from: w[0].grasp.clone(),
                    to: w[1].grasp.clone(),
                })
            })
            .collect();
        self.regrasps
            .sort_by(|a, b| a.t.partial_cmp(&b.t).unwrap().then(a.robot.cmp(&b.robot)));
    }
}

/// Coverable sets of one robot, in grasp-set order.
pub type RobotSets = [(String, ParamIntervalSet)];

/// Handover parameter for two overlapping segments: the middle of the
/// overlap, moved to the nearest grid sample when one lies inside it.
pub fn handover(overlap: (f64, f64), resolution: usize) -> f64 {
    let mid = 0.5 * (overlap.0 + overlap.1);
    if resolution < 2 {
        return mid;
    }
    let k = grid_index(mid, resolution);
    let t = grid_t(k, resolution);
    if t >= overlap.0 - MERGE_EPS && t <= overlap.1 + MERGE_EPS {
        t.clamp(overlap.0, overlap.1)
    } else {
        mid
    }
}

/// Fewest-segment chain over the intervals of the grasps in `subset`,
/// by furthest reach.
fn chain(owner: usize, sets: &RobotSets, subset: &[usize], resolution: usize) -> Option<CoverScheme> {
    let mut pieces: Vec<(usize, (f64, f64))> = Vec::new();
    for &j in subset {
        for &iv in sets[j].1.intervals() {
            pieces.push((j, iv));
        }
    }
    let mut segs: Vec<(usize, (f64, f64))> = Vec::new();
    let mut x = 0.0;
    let mut first = true;
    loop {
        let best = pieces
            .iter()
            .filter(|(_, (a, b))| *a <= x + MERGE_EPS && (*b > x + MERGE_EPS || (first && *b >= x)))
            .max_by(|p, q| p.1 .1.partial_cmp(&q.1 .1).unwrap().then(q.0.cmp(&p.0)))?;
        segs.push(*best);
        first = false;
        x = best.1 .1;
        if x >= 1.0 - MERGE_EPS {
            break;
        }
    }
    let mut segments: Vec<Segment> = segs
        .iter()
        .map(|&(j, iv)| Segment {
            grasp: sets[j].0.clone(),
            interval: iv,
            active: iv,
        })
        .collect();
    let n = segments.len();
    segments[0].active.0 = 0.0;
    segments[n - 1].active.1 = 1.0;
    for k in 0..n - 1 {
        let overlap = (segments[k + 1].interval.0, segments[k].interval.1);
        let h = handover(overlap, resolution);
        segments[k].active.1 = h;
        segments[k + 1].active.0 = h;
    }
    Some(CoverScheme { owner, segments })
}

/// Candidate schemes for one robot, fewest segments first.
fn robot_schemes(owner: usize, sets: &RobotSets, resolution: usize) -> Result<(Vec<CoverScheme>, bool)> {
    let refs: Vec<&ParamIntervalSet> = sets.iter().map(|(_, s)| s).collect();
    if refs.is_empty() {
        return Err(Error::Precondition("grasp set is empty".into()));
    }
    let gaps = uncovered(&refs);
    if !gaps.is_empty() {
        return Err(Error::NotCoverable { robot: owner, gaps });
    }
    let (subsets, optimal): (Vec<Vec<usize>>, bool) = if refs.len() > EXACT_LIMIT {
        (vec![greedy_cover(&refs), (0..refs.len()).collect()], false)
    } else {
        (covering_subsets(&refs).into_iter().map(bits).collect(), true)
    };
    let mut out: Vec<CoverScheme> = Vec::new();
    for s in subsets {
        if let Some(c) = chain(owner, sets, &s, resolution) {
            if !out.iter().any(|o| o.segments == c.segments) {
                out.push(c);
            }
        }
    }
    out.sort_by(|a, b| {
        a.segments
            .len()
            .cmp(&b.segments.len())
            .then_with(|| a.grasp_ids().cmp(&b.grasp_ids()))
    });
    out.truncate(MAX_CHAINS);
    Ok((out, optimal))
}

/// True when no grasp is held by two robots at once. Active intervals are
/// closed, so a grasp released at `t` cannot be taken by another robot at
/// the same `t`.
pub fn grasps_distinct(schemes: &[CoverScheme]) -> bool {
    for (i, a) in schemes.iter().enumerate() {
        for b in &schemes[i + 1..] {
            for sa in &a.segments {
                for sb in &b.segments {
                    if sa.grasp == sb.grasp && sa.active.0 <= sb.active.1 && sb.active.0 <= sa.active.1 {
                        return false;
                    }
                }
            }
        }
    }
    true
}

/// Ranked enumeration of valid assignments.
#[derive(Debug, Clone)]
pub struct AssignmentSearch {
    ranked: Vec<Assignment>,
    cursor: usize,
}

impl AssignmentSearch {
    /// Enumerates per-robot scheme combinations and ranks those satisfying
    /// the distinct-grasp constraint by total segments, then regrasps of the
    /// leader, then grasp ids.
    pub fn new(per_robot: &[&RobotSets], leader: usize, resolution: usize) -> Result<Self> {
        if per_robot.is_empty() {
            return Err(Error::Precondition("at least one robot is required".into()));
        }
        if leader >= per_robot.len() {
            return Err(Error::Precondition(format!("leader index {leader} out of range")));
        }
        let mut options = Vec::with_capacity(per_robot.len());
        let mut optimal = true;
        for (i, sets) in per_robot.iter().enumerate() {
            let (s, opt) = robot_schemes(i, sets, resolution)?;
            optimal &= opt;
            options.push(s);
        }
        let mut ranked = Vec::new();
        let mut idx = vec![0usize; options.len()];
        'outer: loop {
            let pick: Vec<CoverScheme> = idx.iter().zip(&options).map(|(&k, o)| o[k].clone()).collect();
            if grasps_distinct(&pick) {
                let mut a = Assignment {
                    schemes: pick,
                    regrasps: Vec::new(),
                    optimal,
                    rank: 0,
                };
                a.rebuild_events();
                ranked.push(a);
            }
            for r in (0..idx.len()).rev() {
                idx[r] += 1;
                if idx[r] < options[r].len() {
                    continue 'outer;
                }
                idx[r] = 0;
            }
            break;
        }
        ranked.sort_by(|a, b| rank_order(a, b, leader));
        for (k, a) in ranked.iter_mut().enumerate() {
            a.rank = k;
        }
        Ok(Self { ranked, cursor: 0 })
    }

    /// The next assignment in rank order that has not been handed out yet.
    pub fn next_alternative(&mut self) -> Option<Assignment> {
        let a = self.ranked.get(self.cursor).cloned();
        if a.is_some() {
            self.cursor += 1;
        }
        a
    }

    /// Number of valid assignments found.
    pub fn len(&self) -> usize {
        self.ranked.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked.is_empty()
    }

    pub fn ranked(&self) -> &[Assignment] {
        &self.ranked
    }
}

fn rank_order(a: &Assignment, b: &Assignment, leader: usize) -> Ordering {
    let ids = |x: &Assignment| -> Vec<Vec<String>> {
        x.schemes
            .iter()
            .map(|s| s.segments.iter().map(|g| g.grasp.clone()).collect())
            .collect()
    };
    a.total_segments()
        .cmp(&b.total_segments())
        .then(a.schemes[leader].regrasps().cmp(&b.schemes[leader].regrasps()))
        .then_with(|| ids(a).cmp(&ids(b)))
}

/// Best assignment for the given per-robot coverable sets.
pub fn allocate(per_robot: &[&RobotSets], leader: usize, resolution: usize) -> Result<Assignment> {
    AssignmentSearch::new(per_robot, leader, resolution)?
        .next_alternative()
        .ok_or(Error::AssignmentInfeasible)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn set(v: &[(f64, f64)]) -> ParamIntervalSet {
        ParamIntervalSet::from_intervals(v.iter().copied())
    }

    fn named(v: &[(&str, ParamIntervalSet)]) -> Vec<(String, ParamIntervalSet)> {
        v.iter().map(|(n, s)| (n.to_string(), s.clone())).collect()
    }

    /// Brute force: every subset, coverage tested on the grid points and the
    /// midpoints between them.
    fn brute_min(sets: &[ParamIntervalSet], n: usize) -> Option<usize> {
        let m = sets.len();
        let probes: Vec<f64> = (0..2 * n - 1).map(|k| k as f64 / (2 * (n - 1)) as f64).collect();
        (1u32..1 << m)
            .filter(|s| probes.iter().all(|t| (0..m).any(|j| s & (1 << j) != 0 && sets[j].contains(*t))))
            .map(|s| s.count_ones() as usize)
            .min()
    }

    fn random_family(rng: &mut ChaCha8Rng, n: usize) -> Vec<ParamIntervalSet> {
        let m = rng.gen_range(1..=12);
        (0..m)
            .map(|_| {
                let pieces = rng.gen_range(1..=3);
                let iv: Vec<(f64, f64)> = (0..pieces)
                    .map(|_| {
                        let a = rng.gen_range(0..n);
                        let len = rng.gen_range(0..n / 2);
                        (grid_t(a, n), grid_t((a + len).min(n - 1), n))
                    })
                    .collect();
                set(&iv)
            })
            .collect()
    }

    #[test]
    fn min_cover_examples() {
        let full = ParamIntervalSet::full();
        let c = min_cover(&[&full]).unwrap();
        assert_eq!(c.covers, vec![vec![0]]);
        let (a, b) = (set(&[(0.0, 0.5)]), set(&[(0.4, 1.0)]));
        let c = min_cover(&[&a, &b]).unwrap();
        assert_eq!(c.min_size(), 2);
        let gap = set(&[(0.0, 0.3)]);
        assert!(matches!(min_cover(&[&gap, &b]), Err(Error::NoCover { .. })));
        assert!(min_cover(&[]).is_err());
    }

    #[test]
    fn min_cover_matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 201;
        let mut checked = 0;
        while checked < 200 {
            let fam = random_family(&mut rng, n);
            let refs: Vec<&ParamIntervalSet> = fam.iter().collect();
            match (min_cover(&refs), brute_min(&fam, n)) {
                (Ok(c), Some(k)) => {
                    assert_eq!(c.min_size(), k);
                    assert!(c.optimal);
                    for cov in &c.covers {
                        let u = cov.iter().fold(ParamIntervalSet::empty(), |acc, j| acc.union(&fam[*j]));
                        assert!(u.covers_unit());
                    }
                    checked += 1;
                }
                (Err(Error::NoCover { .. }), None) => {}
                (r, k) => panic!("disagreement: {r:?} vs {k:?}"),
            }
        }
    }

    #[test]
    fn greedy_fallback_is_flagged() {
        let sets: Vec<ParamIntervalSet> = (0..22)
            .map(|k| set(&[(k as f64 / 22.0, (k + 1) as f64 / 22.0)]))
            .collect();
        let refs: Vec<&ParamIntervalSet> = sets.iter().collect();
        let c = min_cover(&refs).unwrap();
        assert!(!c.optimal);
        assert_eq!(c.covers[0].len(), 22);
    }

    #[test]
    fn figure_example_scheme_shape() {
        let sets = named(&[
            ("g1", set(&[(0.4, 1.0)])),
            ("g2", set(&[(0.0, 0.5)])),
            ("g3", ParamIntervalSet::full()),
        ]);
        let a = allocate(&[&sets, &sets], 1, 201).unwrap();
        assert_eq!(a.schemes[0].grasp_ids(), vec!["g2", "g1"]);
        assert_eq!(a.schemes[1].grasp_ids(), vec!["g3"]);
        assert_eq!(a.regrasp_count(), 1);
        assert_eq!(a.total_segments(), 3);
        assert_eq!(oracle_min_total(&[&sets, &sets]), Some(3));
        let e = &a.regrasps[0];
        assert_eq!((e.robot, e.from.as_str(), e.to.as_str()), (0, "g2", "g1"));
        assert!((e.t - 0.45).abs() < 1e-12);
    }

    #[test]
    fn single_robot_full_cover() {
        let sets = named(&[("g", ParamIntervalSet::full())]);
        let a = allocate(&[&sets], 0, 201).unwrap();
        assert_eq!(a.regrasp_count(), 0);
    }

    #[test]
    fn two_full_covers_two_robots() {
        let sets = named(&[("g1", ParamIntervalSet::full()), ("g2", ParamIntervalSet::full())]);
        let a = allocate(&[&sets, &sets], 0, 201).unwrap();
        assert_eq!(a.schemes[0].grasp_ids(), vec!["g1"]);
        assert_eq!(a.schemes[1].grasp_ids(), vec!["g2"]);
        assert_eq!(a.regrasp_count(), 0);
        assert_eq!(oracle_min_total(&[&sets, &sets]), Some(2));
    }

    #[test]
    fn uncoverable_robot_is_reported() {
        let good = named(&[("g", ParamIntervalSet::full())]);
        let bad = named(&[("g", set(&[(0.0, 0.4)]))]);
        match allocate(&[&good, &bad], 0, 201) {
            Err(Error::NotCoverable { robot, gaps }) => {
                assert_eq!(robot, 1);
                assert_eq!(gaps, vec![(0.4, 1.0)]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shared_single_grasp_is_infeasible() {
        let sets = named(&[("g", ParamIntervalSet::full())]);
        assert!(matches!(allocate(&[&sets, &sets], 0, 201), Err(Error::AssignmentInfeasible)));
    }

    #[test]
    fn alternatives_exhaust() {
        let sets = named(&[("g", ParamIntervalSet::full())]);
        let mut s = AssignmentSearch::new(&[&sets], 0, 201).unwrap();
        assert!(s.next_alternative().is_some());
        assert!(s.next_alternative().is_none());
        // two symmetric optima
        let sets = named(&[("g1", ParamIntervalSet::full()), ("g2", ParamIntervalSet::full())]);
        let mut s = AssignmentSearch::new(&[&sets, &sets], 0, 201).unwrap();
        let first = s.next_alternative().unwrap();
        let second = s.next_alternative().unwrap();
        assert_ne!(first, second);
        assert_eq!(second.schemes[0].grasp_ids(), vec!["g2"]);
        assert!(s.next_alternative().is_none());
    }

    /// Independent enumeration of chains: sequences of (grasp, piece) of up
    /// to `max_len` with overlapping neighbours, handover at the overlap
    /// middle, distinctness tested on a fine grid.
    fn oracle_chains(sets: &RobotSets, max_len: usize) -> Vec<Vec<(usize, f64, f64)>> {
        let pieces: Vec<(usize, f64, f64)> = sets
            .iter()
            .enumerate()
            .flat_map(|(j, (_, s))| s.intervals().iter().map(move |&(a, b)| (j, a, b)))
            .collect();
        let mut out = Vec::new();
        let mut stack: Vec<Vec<(usize, f64, f64)>> =
            pieces.iter().filter(|p| p.1 <= 1e-12).map(|p| vec![*p]).collect();
        while let Some(c) = stack.pop() {
            let last = *c.last().unwrap();
            if last.2 >= 1.0 - 1e-12 {
                out.push(c.clone());
            }
            if c.len() < max_len {
                for p in &pieces {
                    if p.0 != last.0 && p.1 <= last.2 && p.2 > last.2 && p.1 > last.1 {
                        let mut d = c.clone();
                        d.push(*p);
                        stack.push(d);
                    }
                }
            }
        }
        out
    }

    fn oracle_active(c: &[(usize, f64, f64)], t: f64) -> Vec<usize> {
        let mut bounds = vec![0.0];
        for w in c.windows(2) {
            bounds.push(0.5 * (w[1].1 + w[0].2));
        }
        bounds.push(1.0);
        (0..c.len())
            .filter(|&k| bounds[k] - 1e-9 <= t && t <= bounds[k + 1] + 1e-9)
            .map(|k| c[k].0)
            .collect()
    }

    fn oracle_min_total(per_robot: &[&RobotSets]) -> Option<usize> {
        let chains: Vec<_> = per_robot.iter().map(|s| oracle_chains(s, 4)).collect();
        let mut best: Option<usize> = None;
        let mut idx = vec![0usize; chains.len()];
        if chains.iter().any(Vec::is_empty) {
            return None;
        }
        loop {
            let pick: Vec<_> = idx.iter().zip(&chains).map(|(&k, c)| &c[k]).collect();
            let ok = (0..=4000).all(|k| {
                let t = k as f64 / 4000.0;
                let act: Vec<Vec<usize>> = pick.iter().map(|c| oracle_active(c, t)).collect();
                (0..act.len()).all(|i| (i + 1..act.len()).all(|j| act[i].iter().all(|g| !act[j].contains(g))))
            });
            if ok {
                let total = pick.iter().map(|c| c.len()).sum();
                best = Some(best.map_or(total, |b: usize| b.min(total)));
            }
            let mut r = idx.len();
            loop {
                if r == 0 {
                    return best;
                }
                r -= 1;
                idx[r] += 1;
                if idx[r] < chains[r].len() {
                    break;
                }
                idx[r] = 0;
            }
        }
    }

    fn random_robot_sets(rng: &mut ChaCha8Rng, m: usize) -> Vec<(String, ParamIntervalSet)> {
        let n = 21;
        (0..m)
            .map(|j| {
                let s = if rng.gen_bool(0.3) {
                    ParamIntervalSet::full()
                } else {
                    let a = rng.gen_range(0..n);
                    let b = rng.gen_range(a..n);
                    set(&[(grid_t(a, n), grid_t(b, n))])
                };
                (format!("g{j}"), s)
            })
            .collect()
    }

    #[test]
    fn allocation_total_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut compared = 0;
        for _ in 0..200 {
            let m = rng.gen_range(2..=5);
            let a = random_robot_sets(&mut rng, m);
            let b = random_robot_sets(&mut rng, m);
            let got = allocate(&[&a, &b], 0, 21);
            let want = oracle_min_total(&[&a, &b]);
            match (got, want) {
                (Ok(x), Some(k)) => {
                    assert!(x.total_segments() <= k, "{} > {k}", x.total_segments());
                    compared += 1;
                }
                (Err(_), None) => {}
                (Ok(x), None) => assert!(x.total_segments() > 8, "oracle missed {x:?}"),
                (Err(e), Some(k)) => panic!("allocation failed ({e}) but oracle found {k}"),
            }
        }
        assert!(compared > 50);
    }

    proptest! {
        #[test]
        fn ranked_sequence_properties(seed in 0u64..5_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let m = rng.gen_range(2..=5);
            let a = random_robot_sets(&mut rng, m);
            let b = random_robot_sets(&mut rng, m);
            let Ok(mut search) = AssignmentSearch::new(&[&a, &b], 0, 21) else { return Ok(()) };
            let mut seen: Vec<Assignment> = Vec::new();
            let mut last_total = 0;
            while let Some(x) = search.next_alternative() {
                prop_assert!(!seen.iter().any(|s| s.schemes == x.schemes));
                prop_assert!(x.total_segments() >= last_total);
                last_total = x.total_segments();
                prop_assert_eq!(x.regrasp_count(), x.regrasps.len());
                prop_assert!(grasps_distinct(&x.schemes));
                for (s, sets) in x.schemes.iter().zip([&a, &b]) {
                    prop_assert_eq!(s.segments[0].active.0, 0.0);
                    prop_assert_eq!(s.segments.last().unwrap().active.1, 1.0);
                    for w in s.segments.windows(2) {
                        prop_assert!(w[0].interval.1 >= w[1].interval.0);
                        prop_assert_eq!(w[0].active.1, w[1].active.0);
                    }
                    for g in &s.segments {
                        let own = &sets.iter().find(|(n, _)| *n == g.grasp).unwrap().1;
                        prop_assert!(own.covers(g.interval.0, g.interval.1));
                        prop_assert!(own.covers(g.active.0, g.active.1));
                    }
                }
                for e in &x.regrasps {
                    let own = |id: &str| &a_or_b(&a, &b, e.robot).iter().find(|(n, _)| n == id).unwrap().1;
                    prop_assert!(own(&e.from).contains(e.t) && own(&e.to).contains(e.t));
                }
                seen.push(x);
            }
        }

        #[test]
        fn zero_regrasp_priority(seed in 0u64..5_000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut a = random_robot_sets(&mut rng, 4);
            a[1].1 = ParamIntervalSet::full();
            a[3].1 = ParamIntervalSet::full();
            let x = allocate(&[&a, &a], rng.gen_range(0..2), 21).unwrap();
            prop_assert_eq!(x.regrasp_count(), 0);
        }
    }

    fn a_or_b<'a>(
        a: &'a [(String, ParamIntervalSet)],
        b: &'a [(String, ParamIntervalSet)],
        i: usize,
    ) -> &'a [(String, ParamIntervalSet)] {
        if i == 0 {
            a
        } else {
            b
        }
    }
}
