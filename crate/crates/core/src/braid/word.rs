//! Braid words: signed generators on `n` strands, their induced permutation,
//! free reduction, composition, and extraction from a scene's xt projection.

use serde::{Deserialize, Serialize};

use super::crossing::{EPS_X, EPS_Y};
use crate::error::{Error, Result};
use crate::geometry::{Point2, ReferenceFrame};
use crate::scene::{AgentId, Scene};

/// Crossing times closer than this are treated as simultaneous.
pub const SIMULTANEITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Sign {
    Positive,
    Negative,
}

impl Sign {
    pub fn flip(self) -> Sign {
        match self {
            Sign::Positive => Sign::Negative,
            Sign::Negative => Sign::Positive,
        }
    }
}

impl From<Sign> for i8 {
    fn from(s: Sign) -> i8 {
        match s {
            Sign::Positive => 1,
            Sign::Negative => -1,
        }
    }
}

impl TryFrom<i8> for Sign {
    type Error = String;
    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            1 => Ok(Sign::Positive),
            -1 => Ok(Sign::Negative),
            other => Err(format!("generator sign must be +1 or -1, got {other}")),
        }
    }
}

/// `σ_index^sign`, swapping slots `index` and `index + 1` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Generator {
    pub index: usize,
    pub sign: Sign,
}

impl Generator {
    pub fn pos(index: usize) -> Self {
        Generator {
            index,
            sign: Sign::Positive,
        }
    }

    pub fn neg(index: usize) -> Self {
        Generator {
            index,
            sign: Sign::Negative,
        }
    }

    pub fn inverse(self) -> Self {
        Generator {
            index: self.index,
            sign: self.sign.flip(),
        }
    }
}

/// A generator with the time it occurred, when it came from a scene.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Letter {
    pub index: usize,
    pub sign: Sign,
    pub t_star: Option<f64>,
}

impl Letter {
    pub fn generator(&self) -> Generator {
        Generator {
            index: self.index,
            sign: self.sign,
        }
    }
}

impl From<Generator> for Letter {
    fn from(g: Generator) -> Self {
        Letter {
            index: g.index,
            sign: g.sign,
            t_star: None,
        }
    }
}

/// A braid word. `permutation[s]` is the final slot (0-based) of the strand
/// that starts in slot `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BraidWord {
    pub n_strands: usize,
    /// Agent of each initial slot; empty for words not extracted from a scene.
    pub strand_order: Vec<AgentId>,
    #[serde(rename = "word")]
    pub letters: Vec<Letter>,
    pub permutation: Vec<usize>,
}

/// Replays adjacent transpositions from the identity and returns the final
/// slot of every strand.
pub fn replay_permutation(n_strands: usize, generators: impl IntoIterator<Item = Generator>) -> Result<Vec<usize>> {
    let mut slot_content: Vec<usize> = (0..n_strands).collect();
    for g in generators {
        if g.index == 0 || g.index >= n_strands {
            return Err(Error::GeneratorOutOfRange {
                index: g.index,
                n_strands,
            });
        }
        slot_content.swap(g.index - 1, g.index);
    }
    let mut perm = vec![0; n_strands];
    for (slot, strand) in slot_content.into_iter().enumerate() {
        perm[strand] = slot;
    }
    Ok(perm)
}

impl BraidWord {
    pub fn identity(n_strands: usize) -> Self {
        BraidWord {
            n_strands,
            strand_order: Vec::new(),
            letters: Vec::new(),
            permutation: (0..n_strands).collect(),
        }
    }

    pub fn from_generators(n_strands: usize, generators: impl IntoIterator<Item = Generator>) -> Result<Self> {
        Self::from_letters(n_strands, generators.into_iter().map(Letter::from).collect())
    }

    pub fn from_letters(n_strands: usize, letters: Vec<Letter>) -> Result<Self> {
        let permutation = replay_permutation(n_strands, letters.iter().map(Letter::generator))?;
        Ok(BraidWord {
            n_strands,
            strand_order: Vec::new(),
            letters,
            permutation,
        })
    }

    pub fn generators(&self) -> impl Iterator<Item = Generator> + '_ {
        self.letters.iter().map(Letter::generator)
    }

    pub fn len(&self) -> usize {
        self.letters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.letters.is_empty()
    }

    pub fn is_identity_permutation(&self) -> bool {
        self.permutation.iter().enumerate().all(|(i, &p)| i == p)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("braid word serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let w: BraidWord = serde_json::from_str(text)?;
        let replayed = replay_permutation(w.n_strands, w.generators())?;
        if replayed != w.permutation {
            return Err(Error::invalid("braid word", "permutation does not match generators"));
        }
        Ok(w)
    }
}

/// Cancels adjacent inverse pairs until none remain.
pub fn free_reduce(word: &BraidWord) -> BraidWord {
    let mut stack: Vec<Letter> = Vec::with_capacity(word.letters.len());
    for &letter in &word.letters {
        match stack.last() {
            Some(top) if top.index == letter.index && top.sign != letter.sign => {
                stack.pop();
            }
            _ => stack.push(letter),
        }
    }
    BraidWord {
        letters: stack,
        ..word.clone()
    }
}

/// `a` followed by `b`.
pub fn compose(a: &BraidWord, b: &BraidWord) -> Result<BraidWord> {
    if a.n_strands != b.n_strands {
        return Err(Error::StrandCountMismatch(a.n_strands, b.n_strands));
    }
    let mut letters = a.letters.clone();
    letters.extend_from_slice(&b.letters);
    let permutation = a.permutation.iter().map(|&s| b.permutation[s]).collect();
    Ok(BraidWord {
        n_strands: a.n_strands,
        strand_order: a.strand_order.clone(),
        letters,
        permutation,
    })
}

/// Strand positions in `frame`, one row per participating agent over
/// `t = 0..=T_F`.
struct Strands {
    ids: Vec<AgentId>,
    positions: Vec<Vec<Point2>>,
}

fn collect_strands(scene: &Scene, frame: &ReferenceFrame) -> Strands {
    let tf = scene.future_horizon() as i64;
    let mut ids = Vec::new();
    let mut positions = Vec::new();
    for traj in scene.agents() {
        let pts: Option<Vec<Point2>> = (0..=tf).map(|t| traj.position_at(t).map(|p| frame.to_local(p))).collect();
        match pts {
            Some(pts) => {
                ids.push(traj.agent_id().clone());
                positions.push(pts);
            }
            None => log::debug!(
                "{}: agent {} lacks a complete window and is left out of the braid",
                scene.scene_id(),
                traj.agent_id()
            ),
        }
    }
    Strands { ids, positions }
}

/// Extracts the braid word of a scene's future in `frame`.
///
/// Strands are the agents valid over `t = 0..=T_F`, ordered by x at `t = 0`
/// (ties by agent id). Within each sampling interval motion is linear, so
/// each pair of strands swaps order at most once; swaps are emitted as
/// adjacent transpositions in order of their interpolated crossing time.
/// The sign is +1 when the strand moving right through the swap has the
/// larger y at that time. Swaps closer in time than [`SIMULTANEITY_TOL`]
/// are resolved in slot order.
pub fn extract_braid_word(scene: &Scene, frame: &ReferenceFrame) -> Result<BraidWord> {
    let Strands { ids, positions } = collect_strands(scene, frame);
    let n = ids.len();

    let mut initial: Vec<usize> = (0..n).collect();
    initial.sort_by(|&a, &b| positions[a][0].x.total_cmp(&positions[b][0].x).then_with(|| ids[a].cmp(&ids[b])));
    // strand s is the agent starting in slot s
    let strand_ids: Vec<AgentId> = initial.iter().map(|&a| ids[a].clone()).collect();
    let pos: Vec<&Vec<Point2>> = initial.iter().map(|&a| &positions[a]).collect();

    // order[slot] = strand, slot_of[strand] = slot
    let mut order: Vec<usize> = (0..n).collect();
    let mut slot_of: Vec<usize> = (0..n).collect();
    let mut letters = Vec::new();

    for k in 0..scene.future_horizon() {
        let mut events: Vec<(f64, usize, usize)> = Vec::new();
        for sl in 0..n {
            for sr in sl + 1..n {
                let (a, b) = (order[sl], order[sr]);
                let d0 = pos[b][k].x - pos[a][k].x;
                let d1 = pos[b][k + 1].x - pos[a][k + 1].x;
                if d1 < -EPS_X {
                    let u = if d0 <= 0.0 { 0.0 } else { (d0 / (d0 - d1)).clamp(0.0, 1.0) };
                    events.push((k as f64 + u, a, b));
                }
            }
        }
        if events.is_empty() {
            continue;
        }
        events.sort_by(|x, y| x.0.total_cmp(&y.0).then(slot_of[x.1].cmp(&slot_of[y.1])));

        let mut start = 0;
        while start < events.len() {
            let mut end = start + 1;
            while end < events.len() && events[end].0 - events[end - 1].0 <= SIMULTANEITY_TOL {
                end += 1;
            }
            let group = &events[start..end];
            let t = group[0].0;
            if group.len() > 1 {
                let mut seen = std::collections::HashSet::new();
                if group.iter().any(|&(_, a, b)| !seen.insert(a) | !seen.insert(b)) {
                    log::warn!(
                        "{}: simultaneous crossings sharing a strand at t = {t:.6}; resolved in slot order",
                        scene.scene_id()
                    );
                }
            }
            let flips: Vec<(usize, usize)> = group.iter().map(|&(_, a, b)| (a, b)).collect();
            let swaps = resolve_group(&mut order, &mut slot_of, &flips, |s| pos[s][k + 1].x);
            let u = t - k as f64;
            let y_at = |s: usize| pos[s][k].y + (pos[s][k + 1].y - pos[s][k].y) * u;
            for Swap { slot, rightward, leftward } in swaps {
                let dy = y_at(rightward) - y_at(leftward);
                if dy.abs() < EPS_Y {
                    return Err(Error::AmbiguousCrossing { t_star: t, dy });
                }
                letters.push(Letter {
                    index: slot + 1,
                    sign: if dy > 0.0 { Sign::Positive } else { Sign::Negative },
                    t_star: Some(t),
                });
            }
            start = end;
        }
    }

    let permutation = slot_of;
    debug_assert_eq!(
        replay_permutation(n, letters.iter().map(Letter::generator)).ok().as_ref(),
        Some(&permutation)
    );
    Ok(BraidWord {
        n_strands: n,
        strand_order: strand_ids,
        letters,
        permutation,
    })
}

struct Swap {
    /// Left slot before the swap.
    slot: usize,
    rightward: usize,
    leftward: usize,
}

/// Applies a group of simultaneous pair flips as adjacent swaps, scanning
/// slots left to right. Falls back to ordering by `end_x` if the requested
/// flips are not consistent with a total order.
fn resolve_group(order: &mut [usize], slot_of: &mut [usize], flips: &[(usize, usize)], end_x: impl Fn(usize) -> f64) -> Vec<Swap> {
    let n = order.len();
    let start_slot: Vec<usize> = slot_of.to_vec();
    let flipped = |a: usize, b: usize| flips.iter().any(|&(x, y)| (x == a && y == b) || (x == b && y == a));
    let before = |a: usize, b: usize| (start_slot[a] < start_slot[b]) != flipped(a, b);

    let mut swaps = Vec::new();
    let mut swap_at = |order: &mut [usize], slot_of: &mut [usize], p: usize| {
        swaps.push(Swap {
            slot: p,
            rightward: order[p],
            leftward: order[p + 1],
        });
        order.swap(p, p + 1);
        slot_of[order[p]] = p;
        slot_of[order[p + 1]] = p + 1;
    };

    let mut sorted = false;
    for _ in 0..n {
        let mut changed = false;
        for p in 0..n.saturating_sub(1) {
            if !before(order[p], order[p + 1]) {
                swap_at(order, slot_of, p);
                changed = true;
            }
        }
        if !changed {
            sorted = true;
            break;
        }
    }
    if !sorted {
        log::warn!("inconsistent simultaneous crossings; falling back to end-of-interval order");
        // each swap removes one pair out of x order, so this terminates
        loop {
            let mut changed = false;
            for p in 0..n.saturating_sub(1) {
                if end_x(order[p]) > end_x(order[p + 1]) + EPS_X {
                    swap_at(order, slot_of, p);
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
    }
    swaps
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::Trajectory;

    fn g(i: isize) -> Generator {
        if i > 0 {
            Generator::pos(i as usize)
        } else {
            Generator::neg((-i) as usize)
        }
    }

    fn word(n: usize, gens: &[isize]) -> BraidWord {
        BraidWord::from_generators(n, gens.iter().map(|&i| g(i))).unwrap()
    }

    fn idx(w: &BraidWord) -> Vec<isize> {
        w.generators()
            .map(|g| match g.sign {
                Sign::Positive => g.index as isize,
                Sign::Negative => -(g.index as isize),
            })
            .collect()
    }

    #[test]
    fn free_reduction_examples() {
        assert_eq!(idx(&free_reduce(&word(3, &[1, -1, 2]))), vec![2]);
        assert!(free_reduce(&word(3, &[])).is_empty());
        assert!(free_reduce(&word(3, &[1, 2, -2, -1])).is_empty());
        // same index and sign never cancels
        assert_eq!(idx(&free_reduce(&word(3, &[1, 1]))), vec![1, 1]);
        // reduction keeps the permutation
        let w = word(4, &[3, 1, -1, 2]);
        assert_eq!(free_reduce(&w).permutation, w.permutation);
    }

    #[test]
    fn composition() {
        let a = word(3, &[1]);
        let e = word(3, &[]);
        assert_eq!(idx(&compose(&a, &e).unwrap()), vec![1]);
        let b = word(3, &[-1]);
        let ab = compose(&a, &b).unwrap();
        assert!(free_reduce(&ab).is_empty());
        assert!(ab.is_identity_permutation());
        assert_eq!(compose(&a, &word(4, &[])), Err(Error::StrandCountMismatch(3, 4)));
    }

    #[test]
    fn permutation_semantics() {
        let w = word(3, &[1, 2]);
        // strand 0 moves to slot 1 then 2; strand 1 to slot 0; strand 2 to slot 1
        assert_eq!(w.permutation, vec![2, 0, 1]);
        assert!(BraidWord::from_generators(3, [Generator::pos(3)]).is_err());
        assert!(BraidWord::from_generators(3, [Generator::pos(0)]).is_err());
    }

    fn line_scene(specs: &[(&str, f64, f64, f64, f64)], tf: usize) -> Scene {
        let agents = specs
            .iter()
            .map(|&(id, x0, y0, vx, vy)| {
                Trajectory::from_points(id, 0, (0..=tf).map(|t| Point2::new(x0 + vx * t as f64, y0 + vy * t as f64))).unwrap()
            })
            .collect();
        Scene::new("w", agents, 1, tf, 0.1).unwrap()
    }

    #[test]
    fn single_swap() {
        // left strand moves right and is above at the crossing
        let s = line_scene(&[("a", 0.0, 1.0, 1.0, 0.0), ("b", 2.5, 0.0, 0.0, 0.0)], 4);
        let w = extract_braid_word(&s, &ReferenceFrame::IDENTITY).unwrap();
        assert_eq!(idx(&w), vec![1]);
        assert_eq!(w.permutation, vec![1, 0]);
        assert_eq!(w.letters[0].t_star, Some(2.5));
        assert_eq!(w.strand_order, vec![AgentId::from("a"), AgentId::from("b")]);

        let s = line_scene(&[("a", 0.0, -1.0, 1.0, 0.0), ("b", 2.5, 0.0, 0.0, 0.0)], 4);
        assert_eq!(idx(&extract_braid_word(&s, &ReferenceFrame::IDENTITY).unwrap()), vec![-1]);
    }

    #[test]
    fn no_order_change_is_identity() {
        let s = line_scene(&[("a", 0.0, 1.0, 1.0, 0.0), ("b", 2.5, 0.0, 1.0, 0.0), ("c", 9.0, 0.0, 1.0, 0.3)], 4);
        let w = extract_braid_word(&s, &ReferenceFrame::IDENTITY).unwrap();
        assert!(w.is_empty());
        assert!(w.is_identity_permutation());
    }

    #[test]
    fn three_strands_in_time_order() {
        // a runs through b (t = 1.5) then c (t = 3.5)
        let s = line_scene(
            &[("a", 0.0, 1.0, 2.0, 0.0), ("b", 3.0, 0.0, 0.0, 0.0), ("c", 7.0, 5.0, 0.0, 0.0)],
            5,
        );
        let w = extract_braid_word(&s, &ReferenceFrame::IDENTITY).unwrap();
        assert_eq!(idx(&w), vec![1, -2]);
        assert_eq!(w.permutation, vec![2, 0, 1]);
    }

    #[test]
    fn simultaneous_triple_crossing() {
        // three strands meet at x = 0 at t = 1 (sample) with distinct y
        let s = line_scene(
            &[("a", -1.0, 0.0, 1.0, 0.0), ("b", 0.0, 1.0, 0.0, 0.0), ("c", 1.0, 2.0, -1.0, 0.0)],
            2,
        );
        let w = extract_braid_word(&s, &ReferenceFrame::IDENTITY).unwrap();
        assert_eq!(w.len(), 3);
        assert_eq!(w.permutation, vec![2, 1, 0]);
        assert_eq!(replay_permutation(3, w.generators()).unwrap(), w.permutation);
    }

    #[test]
    fn coincident_strands_are_ambiguous() {
        let s = line_scene(&[("a", 0.0, 0.0, 1.0, 0.0), ("b", 2.5, 0.0, 0.0, 0.0)], 4);
        assert!(matches!(
            extract_braid_word(&s, &ReferenceFrame::IDENTITY),
            Err(Error::AmbiguousCrossing { .. })
        ));
    }

    #[test]
    fn json_round_trip() {
        let s = line_scene(&[("a", 0.0, 1.0, 1.0, 0.0), ("b", 2.5, 0.0, 0.0, 0.0)], 4);
        let w = extract_braid_word(&s, &ReferenceFrame::IDENTITY).unwrap();
        let text = w.to_json();
        assert!(text.contains("\"sign\": 1"));
        assert_eq!(BraidWord::from_json(&text).unwrap(), w);
    }
}
