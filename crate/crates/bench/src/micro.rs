//! Random graph-reachability problems small enough to enumerate.

use std::collections::{BTreeSet, VecDeque};
use std::fmt::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Walk along directed edges until at the target. Every arrival marks the
/// node visited, so goals may also demand waypoints.
pub const REACH_DOMAIN: &str = "\
(defdomain reach
  ((:predicate At 1)
   (:predicate Edge 2)
   (:predicate Visited 1)
   (:operator (move ?a ?b) ((At ?a) (Edge ?a ?b)) ((At ?a)) ((At ?b) (Visited ?b)))
   (:method arrived (Reach ?g) ((At ?g)) ())
   (:method step (Reach ?g) ((At ?a) (Edge ?a ?b)) ((move ?a ?b) (Reach ?g)))))
";

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MicroProblem {
    pub name: String,
    pub text: String,
}

fn reachable(n: usize, edges: &BTreeSet<(usize, usize)>, from: usize) -> Vec<bool> {
    let mut seen = vec![false; n];
    seen[from] = true;
    let mut q = VecDeque::from([from]);
    while let Some(a) = q.pop_front() {
        for &(x, y) in edges {
            if x == a && !seen[y] {
                seen[y] = true;
                q.push_back(y);
            }
        }
    }
    seen
}

/// `count` problems on random digraphs of 3 to 6 nodes. Roughly a third
/// ask for a waypoint as well as the target; targets are drawn from both
/// reachable and unreachable nodes, so the batch mixes solvable and
/// unsolvable problems. Deterministic in `seed`.
pub fn reach_problems(seed: u64, count: usize) -> Vec<MicroProblem> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    while out.len() < count {
        let n = rng.random_range(3..=6);
        let density = rng.random_range(0.15..0.5);
        let mut edges = BTreeSet::new();
        for a in 0..n {
            for b in 0..n {
                if a != b && rng.random_bool(density) {
                    edges.insert((a, b));
                }
            }
        }
        let start = rng.random_range(0..n);
        let reach = reachable(n, &edges, start);
        let want_reachable = rng.random_bool(0.7);
        let targets: Vec<usize> = (0..n)
            .filter(|&t| t != start && reach[t] == want_reachable)
            .collect();
        if targets.is_empty() {
            continue;
        }
        let target = targets[rng.random_range(0..targets.len())];
        let waypoint = rng
            .random_bool(0.35)
            .then(|| rng.random_range(0..n))
            .filter(|&w| w != start && w != target);

        let name = format!("micro-{seed}-{}", out.len());
        let mut text = format!("(defproblem {name} reach\n  ((At N{start})");
        for (a, b) in &edges {
            write!(text, " (Edge N{a} N{b})").unwrap();
        }
        write!(text, ")\n  ((Reach N{target}))\n  ((At N{target})").unwrap();
        if let Some(w) = waypoint {
            write!(text, " (Visited N{w})").unwrap();
        }
        text.push_str("))\n");
        out.push(MicroProblem { name, text });
    }
    out
}
