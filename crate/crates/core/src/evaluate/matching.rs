/// Maximum bipartite matching by augmenting paths (Kuhn's algorithm).
///
/// `adj[l]` lists the right vertices compatible with left vertex `l`; returns
/// the matched right vertex of each left vertex.
pub fn maximum_matching(adj: &[Vec<usize>], right_len: usize) -> Vec<Option<usize>> {
    let mut right_owner: Vec<Option<usize>> = vec![None; right_len];
    for l in 0..adj.len() {
        let mut seen = vec![false; right_len];
        augment(l, adj, &mut seen, &mut right_owner);
    }
    let mut left_match = vec![None; adj.len()];
    for (r, owner) in right_owner.iter().enumerate() {
        if let Some(l) = owner {
            left_match[*l] = Some(r);
        }
    }
    left_match
}

fn augment(l: usize, adj: &[Vec<usize>], seen: &mut [bool], right_owner: &mut [Option<usize>]) -> bool {
    for &r in &adj[l] {
        if seen[r] {
            continue;
        }
        seen[r] = true;
        if right_owner[r].is_none_or(|other| augment(other, adj, seen, right_owner)) {
            right_owner[r] = Some(l);
            return true;
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;

    fn size(adj: &[Vec<usize>], n: usize) -> usize {
        maximum_matching(adj, n).iter().flatten().count()
    }

    /// Exhaustive maximum over all injective assignments, for tiny graphs.
    fn brute(adj: &[Vec<usize>], n: usize) -> usize {
        fn go(l: usize, adj: &[Vec<usize>], used: &mut Vec<bool>) -> usize {
            if l == adj.len() {
                return 0;
            }
            let mut best = go(l + 1, adj, used);
            for &r in &adj[l] {
                if !used[r] {
                    used[r] = true;
                    best = best.max(1 + go(l + 1, adj, used));
                    used[r] = false;
                }
            }
            best
        }
        go(0, adj, &mut vec![false; n])
    }

    #[test]
    fn needs_augmenting_path() {
        // greedy would give 0-0 and leave 1 unmatched
        let adj = vec![vec![0, 1], vec![0]];
        assert_eq!(size(&adj, 2), 2);
    }

    #[test]
    fn matches_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand::rngs::StdRng::seed_from_u64(7);
        for _ in 0..300 {
            let (nl, nr) = (rng.gen_range(0..6), rng.gen_range(0..6));
            let adj: Vec<Vec<usize>> =
                (0..nl).map(|_| (0..nr).filter(|_| rng.gen_bool(0.35)).collect()).collect();
            assert_eq!(size(&adj, nr), brute(&adj, nr));
        }
    }
}
