/// Most likely state sequence for per-step log-emissions `emissions[t][s]`
/// under uniform transitions and a uniform start.
///
/// Among equally likely paths the lexicographically smallest one is
/// returned, so ties always resolve toward low state indices.
pub fn viterbi(emissions: &[Vec<f64>]) -> Vec<usize> {
    viterbi_with(emissions, |_, _| 0.0)
}

/// Same, with log-transition scores `trans(from, to)`. The start
/// distribution is uniform.
pub fn viterbi_with(emissions: &[Vec<f64>], trans: impl Fn(usize, usize) -> f64) -> Vec<usize> {
    let t_len = emissions.len();
    if t_len == 0 {
        return Vec::new();
    }
    let n = emissions[0].len();
    assert!(n > 0, "at least one state");
    assert!(emissions.iter().all(|e| e.len() == n), "ragged emissions");

    // best[t][s]: score of the best completion from state s at step t.
    // Running backward and then choosing greedily forward with a
    // smallest-index rule yields the lexicographically smallest optimum.
    let mut best = vec![vec![0.0; n]; t_len];
    best[t_len - 1].clone_from(&emissions[t_len - 1]);
    for t in (0..t_len - 1).rev() {
        for s in 0..n {
            let tail = (0..n)
                .map(|k| trans(s, k) + best[t + 1][k])
                .fold(f64::NEG_INFINITY, f64::max);
            best[t][s] = emissions[t][s] + tail;
        }
    }
    let first_argmax = |score: &dyn Fn(usize) -> f64| {
        let mut arg = 0;
        let mut top = score(0);
        for k in 1..n {
            let v = score(k);
            if v > top {
                top = v;
                arg = k;
            }
        }
        arg
    };
    let mut path = Vec::with_capacity(t_len);
    path.push(first_argmax(&|k| best[0][k]));
    for t in 1..t_len {
        let prev = path[t - 1];
        path.push(first_argmax(&|k| trans(prev, k) + best[t][k]));
    }
    path
}

/// Log-score of a path under uniform transitions.
pub fn path_score(emissions: &[Vec<f64>], path: &[usize]) -> f64 {
    emissions.iter().zip(path).map(|(e, &s)| e[s]).sum()
}

/// Exhaustive search over every path, visited in lexicographic order; the
/// first strict maximum wins.
pub fn brute_force_decode(emissions: &[Vec<f64>]) -> Vec<usize> {
    let t_len = emissions.len();
    if t_len == 0 {
        return Vec::new();
    }
    let n = emissions[0].len();
    let mut path = vec![0; t_len];
    let mut best_path = path.clone();
    let mut best = path_score(emissions, &path);
    loop {
        // odometer increment, last position fastest
        let mut i = t_len;
        loop {
            if i == 0 {
                return best_path;
            }
            i -= 1;
            path[i] += 1;
            if path[i] < n {
                break;
            }
            path[i] = 0;
        }
        let s = path_score(emissions, &path);
        if s > best {
            best = s;
            best_path.clone_from(&path);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn equal_emissions_give_all_zero_path() {
        let e = vec![vec![-1.0; 3]; 5];
        assert_eq!(viterbi(&e), vec![0; 5]);
    }

    #[test]
    fn empty_input() {
        assert!(viterbi(&[]).is_empty());
        assert!(brute_force_decode(&[]).is_empty());
    }

    #[test]
    fn sticky_transitions_smooth_a_blip() {
        let e = vec![vec![0.0, -1.0], vec![-0.6, 0.0], vec![0.0, -1.0]];
        assert_eq!(viterbi(&e), vec![0, 1, 0]);
        let sticky = |a: usize, b: usize| if a == b { 0.0 } else { -1.0 };
        assert_eq!(viterbi_with(&e, sticky), vec![0, 0, 0]);
    }

    fn instance() -> impl Strategy<Value = Vec<Vec<f64>>> {
        (1usize..=4, 1usize..=8).prop_flat_map(|(n, t)| {
            prop_oneof![
                // small integers: lots of exact ties
                proptest::collection::vec(
                    proptest::collection::vec((-3i32..=0).prop_map(f64::from), n),
                    t
                ),
                proptest::collection::vec(proptest::collection::vec(-5.0f64..0.0, n), t),
            ]
        })
    }

    proptest! {
        #[test]
        fn matches_exhaustive_search(e in instance()) {
            prop_assert_eq!(viterbi(&e), brute_force_decode(&e));
        }
    }
}
