use fet_core::markov::{absorption_times, build_kernel, PairState};

/// Law of `k_{t+2}` at n = 2 by enumerating every pair of samples of the
/// non-source agent (agent 1). Agent `i` holds 1 at a round with `k` ones
/// iff `i < k`.
fn enumerate_n2(k_t: u32, k_t1: u32, ell: u32) -> [f64; 3] {
    let ones = |k: u32, mask: u32| (0..ell).filter(|b| (mask >> b) & 1 < k).count();
    let holds = k_t1 == 2;
    let total = f64::from(1u32 << (2 * ell));
    let mut law = [0.0; 3];
    for stored in 0..1u32 << ell {
        for fresh in 0..1u32 << ell {
            let (c2, c1) = (ones(k_t, stored), ones(k_t1, fresh));
            let next = if c1 > c2 { true } else if c1 < c2 { false } else { holds };
            law[1 + usize::from(next)] += 1.0 / total;
        }
    }
    law
}

#[test]
fn n2_rows_match_enumeration() {
    for ell in 1..=4 {
        let kernel = build_kernel(2, ell).unwrap();
        for k_t in 0..=2 {
            for k_t1 in 1..=2 {
                let want = enumerate_n2(k_t, k_t1, ell);
                let row = kernel.row(PairState { k_t, k_t1 });
                let mut got = [0.0; 3];
                for &(k, w) in &row.entries {
                    got[k as usize] += w;
                }
                for k in 0..3 {
                    assert!((got[k] - want[k]).abs() < 1e-14, "ell={ell} ({k_t},{k_t1}) -> {k}: {got:?} vs {want:?}");
                }
            }
        }
    }
}

#[test]
fn n2_absorption_times_by_hand() {
    // ell = 1: from (k, 1) agent 1 adopts 1 w.p. (1 - k/2)/2, and (k, 2) moves to (2, 2).
    // h(1,1) = 1 + h(1,1)·3/4 + 1/4 → 5; h(0,1) = 1 + (1 + 5)/2 = 4; h(2,1) = 1 + h(1,1) = 6.
    let t = absorption_times(&build_kernel(2, 1).unwrap()).unwrap();
    let h = |k_t, k_t1| t.get(PairState { k_t, k_t1 });
    let expect = [((2, 2), 0.0), ((0, 2), 1.0), ((1, 2), 1.0), ((1, 1), 5.0), ((0, 1), 4.0), ((2, 1), 6.0)];
    for ((a, b), v) in expect {
        assert!((h(a, b) - v).abs() < 1e-8, "h({a},{b}) = {} vs {v}", h(a, b));
    }
}
