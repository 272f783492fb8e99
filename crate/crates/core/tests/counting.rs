use std::collections::HashSet;

use nestmatch::generators::{grid_graph, grid_with_corner_diagonals, random_planar_graph};
use nestmatch::{count_by_enumeration, count_matchings_fkt, find_all_matchings, BigCount};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn big(s: &str) -> BigCount {
    s.parse().unwrap()
}

#[test]
fn grid_counts() {
    assert_eq!(
        count_matchings_fkt(&grid_graph(10, 10)).unwrap(),
        big("258584046368")
    );
    assert_eq!(
        count_matchings_fkt(&grid_graph(12, 12)).unwrap(),
        big("53060477521960000")
    );
    assert_eq!(
        count_matchings_fkt(&grid_with_corner_diagonals(10)).unwrap(),
        big("258584046368") + big("745241088")
    );
}

#[test]
fn small_grids_agree_with_enumeration() {
    for (side, want) in [(2, 2u64), (4, 36), (6, 6728)] {
        let g = grid_graph(side, side);
        assert_eq!(count_matchings_fkt(&g).unwrap(), BigCount::from(want));
        assert_eq!(count_by_enumeration(&g), BigCount::from(want));
    }
}

#[test]
fn random_planar_graphs_agree_with_enumeration() {
    let mut rng = ChaCha20Rng::seed_from_u64(0x5eed);
    let mut nonzero = 0;
    for round in 0..120 {
        let n = 2 + 2 * (round % 8);
        let density = [0.5, 0.8, 1.0][round % 3];
        let g = random_planar_graph(&mut rng, n, density);
        let all = find_all_matchings(&g);
        let distinct: HashSet<_> = all.iter().collect();
        assert_eq!(distinct.len(), all.len());
        assert!(all.iter().all(|m| m.is_perfect_for(&g)));
        assert_eq!(
            count_matchings_fkt(&g).unwrap(),
            BigCount::from(all.len()),
            "round {round}: {g:?}"
        );
        nonzero += usize::from(!all.is_empty());
    }
    assert!(
        nonzero >= 60,
        "only {nonzero} graphs had a perfect matching"
    );
}
