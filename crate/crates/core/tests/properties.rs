//! Property suites: exterior calculus identities, finite differences,
//! flag structure, seed invariance, loss additivity and search optimality.

mod common;

use common::*;

#[test]
fn exterior_calculus_identities_hold_on_random_forms() {
    let n = exterior_identities(128).unwrap();
    assert!(n >= 200);
}

#[test]
fn derivatives_match_central_differences() {
    finite_differences(128).unwrap();
}

#[test]
fn flags_are_monotone_and_defects_match_involutivity() {
    let levels = flag_properties(&corpus_names()).unwrap();
    assert!(levels >= corpus_names().len());
}

#[test]
fn verdicts_do_not_depend_on_the_seed() {
    seed_invariance(&corpus_names()).unwrap();
}

#[test]
fn loss_is_additive_along_search_histories() {
    let names = searchable(&corpus_names());
    loss_additivity(&names, 2).unwrap();
}

#[test]
fn dijkstra_matches_brute_force_up_to_depth_two() {
    let names = searchable(&corpus_names());
    let costs = dijkstra_vs_brute_force(&names, 2).unwrap();
    assert_eq!(costs["double_integrator"], Some(0));
    assert_eq!(costs["unicycle"], Some(1));
    assert_eq!(costs["first_order"], Some(1));
    assert_eq!(costs["second_order"], Some(2));
}
