mod common;

use common::*;
use epwind::branches::SortKey;
use epwind::dynamics::{evolve_loop, EvolutionConfig};
use epwind::homotopy::{default_rays, homotopy_word, winding_numbers};
use epwind::linalg::{c, C64};
use epwind::path::Path;
use epwind::perm::ordered_product;
use epwind::repro::{dynamics_cases, reference_evolution};
use epwind::scenarios::builtin_loop;
use epwind::tracker::{trace_path, TrackOptions};
use epwind::word::reduce_word;
use proptest::prelude::*;

fn vertex() -> impl Strategy<Value = C64> {
    (-2.8f64..2.8, -2.8f64..2.8).prop_map(|(x, y)| c(x, y))
}

fn polygon() -> impl Strategy<Value = Path> {
    prop::collection::vec(vertex(), 3..7)
        .prop_map(|v| Path::polygon(&v).unwrap())
        .prop_filter("stays clear of the EPs", |p| avoids(p, &closed_form_eps(), 1e-2))
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 32, ..ProptestConfig::default() })]

    #[test]
    fn reversal_negates_windings_and_inverts_words(p in polygon()) {
        let eps = model_atlas().ep_locations();
        let rays = default_rays(&eps).unwrap();
        let w = winding_numbers(&p, &eps).unwrap();
        let wr = winding_numbers(&p.reversed(), &eps).unwrap();
        prop_assert_eq!(wr, w.iter().map(|k| -k).collect::<Vec<_>>());
        let word = reduce_word(&homotopy_word(&p, &eps, &rays).unwrap());
        let back = reduce_word(&homotopy_word(&p.reversed(), &eps, &rays).unwrap());
        prop_assert_eq!(back, word.inverse());
        for (k, z) in eps.iter().enumerate() {
            prop_assert_eq!(word.exponent_sum(k as u32 + 1), w[k], "EP at {}", z);
        }
    }

    #[test]
    fn crossing_word_reproduces_the_traced_net(p in polygon()) {
        let atlas = model_atlas();
        let mut t = trace_path(paper4(), &p, SortKey::ReAsc, &TrackOptions::default()).unwrap();
        atlas.label(&mut t).unwrap();
        let prod = ordered_product(&t.crossing_word().unwrap(), &atlas.assignment(), 4).unwrap();
        prop_assert_eq!(&prod, &t.net_matrix());
        prop_assert_eq!(t.event_product(), t.net_matrix());
    }
}

/// Halving rtol leaves the outcome of every reference run unchanged.
#[test]
fn halving_rtol_keeps_outcomes() {
    let base = reference_evolution();
    let half = EvolutionConfig { rtol: base.rtol / 2.0, ..base.clone() };
    for (name, _) in dynamics_cases() {
        let p = builtin_loop(name).unwrap();
        let a = evolve_loop(paper4(), &p, 1, &base).unwrap();
        let b = evolve_loop(paper4(), &p, 1, &half).unwrap();
        assert_eq!(a.dominant().unwrap(), b.dominant().unwrap(), "{name}");
        let (ma, mb) = (a.normalized_magnitudes(), b.normalized_magnitudes());
        let diff = ma.iter().zip(&mb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
        assert!(diff < 1e-4, "{name}: {ma:?} vs {mb:?}");
    }
}

/// Every start state of a reference case ends in the same place.
#[test]
fn outcome_is_independent_of_start_state_under_reversed_speed() {
    let cfg = EvolutionConfig { omega: -1e-3, ..reference_evolution() };
    let p = builtin_loop("loop3_prime").unwrap();
    let doms: Vec<usize> = (1..=4).map(|s| evolve_loop(paper4(), &p, s, &cfg).unwrap().dominant().unwrap()).collect();
    assert!(doms.windows(2).all(|w| w[0] == w[1]), "{doms:?}");
}
