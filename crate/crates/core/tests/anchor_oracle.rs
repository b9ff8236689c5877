//! Anchor resolution against a literal application of its set definitions.

mod support;

use pair_core::reasoner::{resolve_anchor, ReasonerConfig, ReasoningError};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use support::oracles::{lexicon, oracle_resolve, random_scene, OracleAnchor};

#[test]
fn resolution_matches_oracle_on_random_scenes() {
    let words = lexicon();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let cfg = ReasonerConfig::default();
    let (mut chosen, mut no_sem, mut no_front) = (0, 0, 0);
    for _ in 0..300 {
        let scene = random_scene(&mut rng, &words, 50);
        let got = resolve_anchor(&scene.reference, &scene.anchors, &scene.user, &cfg);
        match (oracle_resolve(&scene, &cfg), got) {
            (OracleAnchor::Chosen(want), Ok(id)) => {
                assert_eq!(id, want);
                chosen += 1;
            }
            (OracleAnchor::NoSemanticMatch, Err(ReasoningError::NoSemanticMatch { .. })) => no_sem += 1,
            (OracleAnchor::NothingInFront, Err(ReasoningError::NothingInFront { .. })) => no_front += 1,
            (_, got) => panic!("disagreement on {}: {got:?}", scene.reference.text()),
        }
    }
    // the generator must exercise every outcome
    assert!(chosen > 0 && no_sem > 0 && no_front > 0, "{chosen} {no_sem} {no_front}");
}
