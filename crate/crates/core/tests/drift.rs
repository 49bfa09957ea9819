use bodyauth::matcher::{RegisteredProfile, RegistrationOptions};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn cluster(rng: &mut ChaCha8Rng, center: [f64; 2], n: usize) -> Vec<Vec<f64>> {
    let noise = Normal::new(0.0, 0.25).unwrap();
    (0..n)
        .map(|_| {
            let mut v: Vec<f64> = center.iter().map(|c| c + noise.sample(rng)).collect();
            v.push(noise.sample(rng));
            v
        })
        .collect()
}

fn acceptance(profile: &RegisteredProfile, samples: &[Vec<f64>]) -> f64 {
    let ok = samples.iter().filter(|s| profile.authenticate(s).unwrap().accepted).count();
    ok as f64 / samples.len() as f64
}

#[test]
fn updates_track_a_drifting_user() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let corners = [[0.0, 0.0], [4.0, 0.0], [0.0, 4.0], [4.0, 4.0]];
    let periods: Vec<_> = corners.iter().map(|c| cluster(&mut rng, *c, 30)).collect();
    let frozen = RegisteredProfile::register(&periods, &RegistrationOptions::default()).unwrap();

    // walk from the last corner to the middle of the square
    let steps = 16;
    let mut tracked = frozen.clone();
    for k in 1..=steps {
        let f = k as f64 / steps as f64;
        let center = [4.0 - 2.0 * f, 4.0 - 2.0 * f];
        let batch = cluster(&mut rng, center, 30);
        assert!(acceptance(&tracked, &batch) >= 0.5, "step {k} lost the user");
        tracked = tracked.updated(&batch).unwrap();
    }

    let probe = cluster(&mut rng, [2.0, 2.0], 200);
    let with_updates = acceptance(&tracked, &probe);
    let without = acceptance(&frozen, &probe);
    assert!(with_updates >= 0.8, "{with_updates}");
    assert!(without <= 0.05, "{without}");
    assert_eq!(tracked.pca, frozen.pca);
    assert_eq!(tracked.normalizer, frozen.normalizer);
}
