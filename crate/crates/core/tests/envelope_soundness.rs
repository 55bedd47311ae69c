use hk_core::deviation::{envelope_evolve, ghost_bound, DeviationEnvelope};
use hk_core::profile::{coarsen, refine_with};
use hk_core::update::update;
use hk_core::{Exact, Profile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rug::Rational;

fn rat(rng: &mut ChaCha8Rng, lo: i64, hi: i64, den: i64) -> Rational {
    Rational::from((rng.gen_range(lo * den..=hi * den), den))
}

fn random_profile(rng: &mut ChaCha8Rng, n: usize) -> Vec<Rational> {
    let spread = rng.gen_range(1..=(n as i64 / 3).max(2));
    let den = rng.gen_range(1..=12);
    let mut v: Vec<Rational> = (0..n).map(|_| rat(rng, 0, spread, den)).collect();
    v.sort();
    v
}

/// `k` sorted values drawn from `[a, b]` for every consecutive pair.
fn random_interpolants(rng: &mut ChaCha8Rng, h: &[Rational], k: usize) -> Vec<Vec<Exact>> {
    h.windows(2)
        .map(|w| {
            let mut gap: Vec<Rational> = (0..k)
                .map(|_| {
                    let u = Rational::from((rng.gen_range(0..=60), 60));
                    w[0].clone() + (w[1].clone() - &w[0]) * u
                })
                .collect();
            gap.sort();
            gap.into_iter().map(Exact::new).collect()
        })
        .collect()
}

fn within(d: &Rational, e_l: &Exact, e_r: &Exact) -> bool {
    *d >= -e_l.value().clone() && d <= e_r.value()
}

#[test]
fn ghost_bound_holds_for_random_refinements() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..400 {
        let n = rng.gen_range(2..=40);
        let k = rng.gen_range(0..=8);
        let f = random_profile(&mut rng, n);
        let fp = Profile::<Exact>::from_rationals(&f, ()).unwrap();
        let g = refine_with(&fp, k, &random_interpolants(&mut rng, &f, k)).unwrap();
        let ug = coarsen(&update(&g), n, k).unwrap();
        let uf = update(&fp);
        let bound = ghost_bound(&fp);
        for (i, b) in bound.iter().enumerate() {
            let d = ug.values()[i].value().clone() - uf.values()[i].value();
            assert!(within(&d, b, b), "agent {} off by {d}", i + 1);
        }
    }
}

#[test]
fn refined_trajectories_stay_inside_the_envelope() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut checked = 0;
    while checked < 300 {
        let n = rng.gen_range(2..=30);
        let k = rng.gen_range(0..=6);
        let steps = rng.gen_range(1..=4);
        let f = random_profile(&mut rng, n);
        let scale = rng.gen_range(1..=8);
        let e_l: Vec<Rational> = (0..n).map(|_| rat(&mut rng, 0, 1, 40) / scale).collect();
        let e_r: Vec<Rational> = (0..n).map(|_| rat(&mut rng, 0, 1, 40) / scale).collect();
        // a sorted deviation inside the seed
        let h: Vec<Rational> = (0..n)
            .map(|i| {
                let u = Rational::from((rng.gen_range(0..=20), 20));
                f[i].clone() - &e_l[i] + (e_l[i].clone() + &e_r[i]) * u
            })
            .collect();
        if h.windows(2).any(|w| w[0] > w[1]) {
            continue;
        }
        checked += 1;

        let fp = Profile::<Exact>::from_rationals(&f, ()).unwrap();
        let env = DeviationEnvelope::new(
            e_l.iter().cloned().map(Exact::new).collect(),
            e_r.iter().cloned().map(Exact::new).collect(),
        )
        .unwrap();
        let run = envelope_evolve(&fp, &env, steps).unwrap();

        let hp = Profile::<Exact>::from_rationals(&h, ()).unwrap();
        let mut g = refine_with(&hp, k, &random_interpolants(&mut rng, &h, k)).unwrap();
        for step in &run[1..] {
            g = update(&g);
            let c = coarsen(&g, n, k).unwrap();
            for i in 0..n {
                let d = c.values()[i].value().clone() - step.profile.values()[i].value();
                assert!(
                    within(&d, &step.env.e_l[i], &step.env.e_r[i]),
                    "t={} agent {}: deviation {d} outside [-{:?}, {:?}]",
                    step.t,
                    i + 1,
                    step.env.e_l[i],
                    step.env.e_r[i]
                );
            }
        }
    }
}
