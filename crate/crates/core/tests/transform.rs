mod common;

use common::{dense_apply, dense_kronecker, random_kernel};
use hmm_polar::field::{KernelMatrix, PrimeField};
use hmm_polar::transform::TransformPlan;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn plan_from(q: u32, k: usize, t: u32, seed: u64) -> TransformPlan {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    TransformPlan::new(random_kernel(q, k, &mut rng), t).unwrap()
}

#[test]
fn arikan_depth_two_dense_form() {
    let kernel = KernelMatrix::arikan(2).unwrap();
    let dense = dense_kronecker(&kernel, 2);
    assert_eq!(
        dense,
        vec![
            vec![1, 1, 1, 1],
            vec![0, 1, 0, 1],
            vec![0, 0, 1, 1],
            vec![0, 0, 0, 1]
        ]
    );
    let plan = TransformPlan::new(kernel, 2).unwrap();
    assert_eq!(
        plan.polar_transform(&[1, 0, 1, 1]).unwrap(),
        vec![1, 1, 0, 1]
    );
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn matches_dense_kronecker(
        q in prop::sample::select(vec![2u32, 3, 5]),
        k in 2usize..=3,
        t in 0u32..=3,
        seed in any::<u64>(),
        zs in prop::collection::vec(any::<u8>(), 27),
    ) {
        let plan = plan_from(q, k, t, seed);
        let f = PrimeField::new(q).unwrap();
        let z: Vec<u8> = zs[..plan.len()].iter().map(|&x| x % q as u8).collect();
        let dense = dense_kronecker(plan.kernel(), t);
        prop_assert_eq!(plan.polar_transform(&z).unwrap(), dense_apply(&f, &dense, &z));
    }

    #[test]
    fn inverse_round_trip(
        q in prop::sample::select(vec![2u32, 3, 5, 7]),
        t in 0u32..=10,
        seed in any::<u64>(),
    ) {
        let plan = plan_from(q, 2, t, seed);
        let (z, _) = hmm_polar::hmm::presets::iid_uniform(q, 1).unwrap().sample(plan.len(), seed);
        prop_assert_eq!(&plan.polar_inverse(&plan.polar_transform(&z).unwrap()).unwrap(), &z);
        prop_assert_eq!(&plan.polar_transform(&plan.polar_inverse(&z).unwrap()).unwrap(), &z);
    }

    #[test]
    fn linear_over_the_field(
        q in prop::sample::select(vec![2u32, 3, 5, 7]),
        t in 1u32..=6,
        a in any::<u8>(),
        seed in any::<u64>(),
    ) {
        let plan = plan_from(q, 2, t, seed);
        let f = PrimeField::new(q).unwrap();
        let a = a % q as u8;
        let src = hmm_polar::hmm::presets::iid_uniform(q, 1).unwrap();
        let (z1, _) = src.sample(plan.len(), seed);
        let (z2, _) = src.sample(plan.len(), seed ^ 1);
        let mix: Vec<u8> = z1.iter().zip(&z2).map(|(&x, &y)| f.add(f.mul(a, x), y)).collect();
        let lhs = plan.polar_transform(&mix).unwrap();
        let u1 = plan.polar_transform(&z1).unwrap();
        let u2 = plan.polar_transform(&z2).unwrap();
        let rhs: Vec<u8> = u1.iter().zip(&u2).map(|(&x, &y)| f.add(f.mul(a, x), y)).collect();
        prop_assert_eq!(lhs, rhs);
    }
}
