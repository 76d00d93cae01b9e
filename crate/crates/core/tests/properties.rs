use moikit::linalg::{hs_norm, op_norm, CMatrix};
use moikit::moi::moi_apply;
use moikit::norms::{canonical_operators, lower_bound_search, LowerOptions};
use moikit::schur::apply_multiplier;
use moikit::spectral::{Kernel, NormalOperator, WeightedSpectrum};
use moikit::{random, SymbolTensor};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn setup(seed: u64, sizes: &[usize]) -> (ChaCha8Rng, Vec<WeightedSpectrum>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spectra = sizes.iter().map(|&m| random::spectrum(&mut rng, m)).collect();
    (rng, spectra)
}

fn kernels(rng: &mut ChaCha8Rng, spectra: &[WeightedSpectrum]) -> Vec<Kernel> {
    spectra
        .windows(2)
        .map(|w| Kernel::new(w[0].clone(), w[1].clone(), random::matrix(rng, w[0].len(), w[1].len())).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn multiplier_is_linear_in_the_symbol(seed in any::<u64>(), sizes in prop::collection::vec(1usize..4, 2..5)) {
        let (mut rng, spectra) = setup(seed, &sizes);
        let phi = random::symbol(&mut rng, spectra.clone());
        let psi = random::symbol(&mut rng, spectra.clone());
        let (a, b) = (random::complex(&mut rng), random::complex(&mut rng));
        let ks = kernels(&mut rng, &spectra);
        let combined = apply_multiplier(&phi.linear_combination(a, &psi, b).unwrap(), &ks).unwrap();
        let separate = apply_multiplier(&phi, &ks).unwrap().values() * a + apply_multiplier(&psi, &ks).unwrap().values() * b;
        prop_assert!((combined.values() - &separate).norm() <= 1e-12 * (1.0 + separate.norm()));
    }

    #[test]
    fn multiplier_is_bounded_by_sup_norm(seed in any::<u64>(), sizes in prop::collection::vec(1usize..5, 2..5)) {
        let (mut rng, spectra) = setup(seed, &sizes);
        let phi = random::symbol(&mut rng, spectra.clone());
        let ks = kernels(&mut rng, &spectra);
        let bound = phi.sup_norm() * ks.iter().map(Kernel::l2_norm).product::<f64>();
        prop_assert!(apply_multiplier(&phi, &ks).unwrap().l2_norm() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn synthesized_symbols_are_contractive_up_to_the_factor_norms(seed in any::<u64>(), d in 2usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let f = random::factorization(&mut rng, &[2, 2, 2], &[2, 3]);
        let ops: Vec<NormalOperator> = (0..3)
            .map(|_| {
                let mult = if d == 2 { vec![1, 1] } else { vec![d - 1, 1] };
                NormalOperator::decompose(&random::normal_matrix(&mut rng, d, &mult)).unwrap()
            })
            .collect();
        let spectra: Vec<WeightedSpectrum> = ops.iter().map(|o| o.spectrum().clone()).collect();
        let phi = f.synthesize_symbol(&spectra).unwrap();
        let xs: Vec<CMatrix> = (0..2).map(|_| random::contraction(&mut rng, d)).collect();
        let out = moi_apply(&phi, &ops, &xs).unwrap();
        prop_assert!(op_norm(&out) <= f.sup_norm_product() + 1e-9);
        prop_assert!(phi.sup_norm() <= f.sup_norm_product() * (1.0 + 1e-12));
    }

    #[test]
    fn spectral_decomposition_reconstructs(seed in any::<u64>(), d in 1usize..6) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mult: Vec<usize> = (0..d).map(|_| 1).collect();
        let a = random::normal_matrix(&mut rng, d, &mult);
        let op = NormalOperator::decompose(&a).unwrap();
        let mut sum = CMatrix::zeros(d, d);
        let mut identity = CMatrix::zeros(d, d);
        for (p, &z) in op.projections().iter().zip(op.spectrum().atoms()) {
            sum += p * z;
            identity += p;
            prop_assert!(hs_norm(&(p * p - p)) <= 1e-12);
        }
        prop_assert!(hs_norm(&(sum - &a)) <= 1e-12 * hs_norm(&a).max(1.0));
        prop_assert!(hs_norm(&(identity - CMatrix::identity(d, d))) <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn lower_bound_never_falls_below_the_sup_norm(seed in any::<u64>(), sizes in prop::collection::vec(1usize..4, 2..4)) {
        let (mut rng, spectra) = setup(seed, &sizes);
        let phi = random::symbol(&mut rng, spectra.clone());
        let ops = canonical_operators(&spectra, 1).unwrap();
        let opts = LowerOptions { restarts: 2, ..LowerOptions::default() };
        let est = lower_bound_search(&phi, &ops, &opts).unwrap();
        prop_assert!(est.value >= phi.sup_norm() - 1e-9);
    }

    #[test]
    fn identity_symbol_gives_the_plain_product(seed in any::<u64>(), d in 1usize..5) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ops: Vec<NormalOperator> =
            (0..3).map(|_| NormalOperator::decompose(&random::hermitian(&mut rng, d)).unwrap()).collect();
        let spectra: Vec<WeightedSpectrum> = ops.iter().map(|o| o.spectrum().clone()).collect();
        let one = SymbolTensor::constant(spectra, Complex64::new(1.0, 0.0)).unwrap();
        let xs: Vec<CMatrix> = (0..2).map(|_| random::matrix(&mut rng, d, d)).collect();
        let out = moi_apply(&one, &ops, &xs).unwrap();
        let direct = &xs[0] * &xs[1];
        prop_assert!(hs_norm(&(out - &direct)) <= 1e-12 * hs_norm(&direct).max(1.0));
    }
}
