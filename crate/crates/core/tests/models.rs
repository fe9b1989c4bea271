//! Default-size shapes, parameter totals and receptive field of the two networks.

use proptest::prelude::*;
use tdcgan_core::autodiff::{no_grad, Tensor};
use tdcgan_core::models::{
    count_parameters, measure_receptive_field, receptive_field, Discriminator, DiscriminatorConfig, Generator,
    GeneratorConfig, ReceptiveField,
};

/// Computed total at the default configuration; within 3% of the reported 5.12M.
const DEFAULT_PARAMS: usize = 5_274_986;

#[test]
fn default_forward_matches_the_published_ledger() {
    let g: Generator<f32> = Generator::new(GeneratorConfig::default(), 0).unwrap();
    let x = Tensor::from_vec((0..16384).map(|i| (i as f32 * 0.01).sin() * 0.1).collect(), &[1, 16384]).unwrap();
    let (y, _, ledger) = no_grad(|| g.forward_traced(&x)).unwrap();
    assert_eq!(y.shape(), &[1, 16384]);
    assert_eq!(ledger.len(), 2 + 32 + 3);
    assert_eq!((ledger[0].input.clone(), ledger[0].output.clone()), (vec![16384], vec![512, 1023]));
    assert_eq!(ledger[1].output, vec![128, 1023]);
    for stage in &ledger[2..34] {
        assert_eq!((stage.input.clone(), stage.output.clone()), (vec![128, 1023], vec![128, 1023]), "{}", stage.name);
    }
    assert_eq!(ledger[34].output, vec![512, 1023]);
    assert_eq!(ledger[35].output, vec![512, 1023]);
    assert_eq!(ledger[36].output, vec![16384]);
    assert_eq!(ledger, Generator::<f32>::shape_ledger(&GeneratorConfig::default()));
}

#[test]
fn dilation_schedule_restarts_per_stack() {
    let names: Vec<String> = Generator::<f32>::shape_ledger(&GeneratorConfig::default())
        .into_iter()
        .map(|s| s.name)
        .collect();
    assert_eq!(names[2], "tdcn0.block0 (dilation 1)");
    assert_eq!(names[9], "tdcn0.block7 (dilation 128)");
    assert_eq!(names[10], "tdcn1.block0 (dilation 1)");
}

#[test]
fn discriminator_halves_down_to_32() {
    let cfg = DiscriminatorConfig::default();
    assert_eq!(cfg.temporal_extents(16384), vec![16384, 8192, 4096, 2048, 1024, 512, 256, 128, 64, 32]);
}

#[test]
fn default_parameter_total_is_pinned() {
    let g: Generator<f32> = Generator::new(GeneratorConfig::default(), 0).unwrap();
    let d: Discriminator<f32> = Discriminator::new(DiscriminatorConfig::default(), 16384, 0).unwrap();
    let total = count_parameters(&g).total + count_parameters(&d).total;
    assert_eq!(total, DEFAULT_PARAMS);
    assert!((total as f64 / 5.12e6 - 1.0).abs() <= 0.10);
}

#[test]
fn receptive_field_at_defaults() {
    assert_eq!(receptive_field(&GeneratorConfig::default()), ReceptiveField { frames: 2041, samples: 32672 });
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn measured_field_equals_formula(n in 1usize..3, m in 1usize..4, seed in 0u64..1000) {
        let frames = 1 + n * 2 * ((1 << m) - 1) + 10;
        let cfg = GeneratorConfig::tiny((frames - 1) * 16 + 32, 8, 4, 8, n, m);
        prop_assert_eq!(measure_receptive_field(&cfg, seed).unwrap(), receptive_field(&cfg).frames);
    }
}
