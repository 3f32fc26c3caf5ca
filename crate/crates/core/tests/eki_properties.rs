use agemort::data_io::{synth_generate, SynthSpec};
use agemort::eki::{run_reconstruction, CovarianceSpec, EkiConfig, ReconstructionData, MORTALITY_FLOOR};
use agemort::interp::DEFAULT_ANCHOR_AGES;
use agemort::pde::{AgeGrid, StepperConfig};
use proptest::prelude::*;

fn short_twin(years: usize, noise: f64, seed: u64) -> SynthSpec {
    let mut spec = SynthSpec::default();
    spec.mortality.truncate(years);
    spec.diagnoses.truncate(years);
    spec.noise = noise;
    spec.seed = seed;
    spec
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 8, ..ProptestConfig::default() })]

    // once the fit reaches the noise floor the residual can wobble, but at ensemble sizes
    // near the default never by more than the observation noise scale
    #[test]
    fn residuals_do_not_grow_beyond_noise(seed in 0u64..1000, noise in 0.0f64..0.03, j in 80usize..=120) {
        let spec = short_twin(4, noise, 1000 + seed);
        let (bundle, _) = synth_generate(&spec, &AgeGrid::default(), &StepperConfig::default()).unwrap();
        let gamma = bundle.gamma.clone().unwrap();
        let cfg = EkiConfig { ensemble_size: j, seed, gamma: CovarianceSpec::PerYear(gamma.clone()), ..EkiConfig::default() };
        let data = ReconstructionData { prevalence: &bundle.prevalence, deaths: &bundle.deaths, diagnoses: &bundle.diagnoses };
        let out = run_reconstruction(data, &bundle.mu0, &cfg).unwrap();
        prop_assert_eq!(out.years.len(), 4);
        for y in &out.years {
            let slack = gamma[&y.year].iter().sum::<f64>().sqrt();
            prop_assert_eq!(y.residuals.len(), cfg.filter_steps);
            for w in y.residuals.windows(2) {
                prop_assert!(w[1] <= w[0] + slack, "{}: {:?} (slack {})", y.year, y.residuals, slack);
            }
            prop_assert!(y.mean_anchors.iter().all(|m| *m >= MORTALITY_FLOOR));
            prop_assert!(y.std_anchors.iter().all(|s| *s >= 0.0 && s.is_finite()));
            prop_assert_eq!(y.mean_anchors.len(), DEFAULT_ANCHOR_AGES.len());
        }
    }
}

#[test]
fn reconstruction_is_seed_deterministic_and_mode_independent() {
    let spec = short_twin(3, 0.01, 5);
    let (bundle, _) = synth_generate(&spec, &AgeGrid::default(), &StepperConfig::default()).unwrap();
    let data = ReconstructionData { prevalence: &bundle.prevalence, deaths: &bundle.deaths, diagnoses: &bundle.diagnoses };
    let seq = EkiConfig { ensemble_size: 24, seed: 3, execution: agemort::par::Execution::Sequential, ..EkiConfig::default() };
    let par = EkiConfig { execution: agemort::par::Execution::Parallel, ..seq.clone() };
    let a = run_reconstruction(data, &bundle.mu0, &seq).unwrap();
    let b = run_reconstruction(data, &bundle.mu0, &par).unwrap();
    assert_eq!(a, b);
    let c = run_reconstruction(data, &bundle.mu0, &EkiConfig { seed: 4, ..seq }).unwrap();
    assert_ne!(a.years[0].mean_anchors, c.years[0].mean_anchors);
}
