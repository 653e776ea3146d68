use approx::assert_abs_diff_eq;
use ndarray::Array3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::autodiff::{Tape, Var};
use crate::error::Result;

use super::{
    cdc_total, fft_magnitude_loss, perceptual_loss, pixel_multiscale_l1, ssim_loss,
    ConvStackExtractor, FeatureExtractor, LossConfig,
};

fn rand_image(c: usize, h: usize, w: usize, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    Array3::from_shape_fn((c, h, w), |_| rng.gen_range(0.0..1.0))
}

/// A reconstruction whose difference from `x0` stays away from the L1 kink:
/// every element differs by at least `min_gap`, with random signs.
fn offset_away_from_kink(x0: &Array3<f64>, min_gap: f64, seed: u64) -> Array3<f64> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    x0.mapv(|v| {
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        v + sign * rng.gen_range(min_gap..3.0 * min_gap)
    })
}

/// Central-difference gradient of `f` with respect to every element.
fn fd_grad(f: &dyn Fn(&Array3<f64>) -> f64, x: &Array3<f64>, eps: f64) -> Array3<f64> {
    let mut g = Array3::zeros(x.dim());
    let mut xp = x.clone();
    for idx in ndarray::indices(x.dim()) {
        let orig = xp[idx];
        xp[idx] = orig + eps;
        let fp = f(&xp);
        xp[idx] = orig - eps;
        let fm = f(&xp);
        xp[idx] = orig;
        g[idx] = (fp - fm) / (2.0 * eps);
    }
    g
}

/// Asserts analytic and finite-difference gradients agree elementwise with
/// relative error below `tol` (absolute floor 1e-6).
fn assert_grad_close(analytic: &Array3<f64>, numeric: &Array3<f64>, tol: f64, label: &str) {
    for (idx, (&a, &n)) in analytic.iter().zip(numeric.iter()).enumerate() {
        let denom = a.abs().max(n.abs()).max(1e-6);
        let rel = (a - n).abs() / denom;
        assert!(
            rel < tol,
            "{label}: gradient mismatch at flat index {idx}: analytic {a}, numeric {n}, rel {rel}"
        );
    }
}

/// Runs one loss term both ways: analytic gradient via the tape, numeric
/// via central differences on a scalar re-evaluation closure.
fn check_term_gradient(
    build: &dyn Fn(&mut Tape, Var) -> Result<Var>,
    x_hat: &Array3<f64>,
    tol: f64,
    label: &str,
) {
    let f = |x: &Array3<f64>| -> f64 {
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone().into_dyn(), false);
        let loss = build(&mut tape, v).unwrap();
        tape.scalar_value(loss)
    };
    let mut tape = Tape::new();
    let v = tape.leaf(x_hat.clone().into_dyn(), true);
    let loss = build(&mut tape, v).unwrap();
    let grads = tape.backward(loss);
    let analytic = grads
        .get(v)
        .expect("loss must reach the reconstruction")
        .clone()
        .into_dimensionality::<ndarray::Ix3>()
        .unwrap();
    let numeric = fd_grad(&f, x_hat, 1e-5);
    assert_grad_close(&analytic, &numeric, tol, label);
}

fn eval_term(build: &dyn Fn(&mut Tape, Var) -> Result<Var>, x_hat: &Array3<f64>) -> f64 {
    let mut tape = Tape::new();
    let v = tape.leaf(x_hat.clone().into_dyn(), false);
    let loss = build(&mut tape, v).unwrap();
    tape.scalar_value(loss)
}

/// Small-window config usable on 8x8 inputs.
fn small_window_config() -> LossConfig {
    LossConfig {
        ssim_window: 5,
        ..LossConfig::default()
    }
}

// ---------------------------------------------------------------- pixel

#[test]
fn pixel_term_is_zero_at_identity() {
    let x0 = rand_image(3, 8, 8, 1);
    let cfg = LossConfig::default();
    let v = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &cfg), &x0);
    assert_eq!(v, 0.0);
}

#[test]
fn pixel_term_constant_offset_gives_three_tenths() {
    // A constant offset of 0.1 contributes 0.1 to the full-resolution term
    // and, because bilinear resampling preserves constants, 0.1 to each of
    // the two scale terms: 0.3 in total.
    let x0 = rand_image(3, 8, 8, 2);
    let x_hat = x0.mapv(|v| v + 0.1);
    let cfg = LossConfig::default();
    let v = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &cfg), &x_hat);
    assert_abs_diff_eq!(v, 0.3, epsilon = 1e-12);
}

#[test]
fn pixel_term_empty_scales_is_plain_l1() {
    let x0 = rand_image(3, 6, 7, 3);
    let x_hat = rand_image(3, 6, 7, 4);
    let cfg = LossConfig {
        scales: vec![],
        ..LossConfig::default()
    };
    let v = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &cfg), &x_hat);
    let expected = (&x_hat - &x0).mapv(f64::abs).mean().unwrap();
    assert_abs_diff_eq!(v, expected, epsilon = 1e-12);
}

#[test]
fn pixel_term_respects_flags() {
    let x0 = rand_image(3, 8, 8, 5);
    let x_hat = rand_image(3, 8, 8, 6);
    let full = LossConfig::default();
    let only_plain = LossConfig {
        use_multiscale: false,
        ..full.clone()
    };
    let only_scales = LossConfig {
        use_pixel: false,
        ..full.clone()
    };
    let v_full = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &full), &x_hat);
    let v_plain = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &only_plain), &x_hat);
    let v_scales = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &only_scales), &x_hat);
    let plain = (&x_hat - &x0).mapv(f64::abs).mean().unwrap();
    assert_abs_diff_eq!(v_plain, plain, epsilon = 1e-12);
    assert_abs_diff_eq!(v_full, v_plain + v_scales, epsilon = 1e-12);
    assert!(v_scales > 0.0);
}

#[test]
fn pixel_term_rejects_mismatched_shapes() {
    let x0 = rand_image(3, 8, 8, 7);
    let other = rand_image(3, 4, 4, 8);
    let cfg = LossConfig::default();
    let mut tape = Tape::new();
    let v = tape.leaf(other.into_dyn(), false);
    assert!(pixel_multiscale_l1(&mut tape, v, &x0, &cfg).is_err());
}

#[test]
fn pixel_term_rejects_collapsing_scale() {
    let x0 = rand_image(3, 4, 4, 9);
    let cfg = LossConfig {
        scales: vec![0.1],
        ..LossConfig::default()
    };
    let mut tape = Tape::new();
    let v = tape.leaf(x0.clone().into_dyn(), false);
    assert!(pixel_multiscale_l1(&mut tape, v, &x0, &cfg).is_err());
}

// ----------------------------------------------------------- perceptual

/// One-layer extractor that returns its input unchanged: reduces the
/// perceptual term to a plain (weighted) mean squared error.
struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn features(&self, _tape: &mut Tape, x: Var, layers: &[usize]) -> Result<Vec<Var>> {
        assert_eq!(layers, [1], "identity extractor exposes only layer 1");
        Ok(vec![x])
    }

    fn max_layer(&self) -> usize {
        1
    }
}

#[test]
fn perceptual_zero_at_identity() {
    let x0 = rand_image(3, 8, 8, 10);
    let cfg = LossConfig::default();
    let ex = ConvStackExtractor::new(0);
    let v = eval_term(&|t, v| perceptual_loss(t, v, &x0, &ex, &cfg), &x0);
    assert_eq!(v, 0.0);
}

#[test]
fn perceptual_identity_extractor_is_weighted_mse() {
    let x0 = rand_image(3, 8, 8, 11);
    let x_hat = rand_image(3, 8, 8, 12);
    let cfg = LossConfig {
        feature_layers: vec![1],
        layer_weights: vec![0.7],
        ..LossConfig::default()
    };
    let v = eval_term(&|t, v| perceptual_loss(t, v, &x0, &IdentityExtractor, &cfg), &x_hat);
    let mse = (&x_hat - &x0).mapv(|d| d * d).mean().unwrap();
    assert_abs_diff_eq!(v, 0.7 * mse, epsilon = 1e-12);
}

#[test]
fn extractor_taps_do_not_depend_on_other_requests() {
    // Requesting additional deeper layers must not change the activations
    // of the layers already requested.
    let ex = ConvStackExtractor::new(3);
    let x = rand_image(3, 8, 8, 13);
    let mut tape = Tape::new();
    let v = tape.leaf(x.into_dyn(), false);
    let only = ex.features(&mut tape, v, &[2]).unwrap();
    let many = ex.features(&mut tape, v, &[2, 7, 16]).unwrap();
    assert_eq!(tape.value(only[0]), tape.value(many[0]));
}

#[test]
fn extractor_stage_shapes_follow_the_three_stage_plan() {
    let ex = ConvStackExtractor::new(0);
    assert_eq!(ex.max_layer(), 16);
    let x = rand_image(3, 8, 8, 14);
    let mut tape = Tape::new();
    let v = tape.leaf(x.into_dyn(), false);
    let feats = ex.features(&mut tape, v, &[2, 7, 16]).unwrap();
    assert_eq!(tape.value(feats[0]).shape(), &[8, 8, 8]);
    assert_eq!(tape.value(feats[1]).shape(), &[16, 4, 4]);
    assert_eq!(tape.value(feats[2]).shape(), &[24, 2, 2]);
}

#[test]
fn extractor_rejects_unknown_layer() {
    let ex = ConvStackExtractor::new(0);
    let x = rand_image(3, 8, 8, 15);
    let mut tape = Tape::new();
    let v = tape.leaf(x.into_dyn(), false);
    assert!(ex.features(&mut tape, v, &[17]).is_err());
    assert!(ex.features(&mut tape, v, &[0]).is_err());
}

#[test]
fn extractor_is_deterministic_and_loadable() {
    let a = ConvStackExtractor::new(9);
    let b = ConvStackExtractor::new(9);
    for i in 0..a.params().len() {
        assert_eq!(a.params().value_at(i), b.params().value_at(i));
    }
    let rebuilt = ConvStackExtractor::from_params(a.params().clone()).unwrap();
    assert_eq!(rebuilt.params().len(), a.params().len());

    let mut truncated = crate::autodiff::ParamSet::new();
    truncated.insert("feat.l1.w", a.params().get("feat.l1.w").unwrap().clone());
    assert!(ConvStackExtractor::from_params(truncated).is_err());
}

// ----------------------------------------------------------------- ssim

#[test]
fn ssim_zero_at_identity() {
    let x0 = rand_image(3, 16, 16, 20);
    let cfg = LossConfig::default();
    let v = eval_term(&|t, v| ssim_loss(t, v, &x0, &cfg), &x0);
    assert_abs_diff_eq!(v, 0.0, epsilon = 1e-9);
}

#[test]
fn ssim_constant_images_match_closed_form() {
    // For constant images the variance terms vanish, the contrast factor
    // saturates to 1, and SSIM reduces to the luminance comparison.
    let (m1, m2) = (0.4, 0.5);
    let x0 = Array3::from_elem((1, 16, 16), m1);
    let x_hat = Array3::from_elem((1, 16, 16), m2);
    let cfg = LossConfig::default();
    let v = eval_term(&|t, v| ssim_loss(t, v, &x0, &cfg), &x_hat);
    let c1 = cfg.ssim_c1;
    let expected = 1.0 - (2.0 * m1 * m2 + c1) / (m1 * m1 + m2 * m2 + c1);
    assert_abs_diff_eq!(v, expected, epsilon = 1e-9);
}

#[test]
fn ssim_penalizes_inversion_more_than_small_offset() {
    let x0 = Array3::from_shape_fn((3, 16, 16), |(c, i, j)| {
        0.1 + 0.8 * ((i as f64 / 15.0) * 0.5 + (j as f64 / 15.0) * 0.3 + c as f64 * 0.05)
            .min(1.0)
    });
    let inverted = x0.mapv(|v| 1.0 - v);
    let offset = x0.mapv(|v| v + 0.05);
    let cfg = LossConfig::default();
    let v_inv = eval_term(&|t, v| ssim_loss(t, v, &x0, &cfg), &inverted);
    let v_off = eval_term(&|t, v| ssim_loss(t, v, &x0, &cfg), &offset);
    assert!(v_inv > 0.0 && v_inv <= 2.0, "inverted loss {v_inv}");
    assert!(v_inv > v_off, "inversion {v_inv} vs offset {v_off}");
}

#[test]
fn ssim_stays_within_zero_two() {
    for seed in 0..6 {
        let x0 = rand_image(3, 12, 12, 100 + seed);
        let x_hat = rand_image(3, 12, 12, 200 + seed);
        let cfg = LossConfig::default();
        let v = eval_term(&|t, v| ssim_loss(t, v, &x0, &cfg), &x_hat);
        assert!((0.0..=2.0).contains(&v), "ssim loss out of range: {v}");
    }
}

#[test]
fn ssim_rejects_images_smaller_than_window() {
    let x0 = rand_image(3, 8, 8, 21);
    let cfg = LossConfig::default(); // 11x11 window
    let mut tape = Tape::new();
    let v = tape.leaf(x0.clone().into_dyn(), false);
    assert!(ssim_loss(&mut tape, v, &x0, &cfg).is_err());
}

// ------------------------------------------------------------------ fft

#[test]
fn fft_zero_at_identity() {
    let x0 = rand_image(3, 8, 8, 30);
    let v = eval_term(&|t, v| fft_magnitude_loss(t, v, &x0), &x0);
    assert_eq!(v, 0.0);
}

#[test]
fn fft_impulse_versus_zero_is_one() {
    // The magnitude spectrum of a unit impulse is all ones, so comparing
    // against a zero image gives exactly 1 after normalization.
    let mut x0 = Array3::zeros((1, 8, 8));
    x0[(0, 0, 0)] = 1.0;
    let zero = Array3::zeros((1, 8, 8));
    let v = eval_term(&|t, v| fft_magnitude_loss(t, v, &x0), &zero);
    assert_abs_diff_eq!(v, 1.0, epsilon = 1e-12);
}

#[test]
fn fft_invariant_to_circular_shift_of_one_argument() {
    let x0 = rand_image(3, 8, 8, 31);
    let shifted = Array3::from_shape_fn((3, 8, 8), |(c, i, j)| x0[(c, (i + 3) % 8, (j + 5) % 8)]);
    let v = eval_term(&|t, v| fft_magnitude_loss(t, v, &x0), &shifted);
    assert_abs_diff_eq!(v, 0.0, epsilon = 1e-6);
}

// ------------------------------------------------------------ cdc_total

#[test]
fn cdc_total_zero_at_identity_and_sums_terms() {
    let x0 = rand_image(3, 16, 16, 40);
    let x_hat = offset_away_from_kink(&x0, 0.02, 41);
    let cfg = LossConfig::default();
    let ex = ConvStackExtractor::new(0);

    let mut tape = Tape::new();
    let v = tape.leaf(x0.clone().into_dyn(), false);
    let (_, b0) = cdc_total(&mut tape, v, &x0, &ex, &cfg).unwrap();
    assert_abs_diff_eq!(b0.total, 0.0, epsilon = 1e-9);

    let mut tape = Tape::new();
    let v = tape.leaf(x_hat.into_dyn(), false);
    let (total, b) = cdc_total(&mut tape, v, &x0, &ex, &cfg).unwrap();
    assert!(b.pixel > 0.0 && b.perceptual > 0.0 && b.ssim > 0.0 && b.fft > 0.0);
    assert_abs_diff_eq!(
        b.total,
        b.pixel + b.perceptual + b.ssim + b.fft,
        epsilon = 1e-9
    );
    assert_abs_diff_eq!(tape.scalar_value(total), b.total, epsilon = 0.0);
}

#[test]
fn cdc_total_pixel_only_matches_pixel_term() {
    let x0 = rand_image(3, 8, 8, 42);
    let x_hat = rand_image(3, 8, 8, 43);
    let cfg = LossConfig {
        use_perceptual: false,
        use_ssim: false,
        use_fft: false,
        ..small_window_config()
    };
    let ex = ConvStackExtractor::new(0);
    let via_total = {
        let mut tape = Tape::new();
        let v = tape.leaf(x_hat.clone().into_dyn(), false);
        cdc_total(&mut tape, v, &x0, &ex, &cfg).unwrap().1.total
    };
    let direct = eval_term(&|t, v| pixel_multiscale_l1(t, v, &x0, &cfg), &x_hat);
    assert_eq!(via_total, direct);
}

#[test]
fn cdc_total_rejects_all_terms_disabled() {
    let x0 = rand_image(3, 8, 8, 44);
    let cfg = LossConfig {
        use_pixel: false,
        use_multiscale: false,
        use_perceptual: false,
        use_ssim: false,
        use_fft: false,
        ..LossConfig::default()
    };
    let ex = ConvStackExtractor::new(0);
    let mut tape = Tape::new();
    let v = tape.leaf(x0.clone().into_dyn(), false);
    assert!(cdc_total(&mut tape, v, &x0, &ex, &cfg).is_err());
}

#[test]
fn loss_config_validation_rejects_bad_values() {
    let bad_scale = LossConfig {
        scales: vec![1.5],
        ..LossConfig::default()
    };
    assert!(bad_scale.validate().is_err());
    let bad_weights = LossConfig {
        layer_weights: vec![1.0],
        ..LossConfig::default()
    };
    assert!(bad_weights.validate().is_err());
    let neg_weight = LossConfig {
        layer_weights: vec![1.0, -0.1, 1.0],
        ..LossConfig::default()
    };
    assert!(neg_weight.validate().is_err());
    let even_window = LossConfig {
        ssim_window: 8,
        ..LossConfig::default()
    };
    assert!(even_window.validate().is_err());
    let bad_sigma = LossConfig {
        ssim_sigma: 0.0,
        ..LossConfig::default()
    };
    assert!(bad_sigma.validate().is_err());
}

// ------------------------------------------------------------ gradients

#[test]
fn pixel_term_gradient_matches_finite_differences() {
    let x0 = rand_image(3, 8, 8, 50);
    let x_hat = offset_away_from_kink(&x0, 0.05, 51);
    let cfg = LossConfig::default();
    check_term_gradient(
        &|t, v| pixel_multiscale_l1(t, v, &x0, &cfg),
        &x_hat,
        1e-3,
        "pixel_multiscale_l1",
    );
}

#[test]
fn perceptual_gradient_matches_finite_differences() {
    let x0 = rand_image(3, 8, 8, 52);
    let x_hat = rand_image(3, 8, 8, 53);
    let cfg = LossConfig::default();
    let ex = ConvStackExtractor::new(1);
    check_term_gradient(
        &|t, v| perceptual_loss(t, v, &x0, &ex, &cfg),
        &x_hat,
        1e-3,
        "perceptual_loss",
    );
}

#[test]
fn ssim_gradient_matches_finite_differences() {
    let x0 = rand_image(3, 8, 8, 54);
    let x_hat = rand_image(3, 8, 8, 55);
    let cfg = small_window_config();
    check_term_gradient(&|t, v| ssim_loss(t, v, &x0, &cfg), &x_hat, 1e-3, "ssim_loss");
}

#[test]
fn fft_gradient_matches_finite_differences() {
    let x0 = rand_image(3, 8, 8, 56);
    let x_hat = rand_image(3, 8, 8, 57);
    check_term_gradient(
        &|t, v| fft_magnitude_loss(t, v, &x0),
        &x_hat,
        1e-3,
        "fft_magnitude_loss",
    );
}

#[test]
fn cdc_total_gradient_matches_finite_differences() {
    let x0 = rand_image(3, 8, 8, 58);
    let x_hat = offset_away_from_kink(&x0, 0.05, 59);
    let cfg = small_window_config();
    let ex = ConvStackExtractor::new(2);
    check_term_gradient(
        &|t, v| cdc_total(t, v, &x0, &ex, &cfg).map(|(total, _)| total),
        &x_hat,
        1e-3,
        "cdc_total",
    );
}
