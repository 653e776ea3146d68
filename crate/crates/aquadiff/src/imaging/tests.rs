//! Imaging unit tests. CIELAB reference values were produced by the
//! independent scalar implementation in `tools/oracle/cielab_ref.py` and are
//! frozen here.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use super::color::{pixel_lab_to_rgb, pixel_rgb_to_lab};
use super::ops::blur_plane_raw;
use super::*;

#[test]
fn white_maps_to_l100_neutral() {
    let (l, a, b) = pixel_rgb_to_lab(1.0, 1.0, 1.0);
    assert_abs_diff_eq!(l, 100.00000386666655, epsilon = 1e-9);
    assert!(a.abs() < 0.01 && b.abs() < 0.01, "white must be neutral, got a*={a} b*={b}");
}

#[test]
fn black_maps_to_origin() {
    let (l, a, b) = pixel_rgb_to_lab(0.0, 0.0, 0.0);
    assert_abs_diff_eq!(l, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(a, 0.0, epsilon = 1e-9);
    assert_abs_diff_eq!(b, 0.0, epsilon = 1e-9);
}

#[test]
fn mid_gray_lightness_matches_reference() {
    let (l, a, b) = pixel_rgb_to_lab(0.5, 0.5, 0.5);
    assert_abs_diff_eq!(l, 53.388967054080, epsilon = 1e-9);
    assert!(a.abs() < 1e-4 && b.abs() < 1e-4);
}

#[test]
fn out_of_gamut_lab_clamps_channelwise() {
    // L=50, a*=80 drives linear green negative; the reference computes the
    // unclamped red/blue responses below.
    let (r, g, b) = pixel_lab_to_rgb(50.0, 80.0, 0.0);
    assert_abs_diff_eq!(r, 0.911304943392, epsilon = 1e-9);
    assert_eq!(g, 0.0, "negative linear green must clamp to zero");
    assert_abs_diff_eq!(b, 0.478790141341, epsilon = 1e-9);
    assert!(r.is_finite() && g.is_finite() && b.is_finite());
}

#[test]
fn rgb_to_lab_requires_three_channels() {
    let gray = Image::constant(4, 4, 1, 0.5);
    assert!(rgb_to_lab(&gray).is_err());
}

#[test]
fn lab_image_round_trip() {
    let img = Image::from_fn(5, 7, 3, |y, x, c| {
        (0.1 + 0.8 * (y as f64 / 4.0) * (x as f64 / 6.0) + 0.05 * c as f64).min(1.0)
    });
    let lab = rgb_to_lab(&img).unwrap();
    let back = lab_to_rgb(&lab);
    for (a, b) in img.data().iter().zip(back.data()) {
        // The published 7-decimal sRGB<->XYZ matrices are not exact inverses
        // of each other, which bounds the attainable round-trip accuracy.
        assert_abs_diff_eq!(a, b, epsilon = 1e-4);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn prop_pixel_round_trip(r in 0.0f64..=1.0, g in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let (l, a, bb) = pixel_rgb_to_lab(r, g, b);
        let (r2, g2, b2) = pixel_lab_to_rgb(l, a, bb);
        prop_assert!((r - r2).abs() < 1e-4);
        prop_assert!((g - g2).abs() < 1e-4);
        prop_assert!((b - b2).abs() < 1e-4);
    }
}

#[test]
fn grayscale_uses_luma_weights() {
    let red = Image::from_fn(2, 2, 3, |_, _, c| if c == 0 { 1.0 } else { 0.0 });
    let gray = to_grayscale(&red).unwrap();
    for &v in gray.data() {
        assert_abs_diff_eq!(v, 0.299, epsilon = 1e-12);
    }
    let uniform = Image::constant(3, 3, 3, 0.42);
    for &v in to_grayscale(&uniform).unwrap().data() {
        assert_abs_diff_eq!(v, 0.42, epsilon = 1e-12);
    }
    let already_gray = Image::constant(2, 2, 1, 0.3);
    assert_eq!(to_grayscale(&already_gray).unwrap().data(), already_gray.data());
}

#[test]
fn kernel_is_normalized_and_symmetric() {
    for sigma in [0.5, 1.0, 2.5, 10.0] {
        let k = gaussian_kernel(sigma);
        let radius = (3.0 * sigma).ceil() as usize;
        assert_eq!(k.len(), 2 * radius + 1);
        assert_abs_diff_eq!(k.iter().sum::<f64>(), 1.0, epsilon = 1e-12);
        for i in 0..k.len() / 2 {
            assert_abs_diff_eq!(k[i], k[k.len() - 1 - i], epsilon = 1e-15);
        }
    }
}

#[test]
fn blur_preserves_constants() {
    let img = Image::constant(9, 11, 3, 0.37);
    let out = gaussian_blur(&img, 2.0).unwrap();
    for &v in out.data() {
        assert_abs_diff_eq!(v, 0.37, epsilon = 1e-12);
    }
}

#[test]
fn blur_of_impulse_reproduces_kernel() {
    let sigma = 1.0;
    let k = gaussian_kernel(sigma);
    let radius = (k.len() / 2) as i64;
    let (h, w) = (17, 17);
    let mut img = Image::zeros(h, w, 1);
    img.set(8, 8, 0, 1.0);
    let out = gaussian_blur(&img, sigma).unwrap();
    for y in 0..h {
        for x in 0..w {
            let dy = y as i64 - 8;
            let dx = x as i64 - 8;
            let expect = if dy.abs() <= radius && dx.abs() <= radius {
                k[(dy + radius) as usize] * k[(dx + radius) as usize]
            } else {
                0.0
            };
            assert_abs_diff_eq!(out.get(y, x, 0), expect, epsilon = 1e-12);
        }
    }
}

#[test]
fn blur_semigroup_in_interior() {
    let img = Image::from_fn(48, 48, 1, |y, x, _| {
        0.5 + 0.4 * ((y as f64) * 0.37).sin() * ((x as f64) * 0.23).cos()
    });
    let (s1, s2) = (1.0f64, 1.5f64);
    let sc = (s1 * s1 + s2 * s2).sqrt();
    let two = gaussian_blur(&gaussian_blur(&img, s1).unwrap(), s2).unwrap();
    let one = gaussian_blur(&img, sc).unwrap();
    let margin = (3.0 * sc).ceil() as usize + (3.0 * s2).ceil() as usize;
    for y in margin..48 - margin {
        for x in margin..48 - margin {
            assert_abs_diff_eq!(two.get(y, x, 0), one.get(y, x, 0), epsilon = 1e-3);
        }
    }
}

#[test]
fn blur_preserves_mean_away_from_borders() {
    // Constant outside a centered bump, with the constant band wider than the
    // kernel radius, so reflection padding reproduces the border exactly.
    let sigma = 2.0;
    let img = Image::from_fn(32, 32, 1, |y, x, _| {
        let dy = y as f64 - 15.5;
        let dx = x as f64 - 15.5;
        if dy.abs() < 8.0 && dx.abs() < 8.0 {
            0.3 + 0.5 * (-(dy * dy + dx * dx) / 20.0).exp()
        } else {
            0.3
        }
    });
    let out = gaussian_blur(&img, sigma).unwrap();
    let mean = |d: &[f64]| d.iter().sum::<f64>() / d.len() as f64;
    assert_abs_diff_eq!(mean(img.data()), mean(out.data()), epsilon = 1e-6);
}

#[test]
fn blur_rejects_nonpositive_sigma() {
    let img = Image::constant(4, 4, 1, 0.5);
    assert!(gaussian_blur(&img, 0.0).is_err());
    assert!(gaussian_blur(&img, -1.0).is_err());
}

#[test]
fn blur_plane_raw_matches_image_blur() {
    let img = Image::from_fn(12, 10, 1, |y, x, _| ((y * 10 + x) as f64) / 119.0);
    let by_plane = blur_plane_raw(img.data(), 12, 10, 1.3);
    let by_image = gaussian_blur(&img, 1.3).unwrap();
    for (a, b) in by_plane.iter().zip(by_image.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
}

#[test]
fn resize_identity_when_dims_match() {
    let img = Image::from_fn(7, 5, 3, |y, x, c| ((y + 2 * x + 3 * c) as f64) / 30.0);
    let out = resize(&img, 7, 5).unwrap();
    for (a, b) in img.data().iter().zip(out.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }
}

#[test]
fn resize_checkerboard_average() {
    let img = Image::from_fn(2, 2, 1, |y, x, _| ((y + x) % 2) as f64);
    let out = resize(&img, 1, 1).unwrap();
    assert_abs_diff_eq!(out.get(0, 0, 0), 0.5, epsilon = 1e-12);
}

#[test]
fn resize_constant_stays_constant() {
    let img = Image::constant(8, 8, 3, 0.61);
    for (h, w) in [(4, 4), (3, 5), (16, 16), (1, 1)] {
        let out = resize(&img, h, w).unwrap();
        for &v in out.data() {
            assert_abs_diff_eq!(v, 0.61, epsilon = 1e-12);
        }
    }
}

#[test]
fn resize_rejects_zero_dims() {
    let img = Image::constant(4, 4, 3, 0.5);
    assert!(resize(&img, 0, 4).is_err());
    assert!(resize(&img, 4, 0).is_err());
}

proptest! {
    #[test]
    fn prop_resize_respects_hull(seed in 0u64..1000, h in 2usize..9, w in 2usize..9) {
        let img = Image::from_fn(6, 6, 1, |y, x, _| {
            let v = (seed as f64 * 0.618 + (y * 6 + x) as f64 * 0.137).fract();
            v
        });
        let lo = img.data().iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = img.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let out = resize(&img, h, w).unwrap();
        for &v in out.data() {
            prop_assert!(v >= lo - 1e-12 && v <= hi + 1e-12);
        }
    }
}

#[test]
fn blur_and_resize_commute_with_channel_permutation() {
    let img = Image::from_fn(10, 10, 3, |y, x, c| {
        (0.13 * (y as f64) + 0.29 * (x as f64) + 0.41 * (c as f64)).fract()
    });
    let permuted = Image::from_fn(10, 10, 3, |y, x, c| img.get(y, x, (c + 1) % 3));

    let blur_then_permute = {
        let b = gaussian_blur(&img, 1.2).unwrap();
        Image::from_fn(10, 10, 3, |y, x, c| b.get(y, x, (c + 1) % 3))
    };
    let permute_then_blur = gaussian_blur(&permuted, 1.2).unwrap();
    for (a, b) in blur_then_permute.data().iter().zip(permute_then_blur.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }

    let resize_then_permute = {
        let r = resize(&img, 5, 7).unwrap();
        Image::from_fn(5, 7, 3, |y, x, c| r.get(y, x, (c + 1) % 3))
    };
    let permute_then_resize = resize(&permuted, 5, 7).unwrap();
    for (a, b) in resize_then_permute.data().iter().zip(permute_then_resize.data()) {
        assert_abs_diff_eq!(a, b, epsilon = 1e-15);
    }
}

#[test]
fn chw_round_trip() {
    let img = Image::from_fn(4, 6, 3, |y, x, c| ((y * 18 + x * 3 + c) as f64) / 71.0);
    let chw = img.to_chw();
    assert_eq!(chw.dim(), (3, 4, 6));
    assert_abs_diff_eq!(chw[[2, 1, 3]], img.get(1, 3, 2), epsilon = 0.0);
    let back = Image::from_chw(&chw).unwrap();
    assert_eq!(back.data(), img.data());
}

#[test]
fn image_construction_validates() {
    assert!(Image::new(2, 2, 3, vec![0.0; 11]).is_err());
    assert!(Image::new(2, 2, 1, vec![0.0, f64::NAN, 0.0, 0.0]).is_err());
    assert!(Image::new(2, 2, 2, vec![0.0; 8]).is_err());
    assert!(Image::new(2, 2, 1, vec![0.0; 4]).is_ok());
    assert!(Image::from_planes(2, 2, &[vec![0.0; 4], vec![0.0; 3], vec![0.0; 4]]).is_err());
}

#[test]
fn png_round_trip_quantizes_to_8_bit() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.png");
    let img = Image::from_fn(9, 13, 3, |y, x, c| {
        ((y * 31 + x * 7 + c * 11) % 256) as f64 / 255.0
    });
    save_png(&img, &path).unwrap();
    let back = load_png(&path).unwrap();
    assert_eq!((back.height(), back.width(), back.channels()), (9, 13, 3));
    for (a, b) in img.data().iter().zip(back.data()) {
        // Values already on the 8-bit grid survive exactly.
        assert_abs_diff_eq!(a, b, epsilon = 1e-12);
    }

    let gray_path = dir.path().join("gray.png");
    let gray = Image::from_fn(5, 5, 1, |y, x, _| ((y * 5 + x) as f64) / 24.0);
    save_png(&gray, &gray_path).unwrap();
    let back = load_png(&gray_path).unwrap();
    assert_eq!(back.channels(), 1);
    for (a, b) in gray.data().iter().zip(back.data()) {
        assert!((a - b).abs() <= 0.5 / 255.0 + 1e-12);
    }
}

#[test]
fn load_png_missing_file_errors() {
    let err = load_png("/nonexistent/definitely_missing.png");
    assert!(err.is_err());
}
