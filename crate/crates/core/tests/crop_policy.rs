use clothclone::crop::{
    apply_crop, crop_statistics, disturb_crop, sample_draws, CropDraws, CropError, CropPolicy, SideStrategy, SWEEP_GRID,
};
use clothclone::seed::item_rng;
use clothclone::RgbImage;
use image::Rgb;
use proptest::prelude::*;

fn gradient(w: u32, h: u32) -> RgbImage {
    RgbImage::from_fn(w, h, |x, y| Rgb([x as u8, y as u8, (x * 7 + y * 13) as u8]))
}

#[test]
fn no_crop_branch_returns_input() {
    let img = gradient(30, 40);
    let (out, log) = apply_crop(&img, "a", &CropDraws::NONE).unwrap();
    assert_eq!(out, img);
    assert!(!log.cropped);
    let (out, log) = disturb_crop(&img, "a", &CropPolicy::with_rates(0.0, 0.3), &mut item_rng(1, "crop", "a")).unwrap();
    assert_eq!((out, log.cropped), (img, false));
}

#[test]
fn extreme_draws_leave_forty_percent() {
    let draws = CropDraws {
        cropped: true,
        top: 0.1,
        bottom: 0.5,
        strategy: SideStrategy::Both,
        left: 0.3,
        right: 0.3,
    };
    let img = gradient(100, 200);
    let (out, log) = apply_crop(&img, "x", &draws).unwrap();
    assert_eq!(out.dimensions(), (40, 80));
    assert_eq!((log.top, log.bottom, log.left, log.right), (20, 100, 30, 30));
    assert_eq!(out.get_pixel(0, 0), img.get_pixel(30, 20));
}

#[test]
fn tiny_images_are_rejected() {
    let err = disturb_crop(&gradient(3, 10), "t", &CropPolicy::default(), &mut item_rng(0, "crop", "t")).unwrap_err();
    assert_eq!(err, CropError::ImageTooSmall { width: 3, height: 10 });
    assert!(CropPolicy::with_rates(1.2, 0.3).validate().is_err());
}

#[test]
fn default_policy_crops_about_thirty_percent() {
    let stats = crop_statistics(&CropPolicy::default(), 10_000, 2024, "crop", (128, 256)).unwrap();
    assert!((0.285..=0.315).contains(&stats.cropped_fraction), "{}", stats.cropped_fraction);
    assert_eq!(stats.bound_violations, 0);
    assert!(stats.max_top <= 0.1 && stats.max_bottom <= 0.5 && stats.max_left <= 0.3 && stats.max_right <= 0.3);
}

#[test]
fn zero_probability_never_crops() {
    let stats = crop_statistics(&CropPolicy::with_rates(0.0, 0.3), 2000, 5, "crop", (64, 64)).unwrap();
    assert_eq!(stats.cropped, 0);
}

#[test]
fn sweep_grid_spans_both_axes() {
    assert_eq!(SWEEP_GRID.len(), 10);
    let rhos: Vec<f64> = SWEEP_GRID.iter().filter(|g| g.1 == 0.0).map(|g| g.0).collect();
    assert_eq!(rhos, vec![0.0, 0.1, 0.2, 0.3, 0.4, 0.5]);
    let taus: Vec<f64> = SWEEP_GRID.iter().filter(|g| g.0 == 0.3).map(|g| g.1).collect();
    assert_eq!(taus, vec![0.0, 0.1, 0.2, 0.3, 0.4]);
}

#[test]
fn draws_are_distributed_as_declared() {
    let policy = CropPolicy::with_rates(1.0, 0.3);
    let mut rng = item_rng(8, "crop", "dist");
    let n = 30_000;
    let mut counts = [0usize; 3];
    let (mut top, mut bottom, mut side, mut sides) = (0.0, 0.0, 0.0, 0usize);
    for _ in 0..n {
        let d = sample_draws(&policy, &mut rng);
        top += d.top;
        bottom += d.bottom;
        match d.strategy {
            SideStrategy::Left => {
                counts[0] += 1;
                assert_eq!(d.right, 0.0);
                side += d.left;
                sides += 1;
            }
            SideStrategy::Right => {
                counts[1] += 1;
                assert_eq!(d.left, 0.0);
                side += d.right;
                sides += 1;
            }
            SideStrategy::Both => {
                counts[2] += 1;
                side += d.left + d.right;
                sides += 2;
            }
        }
    }
    let n = n as f64;
    // Uniform means with generous 5 sigma bands.
    assert!((top / n - 0.05).abs() < 5.0 * 0.1 / 12f64.sqrt() / n.sqrt());
    assert!((bottom / n - 0.25).abs() < 5.0 * 0.5 / 12f64.sqrt() / n.sqrt());
    assert!((side / sides as f64 - 0.15).abs() < 5.0 * 0.3 / 12f64.sqrt() / (sides as f64).sqrt());
    for c in counts {
        assert!((c as f64 / n - 1.0 / 3.0).abs() < 5.0 * (2.0f64 / 9.0 / n).sqrt());
    }
}

proptest! {
    #[test]
    fn crop_is_a_bounded_contiguous_subrectangle(
        w in 4u32..200, h in 4u32..200, rho in 0.0f64..=1.0, tau in 0.0f64..=1.0, seed in any::<u64>()
    ) {
        let img = gradient(w, h);
        let policy = CropPolicy::with_rates(rho, tau);
        let (out, log) = disturb_crop(&img, "p", &policy, &mut item_rng(seed, "crop", "p")).unwrap();
        prop_assert!(log.top as f64 <= 0.1 * h as f64);
        prop_assert!(log.bottom as f64 <= 0.5 * h as f64);
        prop_assert!(log.left as f64 <= tau * w as f64 && log.right as f64 <= tau * w as f64);
        prop_assert_eq!(out.dimensions(), (w - log.left - log.right, h - log.top - log.bottom));
        prop_assert!(out.width() >= 1 && out.height() >= 1);
        for (x, y, px) in out.enumerate_pixels() {
            prop_assert_eq!(px, img.get_pixel(x + log.left, y + log.top));
        }
    }

    #[test]
    fn same_seed_and_id_give_same_crop(seed in any::<u64>(), id in "[a-z0-9]{1,12}") {
        let img = gradient(50, 90);
        let policy = CropPolicy::with_rates(0.7, 0.3);
        let a = disturb_crop(&img, &id, &policy, &mut item_rng(seed, "crop", &id)).unwrap();
        let b = disturb_crop(&img, &id, &policy, &mut item_rng(seed, "crop", &id)).unwrap();
        prop_assert_eq!(a, b);
    }
}
