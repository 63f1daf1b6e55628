mod common;

use clothclone::homography::{
    estimate_homography, refine_homography, warp_parts, warp_region, Correspondences, GeometryError, Homography, WarpPart,
};
use clothclone::imaging::value_range;
use clothclone::seed::item_rng;
use clothclone::{Mask, Point2, Rect, RgbImage};
use image::Rgb;
use nalgebra::Matrix3;
use proptest::prelude::*;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use common::{project, random_homography};

fn max_entry_diff(a: &Matrix3<f64>, b: &Matrix3<f64>) -> f64 {
    (a - b).abs().max()
}

#[test]
fn estimate_is_equivariant_under_similarities() {
    let mut rng = item_rng(11, "geometry", "similarity");
    for _ in 0..50 {
        let (m, src, dst) = random_homography(&mut rng, 8);
        let theta: f64 = rng.random_range(-3.0..3.0);
        let s: f64 = rng.random_range(0.5..40.0);
        let (tx, ty) = (rng.random_range(-200.0..200.0), rng.random_range(-200.0..200.0));
        let sim = Matrix3::new(
            s * theta.cos(),
            -s * theta.sin(),
            tx,
            s * theta.sin(),
            s * theta.cos(),
            ty,
            0.0,
            0.0,
            1.0,
        );
        let moved = |p: &Point2| project(&sim, *p).unwrap();
        let c = Correspondences::new(src.iter().map(moved).collect(), dst.iter().map(moved).collect()).unwrap();
        let h = estimate_homography(&c).unwrap();
        let mut expected = sim * m * sim.try_inverse().unwrap();
        expected /= expected[(2, 2)];
        // Entries scale with the similarity; compare relative to its size.
        let tol = 1e-6 * (1.0 + expected.abs().max());
        assert!(max_entry_diff(h.matrix(), &expected) < tol, "{} vs {expected}", h.matrix());
    }
}

#[test]
fn refinement_leaves_exact_fits_alone() {
    let mut rng = item_rng(12, "geometry", "fixed-point");
    for _ in 0..20 {
        let (_, src, dst) = random_homography(&mut rng, 10);
        let c = Correspondences::new(src, dst).unwrap();
        let h = estimate_homography(&c).unwrap();
        let r = refine_homography(&h, &c);
        assert!(max_entry_diff(r.homography.matrix(), h.matrix()) < 1e-9);
    }
}

#[test]
fn refinement_recovers_from_perturbed_start() {
    let mut rng = item_rng(13, "geometry", "perturbed");
    for _ in 0..20 {
        let (m, src, dst) = random_homography(&mut rng, 12);
        let c = Correspondences::new(src, dst).unwrap();
        let mut start = m;
        for v in start.iter_mut() {
            *v *= 1.0 + 0.1 * rng.random_range(-1.0..1.0);
        }
        let Ok(initial) = Homography::from_matrix(start) else { continue };
        if c.src().iter().any(|p| initial.apply(*p).is_err()) {
            continue;
        }
        let refined = refine_homography(&initial, &c).homography;
        assert!(refined.rmse() < 1e-6, "rmse {}", refined.rmse());
    }
}

#[test]
fn refinement_never_increases_error_on_noisy_points() {
    let mut rng = item_rng(14, "geometry", "noisy");
    let noise = Normal::new(0.0, 0.5).unwrap();
    for _ in 0..50 {
        let (m, _, _) = random_homography(&mut rng, 4);
        // Pixel-scale coordinates so σ = 0.5 px is meaningful.
        let scale = Matrix3::new(200.0, 0.0, 0.0, 0.0, 200.0, 0.0, 0.0, 0.0, 1.0);
        let big = scale * m * scale.try_inverse().unwrap();
        let src: Vec<Point2> = (0..12)
            .map(|_| Point2::new(rng.random_range(0.0..200.0), rng.random_range(0.0..200.0)))
            .collect();
        let Some(dst) = src
            .iter()
            .map(|p| project(&big, *p).map(|q| Point2::new(q.x + noise.sample(&mut rng), q.y + noise.sample(&mut rng))))
            .collect::<Option<Vec<_>>>()
        else {
            continue;
        };
        let Ok(c) = Correspondences::new(src, dst) else { continue };
        let Ok(h) = estimate_homography(&c) else { continue };
        let refined = refine_homography(&h, &c).homography;
        assert!(refined.sse(&c) <= h.sse(&c));
    }
}

#[test]
fn degenerate_inputs_are_rejected() {
    let p = |x, y| Point2::new(x, y);
    let three = Correspondences::new(
        vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)],
        vec![p(0.0, 0.0), p(1.0, 0.0), p(0.0, 1.0)],
    );
    assert_eq!(three.unwrap_err(), GeometryError::InsufficientPoints(3));
    let line: Vec<Point2> = (0..5).map(|i| p(i as f64, 2.0 * i as f64)).collect();
    let c = Correspondences::new(line.clone(), line).unwrap();
    assert!(matches!(estimate_homography(&c), Err(GeometryError::DegenerateConfiguration(_))));
}

fn checker2() -> RgbImage {
    RgbImage::from_fn(2, 2, |x, y| if (x + y) % 2 == 0 { Rgb([0, 0, 0]) } else { Rgb([200, 100, 40]) })
}

#[test]
fn doubling_a_checkerboard_blends_at_half_pixels() {
    let src = checker2();
    let half = Homography::from_matrix(Matrix3::new(0.5, 0.0, 0.0, 0.0, 0.5, 0.0, 0.0, 0.0, 1.0)).unwrap();
    let out = warp_region(&src, &half, &Mask::full(4, 4), &RgbImage::new(4, 4));
    // Target (x, y) samples source (x/2, y/2); positions past the last
    // pixel center clamp to the edge.
    assert_eq!(out.get_pixel(0, 0), src.get_pixel(0, 0));
    assert_eq!(out.get_pixel(3, 0), src.get_pixel(1, 0));
    assert_eq!(out.get_pixel(0, 3), src.get_pixel(0, 1));
    assert_eq!(out.get_pixel(3, 3), src.get_pixel(1, 1));
    assert_eq!(out.get_pixel(2, 2), src.get_pixel(1, 1));
    // (1, 0) -> (0.5, 0): half of each horizontal neighbor, rounded half up.
    assert_eq!(out.get_pixel(1, 0), &Rgb([100, 50, 20]));
    // (1, 1) -> (0.5, 0.5): equal weights on all four.
    assert_eq!(out.get_pixel(1, 1), &Rgb([100, 50, 20]));
}

#[test]
fn constant_source_stays_constant() {
    let src = RgbImage::from_pixel(30, 20, Rgb([77, 77, 77]));
    let m = Matrix3::new(0.9, 0.1, 2.0, -0.05, 1.1, 1.0, 0.001, 0.0005, 1.0);
    let h = Homography::from_matrix(m).unwrap();
    let out = warp_region(&src, &h, &Mask::full(30, 20), &RgbImage::new(30, 20));
    for (x, y, px) in out.enumerate_pixels() {
        let inside = project(&m, Point2::new(x as f64, y as f64)).is_some_and(|q| q.x >= -0.5 && q.x <= 29.5 && q.y >= -0.5 && q.y <= 19.5);
        if inside {
            assert_eq!(px, &Rgb([77, 77, 77]));
        } else {
            assert_eq!(px, &Rgb([0, 0, 0]));
        }
    }
}

#[test]
fn one_full_part_equals_plain_warp() {
    let mut rng = item_rng(15, "geometry", "one-part");
    let src = RgbImage::from_fn(40, 40, |_, _| Rgb([rng.random(), rng.random(), rng.random()]));
    let target: Vec<Point2> = [(0.0, 0.0), (39.0, 0.0), (39.0, 39.0), (0.0, 39.0)]
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect();
    let source: Vec<Point2> = [(3.0, 2.0), (35.0, 5.0), (37.0, 36.0), (1.0, 33.0)]
        .iter()
        .map(|&(x, y)| Point2::new(x, y))
        .collect();
    let mask = Mask::full(40, 40);
    let canvas = RgbImage::new(40, 40);
    let parts = warp_parts(
        &src,
        &[WarpPart {
            name: "all".into(),
            target_points: target.clone(),
            source_points: source.clone(),
            mask: &mask,
        }],
        &canvas,
    );
    let h = clothclone::homography::fit_homography(&Correspondences::new(target, source).unwrap()).unwrap();
    assert_eq!(parts.image, warp_region(&src, &h, &mask, &canvas));
}

#[test]
fn mirrored_leg_parts_give_mirrored_output() {
    // Left-right symmetric source; the two legs use mirrored correspondences.
    let src = RgbImage::from_fn(60, 80, |x, y| {
        let m = x.min(59 - x);
        Rgb([(m * 8) as u8, (y * 3) as u8, ((m * y) % 251) as u8])
    });
    let p = |x: f64, y: f64| Point2::new(x, y);
    let right_target = vec![p(0.0, 0.0), p(29.0, 0.0), p(29.0, 79.0), p(0.0, 79.0)];
    let right_source = vec![p(4.0, 2.0), p(28.0, 6.0), p(26.0, 77.0), p(8.0, 75.0)];
    let mirror = |v: &[Point2]| v.iter().map(|q| p(59.0 - q.x, q.y)).collect::<Vec<_>>();
    let right_mask = Mask::from_rect(60, 80, &Rect::new(0, 0, 30, 80));
    let left_mask = Mask::from_rect(60, 80, &Rect::new(30, 0, 30, 80));
    let out = warp_parts(
        &src,
        &[
            WarpPart {
                name: "right-leg".into(),
                target_points: right_target.clone(),
                source_points: right_source.clone(),
                mask: &right_mask,
            },
            WarpPart {
                name: "left-leg".into(),
                target_points: mirror(&right_target),
                source_points: mirror(&right_source),
                mask: &left_mask,
            },
        ],
        &RgbImage::new(60, 80),
    );
    assert!(out.parts.iter().all(|o| o.result.is_ok()));
    for y in 0..80 {
        for x in 0..30 {
            assert_eq!(out.image.get_pixel(x, y), out.image.get_pixel(59 - x, y), "at ({x}, {y})");
        }
    }
}

#[test]
fn failed_part_is_isolated() {
    let src = RgbImage::from_pixel(20, 20, Rgb([9, 99, 199]));
    let p = |x: f64, y: f64| Point2::new(x, y);
    let a = Mask::from_rect(20, 20, &Rect::new(0, 0, 10, 20));
    let b = Mask::from_rect(20, 20, &Rect::new(10, 0, 10, 20));
    let quad = vec![p(0.0, 0.0), p(9.0, 0.0), p(9.0, 19.0), p(0.0, 19.0)];
    let canvas = RgbImage::from_pixel(20, 20, Rgb([1, 2, 3]));
    let out = warp_parts(
        &src,
        &[
            WarpPart {
                name: "good".into(),
                target_points: quad.clone(),
                source_points: quad.clone(),
                mask: &a,
            },
            WarpPart {
                name: "three".into(),
                target_points: quad[..3].to_vec(),
                source_points: quad[..3].to_vec(),
                mask: &b,
            },
        ],
        &canvas,
    );
    assert!(out.parts[0].result.is_ok());
    assert_eq!(out.parts[1].result, Err(GeometryError::InsufficientPoints(3)));
    assert_eq!(out.image.get_pixel(3, 3), &Rgb([9, 99, 199]));
    assert_eq!(out.image.get_pixel(15, 3), &Rgb([0, 0, 0]));
}

fn arb_image() -> impl Strategy<Value = RgbImage> {
    (2u32..24, 2u32..24, any::<u64>()).prop_map(|(w, h, seed)| {
        let mut rng = item_rng(seed, "geometry", "image");
        RgbImage::from_fn(w, h, |_, _| Rgb([rng.random(), rng.random(), rng.random()]))
    })
}

proptest! {
    #[test]
    fn identity_warp_is_bit_exact(src in arb_image()) {
        let (w, h) = src.dimensions();
        let out = warp_region(&src, &Homography::identity(), &Mask::full(w, h), &RgbImage::new(w, h));
        prop_assert_eq!(out, src);
    }

    #[test]
    fn warp_stays_within_source_range(src in arb_image(), a in -0.3f64..0.3, b in -0.3f64..0.3, g in -0.01f64..0.01) {
        let (w, h) = src.dimensions();
        let m = Matrix3::new(1.0 + a, b, 1.5, -b, 1.0 - a, -0.5, g, 0.0, 1.0);
        let hm = Homography::from_matrix(m).unwrap();
        // Fill value inside the source range so only sampled values matter.
        let (lo, hi) = value_range(&src);
        let out = warp_region(&src, &hm, &Mask::full(w, h), &RgbImage::from_pixel(w, h, Rgb(lo)));
        for (x, y, px) in out.enumerate_pixels() {
            let sampled = project(&m, Point2::new(x as f64, y as f64))
                .is_some_and(|q| q.x >= -0.5 && q.x <= w as f64 - 0.5 && q.y >= -0.5 && q.y <= h as f64 - 0.5);
            if sampled {
                for c in 0..3 {
                    prop_assert!(px[c] >= lo[c] && px[c] <= hi[c]);
                }
            }
        }
    }

    #[test]
    fn warp_is_deterministic(src in arb_image(), a in -0.3f64..0.3) {
        let (w, h) = src.dimensions();
        let hm = Homography::from_matrix(Matrix3::new(1.0 + a, 0.1, 0.3, 0.0, 1.0, 0.2, 0.0, 0.002, 1.0)).unwrap();
        let mask = Mask::full(w, h);
        let first = warp_region(&src, &hm, &mask, &RgbImage::new(w, h));
        prop_assert_eq!(first, warp_region(&src, &hm, &mask, &RgbImage::new(w, h)));
    }
}
