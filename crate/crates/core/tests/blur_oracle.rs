use image::{Rgb, RgbImage};
use inplace_aug::annotations::BoundingBox;
use inplace_aug::geometry::BitMask;
use inplace_aug::roi::{blur_outside, blur_outside_mask, compute_roi, gaussian_blur, RoiMode};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn checkerboard(size: u32, cell: u32) -> RgbImage {
    RgbImage::from_fn(size, size, |x, y| {
        if ((x / cell) + (y / cell)).is_multiple_of(2) {
            Rgb([255, 0, 128])
        } else {
            Rgb([0, 255, 32])
        }
    })
}

/// Full 2-D convolution with an unnormalised exp weight, clamped edges.
fn direct_blur(img: &RgbImage, sigma: f64) -> RgbImage {
    let r = (3.0 * sigma).ceil() as i64;
    let (w, h) = (img.width() as i64, img.height() as i64);
    RgbImage::from_fn(img.width(), img.height(), |x, y| {
        let mut acc = [0.0f64; 3];
        let mut norm = 0.0;
        for dy in -r..=r {
            for dx in -r..=r {
                let wt = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma * sigma)).exp();
                let sx = (x as i64 + dx).clamp(0, w - 1) as u32;
                let sy = (y as i64 + dy).clamp(0, h - 1) as u32;
                let p = img.get_pixel(sx, sy);
                for c in 0..3 {
                    acc[c] += wt * p[c] as f64;
                }
                norm += wt;
            }
        }
        Rgb(acc.map(|v| (v / norm).round() as u8))
    })
}

#[test]
fn separable_blur_matches_direct_convolution() {
    for sigma in [0.8, 1.5, 3.0] {
        let img = checkerboard(16, 2);
        let fast = gaussian_blur(&img, sigma);
        let slow = direct_blur(&img, sigma);
        for (a, b) in fast.pixels().zip(slow.pixels()) {
            for c in 0..3 {
                assert!(
                    (a[c] as i32 - b[c] as i32).abs() <= 1,
                    "sigma {sigma}: {a:?} vs {b:?}"
                );
            }
        }
    }
}

#[test]
fn inside_is_preserved_and_outside_is_blurred() {
    let img = checkerboard(16, 2);
    let mut mask = BitMask::new(16, 16);
    mask.fill_box(&BoundingBox::new(4.0, 4.0, 6.0, 5.0));
    let out = blur_outside_mask(&img, &mask, 1.5).unwrap();
    let blurred = gaussian_blur(&img, 1.5);
    let mut changed_outside = 0;
    for (x, y, p) in out.enumerate_pixels() {
        if mask.get(x, y) {
            assert_eq!(p, img.get_pixel(x, y));
        } else {
            assert_eq!(p, blurred.get_pixel(x, y));
            if p != img.get_pixel(x, y) {
                changed_outside += 1;
            }
        }
    }
    assert!(changed_outside > 0);
    assert_eq!(mask.count_ones(), 30);
}

#[test]
fn blurring_twice_keeps_the_region() {
    let img = checkerboard(24, 3);
    let roi = compute_roi(
        "c",
        &[
            BoundingBox::new(3.0, 5.0, 7.0, 4.0),
            BoundingBox::new(12.0, 14.0, 6.0, 6.0),
        ],
        24,
        24,
        RoiMode::ConvexHull,
        1,
    )
    .unwrap();
    let mask = roi.mask();
    let once = blur_outside(&img, &roi, 2.0).unwrap();
    let twice = blur_outside(&once, &roi, 2.0).unwrap();
    for (x, y, p) in twice.enumerate_pixels() {
        if mask.get(x, y) {
            assert_eq!(p, img.get_pixel(x, y));
            assert_eq!(p, once.get_pixel(x, y));
        }
    }
}

#[test]
fn full_mask_is_identity() {
    let img = checkerboard(10, 1);
    let out = blur_outside_mask(&img, &BitMask::filled(10, 10), 9.0).unwrap();
    assert_eq!(out, img);
}

#[test]
fn every_annotation_pixel_survives_hull_blur() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let (w, h) = (96u32, 80u32);
    let img = RgbImage::from_fn(w, h, |_, _| Rgb([rng.gen(), rng.gen(), rng.gen()]));
    for round in 0..5 {
        let boxes: Vec<BoundingBox> = (0..50)
            .map(|_| {
                let bw = rng.gen_range(1.0..20.0f64);
                let bh = rng.gen_range(1.0..20.0f64);
                BoundingBox::new(
                    rng.gen_range(0.0..w as f64 - bw),
                    rng.gen_range(0.0..h as f64 - bh),
                    bw,
                    bh,
                )
            })
            .collect();
        let roi = compute_roi("cam", &boxes, w, h, RoiMode::ConvexHull, 0).unwrap();
        let poly = roi.polygon.as_ref().unwrap();
        for b in &boxes {
            for c in b.corners() {
                assert!(
                    poly.contains(c.into()),
                    "round {round}: corner {c:?} outside hull"
                );
            }
        }
        let mask = roi.mask();
        let out = blur_outside(&img, &roi, 3.0).unwrap();
        for b in &boxes {
            // pixels whose centres fall inside the box
            let x0 = (b.x - 0.5).ceil().max(0.0) as u32;
            let y0 = (b.y - 0.5).ceil().max(0.0) as u32;
            let x1 = ((b.x + b.w - 0.5).floor() as i64).min(w as i64 - 1);
            let y1 = ((b.y + b.h - 0.5).floor() as i64).min(h as i64 - 1);
            for y in y0 as i64..=y1 {
                for x in x0 as i64..=x1 {
                    let (x, y) = (x as u32, y as u32);
                    assert!(mask.get(x, y));
                    assert_eq!(out.get_pixel(x, y), img.get_pixel(x, y));
                }
            }
        }
    }
}

#[test]
fn union_mode_keeps_only_boxes() {
    let img = checkerboard(20, 1);
    let boxes = [
        BoundingBox::new(0.0, 0.0, 4.0, 4.0),
        BoundingBox::new(10.0, 10.0, 5.0, 3.0),
    ];
    let roi = compute_roi("c", &boxes, 20, 20, RoiMode::BoxUnion, 0).unwrap();
    assert_eq!(roi.mask().count_ones(), 16 + 15);
    let out = blur_outside(&img, &roi, 1.0).unwrap();
    assert_eq!(out.get_pixel(1, 1), img.get_pixel(1, 1));
    assert_ne!(out.get_pixel(7, 7), img.get_pixel(7, 7));
}

#[test]
fn mismatched_frame_size_is_rejected() {
    let roi = compute_roi(
        "c",
        &[BoundingBox::new(1.0, 1.0, 2.0, 2.0)],
        20,
        20,
        RoiMode::BoxUnion,
        0,
    )
    .unwrap();
    let err = blur_outside(&checkerboard(16, 2), &roi, 1.0).unwrap_err();
    assert!(err.to_string().contains("20x20"));
}
