use lsynth::models::maize_preset;
use lsynth::models::sample_plant;
use lsynth::preprocess::*;
use lsynth::render::{render, Camera, Light, RasterImage};
use lsynth::turtle::{interpret, Material, Mesh, OrganKind, Scene, Triangle, Vec3};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn gray(width: u32, height: u32, pixels: Vec<u8>) -> GrayImage {
    GrayImage { width, height, pixels }
}

#[test]
fn background_subtraction() {
    let bg = RasterImage::filled(8, 4, [90, 90, 90]);
    let same = subtract_background(&bg, &BackgroundRef::Image(bg.clone()), 5).unwrap();
    assert!(same.pixels.iter().all(|&v| v == 0));

    let mut one = bg.clone();
    one.set(3, 2, [90, 140, 90]);
    let fg = subtract_background(&one, &BackgroundRef::Color([90, 90, 90]), 5).unwrap();
    for y in 0..4 {
        for x in 0..8 {
            let expect = if (x, y) == (3, 2) { [90, 140, 90] } else { [0, 0, 0] };
            assert_eq!(fg.get(x, y), expect);
        }
    }

    // 1-bit noise everywhere survives tol 0 and is removed at tol 1
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut noisy = bg.clone();
    for px in noisy.pixels.chunks_exact_mut(3) {
        let c = rng.random_range(0..3);
        px[c] ^= 1;
    }
    let kept = subtract_background(&noisy, &BackgroundRef::Image(bg.clone()), 0).unwrap();
    assert_eq!(kept.pixels, noisy.pixels);
    let gone = subtract_background(&noisy, &BackgroundRef::Image(bg.clone()), 1).unwrap();
    assert!(gone.pixels.iter().all(|&v| v == 0));

    let small = RasterImage::filled(4, 4, [0, 0, 0]);
    assert!(subtract_background(&small, &BackgroundRef::Image(bg), 3).is_err());
}

#[test]
fn grayscale_modes() {
    let img = RasterImage::from_pixels(2, 1, vec![10, 20, 31, 255, 255, 255], [0, 0, 0]).unwrap();
    assert_eq!(grayscale(&img, Grayscale::Mean).pixels, vec![20, 255]);
    assert_eq!(grayscale(&img, Grayscale::Luma).pixels, vec![18, 255]);
}

#[test]
fn otsu_simple_cases() {
    let half = gray(4, 2, vec![0, 0, 0, 0, 255, 255, 255, 255]);
    let (t, mask) = otsu_threshold(&half);
    assert_eq!(t, 0, "every split between the modes ties, lowest wins");
    assert_eq!(mask.bits, half.pixels.iter().map(|&p| p == 255).collect::<Vec<_>>());

    let flat = gray(3, 3, vec![77; 9]);
    let (t, mask) = otsu_threshold(&flat);
    assert_eq!((t, mask.count()), (77, 0));

    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let px: Vec<u8> = (0..400)
        .map(|i| {
            let c: i32 = if i % 3 == 0 { 200 } else { 50 };
            (c + rng.random_range(-5..=5)) as u8
        })
        .collect();
    let (t, _) = otsu_threshold(&gray(20, 20, px));
    assert_eq!(t, 55, "all gaps tie, lowest wins");
}

/// Textbook Otsu in floating point: weights, class means, scan all t.
fn otsu_oracle(pixels: &[u8]) -> Vec<f64> {
    let n = pixels.len() as f64;
    (0..256)
        .map(|t| {
            let (lo, hi): (Vec<f64>, Vec<f64>) = {
                let lo: Vec<f64> = pixels.iter().filter(|&&p| p as usize <= t).map(|&p| p as f64).collect();
                let hi: Vec<f64> = pixels.iter().filter(|&&p| p as usize > t).map(|&p| p as f64).collect();
                (lo, hi)
            };
            if lo.is_empty() || hi.is_empty() {
                return f64::NEG_INFINITY;
            }
            let m0 = lo.iter().sum::<f64>() / lo.len() as f64;
            let m1 = hi.iter().sum::<f64>() / hi.len() as f64;
            (lo.len() as f64 / n) * (hi.len() as f64 / n) * (m0 - m1).powi(2)
        })
        .collect()
}

#[test]
fn otsu_matches_exhaustive_scan_on_random_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for case in 0..50 {
        let (w, h) = (rng.random_range(1..40), rng.random_range(1..40));
        let modes: Vec<(f64, f64)> = (0..rng.random_range(1..4))
            .map(|_| (rng.random_range(0.0..255.0), rng.random_range(0.5..40.0)))
            .collect();
        let pixels: Vec<u8> = (0..w * h)
            .map(|_| {
                let (m, s) = modes[rng.random_range(0..modes.len())];
                let z: f64 = rng.sample(rand_distr::StandardNormal);
                (m + s * z).round().clamp(0.0, 255.0) as u8
            })
            .collect();
        let img = gray(w, h, pixels.clone());
        let (t, mask) = otsu_threshold(&img);
        let var = otsu_oracle(&pixels);
        let best = var.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        if best == f64::NEG_INFINITY {
            assert_eq!(t, pixels[0], "case {case}: uniform image");
        } else {
            let first = var.iter().position(|&v| v >= best * (1.0 - 1e-12)).unwrap();
            assert_eq!(t as usize, first, "case {case}");
        }
        assert_eq!(mask.bits, pixels.iter().map(|&p| p > t).collect::<Vec<_>>());
    }
}

#[test]
fn excess_green_values() {
    let img = RasterImage::from_pixels(3, 1, vec![50, 100, 30, 77, 77, 77, 0, 0, 0], [0, 0, 0]).unwrap();
    assert_eq!(excess_green(&img), vec![120, 0, 0]);
}

proptest! {
    #[test]
    fn excess_green_ignores_uniform_offset(px in prop::collection::vec(0u8..=200, 3..60), c in 0u8..=55) {
        let n = px.len() / 3 * 3;
        let img = RasterImage::from_pixels((n / 3) as u32, 1, px[..n].to_vec(), [0, 0, 0]).unwrap();
        let shifted = RasterImage::from_pixels((n / 3) as u32, 1, px[..n].iter().map(|v| v + c).collect(), [0, 0, 0]).unwrap();
        prop_assert_eq!(excess_green(&img), excess_green(&shifted));
    }

    #[test]
    fn gray_images_have_zero_excess_green(vals in prop::collection::vec(any::<u8>(), 1..50)) {
        let px: Vec<u8> = vals.iter().flat_map(|&v| [v, v, v]).collect();
        let img = RasterImage::from_pixels(vals.len() as u32, 1, px, [0, 0, 0]).unwrap();
        prop_assert!(excess_green(&img).iter().all(|&e| e == 0));
    }
}

fn mask_from(width: u32, height: u32, on: &[(u32, u32)]) -> BinaryMask {
    let mut m = BinaryMask::empty(width, height);
    for &(x, y) in on {
        m.bits[(y * width + x) as usize] = true;
    }
    m
}

#[test]
fn hull_area_small_cases() {
    assert_eq!(convex_hull_area(&BinaryMask::empty(5, 5)), 0.0);
    assert_eq!(convex_hull_area(&mask_from(5, 5, &[(2, 2)])), 0.0);
    assert_eq!(convex_hull_area(&mask_from(5, 5, &[(0, 0), (1, 1), (2, 2)])), 0.0);
    assert_eq!(convex_hull_area(&mask_from(5, 5, &[(1, 1), (2, 1), (1, 2), (2, 2)])), 1.0);
    assert_eq!(convex_hull_area(&mask_from(5, 5, &[(0, 0), (4, 0), (0, 3)])), 6.0);
}

/// Jarvis march over every foreground point, then shoelace.
fn hull_area_oracle(m: &BinaryMask) -> f64 {
    let pts: Vec<(i64, i64)> = m.points().collect();
    if pts.len() < 3 {
        return 0.0;
    }
    let cross = |o: (i64, i64), a: (i64, i64), b: (i64, i64)| (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0);
    let d2 = |a: (i64, i64), b: (i64, i64)| (a.0 - b.0).pow(2) + (a.1 - b.1).pow(2);
    let start = *pts.iter().min().unwrap();
    let mut hull = vec![start];
    let mut cur = start;
    loop {
        let mut next = pts[0];
        for &p in &pts {
            if next == cur {
                next = p;
                continue;
            }
            let c = cross(cur, next, p);
            if c < 0 || (c == 0 && d2(cur, p) > d2(cur, next)) {
                next = p;
            }
        }
        if next == start {
            break;
        }
        hull.push(next);
        cur = next;
        if hull.len() > pts.len() {
            break;
        }
    }
    let twice: i64 = (0..hull.len())
        .map(|i| {
            let (a, b) = (hull[i], hull[(i + 1) % hull.len()]);
            a.0 * b.1 - b.0 * a.1
        })
        .sum();
    twice.abs() as f64 / 2.0
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 { a.abs() } else { gcd(b, a % b) }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn hull_area_matches_oracle_and_is_monotone(on in prop::collection::vec((0u32..12, 0u32..10), 0..25), extra in (0u32..12, 0u32..10)) {
        let m = mask_from(12, 10, &on);
        let area = convex_hull_area(&m);
        prop_assert_eq!(area, hull_area_oracle(&m));

        let mut bigger = on.clone();
        bigger.push(extra);
        prop_assert!(convex_hull_area(&mask_from(12, 10, &bigger)) >= area);

        // Pick: every pixel centre lies in the hull, so count <= I + B = A + B/2 + 1
        let hull = convex_hull(&m);
        if hull.len() >= 3 {
            let b: i64 = (0..hull.len()).map(|i| {
                let (p, q) = (hull[i], hull[(i + 1) % hull.len()]);
                gcd(q.0 - p.0, q.1 - p.1)
            }).sum();
            prop_assert!(m.count() as f64 <= area + b as f64 / 2.0 + 1.0);
        }
    }
}

#[test]
fn mask_png_round_trip() {
    let m = mask_from(13, 3, &[(0, 0), (12, 0), (5, 1), (8, 2)]);
    let bytes = m.encode_png().unwrap();
    assert_eq!(BinaryMask::decode_png(&bytes).unwrap(), m);
}

const BG: [u8; 3] = [128, 128, 128];

fn flat(id: u32, pts: &[(f64, f64)], color: [u8; 3]) -> Mesh {
    let v: Vec<Vec3> = pts.iter().map(|&(x, y)| Vec3::new(x, y, 0.0)).collect();
    Mesh {
        organ_id: id,
        kind: OrganKind::Leaf,
        triangles: (1..v.len() - 1)
            .map(|i| Triangle { v: [v[0], v[i], v[i + 1]], uv: [[0.0; 2]; 3] })
            .collect(),
        material: Material::Flat { color },
        origin: Vec3::ZERO,
        heading: Vec3::X,
    }
}

fn shot(meshes: Vec<Mesh>) -> RasterImage {
    let scene = Scene { meshes, ..Scene::default() };
    let cam = Camera::orthographic(Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO, Vec3::Y, 2.0, 64, 64);
    let light = Light { direction: Vec3::new(0.0, 0.0, -1.0), background: BG, ..Light::default() };
    render(&scene, &cam, &light).unwrap().0
}

#[test]
fn segmentation_excludes_red_and_empty_scenes() {
    let opts = SegmentOptions::default();
    let bg = BackgroundRef::Color(BG);
    let empty = shot(vec![]);
    assert_eq!(segment_plant(&empty, &bg, &opts).unwrap().count(), 0);

    let red = flat(1, &[(-0.5, -0.5), (0.0, -0.5), (0.0, 0.5), (-0.5, 0.5)], [200, 40, 40]);
    let green = flat(2, &[(0.2, -0.5), (0.7, -0.5), (0.7, 0.5), (0.2, 0.5)], [60, 160, 50]);
    let img = shot(vec![red, green.clone()]);
    let mask = segment_plant(&img, &bg, &opts).unwrap();
    let green_only = segment_plant(&shot(vec![green]), &bg, &opts).unwrap();
    assert!(mask.count() > 100);
    assert_eq!(mask, green_only);
}

#[test]
fn segmentation_recovers_rendered_silhouette() {
    let maize = maize_preset();
    let light = Light { background: BG, ..Light::default() };
    for seed in [3, 17] {
        let plant = sample_plant(&maize, seed).unwrap();
        let scene = interpret(plant.day(24).unwrap(), &maize.turtle_config()).unwrap();
        let (img, ids) = render(&scene, &maize.camera(256, 256), &light).unwrap();
        let truth = BinaryMask { width: 256, height: 256, bits: ids.ids.iter().map(|&i| i != 0).collect() };
        let mask = segment_plant(&img, &BackgroundRef::Color(BG), &SegmentOptions::default()).unwrap();
        let iou = mask.iou(&truth).unwrap();
        assert!(iou >= 0.95, "seed {seed}: IoU {iou}");
    }
}

#[test]
fn best_view_selection() {
    let bg = BackgroundRef::Color(BG);
    let opts = SegmentOptions::default();
    let big = shot(vec![flat(1, &[(-0.6, -0.6), (0.6, -0.6), (0.6, 0.6)], [60, 160, 50])]);
    let small = shot(vec![flat(1, &[(-0.2, -0.2), (0.2, -0.2), (0.2, 0.2)], [60, 160, 50])]);
    let empty = shot(vec![]);
    let area = |i: &RasterImage| convex_hull_area(&segment_plant(i, &bg, &opts).unwrap());
    assert!(area(&big) > area(&small));
    let (i, areas) = select_best_view([&big, &small], [&bg, &bg], &opts).unwrap();
    assert_eq!((i, areas), (0, [area(&big), area(&small)]));
    assert_eq!(select_best_view([&small, &big], [&bg, &bg], &opts).unwrap().0, 1);
    assert_eq!(select_best_view([&small, &small], [&bg, &bg], &opts).unwrap().0, 0);
    assert_eq!(select_best_view([&empty, &small], [&bg, &bg], &opts).unwrap().0, 1);
    assert_eq!(select_best_view([&small, &empty], [&bg, &bg], &opts).unwrap().0, 0);
}
