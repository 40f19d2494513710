use lsynth::lsystem::SymbolString;
use lsynth::render::{decode_image, encode_image, render, Camera, Light, OrganIdBuffer, RasterImage};
use lsynth::turtle::{interpret, Material, Mesh, OrganKind, Scene, Triangle, TurtleConfig, Vec3};
use proptest::prelude::*;

const MAGENTA: [u8; 3] = [255, 0, 255];

fn top_camera(res: u32) -> Camera {
    // world x, y in [-1, 1] map onto the whole viewport
    Camera::orthographic(Vec3::new(0.0, 0.0, 10.0), Vec3::ZERO, Vec3::Y, 2.0, res, res)
}

fn light() -> Light {
    Light {
        background: MAGENTA,
        ..Light::default()
    }
}

fn tri(a: [f64; 3], b: [f64; 3], c: [f64; 3]) -> Triangle {
    Triangle {
        v: [Vec3::new(a[0], a[1], a[2]), Vec3::new(b[0], b[1], b[2]), Vec3::new(c[0], c[1], c[2])],
        uv: [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]],
    }
}

fn quad(id: u32, x0: f64, y0: f64, x1: f64, y1: f64, z: f64) -> Mesh {
    Mesh {
        organ_id: id,
        kind: OrganKind::Leaf,
        triangles: vec![
            tri([x0, y0, z], [x1, y0, z], [x1, y1, z]),
            tri([x0, y0, z], [x1, y1, z], [x0, y1, z]),
        ],
        material: Material::Flat { color: [60, 140, 50] },
        origin: Vec3::ZERO,
        heading: Vec3::X,
    }
}

fn scene(meshes: Vec<Mesh>) -> Scene {
    Scene {
        meshes,
        ..Scene::default()
    }
}

#[test]
fn empty_scene_is_all_background() {
    let (img, ids) = render(&Scene::default(), &top_camera(32), &light()).unwrap();
    assert!(img.pixels.chunks(3).all(|p| p == MAGENTA));
    assert!(ids.ids.iter().all(|&i| i == 0));
    assert_eq!(img.pixels.len(), 32 * 32 * 3);
}

#[test]
fn left_half_square_covers_exactly_half() {
    for res in [16u32, 64, 256] {
        let s = scene(vec![quad(7, -1.0, -1.0, 0.0, 1.0, 0.0)]);
        let (_, ids) = render(&s, &top_camera(res), &light()).unwrap();
        assert_eq!(ids.count(7), (res / 2 * res) as usize, "res {res}");
        for y in 0..res {
            for x in 0..res {
                assert_eq!(ids.get(x, y) == 7, x < res / 2);
            }
        }
    }
}

#[test]
fn shared_diagonal_is_filled_once() {
    // the diagonal runs through pixel centres, so only the fill rule decides
    let res = 64;
    let a = scene(vec![Mesh {
        triangles: vec![tri([-1.0, -1.0, 0.0], [1.0, -1.0, 0.0], [1.0, 1.0, 0.0])],
        ..quad(1, 0.0, 0.0, 0.0, 0.0, 0.0)
    }]);
    let b = scene(vec![Mesh {
        triangles: vec![tri([-1.0, -1.0, 0.0], [1.0, 1.0, 0.0], [-1.0, 1.0, 0.0])],
        ..quad(2, 0.0, 0.0, 0.0, 0.0, 0.0)
    }]);
    let (_, ia) = render(&a, &top_camera(res), &light()).unwrap();
    let (_, ib) = render(&b, &top_camera(res), &light()).unwrap();
    assert_eq!(ia.count(1) + ib.count(2), (res * res) as usize);
    assert!(ia.ids.iter().zip(&ib.ids).all(|(&p, &q)| (p == 0) != (q == 0)));
}

#[test]
fn occluded_count_matches_composition() {
    let cam = top_camera(128);
    let near = quad(1, -0.6, -0.5, 0.3, 0.4, 1.0);
    let far = quad(2, -0.1, -0.8, 0.8, 0.2, 0.0);
    let (_, solo_a) = render(&scene(vec![near.clone()]), &cam, &light()).unwrap();
    let (_, solo_b) = render(&scene(vec![far.clone()]), &cam, &light()).unwrap();
    let overlap = solo_a.ids.iter().zip(&solo_b.ids).filter(|(&a, &b)| a != 0 && b != 0).count();
    assert!(overlap > 0);
    for order in [vec![near.clone(), far.clone()], vec![far, near]] {
        let (_, both) = render(&scene(order), &cam, &light()).unwrap();
        assert_eq!(both.count(2), solo_b.count(2) - overlap);
        assert_eq!(both.count(1), solo_a.count(1));
    }
}

#[test]
fn zero_area_viewport_is_rejected() {
    let mut cam = top_camera(32);
    cam.projection = lsynth::render::Projection::Orthographic { extent: 0.0 };
    assert!(render(&Scene::default(), &cam, &light()).is_err());
    let mut cam = top_camera(32);
    cam.width = 8;
    assert!(render(&Scene::default(), &cam, &light()).is_err());
    let mut cam = top_camera(32);
    cam.look_at = cam.position;
    assert!(render(&Scene::default(), &cam, &light()).is_err());
}

#[test]
fn non_finite_vertices_are_rejected() {
    let s = scene(vec![quad(1, -0.5, -0.5, f64::NAN, 0.5, 0.0)]);
    assert!(render(&s, &top_camera(32), &light()).is_err());
}

#[test]
fn unknown_texture_is_an_error_and_builtin_resolves() {
    let mut m = quad(1, -0.5, -0.5, 0.5, 0.5, 0.0);
    m.material = Material::Texture { name: "no_such".into() };
    assert!(render(&scene(vec![m.clone()]), &top_camera(32), &light()).is_err());
    m.material = Material::Texture { name: "canola_leaf".into() };
    let (img, ids) = render(&scene(vec![m]), &top_camera(64), &light()).unwrap();
    assert!(ids.count(1) > 0);
    let colors: std::collections::BTreeSet<_> = img.pixels.chunks(3).map(|p| p.to_vec()).collect();
    assert!(colors.len() > 4, "texture should vary across the blade");
}

#[test]
fn perspective_skips_geometry_behind_the_camera() {
    let cam = Camera::perspective(Vec3::new(0.0, 0.0, 5.0), Vec3::ZERO, Vec3::Y, 40.0, 64, 64);
    let front = quad(1, -0.5, -0.5, 0.5, 0.5, 0.0);
    let behind = quad(2, -0.5, -0.5, 0.5, 0.5, 8.0);
    let (_, ids) = render(&scene(vec![front, behind]), &cam, &light()).unwrap();
    assert_eq!(ids.get(32, 32), 1);
    assert_eq!(ids.count(2), 0);
}

#[test]
fn visible_area_scales_quadratically() {
    // a hexagonal convex organ
    let c = [0.1, -0.05, 0.0];
    let pts: Vec<[f64; 3]> = (0..6)
        .map(|k| {
            let a = std::f64::consts::TAU * k as f64 / 6.0 + 0.2;
            [c[0] + 0.55 * a.cos(), c[1] + 0.4 * a.sin(), 0.0]
        })
        .collect();
    let tris = (0..6).map(|k| tri(c, pts[k], pts[(k + 1) % 6])).collect();
    let s = scene(vec![Mesh {
        triangles: tris,
        ..quad(3, 0.0, 0.0, 0.0, 0.0, 0.0)
    }]);
    let (_, small) = render(&s, &top_camera(128), &light()).unwrap();
    let (_, large) = render(&s, &top_camera(256), &light()).unwrap();
    let ratio = large.count(3) as f64 / small.count(3) as f64;
    assert!((ratio / 4.0 - 1.0).abs() < 0.1, "ratio {ratio}");
}

fn small_plant() -> Scene {
    let s: SymbolString = "!(0.06)F(0.5)[&(50)Leaf(0.9,0.2,40)]/(180)F(0.4)[&(50)Leaf(0.8,0.18,40)]F(0.3)[&(30)Flower(0.15)]"
        .parse()
        .unwrap();
    interpret(&s, &TurtleConfig::default()).unwrap()
}

fn side_camera(res: u32) -> Camera {
    Camera::orthographic(Vec3::new(10.0, 0.0, 0.8), Vec3::new(0.0, 0.0, 0.8), Vec3::Z, 2.0, res, res)
}

#[test]
fn foreground_iff_not_background_color() {
    let (img, ids) = render(&small_plant(), &side_camera(128), &light()).unwrap();
    let mut fg = 0;
    for y in 0..img.height {
        for x in 0..img.width {
            let is_bg = img.get(x, y) == MAGENTA;
            assert_eq!(ids.get(x, y) == 0, is_bg, "pixel {x},{y}");
            fg += usize::from(!is_bg);
        }
    }
    assert!(fg > 100);
}

#[test]
fn png_round_trip_and_determinism() {
    let white = RasterImage::filled(2, 2, [255, 255, 255]);
    assert_eq!(decode_image(&encode_image(&white).unwrap()).unwrap().pixels, white.pixels);

    let (a, ia) = render(&small_plant(), &side_camera(256), &light()).unwrap();
    let (b, ib) = render(&small_plant(), &side_camera(256), &light()).unwrap();
    let (pa, pb) = (encode_image(&a).unwrap(), encode_image(&b).unwrap());
    assert_eq!(pa, pb);
    assert!(pa.len() < 1 << 20);
    assert_eq!(decode_image(&pa).unwrap().pixels, a.pixels);
    assert_eq!(ia, ib);
    let dump = ia.encode_png16().unwrap();
    assert!(dump.starts_with(b"\x89PNG"));
}

fn in_triangle(t: &Triangle, x: f64, y: f64) -> Option<(f64, f64)> {
    // returns (depth along +z, distance margin to the nearest edge)
    let [a, b, c] = t.v;
    let d = (b.y - c.y) * (a.x - c.x) + (c.x - b.x) * (a.y - c.y);
    if d.abs() < 1e-9 {
        return None;
    }
    let l0 = ((b.y - c.y) * (x - c.x) + (c.x - b.x) * (y - c.y)) / d;
    let l1 = ((c.y - a.y) * (x - c.x) + (a.x - c.x) * (y - c.y)) / d;
    let l2 = 1.0 - l0 - l1;
    let m = l0.min(l1).min(l2);
    Some((l0 * a.z + l1 * b.z + l2 * c.z, m))
}

fn brute_force(tris: &[(u32, Triangle)], res: u32) -> Vec<Option<u32>> {
    // None marks pixels whose centre is too close to an edge to call
    let mut out = Vec::new();
    for py in 0..res {
        for px in 0..res {
            let x = (px as f64 + 0.5) / res as f64 * 2.0 - 1.0;
            let y = 1.0 - (py as f64 + 0.5) / res as f64 * 2.0;
            let mut best: Option<(f64, u32)> = None;
            let mut ambiguous = false;
            for (id, t) in tris {
                if let Some((z, m)) = in_triangle(t, x, y) {
                    if m.abs() < 1e-6 {
                        ambiguous = true;
                    } else if m > 0.0 && best.is_none_or(|(bz, _)| z > bz) {
                        best = Some((z, *id));
                    }
                }
            }
            out.push(if ambiguous { None } else { Some(best.map_or(0, |b| b.1)) });
        }
    }
    out
}

fn arb_triangle(z_lo: f64) -> impl Strategy<Value = Triangle> {
    prop::array::uniform9(0.0f64..1.0).prop_map(move |r| {
        tri(
            [r[0] * 2.0 - 1.0, r[1] * 2.0 - 1.0, z_lo + r[2]],
            [r[3] * 2.0 - 1.0, r[4] * 2.0 - 1.0, z_lo + r[5]],
            [r[6] * 2.0 - 1.0, r[7] * 2.0 - 1.0, z_lo + r[8]],
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nearer_triangle_wins(far in arb_triangle(0.0), near in arb_triangle(2.0), near_first in any::<bool>()) {
        let res = 32;
        let tris = [(1u32, far), (2u32, near)];
        let meshes: Vec<Mesh> = tris
            .iter()
            .map(|(id, t)| Mesh { triangles: vec![*t], ..quad(*id, 0.0, 0.0, 0.0, 0.0, 0.0) })
            .collect();
        let meshes = if near_first { meshes.into_iter().rev().collect() } else { meshes };
        let (_, ids): (_, OrganIdBuffer) = render(&scene(meshes), &top_camera(res), &light()).unwrap();
        let oracle = brute_force(&tris, res);
        for (i, expect) in oracle.iter().enumerate() {
            if let Some(e) = expect {
                prop_assert_eq!(ids.ids[i], *e, "pixel {}", i);
            }
        }
    }
}
