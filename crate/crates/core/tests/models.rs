use std::collections::BTreeMap;

use lsynth::lsystem::{ModuleSymbol, SymbolString};
use lsynth::metrics::total_variation;
use lsynth::models::*;
use lsynth::turtle::{interpret, Material};

fn azimuth_gaps(preset: &PlantModelPreset, seed: u64) -> Vec<f64> {
    let plant = sample_plant(preset, seed).unwrap();
    let scene = interpret(plant.day(preset.timeline).unwrap(), &preset.turtle_config()).unwrap();
    let az = leaf_azimuths(&scene);
    az.windows(2).map(|w| (w[1] - w[0]).rem_euclid(360.0)).collect()
}

#[test]
fn maize_leaves_alternate_by_half_turn() {
    let maize = maize_preset();
    for seed in 0..100 {
        let gaps = azimuth_gaps(&maize, seed);
        assert!(gaps.len() >= 5, "seed {seed}: only {} leaves", gaps.len() + 1);
        for g in gaps {
            assert!((g - 180.0).abs() <= 1e-6, "seed {seed}: gap {g}");
        }
    }
}

#[test]
fn maize_leaf_count_is_nondecreasing_and_starts_at_zero() {
    let maize = maize_preset();
    assert_eq!(maize.timeline, 27);
    for seed in 0..20 {
        let p = sample_plant(&maize, seed).unwrap();
        assert_eq!(p.topology.len(), 27);
        assert_eq!(p.topology_on(1).unwrap().leaves, 0);
        let leaves: Vec<usize> = p.topology.iter().map(|t| t.leaves).collect();
        assert!(leaves.windows(2).all(|w| w[0] <= w[1]), "{leaves:?}");
        assert!(*leaves.last().unwrap() >= 8);
    }
}

#[test]
fn maize_seeds_differ_in_size_not_phyllotaxy() {
    let maize = maize_preset();
    let a = sample_plant(&maize, 1).unwrap();
    let b = sample_plant(&maize, 2).unwrap();
    assert_ne!(a.params, b.params);
    assert_ne!(a.days.last(), b.days.last());
    assert_eq!(azimuth_gaps(&maize, 1)[0], azimuth_gaps(&maize, 2)[0]);
}

#[test]
fn zero_variance_makes_seeds_irrelevant() {
    for mut preset in [maize_preset(), canola_preset(3).unwrap()] {
        let names: Vec<String> = preset.params.iter().map(|p| p.name.clone()).collect();
        for n in names {
            preset.apply_override(&format!("param.{n}.sd"), 0.0).unwrap();
        }
        let a = sample_plant(&preset, 5).unwrap();
        let b = sample_plant(&preset, 99).unwrap();
        assert_eq!(a.params, b.params);
        assert_eq!(a.days, b.days);
        assert_eq!(a.topology, b.topology);
    }
}

#[test]
fn dominant_apex_leaves_only_the_main_raceme() {
    let mut p = canola_preset(3).unwrap();
    p.apply_override("param.vigour.mean", 3.0).unwrap();
    p.apply_override("param.vigour.sd", 0.0).unwrap();
    for seed in 0..5 {
        let plant = sample_plant(&p, seed).unwrap();
        assert!(!plant.flowering_days().is_empty());
        assert!(plant.topology.iter().all(|t| t.inflorescence_branches == 1));
    }
}

#[test]
fn variant_ledger() {
    assert!(canola_preset(0).is_err());
    assert!(canola_preset(6).is_err());
    let v: Vec<PlantModelPreset> = (1..=5).map(|i| canola_preset(i).unwrap()).collect();
    let vig = |p: &PlantModelPreset| p.param("vigour").unwrap().clone();
    assert!(vig(&v[1]).mean > vig(&v[0]).mean && vig(&v[1]).sd > vig(&v[0]).sd);
    assert!(vig(&v[2]).mean > vig(&v[1]).mean && vig(&v[2]).sd > vig(&v[1]).sd);
    for g in ["leafgrow", "stemgrow"] {
        let s = |p: &PlantModelPreset| p.model.growth_function(g).unwrap().stretch;
        assert!(s(&v[3]) > s(&v[2]), "{g}");
    }
    let blade = |p: &PlantModelPreset| p.model.growth_function("blade").unwrap().clone();
    assert_ne!(blade(&v[3]), blade(&v[2]));
    for p in &v[..3] {
        assert!(matches!(p.materials.leaf[0], Material::Veined { vein: [240, 244, 232], .. }));
    }
    assert!(matches!(&v[3].materials.leaf[0], Material::Texture { name } if name == "canola_leaf"));
    assert_ne!(v[4].materials.flower, v[3].materials.flower);
    assert!(v[4].param("leaf_len").unwrap().mean > v[3].param("leaf_len").unwrap().mean);
    assert!(v[..2].iter().all(|p| p.target.is_none()));
    assert!(v[2..].iter().all(|p| p.target.is_some() && p.target == v[2].target));
    for p in &v {
        assert_eq!((p.timeline, p.species), (38, Species::Canola));
    }
}

#[test]
fn every_canola_plant_flowers_long_enough() {
    for variant in 1..=5 {
        let p = canola_preset(variant).unwrap();
        for seed in 0..40 {
            let plant = sample_plant(&p, seed).unwrap();
            let days = plant.flowering_days();
            assert!(days.len() >= 6, "v{variant} seed {seed}: {days:?}");
            // once flowering starts it continues to the end of the timeline
            assert_eq!(days.len() as u32, 38 - days[0] + 1);
            let b: Vec<u32> = plant.topology.iter().map(|t| t.inflorescence_branches).collect();
            assert!(b.windows(2).all(|w| w[0] <= w[1]));
        }
    }
}

enum Node {
    Module(ModuleSymbol),
    Branch(Vec<Node>),
}

fn tree(s: &SymbolString) -> Vec<Node> {
    fn parse(it: &mut std::slice::Iter<'_, ModuleSymbol>) -> Vec<Node> {
        let mut out = Vec::new();
        while let Some(m) = it.next() {
            match m.name.as_str() {
                "[" => out.push(Node::Branch(parse(it))),
                "]" => return out,
                _ => out.push(Node::Module(m.clone())),
            }
        }
        out
    }
    parse(&mut s.modules.iter())
}

fn has_anthesis(nodes: &[Node]) -> bool {
    nodes.iter().any(|n| match n {
        Node::Module(m) => (m.name.as_str() == "Flower" && m.params[0] > 0.0) || m.name.as_str() == "Pod",
        Node::Branch(b) => has_anthesis(b),
    })
}

fn recount(s: &SymbolString) -> (usize, u32, usize) {
    let root = tree(s);
    let laterals = root
        .iter()
        .filter(|n| match n {
            Node::Branch(b) => matches!(b.first(), Some(Node::Module(m)) if m.name.as_str() == "Br") && has_anthesis(b),
            _ => false,
        })
        .count() as u32;
    let leaves = s.modules.iter().filter(|m| m.name.as_str() == "Leaf" && m.params[0] > 0.0).count();
    let open = s.modules.iter().filter(|m| m.name.as_str() == "Flower" && m.params[0] > 0.0).count();
    (leaves, 1 + laterals, open)
}

#[test]
fn topology_matches_tree_recount() {
    for variant in 1..=5 {
        let p = canola_preset(variant).unwrap();
        for seed in 0..12 {
            let plant = sample_plant(&p, seed * 7 + 1).unwrap();
            for (d, s) in plant.days.iter().enumerate() {
                let t = plant.topology[d];
                assert_eq!((t.leaves, t.inflorescence_branches, t.open_flowers), recount(s), "v{variant} day {}", d + 1);
            }
        }
    }
}

#[test]
fn constructed_string_with_four_laterals() {
    let s: SymbolString = "F [Br F [K(0)] [Flower(0.1)]] [Br F [Pod(2)]] [Br F [Flower(0)]] [Br [Flower(0.2)]] [Leaf(1)] \
                           [F [Br Flower(1)]] [Br Flower(1)] [Flower(1)] F [Flower(0.1)]"
        .parse()
        .unwrap();
    assert_eq!(recount(&s).1, 5);
    assert_eq!(count_first_order_branches(&s), 5);
    assert_eq!(count_first_order_branches(&"A B [C]".parse().unwrap()), 1);
}

#[test]
fn variant_three_matches_target_within_tolerance() {
    let p = canola_preset(3).unwrap();
    let target = p.target_distribution().unwrap();
    let hist = branch_histogram(&p, 200, 42).unwrap();
    let d = total_variation(&hist, &target);
    assert!((d - 0.06).abs() < 1e-9, "distance {d}");
    assert!(d <= 0.15);
}

#[test]
fn calibration_single_point_and_forced_optimum() {
    let p = canola_preset(1).unwrap();
    let target: BTreeMap<u32, f64> = [(1, 1.0)].into();
    let one = CalibrationGrid {
        vigour_mean: vec![0.9],
        vigour_sd: vec![0.1],
        threshold: vec![1.0],
    };
    let r = calibrate_branch_distribution(&p, &target, &one, 30, 3).unwrap();
    assert_eq!((r.vigour_mean, r.vigour_sd, r.threshold), (0.9, 0.1, 1.0));
    assert_eq!(r.evaluated.len(), 1);

    // threshold 10 can never be exceeded, so no lateral ever grows
    let g = CalibrationGrid {
        vigour_mean: vec![0.5, 1.0],
        vigour_sd: vec![0.1],
        threshold: vec![0.5, 10.0],
    };
    let r = calibrate_branch_distribution(&p, &target, &g, 30, 3).unwrap();
    assert_eq!(r.threshold, 10.0);
    assert_eq!(r.distance, 0.0);
    assert_eq!(r.vigour_mean, 0.5, "ties go to the smallest point");
    assert_eq!(r.preset.model.constant("branch_thr"), Some(10.0));
    assert!(r.evaluated.iter().all(|e| e.1 >= r.distance));
}

#[test]
fn calibration_rejects_bad_inputs() {
    let p = canola_preset(3).unwrap();
    let g = CalibrationGrid::ranges((1.0, 1.0, 1), (0.1, 0.1, 1), (1.0, 1.0, 1));
    assert!(calibrate_branch_distribution(&p, &BTreeMap::new(), &g, 50, 1).is_err());
    let t: BTreeMap<u32, f64> = [(2, 1.0)].into();
    assert!(calibrate_branch_distribution(&p, &t, &g, 10, 1).is_err());
    let empty = CalibrationGrid::ranges((1.0, 1.0, 0), (0.1, 0.1, 1), (1.0, 1.0, 1));
    assert!(calibrate_branch_distribution(&p, &t, &empty, 50, 1).is_err());
    assert!(calibrate_branch_distribution(&maize_preset(), &t, &g, 50, 1).is_err());
}

#[test]
fn calibration_is_deterministic() {
    let p = canola_preset(3).unwrap();
    let t = p.target_distribution().unwrap();
    let g = CalibrationGrid::ranges((1.4, 1.8, 3), (0.1, 0.2, 2), (1.0, 1.1, 2));
    let a = calibrate_branch_distribution(&p, &t, &g, 40, 9).unwrap();
    let b = calibrate_branch_distribution(&p, &t, &g, 40, 9).unwrap();
    assert_eq!(a.evaluated, b.evaluated);
    let best = a.evaluated.iter().map(|e| e.1).fold(f64::INFINITY, f64::min);
    assert_eq!(a.distance, best);
}

#[test]
fn presets_round_trip_through_text() {
    let mut all = vec![maize_preset()];
    all.extend((1..=5).map(|v| canola_preset(v).unwrap()));
    for p in all {
        let again = parse_preset(&p.to_text()).unwrap();
        assert_eq!(again, p, "{}", p.name);
        assert_eq!(preset_by_name(&p.name).unwrap(), p);
    }
    assert_eq!(preset_names().len(), 6);
    assert!(preset_by_name("canola-v9").is_none());
}

#[test]
fn preset_errors_carry_file_positions() {
    let bad_model = "[preset]\nspecies: canola\nvariant: 1\ntimeline: 5\nphyllotaxy: 137.5\nview: extent 1 center 0 0 0\n[model]\naxiom: A\nA -> [ B\n";
    let e = parse_preset(bad_model).unwrap_err();
    assert_eq!(e.line, 9, "{e}");
    let bad_key = "[preset]\nspecies: canola\ncolour: red\n";
    assert_eq!(parse_preset(bad_key).unwrap_err().line, 3);
    let bad_maize = "[preset]\nspecies: maize\nvariant: 1\ntimeline: 5\nphyllotaxy: 137.5\nview: extent 1 center 0 0 0\n[model]\naxiom: A\n";
    assert!(parse_preset(bad_maize).unwrap_err().message.contains("180"));
    let neg_sd = "[preset]\nparam x mean 1 sd -1\n";
    let e = parse_preset(neg_sd).unwrap_err();
    assert_eq!((e.line, e.message.contains("negative sd")), (2, true));
    assert!(parse_preset("axiom: A\n").is_err());
}

#[test]
fn overrides() {
    let mut p = canola_preset(4).unwrap();
    p.apply_override("growth.leafgrow.stretch", 2.0).unwrap();
    assert_eq!(p.model.growth_function("leafgrow").unwrap().stretch, 2.0);
    p.apply_override("param.leaf_len.mean", 0.7).unwrap();
    assert_eq!(p.model.constant("leaf_len"), Some(0.7));
    p.apply_override("timeline", 30.0).unwrap();
    assert_eq!(sample_plant(&p, 1).unwrap().topology.len(), 30);
    for bad in ["param.nope.mean", "const.leaf_len", "growth.x.stretch", "colour", "const.nope"] {
        assert!(p.apply_override(bad, 1.0).is_err(), "{bad}");
    }
    assert!(p.apply_override("param.leaf_len.sd", -1.0).is_err());
    assert!(p.apply_override("timeline", 0.5).is_err());

    p.apply_override("vigour", 2.2).unwrap();
    assert_eq!(p.param("vigour").unwrap().mean, 2.2);
    p.apply_override("branch_thr", 0.9).unwrap();
    assert_eq!(p.model.constant("branch_thr"), Some(0.9));
}
