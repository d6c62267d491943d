use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rtdrax::dynamics::{param_to_commands, unicycle_step};
use rtdrax::verifier::{certify, propagate_tube, TubePropagator};
use rtdrax::{
    Box2, CommandProfile, ConvexPolygon, DisturbanceBounds, TrajParam, UncertaintyConfig,
    UnicycleState, VehicleLimits,
};

const DT: f64 = 0.01;

fn profile(k: [f64; 2]) -> CommandProfile {
    param_to_commands(
        TrajParam::new(k[0], k[1]).unwrap(),
        &VehicleLimits::default(),
    )
}

fn params() -> impl Strategy<Value = [f64; 2]> {
    prop::array::uniform2(-1.0f64..=1.0)
}

fn state() -> impl Strategy<Value = UnicycleState> {
    (-1.0f64..1.0, -1.0f64..1.0, -3.0f64..3.0, 0.0f64..2.0)
        .prop_map(|(x, y, h, v)| UnicycleState::new(x, y, h, v))
}

fn eps() -> impl Strategy<Value = [f64; 4]> {
    (0.0f64..0.05, 0.0f64..0.05, 0.0f64..0.05, 0.0f64..0.1).prop_map(|(a, b, c, d)| [a, b, c, d])
}

fn w_box() -> impl Strategy<Value = Box2> {
    (
        prop::array::uniform2(-0.4f64..0.4),
        prop::array::uniform2(0.0f64..0.3),
    )
        .prop_map(|(lo, w)| Box2::new(lo, [lo[0] + w[0], lo[1] + w[1]]))
}

fn cfg(epsilon: [f64; 4], w: Box2) -> UncertaintyConfig {
    UncertaintyConfig {
        epsilon,
        w_bounds: DisturbanceBounds::Constant(w),
        ..Default::default()
    }
}

fn pick(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.gen_range(lo..=hi)
    } else {
        lo
    }
}

fn scenery(c: [f64; 2], half: [f64; 2], angle: f64) -> Vec<ConvexPolygon> {
    vec![ConvexPolygon::rectangle(c, half, angle).unwrap()]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn tube_contains_sampled_trajectories(
        k in params(), x in state(), e in eps(), w in w_box(), seed in any::<u64>(),
    ) {
        let p = profile(k);
        let tube = propagate_tube(&x, &cfg(e, w), &p, DT).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..8 {
            let x0 = x.to_array();
            let mut s = UnicycleState::from_array(std::array::from_fn(|i| pick(&mut rng, x0[i] - e[i], x0[i] + e[i])));
            for j in 0..tube.len() - 1 {
                let wj = [pick(&mut rng, w[0].lo(), w[0].hi()), pick(&mut rng, w[1].lo(), w[1].hi())];
                s = unicycle_step(&s, j as f64 * DT, DT, &p, wj);
                let iv = tube.state_interval(j + 1).pad(1e-9);
                prop_assert!(iv.contains_point(&s.to_array()), "step {} state {:?} outside {:?}", j + 1, s, iv);
            }
        }
    }

    #[test]
    fn nested_initial_boxes_give_nested_tubes(
        k in params(), x in state(), e in eps(), shrink in prop::array::uniform4(0.0f64..=1.0), w in w_box(),
    ) {
        let p = profile(k);
        let inner_e = std::array::from_fn(|i| e[i] * shrink[i]);
        let outer = propagate_tube(&x, &cfg(e, w), &p, DT).unwrap();
        let inner = propagate_tube(&x, &cfg(inner_e, w), &p, DT).unwrap();
        for j in 0..outer.len() {
            prop_assert!(outer.state_interval(j).contains(&inner.state_interval(j)), "sample {}", j);
        }
    }

    #[test]
    fn narrower_disturbance_gives_nested_tubes(
        k in params(), x in state(), e in eps(), w in w_box(), shrink in prop::array::uniform4(0.0f64..=1.0),
    ) {
        let p = profile(k);
        let (lo, hi) = (w.lo(), w.hi());
        let narrow = Box2::new(
            [lo[0] + shrink[0] * (hi[0] - lo[0]) / 2.0, lo[1] + shrink[1] * (hi[1] - lo[1]) / 2.0],
            [hi[0] - shrink[2] * (hi[0] - lo[0]) / 2.0, hi[1] - shrink[3] * (hi[1] - lo[1]) / 2.0],
        );
        let wide = propagate_tube(&x, &cfg(e, w), &p, DT).unwrap();
        let tight = propagate_tube(&x, &cfg(e, narrow), &p, DT).unwrap();
        for j in 0..wide.len() {
            prop_assert!(wide.state_interval(j).contains(&tight.state_interval(j)));
        }
    }

    #[test]
    fn smaller_tube_is_never_less_safe(
        k in params(), x in state(), e in eps(), w in w_box(), s in 0.0f64..=1.0,
        c in prop::array::uniform2(-3.0f64..3.0), half in prop::array::uniform2(0.05f64..0.6), a in -1.0f64..1.0,
    ) {
        let p = profile(k);
        let obstacles = scenery(c, half, a);
        let outer = propagate_tube(&x, &cfg(e, w), &p, DT).unwrap();
        let inner = propagate_tube(&x, &cfg(e.map(|v| v * s), w), &p, DT).unwrap();
        let (co, ci) = (certify(&outer, &obstacles), certify(&inner, &obstacles));
        if co.is_safe() {
            prop_assert!(ci.is_safe());
        }
        if let (Some(hi), Some(hit_outer)) = (ci.first_collision, co.first_collision) {
            prop_assert!(hit_outer.index <= hi.index);
        }
    }

    #[test]
    fn early_exit_reports_the_same_collision(
        k in params(), x in state(), e in eps(), w in w_box(),
        c in prop::array::uniform2(-3.0f64..3.0), half in prop::array::uniform2(0.05f64..0.6), a in -1.0f64..1.0,
    ) {
        let p = profile(k);
        let obstacles = scenery(c, half, a);
        let conf = UncertaintyConfig { footprint_radius: 0.1, ..cfg(e, w) };
        let full = propagate_tube(&x, &conf, &p, DT).unwrap();
        let mut prop = TubePropagator::new(&x, conf, &p, DT).unwrap();
        let hit = prop.advance_until_collision(&obstacles).unwrap();
        let expected = certify(&full, &obstacles);
        prop_assert_eq!(hit, !expected.is_safe());
        prop_assert_eq!(certify(&prop.tube(), &obstacles), expected);
        if !hit {
            prop_assert_eq!(prop.tube(), full);
        }
    }

    #[test]
    fn resuming_after_new_bounds_matches_fresh_run(
        k in params(), x in state(), e in eps(), w in w_box(), grow in w_box(), from in 1usize..250,
    ) {
        let p = profile(k);
        let n = 251;
        let base = vec![w; n];
        let mut changed = base.clone();
        for b in changed.iter_mut().skip(from) {
            *b = b.hull(&grow);
        }
        let conf = UncertaintyConfig { w_bounds: DisturbanceBounds::PerIndex(base), ..cfg(e, w) };
        let mut prop = TubePropagator::new(&x, conf.clone(), &p, DT).unwrap();
        while prop.advance().unwrap() {}
        prop.set_bounds(DisturbanceBounds::PerIndex(changed.clone()), from).unwrap();
        while prop.advance().unwrap() {}
        let fresh_cfg = UncertaintyConfig { w_bounds: DisturbanceBounds::PerIndex(changed), ..conf };
        prop_assert_eq!(prop.tube(), propagate_tube(&x, &fresh_cfg, &p, DT).unwrap());
    }

    #[test]
    fn revising_matches_a_fresh_run_with_the_final_bounds(
        k in params(), x in state(), e in eps(), w in w_box(), grow in w_box(),
        at in prop::collection::btree_set(0usize..251, 0..4),
    ) {
        let p = profile(k);
        let conf = UncertaintyConfig { w_bounds: DisturbanceBounds::PerIndex(vec![w; 251]), ..cfg(e, w) };
        let mut prop = TubePropagator::new(&x, conf.clone(), &p, DT).unwrap();
        let mut seen = Vec::new();
        let hit = prop
            .advance_revising(&[], |j, b, _| {
                seen.push(j);
                (at.contains(&j) && !b.contains(&grow)).then(|| b.hull(&grow))
            })
            .unwrap();
        prop_assert!(!hit);
        // Every sample is offered once, plus once more after each revision.
        let revised = if w.contains(&grow) { 0 } else { at.len() };
        prop_assert_eq!(seen.len(), 251 + revised);
        let bounds = prop.bounds().clone();
        if let DisturbanceBounds::PerIndex(v) = &bounds {
            for (j, b) in v.iter().enumerate() {
                prop_assert_eq!(*b, if at.contains(&j) { w.hull(&grow) } else { w });
            }
        }
        let fresh = UncertaintyConfig { w_bounds: bounds, ..conf };
        prop_assert_eq!(prop.tube(), propagate_tube(&x, &fresh, &p, DT).unwrap());
    }
}

#[test]
fn revising_requires_per_index_bounds() {
    let p = profile([0.0, 0.5]);
    let mut prop = TubePropagator::new(
        &UnicycleState::default(),
        UncertaintyConfig::default(),
        &p,
        DT,
    )
    .unwrap();
    assert!(prop.advance_revising(&[], |_, _, _| None).is_err());
}

#[test]
fn degenerate_tube_is_the_rk4_trajectory() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let p = profile([rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]);
        let x0 = UnicycleState::new(0.0, 0.0, rng.gen_range(-3.0..3.0), rng.gen_range(0.0..2.0));
        let w = [rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
        let tube = propagate_tube(&x0, &cfg([0.0; 4], Box2::point(w)), &p, DT).unwrap();
        let mut s = x0;
        for j in 0..250 {
            s = unicycle_step(&s, j as f64 * DT, DT, &p, w);
            assert_eq!(tube.states[j + 1].lower, s.to_array());
            assert_eq!(tube.states[j + 1].upper, s.to_array());
        }
    }
}

#[test]
fn single_precision_tube_encloses_single_precision_rollout() {
    let lim = rtdrax::dynamics::VehicleLimits::<f32>::default();
    let k = rtdrax::dynamics::TrajParam::<f32>::new(0.3, 0.4).unwrap();
    let p = param_to_commands(k, &lim);
    let x0 = rtdrax::dynamics::UnicycleState::<f32>::new(0.0, 0.0, 0.1, 1.0);
    let conf = rtdrax::verifier::UncertaintyConfig::<f32>::default();
    let tube = propagate_tube(&x0, &conf, &p, 0.01f32).unwrap();
    assert_eq!(tube.len(), 251);
    let mut s = x0;
    for j in 0..250 {
        s = unicycle_step(&s, j as f32 * 0.01, 0.01, &p, [0.0, 0.0]);
        assert!(tube
            .state_interval(j + 1)
            .pad(1e-4)
            .contains_point(&s.to_array()));
    }
}
