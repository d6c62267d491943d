//! Disturbance bounds seen along a candidate, assuming the patches are
//! measured perfectly online.

use rtdrax::{
    Box2, CommandProfile, ConvexPolygon, DisturbancePatch, FrsTable, PlanState, ReachTube,
};

/// Interval bounds of a patch as a box in `(w_x, w_y)`.
pub fn patch_bounds(p: &DisturbancePatch) -> Box2 {
    Box2::new(p.w_lo, p.w_hi)
}

fn zero() -> Box2 {
    Box2::point([0.0, 0.0])
}

/// Hull of the bounds of every patch meeting `region`, together with zero
/// unless `region` lies entirely inside one of them (in which case the robot
/// cannot be outside all patches). With `with_zero` set the caller is adding
/// zero anyway and the containment test is skipped.
fn bounds_over<'a>(
    region: &Box2,
    patches: impl Iterator<Item = (&'a ConvexPolygon, &'a DisturbancePatch)>,
    with_zero: bool,
) -> Box2 {
    let mut covered = false;
    let mut acc: Option<Box2> = None;
    for (poly, patch) in patches {
        if poly.intersects_box(region) {
            let b = patch_bounds(patch);
            acc = Some(acc.map_or(b, |a| a.hull(&b)));
            covered = covered || (!with_zero && poly.contains_box(region));
        }
    }
    match acc {
        None => zero(),
        Some(b) if covered => b,
        Some(b) => b.hull(&zero()),
    }
}

/// Per verifier sample `t_j = j·dt_v`, the hull of the bounds of every patch
/// touched by the candidate's non-inflated footprint at that time.
pub fn measure_disturbance(
    profile: &CommandProfile,
    pose: &PlanState,
    patches: &[DisturbancePatch],
    frs: &FrsTable,
    dt_v: f64,
) -> Vec<Box2> {
    let steps = (profile.horizon() / dt_v).round() as usize;
    if patches.is_empty() {
        return vec![zero(); steps + 1];
    }
    let body: Vec<ConvexPolygon> = patches
        .iter()
        .map(|p| p.region.to_frame(pose.position(), pose.h))
        .collect();
    let cell = frs.cell_of(&profile.param);
    // Several verifier samples usually share one FRS time window.
    let mut last: Option<(usize, Box2)> = None;
    (0..=steps)
        .map(|j| {
            let i = frs.time_index(j as f64 * dt_v);
            match last {
                Some((li, b)) if li == i => b,
                _ => {
                    let b = bounds_over(frs.footprint(cell, i), body.iter().zip(patches), false);
                    last = Some((i, b));
                    b
                }
            }
        })
        .collect()
}

/// Hull of zero and every patch's bounds; no measured bound exceeds it.
pub fn all_bounds(patches: &[DisturbancePatch]) -> Box2 {
    patches
        .iter()
        .fold(zero(), |acc, p| acc.hull(&patch_bounds(p)))
}

/// `bound` merged with the patch bounds seen over `region`, or `None` when
/// that adds nothing. `aabbs` holds the bounding box of each patch region and
/// `everything` is [`all_bounds`].
pub fn widen_bound(
    bound: &Box2,
    region: &Box2,
    patches: &[DisturbancePatch],
    aabbs: &[Box2],
    everything: &Box2,
) -> Option<Box2> {
    if bound.contains(everything) {
        return None;
    }
    let near = patches
        .iter()
        .zip(aabbs)
        .filter(|(_, bb)| bb.overlaps(region))
        .map(|(p, _)| (&p.region, p));
    let with_zero = bound.contains(&zero());
    let grown = bound.hull(&bounds_over(region, near, with_zero));
    (grown != *bound).then_some(grown)
}

/// Grows `bounds` until bound `j` covers the patches met by the hull the
/// tube sweeps into sample `j` (world frame). Returns whether anything
/// changed. The tube is not recomputed, so this checks a finished tube
/// rather than producing one.
pub fn widen_with_tube(
    bounds: &mut [Box2],
    tube: &ReachTube,
    patches: &[DisturbancePatch],
) -> bool {
    let aabbs: Vec<Box2> = patches.iter().map(|p| p.region.aabb()).collect();
    let everything = all_bounds(patches);
    let boxes = &tube.position_boxes;
    let mut changed = false;
    for j in 0..boxes.len() {
        let region = boxes[j.saturating_sub(1)].hull(&boxes[j]);
        if let Some(b) = widen_bound(&bounds[j], &region, patches, &aabbs, &everything) {
            bounds[j] = b;
            changed = true;
        }
    }
    changed
}

/// Mean of the bound midpoints, the disturbance estimate used by the repair
/// ladder's lateral push.
pub fn mean_disturbance(bounds: &[Box2]) -> [f64; 2] {
    if bounds.is_empty() {
        return [0.0, 0.0];
    }
    let n = bounds.len() as f64;
    let sum = bounds.iter().fold([0.0, 0.0], |acc, b| {
        let c = b.center();
        [acc[0] + c[0], acc[1] + c[1]]
    });
    [sum[0] / n, sum[1] / n]
}
