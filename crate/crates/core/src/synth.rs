//! Seeded synthetic fixtures: random Gaussian clouds, a vehicle shell, a small
//! street scene, and label extraction from rendered instance rasters.

use nalgebra::{UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::metrics::{Detection, DetectionClass, DetectionSet, Palette};
use crate::render::{rgb_to_sh_dc, RenderedFrame, INSTANCE_NONE};
use crate::scene::{
    logit, look_at, CameraPose, Gaussian, GaussianSet, NodeClass, PoseKey, RigidTransform,
    SceneGraph, SceneNode, SH_REST_LEN,
};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn random_rotation(rng: &mut impl Rng) -> [f32; 4] {
    let q = UnitQuaternion::from_euler_angles(
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
    );
    let q = q.into_inner();
    let v = [q.w as f32, q.i as f32, q.j as f32, q.k as f32];
    let n = v.iter().map(|x| x * x).sum::<f32>().sqrt();
    v.map(|x| x / n)
}

/// Builds a Gaussian with an isotropic-ish scale and a flat color.
pub fn colored_gaussian(position: [f64; 3], scale: [f64; 3], opacity: f64, rgb: [f64; 3]) -> Gaussian {
    Gaussian {
        position: position.map(|v| v as f32),
        log_scale: scale.map(|s| s.ln() as f32),
        logit_opacity: logit(opacity) as f32,
        sh_dc: rgb_to_sh_dc(rgb),
        ..Default::default()
    }
}

/// Random anisotropic Gaussian inside `bounds` with view-dependent color.
pub fn random_gaussian(rng: &mut impl Rng, bounds: [[f64; 2]; 3], scale: [f64; 2]) -> Gaussian {
    let mut g = Gaussian {
        position: bounds.map(|[lo, hi]| rng.random_range(lo..hi) as f32),
        rotation: random_rotation(rng),
        log_scale: [0; 3].map(|_| rng.random_range(scale[0].ln()..scale[1].ln()) as f32),
        logit_opacity: logit(rng.random_range(0.05..0.95)) as f32,
        sh_dc: rgb_to_sh_dc([0; 3].map(|_| rng.random_range(0.05..0.95))),
        sh_rest: [0.0; SH_REST_LEN],
    };
    for v in g.sh_rest.iter_mut() {
        *v = rng.random_range(-0.15..0.15);
    }
    g
}

/// `n` random Gaussians in front of a camera at the origin looking down +z.
pub fn random_view_scene(seed: u64, n: usize) -> SceneGraph {
    let mut r = rng(seed);
    let mut set = GaussianSet::with_capacity(n);
    for _ in 0..n {
        set.push(random_gaussian(&mut r, [[-1.5, 1.5], [-1.5, 1.5], [2.0, 8.0]], [0.03, 0.4]));
    }
    SceneGraph::static_scene(set, 10.0, [0.0, 1.0])
}

/// Vehicle-sized dimensions: length (x), width (y), height (z), meters.
pub const VEHICLE_SIZE: [f64; 3] = [4.5, 1.8, 1.5];

/// Gaussians on the surface of a box centered at the origin, colored by
/// position so that each side looks different. Heading is +x.
pub fn vehicle_shell(seed: u64, n: usize) -> GaussianSet {
    let mut r = rng(seed);
    let [l, w, h] = VEHICLE_SIZE;
    let half = [l / 2.0, w / 2.0, h / 2.0];
    let areas = [w * h, l * h, l * w];
    let total: f64 = 2.0 * areas.iter().sum::<f64>();
    let mut set = GaussianSet::with_capacity(n);
    for _ in 0..n {
        let mut pick = r.random_range(0.0..total);
        let mut axis = 0;
        let mut sign = 1.0;
        'outer: for (a, &area) in areas.iter().enumerate() {
            for s in [1.0, -1.0] {
                if pick < area {
                    axis = a;
                    sign = s;
                    break 'outer;
                }
                pick -= area;
            }
        }
        let mut p = [0.0; 3].map(|_| 0.0);
        for (k, v) in p.iter_mut().enumerate() {
            *v = if k == axis {
                sign * half[k]
            } else {
                r.random_range(-half[k]..half[k])
            };
        }
        let u = [(p[0] / l) + 0.5, (p[1] / w) + 0.5, (p[2] / h) + 0.5];
        let stripe = if ((p[0] * 2.0).floor() as i64 + (p[2] * 3.0).floor() as i64) % 2 == 0 { 0.15 } else { 0.0 };
        let rgb = [0.2 + 0.6 * u[0], 0.2 + 0.5 * u[1] + stripe, 0.3 + 0.4 * u[2]];
        let mut scale = [0.16; 3];
        scale[axis] = 0.03;
        set.push(colored_gaussian(p, scale, 0.9, rgb));
    }
    set
}

/// Scene holding one static vehicle node (no background Gaussians).
pub fn shell_scene(set: GaussianSet) -> SceneGraph {
    let n = set.len() as u32;
    let mut scene = SceneGraph::static_scene(set, 10.0, [0.0, 1.0]);
    scene.nodes[0].indices.clear();
    scene.nodes.push(SceneNode::new("vehicle", NodeClass::Vehicle, (0..n).collect()));
    scene
}

/// Drops shell Gaussians on the rear half (`x < 0` in the node frame).
pub fn without_rear(scene: &SceneGraph) -> SceneGraph {
    let node = scene.node("vehicle").expect("shell scene has a vehicle");
    let keep: Vec<u32> = node
        .indices
        .iter()
        .copied()
        .filter(|&i| scene.gaussians.get(i as usize).position[0] >= 0.0)
        .collect();
    shell_scene(scene.gaussians.select(&keep))
}

/// `count` cameras on a horizontal circle around `center`, all looking at it.
/// Pose `k` sits at azimuth `k * 360 / count` degrees from +x.
pub fn orbit_poses(center: Vector3<f64>, radius: f64, height: f64, count: usize) -> Vec<CameraPose> {
    (0..count)
        .map(|k| {
            let a = (k as f64 * 360.0 / count as f64).to_radians();
            let eye = center + Vector3::new(radius * a.cos(), radius * a.sin(), height);
            CameraPose::new(0.0, look_at(eye, center))
        })
        .collect()
}

/// Small street: a ground plane, a wall of buildings, a moving car and a pedestrian.
/// The ego camera drives along +x at y = 0, z = 1.5.
pub fn street_scene(seed: u64) -> SceneGraph {
    let mut r = rng(seed);
    let mut set = GaussianSet::new();
    let mut background = Vec::new();
    let push = |set: &mut GaussianSet, list: &mut Vec<u32>, g: Gaussian| {
        list.push(set.len() as u32);
        set.push(g);
    };
    for ix in 0..40 {
        for iy in 0..12 {
            let x = -5.0 + ix as f64 * 1.0 + r.random_range(-0.2..0.2);
            let y = -6.0 + iy as f64 * 1.0 + r.random_range(-0.2..0.2);
            let shade = 0.35 + r.random_range(0.0..0.1) + if iy == 6 { 0.4 } else { 0.0 };
            push(&mut set, &mut background, colored_gaussian([x, y, 0.0], [0.6, 0.6, 0.02], 0.95, [shade; 3]));
        }
    }
    for ix in 0..40 {
        for iz in 0..6 {
            let x = -5.0 + ix as f64 * 1.0;
            let z = 0.5 + iz as f64 * 1.0;
            let tint = r.random_range(0.0..0.2);
            push(&mut set, &mut background, colored_gaussian([x, 7.0, z], [0.6, 0.05, 0.6], 0.95, [0.6 + tint, 0.45, 0.3]));
        }
    }
    let car_start = set.len() as u32;
    for g in vehicle_shell(seed ^ 0x5eed, 300).iter() {
        let mut g = g;
        g.position[2] += (VEHICLE_SIZE[2] / 2.0) as f32;
        set.push(g);
    }
    let car_end = set.len() as u32;
    for k in 0..60 {
        let z = 0.1 + 1.6 * k as f64 / 60.0;
        let a = k as f64 * 2.4;
        let p = [0.2 * a.cos(), 0.2 * a.sin(), z];
        set.push(colored_gaussian(p, [0.12, 0.12, 0.12], 0.9, [0.8, 0.2, 0.2]));
    }
    let ped_end = set.len() as u32;

    let mut scene = SceneGraph::static_scene(set, 10.0, [0.0, 2.0]);
    scene.nodes[0].indices = background;
    scene.nodes.push(
        SceneNode::new("car_0", NodeClass::Vehicle, (car_start..car_end).collect()).with_track(vec![
            PoseKey::new(0.0, RigidTransform::translation(10.0, 3.0, 0.0)),
            PoseKey::new(2.0, RigidTransform::translation(22.0, 3.0, 0.0)),
        ]),
    );
    scene.nodes.push(
        SceneNode::new("ped_0", NodeClass::Pedestrian, (car_end..ped_end).collect()).with_track(vec![
            PoseKey::new(0.0, RigidTransform::translation(14.0, -3.0, 0.0)),
            PoseKey::new(2.0, RigidTransform::translation(15.0, -1.5, 0.0)),
        ]),
    );
    scene
}

/// Ego trajectory for [`street_scene`]: along +x at `speed` m/s, sampled at the frame rate.
pub fn street_trajectory(frames: usize, frame_rate: f64, speed: f64) -> Vec<CameraPose> {
    (0..frames)
        .map(|k| {
            let t = k as f64 / frame_rate;
            let eye = Vector3::new(speed * t, 0.0, 1.5);
            CameraPose::new(t, look_at(eye, eye + Vector3::new(1.0, 0.0, -0.05)))
        })
        .collect()
}

/// Tight boxes around each node's pixels in the instance raster.
/// Nodes covering fewer than `min_pixels` pixels are dropped.
pub fn boxes_from_instances(frame: &RenderedFrame, scene: &SceneGraph, min_pixels: usize) -> DetectionSet {
    let n = frame.node_ids.len();
    let mut bounds = vec![(usize::MAX, usize::MAX, 0usize, 0usize, 0usize); n];
    for y in 0..frame.height {
        for x in 0..frame.width {
            let id = frame.instance[y * frame.width + x];
            if id == INSTANCE_NONE {
                continue;
            }
            let b = &mut bounds[id as usize];
            b.0 = b.0.min(x);
            b.1 = b.1.min(y);
            b.2 = b.2.max(x);
            b.3 = b.3.max(y);
            b.4 += 1;
        }
    }
    let mut detections = Vec::new();
    for (id, b) in frame.node_ids.iter().zip(&bounds) {
        let Some(node) = scene.node(id) else { continue };
        let class = match node.class {
            NodeClass::Vehicle => DetectionClass::Vehicle,
            NodeClass::Pedestrian => DetectionClass::Human,
            _ => continue,
        };
        if b.4 < min_pixels.max(1) {
            continue;
        }
        detections.push(Detection {
            class,
            bbox: [b.0 as f64, b.1 as f64, (b.2 - b.0 + 1) as f64, (b.3 - b.1 + 1) as f64],
            score: 1.0,
        });
    }
    DetectionSet {
        image_id: String::new(),
        width: Some(frame.width as u32),
        height: Some(frame.height as u32),
        detections,
    }
}

/// Palette used by [`class_mask_from_instances`].
pub fn street_palette() -> Palette {
    Palette::new(["sky", "background", "vehicle", "human"])
}

/// Class-index mask from the instance raster, using [`street_palette`] indices.
pub fn class_mask_from_instances(frame: &RenderedFrame, scene: &SceneGraph) -> Vec<u16> {
    let class_of: Vec<u16> = frame
        .node_ids
        .iter()
        .map(|id| match scene.node(id).map(|n| n.class) {
            Some(NodeClass::Vehicle) => 2,
            Some(NodeClass::Pedestrian) => 3,
            _ => 1,
        })
        .collect();
    frame
        .instance
        .iter()
        .map(|&i| if i == INSTANCE_NONE { 0 } else { class_of[i as usize] })
        .collect()
}
