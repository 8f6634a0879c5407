//! Forward splat rasterization into RGB, alpha, depth and instance rasters.

mod output;
mod project;
mod sh;

pub use output::{read_raw_buffer, write_raw_buffer, RawBuffer};
pub use project::{
    project_gaussian, project_in_view, projection_jacobian, screen_covariance, BehindNearPlane,
    Projection, COVARIANCE_DILATION, JACOBIAN_FOV_GUARD,
};
pub use sh::{eval_sh_color, rgb_to_sh_dc, sh_basis_rest, SH_C0};

use nalgebra::{Matrix2, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::Image;
use crate::scene::{CameraModel, CameraPose, SceneGraph};

/// Compositing stops once transmittance falls below this.
pub const TRANSMITTANCE_CUTOFF: f64 = 1e-4;
/// Footprints are truncated where per-Gaussian alpha falls below this.
pub const ALPHA_FOOTPRINT_CUTOFF: f64 = 1e-8;
pub const DEFAULT_TILE_SIZE: usize = 16;
/// Instance raster value for pixels no node contributes to.
pub const INSTANCE_NONE: u16 = u16::MAX;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderOptions {
    /// Fill color for residual transmittance.
    pub background: [f64; 3],
    pub tile_size: usize,
}

impl Default for RenderOptions {
    fn default() -> Self {
        Self {
            background: [0.5; 3],
            tile_size: DEFAULT_TILE_SIZE,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RenderDiagnostics {
    pub total: usize,
    pub culled_near: usize,
    pub skipped_degenerate: usize,
    /// Gaussians whose peak alpha is below the footprint cutoff.
    pub skipped_transparent: usize,
    pub splatted: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub width: usize,
    pub height: usize,
    /// Row-major interleaved RGB in [0,1].
    pub rgb: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Alpha-normalized expected depth; 0 where nothing was hit.
    pub depth: Vec<f64>,
    /// Index into `node_ids`, or [`INSTANCE_NONE`].
    pub instance: Vec<u16>,
    pub node_ids: Vec<String>,
    pub camera: CameraModel,
    pub pose: CameraPose,
    pub background: [f64; 3],
    pub diagnostics: RenderDiagnostics,
}

impl RenderedFrame {
    pub fn rgb_at(&self, x: usize, y: usize) -> [f64; 3] {
        let i = 3 * (y * self.width + x);
        [self.rgb[i], self.rgb[i + 1], self.rgb[i + 2]]
    }

    pub fn image(&self) -> Image {
        Image::new(self.width, self.height, self.rgb.clone()).expect("frame dimensions")
    }

    /// Instance id at a pixel as a node id, if any.
    pub fn instance_at(&self, x: usize, y: usize) -> Option<&str> {
        let id = self.instance[y * self.width + x];
        (id != INSTANCE_NONE).then(|| self.node_ids[id as usize].as_str())
    }
}

/// A Gaussian after projection, ready for compositing.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Splat2d {
    pub mean: [f64; 2],
    /// Upper triangle `(a, b, c)` of the inverse screen covariance.
    pub conic: [f64; 3],
    pub opacity: f64,
    pub color: [f64; 3],
    pub depth: f64,
    pub node: u16,
    /// Axis-aligned half extents of the truncated footprint, in pixels.
    pub half_extent: [f64; 2],
}

impl Splat2d {
    /// Unclamped per-pixel alpha at pixel center `(px, py)`.
    #[inline]
    pub fn alpha_at(&self, px: f64, py: f64) -> f64 {
        let dx = px - self.mean[0];
        let dy = py - self.mean[1];
        let [a, b, c] = self.conic;
        let power = -0.5 * (a * dx * dx + 2.0 * b * dx * dy + c * dy * dy);
        self.opacity * power.exp()
    }
}

fn invert_2x2(cov: &Matrix2<f64>) -> Option<[f64; 3]> {
    let (a, b, c) = (cov[(0, 0)], cov[(0, 1)], cov[(1, 1)]);
    let det = a * c - b * b;
    if !(det > 0.0 && a > 0.0) || !det.is_finite() {
        return None;
    }
    Some([c / det, -b / det, a / det])
}

/// Projects every Gaussian in the scene, returning survivors sorted
/// front-to-back (ties keep Gaussian index order).
pub fn prepare_splats(
    scene: &SceneGraph,
    cam: &CameraModel,
    pose: &CameraPose,
) -> (Vec<Splat2d>, RenderDiagnostics) {
    assert!(
        scene.nodes.len() < INSTANCE_NONE as usize,
        "instance rasters hold at most {} nodes",
        INSTANCE_NONE
    );
    let t = scene.clamp_time(pose.time);
    let view = pose.world_to_camera();
    let cam_center = pose.position();
    let mut diag = RenderDiagnostics {
        total: scene.gaussians.len(),
        ..Default::default()
    };
    let mut splats: Vec<(u32, Splat2d)> = Vec::with_capacity(scene.gaussians.len());

    for (ni, node) in scene.nodes.iter().enumerate() {
        let node_pose = node.pose_at(t);
        let node_rot = node_pose.rotation.to_rotation_matrix().into_inner();
        for &gi in &node.indices {
            let g = scene.gaussians.get(gi as usize);
            let local = Vector3::from(g.position.map(|v| v as f64));
            let mean = node_pose.transform_point(&local.into()).coords;
            let cov3d = node_rot * g.covariance() * node_rot.transpose();
            let proj = match project_in_view(&mean, &cov3d, cam, &view) {
                Ok(p) => p,
                Err(_) => {
                    diag.culled_near += 1;
                    continue;
                }
            };
            let Some(conic) = invert_2x2(&proj.cov) else {
                diag.skipped_degenerate += 1;
                continue;
            };
            let opacity = g.opacity();
            if !(opacity > ALPHA_FOOTPRINT_CUTOFF) {
                diag.skipped_transparent += 1;
                continue;
            }
            let k = 2.0 * (opacity / ALPHA_FOOTPRINT_CUTOFF).ln();
            let half_extent = [(k * proj.cov[(0, 0)]).sqrt(), (k * proj.cov[(1, 1)]).sqrt()];
            // SH coefficients live in the node frame
            let dir_world = mean - cam_center;
            let dir_local = node_pose.rotation.inverse_transform_vector(&dir_world);
            let norm = dir_local.norm();
            let dir = if norm > 0.0 { dir_local / norm } else { Vector3::z() };
            let color = eval_sh_color(&g.sh_dc, &g.sh_rest, &dir);
            splats.push((
                gi,
                Splat2d {
                    mean: proj.mean,
                    conic,
                    opacity,
                    color,
                    depth: proj.depth,
                    node: ni as u16,
                    half_extent,
                },
            ));
        }
    }
    splats.sort_by(|a, b| a.1.depth.total_cmp(&b.1.depth).then(a.0.cmp(&b.0)));
    diag.splatted = splats.len();
    (splats.into_iter().map(|(_, s)| s).collect(), diag)
}

pub fn render_frame(scene: &SceneGraph, cam: &CameraModel, pose: &CameraPose) -> RenderedFrame {
    render_frame_with(scene, cam, pose, &RenderOptions::default())
}

pub fn render_frame_with(
    scene: &SceneGraph,
    cam: &CameraModel,
    pose: &CameraPose,
    opts: &RenderOptions,
) -> RenderedFrame {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let ts = opts.tile_size.max(1);
    let (tiles_x, tiles_y) = (w.div_ceil(ts), h.div_ceil(ts));
    let (splats, diagnostics) = prepare_splats(scene, cam, pose);

    let mut bins: Vec<Vec<u32>> = vec![Vec::new(); tiles_x * tiles_y];
    for (si, s) in splats.iter().enumerate() {
        let Some((x0, x1)) = pixel_span(s.mean[0], s.half_extent[0], w) else {
            continue;
        };
        let Some((y0, y1)) = pixel_span(s.mean[1], s.half_extent[1], h) else {
            continue;
        };
        for ty in y0 / ts..=y1 / ts {
            for tx in x0 / ts..=x1 / ts {
                bins[ty * tiles_x + tx].push(si as u32);
            }
        }
    }

    let n_nodes = scene.nodes.len();
    let tiles: Vec<TileOutput> = bins
        .par_iter()
        .enumerate()
        .map(|(ti, bin)| {
            let (tx, ty) = (ti % tiles_x, ti / tiles_x);
            let x_range = tx * ts..((tx + 1) * ts).min(w);
            let y_range = ty * ts..((ty + 1) * ts).min(h);
            render_tile(&splats, bin, x_range, y_range, n_nodes, opts.background)
        })
        .collect();

    let mut frame = RenderedFrame {
        width: w,
        height: h,
        rgb: vec![0.0; 3 * w * h],
        alpha: vec![0.0; w * h],
        depth: vec![0.0; w * h],
        instance: vec![INSTANCE_NONE; w * h],
        node_ids: scene.nodes.iter().map(|n| n.id.clone()).collect(),
        camera: *cam,
        pose: *pose,
        background: opts.background,
        diagnostics,
    };
    for tile in tiles {
        for (k, px) in tile.pixels.iter().enumerate() {
            let x = tile.x0 + k % tile.width;
            let y = tile.y0 + k / tile.width;
            let i = y * w + x;
            frame.rgb[3 * i..3 * i + 3].copy_from_slice(&px.rgb);
            frame.alpha[i] = px.alpha;
            frame.depth[i] = px.depth;
            frame.instance[i] = px.instance;
        }
    }
    frame
}

/// Inclusive pixel index span covered by `[center - half, center + half]`.
fn pixel_span(center: f64, half: f64, size: usize) -> Option<(usize, usize)> {
    let lo = (center - half).ceil().max(0.0);
    let hi = (center + half).floor().min(size as f64 - 1.0);
    (lo <= hi && hi >= 0.0).then(|| (lo as usize, hi as usize))
}

#[derive(Debug, Clone, Copy)]
struct PixelOut {
    rgb: [f64; 3],
    alpha: f64,
    depth: f64,
    instance: u16,
}

struct TileOutput {
    x0: usize,
    y0: usize,
    width: usize,
    pixels: Vec<PixelOut>,
}

fn render_tile(
    splats: &[Splat2d],
    bin: &[u32],
    xs: std::ops::Range<usize>,
    ys: std::ops::Range<usize>,
    n_nodes: usize,
    background: [f64; 3],
) -> TileOutput {
    let mut node_weight = vec![0.0f64; n_nodes];
    let mut touched: Vec<u16> = Vec::new();
    let mut pixels = Vec::with_capacity(xs.len() * ys.len());
    for y in ys.clone() {
        for x in xs.clone() {
            let (px, py) = (x as f64, y as f64);
            let mut transmittance = 1.0f64;
            let mut color = [0.0f64; 3];
            let mut depth = 0.0f64;
            for &si in bin {
                let s = &splats[si as usize];
                if (px - s.mean[0]).abs() > s.half_extent[0] || (py - s.mean[1]).abs() > s.half_extent[1] {
                    continue;
                }
                let alpha = s.alpha_at(px, py);
                let weight = transmittance * alpha;
                for c in 0..3 {
                    color[c] += weight * s.color[c];
                }
                depth += weight * s.depth;
                if node_weight[s.node as usize] == 0.0 && weight > 0.0 {
                    touched.push(s.node);
                }
                node_weight[s.node as usize] += weight;
                transmittance *= 1.0 - alpha;
                if transmittance < TRANSMITTANCE_CUTOFF {
                    break;
                }
            }
            let mut instance = INSTANCE_NONE;
            let mut best = 0.0;
            for &n in &touched {
                let wgt = node_weight[n as usize];
                if wgt > best || (wgt == best && wgt > 0.0 && n < instance) {
                    best = wgt;
                    instance = n;
                }
                node_weight[n as usize] = 0.0;
            }
            touched.clear();
            let alpha = 1.0 - transmittance;
            pixels.push(PixelOut {
                rgb: std::array::from_fn(|c| {
                    (color[c] + transmittance * background[c]).clamp(0.0, 1.0)
                }),
                alpha: alpha.clamp(0.0, 1.0),
                depth: if alpha > 0.0 { depth / alpha } else { 0.0 },
                instance,
            });
        }
    }
    TileOutput {
        x0: xs.start,
        y0: ys.start,
        width: xs.len(),
        pixels,
    }
}
