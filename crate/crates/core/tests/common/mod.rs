#![allow(dead_code)]

//! Independent reference implementations used by the integration and acceptance tests.
//! Nothing here calls into the renderer or metric modules of the crate.

use splatgate_core::metrics::Image;
use splatgate_core::scene::{CameraModel, CameraPose, SceneGraph};

type M3 = [[f64; 3]; 3];

fn mat_mul(a: &M3, b: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

fn transpose(a: &M3) -> M3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = a[j][i];
        }
    }
    out
}

fn apply(a: &M3, v: [f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| a[i][0] * v[0] + a[i][1] * v[1] + a[i][2] * v[2])
}

/// Rotation matrix of a (w, x, y, z) quaternion, normalized first.
pub fn quat_matrix(q: [f64; 4]) -> M3 {
    let n = (q[0] * q[0] + q[1] * q[1] + q[2] * q[2] + q[3] * q[3]).sqrt();
    let [w, x, y, z] = q.map(|v| v / n);
    [
        [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y - w * z), 2.0 * (x * z + w * y)],
        [2.0 * (x * y + w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z - w * x)],
        [2.0 * (x * z - w * y), 2.0 * (y * z + w * x), 1.0 - 2.0 * (x * x + y * y)],
    ]
}

fn iso_parts(iso: &nalgebra::Isometry3<f64>) -> (M3, [f64; 3]) {
    let q = iso.rotation.into_inner();
    let t = iso.translation.vector;
    (quat_matrix([q.w, q.i, q.j, q.k]), [t.x, t.y, t.z])
}

/// Real SH color, degrees 0..=3, written out term by term.
fn sh_color(dc: &[f32; 3], rest: &[f32; 45], d: [f64; 3]) -> [f64; 3] {
    let (x, y, z) = (d[0], d[1], d[2]);
    let c0 = 0.5 / std::f64::consts::PI.sqrt();
    let c1 = (3.0 / (4.0 * std::f64::consts::PI)).sqrt();
    let basis = [
        -c1 * y,
        c1 * z,
        -c1 * x,
        1.0925484305920792 * x * y,
        -1.0925484305920792 * y * z,
        0.31539156525252005 * (2.0 * z * z - x * x - y * y),
        -1.0925484305920792 * x * z,
        0.5462742152960396 * (x * x - y * y),
        -0.5900435899266435 * y * (3.0 * x * x - y * y),
        2.890611442640554 * x * y * z,
        -0.4570457994644658 * y * (4.0 * z * z - x * x - y * y),
        0.3731763325901154 * z * (2.0 * z * z - 3.0 * x * x - 3.0 * y * y),
        -0.4570457994644658 * x * (4.0 * z * z - x * x - y * y),
        1.445305721320277 * z * (x * x - y * y),
        -0.5900435899266435 * x * (x * x - 3.0 * y * y),
    ];
    [0, 1, 2].map(|c| {
        let mut v = 0.5 + c0 * dc[c] as f64;
        for k in 0..15 {
            v += basis[k] * rest[c * 15 + k] as f64;
        }
        v.clamp(0.0, 1.0)
    })
}

struct Footprint {
    index: usize,
    node: usize,
    depth: f64,
    mean: [f64; 2],
    /// Inverse screen covariance (a, b, c).
    conic: [f64; 3],
    opacity: f64,
    color: [f64; 3],
}

fn project_all(scene: &SceneGraph, cam: &CameraModel, pose: &CameraPose) -> Vec<Footprint> {
    let t = pose.time.clamp(scene.time_span[0], scene.time_span[1]);
    let (cam_r, cam_t) = iso_parts(&pose.pose);
    let view_r = transpose(&cam_r);
    let mut out = Vec::new();
    for (ni, node) in scene.nodes.iter().enumerate() {
        let (node_r, node_t) = iso_parts(&node.pose_at(t));
        for &gi in &node.indices {
            let g = scene.gaussians.get(gi as usize);
            let local = g.position.map(|v| v as f64);
            let rl = apply(&node_r, local);
            let world = [0, 1, 2].map(|i| rl[i] + node_t[i]);
            let rel = [0, 1, 2].map(|i| world[i] - cam_t[i]);
            let pc = apply(&view_r, rel);
            if !(pc[2] >= cam.near_plane) {
                continue;
            }
            // Σ = R S Sᵀ Rᵀ in the node frame, then into camera frame
            let rq = quat_matrix(g.rotation.map(|v| v as f64));
            let s = g.log_scale.map(|v| (v as f64).exp());
            let mut rs = rq;
            for row in rs.iter_mut() {
                for k in 0..3 {
                    row[k] *= s[k];
                }
            }
            let sigma_local = mat_mul(&rs, &transpose(&rs));
            let to_cam = mat_mul(&view_r, &node_r);
            let sigma = mat_mul(&mat_mul(&to_cam, &sigma_local), &transpose(&to_cam));

            let z = pc[2];
            let lim_x = 1.3 * cam.width as f64 / (2.0 * cam.fx);
            let lim_y = 1.3 * cam.height as f64 / (2.0 * cam.fy);
            let tx = (pc[0] / z).clamp(-lim_x, lim_x);
            let ty = (pc[1] / z).clamp(-lim_y, lim_y);
            let j = [[cam.fx / z, 0.0, -cam.fx * tx / z], [0.0, cam.fy / z, -cam.fy * ty / z]];
            let mut cov = [[0.0; 2]; 2];
            for a in 0..2 {
                for b in 0..2 {
                    let mut v = 0.0;
                    for k in 0..3 {
                        for l in 0..3 {
                            v += j[a][k] * sigma[k][l] * j[b][l];
                        }
                    }
                    cov[a][b] = v;
                }
            }
            cov[0][0] += 0.3;
            cov[1][1] += 0.3;
            let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
            if !(det > 0.0) {
                continue;
            }
            let conic = [cov[1][1] / det, -cov[0][1] / det, cov[0][0] / det];

            let dn = (rel[0] * rel[0] + rel[1] * rel[1] + rel[2] * rel[2]).sqrt();
            let dir_world = rel.map(|v| v / dn);
            let dir_local = apply(&transpose(&node_r), dir_world);
            out.push(Footprint {
                index: gi as usize,
                node: ni,
                depth: z,
                mean: [cam.fx * pc[0] / z + cam.cx, cam.fy * pc[1] / z + cam.cy],
                conic,
                opacity: 1.0 / (1.0 + (-(g.logit_opacity as f64)).exp()),
                color: sh_color(&g.sh_dc, &g.sh_rest, dir_local),
            });
        }
    }
    out.sort_by(|a, b| a.depth.total_cmp(&b.depth).then(a.index.cmp(&b.index)));
    out
}

pub struct OracleFrame {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<f64>,
    pub alpha: Vec<f64>,
    /// Node index with the largest accumulated weight, if any.
    pub instance: Vec<Option<usize>>,
}

/// Exhaustive per-pixel compositor: every Gaussian is evaluated at every pixel,
/// with no tiling, no footprint truncation and no early termination.
pub fn oracle_render(scene: &SceneGraph, cam: &CameraModel, pose: &CameraPose, background: [f64; 3]) -> OracleFrame {
    let (w, h) = (cam.width as usize, cam.height as usize);
    let splats = project_all(scene, cam, pose);
    let mut frame = OracleFrame {
        width: w,
        height: h,
        rgb: vec![0.0; 3 * w * h],
        alpha: vec![0.0; w * h],
        instance: vec![None; w * h],
    };
    for y in 0..h {
        for x in 0..w {
            let mut t = 1.0;
            let mut c = [0.0; 3];
            let mut per_node = vec![0.0; scene.nodes.len()];
            for s in &splats {
                let dx = x as f64 - s.mean[0];
                let dy = y as f64 - s.mean[1];
                let q = s.conic[0] * dx * dx + 2.0 * s.conic[1] * dx * dy + s.conic[2] * dy * dy;
                let a = s.opacity * (-0.5 * q).exp();
                for k in 0..3 {
                    c[k] += t * a * s.color[k];
                }
                per_node[s.node] += t * a;
                t *= 1.0 - a;
            }
            let i = y * w + x;
            for k in 0..3 {
                frame.rgb[3 * i + k] = (c[k] + t * background[k]).clamp(0.0, 1.0);
            }
            frame.alpha[i] = 1.0 - t;
            frame.instance[i] = per_node
                .iter()
                .enumerate()
                .filter(|(_, &v)| v > 0.0)
                .fold(None, |best: Option<(usize, f64)>, (n, &v)| match best {
                    Some((_, bv)) if bv >= v => best,
                    _ => Some((n, v)),
                })
                .map(|(n, _)| n);
        }
    }
    frame
}

/// Closed-form PSNR over all pixels and channels, peak 1.
pub fn reference_psnr(a: &Image, b: &Image) -> f64 {
    let n = a.data.len() as f64;
    let mse: f64 = a.data.iter().zip(&b.data).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / n;
    10.0 * (1.0 / mse).log10()
}

/// SSIM by direct evaluation of every 11×11 window (σ = 1.5, K1 = 0.01, K2 = 0.03,
/// dynamic range 1), averaged over valid window positions and channels.
pub fn reference_ssim(a: &Image, b: &Image) -> f64 {
    let size = 11usize;
    let sigma: f64 = 1.5;
    let mut weights = vec![0.0; size * size];
    let mut total = 0.0;
    for v in 0..size {
        for u in 0..size {
            let du = u as f64 - 5.0;
            let dv = v as f64 - 5.0;
            let wgt = (-(du * du + dv * dv) / (2.0 * sigma * sigma)).exp();
            weights[v * size + u] = wgt;
            total += wgt;
        }
    }
    for wgt in &mut weights {
        *wgt /= total;
    }
    let c1 = (0.01f64).powi(2);
    let c2 = (0.03f64).powi(2);
    let mut sum = 0.0;
    let mut count = 0usize;
    for c in 0..3 {
        for y0 in 0..=a.height - size {
            for x0 in 0..=a.width - size {
                let (mut ma, mut mb) = (0.0, 0.0);
                for v in 0..size {
                    for u in 0..size {
                        let wgt = weights[v * size + u];
                        ma += wgt * a.pixel(x0 + u, y0 + v)[c];
                        mb += wgt * b.pixel(x0 + u, y0 + v)[c];
                    }
                }
                let (mut va, mut vb, mut cov) = (0.0, 0.0, 0.0);
                for v in 0..size {
                    for u in 0..size {
                        let wgt = weights[v * size + u];
                        let da = a.pixel(x0 + u, y0 + v)[c] - ma;
                        let db = b.pixel(x0 + u, y0 + v)[c] - mb;
                        va += wgt * da * da;
                        vb += wgt * db * db;
                        cov += wgt * da * db;
                    }
                }
                sum += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                    / ((ma * ma + mb * mb + c1) * (va + vb + c2));
                count += 1;
            }
        }
    }
    sum / count as f64
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}
