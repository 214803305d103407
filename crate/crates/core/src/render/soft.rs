//! Soft silhouette rasterization.
//!
//! Coverage of a pixel `p` is aggregated over faces as
//! `alpha(p) = 1 - prod_f (1 - D_f(p))` where `D_f(p)` is a sigmoid of the
//! signed pixel distance from `p` to the boundary of face `f` (positive
//! inside), divided by the sharpness `sigma`. The signed distance is taken
//! against the face's three edge lines, which is exact inside the triangle
//! and slightly rounds convex corners outside; that keeps the per-pixel cost
//! at three affine edge evaluations. Where two edge lines come close, the
//! min over edges is blended with a narrow log-sum-exp so the distance field
//! has no creases; a crease would show up as spurious error in any
//! finite-difference validation of the gradients.
//!
//! Faces only touch pixels within `MARGIN_SIGMAS * sigma` of their support.
//! To keep the truncation differentiable, the sigmoid is multiplied by a C1
//! smoothstep ramp that reaches exactly zero (with zero slope) at the window
//! boundary; pixels crossing the window edge under a camera perturbation
//! then change coverage to second order only, which keeps finite-difference
//! checks of the tangent images clean.

use super::image::SilhouetteImage;
use super::RenderConfig;
use crate::dual::{sigmoid, Dual8, Scalar, LANES};
use crate::error::{Error, Result};
use crate::geom::{CameraPose, Mesh, Vec3};

/// Support window half-width in units of sigma.
const MARGIN_SIGMAS: f64 = 4.0;
/// Length (in sigmas) of the smoothstep ramp at the window boundary.
const RAMP_SIGMAS: f64 = 2.0;
/// Distance (in sigmas) beyond which a face saturates the pixel: the
/// remaining survival is below 1e-9, so the pixel is killed exactly.
const SAT_SIGMAS: f64 = 21.0;
/// Distance (in sigmas) beyond which a contribution's tangents are dropped
/// (sigmoid'(14) ~ 8e-7): the survival product is only rescaled.
const TANGENT_SKIP_SIGMAS: f64 = 14.0;
/// Survival products below this kill the pixel: every further contribution,
/// including tangents, is below double precision noise.
const DEAD_PRODUCT: f64 = 1e-14;
/// Width (in sigmas) of the polynomial smooth-min between edge distances.
const SMIN_K_SIGMAS: f64 = 0.5;

/// Quadratic smooth minimum: equals `min(a, b)` when `|a - b| >= k`, blends
/// with a C1 quadratic inside, dipping at most `k/4` below the hard min.
#[inline(always)]
fn smin<T: Scalar>(a: T, b: T, k: f64) -> T {
    let h = (b - a).scale(0.5 / k).shift(0.5);
    let hv = h.val();
    if hv <= 0.0 {
        return b;
    }
    if hv >= 1.0 {
        return a;
    }
    b + (a - b) * h - (h * (-h).shift(1.0)).scale(k)
}

/// Partial derivatives (d smin/d a, d smin/d b); they sum to one.
#[inline(always)]
fn smin_weights(a: f64, b: f64, k: f64) -> (f64, f64) {
    let h = 0.5 + (b - a) * 0.5 / k;
    if h <= 0.0 {
        return (0.0, 1.0);
    }
    if h >= 1.0 {
        return (1.0, 0.0);
    }
    let inner = (a - b) - k * (1.0 - 2.0 * h);
    let da = h - inner * 0.5 / k;
    let db = (1.0 - h) + inner * 0.5 / k;
    (da, db)
}

/// C1 window ramp: 0 at `x = -MARGIN_SIGMAS`, 1 from
/// `-MARGIN_SIGMAS + RAMP_SIGMAS` on, zero slope at both ends.
/// `x` is the signed distance in sigmas.
#[inline(always)]
fn support_window<T: Scalar>(x: T) -> T {
    let u = x.shift(MARGIN_SIGMAS).scale(1.0 / RAMP_SIGMAS);
    // smoothstep u^2 (3 - 2u)
    u * u * (-u).scale(2.0).shift(3.0)
}

/// Camera parameters lifted into the scalar type `T`.
#[derive(Clone, Copy)]
pub(crate) struct CamParams<T> {
    pub q: [T; 4],
    pub s: T,
    pub t: [T; 2],
    pub z0: T,
}

impl CamParams<f64> {
    pub fn from_pose(pose: &CameraPose) -> Self {
        CamParams { q: pose.q.as_array(), s: pose.s, t: pose.t, z0: pose.z0 }
    }
}

impl CamParams<Dual8> {
    /// Seeds each of the 8 camera parameters on its own tangent lane, in the
    /// optimizer's parameter order `[q; s; t; z0]`.
    pub fn seeded(pose: &CameraPose) -> Self {
        let q = pose.q.as_array();
        CamParams {
            q: [Dual8::var(q[0], 0), Dual8::var(q[1], 1), Dual8::var(q[2], 2), Dual8::var(q[3], 3)],
            s: Dual8::var(pose.s, 4),
            t: [Dual8::var(pose.t[0], 5), Dual8::var(pose.t[1], 6)],
            z0: Dual8::var(pose.z0, 7),
        }
    }
}

/// Projects one vertex to pixel coordinates, returning `(u, v, depth)`.
#[inline]
fn project_vertex<T: Scalar>(cam: &CamParams<T>, v: Vec3, half_w: f64, half_h: f64) -> (T, T, T) {
    let [qw, qx, qy, qz] = cam.q;
    // Homogeneous rotation matrix (quadratic in q, no normalization).
    let m00 = qw * qw + qx * qx - qy * qy - qz * qz;
    let m01 = (qx * qy - qw * qz).scale(2.0);
    let m02 = (qx * qz + qw * qy).scale(2.0);
    let m10 = (qx * qy + qw * qz).scale(2.0);
    let m11 = qw * qw - qx * qx + qy * qy - qz * qz;
    let m12 = (qy * qz - qw * qx).scale(2.0);
    let m20 = (qx * qz - qw * qy).scale(2.0);
    let m21 = (qy * qz + qw * qx).scale(2.0);
    let m22 = qw * qw - qx * qx - qy * qy + qz * qz;

    let rx = m00.scale(v.x) + m01.scale(v.y) + m02.scale(v.z);
    let ry = m10.scale(v.x) + m11.scale(v.y) + m12.scale(v.z);
    let rz = m20.scale(v.x) + m21.scale(v.y) + m22.scale(v.z);

    let denom_inv = (cam.z0 * rz).shift(1.0).recip();
    let sx = cam.s * rx * denom_inv + cam.t[0];
    let sy = cam.s * ry * denom_inv + cam.t[1];
    // Screen [-1, 1] to pixel coordinates.
    let u = sx.scale(half_w).shift(half_w);
    let v_pix = sy.scale(half_h).shift(half_h);
    (u, v_pix, rz)
}

fn check_pole<T: Scalar>(cam: &CamParams<T>, mesh: &Mesh) -> Result<()> {
    let z0 = cam.z0.val();
    if z0 == 0.0 {
        return Ok(());
    }
    for (i, &v) in mesh.vertices.iter().enumerate() {
        let q = crate::geom::UnitQuaternion::new(
            cam.q[0].val(),
            cam.q[1].val(),
            cam.q[2].val(),
            cam.q[3].val(),
        );
        let rz = crate::geom::quat_rotate(q, v).z;
        let denom = 1.0 + z0 * rz;
        if denom <= 0.0 {
            return Err(Error::PoleCrossing { vertex: i, denom });
        }
    }
    Ok(())
}

/// Renders the soft coverage image with scalar type `T`.
pub(crate) fn soft_coverage<T: Scalar>(
    mesh: &Mesh,
    cam: &CamParams<T>,
    cfg: &RenderConfig,
) -> Result<Vec<T>> {
    let (w, h) = (cfg.resolution, cfg.resolution);
    check_pole(cam, mesh)?;
    let half_w = w as f64 * 0.5;
    let half_h = h as f64 * 0.5;
    let projected: Vec<(T, T)> = mesh
        .vertices
        .iter()
        .map(|&v| {
            let (u, vp, _) = project_vertex(cam, v, half_w, half_h);
            (u, vp)
        })
        .collect();

    let mut survival = vec![T::c(1.0); w * h];
    let mut dead = vec![false; w * h];
    let margin = MARGIN_SIGMAS * cfg.sigma;
    let inv_sigma = 1.0 / cfg.sigma;

    for face in &mesh.faces {
        let (x0, y0) = projected[face[0]];
        let (x1, y1) = projected[face[1]];
        let (x2, y2) = projected[face[2]];
        let area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
        if area2.val().abs() < 1e-12 {
            continue;
        }
        let orient = if area2.val() > 0.0 { 1.0 } else { -1.0 };

        // Edge lines as affine functions of the pixel center, oriented
        // positive toward the interior. The primal coefficients drive the
        // scanline walk; the lifted ones are only evaluated for pixels that
        // actually receive a contribution.
        let mut coeffs = [[T::c(0.0); 3]; 3];
        let mut coeffs_val = [[0.0f64; 3]; 3];
        let mut degenerate = false;
        for (e, &(ia, ib)) in [(0usize, 1usize), (1, 2), (2, 0)].iter().enumerate() {
            let (ax, ay) = projected[face[ia]];
            let (bx, by) = projected[face[ib]];
            let ux = bx - ax;
            let uy = by - ay;
            let len2 = ux * ux + uy * uy;
            if len2.val() < 1e-18 {
                degenerate = true;
                break;
            }
            let inv_len = len2.sqrt().recip();
            coeffs[e][0] = (-uy * inv_len).scale(orient);
            coeffs[e][1] = (ux * inv_len).scale(orient);
            coeffs[e][2] = ((uy * ax - ux * ay) * inv_len).scale(orient);
            coeffs_val[e] = [coeffs[e][0].val(), coeffs[e][1].val(), coeffs[e][2].val()];
        }
        if degenerate {
            continue;
        }

        let xs = [x0.val(), x1.val(), x2.val()];
        let ys = [y0.val(), y1.val(), y2.val()];
        let min_x = xs.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
        let max_x = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
        let min_y = ys.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
        let max_y = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
        let col0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let col1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let row0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let row1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if col1 < 0.0 || row1 < 0.0 || min_x > w as f64 || min_y > h as f64 {
            continue;
        }
        let (col1, row1) = (col1 as usize, row1 as usize);
        let sat_d = SAT_SIGMAS * cfg.sigma;
        let skip_d = TANGENT_SKIP_SIGMAS * cfg.sigma;
        let margin_d = MARGIN_SIGMAS * cfg.sigma;

        for row in row0..=row1 {
            let py = row as f64 + 0.5;
            // Exact column interval for this row: min_e(p) >= -margin means
            // every edge value is >= -margin, three half-plane constraints.
            let mut xlo = col0 as f64 + 0.5;
            let mut xhi = col1 as f64 + 0.5;
            let mut empty = false;
            for e in 0..3 {
                let a = coeffs_val[e][0];
                let rest = coeffs_val[e][1] * py + coeffs_val[e][2];
                if a.abs() < 1e-12 {
                    if rest < -margin_d {
                        empty = true;
                        break;
                    }
                } else if a > 0.0 {
                    xlo = xlo.max((-margin_d - rest) / a);
                } else {
                    xhi = xhi.min((-margin_d - rest) / a);
                }
            }
            if empty || xlo > xhi {
                continue;
            }
            let c0 = ((xlo - 0.5).ceil() as usize).max(col0);
            let c1 = (((xhi - 0.5).floor()) as usize).min(col1);
            if c0 > c1 {
                continue;
            }

            let px0 = c0 as f64 + 0.5;
            let mut ev = [
                coeffs_val[0][0] * px0 + coeffs_val[0][1] * py + coeffs_val[0][2],
                coeffs_val[1][0] * px0 + coeffs_val[1][1] * py + coeffs_val[1][2],
                coeffs_val[2][0] * px0 + coeffs_val[2][1] * py + coeffs_val[2][2],
            ];
            let smin_k = SMIN_K_SIGMAS * cfg.sigma;
            let base = row * w;
            for col in c0..=c1 {
                let idx = base + col;
                if !dead[idx] {
                    let d = smin(smin(ev[0], ev[1], smin_k), ev[2], smin_k);
                    if d >= sat_d {
                        survival[idx] = T::c(0.0);
                        dead[idx] = true;
                    } else if d >= skip_d {
                        // Tangents of the contribution are below noise here;
                        // rescaling the survival keeps its own tangents exact.
                        let factor = 1.0 - sigmoid(d * inv_sigma);
                        survival[idx] = survival[idx].scale(factor);
                        if survival[idx].val() < DEAD_PRODUCT {
                            dead[idx] = true;
                        }
                    } else if d > -margin_d {
                        let px = col as f64 + 0.5;
                        // When the two other edges sit beyond the blend
                        // width, both smins clamp and only the nearest edge
                        // carries derivatives; skip lifting the others.
                        let (m, k) = if ev[0] <= ev[1] {
                            if ev[0] <= ev[2] {
                                (ev[0], 0usize)
                            } else {
                                (ev[2], 2)
                            }
                        } else if ev[1] <= ev[2] {
                            (ev[1], 1)
                        } else {
                            (ev[2], 2)
                        };
                        // 1.25 k: even if the two far edges blend with each
                        // other, their smin stays at least k above m, so
                        // both pairwise smins clamp to the hard min.
                        let isolated = ev[(k + 1) % 3] - m >= smin_k * 1.2500001
                            && ev[(k + 2) % 3] - m >= smin_k * 1.2500001;
                        let dd = if isolated {
                            coeffs[k][0].scale(px) + coeffs[k][1].scale(py) + coeffs[k][2]
                        } else {
                            let e0 = coeffs[0][0].scale(px) + coeffs[0][1].scale(py) + coeffs[0][2];
                            let e1 = coeffs[1][0].scale(px) + coeffs[1][1].scale(py) + coeffs[1][2];
                            let e2 = coeffs[2][0].scale(px) + coeffs[2][1].scale(py) + coeffs[2][2];
                            smin(smin(e0, e1, smin_k), e2, smin_k)
                        };
                        let x = dd.scale(inv_sigma);
                        let sg = sigmoid(x);
                        let contribution = if x.val() >= -MARGIN_SIGMAS + RAMP_SIGMAS {
                            sg
                        } else {
                            sg * support_window(x)
                        };
                        if contribution.val() > 0.0 {
                            survival[idx] = survival[idx] * (-contribution).shift(1.0);
                            if survival[idx].val() < DEAD_PRODUCT {
                                dead[idx] = true;
                            }
                        }
                    }
                }
                ev[0] += coeffs_val[0][0];
                ev[1] += coeffs_val[1][0];
                ev[2] += coeffs_val[2][0];
            }
        }
    }

    Ok(survival.into_iter().map(|p| (-p).shift(1.0)).collect())
}

/// Per-camera-parameter tangent images produced alongside a silhouette.
///
/// Lane order matches [`CameraPose::to_params`]: four quaternion components,
/// scale, two translations, z0. Each plane holds d(pixel)/d(parameter).
#[derive(Debug, Clone)]
pub struct CameraTangents {
    pub width: usize,
    pub height: usize,
    pub data: Vec<[f64; LANES]>,
}

impl CameraTangents {
    /// Extracts tangent plane `lane` as a flat image.
    pub fn plane(&self, lane: usize) -> Vec<f64> {
        self.data.iter().map(|t| t[lane]).collect()
    }
}

/// Renders the soft silhouette of `mesh` under `pose`.
pub fn render_silhouette(mesh: &Mesh, pose: &CameraPose, cfg: &RenderConfig) -> Result<SilhouetteImage> {
    let cam = CamParams::from_pose(pose);
    let data = soft_coverage(mesh, &cam, cfg)?;
    Ok(SilhouetteImage::from_data(cfg.resolution, cfg.resolution, data))
}

/// Renders the soft silhouette together with exact forward-mode tangents
/// with respect to the 8 camera parameters.
pub fn render_silhouette_with_grad(
    mesh: &Mesh,
    pose: &CameraPose,
    cfg: &RenderConfig,
) -> Result<(SilhouetteImage, CameraTangents)> {
    let cam = CamParams::seeded(pose);
    let duals = soft_coverage(mesh, &cam, cfg)?;
    let mut img = SilhouetteImage::zeros(cfg.resolution, cfg.resolution);
    let mut tangents = Vec::with_capacity(duals.len());
    for (i, d) in duals.iter().enumerate() {
        img.data[i] = d.v;
        tangents.push(d.d);
    }
    Ok((img, CameraTangents { width: cfg.resolution, height: cfg.resolution, data: tangents }))
}

/// One silhouette-fitting evaluation: MSE loss, its gradient in the 8 camera
/// parameters, and the binarized IoU against the target.
#[derive(Debug, Clone, Copy)]
pub struct FitEval {
    pub loss: f64,
    pub grad: [f64; LANES],
    pub iou: f64,
}

/// Fused render + MSE + gradient used by the silhouette optimization loop.
///
/// Runs a plain forward render, then a reverse sweep per face that chains
/// the per-pixel loss adjoint through the contribution into the 8 camera
/// parameters via the per-face tangents of the edge-line coefficients. This
/// avoids carrying dual numbers per pixel. `target` must match the render
/// resolution.
pub fn silhouette_fit_grad(
    mesh: &Mesh,
    pose: &CameraPose,
    cfg: &RenderConfig,
    target: &SilhouetteImage,
) -> Result<FitEval> {
    if target.width != cfg.resolution || target.height != cfg.resolution {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", cfg.resolution),
            got: format!("{}x{}", target.width, target.height),
        });
    }
    let (w, h) = (cfg.resolution, cfg.resolution);
    let cam_f = CamParams::from_pose(pose);
    let alpha = soft_coverage::<f64>(mesh, &cam_f, cfg)?;

    let n = alpha.len() as f64;
    let mut loss = 0.0;
    let (mut inter, mut uni) = (0u64, 0u64);
    let mut survival = alpha;
    for (p, &x) in survival.iter_mut().zip(&target.data) {
        let a = *p;
        let r = a - x;
        loss += r * r;
        let rb = a >= 0.5;
        let xb = x >= 0.5;
        inter += (rb && xb) as u64;
        uni += (rb || xb) as u64;
        *p = 1.0 - a;
    }
    loss /= n;
    let iou = if uni == 0 { 1.0 } else { inter as f64 / uni as f64 };

    // Reverse sweep.
    let cam_d = CamParams::seeded(pose);
    let half_w = w as f64 * 0.5;
    let half_h = h as f64 * 0.5;
    let projected: Vec<(Dual8, Dual8)> = mesh
        .vertices
        .iter()
        .map(|&v| {
            let (u, vp, _) = project_vertex(&cam_d, v, half_w, half_h);
            (u, vp)
        })
        .collect();

    let margin = MARGIN_SIGMAS * cfg.sigma;
    let inv_sigma = 1.0 / cfg.sigma;
    let smin_k = SMIN_K_SIGMAS * cfg.sigma;
    let skip_d = TANGENT_SKIP_SIGMAS * cfg.sigma;
    let mut grad = [0.0f64; LANES];

    for face in &mesh.faces {
        let (x0, y0) = projected[face[0]];
        let (x1, y1) = projected[face[1]];
        let (x2, y2) = projected[face[2]];
        let area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
        if area2.v.abs() < 1e-12 {
            continue;
        }
        let orient = if area2.v > 0.0 { 1.0 } else { -1.0 };

        let mut coeffs = [[Dual8::ZERO; 3]; 3];
        let mut degenerate = false;
        for (e, &(ia, ib)) in [(0usize, 1usize), (1, 2), (2, 0)].iter().enumerate() {
            let (ax, ay) = projected[face[ia]];
            let (bx, by) = projected[face[ib]];
            let ux = bx - ax;
            let uy = by - ay;
            let len2 = ux * ux + uy * uy;
            if len2.v < 1e-18 {
                degenerate = true;
                break;
            }
            let inv_len = len2.sqrt().recip();
            coeffs[e][0] = (-uy * inv_len).scale(orient);
            coeffs[e][1] = (ux * inv_len).scale(orient);
            coeffs[e][2] = ((uy * ax - ux * ay) * inv_len).scale(orient);
        }
        if degenerate {
            continue;
        }

        let xs = [x0.v, x1.v, x2.v];
        let ys = [y0.v, y1.v, y2.v];
        let min_x = xs.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
        let max_x = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
        let min_y = ys.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
        let max_y = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
        let col0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let col1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let row0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let row1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if col1 < 0.0 || row1 < 0.0 || min_x > w as f64 || min_y > h as f64 {
            continue;
        }
        let (col1, row1) = (col1 as usize, row1 as usize);

        for row in row0..=row1 {
            let py = row as f64 + 0.5;
            let mut xlo = col0 as f64 + 0.5;
            let mut xhi = col1 as f64 + 0.5;
            let mut empty = false;
            for e in 0..3 {
                let a = coeffs[e][0].v;
                let rest = coeffs[e][1].v * py + coeffs[e][2].v;
                if a.abs() < 1e-12 {
                    if rest < -margin {
                        empty = true;
                        break;
                    }
                } else if a > 0.0 {
                    xlo = xlo.max((-margin - rest) / a);
                } else {
                    xhi = xhi.min((-margin - rest) / a);
                }
            }
            if empty || xlo > xhi {
                continue;
            }
            let c0 = ((xlo - 0.5).ceil() as usize).max(col0);
            let c1 = (((xhi - 0.5).floor()) as usize).min(col1);
            if c0 > c1 {
                continue;
            }

            let px0 = c0 as f64 + 0.5;
            let mut ev = [
                coeffs[0][0].v * px0 + coeffs[0][1].v * py + coeffs[0][2].v,
                coeffs[1][0].v * px0 + coeffs[1][1].v * py + coeffs[1][2].v,
                coeffs[2][0].v * px0 + coeffs[2][1].v * py + coeffs[2][2].v,
            ];
            let base = row * w;
            for col in c0..=c1 {
                let idx = base + col;
                let p_total = survival[idx];
                let s1 = smin(ev[0], ev[1], smin_k);
                let d = smin(s1, ev[2], smin_k);
                if d > -margin && d < skip_d && p_total.abs() >= 1e-14 {
                    let xarg = d * inv_sigma;
                    let sg = sigmoid(xarg);
                    let (win, dwin_dx) = if xarg >= -MARGIN_SIGMAS + RAMP_SIGMAS {
                        (1.0, 0.0)
                    } else {
                        let u = (xarg + MARGIN_SIGMAS) / RAMP_SIGMAS;
                        (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u) / RAMP_SIGMAS)
                    };
                    let contribution = sg * win;
                    if contribution > 0.0 && contribution < 1.0 {
                        let p_others = p_total / (1.0 - contribution);
                        let alpha_v = 1.0 - p_total;
                        let dl_dalpha = 2.0 * (alpha_v - target.data[idx]) / n;
                        let dg_dx = sg * (1.0 - sg) * win + sg * dwin_dx;
                        let dl_dd = dl_dalpha * p_others * dg_dx * inv_sigma;
                        if dl_dd != 0.0 {
                            let (w0i, w1i) = smin_weights(ev[0], ev[1], smin_k);
                            let (ws1, w2) = smin_weights(s1, ev[2], smin_k);
                            let wgt = [ws1 * w0i, ws1 * w1i, w2];
                            let px = col as f64 + 0.5;
                            for e in 0..3 {
                                if wgt[e] == 0.0 {
                                    continue;
                                }
                                let dl_de = dl_dd * wgt[e];
                                let (da, db, dc) =
                                    (coeffs[e][0].d, coeffs[e][1].d, coeffs[e][2].d);
                                for lane in 0..LANES {
                                    grad[lane] +=
                                        dl_de * (da[lane] * px + db[lane] * py + dc[lane]);
                                }
                            }
                        }
                    }
                }
                ev[0] += coeffs[0][0].v;
                ev[1] += coeffs[1][0].v;
                ev[2] += coeffs[2][0].v;
            }
        }
    }

    Ok(FitEval { loss, grad, iou })
}

/// MSE loss of the soft silhouette against `target` plus its gradient with
/// respect to the 3D vertex positions, by reverse accumulation through the
/// rasterizer. Used by the remesher, where the camera is fixed and the
/// vertices move.
pub fn silhouette_vertex_grad(
    mesh: &Mesh,
    pose: &CameraPose,
    cfg: &RenderConfig,
    target: &SilhouetteImage,
) -> Result<(f64, Vec<Vec3>)> {
    if target.width != cfg.resolution || target.height != cfg.resolution {
        return Err(Error::ShapeMismatch {
            expected: format!("{0}x{0}", cfg.resolution),
            got: format!("{}x{}", target.width, target.height),
        });
    }
    let (w, h) = (cfg.resolution, cfg.resolution);
    let cam = CamParams::from_pose(pose);
    check_pole(&cam, mesh)?;
    let half_w = w as f64 * 0.5;
    let half_h = h as f64 * 0.5;

    // Forward projection, keeping depth for the perspective chain rule.
    let mut projected = Vec::with_capacity(mesh.vertices.len());
    let mut denom_inv = Vec::with_capacity(mesh.vertices.len());
    for &v in &mesh.vertices {
        let (u, vp, rz) = project_vertex(&cam, v, half_w, half_h);
        projected.push((u, vp));
        denom_inv.push(1.0 / (1.0 + pose.z0 * rz));
    }

    // First pass: survival product per pixel.
    let survival = soft_coverage(mesh, &cam, cfg)?
        .into_iter()
        .map(|alpha| 1.0 - alpha)
        .collect::<Vec<f64>>();

    let n = (w * h) as f64;
    let mut loss = 0.0;
    for (p, &x) in survival.iter().zip(&target.data) {
        let r = (1.0 - p) - x;
        loss += r * r;
    }
    loss /= n;

    // Second pass: per-face, per-pixel adjoints into projected positions.
    let margin = MARGIN_SIGMAS * cfg.sigma;
    let inv_sigma = 1.0 / cfg.sigma;
    let mut grad_proj = vec![[0.0f64; 2]; mesh.vertices.len()];

    for face in &mesh.faces {
        let (x0, y0) = projected[face[0]];
        let (x1, y1) = projected[face[1]];
        let (x2, y2) = projected[face[2]];
        let area2 = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0);
        if area2.abs() < 1e-12 {
            continue;
        }
        let orient = if area2 > 0.0 { 1.0 } else { -1.0 };

        // Per-edge affine coefficients and endpoint indices.
        let edges = [(0usize, 1usize), (1, 2), (2, 0)];
        let mut coeffs = [[0.0f64; 3]; 3];
        let mut lens = [0.0f64; 3];
        let mut degenerate = false;
        for (e, &(ia, ib)) in edges.iter().enumerate() {
            let (ax, ay) = projected[face[ia]];
            let (bx, by) = projected[face[ib]];
            let (ux, uy) = (bx - ax, by - ay);
            let len = (ux * ux + uy * uy).sqrt();
            if len < 1e-9 {
                degenerate = true;
                break;
            }
            coeffs[e] = [-uy / len * orient, ux / len * orient, (uy * ax - ux * ay) / len * orient];
            lens[e] = len;
        }
        if degenerate {
            continue;
        }

        let xs = [x0, x1, x2];
        let ys = [y0, y1, y2];
        let min_x = xs.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
        let max_x = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
        let min_y = ys.iter().cloned().fold(f64::INFINITY, f64::min) - margin;
        let max_y = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + margin;
        let col0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let col1 = (max_x - 0.5).floor().min(w as f64 - 1.0);
        let row0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let row1 = (max_y - 0.5).floor().min(h as f64 - 1.0);
        if col1 < 0.0 || row1 < 0.0 || min_x > w as f64 || min_y > h as f64 {
            continue;
        }
        let (col1, row1) = (col1 as usize, row1 as usize);

        let margin_d = MARGIN_SIGMAS * cfg.sigma;
        for row in row0..=row1 {
            let py = row as f64 + 0.5;
            let mut xlo = col0 as f64 + 0.5;
            let mut xhi = col1 as f64 + 0.5;
            let mut empty = false;
            for e in 0..3 {
                let a = coeffs[e][0];
                let rest = coeffs[e][1] * py + coeffs[e][2];
                if a.abs() < 1e-12 {
                    if rest < -margin_d {
                        empty = true;
                        break;
                    }
                } else if a > 0.0 {
                    xlo = xlo.max((-margin_d - rest) / a);
                } else {
                    xhi = xhi.min((-margin_d - rest) / a);
                }
            }
            if empty || xlo > xhi {
                continue;
            }
            let c0 = ((xlo - 0.5).ceil() as usize).max(col0);
            let c1 = (((xhi - 0.5).floor()) as usize).min(col1);
            if c0 > c1 {
                continue;
            }
            for col in c0..=c1 {
                let px = col as f64 + 0.5;
                let idx = row * w + col;
                let e = [
                    coeffs[0][0] * px + coeffs[0][1] * py + coeffs[0][2],
                    coeffs[1][0] * px + coeffs[1][1] * py + coeffs[1][2],
                    coeffs[2][0] * px + coeffs[2][1] * py + coeffs[2][2],
                ];
                // Smooth-min over edges; weights are d(d)/d(e_i).
                let smin_k = SMIN_K_SIGMAS * cfg.sigma;
                let s1 = smin(e[0], e[1], smin_k);
                let d = smin(s1, e[2], smin_k);
                let (w0_inner, w1_inner) = smin_weights(e[0], e[1], smin_k);
                let (w_s1, w2) = smin_weights(s1, e[2], smin_k);
                let wgt = [w_s1 * w0_inner, w_s1 * w1_inner, w2];

                let xarg = d * inv_sigma;
                if xarg <= -MARGIN_SIGMAS || xarg >= SAT_SIGMAS {
                    continue;
                }
                let sg = sigmoid(xarg);
                let (win, dwin_dx) = if xarg >= -MARGIN_SIGMAS + RAMP_SIGMAS {
                    (1.0, 0.0)
                } else {
                    let u = (xarg + MARGIN_SIGMAS) / RAMP_SIGMAS;
                    (u * u * (3.0 - 2.0 * u), 6.0 * u * (1.0 - u) / RAMP_SIGMAS)
                };
                let contribution = sg * win;
                if contribution <= 0.0 || contribution >= 1.0 {
                    continue;
                }
                let p_total = survival[idx];
                let one_minus = 1.0 - contribution;
                // d alpha / d D_f = prod of the other faces' survivals.
                let p_others = p_total / one_minus;
                if p_others.abs() < 1e-14 {
                    continue;
                }
                let alpha = 1.0 - p_total;
                let dl_dalpha = 2.0 * (alpha - target.data[idx]) / n;
                let dg_dx = sg * (1.0 - sg) * win + sg * dwin_dx;
                let dl_dd = dl_dalpha * p_others * dg_dx * inv_sigma;
                if dl_dd == 0.0 {
                    continue;
                }

                for (ke, &weight) in wgt.iter().enumerate() {
                    if weight == 0.0 {
                        continue;
                    }
                    let dl_de = dl_dd * weight;
                    let (ia, ib) = edges[ke];
                    let (ax, ay) = projected[face[ia]];
                    let (bx, by) = projected[face[ib]];
                    let len = lens[ke];
                    let (ux, uy) = ((bx - ax) / len, (by - ay) / len);
                    let cross = (bx - ax) * (py - ay) - (by - ay) * (px - ax);
                    // e = orient * cross / len.
                    let dcross_da = [by - py, px - bx];
                    let dcross_db = [py - ay, ax - px];
                    let dlen_da = [-ux, -uy];
                    let dlen_db = [ux, uy];
                    let k1 = orient / len;
                    let k2 = orient * cross / (len * len);
                    let de_da =
                        [k1 * dcross_da[0] - k2 * dlen_da[0], k1 * dcross_da[1] - k2 * dlen_da[1]];
                    let de_db =
                        [k1 * dcross_db[0] - k2 * dlen_db[0], k1 * dcross_db[1] - k2 * dlen_db[1]];
                    grad_proj[face[ia]][0] += dl_de * de_da[0];
                    grad_proj[face[ia]][1] += dl_de * de_da[1];
                    grad_proj[face[ib]][0] += dl_de * de_db[0];
                    grad_proj[face[ib]][1] += dl_de * de_db[1];
                }
            }
        }
    }

    // Chain through the projection to 3D vertex positions.
    let rot = pose.q.rotation_matrix();
    let mut grad = vec![Vec3::ZERO; mesh.vertices.len()];
    for (i, g) in grad_proj.iter().enumerate() {
        if g[0] == 0.0 && g[1] == 0.0 {
            continue;
        }
        let di = denom_inv[i];
        let v = mesh.vertices[i];
        let r = crate::geom::quat_rotate(pose.q, v);
        // u = (s * rx * di + tx) * half_w + half_w, di = 1/(1 + z0 rz).
        let du_dr = [
            half_w * pose.s * di,
            0.0,
            -half_w * pose.s * r.x * di * di * pose.z0,
        ];
        let dv_dr = [
            0.0,
            half_h * pose.s * di,
            -half_h * pose.s * r.y * di * di * pose.z0,
        ];
        for axis in 0..3 {
            let dr_daxis = [rot[0][axis], rot[1][axis], rot[2][axis]];
            let du = du_dr[0] * dr_daxis[0] + du_dr[1] * dr_daxis[1] + du_dr[2] * dr_daxis[2];
            let dv = dv_dr[0] * dr_daxis[0] + dv_dr[1] * dr_daxis[1] + dv_dr[2] * dr_daxis[2];
            let val = g[0] * du + g[1] * dv;
            match axis {
                0 => grad[i].x += val,
                1 => grad[i].y += val,
                _ => grad[i].z += val,
            }
        }
    }

    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{look_at_quaternion, UnitQuaternion};
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;

    fn tetra() -> Mesh {
        Mesh::new(
            vec![
                Vec3::new(0.9, 0.0, -0.3),
                Vec3::new(-0.5, 0.8, -0.3),
                Vec3::new(-0.5, -0.8, -0.3),
                Vec3::new(0.0, 0.0, 0.9),
            ],
            vec![[0, 1, 2], [0, 1, 3], [1, 2, 3], [2, 0, 3]],
        )
    }

    fn random_pose(rng: &mut impl Rng) -> CameraPose {
        let q = UnitQuaternion::normalized(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        CameraPose::new(
            q,
            rng.gen_range(0.4..0.8),
            [rng.gen_range(-0.1..0.1), rng.gen_range(-0.1..0.1)],
            rng.gen_range(0.0..0.3),
        )
    }

    #[test]
    fn empty_mesh_renders_black() {
        let mesh = Mesh::new(vec![], vec![]);
        let img = render_silhouette(&mesh, &CameraPose::identity(), &RenderConfig::new(64)).unwrap();
        assert!(img.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn large_triangle_saturates_interior() {
        let mesh = Mesh::new(
            vec![Vec3::new(-3.0, -3.0, 0.0), Vec3::new(3.0, -3.0, 0.0), Vec3::new(0.0, 4.0, 0.0)],
            vec![[0, 1, 2]],
        );
        let img = render_silhouette(&mesh, &CameraPose::identity(), &RenderConfig::new(64)).unwrap();
        let center = img.get(32, 32);
        assert!(center >= 0.99, "center coverage {center}");
    }

    #[test]
    fn half_frame_square_covers_half() {
        // Unit square over the left half of the frame: x in [-1, 0].
        let mesh = Mesh::new(
            vec![
                Vec3::new(-1.0, -1.0, 0.0),
                Vec3::new(0.0, -1.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(-1.0, 1.0, 0.0),
            ],
            vec![[0, 1, 2], [0, 2, 3]],
        );
        let img = render_silhouette(&mesh, &CameraPose::identity(), &RenderConfig::new(128)).unwrap();
        assert!((img.mean() - 0.5).abs() < 0.02, "mean {}", img.mean());
    }

    #[test]
    fn soft_silhouette_binarizes_to_hard_mask_away_from_edges() {
        let mesh = tetra();
        let pose = CameraPose::new(look_at_quaternion(0.4, 0.2), 0.6, [0.0, 0.0], 0.0);
        let cfg = RenderConfig::new(96);
        let soft = render_silhouette(&mesh, &pose, &cfg).unwrap();
        let vis = super::super::rasterize_visibility(&mesh, &pose, 96, 96).unwrap();
        let hard = vis.coverage();
        // Compare on pixels farther than 3 sigma from any soft edge, using
        // the soft value itself as the distance proxy.
        for idx in 0..soft.data.len() {
            let s = soft.data[idx];
            if !(0.05..=0.95).contains(&s) {
                let margin_zone = s > 1.0 / (1.0 + (3.0f64).exp()) && s < 1.0 / (1.0 + (-3.0f64).exp());
                if !margin_zone {
                    assert_eq!((s >= 0.5) as i32, hard.data[idx] as i32, "pixel {idx}");
                }
            }
        }
    }

    #[test]
    fn camera_tangents_match_finite_differences() {
        let mesh = tetra();
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let cfg = RenderConfig::new(96);
        for _ in 0..5 {
            let pose = random_pose(&mut rng);
            let (_, tangents) = render_silhouette_with_grad(&mesh, &pose, &cfg).unwrap();
            let params = pose.to_params();
            let h = 1e-4;
            for lane in 0..LANES {
                let mut plus = params;
                plus[lane] += h;
                let mut minus = params;
                minus[lane] -= h;
                let img_p =
                    render_silhouette(&mesh, &CameraPose::from_params(&plus), &cfg).unwrap();
                let img_m =
                    render_silhouette(&mesh, &CameraPose::from_params(&minus), &cfg).unwrap();
                let mut num = 0.0;
                let mut den = 0.0;
                for i in 0..img_p.data.len() {
                    let fd = (img_p.data[i] - img_m.data[i]) / (2.0 * h);
                    let t = tangents.data[i][lane];
                    num += (t - fd) * (t - fd);
                    den += fd * fd;
                }
                let rel = (num / den.max(1e-30)).sqrt();
                assert!(rel < 1e-3, "lane {lane}: rel err {rel}");
            }
        }
    }

    #[test]
    fn vertex_gradients_match_finite_differences() {
        let mesh = tetra();
        let pose = CameraPose::new(look_at_quaternion(0.9, -0.4), 0.55, [0.05, -0.03], 0.1);
        let cfg = RenderConfig::new(64);
        let target = {
            let shifted = CameraPose::new(pose.q, 0.5, [0.0, 0.02], 0.1);
            render_silhouette(&mesh, &shifted, &cfg).unwrap()
        };
        let (loss0, grad) = silhouette_vertex_grad(&mesh, &pose, &cfg, &target).unwrap();
        assert!(loss0 > 0.0);
        let h = 1e-5;
        let mut checked = 0;
        for vi in 0..mesh.vertices.len() {
            for axis in 0..3 {
                let mut mesh_p = mesh.clone();
                let mut mesh_m = mesh.clone();
                match axis {
                    0 => {
                        mesh_p.vertices[vi].x += h;
                        mesh_m.vertices[vi].x -= h;
                    }
                    1 => {
                        mesh_p.vertices[vi].y += h;
                        mesh_m.vertices[vi].y -= h;
                    }
                    _ => {
                        mesh_p.vertices[vi].z += h;
                        mesh_m.vertices[vi].z -= h;
                    }
                }
                let lp = {
                    let img = render_silhouette(&mesh_p, &pose, &cfg).unwrap();
                    super::super::silhouette_mse(&img, &target).unwrap().0
                };
                let lm = {
                    let img = render_silhouette(&mesh_m, &pose, &cfg).unwrap();
                    super::super::silhouette_mse(&img, &target).unwrap().0
                };
                let fd = (lp - lm) / (2.0 * h);
                let g = match axis {
                    0 => grad[vi].x,
                    1 => grad[vi].y,
                    _ => grad[vi].z,
                };
                if fd.abs() > 1e-8 {
                    let rel = (g - fd).abs() / fd.abs().max(1e-12);
                    assert!(rel < 2e-3, "v{vi} axis {axis}: grad {g} vs fd {fd}");
                    checked += 1;
                }
            }
        }
        assert!(checked > 6, "too few informative coordinates: {checked}");
    }

    #[test]
    fn fit_gradient_matches_loss_finite_differences() {
        let mesh = tetra();
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let cfg = RenderConfig::new(96);
        let target = render_silhouette(
            &mesh,
            &CameraPose::new(look_at_quaternion(1.1, 0.2), 0.58, [0.01, 0.03], 0.1),
            &cfg,
        )
        .unwrap();
        for _ in 0..3 {
            let pose = random_pose(&mut rng);
            let fit = silhouette_fit_grad(&mesh, &pose, &cfg, &target).unwrap();
            let params = pose.to_params();
            let h = 1e-5;
            for lane in 0..LANES {
                let mut plus = params;
                plus[lane] += h;
                let mut minus = params;
                minus[lane] -= h;
                let lp = {
                    let img =
                        render_silhouette(&mesh, &CameraPose::from_params(&plus), &cfg).unwrap();
                    super::super::silhouette_mse(&img, &target).unwrap().0
                };
                let lm = {
                    let img =
                        render_silhouette(&mesh, &CameraPose::from_params(&minus), &cfg).unwrap();
                    super::super::silhouette_mse(&img, &target).unwrap().0
                };
                let fd = (lp - lm) / (2.0 * h);
                let rel = (fit.grad[lane] - fd).abs() / fd.abs().max(1e-9);
                assert!(rel < 2e-3, "lane {lane}: grad {} vs fd {fd}", fit.grad[lane]);
            }
        }
    }

    #[test]
    fn fused_fit_matches_separate_render_and_mse() {
        let mesh = tetra();
        let pose = CameraPose::new(look_at_quaternion(0.3, 0.5), 0.6, [0.02, 0.0], 0.05);
        let cfg = RenderConfig::new(96);
        let target = render_silhouette(
            &mesh,
            &CameraPose::new(look_at_quaternion(0.5, 0.4), 0.6, [0.0, 0.0], 0.05),
            &cfg,
        )
        .unwrap();
        let fit = silhouette_fit_grad(&mesh, &pose, &cfg, &target).unwrap();
        let img = render_silhouette(&mesh, &pose, &cfg).unwrap();
        let (loss, _) = super::super::silhouette_mse(&img, &target).unwrap();
        assert!((fit.loss - loss).abs() < 1e-12);
        let iou_direct = super::super::iou(&img, &target, 0.5).unwrap();
        assert!((fit.iou - iou_direct).abs() < 1e-12);
    }

    #[test]
    fn pole_crossing_propagates() {
        let mesh = tetra();
        let pose = CameraPose::new(UnitQuaternion::IDENTITY, 0.6, [0.0, 0.0], 4.0);
        let err = render_silhouette(&mesh, &pose, &RenderConfig::new(32));
        assert!(matches!(err, Err(Error::PoleCrossing { .. })));
    }
}
