//! SIFT keypoint detection and description on grayscale strips.
//!
//! Difference-of-Gaussians scale space (3 scales per octave, base σ 1.6),
//! sub-pixel extremum refinement, contrast and edge rejection, 36-bin
//! orientation assignment with 80% secondary peaks, and the 4×4×8
//! gradient-histogram descriptor clamped at 0.2 and renormalized.

use crate::imageprep::GrayImage;

#[derive(Debug, Clone, Copy)]
pub struct SiftParams {
    /// Blur of the scale-space base level.
    pub sigma: f64,
    /// Scales per octave (the s in 2^(1/s)).
    pub scales_per_octave: usize,
    /// Minimum |DoG| response after refinement, intensities in [0, 1].
    pub contrast_threshold: f64,
    /// Hessian trace²/det edge-rejection ratio.
    pub edge_threshold: f64,
    /// Blur assumed already present in the input image.
    pub assumed_blur: f64,
}

impl Default for SiftParams {
    fn default() -> Self {
        SiftParams {
            sigma: 1.6,
            scales_per_octave: 3,
            contrast_threshold: 0.03,
            edge_threshold: 10.0,
            assumed_blur: 0.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Keypoint {
    pub x: f64,
    pub y: f64,
    /// Blur level σ at which the extremum lives, in input-image units.
    pub scale: f64,
    /// Dominant gradient orientation, radians in [0, 2π).
    pub orientation: f64,
    /// |DoG| contrast magnitude at the refined extremum.
    pub response: f64,
}

pub const DESCRIPTOR_LEN: usize = 128;

const IMG_BORDER: i64 = 5;
const MAX_INTERP_STEPS: usize = 5;
const ORI_BINS: usize = 36;
const ORI_SIGMA_FACTOR: f64 = 1.5;
const ORI_RADIUS_FACTOR: f64 = 4.5; // 3 × 1.5σ window
const ORI_PEAK_RATIO: f32 = 0.8;
const DESCR_WIDTH: usize = 4;
const DESCR_ORI_BINS: usize = 8;
const DESCR_SCALE_FACTOR: f64 = 3.0;
const DESCR_MAG_CLAMP: f32 = 0.2;

fn gaussian_blur(src: &GrayImage, sigma: f64) -> GrayImage {
    if sigma <= 0.0 {
        return src.clone();
    }
    let radius = (4.0 * sigma).ceil() as i64;
    let mut kernel = Vec::with_capacity((2 * radius + 1) as usize);
    let denom = 2.0 * sigma * sigma;
    for i in -radius..=radius {
        kernel.push((-(i * i) as f64 / denom).exp() as f32);
    }
    let sum: f32 = kernel.iter().sum();
    for k in &mut kernel {
        *k /= sum;
    }

    let (w, h) = (src.width as i64, src.height as i64);
    // horizontal pass
    let mut tmp = GrayImage::new(src.width, src.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (ki, &kv) in kernel.iter().enumerate() {
                acc += kv * src.get_clamped(x + ki as i64 - radius, y);
            }
            tmp.set(x as u32, y as u32, acc);
        }
    }
    // vertical pass
    let mut out = GrayImage::new(src.width, src.height);
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0f32;
            for (ki, &kv) in kernel.iter().enumerate() {
                acc += kv * tmp.get_clamped(x, y + ki as i64 - radius);
            }
            out.set(x as u32, y as u32, acc);
        }
    }
    out
}

fn downsample(src: &GrayImage) -> GrayImage {
    let w = (src.width / 2).max(1);
    let h = (src.height / 2).max(1);
    let mut out = GrayImage::new(w, h);
    for y in 0..h {
        for x in 0..w {
            out.set(x, y, src.get(x * 2, y * 2));
        }
    }
    out
}

struct Octave {
    gauss: Vec<GrayImage>,
    dog: Vec<GrayImage>,
}

fn build_scale_space(image: &GrayImage, params: &SiftParams) -> Vec<Octave> {
    let s = params.scales_per_octave;
    let levels = s + 3;
    let k = 2f64.powf(1.0 / s as f64);

    // incremental blur amounts per level
    let mut sig = vec![0.0f64; levels];
    sig[0] = params.sigma;
    for i in 1..levels {
        let prev = params.sigma * k.powi(i as i32 - 1);
        let total = prev * k;
        sig[i] = (total * total - prev * prev).sqrt();
    }

    let n_octaves = {
        let min_dim = image.width.min(image.height) as f64;
        ((min_dim.log2() as i64) - 3).max(1) as usize
    };

    let base_blur = (params.sigma * params.sigma - params.assumed_blur * params.assumed_blur)
        .max(0.0)
        .sqrt();
    let mut base = gaussian_blur(image, base_blur);

    let mut octaves = Vec::with_capacity(n_octaves);
    for oct in 0..n_octaves {
        let mut gauss = Vec::with_capacity(levels);
        gauss.push(base.clone());
        for i in 1..levels {
            gauss.push(gaussian_blur(&gauss[i - 1], sig[i]));
        }
        let dog: Vec<GrayImage> = (0..levels - 1)
            .map(|i| {
                let mut d = GrayImage::new(gauss[i].width, gauss[i].height);
                for p in 0..d.pixels.len() {
                    d.pixels[p] = gauss[i + 1].pixels[p] - gauss[i].pixels[p];
                }
                d
            })
            .collect();
        if oct + 1 < n_octaves {
            base = downsample(&gauss[s]); // level with blur 2σ seeds the next octave
        }
        octaves.push(Octave { gauss, dog });
    }
    octaves
}

fn solve3(h: [[f64; 3]; 3], g: [f64; 3]) -> Option<[f64; 3]> {
    let mut a = [
        [h[0][0], h[0][1], h[0][2], g[0]],
        [h[1][0], h[1][1], h[1][2], g[1]],
        [h[2][0], h[2][1], h[2][2], g[2]],
    ];
    for col in 0..3 {
        let mut pivot = col;
        for r in col + 1..3 {
            if a[r][col].abs() > a[pivot][col].abs() {
                pivot = r;
            }
        }
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        for r in 0..3 {
            if r == col {
                continue;
            }
            let f = a[r][col] / a[col][col];
            for c in col..4 {
                a[r][c] -= f * a[col][c];
            }
        }
    }
    Some([a[0][3] / a[0][0], a[1][3] / a[1][1], a[2][3] / a[2][2]])
}

struct RefinedExtremum {
    col: i64,
    row: i64,
    layer: usize,
    offset: [f64; 3], // (x, y, scale)
    contrast: f64,
}

fn refine_extremum(
    octave: &Octave,
    mut layer: usize,
    mut row: i64,
    mut col: i64,
    params: &SiftParams,
) -> Option<RefinedExtremum> {
    let n_dog = octave.dog.len();
    let (w, h) = (octave.dog[0].width as i64, octave.dog[0].height as i64);
    let mut offset;

    for step in 0..=MAX_INTERP_STEPS {
        let d = &octave.dog;
        let v = |l: usize, r: i64, c: i64| d[l].get(c as u32, r as u32) as f64;

        let dx = (v(layer, row, col + 1) - v(layer, row, col - 1)) / 2.0;
        let dy = (v(layer, row + 1, col) - v(layer, row - 1, col)) / 2.0;
        let ds = (v(layer + 1, row, col) - v(layer - 1, row, col)) / 2.0;
        let center = v(layer, row, col);
        let dxx = v(layer, row, col + 1) + v(layer, row, col - 1) - 2.0 * center;
        let dyy = v(layer, row + 1, col) + v(layer, row - 1, col) - 2.0 * center;
        let dss = v(layer + 1, row, col) + v(layer - 1, row, col) - 2.0 * center;
        let dxy = (v(layer, row + 1, col + 1) - v(layer, row + 1, col - 1)
            - v(layer, row - 1, col + 1)
            + v(layer, row - 1, col - 1))
            / 4.0;
        let dxs = (v(layer + 1, row, col + 1) - v(layer + 1, row, col - 1)
            - v(layer - 1, row, col + 1)
            + v(layer - 1, row, col - 1))
            / 4.0;
        let dys = (v(layer + 1, row + 1, col) - v(layer + 1, row - 1, col)
            - v(layer - 1, row + 1, col)
            + v(layer - 1, row - 1, col))
            / 4.0;

        let hess = [[dxx, dxy, dxs], [dxy, dyy, dys], [dxs, dys, dss]];
        let sol = solve3(hess, [dx, dy, ds])?;
        offset = [-sol[0], -sol[1], -sol[2]];

        if offset[0].abs() < 0.5 && offset[1].abs() < 0.5 && offset[2].abs() < 0.5 {
            let contrast = center + 0.5 * (dx * offset[0] + dy * offset[1] + ds * offset[2]);
            if contrast.abs() < params.contrast_threshold {
                return None;
            }
            // edge rejection on the 2x2 spatial Hessian
            let tr = dxx + dyy;
            let det = dxx * dyy - dxy * dxy;
            let r = params.edge_threshold;
            if det <= 0.0 || tr * tr * r >= (r + 1.0) * (r + 1.0) * det {
                return None;
            }
            return Some(RefinedExtremum {
                col,
                row,
                layer,
                offset,
                contrast,
            });
        }
        if step == MAX_INTERP_STEPS {
            return None;
        }
        col += offset[0].round() as i64;
        row += offset[1].round() as i64;
        let dl = offset[2].round() as i64;
        let new_layer = layer as i64 + dl;
        if new_layer < 1
            || new_layer as usize > n_dog - 2
            || col < IMG_BORDER
            || col >= w - IMG_BORDER
            || row < IMG_BORDER
            || row >= h - IMG_BORDER
        {
            return None;
        }
        layer = new_layer as usize;
    }
    None
}

/// Gradient at integer pixel; y increases downward in storage but the
/// derivative uses the upward convention so angles rotate the usual way.
#[inline]
fn gradient(img: &GrayImage, row: i64, col: i64) -> (f64, f64) {
    let dx = (img.get_clamped(col + 1, row) - img.get_clamped(col - 1, row)) as f64;
    let dy = (img.get_clamped(col, row - 1) - img.get_clamped(col, row + 1)) as f64;
    (dx, dy)
}

/// 36-bin gradient-orientation histogram around the keypoint; returns the
/// interpolated angles of the global peak and all local peaks within 80%.
fn orientation_peaks(img: &GrayImage, row: f64, col: f64, scale_oct: f64) -> Vec<f64> {
    let radius = (ORI_RADIUS_FACTOR * scale_oct).round() as i64;
    let weight_scale = -1.0 / (2.0 * (ORI_SIGMA_FACTOR * scale_oct).powi(2));
    let mut hist = [0.0f32; ORI_BINS];
    let (w, h) = (img.width as i64, img.height as i64);
    let (rc, cc) = (row.round() as i64, col.round() as i64);

    for i in -radius..=radius {
        let y = rc + i;
        if y <= 0 || y >= h - 1 {
            continue;
        }
        for j in -radius..=radius {
            let x = cc + j;
            if x <= 0 || x >= w - 1 {
                continue;
            }
            let (dx, dy) = gradient(img, y, x);
            let mag = (dx * dx + dy * dy).sqrt();
            let ori = dy.atan2(dx); // [-pi, pi]
            let weight = ((i * i + j * j) as f64 * weight_scale).exp();
            let mut bin =
                ((ori + std::f64::consts::PI) / (2.0 * std::f64::consts::PI) * ORI_BINS as f64)
                    .floor() as i64;
            if bin >= ORI_BINS as i64 {
                bin -= ORI_BINS as i64;
            }
            hist[bin as usize] += (weight * mag) as f32;
        }
    }

    // circular smoothing, [1 4 6 4 1]/16
    let raw = hist;
    for i in 0..ORI_BINS {
        let m2 = raw[(i + ORI_BINS - 2) % ORI_BINS];
        let m1 = raw[(i + ORI_BINS - 1) % ORI_BINS];
        let p1 = raw[(i + 1) % ORI_BINS];
        let p2 = raw[(i + 2) % ORI_BINS];
        hist[i] = (m2 + p2) * (1.0 / 16.0) + (m1 + p1) * (4.0 / 16.0) + raw[i] * (6.0 / 16.0);
    }

    let max = hist.iter().cloned().fold(f32::MIN, f32::max);
    if max <= 0.0 {
        return Vec::new();
    }
    let thr = max * ORI_PEAK_RATIO;
    let mut peaks = Vec::new();
    for i in 0..ORI_BINS {
        let left = hist[(i + ORI_BINS - 1) % ORI_BINS];
        let right = hist[(i + 1) % ORI_BINS];
        if hist[i] > left && hist[i] > right && hist[i] >= thr {
            let denom = left - 2.0 * hist[i] + right;
            let delta = if denom.abs() < 1e-12 {
                0.0
            } else {
                0.5 * (left - right) / denom
            } as f64;
            let bin = (i as f64 + delta).rem_euclid(ORI_BINS as f64);
            let angle = bin / ORI_BINS as f64 * 2.0 * std::f64::consts::PI;
            peaks.push(angle);
        }
    }
    peaks
}

fn compute_descriptor(
    img: &GrayImage,
    row: f64,
    col: f64,
    scale_oct: f64,
    angle: f64,
) -> Vec<f32> {
    let d = DESCR_WIDTH;
    let n = DESCR_ORI_BINS;
    // histogram angle measured relative to the keypoint orientation;
    // shift by pi so raw atan2 output lands in [0, 2pi)
    let cos_t = angle.cos();
    let sin_t = angle.sin();
    let bins_per_rad = n as f64 / (2.0 * std::f64::consts::PI);
    let exp_scale = -1.0 / (d as f64 * d as f64 * 0.5);
    let hist_width = DESCR_SCALE_FACTOR * scale_oct;
    let radius = (hist_width * std::f64::consts::SQRT_2 * (d as f64 + 1.0) * 0.5).round() as i64;
    let (w, h) = (img.width as i64, img.height as i64);
    let (rc, cc) = (row.round() as i64, col.round() as i64);

    // padded histogram for clean trilinear spill
    let mut hist = vec![0.0f32; (d + 2) * (d + 2) * (n + 2)];

    for i in -radius..=radius {
        for j in -radius..=radius {
            let c_rot = (j as f64 * cos_t - i as f64 * sin_t) / hist_width;
            let r_rot = (j as f64 * sin_t + i as f64 * cos_t) / hist_width;
            let rbin = r_rot + d as f64 / 2.0 - 0.5;
            let cbin = c_rot + d as f64 / 2.0 - 0.5;
            let y = rc + i;
            let x = cc + j;
            if rbin <= -1.0 || rbin >= d as f64 || cbin <= -1.0 || cbin >= d as f64 {
                continue;
            }
            if y <= 0 || y >= h - 1 || x <= 0 || x >= w - 1 {
                continue;
            }
            let (dx, dy) = gradient(img, y, x);
            let mag = (dx * dx + dy * dy).sqrt()
                * ((c_rot * c_rot + r_rot * r_rot) * exp_scale).exp();
            let mut obin = (dy.atan2(dx) - angle) * bins_per_rad;
            while obin < 0.0 {
                obin += n as f64;
            }
            while obin >= n as f64 {
                obin -= n as f64;
            }

            let r0 = rbin.floor();
            let c0 = cbin.floor();
            let o0 = obin.floor();
            let (fr, fc, fo) = (rbin - r0, cbin - c0, obin - o0);
            let (r0, c0, o0) = (r0 as i64, c0 as i64, o0 as usize);

            let v = mag as f32;
            let v_r1 = v * fr as f32;
            let v_r0 = v - v_r1;
            let v_rc11 = v_r1 * fc as f32;
            let v_rc10 = v_r1 - v_rc11;
            let v_rc01 = v_r0 * fc as f32;
            let v_rc00 = v_r0 - v_rc01;
            let fo = fo as f32;
            let idx = |r: i64, c: i64, o: usize| -> usize {
                ((r + 1) as usize * (d + 2) + (c + 1) as usize) * (n + 2) + o
            };
            hist[idx(r0, c0, o0)] += v_rc00 * (1.0 - fo);
            hist[idx(r0, c0, o0 + 1)] += v_rc00 * fo;
            hist[idx(r0, c0 + 1, o0)] += v_rc01 * (1.0 - fo);
            hist[idx(r0, c0 + 1, o0 + 1)] += v_rc01 * fo;
            hist[idx(r0 + 1, c0, o0)] += v_rc10 * (1.0 - fo);
            hist[idx(r0 + 1, c0, o0 + 1)] += v_rc10 * fo;
            hist[idx(r0 + 1, c0 + 1, o0)] += v_rc11 * (1.0 - fo);
            hist[idx(r0 + 1, c0 + 1, o0 + 1)] += v_rc11 * fo;
        }
    }

    // fold the orientation wraparound and drop padding
    let mut desc = vec![0.0f32; DESCRIPTOR_LEN];
    for r in 0..d {
        for c in 0..d {
            let base = ((r + 1) * (d + 2) + (c + 1)) * (n + 2);
            let hist_slice = &mut hist[base..base + n + 2];
            hist_slice[0] += hist_slice[n];
            hist_slice[1] += hist_slice[n + 1];
            for o in 0..n {
                desc[(r * d + c) * n + o] = hist_slice[o];
            }
        }
    }

    // normalize, clamp at 0.2, renormalize
    let norm = desc.iter().map(|&v| v * v).sum::<f32>().sqrt();
    if norm > 0.0 {
        for v in &mut desc {
            *v = (*v / norm).min(DESCR_MAG_CLAMP);
        }
    }
    let norm2 = desc.iter().map(|&v| v * v).sum::<f32>().sqrt();
    if norm2 > 0.0 {
        for v in &mut desc {
            *v /= norm2;
        }
    }
    desc
}

/// Detects DoG extrema and describes each with a 128-d gradient histogram.
/// A featureless or too-small image yields an empty list.
pub fn detect_and_describe(image: &GrayImage, params: &SiftParams) -> Vec<(Keypoint, Vec<f32>)> {
    if image.width < 16 || image.height < 16 {
        return Vec::new();
    }
    let s = params.scales_per_octave;
    let octaves = build_scale_space(image, params);
    let prelim_thr = (0.5 * params.contrast_threshold) as f32;

    let mut results: Vec<(Keypoint, Vec<f32>)> = Vec::new();
    for (oct_idx, octave) in octaves.iter().enumerate() {
        let (w, h) = (octave.dog[0].width as i64, octave.dog[0].height as i64);
        if w < 2 * IMG_BORDER + 2 || h < 2 * IMG_BORDER + 2 {
            continue;
        }
        let oct_scale = (1u32 << oct_idx) as f64;
        for layer in 1..=s {
            let below = &octave.dog[layer - 1];
            let here = &octave.dog[layer];
            let above = &octave.dog[layer + 1];
            for row in IMG_BORDER..h - IMG_BORDER {
                for col in IMG_BORDER..w - IMG_BORDER {
                    let v = here.get(col as u32, row as u32);
                    if v.abs() < prelim_thr {
                        continue;
                    }
                    let mut is_max = true;
                    let mut is_min = true;
                    'scan: for dl in 0..3usize {
                        let img = [below, here, above][dl];
                        for dr in -1i64..=1 {
                            for dc in -1i64..=1 {
                                if dl == 1 && dr == 0 && dc == 0 {
                                    continue;
                                }
                                let nv = img.get((col + dc) as u32, (row + dr) as u32);
                                if nv >= v {
                                    is_max = false;
                                }
                                if nv <= v {
                                    is_min = false;
                                }
                                if !is_max && !is_min {
                                    break 'scan;
                                }
                            }
                        }
                    }
                    if !is_max && !is_min {
                        continue;
                    }
                    let Some(ext) = refine_extremum(octave, layer, row, col, params) else {
                        continue;
                    };
                    let layer_f = ext.layer as f64 + ext.offset[2];
                    let scale_oct = params.sigma * 2f64.powf(layer_f / s as f64);
                    let kp_x = (ext.col as f64 + ext.offset[0]) * oct_scale;
                    let kp_y = (ext.row as f64 + ext.offset[1]) * oct_scale;
                    let gauss = &octave.gauss[ext.layer];
                    let row_f = ext.row as f64 + ext.offset[1];
                    let col_f = ext.col as f64 + ext.offset[0];
                    for angle in orientation_peaks(gauss, row_f, col_f, scale_oct) {
                        let desc = compute_descriptor(gauss, row_f, col_f, scale_oct, angle);
                        if desc.iter().all(|&v| v == 0.0) {
                            continue;
                        }
                        results.push((
                            Keypoint {
                                x: kp_x,
                                y: kp_y,
                                scale: scale_oct * oct_scale,
                                orientation: angle,
                                response: ext.contrast.abs(),
                            },
                            desc,
                        ));
                    }
                }
            }
        }
    }
    // canonical order
    results.sort_by(|a, b| {
        (a.0.y, a.0.x, a.0.scale, a.0.orientation)
            .partial_cmp(&(b.0.y, b.0.x, b.0.scale, b.0.orientation))
            .unwrap()
    });
    results
}
