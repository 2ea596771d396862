//! Detection and enhancement evaluation metrics.
//!
//! Segmentation masks are scored with IoU and Dice; image pairs with SSIM,
//! PSNR, Pearson correlation, and SNR. PSNR and SSIM anchor their dynamic
//! range on the truth image (the reference never defines MAX); PSNR and SNR
//! are clamped to +/-120 dB so perfect predictions score a finite cap.
//! An optional mask restricts scoring to chimney pixels.

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::grid::{Grid2D, MaskGrid};
use crate::Result;

/// dB cap applied to PSNR and SNR (hit when the error power is zero).
pub const DB_CAP: f64 = 120.0;

/// Segmentation overlap scores, both in [0, 1].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SegScores {
    pub iou: f64,
    pub dice: f64,
}

/// Image fidelity scores. `corr` is `None` when the Pearson correlation is
/// undefined (constant truth or prediction over the evaluated pixels).
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EnhScores {
    pub ssim: f64,
    pub psnr: f64,
    pub corr: Option<f64>,
    pub snr: f64,
}

/// IoU and Dice between predicted and truth masks.
///
/// Both scores are defined as 1 when prediction and truth are both empty
/// (perfect agreement on absence); this affects per-sample averages and is
/// reported as-is.
pub fn seg_scores(pred: &MaskGrid, truth: &MaskGrid) -> Result<SegScores> {
    if pred.nz() != truth.nz() || pred.nx() != truth.nx() {
        return Err(Error::ShapeMismatch(format!(
            "mask shapes differ: {}x{} vs {}x{}",
            pred.nz(),
            pred.nx(),
            truth.nz(),
            truth.nx()
        )));
    }
    let mut intersection = 0usize;
    let mut union = 0usize;
    let mut p_count = 0usize;
    let mut t_count = 0usize;
    for (&p, &t) in pred.values().iter().zip(truth.values()) {
        if p && t {
            intersection += 1;
        }
        if p || t {
            union += 1;
        }
        if p {
            p_count += 1;
        }
        if t {
            t_count += 1;
        }
    }
    if union == 0 {
        return Ok(SegScores { iou: 1.0, dice: 1.0 });
    }
    Ok(SegScores {
        iou: intersection as f64 / union as f64,
        dice: 2.0 * intersection as f64 / (p_count + t_count) as f64,
    })
}

fn check_shapes(pred: &Grid2D, truth: &Grid2D) -> Result<()> {
    if !pred.same_shape(truth) {
        return Err(Error::ShapeMismatch(format!(
            "image shapes differ: {}x{} vs {}x{}",
            pred.nz(),
            pred.nx(),
            truth.nz(),
            truth.nx()
        )));
    }
    Ok(())
}

/// SSIM, PSNR, Pearson correlation, and SNR of `pred` against `truth`.
///
/// With `mask = Some(..)`, PSNR/SNR/corr run over masked pixels only and
/// SSIM averages only windows centered inside the mask; the dynamic range is
/// taken over the same restricted truth pixels.
pub fn enh_scores(pred: &Grid2D, truth: &Grid2D, mask: Option<&MaskGrid>) -> Result<EnhScores> {
    check_shapes(pred, truth)?;
    if let Some(m) = mask {
        if !m.same_shape_as_grid(truth) {
            return Err(Error::ShapeMismatch(format!(
                "mask {}x{} does not match image {}x{}",
                m.nz(),
                m.nx(),
                truth.nz(),
                truth.nx()
            )));
        }
        if m.count() == 0 {
            return Err(Error::ShapeMismatch(
                "mask-restricted scoring needs a non-empty mask".into(),
            ));
        }
    }
    let select = |i: usize| mask.map_or(true, |m| m.values()[i]);

    let mut n = 0usize;
    let mut t_min = f64::INFINITY;
    let mut t_max = f64::NEG_INFINITY;
    let mut sum_sq_err = 0.0;
    let mut sum_sq_truth = 0.0;
    let mut sum_p = 0.0;
    let mut sum_t = 0.0;
    for i in 0..truth.len() {
        if !select(i) {
            continue;
        }
        let p = pred.values()[i];
        let t = truth.values()[i];
        n += 1;
        t_min = t_min.min(t);
        t_max = t_max.max(t);
        sum_sq_err += (t - p) * (t - p);
        sum_sq_truth += t * t;
        sum_p += p;
        sum_t += t;
    }
    let n_f = n as f64;
    let range = t_max - t_min;
    let mse = sum_sq_err / n_f;

    let db = |num: f64, den: f64| -> f64 {
        if den == 0.0 {
            return DB_CAP;
        }
        if num == 0.0 {
            return -DB_CAP;
        }
        (10.0 * (num / den).log10()).clamp(-DB_CAP, DB_CAP)
    };
    let psnr = db(range * range, mse);
    let snr = db(sum_sq_truth, sum_sq_err);

    // Pearson over the evaluated pixels
    let mean_p = sum_p / n_f;
    let mean_t = sum_t / n_f;
    let mut cov = 0.0;
    let mut var_p = 0.0;
    let mut var_t = 0.0;
    for i in 0..truth.len() {
        if !select(i) {
            continue;
        }
        let dp = pred.values()[i] - mean_p;
        let dt = truth.values()[i] - mean_t;
        cov += dp * dt;
        var_p += dp * dp;
        var_t += dt * dt;
    }
    // cov^2 / (var_p var_t) keeps corr(x, x) exactly 1: all three
    // accumulations are identical, so the ratio is exactly one
    let corr = if var_p > 0.0 && var_t > 0.0 {
        let r = ((cov * cov) / (var_p * var_t)).sqrt().clamp(0.0, 1.0);
        Some(if cov < 0.0 { -r } else { r })
    } else {
        None
    };

    let ssim = ssim_mean(pred, truth, mask, range)?;
    Ok(EnhScores { ssim, psnr, corr, snr })
}

/// Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), constants
/// K1 = 0.01 and K2 = 0.03, over all fully interior windows. The window
/// shrinks to the largest odd size that fits images smaller than 11 cells.
fn ssim_mean(pred: &Grid2D, truth: &Grid2D, mask: Option<&MaskGrid>, range: f64) -> Result<f64> {
    let (nz, nx) = (truth.nz(), truth.nx());
    let mut win = 11usize.min(nz).min(nx);
    if win % 2 == 0 {
        win -= 1;
    }
    if win == 0 {
        return Err(Error::ShapeMismatch("image too small for SSIM".into()));
    }
    let half = win / 2;
    let sigma = 1.5;
    let mut weights = vec![0.0; win * win];
    let mut wsum = 0.0;
    for (j, w) in weights.iter_mut().enumerate() {
        let dz = (j / win) as f64 - half as f64;
        let dxw = (j % win) as f64 - half as f64;
        *w = (-(dz * dz + dxw * dxw) / (2.0 * sigma * sigma)).exp();
        wsum += *w;
    }
    for w in &mut weights {
        *w /= wsum;
    }

    // degenerate dynamic range: identical constants are a perfect match
    let l = if range > 0.0 { range } else { 1.0 };
    let c1 = (0.01 * l) * (0.01 * l);
    let c2 = (0.03 * l) * (0.03 * l);

    let p = pred.values();
    let t = truth.values();
    let mut acc = 0.0;
    let mut count = 0usize;
    for cz in half..nz - half {
        for cx in half..nx - half {
            if let Some(m) = mask {
                if !m.get(cz, cx) {
                    continue;
                }
            }
            let mut mu_p = 0.0;
            let mut mu_t = 0.0;
            for (j, &w) in weights.iter().enumerate() {
                let iz = cz + j / win - half;
                let ix = cx + j % win - half;
                mu_p += w * p[iz * nx + ix];
                mu_t += w * t[iz * nx + ix];
            }
            let mut var_p = 0.0;
            let mut var_t = 0.0;
            let mut cov = 0.0;
            for (j, &w) in weights.iter().enumerate() {
                let iz = cz + j / win - half;
                let ix = cx + j % win - half;
                let dp = p[iz * nx + ix] - mu_p;
                let dt = t[iz * nx + ix] - mu_t;
                var_p += w * dp * dp;
                var_t += w * dt * dt;
                cov += w * dp * dt;
            }
            let num = (2.0 * mu_p * mu_t + c1) * (2.0 * cov + c2);
            let den = (mu_p * mu_p + mu_t * mu_t + c1) * (var_p + var_t + c2);
            acc += num / den;
            count += 1;
        }
    }
    if count == 0 {
        return Err(Error::ShapeMismatch(
            "no SSIM windows fall inside the evaluated region".into(),
        ));
    }
    Ok(acc / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_mask(rng: &mut ChaCha8Rng, nz: usize, nx: usize, p: f64) -> MaskGrid {
        MaskGrid::new(nz, nx, 1.0, (0..nz * nx).map(|_| rng.gen_bool(p)).collect()).unwrap()
    }

    fn random_image(rng: &mut ChaCha8Rng, nz: usize, nx: usize) -> Grid2D {
        Grid2D::new(nz, nx, 1.0, (0..nz * nx).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn identical_masks_score_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let m = random_mask(&mut rng, 16, 16, 0.3);
        let s = seg_scores(&m, &m).unwrap();
        assert_eq!(s.iou, 1.0);
        assert_eq!(s.dice, 1.0);
    }

    #[test]
    fn disjoint_masks_score_zero() {
        let mut left = vec![false; 16];
        let mut right = vec![false; 16];
        left[0] = true;
        right[5] = true;
        let p = MaskGrid::new(4, 4, 1.0, left).unwrap();
        let t = MaskGrid::new(4, 4, 1.0, right).unwrap();
        let s = seg_scores(&p, &t).unwrap();
        assert_eq!(s.iou, 0.0);
        assert_eq!(s.dice, 0.0);
    }

    #[test]
    fn half_overlap_matches_set_counting() {
        // P = left half, T = full grid: iou = 1/2, dice = 2/3
        let nz = 8;
        let nx = 8;
        let p = MaskGrid::new(nz, nx, 1.0, (0..nz * nx).map(|i| i % nx < nx / 2).collect()).unwrap();
        let t = MaskGrid::new(nz, nx, 1.0, vec![true; nz * nx]).unwrap();
        let s = seg_scores(&p, &t).unwrap();
        assert!((s.iou - 0.5).abs() < 1e-15);
        assert!((s.dice - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn empty_masks_agree_perfectly() {
        let e = MaskGrid::empty(4, 4, 1.0).unwrap();
        let s = seg_scores(&e, &e).unwrap();
        assert_eq!(s.iou, 1.0);
        assert_eq!(s.dice, 1.0);
    }

    #[test]
    fn dice_is_determined_by_iou() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..200 {
            let p = random_mask(&mut rng, 12, 12, 0.4);
            let t = random_mask(&mut rng, 12, 12, 0.4);
            let s = seg_scores(&p, &t).unwrap();
            assert!(
                (s.dice - 2.0 * s.iou / (1.0 + s.iou)).abs() < 1e-12,
                "iou {} dice {}",
                s.iou,
                s.dice
            );
        }
    }

    #[test]
    fn identity_prediction_scores_perfectly() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let img = random_image(&mut rng, 24, 24);
        let s = enh_scores(&img, &img, None).unwrap();
        assert_eq!(s.psnr, DB_CAP);
        assert_eq!(s.snr, DB_CAP);
        assert_eq!(s.corr, Some(1.0));
        assert!((s.ssim - 1.0).abs() < 1e-12);
    }

    #[test]
    fn negated_zero_mean_truth_anticorrelates() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut values: Vec<f64> = (0..256).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mean = values.iter().sum::<f64>() / 256.0;
        for v in &mut values {
            *v -= mean;
        }
        let truth = Grid2D::new(16, 16, 1.0, values.clone()).unwrap();
        let pred = Grid2D::new(16, 16, 1.0, values.iter().map(|v| -v).collect()).unwrap();
        let s = enh_scores(&pred, &truth, None).unwrap();
        assert!((s.corr.unwrap() + 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_offset_has_closed_form_psnr() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let truth = random_image(&mut rng, 16, 16);
        let c = 0.05;
        let pred = truth.map(|v| v + c).unwrap();
        let s = enh_scores(&pred, &truth, None).unwrap();
        let range = truth.max() - truth.min();
        let expected = 20.0 * (range / c).log10();
        assert!((s.psnr - expected).abs() < 1e-9, "{} vs {expected}", s.psnr);
    }

    #[test]
    fn constant_truth_reports_undefined_corr() {
        let truth = Grid2D::constant(16, 16, 1.0, 2.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let pred = random_image(&mut rng, 16, 16);
        let s = enh_scores(&pred, &truth, None).unwrap();
        assert!(s.corr.is_none());
    }

    #[test]
    fn shape_mismatch_is_an_error() {
        let a = Grid2D::constant(4, 4, 1.0, 0.0).unwrap();
        let b = Grid2D::constant(4, 5, 1.0, 0.0).unwrap();
        assert!(enh_scores(&a, &b, None).is_err());
        let ma = MaskGrid::empty(4, 4, 1.0).unwrap();
        let mb = MaskGrid::empty(5, 4, 1.0).unwrap();
        assert!(seg_scores(&ma, &mb).is_err());
    }

    #[test]
    fn pixel_permutation_leaves_global_metrics_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let truth = random_image(&mut rng, 12, 12);
        let pred = random_image(&mut rng, 12, 12);
        // deterministic permutation of the 144 pixels
        let mut perm: Vec<usize> = (0..144).collect();
        for i in (1..144).rev() {
            let j = rng.gen_range(0..=i);
            perm.swap(i, j);
        }
        let apply = |g: &Grid2D| {
            let mut out = vec![0.0; 144];
            for (i, &pi) in perm.iter().enumerate() {
                out[pi] = g.values()[i];
            }
            Grid2D::new(12, 12, 1.0, out).unwrap()
        };
        let s = enh_scores(&pred, &truth, None).unwrap();
        let sp = enh_scores(&apply(&pred), &apply(&truth), None).unwrap();
        assert!((s.psnr - sp.psnr).abs() < 1e-9);
        assert!((s.snr - sp.snr).abs() < 1e-9);
        assert!((s.corr.unwrap() - sp.corr.unwrap()).abs() < 1e-12);
        // ssim is window-local and intentionally not permutation invariant

        let pm = random_mask(&mut rng, 12, 12, 0.5);
        let tm = random_mask(&mut rng, 12, 12, 0.5);
        let apply_m = |m: &MaskGrid| {
            let mut out = vec![false; 144];
            for (i, &pi) in perm.iter().enumerate() {
                out[pi] = m.values()[i];
            }
            MaskGrid::new(12, 12, 1.0, out).unwrap()
        };
        let s1 = seg_scores(&pm, &tm).unwrap();
        let s2 = seg_scores(&apply_m(&pm), &apply_m(&tm)).unwrap();
        assert_eq!(s1.iou, s2.iou);
        assert_eq!(s1.dice, s2.dice);
    }

    #[test]
    fn mask_restricted_scores_ignore_outside_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let truth = random_image(&mut rng, 24, 24);
        // corrupt only outside the central block
        let mask = MaskGrid::new(
            24,
            24,
            1.0,
            (0..576)
                .map(|i| {
                    let (iz, ix) = (i / 24, i % 24);
                    (8..16).contains(&iz) && (8..16).contains(&ix)
                })
                .collect(),
        )
        .unwrap();
        let pred = Grid2D::new(
            24,
            24,
            1.0,
            truth
                .values()
                .iter()
                .enumerate()
                .map(|(i, &v)| if mask.values()[i] { v } else { v + 10.0 })
                .collect(),
        )
        .unwrap();
        let masked = enh_scores(&pred, &truth, Some(&mask)).unwrap();
        assert_eq!(masked.psnr, DB_CAP);
        assert_eq!(masked.corr, Some(1.0));
        let full = enh_scores(&pred, &truth, None).unwrap();
        assert!(full.psnr < DB_CAP);
    }
}
