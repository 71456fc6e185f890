//! MSE, PSNR, and SSIM on luminances.
//!
//! PSNR follows the `20 log10(max x / sqrt(MSE))` convention where `max x` is
//! the maximum luminance of the *original* image. SSIM is the single-window
//! (whole image) form with population statistics; the stabilization constants
//! default to `c1 = (0.01 L)^2`, `c2 = (0.03 L)^2` with dynamic range `L = 1`
//! and can be overridden.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::image::{ImageError, LevelImage};

pub const SSIM_C1_DEFAULT: f64 = 1e-4;
pub const SSIM_C2_DEFAULT: f64 = 9e-4;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error("PSNR undefined: original image is all black")]
    AllBlackOriginal,
}

/// Quality summary of an image against its reference.
#[derive(Debug, Clone, Copy)]
pub struct MetricsReport {
    pub mse: f64,
    /// dB; `f64::INFINITY` when `mse == 0`.
    pub psnr: f64,
    pub ssim: f64,
    pub ssim_c1: f64,
    pub ssim_c2: f64,
}

impl Serialize for MetricsReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut st = serializer.serialize_struct("MetricsReport", 5)?;
        st.serialize_field("mse", &self.mse)?;
        if self.psnr.is_finite() {
            st.serialize_field("psnr_db", &self.psnr)?;
        } else {
            st.serialize_field("psnr_db", "inf")?;
        }
        st.serialize_field("ssim", &self.ssim)?;
        st.serialize_field("ssim_c1", &self.ssim_c1)?;
        st.serialize_field("ssim_c2", &self.ssim_c2)?;
        st.end()
    }
}

/// Mean squared luminance difference.
pub fn mse(x: &LevelImage, y: &LevelImage) -> Result<f64, MetricsError> {
    x.check_same_shape(y)?;
    let sum: f64 = (0..x.len())
        .map(|i| {
            let d = x.luminance_at(i) - y.luminance_at(i);
            d * d
        })
        .sum();
    Ok(sum / x.len() as f64)
}

/// PSNR of `y` against the original `x`, in dB.
pub fn psnr(x: &LevelImage, y: &LevelImage) -> Result<f64, MetricsError> {
    let m = mse(x, y)?;
    let peak = (0..x.len()).map(|i| x.luminance_at(i)).fold(0.0, f64::max);
    if peak == 0.0 {
        return Err(MetricsError::AllBlackOriginal);
    }
    Ok(psnr_value(peak, m))
}

/// PSNR formula on raw values; `INFINITY` at zero MSE.
pub fn psnr_value(peak: f64, mse: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        20.0 * (peak / mse.sqrt()).log10()
    }
}

/// Whole-image SSIM with the default stabilization constants.
pub fn ssim(x: &LevelImage, y: &LevelImage) -> Result<f64, MetricsError> {
    ssim_with(x, y, SSIM_C1_DEFAULT, SSIM_C2_DEFAULT)
}

/// Whole-image SSIM with explicit constants.
pub fn ssim_with(x: &LevelImage, y: &LevelImage, c1: f64, c2: f64) -> Result<f64, MetricsError> {
    x.check_same_shape(y)?;
    let n = x.len() as f64;
    let (mut sx, mut sy) = (0.0, 0.0);
    for i in 0..x.len() {
        sx += x.luminance_at(i);
        sy += y.luminance_at(i);
    }
    let (mx, my) = (sx / n, sy / n);
    let (mut vx, mut vy, mut cov) = (0.0, 0.0, 0.0);
    for i in 0..x.len() {
        let dx = x.luminance_at(i) - mx;
        let dy = y.luminance_at(i) - my;
        vx += dx * dx;
        vy += dy * dy;
        cov += dx * dy;
    }
    vx /= n;
    vy /= n;
    cov /= n;
    Ok((2.0 * mx * my + c1) * (2.0 * cov + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2)))
}

/// Full report of `restored` against `original`.
pub fn report(original: &LevelImage, restored: &LevelImage) -> Result<MetricsReport, MetricsError> {
    report_with(original, restored, SSIM_C1_DEFAULT, SSIM_C2_DEFAULT)
}

pub fn report_with(
    original: &LevelImage,
    restored: &LevelImage,
    c1: f64,
    c2: f64,
) -> Result<MetricsReport, MetricsError> {
    Ok(MetricsReport {
        mse: mse(original, restored)?,
        psnr: psnr(original, restored)?,
        ssim: ssim_with(original, restored, c1, c2)?,
        ssim_c1: c1,
        ssim_c2: c2,
    })
}

/// Header of the plain-text comparison table.
pub fn table_header() -> String {
    format!(
        "{:<24} {:>5} {:>6} {:>4} {:>6} {:>10} {:>10}",
        "image id", "N", "sigma", "l", "algo", "SSIM", "PSNR"
    )
}

/// One aligned table row: image id, N, sigma, levels, algorithm, SSIM, PSNR.
pub fn table_row(
    image_id: &str,
    n: usize,
    sigma: Option<f64>,
    levels: u16,
    algo: &str,
    report: &MetricsReport,
) -> String {
    let sigma = sigma.map_or_else(|| "-".to_string(), |s| format!("{s}"));
    let psnr = if report.psnr.is_finite() {
        format!("{:.4}", report.psnr)
    } else {
        "inf".to_string()
    };
    format!(
        "{:<24} {:>5} {:>6} {:>4} {:>6} {:>10.4} {:>10}",
        image_id, n, sigma, levels, algo, report.ssim, psnr
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn img(w: usize, h: usize, l: u16, d: Vec<u16>) -> LevelImage {
        LevelImage::new(w, h, l, d).unwrap()
    }

    #[test]
    fn mse_identical_is_zero() {
        let a = img(2, 2, 5, vec![0, 1, 2, 3]);
        assert_eq!(mse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn mse_two_pixel_example() {
        // Luminances (0, 0) vs (1, 0): mean of (1, 0) squared diffs = 0.5.
        let a = img(1, 2, 2, vec![0, 0]);
        let b = img(1, 2, 2, vec![1, 0]);
        assert_eq!(mse(&a, &b).unwrap(), 0.5);
    }

    #[test]
    fn psnr_formula_values() {
        assert!((psnr_value(1.0, 0.01) - 20.0).abs() < 1e-12);
        assert!((psnr_value(1.0, 0.0025) - 26.020599913279625).abs() < 1e-12);
        assert!(psnr_value(1.0, 0.0).is_infinite());
    }

    #[test]
    fn psnr_identical_is_infinite() {
        let a = img(2, 2, 5, vec![0, 1, 2, 4]);
        assert!(psnr(&a, &a).unwrap().is_infinite());
    }

    #[test]
    fn psnr_all_black_original_errors() {
        let a = img(2, 2, 5, vec![0, 0, 0, 0]);
        let b = img(2, 2, 5, vec![0, 1, 0, 0]);
        assert_eq!(psnr(&a, &b), Err(MetricsError::AllBlackOriginal));
    }

    #[test]
    fn psnr_decreases_with_mse() {
        assert!(psnr_value(1.0, 0.01) > psnr_value(1.0, 0.02));
        assert!(psnr_value(1.0, 0.02) > psnr_value(1.0, 0.1));
    }

    #[test]
    fn ssim_of_identical_images_is_one() {
        let a = img(3, 2, 4, vec![0, 3, 1, 2, 2, 0]);
        assert!((ssim(&a, &a).unwrap() - 1.0).abs() < 1e-12);
        let c = img(2, 2, 4, vec![2, 2, 2, 2]);
        assert!((ssim(&c, &c).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn ssim_is_symmetric() {
        let a = img(3, 2, 4, vec![0, 3, 1, 2, 2, 0]);
        let b = img(3, 2, 4, vec![1, 3, 0, 2, 1, 0]);
        assert_eq!(ssim(&a, &b).unwrap(), ssim(&b, &a).unwrap());
    }

    #[test]
    fn ssim_constant_images_collapse() {
        // Distinct constants a != b: zero variances collapse the second
        // factor, leaving (2ab + c1)/(a^2 + b^2 + c1).
        let a = img(2, 2, 5, vec![1, 1, 1, 1]); // lum 0.25
        let b = img(2, 2, 5, vec![3, 3, 3, 3]); // lum 0.75
        let (la, lb) = (0.25, 0.75);
        let want = (2.0 * la * lb + SSIM_C1_DEFAULT) / (la * la + lb * lb + SSIM_C1_DEFAULT);
        assert!((ssim(&a, &b).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let a = img(2, 2, 5, vec![0, 1, 2, 3]);
        let b = img(2, 1, 5, vec![0, 1]);
        assert!(mse(&a, &b).is_err());
        assert!(ssim(&a, &b).is_err());
    }

    #[test]
    fn report_serializes_infinite_psnr_as_marker() {
        let a = img(2, 2, 5, vec![0, 1, 2, 3]);
        let r = report(&a, &a).unwrap();
        let json = serde_json::to_string(&r).unwrap();
        assert!(json.contains("\"psnr_db\":\"inf\""), "{json}");
        assert!(json.contains("\"ssim\":1.0") || json.contains("\"ssim\":0.99"), "{json}");
    }
}
