//! Segmented log-distance channel: deterministic gains, shadowed measurements,
//! maximum-likelihood segment detection and small-scale fading draws.

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{dist_to_bs, dist_to_user, Heights, Point2};
use crate::terrain::{SegmentId, SegmentOracle};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("BS link exponent alpha0 must exceed 1, got {0}")]
    Alpha0(f64),
    #[error("at least one UAV-user segment is required")]
    NoSegments,
    #[error("segment {k}: {message}")]
    Segment { k: usize, message: String },
    #[error("segment {k} is not weaker than segment {prev} at distance {distance:.3} m")]
    Ordering {
        k: usize,
        prev: usize,
        distance: f64,
    },
    #[error("invalid distance range [{0}, {1}]")]
    DistanceRange(f64, f64),
}

/// Path-loss parameters of one UAV-user segment.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentParams {
    pub alpha: f64,
    pub log10_beta: f64,
    /// Shadowing standard deviation in dB.
    pub sigma_db: f64,
}

impl SegmentParams {
    pub fn beta(&self) -> f64 {
        10f64.powf(self.log10_beta)
    }

    /// Slope `a_k = 10 alpha_k` of the dB model.
    pub fn a(&self) -> f64 {
        10.0 * self.alpha
    }

    /// Offset `b_k = 10 log10 beta_k` of the dB model.
    pub fn b(&self) -> f64 {
        10.0 * self.log10_beta
    }

    /// Linear gain `beta d^-alpha`.
    pub fn gain(&self, d: f64) -> f64 {
        10f64.powf(self.log10_beta - self.alpha * d.log10())
    }

    pub fn mean_gain_db(&self, d: f64) -> f64 {
        self.b() - self.a() * d.log10()
    }
}

/// BS-UAV link parameters plus the ordered UAV-user segments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegmentModel {
    pub alpha0: f64,
    pub log10_beta0: f64,
    pub segments: Vec<SegmentParams>,
}

impl SegmentModel {
    /// Two-segment LOS/NLOS urban parameters with shadowing `(2, 5)` dB.
    pub fn urban_los_nlos() -> Self {
        Self {
            alpha0: 2.08,
            log10_beta0: -3.85,
            segments: vec![
                SegmentParams {
                    alpha: 2.14,
                    log10_beta: -3.69,
                    sigma_db: 2.0,
                },
                SegmentParams {
                    alpha: 3.03,
                    log10_beta: -3.84,
                    sigma_db: 5.0,
                },
            ],
        }
    }

    pub fn num_segments(&self) -> usize {
        self.segments.len()
    }

    pub fn segment(&self, k: SegmentId) -> &SegmentParams {
        &self.segments[k.index()]
    }

    pub fn beta0(&self) -> f64 {
        10f64.powf(self.log10_beta0)
    }

    /// `beta0 d^-alpha0`.
    pub fn gain_bs_at(&self, d: f64) -> f64 {
        10f64.powf(self.log10_beta0 - self.alpha0 * d.log10())
    }

    pub fn gain_user_at(&self, k: SegmentId, d: f64) -> f64 {
        self.segment(k).gain(d)
    }

    /// Checks parameter sanity and the strict ordering of segment gains for
    /// every distance in `[d_min, d_max]`. The dB gap between neighbouring
    /// segments is affine in `log10 d`, so both endpoints suffice.
    pub fn validate(&self, d_min: f64, d_max: f64) -> Result<(), ChannelError> {
        if !(self.alpha0 > 1.0) {
            return Err(ChannelError::Alpha0(self.alpha0));
        }
        if self.segments.is_empty() {
            return Err(ChannelError::NoSegments);
        }
        for (i, s) in self.segments.iter().enumerate() {
            let k = i + 1;
            if !(s.alpha > 0.0 && s.alpha.is_finite() && s.log10_beta.is_finite()) {
                return Err(ChannelError::Segment {
                    k,
                    message: "alpha must be positive and beta finite".into(),
                });
            }
            if !(s.sigma_db > 0.0 && s.sigma_db.is_finite()) {
                return Err(ChannelError::Segment {
                    k,
                    message: format!("sigma_db must be positive, got {}", s.sigma_db),
                });
            }
        }
        if !(d_min > 0.0 && d_max >= d_min && d_max.is_finite()) {
            return Err(ChannelError::DistanceRange(d_min, d_max));
        }
        for (i, pair) in self.segments.windows(2).enumerate() {
            for d in [d_min, d_max] {
                if pair[1].mean_gain_db(d) >= pair[0].mean_gain_db(d) {
                    return Err(ChannelError::Ordering {
                        k: i + 2,
                        prev: i + 1,
                        distance: d,
                    });
                }
            }
        }
        Ok(())
    }
}

pub fn gain_bs(x: Point2, bs: Point2, model: &SegmentModel, h: &Heights) -> f64 {
    model.gain_bs_at(dist_to_bs(x, bs, h))
}

/// UAV-user gain as if the UAV were in segment `seg`.
pub fn gain_user(
    x: Point2,
    user: Point2,
    seg: SegmentId,
    model: &SegmentModel,
    h: &Heights,
) -> f64 {
    model.gain_user_at(seg, dist_to_user(x, user, h))
}

/// Channel gain measured at the UAV.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub position: Point2,
    pub gain_db: f64,
}

/// Draws `b_k - a_k log10 d_u + xi_k` with Gaussian shadowing of the true segment.
pub fn sample_measurement<O: SegmentOracle + ?Sized, R: Rng + ?Sized>(
    x: Point2,
    user: Point2,
    oracle: &O,
    model: &SegmentModel,
    h: &Heights,
    rng: &mut R,
) -> Measurement {
    let params = model.segment(oracle.segment(x, user));
    let shadow: f64 = rng.sample(StandardNormal);
    Measurement {
        position: x,
        gain_db: params.mean_gain_db(dist_to_user(x, user, h)) + params.sigma_db * shadow,
    }
}

fn residual(m: &Measurement, user: Point2, params: &SegmentParams, h: &Heights) -> f64 {
    m.gain_db - params.b() + params.a() * dist_to_user(m.position, user, h).log10()
}

/// Gaussian-shadowing detector `argmin_k |y - b_k + a_k log10 d| / sigma_k`;
/// ties go to the smaller index.
pub fn detect_segment(
    m: &Measurement,
    user: Point2,
    model: &SegmentModel,
    h: &Heights,
) -> SegmentId {
    let mut best = (f64::INFINITY, 0);
    for (i, params) in model.segments.iter().enumerate() {
        let score = residual(m, user, params, h).abs() / params.sigma_db;
        if score < best.0 {
            best = (score, i);
        }
    }
    SegmentId::clamped(best.1 + 1, model.num_segments())
}

/// General maximum-likelihood detector `argmax_k h_k(residual_k)` for
/// arbitrary shadowing densities `density(k, residual)`.
pub fn detect_segment_ml(
    m: &Measurement,
    user: Point2,
    model: &SegmentModel,
    h: &Heights,
    density: impl Fn(SegmentId, f64) -> f64,
) -> SegmentId {
    let n = model.num_segments();
    let mut best = (f64::NEG_INFINITY, 1);
    for (i, params) in model.segments.iter().enumerate() {
        let k = SegmentId::clamped(i + 1, n);
        let like = density(k, residual(m, user, params, h));
        if like > best.0 {
            best = (like, i + 1);
        }
    }
    SegmentId::clamped(best.1, n)
}

/// Small-scale fading law of a link.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FadingKind {
    /// BS-UAV link, Rician with a 20 dB K-factor.
    BsUavRician20dB,
    /// UAV-user LOS link, Rician with a 9 dB K-factor.
    LosRician9dB,
    /// UAV-user NLOS link, Rayleigh.
    NlosRayleigh,
}

impl FadingKind {
    /// Linear Rician K-factor (0 for Rayleigh).
    pub fn k_factor(self) -> f64 {
        match self {
            FadingKind::BsUavRician20dB => 100.0,
            FadingKind::LosRician9dB => 10f64.powf(0.9),
            FadingKind::NlosRayleigh => 0.0,
        }
    }
}

/// Unit-mean power gain `|a|^2` of one fading realisation.
pub fn sample_fading<R: Rng + ?Sized>(kind: FadingKind, rng: &mut R) -> f64 {
    match kind {
        FadingKind::NlosRayleigh => Exp1.sample(rng),
        _ => {
            let k = kind.k_factor();
            let los = (k / (k + 1.0)).sqrt();
            let scatter = (0.5 / (k + 1.0)).sqrt();
            let re: f64 = los + scatter * rng.sample::<f64, _>(StandardNormal);
            let im: f64 = scatter * rng.sample::<f64, _>(StandardNormal);
            re * re + im * im
        }
    }
}

/// Segment oracle that answers through a simulated measurement and
/// [`detect_segment`] instead of ground truth. The measurement noise at a
/// position is a pure function of `(seed, position, user)`, so repeated
/// queries at the same place agree.
#[derive(Debug, Clone)]
pub struct DetectorOracle<'a, O: ?Sized> {
    pub truth: &'a O,
    pub model: &'a SegmentModel,
    pub heights: Heights,
    pub seed: u64,
    /// Small-scale fading snapshots averaged into each measurement (0 = none).
    pub fading_snapshots: usize,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl<O: SegmentOracle + ?Sized> DetectorOracle<'_, O> {
    fn rng_for(&self, x: Point2, user: Point2) -> rand_chacha::ChaCha8Rng {
        use rand::SeedableRng;
        let mut h = splitmix(self.seed);
        for v in [x.x, x.y, user.x, user.y] {
            h = splitmix(h ^ v.to_bits());
        }
        rand_chacha::ChaCha8Rng::seed_from_u64(h)
    }

    pub fn measure(&self, x: Point2, user: Point2) -> Measurement {
        let mut rng = self.rng_for(x, user);
        let truth = self.truth.segment(x, user);
        let mut m = sample_measurement(x, user, self.truth, self.model, &self.heights, &mut rng);
        if self.fading_snapshots > 0 {
            let kind = if truth == SegmentId::LOS {
                FadingKind::LosRician9dB
            } else {
                FadingKind::NlosRayleigh
            };
            let n = self.fading_snapshots;
            let mean = (0..n).map(|_| sample_fading(kind, &mut rng)).sum::<f64>() / n as f64;
            m.gain_db += 10.0 * mean.log10();
        }
        m
    }
}

impl<O: SegmentOracle + ?Sized> SegmentOracle for DetectorOracle<'_, O> {
    fn num_segments(&self) -> usize {
        self.truth.num_segments().min(self.model.num_segments())
    }

    fn segment(&self, x: Point2, user: Point2) -> SegmentId {
        detect_segment(&self.measure(x, user), user, self.model, &self.heights)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    use crate::terrain::NestedBoundaryField;

    fn h() -> Heights {
        Heights::new(50.0, 45.0, 0.0).unwrap()
    }

    #[test]
    fn bs_gain_examples() {
        let m = SegmentModel::urban_los_nlos();
        let bs = Point2::new(100.0, 100.0);
        let g = gain_bs(bs, bs, &m, &h());
        assert_relative_eq!(
            g,
            10f64.powf(-3.85) * 5f64.powf(-2.08),
            max_relative = 1e-12
        );
        assert_relative_eq!(
            m.gain_bs_at(40.0) / m.gain_bs_at(80.0),
            2f64.powf(2.08),
            max_relative = 1e-12
        );
        for d in [1.0, 7.5, 320.0] {
            let db = 10.0 * m.gain_bs_at(d).log10();
            assert!((db - (10.0 * m.log10_beta0 - 10.0 * m.alpha0 * d.log10())).abs() < 1e-9);
        }
    }

    #[test]
    fn user_gain_examples() {
        let m = SegmentModel::urban_los_nlos();
        let user = Point2::new(0.0, 0.0);
        let los = gain_user(user, user, SegmentId::LOS, &m, &h());
        assert_relative_eq!(
            los,
            10f64.powf(-3.69) * 50f64.powf(-2.14),
            max_relative = 1e-12
        );
        let nlos = SegmentId::new(2, 2).unwrap();
        for d in [1.0, 2.0, 50.0, 500.0, 5000.0] {
            assert!(m.gain_user_at(nlos, d) < m.gain_user_at(SegmentId::LOS, d));
        }
        assert_relative_eq!(
            m.gain_user_at(nlos, 1.0),
            10f64.powf(-3.84),
            max_relative = 1e-12
        );
    }

    #[test]
    fn validation_catches_bad_models() {
        let good = SegmentModel::urban_los_nlos();
        assert!(good.validate(1.0, 2000.0).is_ok());
        let mut m = good.clone();
        m.alpha0 = 1.0;
        assert!(matches!(
            m.validate(1.0, 10.0),
            Err(ChannelError::Alpha0(_))
        ));
        let mut m = good.clone();
        m.segments[1].sigma_db = 0.0;
        assert!(matches!(
            m.validate(1.0, 10.0),
            Err(ChannelError::Segment { k: 2, .. })
        ));
        // NLOS stronger than LOS at short range
        let mut m = good.clone();
        m.segments[1].log10_beta = -2.0;
        assert!(matches!(
            m.validate(1.0, 10.0),
            Err(ChannelError::Ordering { k: 2, .. })
        ));
        // crossing inside the range is caught at an endpoint
        let mut m = good;
        m.segments[1] = SegmentParams {
            alpha: 1.5,
            log10_beta: -4.5,
            sigma_db: 3.0,
        };
        assert!(m.validate(1.0, 10.0).is_ok());
        assert!(m.validate(1.0, 1e5).is_err());
    }

    #[test]
    fn noiseless_measurement_equals_mean() {
        let mut m = SegmentModel::urban_los_nlos();
        for s in &mut m.segments {
            s.sigma_db = 1e-12;
        }
        let field = NestedBoundaryField::isotropic(&[60.0]).unwrap();
        let user = Point2::new(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for x in [Point2::new(10.0, 0.0), Point2::new(90.0, 30.0)] {
            let meas = sample_measurement(x, user, &field, &m, &h(), &mut rng);
            let k = field.segment(x, user);
            let want = m.segment(k).mean_gain_db(dist_to_user(x, user, &h()));
            assert!((meas.gain_db - want).abs() < 1e-9);
        }
    }

    #[test]
    fn shadowing_moments() {
        let m = SegmentModel::urban_los_nlos();
        let field = NestedBoundaryField::isotropic(&[60.0]).unwrap();
        let user = Point2::new(0.0, 0.0);
        let x = Point2::new(120.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 100_000;
        let samples: Vec<f64> = (0..n)
            .map(|_| sample_measurement(x, user, &field, &m, &h(), &mut rng).gain_db)
            .collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|s| (s - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
        let sigma = m.segments[1].sigma_db;
        let want = m.segments[1].mean_gain_db(dist_to_user(x, user, &h()));
        assert!((var.sqrt() - sigma).abs() < 0.02 * sigma);
        assert!((mean - want).abs() < 3.0 * sigma / (n as f64).sqrt());
    }

    #[test]
    fn detector_examples() {
        let mut m = SegmentModel::urban_los_nlos();
        m.segments[1].sigma_db = m.segments[0].sigma_db;
        let user = Point2::new(0.0, 0.0);
        let x = Point2::new(80.0, 0.0);
        let d = dist_to_user(x, user, &h());
        let mean1 = m.segments[0].mean_gain_db(d);
        let mean2 = m.segments[1].mean_gain_db(d);
        let at = |y| Measurement {
            position: x,
            gain_db: y,
        };
        assert_eq!(detect_segment(&at(mean1), user, &m, &h()).get(), 1);
        assert_eq!(detect_segment(&at(mean2), user, &m, &h()).get(), 2);
        // exact tie
        let mid = 0.5 * (mean1 + mean2);
        let r1 = (mid - mean1).abs();
        let r2 = (mid - mean2).abs();
        if r1 == r2 {
            assert_eq!(detect_segment(&at(mid), user, &m, &h()).get(), 1);
        }
        let tie = Measurement {
            position: x,
            gain_db: mean1 - 3.0,
        };
        let mut sym = m.clone();
        sym.segments[1] = SegmentParams {
            log10_beta: (mean1 - 6.0 + sym.segments[1].a() * d.log10()) / 10.0,
            ..sym.segments[1]
        };
        let s1 = (tie.gain_db - sym.segments[0].mean_gain_db(d)).abs();
        let s2 = (tie.gain_db - sym.segments[1].mean_gain_db(d)).abs();
        assert!((s1 - s2).abs() < 1e-9);
        assert_eq!(detect_segment(&tie, user, &sym, &h()).get(), 1);
    }

    fn gaussian(sigma: f64, r: f64) -> f64 {
        (-0.5 * (r / sigma).powi(2)).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
    }

    #[test]
    fn detector_matches_exhaustive_likelihood_with_equal_sigma() {
        let mut m = SegmentModel::urban_los_nlos();
        m.segments.push(SegmentParams {
            alpha: 3.5,
            log10_beta: -4.0,
            sigma_db: 3.0,
        });
        for s in &mut m.segments {
            s.sigma_db = 3.0;
        }
        let user = Point2::new(0.0, 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let x = Point2::new(
                rng.random_range(-400.0..400.0),
                rng.random_range(-400.0..400.0),
            );
            let y = rng.random_range(-140.0..-40.0);
            let meas = Measurement {
                position: x,
                gain_db: y,
            };
            let d = dist_to_user(x, user, &h());
            // exhaustive likelihood
            let mut best = (f64::NEG_INFINITY, 0);
            for (i, s) in m.segments.iter().enumerate() {
                let l = gaussian(s.sigma_db, y - s.mean_gain_db(d));
                if l > best.0 {
                    best = (l, i + 1);
                }
            }
            assert_eq!(detect_segment(&meas, user, &m, &h()).get(), best.1);
            let ml = detect_segment_ml(&meas, user, &m, &h(), |k, r| {
                gaussian(m.segment(k).sigma_db, r)
            });
            assert_eq!(ml.get(), best.1);
        }
    }

    #[test]
    fn simplified_rule_ignores_sigma_normalisation() {
        // With unequal sigma the simplified rule and the full likelihood differ
        // for residuals (3, 6) dB under sigma (2, 5).
        let m = SegmentModel::urban_los_nlos();
        let user = Point2::new(0.0, 0.0);
        let x = Point2::new(0.0, 0.0);
        let d = dist_to_user(x, user, &h());
        let mean1 = m.segments[0].mean_gain_db(d);
        let mean2 = m.segments[1].mean_gain_db(d);
        // choose y with |y-mean1| = r1, |y-mean2| = r2 on the far side of mean1
        let y = mean1 + (mean1 - mean2).signum() * 3.0;
        let r1 = (y - mean1).abs();
        let r2 = (y - mean2).abs();
        let meas = Measurement {
            position: x,
            gain_db: y,
        };
        let simple = detect_segment(&meas, user, &m, &h()).get();
        let ml = detect_segment_ml(&meas, user, &m, &h(), |k, r| {
            gaussian(m.segment(k).sigma_db, r)
        })
        .get();
        assert_eq!(simple, if r1 / 2.0 < r2 / 5.0 { 1 } else { 2 });
        assert_eq!(
            ml,
            if gaussian(2.0, r1) >= gaussian(5.0, r2) {
                1
            } else {
                2
            }
        );
    }

    #[test]
    fn detection_error_falls_with_separation() {
        let user = Point2::new(0.0, 0.0);
        let x = Point2::new(150.0, 0.0);
        let d = dist_to_user(x, user, &h());
        let mut last = 1.0;
        for sigma in [8.0, 4.0, 2.0] {
            let mut m = SegmentModel::urban_los_nlos();
            for s in &mut m.segments {
                s.sigma_db = sigma;
            }
            let field = NestedBoundaryField::isotropic(&[100.0]).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(8);
            let n = 20_000;
            let errors = (0..n)
                .filter(|_| {
                    let meas = sample_measurement(x, user, &field, &m, &h(), &mut rng);
                    detect_segment(&meas, user, &m, &h()) != field.segment(x, user)
                })
                .count();
            let rate = errors as f64 / n as f64;
            assert!(rate < last, "sigma {sigma}: {rate} !< {last} (d = {d})");
            last = rate;
        }
    }

    #[test]
    fn rayleigh_unit_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mean = (0..n)
            .map(|_| sample_fading(FadingKind::NlosRayleigh, &mut rng))
            .sum::<f64>()
            / n as f64;
        assert!((mean - 1.0).abs() < 0.01);
    }

    fn moments(kind: FadingKind, n: usize) -> (f64, f64) {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s: Vec<f64> = (0..n).map(|_| sample_fading(kind, &mut rng)).collect();
        let mean = s.iter().sum::<f64>() / n as f64;
        let var = s.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n as f64;
        (mean, var)
    }

    #[test]
    fn rician_has_less_spread_than_rayleigh() {
        let (m20, v20) = moments(FadingKind::BsUavRician20dB, 200_000);
        let (m9, v9) = moments(FadingKind::LosRician9dB, 200_000);
        let (_, v0) = moments(FadingKind::NlosRayleigh, 200_000);
        assert!((m20 - 1.0).abs() < 0.01 && (m9 - 1.0).abs() < 0.01);
        assert!(v20 < v9 && v9 < v0);
    }

    /// Modified Bessel function I0 by power series.
    fn bessel_i0(x: f64) -> f64 {
        let q = x * x / 4.0;
        let mut term = 1.0;
        let mut sum = 1.0;
        for k in 1..400 {
            term *= q / (k as f64 * k as f64);
            sum += term;
            if term < 1e-17 * sum {
                break;
            }
        }
        sum
    }

    /// Rician power CDF `1 - Q1(sqrt(2K), sqrt(2(K+1)s))` by Simpson quadrature of the density.
    fn rician_cdf(k: f64, s: f64) -> f64 {
        let pdf = |t: f64| {
            (k + 1.0) * (-k - (k + 1.0) * t).exp() * bessel_i0(2.0 * (k * (k + 1.0) * t).sqrt())
        };
        let n = 20_000;
        let hstep = s / n as f64;
        let mut acc = pdf(0.0) + pdf(s);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * pdf(i as f64 * hstep);
        }
        acc * hstep / 3.0
    }

    #[test]
    fn rician_cdf_matches_marcum_q() {
        for kind in [FadingKind::LosRician9dB, FadingKind::BsUavRician20dB] {
            let mut rng = ChaCha8Rng::seed_from_u64(4);
            let n = 200_000;
            let mut s: Vec<f64> = (0..n).map(|_| sample_fading(kind, &mut rng)).collect();
            s.sort_by(f64::total_cmp);
            for q in [0.05, 0.25, 0.5, 0.75, 0.95] {
                let x = s[(q * n as f64) as usize];
                let cdf = rician_cdf(kind.k_factor(), x);
                assert!((cdf - q).abs() < 0.01, "{kind:?} q={q}: cdf({x}) = {cdf}");
            }
        }
    }

    #[test]
    fn detector_oracle_is_repeatable_and_mostly_right() {
        let m = SegmentModel::urban_los_nlos();
        let field = NestedBoundaryField::isotropic(&[100.0]).unwrap();
        let user = Point2::new(0.0, 0.0);
        let det = DetectorOracle {
            truth: &field,
            model: &m,
            heights: h(),
            seed: 7,
            fading_snapshots: 8,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut agree = 0;
        for _ in 0..2000 {
            let x = Point2::new(
                rng.random_range(-300.0..300.0),
                rng.random_range(-300.0..300.0),
            );
            let k = det.segment(x, user);
            assert_eq!(k, det.segment(x, user));
            agree += usize::from(k == field.segment(x, user));
        }
        assert!(agree > 1500, "{agree}");
    }
}
