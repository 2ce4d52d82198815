//! Radiometric link budget for a small LED source viewed by a lensed
//! photodiode or a camera.
//!
//! Model: the LED is a Lambertian emitter of total optical power `tx_power_w`.
//! A receiver lens of radius `lens_radius_m` at distance `distance_m` and
//! polar angle `theta_rad` subtends a small solid angle; the collected power
//! is attenuated by a lumped optical loss factor. All quantities are SI
//! (meters, watts, radians) unless a name says otherwise.

use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OpticsError {
    #[error("emission angle must be in [0, pi/2), got {0} rad")]
    OutOfPattern(f64),
    #[error("far-field model needs lens_radius/distance < 0.1, got {ratio}")]
    NearField { ratio: f64 },
    #[error("{name} must be positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("{name} must be in (0, 1], got {value}")]
    OutOfUnitRange { name: &'static str, value: f64 },
}

fn positive(name: &'static str, value: f64) -> Result<f64, OpticsError> {
    if value > 0.0 && value.is_finite() {
        Ok(value)
    } else {
        Err(OpticsError::NonPositive { name, value })
    }
}

/// Transmitter-to-receiver geometry and power budget.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalLink {
    /// Polar angle off the LED's surface normal, radians, in `[0, pi/2)`.
    pub theta_rad: f64,
    /// Azimuth, radians. Informational: a Lambertian pattern is rotationally
    /// symmetric, so it never enters the power math.
    pub phi_rad: f64,
    /// LED-to-lens distance, meters.
    pub distance_m: f64,
    /// Receiver lens radius, meters.
    pub lens_radius_m: f64,
    /// Lumped optical loss in `(0, 1]` (lens transmittance, filter, window).
    pub loss: f64,
    /// Total LED optical power, watts.
    pub tx_power_w: f64,
}

impl OpticalLink {
    pub fn new(
        theta_rad: f64,
        phi_rad: f64,
        distance_m: f64,
        lens_radius_m: f64,
        loss: f64,
        tx_power_w: f64,
    ) -> Result<Self, OpticsError> {
        if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_rad) {
            return Err(OpticsError::OutOfPattern(theta_rad));
        }
        positive("distance_m", distance_m)?;
        positive("lens_radius_m", lens_radius_m)?;
        positive("tx_power_w", tx_power_w)?;
        if !(loss > 0.0 && loss <= 1.0) {
            return Err(OpticsError::OutOfUnitRange { name: "loss", value: loss });
        }
        let ratio = lens_radius_m / distance_m;
        if ratio >= 0.1 {
            return Err(OpticsError::NearField { ratio });
        }
        Ok(Self { theta_rad, phi_rad, distance_m, lens_radius_m, loss, tx_power_w })
    }
}

/// Photodiode front-end: responsivity, transimpedance gain, and the smallest
/// optical power the chain can detect.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhotodiodeParams {
    /// Amps of photocurrent per watt of incident light.
    pub responsivity_a_per_w: f64,
    /// Transimpedance gain, volts out per amp of photocurrent.
    pub gain_v_per_a: f64,
    /// Detection threshold, watts.
    pub min_detectable_w: f64,
}

/// Camera and target geometry for the imaging-side limits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraParams {
    /// Light wavelength, meters.
    pub wavelength_m: f64,
    /// Camera-to-LED distance, meters.
    pub distance_m: f64,
    /// Aperture diameter, meters.
    pub aperture_m: f64,
    /// Focal length, meters.
    pub focal_m: f64,
    /// Pixel pitch, meters.
    pub pixel_m: f64,
    /// Physical LED size, meters.
    pub led_size_m: f64,
}

impl CameraParams {
    pub fn new(
        wavelength_m: f64,
        distance_m: f64,
        aperture_m: f64,
        focal_m: f64,
        pixel_m: f64,
        led_size_m: f64,
    ) -> Result<Self, OpticsError> {
        positive("wavelength_m", wavelength_m)?;
        positive("distance_m", distance_m)?;
        positive("aperture_m", aperture_m)?;
        positive("focal_m", focal_m)?;
        positive("pixel_m", pixel_m)?;
        positive("led_size_m", led_size_m)?;
        Ok(Self { wavelength_m, distance_m, aperture_m, focal_m, pixel_m, led_size_m })
    }
}

/// Lambertian radiant intensity pattern `R(theta) = cos(theta) / pi`, per
/// steradian, normalized so the hemisphere integral is 1.
pub fn lambertian_intensity(theta_rad: f64) -> Result<f64, OpticsError> {
    if !(0.0..std::f64::consts::FRAC_PI_2).contains(&theta_rad) {
        return Err(OpticsError::OutOfPattern(theta_rad));
    }
    Ok(theta_rad.cos() / std::f64::consts::PI)
}

/// Solid angle of a lens of radius `lens_radius_m` seen from `distance_m`
/// away: `pi * r^2 / d^2`. Valid only in the far field (`r/d < 0.1`).
pub fn solid_angle(lens_radius_m: f64, distance_m: f64) -> Result<f64, OpticsError> {
    positive("lens_radius_m", lens_radius_m)?;
    positive("distance_m", distance_m)?;
    let ratio = lens_radius_m / distance_m;
    if ratio >= 0.1 {
        return Err(OpticsError::NearField { ratio });
    }
    Ok(std::f64::consts::PI * lens_radius_m * lens_radius_m / (distance_m * distance_m))
}

/// Optical power collected by the receiver lens:
/// `P_t * R(theta) * Omega * loss`.
pub fn received_power(link: &OpticalLink) -> Result<f64, OpticsError> {
    let intensity = lambertian_intensity(link.theta_rad)?;
    let omega = solid_angle(link.lens_radius_m, link.distance_m)?;
    Ok(link.tx_power_w * intensity * omega * link.loss)
}

/// Largest distance at which the link still delivers the photodiode's
/// minimum detectable power. Ignores `link.distance_m`; that field is the
/// solved-for quantity.
pub fn effective_distance(link: &OpticalLink, pd: &PhotodiodeParams) -> Result<f64, OpticsError> {
    positive("min_detectable_w", pd.min_detectable_w)?;
    let intensity = lambertian_intensity(link.theta_rad)?;
    // Inverting P_r(d) = P_t R(theta) (pi r^2 / d^2) L = P_thr for d.
    let arg = std::f64::consts::PI * link.tx_power_w * intensity * link.loss / pd.min_detectable_w;
    Ok(link.lens_radius_m * arg.sqrt())
}

/// Smallest transmit power for which the link reaches `distance_m` at the
/// photodiode's detection threshold. Inverse of [`effective_distance`].
pub fn min_tx_power_for_distance(
    distance_m: f64,
    theta_rad: f64,
    lens_radius_m: f64,
    loss: f64,
    min_detectable_w: f64,
) -> Result<f64, OpticsError> {
    positive("distance_m", distance_m)?;
    positive("lens_radius_m", lens_radius_m)?;
    positive("min_detectable_w", min_detectable_w)?;
    let intensity = lambertian_intensity(theta_rad)?;
    let d_over_r = distance_m / lens_radius_m;
    Ok(min_detectable_w * d_over_r * d_over_r / (std::f64::consts::PI * intensity * loss))
}

/// Rayleigh angular-resolution limit mapped to target space:
/// `1.22 * wavelength * distance / aperture` meters. Two points closer than
/// this blur together at the sensor.
pub fn diffraction_limit(camera: &CameraParams) -> f64 {
    1.22 * camera.wavelength_m * camera.distance_m / camera.aperture_m
}

/// Distance at which the LED's geometric image shrinks to one pixel:
/// `focal * led_size / pixel` meters. Beyond this the LED is sub-pixel.
pub fn max_one_pixel_distance(camera: &CameraParams) -> f64 {
    camera.focal_m * camera.led_size_m / camera.pixel_m
}

/// Transimpedance output voltage for incident optical power `p_in_w`:
/// `P * responsivity * gain`.
pub fn pd_voltage(p_in_w: f64, pd: &PhotodiodeParams) -> f64 {
    p_in_w * pd.responsivity_a_per_w * pd.gain_v_per_a
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(a.abs())
    }

    #[test]
    fn lambertian_head_on_and_off_axis() {
        assert!(close(lambertian_intensity(0.0).unwrap(), 1.0 / std::f64::consts::PI, 1e-12));
        let at_25deg = lambertian_intensity(25f64.to_radians()).unwrap();
        assert!(close(at_25deg, 0.2885, 1e-3), "R(25 deg) = {at_25deg}");
        assert!(lambertian_intensity(std::f64::consts::FRAC_PI_2).is_err());
        assert!(lambertian_intensity(-0.1).is_err());
    }

    #[test]
    fn lambertian_integrates_to_one_over_hemisphere() {
        // Simpson quadrature of R(theta) * 2 pi sin(theta) over [0, pi/2].
        let n = 20_000;
        let h = std::f64::consts::FRAC_PI_2 / n as f64;
        let f = |theta: f64| {
            (theta.cos() / std::f64::consts::PI) * 2.0 * std::f64::consts::PI * theta.sin()
        };
        let mut sum = f(0.0) + f(std::f64::consts::FRAC_PI_2 - 1e-15);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            sum += w * f(i as f64 * h);
        }
        let integral = sum * h / 3.0;
        assert!(
            (integral - 1.0).abs() < 1e-6,
            "hemisphere integral = {integral}, expected 1"
        );
    }

    #[test]
    fn solid_angle_example() {
        let omega = solid_angle(0.0254, 1.0).unwrap();
        assert!(close(omega, 2.027e-3, 1e-3), "omega = {omega}");
    }

    #[test]
    fn solid_angle_rejects_near_field() {
        assert!(matches!(solid_angle(0.2, 1.0), Err(OpticsError::NearField { .. })));
        assert!(solid_angle(0.0, 1.0).is_err());
    }

    #[test]
    fn received_power_example() {
        let link = OpticalLink::new(0.0, 0.0, 1.0, 0.0254, 0.8, 1e-3).unwrap();
        let p = received_power(&link).unwrap();
        assert!(close(p, 5.16e-7, 1e-3), "P_r = {p}");
    }

    #[test]
    fn received_power_follows_inverse_square() {
        let base = OpticalLink::new(0.3, 0.0, 1.0, 0.0254, 0.8, 2e-3).unwrap();
        let p1 = received_power(&base).unwrap();
        for d in [2.0, 5.0, 17.0, 60.0] {
            let link = OpticalLink { distance_m: d, ..base };
            let p = received_power(&link).unwrap();
            assert!(
                close(p * d * d, p1, 1e-9),
                "P_r * d^2 drifted at d = {d}: {} vs {}",
                p * d * d,
                p1
            );
        }
    }

    #[test]
    fn effective_distance_inverts_received_power() {
        let pd = PhotodiodeParams {
            responsivity_a_per_w: 0.32,
            gain_v_per_a: 4.75e5,
            min_detectable_w: 1e-9,
        };
        let link = OpticalLink::new(25f64.to_radians(), 0.0, 1.0, 0.0254, 0.8, 5.58e-3).unwrap();
        let d_max = effective_distance(&link, &pd).unwrap();
        let at_limit = OpticalLink { distance_m: d_max, ..link };
        let p = received_power(&at_limit).unwrap();
        assert!(
            close(p, pd.min_detectable_w, 1e-9),
            "power at solved distance = {p}, threshold = {}",
            pd.min_detectable_w
        );
    }

    #[test]
    fn quadrupled_power_doubles_reach() {
        let pd = PhotodiodeParams {
            responsivity_a_per_w: 0.32,
            gain_v_per_a: 4.75e5,
            min_detectable_w: 1e-9,
        };
        let link = OpticalLink::new(0.2, 0.0, 1.0, 0.0254, 0.8, 1e-3).unwrap();
        let d1 = effective_distance(&link, &pd).unwrap();
        let boosted = OpticalLink { tx_power_w: 4e-3, ..link };
        let d2 = effective_distance(&boosted, &pd).unwrap();
        assert!(close(d2, 2.0 * d1, 1e-12), "d2 = {d2}, 2*d1 = {}", 2.0 * d1);
    }

    #[test]
    fn min_tx_power_round_trips_through_effective_distance() {
        let pd = PhotodiodeParams {
            responsivity_a_per_w: 0.32,
            gain_v_per_a: 4.75e5,
            min_detectable_w: 1e-9,
        };
        let p_tx = min_tx_power_for_distance(50.0, 25f64.to_radians(), 0.0254, 0.8, 1e-9).unwrap();
        assert!(close(p_tx, 5.344e-3, 1e-3), "p_tx = {p_tx}");
        let link = OpticalLink::new(25f64.to_radians(), 0.0, 1.0, 0.0254, 0.8, p_tx).unwrap();
        let d = effective_distance(&link, &pd).unwrap();
        assert!(close(d, 50.0, 1e-9), "round-trip distance = {d}");
    }

    #[test]
    fn diffraction_limit_example() {
        let cam = CameraParams::new(525e-9, 10.0, 5e-3, 4e-3, 1.4e-6, 2e-3).unwrap();
        let blur = diffraction_limit(&cam);
        assert!(close(blur, 1.281e-3, 1e-3), "blur = {blur}");
    }

    #[test]
    fn one_pixel_distance_example() {
        let cam = CameraParams::new(525e-9, 10.0, 5e-3, 4e-3, 1.4e-6, 2e-3).unwrap();
        let d = max_one_pixel_distance(&cam);
        assert!(close(d, 5.714, 1e-3), "one-pixel distance = {d}");
    }

    #[test]
    fn pd_voltage_example() {
        let pd = PhotodiodeParams {
            responsivity_a_per_w: 0.32,
            gain_v_per_a: 4.75e5,
            min_detectable_w: 1e-9,
        };
        let v = pd_voltage(1e-6, &pd);
        assert!(close(v, 0.152, 1e-9), "V = {v}");
    }

    #[test]
    fn link_constructor_validates() {
        assert!(OpticalLink::new(1.6, 0.0, 1.0, 0.0254, 0.8, 1e-3).is_err());
        assert!(OpticalLink::new(0.0, 0.0, 0.1, 0.0254, 0.8, 1e-3).is_err());
        assert!(OpticalLink::new(0.0, 0.0, 1.0, 0.0254, 1.5, 1e-3).is_err());
        assert!(OpticalLink::new(0.0, 0.0, 1.0, 0.0254, 0.8, 0.0).is_err());
    }
}
