use nalgebra::{Matrix2, Matrix2x4, Matrix4, Vector2, Vector4};

/// Constant-velocity filter tuning.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KalmanParams {
    /// White-acceleration spectral density, m²/s³.
    pub accel_density: f64,
    /// Per-axis measurement standard deviation, m.
    pub measurement_sigma: f64,
    /// Initial per-axis velocity standard deviation, m/s.
    pub initial_velocity_sigma: f64,
}

impl Default for KalmanParams {
    fn default() -> Self {
        Self { accel_density: 4.0, measurement_sigma: 0.15, initial_velocity_sigma: 1.0 }
    }
}

/// State `[x, y, vx, vy]` with its covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct KalmanState {
    pub x: Vector4<f64>,
    pub p: Matrix4<f64>,
}

fn transition(dt: f64) -> Matrix4<f64> {
    let mut f = Matrix4::identity();
    f[(0, 2)] = dt;
    f[(1, 3)] = dt;
    f
}

fn process_noise(dt: f64, q: f64) -> Matrix4<f64> {
    let (a, b, c) = (dt.powi(3) / 3.0 * q, dt.powi(2) / 2.0 * q, dt * q);
    let mut m = Matrix4::zeros();
    for axis in 0..2 {
        m[(axis, axis)] = a;
        m[(axis, axis + 2)] = b;
        m[(axis + 2, axis)] = b;
        m[(axis + 2, axis + 2)] = c;
    }
    m
}

fn observation() -> Matrix2x4<f64> {
    Matrix2x4::new(1.0, 0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0)
}

impl KalmanState {
    /// Starts at a measured position with zero velocity.
    pub fn at(position: (f64, f64), params: &KalmanParams) -> Self {
        let r = params.measurement_sigma.powi(2);
        let v = params.initial_velocity_sigma.powi(2);
        Self {
            x: Vector4::new(position.0, position.1, 0.0, 0.0),
            p: Matrix4::from_diagonal(&Vector4::new(r, r, v, v)),
        }
    }

    pub fn position(&self) -> (f64, f64) {
        (self.x[0], self.x[1])
    }

    pub fn velocity(&self) -> (f64, f64) {
        (self.x[2], self.x[3])
    }

    pub fn predict(&mut self, dt: f64, params: &KalmanParams) {
        let f = transition(dt);
        self.x = f * self.x;
        self.p = f * self.p * f.transpose() + process_noise(dt, params.accel_density);
        self.symmetrize();
    }

    fn innovation_cov(&self, params: &KalmanParams) -> Matrix2<f64> {
        let h = observation();
        h * self.p * h.transpose() + Matrix2::identity() * params.measurement_sigma.powi(2)
    }

    /// Squared Mahalanobis distance of a position measurement.
    pub fn mahalanobis2(&self, z: (f64, f64), params: &KalmanParams) -> f64 {
        let y = Vector2::new(z.0 - self.x[0], z.1 - self.x[1]);
        match self.innovation_cov(params).try_inverse() {
            Some(s_inv) => (y.transpose() * s_inv * y)[0],
            None => f64::INFINITY,
        }
    }

    /// Joseph-form position update.
    pub fn update(&mut self, z: (f64, f64), params: &KalmanParams) {
        let h = observation();
        let r = Matrix2::identity() * params.measurement_sigma.powi(2);
        let s = self.innovation_cov(params);
        let Some(s_inv) = s.try_inverse() else { return };
        let k = self.p * h.transpose() * s_inv;
        let y = Vector2::new(z.0 - self.x[0], z.1 - self.x[1]);
        self.x += k * y;
        let a = Matrix4::identity() - k * h;
        self.p = a * self.p * a.transpose() + k * r * k.transpose();
        self.symmetrize();
    }

    fn symmetrize(&mut self) {
        self.p = (self.p + self.p.transpose()) * 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn predict_moves_by_velocity() {
        let params = KalmanParams::default();
        let mut s = KalmanState::at((1.0, 2.0), &params);
        s.x[2] = 0.5;
        s.predict(0.05, &params);
        assert!((s.x[0] - 1.025).abs() < 1e-15);
        assert_eq!(s.x[1], 2.0);
    }

    #[test]
    fn static_predict_grows_trace() {
        let params = KalmanParams::default();
        let mut s = KalmanState::at((0.0, 1.0), &params);
        let before = s.p.trace();
        s.predict(0.3, &params);
        assert_eq!(s.position(), (0.0, 1.0));
        assert!(s.p.trace() > before);
    }

    #[test]
    fn half_steps_compose() {
        let params = KalmanParams::default();
        let mut a = KalmanState::at((0.3, 1.7), &params);
        a.x[2] = -0.8;
        a.x[3] = 1.1;
        let mut b = a.clone();
        a.predict(0.1, &params);
        b.predict(0.05, &params);
        b.predict(0.05, &params);
        assert!((a.x - b.x).norm() < 1e-12);
        let f = transition(0.05);
        assert!((f * f - transition(0.1)).norm() < 1e-15);
    }

    #[test]
    fn update_pulls_toward_measurement() {
        let params = KalmanParams::default();
        let mut s = KalmanState::at((1.0, 1.0), &params);
        s.predict(0.05, &params);
        s.update((1.1, 1.0), &params);
        assert!(s.x[0] > 1.0 && s.x[0] < 1.1);
    }
}
