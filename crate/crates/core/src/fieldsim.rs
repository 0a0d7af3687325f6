//! Synthetic flights and shadow-fading fields with known ground truth.
//!
//! Two field generators are provided:
//!
//! - [`SfGenerator::Covariance`] draws a zero-mean Gaussian field with the
//!   symmetrized model correlation as covariance. Every sample then has the
//!   same marginal law, which is what Kriging assumes.
//! - [`SfGenerator::AngularShift`] gives each (tilt bin, elevation bin) cell
//!   its own offset and scale, `w = μ + o_c + s_c z`, with `(s_c, o_c)` on a
//!   circle so that the sorted-sample correlation between two cells equals
//!   `cos(φ_a - φ_b)`. The angles `φ` are chosen so that correlations against
//!   the reference bins reproduce the truth kernels. `z` is a unit Gaussian
//!   field with the DEDM correlation.
//!
//! All randomness comes from `ChaCha8Rng` streams. The flight has its own
//! seed so that field realizations can vary over a fixed trajectory.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::correlation::{dedm_eval, eval_full_correlation, eval_r_elev, eval_r_tilt, CorrelationModel};
use crate::error::{validation, Error, Result};
use crate::geometry::{unproject_enu, wrap_deg, Enu, EulerAngles, LinkGeometry, MeasurementSample};
use crate::propagation::{rsrp_estimate, LinkBudget};

/// Name of the generator behind every random draw, recorded in metadata.
pub const RNG_ALGORITHM: &str = "ChaCha8Rng";

const STREAM_TRAJECTORY: u64 = 1;
const STREAM_FIELD: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// Jitter ladder for the field factorization, relative to the sill.
const JITTER_START: f64 = 1e-10;
const JITTER_STEPS: usize = 6;
/// Eigenvalues above `-PSD_TOLERANCE * scale` count as zero.
const PSD_TOLERANCE: f64 = 1e-9;

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlightPattern {
    #[default]
    Lawnmower,
    RandomWaypoint,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FlightSpec {
    pub pattern: FlightPattern,
    /// Height above the transmitter's ground point.
    pub altitude_m: f64,
    /// `[min, max]` east extent of the flight box, in meters.
    pub east_m: [f64; 2],
    pub north_m: [f64; 2],
    pub speed_mps: f64,
    pub sample_interval_s: f64,
    /// Pitch and roll are uniform in `[-amplitude, amplitude]`.
    pub pitch_amplitude_deg: f64,
    pub roll_amplitude_deg: f64,
    /// Duration over which one pitch/roll draw is held.
    pub attitude_hold_s: f64,
    /// Probability that a hold segment is flown level instead of excited.
    pub level_fraction: f64,
    pub lane_spacing_m: f64,
    /// Seeds the path and attitude draws, independently of the field seed.
    pub trajectory_seed: u64,
}

impl Default for FlightSpec {
    fn default() -> Self {
        Self {
            pattern: FlightPattern::Lawnmower,
            altitude_m: 28.0,
            east_m: [-150.0, 150.0],
            north_m: [-150.0, 150.0],
            speed_mps: 5.0,
            sample_interval_s: 0.5,
            pitch_amplitude_deg: 12.0,
            roll_amplitude_deg: 12.0,
            attitude_hold_s: 2.0,
            level_fraction: 0.0,
            lane_spacing_m: 20.0,
            trajectory_seed: 0,
        }
    }
}

impl FlightSpec {
    pub fn validate(&self) -> Result<()> {
        for a in [self.pitch_amplitude_deg, self.roll_amplitude_deg] {
            if !(0.0..=90.0).contains(&a) {
                return Err(validation(format!("attitude excitation {a} deg outside [0, 90]")));
            }
        }
        if !(0.0..=1.0).contains(&self.level_fraction) {
            return Err(validation("level fraction must lie in [0, 1]"));
        }
        if !(self.east_m[0] < self.east_m[1] && self.north_m[0] < self.north_m[1]) {
            return Err(validation("flight box must have positive extent"));
        }
        if !(self.speed_mps > 0.0 && self.sample_interval_s > 0.0 && self.attitude_hold_s > 0.0) {
            return Err(validation("speed, sample interval and attitude hold must be positive"));
        }
        if self.pattern == FlightPattern::Lawnmower && !(self.lane_spacing_m > 0.0) {
            return Err(validation("lane spacing must be positive"));
        }
        Ok(())
    }
}

/// How SF values are drawn over the synthesized geometry.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum SfGenerator {
    #[default]
    Covariance,
    AngularShift {
        tilt_ref_deg: f64,
        elev_ref_deg: f64,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub seed: u64,
    pub n_samples: usize,
    #[serde(default)]
    pub flight: FlightSpec,
    pub truth: CorrelationModel,
    pub budget: LinkBudget,
    /// Standard deviation of white measurement noise added to the RSRP.
    #[serde(default)]
    pub noise_std_db: f64,
    #[serde(default)]
    pub generator: SfGenerator,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 2 {
            return Err(validation("simulation needs at least 2 samples"));
        }
        self.flight.validate()?;
        self.truth.validate()?;
        self.budget.validate()?;
        if !(self.flight.altitude_m > self.budget.tx.antenna_height_m) {
            return Err(validation("flight altitude must exceed the transmitter antenna height"));
        }
        if !(self.noise_std_db >= 0.0) {
            return Err(validation("noise standard deviation must be >= 0"));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time_s: f64,
    /// ENU position relative to the transmitter's ground point.
    pub position: Enu,
    pub attitude: EulerAngles,
}

fn uniform_sym(rng: &mut ChaCha8Rng, amplitude: f64) -> f64 {
    (2.0 * rng.random::<f64>() - 1.0) * amplitude
}

/// Fixed-altitude flight sampled at a constant interval. Yaw follows the
/// heading; pitch and roll are redrawn at every attitude hold boundary.
pub fn generate_trajectory(config: &SimConfig) -> Result<Vec<TrajectoryPoint>> {
    let f = &config.flight;
    f.validate()?;
    if config.n_samples == 0 {
        return Err(validation("trajectory needs at least one sample"));
    }
    let mut rng = stream_rng(f.trajectory_seed, STREAM_TRAJECTORY);

    let lawnmower: Vec<[f64; 2]> = if f.pattern == FlightPattern::Lawnmower {
        let lanes = ((f.north_m[1] - f.north_m[0]) / f.lane_spacing_m).floor() as usize + 1;
        (0..lanes)
            .flat_map(|k| {
                let n = f.north_m[0] + k as f64 * f.lane_spacing_m;
                if k % 2 == 0 {
                    [[f.east_m[0], n], [f.east_m[1], n]]
                } else {
                    [[f.east_m[1], n], [f.east_m[0], n]]
                }
            })
            .collect()
    } else {
        Vec::new()
    };
    // ping-pong over the lawnmower waypoints
    let cycle: Vec<usize> = if lawnmower.len() > 1 {
        (0..lawnmower.len()).chain((1..lawnmower.len() - 1).rev()).collect()
    } else {
        vec![0]
    };
    let mut next_idx = 1usize;
    let mut next_waypoint = |rng: &mut ChaCha8Rng| -> [f64; 2] {
        match f.pattern {
            FlightPattern::Lawnmower => {
                let w = lawnmower[cycle[next_idx % cycle.len()]];
                next_idx += 1;
                w
            }
            FlightPattern::RandomWaypoint => [
                f.east_m[0] + rng.random::<f64>() * (f.east_m[1] - f.east_m[0]),
                f.north_m[0] + rng.random::<f64>() * (f.north_m[1] - f.north_m[0]),
            ],
        }
    };

    let mut pos = match f.pattern {
        FlightPattern::Lawnmower => lawnmower[0],
        FlightPattern::RandomWaypoint => next_waypoint(&mut rng),
    };
    let mut target = next_waypoint(&mut rng);
    let mut heading = (target[1] - pos[1]).atan2(target[0] - pos[0]);
    let step = f.speed_mps * f.sample_interval_s;

    let mut out = Vec::with_capacity(config.n_samples);
    let mut segment = usize::MAX;
    let (mut pitch, mut roll) = (0.0, 0.0);
    for k in 0..config.n_samples {
        let time_s = k as f64 * f.sample_interval_s;
        let seg = (time_s / f.attitude_hold_s).floor() as usize;
        if seg != segment {
            segment = seg;
            pitch = uniform_sym(&mut rng, f.pitch_amplitude_deg);
            roll = uniform_sym(&mut rng, f.roll_amplitude_deg);
            if f.level_fraction > 0.0 && rng.random::<f64>() < f.level_fraction {
                (pitch, roll) = (0.0, 0.0);
            }
        }
        out.push(TrajectoryPoint {
            time_s,
            position: Enu::new(pos[0], pos[1], f.altitude_m),
            attitude: EulerAngles::new(wrap_deg(heading.to_degrees()), pitch, wrap_deg(roll)),
        });

        let mut remaining = step;
        loop {
            let (de, dn) = (target[0] - pos[0], target[1] - pos[1]);
            let dist = de.hypot(dn);
            if dist > remaining {
                pos = [pos[0] + de / dist * remaining, pos[1] + dn / dist * remaining];
                heading = dn.atan2(de);
                break;
            }
            remaining -= dist;
            pos = target;
            target = next_waypoint(&mut rng);
        }
    }
    Ok(out)
}

/// Factor `L` with `L Lᵀ ≈ cov`, used to draw correlated Gaussian vectors.
///
/// Cholesky is tried first. A numerically semi-definite matrix falls back to
/// the eigen square root with clipped eigenvalues; a mildly indefinite one
/// gets diagonal jitter.
#[derive(Clone, Debug)]
pub struct GaussianField {
    factor: DMatrix<f64>,
}

impl GaussianField {
    pub fn new(cov: DMatrix<f64>) -> Result<Self> {
        let n = cov.nrows();
        if n == 0 || cov.ncols() != n {
            return Err(validation("covariance must be a non-empty square matrix"));
        }
        let scale = cov.diagonal().amax().max(f64::MIN_POSITIVE);
        if let Some(c) = cov.clone().cholesky() {
            return Ok(Self { factor: c.l() });
        }
        let eig = SymmetricEigen::new(cov.clone());
        let min_eig = eig.eigenvalues.min();
        if min_eig >= -PSD_TOLERANCE * scale {
            let sqrt = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
            let mut factor = eig.eigenvectors;
            for (j, s) in sqrt.iter().enumerate() {
                factor.column_mut(j).scale_mut(*s);
            }
            return Ok(Self { factor });
        }
        for k in 0..JITTER_STEPS {
            let jitter = JITTER_START * scale * 10f64.powi(k as i32);
            let mut m = cov.clone();
            for i in 0..n {
                m[(i, i)] += jitter;
            }
            if let Some(c) = m.cholesky() {
                return Ok(Self { factor: c.l() });
            }
        }
        Err(Error::NotPositiveDefinite {
            min_eigenvalue: min_eig,
        })
    }

    pub fn len(&self) -> usize {
        self.factor.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.factor.nrows() == 0
    }

    /// One zero-mean draw.
    pub fn draw(&self, rng: &mut impl Rng) -> DVector<f64> {
        let g = DVector::from_fn(self.factor.ncols(), |_, _| rng.sample::<f64, _>(StandardNormal));
        &self.factor * g
    }
}

/// Truth covariance `σ² r̂(i, j) + nugget [i = j]` over the geometries.
pub fn truth_covariance(geometries: &[LinkGeometry], truth: &CorrelationModel) -> Result<DMatrix<f64>> {
    let n = geometries.len();
    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = truth.sigma2 + truth.nugget;
        for j in i + 1..n {
            let c = truth.sigma2 * eval_full_correlation(truth, &geometries[i], &geometries[j])?;
            cov[(i, j)] = c;
            cov[(j, i)] = c;
        }
    }
    Ok(cov)
}

/// Largest field the dense sampler accepts.
pub const MAX_FIELD_SIZE: usize = 5000;

/// One Gaussian SF realization with the truth model's covariance.
pub fn sample_sf_field(geometries: &[LinkGeometry], truth: &CorrelationModel, seed: u64) -> Result<Vec<f64>> {
    if geometries.len() > MAX_FIELD_SIZE {
        return Err(validation(format!(
            "field of {} samples exceeds the dense limit {MAX_FIELD_SIZE}",
            geometries.len()
        )));
    }
    if geometries.is_empty() {
        return Ok(Vec::new());
    }
    let field = GaussianField::new(truth_covariance(geometries, truth)?)?;
    let mut rng = stream_rng(seed, STREAM_FIELD);
    Ok(field.draw(&mut rng).iter().map(|v| truth.mu + v).collect())
}

/// Shift angle of every (tilt bin, elevation bin) cell, indexed
/// `[tilt][elev]`, in radians.
pub fn shift_angles(truth: &CorrelationModel, tilt_ref_deg: f64, elev_ref_deg: f64) -> Result<Vec<Vec<f64>>> {
    let bins = &truth.bins;
    let signed = |rho: f64, up: bool| -> f64 {
        let a = rho.clamp(-1.0, 1.0).acos();
        if up {
            a
        } else {
            -a
        }
    };
    let mut out = vec![vec![0.0; bins.elev.len()]; bins.tilt.len()];
    for (e, &theta) in bins.elev.reps.iter().enumerate() {
        let elev = signed(
            eval_r_elev(truth, elev_ref_deg, theta, tilt_ref_deg)?,
            theta >= elev_ref_deg,
        );
        for (t, &delta) in bins.tilt.reps.iter().enumerate() {
            let tilt = signed(eval_r_tilt(truth, tilt_ref_deg, delta, theta)?, delta >= tilt_ref_deg);
            let phi = elev + tilt;
            if phi.abs() >= std::f64::consts::FRAC_PI_2 {
                return Err(validation(format!(
                    "truth kernels too strong: cell (tilt {delta}, elevation {theta}) needs a shift of {:.1} deg",
                    phi.to_degrees()
                )));
            }
            out[t][e] = phi;
        }
    }
    Ok(out)
}

/// Cell-shift SF realization (see the module docs).
pub fn sample_sf_shift(
    geometries: &[LinkGeometry],
    truth: &CorrelationModel,
    tilt_ref_deg: f64,
    elev_ref_deg: f64,
    seed: u64,
) -> Result<Vec<f64>> {
    let n = geometries.len();
    if n > MAX_FIELD_SIZE {
        return Err(validation(format!(
            "field of {n} samples exceeds the dense limit {MAX_FIELD_SIZE}"
        )));
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let phis = shift_angles(truth, tilt_ref_deg, elev_ref_deg)?;
    let bins = &truth.bins;
    let phi_of = |g: &LinkGeometry| -> f64 {
        match (bins.tilt.index_of(g.delta_deg), bins.elev.index_of(g.theta_deg)) {
            (Some(t), Some(e)) => phis[t][e],
            _ => 0.0,
        }
    };
    let phi: Vec<f64> = geometries.iter().map(phi_of).collect();

    // Radius per sign of φ so that the sample-weighted offsets cancel.
    let pos: f64 = phi.iter().filter(|p| **p > 0.0).map(|p| p.sin()).sum();
    let neg: f64 = phi.iter().filter(|p| **p < 0.0).map(|p| -p.sin()).sum();
    let (l_pos, l_neg) = match (pos > 0.0, neg > 0.0) {
        (true, true) => (1.0, pos / neg),
        (false, false) => (1.0, 1.0),
        _ => {
            return Err(validation(
                "shift generator needs cells on both sides of the reference angles",
            ))
        }
    };
    let radius: Vec<f64> = phi
        .iter()
        .map(|&p| {
            if p < 0.0 {
                l_neg
            } else if p > 0.0 {
                l_pos
            } else {
                1.0
            }
        })
        .collect();
    let power = radius.iter().map(|r| r * r).sum::<f64>() / n as f64;
    let k = (truth.sigma2 / power).sqrt();

    let mut cov = DMatrix::zeros(n, n);
    for i in 0..n {
        cov[(i, i)] = 1.0;
        for j in i + 1..n {
            let r = dedm_eval(&truth.dedm, geometries[i].horizontal_distance_to(&geometries[j]));
            cov[(i, j)] = r;
            cov[(j, i)] = r;
        }
    }
    let z = GaussianField::new(cov)?.draw(&mut stream_rng(seed, STREAM_FIELD));
    Ok((0..n)
        .map(|i| {
            let l = k * radius[i];
            truth.mu + l * phi[i].sin() + l * phi[i].cos() * z[i]
        })
        .collect())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimMetadata {
    pub seed: u64,
    pub rng: String,
    pub n_samples: usize,
    pub generator: SfGenerator,
}

/// Synthesized flight with the SF values and geometry behind it.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthDataset {
    pub samples: Vec<MeasurementSample>,
    pub geometries: Vec<LinkGeometry>,
    /// SF before measurement noise.
    pub w_true: Vec<f64>,
    pub metadata: SimMetadata,
}

/// Trajectory, geometry, SF field and received power in one pass. Geometry
/// goes through geodetic coordinates and [`TxSite::locate`], the same path
/// as ingested data.
///
/// [`TxSite::locate`]: crate::geometry::TxSite::locate
pub fn synthesize_dataset(config: &SimConfig) -> Result<SynthDataset> {
    config.validate()?;
    let trajectory = generate_trajectory(config)?;
    let tx = &config.budget.tx;
    let mut samples = Vec::with_capacity(trajectory.len());
    let mut geometries = Vec::with_capacity(trajectory.len());
    for p in &trajectory {
        let sample = MeasurementSample {
            time_s: p.time_s,
            position: unproject_enu(&p.position, &tx.ground),
            attitude: p.attitude,
            rsrp_dbm: 0.0,
        };
        geometries.push(tx.locate(&sample)?);
        samples.push(sample);
    }
    let w_true = match config.generator {
        SfGenerator::Covariance => sample_sf_field(&geometries, &config.truth, config.seed)?,
        SfGenerator::AngularShift {
            tilt_ref_deg,
            elev_ref_deg,
        } => sample_sf_shift(&geometries, &config.truth, tilt_ref_deg, elev_ref_deg, config.seed)?,
    };
    let mut noise_rng = stream_rng(config.seed, STREAM_NOISE);
    for ((s, g), w) in samples.iter_mut().zip(&geometries).zip(&w_true) {
        let mut z = rsrp_estimate(g, &config.budget)? + w;
        if config.noise_std_db > 0.0 {
            z += config.noise_std_db * noise_rng.sample::<f64, _>(StandardNormal);
        }
        s.rsrp_dbm = z;
    }
    Ok(SynthDataset {
        samples,
        geometries,
        w_true,
        metadata: SimMetadata {
            seed: config.seed,
            rng: RNG_ALGORITHM.to_string(),
            n_samples: config.n_samples,
            generator: config.generator,
        },
    })
}
