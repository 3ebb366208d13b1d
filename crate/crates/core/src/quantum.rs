//! The quantum coupling: two-qubit states and dichotomic spin observables.
//!
//! Each context has its own distribution, given by the Born rule, and its
//! correlation is `Tr(ρ A(θa) ⊗ B(θb))`. `S` composes four such expectations.
//! The CHSH operator is only built by [`chsh_operator`] as a diagnostic.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::cbd::{sample_bundle_from_probabilities, Behavior};
use crate::error::{Error, Result};
use crate::linalg::{self, kron2, trace_product, Mat4, C64, ZERO4};
use crate::model::{Context, ExperimentBundle, Setting};

pub const HERMITIAN_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const PSD_TOL: f64 = 1e-10;
pub const IMAGINARY_TOL: f64 = 1e-12;

/// `2√2`.
pub const TSIRELSON_BOUND: f64 = 2.0 * std::f64::consts::SQRT_2;

/// How a setting angle maps onto the Bloch sphere.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convention {
    /// `A(θ) = cos θ σ_z + sin θ σ_x`.
    #[default]
    Spin,
    /// Photon polarizer angle: `A(θ) = cos 2θ σ_z + sin 2θ σ_x`.
    Polarization,
}

impl Convention {
    fn bloch_angle(self, angle: f64) -> f64 {
        match self {
            Convention::Spin => angle,
            Convention::Polarization => 2.0 * angle,
        }
    }
}

/// The ±1-valued observable measured at `angle`.
pub fn observable(angle: f64, convention: Convention) -> [[f64; 2]; 2] {
    let (s, c) = convention.bloch_angle(angle).sin_cos();
    [[c, s], [s, -c]]
}

fn projector(angle: f64, sign: f64, convention: Convention) -> [[f64; 2]; 2] {
    let a = observable(angle, convention);
    [
        [0.5 * (1.0 + sign * a[0][0]), 0.5 * sign * a[0][1]],
        [0.5 * sign * a[1][0], 0.5 * (1.0 + sign * a[1][1])],
    ]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeasurementSetting {
    pub angle: f64,
    pub party: Party,
    pub index: Setting,
}

impl MeasurementSetting {
    pub fn new(angle: f64, party: Party, index: Setting) -> Result<Self> {
        if !angle.is_finite() {
            return Err(Error::domain("measurement angle must be finite"));
        }
        Ok(MeasurementSetting { angle, party, index })
    }

    pub fn observable(&self, convention: Convention) -> [[f64; 2]; 2] {
        observable(self.angle, convention)
    }
}

/// Setting angles `(a1, a2, b1, b2)` in radians.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AngleQuadruple {
    pub a1: f64,
    pub a2: f64,
    pub b1: f64,
    pub b2: f64,
}

impl AngleQuadruple {
    pub fn new(a1: f64, a2: f64, b1: f64, b2: f64) -> Result<Self> {
        if ![a1, a2, b1, b2].iter().all(|x| x.is_finite()) {
            return Err(Error::domain("angles must be finite"));
        }
        Ok(AngleQuadruple { a1, a2, b1, b2 })
    }

    /// `a1 = 0, a2 = π/2, b1 = π/4, b2 = −π/4`: the singlet reaches `S = −2√2` here.
    pub fn tsirelson() -> Self {
        AngleQuadruple { a1: 0.0, a2: FRAC_PI_2, b1: FRAC_PI_4, b2: -FRAC_PI_4 }
    }

    pub fn alice(&self, s: Setting) -> f64 {
        match s {
            Setting::One => self.a1,
            Setting::Two => self.a2,
        }
    }

    pub fn bob(&self, s: Setting) -> f64 {
        match s {
            Setting::One => self.b1,
            Setting::Two => self.b2,
        }
    }

    pub fn for_context(&self, c: Context) -> (f64, f64) {
        (self.alice(c.alice), self.bob(c.bob))
    }

    fn as_array(&self) -> [f64; 4] {
        [self.a1, self.a2, self.b1, self.b2]
    }

    fn from_array(v: [f64; 4]) -> Self {
        AngleQuadruple { a1: v[0], a2: v[1], b1: v[2], b2: v[3] }
    }
}

/// A validated two-qubit density matrix in the basis `|00⟩, |01⟩, |10⟩, |11⟩`.
#[derive(Clone, Debug, PartialEq)]
pub struct DensityMatrix {
    m: Mat4,
}

impl DensityMatrix {
    /// Checks Hermiticity, unit trace and positive semidefiniteness.
    pub fn new(entries: Mat4) -> Result<Self> {
        if entries.iter().flatten().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::domain("density matrix has non-finite entries"));
        }
        for i in 0..4 {
            for j in 0..4 {
                let d = (entries[i][j] - entries[j][i].conj()).norm();
                if d > HERMITIAN_TOL {
                    return Err(Error::domain(format!(
                        "density matrix is not Hermitian: |ρ[{i}][{j}] − conj(ρ[{j}][{i}])| = {d:.3e}"
                    )));
                }
            }
        }
        let tr = linalg::trace4(&entries);
        if (tr.re - 1.0).abs() > TRACE_TOL || tr.im.abs() > TRACE_TOL {
            return Err(Error::domain(format!("density matrix trace is {tr}, not 1")));
        }
        let min_ev = linalg::hermitian_eigenvalues(&entries)[0];
        if min_ev < -PSD_TOL {
            return Err(Error::domain(format!(
                "density matrix is not positive semidefinite (eigenvalue {min_ev:.3e})"
            )));
        }
        Ok(DensityMatrix { m: entries })
    }

    /// `|ψ⟩⟨ψ|` for a unit vector `ψ`.
    pub fn from_pure(psi: [C64; 4]) -> Result<Self> {
        let norm2: f64 = psi.iter().map(|z| z.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > TRACE_TOL {
            return Err(Error::domain(format!("state vector has squared norm {norm2}, not 1")));
        }
        let mut m = ZERO4;
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = psi[i] * psi[j].conj();
            }
        }
        DensityMatrix::new(m)
    }

    /// `(|01⟩ − |10⟩)/√2`.
    pub fn singlet() -> Self {
        let h = 0.5;
        let mut m = ZERO4;
        m[1][1] = C64::new(h, 0.0);
        m[2][2] = C64::new(h, 0.0);
        m[1][2] = C64::new(-h, 0.0);
        m[2][1] = C64::new(-h, 0.0);
        DensityMatrix { m }
    }

    /// `I/4`.
    pub fn maximally_mixed() -> Self {
        let mut m = ZERO4;
        for (i, row) in m.iter_mut().enumerate() {
            row[i] = C64::new(0.25, 0.0);
        }
        DensityMatrix { m }
    }

    /// Computational basis state `|k⟩⟨k|`, `k = 0` being `|00⟩`.
    pub fn basis_state(k: usize) -> Result<Self> {
        if k >= 4 {
            return Err(Error::domain(format!("basis index {k} out of range")));
        }
        let mut m = ZERO4;
        m[k][k] = C64::new(1.0, 0.0);
        Ok(DensityMatrix { m })
    }

    /// `M M† / Tr(M M†)` with i.i.d. standard complex Gaussian entries in `M`.
    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        let mut g = ZERO4;
        for z in g.iter_mut().flatten() {
            *z = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
        let mut m = ZERO4;
        for i in 0..4 {
            for j in 0..4 {
                m[i][j] = (0..4).map(|k| g[i][k] * g[j][k].conj()).sum();
            }
        }
        // Symmetrize against rounding, then normalize.
        for i in 0..4 {
            m[i][i].im = 0.0;
            for j in i + 1..4 {
                m[j][i] = m[i][j].conj();
            }
        }
        let tr = linalg::trace4(&m).re;
        for z in m.iter_mut().flatten() {
            *z /= tr;
        }
        DensityMatrix { m }
    }

    pub fn entries(&self) -> &Mat4 {
        &self.m
    }

    pub fn trace(&self) -> f64 {
        linalg::trace4(&self.m).re
    }

    pub fn purity(&self) -> f64 {
        trace_product(&self.m, &self.m).re
    }

    pub fn eigenvalues(&self) -> [f64; 4] {
        linalg::hermitian_eigenvalues(&self.m)
    }

    fn real_trace_with(&self, op: &Mat4) -> Result<f64> {
        let t = trace_product(&self.m, op);
        if t.im.abs() > IMAGINARY_TOL {
            return Err(Error::Numeric(format!(
                "expectation has imaginary residue {:.3e}",
                t.im
            )));
        }
        Ok(t.re)
    }
}

/// `Tr(ρ A(θa) ⊗ B(θb))` in the spin convention.
pub fn expectation(rho: &DensityMatrix, alice_angle: f64, bob_angle: f64) -> Result<f64> {
    expectation_with(rho, alice_angle, bob_angle, Convention::Spin)
}

pub fn expectation_with(
    rho: &DensityMatrix,
    alice_angle: f64,
    bob_angle: f64,
    convention: Convention,
) -> Result<f64> {
    let op = kron2(&observable(alice_angle, convention), &observable(bob_angle, convention));
    rho.real_trace_with(&op)
}

pub fn s_quantum(rho: &DensityMatrix, angles: &AngleQuadruple) -> Result<f64> {
    s_quantum_with(rho, angles, Convention::Spin)
}

pub fn s_quantum_with(rho: &DensityMatrix, angles: &AngleQuadruple, convention: Convention) -> Result<f64> {
    let mut s = 0.0;
    for c in Context::ALL {
        let (a, b) = angles.for_context(c);
        s += c.chsh_sign() as f64 * expectation_with(rho, a, b, convention)?;
    }
    Ok(s)
}

/// `A1⊗B1 + A1⊗B2 + A2⊗B1 − A2⊗B2`, for cross-checking `⟨Ĉ⟩ = S` and its spectral bound.
pub fn chsh_operator(angles: &AngleQuadruple, convention: Convention) -> Mat4 {
    let mut out = ZERO4;
    for c in Context::ALL {
        let (a, b) = angles.for_context(c);
        let term = kron2(&observable(a, convention), &observable(b, convention));
        let sign = c.chsh_sign() as f64;
        for i in 0..4 {
            for j in 0..4 {
                out[i][j] += term[i][j] * sign;
            }
        }
    }
    out
}

/// Largest absolute eigenvalue of the CHSH operator.
pub fn chsh_operator_norm(angles: &AngleQuadruple, convention: Convention) -> f64 {
    let ev = linalg::hermitian_eigenvalues(&chsh_operator(angles, convention));
    ev[0].abs().max(ev[3].abs())
}

/// Born probabilities of `(+,+), (+,−), (−,+), (−,−)`.
pub fn born_probabilities(rho: &DensityMatrix, alice_angle: f64, bob_angle: f64) -> Result<[f64; 4]> {
    born_probabilities_with(rho, alice_angle, bob_angle, Convention::Spin)
}

pub fn born_probabilities_with(
    rho: &DensityMatrix,
    alice_angle: f64,
    bob_angle: f64,
    convention: Convention,
) -> Result<[f64; 4]> {
    let mut p = [0.0; 4];
    for (k, (sa, sb)) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)].into_iter().enumerate() {
        let op = kron2(
            &projector(alice_angle, sa, convention),
            &projector(bob_angle, sb, convention),
        );
        let v = rho.real_trace_with(&op)?;
        if v < -PSD_TOL {
            return Err(Error::Numeric(format!("negative Born probability {v:.3e}")));
        }
        p[k] = v.max(0.0);
    }
    Ok(p)
}

/// Per-context i.i.d. draws from the Born distributions at the given angles.
pub fn sample_bundle_quantum(
    rho: &DensityMatrix,
    angles: &AngleQuadruple,
    n_per_context: usize,
    seed: u64,
) -> Result<ExperimentBundle> {
    let behavior = Behavior::from_quantum(rho, angles)?;
    sample_bundle_from_probabilities(behavior.probabilities(), n_per_context, seed)
}

/// Maximizes `|S|` over setting angles (spin convention).
///
/// A coarse grid over `[0, 2π)⁴` seeds coordinate ascent. `S` is a sinusoid
/// in each single angle, so every coordinate step jumps to that coordinate's
/// exact optimum. Both signs of `S` are refined and the larger `|S|` is kept.
pub fn optimize_angles(
    rho: &DensityMatrix,
    grid_points: usize,
    refine_iters: usize,
) -> Result<(AngleQuadruple, f64)> {
    if grid_points < 8 {
        return Err(Error::domain(format!("grid_points must be at least 8, got {grid_points}")));
    }
    let g = grid_points;
    let theta = |k: usize| TAU * k as f64 / g as f64;
    let mut table = vec![0.0; g * g];
    for k in 0..g {
        for l in 0..g {
            table[k * g + l] = expectation(rho, theta(k), theta(l))?;
        }
    }
    let e = |k: usize, l: usize| table[k * g + l];

    let (mut best_max, mut best_min) = ((f64::NEG_INFINITY, [0usize; 4]), (f64::INFINITY, [0usize; 4]));
    for a1 in 0..g {
        for a2 in 0..g {
            for b1 in 0..g {
                let partial = e(a1, b1) + e(a2, b1);
                for b2 in 0..g {
                    let s = partial + e(a1, b2) - e(a2, b2);
                    if s > best_max.0 {
                        best_max = (s, [a1, a2, b1, b2]);
                    }
                    if s < best_min.0 {
                        best_min = (s, [a1, a2, b1, b2]);
                    }
                }
            }
        }
    }

    let mut best: Option<(AngleQuadruple, f64)> = None;
    for (sign, start) in [(1.0, best_max.1), (-1.0, best_min.1)] {
        let start = AngleQuadruple::from_array(start.map(theta));
        let (angles, s) = coordinate_ascent(rho, start, sign, refine_iters)?;
        if best.as_ref().is_none_or(|(_, b)| s.abs() > b.abs()) {
            best = Some((angles, s));
        }
    }
    let (angles, s) = best.expect("two candidates were refined");
    Ok((angles, s.abs()))
}

fn coordinate_ascent(
    rho: &DensityMatrix,
    start: AngleQuadruple,
    sign: f64,
    iters: usize,
) -> Result<(AngleQuadruple, f64)> {
    let mut x = start.as_array();
    let mut current = s_quantum(rho, &start)?;
    for _ in 0..iters {
        let before = current;
        for coord in 0..4 {
            let at = |v: f64| {
                let mut y = x;
                y[coord] = v;
                s_quantum(rho, &AngleQuadruple::from_array(y))
            };
            // f(θ) = p cos θ + q sin θ + r
            let (f0, f1, f2) = (at(0.0)?, at(FRAC_PI_2)?, at(PI)?);
            let r = 0.5 * (f0 + f2);
            let p = 0.5 * (f0 - f2);
            let q = f1 - r;
            let opt = (sign * q).atan2(sign * p);
            let candidate = at(opt)?;
            if sign * candidate >= sign * current {
                x[coord] = opt;
                current = candidate;
            }
        }
        if (current - before).abs() <= 1e-15 {
            break;
        }
    }
    Ok((AngleQuadruple::from_array(x), current))
}
