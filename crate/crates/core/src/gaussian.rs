//! Covariance-matrix algebra for zero-mean Gaussian states.
//!
//! Matrices are in shot-noise units (vacuum variance 1) with quadratures
//! ordered `(x1, p1, x2, p2, ...)`. Means are always zero, so a state is fully
//! described by its covariance matrix.

use nalgebra::{DMatrix, Schur, SVD};

use crate::error::{check, Error, Result};

/// Relative tolerance for the symmetry check on construction.
const SYMMETRY_TOL: f64 = 1e-12;
/// Symplectic eigenvalues in `[1 - PURITY_CLAMP, 1)` are treated as exactly 1.
const PURITY_CLAMP: f64 = 1e-6;
/// Largest admissible real part (relative) of an eigenvalue of Ωγ.
const SPECTRUM_RESIDUE_TOL: f64 = 1e-9;

/// Covariance matrix of an `n`-mode zero-mean Gaussian state.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceMatrix {
    m: DMatrix<f64>,
}

impl CovarianceMatrix {
    /// Wraps a `2n x 2n` real matrix, rejecting non-square, odd-sized or
    /// non-symmetric input. The stored matrix is exactly symmetrised.
    pub fn from_matrix(m: DMatrix<f64>) -> Result<Self> {
        let (rows, cols) = m.shape();
        if rows != cols || rows == 0 || rows % 2 != 0 {
            return Err(Error::Contract(format!(
                "covariance matrix must be 2n x 2n with n >= 1, got {rows} x {cols}"
            )));
        }
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Contract(
                "covariance matrix has non-finite entries".into(),
            ));
        }
        let scale = m.amax().max(1.0);
        let asym = (&m - m.transpose()).amax();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::Contract(format!(
                "covariance matrix not symmetric (max asymmetry {asym:e})"
            )));
        }
        let sym = (&m + m.transpose()) * 0.5;
        Ok(Self { m: sym })
    }

    /// Builds from row-major entries of a `dim x dim` matrix.
    pub fn from_row_slice(dim: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != dim * dim {
            return Err(Error::Contract(format!(
                "expected {} entries for a {dim} x {dim} matrix, got {}",
                dim * dim,
                entries.len()
            )));
        }
        Self::from_matrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    /// `n`-mode vacuum (identity).
    pub fn vacuum(n_modes: usize) -> Self {
        assert!(n_modes > 0, "vacuum needs at least one mode");
        Self {
            m: DMatrix::identity(2 * n_modes, 2 * n_modes),
        }
    }

    /// Single-mode thermal state `nu * I`.
    pub fn thermal(nu: f64) -> Result<Self> {
        check(nu >= 1.0, "nu", nu, "nu >= 1")?;
        Ok(Self {
            m: DMatrix::identity(2, 2) * nu,
        })
    }

    /// Two-mode squeezed vacuum (EPR pair) of variance `v`.
    pub fn epr(v: f64) -> Result<Self> {
        check(v >= 1.0, "V", v, "V >= 1 (physical EPR variance)")?;
        Ok(TwoModeStdForm {
            a: v,
            b: v,
            c: (v * v - 1.0).sqrt(),
        }
        .to_cm())
    }

    /// EPR pair whose transmitted mode carries extra source-noise variance
    /// `chi_s`: mode A has variance `v`, mode B `v + chi_s`.
    pub fn noisy_source(v: f64, chi_s: f64) -> Result<Self> {
        check(v >= 1.0, "V", v, "V >= 1")?;
        check(chi_s >= 0.0, "chi_s", chi_s, "chi_s >= 0")?;
        Ok(TwoModeStdForm {
            a: v,
            b: v + chi_s,
            c: (v * v - 1.0).sqrt(),
        }
        .to_cm())
    }

    pub fn n_modes(&self) -> usize {
        self.m.nrows() / 2
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.m[(row, col)]
    }

    /// Tensor product `self ⊗ other`; `other`'s modes are appended.
    pub fn direct_sum(&self, other: &Self) -> Self {
        let (d1, d2) = (self.m.nrows(), other.m.nrows());
        let mut m = DMatrix::zeros(d1 + d2, d1 + d2);
        m.view_mut((0, 0), (d1, d1)).copy_from(&self.m);
        m.view_mut((d1, d1), (d2, d2)).copy_from(&other.m);
        Self { m }
    }

    /// Reduced state on `modes`, in the order given.
    pub fn marginal(&self, modes: &[usize]) -> Result<Self> {
        if modes.is_empty() {
            return Err(Error::Contract("marginal needs at least one mode".into()));
        }
        for (k, &mode) in modes.iter().enumerate() {
            self.check_mode(mode)?;
            if modes[..k].contains(&mode) {
                return Err(Error::Contract(format!("mode {mode} listed twice")));
            }
        }
        let idx: Vec<usize> = modes.iter().flat_map(|&k| [2 * k, 2 * k + 1]).collect();
        Ok(Self {
            m: self.m.select_rows(&idx).select_columns(&idx),
        })
    }

    /// Mixes modes `i` and `j` on a beamsplitter of transmittance `t`.
    ///
    /// The state transforms as `Sᵀ γ S` where `S` is the identity except for
    /// the block `[[√t I, √(1-t) I], [-√(1-t) I, √t I]]` on `(i, j)`. Mode `i`
    /// carries the transmitted port.
    pub fn beamsplitter(&self, i: usize, j: usize, t: f64) -> Result<Self> {
        self.check_mode(i)?;
        self.check_mode(j)?;
        if i == j {
            return Err(Error::Contract(format!(
                "beamsplitter needs two distinct modes, got {i} twice"
            )));
        }
        check((0.0..=1.0).contains(&t), "T", t, "0 <= T <= 1")?;
        let dim = self.m.nrows();
        let (st, sr) = (t.sqrt(), (1.0 - t).sqrt());
        let mut s = DMatrix::identity(dim, dim);
        for q in 0..2 {
            let (a, b) = (2 * i + q, 2 * j + q);
            s[(a, a)] = st;
            s[(a, b)] = sr;
            s[(b, a)] = -sr;
            s[(b, b)] = st;
        }
        let m = s.transpose() * &self.m * &s;
        Self::from_matrix(m)
    }

    /// Sends `mode` through a lossy channel of transmittance `eta` with excess
    /// noise `eps` referred to the channel input.
    ///
    /// Own variance `v` becomes `eta * v + (1 - eta) + eta * eps`, i.e.
    /// `eta * (v + chi)` with `chi = (1 - eta) / eta + eps`; every correlation
    /// with other modes scales by `√eta`.
    pub fn fiber_channel(&self, mode: usize, eta: f64, eps: f64) -> Result<Self> {
        self.check_mode(mode)?;
        check(eta > 0.0 && eta <= 1.0, "eta", eta, "0 < eta <= 1")?;
        check(eps >= 0.0, "eps", eps, "eps >= 0")?;
        let dim = self.m.nrows();
        let mut scale = vec![1.0; dim];
        scale[2 * mode] = eta.sqrt();
        scale[2 * mode + 1] = eta.sqrt();
        let mut m = DMatrix::from_fn(dim, dim, |r, c| self.m[(r, c)] * scale[r] * scale[c]);
        let added = (1.0 - eta) + eta * eps;
        m[(2 * mode, 2 * mode)] += added;
        m[(2 * mode + 1, 2 * mode + 1)] += added;
        Ok(Self { m })
    }

    /// Symplectic eigenvalues in descending order.
    ///
    /// These are the moduli of the (purely imaginary) eigenvalues of `Ωγ`, for
    /// any number of modes. When `γ = LLᵀ` is positive definite, `Ωγ` is similar
    /// to the antisymmetric `LᵀΩL`, whose singular values are the `ν` each
    /// repeated twice. That route stays accurate on degenerate spectra such as
    /// pure states. Other matrices go through a real Schur decomposition of
    /// `Ωγ`, where a non-negligible real part signals an unphysical input.
    pub fn symplectic_spectrum(&self) -> Result<Vec<f64>> {
        let mut moduli: Vec<f64> = match self.m.clone().cholesky() {
            Some(chol) => {
                let l = chol.unpack();
                let antisym = l.transpose() * apply_omega(&l);
                let svd = SVD::try_new(antisym, false, false, f64::EPSILON, 0).ok_or(
                    Error::NumericalInstability {
                        residue: f64::INFINITY,
                    },
                )?;
                svd.singular_values.iter().copied().collect()
            }
            None => self.omega_gamma_moduli()?,
        };
        moduli.sort_by(|a, b| b.total_cmp(a));
        Ok(moduli
            .chunks(2)
            .map(|pair| 0.5 * (pair[0] + pair[1]))
            .collect())
    }

    fn omega_gamma_moduli(&self) -> Result<Vec<f64>> {
        let schur = Schur::try_new(apply_omega(&self.m), f64::EPSILON, 10_000).ok_or(
            Error::NumericalInstability {
                residue: f64::INFINITY,
            },
        )?;
        let eigs = schur.complex_eigenvalues();
        let scale = eigs.iter().map(|z| z.im.abs()).fold(1.0, f64::max);
        let residue = eigs.iter().map(|z| z.re.abs()).fold(0.0, f64::max);
        if residue > SPECTRUM_RESIDUE_TOL * scale {
            return Err(Error::NumericalInstability { residue });
        }
        Ok(eigs.iter().map(|z| z.im.abs()).collect())
    }

    /// Smallest symplectic eigenvalue.
    pub fn min_symplectic(&self) -> Result<f64> {
        Ok(self
            .symplectic_spectrum()?
            .into_iter()
            .fold(f64::INFINITY, f64::min))
    }

    /// Whether the state satisfies the uncertainty principle to within `tol`.
    pub fn is_physical(&self, tol: f64) -> Result<bool> {
        Ok(self.min_symplectic()? >= 1.0 - tol)
    }

    /// Von Neumann entropy in bits.
    pub fn entropy(&self) -> Result<f64> {
        let mut total = 0.0;
        for nu in self.symplectic_spectrum()? {
            if nu < 1.0 - PURITY_CLAMP {
                return Err(Error::Unphysical { nu });
            }
            total += g_entropy((nu.max(1.0) - 1.0) / 2.0);
        }
        Ok(total)
    }

    /// State of the remaining modes after an x-quadrature homodyne
    /// measurement on `mode`. The measured mode is removed.
    pub fn condition_on_homodyne(&self, mode: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if self.n_modes() < 2 {
            return Err(Error::Contract(
                "homodyne conditioning needs at least two modes".into(),
            ));
        }
        let xi = 2 * mode;
        let vx = self.m[(xi, xi)];
        if vx <= 0.0 {
            return Err(Error::Contract(format!(
                "measured x-variance must be positive, got {vx}"
            )));
        }
        let rest: Vec<usize> = (0..self.m.nrows())
            .filter(|&r| r != xi && r != xi + 1)
            .collect();
        let rest_block = self.m.select_rows(&rest).select_columns(&rest);
        let cross = self.m.select_rows(&rest).column(xi).into_owned();
        let m = rest_block - &cross * cross.transpose() / vx;
        Self::from_matrix(m)
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode < self.n_modes() {
            Ok(())
        } else {
            Err(Error::Contract(format!(
                "mode index {mode} out of range for {} modes",
                self.n_modes()
            )))
        }
    }
}

/// Two-mode covariance matrix in standard form
/// `[[a I, c σz], [c σz, b I]]`, `σz = diag(1, -1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoModeStdForm {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl TwoModeStdForm {
    pub fn to_cm(&self) -> CovarianceMatrix {
        let (a, b, c) = (self.a, self.b, self.c);
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            a,   0.0, c,   0.0,
            0.0, a,   0.0, -c,
            c,   0.0, b,   0.0,
            0.0, -c,  0.0, b,
        ]);
        CovarianceMatrix { m }
    }

    /// Reads `(a, b, c)` back from a two-mode matrix, requiring the
    /// standard-form shape to within `1e-12` relative.
    pub fn from_cm(cm: &CovarianceMatrix) -> Result<Self> {
        if cm.n_modes() != 2 {
            return Err(Error::Contract(format!(
                "standard form needs 2 modes, got {}",
                cm.n_modes()
            )));
        }
        let form = Self {
            a: cm.get(0, 0),
            b: cm.get(2, 2),
            c: cm.get(0, 2),
        };
        let diff = (cm.matrix() - form.to_cm().m).amax();
        if diff > SYMMETRY_TOL * cm.matrix().amax().max(1.0) {
            return Err(Error::Contract(format!(
                "matrix is not in two-mode standard form (deviation {diff:e})"
            )));
        }
        Ok(form)
    }

    /// Closed-form symplectic eigenvalues `(ν+, ν-)`:
    /// `ν±² = (Δ ± √(Δ² - 4D²)) / 2`, `Δ = a² + b² - 2c²`, `D = ab - c²`.
    pub fn closed_form_spectrum(&self) -> [f64; 2] {
        let delta = self.a * self.a + self.b * self.b - 2.0 * self.c * self.c;
        let det = self.a * self.b - self.c * self.c;
        let root = (delta * delta - 4.0 * det * det).max(0.0).sqrt();
        let plus = ((delta + root) / 2.0).sqrt();
        // ν+ ν- = |D| avoids cancellation in the small eigenvalue.
        let minus = if plus > 0.0 { det.abs() / plus } else { 0.0 };
        [plus, minus]
    }
}

/// Entropy of a thermal mode with mean photon number `x`:
/// `G(x) = (x + 1) log2(x + 1) - x log2 x`, `G(0) = 0`.
pub fn g_entropy(x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        (x + 1.0) * (x + 1.0).log2() - x * x.log2()
    }
}

/// Mutual information (bits) between Alice's heterodyne on a mode of
/// variance `a` and Bob's homodyne on a mode of variance `b`, with x-x
/// correlation `c`.
pub fn mutual_info_het_hom(a: f64, b: f64, c: f64) -> Result<f64> {
    check(a >= 1.0 - 1e-9, "a", a, "Alice variance >= 1")?;
    check(b >= 1.0 - 1e-9, "b", b, "Bob variance >= 1")?;
    let conditional = b - c * c / (a + 1.0);
    check(
        conditional > 0.0,
        "b - c^2/(a+1)",
        conditional,
        "positive conditional variance",
    )?;
    Ok(0.5 * (b / conditional).log2())
}

/// `Ω·m` with `Ω = ⊕ [[0, 1], [-1, 0]]`: row 2k takes row 2k+1, row 2k+1 takes -row 2k.
fn apply_omega(m: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(m.nrows(), m.ncols());
    for k in 0..m.nrows() / 2 {
        for c in 0..m.ncols() {
            out[(2 * k, c)] = m[(2 * k + 1, c)];
            out[(2 * k + 1, c)] = -m[(2 * k, c)];
        }
    }
    out
}
