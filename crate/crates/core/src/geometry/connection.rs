//! Levi-Civita and J-projected connections, and their curvature, at a point.
//!
//! Index conventions: `∇_{∂_i} ∂_j = Γ^k_{ij} ∂_k`, stored as `gamma[(k*n+i)*n+j]`.
//! The connection matrix in direction `i` is `(Γ_i)^k_l = Γ^k_{il}`, and the
//! curvature endomorphism is `R(∂_i,∂_j) = ∂_iΓ_j - ∂_jΓ_i + [Γ_i, Γ_j]`.
//!
//! A real endomorphism commuting with `J` has block form `[[A, -B], [B, A]]`
//! and acts on `(TM, J)` as the complex matrix `A + iB` in the frame
//! `e_a = ∂_{x^a}`, which corresponds to `∂_{z^a}` under `v ↦ ½(v - iJv)`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::metric::{TensorJet, DEGENERACY_THRESHOLD};
use super::structure::ComplexStructure;
use crate::error::{Error, Result};
use crate::forms::{small_det, GradedForm};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const I: Complex64 = Complex64::new(0.0, 1.0);

/// An `m̄×m̄` matrix of complex 2-forms: the curvature of a J-commuting
/// connection viewed as an endomorphism of the complex tangent bundle.
#[derive(Clone, Debug, PartialEq)]
pub struct CurvatureEndomorphism {
    pub mbar: usize,
    pub n: usize,
    /// Row-major, entry `(a, b)` at `a*mbar + b`.
    pub entries: Vec<GradedForm>,
}

impl CurvatureEndomorphism {
    pub fn zero(mbar: usize) -> Self {
        let n = 2 * mbar;
        Self {
            mbar,
            n,
            entries: vec![GradedForm::zero(n, 2); mbar * mbar],
        }
    }

    pub fn entry(&self, a: usize, b: usize) -> &GradedForm {
        &self.entries[a * self.mbar + b]
    }

    pub fn max_norm(&self) -> f64 {
        self.entries
            .iter()
            .map(|f| f.max_norm())
            .fold(0.0, f64::max)
    }

    /// `g R g⁻¹` for a constant complex frame change `g` (row-major `m̄×m̄`).
    pub fn conjugate_by(&self, g: &[Complex64]) -> Result<Self> {
        let m = self.mbar;
        let gm = DMatrix::from_row_slice(m, m, g);
        let ginv = gm.try_inverse().ok_or(Error::SingularSystem)?;
        let mut out = Self::zero(m);
        for a in 0..m {
            for b in 0..m {
                let e = &mut out.entries[a * m + b];
                for c in 0..m {
                    for d in 0..m {
                        let s = g[a * m + c] * ginv[(d, b)];
                        e.add_scaled(&self.entries[c * m + d], s)?;
                    }
                }
            }
        }
        Ok(out)
    }

    /// Off-diagonal block magnitude for a split `{0..split} ∪ {split..m̄}`.
    pub fn off_block_norm(&self, split: usize) -> f64 {
        let m = self.mbar;
        let mut worst: f64 = 0.0;
        for a in 0..m {
            for b in 0..m {
                if (a < split) != (b < split) {
                    worst = worst.max(self.entry(a, b).max_norm());
                }
            }
        }
        worst
    }
}

/// Connection data of a metric at one point.
#[derive(Clone, Debug)]
pub struct PointGeometry {
    pub n: usize,
    pub mbar: usize,
    pub h: Vec<Complex64>,
    pub dh: Vec<Complex64>,
    pub hinv: Vec<Complex64>,
    pub det: Complex64,
    /// `Γ^k_{ij}` at `(k*n+i)*n+j`.
    pub gamma: Vec<Complex64>,
    /// `∂_m Γ^k_{ij}` at `((m*n+k)*n+i)*n+j`.
    pub dgamma: Vec<Complex64>,
}

/// Inverse of a small complex matrix (row-major).
pub fn invert(h: &[Complex64], n: usize) -> Option<Vec<Complex64>> {
    let m = DMatrix::from_row_slice(n, n, h);
    let inv = m.try_inverse()?;
    let mut out = vec![ZERO; n * n];
    for i in 0..n {
        for j in 0..n {
            out[i * n + j] = inv[(i, j)];
        }
    }
    Some(out)
}

impl PointGeometry {
    pub fn new(jet: &TensorJet, point: &[f64]) -> Result<Self> {
        let n = jet.n;
        let det = small_det(&mut jet.h.clone(), n);
        if !(det.norm() >= DEGENERACY_THRESHOLD) {
            return Err(Error::Degenerate {
                det: det.norm(),
                point: point.to_vec(),
            });
        }
        let hinv = invert(&jet.h, n).ok_or(Error::Degenerate {
            det: det.norm(),
            point: point.to_vec(),
        })?;
        let dh = |k: usize, i: usize, j: usize| jet.dh[(k * n + i) * n + j];
        let d2h = |k: usize, l: usize, i: usize, j: usize| jet.d2h[((k * n + l) * n + i) * n + j];

        // first kind: Γ_{l,ij}
        let mut first = vec![ZERO; n * n * n];
        for l in 0..n {
            for i in 0..n {
                for j in i..n {
                    let v = 0.5 * (dh(i, j, l) + dh(j, i, l) - dh(l, i, j));
                    first[(l * n + i) * n + j] = v;
                    first[(l * n + j) * n + i] = v;
                }
            }
        }
        let mut gamma = vec![ZERO; n * n * n];
        for k in 0..n {
            for i in 0..n {
                for j in i..n {
                    let mut acc = ZERO;
                    for l in 0..n {
                        acc += hinv[k * n + l] * first[(l * n + i) * n + j];
                    }
                    gamma[(k * n + i) * n + j] = acc;
                    gamma[(k * n + j) * n + i] = acc;
                }
            }
        }
        // ∂_m Γ^k_ij = h^{kl} (∂_m Γ_{l,ij} - ∂_m h_{lp} Γ^p_ij)
        let mut dgamma = vec![ZERO; n * n * n * n];
        let mut t = vec![ZERO; n];
        for m in 0..n {
            for i in 0..n {
                for j in i..n {
                    for (l, tl) in t.iter_mut().enumerate() {
                        let dfirst = 0.5 * (d2h(m, i, j, l) + d2h(m, j, i, l) - d2h(m, l, i, j));
                        let mut corr = ZERO;
                        for p in 0..n {
                            corr += dh(m, l, p) * gamma[(p * n + i) * n + j];
                        }
                        *tl = dfirst - corr;
                    }
                    for k in 0..n {
                        let mut acc = ZERO;
                        for l in 0..n {
                            acc += hinv[k * n + l] * t[l];
                        }
                        dgamma[((m * n + k) * n + i) * n + j] = acc;
                        dgamma[((m * n + k) * n + j) * n + i] = acc;
                    }
                }
            }
        }
        Ok(Self {
            n,
            mbar: n / 2,
            h: jet.h.clone(),
            dh: jet.dh.clone(),
            hinv,
            det,
            gamma,
            dgamma,
        })
    }

    #[inline]
    pub fn gamma(&self, k: usize, i: usize, j: usize) -> Complex64 {
        self.gamma[(k * self.n + i) * self.n + j]
    }

    #[inline]
    pub fn dgamma(&self, m: usize, k: usize, i: usize, j: usize) -> Complex64 {
        self.dgamma[((m * self.n + k) * self.n + i) * self.n + j]
    }

    /// Projected connection `Γ̃_i = ½(Γ_i - J Γ_i J)`, same layout as `gamma`.
    pub fn projected(&self) -> Vec<Complex64> {
        let n = self.n;
        let j = ComplexStructure::new(self.mbar);
        let mut out = vec![ZERO; n * n * n];
        for i in 0..n {
            for k in 0..n {
                let (tk, sk) = j.apply_basis(k);
                for l in 0..n {
                    let (tl, sl) = j.apply_basis(l);
                    // (J Γ_i J)^{k'}_{l} with J e_l = s_l e_{t_l}, J e_{t} maps back:
                    // (JΓJ)^a_b = J^a_c Γ^c_d J^d_b; J^d_b nonzero at d = t_b,
                    // J^a_c nonzero at a = t_c. So (JΓJ)^{t_k}_{l} = s_k s_l Γ^k_{i t_l}.
                    let jgj = sk * sl * self.gamma(k, i, tl);
                    let idx = (tk * n + i) * n + l;
                    out[idx] += 0.5 * (self.gamma(tk, i, l) - jgj);
                }
            }
        }
        out
    }

    /// Complex-linear parts `C_i = ½(P+T) + ½ i(S-Q)` of the connection
    /// matrices and their derivatives. Layout `conn[(i*m+a)*m+b]`,
    /// `dconn[((r*n+i)*m+a)*m+b] = ∂_r C_i`.
    pub fn complex_connection(&self) -> (Vec<Complex64>, Vec<Complex64>) {
        let n = self.n;
        let m = self.mbar;
        let mut conn = vec![ZERO; n * m * m];
        let mut dconn = vec![ZERO; n * n * m * m];
        for i in 0..n {
            for a in 0..m {
                for b in 0..m {
                    let p = self.gamma(a, i, b);
                    let t = self.gamma(a + m, i, b + m);
                    let s = self.gamma(a + m, i, b);
                    let q = self.gamma(a, i, b + m);
                    conn[(i * m + a) * m + b] = 0.5 * (p + t) + 0.5 * I * (s - q);
                    for r in 0..n {
                        let p = self.dgamma(r, a, i, b);
                        let t = self.dgamma(r, a + m, i, b + m);
                        let s = self.dgamma(r, a + m, i, b);
                        let q = self.dgamma(r, a, i, b + m);
                        dconn[((r * n + i) * m + a) * m + b] = 0.5 * (p + t) + 0.5 * I * (s - q);
                    }
                }
            }
        }
        (conn, dconn)
    }

    /// Curvature of the projected connection as an `m̄×m̄` matrix of 2-forms.
    pub fn complex_curvature(&self) -> CurvatureEndomorphism {
        let n = self.n;
        let m = self.mbar;
        let (conn, dconn) = self.complex_connection();
        let c = |i: usize, a: usize, b: usize| conn[(i * m + a) * m + b];
        let dc = |r: usize, i: usize, a: usize, b: usize| dconn[((r * n + i) * m + a) * m + b];
        let mut out = CurvatureEndomorphism::zero(m);
        let ext = crate::forms::Exterior::get(n);
        for i in 0..n {
            for j in i + 1..n {
                let idx = ext.index_of((1u16 << i) | (1u16 << j));
                for a in 0..m {
                    for b in 0..m {
                        let mut v = dc(i, j, a, b) - dc(j, i, a, b);
                        for e in 0..m {
                            v += c(i, a, e) * c(j, e, b) - c(j, a, e) * c(i, e, b);
                        }
                        out.entries[a * m + b].coeffs_mut()[idx] = v;
                    }
                }
            }
        }
        out
    }

    /// Levi-Civita curvature `R^k_{l ij}` at `((k*n+l)*n+i)*n+j`.
    pub fn riemann(&self) -> Vec<Complex64> {
        let n = self.n;
        let mut r = vec![ZERO; n * n * n * n];
        for k in 0..n {
            for l in 0..n {
                for i in 0..n {
                    for j in i + 1..n {
                        let mut v = self.dgamma(i, k, j, l) - self.dgamma(j, k, i, l);
                        for p in 0..n {
                            v += self.gamma(k, i, p) * self.gamma(p, j, l)
                                - self.gamma(k, j, p) * self.gamma(p, i, l);
                        }
                        r[((k * n + l) * n + i) * n + j] = v;
                        r[((k * n + l) * n + j) * n + i] = -v;
                    }
                }
            }
        }
        r
    }

    /// `R_{ijkl} = h(R(∂_i,∂_j)∂_k, ∂_l)` at `((i*n+j)*n+k)*n+l`.
    pub fn riemann_lowered(&self) -> Vec<Complex64> {
        let n = self.n;
        let up = self.riemann();
        let mut out = vec![ZERO; n * n * n * n];
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut v = ZERO;
                        for p in 0..n {
                            v += self.h[l * n + p] * up[((p * n + k) * n + i) * n + j];
                        }
                        out[((i * n + j) * n + k) * n + l] = v;
                    }
                }
            }
        }
        out
    }
}

/// `Γ^k_{ij}` of the Levi-Civita connection at a point.
pub fn christoffel(jet: &TensorJet, point: &[f64]) -> Result<Vec<Complex64>> {
    Ok(PointGeometry::new(jet, point)?.gamma)
}

/// `Γ̃^k_{ij}` of `½(∇ - J∇J)` at a point.
pub fn projected_connection(jet: &TensorJet, point: &[f64]) -> Result<Vec<Complex64>> {
    Ok(PointGeometry::new(jet, point)?.projected())
}

/// Complex curvature endomorphism `R_c` of the projected connection.
pub fn complex_curvature(jet: &TensorJet, point: &[f64]) -> Result<CurvatureEndomorphism> {
    Ok(PointGeometry::new(jet, point)?.complex_curvature())
}
