"""Cramer-Rao bounds: closed forms, exact Fisher information, and the audit.

Two routes coexist on purpose.  The closed-form functions evaluate the
published expressions verbatim; the numerical oracle builds the exact
3K x 3K Fisher information matrix of the deterministic Gaussian model from
analytic derivatives and maps it through the sum-parameter Jacobian.  The
audit reports the ratio between the two routes instead of assuming they
agree (they do not, in general; see the README notes on conventions).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .errors import IllConditionedMatrixError
from .signals import CisoidEnsemble, total_power

CONDITION_LIMIT = 1e12

PARAM_NAMES = ("sigma_sum", "omega_sum", "re_phi_sum", "im_phi_sum")


# ---------------------------------------------------------------------------
# closed forms
# ---------------------------------------------------------------------------

def crb_sigma_closed(sigma2: float, p_sig: float) -> float:
    """Closed-form variance bound for the amplitude sum: sigma2/(2*P_sig)."""
    if sigma2 <= 0 or p_sig <= 0:
        raise ValueError("sigma2 and p_sig must be > 0")
    return sigma2 / (2.0 * p_sig)


def crb_omega_closed(sigma2: float, p_sig: float, ts: float, n: int) -> float:
    """Closed-form bound for the frequency sum, leading term.

    12*sigma2 / (P_sig * ts^2 * N * (N^2-1)); the O(N^-2) factor of the
    published form is taken as exactly 1.
    """
    if sigma2 <= 0 or p_sig <= 0 or ts <= 0:
        raise ValueError("sigma2, p_sig and ts must be > 0")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return 12.0 * sigma2 / (p_sig * ts * ts * n * (n * n - 1))


def crb_phi_closed(sigma2: float, p_sig: float, n: int) -> float:
    """Closed-form bound for the phasor sum, exact form.

    2*sigma2*(2N+1) / (P_sig * N * (N+1)).
    """
    if sigma2 <= 0 or p_sig <= 0:
        raise ValueError("sigma2 and p_sig must be > 0")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 2.0 * sigma2 * (2 * n + 1) / (p_sig * n * (n + 1))


def crb_phi_closed_approx(sigma2: float, p_sig: float, n: int) -> float:
    """Large-N approximation of `crb_phi_closed`: 4*sigma2/(P_sig*N)."""
    if sigma2 <= 0 or p_sig <= 0:
        raise ValueError("sigma2 and p_sig must be > 0")
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return 4.0 * sigma2 / (p_sig * n)


def crb_single_tone(sigma2: float, a_k: float, ts: float, n: int) -> float:
    """Classical single-tone frequency bound 12*sigma2/(a^2*ts^2*N*(N^2-1)).

    Note the classical-literature convention: sigma2 here is the noise
    variance per quadrature.  Under this package's total-variance noise
    model the matching bound is obtained at sigma2_total/2.
    """
    if sigma2 <= 0 or a_k <= 0 or ts <= 0:
        raise ValueError("sigma2, a_k and ts must be > 0")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    return 12.0 * sigma2 / (a_k * a_k * ts * ts * n * (n * n - 1))


# ---------------------------------------------------------------------------
# exact Fisher information and the sum-parameter transform
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FimMatrix:
    """Exact 3K x 3K Fisher information with its parameter layout.

    Row/column i corresponds to param_layout[i] = (component index,
    one of "a" | "omega" | "phase"); components follow canonical order.
    """

    entries: np.ndarray
    param_layout: tuple[tuple[int, str], ...]


@dataclass(frozen=True)
class SumParamJacobian:
    """4 x 3K Jacobian of the sum-parameters w.r.t. the stacked components.

    Rows follow PARAM_NAMES; columns follow the FimMatrix layout.
    """

    entries: np.ndarray


def _signal_derivatives(ensemble: CisoidEnsemble, n: int) -> np.ndarray:
    """N x 3K matrix of d s(m) / d alpha_i, canonical component order."""
    amps, omegas, phases = ensemble.arrays()
    k = amps.size
    t = np.arange(n) * ensemble.ts
    d = np.empty((n, 3 * k), dtype=np.complex128)
    for i in range(k):
        tone = np.exp(1j * (omegas[i] * t + phases[i]))
        d[:, 3 * i] = tone
        d[:, 3 * i + 1] = 1j * t * amps[i] * tone
        d[:, 3 * i + 2] = 1j * amps[i] * tone
    return d


def fim_full(ensemble: CisoidEnsemble, sigma2: float, n: int) -> FimMatrix:
    """Exact Fisher information (2/sigma2)*Re(D^H D) of the Gaussian model.

    No frequency-separation approximation is applied; the result is
    symmetrized and checked for positive semidefiniteness.
    """
    if sigma2 <= 0:
        raise ValueError("sigma2 must be > 0")
    if n < 2:
        raise ValueError(f"n must be >= 2, got {n}")
    d = _signal_derivatives(ensemble, n)
    j = (2.0 / sigma2) * np.real(d.conj().T @ d)
    j = 0.5 * (j + j.T)
    eig = np.linalg.eigvalsh(j)
    if eig[0] < -1e-9 * max(eig[-1], 1.0):
        raise IllConditionedMatrixError(
            f"FIM not PSD (min eigenvalue {eig[0]:.3e})")
    layout = tuple((i, name) for i in range(ensemble.k)
                   for name in ("a", "omega", "phase"))
    return FimMatrix(j, layout)


def jacobian_sum_params(ensemble: CisoidEnsemble) -> SumParamJacobian:
    """Analytic Jacobian of (Sigma, Omega, Re Phi, Im Phi) w.r.t alpha."""
    amps, omegas, phases = ensemble.arrays()
    k = amps.size
    jac = np.zeros((4, 3 * k))
    for i in range(k):
        a, w, p = amps[i], omegas[i], phases[i]
        ca, sa = math.cos(p), math.sin(p)
        jac[0, 3 * i] = 1.0
        jac[1, 3 * i] = 2.0 * a * w
        jac[1, 3 * i + 1] = a * a
        jac[2, 3 * i] = 2.0 * a * ca
        jac[2, 3 * i + 2] = -a * a * sa
        jac[3, 3 * i] = 2.0 * a * sa
        jac[3, 3 * i + 2] = a * a * ca
    return SumParamJacobian(jac)


def _scaled_solve(fim: np.ndarray, rhs: np.ndarray) -> tuple[np.ndarray, float]:
    """Solve fim @ y = rhs via Cholesky after diagonal equilibration.

    The condition guard is applied to the unit-diagonal scaled matrix so
    that it measures coupling degeneracy rather than the (huge, benign)
    scale spread between amplitude, frequency and phase rows.  Returns
    (solution, scaled condition number); raises for condition >= 1e12.
    """
    diag = np.diag(fim)
    if np.any(diag <= 0):
        raise IllConditionedMatrixError("FIM has a nonpositive diagonal entry")
    d = 1.0 / np.sqrt(diag)
    scaled = fim * np.outer(d, d)
    eig = np.linalg.eigvalsh(scaled)
    if eig[0] <= 0 or eig[-1] / eig[0] >= CONDITION_LIMIT:
        cond = math.inf if eig[0] <= 0 else eig[-1] / eig[0]
        raise IllConditionedMatrixError(
            f"FIM condition number {cond:.3e} exceeds {CONDITION_LIMIT:.0e} "
            "(near-coincident frequencies?)")
    factor = cho_factor(scaled)
    y = d[:, None] * cho_solve(factor, d[:, None] * rhs)
    return y, float(eig[-1] / eig[0])


def crb_numerical(ensemble: CisoidEnsemble, sigma2: float, n: int) -> np.ndarray:
    """Oracle 4x4 covariance bound for the sum-parameter vector.

    Computes J_theta * FIM(alpha)^-1 * J_theta^T through an equilibrated
    Cholesky solve; refuses ill-conditioned FIMs (scaled condition number
    >= 1e12) instead of silently regularizing.
    """
    fim = fim_full(ensemble, sigma2, n)
    jac = jacobian_sum_params(ensemble).entries
    sol, _ = _scaled_solve(fim.entries, jac.T)
    cov = jac @ sol
    return 0.5 * (cov + cov.T)


def single_tone_omega_bound(a: float, ts: float, sigma2: float, n: int) -> float:
    """Numerically transformed omega bound for one tone (a, phi nuisance).

    Inverts the exact K=1 FIM and reads the omega diagonal; used to check
    the machinery against the classical closed form.  The K=1 FIM does not
    depend on the tone's omega or phase, so a zero-frequency tone is used.
    """
    from .signals import Cisoid
    ens = CisoidEnsemble((Cisoid(amplitude=a, omega=0.0, phase=0.0),), ts)
    fim = fim_full(ens, sigma2, n)
    unit = np.zeros((3, 1))
    unit[1, 0] = 1.0
    sol, _ = _scaled_solve(fim.entries, unit)
    return float(sol[1, 0])


# ---------------------------------------------------------------------------
# audit
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ClosedFormCrb:
    crb_sigma: float
    crb_omega: float
    crb_phi: float


@dataclass(frozen=True)
class CrbReport:
    """Closed-form vs numerical-oracle comparison for one scenario.

    ratios holds closed/numerical per parameter (phi compared against the
    trace of the 2x2 phasor sub-block); flagged marks ratios outside
    [0.95, 1.05].  separation_metric is min over pairs of |w_i-w_j|*ts*N
    (None for K=1).
    """

    closed_form: ClosedFormCrb
    numerical: np.ndarray
    ratios: dict[str, float]
    flagged: dict[str, bool]
    separation_metric: float | None
    rank: int
    condition_number: float

    def to_json(self) -> str:
        doc = {
            "closed_form": {
                "crb_sigma": self.closed_form.crb_sigma,
                "crb_omega": self.closed_form.crb_omega,
                "crb_phi": self.closed_form.crb_phi,
            },
            "numerical": [float(v) for v in self.numerical.ravel()],
            "ratios": self.ratios,
            "flagged": self.flagged,
            "separation_metric": self.separation_metric,
            "rank": self.rank,
            "condition_number": self.condition_number,
        }
        return json.dumps(doc, indent=2)


def separation_metric(ensemble: CisoidEnsemble, n: int) -> float | None:
    """min_{i<j} |w_i - w_j| * ts * N, or None for a single component."""
    omegas = [c.omega for c in ensemble.components]
    if len(omegas) < 2:
        return None
    gaps = [abs(a - b) for i, a in enumerate(omegas) for b in omegas[i + 1:]]
    return min(gaps) * ensemble.ts * n


def crb_audit(ensemble: CisoidEnsemble, sigma2: float, n: int) -> CrbReport:
    """Run both bound routes and report their per-parameter ratios."""
    p_sig = total_power(ensemble)
    closed = ClosedFormCrb(
        crb_sigma=crb_sigma_closed(sigma2, p_sig),
        crb_omega=crb_omega_closed(sigma2, p_sig, ensemble.ts, n),
        crb_phi=crb_phi_closed(sigma2, p_sig, n),
    )
    fim = fim_full(ensemble, sigma2, n)
    jac = jacobian_sum_params(ensemble).entries
    sol, cond = _scaled_solve(fim.entries, jac.T)
    cov = jac @ sol
    cov = 0.5 * (cov + cov.T)
    phi_trace = float(cov[2, 2] + cov[3, 3])
    ratios = {
        "sigma_sum": closed.crb_sigma / float(cov[0, 0]),
        "omega_sum": closed.crb_omega / float(cov[1, 1]),
        "phi_sum": closed.crb_phi / phi_trace,
    }
    flagged = {k: not (0.95 <= v <= 1.05) for k, v in ratios.items()}
    return CrbReport(
        closed_form=closed,
        numerical=cov,
        ratios=ratios,
        flagged=flagged,
        separation_metric=separation_metric(ensemble, n),
        rank=int(np.linalg.matrix_rank(cov)),
        condition_number=cond,
    )
