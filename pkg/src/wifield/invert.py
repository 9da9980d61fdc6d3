"""Contrast recovery: complex-data Born inversion and phaseless optimization.

The Born forward map per transmitter is z^p = B^p chi + e^p with
B^p = G_O diag(E_i^p at cells) and e^p the incident field at the
receivers. The phaseless objective compares mean-normalized squared
amplitudes |z|^2 against mean-normalized measured squared amplitudes,
optionally adding a binary-cross-entropy support prior on min-max
normalized |chi| (training-data generation only); the normalization
makes the objective invariant to per-transmitter amplitude scale, AGC
scale, and any measurement phase.

Gradients treat Re(chi) and Im(chi) as independent real parameters; the
min-max normalization inside the BCE term is differentiated with its
min/max treated as constants (stop-gradient scaling).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.linalg
import scipy.optimize

from .forward import NumericError
from .greens import ToneOperators
from .scene import SensingDomain

BCE_CLAMP = 1e-7
MINMAX_EPS = 1e-12


@dataclass(frozen=True)
class InversionConfig:
    alpha: float = 0.0
    max_iters: int = 500
    step_size: float = 1e-2
    optimizer: str = "adam"  # "adam" | "lbfgs"
    tol: float = 0.0  # relative objective-decrease tolerance (0 = run all iters)
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    # support-prior ramp: the min-max normalized BCE gradient is pure noise
    # while chi ~ 0, so its weight fades in over this many adam iterations
    bce_ramp_iters: int = 150

    def __post_init__(self):
        if self.max_iters <= 0:
            raise ValueError("max_iters must be positive")
        if not np.isfinite(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be finite and >= 0")
        if self.optimizer not in ("adam", "lbfgs"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


@dataclass
class PreImage:
    """Per-tone inverted contrast tensor (n_tone, n, n) with provenance."""

    chi: np.ndarray
    domain: SensingDomain
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.chi = np.asarray(self.chi, dtype=np.complex128)
        if self.chi.ndim != 3 or self.chi.shape[1] != self.chi.shape[2]:
            raise ValueError("PreImage chi must be (n_tone, n, n)")
        if not np.isfinite(self.chi).all():
            raise ValueError("PreImage entries must be finite")


def born_invert(e_s_measured: np.ndarray, ops: ToneOperators, alpha: float) -> np.ndarray:
    """Regularized linear least squares for chi from complex scattered data.

    Minimizes sum_p ||G_O diag(E_i^p) chi - E_s^p||^2 + alpha ||chi||^2
    (single tone). alpha = 0 solves the bare least-squares problem and
    reports rank deficiency; alpha > 0 uses the ridge normal equations.
    """
    e_s = np.asarray(e_s_measured, dtype=np.complex128)
    P, Q = e_s.shape
    m = ops.go.shape[1]
    a = (ops.go[None, :, :] * ops.e_i_cells[:, None, :]).reshape(P * Q, m)
    b = e_s.reshape(P * Q)
    if alpha == 0.0:
        chi, _, rank, _ = np.linalg.lstsq(a, b, rcond=None)
        if rank < a.shape[1]:
            raise NumericError(
                f"rank-deficient Born system (rank {rank} < {a.shape[1]} "
                "unknowns); use alpha > 0"
            )
        return chi
    gram = a.conj().T @ a
    gram[np.diag_indices(m)] += alpha
    return scipy.linalg.solve(gram, a.conj().T @ b, assume_a="pos")


def bce_regularizer(chi: np.ndarray, indicator: np.ndarray) -> float:
    """Binary cross entropy between min-max normalized |chi| and the
    binary target-support indicator (probabilities clamped at 1e-7)."""
    t = np.abs(np.asarray(chi, dtype=np.complex128))
    tn = (t - t.min()) / (t.max() - t.min() + MINMAX_EPS)
    p = np.clip(tn, BCE_CLAMP, 1.0 - BCE_CLAMP)
    ind = np.asarray(indicator, dtype=float)
    return float(-np.mean(ind * np.log(p) + (1.0 - ind) * np.log1p(-p)))


class PhaselessProblem:
    """Single-tone phaseless objective/gradient over chi (n^2 complex).

    measured_sq: (P, Q) measured squared amplitudes of the total field.
    labels: optional (n^2,) binary support indicator enabling the BCE
    term weighted by alpha.
    """

    def __init__(self, ops: ToneOperators, measured_sq: np.ndarray,
                 alpha: float = 0.0, labels: np.ndarray | None = None):
        measured_sq = np.asarray(measured_sq, dtype=float)
        self.b = ops.go[None, :, :] * ops.e_i_cells[:, None, :]  # (P, Q, n^2)
        self.e_rx = ops.e_i_rx  # (P, Q)
        m_mean = measured_sq.mean(axis=1, keepdims=True)
        if (m_mean <= 0).any():
            raise ValueError("measured squared amplitudes have zero mean")
        self.m_norm = measured_sq / m_mean
        self.alpha = float(alpha)
        self.labels = None if labels is None else np.asarray(labels, float).ravel()
        self.n_cells = self.b.shape[2]
        self.n_rx = self.b.shape[1]

    def _model_fields(self, chi: np.ndarray) -> np.ndarray:
        return np.einsum("pqn,n->pq", self.b, chi) + self.e_rx

    def objective(self, chi: np.ndarray, bce_scale: float = 1.0) -> float:
        chi = np.asarray(chi, dtype=np.complex128)
        z = self._model_fields(chi)
        a = np.abs(z) ** 2
        a_mean = a.mean(axis=1, keepdims=True)
        if (a_mean == 0).any():
            raise NumericError("model amplitude mean is zero")
        r = a / a_mean - self.m_norm
        f = float(np.sum(r * r))
        if self.alpha > 0 and self.labels is not None and bce_scale > 0:
            f += bce_scale * self.alpha * bce_regularizer(chi, self.labels)
        return f

    def objective_and_gradient(
        self, chi: np.ndarray, bce_scale: float = 1.0
    ) -> tuple[float, np.ndarray]:
        """Returns (f, grad) with grad the real (2 n^2,) vector
        [df/dRe chi, df/dIm chi]."""
        chi = np.asarray(chi, dtype=np.complex128)
        z = self._model_fields(chi)
        a = np.abs(z) ** 2
        a_mean = a.mean(axis=1, keepdims=True)
        if (a_mean == 0).any():
            raise NumericError("model amplitude mean is zero")
        u = a / a_mean
        r = u - self.m_norm
        f = float(np.sum(r * r))
        # dF/dA through u = A / mean(A): (2/m) (r - mean(r * u))
        w = (2.0 / a_mean) * (r - (r * u).mean(axis=1, keepdims=True))
        g = 2.0 * np.einsum("pqn,pq->n", self.b.conj(), w * z)
        if self.alpha > 0 and self.labels is not None and bce_scale > 0:
            f_b, g_b = self._bce_value_grad(chi)
            f += bce_scale * self.alpha * f_b
            g += bce_scale * self.alpha * g_b
        return f, np.concatenate([g.real, g.imag])

    def _bce_value_grad(self, chi: np.ndarray) -> tuple[float, np.ndarray]:
        t = np.abs(chi)
        span = t.max() - t.min() + MINMAX_EPS
        tn = (t - t.min()) / span
        p = np.clip(tn, BCE_CLAMP, 1.0 - BCE_CLAMP)
        ind = self.labels
        f = float(-np.mean(ind * np.log(p) + (1.0 - ind) * np.log1p(-p)))
        ddp = np.where(
            (tn > BCE_CLAMP) & (tn < 1.0 - BCE_CLAMP),
            (-ind / p + (1.0 - ind) / (1.0 - p)) / t.size,
            0.0,
        )
        ddt = ddp / span  # min/max treated as constants
        safe = t > 0
        phase = np.zeros_like(chi)
        phase[safe] = chi[safe] / t[safe]
        return f, ddt * phase


def phaseless_objective(chi, ops: ToneOperators, measured_sq, alpha=0.0, labels=None) -> float:
    return PhaselessProblem(ops, measured_sq, alpha, labels).objective(chi)


def phaseless_gradient(chi, ops: ToneOperators, measured_sq, alpha=0.0, labels=None) -> np.ndarray:
    return PhaselessProblem(ops, measured_sq, alpha, labels).objective_and_gradient(chi)[1]


def _run_adam(problem: PhaselessProblem, config: InversionConfig) -> tuple[np.ndarray, list[float]]:
    n = problem.n_cells
    theta = np.zeros(2 * n)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    history: list[float] = []
    regularized = problem.alpha > 0 and problem.labels is not None
    ramp = max(1, config.bce_ramp_iters) if regularized else 1
    burn_in = ramp + 25
    patience = 100
    f0 = problem.objective(np.zeros(n, dtype=complex))
    threshold = 10.0 * max(f0, 1e-12)
    best = np.inf
    for it in range(1, config.max_iters + 1):
        chi = theta[:n] + 1j * theta[n:]
        scale = min(1.0, it / ramp) if regularized else 1.0
        f, g = problem.objective_and_gradient(chi, bce_scale=scale)
        history.append(f)
        if not np.isfinite(f):
            raise NumericError(f"phaseless optimization produced {f} at iter {it}")
        # The data-fit mode must return within 10x of the starting objective
        # once transients settle; a best that never does is a runaway. The
        # support-prior mode deliberately trades data fit for pattern shape
        # (the normalized objective is bounded), so only non-finite values
        # abort there.
        if not regularized and it > burn_in:
            best = min(best, f)
            if it > burn_in + patience and best > threshold:
                raise NumericError(
                    f"phaseless optimization diverged by iter {it}: best "
                    f"objective {best:.3e} vs initial {f0:.3e}"
                )
        m = config.beta1 * m + (1 - config.beta1) * g
        v = config.beta2 * v + (1 - config.beta2) * g * g
        mhat = m / (1 - config.beta1**it)
        vhat = v / (1 - config.beta2**it)
        theta = theta - config.step_size * mhat / (np.sqrt(vhat) + 1e-8)
        if config.tol > 0 and len(history) > 10:
            recent = history[-10:]
            if abs(recent[0] - recent[-1]) < config.tol * max(f0, 1e-30):
                break
    return theta[:n] + 1j * theta[n:], history


def _run_lbfgs(problem: PhaselessProblem, config: InversionConfig) -> tuple[np.ndarray, list[float]]:
    n = problem.n_cells
    history: list[float] = []

    def fun(theta):
        f, g = problem.objective_and_gradient(theta[:n] + 1j * theta[n:])
        return f, g

    res = scipy.optimize.minimize(
        fun,
        np.zeros(2 * n),
        jac=True,
        method="L-BFGS-B",
        callback=lambda xk: history.append(
            problem.objective(xk[:n] + 1j * xk[n:])
        ),
        options={"maxiter": config.max_iters, "ftol": max(config.tol, 1e-16)},
    )
    theta = res.x
    return theta[:n] + 1j * theta[n:], history


def minimize_phaseless(problem: PhaselessProblem, config: InversionConfig):
    runner = _run_adam if config.optimizer == "adam" else _run_lbfgs
    return runner(problem, config)


NORM_QUANTILE = 0.99
NORM_FLOOR = 1e-3


def pre_identify(
    norm_amps: np.ndarray,
    tone_ops: list[ToneOperators],
    config: InversionConfig,
    labels: np.ndarray | None = None,
    meta: dict | None = None,
    normalize: bool = True,
) -> PreImage:
    """Per-tone phaseless inversion from calibrated amplitudes (T, P, Q).

    Each tone is optimized independently from chi = 0 and the results
    stack into the (T, n, n) pre-image. Deterministic for a fixed config.

    The mean-normalized amplitude fit cannot pin the absolute contrast
    scale (the Born linearization biases it low for wavelength-scale
    targets), so each tone slice is rescaled by its 99th-percentile
    magnitude: pre-images are support/contrast patterns of order one.
    Slices that stay numerically at zero (empty scenes) are left alone.
    """
    amps = np.asarray(norm_amps, dtype=float)
    if amps.ndim != 3 or len(tone_ops) != amps.shape[0]:
        raise ValueError("norm_amps must be (T, P, Q) matching tone_ops")
    domain = tone_ops[0].domain
    n = domain.n
    out = np.empty((amps.shape[0], n, n), dtype=np.complex128)
    for t, ops in enumerate(tone_ops):
        problem = PhaselessProblem(ops, amps[t] ** 2, config.alpha, labels)
        chi, _ = minimize_phaseless(problem, config)
        if normalize:
            scale = np.quantile(np.abs(chi), NORM_QUANTILE)
            if scale > NORM_FLOOR:
                chi = chi / scale
        out[t] = chi.reshape(n, n)
    return PreImage(out, domain, dict(meta or {}))


def with_alpha(config: InversionConfig, alpha: float) -> InversionConfig:
    return replace(config, alpha=alpha)


# --- binary formats --------------------------------------------------------
# PreImage (.wfld): magic "WFLD", u32 version=1, u32 n_tone, u32 n, then
# row-major (tone, row, col) float64 little-endian interleaved re/im.
# LabelGrid (.wlbl): magic "WLBL", u32 n, n^2 unsigned bytes row-major.

_WFLD_MAGIC = b"WFLD"
_WLBL_MAGIC = b"WLBL"


def save_preimage(pre: PreImage, path) -> None:
    t, n, _ = pre.chi.shape
    inter = np.empty((t, n, n, 2), dtype="<f8")
    inter[..., 0] = pre.chi.real
    inter[..., 1] = pre.chi.imag
    with open(path, "wb") as fh:
        fh.write(_WFLD_MAGIC)
        fh.write(struct.pack("<III", 1, t, n))
        fh.write(inter.tobytes())


def load_preimage(path, domain: SensingDomain | None = None) -> PreImage:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _WFLD_MAGIC:
            raise ValueError(f"not a WFLD file: magic {magic!r}")
        version, t, n = struct.unpack("<III", fh.read(12))
        if version != 1:
            raise ValueError(f"unsupported WFLD version {version}")
        raw = np.frombuffer(fh.read(t * n * n * 16), dtype="<f8").reshape(t, n, n, 2)
    chi = raw[..., 0] + 1j * raw[..., 1]
    return PreImage(chi, domain or SensingDomain(n=n))


def save_labels(labels: np.ndarray, path) -> None:
    labels = np.asarray(labels, dtype=np.uint8)
    n = labels.shape[0]
    if labels.shape != (n, n):
        raise ValueError("labels must be square (n, n)")
    with open(path, "wb") as fh:
        fh.write(_WLBL_MAGIC)
        fh.write(struct.pack("<I", n))
        fh.write(labels.tobytes())


def load_labels(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _WLBL_MAGIC:
            raise ValueError(f"not a WLBL file: magic {magic!r}")
        (n,) = struct.unpack("<I", fh.read(4))
        raw = np.frombuffer(fh.read(n * n), dtype=np.uint8)
    return raw.reshape(n, n).copy()
