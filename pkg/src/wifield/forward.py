"""Total-field solves, receiver fields, and the dielectric-cylinder oracle.

The discretized domain equation (I - G_S diag(chi)) E_t = E_i is solved
either densely (LU, reused across transmitters) or matrix-free via the
translation-invariant kernel: G_S (chi o v) is a 2D convolution with the
kernel block, so the matvec costs two padded FFTs and BiCGSTAB handles
grids too large to materialize (the default above n = 64).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft
import scipy.linalg
import scipy.sparse.linalg

from . import greens
from .greens import AntennaModel, ArrayLayout, OperatorSet, ToneOperators
from .scene import Scene, rasterize

DENSE_MAX_N = 64
RESIDUAL_RTOL = 1e-10


class NumericError(RuntimeError):
    """Numerical failure (singular/ill-conditioned system, no convergence)."""


def _fft_convolver(block: np.ndarray, ny: int, nx: int):
    """Returns f(v_grid) computing the kernel-block convolution on the grid."""
    pr = scipy.fft.next_fast_len(2 * ny - 1)
    pc = scipy.fft.next_fast_len(2 * nx - 1)
    bhat = scipy.fft.fft2(block, s=(pr, pc))

    def conv(v):
        vhat = scipy.fft.fft2(v, s=(pr, pc))
        full = scipy.fft.ifft2(bhat * vhat)
        return full[ny - 1 : ny - 1 + ny, nx - 1 : nx - 1 + nx]

    return conv


def solve_grid_fft(
    block: np.ndarray,
    chi_grid: np.ndarray,
    rhs_grids: np.ndarray,
    rtol: float = 1e-12,
    maxiter: int = 20000,
    method: str = "bicgstab",
) -> np.ndarray:
    """Matrix-free solve of (I - G diag(chi)) e = rhs on an (ny, nx) grid.

    ``rhs_grids`` may be (ny, nx) or (P, ny, nx); returns matching shape.
    BiCGSTAB is the default (fast at the weak-to-moderate contrasts of
    the sensing pipeline); ``method="gmres"`` switches to long-recurrence
    GMRES, which high-contrast scatterers need to avoid stagnation.
    """
    single = rhs_grids.ndim == 2
    rhs = rhs_grids[None] if single else rhs_grids
    ny, nx = chi_grid.shape
    conv = _fft_convolver(block, ny, nx)
    m = ny * nx

    def matvec(v):
        vg = v.reshape(ny, nx)
        return (vg - conv(chi_grid * vg)).ravel()

    op = scipy.sparse.linalg.LinearOperator((m, m), matvec=matvec, dtype=np.complex128)
    out = np.empty_like(rhs)
    for p in range(rhs.shape[0]):
        b = rhs[p].ravel()
        if method == "gmres":
            x, info = scipy.sparse.linalg.gmres(
                op, b, x0=b.copy(), rtol=rtol, atol=0.0,
                restart=min(m, 1500), maxiter=4,
            )
        else:
            x, info = scipy.sparse.linalg.bicgstab(
                op, b, x0=b.copy(), rtol=rtol, atol=0.0, maxiter=maxiter
            )
        if info != 0:
            raise NumericError(
                f"{method} did not converge (info={info}) on grid {ny}x{nx}"
            )
        out[p] = x.reshape(ny, nx)
    return out[0] if single else out


def _solve_dense(gs: np.ndarray, chi: np.ndarray, rhs: np.ndarray) -> np.ndarray:
    """LU solve of (I - G_S diag(chi)) for one or many right-hand sides."""
    m = gs.shape[0]
    a = -gs * chi[None, :]
    a[np.diag_indices(m)] += 1.0
    try:
        lu, piv = scipy.linalg.lu_factor(a, check_finite=False)
        x = scipy.linalg.lu_solve((lu, piv), rhs.T, check_finite=False).T
    except scipy.linalg.LinAlgError as exc:
        raise NumericError(f"singular total-field system: {exc}") from exc
    resid = np.linalg.norm(x @ a.T - rhs, axis=-1)
    scale = np.linalg.norm(rhs, axis=-1)
    if np.any(resid > RESIDUAL_RTOL * scale):
        cond = np.linalg.cond(a) if m <= 4096 else np.inf
        raise NumericError(
            f"total-field solve residual {resid.max():.3e} exceeds "
            f"{RESIDUAL_RTOL:.0e} * ||E_i|| (cond estimate {cond:.3e}); "
            "chi is likely nonphysical"
        )
    return x


def solve_total_fields(
    chi: np.ndarray, ops: ToneOperators, method: str = "auto"
) -> np.ndarray:
    """Total field at all cells for every transmitter, shape (P, n^2).

    Satisfies ||E_t - E_i - G_S (chi o E_t)|| < 1e-10 ||E_i|| per
    transmitter; the factorization (dense path) is shared across
    transmitters. ``method``: auto | dense | fft.
    """
    chi = np.asarray(chi, dtype=np.complex128)
    n = ops.domain.n
    if method == "auto":
        method = "dense" if n <= DENSE_MAX_N and ops.gs is not None else "fft"
    if method == "dense":
        return _solve_dense(ops.require_gs(), chi, ops.e_i_cells)
    block = ops.block if ops.block is not None else greens.kernel_block(ops.domain, ops.k0)
    sol = solve_grid_fft(
        block,
        chi.reshape(n, n),
        ops.e_i_cells.reshape(-1, n, n),
    )
    return sol.reshape(ops.e_i_cells.shape)


def solve_total_field(
    chi: np.ndarray, ops: ToneOperators, tx_index: int, method: str = "auto"
) -> np.ndarray:
    """Total field at cells for one transmitter (n^2,)."""
    chi = np.asarray(chi, dtype=np.complex128)
    n = ops.domain.n
    if method == "auto":
        method = "dense" if n <= DENSE_MAX_N and ops.gs is not None else "fft"
    if method == "dense":
        return _solve_dense(ops.require_gs(), chi, ops.e_i_cells[tx_index : tx_index + 1])[0]
    block = ops.block if ops.block is not None else greens.kernel_block(ops.domain, ops.k0)
    return solve_grid_fft(block, chi.reshape(n, n), ops.e_i_cells[tx_index].reshape(n, n)).ravel()


def scattered_at_rx(chi: np.ndarray, e_t: np.ndarray, ops: ToneOperators) -> np.ndarray:
    """E_s at the receivers from the equivalent current chi o E_t.

    ``e_t`` may be (n^2,) or (P, n^2); output matches ((Q,) or (P, Q)).
    """
    j = np.asarray(chi, dtype=np.complex128) * e_t
    return j @ ops.go.T


@dataclass
class FieldSet:
    """Forward-sweep results over (tone, tx, rx); cells optional."""

    tones_hz: np.ndarray  # (T,)
    e_i_rx: np.ndarray  # (T, P, Q)
    e_s_rx: np.ndarray  # (T, P, Q)
    chi: np.ndarray  # (n^2,) contrast that produced the fields
    e_t_cells: np.ndarray | None = None  # (T, P, n^2)

    @property
    def e_total_rx(self) -> np.ndarray:
        return self.e_i_rx + self.e_s_rx

    def j_cells(self) -> np.ndarray:
        if self.e_t_cells is None:
            raise ValueError("FieldSet was built without cell fields")
        return self.chi[None, None, :] * self.e_t_cells


def mimo_sweep(
    scene: Scene,
    layout: ArrayLayout,
    model: AntennaModel | None = None,
    method: str = "auto",
    include_cells: bool = False,
) -> FieldSet:
    """Full forward sweep over every (tone, transmitter); deterministic."""
    model = model or AntennaModel()
    chi, _ = rasterize(scene)
    opset = OperatorSet(scene.domain, layout, model)
    n = scene.domain.n
    use_dense = (method == "dense") or (method == "auto" and n <= DENSE_MAX_N)
    T, P, Q = layout.n_tones, layout.n_tx, layout.n_rx
    e_i = np.empty((T, P, Q), dtype=np.complex128)
    e_s = np.empty((T, P, Q), dtype=np.complex128)
    cells = np.empty((T, P, n * n), dtype=np.complex128) if include_cells else None
    for t in range(T):
        ops = opset.tone(t, with_gs=use_dense, with_block=not use_dense)
        e_t = solve_total_fields(chi.chi, ops, method="dense" if use_dense else "fft")
        e_i[t] = ops.e_i_rx
        e_s[t] = scattered_at_rx(chi.chi, e_t, ops)
        if include_cells:
            cells[t] = e_t
    return FieldSet(
        tones_hz=np.asarray(layout.tones_hz, dtype=float),
        e_i_rx=e_i,
        e_s_rx=e_s,
        chi=chi.chi,
        e_t_cells=cells,
    )


def fieldset_to_dict(fs: FieldSet, full: bool = False) -> dict:
    """JSON form: nested arrays indexed [tone][tx][rx] of [re, im]."""

    def cpack(a):
        return np.stack([a.real, a.imag], axis=-1).tolist()

    out = {
        "tones_hz": fs.tones_hz.tolist(),
        "e_total": cpack(fs.e_total_rx),
        "e_incident": cpack(fs.e_i_rx),
        "e_scattered": cpack(fs.e_s_rx),
    }
    if full and fs.e_t_cells is not None:
        out["e_cells"] = cpack(fs.e_t_cells)
    return out


# --- analytic oracle -------------------------------------------------------


def cylinder_oracle(
    radius: float,
    eps_r: float,
    k0: float,
    source,
    rx_points,
    center=(0.0, 0.0),
    rtol: float = 1e-12,
    max_terms: int = 200,
) -> np.ndarray:
    """Scattered field of a homogeneous dielectric cylinder, line-source
    incidence (TM), by the classical cylindrical-harmonic series.

    Independent of the MoM path: uses only order-0/1 Bessel evaluations
    extended by recurrence. Series truncates when the latest term's
    relative contribution stays below ``rtol``; exceeding ``max_terms``
    raises NumericError. Lossless cylinders only (real eps_r).
    """
    eps_c = complex(eps_r)
    if eps_c.imag != 0:
        raise ValueError("cylinder oracle supports real (lossless) eps_r only")
    eps_r = float(eps_c.real)
    if eps_r <= 0 or radius <= 0 or k0 <= 0:
        raise ValueError("radius, eps_r, k0 must be positive")

    src = np.asarray(source, dtype=float) - np.asarray(center, dtype=float)
    rx = np.atleast_2d(np.asarray(rx_points, dtype=float)) - np.asarray(center, float)
    rho_s, phi_s = np.hypot(*src), np.arctan2(src[1], src[0])
    rho_r = np.hypot(rx[:, 0], rx[:, 1])
    phi_r = np.arctan2(rx[:, 1], rx[:, 0])
    if rho_s <= radius or (rho_r <= radius).any():
        raise ValueError("source and receivers must lie outside the cylinder")

    if eps_r == 1.0:
        return np.zeros(len(rx), dtype=np.complex128)

    from . import specfun

    k1 = k0 * np.sqrt(eps_r)
    nmax = max_terms

    def h2(j, y):
        return j - 1j * y

    j_k0a = specfun.jn_all(nmax + 1, k0 * radius)
    y_k0a = specfun.yn_all(nmax + 1, k0 * radius)
    j_k1a = specfun.jn_all(nmax + 1, k1 * radius)
    j_s = specfun.jn_all(nmax + 1, k0 * rho_s)
    y_s = specfun.yn_all(nmax + 1, k0 * rho_s)
    j_r = np.stack([specfun.jn_all(nmax + 1, k0 * r) for r in rho_r])
    y_r = np.stack([specfun.yn_all(nmax + 1, k0 * r) for r in rho_r])

    def deriv(vals, n, x):
        # f'_n = f_{n-1} - (n/x) f_n; f'_0 = -f_1
        if n == 0:
            return -vals[1]
        return vals[n - 1] - (n / x) * vals[n]

    acc = np.zeros(len(rx), dtype=np.complex128)
    quiet = 0
    dphi = phi_r - phi_s
    for n in range(nmax + 1):
        h_k0a = h2(j_k0a[n], y_k0a[n])
        dh_k0a = h2(deriv(j_k0a, n, k0 * radius), deriv(y_k0a, n, k0 * radius))
        dj_k0a = deriv(j_k0a, n, k0 * radius)
        dj_k1a = deriv(j_k1a, n, k1 * radius)
        num = k1 * dj_k1a * j_k0a[n] - k0 * dj_k0a * j_k1a[n]
        den = k0 * dh_k0a * j_k1a[n] - k1 * dj_k1a * h_k0a
        b_n = num / den if den != 0 else 0.0
        term = (
            (1.0 if n == 0 else 2.0)
            * b_n
            * h2(j_s[n], y_s[n])
            * h2(j_r[:, n], y_r[:, n])
            * np.cos(n * dphi)
        )
        acc += term
        ref = np.abs(acc).max()
        if ref > 0 and np.abs(term).max() < rtol * ref:
            quiet += 1
            if quiet >= 3:
                return -0.25j * acc
        else:
            quiet = 0
    raise NumericError(f"cylinder series did not converge within {max_terms} terms")
