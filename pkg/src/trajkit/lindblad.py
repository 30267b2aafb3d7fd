"""Direct Lindblad master-equation integration; oracle for trajectory averages.

Fixed-step classical 4th-order Runge-Kutta with trace, Hermiticity and
positivity monitors at every output time.  For small composite dimensions
the right-hand side is applied through a precomputed superoperator
matrix; above that it is evaluated matrix-free.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import IntegratorError
from .jump import ModelSpec
from .observables import evaluate_channels_rho

__all__ = [
    "DensityMatrix",
    "LindbladResult",
    "lindblad_rhs",
    "liouvillian_matrix",
    "evolve_density_matrix",
    "steady_state",
]

SUPEROP_DIM_LIMIT = 4096  # build the dense superoperator only up to D^2 = 4096

TRACE_TOL = 1e-8
POSITIVITY_TOL = 1e-8


@dataclass
class DensityMatrix:
    """Trace-one Hermitian positive matrix over the composite basis."""

    matrix: np.ndarray

    def __post_init__(self):
        self.matrix = np.asarray(self.matrix, dtype=complex)

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def validate(self, trace_tol=1e-10, herm_tol=1e-10, pos_tol=1e-8):
        m = self.matrix
        if abs(np.trace(m) - 1.0) > trace_tol:
            raise ValueError(f"trace {np.trace(m):.12g} differs from 1")
        if np.abs(m - m.conj().T).max() > herm_tol:
            raise ValueError("density matrix is not Hermitian")
        w = np.linalg.eigvalsh(0.5 * (m + m.conj().T))
        if w.min() < -pos_tol:
            raise ValueError(f"negative eigenvalue {w.min():.3g}")
        return self

    @classmethod
    def from_pure(cls, psi) -> "DensityMatrix":
        amps = np.asarray(getattr(psi, "amplitudes", psi), dtype=complex).reshape(-1)
        amps = amps / np.linalg.norm(amps)
        return cls(np.outer(amps, amps.conj()))


@dataclass
class LindbladResult:
    times: np.ndarray
    observables: dict
    final: np.ndarray
    states: list | None = None
    meta: dict = field(default_factory=dict)


def lindblad_rhs(rho, model: ModelSpec) -> np.ndarray:
    """-i[H, rho] + sum_i kappa_i (L rho L† - {L†L, rho}/2)."""
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    if mat.shape != model.h.shape:
        raise ValueError(
            f"density matrix shape {mat.shape} does not match model {model.h.shape}"
        )
    out = -1j * (model.h @ mat - mat @ model.h)
    for j in model.jumps:
        l_rho = j.op @ mat
        m = j.op.conj().T @ j.op
        out += j.rate * (l_rho @ j.op.conj().T - 0.5 * (m @ mat + mat @ m))
    return out


def liouvillian_matrix(model: ModelSpec) -> np.ndarray:
    """Dense superoperator acting on column-stacked density matrices.

    Restricted to D^2 <= 4096 by memory; larger systems use the
    matrix-free right-hand side.
    """
    d = model.dim
    if d * d > SUPEROP_DIM_LIMIT:
        raise ValueError(
            f"superoperator dimension {d * d} exceeds limit {SUPEROP_DIM_LIMIT}"
        )
    eye = np.eye(d)
    # row-major vec (numpy reshape): vec(A X B) = (A kron B^T) vec(X)
    sup = -1j * (np.kron(model.h, eye) - np.kron(eye, model.h.T))
    for j in model.jumps:
        m = j.op.conj().T @ j.op
        sup += j.rate * (
            np.kron(j.op, j.op.conj())
            - 0.5 * (np.kron(m, eye) + np.kron(eye, m.T))
        )
    return sup


def evolve_density_matrix(rho0, model: ModelSpec, grid, dt: float,
                          keep_states: bool = False) -> LindbladResult:
    """Integrate the Lindblad equation on a uniform output grid.

    Monitors at every grid point: trace drift, Hermiticity and minimum
    eigenvalue; violations raise IntegratorError rather than being
    silently repaired.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or abs(grid[0]) > 1e-12:
        raise ValueError("grid must start at 0 and contain at least two times")
    strides = np.diff(grid) / dt
    n_sub = int(round(strides[0]))
    if n_sub < 1 or not np.allclose(strides, n_sub, rtol=0, atol=1e-6):
        raise ValueError("grid times must be uniform multiples of dt")

    rho = rho0.matrix if isinstance(rho0, DensityMatrix) else np.asarray(rho0)
    rho = rho.astype(complex).copy()
    DensityMatrix(rho).validate()

    # Matrix-form right-hand side throughout: for the dense propagation the
    # D^2 x D^2 superoperator matvec is memory-bound and measurably slower
    # than the O(D^3) matrix products at every size tried, so the
    # superoperator matrix is reserved for steady-state / spectral work.
    h = model.h
    pairs = [(j.rate, j.op, j.op.conj().T @ j.op) for j in model.jumps]

    def rhs(r):
        out = -1j * (h @ r - r @ h)
        for rate, op, m in pairs:
            out += rate * ((op @ r) @ op.conj().T - 0.5 * (m @ r + r @ m))
        return out

    # half-system entropy is a pure-state quantity; skip it for mixed states
    channels = [c for c in model.channels if c.kind != "entropy_half"]
    n_grid = grid.size
    obs = {ch.name: np.empty(n_grid) for ch in channels}
    states = [] if keep_states else None

    def record(k):
        vals = evaluate_channels_rho(channels, rho)
        for name, val in vals.items():
            obs[name][k] = val
        if keep_states:
            states.append(rho.copy())

    def monitor(t):
        tr = np.trace(rho)
        if abs(tr - 1.0) > TRACE_TOL:
            raise IntegratorError(f"trace drifted to {tr:.10g} at t={t:.4g}")
        herm = np.abs(rho - rho.conj().T).max()
        if herm > 1e-8:
            raise IntegratorError(f"Hermiticity violated by {herm:.3g} at t={t:.4g}")
        w_min = float(np.linalg.eigvalsh(0.5 * (rho + rho.conj().T)).min())
        if w_min < -POSITIVITY_TOL:
            raise IntegratorError(
                f"positivity violated (min eigenvalue {w_min:.3g}) at t={t:.4g}; "
                "reduce dt"
            )

    record(0)
    for k in range(1, n_grid):
        for _ in range(n_sub):
            k1 = rhs(rho)
            k2 = rhs(rho + 0.5 * dt * k1)
            k3 = rhs(rho + 0.5 * dt * k2)
            k4 = rhs(rho + dt * k3)
            rho += (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        monitor(grid[k])
        rho = 0.5 * (rho + rho.conj().T)  # scrub roundoff; monitored first
        record(k)

    return LindbladResult(
        times=grid, observables=obs, final=rho, states=states,
        meta={"dt": dt, "model": model.label},
    )


def steady_state(model: ModelSpec) -> DensityMatrix:
    """Stationary state from the null space of the Liouvillian."""
    sup = liouvillian_matrix(model)
    w, v = np.linalg.eig(sup)
    idx = int(np.argmin(np.abs(w)))
    d = model.dim
    rho = v[:, idx].reshape(d, d)
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho)
    return DensityMatrix(rho)
