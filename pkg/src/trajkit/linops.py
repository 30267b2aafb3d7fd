"""Dense operators for collective spins and truncated bosonic modes.

Collective spin operators are built in the maximal-spin sector S = N/2,
whose dimension N+1 grows linearly with the particle number.  Bosonic
modes are truncated at a Fock cutoff Mmax chosen so that the edge-state
occupation stays below a tolerance (see :class:`TruncationPolicy`).
All matrices are dense complex; composite dimensions stay at desk scale
(a few thousand), where dense algebra beats sparse formats.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import TruncationError

__all__ = [
    "SpinOperatorSet",
    "BosonOperatorSet",
    "TruncationPolicy",
    "TruncationReport",
    "build_spin_ops",
    "build_boson_ops",
    "tensor",
    "validate_truncation",
]


@dataclass(frozen=True)
class SpinOperatorSet:
    """Collective spin operators on the S = N/2 Dicke ladder.

    Basis states |S, m> are ordered by increasing m from -S to +S, so
    ``sz`` is diagonal with entries -N/2 ... +N/2.
    """

    n_spins: int
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    sp: np.ndarray
    sm: np.ndarray

    @property
    def dim(self) -> int:
        return self.n_spins + 1

    @property
    def total_spin(self) -> float:
        return 0.5 * self.n_spins

    @property
    def m_values(self) -> np.ndarray:
        s = self.total_spin
        return np.arange(self.dim) - s


@dataclass(frozen=True)
class BosonOperatorSet:
    """Annihilation, creation and number operators on a truncated Fock space."""

    mmax: int
    a: np.ndarray
    adag: np.ndarray
    n: np.ndarray

    @property
    def dim(self) -> int:
        return self.mmax + 1

    @property
    def edge_projector_diag(self) -> np.ndarray:
        d = np.zeros(self.dim)
        d[-1] = 1.0
        return d


@dataclass(frozen=True)
class TruncationPolicy:
    """Acceptance rule for a Fock cutoff.

    A run passes if the edge-state occupation <|Mmax><Mmax|> never exceeds
    ``epsilon`` on the output grid.  ``chi`` is the cutoff-to-size ratio
    (Mmax+1)/N, a measured output rather than an input: the hard criterion
    is the epsilon bound.
    """

    mmax: int
    epsilon: float = 1e-5
    n_scale: int | None = None
    chi: float | None = field(default=None)

    def __post_init__(self):
        if self.chi is None and self.n_scale:
            object.__setattr__(self, "chi", (self.mmax + 1) / self.n_scale)


@dataclass(frozen=True)
class TruncationReport:
    passed: bool
    max_occupation: float
    time_of_max: float
    policy: TruncationPolicy


def build_spin_ops(n_spins: int) -> SpinOperatorSet:
    """Build S_x, S_y, S_z, S+, S- for N spins in the maximal-S sector."""
    if n_spins < 1:
        raise ValueError(f"need at least one spin, got N={n_spins}")
    s = 0.5 * n_spins
    m = np.arange(n_spins + 1) - s
    dim = n_spins + 1
    sp = np.zeros((dim, dim), dtype=complex)
    # S+|S,m> = sqrt(S(S+1) - m(m+1)) |S,m+1>
    amp = np.sqrt(s * (s + 1.0) - m[:-1] * (m[:-1] + 1.0))
    sp[np.arange(1, dim), np.arange(dim - 1)] = amp
    sm = sp.conj().T.copy()
    sz = np.diag(m.astype(complex))
    sx = 0.5 * (sp + sm)
    sy = -0.5j * (sp - sm)
    return SpinOperatorSet(n_spins, sx, sy, sz, sp, sm)


def build_boson_ops(mmax: int) -> BosonOperatorSet:
    """Build a, a† and n on Fock states |0> ... |Mmax>."""
    if mmax < 1:
        raise ValueError(f"Fock cutoff must be >= 1, got {mmax}")
    dim = mmax + 1
    a = np.zeros((dim, dim), dtype=complex)
    a[np.arange(dim - 1), np.arange(1, dim)] = np.sqrt(np.arange(1, dim))
    adag = a.conj().T.copy()
    n = np.diag(np.arange(dim, dtype=complex))
    return BosonOperatorSet(mmax, a, adag, n)


def tensor(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product, first factor acting on the leftmost subsystem."""
    return np.kron(a, b)


def validate_truncation(record, policy: TruncationPolicy) -> TruncationReport:
    """Check the edge-occupation series of a run against a cutoff policy.

    Accepts anything carrying ``times`` plus an ``edge_occupation`` channel:
    a TrajectoryRecord (per-trajectory expectation values) or an
    EnsembleResult, in which case the tracked per-trajectory maximum is
    used when available.
    """
    times = getattr(record, "times", None)
    if times is None:
        raise TruncationError("record has no time grid")
    meta = getattr(record, "meta", {}) or {}
    series = None
    for attr in ("observables", "mean"):
        data = getattr(record, attr, None)
        if data and "edge_occupation" in data:
            series = np.asarray(data["edge_occupation"])
            break
    if series is None:
        raise TruncationError("record has no 'edge_occupation' channel")
    idx = int(np.argmax(series))
    max_occ = float(series[idx])
    t_max = float(times[idx])
    # per-trajectory maxima dominate the ensemble mean when tracked
    tracked = meta.get("max_edge_occupation")
    if tracked is not None and tracked > max_occ:
        max_occ = float(tracked)
        t_max = float(meta.get("max_edge_occupation_time", t_max))
    return TruncationReport(max_occ <= policy.epsilon, max_occ, t_max, policy)
