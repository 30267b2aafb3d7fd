"""Measured quantities on pure states, density matrices and batches thereof.

Channels are small descriptors that every engine knows how to evaluate,
so the observable names written to output files stay identical across the
trajectory, Lindblad and binned engines.  Entropies are von Neumann
entropies in nats (natural logarithm) throughout.
"""

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "Channel",
    "EntanglementResult",
    "von_neumann_entropy",
    "spin_cavity_entropy",
    "half_system_entropy",
    "dicke_half_table",
    "dicke_state_full",
    "purity",
    "scalar_observables",
    "evaluate_channels_pure",
    "evaluate_channels_rho",
]

_EIG_CLAMP = 1e-14


@dataclass(frozen=True)
class Channel:
    """One named observable an engine can record.

    kind:
      * ``linear``      expectation of ``op`` (or of a diagonal operator
                        given as ``diag``), times ``scale``
      * ``variance``    (<O^2> - <O>^2) * scale for the operator in
                        ``op``/``diag``
      * ``entropy``     von Neumann entropy of the reduced state of the
                        first tensor factor, ``dims = (d_first, d_rest)``
      * ``entropy_half``  half-system entropy of a Dicke-sector state via
                        the precomputed expansion ``table``
      * ``purity``      Tr rho^2 (identically 1 on pure states)
    """

    name: str
    kind: str
    op: np.ndarray | None = None
    diag: np.ndarray | None = None
    dims: tuple[int, int] | None = None
    table: np.ndarray | None = None
    scale: float = 1.0


@dataclass(frozen=True)
class EntanglementResult:
    entropy: float
    bipartition: str
    spectrum: np.ndarray


def von_neumann_entropy(eigenvalues: np.ndarray) -> float:
    """Entropy -sum p log p of a probability spectrum, in nats.

    Eigenvalues below the 1e-14 clamp (including numerical negatives)
    contribute zero, implementing the 0 log 0 := 0 convention.
    """
    p = np.asarray(eigenvalues, dtype=float)
    safe = np.clip(p, _EIG_CLAMP, None)
    return float(-np.sum(np.where(p > _EIG_CLAMP, p * np.log(safe), 0.0)))


def _entropy_from_singular_values(s: np.ndarray) -> float:
    return von_neumann_entropy(s.astype(float) ** 2)


def spin_cavity_entropy(psi: np.ndarray, dims: tuple[int, int]) -> EntanglementResult:
    """Entanglement entropy between the two tensor factors of a pure state.

    ``dims`` is (d_spin, d_cavity) with the spin factor leftmost; the
    cavity is traced out.  The returned spectrum contains the reduced-state
    eigenvalues (squared Schmidt coefficients).
    """
    d_a, d_b = dims
    psi = np.asarray(psi).reshape(-1)
    if psi.size != d_a * d_b:
        raise ValueError(f"state of length {psi.size} does not match dims {dims}")
    mat = psi.reshape(d_a, d_b)
    s = np.linalg.svd(mat, compute_uv=False)
    spectrum = s**2
    return EntanglementResult(_entropy_from_singular_values(s), "spin-cavity", spectrum)


@lru_cache(maxsize=32)
def dicke_half_table(n_spins: int) -> np.ndarray:
    """Expansion of |S=N/2, m> over two permutation-symmetric halves.

    Returns T with T[k, i] = <S_h, m_A; S_h, m_B | S, m> where S_h = N/4,
    m = k - N/2, m_A = i - S_h and m_B = m - m_A.  Built by repeated
    application of the total lowering operator starting from the top
    state; every coefficient is positive, so the recursion is stable for
    N in the hundreds.
    """
    if n_spins % 2 != 0:
        raise ValueError(f"half-system split needs even N, got {n_spins}")
    s = 0.5 * n_spins
    s_h = 0.25 * n_spins
    half_dim = n_spins // 2 + 1
    table = np.zeros((n_spins + 1, half_dim))
    table[n_spins, half_dim - 1] = 1.0  # |S, S> = |S_h, S_h>|S_h, S_h>
    m_a = np.arange(half_dim) - s_h

    def g(m):
        # S-|S,m> amplitude sqrt(S(S+1) - m(m-1)) for spin value S
        return np.sqrt(s_h * (s_h + 1.0) - m * (m - 1.0))

    for k in range(n_spins, 0, -1):
        m = k - s
        row = table[k]
        new = np.zeros(half_dim)
        m_b = (m - 1.0) - m_a  # m_B after lowering, per target m_A
        # half A lowered: contribution from entry at m_A + 1
        new[:-1] += g(m_a[1:]) * row[1:]
        # half B lowered: m_B_old = m_B_new + 1
        valid = np.abs(m_b + 1.0) <= s_h + 1e-9
        new[valid] += g(m_b[valid] + 1.0) * row[valid]
        norm = np.sqrt(s * (s + 1.0) - m * (m - 1.0))
        table[k - 1] = new / norm
    return table


def half_system_entropy(psi: np.ndarray, n_spins: int) -> EntanglementResult:
    """Half-system entanglement entropy of a maximal-S collective state.

    ``psi`` may be given either as N+1 Dicke-sector amplitudes (ordered by
    increasing m) or as a full 2^N product-basis state, which is then
    checked to live in the maximal-S sector (components off the sector
    above 1e-8 are rejected).
    """
    if n_spins % 2 != 0:
        raise ValueError(f"half-system split needs even N, got {n_spins}")
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if psi.size == 2**n_spins and psi.size != n_spins + 1:
        basis = _dicke_basis_full(n_spins)
        coeff = basis.conj() @ psi
        residual = np.linalg.norm(psi - basis.T @ coeff)
        if residual > 1e-8:
            raise ValueError(
                f"state has weight {residual:.2e} outside the maximal-S sector"
            )
        psi = coeff
    elif psi.size != n_spins + 1:
        raise ValueError(f"expected {n_spins + 1} Dicke amplitudes, got {psi.size}")
    table = dicke_half_table(n_spins)
    half_dim = n_spins // 2 + 1
    mat = np.zeros((half_dim, half_dim), dtype=complex)
    for k in range(n_spins + 1):
        i_lo = max(0, k - (half_dim - 1))
        i_hi = min(half_dim - 1, k)
        idx = np.arange(i_lo, i_hi + 1)
        mat[idx, k - idx] = psi[k] * table[k, idx]
    s = np.linalg.svd(mat, compute_uv=False)
    return EntanglementResult(_entropy_from_singular_values(s), "half-system", s**2)


@lru_cache(maxsize=8)
def _dicke_basis_full(n_spins: int) -> np.ndarray:
    """Rows are |S=N/2, m> expanded in the 2^N product basis (m ascending).

    Brute-force oracle helper; exponential in N, keep N <= ~14.
    """
    dim = 2**n_spins
    basis = np.zeros((n_spins + 1, dim))
    occ = np.array([bin(i).count("1") for i in range(dim)])
    from math import comb

    for k in range(n_spins + 1):  # k = number of up spins = m + N/2
        sel = occ == k
        basis[k, sel] = 1.0 / np.sqrt(comb(n_spins, k))
    return basis


def purity(rho: np.ndarray) -> float:
    """Tr rho^2 of a density matrix."""
    rho = np.asarray(rho)
    return float(np.real(np.einsum("ij,ji->", rho, rho)))


# ---------------------------------------------------------------------------
# batched channel evaluation

def _expect_pure(channel: Channel, psi: np.ndarray) -> np.ndarray:
    """<O> per column of psi (D, B), real part."""
    if channel.diag is not None:
        return (np.abs(psi) ** 2 * channel.diag[:, None]).sum(axis=0).real
    return np.einsum("ib,ib->b", psi.conj(), channel.op @ psi).real


def _expect_sq_pure(channel: Channel, psi: np.ndarray) -> np.ndarray:
    if channel.diag is not None:
        return (np.abs(psi) ** 2 * (channel.diag**2)[:, None]).sum(axis=0).real
    opsi = channel.op @ psi
    return np.einsum("ib,ib->b", opsi.conj(), opsi).real


def evaluate_channels_pure(channels, psi: np.ndarray) -> dict:
    """Evaluate channels on a block of normalized pure states (D, B)."""
    psi = np.asarray(psi)
    if psi.ndim == 1:
        psi = psi[:, None]
    out = {}
    svd_cache = {}
    for ch in channels:
        if ch.kind == "linear":
            out[ch.name] = ch.scale * _expect_pure(ch, psi)
        elif ch.kind == "variance":
            mean = _expect_pure(ch, psi)
            out[ch.name] = ch.scale * (_expect_sq_pure(ch, psi) - mean**2)
        elif ch.kind == "entropy":
            key = ("bi", ch.dims)
            if key not in svd_cache:
                d_a, d_b = ch.dims
                stack = psi.T.reshape(-1, d_a, d_b)
                svd_cache[key] = np.linalg.svd(stack, compute_uv=False)
            out[ch.name] = _batched_entropy(svd_cache[key])
        elif ch.kind == "entropy_half":
            key = ("half",)
            if key not in svd_cache:
                svd_cache[key] = _half_singular_values(ch.table, psi)
            out[ch.name] = _batched_entropy(svd_cache[key])
        elif ch.kind == "purity":
            out[ch.name] = np.ones(psi.shape[1])
        else:
            raise ValueError(f"unknown channel kind {ch.kind!r}")
    return out


def _batched_entropy(singvals: np.ndarray) -> np.ndarray:
    p = singvals.astype(float) ** 2
    safe = np.clip(p, _EIG_CLAMP, None)
    return -np.where(p > _EIG_CLAMP, p * np.log(safe), 0.0).sum(axis=-1)


def _half_singular_values(table: np.ndarray, psi: np.ndarray) -> np.ndarray:
    n_plus_1, half_dim = table.shape
    b = psi.shape[1]
    mats = np.zeros((b, half_dim, half_dim), dtype=complex)
    for k in range(n_plus_1):
        i_lo = max(0, k - (half_dim - 1))
        i_hi = min(half_dim - 1, k)
        idx = np.arange(i_lo, i_hi + 1)
        mats[:, idx, k - idx] = psi[k, :, None] * table[k, idx][None, :]
    return np.linalg.svd(mats, compute_uv=False)


def _reduced_first(rho_stack: np.ndarray, dims) -> np.ndarray:
    d_a, d_b = dims
    b = rho_stack.shape[0]
    r = rho_stack.reshape(b, d_a, d_b, d_a, d_b)
    return np.einsum("bijkj->bik", r)


def evaluate_channels_rho(channels, rho: np.ndarray) -> dict:
    """Evaluate channels on a density matrix (D, D) or a stack (B, D, D)."""
    rho = np.asarray(rho)
    single = rho.ndim == 2
    stack = rho[None] if single else rho
    out = {}
    for ch in channels:
        if ch.kind == "linear":
            if ch.diag is not None:
                vals = np.einsum("bii,i->b", stack, ch.diag).real
            else:
                vals = np.einsum("bij,ji->b", stack, ch.op).real
            out[ch.name] = ch.scale * vals
        elif ch.kind == "variance":
            if ch.diag is not None:
                mean = np.einsum("bii,i->b", stack, ch.diag).real
                sq = np.einsum("bii,i->b", stack, ch.diag**2).real
            else:
                mean = np.einsum("bij,ji->b", stack, ch.op).real
                op2 = ch.op @ ch.op
                sq = np.einsum("bij,ji->b", stack, op2).real
            out[ch.name] = ch.scale * (sq - mean**2)
        elif ch.kind == "entropy":
            red = _reduced_first(stack, ch.dims)
            evals = np.linalg.eigvalsh(red)
            safe = np.clip(evals, _EIG_CLAMP, None)
            out[ch.name] = -np.where(evals > _EIG_CLAMP,
                                     evals * np.log(safe), 0.0).sum(axis=-1)
        elif ch.kind == "entropy_half":
            raise ValueError("half-system channel is defined for pure states only")
        elif ch.kind == "purity":
            out[ch.name] = np.einsum("bij,bji->b", stack, stack).real
        else:
            raise ValueError(f"unknown channel kind {ch.kind!r}")
    if single:
        out = {k: v[0] for k, v in out.items()}
    return out


def scalar_observables(state, channels) -> dict:
    """Evaluate a channel set on a single pure state or density matrix."""
    arr = np.asarray(getattr(state, "amplitudes", getattr(state, "matrix", state)))
    if arr.ndim == 1:
        vals = evaluate_channels_pure(channels, arr[:, None])
        return {k: float(v[0]) for k, v in vals.items()}
    return {k: float(v) for k, v in evaluate_channels_rho(channels, arr).items()}
