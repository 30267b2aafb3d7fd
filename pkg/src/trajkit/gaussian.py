"""Gaussian-trajectory unraveling of driven-dissipative Bose-Hubbard lattices.

Each trajectory state is a Gaussian ansatz parametrized by first moments
alpha_i = <a_i>, centered second moments u_ij = <a_i a_j> - alpha_i alpha_j
and v_ij = <a_i† a_j> - alpha_i* alpha_j, plus the squared norm R of the
unnormalized wavefunction.  Between jumps the moments follow closed
deterministic equations; a detector click on site j updates them with the
quadratic kernel terms and resets R.  Jump sampling uses the same
fixed-dt Bernoulli scheme as the Fock-space engine, with P_j = kappa_j N_j dt.

Entropies are symplectic: the von Neumann entropy of one mode follows
from mu = sqrt(det sigma) of its 2x2 quadrature covariance matrix
(x = (a†+a)/sqrt(2), p = i(a†-a)/sqrt(2)), in nats.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np

from .ensembles import (
    BLOCK_SIZE,
    EnsembleResult,
    TrajectoryRecord,
    iter_blocks,
    map_blocks,
    reduce_blocks,
    trajectory_rng,
    trajectory_seed,
)
from .errors import PhysicalityError, StepSizeError

__all__ = [
    "LatticeModelSpec",
    "GaussianState",
    "GaussianKernels",
    "GaussianEntropyResult",
    "vacuum_state",
    "gaussian_kernels",
    "gaussian_rhs",
    "gaussian_deterministic_step",
    "gaussian_jump",
    "gaussian_jump_probabilities",
    "mode_covariance",
    "covariance_matrix",
    "check_physicality",
    "gaussian_entropy",
    "run_gaussian_trajectory",
    "run_gaussian_ensemble",
]

MAX_STEP_PROBABILITY = 0.1
PHYSICALITY_NUDGE = 1e-8  # violations below this get projected, larger ones abort

_USE_NUMBA = os.environ.get("TRAJKIT_NO_NUMBA", "") == ""


@dataclass(frozen=True)
class LatticeModelSpec:
    """Bose-Hubbard lattice in physical (not size-rescaled) units.

    hopping[i, j] couples sites as -(1/2) sum_ij (J_ij a_i† a_j + h.c.);
    for the dimer use a symmetric real matrix with J on the off-diagonal.
    """

    detuning: np.ndarray
    kerr: np.ndarray
    drive: np.ndarray
    hopping: np.ndarray
    loss: np.ndarray
    n_scale: float = 1.0
    label: str = "bose-hubbard"

    def __post_init__(self):
        for name in ("detuning", "kerr", "loss"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), float))
        object.__setattr__(self, "drive", np.asarray(self.drive, complex))
        object.__setattr__(self, "hopping", np.asarray(self.hopping, float))
        n = self.n_modes
        if self.hopping.shape != (n, n):
            raise ValueError("hopping matrix shape mismatch")
        if np.any(self.loss < 0):
            raise ValueError("loss rates must be non-negative")

    @property
    def n_modes(self) -> int:
        return self.detuning.size

    @property
    def kappa_ref(self) -> float:
        return float(self.loss.max()) if self.loss.size else 1.0


@dataclass
class GaussianState:
    """First and second moments plus the norm tracker of one trajectory."""

    alpha: np.ndarray
    u: np.ndarray
    v: np.ndarray
    log_r: float = 0.0

    def __post_init__(self):
        self.alpha = np.asarray(self.alpha, complex)
        self.u = np.asarray(self.u, complex)
        self.v = np.asarray(self.v, complex)

    @property
    def r(self) -> float:
        return math.exp(self.log_r)

    @property
    def n_modes(self) -> int:
        return self.alpha.size

    @property
    def occupations(self) -> np.ndarray:
        return np.abs(self.alpha) ** 2 + np.real(np.diag(self.v))

    def copy(self) -> "GaussianState":
        return GaussianState(self.alpha.copy(), self.u.copy(), self.v.copy(),
                             self.log_r)

    def validate(self, tol=1e-10, physicality_tol=1e-8):
        if np.abs(self.u - self.u.T).max() > tol:
            raise ValueError("u must be symmetric")
        if np.abs(self.v - self.v.conj().T).max() > tol:
            raise ValueError("v must be Hermitian")
        if self.occupations.min() < -1e-9:
            raise ValueError("negative mode occupation")
        check_physicality(self, tol=physicality_tol)
        return self


@dataclass(frozen=True)
class GaussianKernels:
    """Occupation and jump kernels derived from one state.

    a_alpha[n, j] = alpha_j v_jn + alpha_j* u_jn
    a_u[n, m, j]  = v_jn u_jm + v_jm u_jn
    a_v[n, m, j]  = v_jm v_nj + u_jn* u_mj
    """

    n_occ: np.ndarray
    a_alpha: np.ndarray
    a_u: np.ndarray
    a_v: np.ndarray


@dataclass(frozen=True)
class GaussianEntropyResult:
    sigma: np.ndarray
    mu: float
    entropy: float


def vacuum_state(n_modes: int) -> GaussianState:
    return GaussianState(
        np.zeros(n_modes, complex),
        np.zeros((n_modes, n_modes), complex),
        np.zeros((n_modes, n_modes), complex),
        0.0,
    )


def gaussian_kernels(state: GaussianState) -> GaussianKernels:
    alpha, u, v = state.alpha, state.u, state.v
    n_occ = np.abs(alpha) ** 2 + np.real(np.diag(v))
    # a_alpha[n, j] = alpha_j v[j, n] + alpha_j* u[j, n]
    a_alpha = (alpha[:, None] * v + alpha.conj()[:, None] * u).T.copy()
    l = state.n_modes
    a_u = np.empty((l, l, l), complex)
    a_v = np.empty((l, l, l), complex)
    for j in range(l):
        a_u[:, :, j] = np.outer(v[j, :], u[j, :]) + np.outer(u[j, :], v[j, :])
        a_v[:, :, j] = np.outer(v[:, j], v[j, :]) + np.outer(
            u[j, :].conj(), u[:, j]
        )
    return GaussianKernels(n_occ, a_alpha, a_u, a_v)


def gaussian_rhs(state: GaussianState, model: LatticeModelSpec):
    """Deterministic evolution of (alpha, u, v, log R) between jumps."""
    alpha, u, v = state.alpha, state.u, state.v
    delta, kerr, drive = model.detuning, model.kerr, model.drive
    hop, loss = model.hopping, model.loss
    kern = gaussian_kernels(state)
    n_occ = kern.n_occ

    d_alpha = (
        (-0.5 * loss + 1j * delta) * alpha
        + 1j * (hop @ alpha)
        - 1j * kerr * (np.abs(alpha) ** 2 * alpha + 2.0 * alpha * np.diag(v)
                       + alpha.conj() * np.diag(u))
        - 1j * drive
        - kern.a_alpha @ loss
    )

    l = state.n_modes
    du = np.empty((l, l), complex)
    dv = np.empty((l, l), complex)
    for n in range(l):
        for m in range(l):
            term = (-0.5 * (loss[n] + loss[m]) + 1j * (delta[n] + delta[m])) * u[n, m]
            term += 1j * (hop[n, :] @ u[:, m] + hop[m, :] @ u[n, :])
            term += -1j * kerr[n] * (
                v[n, m] * (alpha[n] ** 2 + u[n, n])
                + 2.0 * u[n, m] * (abs(alpha[n]) ** 2 + v[n, n])
            )
            extra = alpha[m] ** 2 + u[m, m]
            term += -1j * kerr[m] * (
                v[m, n] * extra
                + 2.0 * u[m, n] * (abs(alpha[m]) ** 2 + v[m, m])
                + (extra if n == m else 0.0)
            )
            term -= kern.a_u[n, m, :] @ loss
            du[n, m] = term

            tv = (1j * (delta[m] - delta[n]) - 0.5 * (loss[n] + loss[m])) * v[n, m]
            tv += 1j * (hop[m, :] @ v[n, :] - hop[:, n] @ v[:, m])
            tv += 1j * kerr[n] * (
                2.0 * v[n, m] * (abs(alpha[n]) ** 2 + v[n, n])
                + u[n, m] * (alpha[n].conj() ** 2 + u[n, n].conj())
            )
            tv += -1j * kerr[m] * (
                2.0 * v[n, m] * (abs(alpha[m]) ** 2 + v[m, m])
                + u[n, m].conj() * (alpha[m] ** 2 + u[m, m])
            )
            tv -= kern.a_v[n, m, :] @ loss
            dv[n, m] = tv

    d_log_r = -float(loss @ n_occ)
    return d_alpha, du, dv, d_log_r


def gaussian_deterministic_step(state: GaussianState, model: LatticeModelSpec,
                                dt: float) -> GaussianState:
    """One classical RK4 step of the between-jump flow (local error O(dt^5))."""
    def add(s, k, w):
        return GaussianState(s.alpha + w * k[0], s.u + w * k[1], s.v + w * k[2],
                             s.log_r + w * k[3])

    k1 = gaussian_rhs(state, model)
    k2 = gaussian_rhs(add(state, k1, 0.5 * dt), model)
    k3 = gaussian_rhs(add(state, k2, 0.5 * dt), model)
    k4 = gaussian_rhs(add(state, k3, dt), model)
    new = GaussianState(
        state.alpha + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        state.u + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        state.v + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        state.log_r + dt / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
    )
    check_physicality(new, nudge=True,
                      message="physicality violated after step; reduce dt")
    return new


def gaussian_jump_probabilities(state: GaussianState, model: LatticeModelSpec,
                                dt: float) -> np.ndarray:
    """Per-site click probabilities P_j = kappa_j N_j dt."""
    return model.loss * state.occupations * dt


def gaussian_jump(state: GaussianState, site: int) -> GaussianState:
    """Apply a detector click on one site and reset the norm tracker."""
    kern = gaussian_kernels(state)
    nj = kern.n_occ[site]
    if nj <= 0:
        raise PhysicalityError(f"jump on empty site {site} (N_j = {nj:.3g})")
    aa = kern.a_alpha[:, site]
    alpha = state.alpha + aa / nj
    u = state.u + kern.a_u[:, :, site] / nj - np.outer(aa, aa) / nj**2
    v = state.v + kern.a_v[:, :, site] / nj - np.outer(aa.conj(), aa) / nj**2
    return GaussianState(alpha, u, v, 0.0)


def mode_covariance(state: GaussianState, coeffs) -> np.ndarray:
    """2x2 quadrature covariance of the mode b = sum_i c_i a_i, sum|c|^2 = 1."""
    c = np.asarray(coeffs, complex)
    u_b = c @ state.u @ c
    v_b = float(np.real(c.conj() @ state.v @ c))
    return np.array([
        [v_b + 0.5 + u_b.real, u_b.imag],
        [u_b.imag, v_b + 0.5 - u_b.real],
    ])


_MODE_COEFFS = {
    "+": np.array([1.0, 1.0]) / math.sqrt(2.0),
    "-": np.array([1.0, -1.0]) / math.sqrt(2.0),
}


def gaussian_entropy(state: GaussianState, mode) -> GaussianEntropyResult:
    """Symplectic entropy of one mode: site index, or '+'/'-' normal modes."""
    if isinstance(mode, str):
        if state.n_modes != 2:
            raise ValueError("normal-mode selection assumes a two-mode state")
        coeffs = _MODE_COEFFS[mode]
    else:
        coeffs = np.zeros(state.n_modes)
        coeffs[int(mode)] = 1.0
    sigma = mode_covariance(state, coeffs)
    det = float(np.linalg.det(sigma))
    if det < 0.25 - 1e-6:
        raise PhysicalityError(
            f"symplectic eigenvalue below 1/2 (det sigma = {det:.6g})",
            violation=0.25 - det,
        )
    mu = math.sqrt(max(det, 0.25))
    entropy = _symplectic_entropy(mu)
    return GaussianEntropyResult(sigma, mu, entropy)


def _symplectic_entropy(mu: float) -> float:
    up = mu + 0.5
    dn = max(mu - 0.5, 0.0)
    s = up * math.log(up)
    if dn > 0.0:
        s -= dn * math.log(dn)
    return s


def covariance_matrix(state: GaussianState) -> np.ndarray:
    """Full 2L x 2L covariance in (x_1..x_L, p_1..p_L) ordering."""
    u, v = state.u, state.v
    l = state.n_modes
    eye = np.eye(l)
    s_xx = u.real + v.real + 0.5 * eye
    s_pp = -u.real + v.real + 0.5 * eye
    s_xp = u.imag + v.imag
    top = np.hstack([s_xx, s_xp])
    bottom = np.hstack([s_xp.T, s_pp])
    return np.vstack([top, bottom])


def _symplectic_form(l: int) -> np.ndarray:
    eye = np.eye(l)
    zero = np.zeros((l, l))
    return np.block([[zero, eye], [-eye, zero]])


def check_physicality(state: GaussianState, tol: float = PHYSICALITY_NUDGE,
                      nudge: bool = False, message: str | None = None) -> float:
    """Verify Sigma + i Omega/2 >= 0; optionally project tiny violations.

    Returns the violation magnitude (0 when satisfied).  Violations below
    ``tol`` are repaired by adding a multiple of the identity to v when
    ``nudge`` is set; larger ones raise PhysicalityError.
    """
    sigma = covariance_matrix(state)
    l = state.n_modes
    m = sigma + 0.5j * _symplectic_form(l)
    w_min = float(np.linalg.eigvalsh(0.5 * (m + m.conj().T)).min())
    if w_min >= 0.0:
        return 0.0
    violation = -w_min
    if violation <= tol:
        if nudge:
            state.v = state.v + (violation + 1e-15) * np.eye(l)
        return violation
    raise PhysicalityError(
        message or f"covariance physicality violated by {violation:.3g}",
        violation=violation,
    )


# ---------------------------------------------------------------------------
# trajectory runners

try:  # pragma: no cover - exercised through the runner tests
    if _USE_NUMBA:
        from ._gaussian_kernel import evolve_block as _evolve_block_numba
    else:
        _evolve_block_numba = None
except ImportError:  # pragma: no cover
    _evolve_block_numba = None


def _evolve_block_numpy(alpha, u, v, log_r, delta, kerr, drive, hop, loss, dt,
                        uniforms, max_prob, want_log, log_steps, log_sites):
    """Reference block stepper; same stream discipline as the numba kernel."""
    model = LatticeModelSpec(detuning=delta, kerr=kerr, drive=drive,
                             hopping=hop.real, loss=loss)
    batch = alpha.shape[0]
    n_steps = uniforms.shape[1]
    counts = np.zeros(batch, np.int64)
    for b in range(batch):
        st = GaussianState(alpha[b].copy(), u[b].copy(), v[b].copy(), log_r[b])
        for s in range(n_steps):
            probs = gaussian_jump_probabilities(st, model, dt)
            p_tot = float(probs.sum())
            if p_tot >= max_prob:
                log_r[b] = st.log_r
                return 1, counts
            uu = uniforms[b, s]
            if uu < p_tot:
                site = int(np.searchsorted(np.cumsum(probs), uu, side="right"))
                site = min(site, st.n_modes - 1)
                st = gaussian_jump(st, site)
                if want_log and counts[b] < log_steps.shape[1]:
                    log_steps[b, counts[b]] = s
                    log_sites[b, counts[b]] = site
                counts[b] += 1
            else:
                st = _rk4_plain(st, model, dt)
        alpha[b], u[b], v[b], log_r[b] = st.alpha, st.u, st.v, st.log_r
    return 0, counts


def _rk4_plain(state, model, dt):
    # RK4 without the per-step physicality check (checked at grid points)
    k1 = gaussian_rhs(state, model)
    s2 = GaussianState(state.alpha + 0.5 * dt * k1[0], state.u + 0.5 * dt * k1[1],
                       state.v + 0.5 * dt * k1[2], state.log_r + 0.5 * dt * k1[3])
    k2 = gaussian_rhs(s2, model)
    s3 = GaussianState(state.alpha + 0.5 * dt * k2[0], state.u + 0.5 * dt * k2[1],
                       state.v + 0.5 * dt * k2[2], state.log_r + 0.5 * dt * k2[3])
    k3 = gaussian_rhs(s3, model)
    s4 = GaussianState(state.alpha + dt * k3[0], state.u + dt * k3[1],
                       state.v + dt * k3[2], state.log_r + dt * k3[3])
    k4 = gaussian_rhs(s4, model)
    return GaussianState(
        state.alpha + dt / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0]),
        state.u + dt / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1]),
        state.v + dt / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2]),
        state.log_r + dt / 6.0 * (k1[3] + 2 * k2[3] + 2 * k3[3] + k4[3]),
    )


def _gaussian_observables(alpha, u, v):
    """Channel values on a block: populations and mode entropies."""
    occ = np.abs(alpha) ** 2 + np.einsum("bii->bi", v).real
    n_tot = occ.sum(axis=1)
    out = {"n_tot": n_tot}
    if alpha.shape[1] == 2:
        a_plus = (alpha[:, 0] + alpha[:, 1]) / math.sqrt(2)
        v_pp = 0.5 * (v[:, 0, 0] + v[:, 1, 1] + v[:, 0, 1] + v[:, 1, 0]).real
        out["n_plus"] = np.abs(a_plus) ** 2 + v_pp
        u_pp = 0.5 * (u[:, 0, 0] + u[:, 1, 1] + 2.0 * u[:, 0, 1])
        out["S_E_pm"] = _entropy_from_uv(v_pp, u_pp)
        out["S_E"] = _entropy_from_uv(v[:, 0, 0].real, u[:, 0, 0])
    return out


def _entropy_from_uv(v_mode, u_mode):
    det = (v_mode + 0.5) ** 2 - np.abs(u_mode) ** 2
    bad = det < 0.25 - 1e-6
    if np.any(bad):
        raise PhysicalityError(
            f"symplectic eigenvalue below 1/2 (min det sigma = {det.min():.6g})",
            violation=float(0.25 - det.min()),
        )
    mu = np.sqrt(np.clip(det, 0.25, None))
    up = mu + 0.5
    dn = np.clip(mu - 0.5, 1e-300, None)
    return up * np.log(up) - np.where(mu > 0.5 + 1e-15, dn * np.log(dn), 0.0)


def _check_block_physicality(alpha, u, v, t):
    l = alpha.shape[1]
    eye = np.eye(l)
    s_xx = u.real + v.real + 0.5 * eye
    s_pp = -u.real + v.real + 0.5 * eye
    s_xp = u.imag + v.imag
    sigma = np.block([[s_xx, s_xp], [np.swapaxes(s_xp, -1, -2), s_pp]])
    m = sigma + 0.5j * _symplectic_form(l)
    w = np.linalg.eigvalsh(0.5 * (m + np.swapaxes(m.conj(), -1, -2)))
    w_min = w.min(axis=-1)
    worst = float(w_min.min())
    if worst >= 0.0:
        return
    if -worst > PHYSICALITY_NUDGE:
        raise PhysicalityError(
            f"covariance physicality violated by {-worst:.3g} at t={t:.4g}",
            violation=-worst,
        )
    fix = np.clip(-w_min, 0.0, None) + 1e-15
    v += fix[:, None, None] * eye


def _run_gaussian_block(shared, block):
    model: LatticeModelSpec = shared["model"]
    grid = shared["grid"]
    dt = shared["dt"]
    n_sub = shared["n_sub"]
    want_log = shared["jump_log"]
    start, stop = block
    batch = stop - start
    seeds = [trajectory_seed(shared["master_seed"], i) for i in range(start, stop)] \
        if shared.get("seeds") is None else list(shared["seeds"][start:stop])
    rngs = [trajectory_rng(s) for s in seeds]

    l = model.n_modes
    init: GaussianState = shared["init"]
    alpha = np.tile(init.alpha, (batch, 1))
    u = np.tile(init.u, (batch, 1, 1))
    v = np.tile(init.v, (batch, 1, 1))
    log_r = np.full(batch, init.log_r)

    n_grid = grid.size
    obs_names = ["n_tot"] + (["n_plus", "S_E_pm", "S_E"] if l == 2 else [])
    obs = {name: np.empty((batch, n_grid)) for name in obs_names}
    jump_logs = [[] for _ in range(batch)] if want_log else None
    jump_counts = np.zeros(batch, dtype=np.int64)

    stepper = _evolve_block_numba if _evolve_block_numba is not None \
        else _evolve_block_numpy
    hop_c = model.hopping.astype(complex)
    log_cap = n_sub if want_log else 1
    log_steps = np.zeros((batch, log_cap), dtype=np.int64)
    log_sites = np.zeros((batch, log_cap), dtype=np.int64)

    def record(k):
        vals = _gaussian_observables(alpha, u, v)
        for name in obs_names:
            obs[name][:, k] = vals[name]

    record(0)
    for k in range(1, n_grid):
        uniforms = np.empty((batch, n_sub))
        for b in range(batch):
            uniforms[b] = rngs[b].random(n_sub)
        status, counts = stepper(
            alpha, u, v, log_r, model.detuning, model.kerr, model.drive,
            hop_c, model.loss, dt, uniforms, MAX_STEP_PROBABILITY,
            1 if want_log else 0, log_steps, log_sites,
        )
        if status != 0:
            raise StepSizeError(
                f"jump probability reached {MAX_STEP_PROBABILITY} "
                f"near t={grid[k]:.4g}; reduce dt",
            )
        if want_log:
            offset = (k - 1) * n_sub
            for b in range(batch):
                for idx in range(min(int(counts[b]), log_cap)):
                    jump_logs[b].append(
                        (offset + int(log_steps[b, idx]), int(log_sites[b, idx]))
                    )
        jump_counts += counts
        _check_block_physicality(alpha, u, v, grid[k])
        record(k)

    result = {
        "observables": obs,
        "seeds": np.array(seeds, dtype=np.uint64),
        "jump_counts": jump_counts,
        "final": (alpha, u, v, log_r),
    }
    if want_log:
        result["jump_logs"] = jump_logs
    return result


def _check_grid(grid, dt):
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2 or abs(grid[0]) > 1e-12:
        raise ValueError("grid must start at 0 and contain at least two times")
    strides = np.diff(grid) / dt
    n_sub = int(round(strides[0]))
    if n_sub < 1 or not np.allclose(strides, n_sub, rtol=0, atol=1e-6):
        raise ValueError("grid times must be uniform multiples of dt")
    return n_sub


def run_gaussian_trajectory(model: LatticeModelSpec, grid, dt: float, seed: int,
                            init: GaussianState | None = None) -> TrajectoryRecord:
    """One Gaussian trajectory from vacuum (or a given initial state)."""
    grid = np.asarray(grid, dtype=float)
    n_sub = _check_grid(grid, dt)
    init = vacuum_state(model.n_modes) if init is None else init
    shared = {
        "model": model, "grid": grid, "dt": dt, "n_sub": n_sub, "init": init,
        "jump_log": True, "master_seed": 0, "seeds": [int(seed)],
    }
    res = _run_gaussian_block(shared, (0, 1))
    steps = np.array([s for s, _ in res["jump_logs"][0]], dtype=np.int64)
    sites = np.array([c for _, c in res["jump_logs"][0]], dtype=np.int64)
    obs = {name: arr[0] for name, arr in res["observables"].items()}
    return TrajectoryRecord(
        seed=int(seed), times=grid, observables=obs,
        jump_times=(steps + 1) * dt, jump_channels=sites,
        meta={"dt": dt, "model": model.label,
              "n_jumps": int(res["jump_counts"][0])},
    )


def run_gaussian_ensemble(model: LatticeModelSpec, grid, dt: float, n_traj: int,
                          master_seed: int, workers: int = 1,
                          init: GaussianState | None = None,
                          block_size: int = BLOCK_SIZE) -> EnsembleResult:
    """Gaussian-trajectory ensemble with the shared seed/block discipline."""
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    grid = np.asarray(grid, dtype=float)
    n_sub = _check_grid(grid, dt)
    init = vacuum_state(model.n_modes) if init is None else init
    shared = {
        "model": model, "grid": grid, "dt": dt, "n_sub": n_sub, "init": init,
        "jump_log": False, "master_seed": int(master_seed), "seeds": None,
    }
    blocks = iter_blocks(n_traj, block_size)
    results = map_blocks(_run_gaussian_block, shared, blocks, workers)
    mean, stderr = reduce_blocks([r["observables"] for r in results], n_traj)
    seeds = np.concatenate([r["seeds"] for r in results])
    jump_counts = np.concatenate([r["jump_counts"] for r in results])
    return EnsembleResult(
        n_traj=n_traj, times=grid, mean=mean, stderr=stderr,
        master_seed=int(master_seed), seeds=seeds,
        meta={"dt": dt, "model": model.label, "jump_counts": jump_counts,
              "n_scale": model.n_scale, "block_size": block_size},
    )
