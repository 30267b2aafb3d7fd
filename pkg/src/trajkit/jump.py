"""Quantum-jump unraveling with reproducible parallel ensembles.

Fixed-step scheme: in each interval dt the state either jumps, with
probability kappa_i <L_i† L_i> dt per channel, or evolves under the
non-Hermitian no-jump propagator exp(-i dt H_nh), which is computed once
per (model, dt) as a dense matrix exponential.  A single uniform draw per
step decides both whether a jump happens and which channel fires
(cumulative-probability inversion), so one trajectory consumes exactly
one random number per step.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

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
from .errors import JumpApplicationError, StepSizeError
from .observables import evaluate_channels_pure

__all__ = [
    "StateVector",
    "JumpChannel",
    "ModelSpec",
    "StepOutcome",
    "step",
    "run_trajectory",
    "run_ensemble",
]

MAX_STEP_PROBABILITY = 0.1
_CHUNK_STEPS = 2048


@dataclass
class StateVector:
    """Normalized pure state over the composite basis."""

    amplitudes: np.ndarray

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex).reshape(-1)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> "StateVector":
        return StateVector(self.amplitudes / self.norm)

    @property
    def dim(self) -> int:
        return self.amplitudes.size


@dataclass(frozen=True)
class JumpChannel:
    """Jump operator with its monitoring rate (1/time units)."""

    op: np.ndarray
    rate: float
    label: str = ""


@dataclass
class StepOutcome:
    kind: str  # 'jump' | 'no_jump'
    channel: int | None
    p_total: float
    p_channels: np.ndarray
    dt: float


class ModelSpec:
    """Hamiltonian, jump channels and recordable observables of one model.

    Immutable after construction; safe to share across trajectory workers.
    """

    def __init__(self, h, jumps, channels=(), dims=None, label="", kappa_ref=1.0,
                 meta=None):
        self.h = np.asarray(h, dtype=complex)
        self.jumps = list(jumps)
        self.channels = list(channels)
        self.dims = tuple(dims) if dims is not None else (self.h.shape[0],)
        self.label = label
        self.kappa_ref = float(kappa_ref)
        self.meta = dict(meta or {})
        self._validate()
        self._h_nh = None
        self._propagators = {}
        self._m_diags = None

    def _validate(self):
        h = self.h
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("Hamiltonian must be a square matrix")
        scale = max(np.linalg.norm(h), 1.0)
        if np.linalg.norm(h - h.conj().T) > 1e-12 * scale:
            raise ValueError("Hamiltonian is not Hermitian to 1e-12")
        for j in self.jumps:
            if j.rate < 0:
                raise ValueError(f"negative rate for channel {j.label!r}")
            if j.op.shape != h.shape:
                raise ValueError("jump operator shape does not match Hamiltonian")
        if int(np.prod(self.dims)) != h.shape[0]:
            raise ValueError("dims do not multiply to the Hamiltonian dimension")

    @property
    def dim(self) -> int:
        return self.h.shape[0]

    @property
    def h_nh(self) -> np.ndarray:
        """Non-Hermitian no-jump generator H - (i/2) sum_i kappa_i L_i† L_i."""
        if self._h_nh is None:
            acc = self.h.astype(complex).copy()
            for j in self.jumps:
                acc -= 0.5j * j.rate * (j.op.conj().T @ j.op)
            self._h_nh = acc
        return self._h_nh

    def propagator(self, dt: float) -> np.ndarray:
        """exp(-i dt H_nh), cached per step size."""
        key = float(dt)
        if key not in self._propagators:
            self._propagators[key] = scipy.linalg.expm(-1j * dt * self.h_nh)
        return self._propagators[key]

    def rate_diagonals(self):
        """Per channel: diagonal of L†L when diagonal, else None (dense fallback)."""
        if self._m_diags is None:
            out = []
            for j in self.jumps:
                m = j.op.conj().T @ j.op
                off = m - np.diag(np.diag(m))
                if np.abs(off).max() < 1e-14:
                    out.append(np.real(np.diag(m)).copy())
                else:
                    out.append(None)
            self._m_diags = out
        return self._m_diags


def _jump_probabilities(model: ModelSpec, psi: np.ndarray, dt: float) -> np.ndarray:
    probs = np.empty(len(model.jumps))
    diags = model.rate_diagonals()
    for i, (jump, diag) in enumerate(zip(model.jumps, diags)):
        if diag is not None:
            val = float(np.sum(diag * np.abs(psi) ** 2))
        else:
            lpsi = jump.op @ psi
            val = float(np.real(np.vdot(lpsi, lpsi)))
        probs[i] = dt * jump.rate * val
    return probs


def step(state, model: ModelSpec, dt: float, rng) -> tuple:
    """Advance one interval dt: no-jump propagation or a quantum jump.

    Returns (new_state, StepOutcome).  Raises StepSizeError when the total
    jump probability reaches 0.1 and JumpApplicationError when the chosen
    jump operator annihilates the state.
    """
    psi = state.amplitudes if isinstance(state, StateVector) else np.asarray(state)
    probs = _jump_probabilities(model, psi, dt)
    p_total = float(probs.sum())
    if p_total >= MAX_STEP_PROBABILITY:
        raise StepSizeError(
            f"jump probability {p_total:.3g} >= {MAX_STEP_PROBABILITY}; reduce dt",
            probability=p_total,
        )
    u = rng.random()
    if u < p_total:
        channel = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        channel = min(channel, len(probs) - 1)
        new = model.jumps[channel].op @ psi
        norm = np.linalg.norm(new)
        if norm <= 1e-150:
            label = model.jumps[channel].label or str(channel)
            raise JumpApplicationError(
                f"jump channel {label} annihilated the state", channel=channel
            )
        new = new / norm
        outcome = StepOutcome("jump", channel, p_total, probs, dt)
    else:
        new = model.propagator(dt) @ psi
        new = new / np.linalg.norm(new)
        outcome = StepOutcome("no_jump", None, p_total, probs, dt)
    return StateVector(new), outcome


def _check_grid(grid: np.ndarray, dt: float) -> int:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 2:
        raise ValueError("grid must contain at least two times")
    if abs(grid[0]) > 1e-12:
        raise ValueError("grid must start at t=0")
    strides = np.diff(grid) / dt
    n_sub = int(round(strides[0]))
    if n_sub < 1 or not np.allclose(strides, n_sub, rtol=0, atol=1e-6):
        raise ValueError("grid times must be uniform multiples of dt")
    return n_sub


def _run_block(shared, block):
    """Evolve one contiguous block of trajectories, batched over columns."""
    model: ModelSpec = shared["model"]
    psi0 = shared["psi0"]
    grid = shared["grid"]
    dt = shared["dt"]
    n_sub = shared["n_sub"]
    want_log = shared["jump_log"]
    want_final = shared["final_state"]
    start, stop = block
    batch = stop - start
    seeds = [trajectory_seed(shared["master_seed"], i) for i in range(start, stop)] \
        if shared.get("seeds") is None else list(shared["seeds"][start:stop])
    rngs = [trajectory_rng(s) for s in seeds]

    dim = model.dim
    prop = model.propagator(dt)
    diags = model.rate_diagonals()
    rates = np.array([j.rate for j in model.jumps])
    n_channels = len(model.jumps)

    psi = np.tile(np.asarray(psi0, dtype=complex).reshape(-1, 1), (1, batch))
    psi = psi / np.linalg.norm(psi, axis=0, keepdims=True)

    n_grid = grid.size
    obs = {ch.name: np.empty((batch, n_grid)) for ch in model.channels}
    jump_steps = [[] for _ in range(batch)] if want_log else None
    jump_chans = [[] for _ in range(batch)] if want_log else None
    jump_counts = np.zeros(batch, dtype=np.int64)

    def record(k):
        vals = evaluate_channels_pure(model.channels, psi)
        for name, arr in vals.items():
            obs[name][:, k] = arr

    record(0)
    probs = np.empty((n_channels, batch))
    step_global = 0
    for k in range(1, n_grid):
        done = 0
        while done < n_sub:
            chunk = min(_CHUNK_STEPS, n_sub - done)
            uniforms = np.empty((batch, chunk))
            for b in range(batch):
                uniforms[b] = rngs[b].random(chunk)
            for s in range(chunk):
                absq = None
                for i in range(n_channels):
                    if diags[i] is not None:
                        if absq is None:
                            absq = psi.real**2 + psi.imag**2
                        probs[i] = rates[i] * dt * (diags[i] @ absq)
                    else:
                        lpsi = model.jumps[i].op @ psi
                        probs[i] = rates[i] * dt * np.einsum(
                            "ib,ib->b", lpsi.conj(), lpsi
                        ).real
                p_total = probs.sum(axis=0)
                pmax = p_total.max()
                if pmax >= MAX_STEP_PROBABILITY:
                    raise StepSizeError(
                        f"jump probability {pmax:.3g} >= {MAX_STEP_PROBABILITY} "
                        f"at t={grid[k - 1] + (done + s) * dt:.4g}; reduce dt",
                        probability=float(pmax),
                        time=float(grid[k - 1] + (done + s) * dt),
                    )
                u = uniforms[:, s]
                jumped = u < p_total
                new_psi = prop @ psi
                if jumped.any():
                    cum = np.cumsum(probs, axis=0)
                    for b in np.nonzero(jumped)[0]:
                        c = int(np.searchsorted(cum[:, b], u[b], side="right"))
                        c = min(c, n_channels - 1)
                        vec = model.jumps[c].op @ psi[:, b]
                        nrm = np.linalg.norm(vec)
                        if nrm <= 1e-150:
                            label = model.jumps[c].label or str(c)
                            raise JumpApplicationError(
                                f"jump channel {label} annihilated trajectory "
                                f"{start + b}",
                                channel=c,
                            )
                        new_psi[:, b] = vec
                        jump_counts[b] += 1
                        if want_log:
                            jump_steps[b].append(step_global + s + 1)
                            jump_chans[b].append(c)
                psi = new_psi / np.linalg.norm(new_psi, axis=0, keepdims=True)
            done += chunk
            step_global += chunk
        record(k)

    result = {"observables": obs, "seeds": np.array(seeds, dtype=np.uint64),
              "jump_counts": jump_counts}
    if "edge_occupation" in obs:
        flat = int(np.argmax(obs["edge_occupation"]))
        result["edge_max"] = float(obs["edge_occupation"].flat[flat])
        result["edge_max_time"] = float(grid[flat % n_grid])
    if want_log:
        result["jump_steps"] = [np.array(j, dtype=np.int64) for j in jump_steps]
        result["jump_channels"] = [np.array(j, dtype=np.int64) for j in jump_chans]
    if want_final:
        result["final"] = psi.copy()
    return result


def run_trajectory(model: ModelSpec, init, grid, dt: float, seed: int,
                   keep_final_state: bool = False) -> TrajectoryRecord:
    """One quantum trajectory, deterministic for fixed (seed, dt, grid)."""
    grid = np.asarray(grid, dtype=float)
    n_sub = _check_grid(grid, dt)
    psi0 = init.amplitudes if isinstance(init, StateVector) else np.asarray(init)
    shared = {
        "model": model, "psi0": psi0, "grid": grid, "dt": dt, "n_sub": n_sub,
        "jump_log": True, "final_state": keep_final_state,
        "master_seed": 0, "seeds": [int(seed)],
    }
    res = _run_block(shared, (0, 1))
    obs = {name: arr[0] for name, arr in res["observables"].items()}
    return TrajectoryRecord(
        seed=int(seed),
        times=grid,
        observables=obs,
        jump_times=res["jump_steps"][0] * dt,
        jump_channels=res["jump_channels"][0],
        final_state=res["final"][:, 0] if keep_final_state else None,
        meta={"dt": dt, "model": model.label, "n_jumps": int(res["jump_counts"][0])},
    )


def run_ensemble(model: ModelSpec, init, grid, dt: float, n_traj: int,
                 master_seed: int, workers: int = 1,
                 block_size: int = BLOCK_SIZE,
                 keep_jump_counts: bool = True,
                 keep_jump_logs: bool = False) -> EnsembleResult:
    """Trajectory ensemble with per-trajectory seeds derived from master_seed.

    Parameters
    ----------
    workers:
        Number of worker processes.  Results are bitwise identical for any
        worker count because trajectories are batched in fixed-size blocks
        and reduced in index order.
    """
    if n_traj < 1:
        raise ValueError("n_traj must be >= 1")
    grid = np.asarray(grid, dtype=float)
    n_sub = _check_grid(grid, dt)
    psi0 = init.amplitudes if isinstance(init, StateVector) else np.asarray(init)
    shared = {
        "model": model, "psi0": psi0, "grid": grid, "dt": dt, "n_sub": n_sub,
        "jump_log": keep_jump_logs, "final_state": False,
        "master_seed": int(master_seed), "seeds": None,
    }
    blocks = iter_blocks(n_traj, block_size)
    results = map_blocks(_run_block, shared, blocks, workers)
    mean, stderr = reduce_blocks([r["observables"] for r in results], n_traj)
    seeds = np.concatenate([r["seeds"] for r in results])
    jump_counts = np.concatenate([r["jump_counts"] for r in results])
    meta = {"dt": dt, "model": model.label, "block_size": block_size}
    if keep_jump_counts:
        meta["jump_counts"] = jump_counts
    if keep_jump_logs:
        meta["jump_steps"] = [j for r in results for j in r["jump_steps"]]
        meta["jump_channels"] = [j for r in results for j in r["jump_channels"]]
    if "edge_occupation" in mean:
        # per-trajectory maximum, stricter than the ensemble-mean series
        k = int(np.argmax([r.get("edge_max", 0.0) for r in results]))
        meta["max_edge_occupation"] = float(results[k].get("edge_max", 0.0))
        meta["max_edge_occupation_time"] = float(results[k].get("edge_max_time", 0.0))
    return EnsembleResult(
        n_traj=n_traj, times=grid, mean=mean, stderr=stderr,
        master_seed=int(master_seed), seeds=seeds, meta=meta,
    )
