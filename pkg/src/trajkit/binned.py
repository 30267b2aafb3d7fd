"""Finite-time-resolution conditional evolution with mixed-state trajectories.

A detector with resolution delta_t cannot distinguish trajectories whose
jumps fall inside the same bin, so the conditional state is a density
matrix.  Per bin, with L the jump operator and U_t = exp(-i t H_nh):

* no detection, probability 1 - kappa dT <L†L>:  rho -> U rho U† (renormalized)
* one detection, probability kappa dT <L†L>:  the jump time is averaged
  uniformly over the bin, each branch U_{x dT} L U_{(1-x) dT} rho (...)†
  normalized separately, with the x-integral evaluated by Gauss-Legendre
  quadrature.

<L†L> is evaluated at the start of the bin (stated approximation; a
diagnostic compares start-of-bin and end-of-bin rates).  The two-jump
extension adds a branch with probability kappa dT (<(L†L)^2> - <L†L>)
whose two jump times are averaged by nested quadrature.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .ensembles import (
    BLOCK_SIZE,
    EnsembleResult,
    iter_blocks,
    map_blocks,
    reduce_blocks,
    trajectory_rng,
    trajectory_seed,
)
from .errors import StepSizeError
from .jump import ModelSpec
from .lindblad import DensityMatrix
from .observables import Channel, evaluate_channels_rho

__all__ = [
    "BinnedPropagators",
    "BinnedOutcome",
    "binned_step",
    "two_jump_step",
    "run_binned_trajectory",
    "run_binned_ensemble",
    "rate_drift_diagnostic",
]

DEFAULT_ORDER = 8


def _gauss_legendre_01(order: int):
    x, w = np.polynomial.legendre.leggauss(order)
    return 0.5 * (x + 1.0), 0.5 * w


class BinnedPropagators:
    """Precomputed branch operators for one (model, delta_t, order).

    The one-jump branch matrices are M_k = U_{x_k dT} L U_{(1-x_k) dT};
    the two-jump matrices (single-channel models) additionally average the
    ordered pair of jump times over the bin.
    """

    def __init__(self, model: ModelSpec, delta_t: float, order: int = DEFAULT_ORDER,
                 two_jump: bool = False):
        if two_jump and len(model.jumps) != 1:
            raise ValueError("the two-jump extension covers single-channel models")
        self.model = model
        self.delta_t = float(delta_t)
        self.order = int(order)
        self.two_jump = two_jump
        h_nh = model.h_nh
        self._expm_cache = {}

        def u_of(t):
            key = round(float(t), 15)
            if key not in self._expm_cache:
                self._expm_cache[key] = scipy.linalg.expm(-1j * key * h_nh)
            return self._expm_cache[key]

        dt = self.delta_t
        self.u0 = u_of(dt)
        nodes, weights = _gauss_legendre_01(order)
        self.one_jump = []
        for j in model.jumps:
            mats = np.stack(
                [u_of(x * dt) @ j.op @ u_of((1.0 - x) * dt) for x in nodes]
            )
            self.one_jump.append((weights.copy(), mats))
        self.rate_ops = [j.op.conj().T @ j.op for j in model.jumps]
        self.rates = np.array([j.rate for j in model.jumps])
        if two_jump:
            op = model.jumps[0].op
            self.rate_sq_op = self.rate_ops[0] @ self.rate_ops[0]
            mats = []
            wts = []
            for a, ya in zip(range(order), nodes):
                t2 = dt * nodes[a]
                for b, zb in enumerate(nodes):
                    t1 = t2 * zb
                    mats.append(u_of(dt - t2) @ op @ u_of(t2 - t1) @ op @ u_of(t1))
                    wts.append(2.0 * weights[a] * weights[b] * nodes[a])
            self.two_jump_branch = (np.array(wts), np.stack(mats))
        # stacked forms for the fused two-GEMM application
        self._stacked = {}

    def _stack(self, key, weights, mats):
        if key not in self._stacked:
            k, d, _ = mats.shape
            m_stack = mats.reshape(k * d, d)
            mdag_stack = np.concatenate([m.conj().T for m in mats], axis=0)
            self._stacked[key] = (weights, mats, m_stack, mdag_stack)
        return self._stacked[key]

    def apply_average(self, rho, weights, mats, key):
        """sum_k w_k M_k rho M_k† / tr(...), each branch normalized."""
        weights, mats, m_stack, mdag_stack = self._stack(key, weights, mats)
        k, d, _ = mats.shape
        x = (m_stack @ rho).reshape(k, d, d)
        traces = np.einsum("kij,kij->k", x, mats.conj()).real
        if np.any(traces <= 0):
            raise StepSizeError("jump branch produced a non-positive trace")
        coeff = weights / traces
        y = (x * coeff[:, None, None]).transpose(1, 0, 2).reshape(d, k * d)
        out = y @ mdag_stack
        out /= np.sum(weights)
        return out

    def no_jump(self, rho):
        out = self.u0 @ rho @ self.u0.conj().T
        tr = np.trace(out).real
        if tr <= 0:
            raise StepSizeError("no-jump branch produced a non-positive trace")
        return out / tr

    def jump(self, rho, channel: int):
        weights, mats = self.one_jump[channel]
        return self.apply_average(rho, weights, mats, ("one", channel))

    def double_jump(self, rho):
        weights, mats = self.two_jump_branch
        return self.apply_average(rho, weights, mats, ("two",))

    def probabilities(self, rho):
        """Per-channel one-jump probabilities at the start of the bin."""
        vals = np.array(
            [np.einsum("ij,ji->", rho, m).real for m in self.rate_ops]
        )
        return self.rates * self.delta_t * vals


@dataclass
class BinnedOutcome:
    n_jumps: int           # 0, 1 (channel in `channel`) or 2
    channel: int | None
    probabilities: np.ndarray
    delta_t: float


def _cached_props(model, delta_t, order, two_jump):
    cache = model.meta.setdefault("_binned_cache", {})
    key = (round(float(delta_t), 15), order, two_jump)
    if key not in cache:
        cache[key] = BinnedPropagators(model, delta_t, order, two_jump)
    return cache[key]


def binned_step(rho, model: ModelSpec, delta_t: float, rng,
                order: int = DEFAULT_ORDER):
    """One detector bin: no-jump map or jump-time-averaged one-jump map.

    Validity requires the total one-jump probability per bin below 1;
    otherwise reduce delta_t or use the two-jump mode.
    """
    props = _cached_props(model, delta_t, order, False)
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    probs = props.probabilities(mat)
    p_tot = float(probs.sum())
    if p_tot >= 1.0:
        raise StepSizeError(
            f"one-jump bin probability {p_tot:.3g} >= 1; use a smaller bin "
            "width or the two-jump mode",
            probability=p_tot,
        )
    u = rng.random()
    if u < p_tot:
        channel = int(np.searchsorted(np.cumsum(probs), u, side="right"))
        channel = min(channel, len(props.one_jump) - 1)
        out = props.jump(mat, channel)
        outcome = BinnedOutcome(1, channel, probs, delta_t)
    else:
        out = props.no_jump(mat)
        outcome = BinnedOutcome(0, None, probs, delta_t)
    return DensityMatrix(out), outcome


def two_jump_step(rho, model: ModelSpec, delta_t: float, rng,
                  order: int = DEFAULT_ORDER):
    """Three-way bin: p0 = 1 - k dT <(L†L)^2>, p1 = k dT <L†L>, p2 = rest."""
    props = _cached_props(model, delta_t, order, True)
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    kdt = props.rates[0] * delta_t
    m1 = float(np.einsum("ij,ji->", mat, props.rate_ops[0]).real)
    m2 = float(np.einsum("ij,ji->", mat, props.rate_sq_op).real)
    p1 = kdt * m1
    p2 = kdt * (m2 - m1)
    if p2 < -1e-10:
        raise ValueError(f"negative two-jump probability {p2:.3g}")
    p2 = max(p2, 0.0)
    p0 = 1.0 - kdt * m2
    if p0 < 0.0:
        raise StepSizeError(
            f"two-jump no-detection probability {p0:.3g} < 0; reduce the bin "
            "width",
            probability=1.0 - p0,
        )
    u = rng.random()
    if u < p1:
        out = props.jump(mat, 0)
        outcome = BinnedOutcome(1, 0, np.array([p1, p2]), delta_t)
    elif u < p1 + p2:
        out = props.double_jump(mat)
        outcome = BinnedOutcome(2, 0, np.array([p1, p2]), delta_t)
    else:
        out = props.no_jump(mat)
        outcome = BinnedOutcome(0, None, np.array([p1, p2]), delta_t)
    return DensityMatrix(out), outcome


def rate_drift_diagnostic(rho, model: ModelSpec, delta_t: float,
                          order: int = DEFAULT_ORDER):
    """Relative change of <L†L> across one no-jump bin (per channel).

    Quantifies the stated start-of-bin approximation for the jump
    probability.
    """
    props = _cached_props(model, delta_t, order, False)
    mat = rho.matrix if isinstance(rho, DensityMatrix) else np.asarray(rho)
    start = props.probabilities(mat)
    end = props.probabilities(props.no_jump(mat))
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(start > 0, (end - start) / start, 0.0)
    return rel


def _ensure_channels(model: ModelSpec):
    channels = list(model.channels)
    if not any(c.name == "purity" for c in channels):
        channels.append(Channel("purity", "purity"))
    return [c for c in channels if c.kind != "entropy_half"]


def _run_binned_block(shared, block):
    model: ModelSpec = shared["model"]
    props: BinnedPropagators = shared["props"]
    times = shared["times"]
    stride = shared["stride"]
    mode_two = shared["two_jump"]
    channels = shared["channels"]
    start, stop = block
    batch = stop - start
    seeds = [trajectory_seed(shared["master_seed"], i) for i in range(start, stop)] \
        if shared.get("seeds") is None else list(shared["seeds"][start:stop])
    rngs = [trajectory_rng(s) for s in seeds]

    d = model.dim
    rho = np.tile(shared["rho0"][None, :, :], (batch, 1, 1))
    n_grid = times.size
    obs = {ch.name: np.empty((batch, n_grid)) for ch in channels}
    jump_counts = np.zeros(batch, dtype=np.int64)
    delta_t = props.delta_t
    n_channels = len(props.one_jump)

    def record(k):
        vals = evaluate_channels_rho(channels, rho)
        for name, arr in vals.items():
            obs[name][:, k] = arr

    record(0)
    n_bins_total = (n_grid - 1) * stride
    uniforms = np.empty((batch, n_bins_total))
    for b in range(batch):
        uniforms[b] = rngs[b].random(n_bins_total)

    bin_index = 0
    for k in range(1, n_grid):
        for _ in range(stride):
            u = uniforms[:, bin_index]
            if not mode_two:
                probs = np.stack(
                    [
                        props.rates[c] * delta_t
                        * np.einsum("bij,ji->b", rho, props.rate_ops[c]).real
                        for c in range(n_channels)
                    ]
                )
                p_tot = probs.sum(axis=0)
                if p_tot.max() >= 1.0:
                    raise StepSizeError(
                        f"one-jump bin probability {p_tot.max():.3g} >= 1 at "
                        f"bin {bin_index}; use a smaller bin width or the "
                        "two-jump mode",
                        probability=float(p_tot.max()),
                    )
                cum = np.cumsum(probs, axis=0)
                jumped = u < p_tot
                no = ~jumped
                if np.any(no):
                    idx = np.nonzero(no)[0]
                    sub = props.u0 @ rho[idx] @ props.u0.conj().T
                    tr = np.einsum("bii->b", sub).real
                    rho[idx] = sub / tr[:, None, None]
                for b in np.nonzero(jumped)[0]:
                    c = int(np.searchsorted(cum[:, b], u[b], side="right"))
                    c = min(c, n_channels - 1)
                    rho[b] = props.jump(rho[b], c)
                    jump_counts[b] += 1
            else:
                kdt = props.rates[0] * delta_t
                m1 = np.einsum("bij,ji->b", rho, props.rate_ops[0]).real
                m2 = np.einsum("bij,ji->b", rho, props.rate_sq_op).real
                p1 = kdt * m1
                p2 = np.clip(kdt * (m2 - m1), 0.0, None)
                p0 = 1.0 - kdt * m2
                if p0.min() < 0.0:
                    raise StepSizeError(
                        f"two-jump no-detection probability {p0.min():.3g} < 0 "
                        f"at bin {bin_index}; reduce the bin width",
                    )
                one = u < p1
                two = (~one) & (u < p1 + p2)
                no = ~(one | two)
                if np.any(no):
                    idx = np.nonzero(no)[0]
                    sub = props.u0 @ rho[idx] @ props.u0.conj().T
                    tr = np.einsum("bii->b", sub).real
                    rho[idx] = sub / tr[:, None, None]
                for b in np.nonzero(one)[0]:
                    rho[b] = props.jump(rho[b], 0)
                    jump_counts[b] += 1
                for b in np.nonzero(two)[0]:
                    rho[b] = props.double_jump(rho[b])
                    jump_counts[b] += 2
            bin_index += 1
        rho = 0.5 * (rho + np.swapaxes(rho.conj(), -1, -2))
        record(k)

    return {
        "observables": obs,
        "seeds": np.array(seeds, dtype=np.uint64),
        "jump_counts": jump_counts,
    }


def run_binned_trajectory(model: ModelSpec, init, t_final: float, delta_t: float,
                          seed: int, mode: str = "one",
                          order: int = DEFAULT_ORDER, record_stride: int = 1):
    """One mixed-state trajectory; records every ``record_stride`` bins."""
    res = run_binned_ensemble(model, init, t_final, delta_t, n_traj=1,
                              master_seed=None, seeds=[seed], mode=mode,
                              order=order, record_stride=record_stride)
    return res


def run_binned_ensemble(model: ModelSpec, init, t_final: float, delta_t: float,
                        n_traj: int, master_seed: int | None,
                        mode: str = "one", order: int = DEFAULT_ORDER,
                        record_stride: int = 1, workers: int = 1,
                        block_size: int = BLOCK_SIZE,
                        seeds=None) -> EnsembleResult:
    """Ensemble of binned mixed-state trajectories for one bin width.

    Output times are every ``record_stride``-th bin boundary; purity is
    always recorded next to the model's channels.
    """
    if mode not in ("one", "two"):
        raise ValueError("mode must be 'one' or 'two'")
    n_bins = int(round(t_final / delta_t))
    n_rec = n_bins // record_stride
    if n_rec < 1:
        raise ValueError("t_final shorter than one recorded bin")
    times = np.arange(n_rec + 1) * (delta_t * record_stride)
    psi0 = np.asarray(getattr(init, "amplitudes", init), dtype=complex)
    if psi0.ndim == 1:
        psi0 = psi0 / np.linalg.norm(psi0)
        rho0 = np.outer(psi0, psi0.conj())
    else:
        rho0 = psi0
    props = _cached_props(model, delta_t, order, mode == "two")
    shared = {
        "model": model, "props": props, "times": times, "stride": record_stride,
        "two_jump": mode == "two", "channels": _ensure_channels(model),
        "rho0": rho0, "master_seed": 0 if master_seed is None else int(master_seed),
        "seeds": list(seeds) if seeds is not None else None,
    }
    blocks = iter_blocks(n_traj, block_size)
    results = map_blocks(_run_binned_block, shared, blocks, workers)
    mean, stderr = reduce_blocks([r["observables"] for r in results], n_traj)
    all_seeds = np.concatenate([r["seeds"] for r in results])
    jump_counts = np.concatenate([r["jump_counts"] for r in results])
    return EnsembleResult(
        n_traj=n_traj, times=times, mean=mean, stderr=stderr,
        master_seed=0 if master_seed is None else int(master_seed),
        seeds=all_seeds,
        meta={"delta_t": delta_t, "mode": mode, "order": order,
              "model": model.label, "jump_counts": jump_counts},
    )
