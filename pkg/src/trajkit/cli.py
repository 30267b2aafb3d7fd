"""Batch command line: run, scan, fit, validate-config, replay.

Every run writes one CSV per parameter point (columns ``time, <channel>,
<channel>_stderr, ...`` for stochastic engines) plus a JSON manifest that
records the resolved configuration, code version, all seeds, truncation
reports and the SHA-256 of every CSV body, which is enough to reproduce
any run bit-exactly (``trajkit replay manifest.json``).

Times in output files are in 1/kappa units with kappa the reference loss
rate of the model.
"""

import argparse
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import critical_point, smooth_and_fit_saturation
from .config import (
    CHANNELS_BY_PRESET,
    RunConfig,
    STOCHASTIC_ENGINES,
    config_hash,
    parse_config,
)
from .binned import run_binned_ensemble
from .errors import ConfigError, TrajkitError
from .gaussian import run_gaussian_ensemble
from .jump import run_ensemble
from .lindblad import DensityMatrix, evolve_density_matrix
from .linops import TruncationPolicy, validate_truncation
from .models import (
    BoseHubbardParams,
    SuperradiantParams,
    TavisCummingsParams,
    build_bh_dimer_exact,
    build_bh_lattice,
    build_superradiant,
    build_tavis_cummings,
    choose_cutoff,
    classify_mean_field_phase,
    dimer_critical_drives,
    dimer_growth_rate,
    dimer_vacuum_state,
    integrate_mean_field,
    superradiant_initial_state,
    tc_initial_state,
)

__all__ = ["main", "execute"]


def _point_params(cfg: RunConfig, size, scan_value):
    params = dict(cfg.params)
    if cfg.scan is not None and scan_value is not None:
        params[cfg.scan["axis"]] = scan_value
    if cfg.preset == "tc":
        if size is not None:
            params["n_spins"] = int(size)
        return TavisCummingsParams(**params)
    if cfg.preset == "superradiant":
        if size is not None:
            params["n_spins"] = int(size)
        return SuperradiantParams(**params)
    defaults = {
        "bh-dimer-ssb": {"detuning": -1.5, "u_tilde": 2.0, "hopping": 2.5,
                         "f_tilde": 2.7},
        "bh-dimer-bistable": {"detuning": -1.4, "u_tilde": 2.0, "hopping": -2.5,
                              "f_tilde": 0.373},
    }[cfg.preset]
    merged = {**defaults, **params}
    if size is not None:
        merged["n_scale"] = float(size)
    return BoseHubbardParams(**merged)


def _grid(cfg: RunConfig):
    t_final = float(cfg.grid["t_final"])
    dt_out = float(cfg.grid.get("dt_output", max(cfg.dt, t_final / 400.0)))
    n = int(round(t_final / dt_out))
    return np.arange(n + 1) * dt_out


def _initial_state(cfg, params, model=None):
    if cfg.preset == "tc":
        return tc_initial_state(params, cfg.initial_state or "psi0")
    if cfg.preset == "superradiant":
        return superradiant_initial_state(params)
    return dimer_vacuum_state(params)


def _format(x) -> str:
    return f"{x:.17g}"


def _write_csv(path: Path, times, columns):
    """columns: list of (name, array).  Returns the SHA-256 of the body."""
    lines = ["time," + ",".join(name for name, _ in columns)]
    for i, t in enumerate(times):
        row = [_format(t)] + [_format(arr[i]) for _, arr in columns]
        lines.append(",".join(row))
    body = ("\n".join(lines) + "\n").encode()
    path.write_bytes(body)
    return hashlib.sha256(body).hexdigest()


def _select_channels(cfg, names):
    if cfg.observables is None:
        return [n for n in names]
    return [n for n in cfg.observables if n in names]


def _run_stochastic_point(cfg, params, label, out_dir):
    point = {"label": label, "params": dataclasses.asdict(params), "status": "ok"}
    grid = _grid(cfg)
    files = []
    if cfg.preset in ("tc",) or (
        cfg.preset.startswith("bh-dimer") and cfg.engine in ("jump", "lindblad")
    ):
        if params.mmax is None:
            params, policy, max_occ = choose_cutoff(params, grid, cfg.dt,
                                                    seed=(cfg.seed or 0) + 1)
            point["truncation_search"] = {"mmax": policy.mmax,
                                          "probe_max_occupation": max_occ}
    if cfg.preset == "tc":
        model = build_tavis_cummings(params)
    elif cfg.preset == "superradiant":
        model = build_superradiant(params)
    else:
        model = (build_bh_lattice(params) if cfg.engine == "gaussian"
                 else build_bh_dimer_exact(params))
    init = None if cfg.engine == "gaussian" else _initial_state(cfg, params)

    if cfg.engine == "jump":
        res = run_ensemble(model, init, grid, cfg.dt, cfg.n_traj, cfg.seed,
                           workers=cfg.workers, block_size=cfg.block_size)
        results = {"": res}
    elif cfg.engine == "gaussian":
        res = run_gaussian_ensemble(model, grid, cfg.dt, cfg.n_traj, cfg.seed,
                                    workers=cfg.workers,
                                    block_size=cfg.block_size)
        results = {"": res}
    else:  # binned
        results = {}
        for width in cfg.bin_widths:
            results[f"_dT{width:g}"] = run_binned_ensemble(
                model, init, float(cfg.grid["t_final"]), float(width),
                cfg.n_traj, cfg.seed, mode=cfg.binned_mode,
                order=cfg.quadrature_order, record_stride=cfg.record_stride,
                workers=cfg.workers, block_size=cfg.block_size,
            )

    for suffix, res in results.items():
        names = _select_channels(cfg, res.mean.keys())
        columns = []
        for n in names:
            columns.append((n, res.mean[n]))
            columns.append((f"{n}_stderr", res.stderr[n]))
        path = out_dir / f"{label}{suffix}.csv"
        digest = _write_csv(path, res.times, columns)
        entry = {"csv": path.name, "sha256": digest,
                 "seeds": {"master": res.master_seed,
                           "trajectories": [int(s) for s in res.seeds]}}
        if "max_edge_occupation" in res.meta:
            mmax = getattr(params, "mmax", None)
            n_scale = getattr(params, "n_spins", None) or getattr(
                params, "n_scale", None)
            policy = TruncationPolicy(mmax=mmax, epsilon=params.epsilon,
                                      n_scale=int(n_scale))
            report = validate_truncation(res, policy)
            entry["truncation"] = {
                "mmax": mmax, "chi": policy.chi, "epsilon": params.epsilon,
                "max_edge_occupation": report.max_occupation,
                "time_of_max": report.time_of_max, "passed": report.passed,
            }
        files.append(entry)
    point["files"] = files
    return point, results


def _run_lindblad_point(cfg, params, label, out_dir):
    point = {"label": label, "params": dataclasses.asdict(params), "status": "ok"}
    grid = _grid(cfg)
    if cfg.preset == "tc":
        if params.mmax is None:
            params, policy, _ = choose_cutoff(params, grid, cfg.dt,
                                              seed=(cfg.seed or 0) + 1)
        model = build_tavis_cummings(params, include_purity=True)
    elif cfg.preset == "superradiant":
        model = build_superradiant(params, include_purity=True)
    else:
        model = build_bh_dimer_exact(params, include_purity=True)
    init = _initial_state(cfg, params)
    rho0 = DensityMatrix.from_pure(init.amplitudes)
    res = evolve_density_matrix(rho0, model, grid, cfg.dt)
    names = _select_channels(cfg, res.observables.keys())
    columns = [(n, res.observables[n]) for n in names]
    path = out_dir / f"{label}.csv"
    digest = _write_csv(path, res.times, columns)
    point["files"] = [{"csv": path.name, "sha256": digest}]
    return point, {"": res}


def _run_meanfield_point(cfg, params, label, out_dir):
    point = {"label": label, "params": dataclasses.asdict(params), "status": "ok"}
    if cfg.preset == "tc":
        horizon = float(cfg.grid.get("t_final", 3000.0))
        if cfg.initial_state is not None and not isinstance(cfg.initial_state, str):
            ics = [np.asarray(cfg.initial_state, dtype=float)]
        elif cfg.initial_state == "psi1":
            ny, nz = 0.7, -0.71
            nrm = float(np.hypot(ny, nz))
            ics = [np.array([-ny / nrm, nz / nrm, -1.0])]
        elif cfg.initial_state == "psi0":
            ics = [np.array([0.0, 1.0, 0.0])]
        else:
            ics = None
        cls = classify_mean_field_phase(params, horizon=horizon,
                                        initial_conditions=ics)
        point["classification"] = {"phase": cls.phase,
                                   "m_z_tilde": cls.order_parameter}
        return point, None
    if cfg.preset.startswith("bh-dimer"):
        rate, alpha = dimer_growth_rate(params, params.f_tilde)
        point["stability"] = {"max_growth_rate": rate,
                              "alpha_antibonding": [alpha.real, alpha.imag]}
        return point, None
    # superradiant: integrate the mean-field flow and emit the series
    horizon = float(cfg.grid.get("t_final", 50.0))
    ic = (np.asarray(cfg.initial_state, dtype=float)
          if cfg.initial_state is not None else np.array([0.02, 0.0, 0.9998]))
    t, y = integrate_mean_field("superradiant", params, ic, horizon)
    path = out_dir / f"{label}.csv"
    digest = _write_csv(path, t, [("m_x", y[0].real), ("m_y", y[1].real),
                                  ("m_z", y[2].real)])
    point["files"] = [{"csv": path.name, "sha256": digest}]
    return point, None


def execute(cfg: RunConfig, out_dir, workers: int | None = None) -> int:
    """Run every (size, scan value) point of a configuration.

    Engine errors are recorded per point and the scan continues; the exit
    status is nonzero when any point failed.  Partial results stay on
    disk.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if workers is not None:
        cfg.workers = workers
    t_start = time.perf_counter()
    sizes = cfg.sizes if cfg.sizes is not None else [None]
    scan_values = cfg.scan["values"] if cfg.scan is not None else [None]
    points = []
    failed = 0
    series_for_scan = {}
    for size in sizes:
        for value in scan_values:
            label = f"{cfg.preset}_{cfg.engine}"
            if size is not None:
                label += f"_N{size:g}"
            if value is not None:
                label += f"_{cfg.scan['axis']}{value:g}"
            t0 = time.perf_counter()
            try:
                params = _point_params(cfg, size, value)
                if cfg.engine == "meanfield":
                    point, results = _run_meanfield_point(cfg, params, label,
                                                          out_dir)
                elif cfg.engine == "lindblad":
                    point, results = _run_lindblad_point(cfg, params, label,
                                                         out_dir)
                else:
                    point, results = _run_stochastic_point(cfg, params, label,
                                                           out_dir)
                if results and cfg.critical_point_channel:
                    res = results.get("")
                    data = getattr(res, "mean", None) or res.observables
                    ch = cfg.critical_point_channel
                    if ch in data:
                        series_for_scan[(size, value)] = float(
                            np.trapezoid(data[ch], res.times)
                            / (res.times[-1] - res.times[0])
                        )
            except (TrajkitError, ValueError, RuntimeError) as exc:
                point = {"label": label, "status": "error",
                         "error": f"{type(exc).__name__}: {exc}"}
                failed += 1
            point["wall_clock_s"] = time.perf_counter() - t0
            points.append(point)

    if cfg.critical_point_channel and cfg.scan is not None:
        _emit_critical_point(cfg, sizes, scan_values, series_for_scan, out_dir)

    manifest = {
        "version": __version__,
        "config": cfg.resolved(),
        "config_hash": config_hash(cfg),
        "points": points,
        "wall_clock_s": time.perf_counter() - t_start,
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=1,
                                                      default=str))
    return 1 if failed else 0


def _emit_critical_point(cfg, sizes, scan_values, series, out_dir):
    payload = {"channel": cfg.critical_point_channel, "axis": cfg.scan["axis"],
               "per_size": {}}
    for size in sizes:
        xs, ys = [], []
        for value in scan_values:
            if (size, value) in series:
                xs.append(value)
                ys.append(series[(size, value)])
        if len(xs) >= 7:
            cp = critical_point(np.array(xs), np.array(ys))
            payload["per_size"][str(size)] = {
                "value": cp.value, "uncertainty": cp.uncertainty,
                "inconclusive": cp.inconclusive, "reason": cp.reason,
            }
        else:
            payload["per_size"][str(size)] = {"value": None,
                                              "inconclusive": True,
                                              "reason": "fewer than 7 points"}
    (out_dir / "critical_point.json").write_text(json.dumps(payload, indent=1))


def _cmd_run(args, require_scan=None):
    try:
        cfg = parse_config(Path(args.config).read_text())
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    if require_scan is True and cfg.scan is None:
        print("config error: 'scan' section required for the scan verb",
              file=sys.stderr)
        return 2
    if args.seed is not None:
        cfg.seed = args.seed
    out = args.out or cfg.out or "runs"
    return execute(cfg, out, workers=args.workers)


def _cmd_validate(args):
    try:
        parse_config(Path(args.config).read_text())
    except ConfigError as exc:
        print(f"invalid: {exc}", file=sys.stderr)
        return 2
    print("ok")
    return 0


def _cmd_fit(args):
    import csv as csvmod

    with open(args.series) as fh:
        reader = csvmod.DictReader(fh)
        rows = list(reader)
    if not rows or args.channel not in rows[0]:
        print(f"channel {args.channel!r} not in {args.series}", file=sys.stderr)
        return 2
    t = np.array([float(r["time"]) for r in rows])
    y = np.array([float(r[args.channel]) for r in rows])
    fit = smooth_and_fit_saturation(t, y, sigma=args.sigma)
    payload = {
        "channel": args.channel, "a": fit.a, "b": fit.b, "c": fit.c,
        "tau": fit.tau, "mode": fit.mode, "residual": fit.residual,
        "stationary": fit.stationary, "window": list(fit.window),
    }
    text = json.dumps(payload, indent=1)
    if args.out:
        Path(args.out).write_text(text)
    else:
        print(text)
    return 0


def _cmd_replay(args):
    manifest = json.loads(Path(args.manifest).read_text())
    cfg = RunConfig(**manifest["config"])
    out = Path(args.out or (Path(args.manifest).parent / "replay"))
    code = execute(cfg, out, workers=args.workers)
    new_manifest = json.loads((out / "manifest.json").read_text())
    mismatches = []
    originals = {p["label"]: p for p in manifest["points"]}
    for p in new_manifest["points"]:
        orig = originals.get(p["label"])
        if orig is None or orig.get("status") != "ok" or p.get("status") != "ok":
            continue
        old = {f["csv"]: f["sha256"] for f in orig.get("files", [])}
        for f in p.get("files", []):
            if old.get(f["csv"]) != f["sha256"]:
                mismatches.append(f["csv"])
    if mismatches:
        print(f"replay mismatch in: {', '.join(mismatches)}", file=sys.stderr)
        return 1
    print(f"replay reproduced {len(new_manifest['points'])} point(s) bit-exactly")
    return code


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="trajkit",
        description="Monitored-dynamics simulations of collective models",
    )
    sub = parser.add_subparsers(dest="verb", required=True)

    for verb, needs_scan in (("run", False), ("scan", True)):
        p = sub.add_parser(verb, help=f"{verb} a configuration")
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--seed", type=int, default=None)
        p.set_defaults(func=lambda a, ns=needs_scan: _cmd_run(a, require_scan=ns))

    p = sub.add_parser("validate-config", help="parse and validate a config")
    p.add_argument("--config", required=True)
    p.set_defaults(func=_cmd_validate)

    p = sub.add_parser("fit", help="saturation fit of one CSV channel")
    p.add_argument("series")
    p.add_argument("--channel", required=True)
    p.add_argument("--sigma", type=float, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_fit)

    p = sub.add_parser("replay", help="re-run a manifest and verify hashes")
    p.add_argument("manifest")
    p.add_argument("--out", default=None)
    p.add_argument("--workers", type=int, default=None)
    p.set_defaults(func=_cmd_replay)

    args = parser.parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
