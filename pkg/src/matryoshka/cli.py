"""Command-line front end: build systems from TOML configs, run protocols,
write CSV/JSON artifacts plus a reproducibility manifest per run."""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import __version__
from .config import (RunManifest, apply_overrides, chain_spec_from, load_config,
                     output_dir, output_prefix)
from .disorder import DisorderSpec, run_ensemble
from .dynamics import PiecewiseLinear, bloch_evolve, evolve
from .errors import ConfigurationError, MatryoshkaError
from .lattice import build_chain, lift_angles, lift_residual, square_hamiltonian
from .protocols import (MemoryProtocol, TransferProtocol, braid_junction_spec,
                        braiding_ensemble_protocol, memory_spec_for_edge,
                        run_braiding, run_memory, run_qudit_memory, run_transfer,
                        transfer_channels, transfer_system, multigap_chain_spec)
from .spectral import (bands_to_csv, bloch_bands, detect_edge_states, diagonalize,
                       spectrum_to_csv)


def _proto(cfg, key, default=None):
    return cfg.get("protocol", {}).get(key, default)


def _sched(cfg, key, default=None):
    return cfg.get("schedule", {}).get(key, default)


def _disorder_spec(cfg, kind=None) -> DisorderSpec:
    d = cfg.get("disorder", {})
    return DisorderSpec(
        kind=kind or d.get("kind", "correlated_angle"),
        sigma=float(d.get("sigma", 0.1)),
        knots=int(d.get("knots", 20)),
        seed=int(d.get("seed", 0)),
        realizations=int(d.get("realizations", 100)),
    )


def cmd_spectrum(cfg, outdir, args):
    spec = chain_spec_from(cfg)
    lat = build_chain(spec)
    sp = diagonalize(lat)
    report = detect_edge_states(sp, lat, float(_proto(cfg, "tail_fraction", 0.15)))
    prefix = os.path.join(outdir, output_prefix(cfg))
    csv_path = f"{prefix}_spectrum.csv"
    spectrum_to_csv(sp, lat, csv_path, report=report)
    json_path = f"{prefix}_lattice.json"
    lat.export_json(json_path)
    return {
        "derived": {
            "n_sites": lat.n_sites,
            "n_edge_states": len(report),
            "edge_indices": report.indices,
            "edge_energies": [float(sp.energies[i]) for i in report.indices],
            "edge_sides": report.sides,
        },
        "outputs": [csv_path, json_path],
    }


def cmd_bands(cfg, outdir, args):
    spec = chain_spec_from(cfg)
    if spec.boundary != "periodic":
        raise ConfigurationError("bands needs [chain] boundary = 'periodic'")
    nk = int(_proto(cfg, "k_points", 64))
    ks = np.linspace(-np.pi, np.pi, nk)
    bands = bloch_bands(spec, ks)
    prefix = os.path.join(outdir, output_prefix(cfg))
    path = f"{prefix}_bands.csv"
    bands_to_csv(bands, path)
    return {"derived": {"n_bands": len(bands[0][1])}, "outputs": [path]}


def cmd_sqrt_check(cfg, outdir, args):
    """Lift the [chain] parent once and verify the square-root structure."""
    from dataclasses import replace

    from .lattice import ChainSpec

    spec = chain_spec_from(cfg)
    embed = float(_proto(cfg, "embed_scale", spec.scale))
    child_angles, child_scale = lift_angles(spec.angles, embed)
    residual = lift_residual(spec.angles, embed, child_angles)
    parent = build_chain(replace(spec, scale=embed))
    child_spec = ChainSpec(order=spec.order + 1, angles=tuple(child_angles),
                           cells=parent.n_sites, scale=child_scale,
                           total_sites=2 * parent.n_sites + 1)
    child = build_chain(child_spec)
    HA, HB = square_hamiltonian(child)
    recovery = float(np.abs(HB - np.eye(parent.n_sites) - parent.hamiltonian).max())
    prefix = os.path.join(outdir, output_prefix(cfg))
    json_path = f"{prefix}_child_lattice.json"
    child.export_json(json_path)
    return {
        "derived": {
            "child_angles": [float(a) for a in child_angles],
            "child_scale": child_scale,
            "lift_residual": residual,
            "parent_recovery_error": recovery,
        },
        "outputs": [json_path],
    }


def cmd_transfer(cfg, outdir, args):
    p = TransferProtocol(
        level=int(_proto(cfg, "level", 1)),
        lambda_=float(_proto(cfg, "lambda", np.pi / 3)),
        gamma=float(_proto(cfg, "gamma", 0.0)),
        duration=float(_sched(cfg, "duration", 200.0)),
        n_steps=int(_sched(cfg, "steps", 4000)),
        initial_side=str(_proto(cfg, "initial_side", "left")),
    )
    dis = _disorder_spec(cfg) if "disorder" in cfg else None
    res = run_transfer(p, disorder=dis)
    prefix = os.path.join(outdir, output_prefix(cfg))
    outputs = []
    system = transfer_system(p)
    from .dynamics import observables_to_csv

    for label, eps, psi0, psie in transfer_channels(p):
        traj = evolve(system, psi0.astype(complex))
        path = f"{prefix}_transfer_{label.replace('=', '')}.csv"
        observables_to_csv(traj, psi0, psie, path)
        outputs.append(path)
    return {
        "derived": {
            "fidelities": res.fidelities,
            "phases": res.phases,
            "min_gaps": res.min_gaps,
            "initial_gaps": res.initial_gaps,
            "warnings": res.warnings,
        },
        "outputs": outputs,
        "seed": dis.seed if dis else None,
    }


def cmd_braid(cfg, outdir, args):
    lam = float(_proto(cfg, "lambda", np.pi / 3))
    T_leg = float(_sched(cfg, "duration", 200.0))
    steps = int(_sched(cfg, "steps", 4000))
    dis = _disorder_spec(cfg) if "disorder" in cfg else None
    report = run_braiding(braid_junction_spec(lam), T_leg, disorder=dis,
                          n_steps_leg=steps)
    prefix = os.path.join(outdir, output_prefix(cfg))
    path = f"{prefix}_gate.json"
    doc = {
        "matrix_re": report.matrix.real.tolist(),
        "matrix_im": report.matrix.imag.tolist(),
        "leakage": report.leakage.tolist(),
        "off_block_leakage": report.off_block_leakage.tolist(),
        "sector_phases": [{"re": p.real, "im": p.imag} for p in report.sector_phases],
        "block_tags": report.block_tags,
        "block_errors": report.block_errors,
        "notes": report.notes,
    }
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=1, sort_keys=True)
        fh.write("\n")
    return {
        "derived": {"block_tags": report.block_tags,
                    "block_errors": report.block_errors,
                    "max_off_block_leakage": float(report.off_block_leakage.max())},
        "outputs": [path],
        "seed": dis.seed if dis else None,
    }


def cmd_memory(cfg, outdir, args):
    spec = chain_spec_from(cfg)
    target = float(_proto(cfg, "target_energy", 1.0))
    coupling = float(_proto(cfg, "coupling", 0.05))
    t_waits = _proto(cfg, "t_waits")
    if t_waits is None:
        t_max = float(_proto(cfg, "t_wait_max", 100.0))
        t_waits = np.linspace(0.0, t_max, int(_proto(cfg, "t_wait_points", 101)))
    mem = memory_spec_for_edge(spec, target, coupling)
    res = run_memory(MemoryProtocol(mem, t_waits=tuple(float(t) for t in t_waits)))
    prefix = os.path.join(outdir, output_prefix(cfg))
    path = f"{prefix}_memory.csv"
    with open(path, "w", newline="") as fh:
        import csv as _csv

        w = _csv.writer(fh)
        w.writerow(["t_wait", "fidelity"])
        for t, f in zip(res.t_waits, res.fidelities):
            w.writerow([f"{t:.17g}", f"{f:.17g}"])
    return {
        "derived": {
            "tau": res.tau,
            "edge_energy": res.edge_energy,
            "edge_splitting": res.edge_splitting,
            "first_minimum_expected": res.first_minimum_expected,
            "half_period_estimate": res.half_period_estimate,
            "measured_first_minimum": res.measured_first_minimum,
            "store_efficiency": res.store_efficiency,
        },
        "outputs": [path],
    }


def cmd_qudit_memory(cfg, outdir, args):
    spec = chain_spec_from(cfg) if "chain" in cfg else multigap_chain_spec()
    targets = _proto(cfg, "target_energies", [0.0])
    res = run_qudit_memory(spec, coupling=float(_proto(cfg, "coupling", 0.01)),
                           target_energies=[float(t) for t in targets],
                           t_wait=float(_proto(cfg, "t_wait", 10.0)))
    prefix = os.path.join(outdir, output_prefix(cfg))
    path = f"{prefix}_qudit_memory.csv"
    with open(path, "w", newline="") as fh:
        import csv as _csv

        w = _csv.writer(fh)
        w.writerow(["channel_energy", "tau", "fidelity", "store_efficiency"])
        for ch in res.channels:
            w.writerow([f"{ch.energy:.17g}", f"{ch.tau:.17g}",
                        f"{ch.fidelity:.17g}", f"{ch.store_efficiency:.17g}"])
    return {
        "derived": {"n_edge_states": res.n_edge_states,
                    "channel_fidelities": [ch.fidelity for ch in res.channels]},
        "outputs": [path],
    }


def cmd_disorder_sweep(cfg, outdir, args):
    lam = float(_proto(cfg, "lambda", np.pi / 3))
    T_leg = float(_sched(cfg, "duration", 200.0))
    steps = int(_sched(cfg, "steps", 4000))
    kinds = _proto(cfg, "kinds")
    if kinds is None:
        kinds = [cfg.get("disorder", {}).get("kind", "correlated_angle")]
    protocol = braiding_ensemble_protocol(lam, T_leg, steps)
    prefix = os.path.join(outdir, output_prefix(cfg))
    outputs, finals = [], {}
    for kind in kinds:
        dspec = _disorder_spec(cfg, kind=kind)
        stats = run_ensemble(protocol, dspec, n_jobs=args.threads)
        path = f"{prefix}_ensemble_{kind}.csv"
        stats.to_csv(path)
        outputs.append(path)
        finals[kind] = {
            "mean_fidelity": float(stats.mean_fidelity[-1]),
            "stderr": float(stats.fidelity_stderr[-1]),
            "entropy": float(stats.entropy[-1]),
            "n_effective": stats.n_effective,
        }
    return {
        "derived": {"final": finals},
        "outputs": outputs,
        "seed": cfg.get("disorder", {}).get("seed", 0),
    }


def cmd_bloch(cfg, outdir, args):
    T = float(_sched(cfg, "duration", 10.0))
    steps = int(_sched(cfg, "steps", 4000))
    n0 = [float(x) for x in _proto(cfg, "n0", [0.0, 0.0, 1.0])]
    n1 = [float(x) for x in _proto(cfg, "n1", n0)]
    r0 = np.array([float(x) for x in _proto(cfg, "r0", [1.0, 0.0, 0.0])])
    curves = [PiecewiseLinear([0.0, T], [a, b]) for a, b in zip(n0, n1)]

    def n_curve(t):
        return np.array([c(t) for c in curves])

    times, rs = bloch_evolve(n_curve, r0, T, T / steps)
    prefix = os.path.join(outdir, output_prefix(cfg))
    path = f"{prefix}_bloch.csv"
    with open(path, "w", newline="") as fh:
        import csv as _csv

        w = _csv.writer(fh)
        w.writerow(["t", "rx", "ry", "rz"])
        stride = max(1, len(times) // 200)
        for k in range(0, len(times), stride):
            w.writerow([f"{times[k]:.17g}"] + [f"{v:.17g}" for v in rs[k]])
    return {"derived": {"final_r": rs[-1]}, "outputs": [path]}


COMMANDS = {
    "spectrum": cmd_spectrum,
    "bands": cmd_bands,
    "sqrt-check": cmd_sqrt_check,
    "transfer": cmd_transfer,
    "braid": cmd_braid,
    "memory": cmd_memory,
    "qudit-memory": cmd_qudit_memory,
    "disorder-sweep": cmd_disorder_sweep,
    "bloch": cmd_bloch,
}


def make_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="matryoshka",
        description="Sine-cosine topological chain simulations",
    )
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("config", help="TOML config (or a manifest JSON to replay)")
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override a scalar config field")
        p.add_argument("--output-dir", default=None)
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1)
    return ap


def main(argv=None) -> int:
    args = make_parser().parse_args(argv)
    try:
        cfg = apply_overrides(load_config(args.config), args.set)
        outdir = output_dir(cfg, args.output_dir)
        manifest = RunManifest(args.command, cfg).start()
        result = COMMANDS[args.command](cfg, outdir, args)
        manifest.derived = result.get("derived", {})
        manifest.outputs = [os.path.abspath(p) for p in result.get("outputs", [])]
        manifest.seed = result.get("seed")
        manifest.finish()
        path = os.path.join(outdir, f"{output_prefix(cfg)}_manifest.json")
        manifest.write(path)
        print(path)
        return 0
    except MatryoshkaError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc),
                   "exit_code": exc.exit_code}, sys.stderr)
        sys.stderr.write("\n")
        return exc.exit_code
    except FileNotFoundError as exc:
        json.dump({"error": "FileNotFoundError", "message": str(exc), "exit_code": 2},
                  sys.stderr)
        sys.stderr.write("\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
