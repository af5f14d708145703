"""Command-line entry points.

Exit codes: 0 success, 1 a report assertion failed, 2 solver failure,
3 invalid input. Every failure prints a JSON error object on stderr (and to
``error.json`` in ``--out`` when given).
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from importlib import resources
from pathlib import Path

import numpy as np
from scipy.sparse.linalg import ArpackError, ArpackNoConvergence

from . import __version__, experiments as ex
from .complex import betti_numbers
from .kernels import BACKEND
from .meshes import GENERATORS, generate, load_mesh, mesh_to_dict, mesh_from_dict
from .metric import volume
from .spectra import KernelMismatchError, SolverError, spectrum
from .gap import SubspacesTooFarError

EXIT_OK, EXIT_ASSERT, EXIT_SOLVER, EXIT_INPUT = 0, 1, 2, 3


class InputError(ValueError):
    pass


# ------------------------------------------------------------------ helpers


def _sha256(data):
    return hashlib.sha256(data).hexdigest()


def _canonical(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class RunManifest:
    """Provenance embedded in every output: command, input hashes, config echo, version."""

    def __init__(self, command, config=None):
        self.command = command
        self.config = config or {}
        self.inputs = {}
        self.started = time.perf_counter()

    def add_file(self, path):
        self.inputs[str(path)] = _sha256(Path(path).read_bytes())

    def add_spec(self, label, spec):
        self.inputs[label] = _sha256(_canonical(spec).encode())

    def to_dict(self):
        return {"command": self.command, "inputs": dict(sorted(self.inputs.items())),
                "config": self.config, "version": __version__}

    def timing(self):
        return {"command": self.command, "wall_seconds": time.perf_counter() - self.started,
                "backend": BACKEND}


def _write_outputs(out, stem, payload, tables, manifest):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    payload = dict(payload, manifest=manifest.to_dict())
    (out / f"{stem}.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    header = "# manifest: " + _canonical(manifest.to_dict()) + "\n"
    for name, text in tables.items():
        (out / f"{name}.csv").write_text(header + text)
    # wall time varies run to run, so it is kept out of the report itself
    (out / "timing.json").write_text(json.dumps(manifest.timing(), indent=2) + "\n")


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _threads(args):
    if args.threads is not None:
        n = args.threads
    else:
        env = os.environ.get("HODGE_SPECTRA_THREADS")
        try:
            n = int(env) if env else 1
        except ValueError as exc:
            raise InputError(f"HODGE_SPECTRA_THREADS must be an integer, got {env!r}") from exc
    if n < 1:
        raise InputError("thread count must be >= 1")
    return n


def _resolve_config(ref):
    path = Path(ref)
    if path.exists():
        return json.loads(path.read_text()), path
    name = ref if ref.endswith(".json") else ref + ".json"
    bundled = resources.files("hodge_spectra") / "configs" / name
    if bundled.is_file():
        return json.loads(bundled.read_text()), None
    raise InputError(f"config {ref!r} is neither a file nor a bundled config ({', '.join(bundled_configs())})")


def bundled_configs():
    root = resources.files("hodge_spectra") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def _load_mesh_spec(spec, manifest, label, metric_path=None):
    """A mesh from a file path or a ``{"kind": ..., "params": {...}}`` generator spec."""
    if isinstance(spec, str):
        if not Path(spec).exists():
            raise InputError(f"mesh file {spec!r} not found")
        manifest.add_file(spec)
        if metric_path:
            manifest.add_file(metric_path)
        return load_mesh(spec, metric_path)
    if isinstance(spec, dict) and "kind" in spec:
        manifest.add_spec(label, spec)
        return generate(spec["kind"], **spec.get("params", {}))
    raise InputError(f"invalid mesh specification for {label}: {spec!r}")


def _eps_list(text):
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise InputError(f"invalid --eps-list {text!r}") from exc


# ------------------------------------------------------------------ commands


def cmd_mesh_gen(args):
    params = {}
    for item in args.param or []:
        if "=" not in item:
            raise InputError(f"--param expects NAME=VALUE, got {item!r}")
        key, val = item.split("=", 1)
        params[key] = _parse_value(val)
    manifest = RunManifest("mesh-gen", {"kind": args.kind, "params": params})
    try:
        mesh = generate(args.kind, **params)
    except TypeError as exc:
        raise InputError(f"invalid parameters for {args.kind}: {exc}") from exc
    data = mesh_to_dict(mesh)
    data["manifest"] = manifest.to_dict()
    text = json.dumps(data, sort_keys=True)
    if args.out:
        Path(args.out).parent.mkdir(parents=True, exist_ok=True)
        Path(args.out).write_text(text + "\n")
    cx = mesh.complex
    summary = {"name": mesh.name, "dimension": cx.dim, "f_vector": list(cx.f_vector),
               "euler_characteristic": cx.euler_characteristic, "betti": list(betti_numbers(cx)),
               "regions": {k: len(v) for k, v in mesh.regions.items()}}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_spectrum(args):
    config = {"mesh": args.mesh, "metric": args.metric, "degree": args.degree, "bc": args.bc,
              "k": args.k, "seed": args.seed, "tol_cluster": args.tol_cluster}
    manifest = RunManifest("spectrum", config)
    mesh = _load_mesh_spec(args.mesh, manifest, "mesh", args.metric)
    if args.k < 0:
        raise InputError("--k must be nonnegative")
    rep = spectrum(mesh.complex, mesh.metric, args.degree, args.k, args.bc,
                   cluster_tol=args.tol_cluster, seed=args.seed)
    rep.metadata["volume"] = volume(mesh.complex, mesh.metric)
    payload = {"report": rep.to_dict()}
    _write_outputs(args.out, "spectrum", payload, {"spectrum": rep.to_csv()}, manifest)
    print(json.dumps({"degree": rep.degree, "kernel_dim": rep.kernel_dim,
                      "eigenvalues": [float(v) for v in rep.eigenvalues]}))
    return EXIT_OK


def _experiment_common(args, name):
    config, path = _resolve_config(args.config)
    if args.eps_list:
        config["epsilons"] = _eps_list(args.eps_list)
    if args.k is not None:
        config["k"] = args.k
    if args.degree is not None:
        config["degrees"] = [args.degree]
        config["degree"] = args.degree
    if args.mesh:
        config["mesh"] = args.mesh
    config["seed"] = args.seed if args.seed is not None else config.get("seed", 0)
    manifest = RunManifest(name, config)
    if path is not None:
        manifest.add_file(path)
    return config, manifest


def _finish(args, report, manifest):
    _write_outputs(args.out, report.experiment, report.to_dict(), report.tables, manifest)
    for a in report.assertions:
        tag = ("PASS" if a.passed else "FAIL") + (" (info)" if a.informational else "")
        print(f"{tag}  {a.name}  {a.detail}")
    return EXIT_OK if report.passed else EXIT_ASSERT


def _subdomain(mesh, config):
    region = config.get("region", "U")
    try:
        return mesh.subdomain(region)
    except KeyError as exc:
        raise InputError(str(exc)) from exc


def cmd_squeeze(args):
    config, manifest = _experiment_common(args, "squeeze")
    mesh = _load_mesh_spec(config["mesh"], manifest, "mesh", args.metric)
    sched = ex.SqueezeSchedule(config["epsilons"], config.get("degrees", [0]), config.get("k", 5))
    tol = config.get("tolerances", {})
    report = ex.run_squeeze(mesh, _subdomain(mesh, config), sched, threads=_threads(args),
                            seed=config["seed"], deviation_tol=tol.get("deviation", 0.10),
                            enforce_outside_range=config.get("enforce_outside_range", True))
    return _finish(args, report, manifest)


def cmd_floor(args):
    config, manifest = _experiment_common(args, "floor")
    mesh = _load_mesh_spec(config["mesh"], manifest, "mesh", args.metric)
    tol = config.get("tolerances", {})
    report = ex.run_conformal_floor(mesh, _subdomain(mesh, config), config["epsilons"],
                                    threads=_threads(args), seed=config["seed"],
                                    floor_ratio=tol.get("floor_ratio", 0.25),
                                    contrast_ratio=tol.get("contrast_ratio", 0.25))
    return _finish(args, report, manifest)


def cmd_kunneth(args):
    config, manifest = _experiment_common(args, "kunneth")
    a, b = (_load_mesh_spec(f, manifest, f"factor{i}") for i, f in enumerate(config["factors"]))
    report = ex.run_kunneth(a, b, k=config.get("k", 20),
                            rtol=config.get("tolerances", {}).get("relative", 1e-9),
                            threads=_threads(args))
    return _finish(args, report, manifest)


def cmd_duality(args):
    config, manifest = _experiment_common(args, "duality")
    meshes = [_load_mesh_spec(m, manifest, f"level{i}") for i, m in enumerate(config["meshes"])]
    tol = config.get("tolerances", {})
    report = ex.run_duality(meshes, p=config.get("degree", 0), k=config.get("k", 6),
                            tol=tol.get("deviation", 0.05), threads=_threads(args),
                            mirror_tol=tol.get("mirror", 1e-9))
    return _finish(args, report, manifest)


def cmd_smoothing(args):
    config, manifest = _experiment_common(args, "smoothing")
    mesh = _load_mesh_spec(config["mesh"], manifest, "mesh", args.metric)
    eps = config["epsilons"][-1] if "epsilons" in config else config["epsilon"]
    report = ex.run_smoothing(mesh, _subdomain(mesh, config), eps, config.get("j", [1, 2, 3, 4, 5]),
                              p=config.get("degree", 0), n_pack=config.get("n", 5),
                              width=config.get("width", 6), seed=config["seed"],
                              threads=_threads(args))
    return _finish(args, report, manifest)


def build_parser():
    parser = argparse.ArgumentParser(prog="hodge-spectra",
                                     description="Hodge Laplacian spectra on metrized simplicial complexes.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh-gen", help="generate a mesh JSON file")
    p.add_argument("kind", choices=sorted(GENERATORS))
    p.add_argument("--param", action="append", metavar="NAME=VALUE",
                   help="generator parameter, value parsed as JSON (repeatable)")
    p.add_argument("--out", help="output mesh file")
    p.set_defaults(func=cmd_mesh_gen)

    p = sub.add_parser("spectrum", help="coexact spectrum of one degree")
    p.add_argument("--mesh", required=True)
    p.add_argument("--metric", help="separate edge-length JSON")
    p.add_argument("--degree", type=int, default=0)
    p.add_argument("--bc", choices=["absolute", "relative"], default="absolute")
    p.add_argument("--k", type=int, default=6)
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol-cluster", type=float, default=1e-6)
    p.add_argument("--threads", type=int)
    p.set_defaults(func=cmd_spectrum)

    for name, func, helptext in [
        ("squeeze", cmd_squeeze, "conformal squeezing toward a subdomain"),
        ("floor", cmd_floor, "middle-degree conformal floor"),
        ("kunneth", cmd_kunneth, "product spectra against factor sums"),
        ("duality", cmd_duality, "Poincaré duality under refinement"),
        ("smoothing", cmd_smoothing, "smoothed against sharp conformal factors"),
    ]:
        p = sub.add_parser(name, help=helptext)
        p.add_argument("--config", required=True,
                       help="config file or bundled config name (see `list-configs`)")
        p.add_argument("--mesh", help="override the mesh file of the config")
        p.add_argument("--metric", help="separate edge-length JSON for --mesh")
        p.add_argument("--degree", type=int)
        p.add_argument("--k", type=int)
        p.add_argument("--eps-list", help="comma separated, strictly decreasing")
        p.add_argument("--out", default="out")
        p.add_argument("--threads", type=int)
        p.add_argument("--seed", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("list-configs", help="list bundled experiment configs")
    p.set_defaults(func=lambda args: print("\n".join(bundled_configs())) or EXIT_OK)
    return parser


def _error(args, kind, exc, code):
    obj = {"error": {"type": kind, "exception": type(exc).__name__, "message": str(exc), "exit_code": code}}
    text = json.dumps(obj, sort_keys=True)
    print(text, file=sys.stderr)
    out = getattr(args, "out", None)
    if out and getattr(args, "command", None) != "mesh-gen":
        try:
            Path(out).mkdir(parents=True, exist_ok=True)
            (Path(out) / "error.json").write_text(text + "\n")
        except OSError:
            pass
    return code


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        if exc.code in (0, None):
            return 0
        print(json.dumps({"error": {"type": "usage", "message": "invalid command line",
                                    "exit_code": EXIT_INPUT}}), file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except (SolverError, KernelMismatchError, ArpackError, ArpackNoConvergence,
            SubspacesTooFarError, np.linalg.LinAlgError) as exc:
        return _error(args, "solver", exc, EXIT_SOLVER)
    except (InputError, ValueError, KeyError, TypeError, FileNotFoundError, json.JSONDecodeError) as exc:
        return _error(args, "input", exc, EXIT_INPUT)


if __name__ == "__main__":
    sys.exit(main())
