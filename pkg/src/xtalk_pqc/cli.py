"""Command line entry point: characterize, schedule, build-ansatz, sweep and vqe."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Sequence

from . import __version__
from .ansatz import FAMILIES, PqcConfig, build, family_configs
from .circuit import CircuitError, read_circuit, write_circuit
from .device import DeviceError, default_device, device_to_dict, load_device
from .metrics import circuit_stats, entanglement_entropy, expressibility, grad_variance, two_qubit_depth
from .rb import DEFAULT_LENGTHS, CharacterizationError, FitError, characterize_crosstalk
from .scheduler import LIFETIME_MODES, CostModel, ScheduleError, first_entangling_layer, xtalk_schedule
from .simulator import MODES, NoiseSpec, SimulationError
from .vqa import HamiltonianError, SpsaConfig, load_hamiltonian, run_vqe, shipped_hamiltonian

log = logging.getLogger("xtalk_pqc")

EXIT_OK, EXIT_NUMERIC, EXIT_INPUT = 0, 1, 2
METRICS = ("stats", "expressibility", "entropy", "gradvar")
INPUT_ERRORS = (DeviceError, CircuitError, HamiltonianError, ValueError, FileNotFoundError, json.JSONDecodeError)


class UsageError(Exception):
    pass


def _ints(text: str) -> list[int]:
    try:
        return [int(t) for t in text.replace(" ", "").split(",") if t]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from None


def _edges(text: str) -> list[tuple[int, int]]:
    """``0,1;2,3`` -> [(0, 1), (2, 3)]."""
    out = []
    for chunk in text.split(";"):
        q = _ints(chunk)
        if len(q) != 2:
            raise argparse.ArgumentTypeError(f"edge {chunk!r} needs two qubits")
        out.append((q[0], q[1]))
    return out


def _pairs(text: str) -> list[tuple[tuple[int, int], tuple[int, int]]]:
    """``0,1;2,3|1,2;3,5`` -> two edge pairs."""
    out = []
    for chunk in text.split("|"):
        edges = _edges(chunk)
        if len(edges) != 2:
            raise argparse.ArgumentTypeError(f"pair {chunk!r} needs two edges separated by ';'")
        out.append(tuple(edges))
    return out


def default_threads() -> int:
    env = os.environ.get("XTALK_PQC_THREADS")
    if env:
        try:
            return max(int(env), 1)
        except ValueError:
            log.warning("ignoring non-integer XTALK_PQC_THREADS=%r", env)
    return os.cpu_count() or 1


def _device(args):
    return load_device(args.device) if args.device else default_device()


def _write_csv(path: Path, header: Sequence[str], rows) -> None:
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, tuple):
        return "-".join(map(str, x))
    return "" if x is None else str(x)


# -- commands ----------------------------------------------------------------

def cmd_characterize(args, out: Path) -> list[str]:
    device = _device(args)
    spec = NoiseSpec(args.mode, device)
    try:
        res = characterize_crosstalk(
            device, spec, args.lengths, args.k, args.shots, args.seed,
            edges=args.edges, pairs=args.pairs, allow_partial=args.allow_partial,
        )
    except CharacterizationError as exc:
        raise FitError(str(exc)) from exc
    measured = device.with_measured(res.table)
    doc = device_to_dict(measured)
    doc["independent_epc"] = [{"qubits": list(e), "epc": v} for e, v in sorted(res.independent.items())]
    (out / "xtalk_table.json").write_text(json.dumps(doc, indent=1) + "\n")
    _write_csv(
        out / "decays.csv",
        ("edge", "paired_edge", "sequence", "m", "mean_survival"),
        [(_fmt(e), _fmt(p) or "none", kind, m, repr(y)) for e, p, kind, m, y in res.rows],
    )
    _write_csv(
        out / "ratios.csv",
        ("edge", "paired_edge", "conditional_over_independent"),
        [(_fmt(a), _fmt(b), repr(r)) for (a, b), r in sorted(res.ratios.items())],
    )
    for what, why in res.failures.items():
        log.warning("fit failed for %s: %s", what, why)
    return ["xtalk_table.json", "decays.csv", "ratios.csv"]


def cmd_schedule(args, out: Path) -> list[str]:
    device = _device(args)
    if args.circuit:
        circ = read_circuit(Path(args.circuit).read_text())
        layer = [circ.device_edge(op) for op in first_entangling_layer(circ)]
    elif args.edges:
        layer = args.edges
    else:
        raise UsageError("give --circuit or --edges")
    cost = CostModel(args.omega, args.threshold, args.lifetime, args.paper_literal_sign, args.keep_order)
    sched = xtalk_schedule(layer, device, cost=cost, greedy_fallback=args.greedy)
    (out / "schedule.json").write_text(json.dumps(sched.to_dict(), indent=1) + "\n")
    print(f"R={sched.R} objective={sched.objective_value:.6g}")
    return ["schedule.json"]


def _config(args, device, family=None) -> PqcConfig:
    return PqcConfig(family or args.family, args.n, args.layers, device, args.level, args.m, args.threshold)


def cmd_build(args, out: Path) -> list[str]:
    device = _device(args)
    cfg = _config(args, device)
    circ = build(cfg)
    name = f"{cfg.name}_n{cfg.n}_L{cfg.L}.txt"
    (out / name).write_text(write_circuit(circ))
    stats = circuit_stats(circ, device)
    print(f"{cfg.name}: {stats.total_gates} gates, {stats.two_qubit_gates} cx, {stats.duration_ns:.0f} ns")
    return [name]


def _sweep_row(metric, name, cfg: PqcConfig, args, seed, base_stats):
    circ = build(cfg)
    if metric == "stats":
        s = circuit_stats(circ, cfg.device)
        ref = base_stats(cfg.n, cfg.L)
        return [s.total_gates, s.two_qubit_gates, repr(s.duration_ns), s.depth,
                two_qubit_depth(circ), repr(ref.duration_ns / s.duration_ns)]
    if metric == "expressibility":
        e = expressibility(circ, args.pairs, args.bins, seed)
        return [repr(e.kl), e.samples, e.bins]
    if metric == "entropy":
        e = entanglement_entropy(circ, None, args.samples, seed)
        return [repr(e.mean_s), repr(e.std_s), _fmt(e.partition)]
    spec = NoiseSpec(args.mode, cfg.device)
    shots = None if args.mode == "ideal" and args.exact else args.shots
    g = grad_variance(circ, args.cost, 0, args.samples, spec, shots, seed)
    lo, hi = g.ci(seed=seed)
    return [repr(g.variance), repr(lo), repr(hi), g.cost_kind, g.n_samples]


SWEEP_HEADERS = {
    "stats": ("total_gates", "two_qubit_gates", "duration_ns", "depth", "cx_depth", "speedup_vs_base1"),
    "expressibility": ("kl", "pairs", "bins"),
    "entropy": ("mean_entropy", "std_entropy", "partition"),
    "gradvar": ("variance", "ci_low", "ci_high", "cost", "samples"),
}


def cmd_sweep(args, out: Path) -> list[str]:
    device = _device(args)
    wanted = list(family_configs(2, 1, device)) if args.families == ["all"] else args.families
    cache: dict[tuple[int, int], object] = {}

    def base_stats(n, L):
        if (n, L) not in cache:
            cache[(n, L)] = circuit_stats(build(PqcConfig("base1", n, L, device)), device)
        return cache[(n, L)]

    written = []
    for metric in args.metrics:
        jobs = []
        for n in args.n:
            for L in args.layers:
                for name in wanted:
                    jobs.append((n, L, name, [args.seed, n, L, len(jobs)]))

        def run(job):
            n, L, name, seed = job
            try:
                cfg = family_configs(n, L, device, args.m)[name]
                return [name, n, L, *_sweep_row(metric, name, cfg, args, seed, base_stats), ""]
            except Exception as exc:  # recorded per row, the sweep continues
                log.warning("%s n=%d L=%d %s failed: %s", name, n, L, metric, exc)
                return [name, n, L, *[""] * len(SWEEP_HEADERS[metric]), f"{type(exc).__name__}: {exc}"]

        if metric == "stats":
            for n in args.n:
                for L in args.layers:
                    try:
                        base_stats(n, L)
                    except Exception:  # the affected rows report it
                        pass
        with ThreadPoolExecutor(max_workers=args.threads) as pool:
            rows = list(pool.map(run, jobs))
        fname = f"sweep_{metric}.csv"
        _write_csv(out / fname, ("family", "n", "L", *SWEEP_HEADERS[metric], "error"), rows)
        written.append(fname)
    return written


def cmd_vqe(args, out: Path) -> list[str]:
    device = _device(args)
    path = Path(args.hamiltonian)
    h = load_hamiltonian(path) if path.suffix == ".json" or path.exists() else shipped_hamiltonian(args.hamiltonian)
    args.n = h.n
    cfg = _config(args, device)
    spec = NoiseSpec(args.mode, device)
    shots = None if args.mode == "ideal" and args.exact else args.shots
    spsa = SpsaConfig(max_iter=args.iters, seed=args.seed)
    trace = run_vqe(h, cfg, spec, shots, spsa, args.theta0)
    exact = trace.exact_ground
    _write_csv(
        out / "vqe_trace.csv",
        ("iteration", "energy", "exact_ground"),
        [(k, repr(e), repr(exact) if exact is not None else "") for k, e in enumerate(trace.energies)],
    )
    summary = {
        "family": cfg.name,
        "best_energy": trace.best_energy,
        "exact_ground": exact,
        "evaluations": trace.evaluations,
        "aborted": trace.aborted,
        "final_theta": [float(t) for t in trace.final_theta],
    }
    (out / "vqe_summary.json").write_text(json.dumps(summary, indent=1) + "\n")
    print(f"{cfg.name}: best {trace.best_energy:.6f}" + (f" (exact {exact:.6f})" if exact is not None else ""))
    if trace.aborted:
        raise SimulationError(trace.aborted)
    return ["vqe_trace.csv", "vqe_summary.json"]


# -- parser ------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0)
    common.add_argument("--out", default="out", help="output directory")
    common.add_argument("--device", help="device JSON (default: shipped 16-qubit device)")
    common.add_argument("--threads", type=int, default=None, help="worker cap (env XTALK_PQC_THREADS)")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="xtalk-pqc", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("--manifest", help="re-run the command recorded in a manifest.json (must come first)")
    sub = p.add_subparsers(dest="command")

    c = sub.add_parser("characterize", parents=[common], help="IRB/SRB crosstalk characterization")
    c.add_argument("--lengths", type=_ints, default=list(DEFAULT_LENGTHS))
    c.add_argument("--k", type=int, default=10)
    c.add_argument("--shots", type=int, default=10_000)
    c.add_argument("--edges", type=_edges, help="restrict to edges, e.g. '0,1;2,3'")
    c.add_argument("--pairs", type=_pairs,
                   help="restrict SRB pairs, e.g. '0,1;2,3|1,2;3,5'")
    c.add_argument("--mode", choices=MODES, default="xtalk_enabled")
    c.add_argument("--allow-partial", action="store_true")

    s = sub.add_parser("schedule", parents=[common], help="crosstalk-adaptive layer scheduling")
    s.add_argument("--circuit", help="circuit text file; its first entangling layer is scheduled")
    s.add_argument("--edges", type=_edges, help="layer as device edges, e.g. '0,1;2,3;1,2'")
    s.add_argument("--omega", type=float, default=0.5)
    s.add_argument("--threshold", type=float, default=1.0)
    s.add_argument("--lifetime", choices=LIFETIME_MODES, default="layer")
    s.add_argument("--paper-literal-sign", action="store_true", help="subtract the decoherence term")
    s.add_argument("--keep-order", action="store_true")
    s.add_argument("--greedy", action="store_true", help="allow greedy scheduling of large layers")

    def ansatz_flags(q, need_n=True):
        q.add_argument("--family", choices=FAMILIES, default="xtalk")
        q.add_argument("--level", choices=("high", "medium", "low"), default="medium")
        if need_n:
            q.add_argument("--n", type=int, required=True)
        q.add_argument("--layers", type=int, default=5)
        q.add_argument("--m", type=int, default=2)
        q.add_argument("--threshold", type=float, default=1.0)

    b = sub.add_parser("build-ansatz", parents=[common], help="emit a PQC as circuit text")
    ansatz_flags(b)

    w = sub.add_parser("sweep", parents=[common], help="metrics over families and sizes")
    w.add_argument("--n", type=_ints, required=True)
    w.add_argument("--layers", type=_ints, required=True)
    w.add_argument("--m", type=int, default=2)
    w.add_argument("--families", type=lambda t: t.split(","), default=["all"])
    w.add_argument("--metrics", type=lambda t: t.split(","), default=["stats"])
    w.add_argument("--pairs", type=int, default=5000, help="fidelity pairs for expressibility")
    w.add_argument("--bins", type=int, default=75)
    w.add_argument("--samples", type=int, default=200, help="parameter samples for entropy/gradvar")
    w.add_argument("--shots", type=int, default=4000)
    w.add_argument("--cost", default="global", help="'global' or the number of cost qubits")
    w.add_argument("--mode", choices=MODES, default="ideal")
    w.add_argument("--exact", action="store_true", help="exact ideal costs instead of shots")

    v = sub.add_parser("vqe", parents=[common], help="SPSA VQE on a Pauli Hamiltonian")
    v.add_argument("--hamiltonian", default="h2_bk_4q", help="JSON path or shipped name")
    ansatz_flags(v, need_n=False)
    v.add_argument("--mode", choices=MODES, default="ideal")
    v.add_argument("--shots", type=int, default=4000)
    v.add_argument("--exact", action="store_true")
    v.add_argument("--iters", type=int, default=100)
    v.add_argument("--theta0", choices=("reference", "zeros", "uniform"), default="reference")
    return p


COMMANDS = {
    "characterize": cmd_characterize,
    "schedule": cmd_schedule,
    "build-ansatz": cmd_build,
    "sweep": cmd_sweep,
    "vqe": cmd_vqe,
}


def _validate(args) -> None:
    if args.command == "sweep":
        bad = [f for f in args.families if f != "all" and f not in family_configs(2, 1, default_device())]
        if bad:
            raise UsageError(f"unknown families {bad}")
        bad = [m for m in args.metrics if m not in METRICS]
        if bad:
            raise UsageError(f"unknown metrics {bad}; choose from {METRICS}")
        if args.cost != "global":
            try:
                args.cost = int(args.cost)
            except ValueError:
                raise UsageError("--cost must be 'global' or an integer") from None


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if argv[:1] == ["--manifest"] and len(argv) > 1:
        # replay the recorded argv; trailing flags override it
        try:
            recorded = json.loads(Path(argv[1]).read_text())["argv"]
            if not isinstance(recorded, list) or not all(isinstance(a, str) for a in recorded):
                raise TypeError("argv must be a list of strings")
        except (OSError, KeyError, TypeError, json.JSONDecodeError) as exc:
            print(f"error: unreadable manifest: {exc}", file=sys.stderr)
            return EXIT_INPUT
        return main(recorded + argv[2:])
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    if not args.command:
        parser.print_help()
        return EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    args.threads = args.threads or default_threads()
    out = Path(args.out)
    try:
        _validate(args)
        out.mkdir(parents=True, exist_ok=True)
        files = COMMANDS[args.command](args, out)
        code = EXIT_OK
    except (FitError, ScheduleError, SimulationError, FloatingPointError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        files, code = [], EXIT_NUMERIC
    except (UsageError, *INPUT_ERRORS) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    manifest = {
        "tool": "xtalk-pqc",
        "version": __version__,
        "command": args.command,
        "seed": args.seed,
        "argv": [a for a in argv],
        "config": {k: (v if isinstance(v, (int, float, str, bool, type(None))) else repr(v))
                   for k, v in sorted(vars(args).items()) if k not in ("manifest", "threads", "verbose")},
        "outputs": files,
        "exit_code": code,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1) + "\n")
    return code


if __name__ == "__main__":
    raise SystemExit(main())
