"""Command-line driver: simulate, fit, eval, summarize.

Every command writes a ``manifest.json`` next to its outputs holding the
resolved parameters, input digests and tool version.  Outputs contain no
timestamps, so a fixed seed and fixed inputs give identical bytes.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .greedy import SearchConfig, greedy_fit
from .icl import icl, time_cluster_mean_rates
from .ingest import (
    PREBINNED_HEADER,
    BinningSpec,
    aggregate_bins,
    parse_contact_log,
    read_prebinned_csv,
    write_node_map,
    write_prebinned_csv,
)
from .metrics import adjusted_rand_index
from .simulate import GenerativeSpec, additive_rates, simulate
from .tensor import Hyperparameters, Mode, build_tensor, compute_block_stats

log = logging.getLogger("nssbm")


class CliError(Exception):
    pass


def _floats(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _dump_json(obj, path: Path):
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _write_manifest(out: Path, command: str, params: dict, inputs=(), seed=None,
                    name: str = "manifest.json"):
    manifest = {
        "command": command,
        "parameters": params,
        "inputs": {p.name: _digest(p) for p in inputs},
        "seed": seed,
        "version": __version__,
    }
    _dump_json(manifest, out / name)


def _hyper(args) -> Hyperparameters:
    return Hyperparameters(a=args.a, b=args.b, alpha=args.alpha, gamma=args.gamma, delta=args.delta)


# simulate -----------------------------------------------------------------

def cmd_simulate(args) -> int:
    if args.rates_file:
        rates = np.asarray(json.loads(Path(args.rates_file).read_text()), dtype=np.float64)
    else:
        if not (args.s1 and args.s2 and args.s3):
            raise CliError("give --s1/--s2/--s3 or --rates-file")
        rates = additive_rates(args.s1, args.s2, args.s3)
    if rates.ndim != 3:
        raise CliError(f"rate grid must be K x K x D, got shape {rates.shape}")
    K, _, D = rates.shape
    if args.k is not None and args.k != K:
        raise CliError(f"--k {args.k} does not match rate grid K={K}")
    if args.d is not None and args.d != D:
        raise CliError(f"--d {args.d} does not match rate grid D={D}")
    spec = GenerativeSpec(num_nodes=args.nodes, num_bins=args.bins, rates=rates,
                          node_weights=args.node_weights, time_weights=args.time_weights,
                          delta=args.delta, seed=args.seed, mode=args.mode)
    tensor, c, y = simulate(spec)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "events.csv", "w", newline="") as fh:
        write_prebinned_csv(tensor, fh)
    truth = {
        "mode": spec.mode.value,
        "num_nodes": spec.num_nodes,
        "num_bins": spec.num_bins,
        "delta": spec.delta,
        "node_labels": c.tolist(),
        "time_labels": y.tolist(),
        "rates": rates.tolist(),
        "seed": args.seed,
    }
    _dump_json(truth, out / "truth.json")
    _write_manifest(out, "simulate", {
        "nodes": args.nodes, "bins": args.bins, "rates": rates.tolist(),
        "node_weights": spec.node_weights.tolist(), "time_weights": spec.time_weights.tolist(),
        "delta": spec.delta, "mode": spec.mode.value,
    }, seed=args.seed)
    print(f"wrote {out / 'events.csv'} ({tensor.nnz} cells, {tensor.total_count} events)")
    return 0


# fit ----------------------------------------------------------------------

def _is_prebinned(path: Path) -> bool:
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line and not line.startswith("#"):
                return [f.strip() for f in line.split(",")] == PREBINNED_HEADER
    return False


def _resolve_mode(args, path: Path, prebinned: bool) -> Mode:
    if args.mode != "auto":
        return Mode(args.mode)
    if prebinned:
        truth = Path(args.truth) if args.truth else path.with_name("truth.json")
        if truth.exists():
            return Mode(json.loads(truth.read_text())["mode"])
    return Mode.UNDIRECTED


def load_tensor(args):
    """Read the fit input; returns ``(tensor, node map or None, binning)``."""
    path = Path(args.input)
    if not path.exists():
        raise CliError(f"input file {path} not found")
    prebinned = _is_prebinned(path)
    mode = _resolve_mode(args, path, prebinned)
    if prebinned:
        with open(path) as fh:
            records = read_prebinned_csv(fh)
        n = args.num_nodes or 1 + max((max(r.source, r.target) for r in records), default=0)
        u = args.num_bins or 1 + max((r.bin for r in records), default=0)
        return build_tensor(records, n, u, mode), None, None
    binning = BinningSpec(origin=args.origin, bin_width=args.bin_width,
                          num_bins=args.num_bins or 96, drop_out_of_range=not args.strict_range)
    with open(path) as fh:
        events, node_map = parse_contact_log(fh)
    n = max(args.num_nodes or 0, len(node_map), 1)
    tensor = aggregate_bins(events, binning, num_nodes=n, mode=mode)
    return tensor, node_map, binning


def cmd_fit(args) -> int:
    path = Path(args.input)
    tensor, node_map, binning = load_tensor(args)
    h = _hyper(args)
    cfg = SearchConfig(k_max=min(args.kmax, tensor.num_nodes), d_max=min(args.dmax, tensor.num_bins),
                       max_sweeps=args.max_sweeps, num_restarts=args.restarts, seed=args.seed)
    fit = greedy_fit(tensor, h, cfg)

    check = icl(tensor, fit.node_partition, fit.time_partition, h)
    if check != fit.icl:
        raise CliError(f"ICL revalidation failed: {fit.icl} vs {check}")
    stats = compute_block_stats(tensor, fit.node_partition, fit.time_partition)
    kinds: dict[str, int] = {}
    for entry in fit.trace:
        kinds[entry.kind] = kinds.get(entry.kind, 0) + 1
    result = {
        "mode": tensor.mode.value,
        "num_nodes": tensor.num_nodes,
        "num_bins": tensor.num_bins,
        "total_count": tensor.total_count,
        "K": fit.K,
        "D": fit.D,
        "node_labels": fit.node_partition.labels.tolist(),
        "time_labels": fit.time_partition.labels.tolist(),
        "icl": {"total": fit.icl.total, "emission_term": fit.icl.emission_term,
                "label_term": fit.icl.label_term},
        "hyperparameters": {"a": h.a, "b": h.b, "alpha": h.alpha, "gamma": h.gamma, "delta": h.delta},
        "rates": fit.rates.rates.tolist(),
        "S": stats.S.tolist(),
        "R": stats.R.tolist(),
        "bin_totals": tensor.bin_totals().tolist(),
        "restart_id": fit.restart_id,
        "restart_icls": fit.restart_icls,
        "trace_summary": {
            "accepted_moves": len(fit.trace),
            "by_kind": kinds,
            "sweeps": (fit.trace[-1].sweep + 1) if fit.trace else 0,
        },
        "trace": [[e.sweep, e.kind, e.delta, e.icl_after] for e in fit.trace],
    }
    if node_map is not None:
        result["node_ids"] = node_map.raw_ids()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    _dump_json(result, out / "fit.json")
    params = {
        "hyperparameters": result["hyperparameters"],
        "search": {"k_max": cfg.k_max, "d_max": cfg.d_max, "max_sweeps": cfg.max_sweeps,
                   "num_restarts": cfg.num_restarts, "improvement_epsilon": cfg.improvement_epsilon},
        "mode": tensor.mode.value,
    }
    if binning is not None:
        params["binning"] = {"origin": binning.origin, "bin_width": binning.bin_width,
                             "num_bins": binning.num_bins,
                             "drop_out_of_range": binning.drop_out_of_range}
        with open(out / "node_map.csv", "w", newline="") as fh:
            write_node_map(node_map, fh)
    _write_manifest(out, "fit", params, inputs=[path], seed=args.seed)
    print(f"K={fit.K} D={fit.D} ICL={fit.icl.total:.6f} "
          f"(emission {fit.icl.emission_term:.6f}, labels {fit.icl.label_term:.6f})")
    return 0


# eval ---------------------------------------------------------------------

def _labels(path: str) -> dict:
    data = json.loads(Path(path).read_text())
    try:
        return {"node": data["node_labels"], "time": data["time_labels"]}
    except KeyError as exc:
        raise CliError(f"{path}: missing field {exc}") from None


def cmd_eval(args) -> int:
    pred, truth = _labels(args.pred), _labels(args.truth)
    for axis in ("node", "time"):
        if len(pred[axis]) != len(truth[axis]):
            raise CliError(f"{axis} labels differ in length: "
                           f"{len(pred[axis])} vs {len(truth[axis])}")
    out = {"ari_nodes": adjusted_rand_index(pred["node"], truth["node"]),
           "ari_time": adjusted_rand_index(pred["time"], truth["time"])}
    print(json.dumps(out, sort_keys=True))
    return 0


# summarize ----------------------------------------------------------------

SUMMARY_FIELDS = ("mode", "K", "D", "node_labels", "time_labels", "rates", "S", "R", "bin_totals")


def cmd_summarize(args) -> int:
    path = Path(args.fit)
    fit = json.loads(path.read_text())
    missing = [f for f in SUMMARY_FIELDS if f not in fit]
    if missing:
        raise CliError(f"{path}: missing fields {', '.join(missing)}")
    mode = Mode(fit["mode"])
    S, R, rates = (np.asarray(fit[k]) for k in ("S", "R", "rates"))
    h = Hyperparameters(**fit.get("hyperparameters", {}))
    out = Path(args.out) if args.out else path.parent
    out.mkdir(parents=True, exist_ok=True)

    K, _, D = S.shape
    with open(out / "block_rates.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["k", "g", "d", "S", "R", "rate"])
        for k in range(K):
            for g in range(k if mode is Mode.UNDIRECTED else 0, K):
                for d in range(D):
                    w.writerow([k, g, d, int(S[k, g, d]), int(R[k, g, d]), repr(float(rates[k, g, d]))])
    with open(out / "time_clusters.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["bin", "cluster", "total_interactions"])
        for u, (d, total) in enumerate(zip(fit["time_labels"], fit["bin_totals"])):
            w.writerow([u, d, total])
    ids = fit.get("node_ids", list(range(len(fit["node_labels"]))))
    with open(out / "node_clusters.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["node", "raw_id", "cluster"])
        for i, (raw, k) in enumerate(zip(ids, fit["node_labels"])):
            w.writerow([i, raw, k])
    means = time_cluster_mean_rates(S, R, h, mode)
    for d, m in enumerate(means):
        print(f"time cluster {d}: {fit['time_labels'].count(d)} bins, mean rate {m:.6f}")
    _write_manifest(out, "summarize", {}, inputs=[path], name="summary_manifest.json")
    return 0


# entry point --------------------------------------------------------------

def _add_hyper(p):
    p.add_argument("--a", type=float, default=1.0, help="Gamma prior shape")
    p.add_argument("--b", type=float, default=1.0, help="Gamma prior rate")
    p.add_argument("--alpha", type=float, default=1.0, help="Dirichlet concentration, nodes")
    p.add_argument("--gamma", type=float, default=1.0, help="Dirichlet concentration, time")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nssbm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample a dataset from the generative model")
    p.add_argument("--nodes", type=int, required=True)
    p.add_argument("--bins", type=int, required=True)
    p.add_argument("--k", type=int)
    p.add_argument("--d", type=int)
    p.add_argument("--s1", type=_floats)
    p.add_argument("--s2", type=_floats)
    p.add_argument("--s3", type=_floats)
    p.add_argument("--rates-file", help="JSON K x K x D rate grid")
    p.add_argument("--node-weights", type=_floats)
    p.add_argument("--time-weights", type=_floats)
    p.add_argument("--delta", type=float, default=1.0)
    p.add_argument("--mode", choices=[m.value for m in Mode], default="directed")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", help="greedy ICL fit of a contact log or pre-binned CSV")
    p.add_argument("input")
    p.add_argument("--mode", choices=["auto", "directed", "undirected"], default="auto")
    p.add_argument("--truth", help="truth.json whose mode applies to a pre-binned CSV")
    p.add_argument("--origin", type=float, default=0.0, help="timestamp of bin 0 start")
    p.add_argument("--bin-width", type=float, default=900.0, help="seconds per bin")
    p.add_argument("--num-bins", type=int)
    p.add_argument("--num-nodes", type=int)
    p.add_argument("--strict-range", action="store_true",
                   help="fail on events outside the binning window instead of dropping them")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--dmax", type=int, default=10)
    _add_hyper(p)
    p.add_argument("--delta", type=float, default=1.0, help="bin width in model units")
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-sweeps", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=".")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("eval", help="adjusted Rand index of a fit against truth")
    p.add_argument("--pred", required=True)
    p.add_argument("--truth", required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("summarize", help="export plot-ready CSVs from fit.json")
    p.add_argument("--fit", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (CliError, ValueError, OSError) as exc:
        print(f"nssbm {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
