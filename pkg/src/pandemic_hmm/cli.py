"""
Command line driver: ``ingest``, ``label``, ``train``, ``decode`` and ``report``.

Every run writes its outputs plus one ``manifest.json`` into ``--out``.
Data files carry no timestamps, so the same inputs and flags reproduce them
byte for byte; the manifest records the wall-clock time.
"""

from __future__ import annotations

import argparse
import datetime as dt
import hashlib
import io
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from .core_model import HmmModel, ZeroRowPolicy
from .inference import region_transition_profiles, viterbi_decode, write_paths_csv
from .ingest import (
    Mode, build_delta_series, parse_snapshot_csv, series_from_deltas, validate_series,
    write_delta_csv,
)
from .learner import (
    bag_dataset, daily_state_distribution, fit_baum_welch, fit_heuristic, refine,
    window_bounds, write_trace_csv,
)
from .quantizer import (
    LabeledState, RuleConfig, available_rules, label_dataset, read_labels_csv,
    write_labels_csv,
)
from .reporting import distribution_timeseries, render_dot, status_csv, status_table, status_text

EXIT_OK, EXIT_INVALID, EXIT_USAGE = 0, 1, 2


def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _date(s: str) -> dt.date:
    try:
        return dt.date.fromisoformat(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{s!r} is not an ISO date (YYYY-MM-DD)") from None


def _load_dataset(path: Path, mode: str):
    records = parse_snapshot_csv(path.read_text(encoding="utf-8"), mode)
    if Mode(mode) is Mode.CUMULATIVE:
        return build_delta_series(records)
    return series_from_deltas(records)


def _warn(msg: str) -> None:
    print(f"warning: {msg}", file=sys.stderr)


class Run:
    """Collects outputs and the manifest for one invocation."""

    def __init__(self, args, inputs):
        self.args = args
        self.out = Path(args.out)
        self.inputs = [Path(p) for p in inputs]
        self.files: list[str] = []

    def write(self, name: str, text: str) -> None:
        _atomic_write(self.out / name, text)
        self.files.append(name)

    def finish(self) -> None:
        params = {k: (v.isoformat() if isinstance(v, dt.date) else v)
                  for k, v in sorted(vars(self.args).items()) if k not in ("func", "out")}
        manifest = {
            "tool": "pandemic-hmm",
            "version": __version__,
            "command": self.args.command,
            "inputs": [{"path": str(p), "sha256": _sha256(p)} for p in self.inputs],
            "parameters": params,
            "rule_id": getattr(self.args, "rule", None),
            "output_dir": str(self.out),
            "outputs": sorted(self.files),
            "created_at": dt.datetime.now(dt.timezone.utc).isoformat(timespec="seconds"),
        }
        _atomic_write(self.out / "manifest.json", json.dumps(manifest, indent=2) + "\n")


def cmd_ingest(args) -> int:
    data = _load_dataset(Path(args.input), args.mode)
    n_warn = 0
    for region in sorted(data):
        for w in validate_series(data[region]):
            _warn(w)
            n_warn += 1
    run = Run(args, [args.input])
    buf = io.StringIO()
    write_delta_csv(data, buf)
    run.write("deltas.csv", buf.getvalue())
    run.finish()
    if n_warn and args.strict:
        return EXIT_INVALID
    return EXIT_OK


def _window(args):
    start = getattr(args, "date_from", None)
    end = getattr(args, "date_to", None)
    return (start, end) if (start or end) else None


def _restrict(data, window):
    if window is None:
        return data
    out = {r: s.within(*window) for r, s in data.items()}
    return {r: s for r, s in out.items() if len(s)}


def cmd_label(args) -> int:
    data = _restrict(_load_dataset(Path(args.input), args.mode), _window(args))
    labels = label_dataset(data, RuleConfig(rule_id=args.rule))
    run = Run(args, [args.input])
    buf = io.StringIO()
    write_labels_csv(labels, buf)
    run.write("labels.csv", buf.getvalue())
    run.finish()
    return EXIT_OK


def _bw_init(model: HmmModel, seed: int) -> HmmModel:
    """Strictly positive starting point near ``model``; jitter drawn from ``seed``."""
    rng = np.random.default_rng(seed)

    def mix(p):
        p = np.atleast_2d(p)
        q = 0.9 * p + 0.1 * rng.dirichlet(np.ones(p.shape[-1]), size=p.shape[0])
        q = np.where(p.sum(axis=1, keepdims=True) > 0, q, 1.0 / p.shape[-1])
        return q / q.sum(axis=1, keepdims=True)

    return HmmModel.from_arrays(mix(model.A.values), mix(model.B.values),
                                mix(model.pi)[0], model.metadata)


def cmd_train(args) -> int:
    data = _load_dataset(Path(args.input), args.mode)
    cfg = RuleConfig(rule_id=args.rule)
    window = _window(args)
    run = Run(args, [args.input])
    if args.window:
        dates = sorted({x.date for s in data.values() for x in s})
        first = args.date_from or dates[0]
        last = args.date_to or dates[-1]
        windows = window_bounds(first, last, args.window, args.stride or args.window)
    else:
        windows = [window]
    for k, w in enumerate(windows):
        fit = fit_heuristic(data, w, cfg, args.smoothing)
        model = fit.model
        if args.refine:
            model = refine(model, data, _model_window(model), max_iters=args.refine,
                           labels=fit.labels, zero_row_policy=ZeroRowPolicy.UNIFORM,
                           smoothing=args.smoothing)
        stem = "model" if len(windows) == 1 else f"model_{model.metadata.window_start}_{model.metadata.window_end}"
        run.write(f"{stem}.json", model.to_json())
        run.write(f"{stem}_distribution.csv", distribution_timeseries(fit.pi_series))
        if args.baum_welch:
            bw = fit_baum_welch(data, _bw_init(model, args.seed + k), _model_window(model),
                                max_iters=args.max_iters, tol=args.tol)
            run.write(f"{stem}_baum_welch.json", bw.model.to_json())
            buf = io.StringIO()
            write_trace_csv(bw.trace, buf)
            run.write(f"{stem}_ll_trace.csv", buf.getvalue())
    run.finish()
    return EXIT_OK


def _model_window(model: HmmModel):
    md = model.metadata
    return (_date(md.window_start) if md.window_start else None,
            _date(md.window_end) if md.window_end else None)


def _decode_all(model: HmmModel, data, window):
    bags = bag_dataset(data, window)
    return [viterbi_decode(model, bags[r], r) for r in sorted(bags) if bags[r]]


def cmd_decode(args) -> int:
    model = HmmModel.load(args.model, atol=args.model_atol)
    data = _load_dataset(Path(args.input), args.mode)
    paths = _decode_all(model, data, _window(args))
    run = Run(args, [args.model, args.input])
    buf = io.StringIO()
    write_paths_csv(paths, buf)
    run.write("paths.csv", buf.getvalue())
    run.finish()
    return EXIT_OK


def cmd_report(args) -> int:
    inputs = [args.input]
    window = _window(args)
    if args.labels:
        with open(args.labels, encoding="utf-8") as f:
            labels = read_labels_csv(f)
        inputs.append(args.labels)
    elif args.model:
        model = HmmModel.load(args.model, atol=args.model_atol)
        data = _load_dataset(Path(args.input), args.mode)
        labels = {p.region: [LabeledState(d, p.region, s) for d, s in p.steps]
                  for p in _decode_all(model, data, window)}
        inputs.append(args.model)
    else:
        data = _load_dataset(Path(args.input), args.mode)
        labels = label_dataset(data, RuleConfig(rule_id=args.rule))
    if window:
        labels = {r: [s for s in v if (window[0] is None or s.date >= window[0])
                      and (window[1] is None or s.date <= window[1])] for r, v in labels.items()}
        labels = {r: v for r, v in labels.items() if v}
    run = Run(args, [p for p in inputs if p])
    table = status_table(labels, args.as_of)
    run.write("status.csv", status_csv(table))
    run.write("status.txt", status_text(table))
    run.write("distribution.csv", distribution_timeseries(daily_state_distribution(labels, window)))
    for region, prof in region_transition_profiles(labels).items():
        safe = "".join(c if c.isalnum() else "_" for c in region)
        run.write(f"dot/{safe}.dot", render_dot(prof))
    run.finish()
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="pandemic-hmm",
        description="Label, train, decode and report hidden epidemic states from case reports.",
        epilog="Date windows given with --from/--to are inclusive on both ends.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def common(sp, with_input=True):
        if with_input:
            sp.add_argument("input", help="case-report CSV")
        sp.add_argument("--mode", choices=[m.value for m in Mode], default="delta",
                        help="input layout (default: delta)")
        sp.add_argument("--rule", choices=available_rules(), default="paper-v1",
                        help="quantizer rule id (default: paper-v1)")
        sp.add_argument("--out", default="out", help="output directory (default: out)")
        sp.add_argument("--seed", type=int, default=0, help="random seed (default: 0)")
        sp.add_argument("--from", dest="date_from", type=_date, default=None,
                        help="first date of the window, inclusive")
        sp.add_argument("--to", dest="date_to", type=_date, default=None,
                        help="last date of the window, inclusive")

    sp = sub.add_parser("ingest", help="validate a CSV and write daily deltas")
    common(sp)
    sp.add_argument("--strict", action="store_true", help="exit 1 if any validation warning")
    sp.set_defaults(func=cmd_ingest)

    sp = sub.add_parser("label", help="infer a hidden state per region-day")
    common(sp)
    sp.set_defaults(func=cmd_label)

    sp = sub.add_parser("train", help="fit a model (optionally per rolling window)")
    common(sp)
    sp.add_argument("--window", type=int, default=None, metavar="N",
                    help="retrain on consecutive N-day windows")
    sp.add_argument("--stride", type=int, default=None, metavar="N",
                    help="days between window starts (default: window length)")
    sp.add_argument("--smoothing", type=float, default=0.0, metavar="X",
                    help="pseudo-count added to every cell (default: 0)")
    sp.add_argument("--refine", type=int, default=0, metavar="ITERS",
                    help="run up to ITERS decode-and-recount passes")
    sp.add_argument("--baum-welch", action="store_true",
                    help="also fit by EM, started near the count-based model")
    sp.add_argument("--max-iters", type=int, default=100, help="EM iteration cap")
    sp.add_argument("--tol", type=float, default=1e-6, help="EM log-likelihood tolerance")
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("decode", help="Viterbi-decode each region under a model")
    sp.add_argument("model", help="model JSON")
    common(sp)
    sp.add_argument("--model-atol", type=float, default=2e-3,
                    help="row-sum tolerance when loading the model (default: 2e-3)")
    sp.set_defaults(func=cmd_decode)

    sp = sub.add_parser("report", help="status table, distribution CSV and DOT diagrams")
    common(sp)
    sp.add_argument("--labels", default=None, help="label CSV to report instead of rule output")
    sp.add_argument("--model", default=None, help="report Viterbi-decoded states under this model")
    sp.add_argument("--model-atol", type=float, default=2e-3,
                    help="row-sum tolerance when loading the model (default: 2e-3)")
    sp.add_argument("--as-of", type=_date, default=None, help="status date (default: latest)")
    sp.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_USAGE if e.code else EXIT_OK
    try:
        return args.func(args)
    except (ValueError, KeyError, OSError) as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_INVALID


if __name__ == "__main__":
    sys.exit(main())
