"""Command-line entry point: ``cscf run|oracle|compare-costs|flows|probe-positions|train``."""
from __future__ import annotations

import argparse
import csv
import dataclasses
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import compare_costs, fronts_flow_counts, probe_positions, summarize_probes
from .brkga import evolve, worker_count
from .classifier import Encoding, fit_logistic, save_model
from .feature_space import FeatureSpace, SchemaError, read_csv_table
from .fronts import FrontFileError, collect_fronts, write_front
from .oracle import OracleConfig, OracleError, enumerate_front
from .problem import ProblemFileError, load_problem, manifest_hash

log = logging.getLogger("cscf")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_EMPTY = 2

_TRUE = {"1", "accept", "true", "yes", "y"}
_FALSE = {"0", "reject", "false", "no", "n"}


def _front_name(instance_id: str) -> str:
    safe = "".join(c if c.isalnum() or c in "-_." else "_" for c in instance_id)
    return f"front_{safe}.jsonl"


def _write_json(path: Path, obj) -> None:
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")
    tmp.replace(path)


def _load(path) -> "ProblemDefinition":  # noqa: F821
    try:
        return load_problem(path)
    except ProblemFileError as exc:
        log.error("invalid problem file %s: %s", path, exc)
        raise SystemExit(EXIT_INPUT)


def _sources(fronts) -> list[dict]:
    return [{"instance": ff.instance, "manifest": ff.header.get("manifest")} for ff in fronts]


def cmd_run(args) -> int:
    defn = _load(args.problem)
    params = defn.params
    overrides = {k: v for k, v in (("seed", args.seed), ("generations", args.generations),
                                   ("population_size", args.population)) if v is not None}
    try:
        params = dataclasses.replace(params, **overrides)
    except ValueError as exc:
        log.error("invalid optimizer settings: %s", exc)
        return EXIT_INPUT
    method = "scf" if args.no_discount or not defn.cost.discount_enabled else "cscf"
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    mhash = manifest_hash(defn.digest, params.seed)
    bb = defn.blackbox
    entries = []
    status = EXIT_OK
    started = time.time()
    for iid, x0 in defn.instances:
        entry = {"id": iid}
        if bb.accepts(x0):
            log.warning("instance %s is already accepted; skipped", iid)
            entry["status"] = "skipped_accepted"
            entries.append(entry)
            continue
        problem = defn.problem(x0, discount=False if args.no_discount else None)
        t0 = time.time()
        stats_path = out / f"stats_{_front_name(iid)[6:]}"
        with open(stats_path, "w") as stats_fh:
            def emit(stat, fh=stats_fh):
                fh.write(json.dumps({"instance": iid, **stat.to_dict()}, sort_keys=True) + "\n")
            front = evolve(problem, params, on_generation=emit)
        name = _front_name(iid)
        write_front(out / name, iid, front.solutions, space=defn.space, manifest=mhash,
                    classifier=bb.fingerprint(), method=method)
        entry.update(status="ok" if len(front) else "empty", front=name, n_solutions=len(front),
                     seconds=round(time.time() - t0, 3), best_violation_count=front.best_violation_count)
        if not len(front):
            status = EXIT_EMPTY
        entries.append(entry)
        log.info("instance %s: %d solutions", iid, len(front))
    manifest = {"schema": "cscf.manifest/1", "manifest": mhash, "problem_digest": defn.digest,
                "version": __version__, "method": method, "params": params.to_dict(),
                "threads": worker_count(), "instances": entries,
                "seconds": round(time.time() - started, 3)}
    _write_json(out / "manifest.json", manifest)
    return status


def cmd_oracle(args) -> int:
    defn = _load(args.problem)
    out = Path(args.output)
    mhash = manifest_hash(defn.digest, 0)
    bb = defn.blackbox
    config = OracleConfig(grids=defn.grids, cap=args.cap)
    results = []
    for iid, x0 in defn.instances:
        if bb.accepts(x0):
            log.warning("instance %s is already accepted; skipped", iid)
            results.append(({"id": iid, "status": "skipped_accepted"}, None))
            continue
        try:
            front, count = enumerate_front(defn.problem(x0, discount=False if args.no_discount else None), config)
        except OracleError as exc:
            log.error("%s", exc)
            return EXIT_INPUT
        results.append(({"id": iid, "evaluated": count, "n_solutions": len(front),
                         "status": "ok" if len(front) else "empty"}, front))
    out.mkdir(parents=True, exist_ok=True)
    status = EXIT_OK
    for entry, front in results:
        if front is None:
            continue
        entry["front"] = name = _front_name(entry["id"])
        write_front(out / name, entry["id"], front.solutions, space=defn.space, manifest=mhash,
                    classifier=bb.fingerprint(), method="oracle", extra={"evaluated": entry["evaluated"]})
        if not len(front):
            status = EXIT_EMPTY
        log.info("instance %s: %d sequences evaluated, %d on the front", entry["id"], entry["evaluated"], len(front))
    _write_json(out / "manifest.json", {"schema": "cscf.manifest/1", "manifest": mhash,
                                        "problem_digest": defn.digest, "version": __version__,
                                        "method": "oracle", "instances": [e for e, _ in results]})
    return status


def cmd_compare_costs(args) -> int:
    try:
        fronts_a, fronts_b = collect_fronts([args.front_a]), collect_fronts([args.front_b])
        rows = compare_costs(fronts_a, fronts_b, args.max_length)
    except (FrontFileError, ValueError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    fh = open(args.output, "w", newline="") if args.output else sys.stdout
    try:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["instance", "cost_a", "cost_b", "relative_difference", "manifest_a", "manifest_b"])
        man_a = {ff.instance: ff.header.get("manifest", "") for ff in fronts_a}
        man_b = {ff.instance: ff.header.get("manifest", "") for ff in fronts_b}
        for r in rows:
            writer.writerow([r.instance, "n/a" if r.a is None else repr(r.a),
                             "n/a" if r.b is None else repr(r.b),
                             "n/a" if r.relative is None else repr(r.relative),
                             man_a[r.instance], man_b[r.instance]])
    finally:
        if fh is not sys.stdout:
            fh.close()
    return EXIT_OK


def cmd_flows(args) -> int:
    try:
        fronts = collect_fronts(args.fronts)
    except (FrontFileError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    fc = fronts_flow_counts(fronts, args.max_length)
    doc = fc.to_dict()
    doc["sources"] = _sources(fronts)
    _write_json(Path(args.output), doc)
    return EXIT_OK


def cmd_probe_positions(args) -> int:
    defn = _load(args.problem)
    try:
        fronts = collect_fronts(args.fronts)
    except (FrontFileError, OSError) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    bb = defn.blackbox
    fp = bb.fingerprint()
    for ff in fronts:
        if ff.header.get("classifier") != fp:
            log.error("front for instance %s was produced with a different classifier", ff.instance)
            return EXIT_INPUT
    samples = probe_positions(fronts, defn.space, defn.catalog, bb)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    _write_json(out / "manifest.json", {"schema": "cscf.probe/1", "problem_digest": defn.digest,
                                        "classifier": fp, "sources": _sources(fronts)})
    with open(out / "samples.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["instance", "solution", "action", "t", "p_accept"])
        for s in samples:
            w.writerow([s.instance, s.solution, s.action, s.t, repr(s.p_accept)])
    with open(out / "summary.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["action", "t", "n", "median", "p2_5", "p97_5"])
        for r in summarize_probes(samples):
            w.writerow([r["action"], r["t"], r["n"], repr(r["median"]), repr(r["p2_5"]), repr(r["p97_5"])])
    return EXIT_OK


def _parse_label(text: str) -> int:
    t = text.strip().lower()
    if t in _TRUE:
        return 1
    if t in _FALSE:
        return 0
    raise ValueError(f"unrecognised label {text!r}")


def cmd_train(args) -> int:
    try:
        schema = json.loads(Path(args.schema).read_text())
        space = FeatureSpace.from_dict(schema["features"] if isinstance(schema, dict) else schema)
        rows, extras = read_csv_table(space, Path(args.csv).read_text(), [args.label])
        y = np.array([_parse_label(e[args.label]) for e in extras])
    except (OSError, KeyError, ValueError, SchemaError) as exc:
        log.error("cannot load training data: %s", exc)
        return EXIT_INPUT
    X = Encoding(space).encode_many(rows)
    try:
        model, acc = fit_logistic(X, y, steps=args.steps, learning_rate=args.learning_rate, seed=args.seed)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    Path(args.output).write_text(save_model(model, space))
    print(f"training accuracy: {acc:.4f}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cscf", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="optimize every rejected instance of a problem file")
    r.add_argument("problem")
    r.add_argument("output", help="output directory")
    r.add_argument("--seed", type=int)
    r.add_argument("--generations", type=int)
    r.add_argument("--population", type=int)
    r.add_argument("--no-discount", action="store_true", help="ignore the consequence graph (c_i = b_i)")
    r.set_defaults(func=cmd_run)

    o = sub.add_parser("oracle", help="exhaustively enumerate the exact front")
    o.add_argument("problem")
    o.add_argument("output")
    o.add_argument("--cap", type=int, default=10**7)
    o.add_argument("--no-discount", action="store_true")
    o.set_defaults(func=cmd_oracle)

    c = sub.add_parser("compare-costs", help="relative minimal undiscounted cost differences (B-A)/max(A,B)")
    c.add_argument("front_a")
    c.add_argument("front_b")
    c.add_argument("--max-length", type=int, default=2)
    c.add_argument("--output")
    c.set_defaults(func=cmd_compare_costs)

    f = sub.add_parser("flows", help="action-position flow counts")
    f.add_argument("fronts", nargs="+")
    f.add_argument("--output", required=True)
    f.add_argument("--max-length", type=int)
    f.set_defaults(func=cmd_flows)

    pp = sub.add_parser("probe-positions", help="P(accept) after each step, per action and position")
    pp.add_argument("problem")
    pp.add_argument("fronts", nargs="*")
    pp.add_argument("--output", required=True)
    pp.set_defaults(func=cmd_probe_positions)

    t = sub.add_parser("train", help="fit a logistic toy classifier")
    t.add_argument("csv")
    t.add_argument("schema", help="JSON file with a 'features' section (a problem file works)")
    t.add_argument("output")
    t.add_argument("--label", default="label")
    t.add_argument("--steps", type=int, default=2000)
    t.add_argument("--learning-rate", type=float, default=0.5)
    t.add_argument("--seed", type=int, default=0)
    t.set_defaults(func=cmd_train)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
