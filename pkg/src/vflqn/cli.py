"""Command line driver: ``vflqn run | audit | gen-synthetic``."""
import argparse
import json
import logging
import os
import sys
from pathlib import Path

import numpy as np

from . import data
from .audit import audit_ledger
from .config import TrainingConfig
from .errors import VflError
from .he import BACKENDS
from .metrics import REPORT_SCHEMA_VERSION
from .protocol import run_protocol
from .transport import CommLedger, read_transcript

log = logging.getLogger("vflqn")

REPORT_DIR_ENV = "VFLQN_REPORT_DIR"
EXIT_OK, EXIT_ERROR, EXIT_CAPPED = 0, 1, 2


def _parse_synthetic(items) -> dict:
    spec = {"n": 10, "T": 2000, "seed": None, "signal": 2.0}
    for item in items or []:
        key, sep, val = item.partition("=")
        if not sep or key not in spec:
            raise ValueError(f"bad --synthetic item {item!r}; use n=.., T=.., seed=.., signal=..")
        spec[key] = float(val) if key == "signal" else int(val)
    return spec


def _load_dataset(args) -> data.PartitionedDataset:
    if args.data:
        ds = data.load_csv(args.data, args.label_column, args.drop_columns or ())
        log.info("loaded %s: T=%d, n=%d", args.data, *ds.X.shape)
    else:
        spec = _parse_synthetic(args.synthetic)
        seed = args.seed if spec["seed"] is None else spec["seed"]
        X, lab, _ = data.make_synthetic(spec["n"], spec["T"], seed, spec["signal"])
        ds = data.Dataset(X, np.where(lab == 1, 1.0, -1.0), [f"x{j}" for j in range(X.shape[1])])
    if args.subsample and args.subsample < len(ds.y):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed, 0x5AB]))
        keep = np.sort(rng.choice(len(ds.y), args.subsample, replace=False))
        ds = data.Dataset(ds.X[keep], ds.y[keep], ds.columns)
    return data.prepare(ds, args.n_a, seed=args.seed, scale=not args.no_standardize,
                        intercept=args.intercept, shuffle_columns=args.shuffle_columns)


def _report_path(args, default_name: str) -> Path:
    if args.report:
        return Path(args.report)
    return Path(os.environ.get(REPORT_DIR_ENV, ".")) / default_name


def cmd_run(args) -> int:
    part = _load_dataset(args)
    methods = ["sgd", "qn"] if args.method == "both" else [args.method]
    hessian = None if args.sh_size is None else args.sh_size
    runs = []
    for method in methods:
        cfg = TrainingConfig(
            method=method, batch_size=args.batch, hessian_batch_size=hessian,
            window=None if args.L == 0 else args.L, memory=args.M, eta=args.eta, seed=args.seed,
            tol=args.tol, max_epochs=args.max_epochs, max_rounds=args.max_rounds,
        )
        transcript = None
        if args.transcript:
            transcript = args.transcript if len(methods) == 1 else f"{args.transcript}.{method}"
        log.info("running %s with %s backend", method, args.backend)
        runs.append(run_protocol(part, cfg, args.backend, key_bits=args.key_bits, transcript_path=transcript))

    print(f"n_A={part.n_a} n_B={part.n_b} T_train={part.n_train} T_test={len(part.test_idx)} "
          f"|S|={args.batch} L={args.L} M={args.M} eta={args.eta} backend={args.backend}")
    print(f"{'Method':<8}{'Epochs':>8}{'Loss':>12}{'AUC':>10}  Stop")
    for r in runs:
        auc_s = "n/a" if r.test_auc is None else f"{r.test_auc:.4f}"
        print(f"{r.method.upper():<8}{r.epochs:>8}{r.final_loss:>12.6f}{auc_s:>10}  {r.stop_reason}")

    report = {"schema_version": REPORT_SCHEMA_VERSION,
              "dataset": {"source": args.data or "synthetic", "n_a": part.n_a, "n_b": part.n_b,
                          "n_train": part.n_train, "n_test": int(len(part.test_idx))},
              "runs": [r.to_json() for r in runs],
              "audit": [audit_summary(r.ledger) for r in runs]}
    path = _report_path(args, "report.json")
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(report, indent=2))
    print(f"report written to {path}")
    return EXIT_OK if all(r.converged for r in runs) else EXIT_CAPPED


def audit_summary(ledger: CommLedger) -> dict:
    full = audit_ledger(ledger)
    full.pop("rounds")
    return full


def _ledgers_from(path: Path) -> list[CommLedger]:
    text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError:
        return [CommLedger.from_transcript(read_transcript(path))]
    if "runs" not in doc:
        raise VflError(f"{path}: not a run report")
    return [CommLedger.from_json(r["ledger"]) for r in doc["runs"]]


def cmd_audit(args) -> int:
    for ledger in _ledgers_from(Path(args.artifact)):
        res = audit_ledger(ledger)
        meta = res["meta"]
        print(f"method={meta.get('method')} n={meta.get('n')} |S|={meta.get('batch_size')} L={meta.get('window')}")
        print(f"{'round':>6}{'|S|':>6}{'|S_H|':>7}{'AB obs':>9}{'AB pred':>9}{'PC obs':>8}{'PC pred':>8}")
        rows = res["rounds"] if args.all_rounds else res["rounds"][: args.show]
        for r in rows:
            print(f"{r['round']:>6}{r['batch']:>6}{r['hessian']:>7}{r['observed_ab']:>9}{r['predicted_ab']:>9}"
                  f"{r['observed_pc']:>8}{r['predicted_pc']:>8}")
        print(f"per-round counts match the cost model: {res['rounds_match']}")
        for w in res["windows"][: args.show]:
            print(f"window t={w['t']}: AB {w['observed_ab']} / {w['predicted_ab']} = {w['ratio_ab']}; "
                  f"PC {w['observed_pc']} / {w['predicted_pc']} = {w['ratio_pc']}")
        if "overhead_vs_sgd" in res:
            o = res["overhead_vs_sgd"]
            print(f"QN/SGD overhead: AB {o['ab']}, PC {o['parties_coord']}, total {o['total']} "
                  f"(bound 1+1/L = {o['bound']})")
        print(f"encrypted loss scalars (outside the cost model): {res['loss_scalars_unmetered_by_model']}")
        if not res["rounds_match"]:
            return EXIT_ERROR
    return EXIT_OK


def cmd_gen_synthetic(args) -> int:
    X, lab, w_star = data.make_synthetic(args.n, args.T, args.seed, args.signal)
    data.write_csv(args.out, X, lab)
    print("w* =", " ".join(repr(float(v)) for v in w_star))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vflqn", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="train SGD and/or quasi-Newton over the three-party protocol")
    src = run.add_mutually_exclusive_group()
    src.add_argument("--data", help="CSV file with a header row")
    src.add_argument("--synthetic", nargs="*", metavar="KEY=VAL", help="synthetic data, e.g. n=10 T=2000")
    run.add_argument("--label-column", default="label")
    run.add_argument("--drop-columns", nargs="*", default=[])
    run.add_argument("--subsample", type=int, help="use a random subset of this many rows")
    run.add_argument("--method", choices=["sgd", "qn", "both"], default="both")
    run.add_argument("--batch", type=int, default=1000, help="|S|")
    sh = run.add_mutually_exclusive_group()
    sh.add_argument("--sh-equals-s", action="store_true", help="use S_H = S (default)")
    sh.add_argument("--sh-size", type=int, help="draw an independent S_H of this size")
    run.add_argument("--L", type=int, default=4, help="curvature window; 0 never rebuilds H")
    run.add_argument("--M", type=int, default=10, help="curvature memory")
    run.add_argument("--eta", type=float, default=0.1)
    run.add_argument("--seed", type=int, default=0)
    run.add_argument("--tol", type=float, default=1e-5)
    run.add_argument("--max-epochs", type=int, default=100)
    run.add_argument("--max-rounds", type=int)
    run.add_argument("--backend", choices=BACKENDS, default="paillier")
    run.add_argument("--key-bits", type=int, default=2048)
    run.add_argument("--n-a", type=int, help="features given to party A (default n // 2)")
    run.add_argument("--no-standardize", action="store_true")
    run.add_argument("--intercept", action="store_true", help="append a bias column on party B")
    run.add_argument("--shuffle-columns", action="store_true")
    run.add_argument("--report", help=f"JSON report path (default ${REPORT_DIR_ENV}/report.json)")
    run.add_argument("--transcript", help="write a message transcript here")
    run.set_defaults(func=cmd_run)

    aud = sub.add_parser("audit", help="check metered traffic against the cost model")
    aud.add_argument("artifact", help="run report JSON or transcript file")
    aud.add_argument("--show", type=int, default=8, help="rows to print")
    aud.add_argument("--all-rounds", action="store_true")
    aud.set_defaults(func=cmd_audit)

    gen = sub.add_parser("gen-synthetic", help="write a planted-logistic CSV")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--T", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--signal", type=float, default=2.0)
    gen.add_argument("--out", required=True)
    gen.set_defaults(func=cmd_gen_synthetic)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (VflError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
