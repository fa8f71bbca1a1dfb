"""Command-line interface.

Subcommands: extract, train, detect, eval, demo, verify-theorem1, kstest,
stats. Every command takes --seed. Success exits 0; any failure prints one
machine-readable JSON line to stderr and exits 2.
"""

from __future__ import annotations

import argparse
import json
import sys

import numpy as np

from mbfdetect.benford import AttackId, Group
from mbfdetect.fileio import (
    eval_report_payload,
    load_model,
    read_features_csv,
    save_model,
    write_features_csv,
    write_report,
)
from mbfdetect.mbfa import read_mbfa_file
from mbfdetect.pipeline import extract_dataset_features
from mbfdetect.stats import ks_two_sample, verify_rayleigh
from mbfdetect.svm import accuracy_at_half, posterior, train_svm

__all__ = ["main"]


def _cmd_extract(args) -> int:
    records = read_mbfa_file(args.input)
    if not records:
        write_features_csv(args.output, [], [], [], np.empty((0, 0)))
        print(f"extracted 0 records -> {args.output}")
        return 0
    feats = extract_dataset_features(records, T=args.T, mean_subtract=args.mean_subtract)
    write_features_csv(args.output, feats.sample_ids,
                       [r.group for r in records], [r.attack_id for r in records],
                       feats.matrix)
    print(f"extracted {len(records)} records x {feats.matrix.shape[1]} features "
          f"-> {args.output}")
    return 0


def _cmd_train(args) -> int:
    _, groups, _, matrix = read_features_csv(args.features)
    labels = np.array([1.0 if g == Group.ADVERSARIAL else -1.0 for g in groups])
    gamma = None if args.gamma == "auto" else float(args.gamma)
    model = train_svm(matrix, labels, C=args.C, kernel=args.kernel, gamma=gamma,
                      seed=args.seed, standardize=args.standardize)
    save_model(args.output, model, extraction={"T": args.T,
                                               "mean_subtract": args.mean_subtract})
    print(f"trained on {matrix.shape[0]} samples, {len(model.dual_coeffs)} support "
          f"vectors, kkt residual {model.kkt_residual:.2e} -> {args.output}")
    return 0


def _cmd_detect(args) -> int:
    model, _ = load_model(args.model)
    ids, _, _, matrix = read_features_csv(args.features)
    post = np.atleast_1d(posterior(model, matrix))
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("sample_id,posterior,verdict\n")
        for sid, p in zip(ids, post):
            fh.write(f"{sid},{p:.9g},{'adversarial' if p >= 0.5 else 'benign'}\n")
    print(f"scored {len(ids)} samples -> {args.output}")
    return 0


def _cmd_eval(args) -> int:
    model, _ = load_model(args.model)
    _, groups, _, matrix = read_features_csv(args.features)
    labels = np.array([1.0 if g == Group.ADVERSARIAL else -1.0 for g in groups])
    report = accuracy_at_half(np.atleast_1d(posterior(model, matrix)), labels)
    write_report(args.output, "eval-report", eval_report_payload(report))
    print(f"auroc {report.auroc:.4f} accuracy {report.accuracy:.4f} -> {args.output}")
    return 0


def _attack_list(name: str):
    if name == "both":
        return (AttackId.BIM, AttackId.RPGD)
    return (AttackId[name.upper()],)


def _cmd_demo(args) -> int:
    import os

    from mbfdetect.desk import DeskRunConfig, run_desk_experiment
    from mbfdetect.mbfa import write_mbfa_file

    if args.quick:
        cfg = DeskRunConfig(seed=args.seed, attacks=_attack_list(args.attack),
                            train_images=300, pool_images=120, epochs=12,
                            h1_trials=10, h1_max_samples=2, calibration_samples=40)
    else:
        cfg = DeskRunConfig(seed=args.seed, attacks=_attack_list(args.attack))
    result = run_desk_experiment(cfg)

    os.makedirs(args.outdir, exist_ok=True)
    payload = {
        "seed": args.seed,
        "attacks": [a.name.lower() for a in cfg.attacks],
        "net_train_accuracy": result.net_train_accuracy,
        "sigma_noise": result.sigma_noise,
        "datasets": result.dataset_info,
        "experiments": {name: eval_report_payload(rep)
                        for name, rep in sorted(result.experiments.items())},
        "hypothesis_tests": [
            {"test": c.test, "scope": c.scope, "subject": c.subject,
             "p_value": c.p_value, "note": c.note}
            for c in result.hypothesis_cells],
    }
    write_report(f"{args.outdir}/report.json", "desk-demo", payload)

    with open(f"{args.outdir}/statistics.csv", "w", encoding="utf-8") as fh:
        fh.write("source,split,group,dimension,mean,std,count\n")
        for row in result.statistics_rows:
            fh.write(",".join(str(v) if not isinstance(v, float) else f"{v:.9g}"
                              for v in row) + "\n")

    lead = cfg.attacks[0]
    lead_ds = result.datasets[("desk", lead)]
    write_mbfa_file(f"{args.outdir}/desk_{lead.name.lower()}.mbfa", lead_ds.records)
    feats = extract_dataset_features(lead_ds.records, T=cfg.T,
                                     mean_subtract=cfg.mean_subtract)
    write_features_csv(f"{args.outdir}/desk_{lead.name.lower()}_features.csv",
                       feats.sample_ids,
                       [r.group for r in lead_ds.records],
                       [r.attack_id for r in lead_ds.records], feats.matrix)
    for name, report in sorted(result.experiments.items()):
        print(f"{name}: auroc {report.auroc:.4f} accuracy {report.accuracy:.4f}")
    print(f"elapsed {result.elapsed_seconds:.1f}s; artifacts in {args.outdir}",
          file=sys.stderr)
    return 0


def _cmd_verify_theorem1(args) -> int:
    report = verify_rayleigh(c=args.c, n=args.n, m=args.m, trials=args.trials,
                             seed=args.seed)
    payload = {
        "c": report.c, "n": report.n, "m": report.m, "trials": report.trials,
        "empirical_mean_abs_error": report.empirical_mean_abs_error,
        "empirical_var_abs_error": report.empirical_var_abs_error,
        "predicted_mean": report.predicted_mean,
        "predicted_var": report.predicted_var,
        "rayleigh_ks_p": report.rayleigh_ks_p,
        "rayleigh_ks_p_exact": report.rayleigh_ks_p_exact,
        "pseudo_variance_magnitude": report.pseudo_variance_magnitude,
        "coefficient_magnitude": report.coefficient_magnitude,
    }
    if args.output:
        write_report(args.output, "theorem1-report", payload)
    print(f"predicted_mean {report.predicted_mean:.7f} "
          f"empirical_mean {report.empirical_mean_abs_error:.7f}")
    print(f"predicted_var {report.predicted_var:.4e} "
          f"empirical_var {report.empirical_var_abs_error:.4e}")
    print(f"rayleigh_ks_p {report.rayleigh_ks_p:.4f} "
          f"pseudo_variance {report.pseudo_variance_magnitude:.6f}")
    return 0


def _select(matrix, groups, attacks, group_name, attack_name):
    mask = np.ones(len(groups), dtype=bool)
    if group_name != "any":
        if group_name == "benign":
            mask &= np.array([g != Group.ADVERSARIAL for g in groups])
        else:
            mask &= np.array([g == Group[group_name.upper()] for g in groups])
    if attack_name != "any":
        mask &= np.array([a == AttackId[attack_name.upper()] for a in attacks])
    return matrix[mask]


def _cmd_kstest(args) -> int:
    _, groups, attacks, matrix = read_features_csv(args.features)
    a = _select(matrix, groups, attacks, args.group_a, args.attack_a)
    if args.features_b:
        _, groups_b, attacks_b, matrix_b = read_features_csv(args.features_b)
        b = _select(matrix_b, groups_b, attacks_b, args.group_b, args.attack_b)
    else:
        b = _select(matrix, groups, attacks, args.group_b, args.attack_b)
    if a.shape[0] == 0 or b.shape[0] == 0:
        raise ValueError("one of the selections matched no rows")
    dims = range(matrix.shape[1]) if args.dims == "all" else \
        range(matrix.shape[1] - int(args.dims.split(":")[1]), matrix.shape[1])
    per_dim = {d + 1: ks_two_sample(a[:, d], b[:, d]).p_value for d in dims}
    average = float(np.mean(list(per_dim.values())))
    if args.output:
        write_report(args.output, "kstest-report",
                     {"average_p": average,
                      "per_dimension_p": {str(k): v for k, v in per_dim.items()},
                      "n_a": int(a.shape[0]), "n_b": int(b.shape[0])})
    print(f"average_p {average:.6f} over {len(per_dim)} dimensions "
          f"(n_a={a.shape[0]}, n_b={b.shape[0]})")
    return 0


def _cmd_stats(args) -> int:
    _, groups, attacks, matrix = read_features_csv(args.features)
    keys = sorted({(int(g), int(a)) for g, a in zip(groups, attacks)})
    with open(args.output, "w", encoding="utf-8") as fh:
        fh.write("group,attack_id,dimension,mean,std,count\n")
        for g, a in keys:
            mask = np.array([(int(gi), int(ai)) == (g, a)
                             for gi, ai in zip(groups, attacks)])
            sub = matrix[mask]
            for d in range(matrix.shape[1]):
                fh.write(f"{Group(g).name.lower()},{AttackId(a).name.lower()},{d + 1},"
                         f"{sub[:, d].mean():.9g},{sub[:, d].std():.9g},{sub.shape[0]}\n")
    print(f"wrote per-dimension statistics for {len(keys)} groups -> {args.output}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbfdetect",
        description="Adversarial-example detection from log-mantissa spectral features")
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, func, help_text):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--seed", type=int, default=0)
        p.set_defaults(func=func)
        return p

    p = add("extract", _cmd_extract, "MBFA activation dump -> feature CSV")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--T", type=int, default=16)
    p.add_argument("--mean-subtract", dest="mean_subtract", action="store_true",
                   default=True)
    p.add_argument("--no-mean-subtract", dest="mean_subtract", action="store_false")

    p = add("train", _cmd_train, "feature CSV -> detector model JSON")
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--C", type=float, default=1.0)
    p.add_argument("--kernel", choices=["rbf", "linear"], default="rbf")
    p.add_argument("--gamma", default="auto")
    p.add_argument("--T", type=int, default=16)
    p.add_argument("--mean-subtract", dest="mean_subtract", action="store_true",
                   default=True)
    p.add_argument("--no-mean-subtract", dest="mean_subtract", action="store_false")
    p.add_argument("--standardize", dest="standardize", action="store_true",
                   default=True)
    p.add_argument("--no-standardize", dest="standardize", action="store_false")

    p = add("detect", _cmd_detect, "model + features -> per-sample verdicts")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)

    p = add("eval", _cmd_eval, "model + labeled features -> metrics report")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)

    p = add("demo", _cmd_demo, "full desk-scale pipeline end to end")
    p.add_argument("--attack", choices=["bim", "rpgd", "both"], default="both")
    p.add_argument("--outdir", default="demo-out")
    p.add_argument("--quick", action="store_true",
                   help="small pools and trimmed hypothesis trials")

    p = add("verify-theorem1", _cmd_verify_theorem1,
            "Monte-Carlo audit of the estimation-error law")
    p.add_argument("--c", type=float, required=True)
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--trials", type=int, default=2000)
    p.add_argument("--output", default="")

    p = add("kstest", _cmd_kstest, "per-dimension two-sample KS over feature CSVs")
    p.add_argument("--features", required=True)
    p.add_argument("--features-b", default="")
    p.add_argument("--group-a", default="clean")
    p.add_argument("--group-b", default="adversarial")
    p.add_argument("--attack-a", default="any")
    p.add_argument("--attack-b", default="any")
    p.add_argument("--dims", default="all", help='"all" or "last:16"')
    p.add_argument("--output", default="")

    p = add("stats", _cmd_stats, "per-dimension mean/std per group (plot data)")
    p.add_argument("--features", required=True)
    p.add_argument("--output", required=True)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - single reporting point for the CLI
        line = json.dumps({"error": type(exc).__name__, "message": str(exc)},
                          sort_keys=True)
        print(line, file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
