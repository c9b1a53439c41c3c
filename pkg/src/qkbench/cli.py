"""qkbench command line: campaign execution, reporting, kernel file tools,
circuit inspection and standalone theta optimisation.

Exit codes: 0 success, 1 usage error, 2 partial campaign failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
import traceback
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .circuit import FEATURE_MAP_KINDS, FeatureMapSpec, build_feature_map, \
    circuit_metrics, decompose_native
from .config import ExperimentConfig, canonical_json, load_config
from .datasets import Dataset, load_dataset, make_blobs, make_xor, stratified_subsample
from .folds import make_fold_plan
from .harness import run_experiment
from .hwcompare import validate_backend
from .kernel_io import (KernelCache, KernelFormatError, default_cache_dir,
                        import_kernel, read_kernel, read_kernel_csv,
                        write_kernel, write_kernel_csv)
from .kernels import CLASSICAL_KINDS, compare_kernels
from .prep import fit_pipeline
from .qkt import optimize_theta
from .stats import (friedman, kruskal_wallis, nemenyi, spectral_profile,
                    suitability_correlation, wilcoxon_signed_rank)

REPORT_MODES = ("summary", "wilcoxon", "friedman", "factors", "spectra",
                "learning", "seeds", "suitability", "compare-kernels")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse defaults to exit code 2
        raise UsageError(message)


def resolve_dataset(cfg: dict) -> Dataset:
    """Materialise the dataset referenced by a config 'dataset' section."""
    if "synthetic" in cfg:
        kind = cfg["synthetic"]
        seed = int(cfg.get("seed", 0))
        if kind == "blobs":
            return make_blobs(n=int(cfg.get("n", 60)),
                              separation=float(cfg.get("separation", 4.0)),
                              n_features=int(cfg.get("n_features", 2)),
                              seed=seed)
        if kind == "xor":
            return make_xor(n=int(cfg.get("n", 40)),
                            noise=float(cfg.get("noise", 0.2)), seed=seed)
        raise UsageError(f"unknown synthetic dataset {kind!r}")
    if "path" not in cfg:
        raise UsageError("dataset section needs either 'path' or 'synthetic'")
    return load_dataset(
        cfg["path"],
        label_column=cfg["label_column"],
        positive_label=cfg["positive_label"],
        group_column=cfg.get("group_column"),
        missing_zero_columns=cfg.get("missing_zero_columns", ()),
        name=cfg.get("name"),
    )


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _csv_text(header: list[str], rows: list[list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf)
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# run


def cmd_run(args) -> int:
    try:
        experiments = load_config(args.config)
    except (ValueError, OSError) as exc:
        raise UsageError(str(exc)) from exc
    cache = KernelCache(args.cache_dir or default_cache_dir())

    def one(idx_cfg):
        idx, cfg = idx_cfg
        try:
            ds = resolve_dataset(cfg.dataset)
            result = run_experiment(cfg, ds, cache=cache)
            return idx, result.to_dict(), None
        except Exception as exc:  # noqa: BLE001 - per-experiment isolation
            return idx, None, f"{cfg.name}: {exc}\n{traceback.format_exc()}"

    jobs = list(enumerate(experiments))
    if args.workers > 1:
        with ThreadPoolExecutor(max_workers=args.workers) as pool:
            outcomes = list(pool.map(one, jobs))
    else:
        outcomes = [one(j) for j in jobs]
    outcomes.sort(key=lambda o: o[0])

    failures = 0
    with open(args.out, "w") as fh:
        for _, record, err in outcomes:
            if err is not None:
                failures += 1
                sys.stderr.write(f"experiment failed: {err}\n")
                continue
            fh.write(json.dumps(record, sort_keys=True) + "\n")
    sys.stderr.write(f"wrote {len(outcomes) - failures}/{len(outcomes)} records "
                     f"to {args.out}\n")
    return 2 if failures else 0


# ---------------------------------------------------------------------------
# report helpers


def _load_records(path) -> list[dict]:
    records = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(json.loads(line))
    if not records:
        raise UsageError(f"{path}: no records")
    return records


def _is_classical(label: str) -> bool:
    return label in CLASSICAL_KINDS


def _is_quantum_ideal(label: str) -> bool:
    return label in FEATURE_MAP_KINDS


def _best(records: list[dict]) -> dict | None:
    return max(records, key=lambda r: r["mean_ba"]) if records else None


def _by_dataset(records: list[dict], mode: str = "cv") -> dict[str, list[dict]]:
    grouped: dict[str, list[dict]] = {}
    for r in records:
        if r.get("mode") == mode:
            grouped.setdefault(r["dataset"], []).append(r)
    if not grouped:
        raise UsageError(f"no records of mode {mode!r} in input")
    return grouped


def report_summary(records, args) -> str:
    rows = []
    for ds, recs in sorted(_by_dataset(records).items()):
        best_c = _best([r for r in recs if _is_classical(r["kernel_label"])])
        best_q = _best([r for r in recs if _is_quantum_ideal(r["kernel_label"])])
        best_qkt = _best([r for r in recs if r["kernel_label"].endswith("+qkt")])
        delta = None
        if best_c and best_q:
            delta = 100.0 * (best_q["mean_ba"] - best_c["mean_ba"])
        rows.append([
            ds,
            best_c["kernel_label"] if best_c else "",
            f"{best_c['mean_ba']:.4f}" if best_c else "",
            best_q["kernel_label"] if best_q else "",
            f"{best_q['mean_ba']:.4f}" if best_q else "",
            f"{best_qkt['mean_ba']:.4f}" if best_qkt else "",
            f"{delta:+.1f}" if delta is not None else "",
        ])
    return _csv_text(["dataset", "best_classical", "classical_ba",
                      "best_quantum_ideal", "q_ideal_ba", "q_qkt_ba",
                      "delta_pp"], rows)


def report_wilcoxon(records, args) -> str:
    rows = []
    for ds, recs in sorted(_by_dataset(records).items()):
        best_c = _best([r for r in recs if _is_classical(r["kernel_label"])])
        best_q = _best([r for r in recs if _is_quantum_ideal(r["kernel_label"])])
        if not (best_c and best_q):
            continue
        rep = wilcoxon_signed_rank(best_q["ba"], best_c["ba"])
        rows.append([ds, best_q["kernel_label"], best_c["kernel_label"],
                     f"{best_q['mean_ba'] - best_c['mean_ba']:+.4f}",
                     f"{rep.statistic:g}", f"{rep.p_value:.6g}", rep.method])
    if not rows:
        raise UsageError("need both quantum-ideal and classical records")
    return _csv_text(["dataset", "best_quantum", "best_classical", "delta",
                      "statistic", "p_value", "method"], rows)


def report_friedman(records, args) -> str:
    rows = []
    pair_rows = []
    for ds, recs in sorted(_by_dataset(records).items()):
        labels = sorted({r["kernel_label"] for r in recs})
        if len(labels) < 2:
            continue
        by_label = {lab: next(r for r in recs if r["kernel_label"] == lab)
                    for lab in labels}
        n_folds = min(len(r["ba"]) for r in by_label.values())
        matrix = np.array([by_label[lab]["ba"][:n_folds] for lab in labels])
        rep = friedman(matrix)
        cd = ""
        if rep.p_value < 0.05:
            nem = nemenyi(rep.extras["mean_ranks"], n_folds)
            cd = f"{nem['critical_difference']:.4f}"
            for a in range(len(labels)):
                for b in range(a + 1, len(labels)):
                    pair_rows.append([
                        ds, labels[a], labels[b],
                        f"{abs(rep.extras['mean_ranks'][a] - rep.extras['mean_ranks'][b]):.4f}",
                        cd, str(nem["significant"][a][b]),
                    ])
        rows.append([ds, f"{rep.statistic:.4f}", rep.extras["df"],
                     f"{rep.p_value:.6g}", cd])
    if getattr(args, "pairs", False):
        return _csv_text(["dataset", "method_a", "method_b", "rank_diff",
                          "critical_difference", "significant"], pair_rows)
    return _csv_text(["dataset", "chi2", "df", "p_value",
                      "nemenyi_cd_if_significant"], rows)


FACTOR_NAMES = ("dataset", "reducer", "k", "family", "pathway", "qkt", "grouped")


def report_factors(records, args) -> str:
    cv_records = [r for r in records if r.get("mode") == "cv" and r.get("factors")]
    if len(cv_records) < 2:
        raise UsageError("factor analysis needs at least 2 cv records")
    rows = []
    for factor in FACTOR_NAMES:
        groups: dict = {}
        for r in cv_records:
            groups.setdefault(str(r["factors"].get(factor)), []).append(r["mean_ba"])
        if len(groups) < 2:
            continue
        rep = kruskal_wallis(list(groups.values()))
        rows.append([factor, len(groups), f"{rep.statistic:.4f}",
                     rep.extras["df"], f"{rep.p_value:.6g}",
                     f"{rep.extras['epsilon_squared']:.4f}"])
    if not rows:
        raise UsageError("no factor varies across the records")
    return _csv_text(["factor", "levels", "H", "df", "p_value",
                      "epsilon_squared"], rows)


def report_spectra(records, args) -> str:
    cache = KernelCache(args.cache_dir or default_cache_dir())
    rows = []
    eig_rows = []
    for r in records:
        if r.get("mode") != "cv":
            continue
        fold = r["folds"][args.fold]
        km = cache.get(fold["cache_keys"]["train"])
        if km is None:
            sys.stderr.write(f"missing cached kernel for {r['dataset']} / "
                             f"{r['kernel_label']} fold {args.fold}\n")
            continue
        prof = spectral_profile(km.values)
        rows.append([r["dataset"], r["kernel_label"],
                     f"{prof.effective_rank_ratio:.6f}",
                     f"{prof.top1_variance:.6f}", f"{prof.top5_variance:.6f}",
                     f"{prof.diag_dominance:.4f}",
                     f"{prof.negative_eig_fraction:.6f}"])
        if args.eigenvalues:
            evals = np.sort(np.linalg.eigvalsh(km.values))[::-1]
            for i, ev in enumerate(evals):
                eig_rows.append([r["dataset"], r["kernel_label"], i, f"{ev:.10g}"])
    if args.eigenvalues:
        return _csv_text(["dataset", "kernel_label", "index", "eigenvalue"], eig_rows)
    if not rows:
        raise UsageError("no cached kernels found for any record")
    return _csv_text(["dataset", "kernel_label", "effective_rank_ratio",
                      "top1_variance", "top5_variance", "diag_dominance",
                      "negative_eig_fraction"], rows)


def report_learning(records, args) -> str:
    rows = []
    for r in records:
        if r.get("mode") != "learning":
            continue
        slope = r["slope"]
        for p in r["points"]:
            rows.append([r["dataset"], r["kernel_label"], p["fraction"],
                         "" if p["n_train_mean"] is None else f"{p['n_train_mean']:.1f}",
                         "" if p["mean_ba"] is None else f"{p['mean_ba']:.4f}",
                         "" if slope["slope"] is None else f"{slope['slope']:.5f}",
                         "" if slope["p_two_sided"] is None else f"{slope['p_two_sided']:.4g}"])
    if not rows:
        raise UsageError("no learning-curve records in input")
    return _csv_text(["dataset", "kernel_label", "fraction", "n_train_mean",
                      "mean_ba", "slope", "slope_p"], rows)


def report_seeds(records, args) -> str:
    sweeps = [r for r in records if r.get("mode") == "seeds"]
    if not sweeps:
        raise UsageError("no seed-sweep records in input")
    if getattr(args, "compare", False):
        from .harness import SeedSweepResult, compare_sweeps

        rows = []
        by_ds: dict[str, list[dict]] = {}
        for r in sweeps:
            by_ds.setdefault(r["dataset"], []).append(r)
        for ds, recs in sorted(by_ds.items()):
            for a_i in range(len(recs)):
                for b_i in range(a_i + 1, len(recs)):
                    a, b = recs[a_i], recs[b_i]
                    if a["seeds"] != b["seeds"]:
                        continue
                    xs, ys = np.array(a["per_seed_ba"]), np.array(b["per_seed_ba"])
                    rep = wilcoxon_signed_rank(xs, ys)
                    rows.append([ds, a["kernel_label"], b["kernel_label"],
                                 int(np.sum(xs > ys)), int(np.sum(ys > xs)),
                                 len(a["seeds"]), rep.p_value])
        # Bonferroni across the per-dataset comparisons: scalar divisor only
        m = max(len(rows), 1)
        rows = [r[:-1] + [f"{r[-1]:.6g}", str(bool(r[-1] < 0.05 / m))]
                for r in rows]
        return _csv_text(["dataset", "label_a", "label_b", "wins_a", "wins_b",
                          "n_seeds", "wilcoxon_p", "significant_bonferroni"],
                         rows)
    rows = []
    for r in sweeps:
        for seed, ba in zip(r["seeds"], r["per_seed_ba"]):
            rows.append([r["dataset"], r["kernel_label"], seed, f"{ba:.4f}",
                         f"{r['cov']:.5f}"])
    return _csv_text(["dataset", "kernel_label", "seed", "ba", "cov"], rows)


def report_suitability(records, args) -> str:
    """Non-linearity gap vs quantum advantage across datasets (JSON)."""
    entries = []
    for ds, recs in sorted(_by_dataset(records).items()):
        rbf = _best([r for r in recs if r["kernel_label"] == "rbf_scale"])
        lin = _best([r for r in recs if r["kernel_label"] == "linear"])
        best_c = _best([r for r in recs if _is_classical(r["kernel_label"])])
        best_q = _best([r for r in recs if _is_quantum_ideal(r["kernel_label"])])
        if not (rbf and lin and best_c and best_q):
            continue
        entries.append({
            "dataset": ds,
            "nl_gap": rbf["mean_ba"] - lin["mean_ba"],
            "delta": best_q["mean_ba"] - best_c["mean_ba"],
            "favorable": best_q["mean_ba"] > best_c["mean_ba"],
        })
    if len(entries) < 3:
        raise UsageError("suitability needs rbf, linear and quantum records "
                         "for at least 3 datasets")
    entries.sort(key=lambda e: -e["delta"])
    rho, p = suitability_correlation([e["nl_gap"] for e in entries],
                                     [e["delta"] for e in entries])
    return json.dumps({"rows": entries, "spearman_rho": rho, "p_value": p},
                      indent=2, sort_keys=True) + "\n"


def report_compare_kernels(args) -> str:
    if args.imported and args.config:
        experiments = load_config(args.config)
        cfg = experiments[0]
        if not cfg.kernel.is_quantum:
            raise UsageError("compare-kernels validation needs a quantum kernel config")
        ds = resolve_dataset(cfg.dataset)
        sub = cfg.dataset.get("subsample")
        if sub:
            ds = stratified_subsample(ds, 1000 if sub is True else int(sub),
                                      cfg.seed)
        chain = fit_pipeline(cfg.pipeline, ds.X, ds.y,
                             missing_zero_columns=ds.missing_zero_columns,
                             seed=cfg.seed)
        F = chain.transform(ds.X)
        imported = import_kernel(args.imported)
        report = validate_backend(imported, F, ds.y,
                                  cfg.kernel.feature_map_spec(cfg.pipeline.k),
                                  cfg.kernel.noise, c_grid=cfg.c_grid,
                                  seed=cfg.seed)
        return json.dumps(report, indent=2, sort_keys=True) + "\n"
    if args.file_a and args.file_b:
        ka = read_kernel(args.file_a)
        kb = read_kernel(args.file_b)
        agreement = compare_kernels(ka, kb)
        return json.dumps({"agreement": agreement.__dict__,
                           "shape": list(ka.values.shape)},
                          indent=2, sort_keys=True) + "\n"
    raise UsageError("compare-kernels needs either --imported with --config, "
                     "or --file-a with --file-b")


def cmd_report(args) -> int:
    if args.mode == "compare-kernels":
        _emit(report_compare_kernels(args), args.out)
        return 0
    records = _load_records(args.results)
    dispatch = {
        "summary": report_summary,
        "wilcoxon": report_wilcoxon,
        "friedman": report_friedman,
        "factors": report_factors,
        "spectra": report_spectra,
        "learning": report_learning,
        "seeds": report_seeds,
        "suitability": report_suitability,
    }
    _emit(dispatch[args.mode](records, args), args.out)
    return 0


# ---------------------------------------------------------------------------
# kernel / circuit / qkt commands


def cmd_kernel(args) -> int:
    if args.action == "export":
        km = read_kernel_csv(args.csv, pathway=args.pathway)
        write_kernel(args.out, km)
        sys.stderr.write(f"wrote {km.values.shape[0]}x{km.values.shape[1]} "
                         f"kernel to {args.out}\n")
        return 0
    km = import_kernel(args.file)
    if args.csv:
        write_kernel_csv(args.csv, km)
    summary = {
        "shape": list(km.values.shape),
        "pathway": km.provenance.pathway,
        "indefinite": km.provenance.indefinite,
        "min": float(km.values.min()),
        "max": float(km.values.max()),
    }
    sys.stdout.write(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_circuit(args) -> int:
    spec = FeatureMapSpec(args.map, args.k, args.reps)
    x = np.full(args.k, 0.5)
    raw = build_feature_map(spec, x)
    native = decompose_native(raw)
    mraw, mnat = circuit_metrics(raw), circuit_metrics(native)
    out = {
        "map": args.map, "k": args.k, "reps": args.reps,
        "n_qubits": raw.n_qubits,
        "raw": {"depth": mraw.depth, "two_qubit_count": mraw.two_qubit_count,
                "gate_slot_count": mraw.gate_slot_count,
                "total_gates": len(raw.gates)},
        "native": {"depth": mnat.depth, "two_qubit_count": mnat.two_qubit_count,
                   "gate_slot_count": mnat.gate_slot_count,
                   "total_gates": len(native.gates)},
    }
    sys.stdout.write(json.dumps(out, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_qkt(args) -> int:
    experiments = load_config(args.config)
    failures = 0
    with open(args.out, "w") as fh:
        for cfg in experiments:
            if not cfg.kernel.is_quantum:
                sys.stderr.write(f"{cfg.name}: skipping non-quantum kernel\n")
                continue
            try:
                ds = resolve_dataset(cfg.dataset)
                sub = cfg.dataset.get("subsample")
                if sub:
                    ds = stratified_subsample(ds, 1000 if sub is True else int(sub),
                                              cfg.seed)
                plan = make_fold_plan(ds.y, ds.groups, cfg.n_outer,
                                      cfg.n_inner, cfg.seed)
                spec = cfg.kernel.feature_map_spec(cfg.pipeline.k)
                for i, (tr, _) in enumerate(plan.outer):
                    chain = fit_pipeline(cfg.pipeline, ds.X[tr], ds.y[tr],
                                         missing_zero_columns=ds.missing_zero_columns,
                                         seed=cfg.seed)
                    res = optimize_theta(chain.transform(ds.X[tr]), ds.y[tr],
                                         spec, max_iter=args.max_iter)
                    fh.write(json.dumps({
                        "experiment": cfg.name, "dataset": ds.name, "fold": i,
                        "theta": [float(t) for t in res.theta_star],
                        "kta_initial": res.kta_initial,
                        "kta_final": res.kta_final,
                        "iterations": res.iterations,
                        "converged": res.converged,
                    }, sort_keys=True) + "\n")
            except Exception as exc:  # noqa: BLE001
                failures += 1
                sys.stderr.write(f"{cfg.name}: {exc}\n")
    return 2 if failures else 0


# ---------------------------------------------------------------------------


def build_parser() -> _Parser:
    p = _Parser(prog="qkbench", description=__doc__)
    p.add_argument("--version", action="version", version=f"qkbench {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a campaign config")
    run.add_argument("config")
    run.add_argument("--out", default="results.jsonl")
    run.add_argument("--cache-dir", default=None)
    run.add_argument("--workers", type=int, default=1)
    run.set_defaults(fn=cmd_run)

    rep = sub.add_parser("report", help="tabulate results")
    rep.add_argument("--mode", choices=REPORT_MODES, required=True)
    rep.add_argument("results", nargs="?")
    rep.add_argument("--out", default=None)
    rep.add_argument("--fold", type=int, default=0)
    rep.add_argument("--cache-dir", default=None)
    rep.add_argument("--eigenvalues", action="store_true")
    rep.add_argument("--pairs", action="store_true")
    rep.add_argument("--compare", action="store_true")
    rep.add_argument("--imported", default=None)
    rep.add_argument("--config", default=None)
    rep.add_argument("--file-a", default=None)
    rep.add_argument("--file-b", default=None)
    rep.set_defaults(fn=cmd_report)

    ker = sub.add_parser("kernel", help="kernel container import/export")
    ksub = ker.add_subparsers(dest="action", required=True)
    kexp = ksub.add_parser("export", help="CSV -> container")
    kexp.add_argument("--csv", required=True)
    kexp.add_argument("--out", required=True)
    kexp.add_argument("--pathway", default="imported",
                      choices=("ideal", "noisy", "classical", "imported"))
    kexp.set_defaults(fn=cmd_kernel)
    kimp = ksub.add_parser("import", help="container -> summary / CSV")
    kimp.add_argument("file")
    kimp.add_argument("--csv", default=None)
    kimp.set_defaults(fn=cmd_kernel)

    cir = sub.add_parser("circuit", help="inspect feature-map circuits")
    csub = cir.add_subparsers(dest="action", required=True)
    cins = csub.add_parser("inspect")
    cins.add_argument("--map", required=True, choices=FEATURE_MAP_KINDS)
    cins.add_argument("--k", type=int, required=True)
    cins.add_argument("--reps", type=int, default=2)
    cins.set_defaults(fn=cmd_circuit)

    qkt = sub.add_parser("qkt", help="per-fold theta optimisation")
    qkt.add_argument("config")
    qkt.add_argument("--out", default="qkt.jsonl")
    qkt.add_argument("--max-iter", type=int, default=170)
    qkt.set_defaults(fn=cmd_qkt)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "report" and args.mode != "compare-kernels" \
                and not args.results:
            raise UsageError("report needs a results file")
        if args.command == "kernel" and args.action == "import" and not args.file:
            raise UsageError("kernel import needs a file")
        return args.fn(args)
    except UsageError as exc:
        sys.stderr.write(f"usage error: {exc}\n")
        return 1
    except (ValueError, OSError, KernelFormatError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
