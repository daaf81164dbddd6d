"""Command-line interface: ``maxperm test | simulate | screen``.

Exit codes: 0 success, 2 usage or configuration error, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import warnings
from importlib import resources

import numpy as np
import yaml

from maxperm import __version__
from maxperm.adjust import altman, benjamini_hochberg, miller_siegmund, modified_bonferroni, normal_scores, unadjusted_min_p
from maxperm.datagen import GenConfig
from maxperm.errors import ConfigError, MaxPermError, PlanError
from maxperm.experiments import StudyConfig, run_study
from maxperm.io import SCHEMA_VERSION, atomic_write, read_csv, rows_to_csv, to_json
from maxperm.permutation import PermPlan, permutation_test
from maxperm.scan import SplitLayout, TrimPolicy
from maxperm.screening import ScreenConfig, Utility, inclusion_experiment, marginal_screen
from maxperm.stats import StatKind

logger = logging.getLogger("maxperm")

EXIT_OK, EXIT_USAGE, EXIT_DATA = 0, 2, 3
CORRECTIONS = ("unadjusted", "ms", "altman", "modbonf")


class _UsageError(Exception):
    pass


# -- helpers -----------------------------------------------------------------
def _emit(text: str, out: str | None) -> None:
    if out:
        atomic_write(out, text)
    else:
        sys.stdout.write(text)


def _split_names(s: str | None) -> list[str] | None:
    if s is None:
        return None
    names = [t.strip() for t in s.split(",") if t.strip()]
    if not names:
        raise _UsageError("empty feature list")
    return names


def _trim(args) -> TrimPolicy:
    try:
        return TrimPolicy(args.epsilon, args.min_group)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _load_features(args):
    table = read_csv(args.input)
    if args.outcome not in table.header:
        raise MaxPermError(f"unknown outcome column {args.outcome!r}; available: {list(table.header)}")
    features = _split_names(args.features) or [h for h in table.header if h != args.outcome]
    if not features:
        raise ConfigError("no feature columns to analyse")
    sub = read_csv(args.input, usecols=[args.outcome] + [f for f in features if f != args.outcome])
    return sub.column(args.outcome), features, sub


def resolve_config(name_or_path: str) -> tuple[str, dict]:
    """Load a YAML study config from a path or a shipped config name."""
    if os.path.exists(name_or_path):
        path, text = name_or_path, open(name_or_path, encoding="utf-8").read()
    else:
        stem = name_or_path[:-5] if name_or_path.endswith(".yaml") else name_or_path
        ref = resources.files("maxperm") / "configs" / f"{stem}.yaml"
        if not ref.is_file():
            raise ConfigError(f"no config file or shipped config named {name_or_path!r}; shipped: {shipped_configs()}")
        path, text = stem, ref.read_text(encoding="utf-8")
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: malformed YAML: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a mapping")
    return path, doc


def shipped_configs() -> list[str]:
    root = resources.files("maxperm") / "configs"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".yaml"))


FDR_COLUMNS = ("p_perm", "p_unadjusted", "p_miller_siegmund", "p_altman", "p_modified_bonferroni")


def _corrections(scan, names, trim: TrimPolicy) -> dict:
    out = {}
    eps = trim.epsilon
    for name in names:
        if name == "unadjusted":
            out["p_unadjusted"] = unadjusted_min_p(scan).p
        elif name == "ms":
            if eps <= 0:
                raise ConfigError("Miller-Siegmund correction needs --epsilon > 0")
            b = float(np.max(normal_scores(scan)))
            out["p_miller_siegmund"] = miller_siegmund(b * b, eps, 1.0 - eps).p
        elif name == "altman":
            out["p_altman"] = altman(unadjusted_min_p(scan).p, eps).p
        elif name == "modbonf":
            out["p_modified_bonferroni"] = modified_bonferroni(scan).p
    return out


# -- subcommands ---------------------------------------------------------------
def cmd_test(args) -> int:
    if args.seed is None:
        raise _UsageError("--seed is required: permutation tests are stochastic")
    kind = StatKind.parse(args.stat)
    trim = _trim(args)
    plan = PermPlan(args.permutations, args.seed)
    y, features, table = _load_features(args)
    if np.ptp(y) == 0.0:
        warnings.warn(f"outcome column {args.outcome!r} is constant; every p-value is 1", stacklevel=1)
    rows = []
    for name in features:
        x = table.column(name)
        layout = SplitLayout.from_x(x, trim)
        res = permutation_test(y, x, kind, trim, plan, workers=args.workers, layout=layout)
        scan = res.scan
        row = {
            "feature": name,
            "n": scan.n,
            "stat": kind.value,
            "max_stat": scan.max_stat,
            "threshold": scan.argmax_threshold,
            "n_low": scan.argmax_n1,
            "p_perm": res.p_value,
            "b_geq": res.b_geq,
        }
        row.update(_corrections(scan, args.corrections, trim))
        rows.append(row)
    if args.fdr and rows:
        if args.fdr not in rows[0]:
            raise _UsageError(f"--fdr {args.fdr}: column not computed (add it with --corrections)")
        adj = benjamini_hochberg([r[args.fdr] for r in rows])
        for r, q in zip(rows, adj):
            r[f"{args.fdr}_bh"] = float(q)
    settings = {
        "stat": kind.value,
        "permutations": args.permutations,
        "seed": args.seed,
        "epsilon": trim.epsilon,
        "min_group": trim.min_group,
        "corrections": list(args.corrections),
        "fdr": args.fdr,
    }
    _write_report("test", settings, rows, args)
    return EXIT_OK


def cmd_screen(args) -> int:
    utility = Utility(args.utility)
    if utility is Utility.PERM_PVALUE and args.seed is None:
        raise _UsageError("--seed is required for the perm-pvalue utility")
    trim = _trim(args)
    plan = PermPlan(args.permutations, args.seed if args.seed is not None else 0)
    cfg = ScreenConfig(utility, args.k, StatKind.parse(args.stat), trim, plan)
    y, features, table = _load_features(args)
    X = np.column_stack([table.column(f) for f in features])
    res = marginal_screen(y, X, cfg, workers=args.workers)
    selected = set(res.selected.tolist())
    rows = [
        {"feature": f, "utility": float(res.utilities[j]), "rank": res.rank_of(j), "selected": j in selected}
        for j, f in enumerate(features)
    ]
    rows.sort(key=lambda r: r["rank"])
    settings = {
        "utility": utility.value,
        "k": args.k,
        "stat": cfg.kind.value,
        "epsilon": trim.epsilon,
        "min_group": trim.min_group,
        "permutations": args.permutations if utility is Utility.PERM_PVALUE else None,
        "seed": args.seed,
        "constant_columns": [features[j] for j in res.constant_columns],
    }
    _write_report("screen", settings, rows, args)
    return EXIT_OK


def _screening_study(path: str, doc: dict, args) -> tuple[dict, list[dict]]:
    block = doc["screening"]
    allowed = {"name", "generator", "utilities", "k_list", "reps", "stat", "trim", "permutations"}
    if not isinstance(block, dict) or set(block) - allowed:
        raise ConfigError(f"{path}: screening block accepts keys {sorted(allowed)}")
    try:
        gen = GenConfig(**{k: (tuple(v) if isinstance(v, list) else v) for k, v in block["generator"].items()})
        trim = TrimPolicy(**block.get("trim", {}))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"{path}: invalid screening config: {exc}") from exc
    reps = int(args.reps or block.get("reps", 100))
    k_list = tuple(block.get("k_list", (4, 10, 20)))
    rows = []
    for u in block.get("utilities", ["maxstat", "dcor"]):
        cfg = ScreenConfig(Utility(u), k_list[0], block.get("stat", "t"), trim, PermPlan(block.get("permutations", 1000), args.seed))
        table = inclusion_experiment(gen, cfg, k_list, reps, args.seed, args.workers)
        for r in table.rows():
            rows.append({"study": block.get("name", path), **r})
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "study": block.get("name", path),
        "config": block,
        "master_seed": args.seed,
        "reps": reps,
        "versions": {"maxperm": __version__, "numpy": np.__version__},
    }
    return manifest, rows


def cmd_simulate(args) -> int:
    if args.seed is None:
        raise _UsageError("--seed is required: simulation studies are stochastic")
    path, doc = resolve_config(args.config)
    if "screening" in doc:
        manifest, rows = _screening_study(path, doc, args)
    else:
        doc = dict(doc)
        doc["master_seed"] = args.seed
        if args.reps is not None:
            doc["reps"] = args.reps
        if args.permutations is not None:
            doc["permutations"] = args.permutations
        cfg = StudyConfig.from_dict(doc)
        report = run_study(cfg, workers=args.workers)
        manifest, rows = report.manifest(), report.rows()
    if args.output == "json":
        text = to_json({**manifest, "command": "simulate", "rows": rows})
    else:
        text = rows_to_csv(rows)
    if args.out:
        # the report lands only after every replicate succeeded
        atomic_write(args.out, text)
        atomic_write(args.out + ".manifest.json", to_json(manifest))
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _write_report(command: str, settings: dict, rows: list[dict], args) -> None:
    if args.output == "json":
        doc = {
            "schema_version": SCHEMA_VERSION,
            "command": command,
            "maxperm_version": __version__,
            "settings": settings,
            "results": rows,
        }
        _emit(to_json(doc), args.out)
    else:
        columns = []
        for r in rows:
            columns += [c for c in r if c not in columns]
        _emit(rows_to_csv(rows, columns), args.out)


# -- parser ------------------------------------------------------------------
def _common(p: argparse.ArgumentParser, data: bool = True) -> None:
    if data:
        p.add_argument("--input", "-i", required=True, help="CSV file with a header row")
        p.add_argument("--outcome", "-y", required=True, help="outcome column name")
        p.add_argument("--features", "-x", help="comma-separated feature columns (default: all others)")
        p.add_argument("--stat", default="t", choices=["t", "welch", "mw", "chisq"])
        p.add_argument("--epsilon", type=float, default=0.1, help="trimming fraction per tail")
        p.add_argument("--min-group", type=int, default=5, help="minimum group size of a split")
    p.add_argument("--permutations", "-B", type=int, default=None if not data else 1000)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--output", choices=["json", "csv"], default="json")
    p.add_argument("--out", "-o", help="output file (default: stdout); written atomically")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="maxperm", description="Maximal permutation tests of association.")
    parser.add_argument("--version", action="version", version=f"maxperm {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("test", help="test outcome/feature association in a CSV file")
    _common(p)
    p.add_argument(
        "--corrections",
        nargs="*",
        choices=CORRECTIONS,
        default=[],
        help="analytic comparator p-values to report next to the permutation p",
    )
    p.add_argument(
        "--fdr",
        nargs="?",
        const="p_perm",
        choices=FDR_COLUMNS,
        help="append Benjamini-Hochberg adjusted values of a p-value column (default p_perm)",
    )
    p.set_defaults(func=cmd_test)

    p = sub.add_parser("simulate", help="run a size/power study from a YAML config")
    p.add_argument("config", help="config path or shipped config name (list them with `maxperm configs`)")
    p.add_argument("--reps", type=int, default=None, help="override the replicate count")
    _common(p, data=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("screen", help="rank features by marginal association")
    _common(p)
    p.add_argument("--utility", default="maxstat", choices=[u.value for u in Utility])
    p.add_argument("--k", type=int, default=4, help="number of features to keep")
    p.set_defaults(func=cmd_screen)

    p = sub.add_parser("configs", help="list shipped simulation configs")
    p.set_defaults(func=lambda args: print("\n".join(shipped_configs())) or EXIT_OK)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    try:
        return args.func(args)
    except (_UsageError, ConfigError, PlanError) as exc:
        print(f"maxperm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MaxPermError as exc:
        print(f"maxperm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
