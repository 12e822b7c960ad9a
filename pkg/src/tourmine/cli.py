"""Pipeline command line: one subcommand per stage.

Stages read their inputs from, and write their artifacts into, the run
directory (``--out``).  Every stage is idempotent given identical inputs
and seed; all randomness derives from the single top-level seed through
named substreams.  Failures exit nonzero with a one-line JSON error on
stderr.
"""

from __future__ import annotations

import argparse
import json
import shutil
import sys
from pathlib import Path

import numpy as np

from tourmine import congestion as congestion_mod
from tourmine import datagen, evaluation, features, fusion, io, rulemine
from tourmine.mtdt import Hyperparams, MultiTaskDecisionTree, cross_validate_depth, oversample_minority
from tourmine.seeding import substream
from tourmine.types import TourDataError

DEFAULT_CONFIG = {
    "seed": 0,
    "out_dir": "run",
    "synth": {"n_tours": 1000, "class_noise": 0.0, "numeric_noise_var": 0.0},
    "fusion": {},
    "congestion": {"smooth_window": 2, "jenks_classes": 5, "radius_m": 6423.0},
    "features": {},
    "rulemine": {"min_rule_size": 2, "segment_confidence_floor": 0.7},
    "train": {
        "class_target": "tour_type",
        "max_depth_grid": [1, 2, 3],
        "min_samples_leaf": 1,
        "cv_folds": 10,
        "secondary_mode": "distance",
        "oversample": False,
        "test_fraction": 0.2,
    },
}

STAGES = ("synth", "fuse", "congest", "features", "segment", "train", "eval", "impact", "report")


def _deep_merge(base: dict, override: dict) -> dict:
    out = dict(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(out.get(key), dict):
            out[key] = _deep_merge(out[key], value)
        else:
            out[key] = value
    return out


def load_config(path: str | None, overrides: dict) -> dict:
    config = dict(DEFAULT_CONFIG)
    if path is not None:
        p = Path(path)
        if not p.exists():
            raise TourDataError(f"config file not found: {p}")
        config = _deep_merge(config, json.loads(p.read_text()))
    return _deep_merge(config, overrides)


def _out_dir(config: dict) -> Path:
    out = Path(config["out_dir"])
    out.mkdir(parents=True, exist_ok=True)
    return out


def _require(config: dict, section: str, key: str):
    try:
        return config[section][key]
    except KeyError:
        raise TourDataError(f"config is missing required key {section}.{key}") from None


def _write_json(payload, path: Path) -> Path:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True))
    return path


# ---------------------------------------------------------------------------
# stages


def cmd_synth(config: dict) -> str:
    out = _out_dir(config)
    spec = datagen.spec_from_config(config.get("synth", {}), seed=int(config["seed"]))
    bundle = datagen.generate(spec)
    bundle.write(out)
    return f"[synth] {spec.n_tours} tours, {len(bundle.dataset.zones)} zones -> {out}"


def cmd_fuse(config: dict) -> str:
    out = _out_dir(config)
    dataset = io.load_dataset(out)
    census = fusion.load_firm_census(out / "firms.csv", out / "make_use.csv")
    flows = fusion.load_flows(out / "flows.csv")
    fused, log = fusion.impute_activities(dataset, census, flows, seed=int(config["seed"]))
    io.save_stops(fused.tours, out / "stops_imputed.csv")
    fusion.save_imputation_log(log, out / "imputation_log.jsonl")
    low = sum(1 for e in log if e.low_confidence)
    return f"[fuse] imputed {len(log)} stops ({low} low-confidence) -> {out / 'stops_imputed.csv'}"


def cmd_congest(config: dict) -> str:
    out = _out_dir(config)
    cfg = config.get("congestion", {})
    proximity = congestion_mod.ProximityConfig(
        jenks_classes=int(cfg.get("jenks_classes", 5)),
        congested_radius_m=float(cfg.get("radius_m", 6423.0)),
    )
    series = congestion_mod.load_speed_series(out / "speeds.csv")
    cmap = congestion_mod.build_congestion_map(series, smooth_window=int(cfg.get("smooth_window", 2)))
    dataset = io.load_dataset(out)
    zones = list(dataset.zones.values())
    breaks: dict[str, list[float]] = {}
    for period, members in cmap.congested.items():
        if not members:
            breaks[period] = []
            continue
        distances = sorted(congestion_mod.proximity_distances(zones, members).values())
        try:
            breaks[period] = congestion_mod.jenks_breaks(distances, proximity.jenks_classes)
        except ValueError:
            breaks[period] = []
    expanded = congestion_mod.expand_map_by_proximity(cmap, zones, proximity.congested_radius_m)
    congestion_mod.save_congestion_map(expanded, out / "congestion.csv")
    congestion_mod.save_breaks(breaks, out / "breaks.json")
    n_congested = sum(len(v) for v in expanded.congested.values())
    return f"[congest] {len(series)} segments, {n_congested} congested zone-periods -> {out / 'congestion.csv'}"


def cmd_features(config: dict) -> str:
    out = _out_dir(config)
    dataset = io.load_dataset(
        {
            "tours": out / "tours.csv",
            "stops": out / "stops_imputed.csv",
            "shipments": out / "shipments.csv",
            "zones": out / "zones.csv",
            "travel_times": out / "travel_times.csv",
        }
    )
    cmap = congestion_mod.load_congestion_map(out / "congestion.csv")
    fcfg = features.FeatureConfig.from_json_dict(config.get("features", {}))
    if config.get("features", {}).get("rebin_departure"):
        fcfg.departure_edges = features.derive_departure_edges(
            [t.departure_minute for t in dataset.tours]
        )
    if (out / "segments.json").exists():
        segments = json.loads((out / "segments.json").read_text())
        fcfg.market_of_item = {
            item: seg["label"] for seg in segments for item in seg["items"]
        }
    matrix = features.build_matrix(dataset, cmap, fcfg)
    features.save_matrix(matrix, out / "matrix.csv")
    features.save_feature_config(fcfg, out / "feature_config.json")
    return f"[features] {len(matrix)} rows x {matrix.shape[1]} columns -> {out / 'matrix.csv'}"


def cmd_segment(config: dict) -> str:
    out = _out_dir(config)
    min_support = float(_require(config, "rulemine", "min_support"))
    min_confidence = float(_require(config, "rulemine", "min_confidence"))
    cfg = config.get("rulemine", {})
    transactions = rulemine.load_transactions(out / "transactions.csv")
    ruleset = rulemine.apriori(
        transactions,
        min_support=min_support,
        min_confidence=min_confidence,
        min_rule_size=int(cfg.get("min_rule_size", 2)),
    )
    segments = rulemine.segment_markets(
        ruleset, confidence_floor=float(cfg.get("segment_confidence_floor", 0.7))
    )
    rulemine.save_rules(ruleset, out / "rules.json")
    rulemine.save_segments(segments, out / "segments.json")
    return f"[segment] {len(ruleset.rules)} rules, {len(segments)} segments -> {out / 'rules.json'}"


def _load_matrix_targets(out: Path, class_target: str):
    matrix = features.load_matrix(out / "matrix.csv")
    fcfg = json.loads((out / "feature_config.json").read_text())
    covariates = [c for c in fcfg["covariates"] if c in matrix.columns]
    if class_target not in ("tour_type", "departure_class"):
        raise TourDataError(f"unknown class target {class_target!r}")
    X = matrix[covariates]
    y = np.column_stack(
        [matrix[class_target].to_numpy(dtype=object), matrix["n_stops"].to_numpy(dtype=object)]
    )
    return matrix, X, y, covariates, fcfg


def cmd_train(config: dict) -> str:
    out = _out_dir(config)
    tcfg = config.get("train", {})
    params = Hyperparams(
        max_depth_grid=tuple(int(d) for d in tcfg.get("max_depth_grid", [1, 2, 3])),
        min_samples_leaf=int(tcfg.get("min_samples_leaf", 1)),
        cv_folds=int(tcfg.get("cv_folds", 10)),
        secondary_mode=tcfg.get("secondary_mode", "distance"),
        oversample=bool(tcfg.get("oversample", False)),
        seed=int(config["seed"]),
    )
    class_target = tcfg.get("class_target", "tour_type")
    matrix, X, y, covariates, _ = _load_matrix_targets(out, class_target)

    rng = substream(params.seed, "train", "split")
    n = len(X)
    order = rng.permutation(n)
    n_test = int(round(float(tcfg.get("test_fraction", 0.2)) * n))
    test_idx = np.sort(order[:n_test])
    train_idx = np.sort(order[n_test:])
    X_train, y_train = X.iloc[train_idx], y[train_idx]

    if len(params.max_depth_grid) > 1:
        cv = cross_validate_depth(
            X_train,
            y_train,
            params.max_depth_grid,
            folds=params.cv_folds,
            min_samples_leaf=params.min_samples_leaf,
            secondary_mode=params.secondary_mode,
            seed=params.seed,
            oversample=params.oversample,
        )
        depth = cv.best_depth
        _write_json(cv.to_json_dict(), out / "cv_table.json")
    else:
        depth = params.max_depth_grid[0]
        _write_json({"best_depth": depth, "table": []}, out / "cv_table.json")

    if params.oversample:
        X_train, y_train = oversample_minority(X_train, y_train, seed=params.seed)
    tree = MultiTaskDecisionTree(
        max_depth=depth,
        min_samples_leaf=params.min_samples_leaf,
        secondary_mode=params.secondary_mode,
    ).fit(X_train, y_train)
    tree.to_json(out / "tree.json")
    (out / "tree.dot").write_text(tree.to_dot())
    _write_json(
        {
            "class_target": class_target,
            "covariates": covariates,
            "train": [str(t) for t in matrix["tour_id"].iloc[train_idx]],
            "test": [str(t) for t in matrix["tour_id"].iloc[test_idx]],
        },
        out / "split.json",
    )
    return (
        f"[train] depth={depth} nodes={tree.n_nodes_} on {len(X_train)} rows "
        f"(test held out: {len(test_idx)}) -> {out / 'tree.json'}"
    )


def _split_frames(out: Path):
    split = json.loads((out / "split.json").read_text())
    matrix, X, y, covariates, fcfg = _load_matrix_targets(out, split["class_target"])
    by_id = {tid: i for i, tid in enumerate(matrix["tour_id"].astype(str))}
    test_rows = [by_id[t] for t in split["test"] if t in by_id]
    train_rows = [by_id[t] for t in split["train"] if t in by_id]
    return matrix, X, y, covariates, fcfg, train_rows, test_rows


def cmd_eval(config: dict) -> str:
    out = _out_dir(config)
    tree = MultiTaskDecisionTree.from_json(out / "tree.json")
    matrix, X, y, _, _, train_rows, test_rows = _split_frames(out)
    rows = test_rows if test_rows else train_rows
    report = evaluation.evaluate_model(
        tree, X.iloc[rows], y[rows, 0], y[rows, 1].astype(float)
    )
    train_report = evaluation.evaluate_model(
        tree, X.iloc[train_rows], y[train_rows, 0], y[train_rows, 1].astype(float)
    )
    evaluation.save_eval_report(
        report,
        out / "eval_report.json",
        extra={"n_rows": len(rows), "training": train_report.to_json_dict()},
    )
    rho = "-" if report.rho is None else f"{report.rho:.3f}"
    return f"[eval] rho={rho} on {len(rows)} held-out rows -> {out / 'eval_report.json'}"


def cmd_impact(config: dict) -> str:
    out = _out_dir(config)
    tree = MultiTaskDecisionTree.from_json(out / "tree.json")
    matrix, X, y, covariates, fcfg, _, _ = _split_frames(out)
    ordered = tuple(c for c in fcfg.get("ordered_covariates", ()) if c in covariates)
    report = evaluation.impact_report(tree, X, covariates=covariates, ordered=ordered)
    evaluation.save_impact_report(report, out / "impact_report.json")
    top = max(report.covariates, key=lambda c: report.covariates[c].mi_share)
    return f"[impact] {len(report.covariates)} covariates, top={top} -> {out / 'impact_report.json'}"


REPORT_ARTIFACTS = (
    "ground_truth.json",
    "imputation_log.jsonl",
    "congestion.csv",
    "breaks.json",
    "matrix.csv",
    "feature_config.json",
    "rules.json",
    "segments.json",
    "tree.json",
    "tree.dot",
    "cv_table.json",
    "split.json",
    "eval_report.json",
    "impact_report.json",
)


def cmd_report(config: dict) -> str:
    out = _out_dir(config)
    report_dir = out / "report"
    report_dir.mkdir(exist_ok=True)
    copied = []
    for name in REPORT_ARTIFACTS:
        src = out / name
        if src.exists():
            shutil.copy2(src, report_dir / name)
            copied.append(name)
    _write_json({"artifacts": copied, "seed": config["seed"]}, report_dir / "manifest.json")
    return f"[report] bundled {len(copied)} artifacts -> {report_dir}"


COMMANDS = {
    "synth": cmd_synth,
    "fuse": cmd_fuse,
    "congest": cmd_congest,
    "features": cmd_features,
    "segment": cmd_segment,
    "train": cmd_train,
    "eval": cmd_eval,
    "impact": cmd_impact,
    "report": cmd_report,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="tourmine", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)
    for name in STAGES:
        p = sub.add_parser(name, help=f"run the {name} stage")
        p.add_argument("--config", default=None, help="JSON config path")
        p.add_argument("--seed", type=int, default=None, help="top-level seed")
        p.add_argument("--out", default=None, help="run directory")
        p.add_argument("--n-tours", type=int, default=None, help="synth: number of tours")
        p.add_argument("--min-support", type=float, default=None, help="segment: support floor")
        p.add_argument("--min-confidence", type=float, default=None, help="segment: confidence floor")
        p.add_argument("--radius-m", type=float, default=None, help="congest: proximity radius")
        p.add_argument(
            "--max-depth-grid",
            default=None,
            help="train: comma-separated depth grid, e.g. 1,2,3",
        )
        p.add_argument("--class-target", default=None, choices=["tour_type", "departure_class"])
    return parser


def _overrides_from_args(args: argparse.Namespace) -> dict:
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["out_dir"] = args.out
    if args.n_tours is not None:
        overrides.setdefault("synth", {})["n_tours"] = args.n_tours
    if args.min_support is not None:
        overrides.setdefault("rulemine", {})["min_support"] = args.min_support
    if args.min_confidence is not None:
        overrides.setdefault("rulemine", {})["min_confidence"] = args.min_confidence
    if args.radius_m is not None:
        overrides.setdefault("congestion", {})["radius_m"] = args.radius_m
    if args.max_depth_grid is not None:
        grid = [int(d) for d in str(args.max_depth_grid).split(",") if d]
        overrides.setdefault("train", {})["max_depth_grid"] = grid
    if args.class_target is not None:
        overrides.setdefault("train", {})["class_target"] = args.class_target
    return overrides


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = load_config(args.config, _overrides_from_args(args))
        message = COMMANDS[args.command](config)
    except (TourDataError, OSError, json.JSONDecodeError, ValueError, KeyError) as exc:
        print(
            json.dumps({"error": type(exc).__name__, "message": str(exc)}),
            file=sys.stderr,
        )
        return 2
    print(message)
    return 0


if __name__ == "__main__":
    sys.exit(main())
