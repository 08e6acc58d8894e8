"""Command-line entry point: `clams <subcommand> ...`.

Exit codes: 0 ok, 1 usage, 2 unreadable or malformed input, 3 computation failure.
Machine output is JSON with floats rounded to 12 significant digits.
"""

from __future__ import annotations

import argparse
import csv
import io as _io
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from . import __version__
from .ambiguity import clams_score
from .bench import DEFAULT_TECHNIQUES, METRICS, rank_stability
from .core import FEATURE_NAMES
from .datagen import (
    CLUSTME_PARAMS_HEADER,
    CLUSTME_SCORES_HEADER,
    PairRanges,
    SceneSpec,
    derive_seed,
    generate_scene,
    generate_training_set,
    highdim_mixture,
    ingest_clustme,
    read_training_csv,
    write_training_csv,
)
from .errors import ChecksumMismatch, ClamsError, FormatVersionMismatch, ParseError
from .evm import EVMS, ground_truth_ambiguity
from .features import DEFAULT_MASK, FeatureMask
from .gmm import GmmFitConfig
from .io import (
    REPORT_FORMAT_VERSION,
    dumps,
    format_float,
    read_highdim_csv,
    read_labels_csv,
    read_scatterplot,
    write_labels_csv,
    write_points_csv,
)
from .reducer import NEIGHBORHOOD_F1, TOY_EMBEDDER, HighDimDataset, ReducerConfig, optimize
from .separability import MODEL_FORMAT_VERSION, TrainConfig, ablate, load_model, save_model, select_config, train
from .svg import render_report

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_COMPUTE = 0, 1, 2, 3
PLOT_SUFFIXES = (".csv", ".json")
LABEL_SUFFIX = ".labels.csv"  # clustering files written next to generated scenes


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _emit(obj, args) -> None:
    text = dumps(obj, args.pretty)
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _model(path):
    try:
        return load_model(path)
    except OSError as exc:
        raise ParseError(f"cannot read model: {exc.strerror}", path) from None
    except (FormatVersionMismatch, ChecksumMismatch, KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"invalid model file: {exc}", path) from None


def _gmm_config(args, seed: int) -> GmmFitConfig:
    return GmmFitConfig(
        k_max=args.k_max,
        restarts=args.restarts,
        max_iters=args.max_iters,
        loglik_tol=args.tol,
        kneedle_sensitivity=args.sensitivity,
        seed=seed,
    )


def _plot_files(inputs) -> list[Path]:
    files = []
    for name in inputs:
        p = Path(name)
        if p.is_dir():
            found = sorted(
                f for f in p.iterdir()
                if f.is_file() and f.suffix.lower() in PLOT_SUFFIXES and not f.name.endswith(LABEL_SUFFIX)
            )
            if not found:
                raise ParseError("directory holds no .csv or .json scatterplots", p)
            files.extend(found)
        elif p.is_file():
            files.append(p)
        else:
            raise ParseError("no such file or directory", p)
    return sorted(files, key=lambda f: (f.name, str(f)))


def _score_one(job):
    path, model, cfg, svg_path = job
    plot = read_scatterplot(path)
    report = clams_score(plot, model, cfg)
    if svg_path is not None:
        Path(svg_path).write_text(render_report(plot, report), encoding="utf-8")
    return {"format_version": REPORT_FORMAT_VERSION, "file": path.name, **report.to_dict()}


def cmd_score(args) -> None:
    files = _plot_files(args.inputs)
    model = _model(args.model)
    batch = len(files) > 1 or any(Path(i).is_dir() for i in args.inputs)
    svg_dir = Path(args.svg) if args.svg and batch else None
    if svg_dir is not None:
        svg_dir.mkdir(parents=True, exist_ok=True)
    jobs = []
    for f in files:
        svg = None
        if args.svg:
            svg = svg_dir / f"{f.stem}.svg" if svg_dir is not None else Path(args.svg)
        # the seed depends on the file name only, so a plot scores the same alone or in a batch
        jobs.append((f, model, _gmm_config(args, derive_seed(args.seed, f.name)), svg))
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(args.jobs) as pool:
            reports = list(pool.map(_score_one, jobs))
    else:
        reports = [_score_one(j) for j in jobs]
    _emit({"format_version": REPORT_FORMAT_VERSION, "reports": reports} if batch else reports[0], args)


def _train_config(args) -> TrainConfig:
    return TrainConfig(
        n_trees=args.n_trees,
        max_depth=args.max_depth,
        learning_rate=args.learning_rate,
        subsample=args.subsample,
        min_leaf=args.min_leaf,
        cv_folds=args.cv_folds,
        seed=args.seed,
    )


def _training_data(args):
    if args.clustme:
        return ingest_clustme(*args.clustme)
    if args.data:
        return read_training_csv(args.data)
    return generate_training_set(args.synthetic, PairRanges(), args.mc_samples, seed=args.seed, refit=args.refit)


def _mask(text: str | None) -> FeatureMask:
    if text is None:
        return DEFAULT_MASK
    names = [n.strip().lower() for n in text.split(",") if n.strip()]
    unknown = sorted(set(names) - set(FEATURE_NAMES))
    if unknown or not names:
        raise UsageError(f"--features takes a comma list from {','.join(FEATURE_NAMES)}")
    return FeatureMask.from_flags([n in names for n in FEATURE_NAMES])


def cmd_train(args) -> None:
    mask = _mask(args.features)
    cfg = _train_config(args)
    data = _training_data(args)
    grid = None
    if args.select_config:
        cfg, scores = select_config(data, cfg, mask)
        grid = [{"n_trees": n, "max_depth": d, "cv_r2": r2} for (n, d), r2 in sorted(scores.items())]
    if args.save_data:
        write_training_csv(data, args.save_data)
    model = train(data, cfg, mask)
    save_model(model, args.model_out)
    report = {
        "model": Path(args.model_out).name,
        "format_version": MODEL_FORMAT_VERSION,
        "features": list(mask.names()),
        "training_meta": model.training_meta,
    }
    if grid is not None:
        report["config_grid"] = grid
    _emit(report, args)


def cmd_ablate(args) -> None:
    data = _training_data(args)
    rows = ablate(data, _train_config(args))
    table = [{"removed": list(r.removed), "r2": r.r2, "change_percent": r.change} for r in rows]
    if args.csv:
        with Path(args.csv).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["removed", "r2", "change_percent"])
            for r in rows:
                w.writerow(["+".join(r.removed) or "none", format_float(r.r2), format_float(r.change)])
    if args.table:
        buf = _io.StringIO()
        buf.write(f"{'removed':<10} {'R2':>8} {'change':>9}\n")
        for r in rows:
            buf.write(f"{'+'.join(r.removed) or 'none':<10} {r.r2:>8.4f} {r.change:>8.2f}%\n")
        sys.stdout.write(buf.getvalue())
        return
    _emit({"provenance": data.provenance, "rows": len(data.rows), "ablation": table}, args)


def _gen_pairs(args, out: Path) -> list[str]:
    data = generate_training_set(args.n, PairRanges(), args.mc_samples, seed=args.seed)
    names = ["pairs_params.csv", "pairs_scores.csv", "training.csv"]
    with (out / names[0]).open("w", newline="", encoding="utf-8") as fp, \
            (out / names[1]).open("w", newline="", encoding="utf-8") as fs:
        wp, ws = csv.writer(fp, lineterminator="\n"), csv.writer(fs, lineterminator="\n")
        wp.writerow(CLUSTME_PARAMS_HEADER)
        ws.writerow(CLUSTME_SCORES_HEADER)
        for i, (spec, (_, label)) in enumerate(zip(data.pairs, data.rows)):
            fields = []
            for c in (spec.first, spec.second):
                fields += [c.center[0], c.center[1], c.major_sd, c.minor_sd, c.angle, c.soft_count]
            wp.writerow([f"pair-{i:05d}"] + [format_float(v) for v in fields])
            ws.writerow([f"pair-{i:05d}", format_float(label)])
    write_training_csv(data, out / names[2])
    return names


def _gen_scenes(args, out: Path) -> list[str]:
    names = []
    for i in range(args.n):
        spec = SceneSpec(
            k=args.k,
            center_box=((0.0, args.box), (0.0, args.box)),
            sd_range=tuple(args.sd),
            ellipticity_range=tuple(args.ellipticity),
            count_range=tuple(args.count),
            seed=derive_seed(args.seed, i, "scene"),
        )
        plot, labels = generate_scene(spec)
        stem = f"scene-{i:03d}"
        write_points_csv(plot.points, out / f"{stem}.csv")
        write_labels_csv(labels, out / f"{stem}{LABEL_SUFFIX}")
        names += [f"{stem}.csv", f"{stem}{LABEL_SUFFIX}"]
    return names


def _gen_highdim(args, out: Path) -> list[str]:
    rows = highdim_mixture(args.n, args.dim, args.k, args.separation, seed=args.seed)
    with (out / "highdim.csv").open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([f"x{j}" for j in range(args.dim)])
        for r in rows:
            w.writerow([format_float(v) for v in r])
    return ["highdim.csv"]


def cmd_generate(args) -> None:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    kind = args.kind
    files = {"pairs": _gen_pairs, "scenes": _gen_scenes, "highdim": _gen_highdim}[kind](args, out)
    _emit({"kind": kind, "seed": args.seed, "files": files}, args)


def _clustering_groups(root: Path) -> dict[str, list[Path]]:
    if not root.is_dir():
        raise ParseError("not a directory", root)
    subdirs = sorted(d for d in root.iterdir() if d.is_dir())
    if subdirs:
        groups = {d.name: sorted(f for f in d.iterdir() if f.suffix.lower() == ".csv") for d in subdirs}
    else:
        groups = {root.name: sorted(f for f in root.iterdir() if f.suffix.lower() == ".csv")}
    for name, files in groups.items():
        if len(files) < 2:
            raise ParseError(f"scatterplot {name!r} needs at least 2 clustering CSVs", root / name)
    return groups


def cmd_ground_truth(args) -> None:
    groups = _clustering_groups(Path(args.clusterings))
    result = {}
    for name, files in groups.items():
        clusterings = [read_labels_csv(f) for f in files]
        result[name] = {e: ground_truth_ambiguity(clusterings, e, args.unassigned) for e in EVMS}
    order = sorted(result, key=lambda n: (-round(result[n][args.evm], 12), n))
    if args.ranking:
        with Path(args.ranking).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "id", args.evm])
            for r, name in enumerate(order, 1):
                w.writerow([r, name, format_float(result[name][args.evm])])
    _emit(result, args)


def _manifest(path: Path) -> dict[str, list[Path]]:
    groups: dict[str, list[Path]] = {}
    try:
        fh = path.open(newline="", encoding="utf-8")
    except OSError as exc:
        raise ParseError(f"cannot open: {exc.strerror}", path) from None
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip().lower() for h in header] != ["path", "group"]:
            raise ParseError("expected header path,group", path, 1)
        for row in reader:
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 2:
                raise ParseError(f"expected 2 fields, got {len(row)}", path, reader.line_num)
            p = Path(row[0].strip())
            groups.setdefault(row[1].strip(), []).append(p if p.is_absolute() else path.parent / p)
    if not groups:
        raise ParseError("manifest lists no datasets", path)
    return groups


def cmd_bench(args) -> None:
    groups = _manifest(Path(args.manifest))
    model = _model(args.model) if args.model else None
    names = args.techniques.split(",") if args.techniques else [t.name for t in DEFAULT_TECHNIQUES]
    by_name = {t.name: t for t in DEFAULT_TECHNIQUES}
    if any(n not in by_name for n in names):
        raise UsageError(f"--techniques takes names from {','.join(by_name)}")
    techniques = [by_name[n] for n in names]
    out = {"metric": args.metric, "budget": args.budget, "seed": args.seed, "groups": {}}
    ranking_rows = []
    for group in sorted(groups):
        plots = [read_scatterplot(p) for p in groups[group]]
        report = rank_stability(plots, techniques, args.metric, args.budget, args.seed)
        entry = report.to_dict()
        if model is not None:
            entry["clams"] = {
                plot.id: clams_score(plot, model, GmmFitConfig(seed=derive_seed(args.seed, path.name))).score
                for plot, path in zip(plots, groups[group])
            }
            entry["clams_mean"] = sum(entry["clams"].values()) / len(plots)
        out["groups"][group] = entry
        for dataset, ranking in report.rankings.items():
            for r, tech in enumerate(ranking, 1):
                ranking_rows.append([group, dataset, r, tech, format_float(report.scores[dataset][tech])])
    if args.ranking:
        with Path(args.ranking).open("w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["group", "dataset", "rank", "technique", "score"])
            w.writerows(ranking_rows)
    _emit(out, args)


def cmd_reduce(args) -> None:
    Z = HighDimDataset(read_highdim_csv(args.data))
    model = _model(args.model)
    cfg = ReducerConfig(
        tau=args.tau,
        budget_phase1=args.budget1,
        budget_phase2=args.budget2,
        seed=args.seed,
        gmm=GmmFitConfig(k_max=args.k_max, restarts=args.restarts, seed=args.seed),
    )
    result = optimize(Z, TOY_EMBEDDER, NEIGHBORHOOD_F1, model, cfg)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_points_csv(result.intermediate.points, out / "intermediate.csv")
    write_points_csv(result.final.points, out / "final.csv")
    _emit({**result.report, "embeddings": {"intermediate": "intermediate.csv", "final": "final.csv"}}, args)


def _add_common(p) -> None:
    p.add_argument("--seed", type=int, default=0, help="master seed (default 0)")
    p.add_argument("--pretty", action="store_true", help="indented JSON")
    p.add_argument("-o", "--output", help="write JSON here instead of stdout")


def _add_gmm(p, k_max=20, restarts=5) -> None:
    p.add_argument("--k-max", type=int, default=k_max)
    p.add_argument("--restarts", type=int, default=restarts)
    p.add_argument("--max-iters", type=int, default=200)
    p.add_argument("--tol", type=float, default=1e-4, help="EM tolerance on mean per-point log-likelihood")
    p.add_argument("--sensitivity", type=float, default=1.0, help="Kneedle sensitivity")


def _add_training(p) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--clustme", nargs=2, metavar=("PARAMS_CSV", "SCORES_CSV"))
    src.add_argument("--synthetic", type=int, metavar="N_PAIRS")
    src.add_argument("--data", metavar="TRAINING_CSV", help="features+label CSV")
    p.add_argument("--mc-samples", type=int, default=2000, help="surrogate label samples per pair")
    p.add_argument("--refit", action="store_true", help="synthetic features from a 2-component fit of sampled points")
    d = TrainConfig()
    p.add_argument("--n-trees", type=int, default=d.n_trees)
    p.add_argument("--max-depth", type=int, default=d.max_depth)
    p.add_argument("--learning-rate", type=float, default=d.learning_rate)
    p.add_argument("--subsample", type=float, default=d.subsample)
    p.add_argument("--min-leaf", type=int, default=d.min_leaf)
    p.add_argument("--cv-folds", type=int, default=d.cv_folds)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="clams", description="Cluster-ambiguity scoring of scatterplots.")
    parser.add_argument(
        "--version",
        action="version",
        version=f"clams {__version__} (model format {MODEL_FORMAT_VERSION}, report format {REPORT_FORMAT_VERSION})",
    )
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("score", help="ambiguity report(s) for scatterplot files or directories")
    p.add_argument("inputs", nargs="+", help="point CSV/JSON files or directories of them")
    p.add_argument("--model", required=True)
    p.add_argument("--svg", help="SVG path (single input) or directory (batch)")
    p.add_argument("--jobs", type=int, default=1, help="worker processes for batch scoring")
    _add_gmm(p)
    _add_common(p)
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("train", help="fit a separability model")
    _add_training(p)
    p.add_argument("--model-out", required=True)
    p.add_argument("--features", help=f"comma list from {','.join(FEATURE_NAMES)} (default drops dd)")
    p.add_argument("--select-config", action="store_true", help="choose trees/depth by CV")
    p.add_argument("--save-data", help="also write the training rows as CSV")
    _add_common(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("ablate", help="CV R^2 with single features and feature pairs removed")
    _add_training(p)
    p.add_argument("--csv", help="write the ablation table as CSV")
    p.add_argument("--table", action="store_true", help="print an aligned text table instead of JSON")
    _add_common(p)
    p.set_defaults(func=cmd_ablate)

    p = sub.add_parser("generate", help="write synthetic stimuli")
    p.add_argument("kind", choices=("pairs", "scenes", "highdim"))
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=100, help="pairs, scenes, or high-dim points")
    p.add_argument("--mc-samples", type=int, default=2000)
    p.add_argument("--k", type=int, default=3, help="blobs per scene or mixture components")
    p.add_argument("--box", type=float, default=20.0, help="scene center box side")
    p.add_argument("--sd", type=float, nargs=2, default=(0.5, 2.0), metavar=("LO", "HI"))
    p.add_argument("--ellipticity", type=float, nargs=2, default=(0.3, 1.0), metavar=("LO", "HI"))
    p.add_argument("--count", type=int, nargs=2, default=(100, 300), metavar=("LO", "HI"))
    p.add_argument("--dim", type=int, default=5)
    p.add_argument("--separation", type=float, default=4.0)
    _add_common(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("ground-truth", help="ambiguity from several observers' clusterings")
    p.add_argument("clusterings", help="directory with one subdirectory of label CSVs per scatterplot")
    p.add_argument("--evm", choices=EVMS, default="ami", help="measure used for the ranking")
    p.add_argument("--unassigned", choices=("exclude", "singleton"), default="exclude")
    p.add_argument("--ranking", help="write the ranking CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_ground_truth)

    p = sub.add_parser("bench", help="rank stability of clustering techniques per dataset group")
    p.add_argument("manifest", help="CSV with header path,group")
    p.add_argument("--metric", choices=sorted(METRICS), default="silhouette")
    p.add_argument("--budget", type=int, default=20)
    p.add_argument("--techniques", help="comma list of technique names")
    p.add_argument("--model", help="also score each dataset's ambiguity")
    p.add_argument("--ranking", help="write the per-dataset rankings CSV here")
    _add_common(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("reduce", help="lower the ambiguity of a 2-D embedding within an accuracy tolerance")
    p.add_argument("data", help="high-dimensional CSV, one row per point")
    p.add_argument("--model", required=True)
    p.add_argument("--out-dir", required=True, help="directory for intermediate.csv and final.csv")
    d = ReducerConfig()
    p.add_argument("--tau", type=float, default=d.tau)
    p.add_argument("--budget1", type=int, default=d.budget_phase1)
    p.add_argument("--budget2", type=int, default=d.budget_phase2)
    p.add_argument("--k-max", type=int, default=d.gmm.k_max)
    p.add_argument("--restarts", type=int, default=d.gmm.restarts)
    _add_common(p)
    p.set_defaults(func=cmd_reduce)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except UsageError as exc:
        print(f"clams: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ParseError as exc:
        print(f"clams: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except (ClamsError, ValueError, ArithmeticError) as exc:
        print(f"clams: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except OSError as exc:
        print(f"clams: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
