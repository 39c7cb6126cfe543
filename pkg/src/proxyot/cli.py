"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data/format error, 3 numeric error.
Results go to ``--out``; diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from . import io as pio
from .errors import DataError, NumericError, ProxyOTError, UsageError
from .fixture import FixtureSpec, generate_fixture, write_fixture
from .learner import LearnConfig, learn
from .numerics import l2_normalize_rows
from .pipeline import MODES, RunSpec, bench_solvers, run
from .retrieval import build_text_proxies, retrieve
from .solvers import ALGORITHMS, ClassMarginal, SolverConfig, pseudo_labels, solve

__all__ = ["main"]


class _Parser(argparse.ArgumentParser):
    """argparse that raises instead of exiting, so exit codes stay ours."""

    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().rstrip()}")


def _add_io_flags(p: argparse.ArgumentParser, labels: str = "optional") -> None:
    p.add_argument("--images", required=True, help="EMB1 file of image embeddings")
    p.add_argument("--kb", required=True, help="knowledge-base JSON file")
    if labels != "none":
        p.add_argument(
            "--labels",
            required=labels == "required",
            help="gold labels, one index or class name per line",
        )
    p.add_argument(
        "--marginal",
        help="JSON array of class weights for the transport column marginal "
        "(default: uniform)",
    )


def _add_solver_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--algorithm", choices=ALGORITHMS, help="transport solver")
    p.add_argument("--tau-ot", type=float, help="transport temperature")
    p.add_argument("--max-iterations", type=int, help="solver iteration cap")
    p.add_argument("--tolerance", type=float, help="marginal violation target")


def _add_learn_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tau-learn", type=float, help="softmax temperature for learning")
    p.add_argument("--lr", type=float, help="learning rate")
    p.add_argument("--momentum", type=float, help="descent momentum in [0, 1)")
    p.add_argument("--epochs", type=int, help="maximum learning epochs")


def _add_retrieval_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--k", type=int, help="descriptions retrieved per class (default 3)")


def _solver_config(args) -> SolverConfig:
    kw = {}
    if getattr(args, "algorithm", None) is not None:
        kw["algorithm"] = args.algorithm
    if getattr(args, "tau_ot", None) is not None:
        kw["tau_ot"] = args.tau_ot
    if getattr(args, "max_iterations", None) is not None:
        kw["max_iterations"] = args.max_iterations
    if getattr(args, "tolerance", None) is not None:
        kw["tolerance"] = args.tolerance
    return SolverConfig(**kw)


def _learn_config(args) -> LearnConfig:
    kw = {}
    if getattr(args, "tau_learn", None) is not None:
        kw["tau_learn"] = args.tau_learn
    if getattr(args, "lr", None) is not None:
        kw["learning_rate"] = args.lr
    if getattr(args, "momentum", None) is not None:
        kw["momentum"] = args.momentum
    if getattr(args, "epochs", None) is not None:
        kw["max_epochs"] = args.epochs
    return LearnConfig(**kw)


def _run_spec(args, mode: str | None = None) -> RunSpec:
    kw = {}
    if getattr(args, "k", None) is not None:
        kw["k"] = args.k
    return RunSpec(
        mode=mode if mode is not None else args.mode,
        images=args.images,
        kb=args.kb,
        labels=getattr(args, "labels", None),
        marginal=getattr(args, "marginal", None),
        solver=_solver_config(args),
        learn=_learn_config(args),
        seed=getattr(args, "seed", None),
        **kw,
    )


def _predictions_csv_path(out: Path) -> Path:
    return out.with_suffix(".csv") if out.suffix else out.with_name(out.name + ".csv")


def _similarity_instance(args):
    """Image/proxy similarity matrix plus marginal, shared by plan and bench-ot."""
    images = pio.read_embeddings(args.images)
    kb = pio.read_knowledge_base(args.kb)
    if images.shape[1] != kb.dim:
        raise DataError(
            f"{args.images}: image rows have dim {images.shape[1]} but "
            f"{args.kb} declares dim {kb.dim}"
        )
    images = l2_normalize_rows(images)
    k = args.k if getattr(args, "k", None) is not None else 3
    proxies = build_text_proxies(kb, retrieve(images, kb, k))
    if getattr(args, "marginal", None):
        q = pio.read_marginal(args.marginal)
        if len(q) != kb.n_classes:
            raise DataError(
                f"{args.marginal}: marginal has {len(q)} entries but "
                f"{args.kb} has {kb.n_classes} classes"
            )
    else:
        q = ClassMarginal.uniform(kb.n_classes)
    return images @ proxies.w.T, q, kb.names


def _cmd_pipeline(args) -> int:
    report = run(_run_spec(args))
    out = Path(args.out)
    pio.write_report(report, out)
    pio.write_predictions_csv(
        _predictions_csv_path(out), report.predictions, report.class_names
    )
    if report.accuracy is not None:
        print(f"{args.mode}: accuracy {report.accuracy:.4f} -> {out}")
    else:
        print(f"{args.mode}: {report.n_images} predictions -> {out}")
    return 0


def _cmd_eval(args) -> int:
    return _cmd_pipeline(args)


def _cmd_classify(args) -> int:
    report = run(_run_spec(args))
    pio.write_predictions_csv(Path(args.out), report.predictions, report.class_names)
    print(f"{args.mode}: {report.n_images} predictions -> {args.out}")
    return 0


def _cmd_retrieve(args) -> int:
    images = pio.read_embeddings(args.images)
    kb = pio.read_knowledge_base(args.kb)
    images = l2_normalize_rows(images)
    k = args.k if args.k is not None else 3
    result = retrieve(images, kb, k)
    doc = {
        "k": k,
        "classes": [
            {
                "name": rec.name,
                "selected_indices": idx.tolist(),
                "scores": scores.tolist(),
                "descriptions": [rec.descriptions[i] for i in idx],
            }
            for rec, idx, scores in zip(kb.classes, result.selected, result.scores)
        ],
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(f"retrieved top-{k} descriptions for {kb.n_classes} classes -> {args.out}")
    return 0


def _cmd_plan(args) -> int:
    similarity, q, names = _similarity_instance(args)
    cfg = _solver_config(args)
    plan = solve(similarity, cfg, q)
    guide = pseudo_labels(plan)
    doc = {
        "algorithm": cfg.algorithm,
        "tau_ot": cfg.tau_ot,
        "iterations_used": plan.iterations_used,
        "final_row_violation": plan.final_row_violation,
        "final_col_violation": plan.final_col_violation,
        "converged": plan.converged(cfg.tolerance),
        "class_names": names,
        "pseudo_labels": guide.p.tolist(),
    }
    Path(args.out).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")
    print(
        f"{cfg.algorithm}: {plan.iterations_used} iterations, violations "
        f"({plan.final_row_violation:.3e}, {plan.final_col_violation:.3e}) -> {args.out}"
    )
    return 0


def _cmd_learn(args) -> int:
    images = pio.read_embeddings(args.images)
    kb = pio.read_knowledge_base(args.kb)
    images = l2_normalize_rows(images)
    k = args.k if args.k is not None else 3
    proxies = build_text_proxies(kb, retrieve(images, kb, k))
    plan = solve(images @ proxies.w.T, _solver_config(args), _marginal_for(args, kb))
    guide = pseudo_labels(plan)
    weights, trace = learn(images, guide, proxies, _learn_config(args))
    pio.write_embeddings(weights.w, args.out)
    print(
        f"learned {weights.w.shape[0]} proxies in {trace.epochs_run} epochs "
        f"({trace.stop_reason}, final loss {trace.losses[-1]:.6g}) -> {args.out}"
    )
    return 0


def _marginal_for(args, kb) -> ClassMarginal:
    if getattr(args, "marginal", None):
        q = pio.read_marginal(args.marginal)
        if len(q) != kb.n_classes:
            raise DataError(
                f"{args.marginal}: marginal has {len(q)} entries but "
                f"{args.kb} has {kb.n_classes} classes"
            )
        return q
    return ClassMarginal.uniform(kb.n_classes)


def _cmd_bench_ot(args) -> int:
    similarity, q, _ = _similarity_instance(args)
    base = _solver_config(args)
    algorithms = [args.algorithm] if args.algorithm else list(ALGORITHMS)
    configs = [
        SolverConfig(
            tau_ot=base.tau_ot,
            max_iterations=base.max_iterations,
            tolerance=base.tolerance,
            algorithm=name,
        )
        for name in algorithms
    ]
    rows = bench_solvers(similarity, q, configs)
    if args.out:
        Path(args.out).write_text(json.dumps(rows, indent=2) + "\n", encoding="utf-8")
    for row in rows:
        if row["status"] == "numeric_overflow":
            print(f"{row['algorithm']}: {row['error']}", file=sys.stderr)
        else:
            print(
                f"{row['algorithm']}: {row['status']} after {row['iterations']} "
                f"iterations, violations ({row['final_row_violation']:.3e}, "
                f"{row['final_col_violation']:.3e}), objective {row['objective']:.9g}, "
                f"{row['wall_time_s'] * 1e3:.1f} ms"
            )
    if any(row["status"] == "numeric_overflow" for row in rows):
        return 3
    return 0


def _cmd_gen_fixture(args) -> int:
    spec = FixtureSpec(
        n_images=args.n,
        n_classes=args.classes,
        dim=args.dim,
        separation=args.separation,
        angle_deg=args.angle,
        offset=args.offset,
        noise=args.noise,
        descriptions_per_class=args.descriptions,
        name_noise=args.name_noise,
    )
    fixture = generate_fixture(args.seed, spec)
    manifest = write_fixture(fixture, args.out)
    print(f"fixture written to {args.out} (manifest: {json.dumps(manifest['files'])})")
    return 0


def build_parser() -> _Parser:
    parser = _Parser(
        prog="proxyot",
        description="Zero-shot classification over precomputed embeddings via "
        "entropic optimal-transport pseudo-labeling and proxy learning.",
    )
    parser.add_argument(
        "--version", action="version", version=f"proxyot {__version__}"
    )
    sub = parser.add_subparsers(dest="command", metavar="command")
    sub.required = True

    p = sub.add_parser("pipeline", help="run one mode end to end and write a report")
    p.add_argument("--mode", required=True, choices=MODES)
    _add_io_flags(p)
    _add_retrieval_flags(p)
    _add_solver_flags(p)
    _add_learn_flags(p)
    p.add_argument("--seed", type=int, help="recorded in the report; the run is deterministic")
    p.add_argument("--out", required=True, help="report JSON path (predictions CSV lands beside it)")
    p.set_defaults(handler=_cmd_pipeline)

    p = sub.add_parser("eval", help="pipeline with gold labels required")
    p.add_argument("--mode", required=True, choices=MODES)
    _add_io_flags(p, labels="required")
    _add_retrieval_flags(p)
    _add_solver_flags(p)
    _add_learn_flags(p)
    p.add_argument("--seed", type=int, help="recorded in the report")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(handler=_cmd_eval)

    p = sub.add_parser("classify", help="write predictions CSV only")
    p.add_argument("--mode", required=True, choices=MODES)
    _add_io_flags(p, labels="none")
    _add_retrieval_flags(p)
    _add_solver_flags(p)
    _add_learn_flags(p)
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True, help="predictions CSV path")
    p.set_defaults(handler=_cmd_classify)

    p = sub.add_parser("retrieve", help="score and select top-k descriptions per class")
    _add_io_flags(p, labels="none")
    _add_retrieval_flags(p)
    p.add_argument("--out", required=True, help="retrieval JSON path")
    p.set_defaults(handler=_cmd_retrieve)

    p = sub.add_parser("plan", help="solve the transport problem and dump pseudo-labels")
    _add_io_flags(p, labels="none")
    _add_retrieval_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", required=True, help="plan JSON path")
    p.set_defaults(handler=_cmd_plan)

    p = sub.add_parser("learn", help="learn multimodal proxies and write them as EMB1")
    _add_io_flags(p, labels="none")
    _add_retrieval_flags(p)
    _add_solver_flags(p)
    _add_learn_flags(p)
    p.add_argument("--out", required=True, help="EMB1 path for the learned proxies")
    p.set_defaults(handler=_cmd_learn)

    p = sub.add_parser("bench-ot", help="race the transport solvers on one instance")
    _add_io_flags(p, labels="none")
    _add_retrieval_flags(p)
    _add_solver_flags(p)
    p.add_argument("--out", help="optional JSON path for the comparison table")
    p.set_defaults(handler=_cmd_bench_ot)

    p = sub.add_parser("gen-fixture", help="generate a synthetic modality-gap fixture")
    p.add_argument("--seed", type=int, required=True, help="64-bit generation seed")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--n", type=int, default=300, help="number of images")
    p.add_argument("--classes", type=int, default=5, help="number of classes")
    p.add_argument("--dim", type=int, default=32, help="embedding dimension")
    p.add_argument("--separation", type=float, default=3.5, help="cluster separation")
    p.add_argument("--angle", type=float, default=25.0, help="modality-gap rotation, degrees")
    p.add_argument("--offset", type=float, default=0.3, help="modality-gap offset magnitude")
    p.add_argument("--noise", type=float, default=0.05, help="description embedding noise")
    p.add_argument("--descriptions", type=int, default=20, help="descriptions per class")
    p.add_argument(
        "--name-noise",
        type=float,
        default=None,
        help="name embedding noise (default: 8 x description noise)",
    )
    p.set_defaults(handler=_cmd_gen_fixture)

    return parser


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.handler(args)
    except SystemExit as exc:  # argparse --help / --version
        code = exc.code
        return int(code) if code is not None else 0
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return 1
    except (DataError, FileNotFoundError, PermissionError, IsADirectoryError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric error: {exc}", file=sys.stderr)
        return 3
    except ProxyOTError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
