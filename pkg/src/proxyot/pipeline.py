"""End-to-end runs: baselines, retrieval-only classification, and the full chain.

``run`` executes one mode over file inputs and returns a reproducible
report; ``bench_solvers`` races the transport solvers over one instance.
The four modes:

* ``clip_baseline``       -- classify with class-name embeddings as proxies.
* ``description_baseline``-- classify with all-description mean proxies.
* ``kpl_text``            -- classify with retrieved top-k mean proxies.
* ``kpl_full``            -- retrieved proxies guide transport pseudo-labels,
  which train multimodal proxies; classify with those.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io as pio
from .errors import DataError, NumericError, UsageError
from .learner import LearnConfig, ProxyWeights, classify, learn
from .numerics import l2_normalize_rows
from .retrieval import (
    TextProxies,
    build_text_proxies,
    description_proxies,
    name_proxies,
    retrieve,
)
from .solvers import (
    ClassMarginal,
    SolverConfig,
    entropic_objective,
    pseudo_labels,
    solve,
)

__all__ = ["MODES", "RunSpec", "RunReport", "run", "accuracy", "bench_solvers"]

MODES = ("clip_baseline", "description_baseline", "kpl_text", "kpl_full")


@dataclass(frozen=True)
class RunSpec:
    """Everything one pipeline invocation needs, resolved to concrete values."""

    mode: str
    images: str | Path
    kb: str | Path
    labels: str | Path | None = None
    marginal: str | Path | None = None
    k: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)
    learn: LearnConfig = field(default_factory=LearnConfig)
    normalize_images: bool = True
    seed: int | None = None  # recorded for provenance; the pipeline is deterministic

    def __post_init__(self):
        if self.mode not in MODES:
            raise UsageError(f"unknown mode {self.mode!r}; choose from {', '.join(MODES)}")
        if self.k < 1:
            raise UsageError(f"k must be >= 1, got {self.k}")


@dataclass
class RunReport:
    mode: str
    config: dict
    n_images: int
    class_names: list[str]
    predictions: np.ndarray
    solver_diagnostics: dict | None = None
    learn_summary: dict | None = None
    accuracy: float | None = None
    per_class_accuracy: dict[str, float] | None = None

    def to_json_dict(self) -> dict:
        """Fixed-key-order JSON form; identical reports serialize identically."""
        return {
            "mode": self.mode,
            "config": self.config,
            "n_images": self.n_images,
            "n_classes": len(self.class_names),
            "class_names": self.class_names,
            "solver_diagnostics": self.solver_diagnostics,
            "learn_summary": self.learn_summary,
            "predictions": [int(p) for p in self.predictions],
            "accuracy": self.accuracy,
            "per_class_accuracy": self.per_class_accuracy,
        }


def accuracy(pred, gold) -> tuple[float, dict[int, float]]:
    """Exact-match fraction overall and per gold class."""
    p = np.asarray(pred, dtype=np.int64)
    g = np.asarray(gold, dtype=np.int64)
    if p.shape != g.shape or p.ndim != 1:
        raise UsageError(f"prediction/gold shapes differ: {p.shape} vs {g.shape}")
    if p.size == 0:
        raise UsageError("accuracy needs at least one prediction")
    overall = float(np.mean(p == g))
    per_class = {
        int(c): float(np.mean(p[g == c] == c)) for c in np.unique(g)
    }
    return overall, per_class


def _resolved_config(spec: RunSpec) -> dict:
    return {
        "images": str(spec.images),
        "kb": str(spec.kb),
        "labels": None if spec.labels is None else str(spec.labels),
        "marginal": "uniform" if spec.marginal is None else str(spec.marginal),
        "k": spec.k,
        "normalize_images": spec.normalize_images,
        "seed": spec.seed,
        "solver": {
            "algorithm": spec.solver.algorithm,
            "tau_ot": spec.solver.tau_ot,
            "max_iterations": spec.solver.max_iterations,
            "tolerance": spec.solver.tolerance,
        },
        "learn": {
            "tau_learn": spec.learn.tau_learn,
            "learning_rate": spec.learn.learning_rate,
            "momentum": spec.learn.momentum,
            "max_epochs": spec.learn.max_epochs,
            "loss_tolerance": spec.learn.loss_tolerance,
        },
    }


def _text_stage(images: np.ndarray, kb, spec: RunSpec) -> TextProxies:
    return build_text_proxies(kb, retrieve(images, kb, spec.k))


def run(spec: RunSpec) -> RunReport:
    """Execute one mode end to end over the files named in ``spec``."""
    images = pio.read_embeddings(spec.images)
    kb = pio.read_knowledge_base(spec.kb)
    if images.shape[1] != kb.dim:
        raise DataError(
            f"{spec.images}: image rows have dim {images.shape[1]} but "
            f"{spec.kb} declares dim {kb.dim}"
        )
    if spec.normalize_images and images.shape[0] > 0:
        images = l2_normalize_rows(images)
    if spec.marginal is None:
        q = ClassMarginal.uniform(kb.n_classes)
    else:
        q = pio.read_marginal(spec.marginal)
        if len(q) != kb.n_classes:
            raise DataError(
                f"{spec.marginal}: marginal has {len(q)} entries but "
                f"{spec.kb} has {kb.n_classes} classes"
            )

    solver_diag = None
    learn_summary = None
    if spec.mode == "clip_baseline":
        proxies = name_proxies(kb.name_embedding_matrix())
        weights = ProxyWeights(proxies.w)
    elif spec.mode == "description_baseline":
        proxies = description_proxies(kb)
        weights = ProxyWeights(proxies.w)
    elif spec.mode == "kpl_text":
        proxies = _text_stage(images, kb, spec)
        weights = ProxyWeights(proxies.w)
    else:  # kpl_full
        proxies = _text_stage(images, kb, spec)
        similarity = images @ proxies.w.T
        plan = solve(similarity, spec.solver, q)
        solver_diag = {
            "algorithm": spec.solver.algorithm,
            "iterations_used": plan.iterations_used,
            "final_row_violation": plan.final_row_violation,
            "final_col_violation": plan.final_col_violation,
            "converged": plan.converged(spec.solver.tolerance),
        }
        guide = pseudo_labels(plan)
        weights, trace = learn(images, guide, proxies, spec.learn)
        learn_summary = {
            "epochs_run": trace.epochs_run,
            "stop_reason": trace.stop_reason,
            "initial_loss": trace.losses[0],
            "final_loss": trace.losses[-1],
        }

    predictions = classify(images, weights)
    report = RunReport(
        mode=spec.mode,
        config=_resolved_config(spec),
        n_images=images.shape[0],
        class_names=kb.names,
        predictions=predictions,
        solver_diagnostics=solver_diag,
        learn_summary=learn_summary,
    )
    if spec.labels is not None:
        gold = pio.read_labels(spec.labels, kb)
        if gold.size != predictions.size:
            raise DataError(
                f"{spec.labels}: {gold.size} labels but {predictions.size} images"
            )
        overall, per_class = accuracy(predictions, gold)
        report.accuracy = overall
        report.per_class_accuracy = {
            kb.names[c]: frac for c, frac in per_class.items()
        }
    return report


def bench_solvers(m, q: ClassMarginal, configs) -> list[dict]:
    """Run each solver config over one instance; one result row per config.

    A numeric failure is recorded in its row rather than aborting the table,
    so fragile and stable solvers can be compared on the same instance.
    """
    rows = []
    for cfg in configs:
        start = time.perf_counter()
        try:
            plan = solve(m, cfg, q)
        except NumericError as exc:
            rows.append(
                {
                    "algorithm": cfg.algorithm,
                    "tau_ot": cfg.tau_ot,
                    "status": "numeric_overflow",
                    "error": str(exc),
                    "iterations": None,
                    "final_row_violation": None,
                    "final_col_violation": None,
                    "objective": None,
                    "wall_time_s": time.perf_counter() - start,
                }
            )
            continue
        rows.append(
            {
                "algorithm": cfg.algorithm,
                "tau_ot": cfg.tau_ot,
                "status": "converged"
                if plan.converged(cfg.tolerance)
                else "max_iterations",
                "error": None,
                "iterations": plan.iterations_used,
                "final_row_violation": plan.final_row_violation,
                "final_col_violation": plan.final_col_violation,
                "objective": entropic_objective(plan, m, cfg.tau_ot),
                "wall_time_s": time.perf_counter() - start,
            }
        )
    return rows
