"""Grid runner for the evaluation protocol: fidelity, uniqueness, sensitivity,
pruning and fine-tuning, averaged over seeded repetitions and written as CSV.
"""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .attacks import finetune, prune
from .datasets import load_dataset, make_synthetic
from .graph import AttributedGraph, SplitMasks, split_nodes
from .keyed_rand import derive_seed, seed_bytes
from .sage import SageModel, TrainConfig, accuracy, train
from .trigger import TriggerGraph, flip_features, make_trigger
from .watermark import extract, watermark_accuracy

log = logging.getLogger(__name__)

CSV_HEADERS = {
    "fidelity": ["dataset", "n", "p_g", "p_r", "run", "test_accuracy", "trigger_accuracy"],
    "uniqueness": ["dataset", "n", "p_g", "p_r", "run", "watermark_accuracy"],
    "pruning": ["dataset", "n", "p_g", "p_r", "rate", "run", "watermark_accuracy"],
    "finetune": ["dataset", "n", "p_g", "p_r", "epochs", "run", "watermark_accuracy"],
    "sensitivity": ["dataset", "n", "p_g", "p_r", "flipped", "run", "watermark_accuracy"],
}
ERROR_HEADER = ["table", "dataset", "n", "p_g", "p_r", "run", "message"]


@dataclass
class ExperimentConfig:
    dataset: str = "cora"
    key: str = "owner-key"
    data_root: Optional[str] = None
    synthetic: Optional[dict] = None
    n: List[int] = field(default_factory=lambda: [10, 50, 100])
    p_g: List[float] = field(default_factory=lambda: [0.0, 0.1, 0.2])
    p_r: List[float] = field(default_factory=lambda: [0.1, 0.2, 0.3])
    repetitions: int = 10
    base_seed: int = 0
    train: dict = field(default_factory=dict)
    pruning_rates: List[float] = field(default_factory=lambda: [round(0.1 * i, 1) for i in range(10)])
    finetune_epochs: List[int] = field(default_factory=lambda: [10, 20, 30])
    attack_p_r: float = 0.1
    sensitivity: bool = True

    def __post_init__(self):
        if not (self.n and self.p_g and self.p_r):
            raise ValueError("trigger grid must be non-empty")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    @classmethod
    def from_dict(cls, doc: dict) -> "ExperimentConfig":
        doc = dict(doc)
        grid = doc.pop("grid", {})
        attacks = doc.pop("attacks", {})
        for name in ("n", "p_g", "p_r"):
            if name in grid:
                doc[name] = grid[name]
        if "pruning_rates" in attacks:
            doc["pruning_rates"] = attacks["pruning_rates"]
        if "finetune_epochs" in attacks:
            doc["finetune_epochs"] = attacks["finetune_epochs"]
        if "p_r" in attacks:
            doc["attack_p_r"] = attacks["p_r"]
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown experiment config fields: {sorted(unknown)}")
        return cls(**doc)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def load_graph(self) -> AttributedGraph:
        if self.synthetic is not None:
            return make_synthetic(**self.synthetic)
        return load_dataset(self.dataset, self.data_root)


def run_seed(key: str, base_seed: int, run: int) -> int:
    return derive_seed(key, f"run-{base_seed + run}")


def run_split(g: AttributedGraph, seed: int) -> SplitMasks:
    return split_nodes(g, (0.4, 0.2, 0.4), derive_seed(seed_bytes(seed), "split"))


def trigger_key(key: str, base_seed: int, run: int) -> str:
    return f"{key}/run-{base_seed + run}"


def _fmt(x) -> str:
    if isinstance(x, float):
        return "nan" if math.isnan(x) else f"{x:.6f}"
    return str(x)


def _run_once(cfg: ExperimentConfig, g: AttributedGraph, run: int) -> Tuple[Dict[str, list], list]:
    """Every table's rows for one repetition, plus error rows."""
    name = cfg.dataset if cfg.synthetic is None else "synthetic"
    seed = run_seed(cfg.key, cfg.base_seed, run)
    masks = run_split(g, seed)
    tcfg = TrainConfig(**{**cfg.train, "seed": seed})
    tkey = trigger_key(cfg.key, cfg.base_seed, run)
    init = SageModel.initialize(g.feature_dim, g.num_classes, tcfg.hidden_dim, seed)
    rows: Dict[str, list] = {t: [] for t in CSV_HEADERS}
    errors = []

    try:
        baseline, _ = train(init, g, masks, None, tcfg)
    except Exception as exc:  # noqa: BLE001
        log.exception("baseline run %d failed", run)
        return rows, [["baseline", name, "", "", "", run, f"{type(exc).__name__}: {exc}"]]
    rows["fidelity"].append([name, "", "", "", run, accuracy(baseline, g, masks.test_ids), float("nan")])

    for n, p_g, p_r in product(cfg.n, cfg.p_g, cfg.p_r):
        point = [name, n, p_g, p_r]
        try:
            trigger = make_trigger(tkey, n, p_g, p_r, g.feature_dim, g.num_classes)
            rows["uniqueness"].append(point + [run, _wm(baseline, trigger)])
            marked, _ = train(init, g, masks, trigger, tcfg)
            marked_wm = _wm(marked, trigger)
            rows["fidelity"].append(point + [run, accuracy(marked, g, masks.test_ids), marked_wm])
            if cfg.sensitivity:
                rows["sensitivity"].append(point + [0, run, marked_wm])
                flipped = flip_features(trigger)
                marked_f, _ = train(init, g, masks, flipped, tcfg)
                rows["sensitivity"].append(point + [1, run, _wm(marked_f, flipped)])
            if p_g == 0 and math.isclose(p_r, cfg.attack_p_r):
                for rate in cfg.pruning_rates:
                    rows["pruning"].append(point + [rate, run, _wm(prune(marked, rate), trigger)])
                for epochs in cfg.finetune_epochs:
                    tuned = finetune(marked, g, masks, epochs, tcfg)
                    rows["finetune"].append(point + [epochs, run, _wm(tuned, trigger)])
        except Exception as exc:  # noqa: BLE001 - a failed grid point must not stop the grid
            log.exception("grid point %s run %d failed", point, run)
            errors.append(["grid", name, n, p_g, p_r, run, f"{type(exc).__name__}: {exc}"])
    return rows, errors


def _wm(m: SageModel, t: TriggerGraph) -> float:
    return watermark_accuracy(extract(m, t), t.watermark)


def _run_worker(args):
    cfg, run = args
    return _run_once(cfg, cfg.load_graph(), run)


def _with_means(table: str, rows: list) -> list:
    """Append one ``run=mean`` row per grid cell, averaging over successful runs."""
    run_col = CSV_HEADERS[table].index("run")
    groups: Dict[tuple, list] = {}
    for row in rows:
        groups.setdefault(tuple(row[:run_col]), []).append(row[run_col + 1:])
    out = list(rows)
    for key, metrics in groups.items():
        means = []
        for col in zip(*metrics):
            ok = [v for v in col if not math.isnan(v)]
            means.append(float(np.mean(ok)) if ok else float("nan"))
        out.append(list(key) + ["mean"] + means)
    return out


def run_report(
    cfg: ExperimentConfig,
    out_dir,
    workers: int = 1,
    graph: Optional[AttributedGraph] = None,
) -> Dict[str, Path]:
    """Run the full grid and write one CSV per table into ``out_dir``.

    Repetitions run in ``workers`` processes when > 1; results are merged
    in run order, so serial and parallel runs write identical files.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    runs = range(cfg.repetitions)
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_worker, [(cfg, r) for r in runs]))
    else:
        g = graph if graph is not None else cfg.load_graph()
        results = [_run_once(cfg, g, r) for r in runs]

    paths = {}
    for table, header in CSV_HEADERS.items():
        rows = [row for res, _ in results for row in res[table]]
        path = out_dir / f"{table}.csv"
        _write_csv(path, header, _with_means(table, rows))
        paths[table] = path
    errors = [row for _, errs in results for row in errs]
    if errors:
        _write_csv(out_dir / "errors.csv", ERROR_HEADER, errors)
        paths["errors"] = out_dir / "errors.csv"
    return paths


def _write_csv(path: Path, header: Sequence[str], rows: list) -> None:
    # grid axes (up to and including "run") print as given, metrics as %.6f
    axes = header.index("run") + 1 if "run" in header else len(header)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([str(v) if i < axes else _fmt(v) for i, v in enumerate(row)])
