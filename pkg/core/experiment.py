"""
Experiment Orchestration

Runs the benchmark pipeline stage by stage. Stages talk only through files
under the output directory:

    generate  -> bundles/tc<NN>.csv + .json
    detect    -> pvalues/tc<NN>.csv
    dataset   -> datasets/<method>/tc<NN>_{train,eval}.csv (+ _index.csv)
    train     -> models/<method>/tc<NN>.json
    evaluate  -> results/units/tc<NN>.csv, merged into results/results.csv,
                 curves in results/curves/
    rank      -> results/ranks.csv

Every stage also writes manifests/<stage>.json. Units (test cases) run in a
process pool when jobs > 1; each unit writes only its own files.

Usage:
    from core.experiment import ExperimentPlan, ExperimentRunner

    plan = ExperimentPlan.from_config(get_config(), seed=7)
    ranks = ExperimentRunner(plan).run_all()
"""

import hashlib
import json
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from pydantic import BaseModel, Field, field_validator
from rich import box
from rich.console import Console
from rich.table import Table

from core import persistence
from core.rng import derive_stream
from detectors.algorithms import PValueMatrix, run_detectors
from evaluation.curves import detection_curve, metric_column, partial_auc, roc_curve
from evaluation.ranking import rank_matrix, rank_methods
from forest.ensemble import ForestParams, fit, predict_proba
from stacking.config import Method, parse_methods
from stacking.features import assemble, vote_scores
from synthgen.generator import generate_bundle
from synthgen.grid import TestCaseGrid, load_grid
from utils.config import (
    DetectorsConfig,
    ForestConfig,
    FusionSettings,
    SynthgenConfig,
)
from utils.errors import InvalidConfigError, error_context
from utils.logger import get_logger, log_execution_time, log_result, log_stage
from utils.validator import check_finite

logger = get_logger(__name__)
console = Console()

STAGES = ("generate", "detect", "dataset", "train", "evaluate", "rank")


def parse_k_mode(text: str) -> Optional[int]:
    """"uniform" -> None, "fixed:<k>" -> k"""
    text = text.strip().lower()
    if text == "uniform":
        return None
    if text.startswith("fixed:"):
        try:
            k = int(text.split(":", 1)[1])
        except ValueError:
            k = 0
        if k >= 1:
            return k
    raise InvalidConfigError("k", text, "expected 'uniform' or 'fixed:<positive int>'")


# ============================================================================
# Experiment Plan
# ============================================================================


class ExperimentPlan(BaseModel):
    """Everything that determines a run"""

    grid_path: str
    seed: int = Field(default=7, ge=0)
    detectors: List[str] = Field(default=["C1", "C2", "C3", "Bayes", "RKI"], min_length=1)
    methods: List[str] = Field(min_length=1)
    e: float = Field(default=0.01, gt=0.0, le=1.0)
    k_mode: str = "uniform"
    n_series: int = Field(default=100, gt=0)
    test_cases: Optional[List[int]] = None
    out_dir: str = "data/experiments/default"
    jobs: int = Field(default=1, ge=1)

    detector_settings: DetectorsConfig = Field(default_factory=DetectorsConfig)
    synthgen: SynthgenConfig = Field(default_factory=SynthgenConfig)
    fusion: FusionSettings = Field(default_factory=FusionSettings)
    forest: ForestConfig = Field(default_factory=ForestConfig)

    @field_validator("k_mode")
    @classmethod
    def validate_k_mode(cls, v: str) -> str:
        parse_k_mode(v)
        return v.strip().lower()

    @classmethod
    def from_config(cls, config, **overrides) -> "ExperimentPlan":
        """
        Build a plan from the loaded configuration

        Args:
            config: ConfigManager (or AppConfig)
            **overrides: Field overrides; None values are ignored
        """
        exp = config.experiment
        syn = config.synthgen
        methods = list(exp.methods)
        if exp.method_grid is not None:
            from stacking.config import fusion_grid

            grid = exp.method_grid
            methods += [
                cfg.notation
                for cfg in fusion_grid(grid.modes, grid.means, grid.labelings, grid.windows)
            ]

        resolve = getattr(config, "resolve_path", lambda p: Path(p))
        fields: Dict[str, Any] = {
            "grid_path": str(resolve(syn.grid_path)),
            "seed": exp.seed,
            "detectors": list(config.detectors.names),
            "methods": methods,
            "e": config.evaluation.e,
            "k_mode": f"fixed:{syn.k_fixed}" if syn.k_mode == "fixed" else "uniform",
            "n_series": syn.n_series,
            "out_dir": str(resolve(exp.out_dir)),
            "jobs": exp.jobs,
            "detector_settings": config.detectors,
            "synthgen": syn,
            "fusion": config.fusion,
            "forest": config.forest,
        }
        fields.update({k: v for k, v in overrides.items() if v is not None})
        plan = cls(**fields)
        plan.parsed_methods()
        return plan

    # ------------------------------------------------------------------

    @property
    def k(self) -> Optional[int]:
        return parse_k_mode(self.k_mode)

    @property
    def out(self) -> Path:
        return Path(self.out_dir)

    def parsed_methods(self) -> List[Method]:
        methods = parse_methods(self.methods, self.fusion.alpha, self.fusion.mean_window)
        unknown = [m.name for m in methods if m.kind == "detector" and m.name not in self.detectors]
        if unknown:
            raise InvalidConfigError("methods", unknown, "detector methods must be in the detector set")
        return methods

    def fusion_methods(self) -> List[Method]:
        return [m for m in self.parsed_methods() if m.trainable]

    def load_grid(self) -> TestCaseGrid:
        grid = load_grid(self.grid_path).with_k(self.k)
        if self.test_cases is not None:
            grid = TestCaseGrid(
                version=grid.version, test_cases=[grid.get(tc) for tc in self.test_cases]
            )
        return grid

    def config_hash(self) -> str:
        """sha256 over everything that affects outputs"""
        payload = self.model_dump(mode="json", exclude={"out_dir", "jobs"})
        canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def with_fixed_k(self, k: int) -> "ExperimentPlan":
        """Copy for one arm of a k sweep, writing under out/k_<k>"""
        return self.model_copy(
            update={"k_mode": f"fixed:{k}", "out_dir": str(self.out / f"k_{k}")}
        )


# ============================================================================
# Stage Units (module level so process pools can pickle them)
# ============================================================================


def _detect_matrices(plan: ExperimentPlan, bundle) -> List[PValueMatrix]:
    settings = plan.detector_settings
    return [
        run_detectors(
            record.series,
            plan.detectors,
            m=settings.window,
            variance_divisor=settings.variance_divisor,
            rki_threshold=settings.rki_gaussian_threshold,
        )
        for record in bundle.series
    ]


def _generate_unit(plan: ExperimentPlan, tc: int) -> List[Path]:
    spec = plan.load_grid().get(tc)
    bundle = generate_bundle(spec, plan.n_series, plan.seed, plan.synthgen)
    return persistence.write_bundle(bundle, plan.out / "bundles")


def _detect_unit(plan: ExperimentPlan, tc: int) -> List[Path]:
    bundle = persistence.read_bundle(plan.out / "bundles", tc)
    pmatrices = _detect_matrices(plan, bundle)
    return [persistence.write_pvalues(tc, pmatrices, plan.out / "pvalues")]


def _dataset_unit(plan: ExperimentPlan, tc: int) -> List[Path]:
    bundle = persistence.read_bundle(plan.out / "bundles", tc)
    pmatrices = persistence.read_pvalues(plan.out / "pvalues", tc, plan.detectors)
    stem = persistence.case_stem(tc)
    outputs: List[Path] = []
    for method in plan.fusion_methods():
        train, evaluation = assemble(bundle, plan.detectors, method.fusion, pmatrices)
        directory = plan.out / "datasets" / method.slug
        outputs += persistence.write_dataset(train, directory, f"{stem}_train")
        outputs += persistence.write_dataset(evaluation, directory, f"{stem}_eval")
    return outputs


def forest_seed(plan: ExperimentPlan, tc: int, method: Method) -> int:
    """Seed of the forest trained for (test case, method)"""
    return derive_stream(plan.seed, (tc, 0, f"forest:{method.name}")).child_seed()


def _train_unit(plan: ExperimentPlan, tc: int) -> List[Path]:
    stem = persistence.case_stem(tc)
    outputs: List[Path] = []
    for method in plan.fusion_methods():
        train = persistence.read_dataset(plan.out / "datasets" / method.slug, f"{stem}_train")
        check_finite(train.features, "train features")
        params = ForestParams(**plan.forest.model_dump(), seed=forest_seed(plan, tc, method))
        with log_execution_time("forest_fit", test_case=tc, method=method.name):
            model = fit(train.features, train.target, params, columns=train.columns)
        outputs.append(persistence.write_model(model, plan.out / "models" / method.slug / f"{stem}.json"))
    return outputs


def _evaluation_population(bundle, pmatrices: Sequence[PValueMatrix]):
    """Evaluation weeks of every series: (series, span ids unique across series)"""
    n_spans = bundle.baseline_outbreaks + 1
    series_idx, span_ids = [], []
    for idx, record in enumerate(bundle.series):
        ids = record.span_id_array()[bundle.baseline_len :]
        series_idx.append(np.full(ids.size, idx))
        span_ids.append(np.where(ids >= 0, idx * n_spans + ids, -1))
    return np.concatenate(series_idx), np.concatenate(span_ids)


def method_scores(
    plan: ExperimentPlan, tc: int, method: Method, bundle, pmatrices: Sequence[PValueMatrix]
) -> np.ndarray:
    """Alarm scores of one method on the pooled evaluation weeks"""
    start = bundle.baseline_len
    if method.kind == "detector":
        blocks = []
        for pm in pmatrices:
            p = pm.column(method.name)[start:]
            defined = pm.defined_column(method.name)[start:]
            blocks.append(np.where(defined, 1.0 - p, 0.0))
        return np.concatenate(blocks)
    if method.kind == "vote":
        return np.concatenate([vote_scores(pm, plan.fusion.alpha)[start:] for pm in pmatrices])

    stem = persistence.case_stem(tc)
    evaluation = persistence.read_dataset(plan.out / "datasets" / method.slug, f"{stem}_eval")
    model = persistence.read_model(plan.out / "models" / method.slug / f"{stem}.json")
    return predict_proba(model, evaluation.features)


def _evaluate_unit(plan: ExperimentPlan, tc: int) -> List[Path]:
    bundle = persistence.read_bundle(plan.out / "bundles", tc)
    pmatrices = persistence.read_pvalues(plan.out / "pvalues", tc, plan.detectors)
    _, span_ids = _evaluation_population(bundle, pmatrices)
    labels = span_ids >= 0

    dauc_col, pauc_col = metric_column("dauc", plan.e), metric_column("pauc", plan.e)
    rows, roc_frames, det_frames = [], [], []
    for method in plan.parsed_methods():
        scores = method_scores(plan, tc, method, bundle, pmatrices)
        roc = roc_curve(scores, labels)
        det = detection_curve(scores, span_ids)
        d, p = partial_auc(det, plan.e), partial_auc(roc, plan.e)
        rows.append({"test_case": tc, "method": method.name, dauc_col: d, pauc_col: p})
        roc_frames.append(roc.to_frame(method.name))
        det_frames.append(det.to_frame(method.name))
        log_result(method.name, tc, d, p, plan.e)

    stem = persistence.case_stem(tc)
    results = plan.out / "results"
    return [
        persistence.write_results(pd.DataFrame(rows), results / "units" / f"{stem}.csv"),
        persistence.write_curve(pd.concat(roc_frames, ignore_index=True), results / "curves" / f"{stem}_roc.csv"),
        persistence.write_curve(pd.concat(det_frames, ignore_index=True), results / "curves" / f"{stem}_detection.csv"),
    ]


_UNITS: Dict[str, Callable[[ExperimentPlan, int], List[Path]]] = {
    "generate": _generate_unit,
    "detect": _detect_unit,
    "dataset": _dataset_unit,
    "train": _train_unit,
    "evaluate": _evaluate_unit,
}

_INPUTS: Dict[str, Tuple[str, ...]] = {
    "generate": (),
    "detect": ("bundles",),
    "dataset": ("bundles", "pvalues"),
    "train": ("datasets",),
    "evaluate": ("bundles", "pvalues", "datasets", "models"),
}


def _timed_unit(stage: str, plan: ExperimentPlan, tc: int) -> Tuple[int, List[Path], float]:
    with error_context(stage, test_case=tc), log_execution_time(f"{stage}_unit", test_case=tc) as timer:
        outputs = _UNITS[stage](plan, tc)
    return tc, outputs, timer.elapsed_ms


# ============================================================================
# Experiment Runner
# ============================================================================


class ExperimentRunner:
    """
    Runs the pipeline stages of one plan

    Each stage method returns the paths it wrote.
    """

    def __init__(self, plan: ExperimentPlan):
        self.plan = plan
        self.logger = get_logger("experiment.runner", out_dir=plan.out_dir)
        self.test_cases = plan.load_grid().ids
        self.logger.info("Test case grid loaded", path=plan.grid_path, test_cases=len(self.test_cases))

    def _run_stage(self, stage: str) -> List[Path]:
        plan = self.plan
        if stage in ("dataset", "train") and not plan.fusion_methods():
            log_stage(stage, "skipped", reason="no fusion methods")
            return []

        log_stage(stage, "started", units=len(self.test_cases), jobs=plan.jobs)
        if plan.jobs > 1 and len(self.test_cases) > 1:
            with ProcessPoolExecutor(max_workers=plan.jobs) as executor:
                done = list(
                    executor.map(
                        _timed_unit,
                        [stage] * len(self.test_cases),
                        [plan] * len(self.test_cases),
                        self.test_cases,
                    )
                )
        else:
            done = [_timed_unit(stage, plan, tc) for tc in self.test_cases]

        outputs = [path for _, paths, _ in done for path in paths]
        extra: List[Path] = []
        if stage == "evaluate":
            extra.append(self._merge_results())

        persistence.write_manifest(
            plan.out,
            stage,
            plan.seed,
            plan.config_hash(),
            inputs=[plan.out / name for name in _INPUTS[stage]] or [Path(plan.grid_path)],
            outputs=outputs + extra,
            timings_ms={persistence.case_stem(tc): ms for tc, _, ms in done},
            parameters=self._manifest_parameters(),
        )
        log_stage(stage, "finished", units=len(done), files=len(outputs) + len(extra))
        return outputs + extra

    def _manifest_parameters(self) -> Dict[str, Any]:
        plan = self.plan
        return {
            "test_cases": self.test_cases,
            "methods": plan.methods,
            "detectors": plan.detectors,
            "e": plan.e,
            "k_mode": plan.k_mode,
            "n_series": plan.n_series,
        }

    def _merge_results(self) -> Path:
        units = self.plan.out / "results" / "units"
        metric = metric_column("dauc", self.plan.e)
        frames = [
            persistence.read_results(units / f"{persistence.case_stem(tc)}.csv", metric)
            for tc in self.test_cases
        ]
        merged = pd.concat(frames, ignore_index=True)
        return persistence.write_results(merged, self.plan.out / "results" / "results.csv")

    # ------------------------------------------------------------------
    # Stages
    # ------------------------------------------------------------------

    def generate(self) -> List[Path]:
        return self._run_stage("generate")

    def detect(self) -> List[Path]:
        return self._run_stage("detect")

    def dataset(self) -> List[Path]:
        return self._run_stage("dataset")

    def train(self) -> List[Path]:
        return self._run_stage("train")

    def evaluate(self) -> List[Path]:
        return self._run_stage("evaluate")

    def rank(self) -> pd.DataFrame:
        """Average dAUC ranks overall and per structure -> results/ranks.csv"""
        plan = self.plan
        log_stage("rank", "started")
        metric = metric_column("dauc", plan.e)
        results_path = plan.out / "results" / "results.csv"
        results = persistence.read_results(results_path, metric)

        grid = plan.load_grid()
        structures = {spec.id: spec.structure for spec in grid.test_cases}
        ranks = rank_methods(
            results,
            structures,
            metric=metric,
            methods=[m.name for m in plan.parsed_methods()],
        )
        out = persistence.write_ranks(ranks, plan.out / "results" / "ranks.csv")
        persistence.write_manifest(
            plan.out,
            "rank",
            plan.seed,
            plan.config_hash(),
            inputs=[results_path],
            outputs=[out],
            parameters={"metric": metric},
        )
        log_stage("rank", "finished", methods=ranks["method"].nunique())
        return ranks

    def run_all(self) -> pd.DataFrame:
        """Every stage in order; returns the rank table"""
        with log_execution_time("experiment", seed=self.plan.seed):
            for stage in STAGES[:-1]:
                getattr(self, stage)()
            return self.rank()

    def run_k_sweep(self, ks: Sequence[int]) -> pd.DataFrame:
        """
        Re-run generate..evaluate with fixed k per arm

        Returns:
            results/k_sweep.csv table (method, k, test_case, dauc, pauc)
        """
        frames = []
        for k in ks:
            arm = ExperimentRunner(self.plan.with_fixed_k(k))
            self.logger.info("k sweep arm", k=k, out_dir=arm.plan.out_dir)
            for stage in STAGES[:-1]:
                getattr(arm, stage)()
            metric = metric_column("dauc", self.plan.e)
            results = persistence.read_results(arm.plan.out / "results" / "results.csv", metric)
            results.insert(1, "k", k)
            frames.append(results)

        sweep = pd.concat(frames, ignore_index=True)
        columns = ["method", "k", "test_case"] + [
            c for c in sweep.columns if c not in ("method", "k", "test_case")
        ]
        sweep = sweep[columns]
        persistence.write_k_sweep(sweep, self.plan.out / "results" / "k_sweep.csv")
        return sweep


# ============================================================================
# Display
# ============================================================================


def render_ranks(ranks: pd.DataFrame, title: str = "Average dAUC rank") -> Table:
    """Rich table: methods x (overall + structural subsets), best per column bold"""
    wide = rank_matrix(ranks)
    table = Table(title=title, box=box.ROUNDED)
    table.add_column("Method", style="cyan")
    for subset in wide.columns:
        table.add_column(str(subset), justify="right")

    best = wide.min(axis=0)
    for method, row in wide.iterrows():
        cells = []
        for subset, value in row.items():
            text = f"{value:.3f}"
            cells.append(f"[bold green]{text}[/bold green]" if value == best[subset] else text)
        table.add_row(str(method), *cells)
    return table


def render_results(results: pd.DataFrame, metric: str) -> Table:
    """Rich table: mean and median of a metric per method"""
    summary = results.groupby("method", sort=False)[metric].agg(["mean", "median", "min", "max"])
    table = Table(title=f"{metric} over test cases", box=box.ROUNDED)
    table.add_column("Method", style="cyan")
    for col in summary.columns:
        table.add_column(col, justify="right")
    for method, row in summary.iterrows():
        table.add_row(str(method), *[f"{v:.4f}" for v in row.tolist()])
    return table
