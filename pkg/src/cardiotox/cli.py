"""Command-line pipeline driver.

Subcommands: validate, features, fit, cv, effects, compare, synth. Each takes
a JSON run config (plus a few overrides), writes CSV reports into an output
directory, and drops a run manifest so results can be audited and reproduced.
Outputs are byte-identical across reruns with the same config and seed.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path

import numpy as np

from . import __version__, causal, evaluate, glm, preprocess, synth
from .cohort import (
    CodeMap,
    CohortPaths,
    DrugClass,
    default_code_map,
    load_code_map,
    load_cohort,
)
from .errors import ConfigError, PipelineError
from .preprocess import OUTCOME_NAMES, PreprocessConfig
from .rng import derive_seed
from .tableio import write_csv

_CONTRAST_NAMES = ("CHEMO_VS_RADIATION", "TARGETED_VS_RADIATION")
_COMPARE_SETS = ("BASELINE_HEALTH", "MEDICATION_MODEL")


@dataclass
class RunConfig:
    inputs: CohortPaths
    end_of_data: date
    code_map_path: Path | None = None
    out: Path = Path("out")
    alpha_stay: float = 0.15
    k: int = 5
    n_boot: int = 1000
    seed: int | None = None
    eliminate_in_causal: bool = False
    arms_only_ate: bool = False
    outcome_horizon_days: int | None = None
    troponin_threshold: float | None = None
    feature_sets: dict[str, tuple[str, ...]] = field(default_factory=dict)
    antihypertensive_classes: frozenset[DrugClass] = (
        preprocess.DEFAULT_ANTIHYPERTENSIVE_CLASSES
    )
    antihyperlipidemia_classes: frozenset[DrugClass] = (
        preprocess.DEFAULT_ANTIHYPERLIPIDEMIA_CLASSES
    )
    config_sha256: str = ""

    def preprocess_config(self) -> PreprocessConfig:
        return PreprocessConfig(
            troponin_threshold=self.troponin_threshold,
            outcome_horizon_days=self.outcome_horizon_days,
            antihypertensive_classes=self.antihypertensive_classes,
            antihyperlipidemia_classes=self.antihyperlipidemia_classes,
        )

    def code_map(self) -> CodeMap:
        if self.code_map_path is None:
            return default_code_map()
        return load_code_map(self.code_map_path)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as err:
        raise ConfigError(f"cannot read config {path}: {err}") from None
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as err:
        raise ConfigError(f"config is not valid JSON: {err}") from None
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")

    inputs = raw.get("inputs")
    if not isinstance(inputs, dict):
        raise ConfigError("config needs an 'inputs' object with the five table paths")
    base = path.parent
    try:
        paths = CohortPaths(
            patients=_resolve(base, inputs["patients"]),
            observations=_resolve(base, inputs["observations"]),
            diagnoses=_resolve(base, inputs["diagnoses"]),
            medications=_resolve(base, inputs["medications"]),
            treatments=_resolve(base, inputs["treatments"]),
        )
    except KeyError as err:
        raise ConfigError(f"inputs missing table {err}") from None

    if "end_of_data" not in raw:
        raise ConfigError("config needs 'end_of_data' (ISO date)")
    try:
        end_of_data = date.fromisoformat(raw["end_of_data"])
    except (TypeError, ValueError):
        raise ConfigError(f"bad end_of_data '{raw['end_of_data']}'") from None

    cfg = RunConfig(
        inputs=paths,
        end_of_data=end_of_data,
        code_map_path=_resolve(base, raw["code_map"]) if raw.get("code_map") else None,
        out=Path(raw.get("out", "out")),
        alpha_stay=float(raw.get("alpha_stay", 0.15)),
        k=int(raw.get("k", 5)),
        n_boot=int(raw.get("B", 1000)),
        seed=int(raw["seed"]) if "seed" in raw and raw["seed"] is not None else None,
        eliminate_in_causal=bool(raw.get("eliminate_in_causal", False)),
        arms_only_ate=bool(raw.get("arms_only_ate", False)),
        outcome_horizon_days=(
            int(raw["outcome_horizon_days"])
            if raw.get("outcome_horizon_days") is not None
            else None
        ),
        troponin_threshold=(
            float(raw["troponin_threshold"])
            if raw.get("troponin_threshold") is not None
            else None
        ),
        config_sha256=hashlib.sha256(text.encode("utf-8")).hexdigest(),
    )

    for name, names in raw.get("feature_sets", {}).items():
        if not isinstance(names, list):
            raise ConfigError(f"feature set '{name}' must be a list of feature names")
        cfg.feature_sets[name] = tuple(names)
    if "antihypertensive_classes" in raw:
        cfg.antihypertensive_classes = _parse_classes(raw["antihypertensive_classes"])
    if "antihyperlipidemia_classes" in raw:
        cfg.antihyperlipidemia_classes = _parse_classes(raw["antihyperlipidemia_classes"])

    if not 0.0 < cfg.alpha_stay < 1.0:
        raise ConfigError(f"alpha_stay must be in (0, 1), got {cfg.alpha_stay}")
    if cfg.k < 2:
        raise ConfigError(f"k must be >= 2, got {cfg.k}")
    if cfg.n_boot < causal.MIN_BOOTSTRAP:
        raise ConfigError(f"B must be >= {causal.MIN_BOOTSTRAP}, got {cfg.n_boot}")
    return cfg


def _resolve(base: Path, value) -> Path:
    p = Path(str(value))
    return p if p.is_absolute() else base / p


def _parse_classes(raw) -> frozenset[DrugClass]:
    try:
        return frozenset(DrugClass(name) for name in raw)
    except ValueError as err:
        raise ConfigError(f"bad drug class: {err}") from None


def _require_seed(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise ConfigError("this command requires a seed (config 'seed' or --seed)")
    return cfg.seed


def _write_manifest(outdir: Path, command: str, cfg_hash: str, seed: int | None) -> None:
    outdir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config_sha256": cfg_hash,
        "seed": seed,
        "package_version": __version__,
        "numpy_version": np.__version__,
        "python_version": sys.version.split()[0],
    }
    with open(outdir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _load_features(cfg: RunConfig):
    cohort = load_cohort(cfg.inputs, cfg.code_map())
    return preprocess.compute_features(
        cohort, cfg.code_map(), cfg.end_of_data, cfg.preprocess_config()
    )


# ---------------------------------------------------------------------------
# Commands


def cmd_validate(cfg: RunConfig, outdir: Path) -> int:
    cohort = load_cohort(cfg.inputs, cfg.code_map())
    report = preprocess.apply_eligibility(cohort, cfg.code_map(), cfg.end_of_data)
    preprocess.write_exclusions_csv(outdir / "exclusions.csv", report)
    _write_manifest(outdir, "validate", cfg.config_sha256, cfg.seed)
    print(f"loaded {len(cohort)} patients: {len(report.included)} included, "
          f"{len(report.excluded)} excluded")
    return 0


def cmd_features(cfg: RunConfig, outdir: Path) -> int:
    features, report = _load_features(cfg)
    preprocess.write_features_csv(outdir / "features.csv", features)
    preprocess.write_exclusions_csv(outdir / "exclusions.csv", report)
    _write_manifest(outdir, "features", cfg.config_sha256, cfg.seed)
    print(f"wrote {len(features)} feature rows")
    return 0


def cmd_fit(cfg: RunConfig, outdir: Path, outcome: str | None) -> int:
    features, _ = _load_features(cfg)
    outcomes = [outcome] if outcome else list(OUTCOME_NAMES)
    for oc in outcomes:
        fm = preprocess.build_matrix(features, "OUTCOME_MODEL", oc, cfg.feature_sets)
        full_model = glm.fit_logistic(fm)
        glm.write_coefficient_report(outdir / f"coefficients_full_{oc}.csv", full_model, fm)
        trace = glm.backward_eliminate(fm, cfg.alpha_stay)
        reduced = fm.select_columns(trace.final_model.column_names)
        glm.write_coefficient_report(
            outdir / f"coefficients_eliminated_{oc}.csv", trace.final_model, reduced
        )
        glm.write_elimination_trace(outdir / f"elimination_trace_{oc}.csv", trace)
    _write_manifest(outdir, "fit", cfg.config_sha256, cfg.seed)
    return 0


def cmd_cv(cfg: RunConfig, outdir: Path, outcome: str | None, eliminate: bool = True) -> int:
    seed = _require_seed(cfg)
    features, _ = _load_features(cfg)
    outcomes = [outcome] if outcome else list(OUTCOME_NAMES)
    rows: list[tuple] = []
    for oc in outcomes:
        fm = preprocess.build_matrix(features, "OUTCOME_MODEL", oc, cfg.feature_sets)
        oc_seed = derive_seed(seed, OUTCOME_NAMES.index(oc))
        report, scores = evaluate.cv_report_and_scores(
            fm, cfg.k, oc_seed, cfg.alpha_stay if eliminate else None
        )
        evaluate.append_cv_rows(rows, oc, report)
        # pooled held-out scores drive the published ROC points
        curve = evaluate.roc_curve(scores, fm.y)
        evaluate.write_roc_points(outdir / f"roc_points_{oc}.csv", oc, curve)
    write_csv(
        outdir / "cv_report.csv",
        ("outcome", "fold", "auc"),
        rows,
        footer_comments=(
            "imputation means are computed on the full included cohort before fold assignment",
        ),
    )
    _write_manifest(outdir, "cv", cfg.config_sha256, seed)
    return 0


def cmd_effects(cfg: RunConfig, outdir: Path) -> int:
    seed = _require_seed(cfg)
    features, _ = _load_features(cfg)
    estimates = []
    for oc in OUTCOME_NAMES:
        estimates.extend(
            causal.bootstrap_effects(
                features,
                oc,
                n_boot=cfg.n_boot,
                seed=derive_seed(seed, 100 + OUTCOME_NAMES.index(oc)),
                arms_only=cfg.arms_only_ate,
                eliminate_alpha=cfg.alpha_stay if cfg.eliminate_in_causal else None,
            )
        )
    causal.write_effects_csv(outdir / "effects.csv", estimates)
    _write_manifest(outdir, "effects", cfg.config_sha256, seed)
    return 0


def cmd_compare(cfg: RunConfig, outdir: Path, contrast: str, feature_set: str) -> int:
    features, _ = _load_features(cfg)
    fm = preprocess.build_matrix(features, feature_set, contrast, cfg.feature_sets)
    full_model = glm.fit_logistic(fm)
    stem = f"compare_{contrast}_{feature_set}"
    glm.write_coefficient_report(outdir / f"{stem}_full.csv", full_model, fm)
    trace = glm.backward_eliminate(fm, cfg.alpha_stay)
    reduced = fm.select_columns(trace.final_model.column_names)
    glm.write_coefficient_report(outdir / f"{stem}_eliminated.csv", trace.final_model, reduced)
    glm.write_elimination_trace(outdir / f"{stem}_trace.csv", trace)
    _write_manifest(outdir, "compare", cfg.config_sha256, cfg.seed)
    return 0


def cmd_synth(spec_path: Path, outdir: Path, n_mc: int) -> int:
    spec = synth.load_spec(spec_path)
    cohort = synth.generate(spec)
    synth.write_cohort(cohort, outdir)
    synth.write_truth_csv(outdir / "truth.csv", spec, n_mc)
    run_config = {
        "inputs": {
            "patients": "patients.csv",
            "observations": "observations.csv",
            "diagnoses": "diagnoses.csv",
            "medications": "medications.csv",
            "treatments": "treatments.csv",
        },
        "code_map": "code_map.csv",
        "end_of_data": spec.layout.end_of_data.isoformat(),
        "seed": spec.seed,
    }
    with open(outdir / "run_config.json", "w", encoding="utf-8") as fh:
        json.dump(run_config, fh, indent=2, sort_keys=True)
        fh.write("\n")
    spec_hash = hashlib.sha256(Path(spec_path).read_bytes()).hexdigest()
    _write_manifest(outdir, "synth", spec_hash, spec.seed)
    print(f"wrote synthetic cohort of {spec.n} patients to {outdir}")
    return 0


# ---------------------------------------------------------------------------
# Argument parsing


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="cardiotox",
        description="Cardiac-risk models and treatment effects for breast-cancer cohorts",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True, help="run config JSON")
        p.add_argument("--out", default=None, help="output directory (overrides config)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--alpha-stay", type=float, default=None)
        p.add_argument("--k", type=int, default=None)
        p.add_argument("--b", type=int, default=None, help="bootstrap replicates")

    add_common(sub.add_parser("validate", help="load tables and report eligibility"))
    add_common(sub.add_parser("features", help="emit the baseline feature table"))

    fit = sub.add_parser("fit", help="fit outcome models with backward elimination")
    add_common(fit)
    fit.add_argument("--outcome", choices=OUTCOME_NAMES, default=None)

    cv = sub.add_parser("cv", help="cross-validated AUC and ROC points")
    add_common(cv)
    cv.add_argument("--outcome", choices=OUTCOME_NAMES, default=None)
    cv.add_argument(
        "--no-eliminate", action="store_true", help="skip per-fold backward elimination"
    )

    effects = sub.add_parser("effects", help="bootstrap ATE/ATT for all outcomes")
    add_common(effects)

    compare = sub.add_parser("compare", help="arm-vs-arm characteristic models")
    add_common(compare)
    compare.add_argument("--contrast", choices=_CONTRAST_NAMES, required=True)
    compare.add_argument("--feature-set", choices=_COMPARE_SETS, required=True)

    synth_p = sub.add_parser("synth", help="generate a synthetic cohort with truth values")
    synth_p.add_argument("--spec", required=True, help="synthetic spec JSON")
    synth_p.add_argument("--out", required=True, help="output directory")
    synth_p.add_argument("--n-mc", type=int, default=200_000, help="Monte Carlo draws for truth")

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "synth":
            return cmd_synth(Path(args.spec), Path(args.out), args.n_mc)

        cfg = load_config(args.config)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.alpha_stay is not None:
            cfg.alpha_stay = args.alpha_stay
            if not 0.0 < cfg.alpha_stay < 1.0:
                raise ConfigError(f"alpha_stay must be in (0, 1), got {cfg.alpha_stay}")
        if args.k is not None:
            cfg.k = args.k
            if cfg.k < 2:
                raise ConfigError(f"k must be >= 2, got {cfg.k}")
        if args.b is not None:
            cfg.n_boot = args.b
            if cfg.n_boot < causal.MIN_BOOTSTRAP:
                raise ConfigError(f"B must be >= {causal.MIN_BOOTSTRAP}, got {cfg.n_boot}")
        outdir = Path(args.out) if args.out else cfg.out
        outdir.mkdir(parents=True, exist_ok=True)

        if args.command == "validate":
            return cmd_validate(cfg, outdir)
        if args.command == "features":
            return cmd_features(cfg, outdir)
        if args.command == "fit":
            return cmd_fit(cfg, outdir, args.outcome)
        if args.command == "cv":
            return cmd_cv(cfg, outdir, args.outcome, eliminate=not args.no_eliminate)
        if args.command == "effects":
            return cmd_effects(cfg, outdir)
        if args.command == "compare":
            return cmd_compare(cfg, outdir, args.contrast, args.feature_set)
        raise ConfigError(f"unknown command {args.command}")
    except PipelineError as err:
        print(f"error[{err.code}]: {err}", file=sys.stderr)
        return err.exit_code


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
