"""Treatment-effect estimation by outcome-regression standardization.

One logistic outcome model is fit on the whole cohort with chemotherapy and
targeted-therapy dummies (radiation is the reference arm). Counterfactual
probabilities are produced by toggling the dummies while holding covariates at
observed values; averaging their differences gives the average treatment
effect (over everyone) and the effect on the treated (over one arm).
Uncertainty comes from resampling patients with replacement and repeating the
whole fit.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import glm
from .errors import (
    ConfigError,
    MissingArmError,
    StatisticalError,
    TooManyBootFailuresError,
)
from .preprocess import (
    BaselineFeatures,
    FEATURE_SETS,
    FeatureMatrix,
    TREATMENT_DUMMY_COLUMNS,
    Treatment,
    build_matrix,
)
from .rng import SplitMix64
from .tableio import write_csv

ESTIMANDS = ("ATE", "ATT")
EFFECT_TREATMENTS = (Treatment.CHEMOTHERAPY, Treatment.TARGETED)

# Full outcome-model predictor list minus the treatment dummies themselves.
DEFAULT_COVARIATES: tuple[str, ...] = tuple(
    name for name in FEATURE_SETS["OUTCOME_MODEL"] if name != "treatment"
)

MIN_BOOTSTRAP = 100
BOOTSTRAP_SUCCESS_FLOOR = 0.95


@dataclass(frozen=True)
class EffectEstimate:
    treatment: str
    outcome: str
    estimand: str
    point: float
    boot_se: float | None = None
    ci_low: float | None = None
    ci_high: float | None = None
    n_boot_requested: int = 0
    n_boot_succeeded: int = 0
    seed: int | None = None


def build_causal_matrix(
    features: list[BaselineFeatures],
    outcome: str,
    covariates: tuple[str, ...] | None = None,
) -> FeatureMatrix:
    """Design matrix ordered intercept, treatment dummies, then covariates."""
    if covariates is None:
        covariates = DEFAULT_COVARIATES
    return build_matrix(features, ("treatment",) + tuple(covariates), outcome)


def _arm_masks(fm: FeatureMatrix) -> dict[Treatment, np.ndarray]:
    chemo_col = fm.column_names.index(TREATMENT_DUMMY_COLUMNS[0])
    targeted_col = fm.column_names.index(TREATMENT_DUMMY_COLUMNS[1])
    chemo = fm.X[:, chemo_col] == 1.0
    targeted = fm.X[:, targeted_col] == 1.0
    return {
        Treatment.CHEMOTHERAPY: chemo,
        Treatment.TARGETED: targeted,
        Treatment.RADIATION: ~(chemo | targeted),
    }


def _require_all_arms(masks: dict[Treatment, np.ndarray]) -> None:
    missing = [t.value for t in Treatment if not np.any(masks[t])]
    if missing:
        raise MissingArmError(f"no patients in arm(s): {', '.join(missing)}")


def _mean(values: np.ndarray) -> float:
    # constant vectors (no-covariate models) average to the constant exactly,
    # keeping ATE == ATT bitwise in that case
    first = values[0]
    if np.all(values == first):
        return float(first)
    return float(np.mean(values))


def effects_from_model(
    model: glm.LogisticModel, fm: FeatureMatrix, arms_only: bool = False
) -> dict[tuple[str, str], float]:
    """Counterfactual-difference means from one fitted model.

    Returns {(treatment, estimand): risk difference}. ``arms_only`` restricts
    the ATE average to the treated arm plus the reference arm instead of the
    whole cohort.
    """
    masks = _arm_masks(fm)
    chemo_col = fm.column_names.index(TREATMENT_DUMMY_COLUMNS[0])
    targeted_col = fm.column_names.index(TREATMENT_DUMMY_COLUMNS[1])

    X_ref = fm.X.copy()
    X_ref[:, chemo_col] = 0.0
    X_ref[:, targeted_col] = 0.0
    p_ref = glm.predict_matrix(model, X_ref)

    out: dict[tuple[str, str], float] = {}
    for treatment, col in (
        (Treatment.CHEMOTHERAPY, chemo_col),
        (Treatment.TARGETED, targeted_col),
    ):
        X_t = X_ref.copy()
        X_t[:, col] = 1.0
        diff = glm.predict_matrix(model, X_t) - p_ref
        if arms_only:
            ate_mask = masks[treatment] | masks[Treatment.RADIATION]
            ate = _mean(diff[ate_mask])
        else:
            ate = _mean(diff)
        att = _mean(diff[masks[treatment]])
        out[(treatment.value, "ATE")] = ate
        out[(treatment.value, "ATT")] = att
    return out


def _fit_and_estimate(
    fm: FeatureMatrix,
    arms_only: bool,
    eliminate_alpha: float | None,
    start: np.ndarray | None = None,
) -> dict[tuple[str, str], float]:
    masks = _arm_masks(fm)
    _require_all_arms(masks)
    if eliminate_alpha is None:
        model = glm.fit_logistic(fm, start=start)
        return effects_from_model(model, fm, arms_only)
    # Elimination prunes covariates only: the estimand needs the dummies.
    model = _eliminate_keeping_dummies(fm, eliminate_alpha)
    reduced = fm.select_columns(model.column_names)
    return effects_from_model(model, reduced, arms_only)


def _eliminate_keeping_dummies(fm: FeatureMatrix, alpha_stay: float) -> glm.LogisticModel:
    protected = {"intercept", *TREATMENT_DUMMY_COLUMNS}
    current = fm
    model = glm.fit_logistic(current)
    while True:
        worst_j, worst_p = -1, -1.0
        for j, name in enumerate(current.column_names):
            if name in protected:
                continue
            _, p_value = glm.wald(model, j)
            if p_value >= worst_p:
                worst_p = p_value
                worst_j = j
        if worst_j < 0 or worst_p <= alpha_stay:
            return model
        kept = tuple(
            n for i, n in enumerate(current.column_names) if i != worst_j
        )
        current = current.select_columns(kept)
        model = glm.fit_logistic(current)


def estimate_effects(
    features: list[BaselineFeatures],
    outcome: str,
    covariates: tuple[str, ...] | None = None,
    *,
    arms_only: bool = False,
    eliminate_alpha: float | None = None,
) -> list[EffectEstimate]:
    """Point estimates of ATE and ATT for both treatments on one outcome."""
    fm = build_causal_matrix(features, outcome, covariates)
    points = _fit_and_estimate(fm, arms_only, eliminate_alpha)
    return [
        EffectEstimate(
            treatment=t.value, outcome=outcome, estimand=est, point=points[(t.value, est)]
        )
        for t in EFFECT_TREATMENTS
        for est in ESTIMANDS
    ]


def bootstrap_effects(
    features: list[BaselineFeatures],
    outcome: str,
    covariates: tuple[str, ...] | None = None,
    *,
    n_boot: int = 1000,
    seed: int,
    arms_only: bool = False,
    eliminate_alpha: float | None = None,
) -> list[EffectEstimate]:
    """Point estimates plus percentile CIs from patient-level resampling.

    All resample index vectors are drawn up front from the seed, so replicate
    order (or any future parallel execution) cannot change the results.
    Replicates that fail statistically are skipped and counted; more than 5%
    failures abort with the failure taxonomy.
    """
    if n_boot < MIN_BOOTSTRAP:
        raise ConfigError(f"bootstrap needs at least {MIN_BOOTSTRAP} replicates, got {n_boot}")
    fm = build_causal_matrix(features, outcome, covariates)
    masks = _arm_masks(fm)
    _require_all_arms(masks)

    full_points = _fit_and_estimate(fm, arms_only, eliminate_alpha)
    # Warm-starting replicates at the full-sample optimum roughly halves IRLS
    # iterations without affecting the optimum; only valid without elimination
    # because eliminated replicates refit different column sets.
    start = None
    if eliminate_alpha is None:
        start = glm.fit_logistic(fm).beta

    rng = SplitMix64(seed)
    index_matrix = rng.integers(fm.n, n_boot * fm.n).reshape(n_boot, fm.n)

    draws: dict[tuple[str, str], list[float]] = {key: [] for key in full_points}
    failures: dict[str, int] = {}
    succeeded = 0
    empty_ids = ("",) * fm.n  # resampled rows lose their identities anyway
    for b in range(n_boot):
        idx = index_matrix[b]
        resampled = FeatureMatrix(
            fm.column_names, fm.X[idx], fm.y[idx], empty_ids, fm.outcome
        )
        try:
            points = _fit_and_estimate(resampled, arms_only, eliminate_alpha, start=start)
        except StatisticalError as err:
            failures[err.code] = failures.get(err.code, 0) + 1
            continue
        succeeded += 1
        for key, value in points.items():
            draws[key].append(value)

    if succeeded < BOOTSTRAP_SUCCESS_FLOOR * n_boot:
        raise TooManyBootFailuresError(n_boot, succeeded, failures)

    estimates = []
    for t in EFFECT_TREATMENTS:
        for est in ESTIMANDS:
            values = np.asarray(draws[(t.value, est)])
            ci_low, ci_high = np.percentile(values, [2.5, 97.5], method="linear")
            estimates.append(
                EffectEstimate(
                    treatment=t.value,
                    outcome=outcome,
                    estimand=est,
                    point=full_points[(t.value, est)],
                    boot_se=float(np.std(values, ddof=1)),
                    ci_low=float(ci_low),
                    ci_high=float(ci_high),
                    n_boot_requested=n_boot,
                    n_boot_succeeded=succeeded,
                    seed=seed,
                )
            )
    return estimates


def write_effects_csv(path, estimates: list[EffectEstimate]) -> None:
    write_csv(
        path,
        (
            "treatment",
            "outcome",
            "estimand",
            "point",
            "boot_se",
            "ci_low",
            "ci_high",
            "n_boot_succeeded",
            "seed",
        ),
        [
            (
                e.treatment,
                e.outcome,
                e.estimand,
                e.point,
                e.boot_se if e.boot_se is not None else "NA",
                e.ci_low if e.ci_low is not None else "NA",
                e.ci_high if e.ci_high is not None else "NA",
                e.n_boot_succeeded,
                e.seed if e.seed is not None else "NA",
            )
            for e in estimates
        ],
    )
