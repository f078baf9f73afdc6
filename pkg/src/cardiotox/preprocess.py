"""Eligibility filtering and baseline feature engineering.

Each eligible patient is anchored at an index date (first treatment) and the
longitudinal record is collapsed into one baseline feature vector:

* labs/vitals: value closest before the index date (same-day ties averaged),
  mean- or constant-imputed when absent;
* pre-condition flags from diagnoses strictly before the index;
* medication flags from prescriptions on or after the index (follow-up);
* outcome flags from diagnoses strictly after the index.

The date boundaries are deliberately asymmetric so that the baseline never
looks into follow-up and outcomes never look into baseline.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields as dataclass_fields
from datetime import date, timedelta
from enum import Enum
from pathlib import Path

import numpy as np

from .cohort import (
    CodeMap,
    DiagnosisCategory,
    DrugClass,
    HEART_DISEASE_CATEGORIES,
    ObservationKind,
    PatientRecord,
    Sex,
    Treatment,
    classify_diagnosis,
)
from .errors import EmptyCohortMeanError, UnknownFeatureError
from .tableio import write_csv

MIN_FOLLOWUP_DAYS = 365
ADULT_AGE = 18

HDL_IMPUTE = 55.0
LDL_IMPUTE = 115.0
HBA1C_IMPUTE = 6.0

OUTCOME_NAMES = ("CHF", "CAD", "CM", "MI")

_OUTCOME_CATEGORY = {
    "CHF": DiagnosisCategory.CHF,
    "CAD": DiagnosisCategory.CAD,
    "CM": DiagnosisCategory.CM,
    "MI": DiagnosisCategory.MI,
}

_CONDITION_CATEGORY = {
    "hypertension": DiagnosisCategory.HYPERTENSION,
    "diabetes": DiagnosisCategory.DIABETES,
    "hyperlipidemia": DiagnosisCategory.HYPERLIPIDEMIA,
}

# Kinds summarized to a continuous baseline value (troponin becomes a flag).
CONTINUOUS_KINDS = (
    ObservationKind.SBP,
    ObservationKind.DBP,
    ObservationKind.BMI,
    ObservationKind.HDL,
    ObservationKind.LDL,
    ObservationKind.HBA1C,
    ObservationKind.TRIGLYCERIDE,
)

MEAN_IMPUTED_FIELDS = ("triglyceride", "bmi", "dbp", "sbp")

DEFAULT_ANTIHYPERTENSIVE_CLASSES = frozenset(
    {
        DrugClass.ACE_INHIBITOR,
        DrugClass.ARB,
        DrugClass.BETA_BLOCKER,
        DrugClass.CALCIUM_BLOCKER,
        DrugClass.DIURETIC,
        DrugClass.VASODILATOR,
        DrugClass.ANTIHYPERTENSIVE_COMBINATION,
    }
)
DEFAULT_ANTIHYPERLIPIDEMIA_CLASSES = frozenset(
    {DrugClass.STATIN, DrugClass.ANTIHYPERLIPIDEMIC_OTHER}
)


class ExclusionReason(Enum):
    NOT_FEMALE_ADULT = "NOT_FEMALE_ADULT"
    NO_TREATMENT = "NO_TREATMENT"
    PRIOR_CANCER = "PRIOR_CANCER"
    PRIOR_HEART_DISEASE = "PRIOR_HEART_DISEASE"
    INSUFFICIENT_FOLLOWUP = "INSUFFICIENT_FOLLOWUP"
    MULTIPLE_TREATMENT_TYPES = "MULTIPLE_TREATMENT_TYPES"


@dataclass(frozen=True)
class PreprocessConfig:
    """Knobs for the rules the source protocol leaves open."""

    troponin_threshold: float | None = None
    outcome_horizon_days: int | None = None
    antihypertensive_classes: frozenset[DrugClass] = DEFAULT_ANTIHYPERTENSIVE_CLASSES
    antihyperlipidemia_classes: frozenset[DrugClass] = DEFAULT_ANTIHYPERLIPIDEMIA_CLASSES


@dataclass(frozen=True)
class EligibilityReport:
    included: tuple[str, ...]
    excluded: tuple[tuple[str, ExclusionReason], ...]


@dataclass(frozen=True)
class RawBaseline:
    """Pre-imputation summary: continuous fields may be None (missing)."""

    patient_id: str
    age: float
    sbp: float | None
    dbp: float | None
    bmi: float | None
    hdl: float | None
    ldl: float | None
    hba1c: float | None
    triglyceride: float | None
    troponin_flag: bool
    hypertension: bool
    diabetes: bool
    hyperlipidemia: bool
    medication_flags: dict[DrugClass, bool]
    antihypertensive_medication: bool
    antihyperlipidemia_medication: bool
    treatment: Treatment
    outcomes: dict[str, bool]


@dataclass(frozen=True)
class BaselineFeatures:
    patient_id: str
    age: float
    sbp: float
    dbp: float
    bmi: float
    hdl: float
    ldl: float
    hba1c: float
    triglyceride: float
    troponin_flag: bool
    abnormal_blood_pressure: bool
    abnormal_blood_lipid: bool
    hypertension: bool
    diabetes: bool
    hyperlipidemia: bool
    insulin: bool
    metformin: bool
    statin: bool
    ace_inhibitor: bool
    arb: bool
    antihypertensive_combination: bool
    vasodilator: bool
    antiarrhythmic: bool
    beta_blocker: bool
    calcium_blocker: bool
    diuretic: bool
    antihyperlipidemic_other: bool
    antihypertensive_medication: bool
    antihyperlipidemia_medication: bool
    treatment: Treatment
    chf: bool
    cad: bool
    cm: bool
    mi: bool
    imputed: frozenset[str] = field(default_factory=frozenset)


FEATURE_COLUMNS = [f.name for f in dataclass_fields(BaselineFeatures)]


def index_date(p: PatientRecord) -> date | None:
    """First treatment date, or None for untreated patients."""
    if not p.treatments:
        return None
    return min(t.date for t in p.treatments)


def age_at(p: PatientRecord, on: date) -> int:
    """Age in completed years on the given date."""
    years = on.year - p.birth_date.year
    if (on.month, on.day) < (p.birth_date.month, p.birth_date.day):
        years -= 1
    return years


def apply_eligibility(
    cohort: list[PatientRecord], code_map: CodeMap, end_of_data: date
) -> EligibilityReport:
    """Partition the cohort, recording the first matching exclusion reason.

    Rules are checked in a fixed precedence order: no treatment, not a female
    adult, multiple treatment types, prior cancer, prior heart disease,
    insufficient follow-up.
    """
    included: list[str] = []
    excluded: list[tuple[str, ExclusionReason]] = []
    for p in cohort:
        reason = _exclusion_reason(p, code_map, end_of_data)
        if reason is None:
            included.append(p.patient_id)
        else:
            excluded.append((p.patient_id, reason))
    return EligibilityReport(included=tuple(included), excluded=tuple(excluded))


def _exclusion_reason(
    p: PatientRecord, code_map: CodeMap, end_of_data: date
) -> ExclusionReason | None:
    index = index_date(p)
    if index is None:
        return ExclusionReason.NO_TREATMENT
    if p.sex is not Sex.F or age_at(p, index) < ADULT_AGE:
        return ExclusionReason.NOT_FEMALE_ADULT
    if len({t.treatment for t in p.treatments}) > 1:
        return ExclusionReason.MULTIPLE_TREATMENT_TYPES
    for d in p.diagnoses:
        if d.date < index and classify_diagnosis(d, code_map) is DiagnosisCategory.PRIOR_CANCER_EXCLUDING:
            return ExclusionReason.PRIOR_CANCER
    for d in p.diagnoses:
        if d.date <= index and classify_diagnosis(d, code_map) in HEART_DISEASE_CATEGORIES:
            return ExclusionReason.PRIOR_HEART_DISEASE
    if (end_of_data - index).days < MIN_FOLLOWUP_DAYS:
        return ExclusionReason.INSUFFICIENT_FOLLOWUP
    return None


def summarize_baseline(
    p: PatientRecord,
    index: date,
    code_map: CodeMap,
    config: PreprocessConfig = PreprocessConfig(),
) -> RawBaseline:
    """Collapse one patient's record into a pre-imputation baseline summary."""
    values: dict[ObservationKind, float | None] = {}
    for kind in CONTINUOUS_KINDS:
        pre = [o for o in p.observations if o.kind is kind and o.date < index]
        if not pre:
            values[kind] = None
            continue
        last = max(o.date for o in pre)
        same_day = [o.value for o in pre if o.date == last]
        values[kind] = sum(same_day) / len(same_day)

    troponin_obs = [
        o for o in p.observations if o.kind is ObservationKind.TROPONIN and o.date < index
    ]
    if config.troponin_threshold is None:
        troponin_flag = bool(troponin_obs)
    else:
        troponin_flag = any(o.value > config.troponin_threshold for o in troponin_obs)

    conditions = {name: False for name in _CONDITION_CATEGORY}
    outcome_flags = {name: False for name in OUTCOME_NAMES}
    horizon_end: date | None = None
    if config.outcome_horizon_days is not None:
        horizon_end = index + timedelta(days=config.outcome_horizon_days)
    for d in p.diagnoses:
        category = classify_diagnosis(d, code_map)
        if category is None:
            continue
        if d.date < index:
            for name, cond_cat in _CONDITION_CATEGORY.items():
                if category is cond_cat:
                    conditions[name] = True
        if d.date > index and (horizon_end is None or d.date <= horizon_end):
            for name, out_cat in _OUTCOME_CATEGORY.items():
                if category is out_cat:
                    outcome_flags[name] = True

    med_flags = {cls: False for cls in DrugClass}
    for m in p.medications:
        if m.date >= index:
            med_flags[m.drug_class] = True

    return RawBaseline(
        patient_id=p.patient_id,
        age=float(age_at(p, index)),
        sbp=values[ObservationKind.SBP],
        dbp=values[ObservationKind.DBP],
        bmi=values[ObservationKind.BMI],
        hdl=values[ObservationKind.HDL],
        ldl=values[ObservationKind.LDL],
        hba1c=values[ObservationKind.HBA1C],
        triglyceride=values[ObservationKind.TRIGLYCERIDE],
        troponin_flag=troponin_flag,
        hypertension=conditions["hypertension"],
        diabetes=conditions["diabetes"],
        hyperlipidemia=conditions["hyperlipidemia"],
        medication_flags=med_flags,
        antihypertensive_medication=any(
            med_flags[cls] for cls in config.antihypertensive_classes
        ),
        antihyperlipidemia_medication=any(
            med_flags[cls] for cls in config.antihyperlipidemia_classes
        ),
        treatment=p.treatments[0].treatment,
        outcomes=outcome_flags,
    )


def cohort_means(raws: list[RawBaseline]) -> dict[str, float]:
    """Cohort means of the mean-imputed fields, over observed values only."""
    means: dict[str, float] = {}
    for name in MEAN_IMPUTED_FIELDS:
        observed = [getattr(r, name) for r in raws if getattr(r, name) is not None]
        if observed:
            means[name] = sum(observed) / len(observed)
    return means


def impute(raw: RawBaseline, means: dict[str, float]) -> BaselineFeatures:
    """Fill missing continuous fields and derive the abnormality flags.

    Triglyceride, BMI, DBP and SBP fall back to the cohort mean; HDL, LDL and
    HbA1c to the constants 55, 115 and 6.0. The derived flags are evaluated on
    post-imputation values, so imputation is idempotent.
    """
    imputed: set[str] = set()

    def fill(name: str, constant: float | None = None) -> float:
        value = getattr(raw, name)
        if value is not None:
            return float(value)
        imputed.add(name)
        if constant is not None:
            return constant
        if name not in means or not math.isfinite(means[name]):
            raise EmptyCohortMeanError(name)
        return means[name]

    sbp = fill("sbp")
    dbp = fill("dbp")
    bmi = fill("bmi")
    triglyceride = fill("triglyceride")
    hdl = fill("hdl", HDL_IMPUTE)
    ldl = fill("ldl", LDL_IMPUTE)
    hba1c = fill("hba1c", HBA1C_IMPUTE)

    return BaselineFeatures(
        patient_id=raw.patient_id,
        age=raw.age,
        sbp=sbp,
        dbp=dbp,
        bmi=bmi,
        hdl=hdl,
        ldl=ldl,
        hba1c=hba1c,
        triglyceride=triglyceride,
        troponin_flag=raw.troponin_flag,
        abnormal_blood_pressure=(sbp > 130.0 or dbp > 80.0),
        abnormal_blood_lipid=(ldl > 130.0 or hdl < 50.0 or triglyceride > 150.0),
        hypertension=raw.hypertension,
        diabetes=raw.diabetes,
        hyperlipidemia=raw.hyperlipidemia,
        insulin=raw.medication_flags[DrugClass.INSULIN],
        metformin=raw.medication_flags[DrugClass.METFORMIN],
        statin=raw.medication_flags[DrugClass.STATIN],
        ace_inhibitor=raw.medication_flags[DrugClass.ACE_INHIBITOR],
        arb=raw.medication_flags[DrugClass.ARB],
        antihypertensive_combination=raw.medication_flags[
            DrugClass.ANTIHYPERTENSIVE_COMBINATION
        ],
        vasodilator=raw.medication_flags[DrugClass.VASODILATOR],
        antiarrhythmic=raw.medication_flags[DrugClass.ANTIARRHYTHMIC],
        beta_blocker=raw.medication_flags[DrugClass.BETA_BLOCKER],
        calcium_blocker=raw.medication_flags[DrugClass.CALCIUM_BLOCKER],
        diuretic=raw.medication_flags[DrugClass.DIURETIC],
        antihyperlipidemic_other=raw.medication_flags[DrugClass.ANTIHYPERLIPIDEMIC_OTHER],
        antihypertensive_medication=raw.antihypertensive_medication,
        antihyperlipidemia_medication=raw.antihyperlipidemia_medication,
        treatment=raw.treatment,
        chf=raw.outcomes["CHF"],
        cad=raw.outcomes["CAD"],
        cm=raw.outcomes["CM"],
        mi=raw.outcomes["MI"],
        imputed=frozenset(imputed),
    )


def compute_features(
    cohort: list[PatientRecord],
    code_map: CodeMap,
    end_of_data: date,
    config: PreprocessConfig = PreprocessConfig(),
) -> tuple[list[BaselineFeatures], EligibilityReport]:
    """Full preprocessing pass: eligibility, summarization, imputation."""
    report = apply_eligibility(cohort, code_map, end_of_data)
    by_id = {p.patient_id: p for p in cohort}
    raws = []
    for pid in report.included:
        p = by_id[pid]
        index = index_date(p)
        assert index is not None
        raws.append(summarize_baseline(p, index, code_map, config))
    means = cohort_means(raws)
    features = [impute(r, means) for r in raws]
    features.sort(key=lambda f: f.patient_id)
    return features, report


# ---------------------------------------------------------------------------
# Feature matrices


@dataclass(frozen=True)
class FeatureMatrix:
    """Design matrix with intercept, plus outcome labels and row identities."""

    column_names: tuple[str, ...]
    X: np.ndarray
    y: np.ndarray
    row_ids: tuple[str, ...]
    outcome: str

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset_rows(self, rows: np.ndarray) -> "FeatureMatrix":
        ids = tuple(self.row_ids[int(i)] for i in rows)
        return FeatureMatrix(self.column_names, self.X[rows], self.y[rows], ids, self.outcome)

    def select_columns(self, names: tuple[str, ...]) -> "FeatureMatrix":
        idx = [self.column_names.index(name) for name in names]
        return FeatureMatrix(tuple(names), self.X[:, idx], self.y, self.row_ids, self.outcome)


TREATMENT_DUMMY_COLUMNS = ("treatment_chemotherapy", "treatment_targeted")

# Scalar fields usable as predictors (booleans become 0/1 columns).
_SCALAR_FEATURES = (
    "age",
    "sbp",
    "dbp",
    "bmi",
    "hdl",
    "ldl",
    "hba1c",
    "triglyceride",
    "troponin_flag",
    "abnormal_blood_pressure",
    "abnormal_blood_lipid",
    "hypertension",
    "diabetes",
    "hyperlipidemia",
    "insulin",
    "metformin",
    "statin",
    "ace_inhibitor",
    "arb",
    "antihypertensive_combination",
    "vasodilator",
    "antiarrhythmic",
    "beta_blocker",
    "calcium_blocker",
    "diuretic",
    "antihyperlipidemic_other",
    "antihypertensive_medication",
    "antihyperlipidemia_medication",
)

# Built-in predictor lists. "treatment" expands to the two dummy columns with
# radiation as the reference arm.
FEATURE_SETS: dict[str, tuple[str, ...]] = {
    "OUTCOME_MODEL": (
        "sbp",
        "dbp",
        "bmi",
        "hdl",
        "ldl",
        "hba1c",
        "troponin_flag",
        "triglyceride",
        "abnormal_blood_pressure",
        "abnormal_blood_lipid",
        "hyperlipidemia",
        "diabetes",
        "hypertension",
        "insulin",
        "metformin",
        "statin",
        "ace_inhibitor",
        "arb",
        "antihypertensive_combination",
        "vasodilator",
        "antiarrhythmic",
        "beta_blocker",
        "calcium_blocker",
        "treatment",
        "age",
    ),
    "BASELINE_HEALTH": (
        "age",
        "sbp",
        "dbp",
        "bmi",
        "ldl",
        "hdl",
        "hba1c",
        "triglyceride",
        "troponin_flag",
        "abnormal_blood_pressure",
        "hypertension",
        "hyperlipidemia",
        "abnormal_blood_lipid",
        "diabetes",
    ),
    "MEDICATION_MODEL": (
        "age",
        "sbp",
        "dbp",
        "bmi",
        "ldl",
        "hdl",
        "hba1c",
        "troponin_flag",
        "triglyceride",
        "abnormal_blood_pressure",
        "abnormal_blood_lipid",
        "hyperlipidemia",
        "diabetes",
        "hypertension",
        "metformin",
        "insulin",
        "statin",
        "ace_inhibitor",
        "arb",
        "vasodilator",
        "antiarrhythmic",
        "beta_blocker",
        "calcium_blocker",
        "diuretic",
        "antihypertensive_medication",
        "antihyperlipidemia_medication",
    ),
}

CONTRASTS = {
    "CHEMO_VS_RADIATION": Treatment.CHEMOTHERAPY,
    "TARGETED_VS_RADIATION": Treatment.TARGETED,
}


def resolve_feature_set(
    feature_set: str | tuple[str, ...] | list[str],
    extra_sets: dict[str, tuple[str, ...]] | None = None,
) -> tuple[str, ...]:
    if isinstance(feature_set, str):
        registry = dict(FEATURE_SETS)
        if extra_sets:
            registry.update(extra_sets)
        if feature_set not in registry:
            raise UnknownFeatureError(feature_set)
        return tuple(registry[feature_set])
    return tuple(feature_set)


def build_matrix(
    features: list[BaselineFeatures],
    feature_set: str | tuple[str, ...] | list[str],
    outcome: str,
    extra_sets: dict[str, tuple[str, ...]] | None = None,
) -> FeatureMatrix:
    """Assemble the design matrix for one analysis.

    ``outcome`` is a cardiac outcome name (CHF/CAD/CM/MI) or a treatment
    contrast (CHEMO_VS_RADIATION / TARGETED_VS_RADIATION). Contrast matrices
    are restricted to the two compared arms with radiation labeled 0. Rows are
    in patient_id order regardless of input order; an intercept column is
    always prepended.
    """
    names = resolve_feature_set(feature_set, extra_sets)
    for name in names:
        if name != "treatment" and name not in _SCALAR_FEATURES:
            raise UnknownFeatureError(name)

    rows = sorted(features, key=lambda f: f.patient_id)
    if outcome in CONTRASTS:
        arm = CONTRASTS[outcome]
        rows = [f for f in rows if f.treatment in (arm, Treatment.RADIATION)]
        labels = [1.0 if f.treatment is arm else 0.0 for f in rows]
    elif outcome in OUTCOME_NAMES:
        labels = [1.0 if getattr(f, outcome.lower()) else 0.0 for f in rows]
    else:
        raise UnknownFeatureError(outcome)

    columns: list[str] = ["intercept"]
    for name in names:
        if name == "treatment":
            columns.extend(TREATMENT_DUMMY_COLUMNS)
        else:
            columns.append(name)

    X = np.empty((len(rows), len(columns)), dtype=np.float64)
    for i, f in enumerate(rows):
        X[i, 0] = 1.0
        j = 1
        for name in names:
            if name == "treatment":
                X[i, j] = 1.0 if f.treatment is Treatment.CHEMOTHERAPY else 0.0
                X[i, j + 1] = 1.0 if f.treatment is Treatment.TARGETED else 0.0
                j += 2
            else:
                X[i, j] = float(getattr(f, name))
                j += 1

    return FeatureMatrix(
        column_names=tuple(columns),
        X=X,
        y=np.asarray(labels, dtype=np.float64),
        row_ids=tuple(f.patient_id for f in rows),
        outcome=outcome,
    )


# ---------------------------------------------------------------------------
# Report emission


def write_features_csv(path: str | Path, features: list[BaselineFeatures]) -> None:
    rows = []
    for f in features:
        row = []
        for name in FEATURE_COLUMNS:
            value = getattr(f, name)
            if name == "treatment":
                row.append(value.value)
            elif name == "imputed":
                row.append(";".join(sorted(value)))
            else:
                row.append(value)
        rows.append(row)
    write_csv(path, FEATURE_COLUMNS, rows)


def write_exclusions_csv(path: str | Path, report: EligibilityReport) -> None:
    write_csv(
        path,
        ("patient_id", "reason"),
        [(pid, reason.value) for pid, reason in report.excluded],
    )
