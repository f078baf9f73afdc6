from datetime import date

import pytest
from hypothesis import given, strategies as st

from cardiotox.cohort import (
    CodeMap,
    CodeSystem,
    CohortPaths,
    DiagnosisCategory,
    DiagnosisEvent,
    classify_diagnosis,
    default_code_map,
    load_code_map,
    load_cohort,
)
from cardiotox.errors import (
    DuplicatePatientError,
    MalformedRowError,
    UnknownPatientError,
)

PATIENTS = "patient_id,birth_date,sex\nP1,1960-01-01,F\nP2,1950-05-05,M\n"
OBSERVATIONS = (
    "patient_id,date,kind,value\n"
    "P1,2015-01-01,SBP,120\n"
    "P1,2015-02-01,HDL,55\n"
    "P2,2016-03-01,BMI,27.5\n"
)
DIAGNOSES = "patient_id,date,code_system,code\nP1,2014-01-01,ICD10,I10\n"
MEDICATIONS = "patient_id,date,drug_class\nP2,2016-04-01,STATIN\n"
TREATMENTS = "patient_id,date,treatment\nP1,2015-06-01,RADIATION\n"


def write_cohort_files(tmp_path, patients=PATIENTS, observations=OBSERVATIONS,
                       diagnoses=DIAGNOSES, medications=MEDICATIONS, treatments=TREATMENTS):
    (tmp_path / "patients.csv").write_text(patients)
    (tmp_path / "observations.csv").write_text(observations)
    (tmp_path / "diagnoses.csv").write_text(diagnoses)
    (tmp_path / "medications.csv").write_text(medications)
    (tmp_path / "treatments.csv").write_text(treatments)
    return CohortPaths.in_dir(tmp_path)


def test_load_materializes_every_row(tmp_path):
    cohort = load_cohort(write_cohort_files(tmp_path))
    assert [p.patient_id for p in cohort] == ["P1", "P2"]
    p1, p2 = cohort
    assert len(p1.observations) == 2 and len(p2.observations) == 1
    assert p1.diagnoses[0].code == "I10"
    assert p2.medications[0].drug_class.value == "STATIN"
    assert p1.treatments[0].date == date(2015, 6, 1)
    assert p2.treatments == ()
    total_events = sum(
        len(p.observations) + len(p.diagnoses) + len(p.medications) + len(p.treatments)
        for p in cohort
    )
    assert total_events == 6


def test_load_is_row_order_invariant(tmp_path):
    baseline = load_cohort(write_cohort_files(tmp_path))
    shuffled_obs = (
        "patient_id,date,kind,value\n"
        "P2,2016-03-01,BMI,27.5\n"
        "P1,2015-02-01,HDL,55\n"
        "P1,2015-01-01,SBP,120\n"
    )
    shuffled_pat = "patient_id,birth_date,sex\nP2,1950-05-05,M\nP1,1960-01-01,F\n"
    other = tmp_path / "shuffled"
    other.mkdir()
    reordered = load_cohort(
        write_cohort_files(other, patients=shuffled_pat, observations=shuffled_obs)
    )
    assert reordered == baseline


def test_malformed_value_names_location(tmp_path):
    bad = "patient_id,date,kind,value\nP1,2015-01-01,SBP,abc\n"
    paths = write_cohort_files(tmp_path, observations=bad)
    with pytest.raises(MalformedRowError) as err:
        load_cohort(paths)
    assert err.value.line == 2
    assert err.value.column == "value"
    assert "observations.csv" in err.value.file


def test_negative_value_rejected(tmp_path):
    bad = "patient_id,date,kind,value\nP1,2015-01-01,SBP,-3\n"
    with pytest.raises(MalformedRowError):
        load_cohort(write_cohort_files(tmp_path, observations=bad))


def test_bad_date_and_bad_enum(tmp_path):
    with pytest.raises(MalformedRowError) as err:
        load_cohort(write_cohort_files(
            tmp_path, treatments="patient_id,date,treatment\nP1,2015-13-01,RADIATION\n"))
    assert err.value.column == "date"
    other = tmp_path / "enum"
    other.mkdir()
    with pytest.raises(MalformedRowError) as err:
        load_cohort(write_cohort_files(
            other, treatments="patient_id,date,treatment\nP1,2015-06-01,SURGERY\n"))
    assert err.value.column == "treatment"


def test_unknown_patient(tmp_path):
    bad = "patient_id,date,kind,value\nGHOST,2015-01-01,SBP,120\n"
    with pytest.raises(UnknownPatientError) as err:
        load_cohort(write_cohort_files(tmp_path, observations=bad))
    assert err.value.patient_id == "GHOST"


def test_duplicate_patient(tmp_path):
    dup = "patient_id,birth_date,sex\nP1,1960-01-01,F\nP1,1961-01-01,F\n"
    with pytest.raises(DuplicatePatientError):
        load_cohort(write_cohort_files(tmp_path, patients=dup))


def test_header_mismatch(tmp_path):
    bad = "id,birth,sex\nP1,1960-01-01,F\n"
    with pytest.raises(MalformedRowError) as err:
        load_cohort(write_cohort_files(tmp_path, patients=bad))
    assert err.value.line == 1


def _map(entries):
    return CodeMap({CodeSystem.ICD10: {
        prefix: DiagnosisCategory(cat) for prefix, cat in entries.items()
    }})


def test_classify_prefix_match():
    cmap = _map({"I50": "CHF"})
    event = DiagnosisEvent(date(2020, 1, 1), CodeSystem.ICD10, "I50.9")
    assert classify_diagnosis(event, cmap) is DiagnosisCategory.CHF


def test_classify_no_match_returns_none():
    cmap = _map({"I50": "CHF"})
    event = DiagnosisEvent(date(2020, 1, 1), CodeSystem.ICD10, "Z99")
    assert classify_diagnosis(event, cmap) is None


def test_classify_longest_prefix_wins():
    cmap = _map({"I5": "CAD", "I50": "CHF"})
    event = DiagnosisEvent(date(2020, 1, 1), CodeSystem.ICD10, "I50.9")
    assert classify_diagnosis(event, cmap) is DiagnosisCategory.CHF


def test_classify_respects_code_system():
    cmap = _map({"I50": "CHF"})
    event = DiagnosisEvent(date(2020, 1, 1), CodeSystem.ICD9, "I50.9")
    assert classify_diagnosis(event, cmap) is None


@given(
    code=st.text(alphabet="ABC019.", min_size=1, max_size=8),
    prefixes=st.dictionaries(
        st.text(alphabet="ABC019.", min_size=1, max_size=5),
        st.sampled_from([c.value for c in DiagnosisCategory]),
        max_size=6,
    ),
)
def test_classify_longest_prefix_property(code, prefixes):
    cmap = _map(prefixes)
    event = DiagnosisEvent(date(2020, 1, 1), CodeSystem.ICD10, code)
    got = classify_diagnosis(event, cmap)
    matching = [p for p in prefixes if code.startswith(p)]
    if not matching:
        assert got is None
    else:
        best = max(matching, key=len)
        assert got is DiagnosisCategory(prefixes[best])


def test_code_map_csv_roundtrip(tmp_path):
    path = tmp_path / "map.csv"
    path.write_text(
        "code_system,code_prefix,category\nICD10,I50,CHF\nICD10,I5,CAD\n"
    )
    cmap = load_code_map(path)
    assert cmap.classify(CodeSystem.ICD10, "I50.1") is DiagnosisCategory.CHF
    assert cmap.classify(CodeSystem.ICD10, "I51") is DiagnosisCategory.CAD


def test_code_map_duplicate_prefix_rejected(tmp_path):
    path = tmp_path / "map.csv"
    path.write_text(
        "code_system,code_prefix,category\nICD10,I50,CHF\nICD10,I50,CAD\n"
    )
    with pytest.raises(MalformedRowError):
        load_code_map(path)


def test_default_code_map_covers_outcomes():
    cmap = default_code_map()
    assert cmap.classify(CodeSystem.ICD10, "I50.9") is DiagnosisCategory.CHF
    assert cmap.classify(CodeSystem.ICD10, "C50.912") is DiagnosisCategory.BREAST_CANCER
    assert cmap.classify(CodeSystem.ICD10, "C34.1") is DiagnosisCategory.PRIOR_CANCER_EXCLUDING
    assert cmap.classify(CodeSystem.ICD10, "C44.0") is DiagnosisCategory.PRIOR_CANCER_ALLOWED
