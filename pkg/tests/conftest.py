from hypothesis import HealthCheck, settings

settings.register_profile(
    "repo",
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("repo")


# ----------------------------------------------------------------------------
# one simulated cohort and two pipeline runs, shared by the slow tests

import json  # noqa: E402

import pytest  # noqa: E402

COHORT_SPEC = {
    "cohort": {"n_subjects": 3},
    "seed": 0,
    # three subjects cannot reach k = 5, and each history covers a single day
    "pipeline": {"geo": {"k_anon": 2}, "location": {"min_history_days": 0.5}},
}


@pytest.fixture(scope="session")
def cohort(tmp_path_factory):
    from obeskit.simulate import run_simulation

    root = tmp_path_factory.mktemp("cohort")
    (root / "spec.json").write_text(json.dumps(COHORT_SPEC))
    return run_simulation(COHORT_SPEC, root / "sim")


@pytest.fixture(scope="session")
def cohort_runs(cohort, tmp_path_factory):
    """Two full runs of the same config into different directories (serial and parallel)."""
    from obeskit.cli import main

    outs = []
    for k, workers in enumerate((1, 3)):
        out = tmp_path_factory.mktemp(f"run{k}")
        code = main(["run", "--config", str(cohort), "--out", str(out), "--workers", str(workers)])
        assert code == 0
        outs.append(out)
    return outs


# ----------------------------------------------------------------------------
# acceptance summary: one PASS/FAIL line per criterion at the end of the run

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
