import pytest
from hypothesis import HealthCheck, settings

settings.register_profile(
    "properties",
    max_examples=1000,
    derandomize=True,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("properties")


@pytest.fixture(scope="session")
def mms4():
    from bdftf.mms import manufactured_problem

    return manufactured_problem(4)


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed"):
        for rep in terminalreporter.stats.get(outcome, []):
            if rep.when != "call":
                continue
            props = dict(rep.user_properties)
            if "criterion" in props:
                lines.append((props["criterion"], f"criterion {props['criterion']}: {'PASS' if outcome == 'passed' else 'FAIL'}"
                              f" - {props.get('detail', '')}"))
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, text in sorted(lines):
            terminalreporter.write_line(text)
