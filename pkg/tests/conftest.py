import random

import pytest

from bhfs.core import Instance


def random_instance(rng: random.Random, n_max=8, stages=(2, 3), machines=(1, 2, 3),
                    proc=(0, 9), energy=(0, 5), n_min=1, ident="rand") -> Instance:
    n = rng.randint(n_min, n_max)
    K = rng.choice(stages)
    M = [rng.choice(machines) for _ in range(K)]
    if max(M) < 2:
        M[rng.randrange(K)] = 2
    P = [[rng.randint(*proc) for _ in range(K)] for _ in range(n)]
    draw = lambda: [rng.randint(*energy) for _ in range(K)]  # noqa: E731
    return Instance(P, M, draw(), draw(), draw(), id=ident)


def random_perm(rng: random.Random, n: int):
    perm = list(range(n))
    rng.shuffle(perm)
    return tuple(perm)


@pytest.fixture
def two_job():
    return Instance([[2, 5], [2, 2]], [1, 1], [1, 1], [1, 1], [1, 1], id="two_job", require_hybrid=False)


# -- acceptance verdict lines ------------------------------------------------

_verdicts: list = []


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(label): acceptance criterion reported as PASS/FAIL")


@pytest.fixture(autouse=True)
def _criterion_label(request):
    marker = request.node.get_closest_marker("criterion")
    if marker:
        request.node.user_properties.append(("criterion", marker.args[0]))


def pytest_runtest_logreport(report):
    props = dict(report.user_properties)
    if "criterion" not in props:
        return
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = {"passed": "PASS", "failed": "FAIL", "skipped": "SKIP"}[report.outcome]
        detail = f"  {props['detail']}" if props.get("detail") else ""
        _verdicts.append(f"criterion {props['criterion']}: {status}{detail}")


def pytest_terminal_summary(terminalreporter):
    if _verdicts:
        terminalreporter.section("acceptance criteria")
        for line in _verdicts:
            terminalreporter.write_line(line)
