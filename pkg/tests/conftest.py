import pytest

from segmoba import Prefix, Rule, RuleSet

# name, network address, length (8-bit addresses)
REFERENCE_RULES = [
    ("A", 0, 2), ("B", 64, 2), ("C", 128, 3), ("D", 176, 4), ("E", 192, 5), ("F", 224, 6),
    ("G", 140, 6), ("H", 188, 6), ("I", 48, 6), ("J", 12, 6), ("K", 60, 6), ("L", 48, 7),
]


@pytest.fixture
def ref_rules():
    return {name: Rule(Prefix(bits, length), next_hop=i + 1) for i, (name, bits, length) in enumerate(REFERENCE_RULES)}


@pytest.fixture
def ref_table(ref_rules):
    return RuleSet(8, ref_rules.values())


@pytest.fixture
def names(ref_rules):
    by_prefix = {r.prefix: n for n, r in ref_rules.items()}

    def name_of(rule):
        return None if rule is None else by_prefix[rule.prefix]
    return name_of


_results: dict[int, tuple[str, str, str]] = {}


def pytest_runtest_logreport(report):
    if report.when != "call" and not (report.when == "setup" and report.outcome != "passed"):
        return
    number = getattr(report, "criterion", None)
    if number is None:
        return
    title = report.criterion_title
    _, prev, detail = _results.get(number, (title, "PASS", ""))
    outcome = "PASS" if report.outcome == "passed" and prev == "PASS" else "FAIL"
    extra = "; ".join(str(v) for k, v in report.user_properties if k == "detail")
    _results[number] = (title, outcome, "; ".join(x for x in (detail, extra) if x))


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is not None:
        report.criterion = marker.args[0]
        report.criterion_title = marker.args[1]


def pytest_terminal_summary(terminalreporter):
    if not _results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_results):
        title, outcome, detail = _results[number]
        line = f"criterion {number} [{outcome}] {title}"
        if detail:
            line += f" -- {detail}"
        terminalreporter.write_line(line)
