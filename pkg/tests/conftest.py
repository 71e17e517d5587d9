from hypothesis import strategies as st

from arsim.search import Execution, SearchSpace


@st.composite
def adversaries(draw, space: SearchSpace):
    """One point of a search space: execution, faulty logs and excluded objects."""
    reader_correct = draw(st.sampled_from(space.reader_kinds))
    request = draw(st.sampled_from(space.requests(reader_correct)))
    phase = draw(st.sampled_from(space.phases()))
    faulty = tuple(sorted(draw(st.lists(st.sampled_from(space.faulty_profiles(reader_correct)), min_size=space.f, max_size=space.f))))
    correct = tuple(sorted(draw(st.lists(
        st.sampled_from(space.correct_profiles(reader_correct)), min_size=space.n - space.f, max_size=space.n - space.f
    ))))
    ex = Execution(reader_correct, request, phase, faulty, correct)
    logs = tuple(draw(st.frozensets(st.sampled_from(space.universe))) for _ in range(space.f))
    excluded = tuple(sorted(draw(st.sets(st.integers(1, space.n), min_size=space.f, max_size=space.f))))
    return ex, logs, excluded


_CRITERIA: dict[int, tuple[str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number): acceptance criterion checked by the test")


def pytest_runtest_makereport(item, call):
    marker = item.get_closest_marker("criterion")
    if marker is None or call.when != "call":
        return
    number = marker.args[0]
    passed = call.excinfo is None
    previous = _CRITERIA.get(number, ("PASS", ""))[0]
    status = "PASS" if passed and previous == "PASS" else "FAIL"
    _CRITERIA[number] = (status, (item.obj.__doc__ or item.name).strip().splitlines()[0])


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_CRITERIA):
        status, what = _CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {status}  {what}")
