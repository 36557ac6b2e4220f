from __future__ import annotations

import textwrap
from pathlib import Path

import pytest

from macroctx.synth import generate

ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion covered by a test")
    config.stash[ACCEPTANCE_KEY] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None or report.when != "call" and not (report.when == "setup" and report.failed):
        return
    number, title = marker.args
    item.config.stash[ACCEPTANCE_KEY].append((number, title, item.name, report.passed))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    rows = config.stash.get(ACCEPTANCE_KEY, [])
    if not rows:
        return
    terminalreporter.section("acceptance criteria")
    by_number: dict[int, list] = {}
    for number, title, name, passed in rows:
        by_number.setdefault(number, [title, True, []])
        by_number[number][1] &= passed
        by_number[number][2].append(name)
    for number in sorted(by_number):
        title, passed, names = by_number[number]
        terminalreporter.write_line(f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}"
                                    f"  ({len(names)} test{'s' if len(names) > 1 else ''})")


@pytest.fixture(scope="session")
def synth_default():
    """The default-seed 600-day regime-shift dataset."""
    return generate()


@pytest.fixture(scope="session")
def synth_small():
    """A quick 200-day dataset (two training regimes, short shift)."""
    from macroctx.synth import default_schedule

    return generate(schedule=default_schedule(200, 40, block=40), n_days=200, seed=7)


def write_run_config(directory: Path, dataset, *, output="run", preset="macro_retrieval", extra="") -> Path:
    """Write the dataset's raw files plus a config that reproduces its split."""
    dataset.write(directory / "data")
    train, ood = dataset.split()
    macro_lines = "\n".join(f"{s.series_id} = data/macro_{s.series_id}.csv" for s in dataset.macro)
    lag_lines = "\n".join(f"{s.series_id} = 0" for s in dataset.macro)
    text = textwrap.dedent(f"""\
        [data]
        prices = data/prices.csv
        embeddings = data/embeddings.csv
        sentiment = data/sentiment.csv

        [macro]
        {{macro}}

        [lags]
        {{lags}}

        [features]
        return_lags = 1, 2, 5
        vol_window = 10
        include_ohlcv = false
        sentiment_columns = sentiment

        [windows]
        train_start = {train[0].date}
        train_end = {train[-1].date}
        ood_start = {ood[0].date}
        ood_end = {ood[-1].date}

        [run]
        preset = {preset}
        output = {output}
        """).format(macro=macro_lines, lags=lag_lines) + extra
    path = directory / "run.ini"
    path.write_text(text)
    return path
