import shutil
from pathlib import Path

import numpy as np
import pytest

DATA = Path(__file__).parent / "data"

# small grids keep end-to-end runs to a few seconds
FAST_SEARCH = """
[search]
C = [1.0, 100.0]
hidden_nodes = [23]
activation = ["sigmoid"]
gamma = [1.0]
eta = [1.0]
lam = [0.1]
sigma = [1.0, 2.0]
"""


def pytest_configure(config):
    config.addinivalue_line(
        "markers", "acceptance(number, title): an acceptance criterion, summarized at the end"
    )
    config._acceptance = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    report = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    results = item.config._acceptance
    detail = dict(item.user_properties).get("detail", "")
    if report.when == "call" or (report.when == "setup" and not report.passed):
        status = "PASS" if report.passed else ("SKIP" if report.skipped else "FAIL")
        results[number] = (title, status, detail)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config._acceptance
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(results):
        title, status, detail = results[number]
        line = f"AC{number:<2} {status}  {title}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture
def blob_scene(tmp_path):
    """Copy of the two-blob scene fixture with a fast experiment config."""
    for name in ("blob_scene.csv", "blob_palette.csv", "blob_scene_truth.ppm"):
        shutil.copy(DATA / name, tmp_path / name)
    config = tmp_path / "experiment.toml"
    config.write_text(
        "version = 1\nseed = 42\nfolds = 5\noutput_dir = \"out\"\n"
        "models = [\"rvfl\", \"rvflwodl\", \"rkm\", \"r2km\"]\n\n"
        "[dataset]\npath = \"blob_scene.csv\"\nlabel_column = \"label\"\n"
        "coord_columns = [\"row\", \"col\"]\nbackground_label = \"0\"\n\n"
        "[split]\nper_class = 20\n" + FAST_SEARCH,
        encoding="utf-8",
    )
    return config

