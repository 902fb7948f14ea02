import json
import os
import shutil

import pytest

from adsverdict.catalogue import load_catalogue

FIXTURES = os.path.join(os.path.dirname(__file__), "fixtures")
THREE = os.path.join(FIXTURES, "three_functional")


@pytest.fixture
def fixture_dir():
    return THREE


@pytest.fixture
def catalogue():
    return load_catalogue(THREE)


@pytest.fixture
def catalogue_copy(tmp_path):
    """Writable copy of the fixture catalogue; returns (path, parsed json)."""
    dst = tmp_path / "cat"
    shutil.copytree(THREE, dst)
    with open(dst / "catalogue.json") as fh:
        doc = json.load(fh)
    return dst, doc


def write_doc(path, doc):
    with open(os.path.join(path, "catalogue.json"), "w") as fh:
        json.dump(doc, fh)


# -- acceptance criteria report ------------------------------------------------

ACCEPTANCE = {}


@pytest.fixture
def criterion(request):
    """Record a PASS/FAIL line for an acceptance criterion test."""
    marker = request.node.get_closest_marker("criterion")
    number, title = marker.args
    yield
    failed = getattr(request.node, "_call_failed", False)
    line = f"criterion {number:>2}: {'FAIL' if failed else 'PASS'}  {title}"
    ACCEPTANCE[number] = line
    print("\n" + line)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call" and rep.failed:
        item._call_failed = True


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(number, title): acceptance criterion")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[number])
