import json
import time

import pytest

from tracerfriction import cli

#: "ACn PASS|FAIL ..." lines collected by the acceptance suite
ACCEPTANCE_LINES: list[str] = []


def report(label: str, ok: bool, detail: str) -> None:
    line = f"{label} {'PASS' if ok else 'FAIL'}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


class _Runs:
    """Lazily runs each CLI subcommand once with the default configuration."""

    def __init__(self, root):
        self.root = root
        self.cache: dict = {}

    def __call__(self, sub: str, *, quick: bool = False, tag: str = "default"):
        key = (sub, quick, tag)
        if key not in self.cache:
            out = self.root / f"{sub}-{'quick' if quick else 'full'}-{tag}"
            argv = [sub, "--out", str(out)] + (["--quick"] if quick else [])
            t0 = time.perf_counter()
            code = cli.main(argv)
            seconds = time.perf_counter() - t0
            doc = json.loads((out / f"{sub}.json").read_text()) if (out / f"{sub}.json").exists() else None
            self.cache[key] = {"code": code, "doc": doc, "seconds": seconds, "out": out}
        return self.cache[key]


@pytest.fixture(scope="session")
def runs(tmp_path_factory):
    return _Runs(tmp_path_factory.mktemp("acceptance"))


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
