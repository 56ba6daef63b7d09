import subprocess
import sys
from pathlib import Path

import pytest

from ruelle.config import parse_config
from ruelle.suite import run_suite

CATALOG = [
    "system.name = doubling\npotential.t = 0",
    "system.name = doubling\npotential.t = 1",
    "system.name = linear_cantor\nsystem.N = 2\nsystem.r = 3",
    "system.name = linear_cantor\nsystem.N = 3\nsystem.r = 5\npotential.t = 0.5",
    "system.name = golden_cantor",
    "system.name = perturbed_doubling\nsystem.eps = 0.05",
    "system.name = gauss\npotential.t = 1",
    "system.name = gauss\npotential.t = 1.5",
]


@pytest.mark.parametrize("text", CATALOG)
def test_suite_passes_on_catalog(text):
    checks = run_suite(parse_config(text))
    failed = [c.line() for c in checks if not c.passed]
    assert not failed
    assert len(checks) >= 20


def test_benchmark_smoke():
    script = Path(__file__).resolve().parents[1] / "benchmarks" / "bench_kernels.py"
    res = subprocess.run([sys.executable, str(script), "--grid", "33", "--repeat", "2"],
                         capture_output=True, text=True, timeout=300)
    assert res.returncode == 0, res.stderr
    assert "gauss" in res.stdout
