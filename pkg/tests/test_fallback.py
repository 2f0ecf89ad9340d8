"""The pure-numpy kernels must give the same answers as the compiled ones."""
import json
import os
import subprocess
import sys
from pathlib import Path

import pytest

HERE = Path(__file__).parent

PROBE = """
import json, numpy as np
from sparseport._jit import JIT_ENABLED
from sparseport import build_regression_form, solve
from sparseport.synthetic import acceptance_suite
vals = [solve(build_regression_form(i), i).value_regularized for i in acceptance_suite(count=8)]
print(json.dumps({"jit": JIT_ENABLED, "values": vals}))
"""


def _probe(flag):
    env = dict(os.environ, SPARSEPORT_JIT=flag)
    out = subprocess.run([sys.executable, "-c", PROBE], env=env, capture_output=True, text=True, check=True)
    return json.loads(out.stdout.strip().splitlines()[-1])


def test_paths_agree():
    compiled = _probe("1")
    plain = _probe("0")
    assert compiled["jit"] and not plain["jit"]
    assert plain["values"] == pytest.approx(compiled["values"], abs=1e-9)


@pytest.mark.skipif(os.environ.get("SPARSEPORT_JIT") == "0", reason="already running without the JIT")
def test_kernel_suites_without_jit():
    env = dict(os.environ, SPARSEPORT_JIT="0")
    cmd = [sys.executable, "-m", "pytest", "-q", "-p", "no:cacheprovider",
           str(HERE / "test_qp.py"), str(HERE / "test_lp.py"), str(HERE / "test_oracle.py")]
    out = subprocess.run(cmd, env=env, capture_output=True, text=True)
    assert out.returncode == 0, out.stdout[-3000:]
