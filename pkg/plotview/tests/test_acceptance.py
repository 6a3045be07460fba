"""Acceptance: render the full-scale sweep CSV with every layer, bit-stably.

Uses the d=1000 sweep CSV from the primary component's acceptance run
(artifacts/figure_sweep_d1000.csv).  If that artifact is absent, a small
sweep is produced through the primary's CLI — its external interface — so
this suite still exercises the real pipeline end to end.
"""

import hashlib
import shutil
import subprocess
from pathlib import Path

import pytest

from plotview.render import PlotJob, PlotKind, render

REPO_ROOT = Path(__file__).resolve().parent.parent.parent
FULL_SCALE_CSV = REPO_ROOT / "artifacts" / "figure_sweep_d1000.csv"


def sha256(path):
    return hashlib.sha256(open(path, "rb").read()).hexdigest()


@pytest.fixture(scope="module")
def sweep_csv(tmp_path_factory):
    if FULL_SCALE_CSV.exists():
        return FULL_SCALE_CSV, 1000
    cli = shutil.which("ddlab")
    if cli is None:
        pytest.skip("no full-scale artifact and the experiment CLI is not installed")
    tmp = tmp_path_factory.mktemp("fallback")
    out = tmp / "sweep_d100.csv"
    subprocess.run(
        [cli, "sweep", "--d", "100", "--n-grid", "50,80,90,100,110,120,150",
         "--trials", "60", "--seed", "1", "--out", str(out)],
        check=True,
        capture_output=True,
    )
    return out, 100


def test_criterion_11_render_full_scale_sweep(sweep_csv, tmp_path):
    csv_path, d = sweep_csv
    out1 = tmp_path / "figure.png"
    out2 = tmp_path / "figure_again.png"
    result = render(PlotJob(str(csv_path), str(out1), PlotKind.RISK_SWEEP))
    render(PlotJob(str(csv_path), str(out2), PlotKind.RISK_SWEEP))

    checks = {
        "scatter": result.scatter_points > 0,
        "mean line": result.has_mean_line,
        "theory overlays": result.theory_curves
        == ["theory_bias", "theory_variance", "theory_excess"],
        "critical marker": result.marker_x == d,
        "deterministic bytes": sha256(out1) == sha256(out2),
    }
    failures = [name for name, ok in checks.items() if not ok]
    print(
        f"ACCEPTANCE 11 {'PASS' if not failures else 'FAIL'}: "
        f"rendered {csv_path.name} with {result.scatter_points} points; "
        + (f"missing: {failures}" if failures else "all layers present, hash stable")
    )
    assert not failures, failures
