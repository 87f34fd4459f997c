import json
import subprocess
import sys

import pytest

from projwalk import cli
from projwalk.errors import ConfigError

SMALL = {
    "lyapunov": "n = 60\nreplicas = 20000\nburn_in = 20\n",
    "stationary": "replicas = 12000\nburn_in = 200\n",
    "spectrum": "m = 64\ns_grid = 0, 0.5\n",
    "tilt": "m = 64\nn = 10\ndrift_n = 30\nreplicas = 4000\n",
    "llt": "n = 20, 40\nreplicas = 20000\nlam = 0.0881\nsigma = 0.6\n",
    "zeroone": "replicas = 10000\nburn_in = 300\nlevels = -0.5\n",
    "example1": "replicas = 10000\nburn_in = 300\n",
    "fourier": "m = 32\nns = 16, 32\nlam = 0.0881\nsigma = 0.6\n",
}

GENERIC2 = """# shear plus two rotations
d = 2
variant = finite
matrix 0.4 : 1.5 0.5 ; 0.0 0.6666666666666666
matrix 0.3 : 0.5403023058681398 -0.8414709848078965 ; 0.8414709848078965 0.5403023058681398
matrix 0.3 : 0.955336489125606 0.29552020666133955 ; -0.29552020666133955 0.955336489125606
"""


def _config(tmp_path, experiment, ensemble="generic2.txt", extra=None):
    (tmp_path / "generic2.txt").write_text(GENERIC2)
    body = SMALL[experiment] if extra is None else extra
    path = tmp_path / f"{experiment}.ini"
    path.write_text(f"[run]\nexperiment = {experiment}\nensemble = {ensemble}\nseed = 7\n\n"
                    f"[{experiment}]\n{body}")
    return path


def _outputs(out):
    manifest = json.loads((out / "manifest.json").read_text())
    return {name: (out / name).read_bytes() for name in manifest["outputs"]}, manifest


@pytest.mark.parametrize("experiment", sorted(SMALL))
def test_rerun_and_workers_byte_identical(tmp_path, experiment):
    ens = "builtin:example1" if experiment in ("zeroone", "example1") else "generic2.txt"
    cfg = _config(tmp_path, experiment, ens)
    runs = []
    for k, workers in enumerate([1, 1, 2]):
        out = tmp_path / f"out{k}"
        assert cli.main(["run", "--config", str(cfg), "--out", str(out),
                         "--workers", str(workers)]) == 0
        runs.append(_outputs(out))
    files = [r[0] for r in runs]
    assert files[0] == files[1] == files[2]
    checks = [r[1]["outputs"] for r in runs]
    assert checks[0] == checks[1] == checks[2]


def test_manifest_covers_every_output(tmp_path):
    cfg = _config(tmp_path, "stationary")
    out = tmp_path / "o"
    cli.main(["run", "--config", str(cfg), "--out", str(out)])
    manifest = json.loads((out / "manifest.json").read_text())
    written = {p.name for p in out.iterdir()} - {"manifest.json"}
    assert set(manifest["outputs"]) == written
    assert manifest["seed"] == 7 and manifest["config"]["experiment"] == "stationary"
    assert all(len(h) == 64 for h in manifest["outputs"].values())


def test_seed_flag_overrides_config(tmp_path):
    cfg = _config(tmp_path, "lyapunov")
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", "--config", str(cfg), "--out", str(a), "--seed", "1"])
    cli.main(["run", "--config", str(cfg), "--out", str(b), "--seed", "2"])
    assert (a / "lyapunov.csv").read_bytes() != (b / "lyapunov.csv").read_bytes()


def test_lyapunov_csv_columns(tmp_path):
    cfg = _config(tmp_path, "lyapunov", "builtin:two_matrix")
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    header, row = (tmp_path / "o" / "lyapunov.csv").read_text().splitlines()
    assert header.split(",")[:5] == ["n", "replicas", "burn_in", "lambda", "lambda_half_width"]
    assert abs(float(row.split(",")[3])) < 0.05


def test_example1_concentration_table(tmp_path):
    cfg = _config(tmp_path, "example1", "builtin:example1")
    cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    lines = (tmp_path / "o" / "concentration.csv").read_text().splitlines()
    assert lines[0] == "width,mass"
    assert len(lines) == 6
    verdicts = json.loads((tmp_path / "o" / "example1.json").read_text())
    assert verdicts["level_0.3"]["verdict"] == "zero"


def test_unknown_experiment_exit_2(tmp_path, capsys):
    path = tmp_path / "c.ini"
    path.write_text("[run]\nexperiment = nope\nensemble = builtin:two_matrix\n")
    assert cli.main(["run", "--config", str(path)]) == 2
    assert "run.experiment" in capsys.readouterr().err
    with pytest.raises(ConfigError):
        cli.parse_config(str(path))


@pytest.mark.parametrize("body, key", [
    ("n = 10\nreplicas = zero\n", "lyapunov.replicas"),
    ("n = 0\n", "lyapunov.n"),
    ("bogus = 1\n", "lyapunov.bogus"),
    ("x0 = 1, 0, 0\n", "lyapunov.x0"),
])
def test_config_error_names_key(tmp_path, body, key):
    cfg = _config(tmp_path, "lyapunov", extra=body)
    with pytest.raises(ConfigError, match=key.replace(".", r"\.")):
        cli.parse_config(str(cfg))


def test_required_keys(tmp_path):
    cfg = _config(tmp_path, "llt", extra="n = 10\n")
    with pytest.raises(ConfigError, match=r"llt\.lam: required"):
        cli.parse_config(str(cfg))


def test_missing_ensemble_file(tmp_path):
    cfg = _config(tmp_path, "lyapunov", "nowhere.txt")
    with pytest.raises(ConfigError, match="ensemble"):
        cli.parse_config(str(cfg))


def test_module_error_names_stage(tmp_path, capsys):
    # a phase this fine needs more quadrature nodes than the memory budget allows
    cfg = _config(tmp_path, "fourier", extra="m = 16\nns = 100000000\nlam = 0.0881\nsigma = 0.6\n")
    code = cli.main(["run", "--config", str(cfg), "--out", str(tmp_path / "p")])
    err = capsys.readouterr().err
    assert code == 1
    assert "stage fourier: UnresolvedPhase" in err


def test_validate_subprocess(tmp_path):
    cfg = _config(tmp_path, "spectrum")
    res = subprocess.run([sys.executable, "-m", "projwalk.cli", "validate", "--config", str(cfg)],
                         capture_output=True, text=True)
    assert res.returncode == 0
    assert res.stdout.startswith("ok: spectrum")
    assert not (tmp_path / "results").exists()
