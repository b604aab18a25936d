import json
import os
import subprocess
import sys

import pytest

from matryoshka.cli import main
from matryoshka.config import apply_overrides, load_config


def write(tmp_path, name, text):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SPECTRUM_CFG = """
[chain]
order = 1
angles = [1.5707963267948966, 0.0]
cells = 6
total_sites = 21

[output]
prefix = "spec21"
"""

BANDS_CFG = """
[chain]
order = 0
angles = [0.6285839990865735]
cells = 4
boundary = "periodic"

[protocol]
k_points = 16

[output]
prefix = "b0"
"""


class TestConfig:
    def test_load_and_sections(self, tmp_path):
        cfg = load_config(write(tmp_path, "a.toml", SPECTRUM_CFG))
        assert cfg["chain"]["order"] == 1

    def test_unknown_section_rejected(self, tmp_path):
        from matryoshka import ConfigurationError

        path = write(tmp_path, "bad.toml", "[banana]\nx = 1\n")
        with pytest.raises(ConfigurationError):
            load_config(path)

    def test_overrides(self, tmp_path):
        cfg = load_config(write(tmp_path, "a.toml", SPECTRUM_CFG))
        out = apply_overrides(cfg, ["chain.cells=9", "output.prefix=zz",
                                    "chain.mirror=true"])
        assert out["chain"]["cells"] == 9
        assert out["output"]["prefix"] == "zz"
        assert out["chain"]["mirror"] is True
        assert cfg["chain"]["cells"] == 6  # original untouched

    def test_bad_override_rejected(self, tmp_path):
        from matryoshka import ConfigurationError

        cfg = load_config(write(tmp_path, "a.toml", SPECTRUM_CFG))
        with pytest.raises(ConfigurationError):
            apply_overrides(cfg, ["nonsense"])


class TestCommands:
    def test_spectrum(self, tmp_path):
        cfg = write(tmp_path, "a.toml", SPECTRUM_CFG)
        rc = main(["spectrum", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        man = json.loads((tmp_path / "spec21_manifest.json").read_text())
        assert man["derived"]["n_edge_states"] == 4
        assert (tmp_path / "spec21_spectrum.csv").exists()
        assert (tmp_path / "spec21_lattice.json").exists()

    def test_bands(self, tmp_path):
        cfg = write(tmp_path, "b.toml", BANDS_CFG)
        rc = main(["bands", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "b0_bands.csv").read_text().strip().splitlines()
        assert lines[0] == "k,band_0,band_1"
        assert len(lines) == 17

    def test_sqrt_check(self, tmp_path):
        cfg = write(tmp_path, "s.toml", """
[chain]
order = 0
angles = [0.6285839990865735]
cells = 6

[protocol]
embed_scale = 0.6363961030678928

[output]
prefix = "sq"
""")
        rc = main(["sqrt-check", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        man = json.loads((tmp_path / "sq_manifest.json").read_text())
        assert man["derived"]["lift_residual"] < 1e-10
        assert man["derived"]["parent_recovery_error"] < 1e-10

    def test_transfer_short(self, tmp_path):
        cfg = write(tmp_path, "t.toml", """
[schedule]
duration = 100.0
steps = 2000

[output]
prefix = "tr"
""")
        rc = main(["transfer", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        man = json.loads((tmp_path / "tr_manifest.json").read_text())
        assert man["derived"]["fidelities"]["eps=+1"] > 0.99
        csvs = [p for p in man["outputs"] if p.endswith(".csv")]
        assert len(csvs) == 3

    def test_memory_smoke(self, tmp_path):
        cfg = write(tmp_path, "m.toml", """
[chain]
order = 1
angles = [1.5707963267948966, 0.0]
cells = 6
total_sites = 21

[protocol]
target_energy = 1.0
coupling = 0.02
t_waits = [0.0, 10.0]

[output]
prefix = "mem"
""")
        rc = main(["memory", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        lines = (tmp_path / "mem_memory.csv").read_text().strip().splitlines()
        assert lines[0] == "t_wait,fidelity"
        assert float(lines[1].split(",")[1]) > 0.999

    def test_bloch(self, tmp_path):
        cfg = write(tmp_path, "bl.toml", """
[schedule]
duration = 6.283185307179586
steps = 2000

[protocol]
n0 = [0.0, 0.0, 1.0]
r0 = [1.0, 0.0, 0.0]

[output]
prefix = "bloch"
""")
        rc = main(["bloch", cfg, "--output-dir", str(tmp_path)])
        assert rc == 0
        man = json.loads((tmp_path / "bloch_manifest.json").read_text())
        r = man["derived"]["final_r"]
        assert abs(r[0] - 1.0) < 1e-4 and abs(r[1]) < 1e-4

    def test_disorder_sweep_small(self, tmp_path):
        cfg = write(tmp_path, "d.toml", """
[schedule]
duration = 10.0
steps = 200

[disorder]
sigma = 0.1
seed = 5
realizations = 3

[protocol]
kinds = ["correlated_angle", "onsite"]

[output]
prefix = "sw"
""")
        rc = main(["disorder-sweep", cfg, "--output-dir", str(tmp_path),
                   "--threads", "1"])
        assert rc == 0
        for kind in ("correlated_angle", "onsite"):
            path = tmp_path / f"sw_ensemble_{kind}.csv"
            assert path.exists()
            assert path.read_text().splitlines()[0] == \
                "t,kind,sigma,mean_fidelity,fidelity_stderr,entropy,n_effective"


class TestReproducibility:
    def test_rerun_byte_identical(self, tmp_path):
        cfg = write(tmp_path, "a.toml", SPECTRUM_CFG)
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["spectrum", cfg, "--output-dir", str(d1)]) == 0
        assert main(["spectrum", cfg, "--output-dir", str(d2)]) == 0
        assert (d1 / "spec21_spectrum.csv").read_bytes() == \
               (d2 / "spec21_spectrum.csv").read_bytes()

    def test_replay_from_manifest(self, tmp_path):
        cfg = write(tmp_path, "a.toml", SPECTRUM_CFG)
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["spectrum", cfg, "--output-dir", str(d1)]) == 0
        man = str(d1 / "spec21_manifest.json")
        assert main(["spectrum", man, "--output-dir", str(d2)]) == 0
        assert (d1 / "spec21_spectrum.csv").read_bytes() == \
               (d2 / "spec21_spectrum.csv").read_bytes()

    def test_seeded_sweep_identical(self, tmp_path):
        cfg = write(tmp_path, "d.toml", """
[schedule]
duration = 10.0
steps = 200

[disorder]
sigma = 0.2
seed = 9
realizations = 2

[output]
prefix = "sw"
""")
        d1, d2 = tmp_path / "r1", tmp_path / "r2"
        assert main(["disorder-sweep", cfg, "--output-dir", str(d1)]) == 0
        assert main(["disorder-sweep", cfg, "--output-dir", str(d2)]) == 0
        a = (d1 / "sw_ensemble_correlated_angle.csv").read_bytes()
        b = (d2 / "sw_ensemble_correlated_angle.csv").read_bytes()
        assert a == b


class TestErrors:
    def test_config_parse_error_exit_code(self, tmp_path, capsys):
        path = write(tmp_path, "bad.toml", "[chain\noops")
        rc = main(["spectrum", path, "--output-dir", str(tmp_path)])
        assert rc == 2
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "ConfigurationError"

    def test_infeasible_lift_exit_code(self, tmp_path, capsys):
        cfg = write(tmp_path, "s.toml", """
[chain]
order = 0
angles = [0.7853981633974483]
cells = 4

[protocol]
embed_scale = 1.5
""")
        rc = main(["sqrt-check", cfg, "--output-dir", str(tmp_path)])
        assert rc == 3
        err = json.loads(capsys.readouterr().err)
        assert err["error"] == "InfeasibleLiftError"

    def test_missing_file(self, tmp_path, capsys):
        rc = main(["spectrum", str(tmp_path / "nope.toml")])
        assert rc == 2

    def test_empty_config_usage_error(self, tmp_path, capsys):
        path = write(tmp_path, "empty.toml", "")
        rc = main(["spectrum", path, "--output-dir", str(tmp_path)])
        assert rc == 2


class TestEnvOutputDir:
    def test_env_var_used(self, tmp_path):
        cfg_text = SPECTRUM_CFG.replace('prefix = "spec21"', 'prefix = "envd"')
        cfg = write(tmp_path, "a.toml", cfg_text)
        env = dict(os.environ, MATRYOSHKA_OUTDIR=str(tmp_path / "envout"))
        out = subprocess.run(
            [sys.executable, "-m", "matryoshka.cli", "spectrum", cfg],
            env=env, capture_output=True, text=True)
        assert out.returncode == 0
        assert (tmp_path / "envout" / "envd_manifest.json").exists()


class TestShippedConfigs:
    def test_multigap_spectrum_config(self, tmp_path):
        import pathlib

        cfg = pathlib.Path(__file__).parent.parent / "configs" / "spectrum_multigap.toml"
        rc = main(["spectrum", str(cfg), "--output-dir", str(tmp_path)])
        assert rc == 0
        man = json.loads((tmp_path / "multigap_manifest.json").read_text())
        assert man["derived"]["n_edge_states"] == 14

    def test_bands_config_four_columns(self, tmp_path):
        import pathlib

        cfg = pathlib.Path(__file__).parent.parent / "configs" / "bands_p1.toml"
        rc = main(["bands", str(cfg), "--output-dir", str(tmp_path)])
        assert rc == 0
        head = (tmp_path / "bands_p1_bands.csv").read_text().splitlines()[0]
        assert head == "k,band_0,band_1,band_2,band_3"
