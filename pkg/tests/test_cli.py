import json
from pathlib import Path

import pytest

from yoccoz.cli import dump_json, load_config_file, main
from yoccoz.dynamics import find_center

AIR = find_center(3, -1.8)
AIR_FLAG = f"{AIR.real},{AIR.imag}"


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestDumpJson:
    def test_sorted_and_fixed_precision(self):
        s = dump_json({"b": 1.0 / 3.0, "a": [1, True, None]})
        assert s.index('"a"') < s.index('"b"')
        assert "0.33333333333333331" in s

    def test_roundtrip_parses(self):
        doc = {"x": [1.5, -2.25], "y": {"z": "s"}, "flag": False}
        assert json.loads(dump_json(doc)) == doc


class TestPortrait:
    def test_valid_angles(self, capsys):
        code, out, _ = run(capsys, "portrait", "--angles", "1/3,2/3")
        assert code == 0
        doc = json.loads(out)
        assert doc == {
            "char_arc": ["1/3", "2/3"],
            "classes": [["1/3", "2/3"]],
            "r": 2,
            "s": 2,
            "t": 1,
        }

    def test_invalid_angles_exit2(self, capsys):
        code, out, _ = run(capsys, "portrait", "--angles", "1/3,1/7")
        assert code == 2
        assert json.loads(out)["type"] == "NotDoublingInvariant"

    def test_clustered_classes(self, capsys):
        code, out, _ = run(capsys, "portrait", "--c", "-1,0", "--period", "1")
        assert code == 0
        doc = json.loads(out)
        assert doc["cycles"][0]["portrait"]["classes"] == [["1/3", "2/3"]]

    def test_usage_error(self, capsys):
        code, _, _ = run(capsys, "portrait")
        assert code == 2

    def test_empty_args_usage(self, capsys):
        code, _, _ = run(capsys)
        assert code == 2


class TestVerify:
    def test_report_and_gallery(self, capsys, tmp_path):
        out_dir = tmp_path / "v"
        code, out, _ = run(
            capsys, "verify", "--c", AIR_FLAG, "--bounds", "4,4,4", "--out", str(out_dir)
        )
        assert code == 0
        doc = json.loads((out_dir / "verify.json").read_text())
        assert doc["molecule_condition"] is True
        ids = [e["id"] for e in doc["entries"]]
        assert len(ids) == len(set(ids)) == 9
        assert all(e["status"] == "pass" for e in doc["entries"])
        assert (out_dir / "puzzle.svg").exists()
        manifest = json.loads((out_dir / "manifest.json").read_text())
        assert "verify.json" in manifest["files"]

    def test_exempt_when_not_satisfied(self, capsys):
        code, out, _ = run(capsys, "verify", "--c", "-1,0", "--bounds", "4,4,4")
        assert code == 0
        doc = json.loads(out)
        assert doc["molecule_condition"] is False
        assert all(e["status"] == "exempt" for e in doc["entries"])

    def test_c0_exempt(self, capsys):
        code, out, _ = run(capsys, "verify", "--c", "0,0", "--bounds", "3,3,3")
        assert code == 0
        doc = json.loads(out)
        assert doc["molecule_condition"] is False
        assert all(e["status"] == "exempt" for e in doc["entries"])


class TestModuli:
    def test_table_and_determinism(self, capsys, tmp_path):
        d1, d2 = tmp_path / "a", tmp_path / "b"
        code, _, _ = run(
            capsys, "moduli", "--c", AIR_FLAG, "--bounds", "4,4,4",
            "--resolution", "128", "--out", str(d1),
        )
        assert code == 0
        code, _, _ = run(
            capsys, "moduli", "--c", AIR_FLAG, "--bounds", "4,4,4",
            "--resolution", "128", "--out", str(d2),
        )
        assert code == 0
        assert (d1 / "moduli.json").read_bytes() == (d2 / "moduli.json").read_bytes()
        assert (d1 / "moduli.csv").read_bytes() == (d2 / "moduli.csv").read_bytes()
        doc = json.loads((d1 / "moduli.json").read_text())
        assert doc["moduli"][0]["value"] > 0
        assert doc["nest"]["terminated"] is True
        assert "plane-domain" in doc["label"]
        # refinement delta column populated
        assert all("refinement_delta" in row for row in doc["moduli"])
        # transfer rows hypothesis-gated: either a table or a named bullet
        assert ("mod_ZY" in doc["transfer"]) or ("bullet" in doc["transfer"])

    def test_hypothesis_gate_exit4(self, capsys):
        code, _, err = run(capsys, "moduli", "--c", "-1,0", "--bounds", "4,4,4",
                           "--resolution", "128")
        assert code == 4
        assert "not satisfied" in err

    def test_bad_resolution_exit2(self, capsys):
        code, _, _ = run(capsys, "moduli", "--c", AIR_FLAG, "--resolution", "100")
        assert code == 2


class TestPlot:
    def test_molecule_svg(self, capsys, tmp_path):
        code, _, _ = run(capsys, "plot", "--molecule", "--period-bound", "4",
                         "--out", str(tmp_path))
        assert code == 0
        svg = (tmp_path / "molecule.svg").read_text()
        assert svg.startswith("<svg") and svg.endswith("</svg>")
        assert "image" in svg and "circle" in svg

    def test_julia_puzzle_svg_deterministic(self, capsys, tmp_path):
        d1, d2 = tmp_path / "p1", tmp_path / "p2"
        for d in (d1, d2):
            code, _, _ = run(
                capsys, "plot", "--julia", "--c", AIR_FLAG, "--bounds", "4,4,4",
                "--puzzle-depth", "2", "--out", str(d),
            )
            assert code == 0
        b1 = (d1 / "julia.svg").read_bytes()
        assert b1 == (d2 / "julia.svg").read_bytes()
        assert b1.startswith(b"<svg")

    def test_plot_without_target_usage(self, capsys):
        code, _, _ = run(capsys, "plot")
        assert code == 2


class TestConfigFile:
    def test_flags_override_file(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("c = -1,0\nbounds = 3,3,3\nresolution = 256  # comment\n")
        parsed = load_config_file(str(cfg))
        assert parsed == {"c": "-1,0", "bounds": "3,3,3", "resolution": "256"}
        # flag --c overrides the file parameter: the airplane satisfies the
        # bounds, so the exit code flips from 4 to 0
        code, _, _ = run(capsys, "moduli", "--config", str(cfg), "--resolution", "128")
        assert code == 4
        code, _, _ = run(capsys, "moduli", "--config", str(cfg), "--c", AIR_FLAG,
                         "--resolution", "128")
        assert code == 0
