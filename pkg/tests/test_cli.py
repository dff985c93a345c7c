import json
import subprocess
import sys

import pytest

from sipcert.fixtures import fixture_path


def run_cli(*args):
    proc = subprocess.run(
        [sys.executable, "-m", "sipcert", *args],
        capture_output=True,
        text=True,
        timeout=120,
    )
    return proc


def run_json(*args):
    proc = run_cli(*args, "--json")
    report = json.loads(proc.stdout)
    return proc.returncode, report


class TestCertify:
    def test_near_active_kkt_exit_zero(self):
        code, report = run_json("certify", fixture_path("near_active"))
        assert code == 0
        assert report["verdict"] == "KKT"
        assert report["certificate"]["lambda"] == pytest.approx(0.5, abs=1e-9)
        assert report["exit_code"] == 0

    def test_infeasible_candidate_exit_three(self, tmp_path):
        doc = json.loads(open(fixture_path("near_active")).read())
        doc["candidate"] = [-1.0, 0.0]
        path = tmp_path / "bad.json"
        path.write_text(json.dumps(doc))
        code, report = run_json("certify", str(path))
        assert code == 3
        assert report["verdict"] == "Infeasible"
        assert report["violations"][0]["tag"] == "phi0"

    def test_malformed_file_exit_four(self, tmp_path):
        path = tmp_path / "broken.json"
        path.write_text("{ nope")
        proc = run_cli("certify", str(path), "--json")
        assert proc.returncode == 4
        assert "error" in json.loads(proc.stdout)

    def test_strict_variant_exit_two(self):
        code, report = run_json("certify", fixture_path("strict_active"))
        assert code == 2
        assert report["verdict"] == "NoCertificate"

    def test_equality_fixture(self):
        code, report = run_json("certify", fixture_path("eq_circle"))
        assert code == 0
        assert report["branch"] == "onto_no_a"
        assert report["lambda0"] == 1
        assert report["w_star"][0] == pytest.approx(-0.5, abs=1e-9)

    def test_degenerate_equality_fixture(self):
        code, report = run_json("certify", fixture_path("eq_duplicated_rows"))
        assert code == 0
        assert report["verdict"] == "EqualityDegenerate"

    def test_flags_override_file_options(self):
        # forcing a tiny first rung makes the near_active union fixture collapse
        code, report = run_json("certify", fixture_path("near_active"), "--eps0", "1e-3")
        assert code == 2

    def test_missing_candidate_exit_four(self, tmp_path):
        doc = json.loads(open(fixture_path("near_active")).read())
        del doc["candidate"]
        path = tmp_path / "nocand.json"
        path.write_text(json.dumps(doc))
        proc = run_cli("certify", str(path))
        assert proc.returncode == 4

    def test_parametric_report_carries_sip_multipliers(self, tmp_path):
        doc = json.loads(open(fixture_path("sip_linear")).read())
        doc["constraints"]["parametric"]["grid"] = 129
        path = tmp_path / "sip.json"
        path.write_text(json.dumps(doc))
        code, report = run_json("certify", str(path))
        assert code == 0
        sip = report["sip_multipliers"]
        assert sip["lambda0"] == pytest.approx(1 / 3, abs=1e-6)
        assert sip["k"] == 1
        assert sip["entries"][0]["t"][0] == pytest.approx(0.5, abs=1e-6)

    def test_exit_code_is_function_of_verdict(self):
        for name, expected in (
            ("near_active", 0),
            ("strict_active", 2),
            ("eq_circle", 0),
            ("composed_parabola", 0),
        ):
            code, report = run_json("certify", fixture_path(name))
            assert code == expected == report["exit_code"]


class TestTcset:
    def test_near_active_final_generators(self):
        code, report = run_json("tcset", fixture_path("near_active"))
        assert code == 0
        gens = {tuple(g) for g in report["final"]["generators"]}
        assert gens == {(1.0, 0.0), (0.0, 1.0)}
        assert "phi0" in report["final"]["tags"]

    def test_interior_candidate(self, tmp_path):
        doc = json.loads(open(fixture_path("near_active")).read())
        doc["candidate"] = [1.0, 1.0]
        path = tmp_path / "interior.json"
        path.write_text(json.dumps(doc))
        code, report = run_json("tcset", str(path))
        assert code == 0
        assert report["interior"] is True
        assert report["final"]["generators"] == []

    def test_linear_sip_segment_endpoints(self, tmp_path):
        doc = json.loads(open(fixture_path("sip_linear")).read())
        doc["constraints"]["parametric"]["grid"] = 65
        path = tmp_path / "sip.json"
        path.write_text(json.dumps(doc))
        code, report = run_json("tcset", str(path))
        gens = {tuple(g) for g in report["final"]["generators"]}
        assert (-1.0, 0.0) in gens and (0.0, -1.0) in gens


class TestAdmissible:
    def test_orthant_cone(self):
        code, report = run_json("admissible", fixture_path("cone_orthant"))
        assert code == 0
        assert report["admissible_style"] is True
        assert report["cone"]["interior_nonempty"] is True

    def test_hyperplane_cone(self):
        code, report = run_json("admissible", fixture_path("cone_hyperplane"))
        assert code == 0
        assert report["admissible_style"] is False
        assert report["cone"]["interior_nonempty"] is False

    def test_near_active_admissible_pass(self):
        code, report = run_json("admissible", fixture_path("near_active"))
        assert code == 0
        assert report["admissible_style"] is True


class TestScan:
    def test_orthant_box_finds_origin(self, tmp_path):
        # f = -x1^2 - x2 maximized over the orthant peaks at the origin;
        # the truncated near_active family would allow x2 >= -1/k_max instead
        doc = {
            "dimension": 2,
            "objective": "-x1^2 - x2",
            "constraints": {
                "polyhedral": {"normals": [[1.0, 0.0], [0.0, 1.0]], "offsets": [0.0, 0.0]}
            },
        }
        path = tmp_path / "orthant.json"
        path.write_text(json.dumps(doc))
        code, report = run_json(
            "scan", str(path), "--box=-1,1,-1,1", "--grid", "41", "--top", "3"
        )
        assert code == 0
        best = report["candidates"][0]
        assert best["x"] == [0.0, 0.0]
        assert best["objective"] == 0.0

    def test_truncated_family_widens_the_feasible_set(self):
        code, report = run_json(
            "scan", fixture_path("near_active"), "--box=-1,1,-1,1", "--grid", "41", "--top", "1"
        )
        assert code == 0
        # the k <= 10 window only enforces x2 >= -0.1
        best = report["candidates"][0]["x"]
        assert best[0] == 0.0
        assert best[1] == pytest.approx(-0.1, abs=1e-12)

    def test_infeasible_box(self):
        code, report = run_json(
            "scan", fixture_path("near_active"), "--box=-2,-1,-2,-1", "--grid", "5", "--top", "1"
        )
        assert code == 3
        assert report["error"] == "empty feasible grid"

    def test_top_one(self):
        code, report = run_json(
            "scan", fixture_path("near_active"), "--box=-1,1,-1,1", "--grid", "21", "--top", "1"
        )
        assert len(report["candidates"]) == 1


class TestSelftest:
    def test_fresh_build_passes(self):
        proc = run_cli("selftest")
        assert proc.returncode == 0
        lines = [l for l in proc.stdout.splitlines() if l.startswith("[")]
        assert lines and all(l.startswith("[ok]") for l in lines)
        assert "15/15 checks passed" in proc.stdout

    def test_tampered_tolerance_fails_documented(self):
        proc = run_cli("selftest", "--tol", "1e-30")
        assert proc.returncode == 1
        assert "[FAIL]" in proc.stdout


class TestDeterminism:
    def test_reports_identical_modulo_timings(self):
        _, first = run_json("certify", fixture_path("near_active"))
        _, second = run_json("certify", fixture_path("near_active"))
        first.pop("timings")
        second.pop("timings")
        assert first == second

    def test_report_round_trips(self):
        proc = run_cli("certify", fixture_path("near_active"), "--json")
        report = json.loads(proc.stdout)
        from sipcert.problemfile import emit_json

        assert json.loads(emit_json(report)) == report
