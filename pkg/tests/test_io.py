import json

import numpy as np
import pytest
import tomli
import tomli_w

from equiorb.action import action_eval
from equiorb.cli import main
from equiorb.diagnostics import verify_orbit, verify_samples
from equiorb.errors import ParseError, SchemaError, ValidationError
from equiorb.io import (
    IOFailure,
    export_trajectory,
    import_trajectory,
    load_result,
    parse_matrix,
    parse_problem,
    problem_from_dict,
    problem_hash,
    problem_to_dict,
    read_path_from_file,
    result_filename,
    store_result,
    write_problem,
)
from equiorb.optimize import MinimizationResult
from equiorb.path import extend_to_period

from conftest import D6_FILE

D6_TEXT = D6_FILE.read_text()


def d6_dict(**changes):
    data = tomli.loads(D6_TEXT)
    data.update(changes)
    return data


def write(tmp_path, name, text):
    path = tmp_path / name
    path.write_text(text)
    return path


def fake_result(problem, coeffs, value=None):
    value = action_eval(coeffs, problem).value if value is None else value
    return MinimizationResult(np.asarray(coeffs).reshape(problem.coeff_shape), value, 0.0, 0, "converged")


class TestParseProblem:
    def test_verbatim_listing(self, d6):
        assert "\t" in D6_TEXT
        assert (d6.n, d6.d, d6.action_type, d6.F) == (3, 2, "dihedral", 24)
        assert len(d6.group) == 6 and len(d6.kernel) == 1
        assert d6.name == "d6_plane"
        assert d6.ncoeff == 104
        assert d6.diagnostics is not None and d6.diagnostics.coercive

    def test_trivial_kernel_token(self):
        P = problem_from_dict(d6_dict(kern=" TrivialKerTau( 2 ) "), diagnose_problem=False)
        assert len(P.kernel) == 1
        with pytest.raises(ParseError, match="dim"):
            problem_from_dict(d6_dict(kern="TrivialKerTau(3)"))

    def test_kernel_list(self):
        data = d6_dict(kern=[["[[-1, 0], [0, -1]]", "()"]], rotS="()", refS="()", rotV="[[0, -1], [1, 0]]",
                       refV=[[1, 0], [0, -1]])
        P = problem_from_dict(data, diagnose_problem=False)
        assert len(P.kernel) == 2
        again = problem_from_dict(problem_to_dict(P), diagnose_problem=False)
        assert problem_hash(again) == problem_hash(P)

    def test_omega_not_antisymmetric(self):
        with pytest.raises(ValidationError, match="antisymmetric"):
            problem_from_dict(d6_dict(Omega=[[0, 1], [1, 0]]))

    @pytest.mark.parametrize("changes, key", [
        ({"rotV": "[[1, 0], [0, 1]"}, "rotV"),
        ({"refV": [[1, 0, 0], [0, 1, 0]]}, "refV"),
        ({"action_type": 3}, "action_type"),
        ({"NOB": "3"}, "NOB"),
        ({"kern": "Trivial"}, "kern"),
        ({"kern": [["[[1,0],[0,1]]"]]}, "kern[0]"),
    ])
    def test_errors_name_the_key(self, changes, key):
        with pytest.raises(ParseError) as info:
            problem_from_dict(d6_dict(**changes))
        assert repr(key) in str(info.value)

    def test_missing_keys(self):
        data = d6_dict()
        del data["rotS"], data["F"]
        with pytest.raises(ParseError, match="rotS, F"):
            problem_from_dict(data)

    def test_bad_toml_reports_line(self, tmp_path):
        path = write(tmp_path, "bad.toml", 'NOB = 3\ndim = = 2\n')
        with pytest.raises(ParseError, match="line 2"):
            parse_problem(path)

    def test_missing_file(self, tmp_path):
        with pytest.raises(IOFailure) as info:
            parse_problem(tmp_path / "absent.toml")
        assert info.value.path.name == "absent.toml"

    def test_matrix_styles(self):
        expected = np.array([[0.0, -1.0], [1.0, 0.0]])
        for literal in ("[[0, -1], [1, 0]]", "[0 -1; 1 0]", [[0, -1], [1, 0]]):
            assert np.array_equal(parse_matrix(literal, 2, "M"), expected)

    def test_optional_tables(self):
        data = d6_dict(potential={"kind": "power", "alpha": 2.0}, optimizer={"method": "bfgs,newton_linesearch"}, S=64)
        P = problem_from_dict(data, diagnose_problem=False)
        assert P.potential.alpha == 2.0 and P.S == 64
        assert P.source["optimizer"].stages == ["bfgs", "newton_linesearch"]
        with pytest.raises(ParseError, match="optimizer"):
            problem_from_dict(d6_dict(optimizer={"speed": 1}))


class TestProblemRoundTrip:
    def test_write_and_parse(self, d6, tmp_path):
        path = write_problem(d6, tmp_path / "copy.toml")
        again = parse_problem(path)
        assert problem_hash(again) == problem_hash(d6)
        assert problem_to_dict(again) == problem_to_dict(d6)

    def test_hash_sensitive(self, d6):
        other = problem_from_dict(d6_dict(F=23), diagnose_problem=False)
        assert problem_hash(other) != problem_hash(d6)


class TestResults:
    def test_filename(self, tmp_path):
        assert result_filename(tmp_path, 5.85843).name == "5.8584.toml"

    def test_store_and_read(self, d6, d6_orbit, tmp_path):
        path = store_result(d6_orbit, d6, tmp_path)
        assert path == tmp_path / "d6_plane" / f"{d6_orbit.action_value:.4f}.toml"
        assert path.name == "5.8584.toml"
        problem, coeffs = read_path_from_file(path)
        assert coeffs.size == 104 and coeffs.shape == (26, 2, 2)
        assert np.array_equal(coeffs, d6_orbit.fourier_coeff)
        assert problem_hash(problem) == problem_hash(d6)
        stored = load_result(path)
        assert stored.action_value == d6_orbit.action_value
        assert action_eval(coeffs, problem).value == pytest.approx(stored.action_value, abs=1e-9)
        assert stored.data["diagnostics"]["coercive"] is True

    def test_collision_suffix(self, d6, d6_orbit, tmp_path):
        first = store_result(d6_orbit, d6, tmp_path)
        second = store_result(d6_orbit, d6, tmp_path)
        third = store_result(d6_orbit, d6, tmp_path)
        assert (first.name, second.name, third.name) == ("5.8584.toml", "5.8584-1.toml", "5.8584-2.toml")

    def test_refuses_non_finite(self, d6_small, tmp_path):
        bad = fake_result(d6_small, np.full(d6_small.ncoeff, np.nan), value=np.nan)
        with pytest.raises(ValueError):
            store_result(bad, d6_small, tmp_path)

    def test_missing_block(self, d6, d6_orbit, tmp_path):
        path = store_result(d6_orbit, d6, tmp_path)
        text = path.read_text()
        cut = write(tmp_path, "cut.toml", text[: text.index("[result]")])
        with pytest.raises(SchemaError, match=r"\[result\]"):
            load_result(cut)

    def test_shape_mismatch(self, d6, d6_orbit, tmp_path):
        path = store_result(d6_orbit, d6, tmp_path)
        data = tomli.loads(path.read_text())
        data["result"]["fourier_coeff"] = data["result"]["fourier_coeff"][:100]
        bad = tmp_path / "short.toml"
        bad.write_bytes(tomli_w.dumps(data).encode())
        with pytest.raises(SchemaError, match="expected 104 .* found 100"):
            load_result(bad)


class TestTrajectories:
    @pytest.mark.parametrize("fmt", ["csv", "json"])
    def test_round_trip(self, d6, d6_orbit, tmp_path, fmt):
        S = 50
        path = export_trajectory(d6, d6_orbit.fourier_coeff, S, fmt, tmp_path / f"orbit.{fmt}")
        traj = import_trajectory(path)
        assert traj.S == S and traj.m == 6 and traj.period == pytest.approx(6 * np.pi)
        assert traj.y.shape == (6 * S, 3, 2)
        assert np.array_equal(traj.y, extend_to_period(d6_orbit.fourier_coeff, d6, S).y)

    def test_csv_layout(self, d6, d6_orbit, tmp_path):
        path = export_trajectory(d6, d6_orbit.fourier_coeff, 50, "csv", tmp_path / "o.csv")
        lines = path.read_text().splitlines()
        header = [l for l in lines if l.startswith("#")]
        rows = [l for l in lines if not l.startswith("#")]
        assert json.loads(header[0].split("=", 1)[1]) == pytest.approx(6 * np.pi)
        assert rows[0] == "h,body,x1,x2"
        assert len(rows) - 1 == 3 * 6 * 50
        assert rows[1].startswith("0,1,") and rows[4].startswith("1,1,")

    def test_constant_path(self, tmp_path):
        P = problem_from_dict(d6_dict(action_type=0, rotS="()", kern="TrivialKerTau(2)"), diagnose_problem=False)
        A = np.zeros(P.coeff_shape)
        A[0] = A[-1] = [[1.0, 0.0], [0.0, 1.0]]
        traj = import_trajectory(export_trajectory(P, A, 48, "csv", tmp_path / "c.csv"))
        assert np.all(traj.y == traj.y[0])

    def test_verifier_round_trip(self, d6, d6_orbit, tmp_path):
        S = 400
        direct = verify_orbit(d6_orbit, d6, dense_S=S)
        traj = import_trajectory(export_trajectory(d6, d6_orbit.fourier_coeff, S, "csv", tmp_path / "v.csv"))
        again = verify_samples(traj.y, traj.masses, traj.S)
        assert again.max_equation_residual == pytest.approx(direct.max_equation_residual, abs=1e-9)
        assert again.energy_drift_along_period == pytest.approx(direct.energy_drift_along_period, abs=1e-9)


class TestCli:
    def test_init_and_info(self, capsys):
        assert main(["init", str(D6_FILE)]) == 0
        out = capsys.readouterr().out
        assert "|G| = 6" in out and "coercive" in out
        assert main(["info", str(D6_FILE)]) == 0
        out = capsys.readouterr().out
        assert "|G / ker tau|   6" in out
        assert "t -> -t + 4 pi" in out

    def test_solve_verify_export_render(self, tmp_path, capsys):
        assert main(["solve", str(D6_FILE), "--starts", "2", "--seed", "1", "--keep", "best",
                     "--out", str(tmp_path)]) == 0
        stored = sorted((tmp_path / "d6_plane").glob("*.toml"))
        assert [p.name for p in stored] == ["5.8584.toml"]
        capsys.readouterr()
        assert main(["verify", str(stored[0]), "--dense-S", "400"]) == 0
        assert "max_equation_residual" in capsys.readouterr().out
        assert main(["export", str(stored[0]), "--format", "json", "--samples", "20"]) == 2
        assert "cannot resolve" in capsys.readouterr().err
        assert main(["export", str(stored[0]), "--format", "json", "--samples", "60"]) == 0
        assert stored[0].with_suffix(".json").exists()
        assert main(["render", str(stored[0]), "--out", str(tmp_path / "o.svg")]) == 0
        assert (tmp_path / "o.svg").read_text().startswith("<svg")

    def test_validation_exit(self, tmp_path, capsys):
        bad = write(tmp_path, "bad.toml", D6_TEXT.replace("[0, 0],\n\t\t[0, 0]", "[0, 1],\n\t\t[1, 0]"))
        assert main(["init", str(bad)]) == 2
        assert "antisymmetric" in capsys.readouterr().err

    def test_parse_error_exit(self, tmp_path):
        bad = write(tmp_path, "bad.toml", D6_TEXT.replace('rotS = "(1,2,3)"', 'rotS = "(1,2,4)"'))
        assert main(["init", str(bad)]) == 2

    def test_no_convergence_exit(self, tmp_path):
        assert main(["solve", str(D6_FILE), "--max-iter", "1", "--seed", "0", "--out", str(tmp_path)]) == 3
        assert not (tmp_path / "d6_plane").exists()

    def test_io_exit(self, tmp_path):
        assert main(["verify", str(tmp_path / "missing.toml")]) == 4
        cut = write(tmp_path, "cut.toml", 'schema = "equiorb-result"\n')
        assert main(["verify", str(cut)]) == 4
