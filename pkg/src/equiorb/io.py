"""Problem files, result files and trajectory exports.

Problem files are TOML with the keys ``NOB``, ``dim``, ``m``,
``action_type`` (0 cyclic, 1 dihedral, 2 brake), ``kern``, ``rotV``,
``rotS``, ``refV``, ``refS``, ``F`` and ``Omega``.  Matrices may be written
as strings holding nested lists or as native TOML arrays.  Optional keys:
``symmetry_name``, ``potential`` (``"newtonian"``, ``"none"`` or a table
``{kind = "power", alpha = .., epsilon = ..}``), ``S`` and an
``[optimizer]`` table of :class:`OptimizerOptions` overrides.

Result files reuse the problem keys under ``[problem]`` and add
``[result]`` and ``[diagnostics]`` tables.
"""

from __future__ import annotations

import ast
import csv
import hashlib
import json
import re
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np
import tomli
import tomli_w

from .errors import EquiOrbError, ParseError, SchemaError, ValidationError
from .group import ACTION_TYPES, build_problem
from .optimize import OptimizerOptions
from .potential import PotentialModel

SCHEMA = "equiorb-result"
SCHEMA_VERSION = 1
TOOL_VERSION = "0.1.0"

REQUIRED_KEYS = ("NOB", "dim", "m", "action_type", "kern", "rotV", "rotS", "F")
_TRIVIAL_KERNEL = re.compile(r"^\s*TrivialKerTau\s*\(\s*(\d+)\s*\)\s*$")


class IOFailure(EquiOrbError):
    """A file could not be read or written."""

    def __init__(self, path, exc):
        self.path = Path(path)
        super().__init__(f"{path}: {exc}")


def _load_toml(path):
    path = Path(path)
    try:
        with path.open("rb") as fh:
            return tomli.load(fh)
    except OSError as exc:
        raise IOFailure(path, exc) from exc
    except tomli.TOMLDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def parse_matrix(value, d, key):
    """A ``d x d`` matrix from a nested list or a string literal."""
    if isinstance(value, str):
        text = value.strip()
        try:
            if ";" in text:
                rows = text.strip("[]").split(";")
                value = [[float(v) for v in re.split(r"[\s,]+", row.strip()) if v] for row in rows]
            else:
                value = ast.literal_eval(text)
        except (ValueError, SyntaxError) as exc:
            raise ParseError(f"key {key!r}: cannot parse matrix literal {value!r}") from exc
    try:
        M = np.array(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"key {key!r}: matrix rows have inconsistent lengths") from exc
    if M.shape != (d, d):
        raise ParseError(f"key {key!r}: expected a {d}x{d} matrix, got shape {M.shape}")
    return M


def parse_kernel(value, d):
    """Kernel generators from the ``kern`` entry.

    Either ``"TrivialKerTau(d)"`` or a list whose items are ``[matrix,
    cycles]`` pairs or tables with keys ``V`` and ``S``.
    """
    if isinstance(value, str):
        match = _TRIVIAL_KERNEL.match(value)
        if not match:
            raise ParseError(f"key 'kern': unrecognised kernel {value!r}")
        if int(match.group(1)) != d:
            raise ParseError(f"key 'kern': TrivialKerTau({match.group(1)}) does not match dim = {d}")
        return []
    if not isinstance(value, list):
        raise ParseError("key 'kern': expected a string or a list of generators")
    gens = []
    for k, item in enumerate(value):
        key = f"kern[{k}]"
        if isinstance(item, dict):
            if "V" not in item or "S" not in item:
                raise ParseError(f"key {key!r}: generator tables need 'V' and 'S'")
            matrix, perm = item["V"], item["S"]
        elif isinstance(item, list) and len(item) == 2:
            matrix, perm = item
        else:
            raise ParseError(f"key {key!r}: expected [matrix, cycles] or {{V, S}}")
        if not isinstance(perm, str):
            raise ParseError(f"key {key!r}: permutation must be a cycle string")
        gens.append((parse_matrix(matrix, d, key), perm))
    return gens


def parse_potential(value):
    if value is None:
        return PotentialModel.newtonian()
    if isinstance(value, str):
        value = {"kind": value}
    if not isinstance(value, dict):
        raise ParseError("key 'potential': expected a name or a table")
    try:
        return PotentialModel.from_dict(value)
    except ValueError as exc:
        raise ParseError(f"key 'potential': {exc}") from exc


def parse_optimizer(value):
    if not value:
        return None
    known = {f.name for f in fields(OptimizerOptions)}
    unknown = sorted(set(value) - known)
    if unknown:
        raise ParseError(f"table 'optimizer': unknown keys {unknown}")
    try:
        return OptimizerOptions(**value)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"table 'optimizer': {exc}") from exc


def _require_int(data, key):
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"key {key!r}: expected an integer, got {value!r}")
    return value


def problem_from_dict(data, name=None, diagnose_problem=True):
    """Build a problem from parsed TOML data (see the module docstring)."""
    missing = [k for k in REQUIRED_KEYS if k not in data]
    if missing:
        raise ParseError(f"missing keys: {', '.join(missing)}")
    n, d = _require_int(data, "NOB"), _require_int(data, "dim")
    code = _require_int(data, "action_type")
    if code not in (0, 1, 2):
        raise ParseError(f"key 'action_type': expected 0, 1 or 2, got {code}")
    action_type = ACTION_TYPES[code]
    masses = data["m"]
    if not isinstance(masses, list):
        raise ParseError("key 'm': expected a list of masses")
    rot = (parse_matrix(data["rotV"], d, "rotV"), data["rotS"])
    ref = None
    if "refV" in data or "refS" in data:
        if "refV" not in data or "refS" not in data:
            raise ParseError("keys 'refV' and 'refS' must be given together")
        ref = (parse_matrix(data["refV"], d, "refV"), data["refS"])
    Omega = parse_matrix(data["Omega"], d, "Omega") if "Omega" in data else None
    potential = parse_potential(data.get("potential"))
    opts = parse_optimizer(data.get("optimizer"))
    symmetry_name = name or data.get("symmetry_name", "problem")
    problem = build_problem(
        n, d, masses, action_type, rot, ref,
        kernel_generators=parse_kernel(data["kern"], d),
        F=_require_int(data, "F"),
        Omega=Omega,
        potential=potential,
        S=int(data.get("S", 200)),
        name=symmetry_name,
        source={"optimizer": opts} if opts else {},
    )
    if diagnose_problem:
        from .diagnostics import diagnose

        problem = replace(problem, diagnostics=diagnose(problem))
    return problem


def parse_problem(path, diagnose_problem=True):
    """Read a problem file; validation and structural diagnostics are attached."""
    data = _load_toml(path)
    try:
        return problem_from_dict(data, diagnose_problem=diagnose_problem)
    except ParseError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def _matrix_list(M):
    return [[float(v) for v in row] for row in np.asarray(M)]


def problem_to_dict(problem):
    """The problem in the file dialect, with matrices as native arrays."""
    out = {
        "symmetry_name": problem.name,
        "NOB": problem.n,
        "dim": problem.d,
        "m": [float(v) for v in problem.masses],
        "action_type": ACTION_TYPES.index(problem.action_type),
    }
    gens = problem.kernel.generators
    if len(problem.kernel) == 1:
        out["kern"] = f"TrivialKerTau({problem.d})"
    else:
        out["kern"] = [{"V": _matrix_list(g.rho), "S": g.sigma.to_cycles()} for g in gens]
    out["rotV"] = _matrix_list(problem.rot_gen.rho)
    out["rotS"] = problem.rot_gen.sigma.to_cycles()
    if problem.ref_gen is not None:
        out["refV"] = _matrix_list(problem.ref_gen.rho)
        out["refS"] = problem.ref_gen.sigma.to_cycles()
    out["F"] = problem.F
    out["Omega"] = _matrix_list(problem.Omega)
    out["potential"] = problem.potential.to_dict()
    out["S"] = problem.S
    opts = problem.source.get("optimizer")
    if opts is not None:
        defaults = OptimizerOptions()
        out["optimizer"] = {
            f.name: getattr(opts, f.name)
            for f in fields(OptimizerOptions)
            if getattr(opts, f.name) != getattr(defaults, f.name) and getattr(opts, f.name) is not None
        }
    return out


def problem_hash(problem):
    """Stable digest of the serialised problem."""
    text = json.dumps(problem_to_dict(problem), sort_keys=True)
    return hashlib.sha256(text.encode()).hexdigest()


def write_problem(problem, path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            tomli_w.dump(problem_to_dict(problem), fh)
    except OSError as exc:
        raise IOFailure(path, exc) from exc
    return path


def result_filename(directory, action_value):
    """``directory/<action>.toml`` with a ``-k`` suffix if the name is taken."""
    directory = Path(directory)
    stem = f"{action_value:.4f}"
    path = directory / f"{stem}.toml"
    k = 1
    while path.exists():
        path = directory / f"{stem}-{k}.toml"
        k += 1
    return path


def result_to_dict(result, problem, diagnostics=None, verification=None):
    coeffs = np.asarray(result.fourier_coeff, dtype=float)
    body = {
        "action_value": float(result.action_value),
        "gradient_norm": float(result.gradient_norm),
        "iterations": int(result.iterations),
        "termination": result.termination,
        "shape": list(problem.coeff_shape),
        "fourier_coeff": [float(v) for v in coeffs.reshape(-1)],
    }
    if result.seed is not None:
        body["seed"] = int(result.seed)
    out = {
        "schema": SCHEMA,
        "schema_version": SCHEMA_VERSION,
        "tool_version": TOOL_VERSION,
        "problem": problem_to_dict(problem),
        "result": body,
    }
    report = diagnostics or problem.diagnostics
    if report is not None:
        out["diagnostics"] = report.to_dict()
    if verification is not None:
        out["verification"] = verification.to_dict()
    return out


def store_result(result, problem, directory=".", diagnostics=None, verification=None):
    """Write a result to ``directory/<symmetry_name>/<action>.toml``."""
    if not np.all(np.isfinite(result.fourier_coeff)) or not np.isfinite(result.action_value):
        raise ValueError("refusing to store a non-finite result")
    target = Path(directory) / problem.name
    try:
        target.mkdir(parents=True, exist_ok=True)
        path = result_filename(target, result.action_value)
        data = result_to_dict(result, problem, diagnostics, verification)
        with path.open("xb") as fh:
            tomli_w.dump(data, fh)
    except OSError as exc:
        raise IOFailure(target, exc) from exc
    return path


@dataclass
class StoredResult:
    problem: object
    fourier_coeff: np.ndarray
    action_value: float
    gradient_norm: float
    data: dict


def load_result(path, diagnose_problem=False):
    data = _load_toml(path)
    for block in ("problem", "result"):
        if block not in data:
            raise SchemaError(f"{path}: missing [{block}] table")
    if data.get("schema", SCHEMA) != SCHEMA:
        raise SchemaError(f"{path}: unknown schema {data.get('schema')!r}")
    if data.get("schema_version", SCHEMA_VERSION) > SCHEMA_VERSION:
        raise SchemaError(f"{path}: schema version {data['schema_version']} is newer than supported")
    try:
        problem = problem_from_dict(data["problem"], diagnose_problem=diagnose_problem)
    except (ParseError, ValidationError) as exc:
        raise SchemaError(f"{path}: [problem] {exc}") from exc
    res = data["result"]
    for key in ("fourier_coeff", "action_value"):
        if key not in res:
            raise SchemaError(f"{path}: [result] is missing {key!r}")
    coeffs = np.array(res["fourier_coeff"], dtype=float)
    if coeffs.size != problem.ncoeff:
        raise SchemaError(
            f"{path}: expected {problem.ncoeff} coefficients with shape "
            f"{problem.coeff_shape}, found {coeffs.size}"
        )
    return StoredResult(
        problem,
        coeffs.reshape(problem.coeff_shape),
        float(res["action_value"]),
        float(res.get("gradient_norm", np.nan)),
        data,
    )


def read_path_from_file(path):
    """Return ``(problem, coefficients)`` from a stored result."""
    stored = load_result(path)
    return stored.problem, stored.fourier_coeff


@dataclass
class Trajectory:
    """Full-period samples ``y[h, i, k]``: time index, body, coordinate."""

    y: np.ndarray
    S: int
    m: int
    masses: np.ndarray

    @property
    def period(self):
        return self.m * np.pi


def trajectory_samples(problem, coeffs, S):
    from .path import extend_to_period

    return extend_to_period(coeffs, problem, S).y


def export_trajectory(problem, coeffs, S, format="csv", path=None):
    """Write full-period samples as CSV or JSON.

    CSV columns are ``h, body, x1 .. xd`` with ``t = h pi / S`` and 1-based
    body numbers; comment lines at the top carry ``T``, ``S``, ``m``, the
    masses and the dimension.
    """
    y = trajectory_samples(problem, coeffs, S)
    N, n, d = y.shape
    path = Path(path or f"{problem.name}.{format}")
    header = {
        "T": float(problem.period),
        "S": int(S),
        "m": int(problem.m),
        "n": n,
        "d": d,
        "masses": [float(v) for v in problem.masses],
    }
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        if format == "csv":
            with path.open("w", newline="") as fh:
                for key, value in header.items():
                    fh.write(f"# {key} = {json.dumps(value)}\n")
                writer = csv.writer(fh)
                writer.writerow(["h", "body"] + [f"x{k + 1}" for k in range(d)])
                for h in range(N):
                    for i in range(n):
                        writer.writerow([h, i + 1] + [repr(float(v)) for v in y[h, i]])
        elif format == "json":
            payload = dict(header, layout="y[h][body][coordinate]", y=y.tolist())
            path.write_text(json.dumps(payload))
        else:
            raise ValueError(f"unknown export format {format!r}")
    except OSError as exc:
        raise IOFailure(path, exc) from exc
    return path


def import_trajectory(path):
    """Read a file written by :func:`export_trajectory`."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise IOFailure(path, exc) from exc
    if path.suffix == ".json":
        data = json.loads(text)
        y = np.array(data["y"], dtype=float)
        return Trajectory(y, int(data["S"]), int(data["m"]), np.array(data["masses"], dtype=float))
    header, rows = {}, []
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = json.loads(value)
        else:
            body.append(line)
    reader = csv.reader(body)
    next(reader)
    for row in reader:
        rows.append([float(v) for v in row[2:]])
    n, d = int(header["n"]), int(header["d"])
    y = np.array(rows, dtype=float).reshape(-1, n, d)
    return Trajectory(y, int(header["S"]), int(header["m"]), np.array(header["masses"], dtype=float))
