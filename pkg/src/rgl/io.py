"""Config files, binary snapshots, time-series CSV and run manifests."""

from __future__ import annotations

import csv
import json
import math
import os
import struct
import zlib
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from rgl.basis import SpectralBasis, SpectralCoeffs, build_basis
from rgl.dynamics import IntegratorConfig, SimState
from rgl.functionals import DiagnosticsSeries
from rgl.params import ModelParams, Truncation, validate, validate_truncation

# -- config ----------------------------------------------------------------------------------

_FLOAT_KEYS = {"omega": "omega", "Omega": "Omega", "theta": "theta_d", "lambda": "lam",
               "sigma": "sigma", "mu": "mu"}
_INT_KEYS = ("dim", "max_level", "n_radial_quad", "n_angular_quad", "n_axial_quad", "snapshot_stride")
KNOWN_KEYS = frozenset([*_FLOAT_KEYS, *_INT_KEYS, "dt", "t_final", "output_dir", "scheme"])

# which config keys a validation message concerns
_VIOLATION_KEYS = {
    "omega > 0": "omega",
    "omega > |Omega|": "Omega",
    "theta in": "theta",
    "lambda >= 0": "lambda",
    "sigma": "sigma",
    "dim in": "dim",
    "max_level": "max_level",
    "n_radial_quad": "n_radial_quad",
    "n_angular_quad": "n_angular_quad",
    "n_axial_quad": "n_axial_quad",
}


class ConfigError(ValueError):
    def __init__(self, problems: list[str]):
        self.problems = problems
        super().__init__("invalid config:\n  " + "\n  ".join(problems))


@dataclass
class RunConfig:
    params: ModelParams
    truncation: Truncation
    integrator: IntegratorConfig
    t_final: float = 1.0
    output_dir: str | None = None
    raw: dict[str, str] = field(default_factory=dict)

    def resolved(self) -> dict:
        return {
            "params": asdict(self.params),
            "truncation": asdict(self.truncation.resolved(self.params.dim)),
            "integrator": asdict(self.integrator),
            "t_final": self.t_final,
            "output_dir": self.output_dir,
        }


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment. Every problem is reported at once."""
    problems: list[str] = []
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = (s.strip() for s in line.partition("="))
        where = f"{source}:{lineno}"
        if not sep or not key:
            problems.append(f"{where}: expected 'key = value'")
        elif key not in KNOWN_KEYS:
            problems.append(f"{where}: unknown key {key!r}")
        elif key in raw:
            problems.append(f"{where}: duplicate key {key!r}")
        else:
            raw[key] = value

    pkw: dict = {}
    tkw: dict = {}
    ikw: dict = {}
    t_final = 1.0
    for key, value in raw.items():
        try:
            if key in _FLOAT_KEYS:
                pkw[_FLOAT_KEYS[key]] = _finite(value)
            elif key == "dim":
                pkw["dim"] = int(value)
            elif key in _INT_KEYS and key != "snapshot_stride":
                tkw[key] = int(value)
            elif key == "snapshot_stride":
                ikw[key] = int(value)
            elif key == "dt":
                ikw["dt"] = _finite(value)
            elif key == "scheme":
                ikw["scheme"] = value.upper()
            elif key == "t_final":
                t_final = _finite(value)
                if not t_final > 0:
                    problems.append("t_final: must be > 0")
        except ValueError:
            problems.append(f"{key}: cannot parse {value!r}")

    params = ModelParams(**pkw)
    for msg in validate(params).violations:
        problems.append(f"{_key_for(msg)}: requires {msg}")
    trunc = Truncation(**tkw)
    if params.dim in (2, 3):
        for msg in validate_truncation(trunc, params.dim).violations:
            problems.append(f"{_key_for(msg)}: requires {msg}")
    try:
        integ = IntegratorConfig(**ikw)
    except ValueError as exc:
        problems.append(f"integrator: {exc}")
        integ = IntegratorConfig()
    if problems:
        raise ConfigError(problems)
    return RunConfig(params, trunc, integ, t_final, raw.get("output_dir"), raw)


def parse_config(path: str | os.PathLike) -> RunConfig:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror or exc}"]) from exc
    return parse_config_text(text, str(path))


def _finite(value: str) -> float:
    x = float(value)
    if not math.isfinite(x):
        raise ValueError(value)
    return x


def _key_for(msg: str) -> str:
    for prefix, key in _VIOLATION_KEYS.items():
        if msg.startswith(prefix):
            return key
    return "params"


# -- atomic, exclusive writes ----------------------------------------------------------------


def write_exclusive(path: str | os.PathLike, data: bytes, finalize: bool = True) -> Path:
    """Write ``data`` to ``path.partial`` and rename it into place.

    Refuses to overwrite an existing target. With ``finalize`` false the file
    is left under its ``.partial`` name (used for aborted runs).
    """
    path = Path(path)
    partial = path.with_name(path.name + ".partial")
    if path.exists():
        raise FileExistsError(f"{path} already exists")
    with open(partial, "xb") as fh:
        fh.write(data)
    if not finalize:
        return partial
    os.rename(partial, path)
    return path


# -- snapshots -------------------------------------------------------------------------------

MAGIC = b"RGLF"
VERSION = 1
_HEADER = struct.Struct("<4sII4I6ddQ")


class SnapshotError(ValueError):
    pass


def encode_snapshot(state: SimState) -> bytes:
    b = state.coeffs.basis
    p = state.params
    t = b.truncation
    head = _HEADER.pack(MAGIC, VERSION, p.dim, t.max_level, t.n_radial_quad, t.n_angular_quad,
                        t.n_axial_quad, p.omega, p.Omega, p.theta_d, p.lam, p.sigma, p.mu,
                        state.t, b.n_modes)
    body = head + np.ascontiguousarray(state.coeffs.values, dtype="<c16").tobytes()
    return body + struct.pack("<I", zlib.crc32(body))


@dataclass
class SnapshotData:
    params: ModelParams
    truncation: Truncation
    t: float
    values: np.ndarray

    def to_state(self, basis: SpectralBasis | None = None) -> SimState:
        if basis is None:
            basis = build_basis(self.params, self.truncation)
        if basis.n_modes != self.values.size:
            raise SnapshotError(f"snapshot has {self.values.size} modes, basis has {basis.n_modes}")
        return SimState(self.t, SpectralCoeffs(basis, self.values.copy()), self.params)


def decode_snapshot(data: bytes) -> SnapshotData:
    if len(data) < _HEADER.size + 4:
        raise SnapshotError("file too short for a snapshot header (checksum error)")
    body, (crc,) = data[:-4], struct.unpack("<I", data[-4:])
    if data[:4] != MAGIC:
        raise SnapshotError("bad magic, not an RGLF snapshot")
    version = struct.unpack_from("<I", data, 4)[0]
    if version != VERSION:
        raise SnapshotError(f"unsupported snapshot version {version} (expected {VERSION})")
    if zlib.crc32(body) != crc:
        raise SnapshotError("checksum mismatch: file is truncated or corrupted")
    (_, _, dim, k, nr, na, nz, w, W, th, lam, s, mu, t, n) = _HEADER.unpack_from(data)
    payload = body[_HEADER.size:]
    if len(payload) != 16 * n:
        raise SnapshotError(f"expected {n} coefficients, found {len(payload) / 16:g}")
    values = np.frombuffer(payload, dtype="<c16").astype(complex)
    return SnapshotData(ModelParams(w, W, th, lam, s, mu, dim), Truncation(k, nr, na, nz), t, values)


def write_snapshot(path: str | os.PathLike, state: SimState, finalize: bool = True) -> Path:
    return write_exclusive(path, encode_snapshot(state), finalize)


def read_snapshot(path: str | os.PathLike, basis: SpectralBasis | None = None) -> SimState:
    return decode_snapshot(Path(path).read_bytes()).to_state(basis)


# -- time series -----------------------------------------------------------------------------

COLUMNS = ("t", "mass", "E_kin", "E_pot", "E_nl", "E_rot", "E_total", "F", "Lz")


def timeseries_text(series: DiagnosticsSeries) -> str:
    lines = [",".join(COLUMNS)]
    for k, t in enumerate(series.times):
        e = series.energies[k]
        row = (t, series.mass[k], e.kinetic, e.potential, e.nonlinear, e.rotational, e.total,
               series.free_energy[k], series.angular_momentum[k])
        lines.append(",".join(f"{v:.17g}" for v in row))
    return "\n".join(lines) + "\n"


def write_timeseries(series: DiagnosticsSeries, path: str | os.PathLike, finalize: bool = True) -> Path:
    return write_exclusive(path, timeseries_text(series).encode("ascii"), finalize)


def read_timeseries(path: str | os.PathLike) -> dict[str, np.ndarray]:
    with open(path, newline="", encoding="ascii") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COLUMNS:
            raise ValueError(f"{path}: expected header {','.join(COLUMNS)}")
        rows = [[float(v) for v in row] for row in reader if row]
    arr = np.array(rows, dtype=float).reshape(-1, len(COLUMNS))
    return {name: arr[:, i] for i, name in enumerate(COLUMNS)}


# -- manifest --------------------------------------------------------------------------------


def tool_version() -> str:
    try:
        from importlib.metadata import version

        return version("artifact")
    except Exception:  # not installed as a distribution
        from rgl import __version__

        return __version__


def write_manifest(out_dir: str | os.PathLike, command: str, config: dict, files: list[str],
                   wall_clock: float, status: str = "ok") -> Path:
    doc = {
        "command": command,
        "status": status,
        "tool_version": tool_version(),
        "wall_clock_seconds": wall_clock,
        "config": config,
        "outputs": sorted(files),
    }
    return write_exclusive(Path(out_dir) / "manifest.json",
                           (json.dumps(doc, indent=2, sort_keys=True) + "\n").encode())
