"""Run configuration, binary field files, CSV tables and run manifests."""
from __future__ import annotations

import csv
import io as _io
import json
import os
import platform
import struct
import tempfile
from dataclasses import dataclass
from pathlib import Path
from typing import Annotated, Any, Literal, Optional, Union

import numpy as np
import scipy
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from . import __version__
from . import exterior as ext
from .errors import ConfigError, FieldFileError

# ---------------------------------------------------------------------------
# configuration


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)


class NonlinearityConfig(_Strict):
    name: Optional[Literal["lamb", "ps", "zero"]] = None
    b: Optional[float] = None
    tensor_file: Optional[str] = None


class ZeroData(_Strict):
    kind: Literal["zero"]


class GaussianData(_Strict):
    kind: Literal["gaussian"]
    sigma: float
    amplitude: float
    component: int = 0


class TaylorGreenData(_Strict):
    kind: Literal["taylor_green"]


class ColeHopfData(_Strict):
    kind: Literal["burgers_cole_hopf"]
    c: float = 0.8


class RadialData(_Strict):
    kind: Literal["radial"]
    profile: Literal["power", "gaussian"]
    amplitude: float


class SolenoidalData(_Strict):
    kind: Literal["random_solenoidal"]
    seed: int
    amplitude: float
    envelope: Optional[float] = None


class FileData(_Strict):
    kind: Literal["file"]
    path: str
    slice: int = 0


InitialData = Annotated[Union[ZeroData, GaussianData, TaylorGreenData, ColeHopfData, RadialData,
                              SolenoidalData, FileData], Field(discriminator="kind")]
ForcingData = Annotated[Union[ZeroData, FileData], Field(discriminator="kind")]


class DataConfig(_Strict):
    u0: InitialData
    f: Optional[ForcingData] = None


class ProblemConfig(_Strict):
    n: int = Field(ge=2, le=ext.MAX_DIM)
    q: int = Field(ge=0)
    a: Literal[0, 1]
    mu: float = Field(gt=0)
    T: float = Field(gt=0)
    nt: int = Field(ge=2)
    nonlinearity: Optional[NonlinearityConfig] = None
    data: Optional[DataConfig] = None


class GridConfig(_Strict):
    N: int = Field(ge=4)
    L: float = Field(gt=0)
    periodic: bool = False


class NormsConfig(_Strict):
    s: int = Field(ge=0)
    k: Optional[int] = Field(default=None, ge=0)
    lam: float = Field(alias="lambda", gt=0, le=1)
    lam_prime: Optional[float] = Field(default=None, alias="lambda_prime")
    delta: float = Field(ge=0)


class SolverConfig(_Strict):
    tol: float = 1e-10
    max_iter: int = 200
    theta: float = 1.0
    blowup_threshold: float = 1e6
    metric: Literal["proxy", "sup"] = "proxy"


class RadialProfileConfig(_Strict):
    kind: Literal["power", "gaussian"]
    amplitudes: list[float]
    width: Optional[float] = None


class RadialConfig(_Strict):
    nr: Optional[int] = Field(default=None, ge=16)
    R: Optional[float] = Field(default=None, gt=0)
    dt: Optional[float] = Field(default=None, gt=0)
    gamma: Optional[float] = Field(default=None, ge=0)
    kappa: Optional[float] = Field(default=None, gt=0)
    y_max: Optional[float] = Field(default=None, gt=0)
    coeff_2kw: bool = True
    profile: Optional[RadialProfileConfig] = None
    snapshot_every: Optional[float] = None


class OutputConfig(_Strict):
    dir: str = "out"
    snapshot_stride: int = Field(default=1, ge=1)


class RunConfig(_Strict):
    problem: ProblemConfig
    grid: Optional[GridConfig] = None
    norms: Optional[NormsConfig] = None
    solver: SolverConfig = Field(default_factory=SolverConfig)
    radial: Optional[RadialConfig] = None
    output: OutputConfig = Field(default_factory=OutputConfig)

    def to_json(self) -> str:
        return json.dumps(self.model_dump(by_alias=True, exclude_none=True), indent=2)


def _field_path(loc) -> str:
    return ".".join(str(p) for p in loc if not (isinstance(p, str) and p in {
        "ZeroData", "GaussianData", "TaylorGreenData", "ColeHopfData", "RadialData",
        "SolenoidalData", "FileData"}))


def _locate(text: str, loc) -> str:
    """Best-effort 'line N' for the last key of a pydantic error location."""
    keys = [p for p in loc if isinstance(p, str)]
    if not keys:
        return ""
    needle = f'"{keys[-1]}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return f"line {i}: "
    return ""


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{source}:{exc.lineno}:{exc.colno}: invalid JSON: {exc.msg}") from None
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        msgs = [f"{source}: {_locate(text, e['loc'])}field {_field_path(e['loc'])}: {e['msg']}"
                for e in exc.errors()]
        raise ConfigError("\n".join(msgs)) from None


def load_config(path: str | os.PathLike) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror}") from None
    return parse_config(text, str(p))


# ---------------------------------------------------------------------------
# atomic writes

def atomic_write_bytes(path: str | os.PathLike, payload: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(payload)
        mask = os.umask(0)
        os.umask(mask)
        os.chmod(tmp, 0o666 & ~mask)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    atomic_write_bytes(path, text.encode("utf-8"))


# ---------------------------------------------------------------------------
# binary field files

MAGIC = b"DRNS"
VERSION = 1
HEADER = struct.Struct("<4sIIIIIdd")


@dataclass(frozen=True, eq=False)
class FieldFile:
    """nt slices of a q-form; ``data`` has the in-memory layout (nt, m, N, ..., N)."""

    n: int
    q: int
    N: int
    L: float
    T: float
    data: np.ndarray

    @property
    def nt(self) -> int:
        return self.data.shape[0]

    def payload(self) -> bytes:
        n = self.n
        # on disk x_1 varies fastest: reverse the spatial axes and write C order
        order = (0, 1) + tuple(range(n + 1, 1, -1))
        arr = np.ascontiguousarray(np.transpose(self.data, order), dtype="<f8")
        return HEADER.pack(MAGIC, VERSION, n, self.q, self.N, self.nt, float(self.L), float(self.T)) + arr.tobytes()

    def write(self, path: str | os.PathLike) -> None:
        atomic_write_bytes(path, self.payload())

    @classmethod
    def from_bytes(cls, raw: bytes) -> "FieldFile":
        if len(raw) < HEADER.size:
            raise FieldFileError("file shorter than the header")
        magic, version, n, q, N, nt, L, T = HEADER.unpack_from(raw)
        if magic != MAGIC:
            raise FieldFileError(f"bad magic {magic!r}")
        if version != VERSION:
            raise FieldFileError(f"unsupported format version {version}")
        if not 2 <= n <= ext.MAX_DIM or not 0 <= q <= n:
            raise FieldFileError(f"invalid (n, q) = ({n}, {q})")
        m = ext.n_components(n, q)
        count = nt * m * N ** n
        if len(raw) != HEADER.size + 8 * count:
            raise FieldFileError(f"payload has {len(raw) - HEADER.size} bytes, expected {8 * count}")
        arr = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).reshape((nt, m) + (N,) * n)
        order = (0, 1) + tuple(range(n + 1, 1, -1))
        data = np.ascontiguousarray(np.transpose(arr, order)).astype(np.float64)
        return cls(n, q, N, L, T, data)

    @classmethod
    def read(cls, path: str | os.PathLike) -> "FieldFile":
        try:
            raw = Path(path).read_bytes()
        except OSError as exc:
            raise FieldFileError(f"cannot read {path}: {exc.strerror}") from None
        return cls.from_bytes(raw)


# ---------------------------------------------------------------------------
# CSV and manifests

def fmt(x: Any) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def write_csv(path: str | os.PathLike, header: list[str], rows) -> None:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([fmt(v) for v in row])
    atomic_write_text(path, buf.getvalue())


def read_csv(path: str | os.PathLike) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def versions() -> dict[str, str]:
    import pydantic

    return {"derham_ns": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "pydantic": pydantic.__version__, "python": platform.python_version()}


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else str(float(x))
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def write_manifest(path: str | os.PathLike, config: RunConfig, command: str, status: str,
                   timings: dict[str, float], extra: dict | None = None) -> None:
    doc = {"command": command, "status": status,
           "config": json.loads(config.to_json()), "versions": versions(),
           "timings": timings, "threads": os.environ.get("DERHAM_NS_THREADS")}
    if extra:
        doc.update(extra)
    atomic_write_text(path, json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
