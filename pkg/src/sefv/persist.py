"""On-disk format for snapshots, ledgers and run manifests.

Field file (``.sefv``), little-endian::

    magic  b"SEFV"
    u32    format version
    i64    dim
    i64    cells per axis
    f64    gamma
    f64    a
    f64    t
    f64[]  rho, then m_1 .. m_d, each n^d values in row-major cell order

A run directory holds one sub-directory per trajectory (snapshots plus
``ledger.csv``) and ``manifest.txt`` with ``key = value`` lines, including a
SHA-256 checksum for every file.
"""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import ChecksumMismatch, IoFailure, VersionMismatch
from .ledger import EnergyLedger
from .mesh import Mesh
from .physics import EosParams, State
from .scheme import Trajectory

MAGIC = b"SEFV"
FORMAT_VERSION = 1
HEADER = struct.Struct("<4sIqqddd")
MANIFEST_NAME = "manifest.txt"
VOLATILE_KEYS = ("created",)


def write_field_file(path, state: State, mesh: Mesh, eos: EosParams, t: float) -> None:
    header = HEADER.pack(MAGIC, FORMAT_VERSION, mesh.dim, mesh.cells_per_axis, eos.gamma, eos.a, float(t))
    body = np.ascontiguousarray(state.stacked(), dtype="<f8").tobytes(order="C")
    try:
        Path(path).write_bytes(header + body)
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def read_field_file(path, edge_length: float = 1.0):
    """Return ``(state, mesh, eos, t)``. The domain size is not stored in the file."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    if len(raw) < HEADER.size:
        raise IoFailure(f"{path}: truncated header")
    magic, version, dim, n, gamma, a, t = HEADER.unpack_from(raw)
    if magic != MAGIC:
        raise IoFailure(f"{path}: bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise VersionMismatch(f"{path}: format version {version}, expected {FORMAT_VERSION}")
    mesh = Mesh(dim, n, edge_length)
    count = (dim + 1) * mesh.n_cells
    if len(raw) != HEADER.size + 8 * count:
        raise IoFailure(f"{path}: expected {count} values")
    u = np.frombuffer(raw, dtype="<f8", offset=HEADER.size).astype(float).reshape((dim + 1,) + mesh.shape)
    return State.from_stacked(u), mesh, EosParams(gamma, a), t


@dataclass
class RunResult:
    trajectories: dict
    meta: dict = field(default_factory=dict)


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def persist(result, directory) -> Path:
    """Write ``result`` (a RunResult, a Trajectory, or a dict of them) and return the manifest path."""
    if isinstance(result, Trajectory):
        result = RunResult({"run": result})
    elif isinstance(result, dict):
        result = RunResult(result)
    root = Path(directory)
    try:
        root.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise IoFailure(f"cannot create {root}: {exc}") from exc
    lines = [
        ("format_version", str(FORMAT_VERSION)),
        ("created", datetime.now(timezone.utc).isoformat(timespec="seconds")),
    ]
    lines += [(f"meta.{k}", str(v)) for k, v in sorted(result.meta.items())]
    files = []
    for label, traj in result.trajectories.items():
        sub = root / label
        sub.mkdir(parents=True, exist_ok=True)
        prefix = f"trajectory.{label}"
        lines += [
            (f"{prefix}.dim", str(traj.mesh.dim)),
            (f"{prefix}.cells_per_axis", str(traj.mesh.cells_per_axis)),
            (f"{prefix}.edge_length", repr(traj.mesh.edge_length)),
            (f"{prefix}.gamma", repr(traj.eos.gamma)),
            (f"{prefix}.a", repr(traj.eos.a)),
            (f"{prefix}.status", traj.status),
            (f"{prefix}.abort_reason", traj.abort_reason),
            (f"{prefix}.abort_time", repr(float(traj.abort_time))),
            (f"{prefix}.n_snapshots", str(len(traj.states))),
        ]
        lines += [(f"{prefix}.info.{k}", repr(v)) for k, v in sorted(traj.info.items())]
        for i, (t, s) in enumerate(zip(traj.times, traj.states)):
            path = sub / f"snap_{i:05d}.sefv"
            write_field_file(path, s, traj.mesh, traj.eos, t)
            files.append(path)
        path = sub / "ledger.csv"
        try:
            path.write_text(traj.ledger.to_csv())
        except OSError as exc:
            raise IoFailure(f"cannot write {path}: {exc}") from exc
        files.append(path)
    lines += [(f"file.{p.relative_to(root).as_posix()}", _sha256(p)) for p in files]
    manifest = root / MANIFEST_NAME
    manifest.write_text("".join(f"{k} = {v}\n" for k, v in lines))
    return manifest


def read_manifest(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc
    out = {}
    for n, line in enumerate(text.splitlines(), 1):
        if not line.strip():
            continue
        key, sep, value = line.partition(" = ")
        if not sep:
            raise IoFailure(f"{path}:{n}: malformed manifest line")
        out[key] = value
    return out


def _number(text: str):
    try:
        return int(text)
    except ValueError:
        return float(text)


def load(manifest_path) -> RunResult:
    manifest_path = Path(manifest_path)
    if manifest_path.is_dir():
        manifest_path = manifest_path / MANIFEST_NAME
    root = manifest_path.parent
    kv = read_manifest(manifest_path)
    version = kv.get("format_version")
    if version != str(FORMAT_VERSION):
        raise VersionMismatch(f"manifest format version {version}, expected {FORMAT_VERSION}")
    for key, digest in kv.items():
        if key.startswith("file."):
            path = root / key[len("file.") :]
            if not path.exists():
                raise IoFailure(f"missing file {path}")
            if _sha256(path) != digest:
                raise ChecksumMismatch(f"checksum mismatch for {path}")
    labels = sorted({k.split(".")[1] for k in kv if k.startswith("trajectory.")})
    trajectories = {}
    for label in labels:
        p = f"trajectory.{label}"
        mesh = Mesh(int(kv[f"{p}.dim"]), int(kv[f"{p}.cells_per_axis"]), float(kv[f"{p}.edge_length"]))
        eos = EosParams(float(kv[f"{p}.gamma"]), float(kv[f"{p}.a"]))
        times, states = [], []
        for i in range(int(kv[f"{p}.n_snapshots"])):
            state, _, _, t = read_field_file(root / label / f"snap_{i:05d}.sefv", mesh.edge_length)
            times.append(t)
            states.append(state)
        ledger = EnergyLedger.from_csv((root / label / "ledger.csv").read_text())
        info = {k[len(p) + 6 :]: _number(v) for k, v in kv.items() if k.startswith(f"{p}.info.")}
        trajectories[label] = Trajectory(
            mesh,
            eos,
            times,
            states,
            ledger,
            status=kv[f"{p}.status"],
            abort_reason=kv[f"{p}.abort_reason"],
            abort_time=float(kv[f"{p}.abort_time"]),
            info=info,
        )
    meta = {k[5:]: v for k, v in kv.items() if k.startswith("meta.")}
    return RunResult(trajectories, meta)
