"""TOML run configuration with dotted command-line overrides."""

from __future__ import annotations

import re
import sys
from dataclasses import dataclass
from pathlib import Path

import tomli_w

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .ensemble import EnsembleSpec, check_levels
from .errors import BadDecay, NegativeAmplitude, NonNestedMeshes, ParseError, ValidationError
from .mesh import Mesh
from .noise import build_noise
from .physics import EosParams
from .problems import SineWave
from .scheme import SchemeConfig

# (type, default); None defaults are filled from other fields after merging
SCHEMA: dict[str, dict[str, tuple]] = {
    "mesh": {"dim": (int, 1), "cells": (int, 64), "edge_length": (float, 1.0)},
    "physics": {"gamma": (float, 1.4), "a": (float, 1.0)},
    "noise": {
        "k_modes": (int, 8),
        "beta0": (float, 0.1),
        "q": (float, 2.0),
        "spatial": (str, "cos"),
        "A": (list, []),
        "B": (list, []),
    },
    "scheme": {
        "lambda_mode": (str, "global"),
        "lambda_multiplier": (float, 1.0),
        "cfl": (float, 0.4),
        "noise_dt_cap": (float, 1e-2),
        "t_end": (float, 1.0),
        "positivity_policy": (str, "abort"),
        "rho_floor": (float, 1e-12),
    },
    "outputs": {"directory": (str, "sefv_out"), "n_outputs": (int, 10), "probes": (list, [])},
    "ensemble": {
        "n_paths": (int, 1),
        "seed": (int, 0),
        "levels": (list, None),
        "workers": (int, 0),
        "reference": (str, "manufactured"),
    },
    "initial": {
        "rho_mean": (float, 1.0),
        "amplitude": (float, 0.1),
        "wavenumber": (int, 1),
        "velocity": (list, None),
    },
}


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved configuration; ``sections[name][key]`` holds every field."""

    sections: dict

    def __getitem__(self, name: str) -> dict:
        return self.sections[name]

    def to_toml(self) -> str:
        return tomli_w.dumps(self.sections)

    def echo(self, directory) -> Path:
        path = Path(directory) / "config.toml"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_toml())
        return path

    @property
    def eos(self) -> EosParams:
        return EosParams(self["physics"]["gamma"], self["physics"]["a"])

    @property
    def mesh(self) -> Mesh:
        m = self["mesh"]
        return Mesh(m["dim"], m["cells"], m["edge_length"])

    @property
    def scheme(self) -> SchemeConfig:
        return SchemeConfig(**self["scheme"])

    @property
    def noise(self):
        n = self["noise"]
        coeffs = {"A": n["A"], "B": n["B"]} if n["A"] else "default"
        return build_noise(n["k_modes"], n["beta0"], n["q"], coeffs, self["mesh"]["dim"], n["spatial"], self["mesh"]["edge_length"])

    @property
    def problem(self) -> SineWave:
        i = self["initial"]
        m = self["mesh"]
        return SineWave(m["dim"], i["rho_mean"], i["amplitude"], i["wavenumber"], tuple(i["velocity"]), m["edge_length"])

    @property
    def seed(self) -> int:
        return self["ensemble"]["seed"]

    def ensemble_spec(self, with_output_dir: bool = False) -> EnsembleSpec:
        e = self["ensemble"]
        m = self["mesh"]
        probes = tuple((float(p[0]), tuple(int(c) for c in p[1:])) for p in self["outputs"]["probes"])
        return EnsembleSpec(
            n_paths=e["n_paths"],
            master_seed=e["seed"],
            levels=tuple(e["levels"]),
            dim=m["dim"],
            edge_length=m["edge_length"],
            eos=self.eos,
            noise=self.noise,
            scheme=self.scheme,
            problem=self.problem,
            n_outputs=self["outputs"]["n_outputs"],
            probes=probes,
            output_dir=self["outputs"]["directory"] if with_output_dir else None,
            workers=e["workers"] or None,
        )


def _coerce(field: str, kind: type, value):
    if kind is float and isinstance(value, int) and not isinstance(value, bool):
        return float(value)
    if kind is int and isinstance(value, bool) or not isinstance(value, kind):
        raise ValidationError(field, f"expected {kind.__name__}, got {type(value).__name__}")
    return value


def _merge(raw: dict, into: dict) -> None:
    for section, body in raw.items():
        if section not in SCHEMA:
            raise ValidationError(section, "unknown section")
        if not isinstance(body, dict):
            raise ValidationError(section, "expected a table")
        for key, value in body.items():
            field = f"{section}.{key}"
            if key not in SCHEMA[section]:
                raise ValidationError(field, "unknown key")
            into[section][key] = _coerce(field, SCHEMA[section][key][0], value)


def _require(ok: bool, field: str, reason: str) -> None:
    if not ok:
        raise ValidationError(field, reason)


def _validate(s: dict) -> None:
    m, ph, n, sc, out, ens, ini = (s[k] for k in ("mesh", "physics", "noise", "scheme", "outputs", "ensemble", "initial"))
    _require(m["dim"] in (1, 2, 3), "mesh.dim", "must be 1, 2 or 3")
    _require(m["cells"] >= 2, "mesh.cells", "must be at least 2")
    _require(m["edge_length"] > 0, "mesh.edge_length", "must be positive")
    _require(ph["gamma"] > 1, "physics.gamma", "must exceed 1")
    _require(ph["a"] > 0, "physics.a", "must be positive")
    _require(n["k_modes"] >= 0, "noise.k_modes", "must be non-negative")
    if n["A"] or n["B"]:
        _require(len(n["A"]) == n["k_modes"] and len(n["B"]) == n["k_modes"], "noise.A", "A and B need one entry per mode")
    try:
        s_obj = RunConfig(s)
        s_obj.noise
    except (BadDecay, NegativeAmplitude) as exc:
        raise ValidationError("noise.beta0" if isinstance(exc, NegativeAmplitude) else "noise.q", str(exc)) from exc
    except ValueError as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError("noise", str(exc)) from exc
    SchemeConfig(**sc)
    _require(out["n_outputs"] >= 1, "outputs.n_outputs", "must be at least 1")
    for p in out["probes"]:
        ok = isinstance(p, list) and len(p) == 1 + m["dim"] and all(0 <= int(c) < m["cells"] for c in p[1:])
        _require(ok, "outputs.probes", f"each probe is [t, cell index x {m['dim']}] inside the mesh")
    _require(ens["n_paths"] >= 1, "ensemble.n_paths", "must be at least 1")
    _require(0 <= ens["seed"] < 2**64, "ensemble.seed", "must fit in 64 unsigned bits")
    _require(ens["workers"] >= 0, "ensemble.workers", "must be non-negative")
    _require(all(isinstance(v, int) for v in ens["levels"]), "ensemble.levels", "must be integers")
    try:
        check_levels(ens["levels"])
    except NonNestedMeshes as exc:
        raise ValidationError("ensemble.levels", str(exc)) from exc
    _require(ens["reference"] in ("manufactured", "finest") or bool(ens["reference"]), "ensemble.reference", "must be manufactured, finest or a file path")
    _require(len(ini["velocity"]) == m["dim"], "initial.velocity", f"needs {m['dim']} components")
    _require(ini["rho_mean"] > abs(ini["amplitude"]), "initial.rho_mean", "must exceed |amplitude|")
    _require(ini["wavenumber"] >= 1, "initial.wavenumber", "must be at least 1")


def _parse_value(text: str):
    try:
        return tomllib.loads(f"v = {text}")["v"]
    except tomllib.TOMLDecodeError:
        return text


OVERRIDE = re.compile(r"^--([a-z_]+)\.([A-Za-z_0-9]+)=(.*)$")


def parse_overrides(args) -> dict:
    """``["--scheme.cfl=0.3", ...]`` to a nested dict; values are read as TOML."""
    out: dict = {}
    for arg in args:
        hit = OVERRIDE.match(arg)
        if not hit:
            raise ParseError(f"override {arg!r} is not of the form --section.key=value")
        section, key, value = hit.groups()
        out.setdefault(section, {})[key] = _parse_value(value)
    return out


def parse_config(path=None, overrides=None, text: str | None = None) -> RunConfig:
    """Defaults, then the TOML file (or ``text``), then ``overrides``."""
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ParseError(f"cannot read config {path}: {exc}") from exc
    raw = {}
    if text:
        try:
            raw = tomllib.loads(text)
        except tomllib.TOMLDecodeError as exc:
            hit = re.search(r"line (\d+)", str(exc))
            raise ParseError(str(exc), int(hit.group(1)) if hit else getattr(exc, "lineno", None)) from exc
    sections = {sec: {k: (list(v[1]) if isinstance(v[1], list) else v[1]) for k, v in body.items()} for sec, body in SCHEMA.items()}
    _merge(raw, sections)
    if isinstance(overrides, dict):
        _merge(overrides, sections)
    elif overrides:
        _merge(parse_overrides(overrides), sections)
    if sections["ensemble"]["levels"] is None:
        sections["ensemble"]["levels"] = [sections["mesh"]["cells"]]
    if sections["initial"]["velocity"] is None:
        sections["initial"]["velocity"] = [0.5] + [0.0] * (sections["mesh"]["dim"] - 1)
    _validate(sections)
    return RunConfig(sections)
