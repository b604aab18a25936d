"""TOML run configuration and the reproducibility manifest.

A run config has sections [chain], [schedule], [disorder], [protocol],
[output]; every command reads the sections it needs. A manifest JSON echoes
the fully resolved config plus seeds and derived constants, so re-running
from the manifest reproduces the data files byte-identically.
"""

from __future__ import annotations

import datetime
import json
import os
import sys
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError
from .lattice import ChainSpec

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

OUTPUT_DIR_ENV = "MATRYOSHKA_OUTDIR"

_SECTIONS = ("chain", "schedule", "disorder", "protocol", "output")


def load_config(path) -> dict:
    """Read a TOML config, or recover the embedded config from a manifest."""
    text = open(path, "rb").read()
    if text.lstrip()[:1] == b"{":
        manifest = json.loads(text)
        if "config" not in manifest:
            raise ConfigurationError(f"{path}: JSON file is not a run manifest")
        return manifest["config"]
    try:
        cfg = _toml.loads(text.decode())
    except _toml.TOMLDecodeError as exc:
        raise ConfigurationError(f"{path}: {exc}") from exc
    unknown = set(cfg) - set(_SECTIONS)
    if unknown:
        raise ConfigurationError(f"{path}: unknown sections {sorted(unknown)}")
    return cfg


def apply_overrides(cfg: dict, pairs) -> dict:
    """Apply `section.key=value` overrides (scalars only)."""
    out = json.loads(json.dumps(cfg))  # deep copy
    for pair in pairs or ():
        if "=" not in pair or "." not in pair.split("=", 1)[0]:
            raise ConfigurationError(f"override {pair!r} is not section.key=value")
        key, raw = pair.split("=", 1)
        section, name = key.split(".", 1)
        if section not in _SECTIONS:
            raise ConfigurationError(f"override targets unknown section {section!r}")
        for caster in (int, float):
            try:
                value = caster(raw)
                break
            except ValueError:
                continue
        else:
            value = {"true": True, "false": False}.get(raw.lower(), raw)
        out.setdefault(section, {})[name] = value
    return out


def chain_spec_from(cfg: dict) -> ChainSpec:
    c = cfg.get("chain")
    if not c:
        raise ConfigurationError("config needs a [chain] section")
    try:
        return ChainSpec(
            order=int(c.get("order", 0)),
            angles=tuple(float(a) for a in c["angles"]),
            cells=int(c.get("cells", 1)),
            scale=float(c.get("scale", 1.0)),
            boundary=str(c.get("boundary", "open")),
            total_sites=int(c["total_sites"]) if "total_sites" in c else None,
            mirror=bool(c.get("mirror", False)),
        )
    except KeyError as exc:
        raise ConfigurationError(f"[chain] is missing {exc}") from exc


def output_dir(cfg: dict, cli_value=None) -> str:
    d = (cli_value or cfg.get("output", {}).get("directory")
         or os.environ.get(OUTPUT_DIR_ENV) or ".")
    os.makedirs(d, exist_ok=True)
    return d


def output_prefix(cfg: dict) -> str:
    return cfg.get("output", {}).get("prefix", "run")


def _jsonable(x):
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    if isinstance(x, np.ndarray):
        return x.tolist()
    if isinstance(x, complex):
        return {"re": x.real, "im": x.imag}
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    return x


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    derived: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    started: str = ""
    finished: str = ""

    def start(self):
        self.started = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return self

    def finish(self):
        self.finished = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return self

    def write(self, path):
        from . import __version__
        from ._backend import BACKEND

        doc = {
            "command": self.command,
            "config": self.config,
            "seed": self.seed,
            "derived": _jsonable(self.derived),
            "outputs": self.outputs,
            "started": self.started,
            "finished": self.finished,
            "version": __version__,
            "backend": BACKEND,
        }
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=1, sort_keys=True)
            fh.write("\n")
        return path
