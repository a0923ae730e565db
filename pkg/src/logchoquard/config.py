"""Run-file parsing and the aggregated run configuration.

Runs are described by an INI-style structured text file with sections
[weights], [nonlinearity], [grid], [solver], [schedule], [verify], and
[output].  Every key has a default, so an empty file is a valid run
description; command-line overrides are applied as ``section.key=value``
pairs.  Reports embed a hash of the fully resolved configuration so results
are self-describing.
"""

from __future__ import annotations

import configparser
import hashlib
import json
from dataclasses import dataclass

from .errors import DomainError
from .grids import RadialGrid
from .nonlinearity import NonlinearityConfig
from .solver import ContinuationSchedule, SolverParams
from .weights import WeightConfig

__all__ = ["RunConfig", "ConfigError", "default_config_text"]


class ConfigError(DomainError):
    """Malformed run file or override (usage error, exit code 2)."""


_DEFAULTS = {
    "weights": {
        "N": "2", "A0": "1.0", "ell": "2.0", "L": "2.0", "r0": "1.0",
        "CQ": "1.0", "b0": "0.0", "b": "-1.0", "mu0": "0.5",
    },
    "nonlinearity": {
        "q": "3.0", "alpha0": "1.0", "theta": "1.0", "lambda": "",
    },
    "grid": {
        "points": "801", "r_max": "50.0", "r_min_factor": "1e-6",
    },
    "solver": {
        "path_points": "33", "max_sweeps": "5000", "refine_max_iter": "20000",
        "tol_factor": "1e-6", "log_tol_factor": "1e-5", "seed": "20260811",
        "quad_order": "129",
    },
    "schedule": {
        "mu_start": "0.5", "ratio": "0.5", "mu_min": "1e-4",
    },
    "verify": {
        "points": "301", "r_max": "30.0", "n_list": "", "hls_samples": "200",
        "hls_margin_scale": "1.0",
    },
    "output": {
        "directory": "runs/out",
    },
}


def default_config_text() -> str:
    lines = []
    for section, keys in _DEFAULTS.items():
        lines.append(f"[{section}]")
        for k, v in keys.items():
            lines.append(f"{k} = {v}")
        lines.append("")
    return "\n".join(lines)


@dataclass(frozen=True)
class RunConfig:
    """Fully resolved run description."""

    weights: WeightConfig
    nonlinearity: NonlinearityConfig
    grid_points: int
    grid_r_max: float
    grid_r_min_factor: float
    solver: SolverParams
    quad_order: int
    schedule: ContinuationSchedule
    verify_points: int
    verify_r_max: float
    verify_n_list: tuple[float, ...]
    hls_samples: int
    hls_margin_scale: float
    output_dir: str
    resolved: dict

    @classmethod
    def from_file(cls, path: str, overrides: list[str] | None = None) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            with open(path) as fh:
                parser.read_string(fh.read(), source=path)
        except OSError as exc:
            raise ConfigError(f"cannot read config file {path!r}: {exc}") from exc
        except configparser.Error as exc:
            raise ConfigError(f"parse error in {path!r}: {exc}") from exc
        return cls._from_parser(parser, overrides or [])

    @classmethod
    def from_string(cls, text: str, overrides: list[str] | None = None) -> "RunConfig":
        parser = configparser.ConfigParser()
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"parse error: {exc}") from exc
        return cls._from_parser(parser, overrides or [])

    @classmethod
    def _from_parser(cls, parser: configparser.ConfigParser,
                     overrides: list[str]) -> "RunConfig":
        values = {s: dict(kv) for s, kv in _DEFAULTS.items()}
        for section in parser.sections():
            if section not in values:
                raise ConfigError(f"unknown section [{section}]")
            for key, val in parser.items(section):
                if key not in values[section]:
                    raise ConfigError(f"unknown key {key!r} in section [{section}]")
                values[section][key] = val
        for ov in overrides:
            if "=" not in ov or "." not in ov.split("=", 1)[0]:
                raise ConfigError(f"override must look like section.key=value, got {ov!r}")
            loc, val = ov.split("=", 1)
            section, key = loc.split(".", 1)
            if section not in values or key not in values[section]:
                raise ConfigError(f"unknown override target {loc!r}")
            values[section][key] = val

        def fget(section, key):
            raw = values[section][key]
            try:
                return float(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r} is not a number") from exc

        def iget(section, key):
            raw = values[section][key]
            try:
                return int(raw)
            except ValueError as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r} is not an integer") from exc

        wcfg = WeightConfig(
            N=iget("weights", "N"), A0=fget("weights", "A0"),
            ell=fget("weights", "ell"), L=fget("weights", "L"),
            r0=fget("weights", "r0"), CQ=fget("weights", "CQ"),
            b0=fget("weights", "b0"), b=fget("weights", "b"),
            mu0=fget("weights", "mu0"))
        lam_raw = values["nonlinearity"]["lambda"].strip()
        ncfg = NonlinearityConfig(
            N=wcfg.N, q=fget("nonlinearity", "q"),
            alpha0=fget("nonlinearity", "alpha0"),
            theta=fget("nonlinearity", "theta"),
            lam=float(lam_raw) if lam_raw else None)
        solver = SolverParams(
            path_points=iget("solver", "path_points"),
            max_sweeps=iget("solver", "max_sweeps"),
            refine_max_iter=iget("solver", "refine_max_iter"),
            tol_factor=fget("solver", "tol_factor"),
            log_tol_factor=fget("solver", "log_tol_factor"),
            seed=iget("solver", "seed"))
        schedule = ContinuationSchedule.geometric(
            mu_start=fget("schedule", "mu_start"),
            ratio=fget("schedule", "ratio"),
            mu_min=fget("schedule", "mu_min"))
        n_raw = values["verify"]["n_list"].strip()
        n_list = tuple(float(x) for x in n_raw.split(",") if x.strip()) if n_raw else ()
        return cls(
            weights=wcfg, nonlinearity=ncfg,
            grid_points=iget("grid", "points"), grid_r_max=fget("grid", "r_max"),
            grid_r_min_factor=fget("grid", "r_min_factor"),
            solver=solver, quad_order=iget("solver", "quad_order"),
            schedule=schedule,
            verify_points=iget("verify", "points"),
            verify_r_max=fget("verify", "r_max"),
            verify_n_list=n_list,
            hls_samples=iget("verify", "hls_samples"),
            hls_margin_scale=fget("verify", "hls_margin_scale"),
            output_dir=values["output"]["directory"],
            resolved=values)

    def build_grid(self) -> RadialGrid:
        return RadialGrid.geometric(self.weights.N, self.grid_r_max,
                                    self.grid_points, self.grid_r_min_factor)

    def build_verify_grid(self) -> RadialGrid:
        return RadialGrid.geometric(self.weights.N, self.verify_r_max,
                                    self.verify_points, self.grid_r_min_factor)

    def canonical(self) -> dict:
        return {s: dict(sorted(kv.items())) for s, kv in sorted(self.resolved.items())}

    def config_hash(self) -> str:
        blob = json.dumps(self.canonical(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]
