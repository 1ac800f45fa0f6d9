"""
Experiment configuration: an INI file with fixed sections.

    [grid]    dim, points_per_axis, time_nodes
    [params]  R, M, L, T, delta, c_s, ell, rank
    [law]     s_gp, amplitude, band, s0, r0, seed, sup_bound (optional)
    [truth]   nonlinearity = <name> key=value ...
    [family]  members = one nonlinearity spec per line
    [run]     seeds = a,b,c plus scenario-specific keys

Nonlinearity specs use catalog names and parameter names verbatim, e.g.
``sin scale=0.5`` or ``defocusing alpha=0.5 beta=0.1 p=3``.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .data import InitialLaw
from .errors import ConfigurationError, PicardOpError
from .nonlinearity import Nonlinearity, catalog
from .picard import Inequality, PicardParams
from .spectral import GridSpec

REQUIRED = {
    "grid": ("dim", "points_per_axis", "time_nodes"),
    "params": ("R", "M", "L", "T", "delta"),
}


class ConfigParseError(ConfigurationError):
    def __init__(self, path: str, line: int, column: int, message: str):
        self.line, self.column = line, column
        super().__init__(f"{path}:{line}:{column}: {message}")


@dataclass(frozen=True)
class NonlinearitySpec:
    name: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, text: str) -> "NonlinearitySpec":
        parts = text.split()
        if not parts:
            raise ConfigurationError("empty nonlinearity spec")
        params = {}
        for tok in parts[1:]:
            key, sep, val = tok.partition("=")
            if not sep:
                raise ConfigurationError(f"expected key=value, got {tok!r}")
            try:
                params[key] = float(val)
            except ValueError:
                raise ConfigurationError(f"parameter {key} is not a number: {val!r}") from None
        return cls(parts[0], params)

    def build(self, M: float, L: Optional[float] = None) -> Nonlinearity:
        return catalog(self.name, M, L, **self.params)

    def __str__(self) -> str:
        args = " ".join(f"{k}={v:g}" for k, v in self.params.items())
        return f"{self.name} {args}".strip()


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: str
    grid: GridSpec
    params: PicardParams
    law: Optional[InitialLaw]
    truth: Optional[NonlinearitySpec]
    family: list[NonlinearitySpec]
    seeds: list[int]
    output_dir: Path
    run: dict[str, str]
    source: str = "<config>"

    def opt(self, key: str, default, cast=float):
        if key not in self.run:
            return default
        raw = self.run[key]
        try:
            if cast is list:
                return [float(x) for x in raw.replace(",", " ").split()]
            if cast is bool:
                return raw.strip().lower() in ("1", "true", "yes", "on")
            return cast(raw)
        except ValueError:
            raise ConfigurationError(f"[run] {key} = {raw!r} is not a valid {cast.__name__}") from None

    def truth_nonlinearity(self) -> Nonlinearity:
        if self.truth is None:
            raise ConfigurationError("config has no [truth] nonlinearity")
        return self.truth.build(self.params.M, self.params.L)

    def family_members(self) -> list[Nonlinearity]:
        return [s.build(self.params.M, self.params.L) for s in self.family]


def _locate(text: str, section: str, key: str) -> tuple[int, int]:
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        m = re.match(r"\s*\[([^\]]+)\]", line)
        if m:
            current = m.group(1).strip()
            continue
        if current == section:
            m = re.match(rf"(\s*{re.escape(key)}\s*[=:]\s*)", line, flags=re.IGNORECASE)
            if m:
                return lineno, len(m.group(1)) + 1
    return 0, 0


def _parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    cp.optionxform = str  # keep R, M, L case-sensitive
    return cp


def _read(text: str, path: str) -> configparser.ConfigParser:
    cp = _parser()
    try:
        cp.read_string(text, source=path)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigParseError(path, exc.lineno, 1, "missing [section] header") from None
    except configparser.ParsingError as exc:
        lineno, line = exc.errors[0]
        raise ConfigParseError(path, lineno, 1, f"cannot parse {line!r}") from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigParseError(path, exc.lineno or 0, 1, f"duplicate key {exc.option!r}") from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigParseError(path, exc.lineno or 0, 1, f"duplicate section {exc.section!r}") from None
    return cp


def _num(cp, text, path, section, key, cast=float, default=None):
    if not cp.has_option(section, key):
        if default is not None:
            return default
        line, col = _locate(text, section, key)
        raise ConfigParseError(path, line, col, f"missing [{section}] {key}")
    raw = cp.get(section, key)
    try:
        return cast(raw)
    except ValueError:
        line, col = _locate(text, section, key)
        raise ConfigParseError(path, line, col, f"[{section}] {key} = {raw!r} is not a number") from None


def parse_config(
    text: str,
    scenario: str = "",
    path: str = "<config>",
    output_dir: Optional[Path] = None,
    check_params: bool = True,
) -> ExperimentConfig:
    cp = _read(text, path)
    for section, keys in REQUIRED.items():
        if not cp.has_section(section):
            raise ConfigParseError(path, 0, 0, f"missing section [{section}]")
        for k in keys:
            _num(cp, text, path, section, k)
    grid = GridSpec(
        _num(cp, text, path, "grid", "dim", int),
        _num(cp, text, path, "grid", "points_per_axis", int),
        _num(cp, text, path, "grid", "time_nodes", int),
    )
    p = {k: _num(cp, text, path, "params", k) for k in ("R", "M", "L", "T", "delta")}
    p["c_s"] = _num(cp, text, path, "params", "c_s", float, 1.0)
    p["ell"] = _num(cp, text, path, "params", "ell", int, 1)
    p["rank"] = _num(cp, text, path, "params", "rank", int, 16)
    if check_params:
        params = PicardParams(**p)
    else:
        params = object.__new__(PicardParams)
        for k, v in p.items():
            object.__setattr__(params, k, v)
    law = None
    if cp.has_section("law"):
        sup = cp.get("law", "sup_bound", fallback=None)
        law = InitialLaw(
            s_gp=_num(cp, text, path, "law", "s_gp"),
            amplitude=_num(cp, text, path, "law", "amplitude"),
            band=_num(cp, text, path, "law", "band", int),
            s0=_num(cp, text, path, "law", "s0"),
            r0=_num(cp, text, path, "law", "r0"),
            seed=_num(cp, text, path, "law", "seed", int, 0),
            sup_bound=None if sup in (None, "", "none") else float(sup),
        )
    truth = None
    if cp.has_option("truth", "nonlinearity"):
        truth = _spec(cp.get("truth", "nonlinearity"), text, path, "truth", "nonlinearity")
    family = []
    if cp.has_option("family", "members"):
        for line in cp.get("family", "members").splitlines():
            if line.strip():
                family.append(_spec(line, text, path, "family", "members"))
    run = dict(cp.items("run")) if cp.has_section("run") else {}
    seeds_raw = run.get("seeds", "0")
    try:
        seeds = [int(s) for s in seeds_raw.replace(",", " ").split()]
    except ValueError:
        line, col = _locate(text, "run", "seeds")
        raise ConfigParseError(path, line, col, f"seeds must be integers: {seeds_raw!r}") from None
    out = output_dir if output_dir is not None else Path(run.get("output_dir", "results"))
    return ExperimentConfig(scenario, grid, params, law, truth, family, seeds, Path(out), run, path)


def _spec(raw, text, path, section, key) -> NonlinearitySpec:
    try:
        return NonlinearitySpec.parse(raw)
    except ConfigurationError as exc:
        line, col = _locate(text, section, key)
        raise ConfigParseError(path, line, col, str(exc)) from None


def load_config(path, scenario: str = "", output_dir: Optional[Path] = None) -> ExperimentConfig:
    text = Path(path).read_text(encoding="utf-8")
    return parse_config(text, scenario, str(path), output_dir)


@dataclass
class ValidationReport:
    lines: list[str]
    ok: bool

    def __str__(self) -> str:
        return "\n".join(self.lines)


def validate_config(path) -> ValidationReport:
    """Print every parameter inequality with both sides; ok iff all hold."""
    path = Path(path)
    if not path.exists():
        return ValidationReport([f"{path}: no such file"], False)
    text = path.read_text(encoding="utf-8")
    try:
        cfg = parse_config(text, path=str(path), check_params=False)
    except PicardOpError as exc:
        return ValidationReport([f"error: {exc}"], False)
    p = cfg.params
    checks: list[Inequality] = PicardParams.inequalities(p)
    lines = [str(q) for q in checks]
    ok = all(q.holds for q in checks)
    try:
        if cfg.truth is not None:
            cfg.truth_nonlinearity()
        cfg.family_members()
    except PicardOpError as exc:
        lines.append(f"nonlinearity: {exc}")
        ok = False
    if cfg.law is not None and cfg.law.sup_bound is not None:
        c = cfg.law.embedding_constant(cfg.grid.dim)
        q = Inequality("R0 * C_sob <= R_law", cfg.law.r0 * c, cfg.law.sup_bound)
        lines.append(str(q))
        ok = ok and q.holds
    lines.append("valid" if ok else "invalid")
    return ValidationReport(lines, ok)
