"""Run configuration: INI schema, parsing with diagnostics, and round-trip serialization.

Sections and keys (all optional; defaults give an N=2 double-slit run)::

    [run]       mode order seed realizations threads deterministic output block_size
    [source]    shape level bandwidth center samples guard
    [optics]    wavelength
    [test_arm]  z1 fc
    [object]    preset width separation edge levels samples extent
    [ref]       z_r0 z_r1 f_r          defaults for every reference arm
    [ref.R]     z_r0 z_r1 f_r          overrides for arm R (R = 2..N)
    [scan]      arms points margin park_gap
    [sweep]     n_min n_max measure qa placement

``z_r1 = auto`` places the detector at the thin-lens image distance.  If any
``[ref.R]`` block is present there must be exactly one per reference arm.
"""

from __future__ import annotations

import configparser
import io
import math
import re
from dataclasses import dataclass, field, replace
from pathlib import Path

from .correlator import SystemConfig
from .imaging import solve_image_distance
from .optics import ObjectMask, ReferenceArm, TestArm, wavenumber
from .source_model import SHAPES, PowerSpectrum, make_frequency_grid

__all__ = [
    "ConfigError", "RunConfig", "ArmSpec", "MODES",
    "parse_config", "parse_config_text", "to_ini", "validate", "with_overrides",
]

MODES = ("simulate", "analytic", "visibility-sweep", "classify", "validate")
AUTO = "auto"

OBJECT_KEYS = {
    "single-slit": ("width", "edge"),
    "double-slit": ("width", "separation", "edge"),
    "point": (),
    "grayscale": ("width", "levels", "edge"),
}


class ConfigError(ValueError):
    """Schema violation or unreadable configuration."""


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_or_auto(s):
    return None if s.strip().lower() == AUTO else float(s)


def _floats(s):
    return tuple(float(v) for v in s.replace(",", " ").split())


def _ints(s):
    return tuple(int(v) for v in s.replace(",", " ").split())


def _fmt(v):
    if v is None:
        return AUTO
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, tuple):
        return ", ".join(_fmt(x) for x in v)
    return str(v)


ARM_KEYS = {"z_r0": float, "z_r1": _float_or_auto, "f_r": float}

SCHEMA = {
    "run": {
        "mode": str, "order": int, "seed": int, "realizations": int, "threads": int,
        "deterministic": _bool, "output": str, "block_size": int,
    },
    "source": {"shape": str, "level": float, "bandwidth": float, "center": float, "samples": int, "guard": float},
    "optics": {"wavelength": float},
    "test_arm": {"z1": float, "fc": float},
    "object": {
        "preset": str, "width": float, "separation": float, "edge": float, "levels": _floats,
        "samples": int, "extent": _float_or_auto,
    },
    "ref": ARM_KEYS,
    "scan": {"arms": _ints, "points": int, "margin": float, "park_gap": float},
    "sweep": {"n_min": int, "n_max": int, "measure": str, "qa": _floats, "placement": str},
}


@dataclass(frozen=True)
class ArmSpec:
    z_r0: float = 0.3
    z_r1: float | None = None
    f_r: float = 0.1


@dataclass(frozen=True)
class RunConfig:
    mode: str = "simulate"
    N: int = 2
    seed: int = 12345
    realizations: int = 20000
    threads: int = 1
    deterministic: bool = True
    output: str = "ghostcorr-out"
    block_size: int = 0
    # source
    shape: str = "top-hat"
    level: float = 1.0
    bandwidth: float = 2.0e4
    center: float = 0.0
    samples: int = 512
    guard: float = 0.25
    # optics
    wavelength: float = 632.8e-9
    z1: float = 0.1
    fc: float = 0.1
    # object
    preset: str = "double-slit"
    object_params: tuple = ()
    object_samples: int = 256
    object_extent: float | None = None
    # reference arms
    ref_default: ArmSpec = ArmSpec()
    refs: tuple = ()
    # scan
    scan_arms: tuple = (2,)
    scan_points: int = 128
    scan_margin: float = 0.2
    park_gap: float = 10.0
    # sweep
    n_min: int = 2
    n_max: int = 5
    measure: str = "analytic"
    qa: tuple = ()
    placement: str = "auto"
    source_text: str = field(default="", compare=False)

    # builders ------------------------------------------------------------

    def spectrum(self) -> PowerSpectrum:
        return PowerSpectrum(self.shape, self.level, self.bandwidth, self.center)

    def k(self) -> float:
        return wavenumber(self.wavelength)

    def arm_specs(self, N: int | None = None) -> tuple:
        N = self.N if N is None else N
        if self.refs and N == self.N:
            return self.refs
        return tuple(self.ref_default for _ in range(N - 1))

    def reference_arms(self, N: int | None = None) -> tuple:
        arms = []
        for r, spec in enumerate(self.arm_specs(N), start=2):
            z_r1 = spec.z_r1
            if z_r1 is None:
                z_r1 = solve_image_distance(spec.z_r0, self.z1, spec.f_r, r).image_distance
            arms.append(ReferenceArm(r, spec.z_r0, z_r1, spec.f_r, self.k()))
        return tuple(arms)

    def test_arm(self) -> TestArm:
        return TestArm(self.z1, self.fc, self.k())

    def object_mask(self, **override) -> ObjectMask:
        params = dict(self.object_params)
        params.update(n=self.object_samples, extent=self.object_extent)
        params.update(override)
        if self.preset == "point" and params["extent"] is None:
            params.pop("extent")
        if "levels" in params:
            params["levels"] = tuple(params["levels"])
        return ObjectMask.preset(self.preset, **params)

    def system(self, N: int | None = None, obj: ObjectMask | None = None) -> SystemConfig:
        spec = self.spectrum()
        grid = make_frequency_grid(spec, self.samples, self.guard)
        return SystemConfig(self.test_arm(), self.reference_arms(N), obj or self.object_mask(), spec, grid)


# parsing ---------------------------------------------------------------

_SECTION = re.compile(r"^\s*\[([^\]]+)\]")
_KEY = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")


def _line_index(text: str) -> dict:
    """(section, key) -> line number, for diagnostics."""
    where, section = {}, None
    for n, line in enumerate(text.splitlines(), start=1):
        m = _SECTION.match(line)
        if m:
            section = m.group(1).strip()
            where[(section, None)] = n
            continue
        m = _KEY.match(line)
        if m and section is not None:
            where.setdefault((section, m.group(1).strip().lower()), n)
    return where


def parse_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror or exc}") from exc
    return parse_config_text(text, source=str(path))


def parse_config_text(text: str, source: str = "<config>") -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"), default_section="\0")
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: {exc}") from exc
    lines = _line_index(text)

    def loc(section, key=None):
        n = lines.get((section, key))
        return f"{source}:{n}" if n else source

    values, ref_blocks = {}, {}
    for section in parser.sections():
        m = re.fullmatch(r"ref\.(\d+)", section)
        if m:
            schema, target = ARM_KEYS, ref_blocks.setdefault(int(m.group(1)), {})
        elif section in SCHEMA:
            schema, target = SCHEMA[section], values.setdefault(section, {})
        else:
            raise ConfigError(f"{loc(section)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in schema:
                raise ConfigError(f"{loc(section, key)}: unknown key '{key}' in [{section}]")
            try:
                target[key] = schema[key](raw)
            except ValueError as exc:
                raise ConfigError(f"{loc(section, key)}: bad value for [{section}] {key}: {exc}") from exc

    def get(section, key, default):
        return values.get(section, {}).get(key, default)

    d = RunConfig()
    run_N = get("run", "order", d.N)
    obj_preset = get("object", "preset", d.preset)
    if obj_preset not in OBJECT_KEYS:
        raise ConfigError(f"{loc('object', 'preset')}: unknown object preset '{obj_preset}'; "
                          f"choose from {sorted(OBJECT_KEYS)}")
    obj_params = []
    for key in ("width", "separation", "edge", "levels"):
        if key in values.get("object", {}):
            if key not in OBJECT_KEYS[obj_preset]:
                raise ConfigError(f"{loc('object', key)}: key '{key}' does not apply to preset '{obj_preset}'")
            obj_params.append((key, values["object"][key]))

    base = values.get("ref", {})
    ref_default = ArmSpec(**{**d.ref_default.__dict__, **base})
    refs = ()
    if ref_blocks:
        want = list(range(2, run_N + 1))
        if sorted(ref_blocks) != want:
            raise ConfigError(
                f"{source}: expected {run_N - 1} reference arms ([ref.2] .. [ref.{run_N}]) for order {run_N}, "
                f"got {len(ref_blocks)} block(s): " + ", ".join(f"[ref.{r}]" for r in sorted(ref_blocks))
            )
        refs = tuple(ArmSpec(**{**ref_default.__dict__, **ref_blocks[r]}) for r in want)

    cfg = RunConfig(
        mode=get("run", "mode", d.mode),
        N=run_N,
        seed=get("run", "seed", d.seed),
        realizations=get("run", "realizations", d.realizations),
        threads=get("run", "threads", d.threads),
        deterministic=get("run", "deterministic", d.deterministic),
        output=get("run", "output", d.output),
        block_size=get("run", "block_size", d.block_size),
        shape=get("source", "shape", d.shape),
        level=get("source", "level", d.level),
        bandwidth=get("source", "bandwidth", d.bandwidth),
        center=get("source", "center", d.center),
        samples=get("source", "samples", d.samples),
        guard=get("source", "guard", d.guard),
        wavelength=get("optics", "wavelength", d.wavelength),
        z1=get("test_arm", "z1", d.z1),
        fc=get("test_arm", "fc", d.fc),
        preset=obj_preset,
        object_params=tuple(obj_params),
        object_samples=get("object", "samples", d.object_samples),
        object_extent=get("object", "extent", d.object_extent),
        ref_default=ref_default,
        refs=refs,
        scan_arms=get("scan", "arms", d.scan_arms),
        scan_points=get("scan", "points", d.scan_points),
        scan_margin=get("scan", "margin", d.scan_margin),
        park_gap=get("scan", "park_gap", d.park_gap),
        n_min=get("sweep", "n_min", d.n_min),
        n_max=get("sweep", "n_max", d.n_max),
        measure=get("sweep", "measure", d.measure),
        qa=get("sweep", "qa", d.qa),
        placement=get("sweep", "placement", d.placement),
        source_text=text,
    )
    validate(cfg, loc)
    return cfg


def validate(cfg: RunConfig, loc=lambda s, k=None: "<config>") -> None:
    """Schema-level checks; raises ConfigError naming the offending key."""

    def need(ok, section, key, msg):
        if not ok:
            raise ConfigError(f"{loc(section, key)}: [{section}] {key}: {msg}")

    need(cfg.mode in MODES, "run", "mode", f"unknown mode '{cfg.mode}'; choose from {', '.join(MODES)}")
    need(cfg.N >= 2, "run", "order", f"order must be >= 2, got {cfg.N}")
    need(cfg.seed >= 0, "run", "seed", "seed must be nonnegative")
    need(cfg.realizations >= 100, "run", "realizations", f"need >= 100 realizations, got {cfg.realizations}")
    need(cfg.threads >= 1, "run", "threads", "threads must be >= 1")
    need(cfg.block_size >= 0, "run", "block_size", "block size must be >= 0 (0 = automatic)")
    need(cfg.shape in SHAPES, "source", "shape", f"unknown shape '{cfg.shape}'; choose from {', '.join(SHAPES)}")
    need(cfg.level > 0, "source", "level", "spectral level must be positive")
    need(cfg.bandwidth > 0, "source", "bandwidth", "bandwidth must be positive")
    need(cfg.samples >= 32, "source", "samples", "need at least 32 frequency samples")
    need(cfg.guard >= 0, "source", "guard", "guard fraction must be >= 0")
    need(cfg.wavelength > 0, "optics", "wavelength", "wavelength must be positive")
    need(cfg.z1 > 0, "test_arm", "z1", "z1 must be positive")
    need(cfg.fc > 0, "test_arm", "fc", "fc must be positive")
    need(cfg.object_samples >= 8, "object", "samples", "need at least 8 object samples")
    need(cfg.object_extent is None or cfg.object_extent > 0, "object", "extent", "extent must be positive")
    for key, v in cfg.object_params:
        if key == "levels":
            need(len(v) > 0 and all(0 <= x <= 1 for x in v), "object", key, "levels must lie in [0, 1]")
        else:
            need(v > 0, "object", key, f"{key} must be positive")
    specs = [("ref", cfg.ref_default)] + [(f"ref.{r}", s) for r, s in enumerate(cfg.refs, start=2)]
    for section, s in specs:
        need(s.z_r0 > 0, section, "z_r0", "z_r0 must be positive")
        need(s.f_r > 0, section, "f_r", "f_r must be positive")
        if s.z_r1 is not None:
            need(not math.isclose(s.z_r1, s.f_r, rel_tol=1e-12, abs_tol=0.0), section, "z_r1",
                 f"z_r1 equals f_r = {s.f_r}: this is the pole of the reference impulse response")
        else:
            need(s.z_r0 > cfg.z1, section, "z_r0", "z_r1 = auto needs z_r0 > z1")
            need(s.z_r0 - cfg.z1 != s.f_r, section, "z_r0",
                 "z_r0 - z1 equals f_r: the image is at infinity, set z_r1 explicitly")
    need(len(cfg.scan_arms) >= 1 and all(2 <= r <= cfg.N for r in cfg.scan_arms), "scan", "arms",
         f"scanned arms must be in 2..{cfg.N}")
    need(len(set(cfg.scan_arms)) == len(cfg.scan_arms) and len(cfg.scan_arms) <= 2, "scan", "arms",
         "scan at most two distinct arms")
    need(cfg.scan_points >= 2, "scan", "points", "need at least 2 scan points")
    need(cfg.scan_margin >= 0, "scan", "margin", "margin must be >= 0")
    need(cfg.park_gap >= 1 and float(cfg.park_gap).is_integer(), "scan", "park_gap",
         "park gap must be a whole number of speckle widths >= 1")
    need(2 <= cfg.n_min <= cfg.n_max, "sweep", "n_max", "need 2 <= n_min <= n_max")
    need(cfg.measure in ("analytic", "monte-carlo"), "sweep", "measure", "measure must be analytic or monte-carlo")
    need(all(v > 0 for v in cfg.qa), "sweep", "qa", "q0*A values must be positive")
    need(not cfg.qa or cfg.preset == "point", "sweep", "qa", "q0*A targets need the point object preset")
    need(cfg.placement in ("auto", "distinct", "coincident"), "sweep", "placement",
         "placement must be auto, distinct or coincident")


def to_ini(cfg: RunConfig) -> str:
    """Serialize every field explicitly; ``parse_config_text(to_ini(c)) == c``."""
    out = io.StringIO()

    def section(name, items):
        out.write(f"[{name}]\n")
        for k, v in items:
            out.write(f"{k} = {_fmt(v)}\n")
        out.write("\n")

    section("run", [("mode", cfg.mode), ("order", cfg.N), ("seed", cfg.seed), ("realizations", cfg.realizations),
                    ("threads", cfg.threads), ("deterministic", cfg.deterministic), ("output", cfg.output),
                    ("block_size", cfg.block_size)])
    section("source", [("shape", cfg.shape), ("level", cfg.level), ("bandwidth", cfg.bandwidth),
                       ("center", cfg.center), ("samples", cfg.samples), ("guard", cfg.guard)])
    section("optics", [("wavelength", cfg.wavelength)])
    section("test_arm", [("z1", cfg.z1), ("fc", cfg.fc)])
    section("object", [("preset", cfg.preset), *cfg.object_params, ("samples", cfg.object_samples),
                       ("extent", cfg.object_extent)])
    arm = lambda s: [("z_r0", s.z_r0), ("z_r1", s.z_r1), ("f_r", s.f_r)]  # noqa: E731
    section("ref", arm(cfg.ref_default))
    for r, s in enumerate(cfg.refs, start=2):
        section(f"ref.{r}", arm(s))
    section("scan", [("arms", cfg.scan_arms), ("points", cfg.scan_points), ("margin", cfg.scan_margin),
                     ("park_gap", cfg.park_gap)])
    sweep = [("n_min", cfg.n_min), ("n_max", cfg.n_max), ("measure", cfg.measure)]
    if cfg.qa:
        sweep.append(("qa", cfg.qa))
    sweep.append(("placement", cfg.placement))
    section("sweep", sweep)
    return out.getvalue()


def with_overrides(cfg: RunConfig, **changes) -> RunConfig:
    """Apply command-line overrides (``None`` values are ignored) and revalidate."""
    changes = {k: v for k, v in changes.items() if v is not None}
    new = replace(cfg, **changes)
    validate(new)
    return new
