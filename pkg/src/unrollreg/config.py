"""Line-oriented experiment configuration.

Grammar: one ``section.key = value`` assignment per line; blank lines and
``#`` comments are ignored.  No nesting.  Unknown keys are rejected with the
key path and line number.  Sweep keys take comma-separated lists; every other
key takes a single value.

Sections and keys (defaults in parentheses):

    geometry.n1 (64)         geometry.n2 (64)
    geometry.m1 (91)         geometry.m2 (60)      geometry.angle_span (180)
    noise.intensity (1e6)    noise.seed (0)
    phantom.kind (shepp_logan)   phantom.seed (0)
    scheme.n_steps (100)     scheme.inner_steps (100)
    scheme.tau (1e-5; the literal ``auto`` means 1/||T||^2 per operator)
    scheme.structure (composition)   scheme.beta_mode (cv; or a number in [0,1])
    scheme.momentum (true)   scheme.nonneg (false)
    scheme.denoiser (conv_residual; also identity, gain:G, gaussian:S,
                     median:K, conv_residual:PATH)
    scheme.leaveout_fraction (0.01)  scheme.seed (0)
    sweep.inner_steps        sweep.intensity
    sweep.views              sweep.beta_mode       (all optional lists)
    output.dir (runs)        output.probe (false)
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .errors import ConfigError

_PHANTOM_KINDS = {"shepp_logan", "disks", "bars"}
_STRUCTURES = {"composition", "addition"}


def _parse_int(text):
    return int(text)


def _parse_float(text):
    return float(text)


def _parse_bool(text):
    lowered = text.lower()
    if lowered in {"true", "yes", "1", "on"}:
        return True
    if lowered in {"false", "no", "0", "off"}:
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _parse_str(text):
    return text


def _parse_tau(text):
    if text.lower() == "auto":
        return "auto"
    return float(text)


def _parse_beta_mode(text):
    if text.lower() == "cv":
        return "cv"
    return float(text)


def _parse_float_list(text):
    return [float(tok.strip()) for tok in text.split(",") if tok.strip()]


def _parse_int_list(text):
    return [int(tok.strip()) for tok in text.split(",") if tok.strip()]


def _parse_beta_list(text):
    return [_parse_beta_mode(tok.strip()) for tok in text.split(",") if tok.strip()]


# key path -> (parser, default)
_SCHEMA = {
    "geometry.n1": (_parse_int, 64),
    "geometry.n2": (_parse_int, 64),
    "geometry.m1": (_parse_int, 91),
    "geometry.m2": (_parse_int, 60),
    "geometry.angle_span": (_parse_float, 180.0),
    "noise.intensity": (_parse_float, 1e6),
    "noise.seed": (_parse_int, 0),
    "phantom.kind": (_parse_str, "shepp_logan"),
    "phantom.seed": (_parse_int, 0),
    "scheme.n_steps": (_parse_int, 100),
    "scheme.inner_steps": (_parse_int, 100),
    "scheme.tau": (_parse_tau, 1e-5),
    "scheme.structure": (_parse_str, "composition"),
    "scheme.beta_mode": (_parse_beta_mode, "cv"),
    "scheme.momentum": (_parse_bool, True),
    "scheme.nonneg": (_parse_bool, False),
    "scheme.denoiser": (_parse_str, "conv_residual"),
    "scheme.leaveout_fraction": (_parse_float, 0.01),
    "scheme.seed": (_parse_int, 0),
    "sweep.inner_steps": (_parse_int_list, None),
    "sweep.intensity": (_parse_float_list, None),
    "sweep.views": (_parse_int_list, None),
    "sweep.beta_mode": (_parse_beta_list, None),
    "output.dir": (_parse_str, "runs"),
    "output.probe": (_parse_bool, False),
}


@dataclass
class ExperimentConfig:
    """Validated experiment description; one attribute per schema key."""

    values: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    def sweep_grid(self):
        """Cartesian sweep points as dicts with inner_steps/intensity/views/beta_mode."""
        n0s = self.values["sweep.inner_steps"] or [self.values["scheme.inner_steps"]]
        i0s = self.values["sweep.intensity"] or [self.values["noise.intensity"]]
        views = self.values["sweep.views"] or [self.values["geometry.m2"]]
        betas = self.values["sweep.beta_mode"] or [self.values["scheme.beta_mode"]]
        grid = []
        for v in views:
            for i0 in i0s:
                for n0 in n0s:
                    for beta in betas:
                        grid.append(
                            {"views": v, "intensity": i0, "inner_steps": n0, "beta_mode": beta}
                        )
        return grid


def _validate(values, lines):
    def fail(key, message):
        raise ConfigError(message, key=key, line=lines.get(key))

    for key in ("geometry.n1", "geometry.n2", "geometry.m1", "geometry.m2"):
        if values[key] < 1:
            fail(key, "dimension must be >= 1")
    if values["geometry.angle_span"] <= 0:
        fail("geometry.angle_span", "angle span must be positive")
    if values["noise.intensity"] <= 0:
        fail("noise.intensity", "noise intensity must be positive")
    if values["phantom.kind"] not in _PHANTOM_KINDS:
        fail("phantom.kind", f"unknown phantom kind {values['phantom.kind']!r}")
    if values["scheme.n_steps"] < 1:
        fail("scheme.n_steps", "n_steps must be >= 1")
    if values["scheme.inner_steps"] < 1:
        fail("scheme.inner_steps", "inner_steps must be >= 1")
    tau = values["scheme.tau"]
    if tau != "auto" and tau <= 0:
        fail("scheme.tau", "tau must be positive (or 'auto')")
    if values["scheme.structure"] not in _STRUCTURES:
        fail("scheme.structure", f"unknown structure {values['scheme.structure']!r}")
    beta = values["scheme.beta_mode"]
    if beta != "cv" and not 0.0 <= beta <= 1.0:
        fail("scheme.beta_mode", "fixed beta must lie in [0, 1]")
    if not 0.0 <= values["scheme.leaveout_fraction"] < 1.0:
        fail("scheme.leaveout_fraction", "leaveout fraction must lie in [0, 1)")
    for key in ("sweep.inner_steps", "sweep.intensity", "sweep.views", "sweep.beta_mode"):
        if values[key] is not None and len(values[key]) == 0:
            fail(key, "sweep list must not be empty")
    if values["sweep.beta_mode"] is not None:
        for b in values["sweep.beta_mode"]:
            if b != "cv" and not 0.0 <= b <= 1.0:
                fail("sweep.beta_mode", "fixed beta must lie in [0, 1]")
    if values["sweep.inner_steps"] is not None and min(values["sweep.inner_steps"]) < 1:
        fail("sweep.inner_steps", "inner step counts must be >= 1")
    if values["sweep.intensity"] is not None and min(values["sweep.intensity"]) <= 0:
        fail("sweep.intensity", "intensities must be positive")
    if values["sweep.views"] is not None and min(values["sweep.views"]) < 1:
        fail("sweep.views", "view counts must be >= 1")
    kind = values["scheme.denoiser"].split(":", 1)[0]
    if kind not in {"identity", "gain", "gaussian", "median", "conv_residual"}:
        fail("scheme.denoiser", f"unknown denoiser {values['scheme.denoiser']!r}")


def parse_config_text(text: str, source: str = "<config>") -> ExperimentConfig:
    values = {key: default for key, (_, default) in _SCHEMA.items()}
    lines = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'section.key = value' in {source}", line=lineno)
        key, _, value = line.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _SCHEMA:
            raise ConfigError(f"unknown key in {source}", key=key, line=lineno)
        parser, _ = _SCHEMA[key]
        try:
            values[key] = parser(value)
        except ValueError as err:
            raise ConfigError(f"bad value for key: {err}", key=key, line=lineno) from None
        lines[key] = lineno
    _validate(values, lines)
    return ExperimentConfig(values=values)


def parse_config(path) -> ExperimentConfig:
    """Parse and validate an experiment config file."""
    with open(path, "r", encoding="utf-8") as fh:
        return parse_config_text(fh.read(), source=str(path))
