"""Flat ``key = value`` experiment configuration files.

Example::

    # ex1 at desk scale
    experiment = ex1
    n_list = 10, 100, 1000
    n_sims = 50
    seed = 7
    out = run/ex1

Blank lines and ``#`` comments are ignored. Unknown keys are rejected, and
values are validated by constructing the experiment spec.
"""

from dataclasses import dataclass

from .experiments import BUILTIN, ExperimentSpec, builtin_spec

__all__ = ["ConfigError", "RunConfig", "parse_config", "load_config", "build_spec", "KEYS"]


class ConfigError(ValueError):
    """Malformed or invalid configuration."""


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"not an integer: {text!r}")
    return int(v)


def _int_list(text):
    return tuple(_int(p) for p in text.split(",") if p.strip())


def _str(text):
    return text.strip()


# key -> (spec field or None for run options, parser)
KEYS = {
    "experiment": ("id", _str),
    "problem": ("problem", _str),
    "m": ("m", _int),
    "N": ("N", _int),
    "alpha": ("alpha", float),
    "T": ("T", float),
    "penalty": ("penalty", _str),
    "noise.sigma": ("sigma", float),
    "noise.sigma_rel": ("sigma_rel", float),
    "rule": ("rule", _str),
    "beta0": ("beta0", float),
    "tau0": ("tau0", float),
    "q": ("q", float),
    "c_scale": ("c_scale", float),
    "n_list": ("n_list", _int_list),
    "n_sims": ("n_sims", _int),
    "seed": ("seed", _int),
    "strict_theory": ("strict_theory", _bool),
    "step_factor": ("step_factor", float),
    "sampler": ("sampler", _str),
    "max_iters": ("max_iters", _int),
    "landweber": ("landweber", _bool),
    "error_norm": ("error_norm", _str),
    "out": (None, _str),
    "jobs": (None, _int),
}


@dataclass
class RunConfig:
    """Parsed file: spec fields plus run options (``out``, ``jobs``)."""

    fields: dict
    out: str = None
    jobs: int = 1


def parse_config(text, source="<config>"):
    fields = {}
    run = RunConfig({})
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        target, parse = KEYS[key]
        try:
            value = parse(value)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
        if target is None:
            setattr(run, key, value)
        else:
            fields[target] = value
    if "sigma" in fields and "sigma_rel" in fields:
        raise ConfigError(f"{source}: give only one of noise.sigma and noise.sigma_rel")
    if "sigma" in fields:
        fields["sigma_rel"] = None
    elif "sigma_rel" in fields:
        fields["sigma"] = None
    if run.jobs < 1:
        raise ConfigError(f"{source}: jobs must be >= 1")
    run.fields = fields
    return run


def load_config(path):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, source=str(path))


def build_spec(fields):
    """ExperimentSpec from parsed fields; built-in ids start from their defaults."""
    fields = dict(fields)
    exp_id = fields.pop("id", "custom")
    try:
        if exp_id in BUILTIN:
            return builtin_spec(exp_id, **fields)
        return ExperimentSpec(id=exp_id, **fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None
