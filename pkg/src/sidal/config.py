"""Flat ``key = value`` campaign configuration files.

Keys may carry a dotted section prefix (``smc.particles = 2000``). Lines
starting with ``#`` are comments. Lists are comma separated.
"""

from dataclasses import fields, replace

from . import benchmarks
from .campaign import CampaignConfig, load_benchmark

# config key -> CampaignConfig field
KEYS = {
    "benchmark": "benchmark",
    "method": "method",
    "lambda": "lam",
    "bias": "bias",
    "budget": "budget",
    "seed": "seed",
    "noise_var": "noise_var",
    "n_init": "n_init",
    "domain": "domain",
    "dim": "dim",
    "pool_size": "pool_size",
    "bits": "bits",
    "bench_seed": "bench_seed",
    "kernel.family": "kernel_family",
    "kernel.lengthscales": "kernel_lengthscales",
    "kernel.output_scale": "kernel_output_scale",
    "kernel.hyper": "hyper",
    "acq.constraint": "use_constraint",
    "acq.first_order": "first_order",
    "acq.mc_samples": "mc_samples",
    "acq.n_features": "n_features",
    "smc.particles": "smc_particles",
    "smc.ess_ratio": "smc_ess_ratio",
    "smc.rwm_steps": "smc_rwm_steps",
    "smc.step_size": "smc_step_size",
    "smc.max_levels": "smc_max_levels",
    "ghal.max_steps": "ghal_max_steps",
    "diagnostics": "diagnostics",
}
FIELD_TO_KEY = {v: k for k, v in KEYS.items()}

_INT = {"budget", "seed", "n_init", "dim", "pool_size", "bits", "bench_seed",
        "mc_samples", "n_features", "smc_particles", "smc_rwm_steps",
        "smc_max_levels", "ghal_max_steps"}
_FLOAT = {"lam", "noise_var", "kernel_output_scale", "smc_ess_ratio", "smc_step_size"}
_BOOL = {"use_constraint", "first_order", "diagnostics"}


class ConfigError(ValueError):
    pass


def _convert(field_name, raw):
    raw = raw.strip()
    if raw.lower() in ("", "none", "default"):
        return None
    if field_name in _INT:
        return int(raw)
    if field_name in _FLOAT:
        return float(raw)
    if field_name in _BOOL:
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if field_name == "kernel_lengthscales":
        return tuple(float(v) for v in raw.split(","))
    return raw


def parse_pairs(text):
    """Raw ``{key: value}`` mapping from a config document."""
    out = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, value = (p.strip() for p in line.split("=", 1))
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        out[key] = value
    return out


def config_from_pairs(pairs, resolve_defaults=True):
    kwargs = {}
    for key, raw in pairs.items():
        name = KEYS[key]
        try:
            value = _convert(name, raw)
        except ValueError as err:
            raise ConfigError(f"{key}: {err}") from None
        if value is not None:
            kwargs[name] = value
    if "benchmark" not in kwargs:
        raise ConfigError("missing required key 'benchmark'")
    try:
        cfg = CampaignConfig(**kwargs)
    except (ValueError, TypeError) as err:
        raise ConfigError(str(err)) from None
    return apply_defaults(cfg) if resolve_defaults else cfg


def apply_defaults(cfg):
    """Fill benchmark-dependent defaults (lambda, kernel, particle count)."""
    try:
        bench = load_benchmark(cfg)
    except benchmarks.UnknownBenchmarkError as err:
        raise ConfigError(str(err.args[0])) from None
    kern = bench.default_kernel
    return replace(
        cfg,
        lam=bench.default_lambda if cfg.lam is None else cfg.lam,
        kernel_family=cfg.kernel_family or kern.family,
        kernel_lengthscales=cfg.kernel_lengthscales or kern.lengthscales,
        smc_particles=cfg.smc_particles or 1000 * bench.domain.dim,
    )


def parse_config(text, resolve_defaults=True):
    """Validated :class:`CampaignConfig` from a config document."""
    return config_from_pairs(parse_pairs(text), resolve_defaults)


def serialize_config(cfg):
    lines = []
    for f in fields(cfg):
        value = getattr(cfg, f.name)
        if value is None:
            continue
        if isinstance(value, tuple):
            value = ", ".join(repr(float(v)) for v in value)
        elif isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = repr(value)
        lines.append(f"{FIELD_TO_KEY[f.name]} = {value}")
    return "\n".join(lines) + "\n"
