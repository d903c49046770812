"""Run and sweep configuration: TOML parsing, validation, serialization.

A run config has [model], [evolver] and [run] sections; a sweep config adds
[sweep] with a [sweep.grid] table of parameter-name -> value-list entries
(cartesian product, deterministic order).  The resonance shift may be given
either explicitly as ``x`` or selected through ``regime`` (plus ``branch``
for multi-branch regimes); giving both is an error.
"""

import io
import math
import re
import warnings
from dataclasses import dataclass, field, fields

try:
    import tomllib
except ImportError:  # Python < 3.11
    import tomli as tomllib

from .evolve import EvolverOptions
from .model import ModelParams, ATOM_LABELS
from .regimes import RegimeDescriptor, RegimeId, resonance_catalog

MODEL_KEYS = ("epsilon", "x", "g1", "g2", "Delta1", "Delta2", "regime", "branch")
EVOLVER_KEYS = (
    "n_max", "dt", "sample_eps_dt", "modulation", "omega_n", "integrator",
    "adaptive_tol", "norm_tol", "tail_action", "backend", "store_states",
)
RUN_KEYS = ("initial_state", "eps_t_final", "t_final", "comparison", "out")
SWEEP_KEYS = ("budget_seconds", "workers", "grid")
SWEEPABLE = ("epsilon", "x", "g1", "g2", "Delta1", "Delta2")
COMPARISONS = ("numeric", "analytic", "both")

DEFAULT_N_MAX = 100


class ConfigError(ValueError):
    """Malformed or physically invalid configuration."""


@dataclass
class RunSpec:
    """A fully validated single-run specification."""

    params: ModelParams
    n_max: int
    evolver: EvolverOptions
    initial_state: tuple[str, str, int]
    t_final: float
    eps_t_final: float | None = None
    regime: str | None = None
    branch: str | None = None
    comparison: str = "numeric"
    out: str | None = None
    regime_descriptor: RegimeDescriptor | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.comparison not in COMPARISONS:
            raise ConfigError(f"comparison must be one of {COMPARISONS}")
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if self.n_max < 2:
            raise ConfigError("n_max must be >= 2")
        s1, s2, m = self.initial_state
        if s1 not in ATOM_LABELS or s2 not in ATOM_LABELS or not 0 <= m <= self.n_max:
            raise ConfigError(f"invalid initial state {self.initial_state!r}")


@dataclass
class SweepSpec:
    """A parameter sweep around a base run."""

    base: RunSpec
    grid: dict[str, list[float]]
    budget_seconds: float | None = None
    workers: int | None = None

    def __post_init__(self):
        if not self.grid:
            raise ConfigError("sweep grid must not be empty")
        for name, values in self.grid.items():
            if name not in SWEEPABLE:
                raise ConfigError(
                    f"swept parameter {name!r} is not a model parameter "
                    f"(choose from {SWEEPABLE})"
                )
            if not values:
                raise ConfigError(f"sweep grid for {name!r} is empty")

    def points(self) -> list[dict[str, float]]:
        """Cartesian product of the grid in deterministic order."""
        import itertools

        names = list(self.grid)
        out = []
        for combo in itertools.product(*(self.grid[n] for n in names)):
            out.append(dict(zip(names, combo)))
        return out


def _parse_initial_state(value) -> tuple[str, str, int]:
    if isinstance(value, str):
        m = re.fullmatch(r"([ge])([ge])(\d+)", value)
        if not m:
            raise ConfigError(
                f"initial_state string must look like 'gg0' or 'eg2', got {value!r}"
            )
        return m.group(1), m.group(2), int(m.group(3))
    if isinstance(value, (list, tuple)) and len(value) == 3:
        return str(value[0]), str(value[1]), int(value[2])
    raise ConfigError(f"cannot interpret initial_state {value!r}")


def _check_keys(section: dict, allowed, name: str, strict: bool):
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        msg = f"unknown key(s) in [{name}]: {', '.join(unknown)}"
        if strict:
            raise ConfigError(msg)
        warnings.warn(msg, stacklevel=3)


def _resolve_regime(model: dict) -> tuple[ModelParams, str | None, str | None, RegimeDescriptor | None]:
    """Build ModelParams, resolving ``regime``/``branch`` into x if given."""
    has_x = "x" in model
    regime = model.get("regime")
    branch = model.get("branch")
    base_kwargs = {
        k: float(model.get(k, 0.0))
        for k in ("epsilon", "g1", "g2", "Delta1", "Delta2")
    }
    if "epsilon" not in model:
        raise ConfigError("[model] must set epsilon")
    if has_x and regime is not None:
        raise ConfigError("give either an explicit x or a regime, not both")

    if regime is None:
        params = ModelParams(x=float(model.get("x", 0.0)), **base_kwargs)
        descriptor = _match_descriptor_by_x(params)
        return params, None, None, descriptor

    catalog = resonance_catalog(ModelParams(x=0.0, **base_kwargs))
    if regime == "auto":
        ranked = sorted(
            catalog.descriptors,
            key=lambda d: {"pass": 0, "warn": 1, "fail": 2}[d.verdict],
        )
        best = [d for d in ranked if d.verdict == ranked[0].verdict] if ranked else []
        if len(best) != 1:
            names = ", ".join(f"{d.regime.value}:{d.branch or '-'}" for d in best)
            raise ConfigError(
                "regime = 'auto' is ambiguous for these parameters "
                f"(candidates: {names or 'none'}); name the regime explicitly"
            )
        chosen = best[0]
    else:
        try:
            rid = RegimeId(regime)
        except ValueError:
            raise ConfigError(
                f"unknown regime {regime!r}; valid: "
                + ", ".join(r.value for r in RegimeId)
            ) from None
        matches = catalog.find(rid, branch)
        if not matches:
            reasons = [o.reason for o in catalog.omitted if o.regime == rid]
            extra = f" ({reasons[0]})" if reasons else ""
            raise ConfigError(
                f"regime {regime}{'/' + branch if branch else ''} is not "
                f"applicable to these parameters{extra}"
            )
        if len(matches) > 1:
            branches = ", ".join(repr(d.branch) for d in matches)
            raise ConfigError(
                f"regime {regime} has several branches ({branches}); set branch"
            )
        chosen = matches[0]
    params = ModelParams(x=chosen.x, **base_kwargs)
    # re-derive the descriptor at the final x so its checks are exact
    final = resonance_catalog(params).find(chosen.regime, chosen.branch)
    return params, regime, chosen.branch or branch, final[0] if final else chosen


def _match_descriptor_by_x(params: ModelParams) -> RegimeDescriptor | None:
    """Best catalog descriptor whose resonance shift equals params.x."""
    catalog = resonance_catalog(params)
    order = {"pass": 0, "warn": 1, "fail": 2}
    matches = [
        d for d in catalog.descriptors
        if math.isclose(d.x, params.x, rel_tol=1e-9, abs_tol=1e-12)
    ]
    if not matches:
        return None
    return sorted(matches, key=lambda d: order[d.verdict])[0]


def _build_runspec(doc: dict, strict: bool) -> RunSpec:
    model = doc.get("model")
    if model is None:
        raise ConfigError("config must have a [model] section")
    _check_keys(model, MODEL_KEYS, "model", strict)
    run = doc.get("run", {})
    _check_keys(run, RUN_KEYS, "run", strict)
    ev = dict(doc.get("evolver", {}))
    _check_keys(ev, EVOLVER_KEYS, "evolver", strict)

    params, regime, branch, descriptor = _resolve_regime(model)

    n_max = int(ev.pop("n_max", DEFAULT_N_MAX))
    try:
        options = EvolverOptions(**ev)
    except (TypeError, ValueError) as e:
        raise ConfigError(f"invalid [evolver] options: {e}") from e

    eps_t_final = run.get("eps_t_final")
    t_final = run.get("t_final")
    if (eps_t_final is None) == (t_final is None):
        raise ConfigError("[run] must set exactly one of eps_t_final or t_final")
    if eps_t_final is not None:
        if params.epsilon == 0.0:
            raise ConfigError("eps_t_final needs epsilon != 0; use t_final")
        t_final = float(eps_t_final) / abs(params.epsilon)

    if "initial_state" in run:
        initial = _parse_initial_state(run["initial_state"])
    elif descriptor is not None:
        initial = descriptor.initial_state
    else:
        initial = ("g", "g", 0)

    return RunSpec(
        params=params,
        n_max=n_max,
        evolver=options,
        initial_state=initial,
        t_final=float(t_final),
        eps_t_final=None if eps_t_final is None else float(eps_t_final),
        regime=regime,
        branch=branch,
        comparison=run.get("comparison", "numeric"),
        out=run.get("out"),
        regime_descriptor=descriptor,
    )


def parse_config(path: str, strict: bool = False) -> RunSpec | SweepSpec:
    """Parse and validate a TOML config file into a Run- or SweepSpec."""
    try:
        with open(path, "rb") as f:
            doc = tomllib.load(f)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"TOML parse error in {path}: {e}") from e
    if not doc:
        raise ConfigError(f"config file {path} is empty")
    known_sections = ("model", "evolver", "run", "sweep")
    _check_keys(doc, known_sections, "<top level>", strict)

    base = _build_runspec(doc, strict)
    if "sweep" not in doc:
        return base
    sw = dict(doc["sweep"])
    _check_keys(sw, SWEEP_KEYS, "sweep", strict)
    grid = {k: list(map(float, v)) for k, v in dict(sw.get("grid", {})).items()}
    return SweepSpec(
        base=base,
        grid=grid,
        budget_seconds=sw.get("budget_seconds"),
        workers=sw.get("workers"),
    )


def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (int,)):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {v!r}")


def serialize_config(spec: RunSpec | SweepSpec) -> str:
    """Render a spec back to TOML; parse(serialize(spec)) == spec."""
    sweep = None
    if isinstance(spec, SweepSpec):
        sweep, run = spec, spec.base
    else:
        run = spec

    out = io.StringIO()
    out.write("[model]\n")
    out.write(f"epsilon = {_toml_value(run.params.epsilon)}\n")
    if run.regime is not None:
        out.write(f"regime = {_toml_value(run.regime)}\n")
        if run.branch:
            out.write(f"branch = {_toml_value(run.branch)}\n")
    else:
        out.write(f"x = {_toml_value(run.params.x)}\n")
    for k in ("g1", "g2", "Delta1", "Delta2"):
        out.write(f"{k} = {_toml_value(getattr(run.params, k))}\n")

    out.write("\n[evolver]\n")
    out.write(f"n_max = {run.n_max}\n")
    defaults = EvolverOptions()
    for f_ in fields(EvolverOptions):
        v = getattr(run.evolver, f_.name)
        if v != getattr(defaults, f_.name):
            out.write(f"{f_.name} = {_toml_value(v)}\n")

    out.write("\n[run]\n")
    s1, s2, m = run.initial_state
    out.write(f'initial_state = "{s1}{s2}{m}"\n')
    if run.eps_t_final is not None:
        out.write(f"eps_t_final = {_toml_value(run.eps_t_final)}\n")
    else:
        out.write(f"t_final = {_toml_value(run.t_final)}\n")
    out.write(f"comparison = {_toml_value(run.comparison)}\n")
    if run.out is not None:
        out.write(f"out = {_toml_value(run.out)}\n")

    if sweep is not None:
        out.write("\n[sweep]\n")
        if sweep.budget_seconds is not None:
            out.write(f"budget_seconds = {_toml_value(sweep.budget_seconds)}\n")
        if sweep.workers is not None:
            out.write(f"workers = {sweep.workers}\n")
        out.write("[sweep.grid]\n")
        for name, values in sweep.grid.items():
            out.write(f"{name} = {_toml_value(values)}\n")
    return out.getvalue()
