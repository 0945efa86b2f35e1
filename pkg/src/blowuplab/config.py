"""JSON experiment configuration: schema validation and plan construction.

One JSON document per experiment with top-level sections {domain, grid,
reaction, convection, sigma, initial, policy, experiment}; only domain is
required, everything else has defaults. Unknown or malformed keys are
rejected with the dotted path of the offending key. parse_config normalizes
the document (defaults filled in, scalars broadcast) so that equal
configurations serialize identically; config_digest hashes that normal form
minus the output-path and worker-count fields, making result digests stable
under key reordering and relocation.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass

from .errors import ConfigError
from .grid import Domain, Grid, build_grid
from .problem import (
    ConvectionComponent,
    ConvectionSpec,
    InitialDataSpec,
    ProblemSpec,
    ReactionSpec,
    SigmaSpec,
)
from .solver import StepPolicy

_TOP_KEYS = {"domain", "grid", "reaction", "convection", "sigma", "initial",
             "policy", "experiment"}
_POLICY_KEYS = {"t_horizon", "cfl_safety", "dt_min", "dt_max", "blowup_threshold",
                "snapshot_stride", "snapshot_times", "record_last", "max_steps",
                "workers"}
_VERIFY_KINDS = {"bounds", "rates", "supersolution", "subsolution"}


def _object(value, path):
    if not isinstance(value, dict):
        raise ConfigError(f"{path}: expected an object")
    return value


def _known_keys(obj, path, allowed):
    for key in obj:
        where = f"{path}.{key}" if path else key
        if key not in allowed:
            raise ConfigError(f"unknown key {where}")


def _number(obj, key, path, *, positive=False, nonnegative=False):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: missing required key")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ConfigError(f"{path}.{key}: expected a finite number, got {v!r}")
    v = float(v)
    if positive and v <= 0.0:
        raise ConfigError(f"{path}.{key}: must be positive, got {v:g}")
    if nonnegative and v < 0.0:
        raise ConfigError(f"{path}.{key}: must be nonnegative, got {v:g}")
    return v


def _integer(obj, key, path, *, minimum=None):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: missing required key")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(f"{path}.{key}: expected an integer, got {v!r}")
    if minimum is not None and v < minimum:
        raise ConfigError(f"{path}.{key}: must be >= {minimum}, got {v}")
    return v


def _string(obj, key, path, allowed=None):
    if key not in obj:
        raise ConfigError(f"{path}.{key}: missing required key")
    v = obj[key]
    if not isinstance(v, str):
        raise ConfigError(f"{path}.{key}: expected a string, got {v!r}")
    if allowed is not None and v not in allowed:
        raise ConfigError(
            f"{path}.{key}: expected one of {sorted(allowed)}, got {v!r}"
        )
    return v


def _number_list(value, path, *, length=None, minimum_len=1):
    if not isinstance(value, list):
        raise ConfigError(f"{path}: expected a list of numbers")
    out = []
    for i, v in enumerate(value):
        if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
            raise ConfigError(f"{path}[{i}]: expected a finite number, got {v!r}")
        out.append(float(v))
    if length is not None and len(out) != length:
        raise ConfigError(f"{path}: expected exactly {length} entries, got {len(out)}")
    if len(out) < minimum_len:
        raise ConfigError(f"{path}: list must not be empty")
    return out


def _norm_domain(raw):
    obj = _object(raw, "domain")
    _known_keys(obj, "domain", {"bounds"})
    if "bounds" not in obj:
        raise ConfigError("domain.bounds: missing required key")
    bounds = obj["bounds"]
    if not isinstance(bounds, list) or not 1 <= len(bounds) <= 2:
        raise ConfigError("domain.bounds: expected a list of 1 or 2 [lo, hi] pairs")
    pairs = []
    for i, pair in enumerate(bounds):
        vals = _number_list(pair, f"domain.bounds[{i}]", length=2)
        if not vals[0] < vals[1]:
            raise ConfigError(f"domain.bounds[{i}]: need lo < hi, got {vals}")
        pairs.append(vals)
    return {"bounds": pairs}


def _norm_grid(raw, dim):
    if raw is None:
        return {"n": [101] * dim}
    obj = _object(raw, "grid")
    _known_keys(obj, "grid", {"n"})
    if "n" not in obj:
        raise ConfigError("grid.n: missing required key")
    n = obj["n"]
    if isinstance(n, int) and not isinstance(n, bool):
        ns = [n] * dim
    elif isinstance(n, list):
        ns = [v for v in n]
        if len(ns) != dim:
            raise ConfigError(f"grid.n: expected {dim} entries for this domain, got {len(ns)}")
        for i, v in enumerate(ns):
            if isinstance(v, bool) or not isinstance(v, int):
                raise ConfigError(f"grid.n[{i}]: expected an integer, got {v!r}")
    else:
        raise ConfigError(f"grid.n: expected an integer or list, got {n!r}")
    for v in ns:
        if v < 3:
            raise ConfigError(f"grid.n: every axis needs at least 3 nodes, got {v}")
    return {"n": ns}


def _norm_reaction(raw):
    if raw is None:
        return {"kind": "zero"}
    obj = _object(raw, "reaction")
    kind = _string(obj, "kind", "reaction",
                   allowed={"zero", "power", "exponential", "log_linear"})
    if kind in ("zero", "log_linear"):
        _known_keys(obj, "reaction", {"kind"})
        return {"kind": kind}
    _known_keys(obj, "reaction", {"kind", "p"})
    p = _number(obj, "p", "reaction", positive=True)
    if kind == "power" and p <= 1.0:
        raise ConfigError(f"reaction.p: power reaction needs p > 1, got {p:g}")
    return {"kind": kind, "p": p}


def _norm_convection(raw, dim):
    if raw is None:
        return {"kind": "zero"}
    obj = _object(raw, "convection")
    kind = _string(obj, "kind", "convection",
                   allowed={"zero", "power", "exponential"})
    if kind == "zero":
        _known_keys(obj, "convection", {"kind"})
        return {"kind": "zero"}
    _known_keys(obj, "convection", {"kind", "alpha", "q"})

    def axis_values(key, nonnegative):
        if key not in obj:
            raise ConfigError(f"convection.{key}: missing required key")
        v = obj[key]
        if isinstance(v, list):
            vals = _number_list(v, f"convection.{key}", length=dim)
        else:
            vals = [_number(obj, key, "convection")] * dim
        for i, x in enumerate(vals):
            if nonnegative and x < 0.0:
                raise ConfigError(f"convection.{key}[{i}]: must be nonnegative, got {x:g}")
        return vals

    alphas = axis_values("alpha", nonnegative=False)
    qs = axis_values("q", nonnegative=True)
    return {"kind": kind, "alpha": alphas, "q": qs}


def _norm_sigma(raw):
    if raw is None:
        return {"kind": "neumann"}
    obj = _object(raw, "sigma")
    kind = _string(obj, "kind", "sigma", allowed={"dynamical", "neumann", "dirichlet"})
    if kind in ("neumann", "dirichlet"):
        _known_keys(obj, "sigma", {"kind"})
        return {"kind": kind}
    _known_keys(obj, "sigma", {"kind", "value", "values"})
    if "values" in obj:
        vals = _number_list(obj["values"], "sigma.values")
        for i, v in enumerate(vals):
            if v <= 0.0:
                raise ConfigError(f"sigma.values[{i}]: must be positive, got {v:g}")
        return {"kind": "dynamical", "values": vals}
    value = _number(obj, "value", "sigma", positive=True)
    return {"kind": "dynamical", "value": value}


def _norm_initial(raw, dim, n_nodes):
    if raw is None:
        return {"kind": "constant", "value": 1.0}
    obj = _object(raw, "initial")
    kind = _string(obj, "kind", "initial",
                   allowed={"constant", "gaussian_bump", "tabulated"})
    if kind == "constant":
        _known_keys(obj, "initial", {"kind", "value"})
        return {"kind": kind, "value": _number(obj, "value", "initial", nonnegative=True)}
    if kind == "gaussian_bump":
        _known_keys(obj, "initial", {"kind", "center", "amplitude", "width"})
        if "center" not in obj:
            raise ConfigError("initial.center: missing required key")
        center = _number_list(obj["center"], "initial.center", length=dim)
        amplitude = _number(obj, "amplitude", "initial", positive=True)
        width = _number(obj, "width", "initial", positive=True)
        return {"kind": kind, "center": center, "amplitude": amplitude, "width": width}
    _known_keys(obj, "initial", {"kind", "values"})
    if "values" not in obj:
        raise ConfigError("initial.values: missing required key")
    values = _number_list(obj["values"], "initial.values")
    if len(values) != n_nodes:
        raise ConfigError(
            f"initial.values: expected {n_nodes} entries for this grid, got {len(values)}"
        )
    return {"kind": kind, "values": values}


def _norm_policy(raw):
    defaults = StepPolicy()
    norm = {
        "t_horizon": defaults.t_horizon,
        "cfl_safety": defaults.cfl_safety,
        "dt_min": defaults.dt_min,
        "dt_max": defaults.dt_max,
        "blowup_threshold": defaults.blowup_threshold,
        "snapshot_stride": defaults.snapshot_stride,
        "snapshot_times": [],
        "record_last": defaults.record_last,
        "max_steps": defaults.max_steps,
        "workers": os.cpu_count() or 1,
    }
    if raw is None:
        return norm
    obj = _object(raw, "policy")
    _known_keys(obj, "policy", _POLICY_KEYS)
    for key in ("t_horizon", "cfl_safety", "dt_min", "dt_max", "blowup_threshold"):
        if key in obj:
            norm[key] = _number(obj, key, "policy", positive=True)
    for key in ("snapshot_stride", "record_last", "max_steps", "workers"):
        if key in obj:
            norm[key] = _integer(obj, key, "policy", minimum=1)
    if "snapshot_times" in obj:
        times = _number_list(obj["snapshot_times"], "policy.snapshot_times",
                             minimum_len=0)
        for i, t in enumerate(times):
            if t < 0.0 or t > norm["t_horizon"]:
                raise ConfigError(
                    f"policy.snapshot_times[{i}]: must lie in [0, t_horizon], got {t:g}"
                )
        norm["snapshot_times"] = sorted(set(times))
    return norm


def _norm_experiment(raw, norm_reaction, norm_convection):
    if raw is None:
        return {"kind": "solve", "output_dir": "results"}
    obj = _object(raw, "experiment")
    kind = _string(obj, "kind", "experiment",
                   allowed={"solve", "sweep", "compare", "verify"})
    out = {"kind": kind}

    if kind == "solve":
        _known_keys(obj, "experiment", {"kind", "output_dir"})
    elif kind == "sweep":
        _known_keys(obj, "experiment", {"kind", "output_dir", "p", "q", "alpha", "sigma"})
        axes = {}
        for axis in ("p", "q", "alpha", "sigma"):
            if axis in obj:
                vals = _number_list(obj[axis], f"experiment.{axis}")
                axes[axis] = vals
        if not axes:
            raise ConfigError("experiment: sweep needs at least one of p, q, alpha, sigma")
        if "p" in axes and norm_reaction["kind"] not in ("power", "exponential"):
            raise ConfigError(
                f"experiment.p: reaction kind {norm_reaction['kind']} has no exponent to sweep"
            )
        if ("q" in axes or "alpha" in axes) and norm_convection["kind"] == "zero":
            raise ConfigError(
                "experiment: sweeping q or alpha needs a non-zero convection section"
            )
        for i, v in enumerate(axes.get("sigma", ())):
            if v <= 0.0:
                raise ConfigError(f"experiment.sigma[{i}]: must be positive, got {v:g}")
        for i, v in enumerate(axes.get("q", ())):
            if v < 0.0:
                raise ConfigError(f"experiment.q[{i}]: must be nonnegative, got {v:g}")
        p_floor = 1.0 if norm_reaction["kind"] == "power" else 0.0
        for i, v in enumerate(axes.get("p", ())):
            if v <= p_floor:
                raise ConfigError(
                    f"experiment.p[{i}]: must be > {p_floor:g} for a "
                    f"{norm_reaction['kind']} reaction, got {v:g}"
                )
        out.update(axes)
    elif kind == "compare":
        _known_keys(obj, "experiment", {"kind", "output_dir", "variants"})
        if "variants" not in obj or not isinstance(obj["variants"], list):
            raise ConfigError("experiment.variants: expected a list of section patches")
        if len(obj["variants"]) != 2:
            raise ConfigError(
                f"experiment.variants: expected exactly 2 variants, got {len(obj['variants'])}"
            )
        variants = []
        for i, patch in enumerate(obj["variants"]):
            p = _object(patch, f"experiment.variants[{i}]")
            _known_keys(p, f"experiment.variants[{i}]",
                        _TOP_KEYS - {"domain", "grid", "experiment"})
            variants.append(p)
        out["variants"] = variants
    else:  # verify
        which = _string(obj, "which", "experiment", allowed=_VERIFY_KINDS)
        out["which"] = which
        if which == "bounds":
            _known_keys(obj, "experiment",
                        {"kind", "which", "output_dir", "q", "alpha", "omega_max"})
            out["q"] = _number(obj, "q", "experiment", positive=True)
            if "alpha" in obj:
                out["alpha"] = _number(obj, "alpha", "experiment", positive=True)
            if "omega_max" in obj:
                out["omega_max"] = _number(obj, "omega_max", "experiment", positive=True)
        elif which == "rates":
            _known_keys(obj, "experiment", {"kind", "which", "output_dir"})
        elif which == "supersolution":
            _known_keys(obj, "experiment",
                        {"kind", "which", "output_dir", "axis", "c_conv", "t_samples"})
            out["c_conv"] = _number(obj, "c_conv", "experiment", positive=True)
            out["axis"] = _integer(obj, "axis", "experiment", minimum=0) if "axis" in obj else 0
            if "t_samples" in obj:
                out["t_samples"] = _number_list(obj["t_samples"], "experiment.t_samples")
        else:  # subsolution
            _known_keys(obj, "experiment",
                        {"kind", "which", "output_dir", "q", "c_g", "n_times",
                         "t_max_frac"})
            out["q"] = _number(obj, "q", "experiment", nonnegative=True)
            if "c_g" in obj:
                out["c_g"] = _number(obj, "c_g", "experiment", nonnegative=True)
            out["n_times"] = _integer(obj, "n_times", "experiment", minimum=1) \
                if "n_times" in obj else 20
            out["t_max_frac"] = _number(obj, "t_max_frac", "experiment", positive=True) \
                if "t_max_frac" in obj else 0.9

    if "output_dir" in obj:
        if not isinstance(obj["output_dir"], str) or not obj["output_dir"]:
            raise ConfigError("experiment.output_dir: expected a non-empty string")
        out["output_dir"] = obj["output_dir"]
    else:
        out["output_dir"] = "results"
    return out


def normalize_config(doc: dict) -> dict:
    """Validate a parsed JSON document and fill in every default."""
    obj = _object(doc, "")
    _known_keys(obj, "", _TOP_KEYS)
    if "domain" not in obj:
        raise ConfigError("domain: missing required section")
    domain = _norm_domain(obj["domain"])
    dim = len(domain["bounds"])
    grid = _norm_grid(obj.get("grid"), dim)
    n_nodes = 1
    for n in grid["n"]:
        n_nodes *= n
    reaction = _norm_reaction(obj.get("reaction"))
    convection = _norm_convection(obj.get("convection"), dim)
    sigma = _norm_sigma(obj.get("sigma"))
    initial = _norm_initial(obj.get("initial"), dim, n_nodes)
    policy = _norm_policy(obj.get("policy"))
    experiment = _norm_experiment(obj.get("experiment"), reaction, convection)
    if sigma.get("values") is not None:
        # per-node sigma lists must match the boundary node count
        n_boundary = 2 if dim == 1 else 2 * (grid["n"][0] + grid["n"][1]) - 4
        if len(sigma["values"]) != n_boundary:
            raise ConfigError(
                f"sigma.values: expected {n_boundary} boundary entries for this grid, "
                f"got {len(sigma['values'])}"
            )
    return {
        "domain": domain, "grid": grid, "reaction": reaction,
        "convection": convection, "sigma": sigma, "initial": initial,
        "policy": policy, "experiment": experiment,
    }


def config_digest(norm: dict) -> str:
    """Stable digest of a normalized config, ignoring output paths and workers."""
    slim = json.loads(json.dumps(norm))
    slim["experiment"].pop("output_dir", None)
    slim["policy"].pop("workers", None)
    blob = json.dumps(slim, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


@dataclass(frozen=True)
class ExperimentPlan:
    """Validated configuration with constructed problem objects."""

    norm: dict
    problem: ProblemSpec
    grid: Grid
    policy: StepPolicy
    kind: str
    experiment: dict
    output_dir: str

    @property
    def digest(self) -> str:
        return config_digest(self.norm)


def build_problem(norm: dict) -> ProblemSpec:
    """Construct the ProblemSpec described by a normalized config."""
    r = norm["reaction"]
    if r["kind"] == "power":
        reaction = ReactionSpec.power(r["p"])
    elif r["kind"] == "exponential":
        reaction = ReactionSpec.exponential(r["p"])
    elif r["kind"] == "log_linear":
        reaction = ReactionSpec.log_linear()
    else:
        reaction = ReactionSpec.zero()

    dim = len(norm["domain"]["bounds"])
    c = norm["convection"]
    if c["kind"] == "zero":
        convection = ConvectionSpec.zero(dim)
    else:
        comps = tuple(
            ConvectionComponent(c["kind"], c["alpha"][i], c["q"][i])
            for i in range(dim)
        )
        convection = ConvectionSpec(comps)

    s = norm["sigma"]
    if s["kind"] == "dynamical":
        if "values" in s:
            sigma = SigmaSpec.dynamical(values=tuple(s["values"]))
        else:
            sigma = SigmaSpec.dynamical(value=s["value"])
    elif s["kind"] == "neumann":
        sigma = SigmaSpec.neumann()
    else:
        sigma = SigmaSpec.dirichlet()

    i = norm["initial"]
    if i["kind"] == "constant":
        initial = InitialDataSpec.constant(i["value"])
    elif i["kind"] == "gaussian_bump":
        initial = InitialDataSpec.gaussian_bump(tuple(i["center"]), i["amplitude"],
                                                i["width"])
    else:
        initial = InitialDataSpec.tabulated(tuple(i["values"]))

    bounds = norm["domain"]["bounds"]
    if dim == 1:
        domain = Domain.interval(bounds[0][0], bounds[0][1])
    else:
        domain = Domain.rectangle(bounds[0][0], bounds[0][1], bounds[1][0], bounds[1][1])
    return ProblemSpec(domain, reaction, convection, sigma, initial)


def build_plan(norm: dict) -> ExperimentPlan:
    """Assemble the plan objects from a normalized config."""
    problem = build_problem(norm)
    grid = build_grid(problem.domain, norm["grid"]["n"])
    p = norm["policy"]
    policy = StepPolicy(
        t_horizon=p["t_horizon"], cfl_safety=p["cfl_safety"], dt_min=p["dt_min"],
        dt_max=p["dt_max"], blowup_threshold=p["blowup_threshold"],
        snapshot_stride=p["snapshot_stride"],
        snapshot_times=tuple(p["snapshot_times"]), record_last=p["record_last"],
        max_steps=p["max_steps"], workers=p["workers"],
    )
    exp = norm["experiment"]
    return ExperimentPlan(
        norm=norm, problem=problem, grid=grid, policy=policy,
        kind=exp["kind"], experiment=exp, output_dir=exp["output_dir"],
    )


def parse_config(text: str) -> ExperimentPlan:
    """Parse and validate a JSON config document into an ExperimentPlan."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from e
    return build_plan(normalize_config(doc))


def load_config(path: str) -> ExperimentPlan:
    """parse_config on the contents of a file."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e}") from e
    return parse_config(text)
