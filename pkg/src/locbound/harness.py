"""Experiment configs, dispatch, and deterministic CSV/JSON output.

A config is a JSON object::

    {"model": {...}, "profile": {...}, "experiment": {"kind": "lr-sweep", ...},
     "seed": 0, "output": {"dir": "out"}}

Every run writes ``<stem>.csv`` and ``<stem>.meta.json`` (plus
``<stem>.run.json`` for ``lsm-run``).  Outputs carry no timestamps or paths,
so the same config and seed give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
import platform
import tempfile
from dataclasses import dataclass, field
from typing import Annotated, Any, Literal, Union

import numpy as np
import scipy
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from . import __version__
from .clustering import (
    DEGENERACY_TOL,
    centered,
    gaussian_kernel_identity,
    spectral_gap,
    verify_clustering,
)
from .errors import BoundViolated, ConfigValidationError, IoError, LocboundError, ParseError
from .interaction import (
    Interaction,
    SpinModel,
    SpinModelSpec,
    assemble_hamiltonian,
    heisenberg_preset,
    interaction_norm_a,
    spin_component,
)
from .locality import (
    ATOL,
    F_NORM_CONVENTION,
    analytic_constants,
    localization_error_check,
    lr_empirical_sweep,
    lr_velocity,
    multi_commutator_check,
    neel_state,
    product_state_correlation_check,
    series_coefficient_check,
    truncation_error_check,
)
from .lsm import (
    HastingsParams,
    TwistSpec,
    eigenvalue_scan,
    exact_generator,
    fixed_phase,
    ground_state,
    hastings_solve,
    twist_derivative,
    twisted_hamiltonian,
)
from .metric_space import DecayProfile, Geometry, convolution_constant, pair_sum_norm
from .quantum import ObservableWithSupport, spectral_decompose

KINDS = ("constants", "lr-sweep", "series-check", "localize", "truncate", "product-corr",
         "multi-comm", "cluster", "kernel-identity", "lsm-scan", "lsm-run")

FINITE_VOLUME_NOTE = ("gap and correlations are those of the finite simulated volume; "
                      "analytic constants depend only on the site space and interaction")


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid")


class Grid(_Strict):
    """``num`` evenly spaced points from ``start`` to ``stop`` (times pi if ``in_units_of_pi``)."""

    start: float
    stop: float
    num: int = Field(ge=1)
    in_units_of_pi: bool = False

    def values(self) -> list[float]:
        pts = np.linspace(self.start, self.stop, self.num)
        return [float(x) for x in (pts * math.pi if self.in_units_of_pi else pts)]


GridLike = Union[list[float], Grid]


def grid_values(g: GridLike) -> list[float]:
    return g.values() if isinstance(g, Grid) else [float(x) for x in g]


class GeometryConfig(_Strict):
    kind: Literal["path", "ring", "grid", "torus-row"]
    size: list[int] = Field(min_length=1, max_length=2)


class TermConfig(_Strict):
    """Explicit interaction term: block entries row-major as ``[re, im]`` pairs."""

    support: list[int] = Field(min_length=1)
    entries: list[tuple[float, float]]


class TwistConfig(_Strict):
    m: int = 0
    theta: float = 0.0
    theta_prime: float = 0.0


class ModelConfig(_Strict):
    geometry: GeometryConfig
    spin: float = 0.5
    coupling: float = 1.0
    staggered_field: float = 0.0
    preset: Literal["heisenberg", "none"] = "heisenberg"
    terms: list[TermConfig] = []
    distance_table: list[list[float]] | None = None
    twist: TwistConfig | None = None
    dense_cap: int = Field(default=2**14, ge=1)

    @model_validator(mode="after")
    def _check(self):
        if abs(2 * self.spin - round(2 * self.spin)) > 1e-12 or round(2 * self.spin) < 1:
            raise ValueError("2*spin must be a positive integer")
        if self.twist is not None:
            _require_even_periodic(self.geometry)
        return self


def _require_even_periodic(geom: GeometryConfig) -> None:
    if geom.kind not in ("ring", "torus-row"):
        raise ValueError("twists need a ring or torus-row geometry")
    if geom.size[0] % 2:
        raise ValueError("L must be even")


class ProfileConfig(_Strict):
    kind: Literal["power", "exponential"] = "power"
    param: float = Field(default=2.0, ge=0)
    rates: list[float] = Field(default=[1.0], min_length=1)


class ObservableConfig(_Strict):
    """``{"site": x, "op": "S3"}`` or an explicit ``{"support": [...], "entries": [...]}``."""

    site: int | None = None
    op: Literal["S1", "S2", "S3", "identity"] = "S3"
    support: list[int] | None = None
    entries: list[tuple[float, float]] | None = None

    @model_validator(mode="after")
    def _check(self):
        explicit = self.support is not None or self.entries is not None
        if (self.site is None) == (not explicit):
            if self.site is None:
                raise ValueError("observable needs either 'site' or 'support' with 'entries'")
            raise ValueError("give either 'site' or 'support'/'entries', not both")
        if explicit and (self.support is None or self.entries is None):
            raise ValueError("explicit observables need both 'support' and 'entries'")
        return self


class TimedObservable(ObservableConfig):
    t: float = 0.0


class ConstantsParams(_Strict):
    kind: Literal["constants"]


class LRSweepParams(_Strict):
    kind: Literal["lr-sweep"]
    A: ObservableConfig
    B: list[ObservableConfig] = Field(min_length=1)
    t_grid: GridLike = Grid(start=0, stop=2, num=21)


class SeriesParams(_Strict):
    kind: Literal["series-check"]
    X: list[int] = Field(min_length=1)
    Y: list[int] = Field(min_length=1)
    orders: list[int] = [1, 2]
    cap: int = 10**6


class LocalizeParams(_Strict):
    kind: Literal["localize"]
    A: ObservableConfig
    times: GridLike
    eps: list[float] = [1.0, 2.0, 3.0]


class TruncateParams(_Strict):
    kind: Literal["truncate"]
    A: ObservableConfig
    horizon: float = Field(gt=0)
    eps: list[float] = [1.0, 2.0, 3.0]
    t_grid: GridLike
    quad_tol: float = 1e-8


class ProductCorrParams(_Strict):
    kind: Literal["product-corr"]
    A: ObservableConfig
    B: ObservableConfig
    state: Union[Literal["neel"], list[list[tuple[float, float]]]] = "neel"
    t_grid: GridLike = Grid(start=0, stop=1, num=11)


class MultiCommParams(_Strict):
    kind: Literal["multi-comm"]
    ops: list[TimedObservable] = Field(min_length=3, max_length=3)
    eps: float = Field(gt=0)


class ClusterParams(_Strict):
    kind: Literal["cluster"]
    A: list[ObservableConfig] = Field(min_length=1)
    B: list[ObservableConfig] = Field(min_length=1)
    b_grid: list[float] = [0.0]
    degeneracy_tol: float = DEGENERACY_TOL

    @model_validator(mode="after")
    def _check(self):
        if len(self.A) != len(self.B):
            raise ValueError("A and B must list the same number of observables")
        return self


class KernelParams(_Strict):
    kind: Literal["kernel-identity"]
    E: list[float]
    alpha: list[float]
    b: list[float]
    tol: float = 1e-8


class LsmScanParams(_Strict):
    kind: Literal["lsm-scan"]
    thetas: GridLike = Grid(start=0, stop=2, num=65, in_units_of_pi=True)
    k: int = Field(default=3, ge=1)
    m: int = 0
    theta_prime: float = 0.0
    method: Literal["auto", "dense", "sectors"] = "auto"
    degeneracy_tol: float = DEGENERACY_TOL


class LsmRunParams(_Strict):
    kind: Literal["lsm-run"]
    alpha: float | None = None
    t_cut: float | None = None
    theta_steps: int = Field(default=128, ge=1)
    quadrature_tol: float = 1e-10
    m: int = 0
    convergence_check: bool = True
    fd_theta: float = 0.3
    fd_step: float = 1e-3
    spectrum_samples: int = Field(default=9, ge=1)


Experiment = Annotated[
    Union[ConstantsParams, LRSweepParams, SeriesParams, LocalizeParams, TruncateParams,
          ProductCorrParams, MultiCommParams, ClusterParams, KernelParams, LsmScanParams,
          LsmRunParams],
    Field(discriminator="kind"),
]


class OutputConfig(_Strict):
    dir: str = "out"
    stem: str | None = None


class ExperimentConfig(_Strict):
    model: ModelConfig | None = None
    profile: ProfileConfig = ProfileConfig()
    experiment: Experiment
    seed: int = Field(default=0, ge=0, lt=2**64)
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _check(self):
        kind = self.experiment.kind
        if kind != "kernel-identity" and self.model is None:
            raise ValueError(f"experiment {kind!r} needs a model")
        if kind in ("lsm-scan", "lsm-run"):
            _require_even_periodic(self.model.geometry)
            if self.model.preset != "heisenberg" or self.model.terms:
                raise ValueError("lsm experiments use the Heisenberg preset without extra terms")
        return self

    @property
    def kind(self) -> str:
        return self.experiment.kind

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), sort_keys=True, indent=2)


def _format_errors(err: ValidationError) -> list[str]:
    out = []
    for e in err.errors():
        loc = ".".join(str(p) for p in e["loc"]) or "<root>"
        out.append(f"{loc}: {e['msg']}")
    return out


def parse_config(text: str, kind: str | None = None) -> ExperimentConfig:
    """Parse JSON text into a validated config.

    ``kind`` fills ``experiment.kind`` when the config omits it and must agree
    with it otherwise.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}",
                         line=e.lineno) from e
    if not isinstance(data, dict):
        raise ParseError("config must be a JSON object", line=1)
    if kind is not None:
        exp = data.get("experiment")
        if exp is None:
            data["experiment"] = {"kind": kind}
        elif isinstance(exp, dict):
            if "kind" not in exp:
                exp["kind"] = kind
            elif exp["kind"] != kind:
                raise ConfigValidationError(
                    [f"experiment.kind: config says {exp['kind']!r} but {kind!r} was requested"])
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigValidationError(_format_errors(e)) from None


# ---------------------------------------------------------------- output


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "nan" if math.isnan(v) else f"{v:.17g}"
    if isinstance(v, str):
        return v
    if isinstance(v, (tuple, list)):
        return "-".join(_cell(x) for x in v)
    raise TypeError(f"cannot write {type(v).__name__} to a table cell")


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    try:
        os.makedirs(directory, exist_ok=True)
        fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
        try:
            with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
                fh.flush()
                os.fsync(fh.fileno())
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
    except OSError as e:
        raise IoError(f"could not write {path}: {e}") from e


def emit_table(rows, schema: list[str], path: str) -> None:
    """Write ``rows`` (dicts keyed by ``schema`` or sequences in schema order) as CSV.

    Floats use 17 significant digits, lines end in LF, and the header is
    always written.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(schema)
    for row in rows:
        if isinstance(row, dict):
            if set(row) != set(schema):
                raise ValueError(f"row keys {sorted(row)} do not match schema {schema}")
            values = [row[c] for c in schema]
        else:
            values = list(row)
            if len(values) != len(schema):
                raise ValueError(f"row has {len(values)} cells, schema has {len(schema)}")
        writer.writerow([_cell(v) for v in values])
    _atomic_write(path, buf.getvalue())


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return None if not math.isfinite(v) else v
    if isinstance(obj, (complex, np.complexfloating)):
        return [_jsonable(obj.real), _jsonable(obj.imag)]
    if obj is None or isinstance(obj, str):
        return obj
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def write_json(obj, path: str) -> None:
    _atomic_write(path, json.dumps(_jsonable(obj), sort_keys=True, indent=2, allow_nan=False) + "\n")


# ---------------------------------------------------------------- building blocks


def build_spec(mc: ModelConfig) -> SpinModelSpec:
    table = None if mc.distance_table is None else np.asarray(mc.distance_table, dtype=float)
    return SpinModelSpec(Geometry(mc.geometry.kind, tuple(mc.geometry.size)), spin=mc.spin,
                         coupling=mc.coupling, staggered_field=mc.staggered_field,
                         distance_table=table)


def _matrix(entries, support, space) -> np.ndarray:
    d = space.dim(support)
    flat = np.array([complex(re, im) for re, im in entries])
    if flat.size != d * d:
        raise ConfigValidationError([f"block on {support} needs {d * d} entries, got {flat.size}"])
    return flat.reshape(d, d)


def build_interaction(mc: ModelConfig, spec: SpinModelSpec) -> Interaction:
    space = spec.space
    if mc.twist is not None:
        tw = TwistSpec(spec.geometry.length, mc.twist.m, mc.twist.theta, mc.twist.theta_prime)
        phi = twisted_hamiltonian(spec, tw)
    elif mc.preset == "heisenberg":
        phi = heisenberg_preset(spec)
    else:
        phi = Interaction([], space)
    if mc.terms:
        extra = Interaction([(t.support, _matrix(t.entries, t.support, space)) for t in mc.terms], space)
        phi = phi + extra
    return phi


def build_observable(oc: ObservableConfig, space) -> ObservableWithSupport:
    if oc.site is not None:
        if not 0 <= oc.site < space.size:
            raise ConfigValidationError([f"observable site {oc.site} outside the lattice"])
        if oc.op == "identity":
            return ObservableWithSupport((oc.site,), np.eye(space.local_dims[oc.site]))
        return spin_component(space, oc.site, int(oc.op[1]))
    obs = ObservableWithSupport(tuple(oc.support), _matrix(oc.entries, oc.support, space))
    obs.check(space)
    return obs


def _profiles(pc: ProfileConfig) -> list[DecayProfile]:
    return [DecayProfile(pc.kind, pc.param, float(a)) for a in pc.rates]


def _tag(obs: ObservableWithSupport) -> str:
    return "+".join(str(x) for x in obs.support)


# ---------------------------------------------------------------- experiments


@dataclass
class Outcome:
    schema: list[str]
    rows: list
    meta: dict = field(default_factory=dict)
    violations: list[str] = field(default_factory=list)
    extra_json: dict | None = None


def _setup(cfg: ExperimentConfig, need_model: bool = True):
    spec = build_spec(cfg.model)
    phi = build_interaction(cfg.model, spec)
    model = SpinModel(phi, dense_cap=cfg.model.dense_cap) if need_model else None
    return spec, phi, model


def _run_constants(cfg: ExperimentConfig) -> Outcome:
    spec, phi, _ = _setup(cfg, need_model=False)
    space = spec.space
    rows = []
    for prof in _profiles(cfg.profile):
        c = analytic_constants(phi, space, prof)
        speed = 2 * c["phi_norm"] * c["conv"] / prof.rate if prof.rate > 0 else math.nan
        rows.append({"rate": prof.rate, "f_norm": c["f_norm"], "conv": c["conv"],
                     "phi_norm": c["phi_norm"], "lr_speed": speed})
    positive = [a for a in cfg.profile.rates if a > 0]
    meta = {"n_sites": space.size,
            "velocity": (lr_velocity(phi, space, _profiles(cfg.profile)[0], positive)
                         if positive else None)}
    return Outcome(["rate", "f_norm", "conv", "phi_norm", "lr_speed"], rows, meta)


def _run_lr_sweep(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, model = _setup(cfg)
    space = spec.space
    A = build_observable(p.A, space)
    schema = ["t", "empirical", "analytic", "ratio", "envelope", "rate", "x", "y"]
    rows, bad = [], []
    for bc in p.B:
        B = build_observable(bc, space)
        for r in lr_empirical_sweep(model, A, B, grid_values(p.t_grid), _profiles(cfg.profile),
                                    strict=False):
            rows.append({"t": r.time, "empirical": r.empirical, "analytic": r.analytic,
                         "ratio": r.ratio, "envelope": r.envelope, "rate": r.rate,
                         "x": _tag(A), "y": _tag(B)})
            if r.empirical > r.analytic + ATOL:
                bad.append(f"Lieb-Robinson: y={_tag(B)} a={r.rate} t={r.time}: "
                           f"{r.empirical:.6g} > {r.analytic:.6g}")
            if r.analytic > r.envelope * (1 + 1e-12) + ATOL:
                bad.append(f"envelope below bound at y={_tag(B)} a={r.rate} t={r.time}")
    finite = [row["ratio"] for row in rows if not math.isnan(row["ratio"])]
    meta = {"max_ratio": max(finite) if finite else None, "atol": ATOL,
            "bound_scaling": "analytic = ||A|| ||B|| x unit-norm bound"}
    return Outcome(schema, rows, meta, bad)


def _run_series(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, _ = _setup(cfg, need_model=False)
    rows, bad = [], []
    for prof in _profiles(cfg.profile):
        for n in p.orders:
            try:
                res = series_coefficient_check(phi, spec.space, prof, p.X, p.Y, n, p.cap)
            except BoundViolated as e:
                res = e.report
                bad.append(f"a_{n} at a={prof.rate}: {res.exact!r} > {res.bound!r}")
            rows.append({"n": n, "rate": prof.rate, "exact": res.exact, "bound": res.bound,
                         "chains": res.chains})
    return Outcome(["n", "rate", "exact", "bound", "chains"], rows, {"comparison": "exact <= bound"}, bad)


def _run_localize(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, model = _setup(cfg)
    A = build_observable(p.A, spec.space)
    rows, bad = [], []
    for prof in _profiles(cfg.profile):
        for eps in p.eps:
            for t in grid_values(p.times):
                r = localization_error_check(model, A, t, eps, prof, strict=False)
                rows.append({"t": r.time, "eps": r.eps, "rate": prof.rate, "empirical": r.empirical,
                             "analytic": r.analytic, "ball_size": len(r.ball), "vacuous": r.vacuous})
                if r.empirical > r.analytic + ATOL:
                    bad.append(f"localization: a={prof.rate} eps={eps} t={t}")
    return Outcome(["t", "eps", "rate", "empirical", "analytic", "ball_size", "vacuous"], rows,
                   {"atol": ATOL, "volume_size": len(model.volume)}, bad)


def _run_truncate(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, model = _setup(cfg)
    A = build_observable(p.A, spec.space)
    rows, bad = [], []
    for prof in _profiles(cfg.profile):
        for eps in p.eps:
            for r in truncation_error_check(model, A, p.horizon, eps, grid_values(p.t_grid), prof,
                                            quad_tol=p.quad_tol, strict=False):
                rows.append({"eps": eps, "rate": prof.rate, "t": r.time, "empirical": r.empirical,
                             "integral_bound": r.integral_bound, "analytic": r.analytic,
                             "ball_size": r.ball_size, "vacuous": r.vacuous})
                if r.empirical > r.analytic + ATOL:
                    bad.append(f"truncation analytic: a={prof.rate} eps={eps} t={r.time}")
                if r.empirical > r.integral_bound + 1e-6:
                    bad.append(f"truncation integral: a={prof.rate} eps={eps} t={r.time}")
    schema = ["eps", "rate", "t", "empirical", "integral_bound", "analytic", "ball_size", "vacuous"]
    return Outcome(schema, rows, {"quad_tol": p.quad_tol, "integral_slack": 1e-6, "atol": ATOL}, bad)


def _run_product_corr(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, model = _setup(cfg)
    A, B = build_observable(p.A, spec.space), build_observable(p.B, spec.space)
    if p.state == "neel":
        state = neel_state(model)
    else:
        state = [np.array([complex(re, im) for re, im in v]) for v in p.state]
    rows, bad = [], []
    for prof in _profiles(cfg.profile):
        for r in product_state_correlation_check(model, A, B, state, grid_values(p.t_grid), prof,
                                                 strict=False):
            rows.append({"t": r.time, "rate": prof.rate, "empirical": r.empirical, "analytic": r.analytic})
            if r.empirical > r.analytic + ATOL:
                bad.append(f"product-state correlation: a={prof.rate} t={r.time}")
    return Outcome(["t", "rate", "empirical", "analytic"], rows,
                   {"f_norm_convention": F_NORM_CONVENTION, "atol": ATOL}, bad)


def _run_multi_comm(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, model = _setup(cfg)
    timed = [(build_observable(o, spec.space), o.t) for o in p.ops]
    rows = []
    for prof in _profiles(cfg.profile):
        r = multi_commutator_check(model, *timed, p.eps, prof)
        rows.append({"rate": prof.rate, "eps": p.eps, "norm": r.norm,
                     "disjoint": r.quasi_supports_disjoint,
                     "ball_sizes": [len(b) for b in r.balls]})
    return Outcome(["rate", "eps", "norm", "disjoint", "ball_sizes"], rows,
                   {"note": "diagnostic only; no threshold asserted"})


def _run_cluster(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec, phi, model = _setup(cfg)
    space = spec.space
    As = [build_observable(o, space) for o in p.A]
    Bs = [build_observable(o, space) for o in p.B]
    sd = model.spectrum
    gap = spectral_gap(sd, p.degeneracy_tol)
    rows, bad = [], []
    for prof in _profiles(cfg.profile):
        for r in verify_clustering(model, As, Bs, p.b_grid, prof, p.degeneracy_tol, strict=False):
            rows.append({"pair": r.pair, "d": r.d, "b": r.b, "lhs_abs": r.lhs_abs, "mu": r.mu,
                         "C": r.C, "rhs": r.rhs, "trivial_bound": r.trivial_bound,
                         "in_range_flag": r.in_range, "rate": prof.rate})
            bound = r.rhs if r.in_range else r.trivial_bound
            if r.lhs_abs > bound + ATOL:
                bad.append(f"clustering: pair={r.pair} a={prof.rate} b={r.b}")
    omega = sd.eigenvectors[:, 0]
    worst = 0.0
    from .clustering import connected_correlation

    for A, B in zip(As, Bs):
        Af, Bf = model.embed(A), model.embed(B)
        direct = (np.vdot(omega, Af @ Bf @ omega)
                  - np.vdot(omega, Af @ omega) * np.vdot(omega, Bf @ omega))
        worst = max(worst, abs(connected_correlation(sd, omega, Af, Bf, 0.0, p.degeneracy_tol) - direct))
    if worst > 1e-10:
        bad.append(f"two-path b=0 disagreement {worst:.3g} > 1e-10")
    schema = ["pair", "d", "b", "lhs_abs", "mu", "C", "rhs", "trivial_bound", "in_range_flag", "rate"]
    meta = {"gap": gap.gap, "ground_energy": gap.ground_energy, "degeneracy": gap.degeneracy,
            "two_path_max_difference": worst, "finite_volume": FINITE_VOLUME_NOTE,
            "centering": "B is replaced by B - <B>; ||B - <B>|| enters both bounds", "atol": ATOL}
    return Outcome(schema, rows, meta, bad)


def _run_kernel(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    rows, bad = [], []
    for E, alpha, b in itertools.product(p.E, p.alpha, p.b):
        lhs, rhs = gaussian_kernel_identity(E, alpha, 1j * b)
        diff = abs(lhs - rhs)
        rows.append({"E": E, "alpha": alpha, "b": b, "lhs_re": lhs.real, "lhs_im": lhs.imag,
                     "rhs_re": rhs.real, "rhs_im": rhs.imag, "abs_diff": diff})
        if not diff < p.tol:
            bad.append(f"kernel identity: E={E} alpha={alpha} b={b}: |lhs-rhs|={diff:.3g}")
    schema = ["E", "alpha", "b", "lhs_re", "lhs_im", "rhs_re", "rhs_im", "abs_diff"]
    return Outcome(schema, rows, {"tol": p.tol, "max_abs_diff": max(r["abs_diff"] for r in rows)}, bad)


def _run_lsm_scan(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec = build_spec(cfg.model)
    thetas = grid_values(p.thetas)
    ev = eigenvalue_scan(spec, thetas, p.k, p.m, p.theta_prime, p.method, cfg.model.dense_cap)
    schema = ["theta"] + [f"E{i}" for i in range(p.k)]
    rows = [[th, *vals] for th, vals in zip(thetas, ev)]
    meta: dict[str, Any] = {"degeneracy_tol": p.degeneracy_tol, "dimension": spec.space.dim()}
    if p.k >= 2:
        gaps = ev[:, 1] - ev[:, 0]
        i_pi = int(np.argmin(np.abs(np.array(thetas) - math.pi)))
        i_0 = int(np.argmin(np.abs(np.array(thetas))))
        meta.update({"theta_nearest_pi": thetas[i_pi], "gap_at_pi": gaps[i_pi],
                     "theta_nearest_0": thetas[i_0], "gap_at_0": gaps[i_0],
                     "crossing_at_pi": bool(gaps[i_pi] < p.degeneracy_tol)})
    meta["endpoint_mismatch"] = float(np.abs(ev[0] - ev[-1]).max())
    return Outcome(schema, rows, meta)


def _run_lsm_run(cfg: ExperimentConfig) -> Outcome:
    p = cfg.experiment
    spec = build_spec(cfg.model)
    L = spec.geometry.length
    cap = cfg.model.dense_cap
    H0 = assemble_hamiltonian(twisted_hamiltonian(spec, TwistSpec(L, p.m)), dense_cap=cap)
    sd0 = spectral_decompose(H0)
    gap = spectral_gap(sd0).gap
    base = HastingsParams.default(gap, L, quadrature_tol=p.quadrature_tol)
    params = HastingsParams(p.alpha if p.alpha is not None else base.alpha,
                            p.t_cut if p.t_cut is not None else base.t_cut,
                            2 * math.pi / p.theta_steps, p.quadrature_tol)
    run = hastings_solve(spec, params, p.theta_steps, p.m, cap)
    bad = []
    diag = dict(run.diagnostics)
    if run.max_antihermitian_defect >= 1e-10:
        bad.append(f"generator anti-Hermitian defect {run.max_antihermitian_defect:.3g}")
    if run.max_norm_drift >= 1e-6:
        bad.append(f"norm drift {run.max_norm_drift:.3g}")
    if diag["variational_gap_bound"] < gap:
        bad.append(f"variational bound {diag['variational_gap_bound']!r} below gap {gap!r}")

    # isospectrality along the theta' = -theta path
    E_ref = sd0.eigenvalues
    iso = 0.0
    for th in np.linspace(0, 2 * math.pi, p.spectrum_samples):
        H = assemble_hamiltonian(twisted_hamiltonian(spec, TwistSpec(L, p.m, th, -th)), dense_cap=cap)
        iso = max(iso, float(np.abs(np.linalg.eigvalsh(H) - E_ref).max()))
    if iso >= 1e-9:
        bad.append(f"spectrum of H(theta,-theta) deviates by {iso:.3g}")

    # perturbative generator against a finite difference of the ground state
    def gs(th):
        H = assemble_hamiltonian(twisted_hamiltonian(spec, TwistSpec(L, p.m, th, -th)), dense_cap=cap)
        return spectral_decompose(H)

    th, h = p.fd_theta, p.fd_step
    sd_th = gs(th)
    tw = TwistSpec(L, p.m, th, -th)
    dH = (assemble_hamiltonian(twist_derivative(spec, tw, 1), dense_cap=cap)
          - assemble_hamiltonian(twist_derivative(spec, tw, 2), dense_cap=cap))
    analytic = exact_generator(sd_th, dH)
    p0 = ground_state(sd_th)
    align = lambda v: v * np.exp(-1j * np.angle(np.vdot(p0, v)))
    fd = (align(ground_state(gs(th + h))) - align(ground_state(gs(th - h)))) / (2 * h)
    fd_err = float(np.abs(fd - analytic).max())
    if fd_err >= 1e-5:
        bad.append(f"exact generator vs finite difference {fd_err:.3g}")

    conv = None
    if p.convergence_check:
        fine = hastings_solve(spec, HastingsParams(params.alpha, params.t_cut, params.ode_step / 2,
                                                   params.quadrature_tol),
                              2 * p.theta_steps, p.m, cap)
        conv = float(abs(fine.overlaps[-1] - run.overlaps[-1]))
        if conv >= 1e-4:
            bad.append(f"halving the step moved <psi0, psi1> by {conv:.3g}")

    schema = ["theta", "norm", "overlap_re", "overlap_im", "energy", "energy_single"]
    rows = [[t, n, o.real, o.imag, e, es] for t, n, o, e, es in
            zip(run.theta_grid, run.norms, run.overlaps, run.energies, run.energies_single)]
    meta = {"alpha": params.alpha, "t_cut": params.t_cut, "ode_step": params.ode_step,
            "quadrature_tol": params.quadrature_tol, "gap": gap,
            "max_norm_drift": run.max_norm_drift,
            "max_antihermitian_defect": run.max_antihermitian_defect,
            "isospectral_deviation": iso, "fd_generator_error": fd_err,
            "fd_theta": th, "fd_step": h, "half_step_overlap_change": conv,
            "diagnostics": diag}
    extra = {"theta_grid": run.theta_grid, "norms": run.norms, "overlaps": run.overlaps,
             "energies": run.energies, "energies_single": run.energies_single,
             "variational_gap_bound": diag["variational_gap_bound"], "metadata": meta}
    return Outcome(schema, rows, meta, bad, extra)


RUNNERS = {
    "constants": _run_constants,
    "lr-sweep": _run_lr_sweep,
    "series-check": _run_series,
    "localize": _run_localize,
    "truncate": _run_truncate,
    "product-corr": _run_product_corr,
    "multi-comm": _run_multi_comm,
    "cluster": _run_cluster,
    "kernel-identity": _run_kernel,
    "lsm-scan": _run_lsm_scan,
    "lsm-run": _run_lsm_run,
}


@dataclass
class RunResult:
    status: int
    csv_path: str | None
    meta_path: str | None
    violations: list[str]
    message: str = ""
    outcome: Outcome | None = None


def _versions() -> dict:
    return {"locbound": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def run_experiment(cfg: ExperimentConfig, out_dir: str | None = None,
                   seed: int | None = None) -> RunResult:
    """Run one experiment and write its outputs.

    Status 0: every hard check passed.  Status 1: a bound was violated (the
    tables are still written and the metadata lists the violations).
    Status 3: a module error stopped the run; nothing is written.
    Config problems found while building the model raise
    ``ConfigValidationError``.
    """
    kind = cfg.kind
    seed = cfg.seed if seed is None else seed
    if not 0 <= seed < 2**64:
        raise ConfigValidationError([f"seed: {seed} is not an unsigned 64-bit integer"])
    np.random.seed(seed % 2**32)
    try:
        outcome = RUNNERS[kind](cfg)
    except ConfigValidationError:
        raise
    except LocboundError as e:
        return RunResult(3, None, None, [], f"{kind}: {type(e).__name__}: {e}")
    directory = out_dir if out_dir is not None else cfg.output.dir
    stem = cfg.output.stem or kind
    csv_path = os.path.join(directory, f"{stem}.csv")
    meta_path = os.path.join(directory, f"{stem}.meta.json")
    emit_table(outcome.rows, outcome.schema, csv_path)
    config_dump = cfg.model_dump(mode="json", exclude={"output"})
    meta = {"kind": kind, "seed": seed, "config": config_dump, "columns": outcome.schema,
            "rows": len(outcome.rows), "versions": _versions(), "violations": outcome.violations,
            "passed": not outcome.violations, "results": outcome.meta}
    if cfg.model is not None and kind not in ("lsm-scan", "lsm-run", "kernel-identity"):
        spec = build_spec(cfg.model)
        phi = build_interaction(cfg.model, spec)
        meta["constants"] = [analytic_constants(phi, spec.space, prof) for prof in _profiles(cfg.profile)]
    write_json(meta, meta_path)
    if outcome.extra_json is not None:
        write_json(outcome.extra_json, os.path.join(directory, f"{stem}.run.json"))
    status = 1 if outcome.violations else 0
    msg = "; ".join(outcome.violations[:5])
    return RunResult(status, csv_path, meta_path, outcome.violations, msg, outcome)


_KIND_DOCS = {
    "constants": (ConstantsParams, "||F_a||, C_a, ||Phi||_a and 2||Phi||_a C_a / a for each rate"),
    "lr-sweep": (LRSweepParams, "||[tau_t(A), B]|| against the Lieb-Robinson bound on a time grid"),
    "series-check": (SeriesParams, "exhaustive a_n chain sums against their bounds"),
    "localize": (LocalizeParams, "localization error of tau_t(A) outside the time-dependent ball"),
    "truncate": (TruncateParams, "full versus ball-restricted dynamics, with the integral bound"),
    "product-corr": (ProductCorrParams, "connected correlations grown from a product state"),
    "multi-comm": (MultiCommParams, "nested commutator norm and quasi-support disjointness"),
    "cluster": (ClusterParams, "ground-state connected correlations against the clustering bound"),
    "kernel-identity": (KernelParams, "both sides of the Gaussian Cauchy-kernel identity"),
    "lsm-scan": (LsmScanParams, "lowest eigenvalues of H(theta, theta') over a theta grid"),
    "lsm-run": (LsmRunParams, "quasi-adiabatic trial state and variational gap bound"),
}


def schema_docs() -> str:
    """Human-readable summary of every experiment kind and its parameters."""
    lines = ["Top-level keys: model, profile, experiment, seed, output", ""]
    for block, cls in (("model", ModelConfig), ("profile", ProfileConfig)):
        lines.append(f"{block}:")
        lines += [f"  {name}: {_describe(f)}" for name, f in cls.model_fields.items()]
    lines.append("")
    for kind in KINDS:
        cls, text = _KIND_DOCS[kind]
        lines.append(f"{kind}: {text}")
        for name, f in cls.model_fields.items():
            if name != "kind":
                lines.append(f"  {name}: {_describe(f)}")
    return "\n".join(lines)


def _describe(f) -> str:
    ann = f.annotation
    plain = isinstance(ann, type) and getattr(ann, "__origin__", None) is None
    ann = ann.__name__ if plain else str(ann)
    ann = ann.replace("typing.", "").replace("locbound.harness.", "")
    if f.is_required():
        return f"{ann} (required)"
    default = f.default
    if isinstance(default, BaseModel):
        default = default.model_dump()
    return f"{ann} = {default!r}"
