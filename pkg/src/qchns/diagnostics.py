"""Energy, dissipation and mass diagnostics; run configuration and record files.

Energies use the same discrete operators as the solver, so the balance

    E(t_{n+1}) - E(t_n) + dt * (D_visc + D_chem + D_fric)(t_{n+1})

only measures the time-discretisation error of the step.
"""
from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from . import grid as gc
from .errors import ConfigError, DomainError
from .phase import PhysParams, alpha_from_eps, double_well, wall_factors
from .phase import dissipation_density, velocity_gradient
from .picard import PicardConfig, PicardReport, SimState, height

MIN_ALPHA = 0.05
EPS_RANGE = (-0.95, -0.05)


# ---------------------------------------------------------------------------
# energies


def total_energy(state: SimState) -> tuple[float, float, float]:
    """``(E_kin, E_grav, E_int)`` by midpoint quadrature.

    ``E_int`` uses the compact face gradient so that its variation is the
    chemical potential of the solver.  ``E_grav`` is zero with gravity off.
    """
    grid, p = state.grid, state.params
    e_kin = gc.integrate(grid, 0.5 * state.rho * np.sum(state.u ** 2, axis=0))
    e_grav = gc.integrate(grid, state.rho * height(grid)) if p.gravity_on else 0.0
    e_int = gc.integrate(grid, double_well(state.phi)[0]) + 0.5 * gc.dirichlet_form(grid, state.phi)
    return e_kin, e_grav, e_int


def dissipation_rate(state: SimState) -> tuple[float, float, float]:
    """``(D_visc, D_chem, D_fric)``, each a nonnegative quadratic form in ``u``.

    ``D_fric`` is the wall-face midpoint rule applied to the Robin trace of
    the tangential velocity.
    """
    grid, p, u = state.grid, state.params, state.u
    grad_u = velocity_gradient(grid, u, state.phi, p)
    d_visc = gc.integrate(grid, dissipation_density(grad_u, state.eta))
    d_chem = gc.dirichlet_form(grid, state.mu_p)
    walls = wall_factors(grid, state.phi, p)
    d_fric = 0.0
    for name, comp, sl, h in (("left", 1, np.s_[0, :], grid.hy), ("right", 1, np.s_[-1, :], grid.hy),
                              ("bottom", 0, np.s_[:, 0], grid.hx), ("top", 0, np.s_[:, -1], grid.hx)):
        trace = walls.trace(name) * u[comp][sl]
        d_fric += float(np.sum(p.a0 * trace ** 2)) * h
    return d_visc, d_chem, d_fric


def constraint_residual(state: SimState) -> float:
    """``|| div u - alpha laplacian(mu_p) ||`` in the cell L2 norm."""
    r = state.g - state.params.alpha * gc.laplacian(state.grid, state.mu_p)
    return gc.l2norm(state.grid, r)


# ---------------------------------------------------------------------------
# records

COLUMNS = ("t", "dt", "E_kin", "E_grav", "E_int", "E_total", "D_visc", "D_chem", "D_fric",
           "mass", "phi_mean", "phi_min", "phi_max", "constraint_res", "div_u_norm",
           "u_norm", "picard_iters", "contraction_factor")


@dataclass(frozen=True)
class DiagnosticsRecord:
    t: float
    dt: float
    E_kin: float
    E_grav: float
    E_int: float
    E_total: float
    D_visc: float
    D_chem: float
    D_fric: float
    mass: float
    phi_mean: float
    phi_min: float
    phi_max: float
    constraint_res: float
    div_u_norm: float
    u_norm: float
    picard_iters: int
    contraction_factor: float

    @property
    def dissipation(self) -> float:
        return self.D_visc + self.D_chem + self.D_fric


def make_record(state: SimState, report: PicardReport | None = None) -> DiagnosticsRecord:
    e_kin, e_grav, e_int = total_energy(state)
    d_visc, d_chem, d_fric = dissipation_rate(state)
    grid = state.grid
    return DiagnosticsRecord(
        t=float(state.t), dt=float(report.dt) if report else 0.0,
        E_kin=e_kin, E_grav=e_grav, E_int=e_int, E_total=e_kin + e_grav + e_int,
        D_visc=d_visc, D_chem=d_chem, D_fric=d_fric,
        mass=gc.integrate(grid, state.rho),
        phi_mean=gc.mean(grid, state.phi),
        phi_min=float(state.phi.min()), phi_max=float(state.phi.max()),
        constraint_res=constraint_residual(state),
        div_u_norm=gc.l2norm(grid, state.g),
        u_norm=gc.l2norm(grid, state.u),
        picard_iters=report.iterations if report else 0,
        contraction_factor=report.contraction_factor if report else 0.0,
    )


def energy_balance_residual(rec0: DiagnosticsRecord, rec1: DiagnosticsRecord, dt: float | None = None) -> float:
    """``|E_1 - E_0 + dt D_1|`` for consecutive records."""
    dt = rec1.t - rec0.t if dt is None else dt
    return abs(rec1.E_total - rec0.E_total + dt * rec1.dissipation)


def energy_report(records) -> dict:
    """Summary of the discrete energy law over a record series."""
    res = [energy_balance_residual(a, b) for a, b in zip(records[:-1], records[1:])]
    dE = [b.E_total - a.E_total for a, b in zip(records[:-1], records[1:])]
    e0 = abs(records[0].E_total) if records else 0.0
    return {
        "steps": len(res),
        "max_residual": max(res, default=0.0),
        "cumulative_residual": float(sum(res)),
        "max_energy_increase": max(dE, default=0.0),
        "monotone": all(d <= 1e-8 * max(e0, 1e-300) for d in dE),
    }


def _fmt(v) -> str:
    if isinstance(v, (int, np.integer)) and not isinstance(v, bool):
        return str(int(v))
    return format(float(v), ".17g")


def write_records(path, records) -> None:
    """RFC-4180 CSV with header ``COLUMNS``; floats keep 17 significant digits."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for r in records:
            w.writerow([_fmt(getattr(r, c)) for c in COLUMNS])


def read_records(path) -> list[DiagnosticsRecord]:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        missing = [c for c in COLUMNS if c not in row]
        if missing:
            raise ConfigError(f"record file lacks columns {missing}")
        kw = {c: (int(row[c]) if c == "picard_iters" else float(row[c])) for c in COLUMNS}
        out.append(DiagnosticsRecord(**kw))
    return out


class RecordWriter:
    """Streams records to ``<dir>/diagnostics.csv`` and snapshots to ``<dir>/snapshots``."""

    def __init__(self, output_dir):
        self.dir = Path(output_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.path = self.dir / "diagnostics.csv"
        self._fh = open(self.path, "w", newline="", encoding="utf-8")
        self._w = csv.writer(self._fh)
        self._w.writerow(COLUMNS)
        self._fh.flush()

    def append(self, rec: DiagnosticsRecord) -> None:
        self._w.writerow([_fmt(getattr(rec, c)) for c in COLUMNS])
        self._fh.flush()

    def snapshot(self, state: SimState, step: int) -> None:
        snap = self.dir / "snapshots"
        snap.mkdir(exist_ok=True)
        gc.write_snapshot(snap / f"state_{step:06d}.qf", state.grid,
                          np.stack([state.u[0], state.u[1], state.phi]))

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class SimConfig:
    nx: int
    ny: int
    eps: float
    nu: float
    a0: float
    dt: float
    T: float
    initial: str
    Lx: float = 1.0
    Ly: float = 1.0
    gravity: bool = False
    picard_tol: float = 1e-8
    picard_max_iters: int = 50
    refreeze_every: int = 1
    snapshot_every: int = 0
    output_dir: str | None = None
    base_dir: str = field(default=".", compare=False)

    @property
    def grid(self) -> gc.Grid:
        return gc.Grid(self.nx, self.ny, self.Lx, self.Ly)

    @property
    def params(self) -> PhysParams:
        return PhysParams(eps=self.eps, nu=self.nu, a0=self.a0, gravity_on=self.gravity)

    @property
    def picard(self) -> PicardConfig:
        return PicardConfig(tol=self.picard_tol, max_iters=self.picard_max_iters,
                            refreeze_every=self.refreeze_every)


REQUIRED = ("nx", "ny", "eps", "nu", "a0", "dt", "T", "initial")
_TYPES = {f.name: f.type for f in fields(SimConfig)}


def _convert(key: str, raw: str):
    kind = _TYPES[key]
    try:
        if kind == "int":
            return int(raw)
        if kind == "float":
            v = float(raw)
            if not math.isfinite(v):
                raise ValueError
            return v
        if kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "on", "1"):
                return True
            if low in ("false", "no", "off", "0"):
                return False
            raise ValueError
    except ValueError:
        raise ConfigError(f"invalid value for {key}: {raw!r}") from None
    return raw


def parse_config(text: str, base_dir: str = ".") -> SimConfig:
    """Parse ``key = value`` lines (``#`` starts a comment).

    Required keys: ``nx ny eps nu a0 dt T initial``.  Unknown or repeated
    keys are errors.  ``initial`` is one of ``uniform(c)``,
    ``sinusoidal(amp, kx, ky)``, ``spinodal(amp, seed)`` or ``file(path)``.
    """
    values: dict[str, object] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value'")
        key, raw = (s.strip() for s in line.split("=", 1))
        if key not in _TYPES or key == "base_dir":
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        values[key] = _convert(key, raw)
    for key in REQUIRED:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}")
    cfg = SimConfig(base_dir=base_dir, **values)
    validate_config(cfg)
    return cfg


def load_config(path) -> SimConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config(text, base_dir=str(path.parent))


def validate_config(cfg: SimConfig) -> None:
    if cfg.nx < 8 or cfg.ny < 8:
        raise ConfigError("nx and ny must be at least 8")
    if not (EPS_RANGE[0] < cfg.eps < EPS_RANGE[1]):
        raise ConfigError(f"eps must lie in {EPS_RANGE}")
    if alpha_from_eps(cfg.eps) < MIN_ALPHA:
        raise ConfigError(f"alpha = {alpha_from_eps(cfg.eps):.4g} is below {MIN_ALPHA}")
    if not cfg.dt > 0 or not cfg.T >= 0:
        raise ConfigError("dt must be positive and T nonnegative")
    if cfg.Lx <= 0 or cfg.Ly <= 0:
        raise ConfigError("Lx and Ly must be positive")
    if cfg.snapshot_every < 0:
        raise ConfigError("snapshot_every must be nonnegative")
    try:
        cfg.params
        cfg.picard
    except (DomainError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    parse_initial(cfg.initial)


def parse_initial(text: str) -> tuple[str, list[str]]:
    text = text.strip()
    if "(" not in text or not text.endswith(")"):
        raise ConfigError(f"malformed initial condition {text!r}")
    name, args = text[:-1].split("(", 1)
    name = name.strip()
    parts = [a.strip() for a in args.split(",")] if args.strip() else []
    arity = {"uniform": 1, "sinusoidal": 3, "spinodal": 2, "file": 1}
    if name not in arity:
        raise ConfigError(f"unknown initial condition {name!r}")
    if len(parts) != arity[name]:
        raise ConfigError(f"{name} takes {arity[name]} argument(s)")
    return name, parts


def initial_fields(cfg: SimConfig) -> tuple[np.ndarray, np.ndarray]:
    """``(u0, phi0)`` described by ``cfg.initial``; ``u0`` is zero unless read from file."""
    grid = cfg.grid
    name, a = parse_initial(cfg.initial)
    u = np.zeros((2,) + grid.shape)
    try:
        if name == "uniform":
            phi = np.full(grid.shape, float(a[0]))
        elif name == "sinusoidal":
            amp, kx, ky = float(a[0]), float(a[1]), float(a[2])
            X, Y = grid.mesh()
            phi = amp * np.cos(kx * np.pi * X / grid.Lx) * np.cos(ky * np.pi * Y / grid.Ly)
        elif name == "spinodal":
            phi = spinodal_noise(grid, float(a[0]), int(a[1]))
        else:
            path = a[0] if os.path.isabs(a[0]) else os.path.join(cfg.base_dir, a[0])
            g2, values = gc.read_snapshot(path)
            if g2.shape != grid.shape:
                raise ConfigError("snapshot grid does not match nx, ny")
            if values.ndim == 2:
                phi = values
            elif values.shape[0] == 3:
                u, phi = values[:2].copy(), values[2].copy()
            else:
                raise ConfigError("snapshot must hold phi or (ux, uy, phi)")
    except (ValueError, OSError) as exc:
        raise ConfigError(f"cannot build initial condition: {exc}") from exc
    if np.max(np.abs(phi)) > 0.5:
        raise ConfigError("initial |phi| must not exceed 0.5")
    return u, phi


SPINODAL_MAX_MODE = 4


def spinodal_noise(grid: gc.Grid, amp: float, seed: int, max_mode: int = SPINODAL_MAX_MODE) -> np.ndarray:
    """Seeded random perturbation bounded by ``amp`` from low Neumann modes.

    A Gaussian combination of ``cos(kx pi x/Lx) cos(ky pi y/Ly)`` with
    ``0 < kx^2 + ky^2 <= max_mode^2``, divided by the sum of the absolute
    coefficients so that ``|phi| <= amp``.  The same function is sampled at
    every resolution, and the initial layer stays resolved by the time step
    (grid-scale white noise relaxes within a single step).
    """
    rng = np.random.default_rng(seed)
    X, Y = grid.mesh()
    phi = np.zeros(grid.shape)
    total = 0.0
    for kx in range(max_mode + 1):
        for ky in range(max_mode + 1):
            c = rng.standard_normal()
            if 0 < kx * kx + ky * ky <= max_mode * max_mode:
                phi += c * np.cos(kx * np.pi * X / grid.Lx) * np.cos(ky * np.pi * Y / grid.Ly)
                total += abs(c)
    return amp * phi / total

def initial_state(cfg: SimConfig) -> SimState:
    u, phi = initial_fields(cfg)
    return SimState(cfg.grid, cfg.params, 0.0, u, phi)
