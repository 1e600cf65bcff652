"""Fixed-step RK4 integration with conserved-quantity monitoring.

Time is real, the state is the complex coefficient field; constraints are
never re-projected during the flow, so constraint drift is a measured
quantity.  Monitors are evaluated at recorded snapshots only:

* eigenvalues of the reconstructed N x N matrix (scalar tops), matched
  to the initial spectrum by nearest-neighbour assignment,
* tr L(z)^k for k = 1..size and the characteristic-polynomial
  coefficients of L(z) at each spectral probe,
* deviation from the model's constraint set.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass, field as dc_field

import numpy as np

from .elliptic import lattice_distance
from .models import CoeffField, EllipticTopModel, constraint_deviation
from .torus import reconstruct


@dataclass
class IntegratorConfig:
    dt: float
    t_end: float
    record_every: int = 10
    spectral_probes: tuple = ()
    seed: int = 0
    scheme: str = "rk4"

    def __post_init__(self):
        if self.dt <= 0 or self.t_end <= 0:
            raise ValueError("dt and t_end must be positive")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.scheme != "rk4":
            raise ValueError("only the classical fixed-step rk4 scheme is supported")
        steps = round(self.t_end / self.dt)
        if steps < 1 or abs(steps * self.dt - self.t_end) > self.dt:
            raise ValueError("t_end must be an integer number of steps within one dt")


@dataclass
class Trajectory:
    times: list
    states: list                      # CoeffField snapshots
    eigenvalues: list                 # per-time arrays (scalar tops) or None
    lax_traces: dict                  # probe -> list of per-time [tr L^k] arrays
    charpoly: dict                    # probe -> list of per-time coefficient arrays
    constraint_dev: list
    completed: bool = True
    abort_reason: str = ""

    def eigenvalue_drift(self) -> float:
        if not self.eigenvalues or self.eigenvalues[0] is None:
            return 0.0
        ref = self.eigenvalues[0]
        drift = 0.0
        for ev in self.eigenvalues[1:]:
            drift = max(drift, float(np.abs(_match(ref, ev) - ref).max()))
        return drift

    def trace_drift(self) -> float:
        """Max relative drift of tr L(z)^k over probes and orders."""
        worst = 0.0
        for probe, series in self.lax_traces.items():
            arr = np.array(series)
            ref = arr[0]
            scale = np.maximum(np.abs(ref), 1.0)
            worst = max(worst, float((np.abs(arr - ref) / scale).max()))
        return worst

    def constraint_drift(self) -> float:
        return float(max(self.constraint_dev)) if self.constraint_dev else 0.0


def _match(ref: np.ndarray, vals: np.ndarray) -> np.ndarray:
    """Greedy nearest-neighbour matching of eigenvalue lists."""
    vals = list(vals)
    out = np.empty_like(ref)
    for i, r in enumerate(ref):
        j = int(np.argmin(np.abs(np.array(vals) - r)))
        out[i] = vals.pop(j)
    return out


def rk4_step(f, y: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(y)
    k2 = f(y + 0.5 * dt * k1)
    k3 = f(y + 0.5 * dt * k2)
    k4 = f(y + dt * k3)
    return y + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


def spectral_invariants(model: EllipticTopModel, field: CoeffField, probes,
                        kmax: int | None = None) -> dict:
    """tr L(z)^k (k = 1..kmax) and charpoly coefficients at each probe."""
    kmax = kmax or model.size
    out = {"traces": {}, "charpoly": {}}
    tau = model.params.tau
    poles = np.asarray(model.pole_set(), dtype=complex)
    for z in probes:
        if float(np.min(lattice_distance(z - poles, tau))) <= model.params.pole_guard:
            raise ValueError(f"spectral probe {z} sits on the Lax pole set")
        lmat = model.L_of(field, z)
        powers = np.eye(model.size, dtype=complex)
        traces = []
        for _ in range(kmax):
            powers = powers @ lmat
            traces.append(complex(np.trace(powers)))
        out["traces"][z] = np.array(traces)
        out["charpoly"][z] = np.poly(lmat)
    return out


def integrate(model: EllipticTopModel, field0: CoeffField, cfg: IntegratorConfig,
              reduction: str | None = None) -> Trajectory:
    """Classical RK4 flow of the model's equations of motion.

    The initial field must satisfy the applicable constraints to 1e-10.
    NaN or overflow aborts the run, keeping the last good state.
    """
    reduction = reduction or model.reduction
    if reduction is not None:
        dev = constraint_deviation(field0, reduction, model)
        if dev > 1e-10:
            raise ValueError(
                f"initial field violates '{reduction}' constraints by {dev:.3e}")

    def f(data: np.ndarray) -> np.ndarray:
        return model.eom_rhs(field0.with_data(data)).data

    steps = round(cfg.t_end / cfg.dt)
    is_scalar = field0.K == 1 and len(field0.lattice_shape) == 1

    traj = Trajectory([], [], [], {z: [] for z in cfg.spectral_probes},
                      {z: [] for z in cfg.spectral_probes}, [])

    def record(t: float, data: np.ndarray):
        snap = field0.with_data(data.copy())
        traj.times.append(t)
        traj.states.append(snap)
        if is_scalar:
            mat = reconstruct(snap.data[..., 0, 0], model.n)
            traj.eigenvalues.append(np.sort_complex(np.linalg.eigvals(mat)))
        else:
            traj.eigenvalues.append(None)
        if cfg.spectral_probes:
            inv = spectral_invariants(model, snap, cfg.spectral_probes)
            for z in cfg.spectral_probes:
                traj.lax_traces[z].append(inv["traces"][z])
                traj.charpoly[z].append(inv["charpoly"][z])
        traj.constraint_dev.append(
            constraint_deviation(snap, reduction, model) if reduction else 0.0)

    y = field0.data.copy()
    record(0.0, y)
    for step in range(1, steps + 1):
        with np.errstate(over="ignore", invalid="ignore"):
            # overflow is an anticipated failure mode, handled by aborting
            y_next = rk4_step(f, y, cfg.dt)
        if not np.all(np.isfinite(y_next.view(float))):
            traj.completed = False
            traj.abort_reason = (f"non-finite state at t = {step * cfg.dt:.6g}; "
                                 f"last good t = {(step - 1) * cfg.dt:.6g}")
            break
        y = y_next
        if step % cfg.record_every == 0 or step == steps:
            record(step * cfg.dt, y)
    return traj


def constraint_drift(model: EllipticTopModel, traj: Trajectory,
                     reduction: str | None = None) -> list:
    """Per-snapshot deviation from the constraint set (c-coordinates)."""
    reduction = reduction or model.reduction
    if reduction is None:
        return list(traj.constraint_dev)
    return [constraint_deviation(s, reduction, model) for s in traj.states]


def convergence_order(model: EllipticTopModel, field0: CoeffField, t_end: float,
                      dts=(1e-2, 5e-3, 2.5e-3), ref_dt: float | None = None) -> float:
    """Fitted global-error order of the integrator against a fine reference."""
    ref_dt = ref_dt or min(dts) / 8.0

    def endpoint(dt: float) -> np.ndarray:
        cfg = IntegratorConfig(dt=dt, t_end=t_end, record_every=10 ** 9)
        return integrate(model, field0, cfg, reduction=None).states[-1].data

    ref = endpoint(ref_dt)
    errs = [float(np.linalg.norm((endpoint(dt) - ref).ravel())) for dt in dts]
    slope = np.polyfit(np.log(dts), np.log(errs), 1)[0]
    return float(slope)


def write_trajectory_csv(traj: Trajectory, path) -> None:
    """time, Re/Im of each coefficient; lattice row-major then block row-major."""
    ncoef = traj.states[0].data.size
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"{p}_c{i}" for i in range(ncoef)
                                    for p in ("re", "im")])
        for t, snap in zip(traj.times, traj.states):
            flat = snap.data.reshape(-1)
            row = [f"{t:.12g}"]
            for c in flat:
                row += [repr(float(c.real)), repr(float(c.imag))]
            writer.writerow(row)


def write_monitor_csv(traj: Trajectory, probe: complex, path) -> None:
    """time, Re/Im of tr L^k at one spectral probe."""
    series = traj.lax_traces[probe]
    kmax = len(series[0])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["time"] + [f"{p}_trL{k + 1}" for k in range(kmax)
                                    for p in ("re", "im")])
        for t, tr in zip(traj.times, series):
            row = [f"{t:.12g}"]
            for c in tr:
                row += [repr(float(c.real)), repr(float(c.imag))]
            writer.writerow(row)
