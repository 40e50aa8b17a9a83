"""
Time-domain simulation service - switched PWM circuit and nonlinear averaged model

Both integrators are fixed-step RK4 over the state [I, V, v_c?, v_f?] (one entry
per converter in each block). The switched model latches each duty at its
converter's period boundaries and splits every step at the switch edges; the
averaged model uses the controller output continuously.
"""

import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
import scipy.linalg

from cplnet.core.config import settings
from cplnet.core.exceptions import ConfigError, DivergenceError
from cplnet.models.control import design_individual_gains
from cplnet.models.operating_point import feeder_matrix, solve_operating_point
from cplnet.models.smallsignal import node_laplacian
from cplnet.schemas.design import InputGroundRC, InputShuntC, OptionalDesign, OutputShuntR
from cplnet.schemas.network import CouplingConvention, NetworkSpec, OperatingPoint
from cplnet.schemas.simulation import (
    Measurement,
    OpenLoop,
    Proportional,
    SimConfig,
    SimModel,
    StateFeedback,
)

logger = logging.getLogger(__name__)

# switch position labels in the trace
POSITION_SOURCE = 1
POSITION_GROUND = 2

METRIC_COLUMNS = ["pkpk", "mean", "min", "max"]

# edge and grid instants closer than this fraction of dt are the same instant
EDGE_TOLERANCE = 1e-6

# (V-row stage maps for RK4 stages 2..4, full-state update map)
StepMaps = Tuple[Tuple[np.ndarray, np.ndarray, np.ndarray], np.ndarray]


@dataclass(frozen=True)
class Trace:
    """Sampled simulation output"""

    frame: pd.DataFrame
    model: SimModel
    n: int
    v_min: Tuple[float, ...]
    v_max: Tuple[float, ...]

    @property
    def t(self) -> np.ndarray:
        return self.frame["t"].to_numpy()

    def column(self, name: str) -> np.ndarray:
        return self.frame[name].to_numpy()

    def __len__(self) -> int:
        return len(self.frame)


@dataclass(frozen=True)
class TraceMetrics:
    """Per-signal statistics over a time window"""

    window: Tuple[float, float]
    table: pd.DataFrame
    shutoff_events: int

    def pkpk(self, signal: str) -> float:
        return float(self.table.loc[signal, "pkpk"])

    def mean(self, signal: str) -> float:
        return float(self.table.loc[signal, "mean"])


class _Circuit:
    """
    Right-hand side of the averaged / switched circuit equations

    With u held fixed everything except the constant-power current is affine
    in the state; affine() exposes that part as (M, c).
    """

    def __init__(self, spec: NetworkSpec, design: OptionalDesign):
        n = spec.n
        self.n = n
        self.v_g = spec.source.v_g
        self.resistance = spec.line.resistance
        self.inductance = np.array([c.inductance for c in spec.converters])
        self.capacitance = np.array([c.capacitance for c in spec.converters])
        self.periods = np.array([c.period for c in spec.converters])
        self.power = np.array([load.power for load in spec.loads])
        self.v_min = np.array([load.v_min for load in spec.loads])
        self.v_max = np.array([load.v_max for load in spec.loads])
        self.feeder = self.resistance * feeder_matrix(n)
        # an R = 0 feeder holds every node at V_g
        self.pinned = self.resistance == 0.0

        self.shunt_conductance = 1.0 / design.r_s if isinstance(design, OutputShuntR) else 0.0
        self.has_vc = isinstance(design, InputShuntC)
        self.has_vf = isinstance(design, InputGroundRC)

        if self.has_vc:
            self.c_s = design.c_s
            if not self.pinned:
                self.laplacian = node_laplacian(n, self.resistance)
                self.injection = np.zeros(n)
                self.injection[0] = self.v_g / self.resistance
        if self.has_vf:
            self.r_f = design.r_f
            self.tau = design.r_f * design.c_f
            self.rc_gain = self.feeder / design.r_f
            self.rc_lu = scipy.linalg.lu_factor(np.eye(n) + self.rc_gain)

        self.dim = n * (2 + int(self.has_vc) + int(self.has_vf))

    def cpl_current(self, v: np.ndarray) -> np.ndarray:
        """P/v inside [v_min, v_max], zero outside"""
        on = (v >= self.v_min) & (v <= self.v_max)
        return np.where(on, self.power / np.where(on, v, 1.0), 0.0)

    def load_current(self, v: np.ndarray) -> np.ndarray:
        """CPL current plus shunt resistor current"""
        return self.cpl_current(v) + self.shunt_conductance * v

    def node_voltage(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """
        u is the switch position (switched) or the duty (averaged)

        x and u may stack samples row-wise.
        """
        n = self.n
        if self.pinned:
            return np.full(np.shape(x)[:-1] + (n,), self.v_g)
        if self.has_vc:
            return x[..., 2 * n : 3 * n]
        rhs = self.v_g - (u * x[..., :n]) @ self.feeder.T
        if self.has_vf:
            rhs = rhs + x[..., self.dim - n :] @ self.rc_gain.T
            return scipy.linalg.lu_solve(self.rc_lu, rhs.T).T
        return rhs

    def affine_derivative(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        """Right-hand side without the constant-power current"""
        n = self.n
        current, voltage = x[:n], x[n : 2 * n]
        v_node = self.node_voltage(x, u)
        blocks = [
            (u * v_node - voltage) / self.inductance,
            (current - self.shunt_conductance * voltage) / self.capacitance,
        ]
        if self.has_vc:
            if self.pinned:
                blocks.append(np.zeros(n))
            else:
                vc = x[2 * n : 3 * n]
                blocks.append((self.injection - self.laplacian @ vc - u * current) / self.c_s)
        if self.has_vf:
            vf = x[self.dim - n :]
            blocks.append((v_node - vf) / self.tau)
        return np.concatenate(blocks)

    def derivative(self, x: np.ndarray, u: np.ndarray) -> np.ndarray:
        n = self.n
        dx = self.affine_derivative(x, u)
        dx[n : 2 * n] -= self.cpl_current(x[n : 2 * n]) / self.capacitance
        return dx

    def affine(self, u: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """(M, c) with affine_derivative(x, u) = M x + c"""
        offset = self.affine_derivative(np.zeros(self.dim), u)
        columns = [self.affine_derivative(e, u) - offset for e in np.eye(self.dim)]
        return np.column_stack(columns), offset


class _AffineRK4:
    """
    Classical RK4 for the switched circuit with the switch pattern held fixed

    The state lives in z = [x, g1, g2, g3, g4, 1] where g_s is the
    constant-power term -P/(C V) at stage s. Every stage input and the update
    itself are affine in z, so their maps are built once per (pattern, step
    length) and a step is four load evaluations plus four small products.
    """

    def __init__(self, circuit: _Circuit):
        n, dim = circuit.n, circuit.dim
        self.circuit = circuit
        self.n = n
        self.dim = dim
        self.z = np.zeros(dim + 4 * n + 1)
        self.z[-1] = 1.0
        self.x = self.z[:dim]
        self.voltage = self.z[n : 2 * n]
        self.slots = [self.z[dim + s * n : dim + (s + 1) * n] for s in range(4)]
        self.drain = -circuit.power / circuit.capacitance
        self.v_min = circuit.v_min
        self.v_max = circuit.v_max
        self._affine: Dict[bytes, Tuple[np.ndarray, np.ndarray]] = {}
        self._full: Dict[bytes, StepMaps] = {}

    @property
    def patterns(self) -> int:
        return len(self._affine)

    def _load_into(self, v: np.ndarray, out: np.ndarray) -> None:
        on = (v >= self.v_min) & (v <= self.v_max)
        out.fill(0.0)
        np.divide(self.drain, v, out=out, where=on)

    def maps(self, u: np.ndarray, h: float) -> StepMaps:
        key = u.tobytes()
        if key not in self._affine:
            self._affine[key] = self.circuit.affine(u)
        m, c = self._affine[key]
        n, dim = self.n, self.dim
        width = self.z.size

        x = np.zeros((dim, width))
        x[:, :dim] = np.eye(dim)
        const = np.zeros((dim, width))
        const[:, -1] = c
        inject = []
        for s in range(4):
            block = np.zeros((dim, width))
            block[n : 2 * n, dim + s * n : dim + (s + 1) * n] = np.eye(n)
            inject.append(block)

        k1 = m @ x + const + inject[0]
        y2 = x + 0.5 * h * k1
        k2 = m @ y2 + const + inject[1]
        y3 = x + 0.5 * h * k2
        k3 = m @ y3 + const + inject[2]
        y4 = x + h * k3
        k4 = m @ y4 + const + inject[3]
        update = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

        rows = slice(n, 2 * n)
        return (y2[rows], y3[rows], y4[rows]), update

    def full_step(self, u: np.ndarray, dt: float) -> StepMaps:
        key = u.tobytes()
        if key not in self._full:
            self._full[key] = self.maps(u, dt)
        return self._full[key]

    def step(self, maps: StepMaps) -> None:
        stages, update = maps
        z, slots = self.z, self.slots
        self._load_into(self.voltage, slots[0])
        self._load_into(stages[0] @ z, slots[1])
        self._load_into(stages[1] @ z, slots[2])
        self._load_into(stages[2] @ z, slots[3])
        self.x[:] = update @ z


def _controller(
    spec: NetworkSpec, cfg: SimConfig, op: OperatingPoint
) -> Callable[[np.ndarray, np.ndarray], np.ndarray]:
    """Duty law d(I, V) before clamping; I and V may stack samples row-wise"""
    duty, v_bar, i_bar, _ = op.arrays()
    ctrl = cfg.controller

    if isinstance(ctrl, OpenLoop):
        fixed = np.full(spec.n, ctrl.duty) if ctrl.duty is not None else duty
        return lambda current, voltage: np.broadcast_to(fixed, np.shape(current))

    if isinstance(ctrl, Proportional):
        v_ref = np.full(spec.n, ctrl.v_ref) if ctrl.v_ref is not None else v_bar

        def proportional(current: np.ndarray, voltage: np.ndarray) -> np.ndarray:
            return duty + ctrl.k_p * (i_bar + ctrl.k_v * (v_ref - voltage) - current)

        return proportional

    if isinstance(ctrl, StateFeedback):
        gains = ctrl.gains or design_individual_gains(spec)
        if gains.n == 1 and spec.n > 1:
            gains = gains.replicate(spec.n)
        if gains.n != spec.n:
            raise ConfigError(f"{gains.n} gains given for {spec.n} converters")
        f_i = np.array([g.f_i for g in gains.gains])
        f_v = np.array([g.f_v for g in gains.gains])

        def state_feedback(current: np.ndarray, voltage: np.ndarray) -> np.ndarray:
            return duty + f_i * (current - i_bar) + f_v * (voltage - v_bar)

        return state_feedback

    raise ConfigError(f"unknown controller {ctrl!r}")


def _initial_state(
    circuit: _Circuit, cfg: SimConfig, op: OperatingPoint, seed: int = 0
) -> np.ndarray:
    """Configured or operating-point start, V jittered uniformly when asked"""
    n = circuit.n
    init = cfg.initial_state
    _, v_bar, i_bar, v_node = op.arrays()

    def pick(values: Optional[List[float]], default: np.ndarray, name: str) -> np.ndarray:
        if values is None:
            return default.copy()
        if len(values) != n:
            raise ConfigError(f"initial_state.{name} needs {n} entries, got {len(values)}")
        return np.asarray(values, dtype=float)

    voltage = pick(init.v0, v_bar, "v0")
    if init.jitter > 0.0:
        rng = np.random.default_rng(seed)
        voltage = voltage + rng.uniform(-init.jitter, init.jitter, n)
        logger.debug(f"Initial voltages jittered by up to {init.jitter:g} V (seed {seed})")

    blocks = [pick(init.i0, i_bar, "i0"), voltage]
    if circuit.has_vc:
        blocks.append(pick(init.vc0, v_node, "vc0"))
    if circuit.has_vf:
        blocks.append(pick(init.vf0, v_node, "vf0"))
    return np.concatenate(blocks)


def _step_size(circuit: _Circuit, cfg: SimConfig) -> Tuple[float, int]:
    shortest = float(np.min(circuit.periods))
    if cfg.model == SimModel.SWITCHED:
        dt = cfg.dt or shortest / settings.SWITCHED_STEPS_PER_PERIOD
        if dt > shortest / settings.MIN_STEPS_PER_PERIOD * (1.0 + 1e-12):
            raise ConfigError(
                f"switched model needs dt <= T/{settings.MIN_STEPS_PER_PERIOD} "
                f"= {shortest / settings.MIN_STEPS_PER_PERIOD:.6g} s, got {dt:.6g} s"
            )
    else:
        dt = cfg.dt or settings.AVERAGED_DT
    if cfg.t_end <= dt:
        raise ConfigError(f"t_end ({cfg.t_end:g} s) must exceed dt ({dt:g} s)")
    return dt, int(round(cfg.t_end / dt))


def _build_trace(
    circuit: _Circuit,
    model: SimModel,
    t: np.ndarray,
    states: np.ndarray,
    duty: np.ndarray,
    position: Optional[np.ndarray] = None,
) -> Trace:
    """Trace frame from stacked states; position is given for switched runs only"""
    n = circuit.n
    voltage, current = states[:, n : 2 * n], states[:, :n]
    drive = position if position is not None else duty

    blocks = [
        ("V", voltage),
        ("I", current),
        ("v_node", circuit.node_voltage(states, drive)),
        ("D", duty),
    ]
    if position is not None:
        blocks.append(("switch", np.where(position > 0.5, POSITION_SOURCE, POSITION_GROUND)))
    blocks.append(("i_load", circuit.load_current(voltage)))
    if circuit.has_vc:
        blocks.append(("vc", states[:, 2 * n : 3 * n]))
    if circuit.has_vf:
        blocks.append(("vf", states[:, circuit.dim - n :]))

    columns = {"t": t}
    for name, values in blocks:
        for k in range(n):
            columns[f"{name}_{k + 1}"] = values[:, k]
    return Trace(
        frame=pd.DataFrame(columns),
        model=model,
        n=n,
        v_min=tuple(float(v) for v in circuit.v_min),
        v_max=tuple(float(v) for v in circuit.v_max),
    )


def _pwm_columns(
    t: np.ndarray, periods: np.ndarray, history: Sequence[Sequence[float]], tol: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Latched duty and switch state (1.0 = source) at each sample time"""
    duty = np.empty((t.size, len(periods)))
    position = np.empty_like(duty)
    for k, period in enumerate(periods):
        latched = np.asarray(history[k])
        index = np.minimum(np.floor((t + tol) / period).astype(int), latched.size - 1)
        duty[:, k] = latched[index]
        position[:, k] = (t - index * period) < latched[index] * period - tol
    return duty, position


def _first_bad_row(samples: np.ndarray, start: int, stop: int, limit: float) -> int:
    block = samples[start:stop]
    bad = ~np.all(np.isfinite(block), axis=1) | (np.max(np.abs(block), axis=1) > limit)
    return start + (int(np.argmax(bad)) if np.any(bad) else block.shape[0])


def _diverged(x: np.ndarray, limit: float) -> bool:
    return not np.all(np.isfinite(x)) or float(np.max(np.abs(x))) > limit


def _divergence_error(limit: float, t: float, trace: Trace) -> DivergenceError:
    logger.warning(f"Simulation diverged at t={t:.6g} s")
    return DivergenceError(f"state left the divergence guard ({limit:.3g}) at t={t:.6g} s", trace)


def _rk4_step(
    fn: Callable[[np.ndarray, float], np.ndarray], x: np.ndarray, t: float, dt: float
) -> np.ndarray:
    k1 = fn(x, t)
    k2 = fn(x + 0.5 * dt * k1, t + 0.5 * dt)
    k3 = fn(x + 0.5 * dt * k2, t + 0.5 * dt)
    k4 = fn(x + dt * k3, t + dt)
    return x + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


class SimulationService:
    """Fixed-step integration of the converter network"""

    @staticmethod
    def prepare(spec: NetworkSpec, cfg: SimConfig) -> Tuple[_Circuit, OperatingPoint]:
        op = solve_operating_point(spec, CouplingConvention.DUTY_WEIGHTED, cfg.design)
        return _Circuit(spec, cfg.design), op

    @staticmethod
    def simulate_switched(spec: NetworkSpec, cfg: SimConfig, seed: int = 0) -> Trace:
        """
        PWM circuit: switch k at position 1 iff (t mod T_k)/T_k < D_k

        D_k is latched at every period boundary t = m T_k from the controller,
        fed either the state averaged over the previous period's samples or
        the state at the boundary (cfg.measurement). A step that contains a
        switch edge is split there, so RK4 only ever integrates one switch
        pattern. Line drops use the instantaneous switched input currents.

        Raises:
            ConfigError: If cfg is not a valid switched run
            DivergenceError: If the state exceeds DIVERGENCE_FACTOR * V_g
        """
        if cfg.model != SimModel.SWITCHED:
            raise ConfigError("simulate_switched needs model = switched")
        circuit, op = SimulationService.prepare(spec, cfg)
        law = _controller(spec, cfg, op)
        dt, n_steps = _step_size(circuit, cfg)
        n = circuit.n
        limit = settings.DIVERGENCE_FACTOR * circuit.v_g
        tol = EDGE_TOLERANCE * dt
        t_final = n_steps * dt
        periods = circuit.periods
        decimation = cfg.decimation

        stepper = _AffineRK4(circuit)
        x = stepper.x
        x[:] = _initial_state(circuit, cfg, op, seed)
        measured = stepper.z[: 2 * n]
        samples = np.empty((n_steps // decimation + 1, circuit.dim))
        samples[0] = x

        # (I, V) summed over the grid samples since each converter's last boundary
        window_sum = measured.copy()
        window_start = np.zeros(n, dtype=int)
        history: List[List[float]] = [[] for _ in range(n)]

        duty = np.zeros(n)
        u = np.zeros(n)
        boundaries = np.zeros(n, dtype=int)
        next_boundary = np.zeros(n)
        switch_off = np.full(n, math.inf)
        t, j, first_row = 0.0, 1, 0

        logger.info(
            f"Switched run: n={n}, dt={dt:.3g} s, {n_steps} steps, "
            f"controller={cfg.controller.kind}"
        )
        while True:
            falling = switch_off <= t + tol
            if np.any(falling):
                u = np.where(falling, 0.0, u)
                switch_off = np.where(falling, math.inf, switch_off)

            due = next_boundary <= t + tol
            if np.any(due):
                # the grid sample at the boundary opens the new period
                on_grid = abs((j - 1) * dt - t) <= tol
                if cfg.measurement == Measurement.PERIOD_AVERAGE:
                    sums = window_sum - measured if on_grid else window_sum.copy()
                    counts = np.tile(j - window_start - int(on_grid), 2).astype(float)
                    seen = counts > 0
                    mean = np.where(seen, sums / np.maximum(counts, 1.0), measured)
                    current, voltage = mean[:n], mean[n:]
                else:
                    current, voltage = x[:n].copy(), x[n : 2 * n].copy()

                latched = np.clip(law(current, voltage), 0.0, 1.0)
                duty = np.where(due, latched, duty)
                for k in np.flatnonzero(due):
                    history[k].append(float(duty[k]))
                start = boundaries * periods
                u = np.where(due, (duty > 0.0).astype(float), u)
                partial = due & (duty > 0.0) & (duty < 1.0)
                switch_off = np.where(
                    partial, start + duty * periods, np.where(due, math.inf, switch_off)
                )
                boundaries = boundaries + due
                next_boundary = boundaries * periods

                reset = np.tile(due, 2)
                window_sum[reset] = measured[reset] if on_grid else 0.0
                window_start[due] = j - 1 if on_grid else j

            if t >= t_final - tol:
                break

            t_next = min(float(np.min(next_boundary)), float(np.min(switch_off)), t_final)
            full = stepper.full_step(u, dt)
            while j <= n_steps:
                t_grid = j * dt
                if t_grid > t_next + tol:
                    break
                h = t_grid - t
                stepper.step(full if abs(h - dt) <= tol else stepper.maps(u, h))
                window_sum += measured
                if j % decimation == 0:
                    samples[j // decimation] = x
                t = t_grid
                j += 1
            if t_next - t > tol:
                stepper.step(stepper.maps(u, t_next - t))
                t = t_next

            recorded = (j - 1) // decimation + 1
            if _diverged(x, limit):
                keep = _first_bad_row(samples, first_row, recorded, limit)
                trace = SimulationService._switched_trace(
                    circuit, samples[:keep], dt * decimation, history, tol
                )
                raise _divergence_error(limit, t, trace)
            first_row = recorded

        logger.debug(f"Switched run used {stepper.patterns} switch pattern(s)")
        return SimulationService._switched_trace(
            circuit, samples, dt * decimation, history, tol
        )

    @staticmethod
    def _switched_trace(
        circuit: _Circuit,
        states: np.ndarray,
        spacing: float,
        history: Sequence[Sequence[float]],
        tol: float,
    ) -> Trace:
        t = np.arange(len(states)) * spacing
        duty, position = _pwm_columns(t, circuit.periods, history, tol)
        return _build_trace(circuit, SimModel.SWITCHED, t, states, duty, position)

    @staticmethod
    def simulate_averaged(spec: NetworkSpec, cfg: SimConfig, seed: int = 0) -> Trace:
        """
        Nonlinear averaged model: L dI/dt = d v_node - V, C dV/dt = I - i_load(V)

        The duty is the clamped controller output evaluated at every RK4 stage.

        Raises:
            ConfigError: If cfg is not a valid averaged run
            DivergenceError: If the state exceeds DIVERGENCE_FACTOR * V_g
        """
        if cfg.model != SimModel.AVERAGED:
            raise ConfigError("simulate_averaged needs model = averaged")
        circuit, op = SimulationService.prepare(spec, cfg)
        law = _controller(spec, cfg, op)
        dt, n_steps = _step_size(circuit, cfg)
        x = _initial_state(circuit, cfg, op, seed)
        n = circuit.n
        limit = settings.DIVERGENCE_FACTOR * circuit.v_g
        decimation = cfg.decimation
        samples = np.empty((n_steps // decimation + 1, circuit.dim))
        samples[0] = x

        def duty_of(states: np.ndarray) -> np.ndarray:
            return np.clip(law(states[..., :n], states[..., n : 2 * n]), 0.0, 1.0)

        def rhs(state: np.ndarray, t: float) -> np.ndarray:
            return circuit.derivative(state, duty_of(state))

        def trace_of(states: np.ndarray) -> Trace:
            t = np.arange(len(states)) * (dt * decimation)
            return _build_trace(circuit, SimModel.AVERAGED, t, states, duty_of(states))

        logger.info(f"Averaged run: n={n}, dt={dt:.3g} s, {n_steps} steps")
        for j in range(1, n_steps + 1):
            x = _rk4_step(rhs, x, (j - 1) * dt, dt)
            if _diverged(x, limit):
                raise _divergence_error(
                    limit, j * dt, trace_of(samples[: (j - 1) // decimation + 1])
                )
            if j % decimation == 0:
                samples[j // decimation] = x

        return trace_of(samples)

    @staticmethod
    def simulate(spec: NetworkSpec, cfg: SimConfig, seed: int = 0) -> Trace:
        """Dispatch on cfg.model; seed drives initial_state.jitter"""
        if cfg.model == SimModel.SWITCHED:
            return SimulationService.simulate_switched(spec, cfg, seed)
        return SimulationService.simulate_averaged(spec, cfg, seed)

    @staticmethod
    def trace_metrics(trace: Trace, window: Tuple[float, float]) -> TraceMetrics:
        """
        pk-pk, mean, min and max of every signal over t1 <= t <= t2

        shutoff_events counts in-range to out-of-range transitions of each
        output voltage inside the window.

        Raises:
            ConfigError: If the window holds no samples
        """
        t1, t2 = window
        if not t1 <= t2:
            raise ConfigError(f"metric window [{t1:g}, {t2:g}] is empty")
        frame = trace.frame
        selected = frame[(frame["t"] >= t1) & (frame["t"] <= t2)]
        if selected.empty:
            raise ConfigError(f"metric window [{t1:g}, {t2:g}] holds no samples")

        signals = selected.drop(columns=["t"] + [c for c in frame.columns if c.startswith("switch_")])
        table = pd.DataFrame(
            {
                "pkpk": signals.max() - signals.min(),
                "mean": signals.mean(),
                "min": signals.min(),
                "max": signals.max(),
            },
            columns=METRIC_COLUMNS,
        )
        table.index.name = "signal"

        events = 0
        for k in range(trace.n):
            v = selected[f"V_{k + 1}"].to_numpy()
            on = (v >= trace.v_min[k]) & (v <= trace.v_max[k])
            events += int(np.sum(on[:-1] & ~on[1:]))
        return TraceMetrics(window=(float(t1), float(t2)), table=table, shutoff_events=events)

    @staticmethod
    def steady_window(trace: Trace, fraction: float = 0.2) -> Tuple[float, float]:
        """Final fraction of the run"""
        t = trace.t
        return float(t[-1] - fraction * (t[-1] - t[0])), float(t[-1])

    @staticmethod
    def moving_average(trace: Trace, signal: str, period: float) -> np.ndarray:
        """Trailing average over one period (NaN until a full period is available)"""
        t = trace.t
        if len(t) < 2:
            return trace.column(signal).astype(float)
        spacing = float(t[1] - t[0])
        window = max(1, int(round(period / spacing)))
        return trace.frame[signal].rolling(window, min_periods=window).mean().to_numpy()


def envelope_ratio(values: np.ndarray, reference: float) -> float:
    """max deviation over the last quarter divided by that over the first quarter"""
    deviation = np.abs(np.asarray(values, dtype=float) - reference)
    quarter = max(1, deviation.size // 4)
    head = float(np.max(deviation[:quarter]))
    tail = float(np.max(deviation[-quarter:]))
    if head == 0.0:
        return math.inf if tail > 0.0 else 1.0
    return tail / head
