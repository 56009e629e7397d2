"""Fixed-step simulation of switched models with mode scheduling and energy accounting.

Every integrator reduces a step of length h in a fixed mode to an affine
map x⁺ = F x + G₀ w(t) + G₁ w(t+h) plus two quadratic forms giving the
energy dissipated and delivered by the sources over the step. Runs of steps
with a constant mode and input are taken in one jump using cached powers of
that map; comparator crossings are found by looking ahead over the jump and
bisecting inside the crossing step.
"""

import csv
import enum
import itertools
import math
import warnings
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Protocol, TextIO

import numpy as np
import scipy.linalg

from lagrange_converters.derive import SINGULAR_PIVOT, ReducedModel, SwitchedModel
from lagrange_converters.elcore import ModeVector

# Steps checked per look-ahead block when comparators are active
LOOKAHEAD_STEPS = 64

# Comparator events allowed inside one step before declaring chattering
MAX_EVENTS_PER_STEP = 16

# Phase offset (in cycles) absorbing round-off in t·f at switching edges
PHASE_EPSILON = 1e-9


class ConfigError(ValueError):
    """Raised for invalid simulation configuration or scheduler rules."""


class SimulationError(RuntimeError):
    """Raised when a run cannot proceed; ``time`` is the simulation time in seconds."""

    def __init__(self, message: str, time: float | None = None) -> None:
        if time is not None:
            message = f"{message} (t={time:.9g} s)"
        super().__init__(message)
        self.time = time


class EventLocationError(SimulationError):
    """Raised when a step handed to the event locator contains no crossing."""


class Integrator(enum.Enum):
    RK4 = "rk4"
    TRAPEZOIDAL = "trapezoidal"
    EXACT = "exact"


@dataclass(frozen=True)
class PwmComplementary:
    """Clocked switch pair: master on for the first ``duty`` of each period."""

    f_sw: float
    duty: float
    master: str
    slave: str

    def __post_init__(self) -> None:
        if not self.f_sw > 0.0:
            raise ConfigError(f"PWM frequency must be positive, got {self.f_sw}")
        if not 0.0 < self.duty < 1.0:
            raise ConfigError(f"PWM duty must lie in (0, 1), got {self.duty}")
        if self.master == self.slave:
            raise ConfigError("PWM master and slave must be different bits")

    @property
    def bits(self) -> tuple[str, ...]:
        return (self.master, self.slave)

    def master_on(self, t: float) -> int:
        return 1 if (t * self.f_sw + PHASE_EPSILON) % 1.0 < self.duty else 0


@dataclass(frozen=True)
class DiodeComparator:
    """State-driven switch bit with a hysteresis band around ``threshold``."""

    bit: str
    monitored: str
    threshold: float
    hysteresis: float = 1e-3

    def __post_init__(self) -> None:
        if not self.hysteresis >= 0.0:
            raise ConfigError(f"Hysteresis must be non-negative, got {self.hysteresis}")

    @property
    def bits(self) -> tuple[str, ...]:
        return (self.bit,)

    @property
    def on_level(self) -> float:
        return self.threshold + 0.5 * self.hysteresis

    @property
    def off_level(self) -> float:
        return self.threshold - 0.5 * self.hysteresis

    def switches(self, value: float, bit: int) -> bool:
        """Whether ``value`` flips a bit currently at ``bit``."""
        if bit:
            return value < self.off_level
        return value >= self.on_level

    def decide(self, value: float, previous: int | None) -> int:
        if value >= self.on_level:
            return 1
        if value < self.off_level:
            return 0
        if previous is None:
            return int(value >= self.threshold)
        return previous


@dataclass(frozen=True)
class FixedMode:
    mode: ModeVector

    @property
    def bits(self) -> tuple[str, ...]:
        return self.mode.names


Rule = PwmComplementary | DiodeComparator | FixedMode


@dataclass(frozen=True)
class ModeScheduler:
    """Ordered rules that together govern every switch bit exactly once."""

    bit_names: tuple[str, ...]
    rules: tuple[Rule, ...]

    def __post_init__(self) -> None:
        governed = [bit for rule in self.rules for bit in rule.bits]
        duplicates = sorted({b for b in governed if governed.count(b) > 1})
        if duplicates:
            raise ConfigError(f"Bits governed by more than one rule: {', '.join(duplicates)}")
        if set(governed) != set(self.bit_names):
            missing = sorted(set(self.bit_names) - set(governed))
            extra = sorted(set(governed) - set(self.bit_names))
            raise ConfigError(
                f"Scheduler does not match switch bits (missing: {missing}, unknown: {extra})"
            )

    @classmethod
    def fixed(cls, mode: ModeVector) -> "ModeScheduler":
        return cls(mode.names, (FixedMode(mode),))

    @property
    def comparators(self) -> tuple[DiodeComparator, ...]:
        return tuple(r for r in self.rules if isinstance(r, DiodeComparator))

    @property
    def pwm(self) -> tuple[PwmComplementary, ...]:
        return tuple(r for r in self.rules if isinstance(r, PwmComplementary))

    def reachable(self) -> list[ModeVector]:
        """Modes the rules can produce."""
        choices: list[list[dict[str, int]]] = []
        for rule in self.rules:
            if isinstance(rule, PwmComplementary):
                choices.append([{rule.master: 1, rule.slave: 0}, {rule.master: 0, rule.slave: 1}])
            elif isinstance(rule, DiodeComparator):
                choices.append([{rule.bit: 0}, {rule.bit: 1}])
            else:
                choices.append([dict(zip(rule.mode.names, rule.mode.bits))])
        modes = []
        for combo in itertools.product(*choices):
            bits: dict[str, int] = {}
            for part in combo:
                bits.update(part)
            modes.append(ModeVector(self.bit_names, tuple(bits[n] for n in self.bit_names)))
        return modes


def mode_at(
    s: ModeScheduler,
    t: float,
    x: Mapping[str, float],
    previous: ModeVector | None = None,
) -> ModeVector:
    """Evaluate the scheduler at time ``t`` and labelled state ``x``.

    Comparator bits inside their hysteresis band hold the bit of
    ``previous``.

    Raises:
        ConfigError: If a monitored state is missing from ``x``.
    """
    bits: dict[str, int] = {}
    for rule in s.rules:
        if isinstance(rule, PwmComplementary):
            on = rule.master_on(t)
            bits[rule.master] = on
            bits[rule.slave] = 1 - on
        elif isinstance(rule, DiodeComparator):
            if rule.monitored not in x:
                raise ConfigError(f"Monitored state {rule.monitored} missing from state")
            held = previous[rule.bit] if previous is not None else None
            bits[rule.bit] = rule.decide(float(x[rule.monitored]), held)
        else:
            bits.update(zip(rule.mode.names, rule.mode.bits))
    return ModeVector(s.bit_names, tuple(bits[n] for n in s.bit_names))


class InputSignal(Protocol):
    def __call__(self, t: float) -> np.ndarray: ...


@dataclass(frozen=True)
class ConstantInput:
    values: tuple[float, ...]

    def __call__(self, t: float) -> np.ndarray:
        return np.array(self.values, dtype=float)

    def next_change(self, t: float) -> float:
        return math.inf


@dataclass(frozen=True)
class SquareWaveInput:
    """Constant inputs except ``index``, a ±amplitude square wave starting positive."""

    values: tuple[float, ...]
    index: int
    amplitude: float
    frequency: float

    def __call__(self, t: float) -> np.ndarray:
        w = np.array(self.values, dtype=float)
        phase = (t * self.frequency + PHASE_EPSILON) % 1.0
        w[self.index] = self.amplitude if phase < 0.5 else -self.amplitude
        return w

    def next_change(self, t: float) -> float:
        half = 0.5 / self.frequency
        return (math.floor(t / half + PHASE_EPSILON) + 1) * half


@dataclass(frozen=True)
class SimConfig:
    t_end: float
    step: float
    integrator: Integrator = Integrator.TRAPEZOIDAL
    x0: Mapping[str, float] = field(default_factory=dict)
    event_tolerance: float | None = None
    decimation: int = 1

    def __post_init__(self) -> None:
        if not (isinstance(self.t_end, (int, float)) and self.t_end > 0.0):
            raise ConfigError(f"t_end must be positive, got {self.t_end}")
        if not (isinstance(self.step, (int, float)) and self.step > 0.0):
            raise ConfigError(f"step must be positive, got {self.step}")
        if not isinstance(self.integrator, Integrator):
            try:
                object.__setattr__(self, "integrator", Integrator(self.integrator))
            except ValueError:
                valid = ", ".join(i.value for i in Integrator)
                raise ConfigError(
                    f"Invalid integrator '{self.integrator}'. Valid options: {valid}"
                ) from None
        if self.event_tolerance is None:
            object.__setattr__(self, "event_tolerance", self.step * 1e-3)
        if not 0.0 < self.event_tolerance <= self.step:
            raise ConfigError("event_tolerance must lie in (0, step]")
        if not isinstance(self.decimation, int) or self.decimation < 1:
            raise ConfigError(f"decimation must be an integer >= 1, got {self.decimation}")
        object.__setattr__(self, "x0", MappingProxyType(dict(self.x0)))

    @property
    def n_steps(self) -> int:
        return max(1, math.ceil(self.t_end / self.step - 1e-9))


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Sampled run: times, states, mode bits and cumulative energies."""

    state_labels: tuple[str, ...]
    bit_names: tuple[str, ...]
    time: np.ndarray
    states: np.ndarray
    modes: np.ndarray
    stored: np.ndarray
    source: np.ndarray
    dissipated: np.ndarray
    events: tuple[tuple[float, str, int], ...] = ()
    metadata: Mapping[str, str] = field(default_factory=dict)

    def __len__(self) -> int:
        return self.time.shape[0]

    def column(self, label: str) -> np.ndarray:
        """A state, mode bit or energy column by name."""
        if label in self.state_labels:
            return self.states[:, self.state_labels.index(label)]
        if label in self.bit_names:
            return self.modes[:, self.bit_names.index(label)]
        energies = {"E_stored": self.stored, "E_source": self.source, "E_diss": self.dissipated}
        if label in energies:
            return energies[label]
        raise KeyError(label)


def energy_residual(tr: Trajectory) -> np.ndarray:
    """E_stored - E_stored(0) - E_source + E_diss at every sample."""
    return tr.stored - tr.stored[0] - tr.source + tr.dissipated


def export_csv(tr: Trajectory, stream: TextIO, state_order: Sequence[str] | None = None) -> None:
    """Write the trajectory as CSV with LF line endings and round-trip float precision.

    State columns follow ``state_order`` when given, else the trajectory's
    own label order.

    Raises:
        ConfigError: If ``state_order`` is not a permutation of the state labels.
    """
    labels = tr.state_labels if state_order is None else tuple(state_order)
    if sorted(labels) != sorted(tr.state_labels):
        raise ConfigError(
            f"CSV state order {list(labels)} does not match states {list(tr.state_labels)}"
        )
    index = [tr.state_labels.index(label) for label in labels]
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(["t", *labels, *tr.bit_names, "E_stored", "E_source", "E_diss"])
    columns = np.column_stack([
        tr.time, tr.states[:, index], tr.stored, tr.source, tr.dissipated,
    ]).tolist()
    s = len(labels)
    modes = tr.modes.tolist()
    for values, bits in zip(columns, modes):
        writer.writerow(values[: s + 1] + bits + values[s + 1:])


def _lu(matrix: np.ndarray, what: str) -> tuple[np.ndarray, np.ndarray]:
    scale = float(np.max(np.abs(matrix)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix)
    if scale == 0.0 or np.min(np.abs(np.diag(lu))) < SINGULAR_PIVOT * scale:
        raise SimulationError(f"{what} is singular")
    return lu, piv


def _state_map(
    a: np.ndarray, b: np.ndarray, h: float, integrator: Integrator
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    s, p = b.shape
    if integrator is Integrator.EXACT:
        aug = np.zeros((s + p, s + p))
        aug[:s, :s] = a
        aug[:s, s:] = b
        phi = scipy.linalg.expm(aug * h)
        return phi[:s, :s], phi[:s, s:], np.zeros((s, p))
    if integrator is Integrator.TRAPEZOIDAL:
        eye = np.eye(s)
        factor = _lu(eye - 0.5 * h * a, "Trapezoidal system I - h/2 A")
        gain = scipy.linalg.lu_solve(factor, 0.5 * h * b)
        return scipy.linalg.lu_solve(factor, eye + 0.5 * h * a), gain, gain
    # RK4 with the midpoint input taken as the mean of the step's end inputs
    x0 = np.hstack([np.eye(s), np.zeros((s, 2 * p))])
    w0 = np.hstack([np.zeros((p, s)), np.eye(p), np.zeros((p, p))])
    w1 = np.hstack([np.zeros((p, s + p)), np.eye(p)])
    wm = 0.5 * (w0 + w1)
    k1 = a @ x0 + b @ w0
    k2 = a @ (x0 + 0.5 * h * k1) + b @ wm
    k3 = a @ (x0 + 0.5 * h * k2) + b @ wm
    k4 = a @ (x0 + h * k3) + b @ w1
    out = x0 + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return out[:, :s], out[:, s:s + p], out[:, s + p:]


def step(
    model: ReducedModel,
    x: object,
    w: object,
    h: float,
    integrator: Integrator | str = Integrator.TRAPEZOIDAL,
    w_next: object | None = None,
) -> np.ndarray:
    """Advance one step of length ``h`` in a fixed mode.

    Args:
        model: A regular reduced model.
        x: State at the start of the step.
        w: Input at the start of the step.
        h: Step length in seconds.
        integrator: Integration scheme.
        w_next: Input at the end of the step; defaults to ``w``.

    Returns:
        The state at the end of the step.

    Raises:
        SimulationError: For descriptor models or a singular trapezoidal system.
    """
    if not model.is_regular:
        raise SimulationError("Descriptor models cannot be integrated")
    f, g0, g1 = _state_map(model.a, model.b, h, Integrator(integrator))
    w = np.asarray(w, dtype=float).reshape(-1)
    w_next = w if w_next is None else np.asarray(w_next, dtype=float).reshape(-1)
    return f @ np.asarray(x, dtype=float) + g0 @ w + g1 @ w_next


def _power_forms(model: ReducedModel) -> tuple[np.ndarray, np.ndarray]:
    """Dissipated and source power as quadratic forms in y = (x, w)."""
    if model.energy is None:
        raise SimulationError("Model carries no energy map")
    energy = model.energy
    s = len(model.state_labels)
    currents = energy.currents
    dissipated = currents.T @ energy.resistance @ currents
    cross = np.zeros_like(dissipated)
    cross[s:, :] = energy.input_map.T @ currents
    return dissipated, 0.5 * (cross + cross.T)


def _exact_integrals(a: np.ndarray, b: np.ndarray, forms: Sequence[np.ndarray], h: float) -> list[np.ndarray]:
    """∫₀ʰ yᵀ P y dt along y' = [[A, B], [0, 0]] y, as forms in y(0).

    Uses the Kronecker sum of the augmented matrix with itself, whose
    eigenvalues are pairwise sums of the mode's and stay in the left
    half-plane.
    """
    s, p = b.shape
    d = s + p
    aug = np.zeros((d, d))
    aug[:s, :s] = a
    aug[:s, s:] = b
    eye = np.eye(d)
    kron = np.kron(aug.T, eye) + np.kron(eye, aug.T)
    n = d * d
    big = np.zeros((n + len(forms), n + len(forms)))
    big[:n, :n] = kron * h
    for j, form in enumerate(forms):
        big[:n, n + j] = form.reshape(-1) * h
    block = scipy.linalg.expm(big)
    results = []
    for j in range(len(forms)):
        w = block[:n, n + j].reshape(d, d)
        results.append(0.5 * (w + w.T))
    return results


@dataclass(frozen=True, eq=False)
class StepKernel:
    """One step of length h in one mode over z = (x, w(t), w(t+h))."""

    h: float
    state: np.ndarray
    input_now: np.ndarray
    input_next: np.ndarray
    dissipation: np.ndarray
    source: np.ndarray

    def advance(
        self, x: np.ndarray, w0: np.ndarray, w1: np.ndarray
    ) -> tuple[np.ndarray, float, float]:
        z = np.concatenate([x, w0, w1])
        x_next = self.state @ x + self.input_now @ w0 + self.input_next @ w1
        return x_next, float(z @ self.dissipation @ z), float(z @ self.source @ z)


def build_kernel(model: ReducedModel, h: float, integrator: Integrator) -> StepKernel:
    """Affine step map and energy quadrature consistent with ``integrator``.

    Raises:
        SimulationError: For descriptor models or a singular trapezoidal system.
    """
    if not model.is_regular:
        raise SimulationError("Descriptor models cannot be integrated")
    a, b = model.a, model.b
    s, p = b.shape
    f, g0, g1 = _state_map(a, b, h, integrator)
    power_d, power_s = _power_forms(model)
    eye_s, eye_p = np.eye(s), np.eye(p)
    zero_ps, zero_pp = np.zeros((p, s)), np.zeros((p, p))
    if integrator is Integrator.TRAPEZOIDAL:
        midpoint = np.block([
            [0.5 * (eye_s + f), 0.5 * g0, 0.5 * g1],
            [zero_ps, 0.5 * eye_p, 0.5 * eye_p],
        ])
        forms = [h * midpoint.T @ form @ midpoint for form in (power_d, power_s)]
    elif integrator is Integrator.RK4:
        start = np.block([[eye_s, np.zeros((s, 2 * p))], [zero_ps, eye_p, zero_pp]])
        end = np.block([[f, g0, g1], [zero_ps, zero_pp, eye_p]])
        forms = [
            0.5 * h * (start.T @ form @ start + end.T @ form @ end)
            for form in (power_d, power_s)
        ]
    else:
        held = np.block([[eye_s, np.zeros((s, 2 * p))], [zero_ps, eye_p, zero_pp]])
        forms = [held.T @ w @ held for w in _exact_integrals(a, b, (power_d, power_s), h)]
    return StepKernel(h, f, g0, g1, forms[0], forms[1])


class _Propagator:
    """Powers of one kernel under a constant input, over y = (x, w)."""

    def __init__(self, kernel: StepKernel) -> None:
        s, p = kernel.input_now.shape
        self.size = s
        d = s + p
        g = np.zeros((d, d))
        g[:s, :s] = kernel.state
        g[:s, s:] = kernel.input_now + kernel.input_next
        g[s:, s:] = np.eye(p)
        lift = np.zeros((s + 2 * p, d))
        lift[:s, :s] = np.eye(s)
        lift[s:s + p, s:] = np.eye(p)
        lift[s + p:, s:] = np.eye(p)
        one = (g, lift.T @ kernel.dissipation @ lift, lift.T @ kernel.source @ lift)
        self._doubling = [one]
        self._cache: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {1: one}
        self._stacks: dict[tuple[int, ...], np.ndarray] = {}

    @staticmethod
    def _then(first, second):
        g1, d1, s1 = first
        g2, d2, s2 = second
        return g2 @ g1, d1 + g1.T @ d2 @ g1, s1 + g1.T @ s2 @ g1

    def power(self, n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(Gⁿ, Σ dissipation forms, Σ source forms) over n steps."""
        if n in self._cache:
            return self._cache[n]
        result = None
        bit = 0
        remaining = n
        while remaining:
            while len(self._doubling) <= bit:
                last = self._doubling[-1]
                self._doubling.append(self._then(last, last))
            if remaining & 1:
                part = self._doubling[bit]
                result = part if result is None else self._then(result, part)
            remaining >>= 1
            bit += 1
        self._cache[n] = result
        return result

    def monitor_stack(self, rows: tuple[int, ...], m: int) -> np.ndarray:
        """Rows of G^j for j = 1..m, shape (m, len(rows), d)."""
        stack = self._stacks.get(rows)
        if stack is None or stack.shape[0] < m:
            g = self._doubling[0][0]
            layers = [g[list(rows)]]
            for _ in range(max(m, LOOKAHEAD_STEPS) - 1):
                layers.append(layers[-1] @ g)
            stack = np.stack(layers)
            self._stacks[rows] = stack
        return stack[:m]


def locate_event(
    rule: DiodeComparator,
    bit: int,
    monitor: Callable[[float], float],
    t: float,
    h: float,
    tolerance: float,
) -> float:
    """Bisect the first time in (t, t+h] at which ``rule`` flips ``bit``.

    Args:
        rule: The comparator whose active level is crossed.
        bit: The comparator bit at the start of the interval.
        monitor: Monitored value at offset tau in [0, h] from ``t``.
        t: Start time of the interval.
        h: Interval length.
        tolerance: Width of the final bracket.

    Returns:
        The crossing time, at most ``tolerance`` after the true crossing;
        exactly ``t + h`` when the level is first reached at the end.

    Raises:
        EventLocationError: If the interval does not contain a crossing.
    """
    if not rule.switches(monitor(h), bit):
        raise EventLocationError(f"No crossing of {rule.monitored} within the step", time=t)
    if rule.switches(monitor(0.0), bit):
        raise EventLocationError(
            f"{rule.monitored} is already past its switching level at the step start", time=t
        )
    lo, hi = 0.0, h
    for _ in range(max(1, math.ceil(math.log2(h / tolerance)))):
        mid = 0.5 * (lo + hi)
        if rule.switches(monitor(mid), bit):
            hi = mid
        else:
            lo = mid
    return t + hi


class _Runner:
    """State of one simulation run."""

    def __init__(
        self,
        model: SwitchedModel,
        scheduler: ModeScheduler,
        inputs: InputSignal,
        cfg: SimConfig,
    ) -> None:
        self.model = model
        self.scheduler = scheduler
        self.inputs = inputs
        self.cfg = cfg
        self.h = cfg.step
        self.n_steps = cfg.n_steps
        self.integrator = cfg.integrator
        labels = model.state_labels
        self.comparators = [(rule, labels.index(rule.monitored)) for rule in scheduler.comparators]
        self.monitor_rows = tuple(index for _, index in self.comparators)
        self._kernels: dict[ModeVector, StepKernel] = {}
        self._propagators: dict[ModeVector, _Propagator] = {}
        self.events: list[tuple[float, str, int]] = []
        self._pwm = [self._pwm_grid(rule) for rule in scheduler.pwm]
        self._fixed: dict[str, int] = {}
        for rule in scheduler.rules:
            if isinstance(rule, FixedMode):
                self._fixed.update(zip(rule.mode.names, rule.mode.bits))

    def _pwm_grid(self, rule: PwmComplementary) -> tuple[PwmComplementary, int, int]:
        period = 1.0 / (rule.f_sw * self.h)
        steps = round(period)
        if steps < 2 or abs(period - steps) > 1e-6 * period:
            raise SimulationError(
                f"Switching period {1.0 / rule.f_sw:.9g} s is not a whole number of steps"
            )
        on = round(rule.duty * steps)
        if abs(rule.duty * steps - on) > 1e-6 or not 0 < on < steps:
            raise SimulationError(f"Duty {rule.duty} does not fall on the step grid")
        return rule, steps, on

    def kernel(self, mode: ModeVector) -> StepKernel:
        kernel = self._kernels.get(mode)
        if kernel is None:
            kernel = build_kernel(self.model[mode], self.h, self.integrator)
            self._kernels[mode] = kernel
        return kernel

    def propagator(self, mode: ModeVector) -> _Propagator:
        prop = self._propagators.get(mode)
        if prop is None:
            prop = _Propagator(self.kernel(mode))
            self._propagators[mode] = prop
        return prop

    def mode(self, k: int, x: np.ndarray, previous: ModeVector | None) -> ModeVector:
        bits = dict(self._fixed)
        for rule, steps, on in self._pwm:
            master = 1 if k % steps < on else 0
            bits[rule.master] = master
            bits[rule.slave] = 1 - master
        for rule, index in self.comparators:
            held = previous[rule.bit] if previous is not None else None
            bits[rule.bit] = rule.decide(float(x[index]), held)
        names = self.scheduler.bit_names
        return ModeVector(names, tuple(bits[n] for n in names))

    def next_pwm_edge(self, k: int) -> int:
        edge = self.n_steps
        for _, steps, on in self._pwm:
            r = k % steps
            edge = min(edge, k - r + (on if r < on else steps))
        return edge

    def next_input_step(self, k: int) -> int:
        next_change = getattr(self.inputs, "next_change", None)
        if next_change is None:
            return k + 1
        t_change = next_change(k * self.h)
        if not math.isfinite(t_change):
            return self.n_steps
        return max(k + 1, math.ceil(t_change / self.h - 1e-6))

    def energy(self, mode: ModeVector, x: np.ndarray) -> float:
        return 0.5 * float(x @ self.model[mode].energy.storage @ x)

    def _crossing(self, values: np.ndarray, mode: ModeVector) -> int | None:
        """First look-ahead index at which any comparator flips."""
        first = None
        for j, (rule, _) in enumerate(self.comparators):
            column = values[:, j]
            if mode[rule.bit]:
                hits = np.flatnonzero(column < rule.off_level)
            else:
                hits = np.flatnonzero(column >= rule.on_level)
            if hits.size and (first is None or hits[0] < first):
                first = int(hits[0])
        return first

    def bulk(
        self, mode: ModeVector, x: np.ndarray, w: np.ndarray, count: int
    ) -> tuple[np.ndarray, int, float, float, bool]:
        """Advance up to ``count`` steps; stop before a step with a comparator flip."""
        prop = self.propagator(mode)
        y = np.concatenate([x, w])
        s = prop.size
        if not self.comparators:
            g, dis, src = prop.power(count)
            return (g @ y)[:s], count, float(y @ dis @ y), float(y @ src @ y), False
        done = 0
        total_d = total_s = 0.0
        while done < count:
            m = min(LOOKAHEAD_STEPS, count - done)
            values = prop.monitor_stack(self.monitor_rows, m) @ y
            first = self._crossing(values, mode)
            advance = m if first is None else first
            if advance:
                g, dis, src = prop.power(advance)
                total_d += float(y @ dis @ y)
                total_s += float(y @ src @ y)
                y = g @ y
                done += advance
            if first is not None:
                return y[:s], done, total_d, total_s, True
        return y[:s], done, total_d, total_s, False

    def single(
        self, mode: ModeVector, x: np.ndarray, k: int, w0: np.ndarray, w1: np.ndarray
    ) -> tuple[np.ndarray, ModeVector, float, float]:
        """One step from t_k, splitting it at every comparator crossing."""
        t = k * self.h
        offset = 0.0
        total_d = total_s = 0.0
        for _ in range(MAX_EVENTS_PER_STEP):
            length = self.h - offset
            start = w0 + (offset / self.h) * (w1 - w0)
            if offset == 0.0:
                kernel = self.kernel(mode)
            else:
                kernel = build_kernel(self.model[mode], length, self.integrator)
            x_end, dis, src = kernel.advance(x, start, w1)
            crossing = [
                (rule, index) for rule, index in self.comparators
                if rule.switches(float(x_end[index]), mode[rule.bit])
            ]
            if not crossing:
                return x_end, mode, total_d + dis, total_s + src
            reduced = self.model[mode]
            earliest = None
            for rule, index in crossing:

                def monitor(tau: float, index: int = index) -> float:
                    w_tau = w0 + ((offset + tau) / self.h) * (w1 - w0)
                    f, g0, g1 = _state_map(reduced.a, reduced.b, tau, self.integrator)
                    return float((f @ x + g0 @ start + g1 @ w_tau)[index])

                t_cross = locate_event(
                    rule, mode[rule.bit], monitor, t + offset, length, self.cfg.event_tolerance
                )
                if earliest is None or t_cross < earliest[0]:
                    earliest = (t_cross, rule)
            t_cross, rule = earliest
            tau = min(t_cross - (t + offset), length)
            w_tau = w0 + ((offset + tau) / self.h) * (w1 - w0)
            sub = build_kernel(reduced, tau, self.integrator)
            x, dis, src = sub.advance(x, start, w_tau)
            total_d += dis
            total_s += src
            offset += tau
            bit = 1 - mode[rule.bit]
            mode = mode.replace(rule.bit, bit)
            if mode not in self.model.modes:
                raise SimulationError(f"Comparator produced unreachable mode {mode}", time=t_cross)
            self.events.append((t_cross, rule.bit, bit))
            if offset >= self.h:
                return x, mode, total_d, total_s
        raise SimulationError("Comparator chattering: too many events in one step", time=t)

    def run(self, x0: np.ndarray, metadata: Mapping[str, str]) -> Trajectory:
        h, n, decimation = self.h, self.n_steps, self.cfg.decimation
        count = n // decimation + 1 + (1 if n % decimation else 0)
        s = len(self.model.state_labels)
        times = np.empty(count)
        states = np.empty((count, s))
        modes = np.empty((count, len(self.scheduler.bit_names)), dtype=np.int8)
        stored = np.empty(count)
        source = np.empty(count)
        dissipated = np.empty(count)

        x = x0
        k = 0
        mode = self.mode(0, x, None)
        e_src = e_diss = 0.0
        row = 0

        def record(k: int, mode: ModeVector) -> None:
            nonlocal row
            times[row] = k * h
            states[row] = x
            modes[row] = mode.bits
            stored[row] = self.energy(mode, x)
            source[row] = e_src
            dissipated[row] = e_diss
            row += 1

        record(0, mode)
        next_record = decimation
        while k < n:
            mode = self.mode(k, x, mode)
            w0 = self.inputs(k * h)
            stop = min(n, next_record, self.next_pwm_edge(k), self.next_input_step(k))
            w_end = self.inputs(stop * h)
            mixed = not np.array_equal(w_end, w0)
            count_bulk = stop - k - (1 if mixed else 0)
            try:
                event = False
                if count_bulk > 0:
                    x, done, dis, src, event = self.bulk(mode, x, w0, count_bulk)
                    k += done
                    e_diss += dis
                    e_src += src
                if event or (mixed and k == stop - 1):
                    w1 = self.inputs((k + 1) * h) if mixed and k == stop - 1 else w0
                    x, mode, dis, src = self.single(mode, x, k, w0, w1)
                    k += 1
                    e_diss += dis
                    e_src += src
            except SimulationError as e:
                if e.time is None:
                    raise SimulationError(str(e), time=k * h) from e
                raise
            if not np.all(np.isfinite(x)):
                raise SimulationError("State became non-finite", time=k * h)
            if k == next_record or k == n:
                record(k, self.mode(k, x, mode))
                if k == next_record:
                    next_record += decimation
        return Trajectory(
            state_labels=self.model.state_labels,
            bit_names=self.scheduler.bit_names,
            time=times[:row],
            states=states[:row],
            modes=modes[:row],
            stored=stored[:row],
            source=source[:row],
            dissipated=dissipated[:row],
            events=tuple(self.events),
            metadata=MappingProxyType(dict(metadata)),
        )


def simulate(
    model: SwitchedModel,
    sched: ModeScheduler,
    inputs: InputSignal,
    cfg: SimConfig,
    metadata: Mapping[str, str] | None = None,
) -> Trajectory:
    """Simulate a switched model on a fixed step grid.

    PWM edges and input discontinuities fall on step boundaries; comparator
    crossings are located inside steps to ``cfg.event_tolerance``.

    Args:
        model: Reduced models for the circuit's modes.
        sched: Scheduler governing every switch bit of the model.
        inputs: Input vector as a function of time; an optional
            ``next_change(t)`` method lets constant stretches be jumped.
        cfg: Run configuration.
        metadata: Free-form strings copied into the trajectory.

    Returns:
        The sampled trajectory.

    Raises:
        ConfigError: If the scheduler or initial state do not fit the model.
        SimulationError: If a reachable mode is a descriptor model or a step
            fails; the error carries the simulation time.
    """
    if sched.bit_names != model.bit_names:
        raise ConfigError(
            f"Scheduler bits {sched.bit_names} do not match model bits {model.bit_names}"
        )
    for rule in sched.comparators:
        if rule.monitored not in model.state_labels:
            raise ConfigError(f"Monitored state {rule.monitored} is not a model state")
    unknown = sorted(set(cfg.x0) - set(model.state_labels))
    if unknown:
        raise ConfigError(f"Unknown initial-state label(s): {', '.join(unknown)}")
    for mode in sched.reachable():
        if mode not in model.modes:
            raise SimulationError(f"Scheduler reaches mode {mode}, which the model lacks", time=0.0)
        if not model[mode].is_regular:
            raise SimulationError(
                f"Mode {mode} is a descriptor model and cannot be simulated", time=0.0
            )
    x0 = np.array([float(cfg.x0.get(label, 0.0)) for label in model.state_labels])
    return _Runner(model, sched, inputs, cfg).run(x0, metadata or {})


@dataclass(frozen=True)
class SteadyStateMetrics:
    window: float
    mean: Mapping[str, float]
    ripple: Mapping[str, float]
    dwell: Mapping[ModeVector, float]
    mode_mean: Mapping[ModeVector, Mapping[str, float]]


def steady_state_metrics(tr: Trajectory, window: float) -> SteadyStateMetrics:
    """Means, peak-to-peak ripple and mode dwell over the final ``window`` seconds.

    Samples in (t_end - window, t_end] are used; a window shorter than the
    last sample spacing still covers the final sample. Each sample is
    attributed to the mode recorded at the previous sample, i.e. the mode
    that produced it.

    Raises:
        ConfigError: If the window is not positive or exceeds the trajectory.
    """
    if not window > 0.0:
        raise ConfigError(f"Metrics window must be positive, got {window}")
    if len(tr) < 2:
        raise ConfigError("Metrics need at least two samples")
    t_end = float(tr.time[-1])
    span = t_end - float(tr.time[0])
    if window > span * (1.0 + 1e-9):
        raise ConfigError(
            f"Metrics window {window:.9g} s exceeds the trajectory length {span:.9g} s"
        )
    spacing = float(tr.time[-1] - tr.time[-2])
    first = int(np.searchsorted(tr.time, t_end - window + 0.5 * spacing, side="right"))
    selected = np.arange(min(max(first, 1), len(tr) - 1), len(tr))
    states = tr.states[selected]
    producing = tr.modes[selected - 1]
    mean = {label: float(np.mean(states[:, i])) for i, label in enumerate(tr.state_labels)}
    ripple = {
        label: float(np.ptp(states[:, i])) for i, label in enumerate(tr.state_labels)
    }
    dwell = {}
    mode_mean = {}
    for bits in np.unique(producing, axis=0):
        mask = np.all(producing == bits, axis=1)
        mode = ModeVector(tr.bit_names, tuple(int(b) for b in bits))
        dwell[mode] = float(np.count_nonzero(mask)) / len(selected)
        mode_mean[mode] = {
            label: float(np.mean(states[mask, i])) for i, label in enumerate(tr.state_labels)
        }
    return SteadyStateMetrics(window, mean, ripple, dwell, mode_mean)


def averaged_dc_solve(
    model: SwitchedModel,
    d: float,
    w: object,
    on_mode: ModeVector | None = None,
) -> np.ndarray:
    """DC operating point of the duty-weighted average of a two-mode model.

    Args:
        model: A regular model with exactly two modes.
        d: Fraction of time spent in ``on_mode``.
        w: Constant input vector.
        on_mode: The mode active for fraction ``d``; defaults to the mode
            whose first switch bit is 1.

    Returns:
        x solving 0 = (d A_on + (1-d) A_off) x + (d B_on + (1-d) B_off) w.

    Raises:
        ConfigError: If the model does not have two modes or ``d`` is outside (0, 1).
        SimulationError: If the averaged state matrix is singular.
    """
    if len(model.modes) != 2:
        raise ConfigError(f"Averaging needs exactly two modes, got {len(model.modes)}")
    if not 0.0 < d < 1.0:
        raise ConfigError(f"Duty must lie in (0, 1), got {d}")
    if on_mode is None:
        on_mode = next(m for m in model.modes if m.bits and m.bits[0] == 1)
    off_mode = next(m for m in model.modes if m != on_mode)
    on, off = model[on_mode], model[off_mode]
    a = d * on.a + (1.0 - d) * off.a
    b = d * on.b + (1.0 - d) * off.b
    factor = _lu(a, "Averaged state matrix")
    return scipy.linalg.lu_solve(factor, -(b @ np.asarray(w, dtype=float)))
