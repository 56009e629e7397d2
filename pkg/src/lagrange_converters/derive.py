"""Assembly of per-mode EL equations and their reduction to state-space form."""

import enum
import warnings
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np
import scipy.linalg

from lagrange_converters.elcore import (
    CircuitDescription,
    CoordinateSet,
    ModeVector,
)

# |pivot| < SINGULAR_PIVOT * max|entry| is treated as singular
SINGULAR_PIVOT = 1e-12


class ReductionError(ValueError):
    """Raised when a mode cannot be reduced to regular or descriptor form."""

    def __init__(self, message: str, coordinate: str | None = None) -> None:
        super().__init__(message)
        self.coordinate = coordinate


class ModelKind(enum.Enum):
    REGULAR = "regular"
    DESCRIPTOR = "descriptor"


@dataclass(frozen=True, eq=False)
class SecondOrderForm:
    """M q'' + R q' + S q = B_w w for one mode, S = Pᵀ diag(1/C) P."""

    mode: ModeVector
    coords: CoordinateSet
    mass: np.ndarray
    damping: np.ndarray
    stiffness: np.ndarray
    charge_map: np.ndarray
    elastance: np.ndarray
    input_map: np.ndarray
    input_names: tuple[str, ...]
    capacitor_labels: tuple[str, ...]

    def residual(
        self, q: np.ndarray, qdot: np.ndarray, qddot: np.ndarray, w: np.ndarray
    ) -> np.ndarray:
        return (
            self.mass @ qddot
            + self.damping @ qdot
            + self.stiffness @ q
            - self.input_map @ w
        )


@dataclass(frozen=True, eq=False)
class EnergyMap:
    """Maps a reduced state back to loop currents and stored energy.

    The full current vector is q' = currents @ (x, w); stored energy is
    1/2 xᵀ storage x.
    """

    storage: np.ndarray
    currents: np.ndarray
    resistance: np.ndarray
    input_map: np.ndarray


@dataclass(frozen=True, eq=False)
class ReducedModel:
    """E x' = A x + B w with labelled states; E is None for regular models."""

    kind: ModelKind
    a: np.ndarray
    b: np.ndarray
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    e: np.ndarray | None = None
    energy: EnergyMap | None = None

    def __post_init__(self) -> None:
        s = len(self.state_labels)
        if self.a.shape != (s, s) or self.b.shape != (s, len(self.input_labels)):
            raise ReductionError(
                f"Model matrices {self.a.shape}/{self.b.shape} do not match "
                f"{s} states and {len(self.input_labels)} inputs"
            )
        if len(set(self.state_labels)) != s:
            raise ReductionError(f"Duplicate state labels: {self.state_labels}")
        if (self.kind is ModelKind.DESCRIPTOR) != (self.e is not None):
            raise ReductionError("Only descriptor models carry an E matrix")

    @classmethod
    def regular(
        cls,
        a: object,
        b: object,
        state_labels: Sequence[str] | None = None,
        input_labels: Sequence[str] | None = None,
    ) -> "ReducedModel":
        """Wrap plain (A, B) matrices, labelling states x0.. and inputs w0.. by default."""
        a = np.atleast_2d(np.asarray(a, dtype=float))
        b = np.asarray(b, dtype=float).reshape(a.shape[0], -1)
        if state_labels is None:
            state_labels = [f"x{i}" for i in range(a.shape[0])]
        if input_labels is None:
            input_labels = [f"w{i}" for i in range(b.shape[1])]
        return cls(ModelKind.REGULAR, a, b, tuple(state_labels), tuple(input_labels))

    @property
    def is_regular(self) -> bool:
        return self.kind is ModelKind.REGULAR

    @property
    def descriptor(self) -> np.ndarray:
        """E, the identity for regular models."""
        if self.e is None:
            return np.eye(len(self.state_labels))
        return self.e


@dataclass(frozen=True)
class SwitchedModel:
    """Reduced models for every reachable mode, sharing labels."""

    circuit_name: str
    bit_names: tuple[str, ...]
    state_labels: tuple[str, ...]
    input_labels: tuple[str, ...]
    modes: Mapping[ModeVector, ReducedModel]

    def __post_init__(self) -> None:
        object.__setattr__(self, "modes", MappingProxyType(dict(self.modes)))
        for mode, model in self.modes.items():
            if model.state_labels != self.state_labels:
                raise ReductionError(
                    f"Mode {mode} has states {model.state_labels}, "
                    f"expected {self.state_labels}"
                )
            if model.input_labels != self.input_labels:
                raise ReductionError(f"Mode {mode} reorders the inputs")

    def __getitem__(self, mode: ModeVector) -> ReducedModel:
        return self.modes[mode]

    @property
    def is_regular(self) -> bool:
        return all(m.is_regular for m in self.modes.values())


def assemble(c: CircuitDescription, u: ModeVector) -> SecondOrderForm:
    """Package the EL equation of mode ``u`` as a second-order form.

    Raises:
        UnknownModeError: If ``u`` is not reachable in ``c``.
    """
    comp = c.components(u)
    return SecondOrderForm(
        mode=u,
        coords=c.coords,
        mass=comp.mass,
        damping=comp.dissipation,
        stiffness=comp.stiffness,
        charge_map=comp.charge_map,
        elastance=comp.elastance,
        input_map=comp.input_map,
        input_names=comp.input_names,
        capacitor_labels=comp.capacitor_labels,
    )


def partition(f: SecondOrderForm) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Split coordinates into inertial (nonzero mass row) and non-inertial sets."""
    inertial = tuple(i for i in range(len(f.coords)) if np.any(f.mass[i]))
    rest = tuple(i for i in range(len(f.coords)) if i not in inertial)
    return inertial, rest


class _Factor:
    """Partial-pivot LU of a square block with the singular-pivot check."""

    def __init__(self, matrix: np.ndarray, labels: Sequence[str], what: str) -> None:
        self.size = matrix.shape[0]
        if self.size == 0:
            self._lu = None
            return
        scale = float(np.max(np.abs(matrix)))
        if scale == 0.0:
            raise ReductionError(
                f"{what} is zero at coordinate {labels[0]}", coordinate=labels[0]
            )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            lu, piv = scipy.linalg.lu_factor(matrix)
        pivots = np.abs(np.diag(lu))
        bad = np.flatnonzero(pivots < SINGULAR_PIVOT * scale)
        if bad.size:
            name = labels[int(bad[0])]
            raise ReductionError(f"{what} is singular at coordinate {name}", coordinate=name)
        self._lu = (lu, piv)

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        if self._lu is None:
            return np.zeros((0,) + rhs.shape[1:])
        return scipy.linalg.lu_solve(self._lu, rhs)


def _circuit_inertial(c: CircuitDescription) -> tuple[int, ...]:
    inertial: set[int] = set()
    for comp in c.modes.values():
        inertial.update(i for i in range(comp.size) if np.any(comp.mass[i]))
    return tuple(sorted(inertial))


def reduce(f: SecondOrderForm, c: CircuitDescription) -> ReducedModel:
    """Reduce one mode to x = (inertial currents, capacitor voltages).

    Non-inertial currents are eliminated through their dissipation block
    R_NN. Coordinates that are inertial in some other mode but have lost
    their mass here keep their current as a state with a zero row of E;
    their algebraic row is the EL row scaled by the coordinate's inductance.

    Args:
        f: Second-order form of one mode of ``c``.
        c: The circuit, used to fix the inertial set across all modes.

    Returns:
        A regular or descriptor ReducedModel with an EnergyMap attached.

    Raises:
        ReductionError: If R_NN or the active mass block is singular; the
            error names the offending coordinate.
    """
    n = len(f.coords)
    p = len(f.input_names)
    m = len(f.capacitor_labels)
    inertial = _circuit_inertial(c)
    active, _ = partition(f)
    free = tuple(i for i in range(n) if i not in inertial)
    k = len(inertial)
    s = k + m

    names = f.coords.names
    r = f.damping
    pm = f.charge_map
    bw = f.input_map

    # q'_N = x_i q'_I + x_v v + x_w w
    r_nn = _Factor(r[np.ix_(free, free)], [names[i] for i in free], "Dissipation block R_NN")
    x_i = -r_nn.solve(r[np.ix_(free, inertial)])
    x_v = -r_nn.solve(pm[:, list(free)].T)
    x_w = r_nn.solve(bw[list(free)])

    cur_x = np.zeros((n, s))
    cur_w = np.zeros((n, p))
    cur_x[inertial, np.arange(k)] = 1.0
    if free:
        cur_x[np.ix_(free, range(k))] = x_i
        cur_x[np.ix_(free, range(k, s))] = x_v
        cur_w[list(free)] = x_w

    # Generalized force on the inertial rows
    force_x = -r[list(inertial)] @ cur_x
    force_x[:, k:] -= pm[:, list(inertial)].T
    force_w = -r[list(inertial)] @ cur_w + bw[list(inertial)]

    volt_x = f.elastance[:, None] * (pm @ cur_x)
    volt_w = f.elastance[:, None] * (pm @ cur_w)

    rows = [inertial.index(i) for i in active]
    lost = [j for j, i in enumerate(inertial) if i not in active]
    mass_active = _Factor(
        f.mass[np.ix_(active, active)], [names[i] for i in active], "Mass block M_II"
    )
    a_top = np.zeros((k, s))
    b_top = np.zeros((k, p))
    a_top[rows] = mass_active.solve(force_x[rows])
    b_top[rows] = mass_active.solve(force_w[rows])
    for j in lost:
        scale = max(comp.mass[inertial[j], inertial[j]] for comp in c.modes.values())
        a_top[j] = force_x[j] / scale
        b_top[j] = force_w[j] / scale

    a = np.vstack([a_top, volt_x])
    b = np.vstack([b_top, volt_w])
    labels = tuple(f.coords.current_labels[i] for i in inertial) + f.capacitor_labels

    storage = np.zeros((s, s))
    storage[:k, :k] = f.mass[np.ix_(inertial, inertial)]
    storage[k:, k:] = np.diag(1.0 / f.elastance)
    energy = EnergyMap(
        storage=storage,
        currents=np.hstack([cur_x, cur_w]),
        resistance=np.array(r),
        input_map=np.array(bw),
    )
    if lost:
        e = np.eye(s)
        e[lost, lost] = 0.0
        return ReducedModel(ModelKind.DESCRIPTOR, a, b, labels, f.input_names, e, energy)
    return ReducedModel(ModelKind.REGULAR, a, b, labels, f.input_names, None, energy)


def build_switched_model(c: CircuitDescription) -> SwitchedModel:
    """Reduce every reachable mode of ``c``.

    Raises:
        ReductionError: If a mode fails to reduce or the modes disagree on
            their state labels.
    """
    modes = {u: reduce(assemble(c, u), c) for u in c.modes}
    first = next(iter(modes.values()))
    return SwitchedModel(
        circuit_name=c.name,
        bit_names=c.bit_names,
        state_labels=first.state_labels,
        input_labels=first.input_labels,
        modes=modes,
    )


def erroneous_reference_model(
    l_s: float = 10e-6, r_s: float = 0.01, r: float = 10.0, c: float = 1e-3
) -> SwitchedModel:
    """The ideal-diode model obtained by substituting u directly into the u=1 equations.

    Correct at u=1; at u=0 its first row still reads L_s i' = -R_s i instead
    of the missing current constraint.
    """
    modes = {}
    for u in (0, 1):
        a = np.array([[-r_s / l_s, -u / l_s], [u / c, -1.0 / (r * c)]])
        b = np.array([[u / l_s], [0.0]])
        modes[ModeVector(("u",), (u,))] = ReducedModel.regular(
            a, b, ("i_L", "v_C"), ("V_i",)
        )
    return SwitchedModel("ideal-diode-erroneous", ("u",), ("i_L", "v_C"), ("V_i",), modes)


def align(
    model: ReducedModel, labels: Sequence[str]
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (E, A, B) with states reordered to ``labels``.

    Raises:
        KeyError: If ``labels`` is not a permutation of the model's states.
    """
    if sorted(labels) != sorted(model.state_labels):
        raise KeyError(f"Labels {list(labels)} do not match states {model.state_labels}")
    order = [model.state_labels.index(label) for label in labels]
    e = model.descriptor
    return e[np.ix_(order, order)], model.a[np.ix_(order, order)], model.b[order]


def frequency_response(model: ReducedModel, omega: float) -> np.ndarray:
    """Input-to-state transfer (jωE - A)^-1 B at angular frequency ``omega``."""
    return np.linalg.solve(1j * omega * model.descriptor - model.a, model.b)


def mode_eigenvalues(model: ReducedModel) -> np.ndarray:
    """Finite eigenvalues of the pencil (A, E)."""
    if model.is_regular:
        return np.linalg.eigvals(model.a)
    values = scipy.linalg.eigvals(model.a, model.descriptor)
    return values[np.isfinite(values)]


def _format_block(name: str, matrix: np.ndarray) -> list[str]:
    lines = [name]
    for row in matrix:
        lines.append(" ".join(format(float(v), ".17g") for v in row))
    return lines


def dump_model(model: SwitchedModel, mode: ModeVector | None = None) -> str:
    """Render matrices as row-major text with 17 significant digits.

    Each mode block starts with ``# mode``, ``# kind``, ``# states`` and
    ``# inputs`` header lines followed by ``E`` (descriptor only), ``A``
    and ``B`` blocks.
    """
    if mode is not None:
        selected = {mode: model[mode]}
    else:
        selected = dict(model.modes)
    lines: list[str] = []
    for u, reduced in selected.items():
        if lines:
            lines.append("")
        lines.append(f"# mode {u}")
        lines.append(f"# kind {reduced.kind.value}")
        lines.append("# states " + ",".join(reduced.state_labels))
        lines.append("# inputs " + ",".join(reduced.input_labels))
        if reduced.e is not None:
            lines.extend(_format_block("E", reduced.e))
        lines.extend(_format_block("A", reduced.a))
        lines.extend(_format_block("B", reduced.b))
    return "\n".join(lines) + "\n"
