"""Generalized coordinates, switch modes and quadratic Euler-Lagrange component data."""

import itertools
from collections.abc import Iterable, Mapping
from dataclasses import dataclass, field
from types import MappingProxyType

import numpy as np

# Relative tolerance for symmetry and positive-semidefiniteness checks
PSD_TOLERANCE = 1e-12


class DimensionError(ValueError):
    """Raised when vector or matrix shapes do not match the coordinate set."""


class ComponentError(ValueError):
    """Raised when EL component data violates its invariants."""


class UnknownModeError(ValueError):
    """Raised when a mode is not in a circuit's reachable set."""


@dataclass(frozen=True)
class ModeVector:
    """Named binary switch states, e.g. ``u_m=1,u_d=0``."""

    names: tuple[str, ...]
    bits: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.bits):
            raise ComponentError(
                f"Mode has {len(self.names)} names but {len(self.bits)} bits"
            )
        if len(set(self.names)) != len(self.names):
            raise ComponentError(f"Duplicate switch bit names: {self.names}")
        for name, bit in zip(self.names, self.bits):
            if bit not in (0, 1):
                raise ComponentError(f"Switch bit {name} must be 0 or 1, got {bit}")

    @classmethod
    def of(cls, **bits: int) -> "ModeVector":
        """Build a mode from keyword bits, preserving keyword order."""
        return cls(tuple(bits), tuple(int(b) for b in bits.values()))

    @classmethod
    def parse(cls, text: str, names: tuple[str, ...]) -> "ModeVector":
        """Parse ``bit=val,...`` against an ordered list of bit names.

        Args:
            text: Comma-separated assignments such as ``u_m=1,u_d=0``.
            names: The circuit's bit names; every one must be assigned.

        Returns:
            ModeVector with bits in ``names`` order.

        Raises:
            UnknownModeError: If the text is malformed or does not assign
                exactly the given bit names.
        """
        assigned: dict[str, int] = {}
        for part in (p.strip() for p in text.split(",")):
            if not part:
                continue
            key, sep, value = part.partition("=")
            key = key.strip()
            if not sep or value.strip() not in ("0", "1"):
                raise UnknownModeError(
                    f"Invalid mode assignment '{part}'. Expected bit=0 or bit=1"
                )
            if key in assigned:
                raise UnknownModeError(f"Switch bit {key} assigned twice")
            assigned[key] = int(value)
        if set(assigned) != set(names):
            expected = ",".join(names) if names else "(none)"
            raise UnknownModeError(
                f"Mode '{text}' does not match switch bits. Expected: {expected}"
            )
        return cls(names, tuple(assigned[n] for n in names))

    def __getitem__(self, name: str) -> int:
        try:
            return self.bits[self.names.index(name)]
        except ValueError:
            raise KeyError(name) from None

    def replace(self, name: str, bit: int) -> "ModeVector":
        """Return a copy with one bit changed."""
        index = self.names.index(name)
        bits = list(self.bits)
        bits[index] = bit
        return ModeVector(self.names, tuple(bits))

    def __str__(self) -> str:
        if not self.names:
            return "-"
        return ",".join(f"{n}={b}" for n, b in zip(self.names, self.bits))


def enumerate_modes(names: tuple[str, ...]) -> list[ModeVector]:
    """All 2^k combinations of the given switch bits."""
    return [
        ModeVector(names, bits)
        for bits in itertools.product((0, 1), repeat=len(names))
    ]


@dataclass(frozen=True)
class CoordinateSet:
    """Ordered generalized charge coordinates and the labels of their currents."""

    names: tuple[str, ...]
    current_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.names) != len(self.current_labels):
            raise ComponentError("Every coordinate needs exactly one current label")
        if len(set(self.names)) != len(self.names):
            raise ComponentError(f"Duplicate coordinate names: {self.names}")
        if len(set(self.current_labels)) != len(self.current_labels):
            raise ComponentError(f"Duplicate current labels: {self.current_labels}")

    def __len__(self) -> int:
        return len(self.names)

    def index(self, name: str) -> int:
        return self.names.index(name)

    def permuted(self, order: Iterable[int]) -> "CoordinateSet":
        order = list(order)
        return CoordinateSet(
            tuple(self.names[i] for i in order),
            tuple(self.current_labels[i] for i in order),
        )


def _frozen(array: object, name: str, ndim: int) -> np.ndarray:
    value = np.array(array, dtype=float)
    if value.ndim != ndim:
        raise DimensionError(f"{name} must be {ndim}-dimensional, got shape {value.shape}")
    if not np.all(np.isfinite(value)):
        raise ComponentError(f"{name} contains non-finite entries")
    value.setflags(write=False)
    return value


def _check_psd(matrix: np.ndarray, name: str) -> None:
    scale = max(float(np.max(np.abs(matrix), initial=0.0)), 1e-300)
    if not np.allclose(matrix, matrix.T, rtol=0.0, atol=PSD_TOLERANCE * scale):
        raise ComponentError(f"{name} matrix is not symmetric")
    if matrix.size and np.min(np.linalg.eigvalsh(matrix)) < -PSD_TOLERANCE * scale:
        raise ComponentError(f"{name} matrix is not positive semidefinite")


@dataclass(frozen=True, eq=False)
class ELComponents:
    """Quadratic energy and dissipation data for one switch mode.

    T = 1/2 q'ᵀ M q', V = 1/2 (Pq)ᵀ diag(1/C) (Pq) - qᵀ B_w w and
    D = 1/2 q'ᵀ R q'. Sources and diode drops enter only through B_w.
    """

    mass: np.ndarray
    dissipation: np.ndarray
    charge_map: np.ndarray
    elastance: np.ndarray
    input_map: np.ndarray
    input_names: tuple[str, ...]
    capacitor_labels: tuple[str, ...]

    def __post_init__(self) -> None:
        for attr, ndim in (
            ("mass", 2),
            ("dissipation", 2),
            ("charge_map", 2),
            ("elastance", 1),
            ("input_map", 2),
        ):
            object.__setattr__(self, attr, _frozen(getattr(self, attr), attr, ndim))
        n = self.mass.shape[0]
        m = self.elastance.shape[0]
        p = len(self.input_names)
        expected = {
            "mass": (n, n),
            "dissipation": (n, n),
            "charge_map": (m, n),
            "input_map": (n, p),
        }
        for attr, shape in expected.items():
            if getattr(self, attr).shape != shape:
                raise DimensionError(
                    f"{attr} has shape {getattr(self, attr).shape}, expected {shape}"
                )
        if len(self.capacitor_labels) != m:
            raise DimensionError(
                f"{m} charge rows but {len(self.capacitor_labels)} capacitor labels"
            )
        if np.any(self.elastance <= 0.0):
            raise ComponentError("All elastances (1/C) must be strictly positive")
        _check_psd(self.mass, "Mass")
        _check_psd(self.dissipation, "Dissipation")

    @property
    def size(self) -> int:
        return self.mass.shape[0]

    @property
    def stiffness(self) -> np.ndarray:
        """Pᵀ diag(1/C) P."""
        return self.charge_map.T @ (self.elastance[:, None] * self.charge_map)

    def floating_coordinates(self) -> list[int]:
        """Indices whose mass and dissipation rows are both zero."""
        return [
            i
            for i in range(self.size)
            if not np.any(self.mass[i]) and not np.any(self.dissipation[i])
        ]


def _vector(value: object, length: int, name: str) -> np.ndarray:
    vector = np.asarray(value, dtype=float)
    if vector.shape != (length,):
        raise DimensionError(f"{name} must have length {length}, got shape {vector.shape}")
    return vector


def kinetic_energy(c: ELComponents, qdot: object) -> float:
    """Magnetic co-energy 1/2 q'ᵀ M q' in joules.

    Raises:
        DimensionError: If ``qdot`` does not have one entry per coordinate.
    """
    qdot = _vector(qdot, c.size, "qdot")
    return 0.5 * float(qdot @ c.mass @ qdot)


def potential_energy(c: ELComponents, q: object, w: object) -> float:
    """Field energy minus source work, 1/2 (Pq)ᵀ diag(1/C) (Pq) - qᵀ B_w w.

    Raises:
        DimensionError: If ``q`` or ``w`` have the wrong length.
    """
    q = _vector(q, c.size, "q")
    w = _vector(w, len(c.input_names), "w")
    charges = c.charge_map @ q
    return 0.5 * float(charges @ (c.elastance * charges)) - float(q @ c.input_map @ w)


def dissipation(c: ELComponents, qdot: object) -> float:
    """Rayleigh dissipation function 1/2 q'ᵀ R q' in watts."""
    qdot = _vector(qdot, c.size, "qdot")
    return 0.5 * float(qdot @ c.dissipation @ qdot)


def energy_gradients(
    c: ELComponents, q: object, qdot: object, w: object
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (dT/dq', dV/dq, dD/dq') = (M q', Pᵀ diag(1/C) P q - B_w w, R q').

    Raises:
        DimensionError: If any argument has the wrong length.
    """
    q = _vector(q, c.size, "q")
    qdot = _vector(qdot, c.size, "qdot")
    w = _vector(w, len(c.input_names), "w")
    return (
        c.mass @ qdot,
        c.stiffness @ q - c.input_map @ w,
        c.dissipation @ qdot,
    )


@dataclass(frozen=True)
class CircuitDescription:
    """A named circuit: coordinates plus EL components for every reachable mode."""

    name: str
    coords: CoordinateSet
    bit_names: tuple[str, ...]
    modes: Mapping[ModeVector, ELComponents]
    parameters: Mapping[str, float] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if not self.modes:
            raise ComponentError(f"Circuit {self.name} declares no modes")
        object.__setattr__(self, "modes", MappingProxyType(dict(self.modes)))
        object.__setattr__(self, "parameters", MappingProxyType(dict(self.parameters)))
        first = next(iter(self.modes.values()))
        for mode, comp in self.modes.items():
            if mode.names != self.bit_names:
                raise ComponentError(
                    f"Mode {mode} does not use the circuit's bits {self.bit_names}"
                )
            if comp.size != len(self.coords):
                raise DimensionError(
                    f"Mode {mode} has {comp.size} coordinates, expected {len(self.coords)}"
                )
            if comp.input_names != first.input_names:
                raise ComponentError(f"Mode {mode} reorders the inputs")
            if comp.capacitor_labels != first.capacitor_labels:
                raise ComponentError(f"Mode {mode} reorders the capacitor charges")
            if not np.array_equal(comp.charge_map, first.charge_map) or not np.array_equal(
                comp.elastance, first.elastance
            ):
                raise ComponentError(f"Mode {mode} changes the capacitor network")

    @property
    def input_names(self) -> tuple[str, ...]:
        return next(iter(self.modes.values())).input_names

    @property
    def capacitor_labels(self) -> tuple[str, ...]:
        return next(iter(self.modes.values())).capacitor_labels

    def components(self, u: ModeVector) -> ELComponents:
        """EL components for mode ``u``.

        A coordinate may lose both its mass and its dissipation in ``u``
        only if it is inductive in some other mode.

        Raises:
            UnknownModeError: If ``u`` is not reachable in this circuit.
            ComponentError: If a coordinate floats in ``u``.
        """
        try:
            comp = self.modes[u]
        except KeyError:
            reachable = ", ".join(str(m) for m in self.modes)
            raise UnknownModeError(
                f"Mode {u} is not reachable in {self.name}. Reachable modes: {reachable}"
            ) from None
        for i in comp.floating_coordinates():
            if not any(np.any(other.mass[i]) for other in self.modes.values()):
                raise ComponentError(
                    f"Coordinate {self.coords.names[i]} of {self.name} has neither "
                    f"inductance nor dissipation in mode {u}"
                )
        return comp

    def permuted(self, order: Iterable[int]) -> "CircuitDescription":
        """The same circuit with its coordinates reordered."""
        order = list(order)
        modes = {}
        for mode, comp in self.modes.items():
            modes[mode] = ELComponents(
                mass=comp.mass[np.ix_(order, order)],
                dissipation=comp.dissipation[np.ix_(order, order)],
                charge_map=comp.charge_map[:, order],
                elastance=comp.elastance,
                input_map=comp.input_map[order],
                input_names=comp.input_names,
                capacitor_labels=comp.capacitor_labels,
            )
        return CircuitDescription(
            self.name, self.coords.permuted(order), self.bit_names, modes, self.parameters
        )
