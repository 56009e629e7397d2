"""Parameterized constructors for the supported converter circuits."""

import dataclasses
import json
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from lagrange_converters.elcore import (
    CircuitDescription,
    CoordinateSet,
    ELComponents,
    ModeVector,
)

VALID_CIRCUITS = frozenset({
    "ideal-diode", "two-source", "lc", "hf-rectifier", "hf-boost", "boost",
})


class ParameterError(ValueError):
    """Raised for invalid, missing or unknown circuit parameters."""


def _require_positive(owner: str, **values: float) -> None:
    for name, value in values.items():
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            raise ParameterError(f"{owner}: {name} must be a number, got {value!r}")
        if not math.isfinite(value) or value <= 0.0:
            raise ParameterError(f"{owner}: {name} must be strictly positive, got {value}")


@dataclass(frozen=True)
class HFDiodeParams:
    """Piecewise-linear diode: R_d(u), junction capacitance and forward drop."""

    r_on: float = 0.05
    r_off: float = 10e3
    c_d: float = 10e-9
    v_on: float = 0.7

    def __post_init__(self) -> None:
        _require_positive("Diode", R_d_on=self.r_on, R_d_off=self.r_off,
                          C_d=self.c_d, V_d_on=self.v_on)
        if self.r_off <= self.r_on:
            raise ParameterError("Diode: R_d_off must exceed R_d_on")

    def resistance(self, u: int) -> float:
        return self.r_on if u else self.r_off


@dataclass(frozen=True)
class HFMosfetParams:
    """MOSFET with mode-dependent resistance, stray inductance and output capacitance."""

    r_on: float = 0.2
    r_off: float = 2e6
    l_s: float = 20e-9
    c_s: float = 200e-12

    def __post_init__(self) -> None:
        _require_positive("MOSFET", R_s_on=self.r_on, R_s_off=self.r_off,
                          L_s=self.l_s, C_s=self.c_s)
        if self.r_off <= self.r_on:
            raise ParameterError("MOSFET: R_s_off must exceed R_s_on")

    def resistance(self, u: int) -> float:
        return self.r_on if u else self.r_off


@dataclass(frozen=True)
class HFInductorParams:
    """Boost inductor: inductance ``l``, winding resistance ``r_l`` and winding capacitance ``c_l``.

    ``c_l`` is read from the C_L parameter-file key and carried in the
    circuit's parameter table. The high-fidelity boost has no coordinate
    for it, so it does not enter the matrices.
    """

    l: float = 1.6e-3
    r_l: float = 0.1
    c_l: float = 10e-12

    def __post_init__(self) -> None:
        _require_positive("Inductor", L=self.l, R_L=self.r_l, C_L=self.c_l)


@dataclass(frozen=True)
class HFCapacitorParams:
    """Output capacitor with equivalent series resistance ``r_c`` and inductance ``l_c``."""

    c: float = 42e-6
    r_c: float = 0.4
    l_c: float = 100e-12

    def __post_init__(self) -> None:
        _require_positive("Capacitor", C=self.c, R_c=self.r_c, L_c=self.l_c)


@dataclass(frozen=True)
class SquareWave:
    """Symmetric square wave: +amplitude on the first half of each period."""

    amplitude: float = 12.0
    frequency: float = 1e3

    def __post_init__(self) -> None:
        _require_positive("Square wave", amplitude=self.amplitude, frequency=self.frequency)

    def __call__(self, t: float) -> float:
        phase = (t * self.frequency) % 1.0
        return self.amplitude if phase < 0.5 else -self.amplitude

    @property
    def period(self) -> float:
        return 1.0 / self.frequency


@dataclass(frozen=True)
class RectifierParams:
    source: SquareWave = field(default_factory=SquareWave)
    r_s: float = 0.01
    l_s: float = 10e-6
    diode: HFDiodeParams = field(default_factory=HFDiodeParams)
    capacitor: HFCapacitorParams = field(
        default_factory=lambda: HFCapacitorParams(c=1e-3, r_c=1.0, l_c=10e-9)
    )
    r_load: float = 10.0

    def __post_init__(self) -> None:
        _require_positive("Rectifier", R_s=self.r_s, L_s=self.l_s, R_L=self.r_load)


@dataclass(frozen=True)
class BoostParams:
    """Boost converter parameters; ``r_o`` is None until calibrated."""

    v_i: float = 10.0
    inductor: HFInductorParams = field(default_factory=HFInductorParams)
    mosfet: HFMosfetParams = field(default_factory=HFMosfetParams)
    diode: HFDiodeParams = field(
        default_factory=lambda: HFDiodeParams(r_on=0.05, r_off=40e6, c_d=15e-9, v_on=0.7)
    )
    capacitor: HFCapacitorParams = field(default_factory=HFCapacitorParams)
    r_o: float | None = None
    duty: float = 0.5
    f_sw: float = 50e3

    def __post_init__(self) -> None:
        _require_positive("Boost", V_i=self.v_i, f_sw=self.f_sw)
        if self.r_o is not None:
            _require_positive("Boost", R_o=self.r_o)
        if not 0.0 < self.duty < 1.0:
            raise ParameterError(f"Boost: duty d must lie in (0, 1), got {self.duty}")

    @property
    def period(self) -> float:
        return 1.0 / self.f_sw

    def with_load(self, r_o: float) -> "BoostParams":
        return dataclasses.replace(self, r_o=r_o)


@dataclass(frozen=True)
class IdealDiodeParams:
    l_s: float = 10e-6
    r_s: float = 0.01
    r: float = 10.0
    c: float = 1e-3
    v_i: float = 12.0

    def __post_init__(self) -> None:
        _require_positive("Ideal diode", L_s=self.l_s, R_s=self.r_s, R=self.r,
                          C=self.c, V_i=self.v_i)


@dataclass(frozen=True)
class TwoSourceParams:
    l1: float = 1e-3
    l2: float = 1e-3
    c: float = 1e-6
    r: float = 10.0
    e1: float = 1.0
    e2: float = 1.0

    def __post_init__(self) -> None:
        _require_positive("Two-source", L1=self.l1, L2=self.l2, C=self.c, R=self.r)
        for name, value in (("E1", self.e1), ("E2", self.e2)):
            if not math.isfinite(value):
                raise ParameterError(f"Two-source: {name} must be finite")


@dataclass(frozen=True)
class LCParams:
    l1: float = 1e-3
    l2: float = 1e-3
    c1: float = 1e-6
    e: float = 0.0

    def __post_init__(self) -> None:
        _require_positive("LC", L1=self.l1, L2=self.l2, C1=self.c1)
        if not math.isfinite(self.e):
            raise ParameterError("LC: E must be finite")


Branch = tuple[float, Sequence[float]]


def branch_matrix(n: int, branches: Sequence[Branch]) -> np.ndarray:
    """Sum of R_k c_k c_kᵀ over resistor branches with current c_kᵀ q'."""
    matrix = np.zeros((n, n))
    for resistance, coefficients in branches:
        vector = np.asarray(coefficients, dtype=float)
        matrix += resistance * np.outer(vector, vector)
    return matrix


def ideal_diode_circuit(p: IdealDiodeParams | None = None) -> CircuitDescription:
    """Source, series inductor and ideal diode feeding an RC load.

    The inductor's kinetic energy is 1/2 L_s (u q_L')², so mode u=0
    removes the inductor's inertia together with its dissipation path.
    """
    p = p or IdealDiodeParams()
    coords = CoordinateSet(("q_L", "q_C"), ("i_L", "i_C"))
    modes = {}
    for u in (0, 1):
        modes[ModeVector(("u",), (u,))] = ELComponents(
            mass=np.diag([u * p.l_s, 0.0]),
            dissipation=branch_matrix(2, [(p.r_s, (u, 0)), (p.r, (u, -1))]),
            charge_map=[[0.0, 1.0]],
            elastance=[1.0 / p.c],
            input_map=[[float(u)], [0.0]],
            input_names=("V_i",),
            capacitor_labels=("v_C",),
        )
    return CircuitDescription("ideal-diode", coords, ("u",), modes, parameter_values(p))


def two_source_circuit(p: TwoSourceParams | None = None) -> CircuitDescription:
    """Two inductors, a capacitor with parallel resistor and two sources E_1, E_2.

    E_2 drives the loop combination q_C - q_L1 + q_L2, so it enters the
    q_L1 row with a negative sign.
    """
    p = p or TwoSourceParams()
    coords = CoordinateSet(("q_L1", "q_L2", "q_C"), ("i_L1", "i_L2", "i_C"))
    comp = ELComponents(
        mass=np.diag([p.l1, p.l2, 0.0]),
        dissipation=branch_matrix(3, [(p.r, (1, 0, -1))]),
        charge_map=[[0.0, 0.0, 1.0]],
        elastance=[1.0 / p.c],
        input_map=[[1.0, -1.0], [0.0, 1.0], [0.0, 1.0]],
        input_names=("E_1", "E_2"),
        capacitor_labels=("v_C",),
    )
    return CircuitDescription(
        "two-source", coords, (), {ModeVector((), ()): comp}, parameter_values(p)
    )


def lc_circuit(p: LCParams | None = None) -> CircuitDescription:
    """Lossless two-inductor circuit whose capacitor charge is q_L1 - q_L2."""
    p = p or LCParams()
    coords = CoordinateSet(("q_L1", "q_L2"), ("i_L1", "i_L2"))
    comp = ELComponents(
        mass=np.diag([p.l1, p.l2]),
        dissipation=np.zeros((2, 2)),
        charge_map=[[1.0, -1.0]],
        elastance=[1.0 / p.c1],
        input_map=[[1.0], [0.0]],
        input_names=("E",),
        capacitor_labels=("v_C1",),
    )
    return CircuitDescription("lc", coords, (), {ModeVector((), ()): comp}, parameter_values(p))


def rectifier_branches(p: RectifierParams, u: int) -> list[Branch]:
    """Resistor branches over (q_s, q_Lc, q_cd)."""
    return [
        (p.r_s, (1, 0, 0)),
        (p.capacitor.r_c, (0, 1, 0)),
        (p.diode.resistance(u), (1, 0, -1)),
        (p.r_load, (1, -1, 0)),
    ]


def hf_rectifier(p: RectifierParams | None = None) -> CircuitDescription:
    """Half-wave rectifier with the high-fidelity diode and capacitor models."""
    p = p or RectifierParams()
    coords = CoordinateSet(("q_s", "q_Lc", "q_cd"), ("i", "i_Lc", "i_cd"))
    modes = {}
    for u in (0, 1):
        modes[ModeVector(("u_d",), (u,))] = ELComponents(
            mass=np.diag([p.l_s, p.capacitor.l_c, 0.0]),
            dissipation=branch_matrix(3, rectifier_branches(p, u)),
            charge_map=[[0.0, 0.0, 1.0], [0.0, 1.0, 0.0]],
            elastance=[1.0 / p.diode.c_d, 1.0 / p.capacitor.c],
            input_map=[[1.0, -u], [0.0, 0.0], [0.0, u]],
            input_names=("V_i", "V_d_on"),
            capacitor_labels=("v_d", "v_c"),
        )
    return CircuitDescription("hf-rectifier", coords, ("u_d",), modes, parameter_values(p))


BOOST_MODES = (ModeVector(("u_m", "u_d"), (1, 0)), ModeVector(("u_m", "u_d"), (0, 1)))


def _load(p: BoostParams) -> float:
    if p.r_o is None:
        raise ParameterError("Boost: load R_o is unresolved; calibrate it first")
    return p.r_o


def boost_branches(p: BoostParams, u_m: int, u_d: int) -> list[Branch]:
    """Resistor branches over (q_1, ..., q_5)."""
    return [
        (p.inductor.r_l, (1, 0, 0, 0, 0)),
        (p.mosfet.resistance(u_m), (0, 1, 0, -1, 0)),
        (p.capacitor.r_c, (0, 0, 1, 0, 0)),
        (p.diode.resistance(u_d), (1, -1, 0, 0, -1)),
        (_load(p), (1, -1, -1, 0, 0)),
    ]


def hf_boost(p: BoostParams) -> CircuitDescription:
    """Boost converter with high-fidelity inductor, MOSFET, diode and capacitor.

    Only the complementary modes (u_m, u_d) = (1, 0) and (0, 1) are
    reachable.
    """
    r_o = _load(p)
    coords = CoordinateSet(
        ("q_1", "q_2", "q_3", "q_4", "q_5"), ("i", "i_Ls", "i_Lc", "i_cs", "i_cd")
    )
    modes = {}
    for mode in BOOST_MODES:
        u_m, u_d = mode.bits
        modes[mode] = ELComponents(
            mass=np.diag([p.inductor.l, p.mosfet.l_s, p.capacitor.l_c, 0.0, 0.0]),
            dissipation=branch_matrix(5, boost_branches(p, u_m, u_d)),
            charge_map=np.array([
                [0.0, 0.0, 1.0, 0.0, 0.0],
                [0.0, 0.0, 0.0, 1.0, 0.0],
                [0.0, 0.0, 0.0, 0.0, 1.0],
            ]),
            elastance=[1.0 / p.capacitor.c, 1.0 / p.mosfet.c_s, 1.0 / p.diode.c_d],
            input_map=np.column_stack([
                [1.0, 0.0, 0.0, 0.0, 0.0],
                [-u_d, u_d, 0.0, 0.0, u_d],
            ]),
            input_names=("V_i", "V_d_on"),
            capacitor_labels=("v_c", "v_cs", "v_d"),
        )
    params = parameter_values(p)
    params["R_o"] = r_o
    return CircuitDescription("hf-boost", coords, ("u_m", "u_d"), modes, params)


def switch_level_boost(p: BoostParams) -> CircuitDescription:
    """Boost converter with lossy ideal switches and no parasitic dynamics.

    Coordinates are the inductor loop q_L and the capacitor loop q_C; the
    load current is u_d q_L' - q_C'.
    """
    r_o = _load(p)
    coords = CoordinateSet(("q_L", "q_C"), ("i", "i_C"))
    modes = {}
    for mode in BOOST_MODES:
        u_m, u_d = mode.bits
        branches: list[Branch] = [
            (p.inductor.r_l, (1, 0)),
            (p.mosfet.r_on, (u_m, 0)),
            (p.diode.r_on, (u_d, 0)),
            (p.capacitor.r_c, (0, 1)),
            (r_o, (u_d, -1)),
        ]
        modes[mode] = ELComponents(
            mass=np.diag([p.inductor.l, 0.0]),
            dissipation=branch_matrix(2, branches),
            charge_map=[[0.0, 1.0]],
            elastance=[1.0 / p.capacitor.c],
            input_map=[[1.0, -u_d], [0.0, 0.0]],
            input_names=("V_i", "V_d_on"),
            capacitor_labels=("v_c",),
        )
    params = parameter_values(p)
    params["R_o"] = r_o
    return CircuitDescription("boost", coords, ("u_m", "u_d"), modes, params)


# Parameter file keys per circuit, mapped onto the dataclass fields they set
PARAMETER_KEYS: dict[str, tuple[str, ...]] = {
    "ideal-diode": ("L_s", "R_s", "R", "C", "V_i"),
    "two-source": ("L1", "L2", "C", "R", "E1", "E2"),
    "lc": ("L1", "L2", "C1", "E"),
    "hf-rectifier": (
        "V_amplitude", "f_source", "R_s", "L_s", "R_d_on", "R_d_off", "C_d",
        "V_d_on", "C", "R_c", "L_c", "R_L",
    ),
    "hf-boost": (
        "V_i", "L", "R_L", "C_L", "L_s", "R_s_on", "R_s_off", "C_s", "R_d_on",
        "R_d_off", "C_d", "V_d_on", "C", "R_c", "L_c", "R_o", "d", "f_sw",
    ),
}
PARAMETER_KEYS["boost"] = PARAMETER_KEYS["hf-boost"]

# Parameters whose published value is ambiguous; summaries always report them
AMBIGUOUS_KEYS: dict[str, tuple[str, ...]] = {
    "hf-rectifier": ("L_c",),
    "hf-boost": ("C_d", "R_o"),
    "boost": ("R_o",),
}

Params = IdealDiodeParams | TwoSourceParams | LCParams | RectifierParams | BoostParams


def parameter_values(p: Params) -> dict[str, float]:
    """Flat parameter-file view of a parameter record."""
    if isinstance(p, RectifierParams):
        return {
            "V_amplitude": p.source.amplitude, "f_source": p.source.frequency,
            "R_s": p.r_s, "L_s": p.l_s, "R_d_on": p.diode.r_on, "R_d_off": p.diode.r_off,
            "C_d": p.diode.c_d, "V_d_on": p.diode.v_on, "C": p.capacitor.c,
            "R_c": p.capacitor.r_c, "L_c": p.capacitor.l_c, "R_L": p.r_load,
        }
    if isinstance(p, BoostParams):
        values = {
            "V_i": p.v_i, "L": p.inductor.l, "R_L": p.inductor.r_l, "C_L": p.inductor.c_l,
            "L_s": p.mosfet.l_s, "R_s_on": p.mosfet.r_on, "R_s_off": p.mosfet.r_off,
            "C_s": p.mosfet.c_s, "R_d_on": p.diode.r_on, "R_d_off": p.diode.r_off,
            "C_d": p.diode.c_d, "V_d_on": p.diode.v_on, "C": p.capacitor.c,
            "R_c": p.capacitor.r_c, "L_c": p.capacitor.l_c, "d": p.duty, "f_sw": p.f_sw,
        }
        if p.r_o is not None:
            values["R_o"] = p.r_o
        return values
    names = {
        IdealDiodeParams: {"l_s": "L_s", "r_s": "R_s", "r": "R", "c": "C", "v_i": "V_i"},
        TwoSourceParams: {"l1": "L1", "l2": "L2", "c": "C", "r": "R", "e1": "E1", "e2": "E2"},
        LCParams: {"l1": "L1", "l2": "L2", "c1": "C1", "e": "E"},
    }[type(p)]
    return {key: getattr(p, attr) for attr, key in names.items()}


def _build_rectifier(v: Mapping[str, float]) -> RectifierParams:
    return RectifierParams(
        source=SquareWave(v["V_amplitude"], v["f_source"]),
        r_s=v["R_s"],
        l_s=v["L_s"],
        diode=HFDiodeParams(v["R_d_on"], v["R_d_off"], v["C_d"], v["V_d_on"]),
        capacitor=HFCapacitorParams(v["C"], v["R_c"], v["L_c"]),
        r_load=v["R_L"],
    )


def _build_boost(v: Mapping[str, float]) -> BoostParams:
    return BoostParams(
        v_i=v["V_i"],
        inductor=HFInductorParams(v["L"], v["R_L"], v["C_L"]),
        mosfet=HFMosfetParams(v["R_s_on"], v["R_s_off"], v["L_s"], v["C_s"]),
        diode=HFDiodeParams(v["R_d_on"], v["R_d_off"], v["C_d"], v["V_d_on"]),
        capacitor=HFCapacitorParams(v["C"], v["R_c"], v["L_c"]),
        r_o=v.get("R_o"),
        duty=v["d"],
        f_sw=v["f_sw"],
    )


_BUILDERS: dict[str, tuple[Callable[[], Params], Callable[[Mapping[str, float]], Params]]] = {
    "ideal-diode": (IdealDiodeParams, lambda v: IdealDiodeParams(
        v["L_s"], v["R_s"], v["R"], v["C"], v["V_i"])),
    "two-source": (TwoSourceParams, lambda v: TwoSourceParams(
        v["L1"], v["L2"], v["C"], v["R"], v["E1"], v["E2"])),
    "lc": (LCParams, lambda v: LCParams(v["L1"], v["L2"], v["C1"], v["E"])),
    "hf-rectifier": (RectifierParams, _build_rectifier),
    "hf-boost": (BoostParams, _build_boost),
    "boost": (BoostParams, _build_boost),
}


def _check_circuit(name: str) -> None:
    if name not in VALID_CIRCUITS:
        valid = ", ".join(sorted(VALID_CIRCUITS))
        raise ParameterError(f"Unknown circuit '{name}'. Valid options: {valid}")


def default_params(name: str) -> Params:
    """Published parameter values for a circuit."""
    _check_circuit(name)
    return _BUILDERS[name][0]()


def params_from_mapping(name: str, values: Mapping[str, object]) -> tuple[Params, frozenset[str]]:
    """Build a circuit's parameters from overrides on top of the defaults.

    Args:
        name: Circuit name.
        values: Parameter file content; keys follow ``PARAMETER_KEYS[name]``.

    Returns:
        Tuple of (params, keys taken from ``values``).

    Raises:
        ParameterError: On unknown keys, non-numeric values or values that
            violate the parameter invariants.
    """
    _check_circuit(name)
    allowed = PARAMETER_KEYS[name]
    unknown = sorted(set(values) - set(allowed))
    if unknown:
        raise ParameterError(
            f"Unknown parameter(s) for {name}: {', '.join(unknown)}. "
            f"Valid options: {', '.join(allowed)}"
        )
    merged: dict[str, float] = dict(parameter_values(default_params(name)))
    for key, value in values.items():
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ParameterError(f"Parameter {key} must be a number, got {value!r}")
        merged[key] = float(value)
    try:
        params = _BUILDERS[name][1](merged)
    except KeyError as e:
        raise ParameterError(f"Missing parameter {e.args[0]} for {name}") from None
    return params, frozenset(values)


def load_params(name: str, path: str | Path) -> tuple[Params, frozenset[str]]:
    """Read a strict JSON parameter file for circuit ``name``.

    Raises:
        ParameterError: If the file is unreadable, not a JSON object, or
            its content is rejected by ``params_from_mapping``.
    """
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ParameterError(f"Cannot read parameter file {path}: {e.strerror}") from e
    try:
        values = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParameterError(f"Parameter file {path} is not valid JSON: {e.msg}") from e
    if not isinstance(values, dict):
        raise ParameterError(f"Parameter file {path} must contain a JSON object")
    return params_from_mapping(name, values)


def build_circuit(name: str, p: Params) -> CircuitDescription:
    """Construct circuit ``name`` from its parameter record."""
    _check_circuit(name)
    constructors: dict[str, Callable[..., CircuitDescription]] = {
        "ideal-diode": ideal_diode_circuit,
        "two-source": two_source_circuit,
        "lc": lc_circuit,
        "hf-rectifier": hf_rectifier,
        "hf-boost": hf_boost,
        "boost": switch_level_boost,
    }
    return constructors[name](p)
