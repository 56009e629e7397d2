"""Published reference matrices, in their printed state orderings.

These are written out by hand, independently of the EL reduction, so that
the derived models can be compared against them entry by entry.
"""

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from lagrange_converters.circuits import (
    BoostParams,
    IdealDiodeParams,
    ParameterError,
    RectifierParams,
)
from lagrange_converters.elcore import ModeVector, UnknownModeError

BOOST_PRINTED_LABELS = ("i", "v_c", "i_Ls", "v_cs", "i_Lc", "v_d")
RECTIFIER_PRINTED_LABELS = ("i", "v_d", "i_Lc", "v_c")
DIODE_DESCRIPTOR_LABELS = ("i_L", "v_C")


@dataclass(frozen=True)
class Misprint:
    """A published entry that disagrees with its own EL derivation."""

    row: str
    column: str
    printed_text: str
    derived_text: str
    where: str
    printed: Callable[[RectifierParams], float]
    derived: Callable[[RectifierParams], float]

    def describe(self, p: RectifierParams) -> str:
        return (
            f"A[{self.row}, {self.column}] in the {self.where}: printed "
            f"{self.printed_text} = {self.printed(p):.6g}, derived "
            f"{self.derived_text} = {self.derived(p):.6g}"
        )


RECTIFIER_TYPOS = (
    Misprint(
        row="i",
        column="i_Lc",
        printed_text="R_c/L_s",
        derived_text="R_L/L_s",
        where="printed state matrix",
        printed=lambda p: p.capacitor.r_c / p.l_s,
        derived=lambda p: p.r_load / p.l_s,
    ),
    Misprint(
        row="i_Lc",
        column="v_c",
        printed_text="-1/L_s",
        derived_text="-1/L_c",
        where="q_Lc equation text",
        printed=lambda p: -1.0 / p.l_s,
        derived=lambda p: -1.0 / p.capacitor.l_c,
    ),
)


def boost_printed(p: BoostParams, mode: ModeVector) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """The boost converter's A(u_d, u_m) and B(u_d) as printed.

    Args:
        p: Boost parameters with a resolved load R_o.
        mode: One of the complementary modes (u_m, u_d) = (1, 0) or (0, 1).

    Returns:
        Tuple of (A, B, state labels) in the order (i, v_c, i_Ls, v_cs, i_Lc, v_d).

    Raises:
        ParameterError: If R_o is unresolved.
        UnknownModeError: If ``mode`` is not complementary.
    """
    if p.r_o is None:
        raise ParameterError("Boost: load R_o is unresolved; calibrate it first")
    u_m, u_d = mode["u_m"], mode["u_d"]
    if u_m + u_d != 1:
        raise UnknownModeError(f"Mode {mode} is not a complementary boost mode")
    l, r_l = p.inductor.l, p.inductor.r_l
    l_s, c_s, r_s = p.mosfet.l_s, p.mosfet.c_s, p.mosfet.resistance(u_m)
    c_d, r_d = p.diode.c_d, p.diode.resistance(u_d)
    c, r_c, l_c = p.capacitor.c, p.capacitor.r_c, p.capacitor.l_c
    r_o = p.r_o
    a = np.array([
        [-(r_l + r_o) / l, 0.0, r_o / l, 0.0, r_o / l, -1.0 / l],
        [0.0, 0.0, 0.0, 0.0, 1.0 / c, 0.0],
        [r_o / l_s, 0.0, -r_o / l_s, -1.0 / l_s, -r_o / l_s, 1.0 / l_s],
        [0.0, 0.0, 1.0 / c_s, -1.0 / (r_s * c_s), 0.0, 0.0],
        [r_o / l_c, -1.0 / l_c, -r_o / l_c, 0.0, -(r_c + r_o) / l_c, 0.0],
        [1.0 / c_d, 0.0, -1.0 / c_d, 0.0, 0.0, -1.0 / (r_d * c_d)],
    ])
    b = np.zeros((6, 2))
    b[0, 0] = 1.0 / l
    b[5, 1] = u_d / (r_d * c_d)
    return a, b, BOOST_PRINTED_LABELS


def rectifier_printed(p: RectifierParams, u: int) -> tuple[np.ndarray, np.ndarray, tuple[str, ...]]:
    """The rectifier's A(u) and B(u) exactly as printed, misprint included.

    States are (i, v_d, i_Lc, v_c); see ``RECTIFIER_TYPOS`` for the entries
    that disagree with the derivation.
    """
    l_s, r_s = p.l_s, p.r_s
    c_d, r_d = p.diode.c_d, p.diode.resistance(u)
    c, r_c, l_c = p.capacitor.c, p.capacitor.r_c, p.capacitor.l_c
    r_l = p.r_load
    a = np.array([
        [-(r_s + r_l) / l_s, -1.0 / l_s, r_c / l_s, 0.0],
        [1.0 / c_d, -1.0 / (r_d * c_d), 0.0, 0.0],
        [r_l / l_c, 0.0, -(r_l + r_c) / l_c, -1.0 / l_c],
        [0.0, 0.0, 1.0 / c, 0.0],
    ])
    b = np.array([
        [1.0 / l_s, 0.0],
        [0.0, u / (r_d * c_d)],
        [0.0, 0.0],
        [0.0, 0.0],
    ])
    return a, b, RECTIFIER_PRINTED_LABELS


def diode_descriptor(p: IdealDiodeParams, u: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Descriptor model E(u) x' = A(u) x + B(u) V_i of the ideal-diode circuit.

    E = diag(u, 1); the first row vanishes entirely when the diode blocks.
    """
    e = np.diag([float(u), 1.0])
    a = np.array([
        [-u * p.r_s / p.l_s, -u / p.l_s],
        [u / p.c, -1.0 / (p.r * p.c)],
    ])
    b = np.array([[u / p.l_s], [0.0]])
    return e, a, b
