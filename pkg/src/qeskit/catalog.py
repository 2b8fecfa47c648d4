"""Ready-made generators and their closed-form potentials and eigenfunctions."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np

from . import expr as ex
from . import grid as gr
from .grid import Grid
from .states import QesModel, build_qes_model, choose_grid
from .superpot import GeneratorSpec, ValidationReport, construct

__all__ = [
    "CatalogError",
    "ParamSpec",
    "Constraint",
    "ConstraintVerdict",
    "ClosedForms",
    "CatalogEntry",
    "ENTRIES",
    "names",
    "get",
    "instantiate",
    "check_constraints",
    "rational_interval",
    "rational_generator",
    "case3_alpha",
    "case3_rho",
    "case3_potential_limit",
    "case3_bound_state_count",
    "case3_model",
    "build_model",
]

SQRT3 = math.sqrt(3.0)
GOLDEN = 0.5 * (1.0 + math.sqrt(5.0))


class CatalogError(ValueError):
    pass


@dataclass(frozen=True)
class ParamSpec:
    name: str
    default: float
    doc: str = ""


@dataclass(frozen=True)
class Constraint:
    name: str
    margin: float
    text: str

    @property
    def passed(self) -> bool:
        return self.margin > 0


@dataclass(frozen=True)
class ConstraintVerdict:
    entry: str
    params: dict
    constraints: tuple[Constraint, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.constraints)

    @property
    def violated(self) -> list[Constraint]:
        return [c for c in self.constraints if not c.passed]

    def describe(self) -> str:
        lines = []
        for c in self.constraints:
            lines.append(f"[{'ok  ' if c.passed else 'FAIL'}] {c.text} (margin {c.margin:.6g})")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "entry": self.entry,
            "params": self.params,
            "passed": self.passed,
            "constraints": [{"name": c.name, "text": c.text, "margin": c.margin, "passed": c.passed} for c in self.constraints],
        }


@dataclass(frozen=True)
class ClosedForms:
    """Printed closed forms; states are unnormalized callables (None when unknown)."""

    potential: Callable[[np.ndarray], np.ndarray]
    energies: tuple[float, ...]
    states: tuple[Callable | None, ...] = ()
    extra: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CatalogEntry:
    name: str
    doc: str
    params: tuple[ParamSpec, ...]
    constraint_text: tuple[str, ...]
    constraints: Callable[[dict], list[Constraint]]
    generator: Callable[[dict], GeneratorSpec | None]
    closed_forms: Callable[[dict], ClosedForms] | None = None
    half_width: Callable[[dict], float] = lambda p: 10.0

    def defaults(self) -> dict:
        return {p.name: p.default for p in self.params}

    def resolve(self, params: Mapping[str, float] | None) -> dict:
        params = dict(params or {})
        unknown = set(params) - {p.name for p in self.params}
        if unknown:
            raise CatalogError(f"{self.name}: unknown parameter(s) {sorted(unknown)}")
        out = self.defaults()
        out.update({k: float(v) for k, v in params.items()})
        return out

    def describe(self) -> dict:
        return {
            "name": self.name,
            "doc": self.doc,
            "params": [{"name": p.name, "default": p.default, "doc": p.doc} for p in self.params],
            "constraints": list(self.constraint_text),
        }


def _positive(name, value) -> Constraint:
    return Constraint(f"{name}>0", value, f"{name} > 0")


# -- rational family U = 4 e e1 x^2 (1 + a^2 x^2) / (1 + b^2 x^2) ------------------------


def rational_interval(epsilon: float, b: float) -> tuple[float, float]:
    """Allowed range of epsilon1 for the rational generator at given epsilon, b.

    The lower end keeps a^2 = b^2 + 2(eps1 - eps)/3 non-negative, the upper end
    comes from the sixth-derivative inequality at x = 0.
    """
    b2 = b * b
    e = epsilon / b2
    disc = 25.0 - 60.0 * e + 68.0 * e * e
    return (e - 1.5) * b2, (13.0 / 4.0 * e - 15.0 / 8.0 + 3.0 / 8.0 * math.sqrt(disc)) * b2


def _rational_a2(epsilon: float, epsilon1: float, b: float) -> float:
    return b * b + 2.0 / 3.0 * (epsilon1 - epsilon)


_U_RATIONAL = "4*eps*eps1*x^2*(1+a2*x^2)/(1+b2*x^2)"


def rational_generator(epsilon: float, epsilon1: float, b: float, description: str = "rational") -> GeneratorSpec:
    """U = 4 eps eps1 x^2 (1 + a^2 x^2)/(1 + b^2 x^2) with a^2 tied to the gaps; no constraint checks."""
    a2 = _rational_a2(epsilon, epsilon1, b)
    u = ex.parse(_U_RATIONAL, {"eps", "eps1", "a2", "b2"})
    return GeneratorSpec(
        u, epsilon, epsilon1, {"eps": epsilon, "eps1": epsilon1, "a2": a2, "b2": b * b}, x0=0.0, description=description
    )


def _rational_constraints(p: dict) -> list[Constraint]:
    e, e1, b = p["epsilon"], p["epsilon1"], p["b"]
    out = [_positive("epsilon", e), _positive("epsilon1", e1), Constraint("b!=0", abs(b), "b != 0")]
    if b == 0:
        return out
    lo, hi = rational_interval(e, b)
    b2 = b * b
    out.append(Constraint("a2>=0", (e1 - lo) / b2, "epsilon1/b^2 >= epsilon/b^2 - 3/2  (a^2 >= 0)"))
    out.append(
        Constraint(
            "epsilon1_upper",
            (hi - e1) / b2,
            "epsilon1/b^2 <= 13/4 e - 15/8 + 3/8 sqrt(25 - 60 e + 68 e^2),  e = epsilon/b^2",
        )
    )
    return out


# -- Case 1: double well -----------------------------------------------------------------


def _case1_params(c: float) -> tuple[float, float, float]:
    b2 = (2.0 - SQRT3) * c * c
    return 1.5 * b2, (1.5 + SQRT3) * b2, math.sqrt(b2)


def _case1_closed(p: dict) -> ClosedForms:
    c2 = p["c"] ** 2

    def v(x):
        s = 1.0 + c2 * np.asarray(x) ** 2
        return c2 * (0.375 * c2 * np.asarray(x) ** 2 + (3.0 - SQRT3) / s + (2.0 * SQRT3 - 3.0) / s**2 - 1.75 * SQRT3 + 1.5)

    def gauss(x):
        return np.exp(-SQRT3 / 4.0 * c2 * np.asarray(x) ** 2)

    def psi0(x):
        return gauss(x) * (1.0 + c2 * np.asarray(x) ** 2) ** ((3.0 - SQRT3) / 2.0)

    def psi1(x):
        return gauss(x) * (1.0 + c2 * np.asarray(x) ** 2) ** ((SQRT3 - 1.0) / 2.0) * np.asarray(x)

    def psi2(x):
        s = c2 * np.asarray(x) ** 2
        return gauss(x) * (1.0 + s) ** ((SQRT3 - 1.0) / 2.0) * (1.0 - s)

    return ClosedForms(v, (0.0, 3.0 * (1.0 - SQRT3 / 2.0) * c2, (3.0 - SQRT3) * c2), (psi0, psi1, psi2))


# -- Case 2: oscillator partner ----------------------------------------------------------


def _case2_closed(p: dict) -> ClosedForms:
    b2 = p["b"] ** 2

    def v(x):
        s = 1.0 + b2 * np.asarray(x) ** 2
        return 0.75 * b2 + b2 * b2 * np.asarray(x) ** 2 / 8.0 - 4.0 * b2 / s**2 + 2.0 * b2 / s

    def psi0(x):
        # zero mode of the same potential written as a partner of the oscillator
        s = b2 * np.asarray(x) ** 2
        return np.exp(-s / 4.0) / (1.0 + s)

    return ClosedForms(v, (0.0, 1.5 * b2, 2.0 * b2), (psi0, None, None))


# -- Case 3: single well tending to a constant -------------------------------------------


def case3_alpha(b: float, epsilon1: float) -> float:
    return 1.0 + 2.0 * epsilon1 / (b * b)


def case3_rho(x, alpha: float, b: float):
    return np.sqrt(1.0 + alpha * (alpha + 1.0) * (1.0 + b * b * np.asarray(x, dtype=float) ** 2))


def case3_potential_limit(b: float, epsilon1: float) -> float:
    """V(x) as x -> +/- infinity."""
    a = case3_alpha(b, epsilon1)
    return b * b * (a * a + 3.0 * a + 1.0) ** 2 / (8.0 * a * (a + 1.0))


def _case3_closed(p: dict) -> ClosedForms:
    b, e1 = p["b"], p["epsilon1"]
    a = case3_alpha(b, e1)
    b2 = b * b

    def v(x):
        x = np.asarray(x, dtype=float)
        s = 1.0 + b2 * x * x
        r = case3_rho(x, a, b)
        out = (
            (a * a + 3 * a + 1) ** 2 / (8 * a * (a + 1))
            + 1 / s
            - 2 / s**2
            - 2 / (r * s**2)
            - (a * a + a - 1) / (r * s)
            - (a * a + a + 1) ** 3 / (8 * a * (a + 1) * r**2)
            + (a * a + a + 1) ** 2 / (4 * r**3)
        )
        return b2 * out

    def state(num, k1, k2):
        def f(x):
            x = np.asarray(x, dtype=float)
            r = case3_rho(x, a, b)
            return num(x, r) / (r - 1.0) * np.exp(-0.5 * r * (1.0 + k1 / a + k2 / (a + 1.0)))

        return f

    psi0 = state(lambda x, r: r + a, 1.0, 1.0)
    psi1 = state(lambda x, r: x, -1.0, 1.0)
    psi2 = state(lambda x, r: r - a - 1.0, -1.0, -1.0)
    return ClosedForms(
        v,
        (0.0, e1 + 1.5 * b2, 2.0 * e1 + 1.5 * b2),
        (psi0, psi1, psi2),
        {"alpha": a, "rho0": float(case3_rho(0.0, a, b)), "v_inf": case3_potential_limit(b, e1)},
    )


def case3_bound_state_count(alpha: float) -> int:
    """Number of square-integrable closed-form Case 3 states.

    Each state decays like exp(-k rho / 2) with rho ~ |x|; the ground state
    always has k > 0, the first excited state needs alpha^2 + alpha - 1 > 0 and
    the second alpha^2 - alpha - 1 > 0.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    return 1 + int(alpha * alpha + alpha - 1.0 > 0.0) + int(alpha * alpha - alpha - 1.0 > 0.0)


def case3_model(
    b: float,
    epsilon1: float,
    points: int = 4001,
    half_width: float | None = None,
    max_spacing: float | None = None,
) -> QesModel:
    """Model assembled from the closed forms; states that fail the tail test are None.

    Near-threshold states decay slowly and push L up; the spacing is capped at
    ``max_spacing`` (default 0.02/|b|) by adding points.
    """
    if b == 0:
        raise CatalogError("b must be non-zero")
    a = case3_alpha(b, epsilon1)
    if not a > 0:
        raise CatalogError(f"alpha = 1 + 2 epsilon1/b^2 must be positive, got {a:.6g}")
    cf = _case3_closed({"b": b, "epsilon1": epsilon1})

    def make(g: Grid):
        return [gr.fix_sign(gr.normalize(f(g.x), g)) for f in cf.states]

    spacing = max_spacing if max_spacing is not None else 0.02 / abs(b)
    g, states = choose_grid(make, half_width or 10.0 / abs(b), points, max_spacing=spacing)
    return QesModel(
        grid=g,
        potential=cf.potential(g.x),
        energies=cf.energies,
        states=tuple(states),
        metadata={"entry": "case3", "params": {"b": b, "epsilon1": epsilon1}, "alpha": a, "v_inf": cf.extra["v_inf"]},
        potential_fn=cf.potential,
    )


# -- simple generators -------------------------------------------------------------------


def _simple_spec(text: str, epsilon: float, epsilon1: float, description: str) -> GeneratorSpec:
    u = ex.parse(text, {"eps", "eps1"})
    return GeneratorSpec(u, epsilon, epsilon1, {"eps": epsilon, "eps1": epsilon1}, x0=0.0, description=description)


def _oscillator_closed(p: dict) -> ClosedForms:
    e = p["epsilon"]
    return ClosedForms(
        lambda x: 0.5 * e * e * np.asarray(x) ** 2 - 0.5 * e,
        (0.0, e, 2.0 * e),
        (
            lambda x: np.exp(-0.5 * e * np.asarray(x) ** 2),
            lambda x: np.asarray(x) * np.exp(-0.5 * e * np.asarray(x) ** 2),
            lambda x: (2.0 * e * np.asarray(x) ** 2 - 1.0) * np.exp(-0.5 * e * np.asarray(x) ** 2),
        ),
    )


def _rosen_morse_closed(p: dict) -> ClosedForms:
    k = p["epsilon"] + 0.5

    def v(x):
        x = np.asarray(x, dtype=float)
        return 0.5 * k * k * np.tanh(x) ** 2 - 0.5 * k / np.cosh(x) ** 2

    return ClosedForms(
        v,
        (0.0, k - 0.5, 2.0 * k - 2.0),
        (lambda x: np.cosh(np.asarray(x, dtype=float)) ** -k, None, None),
        {"v_inf": 0.5 * k * k},
    )


def _entry(name, doc, params, constraint_text, constraints, generator, closed=None, half_width=None):
    ENTRIES[name] = CatalogEntry(
        name, doc, tuple(params), tuple(constraint_text), constraints, generator, closed,
        half_width or (lambda p: 10.0),
    )


ENTRIES: dict[str, CatalogEntry] = {}

_entry(
    "case1",
    "Double-well potential from the rational generator, c-parameterization: "
    "b^2 = (2 - sqrt3) c^2, epsilon = 3b^2/2, epsilon1 = (3/2 + sqrt3) b^2.",
    [ParamSpec("c", 1.0, "width parameter, c != 0")],
    ["c != 0"],
    lambda p: [Constraint("c!=0", abs(p["c"]), "c != 0")],
    lambda p: rational_generator(*_case1_params(p["c"]), description=f"case1 c={p['c']:g}"),
    _case1_closed,
    lambda p: 10.0 / abs(p["c"]),
)
_entry(
    "case2",
    "Oscillator SUSY partner from the rational generator: epsilon = 3b^2/2, epsilon1 = b^2/2, a^2 = b^2/3.",
    [ParamSpec("b", 1.0, "width parameter, b != 0")],
    ["b != 0"],
    lambda p: [Constraint("b!=0", abs(p["b"]), "b != 0")],
    lambda p: rational_generator(1.5 * p["b"] ** 2, 0.5 * p["b"] ** 2, p["b"], f"case2 b={p['b']:g}"),
    _case2_closed,
    lambda p: 10.0 / abs(p["b"]),
)
_entry(
    "case3",
    "Single well tending to a constant: a = 0, U = 4 eps eps1 x^2/(1 + b^2 x^2), epsilon = epsilon1 + 3b^2/2. "
    "alpha = 1 + 2 epsilon1/b^2 > 0 is required; the generator pipeline additionally needs epsilon1 > 0, "
    "below that only the closed forms are available.",
    [ParamSpec("b", 1.0, "width parameter, b != 0"), ParamSpec("epsilon1", 1.0, "second gap; epsilon = epsilon1 + 3b^2/2")],
    ["b != 0", "alpha = 1 + 2 epsilon1/b^2 > 0", "constraint epsilon = epsilon1 + 3b^2/2"],
    lambda p: [
        Constraint("b!=0", abs(p["b"]), "b != 0"),
        Constraint("alpha>0", case3_alpha(p["b"], p["epsilon1"]) if p["b"] else -1.0, "alpha = 1 + 2 epsilon1/b^2 > 0"),
    ],
    lambda p: (
        rational_generator(p["epsilon1"] + 1.5 * p["b"] ** 2, p["epsilon1"], p["b"], f"case3 b={p['b']:g} epsilon1={p['epsilon1']:g}")
        if p["epsilon1"] > 0
        else None
    ),
    _case3_closed,
    lambda p: 10.0 / abs(p["b"]),
)
_entry(
    "oscillator",
    "Harmonic oscillator: U = 4 eps eps1 x^2 with epsilon1 = epsilon, giving W0 = epsilon x.",
    [ParamSpec("epsilon", 1.0, "level spacing")],
    ["epsilon > 0", "epsilon1 = epsilon"],
    lambda p: [_positive("epsilon", p["epsilon"])],
    lambda p: _simple_spec("4*eps*eps1*x^2", p["epsilon"], p["epsilon"], f"oscillator epsilon={p['epsilon']:g}"),
    _oscillator_closed,
    lambda p: 10.0 / math.sqrt(p["epsilon"]),
)
_entry(
    "rosen_morse",
    "Rosen-Morse well: U = 4 eps eps1 tanh^2 x with epsilon1 = epsilon - 1, giving W0 = (epsilon + 1/2) tanh x.",
    [ParamSpec("epsilon", 4.0, "first gap; three bound states need epsilon > 3/2")],
    ["epsilon > 3/2", "epsilon1 = epsilon - 1"],
    lambda p: [Constraint("epsilon>3/2", p["epsilon"] - 1.5, "epsilon > 3/2")],
    lambda p: _simple_spec("4*eps*eps1*tanh(x)^2", p["epsilon"], p["epsilon"] - 1.0, f"rosen_morse epsilon={p['epsilon']:g}"),
    _rosen_morse_closed,
)
_entry(
    "razavy",
    "Razavy-type double well: U = 4 eps eps1 sinh^2 x with epsilon1 = epsilon + 1/2. No reference potential.",
    [ParamSpec("epsilon", 1.0, "first gap")],
    ["epsilon > 0", "epsilon1 = epsilon + 1/2"],
    lambda p: [_positive("epsilon", p["epsilon"])],
    lambda p: _simple_spec("4*eps*eps1*sinh(x)^2", p["epsilon"], p["epsilon"] + 0.5, f"razavy epsilon={p['epsilon']:g}"),
)
_entry(
    "rational",
    "General rational generator U = 4 eps eps1 x^2 (1 + a^2 x^2)/(1 + b^2 x^2) with a^2 = b^2 + 2(epsilon1 - epsilon)/3.",
    [
        ParamSpec("epsilon", 1.5, "first gap"),
        ParamSpec("epsilon1", 1.5 + SQRT3, "second gap"),
        ParamSpec("b", 1.0, "pole parameter, b != 0"),
    ],
    [
        "epsilon > 0, epsilon1 > 0, b != 0",
        "epsilon1/b^2 >= epsilon/b^2 - 3/2  (a^2 >= 0)",
        "epsilon1/b^2 <= 13/4 e - 15/8 + 3/8 sqrt(25 - 60 e + 68 e^2),  e = epsilon/b^2",
    ],
    _rational_constraints,
    lambda p: rational_generator(p["epsilon"], p["epsilon1"], p["b"], "rational"),
    None,
    lambda p: 10.0 / math.sqrt(min(p["epsilon"], p["epsilon1"], 1.0)),
)


def names() -> list[str]:
    return list(ENTRIES)


def get(name: str) -> CatalogEntry:
    try:
        return ENTRIES[name]
    except KeyError:
        raise CatalogError(f"unknown catalog entry {name!r}; known: {', '.join(ENTRIES)}") from None


def check_constraints(name: str, params: Mapping[str, float] | None = None) -> ConstraintVerdict:
    entry = get(name)
    p = entry.resolve(params)
    return ConstraintVerdict(name, p, tuple(entry.constraints(p)))


def instantiate(
    name: str, params: Mapping[str, float] | None = None, enforce: bool = True
) -> tuple[GeneratorSpec | None, ClosedForms | None]:
    """GeneratorSpec and closed forms for an entry.

    Raises CatalogError on violated constraints unless ``enforce`` is False, in
    which case the generator is built anyway so its diagnostics can be inspected.
    """
    verdict = check_constraints(name, params)
    if enforce and not verdict.passed:
        raise CatalogError(f"{name}: constraint violated:\n" + "\n".join(f"  {c.text} (margin {c.margin:.6g})" for c in verdict.violated))
    entry = get(name)
    p = verdict.params
    closed = entry.closed_forms(p) if entry.closed_forms else None
    return entry.generator(p), closed


def build_model(
    name: str,
    params: Mapping[str, float] | None = None,
    points: int = 4001,
    half_width: float | None = None,
    enforce: bool = True,
    force: bool = False,
) -> tuple[ValidationReport | None, QesModel]:
    """Run the construction pipeline for a catalog entry and sample the model.

    Case 3 without a generator (epsilon1 <= 0) falls back to the closed forms
    and returns no validation report.  ``force`` builds even when
    validate_generator fails.
    """
    entry = get(name)
    p = entry.resolve(params)
    spec, closed = instantiate(name, p, enforce=enforce)
    extra = dict(closed.extra) if closed else {}
    meta = {"entry": name, "params": dict(p), **{k: v for k, v in extra.items() if k == "v_inf"}}
    if spec is None:
        if name != "case3":
            raise CatalogError(f"{name}: no generator for these parameters")
        return None, case3_model(p["b"], p["epsilon1"], points, half_width)
    report, wp, wpt, triple = construct(spec, force=force)
    hw = half_width if half_width is not None else (entry.half_width(p) if entry.half_width else None)
    spacing = 0.02 / abs(p["b"]) if name == "case3" else None
    model = build_qes_model(triple, wp, wpt, half_width=hw, points=points, metadata=meta, max_spacing=spacing)
    return report, model
