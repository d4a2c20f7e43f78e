"""Named test functions for the Itô formula and Wick-Riemann integrands."""

from dataclasses import dataclass

import numpy as np

from .integrate import IntegrandSpec


def _zero(t, x):
    return np.zeros(np.shape(x))


def _one(t, x):
    return np.ones(np.shape(x))


@dataclass(frozen=True)
class ItoFunction:
    """``f(t, x)`` with ``f_t``, ``f_x``, ``f_xx``.

    ``growth = (C, lam)``: f and the three derivatives are bounded by
    ``C exp(lam x^2)``; the Itô formula needs ``lam < 1 / (4 max R)``.
    """

    f: object
    ft: object
    fx: object
    fxx: object
    growth: tuple = (1.0, 0.0)
    label: str = "f"

    def integrand(self):
        """The Wick-Riemann integrand ``phi = f_x`` with ``phi_x = f_xx``."""
        return IntegrandSpec(self.fx, self.fxx, self.growth, f"d/dx {self.label}")


def mollified_abs(c, eps):
    """``sqrt((x - c)^2 + eps^2)``, a smooth stand-in for ``|x - c|``."""
    c = float(c)
    eps = float(eps)

    def f(t, x):
        return np.sqrt((x - c) ** 2 + eps * eps)

    def fx(t, x):
        return (x - c) / np.sqrt((x - c) ** 2 + eps * eps)

    def fxx(t, x):
        return eps * eps / ((x - c) ** 2 + eps * eps) ** 1.5

    return ItoFunction(f, _zero, fx, fxx, (abs(c) + eps + 1.4, 0.1), f"sqrt((x-{c})^2+{eps}^2)")


def _build(T=1.0):
    T = float(T)
    return {
        "x": ItoFunction(lambda t, x: x, _zero, _one, _zero, (1.4, 0.1), "x"),
        "x^2": ItoFunction(lambda t, x: x * x, _zero, lambda t, x: 2.0 * x,
                           lambda t, x: 2.0 * np.ones(np.shape(x)), (4.0, 0.1), "x^2"),
        "x^3": ItoFunction(lambda t, x: x ** 3, _zero, lambda t, x: 3.0 * x * x,
                           lambda t, x: 6.0 * x, (13.0, 0.1), "x^3"),
        "cos": ItoFunction(lambda t, x: np.cos(x), _zero, lambda t, x: -np.sin(x),
                           lambda t, x: -np.cos(x), (1.0, 0.0), "cos(x)"),
        "t*x": ItoFunction(lambda t, x: t * x, lambda t, x: x, lambda t, x: t * np.ones(np.shape(x)),
                           _zero, (1.4 * max(T, 1.0), 0.1), "t*x"),
        "exp(x/2)": ItoFunction(lambda t, x: np.exp(0.5 * x), _zero, lambda t, x: 0.5 * np.exp(0.5 * x),
                                lambda t, x: 0.25 * np.exp(0.5 * x), (1.9, 0.1), "exp(x/2)"),
    }


FUNCTION_NAMES = tuple(_build())


def named_function(name, T=1.0):
    table = _build(T)
    if name not in table:
        raise KeyError(f"unknown function {name!r}; choose from {', '.join(table)}")
    return table[name]


def named_integrand(name, T=1.0):
    """Integrand ``phi`` named by its own formula (``"x"`` means phi(t, x) = x)."""
    table = {
        "1": IntegrandSpec(_one, _zero, (1.0, 0.0), "1"),
        "x": IntegrandSpec(lambda t, x: x, _one, (1.4, 0.1), "x"),
        "x^2": IntegrandSpec(lambda t, x: x * x, lambda t, x: 2.0 * x, (4.0, 0.1), "x^2"),
        "sin": IntegrandSpec(lambda t, x: np.sin(x), lambda t, x: np.cos(x), (1.0, 0.0), "sin(x)"),
        "t": IntegrandSpec(lambda t, x: t * np.ones(np.shape(x)), _zero, (max(float(T), 1.0), 0.0), "t"),
    }
    if name not in table:
        raise KeyError(f"unknown integrand {name!r}; choose from {', '.join(table)}")
    return table[name]


INTEGRAND_NAMES = ("1", "x", "x^2", "sin", "t")
