"""Second-order forward-mode automatic differentiation in two variables.

A :class:`Jet` carries a value together with its gradient and Hessian with
respect to the two chart coordinates.  Values may be numpy arrays, in which
case the derivative axes are appended at the end: ``grad`` has shape
``value.shape + (2,)`` and ``hess`` has shape ``value.shape + (2, 2)``.

The elementary functions in this module (:func:`sin`, :func:`cos`, ...)
dispatch on their argument, so an embedding written with them can be
evaluated both on plain floats/arrays and on jets.
"""

from __future__ import annotations

import numpy as np


class Jet:
    """Truncated Taylor polynomial of degree two in (xi, zeta)."""

    __slots__ = ("val", "grad", "hess")
    __array_priority__ = 100.0

    def __init__(self, val, grad, hess):
        self.val = np.asarray(val, dtype=float)
        self.grad = np.asarray(grad, dtype=float)
        self.hess = np.asarray(hess, dtype=float)

    @classmethod
    def variable(cls, value, index: int) -> "Jet":
        """Independent variable number ``index`` (0 or 1) seeded at ``value``."""
        value = np.asarray(value, dtype=float)
        grad = np.zeros(value.shape + (2,))
        grad[..., index] = 1.0
        return cls(value, grad, np.zeros(value.shape + (2, 2)))

    @classmethod
    def constant(cls, value, shape=()) -> "Jet":
        value = np.broadcast_to(np.asarray(value, dtype=float), shape)
        return cls(value, np.zeros(value.shape + (2,)), np.zeros(value.shape + (2, 2)))

    # --- arithmetic -------------------------------------------------------

    def __add__(self, other):
        if not isinstance(other, Jet):
            return Jet(self.val + other, self.grad, self.hess)
        return Jet(self.val + other.val, self.grad + other.grad, self.hess + other.hess)

    __radd__ = __add__

    def __neg__(self):
        return Jet(-self.val, -self.grad, -self.hess)

    def __sub__(self, other):
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if not isinstance(other, Jet):
            c = np.asarray(other, dtype=float)
            return Jet(self.val * c, self.grad * c[..., None], self.hess * c[..., None, None])
        u, v = self, other
        gu, gv = u.grad, v.grad
        cross = gu[..., :, None] * gv[..., None, :]
        return Jet(
            u.val * v.val,
            u.grad * v.val[..., None] + v.grad * u.val[..., None],
            u.hess * v.val[..., None, None]
            + v.hess * u.val[..., None, None]
            + cross
            + np.swapaxes(cross, -1, -2),
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        if not isinstance(other, Jet):
            return self * (1.0 / np.asarray(other, dtype=float))
        return self * other.reciprocal()

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def reciprocal(self) -> "Jet":
        x = self.val
        return self._chain(1.0 / x, -1.0 / x**2, 2.0 / x**3)

    def __pow__(self, p):
        if isinstance(p, Jet):
            return exp(log(self) * p)
        p = float(p)
        x = self.val
        if p == 0.0:
            return Jet.constant(1.0, x.shape)
        if p == 2.0:
            return self * self
        return self._chain(x**p, p * x ** (p - 1.0), p * (p - 1.0) * x ** (p - 2.0))

    def _chain(self, f0, f1, f2) -> "Jet":
        """Compose with a scalar function given its value and two derivatives."""
        g = self.grad
        f1 = np.asarray(f1, dtype=float)
        f2 = np.asarray(f2, dtype=float)
        return Jet(
            f0,
            f1[..., None] * g,
            f1[..., None, None] * self.hess
            + f2[..., None, None] * (g[..., :, None] * g[..., None, :]),
        )

    def __repr__(self) -> str:
        return f"Jet(val={self.val!r}, grad={self.grad!r}, hess={self.hess!r})"


# --- elementary functions (dispatch on Jet vs. plain numbers) --------------


def sin(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.val), np.cos(x.val)
        return x._chain(s, c, -s)
    return np.sin(x)


def cos(x):
    if isinstance(x, Jet):
        s, c = np.sin(x.val), np.cos(x.val)
        return x._chain(c, -s, -c)
    return np.cos(x)


def exp(x):
    if isinstance(x, Jet):
        e = np.exp(x.val)
        return x._chain(e, e, e)
    return np.exp(x)


def log(x):
    if isinstance(x, Jet):
        v = x.val
        return x._chain(np.log(v), 1.0 / v, -1.0 / v**2)
    return np.log(x)


def sqrt(x):
    if isinstance(x, Jet):
        r = np.sqrt(x.val)
        return x._chain(r, 0.5 / r, -0.25 / (r * x.val))
    return np.sqrt(x)


def sinh(x):
    if isinstance(x, Jet):
        s, c = np.sinh(x.val), np.cosh(x.val)
        return x._chain(s, c, s)
    return np.sinh(x)


def cosh(x):
    if isinstance(x, Jet):
        s, c = np.sinh(x.val), np.cosh(x.val)
        return x._chain(c, s, c)
    return np.cosh(x)


def absolute(x):
    """|x|; derivatives taken on the side of the sign of the value."""
    if isinstance(x, Jet):
        sgn = np.where(x.val < 0, -1.0, 1.0)
        return x * sgn
    return np.abs(x)


def value(x):
    return x.val if isinstance(x, Jet) else np.asarray(x, dtype=float)
