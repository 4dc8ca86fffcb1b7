"""Substitution-based unification used outside the resolution engine."""

from __future__ import annotations

from fractions import Fraction

from .terms import Constraint, Struct, Var


def walk(t, subst: dict):
    while isinstance(t, Var) and t in subst:
        t = subst[t]
    return t


def unify(a, b, subst: dict | None = None):
    """Return an extended substitution or ``None``.  Never mutates ``subst``."""
    subst = dict(subst) if subst else {}
    stack = [(a, b)]
    while stack:
        x, y = stack.pop()
        x = walk(x, subst)
        y = walk(y, subst)
        if x is y:
            continue
        if isinstance(x, Var):
            subst[x] = y
        elif isinstance(y, Var):
            subst[y] = x
        elif isinstance(x, Struct) and isinstance(y, Struct):
            if x.functor != y.functor or len(x.args) != len(y.args):
                return None
            stack.extend(zip(x.args, y.args))
        elif isinstance(x, Fraction) and isinstance(y, Fraction):
            if x != y:
                return None
        else:
            return None
    return subst


def resolve(t, subst: dict):
    """Apply a substitution fully."""
    t = walk(t, subst)
    if isinstance(t, Struct) and t.args:
        return Struct(t.functor, tuple(resolve(a, subst) for a in t.args))
    if isinstance(t, Constraint):
        return Constraint(t.rel, resolve(t.lhs, subst), resolve(t.rhs, subst))
    return t


def rename(t, mapping: dict):
    """Copy a term with fresh variables (shared through ``mapping``)."""
    if isinstance(t, Var):
        if t.name == "_":
            return Var("_")
        v = mapping.get(t)
        if v is None:
            v = mapping[t] = Var(t.name)
        return v
    if isinstance(t, Struct) and t.args:
        return Struct(t.functor, tuple(rename(a, mapping) for a in t.args))
    if isinstance(t, Constraint):
        return Constraint(t.rel, rename(t.lhs, mapping), rename(t.rhs, mapping))
    return t


def matches_pattern(term, pattern) -> bool:
    """Do two terms unify once their variables are standardized apart?"""
    return unify(rename(term, {}), rename(pattern, {})) is not None


def is_variant(a, b) -> bool:
    """Equal up to a consistent one-to-one renaming of variables."""
    fwd: dict = {}
    bwd: dict = {}

    def go(x, y) -> bool:
        if isinstance(x, Var) or isinstance(y, Var):
            if not (isinstance(x, Var) and isinstance(y, Var)):
                return False
            if fwd.setdefault(x, y) is not y or bwd.setdefault(y, x) is not x:
                return False
            return True
        if isinstance(x, Struct) and isinstance(y, Struct):
            return (
                x.functor == y.functor
                and len(x.args) == len(y.args)
                and all(go(p, q) for p, q in zip(x.args, y.args))
            )
        return x == y

    return go(a, b)
