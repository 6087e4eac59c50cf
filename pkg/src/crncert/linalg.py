"""Exact integer and rational linear algebra.

Everything here works on Python integers and sympy rationals; floating point
never enters. The nonnegative kernel cone is computed with the double
description method, inserting constraints in row order so that the output is
deterministic.
"""
from __future__ import annotations

import logging
from fractions import Fraction
from functools import reduce
from math import gcd
from typing import Iterable, List, Optional, Sequence, Tuple

import sympy
from sympy.polys.domains import ZZ
from sympy.polys.matrices import DomainMatrix

logger = logging.getLogger(__name__)

IntVector = Tuple[int, ...]


def primitive(vector: Iterable[int]) -> IntVector:
    """Divide an integer vector by the gcd of its entries."""
    values = tuple(int(v) for v in vector)
    g = reduce(gcd, (abs(v) for v in values), 0)
    if g <= 1:
        return values
    return tuple(v // g for v in values)


def primitive_rational(vector: Iterable) -> IntVector:
    """Scale a rational vector to coprime integers, keeping its direction."""
    fractions = [Fraction(str(v)) if not isinstance(v, (int, Fraction)) else Fraction(v)
                 for v in vector]
    lcm = 1
    for f in fractions:
        lcm = lcm * f.denominator // gcd(lcm, f.denominator)
    return primitive(int(f * lcm) for f in fractions)


def exact_rank(rows: Sequence[Sequence[int]]) -> int:
    """Rank by exact fraction-free elimination."""
    if not rows or not rows[0]:
        return 0
    return int(sympy.Matrix(rows).rank())


def kernel_basis(rows: Sequence[Sequence[int]], ncols: int) -> List[IntVector]:
    """Integer basis of the right kernel {v : A v = 0}."""
    if ncols == 0:
        return []
    if not rows:
        return [tuple(1 if i == j else 0 for i in range(ncols)) for j in range(ncols)]
    basis = sympy.Matrix(rows).nullspace()
    return [primitive_rational(list(vec)) for vec in basis]


def integer_det(rows: Sequence[Sequence[int]]) -> int:
    """Determinant of a square integer matrix over ZZ."""
    size = len(rows)
    if size == 0:
        return 1
    matrix = DomainMatrix([[ZZ(int(v)) for v in row] for row in rows], (size, size), ZZ)
    return int(matrix.det())


def _dot(row: Sequence[int], vector: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(row, vector) if a and b)


def _zero_mask(vector: Sequence[int]) -> int:
    mask = 0
    for i, v in enumerate(vector):
        if v == 0:
            mask |= 1 << i
    return mask


def nonnegative_kernel_rays(rows: Sequence[Sequence[int]], ncols: int) -> List[IntVector]:
    """Extreme rays of the pointed cone {v >= 0 : A v = 0}.

    Rays are returned as primitive integer vectors sorted in descending
    lexicographic order. An empty list means the cone is {0}.
    """
    rays: List[IntVector] = [tuple(1 if i == j else 0 for i in range(ncols)) for j in range(ncols)]
    for row in rows:
        if not any(row):
            continue
        values = [_dot(row, ray) for ray in rays]
        zero = [r for r, v in zip(rays, values) if v == 0]
        positive = [(r, v) for r, v in zip(rays, values) if v > 0]
        negative = [(r, v) for r, v in zip(rays, values) if v < 0]
        masks = [_zero_mask(r) for r in rays]
        combined: List[IntVector] = []
        for p, vp in positive:
            zp = _zero_mask(p)
            for q, vq in negative:
                common = zp & _zero_mask(q)
                # Adjacent iff no other current ray is tight on every common zero
                adjacent = True
                for other, mask in zip(rays, masks):
                    if other is p or other is q:
                        continue
                    if mask & common == common:
                        adjacent = False
                        break
                if adjacent:
                    combined.append(primitive(vp * b - vq * a for a, b in zip(p, q)))
        seen = set()
        rays = []
        for ray in zero + combined:
            if ray not in seen:
                seen.add(ray)
                rays.append(ray)
        if not rays:
            break
    return sorted(rays, reverse=True)


def left_kernel_rays(gamma: Sequence[Sequence[int]], nrows: int) -> List[IntVector]:
    """Extreme rays of {d >= 0 : d^T A = 0} for an nrows x m matrix A."""
    ncols = len(gamma[0]) if nrows and gamma else 0
    columns = [[gamma[i][j] for i in range(nrows)] for j in range(ncols)]
    return nonnegative_kernel_rays(columns, nrows)


def right_kernel_rays(gamma: Sequence[Sequence[int]], ncols: int) -> List[IntVector]:
    """Extreme rays of {v >= 0 : A v = 0}."""
    return nonnegative_kernel_rays([list(row) for row in gamma], ncols)


def completed_basis(kernel: Sequence[Sequence], size: int,
                    order: Optional[Sequence[int]] = None) -> Tuple[List[List[Fraction]], int]:
    """Complete independent rows to a basis of `size`-space.

    Returns (rows, r) where the first r rows are standard basis vectors chosen
    greedily in `order` and the remaining rows are the given kernel rows.
    """
    order = list(order) if order is not None else list(range(size))
    kernel_rows = [[int(v) for v in row] for row in kernel]
    chosen: List[List[int]] = []
    current = sympy.Matrix(kernel_rows) if kernel_rows else sympy.zeros(0, size)
    rank = current.rank() if kernel_rows else 0
    for i in order:
        if rank == size:
            break
        unit = [1 if k == i else 0 for k in range(size)]
        candidate = current.col_join(sympy.Matrix([unit])) if current.rows else sympy.Matrix([unit])
        new_rank = candidate.rank()
        if new_rank > rank:
            chosen.append(unit)
            current = candidate
            rank = new_rank
    if rank != size:
        raise AssertionError("basis completion failed")
    return [[Fraction(v) for v in row] for row in chosen + kernel_rows], len(chosen)
