'''This module provides the small dense linear algebra kernel shared by the other
gaitfusion modules: a symmetric eigendecomposition, the inverse square root of a
positive semi-definite matrix and singular values. All functions are pure and accept
anything numpy can turn into a two-dimensional array of reals.'''

# Copyright 2018-2019, James Humphry
# This work is released under the ISC license - see LICENSE for details
# SPDX-License-Identifier: ISC

import math

import numpy as np

from . import InputError, SingularityError

SYMMETRY_TOL = 1e-9
JACOBI_OFFDIAG_TOL = 1e-13
JACOBI_MAX_SWEEPS = 100

# Above this order the cyclic Jacobi sweeps become too slow in Python and the LAPACK
# symmetric solver is used instead.
JACOBI_MAX_ORDER = 128

def as_matrix(value, name='matrix'):
    '''Return value as a two-dimensional float64 array, raising InputError if it is not
    two-dimensional or contains non-finite entries.'''

    result = np.array(value, dtype=np.float64)
    if result.ndim != 2:
        raise InputError('{0} must be two-dimensional, not {1}-dimensional'
                         .format(name, result.ndim))
    if not np.all(np.isfinite(result)):
        raise InputError('{0} contains non-finite entries'.format(name))
    return result

def symmetrize(a, name='matrix'):
    '''Check that a is square and symmetric within SYMMETRY_TOL (relative to its largest
    entry, or absolutely for small matrices) and return the average of a and its
    transpose.'''

    a = as_matrix(a, name)
    if a.shape[0] != a.shape[1]:
        raise InputError('{0} must be square, not {1}x{2}'.format(name, *a.shape))
    scale = max(1.0, float(np.max(np.abs(a)))) if a.size else 1.0
    if a.size and np.max(np.abs(a - a.T)) > SYMMETRY_TOL * scale:
        raise InputError('{0} is not symmetric'.format(name))
    return 0.5 * (a + a.T)

def _jacobi_rotate(a, v, p, q):
    '''Apply the Jacobi rotation that annihilates a[p, q] to a (in place, from both
    sides) and accumulate it into the eigenvector matrix v.'''

    apq = a[p, q]
    theta = (a[q, q] - a[p, p]) / (2.0 * apq)
    if abs(theta) > 1e150:
        t = 0.5 / theta
    else:
        t = 1.0 / (abs(theta) + math.sqrt(theta * theta + 1.0))
        if theta < 0.0:
            t = -t
    c = 1.0 / math.sqrt(t * t + 1.0)
    s = t * c

    col_p = a[:, p].copy()
    col_q = a[:, q].copy()
    a[:, p] = c * col_p - s * col_q
    a[:, q] = s * col_p + c * col_q

    row_p = a[p, :].copy()
    row_q = a[q, :].copy()
    a[p, :] = c * row_p - s * row_q
    a[q, :] = s * row_p + c * row_q
    a[p, q] = 0.0
    a[q, p] = 0.0

    vec_p = v[:, p].copy()
    vec_q = v[:, q].copy()
    v[:, p] = c * vec_p - s * vec_q
    v[:, q] = s * vec_p + c * vec_q

def jacobi_eig(a):
    '''Diagonalise the symmetric matrix a by cyclic Jacobi rotations. Returns the
    (unsorted) eigenvalues, the eigenvector matrix and the number of sweeps performed.'''

    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    v = np.eye(n)
    norm = np.linalg.norm(a)
    sweeps = 0

    while sweeps < JACOBI_MAX_SWEEPS:
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= JACOBI_OFFDIAG_TOL * norm or norm == 0.0:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                if a[p, q] != 0.0:
                    _jacobi_rotate(a, v, p, q)
        sweeps += 1

    return np.diag(a).copy(), v, sweeps

def sym_eig(a):
    '''Return the eigenvalues of the symmetric matrix a in descending order, and a matrix
    whose columns are the corresponding orthonormal eigenvectors.'''

    a = symmetrize(a)
    if a.shape[0] == 0:
        return np.zeros(0), np.zeros((0, 0))

    if a.shape[0] <= JACOBI_MAX_ORDER:
        values, vectors, _ = jacobi_eig(a)
    else:
        values, vectors = np.linalg.eigh(a)

    order = np.argsort(-values, kind='stable')
    return values[order], vectors[:, order]

def inv_sqrt_psd(a, ridge=0.0):
    '''Return R = (a + ridge*I)^(-1/2) for a symmetric positive semi-definite matrix a,
    so that R (a + ridge*I) R = I. A SingularityError naming the smallest eigenvalue is
    raised if the regularised matrix is not positive definite.'''

    if ridge < 0.0:
        raise InputError('ridge must be non-negative, not {0}'.format(ridge))
    a = symmetrize(a)
    regularised = a + ridge * np.eye(a.shape[0])
    values, vectors = sym_eig(regularised)
    if values.size and values[-1] <= 0.0:
        raise SingularityError('Matrix is not positive definite: eigenvalue {0!r}'
                               .format(float(values[-1])))
    return (vectors * (1.0 / np.sqrt(values))) @ vectors.T

def svd_values(m):
    '''Return the singular values of m in descending order.'''

    m = as_matrix(m)
    if m.size == 0:
        return np.zeros(0)
    return np.linalg.svd(m, compute_uv=False)

def svd(m):
    '''Return the thin singular value decomposition (U, s, Vt) of m with the singular
    values s in descending order.'''

    m = as_matrix(m)
    return np.linalg.svd(m, full_matrices=False)
