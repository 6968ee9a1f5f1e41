"""
Dense Linear Algebra Kernel

Matrix exponential, pivoted linear solves, numerical rank and the Kalman
controllability test. Matrices and vectors are float64 numpy arrays; every
function here is pure and leaves its inputs untouched.
"""

import logging
import warnings
from typing import Tuple

import numpy as np
import scipy.linalg as la

from errors import DimensionError, DomainError, SingularMatrixError

logger = logging.getLogger(__name__)

# Default relative tolerance for the numerical rank
RANK_RTOL = 1e-10

# Pade coefficients b_0..b_m for the orders used by scaling and squaring
PADE_COEFFICIENTS = {
    3: (120., 60., 12., 1.),
    5: (30240., 15120., 3360., 420., 30., 1.),
    7: (17297280., 8648640., 1995840., 277200., 25200., 1512., 56., 1.),
    9: (17643225600., 8821612800., 2075673600., 302702400., 30270240.,
        2162160., 110880., 3960., 90., 1.),
    13: (64764752532480000., 32382376266240000., 7771770303897600.,
         1187353796428800., 129060195264000., 10559470521600.,
         670442572800., 33522128640., 1323241920., 40840800., 960960.,
         16380., 182., 1.),
}

# Largest 1-norm for which each order meets double precision without scaling
PADE_THETA = {
    3: 1.495585217958292e-2,
    5: 2.539398330063230e-1,
    7: 9.504178996162932e-1,
    9: 2.097847961257068e0,
    13: 5.371920351148152e0,
}


def as_matrix(data, name: str = "matrix") -> np.ndarray:
    """Validate and freeze a 2-D real matrix (rows, cols >= 1, finite entries)"""
    matrix = np.array(data, dtype=float)
    if matrix.ndim == 1 and matrix.size > 0:
        matrix = matrix.reshape(-1, 1)
    if matrix.ndim != 2 or matrix.shape[0] < 1 or matrix.shape[1] < 1:
        raise DimensionError(f"{name} must be a non-empty 2-D matrix, got shape {matrix.shape}")
    if not np.all(np.isfinite(matrix)):
        raise DomainError(f"{name} contains non-finite entries")
    matrix.setflags(write=False)
    return matrix


def as_vector(data, name: str = "vector") -> np.ndarray:
    """Validate and freeze a 1-D real vector (dim >= 1, finite entries)"""
    vector = np.array(data, dtype=float).reshape(-1)
    if vector.size < 1:
        raise DimensionError(f"{name} must have at least one entry")
    if not np.all(np.isfinite(vector)):
        raise DomainError(f"{name} contains non-finite entries")
    vector.setflags(write=False)
    return vector


def _require_square(A: np.ndarray, name: str = "A") -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def _pade_terms(X: np.ndarray, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Odd (U) and even (V) parts of the diagonal Pade approximant of exp(X)"""
    b = PADE_COEFFICIENTS[order]
    identity = np.eye(X.shape[0])

    if order == 13:
        X2 = X @ X
        X4 = X2 @ X2
        X6 = X2 @ X4
        U = X @ (X6 @ (b[13] * X6 + b[11] * X4 + b[9] * X2)
                 + b[7] * X6 + b[5] * X4 + b[3] * X2 + b[1] * identity)
        V = (X6 @ (b[12] * X6 + b[10] * X4 + b[8] * X2)
             + b[6] * X6 + b[4] * X4 + b[2] * X2 + b[0] * identity)
        return U, V

    X2 = X @ X
    powers = [identity, X2]
    for _ in range(2, (order + 1) // 2):
        powers.append(powers[-1] @ X2)

    U = sum(b[j] * powers[j // 2] for j in range(order, 0, -2))
    V = sum(b[j] * powers[j // 2] for j in range(order - 1, -1, -2))
    return X @ U, V


def mat_exp(A, t: float = 1.0) -> np.ndarray:
    """
    Matrix exponential e^{At} by scaling and squaring.

    The lowest Pade order whose theta bound covers ||At||_1 is used directly;
    beyond the order-13 bound the argument is halved s times and the result
    squared back.

    Args:
        A: Square matrix
        t: Finite time scale

    Returns:
        e^{At}, same size as A (the identity exactly when t == 0)
    """
    A = _require_square(A)
    if not np.isfinite(t):
        raise DomainError(f"time argument must be finite, got {t}")

    size = A.shape[0]
    if t == 0:
        return np.eye(size)

    X = A * float(t)
    norm = np.linalg.norm(X, 1)
    if norm == 0:
        return np.eye(size)

    scale = 0
    for order in (3, 5, 7, 9):
        if norm <= PADE_THETA[order]:
            break
    else:
        order = 13
        if norm > PADE_THETA[13]:
            scale = max(0, int(np.ceil(np.log2(norm / PADE_THETA[13]))))
            X = X / (2.0 ** scale)

    U, V = _pade_terms(X, order)
    R = la.solve(V - U, V + U, check_finite=False)
    for _ in range(scale):
        R = R @ R
    return R


def _lu(A: np.ndarray):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", la.LinAlgWarning)
        return la.lu_factor(A, check_finite=False)


def _smallest_pivot(lu: np.ndarray) -> Tuple[float, float]:
    pivots = np.abs(np.diag(lu))
    return float(pivots.min()), float(pivots.max())


def solve(A, B) -> np.ndarray:
    """
    Solve A X = B with a row-pivoted LU factorization.

    Raises:
        DimensionError: A not square or B row count differs
        SingularMatrixError: a pivot is zero to working precision
    """
    A = _require_square(A)
    B = np.asarray(B, dtype=float)
    vector_rhs = B.ndim == 1
    if B.shape[0] != A.shape[0]:
        raise DimensionError(f"right-hand side has {B.shape[0]} rows, expected {A.shape[0]}")

    lu, piv = _lu(A)
    smallest, _ = _smallest_pivot(lu)
    threshold = A.shape[0] * np.finfo(float).eps * max(np.abs(A).max(), np.finfo(float).tiny)
    if not np.isfinite(smallest) or smallest <= threshold:
        raise SingularMatrixError("matrix is singular to working precision", smallest)

    X = la.lu_solve((lu, piv), B, check_finite=False)
    return X.reshape(-1) if vector_rhs else X


def determinant(A) -> float:
    """Determinant from the LU factors (product of pivots with permutation sign)"""
    A = _require_square(A)
    lu, piv = _lu(A)
    swaps = np.count_nonzero(piv != np.arange(piv.size))
    sign = -1.0 if swaps % 2 else 1.0
    return float(sign * np.prod(np.diag(lu)))


def condition_estimate(A) -> float:
    """1-norm condition number ||A||_1 ||A^-1||_1; inf when A is singular"""
    A = _require_square(A)
    try:
        inverse = solve(A, np.eye(A.shape[0]))
    except SingularMatrixError:
        return float('inf')
    return float(np.linalg.norm(A, 1) * np.linalg.norm(inverse, 1))


def numerical_rank(A, rtol: float = RANK_RTOL) -> int:
    """Rank via column-pivoted QR; columns count when |R_ii| > rtol * largest column norm"""
    A = np.asarray(A, dtype=float)
    if A.size == 0:
        return 0
    largest = float(np.max(np.linalg.norm(A, axis=0)))
    if largest == 0:
        return 0
    R = la.qr(A, mode='r', pivoting=True, check_finite=False)[0]
    diagonal = np.abs(np.diag(R))
    return int(np.count_nonzero(diagonal > rtol * largest))


def controllability_matrix(A, B) -> np.ndarray:
    """Kalman matrix [B, AB, A^2 B, ..., A^{n-1} B]"""
    A = _require_square(A)
    B = np.asarray(B, dtype=float)
    if B.ndim == 1:
        B = B.reshape(-1, 1)
    n = A.shape[0]
    if B.ndim != 2 or B.shape[0] != n:
        raise DimensionError(f"B must have {n} rows to match A, got shape {B.shape}")

    m = B.shape[1]
    ctrb = np.zeros((n, n * m))
    ctrb[:, :m] = B
    for k in range(1, n):
        ctrb[:, k * m:(k + 1) * m] = A @ ctrb[:, (k - 1) * m:k * m]
    return ctrb


def is_controllable(A, B, rtol: float = RANK_RTOL) -> bool:
    """True iff the controllability matrix has full numerical row rank n"""
    ctrb = controllability_matrix(A, B)
    return numerical_rank(ctrb, rtol) == ctrb.shape[0]


def kron(A, B) -> np.ndarray:
    """Kronecker product A (x) B"""
    return np.kron(np.asarray(A, dtype=float), np.asarray(B, dtype=float))


def matrix_power(A, k: int) -> np.ndarray:
    """A^k for integer k >= 0 (identity for k = 0)"""
    A = _require_square(A)
    if k < 0:
        raise DomainError(f"matrix power must be non-negative, got {k}")
    return np.linalg.matrix_power(A, int(k))
