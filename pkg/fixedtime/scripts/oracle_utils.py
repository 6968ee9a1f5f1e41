"""
Independent Oracles for the Test Suite

Reference computations that share no code with the library: fixed-step RK4
for the joint state/costate flow, Gauss-Legendre quadrature of the Gramian
integral and the endpoint-constraint kernel used to perturb optimal controls.
Exponentials come from scipy.linalg.expm rather than numlin.mat_exp.
"""

from typing import Tuple

import numpy as np
import scipy.linalg as sla
from numpy.polynomial import legendre

from graph import DirectedGraph, from_edges, has_spanning_tree


def random_controllable_pair(rng: np.random.Generator, n: int, m: int,
                             a_scale: float = 0.5) -> Tuple[np.ndarray, np.ndarray]:
    """Random (A, B) with full-rank Kalman matrix; redraws the rare degenerate sample"""
    while True:
        A = a_scale * rng.standard_normal((n, n))
        B = rng.standard_normal((n, m))
        ctrb = np.hstack([np.linalg.matrix_power(A, k) @ B for k in range(n)])
        if np.linalg.matrix_rank(ctrb) == n:
            return A, B


def random_uncontrollable_pair(rng: np.random.Generator, n: int, m: int) -> Tuple[np.ndarray, np.ndarray]:
    """(A, B) with an unreachable subspace, rotated by a random orthogonal change of basis"""
    reachable = rng.integers(1, n)
    A = 0.5 * rng.standard_normal((n, n))
    A[reachable:, :reachable] = 0.0
    B = np.zeros((n, m))
    B[:reachable, :] = rng.standard_normal((reachable, m))
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return Q @ A @ Q.T, Q @ B


def random_spanning_graph(rng: np.random.Generator, agent_count: int) -> DirectedGraph:
    """Random directed graph guaranteed to contain a spanning tree"""
    order = rng.permutation(agent_count) + 1
    edges = set()
    for position in range(1, agent_count):
        parent = order[rng.integers(0, position)]
        edges.add((int(parent), int(order[position])))
    for _ in range(rng.integers(0, agent_count + 1)):
        a, b = rng.choice(agent_count, size=2, replace=False) + 1
        edges.add((int(a), int(b)))
    G = from_edges(agent_count, sorted(edges))
    assert has_spanning_tree(G)
    return G


def hamiltonian(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    n = A.shape[0]
    return np.block([[A, B @ B.T], [np.zeros((n, n)), -A.T]])


def rk4_flow(A: np.ndarray, B: np.ndarray, x0: np.ndarray, p0: np.ndarray,
             tau: float, steps: int = 2000) -> Tuple[np.ndarray, np.ndarray]:
    """Classical fixed-step RK4 on z' = M z with z = (x, p)"""
    M = hamiltonian(A, B)
    z = np.concatenate([x0, p0]).astype(float)
    h = tau / steps
    for _ in range(steps):
        k1 = M @ z
        k2 = M @ (z + 0.5 * h * k1)
        k3 = M @ (z + 0.5 * h * k2)
        k4 = M @ (z + h * k3)
        z = z + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
    n = A.shape[0]
    return z[:n], z[n:]


def gauss_nodes(delta: float, count: int = 40) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, delta]"""
    nodes, weights = legendre.leggauss(count)
    return 0.5 * delta * (nodes + 1.0), 0.5 * delta * weights


def gramian_quadrature(A: np.ndarray, B: np.ndarray, delta: float, count: int = 40) -> np.ndarray:
    """Integral of e^{A(delta - tau)} B B^T e^{-A^T tau} over [0, delta]"""
    nodes, weights = gauss_nodes(delta, count)
    total = np.zeros_like(A, dtype=float)
    for tau, w in zip(nodes, weights):
        total += w * sla.expm(A * (delta - tau)) @ B @ B.T @ sla.expm(-A.T * tau)
    return total


class EndpointKernel:
    """
    Control perturbations v(t) that leave the interval endpoint unchanged.

    v is spanned by Legendre polynomials up to `degree` in each input
    channel; the coefficients are restricted to the null space of the
    endpoint map v -> integral of e^{A(delta - tau)} B v(tau) evaluated
    with the same quadrature used for the costs.
    """

    def __init__(self, A: np.ndarray, B: np.ndarray, delta: float, degree: int = 6, count: int = 40):
        self.A, self.B, self.delta = A, B, delta
        self.m = B.shape[1]
        self.degree = degree
        self.nodes, self.weights = gauss_nodes(delta, count)
        scaled = 2.0 * self.nodes / delta - 1.0
        self.basis = np.stack([legendre.legval(scaled, np.eye(degree + 1)[j]) for j in range(degree + 1)])
        self.propagators = [sla.expm(A * (delta - tau)) @ B for tau in self.nodes]

        columns = []
        for j in range(degree + 1):
            for channel in range(self.m):
                col = sum(w * self.basis[j, q] * self.propagators[q][:, channel]
                          for q, w in enumerate(self.weights))
                columns.append(col)
        self.constraint = np.column_stack(columns)
        self.kernel = sla.null_space(self.constraint)

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        """Perturbation values at the quadrature nodes, shape (nodes, m)"""
        coefficients = self.kernel @ rng.standard_normal(self.kernel.shape[1])
        coefficients = coefficients.reshape(self.degree + 1, self.m)
        return self.basis.T @ coefficients

    def cost(self, values: np.ndarray) -> float:
        """Quadrature of the integral of ||u||^2 from node values (nodes, m)"""
        return float(np.sum(self.weights * np.sum(values ** 2, axis=1)))

    def endpoint_shift(self, values: np.ndarray) -> np.ndarray:
        return sum(w * self.propagators[q] @ values[q] for q, w in enumerate(self.weights))


def protocol_control_at(A: np.ndarray, B: np.ndarray, p: np.ndarray,
                        times: np.ndarray) -> np.ndarray:
    """u(tau) = B^T e^{-A^T tau} p at each time, shape (len(times), m)"""
    return np.stack([B.T @ sla.expm(-A.T * tau) @ p for tau in times])


def relative_error(actual, expected) -> float:
    expected = np.asarray(expected, dtype=float)
    scale = max(np.linalg.norm(expected), np.finfo(float).tiny)
    return float(np.linalg.norm(np.asarray(actual, dtype=float) - expected) / scale)
