"""Reference constructions used as test oracles.

Everything here is built from scratch with explicit Kronecker products and
numpy's LAPACK eigensolver, so it shares no code with the package.
"""

import numpy as np

S0 = np.eye(2, dtype=complex)
S1 = np.array([[0, 1], [1, 0]], dtype=complex)
S2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
S3 = np.array([[1, 0], [0, -1]], dtype=complex)
SIGMA = (S1, S2, S3)

UP = np.array([1, 0], dtype=complex)
DOWN = np.array([0, 1], dtype=complex)

# (|+-> - |-+>)/sqrt2 and (|++> - |-->)/sqrt2
SINGLET = (np.kron(UP, DOWN) - np.kron(DOWN, UP)) / np.sqrt(2)
PHI_MINUS = (np.kron(UP, UP) - np.kron(DOWN, DOWN)) / np.sqrt(2)

# critical value of chi-squared with 3 degrees of freedom at p = 1e-3
CHI2_3DOF_999 = 16.266


def kron_matrix(a, b, c):
    """(1 + a.s x 1 + 1 x b.s + c_nm s_n x s_m) / 4 by explicit sums."""
    m = np.kron(S0, S0).astype(complex)
    for n in range(3):
        m = m + a[n] * np.kron(SIGMA[n], S0)
        m = m + b[n] * np.kron(S0, SIGMA[n])
        for k in range(3):
            m = m + c[n][k] * np.kron(SIGMA[n], SIGMA[k])
    return m / 4


def bloch_coefficients(rho):
    """(a, b, c) by direct traces against the Pauli products."""
    a = np.array([np.trace(rho @ np.kron(s, S0)).real for s in SIGMA])
    b = np.array([np.trace(rho @ np.kron(S0, s)).real for s in SIGMA])
    c = np.array([[np.trace(rho @ np.kron(s, t)).real for t in SIGMA] for s in SIGMA])
    return a, b, c


def bloch_coefficients_batch(rhos):
    a = np.einsum("kij,nji->kn", rhos, np.stack([np.kron(s, S0) for s in SIGMA])).real
    b = np.einsum("kij,nji->kn", rhos, np.stack([np.kron(S0, s) for s in SIGMA])).real
    pp = np.stack([[np.kron(s, t) for t in SIGMA] for s in SIGMA])
    c = np.einsum("kij,nmji->knm", rhos, pp).real
    return a, b, c


def projector(v):
    v = np.asarray(v, dtype=complex)
    return np.outer(v, v.conj())


def bell_diagonal_eigenvalues(c1, c2, c3):
    return sorted([
        (1 - c1 - c2 - c3) / 4,
        (1 - c1 + c2 + c3) / 4,
        (1 + c1 - c2 + c3) / 4,
        (1 + c1 + c2 - c3) / 4,
    ])


def partial_transpose_a(rho):
    """Transpose the first qubit by explicit index bookkeeping."""
    out = np.zeros((4, 4), dtype=complex)
    for ia in range(2):
        for ib in range(2):
            for ja in range(2):
                for jb in range(2):
                    out[2 * ja + ib, 2 * ia + jb] = rho[2 * ia + ib, 2 * ja + jb]
    return out


def random_pure_mixed(gen, n):
    """w |psi><psi| + (1 - w) 1/4 with Haar-like psi and uniform w."""
    psi = gen.normal(size=(n, 4)) + 1j * gen.normal(size=(n, 4))
    psi /= np.linalg.norm(psi, axis=1, keepdims=True)
    w = gen.uniform(0, 1, size=n)
    rho = w[:, None, None] * np.einsum("ki,kj->kij", psi, psi.conj())
    return rho + (1 - w)[:, None, None] * np.eye(4) / 4


def random_ginibre(gen, n):
    g = gen.normal(size=(n, 4, 4)) + 1j * gen.normal(size=(n, 4, 4))
    rho = g @ np.conj(np.swapaxes(g, -1, -2))
    return rho / np.trace(rho, axis1=-2, axis2=-1).real[:, None, None]


def random_rotation(gen):
    """Uniform SO(3) element from the QR decomposition of a Gaussian matrix."""
    q, r = np.linalg.qr(gen.normal(size=(3, 3)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def eigvalsh(m):
    return np.linalg.eigvalsh(np.asarray(m))
