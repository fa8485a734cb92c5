"""Dense-Hilbert-space echo oracles used only by the tests.

Everything here evolves explicit unitaries on small product spaces and knows
nothing about the pseudospin closed forms it checks.
"""

import numpy as np

IZ = np.diag([0.5, -0.5]).astype(complex)
IP = np.array([[0.0, 1.0], [0.0, 0.0]], dtype=complex)
IM = IP.T.conj()
EYE = np.eye(2, dtype=complex)


def kron_chain(*ops):
    out = ops[0]
    for op in ops[1:]:
        out = np.kron(out, op)
    return out


def op_on(total, which, op):
    return kron_chain(*[op if k == which else EYE for k in range(total)])


def expm_herm(h, t):
    vals, vecs = np.linalg.eigh(h)
    return (vecs * np.exp(-2j * np.pi * vals * t)) @ vecs.conj().T


def two_pair_echo(j, c_a, c12_a, c12_b, tau, cross=0.0, state=(0, 1, 0, 1)):
    """Echo envelope of a qubit coupled (Ising) to two bath pairs.

    Four bath spins: (0,1) form pair A, (2,3) form pair B; `j` is the
    4-vector of electron-induced Ising fields, `c_a` the 4-vector of
    qubit-bath couplings.  `cross` adds an inter-pair flip-flop coupling
    between spins 1 and 2, which the pair-product approximation ignores.
    `state` gives the four initial spin projections (0=up, 1=down).
    """
    n = 4
    iz = [op_on(n, k, IZ) for k in range(n)]
    ip = [op_on(n, k, IP) for k in range(n)]
    im = [op_on(n, k, IM) for k in range(n)]

    def flipflop(a, b):
        return ip[a] @ im[b] + im[a] @ ip[b]

    def branch(sign):
        h = sum((j[k] + 0.5 * sign * c_a[k]) * iz[k] for k in range(n))
        h = h + c12_a * (iz[0] @ iz[1]) - 0.25 * c12_a * flipflop(0, 1)
        h = h + c12_b * (iz[2] @ iz[3]) - 0.25 * c12_b * flipflop(2, 3)
        if cross:
            h = h + cross * (iz[1] @ iz[2]) - 0.25 * cross * flipflop(1, 2)
        return h

    up = expm_herm(branch(+1.0), tau)
    um = expm_herm(branch(-1.0), tau)
    psi = np.zeros(2**n, dtype=complex)
    psi[int("".join(map(str, state)), 2)] = 1.0
    return abs(np.vdot(um @ up @ psi, up @ um @ psi))
