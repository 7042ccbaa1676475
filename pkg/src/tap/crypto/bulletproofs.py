"""Single-value Bulletproofs range proof for v in [0, 2^n), n = 32.

The prover shows that a Pedersen commitment V = v*G + gamma*H opens to an
n-bit value. The inner-product argument is verified with one combined
multi-exponentiation.

Wire layout (all fixed width, 608 bytes for n = 32):
    A S T1 T2 | tau_x mu t_hat | (L_j R_j) * log2(n) | a b
"""

from __future__ import annotations

import hashlib
import secrets

from ..errors import DecodeError
from .commitment import H
from .group import ORDER, Point, inv, multiexp, scalar_from_bytes, scalar_to_bytes
from .transcript import Transcript

N_BITS = 32
ROUNDS = N_BITS.bit_length() - 1
PROOF_LEN = 32 * (4 + 3 + 2 * ROUNDS + 2)

G_VEC = [Point.hash_to_point(b"tap/bp/g/" + i.to_bytes(4, "big")) for i in range(N_BITS)]
H_VEC = [Point.hash_to_point(b"tap/bp/h/" + i.to_bytes(4, "big")) for i in range(N_BITS)]
U = Point.hash_to_point(b"tap/bp/u")

_TWO_POW = [pow(2, i, ORDER) for i in range(N_BITS)]


def _inner(a, b) -> int:
    return sum(x * y for x, y in zip(a, b)) % ORDER


def _powers(x: int, n: int) -> list[int]:
    out, acc = [], 1
    for _ in range(n):
        out.append(acc)
        acc = acc * x % ORDER
    return out


def _rand() -> int:
    return secrets.randbelow(ORDER - 1) + 1


def _start(V: Point, context: bytes) -> Transcript:
    t = Transcript(b"tap/rangeproof/v1")
    t.append(b"n", N_BITS.to_bytes(1, "big"))
    t.append(b"context", context)
    t.append_point(b"V", V)
    return t


def prove(v: int, gamma: int, V: Point, context: bytes = b"") -> bytes:
    """Prove V commits to v's low n bits. Callers enforce 0 <= v < 2^n;
    an out-of-range v yields a proof that fails verification."""
    n = N_BITS
    aL = [(v >> i) & 1 for i in range(n)]
    aR = [(b - 1) % ORDER for b in aL]

    t = _start(V, context)
    alpha = _rand()
    A = H * alpha
    for i in range(n):
        A = A + G_VEC[i] if aL[i] else A - H_VEC[i]
    sL = [_rand() for _ in range(n)]
    sR = [_rand() for _ in range(n)]
    rho = _rand()
    S = H * rho + multiexp(sL + sR, G_VEC + H_VEC)
    t.append_point(b"A", A)
    t.append_point(b"S", S)
    y = t.challenge(b"y")
    z = t.challenge(b"z")

    yn = _powers(y, n)
    z2 = z * z % ORDER
    l0 = [(a - z) % ORDER for a in aL]
    l1 = sL
    r0 = [(yn[i] * (aR[i] + z) + z2 * _TWO_POW[i]) % ORDER for i in range(n)]
    r1 = [yn[i] * sR[i] % ORDER for i in range(n)]
    t1 = (_inner(l0, r1) + _inner(l1, r0)) % ORDER
    t2 = _inner(l1, r1)
    tau1, tau2 = _rand(), _rand()
    T1 = Point.base_mul(t1) + H * tau1
    T2 = Point.base_mul(t2) + H * tau2
    t.append_point(b"T1", T1)
    t.append_point(b"T2", T2)
    x = t.challenge(b"x")

    lv = [(l0[i] + l1[i] * x) % ORDER for i in range(n)]
    rv = [(r0[i] + r1[i] * x) % ORDER for i in range(n)]
    t_hat = _inner(lv, rv)
    tau_x = (tau2 * x * x + tau1 * x + z2 * gamma) % ORDER
    mu = (alpha + rho * x) % ORDER
    t.append_scalar(b"tau_x", tau_x)
    t.append_scalar(b"mu", mu)
    t.append_scalar(b"t_hat", t_hat)
    w = t.challenge(b"w")
    u = U * w

    y_inv = inv(y)
    gs = list(G_VEC)
    hs = [H_VEC[i] * p for i, p in enumerate(_powers(y_inv, n))]
    a, b = lv, rv
    Ls, Rs = [], []
    while len(a) > 1:
        k = len(a) // 2
        a_lo, a_hi, b_lo, b_hi = a[:k], a[k:], b[:k], b[k:]
        cL = _inner(a_lo, b_hi)
        cR = _inner(a_hi, b_lo)
        L = multiexp(a_lo + b_hi + [cL], gs[k:] + hs[:k] + [u])
        R = multiexp(a_hi + b_lo + [cR], gs[:k] + hs[k:] + [u])
        t.append_point(b"L", L)
        t.append_point(b"R", R)
        e = t.challenge(b"e")
        e_inv = inv(e)
        Ls.append(L)
        Rs.append(R)
        a = [(a_lo[i] * e + a_hi[i] * e_inv) % ORDER for i in range(k)]
        b = [(b_lo[i] * e_inv + b_hi[i] * e) % ORDER for i in range(k)]
        gs = [gs[i] * e_inv + gs[k + i] * e for i in range(k)]
        hs = [hs[i] * e + hs[k + i] * e_inv for i in range(k)]

    out = [bytes(A), bytes(S), bytes(T1), bytes(T2),
           scalar_to_bytes(tau_x), scalar_to_bytes(mu), scalar_to_bytes(t_hat)]
    for L, R in zip(Ls, Rs):
        out += [bytes(L), bytes(R)]
    out += [scalar_to_bytes(a[0]), scalar_to_bytes(b[0])]
    return b"".join(out)


def _parse(data: bytes):
    if len(data) != PROOF_LEN:
        raise DecodeError("bad range proof length")
    chunks = [data[i:i + 32] for i in range(0, PROOF_LEN, 32)]
    A, S, T1, T2 = (Point.from_bytes(c) for c in chunks[:4])
    tau_x, mu, t_hat = (scalar_from_bytes(c) for c in chunks[4:7])
    lr = [Point.from_bytes(c) for c in chunks[7:7 + 2 * ROUNDS]]
    a, b = (scalar_from_bytes(c) for c in chunks[7 + 2 * ROUNDS:])
    return A, S, T1, T2, tau_x, mu, t_hat, lr[0::2], lr[1::2], a, b


def verify(V: Point, proof: bytes, context: bytes = b"") -> bool:
    try:
        A, S, T1, T2, tau_x, mu, t_hat, Ls, Rs, a, b = _parse(proof)
    except DecodeError:
        return False
    n = N_BITS
    t = _start(V, context)
    t.append_point(b"A", A)
    t.append_point(b"S", S)
    y = t.challenge(b"y")
    z = t.challenge(b"z")
    t.append_point(b"T1", T1)
    t.append_point(b"T2", T2)
    x = t.challenge(b"x")
    t.append_scalar(b"tau_x", tau_x)
    t.append_scalar(b"mu", mu)
    t.append_scalar(b"t_hat", t_hat)
    w = t.challenge(b"w")
    es = []
    for L, R in zip(Ls, Rs):
        t.append_point(b"L", L)
        t.append_point(b"R", R)
        es.append(t.challenge(b"e"))

    yn = _powers(y, n)
    y_inv_n = _powers(inv(y), n)
    z2 = z * z % ORDER
    z3 = z2 * z % ORDER
    delta = ((z - z2) * sum(yn) - z3 * sum(_TWO_POW)) % ORDER

    # s_i: product over rounds of e_j (index bit set) or e_j^-1 (bit clear),
    # first round decides the most significant index bit
    e_inv = [inv(e) for e in es]
    s = []
    for i in range(n):
        acc = 1
        for j in range(ROUNDS):
            bit = (i >> (ROUNDS - 1 - j)) & 1
            acc = acc * (es[j] if bit else e_inv[j]) % ORDER
        s.append(acc)

    # batch weight for the polynomial check, bound to everything above
    c = int.from_bytes(hashlib.sha512(b"tap/bp/batch" + bytes(V) + proof + context).digest(), "big") % ORDER or 1

    scalars, points = [], []
    for i in range(n):
        scalars.append((-z - a * s[i]) % ORDER)
        points.append(G_VEC[i])
    for i in range(n):
        s_inv = inv(s[i])
        scalars.append((z + (z2 * _TWO_POW[i] - b * s_inv) * y_inv_n[i]) % ORDER)
        points.append(H_VEC[i])
    scalars += [w * (t_hat - a * b) % ORDER, 1, x]
    points += [U, A, S]
    for j in range(ROUNDS):
        scalars += [es[j] * es[j] % ORDER, e_inv[j] * e_inv[j] % ORDER]
        points += [Ls[j], Rs[j]]
    # c * (z^2 V + delta G + x T1 + x^2 T2 - t_hat G - tau_x H)
    scalars += [c * z2 % ORDER, c * x % ORDER, c * x * x % ORDER]
    points += [V, T1, T2]
    g_coeff = c * (delta - t_hat) % ORDER
    h_coeff = (-mu - c * tau_x) % ORDER
    total = multiexp(scalars, points) + Point.base_mul(g_coeff) + H * h_coeff
    return total.is_identity()
